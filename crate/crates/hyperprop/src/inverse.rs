//! Inverse source recovery for autonomous linear problems whose solution
//! semigroup is nilpotent.
//!
//! For `du/dt = 𝒜u + f`, `u(0) = u_0`, `u(r) = u_r`, with
//! `(𝒜v)(x) = -A(x) v' - B(x) v` on the domain `v_out = P v_in`, the source
//! is recovered as
//!
//! ```text
//! f = -𝒜 u_r                                        for r >= T,
//! f = -𝒜 u_r + Σ_{k=1..n0} S(kr) 𝒜(u_0 - u_r)       for r <  T,
//! ```
//!
//! with `n0 = ceil(T/r) - 1` and `T` a time beyond which `S(t) = 0`. The
//! generator applies to the given (smooth) data *before* propagation, using
//! the commutation `S(t)𝒜w = 𝒜S(t)w` on the generator domain: propagated
//! fields are only piecewise C^1 and differentiating them across
//! characteristic lines is ill-posed. The state is reconstructed by
//! `u(t) = S(t)u_0 + ∫_0^t S(s) f ds` with composite-Simpson quadrature.

use crate::fts::{certify_linear_nilpotent, estimate_topt, FtsOptions, ToptResult};
use crate::pifield::{InitialData, PiField};
use crate::qcalc::{QcOptions, StabilizationOptions};
use crate::solver::{correct_initial_data, solve_qpower, SolveOptions};
use crate::system::{nilpotency_index, SystemSpec};
use crate::util::integrate_samples;
use crate::{Error, Result};

/// Configuration for semigroup evaluation and source recovery.
#[derive(Clone, Debug)]
pub struct InverseOptions {
    pub qc: QcOptions,
    pub stab: StabilizationOptions,
    /// Options for the nilpotency-time confirmation runs.
    pub fts: FtsOptions,
    /// Refusal threshold for the domain defect of user-provided data.
    pub defect_limit: f64,
    /// Looser gate for generator outputs (their defect carries the
    /// finite-difference noise of the derivative); they are bump-corrected
    /// before propagation.
    pub generator_defect_limit: f64,
    /// Bracket width for the nilpotency time.
    pub bisect_tol: f64,
}

impl Default for InverseOptions {
    fn default() -> Self {
        InverseOptions {
            qc: QcOptions {
                nx: 100,
                ..QcOptions::default()
            },
            stab: StabilizationOptions::default(),
            fts: FtsOptions {
                trials: 16,
                qc: QcOptions {
                    nx: 64,
                    ..QcOptions::default()
                },
                ..FtsOptions::default()
            },
            defect_limit: 1e-8,
            generator_defect_limit: 1e-4,
            bisect_tol: 0.05,
        }
    }
}

/// The data of the inverse problem. Construction enforces the structural
/// hypotheses: autonomous spec, linear boundary with nilpotent `P_abs`,
/// positive `r`, and domain membership of `u_0` and `u_r`.
#[derive(Clone, Debug)]
pub struct InverseProblem {
    spec: SystemSpec,
    r: f64,
    u0: InitialData,
    ur: InitialData,
    u0_deriv: Option<InitialData>,
    ur_deriv: Option<InitialData>,
}

impl InverseProblem {
    pub fn new(
        spec: SystemSpec,
        r: f64,
        u0: InitialData,
        ur: InitialData,
        u0_deriv: Option<InitialData>,
        ur_deriv: Option<InitialData>,
    ) -> Result<Self> {
        if !spec.autonomous() {
            return Err(Error::Refused(
                "inverse source recovery needs an autonomous spec".into(),
            ));
        }
        let p = spec.linear_matrix().ok_or_else(|| {
            Error::Refused("inverse source recovery needs a linear boundary".into())
        })?;
        if nilpotency_index(p).is_none() {
            return Err(Error::Refused(
                "|P| is not nilpotent; the solution semigroup does not vanish".into(),
            ));
        }
        if r.is_nan() || r <= 0.0 {
            return Err(Error::InvalidSpec(format!("r must be positive, got {r}")));
        }
        for (name, v) in [("u0", &u0), ("ur", &ur)] {
            let defect = spec.compatibility_defect(v)?;
            let worst = defect.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            if worst > 1e-8 {
                return Err(Error::Incompatible {
                    defect: worst,
                    limit: 1e-8,
                });
            }
            let _ = name;
        }
        Ok(InverseProblem {
            spec,
            r,
            u0,
            ur,
            u0_deriv,
            ur_deriv,
        })
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn u0(&self) -> &InitialData {
        &self.u0
    }

    pub fn ur(&self) -> &InitialData {
        &self.ur
    }
}

/// `n0 = ceil(T/r) - 1`; at exact integer ratios `n0 = T/r - 1`.
pub fn semigroup_term_count(t_nilpotent: f64, r: f64) -> usize {
    let ratio = t_nilpotent / r;
    let n0 = ratio.ceil() - 1.0;
    n0.max(0.0) as usize
}

/// Evolve compatible data to a field on `[0, horizon]`, bump-correcting small
/// compatibility defects first.
fn evolve(
    spec: &SystemSpec,
    phi: &InitialData,
    horizon: f64,
    qc: &QcOptions,
    stab: &StabilizationOptions,
) -> Result<PiField> {
    let corrected = correct_initial_data(spec, phi, qc.nx)?;
    let opts = SolveOptions {
        qc: qc.clone(),
        stab: stab.clone(),
    };
    solve_qpower(spec, &corrected, horizon, &opts)
}

/// `S(t)v` as sampled components on the x-grid: the `t`-slice of the
/// evolution from `v`. Refuses data whose domain defect exceeds the limit;
/// smaller defects are corrected by endpoint bumps before solving.
pub fn semigroup_apply(
    spec: &SystemSpec,
    t: f64,
    v: &InitialData,
    opts: &InverseOptions,
) -> Result<Vec<Vec<f64>>> {
    let defect = spec.compatibility_defect(v)?;
    let worst = defect.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if worst > opts.defect_limit {
        return Err(Error::Incompatible {
            defect: worst,
            limit: opts.defect_limit,
        });
    }
    if t <= 1e-12 {
        return v.sample(opts.qc.nx);
    }
    let field = evolve(spec, v, t, &opts.qc, &opts.stab)?;
    Ok((0..spec.n())
        .map(|j| field.row(j, field.nt()).to_vec())
        .collect())
}

/// Certified time beyond which the semigroup vanishes.
#[derive(Clone, Debug)]
pub struct NilpotencyTime {
    pub nu: usize,
    /// Advisory bound `nu * max crossing time`.
    pub t_bound: f64,
    /// Bisection bracket around the optimal time.
    pub bracket: (f64, f64),
}

impl NilpotencyTime {
    /// The certified upper end of the bracket, used in the source formula.
    /// Larger admissible values only add vanishing semigroup terms.
    pub fn t_certified(&self) -> f64 {
        self.bracket.1
    }
}

/// Confirmed nilpotency time: the advisory bound from the nilpotent
/// certificate, tightened by bisection to the configured bracket width.
pub fn nilpotency_time(spec: &SystemSpec, opts: &InverseOptions) -> Result<NilpotencyTime> {
    let cert = certify_linear_nilpotent(spec, &opts.fts)?
        .ok_or_else(|| Error::Refused("|P| is not nilpotent".into()))?;
    if !cert.confirmed {
        return Err(Error::Refused(format!(
            "nilpotent bound T = {} was not confirmed by the criterion run",
            cert.t_bound
        )));
    }
    let bracket = match estimate_topt(spec, cert.t_bound, opts.bisect_tol, &opts.fts)? {
        ToptResult::Bracket(b) => (b.lo, b.hi),
        ToptResult::NoCertificate { .. } => {
            return Err(Error::Refused(
                "criterion run at the advisory bound found a counterexample".into(),
            ));
        }
    };
    Ok(NilpotencyTime {
        nu: nilpotency_index(spec.linear_matrix().unwrap()).unwrap(),
        t_bound: cert.t_bound,
        bracket,
    })
}

/// Fourth-order derivative of sampled data (central stencil inside, one-sided
/// five-point stencils at the ends).
fn derivative_fd4(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    let v = values;
    out[0] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * dx);
    out[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / (12.0 * dx);
    for i in 2..n - 2 {
        out[i] = (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / (12.0 * dx);
    }
    out[n - 2] = (3.0 * v[n - 1] + 10.0 * v[n - 2] - 18.0 * v[n - 3] + 6.0 * v[n - 4] - v[n - 5])
        / (12.0 * dx);
    out[n - 1] = (25.0 * v[n - 1] - 48.0 * v[n - 2] + 36.0 * v[n - 3] - 16.0 * v[n - 4]
        + 3.0 * v[n - 5])
        / (12.0 * dx);
    out
}

/// `(𝒜v)(x) = -A(x) v' - B(x) v` sampled on the x-grid. The derivative comes
/// from user expressions when given, otherwise from the FD4 fallback.
pub fn apply_generator(
    spec: &SystemSpec,
    v: &InitialData,
    v_deriv: Option<&InitialData>,
    nx: usize,
) -> Result<Vec<Vec<f64>>> {
    let defect = spec.compatibility_defect(v)?;
    let worst = defect.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if worst > 1e-8 {
        return Err(Error::Incompatible {
            defect: worst,
            limit: 1e-8,
        });
    }
    let samples = v.sample(nx)?;
    let derivs: Vec<Vec<f64>> = match v_deriv {
        Some(d) => d.sample(nx)?,
        None => samples
            .iter()
            .map(|row| derivative_fd4(row, 1.0 / nx as f64))
            .collect(),
    };
    let mut out = Vec::with_capacity(spec.n());
    for j in 0..spec.n() {
        let mut row = Vec::with_capacity(nx + 1);
        for ix in 0..=nx {
            let x = ix as f64 / nx as f64;
            let a = spec.speed(j, x, 0.0)?;
            let b = spec.damping(j, x, 0.0)?;
            row.push(-a * derivs[j][ix] - b * samples[j][ix]);
        }
        out.push(row);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct RecoveredSource {
    /// Sampled source components on the x-grid.
    pub f: Vec<Vec<f64>>,
    /// Number of semigroup terms used (0 in the `r >= T` branch).
    pub n0: usize,
    /// The nilpotency time used to select the branch.
    pub t_used: f64,
    pub bracket: (f64, f64),
    /// Whether the `r < T` branch (with semigroup terms) was taken.
    pub summed_branch: bool,
}

/// Recover the source from `u(0)` and `u(r)`.
pub fn recover_source(problem: &InverseProblem, opts: &InverseOptions) -> Result<RecoveredSource> {
    let spec = problem.spec();
    let nx = opts.qc.nx;
    let time = nilpotency_time(spec, opts)?;
    let t_used = time.t_certified();

    let a_ur = apply_generator(spec, &problem.ur, problem.ur_deriv.as_ref(), nx)?;
    let mut f: Vec<Vec<f64>> = a_ur
        .iter()
        .map(|row| row.iter().map(|v| -v).collect())
        .collect();

    let summed_branch = problem.r < t_used;
    let mut n0 = 0;
    if summed_branch {
        n0 = semigroup_term_count(t_used, problem.r);
        if n0 > 0 {
            let a_u0 = apply_generator(spec, &problem.u0, problem.u0_deriv.as_ref(), nx)?;
            let g: Vec<Vec<f64>> = a_u0
                .iter()
                .zip(&a_ur)
                .map(|(r0, rr)| r0.iter().zip(rr).map(|(a, b)| a - b).collect())
                .collect();
            let g_data = InitialData::from_samples(g);
            let defect = spec.compatibility_defect(&g_data)?;
            let worst = defect.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            if worst > opts.generator_defect_limit {
                return Err(Error::Incompatible {
                    defect: worst,
                    limit: opts.generator_defect_limit,
                });
            }
            // One evolution of g; the terms S(kr)g are its aligned slices.
            let nt_r = ((problem.r * nx as f64) - 1e-9).ceil().max(1.0) as usize;
            let mut qc = opts.qc.clone();
            qc.nt = Some(nt_r * n0);
            let field = evolve(spec, &g_data, problem.r * n0 as f64, &qc, &opts.stab)?;
            for k in 1..=n0 {
                let it = k * nt_r;
                for j in 0..spec.n() {
                    for ix in 0..=nx {
                        f[j][ix] += field.node(j, ix, it);
                    }
                }
            }
        }
    }
    Ok(RecoveredSource {
        f,
        n0,
        t_used,
        bracket: time.bracket,
        summed_branch,
    })
}

/// `u(t) = S(t) u_0 + ∫_0^t S(s) f ds` by composite-Simpson quadrature over
/// the slices of one evolution of `f` (at least 64 quadrature points per unit
/// time).
pub fn reconstruct_state(
    problem: &InverseProblem,
    f: &InitialData,
    t: f64,
    opts: &InverseOptions,
) -> Result<Vec<Vec<f64>>> {
    if t < 0.0 || t > problem.r + 1e-12 {
        return Err(Error::InvalidSpec(format!(
            "reconstruction time {t} outside [0, {}]",
            problem.r
        )));
    }
    let spec = problem.spec();
    let nx = opts.qc.nx;
    if t <= 1e-12 {
        return problem.u0.sample(nx);
    }
    let mut state = semigroup_apply(spec, t, &problem.u0, opts)?;

    let mut qc = opts.qc.clone();
    let nt = ((t * nx as f64).ceil() as usize)
        .max((64.0 * t).ceil() as usize)
        .max(2);
    qc.nt = Some(nt);
    let field = evolve(spec, f, t, &qc, &opts.stab)?;
    let dt = field.dt();
    for j in 0..spec.n() {
        for ix in 0..=nx {
            let column: Vec<f64> = (0..=nt).map(|it| field.node(j, ix, it)).collect();
            state[j][ix] += integrate_samples(&column, dt);
        }
    }
    Ok(state)
}

/// Forward Duhamel map used to manufacture test problems:
/// `u(r) = S(r) u_0 + ∫_0^r S(s) f ds`.
pub fn duhamel_forward(
    spec: &SystemSpec,
    u0: &InitialData,
    f: &InitialData,
    r: f64,
    opts: &InverseOptions,
) -> Result<Vec<Vec<f64>>> {
    let mut out = semigroup_apply(spec, r, u0, opts)?;
    let nx = opts.qc.nx;
    let mut qc = opts.qc.clone();
    let nt = ((r * nx as f64).ceil() as usize)
        .max((64.0 * r).ceil() as usize)
        .max(2);
    qc.nt = Some(nt);
    let field = evolve(spec, f, r, &qc, &opts.stab)?;
    let dt = field.dt();
    for j in 0..spec.n() {
        for ix in 0..=nx {
            let column: Vec<f64> = (0..=nt).map(|it| field.node(j, ix, it)).collect();
            out[j][ix] += integrate_samples(&column, dt);
        }
    }
    Ok(out)
}
