//! Randomized certification of the finite-time stability criteria, optimal
//! stabilization time estimation, and the nilpotent linear fast path.
//!
//! The criteria quantify over an infinite-dimensional set of compatible
//! fields, which sampling cannot exhaust: verdicts are therefore
//! `no counterexample found`, never `proven`. A counterexample verdict is
//! replayable from its seed and node alone.

use rayon::prelude::*;

use crate::pifield::{sample_ch, InitialData};
use crate::qcalc::{QContext, QcOptions, StabilizationOptions};
use crate::system::{nilpotency_index, SystemSpec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    /// Vanishing of `Q^k w` at the slice `t = T` for all compatible `w`.
    C0,
    /// Autonomous form: vanishing of `Q^{kq} w` at `t = kT` for all `k`.
    C00,
}

/// A replayable violation: the seeded witness field and the node where the
/// slice failed to vanish.
#[derive(Clone, Debug)]
pub struct CounterexampleWitness {
    pub seed: u64,
    pub trial: usize,
    /// Component index, 0-based.
    pub j: usize,
    pub ix: usize,
    pub it: usize,
    pub x: f64,
    pub t: f64,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub enum Outcome {
    NoCounterexample,
    Counterexample(CounterexampleWitness),
}

#[derive(Clone, Debug)]
pub struct FtsVerdict {
    pub criterion: Criterion,
    pub t_horizon: f64,
    /// Power applied per slice check (the `k` of (C0), the `q` of (C00)).
    pub power: usize,
    pub k_max: Option<usize>,
    pub trials: usize,
    pub tol: f64,
    pub nx: usize,
    pub nt: usize,
    pub modes: usize,
    pub amplitude: f64,
    pub outcome: Outcome,
}

impl FtsVerdict {
    pub fn no_counterexample(&self) -> bool {
        matches!(self.outcome, Outcome::NoCounterexample)
    }
}

impl std::fmt::Display for FtsVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self.criterion {
            Criterion::C0 => "(C0)",
            Criterion::C00 => "(C00)",
        };
        match &self.outcome {
            Outcome::NoCounterexample => write!(
                f,
                "{name} holds at T = {} with power {} (no counterexample in {} trials, tol {:.1e})",
                self.t_horizon, self.power, self.trials, self.tol
            ),
            Outcome::Counterexample(w) => write!(
                f,
                "{name} fails at T = {}: |u_{}({}, {})| = {:.3e} > {:.1e} (trial {}, seed {})",
                self.t_horizon,
                w.j + 1,
                w.x,
                w.t,
                w.value.abs(),
                self.tol,
                w.trial,
                w.seed
            ),
        }
    }
}

/// Trial and tolerance configuration for the criteria checks.
#[derive(Clone, Debug)]
pub struct FtsOptions {
    pub trials: usize,
    pub tol: f64,
    pub seed: u64,
    /// Power to apply; `None` selects the stabilization index, the same power
    /// the stabilization identity singles out (larger powers change nothing
    /// once stabilized).
    pub k: Option<usize>,
    pub modes: usize,
    pub amplitude: f64,
    pub qc: QcOptions,
    pub stab: StabilizationOptions,
}

impl Default for FtsOptions {
    fn default() -> Self {
        FtsOptions {
            trials: 64,
            tol: 1e-10,
            seed: 0xc0de,
            k: None,
            modes: 4,
            amplitude: 1.0,
            qc: QcOptions::default(),
            stab: StabilizationOptions::default(),
        }
    }
}

fn require_homogeneous(spec: &SystemSpec) -> Result<()> {
    let report = spec.validate();
    if !report.homogeneous() {
        let c = report.check("homogeneity").unwrap();
        return Err(Error::Refused(format!(
            "boundary is not homogeneous: h(t,0) != 0, worst {:.3e} ({}); \
             the slice-vanishing criteria do not extend to this case",
            c.worst, c.location
        )));
    }
    Ok(())
}

/// Check criterion (C0): `[Q^k w](·, T) = 0` for seeded compatible fields.
pub fn check_c0(spec: &SystemSpec, t_horizon: f64, opts: &FtsOptions) -> Result<FtsVerdict> {
    require_homogeneous(spec)?;
    let ctx = QContext::new(
        spec,
        InitialData::zero(spec.n()),
        t_horizon,
        opts.qc.clone(),
    )?;
    let power = match opts.k {
        Some(k) => k,
        None => ctx.stabilization_index(&opts.stab)?,
    };
    let witness = run_trials(&ctx, power, 1, ctx.nt(), opts)?;
    Ok(FtsVerdict {
        criterion: Criterion::C0,
        t_horizon,
        power,
        k_max: None,
        trials: opts.trials,
        tol: opts.tol,
        nx: ctx.nx(),
        nt: ctx.nt(),
        modes: opts.modes,
        amplitude: opts.amplitude,
        outcome: match witness {
            Some(w) => Outcome::Counterexample(w),
            None => Outcome::NoCounterexample,
        },
    })
}

/// Check criterion (C00) on an autonomous problem: `[Q^{kq} w](·, kT) = 0`
/// for `k = 1..k_max`, on the grid extended to horizon `k_max * T`.
pub fn check_c00(
    spec: &SystemSpec,
    t_horizon: f64,
    q: Option<usize>,
    k_max: usize,
    opts: &FtsOptions,
) -> Result<FtsVerdict> {
    if !spec.autonomous() {
        return Err(Error::Refused(
            "criterion (C00) requires an autonomous spec".into(),
        ));
    }
    require_homogeneous(spec)?;
    let nx = opts.qc.nx;
    let nt_per = ((t_horizon * nx as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut qc = opts.qc.clone();
    qc.nt = Some(nt_per * k_max);
    let ctx = QContext::new(
        spec,
        InitialData::zero(spec.n()),
        t_horizon * k_max as f64,
        qc,
    )?;
    let power = match q.or(opts.k) {
        Some(q) => q,
        None => ctx.stabilization_index(&opts.stab)?,
    };
    let witness = run_trials(&ctx, power, k_max, nt_per, opts)?;
    Ok(FtsVerdict {
        criterion: Criterion::C00,
        t_horizon,
        power,
        k_max: Some(k_max),
        trials: opts.trials,
        tol: opts.tol,
        nx: ctx.nx(),
        nt: ctx.nt(),
        modes: opts.modes,
        amplitude: opts.amplitude,
        outcome: match witness {
            Some(w) => Outcome::Counterexample(w),
            None => Outcome::NoCounterexample,
        },
    })
}

/// Run the seeded trials; slices `k * nt_per` for `k = 1..=slices` must
/// vanish after `k * power` applications. First failing trial wins, in
/// deterministic trial order.
fn run_trials(
    ctx: &QContext,
    power: usize,
    slices: usize,
    nt_per: usize,
    opts: &FtsOptions,
) -> Result<Option<CounterexampleWitness>> {
    let worker = |trial: usize| -> Result<Option<CounterexampleWitness>> {
        let seed = opts.seed.wrapping_add(trial as u64);
        let w = sample_ch(
            ctx.spec(),
            ctx.t_horizon(),
            ctx.nx(),
            ctx.nt(),
            seed,
            opts.modes,
            opts.amplitude,
        )?;
        let phi_w = InitialData::from_field_bottom(&w);
        let mut v = w;
        for k in 1..=slices {
            v = ctx.q_power_with(&v, power, &phi_w)?;
            let it = k * nt_per;
            for j in 0..ctx.spec().n() {
                for ix in 0..=ctx.nx() {
                    let value = v.node(j, ix, it);
                    if value.abs() > opts.tol {
                        return Ok(Some(CounterexampleWitness {
                            seed,
                            trial,
                            j,
                            ix,
                            it,
                            x: ctx.x_at(ix),
                            t: ctx.t_at(it),
                            value,
                        }));
                    }
                }
            }
        }
        Ok(None)
    };
    // First failure wins in trial order; find_map_first keeps the leftmost
    // hit deterministic while letting passing trials run in parallel.
    (0..opts.trials)
        .into_par_iter()
        .find_map_first(|trial| worker(trial).transpose())
        .transpose()
}

/// Recompute the witness value of a counterexample verdict from its seed.
pub fn replay_witness(spec: &SystemSpec, verdict: &FtsVerdict) -> Result<f64> {
    let w = match &verdict.outcome {
        Outcome::Counterexample(w) => w,
        Outcome::NoCounterexample => {
            return Err(Error::Refused("verdict has no counterexample".into()));
        }
    };
    let qc = QcOptions {
        nx: verdict.nx,
        nt: Some(verdict.nt),
        ..QcOptions::default()
    };
    let total = match verdict.criterion {
        Criterion::C0 => verdict.t_horizon,
        Criterion::C00 => verdict.t_horizon * verdict.k_max.unwrap_or(1) as f64,
    };
    let ctx = QContext::new(spec, InitialData::zero(spec.n()), total, qc)?;
    let field = sample_ch(
        spec,
        total,
        verdict.nx,
        verdict.nt,
        w.seed,
        verdict.modes,
        verdict.amplitude,
    )?;
    let phi_w = InitialData::from_field_bottom(&field);
    let powers = match verdict.criterion {
        Criterion::C0 => verdict.power,
        Criterion::C00 => {
            // Slice index it = k * nt_per determines how many blocks ran.
            let nt_per = verdict.nt / verdict.k_max.unwrap_or(1);
            (w.it / nt_per) * verdict.power
        }
    };
    let v = ctx.q_power_with(&field, powers, &phi_w)?;
    Ok(v.node(w.j, w.ix, w.it))
}

/// Bracket of the optimal stabilization time found by bisection.
#[derive(Clone, Debug)]
pub struct ToptEstimate {
    /// Largest probed horizon that failed.
    pub lo: f64,
    /// Smallest probed horizon that passed.
    pub hi: f64,
    pub probes: Vec<(f64, bool)>,
}

#[derive(Clone, Debug)]
pub enum ToptResult {
    Bracket(ToptEstimate),
    /// (C0) failed at `t_max`; no certificate at or below it.
    NoCertificate {
        t_max: f64,
    },
}

/// Bisect on the horizon with auto power per probe. Bisection relies on
/// pass-monotonicity in `T`, which holds for stabilizable problems (zero for
/// all later times) and is asserted on the test matrix.
pub fn estimate_topt(
    spec: &SystemSpec,
    t_max: f64,
    bisect_tol: f64,
    opts: &FtsOptions,
) -> Result<ToptResult> {
    let mut probes = Vec::new();
    let pass = |t: f64, probes: &mut Vec<(f64, bool)>| -> Result<bool> {
        let verdict = check_c0(spec, t, opts)?;
        let ok = verdict.no_counterexample();
        probes.push((t, ok));
        Ok(ok)
    };
    if !pass(t_max, &mut probes)? {
        return Ok(ToptResult::NoCertificate { t_max });
    }
    let mut lo = 0.0f64;
    let mut hi = t_max;
    while hi - lo > bisect_tol {
        let mid = 0.5 * (lo + hi);
        if pass(mid, &mut probes)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ToptResult::Bracket(ToptEstimate { lo, hi, probes }))
}

/// Certificate of the nilpotent linear fast path.
#[derive(Clone, Debug)]
pub struct NilpotentCertificate {
    /// Least power annihilating `P_abs`.
    pub nu: usize,
    /// `nu` times the maximal crossing time on `[0, t_bound]` (self-consistent
    /// fixed point, started from `nu / speed_floor`).
    pub t_bound: f64,
    /// Whether the advisory bound was confirmed by a (C0) run.
    pub confirmed: bool,
}

/// For a linear boundary with nilpotent `P_abs`, an advisory stabilization
/// bound confirmed by a criterion run; `None` when `P_abs` is not nilpotent.
pub fn certify_linear_nilpotent(
    spec: &SystemSpec,
    opts: &FtsOptions,
) -> Result<Option<NilpotentCertificate>> {
    let p = spec
        .linear_matrix()
        .ok_or_else(|| Error::Refused("nilpotency fast path needs a linear boundary".into()))?;
    let nu = match nilpotency_index(p) {
        Some(nu) => nu,
        None => return Ok(None),
    };
    let mut t_bound = nu as f64 / spec.speed_floor();
    for _ in 0..20 {
        let next = nu as f64 * spec.max_crossing_time(t_bound)?;
        if (next - t_bound).abs() <= 1e-9 {
            t_bound = next;
            break;
        }
        t_bound = next;
    }
    let confirmed = check_c0(spec, t_bound, opts)?.no_counterexample();
    Ok(Some(NilpotentCertificate {
        nu,
        t_bound,
        confirmed,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;
    use crate::system::{Boundary, ValidationConfig};

    fn expr_xt(s: &str) -> crate::exprlang::Expr {
        parse(s, &["x", "t"]).unwrap()
    }

    fn linear_spec(p: Vec<Vec<f64>>, speeds: &[&str]) -> SystemSpec {
        let n = speeds.len();
        let m = speeds
            .iter()
            .filter(|s| !s.trim_start().starts_with('-'))
            .count();
        SystemSpec::new(
            n,
            m,
            speeds.iter().map(|s| expr_xt(s)).collect(),
            vec![expr_xt("0"); n],
            Boundary::Linear { p },
            true,
            1.0,
            ValidationConfig::default(),
        )
        .unwrap()
    }

    fn quick_opts() -> FtsOptions {
        FtsOptions {
            trials: 8,
            qc: QcOptions {
                nx: 48,
                ..QcOptions::default()
            },
            ..FtsOptions::default()
        }
    }

    #[test]
    fn swap_boundary_produces_replayable_counterexample() {
        let spec = linear_spec(vec![vec![0.0, 1.0], vec![1.0, 0.0]], &["1", "-1"]);
        let verdict = check_c0(&spec, 2.0, &quick_opts()).unwrap();
        assert!(!verdict.no_counterexample());
        if let Outcome::Counterexample(w) = &verdict.outcome {
            let replayed = replay_witness(&spec, &verdict).unwrap();
            assert_eq!(replayed, w.value, "replay must be exact");
            assert!(replayed.abs() >= verdict.tol / 2.0);
        }
    }

    #[test]
    fn nilpotent_chain_passes_c0_and_c00() {
        let spec = linear_spec(vec![vec![0.0, 0.0], vec![0.8, 0.0]], &["1", "-1"]);
        let opts = quick_opts();
        let c0 = check_c0(&spec, 2.5, &opts).unwrap();
        assert!(c0.no_counterexample(), "{c0}");
        let c00 = check_c00(&spec, 2.5, None, 3, &opts).unwrap();
        assert!(c00.no_counterexample(), "{c00}");
        // (C00) at (T, q, k_max) implies (C0) at (T, q) with the same seeds.
        let c0_same_power = check_c0(
            &spec,
            2.5,
            &FtsOptions {
                k: Some(c00.power),
                ..opts.clone()
            },
        )
        .unwrap();
        assert!(c0_same_power.no_counterexample());
        // Doubling the power preserves vanishing.
        let doubled = check_c00(&spec, 2.5, Some(2 * c00.power), 3, &opts).unwrap();
        assert!(doubled.no_counterexample());
    }

    #[test]
    fn swap_fails_c00_at_first_slice() {
        let spec = linear_spec(vec![vec![0.0, 1.0], vec![1.0, 0.0]], &["1", "-1"]);
        let verdict = check_c00(&spec, 2.5, None, 2, &quick_opts()).unwrap();
        match &verdict.outcome {
            Outcome::Counterexample(w) => {
                assert_eq!(w.it, verdict.nt / 2, "first slice already fails");
            }
            Outcome::NoCounterexample => panic!("swap boundary cannot stabilize"),
        }
    }

    #[test]
    fn c00_refuses_nonautonomous() {
        let env = ["t", "xi1", "xi2"];
        let spec = SystemSpec::new(
            2,
            1,
            vec![expr_xt("1"), expr_xt("-1")],
            vec![expr_xt("0"), expr_xt("0")],
            Boundary::Nonlinear {
                h: vec![
                    parse("0.5*cos(t)*sin(xi2)", &env).unwrap(),
                    parse("0", &env).unwrap(),
                ],
            },
            false,
            1.0,
            ValidationConfig::default(),
        )
        .unwrap();
        assert!(matches!(
            check_c00(&spec, 2.0, None, 2, &quick_opts()),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn nonhomogeneous_boundary_refused() {
        let env = ["t", "xi1", "xi2"];
        let spec = SystemSpec::new(
            2,
            1,
            vec![expr_xt("1"), expr_xt("-1")],
            vec![expr_xt("0"), expr_xt("0")],
            Boundary::Nonlinear {
                h: vec![
                    parse("if(t <= 4, 0, min((t - 4)^2, 1))", &env).unwrap(),
                    parse("xi1", &env).unwrap(),
                ],
            },
            false,
            1.0,
            ValidationConfig {
                t_max: 6.0,
                ..ValidationConfig::default()
            },
        )
        .unwrap();
        assert!(matches!(
            check_c0(&spec, 3.0, &quick_opts()),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn absorbing_boundary_topt_brackets_one_crossing() {
        let spec = linear_spec(vec![vec![0.0, 0.0], vec![0.0, 0.0]], &["1", "-1"]);
        match estimate_topt(&spec, 2.0, 0.05, &quick_opts()).unwrap() {
            ToptResult::Bracket(b) => {
                assert!(
                    b.lo < 1.0 + 1e-9 && 1.0 <= b.hi + 1e-9,
                    "bracket [{}, {}]",
                    b.lo,
                    b.hi
                );
                assert!(b.hi - b.lo <= 0.05 + 1e-12);
            }
            ToptResult::NoCertificate { .. } => panic!("absorbing walls stabilize"),
        }
    }

    #[test]
    fn certify_nilpotent_and_identity_cases() {
        let spec = linear_spec(vec![vec![0.0, 0.0], vec![0.7, 0.0]], &["1", "-1"]);
        let cert = certify_linear_nilpotent(&spec, &quick_opts())
            .unwrap()
            .expect("chain is nilpotent");
        assert_eq!(cert.nu, 2);
        assert!((cert.t_bound - 2.0).abs() < 1e-9);
        assert!(cert.confirmed);

        let ident = linear_spec(vec![vec![1.0, 0.0], vec![0.0, 1.0]], &["1", "-1"]);
        assert!(certify_linear_nilpotent(&ident, &quick_opts())
            .unwrap()
            .is_none());
    }

    #[test]
    fn certify_triangular_three_by_three_mixed_speeds() {
        let p = vec![
            vec![0.0, 0.4, -0.3],
            vec![0.0, 0.0, 0.6],
            vec![0.0, 0.0, 0.0],
        ];
        let spec = SystemSpec::new(
            3,
            2,
            vec![expr_xt("1"), expr_xt("2"), expr_xt("-1")],
            vec![expr_xt("0"); 3],
            Boundary::Linear { p },
            true,
            1.0,
            ValidationConfig::default(),
        )
        .unwrap();
        let cert = certify_linear_nilpotent(
            &spec,
            &FtsOptions {
                trials: 4,
                qc: QcOptions {
                    nx: 48,
                    ..QcOptions::default()
                },
                ..FtsOptions::default()
            },
        )
        .unwrap()
        .expect("strictly triangular");
        assert_eq!(cert.nu, 3);
        assert!(
            (cert.t_bound - 3.0).abs() < 1e-9,
            "t_bound {}",
            cert.t_bound
        );
        assert!(cert.confirmed);
    }

    #[test]
    fn monotonicity_probe_on_passing_case() {
        let spec = linear_spec(vec![vec![0.0, 0.0], vec![0.8, 0.0]], &["1", "-1"]);
        let opts = quick_opts();
        let base = check_c0(&spec, 2.0, &opts).unwrap();
        assert!(base.no_counterexample());
        let t_min = spec.min_crossing_time(2.0).unwrap();
        let later = check_c0(&spec, 2.0 + t_min, &opts).unwrap();
        assert!(later.no_counterexample());
    }
}
