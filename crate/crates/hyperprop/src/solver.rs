//! Solution construction on `Π^T`: Q-power representation, an independent
//! causal marching scheme, residual reports, and L2-generalized solutions by
//! mollification.
//!
//! `solve_qpower` seeds the iteration with the constant-in-time extension
//! `w(x,t) = φ(x)` (in `C_h` exactly when `φ` is), finds the stabilization
//! index, and returns `Q^q w`. `solve_marching` fills the grid level by level
//! in causal order instead: inflow endpoints by pull-back, then outflow
//! endpoints through the boundary map, then interior nodes. The two paths
//! share exit geometry but organize the computation differently; their
//! agreement is a consistency check on both.

use crate::characteristics;
use crate::pifield::{InitialData, PiField};
use crate::qcalc::{QContext, QcOptions, StabilizationOptions};
use crate::system::SystemSpec;
use crate::util::l2_norm_vector;
use crate::{Error, Result};

/// Options shared by the solvers.
#[derive(Clone, Debug, Default)]
pub struct SolveOptions {
    pub qc: QcOptions,
    pub stab: StabilizationOptions,
}

fn check_compat(spec: &SystemSpec, phi: &InitialData, limit: f64) -> Result<()> {
    let defect = spec.compatibility_defect(phi)?;
    let worst = defect.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if worst > limit {
        Err(Error::Incompatible {
            defect: worst,
            limit,
        })
    } else {
        Ok(())
    }
}

/// Continuous solution by the Q-power representation: `u = Q^q w` with
/// `w(x,t) = φ(x)` and `q` the stabilization index.
pub fn solve_qpower(
    spec: &SystemSpec,
    phi: &InitialData,
    t_horizon: f64,
    opts: &SolveOptions,
) -> Result<PiField> {
    check_compat(spec, phi, 1e-8)?;
    let ctx = QContext::new(spec, phi.clone(), t_horizon, opts.qc.clone())?;
    solve_qpower_in(&ctx, opts)
}

/// Q-power solve on an existing context (the context's `φ` is the data).
pub fn solve_qpower_in(ctx: &QContext, opts: &SolveOptions) -> Result<PiField> {
    let q = ctx.stabilization_index(&opts.stab)?;
    let w = ctx.constant_extension(ctx.phi())?;
    ctx.q_power(&w, q)
}

/// Continuous solution by causal forward marching, independent of the
/// Q-power iteration.
pub fn solve_marching(
    spec: &SystemSpec,
    phi: &InitialData,
    t_horizon: f64,
    opts: &SolveOptions,
) -> Result<PiField> {
    check_compat(spec, phi, 1e-8)?;
    let ctx = QContext::new(spec, phi.clone(), t_horizon, opts.qc.clone())?;
    solve_marching_in(&ctx)
}

/// Marching solve on an existing context.
pub fn solve_marching_in(ctx: &QContext) -> Result<PiField> {
    let spec = ctx.spec();
    let phi = ctx.phi();
    let n = spec.n();
    let (nx, nt) = (ctx.nx(), ctx.nt());
    let mut u = ctx.zero_field();

    // Inflow columns as a growing trace; reads stay strictly behind writes.
    let mut in_cols = crate::pifield::BoundaryTrace::zeros(n, ctx.t_horizon(), nt);

    // Level 0 is the initial data.
    let phi_samples = phi.sample(nx)?;
    for j in 0..n {
        for ix in 0..=nx {
            u.set_node(j, ix, 0, phi_samples[j][ix]);
        }
        let ix_in = if spec.in_endpoint(j) == 0.0 { 0 } else { nx };
        in_cols.set_node(j, 0, u.node(j, ix_in, 0));
    }

    let mut xi = vec![0.0; n];
    for it in 1..=nt {
        let t = ctx.t_at(it);
        // Inflow endpoints first: their lateral pull-backs reach at least one
        // full crossing down, so interpolation reads completed levels only.
        for j in 0..n {
            let ix_in = if spec.in_endpoint(j) == 0.0 { 0 } else { nx };
            let e = ctx.exit(j, ix_in, it);
            let v = if e.lateral {
                for (jj, slot) in xi.iter_mut().enumerate() {
                    *slot = in_cols.eval(jj, e.tau);
                }
                e.weight * spec.boundary_component(j, e.tau, &xi)?
            } else {
                e.weight * phi.try_eval(j, e.x_exit)?
            };
            u.set_node(j, ix_in, it, v);
            in_cols.set_node(j, it, v);
        }
        // Outflow endpoints through the boundary map at this level.
        for (jj, slot) in xi.iter_mut().enumerate() {
            *slot = in_cols.node(jj, it);
        }
        let h = spec.boundary_map(t, &xi)?;
        for j in 0..n {
            let ix_out = if spec.out_endpoint(j) == 0.0 { 0 } else { nx };
            u.set_node(j, ix_out, it, h[j]);
        }
        // Interior nodes by pull-back.
        for j in 0..n {
            for ix in 1..nx {
                let e = ctx.exit(j, ix, it);
                let v = if e.lateral {
                    for (jj, slot) in xi.iter_mut().enumerate() {
                        *slot = in_cols.eval(jj, e.tau);
                    }
                    e.weight * spec.boundary_component(j, e.tau, &xi)?
                } else {
                    e.weight * phi.try_eval(j, e.x_exit)?
                };
                u.set_node(j, ix, it, v);
            }
        }
    }
    Ok(u)
}

/// Residuals of a candidate solution.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    /// `sup |u - Qu|` over the grid.
    pub fixed_point: f64,
    /// Central-difference residual of the PDE at interior nodes outside the
    /// kink tubes.
    pub pde_interior: f64,
    /// Nodes excluded by the tubes (diagnostic).
    pub excluded_nodes: usize,
    /// `sup |u(·,0) - φ|` at nodes.
    pub initial: f64,
    /// `sup |u_out(t) - h(t, u_in(t))|` at time nodes.
    pub boundary: f64,
}

impl std::fmt::Display for ResidualReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "  fixed-point residual : {:.3e}", self.fixed_point)?;
        writeln!(
            f,
            "  PDE residual         : {:.3e} ({} nodes excluded near kinks)",
            self.pde_interior, self.excluded_nodes
        )?;
        writeln!(f, "  initial residual     : {:.3e}", self.initial)?;
        writeln!(f, "  boundary residual    : {:.3e}", self.boundary)
    }
}

/// Forward kink lines: characteristics emanating from the bottom corners and
/// their reflection cascade. Returns, per component, a node mask that is true
/// within `width` cells of a kink line of that component.
fn kink_mask(
    spec: &SystemSpec,
    t_horizon: f64,
    nx: usize,
    nt: usize,
    width: usize,
) -> Result<Vec<Vec<bool>>> {
    let n = spec.n();
    let dx = 1.0 / nx as f64;
    let dt = t_horizon / nt as f64;
    let mut mask = vec![vec![false; (nx + 1) * (nt + 1)]; n];

    // Reflection event times; every event spawns one forward curve per
    // component from that component's outflow endpoint.
    let mut times = vec![0.0f64];
    let mut queue = vec![0.0f64];
    let eps = 1e-9;
    let cap = 20_000;
    while let Some(tau) = queue.pop() {
        if times.len() > cap {
            log::warn!("kink cascade truncated at {cap} events");
            break;
        }
        for j in 0..n {
            let arrive = tau + characteristics::crossing_time(spec, j, tau)?;
            if arrive <= t_horizon + eps && !times.iter().any(|t0| (t0 - arrive).abs() < eps) {
                times.push(arrive);
                queue.push(arrive);
            }
        }
    }

    let w = width as isize;
    let mut mark = |comp: usize, x: f64, t: f64| {
        let cx = (x / dx).round() as isize;
        let ct = (t / dt).round() as isize;
        for di in -w..=w {
            for dj in -w..=w {
                let ix = cx + di;
                let it = ct + dj;
                if ix >= 0 && ix <= nx as isize && it >= 0 && it <= nt as isize {
                    mask[comp][it as usize * (nx + 1) + ix as usize] = true;
                }
            }
        }
    };

    // Sampling step keeping both coordinates within half a cell per sample.
    let step = 0.5 * dx.min(dt * spec.speed_floor());
    for &tau in &times {
        for j in 0..n {
            let from = spec.out_endpoint(j);
            let to = spec.in_endpoint(j);
            let total = (to - from).abs();
            let count = (total / step).ceil() as usize;
            let h = (to - from) / count as f64;
            let mut xi = from;
            let mut omega = tau;
            mark(j, xi, omega);
            for _ in 0..count {
                // Forward motion: time grows along the curve.
                let a = spec.speed(j, xi, omega)?;
                let mid = spec.speed(j, xi + 0.5 * h, omega + 0.5 * h / a)?;
                omega += h * 0.5 * (1.0 / a + 1.0 / mid);
                xi += h;
                if omega > t_horizon + dt {
                    break;
                }
                mark(j, xi, omega);
            }
        }
    }
    Ok(mask)
}

/// Residual report for a field against the problem it claims to solve.
pub fn residuals(
    spec: &SystemSpec,
    u: &PiField,
    phi: &InitialData,
    tube_width: usize,
    opts: &SolveOptions,
) -> Result<ResidualReport> {
    let (nx, nt) = (u.nx(), u.nt());
    let t_horizon = u.t_horizon();
    let mut qc = opts.qc.clone();
    qc.nx = nx;
    qc.nt = Some(nt);
    let ctx = QContext::new(spec, phi.clone(), t_horizon, qc)?;
    let qu = ctx.apply_q(u)?;
    let fixed_point = u.sup_diff(&qu);

    let phi_samples = phi.sample(nx)?;
    let mut initial = 0.0f64;
    for j in 0..spec.n() {
        for ix in 0..=nx {
            initial = initial.max((u.node(j, ix, 0) - phi_samples[j][ix]).abs());
        }
    }

    let mut boundary = 0.0f64;
    for it in 0..=nt {
        let t = u.t_at(it);
        let xi: Vec<f64> = spec.assemble_in(|j, x| u.node(j, if x == 0.0 { 0 } else { nx }, it));
        let h = spec.boundary_map(t, &xi)?;
        for j in 0..spec.n() {
            let ix_out = if spec.out_endpoint(j) == 0.0 { 0 } else { nx };
            boundary = boundary.max((u.node(j, ix_out, it) - h[j]).abs());
        }
    }

    let mask = kink_mask(spec, t_horizon, nx, nt, tube_width)?;
    let dx = u.dx();
    let dt = u.dt();
    let mut pde = 0.0f64;
    let mut excluded = 0usize;
    for j in 0..spec.n() {
        for it in 1..nt {
            let t = u.t_at(it);
            for ix in 1..nx {
                if mask[j][it * (nx + 1) + ix] {
                    excluded += 1;
                    continue;
                }
                let x = u.x_at(ix);
                let ut = (u.node(j, ix, it + 1) - u.node(j, ix, it - 1)) / (2.0 * dt);
                let ux = (u.node(j, ix + 1, it) - u.node(j, ix - 1, it)) / (2.0 * dx);
                let a = spec.speed(j, x, t)?;
                let b = spec.damping(j, x, t)?;
                let r = ut + a * ux + b * u.node(j, ix, it);
                pde = pde.max(r.abs());
            }
        }
    }

    Ok(ResidualReport {
        fixed_point,
        pde_interior: pde,
        excluded_nodes: excluded,
        initial,
        boundary,
    })
}

/// One-sided mollification of sampled data by a polynomial bump kernel
/// (constant extension beyond the interval keeps the window inside reach).
pub fn mollify(phi: &InitialData, radius: f64, nx: usize) -> Result<InitialData> {
    let n = phi.n();
    // Quartic bump kernel (15/16)(1 - s^2)^2 on [-1, 1], unit mass.
    let kernel = |s: f64| 15.0 / 16.0 * (1.0 - s * s).powi(2);
    let quad_points = 65;
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut row = Vec::with_capacity(nx + 1);
        for ix in 0..=nx {
            let x = ix as f64 / nx as f64;
            let mut acc = 0.0;
            let mut weight_sum = 0.0;
            let h = 2.0 / (quad_points - 1) as f64;
            for q in 0..quad_points {
                let s = -1.0 + q as f64 * h;
                let w = if q == 0 || q == quad_points - 1 {
                    0.5
                } else if q % 2 == 1 {
                    2.0
                } else {
                    1.0
                };
                let arg = (x - radius * s).clamp(0.0, 1.0);
                let k = kernel(s);
                acc += w * k * phi.try_eval(j, arg)?;
                weight_sum += w * k;
            }
            row.push(acc / weight_sum);
        }
        out.push(row);
    }
    Ok(InitialData::from_samples(out))
}

/// Add endpoint bumps moving the outflow values of `φ` by `delta` without
/// touching the inflow endpoints.
pub fn correct_initial_data(
    spec: &SystemSpec,
    phi: &InitialData,
    nx: usize,
) -> Result<InitialData> {
    let defect = spec.compatibility_defect(phi)?;
    let mut samples = phi.sample(nx)?;
    for j in 0..spec.n() {
        if defect[j] == 0.0 {
            continue;
        }
        let cx = spec.out_endpoint(j);
        for (ix, v) in samples[j].iter_mut().enumerate() {
            let x = ix as f64 / nx as f64;
            let d = (x - cx).abs() / crate::pifield::CORNER_BUMP_RADIUS;
            if d < 1.0 {
                *v -= defect[j] * crate::exprlang::bump_profile(d);
            }
        }
    }
    Ok(InitialData::from_samples(samples))
}

/// Convergence report of the mollified family.
#[derive(Clone, Debug)]
pub struct L2Report {
    pub radii: Vec<f64>,
    pub slice_times: Vec<f64>,
    /// `distances[i][s]` = L2 distance between the solutions for `radii[i]`
    /// and `radii[i+1]` at `slice_times[s]`.
    pub distances: Vec<Vec<f64>>,
}

impl L2Report {
    /// Max distance over slices, per consecutive radius pair.
    pub fn pair_max(&self) -> Vec<f64> {
        self.distances
            .iter()
            .map(|row| row.iter().fold(0.0f64, |m, v| m.max(*v)))
            .collect()
    }
}

/// Approximate the L2-generalized solution for (possibly rough) data by
/// mollifying with each radius, correcting compatibility, solving, and
/// reporting pairwise slice distances. Returns the finest-radius field.
pub fn solve_l2(
    spec: &SystemSpec,
    phi_rough: &InitialData,
    t_horizon: f64,
    radii: &[f64],
    opts: &SolveOptions,
) -> Result<(PiField, L2Report)> {
    if radii.is_empty() {
        return Err(Error::InvalidSpec(
            "solve_l2 needs at least one radius".into(),
        ));
    }
    let nx = opts.qc.nx;
    let mut fields = Vec::with_capacity(radii.len());
    for &radius in radii {
        let smooth = mollify(phi_rough, radius, nx)?;
        let compatible = correct_initial_data(spec, &smooth, nx)?;
        fields.push(solve_qpower(spec, &compatible, t_horizon, opts)?);
    }
    let slice_times: Vec<f64> = (0..=8).map(|i| t_horizon * i as f64 / 8.0).collect();
    let mut distances = Vec::new();
    for pair in fields.windows(2) {
        let row: Vec<f64> = slice_times
            .iter()
            .map(|&s| {
                let comps: Vec<Vec<f64>> = (0..spec.n())
                    .map(|j| {
                        (0..=nx)
                            .map(|ix| {
                                let x = ix as f64 / nx as f64;
                                pair[0].eval(j, x, s) - pair[1].eval(j, x, s)
                            })
                            .collect()
                    })
                    .collect();
                l2_norm_vector(&comps, 1.0 / nx as f64)
            })
            .collect();
        distances.push(row);
    }
    let finest = fields.pop().unwrap();
    Ok((
        finest,
        L2Report {
            radii: radii.to_vec(),
            slice_times,
            distances,
        },
    ))
}
