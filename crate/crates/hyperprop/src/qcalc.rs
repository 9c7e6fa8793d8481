//! The pull-back operators `R`, `S`, `Q` on grid fields, their powers, and
//! stabilization-index detection.
//!
//! `[Ru]_j(t) = h_j(t, u_in(t))` turns a field into a boundary trace;
//! `[Sv]_j(x,t) = c_j · v_j(τ)` transports a trace along characteristics with
//! the exponential weight; `Q` composes the two on lateral exits and reads the
//! initial data `φ` on initial-axis exits. Solutions are exactly the fixed
//! points of `Q`.
//!
//! A [`QContext`] caches per-node exit data once per (spec, grid): exits are
//! independent of the iteration count, and Q-power iteration dominates
//! runtime. Boundary values needed at off-node exit times use linear
//! interpolation of the field's boundary columns, consistent with the field's
//! continuity class; the boundary map itself evaluates at the exact exit time.

use rayon::prelude::*;

use crate::characteristics::{self, ExitKind, TraceOptions};
use crate::pifield::{
    extract_in_trace, field_compat_defect, sample_ch, BoundaryTrace, InitialData, PiField,
};
use crate::system::SystemSpec;
use crate::{Error, Result};

/// Grid and cache configuration for a [`QContext`].
#[derive(Clone, Debug)]
pub struct QcOptions {
    /// Space cells; the grid has `nx + 1` nodes per row.
    pub nx: usize,
    /// Time cells; `None` chooses `ceil(T * nx)`, which aligns characteristics
    /// with nodes for constant unit speeds.
    pub nt: Option<usize>,
    /// RK4 step for the cached exit sweeps (constant speeds bypass it).
    pub trace_step: f64,
    /// Richardson re-trace safeguard for the cache (off by default; the cache
    /// self-check guards accuracy instead).
    pub trace_refine: bool,
    /// Proceed even when the spec's validation report has failures.
    pub override_validation: bool,
}

impl Default for QcOptions {
    fn default() -> Self {
        QcOptions {
            nx: 128,
            nt: None,
            trace_step: 1.0 / 256.0,
            trace_refine: false,
            override_validation: false,
        }
    }
}

/// Stabilization-index search configuration.
#[derive(Clone, Debug)]
pub struct StabilizationOptions {
    /// Sup-norm tolerance for `Q^q w = Q^{q+1} w`. Exact in the continuum; a
    /// grid needs an explicit tolerance.
    pub tol: f64,
    /// Number of seeded witness fields.
    pub witnesses: usize,
    pub seed: u64,
    pub modes: usize,
    pub amplitude: f64,
}

impl Default for StabilizationOptions {
    fn default() -> Self {
        StabilizationOptions {
            tol: 1e-10,
            witnesses: 8,
            seed: 0x5eed,
            modes: 4,
            amplitude: 1.0,
        }
    }
}

/// Slim per-node exit record.
#[derive(Clone, Copy, Debug)]
pub struct ExitEntry {
    pub x_exit: f64,
    pub tau: f64,
    pub lateral: bool,
    pub weight: f64,
}

/// Immutable evaluation context: spec, default initial data, grid, and the
/// cached exit table for every node and component.
pub struct QContext {
    spec: SystemSpec,
    phi: InitialData,
    t_horizon: f64,
    nx: usize,
    nt: usize,
    exits: Vec<Vec<ExitEntry>>,
    t_min: f64,
    q_bound: usize,
    options: QcOptions,
}

impl QContext {
    pub fn new(
        spec: &SystemSpec,
        phi: InitialData,
        t_horizon: f64,
        options: QcOptions,
    ) -> Result<Self> {
        if phi.n() != spec.n() {
            return Err(Error::InvalidSpec(format!(
                "initial data has {} components, spec has {}",
                phi.n(),
                spec.n()
            )));
        }
        if t_horizon.is_nan() || t_horizon <= 0.0 {
            return Err(Error::Grid(format!(
                "horizon must be positive, got {t_horizon}"
            )));
        }
        let report = spec.validate();
        if !report.passed() && !options.override_validation {
            let worst = report.first_failure().unwrap();
            return Err(Error::ValidationFailed(format!(
                "{} check failed: worst violation {:.3e} ({})",
                worst.name, worst.worst, worst.location
            )));
        }

        let nx = options.nx.max(1);
        let nt = options
            .nt
            .unwrap_or(((t_horizon * nx as f64) - 1e-9).ceil().max(1.0) as usize);
        let t_min = spec.min_crossing_time(t_horizon)?;
        let dt = t_horizon / nt as f64;
        if dt > 0.5 * t_min {
            return Err(Error::Grid(format!(
                "time step {dt:.4} exceeds half the minimal crossing time {t_min:.4}; \
                 increase nt"
            )));
        }
        let q_bound = ((t_horizon / t_min) - 1e-9).ceil().max(0.0) as usize + 1;

        let trace_opts = TraceOptions {
            step: options.trace_step,
            refine: options.trace_refine,
            record_path: false,
        };
        let width = nx + 1;
        let template = PiField::zeros(spec.n(), t_horizon, nx, nt);
        let mut exits = Vec::with_capacity(spec.n());
        for j in 0..spec.n() {
            let rows: Vec<Vec<ExitEntry>> = (0..=nt)
                .into_par_iter()
                .map(|it| {
                    let t = template.t_at(it);
                    (0..width)
                        .map(|ix| {
                            let x = template.x_at(ix);
                            let e = characteristics::trace(spec, j, x, t, trace_opts)?;
                            Ok(ExitEntry {
                                x_exit: e.x_exit,
                                tau: e.tau,
                                lateral: e.kind == ExitKind::Lateral,
                                weight: e.weight,
                            })
                        })
                        .collect::<Result<Vec<ExitEntry>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            exits.push(rows.into_iter().flatten().collect());
        }

        let ctx = QContext {
            spec: spec.clone(),
            phi,
            t_horizon,
            nx,
            nt,
            exits,
            t_min,
            q_bound,
            options,
        };
        ctx.cache_self_check()?;
        Ok(ctx)
    }

    /// Re-trace 32 pseudo-random nodes with an independent step and compare
    /// against the cache to 1e-9.
    fn cache_self_check(&self) -> Result<()> {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let opts = TraceOptions {
            step: self.options.trace_step / 2.0,
            refine: false,
            record_path: false,
        };
        for _ in 0..32 {
            let j = (next() % self.spec.n() as u64) as usize;
            let ix = (next() % (self.nx as u64 + 1)) as usize;
            let it = (next() % (self.nt as u64 + 1)) as usize;
            let fresh = characteristics::trace(&self.spec, j, self.x_at(ix), self.t_at(it), opts)?;
            let cached = self.exit(j, ix, it);
            let lateral = fresh.kind == ExitKind::Lateral;
            let consistent = lateral == cached.lateral
                && (fresh.x_exit - cached.x_exit).abs() <= 1e-9
                && (fresh.tau - cached.tau).abs() <= 1e-9
                && (fresh.weight - cached.weight).abs() <= 1e-9;
            // Kind flips at razor-thin margins are legitimate: both branches
            // agree there by compatibility. Only flag genuine drift.
            if !consistent && lateral == cached.lateral {
                return Err(Error::Grid(format!(
                    "exit cache drift at component {}, node ({ix}, {it})",
                    j + 1
                )));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn phi(&self) -> &InitialData {
        &self.phi
    }

    pub fn t_horizon(&self) -> f64 {
        self.t_horizon
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn x_at(&self, ix: usize) -> f64 {
        ix as f64 / self.nx as f64
    }

    pub fn t_at(&self, it: usize) -> f64 {
        self.t_horizon * it as f64 / self.nt as f64
    }

    /// Minimal crossing time of the spec on this horizon.
    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    /// Upper bound for the stabilization index: `ceil(T / t_min) + 1`.
    pub fn q_bound(&self) -> usize {
        self.q_bound
    }

    #[inline]
    pub fn exit(&self, j: usize, ix: usize, it: usize) -> &ExitEntry {
        &self.exits[j][it * (self.nx + 1) + ix]
    }

    pub fn zero_field(&self) -> PiField {
        PiField::zeros(self.spec.n(), self.t_horizon, self.nx, self.nt)
    }

    /// Constant-in-time extension `w(x, t) = φ(x)`, the canonical seed for the
    /// Q-power representation (it lies in `C_h` exactly when `φ` does).
    pub fn constant_extension(&self, phi: &InitialData) -> Result<PiField> {
        let samples = phi.sample(self.nx)?;
        let mut w = self.zero_field();
        for j in 0..self.spec.n() {
            for it in 0..=self.nt {
                for ix in 0..=self.nx {
                    w.set_node(j, ix, it, samples[j][ix]);
                }
            }
        }
        Ok(w)
    }

    /// `[Ru]_j(t) = h_j(t, u_in(t))` on the time grid.
    pub fn apply_r(&self, u: &PiField) -> Result<BoundaryTrace> {
        let n = self.spec.n();
        let mut out = BoundaryTrace::zeros(n, self.t_horizon, self.nt);
        let in_cols = extract_in_trace(u, &self.spec);
        for it in 0..=self.nt {
            let t = self.t_at(it);
            let xi: Vec<f64> = (0..n).map(|j| in_cols.node(j, it)).collect();
            let h = self.spec.boundary_map(t, &xi)?;
            for j in 0..n {
                out.set_node(j, it, h[j]);
            }
        }
        Ok(out)
    }

    /// `[Sv]_j(x,t) = c_j v_j(τ)` at lateral exits; at initial-axis exits the
    /// same formula evaluates `v_j` at `τ = 0`.
    pub fn apply_s(&self, v: &BoundaryTrace) -> Result<PiField> {
        let mut out = self.zero_field();
        for j in 0..self.spec.n() {
            for it in 0..=self.nt {
                for ix in 0..=self.nx {
                    let e = self.exit(j, ix, it);
                    let val = e.weight * v.eval(j, e.tau);
                    out.set_node(j, ix, it, val);
                }
            }
        }
        Ok(out)
    }

    /// One application of `Q` with the context's `φ`.
    pub fn apply_q(&self, u: &PiField) -> Result<PiField> {
        self.apply_q_with(u, &self.phi)
    }

    /// One application of `Q_φ`. Warns (but proceeds) when `u` misses the
    /// compatibility set by more than 1e-8.
    pub fn apply_q_with(&self, u: &PiField, phi: &InitialData) -> Result<PiField> {
        let defect = field_compat_defect(u, &self.spec)?;
        let worst = defect.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if worst > 1e-8 {
            log::warn!("apply_q input has compatibility defect {worst:.3e} (> 1e-8)");
        }
        let in_cols = extract_in_trace(u, &self.spec);
        let n = self.spec.n();
        let width = self.nx + 1;
        let mut out = self.zero_field();
        for j in 0..n {
            let rows: Vec<Vec<f64>> = (0..=self.nt)
                .into_par_iter()
                .map(|it| {
                    let mut xi = vec![0.0; n];
                    let mut row = vec![0.0; width];
                    for ix in 0..width {
                        let e = self.exit(j, ix, it);
                        row[ix] = if e.lateral {
                            for (jj, slot) in xi.iter_mut().enumerate() {
                                *slot = in_cols.eval(jj, e.tau);
                            }
                            e.weight * self.spec.boundary_component(j, e.tau, &xi)?
                        } else {
                            e.weight * phi.try_eval(j, e.x_exit)?
                        };
                    }
                    Ok(row)
                })
                .collect::<Result<Vec<_>>>()?;
            for (it, row) in rows.into_iter().enumerate() {
                for (ix, v) in row.into_iter().enumerate() {
                    out.set_node(j, ix, it, v);
                }
            }
        }
        Ok(out)
    }

    /// `Q^k w` with the context's `φ`.
    pub fn q_power(&self, w: &PiField, k: usize) -> Result<PiField> {
        self.q_power_with(w, k, &self.phi)
    }

    pub fn q_power_with(&self, w: &PiField, k: usize, phi: &InitialData) -> Result<PiField> {
        let mut cur = w.clone();
        for _ in 0..k {
            cur = self.apply_q_with(&cur, phi)?;
        }
        Ok(cur)
    }

    /// `Q^k w` keeping the per-iterate sup-norm of each component.
    pub fn q_power_diagnostics(
        &self,
        w: &PiField,
        k: usize,
        phi: &InitialData,
    ) -> Result<(PiField, Vec<Vec<f64>>)> {
        let mut cur = w.clone();
        let mut sups = Vec::with_capacity(k);
        for _ in 0..k {
            cur = self.apply_q_with(&cur, phi)?;
            let per_comp: Vec<f64> = (0..self.spec.n())
                .map(|j| {
                    (0..=self.nt)
                        .flat_map(|it| cur.row(j, it))
                        .fold(0.0f64, |m, v| m.max(v.abs()))
                })
                .collect();
            sups.push(per_comp);
        }
        Ok((cur, sups))
    }

    /// `(S R)^k u`: the purely lateral composition, without the `φ` branch.
    pub fn sr_power(&self, u: &PiField, k: usize) -> Result<PiField> {
        let mut cur = u.clone();
        for _ in 0..k {
            let trace = self.apply_r(&cur)?;
            cur = self.apply_s(&trace)?;
        }
        Ok(cur)
    }

    /// Least `q <= q_bound` such that `Q^q w` and `Q^{q+1} w` agree within
    /// `opts.tol` in sup-norm for every seeded witness field (each with its
    /// own `φ(x) = w(x, 0)`).
    pub fn stabilization_index(&self, opts: &StabilizationOptions) -> Result<usize> {
        let mut q_needed = 1usize;
        for wit in 0..opts.witnesses {
            let w = sample_ch(
                &self.spec,
                self.t_horizon,
                self.nx,
                self.nt,
                opts.seed.wrapping_add(wit as u64),
                opts.modes,
                opts.amplitude,
            )?;
            let phi_w = InitialData::from_field_bottom(&w);
            let mut prev = self.apply_q_with(&w, &phi_w)?;
            let mut q = 1usize;
            loop {
                let next = self.apply_q_with(&prev, &phi_w)?;
                let diff = prev.sup_diff(&next);
                if diff <= opts.tol {
                    break;
                }
                q += 1;
                if q > self.q_bound {
                    return Err(Error::NoStabilization {
                        bound: self.q_bound,
                        residual: diff,
                    });
                }
                prev = next;
            }
            q_needed = q_needed.max(q);
        }
        Ok(q_needed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;
    use crate::system::{Boundary, ValidationConfig};

    fn expr_xt(src: &str) -> crate::exprlang::Expr {
        parse(src, &["x", "t"]).unwrap()
    }

    fn unit_speeds() -> Vec<crate::exprlang::Expr> {
        vec![expr_xt("1"), expr_xt("-1")]
    }

    fn zero_dampings() -> Vec<crate::exprlang::Expr> {
        vec![expr_xt("0"), expr_xt("0")]
    }

    /// The two-component unit-speed system with sine feedback walls
    /// u_1(0,t) = r(t) sin(u_2(0,t)), u_2(1,t) = sin(s(t) u_1(1,t))^2.
    fn sine_feedback_spec(r: &str, s: &str) -> SystemSpec {
        let env = ["t", "xi1", "xi2"];
        SystemSpec::new(
            2,
            1,
            unit_speeds(),
            zero_dampings(),
            Boundary::Nonlinear {
                h: vec![
                    parse(&format!("({r})*sin(xi2)"), &env).unwrap(),
                    parse(&format!("sin(({s})*xi1)^2"), &env).unwrap(),
                ],
            },
            false,
            1.0,
            ValidationConfig::default(),
        )
        .unwrap()
    }

    fn zero_boundary_spec() -> SystemSpec {
        SystemSpec::new(
            2,
            1,
            unit_speeds(),
            zero_dampings(),
            Boundary::Linear {
                p: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            },
            true,
            1.0,
            ValidationConfig::default(),
        )
        .unwrap()
    }

    fn ctx_for(spec: &SystemSpec, phi: InitialData, t: f64, nx: usize) -> QContext {
        QContext::new(
            spec,
            phi,
            t,
            QcOptions {
                nx,
                ..QcOptions::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn apply_r_zero_field_homogeneous() {
        let spec = sine_feedback_spec("0.8*cos(t)", "0.9");
        let ctx = ctx_for(&spec, InitialData::zero(2), 2.0, 32);
        let u = ctx.zero_field();
        let tr = ctx.apply_r(&u).unwrap();
        for it in 0..=ctx.nt() {
            assert_eq!(tr.node(0, it), 0.0);
            assert_eq!(tr.node(1, it), 0.0);
        }
    }

    #[test]
    fn apply_r_reads_sine_feedback() {
        // With u_2(0, t) = t the first reflected component is r(t) sin(t).
        let spec = sine_feedback_spec("0.8*cos(t)", "0.9");
        let ctx = ctx_for(&spec, InitialData::zero(2), 2.0, 32);
        let u = PiField::from_fn(2, 2.0, 32, ctx.nt(), |j, _, t| if j == 1 { t } else { 0.0 });
        let tr = ctx.apply_r(&u).unwrap();
        for it in (0..=ctx.nt()).step_by(7) {
            let t = ctx.t_at(it);
            let expect = 0.8 * t.cos() * t.sin();
            assert!((tr.node(0, it) - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn apply_r_linear_matches_matrix_oracle() {
        let p = vec![vec![0.3, -1.2], vec![0.5, 0.0]];
        let spec = SystemSpec::new(
            2,
            1,
            unit_speeds(),
            zero_dampings(),
            Boundary::Linear { p: p.clone() },
            true,
            1.0,
            ValidationConfig::default(),
        )
        .unwrap();
        let ctx = ctx_for(&spec, InitialData::zero(2), 1.5, 24);
        let u = PiField::from_fn(2, 1.5, 24, ctx.nt(), |j, x, t| {
            (1.3 * x + 0.7 * t + j as f64).sin()
        });
        let tr = ctx.apply_r(&u).unwrap();
        for it in (0..=ctx.nt()).step_by(5) {
            let xi = [u.node(0, 24, it), u.node(1, 0, it)];
            for j in 0..2 {
                let oracle = p[j][0] * xi[0] + p[j][1] * xi[1];
                assert!((tr.node(j, it) - oracle).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn apply_s_transports_traces() {
        let spec = zero_boundary_spec();
        let ctx = ctx_for(&spec, InitialData::zero(2), 2.0, 64);
        let mut v = BoundaryTrace::zeros(2, 2.0, ctx.nt());
        for it in 0..=ctx.nt() {
            let t = ctx.t_at(it);
            v.set_node(0, it, t);
            v.set_node(1, it, t);
        }
        let sv = ctx.apply_s(&v).unwrap();
        for it in (0..=ctx.nt()).step_by(9) {
            for ix in (0..=64).step_by(7) {
                let (x, t) = (ctx.x_at(ix), ctx.t_at(it));
                let expect = (t - x).max(0.0);
                assert!(
                    (sv.node(0, ix, it) - expect).abs() < 1e-12,
                    "at ({x}, {t}): {} vs {expect}",
                    sv.node(0, ix, it)
                );
            }
        }
        // Homogeneity: S of the zero trace is zero.
        let z = ctx
            .apply_s(&BoundaryTrace::zeros(2, 2.0, ctx.nt()))
            .unwrap();
        assert_eq!(z.sup_norm(0.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn apply_s_with_damping() {
        // a = 1, b = 1: [Sv]_1(x,t) = e^{-x} v_1(t - x) for t >= x.
        let spec = SystemSpec::new(
            2,
            1,
            unit_speeds(),
            vec![expr_xt("1"), expr_xt("0")],
            Boundary::Linear {
                p: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            },
            true,
            1.0,
            ValidationConfig::default(),
        )
        .unwrap();
        let ctx = ctx_for(&spec, InitialData::zero(2), 2.0, 64);
        let mut v = BoundaryTrace::zeros(2, 2.0, ctx.nt());
        for it in 0..=ctx.nt() {
            let t = ctx.t_at(it);
            v.set_node(0, it, t);
        }
        let sv = ctx.apply_s(&v).unwrap();
        for (ix, it) in [(16usize, 96usize), (32, 64), (48, 120)] {
            let (x, t) = (ctx.x_at(ix), ctx.t_at(it));
            assert!(t >= x);
            let expect = (-x).exp() * (t - x);
            assert!((sv.node(0, ix, it) - expect).abs() < 1e-12);
        }
    }

    /// Closed forms of Q and Q^2 for the sine-feedback system, with native
    /// closures for r and s mirroring the expressions.
    struct SineOracle<R: Fn(f64) -> f64, S: Fn(f64) -> f64> {
        r: R,
        s: S,
    }

    impl<R: Fn(f64) -> f64, S: Fn(f64) -> f64> SineOracle<R, S> {
        fn q1(&self, u: &PiField, phi: &InitialData, x: f64, t: f64) -> f64 {
            if x > t {
                phi.eval(0, x - t)
            } else {
                (self.r)(t - x) * u.eval(1, 0.0, t - x).sin()
            }
        }

        fn q2_comp1(&self, u: &PiField, phi: &InitialData, x: f64, t: f64) -> f64 {
            if x > t {
                phi.eval(0, x - t)
            } else if t - x < 1.0 {
                (self.r)(t - x) * phi.eval(1, t - x).sin()
            } else {
                let inner = ((self.s)(t - x - 1.0) * u.eval(0, 1.0, t - x - 1.0))
                    .sin()
                    .powi(2);
                (self.r)(t - x) * inner.sin()
            }
        }

        fn q_comp2(&self, u: &PiField, phi: &InitialData, x: f64, t: f64) -> f64 {
            if t + x < 1.0 {
                phi.eval(1, x + t)
            } else {
                ((self.s)(t + x - 1.0) * u.eval(0, 1.0, t + x - 1.0))
                    .sin()
                    .powi(2)
            }
        }

        fn q2_comp2(&self, u: &PiField, phi: &InitialData, x: f64, t: f64) -> f64 {
            if t + x < 1.0 {
                phi.eval(1, x + t)
            } else if t + x < 2.0 {
                ((self.s)(t + x - 1.0) * phi.eval(0, 2.0 - (t + x)))
                    .sin()
                    .powi(2)
            } else {
                let inner = (self.r)(t + x - 2.0) * u.eval(1, 0.0, t + x - 2.0).sin();
                ((self.s)(t + x - 1.0) * inner).sin().powi(2)
            }
        }
    }

    #[test]
    fn q_matches_closed_forms_on_aligned_grid() {
        let spec = sine_feedback_spec("0.8*cos(t)", "0.9*sin(t) + 0.3");
        let oracle = SineOracle {
            r: |t: f64| 0.8 * t.cos(),
            s: |t: f64| 0.9 * t.sin() + 0.3,
        };
        let nx = 40;
        let t_h = 2.5;
        let w = sample_ch(&spec, t_h, nx, (t_h * nx as f64) as usize, 17, 3, 0.8).unwrap();
        let phi = InitialData::from_field_bottom(&w);
        let ctx = QContext::new(
            &spec,
            phi.clone(),
            t_h,
            QcOptions {
                nx,
                ..QcOptions::default()
            },
        )
        .unwrap();
        let qu = ctx.apply_q(&w).unwrap();
        let q2u = ctx.q_power(&w, 2).unwrap();
        let mut worst = 0.0f64;
        for it in 0..=ctx.nt() {
            for ix in 0..=nx {
                let (x, t) = (ctx.x_at(ix), ctx.t_at(it));
                worst = worst.max((qu.node(0, ix, it) - oracle.q1(&w, &phi, x, t)).abs());
                worst = worst.max((qu.node(1, ix, it) - oracle.q_comp2(&w, &phi, x, t)).abs());
                worst = worst.max((q2u.node(0, ix, it) - oracle.q2_comp1(&w, &phi, x, t)).abs());
                worst = worst.max((q2u.node(1, ix, it) - oracle.q2_comp2(&w, &phi, x, t)).abs());
            }
        }
        assert!(worst <= 1e-12, "worst closed-form mismatch {worst:.3e}");
    }

    #[test]
    fn failed_validation_blocks_context_unless_overridden() {
        let spec = SystemSpec::new(
            2,
            1,
            vec![expr_xt("t - 2"), expr_xt("-1")],
            zero_dampings(),
            Boundary::Linear {
                p: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            },
            false,
            1.0,
            ValidationConfig::default(),
        )
        .unwrap();
        let blocked = QContext::new(
            &spec,
            InitialData::zero(2),
            0.5,
            QcOptions {
                nx: 16,
                ..QcOptions::default()
            },
        );
        assert!(matches!(blocked, Err(crate::Error::ValidationFailed(_))));

        // A nonhomogeneous boundary also blocks, but the override admits it
        // (the geometry is fine; only the stability criteria are off-limits).
        let env = ["t", "xi1", "xi2"];
        let driven = SystemSpec::new(
            2,
            1,
            unit_speeds(),
            zero_dampings(),
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
        assert!(QContext::new(
            &driven,
            InitialData::zero(2),
            1.0,
            QcOptions {
                nx: 16,
                ..QcOptions::default()
            },
        )
        .is_err());
        assert!(QContext::new(
            &driven,
            InitialData::zero(2),
            1.0,
            QcOptions {
                nx: 16,
                override_validation: true,
                ..QcOptions::default()
            },
        )
        .is_ok());
    }

    #[test]
    fn zero_preservation() {
        let spec = sine_feedback_spec("0.8*cos(t)", "0.9");
        let ctx = ctx_for(&spec, InitialData::zero(2), 2.0, 32);
        let z = ctx.zero_field();
        let q3 = ctx.q_power(&z, 3).unwrap();
        assert_eq!(q3.sup_norm(0.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn initial_slice_pinning() {
        let spec = sine_feedback_spec("0.8*cos(t)", "0.9");
        let w = sample_ch(&spec, 1.5, 48, 72, 3, 4, 1.0).unwrap();
        let phi = InitialData::from_field_bottom(&w);
        let ctx = QContext::new(
            &spec,
            phi.clone(),
            1.5,
            QcOptions {
                nx: 48,
                nt: Some(72),
                ..QcOptions::default()
            },
        )
        .unwrap();
        let qu = ctx.apply_q(&w).unwrap();
        for ix in 0..=48 {
            let expect = phi.eval(0, ctx.x_at(ix));
            assert!(
                (qu.node(0, ix, 0) - expect).abs() <= 1e-12,
                "component 1 at node {ix}"
            );
            let expect = phi.eval(1, ctx.x_at(ix));
            assert!((qu.node(1, ix, 0) - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn k_equal_one_reduces_to_apply_q() {
        let spec = sine_feedback_spec("0.5", "0.7");
        let w = sample_ch(&spec, 1.5, 24, 36, 5, 3, 0.6).unwrap();
        let phi = InitialData::from_field_bottom(&w);
        let ctx = QContext::new(
            &spec,
            phi,
            1.5,
            QcOptions {
                nx: 24,
                nt: Some(36),
                ..QcOptions::default()
            },
        )
        .unwrap();
        let a = ctx.apply_q(&w).unwrap();
        let b = ctx.q_power(&w, 1).unwrap();
        assert_eq!(a.sup_diff(&b), 0.0);
    }

    #[test]
    fn stabilization_absorbing_boundary_is_one() {
        // h = 0 makes Q independent of its input: one application stabilizes,
        // including on horizons shorter than any exit time.
        let spec = zero_boundary_spec();
        let ctx = QContext::new(
            &spec,
            InitialData::zero(2),
            0.125,
            QcOptions {
                nx: 64,
                nt: Some(32),
                ..QcOptions::default()
            },
        )
        .unwrap();
        let q = ctx
            .stabilization_index(&StabilizationOptions::default())
            .unwrap();
        assert_eq!(q, 1);
    }

    #[test]
    fn stabilization_unit_speeds_t3() {
        let spec = sine_feedback_spec("0.8*cos(t)", "0.9*sin(t) + 0.3");
        let ctx = ctx_for(&spec, InitialData::zero(2), 3.0, 48);
        assert_eq!(ctx.q_bound(), 4);
        let q = ctx
            .stabilization_index(&StabilizationOptions::default())
            .unwrap();
        assert!(q <= 4, "q = {q}");
        // Stabilization holds one power further.
        let w = sample_ch(&spec, 3.0, 48, ctx.nt(), 23, 4, 1.0).unwrap();
        let phi_w = InitialData::from_field_bottom(&w);
        let a = ctx.q_power_with(&w, q, &phi_w).unwrap();
        let b = ctx.q_power_with(&w, q + 1, &phi_w).unwrap();
        let c = ctx.q_power_with(&w, q + 2, &phi_w).unwrap();
        assert!(a.sup_diff(&b) <= 1e-10);
        assert!(b.sup_diff(&c) <= 1e-10);
    }

    #[test]
    fn stabilization_fast_speeds() {
        let spec = SystemSpec::new(
            2,
            1,
            vec![expr_xt("2"), expr_xt("-2")],
            zero_dampings(),
            Boundary::Linear {
                p: vec![vec![0.0, 0.5], vec![0.5, 0.0]],
            },
            true,
            1.0,
            ValidationConfig::default(),
        )
        .unwrap();
        let ctx = ctx_for(&spec, InitialData::zero(2), 2.0, 64);
        assert_eq!(ctx.q_bound(), 5);
        let q = ctx
            .stabilization_index(&StabilizationOptions::default())
            .unwrap();
        assert!(q <= 5, "q = {q}");
    }

    #[test]
    fn autonomous_shift_identity() {
        // z(x, t) = w(x, t + T0) satisfies (SR)^q z (x,t) = (SR)^q w (x,t+T0)
        // on the grid for t >= T0 when T0 covers 1/a plus the pull-back depth.
        let spec = sine_feedback_spec("0.4", "0.6");
        let t_total = 5.0;
        let nx = 32;
        let nt = (t_total * nx as f64) as usize;
        let w = sample_ch(&spec, t_total, nx, nt, 41, 3, 0.9).unwrap();
        let ctx_w = QContext::new(
            &spec,
            InitialData::from_field_bottom(&w),
            t_total,
            QcOptions {
                nx,
                nt: Some(nt),
                ..QcOptions::default()
            },
        )
        .unwrap();

        for (q, t0) in [(1usize, 1.0f64), (2, 2.0)] {
            let shift_nodes = (t0 / t_total * nt as f64).round() as usize;
            let t_z = t_total - t0;
            let nt_z = nt - shift_nodes;
            let mut z = PiField::zeros(2, t_z, nx, nt_z);
            for j in 0..2 {
                for it in 0..=nt_z {
                    for ix in 0..=nx {
                        z.set_node(j, ix, it, w.node(j, ix, it + shift_nodes));
                    }
                }
            }
            let ctx_z = QContext::new(
                &spec,
                InitialData::from_field_bottom(&z),
                t_z,
                QcOptions {
                    nx,
                    nt: Some(nt_z),
                    ..QcOptions::default()
                },
            )
            .unwrap();
            let srz = ctx_z.sr_power(&z, q).unwrap();
            let srw = ctx_w.sr_power(&w, q).unwrap();
            let mut worst = 0.0f64;
            for j in 0..2 {
                for it in 0..=nt_z {
                    let t = srz.t_at(it);
                    if t < t0 {
                        continue;
                    }
                    for ix in 0..=nx {
                        let d = (srz.node(j, ix, it) - srw.node(j, ix, it + shift_nodes)).abs();
                        worst = worst.max(d);
                    }
                }
            }
            assert!(worst <= 1e-9, "q = {q}: worst {worst:.3e}");
        }
    }

    #[test]
    fn solution_extension_choice_is_immaterial() {
        // Q^q of two different extensions of the same bottom row agree once
        // stabilized (the representation holds for any compatible extension).
        let spec = sine_feedback_spec("0.8*cos(t)", "0.9*sin(t) + 0.3");
        let nx = 40;
        let t_h = 2.0;
        let w = sample_ch(&spec, t_h, nx, (t_h * nx as f64) as usize, 29, 3, 0.7).unwrap();
        let phi = InitialData::from_field_bottom(&w);
        let ctx = QContext::new(
            &spec,
            phi.clone(),
            t_h,
            QcOptions {
                nx,
                ..QcOptions::default()
            },
        )
        .unwrap();
        let q = ctx
            .stabilization_index(&StabilizationOptions::default())
            .unwrap();
        let from_w = ctx.q_power(&w, q).unwrap();
        let from_const = ctx
            .q_power(&ctx.constant_extension(&phi).unwrap(), q)
            .unwrap();
        assert!(from_w.sup_diff(&from_const) <= 1e-9);
    }
}
