//! Problem specification and structural checks.
//!
//! A [`SystemSpec`] holds the data of the first-order decoupled system
//! `∂_t u + A(x,t) ∂_x u + B(x,t) u = 0` on the strip `0 <= x <= 1`, `t >= 0`,
//! with boundary reflection `u_out(t) = h(t, u_in(t))`. Components are indexed
//! `0..n`; components `j < m` have positive speed (rightgoing), components
//! `j >= m` negative speed (leftgoing). Per-component endpoints:
//!
//! - outflow endpoint: `x = 0` for `j < m`, `x = 1` for `j >= m`;
//! - inflow endpoint:  `x = 1` for `j < m`, `x = 0` for `j >= m`.
//!
//! The validator samples the speed sign condition, boundary homogeneity
//! `h(t, 0) = 0`, autonomy (when declared), and the sup of `‖∇_ξ h‖_max` over
//! a finite box. Sampling over a grid is the computable surrogate for the
//! pointwise conditions on the whole strip, so grid resolutions are explicit
//! configuration.

use std::fmt;

use crate::characteristics;
use crate::exprlang::Expr;
use crate::pifield::InitialData;
use crate::{Error, Result};

/// Sampling box and resolutions used by [`SystemSpec::validate`].
#[derive(Clone, Debug)]
pub struct ValidationConfig {
    /// Time horizon of the sampled checks.
    pub t_max: f64,
    /// Lower corner of the ξ-box for the gradient sup.
    pub xi_lo: f64,
    /// Upper corner of the ξ-box for the gradient sup.
    pub xi_hi: f64,
    /// Grid points per space axis.
    pub nx: usize,
    /// Grid points per time axis.
    pub nt: usize,
    /// Points per ξ axis.
    pub n_xi: usize,
    /// Central-difference step for the ξ-gradient.
    pub fd_step: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            t_max: 4.0,
            xi_lo: -1.0,
            xi_hi: 1.0,
            nx: 64,
            nt: 64,
            n_xi: 5,
            fd_step: 1e-5,
        }
    }
}

/// Boundary reflection map: a general nonlinear `h(t, ξ)` given by one
/// expression per component, or a constant matrix `u_out = P u_in`.
#[derive(Clone, Debug)]
pub enum Boundary {
    /// Expressions in the environment `(t, xi1, .., xin)`.
    Nonlinear { h: Vec<Expr> },
    /// Row-major `n x n` matrix.
    Linear { p: Vec<Vec<f64>> },
}

/// A validated-on-construction problem specification.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    n: usize,
    m: usize,
    speeds: Vec<Expr>,
    dampings: Vec<Expr>,
    boundary: Boundary,
    autonomous: bool,
    speed_floor: f64,
    validation: ValidationConfig,
    const_speeds: Vec<Option<f64>>,
    const_dampings: Vec<Option<f64>>,
}

impl SystemSpec {
    /// Build a specification. `speeds` and `dampings` are expressions in
    /// `(x, t)`; a nonlinear boundary holds expressions in `(t, xi1..xin)`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        m: usize,
        speeds: Vec<Expr>,
        dampings: Vec<Expr>,
        boundary: Boundary,
        autonomous: bool,
        speed_floor: f64,
        validation: ValidationConfig,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSpec("n must be positive".into()));
        }
        if m > n {
            return Err(Error::InvalidSpec(format!("m = {m} exceeds n = {n}")));
        }
        if speeds.len() != n || dampings.len() != n {
            return Err(Error::InvalidSpec(format!(
                "expected {n} speed and damping expressions, got {} and {}",
                speeds.len(),
                dampings.len()
            )));
        }
        if speed_floor.is_nan() || speed_floor <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "speed_floor must be positive, got {speed_floor}"
            )));
        }
        match &boundary {
            Boundary::Nonlinear { h } => {
                if h.len() != n {
                    return Err(Error::InvalidSpec(format!(
                        "expected {n} boundary expressions, got {}",
                        h.len()
                    )));
                }
            }
            Boundary::Linear { p } => {
                if p.len() != n || p.iter().any(|row| row.len() != n) {
                    return Err(Error::InvalidSpec(format!("P must be {n} x {n}")));
                }
            }
        }
        let const_speeds = speeds.iter().map(|e| e.constant_value()).collect();
        let const_dampings = dampings.iter().map(|e| e.constant_value()).collect();
        Ok(SystemSpec {
            n,
            m,
            speeds,
            dampings,
            boundary,
            autonomous,
            speed_floor,
            validation,
            const_speeds,
            const_dampings,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn speed_floor(&self) -> f64 {
        self.speed_floor
    }

    pub fn validation(&self) -> &ValidationConfig {
        &self.validation
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    pub fn linear_matrix(&self) -> Option<&Vec<Vec<f64>>> {
        match &self.boundary {
            Boundary::Linear { p } => Some(p),
            Boundary::Nonlinear { .. } => None,
        }
    }

    /// Rightgoing components head for `x = 1`; their outflow endpoint is 0.
    pub fn out_endpoint(&self, j: usize) -> f64 {
        if j < self.m {
            0.0
        } else {
            1.0
        }
    }

    pub fn in_endpoint(&self, j: usize) -> f64 {
        if j < self.m {
            1.0
        } else {
            0.0
        }
    }

    /// Speed `a_j(x, t)`.
    pub fn speed(&self, j: usize, x: f64, t: f64) -> Result<f64> {
        if let Some(v) = self.const_speeds[j] {
            return Ok(v);
        }
        self.speeds[j].eval_slice(&[x, t])
    }

    /// Damping `b_j(x, t)`.
    pub fn damping(&self, j: usize, x: f64, t: f64) -> Result<f64> {
        if let Some(v) = self.const_dampings[j] {
            return Ok(v);
        }
        self.dampings[j].eval_slice(&[x, t])
    }

    /// `Some(a)` when `a_j` is a constant expression.
    pub fn constant_speed(&self, j: usize) -> Option<f64> {
        self.const_speeds[j]
    }

    pub fn constant_damping(&self, j: usize) -> Option<f64> {
        self.const_dampings[j]
    }

    /// The boundary map `h(t, ξ)` (for a linear boundary, `P ξ`).
    pub fn boundary_map(&self, t: f64, xi: &[f64]) -> Result<Vec<f64>> {
        debug_assert_eq!(xi.len(), self.n);
        match &self.boundary {
            Boundary::Linear { p } => Ok(p
                .iter()
                .map(|row| row.iter().zip(xi).map(|(c, v)| c * v).sum())
                .collect()),
            Boundary::Nonlinear { h } => {
                let mut vals = Vec::with_capacity(self.n + 1);
                vals.push(t);
                vals.extend_from_slice(xi);
                h.iter().map(|e| e.eval_slice(&vals)).collect()
            }
        }
    }

    /// One component of the boundary map.
    pub fn boundary_component(&self, j: usize, t: f64, xi: &[f64]) -> Result<f64> {
        match &self.boundary {
            Boundary::Linear { p } => Ok(p[j].iter().zip(xi).map(|(c, v)| c * v).sum()),
            Boundary::Nonlinear { h } => {
                let mut vals = Vec::with_capacity(self.n + 1);
                vals.push(t);
                vals.extend_from_slice(xi);
                h[j].eval_slice(&vals)
            }
        }
    }

    /// Assemble the inflow trace vector from per-component endpoint readers.
    /// `read(j, x_endpoint)` returns `u_j(x_endpoint, ·)`.
    pub fn assemble_in<F: FnMut(usize, f64) -> f64>(&self, mut read: F) -> Vec<f64> {
        (0..self.n).map(|j| read(j, self.in_endpoint(j))).collect()
    }

    /// Assemble the outflow trace vector.
    pub fn assemble_out<F: FnMut(usize, f64) -> f64>(&self, mut read: F) -> Vec<f64> {
        (0..self.n).map(|j| read(j, self.out_endpoint(j))).collect()
    }

    /// Sampled structural checks; failures are report entries, never errors.
    pub fn validate(&self) -> ValidationReport {
        let cfg = &self.validation;
        let mut checks = Vec::new();

        // Speed sign condition over the (x, t) grid.
        {
            let mut worst = 0.0f64;
            let mut loc = String::new();
            let mut eval_error = None;
            'outer: for ix in 0..=cfg.nx {
                let x = ix as f64 / cfg.nx as f64;
                for it in 0..=cfg.nt {
                    let t = cfg.t_max * it as f64 / cfg.nt as f64;
                    for j in 0..self.n {
                        let a = match self.speed(j, x, t) {
                            Ok(a) => a,
                            Err(e) => {
                                eval_error = Some(format!("a_{} at ({x}, {t}): {e}", j + 1));
                                break 'outer;
                            }
                        };
                        let violation = if j < self.m {
                            self.speed_floor - a
                        } else {
                            a + self.speed_floor
                        };
                        if violation > worst {
                            worst = violation;
                            loc = format!("component {} at (x, t) = ({x}, {t})", j + 1);
                        }
                    }
                }
            }
            checks.push(match eval_error {
                Some(msg) => CheckResult::fail("speed-sign", f64::INFINITY, msg),
                None if worst > 0.0 => CheckResult::fail("speed-sign", worst, loc),
                None => CheckResult::pass("speed-sign"),
            });
        }

        // Homogeneity h(t, 0) = 0 over the t grid.
        {
            let zero = vec![0.0; self.n];
            let mut worst = 0.0f64;
            let mut loc = String::new();
            let mut eval_error = None;
            for it in 0..=cfg.nt {
                let t = cfg.t_max * it as f64 / cfg.nt as f64;
                match self.boundary_map(t, &zero) {
                    Ok(v) => {
                        for (j, hv) in v.iter().enumerate() {
                            if hv.abs() > worst {
                                worst = hv.abs();
                                loc = format!("h_{}(t, 0) = {hv} at t = {t}", j + 1);
                            }
                        }
                    }
                    Err(e) => {
                        eval_error = Some(format!("h at t = {t}: {e}"));
                        break;
                    }
                }
            }
            checks.push(match eval_error {
                Some(msg) => CheckResult::fail("homogeneity", f64::INFINITY, msg),
                None if worst > 1e-12 => CheckResult::fail("homogeneity", worst, loc),
                None => CheckResult::pass("homogeneity"),
            });
        }

        // Autonomy: coefficients sampled at two distinct times must agree.
        if self.autonomous {
            let t1 = cfg.t_max / 3.0;
            let t2 = 2.0 * cfg.t_max / 3.0;
            let mut worst = 0.0f64;
            let mut loc = String::new();
            let mut failed = None;
            for ix in 0..=cfg.nx {
                let x = ix as f64 / cfg.nx as f64;
                for j in 0..self.n {
                    let pair = self
                        .speed(j, x, t1)
                        .and_then(|a1| self.speed(j, x, t2).map(|a2| (a1, a2)))
                        .and_then(|(a1, a2)| {
                            self.damping(j, x, t1).and_then(|b1| {
                                self.damping(j, x, t2).map(|b2| ((a1, a2), (b1, b2)))
                            })
                        });
                    match pair {
                        Ok(((a1, a2), (b1, b2))) => {
                            let d = (a1 - a2).abs().max((b1 - b2).abs());
                            if d > worst {
                                worst = d;
                                loc = format!("coefficient {} at x = {x}", j + 1);
                            }
                        }
                        Err(e) => failed = Some(format!("{e}")),
                    }
                }
            }
            // h sampled over the ξ-box at the same two times.
            for xi in xi_box_points(self.n, cfg) {
                let pair = self
                    .boundary_map(t1, &xi)
                    .and_then(|h1| self.boundary_map(t2, &xi).map(|h2| (h1, h2)));
                match pair {
                    Ok((h1, h2)) => {
                        for j in 0..self.n {
                            let d = (h1[j] - h2[j]).abs();
                            if d > worst {
                                worst = d;
                                loc = format!("h_{} at xi = {xi:?}", j + 1);
                            }
                        }
                    }
                    Err(e) => failed = Some(format!("{e}")),
                }
            }
            checks.push(match failed {
                Some(msg) => CheckResult::fail("autonomy", f64::INFINITY, msg),
                None if worst > 1e-12 => CheckResult::fail("autonomy", worst, loc),
                None => CheckResult::pass("autonomy"),
            });
        } else {
            checks.push(CheckResult::skipped("autonomy"));
        }

        // Sampled sup of the max-norm of the ξ-gradient of h.
        let mut grad_sup = 0.0f64;
        {
            let mut failed = None;
            'grad: for it in 0..=cfg.nt {
                let t = cfg.t_max * it as f64 / cfg.nt as f64;
                for xi in xi_box_points(self.n, cfg) {
                    for k in 0..self.n {
                        let mut hi = xi.clone();
                        let mut lo = xi.clone();
                        hi[k] += cfg.fd_step;
                        lo[k] -= cfg.fd_step;
                        let pair = self
                            .boundary_map(t, &hi)
                            .and_then(|a| self.boundary_map(t, &lo).map(|b| (a, b)));
                        match pair {
                            Ok((a, b)) => {
                                for j in 0..self.n {
                                    let g = ((a[j] - b[j]) / (2.0 * cfg.fd_step)).abs();
                                    grad_sup = grad_sup.max(g);
                                }
                            }
                            Err(e) => {
                                failed = Some(format!("{e}"));
                                break 'grad;
                            }
                        }
                    }
                }
            }
            checks.push(match failed {
                Some(msg) => CheckResult::fail("gradient-bound", f64::INFINITY, msg),
                None if !grad_sup.is_finite() => CheckResult::fail(
                    "gradient-bound",
                    grad_sup,
                    "gradient is not finite on the box".into(),
                ),
                None => CheckResult::pass("gradient-bound"),
            });
        }

        ValidationReport { checks, grad_sup }
    }

    /// Zero-order compatibility defect `φ_out - h(0, φ_in)`.
    pub fn compatibility_defect(&self, phi: &InitialData) -> Result<Vec<f64>> {
        let phi_out = (0..self.n)
            .map(|j| phi.try_eval(j, self.out_endpoint(j)))
            .collect::<Result<Vec<f64>>>()?;
        let phi_in = (0..self.n)
            .map(|j| phi.try_eval(j, self.in_endpoint(j)))
            .collect::<Result<Vec<f64>>>()?;
        let h0 = self.boundary_map(0.0, &phi_in)?;
        Ok(phi_out.iter().zip(&h0).map(|(o, h)| o - h).collect())
    }

    /// Per-component (min, max) of the time a characteristic needs to cross
    /// the unit interval, over start times sampled in `[0, T]`.
    pub fn crossing_times(&self, t_horizon: f64) -> Result<Vec<(f64, f64)>> {
        let samples = 33;
        let mut out = Vec::with_capacity(self.n);
        for j in 0..self.n {
            // Constant speed: the crossing time is exactly 1/|a|.
            if let Some(a) = self.constant_speed(j) {
                if a.abs() < self.speed_floor {
                    return Err(Error::SpeedFloor {
                        j: j + 1,
                        floor: self.speed_floor,
                        x: 0.0,
                        t: 0.0,
                    });
                }
                let tau = 1.0 / a.abs();
                out.push((tau, tau));
                continue;
            }
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for i in 0..samples {
                let t0 = t_horizon * i as f64 / (samples - 1) as f64;
                let tau = characteristics::crossing_time(self, j, t0)?;
                lo = lo.min(tau);
                hi = hi.max(tau);
            }
            out.push((lo, hi));
        }
        Ok(out)
    }

    /// The smallest crossing time over all components and sampled start times.
    pub fn min_crossing_time(&self, t_horizon: f64) -> Result<f64> {
        Ok(self
            .crossing_times(t_horizon)?
            .iter()
            .map(|(lo, _)| *lo)
            .fold(f64::INFINITY, f64::min))
    }

    /// The largest crossing time over all components and sampled start times.
    pub fn max_crossing_time(&self, t_horizon: f64) -> Result<f64> {
        Ok(self
            .crossing_times(t_horizon)?
            .iter()
            .map(|(_, hi)| *hi)
            .fold(0.0, f64::max))
    }
}

fn xi_box_points(n: usize, cfg: &ValidationConfig) -> Vec<Vec<f64>> {
    let per_axis: Vec<f64> = (0..cfg.n_xi)
        .map(|i| cfg.xi_lo + (cfg.xi_hi - cfg.xi_lo) * i as f64 / (cfg.n_xi - 1) as f64)
        .collect();
    let mut points = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::with_capacity(points.len() * per_axis.len());
        for p in &points {
            for v in &per_axis {
                let mut q = p.clone();
                q.push(*v);
                next.push(q);
            }
        }
        points = next;
    }
    points
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: CheckStatus,
    /// Magnitude of the worst violation (0 on pass).
    pub worst: f64,
    /// Human-readable location of the worst violation.
    pub location: String,
}

impl CheckResult {
    fn pass(name: &'static str) -> Self {
        CheckResult {
            name,
            status: CheckStatus::Pass,
            worst: 0.0,
            location: String::new(),
        }
    }

    fn fail(name: &'static str, worst: f64, location: String) -> Self {
        CheckResult {
            name,
            status: CheckStatus::Fail,
            worst,
            location,
        }
    }

    fn skipped(name: &'static str) -> Self {
        CheckResult {
            name,
            status: CheckStatus::Skipped,
            worst: 0.0,
            location: String::new(),
        }
    }
}

/// Outcome of [`SystemSpec::validate`]. A report with any failed check blocks
/// downstream solvers unless they are constructed with an override flag.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    /// Sampled sup of `‖∇_ξ h‖_max` over the validation box.
    pub grad_sup: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn homogeneous(&self) -> bool {
        self.check("homogeneity")
            .map(|c| c.status == CheckStatus::Pass)
            .unwrap_or(false)
    }

    /// Checks that must pass for the characteristic geometry to make sense
    /// (homogeneity failures only block the stability criteria, not solvers).
    pub fn geometry_ok(&self) -> bool {
        self.checks
            .iter()
            .filter(|c| c.name != "homogeneity")
            .all(|c| c.status != CheckStatus::Fail)
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.status == CheckStatus::Fail)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            match c.status {
                CheckStatus::Pass => writeln!(f, "  [pass] {}", c.name)?,
                CheckStatus::Skipped => writeln!(f, "  [skip] {}", c.name)?,
                CheckStatus::Fail => writeln!(
                    f,
                    "  [FAIL] {}: worst violation {:.3e} ({})",
                    c.name, c.worst, c.location
                )?,
            }
        }
        writeln!(f, "  sampled sup ‖∇_ξ h‖_max = {:.6}", self.grad_sup)
    }
}

/// Least `ν` with `P_abs^ν = 0`, where `P_abs = (|p_jk|)`, or `None` when no
/// such power exists. Equivalently, the digraph with an edge `k → j` whenever
/// `|p_jk| > 0` must be acyclic; then `ν = 1 +` length of its longest path.
pub fn nilpotency_index(p: &[Vec<f64>]) -> Option<usize> {
    let n = p.len();
    // adj[k] = all j fed by component k.
    let mut adj = vec![Vec::new(); n];
    for (j, row) in p.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            if v.abs() > 0.0 {
                adj[k].push(j);
            }
        }
    }
    // DFS longest path with cycle detection; memo[u] = longest edge count from u.
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    fn dfs(u: usize, adj: &[Vec<usize>], color: &mut [Color], memo: &mut [usize]) -> Option<usize> {
        match color[u] {
            Color::Gray => return None, // cycle
            Color::Black => return Some(memo[u]),
            Color::White => {}
        }
        color[u] = Color::Gray;
        let mut best = 0;
        for &v in &adj[u] {
            let sub = dfs(v, adj, color, memo)?;
            best = best.max(sub + 1);
        }
        color[u] = Color::Black;
        memo[u] = best;
        Some(best)
    }
    let mut color = vec![Color::White; n];
    let mut memo = vec![0usize; n];
    let mut longest = 0;
    for u in 0..n {
        longest = longest.max(dfs(u, &adj, &mut color, &mut memo)?);
    }
    Some(longest + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;

    pub(crate) fn expr_xt(src: &str) -> Expr {
        parse(src, &["x", "t"]).unwrap()
    }

    fn unit_speed_spec(boundary: Boundary) -> SystemSpec {
        SystemSpec::new(
            2,
            1,
            vec![expr_xt("1"), expr_xt("-1")],
            vec![expr_xt("0"), expr_xt("0")],
            boundary,
            true,
            1.0,
            ValidationConfig::default(),
        )
        .unwrap()
    }

    fn sine_feedback_boundary(r: &str, s: &str) -> Boundary {
        let env = ["t", "xi1", "xi2"];
        Boundary::Nonlinear {
            h: vec![
                parse(&format!("({r})*sin(xi2)"), &env).unwrap(),
                parse(&format!("sin(({s})*xi1)^2"), &env).unwrap(),
            ],
        }
    }

    #[test]
    fn sine_feedback_system_validates() {
        let spec = SystemSpec::new(
            2,
            1,
            vec![expr_xt("1"), expr_xt("-1")],
            vec![expr_xt("0"), expr_xt("0")],
            sine_feedback_boundary("0.8*cos(t)", "0.9*sin(t)"),
            false,
            1.0,
            ValidationConfig::default(),
        )
        .unwrap();
        let report = spec.validate();
        assert!(report.passed(), "{report}");
        // |d/dxi2 (r sin(xi2))| <= 0.8 and |d/dxi1 sin(s xi1)^2| <= 0.9.
        assert!(report.grad_sup <= 1.0, "grad sup {}", report.grad_sup);
    }

    #[test]
    fn sign_change_in_speed_fails() {
        let spec = SystemSpec::new(
            2,
            1,
            vec![expr_xt("t - 2"), expr_xt("-1")],
            vec![expr_xt("0"), expr_xt("0")],
            Boundary::Linear {
                p: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            },
            false,
            1.0,
            ValidationConfig {
                t_max: 4.0,
                ..ValidationConfig::default()
            },
        )
        .unwrap();
        let report = spec.validate();
        let speed = report.check("speed-sign").unwrap();
        assert_eq!(speed.status, CheckStatus::Fail);
        assert!(speed.worst >= 3.0 - 1e-9, "worst {}", speed.worst);
        assert!(!report.passed());
        assert!(!report.geometry_ok());
    }

    #[test]
    fn nonhomogeneous_boundary_flagged() {
        // u_1(0,t) = g(t) with g nonzero after t = 4, u_2(1,t) = u_1(1,t).
        let env = ["t", "xi1", "xi2"];
        let g = "if(t <= 4, 0, min((t - 4)^2, 1))";
        let spec = SystemSpec::new(
            2,
            1,
            vec![expr_xt("1"), expr_xt("-1")],
            vec![expr_xt("0"), expr_xt("0")],
            Boundary::Nonlinear {
                h: vec![parse(g, &env).unwrap(), parse("xi1", &env).unwrap()],
            },
            false,
            1.0,
            ValidationConfig {
                t_max: 6.0,
                ..ValidationConfig::default()
            },
        )
        .unwrap();
        let report = spec.validate();
        let hom = report.check("homogeneity").unwrap();
        assert_eq!(hom.status, CheckStatus::Fail);
        assert!(hom.location.contains("t = 5") || hom.worst > 0.0);
        // Geometry is fine: solvers may still run on this problem.
        assert!(report.geometry_ok());
        assert!(!report.homogeneous());
    }

    #[test]
    fn compatibility_defect_zero_data() {
        let spec = unit_speed_spec(sine_feedback_boundary("0.8*cos(t)", "0.9"));
        let phi = InitialData::zero(2);
        let d = spec.compatibility_defect(&phi).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-15), "{d:?}");
    }

    #[test]
    fn compatibility_defect_linear_data() {
        // phi = (x, 1 - x): phi_out = (0, 0), phi_in = (1, 1);
        // defect = -(r(0) sin 1, sin(s(0))^2), computed numerically here.
        let r0 = 0.8f64;
        let s0 = 0.9f64;
        let spec = unit_speed_spec(sine_feedback_boundary("0.8*cos(t)", "0.9"));
        let phi = InitialData::from_exprs(vec![
            parse("x", &["x"]).unwrap(),
            parse("1 - x", &["x"]).unwrap(),
        ]);
        let d = spec.compatibility_defect(&phi).unwrap();
        let expect = [-(r0 * 1.0f64.sin()), -(s0.sin().powi(2))];
        assert!((d[0] - expect[0]).abs() < 1e-12, "{d:?}");
        assert!((d[1] - expect[1]).abs() < 1e-12, "{d:?}");
    }

    #[test]
    fn compatibility_defect_swap_constants() {
        let spec = unit_speed_spec(Boundary::Linear {
            p: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        });
        let phi = InitialData::from_exprs(vec![
            parse("1", &["x"]).unwrap(),
            parse("1", &["x"]).unwrap(),
        ]);
        let d = spec.compatibility_defect(&phi).unwrap();
        assert_eq!(d, vec![0.0, 0.0]);
    }

    #[test]
    fn nilpotency_examples() {
        assert_eq!(nilpotency_index(&[vec![0.0, 1.0], vec![0.0, 0.0]]), Some(2));
        assert_eq!(nilpotency_index(&[vec![0.0, 1.0], vec![1.0, 0.0]]), None);
        // Homogeneous part of the driven boundary u_2(1,t) = u_1(1,t),
        // u_1(0,t) = 0: row 2 reads component 1.
        assert_eq!(nilpotency_index(&[vec![0.0, 0.0], vec![1.0, 0.0]]), Some(2));
        assert_eq!(nilpotency_index(&[vec![1.0]]), None);
        assert_eq!(nilpotency_index(&[vec![0.0]]), Some(1));
    }

    #[test]
    fn nilpotency_index_matches_matrix_powers() {
        // 3x3 strictly upper triangular and a denser acyclic example.
        let cases: Vec<Vec<Vec<f64>>> = vec![
            vec![
                vec![0.0, 0.5, -0.25],
                vec![0.0, 0.0, 2.0],
                vec![0.0, 0.0, 0.0],
            ],
            vec![
                vec![0.0, 0.0, 0.0],
                vec![3.0, 0.0, 0.0],
                vec![1.0, -2.0, 0.0],
            ],
        ];
        for p in cases {
            let nu = nilpotency_index(&p).unwrap();
            let abs: Vec<Vec<f64>> = p
                .iter()
                .map(|r| r.iter().map(|v| v.abs()).collect())
                .collect();
            assert!(is_zero(&mat_pow(&abs, nu)));
            assert!(!is_zero(&mat_pow(&abs, nu - 1)));
        }
    }

    fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut c = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    c[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        c
    }

    fn mat_pow(a: &[Vec<f64>], e: usize) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut out: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        for _ in 0..e {
            out = mat_mul(&out, a);
        }
        out
    }

    fn is_zero(a: &[Vec<f64>]) -> bool {
        a.iter().all(|r| r.iter().all(|v| *v == 0.0))
    }

    #[test]
    fn crossing_times_constant_speeds() {
        let spec = unit_speed_spec(Boundary::Linear {
            p: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        });
        let ct = spec.crossing_times(3.0).unwrap();
        assert_eq!(ct, vec![(1.0, 1.0), (1.0, 1.0)]);

        let spec2 = SystemSpec::new(
            2,
            1,
            vec![expr_xt("2"), expr_xt("-1")],
            vec![expr_xt("0"), expr_xt("0")],
            Boundary::Linear {
                p: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            },
            true,
            1.0,
            ValidationConfig::default(),
        )
        .unwrap();
        let ct2 = spec2.crossing_times(3.0).unwrap();
        assert_eq!(ct2, vec![(0.5, 0.5), (1.0, 1.0)]);
        assert_eq!(spec2.min_crossing_time(3.0).unwrap(), 0.5);
    }

    #[test]
    fn crossing_time_matches_quadrature_oracle() {
        // a_1(x) = 2 + sin(x): crossing time is the integral of 1/(2 + sin).
        let spec = SystemSpec::new(
            1,
            1,
            vec![expr_xt("2 + sin(x)")],
            vec![expr_xt("0")],
            Boundary::Linear { p: vec![vec![0.0]] },
            true,
            1.0,
            ValidationConfig::default(),
        )
        .unwrap();
        let ct = spec.crossing_times(2.0).unwrap();
        // Adaptive-refinement quadrature oracle, independent of the tracer.
        let oracle = adaptive_quad(|x| 1.0 / (2.0 + x.sin()), 0.0, 1.0, 1e-12);
        assert!((ct[0].0 - oracle).abs() < 1e-9, "{} vs {oracle}", ct[0].0);
        assert!((ct[0].1 - oracle).abs() < 1e-9);
        // Forced by the speed bound: min crossing <= 1 / speed_floor.
        assert!(ct[0].0 <= 1.0 / spec.speed_floor() + 1e-12);
    }

    fn adaptive_quad(f: impl Fn(f64) -> f64 + Copy, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        fn rec(
            f: impl Fn(f64) -> f64 + Copy,
            a: f64,
            b: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let left = simpson(f, a, m);
            let right = simpson(f, m, b);
            if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, left, tol / 2.0, depth - 1) + rec(f, m, b, right, tol / 2.0, depth - 1)
            }
        }
        rec(f, a, b, simpson(f, a, b), tol, 30)
    }

    #[test]
    fn speed_below_floor_is_an_error() {
        let spec = SystemSpec::new(
            1,
            1,
            vec![expr_xt("0.1")],
            vec![expr_xt("0")],
            Boundary::Linear { p: vec![vec![0.0]] },
            true,
            1.0,
            ValidationConfig::default(),
        )
        .unwrap();
        assert!(matches!(
            spec.crossing_times(1.0),
            Err(Error::SpeedFloor { .. })
        ));
    }
}
