//! Characteristic curves: backward tracing to the boundary, exit data, and
//! exponential weights.
//!
//! The `j`-th characteristic through `(x, t)` solves `dω/dξ = 1/a_j(ξ, ω)`
//! with `ω(x) = t`. Pull-back follows the direction of decreasing `ω`: toward
//! `ξ = 0` for rightgoing components, toward `ξ = 1` for leftgoing ones. The
//! exit is the boundary point of smaller ordinate: either on the initial axis
//! (`ω = 0` at some interior abscissa) or on the lateral boundary.
//!
//! Integration is classical fourth-order Runge-Kutta in `ξ`. An initial-axis
//! crossing is refined by bisection to `|ω| <= 1e-12`. The weight
//! `c = exp ∫ (b_j/a_j) dη` accumulates along the same sweep by composite
//! Simpson quadrature on half-step samples. Constant-speed components take an
//! exact closed-form path (straight characteristics), which the RK4 sweep
//! reproduces to rounding.

use crate::system::SystemSpec;
use crate::{Error, Result};

/// One sampled point of a traced path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathPoint {
    pub xi: f64,
    pub omega: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    /// The curve met `t = 0` at an interior abscissa; the pull-back reads the
    /// initial data there.
    InitialAxis,
    /// The curve met the lateral outflow boundary at time `tau > 0` (or at a
    /// corner, which ties to lateral).
    Lateral,
}

/// Exit data of one characteristic pull-back.
#[derive(Clone, Debug)]
pub struct CharExit {
    pub j: usize,
    pub x: f64,
    pub t: f64,
    pub x_exit: f64,
    pub tau: f64,
    pub kind: ExitKind,
    /// Exponential weight accumulated from `(x, t)` to the exit.
    pub weight: f64,
    /// Half-step samples of the path, when recording was requested.
    pub path: Vec<PathPoint>,
}

/// Tracer configuration.
#[derive(Clone, Copy, Debug)]
pub struct TraceOptions {
    /// RK4 step in `ξ` (each step is internally split in two half-steps).
    pub step: f64,
    /// Re-trace at half the step and keep the finer result when the two exit
    /// times differ by more than 1e-8.
    pub refine: bool,
    /// Record the sampled path (diagnostics; the cache path leaves this off).
    pub record_path: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            step: 1.0 / 1024.0,
            refine: true,
            record_path: true,
        }
    }
}

/// Trace the `j`-th characteristic through `(x, t)` back to its exit.
pub fn trace(spec: &SystemSpec, j: usize, x: f64, t: f64, opts: TraceOptions) -> Result<CharExit> {
    if let Some(exit) = trace_constant_speed(spec, j, x, t, opts)? {
        return Ok(exit);
    }
    let first = trace_raw(spec, j, x, t, opts.step, opts.record_path)?;
    if !opts.refine {
        return Ok(first);
    }
    let halved = trace_raw(spec, j, x, t, opts.step / 2.0, opts.record_path)?;
    if (first.tau - halved.tau).abs() > 1e-8 || (first.x_exit - halved.x_exit).abs() > 1e-8 {
        trace_raw(spec, j, x, t, opts.step / 4.0, opts.record_path)
    } else {
        Ok(halved)
    }
}

/// Exact exit for constant-speed components: the characteristic is a straight
/// line, so the RK4 sweep is bypassed. Returns `None` when `a_j` is not a
/// constant expression.
fn trace_constant_speed(
    spec: &SystemSpec,
    j: usize,
    x: f64,
    t: f64,
    opts: TraceOptions,
) -> Result<Option<CharExit>> {
    let a = match spec.constant_speed(j) {
        Some(a) => a,
        None => return Ok(None),
    };
    check_speed_sign(spec, j, a, x, t)?;
    let target = spec.out_endpoint(j);
    let single = |kind, x_exit, tau, weight| CharExit {
        j,
        x,
        t,
        x_exit,
        tau,
        kind,
        weight,
        path: if opts.record_path {
            vec![
                PathPoint { xi: x, omega: t },
                PathPoint {
                    xi: 0.5 * (x + x_exit),
                    omega: 0.5 * (t + tau),
                },
                PathPoint {
                    xi: x_exit,
                    omega: tau,
                },
            ]
        } else {
            Vec::new()
        },
    };
    if t == 0.0 {
        // Start on the initial axis: the exit is the start itself, except at
        // the outflow corner where the corner tie-break applies.
        let kind = if x == target {
            ExitKind::Lateral
        } else {
            ExitKind::InitialAxis
        };
        return Ok(Some(CharExit {
            j,
            x,
            t,
            x_exit: x,
            tau: 0.0,
            kind,
            weight: 1.0,
            path: if opts.record_path {
                vec![PathPoint { xi: x, omega: t }]
            } else {
                Vec::new()
            },
        }));
    }
    // Ordinate at the outflow boundary; nonnegative means a lateral exit
    // (corner hits classify as lateral).
    let tau_lateral = t + (target - x) / a;
    let (kind, x_exit, tau) = if tau_lateral >= 0.0 {
        (ExitKind::Lateral, target, tau_lateral)
    } else {
        // omega = 0 at xi = x - a t.
        let xi0 = (x - a * t).clamp(0.0, 1.0);
        (ExitKind::InitialAxis, xi0, 0.0)
    };
    let weight = if let Some(b) = spec.constant_damping(j) {
        ((b / a) * (x_exit - x)).exp()
    } else {
        // Straight path, variable damping: Simpson along the line.
        let path = line_path(x, t, x_exit, tau, opts.step);
        weight_along(spec, j, &path)?
    };
    Ok(Some(single(kind, x_exit, tau, weight)))
}

fn line_path(x: f64, t: f64, x_exit: f64, tau: f64, step: f64) -> Vec<PathPoint> {
    let len = (x_exit - x).abs();
    if len == 0.0 {
        return vec![PathPoint { xi: x, omega: t }];
    }
    let pairs = (len / step).ceil().max(1.0) as usize;
    let n = 2 * pairs;
    (0..=n)
        .map(|i| {
            let s = i as f64 / n as f64;
            PathPoint {
                xi: x + s * (x_exit - x),
                omega: t + s * (tau - t),
            }
        })
        .collect()
}

fn check_speed_sign(spec: &SystemSpec, j: usize, a: f64, x: f64, t: f64) -> Result<()> {
    let floor = spec.speed_floor();
    let ok = if j < spec.m() {
        a >= floor
    } else {
        a <= -floor
    };
    if ok {
        Ok(())
    } else {
        Err(Error::SpeedFloor {
            j: j + 1,
            floor,
            x,
            t,
        })
    }
}

/// Right-hand side of the characteristic ODE, with the sign guard.
fn slope(spec: &SystemSpec, j: usize, xi: f64, omega: f64) -> Result<f64> {
    let a = spec.speed(j, xi, omega)?;
    check_speed_sign(spec, j, a, xi, omega)?;
    Ok(1.0 / a)
}

fn rk4_step(spec: &SystemSpec, j: usize, xi: f64, omega: f64, h: f64) -> Result<f64> {
    let k1 = slope(spec, j, xi, omega)?;
    let k2 = slope(spec, j, xi + 0.5 * h, omega + 0.5 * h * k1)?;
    let k3 = slope(spec, j, xi + 0.5 * h, omega + 0.5 * h * k2)?;
    let k4 = slope(spec, j, xi + h, omega + h * k3)?;
    Ok(omega + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

fn integrand(spec: &SystemSpec, j: usize, p: PathPoint) -> Result<f64> {
    let a = spec.speed(j, p.xi, p.omega)?;
    let b = spec.damping(j, p.xi, p.omega)?;
    Ok(b / a)
}

/// Exponential weight along a traced path: `exp` of the composite-Simpson
/// quadrature of `b_j/a_j` over consecutive half-step triples. The integral is
/// signed by the sweep direction, matching `∫_x^{x_exit}`.
pub fn weight_along(spec: &SystemSpec, j: usize, path: &[PathPoint]) -> Result<f64> {
    if path.len() < 2 {
        return Ok(1.0);
    }
    let mut integral = 0.0;
    let mut i = 0;
    while i + 1 < path.len() {
        if i + 2 < path.len() {
            let p0 = path[i];
            let pm = path[i + 1];
            let p1 = path[i + 2];
            let f0 = integrand(spec, j, p0)?;
            let fm = integrand(spec, j, pm)?;
            let f1 = integrand(spec, j, p1)?;
            integral += (p1.xi - p0.xi) / 6.0 * (f0 + 4.0 * fm + f1);
            i += 2;
        } else {
            // Dangling single interval (even-length path): trapezoid.
            let p0 = path[i];
            let p1 = path[i + 1];
            let f0 = integrand(spec, j, p0)?;
            let f1 = integrand(spec, j, p1)?;
            integral += (p1.xi - p0.xi) * 0.5 * (f0 + f1);
            i += 1;
        }
    }
    Ok(integral.exp())
}

struct Sweep<'a> {
    spec: &'a SystemSpec,
    j: usize,
    record: bool,
    path: Vec<PathPoint>,
    integral: f64,
    cur: PathPoint,
}

impl<'a> Sweep<'a> {
    fn new(spec: &'a SystemSpec, j: usize, x: f64, t: f64, record: bool) -> Self {
        let cur = PathPoint { xi: x, omega: t };
        Sweep {
            spec,
            j,
            record,
            path: vec![cur],
            integral: 0.0,
            cur,
        }
    }

    /// Integrate one pair of half-steps to `xi_next`; returns the midpoint and
    /// endpoint without committing them.
    fn probe(&self, xi_next: f64) -> Result<(PathPoint, PathPoint)> {
        let h = 0.5 * (xi_next - self.cur.xi);
        let omega_mid = rk4_step(self.spec, self.j, self.cur.xi, self.cur.omega, h)?;
        let mid = PathPoint {
            xi: self.cur.xi + h,
            omega: omega_mid,
        };
        let omega_end = rk4_step(self.spec, self.j, mid.xi, mid.omega, h)?;
        let end = PathPoint {
            xi: xi_next,
            omega: omega_end,
        };
        Ok((mid, end))
    }

    fn commit(&mut self, mid: PathPoint, end: PathPoint) -> Result<()> {
        let f0 = integrand(self.spec, self.j, self.cur)?;
        let fm = integrand(self.spec, self.j, mid)?;
        let f1 = integrand(self.spec, self.j, end)?;
        self.integral += (end.xi - self.cur.xi) / 6.0 * (f0 + 4.0 * fm + f1);
        if self.record {
            self.path.push(mid);
            self.path.push(end);
        }
        self.cur = end;
        Ok(())
    }

    /// Locate the `omega = 0` crossing between the committed point and
    /// `(xi_b, omega_b < 0)` by bisection, to `|omega| <= 1e-12`.
    fn bisect_axis_crossing(&self, mut xi_b: f64) -> Result<PathPoint> {
        let mut a = self.cur;
        for _ in 0..200 {
            if a.omega.abs() <= 1e-12 || (xi_b - a.xi).abs() < 1e-16 {
                break;
            }
            let xi_m = 0.5 * (a.xi + xi_b);
            let omega_m = rk4_step(self.spec, self.j, a.xi, a.omega, xi_m - a.xi)?;
            if omega_m >= 0.0 {
                a = PathPoint {
                    xi: xi_m,
                    omega: omega_m,
                };
            } else {
                xi_b = xi_m;
            }
        }
        Ok(a)
    }
}

fn trace_raw(
    spec: &SystemSpec,
    j: usize,
    x: f64,
    t: f64,
    step: f64,
    record: bool,
) -> Result<CharExit> {
    let target = spec.out_endpoint(j);
    let finish = |sweep: Sweep, kind: ExitKind, x_exit: f64, tau: f64| CharExit {
        j,
        x,
        t,
        x_exit,
        tau,
        kind,
        weight: sweep.integral.exp(),
        path: sweep.path,
    };

    let mut sweep = Sweep::new(spec, j, x, t, record);
    if t <= 0.0 {
        let kind = if x == target {
            ExitKind::Lateral
        } else {
            ExitKind::InitialAxis
        };
        return Ok(finish(sweep, kind, x, 0.0));
    }
    let len = (target - x).abs();
    if len == 0.0 {
        return Ok(finish(sweep, ExitKind::Lateral, target, t));
    }
    let pairs = (len / step).ceil().max(1.0) as usize;
    let h = (target - x) / pairs as f64;

    for i in 1..=pairs {
        let xi_next = if i == pairs { target } else { x + h * i as f64 };
        let (mid, end) = sweep.probe(xi_next)?;
        let crossing_xi = if mid.omega < 0.0 {
            Some(mid.xi)
        } else if end.omega < 0.0 {
            // Commit up to the midpoint first so bisection starts there.
            None
        } else {
            sweep.commit(mid, end)?;
            continue;
        };
        let bracket_b = match crossing_xi {
            Some(xi_b) => xi_b,
            None => {
                // Use the midpoint as the new committed point by a dedicated
                // half-pair commit: probe again over [cur, mid].
                let (qmid, qend) = sweep.probe(mid.xi)?;
                sweep.commit(qmid, qend)?;
                end.xi
            }
        };
        let hit = sweep.bisect_axis_crossing(bracket_b)?;
        // Final partial pair so the Simpson accumulation covers [cur, hit].
        if (hit.xi - sweep.cur.xi).abs() > 0.0 {
            let (fmid, fend) = sweep.probe(hit.xi)?;
            sweep.commit(fmid, fend)?;
        }
        let xi_exit = hit.xi.clamp(0.0, 1.0);
        if (xi_exit - target).abs() <= 1e-12 {
            // Corner hit: ties to lateral.
            return Ok(finish(sweep, ExitKind::Lateral, target, 0.0));
        }
        return Ok(finish(sweep, ExitKind::InitialAxis, xi_exit, 0.0));
    }
    let tau = sweep.cur.omega.max(0.0);
    Ok(finish(sweep, ExitKind::Lateral, target, tau))
}

/// Ordinate of the `j`-th characteristic through `(x, t)` at abscissa `xi`.
pub fn omega(spec: &SystemSpec, j: usize, xi: f64, x: f64, t: f64) -> Result<f64> {
    if let Some(a) = spec.constant_speed(j) {
        check_speed_sign(spec, j, a, x, t)?;
        let w = t + (xi - x) / a;
        if w < 0.0 || t < 0.0 {
            return Err(Error::CurveLeftDomain { j: j + 1, xi });
        }
        return Ok(w);
    }
    if xi == x {
        return Ok(t);
    }
    let step = 1.0 / 1024.0;
    let len = (xi - x).abs();
    let pairs = (len / step).ceil().max(1.0) as usize;
    let h = (xi - x) / (2 * pairs) as f64;
    let mut cur_xi = x;
    let mut cur_omega = t;
    for _ in 0..2 * pairs {
        cur_omega = rk4_step(spec, j, cur_xi, cur_omega, h)?;
        cur_xi += h;
        if cur_omega < 0.0 {
            return Err(Error::CurveLeftDomain { j: j + 1, xi });
        }
    }
    Ok(cur_omega)
}

/// Time for the `j`-th characteristic entering at the inflow boundary at time
/// `t0` to cross the unit interval.
pub fn crossing_time(spec: &SystemSpec, j: usize, t0: f64) -> Result<f64> {
    if let Some(a) = spec.constant_speed(j) {
        check_speed_sign(spec, j, a, 0.0, t0)?;
        return Ok(1.0 / a.abs());
    }
    // Integrate forward in time: from the outflow endpoint the ordinate
    // increases toward the inflow endpoint.
    let from = spec.out_endpoint(j);
    let to = spec.in_endpoint(j);
    let steps = 2048;
    let h = (to - from) / steps as f64;
    let mut xi = from;
    let mut w = t0;
    for _ in 0..steps {
        w = rk4_step(spec, j, xi, w, h)?;
        xi += h;
    }
    Ok(w - t0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;
    use crate::system::{Boundary, SystemSpec, ValidationConfig};

    fn spec_with(speeds: &[&str], dampings: &[&str], m: usize, floor: f64) -> SystemSpec {
        let n = speeds.len();
        SystemSpec::new(
            n,
            m,
            speeds
                .iter()
                .map(|s| parse(s, &["x", "t"]).unwrap())
                .collect(),
            dampings
                .iter()
                .map(|s| parse(s, &["x", "t"]).unwrap())
                .collect(),
            Boundary::Linear {
                p: vec![vec![0.0; n]; n],
            },
            false,
            floor,
            ValidationConfig::default(),
        )
        .unwrap()
    }

    fn unit_spec() -> SystemSpec {
        spec_with(&["1", "-1"], &["0", "0"], 1, 1.0)
    }

    #[test]
    fn unit_speed_initial_axis_exit() {
        let e = trace(&unit_spec(), 0, 0.3, 0.1, TraceOptions::default()).unwrap();
        assert_eq!(e.kind, ExitKind::InitialAxis);
        assert!((e.x_exit - 0.2).abs() < 1e-14);
        assert_eq!(e.tau, 0.0);
        assert_eq!(e.weight, 1.0);
    }

    #[test]
    fn unit_speed_lateral_exit_left() {
        let e = trace(&unit_spec(), 0, 0.3, 0.5, TraceOptions::default()).unwrap();
        assert_eq!(e.kind, ExitKind::Lateral);
        assert_eq!(e.x_exit, 0.0);
        assert!((e.tau - 0.2).abs() < 1e-14);
    }

    #[test]
    fn unit_speed_lateral_exit_right() {
        let e = trace(&unit_spec(), 1, 0.3, 1.0, TraceOptions::default()).unwrap();
        assert_eq!(e.kind, ExitKind::Lateral);
        assert_eq!(e.x_exit, 1.0);
        assert!((e.tau - 0.3).abs() < 1e-14);
    }

    #[test]
    fn generic_sweep_matches_fast_path_for_constant_speeds() {
        // Write the same constant speed in a form the constant folder cannot
        // see through a variable, forcing the RK4 sweep.
        let slow = spec_with(&["1 + 0*x", "-1 + 0*x"], &["0", "0"], 1, 1.0);
        let fast = unit_spec();
        for &(j, x, t) in &[
            (0usize, 0.3, 0.1),
            (0, 0.3, 0.5),
            (1, 0.3, 1.0),
            (1, 0.7, 0.2),
        ] {
            let a = trace(&fast, j, x, t, TraceOptions::default()).unwrap();
            let b = trace(&slow, j, x, t, TraceOptions::default()).unwrap();
            assert_eq!(a.kind, b.kind, "kind at ({x},{t})");
            assert!((a.x_exit - b.x_exit).abs() < 1e-10);
            assert!((a.tau - b.tau).abs() < 1e-10);
            assert!((a.weight - b.weight).abs() < 1e-10);
        }
    }

    #[test]
    fn weight_zero_damping_is_one() {
        let spec = spec_with(&["2 + sin(x)", "-1"], &["0", "0"], 1, 1.0);
        let e = trace(&spec, 0, 0.8, 2.0, TraceOptions::default()).unwrap();
        assert!((e.weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weight_constant_damping_closed_form() {
        // a = 1, b = 1, lateral exit from x = 0.3: c = exp(-0.3).
        let spec = spec_with(&["1", "-1"], &["1", "0"], 1, 1.0);
        let e = trace(&spec, 0, 0.3, 0.5, TraceOptions::default()).unwrap();
        assert!((e.weight - (-0.3f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn weight_variable_damping_closed_form() {
        // a = 1, b = x, exit at xi = 0 from (1, 2): integral of eta from 1 to 0
        // is -1/2.
        let spec = spec_with(&["1", "-1"], &["x", "0"], 1, 1.0);
        let e = trace(&spec, 0, 1.0, 2.0, TraceOptions::default()).unwrap();
        assert_eq!(e.kind, ExitKind::Lateral);
        assert!((e.weight - (-0.5f64).exp()).abs() < 1e-10, "{}", e.weight);
        // The standalone quadrature over the recorded path agrees.
        let w = weight_along(&spec, 0, &e.path).unwrap();
        assert!((w - e.weight).abs() < 1e-12);
    }

    #[test]
    fn omega_constant_speed_and_initial_condition() {
        let spec = unit_spec();
        assert!((omega(&spec, 0, 0.0, 0.5, 1.0).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(omega(&spec, 0, 0.4, 0.4, 0.7).unwrap(), 0.7);
        assert!(omega(&spec, 0, 0.0, 0.5, 0.2).is_err());
    }

    #[test]
    fn omega_autonomous_shift() {
        let spec = spec_with(&["2 + sin(x)", "-1 - 0.5*cos(x)"], &["0", "0"], 1, 1.0);
        let delta = 0.37;
        let points = [
            (0usize, 0.1f64, 0.9f64, 1.3f64),
            (0, 0.3, 0.7, 2.0),
            (1, 0.9, 0.2, 1.1),
            (1, 0.5, 0.4, 0.8),
            (0, 0.0, 0.6, 0.9),
            (1, 1.0, 0.3, 1.7),
            (0, 0.25, 0.85, 1.05),
            (1, 0.65, 0.15, 2.3),
            (0, 0.45, 0.95, 1.55),
            (1, 0.85, 0.05, 0.65),
        ];
        for &(j, xi, x, t) in &points {
            let base = omega(&spec, j, xi, x, t).unwrap();
            let shifted = omega(&spec, j, xi, x, t + delta).unwrap();
            assert!(
                (shifted - (base + delta)).abs() < 1e-9,
                "j={j} xi={xi} x={x} t={t}: {shifted} vs {}",
                base + delta
            );
        }
    }

    #[test]
    fn exit_time_monotone_in_t() {
        let spec = spec_with(&["2 + 0.5*sin(3*x)*cos(2*t)", "-1"], &["0", "0"], 1, 1.0);
        let mut last = -1.0;
        for i in 0..20 {
            let t = 0.1 + 0.15 * i as f64;
            let e = trace(&spec, 0, 0.8, t, TraceOptions::default()).unwrap();
            let tau = if e.kind == ExitKind::Lateral {
                e.tau
            } else {
                0.0
            };
            assert!(tau >= last - 1e-12, "tau decreased at t = {t}");
            last = tau;
        }
    }

    #[test]
    fn lateral_for_large_t() {
        let spec = spec_with(
            &["1.5 + 0.4*sin(x)", "-2 + 0.3*cos(x)"],
            &["0", "0"],
            1,
            1.0,
        );
        for j in 0..2 {
            for ix in 0..=8 {
                let x = ix as f64 / 8.0;
                let e = trace(&spec, j, x, 1.0 / 1.0 + 0.05, TraceOptions::default()).unwrap();
                assert_eq!(e.kind, ExitKind::Lateral, "j={j} x={x}");
            }
        }
    }

    #[test]
    fn tracer_is_fourth_order() {
        // Variable-speed exit-time benchmark against a 16x refined reference;
        // halving the step must shrink the error by at least a factor 8.
        let spec = spec_with(&["2 + 0.5*sin(3*x)*cos(2*t)", "-1"], &["0", "0"], 1, 1.0);
        let (x, t) = (0.9, 0.7);
        let tau = |step: f64| trace_raw(&spec, 0, x, t, step, false).unwrap().tau;
        let h = 1.0 / 32.0;
        let e1 = (tau(h) - tau(h / 16.0)).abs();
        let e2 = (tau(h / 2.0) - tau(h / 32.0)).abs();
        assert!(e1 > 0.0 && e2 > 0.0, "errors vanished: {e1} {e2}");
        assert!(
            e1 / e2 >= 8.0,
            "observed factor {} (e1={e1}, e2={e2})",
            e1 / e2
        );
    }

    #[test]
    fn initial_axis_refined_to_tolerance() {
        let spec = spec_with(&["2 + 0.5*sin(3*x)*cos(2*t)", "-1"], &["0", "0"], 1, 1.0);
        // Small t forces an initial-axis exit.
        let e = trace(&spec, 0, 0.9, 0.2, TraceOptions::default()).unwrap();
        assert_eq!(e.kind, ExitKind::InitialAxis);
        assert!(e.x_exit > 0.0 && e.x_exit < 0.9);
        // The ordinate at the found abscissa is zero to the bisection floor.
        let w = omega(&spec, 0, e.x_exit, 0.9, 0.2).unwrap();
        assert!(w.abs() <= 1e-10, "omega at exit = {w}");
    }

    #[test]
    fn corner_start_reads_initial_axis() {
        let spec = unit_spec();
        // In-endpoint at t = 0 must stay an initial-axis exit so the pull-back
        // reads phi there.
        let e = trace(&spec, 0, 1.0, 0.0, TraceOptions::default()).unwrap();
        assert_eq!(e.kind, ExitKind::InitialAxis);
        assert_eq!(e.x_exit, 1.0);
        // Out-endpoint corner ties to lateral.
        let e = trace(&spec, 0, 0.0, 0.0, TraceOptions::default()).unwrap();
        assert_eq!(e.kind, ExitKind::Lateral);
        assert_eq!(e.tau, 0.0);
    }
}
