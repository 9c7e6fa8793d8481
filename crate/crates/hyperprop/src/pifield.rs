//! Grid representations of `n`-component functions on the strip `Π^T` and of
//! boundary traces on `[0, T]`, plus seeded sampling of compatible fields.
//!
//! A [`PiField`] stores node values on a uniform `(N_x + 1) x (N_t + 1)` grid
//! and evaluates by bilinear interpolation: continuous solutions are only
//! piecewise C^1 across characteristics, so higher-order interpolation would
//! oscillate at those lines. Node reads are exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exprlang::{bump_profile, Expr};
use crate::system::SystemSpec;
use crate::util::l2_norm_samples;
use crate::{Error, Result};

/// Snap tolerance, in index units, for bilinear cell location. Coordinates
/// closer than this to a node evaluate at the node itself, which keeps node
/// reads exact on grids whose spacing is not a binary fraction.
const SNAP: f64 = 1e-9;

fn locate(s: f64, count: usize) -> (usize, f64) {
    let nearest = s.round();
    if (s - nearest).abs() < SNAP && nearest >= 0.0 && nearest <= count as f64 {
        let i = nearest as usize;
        return (i.min(count), 0.0);
    }
    let i = s.floor();
    if i < 0.0 {
        return (0, 0.0);
    }
    let i = i as usize;
    if i >= count {
        (count, 0.0)
    } else {
        (i, s - i as f64)
    }
}

/// An `n`-component grid function on `Π^T = [0,1] x [0,T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiField {
    n: usize,
    t_horizon: f64,
    nx: usize,
    nt: usize,
    /// Row-major per component: index `it * (nx + 1) + ix`.
    comps: Vec<Vec<f64>>,
}

impl PiField {
    pub fn zeros(n: usize, t_horizon: f64, nx: usize, nt: usize) -> Self {
        PiField {
            n,
            t_horizon,
            nx,
            nt,
            comps: vec![vec![0.0; (nx + 1) * (nt + 1)]; n],
        }
    }

    pub fn from_fn(
        n: usize,
        t_horizon: f64,
        nx: usize,
        nt: usize,
        mut f: impl FnMut(usize, f64, f64) -> f64,
    ) -> Self {
        let mut field = PiField::zeros(n, t_horizon, nx, nt);
        for j in 0..n {
            for it in 0..=nt {
                let t = field.t_at(it);
                for ix in 0..=nx {
                    let x = field.x_at(ix);
                    let v = f(j, x, t);
                    field.set_node(j, ix, it, v);
                }
            }
        }
        field
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn t_horizon(&self) -> f64 {
        self.t_horizon
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_horizon / self.nt as f64
    }

    pub fn x_at(&self, ix: usize) -> f64 {
        ix as f64 / self.nx as f64
    }

    pub fn t_at(&self, it: usize) -> f64 {
        self.t_horizon * it as f64 / self.nt as f64
    }

    #[inline]
    pub fn node(&self, j: usize, ix: usize, it: usize) -> f64 {
        self.comps[j][it * (self.nx + 1) + ix]
    }

    #[inline]
    pub fn set_node(&mut self, j: usize, ix: usize, it: usize, v: f64) {
        self.comps[j][it * (self.nx + 1) + ix] = v;
    }

    /// One time level of one component, contiguous in `x`.
    pub fn row(&self, j: usize, it: usize) -> &[f64] {
        let w = self.nx + 1;
        &self.comps[j][it * w..(it + 1) * w]
    }

    /// Bilinear interpolation; exact at nodes.
    pub fn eval(&self, j: usize, x: f64, t: f64) -> f64 {
        debug_assert!((-1e-9..=1.0 + 1e-9).contains(&x), "x = {x}");
        debug_assert!(
            t >= -1e-9 && t <= self.t_horizon * (1.0 + 1e-12) + 1e-9,
            "t = {t}"
        );
        let (ix, fx) = locate(x * self.nx as f64, self.nx);
        let (it, ft) = locate(t / self.t_horizon * self.nt as f64, self.nt);
        let ix1 = (ix + 1).min(self.nx);
        let it1 = (it + 1).min(self.nt);
        let v00 = self.node(j, ix, it);
        let v10 = self.node(j, ix1, it);
        let v01 = self.node(j, ix, it1);
        let v11 = self.node(j, ix1, it1);
        let a = v00 + fx * (v10 - v00);
        let b = v01 + fx * (v11 - v01);
        a + ft * (b - a)
    }

    /// Max of `|u_j|` over grid nodes with `t` in the given closed interval.
    pub fn sup_norm(&self, t_lo: f64, t_hi: f64) -> Result<f64> {
        let mut best: Option<f64> = None;
        for it in 0..=self.nt {
            let t = self.t_at(it);
            if t < t_lo - 1e-12 || t > t_hi + 1e-12 {
                continue;
            }
            for j in 0..self.n {
                for v in self.row(j, it) {
                    let a = v.abs();
                    if best.map(|b| a > b).unwrap_or(true) {
                        best = Some(a);
                    }
                }
            }
        }
        best.ok_or_else(|| {
            Error::Grid(format!(
                "empty region [{t_lo}, {t_hi}] on a grid with horizon {}",
                self.t_horizon
            ))
        })
    }

    /// Sup over all nodes of the absolute difference to `other` (same grid).
    pub fn sup_diff(&self, other: &PiField) -> f64 {
        debug_assert_eq!(self.nx, other.nx);
        debug_assert_eq!(self.nt, other.nt);
        let mut worst = 0.0f64;
        for j in 0..self.n {
            for (a, b) in self.comps[j].iter().zip(&other.comps[j]) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }

    /// Max of `|u_j(x_grid, t)|` along one interpolated time slice.
    pub fn slice_sup(&self, t: f64) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.n {
            for ix in 0..=self.nx {
                worst = worst.max(self.eval(j, self.x_at(ix), t).abs());
            }
        }
        worst
    }

    /// Sampled values of one component along an interpolated time slice.
    pub fn slice_samples(&self, j: usize, t: f64) -> Vec<f64> {
        (0..=self.nx)
            .map(|ix| self.eval(j, self.x_at(ix), t))
            .collect()
    }

    /// L2(0,1)^n norm of the slice at time `t`.
    pub fn slice_l2(&self, t: f64) -> f64 {
        let mut total = 0.0;
        for j in 0..self.n {
            let s = self.slice_samples(j, t);
            let norm = l2_norm_samples(&s, self.dx());
            total += norm * norm;
        }
        total.sqrt()
    }

    /// CSV rows `x,t,u1,...,un` in t-major order, header included.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,t");
        for j in 1..=self.n {
            out.push_str(&format!(",u{j}"));
        }
        out.push('\n');
        for it in 0..=self.nt {
            let t = self.t_at(it);
            for ix in 0..=self.nx {
                let x = self.x_at(ix);
                out.push_str(&format!("{x},{t}"));
                for j in 0..self.n {
                    out.push_str(&format!(",{}", self.node(j, ix, it)));
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Initial data `φ` on `[0, 1]`: per-component expressions in `x` or samples
/// on a uniform grid with linear interpolation.
#[derive(Clone, Debug)]
pub enum InitialData {
    Exprs(Vec<Expr>),
    Samples(Vec<Vec<f64>>),
}

impl InitialData {
    pub fn zero(n: usize) -> Self {
        InitialData::Samples(vec![vec![0.0, 0.0]; n])
    }

    pub fn from_exprs(exprs: Vec<Expr>) -> Self {
        InitialData::Exprs(exprs)
    }

    pub fn from_samples(samples: Vec<Vec<f64>>) -> Self {
        InitialData::Samples(samples)
    }

    /// The bottom row of a field, as sampled data.
    pub fn from_field_bottom(field: &PiField) -> Self {
        InitialData::Samples((0..field.n()).map(|j| field.row(j, 0).to_vec()).collect())
    }

    pub fn n(&self) -> usize {
        match self {
            InitialData::Exprs(e) => e.len(),
            InitialData::Samples(s) => s.len(),
        }
    }

    /// Evaluate component `j` at `x` (expressions evaluate exactly; samples
    /// interpolate linearly). Out-of-domain expression errors surface as NaN
    /// here only for data authored with total expressions; solvers evaluating
    /// user expressions directly use [`InitialData::try_eval`].
    pub fn eval(&self, j: usize, x: f64) -> f64 {
        self.try_eval(j, x).unwrap_or(f64::NAN)
    }

    pub fn try_eval(&self, j: usize, x: f64) -> Result<f64> {
        match self {
            InitialData::Exprs(exprs) => exprs[j].eval_slice(&[x]),
            InitialData::Samples(samples) => {
                let row = &samples[j];
                let cells = row.len() - 1;
                let (i, f) = locate(x * cells as f64, cells);
                if i >= cells {
                    Ok(row[cells])
                } else {
                    Ok(row[i] + f * (row[i + 1] - row[i]))
                }
            }
        }
    }

    /// Sample onto a uniform grid with `nx + 1` points.
    pub fn sample(&self, nx: usize) -> Result<Vec<Vec<f64>>> {
        (0..self.n())
            .map(|j| {
                (0..=nx)
                    .map(|ix| self.try_eval(j, ix as f64 / nx as f64))
                    .collect()
            })
            .collect()
    }
}

/// An `n`-component function of `t` on `[0, T]` with linear interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTrace {
    t_horizon: f64,
    comps: Vec<Vec<f64>>,
}

impl BoundaryTrace {
    pub fn new(t_horizon: f64, comps: Vec<Vec<f64>>) -> Self {
        BoundaryTrace { t_horizon, comps }
    }

    pub fn zeros(n: usize, t_horizon: f64, nt: usize) -> Self {
        BoundaryTrace {
            t_horizon,
            comps: vec![vec![0.0; nt + 1]; n],
        }
    }

    pub fn n(&self) -> usize {
        self.comps.len()
    }

    pub fn nt(&self) -> usize {
        self.comps[0].len() - 1
    }

    pub fn t_horizon(&self) -> f64 {
        self.t_horizon
    }

    pub fn node(&self, j: usize, it: usize) -> f64 {
        self.comps[j][it]
    }

    pub fn set_node(&mut self, j: usize, it: usize, v: f64) {
        self.comps[j][it] = v;
    }

    pub fn eval(&self, j: usize, t: f64) -> f64 {
        let nt = self.nt();
        let (it, f) = locate(t / self.t_horizon * nt as f64, nt);
        let row = &self.comps[j];
        if it >= nt {
            row[nt]
        } else {
            row[it] + f * (row[it + 1] - row[it])
        }
    }
}

/// Component `j` of the inflow trace: `u_j` read at the inflow endpoint.
pub fn extract_in_trace(u: &PiField, spec: &SystemSpec) -> BoundaryTrace {
    extract_side(u, spec, false)
}

/// Component `j` of the outflow trace: `u_j` read at the outflow endpoint.
pub fn extract_out_trace(u: &PiField, spec: &SystemSpec) -> BoundaryTrace {
    extract_side(u, spec, true)
}

fn extract_side(u: &PiField, spec: &SystemSpec, out: bool) -> BoundaryTrace {
    let comps = (0..u.n())
        .map(|j| {
            let endpoint = if out {
                spec.out_endpoint(j)
            } else {
                spec.in_endpoint(j)
            };
            let ix = if endpoint == 0.0 { 0 } else { u.nx() };
            (0..=u.nt()).map(|it| u.node(j, ix, it)).collect()
        })
        .collect();
    BoundaryTrace::new(u.t_horizon(), comps)
}

/// Corner bump radius for compatibility corrections. Any value below 1/2
/// keeps the two corners from interfering; fixing it keeps sampling
/// reproducible.
pub const CORNER_BUMP_RADIUS: f64 = 0.25;

/// Zero-order compatibility defect of a field: `w_out(0) - h(0, w_in(0))`.
pub fn field_compat_defect(w: &PiField, spec: &SystemSpec) -> Result<Vec<f64>> {
    let w_in: Vec<f64> = spec.assemble_in(|j, x| w.node(j, if x == 0.0 { 0 } else { w.nx() }, 0));
    let w_out: Vec<f64> = spec.assemble_out(|j, x| w.node(j, if x == 0.0 { 0 } else { w.nx() }, 0));
    let h0 = spec.boundary_map(0.0, &w_in)?;
    Ok(w_out.iter().zip(&h0).map(|(o, h)| o - h).collect())
}

/// Add the corner-bump correction that moves the outflow corner values of `w`
/// by `delta` without touching the inflow corner reads.
pub fn apply_corner_correction(w: &mut PiField, spec: &SystemSpec, delta: &[f64]) {
    let (nx, nt) = (w.nx(), w.nt());
    for j in 0..w.n() {
        if delta[j] == 0.0 {
            continue;
        }
        let cx = spec.out_endpoint(j);
        for it in 0..=nt {
            let t = w.t_at(it);
            for ix in 0..=nx {
                let x = w.x_at(ix);
                let d = ((x - cx).powi(2) + t * t).sqrt() / CORNER_BUMP_RADIUS;
                if d < 1.0 {
                    let v = w.node(j, ix, it) + delta[j] * bump_profile(d);
                    w.set_node(j, ix, it, v);
                }
            }
        }
    }
}

/// Seeded random element of `C_h(Π)^n` on the grid: a truncated double cosine
/// series with decaying coefficients, scaled to the requested sup-norm, then
/// corner-corrected so the zero-order compatibility defect vanishes.
pub fn sample_ch(
    spec: &SystemSpec,
    t_horizon: f64,
    nx: usize,
    nt: usize,
    seed: u64,
    modes: usize,
    amplitude: f64,
) -> Result<PiField> {
    let n = spec.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = std::f64::consts::TAU;
    let mut theta_x = vec![vec![0.0; modes + 1]; n];
    let mut theta_t = vec![vec![0.0; modes + 1]; n];
    let mut coef = vec![vec![vec![0.0; modes + 1]; modes + 1]; n];
    for j in 0..n {
        for p in 0..=modes {
            theta_x[j][p] = rng.gen::<f64>() * tau;
        }
        for q in 0..=modes {
            theta_t[j][q] = rng.gen::<f64>() * tau;
        }
        for p in 0..=modes {
            for q in 0..=modes {
                let decay = 1.0 / (1.0 + (p * p + q * q) as f64);
                coef[j][p][q] = (rng.gen::<f64>() * 2.0 - 1.0) * decay;
            }
        }
    }

    let mut w = PiField::zeros(n, t_horizon, nx, nt);
    if amplitude != 0.0 {
        let pi = std::f64::consts::PI;
        let mut vmax = 0.0f64;
        for j in 0..n {
            for it in 0..=nt {
                let t = w.t_at(it);
                for ix in 0..=nx {
                    let x = w.x_at(ix);
                    let mut v = 0.0;
                    for p in 0..=modes {
                        let cx = (pi * p as f64 * x + theta_x[j][p]).cos();
                        for q in 0..=modes {
                            let ct = (pi * q as f64 * t / t_horizon + theta_t[j][q]).cos();
                            v += coef[j][p][q] * cx * ct;
                        }
                    }
                    w.set_node(j, ix, it, v);
                    vmax = vmax.max(v.abs());
                }
            }
        }
        if vmax > 0.0 {
            let scale = amplitude / vmax;
            for j in 0..n {
                for v in w.comps[j].iter_mut() {
                    *v *= scale;
                }
            }
        }
    }

    // One corner-correction pass is exact: the correction bumps live at the
    // outflow corners and cannot feed w_in(0).
    let defect = field_compat_defect(&w, spec)?;
    let delta: Vec<f64> = defect.iter().map(|d| -d).collect();
    apply_corner_correction(&mut w, spec, &delta);
    Ok(w)
}
