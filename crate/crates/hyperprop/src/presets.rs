//! Built-in example problems, generated programmatically so the CLI and the
//! regression suite share one source of truth.

use crate::model::{BoundaryFile, ModelFile, NonlinearBoundaryFile, ValidationFile};
use crate::system::SystemSpec;
use crate::Result;

/// Variants of the `sec3-2` example: a two-component unit-speed system with
/// the sine feedback walls
/// `u_1(0,t) = r(t) sin(u_2(0,t))`, `u_2(1,t) = sin(s(t) u_1(1,t))^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SineVariant {
    /// Generic bounded smooth `r`, `s`.
    Baseline,
    /// `r = s = 0` on `[1, 2.5]` (window length 1.5 >= 1): the slice at
    /// `T = 2.25` vanishes after a single application.
    ZeroBoth,
    /// `s = 0` on `[1, 3.2]` (window length 2.2 >= 2), `r` arbitrary: the
    /// slice at `T = 3.2` vanishes after two applications.
    ZeroS,
}

/// A bundled example problem with its recommended check parameters.
#[derive(Clone, Debug)]
pub struct PresetProblem {
    pub name: String,
    pub description: String,
    pub model: ModelFile,
    /// Horizon the bundled check runs at.
    pub t_check: f64,
    /// Power the bundled check uses (`None` = auto).
    pub k_check: Option<usize>,
}

impl PresetProblem {
    pub fn spec(&self) -> Result<SystemSpec> {
        self.model.to_spec()
    }
}

/// A C^1 window factor that vanishes on `[lo, hi]` and ramps back to `amp`
/// outside with a capped square.
fn windowed(amp: f64, lo: f64, hi: f64) -> String {
    format!(
        "if(t < {lo}, {amp}*min(({lo} - t)^2, 1), if(t <= {hi}, 0, {amp}*min((t - {hi})^2, 1)))"
    )
}

pub const BASELINE_R: &str = "0.8*cos(t)";
pub const BASELINE_S: &str = "0.9*sin(t) + 0.3";

/// Reflection coefficients `r(t)`, `s(t)` of the named variant as expression
/// strings in `t`.
pub fn sine_feedback_coefficients(variant: SineVariant) -> (String, String) {
    match variant {
        SineVariant::Baseline => (BASELINE_R.to_string(), BASELINE_S.to_string()),
        SineVariant::ZeroBoth => (windowed(0.8, 1.0, 2.5), windowed(0.9, 1.0, 2.5)),
        SineVariant::ZeroS => (BASELINE_R.to_string(), windowed(0.9, 1.0, 3.2)),
    }
}

/// The `sec3-2` example with the requested reflection variant.
pub fn sine_feedback(variant: SineVariant) -> PresetProblem {
    let (r, s) = sine_feedback_coefficients(variant);
    let (t_check, k_check, tag) = match variant {
        SineVariant::Baseline => (2.0, None, "baseline"),
        SineVariant::ZeroBoth => (2.25, Some(1), "suf2"),
        SineVariant::ZeroS => (3.2, Some(2), "suf1"),
    };
    let model = ModelFile {
        n: 2,
        m: 1,
        speeds: vec!["1".into(), "-1".into()],
        dampings: vec!["0".into(), "0".into()],
        boundary: BoundaryFile {
            linear: None,
            nonlinear: Some(NonlinearBoundaryFile {
                h: vec![format!("({r})*sin(xi2)"), format!("sin(({s})*xi1)^2")],
            }),
        },
        autonomous: false,
        speed_floor: 1.0,
        validation: Some(ValidationFile {
            t_max: Some(5.0),
            xi_lo: None,
            xi_hi: None,
            nx: None,
            nt: None,
            n_xi: None,
        }),
    };
    PresetProblem {
        name: format!("sec3-2 ({tag})"),
        description: format!(
            "two-component unit-speed system with sine feedback walls; r(t) = {r}, s(t) = {s}"
        ),
        model,
        t_check,
        k_check,
    }
}

/// The `sec3-3` example: driven boundary `u_1(0,t) = g(t)`,
/// `u_2(1,t) = u_1(1,t)` with `g = 0` on `[0, 4]` and `g != 0` after. Every
/// sampled field has `[Q^2 w](., 3) = 0`, yet the solution is nonzero at
/// `t = 5`: the slice-vanishing criterion does not extend to nonhomogeneous
/// boundaries.
pub fn driven_feedback() -> PresetProblem {
    let g = "if(t <= 4, 0, min((t - 4)^2, 1))";
    let model = ModelFile {
        n: 2,
        m: 1,
        speeds: vec!["1".into(), "-1".into()],
        dampings: vec!["0".into(), "0".into()],
        boundary: BoundaryFile {
            linear: None,
            nonlinear: Some(NonlinearBoundaryFile {
                h: vec![g.to_string(), "xi1".to_string()],
            }),
        },
        autonomous: false,
        speed_floor: 1.0,
        validation: Some(ValidationFile {
            t_max: Some(6.0),
            xi_lo: None,
            xi_hi: None,
            nx: None,
            nt: None,
            n_xi: None,
        }),
    };
    PresetProblem {
        name: "sec3-3".into(),
        description: format!("driven boundary u1(0,t) = g(t), u2(1,t) = u1(1,t) with g(t) = {g}"),
        model,
        t_check: 3.0,
        k_check: Some(2),
    }
}
