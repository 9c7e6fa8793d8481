//! Small shared numeric helpers.

/// Integral of uniformly spaced samples by composite Simpson, falling back to
/// a trapezoid on a dangling final interval.
pub(crate) fn integrate_samples(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 < n {
        total += dx / 3.0 * (values[i] + 4.0 * values[i + 1] + values[i + 2]);
        i += 2;
    }
    if i == n - 2 {
        total += dx * 0.5 * (values[i] + values[i + 1]);
    }
    total
}

/// L2(0,1) norm of one sampled component (uniform grid including endpoints).
pub(crate) fn l2_norm_samples(values: &[f64], dx: f64) -> f64 {
    let squares: Vec<f64> = values.iter().map(|v| v * v).collect();
    integrate_samples(&squares, dx).max(0.0).sqrt()
}

/// L2(0,1)^n norm of a vector function sampled per component.
pub(crate) fn l2_norm_vector(components: &[Vec<f64>], dx: f64) -> f64 {
    let len = components[0].len();
    let squares: Vec<f64> = (0..len)
        .map(|i| components.iter().map(|c| c[i] * c[i]).sum())
        .collect();
    integrate_samples(&squares, dx).max(0.0).sqrt()
}
