//! Finite-difference stencils and slope fits used to verify analytic
//! derivatives against independent numerical estimates.

/// 5-point central first derivative at `x`.
pub fn derivative_5pt<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

/// 5-point central second derivative at `x`.
pub fn second_derivative_5pt<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x) + 16.0 * f(x + h) - f(x + 2.0 * h))
        / (12.0 * h * h)
}

/// Least-squares slope of `log y` against `log x`; the observed order of a
/// remainder that scales like `C x^p`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Richardson combination of two estimates with steps `h` and `h/2` for a
/// method of order `p`: `(2^p E(h/2) - E(h)) / (2^p - 1)`.
pub fn richardson(estimate_h: f64, estimate_h2: f64, order: i32) -> f64 {
    let w = 2f64.powi(order);
    (w * estimate_h2 - estimate_h) / (w - 1.0)
}

/// Rough bound on the rounding noise of a second-derivative stencil with
/// values of magnitude `scale`.
pub fn second_stencil_noise(scale: f64, h: f64) -> f64 {
    64.0 * f64::EPSILON * scale / (12.0 * h * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencils_on_polynomials() {
        // Both stencils are exact on degree <= 4 polynomials.
        let f = |x: f64| 2.0 * x.powi(4) - x.powi(3) + 0.5 * x * x - 3.0;
        let d = |x: f64| 8.0 * x.powi(3) - 3.0 * x * x + x;
        let d2 = |x: f64| 24.0 * x * x - 6.0 * x + 1.0;
        for x in [-0.7, 0.0, 1.3] {
            assert!((derivative_5pt(f, x, 0.1) - d(x)).abs() < 1e-11);
            assert!((second_derivative_5pt(f, x, 0.1) - d2(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1e-1f64, 1e-2, 1e-3];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 4.0 * x.powi(3)).collect();
        assert!((log_log_slope(&xs, &ys) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn richardson_cancels_leading_error() {
        // E(h) = D + c h^2
        let d = 1.5;
        let e = |h: f64| d + 0.3 * h * h;
        let r = richardson(e(0.1), e(0.05), 2);
        assert!((r - d).abs() < 1e-12);
    }
}
