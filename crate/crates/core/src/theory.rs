//! Closed-form exponents, thresholds and constants.

use thiserror::Error;

use crate::graph::{ratio_f64, DensityReport};

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("k must be positive")]
    ZeroShape,
    #[error("x must be positive, got {0}")]
    NonPositive(f64),
    #[error("pattern is not strictly balanced; use the d* form of the threshold")]
    NotStrictlyBalanced,
    #[error("n must be at least 3, got {0}")]
    SmallN(usize),
    #[error("alpha must lie in [0, 1), got {0}")]
    Alpha(f64),
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Bounds on `Pr(X_1 + ... + X_k <= x)` for i.i.d. Exp(1) summands:
/// `(1 - x) x^k / k! <= Pr <= x^k / k!`, with the lower end clamped at 0.
pub fn gamma_cdf_bounds(k: u32, x: f64) -> Result<(f64, f64), TheoryError> {
    if k == 0 {
        return Err(TheoryError::ZeroShape);
    }
    if !(x > 0.0) {
        return Err(TheoryError::NonPositive(x));
    }
    let hi = x.powi(k as i32) / factorial(k);
    let lo = ((1.0 - x) * hi).max(0.0);
    Ok((lo, hi))
}

/// `1 - 1/d*`, the growth exponent of the cheapest factor; 0 when `d* = 1`.
pub fn predicted_exponent(report: &DensityReport) -> f64 {
    let d = ratio_f64(report.d_star);
    if d <= 1.0 {
        0.0
    } else {
        1.0 - 1.0 / d
    }
}

/// `1 - 1/max(d_H, Δ)`, the exponent of the cover lower bound.
pub fn cover_lower_exponent(report: &DensityReport) -> f64 {
    let m = ratio_f64(report.d_h.max(report.delta));
    1.0 - 1.0 / m
}

/// `n^(-1/d_H) (ln n)^(1/e_H)` for strictly balanced patterns.
pub fn jkv_threshold(report: &DensityReport, n: usize) -> Result<f64, TheoryError> {
    if !report.strictly_balanced {
        return Err(TheoryError::NotStrictlyBalanced);
    }
    if n < 3 {
        return Err(TheoryError::SmallN(n));
    }
    let n = n as f64;
    Ok(n.powf(-1.0 / report.d_h_f64()) * n.ln().powf(1.0 / report.edge_count as f64))
}

/// The first-moment lower-bound constant `c = 1/(c1 c2)` with
/// `c1 c2 = (r/e_H) e^(1 - 1/d_H) (r alpha^(-alpha r) Aut(H))^(-1/e_H)` and
/// `r = v_H / (1 - alpha)`. `alpha^(-alpha r)` is 1 at `alpha = 0`.
pub fn first_moment_constant(report: &DensityReport, alpha: f64) -> Result<f64, TheoryError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(TheoryError::Alpha(alpha));
    }
    let v = report.vertex_count as f64;
    let e = report.edge_count as f64;
    let r = v / (1.0 - alpha);
    let alpha_term = if alpha == 0.0 { 1.0 } else { alpha.powf(-alpha * r) };
    let aut = report.aut_count as f64;
    let c1c2 = (r / e) * (1.0 - 1.0 / report.d_h_f64()).exp() * (r * alpha_term * aut).powf(-1.0 / e);
    Ok(1.0 / c1c2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{analyze, named_graph, parse_named};

    fn report(spec: &str) -> DensityReport {
        analyze(&parse_named(spec).unwrap()).unwrap()
    }

    #[test]
    fn gamma_bounds_examples() {
        let (lo, hi) = gamma_cdf_bounds(1, 0.5).unwrap();
        assert_eq!((lo, hi), (0.25, 0.5));
        let truth = 1.0 - (-0.5f64).exp();
        assert!(lo <= truth && truth <= hi);
        let (lo, hi) = gamma_cdf_bounds(2, 0.1).unwrap();
        assert!((lo - 0.0045).abs() < 1e-15 && (hi - 0.005).abs() < 1e-15);
        assert_eq!(gamma_cdf_bounds(0, 0.1), Err(TheoryError::ZeroShape));
        assert_eq!(gamma_cdf_bounds(3, 2.0).unwrap().0, 0.0);
    }

    #[test]
    fn gamma_bounds_ratio_near_zero() {
        for k in 1..6 {
            let (lo, hi) = gamma_cdf_bounds(k, 1e-6).unwrap();
            assert!(lo <= hi);
            assert!((lo / hi - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn exponents() {
        assert!((predicted_exponent(&report("complete:3")) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(predicted_exponent(&report("complete:2")), 0.0);
        assert!((predicted_exponent(&report("lollipop:5,2")) - 0.6).abs() < 1e-15);
        assert!((cover_lower_exponent(&report("complete:4+complete:2")) - 1.0 / 3.0).abs() < 1e-15);
        assert!((cover_lower_exponent(&report("lollipop:5,2")) - 0.5).abs() < 1e-15);
        let k4 = report("complete:4");
        assert_eq!(cover_lower_exponent(&k4), predicted_exponent(&k4));
    }

    #[test]
    fn thresholds() {
        let t = jkv_threshold(&report("complete:3"), 1000).unwrap();
        let expected = 1000f64.powf(-2.0 / 3.0) * 1000f64.ln().powf(1.0 / 3.0);
        assert!((t - expected).abs() < 1e-15);
        assert!((t - 0.01906).abs() < 5e-5);
        let k2 = jkv_threshold(&report("complete:2"), 15).unwrap();
        assert!((k2 - 15f64.ln() / 15.0).abs() < 1e-15);
        assert_eq!(
            jkv_threshold(&report("complete:4+complete:2"), 100),
            Err(TheoryError::NotStrictlyBalanced)
        );
    }

    #[test]
    fn first_moment_constant_for_triangles() {
        let rep = analyze(&named_graph("complete", &[3]).unwrap()).unwrap();
        let c = first_moment_constant(&rep, 0.0).unwrap();
        // (18/e)^(1/3), evaluated independently.
        let expected = (18.0 / std::f64::consts::E).cbrt();
        assert!((c - expected).abs() < 1e-12);
        assert!((c - 1.878).abs() < 1e-3);
        let near = first_moment_constant(&rep, 1e-9).unwrap();
        assert!(((near - c) / c).abs() < 1e-6);
        let k2 = first_moment_constant(&report("complete:2"), 0.0).unwrap();
        // r = 2, e_H = 1, Aut = 2: c1 c2 = 2 * 1 * (2*2)^(-1) = 1/2.
        assert!((k2 - 2.0).abs() < 1e-12);
    }
}
