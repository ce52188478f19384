//! Finite-difference reference slopes from least-squares polynomial fits.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Fits whose design matrix is worse conditioned than this are rejected.
pub const MAX_CONDITION: f64 = 1e10;

/// Least-squares polynomial in the scaled variable `t = (x − center)/half_width`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFit {
    /// Monomial coefficients in `t`, lowest degree first.
    pub coeffs: Vec<f64>,
    pub center: f64,
    pub half_width: f64,
    /// Ratio of extreme singular values of the design matrix.
    pub condition: f64,
}

impl PolynomialFit {
    pub fn fit(xs: &[f64], ys: &[f64], degree: usize) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
        }
        if xs.len() < degree + 1 {
            return Err(Error::IllConditioned(format!(
                "degree {degree} needs at least {} points, got {}",
                degree + 1,
                xs.len()
            )));
        }
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let center = 0.5 * (lo + hi);
        let half_width = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
        let design = DMatrix::from_fn(xs.len(), degree + 1, |i, j| ((xs[i] - center) / half_width).powi(j as i32));
        let svd = design.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::IllConditioned(format!(
                "condition number {condition:.3e} exceeds {MAX_CONDITION:.0e} for degree {degree} on {} points",
                xs.len()
            )));
        }
        let rhs = DVector::from_column_slice(ys);
        let sol = svd.solve(&rhs, 0.0).map_err(|e| Error::IllConditioned(e.to_string()))?;
        Ok(PolynomialFit { coeffs: sol.iter().cloned().collect(), center, half_width, condition })
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&x| self.eval_at(x)).collect()
    }

    pub fn eval_at(&self, x: f64) -> f64 {
        let t = (x - self.center) / self.half_width;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// Central difference of the fitted polynomial with step `1e−3` of the half-width.
    pub fn slope_at(&self, x: f64) -> f64 {
        let h = 1e-3 * self.half_width;
        (self.eval_at(x + h) - self.eval_at(x - h)) / (2.0 * h)
    }
}

/// Fit `(x, ⟨J⟩)` pairs with `x` inside `window` (all of them if `None`) and
/// return central-difference slopes of the fit at `at`.
pub fn fd_reference(points: &[(f64, f64)], degree: usize, window: Option<(f64, f64)>, at: &[f64]) -> Result<Vec<f64>> {
    let kept: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| y.is_finite() && window.is_none_or(|(a, b)| (a..=b).contains(x)))
        .cloned()
        .collect();
    let xs: Vec<f64> = kept.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.1).collect();
    let fit = PolynomialFit::fit(&xs, &ys, degree)?;
    Ok(at.iter().map(|&x| fit.slope_at(x)).collect())
}
