//! Flux-controlled memristor models.
//!
//! A device is characterized by its memductance nonlinearity `W(phi)`, the
//! derivative of the charge function `g(phi)`. Every model here keeps `W`
//! positive, strictly increasing, and Lipschitz on its domain, which is what
//! the read and write controllers rely on.

use crate::error::{Error, Result};

/// A per-device memductance nonlinearity.
///
/// `Sigmoid` is the default: it is valid on all of R, with memductance
/// strictly inside `(w_min, w_max)`. `Affine` is only valid on an explicit
/// flux interval `[phi_lo, phi_hi]` chosen so that `W` stays positive;
/// operations error rather than clamp outside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MemductanceModel {
    Sigmoid { w_min: f64, w_max: f64, c: f64 },
    Affine { a0: f64, a1: f64, phi_lo: f64, phi_hi: f64 },
}

/// Result of a numerical audit of the model assumptions on a flux grid.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    /// min W over the grid is positive.
    pub positive: bool,
    /// W strictly increases over consecutive grid points.
    pub strictly_monotone: bool,
    /// Largest slope |W(phi_{i+1})-W(phi_i)| / (phi_{i+1}-phi_i) observed.
    pub lipschitz_estimate: f64,
    /// The estimate does not exceed the analytic bound (up to roundoff).
    pub lipschitz_ok: bool,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.positive && self.strictly_monotone && self.lipschitz_ok
    }
}

/// Numerically stable logistic function.
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable ln(1 + e^x).
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl MemductanceModel {
    pub fn sigmoid(w_min: f64, w_max: f64, c: f64) -> Result<Self> {
        if !(w_min.is_finite() && w_max.is_finite() && c.is_finite()) {
            return Err(Error::Model("sigmoid parameters must be finite".into()));
        }
        if !(0.0 < w_min && w_min < w_max) {
            return Err(Error::Model(format!(
                "sigmoid requires 0 < w_min < w_max, got w_min = {w_min}, w_max = {w_max}"
            )));
        }
        if c <= 0.0 {
            return Err(Error::Model(format!("sigmoid requires c > 0, got {c}")));
        }
        Ok(MemductanceModel::Sigmoid { w_min, w_max, c })
    }

    pub fn affine(a0: f64, a1: f64, phi_lo: f64, phi_hi: f64) -> Result<Self> {
        if ![a0, a1, phi_lo, phi_hi].iter().all(|v| v.is_finite()) {
            return Err(Error::Model("affine parameters must be finite".into()));
        }
        if a1 <= 0.0 {
            return Err(Error::Model(format!("affine requires a1 > 0, got {a1}")));
        }
        if phi_lo >= phi_hi {
            return Err(Error::Model(format!(
                "affine requires phi_lo < phi_hi, got [{phi_lo}, {phi_hi}]"
            )));
        }
        if a0 + a1 * phi_lo <= 0.0 {
            return Err(Error::Model(format!(
                "affine memductance not positive at phi_lo: {}",
                a0 + a1 * phi_lo
            )));
        }
        Ok(MemductanceModel::Affine { a0, a1, phi_lo, phi_hi })
    }

    /// Flux validity interval. Unbounded for the sigmoid.
    pub fn domain(&self) -> (f64, f64) {
        match *self {
            MemductanceModel::Sigmoid { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            MemductanceModel::Affine { phi_lo, phi_hi, .. } => (phi_lo, phi_hi),
        }
    }

    pub fn contains(&self, phi: f64) -> bool {
        let (lo, hi) = self.domain();
        phi >= lo && phi <= hi
    }

    /// Realizable memductance interval. Open for the sigmoid (the bounds are
    /// approached but never attained), closed for the affine model.
    pub fn memductance_range(&self) -> (f64, f64) {
        match *self {
            MemductanceModel::Sigmoid { w_min, w_max, .. } => (w_min, w_max),
            MemductanceModel::Affine { a0, a1, phi_lo, phi_hi } => {
                (a0 + a1 * phi_lo, a0 + a1 * phi_hi)
            }
        }
    }

    /// True when `w` can be hit exactly by some flux in the domain.
    pub fn realizable(&self, w: f64) -> bool {
        let (lo, hi) = self.memductance_range();
        match self {
            MemductanceModel::Sigmoid { .. } => w > lo && w < hi,
            MemductanceModel::Affine { .. } => w >= lo && w <= hi,
        }
    }

    /// Memductance W(phi).
    pub fn memductance(&self, phi: f64) -> Result<f64> {
        match *self {
            MemductanceModel::Sigmoid { w_min, w_max, c } => {
                Ok(w_min + (w_max - w_min) * logistic(c * phi))
            }
            MemductanceModel::Affine { a0, a1, phi_lo, phi_hi } => {
                if phi < phi_lo || phi > phi_hi {
                    return Err(Error::Domain {
                        phi,
                        lo: phi_lo,
                        hi: phi_hi,
                        cell: None,
                        time: None,
                    });
                }
                Ok(a0 + a1 * phi)
            }
        }
    }

    /// Charge function g(phi), the antiderivative of W with g normalized so
    /// the closed form below holds (no integration constant is exposed).
    pub fn charge(&self, phi: f64) -> Result<f64> {
        match *self {
            MemductanceModel::Sigmoid { w_min, w_max, c } => {
                Ok(w_min * phi + (w_max - w_min) / c * softplus(c * phi))
            }
            MemductanceModel::Affine { a0, a1, phi_lo, phi_hi } => {
                if phi < phi_lo || phi > phi_hi {
                    return Err(Error::Domain {
                        phi,
                        lo: phi_lo,
                        hi: phi_hi,
                        cell: None,
                        time: None,
                    });
                }
                Ok(a0 * phi + 0.5 * a1 * phi * phi)
            }
        }
    }

    /// Unique flux with W(phi) = w, for w strictly inside the realizable range.
    pub fn flux_from_memductance(&self, w: f64) -> Result<f64> {
        let (lo, hi) = self.memductance_range();
        if !self.realizable(w) {
            return Err(Error::Range { value: w, lo, hi, cell: None, scale_hint: None });
        }
        match *self {
            MemductanceModel::Sigmoid { w_min, w_max, c } => {
                let u = (w - w_min) / (w_max - w_min);
                Ok((u / (1.0 - u)).ln() / c)
            }
            MemductanceModel::Affine { a0, a1, .. } => Ok((w - a0) / a1),
        }
    }

    /// Analytic Lipschitz constant beta of W on the model domain.
    pub fn lipschitz_bound(&self) -> f64 {
        match *self {
            // max of the logistic derivative is 1/4
            MemductanceModel::Sigmoid { w_min, w_max, c } => c * (w_max - w_min) / 4.0,
            MemductanceModel::Affine { a1, .. } => a1,
        }
    }

    /// Audits positivity, strict monotonicity, and the Lipschitz bound of W
    /// on the given flux grid.
    pub fn verify_assumptions(&self, grid: &[f64]) -> Result<AssumptionReport> {
        if grid.len() < 3 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid);
        }
        let values: Vec<f64> = grid
            .iter()
            .map(|&phi| self.memductance(phi))
            .collect::<Result<_>>()?;

        let positive = values.iter().all(|&w| w > 0.0);
        let strictly_monotone = values.windows(2).all(|w| w[1] > w[0]);
        let lipschitz_estimate = values
            .windows(2)
            .zip(grid.windows(2))
            .map(|(wv, wp)| ((wv[1] - wv[0]) / (wp[1] - wp[0])).abs())
            .fold(0.0_f64, f64::max);
        let lipschitz_ok = lipschitz_estimate <= self.lipschitz_bound() * (1.0 + 1e-9);

        Ok(AssumptionReport {
            positive,
            strictly_monotone,
            lipschitz_estimate,
            lipschitz_ok,
        })
    }
}
