//! Least-squares fits of log-norms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fit of ln y = intercept + slope · ln x.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    pub abscissae: Vec<f64>,
    pub ordinates: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Largest |residual| in log10 units.
    pub max_residual: f64,
    /// Set when every ordinate was zero (nothing to fit).
    pub degenerate: bool,
}

impl DecayFit {
    pub const MIN_POINTS: usize = 4;

    pub fn fit(x: &[f64], y: &[f64]) -> Result<Self> {
        Self::fit_min(x, y, Self::MIN_POINTS)
    }

    /// Same as [`DecayFit::fit`] with a custom minimum point count.
    pub fn fit_min(x: &[f64], y: &[f64], min_points: usize) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Invalid(
                "fit abscissae and ordinates differ in length".into(),
            ));
        }
        if y.iter().all(|v| *v == 0.0) && x.len() >= min_points {
            return Ok(DecayFit {
                abscissae: x.iter().map(|v| v.ln()).collect(),
                ordinates: vec![f64::NEG_INFINITY; y.len()],
                slope: f64::NAN,
                intercept: f64::NAN,
                max_residual: 0.0,
                degenerate: true,
            });
        }
        let pts: Vec<(f64, f64)> = x
            .iter()
            .zip(y)
            .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
            .map(|(a, b)| (a.ln(), b.ln()))
            .collect();
        if pts.len() < min_points {
            return Err(Error::Fit {
                need: min_points,
                got: pts.len(),
            });
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx == 0.0 {
            return Err(Error::Invalid("fit abscissae are all equal".into()));
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let max_residual = pts
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).abs() / std::f64::consts::LN_10)
            .fold(0.0, f64::max);
        Ok(DecayFit {
            abscissae: pts.iter().map(|p| p.0).collect(),
            ordinates: pts.iter().map(|p| p.1).collect(),
            slope,
            intercept,
            max_residual,
            degenerate: false,
        })
    }

    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}
