use std::f64::consts::PI;

use crate::error::{CpiError, Result};
use crate::grid::SampledGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Gaussian,
}

/// Source intensity profile `F(rho) = exp(-rho^2 / 2 sigma^2) / (2 pi sigma^2)`,
/// with amplitude `f = sqrt(F)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceProfile {
    pub sigma: f64,
    pub kind: ProfileKind,
}

impl SourceProfile {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(CpiError::Domain(format!("source sigma must be positive, got {sigma}")));
        }
        Ok(SourceProfile {
            sigma,
            kind: ProfileKind::Gaussian,
        })
    }

    /// 2D intensity at radius `rho`, unit total power.
    pub fn intensity(&self, rho: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        (-rho * rho / (2.0 * s2)).exp() / (2.0 * PI * s2)
    }

    /// 1D marginal of [`Self::intensity`], unit total power on a line.
    pub fn intensity_1d(&self, x: f64) -> f64 {
        (-x * x / (2.0 * self.sigma * self.sigma)).exp() / ((2.0 * PI).sqrt() * self.sigma)
    }

    pub fn amplitude_1d(&self, x: f64) -> f64 {
        self.intensity_1d(x).sqrt()
    }

    /// Numerical 2D integral of `F` over the square `grid x grid`.
    pub fn normalization_on(&self, grid: &SampledGrid) -> f64 {
        let h = grid.spacing();
        let mut total = 0.0;
        for y in grid.points() {
            for x in grid.points() {
                total += self.intensity((x * x + y * y).sqrt());
            }
        }
        total * h * h
    }
}
