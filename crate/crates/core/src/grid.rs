use serde::{Deserialize, Serialize};

use crate::error::{CpiError, Result};

/// Uniform 1D sampling: `x_i = origin + i * spacing` for `i in 0..n_points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledGrid {
    n_points: usize,
    spacing: f64,
    origin: f64,
}

impl SampledGrid {
    pub fn new(n_points: usize, spacing: f64, origin: f64) -> Result<Self> {
        if n_points < 2 {
            return Err(CpiError::Domain(format!(
                "grid needs at least 2 points, got {n_points}"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(CpiError::Domain(format!(
                "grid spacing must be positive, got {spacing}"
            )));
        }
        if !origin.is_finite() {
            return Err(CpiError::Domain("grid origin must be finite".into()));
        }
        Ok(SampledGrid {
            n_points,
            spacing,
            origin,
        })
    }

    /// Grid symmetric about zero. Odd `n_points` puts a sample exactly on 0.
    pub fn centered(n_points: usize, spacing: f64) -> Result<Self> {
        Self::new(n_points, spacing, -((n_points - 1) as f64) * 0.5 * spacing)
    }

    /// Smallest odd-sized centered grid at `spacing` whose extent covers
    /// `[-half_width, half_width]`.
    pub fn covering_symmetric(half_width: f64, spacing: f64) -> Result<Self> {
        let half = (half_width / spacing).ceil().max(1.0) as usize;
        Self::centered(2 * half + 1, spacing)
    }

    /// Constructs the grid and checks it covers the caller-declared support.
    pub fn with_support(n_points: usize, spacing: f64, origin: f64, support: (f64, f64)) -> Result<Self> {
        let g = Self::new(n_points, spacing, origin)?;
        g.check_covers(support.0, support.1)?;
        Ok(g)
    }

    pub fn check_covers(&self, lo: f64, hi: f64) -> Result<()> {
        let tol = 1e-9 * self.spacing;
        if self.first() > lo + tol || self.last() < hi - tol {
            return Err(CpiError::Coverage {
                lo,
                hi,
                grid_lo: self.first(),
                grid_hi: self.last(),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn first(&self) -> f64 {
        self.origin
    }

    pub fn last(&self) -> f64 {
        self.at(self.n_points - 1)
    }

    #[inline]
    pub fn at(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.at(i))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.points().collect()
    }

    /// Same sample count, all coordinates multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        SampledGrid {
            n_points: self.n_points,
            spacing: self.spacing * factor.abs(),
            origin: if factor >= 0.0 {
                self.origin * factor
            } else {
                self.last() * factor
            },
        }
    }

    /// Index of the sample closest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let t = ((x - self.origin) / self.spacing).round();
        t.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    /// Linear interpolation of `values` (sampled on this grid) at `x`.
    /// Returns `None` outside `[first, last]`.
    #[inline]
    pub fn interpolate(&self, values: &[f64], x: f64) -> Option<f64> {
        let t = (x - self.origin) / self.spacing;
        let last = (self.n_points - 1) as f64;
        if !(t >= 0.0 && t <= last) {
            return None;
        }
        let i = (t.floor() as usize).min(self.n_points - 2);
        let w = t - i as f64;
        Some(values[i] * (1.0 - w) + values[i + 1] * w)
    }
}
