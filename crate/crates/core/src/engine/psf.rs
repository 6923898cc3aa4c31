//! Gaussian-source point-spread functions.
//!
//! For a source of width sigma at distance z_b from the object, with the
//! ghost plane at z_a, the coherent PSF is
//!
//! ```text
//! C(rho) = exp(-1/2 beta^2 rho^2 / (1 - i gamma)),
//! beta   = k sigma / z_b,
//! gamma  = (k sigma^2 / z_b) (1 - z_b / z_a),
//! ```
//!
//! and the incoherent PSF is `J = |C|^2 = exp(-beta^2 rho^2 / (1 + gamma^2))`.
//! Both are normalised to 1 at the origin.

use num_complex::Complex64;

use crate::engine::profile::{ImageKind, ImageProfile, Normalization};
use crate::error::{CpiError, Result};
use crate::grid::SampledGrid;
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsfParams {
    pub beta2: f64,
    pub gamma: f64,
}

impl PsfParams {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        Self::with_sigma(cfg, cfg.source_sigma)
    }

    /// Same geometry with a different source width, used to model a device
    /// whose numerical aperture is scaled by `sigma / cfg.source_sigma`.
    pub fn with_sigma(cfg: &ScenarioConfig, sigma: f64) -> Self {
        let k = cfg.wavenumber();
        let beta = k * sigma / cfg.z_b;
        PsfParams {
            beta2: beta * beta,
            gamma: (k * sigma * sigma / cfg.z_b) * (1.0 - cfg.z_b / cfg.z_a),
        }
    }

    /// `c` with `C(rho) = exp(c rho^2)`.
    pub fn coherent_exponent(&self) -> Complex64 {
        -0.5 * self.beta2 / Complex64::new(1.0, -self.gamma)
    }

    /// `-beta^2 / (1 + gamma^2)`, so that `J(rho) = exp(e rho^2)`.
    pub fn incoherent_exponent(&self) -> f64 {
        -self.beta2 / (1.0 + self.gamma * self.gamma)
    }

    /// Standard deviation of the Gaussian `J`.
    pub fn incoherent_sigma(&self) -> f64 {
        (-0.5 / self.incoherent_exponent()).sqrt()
    }

    /// Standard deviation of the envelope `|C|`.
    pub fn coherent_envelope_sigma(&self) -> f64 {
        (-0.5 / self.coherent_exponent().re).sqrt()
    }

    #[inline]
    pub fn coherent(&self, rho: f64) -> Complex64 {
        (self.coherent_exponent() * (rho * rho)).exp()
    }

    #[inline]
    pub fn incoherent(&self, rho: f64) -> f64 {
        (self.incoherent_exponent() * rho * rho).exp()
    }

    fn check_grid(&self, grid: &SampledGrid) -> Result<()> {
        let e = -self.incoherent_exponent();
        let reach = grid.first().abs().max(grid.last().abs());
        if !(e.is_finite() && e > 0.0) {
            return Err(CpiError::DegenerateWidth(format!("PSF exponent {e} is not positive")));
        }
        if e * reach * reach < f64::EPSILON {
            return Err(CpiError::DegenerateWidth(format!(
                "PSF width {:e} m is flat across the grid (reach {reach:e} m)",
                self.incoherent_sigma()
            )));
        }
        if e * grid.spacing() * grid.spacing() > 700.0 {
            return Err(CpiError::DegenerateWidth(format!(
                "PSF width {:e} m underflows at grid spacing {:e} m",
                self.incoherent_sigma(),
                grid.spacing()
            )));
        }
        Ok(())
    }
}

/// Coherent PSF sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPsf {
    pub values: Vec<Complex64>,
    pub grid: SampledGrid,
    pub params: PsfParams,
    pub z_a: f64,
    pub z_b: f64,
}

pub fn coherent_psf(cfg: &ScenarioConfig, grid: &SampledGrid) -> Result<ComplexPsf> {
    let params = PsfParams::new(cfg);
    params.check_grid(grid)?;
    Ok(ComplexPsf {
        values: grid.points().map(|x| params.coherent(x)).collect(),
        grid: *grid,
        params,
        z_a: cfg.z_a,
        z_b: cfg.z_b,
    })
}

/// Peak-normalised incoherent PSF.
pub fn incoherent_psf(cfg: &ScenarioConfig, grid: &SampledGrid) -> Result<ImageProfile> {
    let params = PsfParams::new(cfg);
    params.check_grid(grid)?;
    Ok(ImageProfile {
        values: grid.points().map(|x| params.incoherent(x)).collect(),
        grid: *grid,
        kind: ImageKind::Psf,
        object_scale: 1.0,
        pixel_rescale: 1.0,
        normalization: Normalization::Peak,
    })
}
