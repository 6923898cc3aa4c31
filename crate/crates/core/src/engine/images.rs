//! Images derived from the correlation function, plus their closed-form
//! counterparts for a Gaussian source.

use std::f64::consts::{PI, SQRT_2};

use log::{debug, warn};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::engine::profile::{ImageKind, ImageProfile, Normalization};
use crate::engine::psf::PsfParams;
use crate::engine::tensor::CorrelationTensor;
use crate::error::{CpiError, Result};
use crate::grid::SampledGrid;
use crate::mask::ApertureMask;
use crate::scenario::ScenarioConfig;

/// Fraction of clipped samples above which [`refocus`] logs a warning.
pub const CLIP_WARN_FRACTION: f64 = 0.05;

/// Bucket-detector image: `Sigma(x_a) = sum_b Gamma(x_a, x_b) dx_b`.
pub fn ghost_image(gamma: &CorrelationTensor) -> ImageProfile {
    let db = gamma.grid_b.spacing();
    let values = (0..gamma.grid_a.len())
        .map(|ia| gamma.row(ia).iter().sum::<f64>() * db)
        .collect();
    let mut p = ImageProfile::new(values, gamma.grid_a, ImageKind::Ghost);
    p.object_scale = gamma.scenario.alpha();
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefocusOutput {
    pub image: ImageProfile,
    /// Share of `(pixel, x_b)` samples whose sheared S_a coordinate fell
    /// outside `grid_a` and contributed zero.
    pub clipped_fraction: f64,
}

/// Shear-and-sum refocusing onto the object plane,
///
/// ```text
/// Sigma_ref(x) = sum_b Gamma((z_a/z_b) x - (x_b/M)(1 - z_a/z_b), x_b) dx_b,
/// ```
///
/// sampled at `alpha * grid_a`, so the output pixel is the S_a pixel scaled
/// by z_b / z_a.
pub fn refocus(gamma: &CorrelationTensor) -> RefocusOutput {
    let out = gamma.grid_a.scaled(gamma.scenario.alpha());
    refocus_onto(gamma, &out)
}

pub fn refocus_onto(gamma: &CorrelationTensor, out: &SampledGrid) -> RefocusOutput {
    let cfg = &gamma.scenario;
    let inv_alpha = cfg.z_a / cfg.z_b;
    let shear = (1.0 - inv_alpha) / cfg.magnification;
    let (ga, gb) = (gamma.grid_a, gamma.grid_b);
    let db = gb.spacing();
    let columns: Vec<Vec<f64>> = (0..gb.len()).map(|ib| gamma.column(ib)).collect();

    let per_pixel: Vec<(f64, usize)> = out
        .to_vec()
        .into_par_iter()
        .map(|x| {
            let mut acc = 0.0;
            let mut clipped = 0;
            for (ib, col) in columns.iter().enumerate() {
                let xa = inv_alpha * x - gb.at(ib) * shear;
                match ga.interpolate(col, xa) {
                    Some(v) => acc += v,
                    None => clipped += 1,
                }
            }
            (acc * db, clipped)
        })
        .collect();

    let clipped: usize = per_pixel.iter().map(|p| p.1).sum();
    let clipped_fraction = clipped as f64 / (out.len() * gb.len()) as f64;
    if clipped_fraction > CLIP_WARN_FRACTION {
        debug!(
            "refocus: {:.1}% of sheared samples fall outside the S_a grid",
            100.0 * clipped_fraction
        );
    }
    let mut image = ImageProfile::new(per_pixel.into_iter().map(|p| p.0).collect(), *out, ImageKind::Refocused);
    image.pixel_rescale = cfg.alpha();
    RefocusOutput {
        image,
        clipped_fraction,
    }
}

/// Column of the tensor at the S_b sample nearest to `x_b`: the perspective
/// image formed by light from one source point.
pub fn coherent_slice(gamma: &CorrelationTensor, x_b: f64) -> ImageProfile {
    let ib = gamma.grid_b.nearest(x_b);
    let got = gamma.grid_b.at(ib);
    if (got - x_b).abs() > 1e-6 * gamma.grid_b.spacing() {
        warn!("coherent slice: x_b = {x_b:e} not on grid, using nearest sample {got:e}");
    }
    gamma.slice_b(ib)
}

/// Object-plane quadrature spacing that resolves both the mask edges and
/// the PSF envelope and chirp.
fn quadrature_spacing(mask: &ApertureMask, psf: &PsfParams, reach: f64) -> f64 {
    let c = psf.coherent_exponent();
    let mut h = (mask.smallest_feature() / 32.0).min(psf.coherent_envelope_sigma() / 8.0);
    let rho = (30.0 / -c.re).sqrt().min(reach);
    if c.im != 0.0 {
        h = h.min(PI / 8.0 / (2.0 * c.im.abs() * rho));
    }
    h
}

/// On-axis coherent image `|int A(x_o) C(x_o - x) dx_o|^2`, evaluated on an
/// object-plane grid.
pub fn coherent_image(cfg: &ScenarioConfig, mask: &ApertureMask, grid: &SampledGrid) -> Result<ImageProfile> {
    cfg.validate()?;
    let psf = PsfParams::new(cfg);
    let (lo, hi) = mask.support();
    let reach = (hi - grid.first()).abs().max((grid.last() - lo).abs());
    let h = quadrature_spacing(mask, &psf, reach);
    let n = ((hi - lo) / h).ceil() as usize + 1;
    if n > 1 << 24 {
        return Err(CpiError::Aliasing(format!(
            "coherent image needs {n} object samples at spacing {h:e} m"
        )));
    }
    let h = (hi - lo) / (n - 1) as f64;
    let xo: Vec<f64> = (0..n).map(|j| lo + j as f64 * h).collect();
    let amp = mask.sample_points(xo.iter().copied(), h);
    let c = psf.coherent_exponent();
    let values = grid
        .to_vec()
        .into_par_iter()
        .map(|x| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (&xo, a) in xo.iter().zip(&amp) {
                let rho = xo - x;
                acc += a * (c * (rho * rho)).exp();
            }
            (acc * h).norm_sqr()
        })
        .collect();
    Ok(ImageProfile::new(values, *grid, ImageKind::Coherent))
}

/// Incoherent image `|A|^2 * J` on an object-plane grid, in closed form.
/// `sigma` overrides the source width (smaller sigma = smaller NA).
pub fn incoherent_image(
    cfg: &ScenarioConfig,
    mask: &ApertureMask,
    grid: &SampledGrid,
    sigma: Option<f64>,
) -> Result<ImageProfile> {
    cfg.validate()?;
    let psf = PsfParams::with_sigma(cfg, sigma.unwrap_or(cfg.source_sigma));
    let s = psf.incoherent_sigma();
    if !(s.is_finite() && s > 0.0) {
        return Err(CpiError::DegenerateWidth(format!("incoherent PSF width {s:e} m")));
    }
    let norm = s * (PI / 2.0).sqrt();
    let values = grid
        .points()
        .map(|x| {
            mask.slits()
                .iter()
                .map(|sl| {
                    let u0 = (x - sl.center + 0.5 * sl.width) / (SQRT_2 * s);
                    let u1 = (x - sl.center - 0.5 * sl.width) / (SQRT_2 * s);
                    sl.amplitude.norm_sqr() * norm * (libm::erf(u0) - libm::erf(u1))
                })
                .sum::<f64>()
                .max(0.0)
        })
        .collect();
    Ok(ImageProfile::new(values, *grid, ImageKind::FocusedReference))
}

/// Width of the ghost image of a point, as a function of `alpha = z_b / z_a`.
pub fn image_width_alpha(cfg: &ScenarioConfig, alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(CpiError::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let w = cfg.z_a / (cfg.wavenumber() * cfg.source_sigma);
    let s2 = cfg.source_sigma * cfg.source_sigma;
    Ok((0.5 * w * w * alpha * alpha + 0.5 * s2 * (1.0 - alpha).powi(2)).sqrt())
}

/// Minimiser of [`image_width_alpha`].
pub fn optimal_alpha(cfg: &ScenarioConfig) -> f64 {
    let r = cfg.z_a / (cfg.wavenumber() * cfg.source_sigma * cfg.source_sigma);
    1.0 / (1.0 + r * r)
}

/// Peak-normalised incoherent PSF with the normalisation flag set, on an
/// object-plane grid.
pub fn psf_profile(cfg: &ScenarioConfig, grid: &SampledGrid) -> ImageProfile {
    let p = PsfParams::new(cfg);
    ImageProfile {
        values: grid.points().map(|x| p.incoherent(x)).collect(),
        grid: *grid,
        kind: ImageKind::Psf,
        object_scale: 1.0,
        pixel_rescale: 1.0,
        normalization: Normalization::Peak,
    }
}
