//! Analytic correlation of intensity fluctuations for a Gaussian source:
//!
//! ```text
//! Gamma(x_a, x_b) = | int dx_o A(x_o) exp(-i k x_o x_b / (z_b M)) C(x_o - (z_b/z_a) x_a) |^2
//! ```
//!
//! For each S_a row the object integral is a Fourier transform in x_b. The
//! object grid is chosen so that `k dx_o dx_b / (z_b M) = 2 pi q / N`, which
//! makes the Riemann sum over object samples an exact length-N DFT whose
//! every q-th bin lands on an S_b sample.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::engine::psf::PsfParams;
use crate::engine::tensor::{CorrelationTensor, Provenance};
use crate::error::{CpiError, Result};
use crate::grid::SampledGrid;
use crate::mask::ApertureMask;
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaOptions {
    /// Minimum object samples across the smallest slit.
    pub samples_per_feature: f64,
    /// Upper bound on the phase advance (rad) of any integrand factor
    /// between neighbouring object samples.
    pub max_phase_step: f64,
    pub max_fft_len: usize,
}

impl Default for GammaOptions {
    fn default() -> Self {
        GammaOptions {
            samples_per_feature: 16.0,
            max_phase_step: PI / 4.0,
            max_fft_len: 1 << 22,
        }
    }
}

/// Object-plane quadrature nodes used by [`gamma_map`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectSampling {
    pub origin: f64,
    pub spacing: f64,
    pub n_fft: usize,
    /// S_b samples are every `decimation`-th DFT bin.
    pub decimation: usize,
}

impl ObjectSampling {
    pub fn at(&self, j: usize) -> f64 {
        self.origin + j as f64 * self.spacing
    }
}

/// Phase per unit `x_o * x_b`.
pub(crate) fn fourier_scale(cfg: &ScenarioConfig) -> f64 {
    cfg.wavenumber() / (cfg.z_b * cfg.magnification)
}

/// Smallest 2^a 3^b 5^c not below `n`.
pub(crate) fn fast_len(n: usize) -> usize {
    let mut best = n.next_power_of_two();
    let mut p5 = 1usize;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut m = p35;
            while m < n {
                m *= 2;
            }
            best = best.min(m);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}

/// Largest object spacing compatible with the mask features, the PSF
/// envelope and chirp, and the Fourier kernel over `grid_b`.
pub(crate) fn max_object_spacing(
    cfg: &ScenarioConfig,
    mask: &ApertureMask,
    psf: &PsfParams,
    reach: f64,
    grid_b: &SampledGrid,
    opts: &GammaOptions,
) -> f64 {
    let mut h = mask.smallest_feature() / opts.samples_per_feature;
    let c = psf.coherent_exponent();
    let env = psf.coherent_envelope_sigma();
    h = h.min(env / (opts.samples_per_feature / 4.0));
    // |C| < e^-20 beyond this radius, so the chirp only matters inside it
    let rho_max = (20.0 / -c.re).sqrt().min(reach);
    if c.im != 0.0 {
        h = h.min(opts.max_phase_step / (2.0 * c.im.abs() * rho_max));
    }
    let b_max = grid_b.first().abs().max(grid_b.last().abs());
    let s = fourier_scale(cfg).abs();
    if b_max > 0.0 {
        h = h.min(opts.max_phase_step / (s * b_max));
    }
    h
}

pub fn plan_object_sampling(
    cfg: &ScenarioConfig,
    mask: &ApertureMask,
    grid_a: &SampledGrid,
    grid_b: &SampledGrid,
    opts: &GammaOptions,
) -> Result<ObjectSampling> {
    let psf = PsfParams::new(cfg);
    let (lo, hi) = mask.support();
    let alpha = cfg.alpha();
    let a_lo = alpha * grid_a.first().min(grid_a.last());
    let a_hi = alpha * grid_a.first().max(grid_a.last());
    let reach = (hi - a_lo).abs().max((a_hi - lo).abs());
    let h_max = max_object_spacing(cfg, mask, &psf, reach, grid_b, opts);
    if !(h_max.is_finite() && h_max > 0.0) {
        return Err(CpiError::Aliasing(format!("no valid object spacing (got {h_max})")));
    }

    let s = fourier_scale(cfg).abs();
    let db = grid_b.spacing();
    let window = (hi - lo) + 8.0 * h_max;
    let decimation = ((window * s * db / (2.0 * PI)).ceil() as usize).max(1);
    let n_min = (2.0 * PI * decimation as f64 / (s * h_max * db)).ceil();
    if !n_min.is_finite() || n_min > opts.max_fft_len as f64 {
        return Err(CpiError::Aliasing(format!(
            "object sampling needs a {n_min:e}-point transform (limit {}); the phase k dx_o x_b/(z_b M) per object sample cannot be kept below {:.3} rad over this S_b grid",
            opts.max_fft_len, opts.max_phase_step
        )));
    }
    let n_fft = fast_len((n_min as usize).max(grid_b.len() * decimation).max(16));
    if n_fft > opts.max_fft_len {
        return Err(CpiError::Aliasing(format!(
            "object sampling needs a {n_fft}-point transform (limit {})",
            opts.max_fft_len
        )));
    }
    let spacing = 2.0 * PI * decimation as f64 / (s * n_fft as f64 * db);
    let origin = mask.center() - (n_fft / 2) as f64 * spacing;
    Ok(ObjectSampling {
        origin,
        spacing,
        n_fft,
        decimation,
    })
}

pub fn gamma_map(
    cfg: &ScenarioConfig,
    mask: &ApertureMask,
    grid_a: &SampledGrid,
    grid_b: &SampledGrid,
) -> Result<CorrelationTensor> {
    gamma_map_with(cfg, mask, grid_a, grid_b, &GammaOptions::default())
}

pub fn gamma_map_with(
    cfg: &ScenarioConfig,
    mask: &ApertureMask,
    grid_a: &SampledGrid,
    grid_b: &SampledGrid,
    opts: &GammaOptions,
) -> Result<CorrelationTensor> {
    cfg.validate()?;
    let plan = plan_object_sampling(cfg, mask, grid_a, grid_b, opts)?;
    let values = gamma_rows(cfg, mask, grid_a, grid_b, &plan);
    CorrelationTensor::new(values, *grid_a, *grid_b, *cfg, Provenance::Analytic)
}

fn gamma_rows(
    cfg: &ScenarioConfig,
    mask: &ApertureMask,
    grid_a: &SampledGrid,
    grid_b: &SampledGrid,
    plan: &ObjectSampling,
) -> Vec<f64> {
    let n = plan.n_fft;
    let h = plan.spacing;
    let psf = PsfParams::new(cfg);
    let c = psf.coherent_exponent();
    let alpha = cfg.alpha();
    let s = fourier_scale(cfg);

    // non-zero stretch of the sampled mask
    let (lo, hi) = mask.support();
    let j_lo = (((lo - plan.origin) / h).floor() as isize - 1).max(0) as usize;
    let j_hi = ((((hi - plan.origin) / h).ceil() as isize + 1) as usize).min(n - 1);
    let xo: Vec<f64> = (j_lo..=j_hi).map(|j| plan.at(j)).collect();
    let amp = mask.sample_points(xo.iter().copied(), h);
    // exp(-i s h b0 j) shifts the DFT so bin 0 lands on grid_b.first()
    let b0 = grid_b.first();
    let weighted: Vec<Complex64> = (j_lo..=j_hi)
        .zip(&amp)
        .map(|(j, a)| a * Complex64::from_polar(h, -s * h * b0 * j as f64))
        .collect();

    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(n);
    let nb = grid_b.len();
    let q = plan.decimation;
    let mut out = vec![0.0; grid_a.len() * nb];
    out.par_chunks_mut(nb).enumerate().for_each_init(
        || {
            (
                vec![Complex64::new(0.0, 0.0); n],
                vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()],
            )
        },
        |(buf, scratch), (ia, row)| {
            let shift = alpha * grid_a.at(ia);
            buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for (k, (&x, &w)) in xo.iter().zip(&weighted).enumerate() {
                let rho = x - shift;
                buf[j_lo + k] = w * (c * (rho * rho)).exp();
            }
            fft.process_with_scratch(buf, scratch);
            for (m, v) in row.iter_mut().enumerate() {
                // a negative magnification flips the kernel sign
                let bin = if s > 0.0 { m * q } else { (n - m * q) % n };
                *v = buf[bin].norm_sqr();
            }
        },
    );
    out
}

/// Geometric-optics displacement of the object point seen at `(x_a, x_b)`.
pub fn geometric_object_point(cfg: &ScenarioConfig, x_a: f64, x_b: f64) -> f64 {
    let alpha = cfg.alpha();
    alpha * x_a - (x_b / cfg.magnification) * (1.0 - alpha)
}
