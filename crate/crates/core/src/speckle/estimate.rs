use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::engine::{CorrelationTensor, ImageProfile, Provenance};
use crate::error::{CpiError, Result};
use crate::grid::SampledGrid;
use crate::speckle::FrameStack;

/// Frames summed naively before a compensated merge into the running total.
pub const ESTIMATOR_CHUNK: usize = 256;

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

fn pixel_means(frames: &[f32], n: usize, n_frames: usize) -> Vec<f64> {
    let mut acc = vec![Compensated::default(); n];
    for chunk in frames.chunks(ESTIMATOR_CHUNK * n) {
        let mut partial = vec![0.0; n];
        for fr in chunk.chunks_exact(n) {
            partial.iter_mut().zip(fr).for_each(|(p, &v)| *p += v as f64);
        }
        acc.iter_mut().zip(&partial).for_each(|(a, &p)| a.add(p));
    }
    acc.iter().map(|a| a.value() / n_frames as f64).collect()
}

/// Unbiased covariance of intensity fluctuations between every S_a and S_b
/// pixel, computed in two passes.
///
/// Frames are summed in fixed chunks of [`ESTIMATOR_CHUNK`] and the chunk
/// partials merged in order with compensated summation. Work is split by S_a
/// row only, so the result is bit-identical for any thread count.
pub fn estimate_gamma(stack: &FrameStack) -> Result<CorrelationTensor> {
    let nf = stack.n_frames();
    if nf < 2 {
        return Err(CpiError::Domain(format!("need at least 2 frames, got {nf}")));
    }
    let (na, nb) = (stack.grid_a.len(), stack.grid_b.len());
    let mean_a = pixel_means(stack.frames_a(), na, nf);
    let mean_b = pixel_means(stack.frames_b(), nb, nf);
    let db: Vec<f64> = stack
        .frames_b()
        .chunks_exact(nb)
        .flat_map(|fr| fr.iter().zip(&mean_b).map(|(&v, m)| v as f64 - m))
        .collect();
    let fa = stack.frames_a();

    let mut values = vec![0.0; na * nb];
    values.par_chunks_mut(nb).enumerate().for_each(|(ia, row)| {
        let mut acc = vec![Compensated::default(); nb];
        let mut partial = vec![0.0; nb];
        for c0 in (0..nf).step_by(ESTIMATOR_CHUNK) {
            partial.iter_mut().for_each(|p| *p = 0.0);
            for f in c0..(c0 + ESTIMATOR_CHUNK).min(nf) {
                let da = fa[f * na + ia] as f64 - mean_a[ia];
                let dbf = &db[f * nb..(f + 1) * nb];
                partial.iter_mut().zip(dbf).for_each(|(p, &b)| *p += da * b);
            }
            acc.iter_mut().zip(&partial).for_each(|(a, &p)| a.add(p));
        }
        let norm = 1.0 / (nf - 1) as f64;
        row.iter_mut().zip(&acc).for_each(|(r, a)| *r = a.value() * norm);
    });
    CorrelationTensor::new(values, stack.grid_a, stack.grid_b, stack.scenario, Provenance::MonteCarlo)
}

/// Grid of `grid.len() / factor` pixels, each `factor` samples wide, and the
/// number of input samples it consumes.
pub fn bin_grid(grid: &SampledGrid, factor: usize) -> Result<(SampledGrid, usize)> {
    if factor < 1 {
        return Err(CpiError::Domain("binning factor must be at least 1".into()));
    }
    let n = grid.len() / factor;
    if n < 2 {
        return Err(CpiError::Domain(format!(
            "binning {} samples by {factor} leaves fewer than 2 pixels",
            grid.len()
        )));
    }
    if grid.len() % factor != 0 {
        warn!(
            "binning {} samples by {factor}: dropping {} trailing samples",
            grid.len(),
            grid.len() % factor
        );
    }
    let origin = grid.origin() + 0.5 * (factor - 1) as f64 * grid.spacing();
    Ok((SampledGrid::new(n, grid.spacing() * factor as f64, origin)?, n * factor))
}

pub fn bin_profile(p: &ImageProfile, factor: usize) -> Result<ImageProfile> {
    let (grid, used) = bin_grid(&p.grid, factor)?;
    Ok(ImageProfile {
        values: p.values[..used].chunks_exact(factor).map(|b| b.iter().sum()).collect(),
        grid,
        ..p.clone()
    })
}

pub fn bin_tensor(t: &CorrelationTensor, factor_a: usize, factor_b: usize) -> Result<CorrelationTensor> {
    let (ga, used_a) = bin_grid(&t.grid_a, factor_a)?;
    let (gb, used_b) = bin_grid(&t.grid_b, factor_b)?;
    let mut values = vec![0.0; ga.len() * gb.len()];
    for ia in 0..used_a {
        let row = t.row(ia);
        let out = &mut values[(ia / factor_a) * gb.len()..(ia / factor_a + 1) * gb.len()];
        for (ib, v) in row[..used_b].iter().enumerate() {
            out[ib / factor_b] += v;
        }
    }
    CorrelationTensor::new(values, ga, gb, t.scenario, t.provenance)
}

/// Fourier-domain clean-up: Gaussian low-pass `exp(-f^2 / 2 s^2)`, then
/// zero every coefficient below `threshold` times the largest magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostprocessParams {
    /// Low-pass width in cycles per metre on the S_a axis; infinite disables it.
    pub lowpass_a: f64,
    /// Same on the S_b axis (tensors only).
    pub lowpass_b: f64,
    pub threshold: f64,
}

impl PostprocessParams {
    pub fn identity() -> Self {
        PostprocessParams {
            lowpass_a: f64::INFINITY,
            lowpass_b: f64::INFINITY,
            threshold: 0.0,
        }
    }

    /// Toolkit defaults: low-pass at twice the highest design frequency of
    /// the mask as projected on each sensor, threshold 1%.
    pub fn defaults_for(cfg: &crate::scenario::ScenarioConfig, mask: &crate::mask::ApertureMask) -> Self {
        let a = mask.smallest_feature();
        PostprocessParams {
            lowpass_a: 2.0 * cfg.alpha() / a,
            lowpass_b: 2.0 * mask.extent() / (cfg.wavelength * cfg.z_b * cfg.magnification.abs()),
            threshold: 0.01,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.threshold) {
            return Err(CpiError::Domain(format!("threshold must lie in [0, 1), got {}", self.threshold)));
        }
        if !(self.lowpass_a > 0.0 && self.lowpass_b > 0.0) {
            return Err(CpiError::Domain("low-pass widths must be positive".into()));
        }
        Ok(())
    }
}

fn freq(m: usize, n: usize, dx: f64) -> f64 {
    let m = if m < n.div_ceil(2) { m as f64 } else { m as f64 - n as f64 };
    m / (n as f64 * dx)
}

fn gaussian_window(n: usize, dx: f64, s: f64) -> Vec<f64> {
    (0..n)
        .map(|m| {
            if s.is_infinite() {
                1.0
            } else {
                let f = freq(m, n, dx);
                (-0.5 * f * f / (s * s)).exp()
            }
        })
        .collect()
}

fn threshold_and_clamp(spec: &mut [Complex64], threshold: f64) {
    let peak = spec.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let cut = threshold * peak;
    for v in spec.iter_mut() {
        if v.norm() < cut {
            *v = Complex64::new(0.0, 0.0);
        }
    }
}

pub fn postprocess_profile(p: &ImageProfile, params: &PostprocessParams) -> Result<ImageProfile> {
    params.validate()?;
    let n = p.len();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = p.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let w = gaussian_window(n, p.grid.spacing(), params.lowpass_a);
    buf.iter_mut().zip(&w).for_each(|(v, g)| *v *= g);
    threshold_and_clamp(&mut buf, params.threshold);
    planner.plan_fft_inverse(n).process(&mut buf);
    Ok(ImageProfile {
        values: buf.iter().map(|v| (v.re / n as f64).max(0.0)).collect(),
        ..p.clone()
    })
}

/// 2D version of [`postprocess_profile`]. Values are clamped at zero.
pub fn postprocess_tensor(t: &CorrelationTensor, params: &PostprocessParams) -> Result<CorrelationTensor> {
    params.validate()?;
    let (na, nb) = t.shape();
    let mut planner = FftPlanner::new();
    let (fa, fb) = (planner.plan_fft_forward(na), planner.plan_fft_forward(nb));
    let (ia, ib) = (planner.plan_fft_inverse(na), planner.plan_fft_inverse(nb));
    let mut buf: Vec<Complex64> = t.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();

    for row in buf.chunks_exact_mut(nb) {
        fb.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); na];
    let transform_columns = |buf: &mut [Complex64], col: &mut [Complex64], fft: &dyn rustfft::Fft<f64>| {
        for j in 0..nb {
            for i in 0..na {
                col[i] = buf[i * nb + j];
            }
            fft.process(col);
            for i in 0..na {
                buf[i * nb + j] = col[i];
            }
        }
    };
    transform_columns(&mut buf, &mut col, fa.as_ref());

    let wa = gaussian_window(na, t.grid_a.spacing(), params.lowpass_a);
    let wb = gaussian_window(nb, t.grid_b.spacing(), params.lowpass_b);
    for i in 0..na {
        for j in 0..nb {
            buf[i * nb + j] *= wa[i] * wb[j];
        }
    }
    threshold_and_clamp(&mut buf, params.threshold);

    transform_columns(&mut buf, &mut col, ia.as_ref());
    for row in buf.chunks_exact_mut(nb) {
        ib.process(row);
    }
    let norm = 1.0 / (na * nb) as f64;
    Ok(t.with_values(buf.iter().map(|v| (v.re * norm).max(0.0)).collect()))
}
