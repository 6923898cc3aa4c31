//! Reference computations written independently of the library code paths.
#![allow(dead_code)]

use num_complex::Complex64;

use cpi_core::engine::ObjectSampling;
use cpi_core::{ApertureMask, SampledGrid, ScenarioConfig};

/// Coherent Gaussian-source PSF from its defining parameters.
pub fn coherent_psf(cfg: &ScenarioConfig, rho: f64) -> Complex64 {
    let k = 2.0 * std::f64::consts::PI / cfg.wavelength;
    let beta = k * cfg.source_sigma / cfg.z_b;
    let gamma = k * cfg.source_sigma.powi(2) / cfg.z_b * (1.0 - cfg.z_b / cfg.z_a);
    let denom = Complex64::new(1.0, -gamma);
    (Complex64::new(-0.5 * beta * beta * rho * rho, 0.0) / denom).exp()
}

/// Mask transmission averaged over the cell `[x - h/2, x + h/2]`.
pub fn cell_average(mask: &ApertureMask, x: f64, h: f64) -> Complex64 {
    let (c0, c1) = (x - 0.5 * h, x + 0.5 * h);
    mask.slits()
        .iter()
        .map(|s| {
            let (s0, s1) = (s.center - 0.5 * s.width, s.center + 0.5 * s.width);
            let overlap = (c1.min(s1) - c0.max(s0)).max(0.0);
            s.amplitude * (overlap / h)
        })
        .sum()
}

/// Correlation function by trapezoidal quadrature over the object nodes
/// `nodes.origin + j * nodes.spacing`, restricted to the mask support plus
/// one empty node on each side.
pub fn gamma_trapezoid(
    cfg: &ScenarioConfig,
    mask: &ApertureMask,
    grid_a: &SampledGrid,
    grid_b: &SampledGrid,
    nodes: &ObjectSampling,
) -> Vec<f64> {
    let h = nodes.spacing;
    let (lo, hi) = mask.support();
    let j0 = ((lo - nodes.origin) / h).floor() as i64 - 1;
    let j1 = ((hi - nodes.origin) / h).ceil() as i64 + 1;
    let xs: Vec<f64> = (j0..=j1).map(|j| nodes.origin + j as f64 * h).collect();
    let amp: Vec<Complex64> = xs.iter().map(|&x| cell_average(mask, x, h)).collect();
    let last = xs.len() - 1;
    let k = 2.0 * std::f64::consts::PI / cfg.wavelength;
    let s = k / (cfg.z_b * cfg.magnification);
    let alpha = cfg.z_b / cfg.z_a;
    let mut out = Vec::with_capacity(grid_a.len() * grid_b.len());
    for xa in grid_a.points() {
        for xb in grid_b.points() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, (&x, &a)) in xs.iter().zip(&amp).enumerate() {
                let w = if j == 0 || j == last { 0.5 * h } else { h };
                acc += a * Complex64::from_polar(w, -s * x * xb) * coherent_psf(cfg, x - alpha * xa);
            }
            out.push(acc.norm_sqr());
        }
    }
    out
}

/// Relative RMS difference `||f - g|| / ||g||`.
pub fn relative_rmse(f: &[f64], g: &[f64]) -> f64 {
    let num: f64 = f.iter().zip(g).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = g.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Half-maximum width of a sampled profile by linear interpolation.
pub fn fwhm(xs: &[f64], v: &[f64]) -> f64 {
    let peak = v.iter().copied().fold(f64::MIN, f64::max);
    let half = 0.5 * peak;
    let i0 = v.iter().position(|&y| y >= half).unwrap();
    let i1 = v.iter().rposition(|&y| y >= half).unwrap();
    let cross = |a: usize, b: usize| xs[a] + (half - v[a]) / (v[b] - v[a]) * (xs[b] - xs[a]);
    cross(i1 + 1, i1) - cross(i0 - 1, i0)
}
