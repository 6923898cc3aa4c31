//! Object transmission functions built from parametric slit sets.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{CpiError, Result};
use crate::grid::SampledGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slit {
    pub center: f64,
    pub width: f64,
    pub amplitude: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimensionality {
    OneD,
    /// Product of an x mask and a y mask.
    Separable2D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApertureMask {
    slits: Vec<Slit>,
    dimensionality: Dimensionality,
    spec: Option<MaskSpec>,
}

/// Compact description of a uniform slit array: `slits:n=3,a=99e-6,d=198e-6`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSpec {
    pub n_slits: usize,
    pub width: f64,
    pub pitch: f64,
}

/// `n_slits` identical slits of width `width`, centre-to-centre `pitch`,
/// centred on the origin.
pub fn make_slit_mask(n_slits: usize, width: f64, pitch: f64) -> Result<ApertureMask> {
    if n_slits < 1 {
        return Err(CpiError::Domain("mask needs at least one slit".into()));
    }
    if !(width.is_finite() && width > 0.0) || !(pitch.is_finite() && pitch > 0.0) {
        return Err(CpiError::Domain(format!(
            "slit width and pitch must be positive, got a = {width}, d = {pitch}"
        )));
    }
    if pitch < width {
        return Err(CpiError::Overlap { width, pitch });
    }
    let mid = (n_slits - 1) as f64 * 0.5;
    let slits = (0..n_slits)
        .map(|i| Slit {
            center: (i as f64 - mid) * pitch,
            width,
            amplitude: Complex64::new(1.0, 0.0),
        })
        .collect();
    let mut mask = ApertureMask::new(slits)?;
    mask.spec = Some(MaskSpec {
        n_slits,
        width,
        pitch,
    });
    Ok(mask)
}

impl ApertureMask {
    pub fn new(mut slits: Vec<Slit>) -> Result<Self> {
        if slits.is_empty() {
            return Err(CpiError::Domain("mask needs at least one slit".into()));
        }
        for s in &slits {
            if !(s.width.is_finite() && s.width > 0.0) || !s.center.is_finite() {
                return Err(CpiError::Domain(format!("degenerate slit {s:?}")));
            }
            if s.amplitude.norm() > 1.0 + 1e-12 {
                return Err(CpiError::Domain(format!(
                    "transmission amplitude {} exceeds 1",
                    s.amplitude.norm()
                )));
            }
        }
        slits.sort_by(|a, b| a.center.total_cmp(&b.center));
        if slits.iter().all(|s| s.amplitude.norm() == 0.0) {
            return Err(CpiError::Domain("mask is fully opaque".into()));
        }
        Ok(ApertureMask {
            slits,
            dimensionality: Dimensionality::OneD,
            spec: None,
        })
    }

    pub fn slits(&self) -> &[Slit] {
        &self.slits
    }

    pub fn dimensionality(&self) -> Dimensionality {
        self.dimensionality
    }

    pub fn spec(&self) -> Option<MaskSpec> {
        self.spec
    }

    pub fn n_slits(&self) -> usize {
        self.slits.len()
    }

    pub fn slit_centers(&self) -> Vec<f64> {
        self.slits.iter().map(|s| s.center).collect()
    }

    /// `[lo, hi]` outside which the transmission vanishes.
    pub fn support(&self) -> (f64, f64) {
        let lo = self
            .slits
            .iter()
            .map(|s| s.center - 0.5 * s.width)
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .slits
            .iter()
            .map(|s| s.center + 0.5 * s.width)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    pub fn extent(&self) -> f64 {
        let (lo, hi) = self.support();
        hi - lo
    }

    pub fn center(&self) -> f64 {
        let (lo, hi) = self.support();
        0.5 * (lo + hi)
    }

    pub fn smallest_feature(&self) -> f64 {
        self.slits.iter().map(|s| s.width).fold(f64::INFINITY, f64::min)
    }

    /// Smallest centre-to-centre distance; `None` for a single slit.
    pub fn pitch(&self) -> Option<f64> {
        self.slits
            .windows(2)
            .map(|w| w[1].center - w[0].center)
            .min_by(f64::total_cmp)
    }

    pub fn transmission_at(&self, x: f64) -> Complex64 {
        self.slits
            .iter()
            .filter(|s| (x - s.center).abs() <= 0.5 * s.width)
            .map(|s| s.amplitude)
            .sum()
    }

    /// Cell-averaged transmission: each sample holds the mean of A over
    /// `[x - h/2, x + h/2]`, so slit edges between samples are weighted by
    /// their covered fraction.
    pub fn sample(&self, grid: &SampledGrid) -> Vec<Complex64> {
        self.sample_points(grid.points(), grid.spacing())
    }

    pub fn sample_points(&self, xs: impl Iterator<Item = f64>, spacing: f64) -> Vec<Complex64> {
        xs.map(|x| {
            let (c0, c1) = (x - 0.5 * spacing, x + 0.5 * spacing);
            self.slits
                .iter()
                .map(|s| {
                    let lo = c0.max(s.center - 0.5 * s.width);
                    let hi = c1.min(s.center + 0.5 * s.width);
                    if hi > lo {
                        s.amplitude * ((hi - lo) / spacing)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .sum()
        })
        .collect()
    }

    /// Integral of |A|^2 over the object plane.
    pub fn total_transmission(&self) -> f64 {
        self.slits.iter().map(|s| s.amplitude.norm_sqr() * s.width).sum()
    }

    /// Inline spec string, when the mask is a uniform slit array.
    pub fn spec_string(&self) -> Option<String> {
        self.spec.map(|s| s.to_string())
    }
}

impl fmt::Display for MaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "slits:n={},a={:e},d={:e}", self.n_slits, self.width, self.pitch)
    }
}

impl FromStr for MaskSpec {
    type Err = CpiError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let body = s
            .strip_prefix("slits:")
            .or_else(|| s.strip_prefix("slit:"))
            .ok_or_else(|| CpiError::Parse(format!("mask spec must start with `slits:`, got `{s}`")))?;
        let (mut n, mut a, mut d) = (None, None, None);
        for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| CpiError::Parse(format!("mask spec entry `{part}` is not key=value")))?;
            let num = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| CpiError::Parse(format!("mask spec key `{k}`: bad number `{v}`")))
            };
            match k.trim() {
                "n" => {
                    n = Some(v.trim().parse::<usize>().map_err(|_| {
                        CpiError::Parse(format!("mask spec key `n`: bad count `{v}`"))
                    })?)
                }
                "a" => a = Some(num(v)?),
                "d" => d = Some(num(v)?),
                other => return Err(CpiError::Parse(format!("unknown mask spec key `{other}`"))),
            }
        }
        let n_slits = n.unwrap_or(1);
        let width = a.ok_or_else(|| CpiError::Parse("mask spec is missing key `a`".into()))?;
        let pitch = match d {
            Some(d) => d,
            None if n_slits == 1 => width,
            None => return Err(CpiError::Parse("mask spec is missing key `d`".into())),
        };
        Ok(MaskSpec {
            n_slits,
            width,
            pitch,
        })
    }
}

impl MaskSpec {
    pub fn build(&self) -> Result<ApertureMask> {
        make_slit_mask(self.n_slits, self.width, self.pitch)
    }
}

impl FromStr for ApertureMask {
    type Err = CpiError;

    fn from_str(s: &str) -> Result<Self> {
        s.parse::<MaskSpec>()?.build()
    }
}

/// Separable 2D transmission `A(x, y) = A_x(x) A_y(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableMask {
    pub x: ApertureMask,
    pub y: ApertureMask,
}

impl SeparableMask {
    pub fn new(mut x: ApertureMask, mut y: ApertureMask) -> Self {
        x.dimensionality = Dimensionality::Separable2D;
        y.dimensionality = Dimensionality::Separable2D;
        SeparableMask { x, y }
    }

    /// Row-major `[ny][nx]` samples.
    pub fn sample(&self, gx: &SampledGrid, gy: &SampledGrid) -> Vec<Complex64> {
        let ax = self.x.sample(gx);
        let ay = self.y.sample(gy);
        ay.iter().flat_map(|&y| ax.iter().map(move |&x| x * y)).collect()
    }

    /// Integrating over y leaves the x profile weighted by the y transmission.
    pub fn integrate_y(&self) -> (ApertureMask, f64) {
        (self.x.clone(), self.y.total_transmission())
    }
}
