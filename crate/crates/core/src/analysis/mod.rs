//! Resolution, visibility and depth-of-field analysis of standard imaging,
//! standard plenoptic imaging and CPI.

mod dof;
mod metrics;

pub use dof::{dof_interval, dof_report, geometric_bound, geometric_condition, DofInterval, DofOptions, DofReport, GeometricBound};
pub use metrics::{resolution_limit, visibility, width_metrics, WidthMetrics, FWHM_PER_SIGMA};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::engine::{coherent_image, gamma_map, incoherent_image, refocus, ImageProfile};
use crate::error::{CpiError, Result};
use crate::grid::SampledGrid;
use crate::mask::{make_slit_mask, ApertureMask};
use crate::scenario::ScenarioConfig;

/// Rayleigh-equivalent visibility threshold.
pub const DEFAULT_VISIBILITY_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Standard,
    /// Standard plenoptic imaging with `N_u` pixels per microlens, modelled
    /// as standard imaging with an `N_u` times smaller numerical aperture.
    StandardPi(u32),
    CpiRefocused,
    CpiCoherent,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modality::Standard => write!(f, "standard"),
            Modality::StandardPi(n) => write!(f, "standard-pi:{n}"),
            Modality::CpiRefocused => write!(f, "cpi"),
            Modality::CpiCoherent => write!(f, "cpi-coherent"),
        }
    }
}

impl FromStr for Modality {
    type Err = CpiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "standard" => Ok(Modality::Standard),
            "cpi" | "cpi-refocused" => Ok(Modality::CpiRefocused),
            "cpi-coherent" => Ok(Modality::CpiCoherent),
            other => {
                let n = other
                    .strip_prefix("standard-pi:")
                    .or_else(|| other.strip_prefix("pi:"))
                    .ok_or_else(|| CpiError::Parse(format!("unknown modality '{other}'")))?;
                let n: u32 = n
                    .parse()
                    .map_err(|_| CpiError::Parse(format!("bad N_u in modality '{other}'")))?;
                if n < 1 {
                    return Err(CpiError::Domain("N_u must be at least 1".into()));
                }
                Ok(Modality::StandardPi(n))
            }
        }
    }
}

/// Sensor grids for a CPI evaluation at `cfg.z_b`: S_a wide enough that the
/// sheared samples of the refocused image stay on the grid, S_b covering
/// the source image out to 3.5 sigma.
pub fn cpi_grids(cfg: &ScenarioConfig, mask: &ApertureMask) -> Result<(SampledGrid, SampledGrid)> {
    let alpha = cfg.alpha();
    let a = mask.smallest_feature();
    let d = mask.pitch().unwrap_or(a);
    let reach = 3.5 * cfg.source_sigma;
    let half_a = ((1.0 - alpha).abs() * reach + mask.support().1.abs().max(mask.support().0.abs()) + d) / alpha;
    let dx_a = (2e-6f64).min(d / 40.0) / alpha;
    let m = cfg.magnification.abs();
    let dx_b = (20e-6f64).min(cfg.wavelength * cfg.z_b / (10.0 * a)) * m;
    Ok((
        SampledGrid::covering_symmetric(half_a, dx_a)?,
        SampledGrid::covering_symmetric(reach * m, dx_b)?,
    ))
}

/// Object-plane grid for the closed-form images.
fn object_grid(mask: &ApertureMask, samples_per_pitch: f64) -> Result<SampledGrid> {
    let a = mask.smallest_feature();
    let d = mask.pitch().unwrap_or(a);
    let (lo, hi) = mask.support();
    let half = lo.abs().max(hi.abs()) + d;
    SampledGrid::covering_symmetric(half, d / samples_per_pitch)
}

/// Image of `mask` at object distance `z_b` in the given modality, on
/// object-plane coordinates.
pub fn modality_image(modality: Modality, cfg: &ScenarioConfig, mask: &ApertureMask, z_b: f64) -> Result<ImageProfile> {
    let cfg = cfg.with_z_b(z_b);
    cfg.validate()?;
    match modality {
        Modality::Standard => incoherent_image(&cfg, mask, &object_grid(mask, 200.0)?, None),
        Modality::StandardPi(n) => {
            if n < 1 {
                return Err(CpiError::Domain("N_u must be at least 1".into()));
            }
            incoherent_image(&cfg, mask, &object_grid(mask, 200.0)?, Some(cfg.source_sigma / n as f64))
        }
        Modality::CpiCoherent => coherent_image(&cfg, mask, &object_grid(mask, 100.0)?),
        Modality::CpiRefocused => {
            let (ga, gb) = cpi_grids(&cfg, mask)?;
            let gamma = gamma_map(&cfg, mask, &ga, &gb)?;
            Ok(refocus(&gamma).image)
        }
    }
}

/// Double slit with `d = 2a`, the geometry of the visibility maps.
pub fn double_slit(d: f64) -> Result<ApertureMask> {
    make_slit_mask(2, 0.5 * d, d)
}

/// Visibility over a lattice of slit separations (in units of the focused
/// resolution) and defocus distances `z_b - z_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityMap {
    pub modality: Modality,
    pub d_over_dxf: Vec<f64>,
    pub defocus: Vec<f64>,
    /// Row-major, one row per separation. Cells that failed are NaN.
    pub values: Vec<f64>,
    pub failed_cells: usize,
    /// Geometric refocusing interval per separation (CPI maps only).
    pub bound: Option<Vec<GeometricBound>>,
    pub z_a: f64,
}

impl VisibilityMap {
    pub fn get(&self, i_d: usize, i_z: usize) -> f64 {
        self.values[i_d * self.defocus.len() + i_z]
    }

    /// Whether cell `(i_d, i_z)` lies inside the geometric bound.
    pub fn inside_bound(&self, i_d: usize, i_z: usize) -> Option<bool> {
        self.bound.as_ref().map(|b| b[i_d].contains(self.z_a + self.defocus[i_z]))
    }
}

pub fn visibility_map(
    modality: Modality,
    cfg: &ScenarioConfig,
    d_over_dxf: &[f64],
    defocus: &[f64],
) -> Result<VisibilityMap> {
    if d_over_dxf.is_empty() || defocus.is_empty() {
        return Err(CpiError::Domain("visibility map needs non-empty d and z ranges".into()));
    }
    cfg.validate()?;
    let dxf = cfg.focused_resolution();
    let cells: Vec<(usize, usize)> = (0..d_over_dxf.len())
        .flat_map(|i| (0..defocus.len()).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| {
            let run = || -> Result<f64> {
                let mask = double_slit(d_over_dxf[i] * dxf)?;
                let img = modality_image(modality, cfg, &mask, cfg.z_a + defocus[j])?;
                visibility(&img, &mask)
            };
            run().unwrap_or(f64::NAN)
        })
        .collect();
    let failed_cells = values.iter().filter(|v| v.is_nan()).count();
    if failed_cells > 0 {
        log::warn!("visibility map: {failed_cells} cells failed and are NaN");
    }
    let bound = match modality {
        Modality::CpiRefocused => Some(
            d_over_dxf
                .iter()
                .map(|&r| geometric_bound(cfg, &double_slit(r * dxf)?, &DofOptions::default()))
                .collect::<Result<Vec<_>>>()?,
        ),
        _ => None,
    };
    Ok(VisibilityMap {
        modality,
        d_over_dxf: d_over_dxf.to_vec(),
        defocus: defocus.to_vec(),
        values,
        failed_cells,
        bound,
        z_a: cfg.z_a,
    })
}
