use std::fmt::Write as _;

use crate::error::{CpiError, Result};
use crate::mask::ApertureMask;
use crate::scenario::ScenarioConfig;

use super::{double_slit, modality_image, visibility, Modality, DEFAULT_VISIBILITY_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DofOptions {
    /// Visibility at or above which the image counts as resolved.
    pub threshold: f64,
    /// Bisection tolerance on z_b (m).
    pub tolerance: f64,
    /// Scan floor as a fraction of z_a.
    pub floor_fraction: f64,
    /// Scan ceiling as a multiple of z_a.
    pub ceiling_factor: f64,
    /// Pixels per microlens of the plenoptic comparison.
    pub n_u: u32,
    /// Largest outward scan step (m).
    pub max_step: f64,
}

impl Default for DofOptions {
    fn default() -> Self {
        DofOptions {
            threshold: DEFAULT_VISIBILITY_THRESHOLD,
            tolerance: 1e-4,
            floor_fraction: 0.125,
            ceiling_factor: 4.0,
            n_u: 3,
            max_step: 2e-3,
        }
    }
}

impl DofOptions {
    fn validate(&self) -> Result<()> {
        let ok = self.threshold > 0.0
            && self.threshold < 1.0
            && self.tolerance > 0.0
            && self.floor_fraction > 0.0
            && self.floor_fraction < 1.0
            && self.ceiling_factor > 1.0
            && self.n_u >= 1
            && self.max_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(CpiError::InvalidConfig(format!("invalid DOF options: {self:?}")))
        }
    }
}

/// Range of object distances around z_a over which an image stays resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DofInterval {
    pub near: f64,
    pub far: f64,
    /// Still resolved at the scan floor; `near` is the floor.
    pub near_unbounded: bool,
    /// Still resolved at the scan ceiling; `far` is the ceiling.
    pub far_unbounded: bool,
    /// False when the focused image itself is unresolved; the interval is then empty.
    pub resolved: bool,
}

impl DofInterval {
    fn empty(z_a: f64) -> Self {
        DofInterval {
            near: z_a,
            far: z_a,
            near_unbounded: false,
            far_unbounded: false,
            resolved: false,
        }
    }

    pub fn width(&self) -> f64 {
        if self.resolved {
            self.far - self.near
        } else {
            0.0
        }
    }

    pub fn is_empty(&self) -> bool {
        !self.resolved
    }

    pub fn contains(&self, z: f64) -> bool {
        self.resolved && z >= self.near && z <= self.far
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DofReport {
    pub d: f64,
    pub z_a: f64,
    pub n_u: u32,
    pub threshold: f64,
    pub standard: DofInterval,
    pub plenoptic: DofInterval,
    pub cpi: DofInterval,
}

impl DofReport {
    pub fn cpi_over_standard(&self) -> f64 {
        self.cpi.width() / self.standard.width()
    }

    pub fn cpi_over_plenoptic(&self) -> f64 {
        self.cpi.width() / self.plenoptic.width()
    }

    /// Number of planes CPI can refocus within one standard DOF each.
    pub fn refocusable_planes(&self) -> f64 {
        self.cpi_over_standard()
    }

    pub fn intervals(&self) -> [(Modality, DofInterval); 3] {
        [
            (Modality::Standard, self.standard),
            (Modality::StandardPi(self.n_u), self.plenoptic),
            (Modality::CpiRefocused, self.cpi),
        ]
    }

    pub fn summary_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "d = {:.4} mm, z_a = {:.3} mm, V threshold = {}",
            self.d * 1e3,
            self.z_a * 1e3,
            self.threshold
        );
        let _ = writeln!(s, "{:<16} {:>12} {:>12} {:>12}", "modality", "z_b^m (mm)", "z_b^M (mm)", "DOF (mm)");
        for (m, iv) in self.intervals() {
            if iv.resolved {
                let near = format!("{}{:.3}", if iv.near_unbounded { "<=" } else { "" }, iv.near * 1e3);
                let far = format!("{}{:.3}", if iv.far_unbounded { ">=" } else { "" }, iv.far * 1e3);
                let _ = writeln!(s, "{:<16} {:>12} {:>12} {:>12.3}", m.to_string(), near, far, iv.width() * 1e3);
            } else {
                let _ = writeln!(s, "{:<16} {:>12} {:>12} {:>12}", m.to_string(), "-", "-", "unresolved");
            }
        }
        let _ = writeln!(s, "DOF_CPI / DOF_standard = {:.3}", self.cpi_over_standard());
        let _ = writeln!(s, "DOF_CPI / DOF_PI({}) = {:.3}", self.n_u, self.cpi_over_plenoptic());
        s
    }
}

/// Finds where `ok` first fails moving from `z0` towards `limit`, assuming it
/// holds at `z0`. Returns the last passing distance and whether the limit was
/// reached without a failure.
fn contiguous_edge(
    mut ok: impl FnMut(f64) -> Result<bool>,
    z0: f64,
    limit: f64,
    min_step: f64,
    max_step: f64,
    tolerance: f64,
) -> Result<(f64, bool)> {
    let dir = (limit - z0).signum();
    let mut good = z0;
    loop {
        let step = (0.05 * (good - z0).abs()).clamp(min_step, max_step.max(min_step));
        let z = good + dir * step;
        let z = if (z - limit) * dir >= 0.0 { limit } else { z };
        if ok(z)? {
            if z == limit {
                return Ok((limit, true));
            }
            good = z;
        } else {
            let mut bad = z;
            while (bad - good).abs() > tolerance {
                let mid = 0.5 * (good + bad);
                if ok(mid)? {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
            return Ok((good, false));
        }
    }
}

fn scan_interval(
    mut ok: impl FnMut(f64) -> Result<bool>,
    z_a: f64,
    min_step: f64,
    opts: &DofOptions,
) -> Result<DofInterval> {
    if !ok(z_a)? {
        return Ok(DofInterval::empty(z_a));
    }
    let floor = opts.floor_fraction * z_a;
    let ceiling = opts.ceiling_factor * z_a;
    let (near, near_unbounded) = contiguous_edge(&mut ok, z_a, floor, min_step, opts.max_step, opts.tolerance)?;
    let (far, far_unbounded) = contiguous_edge(&mut ok, z_a, ceiling, min_step, opts.max_step, opts.tolerance)?;
    Ok(DofInterval {
        near,
        far,
        near_unbounded,
        far_unbounded,
        resolved: true,
    })
}

/// DOF interval of one modality for `mask`, following the resolved region
/// outward from z_a until the visibility first drops below threshold.
pub fn dof_interval(modality: Modality, cfg: &ScenarioConfig, mask: &ApertureMask, opts: &DofOptions) -> Result<DofInterval> {
    opts.validate()?;
    cfg.validate()?;
    let ok = |z: f64| -> Result<bool> {
        let img = modality_image(modality, cfg, mask, z)?;
        Ok(visibility(&img, mask)? >= opts.threshold)
    };
    let min_step = (0.25 * cfg.dof_standard()).max(opts.tolerance);
    scan_interval(ok, cfg.z_a, min_step, opts)
}

/// Standard, plenoptic and CPI depth of field for a double slit of
/// centre-to-centre distance `d` and slit width `d/2`.
pub fn dof_report(cfg: &ScenarioConfig, d: f64, opts: &DofOptions) -> Result<DofReport> {
    let mask = double_slit(d)?;
    Ok(DofReport {
        d,
        z_a: cfg.z_a,
        n_u: opts.n_u,
        threshold: opts.threshold,
        standard: dof_interval(Modality::Standard, cfg, &mask, opts)?,
        plenoptic: dof_interval(Modality::StandardPi(opts.n_u), cfg, &mask, opts)?,
        cpi: dof_interval(Modality::CpiRefocused, cfg, &mask, opts)?,
    })
}

/// Range of object distances over which geometric refocusing is expected to
/// resolve details of size `d`.
pub type GeometricBound = DofInterval;

/// Whether refocusing at `z_b` satisfies the geometric condition
/// `|1 - z_a/z_b| < (d z_a / z_b) / max(lambda z_b / a, 2 lambda / (M NA_b), 2 du / M)`.
pub fn geometric_condition(cfg: &ScenarioConfig, mask: &ApertureMask, z_b: f64) -> bool {
    let d = cfg.with_z_b(z_b).derived_quantities(mask);
    (1.0 - cfg.z_a / z_b).abs() < d.projected_resolution / d.angular_resolution
}

/// Contiguous interval around z_a satisfying [`geometric_condition`].
pub fn geometric_bound(cfg: &ScenarioConfig, mask: &ApertureMask, opts: &DofOptions) -> Result<GeometricBound> {
    opts.validate()?;
    cfg.validate()?;
    let ok = |z: f64| Ok(geometric_condition(cfg, mask, z));
    let min_step = (0.25 * cfg.dof_standard()).max(opts.tolerance);
    scan_interval(ok, cfg.z_a, min_step, opts)
}
