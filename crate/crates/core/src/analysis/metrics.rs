use crate::engine::ImageProfile;
use crate::error::{CpiError, Result};
use crate::mask::ApertureMask;

/// `2 sqrt(2 ln 2)`: FWHM of a Gaussian in units of its standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Peak-to-dip contrast of a multi-slit image.
///
/// One maximum is located within `+-d/2` of each slit's projected centre;
/// the dip between each adjacent pair is the minimum between their maxima.
/// The result uses the mean of the maxima and the highest of the dips, and is
/// zero when any pair shows no dip below both of its maxima.
pub fn visibility(profile: &ImageProfile, mask: &ApertureMask) -> Result<f64> {
    let d = mask.pitch().ok_or_else(|| {
        CpiError::Domain("visibility needs at least two slits; use width metrics for a single slit".into())
    })?;
    let grid = profile.object_grid();
    let v = &profile.values;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CpiError::Domain("profile contains non-finite values".into()));
    }

    let mut peaks = Vec::with_capacity(mask.n_slits());
    for c in mask.slit_centers() {
        let lo = c - 0.5 * d;
        let hi = c + 0.5 * d;
        if grid.first() > lo || grid.last() < hi {
            return Err(CpiError::Coverage {
                lo,
                hi,
                grid_lo: grid.first(),
                grid_hi: grid.last(),
            });
        }
        let best = (0..v.len())
            .filter(|&i| {
                let x = grid.at(i);
                x >= lo && x <= hi
            })
            .max_by(|&i, &j| v[i].total_cmp(&v[j]).then(j.cmp(&i)))
            .ok_or_else(|| CpiError::Domain("no samples near a slit".into()))?;
        peaks.push(best);
    }
    // a profile on a mirrored grid lists the slits right to left
    peaks.sort_unstable();

    let mut worst_dip = f64::NEG_INFINITY;
    for w in peaks.windows(2) {
        let (i0, i1) = (w[0], w[1]);
        if i1 < i0 + 2 {
            return Ok(0.0);
        }
        let dip = v[i0..=i1].iter().copied().fold(f64::INFINITY, f64::min);
        if dip >= v[i0].min(v[i1]) {
            return Ok(0.0);
        }
        worst_dip = worst_dip.max(dip);
    }
    let peak = peaks.iter().map(|&i| v[i]).sum::<f64>() / peaks.len() as f64;
    if peak + worst_dip <= 0.0 {
        return Ok(0.0);
    }
    Ok(((peak - worst_dip) / (peak + worst_dip)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthMetrics {
    pub fwhm: f64,
    pub hwhm: f64,
    /// The profile crosses half maximum more than twice; the width is that
    /// of the envelope between the outermost crossings.
    pub multimodal: bool,
}

/// Full and half width at half maximum, in object-plane units, with linear
/// interpolation between the samples bracketing each crossing.
pub fn width_metrics(profile: &ImageProfile) -> Result<WidthMetrics> {
    let v = &profile.values;
    let grid = profile.object_grid();
    let peak = profile.peak();
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(CpiError::Domain("profile has no positive maximum".into()));
    }
    let half = 0.5 * peak;
    let above: Vec<bool> = v.iter().map(|&x| x >= half).collect();
    let first = above.iter().position(|&a| a).unwrap();
    let last = above.iter().rposition(|&a| a).unwrap();
    if first == 0 || last == v.len() - 1 {
        return Err(CpiError::Coverage {
            lo: grid.first(),
            hi: grid.last(),
            grid_lo: grid.first(),
            grid_hi: grid.last(),
        });
    }
    let runs = above.windows(2).filter(|w| !w[0] && w[1]).count();
    let cross = |i: usize, j: usize| {
        // half maximum lies between samples i and j
        let t = (half - v[i]) / (v[j] - v[i]);
        grid.at(i) + t * (grid.at(j) - grid.at(i))
    };
    let left = cross(first - 1, first);
    let right = cross(last + 1, last);
    let fwhm = (right - left).abs();
    Ok(WidthMetrics {
        fwhm,
        hwhm: 0.5 * fwhm,
        multimodal: runs > 1,
    })
}

/// Rayleigh-type limit for an object of half width `a/2` seen through a
/// Gaussian PSF of standard deviation `psf_sigma`.
pub fn resolution_limit(mask: &ApertureMask, psf_sigma: f64) -> f64 {
    0.5 * mask.smallest_feature() + FWHM_PER_SIGMA * psf_sigma
}
