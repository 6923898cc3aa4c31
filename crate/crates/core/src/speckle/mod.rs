//! Monte-Carlo simulation of chaotic light.
//!
//! Each frame is one instantaneous realisation of a delta-correlated
//! Gaussian source field, split into both arms and propagated to the two
//! sensors. Frame `i` draws from ChaCha stream `i` of the run seed, so any
//! subset of frames can be regenerated independently and the stack does not
//! depend on how work is scheduled.

mod estimate;
mod propagate;

pub use estimate::{
    bin_grid, bin_profile, bin_tensor, estimate_gamma, postprocess_profile, postprocess_tensor, PostprocessParams,
    ESTIMATOR_CHUNK,
};
pub use propagate::{
    fresnel_propagate, fresnel_transfer, max_fresnel_distance, PropagationPlan, SensorLayout, Step,
};

use log::warn;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{CpiError, Result};
use crate::grid::SampledGrid;
use crate::mask::ApertureMask;
use crate::scenario::ScenarioConfig;
use crate::source::SourceProfile;
use propagate::PreparedPlan;

/// Source samples beyond this many sigma are left dark.
const SOURCE_CUTOFF_SIGMAS: f64 = 8.0;

/// Intensity frames recorded on both sensors, stored as `f32`, frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    pub grid_a: SampledGrid,
    pub grid_b: SampledGrid,
    frames_a: Vec<f32>,
    frames_b: Vec<f32>,
    pub seed: u64,
    /// Substream id of the first frame; frame `i` used `first_frame + i`.
    pub first_frame: u64,
    pub scenario: ScenarioConfig,
    pub mask_spec: Option<String>,
}

impl FrameStack {
    pub fn new(
        grid_a: SampledGrid,
        grid_b: SampledGrid,
        frames_a: Vec<f32>,
        frames_b: Vec<f32>,
        seed: u64,
        first_frame: u64,
        scenario: ScenarioConfig,
        mask_spec: Option<String>,
    ) -> Result<Self> {
        let (na, nb) = (grid_a.len(), grid_b.len());
        if frames_a.len() % na != 0 || frames_b.len() % nb != 0 || frames_a.len() / na != frames_b.len() / nb {
            return Err(CpiError::Domain(format!(
                "frame buffers of {} and {} values do not match sensors of {na} and {nb} pixels",
                frames_a.len(),
                frames_b.len()
            )));
        }
        if let Some(v) = frames_a.iter().chain(&frames_b).find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(CpiError::Domain(format!("intensity {v} is negative or non-finite")));
        }
        Ok(FrameStack {
            grid_a,
            grid_b,
            frames_a,
            frames_b,
            seed,
            first_frame,
            scenario,
            mask_spec,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.frames_a.len() / self.grid_a.len()
    }

    pub fn frames_a(&self) -> &[f32] {
        &self.frames_a
    }

    pub fn frames_b(&self) -> &[f32] {
        &self.frames_b
    }

    pub fn frame_a(&self, i: usize) -> &[f32] {
        let n = self.grid_a.len();
        &self.frames_a[i * n..(i + 1) * n]
    }

    pub fn frame_b(&self, i: usize) -> &[f32] {
        let n = self.grid_b.len();
        &self.frames_b[i * n..(i + 1) * n]
    }

    /// The first `n` frames.
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.n_frames());
        FrameStack {
            frames_a: self.frames_a[..n * self.grid_a.len()].to_vec(),
            frames_b: self.frames_b[..n * self.grid_b.len()].to_vec(),
            ..self.clone()
        }
    }

    /// Appends frames that continue this run.
    pub fn extend(&mut self, more: &FrameStack) -> Result<()> {
        if more.grid_a != self.grid_a || more.grid_b != self.grid_b || more.seed != self.seed {
            return Err(CpiError::Domain("frame stacks come from different runs".into()));
        }
        if more.first_frame != self.first_frame + self.n_frames() as u64 {
            return Err(CpiError::Domain(format!(
                "frames starting at {} do not continue a stack ending at {}",
                more.first_frame,
                self.first_frame + self.n_frames() as u64
            )));
        }
        self.frames_a.extend_from_slice(&more.frames_a);
        self.frames_b.extend_from_slice(&more.frames_b);
        Ok(())
    }

    /// Exchanges the roles of the two sensors.
    pub fn swapped(&self) -> Self {
        FrameStack {
            grid_a: self.grid_b,
            grid_b: self.grid_a,
            frames_a: self.frames_b.clone(),
            frames_b: self.frames_a.clone(),
            ..self.clone()
        }
    }

    /// Block-sums sensor pixels by `factor_a` on S_a and `factor_b` on S_b.
    pub fn binned(&self, factor_a: usize, factor_b: usize) -> Result<Self> {
        let (grid_a, used_a) = bin_grid(&self.grid_a, factor_a)?;
        let (grid_b, used_b) = bin_grid(&self.grid_b, factor_b)?;
        let bin = |frames: &[f32], n: usize, used: usize, f: usize| -> Vec<f32> {
            frames
                .chunks_exact(n)
                .flat_map(|fr| fr[..used].chunks_exact(f).map(|b| b.iter().map(|&v| v as f64).sum::<f64>() as f32))
                .collect()
        };
        Ok(FrameStack {
            frames_a: bin(&self.frames_a, self.grid_a.len(), used_a, factor_a),
            frames_b: bin(&self.frames_b, self.grid_b.len(), used_b, factor_b),
            grid_a,
            grid_b,
            ..self.clone()
        })
    }

    /// Per-pixel `<I^2> / <I>^2` on S_a.
    pub fn g2_a(&self) -> Vec<f64> {
        let n = self.grid_a.len();
        let nf = self.n_frames() as f64;
        (0..n)
            .map(|p| {
                let (mut s1, mut s2) = (0.0, 0.0);
                for f in 0..self.n_frames() {
                    let v = self.frames_a[f * n + p] as f64;
                    s1 += v;
                    s2 += v * v;
                }
                let m = s1 / nf;
                (s2 / nf) / (m * m)
            })
            .collect()
    }

    /// Mean S_b image.
    pub fn mean_b(&self) -> Vec<f64> {
        let n = self.grid_b.len();
        let mut acc = vec![0.0; n];
        for fr in self.frames_b.chunks_exact(n) {
            acc.iter_mut().zip(fr).for_each(|(a, &v)| *a += v as f64);
        }
        acc.iter().map(|a| a / self.n_frames() as f64).collect()
    }
}

/// One realisation of the source field, `f(x) g(x) / sqrt(dx)` with `g`
/// i.i.d. unit-variance circular complex Gaussian per cell. Cells beyond
/// eight source widths are left dark.
pub fn sample_source_field(profile: &SourceProfile, grid: &SampledGrid, seed: u64, substream: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(substream);
    let scale = (0.5 / grid.spacing()).sqrt();
    let reach = SOURCE_CUTOFF_SIGMAS * profile.sigma;
    grid.points()
        .map(|x| {
            if x.abs() > reach {
                return Complex64::new(0.0, 0.0);
            }
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im) * (profile.amplitude_1d(x) * scale)
        })
        .collect()
}

fn record(field: &[Complex64], native_len: usize, sensor: SensorLayout, mirrored: bool) -> Vec<f32> {
    let start = (native_len - sensor.pixels * sensor.bin) / 2;
    let window = &field[start..start + sensor.pixels * sensor.bin];
    let mut px: Vec<f32> = window
        .chunks_exact(sensor.bin)
        .map(|b| b.iter().map(|v| v.norm_sqr()).sum::<f64>() as f32)
        .collect();
    if mirrored {
        px.reverse();
    }
    px
}

/// Simulates frames `start .. start + count` of the run with this `seed`.
pub fn generate_frame_range(
    cfg: &ScenarioConfig,
    mask: &ApertureMask,
    plan: &PropagationPlan,
    seed: u64,
    start: u64,
    count: usize,
) -> Result<FrameStack> {
    let profile = SourceProfile::gaussian(cfg.source_sigma)?;
    let native = plan.native;
    let (lo, hi) = mask.support();
    native.check_covers(lo, hi)?;
    let prepared = PreparedPlan::new(plan, &mask.sample(&native));
    let split = std::f64::consts::FRAC_1_SQRT_2;

    let frames: Vec<(Vec<f32>, Vec<f32>)> = (0..count as u64)
        .into_par_iter()
        .map_init(
            || prepared.workspace(),
            |ws, i| {
                let mut ea = sample_source_field(&profile, &native, seed, start + i);
                ea.iter_mut().for_each(|v| *v *= split);
                let mut eb = ea.clone();
                ws.arm_a(&mut ea);
                ws.arm_b(&mut eb);
                (
                    record(&ea, native.len(), plan.sensor_a, false),
                    record(&eb, native.len(), plan.sensor_b, true),
                )
            },
        )
        .collect();

    let mut fa = Vec::with_capacity(count * plan.sensor_a.pixels);
    let mut fb = Vec::with_capacity(count * plan.sensor_b.pixels);
    for (a, b) in frames {
        fa.extend(a);
        fb.extend(b);
    }
    FrameStack::new(plan.grid_a(), plan.grid_b(), fa, fb, seed, start, *cfg, mask.spec_string())
}

pub fn generate_frames(
    cfg: &ScenarioConfig,
    mask: &ApertureMask,
    plan: &PropagationPlan,
    n_frames: usize,
    seed: u64,
) -> Result<FrameStack> {
    if n_frames < 2 {
        return Err(CpiError::Domain(format!("need at least 2 frames, got {n_frames}")));
    }
    if n_frames < 100 {
        warn!("{n_frames} frames: the correlation estimate will be dominated by noise");
    }
    generate_frame_range(cfg, mask, plan, seed, 0, n_frames)
}
