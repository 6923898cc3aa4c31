//! Paraxial propagation by the transfer-function method and the two-arm
//! optical layout used by the Monte-Carlo simulation.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{CpiError, Result};
use crate::grid::SampledGrid;
use crate::scenario::ScenarioConfig;

/// Largest distance for which the transfer function `exp(-i pi lambda z f^2)`
/// is adequately sampled on `grid`: `z <= N dx^2 / lambda`.
pub fn max_fresnel_distance(grid: &SampledGrid, wavelength: f64) -> f64 {
    grid.len() as f64 * grid.spacing() * grid.spacing() / wavelength
}

fn check_fresnel(grid: &SampledGrid, z: f64, wavelength: f64) -> Result<()> {
    let max_z = max_fresnel_distance(grid, wavelength);
    if !(z.is_finite() && z >= 0.0) {
        return Err(CpiError::Domain(format!("propagation distance must be non-negative, got {z}")));
    }
    if z > max_z {
        return Err(CpiError::Nyquist { z, max_z });
    }
    Ok(())
}

/// Spatial frequency of DFT bin `m` on a length-`n` grid of spacing `dx`.
#[inline]
fn bin_frequency(m: usize, n: usize, dx: f64) -> f64 {
    let m = if m < n.div_ceil(2) { m as f64 } else { m as f64 - n as f64 };
    m / (n as f64 * dx)
}

/// Paraxial transfer function (the constant `exp(ikz)` is dropped).
pub fn fresnel_transfer(grid: &SampledGrid, z: f64, wavelength: f64) -> Vec<Complex64> {
    let n = grid.len();
    (0..n)
        .map(|m| {
            let f = bin_frequency(m, n, grid.spacing());
            Complex64::from_polar(1.0, -PI * wavelength * z * f * f)
        })
        .collect()
}

/// Propagates a field sampled on `grid` over distance `z`. Power is conserved.
pub fn fresnel_propagate(field: &[Complex64], grid: &SampledGrid, z: f64, wavelength: f64) -> Result<Vec<Complex64>> {
    if field.len() != grid.len() {
        return Err(CpiError::Domain(format!(
            "field has {} samples for a {}-point grid",
            field.len(),
            grid.len()
        )));
    }
    check_fresnel(grid, z, wavelength)?;
    if z == 0.0 {
        return Ok(field.to_vec());
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(grid.len());
    let inv = planner.plan_fft_inverse(grid.len());
    let h = fresnel_transfer(grid, z, wavelength);
    let mut buf = field.to_vec();
    fwd.process(&mut buf);
    let norm = 1.0 / grid.len() as f64;
    for (v, t) in buf.iter_mut().zip(&h) {
        *v *= t * norm;
    }
    inv.process(&mut buf);
    Ok(buf)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Fresnel(f64),
    /// Multiply by the object transmission.
    Mask,
    /// Thin lens `exp(-i k x^2 / 2f)` with a hard aperture `|x| <= half_aperture`.
    Lens { focal: f64, half_aperture: f64 },
}

/// Contiguous block of sensor pixels, each `bin` native samples wide,
/// centred on the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SensorLayout {
    pub pixels: usize,
    pub bin: usize,
}

/// Optical layout of both arms on a common native grid.
///
/// Arm a propagates freely to S_a. Arm b propagates to the object, through
/// it, on to the lens, and from the lens to S_b, where the source plane is
/// imaged with magnification `l2 / l1`. The image is inverted; S_b pixels
/// are labelled with the source-side orientation, `x_b = -(sensor position)`,
/// so that source point `x_s` lands on `x_b = M x_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPlan {
    pub native: SampledGrid,
    pub wavelength: f64,
    pub l1: f64,
    pub l2: f64,
    pub focal: f64,
    pub magnification: f64,
    pub arm_a: Vec<Step>,
    pub arm_b: Vec<Step>,
    pub sensor_a: SensorLayout,
    pub sensor_b: SensorLayout,
}

impl PropagationPlan {
    pub fn new(cfg: &ScenarioConfig, native: SampledGrid, sensor_a: SensorLayout, sensor_b: SensorLayout) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.magnification;
        if m <= 0.0 {
            return Err(CpiError::InvalidConfig(format!(
                "the lens layout needs a positive magnification, got {m}"
            )));
        }
        let f = cfg.focal_b;
        let l1 = f * (1.0 + m) / m;
        let l2 = f * (1.0 + m);
        if l1 <= cfg.z_b {
            return Err(CpiError::InvalidConfig(format!(
                "object at z_b = {:e} m lies beyond the lens at {l1:e} m",
                cfg.z_b
            )));
        }
        let half_aperture = cfg.na_b * l1;
        let plan = PropagationPlan {
            native,
            wavelength: cfg.wavelength,
            l1,
            l2,
            focal: f,
            magnification: l2 / l1,
            arm_a: vec![Step::Fresnel(cfg.z_a)],
            arm_b: vec![
                Step::Fresnel(cfg.z_b),
                Step::Mask,
                Step::Fresnel(l1 - cfg.z_b),
                Step::Lens {
                    focal: f,
                    half_aperture,
                },
                Step::Fresnel(l2),
            ],
            sensor_a,
            sensor_b,
        };
        plan.check(cfg)?;
        Ok(plan)
    }

    /// Default layout: native spacing of a quarter S_a pixel on a 2^17-point
    /// grid, sensors binned to `pixel_dx` and `pixel_du`.
    pub fn desk(cfg: &ScenarioConfig, pixels_a: usize, pixels_b: usize) -> Result<Self> {
        let dx = cfg.pixel_dx / 4.0;
        let bin_b = (cfg.pixel_du / dx).round() as usize;
        if bin_b == 0 || ((bin_b as f64 * dx) - cfg.pixel_du).abs() > 1e-9 * cfg.pixel_du {
            return Err(CpiError::InvalidConfig(format!(
                "pixel_du = {:e} m is not a multiple of pixel_dx / 4",
                cfg.pixel_du
            )));
        }
        let native = SampledGrid::centered(1 << 17, dx)?;
        Self::new(
            cfg,
            native,
            SensorLayout {
                pixels: pixels_a,
                bin: 4,
            },
            SensorLayout {
                pixels: pixels_b,
                bin: bin_b,
            },
        )
    }

    fn check(&self, cfg: &ScenarioConfig) -> Result<()> {
        let lens = 1.0 / self.l1 + 1.0 / self.l2 - 1.0 / self.focal;
        if lens.abs() > 1e-12 / self.focal {
            return Err(CpiError::InvalidConfig(format!("lens equation residual {lens:e}")));
        }
        if (self.magnification - cfg.magnification).abs() > 1e-12 * cfg.magnification.abs() {
            return Err(CpiError::InvalidConfig(format!(
                "lens magnification {} differs from scenario {}",
                self.magnification, cfg.magnification
            )));
        }
        for step in self.arm_a.iter().chain(&self.arm_b) {
            match *step {
                Step::Fresnel(z) => check_fresnel(&self.native, z, self.wavelength)?,
                Step::Lens { focal, half_aperture } => {
                    // phase step k x dx / f must stay below pi inside the aperture
                    let limit = self.wavelength * focal / (2.0 * self.native.spacing());
                    if half_aperture >= limit {
                        return Err(CpiError::Aliasing(format!(
                            "lens phase undersampled: aperture half-width {half_aperture:e} m exceeds {limit:e} m"
                        )));
                    }
                }
                Step::Mask => {}
            }
        }
        for (name, s) in [("S_a", self.sensor_a), ("S_b", self.sensor_b)] {
            if s.pixels == 0 || s.bin == 0 || s.pixels * s.bin > self.native.len() {
                return Err(CpiError::InvalidConfig(format!(
                    "{name} sensor ({} pixels x {}) does not fit the {}-point native grid",
                    s.pixels,
                    s.bin,
                    self.native.len()
                )));
            }
            if (self.native.len() - s.pixels * s.bin) % 2 != 0 {
                return Err(CpiError::InvalidConfig(format!(
                    "{name} sensor window cannot be centred on the native grid"
                )));
            }
        }
        Ok(())
    }

    pub fn grid_a(&self) -> SampledGrid {
        sensor_grid(&self.native, self.sensor_a)
    }

    pub fn grid_b(&self) -> SampledGrid {
        sensor_grid(&self.native, self.sensor_b)
    }
}

fn sensor_grid(native: &SampledGrid, s: SensorLayout) -> SampledGrid {
    SampledGrid::centered(s.pixels, native.spacing() * s.bin as f64).expect("validated sensor layout")
}

/// Per-thread workspace with precomputed transfer functions.
pub(crate) struct Propagator {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    ops_a: Vec<Op>,
    ops_b: Vec<Op>,
}

enum Op {
    Transfer(Arc<Vec<Complex64>>),
    Multiply(Arc<Vec<Complex64>>),
}

impl Clone for Op {
    fn clone(&self) -> Self {
        match self {
            Op::Transfer(v) => Op::Transfer(Arc::clone(v)),
            Op::Multiply(v) => Op::Multiply(Arc::clone(v)),
        }
    }
}

/// Shared, immutable part of [`Propagator`].
pub(crate) struct PreparedPlan {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    ops_a: Vec<Op>,
    ops_b: Vec<Op>,
}

impl PreparedPlan {
    pub(crate) fn new(plan: &PropagationPlan, mask_samples: &[Complex64]) -> Self {
        let n = plan.native.len();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let k = 2.0 * PI / plan.wavelength;
        let norm = 1.0 / n as f64;
        let build = |steps: &[Step]| -> Vec<Op> {
            steps
                .iter()
                .map(|s| match *s {
                    Step::Fresnel(z) => {
                        let mut h = fresnel_transfer(&plan.native, z, plan.wavelength);
                        h.iter_mut().for_each(|v| *v *= norm);
                        Op::Transfer(Arc::new(h))
                    }
                    Step::Mask => Op::Multiply(Arc::new(mask_samples.to_vec())),
                    Step::Lens { focal, half_aperture } => Op::Multiply(Arc::new(
                        plan.native
                            .points()
                            .map(|x| {
                                if x.abs() <= half_aperture {
                                    Complex64::from_polar(1.0, -k * x * x / (2.0 * focal))
                                } else {
                                    Complex64::new(0.0, 0.0)
                                }
                            })
                            .collect(),
                    )),
                })
                .collect()
        };
        PreparedPlan {
            ops_a: build(&plan.arm_a),
            ops_b: build(&plan.arm_b),
            fwd,
            inv,
        }
    }

    pub(crate) fn workspace(&self) -> Propagator {
        Propagator {
            fwd: Arc::clone(&self.fwd),
            inv: Arc::clone(&self.inv),
            scratch: vec![Complex64::new(0.0, 0.0); self.fwd.get_inplace_scratch_len().max(self.inv.get_inplace_scratch_len())],
            ops_a: self.ops_a.clone(),
            ops_b: self.ops_b.clone(),
        }
    }
}

impl Propagator {
    fn run(&mut self, field: &mut [Complex64], arm_b: bool) {
        let ops = if arm_b { &self.ops_b } else { &self.ops_a };
        for op in ops {
            match op {
                Op::Transfer(h) => {
                    self.fwd.process_with_scratch(field, &mut self.scratch);
                    field.iter_mut().zip(h.iter()).for_each(|(v, t)| *v *= t);
                    self.inv.process_with_scratch(field, &mut self.scratch);
                }
                Op::Multiply(m) => field.iter_mut().zip(m.iter()).for_each(|(v, t)| *v *= t),
            }
        }
    }

    pub(crate) fn arm_a(&mut self, field: &mut [Complex64]) {
        self.run(field, false)
    }

    pub(crate) fn arm_b(&mut self, field: &mut [Complex64]) {
        self.run(field, true)
    }
}
