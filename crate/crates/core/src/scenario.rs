//! Optical scenario: geometry, wavelength and detector sampling shared by
//! every other module.
//!
//! Scenario files are flat TOML key/value documents in SI units. Keys match
//! the field names of [`ScenarioConfig`]; `source_na` and `focal_b` are
//! optional and default to the calibrated values of the reference setup.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CpiError, Result};
use crate::mask::ApertureMask;

pub const DEFAULT_SOURCE_NA: f64 = 0.038;
pub const DEFAULT_FOCAL_B: f64 = 0.3;

fn default_source_na() -> f64 {
    DEFAULT_SOURCE_NA
}

fn default_focal_b() -> f64 {
    DEFAULT_FOCAL_B
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Central wavelength (m).
    pub wavelength: f64,
    /// Width of the Gaussian source intensity profile (m).
    pub source_sigma: f64,
    /// Source to ghost-image plane (m).
    pub z_a: f64,
    /// Source to object (m).
    pub z_b: f64,
    /// Source-to-S_b imaging magnification.
    pub magnification: f64,
    /// Numerical aperture of the lens imaging the source onto S_b.
    pub na_b: f64,
    /// Effective numerical aperture of the source seen from the ghost plane.
    #[serde(default = "default_source_na")]
    pub source_na: f64,
    /// Spatial sensor pixel (m).
    pub pixel_dx: f64,
    /// Angular sensor pixel (m).
    pub pixel_du: f64,
    /// Focal length of the lens imaging the source onto S_b (m).
    #[serde(default = "default_focal_b")]
    pub focal_b: f64,
}

/// Summary resolution figures for a scenario and object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedSet {
    /// Focused (diffraction-limited) resolution, lambda / NA.
    pub focused_resolution: f64,
    /// Depth of field of a standard image at the resolution limit, lambda / NA^2.
    pub dof_standard: f64,
    /// Resolution on S_a from geometric projection of the object, d z_a / z_b.
    pub projected_resolution: f64,
    /// Resolution on the source plane, the largest of the three limiting terms.
    pub angular_resolution: f64,
    /// Diffraction at the object, lambda z_b / a.
    pub diffraction_term: f64,
    /// Lens aperture term, 2 lambda / (M NA_b).
    pub lens_term: f64,
    /// Pixel term, 2 du / M.
    pub pixel_term: f64,
}

impl ScenarioConfig {
    /// Reference tabletop setup, with the object at z_b = z_a + 21 mm.
    pub fn paper_setup() -> Self {
        let wavelength = 532e-9;
        ScenarioConfig {
            wavelength,
            source_sigma: 1.08e-3,
            z_a: 92e-3,
            z_b: 113e-3,
            magnification: 1.0,
            na_b: wavelength / 14e-6,
            source_na: DEFAULT_SOURCE_NA,
            pixel_dx: 7.2e-6,
            pixel_du: 72e-6,
            focal_b: DEFAULT_FOCAL_B,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("wavelength", self.wavelength),
            ("source_sigma", self.source_sigma),
            ("z_a", self.z_a),
            ("z_b", self.z_b),
            ("pixel_dx", self.pixel_dx),
            ("pixel_du", self.pixel_du),
            ("focal_b", self.focal_b),
        ];
        for (name, v) in lengths {
            if !(v.is_finite() && v > 0.0) {
                return Err(CpiError::InvalidConfig(format!(
                    "`{name}` must be a positive finite length, got {v}"
                )));
            }
        }
        if !self.magnification.is_finite() || self.magnification == 0.0 {
            return Err(CpiError::InvalidConfig(format!(
                "`magnification` must be finite and non-zero, got {}",
                self.magnification
            )));
        }
        if !(self.na_b.is_finite() && self.na_b > 0.0 && self.na_b <= 1.0) {
            return Err(CpiError::InvalidConfig(format!(
                "`na_b` must lie in (0, 1], got {}",
                self.na_b
            )));
        }
        if !(self.source_na > 0.0 && self.source_na < 1.0) {
            return Err(CpiError::InvalidConfig(format!(
                "`source_na` must lie in (0, 1), got {}",
                self.source_na
            )));
        }
        let dxf = self.focused_resolution();
        if !(dxf.is_finite() && dxf > 0.0) {
            return Err(CpiError::InvalidConfig(format!(
                "focused resolution lambda/NA is not finite: {dxf}"
            )));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| CpiError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CpiError::Parse(msg) => CpiError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Canonical text form. Floats are written in shortest round-trip form,
    /// so parsing the output reproduces the config bit for bit.
    pub fn to_canonical_string(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.fields() {
            let _ = writeln!(s, "{k} = {v:e}");
        }
        s
    }

    pub fn fields(&self) -> [(&'static str, f64); 10] {
        [
            ("wavelength", self.wavelength),
            ("source_sigma", self.source_sigma),
            ("z_a", self.z_a),
            ("z_b", self.z_b),
            ("magnification", self.magnification),
            ("na_b", self.na_b),
            ("source_na", self.source_na),
            ("pixel_dx", self.pixel_dx),
            ("pixel_du", self.pixel_du),
            ("focal_b", self.focal_b),
        ]
    }

    /// Hex SHA-256 of the canonical text form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_canonical_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Optical wavenumber omega / c = 2 pi / lambda.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn with_z_b(&self, z_b: f64) -> Self {
        ScenarioConfig { z_b, ..*self }
    }

    /// z_b / z_a.
    pub fn alpha(&self) -> f64 {
        self.z_b / self.z_a
    }

    pub fn focused_resolution(&self) -> f64 {
        self.wavelength / self.source_na
    }

    pub fn dof_standard(&self) -> f64 {
        self.wavelength / (self.source_na * self.source_na)
    }

    /// Effective source diameter D_s = NA z_a.
    pub fn source_diameter(&self) -> f64 {
        self.source_na * self.z_a
    }

    /// Sets `source_na` so that lambda / NA equals `target_resolution`.
    pub fn calibrate_source_na(&self, target_resolution: f64) -> Result<Self> {
        if !(target_resolution.is_finite() && target_resolution > 0.0) {
            return Err(CpiError::Domain(format!(
                "target resolution must be positive, got {target_resolution}"
            )));
        }
        let cfg = ScenarioConfig {
            source_na: self.wavelength / target_resolution,
            ..*self
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn derived_quantities(&self, mask: &ApertureMask) -> DerivedSet {
        let a = mask.smallest_feature();
        let d = mask.pitch().unwrap_or(a);
        let m = self.magnification.abs();
        let diffraction_term = self.wavelength * self.z_b / a;
        let lens_term = 2.0 * self.wavelength / (m * self.na_b);
        let pixel_term = 2.0 * self.pixel_du / m;
        DerivedSet {
            focused_resolution: self.focused_resolution(),
            dof_standard: self.dof_standard(),
            projected_resolution: d * self.z_a / self.z_b,
            angular_resolution: diffraction_term.max(lens_term).max(pixel_term),
            diffraction_term,
            lens_term,
            pixel_term,
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::paper_setup()
    }
}
