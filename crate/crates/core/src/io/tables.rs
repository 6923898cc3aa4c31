use std::path::Path;

use crate::analysis::{DofReport, VisibilityMap};
use crate::engine::ImageProfile;
use crate::error::{CpiError, Result};

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

/// Profile as `x, x_object, value` rows, with the sensor coordinate first.
pub fn write_profile_csv(path: impl AsRef<Path>, p: &ImageProfile) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "x_object", "value"])?;
    let obj = p.object_grid();
    for (i, v) in p.values.iter().enumerate() {
        w.write_record([fmt(p.grid.at(i)), fmt(obj.at(i)), fmt(*v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back the sensor grid and values of a profile CSV.
pub fn read_profile_csv(path: impl AsRef<Path>) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let (mut xs, mut vs) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| CpiError::Format(format!("bad profile row {:?}", rec)))
        };
        xs.push(num(0)?);
        vs.push(num(2)?);
    }
    Ok((xs, vs))
}

/// Map in long format: one row per cell, with the geometric-bound flag for
/// CPI maps.
pub fn write_map_csv(path: impl AsRef<Path>, map: &VisibilityMap, dxf: f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["d", "d_over_dxf", "z", "z_b", "modality", "V", "inside_bound"])?;
    let modality = map.modality.to_string();
    for (i, &r) in map.d_over_dxf.iter().enumerate() {
        for (j, &dz) in map.defocus.iter().enumerate() {
            let inside = match map.inside_bound(i, j) {
                Some(b) => (b as u8).to_string(),
                None => String::new(),
            };
            w.write_record([
                fmt(r * dxf),
                fmt(r),
                fmt(dz),
                fmt(map.z_a + dz),
                modality.clone(),
                fmt(map.get(i, j)),
                inside,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofSide {
    /// z_b < z_a: the minimum resolved distance.
    Near,
    /// z_b > z_a: the maximum resolved distance.
    Far,
}

/// One side of the depth of field against d: per report and modality the
/// extreme resolved object distance, and whether the scan stopped at its
/// limit before resolution was lost.
pub fn write_dof_side_csv(path: impl AsRef<Path>, reports: &[DofReport], side: DofSide, dxf: f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["d", "d_over_dxf", "modality", "z_b", "z_b_minus_z_a", "unbounded", "resolved"])?;
    for r in reports {
        for (m, iv) in r.intervals() {
            let (z, unb) = match side {
                DofSide::Near => (iv.near, iv.near_unbounded),
                DofSide::Far => (iv.far, iv.far_unbounded),
            };
            let (z, dz) = if iv.resolved {
                (fmt(z), fmt(z - r.z_a))
            } else {
                (String::new(), String::new())
            };
            w.write_record([
                fmt(r.d),
                fmt(r.d / dxf),
                m.to_string(),
                z,
                dz,
                (unb as u8).to_string(),
                (iv.resolved as u8).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
