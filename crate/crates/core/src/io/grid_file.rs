use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::analysis::{DofInterval, Modality, VisibilityMap};
use crate::engine::{CorrelationTensor, Provenance};
use crate::error::{CpiError, Result};
use crate::grid::SampledGrid;
use crate::scenario::ScenarioConfig;

use super::{sha256_hex, Cursor, Header};

pub const GRID_MAGIC: &[u8; 8] = b"CPIGRID\0";
pub const GRID_VERSION: u32 = 1;

const TENSOR_KIND: &str = "correlation-tensor";
const MAP_KIND: &str = "visibility-map";

#[derive(Debug, Clone, PartialEq)]
pub enum Axis {
    Uniform { name: String, grid: SampledGrid },
    Explicit { name: String, coords: Vec<f64> },
}

impl Axis {
    pub fn name(&self) -> &str {
        match self {
            Axis::Uniform { name, .. } | Axis::Explicit { name, .. } => name,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Axis::Uniform { grid, .. } => grid.len(),
            Axis::Explicit { coords, .. } => coords.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Generic N-dimensional grid of f64 values, row-major over `axes`.
///
/// On disk: magic, u32 version, u32 header length, UTF-8 header (kind, axes,
/// attributes, scenario echo), u64 value count, f64 LE payload, then the
/// SHA-256 of all preceding bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub kind: String,
    pub axes: Vec<Axis>,
    pub attrs: BTreeMap<String, String>,
    pub scenario: Option<ScenarioConfig>,
    pub values: Vec<f64>,
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
}

fn split_f64(s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| x.parse().map_err(|_| CpiError::Format(format!("bad number `{x}`"))))
        .collect()
}

impl GridFile {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let expected: usize = self.axes.iter().map(Axis::len).product();
        if expected != self.values.len() {
            return Err(CpiError::Domain(format!(
                "grid of {} values does not match axes of {expected} cells",
                self.values.len()
            )));
        }
        let mut h = Header::default();
        h.set("kind", &self.kind);
        h.set("axes", self.axes.iter().map(Axis::name).collect::<Vec<_>>().join(","));
        for ax in &self.axes {
            let p = format!("axis.{}", ax.name());
            match ax {
                Axis::Uniform { grid, .. } => {
                    h.set(&format!("{p}.kind"), "uniform");
                    h.set_grid(&p, grid);
                }
                Axis::Explicit { coords, .. } => {
                    h.set(&format!("{p}.kind"), "explicit");
                    h.set(&format!("{p}.coords"), join_f64(coords));
                }
            }
        }
        for (k, v) in &self.attrs {
            if v.contains('\n') {
                return Err(CpiError::Domain(format!("attribute `{k}` spans lines")));
            }
            h.set(&format!("attr.{k}"), v);
        }
        if let Some(cfg) = &self.scenario {
            h.set_scenario(cfg);
        }
        let text = h.to_text();

        let mut out = Vec::with_capacity(64 + text.len() + 8 * self.values.len());
        out.extend_from_slice(GRID_MAGIC);
        out.extend_from_slice(&GRID_VERSION.to_le_bytes());
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        out.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(bytes);
        if c.take(8)? != GRID_MAGIC {
            return Err(CpiError::Format("not a grid file (bad magic)".into()));
        }
        let version = c.u32()?;
        if version != GRID_VERSION {
            return Err(CpiError::VersionMismatch {
                found: version,
                expected: GRID_VERSION,
            });
        }
        if bytes.len() < 32 {
            return Err(CpiError::Format("unexpected end of file".into()));
        }
        let body = &bytes[..bytes.len() - 32];
        if Sha256::digest(body).as_slice() != &bytes[bytes.len() - 32..] {
            return Err(CpiError::Checksum(format!("grid file (sha256 {})", sha256_hex(body))));
        }
        let mut c = Cursor::new(body);
        c.take(12)?;
        let hlen = c.u32()? as usize;
        let text = std::str::from_utf8(c.take(hlen)?)
            .map_err(|_| CpiError::Format("header is not UTF-8".into()))?;
        let h = Header::from_text(text)?;
        let n = c.u64()? as usize;
        let payload = c.take(n.checked_mul(8).ok_or_else(|| CpiError::Format("bad value count".into()))?)?;
        if c.pos() != body.len() {
            return Err(CpiError::Format("trailing bytes after payload".into()));
        }
        let values = payload
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();

        let mut axes = Vec::new();
        for name in h.get("axes")?.split(',').filter(|s| !s.is_empty()) {
            let p = format!("axis.{name}");
            let ax = match h.get(&format!("{p}.kind"))? {
                "uniform" => Axis::Uniform {
                    name: name.to_string(),
                    grid: h.grid(&p)?,
                },
                "explicit" => Axis::Explicit {
                    name: name.to_string(),
                    coords: split_f64(h.get(&format!("{p}.coords"))?)?,
                },
                other => return Err(CpiError::Format(format!("unknown axis kind `{other}`"))),
            };
            axes.push(ax);
        }
        let attrs = h
            .entries()
            .filter_map(|(k, v)| k.strip_prefix("attr.").map(|k| (k.to_string(), v.to_string())))
            .collect();
        let scenario = if h.entries().any(|(k, _)| k.starts_with("scenario.")) {
            Some(h.scenario()?)
        } else {
            None
        };
        let file = GridFile {
            kind: h.get("kind")?.to_string(),
            axes,
            attrs,
            scenario,
            values,
        };
        let expected: usize = file.axes.iter().map(Axis::len).product();
        if expected != file.values.len() {
            return Err(CpiError::Format(format!(
                "payload of {} values does not match axes of {expected} cells",
                file.values.len()
            )));
        }
        Ok(file)
    }

    fn attr(&self, key: &str) -> Result<&str> {
        self.attrs
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| CpiError::Format(format!("missing attribute `{key}`")))
    }

    fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(CpiError::Format(format!("expected a {kind} file, found {}", self.kind)))
        }
    }
}

pub fn write_grid_file(path: impl AsRef<Path>, file: &GridFile) -> Result<()> {
    std::fs::write(path, file.encode()?)?;
    Ok(())
}

pub fn read_grid_file(path: impl AsRef<Path>) -> Result<GridFile> {
    let path = path.as_ref();
    GridFile::decode(&std::fs::read(path)?).map_err(|e| match e {
        CpiError::Format(m) => CpiError::Format(format!("{}: {m}", path.display())),
        CpiError::Checksum(m) => CpiError::Checksum(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn encode_tensor(t: &CorrelationTensor, mask_spec: Option<&str>) -> Result<Vec<u8>> {
    let mut attrs = BTreeMap::new();
    attrs.insert("provenance".to_string(), t.provenance.as_str().to_string());
    if let Some(m) = mask_spec {
        attrs.insert("mask".to_string(), m.to_string());
    }
    GridFile {
        kind: TENSOR_KIND.into(),
        axes: vec![
            Axis::Uniform {
                name: "x_a".into(),
                grid: t.grid_a,
            },
            Axis::Uniform {
                name: "x_b".into(),
                grid: t.grid_b,
            },
        ],
        attrs,
        scenario: Some(t.scenario),
        values: t.values().to_vec(),
    }
    .encode()
}

/// Decodes a tensor and the mask spec stored with it, if any.
pub fn decode_tensor(bytes: &[u8]) -> Result<(CorrelationTensor, Option<String>)> {
    tensor_from_file(GridFile::decode(bytes)?)
}

fn tensor_from_file(f: GridFile) -> Result<(CorrelationTensor, Option<String>)> {
    f.expect_kind(TENSOR_KIND)?;
    let (ga, gb) = match f.axes.as_slice() {
        [Axis::Uniform { grid: a, .. }, Axis::Uniform { grid: b, .. }] => (*a, *b),
        _ => return Err(CpiError::Format("tensor needs two uniform axes".into())),
    };
    let provenance = Provenance::parse(f.attr("provenance")?)
        .ok_or_else(|| CpiError::Format("unknown tensor provenance".into()))?;
    let scenario = f
        .scenario
        .ok_or_else(|| CpiError::Format("tensor file has no scenario echo".into()))?;
    let mask = f.attrs.get("mask").cloned();
    let t = CorrelationTensor::new(f.values, ga, gb, scenario, provenance)?;
    Ok((t, mask))
}

pub fn write_tensor(path: impl AsRef<Path>, t: &CorrelationTensor, mask_spec: Option<&str>) -> Result<()> {
    std::fs::write(path, encode_tensor(t, mask_spec)?)?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<(CorrelationTensor, Option<String>)> {
    tensor_from_file(read_grid_file(path)?)
}

fn map_to_file(map: &VisibilityMap, scenario: &ScenarioConfig) -> GridFile {
    let mut attrs = BTreeMap::new();
    attrs.insert("modality".to_string(), map.modality.to_string());
    attrs.insert("z_a".to_string(), format!("{:e}", map.z_a));
    attrs.insert("failed_cells".to_string(), map.failed_cells.to_string());
    if let Some(b) = &map.bound {
        let col = |f: &dyn Fn(&DofInterval) -> String| b.iter().map(f).collect::<Vec<_>>().join(",");
        attrs.insert("bound.near".into(), col(&|i| format!("{:e}", i.near)));
        attrs.insert("bound.far".into(), col(&|i| format!("{:e}", i.far)));
        attrs.insert("bound.near_unbounded".into(), col(&|i| i.near_unbounded.to_string()));
        attrs.insert("bound.far_unbounded".into(), col(&|i| i.far_unbounded.to_string()));
        attrs.insert("bound.resolved".into(), col(&|i| i.resolved.to_string()));
    }
    GridFile {
        kind: MAP_KIND.into(),
        axes: vec![
            Axis::Explicit {
                name: "d_over_dxf".into(),
                coords: map.d_over_dxf.clone(),
            },
            Axis::Explicit {
                name: "defocus".into(),
                coords: map.defocus.clone(),
            },
        ],
        attrs,
        scenario: Some(*scenario),
        values: map.values.clone(),
    }
}

pub fn write_map(path: impl AsRef<Path>, map: &VisibilityMap, scenario: &ScenarioConfig) -> Result<()> {
    write_grid_file(path, &map_to_file(map, scenario))
}

pub fn read_map(path: impl AsRef<Path>) -> Result<(VisibilityMap, ScenarioConfig)> {
    let f = read_grid_file(path)?;
    f.expect_kind(MAP_KIND)?;
    let (d, z) = match f.axes.as_slice() {
        [Axis::Explicit { coords: d, .. }, Axis::Explicit { coords: z, .. }] => (d.clone(), z.clone()),
        _ => return Err(CpiError::Format("map needs two explicit axes".into())),
    };
    let bad = |k: &str| CpiError::Format(format!("bad attribute `{k}`"));
    let modality: Modality = f.attr("modality")?.parse().map_err(|_| bad("modality"))?;
    let z_a: f64 = f.attr("z_a")?.parse().map_err(|_| bad("z_a"))?;
    let failed_cells: usize = f.attr("failed_cells")?.parse().map_err(|_| bad("failed_cells"))?;
    let bound = if f.attrs.contains_key("bound.near") {
        let bools = |k: &str| -> Result<Vec<bool>> {
            f.attr(k)?.split(',').map(|s| s.parse().map_err(|_| bad(k))).collect()
        };
        let near = split_f64(f.attr("bound.near")?)?;
        let far = split_f64(f.attr("bound.far")?)?;
        let nu = bools("bound.near_unbounded")?;
        let fu = bools("bound.far_unbounded")?;
        let res = bools("bound.resolved")?;
        if [far.len(), nu.len(), fu.len(), res.len()].iter().any(|&l| l != near.len()) || near.len() != d.len() {
            return Err(bad("bound"));
        }
        Some(
            (0..near.len())
                .map(|i| DofInterval {
                    near: near[i],
                    far: far[i],
                    near_unbounded: nu[i],
                    far_unbounded: fu[i],
                    resolved: res[i],
                })
                .collect(),
        )
    } else {
        None
    };
    let scenario = f
        .scenario
        .ok_or_else(|| CpiError::Format("map file has no scenario echo".into()))?;
    Ok((
        VisibilityMap {
            modality,
            d_over_dxf: d,
            defocus: z,
            values: f.values,
            failed_cells,
            bound,
            z_a,
        },
        scenario,
    ))
}
