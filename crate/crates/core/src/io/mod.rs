//! Persistence: the self-describing binary grid format for tensors and maps,
//! the chunked frame-stack format, and CSV tables.

mod frames;
mod grid_file;
mod tables;

pub use frames::{read_frame_stack, write_frame_stack, FrameStackReader, FrameStackWriter, DEFAULT_CHUNK_FRAMES};
pub use grid_file::{
    decode_tensor, encode_tensor, read_grid_file, read_map, read_tensor, write_grid_file, write_map, write_tensor,
    Axis, GridFile, GRID_MAGIC, GRID_VERSION,
};
pub use tables::{read_profile_csv, write_dof_side_csv, write_map_csv, write_profile_csv, DofSide};

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{CpiError, Result};
use crate::grid::SampledGrid;
use crate::scenario::ScenarioConfig;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    use std::io::Read;
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Text header shared by the binary formats: one `key = value` per line,
/// sorted by key. Floats use shortest round-trip formatting.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Header(BTreeMap<String, String>);

impl Header {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn set_f64(&mut self, key: &str, value: f64) {
        self.set(key, format!("{value:e}"));
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| CpiError::Format(format!("header is missing `{key}`")))
    }

    pub fn opt(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| CpiError::Format(format!("header `{key}`: cannot parse `{v}`")))
    }

    pub fn set_scenario(&mut self, cfg: &ScenarioConfig) {
        for (k, v) in cfg.fields() {
            self.set_f64(&format!("scenario.{k}"), v);
        }
    }

    pub fn scenario(&self) -> Result<ScenarioConfig> {
        let text: String = self
            .0
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("scenario.").map(|k| format!("{k} = {v}\n")))
            .collect();
        ScenarioConfig::from_toml_str(&text)
            .map_err(|e| CpiError::Format(format!("scenario echo: {e}")))
    }

    pub fn set_grid(&mut self, prefix: &str, g: &SampledGrid) {
        self.set(&format!("{prefix}.n"), g.len());
        self.set_f64(&format!("{prefix}.spacing"), g.spacing());
        self.set_f64(&format!("{prefix}.origin"), g.origin());
    }

    pub fn grid(&self, prefix: &str) -> Result<SampledGrid> {
        SampledGrid::new(
            self.parse(&format!("{prefix}.n"))?,
            self.parse(&format!("{prefix}.spacing"))?,
            self.parse(&format!("{prefix}.origin"))?,
        )
        .map_err(|e| CpiError::Format(format!("{prefix}: {e}")))
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| CpiError::Format(format!("bad header line `{line}`")))?;
            map.insert(k.to_string(), v.to_string());
        }
        Ok(Header(map))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// Little-endian cursor over a byte buffer.
pub(crate) struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| CpiError::Format("unexpected end of file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
