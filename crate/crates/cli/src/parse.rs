//! Parsers for the compact command-line value syntaxes.

use std::path::Path;

use cpi_core::speckle::PostprocessParams;
use cpi_core::{ApertureMask, SampledGrid};

use crate::error::CliError;

fn number(s: &str, what: &str) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{what}: bad number `{s}`")))
}

/// `start:stop:count` (inclusive, evenly spaced), `a,b,c`, or a single value.
pub fn values(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let out = match parts.as_slice() {
        [start, stop, count] => {
            let (a, b) = (number(start, what)?, number(stop, what)?);
            let n: usize = count
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{what}: bad count `{count}`")))?;
            match n {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            }
        }
        [list] => list
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| number(p, what))
            .collect::<Result<_, _>>()?,
        _ => return Err(CliError::Config(format!("{what}: expected start:stop:count or a list, got `{s}`"))),
    };
    if out.is_empty() {
        return Err(CliError::Config(format!("{what}: empty range")));
    }
    Ok(out)
}

/// `points,spacing`: a grid of that many points centred on the axis.
pub fn grid(s: &str) -> Result<SampledGrid, CliError> {
    let (n, dx) = s
        .split_once(',')
        .ok_or_else(|| CliError::Config(format!("grid must be `points,spacing`, got `{s}`")))?;
    let n: usize = n
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("grid: bad point count `{n}`")))?;
    Ok(SampledGrid::centered(n, number(dx, "grid spacing")?)?)
}

/// Mask from an inline spec or a file holding one; the inline spec wins.
pub fn mask(inline: Option<&str>, file: Option<&Path>) -> Result<Option<ApertureMask>, CliError> {
    if let Some(s) = inline {
        if file.is_some() {
            log::warn!("both --mask and --mask-file given; using --mask");
        }
        return Ok(Some(s.parse()?));
    }
    let Some(path) = file else { return Ok(None) };
    let text = std::fs::read_to_string(path)?;
    let spec = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .ok_or_else(|| CliError::Config(format!("{}: no mask spec found", path.display())))?;
    Ok(Some(spec.parse()?))
}

/// `lowpass=...,lowpass_b=...,threshold=...`, or `default`. Missing keys take
/// the values from `base`.
pub fn postprocess(s: &str, base: PostprocessParams) -> Result<PostprocessParams, CliError> {
    let mut p = base;
    let s = s.trim();
    if s == "default" {
        return Ok(p);
    }
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("postprocess entry `{part}` is not key=value")))?;
        let v = match v.trim() {
            "off" | "inf" => f64::INFINITY,
            v => number(v, &format!("postprocess `{k}`"))?,
        };
        match k.trim() {
            "lowpass" | "lowpass_a" => p.lowpass_a = v,
            "lowpass_b" => p.lowpass_b = v,
            "threshold" => p.threshold = v,
            other => return Err(CliError::Config(format!("unknown postprocess key `{other}`"))),
        }
    }
    Ok(p)
}
