//! Built-in named inputs, so that scenarios need no external data.
//!
//! Connections: `zero`, `flat-constant`, `nonflat`,
//! `constant:x,y,z;x,y,z;x,y,z` (one algebra element per axis) and
//! `random:<amplitude>[:<max_mode>]`.
//! Gauge maps: `identity`, `bump-degree-1`, `random:<amplitude>[:<max_mode>]`.
//! Connection paths: `constant[:<samples>]` repeats the zero connection and
//! `segment:<amplitude>[:<samples>]` runs linearly from zero to a random
//! connection.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fields::{smooth_random_form, SmoothSpec};
use crate::forms::{AlgebraForm, TorusGrid};
use crate::gauge::{constant_connection, GaugeMap};
use crate::lie::AlgebraElement;

/// The fixed algebra element used by the bundled connections.
pub const LAMBDA: AlgebraElement = AlgebraElement([0.3, -0.5, 0.8]);

/// `(Λ, Λ/2, −2Λ)`: constant, commuting, hence flat.
pub fn flat_constant(grid: TorusGrid) -> Result<AlgebraForm> {
    let mut values = vec![LAMBDA, LAMBDA * 0.5, LAMBDA * -2.0];
    values.resize(grid.dim(), AlgebraElement::ZERO);
    values.truncate(grid.dim());
    constant_connection(grid, &values)
}

/// `sin(2πy) dx ⊗ Λ`, which is not flat.
pub fn nonflat(grid: TorusGrid) -> Result<AlgebraForm> {
    AlgebraForm::from_fn(grid, 1, |x, m| if m == 0b001 { LAMBDA * (2.0 * PI * x[1]).sin() } else { AlgebraElement::ZERO })
}

fn numbers(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad number {t:?} in {what}"))))
        .collect()
}

fn smooth_spec(args: &str, what: &str) -> Result<SmoothSpec> {
    let parts: Vec<&str> = args.split(':').collect();
    let amplitude: f64 = parts[0].parse().map_err(|_| Error::InvalidInput(format!("bad amplitude in {what}")))?;
    let max_mode: u32 = match parts.get(1) {
        Some(m) => m.parse().map_err(|_| Error::InvalidInput(format!("bad max mode in {what}")))?,
        None => 1,
    };
    if parts.len() > 2 || !(amplitude >= 0.0) || max_mode == 0 {
        return Err(Error::InvalidInput(format!("{what} expects <amplitude ≥ 0>[:<max_mode ≥ 1>]")));
    }
    Ok(SmoothSpec::new(amplitude, max_mode))
}

/// Resolves a connection name; `None` if `name` is not a built-in.
pub fn connection(name: &str, grid: TorusGrid, seed: u64) -> Option<Result<AlgebraForm>> {
    let result = match name {
        "zero" => AlgebraForm::zeros(grid, 1),
        "flat-constant" => flat_constant(grid),
        "nonflat" => nonflat(grid),
        _ => {
            if let Some(rest) = name.strip_prefix("constant:") {
                constant_from_text(rest, grid)
            } else if let Some(rest) = name.strip_prefix("random:") {
                smooth_spec(rest, "random connection").and_then(|s| smooth_random_form(grid, 1, &s, seed))
            } else {
                return None;
            }
        }
    };
    Some(result)
}

fn constant_from_text(text: &str, grid: TorusGrid) -> Result<AlgebraForm> {
    let values = text
        .split(';')
        .map(|part| {
            let v = numbers(part, "constant connection")?;
            match v[..] {
                [x, y, z] => Ok(AlgebraElement::new(x, y, z)),
                _ => Err(Error::InvalidInput("each constant component needs 3 coordinates".into())),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != grid.dim() {
        return Err(Error::InvalidInput(format!("constant connection needs {} components", grid.dim())));
    }
    constant_connection(grid, &values)
}

/// Resolves a gauge-map name; `None` if `name` is not a built-in.
pub fn gauge(name: &str, grid: TorusGrid, seed: u64) -> Option<Result<GaugeMap>> {
    let result = match name {
        "identity" => Ok(GaugeMap::identity(grid)),
        "bump-degree-1" => GaugeMap::degree_one(grid),
        _ => {
            let rest = name.strip_prefix("random:")?;
            smooth_spec(rest, "random gauge").and_then(|s| GaugeMap::smooth_random(grid, &s, seed))
        }
    };
    Some(result)
}

/// Resolves a connection-path name; `None` if `name` is not a built-in.
pub fn connection_path(name: &str, grid: TorusGrid, seed: u64) -> Option<Result<Vec<AlgebraForm>>> {
    let (kind, rest) = name.split_once(':').unwrap_or((name, ""));
    let result = match kind {
        "constant" => sample_count(rest, 5).and_then(|k| Ok(vec![AlgebraForm::zeros(grid, 1)?; k])),
        "segment" => (|| {
            let (amp, count) = rest.split_once(':').unwrap_or((rest, ""));
            let amp: f64 = amp.parse().map_err(|_| Error::InvalidInput("segment path needs an amplitude".into()))?;
            let k = sample_count(count, 9)?;
            let end = smooth_random_form(grid, 1, &SmoothSpec::new(amp, 1), seed)?;
            Ok((0..k).map(|i| end.scale(i as f64 / (k - 1) as f64)).collect())
        })(),
        _ => return None,
    };
    Some(result)
}

fn sample_count(text: &str, default: usize) -> Result<usize> {
    if text.is_empty() {
        return Ok(default);
    }
    match text.parse::<usize>() {
        Ok(k) if k >= 2 => Ok(k),
        _ => Err(Error::InvalidInput(format!("path sample count must be an integer ≥ 2, got {text:?}"))),
    }
}
