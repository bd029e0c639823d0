//! Resolution of grids, fields, loops, paths and presentations from flags.

use std::path::Path;

use cstk::holonomy::LoopPath;
use cstk::rep::{Presentation, Representation};
use cstk::{io, named, AlgebraForm, GaugeMap, TorusGrid};

use crate::UsageError;

/// Where a grid came from, for diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct GridChoice {
    pub grid: TorusGrid,
    pub explicit: bool,
}

pub fn parse_grid(text: Option<&str>, default: &[usize]) -> Result<GridChoice, UsageError> {
    let Some(text) = text else {
        let grid = TorusGrid::new(default).expect("valid default grid");
        return Ok(GridChoice { grid, explicit: false });
    };
    let dims: Vec<usize> = text
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| UsageError::flag("--grid", format!("{text:?} is not `n` or `n1,n2,...`")))?;
    let shape = if dims.len() == 1 { vec![dims[0]; default.len()] } else { dims };
    let grid = TorusGrid::new(&shape).map_err(|e| UsageError::flag("--grid", e.to_string()))?;
    Ok(GridChoice { grid, explicit: true })
}

fn check_grid(flag: &str, found: &TorusGrid, choice: &GridChoice) -> Result<(), UsageError> {
    if choice.explicit && found != &choice.grid {
        return Err(UsageError::flag(
            "--grid",
            format!("grid {:?} does not match the {:?} grid of {flag}", choice.grid.shape(), found.shape()),
        ));
    }
    Ok(())
}

fn file_exists(flag: &str, text: &str) -> Result<(), UsageError> {
    if !Path::new(text).exists() {
        return Err(UsageError::flag(flag, format!("{text:?} is neither a built-in name nor an existing file")));
    }
    Ok(())
}

pub fn connection(text: &str, choice: &GridChoice, seed: u64) -> Result<AlgebraForm, UsageError> {
    let flag = "--connection";
    if let Some(result) = named::connection(text, choice.grid, seed) {
        return result.map_err(|e| UsageError::flag(flag, e.to_string()));
    }
    file_exists(flag, text)?;
    let a = io::load_connection(text).map_err(|e| UsageError::flag(flag, e.to_string()))?;
    check_grid(flag, a.grid(), choice)?;
    Ok(a)
}

pub fn gauge(text: &str, choice: &GridChoice, seed: u64) -> Result<GaugeMap, UsageError> {
    let flag = "--gauge";
    if let Some(result) = named::gauge(text, choice.grid, seed) {
        return result.map_err(|e| UsageError::flag(flag, e.to_string()));
    }
    file_exists(flag, text)?;
    let u = io::load_gauge(text).map_err(|e| UsageError::flag(flag, e.to_string()))?;
    check_grid(flag, u.grid(), choice)?;
    Ok(u)
}

pub fn connection_path(text: &str, choice: &GridChoice, seed: u64) -> Result<Vec<AlgebraForm>, UsageError> {
    let flag = "--path";
    if let Some(result) = named::connection_path(text, choice.grid, seed) {
        return result.map_err(|e| UsageError::flag(flag, e.to_string()));
    }
    if !Path::new(text).is_dir() {
        return Err(UsageError::flag(flag, format!("{text:?} is neither a built-in path nor a directory")));
    }
    let samples = io::load_connection_path(text).map_err(|e| UsageError::flag(flag, e.to_string()))?;
    check_grid(flag, samples[0].grid(), choice)?;
    Ok(samples)
}

pub fn loop_path(text: &str, dim: usize) -> Result<LoopPath, UsageError> {
    let flag = "--loop";
    if let Some(axis) = text.strip_prefix("axis:") {
        let axis: usize = axis.parse().map_err(|_| UsageError::flag(flag, format!("bad axis in {text:?}")))?;
        return LoopPath::axis_loop(&vec![0.0; dim], axis).map_err(|e| UsageError::flag(flag, e.to_string()));
    }
    file_exists(flag, text)?;
    let gamma = io::load_loop(text).map_err(|e| UsageError::flag(flag, e.to_string()))?;
    if gamma.dim() != dim {
        return Err(UsageError::flag(flag, format!("loop is {}-dimensional but the grid is {dim}-dimensional", gamma.dim())));
    }
    Ok(gamma)
}

pub fn presentation(text: &str) -> Result<Presentation, UsageError> {
    if let Some(p) = Presentation::bundled(text) {
        return Ok(p);
    }
    Presentation::parse(text).map_err(|e| UsageError::flag("--presentation", e.to_string()))
}

pub fn representation(p: &Presentation, text: &str) -> Result<Representation, UsageError> {
    if text == "trivial" {
        return Ok(Representation::trivial(p));
    }
    file_exists("--rep", text)?;
    io::load_representation(p, text).map_err(|e| UsageError::flag("--rep", e.to_string()))
}
