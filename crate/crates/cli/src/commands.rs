//! Subcommand implementations. Each returns a report; inputs are resolved
//! and validated before any heavy computation starts.

use serde_json::{json, Map, Value};

use cstk::cs::{self, chern_weil_check, degree, gauge_shift};
use cstk::gauge::{find_flat, FlatSearchOptions};
use cstk::holonomy::{holonomy, holonomy_rep};
use cstk::io::{self, Field};
use cstk::lie::GroupElement;
use cstk::lines::{c_sigma, cocycle_residual, cylinder_cs, parallel_transport, ConnectionPath, LineValue};
use cstk::rep::{cohomology_dims, enumerate_components, restriction_image_dim, ComponentClass, Presentation, Representation};
use cstk::spectral::{
    assemble_d, assemble_de_rham, assemble_laplacian, eigen, eta_of, operator_norm, spectral_flow, spectral_flow_strict,
    EigenMode,
};
use cstk::fields::{smooth_random_form, SmoothSpec};

use crate::args::*;
use crate::emit::{Report, Table};
use crate::inputs::{self, GridChoice};
use crate::{CliError, UsageError};

const CUBE16: [usize; 3] = [16; 3];
const SQUARE16: [usize; 2] = [16; 2];

fn grid(global: &Global, default: &[usize]) -> Result<GridChoice, UsageError> {
    inputs::parse_grid(global.grid.as_deref(), default)
}

fn value(v: impl serde::Serialize) -> Value {
    serde_json::to_value(v).expect("serializable report")
}

fn quaternion(g: &GroupElement) -> Value {
    json!(g.quaternion())
}

fn matrix(g: &GroupElement) -> Value {
    let m = g.matrix();
    Value::Array(
        m.iter()
            .map(|row| Value::Array(row.iter().map(|z| json!([z.re, z.im])).collect()))
            .collect(),
    )
}

fn images(p: &Presentation, gs: &[GroupElement]) -> Value {
    let mut map = Map::new();
    for (name, g) in p.generators().iter().zip(gs) {
        map.insert(name.clone(), quaternion(g));
    }
    Value::Object(map)
}

fn line_report(v: LineValue, residuals: Vec<f64>) -> Report {
    Report::new(json!({"value_re": v.re, "value_im": v.im, "residuals": residuals}))
}

fn positive(flag: &str, v: f64) -> Result<(), UsageError> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(UsageError::flag(flag, format!("must be a positive number, got {v}")));
    }
    Ok(())
}

fn at_least(flag: &str, v: usize, min: usize) -> Result<(), UsageError> {
    if v < min {
        return Err(UsageError::flag(flag, format!("must be at least {min}, got {v}")));
    }
    Ok(())
}

fn save(flag: &str, path: &std::path::Path, write: impl FnOnce() -> cstk::Result<()>) -> Result<(), CliError> {
    write().map_err(|e| UsageError::flag(flag, format!("cannot write {}: {e}", path.display())).into())
}

pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Cs(c) => cs_command(g, c),
        Command::Gauge(GaugeCommand::Flatten { connection, tol, max_iters, save: target }) => {
            positive("--tol", *tol)?;
            at_least("--max-iters", *max_iters, 1)?;
            let choice = grid(g, &[12; 3])?;
            let a0 = inputs::connection(connection.connection.as_deref().unwrap_or("random:0.3"), &choice, g.seed)?;
            let found = find_flat(&a0, &FlatSearchOptions { tol: *tol, max_iters: *max_iters })?;
            if let Some(path) = target {
                save("--save", path, || io::save_field(path, &Field::Algebra(found.connection.clone())))?;
            }
            Ok(Report::new(json!({"residual": found.residual, "iterations": found.iterations})))
        }
        Command::Hol(h) => hol_command(g, h),
        Command::Rep(r) => rep_command(g, r),
        Command::Lines(l) => lines_command(g, l),
        Command::Spec(s) => spec_command(g, s),
    }
}

fn cs_command(g: &Global, c: &CsCommand) -> Result<Report, CliError> {
    match c {
        CsCommand::Eval(conn) => {
            let choice = grid(g, &CUBE16)?;
            let a = inputs::connection(conn.connection.as_deref().unwrap_or("zero"), &choice, g.seed)?;
            let v = cs::cs(&a)?;
            Ok(Report::new(json!({"cs": v})))
        }
        CsCommand::GaugeShift { connection, gauge } => {
            let choice = grid(g, &[32; 3])?;
            let a = inputs::connection(connection.connection.as_deref().unwrap_or("random:1.0"), &choice, g.seed)?;
            let u = inputs::gauge(gauge.gauge.as_deref().unwrap_or("bump-degree-1"), &choice, g.seed)?;
            if a.grid() != u.grid() {
                return Err(UsageError::flag("--gauge", "gauge map and connection live on different grids".into()).into());
            }
            Ok(Report::new(value(gauge_shift(&a, &u)?)))
        }
        CsCommand::Degree(gauge) => {
            let choice = grid(g, &[32; 3])?;
            let u = inputs::gauge(gauge.gauge.as_deref().unwrap_or("bump-degree-1"), &choice, g.seed)?;
            let (integral, k) = degree(&u)?;
            Ok(Report::new(json!({"integral": integral, "degree": k})))
        }
        CsCommand::ChernWeil(conn) => {
            let choice = grid(g, &[8; 4])?;
            let a = inputs::connection(conn.connection.as_deref().unwrap_or("random:1.0"), &choice, g.seed)?;
            Ok(Report::new(value(chern_weil_check(&a)?)))
        }
    }
}

fn torus_presentation(dim: usize) -> Presentation {
    let names: Vec<char> = "abcd".chars().take(dim).collect();
    let mut relators = Vec::new();
    for i in 0..dim {
        for j in i + 1..dim {
            relators.push(format!("[{},{}]", names[i], names[j]));
        }
    }
    let gens: Vec<String> = names.iter().map(|c| c.to_string()).collect();
    Presentation::parse(&format!("<{} | {}>", gens.join(","), relators.join(", "))).expect("torus presentation")
}

fn hol_command(g: &Global, h: &HolCommand) -> Result<Report, CliError> {
    match h {
        HolCommand::Loop { connection, loop_path, steps } => {
            at_least("--steps", *steps, cstk::holonomy::MIN_STEPS)?;
            let choice = grid(g, &CUBE16)?;
            let a = inputs::connection(connection.connection.as_deref().unwrap_or("flat-constant"), &choice, g.seed)?;
            let gamma = inputs::loop_path(loop_path, a.grid().dim())?;
            let hol = holonomy(&a, &gamma, *steps)?;
            Ok(Report::new(json!({"quaternion": quaternion(&hol), "matrix": matrix(&hol)})))
        }
        HolCommand::Rep { connection, steps, save: target } => {
            at_least("--steps", *steps, cstk::holonomy::MIN_STEPS)?;
            let choice = grid(g, &CUBE16)?;
            let a = inputs::connection(connection.connection.as_deref().unwrap_or("flat-constant"), &choice, g.seed)?;
            let gs = holonomy_rep(&a, *steps)?;
            let p = torus_presentation(gs.len());
            if let Some(path) = target {
                let rho = Representation::new(&p, gs.clone())?;
                let doc = crate::emit::to_json(&io::representation_to_json(&p, &rho));
                save("--save", path, || std::fs::write(path, doc).map_err(Into::into))?;
            }
            Ok(Report::new(json!({"presentation": p.to_string(), "images": images(&p, &gs)})))
        }
    }
}

fn class_json(p: &Presentation, c: &ComponentClass) -> Value {
    json!({
        "representation": images(p, &c.normal_form),
        "trace_key": c.trace_key,
        "count": c.count,
        "points": c.points,
        "h1": c.h1,
        "stabilizer_dim": c.stabilizer_dim,
        "trace_range": c.trace_range,
    })
}

fn rep_command(g: &Global, r: &RepCommand) -> Result<Report, CliError> {
    match r {
        RepCommand::Solve { presentation, trials, save: target } => {
            at_least("--trials", *trials, 1)?;
            let p = inputs::presentation(&presentation.presentation)?;
            let classes = enumerate_components(&p, *trials, g.seed)?;
            if let Some(path) = target {
                let first = classes
                    .first()
                    .ok_or_else(|| UsageError::flag("--save", "no irreducible class was found to save".into()))?;
                let rho = Representation::new(&p, first.normal_form.clone())?;
                let doc = crate::emit::to_json(&io::representation_to_json(&p, &rho));
                save("--save", path, || std::fs::write(path, doc).map_err(Into::into))?;
            }
            let json = json!({
                "presentation": p.to_string(),
                "trials": trials,
                "seed": g.seed,
                "classes": classes.iter().map(|c| class_json(&p, c)).collect::<Vec<_>>(),
            });
            let mut headers = vec!["class".to_string(), "count".into(), "points".into(), "h1".into(), "stabilizer_dim".into()];
            let key_len = classes.first().map_or(0, |c| c.trace_key.len());
            headers.extend((0..key_len).map(|i| format!("trace_{i}")));
            let rows = classes
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let mut row = vec![json!(i), json!(c.count), json!(c.points), json!(c.h1), json!(c.stabilizer_dim)];
                    row.extend(c.trace_key.iter().map(|t| json!(t)));
                    row
                })
                .collect();
            Ok(Report::with_table(json, Table { headers, rows }))
        }
        RepCommand::Count { presentation, trials } => {
            at_least("--trials", *trials, 1)?;
            let p = inputs::presentation(&presentation.presentation)?;
            let classes = enumerate_components(&p, *trials, g.seed)?;
            let families = classes.iter().filter(|c| c.h1.is_some_and(|h| h > 0)).count();
            Ok(Report::new(json!({
                "presentation": p.to_string(),
                "trials": trials,
                "seed": g.seed,
                "irreducible_classes": classes.len(),
                "families": families,
                "isolated": classes.len() - families,
            })))
        }
        RepCommand::Cohomology { presentation, rep, restriction } => {
            let p = inputs::presentation(&presentation.presentation)?;
            let rho = inputs::representation(&p, rep)?;
            let genus = p.rank() / 2;
            if *restriction && (genus == 0 || Presentation::surface(genus).ok().as_ref() != Some(&p)) {
                return Err(UsageError::flag("--restriction", "needs a closed surface presentation".into()).into());
            }
            let dims = cohomology_dims(&p, &rho)?;
            let mut json = value(dims);
            if *restriction {
                json["restriction_image_dim"] = json!(restriction_image_dim(genus, &rho)?);
            }
            Ok(Report::new(json))
        }
    }
}

fn lines_command(g: &Global, l: &LinesCommand) -> Result<Report, CliError> {
    match l {
        LinesCommand::CocycleCheck { connection, amplitude } => {
            if !(*amplitude >= 0.0) {
                return Err(UsageError::flag("--amplitude", format!("must be non-negative, got {amplitude}")).into());
            }
            let choice = grid(g, &[24; 2])?;
            let a = inputs::connection(connection.connection.as_deref().unwrap_or("random:1.0"), &choice, g.seed)?;
            let spec = SmoothSpec::new(*amplitude, 1);
            let xi1 = smooth_random_form(*a.grid(), 0, &spec, g.seed.wrapping_add(1))?;
            let xi2 = smooth_random_form(*a.grid(), 0, &spec, g.seed.wrapping_add(2))?;
            let v = c_sigma(&a, &xi1)?;
            let residual = cocycle_residual(&a, &xi1, &xi2)?;
            Ok(line_report(v, vec![residual]))
        }
        LinesCommand::Pt(path) => {
            let choice = grid(g, &SQUARE16)?;
            let samples = ConnectionPath::new(inputs::connection_path(&path.path, &choice, g.seed)?)?;
            let forward = parallel_transport(&samples)?;
            let back = parallel_transport(&samples.reversed())?;
            let loop_error = (forward.complex() * back.complex() - 1.0).norm();
            Ok(line_report(forward, vec![loop_error]))
        }
        LinesCommand::CylinderCs(path) => {
            let choice = grid(g, &SQUARE16)?;
            let samples = ConnectionPath::new(inputs::connection_path(&path.path, &choice, g.seed)?)?;
            let v = cylinder_cs(&samples)?;
            let pt = parallel_transport(&samples)?;
            Ok(line_report(v, vec![v.distance(&pt)]))
        }
    }
}

fn spec_command(g: &Global, s: &SpecCommand) -> Result<Report, CliError> {
    let default = [4; 3];
    match s {
        SpecCommand::Kernel { connection, operator, solver, count, tol, export } => {
            positive("--tol", *tol)?;
            at_least("--count", *count, 1)?;
            let choice = grid(g, &default)?;
            let a = inputs::connection(connection.connection.as_deref().unwrap_or("zero"), &choice, g.seed)?;
            let op = match operator {
                OperatorKind::D => assemble_d(&a)?,
                OperatorKind::DeRham => assemble_de_rham(&a)?,
                OperatorKind::Laplacian0 => assemble_laplacian(&a, 0)?,
                OperatorKind::Laplacian1 => assemble_laplacian(&a, 1)?,
            };
            let count = (*count).min(op.dim());
            if let Some(path) = export {
                let text = op.to_triplet_text();
                save("--export", path, || std::fs::write(path, text).map_err(Into::into))?;
            }
            let mut near = match solver {
                SolverKind::Dense => {
                    let mut all = eigen(&op, EigenMode::Dense, false)?.values;
                    all.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
                    all.truncate(count);
                    all
                }
                SolverKind::Iterative => eigen(&op, EigenMode::NearZero { count, shift: 0.0 }, false)?.values,
            };
            near.sort_by(f64::total_cmp);
            let kernel = near.iter().filter(|l| l.abs() < *tol).count();
            let json = json!({"dim": op.dim(), "kernel_dim": kernel, "tolerance": tol, "eigenvalues": near});
            let rows = near.iter().enumerate().map(|(i, l)| vec![json!(i), json!(l)]).collect();
            Ok(Report::with_table(json, Table { headers: vec!["index".into(), "eigenvalue".into()], rows }))
        }
        SpecCommand::Flow { path, epsilon, strict, snapshots } => {
            if let Some(e) = epsilon {
                positive("--epsilon", *e)?;
            }
            let choice = grid(g, &default)?;
            let samples = inputs::connection_path(&path.path, &choice, g.seed)?;
            let report = if *strict { spectral_flow_strict(&samples, *epsilon)? } else { spectral_flow(&samples, *epsilon)? };
            let mut json = json!({"sf": report.sf, "warnings": report.warnings});
            if *snapshots {
                json["epsilon"] = json!(report.epsilon);
                json["snapshots"] = json!(report.snapshots);
            }
            let rows = report
                .snapshots
                .iter()
                .enumerate()
                .flat_map(|(s, vals)| vals.iter().enumerate().map(move |(i, l)| vec![json!(s), json!(i), json!(l)]))
                .collect();
            let table = Table { headers: vec!["sample".into(), "index".into(), "eigenvalue".into()], rows };
            Ok(if *snapshots { Report::with_table(json, table) } else { Report::new(json) })
        }
        SpecCommand::Eta { connection, epsilon } => {
            if let Some(e) = epsilon {
                positive("--epsilon", *e)?;
            }
            let choice = grid(g, &default)?;
            let a = inputs::connection(connection.connection.as_deref().unwrap_or("zero"), &choice, g.seed)?;
            let op = assemble_d(&a)?;
            let eps = epsilon.unwrap_or_else(|| 1e-6 * operator_norm(op.matrix()));
            let values = eigen(&op, EigenMode::Dense, false)?.values;
            Ok(Report::new(json!({"eta": eta_of(&values, eps), "epsilon": eps, "dim": op.dim()})))
        }
    }
}
