//! Command dispatch: builds the problem from a [`RunConfig`], runs it and
//! writes the artifacts.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{Command, InitialCondition, NonlinearityKind, RunConfig};
use super::output::{heatmap_svg, line_svg, provenance, write_atomic, Table};
use crate::error::Error;
use crate::field::{sample_field, tail_fraction};
use crate::fracops::BetaVector;
use crate::grid::{GridFunction, GridSpec};
use crate::harness::{default_suite, heat_noise_grid, SuiteConfig, ValidationReport};
use crate::seed::derive_seed;
use crate::spde::{
    solve_heat_deterministic, solve_heat_with, solve_poisson, solve_quasilinear, DomainSpec, IterationReport,
    Nonlinearity, PicardOptions, SolutionField,
};

pub const DEFAULT_FIELD_PAST: f64 = 50.0;
pub const DEFAULT_POISSON_PAST: f64 = 20.0;
pub const DEFAULT_HEAT_PAST: f64 = 4.0;

/// Exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Failure = 1,
    ParameterError = 2,
}

#[derive(Debug)]
pub enum RunError {
    /// Invalid parameters: nothing was written.
    Parameter(String),
    /// The computation or an output write failed.
    Failure(String),
}

impl RunError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            RunError::Parameter(_) => ExitCode::ParameterError,
            RunError::Failure(_) => ExitCode::Failure,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            RunError::Parameter(m) | RunError::Failure(m) => m,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotConverged { .. }
            | Error::NonFinite { .. }
            | Error::InsufficientData(_)
            | Error::Internal(_) => RunError::Failure(e.to_string()),
            _ => RunError::Parameter(with_anchor(e.to_string())),
        }
    }
}

/// Appends the condition a message refers to, when it names one.
fn with_anchor(msg: String) -> String {
    if msg.contains("picard_condition") {
        format!("{msg} [existence condition for the quasilinear heat equation: beta_i > 1/2 - 1/d]")
    } else if msg.contains("heat_l2_condition") {
        format!("{msg} [square integrability of the heat solution: 2 beta0 + sum beta + 1 > d/2]")
    } else {
        msg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    /// Validation result; always true for solver commands.
    pub passed: bool,
    /// Human-readable summary lines for standard output.
    pub summary: Vec<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> ExitCode {
        if self.passed {
            ExitCode::Success
        } else {
            ExitCode::Failure
        }
    }
}

/// Runs `cfg` with master seed `seed`, writing artifacts into `out`.
pub fn run(cfg: &RunConfig, seed: u64, out: &Path) -> Result<RunOutcome, RunError> {
    let hash = cfg.hash();
    let artifacts = match cfg.command {
        Command::SimulateField => simulate_field(cfg, seed)?,
        Command::SolvePoisson => solve_poisson_cmd(cfg, seed)?,
        Command::SolveHeat => solve_heat_cmd(cfg, seed)?,
        Command::SolveQuasilinear => solve_quasilinear_cmd(cfg, seed)?,
        Command::Validate => validate_cmd(cfg, seed)?,
    };
    std::fs::create_dir_all(out).map_err(|e| RunError::Failure(format!("cannot create {}: {e}", out.display())))?;
    let mut files = Vec::new();
    let mut write = |name: &str, body: String| -> Result<(), RunError> {
        let p = out.join(name);
        write_atomic(&p, body.as_bytes()).map_err(|e| RunError::Failure(format!("cannot write {}: {e}", p.display())))?;
        files.push(p);
        Ok(())
    };
    for (name, body) in &artifacts.tables {
        write(name, format!("{}{}", provenance(&hash, seed), body))?;
    }
    if let Some(report) = &artifacts.report {
        write("validation.txt", format!("{}{}", provenance(&hash, seed), report))?;
    }
    if cfg.plots {
        for (name, svg) in artifacts.plots {
            write(&name, svg)?;
        }
    }
    Ok(RunOutcome {
        files,
        passed: artifacts.passed,
        summary: artifacts.summary,
    })
}

struct Artifacts {
    /// CSV bodies (column header and rows) by file name.
    tables: Vec<(String, String)>,
    report: Option<String>,
    plots: Vec<(String, String)>,
    passed: bool,
    summary: Vec<String>,
}

impl Artifacts {
    fn tables(tables: Vec<(&str, Table)>, plots: Vec<(String, String)>, summary: Vec<String>) -> Self {
        Self {
            tables: tables.into_iter().map(|(n, t)| (n.to_string(), t.body())).collect(),
            report: None,
            plots,
            passed: true,
            summary,
        }
    }
}

fn beta_of(cfg: &RunConfig) -> Result<&BetaVector, RunError> {
    cfg.beta
        .as_ref()
        .ok_or_else(|| RunError::Parameter("beta: missing required key".into()))
}

fn domain_of(cfg: &RunConfig, with_time: bool) -> Result<DomainSpec, RunError> {
    let d = DomainSpec::new(cfg.domain_lower.clone(), cfg.domain_upper.clone(), cfg.domain_cells.clone())?;
    Ok(if with_time { d.with_time(cfg.horizon, cfg.steps)? } else { d })
}

fn replica_seeds(cfg: &RunConfig, seed: u64) -> Vec<u64> {
    (0..cfg.replicas as u64).map(|i| derive_seed(seed, i)).collect()
}

/// Value columns: a single realization, or the ensemble mean with variance and standard error.
fn value_columns(replicas: usize) -> Vec<&'static str> {
    if replicas > 1 {
        vec!["value", "variance", "stderr"]
    } else {
        vec!["value"]
    }
}

fn simulate_field(cfg: &RunConfig, seed: u64) -> Result<Artifacts, RunError> {
    let beta = beta_of(cfg)?;
    let lattice = cfg.field.as_ref().ok_or_else(|| RunError::Parameter("field.upper: missing required key".into()))?;
    let d = beta.dim();
    let past = cfg.past.unwrap_or(DEFAULT_FIELD_PAST);
    let tail = tail_fraction(beta, &lattice.upper, past);
    let source = GridSpec::new(lattice.lower.iter().map(|_| -past).collect(), lattice.upper.clone(), vec![1; d])?;
    let points = lattice.points();
    let runs = replica_seeds(cfg, seed)
        .into_par_iter()
        .map(|s| sample_field(&cfg.model, beta, &points, &source, s).map(|r| r.values))
        .collect::<Result<Vec<_>, Error>>()?;
    let (mean, var) = moments(&runs);
    let mut cols: Vec<String> = (1..=d).map(|k| format!("t{k}")).collect();
    cols.extend(value_columns(cfg.replicas).into_iter().map(String::from));
    let mut table = Table {
        columns: cols,
        rows: Vec::new(),
    };
    for (i, p) in points.iter().enumerate() {
        let mut row = p.clone();
        push_values(&mut row, cfg.replicas, mean[i], var[i]);
        table.rows.push(row);
    }
    let mut plots = Vec::new();
    match d {
        1 => plots.push(("field.svg".into(), line_svg("field", &points.iter().map(|p| p[0]).collect::<Vec<_>>(), &mean))),
        2 => plots.push((
            "field.svg".into(),
            heatmap_svg("field", lattice.cells[0] + 1, lattice.cells[1] + 1, &mean),
        )),
        _ => {}
    }
    let summary = vec![format!(
        "simulate-field: {} points, {} replicas, past truncation {past} (variance tail fraction {tail:.3e} at the upper corner)",
        points.len(),
        cfg.replicas
    )];
    Ok(Artifacts::tables(vec![("field.csv", table)], plots, summary))
}

fn moments(runs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = runs.len() as f64;
    let len = runs[0].len();
    let mut mean = vec![0.0; len];
    for r in runs {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; len];
    if runs.len() > 1 {
        for r in runs {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        var.iter_mut().for_each(|s| *s /= n - 1.0);
    }
    (mean, var)
}

fn push_values(row: &mut Vec<f64>, replicas: usize, mean: f64, var: f64) {
    row.push(mean);
    if replicas > 1 {
        row.push(var);
        row.push((var / replicas as f64).sqrt());
    }
}

/// Rows `[t,] x_1..x_d, value[, variance, stderr]` over all nodes of `u`.
fn solution_table(u: &SolutionField, replicas: usize) -> Table {
    let dom = &u.domain;
    let d = dom.dim();
    let mut cols: Vec<String> = Vec::new();
    if !u.times.is_empty() {
        cols.push("t".into());
    }
    cols.extend((1..=d).map(|k| format!("x{k}")));
    cols.extend(value_columns(replicas).into_iter().map(String::from));
    let shape = dom.full_shape();
    let n = dom.full_len();
    let levels = u.times.len().max(1);
    let mut rows = Vec::with_capacity(levels * n);
    for m in 0..levels {
        for flat in 0..n {
            let mut row = Vec::with_capacity(cols.len());
            if !u.times.is_empty() {
                row.push(u.times[m]);
            }
            let mut rem = flat;
            let mut idx = vec![0; d];
            for k in (0..d).rev() {
                idx[k] = rem % shape[k];
                rem /= shape[k];
            }
            row.extend((0..d).map(|k| dom.node(k, idx[k])));
            let i = m * n + flat;
            let var = u.ensemble.as_ref().map_or(0.0, |e| e.variance[i]);
            push_values(&mut row, replicas, u.values[i], var);
            rows.push(row);
        }
    }
    Table { columns: cols, rows }
}

fn solution_plot(name: &str, u: &SolutionField) -> Vec<(String, String)> {
    let dom = &u.domain;
    let last = u.last_slice();
    match dom.dim() {
        1 => vec![(format!("{name}.svg"), line_svg(name, &dom.nodes(0), last))],
        2 => vec![(
            format!("{name}.svg"),
            heatmap_svg(name, dom.cells[0] + 1, dom.cells[1] + 1, last),
        )],
        _ => Vec::new(),
    }
}

fn ensemble(fields: Vec<SolutionField>) -> Result<SolutionField, RunError> {
    if fields.len() == 1 {
        return Ok(fields.into_iter().next().expect("one field"));
    }
    Ok(SolutionField::ensemble_of(&fields)?)
}

fn solve_poisson_cmd(cfg: &RunConfig, seed: u64) -> Result<Artifacts, RunError> {
    let beta = beta_of(cfg)?;
    let dom = domain_of(cfg, false)?;
    let past = cfg.past.unwrap_or(DEFAULT_POISSON_PAST);
    let grid = GridSpec::new(
        dom.lower.iter().map(|l| l - past).collect(),
        dom.upper.clone(),
        vec![1; dom.dim()],
    )?;
    let fields = replica_seeds(cfg, seed)
        .into_par_iter()
        .map(|s| solve_poisson(&cfg.model.sample_noise_grid(&grid, s)?, beta, &dom))
        .collect::<Result<Vec<_>, Error>>()?;
    let residual = fields.iter().filter_map(|f| f.residual).fold(0.0f64, f64::max);
    let u = ensemble(fields)?;
    let summary = vec![format!(
        "solve-poisson: {} replicas, max discrete residual {residual:.3e}",
        cfg.replicas
    )];
    Ok(Artifacts::tables(
        vec![("poisson.csv", solution_table(&u, cfg.replicas))],
        solution_plot("poisson", &u),
        summary,
    ))
}

fn solve_heat_cmd(cfg: &RunConfig, seed: u64) -> Result<Artifacts, RunError> {
    let beta = beta_of(cfg)?;
    let dom = domain_of(cfg, true)?;
    let past = cfg.past.unwrap_or(DEFAULT_HEAT_PAST);
    let grid = heat_noise_grid(&dom, past, past)?;
    let forced = if cfg.forcing != 0.0 {
        Some(solve_heat_deterministic(&dom, |_, _| cfg.forcing, cfg.scheme)?)
    } else {
        None
    };
    let fields = replica_seeds(cfg, seed)
        .into_par_iter()
        .map(|s| {
            let mut u = solve_heat_with(&cfg.model.sample_noise_grid(&grid, s)?, cfg.beta0, beta, &dom, cfg.scheme)?;
            if let Some(f) = &forced {
                u.values.iter_mut().zip(&f.values).for_each(|(a, b)| *a += b);
            }
            Ok(u)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let u = ensemble(fields)?;
    let mut summary = vec![format!("solve-heat: {} replicas, {} time steps", cfg.replicas, dom.steps)];
    summary.extend(cfg.warnings.iter().map(|w| format!("warning: {}", with_anchor(w.clone()))));
    Ok(Artifacts::tables(
        vec![("heat.csv", solution_table(&u, cfg.replicas))],
        solution_plot("heat", &u),
        summary,
    ))
}

fn initial_condition(cfg: &RunConfig, dom: &DomainSpec) -> Result<GridFunction, RunError> {
    let grid = GridSpec::new(dom.lower.clone(), dom.upper.clone(), dom.cells.clone())?;
    Ok(match cfg.initial {
        InitialCondition::Zero => GridFunction::zeros(grid),
        InitialCondition::Sine => GridFunction::from_fn(grid, |x| {
            (0..x.len())
                .map(|k| (PI * (x[k] - dom.lower[k]) / (dom.upper[k] - dom.lower[k])).sin())
                .product()
        })?,
    })
}

fn solve_quasilinear_cmd(cfg: &RunConfig, seed: u64) -> Result<Artifacts, RunError> {
    let beta = beta_of(cfg)?;
    let dom = domain_of(cfg, true)?;
    let past = cfg.past.unwrap_or(DEFAULT_HEAT_PAST);
    let f = match cfg.nonlinearity {
        NonlinearityKind::Zero => Nonlinearity::zero(),
        NonlinearityKind::Sine => Nonlinearity::sine(),
        NonlinearityKind::Constant(c) => Nonlinearity::constant(c)?,
    };
    let opts = PicardOptions {
        tol: cfg.picard.tol,
        max_iter: cfg.picard.max_iter,
        mass_tolerance: cfg.picard.mass_tolerance,
        allow_condition_violation: cfg.picard.allow_condition_violation,
        ..PicardOptions::default()
    };
    let u0 = initial_condition(cfg, &dom)?;
    let runs: Vec<(SolutionField, IterationReport)> = replica_seeds(cfg, seed)
        .into_par_iter()
        .map(|s| solve_quasilinear(&f, &u0, &cfg.model, cfg.beta0, beta, &dom, past, s, &opts))
        .collect::<Result<Vec<_>, Error>>()?;
    let mut picard = Table::new(&["replica", "iteration", "difference"]);
    let mut warnings: Vec<String> = Vec::new();
    for (r, (_, rep)) in runs.iter().enumerate() {
        for (j, dj) in rep.differences.iter().enumerate() {
            picard.rows.push(vec![r as f64, j as f64, *dj]);
        }
        for w in &rep.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
    }
    let iters: Vec<usize> = runs.iter().map(|(_, r)| r.iterations()).collect();
    let u = ensemble(runs.into_iter().map(|(u, _)| u).collect())?;
    let mut summary = vec![format!(
        "solve-quasilinear: {} replicas, picard iterations {}..={}",
        cfg.replicas,
        iters.iter().min().unwrap_or(&0),
        iters.iter().max().unwrap_or(&0)
    )];
    summary.extend(warnings.into_iter().map(|w| format!("warning: {}", with_anchor(w))));
    Ok(Artifacts::tables(
        vec![
            ("quasilinear.csv", solution_table(&u, cfg.replicas)),
            ("picard.csv", picard),
        ],
        solution_plot("quasilinear", &u),
        summary,
    ))
}

fn validate_cmd(cfg: &RunConfig, seed: u64) -> Result<Artifacts, RunError> {
    let suite = SuiteConfig {
        seed,
        replicas: cfg.validate.replicas,
        heat_replicas: cfg.validate.heat_replicas,
        contrast_replicas: cfg.validate.contrast_replicas,
    };
    let reports = default_suite(&suite)?;
    Ok(validation_artifacts(&reports))
}

fn validation_artifacts(reports: &[ValidationReport]) -> Artifacts {
    let mut csv = String::new();
    csv.push_str(ValidationReport::CSV_HEADER);
    csv.push('\n');
    for r in reports {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    let report: String = reports.iter().map(|r| r.record()).collect::<Vec<_>>().join("\n");
    let summary = reports
        .iter()
        .map(|r| {
            format!(
                "{} {} estimate={:.6e} oracle={:.6e} bound={:.3e}",
                if r.pass { "PASS" } else { "FAIL" },
                r.check,
                r.estimate,
                r.oracle,
                r.bound.width()
            )
        })
        .collect();
    Artifacts {
        tables: vec![("validation.csv".into(), csv)],
        report: Some(report),
        plots: Vec::new(),
        passed: reports.iter().all(|r| r.pass),
        summary,
    }
}
