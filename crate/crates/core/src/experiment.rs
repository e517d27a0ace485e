//! Config-driven experiment runner behind the `hyperbreg` binary.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::Error;
use crate::expr::CompiledExpr;
use crate::galerkin;
use crate::regularity::{self, compatible_initial_values};
use crate::time::{fd_time_derivative, TimeGrid};
use crate::triple::validate_problem;
use crate::waveq1d::{self, CoefficientField, Mesh1D, SpaceTimeFunction, WaveData};

pub const MAX_LEVEL: usize = 4;
pub const MAX_LIN_TOL: f64 = 1e-4;
pub const THREADS_ENV: &str = "HYPERBREG_THREADS";
pub const REPORT_FILE: &str = "report.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Derivatives,
    Compat,
    FrechetTest,
    Convergence,
    Energy,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Solve,
        Command::Derivatives,
        Command::Compat,
        Command::FrechetTest,
        Command::Convergence,
        Command::Energy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Derivatives => "derivatives",
            Command::Compat => "compat",
            Command::FrechetTest => "frechet-test",
            Command::Convergence => "convergence",
            Command::Energy => "energy",
        }
    }

    pub fn parse(name: &str) -> Option<Command> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn header(self) -> &'static str {
        match self {
            Command::Solve => "m,N,u_T_norm_H,u_T_norm_V,du_T_norm_H,sup_norm_V_u,sup_norm_H_du",
            Command::Derivatives => "m,N,level,norm_LinfV,norm_LinfH_deriv,fd_consistency",
            Command::Compat => "m,level,norm_V",
            Command::FrechetTest => "m,N,eps,remainder,first_order_remainder,slope",
            Command::Convergence => "m,N,err_LinfH,observed_order",
            Command::Energy => "m,N,level,sup_V_energy,sup_H_energy_deriv,data_norm,lambda_observed",
        }
    }

    fn needs_steps(self) -> bool {
        self != Command::Compat
    }
}

/// Inline case given by expressions in `t` and `x`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineCase {
    pub coefficient: String,
    pub lower_bound: f64,
    #[serde(default = "zero_expr")]
    pub source: String,
    pub initial_u: String,
    #[serde(default = "zero_expr")]
    pub initial_v: String,
    pub exact: Option<String>,
}

fn zero_expr() -> String {
    "0".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum CaseSpec {
    Named(String),
    Inline(InlineCase),
}

fn default_lin_tol() -> f64 {
    1e-10
}

fn default_eps() -> Vec<f64> {
    vec![1e-1, 3e-2, 1e-2]
}

fn default_perturbation() -> String {
    "sin(pi*x)*(1+t)".into()
}

fn default_horizon() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub case: CaseSpec,
    #[serde(default)]
    pub k: usize,
    pub mesh_sizes: Vec<usize>,
    #[serde(default)]
    pub step_counts: Vec<usize>,
    #[serde(default = "default_lin_tol")]
    pub lin_tol: f64,
    #[serde(default = "default_eps")]
    pub eps_list: Vec<f64>,
    #[serde(default = "default_perturbation")]
    pub perturbation: String,
    /// Horizon of inline cases; fixtures use their own.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path)
            .map_err(|e| RunError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let invalid = |msg: String| Err(RunError::Invalid(msg));
        if self.mesh_sizes.is_empty() {
            return invalid("mesh_sizes must not be empty".into());
        }
        if self.mesh_sizes.contains(&0) {
            return invalid("mesh sizes must be positive".into());
        }
        if self.command.needs_steps() {
            if self.step_counts.is_empty() {
                return invalid("step_counts must not be empty".into());
            }
            if self.step_counts.len() != self.mesh_sizes.len() {
                return invalid(format!(
                    "mesh_sizes has {} entries but step_counts has {}",
                    self.mesh_sizes.len(),
                    self.step_counts.len()
                ));
            }
            if self.step_counts.contains(&0) {
                return invalid("step counts must be positive".into());
            }
        }
        if !(self.lin_tol > 0.0 && self.lin_tol <= MAX_LIN_TOL) {
            return invalid(format!("lin_tol {} outside (0, {MAX_LIN_TOL:e}]", self.lin_tol));
        }
        if self.k > MAX_LEVEL {
            return invalid(format!("k = {} exceeds {MAX_LEVEL}", self.k));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return invalid(format!("horizon {} must be positive", self.horizon));
        }
        if self.command == Command::FrechetTest {
            if self.eps_list.len() < 3 {
                return invalid("eps_list needs at least three entries".into());
            }
            if self.eps_list.iter().any(|e| !(*e > 0.0)) || self.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
                return invalid("eps_list must be positive and strictly decreasing".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
pub enum RunError {
    /// Rejected input; exit code 2.
    Invalid(String),
    /// Failure while solving or writing; exit code 1.
    Solver(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invalid(_) => 2,
            RunError::Solver(_) => 1,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Invalid(msg) => write!(f, "invalid input: {msg}"),
            RunError::Solver(msg) => write!(f, "solver failure: {msg}"),
        }
    }
}

impl std::error::Error for RunError {}

/// Solver breakdowns exit 1; everything else is a validation failure.
pub fn classify(e: Error) -> RunError {
    match e {
        Error::LinearSolve { .. } | Error::NotPositiveDefinite(_) => RunError::Solver(e.to_string()),
        other => RunError::Invalid(other.to_string()),
    }
}

fn solver(e: Error) -> RunError {
    RunError::Solver(e.to_string())
}

/// A resolved case: wave data plus the exact solution when known.
#[derive(Clone, Debug)]
pub struct ResolvedCase {
    pub data: WaveData,
    pub exact: Option<SpaceTimeFunction>,
}

pub fn resolve_case(case_spec: &CaseSpec, horizon: f64) -> Result<ResolvedCase, RunError> {
    match case_spec {
        CaseSpec::Named(name) => {
            let case = waveq1d::manufactured_case(name).map_err(|e| RunError::Invalid(e.to_string()))?;
            Ok(ResolvedCase {
                data: case.data,
                exact: Some(case.exact),
            })
        }
        CaseSpec::Inline(inline) => {
            let compile = |src: &str| CompiledExpr::new(src).map_err(|e| RunError::Invalid(e.to_string()));
            let coefficient = CoefficientField::new(compile(&inline.coefficient)?.into_field(), inline.lower_bound)
                .map_err(|e| RunError::Invalid(e.to_string()))?;
            let u0 = compile(&inline.initial_u)?;
            let u1 = compile(&inline.initial_v)?;
            let exact = match &inline.exact {
                Some(src) => Some(compile(src)?.into_field()),
                None => None,
            };
            Ok(ResolvedCase {
                data: WaveData {
                    coefficient,
                    source: compile(&inline.source)?.into_field(),
                    u0: Arc::new(move |x| u0.eval(0.0, 0, x)),
                    u1: Arc::new(move |x| u1.eval(0.0, 0, x)),
                    horizon,
                },
                exact,
            })
        }
    }
}

fn fmt_float(v: f64) -> String {
    format!("{v:.11e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// One sweep entry's rows, before observed orders are filled in.
enum Rows {
    Lines(Vec<String>),
    Error { m: usize, n: usize, h: f64, err: f64 },
}

/// Runs `cfg` and writes `out_dir/report.csv`; returns the report path.
///
/// Nothing is written unless every sweep entry succeeds.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf, RunError> {
    cfg.validate()?;
    let case = resolve_case(&cfg.case, cfg.horizon)?;
    if cfg.command == Command::Convergence && case.exact.is_none() {
        return Err(RunError::Invalid("convergence needs an exact solution".into()));
    }
    let perturbation = if cfg.command == Command::FrechetTest {
        Some(
            CompiledExpr::new(&cfg.perturbation)
                .map_err(|e| RunError::Invalid(e.to_string()))?
                .into_field(),
        )
    } else {
        None
    };
    let threads = thread_count()?;

    // assemble and validate every entry before solving anything
    let mut entries = Vec::with_capacity(cfg.mesh_sizes.len());
    for (i, &m) in cfg.mesh_sizes.iter().enumerate() {
        let mesh = Mesh1D::new(m).map_err(classify)?;
        let problem = waveq1d::assemble_wave_problem(&mesh, &case.data).map_err(classify)?;
        let report = validate_problem(&problem);
        if !report.is_empty() {
            return Err(RunError::Invalid(format!("m = {m}: {report}")));
        }
        let grid = match cfg.command.needs_steps() {
            true => Some(TimeGrid::new(case.data.horizon, cfg.step_counts[i]).map_err(classify)?),
            false => None,
        };
        entries.push((mesh, problem, grid));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Solver(e.to_string()))?;
    let results: Vec<Rows> = pool.install(|| {
        entries
            .par_iter()
            .map(|(mesh, p, grid)| run_entry(cfg, &case, perturbation.as_ref(), mesh, p, *grid))
            .collect::<Result<Vec<_>, RunError>>()
    })?;

    let mut csv = String::new();
    csv.push_str(cfg.command.header());
    csv.push('\n');
    let mut prev: Option<(f64, f64)> = None;
    for rows in results {
        match rows {
            Rows::Lines(lines) => {
                for line in lines {
                    csv.push_str(&line);
                    csv.push('\n');
                }
            }
            Rows::Error { m, n, h, err } => {
                let order = prev.map(|(e0, h0)| waveq1d::observed_order(e0, err, h0, h));
                prev = Some((err, h));
                writeln!(csv, "{m},{n},{},{}", fmt_float(err), fmt_opt(order)).unwrap();
            }
        }
    }
    write_atomically(out_dir, REPORT_FILE, csv.as_bytes())
}

fn thread_count() -> Result<usize, RunError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(RunError::Invalid(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(0),
    }
}

fn write_atomically(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, RunError> {
    let io = |e: std::io::Error| RunError::Solver(format!("writing report: {e}"));
    fs::create_dir_all(dir).map_err(io)?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    fs::rename(&tmp, &target).map_err(io)?;
    Ok(target)
}

fn run_entry(
    cfg: &ExperimentConfig,
    case: &ResolvedCase,
    perturbation: Option<&SpaceTimeFunction>,
    mesh: &Mesh1D,
    p: &crate::triple::ProblemData,
    grid: Option<TimeGrid>,
) -> Result<Rows, RunError> {
    let m = mesh.dim();
    let gram_h = p.space.gram_h();
    let gram_v = p.space.gram_v();
    let mut lines = Vec::new();
    match cfg.command {
        Command::Compat => {
            let ivs = compatible_initial_values(p, cfg.k).map_err(classify)?;
            for (level, u) in ivs.values.iter().enumerate() {
                lines.push(format!("{m},{level},{}", fmt_float(p.space.norm_v(u))));
            }
        }
        Command::Solve => {
            let grid = grid.unwrap();
            let sol = galerkin::solve_forward(p, grid, cfg.lin_tol).map_err(solver)?;
            lines.push(format!(
                "{m},{},{},{},{},{},{}",
                grid.steps(),
                fmt_float(p.space.norm_h(sol.u.last())),
                fmt_float(p.space.norm_v(sol.u.last())),
                fmt_float(p.space.norm_h(sol.du.last())),
                fmt_float(sol.u.max_norm(gram_v)),
                fmt_float(sol.du.max_norm(gram_h)),
            ));
        }
        Command::Derivatives => {
            let grid = grid.unwrap();
            let out = regularity::solve_derivative(p, cfg.k, grid, cfg.lin_tol).map_err(classify)?;
            for kappa in (0..=cfg.k).rev() {
                let sol = out.level(kappa);
                let consistency = if kappa < cfg.k {
                    let fd = fd_time_derivative(&sol.u).map_err(classify)?;
                    let upper = &out.level(kappa + 1).u;
                    let diff = upper.sub(&fd).map_err(solver)?.l2_norm(gram_h);
                    let scale = upper.l2_norm(gram_h);
                    Some(if scale > 0.0 { diff / scale } else { diff })
                } else {
                    None
                };
                lines.push(format!(
                    "{m},{},{kappa},{},{},{}",
                    grid.steps(),
                    fmt_float(sol.u.max_norm(gram_v)),
                    fmt_float(sol.du.max_norm(gram_h)),
                    fmt_opt(consistency),
                ));
            }
        }
        Command::Energy => {
            let grid = grid.unwrap();
            let out = regularity::solve_derivative(p, cfg.k, grid, cfg.lin_tol).map_err(classify)?;
            for r in &out.reports {
                lines.push(format!(
                    "{m},{},{},{},{},{},{}",
                    grid.steps(),
                    r.level,
                    fmt_float(r.sup_v_energy),
                    fmt_float(r.sup_h_energy_deriv),
                    fmt_float(r.data_norm),
                    fmt_float(r.lambda_observed),
                ));
            }
        }
        Command::FrechetTest => {
            let grid = grid.unwrap();
            let rows = waveq1d::taylor_test(mesh, &case.data, perturbation.unwrap(), grid, &cfg.eps_list, cfg.lin_tol)
                .map_err(classify)?;
            for r in rows {
                lines.push(format!(
                    "{m},{},{},{},{},{}",
                    grid.steps(),
                    fmt_float(r.eps),
                    fmt_float(r.remainder),
                    fmt_float(r.first_order_remainder),
                    fmt_opt(r.slope),
                ));
            }
        }
        Command::Convergence => {
            let grid = grid.unwrap();
            let exact = case.exact.as_ref().unwrap();
            let out = regularity::solve_derivative(p, cfg.k, grid, cfg.lin_tol).map_err(classify)?;
            let err = waveq1d::linf_h_error(mesh, &out.level(cfg.k).u, exact, cfg.k).map_err(solver)?;
            return Ok(Rows::Error {
                m,
                n: grid.steps(),
                h: mesh.h(),
                err,
            });
        }
    }
    Ok(Rows::Lines(lines))
}
