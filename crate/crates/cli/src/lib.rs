//! Convergence studies over mesh sequences, and mesh audits.
//!
//! A study config is a TOML file:
//!
//! ```toml
//! problem = "poisson"          # or "interface"
//! k = 2
//! solution = "sinsin"
//! meshes = ["level0.wgpm", "level1.wgpm", "level2.wgpm"]
//! beta1 = 1.0
//! beta2 = 1.0
//!
//! [solver]
//! rel_tol = 1e-12
//! max_iter = 200000
//!
//! [output]
//! csv = "study.csv"
//! table = "study.txt"
//! ```
//!
//! Relative paths are taken relative to the config file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;
use wgfem::analysis::{
    catalog, error_norms, observed_orders, ErrorReport, ObservedOrders, CATALOG,
};
use wgfem::assembly::{discretize, ProblemKind};
use wgfem::geometry::validate_mesh;
use wgfem::mesh_io::read_mesh;
use wgfem::solver::{solve_system, SolveOptions, SolveReport};
use wgfem::space::WeakSpace;

pub const CSV_HEADER: &str =
    "level,h,dofs,e_grad_weak,e_grad_interior,e_l2,eoc_grad_weak,eoc_grad_interior,eoc_l2";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Config(_) => 4,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub rel_tol: f64,
    #[serde(default)]
    pub max_iter: Option<usize>,
}

fn default_tol() -> f64 {
    wgfem::solver::DEFAULT_REL_TOL
}

fn default_beta() -> f64 {
    1.0
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tol: default_tol(),
            max_iter: None,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub table: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub problem: String,
    pub k: usize,
    pub meshes: Vec<PathBuf>,
    pub solution: String,
    #[serde(default = "default_beta")]
    pub beta1: f64,
    #[serde(default = "default_beta")]
    pub beta2: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Command-line values that replace config fields.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub k: Option<usize>,
    pub problem: Option<String>,
    pub solution: Option<String>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
}

impl StudyConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut config: StudyConfig = toml::from_str(text)
            .map_err(|e| CliError::Config(format!("config: {}", e.message())))?;
        for m in &mut config.meshes {
            *m = base.join(&*m);
        }
        if let Some(p) = &mut config.output.csv {
            *p = base.join(&*p);
        }
        if let Some(p) = &mut config.output.table {
            *p = base.join(&*p);
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(k) = o.k {
            self.k = k;
        }
        if let Some(p) = o.problem {
            self.problem = p;
        }
        if let Some(s) = o.solution {
            self.solution = s;
        }
        if let Some(b) = o.beta1 {
            self.beta1 = b;
        }
        if let Some(b) = o.beta2 {
            self.beta2 = b;
        }
        if let Some(t) = o.tol {
            self.solver.rel_tol = t;
        }
        if let Some(p) = o.out {
            self.output.csv = Some(p);
        }
    }

    pub fn kind(&self) -> Result<ProblemKind, CliError> {
        match self.problem.as_str() {
            "poisson" => Ok(ProblemKind::Poisson),
            "interface" => Ok(ProblemKind::Interface),
            other => Err(CliError::Config(format!(
                "unknown problem kind '{other}' (expected poisson or interface)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.k < 1 {
            return Err(CliError::Config(format!(
                "polynomial degree must satisfy k >= 1 (got k = {})",
                self.k
            )));
        }
        if self.meshes.is_empty() {
            return Err(CliError::Config("mesh list is empty".into()));
        }
        if !(self.beta1 > 0.0 && self.beta2 > 0.0) {
            return Err(CliError::Config(format!(
                "diffusion coefficients must be positive (beta1 = {}, beta2 = {})",
                self.beta1, self.beta2
            )));
        }
        if !(self.solver.rel_tol > 0.0 && self.solver.rel_tol < 1.0) {
            return Err(CliError::Config(format!(
                "solver tolerance {} outside (0, 1)",
                self.solver.rel_tol
            )));
        }
        let kind = self.kind()?;
        let sol = catalog(&self.solution, self.beta1, self.beta2).map_err(|_| {
            CliError::Config(format!(
                "unknown solution '{}' (available: {})",
                self.solution,
                CATALOG.join(", ")
            ))
        })?;
        if sol.is_interface() != (kind == ProblemKind::Interface) {
            return Err(CliError::Config(format!(
                "solution '{}' does not belong to problem kind '{}'",
                self.solution, self.problem
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub levels: Vec<ErrorReport>,
    pub solves: Vec<SolveReport>,
    pub orders: Option<ObservedOrders>,
}

fn num(x: f64) -> String {
    format!("{x:.10e}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| format!("{v:.6}"))
}

impl StudyReport {
    fn eoc(&self, level: usize) -> [Option<f64>; 3] {
        match (&self.orders, level) {
            (Some(o), l) if l > 0 => [o.grad_weak[l - 1], o.grad_interior[l - 1], o.l2[l - 1]],
            _ => [None; 3],
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for (i, r) in self.levels.iter().enumerate() {
            let [a, b, c] = self.eoc(i);
            let _ = writeln!(
                s,
                "{i},{},{},{},{},{},{},{},{}",
                num(r.h),
                r.dofs,
                num(r.e_grad_weak),
                num(r.e_grad_interior),
                num(r.e_l2),
                opt(a),
                opt(b),
                opt(c)
            );
        }
        s
    }

    pub fn to_table(&self) -> String {
        let c = &self.config;
        let mut s = format!(
            "{} study, k = {}, solution {}, beta = ({}, {})\n",
            c.problem, c.k, c.solution, c.beta1, c.beta2
        );
        let _ = writeln!(
            s,
            "{:>5} {:>11} {:>8} {:>6} {:>12} {:>6} {:>12} {:>6} {:>12} {:>6}",
            "level", "h", "dofs", "cg", "grad_weak", "eoc", "grad_int", "eoc", "l2", "eoc"
        );
        for (i, r) in self.levels.iter().enumerate() {
            let [a, b, e] = self.eoc(i);
            let o = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.2}"));
            let _ = writeln!(
                s,
                "{:>5} {:>11.4e} {:>8} {:>6} {:>12.4e} {:>6} {:>12.4e} {:>6} {:>12.4e} {:>6}",
                i,
                r.h,
                r.dofs,
                self.solves[i].iterations,
                r.e_grad_weak,
                o(a),
                r.e_grad_interior,
                o(b),
                r.e_l2,
                o(e)
            );
        }
        s
    }
}

/// Runs every level of the study in order and writes the configured
/// outputs.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport, CliError> {
    config.validate()?;
    let sol = catalog(&config.solution, config.beta1, config.beta2)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let spec = sol.problem();
    let opts = SolveOptions {
        rel_tol: config.solver.rel_tol,
        max_iter: config.solver.max_iter,
    };

    let mut levels = Vec::new();
    let mut solves = Vec::new();
    for (l, path) in config.meshes.iter().enumerate() {
        let mesh =
            read_mesh(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let audit = validate_mesh(&mesh);
        if !audit.accepted() {
            let mut msg = format!("mesh {} (level {l}) failed validation:", path.display());
            for v in &audit.violations {
                let _ = write!(msg, "\n  {v}");
            }
            return Err(CliError::Validation(msg));
        }
        spec.validate(&mesh)
            .map_err(|e| CliError::Validation(format!("{} (level {l}): {e}", path.display())))?;
        let invalid = |e: wgfem::WgError| {
            CliError::Validation(format!("{} (level {l}): {e}", path.display()))
        };
        let space = WeakSpace::new(mesh, config.k).map_err(invalid)?;
        let system = discretize(&space, &spec).map_err(invalid)?;
        let (u, report) = solve_system(&system, opts)
            .map_err(|e| CliError::Solver(format!("{} (level {l}): {e}", path.display())))?;
        let errors = error_norms(&space, &sol, &u, &spec).map_err(invalid)?;
        levels.push(errors);
        solves.push(report);
    }
    let orders = if levels.len() >= 2 {
        Some(observed_orders(&levels).map_err(|e| CliError::Validation(e.to_string()))?)
    } else {
        None
    };
    let report = StudyReport {
        config: config.clone(),
        levels,
        solves,
        orders,
    };

    let write = |path: &Path, text: String| {
        std::fs::write(path, text)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
    };
    if let Some(p) = &config.output.csv {
        write(p, report.to_csv())?;
    }
    if let Some(p) = &config.output.table {
        write(p, report.to_table())?;
    }
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct AuditReport {
    pub text: String,
    pub accepted: bool,
}

/// Per-element diameter, chunkiness and area, global mesh size and any
/// violations.
pub fn audit_mesh(path: &Path) -> Result<AuditReport, CliError> {
    let mesh = read_mesh(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let report = validate_mesh(&mesh);
    let mut text = format!(
        "mesh {}: {} vertices, {} edges, {} elements\n",
        path.display(),
        mesh.vertices.len(),
        mesh.edges.len(),
        mesh.elements.len()
    );
    for (e, m) in report.metrics.iter().enumerate() {
        match m {
            Some(g) => {
                let _ = writeln!(
                    text,
                    "element {e}: h_D = {:.6e}, rho = {:.6}, area = {:.6e}",
                    g.diameter, g.rho, g.area
                );
            }
            None => {
                let _ = writeln!(text, "element {e}: no metrics");
            }
        }
    }
    let _ = writeln!(
        text,
        "rho in [{:.6}, {:.6}]",
        report.min_rho, report.max_rho
    );
    let _ = writeln!(text, "h = {}", report.h);
    for v in &report.violations {
        let _ = writeln!(text, "violation: {v}");
    }
    let accepted = report.accepted();
    let _ = writeln!(text, "{}", if accepted { "accepted" } else { "rejected" });
    Ok(AuditReport { text, accepted })
}
