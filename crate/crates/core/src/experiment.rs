//! Parameter sweeps over refinement levels and coefficient jumps, with the
//! iteration-count table they produce.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::al::{
    run_solver, InnerSolver, PrecVariant, PreconditionerSpec, WMode, DEFAULT_GAMMA, DEFAULT_GAMMA1,
    DEFAULT_GAMMA2,
};
use crate::error::{Error, Result};
use crate::fem::{
    build_saddle_system, BoundaryCondition, Forcing, Geometry, ProblemConfig, Refinement,
    DEFAULT_QUAD_ORDER,
};
use crate::io::{ScatterPlot, Series};

/// Outer and inner solver settings; unset fields keep the variant defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub restart: Option<usize>,
    pub maxit: Option<usize>,
    pub inner_rtol: Option<f64>,
    pub inner_maxit: Option<usize>,
}

/// File names, relative to the output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub table: String,
    pub timings: String,
    pub iterations_plot: Option<String>,
    pub timings_plot: Option<String>,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            table: "table.csv".into(),
            timings: "timings.csv".into(),
            iterations_plot: Some("iterations.svg".into()),
            timings_plot: Some("timings.svg".into()),
        }
    }
}

fn default_name() -> String {
    "experiment".into()
}

fn one() -> f64 {
    1.0
}

fn default_quad() -> usize {
    DEFAULT_QUAD_ORDER
}

/// A sweep of one preconditioner over refinement levels and `β₂` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub geometry: Geometry,
    /// `(background, immersed)` pairs; the immersed entry is the disk
    /// refinement level for the disk geometry.
    pub refinement_levels: Vec<(usize, usize)>,
    #[serde(default = "one")]
    pub beta: f64,
    pub beta2_list: Vec<f64>,
    pub variant: PrecVariant,
    /// `γ` of the ideal and inexact preconditioners.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub gamma1: Option<f64>,
    #[serde(default)]
    pub gamma2: Option<f64>,
    /// Second `γ₂` tried at the smallest `β₂`, shown in parentheses.
    #[serde(default)]
    pub gamma2_fallback: Option<f64>,
    #[serde(default)]
    pub w_mode: Option<WMode>,
    #[serde(default)]
    pub inner: Option<InnerSolver>,
    #[serde(default)]
    pub forcing: Forcing,
    #[serde(default)]
    pub bc: BoundaryCondition,
    #[serde(default = "default_quad")]
    pub quad_order: usize,
    #[serde(default)]
    pub mesh_ratio_bounds: Option<(f64, f64)>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub outputs: Outputs,
    /// Nonconvergence makes the driver exit with a failure status.
    #[serde(default)]
    pub fail_on_nonconvergence: bool,
}

impl ExperimentConfig {
    /// A sweep with default parameters.
    pub fn new(
        geometry: Geometry,
        refinement_levels: Vec<(usize, usize)>,
        beta2_list: Vec<f64>,
        variant: PrecVariant,
    ) -> Self {
        Self {
            name: default_name(),
            geometry,
            refinement_levels,
            beta: 1.0,
            beta2_list,
            variant,
            gamma: None,
            gamma1: None,
            gamma2: None,
            gamma2_fallback: None,
            w_mode: None,
            inner: None,
            forcing: Forcing::default(),
            bc: BoundaryCondition::default(),
            quad_order: DEFAULT_QUAD_ORDER,
            mesh_ratio_bounds: None,
            tolerances: Tolerances::default(),
            outputs: Outputs::default(),
            fail_on_nonconvergence: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// Problem for one level and `β₂`.
    pub fn problem(&self, level: (usize, usize), beta2: f64) -> ProblemConfig {
        ProblemConfig {
            geometry: self.geometry,
            refinement: Refinement::new(level.0, level.1),
            beta: self.beta,
            beta2,
            forcing: self.forcing,
            bc: self.bc,
            quad_order: self.quad_order,
            mesh_ratio_bounds: self.mesh_ratio_bounds,
        }
    }

    /// Preconditioner for the main column entries, with `γ₂` replaced by
    /// `gamma2` when given.
    pub fn spec(&self, gamma2: Option<f64>) -> PreconditionerSpec {
        let mut s = match self.variant {
            PrecVariant::IdealAl => {
                PreconditionerSpec::ideal_al(self.gamma.unwrap_or(DEFAULT_GAMMA))
            }
            PrecVariant::InexactAl => {
                PreconditionerSpec::inexact_al(self.gamma.unwrap_or(DEFAULT_GAMMA))
            }
            PrecVariant::MalDiag => PreconditionerSpec::mal_diag(
                self.gamma1.unwrap_or(DEFAULT_GAMMA1),
                gamma2.or(self.gamma2).unwrap_or(DEFAULT_GAMMA2),
            ),
            PrecVariant::BaselineTriangular => PreconditionerSpec::baseline(),
            PrecVariant::None => {
                let mut s = PreconditionerSpec::unpreconditioned();
                s.gamma1 = self.gamma1.or(self.gamma).unwrap_or(0.0);
                s.gamma2 = gamma2.or(self.gamma2).or(self.gamma).unwrap_or(0.0);
                s
            }
        };
        if let Some(w) = self.w_mode {
            s.w_mode = w;
        }
        if let Some(inner) = self.inner {
            s.inner = inner;
        }
        let t = &self.tolerances;
        s.outer.rtol = t.rtol.unwrap_or(s.outer.rtol);
        s.outer.atol = t.atol.unwrap_or(s.outer.atol);
        s.outer.restart = t.restart.unwrap_or(s.outer.restart);
        s.outer.maxit = t.maxit.unwrap_or(s.outer.maxit);
        s.inner_rtol = t.inner_rtol.unwrap_or(s.inner_rtol);
        s.inner_maxit = t.inner_maxit.unwrap_or(s.inner_maxit);
        s
    }

    /// Checks parameters, every `β₂ > β` and every mesh pairing.
    pub fn validate(&self) -> Result<()> {
        if self.refinement_levels.is_empty() || self.beta2_list.is_empty() {
            return Err(Error::Config(
                "refinement_levels and beta2_list must be nonempty".into(),
            ));
        }
        let mut sorted = self.beta2_list.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() != self.beta2_list.len() {
            return Err(Error::Config("beta2_list contains duplicates".into()));
        }
        if self.gamma2_fallback.is_some() && self.variant != PrecVariant::MalDiag {
            return Err(Error::Config(
                "gamma2_fallback applies to the mal_diag variant only".into(),
            ));
        }
        self.spec(None).validate()?;
        if let Some(g) = self.gamma2_fallback {
            self.spec(Some(g)).validate()?;
        }
        for &b2 in &self.beta2_list {
            self.problem(self.refinement_levels[0], b2).validate()?;
        }
        for &level in &self.refinement_levels {
            self.problem(level, self.beta2_list[0]).check_mesh_ratio()?;
        }
        Ok(())
    }

    fn smallest_beta2(&self) -> f64 {
        self.beta2_list
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    fn largest_beta2(&self) -> f64 {
        self.beta2_list
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn caption(&self) -> String {
        let s = self.spec(None);
        let gammas = match self.variant {
            PrecVariant::IdealAl | PrecVariant::InexactAl => format!("gamma={}", s.gamma1),
            PrecVariant::BaselineTriangular => "unaugmented".into(),
            _ => format!("gamma1={} gamma2={}", s.gamma1, s.gamma2),
        };
        let fallback = self
            .gamma2_fallback
            .map_or(String::new(), |g| format!(" gamma2_fallback={g}"));
        let forcing = match self.forcing {
            Forcing::Constant { f, f2 } => format!("constant(f={f} f2={f2})"),
            Forcing::SinTanh => "sin_tanh".into(),
        };
        format!(
            "{} {} {} {gammas}{fallback} beta={} forcing={forcing} bc={} restart={} rtol={:e}",
            self.name,
            tag(&self.geometry),
            s.label(),
            self.beta,
            tag(&self.bc),
            s.outer.restart,
            s.outer.rtol
        )
    }
}

/// Configuration name of a unit enum variant.
fn tag<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Outer iteration count of a converged solve, or a failure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Converged(usize),
    Failed,
}

impl Outcome {
    pub fn iterations(self) -> Option<usize> {
        match self {
            Outcome::Converged(k) => Some(k),
            Outcome::Failed => None,
        }
    }
}

/// Marker printed for a solve that did not converge.
pub const DAGGER: &str = "†";

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Converged(k) => write!(f, "{k}"),
            Outcome::Failed => f.write_str(DAGGER),
        }
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            DAGGER => Ok(Outcome::Failed),
            t => t
                .parse()
                .map(Outcome::Converged)
                .map_err(|_| format!("invalid count `{t}`")),
        }
    }
}

/// One table cell: the main count and the optional fallback count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub outcome: Outcome,
    pub fallback: Option<Outcome>,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.fallback {
            Some(fb) => write!(f, "{} ({fb})", self.outcome),
            None => write!(f, "{}", self.outcome),
        }
    }
}

impl FromStr for Cell {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        match s.split_once('(') {
            Some((main, rest)) => {
                let fb = rest
                    .strip_suffix(')')
                    .ok_or_else(|| format!("unbalanced parentheses in `{s}`"))?;
                Ok(Cell {
                    outcome: main.parse()?,
                    fallback: Some(fb.parse()?),
                })
            }
            None => Ok(Cell {
                outcome: s.parse()?,
                fallback: None,
            }),
        }
    }
}

/// One refinement level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    /// `n+m+ℓ`.
    pub dofs: String,
    /// One cell per `β₂`, in configuration order.
    pub cells: Vec<Cell>,
    /// Average inner iterations per application at the largest `β₂`, to two
    /// decimals, for variants with iterative inner solves.
    pub inner_avg: Option<f64>,
}

impl ResultRow {
    pub fn total_dofs(&self) -> usize {
        self.dofs
            .split('+')
            .filter_map(|t| t.parse::<usize>().ok())
            .sum()
    }
}

/// Iteration counts by refinement level (rows) and `β₂` (columns).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub caption: String,
    pub beta2_list: Vec<f64>,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Header fields: `dofs`, one `beta2=…` per column, `inner_avg`.
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["dofs".to_string()];
        h.extend(self.beta2_list.iter().map(|b| format!("beta2={b:e}")));
        h.push("inner_avg".into());
        h
    }

    /// Column of cells for one `β₂` index, top to bottom.
    pub fn column(&self, j: usize) -> Vec<Cell> {
        self.rows.iter().map(|r| r.cells[j]).collect()
    }

    /// CSV with the caption as a leading `#` comment line.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(self.header()).expect("in-memory write");
        for row in &self.rows {
            let mut rec = vec![row.dofs.clone()];
            rec.extend(row.cells.iter().map(Cell::to_string));
            rec.push(row.inner_avg.map_or(String::new(), |v| v.to_string()));
            w.write_record(rec).expect("in-memory write");
        }
        let body =
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields");
        format!("# {}\n{body}", self.caption.replace('\n', " "))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let caption = text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .unwrap_or_default()
            .to_string();
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let line_of = |p: Option<&csv::Position>| p.map_or(0, |p| p.line() as usize);
        let header = r.headers().map_err(|e| Error::Parse {
            line: line_of(e.position()),
            message: e.to_string(),
        })?;
        let hline = line_of(header.position());
        let cols = header.len();
        if cols < 3 || &header[0] != "dofs" || &header[cols - 1] != "inner_avg" {
            return Err(Error::Parse {
                line: hline,
                message: "expected `dofs,beta2=…,inner_avg`".into(),
            });
        }
        let beta2_list = (1..cols - 1)
            .map(|k| {
                header[k]
                    .strip_prefix("beta2=")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Parse {
                        line: hline,
                        message: format!("invalid column `{}`", &header[k]),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Parse {
                line: line_of(e.position()),
                message: e.to_string(),
            })?;
            let line = line_of(rec.position());
            let perr = |message: String| Error::Parse { line, message };
            let cells = (1..cols - 1)
                .map(|k| rec[k].parse::<Cell>().map_err(perr))
                .collect::<Result<Vec<_>>>()?;
            let inner_avg = match rec[cols - 1].trim() {
                "" => None,
                v => Some(
                    v.parse()
                        .map_err(|_| perr(format!("invalid inner average `{v}`")))?,
                ),
            };
            rows.push(ResultRow {
                dofs: rec[0].to_string(),
                cells,
                inner_avg,
            });
        }
        Ok(Self {
            caption,
            beta2_list,
            rows,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Iterations against `β₂` on a logarithmic axis, one series per level.
    pub fn iterations_plot(&self) -> ScatterPlot {
        let mut plot = ScatterPlot::new(self.caption.clone(), "beta2", "outer iterations");
        plot.log_x = true;
        for (k, row) in self.rows.iter().enumerate() {
            let pts = self
                .beta2_list
                .iter()
                .zip(&row.cells)
                .filter_map(|(b, c)| c.outcome.iterations().map(|it| (*b, it as f64)))
                .collect();
            let mut s = Series::scatter(row.dofs.clone(), pts, PALETTE[k % PALETTE.len()]);
            s.line = true;
            plot.series.push(s);
        }
        plot
    }
}

const PALETTE: [&str; 6] = [
    "steelblue",
    "firebrick",
    "seagreen",
    "darkorange",
    "purple",
    "black",
];

/// Everything measured for one solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub level: (usize, usize),
    pub dofs: String,
    pub beta2: f64,
    pub gamma2: f64,
    pub fallback: bool,
    pub outcome: Outcome,
    pub iterations: usize,
    pub true_residual: f64,
    pub inner_avg: f64,
    pub wall_time: f64,
    /// Solver error, when the solve stopped with one.
    pub error: Option<String>,
}

/// Table and per-solve records of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub table: ResultTable,
    pub records: Vec<CellRecord>,
}

impl ExperimentRun {
    pub fn failures(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.outcome == Outcome::Failed)
            .count()
    }

    /// Per-solve records including wall-clock times, as CSV.
    pub fn timings_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record([
            "dofs",
            "beta2",
            "gamma2",
            "fallback",
            "outcome",
            "iterations",
            "true_residual",
            "inner_avg",
            "wall_time",
            "error",
        ])
        .expect("in-memory write");
        for r in &self.records {
            w.write_record([
                r.dofs.clone(),
                format!("{:e}", r.beta2),
                format!("{:e}", r.gamma2),
                r.fallback.to_string(),
                r.outcome.to_string(),
                r.iterations.to_string(),
                format!("{:.3e}", r.true_residual),
                format!("{:.3}", r.inner_avg),
                format!("{:.6}", r.wall_time),
                r.error.clone().unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
    }

    /// Wall-clock time against total DoF on log-log axes, one series per `β₂`.
    pub fn timings_plot(&self) -> ScatterPlot {
        let mut plot = ScatterPlot::new(
            format!("{} wall-clock", self.table.caption),
            "DoF",
            "seconds",
        );
        plot.log_x = true;
        plot.log_y = true;
        for (k, b2) in self.table.beta2_list.iter().enumerate() {
            let pts = self
                .records
                .iter()
                .filter(|r| r.beta2 == *b2 && !r.fallback && r.outcome != Outcome::Failed)
                .map(|r| {
                    (
                        r.dofs
                            .split('+')
                            .filter_map(|t| t.parse::<f64>().ok())
                            .sum(),
                        r.wall_time,
                    )
                })
                .collect();
            let mut s = Series::scatter(format!("beta2={b2:e}"), pts, PALETTE[k % PALETTE.len()]);
            s.line = true;
            plot.series.push(s);
        }
        plot
    }

    /// Writes the table, the timings and the plots named in `outputs`.
    pub fn write_outputs(&self, outputs: &Outputs, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.table.write_csv(&dir.join(&outputs.table))?;
        let tp = dir.join(&outputs.timings);
        fs::write(&tp, self.timings_csv()).map_err(|e| Error::io(&tp, e))?;
        if let Some(p) = &outputs.iterations_plot {
            self.table.iterations_plot().write_svg(&dir.join(p))?;
        }
        if let Some(p) = &outputs.timings_plot {
            self.timings_plot().write_svg(&dir.join(p))?;
        }
        Ok(())
    }
}

fn solve_cell(
    cfg: &ExperimentConfig,
    level: (usize, usize),
    beta2: f64,
    gamma2: Option<f64>,
) -> Result<CellRecord> {
    let sys = build_saddle_system(&cfg.problem(level, beta2))?;
    let spec = cfg.spec(gamma2);
    let mut rec = CellRecord {
        level,
        dofs: sys.dof_string(),
        beta2,
        gamma2: spec.gamma2,
        fallback: gamma2.is_some(),
        outcome: Outcome::Failed,
        iterations: 0,
        true_residual: f64::NAN,
        inner_avg: 0.0,
        wall_time: 0.0,
        error: None,
    };
    match run_solver(&sys, &spec) {
        Ok(sol) => {
            let r = &sol.report;
            rec.iterations = r.iterations;
            rec.true_residual = r.true_residual;
            rec.inner_avg = r.inner_iterations_avg;
            rec.wall_time = r.wall_time;
            if r.converged {
                rec.outcome = Outcome::Converged(r.iterations);
            }
        }
        Err(e @ (Error::Config(_) | Error::InvalidArgument(_) | Error::DimensionMismatch(_))) => {
            return Err(e)
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    Ok(rec)
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Solves every `(level, β₂)` cell, plus the fallback `γ₂` at the smallest
/// `β₂` when configured. Cells run in parallel; results are assembled in
/// configuration order, and rows are sorted by total DoF. Solver failures
/// become dagger cells; configuration and assembly errors abort the sweep.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    cfg.validate()?;
    let smallest = cfg.smallest_beta2();
    let mut jobs = Vec::new();
    for &level in &cfg.refinement_levels {
        for &b2 in &cfg.beta2_list {
            jobs.push((level, b2, None));
            if let (Some(g), true) = (cfg.gamma2_fallback, b2 == smallest) {
                jobs.push((level, b2, Some(g)));
            }
        }
    }
    let records = jobs
        .par_iter()
        .map(|&(level, b2, g2)| solve_cell(cfg, level, b2, g2))
        .collect::<Result<Vec<_>>>()?;

    let iterative_inner = cfg.spec(None).inner == InnerSolver::CgAmg;
    let largest = cfg.largest_beta2();
    let mut rows: Vec<ResultRow> = cfg
        .refinement_levels
        .iter()
        .map(|&level| {
            let of_level: Vec<&CellRecord> = records.iter().filter(|r| r.level == level).collect();
            let cells = cfg
                .beta2_list
                .iter()
                .map(|&b2| {
                    let find = |fb: bool| {
                        of_level
                            .iter()
                            .find(|r| r.beta2 == b2 && r.fallback == fb)
                            .map(|r| r.outcome)
                    };
                    Cell {
                        outcome: find(false).expect("every cell was solved"),
                        fallback: find(true),
                    }
                })
                .collect();
            let inner_avg = iterative_inner
                .then(|| {
                    of_level
                        .iter()
                        .find(|r| r.beta2 == largest && !r.fallback)
                        .map(|r| round2(r.inner_avg))
                })
                .flatten();
            ResultRow {
                dofs: of_level[0].dofs.clone(),
                cells,
                inner_avg,
            }
        })
        .collect();
    rows.sort_by_key(ResultRow::total_dofs);
    Ok(ExperimentRun {
        table: ResultTable {
            caption: cfg.caption(),
            beta2_list: cfg.beta2_list.clone(),
            rows,
        },
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(variant: PrecVariant) -> ExperimentConfig {
        ExperimentConfig::new(
            Geometry::UnitSquare41,
            vec![(16, 4), (8, 2)],
            vec![1e3, 10.0],
            variant,
        )
    }

    #[test]
    fn single_cell_table() {
        let cfg = ExperimentConfig::new(
            Geometry::UnitSquare41,
            vec![(8, 2)],
            vec![100.0],
            PrecVariant::IdealAl,
        );
        let run = run_experiment(&cfg).unwrap();
        assert_eq!(run.table.rows.len(), 1);
        assert_eq!(run.table.header().len(), 3);
        let k = run.table.rows[0].cells[0].outcome.iterations().unwrap();
        assert!(k > 0 && k < 30);
        assert_eq!(run.table.rows[0].inner_avg, None);
    }

    #[test]
    fn rows_sorted_and_fallback_recorded() {
        let mut cfg = small(PrecVariant::MalDiag);
        cfg.gamma2_fallback = Some(1e-3);
        let run = run_experiment(&cfg).unwrap();
        let t = &run.table;
        assert_eq!(t.rows[0].dofs, "81+9+9");
        assert!(t.rows[0].total_dofs() < t.rows[1].total_dofs());
        assert!(t
            .rows
            .iter()
            .all(|r| r.cells[1].fallback.is_some() && r.cells[0].fallback.is_none()));
        assert!(t.rows.iter().all(|r| r.inner_avg.is_some()));
        assert_eq!(run.records.len(), 6);
        assert_eq!(run.failures(), 0);
    }

    #[test]
    fn csv_round_trip_and_determinism() {
        let mut cfg = small(PrecVariant::MalDiag);
        cfg.gamma2_fallback = Some(1e-3);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.table.to_csv(), b.table.to_csv());
        assert_eq!(ResultTable::from_csv(&a.table.to_csv()).unwrap(), a.table);
    }

    #[test]
    fn iteration_cap_gives_dagger() {
        let mut cfg = small(PrecVariant::None);
        cfg.tolerances.maxit = Some(3);
        let run = run_experiment(&cfg).unwrap();
        assert!(run
            .table
            .rows
            .iter()
            .all(|r| r.cells.iter().all(|c| c.outcome == Outcome::Failed)));
        let csv = run.table.to_csv();
        assert!(csv.contains(DAGGER));
        assert_eq!(ResultTable::from_csv(&csv).unwrap(), run.table);
    }

    #[test]
    fn cell_parsing() {
        for s in ["12", DAGGER, "12 (9)", "† (41)", "7 (†)"] {
            assert_eq!(s.parse::<Cell>().unwrap().to_string(), s);
        }
        assert!("x".parse::<Cell>().is_err());
        assert!("3 (4".parse::<Cell>().is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = small(PrecVariant::IdealAl);
        cfg.beta2_list = vec![0.5];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = small(PrecVariant::IdealAl);
        cfg.refinement_levels = vec![(8, 16)];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = small(PrecVariant::IdealAl);
        cfg.gamma2_fallback = Some(1e-3);
        assert!(cfg.validate().is_err());
        assert!(matches!(
            ExperimentConfig::from_json("{\"geometry\": \"unit_square_41\",\n \"bogus\": 1}"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn json_round_trip_with_defaults() {
        let text = r#"{
            "geometry": "square_in_square",
            "refinement_levels": [[16, 4], [32, 8]],
            "beta2_list": [10, 1000],
            "variant": "mal_diag",
            "gamma1": 10,
            "gamma2": 0.01,
            "gamma2_fallback": 0.001,
            "forcing": {"type": "sin_tanh"},
            "bc": "neumann_zero",
            "tolerances": {"rtol": 1e-8}
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.beta, 1.0);
        assert_eq!(cfg.spec(None).outer.rtol, 1e-8);
        assert_eq!(cfg.spec(Some(1e-3)).gamma2, 1e-3);
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}
