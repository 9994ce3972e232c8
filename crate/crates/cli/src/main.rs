//! `fdal`: assemble, solve, analyze and benchmark the fictitious-domain
//! interface problem from a JSON experiment configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use fdal::al::{run_solver, PrecVariant, PreconditionerSpec, WMode};
use fdal::experiment::{run_experiment, ExperimentConfig};
use fdal::fem::{build_saddle_system, Geometry, SaddleSystem};
use fdal::io::{
    spectrum_plot, write_matrix_market, write_spectrum_csv, write_vector_market, ScatterPlot,
    Series,
};
use fdal::linalg::sym_eig;
use fdal::spectral::{
    eta_formula_check, infsup_sigma1, limit_spectrum_la2, mal_block_spectrum,
    preconditioned_spectrum, spectral_equivalence_check, verify_smw_identity, SpectrumMetadata,
    SpectrumReport,
};

#[derive(Parser, Debug)]
#[command(
    name = "fdal",
    version,
    about = "Augmented Lagrangian preconditioners for fictitious-domain interface problems"
)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for independent solves and dense kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for random vectors in property checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the system blocks of each level as Matrix Market files.
    Assemble(Select),
    /// Solve one level and print the solver report.
    Solve(Select),
    /// Compute a spectrum and write it as CSV and SVG.
    Spectrum {
        #[command(flatten)]
        select: Select,
        #[arg(long, value_enum, default_value_t = SpectrumKind::Preconditioned)]
        kind: SpectrumKind,
    },
    /// Run the full sweep and write the iteration table, timings and plots.
    Bench,
    /// Run the algebraic identity and spectral checks and print PASS/FAIL.
    Verify(Select),
}

/// Level and `β₂` selection within the configuration.
#[derive(clap::Args, Debug, Clone, Copy)]
struct Select {
    /// Index into `refinement_levels` (default: all for `assemble`, the first otherwise).
    #[arg(long)]
    level: Option<usize>,
    /// `β₂` value (default: the first of `beta2_list`).
    #[arg(long)]
    beta2: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SpectrumKind {
    /// Preconditioned operator of the configured variant.
    Preconditioned,
    /// Lower block of the modified preconditioned operator.
    MalBlock,
    /// Eigenvalues of `−LA₂`.
    Limit,
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    let path = path.context("--config is required for this command")?;
    ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

/// Small default case for `verify` without a configuration.
fn verify_default() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(
        Geometry::UnitSquare41,
        vec![(8, 2)],
        vec![100.0],
        PrecVariant::MalDiag,
    );
    cfg.name = "verify".into();
    cfg
}

fn pick(cfg: &ExperimentConfig, sel: Select) -> Result<((usize, usize), f64)> {
    let i = sel.level.unwrap_or(0);
    let level = *cfg.refinement_levels.get(i).with_context(|| {
        format!(
            "level index {i} out of range (0..{})",
            cfg.refinement_levels.len()
        )
    })?;
    Ok((level, sel.beta2.unwrap_or(cfg.beta2_list[0])))
}

fn system(cfg: &ExperimentConfig, level: (usize, usize), beta2: f64) -> Result<SaddleSystem> {
    build_saddle_system(&cfg.problem(level, beta2))
        .with_context(|| format!("assembling level {level:?}, beta2 = {beta2}"))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn assemble(cfg: &ExperimentConfig, sel: Select, out: &Path) -> Result<()> {
    let beta2 = sel.beta2.unwrap_or(cfg.beta2_list[0]);
    let levels: Vec<(usize, usize)> = match sel.level {
        Some(_) => vec![pick(cfg, sel)?.0],
        None => cfg.refinement_levels.clone(),
    };
    for level in levels {
        let sys = system(cfg, level, beta2)?;
        let dir = out.join(format!("level_{}_{}", level.0, level.1));
        create_dir(&dir)?;
        for (name, mat) in [
            ("A", &sys.a),
            ("A2", &sys.a2),
            ("C", &sys.c),
            ("C2", &sys.c2),
            ("M", &sys.m),
        ] {
            write_matrix_market(mat, &dir.join(format!("{name}.mtx")))?;
        }
        write_matrix_market(&sys.matrix(), &dir.join("system.mtx"))?;
        write_vector_market(&sys.f, &dir.join("f.mtx"))?;
        write_vector_market(&sys.g, &dir.join("g.mtx"))?;
        write_vector_market(&sys.rhs(), &dir.join("rhs.mtx"))?;
        sys.background
            .mesh()
            .write_text(&dir.join("background_mesh.txt"))?;
        sys.immersed
            .mesh()
            .write_text(&dir.join("immersed_mesh.txt"))?;
        println!("{} {} -> {}", sys.dof_string(), sys.size(), dir.display());
    }
    Ok(())
}

fn solve(cfg: &ExperimentConfig, sel: Select, out: &Path) -> Result<bool> {
    let (level, beta2) = pick(cfg, sel)?;
    let sys = system(cfg, level, beta2)?;
    let spec = cfg.spec(None);
    let sol = run_solver(&sys, &spec)?;
    let r = &sol.report;
    let summary = json!({
        "variant": spec.label(),
        "dofs": sys.dof_string(),
        "beta2": beta2,
        "gamma1": spec.gamma1,
        "gamma2": spec.gamma2,
        "iterations": r.iterations,
        "converged": r.converged,
        "estimated_residual": r.final_residual(),
        "true_residual": r.true_residual,
        "original_residual": sol.original_residual,
        "constraint_residual": sol.constraint_residual,
        "inner_iterations_avg": r.inner_iterations_avg,
        "inner_failures": r.inner_failures,
        "wall_time": r.wall_time,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    create_dir(out)?;
    write_vector_market(&sol.u, &out.join("u.mtx"))?;
    write_vector_market(&sol.u2, &out.join("u2.mtx"))?;
    write_vector_market(&sol.lambda, &out.join("lambda.mtx"))?;
    fs::write(
        out.join("report.json"),
        serde_json::to_string_pretty(&summary)?,
    )
    .context("writing report.json")?;
    Ok(r.converged)
}

fn spectrum(cfg: &ExperimentConfig, sel: Select, kind: SpectrumKind, out: &Path) -> Result<()> {
    let (level, beta2) = pick(cfg, sel)?;
    let sys = system(cfg, level, beta2)?;
    let spec = cfg.spec(None);
    create_dir(out)?;
    let report = match kind {
        SpectrumKind::Preconditioned => preconditioned_spectrum(&sys, &spec)?,
        SpectrumKind::MalBlock => mal_block_spectrum(&sys, spec.gamma1, spec.gamma2, spec.w_mode)?,
        SpectrumKind::Limit => {
            let values = limit_spectrum_la2(&sys)?;
            let meta = SpectrumMetadata {
                label: "limit_la2".into(),
                beta: sys.beta,
                beta2: sys.beta2,
                n: sys.n(),
                m: sys.m_dim(),
                l: sys.l(),
                ..Default::default()
            };
            let report = SpectrumReport::from_eigenvalues(
                values.iter().map(|v| (*v).into()).collect(),
                meta,
            );
            let mut plot = ScatterPlot::new("eigenvalues of -LA2", "index", "value");
            plot.series.push(Series::scatter(
                "-LA2",
                values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (i as f64, *v))
                    .collect(),
                "firebrick",
            ));
            plot.write_svg(&out.join("limit.svg"))?;
            write_spectrum_csv(&report, &out.join("limit.csv"))?;
            println!(
                "{} eigenvalues of -LA2 in [{:.6e}, {:.6e}]",
                values.len(),
                values[0],
                values[values.len() - 1]
            );
            return Ok(());
        }
    };
    let stem = match kind {
        SpectrumKind::Preconditioned => "preconditioned",
        _ => "mal_block",
    };
    write_spectrum_csv(&report, &out.join(format!("{stem}.csv")))?;
    spectrum_plot(&report).write_svg(&out.join(format!("{stem}.svg")))?;
    let right = report.rightmost().unwrap_or_default();
    println!(
        "{} {}: {} eigenvalues, {} at one, eta = {:.6e}, max |Im| = {:.3e}, rightmost = {:.6e}{:+.3e}i",
        report.metadata.label,
        sys.dof_string(),
        report.eigenvalues.len(),
        report.count_at_one,
        report.eta,
        report.max_imag,
        right.re,
        right.im
    );
    Ok(())
}

fn bench(cfg: &ExperimentConfig, out: &Path) -> Result<bool> {
    let run = run_experiment(cfg)?;
    run.write_outputs(&cfg.outputs, out)?;
    print!("{}", run.table.to_csv());
    let failures = run.failures();
    if failures > 0 {
        eprintln!("{failures} solve(s) did not converge");
    }
    Ok(failures == 0)
}

fn verify(cfg: &ExperimentConfig, sel: Select, seed: u64) -> Result<bool> {
    let (level, beta2) = pick(cfg, sel)?;
    let sys = system(cfg, level, beta2)?;
    let spec = cfg.spec(None);
    let (g1, g2) = if spec.gamma1 > 0.0 && spec.gamma2 > 0.0 {
        (spec.gamma1, spec.gamma2)
    } else {
        (10.0, 1e-2)
    };
    let mut ok = true;
    let mut line = |pass: bool, name: &str, detail: String| {
        ok &= pass;
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    };
    println!("case {} beta2 = {beta2}", sys.dof_string());
    for w in [WMode::ExactMSquared, WMode::Diag] {
        for gamma in [1.0, 10.0, 100.0] {
            let d = verify_smw_identity(&sys, gamma, w)?;
            line(
                d <= 1e-10,
                "smw_identity",
                format!("gamma1 = {gamma}, W = {w:?}: relative defect {d:.3e}"),
            );
        }
    }
    let (n, m) = (sys.n(), sys.m_dim());
    let mut mal = PreconditionerSpec::mal_diag(g1, g2);
    mal.w_mode = WMode::ExactMSquared;
    let full = preconditioned_spectrum(&sys, &mal)?;
    line(
        full.count_at_one >= n + m,
        "mal_unit_multiplicity",
        format!("{} eigenvalues at one, need {}", full.count_at_one, n + m),
    );
    let block = mal_block_spectrum(&sys, g1, g2, WMode::ExactMSquared)?;
    line(
        block.count_at_one >= m,
        "mal_lower_block_unit_multiplicity",
        format!("{} eigenvalues at one, need {m}", block.count_at_one),
    );
    let infsup = infsup_sigma1(&sys, sys.h2())?;
    for gamma in [1.0, 10.0, 100.0] {
        let dev = eta_formula_check(&sys, gamma)?;
        line(
            dev <= 1e-6,
            "eta_formula",
            format!("gamma = {gamma}: max deviation {dev:.3e}"),
        );
        let ideal = preconditioned_spectrum(&sys, &PreconditionerSpec::ideal_al(gamma))?;
        let bound = infsup.eta_bound(gamma);
        line(
            ideal.eta >= bound * (1.0 - 1e-8),
            "eta_lower_bound",
            format!("gamma = {gamma}: eta = {:.6e} >= {bound:.6e}", ideal.eta),
        );
    }
    let h2 = sys.h2();
    let (lo, hi) = spectral_equivalence_check(&sys.m, h2, 64, seed)?;
    let mass = sym_eig(&sys.m.to_dense())?.values;
    let (mmin, mmax) = mass.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), z| {
        (a.min(z.re), b.max(z.re))
    });
    let (blo, bhi) = (h2 * h2 / mmax, h2 * h2 / mmin);
    line(
        lo >= blo * (1.0 - 1e-10) && hi <= bhi * (1.0 + 1e-10),
        "spectral_equivalence",
        format!("seed {seed}: ratio range [{lo:.4e}, {hi:.4e}] within [{blo:.4e}, {bhi:.4e}]"),
    );
    Ok(ok)
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(k) = cli.threads {
        if k == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg_path = cli.config.as_deref();
    let fatal = |cfg: &ExperimentConfig, converged: bool| {
        if !converged && cfg.fail_on_nonconvergence {
            ExitCode::from(2)
        } else {
            ExitCode::SUCCESS
        }
    };
    Ok(match cli.command {
        Command::Assemble(sel) => {
            assemble(&load_config(cfg_path)?, sel, &cli.out)?;
            ExitCode::SUCCESS
        }
        Command::Solve(sel) => {
            let cfg = load_config(cfg_path)?;
            let converged = solve(&cfg, sel, &cli.out)?;
            fatal(&cfg, converged)
        }
        Command::Spectrum { select, kind } => {
            spectrum(&load_config(cfg_path)?, select, kind, &cli.out)?;
            ExitCode::SUCCESS
        }
        Command::Bench => {
            let cfg = load_config(cfg_path)?;
            let converged = bench(&cfg, &cli.out)?;
            fatal(&cfg, converged)
        }
        Command::Verify(sel) => {
            let cfg = match cfg_path {
                Some(_) => load_config(cfg_path)?,
                None => verify_default(),
            };
            if verify(&cfg, sel, cli.seed)? {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
