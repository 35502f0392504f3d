//! `mixlap`: batch front end for the mixed anisotropic/nonlocal p-Laplace
//! solver. Parses JSON experiment configs with expression-valued
//! coefficients, dispatches solve / sequence / verify-regularity /
//! convergence / selftest runs, and writes machine-readable reports (JSON)
//! and plot-ready fields (CSV) atomically, each carrying the config hash
//! and seed.

mod config;
mod expr;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mixlap_core::energy::EnergyModel;
use mixlap_core::exponents::Exponents;
use mixlap_core::grid::{make_grid, GridFunction};
use mixlap_core::inequalities::{
    check_alg_inequality, check_increasing_inequality, PiecewiseLinear,
};
use mixlap_core::regularity::{
    caccioppoli_report, certify, harnack_report, local_boundedness_report,
    positivity_expansion_report, supersolution_energy_report, sweep_csv,
    tail_estimate_report, weak_harnack_report, Certificate, CutoffFunction,
    InequalityReport, TruncationSide,
};
use mixlap_core::scheme::{
    approx_step, bound_monitor, boundary_condition_check, geometric_schedule,
    regime_classify, run_sequence, ApproxSequence, Regime, SingularProblem,
};
use mixlap_core::solver::{minimize, Objective, SolverOptions, SourceDensity};
use mixlap_core::Error as CoreError;

use config::Experiment;

#[derive(Parser)]
#[command(
    name = "mixlap",
    version,
    about = "Mixed anisotropic/nonlocal p-Laplace experiment driver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one non-singular problem (linear source, no absorption).
    Solve(RunArgs),
    /// Run the approximating sequence for the singular problem.
    Sequence(RunArgs),
    /// Run the sequence, then verify the regularity estimates on its output.
    VerifyRegularity(RunArgs),
    /// Built-in manufactured-solution refinement study.
    Convergence(OutArgs),
    /// Randomized checks of the elementary inequalities behind the estimates.
    Selftest(OutArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed recorded in outputs (overrides the config's `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Override the truncation schedule length K (levels 2^0 .. 2^K).
    #[arg(long)]
    schedule_k: Option<u32>,
}

#[derive(Args)]
struct OutArgs {
    /// Output directory for the optional report files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the randomized sample draws.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

/// A checked run-level invariant that failed (exit class 3).
#[derive(Debug)]
struct InvariantFailure(String);

impl fmt::Display for InvariantFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invariant violated: {}", self.0)
    }
}

impl std::error::Error for InvariantFailure {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_class(&err))
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let threads = match &cli.command {
        Command::Solve(a) | Command::Sequence(a) | Command::VerifyRegularity(a) => a.threads,
        Command::Convergence(a) | Command::Selftest(a) => a.threads,
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Sequence(args) => cmd_sequence(&args),
        Command::VerifyRegularity(args) => cmd_verify_regularity(&args),
        Command::Convergence(args) => cmd_convergence(&args),
        Command::Selftest(args) => cmd_selftest(&args),
    }
}

/// Failure classes: 1 config, 2 solver, 3 invariant violation, 4 I/O.
fn exit_class(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return core_class(core);
        }
        if cause.downcast_ref::<InvariantFailure>().is_some() {
            return 3;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
    }
    1
}

fn core_class(err: &CoreError) -> u8 {
    match err {
        CoreError::Step { source, .. } => core_class(source),
        CoreError::NoConvergence { .. } | CoreError::NonFiniteEnergy { .. } => 2,
        CoreError::SequenceViolation { .. } => 3,
        _ => 1,
    }
}

// ---------------------------------------------------------------- plumbing

struct Ctx {
    exp: Experiment,
    out_dir: PathBuf,
    seed: u64,
}

fn load_ctx(args: &RunArgs) -> Result<Ctx> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    let mut exp = config::load_experiment(&text)?;
    if let Some(k) = args.schedule_k {
        exp.config.schedule_k = k;
    }
    let seed = args.seed.unwrap_or(exp.config.seed);
    let out_dir = args
        .out
        .clone()
        .or_else(|| exp.config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    Ok(Ctx { exp, out_dir, seed })
}

/// Write via a temp file in the same directory, then rename into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .with_context(|| format!("output path {} has no file name", path.display()))?;
    let tmp = path.with_file_name(format!("{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Field CSV with the provenance comment line on top.
fn field_csv(u: &GridFunction, hash: &str, seed: u64) -> String {
    let mut out = format!("# config_sha256={hash} seed={seed}\n");
    let mut buf = Vec::new();
    u.write_csv(&mut buf).expect("in-memory write cannot fail");
    out.push_str(&String::from_utf8(buf).expect("csv is utf-8"));
    out
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config_sha256: &'a str,
    seed: u64,
    report: &'a T,
}

fn report_json<T: Serialize>(hash: &str, seed: u64, report: &T) -> Result<String> {
    let envelope = Envelope {
        config_sha256: hash,
        seed,
        report,
    };
    let mut text = serde_json::to_string_pretty(&envelope).context("serializing report")?;
    text.push('\n');
    Ok(text)
}

// ------------------------------------------------------------------- solve

#[derive(Serialize)]
struct SolvePayload {
    grid_m: Vec<usize>,
    iterations: usize,
    residual: f64,
    energy: f64,
    backtracks: usize,
    certificate: Certificate,
}

fn cmd_solve(args: &RunArgs) -> Result<()> {
    let ctx = load_ctx(args)?;
    let model = ctx.exp.build_model()?;
    let objective = Objective::new(
        model,
        SourceDensity::Linear {
            f: ctx.exp.f.clone(),
        },
    )?;
    let u0 = GridFunction::zeros(ctx.exp.grid.clone());
    let (u, report) = minimize(&objective, &u0, &ctx.exp.solver_options())?;
    let payload = SolvePayload {
        grid_m: ctx.exp.grid.node_counts().to_vec(),
        iterations: report.iterations,
        residual: report.residual,
        energy: report.energy,
        backtracks: report.backtracks,
        certificate: certify(&u, &objective),
    };
    let hash = &ctx.exp.config_sha256;
    write_atomic(
        &ctx.out_dir.join("solution.csv"),
        field_csv(&u, hash, ctx.seed).as_bytes(),
    )?;
    write_atomic(
        &ctx.out_dir.join("solve_report.json"),
        report_json(hash, ctx.seed, &payload)?.as_bytes(),
    )?;
    println!(
        "solve: {} iterations, residual {:.3e}, energy {:.12e}",
        payload.iterations, payload.residual, payload.energy
    );
    Ok(())
}

// ---------------------------------------------------------------- sequence

#[derive(Serialize)]
struct SequencePayload<'a> {
    regime: &'a Regime,
    schedule: &'a [u64],
    records: &'a [mixlap_core::scheme::StepRecord],
    stopped_early: bool,
    positivity_uniform_from: Option<usize>,
    gradient_diag_violations: &'a [u64],
    bounds: &'a mixlap_core::scheme::BoundReport,
    boundary: &'a mixlap_core::scheme::BoundaryReport,
}

struct SequenceRun {
    problem: SingularProblem,
    regime: Regime,
    schedule: Vec<u64>,
    seq: ApproxSequence,
}

fn run_pipeline(ctx: &Ctx) -> Result<SequenceRun> {
    let problem = ctx.exp.build_problem()?;
    let regime = regime_classify(&problem, ctx.exp.override_kind)?;
    let schedule = geometric_schedule(ctx.exp.config.schedule_k);
    let seq = run_sequence(&problem, &regime, &schedule, &ctx.exp.sequence_options())?;
    Ok(SequenceRun {
        problem,
        regime,
        schedule,
        seq,
    })
}

fn write_sequence_outputs(ctx: &Ctx, run: &SequenceRun) -> Result<()> {
    let bounds = bound_monitor(&run.seq, &run.problem, &run.regime)?;
    let p = ctx.exp.exps.p;
    let alpha = run.regime.monitor_exponent(p);
    let boundary = boundary_condition_check(
        run.seq.final_solution(),
        p,
        (alpha != 1.0).then_some(alpha),
    )?;
    let payload = SequencePayload {
        regime: &run.regime,
        schedule: &run.schedule,
        records: &run.seq.records,
        stopped_early: run.seq.stopped_early,
        positivity_uniform_from: run.seq.positivity_uniform_from,
        gradient_diag_violations: &run.seq.gradient_diag_violations,
        bounds: &bounds,
        boundary: &boundary,
    };
    let hash = &ctx.exp.config_sha256;
    write_atomic(
        &ctx.out_dir.join("final_solution.csv"),
        field_csv(run.seq.final_solution(), hash, ctx.seed).as_bytes(),
    )?;
    write_atomic(
        &ctx.out_dir.join("sequence_report.json"),
        report_json(hash, ctx.seed, &payload)?.as_bytes(),
    )?;
    println!(
        "sequence: regime {}, {} levels, final sup {:.6e}, monitored norm {:.6e}",
        run.regime.kind.label(),
        run.seq.records.len(),
        run.seq.final_solution().sup_norm(),
        run.seq.records.last().map(|r| r.monitored).unwrap_or(0.0),
    );
    Ok(())
}

fn cmd_sequence(args: &RunArgs) -> Result<()> {
    let ctx = load_ctx(args)?;
    let run = run_pipeline(&ctx)?;
    write_sequence_outputs(&ctx, &run)
}

// ------------------------------------------------------------- regularity

#[derive(Serialize)]
struct RegularityPayload {
    certificate: Certificate,
    regime: Regime,
    reports: Vec<InequalityReport>,
}

fn cmd_verify_regularity(args: &RunArgs) -> Result<()> {
    let ctx = load_ctx(args)?;
    let run = run_pipeline(&ctx)?;
    write_sequence_outputs(&ctx, &run)?;

    let u = run.seq.final_solution();
    let model = run.problem.model();
    let reports = regularity_sweep(u, model)?;
    let homogeneous = Objective::new(
        model.clone(),
        SourceDensity::Linear {
            f: vec![0.0; ctx.exp.grid.n_nodes()],
        },
    )?;
    let payload = RegularityPayload {
        certificate: certify(u, &homogeneous),
        regime: run.regime,
        reports,
    };
    let hash = &ctx.exp.config_sha256;
    write_atomic(
        &ctx.out_dir.join("regularity_sweep.csv"),
        format!(
            "# config_sha256={hash} seed={}\n{}",
            ctx.seed,
            sweep_csv(&payload.reports)
        )
        .as_bytes(),
    )?;
    write_atomic(
        &ctx.out_dir.join("regularity_report.json"),
        report_json(hash, ctx.seed, &payload)?.as_bytes(),
    )?;
    let failures: Vec<&str> = payload
        .reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.kind)
        .collect();
    println!(
        "verify-regularity: {} reports, certificate {:?}",
        payload.reports.len(),
        payload.certificate
    );
    if !failures.is_empty() {
        return Err(InvariantFailure(format!(
            "regularity reports failed: {}",
            failures.join(", ")
        ))
        .into());
    }
    Ok(())
}

/// The standard verification battery on one field: energy estimates under a
/// centered cutoff, tail bound, expansion of positivity at the observed
/// interior level, local boundedness across δ, and both Harnack ratios.
fn regularity_sweep(u: &GridFunction, model: &EnergyModel) -> Result<Vec<InequalityReport>> {
    let grid = model.grid().clone();
    let exps = model.exps();
    let extents = grid.extents();
    let emin = extents.iter().cloned().fold(f64::INFINITY, f64::min);
    let center = if grid.dim() == 2 {
        [extents[0] / 2.0, extents[1] / 2.0]
    } else {
        [extents[0] / 2.0, 0.0]
    };
    let big_r = 0.45 * emin;
    let r = (0.2 * emin).min(1.0);
    let psi = CutoffFunction::new(grid.clone(), center, r, 0.5 * r)?;

    let mut reports = Vec::new();
    let sup = u.sup_norm();
    for (k, side) in [
        (0.0, TruncationSide::Upper),
        (0.5 * sup, TruncationSide::Upper),
        (0.9 * sup, TruncationSide::Lower),
    ] {
        reports.push(caccioppoli_report(u, k, side, &psi, big_r, model)?);
    }
    if exps.p > 1.0 {
        reports.push(supersolution_energy_report(
            u,
            (1.0 + exps.p) / 2.0,
            0.1,
            &psi,
            0.75 * big_r,
            big_r,
            model,
        )?);
    }
    reports.push(tail_estimate_report(u, center, r, big_r, exps)?);

    let r_pe = big_r / 20.0;
    let level = mixlap_core::energy::ball_stats(u, center, r_pe, 1.0, 0.0)?.inf;
    reports.push(positivity_expansion_report(
        u, center, r_pe, big_r, level, 0.5, exps,
    )?);

    for delta in [1.0, 0.5, 0.1] {
        reports.push(local_boundedness_report(
            u,
            center,
            (0.45 * emin).min(1.0),
            delta,
            exps,
        )?);
    }
    reports.push(harnack_report(u, center, r, big_r, exps)?);
    let cap = exps.critical().kappa * (exps.p - 1.0);
    for frac in [0.25, 0.5, 0.9] {
        reports.push(weak_harnack_report(
            u,
            center,
            r,
            big_r,
            frac * cap,
            false,
            exps,
        )?);
    }
    Ok(reports)
}

// ------------------------------------------------------------- convergence

#[derive(Serialize)]
struct ConvergenceRow {
    m: usize,
    h: f64,
    sup_error: f64,
    ratio: Option<f64>,
}

#[derive(Serialize)]
struct ConvergencePayload {
    rows: Vec<ConvergenceRow>,
    roundtrip_sup_error: f64,
    pass: bool,
}

fn cmd_convergence(args: &OutArgs) -> Result<()> {
    let seed = args.seed.unwrap_or(0);
    // Solver accuracy only has to sit far below the O(h²) discretization
    // error being measured; 1e-10 is unreachable for the pure-local
    // quadratic at M = 63 (energy-comparison rounding floor).
    let opts = SolverOptions {
        tol: 1e-9,
        ..SolverOptions::default()
    };

    // Pure-local p = 2 with unit source: nodal solution of x(1-x)/2,
    // measured against the exact function at cell midpoints.
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for m in [15usize, 31, 63] {
        let grid = make_grid(1, &[1.0], &[m], 0.2)?;
        let exps = Exponents::new(1, 2.0, 0.5, 2.0, 1.0, 0.0)?;
        let model = EnergyModel::new(grid.clone(), exps, None)?;
        let objective = Objective::new(
            model,
            SourceDensity::Linear {
                f: vec![1.0; grid.n_nodes()],
            },
        )?;
        let (u, _) = minimize(&objective, &GridFunction::zeros(grid.clone()), &opts)?;
        let h = grid.spacings()[0];
        let mut sup_error = 0.0f64;
        for c in 0..=m {
            let left = if c == 0 { 0.0 } else { u.values()[c - 1] };
            let right = if c == m { 0.0 } else { u.values()[c] };
            let xm = (c as f64 + 0.5) * h;
            let exact = xm * (1.0 - xm) / 2.0;
            sup_error = sup_error.max(((left + right) / 2.0 - exact).abs());
        }
        let ratio = rows.last().map(|prev| prev.sup_error / sup_error);
        rows.push(ConvergenceRow {
            m,
            h,
            sup_error,
            ratio,
        });
    }
    let refinement_ok = rows
        .iter()
        .filter_map(|r| r.ratio)
        .all(|q| q.is_finite() && q >= 3.0);

    // Singular round-trip: manufacture the source for a known positive
    // field, then re-solve at a deep truncation level.
    let grid = make_grid(1, &[1.0], &[63], 0.2)?;
    let exps = Exponents::new(1, 2.0, 0.5, 2.0, 1.0, 0.0)?;
    let model = EnergyModel::new(grid.clone(), exps, None)?;
    let target = GridFunction::from_fn(grid.clone(), |x, _| x * (1.0 - x) / 2.0)?;
    let gamma = vec![0.7; grid.n_nodes()];
    let f = mixlap_core::solver::manufactured_source(&target, &model, &gamma)?;
    let problem = SingularProblem::new(model, f, gamma)?;
    let (u_rt, _) = approx_step(&problem, 1 << 20, &GridFunction::zeros(grid), &opts)?;
    let roundtrip_sup_error = u_rt.sup_diff(&target)?;

    let pass = refinement_ok && roundtrip_sup_error <= 1e-5;
    let payload = ConvergencePayload {
        rows,
        roundtrip_sup_error,
        pass,
    };

    let mut csv = format!("# config_sha256=builtin seed={seed}\nm,h,sup_error,ratio\n");
    for row in &payload.rows {
        csv.push_str(&format!(
            "{},{:.16e},{:.16e},{}\n",
            row.m,
            row.h,
            row.sup_error,
            row.ratio.map(|r| format!("{r:.16e}")).unwrap_or_default()
        ));
    }
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        write_atomic(&dir.join("convergence.csv"), csv.as_bytes())?;
        write_atomic(
            &dir.join("convergence_report.json"),
            report_json("builtin", seed, &payload)?.as_bytes(),
        )?;
    }
    for row in &payload.rows {
        println!(
            "convergence: M = {:3}  h = {:.5}  sup error = {:.6e}  ratio = {}",
            row.m,
            row.h,
            row.sup_error,
            row.ratio.map(|r| format!("{r:.3}")).unwrap_or_else(|| "-".into())
        );
    }
    println!("convergence: singular round-trip sup error = {roundtrip_sup_error:.6e}");
    if !pass {
        return Err(InvariantFailure(format!(
            "refinement ratios below 3 or round-trip error {roundtrip_sup_error:.3e} above 1e-5"
        ))
        .into());
    }
    Ok(())
}

// ---------------------------------------------------------------- selftest

#[derive(Serialize)]
struct SelftestRow {
    check: String,
    p: f64,
    samples: u64,
    violations: u64,
}

fn cmd_selftest(args: &OutArgs) -> Result<()> {
    let seed = args.seed.unwrap_or(0);
    const SAMPLES: u64 = 100_000;
    let mut rows = Vec::new();
    for p in [1.5, 2.0, 3.0] {
        for dim in [1usize, 2] {
            let check = check_alg_inequality(p, dim, SAMPLES, seed)?;
            rows.push(SelftestRow {
                check: format!("vector-monotonicity dim {dim}"),
                p,
                samples: check.used,
                violations: check.violations,
            });
        }
        let battery = [
            PiecewiseLinear::new(vec![0.0], vec![0.0, 1.0])?,
            PiecewiseLinear::new(vec![-1.0, 1.0], vec![0.5, 0.0, 2.0])?,
            PiecewiseLinear::new(vec![0.5], vec![1.0, 1.0])?,
        ];
        for (i, g) in battery.iter().enumerate() {
            let check = check_increasing_inequality(p, g, SAMPLES, seed)?;
            rows.push(SelftestRow {
                check: format!("increasing-function chain rule g{i}"),
                p,
                samples: check.used,
                violations: check.violations,
            });
        }
    }
    let total: u64 = rows.iter().map(|r| r.violations).sum();
    for row in &rows {
        println!(
            "selftest: {:38} p = {:>3}  samples = {:6}  violations = {}",
            row.check, row.p, row.samples, row.violations
        );
    }
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        write_atomic(
            &dir.join("selftest_report.json"),
            report_json("builtin", seed, &rows)?.as_bytes(),
        )?;
    }
    if total > 0 {
        return Err(InvariantFailure(format!(
            "{total} inequality violations across {} checks",
            rows.len()
        ))
        .into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_classes_follow_failure_kind() {
        let solver: anyhow::Error = CoreError::NoConvergence {
            iterations: 10,
            residual: 1.0,
            tol: 1e-10,
        }
        .into();
        assert_eq!(exit_class(&solver), 2);
        let stepped: anyhow::Error = CoreError::Step {
            n: 4,
            source: Box::new(CoreError::NonFiniteEnergy { iteration: 3 }),
        }
        .into();
        assert_eq!(exit_class(&stepped), 2);
        let violation: anyhow::Error = CoreError::SequenceViolation {
            n: 2,
            property: "nodewise monotonicity",
            details: String::new(),
        }
        .into();
        assert_eq!(exit_class(&violation), 3);
        let invalid: anyhow::Error = CoreError::invalid("bad exponent").into();
        assert_eq!(exit_class(&invalid), 1);
        let io: anyhow::Error =
            std::io::Error::new(std::io::ErrorKind::NotFound, "missing").into();
        assert_eq!(exit_class(&io), 4);
        let inv: anyhow::Error = InvariantFailure("failed".into()).into();
        assert_eq!(exit_class(&inv), 3);
        // context wrapping must not change the class
        let wrapped = anyhow::Error::from(CoreError::NonFiniteEnergy { iteration: 0 })
            .context("while solving");
        assert_eq!(exit_class(&wrapped), 2);
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        write_atomic(&path, b"{}\n").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"{}\n");
        let names: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["report.json".to_string()]);
    }

    #[test]
    fn field_csv_carries_provenance() {
        let grid = make_grid(1, &[1.0], &[3], 0.2).unwrap();
        let u = GridFunction::zeros(grid);
        let csv = field_csv(&u, "deadbeef", 7);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "# config_sha256=deadbeef seed=7");
        assert_eq!(lines.next().unwrap(), "x,u");
        assert_eq!(csv.lines().count(), 5);
    }
}
