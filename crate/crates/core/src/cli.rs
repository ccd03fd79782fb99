//! Command-line interface: single runs, grids, diagnostics and problem verification.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::diagnostics::{
    analytic_evidence_5d, problematic_mass_estimate, verify_pushforward_against, Against,
    EcdfReport,
};
use crate::engine::{run, RunConfig, Strategy};
use crate::experiment::{
    run_grid, write_records, AnyModel, Execution, ExperimentGrid, ExperimentSummary, RunRecord,
};
use crate::measures::{Atom, PiecewiseSpec, PlateauCase, ProblematicInterval};
use crate::model::PiecewiseModel;
use crate::rng::seeded;

pub const OUTPUT_DIR_ENV: &str = "PLATEAU_NS_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "plateau-ns",
    version,
    about = "Nested sampling evidence estimates for likelihoods with plateaus"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One nested-sampling run; writes a trace CSV and a summary JSON beside it.
    Run(RunArgs),
    /// A replicated grid from a JSON config.
    Experiment(ExperimentArgs),
    /// Diagnostics of a model: pushforward law and the 5D analytic evidence.
    #[command(subcommand)]
    Diagnose(Diagnose),
    /// Checks a 1D problem file: atoms, case, evidence identity, pushforward law, problematic set.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Vanilla,
    Randomized,
    Split,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// `ref5d`, a catalog name, or a problem JSON file.
    #[arg(long, default_value = "ref5d")]
    pub model: String,
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
    #[arg(long)]
    pub n: usize,
    #[arg(long = "budget-mult")]
    pub budget_mult: f64,
    #[arg(long)]
    pub seed: u64,
    /// Perturbation half-width; required for the randomized strategy.
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub no_remainder: bool,
    #[arg(long)]
    pub max_attempts: Option<u64>,
    /// Trace CSV path; the summary goes to the same path with a `.json` extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = OUTPUT_DIR_ENV, hide_env_values = true)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    pub config: PathBuf,
    #[arg(long, env = OUTPUT_DIR_ENV, hide_env_values = true)]
    pub out_dir: Option<PathBuf>,
    /// Also write one trace CSV per replicate.
    #[arg(long)]
    pub traces: bool,
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Subcommand)]
pub enum Diagnose {
    /// Empirical law of `X(L(x))` against uniform or the predicted law.
    Pushforward(PushforwardArgs),
    /// Analytic evidence of the 5D reference.
    #[command(name = "evidence-5d")]
    Evidence5d {
        #[arg(long, default_value_t = 10_000)]
        quad_points: usize,
    },
}

#[derive(Debug, Args)]
pub struct PushforwardArgs {
    #[arg(long, default_value = "ref5d")]
    pub model: String,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = AgainstArg::Law)]
    pub against: AgainstArg,
    #[arg(long, default_value_t = 0.03)]
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AgainstArg {
    Uniform,
    Law,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub spec: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
}

/// Failure reported on stderr with a nonzero exit.
#[derive(Debug)]
pub struct CliError(pub String);

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub model: String,
    pub strategy: String,
    pub n: usize,
    pub a: Option<f64>,
    pub budget: u64,
    pub seed: u64,
    pub remainder_term: bool,
    #[serde(rename = "Z")]
    pub z: f64,
    #[serde(rename = "log_Z")]
    pub log_z: f64,
    #[serde(rename = "Z_ref")]
    pub z_ref: f64,
    pub abs_error: f64,
    pub plateau_evidence: f64,
    pub remainder: f64,
    pub iterations: usize,
    pub evals_used: u64,
    pub termination: String,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    atoms: Vec<Atom>,
    case: PlateauCase,
    integral_prior: f64,
    integral_inverse: f64,
    identity_gap: f64,
    pushforward: EcdfReport,
    problematic_set: Vec<ProblematicInterval>,
    problematic_mass_estimate: f64,
    pass: bool,
}

/// Runs a parsed command. `Ok(false)` means the command ran but a check failed.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<bool, CliError> {
    match cli.command {
        Command::Run(args) => cmd_run(args, out).map(|_| true),
        Command::Experiment(args) => cmd_experiment(args, out).map(|_| true),
        Command::Diagnose(Diagnose::Pushforward(args)) => cmd_pushforward(args, out).map(|_| true),
        Command::Diagnose(Diagnose::Evidence5d { quad_points }) => {
            writeln!(out, "{}", analytic_evidence_5d(quad_points)?)?;
            Ok(true)
        }
        Command::Verify(args) => cmd_verify(args, out),
    }
}

fn strategy_of(args: &RunArgs) -> Result<Strategy, CliError> {
    match (args.strategy, args.a) {
        (StrategyArg::Randomized, Some(a)) => Ok(Strategy::Randomized { a }),
        (StrategyArg::Randomized, None) => {
            Err(CliError("--strategy randomized requires --a".into()))
        }
        (_, Some(_)) => Err(CliError("--a only applies to --strategy randomized".into())),
        (StrategyArg::Vanilla, None) => Ok(Strategy::Vanilla),
        (StrategyArg::Split, None) => Ok(Strategy::Split),
    }
}

fn cmd_run(args: RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let strategy = strategy_of(&args)?;
    let model = AnyModel::load(&args.model)?;
    let mut config = RunConfig::new(strategy, args.n, args.budget_mult, args.seed);
    config.remainder_term = !args.no_remainder;
    if let Some(m) = args.max_attempts {
        config.max_attempts = m;
    }
    config.validate()?;

    let trace_path = match args.out {
        Some(p) => p,
        None => args
            .output_dir
            .unwrap_or_else(|| PathBuf::from("."))
            .join(format!(
                "run_{}_n{}_seed{}.csv",
                strategy.label(),
                args.n,
                args.seed
            )),
    };
    let summary_path = trace_path.with_extension("json");

    let result = run(&model, &config, &mut seeded(config.seed))?;
    let z_ref = model.reference_evidence()?;
    let summary = RunSummary {
        model: args.model,
        strategy: strategy.label().into(),
        n: config.n_active,
        a: strategy.noise(),
        budget: config.budget(),
        seed: config.seed,
        remainder_term: config.remainder_term,
        z: result.z,
        log_z: result.log_z,
        z_ref,
        abs_error: (result.z - z_ref).abs(),
        plateau_evidence: result.plateau_evidence,
        remainder: result.remainder,
        iterations: result.iterations(),
        evals_used: result.evals_used,
        termination: result.termination.to_string(),
    };

    ensure_parent(&trace_path)?;
    result.write_trace_csv(BufWriter::new(File::create(&trace_path)?))?;
    write_json(&summary_path, &summary)?;
    writeln!(
        out,
        "Z = {} ({} after {} evaluations); trace {}, summary {}",
        summary.z,
        summary.termination,
        summary.evals_used,
        trace_path.display(),
        summary_path.display()
    )?;
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let grid = ExperimentGrid::load(&args.config)?;
    let model = AnyModel::load(&grid.model)?;
    let dir = args.out_dir.unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    let exec = if args.serial {
        Execution::Serial
    } else {
        Execution::Parallel
    };
    let outcomes = run_grid(&grid, &model, exec, args.traces)?;

    if args.traces {
        let traces = dir.join("traces");
        fs::create_dir_all(&traces)?;
        for o in &outcomes {
            let mut w = csv::Writer::from_path(traces.join(o.trace_file_name()))?;
            w.write_record(["k", "X_k", "L_k", "Z_partial", "evals_used"])?;
            for r in o.trace.as_deref().unwrap_or_default() {
                w.serialize((r.k, r.x_k, r.l_k, r.z_partial, r.evals_used))?;
            }
            w.flush()?;
        }
    }
    let records: Vec<RunRecord> = outcomes.into_iter().map(|o| o.record).collect();
    write_records(
        &records,
        BufWriter::new(File::create(dir.join("records.csv"))?),
    )?;
    let summary =
        ExperimentSummary::from_records(&grid.model, model.reference_evidence()?, &records);
    write_json(&dir.join("summary.json"), &summary)?;
    for cell in &summary.cells {
        writeln!(out, "{cell}")?;
    }
    writeln!(out, "{} runs written to {}", records.len(), dir.display())?;
    Ok(())
}

fn cmd_pushforward(args: PushforwardArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let model = AnyModel::load(&args.model)?;
    let against = match args.against {
        AgainstArg::Uniform => Against::Uniform,
        AgainstArg::Law => Against::Law,
    };
    let report = verify_pushforward_against(
        &model,
        args.samples,
        &mut seeded(args.seed),
        args.threshold,
        against,
    )?;
    writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

fn cmd_verify(args: VerifyArgs, out: &mut dyn Write) -> Result<bool, CliError> {
    let spec = PiecewiseSpec::load(&args.spec)?;
    let model = PiecewiseModel::new("verify", &spec)?;
    let p = model.problem();
    let (lhs, rhs) = p.paradigm_both_sides(2000)?;
    let pushforward = verify_pushforward_against(
        &model,
        args.samples,
        &mut seeded(args.seed),
        0.03,
        Against::Law,
    )?;
    let problematic =
        problematic_mass_estimate(&model, args.samples, &mut seeded(args.seed.wrapping_add(1)))?;
    let gap = (lhs - rhs).abs();
    let pass = gap < 1e-8 && pushforward.pass && problematic == 0.0;
    let report = VerifyReport {
        atoms: p.atoms().to_vec(),
        case: p.classify(),
        integral_prior: lhs,
        integral_inverse: rhs,
        identity_gap: gap,
        pushforward,
        problematic_set: p.problematic_set(),
        problematic_mass_estimate: problematic,
        pass,
    };
    writeln!(out, "case {}", report.case)?;
    for a in &report.atoms {
        writeln!(
            out,
            "atom level={} tail_mass={} jump={}",
            a.level, a.tail_mass, a.jump
        )?;
    }
    writeln!(out, "int L dmu = {lhs}, int_0^1 L~ = {rhs}, gap {gap:e}")?;
    writeln!(
        out,
        "pushforward ks = {} ({})",
        report.pushforward.ks_distance,
        if report.pushforward.pass {
            "pass"
        } else {
            "FAIL"
        }
    )?;
    for i in &report.problematic_set {
        writeln!(out, "problematic {} mass {}", i.interval, i.mass)?;
    }
    writeln!(out, "problematic mass estimate {problematic}")?;
    writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    writeln!(out, "{}", if pass { "PASS" } else { "FAIL" })?;
    Ok(pass)
}

fn ensure_parent(path: &Path) -> std::io::Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir),
        _ => Ok(()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    ensure_parent(path)?;
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
