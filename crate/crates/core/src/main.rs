use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hfactor::exact::{SolveError, SolveOutcome, SolverConfig, TilingProblem, DEFAULT_NODE_BUDGET};
use hfactor::experiments::{run_experiment, ExperimentConfig, ExperimentError};
use hfactor::heuristic::{divide_conquer_factor, RecursionParams};
use hfactor::solution::{fmt17, Sig17, SolutionRecord};
use hfactor::{
    analyze, brute_force_oracle, parse_graph, parse_named, sample_instance, validate_solution, GraphH, Mode,
    TilingSolution, WeightDistribution, WeightedInstance,
};

const OUT_DIR_ENV: &str = "HFACTOR_OUT_DIR";

#[derive(Parser)]
#[command(name = "hfactor", version, about = "Minimum-weight H-factors and H-covers of randomly weighted K_n")]
struct Cli {
    /// Worker threads for experiments (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Density invariants of a pattern: table on stderr, JSON on stdout.
    Analyze(GraphArgs),
    /// Minimum-weight partial factor or cover of one instance.
    Solve(SolveArgs),
    /// Most vertices a partial factor within a weight budget can cover.
    Budget(BudgetArgs),
    /// Run an experiment from a JSON config.
    Experiment(ExperimentArgs),
    /// Check a solution record against its instance.
    Validate(ValidateArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct GraphArgs {
    /// Named pattern, e.g. `complete:3` or `complete:4+complete:2`.
    #[arg(long)]
    named: Option<String>,
    /// Edge-list file.
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long, required_unless_present = "instance")]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `exp`, `exp:<rate>` or `uniform`.
    #[arg(long, default_value = "exp:1")]
    dist: WeightDistribution,
    /// Load a binary instance instead of sampling one.
    #[arg(long, conflicts_with_all = ["n", "dump_instance"])]
    instance: Option<PathBuf>,
    /// Write the sampled instance to this path.
    #[arg(long)]
    dump_instance: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum SolverArg {
    Exact,
    Heuristic,
    Oracle,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value = "factor")]
    mode: Mode,
    /// Vertices allowed to stay uncovered.
    #[arg(long, default_value_t = 0)]
    k: usize,
    /// Largest usable edge weight.
    #[arg(long)]
    cap: Option<f64>,
    #[arg(long, value_enum, default_value = "exact")]
    solver: SolverArg,
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    node_budget: u64,
}

#[derive(Args)]
struct BudgetArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    budget: f64,
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    node_budget: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    config: PathBuf,
    /// Output directory; falls back to the config, then $HFACTOR_OUT_DIR,
    /// then the working directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    instance: InstanceArgs,
    /// A `solve` output line or a bare solution record.
    #[arg(long)]
    solution: PathBuf,
}

enum Failure {
    Usage(String),
    Infeasible,
    Timeout(String),
    Invalid(String),
    Interrupted,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Infeasible => 3,
            Failure::Timeout(_) => 4,
            Failure::Interrupted => 130,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn load_pattern(args: &GraphArgs) -> Result<(GraphH, String), Failure> {
    match (&args.named, &args.file) {
        (Some(spec), _) => Ok((parse_named(spec).map_err(usage)?, spec.clone())),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let h = parse_graph(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((h.with_label(label), path.display().to_string()))
        }
        (None, None) => Err(usage("one of --named or --file is required")),
    }
}

#[derive(Serialize)]
struct InstanceEcho {
    n: usize,
    seed: u64,
    dist: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    instance: Option<String>,
}

fn load_instance(args: &InstanceArgs) -> Result<(WeightedInstance, InstanceEcho), Failure> {
    let inst = match &args.instance {
        Some(path) => {
            let file = std::fs::File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            WeightedInstance::read_from(std::io::BufReader::new(file)).map_err(usage)?
        }
        None => {
            let n = args.n.ok_or_else(|| usage("--n is required"))?;
            sample_instance(n, args.dist, args.seed).map_err(usage)?
        }
    };
    if let Some(path) = &args.dump_instance {
        let file = std::fs::File::create(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let mut out = std::io::BufWriter::new(file);
        inst.write_to(&mut out).map_err(usage)?;
        out.flush().map_err(usage)?;
    }
    let echo = InstanceEcho {
        n: inst.n(),
        seed: inst.seed(),
        dist: inst.distribution().to_string(),
        instance: args.instance.as_ref().map(|p| p.display().to_string()),
    };
    Ok((inst, echo))
}

fn emit(value: &impl Serialize) -> Result<(), Failure> {
    let line = serde_json::to_string(value).map_err(usage)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").map_err(usage)
}

fn cmd_analyze(args: &GraphArgs) -> Result<(), Failure> {
    let (h, source) = load_pattern(args)?;
    let r = analyze(&h).map_err(usage)?;
    let rows = [
        ("H", source.clone()),
        ("v_H", r.vertex_count.to_string()),
        ("e_H", r.edge_count.to_string()),
        ("d_H", r.d_h.to_string()),
        ("d*", r.d_star.to_string()),
        ("Δ", r.delta.to_string()),
        ("H* vertices", format!("{:?}", r.h_star_vertices)),
        ("Δ witness", format!("{:?}", r.delta_witness_vertices)),
        ("strictly_balanced", r.strictly_balanced.to_string()),
        ("balanced", r.balanced.to_string()),
        ("|Aut(H)|", r.aut_count.to_string()),
    ];
    let mut err = std::io::stderr().lock();
    for (name, value) in rows {
        let _ = writeln!(err, "{name:<18} {value}");
    }
    emit(&AnalyzeLine { graph: &source, report: &r })
}

#[derive(Serialize)]
struct SolveEcho<'a> {
    command: &'static str,
    graph: &'a str,
    instance: &'a InstanceEcho,
    mode: Mode,
    k: usize,
    cap: Sig17,
    solver: SolverArg,
    node_budget: u64,
}

#[derive(Serialize)]
struct SolveLine<'a> {
    config: SolveEcho<'a>,
    solution: SolutionRecord,
}

#[derive(Serialize)]
struct BudgetEcho<'a> {
    command: &'static str,
    graph: &'a str,
    instance: &'a InstanceEcho,
    budget: Sig17,
    node_budget: u64,
}

#[derive(Serialize)]
struct BudgetLine<'a> {
    config: BudgetEcho<'a>,
    covered: usize,
    solution: SolutionRecord,
}

#[derive(Serialize)]
struct AnalyzeLine<'a> {
    graph: &'a str,
    report: &'a hfactor::DensityReport,
}

#[derive(Serialize)]
struct ValidLine {
    valid: bool,
    total_weight: Sig17,
}

fn report_solution(sol: &TilingSolution) {
    let _ = writeln!(
        std::io::stderr().lock(),
        "{} copies, weight {}, {} uncovered{}",
        sol.copies.len(),
        fmt17(sol.total_weight),
        sol.uncovered,
        if sol.optimal { "" } else { " (not proven optimal)" }
    );
}

fn cmd_solve(args: &SolveArgs) -> Result<(), Failure> {
    let (h, source) = load_pattern(&args.graph)?;
    let (inst, inst_echo) = load_instance(&args.instance)?;
    let cap = args.cap.unwrap_or(f64::INFINITY);
    if !(cap > 0.0) {
        return Err(usage("--cap must be positive"));
    }
    if args.k > inst.n() {
        return Err(usage(format!("--k {} exceeds n = {}", args.k, inst.n())));
    }
    let echo = SolveEcho {
        command: "solve",
        graph: &source,
        instance: &inst_echo,
        mode: args.mode,
        k: args.k,
        cap: Sig17(cap),
        solver: args.solver,
        node_budget: args.node_budget,
    };
    let config = SolverConfig {
        node_budget: args.node_budget,
        ..SolverConfig::default()
    };
    let outcome = match args.solver {
        SolverArg::Exact => {
            let problem = TilingProblem::new(&inst, &h, cap, config).map_err(usage)?;
            match args.mode {
                Mode::Factor => problem.min_factor(args.k),
                Mode::Cover => problem.min_cover(args.k),
            }
        }
        SolverArg::Oracle => brute_force_oracle(&inst, &h, args.mode, args.k, cap),
        SolverArg::Heuristic => {
            if args.mode != Mode::Factor || args.k >= h.vertex_count() || args.cap.is_some() {
                return Err(usage("the heuristic builds complete factors: use --mode factor, --k below v_H and no --cap"));
            }
            let mut params = RecursionParams::for_pattern(&h).map_err(usage)?;
            params.node_budget = args.node_budget;
            let built = divide_conquer_factor(&inst, &h, &params).map_err(usage)?;
            if !built.complete {
                Ok(SolveOutcome::Infeasible)
            } else {
                Ok(SolveOutcome::Solved(built.solution))
            }
        }
    };
    match outcome {
        Ok(SolveOutcome::Solved(sol)) => {
            report_solution(&sol);
            emit(&SolveLine { config: echo, solution: SolutionRecord::from(&sol) })
        }
        Ok(SolveOutcome::Infeasible) => Err(Failure::Infeasible),
        Err(SolveError::Timeout { budget, incumbent }) => {
            if let Some(sol) = incumbent {
                report_solution(&sol);
                emit(&SolveLine { config: echo, solution: SolutionRecord::from(sol.as_ref()) })?;
            }
            Err(Failure::Timeout(format!("node budget of {budget} exhausted")))
        }
        Err(e) => Err(usage(e)),
    }
}

fn cmd_budget(args: &BudgetArgs) -> Result<(), Failure> {
    let (h, source) = load_pattern(&args.graph)?;
    let (inst, inst_echo) = load_instance(&args.instance)?;
    let config = SolverConfig {
        node_budget: args.node_budget,
        ..SolverConfig::default()
    };
    let problem = TilingProblem::new(&inst, &h, f64::INFINITY, config).map_err(usage)?;
    match problem.max_coverage_under_budget(args.budget) {
        Ok(b) => {
            report_solution(&b.solution);
            emit(&BudgetLine {
                config: BudgetEcho {
                    command: "budget",
                    graph: &source,
                    instance: &inst_echo,
                    budget: Sig17(args.budget),
                    node_budget: args.node_budget,
                },
                covered: b.covered,
                solution: SolutionRecord::from(&b.solution),
            })
        }
        Err(SolveError::Timeout { budget, .. }) => Err(Failure::Timeout(format!("node budget of {budget} exhausted"))),
        Err(e) => Err(usage(e)),
    }
}

fn output_dir(args: &ExperimentArgs, cfg: &ExperimentConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.output.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(&args.config).map_err(usage)?;
    let dir = output_dir(args, &cfg);
    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = Arc::clone(&stop);
        // A second handler cannot be installed in the same process; the
        // run still works without one.
        let _ = ctrlc::set_handler(move || stop.store(true, Ordering::SeqCst));
    }
    let out = match run_experiment(&cfg, &stop) {
        Ok(out) => out,
        Err(e @ (ExperimentError::Config(_) | ExperimentError::Graph(_) | ExperimentError::Fit(_))) => {
            return Err(usage(e))
        }
        Err(ExperimentError::Solve(SolveError::Timeout { budget, .. })) => {
            return Err(Failure::Timeout(format!("node budget of {budget} exhausted")))
        }
        Err(e) => return Err(usage(e)),
    };
    let (jsonl, csv) = out.write_to_dir(&dir).map_err(usage)?;
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{} records -> {}", out.records.len(), jsonl.display());
    let _ = writeln!(err, "summary -> {}", csv.display());
    if let Some(fit) = &out.summary.fit {
        let _ = writeln!(
            err,
            "slope {:.4} ± {:.4} (predicted {:.4}), {} cells excluded",
            fit.fit.slope, fit.fit.slope_stderr, fit.predicted_exponent, fit.excluded
        );
    }
    let failures = out.failures().len();
    if failures > 0 {
        let _ = writeln!(err, "{failures} records failed their check");
    }
    if out.truncated {
        return Err(Failure::Interrupted);
    }
    Ok(())
}

fn read_record(path: &Path) -> Result<SolutionRecord, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(text.trim()).map_err(usage)?;
    let record = value.get("solution").cloned().unwrap_or(value);
    serde_json::from_value(record).map_err(usage)
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), Failure> {
    let (h, _) = load_pattern(&args.graph)?;
    let (inst, _) = load_instance(&args.instance)?;
    let record = read_record(&args.solution)?;
    let sol = record.to_solution(&h, &inst).map_err(Failure::Invalid)?;
    if sol.total_weight.to_bits() != record.total_weight.0.to_bits() {
        return Err(Failure::Invalid(format!(
            "recorded weight {} differs from recomputed {}",
            fmt17(record.total_weight.0),
            fmt17(sol.total_weight)
        )));
    }
    if sol.uncovered != record.uncovered {
        return Err(Failure::Invalid(format!(
            "recorded {} uncovered, found {}",
            record.uncovered, sol.uncovered
        )));
    }
    validate_solution(&sol, &inst, &h).map_err(Failure::Invalid)?;
    let _ = writeln!(std::io::stderr().lock(), "valid");
    emit(&ValidLine { valid: true, total_weight: Sig17(sol.total_weight) })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Budget(a) => cmd_budget(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Infeasible => eprintln!("infeasible"),
                Failure::Timeout(m) => eprintln!("timeout: {m}"),
                Failure::Invalid(m) => eprintln!("invalid: {m}"),
                Failure::Interrupted => eprintln!("interrupted; partial results written with a truncation marker"),
            }
            ExitCode::from(f.code())
        }
    }
}
