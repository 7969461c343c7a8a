//! Command-line front end: `gen`, `check` and `bench`.

mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::thread;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pathgen::{
    construct_path, parse_bool_expr, parse_program, GoalSpec, NodeId, Program, SearchConfig, SearchOutcome,
    SearchResult, Strategy, Target,
};

pub use report::{BenchReport, BenchRow, GoalReport, Outcome, RunReport, StatsReport, TargetReport};

/// Process exit codes.
pub mod exit {
    pub const WITNESS: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const INFEASIBLE: i32 = 2;
    pub const EXHAUSTED: i32 = 3;
}

/// Path bound used by `check --prove-infeasible` unless overridden.
pub const DEFAULT_PROOF_BOUND: usize = 200;

#[derive(Debug, Parser)]
#[command(name = "pathgen", version, about = "Test data generation by path construction and exact integer solving")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an input vector reaching a target.
    Gen(GenArgs),
    /// Search for a witness violating a safety property.
    Check(CheckArgs),
    /// Compare path construction strategies over seeded trials.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Forward,
    Backward,
    Split,
    Mixed,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Forward => Strategy::Forward,
            StrategyArg::Backward => Strategy::Backward,
            StrategyArg::Split => Strategy::Split,
            StrategyArg::Mixed => Strategy::Mixed,
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct GoalArgs {
    /// CFG source file.
    #[arg(long)]
    pub program: PathBuf,
    #[arg(long, conflicts_with = "target_edge", required_unless_present = "target_edge")]
    pub target_node: Option<u32>,
    /// Edge as `<from>:<to>`.
    #[arg(long, value_parser = parse_edge)]
    pub target_edge: Option<(u32, u32)>,
    /// Condition required on arrival at the target; repeatable.
    #[arg(long = "constraint")]
    pub constraints: Vec<String>,
}

#[derive(Clone, Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub goal: GoalArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = StrategyArg::Backward)]
    pub strategy: StrategyArg,
    #[arg(long)]
    pub max_attempts: Option<u32>,
    #[arg(long)]
    pub max_path_len: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Independent searches run concurrently with seeds `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: u32,
}

#[derive(Clone, Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub gen: GenArgs,
    /// Explore every path up to the length bound before giving up.
    #[arg(long)]
    pub prove_infeasible: bool,
}

#[derive(Clone, Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub goal: GoalArgs,
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Strategies to compare.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [StrategyArg::Forward, StrategyArg::Backward, StrategyArg::Split])]
    pub strategies: Vec<StrategyArg>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

fn parse_edge(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once(':').ok_or("expected <from>:<to>")?;
    let a = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a, b))
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Program { path: PathBuf, source: pathgen::CfgError },
    #[error("constraint `{text}`: {source}")]
    Constraint { text: String, source: pathgen::CfgError },
    #[error(transparent)]
    Engine(#[from] pathgen::EngineError),
}

/// A loaded program and goal.
pub struct Query {
    pub program: Program,
    pub goal: GoalSpec,
    pub report: GoalReport,
}

impl GoalArgs {
    pub fn load(&self) -> Result<Query, CliError> {
        let text = std::fs::read_to_string(&self.program)
            .map_err(|source| CliError::Io { path: self.program.clone(), source })?;
        let mut program =
            parse_program(&text).map_err(|source| CliError::Program { path: self.program.clone(), source })?;
        if let Some(stem) = self.program.file_stem() {
            program.name = stem.to_string_lossy().into_owned();
        }
        let constraints = self
            .constraints
            .iter()
            .map(|c| parse_bool_expr(&program, c).map_err(|source| CliError::Constraint { text: c.clone(), source }))
            .collect::<Result<Vec<_>, _>>()?;
        let target = match (self.target_node, self.target_edge) {
            (Some(n), _) => Target::Node(NodeId(n)),
            (None, Some((a, b))) => Target::Edge(NodeId(a), NodeId(b)),
            (None, None) => unreachable!("clap requires a target"),
        };
        Ok(Query {
            report: GoalReport { target: target.into(), constraints: self.constraints.clone() },
            goal: GoalSpec { target, constraints },
            program,
        })
    }
}

impl GenArgs {
    pub fn config(&self) -> SearchConfig {
        let mut cfg = SearchConfig { seed: self.seed, strategy: self.strategy.into(), ..SearchConfig::default() };
        if let Some(n) = self.max_attempts {
            cfg.max_attempts = n;
        }
        if let Some(n) = self.max_path_len {
            cfg.max_path_len = n;
        }
        cfg
    }
}

/// Run `jobs` searches with consecutive seeds; the lowest seed with a
/// witness wins, so the result does not depend on thread timing.
fn search(query: &Query, cfg: &SearchConfig, jobs: u32) -> Result<(u64, SearchResult), CliError> {
    if jobs == 1 {
        return Ok((cfg.seed, construct_path(&query.program, &query.goal, cfg)?));
    }
    let results: Vec<(u64, SearchResult)> = thread::scope(|s| {
        let handles: Vec<_> = (0..u64::from(jobs))
            .map(|i| {
                let cfg = SearchConfig { seed: cfg.seed.wrapping_add(i), ..cfg.clone() };
                s.spawn(move || construct_path(&query.program, &query.goal, &cfg).map(|r| (cfg.seed, r)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("search thread panicked")).collect::<Result<_, _>>()
    })?;
    let pick = results
        .iter()
        .position(|(_, r)| matches!(r.outcome, SearchOutcome::Found(_)))
        .or_else(|| results.iter().position(|(_, r)| r.outcome == SearchOutcome::Infeasible))
        .unwrap_or(0);
    Ok(results.into_iter().nth(pick).expect("at least one job"))
}

fn run_report(query: &Query, args: &GenArgs, cfg: &SearchConfig, bound: Option<usize>) -> Result<RunReport, CliError> {
    let (winner, result) = search(query, cfg, args.jobs)?;
    let (outcome, vector, path) = match result.outcome {
        SearchOutcome::Found(w) => (Outcome::Vector, Some(w.inputs), w.path.into_iter().map(|n| n.0).collect()),
        SearchOutcome::Infeasible => (Outcome::Infeasible, None, Vec::new()),
        SearchOutcome::BudgetExhausted => (Outcome::BudgetExhausted, None, Vec::new()),
    };
    Ok(RunReport {
        program: query.program.name.clone(),
        goal: query.report.clone(),
        seed: cfg.seed,
        strategy: cfg.strategy.to_string(),
        outcome,
        vector,
        path,
        stats: result.stats.into(),
        bound: bound.filter(|_| outcome == Outcome::Infeasible),
        winning_seed: (args.jobs > 1).then_some(winner),
    })
}

pub fn cmd_gen(args: &GenArgs) -> Result<RunReport, CliError> {
    let query = args.goal.load()?;
    run_report(&query, args, &args.config(), None)
}

pub fn cmd_check(args: &CheckArgs) -> Result<RunReport, CliError> {
    let query = args.gen.goal.load()?;
    let mut cfg = args.gen.config();
    let bound = args.prove_infeasible.then(|| {
        let l = args.gen.max_path_len.unwrap_or(DEFAULT_PROOF_BOUND);
        cfg = cfg.clone().exhaustive(l);
        l
    });
    run_report(&query, &args.gen, &cfg, bound)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport, CliError> {
    let query = args.goal.load()?;
    let mut rows = Vec::new();
    for &s in &args.strategies {
        let strategy: Strategy = s.into();
        let mut row = BenchRow {
            strategy: strategy.to_string(),
            trials: args.trials,
            found: 0,
            infeasible: 0,
            exhausted: 0,
            mean_attempts: 0.0,
            mean_steps: 0.0,
            mean_checks: 0.0,
        };
        let (mut attempts, mut steps, mut checks) = (0u64, 0u64, 0u64);
        for i in 0..args.trials {
            let cfg = SearchConfig { seed: args.seed.wrapping_add(i), strategy, ..SearchConfig::default() };
            let r = construct_path(&query.program, &query.goal, &cfg)?;
            match r.outcome {
                SearchOutcome::Found(_) => row.found += 1,
                SearchOutcome::Infeasible => row.infeasible += 1,
                SearchOutcome::BudgetExhausted => row.exhausted += 1,
            }
            attempts += r.stats.attempts;
            steps += r.stats.steps;
            checks += r.stats.checks;
        }
        let n = args.trials.max(1) as f64;
        row.mean_attempts = attempts as f64 / n;
        row.mean_steps = steps as f64 / n;
        row.mean_checks = checks as f64 / n;
        rows.push(row);
    }
    let mut ranking: Vec<&BenchRow> = rows.iter().collect();
    ranking.sort_by(|a, b| a.mean_checks.total_cmp(&b.mean_checks));
    let ranking = ranking.into_iter().map(|r| r.strategy.clone()).collect();
    Ok(BenchReport {
        program: query.program.name.clone(),
        goal: query.report,
        seed: args.seed,
        trials: args.trials,
        rows,
        ranking,
    })
}

fn exit_code(outcome: Outcome) -> i32 {
    match outcome {
        Outcome::Vector => exit::WITNESS,
        Outcome::Infeasible => exit::INFEASIBLE,
        Outcome::BudgetExhausted => exit::EXHAUSTED,
    }
}

/// Parse `args` (including the program name), run the command, write the
/// report to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::WITNESS };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a).map(|r| (render(&r, a.format), exit_code(r.outcome))),
        Command::Check(a) => cmd_check(a).map(|r| (render(&r, a.gen.format), exit_code(r.outcome))),
        Command::Bench(a) => cmd_bench(a).map(|r| {
            let text = match a.format {
                Format::Json => r.to_json() + "\n",
                Format::Text => r.to_text(),
            };
            (text, exit::WITNESS)
        }),
    };
    match result {
        Ok((text, code)) => {
            let _ = out.write_all(text.as_bytes());
            code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit::USAGE
        }
    }
}

fn render(r: &RunReport, format: Format) -> String {
    match format {
        Format::Json => r.to_json() + "\n",
        Format::Text => r.to_text(),
    }
}
