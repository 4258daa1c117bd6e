//! `elastograph`: place graph partitions on elastic VMs and price the result.

mod import;
mod render;

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use elastograph::cost::{self, CostReport, DataMovementModel};
use elastograph::metagraph::{
    build_metagraph, parse_edge_list, predict_activation, synthesize_trace, ForecastOptions,
    PartitionMap, RevisitMode, VertexId, DEFAULT_BYTES_PER_EDGE,
};
use elastograph::{
    load_trace, place, write_trace, BillingPolicy, CostEstimator, Millis, PlaceOptions,
    PlacementPlan, Strategy, TimingTrace,
};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    /// Unreadable or malformed input; exit code 2.
    #[error("{0}")]
    Input(String),
    /// Flags that contradict each other or the input; exit code 3.
    #[error("{0}")]
    Config(String),
    #[error("writing output: {0}")]
    Output(#[from] io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Output(_) => 1,
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "elastograph",
    version,
    about = "Elastic VM placement for BSP graph partitions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one strategy on a trace and report its plan and cost.
    Place {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        strategy: Strategy,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Run every strategy on a trace and tabulate the costs.
    Compare {
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Per-superstep wall time, VM count and utilization for one strategy.
    EmitSeries {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = "default")]
        strategy: Strategy,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Forecast a traversal over a partitioned graph and write its trace.
    GenTrace {
        #[command(flatten)]
        graph: GraphArgs,
        /// Vertex the traversal starts from.
        #[arg(long)]
        source: VertexId,
        /// Seconds per local vertex of a subgraph.
        #[arg(long, default_value_t = CostEstimator::default().alpha_per_vertex)]
        alpha: f64,
        /// Seconds per local edge of a subgraph.
        #[arg(long, default_value_t = CostEstimator::default().beta_per_edge)]
        beta: f64,
        #[arg(long, default_value_t = CostEstimator::default().revisit_fraction)]
        revisit_fraction: f64,
        #[arg(long, value_enum, default_value_t = RevisitArg::FirstVisitOnly)]
        revisit_mode: RevisitArg,
        /// Follow remote edges only from source to target vertex.
        #[arg(long)]
        directed: bool,
        #[arg(long)]
        max_supersteps: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_BYTES_PER_EDGE)]
        bytes_per_edge: u64,
        /// Defaults to standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Build the subgraph-level metagraph of a partitioned graph.
    Metagraph {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Convert a `partition superstep millis` log into a trace file.
    ImportLog {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct GraphArgs {
    /// Edge list, one `u v` pair per line.
    #[arg(long)]
    edges: PathBuf,
    /// Partition map, one `vertex partition` pair per line.
    #[arg(long)]
    partitions: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Billing quantum; overrides the trace's own billing section.
    #[arg(long)]
    quantum_seconds: Option<f64>,
    /// Price of one quantum.
    #[arg(long)]
    price: Option<f64>,
    /// Shared-store bandwidth for opt-dm, in bytes per second.
    #[arg(long)]
    bandwidth: Option<u64>,
    /// Wall-clock budget of the exact search.
    #[arg(long, default_value_t = 10_000)]
    opt_budget_ms: u64,
    /// Charge opt-dm transfers only when a partition changes VM.
    #[arg(long)]
    dm_only_on_migration: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RevisitArg {
    FirstVisitOnly,
    FrontierRevisit,
}

impl From<RevisitArg> for RevisitMode {
    fn from(arg: RevisitArg) -> Self {
        match arg {
            RevisitArg::FirstVisitOnly => RevisitMode::FirstVisitOnly,
            RevisitArg::FrontierRevisit => RevisitMode::FrontierRevisit,
        }
    }
}

/// Billing, data movement and search budget resolved against one trace.
struct Evaluation {
    billing: BillingPolicy,
    options: PlaceOptions,
    only_on_migration: bool,
}

impl Evaluation {
    fn resolve(args: &EvalArgs, trace: &TimingTrace) -> CliResult<Self> {
        let base = trace.billing().copied().unwrap_or_default();
        let quantum = match args.quantum_seconds {
            Some(secs) => Millis::from_secs_f64(secs).ok_or_else(|| {
                CliError::Config(format!("--quantum-seconds: invalid value {secs}"))
            })?,
            None => base.quantum,
        };
        let billing = BillingPolicy::new(
            quantum,
            args.price.unwrap_or(base.price_per_quantum),
            args.bandwidth.unwrap_or(base.bandwidth_bytes_per_second),
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Evaluation {
            billing,
            options: PlaceOptions {
                opt_budget: Duration::from_millis(args.opt_budget_ms),
            },
            only_on_migration: args.dm_only_on_migration,
        })
    }

    fn data_movement(&self, strategy: Strategy) -> DataMovementModel {
        if strategy == Strategy::OptDm {
            DataMovementModel::shared_store(self.billing.bandwidth_bytes_per_second)
                .with_only_on_migration(self.only_on_migration)
        } else {
            DataMovementModel::disabled()
        }
    }

    fn run(
        &self,
        strategy: Strategy,
        trace: &TimingTrace,
    ) -> CliResult<(PlacementPlan, CostReport)> {
        if strategy == Strategy::OptDm && trace.partition_sizes().is_none() {
            return Err(CliError::Config(
                "strategy opt-dm needs partition sizes, but the trace has no size_bytes".into(),
            ));
        }
        let plan = place(strategy, trace, &self.options);
        let report = cost::evaluate(&plan, trace, &self.billing, &self.data_movement(strategy))
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok((plan, report))
    }
}

fn read_input(path: &Path) -> CliResult<String> {
    let mut text = String::new();
    let result = if path == Path::new("-") {
        io::stdin().read_to_string(&mut text)
    } else {
        File::open(path).and_then(|mut f| f.read_to_string(&mut text))
    };
    result.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(text)
}

fn read_trace(path: &Path) -> CliResult<TimingTrace> {
    let text = read_input(path)?;
    load_trace(text.as_bytes()).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_graph(args: &GraphArgs) -> CliResult<elastograph::Metagraph> {
    let edges = parse_edge_list(&read_input(&args.edges)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.edges.display())))?;
    let map = PartitionMap::parse(&read_input(&args.partitions)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.partitions.display())))?;
    build_metagraph(&edges, &map).map_err(|e| CliError::Input(e.to_string()))
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) if p != Path::new("-") => Box::new(BufWriter::new(File::create(p)?)),
        _ => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Place {
            trace,
            strategy,
            eval,
            format,
        } => {
            let trace = read_trace(&trace)?;
            let ev = Evaluation::resolve(&eval, &trace)?;
            let (plan, report) = ev.run(strategy, &trace)?;
            let mut out = open_output(None)?;
            render::place(&mut out, format, &trace, &plan, &report, &ev.billing)?;
            out.flush()?;
        }
        Command::Compare {
            trace,
            eval,
            format,
        } => {
            let trace = read_trace(&trace)?;
            let ev = Evaluation::resolve(&eval, &trace)?;
            let strategies: Vec<Strategy> = Strategy::ALL
                .into_iter()
                .filter(|&s| s != Strategy::OptDm || trace.partition_sizes().is_some())
                .collect();
            if strategies.len() < Strategy::ALL.len() {
                eprintln!("note: the trace has no partition sizes; skipping opt-dm");
            }
            let reports = strategies
                .par_iter()
                .map(|&s| ev.run(s, &trace).map(|(_, r)| r))
                .collect::<CliResult<Vec<_>>>()?;
            let mut out = open_output(None)?;
            render::compare(&mut out, format, &reports, &ev.billing)?;
            out.flush()?;
        }
        Command::EmitSeries {
            trace,
            strategy,
            eval,
            format,
        } => {
            let trace = read_trace(&trace)?;
            let ev = Evaluation::resolve(&eval, &trace)?;
            let (plan, _) = ev.run(strategy, &trace)?;
            let schedule =
                cost::activation_schedule(&plan, &trace, &ev.billing, &ev.data_movement(strategy))
                    .map_err(|e| CliError::Config(e.to_string()))?;
            let series = render::series(&plan, &schedule);
            let mut out = open_output(None)?;
            render::write_series(&mut out, format, &series)?;
            out.flush()?;
        }
        Command::GenTrace {
            graph,
            source,
            alpha,
            beta,
            revisit_fraction,
            revisit_mode,
            directed,
            max_supersteps,
            bytes_per_edge,
            output,
        } => {
            let estimator = CostEstimator::new(alpha, beta, revisit_fraction)
                .map_err(|e| CliError::Config(e.to_string()))?;
            if max_supersteps == Some(0) {
                return Err(CliError::Config(
                    "--max-supersteps must be at least 1".into(),
                ));
            }
            let mg = read_graph(&graph)?;
            let start = mg
                .subgraph_of(source)
                .ok_or_else(|| CliError::Input(format!("unknown source vertex {source}")))?;
            let options = ForecastOptions {
                revisit: revisit_mode.into(),
                directed,
                max_supersteps,
            };
            let forecast = predict_activation(&mg, start, &options)
                .map_err(|e| CliError::Input(e.to_string()))?;
            let trace = synthesize_trace(&mg, &forecast, &estimator, bytes_per_edge)
                .map_err(|e| CliError::Input(e.to_string()))?;
            let mut out = open_output(output.as_deref())?;
            write_trace(&trace, &mut out)?;
            out.flush()?;
        }
        Command::Metagraph { graph, output } => {
            let mg = read_graph(&graph)?;
            let mut out = open_output(output.as_deref())?;
            mg.write(&mut out)?;
            out.flush()?;
        }
        Command::ImportLog { log, output } => {
            let text = read_input(&log)?;
            let trace = import::trace_from_log(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", log.display())))?;
            let mut out = open_output(output.as_deref())?;
            write_trace(&trace, &mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
