use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kopt_core::generators;
use kopt_core::graph::{largest_connected_component, load_edge_list_path, write_edge_list};
use kopt_core::optimize::{self, AlgoParams, Algorithm, Evaluation};
use kopt_core::sketch::ToleranceMode;
use kopt_core::verify::{self, Perturbation, Scale};
use kopt_core::{Graph, KoptError};

mod output;

use output::{write_bench_header, write_bench_rows, write_run, Format};

#[derive(Parser)]
#[command(name = "kopt", version, about = "Kirchhoff index minimization by adding edges")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Keep the largest connected component of an edge list.
    Prepare {
        input: PathBuf,
        output: PathBuf,
    },
    /// Select k edges with one algorithm.
    Run(RunArgs),
    /// Run the oracle and bound checks.
    Verify {
        #[arg(long, value_enum, default_value = "tiny")]
        scale: ScaleArg,
        /// Test hook: offset added to the maintained pseudoinverse.
        #[arg(long, default_value_t = 0.0, hide = true)]
        perturb_pinv: f64,
        #[arg(long)]
        json: bool,
    },
    /// Sweep algorithms, graphs and budgets into one CSV.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Tiny,
    Desk,
}

#[derive(Args)]
struct ParamArgs {
    /// Overall accuracy; sets mu = eps/24, beta = delta = eps/3 and the
    /// worst-case solver tolerance.
    #[arg(long, short = 'e')]
    epsilon: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Falls back to KOPT_SEED, then 0.
    #[arg(long, env = "KOPT_SEED")]
    seed: Option<u64>,
    #[arg(long = "c-jl")]
    c_jl: Option<f64>,
    /// Disable eccentricity pruning in fastgrad+.
    #[arg(long)]
    no_prune: bool,
    /// `formula`, `fixed:<tol>` or a bare tolerance.
    #[arg(long)]
    tolerance: Option<String>,
    /// `auto`, `exact`, `estimate[:probes]` or `skip`.
    #[arg(long, default_value = "auto")]
    evaluation: String,
    #[arg(long)]
    dense_limit: Option<usize>,
    /// Directory for cached embeddings.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Edge list (optionally .gz).
    #[arg(long, short, conflicts_with = "graph", required_unless_present = "graph")]
    input: Option<PathBuf>,
    /// Synthetic graph descriptor, e.g. `ba:1000:5:1`.
    #[arg(long)]
    graph: Option<String>,
    #[arg(long, short)]
    algo: Algorithm,
    #[arg(short, long, default_value_t = 50)]
    k: usize,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct BenchArgs {
    /// Edge list paths or synthetic descriptors.
    #[arg(long, num_args = 0.., value_delimiter = ',')]
    graphs: Vec<String>,
    #[arg(long, num_args = 0.., value_delimiter = ',')]
    algos: Vec<Algorithm>,
    #[arg(long, num_args = 0.., value_delimiter = ',')]
    ks: Vec<usize>,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Failure with its exit code: 1 for runtime errors, 2 for usage errors.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<KoptError> for Failure {
    fn from(e: KoptError) -> Self {
        let code = match e {
            KoptError::BudgetTooLarge { .. }
            | KoptError::InvalidParameter(_)
            | KoptError::Disconnected { .. }
            | KoptError::DenseLimit { .. }
            | KoptError::BruteForceLimit { .. } => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Prepare { input, output } => prepare(&input, &output),
        Command::Run(args) => run(args),
        Command::Verify {
            scale,
            perturb_pinv,
            json,
        } => verify_cmd(scale, perturb_pinv, json),
        Command::Bench(args) => bench(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn prepare(input: &Path, output: &Path) -> CliResult<u8> {
    let (graph, report) = load_edge_list_path(input)?;
    let (components, _) = graph.components();
    let lcc = largest_connected_component(&graph);
    write_edge_list(&lcc, BufWriter::new(File::create(output)?))?;
    let mut out = io::stdout().lock();
    writeln!(out, "edge_lines: {}", report.edge_lines)?;
    writeln!(out, "dropped: {}", report.dropped())?;
    writeln!(out, "self_loops: {}", report.self_loops)?;
    writeln!(out, "duplicates: {}", report.duplicates)?;
    writeln!(out, "components: {components}")?;
    writeln!(out, "input_n: {}", graph.n())?;
    writeln!(out, "input_m: {}", graph.m())?;
    writeln!(out, "n: {}", lcc.n())?;
    writeln!(out, "m: {}", lcc.m())?;
    Ok(0)
}

fn parse_tolerance(s: &str) -> CliResult<ToleranceMode> {
    let s = s.trim().to_ascii_lowercase();
    if s == "formula" {
        return Ok(ToleranceMode::Formula);
    }
    let v = s.strip_prefix("fixed:").unwrap_or(&s);
    v.parse::<f64>()
        .map(ToleranceMode::Fixed)
        .map_err(|_| Failure::usage(format!("bad tolerance '{s}'; use formula, fixed:<tol> or a number")))
}

fn parse_evaluation(s: &str) -> CliResult<Evaluation> {
    match s.trim().to_ascii_lowercase().as_str() {
        "auto" => Ok(Evaluation::Auto),
        "exact" => Ok(Evaluation::Exact),
        "skip" => Ok(Evaluation::Skip),
        "estimate" => Ok(Evaluation::Estimate { probes: 16 }),
        other => other
            .strip_prefix("estimate:")
            .and_then(|p| p.parse().ok())
            .map(|probes| Evaluation::Estimate { probes })
            .ok_or_else(|| Failure::usage(format!("bad evaluation mode '{s}'"))),
    }
}

fn build_params(k: usize, a: &ParamArgs) -> CliResult<AlgoParams> {
    let seed = a.seed.unwrap_or(0);
    let mut p = match a.epsilon {
        Some(eps) => AlgoParams::from_epsilon(k, eps, seed),
        None => AlgoParams::benchmark_defaults(k, seed),
    };
    if let Some(mu) = a.mu {
        p.mu = mu;
    }
    if let Some(beta) = a.beta {
        p.beta = beta;
    }
    if let Some(delta) = a.delta {
        p.delta = delta;
    }
    if let Some(c) = a.c_jl {
        p.c_jl = c;
    }
    if let Some(t) = &a.tolerance {
        p.tolerance = parse_tolerance(t)?;
    }
    if let Some(d) = a.dense_limit {
        p.dense_limit = d;
    }
    p.prune = !a.no_prune;
    p.evaluation = parse_evaluation(&a.evaluation)?;
    p.cache_dir = a.cache_dir.clone();
    p.validate()?;
    Ok(p)
}

/// An existing path is read as an edge list; anything else must be a
/// synthetic descriptor.
fn load_graph(source: &str) -> CliResult<Graph> {
    let path = Path::new(source);
    if path.exists() {
        return Ok(load_edge_list_path(path)?.0);
    }
    generators::from_descriptor(source)
        .ok_or_else(|| Failure::usage(format!("'{source}' is neither a file nor a graph descriptor")))
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn run(args: RunArgs) -> CliResult<u8> {
    let params = build_params(args.k, &args.params)?;
    let graph = match (&args.input, &args.graph) {
        (Some(p), _) => load_edge_list_path(p)?.0,
        (None, Some(d)) => load_graph(d)?,
        (None, None) => return Err(Failure::usage("one of --input or --graph is required")),
    };
    let result = optimize::run(args.algo, &graph, &params)?;
    let mut out = open_output(args.output.as_deref())?;
    write_run(&mut out, &result, args.format)?;
    out.flush()?;
    Ok(0)
}

fn verify_cmd(scale: ScaleArg, perturb_pinv: f64, json: bool) -> CliResult<u8> {
    let scale = match scale {
        ScaleArg::Tiny => Scale::Tiny,
        ScaleArg::Desk => Scale::Desk,
    };
    let reports = verify::run_suite(
        scale,
        Perturbation {
            pinv_offset: perturb_pinv,
        },
    )?;
    let mut out = io::stdout().lock();
    if json {
        serde_json::to_writer_pretty(&mut out, &reports).map_err(io::Error::from)?;
        writeln!(out)?;
    } else {
        for r in &reports {
            writeln!(out, "{r}")?;
        }
    }
    Ok(if verify::all_passed(&reports) { 0 } else { 1 })
}

fn bench(args: BenchArgs) -> CliResult<u8> {
    let out = open_output(args.output.as_deref())?;
    let mut csv = write_bench_header(out)?;
    let mut ks = args.ks.clone();
    ks.sort_unstable();
    ks.dedup();
    let Some(&k_max) = ks.last() else {
        csv.flush()?;
        return Ok(0);
    };
    for source in &args.graphs {
        let graph = match load_graph(source) {
            Ok(g) => g,
            Err(f) => {
                log::error!("{source}: {}", f.message);
                continue;
            }
        };
        for &algo in &args.algos {
            // greedy prefixes are the smaller-budget runs, except for brute force
            let budgets: Vec<usize> = if algo == Algorithm::Brute { ks.clone() } else { vec![k_max] };
            for k in budgets {
                let outcome = build_params(k, &args.params).and_then(|p| Ok(optimize::run(algo, &graph, &p)?));
                match outcome {
                    Ok(r) => {
                        let wanted: Vec<usize> = if algo == Algorithm::Brute { vec![k] } else { ks.clone() };
                        write_bench_rows(&mut csv, source, &r, &wanted)?;
                    }
                    Err(f) => log::error!("{algo} on {source} (k = {k}): {}", f.message),
                }
            }
        }
    }
    csv.flush()?;
    Ok(0)
}
