use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gtrex::bench::{self, ExperimentConfig};
use gtrex::estimators::{glasso, glasso_path, gtrex as run_gtrex, gtrex_threshold_path, neighborhood_path, neighborhood_select};
use gtrex::estimators::{GlassoConfig, GtrexParams, Rule};
use gtrex::gmg::{self, TopologyKind, TopologySpec};
use gtrex::lasso::unit_grid;
use gtrex::metrics::precision_recall;
use gtrex::rng::{self, derive_seed};
use gtrex::trex::TrexConfig;
use gtrex::{DataMatrix, EdgeSet, Error, Normalization, PathResult};

#[derive(Parser)]
#[command(name = "gtrex-cli", version, about = "Graph estimation for Gaussian graphical models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a graph, a precision matrix and Gaussian samples.
    Generate(GenerateArgs),
    /// Estimate a graph from samples.
    Estimate(EstimateArgs),
    /// Compare an estimated edge list with the truth.
    Score(ScoreArgs),
    /// Run a benchmark configuration.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    topology: TopologyKind,
    #[arg(long)]
    p: usize,
    /// Number of edges (defaults to p - 1).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    amin: f64,
    #[arg(long, default_value_t = 1.0)]
    amax: f64,
    #[arg(long, default_value_t = 100.0)]
    cond: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Blocks seeded for four_niches.
    #[arg(long, default_value_t = 4)]
    niches_blocks: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Gtrex,
    Ns,
    Glasso,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Union,
    Intersection,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    method: MethodArg,
    /// Samples as headerless CSV, one row per observation.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 31)]
    b: usize,
    #[arg(long, default_value_t = 0.75)]
    t: f64,
    #[arg(long, default_value_t = 40)]
    q: u32,
    /// TREX iteration cap (default ceil(0.2 p)).
    #[arg(long)]
    max_iter: Option<usize>,
    /// Penalty as a fraction of the data-dependent maximum (ns, glasso).
    #[arg(long, conflicts_with = "path")]
    lambda_frac: Option<f64>,
    /// Emit the whole tuning path instead of a single estimate.
    #[arg(long)]
    path: bool,
    /// Edge rule for neighborhood selection.
    #[arg(long, default_value = "union")]
    rule: RuleArg,
    #[arg(long, default_value = "columns")]
    normalize: Normalization,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    /// Estimated edges.txt.
    #[arg(long)]
    est: PathBuf,
    /// True edges.txt.
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

type CliResult = Result<ExitCode, Error>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(&a),
        Command::Estimate(a) => estimate(&a),
        Command::Score(a) => score(&a),
        Command::Bench(a) => run_bench(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), Error> {
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn generate(a: &GenerateArgs) -> CliResult {
    let k = a.k.unwrap_or(a.p.saturating_sub(1));
    let spec = TopologySpec::new(a.topology, a.p, k, a.seed).with_niches_blocks(a.niches_blocks);
    let edges = gmg::generate_topology(&spec, &mut rng::substream(a.seed, &[1]))?;
    let model = gmg::build_precision(&edges, a.amin, a.amax, a.cond, &mut rng::substream(a.seed, &[2]))?;
    if model.is_degenerate() {
        eprintln!("warning: empty graph, using the identity precision matrix");
    }
    let x = gmg::sample_gaussian(&model, a.n, &mut rng::substream(a.seed, &[3]))?;
    fs::create_dir_all(&a.out)?;
    write(&a.out, "edges.txt", &edges.to_text())?;
    write(&a.out, "theta.csv", &model.theta_csv())?;
    write(&a.out, "samples.csv", &x.to_csv())?;
    Ok(ExitCode::SUCCESS)
}

/// Long-format path: one `grid_value,i,j` line per edge, nodes 1-based.
fn path_csv(path: &PathResult) -> String {
    let mut out = String::from("grid_value,i,j\n");
    for (g, edges) in path.iter() {
        for (i, j) in edges.iter() {
            out.push_str(&format!("{g},{},{}\n", i + 1, j + 1));
        }
    }
    out
}

fn estimate(a: &EstimateArgs) -> CliResult {
    let x = DataMatrix::from_csv(&fs::read_to_string(&a.input)?)?.normalize(a.normalize)?;
    let rule = match a.rule {
        RuleArg::Union => Rule::Union,
        RuleArg::Intersection => Rule::Intersection,
    };
    let frac = || {
        a.lambda_frac
            .ok_or_else(|| Error::Parameter(String::from("give --lambda-frac or --path")))
    };
    fs::create_dir_all(&a.out)?;
    match a.method {
        MethodArg::Gtrex => {
            let params = GtrexParams {
                b: a.b,
                t: a.t,
                trex: TrexConfig {
                    q: a.q,
                    max_iter: a.max_iter,
                    ..TrexConfig::default()
                },
            };
            let res = run_gtrex(&x, &params, derive_seed(a.seed, &[4]))?;
            let failed: usize = res.failures.iter().sum();
            if failed > 0 {
                eprintln!("warning: {failed} TREX solves failed");
            }
            write(&a.out, "edges.txt", &res.edges.to_text())?;
            write(&a.out, "freq.csv", &res.freq.to_csv())?;
            if a.path {
                let path = gtrex_threshold_path(&res.freq, &bench::threshold_grid())?;
                write(&a.out, "path.csv", &path_csv(&path))?;
            }
        }
        MethodArg::Ns => {
            if a.path {
                let (union, intersection) = neighborhood_path(&x, &unit_grid())?;
                let path = if matches!(rule, Rule::Union) { union } else { intersection };
                write(&a.out, "path.csv", &path_csv(&path))?;
            } else {
                let res = neighborhood_select(&x, frac()?)?;
                write(&a.out, "edges.txt", &res.edges(rule).to_text())?;
            }
        }
        MethodArg::Glasso => {
            if a.path {
                let res = glasso_path(&x, &unit_grid(), &GlassoConfig::default())?;
                write(&a.out, "path.csv", &path_csv(&res.path))?;
            } else {
                let f = frac()?;
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::Parameter(String::from("--lambda-frac must lie in (0, 1]")));
                }
                let s = x.sample_covariance();
                let p = s.nrows();
                let max_off = (0..p)
                    .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
                    .fold(0.0f64, |m, (i, j)| m.max(s[(i, j)].abs()));
                let res = glasso(&s, f * max_off, GlassoConfig::default().tol)?;
                write(&a.out, "edges.txt", &res.edges.to_text())?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn score(a: &ScoreArgs) -> CliResult {
    let est = EdgeSet::from_text(&fs::read_to_string(&a.est)?)?;
    let truth = EdgeSet::from_text(&fs::read_to_string(&a.truth)?)?;
    println!("{}", precision_recall(&est, &truth)?.csv_record());
    Ok(ExitCode::SUCCESS)
}

fn run_bench(a: &BenchArgs) -> CliResult {
    let cfg = match fs::read_to_string(&a.config)
        .map_err(Error::from)
        .and_then(|text| ExperimentConfig::from_json(&text))
    {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return Ok(ExitCode::from(2));
        }
    };
    let out = bench::run_experiment(&cfg, a.jobs)?;
    bench::write_outputs(&a.out, &out)?;
    if out.errors.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{} scenario steps failed; see errors.csv", out.errors.len());
        Ok(ExitCode::from(3))
    }
}
