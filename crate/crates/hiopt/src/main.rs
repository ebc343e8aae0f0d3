use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use hiopt::analysis::{packing_report, xi_event_holds};
use hiopt::error::{Error, Result};
use hiopt::harness::{
    available_threads, build_objective, load_key_values, mix_seed, parse_result_csv,
    resolve_params, run_experiment_with, single_outcome, ResolvedParams, RunConfig,
};
use hiopt::metric::SemiMetric;
use hiopt::optimizers::{default_params, stosoo_run};
use hiopt::plot::{write_loglog_svg, Series};

#[derive(Parser)]
#[command(
    name = "hiopt",
    version,
    about = "Tree-search global optimization of noisy black-box functions",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark sweep and write per-run results as CSV
    Run(RunArgs),
    /// Count packings of the near-optimal set and fit a growth exponent
    Pack(PackArgs),
    /// Estimate how often the confidence event holds over repeated runs
    Xi(XiArgs),
    /// Print the parameter defaults a budget resolves to
    Params(ParamsArgs),
    /// Render a regret-vs-budget SVG chart from a results CSV
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Optional key=value config file; explicit flags override it
    config: Option<PathBuf>,
    /// two-sine | garland | envelope-mismatch | custom-grid
    #[arg(long)]
    objective: Option<String>,
    /// Noise level (0 means exact evaluations)
    #[arg(long)]
    sigma: Option<f64>,
    /// stosoo | soo | stodoo
    #[arg(long)]
    optimizer: Option<String>,
    /// Comma-separated evaluation budgets, ascending
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<u64>>,
    /// Repetitions per budget
    #[arg(long)]
    reps: Option<u32>,
    /// Base seed; per-run seeds derive from (seed, n, rep)
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override: pulls before a cell may expand
    #[arg(long)]
    k: Option<u64>,
    /// Override: maximum expansion depth
    #[arg(long = "h-max")]
    h_max: Option<u32>,
    /// Override: confidence level in (0, 1)
    #[arg(long)]
    delta: Option<f64>,
    /// Override: children per split
    #[arg(long = "K")]
    branching: Option<u32>,
    /// Disable crediting the parent's samples to the middle child
    #[arg(long = "no-reuse")]
    no_reuse: bool,
    /// Write the final tree of the last budget's first repetition here
    #[arg(long = "dump-tree")]
    dump_tree: Option<PathBuf>,
    /// Semi-metric scale (stodoo)
    #[arg(long = "L")]
    scale: Option<f64>,
    /// Semi-metric exponent (stodoo)
    #[arg(long)]
    alpha: Option<f64>,
    /// Noise truncation bound
    #[arg(long)]
    bound: Option<f64>,
    /// Knot file for the custom-grid objective
    #[arg(long = "grid-csv")]
    grid_csv: Option<PathBuf>,
}

#[derive(Args)]
struct PackArgs {
    /// two-sine | garland | envelope-mismatch | custom-grid
    #[arg(long, default_value = "two-sine")]
    objective: String,
    /// Semi-metric scale
    #[arg(long = "L", default_value_t = 1.0)]
    scale: f64,
    /// Semi-metric exponent
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Ball radius factor: balls have radius nu * epsilon
    #[arg(long, default_value_t = 1.0 / 3.0)]
    nu: f64,
    /// Comma-separated scales to pack at
    #[arg(long = "eps-list", value_delimiter = ',', required = true)]
    eps_list: Vec<f64>,
    /// Scan grid resolution
    #[arg(long, default_value_t = 10_000_000)]
    grid: u64,
    /// Knot file for the custom-grid objective
    #[arg(long = "grid-csv")]
    grid_csv: Option<PathBuf>,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct XiArgs {
    /// Independent runs to replay
    #[arg(long, default_value_t = 1000)]
    runs: u64,
    /// Budget per run
    #[arg(long, default_value_t = 2000)]
    n: u64,
    /// Noise level
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    /// two-sine | garland | envelope-mismatch
    #[arg(long, default_value = "two-sine")]
    objective: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override: pulls before a cell may expand
    #[arg(long)]
    k: Option<u64>,
    /// Override: maximum expansion depth
    #[arg(long = "h-max")]
    h_max: Option<u32>,
    /// Override: confidence level in (0, 1)
    #[arg(long)]
    delta: Option<f64>,
    /// Override: children per split
    #[arg(long = "K")]
    branching: Option<u32>,
}

#[derive(Args)]
struct ParamsArgs {
    /// Budget to resolve defaults for
    #[arg(long)]
    n: u64,
}

#[derive(Args)]
struct PlotArgs {
    /// Results CSV produced by `hiopt run`
    input: PathBuf,
    /// Output SVG path (defaults to the input with an .svg extension)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "regret vs budget")]
    title: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Pack(args) => cmd_pack(args),
        Command::Xi(args) => cmd_xi(args),
        Command::Params(args) => cmd_params(args),
        Command::Plot(args) => cmd_plot(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn apply_config_file(cfg: &mut RunConfig, path: &Path) -> Result<()> {
    let mut scale: Option<f64> = None;
    let mut alpha: Option<f64> = None;
    for (key, value) in load_key_values(path)? {
        let bad = |what: &str| Error::Config(format!("{}: bad {what}: '{value}'", path.display()));
        match key.as_str() {
            "objective" => cfg.objective = value,
            "sigma" => cfg.sigma = value.parse().map_err(|_| bad("sigma"))?,
            "optimizer" => cfg.optimizer = value.parse()?,
            "n" => {
                cfg.budgets = value
                    .split(',')
                    .map(|s| s.trim().parse::<u64>().map_err(|_| bad("n")))
                    .collect::<Result<_>>()?
            }
            "reps" => cfg.repetitions = value.parse().map_err(|_| bad("reps"))?,
            "seed" => cfg.base_seed = value.parse().map_err(|_| bad("seed"))?,
            "k" => cfg.k = Some(value.parse().map_err(|_| bad("k"))?),
            "h_max" => cfg.h_max = Some(value.parse().map_err(|_| bad("h_max"))?),
            "delta" => cfg.delta = Some(value.parse().map_err(|_| bad("delta"))?),
            "K" => cfg.branching = Some(value.parse().map_err(|_| bad("K"))?),
            "reuse" => cfg.reuse_middle = value.parse().map_err(|_| bad("reuse"))?,
            "L" => scale = Some(value.parse().map_err(|_| bad("L"))?),
            "alpha" => alpha = Some(value.parse().map_err(|_| bad("alpha"))?),
            "bound" => cfg.noise_bound = value.parse().map_err(|_| bad("bound"))?,
            "grid_csv" => cfg.grid_csv = Some(PathBuf::from(value)),
            "out" => cfg.out = Some(PathBuf::from(value)),
            "dump_tree" => cfg.dump_tree = Some(PathBuf::from(value)),
            other => {
                return Err(Error::Config(format!(
                    "{}: unknown key '{other}'",
                    path.display()
                )))
            }
        }
    }
    if let (Some(l), Some(a)) = (scale, alpha) {
        cfg.metric = Some(SemiMetric::new(l, a)?);
    } else if scale.is_some() || alpha.is_some() {
        return Err(Error::Config(
            "a semi-metric needs both L and alpha".into(),
        ));
    }
    Ok(())
}

fn merge_metric(
    existing: Option<SemiMetric>,
    scale: Option<f64>,
    alpha: Option<f64>,
) -> Result<Option<SemiMetric>> {
    match (scale, alpha) {
        (None, None) => Ok(existing),
        (Some(l), Some(a)) => Ok(Some(SemiMetric::new(l, a)?)),
        (l, a) => {
            // one side given on the command line completes or replaces
            // the config-file metric
            let base = existing
                .ok_or_else(|| Error::Config("a semi-metric needs both L and alpha".into()))?;
            Ok(Some(SemiMetric::new(
                l.unwrap_or_else(|| base.scale()),
                a.unwrap_or_else(|| base.exponent()),
            )?))
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        apply_config_file(&mut cfg, path)?;
    }
    if let Some(v) = args.objective {
        cfg.objective = v;
    }
    if let Some(v) = args.sigma {
        cfg.sigma = v;
    }
    if let Some(v) = &args.optimizer {
        cfg.optimizer = v.parse()?;
    }
    if let Some(v) = args.n {
        cfg.budgets = v;
    }
    if let Some(v) = args.reps {
        cfg.repetitions = v;
    }
    if let Some(v) = args.seed {
        cfg.base_seed = v;
    }
    if let Some(v) = args.out {
        cfg.out = Some(v);
    }
    if let Some(v) = args.k {
        cfg.k = Some(v);
    }
    if let Some(v) = args.h_max {
        cfg.h_max = Some(v);
    }
    if let Some(v) = args.delta {
        cfg.delta = Some(v);
    }
    if let Some(v) = args.branching {
        cfg.branching = Some(v);
    }
    if args.no_reuse {
        cfg.reuse_middle = false;
    }
    if let Some(v) = args.dump_tree {
        cfg.dump_tree = Some(v);
    }
    if let Some(v) = args.bound {
        cfg.noise_bound = v;
    }
    if let Some(v) = args.grid_csv {
        cfg.grid_csv = Some(v);
    }
    cfg.metric = merge_metric(cfg.metric, args.scale, args.alpha)?;

    cfg.validate()?;
    let obj = build_objective(&cfg)?;
    let result = run_experiment_with(&cfg, &obj)?;

    match &cfg.out {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            result.write_csv(&mut out)?;
            out.flush()?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            result.write_csv(&mut stdout)?;
        }
    }

    if let Some(path) = &cfg.dump_tree {
        let last = *cfg.budgets.last().expect("validated nonempty");
        let outcome = single_outcome(&cfg, &obj, last, 0)?;
        let mut out = BufWriter::new(File::create(path)?);
        outcome.tree.dump(&mut out)?;
        out.flush()?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_pack(args: PackArgs) -> Result<()> {
    let cfg = RunConfig {
        objective: args.objective,
        sigma: 0.0,
        grid_csv: args.grid_csv,
        ..RunConfig::default()
    };
    let obj = build_objective(&cfg)?;
    let metric = SemiMetric::new(args.scale, args.alpha)?;
    let report = packing_report(&obj, &metric, &args.eps_list, args.nu, args.grid)?;
    match &args.out {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            report.write_csv(&mut out)?;
            out.flush()?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            report.write_csv(&mut stdout)?;
        }
    }
    println!("fitted_exponent={:.6}", report.fitted_exponent);
    Ok(())
}

fn cmd_xi(args: XiArgs) -> Result<()> {
    let cfg = RunConfig {
        objective: args.objective,
        sigma: args.sigma,
        budgets: vec![args.n],
        base_seed: args.seed,
        k: args.k,
        h_max: args.h_max,
        delta: args.delta,
        branching: args.branching,
        ..RunConfig::default()
    };
    if args.runs == 0 {
        return Err(Error::Config("need at least 1 run".into()));
    }
    let obj = build_objective(&cfg)?;
    let params = match resolve_params(&cfg, args.n)? {
        ResolvedParams::StoSoo(p) => p,
        other => unreachable!("xi always resolves the stochastic optimizer, got {other:?}"),
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(available_threads())
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let holds = pool.install(|| {
        (0..args.runs)
            .into_par_iter()
            .map(|rep| -> Result<u64> {
                let seed = mix_seed(args.seed, args.n, rep);
                let out = stosoo_run(&obj, &params, seed)?;
                Ok(u64::from(xi_event_holds(&out.trace, &obj, &params)?))
            })
            .try_reduce(|| 0u64, |a, b| Ok(a + b))
    })?;

    let fraction = holds as f64 / args.runs as f64;
    println!(
        "runs={} holds={} fraction={:.6} one_minus_delta={:.6}",
        args.runs,
        holds,
        fraction,
        1.0 - params.delta
    );
    Ok(())
}

fn cmd_params(args: ParamsArgs) -> Result<()> {
    let p = default_params(args.n)?;
    println!("n={}", p.n);
    println!("k={}", p.k);
    println!("h_max={}", p.h_max);
    println!("delta={:.16e}", p.delta);
    println!("K={}", p.branching);
    println!("reuse={}", p.reuse_middle);
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input)?;
    let data = parse_result_csv(&text)?;

    // one series per (optimizer, objective, sigma) group of summaries
    let mut series: Vec<Series> = Vec::new();
    for row in data.summary_rows() {
        let label = format!("{} {} sigma={}", row.optimizer, row.objective, row.sigma);
        let std = row.rec_x.first().copied().unwrap_or(0.0);
        let point = (row.n as f64, row.regret, std);
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push(point),
            None => series.push(Series {
                label,
                points: vec![point],
            }),
        }
    }
    if series.is_empty() {
        return Err(Error::Parse(
            "no summary rows (rep=-1) in the input CSV".into(),
        ));
    }
    for s in &mut series {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let out = args
        .out
        .unwrap_or_else(|| args.input.with_extension("svg"));
    write_loglog_svg(&series, &args.title, &out)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}
