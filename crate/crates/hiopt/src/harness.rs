//! Benchmark harness: objectives by name, budget sweeps with repeated
//! seeded runs, parallel execution, and a flat CSV results format.
//!
//! Every run's seed is derived from (base seed, budget, repetition), so
//! a sweep is reproducible run by run regardless of execution order or
//! thread count, and any single run can be re-created on its own.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::analysis::regret;
use crate::error::{Error, Result};
use crate::metric::SemiMetric;
use crate::objectives::{NoiseChannel, Objective};
use crate::optimizers::{
    soo_run, stodoo_run, stosoo_run, DooParams, RunOutcome, StoSooParams,
};

/// Points in the reference scan that locates each built-in objective's
/// optimum.
pub const REFERENCE_GRID: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    StoSoo,
    Soo,
    StoDoo,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stosoo" => Ok(Self::StoSoo),
            "soo" => Ok(Self::Soo),
            "stodoo" => Ok(Self::StoDoo),
            other => Err(Error::Config(format!(
                "unknown optimizer '{other}' (expected stosoo, soo, or stodoo)"
            ))),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::StoSoo => "stosoo",
            Self::Soo => "soo",
            Self::StoDoo => "stodoo",
        })
    }
}

/// Full description of a sweep: which objective under which noise,
/// which optimizer, the budgets and repetition count, and optional
/// overrides of the budget-derived parameter defaults.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub objective: String,
    pub sigma: f64,
    pub optimizer: OptimizerKind,
    pub budgets: Vec<u64>,
    pub repetitions: u32,
    pub base_seed: u64,
    pub k: Option<u64>,
    pub h_max: Option<u32>,
    pub delta: Option<f64>,
    pub branching: Option<u32>,
    pub reuse_middle: bool,
    /// Semi-metric for the diameter-driven optimizer.
    pub metric: Option<SemiMetric>,
    /// Truncation bound of the noise channel.
    pub noise_bound: f64,
    /// Knot file for the custom-grid objective.
    pub grid_csv: Option<PathBuf>,
    /// Reference-scan resolution for the cached optimum.
    pub reference_grid: u64,
    pub out: Option<PathBuf>,
    pub dump_tree: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            objective: "two-sine".into(),
            sigma: 0.0,
            optimizer: OptimizerKind::StoSoo,
            budgets: Vec::new(),
            repetitions: 10,
            base_seed: 0,
            k: None,
            h_max: None,
            delta: None,
            branching: None,
            reuse_middle: true,
            metric: None,
            noise_bound: 1.0,
            grid_csv: None,
            reference_grid: REFERENCE_GRID,
            out: None,
            dump_tree: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budgets.is_empty() {
            return Err(Error::Config("no budgets given".into()));
        }
        if self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "budgets must be strictly increasing".into(),
            ));
        }
        if self.repetitions < 1 {
            return Err(Error::Config("need at least 1 repetition".into()));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::Config(format!(
                "sigma must be finite and nonnegative, got {}",
                self.sigma
            )));
        }
        if !self.noise_bound.is_finite() || self.noise_bound <= 0.0 {
            return Err(Error::Config(format!(
                "noise bound must be finite and positive, got {}",
                self.noise_bound
            )));
        }
        if self.reference_grid < 2 {
            return Err(Error::Config("reference grid needs at least 2 points".into()));
        }
        if self.optimizer == OptimizerKind::StoDoo && self.metric.is_none() {
            return Err(Error::Config(
                "the stodoo optimizer needs a semi-metric: pass L and alpha".into(),
            ));
        }
        Ok(())
    }
}

/// Instantiates the configured objective, with its noise channel and a
/// cached reference optimum.
pub fn build_objective(cfg: &RunConfig) -> Result<Objective> {
    let channel = if cfg.sigma == 0.0 {
        NoiseChannel::Zero
    } else {
        NoiseChannel::truncated_gaussian(cfg.sigma, cfg.noise_bound)?
    };
    let mut obj = match cfg.objective.as_str() {
        "two-sine" => Objective::two_sine(channel),
        "garland" => Objective::garland(channel),
        "envelope-mismatch" => Objective::envelope_mismatch(channel),
        "custom-grid" => {
            let path = cfg.grid_csv.as_ref().ok_or_else(|| {
                Error::Config("the custom-grid objective needs --grid-csv".into())
            })?;
            Objective::from_table_csv("custom-grid", path, channel)?
        }
        other => {
            return Err(Error::Config(format!(
                "unknown objective '{other}' (expected two-sine, garland, \
                 envelope-mismatch, or custom-grid)"
            )))
        }
    };
    if obj.known_max().is_none() {
        obj.cache_known_max(cfg.reference_grid)?;
    }
    Ok(obj)
}

/// Optimizer parameters after filling budget-derived defaults for one
/// budget of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedParams {
    StoSoo(StoSooParams),
    Soo {
        n: u64,
        h_max: u32,
        branching: u32,
        reuse_middle: bool,
    },
    StoDoo(DooParams),
}

impl ResolvedParams {
    /// One-line rendering for the CSV configuration echo.
    pub fn describe(&self) -> String {
        match self {
            Self::StoSoo(p) => format!(
                "params: optimizer=stosoo n={} k={} h_max={} delta={:.16e} K={} reuse={}",
                p.n, p.k, p.h_max, p.delta, p.branching, p.reuse_middle
            ),
            Self::Soo {
                n,
                h_max,
                branching,
                reuse_middle,
            } => format!(
                "params: optimizer=soo n={n} h_max={h_max} K={branching} reuse={reuse_middle}"
            ),
            Self::StoDoo(p) => format!(
                "params: optimizer=stodoo n={} delta={:.16e} h_max={} K={} reuse={} \
                 L={:.16e} alpha={:.16e}",
                p.n,
                p.delta,
                p.h_max,
                p.branching,
                p.reuse_middle,
                p.metric.scale(),
                p.metric.exponent()
            ),
        }
    }
}

fn default_k(n: u64) -> u64 {
    let nf = n as f64;
    ((nf / nf.ln().powi(3)).ceil() as u64).clamp(1, n)
}

fn default_delta(n: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParams(format!(
            "the default confidence level needs a budget of at least 2, got {n}; \
             pass delta explicitly"
        )));
    }
    Ok(1.0 / (n as f64).sqrt())
}

/// Fills in the defaults the budget dictates, honoring explicit
/// overrides field by field. The depth cap default uses the resolved k,
/// so overriding k shifts the default cap as well. Overrides that the
/// optimizer has no use for (k or delta for soo, the metric for
/// stosoo/soo) are ignored.
pub fn resolve_params(cfg: &RunConfig, n: u64) -> Result<ResolvedParams> {
    let branching = cfg.branching.unwrap_or(3);
    match cfg.optimizer {
        OptimizerKind::StoSoo => {
            let k = match cfg.k {
                Some(k) => k,
                None => {
                    if n < 2 {
                        return Err(Error::InvalidParams(format!(
                            "the default k needs a budget of at least 2, got {n}; \
                             pass k explicitly"
                        )));
                    }
                    default_k(n)
                }
            };
            let h_max = match cfg.h_max {
                Some(h) => h,
                None => ((n as f64) / k.max(1) as f64).sqrt().ceil() as u32,
            };
            let delta = match cfg.delta {
                Some(d) => d,
                None => default_delta(n)?,
            };
            let p = StoSooParams {
                n,
                k,
                h_max,
                delta,
                branching,
                reuse_middle: cfg.reuse_middle,
            };
            p.validate()?;
            Ok(ResolvedParams::StoSoo(p))
        }
        OptimizerKind::Soo => {
            let h_max = match cfg.h_max {
                Some(h) => h,
                None => (n as f64).sqrt().ceil() as u32,
            };
            if branching < 2 {
                return Err(Error::InvalidParams(format!(
                    "branching factor must be at least 2, got {branching}"
                )));
            }
            Ok(ResolvedParams::Soo {
                n,
                h_max,
                branching,
                reuse_middle: cfg.reuse_middle,
            })
        }
        OptimizerKind::StoDoo => {
            let metric = cfg
                .metric
                .ok_or_else(|| Error::Config("stodoo needs a semi-metric".into()))?;
            let h_max = match cfg.h_max {
                Some(h) => h,
                None => {
                    if n < 2 {
                        return Err(Error::InvalidParams(format!(
                            "the default depth cap needs a budget of at least 2, got {n}; \
                             pass h_max explicitly"
                        )));
                    }
                    ((n as f64) / default_k(n) as f64).sqrt().ceil() as u32
                }
            };
            let delta = match cfg.delta {
                Some(d) => d,
                None => default_delta(n)?,
            };
            let p = DooParams {
                n,
                delta,
                branching,
                h_max,
                metric,
                reuse_middle: cfg.reuse_middle,
            };
            p.validate()?;
            Ok(ResolvedParams::StoDoo(p))
        }
    }
}

/// splitmix64 finalizer; bijective, so distinct inputs stay distinct.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-run seed derived from the base seed, the budget, and the
/// repetition index.
pub fn mix_seed(base: u64, n: u64, rep: u64) -> u64 {
    let a = splitmix64(base);
    let b = splitmix64(a ^ n);
    splitmix64(b ^ rep)
}

/// Worker threads to use: HIOPT_THREADS when set to a positive integer,
/// otherwise the machine's available parallelism.
pub fn available_threads() -> usize {
    threads_from(std::env::var("HIOPT_THREADS").ok().as_deref())
}

fn threads_from(var: Option<&str>) -> usize {
    match var.and_then(|s| s.trim().parse::<usize>().ok()) {
        Some(t) if t >= 1 => t,
        _ => std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1),
    }
}

/// One run's row in the results.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub n: u64,
    pub rep: u32,
    pub seed: u64,
    pub regret: f64,
    pub rec_point: Vec<f64>,
    pub rec_mu: Option<f64>,
    /// Deepest expanded depth; None when nothing was expanded.
    pub depth: Option<u32>,
    pub ms: u64,
}

/// Mean and sample standard deviation of regret across one budget's
/// repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub n: u64,
    pub mean_regret: f64,
    pub std_regret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub optimizer: OptimizerKind,
    pub objective: String,
    pub sigma: f64,
    /// Echo of the exact configuration, defaults resolved, one line per
    /// budget; written as comments at the top of the CSV.
    pub config_lines: Vec<String>,
    pub records: Vec<RunRecord>,
    pub summaries: Vec<RunSummary>,
}

fn run_one(
    obj: &Objective,
    params: &ResolvedParams,
    seed: u64,
) -> Result<RunOutcome> {
    match params {
        ResolvedParams::StoSoo(p) => stosoo_run(obj, p, seed),
        ResolvedParams::Soo {
            n,
            h_max,
            branching,
            reuse_middle,
        } => soo_run(obj, *n, *h_max, *branching, *reuse_middle, seed),
        ResolvedParams::StoDoo(p) => stodoo_run(obj, p, seed),
    }
}

/// Re-creates the single run (budget, repetition) of a sweep, returning
/// the full outcome including the tree. Used for tree dumps.
pub fn single_outcome(
    cfg: &RunConfig,
    obj: &Objective,
    n: u64,
    rep: u32,
) -> Result<RunOutcome> {
    let params = resolve_params(cfg, n)?;
    run_one(obj, &params, mix_seed(cfg.base_seed, n, rep as u64))
}

/// Runs the whole sweep against an already-built objective.
pub fn run_experiment_with(cfg: &RunConfig, obj: &Objective) -> Result<RunResult> {
    cfg.validate()?;
    let resolved: Vec<ResolvedParams> = cfg
        .budgets
        .iter()
        .map(|&n| resolve_params(cfg, n))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, u32)> = (0..cfg.budgets.len())
        .flat_map(|bi| (0..cfg.repetitions).map(move |rep| (bi, rep)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(available_threads())
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let records: Vec<RunRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(bi, rep)| {
                let n = cfg.budgets[bi];
                let seed = mix_seed(cfg.base_seed, n, rep as u64);
                let start = Instant::now();
                let outcome = run_one(obj, &resolved[bi], seed)?;
                let ms = start.elapsed().as_millis() as u64;
                Ok(RunRecord {
                    n,
                    rep,
                    seed,
                    regret: regret(obj, &outcome.recommendation)?,
                    rec_point: outcome.recommendation.point,
                    rec_mu: outcome.recommendation.estimated_value,
                    depth: outcome.tree.deepest_expanded_depth(),
                    ms,
                })
            })
            .collect::<Result<_>>()
    })?;

    let summaries = cfg
        .budgets
        .iter()
        .map(|&n| {
            let regrets: Vec<f64> = records
                .iter()
                .filter(|r| r.n == n)
                .map(|r| r.regret)
                .collect();
            let mean = regrets.iter().sum::<f64>() / regrets.len() as f64;
            let std = if regrets.len() < 2 {
                0.0
            } else {
                let var = regrets.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()
                    / (regrets.len() - 1) as f64;
                var.sqrt()
            };
            RunSummary {
                n,
                mean_regret: mean,
                std_regret: std,
            }
        })
        .collect();

    let mut config_lines = vec![format!(
        "config: objective={} sigma={:.16e} optimizer={} n={} reps={} seed={} bound={:.16e} \
         reference_grid={}",
        cfg.objective,
        cfg.sigma,
        cfg.optimizer,
        cfg.budgets
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(","),
        cfg.repetitions,
        cfg.base_seed,
        cfg.noise_bound,
        cfg.reference_grid,
    )];
    config_lines.extend(resolved.iter().map(|r| r.describe()));

    Ok(RunResult {
        optimizer: cfg.optimizer,
        objective: cfg.objective.clone(),
        sigma: cfg.sigma,
        config_lines,
        records,
        summaries,
    })
}

/// Builds the objective and runs the whole sweep.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let obj = build_objective(cfg)?;
    run_experiment_with(cfg, &obj)
}

pub const CSV_HEADER: &str = "optimizer,objective,sigma,n,rep,seed,regret,rec_x,rec_mu,depth,ms";

fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_point(p: &[f64]) -> String {
    p.iter()
        .map(|v| fmt_float(*v))
        .collect::<Vec<_>>()
        .join(";")
}

impl RunResult {
    /// Writes the sweep as CSV: configuration comments, a header, one
    /// row per run, then one summary row per budget with rep = -1,
    /// regret = mean, rec_x = standard deviation. Floats carry 17
    /// significant digits so parsing them back is bit-exact.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        for line in &self.config_lines {
            writeln!(out, "# {line}")?;
        }
        writeln!(
            out,
            "# summary rows: rep=-1, regret=mean over reps, rec_x=std over reps"
        )?;
        writeln!(out, "{CSV_HEADER}")?;
        let prefix = format!("{},{},{}", self.optimizer, self.objective, fmt_float(self.sigma));
        for r in &self.records {
            writeln!(
                out,
                "{prefix},{},{},{},{},{},{},{},{}",
                r.n,
                r.rep,
                r.seed,
                fmt_float(r.regret),
                fmt_point(&r.rec_point),
                fmt_float(r.rec_mu.unwrap_or(f64::NAN)),
                r.depth.map(i64::from).unwrap_or(-1),
                r.ms,
            )?;
        }
        for s in &self.summaries {
            writeln!(
                out,
                "{prefix},{},-1,0,{},{},nan,-1,0",
                s.n,
                fmt_float(s.mean_regret),
                fmt_float(s.std_regret),
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// One parsed CSV row. Summary rows come back with rep = -1, the mean
/// in `regret`, and the standard deviation as the single rec_x entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub optimizer: String,
    pub objective: String,
    pub sigma: f64,
    pub n: u64,
    pub rep: i64,
    pub seed: u64,
    pub regret: f64,
    pub rec_x: Vec<f64>,
    pub rec_mu: f64,
    pub depth: i64,
    pub ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvData {
    pub comments: Vec<String>,
    pub rows: Vec<CsvRow>,
}

impl CsvData {
    pub fn data_rows(&self) -> impl Iterator<Item = &CsvRow> {
        self.rows.iter().filter(|r| r.rep >= 0)
    }

    pub fn summary_rows(&self) -> impl Iterator<Item = &CsvRow> {
        self.rows.iter().filter(|r| r.rep < 0)
    }
}

/// Parses results CSV text produced by `RunResult::write_csv`.
pub fn parse_result_csv(text: &str) -> Result<CsvData> {
    let mut data = CsvData::default();
    let mut saw_header = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            data.comments.push(comment.trim().to_string());
            continue;
        }
        if !saw_header {
            if line != CSV_HEADER {
                return Err(Error::Parse(format!(
                    "line {}: expected header '{CSV_HEADER}', got '{line}'",
                    lineno + 1
                )));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(Error::Parse(format!(
                "line {}: expected 11 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", lineno + 1));
        let rec_x = fields[7]
            .split(';')
            .map(|s| s.parse::<f64>().map_err(|_| bad("rec_x")))
            .collect::<Result<Vec<f64>>>()?;
        data.rows.push(CsvRow {
            optimizer: fields[0].to_string(),
            objective: fields[1].to_string(),
            sigma: fields[2].parse().map_err(|_| bad("sigma"))?,
            n: fields[3].parse().map_err(|_| bad("n"))?,
            rep: fields[4].parse().map_err(|_| bad("rep"))?,
            seed: fields[5].parse().map_err(|_| bad("seed"))?,
            regret: fields[6].parse().map_err(|_| bad("regret"))?,
            rec_x,
            rec_mu: fields[8].parse().map_err(|_| bad("rec_mu"))?,
            depth: fields[9].parse().map_err(|_| bad("depth"))?,
            ms: fields[10].parse().map_err(|_| bad("ms"))?,
        });
    }
    if !saw_header {
        return Err(Error::Parse("no CSV header found".into()));
    }
    Ok(data)
}

/// Reads `key=value` lines; `#` comments and blank lines are skipped.
pub fn load_key_values(path: &std::path::Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "{}:{}: expected key=value, got '{line}'",
                path.display(),
                lineno + 1
            ))
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}
