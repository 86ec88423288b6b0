//! The `frugal` command line: argument types, config assembly and the batch
//! commands. Every command writes its artifacts atomically and is a pure
//! function of its configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::datasets::{
    extract_patch_pairs, generate_synthetic, import_csv, load_dataset, load_image_pair,
    save_dataset, write_atomic, write_patch_images, FeatureMode, PatchGrid, SyntheticSpec,
};
use crate::error::{Error, ErrorKind, Result};
use crate::model::{Dataset, Hyperparams, Label, LabelVector};
use crate::report::{ablation_grid, comparison_csv, trace_csv, Grid};
use crate::samplers::SamplerKind;
use crate::session::{run_ablation, run_fully_supervised, run_simulated, stratified_split, MetricsTrace};

#[derive(Debug, Parser)]
#[command(name = "frugal", version, about = "Interactive active learning for change detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulated sessions for every (strategy, seed); one CSV per seed plus summary.txt.
    Run(RunArgs),
    /// Mean and std EER per strategy over seeds, with the fully-supervised floor.
    Compare(RunArgs),
    /// The seven-row ablation grid of the display objective.
    Ablate(RunArgs),
    /// Write a synthetic pool as a dataset directory.
    Generate(GenerateArgs),
    /// Cut a registered image pair into patch pairs and write a dataset directory.
    Extract(ExtractArgs),
    /// Serve annotation sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset directory, or a CSV table with header id,y,f_1..f_d.
    #[arg(long, conflicts_with = "synthetic")]
    pub dataset: Option<PathBuf>,
    /// `default`, or comma separated overrides such as `n=1000,noise=0.2,seed=4`.
    #[arg(long)]
    pub synthetic: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct HpArgs {
    /// TOML file with hyperparameters; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub display_size: Option<usize>,
    /// Number of iterations T.
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Proposed,
    Maxmin,
    Uncertainty,
    Random,
    All,
}

impl StrategyArg {
    fn expand(self) -> Vec<SamplerKind> {
        match self {
            StrategyArg::Proposed => vec![SamplerKind::Proposed],
            StrategyArg::Maxmin => vec![SamplerKind::Maxmin],
            StrategyArg::Uncertainty => vec![SamplerKind::Uncertainty],
            StrategyArg::Random => vec![SamplerKind::Random],
            StrategyArg::All => SamplerKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hp: HpArgs,
    /// Repeatable; `all` expands to every strategy.
    #[arg(long, value_enum, default_value = "all")]
    pub strategy: Vec<StrategyArg>,
    /// Inclusive range `1..10`, a list `1,4,7`, or a single seed.
    #[arg(long, default_value = "1")]
    pub seeds: SeedList,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value = "default")]
    pub synthetic: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub patch_size: u32,
    /// Defaults to the patch size (non-overlapping).
    #[arg(long)]
    pub stride: Option<u32>,
    #[arg(long, value_enum, default_value = "concat")]
    pub feature_mode: FeatureModeArg,
    /// Optional CSV `id,y` with labels for the extracted cells.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeatureModeArg {
    Concat,
    Absdiff,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub serve_port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory of dataset directories, each served under its own name.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Where session event logs are kept and replayed from.
    #[arg(long, default_value = "sessions")]
    pub state_dir: PathBuf,
}

/// Seeds from `a..b` (inclusive), `a,b,c` or `a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

impl FromStr for SeedList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("seeds", format!("cannot parse {s:?}"));
        let s = s.trim();
        let seeds = if let Some((a, b)) = s.split_once("..") {
            let b = b.strip_prefix('=').unwrap_or(b);
            let lo: u64 = a.trim().parse().map_err(|_| bad())?;
            let hi: u64 = b.trim().parse().map_err(|_| bad())?;
            if hi < lo {
                return Err(Error::config("seeds", format!("empty range {s:?}")));
            }
            (lo..=hi).collect()
        } else {
            s.split(',')
                .map(|p| p.trim().parse::<u64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?
        };
        if seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        Ok(SeedList(seeds))
    }
}

/// Where the pool comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// A generator spec; `seed: None` follows the run seed.
    Synthetic { spec: SyntheticSpec, seed: Option<u64> },
    Path(PathBuf),
}

impl DataSource {
    pub fn from_args(args: &DataArgs) -> Result<Self> {
        match (&args.dataset, &args.synthetic) {
            (Some(path), None) => Ok(DataSource::Path(path.clone())),
            (None, Some(spec)) => parse_synthetic(spec),
            (None, None) => Err(Error::config("dataset", "pass --dataset PATH or --synthetic SPEC")),
            (Some(_), Some(_)) => Err(Error::config(
                "dataset",
                "--dataset and --synthetic are mutually exclusive",
            )),
        }
    }

    /// The labeled pool for a run seed.
    pub fn load(&self, run_seed: u64) -> Result<(Dataset, LabelVector)> {
        match self {
            DataSource::Synthetic { spec, seed } => generate_synthetic(&SyntheticSpec {
                seed: seed.unwrap_or(run_seed),
                ..spec.clone()
            }),
            DataSource::Path(path) if path.is_file() => import_csv(path),
            DataSource::Path(path) => {
                let (ds, labels, _) = load_dataset(path)?;
                Ok((ds, labels))
            }
        }
    }

    fn seed_dependent(&self) -> bool {
        matches!(self, DataSource::Synthetic { seed: None, .. })
    }
}

/// Parses `default` or `key=value` overrides of [`SyntheticSpec`].
pub fn parse_synthetic(text: &str) -> Result<DataSource> {
    let mut spec = SyntheticSpec::default();
    let mut seed = None;
    let text = text.trim();
    if text != "default" && !text.is_empty() {
        for part in text.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::config("synthetic", format!("expected key=value, got {part:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |field: &'static str| -> Result<f64> {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::config(field, format!("cannot parse {value:?}")))
            };
            let int = |field: &'static str| -> Result<usize> {
                value
                    .parse::<usize>()
                    .map_err(|_| Error::config(field, format!("cannot parse {value:?}")))
            };
            match key {
                "n" => spec.n = int("n")?,
                "d" => spec.d = int("d")?,
                "positive_rate" => spec.positive_rate = num("positive_rate")?,
                "n_modes" => spec.n_modes = int("n_modes")?,
                "separation" => spec.separation = num("separation")?,
                "noise" => spec.noise = num("noise")?,
                "seed" => {
                    seed = Some(
                        value
                            .parse::<u64>()
                            .map_err(|_| Error::config("seed", format!("cannot parse {value:?}")))?,
                    )
                }
                other => {
                    return Err(Error::config(
                        "synthetic",
                        format!("unknown key {other:?}"),
                    ))
                }
            }
        }
    }
    spec.validate()?;
    Ok(DataSource::Synthetic { spec, seed })
}

/// Resolved configuration shared by `run`, `compare` and `ablate`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    pub hp: Hyperparams,
    pub strategies: Vec<SamplerKind>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn from_args(args: &RunArgs) -> Result<Self> {
        let hp = resolve_hp(&args.hp)?;
        let mut strategies: Vec<SamplerKind> =
            args.strategy.iter().flat_map(|s| s.expand()).collect();
        strategies.sort();
        strategies.dedup();
        let config = RunConfig {
            data: DataSource::from_args(&args.data)?,
            hp,
            strategies,
            seeds: args.seeds.0.clone(),
            out: args.out.clone(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.hp.validate()?;
        if self.strategies.is_empty() {
            return Err(Error::config("strategy", "at least one strategy is required"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        Ok(())
    }
}

pub fn resolve_hp(args: &HpArgs) -> Result<Hyperparams> {
    let mut hp = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            toml::from_str(&text)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        }
        None => Hyperparams::default(),
    };
    if let Some(v) = args.alpha {
        hp.alpha = v;
    }
    if let Some(v) = args.beta {
        hp.beta = v;
    }
    if let Some(v) = args.gamma {
        hp.gamma = v;
    }
    if let Some(v) = args.clusters {
        hp.clusters = v;
    }
    if let Some(v) = args.display_size {
        hp.display_size = v;
    }
    if let Some(v) = args.budget {
        hp.budget = v;
    }
    hp.validate()?;
    Ok(hp)
}

/// Traces of one seed, in strategy order.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRuns {
    pub seed: u64,
    pub traces: Vec<MetricsTrace>,
    pub floor: f64,
}

fn simulate_seeds(config: &RunConfig) -> Result<Vec<SeedRuns>> {
    // Load a seed-independent pool once.
    let shared = if config.data.seed_dependent() {
        None
    } else {
        Some(config.data.load(0)?)
    };
    config
        .seeds
        .par_iter()
        .map(|&seed| {
            let owned;
            let (ds, gt) = match &shared {
                Some(pair) => pair,
                None => {
                    owned = config.data.load(seed)?;
                    &owned
                }
            };
            let split = stratified_split(gt, seed)?;
            let hp = Hyperparams {
                seed,
                ..config.hp.clone()
            };
            let traces = config
                .strategies
                .iter()
                .map(|&s| run_simulated(ds, gt, &hp, s, Some(&split), seed))
                .collect::<Result<Vec<_>>>()?;
            let floor = run_fully_supervised(ds, gt, &split, &hp)?;
            tracing::info!(seed, "simulated {} strategies", traces.len());
            Ok(SeedRuns {
                seed,
                traces,
                floor,
            })
        })
        .collect()
}

fn seed_csv(runs: &SeedRuns) -> String {
    let mut out = String::new();
    for (i, trace) in runs.traces.iter().enumerate() {
        let csv = trace_csv(trace);
        if i == 0 {
            out.push_str(&csv);
        } else {
            out.push_str(csv.split_once('\n').map_or("", |(_, rows)| rows));
        }
    }
    out
}

fn mean_trace_grid(runs: &[SeedRuns]) -> Option<Grid> {
    let first = runs.first()?;
    let mut grid = Grid::from_traces(
        first
            .traces
            .iter()
            .map(|t| (t.strategy.to_string(), t)),
    )?;
    for (row, (_, values)) in grid.rows.iter_mut().enumerate() {
        for (col, slot) in values.iter_mut().enumerate() {
            let eers: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.traces[row].records.get(col).and_then(|rec| rec.eer))
                .collect();
            *slot = (!eers.is_empty()).then(|| eers.iter().sum::<f64>() / eers.len() as f64);
        }
    }
    let floors: Vec<f64> = runs.iter().map(|r| r.floor).collect();
    let floor = floors.iter().sum::<f64>() / floors.len() as f64;
    grid.rows
        .push(("supervised".into(), vec![Some(floor); grid.columns()]));
    Some(grid)
}

/// Written files, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifacts(pub Vec<PathBuf>);

/// One CSV per seed (`seed{N}.csv`, all strategies) and `summary.txt` with
/// the seed-mean grid followed by each seed's grid.
pub fn cmd_run(config: &RunConfig) -> Result<Artifacts> {
    config.validate()?;
    let runs = simulate_seeds(config)?;
    let mut written = Vec::new();
    for r in &runs {
        let name = PathBuf::from(format!("seed{}.csv", r.seed));
        write_atomic(&config.out.join(&name), seed_csv(r).as_bytes())?;
        written.push(name);
    }
    let mut summary = String::new();
    if let Some(grid) = mean_trace_grid(&runs) {
        let _ = writeln!(summary, "mean EER (%) over {} seed(s)\n", runs.len());
        summary.push_str(&grid.render());
    }
    for r in &runs {
        if let Some(grid) = Grid::from_traces(r.traces.iter().map(|t| (t.strategy.to_string(), t))) {
            let _ = writeln!(summary, "\nseed {} (supervised floor {:.2})\n", r.seed, r.floor * 100.0);
            summary.push_str(&grid.render());
        }
    }
    write_atomic(&config.out.join("summary.txt"), summary.as_bytes())?;
    written.push("summary.txt".into());
    Ok(Artifacts(written))
}

/// `comparison.csv` (per-iteration mean and std per strategy plus the
/// supervised floor) and `comparison.txt` (the mean grid).
pub fn cmd_compare(config: &RunConfig) -> Result<Artifacts> {
    config.validate()?;
    if config.strategies.len() < 2 {
        return Err(Error::config("strategy", "compare needs at least two strategies"));
    }
    let runs = simulate_seeds(config)?;
    let curves: Vec<(String, Vec<MetricsTrace>)> = config
        .strategies
        .iter()
        .enumerate()
        .map(|(i, s)| (s.to_string(), runs.iter().map(|r| r.traces[i].clone()).collect()))
        .collect();
    let floors: Vec<f64> = runs.iter().map(|r| r.floor).collect();
    write_atomic(
        &config.out.join("comparison.csv"),
        comparison_csv(&curves, &floors).as_bytes(),
    )?;
    let grid = mean_trace_grid(&runs)
        .map(|g| g.render())
        .unwrap_or_default();
    write_atomic(&config.out.join("comparison.txt"), grid.as_bytes())?;
    Ok(Artifacts(vec!["comparison.csv".into(), "comparison.txt".into()]))
}

/// Per seed: `ablation_seed{N}.txt` (the grid) and `ablation_seed{N}.csv`
/// (all seven traces). Returns the rendered grids too.
pub fn cmd_ablate(config: &RunConfig) -> Result<(Artifacts, Vec<String>)> {
    config.validate()?;
    let tables = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let (ds, gt) = config.data.load(seed)?;
            run_ablation(&ds, &gt, &config.hp, seed).map(|t| (seed, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut written = Vec::new();
    let mut grids = Vec::new();
    for (seed, table) in &tables {
        let grid = ablation_grid(table);
        let txt = PathBuf::from(format!("ablation_seed{seed}.txt"));
        write_atomic(&config.out.join(&txt), grid.as_bytes())?;
        let mut csv = String::from("config,iter,samp_pct,eer\n");
        for (name, trace) in &table.rows {
            for r in &trace.records {
                let eer = r.eer.map(|e| e.to_string()).unwrap_or_default();
                let _ = writeln!(csv, "{name},{},{},{eer}", r.iter, r.samp_pct);
            }
        }
        let csv_name = PathBuf::from(format!("ablation_seed{seed}.csv"));
        write_atomic(&config.out.join(&csv_name), csv.as_bytes())?;
        written.extend([txt, csv_name]);
        grids.push(grid);
    }
    Ok((Artifacts(written), grids))
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let (spec, seed) = match parse_synthetic(&args.synthetic)? {
        DataSource::Synthetic { spec, seed } => (spec, seed),
        DataSource::Path(_) => unreachable!("parse_synthetic builds a synthetic source"),
    };
    let (ds, labels) = generate_synthetic(&SyntheticSpec {
        seed: seed.unwrap_or(spec.seed),
        ..spec
    })?;
    save_dataset(&ds, Some(&labels), None, None, &args.out)?;
    Ok(())
}

pub fn cmd_extract(args: &ExtractArgs) -> Result<usize> {
    let (reference, test) = load_image_pair(&args.reference, &args.test)?;
    let grid = PatchGrid {
        patch_size: args.patch_size,
        stride: args.stride.unwrap_or(args.patch_size),
        width: reference.width(),
        height: reference.height(),
        channels: 3,
    };
    let mode = match args.feature_mode {
        FeatureModeArg::Concat => FeatureMode::Concat,
        FeatureModeArg::Absdiff => FeatureMode::AbsDiff,
    };
    let ds = extract_patch_pairs(&reference, &test, &grid, mode)?;
    let labels = match &args.labels {
        Some(path) => Some(read_label_table(path, &ds)?),
        None => None,
    };
    write_patch_images(&reference, &test, &grid, &args.out)?;
    save_dataset(&ds, labels.as_ref(), Some(mode), Some(grid), &args.out)?;
    Ok(ds.n())
}

fn read_label_table(path: &Path, ds: &Dataset) -> Result<LabelVector> {
    let mut labels = LabelVector::unknown(ds.n());
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let (id, y) = (record.get(0).unwrap_or(""), record.get(1).unwrap_or(""));
        let i = ds
            .index_of(id)
            .ok_or_else(|| Error::Format(format!("{}: unknown id {id:?}", path.display())))?;
        labels.0[i] = match y.trim() {
            "1" | "+1" => Some(Label::Positive),
            "-1" => Some(Label::Negative),
            "" | "0" => None,
            other => {
                return Err(Error::Format(format!(
                    "{}: label {other:?} for {id:?}",
                    path.display()
                )))
            }
        };
    }
    Ok(labels)
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data | ErrorKind::State => 3,
        ErrorKind::Numeric => 4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!("1..10".parse::<SeedList>().unwrap().0, (1..=10).collect::<Vec<_>>());
        assert_eq!("1..=3".parse::<SeedList>().unwrap().0, vec![1, 2, 3]);
        assert_eq!("4, 2,9".parse::<SeedList>().unwrap().0, vec![4, 2, 9]);
        assert_eq!("7".parse::<SeedList>().unwrap().0, vec![7]);
        assert!("5..2".parse::<SeedList>().is_err());
        assert!("x".parse::<SeedList>().is_err());
    }

    #[test]
    fn synthetic_specs() {
        assert_eq!(
            parse_synthetic("default").unwrap(),
            DataSource::Synthetic {
                spec: SyntheticSpec::default(),
                seed: None
            }
        );
        match parse_synthetic("n=500, noise=0.1,seed=3").unwrap() {
            DataSource::Synthetic { spec, seed } => {
                assert_eq!((spec.n, spec.noise, seed), (500, 0.1, Some(3)));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_synthetic("bogus=1").is_err());
        assert!(parse_synthetic("n_modes=1").is_err());
    }

    #[test]
    fn gamma_zero_is_a_config_error() {
        let err = resolve_hp(&HpArgs {
            gamma: Some(0.0),
            ..HpArgs::default()
        })
        .unwrap_err();
        assert_eq!(err.to_string(), "gamma must be positive");
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Format("x".into())), 3);
        assert_eq!(
            exit_code(&Error::NumericFailure {
                index: 0,
                message: "nan".into()
            }),
            4
        );
    }
}
