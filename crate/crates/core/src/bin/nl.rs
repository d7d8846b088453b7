use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use neurochaos::chaosfex::{export_csv, transform, NormalizationMode};
use neurochaos::data::{stratified_split, LabeledDataset, Manifest};
use neurochaos::experiment::{
    compare, normalize_for_split, run_high, run_low, tune_on_train_split, ResultsDocument,
    RunOptions, RunParams, HIGH_TRAIN_FRACTION, LOW_N_RANGE,
};
use neurochaos::pipeline::Algorithm;
use neurochaos::tuning::{write_trace_csv, Grid, SearchOptions, TuneMode, DEFAULT_FOLDS};
use neurochaos::{ChaosConfig, Error, MapKind};

#[derive(Parser, Debug)]
#[command(name = "nl", version, about = "Neurochaos learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train and evaluate one algorithm in the high or low training-sample regime.
    Run(RunArgs),
    /// Grid search with stratified k-fold CV on the training split.
    Tune(TuneArgs),
    /// Boost of a hybrid result file over a baseline result file.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RegimeArg {
    High,
    Low,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TuneModeArg {
    Staged,
    Joint,
}

impl From<TuneModeArg> for TuneMode {
    fn from(m: TuneModeArg) -> Self {
        match m {
            TuneModeArg::Staged => TuneMode::Staged,
            TuneModeArg::Joint => TuneMode::Joint,
        }
    }
}

#[derive(Args, Debug)]
struct DatasetArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    dataset: String,
    /// chaosnet, knn, gnb, cfx-knn or cfx-gnb
    #[arg(long)]
    algo: Algorithm,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fit min/max on training rows only instead of the whole dataset.
    #[arg(long)]
    no_leak: bool,
}

impl DatasetArgs {
    fn normalization(&self) -> NormalizationMode {
        if self.no_leak {
            NormalizationMode::TrainOnly
        } else {
            NormalizationMode::WholeDataset
        }
    }

    fn load(&self) -> anyhow::Result<(Manifest, LabeledDataset)> {
        let manifest = Manifest::load(&self.manifest)?;
        let ds = manifest.load_dataset(&self.dataset)?;
        Ok((manifest, ds))
    }
}

#[derive(Args, Debug)]
struct GridArgs {
    /// JSON grid file; axes may be value lists or {"start", "stop", "step"} ranges.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "staged")]
    tune_mode: TuneModeArg,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    /// Score non-converging grid points as 0 instead of aborting.
    #[arg(long)]
    skip_nonconvergent: bool,
}

impl GridArgs {
    fn search_options(&self) -> SearchOptions {
        SearchOptions {
            folds: self.folds,
            skip_nonconvergent: self.skip_nonconvergent,
        }
    }
}

fn read_grid(path: &Path) -> anyhow::Result<Grid> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading grid {}", path.display()))?;
    let grid: Grid = serde_json::from_str(&text).map_err(Error::from)?;
    Ok(grid)
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long, value_enum)]
    regime: RegimeArg,
    /// Training rows per class in the low regime; all of 1..=9 when omitted.
    #[arg(long)]
    n: Option<usize>,
    /// Low regime: draw from the 80% split and test on its 20% instead of the remainder.
    #[arg(long)]
    holdout_test: bool,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    /// skew-tent or skew-binary
    #[arg(long)]
    map: Option<MapKind>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Write the ChaosFEX features of every row, with labels, to this CSV.
    #[arg(long)]
    export_cfx: Option<PathBuf>,
    /// JSON results file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat CSV summary.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Add wall-clock seconds to each result (output is then no longer reproducible).
    #[arg(long)]
    record_timing: bool,
}

#[derive(Args, Debug)]
struct TuneArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// JSON with the best point and every stage's trace; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV trace of the final stage.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    hybrid: PathBuf,
    baseline: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn resolve_params(args: &RunArgs, manifest: &Manifest) -> anyhow::Result<RunParams> {
    let algo = args.data.algo;
    let mut params = RunParams::from_tuned(&manifest.entry(&args.data.dataset)?.params, algo);

    if let Some(path) = &args.grid.grid {
        let mut grid = read_grid(path)?;
        if let Some(m) = args.map {
            grid.map_kind = m;
        }
        if let Some(it) = args.max_iterations {
            grid.max_iterations = it;
        }
        let (_, ds) = args.data.load()?;
        let outcome = tune_on_train_split(
            &ds,
            &grid,
            algo,
            args.grid.tune_mode.into(),
            args.data.normalization(),
            args.data.seed,
            &args.grid.search_options(),
        )?;
        params = outcome.best.into();
    }

    if args.q.is_some() || args.b.is_some() || args.epsilon.is_some() {
        let base = params.chaos;
        let pick = |v: Option<f64>, from: Option<f64>, name: &str| {
            v.or(from).with_context(|| {
                format!("--{name} is required: the manifest has no neuron parameters")
            })
        };
        let q = pick(args.q, base.map(|c| c.q), "q")?;
        let b = pick(args.b, base.map(|c| c.b), "b")?;
        let epsilon = pick(args.epsilon, base.map(|c| c.epsilon), "epsilon")?;
        let mut c = ChaosConfig::new(q, b, epsilon)?;
        if let Some(base) = base {
            c = c
                .with_map_kind(base.map_kind)
                .with_max_iterations(base.max_iterations)?;
        }
        params.chaos = Some(c);
    }
    if let Some(c) = params.chaos.as_mut() {
        if let Some(m) = args.map {
            c.map_kind = m;
        }
        if let Some(it) = args.max_iterations {
            *c = c.with_max_iterations(it)?;
        }
    }
    if args.k.is_some() {
        params.k = args.k;
    }
    params = params.for_algorithm(algo);
    params.check(algo)?;
    Ok(params)
}

fn export_features(
    args: &RunArgs,
    ds: &LabeledDataset,
    params: &RunParams,
    path: &Path,
) -> anyhow::Result<()> {
    let Some(chaos) = params.chaos.as_ref() else {
        bail!("--export-cfx needs an algorithm that uses ChaosFEX features");
    };
    let train = match args.data.normalization() {
        NormalizationMode::WholeDataset => Vec::new(),
        NormalizationMode::TrainOnly => {
            stratified_split(ds, HIGH_TRAIN_FRACTION, args.data.seed)?.train
        }
    };
    let x = normalize_for_split(ds, args.data.normalization(), &train)?;
    let cfx = transform(&x, chaos)?;
    export_csv(&cfx, &ds.y, path)?;
    Ok(())
}

fn cmd_run(args: &RunArgs) -> anyhow::Result<()> {
    let (manifest, ds) = args.data.load()?;
    let params = resolve_params(args, &manifest)?;
    let options = RunOptions {
        normalization: args.data.normalization(),
        holdout_test: args.holdout_test,
        record_timing: args.record_timing,
    };
    let results = match args.regime {
        RegimeArg::High => {
            if args.n.is_some() || args.holdout_test {
                bail!("--n and --holdout-test only apply to --regime low");
            }
            vec![run_high(
                &ds,
                args.data.algo,
                &params,
                args.data.seed,
                &options,
            )?]
        }
        RegimeArg::Low => {
            let ns: Vec<usize> = match args.n {
                Some(n) => vec![n],
                None => LOW_N_RANGE.collect(),
            };
            ns.into_iter()
                .map(|n| run_low(&ds, args.data.algo, &params, n, args.data.seed, &options))
                .collect::<Result<_, _>>()?
        }
    };
    if let Some(path) = &args.export_cfx {
        export_features(args, &ds, &params, path)?;
    }
    let doc = ResultsDocument::new(results);
    write_output(args.out.as_deref(), &doc.to_json()?)?;
    if let Some(path) = &args.csv {
        let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
        doc.write_csv(file)?;
    }
    Ok(())
}

fn cmd_tune(args: &TuneArgs) -> anyhow::Result<()> {
    let (_, ds) = args.data.load()?;
    let grid = match &args.grid.grid {
        Some(p) => read_grid(p)?,
        None => Grid::default(),
    };
    let outcome = tune_on_train_split(
        &ds,
        &grid,
        args.data.algo,
        args.grid.tune_mode.into(),
        args.data.normalization(),
        args.data.seed,
        &args.grid.search_options(),
    )?;
    if let Some(path) = &args.trace {
        let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
        write_trace_csv(outcome.stages.last().expect("at least one stage"), file)?;
    }
    let mut text = serde_json::to_string_pretty(&outcome)?;
    text.push('\n');
    write_output(args.out.as_deref(), &text)
}

fn read_results(path: &Path) -> anyhow::Result<ResultsDocument> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ResultsDocument::from_json(&text)?)
}

fn cmd_compare(args: &CompareArgs) -> anyhow::Result<()> {
    let hybrid = read_results(&args.hybrid)?;
    let baseline = read_results(&args.baseline)?;
    let report = compare(&hybrid.results, &baseline.results)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_output(args.out.as_deref(), &text)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(e) if e.is_nonconvergence() => 2,
        Some(e) if e.is_data_error() => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Tune(args) => cmd_tune(args),
        Command::Compare(args) => cmd_compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
