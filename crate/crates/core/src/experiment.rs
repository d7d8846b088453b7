//! High- and low-regime experiment runners, result documents and Boost reports.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaosfex::{normalize_fit, ConstantPolicy, NormalizationMode, NormalizationParams};
use crate::data::{
    low_regime_sample, low_regime_sample_holdout, stratified_split, LabeledDataset, SplitSpec,
    TunedParams,
};
use crate::error::{Error, Result};
use crate::gls_neuron::ChaosConfig;
use crate::matrix::Matrix;
use crate::metrics::{boost, macro_f1_score};
use crate::pipeline::{features, fit_predict, Algorithm};
use crate::tuning::{tune, Grid, SearchOptions, TuneMode, TuneOutcome};

pub const SCHEMA_VERSION: u32 = 1;
pub const HIGH_TRAIN_FRACTION: f64 = 0.8;
pub const LOW_TRIALS: usize = 150;
pub const LOW_N_RANGE: std::ops::RangeInclusive<usize> = 1..=9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Regime {
    High,
    Low { n_per_class: usize },
}

impl Regime {
    pub fn n_per_class(self) -> Option<usize> {
        match self {
            Regime::High => None,
            Regime::Low { n_per_class } => Some(n_per_class),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::High => f.write_str("high"),
            Regime::Low { n_per_class } => write!(f, "low(n={n_per_class})"),
        }
    }
}

/// Hyperparameters a single run actually uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chaos: Option<ChaosConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

impl RunParams {
    /// Picks the manifest parameters relevant to `algorithm`.
    pub fn from_tuned(tuned: &TunedParams, algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::ChaosNet => RunParams {
                chaos: tuned.chaos,
                k: None,
            },
            Algorithm::CfxKnn => RunParams {
                chaos: tuned.cfx_chaos.or(tuned.chaos),
                k: tuned.cfx_k,
            },
            Algorithm::CfxGnb => RunParams {
                chaos: tuned.cfx_chaos.or(tuned.chaos),
                k: None,
            },
            Algorithm::Knn => RunParams {
                chaos: None,
                k: tuned.k,
            },
            Algorithm::Gnb => RunParams::default(),
        }
    }

    pub fn check(&self, algorithm: Algorithm) -> Result<()> {
        if algorithm.uses_cfx() {
            self.chaos
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig(format!("{algorithm} needs q, b and epsilon")))?
                .validate()?;
        }
        if algorithm.uses_k() {
            match self.k {
                None => return Err(Error::InvalidConfig(format!("{algorithm} needs k"))),
                Some(0) => return Err(Error::InvalidConfig("k must be at least 1".into())),
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Drops parameters the algorithm ignores.
    pub fn for_algorithm(self, algorithm: Algorithm) -> Self {
        RunParams {
            chaos: self.chaos.filter(|_| algorithm.uses_cfx()),
            k: self.k.filter(|_| algorithm.uses_k()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub normalization: NormalizationMode,
    /// Low regime: sample training rows from the 80% split and test on its 20%.
    pub holdout_test: bool,
    pub record_timing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub regime: Regime,
    pub mean_f1: f64,
    /// Per-trial test macro-F1 in trial order; empty in the high regime.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trial_f1: Vec<f64>,
    pub params: RunParams,
    pub seed: u64,
    pub normalization: NormalizationMode,
    #[serde(default)]
    pub holdout_test: bool,
    pub train_size: usize,
    pub test_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub schema_version: u32,
    pub results: Vec<ExperimentResult>,
}

impl ResultsDocument {
    pub fn new(results: Vec<ExperimentResult>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            results,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ResultsDocument = serde_json::from_str(text)?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::Mismatch(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        Ok(doc)
    }

    /// `dataset,algo,regime,n,mean_f1,seed`, one row per result.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(["dataset", "algo", "regime", "n", "mean_f1", "seed"])?;
        for r in &self.results {
            let (regime, n) = match r.regime {
                Regime::High => ("high", String::new()),
                Regime::Low { n_per_class } => ("low", n_per_class.to_string()),
            };
            w.write_record([
                r.dataset.as_str(),
                r.algorithm.as_str(),
                regime,
                &n,
                &r.mean_f1.to_string(),
                &r.seed.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Normalization fitted on the rows the mode allows, applied to every row.
pub fn normalize_for_split(
    ds: &LabeledDataset,
    mode: NormalizationMode,
    train: &[usize],
) -> Result<Matrix> {
    let params = match mode {
        NormalizationMode::WholeDataset => normalize_fit(&ds.x, mode, train)?,
        NormalizationMode::TrainOnly => {
            NormalizationParams::fit(&ds.x, train, ConstantPolicy::Step)?
        }
    };
    params.apply(&ds.x)
}

fn score_split(
    algorithm: Algorithm,
    feats: &Matrix,
    ds: &LabeledDataset,
    split: &SplitSpec,
    params: &RunParams,
) -> Result<f64> {
    let train_y = ds.labels_of(&split.train);
    let test_y = ds.labels_of(&split.test);
    let k = params.k.map(|k| k.min(split.train.len()));
    let pred = fit_predict(
        algorithm,
        &feats.select_rows(&split.train),
        &train_y,
        &feats.select_rows(&split.test),
        ds.n_classes,
        k,
    )?;
    macro_f1_score(&test_y, &pred, ds.n_classes)
}

fn evaluate_split(
    ds: &LabeledDataset,
    algorithm: Algorithm,
    params: &RunParams,
    split: &SplitSpec,
    mode: NormalizationMode,
) -> Result<f64> {
    let x = normalize_for_split(ds, mode, &split.train)?;
    let feats = features(algorithm, &x, params.chaos.as_ref())?;
    score_split(algorithm, &feats, ds, split, params)
}

/// One stratified 80/20 split, normalization, optional ChaosFEX, fit and test macro-F1.
pub fn run_high(
    ds: &LabeledDataset,
    algorithm: Algorithm,
    params: &RunParams,
    seed: u64,
    options: &RunOptions,
) -> Result<ExperimentResult> {
    let started = Instant::now();
    let params = params.for_algorithm(algorithm);
    params.check(algorithm)?;
    let split = stratified_split(ds, HIGH_TRAIN_FRACTION, seed)?;
    let f1 = evaluate_split(ds, algorithm, &params, &split, options.normalization)?;
    Ok(ExperimentResult {
        dataset: ds.id.clone(),
        algorithm,
        regime: Regime::High,
        mean_f1: f1,
        trial_f1: Vec::new(),
        params,
        seed,
        normalization: options.normalization,
        holdout_test: false,
        train_size: split.train.len(),
        test_size: split.test.len(),
        wall_clock_seconds: options
            .record_timing
            .then(|| started.elapsed().as_secs_f64()),
    })
}

/// 150 trials with `n_per_class` training rows per class. k larger than the
/// training set is clamped to it.
pub fn run_low(
    ds: &LabeledDataset,
    algorithm: Algorithm,
    params: &RunParams,
    n_per_class: usize,
    master_seed: u64,
    options: &RunOptions,
) -> Result<ExperimentResult> {
    let started = Instant::now();
    let params = params.for_algorithm(algorithm);
    params.check(algorithm)?;
    let holdout = if options.holdout_test {
        Some(stratified_split(ds, HIGH_TRAIN_FRACTION, master_seed)?)
    } else {
        None
    };
    let splits: Vec<SplitSpec> = (0..LOW_TRIALS)
        .map(|trial| match &holdout {
            Some(h) => low_regime_sample_holdout(ds, h, n_per_class, trial, master_seed),
            None => low_regime_sample(ds, n_per_class, trial, master_seed),
        })
        .collect::<Result<_>>()?;

    let trial_f1: Vec<f64> = match options.normalization {
        NormalizationMode::WholeDataset => {
            let x = normalize_for_split(ds, NormalizationMode::WholeDataset, &[])?;
            let feats = features(algorithm, &x, params.chaos.as_ref())?;
            splits
                .par_iter()
                .map(|s| score_split(algorithm, &feats, ds, s, &params))
                .collect::<Result<_>>()?
        }
        NormalizationMode::TrainOnly => splits
            .par_iter()
            .map(|s| evaluate_split(ds, algorithm, &params, s, NormalizationMode::TrainOnly))
            .collect::<Result<_>>()?,
    };
    let mean_f1 = trial_f1.iter().sum::<f64>() / trial_f1.len() as f64;
    Ok(ExperimentResult {
        dataset: ds.id.clone(),
        algorithm,
        regime: Regime::Low { n_per_class },
        mean_f1,
        trial_f1,
        params,
        seed: master_seed,
        normalization: options.normalization,
        holdout_test: options.holdout_test,
        train_size: splits[0].train.len(),
        test_size: splits[0].test.len(),
        wall_clock_seconds: options
            .record_timing
            .then(|| started.elapsed().as_secs_f64()),
    })
}

/// Grid search on the training rows of the seed's 80/20 split, normalized per
/// `mode`; the test rows are never seen.
pub fn tune_on_train_split(
    ds: &LabeledDataset,
    grid: &Grid,
    algorithm: Algorithm,
    tune_mode: TuneMode,
    mode: NormalizationMode,
    seed: u64,
    options: &SearchOptions,
) -> Result<TuneOutcome> {
    let split = stratified_split(ds, HIGH_TRAIN_FRACTION, seed)?;
    let x = normalize_for_split(ds, mode, &split.train)?;
    let train = LabeledDataset::new(
        ds.id.clone(),
        x.select_rows(&split.train),
        ds.labels_of(&split.train),
        ds.n_classes,
    )?;
    tune(&train, grid, algorithm, tune_mode, seed, options)
}

impl From<crate::tuning::GridPoint> for RunParams {
    fn from(p: crate::tuning::GridPoint) -> Self {
        RunParams {
            chaos: p.chaos,
            k: p.k,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostEntry {
    pub regime: Regime,
    pub hybrid_f1: f64,
    pub baseline_f1: f64,
    /// Percent.
    pub boost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostReport {
    pub dataset: String,
    pub hybrid: Algorithm,
    pub baseline: Algorithm,
    pub entries: Vec<BoostEntry>,
    pub min_boost: f64,
    pub max_boost: f64,
}

fn single<'a, T: PartialEq + fmt::Debug + 'a>(
    what: &str,
    mut values: impl Iterator<Item = &'a T>,
) -> Result<&'a T> {
    let first = values
        .next()
        .ok_or_else(|| Error::Mismatch("no results to compare".into()))?;
    for v in values {
        if v != first {
            return Err(Error::Mismatch(format!(
                "{what} differs: {first:?} vs {v:?}"
            )));
        }
    }
    Ok(first)
}

/// Boost of `hybrid` over `baseline`, paired by regime. Both sides must share
/// dataset, seed, normalization and test-set choice, and cover the same regimes.
pub fn compare(hybrid: &[ExperimentResult], baseline: &[ExperimentResult]) -> Result<BoostReport> {
    let all = || hybrid.iter().chain(baseline);
    let dataset = single("dataset", all().map(|r| &r.dataset))?.clone();
    single("seed", all().map(|r| &r.seed))?;
    single("normalization", all().map(|r| &r.normalization))?;
    single("holdout_test", all().map(|r| &r.holdout_test))?;
    let h_algo = *single("hybrid algorithm", hybrid.iter().map(|r| &r.algorithm))?;
    let b_algo = *single("baseline algorithm", baseline.iter().map(|r| &r.algorithm))?;

    let mut h: Vec<&ExperimentResult> = hybrid.iter().collect();
    let mut b: Vec<&ExperimentResult> = baseline.iter().collect();
    h.sort_by_key(|r| r.regime);
    b.sort_by_key(|r| r.regime);
    let h_regimes: Vec<Regime> = h.iter().map(|r| r.regime).collect();
    let b_regimes: Vec<Regime> = b.iter().map(|r| r.regime).collect();
    if h_regimes != b_regimes || h_regimes.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Mismatch(format!(
            "regimes differ or repeat: {h_regimes:?} vs {b_regimes:?}"
        )));
    }
    let entries: Vec<BoostEntry> = h
        .iter()
        .zip(&b)
        .map(|(h, b)| {
            Ok(BoostEntry {
                regime: h.regime,
                hybrid_f1: h.mean_f1,
                baseline_f1: b.mean_f1,
                boost: boost(h.mean_f1, b.mean_f1)?,
            })
        })
        .collect::<Result<_>>()?;
    let min_boost = entries
        .iter()
        .map(|e| e.boost)
        .fold(f64::INFINITY, f64::min);
    let max_boost = entries
        .iter()
        .map(|e| e.boost)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(BoostReport {
        dataset,
        hybrid: h_algo,
        baseline: b_algo,
        entries,
        min_boost,
        max_boost,
    })
}
