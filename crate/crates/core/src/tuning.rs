//! Stratified k-fold cross-validation and exhaustive grid search, scored by
//! mean validation macro-F1.

use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{class_counts, seeded_rng, LabeledDataset, FOLD_STREAM};
use crate::error::{Error, Result};
use crate::gls_neuron::{ChaosConfig, MapKind, DEFAULT_MAX_ITERATIONS};
use crate::matrix::Matrix;
use crate::metrics::macro_f1_score;
use crate::pipeline::{features, fit_predict, Algorithm};

pub const DEFAULT_FOLDS: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Stratified folds: each class is shuffled and dealt round-robin, continuing
/// where the previous class stopped so fold sizes stay balanced. A class with
/// fewer rows than folds lands one row per fold in as many folds as it has
/// rows, which is leave-one-out within that class.
pub fn kfold_indices(
    y: &[usize],
    n_classes: usize,
    k_folds: usize,
    seed: u64,
) -> Result<Vec<Fold>> {
    if k_folds < 2 {
        return Err(Error::InvalidConfig("at least 2 folds are required".into()));
    }
    if y.len() < k_folds {
        return Err(Error::TooFewRows {
            rows: y.len(),
            folds: k_folds,
        });
    }
    for (class, &count) in class_counts(y, n_classes).iter().enumerate() {
        if count == 1 {
            return Err(Error::ClassTooSmall {
                class,
                available: 1,
                required: 2,
            });
        }
    }
    let mut rng = seeded_rng(seed, FOLD_STREAM);
    let mut assignment = vec![0usize; y.len()];
    let mut offset = 0;
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            assignment[i] = (offset + j) % k_folds;
        }
        offset += members.len();
    }
    Ok((0..k_folds)
        .map(|f| {
            let (validation, train): (Vec<usize>, Vec<usize>) =
                (0..y.len()).partition(|&i| assignment[i] == f);
            Fold { train, validation }
        })
        .collect())
}

/// One hyperparameter axis: explicit values or an inclusive arithmetic range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Axis {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Axis::Values(v) if v.is_empty() => Err(Error::InvalidGrid("empty value list".into())),
            Axis::Values(v) => Ok(v.clone()),
            Axis::Range { start, stop, step } => {
                if !step.is_finite()
                    || *step <= 0.0
                    || !start.is_finite()
                    || !stop.is_finite()
                    || stop < start
                {
                    return Err(Error::InvalidGrid(format!(
                        "bad range start={start} stop={stop} step={step}"
                    )));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                // rounding to 12 decimals keeps 0.01-style steps free of accumulated noise
                Ok((0..count)
                    .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
                    .collect())
            }
        }
    }

    pub fn single(value: f64) -> Self {
        Axis::Values(vec![value])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<usize>>,
    #[serde(default)]
    pub map_kind: MapKind,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}

impl Default for Grid {
    /// q, b over 0.01..0.99 and ε over 0.001..0.499, k in {1, 3, 5}. This is
    /// millions of points; real runs pass a coarser grid.
    fn default() -> Self {
        Self {
            q: Some(Axis::Range {
                start: 0.01,
                stop: 0.99,
                step: 0.01,
            }),
            b: Some(Axis::Range {
                start: 0.01,
                stop: 0.99,
                step: 0.01,
            }),
            epsilon: Some(Axis::Range {
                start: 0.001,
                stop: 0.499,
                step: 0.001,
            }),
            k: Some(vec![1, 3, 5]),
            map_kind: MapKind::SkewTent,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chaos: Option<ChaosConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

impl fmt::Display for GridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(c) = &self.chaos {
            parts.push(format!("q={} b={} epsilon={}", c.q, c.b, c.epsilon));
        }
        if let Some(k) = self.k {
            parts.push(format!("k={k}"));
        }
        if parts.is_empty() {
            f.write_str("(no parameters)")
        } else {
            f.write_str(&parts.join(" "))
        }
    }
}

impl Grid {
    fn axis(&self, name: &str, axis: &Option<Axis>) -> Result<Vec<f64>> {
        axis.as_ref()
            .ok_or_else(|| Error::InvalidGrid(format!("missing axis {name}")))?
            .values()
    }

    /// Neuron configurations in declared order (q outer, then b, then ε).
    pub fn chaos_configs(&self) -> Result<Vec<ChaosConfig>> {
        let qs = self.axis("q", &self.q)?;
        let bs = self.axis("b", &self.b)?;
        let es = self.axis("epsilon", &self.epsilon)?;
        let mut out = Vec::with_capacity(qs.len() * bs.len() * es.len());
        for &q in &qs {
            for &b in &bs {
                for &epsilon in &es {
                    let c = ChaosConfig {
                        q,
                        b,
                        epsilon,
                        map_kind: self.map_kind,
                        max_iterations: self.max_iterations,
                    };
                    c.validate().map_err(|e| {
                        Error::InvalidGrid(format!("q={q} b={b} epsilon={epsilon}: {e}"))
                    })?;
                    out.push(c);
                }
            }
        }
        Ok(out)
    }

    pub fn k_values(&self) -> Result<Vec<usize>> {
        match &self.k {
            None => Err(Error::InvalidGrid("missing axis k".into())),
            Some(v) if v.is_empty() || v.contains(&0) => Err(Error::InvalidGrid(format!(
                "k values must be positive, got {v:?}"
            ))),
            Some(v) => Ok(v.clone()),
        }
    }

    /// Every point relevant to `algorithm`; axes it does not use are ignored.
    pub fn points(&self, algorithm: Algorithm) -> Result<Vec<GridPoint>> {
        let chaos: Vec<Option<ChaosConfig>> = if algorithm.uses_cfx() {
            self.chaos_configs()?.into_iter().map(Some).collect()
        } else {
            vec![None]
        };
        let ks: Vec<Option<usize>> = if algorithm.uses_k() {
            self.k_values()?.into_iter().map(Some).collect()
        } else {
            vec![None]
        };
        Ok(chaos
            .iter()
            .flat_map(|&c| ks.iter().map(move |&k| GridPoint { chaos: c, k }))
            .collect())
    }

    /// Copy of the grid with the neuron axes pinned to one configuration.
    pub fn pinned_to(&self, chaos: &ChaosConfig) -> Grid {
        Grid {
            q: Some(Axis::single(chaos.q)),
            b: Some(Axis::single(chaos.b)),
            epsilon: Some(Axis::single(chaos.epsilon)),
            k: self.k.clone(),
            map_kind: chaos.map_kind,
            max_iterations: chaos.max_iterations,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub folds: usize,
    /// Score grid points whose transform does not converge as 0 instead of failing.
    pub skip_nonconvergent: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            folds: DEFAULT_FOLDS,
            skip_nonconvergent: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub point: GridPoint,
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
    pub nonconvergent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub algorithm: Algorithm,
    pub best: GridPoint,
    pub best_mean_f1: f64,
    pub trace: Vec<TraceEntry>,
}

fn cross_validate(
    algorithm: Algorithm,
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    folds: &[Fold],
    k: Option<usize>,
) -> Result<Vec<f64>> {
    folds
        .iter()
        .map(|fold| {
            let train_y: Vec<usize> = fold.train.iter().map(|&i| y[i]).collect();
            let val_y: Vec<usize> = fold.validation.iter().map(|&i| y[i]).collect();
            let pred = fit_predict(
                algorithm,
                &x.select_rows(&fold.train),
                &train_y,
                &x.select_rows(&fold.validation),
                n_classes,
                k,
            )?;
            macro_f1_score(&val_y, &pred, n_classes)
        })
        .collect()
}

fn evaluate_group(
    algorithm: Algorithm,
    ds: &LabeledDataset,
    folds: &[Fold],
    chaos: Option<ChaosConfig>,
    ks: &[Option<usize>],
    options: &SearchOptions,
) -> Result<Vec<TraceEntry>> {
    let x = match features(algorithm, &ds.x, chaos.as_ref()) {
        Ok(x) => x,
        Err(e) if e.is_nonconvergence() && options.skip_nonconvergent => {
            return Ok(ks
                .iter()
                .map(|&k| TraceEntry {
                    point: GridPoint { chaos, k },
                    fold_f1: vec![0.0; folds.len()],
                    mean_f1: 0.0,
                    nonconvergent: true,
                })
                .collect());
        }
        Err(e) => {
            return Err(Error::GridPoint {
                point: GridPoint { chaos, k: None }.to_string(),
                source: Box::new(e),
            })
        }
    };
    ks.iter()
        .map(|&k| {
            let point = GridPoint { chaos, k };
            let fold_f1 =
                cross_validate(algorithm, &x, &ds.y, ds.n_classes, folds, k).map_err(|e| {
                    Error::GridPoint {
                        point: point.to_string(),
                        source: Box::new(e),
                    }
                })?;
            let mean_f1 = fold_f1.iter().sum::<f64>() / fold_f1.len() as f64;
            Ok(TraceEntry {
                point,
                fold_f1,
                mean_f1,
                nonconvergent: false,
            })
        })
        .collect()
}

/// Exhaustive search over `grid` with stratified k-fold CV on `ds`, which must
/// already be normalized. The trace follows the grid's declared order and the
/// earliest point wins ties.
pub fn grid_search(
    ds: &LabeledDataset,
    grid: &Grid,
    algorithm: Algorithm,
    seed: u64,
    options: &SearchOptions,
) -> Result<SearchResult> {
    let folds = kfold_indices(&ds.y, ds.n_classes, options.folds, seed)?;
    let chaos: Vec<Option<ChaosConfig>> = if algorithm.uses_cfx() {
        grid.chaos_configs()?.into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    let ks: Vec<Option<usize>> = if algorithm.uses_k() {
        grid.k_values()?.into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    let groups: Vec<Vec<TraceEntry>> = chaos
        .par_iter()
        .map(|&c| evaluate_group(algorithm, ds, &folds, c, &ks, options))
        .collect::<Result<_>>()?;
    let trace: Vec<TraceEntry> = groups.into_iter().flatten().collect();

    let mut best = 0;
    for (i, entry) in trace.iter().enumerate() {
        if entry.mean_f1 > trace[best].mean_f1 {
            best = i;
        }
    }
    Ok(SearchResult {
        algorithm,
        best: trace[best].point,
        best_mean_f1: trace[best].mean_f1,
        trace,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TuneMode {
    /// Tune (q, b, ε) with ChaosNet, then only the classifier parameters.
    #[default]
    Staged,
    /// Search the full product of neuron and classifier axes.
    Joint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub mode: TuneMode,
    pub best: GridPoint,
    pub best_mean_f1: f64,
    /// One search per stage, in execution order.
    pub stages: Vec<SearchResult>,
}

pub fn tune(
    ds: &LabeledDataset,
    grid: &Grid,
    algorithm: Algorithm,
    mode: TuneMode,
    seed: u64,
    options: &SearchOptions,
) -> Result<TuneOutcome> {
    let staged =
        mode == TuneMode::Staged && algorithm.uses_cfx() && algorithm != Algorithm::ChaosNet;
    let mut stages = Vec::new();
    let final_grid = if staged {
        let neurons = grid_search(ds, grid, Algorithm::ChaosNet, seed, options)?;
        let chaos = neurons
            .best
            .chaos
            .expect("ChaosNet points carry neuron parameters");
        stages.push(neurons);
        grid.pinned_to(&chaos)
    } else {
        grid.clone()
    };
    let last = grid_search(ds, &final_grid, algorithm, seed, options)?;
    let outcome = TuneOutcome {
        mode,
        best: last.best,
        best_mean_f1: last.best_mean_f1,
        stages: {
            stages.push(last);
            stages
        },
    };
    Ok(outcome)
}

/// `q,b,epsilon,k,fold_1..fold_K,mean_f1,nonconvergent`; unused parameters are blank.
pub fn write_trace_csv<W: Write>(result: &SearchResult, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let n_folds = result.trace.first().map_or(0, |e| e.fold_f1.len());
    let mut header: Vec<String> = ["q", "b", "epsilon", "k"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=n_folds).map(|i| format!("fold_{i}")));
    header.push("mean_f1".into());
    header.push("nonconvergent".into());
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for e in &result.trace {
        let c = e.point.chaos;
        let mut record = vec![
            opt(c.map(|c| c.q)),
            opt(c.map(|c| c.b)),
            opt(c.map(|c| c.epsilon)),
            e.point.k.map(|k| k.to_string()).unwrap_or_default(),
        ];
        record.extend(e.fold_f1.iter().map(|f| f.to_string()));
        record.push(e.mean_f1.to_string());
        record.push(e.nonconvergent.to_string());
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class(n_per_class: usize) -> LabeledDataset {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for c in 0..2 {
            for i in 0..n_per_class {
                let base = if c == 0 { 0.1 } else { 0.8 };
                rows.push(vec![base + 0.01 * i as f64, 0.5]);
                y.push(c);
            }
        }
        LabeledDataset::new("toy", Matrix::from_rows(&rows).unwrap(), y, 2).unwrap()
    }

    #[test]
    fn folds_of_balanced_ten() {
        let y = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let folds = kfold_indices(&y, 2, 5, 3).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen = Vec::new();
        for f in &folds {
            assert_eq!(f.validation.len(), 2);
            let mut labels: Vec<usize> = f.validation.iter().map(|&i| y[i]).collect();
            labels.sort();
            assert_eq!(labels, vec![0, 1]);
            assert_eq!(f.train.len(), 8);
            seen.extend_from_slice(&f.validation);
        }
        seen.sort();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
        assert_eq!(folds, kfold_indices(&y, 2, 5, 3).unwrap());
    }

    #[test]
    fn small_class_falls_back_to_leave_one_out() {
        let y = vec![0, 0, 0, 0, 0, 0, 0, 0, 1, 1];
        let folds = kfold_indices(&y, 2, 5, 0).unwrap();
        let with_minority = folds
            .iter()
            .filter(|f| f.validation.iter().any(|&i| y[i] == 1))
            .count();
        assert_eq!(with_minority, 2);
        for f in &folds {
            assert!(f.train.iter().any(|&i| y[i] == 1));
        }
    }

    #[test]
    fn fold_errors() {
        assert!(matches!(
            kfold_indices(&[0, 1, 0], 2, 5, 0),
            Err(Error::TooFewRows { .. })
        ));
        assert!(matches!(
            kfold_indices(&[0, 0, 0, 0, 0, 1], 2, 5, 0),
            Err(Error::ClassTooSmall { class: 1, .. })
        ));
    }

    #[test]
    fn axis_ranges() {
        let a = Axis::Range {
            start: 0.01,
            stop: 0.05,
            step: 0.01,
        };
        assert_eq!(a.values().unwrap(), vec![0.01, 0.02, 0.03, 0.04, 0.05]);
        let a = Axis::Range {
            start: 0.001,
            stop: 0.499,
            step: 0.001,
        };
        let v = a.values().unwrap();
        assert_eq!((v.len(), v[146]), (499, 0.147));
        assert!(Axis::Range {
            start: 0.5,
            stop: 0.1,
            step: 0.1
        }
        .values()
        .is_err());
        assert!(Axis::Values(vec![]).values().is_err());
    }

    #[test]
    fn grid_json_forms() {
        let g: Grid = serde_json::from_str(
            r#"{"q": {"start": 0.1, "stop": 0.3, "step": 0.1}, "b": [0.499], "epsilon": [0.1, 0.2], "k": [1, 3]}"#,
        )
        .unwrap();
        assert_eq!(g.points(Algorithm::CfxKnn).unwrap().len(), 12);
        assert_eq!(g.points(Algorithm::ChaosNet).unwrap().len(), 6);
        assert_eq!(g.points(Algorithm::Knn).unwrap().len(), 2);
        assert_eq!(g.points(Algorithm::Gnb).unwrap().len(), 1);
        let first = g.points(Algorithm::CfxKnn).unwrap()[0];
        assert_eq!(first.chaos.unwrap().q, 0.1);
        assert_eq!(first.k, Some(1));
    }

    #[test]
    fn grid_rejects_illegal_values() {
        let g = Grid {
            q: Some(Axis::single(1.5)),
            b: Some(Axis::single(0.5)),
            epsilon: Some(Axis::single(0.1)),
            k: None,
            ..Grid::default()
        };
        assert!(matches!(g.chaos_configs(), Err(Error::InvalidGrid(_))));
        assert!(g.points(Algorithm::Knn).is_err());
    }

    #[test]
    fn single_point_grid() {
        let ds = two_class(10);
        let g = Grid {
            k: Some(vec![3]),
            ..Grid::default()
        };
        let r = grid_search(&ds, &g, Algorithm::Knn, 1, &SearchOptions::default()).unwrap();
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.best.k, Some(3));
        assert_eq!(r.best_mean_f1, r.trace[0].mean_f1);
        assert_eq!(r.trace[0].fold_f1.len(), 5);
    }

    #[test]
    fn dominant_point_wins_and_ties_keep_first() {
        // constant second attribute is useless, first separates the classes
        let ds = two_class(10);
        let g = Grid {
            k: Some(vec![19, 1, 3]),
            ..Grid::default()
        };
        let err = grid_search(&ds, &g, Algorithm::Knn, 1, &SearchOptions::default()).unwrap_err();
        assert!(matches!(err, Error::GridPoint { .. }));
        // 16 training rows per fold: k=16 always ties 8-8 and falls back to class 0
        let g = Grid {
            k: Some(vec![16, 15, 1]),
            ..Grid::default()
        };
        let r = grid_search(&ds, &g, Algorithm::Knn, 1, &SearchOptions::default()).unwrap();
        assert_eq!(r.trace.len(), 3);
        assert!(r.trace[0].mean_f1 < 1.0);
        assert_eq!(r.trace[1].mean_f1, 1.0);
        assert_eq!(r.trace[2].mean_f1, 1.0);
        assert_eq!(r.best.k, Some(15));
        assert_eq!(r.best_mean_f1, 1.0);
    }

    #[test]
    fn nonconvergent_points_can_be_skipped() {
        let ds = two_class(10);
        let g = Grid {
            q: Some(Axis::single(0.5)),
            b: Some(Axis::single(0.3)),
            epsilon: Some(Axis::single(0.001)),
            k: None,
            map_kind: MapKind::SkewTent,
            max_iterations: 1,
        };
        let err =
            grid_search(&ds, &g, Algorithm::ChaosNet, 0, &SearchOptions::default()).unwrap_err();
        assert!(err.is_nonconvergence());
        let opts = SearchOptions {
            skip_nonconvergent: true,
            ..SearchOptions::default()
        };
        let r = grid_search(&ds, &g, Algorithm::ChaosNet, 0, &opts).unwrap();
        assert!(r.trace[0].nonconvergent);
        assert_eq!(r.best_mean_f1, 0.0);
    }

    #[test]
    fn staged_tuning_pins_neuron_parameters() {
        let ds = two_class(10);
        let g = Grid {
            q: Some(Axis::Values(vec![0.2, 0.7])),
            b: Some(Axis::single(0.499)),
            epsilon: Some(Axis::Values(vec![0.05, 0.2])),
            k: Some(vec![1, 3]),
            ..Grid::default()
        };
        let opts = SearchOptions::default();
        let staged = tune(&ds, &g, Algorithm::CfxKnn, TuneMode::Staged, 4, &opts).unwrap();
        assert_eq!(staged.stages.len(), 2);
        assert_eq!(staged.stages[0].trace.len(), 4);
        assert_eq!(staged.stages[1].trace.len(), 2);
        assert_eq!(staged.best.chaos, staged.stages[0].best.chaos);
        let joint = tune(&ds, &g, Algorithm::CfxKnn, TuneMode::Joint, 4, &opts).unwrap();
        assert_eq!(joint.stages.len(), 1);
        assert_eq!(joint.stages[0].trace.len(), 8);
    }

    #[test]
    fn trace_csv_shape() {
        let ds = two_class(10);
        let g = Grid {
            k: Some(vec![1, 3]),
            ..Grid::default()
        };
        let r = grid_search(&ds, &g, Algorithm::Knn, 1, &SearchOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "q,b,epsilon,k,fold_1,fold_2,fold_3,fold_4,fold_5,mean_f1,nonconvergent"
        );
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with(",,,1,"));
    }
}
