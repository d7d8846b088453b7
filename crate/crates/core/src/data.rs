//! Dataset ingestion, label recoding and seeded splits.
//!
//! All randomness flows from ChaCha8 streams keyed by an explicit 64-bit seed,
//! so a split is a pure function of `(data, seed)` and identical across
//! platforms.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gls_neuron::ChaosConfig;
use crate::matrix::Matrix;

/// Raw label string -> class id. Ids must be exactly `0..C`.
pub type LabelMap = BTreeMap<String, usize>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Name("class".to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    #[serde(default = "yes")]
    pub has_header: bool,
    #[serde(default)]
    pub label_column: LabelColumn,
}

fn yes() -> bool {
    true
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            has_header: true,
            label_column: LabelColumn::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub id: String,
    pub attribute_names: Vec<String>,
    pub x: Matrix,
    pub y: Vec<usize>,
    pub n_classes: usize,
}

impl LabeledDataset {
    pub fn new(id: impl Into<String>, x: Matrix, y: Vec<usize>, n_classes: usize) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::shape(
                format!("{} labels", x.rows()),
                format!("{} labels", y.len()),
            ));
        }
        if let Some(&label) = y.iter().find(|&&l| l >= n_classes) {
            return Err(Error::LabelOutOfRange { label, n_classes });
        }
        if let Some(v) = x.as_slice().iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain {
                what: "attribute value",
                value: *v,
                domain: "finite reals",
            });
        }
        let attribute_names = (0..x.cols()).map(|k| format!("a{k}")).collect();
        Ok(Self {
            id: id.into(),
            attribute_names,
            x,
            y,
            n_classes,
        })
    }

    pub fn rows(&self) -> usize {
        self.x.rows()
    }

    pub fn n_attributes(&self) -> usize {
        self.x.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        class_counts(&self.y, self.n_classes)
    }

    /// Row indices grouped by class, ascending within each class.
    pub fn rows_by_class(&self) -> Vec<Vec<usize>> {
        rows_by_class(&self.y, self.n_classes, 0..self.y.len())
    }

    pub fn labels_of(&self, rows: &[usize]) -> Vec<usize> {
        rows.iter().map(|&i| self.y[i]).collect()
    }

    /// Removes the listed attribute columns.
    pub fn drop_attributes(&mut self, drop: &[usize]) {
        let keep: Vec<usize> = (0..self.n_attributes())
            .filter(|k| !drop.contains(k))
            .collect();
        self.x = self.x.select_columns(&keep);
        self.attribute_names = keep
            .iter()
            .map(|&k| self.attribute_names[k].clone())
            .collect();
    }
}

pub(crate) fn class_counts(y: &[usize], n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; n_classes];
    for &l in y {
        counts[l] += 1;
    }
    counts
}

fn rows_by_class(
    y: &[usize],
    n_classes: usize,
    rows: impl IntoIterator<Item = usize>,
) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); n_classes];
    for i in rows {
        groups[y[i]].push(i);
    }
    groups
}

fn check_label_map(map: &LabelMap) -> Result<usize> {
    let mut ids: Vec<usize> = map.values().copied().collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() || ids.iter().enumerate().any(|(i, &id)| i != id) {
        return Err(Error::InvalidConfig(format!(
            "label map ids must be contiguous from 0, got {ids:?}"
        )));
    }
    Ok(ids.len())
}

/// Parses a labelled CSV. Attributes must all be numeric.
pub fn read_csv<R: Read>(
    reader: R,
    id: &str,
    options: &CsvOptions,
    label_map: &LabelMap,
) -> Result<LabeledDataset> {
    let n_classes = check_label_map(label_map)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Option<Vec<String>> = if options.has_header {
        Some(rdr.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };
    let label_index = match (&options.label_column, &header) {
        (LabelColumn::Index(i), _) => *i,
        (LabelColumn::Name(name), Some(h)) => h
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidConfig(format!("label column {name:?} not in header")))?,
        (LabelColumn::Name(name), None) => {
            return Err(Error::InvalidConfig(format!(
                "label column {name:?} given by name but the file has no header"
            )))
        }
    };

    let mut data = Vec::new();
    let mut y = Vec::new();
    let mut width = None;
    let first_row = if options.has_header { 2 } else { 1 };
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = first_row + i;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if label_index >= record.len() {
            return Err(Error::Parse {
                row,
                column: label_index,
                message: format!("record has only {} fields", record.len()),
            });
        }
        let w = record.len() - 1;
        if *width.get_or_insert(w) != w {
            return Err(Error::Parse {
                row,
                column: record.len(),
                message: format!("expected {} fields", width.unwrap() + 1),
            });
        }
        for (column, field) in record.iter().enumerate() {
            if column == label_index {
                let label = label_map.get(field).ok_or_else(|| Error::UnknownLabel {
                    label: field.to_string(),
                    row,
                })?;
                y.push(*label);
                continue;
            }
            let v: f64 = field.parse().map_err(|e| Error::Parse {
                row,
                column,
                message: format!("{field:?}: {e}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column,
                    message: format!("non-finite value {field:?}"),
                });
            }
            data.push(v);
        }
    }
    let width = width.unwrap_or(0);
    let x = Matrix::new(y.len(), width, data)?;
    let mut ds = LabeledDataset::new(id, x, y, n_classes)?;
    if let Some(h) = header {
        ds.attribute_names = h
            .into_iter()
            .enumerate()
            .filter(|(i, _)| *i != label_index)
            .map(|(_, n)| n)
            .collect();
    }
    Ok(ds)
}

pub fn load_csv(
    path: impl AsRef<Path>,
    options: &CsvOptions,
    label_map: &LabelMap,
) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(std::io::BufReader::new(file), &id, options, label_map)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Ascending row indices.
    pub train: Vec<usize>,
    /// Ascending row indices.
    pub test: Vec<usize>,
    pub seed: u64,
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const SPLIT_STREAM: u64 = 0;
pub(crate) const FOLD_STREAM: u64 = u64::MAX;

pub(crate) fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    rng(seed, stream)
}

/// Stream of the low-regime child generator for `(n_per_class, trial)`.
pub fn low_regime_stream(n_per_class: usize, trial: usize) -> u64 {
    ((n_per_class as u64) << 32) | (trial as u64 & 0xffff_ffff)
}

/// Per-class random partition with `floor(train_fraction * m)` training rows
/// (kept within `1..m`) and the rest for testing.
pub fn stratified_split(ds: &LabeledDataset, train_fraction: f64, seed: u64) -> Result<SplitSpec> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Domain {
            what: "train_fraction",
            value: train_fraction,
            domain: "(0, 1)",
        });
    }
    let mut rng = rng(seed, SPLIT_STREAM);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut members) in ds.rows_by_class().into_iter().enumerate() {
        let m = members.len();
        if m < 2 {
            return Err(Error::ClassTooSmall {
                class,
                available: m,
                required: 2,
            });
        }
        let wanted = (train_fraction * m as f64 + 1e-9).floor() as usize;
        let n_train = wanted.clamp(1, m - 1);
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitSpec { train, test, seed })
}

fn sample_per_class(
    y: &[usize],
    n_classes: usize,
    pool: impl IntoIterator<Item = usize>,
    n_per_class: usize,
    min_available: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut train = Vec::with_capacity(n_per_class * n_classes);
    let mut rest = Vec::new();
    for (class, mut members) in rows_by_class(y, n_classes, pool).into_iter().enumerate() {
        if members.len() < min_available {
            return Err(Error::ClassTooSmall {
                class,
                available: members.len(),
                required: min_available,
            });
        }
        let (chosen, others) = members.partial_shuffle(rng, n_per_class);
        train.extend_from_slice(chosen);
        rest.extend_from_slice(others);
    }
    train.sort_unstable();
    rest.sort_unstable();
    Ok((train, rest))
}

/// Draws exactly `n_per_class` training rows per class; every other row is
/// test data. The draw depends only on `(master_seed, n_per_class, trial)`.
pub fn low_regime_sample(
    ds: &LabeledDataset,
    n_per_class: usize,
    trial: usize,
    master_seed: u64,
) -> Result<SplitSpec> {
    if n_per_class == 0 {
        return Err(Error::InvalidConfig(
            "n_per_class must be at least 1".into(),
        ));
    }
    let mut rng = rng(master_seed, low_regime_stream(n_per_class, trial));
    let (train, test) = sample_per_class(
        &ds.y,
        ds.n_classes,
        0..ds.rows(),
        n_per_class,
        n_per_class + 1,
        &mut rng,
    )?;
    Ok(SplitSpec {
        train,
        test,
        seed: master_seed,
    })
}

/// Like [`low_regime_sample`], but draws from `holdout.train` and always tests
/// on `holdout.test`.
pub fn low_regime_sample_holdout(
    ds: &LabeledDataset,
    holdout: &SplitSpec,
    n_per_class: usize,
    trial: usize,
    master_seed: u64,
) -> Result<SplitSpec> {
    if n_per_class == 0 {
        return Err(Error::InvalidConfig(
            "n_per_class must be at least 1".into(),
        ));
    }
    let mut rng = rng(master_seed, low_regime_stream(n_per_class, trial));
    let (train, _) = sample_per_class(
        &ds.y,
        ds.n_classes,
        holdout.train.iter().copied(),
        n_per_class,
        n_per_class,
        &mut rng,
    )?;
    Ok(SplitSpec {
        train,
        test: holdout.test.clone(),
        seed: master_seed,
    })
}

/// Hyperparameters recorded for a dataset, typically the tuned values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TunedParams {
    /// Neuron parameters for ChaosNet (and CFX pipelines unless overridden).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chaos: Option<ChaosConfig>,
    /// Neuron parameters for CFX+ML pipelines, when tuned separately.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfx_chaos: Option<ChaosConfig>,
    /// k for stand-alone k-NN.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// k for CFX+k-NN.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfx_k: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub path: PathBuf,
    #[serde(flatten)]
    pub csv: CsvOptions,
    pub label_map: LabelMap,
    /// Drop attributes that are constant over the whole file.
    #[serde(default)]
    pub drop_constant_attributes: bool,
    #[serde(default)]
    pub params: TunedParams,
}

/// JSON manifest: dataset id -> file, label column, label map and parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub datasets: BTreeMap<String, DatasetEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: Manifest = serde_json::from_str(&text)?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for entry in manifest.datasets.values() {
            check_label_map(&entry.label_map)?;
            for c in [&entry.params.chaos, &entry.params.cfx_chaos]
                .into_iter()
                .flatten()
            {
                c.validate()?;
            }
        }
        Ok(manifest)
    }

    pub fn entry(&self, id: &str) -> Result<&DatasetEntry> {
        self.datasets
            .get(id)
            .ok_or_else(|| Error::UnknownDataset(id.to_string()))
    }

    pub fn load_dataset(&self, id: &str) -> Result<LabeledDataset> {
        let entry = self.entry(id)?;
        let path = self.base_dir.join(&entry.path);
        let mut ds = load_csv(&path, &entry.csv, &entry.label_map)?;
        ds.id = id.to_string();
        if entry.drop_constant_attributes {
            let constant: Vec<usize> = (0..ds.n_attributes())
                .filter(|&k| {
                    let mut col = ds.x.column(k);
                    let first = col.next();
                    col.all(|v| Some(v) == first)
                })
                .collect();
            ds.drop_attributes(&constant);
        }
        Ok(ds)
    }
}
