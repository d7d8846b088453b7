//! Min-max normalization and the ChaosFEX transform of whole datasets.
//!
//! Every attribute of every instance is presented to its own neuron. The
//! resulting feature row has width `4 * n_attributes`, grouped per attribute as
//! `[N, R, E, H]`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gls_neuron::{neuron_features, ChaosConfig};
use crate::matrix::Matrix;

pub const FEATURES_PER_ATTRIBUTE: usize = 4;
const FEATURE_SUFFIXES: [&str; FEATURES_PER_ATTRIBUTE] = ["N", "R", "E", "H"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    /// Fit min/max over every row, test rows included.
    #[default]
    WholeDataset,
    /// Fit min/max over the training rows only; other rows are clamped.
    TrainOnly,
}

/// What to do with an attribute whose fitted range is empty.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ConstantPolicy {
    /// Fail with [`Error::ConstantAttribute`].
    #[default]
    Reject,
    /// Keep the attribute as the zero-width limit of the clamped formula:
    /// values at or below the constant map to 0, values above it to 1.
    Step,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormalizationParams {
    /// Fits per-attribute min/max over `rows` of `x`.
    pub fn fit(x: &Matrix, rows: &[usize], policy: ConstantPolicy) -> Result<Self> {
        if x.cols() == 0 || rows.is_empty() {
            return Err(Error::shape(
                "a non-empty matrix",
                format!("{}x{}", rows.len(), x.cols()),
            ));
        }
        let mut min = vec![f64::INFINITY; x.cols()];
        let mut max = vec![f64::NEG_INFINITY; x.cols()];
        for &r in rows {
            for (k, &v) in x.row(r).iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        for (k, (lo, hi)) in min.iter().zip(&max).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Domain {
                    what: "attribute range",
                    value: if lo.is_finite() { *hi } else { *lo },
                    domain: "finite reals",
                });
            }
            if lo == hi && policy == ConstantPolicy::Reject {
                return Err(Error::ConstantAttribute {
                    index: k,
                    value: *lo,
                });
            }
        }
        Ok(Self { min, max })
    }

    pub fn n_attributes(&self) -> usize {
        self.min.len()
    }

    /// Indices of attributes with `min == max`.
    pub fn constant_attributes(&self) -> Vec<usize> {
        (0..self.min.len())
            .filter(|&k| self.min[k] == self.max[k])
            .collect()
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.n_attributes() {
            return Err(Error::shape(
                format!("{} attributes", self.n_attributes()),
                format!("{} attributes", x.cols()),
            ));
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (k, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = scale(*v, self.min[k], self.max[k]);
            }
        }
        Ok(out)
    }
}

fn scale(v: f64, min: f64, max: f64) -> f64 {
    if max > min {
        ((v - min) / (max - min)).clamp(0.0, 1.0)
    } else if v > min {
        1.0
    } else {
        0.0
    }
}

/// Fits normalization parameters. `train_rows` is only consulted in
/// [`NormalizationMode::TrainOnly`].
pub fn normalize_fit(
    x: &Matrix,
    mode: NormalizationMode,
    train_rows: &[usize],
) -> Result<NormalizationParams> {
    match mode {
        NormalizationMode::WholeDataset => {
            let all: Vec<usize> = (0..x.rows()).collect();
            NormalizationParams::fit(x, &all, ConstantPolicy::Reject)
        }
        NormalizationMode::TrainOnly => {
            NormalizationParams::fit(x, train_rows, ConstantPolicy::Reject)
        }
    }
}

pub fn normalize_apply(x: &Matrix, params: &NormalizationParams) -> Result<Matrix> {
    params.apply(x)
}

/// ChaosFEX feature matrix: one row per instance, `[N, R, E, H]` per attribute.
#[derive(Clone, Debug, PartialEq)]
pub struct CfxMatrix {
    n_attributes: usize,
    features: Matrix,
}

impl CfxMatrix {
    pub fn from_matrix(features: Matrix) -> Result<Self> {
        if !features.cols().is_multiple_of(FEATURES_PER_ATTRIBUTE) {
            return Err(Error::shape(
                "a multiple of 4 columns",
                format!("{} columns", features.cols()),
            ));
        }
        Ok(Self {
            n_attributes: features.cols() / FEATURES_PER_ATTRIBUTE,
            features,
        })
    }

    pub fn n_attributes(&self) -> usize {
        self.n_attributes
    }

    pub fn rows(&self) -> usize {
        self.features.rows()
    }

    pub fn width(&self) -> usize {
        self.features.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.features
    }

    pub fn into_matrix(self) -> Matrix {
        self.features
    }

    pub fn select_rows(&self, indices: &[usize]) -> CfxMatrix {
        CfxMatrix {
            n_attributes: self.n_attributes,
            features: self.features.select_rows(indices),
        }
    }
}

fn transform_row(x: &[f64], out: &mut [f64], config: &ChaosConfig, row: usize) -> Result<()> {
    for (k, (&stimulus, cell)) in x
        .iter()
        .zip(out.chunks_exact_mut(FEATURES_PER_ATTRIBUTE))
        .enumerate()
    {
        let f = neuron_features(stimulus, config).map_err(|e| e.at_cell(row, k))?;
        cell.copy_from_slice(&f.to_array());
    }
    Ok(())
}

fn empty_output(x_norm: &Matrix, config: &ChaosConfig) -> Result<Matrix> {
    config.validate()?;
    Ok(Matrix::zeros(
        x_norm.rows(),
        x_norm.cols() * FEATURES_PER_ATTRIBUTE,
    ))
}

/// Transforms a normalized matrix (cells in `[0, 1]`) into CFX features.
/// Rows are processed in parallel; the result does not depend on scheduling.
pub fn transform(x_norm: &Matrix, config: &ChaosConfig) -> Result<CfxMatrix> {
    let mut out = empty_output(x_norm, config)?;
    let width = out.cols();
    if width > 0 {
        out.as_mut_slice()
            .par_chunks_mut(width)
            .enumerate()
            .try_for_each(|(i, dst)| transform_row(x_norm.row(i), dst, config, i))?;
    }
    CfxMatrix::from_matrix(out)
}

pub fn transform_sequential(x_norm: &Matrix, config: &ChaosConfig) -> Result<CfxMatrix> {
    let mut out = empty_output(x_norm, config)?;
    for i in 0..x_norm.rows() {
        transform_row(x_norm.row(i), out.row_mut(i), config, i)?;
    }
    CfxMatrix::from_matrix(out)
}

pub fn feature_header(n_attributes: usize) -> Vec<String> {
    let mut header: Vec<String> = (0..n_attributes)
        .flat_map(|k| FEATURE_SUFFIXES.iter().map(move |s| format!("f{k}_{s}")))
        .collect();
    header.push("label".to_string());
    header
}

/// Writes `f0_N,f0_R,f0_E,f0_H,...,label` rows. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_cfx_csv<W: Write>(m: &CfxMatrix, labels: &[usize], writer: W) -> Result<()> {
    if m.rows() != labels.len() {
        return Err(Error::shape(
            format!("{} labels", m.rows()),
            format!("{} labels", labels.len()),
        ));
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(feature_header(m.n_attributes()))?;
    let mut record = Vec::with_capacity(m.width() + 1);
    for (row, label) in m.matrix().iter_rows().zip(labels) {
        record.clear();
        record.extend(row.iter().map(|v| v.to_string()));
        record.push(label.to_string());
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn export_csv(m: &CfxMatrix, labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_cfx_csv(m, labels, BufWriter::new(file))
}

pub fn read_cfx_csv<R: Read>(reader: R) -> Result<(CfxMatrix, Vec<usize>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let width = r.headers()?.len();
    if width == 0 || (width - 1) % FEATURES_PER_ATTRIBUTE != 0 {
        return Err(Error::shape("4n+1 columns", format!("{width} columns")));
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let row = i + 1;
        for (j, field) in record.iter().enumerate() {
            if j + 1 == width {
                labels.push(field.parse().map_err(|e| Error::Parse {
                    row,
                    column: j,
                    message: format!("{e}"),
                })?);
            } else {
                data.push(field.parse::<f64>().map_err(|e| Error::Parse {
                    row,
                    column: j,
                    message: format!("{e}"),
                })?);
            }
        }
    }
    let m = Matrix::new(labels.len(), width - 1, data)?;
    Ok((CfxMatrix::from_matrix(m)?, labels))
}

pub fn import_csv(path: impl AsRef<Path>) -> Result<(CfxMatrix, Vec<usize>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_cfx_csv(std::io::BufReader::new(file))
}
