//! ChaosNet: nearest mean representation vector under cosine similarity.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanRepresentation {
    pub class_id: usize,
    pub vector: Vec<f64>,
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(
            format!("width {}", a.len()),
            format!("width {}", b.len()),
        ));
    }
    Ok(cosine_unchecked(a, b))
}

fn cosine_unchecked(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Per-class column means of the training rows.
pub fn train(m: &Matrix, y: &[usize], n_classes: usize) -> Result<Vec<MeanRepresentation>> {
    if m.rows() != y.len() {
        return Err(Error::shape(
            format!("{} labels", m.rows()),
            format!("{} labels", y.len()),
        ));
    }
    let mut sums = vec![vec![0.0; m.cols()]; n_classes];
    let mut counts = vec![0usize; n_classes];
    for (row, &label) in m.iter_rows().zip(y) {
        if label >= n_classes {
            return Err(Error::LabelOutOfRange { label, n_classes });
        }
        counts[label] += 1;
        for (s, v) in sums[label].iter_mut().zip(row) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(counts)
        .enumerate()
        .map(|(class_id, (mut vector, count))| {
            if count == 0 {
                return Err(Error::EmptyClass { class: class_id });
            }
            let n = count as f64;
            vector.iter_mut().for_each(|v| *v /= n);
            Ok(MeanRepresentation { class_id, vector })
        })
        .collect()
}

fn best_class(row: &[f64], means: &[MeanRepresentation]) -> usize {
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for m in means {
        let s = cosine_unchecked(row, &m.vector);
        // strict comparison keeps the lowest class id on ties
        if s > best.0 || (s == best.0 && m.class_id < best.1) {
            best = (s, m.class_id);
        }
    }
    best.1
}

/// Assigns each row the class whose mean has the highest cosine similarity.
pub fn predict(m: &Matrix, means: &[MeanRepresentation]) -> Result<Vec<usize>> {
    if means.is_empty() {
        return Err(Error::shape("at least one class mean", "none"));
    }
    if let Some(bad) = means.iter().find(|r| r.vector.len() != m.cols()) {
        return Err(Error::shape(
            format!("width {}", m.cols()),
            format!("width {} for class {}", bad.vector.len(), bad.class_id),
        ));
    }
    Ok((0..m.rows())
        .into_par_iter()
        .map(|i| best_class(m.row(i), means))
        .collect())
}

/// `class_id,v0,v1,...` rows for inspection.
pub fn write_means_csv<W: Write>(means: &[MeanRepresentation], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let width = means.first().map_or(0, |m| m.vector.len());
    let mut header = vec!["class_id".to_string()];
    header.extend((0..width).map(|j| format!("v{j}")));
    w.write_record(&header)?;
    for m in means {
        let mut record = vec![m.class_id.to_string()];
        record.extend(m.vector.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
