use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Relative variance floor: `VAR_SMOOTHING * max_j Var(x_j)` over the whole
/// training set.
pub const VAR_SMOOTHING: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    pub priors: Vec<f64>,
    /// `means[c][j]`
    pub means: Vec<Vec<f64>>,
    /// `variances[c][j]`, already floored
    pub variances: Vec<Vec<f64>>,
    pub smoothing: f64,
}

fn mean_and_variance<'a>(
    rows: impl Iterator<Item = &'a [f64]>,
    width: usize,
) -> (Vec<f64>, Vec<f64>, usize) {
    let rows: Vec<&[f64]> = rows.collect();
    let n = rows.len();
    let mut mean = vec![0.0; width];
    for r in &rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; width];
    for r in &rows {
        for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= n as f64);
    (mean, var, n)
}

pub fn gnb_fit(train: &Matrix, y: &[usize], n_classes: usize) -> Result<GnbModel> {
    if train.rows() != y.len() {
        return Err(Error::shape(
            format!("{} labels", train.rows()),
            format!("{} labels", y.len()),
        ));
    }
    if let Some(&label) = y.iter().find(|&&l| l >= n_classes) {
        return Err(Error::LabelOutOfRange { label, n_classes });
    }
    let width = train.cols();
    let (_, overall_var, _) = mean_and_variance(train.iter_rows(), width);
    let largest = overall_var.iter().copied().fold(0.0, f64::max);
    let smoothing = if largest > 0.0 {
        VAR_SMOOTHING * largest
    } else {
        VAR_SMOOTHING
    };

    let mut priors = Vec::with_capacity(n_classes);
    let mut means = Vec::with_capacity(n_classes);
    let mut variances = Vec::with_capacity(n_classes);
    for class in 0..n_classes {
        let members = train
            .iter_rows()
            .zip(y)
            .filter(|(_, &l)| l == class)
            .map(|(r, _)| r);
        let (mean, mut var, count) = mean_and_variance(members, width);
        if count == 0 {
            return Err(Error::EmptyClass { class });
        }
        var.iter_mut().for_each(|v| *v = v.max(smoothing));
        priors.push(count as f64 / y.len() as f64);
        means.push(mean);
        variances.push(var);
    }
    Ok(GnbModel {
        priors,
        means,
        variances,
        smoothing,
    })
}

impl GnbModel {
    pub fn n_classes(&self) -> usize {
        self.priors.len()
    }

    /// Unnormalised log posterior of `class` for one row.
    pub fn joint_log_likelihood(&self, row: &[f64], class: usize) -> f64 {
        let mut ll = self.priors[class].ln();
        for ((x, m), v) in row
            .iter()
            .zip(&self.means[class])
            .zip(&self.variances[class])
        {
            ll -= 0.5 * (2.0 * std::f64::consts::PI * v).ln() + (x - m) * (x - m) / (2.0 * v);
        }
        ll
    }

    fn predict_row(&self, row: &[f64]) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for c in 0..self.n_classes() {
            let ll = self.joint_log_likelihood(row, c);
            if ll > best.0 {
                best = (ll, c);
            }
        }
        best.1
    }
}

pub fn gnb_predict(model: &GnbModel, test: &Matrix) -> Result<Vec<usize>> {
    let width = model.means.first().map_or(0, Vec::len);
    if test.rows() > 0 && test.cols() != width {
        return Err(Error::shape(
            format!("{width} columns"),
            format!("{} columns", test.cols()),
        ));
    }
    Ok((0..test.rows())
        .into_par_iter()
        .map(|i| model.predict_row(test.row(i)))
        .collect())
}
