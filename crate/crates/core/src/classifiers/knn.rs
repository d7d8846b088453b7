use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn vote(train: &Matrix, train_y: &[usize], n_classes: usize, row: &[f64], k: usize) -> usize {
    let mut neighbours: Vec<(f64, usize)> = train
        .iter_rows()
        .map(|t| squared_distance(row, t))
        .enumerate()
        .map(|(i, d)| (d, i))
        .collect();
    let by_distance_then_index =
        |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < neighbours.len() {
        neighbours.select_nth_unstable_by(k - 1, by_distance_then_index);
        neighbours.truncate(k);
    }
    let mut counts = vec![0usize; n_classes];
    for &(_, i) in &neighbours {
        counts[train_y[i]] += 1;
    }
    // first maximum wins, i.e. the lowest class id
    counts
        .iter()
        .enumerate()
        .fold((0, 0), |best, (c, &n)| match n.cmp(&best.1) {
            Ordering::Greater => (c, n),
            _ => best,
        })
        .0
}

/// Euclidean k-NN with majority vote. Distance ties go to the lower training
/// row, vote ties to the lower class id.
pub fn knn_predict(
    train: &Matrix,
    train_y: &[usize],
    test: &Matrix,
    k: usize,
) -> Result<Vec<usize>> {
    if train.rows() != train_y.len() {
        return Err(Error::shape(
            format!("{} labels", train.rows()),
            format!("{} labels", train_y.len()),
        ));
    }
    if test.rows() > 0 && test.cols() != train.cols() {
        return Err(Error::shape(
            format!("{} columns", train.cols()),
            format!("{} columns", test.cols()),
        ));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if k > train.rows() {
        return Err(Error::KTooLarge {
            k,
            rows: train.rows(),
        });
    }
    let n_classes = train_y.iter().max().map_or(0, |m| m + 1);
    Ok((0..test.rows())
        .into_par_iter()
        .map(|i| vote(train, train_y, n_classes, test.row(i), k))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[f64]) -> Matrix {
        Matrix::new(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn exact_match_with_k1() {
        let train = col(&[0.0, 5.0, 9.0]);
        assert_eq!(
            knn_predict(&train, &[2, 0, 1], &col(&[5.0]), 1).unwrap(),
            vec![0]
        );
    }

    #[test]
    fn three_neighbours_in_1d() {
        // distances 0.4, 0.6, 9.6
        let train = col(&[0.0, 1.0, 10.0]);
        assert_eq!(
            knn_predict(&train, &[0, 0, 1], &col(&[0.4]), 3).unwrap(),
            vec![0]
        );
    }

    #[test]
    fn vote_tie_goes_to_lowest_class() {
        let train = col(&[0.0, 1.0]);
        assert_eq!(
            knn_predict(&train, &[1, 0], &col(&[0.2]), 2).unwrap(),
            vec![0]
        );
    }

    #[test]
    fn distance_tie_goes_to_lower_row() {
        // rows 0 and 2 are both at distance 1; k = 1 must pick row 0
        let train = col(&[1.0, 5.0, -1.0]);
        assert_eq!(
            knn_predict(&train, &[1, 0, 0], &col(&[0.0]), 1).unwrap(),
            vec![1]
        );
        let train = col(&[-1.0, 5.0, 1.0]);
        assert_eq!(
            knn_predict(&train, &[0, 1, 1], &col(&[0.0]), 1).unwrap(),
            vec![0]
        );
    }

    #[test]
    fn k_too_large() {
        let train = col(&[0.0, 1.0]);
        assert!(matches!(
            knn_predict(&train, &[0, 1], &col(&[0.0]), 3),
            Err(Error::KTooLarge { k: 3, rows: 2 })
        ));
    }
}
