mod common;

use common::{brute_macro_f1, rng};
use neurochaos::metrics::{confusion, macro_f1, macro_f1_score, ConfusionMatrix};
use rand::Rng;

#[test]
fn macro_f1_matches_brute_force() {
    let mut rng = rng(3);
    for _ in 0..1_000 {
        let len = rng.random_range(1..60);
        let y_true: Vec<usize> = (0..len).map(|_| rng.random_range(0..3)).collect();
        let y_pred: Vec<usize> = (0..len).map(|_| rng.random_range(0..3)).collect();
        let fast = macro_f1_score(&y_true, &y_pred, 3).unwrap();
        assert!((fast - brute_macro_f1(&y_true, &y_pred, 3)).abs() <= 1e-12);
        assert_eq!(confusion(&y_true, &y_pred, 3).unwrap().total(), len as u64);
    }
}

#[test]
fn hand_confusion_matrix() {
    let cm = ConfusionMatrix::from_counts(2, vec![8, 2, 3, 7]).unwrap();
    assert!((macro_f1(&cm).unwrap() - 0.74937).abs() <= 1e-5);
    let mut y_true = vec![0; 10];
    y_true.extend([1; 10]);
    let mut y_pred = vec![0; 8];
    y_pred.extend([1; 2]);
    y_pred.extend([0; 3]);
    y_pred.extend([1; 7]);
    assert!((brute_macro_f1(&y_true, &y_pred, 2) - 0.74937).abs() <= 1e-5);
}
