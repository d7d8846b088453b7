//! Straight-line reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference neuron: records every state, then computes the features in
/// separate passes. Returns `None` when the orbit does not reach the ε-ball.
pub fn reference_features(
    stimulus: f64,
    q: f64,
    b: f64,
    epsilon: f64,
    binary: bool,
    max_iterations: usize,
) -> Option<(usize, f64, f64, f64)> {
    let mut states: Vec<f64> = Vec::new();
    let mut z = q;
    loop {
        if (z - stimulus).abs() < epsilon {
            break;
        }
        if states.len() == max_iterations {
            return None;
        }
        let mut next = if z < b {
            z / b
        } else if binary {
            (z - b) / (1.0 - b)
        } else {
            (1.0 - z) / (1.0 - b)
        };
        if next >= 1.0 {
            next = 1.0 - f64::EPSILON / 2.0;
        }
        z = next;
        states.push(z);
    }
    let n = states.len();
    if n == 0 {
        return Some((0, 0.0, 0.0, 0.0));
    }
    let symbols: Vec<u8> = states.iter().map(|&s| u8::from(s >= b)).collect();
    let ones = symbols.iter().filter(|&&s| s == 1).count();
    let r = ones as f64 / n as f64;
    let mut e = 0.0;
    for s in &states {
        e += s * s;
    }
    let mut h = 0.0;
    for count in [n - ones, ones] {
        if count > 0 {
            let p = count as f64 / n as f64;
            h -= p * p.log2();
        }
    }
    Some((n, r, e, h))
}

/// Macro F1 straight from the definitions, one class at a time.
pub fn brute_macro_f1(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> f64 {
    let mut total = 0.0;
    for c in 0..n_classes {
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut fn_ = 0.0;
        for (&t, &p) in y_true.iter().zip(y_pred) {
            if t == c && p == c {
                tp += 1.0;
            } else if t != c && p == c {
                fp += 1.0;
            } else if t == c && p != c {
                fn_ += 1.0;
            }
        }
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        total += f1;
    }
    total / n_classes as f64
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random (stimulus, q, b, epsilon, binary) tuple inside the legal parameter ranges.
pub fn random_tuple(rng: &mut ChaCha8Rng) -> (f64, f64, f64, f64, bool) {
    let stimulus = rng.random_range(0.0..=1.0);
    let q = rng.random_range(0.001..0.999);
    let b = rng.random_range(0.01..0.99);
    let epsilon = rng.random_range(0.001..=0.5);
    (stimulus, q, b, epsilon, rng.random_bool(0.5))
}

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn manifest_path() -> PathBuf {
    data_dir().join("manifest.json")
}
