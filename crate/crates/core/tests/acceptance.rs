//! One line per acceptance criterion; exits non-zero when any criterion fails.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use common::{brute_macro_f1, manifest_path, random_tuple, reference_features, rng};
use neurochaos::chaosfex::{import_csv, normalize_fit, transform, NormalizationMode};
use neurochaos::chaosnet;
use neurochaos::data::{stratified_split, LabeledDataset, Manifest};
use neurochaos::experiment::{run_high, run_low, RunOptions, RunParams};
use neurochaos::gls_neuron::{
    extract_features, fire, iterate_map, neuron_features, NeuralTrace, DEFAULT_MAX_ITERATIONS,
};
use neurochaos::metrics::{macro_f1, macro_f1_score, ConfusionMatrix};
use neurochaos::pipeline::Algorithm;
use neurochaos::{ChaosConfig, MapKind, Matrix};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, started: Instant) -> Result<String, String> {
    let took = started.elapsed();
    if took < limit {
        Ok(format!("{:.2}s", took.as_secs_f64()))
    } else {
        Err(format!(
            "took {:.2}s, limit {}s",
            took.as_secs_f64(),
            limit.as_secs()
        ))
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn dataset(id: &str) -> (LabeledDataset, neurochaos::data::TunedParams) {
    let m = Manifest::load(manifest_path()).expect("manifest");
    let ds = m.load_dataset(id).expect("dataset");
    (ds, m.entry(id).unwrap().params.clone())
}

fn firing_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = rng(1);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let (x, q, b, eps, binary) = random_tuple(&mut rng);
        let map = if binary {
            MapKind::SkewBinary
        } else {
            MapKind::SkewTent
        };
        let cfg = ChaosConfig::new(q, b, eps).unwrap().with_map_kind(map);
        let reference = reference_features(x, q, b, eps, binary, DEFAULT_MAX_ITERATIONS);
        let got = [
            neuron_features(x, &cfg).ok(),
            fire(x, &cfg).ok().map(|t| extract_features(&t, &cfg)),
        ];
        for f in got {
            let agree = match (reference, f) {
                (None, None) => true,
                (Some((n, r, e, h)), Some(f)) => {
                    f.firing_time == n
                        && (f.firing_rate - r).abs() <= 1e-12
                        && (f.energy - e).abs() <= 1e-12
                        && (f.entropy - h).abs() <= 1e-12
                }
                _ => false,
            };
            mismatches += usize::from(!agree);
        }
    }
    let time = within(Duration::from_secs(10), started)?;
    check(
        mismatches == 0,
        format!("10000 tuples, {mismatches} mismatches, {time}"),
    )
}

fn hand_traces() -> Outcome {
    let tent = ChaosConfig::new(0.1, 0.5, 0.05).unwrap();
    let t1 = fire(0.4, &tent).unwrap();
    let f1 = extract_features(&t1, &tent);
    let tent2 = ChaosConfig::new(0.3, 0.5, 0.1).unwrap();
    let t2 = fire(0.85, &tent2).unwrap();
    let f2 = extract_features(&t2, &tent2);
    let mixed = extract_features(
        &NeuralTrace {
            stimulus: 0.0,
            values: vec![0.2, 0.6, 0.3, 0.7],
        },
        &tent,
    );
    let immediate = fire(0.14, &ChaosConfig::new(0.141, 0.499, 0.147).unwrap()).unwrap();
    let binary = ChaosConfig::new(0.5, 0.25, 0.1)
        .unwrap()
        .with_map_kind(MapKind::SkewBinary);
    let ok = t1.values == [0.2, 0.4]
        && (f1.firing_time, f1.firing_rate, f1.entropy) == (2, 0.0, 0.0)
        && f1.energy == 0.2 * 0.2 + 0.4 * 0.4
        && t2.values == [0.6, 0.8]
        && (f2.firing_time, f2.firing_rate, f2.energy, f2.entropy) == (2, 1.0, 1.0, 0.0)
        && (mixed.firing_rate, mixed.entropy) == (0.5, 1.0)
        && immediate.values.is_empty()
        && iterate_map(0.25, &tent).unwrap() == 0.5
        && iterate_map(0.75, &tent).unwrap() == 0.5
        && iterate_map(0.6, &binary).unwrap() == (0.6 - 0.25) / 0.75;
    check(
        ok,
        format!(
            "0.4 -> {:?} E={}; 0.85 -> {:?} E={}",
            t1.values, f1.energy, t2.values, f2.energy
        ),
    )
}

fn metric_oracle() -> Outcome {
    let mut rng = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1_000 {
        let len = rng.random_range(1..60);
        let t: Vec<usize> = (0..len).map(|_| rng.random_range(0..3)).collect();
        let p: Vec<usize> = (0..len).map(|_| rng.random_range(0..3)).collect();
        worst = worst.max((macro_f1_score(&t, &p, 3).unwrap() - brute_macro_f1(&t, &p, 3)).abs());
    }
    let hand = macro_f1(&ConfusionMatrix::from_counts(2, vec![8, 2, 3, 7]).unwrap()).unwrap();
    check(
        worst <= 1e-12 && (hand - 0.74937).abs() <= 1e-5,
        format!("max deviation {worst:e} over 1000 vectors, [[8,2],[3,7]] -> {hand:.5}"),
    )
}

fn chaosnet_scores(id: &str) -> Vec<f64> {
    let (ds, tuned) = dataset(id);
    let params = RunParams::from_tuned(&tuned, Algorithm::ChaosNet);
    (0..10)
        .map(|seed| {
            run_high(
                &ds,
                Algorithm::ChaosNet,
                &params,
                seed,
                &RunOptions::default(),
            )
            .unwrap()
            .mean_f1
        })
        .collect()
}

fn fmt_scores(v: &[f64]) -> String {
    v.iter()
        .map(|f| format!("{f:.3}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn iris_chaosnet() -> Outcome {
    let started = Instant::now();
    let scores = chaosnet_scores("iris");
    let passing = scores.iter().filter(|&&f| f >= 0.95).count();
    let time = within(Duration::from_secs(30), started)?;
    check(
        passing >= 8,
        format!(
            "{passing}/10 seeds >= 0.95 (need 8); F1 {}; {time}",
            fmt_scores(&scores)
        ),
    )
}

fn median_target(id: &str, target: f64, tol: f64, limit: Option<Duration>) -> Outcome {
    let started = Instant::now();
    let scores = chaosnet_scores(id);
    let med = median(scores.clone());
    let time = match limit {
        Some(l) => within(l, started)?,
        None => format!("{:.2}s", started.elapsed().as_secs_f64()),
    };
    check(
        (med - target).abs() <= tol,
        format!(
            "median {med:.4} vs {target} +/- {tol}; F1 {}; {time}",
            fmt_scores(&scores)
        ),
    )
}

fn haberman_low_regime() -> Outcome {
    let started = Instant::now();
    let (ds, tuned) = dataset("haberman");
    let opts = RunOptions::default();
    let hybrid = RunParams::from_tuned(&tuned, Algorithm::CfxKnn);
    let raw = RunParams::from_tuned(&tuned, Algorithm::Knn);
    let mut wins = 0;
    let mut rows = Vec::new();
    for n in 1..=9 {
        let h = run_low(&ds, Algorithm::CfxKnn, &hybrid, n, 0, &opts)
            .unwrap()
            .mean_f1;
        let b = run_low(&ds, Algorithm::Knn, &raw, n, 0, &opts)
            .unwrap()
            .mean_f1;
        wins += usize::from(h > b);
        rows.push(format!("{n}:{h:.3}/{b:.3}"));
    }
    let time = within(Duration::from_secs(300), started)?;
    check(
        wins >= 5,
        format!(
            "CFX+kNN ahead for {wins}/9 n (need 5); {}; {time}",
            rows.join(" ")
        ),
    )
}

fn nl(args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_nl"))
        .args(args)
        .status()
        .map_err(|e| e.to_string())?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("nl {} exited with {status}", args.join(" ")))
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = manifest_path();
    let manifest = manifest.to_str().unwrap();
    let mut identical = 0;
    let runs: [&[&str]; 2] = [
        &[
            "--dataset",
            "haberman",
            "--algo",
            "cfx-knn",
            "--regime",
            "low",
            "--seed",
            "5",
        ],
        &[
            "--dataset",
            "wine",
            "--algo",
            "chaosnet",
            "--regime",
            "high",
            "--seed",
            "5",
        ],
    ];
    let mut trials = 0;
    for (i, extra) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for attempt in 0..2 {
            let out = dir.path().join(format!("{i}_{attempt}.json"));
            let out_s = out.to_str().unwrap().to_string();
            let mut args = vec!["run", "--manifest", manifest, "--out", &out_s];
            args.extend_from_slice(extra);
            nl(&args)?;
            outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        }
        identical += usize::from(outputs[0] == outputs[1]);
        let doc: serde_json::Value =
            serde_json::from_slice(&outputs[0]).map_err(|e| e.to_string())?;
        for r in doc["results"].as_array().unwrap() {
            trials += r
                .get("trial_f1")
                .and_then(|t| t.as_array())
                .map_or(0, |t| t.len());
        }
    }
    check(
        identical == runs.len() && trials == 9 * 150,
        format!(
            "{identical}/{} invocation pairs bitwise identical, {trials} trial values",
            runs.len()
        ),
    )
}

fn invariant_suite() -> Outcome {
    let cases = 256;
    let runner = || TestRunner::new(Config::with_cases(cases));
    let mut failures = Vec::new();

    let bounds = (0.0f64..=1.0, 0.001f64..0.999, 0.01f64..0.99, 0.01f64..=0.5);
    if let Err(e) = runner().run(&bounds, |(x, q, b, e)| {
        let cfg = ChaosConfig::new(q, b, e).unwrap();
        let f = neuron_features(x, &cfg).unwrap();
        prop_assert!((0.0..=1.0).contains(&f.firing_rate));
        prop_assert!((0.0..=1.0).contains(&f.entropy));
        prop_assert!(f.energy >= 0.0 && f.energy <= f.firing_time as f64);
        Ok(())
    }) {
        failures.push(format!("feature bounds: {e}"));
    }

    let scale = (
        prop::collection::vec(prop::collection::vec(0.0f64..10.0, 3), 4..16),
        prop::collection::vec(0.0f64..10.0, 3),
        -20i32..20,
    );
    if let Err(e) = runner().run(&scale, |(rows, test, power)| {
        let y: Vec<usize> = (0..rows.len()).map(|i| i % 2).collect();
        let means = chaosnet::train(&Matrix::from_rows(&rows).unwrap(), &y, 2).unwrap();
        let scaled: Vec<f64> = test.iter().map(|v| v * 2f64.powi(power)).collect();
        let a = chaosnet::predict(&Matrix::from_rows(&[test]).unwrap(), &means).unwrap();
        let b = chaosnet::predict(&Matrix::from_rows(&[scaled]).unwrap(), &means).unwrap();
        prop_assert_eq!(a, b);
        Ok(())
    }) {
        failures.push(format!("scale invariance: {e}"));
    }

    let split = (prop::collection::vec(0usize..3, 6..60), any::<u64>());
    if let Err(e) = runner().run(&split, |(mut y, seed)| {
        y.extend([0, 0, 1, 1, 2, 2]);
        let x = Matrix::zeros(y.len(), 1);
        let ds = LabeledDataset::new("p", x, y.clone(), 3).unwrap();
        let s = stratified_split(&ds, 0.8, seed).unwrap();
        prop_assert!(s.train.iter().all(|i| !s.test.contains(i)));
        prop_assert_eq!(s.train.len() + s.test.len(), y.len());
        for c in 0..3 {
            let m = y.iter().filter(|&&l| l == c).count();
            let t = s.train.iter().filter(|&&i| y[i] == c).count();
            prop_assert_eq!(
                t,
                ((0.8 * m as f64 + 1e-9).floor() as usize).clamp(1, m - 1)
            );
        }
        Ok(())
    }) {
        failures.push(format!("split: {e}"));
    }

    let relabel = (
        prop::collection::vec((0usize..3, 0usize..3), 1..80),
        Just(vec![0usize, 1, 2]).prop_shuffle(),
    );
    if let Err(e) = runner().run(&relabel, |(pairs, perm)| {
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let a = macro_f1_score(&t, &p, 3).unwrap();
        let t2: Vec<usize> = t.iter().map(|&c| perm[c]).collect();
        let p2: Vec<usize> = p.iter().map(|&c| perm[c]).collect();
        prop_assert!((a - macro_f1_score(&t2, &p2, 3).unwrap()).abs() <= 1e-12);
        Ok(())
    }) {
        failures.push(format!("relabeling: {e}"));
    }

    if failures.is_empty() {
        Ok(format!("4 properties x {cases} cases"))
    } else {
        Err(failures.join("; "))
    }
}

fn cfx_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("iris_cfx.csv");
    let manifest = manifest_path();
    nl(&[
        "run",
        "--manifest",
        manifest.to_str().unwrap(),
        "--dataset",
        "iris",
        "--algo",
        "chaosnet",
        "--regime",
        "high",
        "--export-cfx",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("r.json").to_str().unwrap(),
    ])?;
    let (ds, tuned) = dataset("iris");
    let x = normalize_fit(&ds.x, NormalizationMode::WholeDataset, &[])
        .and_then(|p| p.apply(&ds.x))
        .unwrap();
    let expected = transform(&x, &tuned.chaos.unwrap()).unwrap();
    let (loaded, labels) = import_csv(&path).map_err(|e| e.to_string())?;
    let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    check(
        bits(loaded.matrix()) == bits(expected.matrix()) && labels == ds.y,
        format!("{}x{} matrix reloaded", loaded.rows(), loaded.width()),
    )
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 firing oracle", firing_oracle),
        ("2 hand traces", hand_traces),
        ("3 metric oracle", metric_oracle),
        ("4 ChaosNet Iris", iris_chaosnet),
        ("5 ChaosNet Wine", || {
            median_target("wine", 0.976, 0.06, Some(Duration::from_secs(30)))
        }),
        ("6 ChaosNet Haberman", || {
            median_target("haberman", 0.560, 0.12, None)
        }),
        ("7 Haberman low-regime boost direction", haberman_low_regime),
        ("8 determinism", determinism),
        ("9 invariant suite", invariant_suite),
        ("10 CFX export round-trip", cfx_round_trip),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
