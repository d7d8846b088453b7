//! A single 1D GLS (Generalized Lüroth Series) chaotic neuron.
//!
//! The neuron starts at its initial activity `q` and iterates a piecewise-linear
//! chaotic map until the orbit enters the ε-neighbourhood of the stimulus. The
//! visited states `z(1)..z(N)` form the neural trace; `z(0) = q` is not part of it.
//! From the trace we read four features: firing time `N`, firing rate `R`
//! (fraction of states at or above the threshold `b`), energy `E = Σ z(t)²` and
//! the Shannon entropy `H` of the binary symbolic sequence `z(t) >= b`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

/// Largest `f64` strictly below 1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    /// `z/b` on `[0, b)`, `(1 - z)/(1 - b)` on `[b, 1)`.
    #[default]
    SkewTent,
    /// `z/b` on `[0, b)`, `(z - b)/(1 - b)` on `[b, 1)`.
    SkewBinary,
}

impl MapKind {
    /// One map step without domain checks. The image is folded into `[0, 1)`:
    /// the tent map sends `z == b` to 1 (and rounding can do the same just
    /// below `b`), so such images are pulled back to the largest value below 1.
    #[inline]
    pub fn step(self, z: f64, b: f64) -> f64 {
        let next = if z < b {
            z / b
        } else {
            match self {
                MapKind::SkewTent => (1.0 - z) / (1.0 - b),
                MapKind::SkewBinary => (z - b) / (1.0 - b),
            }
        };
        if next >= 1.0 {
            BELOW_ONE
        } else {
            next
        }
    }
}

impl std::fmt::Display for MapKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MapKind::SkewTent => "skew-tent",
            MapKind::SkewBinary => "skew-binary",
        })
    }
}

impl std::str::FromStr for MapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "skew-tent" | "tent" => Ok(MapKind::SkewTent),
            "skew-binary" | "binary" => Ok(MapKind::SkewBinary),
            other => Err(Error::InvalidConfig(format!("unknown map kind {other:?}"))),
        }
    }
}

/// Hyperparameters shared by every neuron of a layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosConfig {
    /// Initial neural activity, in (0, 1).
    pub q: f64,
    /// Discrimination threshold and map breakpoint, in (0, 1).
    pub b: f64,
    /// Half-width of the recognition neighbourhood, in (0, 0.5].
    pub epsilon: f64,
    #[serde(default)]
    pub map_kind: MapKind,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}

impl ChaosConfig {
    pub fn new(q: f64, b: f64, epsilon: f64) -> Result<Self> {
        let config = Self {
            q,
            b,
            epsilon,
            map_kind: MapKind::SkewTent,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_map_kind(mut self, map_kind: MapKind) -> Self {
        self.map_kind = map_kind;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Result<Self> {
        self.max_iterations = max_iterations;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |what, v: f64| {
            if v.is_finite() && v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::Domain {
                    what,
                    value: v,
                    domain: "(0, 1)",
                })
            }
        };
        open_unit("q", self.q)?;
        open_unit("b", self.b)?;
        if !(self.epsilon.is_finite() && self.epsilon > 0.0 && self.epsilon <= 0.5) {
            return Err(Error::Domain {
                what: "epsilon",
                value: self.epsilon,
                domain: "(0, 0.5]",
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Applies the configured map once. `z` must lie in `[0, 1)`.
pub fn iterate_map(z: f64, config: &ChaosConfig) -> Result<f64> {
    if !(0.0..1.0).contains(&z) {
        return Err(Error::Domain {
            what: "state",
            value: z,
            domain: "[0, 1)",
        });
    }
    Ok(config.map_kind.step(z, config.b))
}

/// The states visited by one neuron while recognising one stimulus.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralTrace {
    pub stimulus: f64,
    /// `z(1)..z(N)`; the last entry is the recognising state.
    pub values: Vec<f64>,
}

impl NeuralTrace {
    pub fn firing_time(&self) -> usize {
        self.values.len()
    }
}

fn check_stimulus(stimulus: f64) -> Result<()> {
    if (0.0..=1.0).contains(&stimulus) {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "stimulus",
            value: stimulus,
            domain: "[0, 1]",
        })
    }
}

/// Runs the neuron from `q` until it lands within ε of `stimulus`.
pub fn fire(stimulus: f64, config: &ChaosConfig) -> Result<NeuralTrace> {
    config.validate()?;
    check_stimulus(stimulus)?;
    let mut values = Vec::new();
    let mut z = config.q;
    while (z - stimulus).abs() >= config.epsilon {
        if values.len() == config.max_iterations {
            return Err(Error::NonConvergence {
                stimulus,
                max_iterations: config.max_iterations,
                row: None,
                attribute: None,
            });
        }
        z = config.map_kind.step(z, config.b);
        values.push(z);
    }
    Ok(NeuralTrace { stimulus, values })
}

/// The four ChaosFEX features of one trace.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CfxFeature {
    pub firing_time: usize,
    pub firing_rate: f64,
    pub energy: f64,
    pub entropy: f64,
}

impl CfxFeature {
    /// `[N, R, E, H]`, the column order used in feature matrices.
    pub fn to_array(self) -> [f64; 4] {
        [
            self.firing_time as f64,
            self.firing_rate,
            self.energy,
            self.entropy,
        ]
    }

    fn from_counts(firing_time: usize, above: usize, energy: f64) -> Self {
        if firing_time == 0 {
            return Self::default();
        }
        let n = firing_time as f64;
        let p1 = above as f64 / n;
        let p0 = (firing_time - above) as f64 / n;
        Self {
            firing_time,
            firing_rate: p1,
            energy,
            entropy: binary_entropy(p0, p1),
        }
    }
}

/// Shannon entropy in bits of a two-symbol distribution, with `0 log 0 = 0`.
pub fn binary_entropy(p0: f64, p1: f64) -> f64 {
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    term(p0) + term(p1)
}

pub fn extract_features(trace: &NeuralTrace, config: &ChaosConfig) -> CfxFeature {
    let above = trace.values.iter().filter(|&&z| z >= config.b).count();
    let energy = trace.values.iter().map(|z| z * z).sum();
    CfxFeature::from_counts(trace.values.len(), above, energy)
}

/// `fire` followed by `extract_features`, without materialising the trace.
pub fn neuron_features(stimulus: f64, config: &ChaosConfig) -> Result<CfxFeature> {
    check_stimulus(stimulus)?;
    let b = config.b;
    let map = config.map_kind;
    let mut z = config.q;
    let mut steps = 0usize;
    let mut above = 0usize;
    let mut energy = 0.0;
    while (z - stimulus).abs() >= config.epsilon {
        if steps == config.max_iterations {
            return Err(Error::NonConvergence {
                stimulus,
                max_iterations: config.max_iterations,
                row: None,
                attribute: None,
            });
        }
        z = map.step(z, b);
        steps += 1;
        if z >= b {
            above += 1;
        }
        energy += z * z;
    }
    Ok(CfxFeature::from_counts(steps, above, energy))
}
