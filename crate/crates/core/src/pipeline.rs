use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chaosfex::transform;
use crate::chaosnet;
use crate::classifiers::{gnb_fit, gnb_predict, knn_predict};
use crate::error::{Error, Result};
use crate::gls_neuron::ChaosConfig;
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    #[serde(rename = "chaosnet")]
    ChaosNet,
    Knn,
    Gnb,
    CfxKnn,
    CfxGnb,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::ChaosNet,
        Algorithm::Knn,
        Algorithm::Gnb,
        Algorithm::CfxKnn,
        Algorithm::CfxGnb,
    ];

    /// Whether the classifier sees ChaosFEX features rather than raw attributes.
    pub fn uses_cfx(self) -> bool {
        matches!(
            self,
            Algorithm::ChaosNet | Algorithm::CfxKnn | Algorithm::CfxGnb
        )
    }

    pub fn uses_k(self) -> bool {
        matches!(self, Algorithm::Knn | Algorithm::CfxKnn)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::ChaosNet => "chaosnet",
            Algorithm::Knn => "knn",
            Algorithm::Gnb => "gnb",
            Algorithm::CfxKnn => "cfx-knn",
            Algorithm::CfxGnb => "cfx-gnb",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm {s:?}")))
    }
}

/// Features the classifier of `algorithm` consumes for normalized input `x`.
pub fn features<'a>(
    algorithm: Algorithm,
    x_norm: &'a Matrix,
    chaos: Option<&ChaosConfig>,
) -> Result<Cow<'a, Matrix>> {
    if !algorithm.uses_cfx() {
        return Ok(Cow::Borrowed(x_norm));
    }
    let config = chaos.ok_or_else(|| {
        Error::InvalidConfig(format!(
            "{algorithm} needs neuron parameters (q, b, epsilon)"
        ))
    })?;
    Ok(Cow::Owned(transform(x_norm, config)?.into_matrix()))
}

/// Trains on `(train, train_y)` and labels `test`. Inputs are already in the
/// algorithm's feature space.
pub fn fit_predict(
    algorithm: Algorithm,
    train: &Matrix,
    train_y: &[usize],
    test: &Matrix,
    n_classes: usize,
    k: Option<usize>,
) -> Result<Vec<usize>> {
    match algorithm {
        Algorithm::ChaosNet => {
            let means = chaosnet::train(train, train_y, n_classes)?;
            chaosnet::predict(test, &means)
        }
        Algorithm::Knn | Algorithm::CfxKnn => {
            let k = k.ok_or_else(|| Error::InvalidConfig(format!("{algorithm} needs k")))?;
            knn_predict(train, train_y, test, k)
        }
        Algorithm::Gnb | Algorithm::CfxGnb => {
            let model = gnb_fit(train, train_y, n_classes)?;
            gnb_predict(&model, test)
        }
    }
}
