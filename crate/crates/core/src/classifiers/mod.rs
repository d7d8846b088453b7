//! Conventional back-ends for the hybrid CFX+ML path. Both work on raw
//! normalized attributes as well as on CFX feature matrices.

mod gnb;
mod knn;

pub use gnb::{gnb_fit, gnb_predict, GnbModel, VAR_SMOOTHING};
pub use knn::knn_predict;
