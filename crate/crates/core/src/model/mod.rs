//! Learned representations and the scoring functions for concept
//! retrieval, entity retrieval, subsumption and instantiation.

mod checkpoint;
mod embed_path;
mod fuzzy_path;
mod grads;
mod params;

pub use checkpoint::{
    checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION,
};
pub use grads::{GradientBundle, MlpGrads, RowGrads};
pub use params::{init_params, Matrix, Mlp, ModelConfig, ParameterStore};

pub(crate) use embed_path::embed_forward;
pub(crate) use fuzzy_path::membership_backward;
pub(crate) use fuzzy_path::FuzzyPlan;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)` without overflow.
#[inline]
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}
