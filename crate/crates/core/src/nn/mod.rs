//! Minimal CPU tensor engine for 3D residual networks.
//!
//! Activations are dynamic-rank `ndarray` arrays in `N × C × ...` layout.
//! Every layer has an explicit forward pass that records what its backward
//! pass needs, so training does not depend on a general autodiff system.
//! Parameters live in a [`ParamStore`] keyed by PyTorch-style names
//! (`layer1.0.conv1.weight`), which keeps checkpoints and weight inflation
//! simple.

mod adam;
mod conv;
mod layers;
mod network;
mod norm;
mod params;
mod pool;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};

pub use adam::Adam;
pub use conv::Conv3d;
pub use layers::{ConvTranspose1d, Linear};
pub(crate) use network::init_param;
pub use network::{BasicBlock, Init, Layer, Mode, ParamSpec, Sequential, Tape};
pub use norm::BatchNorm;
pub use params::{Grads, ParamStore};
pub use pool::MaxPool3d;

/// Floating-point element type of the engine (`f32` for training, `f64`
/// for gradient checks).
pub trait Scalar:
    Float
    + FromPrimitive
    + LinalgScalar
    + ScalarOperand
    + Send
    + Sync
    + Debug
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite conversion")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + LinalgScalar
        + ScalarOperand
        + Send
        + Sync
        + Debug
        + Default
        + Sum
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + 'static
{
}

/// Numerically stable softmax along axis 1 of an `N × G × L` array.
pub fn softmax_classes<T: Scalar>(logits: &ndarray::Array3<T>) -> ndarray::Array3<T> {
    let mut out = logits.clone();
    for mut lane in out.lanes_mut(ndarray::Axis(1)) {
        let max = lane.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let mut sum = T::zero();
        for v in lane.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in lane.iter_mut() {
            *v /= sum;
        }
    }
    out
}
