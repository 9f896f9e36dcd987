use std::collections::BTreeMap;

use ndarray::ArrayD;

use super::Scalar;
use crate::{Error, Result};

pub type Grads<T> = BTreeMap<String, ArrayD<T>>;

/// Trainable parameters plus non-trainable buffers (batch-norm running
/// statistics), both keyed by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore<T> {
    pub params: BTreeMap<String, ArrayD<T>>,
    pub buffers: BTreeMap<String, ArrayD<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn param(&self, name: &str) -> Result<&ArrayD<T>> {
        self.params.get(name).ok_or_else(|| Error::MissingKey(name.to_string()))
    }

    pub fn buffer(&self, name: &str) -> Result<&ArrayD<T>> {
        self.buffers
            .get(name)
            .ok_or_else(|| Error::MissingKey(name.to_string()))
    }

    /// Looks a name up among parameters first, then buffers.
    pub fn any(&self, name: &str) -> Option<&ArrayD<T>> {
        self.params.get(name).or_else(|| self.buffers.get(name))
    }

    pub fn zero_grads(&self) -> Grads<T> {
        self.params
            .iter()
            .map(|(k, v)| (k.clone(), ArrayD::zeros(v.raw_dim())))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.params.values().map(|a| a.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        let conv = |m: &BTreeMap<String, ArrayD<T>>| {
            m.iter()
                .map(|(k, v)| (k.clone(), v.mapv(|x| U::from_f64_lossy(x.to_f64().unwrap()))))
                .collect()
        };
        ParamStore {
            params: conv(&self.params),
            buffers: conv(&self.buffers),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params
            .values()
            .chain(self.buffers.values())
            .all(|a| a.iter().all(|v| v.is_finite()))
    }
}
