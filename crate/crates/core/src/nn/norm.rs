use ndarray::ArrayD;

use super::{ParamStore, Scalar};
use crate::Result;

/// Per-channel batch normalisation over every axis except 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub name: String,
    pub channels: usize,
    pub eps: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone)]
pub enum NormCache<T> {
    Batch {
        xhat: ArrayD<T>,
        inv_std: Vec<T>,
        mean: Vec<T>,
        var_unbiased: Vec<T>,
    },
    Running {
        inv_std: Vec<T>,
    },
}

impl BatchNorm {
    pub fn new(name: impl Into<String>, channels: usize) -> Self {
        Self {
            name: name.into(),
            channels,
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    pub fn key(&self, field: &str) -> String {
        format!("{}.{field}", self.name)
    }

    /// Iterates `(channel, contiguous block)` pairs of an `N × C × S` layout.
    fn blocks(shape: &[usize]) -> (usize, usize, usize) {
        let n = shape[0];
        let c = shape[1];
        let s: usize = shape[2..].iter().product();
        (n, c, s)
    }

    pub fn forward<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        x: &ArrayD<T>,
        train: bool,
    ) -> Result<(ArrayD<T>, NormCache<T>)> {
        let gamma = params.param(&self.key("weight"))?;
        let beta = params.param(&self.key("bias"))?;
        let x = x.as_standard_layout().into_owned();
        let (n, c, s) = Self::blocks(x.shape());
        let xs = x.as_slice().unwrap();
        let eps = T::from_f64_lossy(self.eps);
        let (mean, var, cache_stats) = if train {
            let m = T::from_usize(n * s).unwrap();
            let mut mean = vec![T::zero(); c];
            let mut var = vec![T::zero(); c];
            for ch in 0..c {
                let mut acc = T::zero();
                for b in 0..n {
                    acc += xs[(b * c + ch) * s..(b * c + ch + 1) * s].iter().copied().sum::<T>();
                }
                mean[ch] = acc / m;
                let mut sq = T::zero();
                for b in 0..n {
                    for &v in &xs[(b * c + ch) * s..(b * c + ch + 1) * s] {
                        let d = v - mean[ch];
                        sq += d * d;
                    }
                }
                var[ch] = sq / m;
            }
            let denom = if n * s > 1 {
                T::from_usize(n * s - 1).unwrap()
            } else {
                T::one()
            };
            let unbiased = var.iter().map(|&v| v * m / denom).collect();
            (mean.clone(), var, Some((mean, unbiased)))
        } else {
            let rm = params.buffer(&self.key("running_mean"))?;
            let rv = params.buffer(&self.key("running_var"))?;
            (rm.iter().copied().collect(), rv.iter().copied().collect(), None)
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let mut xhat = ArrayD::<T>::zeros(x.raw_dim());
        let mut y = ArrayD::<T>::zeros(x.raw_dim());
        {
            let xh = xhat.as_slice_mut().unwrap();
            let ys = y.as_slice_mut().unwrap();
            for b in 0..n {
                for ch in 0..c {
                    let r = (b * c + ch) * s..(b * c + ch + 1) * s;
                    let (g, bb) = (gamma[ch], beta[ch]);
                    for i in r {
                        let h = (xs[i] - mean[ch]) * inv_std[ch];
                        xh[i] = h;
                        ys[i] = g * h + bb;
                    }
                }
            }
        }
        let cache = match cache_stats {
            Some((mean, var_unbiased)) => NormCache::Batch {
                xhat,
                inv_std,
                mean,
                var_unbiased,
            },
            None => NormCache::Running { inv_std },
        };
        Ok((y, cache))
    }

    /// Returns `(dx, dgamma, dbeta)`.
    pub fn backward<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        cache: &NormCache<T>,
        dy: &ArrayD<T>,
    ) -> Result<(ArrayD<T>, Vec<T>, Vec<T>)> {
        let gamma = params.param(&self.key("weight"))?;
        let dy = dy.as_standard_layout();
        let (n, c, s) = Self::blocks(dy.shape());
        let dys = dy.as_slice().unwrap();
        let mut dx = ArrayD::<T>::zeros(dy.raw_dim());
        let dxs = dx.as_slice_mut().unwrap();
        let mut dgamma = vec![T::zero(); c];
        let mut dbeta = vec![T::zero(); c];
        match cache {
            NormCache::Batch { xhat, inv_std, .. } => {
                let xh = xhat.as_slice().unwrap();
                let m = T::from_usize(n * s).unwrap();
                for ch in 0..c {
                    let mut sum_dy = T::zero();
                    let mut sum_dy_xh = T::zero();
                    for b in 0..n {
                        for i in (b * c + ch) * s..(b * c + ch + 1) * s {
                            sum_dy += dys[i];
                            sum_dy_xh += dys[i] * xh[i];
                        }
                    }
                    dgamma[ch] = sum_dy_xh;
                    dbeta[ch] = sum_dy;
                    let k = gamma[ch] * inv_std[ch] / m;
                    for b in 0..n {
                        for i in (b * c + ch) * s..(b * c + ch + 1) * s {
                            dxs[i] = k * (m * dys[i] - sum_dy - xh[i] * sum_dy_xh);
                        }
                    }
                }
            }
            NormCache::Running { inv_std } => {
                // xhat is not cached in eval mode, so dgamma stays zero
                for b in 0..n {
                    for ch in 0..c {
                        for i in (b * c + ch) * s..(b * c + ch + 1) * s {
                            dxs[i] = dys[i] * gamma[ch] * inv_std[ch];
                            dbeta[ch] += dys[i];
                        }
                    }
                }
            }
        }
        Ok((dx, dgamma, dbeta))
    }

    /// Exponential moving average of batch statistics into running buffers.
    pub fn update_running<T: Scalar>(&self, params: &mut ParamStore<T>, cache: &NormCache<T>) {
        let NormCache::Batch { mean, var_unbiased, .. } = cache else {
            return;
        };
        let mom = T::from_f64_lossy(self.momentum);
        let one = T::one();
        if let Some(rm) = params.buffers.get_mut(&self.key("running_mean")) {
            for (r, &m) in rm.iter_mut().zip(mean) {
                *r = (one - mom) * *r + mom * m;
            }
        }
        if let Some(rv) = params.buffers.get_mut(&self.key("running_var")) {
            for (r, &v) in rv.iter_mut().zip(var_unbiased) {
                *r = (one - mom) * *r + mom * v;
            }
        }
    }
}
