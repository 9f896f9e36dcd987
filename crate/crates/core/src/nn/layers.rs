use ndarray::{ArrayD, IxDyn};

use super::{Grads, ParamStore, Scalar};
use crate::{Error, Result};

fn input_3d<T: Scalar>(what: &str, x: &ArrayD<T>, channels: usize) -> Result<(usize, usize)> {
    match *x.shape() {
        [n, c, t] if c == channels => Ok((n, t)),
        _ => Err(Error::shape(format!("{what} input"), &[0, channels, 0], x.shape())),
    }
}

fn add_grad<T: Scalar>(grads: &mut Grads<T>, key: &str, g: ArrayD<T>) {
    if let Some(acc) = grads.get_mut(key) {
        *acc += &g;
    }
}

/// Transposed 1D convolution over `N × C_in × T`, weight `C_in × C_out × K`
/// plus bias, no padding: output length `(T - 1) · stride + K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvTranspose1d {
    pub name: String,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvTranspose1d {
    pub fn output_len(&self, input: usize) -> usize {
        (input - 1) * self.stride + self.kernel
    }

    pub fn weight_shape(&self) -> [usize; 3] {
        [self.in_ch, self.out_ch, self.kernel]
    }

    pub fn weight_key(&self) -> String {
        format!("{}.weight", self.name)
    }

    pub fn bias_key(&self) -> String {
        format!("{}.bias", self.name)
    }

    pub fn forward<T: Scalar>(&self, params: &ParamStore<T>, x: &ArrayD<T>) -> Result<ArrayD<T>> {
        let (n, t_in) = input_3d(&self.name, x, self.in_ch)?;
        let w = params.param(&self.weight_key())?;
        let b = params.param(&self.bias_key())?;
        if w.shape() != self.weight_shape() {
            return Err(Error::shape(self.weight_key(), &self.weight_shape(), w.shape()));
        }
        let t_out = self.output_len(t_in);
        let mut y = ArrayD::<T>::zeros(IxDyn(&[n, self.out_ch, t_out]));
        for bi in 0..n {
            for co in 0..self.out_ch {
                for t in 0..t_out {
                    y[[bi, co, t]] = b[co];
                }
            }
            for ci in 0..self.in_ch {
                for ti in 0..t_in {
                    let xv = x[[bi, ci, ti]];
                    for co in 0..self.out_ch {
                        for k in 0..self.kernel {
                            y[[bi, co, ti * self.stride + k]] += xv * w[[ci, co, k]];
                        }
                    }
                }
            }
        }
        Ok(y)
    }

    pub fn backward<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        x: &ArrayD<T>,
        dy: &ArrayD<T>,
        grads: &mut Grads<T>,
    ) -> Result<ArrayD<T>> {
        let (n, t_in) = input_3d(&self.name, x, self.in_ch)?;
        let w = params.param(&self.weight_key())?;
        let mut dx = ArrayD::<T>::zeros(x.raw_dim());
        let mut dw = ArrayD::<T>::zeros(w.raw_dim());
        let mut db = ArrayD::<T>::zeros(IxDyn(&[self.out_ch]));
        for bi in 0..n {
            for co in 0..self.out_ch {
                for t in 0..dy.shape()[2] {
                    db[co] += dy[[bi, co, t]];
                }
            }
            for ci in 0..self.in_ch {
                for ti in 0..t_in {
                    let xv = x[[bi, ci, ti]];
                    let mut acc = T::zero();
                    for co in 0..self.out_ch {
                        for k in 0..self.kernel {
                            let g = dy[[bi, co, ti * self.stride + k]];
                            acc += g * w[[ci, co, k]];
                            dw[[ci, co, k]] += g * xv;
                        }
                    }
                    dx[[bi, ci, ti]] = acc;
                }
            }
        }
        add_grad(grads, &self.weight_key(), dw);
        add_grad(grads, &self.bias_key(), db);
        Ok(dx)
    }
}

/// Fully connected layer applied at every temporal position of
/// `N × C_in × T`. Weight `C_out × C_in` plus bias.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Linear {
    pub name: String,
    pub in_features: usize,
    pub out_features: usize,
}

impl Linear {
    pub fn weight_key(&self) -> String {
        format!("{}.weight", self.name)
    }

    pub fn bias_key(&self) -> String {
        format!("{}.bias", self.name)
    }

    pub fn forward<T: Scalar>(&self, params: &ParamStore<T>, x: &ArrayD<T>) -> Result<ArrayD<T>> {
        let (n, t) = input_3d(&self.name, x, self.in_features)?;
        let w = params.param(&self.weight_key())?;
        let b = params.param(&self.bias_key())?;
        let expect = [self.out_features, self.in_features];
        if w.shape() != expect {
            return Err(Error::shape(self.weight_key(), &expect, w.shape()));
        }
        let mut y = ArrayD::<T>::zeros(IxDyn(&[n, self.out_features, t]));
        for bi in 0..n {
            for o in 0..self.out_features {
                for ti in 0..t {
                    let mut acc = b[o];
                    for i in 0..self.in_features {
                        acc += w[[o, i]] * x[[bi, i, ti]];
                    }
                    y[[bi, o, ti]] = acc;
                }
            }
        }
        Ok(y)
    }

    pub fn backward<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        x: &ArrayD<T>,
        dy: &ArrayD<T>,
        grads: &mut Grads<T>,
    ) -> Result<ArrayD<T>> {
        let (n, t) = input_3d(&self.name, x, self.in_features)?;
        let w = params.param(&self.weight_key())?;
        let mut dx = ArrayD::<T>::zeros(x.raw_dim());
        let mut dw = ArrayD::<T>::zeros(w.raw_dim());
        let mut db = ArrayD::<T>::zeros(IxDyn(&[self.out_features]));
        for bi in 0..n {
            for ti in 0..t {
                for o in 0..self.out_features {
                    let g = dy[[bi, o, ti]];
                    db[o] += g;
                    for i in 0..self.in_features {
                        dw[[o, i]] += g * x[[bi, i, ti]];
                        dx[[bi, i, ti]] += g * w[[o, i]];
                    }
                }
            }
        }
        add_grad(grads, &self.weight_key(), dw);
        add_grad(grads, &self.bias_key(), db);
        Ok(dx)
    }
}
