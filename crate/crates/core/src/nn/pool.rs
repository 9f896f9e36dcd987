use ndarray::{ArrayD, IxDyn};

use super::Scalar;
use crate::{Error, Result};

/// Max pooling over `N × C × T × H × W` with implicit `-inf` padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaxPool3d {
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub padding: [usize; 3],
}

impl MaxPool3d {
    pub fn output_dims(&self, input: [usize; 3]) -> Option<[usize; 3]> {
        let mut out = [0; 3];
        for d in 0..3 {
            let padded = input[d] + 2 * self.padding[d];
            if padded < self.kernel[d] {
                return None;
            }
            out[d] = (padded - self.kernel[d]) / self.stride[d] + 1;
        }
        Some(out)
    }

    /// Returns the pooled output and, for every output element, the flat
    /// index of the input element that won.
    pub fn forward<T: Scalar>(&self, x: &ArrayD<T>) -> Result<(ArrayD<T>, Vec<usize>)> {
        let shape = x.shape();
        if shape.len() != 5 {
            return Err(Error::shape("maxpool input", &[0; 5], shape));
        }
        let (n, c) = (shape[0], shape[1]);
        let input = [shape[2], shape[3], shape[4]];
        let out = self
            .output_dims(input)
            .ok_or_else(|| Error::shape("maxpool input", &self.kernel, &input))?;
        let x = x.as_standard_layout();
        let xs = x.as_slice().unwrap();
        let mut y = ArrayD::<T>::zeros(IxDyn(&[n, c, out[0], out[1], out[2]]));
        let mut arg = Vec::with_capacity(y.len());
        let ys = y.as_slice_mut().unwrap();
        let mut k = 0;
        let plane_in: usize = input.iter().product();
        for nc in 0..n * c {
            let base = nc * plane_in;
            for to in 0..out[0] {
                for ho in 0..out[1] {
                    for wo in 0..out[2] {
                        let mut best = T::neg_infinity();
                        let mut best_i = usize::MAX;
                        for dt in 0..self.kernel[0] {
                            let Some(ti) = (to * self.stride[0] + dt).checked_sub(self.padding[0]) else {
                                continue;
                            };
                            if ti >= input[0] {
                                continue;
                            }
                            for dh in 0..self.kernel[1] {
                                let Some(hi) = (ho * self.stride[1] + dh).checked_sub(self.padding[1]) else {
                                    continue;
                                };
                                if hi >= input[1] {
                                    continue;
                                }
                                for dw in 0..self.kernel[2] {
                                    let Some(wi) = (wo * self.stride[2] + dw).checked_sub(self.padding[2]) else {
                                        continue;
                                    };
                                    if wi >= input[2] {
                                        continue;
                                    }
                                    let i = base + (ti * input[1] + hi) * input[2] + wi;
                                    if xs[i] > best || best_i == usize::MAX {
                                        best = xs[i];
                                        best_i = i;
                                    }
                                }
                            }
                        }
                        ys[k] = best;
                        arg.push(best_i);
                        k += 1;
                    }
                }
            }
        }
        Ok((y, arg))
    }

    pub fn backward<T: Scalar>(&self, arg: &[usize], in_shape: &[usize], dy: &ArrayD<T>) -> ArrayD<T> {
        let mut dx = ArrayD::<T>::zeros(IxDyn(in_shape));
        let dxs = dx.as_slice_mut().unwrap();
        for (&i, &g) in arg.iter().zip(dy.iter()) {
            dxs[i] += g;
        }
        dx
    }
}
