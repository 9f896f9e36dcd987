use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayD, ArrayView2, ArrayViewMut2, IxDyn};
use rayon::prelude::*;

use super::Scalar;
use crate::{Error, Result};

/// Column-buffer budget (elements) for one im2col chunk.
const COL_BUDGET: usize = 1 << 22;

/// Bias-free 3D convolution over `N × C × T × H × W` input, lowered to
/// matrix products one chunk of output frames at a time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conv3d {
    pub name: String,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub padding: [usize; 3],
}

#[derive(Clone, Copy)]
struct Geometry {
    c: usize,
    input: [usize; 3],
    output: [usize; 3],
}

impl Geometry {
    fn in_len(&self) -> usize {
        self.c * self.input.iter().product::<usize>()
    }

    fn plane(&self) -> usize {
        self.output[1] * self.output[2]
    }
}

impl Conv3d {
    pub fn new(
        name: impl Into<String>,
        in_ch: usize,
        out_ch: usize,
        kernel: [usize; 3],
        stride: [usize; 3],
        padding: [usize; 3],
    ) -> Self {
        Self {
            name: name.into(),
            in_ch,
            out_ch,
            kernel,
            stride,
            padding,
        }
    }

    pub fn weight_key(&self) -> String {
        format!("{}.weight", self.name)
    }

    pub fn weight_shape(&self) -> [usize; 5] {
        let [kt, kh, kw] = self.kernel;
        [self.out_ch, self.in_ch, kt, kh, kw]
    }

    fn patch_len(&self) -> usize {
        self.in_ch * self.kernel.iter().product::<usize>()
    }

    /// Output `(T, H, W)` for an input of `(T, H, W)`; `None` if the kernel
    /// does not fit.
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

    fn geometry(&self, x_shape: &[usize]) -> Result<Geometry> {
        if x_shape.len() != 5 || x_shape[1] != self.in_ch {
            return Err(Error::shape(
                format!("{} input", self.name),
                &[0, self.in_ch, 0, 0, 0],
                x_shape,
            ));
        }
        let input = [x_shape[2], x_shape[3], x_shape[4]];
        let output = self
            .output_dims(input)
            .ok_or_else(|| Error::shape(format!("{} input", self.name), &self.kernel, &input))?;
        Ok(Geometry {
            c: self.in_ch,
            input,
            output,
        })
    }

    fn check_weight<T: Scalar>(&self, w: &ArrayD<T>) -> Result<()> {
        if w.shape() != self.weight_shape() {
            return Err(Error::shape(self.weight_key(), &self.weight_shape(), w.shape()));
        }
        Ok(())
    }

    fn chunk_frames(&self, g: &Geometry) -> usize {
        (COL_BUDGET / (self.patch_len() * g.plane()).max(1)).clamp(1, g.output[0])
    }

    pub fn forward<T: Scalar>(&self, w: &ArrayD<T>, x: &ArrayD<T>) -> Result<ArrayD<T>> {
        self.check_weight(w)?;
        let g = self.geometry(x.shape())?;
        let n = x.shape()[0];
        let [to, ho, wo] = g.output;
        let out_len = self.out_ch * to * ho * wo;
        let mut y = ArrayD::<T>::zeros(IxDyn(&[n, self.out_ch, to, ho, wo]));
        let x = x.as_standard_layout();
        let w = w.as_standard_layout();
        let w2 = ArrayView2::from_shape((self.out_ch, self.patch_len()), w.as_slice().unwrap()).unwrap();
        let chunk = self.chunk_frames(&g);
        y.as_slice_mut()
            .unwrap()
            .par_chunks_mut(out_len)
            .zip(x.as_slice().unwrap().par_chunks(g.in_len()))
            .for_each(|(yn, xn)| {
                let mut yv = ArrayViewMut2::from_shape((self.out_ch, to * g.plane()), yn).unwrap();
                let mut cols = Vec::new();
                for t0 in (0..to).step_by(chunk) {
                    let t1 = (t0 + chunk).min(to);
                    let ncol = (t1 - t0) * g.plane();
                    cols.resize(self.patch_len() * ncol, T::zero());
                    self.im2col(xn, &g, t0, t1, &mut cols);
                    let cv = ArrayView2::from_shape((self.patch_len(), ncol), &cols[..]).unwrap();
                    let mut ys = yv.slice_mut(s![.., t0 * g.plane()..t1 * g.plane()]);
                    general_mat_mul(T::one(), &w2, &cv, T::zero(), &mut ys);
                }
            });
        Ok(y)
    }

    /// Accumulates the weight gradient into `dw` and returns the input gradient.
    pub fn backward<T: Scalar>(
        &self,
        w: &ArrayD<T>,
        x: &ArrayD<T>,
        dy: &ArrayD<T>,
        dw: &mut ArrayD<T>,
    ) -> Result<ArrayD<T>> {
        self.backward_impl(w, x, dy, dw, true)
    }

    /// Accumulates the weight gradient only; the returned input gradient is
    /// all zeros.
    pub fn backward_weights<T: Scalar>(
        &self,
        w: &ArrayD<T>,
        x: &ArrayD<T>,
        dy: &ArrayD<T>,
        dw: &mut ArrayD<T>,
    ) -> Result<ArrayD<T>> {
        self.backward_impl(w, x, dy, dw, false)
    }

    fn backward_impl<T: Scalar>(
        &self,
        w: &ArrayD<T>,
        x: &ArrayD<T>,
        dy: &ArrayD<T>,
        dw: &mut ArrayD<T>,
        need_dx: bool,
    ) -> Result<ArrayD<T>> {
        self.check_weight(w)?;
        let g = self.geometry(x.shape())?;
        let [to, ho, wo] = g.output;
        let out_len = self.out_ch * to * ho * wo;
        let x = x.as_standard_layout();
        let dy = dy.as_standard_layout();
        let w = w.as_standard_layout();
        let w2 = ArrayView2::from_shape((self.out_ch, self.patch_len()), w.as_slice().unwrap()).unwrap();
        let chunk = self.chunk_frames(&g);
        let mut dx = ArrayD::<T>::zeros(x.raw_dim());
        let dw_total = dx
            .as_slice_mut()
            .unwrap()
            .par_chunks_mut(g.in_len())
            .zip(x.as_slice().unwrap().par_chunks(g.in_len()))
            .zip(dy.as_slice().unwrap().par_chunks(out_len))
            .map(|((dxn, xn), dyn_)| {
                let dyv = ArrayView2::from_shape((self.out_ch, to * g.plane()), dyn_).unwrap();
                let mut dw_n = Array2::<T>::zeros((self.out_ch, self.patch_len()));
                let mut cols = Vec::new();
                for t0 in (0..to).step_by(chunk) {
                    let t1 = (t0 + chunk).min(to);
                    let ncol = (t1 - t0) * g.plane();
                    cols.resize(self.patch_len() * ncol, T::zero());
                    self.im2col(xn, &g, t0, t1, &mut cols);
                    let cv = ArrayView2::from_shape((self.patch_len(), ncol), &cols[..]).unwrap();
                    let dys = dyv.slice(s![.., t0 * g.plane()..t1 * g.plane()]);
                    general_mat_mul(T::one(), &dys, &cv.t(), T::one(), &mut dw_n);
                    if !need_dx {
                        continue;
                    }
                    let mut dcols = Array2::<T>::zeros((self.patch_len(), ncol));
                    general_mat_mul(T::one(), &w2.t(), &dys, T::zero(), &mut dcols);
                    self.col2im(dcols.as_slice().unwrap(), &g, t0, t1, dxn);
                }
                dw_n
            })
            .reduce(|| Array2::<T>::zeros((self.out_ch, self.patch_len())), |a, b| a + b);
        let dw_shape = dw.shape().to_vec();
        let mut dw2 = dw
            .view_mut()
            .into_shape_with_order((self.out_ch, self.patch_len()))
            .map_err(|_| Error::shape(self.weight_key(), &self.weight_shape(), &dw_shape))?;
        dw2 += &dw_total;
        Ok(dx)
    }

    fn im2col<T: Scalar>(&self, x: &[T], g: &Geometry, t0: usize, t1: usize, cols: &mut [T]) {
        self.traverse(g, t0, t1, |row_off, span| match span {
            Span::Zero { len } => cols[row_off..row_off + len].fill(T::zero()),
            Span::Contig { src, len } => cols[row_off..row_off + len].copy_from_slice(&x[src..src + len]),
            Span::Strided { src, len, step } => {
                for (k, v) in cols[row_off..row_off + len].iter_mut().enumerate() {
                    *v = x[src + k * step];
                }
            }
        });
    }

    fn col2im<T: Scalar>(&self, cols: &[T], g: &Geometry, t0: usize, t1: usize, dx: &mut [T]) {
        self.traverse(g, t0, t1, |row_off, span| match span {
            Span::Zero { .. } => {}
            Span::Contig { src, len } => {
                for (d, &c) in dx[src..src + len].iter_mut().zip(&cols[row_off..row_off + len]) {
                    *d += c;
                }
            }
            Span::Strided { src, len, step } => {
                for (k, &c) in cols[row_off..row_off + len].iter().enumerate() {
                    dx[src + k * step] += c;
                }
            }
        });
    }

    /// Walks the column buffer row by row, splitting each output row into
    /// padding and input-backed spans.
    fn traverse(&self, g: &Geometry, t0: usize, t1: usize, mut visit: impl FnMut(usize, Span)) {
        let [kt, kh, kw] = self.kernel;
        let [st, sh, sw] = self.stride;
        let [pt, ph, pw] = self.padding;
        let [ti_n, hi_n, wi_n] = g.input;
        let [_, ho_n, wo_n] = g.output;
        let ncol = (t1 - t0) * g.plane();
        let mut row = 0;
        for c in 0..g.c {
            for dt in 0..kt {
                for dh in 0..kh {
                    for dw in 0..kw {
                        let row_base = row * ncol;
                        // valid output columns: 0 <= wo*sw + dw - pw < wi_n
                        let wo_lo = pw.saturating_sub(dw).div_ceil(sw).min(wo_n);
                        let wo_hi = if wi_n + pw > dw {
                            ((wi_n + pw - dw - 1) / sw + 1).min(wo_n)
                        } else {
                            0
                        };
                        let mut k = row_base;
                        for to in t0..t1 {
                            let ti = (to * st + dt) as isize - pt as isize;
                            if ti < 0 || ti >= ti_n as isize {
                                visit(k, Span::Zero { len: g.plane() });
                                k += g.plane();
                                continue;
                            }
                            for ho in 0..ho_n {
                                let hi = (ho * sh + dh) as isize - ph as isize;
                                if hi < 0 || hi >= hi_n as isize || wo_lo >= wo_hi {
                                    visit(k, Span::Zero { len: wo_n });
                                    k += wo_n;
                                    continue;
                                }
                                let base = ((c * ti_n + ti as usize) * hi_n + hi as usize) * wi_n;
                                if wo_lo > 0 {
                                    visit(k, Span::Zero { len: wo_lo });
                                }
                                let src = base + wo_lo * sw + dw - pw;
                                let len = wo_hi - wo_lo;
                                let span = if sw == 1 {
                                    Span::Contig { src, len }
                                } else {
                                    Span::Strided { src, len, step: sw }
                                };
                                visit(k + wo_lo, span);
                                if wo_hi < wo_n {
                                    visit(k + wo_hi, Span::Zero { len: wo_n - wo_hi });
                                }
                                k += wo_n;
                            }
                        }
                        row += 1;
                    }
                }
            }
        }
    }
}

enum Span {
    Zero { len: usize },
    Contig { src: usize, len: usize },
    Strided { src: usize, len: usize, step: usize },
}

#[cfg(test)]
pub(crate) mod tests {
    use ndarray::{Array5, ArrayD, IxDyn};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    pub(crate) fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> ArrayD<f64> {
        ArrayD::from_shape_fn(IxDyn(shape), |_| rng.random_range(-1.0..1.0))
    }

    /// Direct six-loop convolution.
    pub(crate) fn conv_naive(conv: &Conv3d, w: &ArrayD<f64>, x: &ArrayD<f64>) -> ArrayD<f64> {
        let (n, c) = (x.shape()[0], x.shape()[1]);
        let input = [x.shape()[2], x.shape()[3], x.shape()[4]];
        let [to, ho, wo] = conv.output_dims(input).unwrap();
        let mut y = Array5::<f64>::zeros((n, conv.out_ch, to, ho, wo));
        for ((b, o, t, h, ww), v) in y.indexed_iter_mut() {
            let mut acc = 0.0;
            for ci in 0..c {
                for dt in 0..conv.kernel[0] {
                    for dh in 0..conv.kernel[1] {
                        for dw in 0..conv.kernel[2] {
                            let ti = (t * conv.stride[0] + dt) as isize - conv.padding[0] as isize;
                            let hi = (h * conv.stride[1] + dh) as isize - conv.padding[1] as isize;
                            let wi = (ww * conv.stride[2] + dw) as isize - conv.padding[2] as isize;
                            if ti < 0 || hi < 0 || wi < 0 {
                                continue;
                            }
                            let (ti, hi, wi) = (ti as usize, hi as usize, wi as usize);
                            if ti >= input[0] || hi >= input[1] || wi >= input[2] {
                                continue;
                            }
                            acc += w[[o, ci, dt, dh, dw]] * x[[b, ci, ti, hi, wi]];
                        }
                    }
                }
            }
            *v = acc;
        }
        y.into_dyn()
    }

    fn configs() -> Vec<Conv3d> {
        vec![
            Conv3d::new("a", 2, 3, [3, 3, 3], [1, 1, 1], [1, 1, 1]),
            Conv3d::new("b", 3, 2, [3, 3, 3], [2, 2, 2], [1, 1, 1]),
            Conv3d::new("c", 2, 4, [7, 7, 7], [1, 2, 2], [3, 3, 3]),
            Conv3d::new("d", 3, 3, [1, 1, 1], [2, 2, 2], [0, 0, 0]),
            Conv3d::new("e", 2, 2, [1, 3, 3], [1, 2, 2], [0, 1, 1]),
            Conv3d::new("f", 1, 2, [2, 3, 2], [1, 3, 1], [0, 2, 0]),
        ]
    }

    #[test]
    fn forward_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for conv in configs() {
            let x = random(&[2, conv.in_ch, 5, 9, 8], &mut rng);
            let w = random(&conv.weight_shape(), &mut rng);
            let y = conv.forward(&w, &x).unwrap();
            let expect = conv_naive(&conv, &w, &x);
            assert_eq!(y.shape(), expect.shape(), "{}", conv.name);
            let err = (&y - &expect).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err < 1e-12, "{}: {err}", conv.name);
        }
    }

    #[test]
    fn backward_is_adjoint_of_forward() {
        // <conv(x), dy> is linear in both x and w, so the gradients are exact
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for conv in configs() {
            let x = random(&[2, conv.in_ch, 5, 9, 8], &mut rng);
            let w = random(&conv.weight_shape(), &mut rng);
            let y = conv.forward(&w, &x).unwrap();
            let dy = random(y.shape(), &mut rng);
            let mut dw = ArrayD::zeros(w.raw_dim());
            let dx = conv.backward(&w, &x, &dy, &mut dw).unwrap();
            let dot = |a: &ArrayD<f64>, b: &ArrayD<f64>| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
            // d<y,dy>/dx . x == <y,dy> (linearity in x), same for w
            let yd = dot(&y, &dy);
            assert!((dot(&dx, &x) - yd).abs() < 1e-9 * yd.abs().max(1.0), "{}", conv.name);
            assert!((dot(&dw, &w) - yd).abs() < 1e-9 * yd.abs().max(1.0), "{}", conv.name);
            // and against the naive forward on a perturbed weight
            let mut w2 = w.clone();
            let idx = vec![0; 5];
            w2[IxDyn(&idx)] += 1e-6;
            let y2 = conv_naive(&conv, &w2, &x);
            let fd = (dot(&y2, &dy) - yd) / 1e-6;
            assert!((fd - dw[IxDyn(&idx)]).abs() < 1e-5, "{}", conv.name);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let conv = Conv3d::new("a", 2, 3, [3, 3, 3], [1, 1, 1], [0, 0, 0]);
        let w = ArrayD::<f64>::zeros(IxDyn(&conv.weight_shape()));
        assert!(conv.forward(&w, &ArrayD::zeros(IxDyn(&[1, 3, 4, 4, 4]))).is_err());
        assert!(conv.forward(&w, &ArrayD::zeros(IxDyn(&[1, 2, 2, 4, 4]))).is_err());
        let bad_w = ArrayD::<f64>::zeros(IxDyn(&[3, 2, 3, 3, 1]));
        assert!(conv.forward(&bad_w, &ArrayD::zeros(IxDyn(&[1, 2, 4, 4, 4]))).is_err());
    }
}
