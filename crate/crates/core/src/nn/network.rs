use ndarray::{ArrayD, Axis, IxDyn};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::norm::NormCache;
use super::{BatchNorm, Conv3d, ConvTranspose1d, Grads, Linear, MaxPool3d, ParamStore, Scalar};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in normalisation layers.
    Train,
    /// Running statistics in normalisation layers.
    Eval,
}

/// Basic residual block: two 3D convolutions with batch norm, ReLU after the
/// first and after the shortcut sum. The shortcut is a strided 1×1×1
/// convolution plus batch norm when shape changes, identity otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicBlock {
    pub conv1: Conv3d,
    pub bn1: BatchNorm,
    pub conv2: Conv3d,
    pub bn2: BatchNorm,
    pub downsample: Option<(Conv3d, BatchNorm)>,
}

impl BasicBlock {
    /// `kernel` is the (t, h, w) kernel of both convolutions; padding keeps
    /// size except for `stride`.
    pub fn new(name: &str, in_ch: usize, out_ch: usize, kernel: [usize; 3], stride: [usize; 3]) -> Self {
        let pad = kernel.map(|k| k / 2);
        let downsample = (stride != [1, 1, 1] || in_ch != out_ch).then(|| {
            (
                Conv3d::new(
                    format!("{name}.downsample.0"),
                    in_ch,
                    out_ch,
                    [1, 1, 1],
                    stride,
                    [0, 0, 0],
                ),
                BatchNorm::new(format!("{name}.downsample.1"), out_ch),
            )
        });
        Self {
            conv1: Conv3d::new(format!("{name}.conv1"), in_ch, out_ch, kernel, stride, pad),
            bn1: BatchNorm::new(format!("{name}.bn1"), out_ch),
            conv2: Conv3d::new(format!("{name}.conv2"), out_ch, out_ch, kernel, [1, 1, 1], pad),
            bn2: BatchNorm::new(format!("{name}.bn2"), out_ch),
            downsample,
        }
    }

    fn convs(&self) -> Vec<&Conv3d> {
        let mut v = vec![&self.conv1, &self.conv2];
        if let Some((c, _)) = &self.downsample {
            v.push(c);
        }
        v
    }

    fn norms(&self) -> Vec<&BatchNorm> {
        let mut v = vec![&self.bn1, &self.bn2];
        if let Some((_, b)) = &self.downsample {
            v.push(b);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv(Conv3d),
    Norm(BatchNorm),
    Relu,
    MaxPool(MaxPool3d),
    Block(Box<BasicBlock>),
    /// Mean over H and W: `N × C × T × H × W → N × C × T`.
    SpatialMean,
    ConvTranspose(ConvTranspose1d),
    Linear(Linear),
}

#[derive(Debug)]
enum Cache<T> {
    Conv { x: ArrayD<T> },
    Norm(NormCache<T>),
    Relu { y: ArrayD<T> },
    MaxPool { arg: Vec<usize>, in_shape: Vec<usize> },
    Block(Box<BlockCache<T>>),
    SpatialMean { in_shape: Vec<usize> },
    ConvTranspose { x: ArrayD<T> },
    Linear { x: ArrayD<T> },
}

#[derive(Debug)]
struct BlockCache<T> {
    x: ArrayD<T>,
    bn1: NormCache<T>,
    a1: ArrayD<T>,
    bn2: NormCache<T>,
    down_bn: Option<NormCache<T>>,
    y: ArrayD<T>,
}

/// Per-layer records of one forward pass, consumed by the backward pass.
#[derive(Debug)]
pub struct Tape<T> {
    caches: Vec<Cache<T>>,
}

fn relu<T: Scalar>(x: ArrayD<T>) -> ArrayD<T> {
    x.mapv_into(|v| if v > T::zero() { v } else { T::zero() })
}

fn relu_backward<T: Scalar>(y: &ArrayD<T>, dy: &ArrayD<T>) -> ArrayD<T> {
    let mut dx = dy.to_owned();
    dx.zip_mut_with(y, |d, &v| {
        if v <= T::zero() {
            *d = T::zero();
        }
    });
    dx
}

fn add_norm_grads<T: Scalar>(grads: &mut Grads<T>, bn: &BatchNorm, dgamma: Vec<T>, dbeta: Vec<T>) {
    for (field, g) in [("weight", dgamma), ("bias", dbeta)] {
        if let Some(acc) = grads.get_mut(&bn.key(field)) {
            for (a, v) in acc.iter_mut().zip(g) {
                *a += v;
            }
        }
    }
}

fn conv_backward<T: Scalar>(
    conv: &Conv3d,
    params: &ParamStore<T>,
    x: &ArrayD<T>,
    dy: &ArrayD<T>,
    grads: &mut Grads<T>,
) -> Result<ArrayD<T>> {
    let w = params.param(&conv.weight_key())?;
    let mut dw = ArrayD::zeros(w.raw_dim());
    let dx = conv.backward(w, x, dy, &mut dw)?;
    if let Some(acc) = grads.get_mut(&conv.weight_key()) {
        *acc += &dw;
    }
    Ok(dx)
}

/// How a parameter is initialised when no pretrained value is available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Kaiming normal, fan-out mode.
    KaimingOut {
        fan_out: usize,
    },
    Ones,
    Zeros,
    /// Uniform on `[-bound, bound]`.
    Uniform {
        bound: f64,
    },
}

/// A named parameter or buffer with its shape and initialiser.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
    pub buffer: bool,
}

/// A chain of layers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let mut out = Vec::new();
        let conv_spec = |c: &Conv3d, out: &mut Vec<ParamSpec>| {
            let fan_out = c.out_ch * c.kernel.iter().product::<usize>();
            out.push(ParamSpec {
                name: c.weight_key(),
                shape: c.weight_shape().to_vec(),
                init: Init::KaimingOut { fan_out },
                buffer: false,
            });
        };
        let norm_spec = |b: &BatchNorm, out: &mut Vec<ParamSpec>| {
            for (field, init, buffer) in [
                ("weight", Init::Ones, false),
                ("bias", Init::Zeros, false),
                ("running_mean", Init::Zeros, true),
                ("running_var", Init::Ones, true),
            ] {
                out.push(ParamSpec {
                    name: b.key(field),
                    shape: vec![b.channels],
                    init,
                    buffer,
                });
            }
        };
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => conv_spec(c, &mut out),
                Layer::Norm(b) => norm_spec(b, &mut out),
                Layer::Block(block) => {
                    conv_spec(&block.conv1, &mut out);
                    norm_spec(&block.bn1, &mut out);
                    conv_spec(&block.conv2, &mut out);
                    norm_spec(&block.bn2, &mut out);
                    if let Some((c, b)) = &block.downsample {
                        conv_spec(c, &mut out);
                        norm_spec(b, &mut out);
                    }
                }
                Layer::ConvTranspose(h) => {
                    let bound = 1.0 / ((h.in_ch * h.kernel) as f64).sqrt();
                    out.push(ParamSpec {
                        name: h.weight_key(),
                        shape: h.weight_shape().to_vec(),
                        init: Init::Uniform { bound },
                        buffer: false,
                    });
                    out.push(ParamSpec {
                        name: h.bias_key(),
                        shape: vec![h.out_ch],
                        init: Init::Uniform { bound },
                        buffer: false,
                    });
                }
                Layer::Linear(l) => {
                    let bound = 1.0 / (l.in_features as f64).sqrt();
                    out.push(ParamSpec {
                        name: l.weight_key(),
                        shape: vec![l.out_features, l.in_features],
                        init: Init::Uniform { bound },
                        buffer: false,
                    });
                    out.push(ParamSpec {
                        name: l.bias_key(),
                        shape: vec![l.out_features],
                        init: Init::Uniform { bound },
                        buffer: false,
                    });
                }
                Layer::Relu | Layer::MaxPool(_) | Layer::SpatialMean => {}
            }
        }
        out
    }

    /// All convolutions, including those inside residual blocks.
    pub fn convs(&self) -> Vec<&Conv3d> {
        let mut v = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => v.push(c),
                Layer::Block(b) => v.extend(b.convs()),
                _ => {}
            }
        }
        v
    }

    pub fn norms(&self) -> Vec<&BatchNorm> {
        let mut v = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Norm(b) => v.push(b),
                Layer::Block(b) => v.extend(b.norms()),
                _ => {}
            }
        }
        v
    }

    pub fn init_params<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> ParamStore<T> {
        let mut store = ParamStore::default();
        for spec in self.param_specs() {
            let value = init_array(&spec, rng);
            if spec.buffer {
                store.buffers.insert(spec.name, value);
            } else {
                store.params.insert(spec.name, value);
            }
        }
        store
    }

    /// Checks that `params` has exactly the expected names and shapes.
    pub fn validate<T: Scalar>(&self, params: &ParamStore<T>) -> Result<()> {
        for spec in self.param_specs() {
            let found = if spec.buffer {
                params.buffers.get(&spec.name)
            } else {
                params.params.get(&spec.name)
            };
            let found = found.ok_or_else(|| Error::MissingKey(spec.name.clone()))?;
            if found.shape() != spec.shape.as_slice() {
                return Err(Error::shape(&spec.name, &spec.shape, found.shape()));
            }
        }
        Ok(())
    }

    pub fn forward<T: Scalar>(&self, params: &ParamStore<T>, x: ArrayD<T>, mode: Mode) -> Result<(ArrayD<T>, Tape<T>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let y = self.run(params, x, mode, Some(&mut caches))?;
        Ok((y, Tape { caches }))
    }

    /// Forward pass without keeping a tape.
    pub fn infer<T: Scalar>(&self, params: &ParamStore<T>, x: ArrayD<T>, mode: Mode) -> Result<ArrayD<T>> {
        self.run(params, x, mode, None)
    }

    fn run<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        mut x: ArrayD<T>,
        mode: Mode,
        mut tape: Option<&mut Vec<Cache<T>>>,
    ) -> Result<ArrayD<T>> {
        let train = mode == Mode::Train;
        for layer in &self.layers {
            let (y, cache) = match layer {
                Layer::Conv(c) => {
                    let y = c.forward(params.param(&c.weight_key())?, &x)?;
                    (y, Cache::Conv { x })
                }
                Layer::Norm(b) => {
                    let (y, cache) = b.forward(params, &x, train)?;
                    (y, Cache::Norm(cache))
                }
                Layer::Relu => {
                    let y = relu(x);
                    (y.clone(), Cache::Relu { y })
                }
                Layer::MaxPool(p) => {
                    let (y, arg) = p.forward(&x)?;
                    (
                        y,
                        Cache::MaxPool {
                            arg,
                            in_shape: x.shape().to_vec(),
                        },
                    )
                }
                Layer::Block(block) => {
                    let (y, cache) = block_forward(block, params, x, train)?;
                    (y, Cache::Block(Box::new(cache)))
                }
                Layer::SpatialMean => {
                    if x.ndim() != 5 {
                        return Err(Error::shape("spatial mean input", &[0; 5], x.shape()));
                    }
                    let in_shape = x.shape().to_vec();
                    let y = x
                        .mean_axis(Axis(4))
                        .expect("non-empty")
                        .mean_axis(Axis(3))
                        .expect("non-empty");
                    (y, Cache::SpatialMean { in_shape })
                }
                Layer::ConvTranspose(h) => {
                    let y = h.forward(params, &x)?;
                    (y, Cache::ConvTranspose { x })
                }
                Layer::Linear(l) => {
                    let y = l.forward(params, &x)?;
                    (y, Cache::Linear { x })
                }
            };
            if let Some(t) = tape.as_deref_mut() {
                t.push(cache);
            }
            x = y;
        }
        Ok(x)
    }

    /// Backpropagates `dy` through the tape; returns the input gradient and
    /// the parameter gradients.
    pub fn backward<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        tape: &Tape<T>,
        dy: ArrayD<T>,
    ) -> Result<(ArrayD<T>, Grads<T>)> {
        self.backward_inner(params, tape, dy, true)
    }

    /// Parameter gradients only; skips the input gradient of a leading
    /// convolution.
    pub fn param_grads<T: Scalar>(&self, params: &ParamStore<T>, tape: &Tape<T>, dy: ArrayD<T>) -> Result<Grads<T>> {
        Ok(self.backward_inner(params, tape, dy, false)?.1)
    }

    fn backward_inner<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        tape: &Tape<T>,
        dy: ArrayD<T>,
        input_grad: bool,
    ) -> Result<(ArrayD<T>, Grads<T>)> {
        let mut grads = params.zero_grads();
        let mut g = dy;
        for (i, (layer, cache)) in self.layers.iter().zip(&tape.caches).enumerate().rev() {
            g = match (layer, cache) {
                (Layer::Conv(c), Cache::Conv { x }) if i == 0 && !input_grad => {
                    let w = params.param(&c.weight_key())?;
                    let mut dw = ArrayD::zeros(w.raw_dim());
                    let dx = c.backward_weights(w, x, &g, &mut dw)?;
                    if let Some(acc) = grads.get_mut(&c.weight_key()) {
                        *acc += &dw;
                    }
                    dx
                }
                (Layer::Conv(c), Cache::Conv { x }) => conv_backward(c, params, x, &g, &mut grads)?,
                (Layer::Norm(b), Cache::Norm(nc)) => {
                    let (dx, dgamma, dbeta) = b.backward(params, nc, &g)?;
                    add_norm_grads(&mut grads, b, dgamma, dbeta);
                    dx
                }
                (Layer::Relu, Cache::Relu { y }) => relu_backward(y, &g),
                (Layer::MaxPool(p), Cache::MaxPool { arg, in_shape }) => p.backward(arg, in_shape, &g),
                (Layer::Block(block), Cache::Block(bc)) => block_backward(block, params, bc, g, &mut grads)?,
                (Layer::SpatialMean, Cache::SpatialMean { in_shape }) => {
                    let area = T::from_usize(in_shape[3] * in_shape[4]).unwrap();
                    let g = g.mapv(|v| v / area);
                    let expanded = g.insert_axis(Axis(3)).insert_axis(Axis(4));
                    expanded
                        .broadcast(IxDyn(in_shape))
                        .expect("broadcast over spatial axes")
                        .to_owned()
                }
                (Layer::ConvTranspose(h), Cache::ConvTranspose { x }) => h.backward(params, x, &g, &mut grads)?,
                (Layer::Linear(l), Cache::Linear { x }) => l.backward(params, x, &g, &mut grads)?,
                _ => unreachable!("tape does not match layers"),
            };
        }
        Ok((g, grads))
    }

    /// Folds the batch statistics recorded on `tape` into running buffers.
    pub fn update_running_stats<T: Scalar>(&self, params: &mut ParamStore<T>, tape: &Tape<T>) {
        for (layer, cache) in self.layers.iter().zip(&tape.caches) {
            match (layer, cache) {
                (Layer::Norm(b), Cache::Norm(nc)) => b.update_running(params, nc),
                (Layer::Block(block), Cache::Block(bc)) => {
                    block.bn1.update_running(params, &bc.bn1);
                    block.bn2.update_running(params, &bc.bn2);
                    if let (Some((_, b)), Some(nc)) = (&block.downsample, &bc.down_bn) {
                        b.update_running(params, nc);
                    }
                }
                _ => {}
            }
        }
    }
}

fn block_forward<T: Scalar>(
    block: &BasicBlock,
    params: &ParamStore<T>,
    x: ArrayD<T>,
    train: bool,
) -> Result<(ArrayD<T>, BlockCache<T>)> {
    let h1 = block.conv1.forward(params.param(&block.conv1.weight_key())?, &x)?;
    let (n1, bn1) = block.bn1.forward(params, &h1, train)?;
    drop(h1);
    let a1 = relu(n1);
    let h2 = block.conv2.forward(params.param(&block.conv2.weight_key())?, &a1)?;
    let (n2, bn2) = block.bn2.forward(params, &h2, train)?;
    let (shortcut, down_bn) = match &block.downsample {
        Some((conv, bn)) => {
            let s = conv.forward(params.param(&conv.weight_key())?, &x)?;
            let (s, cache) = bn.forward(params, &s, train)?;
            (s, Some(cache))
        }
        None => (x.clone(), None),
    };
    if shortcut.shape() != n2.shape() {
        return Err(Error::shape("residual shortcut", n2.shape(), shortcut.shape()));
    }
    let y = relu(n2 + &shortcut);
    let cache = BlockCache {
        x,
        bn1,
        a1,
        bn2,
        down_bn,
        y: y.clone(),
    };
    Ok((y, cache))
}

fn block_backward<T: Scalar>(
    block: &BasicBlock,
    params: &ParamStore<T>,
    c: &BlockCache<T>,
    dy: ArrayD<T>,
    grads: &mut Grads<T>,
) -> Result<ArrayD<T>> {
    let ds = relu_backward(&c.y, &dy);
    // main path
    let (dh2, dg, db) = block.bn2.backward(params, &c.bn2, &ds)?;
    add_norm_grads(grads, &block.bn2, dg, db);
    let da1 = conv_backward(&block.conv2, params, &c.a1, &dh2, grads)?;
    let dn1 = relu_backward(&c.a1, &da1);
    let (dh1, dg, db) = block.bn1.backward(params, &c.bn1, &dn1)?;
    add_norm_grads(grads, &block.bn1, dg, db);
    let mut dx = conv_backward(&block.conv1, params, &c.x, &dh1, grads)?;
    // shortcut
    match (&block.downsample, &c.down_bn) {
        (Some((conv, bn)), Some(nc)) => {
            let (dsc, dg, db) = bn.backward(params, nc, &ds)?;
            add_norm_grads(grads, bn, dg, db);
            dx += &conv_backward(conv, params, &c.x, &dsc, grads)?;
        }
        _ => dx += &ds,
    }
    Ok(dx)
}

fn init_array<T: Scalar, R: Rng + ?Sized>(spec: &ParamSpec, rng: &mut R) -> ArrayD<T> {
    let shape = IxDyn(&spec.shape);
    match spec.init {
        Init::Ones => ArrayD::ones(shape),
        Init::Zeros => ArrayD::zeros(shape),
        Init::KaimingOut { fan_out } => {
            let normal = Normal::new(0.0, (2.0 / fan_out as f64).sqrt()).expect("positive std");
            ArrayD::from_shape_simple_fn(shape, || T::from_f64_lossy(normal.sample(rng)))
        }
        Init::Uniform { bound } => {
            let uni = Uniform::new_inclusive(-bound, bound).expect("valid bound");
            ArrayD::from_shape_simple_fn(shape, || T::from_f64_lossy(uni.sample(rng)))
        }
    }
}

pub(crate) fn init_param<T: Scalar, R: Rng + ?Sized>(spec: &ParamSpec, rng: &mut R) -> ArrayD<T> {
    init_array(spec, rng)
}
