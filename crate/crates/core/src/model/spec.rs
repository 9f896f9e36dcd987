use crate::nn::{BasicBlock, BatchNorm, Conv3d, ConvTranspose1d, Layer, Linear, MaxPool3d, Sequential};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// Convolution followed by batch norm and ReLU.
    Conv,
    MaxPool,
    /// `repeat` basic residual blocks; only the first one is strided.
    ResidualStage,
    /// Average over the spatial window (the whole remaining plane).
    AvgPool,
    /// Transposed temporal convolution to class scores.
    TransposedConv1d,
    /// Fully connected class scores.
    Linear,
}

/// One row of the architecture table. 2D layers use a temporal kernel and
/// stride of 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub padding: [usize; 3],
    pub out_channels: usize,
    pub repeat: usize,
}

/// Output shape of one layer row: `[C, T, H, W]` for volumes, `[C, T]` once
/// space has been pooled away.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeRow {
    pub kind: LayerKind,
    pub shape: Vec<usize>,
}

fn conv_len(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    (input + 2 * pad).checked_sub(kernel).map(|v| v / stride + 1)
}

fn volume(shape: &[usize]) -> Result<[usize; 4]> {
    match *shape {
        [c, t, h, w] => Ok([c, t, h, w]),
        _ => Err(Error::shape("volume layer input", &[0; 4], shape)),
    }
}

fn windowed(spec: &LayerSpec, input: [usize; 4], channels: usize) -> Result<Vec<usize>> {
    let mut out = vec![channels];
    for d in 0..3 {
        let len = conv_len(input[d + 1], spec.kernel[d], spec.stride[d], spec.padding[d])
            .filter(|&l| l > 0)
            .ok_or_else(|| Error::shape("layer window", &spec.kernel, &input[1..]))?;
        out.push(len);
    }
    Ok(out)
}

/// Propagates `[C, T, H, W]` through the stack.
pub fn propagate_shapes(stack: &[LayerSpec], input: [usize; 4]) -> Result<Vec<ShapeRow>> {
    let mut rows = Vec::with_capacity(stack.len());
    let mut shape = input.to_vec();
    for spec in stack {
        shape = match spec.kind {
            LayerKind::Conv | LayerKind::ResidualStage => windowed(spec, volume(&shape)?, spec.out_channels)?,
            LayerKind::MaxPool => {
                let v = volume(&shape)?;
                windowed(spec, v, v[0])?
            }
            LayerKind::AvgPool => {
                let [c, t, h, w] = volume(&shape)?;
                if spec.kernel != [1, h, w] {
                    return Err(Error::shape("average pool window", &[1, h, w], &spec.kernel));
                }
                vec![c, t]
            }
            LayerKind::TransposedConv1d => match *shape.as_slice() {
                [_, t] => vec![spec.out_channels, (t - 1) * spec.stride[0] + spec.kernel[0]],
                _ => return Err(Error::shape("transposed conv input", &[0, 0], &shape)),
            },
            LayerKind::Linear => match *shape.as_slice() {
                [_, t] => vec![spec.out_channels, t],
                _ => return Err(Error::shape("linear input", &[0, 0], &shape)),
            },
        };
        rows.push(ShapeRow {
            kind: spec.kind,
            shape: shape.clone(),
        });
    }
    Ok(rows)
}

/// Instantiates the stack with PyTorch-style parameter names
/// (`conv1`, `bn1`, `layerK.i.*`, `head` or `fc`).
pub fn build_network(stack: &[LayerSpec], in_channels: usize) -> Result<Sequential> {
    let mut layers = Vec::new();
    let mut channels = in_channels;
    let mut stage = 0;
    let mut seen_conv = false;
    for spec in stack {
        match spec.kind {
            LayerKind::Conv => {
                if seen_conv {
                    return Err(Error::InvalidConfig("only one stem convolution is supported".into()));
                }
                seen_conv = true;
                layers.push(Layer::Conv(Conv3d::new(
                    "conv1",
                    channels,
                    spec.out_channels,
                    spec.kernel,
                    spec.stride,
                    spec.padding,
                )));
                layers.push(Layer::Norm(BatchNorm::new("bn1", spec.out_channels)));
                layers.push(Layer::Relu);
                channels = spec.out_channels;
            }
            LayerKind::MaxPool => layers.push(Layer::MaxPool(MaxPool3d {
                kernel: spec.kernel,
                stride: spec.stride,
                padding: spec.padding,
            })),
            LayerKind::ResidualStage => {
                stage += 1;
                for i in 0..spec.repeat {
                    let stride = if i == 0 { spec.stride } else { [1, 1, 1] };
                    let name = format!("layer{stage}.{i}");
                    layers.push(Layer::Block(Box::new(BasicBlock::new(
                        &name,
                        channels,
                        spec.out_channels,
                        spec.kernel,
                        stride,
                    ))));
                    channels = spec.out_channels;
                }
            }
            LayerKind::AvgPool => layers.push(Layer::SpatialMean),
            LayerKind::TransposedConv1d => {
                layers.push(Layer::ConvTranspose(ConvTranspose1d {
                    name: "head".into(),
                    in_ch: channels,
                    out_ch: spec.out_channels,
                    kernel: spec.kernel[0],
                    stride: spec.stride[0],
                }));
                channels = spec.out_channels;
            }
            LayerKind::Linear => {
                layers.push(Layer::Linear(Linear {
                    name: "fc".into(),
                    in_features: channels,
                    out_features: spec.out_channels,
                }));
                channels = spec.out_channels;
            }
        }
    }
    Ok(Sequential::new(layers))
}
