use ndarray::{s, Array2, Array3, Array4, Array5, ArrayD, Axis, Ix3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spec::{build_network, propagate_shapes, LayerKind, LayerSpec};
use crate::nn::{softmax_classes, Mode, ParamStore, Sequential};
use crate::{Error, Result, CLIP_LEN};

/// Temporal stride of the transposed-convolution head.
const HEAD_STRIDE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchKind {
    /// 3D ResNet-18 with spatial-only max pooling and a transposed 1D
    /// convolution head that predicts one distribution per snippet frame.
    Dense3d,
    /// 2D ResNet-18 over single frames with a fully connected head.
    Frame2d,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub kind: ArchKind,
    pub num_classes: usize,
    /// Channels of the stem and first stage (64 in the reference network).
    pub base_width: usize,
    /// Square spatial input size.
    pub input_size: usize,
    pub clip_len: usize,
}

impl ArchConfig {
    pub fn dense3d(num_classes: usize) -> Self {
        Self {
            kind: ArchKind::Dense3d,
            num_classes,
            base_width: 64,
            input_size: 224,
            clip_len: CLIP_LEN,
        }
    }

    pub fn frame2d(num_classes: usize) -> Self {
        Self {
            kind: ArchKind::Frame2d,
            clip_len: 1,
            ..Self::dense3d(num_classes)
        }
    }

    pub fn with_width(mut self, base_width: usize) -> Self {
        self.base_width = base_width;
        self
    }

    pub fn with_input_size(mut self, input_size: usize) -> Self {
        self.input_size = input_size;
        self
    }

    pub fn arch_id(&self) -> &'static str {
        match self.kind {
            ArchKind::Dense3d => "dense3d-resnet18",
            ArchKind::Frame2d => "frame2d-resnet18",
        }
    }

    /// Frames per network input.
    pub fn input_frames(&self) -> usize {
        match self.kind {
            ArchKind::Dense3d => self.clip_len,
            ArchKind::Frame2d => 1,
        }
    }

    /// `[C, T, H, W]` of one network input.
    pub fn input_shape(&self) -> [usize; 4] {
        [3, self.input_frames(), self.input_size, self.input_size]
    }

    /// The layer table for this configuration.
    pub fn layer_specs(&self) -> Result<Vec<LayerSpec>> {
        if self.num_classes < 2 {
            return Err(Error::InvalidConfig("at least two classes are required".into()));
        }
        let w = self.base_width;
        let dense = self.kind == ArchKind::Dense3d;
        let (k7, k3) = if dense {
            ([7, 7, 7], [3, 3, 3])
        } else {
            ([1, 7, 7], [1, 3, 3])
        };
        let (p3, p1) = if dense {
            ([3, 3, 3], [1, 1, 1])
        } else {
            ([0, 3, 3], [0, 1, 1])
        };
        let down = if dense { [2, 2, 2] } else { [1, 2, 2] };
        let layer = |kind, kernel, stride, padding, out_channels, repeat| LayerSpec {
            kind,
            kernel,
            stride,
            padding,
            out_channels,
            repeat,
        };
        let mut stack = vec![
            layer(LayerKind::Conv, k7, [1, 2, 2], p3, w, 1),
            layer(LayerKind::MaxPool, [1, 3, 3], [1, 2, 2], [0, 1, 1], w, 1),
            layer(LayerKind::ResidualStage, k3, [1, 1, 1], p1, w, 2),
            layer(LayerKind::ResidualStage, k3, down, p1, 2 * w, 2),
            layer(LayerKind::ResidualStage, k3, down, p1, 4 * w, 2),
            layer(LayerKind::ResidualStage, k3, down, p1, 8 * w, 2),
        ];
        let body = propagate_shapes(&stack, self.input_shape())?;
        let last = &body.last().expect("non-empty").shape;
        let (t, h, wd) = (last[1], last[2], last[3]);
        stack.push(layer(LayerKind::AvgPool, [1, h, wd], [1, 1, 1], [0, 0, 0], 8 * w, 1));
        if dense {
            let kernel = self
                .clip_len
                .checked_sub((t - 1) * HEAD_STRIDE)
                .filter(|&k| k > 0)
                .ok_or_else(|| Error::InvalidConfig(format!("clip length {} too short for the head", self.clip_len)))?;
            stack.push(layer(
                LayerKind::TransposedConv1d,
                [kernel, 1, 1],
                [HEAD_STRIDE, 1, 1],
                [0, 0, 0],
                self.num_classes,
                1,
            ));
        } else {
            stack.push(layer(
                LayerKind::Linear,
                [1, 1, 1],
                [1, 1, 1],
                [0, 0, 0],
                self.num_classes,
                1,
            ));
        }
        Ok(stack)
    }

    /// Temporal length of the prediction: `clip_len` or 1.
    pub fn output_len(&self) -> usize {
        self.input_frames()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamSource {
    Random,
    Inflated,
    ExternalPretrained,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub arch_id: String,
    pub arch: ArchConfig,
    pub source: ParamSource,
    /// Training epochs completed.
    pub epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub meta: ModelMeta,
    pub store: ParamStore<f32>,
}

/// Class distributions for every frame of one snippet.
///
/// `scores` is `G × L`; column 0 is the oldest frame (`t - L + 1`) and
/// column `L - 1` the anchor frame `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensePrediction {
    pub scores: Array2<f64>,
    pub anchor_t: usize,
}

impl DensePrediction {
    pub fn num_classes(&self) -> usize {
        self.scores.nrows()
    }

    pub fn len(&self) -> usize {
        self.scores.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.ncols() == 0
    }

    /// Distribution estimated for the anchor frame.
    pub fn newest(&self) -> ndarray::ArrayView1<'_, f64> {
        self.scores.column(self.len() - 1)
    }
}

/// A network together with its parameters.
#[derive(Debug, Clone)]
pub struct GestureModel {
    pub network: Sequential,
    pub params: ModelParameters,
}

impl GestureModel {
    /// Randomly initialised model.
    pub fn new(arch: ArchConfig, seed: u64) -> Result<Self> {
        let network = build_network(&arch.layer_specs()?, 3)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let store = network.init_params(&mut rng);
        Ok(Self {
            network,
            params: ModelParameters {
                meta: ModelMeta {
                    arch_id: arch.arch_id().to_string(),
                    arch,
                    source: ParamSource::Random,
                    epoch: 0,
                },
                store,
            },
        })
    }

    pub fn from_parameters(params: ModelParameters) -> Result<Self> {
        let network = build_network(&params.meta.arch.layer_specs()?, 3)?;
        network.validate(&params.store)?;
        Ok(Self { network, params })
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.params.meta.arch
    }

    /// Raw class scores `N × G × L` for an `N × 3 × T × S × S` batch.
    pub fn logits(&self, x: Array5<f32>, mode: Mode) -> Result<Array3<f32>> {
        let arch = self.arch();
        let [c, t, h, w] = arch.input_shape();
        let expect = [x.shape()[0], c, t, h, w];
        if x.shape() != expect {
            return Err(Error::shape("model input", &expect, x.shape()));
        }
        let y = self.network.infer(&self.params.store, x.into_dyn(), mode)?;
        y.into_dimensionality::<Ix3>()
            .map_err(|_| Error::InvalidConfig("network output is not N × G × L".into()))
    }

    /// Stacks snippet tensors (`3 × L × S × S`) into a batch, keeping only the
    /// newest frame for the frame-wise model.
    pub fn batch_input(&self, snippets: &[&Array4<f32>]) -> Result<Array5<f32>> {
        let arch = self.arch();
        let views = snippets
            .iter()
            .map(|f| {
                let len = f.shape()[1];
                let keep = arch.input_frames();
                if len < keep {
                    return Err(Error::shape("snippet", &arch.input_shape(), f.shape()));
                }
                Ok(f.slice(s![.., len - keep.., .., ..]).insert_axis(Axis(0)))
            })
            .collect::<Result<Vec<_>>>()?;
        ndarray::concatenate(Axis(0), &views).map_err(|_| Error::InvalidConfig("empty or ragged batch".into()))
    }

    /// Evaluation-mode class distributions, one `G × L` matrix per input.
    pub fn predict(&self, snippets: &[&Array4<f32>]) -> Result<Vec<Array2<f64>>> {
        let logits = self.logits(self.batch_input(snippets)?, Mode::Eval)?;
        let probs = softmax_classes(&logits.mapv(f64::from));
        Ok(probs.outer_iter().map(|p| p.to_owned()).collect())
    }

    /// Dense prediction for one snippet.
    pub fn forward_dense(&self, frames: &Array4<f32>, anchor_t: usize) -> Result<DensePrediction> {
        let scores = self.predict(&[frames])?.pop().expect("one input");
        Ok(DensePrediction { scores, anchor_t })
    }

    pub fn network_output(&self, x: ArrayD<f32>, mode: Mode) -> Result<ArrayD<f32>> {
        self.network.infer(&self.params.store, x, mode)
    }
}

/// The dense 3D network with randomly initialised parameters.
pub fn build_3d_dense_net(num_classes: usize, seed: u64) -> Result<GestureModel> {
    GestureModel::new(ArchConfig::dense3d(num_classes), seed)
}

/// The frame-wise 2D baseline with randomly initialised parameters.
pub fn build_2d_baseline(num_classes: usize, seed: u64) -> Result<GestureModel> {
    GestureModel::new(ArchConfig::frame2d(num_classes), seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_shapes_at_full_size() {
        let arch = ArchConfig::dense3d(10);
        let rows = propagate_shapes(&arch.layer_specs().unwrap(), arch.input_shape()).unwrap();
        let shapes: Vec<Vec<usize>> = rows.into_iter().map(|r| r.shape).collect();
        assert_eq!(
            shapes,
            vec![
                vec![64, 16, 112, 112],
                vec![64, 16, 56, 56],
                vec![64, 16, 56, 56],
                vec![128, 8, 28, 28],
                vec![256, 4, 14, 14],
                vec![512, 2, 7, 7],
                vec![512, 2],
                vec![10, 16],
            ]
        );
    }

    #[test]
    fn baseline_head_is_512_to_g() {
        let model = build_2d_baseline(10, 0).unwrap();
        assert_eq!(model.params.store.params["fc.weight"].shape(), &[10, 512]);
    }

    #[test]
    fn single_class_rejected() {
        assert!(ArchConfig::dense3d(1).layer_specs().is_err());
    }

    #[test]
    fn reduced_model_outputs_distributions() {
        let arch = ArchConfig::dense3d(4).with_width(4).with_input_size(32);
        let model = GestureModel::new(arch, 3).unwrap();
        let x = Array4::from_shape_fn((3, 16, 32, 32), |(c, t, h, w)| {
            ((c + t * 3 + h * 5 + w * 7) % 11) as f32 / 11.0
        });
        let p = model.forward_dense(&x, 40).unwrap();
        assert_eq!(p.scores.dim(), (4, 16));
        for col in p.scores.columns() {
            assert!((col.sum() - 1.0).abs() < 1e-5);
            assert!(col.iter().all(|&v| v >= 0.0));
        }
        assert_eq!(model.forward_dense(&x, 40).unwrap(), p);
        // wrong spatial size
        assert!(model.forward_dense(&Array4::zeros((3, 16, 16, 16)), 0).is_err());
    }

    #[test]
    fn baseline_on_zero_input_is_finite() {
        let arch = ArchConfig::frame2d(10).with_width(4).with_input_size(32);
        let model = GestureModel::new(arch, 1).unwrap();
        let p = model.forward_dense(&Array4::zeros((3, 1, 32, 32)), 0).unwrap();
        assert_eq!(p.scores.dim(), (10, 1));
        assert!(p.scores.iter().all(|v| v.is_finite()));
        assert!((p.scores.sum() - 1.0).abs() < 1e-6);
    }
}
