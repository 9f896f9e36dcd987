//! The dense-prediction 3D ResNet-18, its 2D frame-wise counterpart,
//! 2D→3D weight inflation and checkpoint I/O.

mod arch;
mod checkpoint;
mod inflate;
mod spec;

pub use arch::{
    build_2d_baseline, build_3d_dense_net, ArchConfig, ArchKind, DensePrediction, GestureModel, ModelMeta,
    ModelParameters, ParamSource,
};
pub use checkpoint::{load_checkpoint, load_external_pretrained, read_checkpoint, save_checkpoint, write_checkpoint};
pub use inflate::{inflate_kernel, inflate_weights};
pub use spec::{build_network, propagate_shapes, LayerKind, LayerSpec, ShapeRow};
