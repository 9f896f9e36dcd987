use ndarray::{ArrayD, Axis, IxDyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::arch::{ArchConfig, ArchKind, ModelMeta, ModelParameters, ParamSource};
use super::spec::build_network;
use crate::nn::{init_param, ParamStore};
use crate::{Error, Result};

/// Repeats a 2D kernel `n` times along a new temporal axis and divides by `n`,
/// so a temporally constant input produces the same response as the 2D
/// kernel on one frame.
///
/// Accepts `[O, C, kh, kw]` or `[O, C, 1, kh, kw]`; returns `[O, C, n, kh, kw]`.
pub fn inflate_kernel(w: &ArrayD<f32>, n: usize) -> Result<ArrayD<f32>> {
    let base = match w.ndim() {
        4 => w.view().insert_axis(Axis(2)),
        5 if w.shape()[2] == 1 => w.view(),
        _ => return Err(Error::shape("2D kernel", &[0, 0, 1, 0, 0], w.shape())),
    };
    let sh = base.shape();
    let scale = 1.0 / n as f32;
    Ok(ArrayD::from_shape_fn(IxDyn(&[sh[0], sh[1], n, sh[3], sh[4]]), |i| {
        base[[i[0], i[1], 0, i[3], i[4]]] * scale
    }))
}

/// Builds parameters for the 3D network in `arch` from 2D parameters that use
/// the same names (`conv1.weight`, `layerK.i.conv1.weight`, ...). Convolution
/// kernels are inflated, batch-norm parameters and statistics are copied and
/// the class head is freshly initialised.
pub fn inflate_weights(source: &ParamStore<f32>, arch: &ArchConfig, seed: u64) -> Result<ModelParameters> {
    if arch.kind != ArchKind::Dense3d {
        return Err(Error::InvalidConfig("inflation targets the 3D architecture".into()));
    }
    let network = build_network(&arch.layer_specs()?, 3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let convs: std::collections::BTreeMap<String, usize> = network
        .convs()
        .into_iter()
        .map(|c| (c.weight_key(), c.kernel[0]))
        .collect();
    let mut store = ParamStore::default();
    for spec in network.param_specs() {
        let value = if spec.name.starts_with("head.") {
            init_param(&spec, &mut rng)
        } else {
            let src = source
                .any(&spec.name)
                .ok_or_else(|| Error::MissingKey(spec.name.clone()))?;
            let value = match convs.get(&spec.name) {
                Some(&n) => inflate_kernel(src, n)?,
                None => src.clone(),
            };
            if value.shape() != spec.shape.as_slice() {
                return Err(Error::shape(&spec.name, &spec.shape, value.shape()));
            }
            value
        };
        if spec.buffer {
            store.buffers.insert(spec.name, value);
        } else {
            store.params.insert(spec.name, value);
        }
    }
    Ok(ModelParameters {
        meta: ModelMeta {
            arch_id: arch.arch_id().to_string(),
            arch: arch.clone(),
            source: ParamSource::Inflated,
            epoch: 0,
        },
        store,
    })
}
