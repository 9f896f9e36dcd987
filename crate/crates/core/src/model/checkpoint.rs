//! Binary parameter files.
//!
//! Layout (little endian): magic `GSTRCKPT`, `u32` version, `u32` metadata
//! length and JSON metadata, `u32` entry count, then per entry a `u8` kind
//! (0 parameter, 1 buffer), `u32` name length, name bytes, `u32` rank, `u64`
//! dimensions and `f32` values in row-major order. Entries are written in
//! name order so identical parameters produce identical files.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::arch::{ArchConfig, ModelMeta, ModelParameters, ParamSource};
use super::spec::build_network;
use crate::nn::{init_param, ParamStore};
use crate::util::write_atomic;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"GSTRCKPT";
const VERSION: u32 = 1;
const MAX_RANK: usize = 8;

pub fn write_checkpoint<W: Write>(mut w: W, params: &ModelParameters) -> std::io::Result<()> {
    let meta = serde_json::to_vec(&params.meta)?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(meta.len() as u32).to_le_bytes())?;
    w.write_all(&meta)?;
    let store = &params.store;
    let count = store.params.len() + store.buffers.len();
    w.write_all(&(count as u32).to_le_bytes())?;
    for (kind, map) in [(0u8, &store.params), (1u8, &store.buffers)] {
        for (name, value) in map {
            w.write_all(&[kind])?;
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(value.ndim() as u32).to_le_bytes())?;
            for &d in value.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            let mut buf = Vec::with_capacity(value.len() * 4);
            for v in value.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
    }
    w.flush()
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize) -> std::result::Result<Vec<u8>, String> {
        let mut buf = vec![0; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| format!("truncated file: {e}"))?;
        Ok(buf)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().expect("8 bytes")))
    }
}

/// Metadata as raw JSON plus every stored tensor.
fn read_raw<R: Read>(r: R) -> std::result::Result<(serde_json::Value, ParamStore<f32>), String> {
    let mut r = Reader { inner: r };
    if r.bytes(8)? != MAGIC {
        return Err("not a checkpoint file".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let meta_len = r.u32()? as usize;
    let meta = serde_json::from_slice(&r.bytes(meta_len)?).map_err(|e| format!("bad metadata: {e}"))?;
    let count = r.u32()?;
    let mut store = ParamStore::default();
    for _ in 0..count {
        let kind = r.bytes(1)?[0];
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.bytes(name_len)?).map_err(|_| "non-UTF-8 tensor name".to_string())?;
        let rank = r.u32()? as usize;
        if rank > MAX_RANK {
            return Err(format!("tensor {name} has rank {rank}"));
        }
        let dims = (0..rank)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let len: usize = dims.iter().product();
        let raw = r.bytes(len * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let value = ArrayD::from_shape_vec(IxDyn(&dims), data).map_err(|e| e.to_string())?;
        let map = match kind {
            0 => &mut store.params,
            1 => &mut store.buffers,
            k => return Err(format!("unknown entry kind {k}")),
        };
        map.insert(name, value);
    }
    Ok((meta, store))
}

pub fn read_checkpoint<R: Read>(r: R) -> std::result::Result<ModelParameters, String> {
    let (meta, store) = read_raw(r)?;
    let meta: ModelMeta = serde_json::from_value(meta).map_err(|e| format!("bad metadata: {e}"))?;
    Ok(ModelParameters { meta, store })
}

pub fn save_checkpoint(path: &Path, params: &ModelParameters) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, params).map_err(|e| Error::io(path, e))?;
    write_atomic(path, &buf)
}

/// Loads one of our own checkpoints and checks it against its architecture.
pub fn load_checkpoint(path: &Path) -> Result<ModelParameters> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let params =
        read_checkpoint(std::io::BufReader::new(file)).map_err(|msg| Error::format(path.display().to_string(), msg))?;
    build_network(&params.meta.arch.layer_specs()?, 3)?.validate(&params.store)?;
    Ok(params)
}

fn is_head(name: &str) -> bool {
    name.starts_with("head.") || name.starts_with("fc.")
}

/// Maps externally trained parameters onto `arch`.
///
/// A `module.` prefix is stripped from every name. The class head is
/// re-initialised when absent or of a different shape (for example a
/// 400-class action-recognition head). Projection-shortcut weights may be
/// absent and are then freshly initialised. Any other missing or mis-shaped
/// backbone tensor is an error.
pub fn load_external_pretrained(path: &Path, arch: &ArchConfig, seed: u64) -> Result<ModelParameters> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let (_, raw) =
        read_raw(std::io::BufReader::new(file)).map_err(|msg| Error::format(path.display().to_string(), msg))?;
    let strip = |m: BTreeMap<String, ArrayD<f32>>| -> BTreeMap<String, ArrayD<f32>> {
        m.into_iter()
            .map(|(k, v)| (k.strip_prefix("module.").map(str::to_string).unwrap_or(k), v))
            .collect()
    };
    let source = ParamStore {
        params: strip(raw.params),
        buffers: strip(raw.buffers),
    };
    let network = build_network(&arch.layer_specs()?, 3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::default();
    for spec in network.param_specs() {
        let found = source.any(&spec.name);
        let value = match found {
            Some(v) if v.shape() == spec.shape.as_slice() => v.clone(),
            Some(v) if !is_head(&spec.name) => {
                return Err(Error::shape(&spec.name, &spec.shape, v.shape()));
            }
            None if !is_head(&spec.name) && !spec.name.contains(".downsample.") => {
                return Err(Error::MissingKey(spec.name.clone()));
            }
            _ => {
                log::warn!("{}: initialising {} freshly", path.display(), spec.name);
                init_param(&spec, &mut rng)
            }
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
            source: ParamSource::ExternalPretrained,
            epoch: 0,
        },
        store,
    })
}
