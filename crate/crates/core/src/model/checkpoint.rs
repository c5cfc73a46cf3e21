//! Binary checkpoint format (all integers and floats little-endian):
//!
//! ```text
//! magic      8 bytes  "CAMLAB1\0"
//! version    u32
//! layers     u32
//! trailer    u32      byte length of the JSON metadata trailer
//! input      3 x u32  (C, H, W)
//! classes    u32
//! per layer:
//!   name     u32 length + UTF-8 bytes
//!   op       u8
//!   hyper    u8 count + count x u32   (stride/pad or pool size/stride)
//!   tensors  u8 count, each: u8 rank + rank x u32 dims + f32 data
//! trailer    JSON `TrainingMeta`
//! ```

use std::fs;
use std::path::Path;

use super::{Layer, LayerKind, ModelGraph, TrainingMeta};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CAMLAB1\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(model: &ModelGraph, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_checkpoint(model)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelGraph> {
    read_checkpoint(&fs::read(path)?)
}

pub fn write_checkpoint(model: &ModelGraph) -> Result<Vec<u8>> {
    let trailer = serde_json::to_vec(&model.meta)?;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION);
    put_u32(&mut out, model.layers().len() as u32);
    put_u32(&mut out, trailer.len() as u32);
    for d in model.input_shape() {
        put_u32(&mut out, d as u32);
    }
    put_u32(&mut out, model.class_count() as u32);
    for layer in model.layers() {
        put_u32(&mut out, layer.name.len() as u32);
        out.extend_from_slice(layer.name.as_bytes());
        let (code, hyper) = encode_kind(&layer.kind);
        out.push(code);
        out.push(hyper.len() as u8);
        for h in hyper {
            put_u32(&mut out, h as u32);
        }
        out.push(layer.params.len() as u8);
        for t in &layer.params {
            out.push(t.rank() as u8);
            for &d in t.shape() {
                put_u32(&mut out, d as u32);
            }
            for &v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out.extend_from_slice(&trailer);
    Ok(out)
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<ModelGraph> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(8, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.u32("header")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let n_layers = r.u32("header")? as usize;
    let trailer_len = r.u32("header")? as usize;
    let input_shape = [
        r.u32("header")? as usize,
        r.u32("header")? as usize,
        r.u32("header")? as usize,
    ];
    let classes = r.u32("header")? as usize;

    let mut layers = Vec::with_capacity(n_layers.min(1024));
    for i in 0..n_layers {
        let ctx = format!("layer #{i} name");
        let name_len = r.u32(&ctx)? as usize;
        let name = String::from_utf8(r.take(name_len, &ctx)?.to_vec())
            .map_err(|_| Error::Checkpoint(format!("layer #{i} name is not UTF-8")))?;
        let ctx = format!("layer `{name}`");
        let code = r.u8(&ctx)?;
        let n_hyper = r.u8(&ctx)? as usize;
        let hyper = (0..n_hyper)
            .map(|_| r.u32(&ctx).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let kind = decode_kind(code, &hyper)
            .ok_or_else(|| Error::Checkpoint(format!("layer `{name}` has unknown op code {code}")))?;
        let n_tensors = r.u8(&ctx)? as usize;
        let mut params = Vec::with_capacity(n_tensors);
        for _ in 0..n_tensors {
            let ctx = format!("layer `{name}` parameters");
            let rank = r.u8(&ctx)? as usize;
            let shape = (0..rank)
                .map(|_| r.u32(&ctx).map(|v| v as usize))
                .collect::<Result<Vec<_>>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Checkpoint(format!("layer `{name}` shape overflows")))?;
            let raw = r.take(n.checked_mul(4).ok_or_else(|| Error::Truncated { context: ctx.clone() })?, &ctx)?;
            let data = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            params.push(Tensor::from_vec(&shape, data)?);
        }
        layers.push(Layer { name, kind, params });
    }
    let trailer = r.take(trailer_len, "metadata trailer")?;
    let meta: TrainingMeta = serde_json::from_slice(trailer)?;
    let mut model = ModelGraph::new(input_shape, classes, layers)?;
    model.meta = meta;
    Ok(model)
}

fn encode_kind(kind: &LayerKind) -> (u8, Vec<usize>) {
    match *kind {
        LayerKind::Conv2d { stride, pad } => (1, vec![stride, pad]),
        LayerKind::Relu => (2, vec![]),
        LayerKind::MaxPool2d { size, stride } => (3, vec![size, stride]),
        LayerKind::Flatten => (4, vec![]),
        LayerKind::Dense => (5, vec![]),
        LayerKind::GlobalAvgPool => (6, vec![]),
    }
}

fn decode_kind(code: u8, hyper: &[usize]) -> Option<LayerKind> {
    Some(match (code, hyper) {
        (1, &[stride, pad]) => LayerKind::Conv2d { stride, pad },
        (2, []) => LayerKind::Relu,
        (3, &[size, stride]) => LayerKind::MaxPool2d { size, stride },
        (4, []) => LayerKind::Flatten,
        (5, []) => LayerKind::Dense,
        (6, []) => LayerKind::GlobalAvgPool,
        _ => return None,
    })
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, context: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated {
                context: context.to_string(),
            }),
        }
    }

    fn u8(&mut self, context: &str) -> Result<u8> {
        Ok(self.take(1, context)?[0])
    }

    fn u32(&mut self, context: &str) -> Result<u32> {
        let b = self.take(4, context)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Arch;

    fn sample_model() -> ModelGraph {
        let mut m = Arch::ToyPlain.build([3, 8, 8], 3, 11).unwrap();
        m.meta.val_accuracy = 0.5;
        m.meta.channel_mean = vec![0.1, 0.2, 0.3];
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = sample_model();
        let bytes = write_checkpoint(&m).unwrap();
        let back = read_checkpoint(&bytes).unwrap();
        assert_eq!(back, m);
        for (a, b) in m.layers().iter().zip(back.layers()) {
            for (p, q) in a.params.iter().zip(&b.params) {
                let pa: Vec<u32> = p.data().iter().map(|v| v.to_bits()).collect();
                let qa: Vec<u32> = q.data().iter().map(|v| v.to_bits()).collect();
                assert_eq!(pa, qa);
            }
        }
    }

    #[test]
    fn corrupt_magic() {
        let mut bytes = write_checkpoint(&sample_model()).unwrap();
        bytes[0] = b'X';
        assert!(matches!(read_checkpoint(&bytes), Err(Error::BadMagic)));
    }

    #[test]
    fn wrong_version() {
        let mut bytes = write_checkpoint(&sample_model()).unwrap();
        bytes[8] = 9;
        assert!(matches!(
            read_checkpoint(&bytes),
            Err(Error::VersionMismatch { found: 9, expected: 1 })
        ));
    }

    #[test]
    fn truncation_names_the_layer() {
        let bytes = write_checkpoint(&sample_model()).unwrap();
        // cut inside conv2's weights: header + conv1 + a little
        let cut = &bytes[..bytes.len() / 3];
        match read_checkpoint(cut) {
            Err(Error::Truncated { context }) => assert!(context.contains("layer `"), "{context}"),
            other => panic!("expected truncation, got {other:?}"),
        }
    }
}
