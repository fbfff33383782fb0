//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! "RRR1"  u32 version
//! u32 input_len  u32 pool  u32 n_conv  { u32 kernel  u32 in  u32 out } * n_conv
//! u32 dense_in  u32 n_classes
//! u64 n_params  f32 * n_params            (declaration order)
//! optional: "ADAM" u64 step  f64 lr  f64 beta1  f64 beta2  f64 eps
//!           f32 * n_params (first moment)  f32 * n_params (second moment)
//! ```

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{AdamState, Architecture, ConvSpec, Model};
use crate::Scalar;

const MAGIC: &[u8; 4] = b"RRR1";
const VERSION: u32 = 1;
const ADAM_TAG: &[u8; 4] = b"ADAM";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint of a supported version (magic {magic:?}, version {version})")]
    Version { magic: [u8; 4], version: u32 },
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("checkpoint architecture {found:?} does not match {expected:?}")]
    Shape { expected: Architecture, found: Architecture },
    #[error("checkpoint is internally inconsistent: {0}")]
    Corrupt(String),
    #[error("parameter {0} is not finite")]
    NonFinite(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub model: Model<T>,
    pub optimizer: Option<AdamState<T>>,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32s<T: Scalar>(out: &mut Vec<u8>, values: &[T]) {
    for v in values {
        out.extend_from_slice(&(v.wide() as f32).to_le_bytes());
    }
}

/// Serialises the model, and the optimizer state when given. Parameters are
/// stored as `f32`.
pub fn save_weights<T: Scalar>(model: &Model<T>, optimizer: Option<&AdamState<T>>) -> Result<Vec<u8>, CheckpointError> {
    let params = model.params();
    if let Some(i) = params.iter().flat_map(|p| p.iter()).position(|v| !v.is_finite()) {
        return Err(CheckpointError::NonFinite(i));
    }
    let a = &model.arch;
    let mut out = Vec::with_capacity(64 + 4 * a.n_params());
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, a.input_len as u32);
    put_u32(&mut out, a.pool as u32);
    put_u32(&mut out, model.convs.len() as u32);
    for c in &model.convs {
        put_u32(&mut out, c.kernel as u32);
        put_u32(&mut out, c.in_channels as u32);
        put_u32(&mut out, c.out_channels as u32);
    }
    put_u32(&mut out, model.dense.inputs as u32);
    put_u32(&mut out, a.n_classes as u32);
    let n: usize = params.iter().map(|p| p.len()).sum();
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for p in &params {
        put_f32s(&mut out, p);
    }
    if let Some(s) = optimizer {
        out.extend_from_slice(ADAM_TAG);
        out.extend_from_slice(&s.step.to_le_bytes());
        for v in [s.learning_rate, s.beta1, s.beta2, s.epsilon] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for m in &s.m {
            put_f32s(&mut out, m);
        }
        for v in &s.v {
            put_f32s(&mut out, v);
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(CheckpointError::Truncated(self.bytes.len()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn fill<T: Scalar>(&mut self, dst: &mut [T]) -> Result<(), CheckpointError> {
        let raw = self.take(4 * dst.len())?;
        for (d, b) in dst.iter_mut().zip(raw.chunks_exact(4)) {
            *d = T::of(f32::from_le_bytes(b.try_into().unwrap()) as f64);
        }
        Ok(())
    }
}

/// Parses a checkpoint. With `expected`, the stored architecture must match
/// it exactly.
pub fn load_weights<T: Scalar>(bytes: &[u8], expected: Option<&Architecture>) -> Result<Checkpoint<T>, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4).map_err(|_| CheckpointError::Version { magic: [0; 4], version: 0 })?.try_into().unwrap();
    let version = r.u32().unwrap_or(0);
    if &magic != MAGIC || version != VERSION {
        return Err(CheckpointError::Version { magic, version });
    }

    let input_len = r.u32()? as usize;
    let pool = r.u32()? as usize;
    let n_conv = r.u32()? as usize;
    let mut convs = Vec::with_capacity(n_conv.min(64));
    let mut in_ch = 1;
    for _ in 0..n_conv {
        let (kernel, cin, cout) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        if cin != in_ch || kernel == 0 {
            return Err(CheckpointError::Corrupt(format!("convolution with {cin} inputs after {in_ch} maps")));
        }
        convs.push(ConvSpec { kernel, channels: cout });
        in_ch = cout;
    }
    let dense_in = r.u32()? as usize;
    let n_classes = r.u32()? as usize;
    if pool == 0 {
        return Err(CheckpointError::Corrupt("pool size 0".into()));
    }
    let arch = Architecture { input_len, convs, pool, n_classes };
    if arch.flatten_width() != dense_in {
        return Err(CheckpointError::Corrupt(format!(
            "dense layer takes {dense_in} inputs, architecture flattens to {}",
            arch.flatten_width()
        )));
    }
    if let Some(e) = expected {
        if *e != arch {
            return Err(CheckpointError::Shape { expected: e.clone(), found: arch });
        }
    }
    let n = r.u64()? as usize;
    if n != arch.n_params() {
        return Err(CheckpointError::Corrupt(format!("{n} parameters stored, {} expected", arch.n_params())));
    }

    let mut model = Model::<T>::zeros(&arch);
    for p in model.params_mut() {
        r.fill(p)?;
    }

    let optimizer = if r.pos == bytes.len() {
        None
    } else {
        if r.take(4)? != ADAM_TAG {
            return Err(CheckpointError::Corrupt(format!("unknown section at byte {}", r.pos - 4)));
        }
        let mut s = AdamState::new(&model.params(), 0.0);
        s.step = r.u64()?;
        s.learning_rate = r.f64()?;
        s.beta1 = r.f64()?;
        s.beta2 = r.f64()?;
        s.epsilon = r.f64()?;
        for m in &mut s.m {
            r.fill(m)?;
        }
        for v in &mut s.v {
            r.fill(v)?;
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::Corrupt("trailing bytes".into()));
        }
        Some(s)
    };
    Ok(Checkpoint { model, optimizer })
}

pub fn write_checkpoint<T: Scalar>(path: &Path, model: &Model<T>, optimizer: Option<&AdamState<T>>) -> Result<(), CheckpointError> {
    fs::write(path, save_weights(model, optimizer)?)?;
    Ok(())
}

pub fn read_checkpoint<T: Scalar>(path: &Path, expected: Option<&Architecture>) -> Result<Checkpoint<T>, CheckpointError> {
    load_weights(&fs::read(path)?, expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n_classes: usize) -> Architecture {
        Architecture {
            input_len: 250,
            convs: vec![ConvSpec { kernel: 3, channels: 4 }, ConvSpec { kernel: 5, channels: 3 }],
            pool: 5,
            n_classes,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = Model::<f32>::init(&small(5), 11);
        let mut adam = AdamState::new(&m.params(), 1e-4);
        adam.step = 17;
        adam.m[0][3] = 0.25;
        adam.v[5][1] = 1e-9;
        let bytes = save_weights(&m, Some(&adam)).unwrap();
        let c = load_weights::<f32>(&bytes, Some(&small(5))).unwrap();
        for (a, b) in c.model.params().iter().zip(m.params()) {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(c.optimizer.unwrap(), adam);

        let bare = load_weights::<f32>(&save_weights(&m, None).unwrap(), None).unwrap();
        assert_eq!(bare.model, m);
        assert!(bare.optimizer.is_none());
    }

    #[test]
    fn altered_magic() {
        let mut bytes = save_weights(&Model::<f32>::zeros(&small(5)), None).unwrap();
        bytes[0] = b'X';
        assert!(matches!(load_weights::<f32>(&bytes, None), Err(CheckpointError::Version { .. })));
        let mut bytes = save_weights(&Model::<f32>::zeros(&small(5)), None).unwrap();
        bytes[4] = 2;
        assert!(matches!(
            load_weights::<f32>(&bytes, None),
            Err(CheckpointError::Version { version: 2, .. })
        ));
    }

    #[test]
    fn class_count_mismatch() {
        let bytes = save_weights(&Model::<f32>::zeros(&small(5)), None).unwrap();
        assert!(matches!(
            load_weights::<f32>(&bytes, Some(&small(6))),
            Err(CheckpointError::Shape { .. })
        ));
    }

    #[test]
    fn truncated() {
        let bytes = save_weights(&Model::<f32>::init(&small(5), 1), None).unwrap();
        assert!(matches!(
            load_weights::<f32>(&bytes[..bytes.len() - 3], None),
            Err(CheckpointError::Truncated(_))
        ));
        assert!(matches!(load_weights::<f32>(&bytes[..2], None), Err(CheckpointError::Version { .. })));
    }

    #[test]
    fn refuses_non_finite() {
        let mut m = Model::<f32>::zeros(&small(2));
        m.dense.bias[1] = f32::INFINITY;
        assert!(matches!(save_weights(&m, None), Err(CheckpointError::NonFinite(_))));
    }
}
