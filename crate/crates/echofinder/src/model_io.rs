//! `.emdl` model files.
//!
//! Little-endian layout:
//!
//! | field      | type                                   |
//! |------------|----------------------------------------|
//! | magic      | `b"EMDL"`                              |
//! | version    | u16 = 1                                |
//! | kind       | u8: 1 = linear SVM, 2 = CNN            |
//! | n_tensors  | u32                                    |
//! | shapes     | per tensor: rank u8, then rank x u32   |
//! | data       | every tensor's f32 values, in order    |
//!
//! Linear models hold `weights [3]`, `bias [1]`, `feature_means [3]`,
//! `feature_scales [3]`. CNNs hold conv1 weight `[f1, c, 3, 3]` and bias
//! `[f1]`, conv2 weight `[f2, f1, 3, 3]` and bias `[f2]`, the hidden dense
//! layer `[hidden, flat]` and `[hidden]`, and the output layer `[2, hidden]`
//! and `[2]`. The network shape is recovered from the tensor shapes.

use std::fs;
use std::path::Path;

use echofinder_core::classify::cnn::N_CLASSES;
use echofinder_core::classify::features::N_FEATURES;
use echofinder_core::classify::{Cnn, CnnModel, CnnShape, LinearModel, Model};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

pub const MAGIC: [u8; 4] = *b"EMDL";
pub const VERSION: u16 = 1;
const KIND_LINEAR: u8 = 1;
const KIND_CNN: u8 = 2;
const MAX_RANK: usize = 4;

struct Tensor<'a> {
    dims: Vec<usize>,
    data: &'a [f32],
}

fn tensor<'a>(dims: &[usize], data: &'a [f32]) -> Tensor<'a> {
    Tensor { dims: dims.to_vec(), data }
}

fn tensors(model: &Model) -> (u8, Vec<Tensor<'_>>) {
    match model {
        Model::Linear(m) => (
            KIND_LINEAR,
            vec![
                tensor(&[N_FEATURES], &m.weights),
                tensor(&[1], std::slice::from_ref(&m.bias)),
                tensor(&[N_FEATURES], &m.feature_means),
                tensor(&[N_FEATURES], &m.feature_scales),
            ],
        ),
        Model::Cnn(m) => {
            let s = m.shape;
            let (f1, f2) = (s.conv1_filters, s.conv2_filters);
            let p = m.params();
            (
                KIND_CNN,
                vec![
                    tensor(&[f1, s.in_channels, 3, 3], p[0]),
                    tensor(&[f1], p[1]),
                    tensor(&[f2, f1, 3, 3], p[2]),
                    tensor(&[f2], p[3]),
                    tensor(&[s.hidden, s.flat_len()], p[4]),
                    tensor(&[s.hidden], p[5]),
                    tensor(&[N_CLASSES, s.hidden], p[6]),
                    tensor(&[N_CLASSES], p[7]),
                ],
            )
        }
    }
}

/// Serializes a model after checking that it is valid.
pub fn encode_model(model: &Model) -> Result<Vec<u8>> {
    match model {
        Model::Linear(m) => m.validate()?,
        Model::Cnn(m) => m.validate()?,
    }
    let (kind, ts) = tensors(model);
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind);
    out.extend_from_slice(&(ts.len() as u32).to_le_bytes());
    for t in &ts {
        out.push(t.dims.len() as u8);
        for &d in &t.dims {
            let d = u32::try_from(d).map_err(|_| Error::Internal("tensor dimension exceeds u32".into()))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
    }
    for t in &ts {
        for v in t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(Error::Truncated {
            expected: (self.pos + n) as u64,
            found: self.buf.len() as u64,
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or(Error::CorruptTensor("size overflow".into()))?)?;
        Ok(bytes.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect())
    }
}

fn expect_dims(dims: &[Vec<usize>], expected: &[Vec<usize>]) -> Result<()> {
    if dims != expected {
        return Err(Error::CorruptTensor(format!("tensor shapes {dims:?} do not chain, expected {expected:?}")));
    }
    Ok(())
}

/// Parses and validates a model file.
pub fn decode_model(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic { expected: MAGIC, found: magic });
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let kind = r.u8()?;
    let n = r.u32()? as usize;
    let expected_n = match kind {
        KIND_LINEAR => 4,
        KIND_CNN => 8,
        _ => return Err(Error::InvalidHeader("unknown model kind")),
    };
    if n != expected_n {
        return Err(Error::CorruptTensor(format!("expected {expected_n} tensors, found {n}")));
    }
    let mut dims = Vec::with_capacity(n);
    for _ in 0..n {
        let rank = r.u8()? as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::CorruptTensor(format!("unsupported rank {rank}")));
        }
        dims.push((0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?);
    }
    let model = if kind == KIND_LINEAR {
        let f = N_FEATURES;
        expect_dims(&dims, &[vec![f], vec![1], vec![f], vec![f]])?;
        let arr = |v: Vec<f32>| -> [f32; N_FEATURES] { v.try_into().unwrap() };
        let weights = arr(r.f32s(f)?);
        let bias = r.f32s(1)?[0];
        let feature_means = arr(r.f32s(f)?);
        let feature_scales = arr(r.f32s(f)?);
        let m = LinearModel {
            weights,
            bias,
            feature_means,
            feature_scales,
        };
        m.validate()?;
        Model::Linear(m)
    } else {
        let shape = cnn_shape(&dims)?;
        let mut m: CnnModel = Cnn::zeros(shape)?;
        let s = shape;
        let (f1, f2) = (s.conv1_filters, s.conv2_filters);
        expect_dims(
            &dims,
            &[
                vec![f1, s.in_channels, 3, 3],
                vec![f1],
                vec![f2, f1, 3, 3],
                vec![f2],
                vec![s.hidden, s.flat_len()],
                vec![s.hidden],
                vec![N_CLASSES, s.hidden],
                vec![N_CLASSES],
            ],
        )?;
        for p in m.params_mut() {
            let v = r.f32s(p.len())?;
            p.copy_from_slice(&v);
        }
        m.validate()?;
        Model::Cnn(m)
    };
    if r.pos != bytes.len() {
        return Err(Error::TrailingBytes((bytes.len() - r.pos) as u64));
    }
    Ok(model)
}

/// Recovers the network shape from the first-layer and hidden-layer tensors.
fn cnn_shape(dims: &[Vec<usize>]) -> Result<CnnShape> {
    let corrupt = |what: &str| Error::CorruptTensor(what.to_string());
    let (c1, c2, h) = (&dims[0], &dims[2], &dims[4]);
    if c1.len() != 4 || c2.len() != 4 || h.len() != 2 {
        return Err(corrupt("unexpected tensor ranks"));
    }
    let f2 = c2[0];
    if f2 == 0 || h[1] % f2 != 0 {
        return Err(corrupt("hidden layer width is not a multiple of conv2 filters"));
    }
    let cells = h[1] / f2;
    let side = (cells as f64).sqrt().round() as usize;
    if side * side != cells {
        return Err(corrupt("flattened feature map is not square"));
    }
    let shape = CnnShape {
        in_channels: c1[1],
        input_size: side * 4,
        conv1_filters: c1[0],
        conv2_filters: f2,
        hidden: h[0],
    };
    shape.validate()?;
    Ok(shape)
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    write_atomic(path, &encode_model(model)?)
}

pub fn load_model(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear() -> Model {
        Model::Linear(LinearModel {
            weights: [0.5, -1.0, 2.0],
            bias: 0.25,
            feature_means: [0.1, 0.2, 0.3],
            feature_scales: [1.0, 2.0, 3.0],
        })
    }

    fn small_cnn() -> Model {
        let shape = CnnShape {
            in_channels: 2,
            input_size: 8,
            conv1_filters: 2,
            conv2_filters: 3,
            hidden: 4,
        };
        Model::Cnn(Cnn::init(shape, 3).unwrap())
    }

    #[test]
    fn round_trips_are_byte_identical() {
        for m in [linear(), small_cnn()] {
            let a = encode_model(&m).unwrap();
            let back = decode_model(&a).unwrap();
            assert_eq!(back, m);
            assert_eq!(encode_model(&back).unwrap(), a);
        }
    }

    #[test]
    fn bad_magic() {
        let mut b = encode_model(&linear()).unwrap();
        b[3] = b'X';
        assert!(matches!(decode_model(&b), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn truncated() {
        let b = encode_model(&small_cnn()).unwrap();
        assert!(matches!(decode_model(&b[..b.len() - 1]), Err(Error::Truncated { .. })));
    }

    #[test]
    fn mismatched_shapes() {
        let mut b = encode_model(&small_cnn()).unwrap();
        // First dimension of the conv2 bias, after the header and two
        // rank-4/rank-1 entries.
        let off = 4 + 2 + 1 + 4 + (1 + 16) + (1 + 4) + (1 + 16) + 1;
        b[off] = 9;
        assert!(matches!(decode_model(&b), Err(Error::CorruptTensor(_))));
    }

    #[test]
    fn non_finite_weight() {
        let mut b = encode_model(&linear()).unwrap();
        let n = b.len();
        b[n - 4..].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(decode_model(&b).is_err());
    }
}
