//! Binary checkpoint format.
//!
//! ```text
//! "WIZNN1\n"
//! repeated: u32 name_len | name (UTF-8) | u32 rank | u32 dims[rank] | f32 values[prod(dims)]
//! u64 checksum
//! ```
//!
//! All integers and floats are little-endian. The checksum is 64-bit FNV-1a
//! over every byte between the magic and the checksum itself.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use super::{DenseNet, LstmCell, Scalar, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 7] = b"WIZNN1\n";
pub const FORMAT_VERSION: u32 = 1;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Ordered collection of named `f32` tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    tensors: Vec<(String, Tensor<f32>)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tensors(&self) -> &[(String, Tensor<f32>)] {
        &self.tensors
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<f32>) {
        let name = name.into();
        match self.tensors.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = tensor,
            None => self.tensors.push((name, tensor)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<f32>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    fn require(&self, name: &str, path: &str) -> Result<&Tensor<f32>> {
        self.get(name).ok_or_else(|| Error::MissingTensor { path: path.into(), name: name.into() })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let sum = fnv1a64(&out[MAGIC.len()..]);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    /// Parses a checkpoint; `origin` only labels errors.
    pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<Self> {
        let corrupt = |reason: String| Error::Corrupt { path: origin.into(), reason };
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(corrupt("bad magic bytes".into()));
        }
        if bytes.len() < MAGIC.len() + 8 {
            return Err(corrupt("truncated before checksum".into()));
        }
        let (payload, tail) = bytes[MAGIC.len()..].split_at(bytes.len() - MAGIC.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
        let actual = fnv1a64(payload);
        if stored != actual {
            return Err(corrupt(format!("checksum mismatch (stored {stored:016x}, computed {actual:016x})")));
        }
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            if payload.len() - *pos < n {
                return Err(corrupt(format!("truncated at payload byte {pos}")));
            }
            let s = &payload[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        let read_u32 = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes")) as usize;
        let mut ck = Checkpoint::new();
        while pos < payload.len() {
            let len = read_u32(take(&mut pos, 4)?);
            let name = std::str::from_utf8(take(&mut pos, len)?)
                .map_err(|_| corrupt("tensor name is not UTF-8".into()))?
                .to_string();
            let rank = read_u32(take(&mut pos, 4)?);
            if rank > 8 {
                return Err(corrupt(format!("tensor {name} has rank {rank}")));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(read_u32(take(&mut pos, 4)?));
            }
            let count: usize = shape.iter().product();
            let bytes = count.checked_mul(4).ok_or_else(|| corrupt("tensor too large".into()))?;
            let raw = take(&mut pos, bytes)?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
            ck.insert(name, Tensor::new(shape, data)?);
        }
        Ok(ck)
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }

    pub fn put_dense<F: Scalar>(&mut self, prefix: &str, net: &DenseNet<F>) {
        for l in 0..net.num_layers() {
            let (inp, out) = (net.sizes()[l], net.sizes()[l + 1]);
            let (w, b) = net.layer(l);
            let w = w.iter().map(|x| x.as_f32()).collect();
            let b = b.iter().map(|x| x.as_f32()).collect();
            self.insert(format!("{prefix}.layer{l}.weight"), Tensor::new(vec![out, inp], w).expect("shape"));
            self.insert(format!("{prefix}.layer{l}.bias"), Tensor::new(vec![out], b).expect("shape"));
        }
    }

    /// Reassembles a dense network from the tensors written by [`Self::put_dense`].
    pub fn dense<F: Scalar>(&self, prefix: &str, origin: &str) -> Result<DenseNet<F>> {
        let first = self.require(&format!("{prefix}.layer0.weight"), origin)?;
        if first.shape().len() != 2 {
            return Err(Error::Corrupt { path: origin.into(), reason: format!("{prefix}.layer0.weight is not a matrix") });
        }
        let mut sizes = vec![first.shape()[1]];
        let mut params = Vec::new();
        let mut l = 0;
        while let Some(w) = self.get(&format!("{prefix}.layer{l}.weight")) {
            let b = self.require(&format!("{prefix}.layer{l}.bias"), origin)?;
            let inp = *sizes.last().expect("non-empty");
            if w.shape() != [b.len(), inp] || b.shape().len() != 1 {
                return Err(Error::Corrupt {
                    path: origin.into(),
                    reason: format!("layer {l} of {prefix} has shapes {:?} and {:?}", w.shape(), b.shape()),
                });
            }
            sizes.push(b.len());
            params.extend(w.data().iter().chain(b.data()).map(|&x| F::from_f32(x)));
            l += 1;
        }
        DenseNet::from_params(&sizes, params)
    }

    pub fn put_lstm<F: Scalar>(&mut self, prefix: &str, cell: &LstmCell<F>) {
        let (inp, hs) = (cell.input_size(), cell.hidden_size());
        let p: Vec<f32> = cell.params().iter().map(|x| x.as_f32()).collect();
        let (w, rest) = p.split_at(4 * hs * inp);
        let (u, b) = rest.split_at(4 * hs * hs);
        self.insert(format!("{prefix}.w"), Tensor::new(vec![4 * hs, inp], w.to_vec()).expect("shape"));
        self.insert(format!("{prefix}.u"), Tensor::new(vec![4 * hs, hs], u.to_vec()).expect("shape"));
        self.insert(format!("{prefix}.b"), Tensor::new(vec![4 * hs], b.to_vec()).expect("shape"));
    }

    pub fn lstm<F: Scalar>(&self, prefix: &str, origin: &str) -> Result<LstmCell<F>> {
        let w = self.require(&format!("{prefix}.w"), origin)?;
        let u = self.require(&format!("{prefix}.u"), origin)?;
        let b = self.require(&format!("{prefix}.b"), origin)?;
        let bad = || Error::Corrupt { path: origin.into(), reason: format!("inconsistent lstm shapes under {prefix}") };
        if w.shape().len() != 2 || u.shape().len() != 2 || w.shape()[0] % 4 != 0 {
            return Err(bad());
        }
        let hs = w.shape()[0] / 4;
        if u.shape() != [4 * hs, hs] || b.shape() != [4 * hs] {
            return Err(bad());
        }
        let params = w.data().iter().chain(u.data()).chain(b.data()).map(|&x| F::from_f32(x)).collect();
        LstmCell::from_params(w.shape()[1], hs, params)
    }

    /// Stores a small integer or real as a scalar tensor.
    pub fn put_scalar(&mut self, name: &str, value: f32) {
        self.insert(name, Tensor::new(vec![1], vec![value]).expect("shape"));
    }

    pub fn scalar(&self, name: &str) -> Option<f32> {
        self.get(name).filter(|t| t.len() == 1).map(|t| t.data()[0])
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Human-readable listing of a checkpoint file.
pub fn inspect(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let ck = Checkpoint::from_bytes(&bytes, &path.display().to_string())?;
    let sum = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().expect("8 bytes"));
    let mut s = String::new();
    let _ = writeln!(s, "file: {}", path.display());
    let _ = writeln!(s, "format: WIZNN{FORMAT_VERSION}");
    let _ = writeln!(s, "checksum: {sum:016x}");
    let _ = writeln!(s, "tensors: {}", ck.tensors.len());
    let total: usize = ck.tensors.iter().map(|(_, t)| t.len()).sum();
    for (name, t) in &ck.tensors {
        let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        let _ = writeln!(s, "  {name} [{}]", dims.join(" x "));
    }
    let _ = writeln!(s, "parameters: {total}");
    Ok(s)
}
