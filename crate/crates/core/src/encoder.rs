//! Out-of-sample hashing and bit-packed code storage.
//!
//! Code `i` occupies `ceil(c / 8)` bytes starting at `i * ceil(c / 8)`. Bit
//! `k` lives in byte `k / 8` under mask `1 << (k % 8)`; a set bit is `+1`, a
//! clear bit is `-1`, and padding bits are always clear.

use crate::anchor_graph::kernel_rows;
use crate::binfmt::*;
use crate::datamodel::FeatureMatrix;
use crate::error::{Error, Result};
use crate::trainer::HashModel;
use nalgebra::DMatrix;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

pub const CODES_MAGIC: &[u8; 7] = b"PCMHCOD";
const CODES_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    X,
    Y,
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Modality::X),
            "y" | "Y" => Ok(Modality::Y),
            other => Err(Error::InvalidParameter(format!("unknown modality {other:?}"))),
        }
    }
}

/// Borrowed view of one packed code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeRef<'a> {
    bytes: &'a [u8],
    c: usize,
}

impl<'a> CodeRef<'a> {
    pub fn c(&self) -> usize {
        self.c
    }

    pub fn bytes(&self) -> &'a [u8] {
        self.bytes
    }

    /// `true` for `+1`.
    pub fn bit(&self, k: usize) -> bool {
        self.bytes[k / 8] & (1 << (k % 8)) != 0
    }

    pub fn to_signs(&self) -> Vec<i8> {
        (0..self.c).map(|k| if self.bit(k) { 1 } else { -1 }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashCodeSet {
    n: usize,
    c: usize,
    bits: Vec<u8>,
}

pub(crate) fn bytes_per_code(c: usize) -> usize {
    c.div_ceil(8)
}

impl HashCodeSet {
    /// Pack `n` codes of `c` bits; `positive(i, k)` decides bit `k` of code `i`.
    pub fn from_fn(n: usize, c: usize, positive: impl Fn(usize, usize) -> bool) -> Result<Self> {
        if c == 0 {
            return Err(Error::InvalidParameter("code length must be at least 1".into()));
        }
        let stride = bytes_per_code(c);
        let mut bits = vec![0u8; n * stride];
        for i in 0..n {
            for k in 0..c {
                if positive(i, k) {
                    bits[i * stride + k / 8] |= 1 << (k % 8);
                }
            }
        }
        Ok(HashCodeSet { n, c, bits })
    }

    /// Sign of each entry of an `n × c` matrix, with `sgn(0) = +1`.
    pub fn from_projections(p: &DMatrix<f64>) -> Result<Self> {
        HashCodeSet::from_fn(p.nrows(), p.ncols(), |i, k| p[(i, k)] >= 0.0)
    }

    /// Codes given as rows of `±1`.
    pub fn from_signs(rows: &[Vec<i8>]) -> Result<Self> {
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != c) {
            return Err(Error::DimensionMismatch {
                expected: c,
                found: rows[bad].len(),
                row: Some(bad),
            });
        }
        HashCodeSet::from_fn(rows.len(), c, |i, k| rows[i][k] > 0)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bits
    }

    pub fn code(&self, i: usize) -> CodeRef<'_> {
        let stride = bytes_per_code(self.c);
        CodeRef {
            bytes: &self.bits[i * stride..(i + 1) * stride],
            c: self.c,
        }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = CodeRef<'_>> + '_ {
        self.bits
            .chunks_exact(bytes_per_code(self.c))
            .map(move |bytes| CodeRef { bytes, c: self.c })
    }

    pub fn to_signs(&self) -> Vec<Vec<i8>> {
        self.iter().map(|code| code.to_signs()).collect()
    }

    /// Codes in the given order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut bits = Vec::with_capacity(idx.len() * bytes_per_code(self.c));
        for &i in idx {
            bits.extend_from_slice(self.code(i).bytes);
        }
        HashCodeSet {
            n: idx.len(),
            c: self.c,
            bits,
        }
    }
}

pub fn hamming_distance(a: CodeRef<'_>, b: CodeRef<'_>) -> Result<usize> {
    if a.c != b.c {
        return Err(Error::DimensionMismatch {
            expected: a.c,
            found: b.c,
            row: None,
        });
    }
    Ok(popcount_xor(a.bytes, b.bytes))
}

pub(crate) fn popcount_xor(a: &[u8], b: &[u8]) -> usize {
    let mut total = 0u32;
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        let x = u64::from_le_bytes(x.try_into().unwrap());
        let y = u64::from_le_bytes(y.try_into().unwrap());
        total += (x ^ y).count_ones();
    }
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        total += (x ^ y).count_ones();
    }
    total as usize
}

/// Anything that maps both modalities into one Hamming space.
pub trait CrossModalHasher {
    fn code_length(&self) -> usize;
    fn encode_modality(&self, data: &FeatureMatrix, modality: Modality) -> Result<HashCodeSet>;
}

impl CrossModalHasher for HashModel {
    fn code_length(&self) -> usize {
        self.c()
    }

    fn encode_modality(&self, data: &FeatureMatrix, modality: Modality) -> Result<HashCodeSet> {
        encode(self, data, modality)
    }
}

/// Hash `data` with the model's function for `modality`.
pub fn encode(model: &HashModel, data: &FeatureMatrix, modality: Modality) -> Result<HashCodeSet> {
    let (anchors, sigma, b, t) = match modality {
        Modality::X => (&model.anchors_x, model.sigma_x, &model.b_x, &model.thresholds_x),
        Modality::Y => (&model.anchors_y, model.sigma_y, &model.b_y, &model.thresholds_y),
    };
    let z = kernel_rows(data, anchors, sigma, model.s_nearest)?;
    let proj = z * b;
    HashCodeSet::from_fn(proj.nrows(), proj.ncols(), |i, k| proj[(i, k)] - t[k] >= 0.0)
}

pub fn write_codes<W: Write>(codes: &HashCodeSet, w: &mut W) -> Result<()> {
    let n = to_u32(codes.n, "code count")?;
    let c = to_u32(codes.c, "code length")?;
    (|| {
        w.write_all(CODES_MAGIC)?;
        write_u32(w, CODES_VERSION)?;
        write_u32(w, n)?;
        write_u32(w, c)?;
        w.write_all(&codes.bits)
    })()
    .map_err(|e| Error::Format(e.to_string()))
}

pub fn read_codes<R: Read>(r: &mut R) -> Result<HashCodeSet> {
    read_magic(r, CODES_MAGIC)?;
    let version = read_u32(r)?;
    if version != CODES_VERSION {
        return Err(Error::Format(format!("unsupported codes version {version}")));
    }
    let n = read_u32(r)? as usize;
    let c = read_u32(r)? as usize;
    if c == 0 {
        return Err(Error::Format("zero code length".into()));
    }
    let mut bits = vec![0u8; n * bytes_per_code(c)];
    r.read_exact(&mut bits)
        .map_err(|_| Error::Format("truncated code payload".into()))?;
    expect_eof(r)?;
    let pad = bytes_per_code(c) * 8 - c;
    if pad > 0 {
        let mask = !(0xFFu8 >> pad);
        let stride = bytes_per_code(c);
        if (0..n).any(|i| bits[(i + 1) * stride - 1] & mask != 0) {
            return Err(Error::Format("non-zero padding bits".into()));
        }
    }
    Ok(HashCodeSet { n, c, bits })
}

pub fn save_codes(codes: &HashCodeSet, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_codes(codes, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_codes(path: &Path) -> Result<HashCodeSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_codes(&mut BufReader::new(file))
}
