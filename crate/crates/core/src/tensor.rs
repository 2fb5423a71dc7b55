//! Dense row-major complex 3-tensor and its on-disk layout.
//!
//! Binary layout, all little-endian:
//!
//! | offset | size      | content                                   |
//! |--------|-----------|-------------------------------------------|
//! | 0      | 8         | magic `MPCXT3D\0`                         |
//! | 8      | 3 × 8     | dimensions as `u64`                       |
//! | 32     | 16 × len  | `(re, im)` pairs as `f64`, row-major      |

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"MPCXT3D\0";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<Complex64>,
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Tensor3 { dims, data: vec![Complex64::new(0.0, 0.0); dims.iter().product()] }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<Complex64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::Format(format!(
                "tensor data has {} entries, dimensions {:?} need {}",
                data.len(),
                dims,
                len
            )));
        }
        Ok(Tensor3 { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for a in 0..dims[0] {
            for b in 0..dims[1] {
                for c in 0..dims[2] {
                    data.push(f(a, b, c));
                }
            }
        }
        Tensor3 { dims, data }
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.dims[1] + b) * self.dims[2] + c
    }

    #[inline]
    pub fn unravel(&self, flat: usize) -> (usize, usize, usize) {
        let c = flat % self.dims[2];
        let ab = flat / self.dims[2];
        (ab / self.dims[1], ab % self.dims[1], c)
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> Complex64 {
        self.data[self.index(a, b, c)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: Complex64) {
        let i = self.index(a, b, c);
        self.data[i] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    /// Sum of squared magnitudes.
    pub fn power(&self) -> f64 {
        crate::parallel::sum_by(&self.data, |z| z.norm_sqr())
    }

    pub fn ensure_dims(&self, expected: [usize; 3]) -> Result<()> {
        if self.dims != expected {
            return Err(Error::Shape { expected, actual: self.dims });
        }
        Ok(())
    }

    /// Element-wise `self - other`.
    pub fn sub(&self, other: &Tensor3) -> Result<Tensor3> {
        other.ensure_dims(self.dims)?;
        Ok(Tensor3 { dims: self.dims, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() })
    }

    /// Element-wise `self + other`.
    pub fn add(&self, other: &Tensor3) -> Result<Tensor3> {
        other.ensure_dims(self.dims)?;
        Ok(Tensor3 { dims: self.dims, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() })
    }

    pub fn scale(&self, s: Complex64) -> Tensor3 {
        Tensor3 { dims: self.dims, data: self.data.iter().map(|z| z * s).collect() }
    }

    /// Largest element-wise deviation divided by the largest magnitude of
    /// `reference`. Zero when both tensors vanish.
    pub fn max_rel_diff(&self, reference: &Tensor3) -> f64 {
        assert_eq!(self.dims, reference.dims, "tensor shapes differ");
        let scale = reference.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let diff = self.data.iter().zip(&reference.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }

    /// Frobenius norm of `self - reference` relative to that of `reference`.
    pub fn rel_frobenius_diff(&self, reference: &Tensor3) -> f64 {
        assert_eq!(self.dims, reference.dims, "tensor shapes differ");
        let num: f64 = self.data.iter().zip(&reference.data).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den = reference.power();
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let mut buf = Vec::with_capacity(32 + 16 * self.data.len());
        buf.extend_from_slice(&MAGIC);
        for d in self.dims {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for z in &self.data {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut header = [0u8; 32];
        r.read_exact(&mut header).map_err(|e| Error::Format(format!("tensor header truncated: {e}")))?;
        if header[..8] != MAGIC {
            return Err(Error::Format("not a tensor file (bad magic)".into()));
        }
        let mut dims = [0usize; 3];
        for (i, d) in dims.iter_mut().enumerate() {
            let raw = u64::from_le_bytes(header[8 + 8 * i..16 + 8 * i].try_into().unwrap());
            *d = usize::try_from(raw).map_err(|_| Error::Format(format!("tensor dimension {raw} too large")))?;
        }
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format(format!("tensor dimensions {dims:?} overflow")))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != 16 * len {
            return Err(Error::Format(format!(
                "tensor payload is {} bytes, dimensions {:?} need {}",
                bytes.len(),
                dims,
                16 * len
            )));
        }
        let data = bytes
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Ok(Tensor3 { dims, data })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}
