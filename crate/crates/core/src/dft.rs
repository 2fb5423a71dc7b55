//! Separable per-axis DFT evaluation on a 3-tensor.
//!
//! Every transform in this crate has the shape
//! `out[m] = post[m] · Σ_x pre[x] · in[x] · exp(±j2π·m·x / fft_len)`
//! along one axis, for `m < count`. Zero padding (`fft_len > input length`)
//! gives oversampling; `count < fft_len` truncates the output axis.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::parallel;
use crate::tensor::Tensor3;

/// `exp(j2π·turns)`, with `turns` reduced to the principal period first so
/// that large arguments keep full relative precision.
#[inline]
pub fn cis_turns(turns: f64) -> Complex64 {
    let r = turns - turns.round();
    let (s, c) = (2.0 * PI * r).sin_cos();
    Complex64::new(c, s)
}

/// `(-1)^m` as a complex number.
#[inline]
pub(crate) fn alternating(m: usize) -> Complex64 {
    if m.is_multiple_of(2) {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(-1.0, 0.0)
    }
}

pub(crate) struct AxisPlan {
    fft: Arc<dyn Fft<f64>>,
    count: usize,
    pre: Vec<Complex64>,
    post: Vec<Complex64>,
}

impl AxisPlan {
    /// `sign = -1` uses `exp(-j…)` (forward DFT), `sign = +1` the unnormalized inverse.
    pub fn new(fft_len: usize, sign: i32, count: usize, pre: Vec<Complex64>, post: Vec<Complex64>) -> Self {
        assert!(pre.len() <= fft_len, "input longer than transform");
        assert!(count <= fft_len, "output longer than transform");
        assert_eq!(post.len(), count);
        let dir = if sign < 0 { FftDirection::Forward } else { FftDirection::Inverse };
        let fft = FftPlanner::new().plan_fft(fft_len, dir);
        AxisPlan { fft, count, pre, post }
    }

    fn input_len(&self) -> usize {
        self.pre.len()
    }

    fn run_line(&self, input: impl Iterator<Item = Complex64>, buf: &mut Vec<Complex64>) {
        buf.clear();
        buf.extend(input.zip(&self.pre).map(|(v, p)| v * p));
        buf.resize(self.fft.len(), Complex64::new(0.0, 0.0));
        self.fft.process(buf);
        buf.truncate(self.count);
        for (v, p) in buf.iter_mut().zip(&self.post) {
            *v *= p;
        }
    }

    /// Transforms `t` along `axis`, replacing that axis' length by `count`.
    pub fn apply(&self, t: &Tensor3, axis: usize) -> Tensor3 {
        let [a, b, c] = t.dims();
        let src = t.as_slice();
        assert_eq!(t.dims()[axis], self.input_len(), "axis length mismatch");
        match axis {
            2 => {
                let mut out = Tensor3::zeros([a, b, self.count]);
                let count = self.count;
                parallel::for_each_chunk_mut(out.as_mut_slice(), count, |line, dst| {
                    let mut buf = Vec::with_capacity(self.fft.len());
                    self.run_line(src[line * c..(line + 1) * c].iter().copied(), &mut buf);
                    dst.copy_from_slice(&buf);
                });
                out
            }
            1 => {
                let slab = self.count * c;
                let mut out = Tensor3::zeros([a, self.count, c]);
                parallel::for_each_chunk_mut(out.as_mut_slice(), slab, |i, dst| {
                    let mut buf = Vec::with_capacity(self.fft.len());
                    for k in 0..c {
                        let line = (0..b).map(|j| src[(i * b + j) * c + k]);
                        self.run_line(line, &mut buf);
                        for (m, v) in buf.iter().enumerate() {
                            dst[m * c + k] = *v;
                        }
                    }
                });
                out
            }
            0 => {
                let lines: Vec<Vec<Complex64>> = parallel::map_range(b * c, |jk| {
                    let mut buf = Vec::with_capacity(self.fft.len());
                    self.run_line((0..a).map(|i| src[i * b * c + jk]), &mut buf);
                    buf
                });
                let mut out = Tensor3::zeros([self.count, b, c]);
                let dst = out.as_mut_slice();
                for (jk, line) in lines.iter().enumerate() {
                    for (m, v) in line.iter().enumerate() {
                        dst[m * b * c + jk] = *v;
                    }
                }
                out
            }
            _ => panic!("axis {axis} out of range"),
        }
    }
}
