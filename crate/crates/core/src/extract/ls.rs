//! Least-squares refit of path amplitudes for fixed geometries.
//!
//! The dictionary column of a path is the vectorized model response
//! `a = a_freq(τ) ⊗ [conj(a_tx(θt)) ⊗ a_rx(θr)]`. Neither the dictionary nor
//! the Gram matrix is formed by multiplication: `aₖ†aₗ` factors into three
//! closed-form kernels and `aₖ†h` is a separable contraction of `h`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::beamspace::{angle_kernel, delay_kernel};
use crate::dft::cis_turns;
use crate::error::{domain, Error, Result};
use crate::parallel;
use crate::synth::{FrequencyResponse, PathParams, SounderConfig};

/// Gram matrices with a larger eigenvalue spread are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Delay and angles of one dictionary column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub delay: f64,
    pub aod: f64,
    pub aoa: f64,
}

impl From<&PathParams> for Geometry {
    fn from(p: &PathParams) -> Self {
        Geometry { delay: p.delay, aod: p.aod, aoa: p.aoa }
    }
}

impl Geometry {
    pub fn with_gain(&self, gain: Complex64) -> PathParams {
        PathParams::new(gain, self.delay, self.aod, self.aoa)
    }
}

#[derive(Debug, Clone)]
pub struct LsFit {
    pub amplitudes: Vec<Complex64>,
    /// Ratio of the extreme Gram eigenvalues.
    pub condition: f64,
}

/// `a†h` for the column of `geometry`.
pub fn correlate(response: &FrequencyResponse, geometry: &Geometry) -> Complex64 {
    let cfg = &response.config;
    let delay_bins = geometry.delay * cfg.bandwidth_hz;
    let ef: Vec<Complex64> = (0..cfg.n_freq).map(|k| cis_turns(delay_bins * cfg.norm_freq(k))).collect();
    let data = response.values.as_slice();
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..cfg.n_rx {
        let er = cis_turns(-geometry.aoa * r as f64);
        let mut row = Complex64::new(0.0, 0.0);
        for t in 0..cfg.n_tx {
            let base = (r * cfg.n_tx + t) * cfg.n_freq;
            let dot: Complex64 = data[base..base + cfg.n_freq].iter().zip(&ef).map(|(h, e)| h * e).sum();
            row += dot * cis_turns(geometry.aod * t as f64);
        }
        acc += row * er;
    }
    acc
}

/// `A†A` assembled from closed-form kernel products.
pub fn gram_matrix(geometry: &[Geometry], config: &SounderConfig) -> DMatrix<Complex64> {
    let n = geometry.len();
    let d = config.signal_space_dimension() as f64;
    DMatrix::from_fn(n, n, |k, l| {
        let (a, b) = (&geometry[k], &geometry[l]);
        if k == l {
            return Complex64::new(d, 0.0);
        }
        angle_kernel(b.aoa - a.aoa, config.n_rx)
            * angle_kernel(a.aod - b.aod, config.n_tx)
            * delay_kernel(a.delay - b.delay, config.bandwidth_hz, config.n_freq)
            * d
    })
}

/// Pair `(i, j)`, `i < j`, with the largest normalized Gram magnitude.
fn most_collinear(gram: &DMatrix<Complex64>) -> (usize, usize) {
    let n = gram.nrows();
    let mut best = (0, 1.min(n.saturating_sub(1)), -1.0);
    for i in 0..n {
        for j in i + 1..n {
            let c = gram[(i, j)].norm() / (gram[(i, i)].re * gram[(j, j)].re).sqrt();
            if c > best.2 {
                best = (i, j, c);
            }
        }
    }
    (best.0, best.1)
}

/// Solves the normal equations `(A†A) α = A†h` for the given geometries.
pub fn ls_fit(response: &FrequencyResponse, geometry: &[Geometry]) -> Result<LsFit> {
    let cfg = &response.config;
    let k = geometry.len();
    if k == 0 {
        return Ok(LsFit { amplitudes: Vec::new(), condition: 1.0 });
    }
    if k >= cfg.signal_space_dimension() {
        return domain(format!(
            "{k} columns cannot be fitted in a {}-dimensional signal space",
            cfg.signal_space_dimension()
        ));
    }
    let gram = gram_matrix(geometry, cfg);
    let eig = gram.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let degenerate = |condition| {
        let (first, second) = most_collinear(&gram);
        Error::DegenerateGeometry { first, second, condition }
    };
    // Also rejects NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(condition <= MAX_CONDITION) {
        return Err(degenerate(condition));
    }
    let rhs: Vec<Complex64> = parallel::map_range(k, |i| correlate(response, &geometry[i]));
    let chol = gram.clone().cholesky().ok_or_else(|| degenerate(condition))?;
    let alpha = chol.solve(&DVector::from_vec(rhs));
    Ok(LsFit { amplitudes: alpha.iter().copied().collect(), condition })
}

pub fn ls_amplitudes(response: &FrequencyResponse, geometry: &[Geometry]) -> Result<Vec<Complex64>> {
    ls_fit(response, geometry).map(|f| f.amplitudes)
}
