//! Idealized sounder forward model: ULA steering vectors, the multipath
//! spatial frequency response, additive noise and the critically sampled
//! (virtual) angle-delay representation.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::association::ResolutionSpec;
use crate::dft::{alternating, cis_turns, AxisPlan};
use crate::error::{domain, Error, Result};
use crate::parallel;
use crate::tensor::Tensor3;

/// Tolerance used when turning a delay into a count of resolution bins, so
/// that e.g. `233 ns · 1 GHz` is not rounded up to 234 bins.
pub(crate) const BIN_SLACK: f64 = 1e-9;

/// One multipath component: complex gain, delay in seconds and the
/// departure/arrival angles as spatial frequencies in cycles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParams {
    pub gain: Complex64,
    pub delay: f64,
    pub aod: f64,
    pub aoa: f64,
}

impl PathParams {
    pub fn new(gain: Complex64, delay: f64, aod: f64, aoa: f64) -> Self {
        PathParams { gain, delay, aod, aoa }
    }

    #[inline]
    pub fn power(&self) -> f64 {
        self.gain.norm_sqr()
    }

    pub fn with_gain(self, gain: Complex64) -> Self {
        PathParams { gain, ..self }
    }

    /// Checks the angle range and that the delay falls inside the
    /// observation window of `config`.
    pub fn validate(&self, config: &SounderConfig) -> Result<()> {
        if !(self.gain.re.is_finite() && self.gain.im.is_finite()) {
            return domain(format!("path gain {} is not finite", self.gain));
        }
        for (name, v) in [("aod", self.aod), ("aoa", self.aoa)] {
            if !(-0.5..=0.5).contains(&v) {
                return domain(format!("{name} {v} outside [-0.5, 0.5] cycles"));
            }
        }
        let t = config.duration();
        if !(self.delay >= 0.0 && self.delay < t) {
            return domain(format!("delay {:e} s outside observation window [0, {:e}) s", self.delay, t));
        }
        Ok(())
    }
}

/// Array sizes and sampling of the idealized sounder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SounderConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub bandwidth_hz: f64,
    pub n_freq: usize,
    pub carrier_hz: f64,
}

impl SounderConfig {
    pub fn new(n_tx: usize, n_rx: usize, bandwidth_hz: f64, n_freq: usize, carrier_hz: f64) -> Result<Self> {
        let c = SounderConfig { n_tx, n_rx, bandwidth_hz, n_freq, carrier_hz };
        c.validate()?;
        Ok(c)
    }

    /// 35 × 35 critically spaced ULAs at 28 GHz, 1 GHz bandwidth, 233 frequency samples.
    pub fn full() -> Self {
        SounderConfig { n_tx: 35, n_rx: 35, bandwidth_hz: 1e9, n_freq: 233, carrier_hz: 28e9 }
    }

    /// Small configuration for tests and quick experiments.
    pub fn desk() -> Self {
        SounderConfig { n_tx: 8, n_rx: 8, bandwidth_hz: 1e9, n_freq: 32, carrier_hz: 28e9 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 || self.n_rx == 0 || self.n_freq == 0 {
            return domain("array sizes and frequency-sample count must be positive");
        }
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return domain(format!("bandwidth {} Hz must be positive", self.bandwidth_hz));
        }
        if !(self.carrier_hz.is_finite() && self.carrier_hz > 0.0) {
            return domain(format!("carrier {} Hz must be positive", self.carrier_hz));
        }
        Ok(())
    }

    #[inline]
    pub fn delay_res(&self) -> f64 {
        1.0 / self.bandwidth_hz
    }

    #[inline]
    pub fn aod_res(&self) -> f64 {
        1.0 / self.n_tx as f64
    }

    #[inline]
    pub fn aoa_res(&self) -> f64 {
        1.0 / self.n_rx as f64
    }

    /// Observation window `T = n_freq / W`.
    #[inline]
    pub fn duration(&self) -> f64 {
        self.n_freq as f64 / self.bandwidth_hz
    }

    #[inline]
    pub fn signal_space_dimension(&self) -> usize {
        self.n_tx * self.n_rx * self.n_freq
    }

    pub fn resolution(&self) -> ResolutionSpec {
        ResolutionSpec { delay_res: self.delay_res(), aoa_res: self.aoa_res(), aod_res: self.aod_res() }
    }

    pub fn response_dims(&self) -> [usize; 3] {
        [self.n_rx, self.n_tx, self.n_freq]
    }

    /// Baseband frequencies `-W/2 + k·W/n_freq`.
    pub fn freq_grid(&self) -> Vec<f64> {
        (0..self.n_freq).map(|k| self.bandwidth_hz * self.norm_freq(k)).collect()
    }

    /// Frequency sample `k` in units of the bandwidth, in `[-1/2, 1/2)`.
    #[inline]
    pub(crate) fn norm_freq(&self, k: usize) -> f64 {
        -0.5 + k as f64 / self.n_freq as f64
    }
}

pub fn signal_space_dimension(config: &SounderConfig) -> usize {
    config.signal_space_dimension()
}

/// Spatial frequency in cycles, `(d/λ)·sin(φ)`, for a physical angle in degrees.
pub fn spatial_frequency(phi_deg: f64, spacing_ratio: f64) -> Result<f64> {
    if !(-90.0..=90.0).contains(&phi_deg) {
        return domain(format!("angle {phi_deg} deg outside [-90, 90]"));
    }
    if !(spacing_ratio.is_finite() && spacing_ratio > 0.0) {
        return domain(format!("spacing ratio {spacing_ratio} must be positive"));
    }
    Ok(spacing_ratio * phi_deg.to_radians().sin())
}

/// ULA steering vector `[exp(j2π·θ·m)]` for `m = 0..n`.
pub fn steering_vector(theta: f64, n: usize) -> Vec<Complex64> {
    (0..n).map(|m| cis_turns(theta * m as f64)).collect()
}

/// Measured (or synthesized) response `H(f)`, indexed `(rx, tx, freq)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    pub values: Tensor3,
    pub config: SounderConfig,
}

impl FrequencyResponse {
    pub fn new(config: SounderConfig, values: Tensor3) -> Result<Self> {
        values.ensure_dims(config.response_dims())?;
        Ok(FrequencyResponse { values, config })
    }

    pub fn zeros(config: SounderConfig) -> Self {
        FrequencyResponse { values: Tensor3::zeros(config.response_dims()), config }
    }

    pub fn freq_grid(&self) -> Vec<f64> {
        self.config.freq_grid()
    }

    pub fn power(&self) -> f64 {
        self.values.power()
    }
}

/// Per-path factors of the separable response: `H = Σ g · rx ⊗ tx ⊗ freq`.
pub(crate) struct PathFactors {
    pub gain: Complex64,
    pub rx: Vec<Complex64>,
    pub tx: Vec<Complex64>,
    pub freq: Vec<Complex64>,
}

impl PathFactors {
    pub fn new(p: &PathParams, config: &SounderConfig) -> Self {
        let delay_bins = p.delay * config.bandwidth_hz;
        PathFactors {
            gain: p.gain,
            rx: steering_vector(p.aoa, config.n_rx),
            tx: (0..config.n_tx).map(|t| cis_turns(-p.aod * t as f64)).collect(),
            freq: (0..config.n_freq).map(|k| cis_turns(-delay_bins * config.norm_freq(k))).collect(),
        }
    }
}

/// Accumulates `sign · Σ paths` into `values` (shape `(n_rx, n_tx, n_freq)`).
pub(crate) fn accumulate_paths(values: &mut Tensor3, paths: &[PathParams], config: &SounderConfig, sign: f64) {
    let factors: Vec<PathFactors> = paths.iter().map(|p| PathFactors::new(p, config)).collect();
    let (n_tx, n_freq) = (config.n_tx, config.n_freq);
    parallel::for_each_chunk_mut(values.as_mut_slice(), n_tx * n_freq, |r, slab| {
        for f in &factors {
            let gr = f.gain * f.rx[r] * sign;
            for t in 0..n_tx {
                let c = gr * f.tx[t];
                let line = &mut slab[t * n_freq..(t + 1) * n_freq];
                for (v, e) in line.iter_mut().zip(&f.freq) {
                    *v += c * e;
                }
            }
        }
    });
}

/// `H(f) = Σ_n g_n · a_R(aoa_n) · a_T(aod_n)^† · exp(-j2π·τ_n·f)` on the
/// configured frequency grid.
pub fn synthesize_response(config: &SounderConfig, paths: &[PathParams]) -> Result<FrequencyResponse> {
    config.validate()?;
    for (i, p) in paths.iter().enumerate() {
        p.validate(config).map_err(|e| Error::Domain(format!("path {i}: {e}")))?;
    }
    let mut resp = FrequencyResponse::zeros(*config);
    accumulate_paths(&mut resp.values, paths, config, 1.0);
    Ok(resp)
}

/// Adds circular complex Gaussian noise of the given per-entry variance.
pub fn add_awgn(response: &FrequencyResponse, noise_power_per_sample: f64, seed: u64) -> Result<FrequencyResponse> {
    if !(noise_power_per_sample.is_finite() && noise_power_per_sample >= 0.0) {
        return domain(format!("noise power {noise_power_per_sample} must be non-negative"));
    }
    let mut out = response.clone();
    if noise_power_per_sample == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, (noise_power_per_sample / 2.0).sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in out.values.as_mut_slice() {
        let re = normal.sample(&mut rng);
        let im = normal.sample(&mut rng);
        *v += Complex64::new(re, im);
    }
    Ok(out)
}

/// Critically sampled angle-delay coefficients `H_v(i, k, ℓ)` for
/// `ℓ = 0..=max_delay_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualCoefficients {
    pub values: Tensor3,
    pub max_delay_index: usize,
}

/// Number of delay bins needed to cover `span` seconds.
pub(crate) fn delay_bins(span: f64, bandwidth_hz: f64) -> usize {
    (span * bandwidth_hz - BIN_SLACK).ceil().max(0.0) as usize
}

/// Projects the response onto the virtual lattice
/// `(i/n_rx, k/n_tx, ℓ/W)`. The frequency integral is the sample mean over
/// the frequency grid. The delay index is capped at `n_freq - 1` since
/// `ℓ = n_freq` aliases onto `ℓ = 0`.
pub fn virtual_coefficients(response: &FrequencyResponse, tau_max: f64) -> Result<VirtualCoefficients> {
    let cfg = &response.config;
    let t = cfg.duration();
    if !(tau_max >= 0.0 && tau_max <= t * (1.0 + BIN_SLACK)) {
        return domain(format!("tau_max {tau_max:e} s outside [0, T = {t:e} s]"));
    }
    let l = delay_bins(tau_max, cfg.bandwidth_hz).min(cfg.n_freq - 1);
    let one = Complex64::new(1.0, 0.0);
    let rx = AxisPlan::new(cfg.n_rx, -1, cfg.n_rx, vec![one; cfg.n_rx], vec![one; cfg.n_rx]);
    let tx = AxisPlan::new(cfg.n_tx, 1, cfg.n_tx, vec![one; cfg.n_tx], vec![one; cfg.n_tx]);
    let scale = 1.0 / cfg.signal_space_dimension() as f64;
    let post = (0..=l).map(|m| alternating(m) * scale).collect();
    let delay = AxisPlan::new(cfg.n_freq, 1, l + 1, vec![one; cfg.n_freq], post);
    let values = delay.apply(&tx.apply(&rx.apply(&response.values, 0), 1), 2);
    Ok(VirtualCoefficients { values, max_delay_index: l })
}

/// Evaluates the virtual-lattice expansion back on the frequency grid.
pub fn reconstruct_from_virtual(coeffs: &VirtualCoefficients, config: &SounderConfig) -> Result<FrequencyResponse> {
    config.validate()?;
    let l = coeffs.max_delay_index;
    if l >= config.n_freq {
        return domain(format!("delay index {l} aliases on a {}-sample frequency grid", config.n_freq));
    }
    coeffs.values.ensure_dims([config.n_rx, config.n_tx, l + 1])?;
    let one = Complex64::new(1.0, 0.0);
    let rx = AxisPlan::new(config.n_rx, 1, config.n_rx, vec![one; config.n_rx], vec![one; config.n_rx]);
    let tx = AxisPlan::new(config.n_tx, -1, config.n_tx, vec![one; config.n_tx], vec![one; config.n_tx]);
    let pre = (0..=l).map(alternating).collect();
    let delay = AxisPlan::new(config.n_freq, -1, config.n_freq, pre, vec![one; config.n_freq]);
    let values = delay.apply(&tx.apply(&rx.apply(&coeffs.values, 0), 1), 2);
    FrequencyResponse::new(*config, values)
}

/// Keeps the paths within `dr_db` of the strongest one, in input order.
pub fn filter_by_dynamic_range(paths: &[PathParams], dr_db: f64) -> Result<Vec<PathParams>> {
    if paths.is_empty() {
        return domain("cannot filter an empty path list");
    }
    if !(dr_db.is_finite() && dr_db > 0.0) {
        return domain(format!("dynamic range {dr_db} dB must be positive"));
    }
    let max_power = paths.iter().map(PathParams::power).fold(0.0, f64::max);
    let threshold = max_power / 10f64.powf(dr_db / 10.0);
    Ok(paths.iter().filter(|p| p.power() >= threshold).copied().collect())
}
