//! Oversampled AoA × AoD × delay ("beamspace") representation of a
//! frequency response, and the closed-form response of one path in it.
//!
//! For a grid point `(θr, θt, τ)` the transform is
//!
//! ```text
//! B(θr, θt, τ) = 1/(n_rx·n_tx·n_freq) · Σ_{r,t,k} e^{-j2πθr·r} · H[r,t,k] · e^{j2πθt·t} · e^{j2πτ·f_k}
//! ```
//!
//! and a single path of gain `g` maps to the separable product
//! `g · K_rx(aoa − θr) · K_tx(θt − aod) · K_delay(τ − delay)` of the exact
//! (phase-carrying) discrete kernels below. Greedy subtraction relies on
//! the two agreeing to rounding error.

use std::io::Write;

use num_complex::Complex64;

use crate::dft::{alternating, cis_turns, AxisPlan};
use crate::error::{domain, Result};
use crate::parallel;
use crate::synth::{delay_bins, FrequencyResponse, PathParams, SounderConfig, BIN_SLACK};
use crate::tensor::Tensor3;

/// Oversampling factors per axis and the delay extent of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub os_aoa: usize,
    pub os_aod: usize,
    pub os_delay: usize,
    pub delay_span: f64,
}

impl GridSpec {
    pub const DEFAULT_OVERSAMPLING: usize = 4;

    /// Same oversampling on every axis, delay axis covering the whole window.
    pub fn uniform(oversampling: usize, config: &SounderConfig) -> Self {
        GridSpec { os_aoa: oversampling, os_aod: oversampling, os_delay: oversampling, delay_span: config.duration() }
    }

    pub fn validate(&self, config: &SounderConfig) -> Result<()> {
        if self.os_aoa == 0 || self.os_aod == 0 || self.os_delay == 0 {
            return domain("oversampling factors must be positive");
        }
        let t = config.duration();
        if !(self.delay_span > 0.0 && self.delay_span <= t * (1.0 + BIN_SLACK)) {
            return domain(format!("grid delay span {:e} s outside (0, T = {:e} s]", self.delay_span, t));
        }
        Ok(())
    }

    pub fn dims(&self, config: &SounderConfig) -> [usize; 3] {
        [
            config.n_rx * self.os_aoa,
            config.n_tx * self.os_aod,
            delay_bins(self.delay_span, config.bandwidth_hz) * self.os_delay,
        ]
    }

    /// Uniform samples of `[-0.5, 0.5)`.
    pub fn aoa_axis(&self, config: &SounderConfig) -> Vec<f64> {
        angle_axis(config.n_rx * self.os_aoa)
    }

    pub fn aod_axis(&self, config: &SounderConfig) -> Vec<f64> {
        angle_axis(config.n_tx * self.os_aod)
    }

    /// Delays `k / (W · os_delay)`.
    pub fn delay_axis(&self, config: &SounderConfig) -> Vec<f64> {
        let step = self.delay_step(config);
        (0..self.dims(config)[2]).map(|k| k as f64 * step).collect()
    }

    pub fn delay_step(&self, config: &SounderConfig) -> f64 {
        1.0 / (config.bandwidth_hz * self.os_delay as f64)
    }
}

fn angle_axis(points: usize) -> Vec<f64> {
    (0..points).map(|i| angle_at(i, points)).collect()
}

#[inline]
fn angle_at(i: usize, points: usize) -> f64 {
    -0.5 + i as f64 / points as f64
}

/// `(1/n) Σ_{m<n} exp(j2π·Δθ·m)`: the normalized inner product of two
/// steering vectors whose spatial frequencies differ by `Δθ`.
pub fn angle_kernel(delta_theta: f64, n: usize) -> Complex64 {
    assert!(n >= 1, "kernel length must be positive");
    let d = delta_theta - delta_theta.round();
    if d == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let nf = n as f64;
    let pi = std::f64::consts::PI;
    let mag = (pi * nf * d).sin() / (nf * (pi * d).sin());
    cis_turns(0.5 * (nf - 1.0) * d) * mag
}

/// Mean of `exp(j2π·Δτ·f)` over the sounder's frequency grid.
pub fn delay_kernel(delta_tau: f64, bandwidth_hz: f64, n_freq: usize) -> Complex64 {
    assert!(n_freq >= 1, "frequency-sample count must be positive");
    let x = delta_tau * bandwidth_hz;
    cis_turns(-0.5 * x) * angle_kernel(x / n_freq as f64, n_freq)
}

/// Beamspace samples over the lattice described by `spec`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamspaceGrid {
    pub values: Tensor3,
    pub spec: GridSpec,
    pub config: SounderConfig,
}

impl BeamspaceGrid {
    pub fn zeros(spec: GridSpec, config: SounderConfig) -> Self {
        BeamspaceGrid { values: Tensor3::zeros(spec.dims(&config)), spec, config }
    }

    pub fn aoa_at(&self, i: usize) -> f64 {
        angle_at(i, self.values.dims()[0])
    }

    pub fn aod_at(&self, j: usize) -> f64 {
        angle_at(j, self.values.dims()[1])
    }

    pub fn delay_at(&self, k: usize) -> f64 {
        k as f64 * self.spec.delay_step(&self.config)
    }

    pub fn power(&self) -> f64 {
        self.values.power()
    }
}

pub fn beamspace_transform(response: &FrequencyResponse, spec: &GridSpec) -> Result<BeamspaceGrid> {
    let cfg = response.config;
    spec.validate(&cfg)?;
    response.values.ensure_dims(cfg.response_dims())?;
    let [m_rx, m_tx, n_delay] = spec.dims(&cfg);
    let one = Complex64::new(1.0, 0.0);

    // θ = -1/2 + m/M turns exp(∓j2πθx) into (-1)^x · exp(∓j2πmx/M).
    let rx = AxisPlan::new(m_rx, -1, m_rx, (0..cfg.n_rx).map(alternating).collect(), vec![one; m_rx]);
    let tx = AxisPlan::new(m_tx, 1, m_tx, (0..cfg.n_tx).map(alternating).collect(), vec![one; m_tx]);
    // τ_m·f_k = (m/os)·(k/n − 1/2) in units of 1/W · W.
    let scale = 1.0 / cfg.signal_space_dimension() as f64;
    let os = spec.os_delay as f64;
    let post = (0..n_delay).map(|m| cis_turns(-0.5 * m as f64 / os) * scale).collect();
    let delay = AxisPlan::new(cfg.n_freq * spec.os_delay, 1, n_delay, vec![one; cfg.n_freq], post);

    let values = delay.apply(&tx.apply(&rx.apply(&response.values, 0), 1), 2);
    Ok(BeamspaceGrid { values, spec: *spec, config: cfg })
}

/// One path's beamspace response, kept in separable form.
#[derive(Debug, Clone)]
pub struct PathAtom {
    pub gain: Complex64,
    pub aoa: Vec<Complex64>,
    pub aod: Vec<Complex64>,
    pub delay: Vec<Complex64>,
}

impl PathAtom {
    pub fn new(path: &PathParams, spec: &GridSpec, config: &SounderConfig) -> Self {
        let [m_rx, m_tx, n_delay] = spec.dims(config);
        let step = spec.delay_step(config);
        PathAtom {
            gain: path.gain,
            aoa: (0..m_rx).map(|i| angle_kernel(path.aoa - angle_at(i, m_rx), config.n_rx)).collect(),
            aod: (0..m_tx).map(|j| angle_kernel(angle_at(j, m_tx) - path.aod, config.n_tx)).collect(),
            delay: (0..n_delay)
                .map(|k| delay_kernel(k as f64 * step - path.delay, config.bandwidth_hz, config.n_freq))
                .collect(),
        }
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.gain * self.aoa[i] * self.aod[j] * self.delay[k]
    }

    /// `grid += sign · atom` for every atom, one pass over the grid.
    pub fn accumulate(grid: &mut Tensor3, atoms: &[PathAtom], sign: f64) {
        let [_, m_tx, n_delay] = grid.dims();
        parallel::for_each_chunk_mut(grid.as_mut_slice(), m_tx * n_delay, |i, slab| {
            for (j, line) in slab.chunks_mut(n_delay).enumerate() {
                for atom in atoms {
                    let c = atom.gain * atom.aoa[i] * atom.aod[j] * sign;
                    for (v, d) in line.iter_mut().zip(&atom.delay) {
                        *v += c * d;
                    }
                }
            }
        });
    }

    pub fn to_tensor(&self) -> Tensor3 {
        let mut t = Tensor3::zeros([self.aoa.len(), self.aod.len(), self.delay.len()]);
        PathAtom::accumulate(&mut t, std::slice::from_ref(self), 1.0);
        t
    }
}

/// Analytic beamspace grid of a single path.
pub fn single_path_grid(path: &PathParams, spec: &GridSpec, config: &SounderConfig) -> BeamspaceGrid {
    BeamspaceGrid { values: PathAtom::new(path, spec, config).to_tensor(), spec: *spec, config: *config }
}

/// Real-valued 2D map with axis coordinates, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerMap {
    pub row_label: &'static str,
    pub col_label: &'static str,
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
    pub values: Vec<f64>,
}

impl PowerMap {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols.len() + c]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// CSV matrix: a header row `row\col,<col coords…>`, then one row per
    /// row coordinate.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        write!(w, "{}\\{}", self.row_label, self.col_label)?;
        for c in &self.cols {
            write!(w, ",{c}")?;
        }
        writeln!(w)?;
        for (r, coord) in self.rows.iter().enumerate() {
            write!(w, "{coord}")?;
            for v in &self.values[r * self.cols.len()..(r + 1) * self.cols.len()] {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Power summed over delay (AoA × AoD) and over AoD (AoA × delay).
pub fn pdp_marginals(grid: &BeamspaceGrid) -> (PowerMap, PowerMap) {
    let [m_rx, m_tx, n_delay] = grid.values.dims();
    let v = grid.values.as_slice();
    let mut aoa_aod = vec![0.0; m_rx * m_tx];
    let mut aoa_delay = vec![0.0; m_rx * n_delay];
    for i in 0..m_rx {
        for j in 0..m_tx {
            let line = &v[(i * m_tx + j) * n_delay..(i * m_tx + j + 1) * n_delay];
            let mut acc = 0.0;
            for (k, z) in line.iter().enumerate() {
                let p = z.norm_sqr();
                acc += p;
                aoa_delay[i * n_delay + k] += p;
            }
            aoa_aod[i * m_tx + j] = acc;
        }
    }
    let aoa = grid.spec.aoa_axis(&grid.config);
    (
        PowerMap {
            row_label: "aoa",
            col_label: "aod",
            rows: aoa.clone(),
            cols: grid.spec.aod_axis(&grid.config),
            values: aoa_aod,
        },
        PowerMap {
            row_label: "aoa",
            col_label: "delay_s",
            rows: aoa,
            cols: grid.spec.delay_axis(&grid.config),
            values: aoa_delay,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::synthesize_response;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn direct_angle(delta: f64, n: usize) -> Complex64 {
        (0..n).map(|m| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * delta * m as f64)).sum::<Complex64>()
            / n as f64
    }

    /// Grid value by direct summation of the transform definition.
    fn direct_transform_at(h: &FrequencyResponse, ar: f64, at: f64, tau: f64) -> Complex64 {
        let cfg = h.config;
        let freqs = cfg.freq_grid();
        let mut acc = c(0.0, 0.0);
        for r in 0..cfg.n_rx {
            for t in 0..cfg.n_tx {
                for (k, f) in freqs.iter().enumerate() {
                    let ph = 2.0 * std::f64::consts::PI * (-ar * r as f64 + at * t as f64 + tau * f);
                    acc += Complex64::from_polar(1.0, ph) * h.values.get(r, t, k);
                }
            }
        }
        acc / cfg.signal_space_dimension() as f64
    }

    #[test]
    fn angle_kernel_examples() {
        assert_eq!(angle_kernel(0.0, 7), c(1.0, 0.0));
        assert_eq!(angle_kernel(3.0, 7), c(1.0, 0.0));
        assert!(angle_kernel(0.25, 4).norm() < 1e-15);
        let got = angle_kernel(1.0 / 8.0, 4);
        assert!((got - direct_angle(1.0 / 8.0, 4)).norm() < 1e-15);
    }

    #[test]
    fn delay_kernel_examples() {
        assert_eq!(delay_kernel(0.0, 1e9, 64), c(1.0, 0.0));
        assert!(delay_kernel(1e-9, 1e9, 2).norm() < 1e-12);
        assert!(delay_kernel(1e-9, 1e9, 64).norm() < 1e-12);
        let (w, n, dt) = (1e9, 64usize, 0.4e-9);
        let direct: Complex64 = (0..n)
            .map(|k| {
                let f = -w / 2.0 + k as f64 * w / n as f64;
                Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * dt * f)
            })
            .sum::<Complex64>()
            / n as f64;
        assert!((delay_kernel(dt, w, n) - direct).norm() < 1e-14);
    }

    #[test]
    fn transform_matches_direct_sum() {
        let cfg = SounderConfig::new(3, 4, 1e9, 5, 1e9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = FrequencyResponse::new(
            cfg,
            Tensor3::from_fn(cfg.response_dims(), |_, _, _| {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            }),
        )
        .unwrap();
        let spec = GridSpec { os_aoa: 2, os_aod: 3, os_delay: 2, delay_span: 4e-9 };
        let g = beamspace_transform(&h, &spec).unwrap();
        assert_eq!(g.values.dims(), [8, 9, 8]);
        for (i, j, k) in [(0, 0, 0), (3, 5, 7), (7, 8, 1), (2, 1, 4)] {
            let want = direct_transform_at(&h, g.aoa_at(i), g.aod_at(j), g.delay_at(k));
            assert!((g.values.get(i, j, k) - want).norm() < 1e-13);
        }
    }

    #[test]
    fn zero_response_and_bad_spec() {
        let cfg = SounderConfig::desk();
        let spec = GridSpec::uniform(2, &cfg);
        let g = beamspace_transform(&FrequencyResponse::zeros(cfg), &spec).unwrap();
        assert_eq!(g.power(), 0.0);
        let bad = GridSpec { os_aoa: 0, ..spec };
        assert!(beamspace_transform(&FrequencyResponse::zeros(cfg), &bad).is_err());
        let long = GridSpec { delay_span: 2.0 * cfg.duration(), ..spec };
        assert!(long.validate(&cfg).is_err());
    }

    #[test]
    fn on_grid_path_peaks_at_its_gain() {
        let cfg = SounderConfig::desk();
        let spec = GridSpec::uniform(4, &cfg);
        let g0 = c(-0.4, 1.3);
        let p = PathParams::new(g0, 7e-9, 3.0 / 8.0, -2.0 / 8.0);
        let h = synthesize_response(&cfg, &[p]).unwrap();
        let g = beamspace_transform(&h, &spec).unwrap();
        // aoa -0.25 → index (0.25)·32 = 8; aod 0.375 → 28; delay 7 ns → 28.
        assert!((g.values.get(8, 28, 28) - g0).norm() < 1e-12);
        let peak = g.values.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!((peak - g0.norm()).abs() < 1e-12);
        let analytic = single_path_grid(&p, &spec, &cfg);
        assert!((analytic.values.get(8, 28, 28) - g0).norm() < 1e-12);
    }

    #[test]
    fn two_paths_are_additive() {
        let cfg = SounderConfig::desk();
        let spec = GridSpec::uniform(2, &cfg);
        let a = PathParams::new(c(1.0, 0.2), 3.3e-9, 0.11, -0.31);
        let b = PathParams::new(c(-0.3, 0.5), 12.7e-9, -0.42, 0.05);
        let ga = beamspace_transform(&synthesize_response(&cfg, &[a]).unwrap(), &spec).unwrap();
        let gb = beamspace_transform(&synthesize_response(&cfg, &[b]).unwrap(), &spec).unwrap();
        let gab = beamspace_transform(&synthesize_response(&cfg, &[a, b]).unwrap(), &spec).unwrap();
        assert!(gab.values.max_rel_diff(&ga.values.add(&gb.values).unwrap()) < 1e-12);
    }

    #[test]
    fn zero_gain_atom_is_zero() {
        let cfg = SounderConfig::desk();
        let spec = GridSpec::uniform(2, &cfg);
        let p = PathParams::new(c(0.0, 0.0), 3e-9, 0.1, 0.1);
        assert_eq!(single_path_grid(&p, &spec, &cfg).power(), 0.0);
    }

    #[test]
    fn pdp_examples() {
        let cfg = SounderConfig::desk();
        let spec = GridSpec::uniform(1, &cfg);
        let zero = BeamspaceGrid::zeros(spec, cfg);
        let (a, b) = pdp_marginals(&zero);
        assert_eq!(a.total(), 0.0);
        assert_eq!(b.total(), 0.0);

        let p = PathParams::new(c(1.0, 0.0), 4e-9, 1.0 / 8.0, 2.0 / 8.0);
        let g = single_path_grid(&p, &spec, &cfg);
        let (a, b) = pdp_marginals(&g);
        // aoa 0.25 → row 6 of 8; aod 0.125 → col 5; delay 4 ns → col 4.
        assert!((a.get(6, 5) - 1.0).abs() < 1e-12);
        assert!((b.get(6, 4) - 1.0).abs() < 1e-12);
        let total = g.power();
        assert!((a.total() - total).abs() < 1e-12 * total);
        assert!((b.total() - total).abs() < 1e-12 * total);

        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("aoa\\aod,-0.5,-0.375,"));
        assert_eq!(text.lines().count(), 9);
    }

    proptest! {
        #[test]
        fn angle_kernel_matches_sum(delta in -3.0..3.0f64, n in 1usize..40) {
            prop_assert!((angle_kernel(delta, n) - direct_angle(delta, n)).norm() < 1e-12);
        }

        #[test]
        fn angle_kernel_periodic_and_even(delta in -2.0..2.0f64, n in 1usize..40) {
            let k = angle_kernel(delta, n);
            prop_assert!((angle_kernel(delta + 1.0, n) - k).norm() < 1e-12);
            prop_assert!((angle_kernel(-delta, n).norm() - k.norm()).abs() < 1e-12);
        }

        #[test]
        fn transform_is_linear(s in any::<u64>()) {
            let cfg = SounderConfig::new(4, 3, 1e9, 6, 1e9).unwrap();
            let spec = GridSpec::uniform(2, &cfg);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut rand_resp = || FrequencyResponse::new(cfg, Tensor3::from_fn(cfg.response_dims(), |_, _, _| {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })).unwrap();
            let (a, b) = (rand_resp(), rand_resp());
            let ab = FrequencyResponse::new(cfg, a.values.add(&b.values).unwrap()).unwrap();
            let ga = beamspace_transform(&a, &spec).unwrap();
            let gb = beamspace_transform(&b, &spec).unwrap();
            let gab = beamspace_transform(&ab, &spec).unwrap();
            prop_assert!(gab.values.max_rel_diff(&ga.values.add(&gb.values).unwrap()) < 1e-12);
        }
    }
}
