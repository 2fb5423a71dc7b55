use log::{debug, info};
use num_complex::Complex64;

use super::ls::{correlate, ls_fit, Geometry, LsFit};
use super::peak::{find_peak, residual_peak, Peak};
use crate::beamspace::{angle_kernel, beamspace_transform, delay_kernel, BeamspaceGrid, GridSpec, PathAtom};
use crate::error::{domain, Error, Result};
use crate::synth::{accumulate_paths, FrequencyResponse, PathParams};

/// Greedy matching pursuit on the beamspace grid: pick the largest entry,
/// take its value as the gain, subtract that path's exact grid response,
/// repeat. Stops early if the residual grid vanishes.
pub fn greedy_extract(response: &FrequencyResponse, spec: &GridSpec, count: usize) -> Result<Vec<PathParams>> {
    let mut grid = beamspace_transform(response, spec)?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let peak = find_peak(&grid);
        if peak.value.norm_sqr() == 0.0 {
            break;
        }
        let path = peak.to_path();
        PathAtom::accumulate(&mut grid.values, &[PathAtom::new(&path, spec, &grid.config)], -1.0);
        out.push(path);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionConfig {
    /// Total number of paths to commit.
    pub k_dom: usize,
    /// Candidates detected per outer iteration.
    pub k_g: usize,
    /// Candidates committed per outer iteration.
    pub k_up: usize,
    pub grid: GridSpec,
    /// Stop once residual power drops to this fraction of the input power.
    pub residual_stop: f64,
    /// Refit all committed amplitudes against the input at the end.
    pub final_global_ls: bool,
    /// Parabolic sub-grid interpolation of each detected peak.
    pub subgrid_refine: bool,
}

impl ExtractionConfig {
    pub const DEFAULT_K_G: usize = 4;
    pub const DEFAULT_K_UP: usize = 2;
    pub const DEFAULT_RESIDUAL_STOP: f64 = 1e-6;

    pub fn new(k_dom: usize, grid: GridSpec) -> Self {
        ExtractionConfig {
            k_dom,
            k_g: Self::DEFAULT_K_G,
            k_up: Self::DEFAULT_K_UP,
            grid,
            residual_stop: Self::DEFAULT_RESIDUAL_STOP,
            final_global_ls: true,
            subgrid_refine: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_up == 0 || self.k_up > self.k_g || self.k_g > self.k_dom {
            return domain(format!(
                "need 1 <= k_up <= k_g <= k_dom, got k_up={}, k_g={}, k_dom={}",
                self.k_up, self.k_g, self.k_dom
            ));
        }
        if !(self.residual_stop.is_finite() && self.residual_stop >= 0.0) {
            return domain(format!("residual_stop {} must be non-negative", self.residual_stop));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractionTrace {
    pub initial_power: f64,
    /// Residual power after each committed path.
    pub residual_power: Vec<f64>,
    /// `|gain|²` of each committed path.
    pub committed_gain_power: Vec<f64>,
    /// Gram condition estimate of each in-loop LS solve.
    pub ls_condition: Vec<f64>,
}

/// Current residual as seen by the greedy step: the committed-residual grid
/// and response, minus the candidates picked so far in this iteration.
struct CandidateView<'a> {
    grid: &'a BeamspaceGrid,
    response: &'a FrequencyResponse,
    atoms: &'a [PathAtom],
    candidates: &'a [PathParams],
}

impl CandidateView<'_> {
    fn grid_value(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.atoms.iter().fold(self.grid.values.get(i, j, k), |v, a| v - a.value(i, j, k))
    }

    /// Exact beamspace value of the residual at an arbitrary point.
    fn value_at(&self, aoa: f64, aod: f64, delay: f64) -> Complex64 {
        let cfg = &self.response.config;
        let d = cfg.signal_space_dimension() as f64;
        let base = correlate(self.response, &Geometry { delay, aod, aoa }) / d;
        self.candidates.iter().fold(base, |v, c| {
            v - c.gain
                * angle_kernel(c.aoa - aoa, cfg.n_rx)
                * angle_kernel(aod - c.aod, cfg.n_tx)
                * delay_kernel(delay - c.delay, cfg.bandwidth_hz, cfg.n_freq)
        })
    }

    /// Vertex offset of a parabola through three magnitudes, in grid steps.
    fn vertex(lo: f64, mid: f64, hi: f64) -> f64 {
        let curv = lo - 2.0 * mid + hi;
        if curv < 0.0 {
            (0.5 * (lo - hi) / curv).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    }

    fn refine(&self, peak: &Peak) -> PathParams {
        let [m_rx, m_tx, n_delay] = self.grid.values.dims();
        let (i, j, k) = peak.index;
        let m0 = peak.value.norm();
        let wrap = |x: usize, n: usize, up: bool| if up { (x + 1) % n } else { (x + n - 1) % n };
        let d_aoa = Self::vertex(
            self.grid_value(wrap(i, m_rx, false), j, k).norm(),
            m0,
            self.grid_value(wrap(i, m_rx, true), j, k).norm(),
        );
        let d_aod = Self::vertex(
            self.grid_value(i, wrap(j, m_tx, false), k).norm(),
            m0,
            self.grid_value(i, wrap(j, m_tx, true), k).norm(),
        );
        let d_delay = if k > 0 && k + 1 < n_delay {
            Self::vertex(self.grid_value(i, j, k - 1).norm(), m0, self.grid_value(i, j, k + 1).norm())
        } else {
            0.0
        };
        let fold = |x: f64| {
            let w = x - x.round();
            if w >= 0.5 {
                w - 1.0
            } else {
                w
            }
        };
        let aoa = fold(peak.aoa + d_aoa / m_rx as f64);
        let aod = fold(peak.aod + d_aod / m_tx as f64);
        let step = self.grid.spec.delay_step(&self.grid.config);
        let delay = (peak.delay + d_delay * step).max(0.0);
        PathParams::new(self.value_at(aoa, aod, delay), delay, aod, aoa)
    }
}

/// LS fit that drops the later column of each near-duplicate pair until
/// the Gram matrix is well conditioned.
fn fit_dropping_duplicates(
    response: &FrequencyResponse,
    mut geometry: Vec<Geometry>,
) -> Result<(Vec<Geometry>, LsFit)> {
    loop {
        match ls_fit(response, &geometry) {
            Ok(fit) => return Ok((geometry, fit)),
            Err(Error::DegenerateGeometry { first, second, condition }) => {
                debug!("dropping column {second} (collinear with {first}, condition {condition:e})");
                geometry.remove(second);
            }
            Err(e) => return Err(e),
        }
    }
}

/// Subtracts `path` from `residual` if that does not raise the residual
/// power. Falls back to the single-column projection amplitude otherwise.
/// Returns the path actually subtracted and the new residual power.
fn commit_path(residual: &mut FrequencyResponse, path: PathParams, current: f64) -> Option<(PathParams, f64)> {
    let cfg = residual.config;
    let trial = |p: &PathParams| {
        let mut r = residual.clone();
        accumulate_paths(&mut r.values, std::slice::from_ref(p), &cfg, -1.0);
        let pw = r.power();
        (r, pw)
    };
    let (r, pw) = trial(&path);
    if pw <= current {
        *residual = r;
        return Some((path, pw));
    }
    let d = cfg.signal_space_dimension() as f64;
    let projected = path.with_gain(correlate(residual, &Geometry::from(&path)) / d);
    debug!("amplitude {} would raise the residual, projecting to {}", path.gain, projected.gain);
    let (r, pw) = trial(&projected);
    if pw <= current {
        *residual = r;
        Some((projected, pw))
    } else {
        None
    }
}

/// Greedy matching pursuit with in-loop least-squares amplitude refits.
///
/// Each outer iteration detects `k_g` candidates by greedy peak picking on
/// the current residual grid, refits their amplitudes jointly against the
/// current residual response, and commits the `k_up` strongest. Discarded
/// candidates leave no trace in the residual.
pub fn greedy_ls(response: &FrequencyResponse, xcfg: &ExtractionConfig) -> Result<(Vec<PathParams>, ExtractionTrace)> {
    xcfg.validate()?;
    let cfg = response.config;
    let spec = xcfg.grid;
    spec.validate(&cfg)?;

    let initial = response.power();
    let mut trace = ExtractionTrace { initial_power: initial, ..Default::default() };
    if initial == 0.0 {
        return Ok((Vec::new(), trace));
    }

    let mut residual = response.clone();
    let mut residual_power = initial;
    let mut grid = beamspace_transform(response, &spec)?;
    let mut committed: Vec<PathParams> = Vec::with_capacity(xcfg.k_dom);

    'outer: while committed.len() < xcfg.k_dom {
        if residual_power <= xcfg.residual_stop * initial {
            debug!("residual at {:e} of input power, stopping", residual_power / initial);
            break;
        }

        let mut candidates: Vec<PathParams> = Vec::with_capacity(xcfg.k_g);
        let mut atoms: Vec<PathAtom> = Vec::with_capacity(xcfg.k_g);
        for _ in 0..xcfg.k_g {
            let peak = residual_peak(&grid, &atoms);
            if peak.value.norm_sqr() == 0.0 {
                break;
            }
            let path = if xcfg.subgrid_refine {
                CandidateView { grid: &grid, response: &residual, atoms: &atoms, candidates: &candidates }.refine(&peak)
            } else {
                peak.to_path()
            };
            atoms.push(PathAtom::new(&path, &spec, &cfg));
            candidates.push(path);
        }
        if candidates.is_empty() {
            break;
        }

        let geometry: Vec<Geometry> = candidates.iter().map(Geometry::from).collect();
        let (geometry, fit) = fit_dropping_duplicates(&residual, geometry)?;
        trace.ls_condition.push(fit.condition);

        let mut order: Vec<usize> = (0..geometry.len()).collect();
        order.sort_by(|&a, &b| fit.amplitudes[b].norm_sqr().total_cmp(&fit.amplitudes[a].norm_sqr()));
        let take = xcfg.k_up.min(xcfg.k_dom - committed.len());

        let mut subtracted = Vec::with_capacity(take);
        for &c in order.iter().take(take) {
            let path = geometry[c].with_gain(fit.amplitudes[c]);
            match commit_path(&mut residual, path, residual_power) {
                Some((p, pw)) => {
                    residual_power = pw;
                    trace.residual_power.push(pw);
                    trace.committed_gain_power.push(p.power());
                    subtracted.push(PathAtom::new(&p, &spec, &cfg));
                    committed.push(p);
                }
                None => {
                    info!("residual cannot be reduced further at {:e}, stopping", residual_power);
                    PathAtom::accumulate(&mut grid.values, &subtracted, -1.0);
                    break 'outer;
                }
            }
        }
        PathAtom::accumulate(&mut grid.values, &subtracted, -1.0);
    }

    if xcfg.final_global_ls && !committed.is_empty() {
        committed = global_refit(response, committed, residual_power)?;
    }
    Ok((committed, trace))
}

/// Refits every committed amplitude against the full measurement. Paths at
/// identical geometries are merged first; the refit is kept only if it does
/// not increase the residual.
fn global_refit(
    response: &FrequencyResponse,
    committed: Vec<PathParams>,
    residual_power: f64,
) -> Result<Vec<PathParams>> {
    let mut merged: Vec<PathParams> = Vec::with_capacity(committed.len());
    for p in committed.iter() {
        match merged.iter_mut().find(|m| Geometry::from(&**m) == Geometry::from(p)) {
            Some(m) => m.gain += p.gain,
            None => merged.push(*p),
        }
    }
    let geometry: Vec<Geometry> = merged.iter().map(Geometry::from).collect();
    let (geometry, fit) = fit_dropping_duplicates(response, geometry)?;
    let refit: Vec<PathParams> = geometry.iter().zip(&fit.amplitudes).map(|(g, a)| g.with_gain(*a)).collect();
    let mut check = response.clone();
    accumulate_paths(&mut check.values, &refit, &response.config, -1.0);
    let refit_power = check.power();
    debug!(
        "global LS over {} paths (condition {:e}): residual {:e} -> {:e}",
        refit.len(),
        fit.condition,
        residual_power,
        refit_power
    );
    Ok(if refit_power <= residual_power { refit } else { committed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{reconstruct, reconstruction_error};
    use crate::synth::{synthesize_response, SounderConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn bins(p: &PathParams, cfg: &SounderConfig) -> (f64, f64, f64) {
        (p.delay * cfg.bandwidth_hz, p.aod * cfg.n_tx as f64, p.aoa * cfg.n_rx as f64)
    }

    #[test]
    fn greedy_recovers_single_on_grid_path() {
        let cfg = SounderConfig::desk();
        let spec = GridSpec::uniform(4, &cfg);
        let p = PathParams::new(c(0.6, -0.9), 13e-9, -3.0 / 8.0, 2.0 / 8.0);
        let h = synthesize_response(&cfg, &[p]).unwrap();
        let est = greedy_extract(&h, &spec, 1).unwrap();
        assert_eq!(est.len(), 1);
        assert!((est[0].gain - p.gain).norm() < 1e-9);
        let (a, b) = (bins(&est[0], &cfg), bins(&p, &cfg));
        assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9 && (a.2 - b.2).abs() < 1e-9);
    }

    #[test]
    fn greedy_orders_by_power() {
        let cfg = SounderConfig::desk();
        let spec = GridSpec::uniform(4, &cfg);
        let strong = PathParams::new(c(1.0, 0.0), 4e-9, 0.0, 0.25);
        let weak = PathParams::new(c(0.0, 0.1), 10e-9, -0.25, -0.125);
        let h = synthesize_response(&cfg, &[weak, strong]).unwrap();
        let est = greedy_extract(&h, &spec, 2).unwrap();
        assert!((est[0].gain - strong.gain).norm() < 1e-9);
        assert!((est[1].gain - weak.gain).norm() < 1e-9);
        assert!((est[1].aod - weak.aod).abs() < 1e-12);
    }

    #[test]
    fn greedy_on_zero_response_stops() {
        let cfg = SounderConfig::desk();
        let spec = GridSpec::uniform(2, &cfg);
        let est = greedy_extract(&FrequencyResponse::zeros(cfg), &spec, 3).unwrap();
        assert!(est.is_empty());
    }

    #[test]
    fn config_validation() {
        let cfg = SounderConfig::desk();
        let mut x = ExtractionConfig::new(8, GridSpec::uniform(4, &cfg));
        assert!(x.validate().is_ok());
        x.k_up = 5;
        assert!(x.validate().is_err());
        x.k_up = 2;
        x.k_dom = 3;
        assert!(x.validate().is_err());
    }

    #[test]
    fn greedy_ls_zero_response() {
        let cfg = SounderConfig::desk();
        let x = ExtractionConfig::new(4, GridSpec::uniform(4, &cfg));
        let (paths, trace) = greedy_ls(&FrequencyResponse::zeros(cfg), &x).unwrap();
        assert!(paths.is_empty());
        assert!(trace.residual_power.is_empty());
    }

    #[test]
    fn greedy_ls_recovers_five_on_grid_paths() {
        let cfg = SounderConfig::desk();
        let truth = [
            PathParams::new(c(1.0, 0.0), 2e-9, -0.5, 0.25),
            PathParams::new(c(0.0, -0.7), 5e-9, -0.25, -0.125),
            PathParams::new(c(0.3, 0.4), 9e-9, 0.0, 0.375),
            PathParams::new(c(-0.2, 0.1), 14e-9, 0.25, -0.5),
            PathParams::new(c(0.05, -0.08), 20e-9, 0.375, 0.0),
        ];
        let h = synthesize_response(&cfg, &truth).unwrap();
        let x = ExtractionConfig::new(5, GridSpec::uniform(4, &cfg));
        let (est, trace) = greedy_ls(&h, &x).unwrap();
        assert_eq!(est.len(), 5);
        for t in &truth {
            let e = est.iter().min_by(|a, b| (a.delay - t.delay).abs().total_cmp(&(b.delay - t.delay).abs())).unwrap();
            assert!((e.gain - t.gain).norm() < 1e-9);
            let (a, b) = (bins(e, &cfg), bins(t, &cfg));
            assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9 && (a.2 - b.2).abs() < 1e-9);
        }
        assert!(*trace.residual_power.last().unwrap() <= 1e-12 * trace.initial_power);
        assert!(trace.residual_power.windows(2).all(|w| w[1] <= w[0]));
        let err = reconstruction_error(&reconstruct(&est, &cfg).unwrap(), &h).unwrap();
        assert!(err < 1e-10);
    }

    #[test]
    fn off_grid_residual_is_monotone_and_subgrid_helps() {
        let cfg = SounderConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let truth: Vec<PathParams> = (0..6)
            .map(|_| {
                PathParams::new(
                    Complex64::from_polar(rng.random_range(0.1..1.0), rng.random_range(0.0..6.0)),
                    rng.random_range(0.0..25e-9),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                )
            })
            .collect();
        let h = synthesize_response(&cfg, &truth).unwrap();
        let mut x = ExtractionConfig::new(12, GridSpec::uniform(4, &cfg));
        let mut errs = Vec::new();
        for refine in [false, true] {
            x.subgrid_refine = refine;
            let (est, trace) = greedy_ls(&h, &x).unwrap();
            assert!(trace.residual_power.windows(2).all(|w| w[1] <= w[0]));
            assert!(trace.residual_power[0] <= trace.initial_power);
            errs.push(reconstruction_error(&reconstruct(&est, &cfg).unwrap(), &h).unwrap());
        }
        assert!(errs[0] < 0.05, "grid-quantized error {}", errs[0]);
        assert!(errs[1] < errs[0], "sub-grid refinement {} vs {}", errs[1], errs[0]);
    }

    #[test]
    fn global_ls_never_hurts() {
        let cfg = SounderConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let truth: Vec<PathParams> = (0..5)
            .map(|_| {
                PathParams::new(
                    Complex64::from_polar(rng.random_range(0.1..1.0), rng.random_range(0.0..6.0)),
                    rng.random_range(0.0..25e-9),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                )
            })
            .collect();
        let h = synthesize_response(&cfg, &truth).unwrap();
        let mut x = ExtractionConfig::new(10, GridSpec::uniform(4, &cfg));
        x.final_global_ls = false;
        let (a, _) = greedy_ls(&h, &x).unwrap();
        x.final_global_ls = true;
        let (b, _) = greedy_ls(&h, &x).unwrap();
        let ea = reconstruction_error(&reconstruct(&a, &cfg).unwrap(), &h).unwrap();
        let eb = reconstruction_error(&reconstruct(&b, &cfg).unwrap(), &h).unwrap();
        assert!(eb <= ea * (1.0 + 1e-12), "{eb} > {ea}");
    }
}
