use log::debug;

use super::ls::{correlate, Geometry};
use super::peak::residual_peak;
use super::{reconstruct, reconstruction_error};
use crate::beamspace::{beamspace_transform, GridSpec, PathAtom};
use crate::error::{domain, Result};
use crate::synth::{accumulate_paths, FrequencyResponse, PathParams};

// An update must reduce the residual by at least this fraction of the
// measurement power, so rounding noise never counts as progress.
const IMPROVEMENT_MARGIN: f64 = 1e-12;

/// Path-wise expectation/maximization refinement.
///
/// For each path the other paths are removed from the measurement and the
/// path is re-estimated from the beamspace peak of what remains. The peak
/// replaces the current estimate only when it explains strictly more of the
/// isolated response than the current geometry with its best amplitude, so
/// the reconstruction error never grows and exact inputs are left alone.
/// Changes smaller than a `1e-12` fraction of the measurement power are
/// ignored.
///
/// Returns the refined paths and the reconstruction error after each sweep.
pub fn sage_refine(
    response: &FrequencyResponse,
    paths: &[PathParams],
    spec: &GridSpec,
    sweeps: usize,
) -> Result<(Vec<PathParams>, Vec<f64>)> {
    if paths.is_empty() {
        return domain("SAGE needs at least one initial path");
    }
    if sweeps == 0 {
        return domain("SAGE needs at least one sweep");
    }
    let cfg = response.config;
    spec.validate(&cfg)?;
    let d = cfg.signal_space_dimension() as f64;
    let threshold = IMPROVEMENT_MARGIN * response.power();

    let mut paths = paths.to_vec();
    let mut residual = response.clone();
    accumulate_paths(&mut residual.values, &paths, &cfg, -1.0);
    let mut grid = beamspace_transform(&residual, spec)?;
    let mut errors = Vec::with_capacity(sweeps);

    for sweep in 0..sweeps {
        let mut replaced = 0;
        for slot in paths.iter_mut() {
            let old = *slot;
            // E-step: residual plus this path, evaluated lazily on the grid.
            let restore = PathAtom::new(&old.with_gain(-old.gain), spec, &cfg);
            let peak = residual_peak(&grid, std::slice::from_ref(&restore));
            let b = correlate(&residual, &Geometry::from(&old)) + old.gain * d;
            // Residual reduction relative to the residual-plus-k response.
            let current = 2.0 * (old.gain.conj() * b).re - old.gain.norm_sqr() * d;
            let regained = b.norm_sqr() / d;
            let moved = peak.value.norm_sqr() * d;
            let new = if moved > current.max(regained) + threshold {
                replaced += 1;
                peak.to_path()
            } else if regained > current + threshold {
                old.with_gain(b / d)
            } else {
                continue;
            };
            accumulate_paths(&mut residual.values, &[old], &cfg, 1.0);
            accumulate_paths(&mut residual.values, &[new], &cfg, -1.0);
            PathAtom::accumulate(&mut grid.values, &[restore, PathAtom::new(&new, spec, &cfg)], -1.0);
            *slot = new;
        }
        let err = reconstruction_error(&reconstruct(&paths, &cfg)?, response)?;
        debug!("sweep {sweep}: {replaced} paths moved, error {err:e}");
        errors.push(err);
    }
    Ok((paths, errors))
}
