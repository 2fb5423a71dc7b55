//! Multipath component estimation on top of the beamspace grid.

mod greedy;
mod ls;
mod peak;
mod sage;

pub use greedy::{greedy_extract, greedy_ls, ExtractionConfig, ExtractionTrace};
pub use ls::{correlate, gram_matrix, ls_amplitudes, ls_fit, Geometry, LsFit, MAX_CONDITION};
pub use peak::{find_peak, residual_peak, Peak};
pub use sage::sage_refine;

use crate::error::{domain, Result};
use crate::synth::{synthesize_response, FrequencyResponse, PathParams, SounderConfig};
use crate::tensor::Tensor3;

/// Response of an estimated path list; same model as the synthesizer.
pub fn reconstruct(paths: &[PathParams], config: &SounderConfig) -> Result<FrequencyResponse> {
    synthesize_response(config, paths)
}

/// Mean squared Frobenius deviation over the frequency samples, normalized
/// by the mean squared Frobenius norm of `truth`.
pub fn reconstruction_error(estimate: &FrequencyResponse, truth: &FrequencyResponse) -> Result<f64> {
    estimate.values.ensure_dims(truth.values.dims())?;
    let truth_power = truth.power();
    if truth_power == 0.0 {
        return domain("reconstruction error is undefined for a zero-power reference");
    }
    Ok(residual_power(&estimate.values, &truth.values) / truth_power)
}

pub(crate) fn residual_power(a: &Tensor3, b: &Tensor3) -> f64 {
    let diffs: Vec<f64> = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).norm_sqr()).collect();
    crate::parallel::sum_by(&diffs, |d| *d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn error_examples() {
        let cfg = SounderConfig::desk();
        let p = PathParams::new(Complex64::new(1.0, -0.4), 3.2e-9, 0.1, 0.3);
        let h = reconstruct(&[p], &cfg).unwrap();
        assert_eq!(reconstruction_error(&h, &h).unwrap(), 0.0);
        let zero = FrequencyResponse::zeros(cfg);
        assert!((reconstruction_error(&zero, &h).unwrap() - 1.0).abs() < 1e-15);
        let scaled = FrequencyResponse::new(cfg, h.values.scale(Complex64::new(0.9, 0.0))).unwrap();
        assert!((reconstruction_error(&scaled, &h).unwrap() - 0.01).abs() < 1e-12);
        assert!(reconstruction_error(&h, &zero).is_err());
        let other = FrequencyResponse::zeros(SounderConfig { n_tx: 2, ..cfg });
        assert!(reconstruction_error(&other, &h).is_err());
    }

    #[test]
    fn reconstruct_is_synthesis() {
        let cfg = SounderConfig::desk();
        let ps = [
            PathParams::new(Complex64::new(1.0, -0.4), 3.2e-9, 0.1, 0.3),
            PathParams::new(Complex64::new(0.2, 0.1), 13.0e-9, -0.4, 0.0),
        ];
        assert_eq!(reconstruct(&ps, &cfg).unwrap(), synthesize_response(&cfg, &ps).unwrap());
        assert_eq!(reconstruct(&[], &cfg).unwrap().power(), 0.0);
    }
}
