//! Scoring estimated paths against ground truth: resolution-normalized
//! geometric costs, optimal one-to-one association and resolution-bin
//! membership.

use std::io::Write;

use crate::assignment::assign;
use crate::error::{domain, Result};
use crate::synth::PathParams;

/// Rounding slack on the resolution-bin test, in bins.
const BIN_EDGE_SLACK: f64 = 1e-9;

pub const DEFAULT_UNMATCHED_COST: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionSpec {
    pub delay_res: f64,
    pub aoa_res: f64,
    pub aod_res: f64,
}

impl ResolutionSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("delay", self.delay_res), ("aoa", self.aoa_res), ("aod", self.aod_res)] {
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("{name} resolution {v} must be positive"));
            }
        }
        Ok(())
    }
}

/// Spatial-frequency difference folded onto the principal period.
#[inline]
fn wrap_angle(d: f64) -> f64 {
    let w = d - d.round();
    if w == -0.5 {
        0.5
    } else {
        w
    }
}

/// Signed per-axis errors `est − phys` in resolution bins: (delay, aoa, aod).
pub fn normalized_errors(phys: &PathParams, est: &PathParams, res: &ResolutionSpec) -> (f64, f64, f64) {
    (
        (est.delay - phys.delay) / res.delay_res,
        wrap_angle(est.aoa - phys.aoa) / res.aoa_res,
        wrap_angle(est.aod - phys.aod) / res.aod_res,
    )
}

/// Sum of squared per-axis errors measured in resolution bins.
pub fn pairwise_cost(phys: &PathParams, est: &PathParams, res: &ResolutionSpec) -> f64 {
    let (d, r, t) = normalized_errors(phys, est, res);
    d * d + r * r + t * t
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociatedPair {
    pub phys: usize,
    pub est: usize,
    pub cost: f64,
    pub delay_err_bins: f64,
    pub aoa_err_bins: f64,
    pub aod_err_bins: f64,
}

/// Indices into [`AssociationResult::pairs`] whose errors are within one
/// resolution bin on the respective axis.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BinSets {
    pub delay: Vec<usize>,
    pub aoa: Vec<usize>,
    pub aod: Vec<usize>,
    pub joint: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationResult {
    pub pairs: Vec<AssociatedPair>,
    pub unmatched_phys: Vec<usize>,
    pub unmatched_est: Vec<usize>,
    pub pre_pa_cost: f64,
    pub post_pa_cost: f64,
    pub bin_sets: BinSets,
}

impl AssociationResult {
    pub fn k_pa(&self) -> usize {
        self.pairs.len()
    }

    /// `phys_idx,est_idx,cost,delay_err_bins,aoa_err_bins,aod_err_bins,in_joint`
    pub fn write_pairs_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "phys_idx,est_idx,cost,delay_err_bins,aoa_err_bins,aod_err_bins,in_joint")?;
        for (k, p) in self.pairs.iter().enumerate() {
            let joint = self.bin_sets.joint.binary_search(&k).is_ok();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                p.phys, p.est, p.cost, p.delay_err_bins, p.aoa_err_bins, p.aod_err_bins, joint
            )?;
        }
        Ok(())
    }
}

/// Power share of each physical path in the total physical power.
fn power_weights(phys: &[PathParams]) -> Vec<f64> {
    let total: f64 = phys.iter().map(PathParams::power).sum();
    if total > 0.0 {
        phys.iter().map(|p| p.power() / total).collect()
    } else {
        vec![1.0 / phys.len() as f64; phys.len()]
    }
}

fn by_descending_power(paths: &[PathParams]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..paths.len()).collect();
    idx.sort_by(|&a, &b| paths[b].power().total_cmp(&paths[a].power()));
    idx
}

pub fn associate(
    phys: &[PathParams],
    est: &[PathParams],
    res: &ResolutionSpec,
    unmatched_cost: f64,
) -> Result<AssociationResult> {
    res.validate()?;
    if phys.is_empty() || est.is_empty() {
        return domain("association needs non-empty physical and estimated path lists");
    }
    let costs: Vec<Vec<f64>> =
        crate::parallel::map_range(phys.len(), |i| est.iter().map(|e| pairwise_cost(&phys[i], e, res)).collect());
    let assignment = assign(&costs, unmatched_cost)?;
    let weight = power_weights(phys);

    let pairs: Vec<AssociatedPair> = assignment
        .pairs
        .iter()
        .map(|&(p, q)| {
            let (d, r, t) = normalized_errors(&phys[p], &est[q], res);
            AssociatedPair { phys: p, est: q, cost: costs[p][q], delay_err_bins: d, aoa_err_bins: r, aod_err_bins: t }
        })
        .collect();
    let post_pa_cost = pairs.iter().map(|p| p.cost * weight[p.phys]).sum();

    let k_pa = pairs.len();
    let pre_pa_cost = by_descending_power(phys)
        .into_iter()
        .zip(by_descending_power(est))
        .take(k_pa)
        .map(|(p, q)| pairwise_cost(&phys[p], &est[q], res) * weight[p])
        .sum();

    let within = |x: f64| x.abs() <= 1.0 + BIN_EDGE_SLACK;
    let mut bins = BinSets::default();
    for (k, p) in pairs.iter().enumerate() {
        let (d, r, t) = (within(p.delay_err_bins), within(p.aoa_err_bins), within(p.aod_err_bins));
        if d {
            bins.delay.push(k);
        }
        if r {
            bins.aoa.push(k);
        }
        if t {
            bins.aod.push(k);
        }
        if d && r && t {
            bins.joint.push(k);
        }
    }

    Ok(AssociationResult {
        pairs,
        unmatched_phys: assignment.unmatched_rows,
        unmatched_est: assignment.unmatched_cols,
        pre_pa_cost,
        post_pa_cost,
        bin_sets: bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::tests::brute_force;
    use crate::synth::SounderConfig;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn res() -> ResolutionSpec {
        SounderConfig::desk().resolution()
    }

    fn random_paths(rng: &mut ChaCha8Rng, n: usize) -> Vec<PathParams> {
        (0..n)
            .map(|_| {
                PathParams::new(
                    Complex64::from_polar(rng.random_range(0.01..1.0), rng.random_range(0.0..6.0)),
                    rng.random_range(0.0..30e-9),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                )
            })
            .collect()
    }

    #[test]
    fn cost_examples() {
        let r = res();
        let p = PathParams::new(Complex64::new(1.0, 0.0), 5e-9, 0.1, -0.2);
        assert_eq!(pairwise_cost(&p, &p, &r), 0.0);
        let d = PathParams { delay: 6e-9, ..p };
        assert!((pairwise_cost(&p, &d, &r) - 1.0).abs() < 1e-9);
        let all = PathParams { delay: 6e-9, aod: 0.1 + r.aod_res, aoa: -0.2 - r.aoa_res, ..p };
        assert!((pairwise_cost(&p, &all, &r) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn angle_errors_wrap() {
        let r = res();
        let a = PathParams::new(Complex64::new(1.0, 0.0), 0.0, 0.49, -0.49);
        let b = PathParams { aod: -0.49, aoa: 0.49, ..a };
        let (_, aoa, aod) = normalized_errors(&a, &b, &r);
        assert!((aoa + 0.02 * 8.0).abs() < 1e-9);
        assert!((aod - 0.02 * 8.0).abs() < 1e-9);
    }

    #[test]
    fn identical_lists() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phys = random_paths(&mut rng, 12);
        let out = associate(&phys, &phys, &res(), 3.0).unwrap();
        assert_eq!(out.k_pa(), 12);
        assert_eq!(out.post_pa_cost, 0.0);
        assert_eq!(out.bin_sets.joint.len(), 12);
        assert!(out.pairs.iter().all(|p| p.phys == p.est));
    }

    #[test]
    fn two_bin_delay_shift_empties_delay_set() {
        let r = res();
        let phys = vec![
            PathParams::new(Complex64::new(1.0, 0.0), 2e-9, 0.0, 0.0),
            PathParams::new(Complex64::new(0.5, 0.0), 20e-9, 0.25, -0.25),
        ];
        let est: Vec<_> = phys.iter().map(|p| PathParams { delay: p.delay + 2.0 * r.delay_res, ..*p }).collect();
        let out = associate(&phys, &est, &r, 10.0).unwrap();
        assert_eq!(out.k_pa(), 2);
        assert!(out.bin_sets.delay.is_empty());
        assert_eq!(out.bin_sets.aoa, vec![0, 1]);
        assert_eq!(out.bin_sets.aod, vec![0, 1]);
        assert!(out.bin_sets.joint.is_empty());

        let one: Vec<_> = phys.iter().map(|p| PathParams { delay: p.delay + r.delay_res, ..*p }).collect();
        let out = associate(&phys, &one, &r, 10.0).unwrap();
        assert_eq!(out.bin_sets.delay, vec![0, 1]);
    }

    #[test]
    fn spurious_estimates_are_ignored() {
        let r = res();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        // Ten well-separated truths on a coarse lattice.
        let phys: Vec<_> = (0..10)
            .map(|n| {
                PathParams::new(
                    Complex64::from_polar(1.0 / (n + 1) as f64, n as f64),
                    (3 * n) as f64 * 1e-9,
                    -0.45 + 0.09 * n as f64,
                    0.45 - 0.09 * n as f64,
                )
            })
            .collect();
        let mut est = Vec::new();
        for p in &phys {
            est.push(PathParams {
                delay: p.delay + rng.random_range(0.0..0.1) * r.delay_res,
                aod: p.aod + rng.random_range(-0.07..0.07) * r.aod_res,
                aoa: p.aoa + rng.random_range(-0.07..0.07) * r.aoa_res,
                gain: p.gain * 0.9,
            });
            // Far away in delay from every truth.
            est.push(PathParams::new(Complex64::new(2.0, 0.0), 31e-9 + rng.random_range(0.0..1e-9), 0.0, 0.0));
        }
        let out = associate(&phys, &est, &r, 9.0).unwrap();
        assert_eq!(out.k_pa(), 10);
        for p in &out.pairs {
            assert_eq!(p.est, 2 * p.phys);
        }
        assert_eq!(out.unmatched_est.len(), 10);
        assert!(out.post_pa_cost <= out.pre_pa_cost);

        let costs: Vec<Vec<f64>> = phys.iter().map(|p| est.iter().map(|e| pairwise_cost(p, e, &r)).collect()).collect();
        let matched: f64 = out.pairs.iter().map(|p| p.cost).sum();
        let total = matched + 9.0 * (out.unmatched_phys.len() + out.unmatched_est.len()) as f64;
        // Brute force on a 7x7 corner keeps enumeration small; the full
        // problem is checked against the assignment total directly.
        let corner: Vec<Vec<f64>> = costs[..7].iter().map(|r| r[..7].to_vec()).collect();
        let a = assign(&corner, 9.0).unwrap();
        assert!((a.total_cost - brute_force(&corner, 9.0)).abs() < 1e-9);
        assert!((assign(&costs, 9.0).unwrap().total_cost - total).abs() < 1e-9);
    }

    #[test]
    fn pairs_csv_header() {
        let p = vec![PathParams::new(Complex64::new(1.0, 0.0), 0.0, 0.0, 0.0)];
        let out = associate(&p, &p, &res(), 3.0).unwrap();
        let mut buf = Vec::new();
        out.write_pairs_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "phys_idx,est_idx,cost,delay_err_bins,aoa_err_bins,aod_err_bins,in_joint\n0,0,0,0,0,0,true\n"
        );
    }

    #[test]
    fn empty_inputs_rejected() {
        let p = vec![PathParams::new(Complex64::new(1.0, 0.0), 0.0, 0.0, 0.0)];
        assert!(associate(&[], &p, &res(), 3.0).is_err());
        assert!(associate(&p, &[], &res(), 3.0).is_err());
    }

    proptest! {
        #[test]
        fn structural_invariants(seed in any::<u64>(), n in 1usize..9, m in 1usize..9, um in 0.5..6.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phys = random_paths(&mut rng, n);
            let est = random_paths(&mut rng, m);
            let out = associate(&phys, &est, &res(), um).unwrap();
            prop_assert!(out.k_pa() <= n.min(m));
            let mut ps: Vec<_> = out.pairs.iter().map(|p| p.phys).collect();
            let mut qs: Vec<_> = out.pairs.iter().map(|p| p.est).collect();
            ps.sort(); ps.dedup(); qs.sort(); qs.dedup();
            prop_assert_eq!(ps.len(), out.k_pa());
            prop_assert_eq!(qs.len(), out.k_pa());
            let b = &out.bin_sets;
            let joint: Vec<usize> = b.delay.iter().copied()
                .filter(|k| b.aoa.contains(k) && b.aod.contains(k)).collect();
            prop_assert_eq!(&joint, &b.joint);
        }

        #[test]
        fn common_gain_scaling_is_invisible(seed in any::<u64>(), scale in 0.01..100.0f64, phase in 0.0..6.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phys = random_paths(&mut rng, 6);
            let est = random_paths(&mut rng, 7);
            let s = Complex64::from_polar(scale, phase);
            let scaled_p: Vec<_> = phys.iter().map(|p| p.with_gain(p.gain * s)).collect();
            let scaled_e: Vec<_> = est.iter().map(|p| p.with_gain(p.gain * s)).collect();
            let a = associate(&phys, &est, &res(), 3.0).unwrap();
            let b = associate(&scaled_p, &scaled_e, &res(), 3.0).unwrap();
            prop_assert_eq!(&a.pairs, &b.pairs);
            prop_assert_eq!(&a.bin_sets, &b.bin_sets);
            if a.pre_pa_cost > 0.0 {
                let ra = a.post_pa_cost / a.pre_pa_cost;
                let rb = b.post_pa_cost / b.pre_pa_cost;
                prop_assert!((ra - rb).abs() <= 1e-9 * ra.abs().max(1.0));
            }
        }
    }
}
