//! Seeded clustered scenarios used as ground truth.
//!
//! Per cluster `c` (explicit centers override the uniform draws):
//! - center delay ~ U(center_delay_range_s), center angles ~ U(-angle_limit, angle_limit),
//!   cluster power ~ U(-cluster_power_range_db, 0) dB
//!
//! Per path in cluster `c`:
//! - delay = center + |N(0, delay_spread_s)|, redrawn until below `max_delay_s`
//! - aod, aoa = center + N(0, spread), redrawn until inside [-0.5, 0.5)
//! - power (dB) = cluster power - decay · excess delay (ns) + N(0, path_power_spread_db)
//! - phase ~ U(0, 2π)
//!
//! Draws happen in exactly this order from a ChaCha8 stream seeded with `seed`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::synth::{filter_by_dynamic_range, PathParams};

const MAX_REDRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterCenter {
    pub delay_s: f64,
    pub aod: f64,
    pub aoa: f64,
    #[serde(default)]
    pub power_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub n_clusters: usize,
    pub paths_per_cluster: usize,
    pub dynamic_range_db: f64,
    #[serde(default)]
    pub seed: u64,
    /// Generated delays stay strictly below this.
    pub max_delay_s: f64,
    #[serde(default = "default_delay_range")]
    pub center_delay_range_s: [f64; 2],
    #[serde(default = "default_angle_limit")]
    pub angle_limit: f64,
    #[serde(default = "default_cluster_power_range")]
    pub cluster_power_range_db: f64,
    #[serde(default = "default_delay_spread")]
    pub delay_spread_s: f64,
    #[serde(default = "default_angle_spread")]
    pub aod_spread: f64,
    #[serde(default = "default_angle_spread")]
    pub aoa_spread: f64,
    #[serde(default = "default_path_power_spread")]
    pub path_power_spread_db: f64,
    #[serde(default = "default_decay")]
    pub intra_cluster_decay_db_per_ns: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<ClusterCenter>>,
}

fn default_delay_range() -> [f64; 2] {
    [10e-9, 150e-9]
}
fn default_angle_limit() -> f64 {
    0.45
}
fn default_cluster_power_range() -> f64 {
    30.0
}
fn default_delay_spread() -> f64 {
    5e-9
}
fn default_angle_spread() -> f64 {
    0.02
}
fn default_path_power_spread() -> f64 {
    3.0
}
fn default_decay() -> f64 {
    0.5
}

/// Generated paths before and after the dynamic-range filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub generated: Vec<PathParams>,
    pub retained: Vec<PathParams>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 || self.paths_per_cluster == 0 {
            return domain("scenario is empty: n_clusters and paths_per_cluster must be positive");
        }
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                domain(format!("{name} = {v} must be positive"))
            }
        };
        let non_negative = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                domain(format!("{name} = {v} must be non-negative"))
            }
        };
        positive("dynamic_range_db", self.dynamic_range_db)?;
        positive("max_delay_s", self.max_delay_s)?;
        non_negative("cluster_power_range_db", self.cluster_power_range_db)?;
        non_negative("delay_spread_s", self.delay_spread_s)?;
        non_negative("aod_spread", self.aod_spread)?;
        non_negative("aoa_spread", self.aoa_spread)?;
        non_negative("path_power_spread_db", self.path_power_spread_db)?;
        non_negative("intra_cluster_decay_db_per_ns", self.intra_cluster_decay_db_per_ns)?;
        if !(self.angle_limit > 0.0 && self.angle_limit <= 0.5) {
            return domain(format!("angle_limit {} must lie in (0, 0.5]", self.angle_limit));
        }
        let [lo, hi] = self.center_delay_range_s;
        if !(lo >= 0.0 && lo <= hi && hi < self.max_delay_s) {
            return domain(format!("center_delay_range_s [{lo}, {hi}] must satisfy 0 <= lo <= hi < max_delay_s"));
        }
        if let Some(centers) = &self.centers {
            if centers.len() != self.n_clusters {
                return domain(format!("{} centers given for {} clusters", centers.len(), self.n_clusters));
            }
            for (i, c) in centers.iter().enumerate() {
                if !(c.delay_s >= 0.0 && c.delay_s < self.max_delay_s)
                    || !(-0.5..0.5).contains(&c.aod)
                    || !(-0.5..0.5).contains(&c.aoa)
                    || !c.power_db.is_finite()
                {
                    return domain(format!("cluster center {i} out of range: {c:?}"));
                }
            }
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Scenario> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let delay_dist = normal(self.delay_spread_s)?;
        let aod_dist = normal(self.aod_spread)?;
        let aoa_dist = normal(self.aoa_spread)?;
        let power_dist = normal(self.path_power_spread_db)?;
        let lim = self.angle_limit;
        let [lo, hi] = self.center_delay_range_s;

        let mut generated = Vec::with_capacity(self.n_clusters * self.paths_per_cluster);
        for c in 0..self.n_clusters {
            let center = match &self.centers {
                Some(centers) => centers[c],
                None => ClusterCenter {
                    delay_s: if hi > lo { rng.random_range(lo..hi) } else { lo },
                    aod: rng.random_range(-lim..lim),
                    aoa: rng.random_range(-lim..lim),
                    power_db: -self.cluster_power_range_db * rng.random::<f64>(),
                },
            };
            for _ in 0..self.paths_per_cluster {
                let excess =
                    redraw(&mut rng, |r| delay_dist.sample(r).abs(), |e| center.delay_s + e < self.max_delay_s)?;
                let aod = redraw(&mut rng, |r| center.aod + aod_dist.sample(r), |a| (-0.5..0.5).contains(&a))?;
                let aoa = redraw(&mut rng, |r| center.aoa + aoa_dist.sample(r), |a| (-0.5..0.5).contains(&a))?;
                let power_db =
                    center.power_db - self.intra_cluster_decay_db_per_ns * excess * 1e9 + power_dist.sample(&mut rng);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                let gain = Complex64::from_polar(10f64.powf(power_db / 20.0), phase);
                generated.push(PathParams::new(gain, center.delay_s + excess, aod, aoa));
            }
        }
        let retained = filter_by_dynamic_range(&generated, self.dynamic_range_db)?;
        Ok(Scenario { generated, retained })
    }
}

fn normal(std: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, std).or_else(|e| domain(format!("bad spread {std}: {e}")))
}

fn redraw(rng: &mut ChaCha8Rng, mut draw: impl FnMut(&mut ChaCha8Rng) -> f64, ok: impl Fn(f64) -> bool) -> Result<f64> {
    for _ in 0..MAX_REDRAWS {
        let v = draw(rng);
        if ok(v) {
            return Ok(v);
        }
    }
    domain("scenario spreads are too wide for the allowed range")
}
