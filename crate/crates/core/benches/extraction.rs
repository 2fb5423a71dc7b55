//! Hot loops of the extraction pipeline.
//!
//! With the default `parallel` feature every workload is measured twice: on
//! the global rayon pool and on a one-thread pool. Build with
//! `--no-default-features` to measure the sequential fallback itself.

#[cfg(feature = "parallel")]
use criterion::BenchmarkId;
use criterion::{criterion_group, criterion_main, Criterion};
use mpcx_core::beamspace::PathAtom;
use mpcx_core::extract::residual_peak;
use mpcx_core::{
    beamspace_transform, greedy_ls, synthesize_response, ExtractionConfig, GridSpec, PathParams, ScenarioSpec,
    SounderConfig,
};
use num_complex::Complex64;

fn scenario(max_delay_s: f64, paths: usize) -> Vec<PathParams> {
    ScenarioSpec {
        n_clusters: 4,
        paths_per_cluster: paths / 4,
        dynamic_range_db: 100.0,
        seed: 1,
        max_delay_s,
        center_delay_range_s: [0.1 * max_delay_s, 0.7 * max_delay_s],
        angle_limit: 0.45,
        cluster_power_range_db: 20.0,
        delay_spread_s: 0.05 * max_delay_s,
        aod_spread: 0.03,
        aoa_spread: 0.03,
        path_power_spread_db: 3.0,
        intra_cluster_decay_db_per_ns: 0.1,
        centers: None,
    }
    .generate()
    .unwrap()
    .retained
}

/// Runs `f` under each available execution mode.
fn modes(c: &mut Criterion, group: &str, mut f: impl FnMut() + Send) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    #[cfg(feature = "parallel")]
    {
        g.bench_function(BenchmarkId::new("rayon-global", rayon::current_num_threads()), |b| b.iter(&mut f));
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        g.bench_function(BenchmarkId::new("rayon-single", 1), |b| single.install(|| b.iter(&mut f)));
    }
    #[cfg(not(feature = "parallel"))]
    g.bench_function("sequential", |b| b.iter(&mut f));
    g.finish();
}

fn benches(c: &mut Criterion) {
    let cfg = SounderConfig::new(16, 16, 1e9, 64, 28e9).unwrap();
    let paths = scenario(50e-9, 40);
    let h = synthesize_response(&cfg, &paths).unwrap();
    let spec = GridSpec::uniform(4, &cfg);

    modes(c, "synthesize_40_paths", || {
        std::hint::black_box(synthesize_response(&cfg, &paths).unwrap());
    });
    modes(c, "beamspace_transform", || {
        std::hint::black_box(beamspace_transform(&h, &spec).unwrap());
    });

    let grid = beamspace_transform(&h, &spec).unwrap();
    let atoms: Vec<PathAtom> = paths[..3]
        .iter()
        .map(|p| PathAtom::new(&p.with_gain(p.gain * Complex64::new(0.9, 0.0)), &spec, &cfg))
        .collect();
    modes(c, "residual_peak_3_atoms", || {
        std::hint::black_box(residual_peak(&grid, &atoms));
    });

    let xcfg = ExtractionConfig::new(40, spec);
    modes(c, "greedy_ls_40", || {
        std::hint::black_box(greedy_ls(&h, &xcfg).unwrap());
    });
}

criterion_group!(extraction, benches);
criterion_main!(extraction);
