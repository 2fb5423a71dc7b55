use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use mpcx_core::beamspace::pdp_marginals;
use mpcx_core::pathio::{load_paths, save_paths, validate_paths, AngleUnit};
use mpcx_core::scenario::ScenarioSpec;
use mpcx_core::{
    add_awgn, associate as associate_paths, beamspace_transform, greedy_ls, reconstruct, reconstruction_error,
    sage_refine, synthesize_response, ExtractionConfig, FrequencyResponse, GridSpec, PathParams, SounderConfig,
    Tensor3,
};

use crate::artifacts::*;
use crate::{AssociateArgs, CliError, CliResult, ExtractArgs, ReportArgs, ScenarioArgs, SynthArgs};

fn angle_unit(degrees: bool) -> AngleUnit {
    if degrees {
        AngleUnit::Degrees
    } else {
        AngleUnit::Cycles
    }
}

fn read_path_list(path: &Path, unit: AngleUnit) -> CliResult<Vec<PathParams>> {
    load_paths(path, unit).map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })
}

fn write_path_list(path: &Path, paths: &[PathParams]) -> CliResult<()> {
    save_paths(path, paths).map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })
}

fn load_response(path: &Path, config: SounderConfig) -> CliResult<FrequencyResponse> {
    let values =
        Tensor3::load(path).map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    Ok(FrequencyResponse::new(config, values)?)
}

fn db(power: f64) -> f64 {
    10.0 * power.log10()
}

pub fn scenario(args: &ScenarioArgs, seed: Option<u64>, out: &Path, quiet: bool) -> CliResult<()> {
    let start = Instant::now();
    let mut spec: ScenarioSpec = read_toml(&args.spec)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let sc = spec.generate()?;
    write_path_list(&out.join(TRUTH), &sc.retained)?;
    let sidecar = ScenarioSidecar { generated: sc.generated.len(), retained: sc.retained.len(), spec };
    write_toml(&out.join(SCENARIO_SIDECAR), &sidecar, SCENARIO_HEADER)?;
    write_timing(out, "scenario", start.elapsed().as_secs_f64())?;
    if !quiet {
        println!(
            "scenario: {} paths generated, {} retained -> {}",
            sidecar.generated,
            sidecar.retained,
            out.join(TRUTH).display()
        );
    }
    Ok(())
}

pub fn synth(args: &SynthArgs, seed: Option<u64>, out: &Path, quiet: bool) -> CliResult<()> {
    let start = Instant::now();
    let cfg = sounder_config(&args.sounder)?;
    let paths = read_path_list(&args.paths, angle_unit(args.degrees))?;
    validate_paths(&paths, &cfg).map_err(|e| CliError::Parse { path: args.paths.clone(), message: e.to_string() })?;
    let mut response = synthesize_response(&cfg, &paths)?;
    if let Some(p) = args.noise_power {
        response = add_awgn(&response, p, seed.unwrap_or(0))?;
    }
    response.values.save(out.join(RESPONSE))?;
    write_toml(&out.join(SOUNDER), &cfg, "")?;
    write_timing(out, "synth", start.elapsed().as_secs_f64())?;
    if !quiet {
        println!(
            "synth: {} paths, response {:?}, power {:e} -> {}",
            paths.len(),
            cfg.response_dims(),
            response.power(),
            out.join(RESPONSE).display()
        );
    }
    Ok(())
}

pub fn extract(args: &ExtractArgs, out: &Path, quiet: bool) -> CliResult<()> {
    let start = Instant::now();
    let cfg = sounder_config(&args.sounder)?;
    let spec = GridSpec::uniform(args.oversample, &cfg);
    spec.validate(&cfg).map_err(|e| CliError::Usage(format!("--oversample: {e}")))?;
    let xcfg = ExtractionConfig {
        k_g: args.kg,
        k_up: args.kup,
        residual_stop: args.residual_stop,
        final_global_ls: args.final_ls,
        subgrid_refine: args.subgrid,
        ..ExtractionConfig::new(args.kdom, spec)
    };
    xcfg.validate().map_err(|e| CliError::Usage(format!("extraction flags: {e}")))?;
    let response = load_response(&args.response, cfg)?;

    let (mut estimates, trace) = greedy_ls(&response, &xcfg)?;
    info!("greedy-LS committed {} paths in {:.1} s", estimates.len(), start.elapsed().as_secs_f64());
    let mut sage_errors = Vec::new();
    if args.sage_sweeps > 0 && !estimates.is_empty() {
        let (refined, errors) = sage_refine(&response, &estimates, &spec, args.sage_sweeps)?;
        estimates = refined;
        sage_errors = errors;
    }

    let recon = reconstruct(&estimates, &cfg)?;
    let final_residual_power = recon.values.sub(&response.values)?.power();
    let normalized_error = if response.power() > 0.0 { reconstruction_error(&recon, &response)? } else { f64::NAN };

    write_path_list(&out.join(ESTIMATES), &estimates)?;
    let mut csv = String::from("commit_index,residual_power_db\n");
    for (i, p) in trace.residual_power.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", i + 1, db(*p));
    }
    write_text(&out.join(TRACE), &csv)?;
    let report = ExtractReport {
        sounder: cfg,
        extraction: ExtractionEcho {
            k_dom: args.kdom,
            k_g: args.kg,
            k_up: args.kup,
            oversample: args.oversample,
            final_ls: args.final_ls,
            sage_sweeps: args.sage_sweeps,
            residual_stop: args.residual_stop,
            subgrid: args.subgrid,
        },
        result: ExtractionResult {
            n_estimates: estimates.len(),
            initial_power: trace.initial_power,
            final_residual_power,
            normalized_error,
            sage_errors,
        },
    };
    write_toml(&out.join(EXTRACT_REPORT), &report, "")?;
    write_timing(out, "extract", start.elapsed().as_secs_f64())?;
    if !quiet {
        println!(
            "extract: {} paths, normalized error {:e} -> {}",
            estimates.len(),
            normalized_error,
            out.join(ESTIMATES).display()
        );
    }
    Ok(())
}

pub fn associate(args: &AssociateArgs, out: &Path, quiet: bool) -> CliResult<()> {
    let start = Instant::now();
    if !(args.unmatched_cost.is_finite() && args.unmatched_cost > 0.0) {
        return Err(CliError::Usage(format!("--unmatched-cost {} must be positive", args.unmatched_cost)));
    }
    let cfg = sounder_config(&args.sounder)?;
    let truth = read_path_list(&args.truth, angle_unit(args.degrees))?;
    let estimates = read_path_list(&args.estimates, AngleUnit::Cycles)?;
    let result = associate_paths(&truth, &estimates, &cfg.resolution(), args.unmatched_cost)?;
    let report = AssociationReport::new(&result, truth.len(), estimates.len(), args.unmatched_cost);
    write_toml(&out.join(ASSOCIATION), &report, "")?;
    let mut pairs = Vec::new();
    result.write_pairs_csv(&mut pairs).map_err(|e| CliError::io(&out.join(PAIRS), e))?;
    fs::write(out.join(PAIRS), pairs).map_err(|e| CliError::io(&out.join(PAIRS), e))?;
    write_timing(out, "associate", start.elapsed().as_secs_f64())?;
    if !quiet {
        println!(
            "associate: K_pa = {} of {} true / {} estimated, |S_joint| = {}, post/pre cost {:e} / {:e}",
            report.k_pa, report.n_phys, report.n_est, report.s_joint, report.post_pa_cost, report.pre_pa_cost
        );
    }
    Ok(())
}

fn scatter_csv(paths: &[PathParams]) -> String {
    let mut s = String::from("idx,aoa_cycles,aod_cycles,delay_ns,gain_db\n");
    for (i, p) in paths.iter().enumerate() {
        let _ = writeln!(s, "{},{},{},{},{}", i, p.aoa, p.aod, p.delay * 1e9, db(p.power()));
    }
    s
}

pub fn report(args: &ReportArgs, out: &Path, quiet: bool) -> CliResult<()> {
    let start = Instant::now();
    let run = &args.run_dir;
    let truth_path = require(run, TRUTH, "scenario")?;
    let sounder_path = require(run, SOUNDER, "synth")?;
    let response_path = require(run, RESPONSE, "synth")?;
    let estimates_path = require(run, ESTIMATES, "extract")?;
    let trace_path = require(run, TRACE, "extract")?;
    let extract_path = require(run, EXTRACT_REPORT, "extract")?;
    let association_path = require(run, ASSOCIATION, "associate")?;

    let cfg: SounderConfig = read_toml(&sounder_path)?;
    cfg.validate()?;
    let extract: ExtractReport = read_toml(&extract_path)?;
    let stored: AssociationReport = read_toml(&association_path)?;
    let truth = read_path_list(&truth_path, AngleUnit::Cycles)?;
    let estimates = read_path_list(&estimates_path, AngleUnit::Cycles)?;
    let response = load_response(&response_path, cfg)?;

    let normalized_error = reconstruction_error(&reconstruct(&estimates, &cfg)?, &response)?;
    let result = associate_paths(&truth, &estimates, &cfg.resolution(), stored.unmatched_cost)?;
    let association = AssociationReport::new(&result, truth.len(), estimates.len(), stored.unmatched_cost);
    if association != stored {
        warn!("{} disagrees with a recomputation from the path lists", association_path.display());
    }
    if normalized_error != extract.result.normalized_error {
        warn!(
            "{} records error {:e}, recomputed {:e}",
            extract_path.display(),
            extract.result.normalized_error,
            normalized_error
        );
    }
    let report = RunReport {
        n_p: truth.len(),
        k_dom: estimates.len(),
        normalized_error,
        normalized_error_db: db(normalized_error),
        sounder: cfg,
        extraction: extract.extraction.clone(),
        association,
    };
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_toml(&out.join(REPORT), &report, "")?;

    let plots = out.join(PLOTS);
    fs::create_dir_all(&plots).map_err(|e| CliError::io(&plots, e))?;
    write_text(&plots.join("truth_scatter.csv"), &scatter_csv(&truth))?;
    write_text(&plots.join("estimate_scatter.csv"), &scatter_csv(&estimates))?;

    let grid = beamspace_transform(&response, &GridSpec::uniform(extract.extraction.oversample, &cfg))?;
    let (aoa_aod, aoa_delay) = pdp_marginals(&grid);
    drop(grid);
    for (name, map) in [("pdp_aoa_aod.csv", &aoa_aod), ("pdp_aoa_delay.csv", &aoa_delay)] {
        let mut buf = Vec::new();
        map.write_csv(&mut buf).map_err(|e| CliError::io(&plots.join(name), e))?;
        fs::write(plots.join(name), buf).map_err(|e| CliError::io(&plots.join(name), e))?;
    }

    let mut assoc = String::from("pair,phys_idx,est_idx,aoa_cycles,aod_cycles,delay_ns,gain_db\n");
    let mut errors = String::from("pair,phys_idx,est_idx,delay_err_bins,aoa_err_bins,aod_err_bins\n");
    for (k, p) in result.pairs.iter().enumerate() {
        let e = &estimates[p.est];
        let _ = writeln!(assoc, "{},{},{},{},{},{},{}", k, p.phys, p.est, e.aoa, e.aod, e.delay * 1e9, db(e.power()));
        let _ =
            writeln!(errors, "{},{},{},{},{},{}", k, p.phys, p.est, p.delay_err_bins, p.aoa_err_bins, p.aod_err_bins);
    }
    write_text(&plots.join("associated_scatter.csv"), &assoc)?;
    write_text(&plots.join("axis_errors.csv"), &errors)?;
    let trace = fs::read(&trace_path).map_err(|e| CliError::io(&trace_path, e))?;
    fs::write(plots.join("residual_trace.csv"), trace).map_err(|e| CliError::io(&plots, e))?;

    let elapsed = start.elapsed().as_secs_f64();
    write_timing(out, "report", elapsed)?;
    let mut timings = String::new();
    for stage in ["scenario", "synth", "extract", "associate"] {
        let path = run.join(TIMINGS).join(format!("{stage}.toml"));
        if let Ok(t) = read_toml::<toml::Table>(&path) {
            if let Some(s) = t.get("seconds").and_then(|v| v.as_float()) {
                let _ = writeln!(timings, "{stage} = {s}");
            }
        }
    }
    let _ = writeln!(timings, "report = {elapsed}");
    write_text(&out.join("timings.toml"), &timings)?;

    if !quiet {
        println!(
            "report: N_p = {}, K_dom = {}, K_pa = {}, normalized error {:e} -> {}",
            report.n_p,
            report.k_dom,
            report.association.k_pa,
            normalized_error,
            out.join(REPORT).display()
        );
    }
    Ok(())
}
