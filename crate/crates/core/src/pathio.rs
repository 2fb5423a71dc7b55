//! Path-list CSV files.
//!
//! Header `gain_real,gain_imag,delay_s,aod_cycles,aoa_cycles`, one path per
//! row. Files with `gain_db,phase_deg` in place of the cartesian gain are
//! accepted and converted on load.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::synth::{spatial_frequency, PathParams, SounderConfig};

pub const HEADER: [&str; 5] = ["gain_real", "gain_imag", "delay_s", "aod_cycles", "aoa_cycles"];

/// How the angle columns are interpreted on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AngleUnit {
    #[default]
    Cycles,
    /// Physical degrees for a half-wavelength array.
    Degrees,
}

pub fn write_paths(mut w: impl Write, paths: &[PathParams]) -> Result<()> {
    let mut out = csv::Writer::from_writer(&mut w);
    out.write_record(HEADER)?;
    for p in paths {
        out.write_record([
            p.gain.re.to_string(),
            p.gain.im.to_string(),
            p.delay.to_string(),
            p.aod.to_string(),
            p.aoa.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_paths(path: impl AsRef<Path>, paths: &[PathParams]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_paths(&mut w, paths)?;
    w.flush()?;
    Ok(())
}

/// Parses a path list. Angles are checked against [-0.5, 0.5) after unit
/// conversion; delays are checked by [`validate_paths`] once a sounder
/// configuration is known.
pub fn read_paths(r: impl Read, unit: AngleUnit) -> Result<Vec<PathParams>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let require = |name: &str| col(name).ok_or_else(|| Error::Format(format!("path list is missing column `{name}`")));

    let polar = col("gain_real").is_none() && col("gain_db").is_some();
    let (g0, g1) = if polar {
        (require("gain_db")?, require("phase_deg")?)
    } else {
        (require("gain_real")?, require("gain_imag")?)
    };
    let (delay, aod, aoa) = (require("delay_s")?, require("aod_cycles")?, require("aoa_cycles")?);

    let mut paths = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let field = |idx: usize, name: &str| -> Result<f64> {
            let s = rec.get(idx).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Format(format!("row {row}: `{name}` value {s:?} is not a finite number")))
        };
        let gain = if polar {
            let db = field(g0, "gain_db")?;
            Complex64::from_polar(10f64.powf(db / 20.0), field(g1, "phase_deg")?.to_radians())
        } else {
            Complex64::new(field(g0, "gain_real")?, field(g1, "gain_imag")?)
        };
        let angle = |idx: usize, name: &str| -> Result<f64> {
            let v = field(idx, name)?;
            let v = match unit {
                AngleUnit::Cycles => v,
                AngleUnit::Degrees => {
                    spatial_frequency(v, 0.5).map_err(|e| Error::Format(format!("row {row}: {e}")))?
                }
            };
            // sin(90°)/2 lands on the upper edge, which is the same direction as -0.5
            let v = if unit == AngleUnit::Degrees && v >= 0.5 { v - 1.0 } else { v };
            if (-0.5..0.5).contains(&v) {
                Ok(v)
            } else {
                Err(Error::Format(format!("row {row}: `{name}` = {v} outside [-0.5, 0.5)")))
            }
        };
        let d = field(delay, "delay_s")?;
        if d < 0.0 {
            return Err(Error::Format(format!("row {row}: negative delay {d}")));
        }
        paths.push(PathParams::new(gain, d, angle(aod, "aod_cycles")?, angle(aoa, "aoa_cycles")?));
    }
    Ok(paths)
}

pub fn load_paths(path: impl AsRef<Path>, unit: AngleUnit) -> Result<Vec<PathParams>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    read_paths(f, unit)
}

/// Checks every path against a sounder configuration, naming the first
/// offending row (1-based, header excluded).
pub fn validate_paths(paths: &[PathParams], config: &SounderConfig) -> Result<()> {
    for (i, p) in paths.iter().enumerate() {
        p.validate(config).map_err(|e| Error::Format(format!("row {}: {e}", i + 1)))?;
    }
    Ok(())
}
