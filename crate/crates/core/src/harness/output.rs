use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::experiments::{streams, OpCountRow, Scenario, SweepAxis, SweepRow};
use crate::channel::write_samples_csv;
use crate::error::Result;
use crate::frontend::DesignPoint;
use crate::solver::SolveTrace;

pub const SWEEP_HEADER: [&str; 8] = ["axis_value", "scheme", "seed", "power_dbm", "feasible", "min_rate", "config_hash", "error"];

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_trace(path: &Path, trace: &SolveTrace) -> Result<()> {
    trace.write_csv(create(path)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn write_design(path: &Path, design: &DesignPoint) -> Result<()> {
    let mut out = create(path)?;
    out.write_all(design.to_json()?.as_bytes())?;
    Ok(())
}

pub fn read_design(path: &Path) -> Result<DesignPoint> {
    DesignPoint::from_json(&fs::read_to_string(path)?)
}

pub fn write_config(path: &Path, cfg: &ExperimentConfig) -> Result<()> {
    fs::write(path, cfg.to_toml()?)?;
    Ok(())
}

/// Tidy sweep table, one row per `(axis value, scheme, seed)`.
pub fn write_sweep<W: Write>(writer: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(SWEEP_HEADER)?;
    for r in rows {
        out.write_record(&[
            r.axis_value.to_string(),
            r.scheme.to_string(),
            r.seed.to_string(),
            format!("{:.10}", r.power_dbm),
            u8::from(r.feasible).to_string(),
            format!("{:.6}", r.min_rate),
            r.config_hash.clone(),
            r.error.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep_file(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_sweep(create(path)?, rows)
}

/// Gnuplot script plotting mean power per scheme against the axis from `sweep.csv`.
pub fn write_sweep_plot(path: &Path, axis: SweepAxis, schemes: &[String]) -> Result<()> {
    let label = match axis {
        SweepAxis::Users => "users K",
        SweepAxis::Antennas => "antennas M",
        SweepAxis::Bits => "ADC bits q",
    };
    let mut out = create(path)?;
    writeln!(out, "set datafile separator ','")?;
    writeln!(out, "set key autotitle columnhead")?;
    writeln!(out, "set xlabel '{label}'")?;
    writeln!(out, "set ylabel 'total transmit power (dBm)'")?;
    let plots: Vec<String> = schemes
        .iter()
        .map(|s| format!("'sweep.csv' using 1:(strcol(2) eq '{s}' ? $4 : 1/0) smooth unique with linespoints title '{s}'"))
        .collect();
    writeln!(out, "plot {}", plots.join(", \\\n     "))?;
    Ok(())
}

pub fn write_opcounts(path: &Path, rows: &[OpCountRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(create(path)?);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Dumps the first `frames` training samples of a drop as
/// `frame_index,row,col,re,im`.
pub fn dump_channel(path: &Path, cfg: &ExperimentConfig, seed: u64, frames: usize) -> Result<()> {
    let scenario = Scenario::new(cfg, seed)?;
    let samples = scenario.stream(streams::TRAINING)?.take_samples(frames)?;
    write_samples_csv(create(path)?, &samples)
}

/// `dir/trace.csv` for one run, `dir/trace_seed<seed>.csv` for several.
pub fn trace_path(dir: &Path, seed: u64, single: bool) -> PathBuf {
    if single {
        dir.join("trace.csv")
    } else {
        dir.join(format!("trace_seed{seed}.csv"))
    }
}
