use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use shc_core::harness::output;
use shc_core::harness::{
    feasibility_experiment, op_count_report, pilot_overhead_report, run_convergence, sweep, ExperimentResult,
    PilotOverhead, SweepRow,
};
use shc_core::{ExperimentConfig, SchemeId, SweepAxis};

/// Stochastic hybrid combining experiments.
#[derive(Debug, Parser)]
#[command(name = "shc", version)]
struct Cli {
    /// TOML experiment config; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed of the replications.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Scheme: shc, mm, random, zf or mrc.
    #[arg(long, global = true)]
    scheme: Option<SchemeId>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override any config key, e.g. `--set users=4 --set channel.ar_coefficient=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the solver and write per-frame traces.
    Converge {
        /// Start from a design point JSON instead of the scheme's initialization.
        #[arg(long)]
        warm_start: Option<PathBuf>,
        /// Also dump this many training channel samples of the first seed.
        #[arg(long, value_name = "FRAMES")]
        dump_channel: Option<usize>,
        /// Slots per frame of a per-slot design, for the pilot overhead figure.
        #[arg(long, default_value_t = 10)]
        slots_per_frame: u64,
    },
    /// Power of every scheme along one axis, on common seeds.
    Sweep {
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<usize>,
        /// Schemes to run; all by default.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        schemes: Vec<SchemeId>,
    },
    /// Probability that every user meets its target in one slot.
    Feasibility {
        /// Also evaluate the contender designed from one-step-old channels.
        #[arg(long)]
        delayed: bool,
    },
    /// Kernel invocation counts per frame for every scheme.
    Opcount,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let base = match &cli.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(scheme) = cli.scheme {
        overrides.push(format!("scheme=\"{scheme}\""));
    }
    Ok(base.with_overrides(&overrides)?)
}

#[derive(Serialize)]
struct ConvergeSummary<'a> {
    #[serde(flatten)]
    result: &'a ExperimentResult,
    pilot_overhead: Option<PilotOverhead>,
}

#[derive(Serialize)]
struct SweepPoint {
    axis_value: usize,
    scheme: SchemeId,
    runs: usize,
    completed: usize,
    feasible: usize,
    mean_power_dbm: f64,
}

#[derive(Serialize)]
struct SweepSummary {
    config_hash: String,
    axis: SweepAxis,
    points: Vec<SweepPoint>,
}

fn converge(cfg: &ExperimentConfig, out: &Path, warm_start: Option<&Path>, dump: Option<usize>, slots: u64) -> Result<()> {
    let warm = warm_start
        .map(|p| output::read_design(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let (mut result, runs) = run_convergence(cfg, warm.as_ref());
    let single = runs.len() == 1;
    let mut overhead = None;
    for run in runs.iter().flatten() {
        let seed = run.record.seed;
        let path = output::trace_path(out, seed, single);
        output::write_trace(&path, &run.trace)?;
        result.trace_files.push(path.display().to_string());
        let design = if single { out.join("design.json") } else { out.join(format!("design_seed{seed}.json")) };
        output::write_design(&design, &run.design)?;
        if overhead.is_none() {
            if let Some(l_c) = run.record.settling_frame {
                overhead = Some(pilot_overhead_report(
                    l_c as u64,
                    run.record.frames as u64,
                    slots,
                    cfg.antennas as u64,
                    cfg.users as u64,
                ));
            }
        }
        println!(
            "seed {seed}: {:.3} dBm, min rate {:.3} bps/Hz, feasible {}, settled at frame {:?}",
            run.record.power_dbm,
            run.record.min_rate(),
            run.record.feasible,
            run.record.settling_frame
        );
    }
    for failure in &result.failures {
        println!("seed {}: failed: {}", failure.seed, failure.error);
    }
    if let Some(frames) = dump {
        output::dump_channel(&out.join("channel.csv"), cfg, cfg.seed, frames)?;
    }
    println!(
        "{}: mean power {:.3} dBm over {} of {} runs, feasible fraction {:.2}",
        result.scheme, result.mean_power_dbm, result.completed, result.replications, result.feasible_fraction
    );
    output::write_json(
        &out.join("result.json"),
        &ConvergeSummary {
            result: &result,
            pilot_overhead: overhead,
        },
    )?;
    Ok(())
}

fn summarize_sweep(rows: &[SweepRow]) -> Vec<SweepPoint> {
    let mut keys: Vec<(usize, SchemeId)> = rows.iter().map(|r| (r.axis_value, r.scheme)).collect();
    keys.dedup();
    keys.into_iter()
        .map(|(axis_value, scheme)| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.axis_value == axis_value && r.scheme == scheme).collect();
            let done: Vec<&&SweepRow> = group.iter().filter(|r| r.error.is_empty()).collect();
            let mean_mw = done.iter().map(|r| 10f64.powf(r.power_dbm / 10.0)).sum::<f64>() / done.len() as f64;
            SweepPoint {
                axis_value,
                scheme,
                runs: group.len(),
                completed: done.len(),
                feasible: done.iter().filter(|r| r.feasible).count(),
                mean_power_dbm: 10.0 * mean_mw.log10(),
            }
        })
        .collect()
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = load_config(&cli)?;
    let out = cli.out.as_path();
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    output::write_config(&out.join("config.toml"), &cfg)?;
    println!("config hash {}", cfg.hash());
    match &cli.command {
        Command::Converge {
            warm_start,
            dump_channel,
            slots_per_frame,
        } => converge(&cfg, out, warm_start.as_deref(), *dump_channel, *slots_per_frame)?,
        Command::Sweep { axis, values, schemes } => {
            let schemes = if schemes.is_empty() { SchemeId::ALL.to_vec() } else { schemes.clone() };
            let rows = sweep(&cfg, *axis, values, &schemes)?;
            output::write_sweep_file(&out.join("sweep.csv"), &rows)?;
            let names: Vec<String> = schemes.iter().map(|s| s.to_string()).collect();
            output::write_sweep_plot(&out.join("sweep.gp"), *axis, &names)?;
            let points = summarize_sweep(&rows);
            for p in &points {
                println!(
                    "{} {:>4} {:>6}: mean {:.3} dBm, feasible {}/{}",
                    serde_json::to_string(axis)?.trim_matches('"'),
                    p.axis_value,
                    p.scheme,
                    p.mean_power_dbm,
                    p.feasible,
                    p.completed
                );
            }
            output::write_json(
                &out.join("result.json"),
                &SweepSummary {
                    config_hash: cfg.hash(),
                    axis: *axis,
                    points,
                },
            )?;
        }
        Command::Feasibility { delayed } => {
            let report = feasibility_experiment(&cfg, *delayed)?;
            println!("shc: {:.2}% of {} slots", 100.0 * report.shc_probability, report.realizations);
            if let Some(p) = report.delayed_probability {
                println!("delayed: {:.2}% (ar coefficient {})", 100.0 * p, report.ar_coefficient);
            }
            output::write_json(&out.join("result.json"), &report)?;
        }
        Command::Opcount => {
            let rows = op_count_report(&cfg)?;
            if rows.is_empty() {
                bail!("no scheme completed");
            }
            for r in &rows {
                println!(
                    "{:>6}: {:.1} dual iterations, {:.0} coordinate updates per frame (order model {:.3e})",
                    r.scheme, r.dual_iterations, r.coordinate_updates, r.order_model
                );
            }
            output::write_opcounts(&out.join("opcount.csv"), &rows)?;
            output::write_json(&out.join("result.json"), &rows)?;
        }
    }
    Ok(())
}
