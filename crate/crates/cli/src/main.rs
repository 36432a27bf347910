use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};
use twoch::metric::{d_d_with, d_r_with, Distance, MetricOptions};
use twoch::scenarios::{self, SimulationConfig, OUTPUT_DIR_ENV, SCENARIOS};
use twoch::transform::{to_eulerian_with_report, to_lagrangian};
use twoch::{EulerianState, LagrangianState, UniformGrid};

#[derive(Parser)]
#[command(name = "twoch", version, about = "Dissipative two-component Camassa-Holm solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and write its outputs.
    Run {
        config: PathBuf,
        /// Output directory; the environment override still wins.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a state between Eulerian and Lagrangian form.
    Convert {
        input: PathBuf,
        #[arg(long, value_enum)]
        to: Form,
        /// Target grid `min,max,n`: label grid for `lagrangian`, x-grid for
        /// `eulerian`. Defaults to the input's own grid.
        #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
        grid: Option<UniformGrid>,
        /// Write here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also map back and report the round-trip error on stderr.
        #[arg(long)]
        round_trip: bool,
    },
    /// Distance between two states of the same form.
    Metric {
        a: PathBuf,
        b: PathBuf,
        /// Label grid `min,max,n` used for Eulerian inputs.
        #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
        grid: Option<UniformGrid>,
        #[arg(long)]
        tol_r: Option<f64>,
        #[arg(long)]
        meas_tol: Option<f64>,
    },
    /// List the built-in scenarios.
    Scenarios,
    /// Run every `*.json` configuration in a directory.
    Sweep {
        dir: PathBuf,
        /// Root of the per-configuration output directories.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    Lagrangian,
    Eulerian,
}

fn parse_grid(s: &str) -> Result<UniformGrid, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected min,max,n".into());
    }
    let min = parts[0].trim().parse::<f64>().map_err(|e| e.to_string())?;
    let max = parts[1].trim().parse::<f64>().map_err(|e| e.to_string())?;
    let n = parts[2].trim().parse::<usize>().map_err(|e| e.to_string())?;
    UniformGrid::new(min, max, n).map_err(|e| e.to_string())
}

enum State {
    Eulerian(EulerianState),
    Lagrangian(LagrangianState),
}

/// Reads a state file; `final_state.json` wrappers are unpacked.
fn read_state(path: &Path) -> anyhow::Result<State> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(inner) = v.get_mut("state") {
        v = inner.take();
    }
    if v.get("zeta").is_some() {
        Ok(State::Lagrangian(serde_json::from_value(v)?))
    } else {
        Ok(State::Eulerian(serde_json::from_value(v)?))
    }
}

fn write_json(value: &impl serde::Serialize, output: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn load_config(path: &Path) -> anyhow::Result<SimulationConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_run(config: &Path, out: Option<PathBuf>) -> anyhow::Result<i32> {
    let mut c = load_config(config)?;
    if out.is_some() {
        c.output_dir = out;
    }
    let summary = scenarios::run(&c)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if let Some(f) = &summary.failure {
        log::error!("solver aborted: {f}");
    }
    Ok(summary.exit_code)
}

fn cmd_convert(
    input: &Path,
    to: Form,
    grid: Option<UniformGrid>,
    output: Option<&Path>,
    round_trip: bool,
) -> anyhow::Result<i32> {
    match (read_state(input)?, to) {
        (State::Eulerian(e), Form::Lagrangian) => {
            let g = grid.unwrap_or(e.grid);
            let x = to_lagrangian(&e, g)?;
            if round_trip {
                let back = to_eulerian_with_report(&x, e.grid)?.0;
                eprintln!(
                    "round trip: sup|du| = {:.3e}, sup|drho| = {:.3e}",
                    sup_diff(&e.u(), &back.u()),
                    sup_diff(&e.rho(), &back.rho())
                );
            }
            write_json(&x, output)?;
        }
        (State::Lagrangian(x), Form::Eulerian) => {
            let g = grid.unwrap_or(x.grid);
            let (e, report) = to_eulerian_with_report(&x, g)?;
            log::info!("plateaus: {report:?}");
            if round_trip {
                let back = to_lagrangian(&e, x.grid)?;
                let d = d_r_with(&twoch::transform::normalize(&x), &back, &MetricOptions::default())?;
                eprintln!("round trip: d_R(normalized input, L(M(input))) = {:.3e}", d.total);
            }
            write_json(&e, output)?;
        }
        (State::Eulerian(_), Form::Eulerian) | (State::Lagrangian(_), Form::Lagrangian) => {
            bail!("input is already in the requested form")
        }
    }
    Ok(0)
}

fn cmd_metric(
    a: &Path,
    b: &Path,
    grid: Option<UniformGrid>,
    tol_r: Option<f64>,
    meas_tol: Option<f64>,
) -> anyhow::Result<i32> {
    let mut opts = MetricOptions::default();
    if let Some(t) = tol_r {
        opts.tol_r = t;
    }
    opts.meas_tol = meas_tol;
    let d: Distance = match (read_state(a)?, read_state(b)?) {
        (State::Lagrangian(x), State::Lagrangian(y)) => d_r_with(&x, &y, &opts)?,
        (State::Eulerian(x), State::Eulerian(y)) => {
            let g = grid.context("Eulerian inputs need --grid min,max,n for the label grid")?;
            d_d_with(&x, &y, g, &opts)?
        }
        _ => bail!("both inputs must be of the same form"),
    };
    println!("{}", serde_json::to_string_pretty(&d)?);
    Ok(0)
}

fn cmd_sweep(dir: &Path, out: Option<PathBuf>) -> anyhow::Result<i32> {
    let root = out
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| dir.join("output"));
    let mut configs: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    configs.sort();
    let rows: Vec<Value> = configs
        .par_iter()
        .map(|path| {
            let result = load_config(path).and_then(|c| {
                let series = scenarios::solve(&c)?;
                let target = root.join(&series.config_hash);
                scenarios::write_outputs(&series, &target)?;
                Ok((series, target))
            });
            match result {
                Ok((series, target)) => json!({
                    "config": path,
                    "config_hash": series.config_hash,
                    "output_dir": target,
                    "snapshots": series.snapshots.len(),
                    "events": series.events.len(),
                    "failure": series.failure,
                    "exit_code": series.failure_code.unwrap_or(0),
                }),
                Err(e) => json!({
                    "config": path,
                    "failure": format!("{e:#}"),
                    "exit_code": exit_code(&e),
                }),
            }
        })
        .collect();
    fs::create_dir_all(&root)?;
    let summary = json!({ "runs": rows });
    fs::write(root.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(rows.iter().filter_map(|r| r["exit_code"].as_i64()).max().unwrap_or(0) as i32)
}

fn exit_code(e: &anyhow::Error) -> i32 {
    if let Some(err) = e.downcast_ref::<twoch::Error>() {
        return err.exit_code();
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return 4;
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::Convert { input, to, grid, output, round_trip } => {
            cmd_convert(&input, to, grid, output.as_deref(), round_trip)
        }
        Command::Metric { a, b, grid, tol_r, meas_tol } => cmd_metric(&a, &b, grid, tol_r, meas_tol),
        Command::Scenarios => {
            for (name, desc) in SCENARIOS {
                println!("{name:<20} {desc}");
            }
            Ok(0)
        }
        Command::Sweep { dir, out } => cmd_sweep(&dir, out),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
