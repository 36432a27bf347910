//! Built-in initial data, run configuration, the solve driver and file
//! output.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolution::{initial_breaks, BreakEvent, Mode, Solver, SolverSettings, StepLog, SystemParams};
use crate::grid::UniformGrid;
use crate::metric::{energy_report, EnergyReport};
use crate::partition::PartitionFn;
use crate::state::{Atom, EulerianState, LagrangianState, Measure};
use crate::transform::{to_eulerian, to_lagrangian};

/// Environment variable that overrides the output directory of a run.
pub const OUTPUT_DIR_ENV: &str = "TWOCH_OUTPUT_DIR";

/// Default amplitude of the gaussian-cubic profile.
pub const DEFAULT_ALPHA: f64 = 1.0;

/// Display times for the gaussian-cubic scenario; the first break
/// falls between the first two.
pub const GAUSSIAN_CUBIC_TIMES: [f64; 6] = [1.5, 2.0, 2.5, 3.0, 4.0, 5.0];

/// Built-in scenario names with one-line descriptions.
pub const SCENARIOS: [(&str, &str); 4] = [
    (
        "gaussian-cubic",
        "u0 = alpha exp(-x^2) x (x-1) (x+1), rho0 = epsilon exp(-x^2/10)",
    ),
    (
        "peakon-antipeakon",
        "u0 = p (exp(-|x+a|) - exp(-|x-a|)) with |x| capped near 0, rho0 = epsilon exp(-x^2/10)",
    ),
    (
        "step-asymptotics",
        "u0 = alpha exp(-x^2) + c chi(x), rho0 = k + epsilon exp(-x^2/10)",
    ),
    ("constant-density", "u0 = 0, rho0 = k"),
];

/// Parameters shared by the built-in scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub alpha: f64,
    pub epsilon: f64,
    /// Peakon amplitude.
    pub p: f64,
    /// Peakon half-separation.
    pub a: f64,
    /// Right asymptote of `u`.
    pub c: f64,
    /// Asymptote of `rho`.
    pub k: f64,
    /// Extra atoms added to the energy measure.
    pub atoms: Vec<Atom>,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            epsilon: 0.0,
            p: 1.0,
            a: 2.0,
            c: 0.0,
            k: 0.0,
            atoms: Vec::new(),
        }
    }
}

/// `|x|` with a quadratic cap on `|x| < delta`.
fn soft_abs(x: f64, delta: f64) -> f64 {
    let ax = x.abs();
    if ax >= delta {
        ax
    } else {
        0.5 * (x * x / delta + delta)
    }
}

/// Initial `(u, rho)` samples of a built-in scenario.
pub fn scenario_samples(name: &str, p: &ScenarioParams, grid: UniformGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    let xs = grid.points();
    let bump = |x: f64| (-x * x / 10.0).exp();
    let chi = PartitionFn;
    let pair: Vec<(f64, f64)> = match name {
        "gaussian-cubic" => xs
            .iter()
            .map(|&x| (p.alpha * (-x * x).exp() * x * (x - 1.0) * (x + 1.0), p.epsilon * bump(x)))
            .collect(),
        "peakon-antipeakon" => {
            let delta = 2.0 * grid.spacing();
            xs.iter()
                .map(|&x| {
                    let u = p.p * ((-soft_abs(x + p.a, delta)).exp() - (-soft_abs(x - p.a, delta)).exp());
                    (u, p.epsilon * bump(x))
                })
                .collect()
        }
        "step-asymptotics" => xs
            .iter()
            .map(|&x| (p.alpha * (-x * x).exp() + p.c * chi.value(x), p.k + p.epsilon * bump(x)))
            .collect(),
        "constant-density" => xs.iter().map(|_| (0.0, p.k)).collect(),
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    Ok(pair.into_iter().unzip())
}

/// Eulerian initial data of a built-in scenario, with `mu` absolutely
/// continuous (`u_x^2 + rhobar^2`) plus any configured atoms.
pub fn build_scenario(name: &str, params: &ScenarioParams, grid: UniformGrid) -> Result<EulerianState> {
    let (u, rho) = scenario_samples(name, params, grid)?;
    let mut e = EulerianState::from_samples(grid, &u, &rho)?;
    e.mu.atoms = params.atoms.clone();
    e.mu.check(grid.n)?;
    Ok(e)
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    /// Built-in scenario name, or a path to an Eulerian state JSON file.
    pub scenario: String,
    #[serde(flatten)]
    pub params: ScenarioParams,
    pub kappa: f64,
    pub eta: f64,
    pub xi_min: f64,
    pub xi_max: f64,
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub snapshot_dt: f64,
    pub mode: Mode,
    pub solver: SolverSettings,
    pub output_dir: Option<PathBuf>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            scenario: "gaussian-cubic".into(),
            params: ScenarioParams::default(),
            kappa: 0.0,
            eta: 1.0,
            xi_min: -30.0,
            xi_max: 30.0,
            n: 4096,
            x_min: -15.0,
            x_max: 15.0,
            nx: 2049,
            t_end: 5.0,
            snapshot_dt: 1.0,
            mode: Mode::Dissipative,
            solver: SolverSettings::default(),
            output_dir: None,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 16 {
            return Err(Error::Invalid(format!("need n >= 16, got {}", self.n)));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::Invalid(format!("need T > 0, got {}", self.t_end)));
        }
        if !(self.snapshot_dt > 0.0) {
            return Err(Error::Invalid("snapshot_dt must be positive".into()));
        }
        self.system().validate()?;
        self.solver_settings().validate()?;
        self.xi_grid()?;
        self.x_grid()?;
        Ok(())
    }

    pub fn system(&self) -> SystemParams {
        SystemParams { kappa: self.kappa, eta: self.eta }
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings { mode: self.mode, ..self.solver }
    }

    pub fn xi_grid(&self) -> Result<UniformGrid> {
        UniformGrid::new(self.xi_min, self.xi_max, self.n)
    }

    pub fn x_grid(&self) -> Result<UniformGrid> {
        UniformGrid::new(self.x_min, self.x_max, self.nx)
    }

    /// The grid on which initial data is sampled: the label window at the
    /// label resolution.
    pub fn input_grid(&self) -> Result<UniformGrid> {
        self.xi_grid()
    }

    /// Snapshot times `0, dt, 2 dt, ...` ending exactly at `T`.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        let mut k = 1;
        loop {
            let t = k as f64 * self.snapshot_dt;
            if t >= self.t_end - 1e-9 * self.snapshot_dt {
                break;
            }
            out.push(t);
            k += 1;
        }
        out.push(self.t_end);
        out
    }

    /// SHA-256 of the canonical JSON encoding, excluding the output
    /// directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        let mut s = String::with_capacity(64);
        for b in digest {
            let _ = write!(s, "{b:02x}");
        }
        s
    }

    /// Initial data in the solver's representation: velocity `u + kappa/2`,
    /// density scaled by `sqrt(eta)`. Built-in scenarios describe the
    /// shifted velocity directly, so they are valid for any `kappa`.
    pub fn initial_state(&self) -> Result<EulerianState> {
        let grid = self.input_grid()?;
        let sys = self.system();
        let base = if SCENARIOS.iter().any(|(n, _)| *n == self.scenario) {
            build_scenario(&self.scenario, &self.params, grid)?
        } else {
            let text = fs::read_to_string(&self.scenario)?;
            let e: EulerianState = serde_json::from_str(&text)?;
            return Ok(e);
        };
        let s = sys.eta.sqrt();
        let mut e = base;
        e.rhobar.iter_mut().for_each(|r| *r *= s);
        e.k *= s;
        let atoms = std::mem::take(&mut e.mu.atoms);
        e.mu = Measure { density: e.energy_density(), atoms };
        Ok(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    /// Solver representation (shifted velocity, scaled density).
    pub eulerian: EulerianState,
    pub energy: EnergyReport,
    pub lagrangian: LagrangianState,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    pub config_hash: String,
    pub params: SystemParams,
    pub snapshots: Vec<Snapshot>,
    pub events: Vec<BreakEvent>,
    pub steps: Vec<StepLog>,
    /// Set when the run aborted; the series then ends at the last good
    /// snapshot.
    pub failure: Option<String>,
    #[serde(skip)]
    pub failure_code: Option<i32>,
}

impl TimeSeries {
    pub fn final_state(&self) -> Option<&LagrangianState> {
        self.snapshots.last().map(|s| &s.lagrangian)
    }
}

fn snapshot(x: &LagrangianState, x_grid: UniformGrid) -> Result<Snapshot> {
    Ok(Snapshot {
        t: x.t,
        eulerian: to_eulerian(x, x_grid)?,
        energy: energy_report(x),
        lagrangian: x.clone(),
    })
}

/// Integrates a Lagrangian state through the given snapshot times.
pub fn evolve(
    x0: LagrangianState,
    settings: SolverSettings,
    params: SystemParams,
    times: &[f64],
    x_grid: UniformGrid,
    config_hash: String,
) -> TimeSeries {
    let mut series = TimeSeries {
        config_hash,
        params,
        snapshots: Vec::new(),
        events: Vec::new(),
        steps: Vec::new(),
        failure: None,
        failure_code: None,
    };
    let mut x = x0;
    series.events.extend(initial_breaks(&mut x, &settings));
    let mut solver = Solver::for_grid(settings, params, &x.grid);
    for &t in times {
        let step = solver.advance_to(&x, t, &mut series.events, &mut series.steps);
        let snap = step.and_then(|next| {
            x = next;
            snapshot(&x, x_grid)
        });
        match snap {
            Ok(s) => series.snapshots.push(s),
            Err(e) => {
                log::warn!("run aborted at t={}: {e}", x.t);
                series.failure = Some(e.to_string());
                series.failure_code = Some(e.exit_code());
                break;
            }
        }
    }
    series
}

/// `T_t = M ∘ S_t ∘ L` for a configuration. Invalid configurations are
/// errors; solver aborts return the partial series with `failure` set.
pub fn solve(config: &SimulationConfig) -> Result<TimeSeries> {
    config.validate()?;
    let e0 = config.initial_state()?;
    let x0 = to_lagrangian(&e0, config.xi_grid()?)?;
    Ok(evolve(
        x0,
        config.solver_settings(),
        config.system(),
        &config.snapshot_times(),
        config.x_grid()?,
        config.hash(),
    ))
}

/// Outcome of [`run`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub output_dir: PathBuf,
    pub exit_code: i32,
    pub snapshots: usize,
    pub events: usize,
    pub failure: Option<String>,
}

/// Resolves the output directory: environment override, then config,
/// then `./output`.
pub fn output_dir(config: &SimulationConfig) -> PathBuf {
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
        return PathBuf::from(dir);
    }
    config.output_dir.clone().unwrap_or_else(|| PathBuf::from("output"))
}

fn csv_file(path: &Path, hash: &str, header: &str) -> Result<fs::File> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "# config_hash={hash}")?;
    writeln!(f, "{header}")?;
    Ok(f)
}

/// Writes the CSV and JSON outputs of a series into `dir`.
pub fn write_outputs(series: &TimeSeries, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let hash = &series.config_hash;
    let p = series.params;

    let mut buf = String::new();
    for s in &series.snapshots {
        let e = &s.eulerian;
        let u = e.u();
        let rho = e.rho();
        for i in 0..e.n() {
            let _ = writeln!(
                buf,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                s.t,
                e.grid.point(i),
                p.physical_u(u[i]),
                p.physical_rho(rho[i]),
                e.mu.density[i]
            );
        }
    }
    csv_file(&dir.join("snapshots.csv"), hash, "t,x,u,rho,mu_ac_density")?.write_all(buf.as_bytes())?;

    let mut f = csv_file(&dir.join("atoms.csv"), hash, "t,location,mass")?;
    for s in &series.snapshots {
        for a in &s.eulerian.mu.atoms {
            writeln!(f, "{:.16e},{:.16e},{:.16e}", s.t, a.location, a.mass)?;
        }
    }

    let mut f = csv_file(&dir.join("energy.csv"), hash, "t,sigma,mu_total,eulerian_energy,F")?;
    for s in &series.snapshots {
        let r = &s.energy;
        writeln!(f, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", r.t, r.sigma, r.mu_total, r.eulerian_energy, r.f)?;
    }

    let mut f = csv_file(&dir.join("events.csv"), hash, "node,tau,y_at_break,h_at_break")?;
    for ev in &series.events {
        writeln!(f, "{},{:.16e},{:.16e},{:.16e}", ev.node, ev.tau, ev.y_at_break, ev.h_at_break)?;
    }

    if let Some(x) = series.final_state() {
        let json = serde_json::json!({
            "config_hash": hash,
            "failure": series.failure,
            "state": x,
        });
        fs::write(dir.join("final_state.json"), serde_json::to_string_pretty(&json)?)?;
    }
    Ok(())
}

/// Solves a configuration and writes its outputs. The summary's exit code
/// is 0 on success, 3 if the solver aborted (partial outputs are still
/// written). Invalid configurations and I/O failures are returned as errors.
pub fn run(config: &SimulationConfig) -> Result<RunSummary> {
    let series = solve(config)?;
    let dir = output_dir(config);
    write_outputs(&series, &dir)?;
    Ok(RunSummary {
        config_hash: series.config_hash.clone(),
        output_dir: dir,
        exit_code: series.failure_code.unwrap_or(0),
        snapshots: series.snapshots.len(),
        events: series.events.len(),
        failure: series.failure.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_cubic_vanishes_at_one() {
        let g = UniformGrid::new(-3.0, 3.0, 61).unwrap();
        let p = ScenarioParams { alpha: 2.5, ..Default::default() };
        let (u, _) = scenario_samples("gaussian-cubic", &p, g).unwrap();
        let i = 40;
        assert!((g.point(i) - 1.0).abs() < 1e-12);
        assert!(u[i].abs() < 1e-12);
    }

    #[test]
    fn zero_amplitude_is_zero_state() {
        let g = UniformGrid::new(-3.0, 3.0, 61).unwrap();
        let p = ScenarioParams { alpha: 0.0, epsilon: 0.0, ..Default::default() };
        let e = build_scenario("gaussian-cubic", &p, g).unwrap();
        assert_eq!(e, EulerianState::constant(g, 0.0));
    }

    #[test]
    fn unknown_scenario_is_rejected() {
        let g = UniformGrid::new(-3.0, 3.0, 61).unwrap();
        assert!(matches!(
            build_scenario("nope", &ScenarioParams::default(), g),
            Err(Error::UnknownScenario(_))
        ));
    }

    #[test]
    fn snapshot_times_end_at_t() {
        let c = SimulationConfig { t_end: 2.5, snapshot_dt: 1.0, ..Default::default() };
        assert_eq!(c.snapshot_times(), vec![0.0, 1.0, 2.0, 2.5]);
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = SimulationConfig::default();
        let b = SimulationConfig { output_dir: Some("elsewhere".into()), ..Default::default() };
        assert_eq!(a.hash(), b.hash());
        let c = SimulationConfig { n: 128, ..Default::default() };
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn config_rejects_small_grids() {
        let c = SimulationConfig { n: 8, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
