//! Time evolution in Lagrangian variables: right-hand side, explicit RK4
//! stepping, breaking detection with per-node energy freezing, and the
//! `(kappa, eta)` parameter reduction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::grid::UniformGrid;
use crate::kernels::{KernelWorkspace, PQ};
use crate::partition::PartitionFn;
use crate::state::{EulerianState, LagrangianState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Energy of broken characteristics is frozen and removed.
    #[default]
    Dissipative,
    /// No mask, no freezing.
    Conservative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Rk4,
}

/// Coefficients of the system. `kappa` shifts the characteristic speed,
/// `eta` weights the density in the energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemParams {
    pub kappa: f64,
    pub eta: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self { kappa: 0.0, eta: 1.0 }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() || !self.kappa.is_finite() {
            return Err(Error::Invalid(format!("need finite kappa and eta > 0, got {self:?}")));
        }
        Ok(())
    }

    /// Internal representation of physical samples: velocity `u + kappa/2`
    /// and density `sqrt(eta) rho`, with energy `u_x^2 + eta rhobar^2`.
    pub fn internal_state(&self, grid: UniformGrid, u: &[f64], rho: &[f64]) -> Result<EulerianState> {
        self.validate()?;
        let shift = 0.5 * self.kappa;
        let left = u[0] + shift;
        if left.abs() > 1e-8 * (1.0 + shift.abs()) {
            return Err(Error::AsymptoteMismatch { value: left });
        }
        let s = self.eta.sqrt();
        let v: Vec<f64> = u.iter().map(|x| x + shift).collect();
        let r: Vec<f64> = rho.iter().map(|x| s * x).collect();
        EulerianState::from_samples(grid, &v, &r)
    }

    pub fn physical_u(&self, v: f64) -> f64 {
        v - 0.5 * self.kappa
    }

    pub fn physical_rho(&self, r: f64) -> f64 {
        r / self.eta.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Base step; the actual step is also bounded by the CFL-like rule.
    pub dt: f64,
    /// `dt <= cfl * dxi / (1 + sup |U|)`.
    pub cfl: f64,
    /// Breaking threshold on `q / (q + h)`.
    pub q_tol: f64,
    /// Bisection depth for locating breaking times.
    pub event_refine: u32,
    pub mode: Mode,
    pub integrator: Integrator,
    /// Compatibility residual that triggers re-projection of `h`.
    pub tol_compat: f64,
    /// Allowed negative excursion of `h` before a step is rejected.
    pub h_neg_tol: f64,
    /// Step halvings before giving up.
    pub max_rejections: u32,
    /// Use the rayon backend where available.
    pub parallel: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            dt: 0.01,
            cfl: 0.5,
            q_tol: 1e-8,
            event_refine: 20,
            mode: Mode::Dissipative,
            integrator: Integrator::Rk4,
            tol_compat: 1e-8,
            h_neg_tol: 1e-10,
            max_rejections: 4,
            parallel: true,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt > 0.0
            && self.cfl > 0.0
            && self.q_tol > 0.0
            && self.tol_compat > 0.0
            && self.h_neg_tol >= 0.0;
        if !ok {
            return Err(Error::Invalid(format!("invalid solver settings {self:?}")));
        }
        Ok(())
    }
}

/// A characteristic reaching `q = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakEvent {
    pub node: usize,
    pub tau: f64,
    pub y_at_break: f64,
    pub h_at_break: f64,
    /// False when the bisection bracket was not consistent; `tau` is then
    /// the bracket midpoint.
    pub converged: bool,
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StepLog {
    pub t: f64,
    pub dt: f64,
    /// Largest change of the relative compatibility residual over the
    /// step, per unit time, before re-projection.
    pub compat_rate: f64,
    /// Largest relative compatibility residual after the step, before
    /// re-projection.
    pub compat_residual: f64,
    /// Largest correction applied to `h` by re-projection.
    pub reprojection: f64,
    pub frozen: usize,
    pub rejected: u32,
}

/// Time derivative of the evolving fields.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Derivative {
    pub zeta: Vec<f64>,
    pub ubar: Vec<f64>,
    pub q: Vec<f64>,
    pub w: Vec<f64>,
    pub h: Vec<f64>,
    pub rbar: Vec<f64>,
}

impl Derivative {
    pub fn zeros(n: usize) -> Self {
        Self {
            zeta: vec![0.0; n],
            ubar: vec![0.0; n],
            q: vec![0.0; n],
            w: vec![0.0; n],
            h: vec![0.0; n],
            rbar: vec![0.0; n],
        }
    }

    fn fields(&self) -> [&Vec<f64>; 6] {
        [&self.zeta, &self.ubar, &self.q, &self.w, &self.h, &self.rbar]
    }
}

fn state_fields_mut(x: &mut LagrangianState) -> [&mut Vec<f64>; 6] {
    [&mut x.zeta, &mut x.ubar, &mut x.q, &mut x.w, &mut x.h, &mut x.rbar]
}

/// Kernel workspace plus buffers for one trajectory.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    kernels: KernelWorkspace,
    pq: PQ,
}

impl Workspace {
    pub fn new(n: usize, parallel: bool) -> Self {
        Self { kernels: KernelWorkspace::new(n, parallel), pq: PQ::zeros(n) }
    }

    /// Workspace for a trajectory on `grid`. `y` and `q` are evolved
    /// separately, so close to breaking neighbouring characteristics can
    /// cross by the discretization error; the monotonicity check allows a
    /// fraction of a cell.
    pub fn for_grid(grid: &UniformGrid, parallel: bool) -> Self {
        let mut ws = Self::new(grid.n, parallel);
        ws.kernels.monotone_tol = STAGE_OVERLAP * grid.spacing();
        ws
    }
}

/// Fraction of a label cell by which neighbouring characteristics may
/// cross before a step is rejected.
pub const STAGE_OVERLAP: f64 = 0.25;

/// Right-hand side with an explicit activity mask (`None`: every node is
/// active and the kernels are unmasked).
pub fn rhs_masked(
    x: &LagrangianState,
    mask: Option<&[bool]>,
    params: &SystemParams,
    ws: &mut Workspace,
    out: &mut Derivative,
) -> Result<()> {
    let n = x.n();
    ws.kernels.evaluate(x, mask, &mut ws.pq)?;
    if out.zeta.len() != n {
        *out = Derivative::zeros(n);
    }
    let parallel = ws.kernels.parallel;
    let chi = PartitionFn;
    let shift = 0.5 * params.kappa;
    let pq = &ws.pq;
    let active = |i: usize| mask.map_or(true, |m| m[i]);
    let speed = |i: usize| x.velocity(i) - shift;
    exec::fill(&mut out.zeta, parallel, speed);
    exec::fill(&mut out.ubar, parallel, |i| -pq.q[i] - x.c * chi.d1(x.y(i)) * speed(i));
    exec::fill(&mut out.q, parallel, |i| if active(i) { x.w[i] } else { 0.0 });
    exec::fill(&mut out.w, parallel, |i| {
        if active(i) {
            0.5 * x.h[i] - pq.pminus[i] * x.q[i] + x.k * x.rbar[i]
        } else {
            0.0
        }
    });
    exec::fill(&mut out.h, parallel, |i| if active(i) { -2.0 * pq.pminus[i] * x.w[i] } else { 0.0 });
    exec::fill(&mut out.rbar, parallel, |i| if active(i) { -x.k * x.w[i] } else { 0.0 });
    Ok(())
}

/// Dissipative right-hand side with `kappa = 0`, masked by `tau > t`.
pub fn rhs(x: &LagrangianState) -> Result<Derivative> {
    let mask = x.active_mask();
    let mut ws = Workspace::new(x.n(), false);
    let mut out = Derivative::zeros(x.n());
    rhs_masked(x, Some(&mask), &SystemParams::default(), &mut ws, &mut out)?;
    Ok(out)
}

fn axpy(x0: &LagrangianState, a: f64, d: &Derivative, out: &mut LagrangianState) {
    let src = [&x0.zeta, &x0.ubar, &x0.q, &x0.w, &x0.h, &x0.rbar];
    for ((o, s), dv) in state_fields_mut(out).into_iter().zip(src).zip(d.fields()) {
        for i in 0..s.len() {
            o[i] = s[i] + a * dv[i];
        }
    }
}

/// One classical RK4 step of size `dt` from `x0`, with the activity mask
/// held fixed across the stages.
pub fn rk4(
    x0: &LagrangianState,
    dt: f64,
    mask: Option<&[bool]>,
    params: &SystemParams,
    ws: &mut Workspace,
) -> Result<LagrangianState> {
    let n = x0.n();
    let mut k = [
        Derivative::zeros(n),
        Derivative::zeros(n),
        Derivative::zeros(n),
        Derivative::zeros(n),
    ];
    let mut stage = x0.clone();
    rhs_masked(x0, mask, params, ws, &mut k[0])?;
    axpy(x0, 0.5 * dt, &k[0], &mut stage);
    rhs_masked(&stage, mask, params, ws, &mut k[1])?;
    axpy(x0, 0.5 * dt, &k[1], &mut stage);
    rhs_masked(&stage, mask, params, ws, &mut k[2])?;
    axpy(x0, dt, &k[2], &mut stage);
    rhs_masked(&stage, mask, params, ws, &mut k[3])?;

    let mut out = x0.clone();
    let src = [&x0.zeta, &x0.ubar, &x0.q, &x0.w, &x0.h, &x0.rbar];
    let [k1, k2, k3, k4] = &k;
    for (f, ((o, s), (a, (b, (c, d))))) in state_fields_mut(&mut out).into_iter().zip(src).zip(
        k1.fields()
            .into_iter()
            .zip(k2.fields().into_iter().zip(k3.fields().into_iter().zip(k4.fields()))),
    ).enumerate()
    {
        for i in 0..n {
            // Frozen nodes keep their bits: their local rates are exactly zero.
            if f >= 2 && mask.is_some_and(|m| !m[i]) {
                continue;
            }
            o[i] = s[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]);
        }
    }
    out.t = x0.t + dt;
    Ok(out)
}

/// Ratio `q / (q + h)` used by the breaking test.
#[inline]
fn q_ratio(q: f64, h: f64) -> f64 {
    let s = q + h;
    if s > 0.0 {
        q / s
    } else {
        0.0
    }
}

/// Nodes whose `q/(q+h)` sits below this while `w` turns nonnegative are
/// examined for breaking.
const BREAK_SCREEN: f64 = 1e-3;

/// Zero test for the smallest `q` a characteristic can reach, `rbar^2 / h`,
/// relative to `q + h`.
fn pinches(q: f64, h: f64, rbar: f64, q_tol: f64) -> bool {
    let s = q + h;
    if !(s > 0.0) {
        return true;
    }
    let ratio = q_ratio(q, h);
    if ratio <= q_tol {
        return true;
    }
    ratio <= BREAK_SCREEN && h > 0.0 && rbar * rbar / (h * s) <= q_tol
}

/// Locates breaking times inside `[t0, t0 + dt]` and freezes the nodes
/// that break.
///
/// `integrate(s)` must return the state at `t0 + s` re-integrated from
/// the step start. A node is a candidate when `q/(q+h)` ends below `q_tol`
/// or `w` turns nonnegative at small `q`; the first time where either
/// holds is bisected to depth `event_refine`, and the node freezes if it
/// pinches there (`q` or the compatibility bound `rbar^2/h` vanishes
/// relative to `q + h`).
pub fn detect_and_freeze<F>(
    x_pre: &LagrangianState,
    x_post: &LagrangianState,
    t0: f64,
    dt: f64,
    settings: &SolverSettings,
    integrate: F,
) -> Result<(LagrangianState, Vec<BreakEvent>)>
where
    F: Fn(f64) -> Result<LagrangianState> + Sync,
{
    let q_tol = settings.q_tol;
    let candidates: Vec<usize> = (0..x_pre.n())
        .filter(|&i| {
            if !x_pre.is_active(i) {
                return false;
            }
            let r_post = q_ratio(x_post.q[i], x_post.h[i]);
            let turned = x_pre.w[i] < 0.0 && x_post.w[i] >= 0.0;
            r_post <= q_tol || x_post.q[i] <= 0.0 || (turned && r_post <= BREAK_SCREEN)
        })
        .collect();
    if candidates.is_empty() {
        return Ok((x_post.clone(), Vec::new()));
    }

    let hit = |x: &LagrangianState, i: usize| {
        q_ratio(x.q[i], x.h[i]) <= q_tol || x.q[i] <= 0.0 || x.w[i] >= 0.0
    };
    let located = exec::map_items(&candidates, settings.parallel, |&i| -> Result<Option<BreakEvent>> {
        let (mut lo, mut hi) = (0.0_f64, dt);
        let mut at_hi: Option<LagrangianState> = None;
        let converged = hit(x_post, i);
        if converged {
            for _ in 0..settings.event_refine {
                let mid = 0.5 * (lo + hi);
                let xm = integrate(mid)?;
                if hit(&xm, i) {
                    hi = mid;
                    at_hi = Some(xm);
                } else {
                    lo = mid;
                }
            }
        } else {
            let mid = 0.5 * (lo + hi);
            at_hi = Some(integrate(mid)?);
            hi = mid;
        }
        let xt = match at_hi {
            Some(x) => x,
            None => x_post.clone(),
        };
        if !pinches(xt.q[i], xt.h[i], xt.rbar[i], q_tol) {
            return Ok(None);
        }
        Ok(Some(BreakEvent {
            node: i,
            tau: t0 + hi,
            y_at_break: xt.y(i),
            h_at_break: xt.h[i].max(0.0),
            converged,
        }))
    });

    let mut out = x_post.clone();
    let mut events = Vec::new();
    for ev in located {
        if let Some(ev) = ev? {
            let i = ev.node;
            out.q[i] = 0.0;
            out.w[i] = 0.0;
            out.rbar[i] = 0.0;
            out.h[i] = ev.h_at_break;
            out.tau[i] = ev.tau;
            events.push(ev);
        }
    }
    Ok((out, events))
}

/// Marks nodes that start collapsed as broken at the initial time.
pub fn initial_breaks(x: &mut LagrangianState, settings: &SolverSettings) -> Vec<BreakEvent> {
    if settings.mode == Mode::Conservative {
        return Vec::new();
    }
    let mut events = Vec::new();
    for i in 0..x.n() {
        if x.is_active(i) && pinches(x.q[i], x.h[i], x.rbar[i], settings.q_tol) {
            x.q[i] = 0.0;
            x.w[i] = 0.0;
            x.rbar[i] = 0.0;
            x.tau[i] = x.t;
            events.push(BreakEvent {
                node: i,
                tau: x.t,
                y_at_break: x.y(i),
                h_at_break: x.h[i],
                converged: true,
            });
        }
    }
    events
}

/// Signed relative residual `(q h - w^2 - rbar^2) / (1 + |q h|)`.
#[inline]
fn residual(x: &LagrangianState, i: usize) -> f64 {
    let qh = x.q[i] * x.h[i];
    (qh - x.w[i] * x.w[i] - x.rbar[i] * x.rbar[i]) / (1.0 + qh.abs())
}

/// Nodes with `q/(q+h)` below this keep their `h` under re-projection.
pub const REPROJECT_MIN_RATIO: f64 = 0.01;

/// Drives one trajectory.
#[derive(Debug, Clone)]
pub struct Solver {
    pub settings: SolverSettings,
    pub params: SystemParams,
    ws: Workspace,
}

/// Result of [`Solver::step`].
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: LagrangianState,
    pub events: Vec<BreakEvent>,
    pub log: StepLog,
}

impl Solver {
    pub fn new(settings: SolverSettings, params: SystemParams, n: usize) -> Self {
        Self { settings, params, ws: Workspace::new(n, settings.parallel) }
    }

    pub fn for_grid(settings: SolverSettings, params: SystemParams, grid: &UniformGrid) -> Self {
        Self { settings, params, ws: Workspace::for_grid(grid, settings.parallel) }
    }

    /// Step size allowed at `x`.
    pub fn stable_dt(&self, x: &LagrangianState) -> f64 {
        let sup_u = (0..x.n())
            .map(|i| (x.velocity(i) - 0.5 * self.params.kappa).abs())
            .fold(0.0, f64::max);
        let cfl = self.settings.cfl * x.grid.spacing() / (1.0 + sup_u);
        self.settings.dt.min(cfl)
    }

    fn mask(&self, x: &LagrangianState) -> Option<Vec<bool>> {
        match self.settings.mode {
            Mode::Dissipative => Some(x.active_mask()),
            Mode::Conservative => None,
        }
    }

    /// One step of exactly `dt`, with breaking detection and re-projection.
    pub fn step(&mut self, x: &LagrangianState, dt: f64) -> Result<StepOutcome> {
        let mask = self.mask(x);
        let post = rk4(x, dt, mask.as_deref(), &self.params, &mut self.ws)?;

        let (mut next, events) = match self.settings.mode {
            Mode::Conservative => (post, Vec::new()),
            Mode::Dissipative => {
                let params = self.params;
                let parallel = self.settings.parallel;
                let grid = x.grid;
                let m = mask.as_deref();
                detect_and_freeze(x, &post, x.t, dt, &self.settings, |s| {
                    let mut ws = Workspace::for_grid(&grid, parallel);
                    rk4(x, s, m, &params, &mut ws)
                })?
            }
        };

        let mut log = StepLog { t: next.t, dt, ..Default::default() };
        for i in 0..next.n() {
            let live = mask.as_ref().map_or(true, |m| m[i]) && next.is_active(i);
            if !live {
                continue;
            }
            let r1 = residual(&next, i);
            log.compat_residual = log.compat_residual.max(r1.abs());
            log.compat_rate = log.compat_rate.max((r1 - residual(x, i)).abs() / dt);
            if next.h[i] < -self.settings.h_neg_tol {
                return Err(Error::StepRejected {
                    t: x.t,
                    reason: format!("h = {:.3e} at node {i}", next.h[i]),
                });
            }
        }
        for i in 0..next.n() {
            let live = mask.as_ref().map_or(true, |m| m[i]) && next.is_active(i);
            if !live {
                continue;
            }
            let (q, w, h, rb) = (next.q[i], next.w[i], next.h[i], next.rbar[i]);
            if residual(&next, i).abs() > self.settings.tol_compat && q_ratio(q, h) >= REPROJECT_MIN_RATIO {
                let hn = (w * w + rb * rb) / q;
                log.reprojection = log.reprojection.max((hn - h).abs());
                next.h[i] = hn;
            }
        }
        log.frozen = next.frozen_count();
        Ok(StepOutcome { state: next, events, log })
    }

    /// Steps from `x.t` to exactly `t_end`, halving rejected steps.
    pub fn advance_to(
        &mut self,
        x: &LagrangianState,
        t_end: f64,
        events: &mut Vec<BreakEvent>,
        logs: &mut Vec<StepLog>,
    ) -> Result<LagrangianState> {
        let mut cur = x.clone();
        while cur.t < t_end - 1e-12 * (1.0 + t_end.abs()) {
            let mut dt = self.stable_dt(&cur).min(t_end - cur.t);
            if t_end - (cur.t + dt) < 1e-9 * dt {
                dt = t_end - cur.t;
            }
            let mut rejected = 0;
            let outcome = loop {
                match self.step(&cur, dt) {
                    Ok(o) => break o,
                    Err(e @ (Error::StepRejected { .. } | Error::NonMonotone { .. })) => {
                        if rejected >= self.settings.max_rejections {
                            return Err(match e {
                                Error::StepRejected { .. } => e,
                                other => Error::StepRejected { t: cur.t, reason: other.to_string() },
                            });
                        }
                        rejected += 1;
                        dt *= 0.5;
                    }
                    Err(e) => return Err(e),
                }
            };
            let mut log = outcome.log;
            log.rejected = rejected;
            logs.push(log);
            events.extend(outcome.events);
            cur = outcome.state;
            if (cur.t - t_end).abs() <= 1e-12 * (1.0 + t_end.abs()) {
                cur.t = t_end;
            }
        }
        Ok(cur)
    }
}

/// One default-parameter step with the step size taken from `settings`.
pub fn step(x: &LagrangianState, settings: &SolverSettings) -> Result<(LagrangianState, Vec<BreakEvent>)> {
    let mut solver = Solver::for_grid(*settings, SystemParams::default(), &x.grid);
    let dt = solver.stable_dt(x);
    let out = solver.step(x, dt)?;
    Ok((out.state, out.events))
}

/// How to map a solution of the reduced system back to `(u, rho)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftMetadata {
    /// `u(t, x) = v(t, x + alpha t) - alpha`.
    pub alpha: f64,
    /// `rho = tau / sqrt(eta)`.
    pub sqrt_eta: f64,
}

impl ShiftMetadata {
    pub fn identity() -> Self {
        Self { alpha: 0.0, sqrt_eta: 1.0 }
    }

    /// Physical `(u, rho)` at time `t` on `grid`, sampled from the reduced
    /// solution `v`.
    pub fn unshift(&self, v: &EulerianState, t: f64, grid: &UniformGrid) -> (Vec<f64>, Vec<f64>) {
        let vu = v.u();
        let vr = v.rho();
        let shift = self.alpha * t;
        let mut u = Vec::with_capacity(grid.n);
        let mut rho = Vec::with_capacity(grid.n);
        for xv in grid.points() {
            let s = xv + shift;
            let (a, b) = if s <= v.grid.min {
                (0.0, v.k)
            } else if s >= v.grid.max {
                (v.c, v.k)
            } else {
                (v.grid.interpolate(&vu, s), v.grid.interpolate(&vr, s))
            };
            u.push(a - self.alpha);
            rho.push(b / self.sqrt_eta);
        }
        (u, rho)
    }
}

/// Maps data of the system with parameters `(kappa, eta)` to the `kappa = 0`,
/// `eta = 1` system via `v(t,x) = u(t, x - alpha t) + alpha`,
/// `tau = sqrt(eta) rho`, `alpha = kappa/2`. The reduced velocity must
/// vanish at `-inf`, which requires `u(-inf) = -kappa/2`.
pub fn reduce_parameters(
    grid: UniformGrid,
    u0: &[f64],
    rho0: &[f64],
    kappa: f64,
    eta: f64,
) -> Result<(EulerianState, ShiftMetadata)> {
    let params = SystemParams { kappa, eta };
    let v0 = params.internal_state(grid, u0, rho0)?;
    Ok((v0, ShiftMetadata { alpha: 0.5 * kappa, sqrt_eta: eta.sqrt() }))
}
