//! The stability metric `d_R` on Lagrangian states, its Eulerian
//! counterpart `d_D`, energy bookkeeping and the breaking predictor set.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::state::{r_nonzero, EulerianState, LagrangianState, DEFAULT_TOL_R};
use crate::transform::to_lagrangian;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOptions {
    pub tol_r: f64,
    /// Measure above which differing supports of `r` count; `None` means
    /// two label cells.
    pub meas_tol: Option<f64>,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self { tol_r: DEFAULT_TOL_R, meas_tol: None }
    }
}

/// `d_R` and its parts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Distance {
    /// `sup |zeta - zeta~|`.
    pub sup_zeta: f64,
    /// Sum of the L2 norms of the differences of `Ubar, q, w, h, rbar`.
    pub l2_fields: f64,
    /// `|c - c~| + |k - k~|`.
    pub constants: f64,
    /// L2 norm of `g(X) - g(X~)`.
    pub g_l2: f64,
    /// 1 when the supports of `r` differ on a set of positive measure.
    pub kappa: f64,
    pub total: f64,
}

impl Distance {
    pub fn v_norm(&self) -> f64 {
        self.sup_zeta + self.l2_fields + self.constants
    }
}

fn l2(grid: &UniformGrid, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| grid.weight(i) * (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn d_r_with(x: &LagrangianState, y: &LagrangianState, opts: &MetricOptions) -> Result<Distance> {
    if !x.grid.same_as(&y.grid) {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", x.grid, y.grid)));
    }
    let g = x.grid;
    let sup_zeta = x.zeta.iter().zip(&y.zeta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let l2_fields = l2(&g, &x.ubar, &y.ubar)
        + l2(&g, &x.q, &y.q)
        + l2(&g, &x.w, &y.w)
        + l2(&g, &x.h, &y.h)
        + l2(&g, &x.rbar, &y.rbar);
    let constants = (x.c - y.c).abs() + (x.k - y.k).abs();
    let g_l2 = l2(&g, &x.g_values(opts.tol_r), &y.g_values(opts.tol_r));
    let mismatch = (0..g.n)
        .filter(|&i| {
            r_nonzero(x.rbar[i], x.k, x.q[i], opts.tol_r) != r_nonzero(y.rbar[i], y.k, y.q[i], opts.tol_r)
        })
        .count();
    let meas_tol = opts.meas_tol.unwrap_or(2.0 * g.spacing());
    let kappa = if mismatch as f64 * g.spacing() > meas_tol { 1.0 } else { 0.0 };
    let total = sup_zeta + l2_fields + constants + g_l2 + kappa;
    Ok(Distance { sup_zeta, l2_fields, constants, g_l2, kappa, total })
}

/// `d_R(X, X~)` with default options.
pub fn d_r(x: &LagrangianState, y: &LagrangianState) -> Result<f64> {
    d_r_with(x, y, &MetricOptions::default()).map(|d| d.total)
}

/// `d_D(e, e~) = d_R(L e, L e~)` on the given label grid.
pub fn d_d_with(
    a: &EulerianState,
    b: &EulerianState,
    xi_grid: UniformGrid,
    opts: &MetricOptions,
) -> Result<Distance> {
    d_r_with(&to_lagrangian(a, xi_grid)?, &to_lagrangian(b, xi_grid)?, opts)
}

pub fn d_d(a: &EulerianState, b: &EulerianState, xi_grid: UniformGrid) -> Result<f64> {
    d_d_with(a, b, xi_grid, &MetricOptions::default()).map(|d| d.total)
}

/// Nodes with `h/(q+h) >= 1 - gamma`, `w <= 0` and `r = 0`: those about
/// to break.
pub fn kappa_set(x: &LagrangianState, gamma: f64) -> Vec<usize> {
    assert!(gamma > 0.0 && gamma <= 0.5, "gamma must lie in (0, 1/2]");
    (0..x.n())
        .filter(|&i| {
            let s = x.q[i] + x.h[i];
            s > 0.0
                && x.h[i] / s >= 1.0 - gamma
                && x.w[i] <= 0.0
                && !r_nonzero(x.rbar[i], x.k, x.q[i], DEFAULT_TOL_R)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergyReport {
    pub t: f64,
    /// `sum (Ubar^2 q + h) dxi`.
    pub sigma: f64,
    /// `mu(R) = sum h dxi`.
    pub mu_total: f64,
    /// `int (u_x^2 + rhobar^2) dx`, the part of `h` on unbroken nodes.
    pub eulerian_energy: f64,
    /// Energy concentrated on broken characteristics.
    #[serde(rename = "F")]
    pub f: f64,
}

pub fn energy_report(x: &LagrangianState) -> EnergyReport {
    let g = x.grid;
    let mut sigma = 0.0;
    let mut mu_total = 0.0;
    let mut eulerian = 0.0;
    for i in 0..g.n {
        let wi = g.weight(i);
        sigma += wi * (x.ubar[i] * x.ubar[i] * x.q[i] + x.h[i]);
        mu_total += wi * x.h[i];
        if x.q[i] > 0.0 {
            eulerian += wi * x.h[i];
        }
    }
    EnergyReport {
        t: x.t,
        sigma,
        mu_total,
        eulerian_energy: eulerian,
        f: mu_total - eulerian,
    }
}

/// `sup d_R(X(t), X(s)) / |t - s|` over all pairs of distinct times.
pub fn time_lipschitz(states: &[LagrangianState]) -> Result<f64> {
    let mut best = 0.0_f64;
    for (a, xa) in states.iter().enumerate() {
        for xb in &states[a + 1..] {
            let dt = (xb.t - xa.t).abs();
            if dt > 0.0 {
                best = best.max(d_r(xa, xb)? / dt);
            }
        }
    }
    Ok(best)
}
