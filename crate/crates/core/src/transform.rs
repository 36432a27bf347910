//! Maps between Eulerian data `(u, rho, mu)` and Lagrangian states: `L`
//! ([`to_lagrangian`]), `M` ([`to_eulerian`]), the relabeling action and
//! the normalization `Gamma` onto states with `y + H = id`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{cumulative_trapezoid, last_le, UniformGrid};
use crate::partition::PartitionFn;
use crate::state::{Atom, EulerianState, LagrangianState, Measure};

/// Nodes with `q` below this are treated as collapsed by [`to_eulerian`].
pub const ZERO_Q_TOL: f64 = 1e-9;

/// Below this `q` the cubic reconstruction of `u` falls back to linear.
const HERMITE_MIN_Q: f64 = 0.05;

/// Cubic Hermite interpolation on `[0, 1]` scaled to a cell of width `dx`.
#[inline]
fn hermite(f0: f64, f1: f64, d0: f64, d1: f64, dx: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * f0
        + (t3 - 2.0 * t2 + t) * dx * d0
        + (-2.0 * t3 + 3.0 * t2) * f1
        + (t3 - t2) * dx * d1
}

/// Piecewise data of `G(x) = x + mu((-inf, x))` and of the fields needed at
/// the characteristic positions.
struct EnergyMap<'a> {
    e: &'a EulerianState,
    dx: f64,
    ux: Vec<f64>,
    dubar: Vec<f64>,
    /// Continuous part `x + int_{x_0}^x (u_x^2 + rhobar^2)` at the nodes.
    gc: Vec<f64>,
    /// Plateau start `G(a-)` for each atom.
    atom_start: Vec<f64>,
    /// Atom masses accumulated strictly before each atom.
    atom_before: Vec<f64>,
}

impl<'a> EnergyMap<'a> {
    fn new(e: &'a EulerianState) -> Self {
        let grid = e.grid;
        let dx = grid.spacing();
        let ux = e.u_x();
        let chi = PartitionFn;
        let dubar: Vec<f64> = (0..grid.n).map(|i| ux[i] - e.c * chi.d1(grid.point(i))).collect();
        let mut gc = Vec::with_capacity(grid.n);
        let mut acc = 0.0;
        gc.push(grid.point(0));
        for m in 0..grid.n - 1 {
            acc += Self::cell_integral(&ux, &e.rhobar, m, dx, 1.0);
            gc.push(grid.point(m + 1) + acc);
        }
        let mut map = Self {
            e,
            dx,
            ux,
            dubar,
            gc,
            atom_start: Vec::new(),
            atom_before: Vec::new(),
        };
        let mut before = 0.0;
        for a in &e.mu.atoms {
            let start = map.g_cont(a.location) + before;
            map.atom_start.push(start);
            map.atom_before.push(before);
            before += a.mass;
        }
        map
    }

    /// `int_{x_m}^{x_m + theta dx}` of the quadratic density built from
    /// linear `u_x` and `rhobar` on cell `m`.
    #[inline]
    fn cell_integral(ux: &[f64], rb: &[f64], m: usize, dx: f64, theta: f64) -> f64 {
        let quad = |f0: f64, f1: f64| {
            let d = f1 - f0;
            f0 * f0 * theta + f0 * d * theta * theta + d * d * theta * theta * theta / 3.0
        };
        dx * (quad(ux[m], ux[m + 1]) + quad(rb[m], rb[m + 1]))
    }

    /// `(u_x, rhobar)` at `x`, zero outside the grid.
    fn local(&self, x: f64) -> (f64, f64) {
        let grid = self.e.grid;
        if x < grid.min || x > grid.max {
            return (0.0, 0.0);
        }
        (grid.interpolate(&self.ux, x), grid.interpolate(&self.e.rhobar, x))
    }

    fn ubar_at(&self, x: f64) -> f64 {
        let grid = self.e.grid;
        let ub = &self.e.ubar;
        if x <= grid.min {
            return ub[0];
        }
        if x >= grid.max {
            return ub[grid.n - 1];
        }
        let (m, t) = grid.locate(x);
        hermite(ub[m], ub[m + 1], self.dubar[m], self.dubar[m + 1], self.dx, t)
    }

    /// Continuous part of `G`.
    fn g_cont(&self, x: f64) -> f64 {
        let grid = self.e.grid;
        let n = grid.n;
        if x <= grid.min {
            return x;
        }
        if x >= grid.max {
            return x + (self.gc[n - 1] - grid.max);
        }
        let (m, t) = grid.locate(x);
        self.gc[m] + t * self.dx + Self::cell_integral(&self.ux, &self.e.rhobar, m, self.dx, t)
    }

    /// Solves `g_cont(y) = s`.
    fn invert_cont(&self, s: f64) -> f64 {
        let grid = self.e.grid;
        let n = grid.n;
        if s <= self.gc[0] {
            return s;
        }
        if s >= self.gc[n - 1] {
            return grid.max + (s - self.gc[n - 1]);
        }
        let m = last_le(&self.gc, s).unwrap().min(n - 2);
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let target = s - self.gc[m];
        let f = |t: f64| t * self.dx + Self::cell_integral(&self.ux, &self.e.rhobar, m, self.dx, t) - target;
        let mut t = (target / (self.gc[m + 1] - self.gc[m])).clamp(0.0, 1.0);
        for _ in 0..60 {
            let r = f(t);
            if r.abs() <= 1e-15 * (1.0 + s.abs()) {
                break;
            }
            if r > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let x = grid.point(m) + t * self.dx;
            let (a, b) = self.local(x);
            let slope = self.dx * (1.0 + a * a + b * b);
            let next = t - r / slope;
            t = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-16 {
                break;
            }
        }
        grid.point(m) + t * self.dx
    }

    /// `y(xi) = sup { y : G(y) < xi }` and whether `xi` lies on an atom's
    /// plateau.
    fn invert(&self, xi: f64) -> (f64, bool) {
        let atoms = &self.e.mu.atoms;
        // Atoms whose plateau ends strictly below xi.
        let j = self
            .atom_start
            .iter()
            .zip(atoms)
            .take_while(|(s, a)| *s + a.mass < xi)
            .count();
        if j < atoms.len() && xi >= self.atom_start[j] {
            return (atoms[j].location, true);
        }
        let before = if j < atoms.len() {
            self.atom_before[j]
        } else {
            self.e.mu.atom_mass()
        };
        (self.invert_cont(xi - before), false)
    }
}

/// The map `L`: Eulerian data to a Lagrangian state with `y + H = id`.
///
/// The absolutely continuous part of `mu` is rebuilt as `u_x^2 + rhobar^2`
/// from piecewise-linear `u_x` and `rhobar`, so compatibility
/// `q h = w^2 + rbar^2` holds exactly at every node. Atoms become plateaus of
/// `y` with `q = 0`, `h = 1`.
pub fn to_lagrangian(e: &EulerianState, xi_grid: UniformGrid) -> Result<LagrangianState> {
    e.check_shape()?;
    let limit = 2.0 * xi_grid.spacing();
    if let Some(a) = e.mu.atoms.iter().find(|a| a.mass < limit) {
        return Err(Error::GridTooCoarse { location: a.location, mass: a.mass, limit });
    }
    let map = EnergyMap::new(e);
    let chi = PartitionFn;
    let nodes = exec::map_range(xi_grid.n, true, |i| {
        let xi = xi_grid.point(i);
        let (y, plateau) = map.invert(xi);
        let ub = map.ubar_at(y);
        if plateau {
            return (y - xi, ub, 0.0, 0.0, 1.0, 0.0);
        }
        let (ux, rb) = map.local(y);
        let q = 1.0 / (1.0 + ux * ux + rb * rb);
        let _ = chi;
        (y - xi, ub, q, ux * q, 1.0 - q, rb * q)
    });
    let n = xi_grid.n;
    let mut x = LagrangianState::identity(xi_grid, e.k);
    x.c = e.c;
    for (i, (z, ub, q, w, h, rb)) in nodes.into_iter().enumerate() {
        x.zeta[i] = z;
        x.ubar[i] = ub;
        x.q[i] = q;
        x.w[i] = w;
        x.h[i] = h;
        x.rbar[i] = rb;
    }
    debug_assert_eq!(x.n(), n);
    Ok(x)
}

/// Side information from [`to_eulerian_with_report`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PlateauReport {
    /// Collapsed runs turned into atoms.
    pub atoms: usize,
    /// Collapsed runs too light to resolve as atoms.
    pub deposited_runs: usize,
    /// Mass of those runs, moved into the density.
    pub deposited_mass: f64,
    /// Largest spread of `U` across one collapsed run.
    pub max_u_spread: f64,
}

struct Knot {
    y: f64,
    u: f64,
    /// `u_x = w / q`, absent on collapsed runs and near-degenerate nodes.
    slope: Option<f64>,
}

/// The map `M`: pushes a Lagrangian state forward to Eulerian samples on
/// `x_grid`.
pub fn to_eulerian(x: &LagrangianState, x_grid: UniformGrid) -> Result<EulerianState> {
    to_eulerian_with_report(x, x_grid).map(|(e, _)| e)
}

pub fn to_eulerian_with_report(
    x: &LagrangianState,
    x_grid: UniformGrid,
) -> Result<(EulerianState, PlateauReport)> {
    x.check_shape()?;
    let n = x.n();
    let chi = PartitionFn;
    for i in 0..n {
        let (q, h, rb) = (x.q[i], x.h[i], x.rbar[i]);
        if q < ZERO_Q_TOL && rb * rb > q * h * (1.0 + 1e-6) + 1e-12 {
            return Err(Error::Inconsistent { index: i, q, rbar: rb });
        }
    }

    let mut report = PlateauReport::default();
    let mut knots: Vec<Knot> = Vec::with_capacity(n);
    let mut dens_y = Vec::with_capacity(n);
    let mut dens = Vec::with_capacity(n);
    let mut rho = Vec::with_capacity(n);
    let mut atoms: Vec<Atom> = Vec::new();
    let mut loose: Vec<(f64, f64)> = Vec::new();
    let min_atom = 2.0 * x.grid.spacing();

    // Small crossings of neighbouring characteristics are flattened.
    let mut ymono = x.y_all();
    for i in 1..n {
        ymono[i] = ymono[i].max(ymono[i - 1]);
    }

    let mut i = 0;
    while i < n {
        if x.q[i] >= ZERO_Q_TOL {
            let (y, q) = (ymono[i], x.q[i]);
            knots.push(Knot {
                y,
                u: x.velocity(i),
                slope: (q >= HERMITE_MIN_Q).then(|| x.w[i] / q),
            });
            dens_y.push(y);
            dens.push(x.h[i] / q);
            rho.push(x.rbar[i] / q);
            i += 1;
            continue;
        }
        let start = i;
        while i < n && x.q[i] < ZERO_Q_TOL {
            i += 1;
        }
        let run = start..i;
        let len = run.len() as f64;
        let mass: f64 = run.clone().map(|j| x.h[j] * x.grid.weight(j)).sum();
        let y_mean = run.clone().map(|j| ymono[j]).sum::<f64>() / len;
        let us: Vec<f64> = run.clone().map(|j| x.velocity(j)).collect();
        let u_mean = us.iter().sum::<f64>() / len;
        let spread = us.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - us.iter().cloned().fold(f64::INFINITY, f64::min);
        report.max_u_spread = report.max_u_spread.max(spread);
        knots.push(Knot { y: y_mean, u: u_mean, slope: None });
        if mass >= min_atom {
            report.atoms += 1;
            match atoms.last_mut() {
                Some(a) if y_mean <= a.location + 1e-12 => a.mass += mass,
                _ => atoms.push(Atom { location: y_mean, mass }),
            }
        } else if mass > 0.0 {
            report.deposited_runs += 1;
            report.deposited_mass += mass;
            loose.push((y_mean, mass));
        }
    }

    let ys: Vec<f64> = knots.iter().map(|k| k.y).collect();
    let velocity = |xv: f64| -> f64 {
        match last_le(&ys, xv) {
            None => knots[0].u,
            Some(j) if j + 1 >= knots.len() => knots[j].u,
            Some(j) => {
                let (a, b) = (&knots[j], &knots[j + 1]);
                let dy = b.y - a.y;
                if dy <= 0.0 {
                    return b.u;
                }
                let t = (xv - a.y) / dy;
                match (a.slope, b.slope) {
                    (Some(d0), Some(d1)) => hermite(a.u, b.u, d0, d1, dy, t),
                    _ => a.u + t * (b.u - a.u),
                }
            }
        }
    };
    let piecewise = |vals: &[f64], xv: f64, outside: Option<f64>| -> f64 {
        if vals.is_empty() {
            return outside.unwrap_or(0.0);
        }
        match last_le(&dens_y, xv) {
            None => outside.unwrap_or(vals[0]),
            Some(j) if j + 1 >= vals.len() => {
                if xv > dens_y[j] {
                    outside.unwrap_or(vals[j])
                } else {
                    vals[j]
                }
            }
            Some(j) => {
                let dy = dens_y[j + 1] - dens_y[j];
                if dy <= 0.0 {
                    vals[j + 1]
                } else {
                    vals[j] + (xv - dens_y[j]) / dy * (vals[j + 1] - vals[j])
                }
            }
        }
    };

    let m = x_grid.n;
    let samples = exec::map_range(m, true, |k| {
        let xv = x_grid.point(k);
        let u = velocity(xv);
        (
            u - x.c * chi.value(xv),
            piecewise(&rho, xv, None),
            piecewise(&dens, xv, Some(0.0)),
        )
    });
    let mut ubar = Vec::with_capacity(m);
    let mut rhobar = Vec::with_capacity(m);
    let mut density = Vec::with_capacity(m);
    for (a, b, c) in samples {
        ubar.push(a);
        rhobar.push(b);
        density.push(c.max(0.0));
    }
    for (loc, mass) in loose {
        let (cell, t) = x_grid.locate(loc);
        let node = if t < 0.5 { cell } else { cell + 1 }.min(m - 1);
        density[node] += mass / x_grid.weight(node);
    }

    let e = EulerianState {
        grid: x_grid,
        ubar,
        c: x.c,
        rhobar,
        k: x.k,
        mu: Measure { density, atoms },
    };
    Ok((e, report))
}

/// A relabeling `f` of the label line: strictly increasing with `f - id`
/// and `f^{-1} - id` Lipschitz. Samples live on a fixed label grid and are
/// extended by translation outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Relabeling {
    pub grid: UniformGrid,
    pub f: Vec<f64>,
    pub df: Vec<f64>,
    pub f_inv: Vec<f64>,
}

impl Relabeling {
    pub fn identity(grid: UniformGrid) -> Self {
        let p = grid.points();
        Self { grid, f: p.clone(), df: vec![1.0; grid.n], f_inv: p }
    }

    /// From a closed-form map and its derivative.
    pub fn from_fn(
        grid: UniformGrid,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let p = grid.points();
        let fs: Vec<f64> = p.iter().map(|&v| f(v)).collect();
        let dfs: Vec<f64> = p.iter().map(|&v| df(v)).collect();
        Self::build(grid, fs, dfs)
    }

    /// From samples only; the derivative is taken by centered differences.
    pub fn from_samples(grid: UniformGrid, f: Vec<f64>) -> Result<Self> {
        let df = crate::grid::centered_difference(&f, grid.spacing());
        Self::build(grid, f, df)
    }

    fn build(grid: UniformGrid, f: Vec<f64>, df: Vec<f64>) -> Result<Self> {
        if f.len() != grid.n || df.len() != grid.n {
            return Err(Error::Invalid("relabeling sample count does not match grid".into()));
        }
        if f.windows(2).any(|p| !(p[1] > p[0])) || df.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Invalid("relabeling must be strictly increasing".into()));
        }
        let mut r = Self { grid, f, df, f_inv: Vec::new() };
        r.f_inv = grid.points().iter().map(|&v| r.inverse_at(v)).collect();
        Ok(r)
    }

    /// `f` at an arbitrary label, translated outside the grid.
    pub fn eval(&self, xi: f64) -> f64 {
        let g = self.grid;
        if xi <= g.min {
            return self.f[0] + (xi - g.min);
        }
        if xi >= g.max {
            return self.f[g.n - 1] + (xi - g.max);
        }
        g.interpolate(&self.f, xi)
    }

    pub fn inverse_at(&self, s: f64) -> f64 {
        let g = self.grid;
        if s <= self.f[0] {
            return g.min + (s - self.f[0]);
        }
        if s >= self.f[g.n - 1] {
            return g.max + (s - self.f[g.n - 1]);
        }
        let j = last_le(&self.f, s).unwrap().min(g.n - 2);
        g.point(j) + (s - self.f[j]) / (self.f[j + 1] - self.f[j]) * g.spacing()
    }

    /// The inverse relabeling.
    pub fn inverse(&self) -> Self {
        let df = self
            .f_inv
            .iter()
            .map(|&v| 1.0 / self.derivative_at(v))
            .collect();
        Self {
            grid: self.grid,
            f: self.f_inv.clone(),
            df,
            f_inv: self.f.clone(),
        }
    }

    fn derivative_at(&self, xi: f64) -> f64 {
        let g = self.grid;
        if xi <= g.min || xi >= g.max {
            1.0
        } else {
            g.interpolate(&self.df, xi)
        }
    }

    /// `self ∘ other`, i.e. `xi -> self(other(xi))`.
    pub fn compose(&self, other: &Relabeling) -> Result<Self> {
        let f: Vec<f64> = other.f.iter().map(|&v| self.eval(v)).collect();
        let df: Vec<f64> = other
            .f
            .iter()
            .zip(&other.df)
            .map(|(&v, d)| self.derivative_at(v) * d)
            .collect();
        Self::build(self.grid, f, df)
    }

    /// Smallest `kappa` with `1/(1+kappa) <= f' <= 1+kappa`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.df
            .iter()
            .map(|&d| (d - 1.0).max(1.0 / d - 1.0))
            .fold(0.0, f64::max)
    }
}

/// Samples a node field at a label that may fall off the grid.
#[inline]
fn field_at(grid: &UniformGrid, v: &[f64], xi: f64) -> f64 {
    grid.interpolate(v, xi)
}

/// `y` at an arbitrary label, extended linearly with the end slopes `q`.
fn y_at(x: &LagrangianState, xi: f64) -> f64 {
    let g = x.grid;
    let n = g.n;
    if xi <= g.min {
        return x.y(0) + x.q[0] * (xi - g.min);
    }
    if xi >= g.max {
        return x.y(n - 1) + x.q[n - 1] * (xi - g.max);
    }
    let (j, t) = g.locate(xi);
    x.y(j) + t * (x.y(j + 1) - x.y(j))
}

fn tau_at(x: &LagrangianState, xi: f64) -> f64 {
    let (j, t) = x.grid.locate(xi);
    let idx = if t < 0.5 { j } else { j + 1 };
    x.tau[idx.min(x.n() - 1)]
}

/// Composes `x` with `f`: `(y∘f, U∘f, h∘f f', rbar∘f f')`, with `q` and `w`
/// picking up the same Jacobian factor.
pub fn relabel(x: &LagrangianState, f: &Relabeling) -> Result<LagrangianState> {
    if !x.grid.same_as(&f.grid) {
        return Err(Error::GridMismatch("relabeling and state use different label grids".into()));
    }
    let g = x.grid;
    let mut out = x.clone();
    for i in 0..g.n {
        let s = f.f[i];
        let d = f.df[i];
        out.zeta[i] = y_at(x, s) - g.point(i);
        out.ubar[i] = field_at(&g, &x.ubar, s);
        out.q[i] = field_at(&g, &x.q, s) * d;
        out.w[i] = field_at(&g, &x.w, s) * d;
        out.h[i] = field_at(&g, &x.h, s) * d;
        out.rbar[i] = field_at(&g, &x.rbar, s) * d;
        out.tau[i] = tau_at(x, s);
    }
    Ok(out)
}

/// `Gamma(X) = X ∘ (y + H)^{-1}` with `H` the running integral of `h`.
pub fn normalize(x: &LagrangianState) -> LagrangianState {
    let g = x.grid;
    let n = g.n;
    let dxi = g.spacing();
    let big_h = cumulative_trapezoid(&x.h, dxi);
    let s: Vec<f64> = (0..n).map(|i| x.y(i) + big_h[i]).collect();
    let slope_l = x.q[0] + x.h[0];
    let slope_r = x.q[n - 1] + x.h[n - 1];
    let s_inv = |target: f64| -> f64 {
        if target <= s[0] {
            return g.min + (target - s[0]) / slope_l;
        }
        if target >= s[n - 1] {
            return g.max + (target - s[n - 1]) / slope_r;
        }
        let j = last_le(&s, target).unwrap().min(n - 2);
        let ds = s[j + 1] - s[j];
        if ds <= 0.0 {
            return g.point(j);
        }
        g.point(j) + (target - s[j]) / ds * dxi
    };
    let mut out = x.clone();
    for i in 0..n {
        let xi = g.point(i);
        let eta = s_inv(xi);
        let jac = field_at(&g, &x.q, eta) + field_at(&g, &x.h, eta);
        let scale = if jac > 0.0 { 1.0 / jac } else { 0.0 };
        out.zeta[i] = y_at(x, eta) - xi;
        out.ubar[i] = field_at(&g, &x.ubar, eta);
        out.q[i] = field_at(&g, &x.q, eta) * scale;
        out.w[i] = field_at(&g, &x.w, eta) * scale;
        out.h[i] = field_at(&g, &x.h, eta) * scale;
        out.rbar[i] = field_at(&g, &x.rbar, eta) * scale;
        out.tau[i] = tau_at(x, eta);
    }
    out
}

/// `max |y + H - xi|` over the grid: zero for states in normal form.
pub fn normalization_defect(x: &LagrangianState) -> f64 {
    let big_h = cumulative_trapezoid(&x.h, x.grid.spacing());
    (0..x.n())
        .map(|i| (x.y(i) + big_h[i] - x.grid.point(i)).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xg() -> UniformGrid {
        UniformGrid::new(-10.0, 10.0, 401).unwrap()
    }

    #[test]
    fn empty_measure_gives_identity() {
        let e = EulerianState::constant(xg(), 0.0);
        let x = to_lagrangian(&e, xg()).unwrap();
        assert_eq!(x, LagrangianState::identity(xg(), 0.0));
    }

    #[test]
    fn unit_atom_opens_a_plateau() {
        let mut e = EulerianState::constant(xg(), 0.0);
        e.mu.atoms.push(Atom { location: 0.0, mass: 1.0 });
        let x = to_lagrangian(&e, xg()).unwrap();
        for i in 0..x.n() {
            let xi = x.grid.point(i);
            let expect = if xi <= 0.0 {
                xi
            } else if xi <= 1.0 {
                0.0
            } else {
                xi - 1.0
            };
            assert!((x.y(i) - expect).abs() < 1e-12, "xi={xi} y={}", x.y(i));
            let inside = (0.0..=1.0).contains(&xi);
            assert_eq!(x.h[i], if inside { 1.0 } else { 0.0 }, "xi={xi}");
        }
    }

    #[test]
    fn light_atom_is_rejected() {
        let mut e = EulerianState::constant(xg(), 0.0);
        e.mu.atoms.push(Atom { location: 0.0, mass: 0.01 });
        assert!(matches!(to_lagrangian(&e, xg()), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn identity_maps_to_rest() {
        let x = LagrangianState::identity(xg(), 0.7);
        let e = to_eulerian(&x, xg()).unwrap();
        assert!(e.ubar.iter().all(|v| *v == 0.0));
        assert!(e.rho().iter().all(|v| (*v - 0.7).abs() < 1e-15));
        assert!(e.mu.density.iter().all(|v| *v == 0.0) && e.mu.atoms.is_empty());
    }

    #[test]
    fn atom_survives_round_trip() {
        let mut e = EulerianState::constant(xg(), 0.0);
        e.mu.atoms.push(Atom { location: 0.0, mass: 1.0 });
        let x = to_lagrangian(&e, xg()).unwrap();
        let back = to_eulerian(&x, xg()).unwrap();
        assert_eq!(back.mu.atoms.len(), 1);
        let a = back.mu.atoms[0];
        assert!(a.location.abs() < 1e-12);
        assert!((a.mass - 1.0).abs() <= 1.01 * xg().spacing());
    }

    #[test]
    fn inconsistent_zero_q_node_is_rejected() {
        let mut x = LagrangianState::identity(xg(), 0.0);
        x.q[10] = 0.0;
        x.rbar[10] = 0.5;
        assert!(matches!(to_eulerian(&x, xg()), Err(Error::Inconsistent { index: 10, .. })));
    }

    #[test]
    fn identity_relabeling_is_a_no_op() {
        let mut x = LagrangianState::identity(xg(), 0.2);
        x.ubar[5] = 1.0;
        let r = relabel(&x, &Relabeling::identity(xg())).unwrap();
        for (a, b) in [(&r.zeta, &x.zeta), (&r.ubar, &x.ubar), (&r.q, &x.q), (&r.h, &x.h)] {
            assert!(a.iter().zip(b).all(|(u, v)| (u - v).abs() < 1e-12));
        }
        assert_eq!((r.c, r.k, &r.tau), (x.c, x.k, &x.tau));
    }

    #[test]
    fn relabeling_inverse_round_trips() {
        let f = Relabeling::from_fn(xg(), |s| s + 0.2 * (-s * s).exp(), |s| 1.0 - 0.4 * s * (-s * s).exp())
            .unwrap();
        let id = f.compose(&f.inverse()).unwrap();
        for (a, b) in id.f.iter().zip(xg().points()) {
            assert!((a - b).abs() < 1e-3);
        }
        assert!(f.lipschitz_bound() < 0.3);
    }

    #[test]
    fn normal_form_is_fixed_by_gamma() {
        let mut e = EulerianState::constant(xg(), 0.0);
        for i in 0..e.n() {
            let x = e.grid.point(i);
            e.ubar[i] = (-x * x).exp();
        }
        e.mu = Measure::absolutely_continuous(e.energy_density());
        let x = to_lagrangian(&e, xg()).unwrap();
        assert!(normalization_defect(&x) < 1e-3);
        let gx = normalize(&x);
        assert!(normalization_defect(&gx) < 1e-3);
        let ggx = normalize(&gx);
        let d = (0..x.n()).map(|i| (ggx.zeta[i] - gx.zeta[i]).abs()).fold(0.0, f64::max);
        assert!(d < 1e-3, "{d}");
    }
}
