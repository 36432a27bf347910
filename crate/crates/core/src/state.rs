//! Eulerian and Lagrangian state records, membership checks for the
//! admissible Lagrangian set, and the region classifier behind the
//! function `g` used by the stability metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{centered_difference4, UniformGrid};
use crate::partition::PartitionFn;

/// Relative zero-test for `r = rbar + k q`.
pub const DEFAULT_TOL_R: f64 = 1e-12;

/// A point mass of the energy measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Energy measure: absolutely continuous density sampled on the Eulerian
/// grid plus a finite list of atoms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Measure {
    pub density: Vec<f64>,
    #[serde(default)]
    pub atoms: Vec<Atom>,
}

impl Measure {
    pub fn absolutely_continuous(density: Vec<f64>) -> Self {
        Self { density, atoms: Vec::new() }
    }

    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// Total mass, with the density integrated by the trapezoid rule.
    pub fn total(&self, grid: &UniformGrid) -> f64 {
        let ac: f64 = self.density.iter().enumerate().map(|(i, d)| grid.weight(i) * d).sum();
        ac + self.atom_mass()
    }

    pub fn check(&self, n: usize) -> Result<()> {
        if self.density.len() != n {
            return Err(Error::Invalid(format!(
                "measure density has {} samples, grid has {n}",
                self.density.len()
            )));
        }
        if let Some(d) = self.density.iter().find(|d| !(**d >= 0.0) || !d.is_finite()) {
            return Err(Error::Invalid(format!("negative or non-finite density sample {d}")));
        }
        for a in &self.atoms {
            if !(a.mass > 0.0) || !a.mass.is_finite() || !a.location.is_finite() {
                return Err(Error::Invalid(format!("atom {a:?} must have finite positive mass")));
            }
        }
        if self.atoms.windows(2).any(|p| !(p[1].location > p[0].location)) {
            return Err(Error::Invalid("atom locations must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// `(u, rho, mu)` sampled on a uniform x-grid, with `u = ubar + c chi(x)`
/// and `rho = rhobar + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EulerianWire", into = "EulerianWire")]
pub struct EulerianState {
    pub grid: UniformGrid,
    pub ubar: Vec<f64>,
    pub c: f64,
    pub rhobar: Vec<f64>,
    pub k: f64,
    pub mu: Measure,
}

#[derive(Serialize, Deserialize)]
struct EulerianWire {
    x_min: f64,
    x_max: f64,
    n: usize,
    ubar: Vec<f64>,
    c: f64,
    rhobar: Vec<f64>,
    k: f64,
    mu: Measure,
}

impl From<EulerianState> for EulerianWire {
    fn from(e: EulerianState) -> Self {
        Self {
            x_min: e.grid.min,
            x_max: e.grid.max,
            n: e.grid.n,
            ubar: e.ubar,
            c: e.c,
            rhobar: e.rhobar,
            k: e.k,
            mu: e.mu,
        }
    }
}

impl TryFrom<EulerianWire> for EulerianState {
    type Error = Error;
    fn try_from(w: EulerianWire) -> Result<Self> {
        let e = EulerianState {
            grid: UniformGrid::new(w.x_min, w.x_max, w.n)?,
            ubar: w.ubar,
            c: w.c,
            rhobar: w.rhobar,
            k: w.k,
            mu: w.mu,
        };
        e.check_shape()?;
        Ok(e)
    }
}

impl EulerianState {
    /// Zero velocity, constant density `k`, no energy.
    pub fn constant(grid: UniformGrid, k: f64) -> Self {
        Self {
            grid,
            ubar: vec![0.0; grid.n],
            c: 0.0,
            rhobar: vec![0.0; grid.n],
            k,
            mu: Measure::absolutely_continuous(vec![0.0; grid.n]),
        }
    }

    /// Builds a state from full samples of `u` and `rho`. The asymptotes
    /// are read off the grid ends (`u` must vanish on the left), and
    /// `mu` is taken absolutely continuous with density `u_x^2 + rhobar^2`.
    pub fn from_samples(grid: UniformGrid, u: &[f64], rho: &[f64]) -> Result<Self> {
        if u.len() != grid.n || rho.len() != grid.n {
            return Err(Error::Invalid("sample length does not match grid".into()));
        }
        let chi = PartitionFn;
        let c = u[grid.n - 1];
        let k = 0.5 * (rho[0] + rho[grid.n - 1]);
        let ubar: Vec<f64> = (0..grid.n).map(|i| u[i] - c * chi.value(grid.point(i))).collect();
        let rhobar: Vec<f64> = rho.iter().map(|r| r - k).collect();
        let mut e = Self {
            grid,
            ubar,
            c,
            rhobar,
            k,
            mu: Measure::default(),
        };
        e.mu = Measure::absolutely_continuous(e.energy_density());
        Ok(e)
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn check_shape(&self) -> Result<()> {
        let n = self.grid.n;
        if self.ubar.len() != n || self.rhobar.len() != n {
            return Err(Error::Invalid("field length does not match grid".into()));
        }
        self.mu.check(n)
    }

    pub fn u(&self) -> Vec<f64> {
        let chi = PartitionFn;
        (0..self.n()).map(|i| self.ubar[i] + self.c * chi.value(self.grid.point(i))).collect()
    }

    pub fn rho(&self) -> Vec<f64> {
        self.rhobar.iter().map(|r| r + self.k).collect()
    }

    /// `u_x` by fourth-order centered differences of `ubar` plus the exact
    /// `c chi'`.
    pub fn u_x(&self) -> Vec<f64> {
        let chi = PartitionFn;
        let dx = self.grid.spacing();
        centered_difference4(&self.ubar, dx)
            .into_iter()
            .enumerate()
            .map(|(i, d)| d + self.c * chi.d1(self.grid.point(i)))
            .collect()
    }

    /// `u_x^2 + rhobar^2` at the nodes.
    pub fn energy_density(&self) -> Vec<f64> {
        self.u_x()
            .iter()
            .zip(&self.rhobar)
            .map(|(ux, r)| ux * ux + r * r)
            .collect()
    }

    /// The point `X_e(x_i) = (x, ubar, c, 1, u_x, u_x^2 + rhobar^2, rhobar, k)`.
    pub fn phase_point(&self, i: usize, u_x: f64) -> PhasePoint {
        let rb = self.rhobar[i];
        PhasePoint {
            y: self.grid.point(i),
            ubar: self.ubar[i],
            c: self.c,
            q: 1.0,
            w: u_x,
            h: u_x * u_x + rb * rb,
            rbar: rb,
            k: self.k,
        }
    }
}

/// Lagrangian unknown on a uniform label grid: `y = xi + zeta`,
/// `U = Ubar + c chi(y)`, `q = y_xi`, `w = U_xi`, `r = rbar + k q`, and the
/// per-node breaking time `tau` (`+inf` while the characteristic is intact).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LagrangianWire", into = "LagrangianWire")]
pub struct LagrangianState {
    pub grid: UniformGrid,
    pub zeta: Vec<f64>,
    pub ubar: Vec<f64>,
    pub c: f64,
    pub q: Vec<f64>,
    pub w: Vec<f64>,
    pub h: Vec<f64>,
    pub rbar: Vec<f64>,
    pub k: f64,
    pub tau: Vec<f64>,
    pub t: f64,
}

#[derive(Serialize, Deserialize)]
struct LagrangianWire {
    xi_min: f64,
    xi_max: f64,
    n: usize,
    zeta: Vec<f64>,
    #[serde(rename = "Ubar")]
    ubar: Vec<f64>,
    c: f64,
    q: Vec<f64>,
    w: Vec<f64>,
    h: Vec<f64>,
    rbar: Vec<f64>,
    k: f64,
    /// `null` encodes an unbroken characteristic.
    tau: Vec<Option<f64>>,
    t: f64,
}

impl From<LagrangianState> for LagrangianWire {
    fn from(x: LagrangianState) -> Self {
        Self {
            xi_min: x.grid.min,
            xi_max: x.grid.max,
            n: x.grid.n,
            zeta: x.zeta,
            ubar: x.ubar,
            c: x.c,
            q: x.q,
            w: x.w,
            h: x.h,
            rbar: x.rbar,
            k: x.k,
            tau: x.tau.into_iter().map(|t| t.is_finite().then_some(t)).collect(),
            t: x.t,
        }
    }
}

impl TryFrom<LagrangianWire> for LagrangianState {
    type Error = Error;
    fn try_from(w: LagrangianWire) -> Result<Self> {
        let x = LagrangianState {
            grid: UniformGrid::new(w.xi_min, w.xi_max, w.n)?,
            zeta: w.zeta,
            ubar: w.ubar,
            c: w.c,
            q: w.q,
            w: w.w,
            h: w.h,
            rbar: w.rbar,
            k: w.k,
            tau: w.tau.into_iter().map(|t| t.unwrap_or(f64::INFINITY)).collect(),
            t: w.t,
        };
        x.check_shape()?;
        Ok(x)
    }
}

impl LagrangianState {
    /// `y = xi`, no velocity, no energy, density `k`.
    pub fn identity(grid: UniformGrid, k: f64) -> Self {
        let n = grid.n;
        Self {
            grid,
            zeta: vec![0.0; n],
            ubar: vec![0.0; n],
            c: 0.0,
            q: vec![1.0; n],
            w: vec![0.0; n],
            h: vec![0.0; n],
            rbar: vec![0.0; n],
            k,
            tau: vec![f64::INFINITY; n],
            t: 0.0,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn check_shape(&self) -> Result<()> {
        let n = self.grid.n;
        let lens = [
            self.zeta.len(),
            self.ubar.len(),
            self.q.len(),
            self.w.len(),
            self.h.len(),
            self.rbar.len(),
            self.tau.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::Invalid(format!("field lengths {lens:?} do not match n={n}")));
        }
        Ok(())
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.grid.point(i) + self.zeta[i]
    }

    pub fn y_all(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.y(i)).collect()
    }

    /// Full Lagrangian velocity `U = Ubar + c chi(y)`.
    #[inline]
    pub fn velocity(&self, i: usize) -> f64 {
        self.ubar[i] + self.c * PartitionFn.value(self.y(i))
    }

    #[inline]
    pub fn is_active(&self, i: usize) -> bool {
        self.tau[i] > self.t
    }

    pub fn active_mask(&self) -> Vec<bool> {
        (0..self.n()).map(|i| self.is_active(i)).collect()
    }

    pub fn frozen_count(&self) -> usize {
        (0..self.n()).filter(|&i| !self.is_active(i)).count()
    }

    /// `r = rbar + k q`.
    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        self.rbar[i] + self.k * self.q[i]
    }

    pub fn phase_point(&self, i: usize) -> PhasePoint {
        PhasePoint {
            y: self.y(i),
            ubar: self.ubar[i],
            c: self.c,
            q: self.q[i],
            w: self.w[i],
            h: self.h[i],
            rbar: self.rbar[i],
            k: self.k,
        }
    }

    /// Pointwise `|q h - w^2 - rbar^2| / (1 + q h)`.
    #[inline]
    pub fn compat_residual(&self, i: usize) -> f64 {
        let qh = self.q[i] * self.h[i];
        (qh - self.w[i] * self.w[i] - self.rbar[i] * self.rbar[i]).abs() / (1.0 + qh.abs())
    }

    pub fn max_compat_residual(&self) -> f64 {
        (0..self.n()).map(|i| self.compat_residual(i)).fold(0.0, f64::max)
    }

    /// `g(X)` evaluated node by node.
    pub fn g_values(&self, tol_r: f64) -> Vec<f64> {
        (0..self.n()).map(|i| g_value(&self.phase_point(i), tol_r)).collect()
    }
}

/// A point `(y, Ubar, c, q, w, h, rbar, k)` of the eight-dimensional
/// phase space on which `g` is defined.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhasePoint {
    pub y: f64,
    pub ubar: f64,
    pub c: f64,
    pub q: f64,
    pub w: f64,
    pub h: f64,
    pub rbar: f64,
    pub k: f64,
}

impl PhasePoint {
    /// Node point with everything but `(q, w, h, rbar, k)` zeroed.
    pub fn local(q: f64, w: f64, h: f64, rbar: f64, k: f64) -> Self {
        Self { q, w, h, rbar, k, ..Default::default() }
    }

    #[inline]
    pub fn g1(&self) -> f64 {
        self.w.abs() + 2.0 * (self.rbar * self.k).abs() + 2.0 * self.q
    }

    #[inline]
    pub fn g2(&self) -> f64 {
        self.q + self.h
    }
}

/// `|rbar + k q| > tol_r (1 + |rbar| + |k q|)`.
#[inline]
pub fn r_nonzero(rbar: f64, k: f64, q: f64, tol_r: f64) -> bool {
    let kq = k * q;
    (rbar + kq).abs() > tol_r * (1.0 + rbar.abs() + kq.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// `g1 <= g2`, `w <= 0` and `r = 0`.
    Omega1,
    /// `r = 0` outside `Omega1`.
    Omega2,
    /// `r != 0`.
    Omega3,
}

pub fn classify_region(p: &PhasePoint, tol_r: f64) -> Region {
    if r_nonzero(p.rbar, p.k, p.q, tol_r) {
        Region::Omega3
    } else if p.g1() <= p.g2() && p.w <= 0.0 {
        Region::Omega1
    } else {
        Region::Omega2
    }
}

/// `g1` on `Omega1`, `g2` elsewhere.
pub fn g_value(p: &PhasePoint, tol_r: f64) -> f64 {
    match classify_region(p, tol_r) {
        Region::Omega1 => p.g1(),
        Region::Omega2 | Region::Omega3 => p.g2(),
    }
}

/// `g(X_e(x_i))` for every node of an Eulerian state.
pub fn g_eulerian(e: &EulerianState, tol_r: f64) -> Vec<f64> {
    let ux = e.u_x();
    (0..e.n()).map(|i| g_value(&e.phase_point(i, ux[i]), tol_r)).collect()
}

/// Tolerances for [`validate_g`]. All "almost everywhere" conditions are
/// checked at every node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative bound on `q h - w^2 - rbar^2`.
    pub compat: f64,
    /// Lower bound on `q + h`.
    pub floor: f64,
    /// Allowed `|zeta|` at the left end.
    pub left_zeta: f64,
    /// Allowed negative excursion of `q` and `h`.
    pub sign: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { compat: 1e-6, floor: 1e-12, left_zeta: 1e-6, sign: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Invariant {
    /// `q >= 0`.
    NonNegativeQ,
    /// `h >= 0`.
    NonNegativeH,
    /// `q h = w^2 + rbar^2`.
    Compatibility,
    /// `q + h` bounded away from zero.
    LowerBound,
    /// Frozen nodes carry `q = w = rbar = 0`.
    FrozenNode,
    /// `zeta -> 0` as `xi -> -inf`.
    LeftDecay,
    /// NaN or infinite samples.
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub invariant: Invariant,
    pub worst_index: usize,
    pub magnitude: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub tolerances: Option<Tolerances>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn find(&self, invariant: Invariant) -> Option<&Violation> {
        self.violations.iter().find(|v| v.invariant == invariant)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.passed() {
            return write!(f, "state is admissible");
        }
        for v in &self.violations {
            writeln!(
                f,
                "{:?}: {} node(s), worst at {} (magnitude {:.3e})",
                v.invariant, v.count, v.worst_index, v.magnitude
            )?;
        }
        Ok(())
    }
}

struct Tally {
    invariant: Invariant,
    worst: Option<(usize, f64)>,
    count: usize,
}

impl Tally {
    fn new(invariant: Invariant) -> Self {
        Self { invariant, worst: None, count: 0 }
    }

    fn hit(&mut self, i: usize, magnitude: f64) {
        self.count += 1;
        if self.worst.map_or(true, |(_, m)| magnitude > m) {
            self.worst = Some((i, magnitude));
        }
    }

    fn finish(self) -> Option<Violation> {
        self.worst.map(|(worst_index, magnitude)| Violation {
            invariant: self.invariant,
            worst_index,
            magnitude,
            count: self.count,
        })
    }
}

/// Diagnostic membership test for the admissible set. The report is empty
/// iff every check passes.
pub fn validate_g(x: &LagrangianState, tol: &Tolerances) -> ValidationReport {
    let mut non_finite = Tally::new(Invariant::NonFinite);
    let mut neg_q = Tally::new(Invariant::NonNegativeQ);
    let mut neg_h = Tally::new(Invariant::NonNegativeH);
    let mut compat = Tally::new(Invariant::Compatibility);
    let mut floor = Tally::new(Invariant::LowerBound);
    let mut frozen = Tally::new(Invariant::FrozenNode);
    let mut left = Tally::new(Invariant::LeftDecay);

    for i in 0..x.n() {
        let (q, w, h, rb) = (x.q[i], x.w[i], x.h[i], x.rbar[i]);
        if ![x.zeta[i], x.ubar[i], q, w, h, rb].iter().all(|v| v.is_finite()) {
            non_finite.hit(i, f64::INFINITY);
            continue;
        }
        if q < -tol.sign {
            neg_q.hit(i, -q);
        }
        if h < -tol.sign {
            neg_h.hit(i, -h);
        }
        let qh = q * h;
        let res = (qh - (w * w + rb * rb)).abs();
        if res > tol.compat * (1.0 + qh.abs()) {
            compat.hit(i, res / (1.0 + qh.abs()));
        }
        if q + h < tol.floor {
            floor.hit(i, tol.floor - (q + h));
        }
        if !x.is_active(i) && (q != 0.0 || w != 0.0 || rb != 0.0) {
            frozen.hit(i, q.abs() + w.abs() + rb.abs());
        }
    }
    if x.n() > 0 && x.zeta[0].abs() > tol.left_zeta {
        left.hit(0, x.zeta[0].abs());
    }

    let violations = [non_finite, neg_q, neg_h, compat, floor, frozen, left]
        .into_iter()
        .filter_map(Tally::finish)
        .collect();
    ValidationReport { tolerances: Some(*tol), violations }
}
