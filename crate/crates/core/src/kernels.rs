//! The nonlocal terms `P - U^2 - k^2/2` and `Q` on the label grid.
//!
//! Both are exponential-kernel convolutions in the moving coordinate
//! `y(xi)`. Because `y` is nondecreasing, `exp(-|y_i - y_j|)` factors along
//! the grid and two sweeps (left-to-right and right-to-left) evaluate all
//! sums in O(N).

use crate::error::{Error, Result};
use crate::exec;
use crate::partition::PartitionFn;
use crate::state::LagrangianState;

/// Largest tolerated decrease `y_i - y_{i+1}` before the state is rejected.
pub const MONOTONE_TOL: f64 = 1e-8;

/// Which nodes enter the main integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Masking {
    /// Only nodes with `tau > t`.
    Dissipative,
    /// Every node.
    Conservative,
}

/// Kernel output: `pminus = P - U^2 - k^2/2` and `q = Q`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PQ {
    pub pminus: Vec<f64>,
    pub q: Vec<f64>,
}

impl PQ {
    pub fn zeros(n: usize) -> Self {
        Self { pminus: vec![0.0; n], q: vec![0.0; n] }
    }
}

/// Scratch buffers reused across kernel calls.
#[derive(Debug, Clone)]
pub struct KernelWorkspace {
    /// Weighted integrand `w_j F_j`.
    weighted: Vec<f64>,
    fwd: Vec<f64>,
    bwd: Vec<f64>,
    /// `exp(-(y_i - y_{i-1}))`, gaps clamped at zero; entry 0 unused.
    decay: Vec<f64>,
    /// `(-2 c chi Ubar - Ubar^2, 2 c^2 chi chi')` at each node.
    local: Vec<(f64, f64)>,
    /// Parallelize the node-local passes.
    pub parallel: bool,
    /// Tolerated decrease of `y` between neighbours.
    pub monotone_tol: f64,
}

impl KernelWorkspace {
    pub fn new(n: usize, parallel: bool) -> Self {
        Self {
            weighted: vec![0.0; n],
            fwd: vec![0.0; n],
            bwd: vec![0.0; n],
            decay: vec![0.0; n],
            local: vec![(0.0, 0.0); n],
            parallel,
            monotone_tol: MONOTONE_TOL,
        }
    }

    fn resize(&mut self, n: usize) {
        if self.weighted.len() != n {
            self.weighted.resize(n, 0.0);
            self.fwd.resize(n, 0.0);
            self.bwd.resize(n, 0.0);
            self.decay.resize(n, 0.0);
            self.local.resize(n, (0.0, 0.0));
        }
    }

    /// Evaluates the kernels with an explicit activity mask (`None` means
    /// every node is active).
    pub fn evaluate(
        &mut self,
        x: &LagrangianState,
        mask: Option<&[bool]>,
        out: &mut PQ,
    ) -> Result<()> {
        let n = x.n();
        self.resize(n);
        out.pminus.resize(n, 0.0);
        out.q.resize(n, 0.0);
        if n == 0 {
            return Ok(());
        }
        let y = |i: usize| x.grid.point(i) + x.zeta[i];
        for i in 1..n {
            let gap = y(i) - y(i - 1);
            if gap < -self.monotone_tol {
                return Err(Error::NonMonotone { index: i, prev: i - 1, gap });
            }
        }

        let chi = PartitionFn;
        let (c, k) = (x.c, x.k);
        let grid = x.grid;
        exec::fill(&mut self.weighted, self.parallel, |j| {
            let yj = y(j);
            let qj = x.q[j];
            let active = mask.map_or(true, |m| m[j]);
            let mut f = 2.0 * c * c * chi.correction(yj) * qj;
            if active {
                let ub = x.ubar[j];
                f += 2.0 * c * chi.value(yj) * ub * qj + ub * ub * qj + 0.5 * x.h[j] + k * x.rbar[j];
            }
            grid.weight(j) * f
        });
        exec::fill(&mut self.local, self.parallel, |i| {
            let yi = y(i);
            let ub = x.ubar[i];
            let ch = chi.value(yi);
            (-2.0 * c * ch * ub - ub * ub, 2.0 * c * c * ch * chi.d1(yi))
        });

        exec::fill(&mut self.decay, self.parallel, |i| {
            if i == 0 {
                1.0
            } else {
                (-(y(i) - y(i - 1)).max(0.0)).exp()
            }
        });

        let wf = &self.weighted;
        let decay = &self.decay;
        self.fwd[0] = wf[0];
        for i in 1..n {
            self.fwd[i] = decay[i] * self.fwd[i - 1] + wf[i];
        }
        self.bwd[n - 1] = wf[n - 1];
        for i in (0..n - 1).rev() {
            self.bwd[i] = decay[i + 1] * self.bwd[i + 1] + wf[i];
        }

        for i in 0..n {
            let (lp, lq) = self.local[i];
            out.pminus[i] = lp + 0.5 * (self.fwd[i] + self.bwd[i] - wf[i]);
            out.q[i] = lq - 0.5 * (self.fwd[i] - self.bwd[i]);
        }
        Ok(())
    }
}

impl Default for KernelWorkspace {
    fn default() -> Self {
        Self::new(0, false)
    }
}

/// Dissipative kernels: the main integrand runs over unbroken nodes only.
pub fn compute_pq(x: &LagrangianState) -> Result<PQ> {
    let mask = x.active_mask();
    let mut out = PQ::zeros(x.n());
    KernelWorkspace::new(x.n(), false).evaluate(x, Some(&mask), &mut out)?;
    Ok(out)
}

/// Conservative kernels: no mask.
pub fn compute_pq_conservative(x: &LagrangianState) -> Result<PQ> {
    let mut out = PQ::zeros(x.n());
    KernelWorkspace::new(x.n(), false).evaluate(x, None, &mut out)?;
    Ok(out)
}

pub fn compute(x: &LagrangianState, masking: Masking) -> Result<PQ> {
    match masking {
        Masking::Dissipative => compute_pq(x),
        Masking::Conservative => compute_pq_conservative(x),
    }
}
