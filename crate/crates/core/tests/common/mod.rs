//! Shared oracles and fixtures for the integration tests.
#![allow(dead_code)]

use rand::Rng;
use twoch::grid::UniformGrid;
use twoch::partition::PartitionFn;
use twoch::state::LagrangianState;

/// Direct O(N^2) trapezoid evaluation of `P - U^2 - k^2/2` and `Q`.
pub fn oracle_pq(x: &LagrangianState, masked: bool) -> (Vec<f64>, Vec<f64>) {
    let n = x.n();
    let chi = PartitionFn;
    let (c, k) = (x.c, x.k);
    let y = x.y_all();
    let integrand: Vec<f64> = (0..n)
        .map(|j| {
            let mut f = 2.0 * c * c * (chi.d1(y[j]).powi(2) + chi.value(y[j]) * chi.d2(y[j])) * x.q[j];
            if !masked || x.tau[j] > x.t {
                let ub = x.ubar[j];
                f += 2.0 * c * chi.value(y[j]) * ub * x.q[j] + ub * ub * x.q[j] + 0.5 * x.h[j] + k * x.rbar[j];
            }
            f
        })
        .collect();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        let ub = x.ubar[i];
        let mut sp = 0.0;
        let mut sq = 0.0;
        for j in 0..n {
            let e = (-(y[i] - y[j]).abs()).exp() * x.grid.weight(j) * integrand[j];
            sp += e;
            if j < i {
                sq += e;
            } else if j > i {
                sq -= e;
            }
        }
        p[i] = -2.0 * c * chi.value(y[i]) * ub - ub * ub + 0.5 * sp;
        q[i] = 2.0 * c * c * chi.value(y[i]) * chi.d1(y[i]) - 0.5 * sq;
    }
    (p, q)
}

/// A random admissible state: monotone `y`, compatible `(q, w, h, rbar)`,
/// random asymptotes and a few frozen nodes.
pub fn random_state<R: Rng>(rng: &mut R, n: usize) -> LagrangianState {
    let grid = UniformGrid::new(-8.0, 8.0, n).unwrap();
    let mut x = LagrangianState::identity(grid, rng.gen_range(-1.0..1.0));
    x.c = rng.gen_range(-1.0..1.0);
    x.t = 0.5;
    let modes: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-4.0..4.0), rng.gen_range(0.3..2.0)))
        .collect();
    let bump = |xi: f64, m: &(f64, f64, f64)| m.0 * (-(xi - m.1).powi(2) / m.2).exp();
    let dxi = grid.spacing();
    let mut y = grid.min;
    for i in 0..n {
        let xi = grid.point(i);
        let frozen = rng.gen_bool(0.05);
        let q = if frozen { 0.0 } else { rng.gen_range(0.05..1.5) };
        let w = if frozen { 0.0 } else { modes.iter().map(|m| bump(xi, m)).sum::<f64>() };
        let rb = if frozen { 0.0 } else { 0.3 * bump(xi, &modes[1]) };
        let extra = rng.gen_range(0.0..0.5);
        x.q[i] = q;
        x.w[i] = w;
        x.rbar[i] = rb;
        x.h[i] = if frozen { extra + 0.1 } else { (w * w + rb * rb) / q };
        x.ubar[i] = bump(xi, &modes[2]) - bump(xi, &modes[0]);
        if frozen {
            x.tau[i] = rng.gen_range(0.0..0.5);
        }
        if i > 0 {
            y += 0.5 * dxi * (x.q[i - 1] + q);
        }
        x.zeta[i] = y - xi;
    }
    x
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn sup_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Scalar bisection for a nondecreasing `f` on `[lo, hi]`.
pub fn bisect(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
