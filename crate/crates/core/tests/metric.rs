mod common;

use common::{random_state, rng};
use proptest::prelude::*;
use twoch::evolution::{Mode, Solver, SolverSettings, SystemParams};
use twoch::grid::UniformGrid;
use twoch::metric::{d_d, d_r, d_r_with, energy_report, kappa_set, time_lipschitz, MetricOptions};
use twoch::scenarios::{build_scenario, ScenarioParams};
use twoch::state::LagrangianState;
use twoch::transform::{to_eulerian, to_lagrangian};

fn start(name: &str, eps: f64, n: usize) -> LagrangianState {
    let xg = UniformGrid::new(-12.0, 12.0, 2001).unwrap();
    let p = ScenarioParams { epsilon: eps, ..Default::default() };
    let e = build_scenario(name, &p, xg).unwrap();
    to_lagrangian(&e, UniformGrid::new(-16.0, 16.0, n).unwrap()).unwrap()
}

fn trajectory(x0: &LagrangianState, times: &[f64], mode: Mode) -> Vec<LagrangianState> {
    let settings = SolverSettings { mode, ..Default::default() };
    let mut solver = Solver::for_grid(settings, SystemParams::default(), &x0.grid);
    let mut x = x0.clone();
    times
        .iter()
        .map(|&t| {
            x = solver.advance_to(&x, t, &mut Vec::new(), &mut Vec::new()).unwrap();
            x.clone()
        })
        .collect()
}

/// Plateau of `len` nodes starting at node `a`: `q = 0`, `h = 1`.
fn block(grid: UniformGrid, a: usize, len: usize) -> LagrangianState {
    let mut x = LagrangianState::identity(grid, 0.0);
    let dxi = grid.spacing();
    for i in 0..grid.n {
        if i >= a && i < a + len {
            x.q[i] = 0.0;
            x.h[i] = 1.0;
            x.zeta[i] = grid.point(a) - grid.point(i);
        } else if i >= a + len {
            x.zeta[i] = -((len - 1) as f64) * dxi;
        }
    }
    x
}

#[test]
fn translated_block_distance_by_hand() {
    let g = UniformGrid::new(-5.0, 5.0, 1001).unwrap();
    let dxi = g.spacing();
    let x = block(g, 500, 101);
    let y = block(g, 501, 101);
    let d = d_r_with(&x, &y, &MetricOptions::default()).unwrap();
    // zeta differs by one cell inside the block; q, h and g each differ
    // by 1 at the two edge nodes.
    assert!((d.sup_zeta - dxi).abs() < 1e-12);
    let edge = (2.0 * dxi).sqrt();
    assert!((d.l2_fields - 2.0 * edge).abs() < 1e-12);
    assert!((d.g_l2 - edge).abs() < 1e-12);
    assert_eq!(d.kappa, 0.0);
    assert!((d.total - (dxi + 3.0 * edge)).abs() < 1e-12);
}

#[test]
fn differing_density_support_adds_one() {
    let g = UniformGrid::new(-5.0, 5.0, 201).unwrap();
    let x = LagrangianState::identity(g, 0.0);
    let mut y = x.clone();
    for i in 90..110 {
        y.rbar[i] = 1e-3;
    }
    let d = d_r_with(&x, &y, &MetricOptions::default()).unwrap();
    assert_eq!(d.kappa, 1.0);
    y.rbar[91..110].iter_mut().for_each(|r| *r = 0.0);
    let d = d_r_with(&x, &y, &MetricOptions::default()).unwrap();
    assert_eq!(d.kappa, 0.0);
}

#[test]
fn density_support_difference_is_preserved_by_the_flow() {
    let times = [0.5, 1.5, 2.5, 3.0];
    let vacuum = trajectory(&start("gaussian-cubic", 0.0, 1024), &times, Mode::Dissipative);
    let thin = trajectory(&start("gaussian-cubic", 0.01, 1024), &times, Mode::Dissipative);
    let thicker = trajectory(&start("gaussian-cubic", 0.02, 1024), &times, Mode::Dissipative);
    for i in 0..times.len() {
        let opts = MetricOptions::default();
        assert_eq!(d_r_with(&vacuum[i], &thin[i], &opts).unwrap().kappa, 1.0);
        assert_eq!(d_r_with(&thin[i], &thicker[i], &opts).unwrap().kappa, 0.0);
    }
}

#[test]
fn eulerian_distance_vanishes_on_the_diagonal() {
    let xg = UniformGrid::new(-12.0, 12.0, 1001).unwrap();
    let e = build_scenario("gaussian-cubic", &ScenarioParams { epsilon: 0.1, ..Default::default() }, xg).unwrap();
    let xi = UniformGrid::new(-16.0, 16.0, 1024).unwrap();
    assert_eq!(d_d(&e, &e, xi).unwrap(), 0.0);
}

#[test]
fn modes_separate_only_after_collision() {
    let x0 = start("peakon-antipeakon", 0.0, 2048);
    let times = [2.0, 3.2];
    let dis = trajectory(&x0, &times, Mode::Dissipative);
    let con = trajectory(&x0, &times, Mode::Conservative);
    let xg = UniformGrid::new(-12.0, 12.0, 2001).unwrap();
    let xi = x0.grid;
    let gap = |i: usize| {
        let a = to_eulerian(&dis[i], xg).unwrap();
        let b = to_eulerian(&con[i], xg).unwrap();
        d_d(&a, &b, xi).unwrap()
    };
    let (before, after) = (gap(0), gap(1));
    assert!(after > 0.1, "{after}");
    assert!(after >= 10.0 * before, "{before} -> {after}");
}

#[test]
fn dissipated_energy_accumulates() {
    let x0 = start("peakon-antipeakon", 0.0, 2048);
    let times: Vec<f64> = (1..=16).map(|i| 0.25 * i as f64).collect();
    let f0 = energy_report(&x0).f;
    assert_eq!(f0, 0.0);
    let mut prev = f0;
    for x in trajectory(&x0, &times, Mode::Dissipative) {
        let r = energy_report(&x);
        assert!(r.f >= prev - 1e-12);
        assert!(r.eulerian_energy <= r.mu_total);
        prev = r.f;
    }
    let end = energy_report(&trajectory(&x0, &[4.0], Mode::Dissipative)[0]);
    assert!(end.f > 0.9 * end.mu_total, "{end:?}");
    let cons = energy_report(&trajectory(&x0, &[4.0], Mode::Conservative)[0]);
    assert_eq!(cons.f, 0.0);
}

#[test]
fn kappa_set_collects_nodes_about_to_break() {
    let x0 = start("peakon-antipeakon", 0.0, 2048);
    let s = trajectory(&x0, &[2.6], Mode::Dissipative).remove(0);
    let soon = kappa_set(&s, 0.1);
    assert!(!soon.is_empty());
    for &i in &soon {
        assert!(s.h[i] / (s.q[i] + s.h[i]) >= 0.9);
        assert!(s.w[i] <= 0.0);
    }
    let later = trajectory(&s, &[2.8], Mode::Dissipative).remove(0);
    let broke = soon.iter().filter(|&&i| !later.is_active(i)).count();
    assert!(broke as f64 >= 0.9 * soon.len() as f64, "{broke} of {}", soon.len());
    assert!(kappa_set(&x0, 0.1).is_empty());
}

#[test]
fn time_lipschitz_constant_is_resolution_independent() {
    let times = [0.25, 0.5, 0.75, 1.0];
    let lip = |n: usize| {
        let x0 = start("gaussian-cubic", 0.1, n);
        let mut all = vec![x0.clone()];
        all.extend(trajectory(&x0, &times, Mode::Dissipative));
        time_lipschitz(&all).unwrap()
    };
    let (a, b) = (lip(512), lip(2048));
    assert!(a > 0.0 && (a / b - 1.0).abs() < 0.2, "{a} vs {b}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn metric_axioms(seed in any::<u64>(), n in 8usize..200) {
        let mut r = rng(seed);
        let x = random_state(&mut r, n);
        let y = random_state(&mut r, n);
        let z = random_state(&mut r, n);
        prop_assert_eq!(d_r(&x, &x).unwrap(), 0.0);
        let dxy = d_r(&x, &y).unwrap();
        prop_assert_eq!(dxy, d_r(&y, &x).unwrap());
        prop_assert!(dxy > 0.0);
        prop_assert!(d_r(&x, &z).unwrap() <= dxy + d_r(&y, &z).unwrap() + 1e-12);
    }
}
