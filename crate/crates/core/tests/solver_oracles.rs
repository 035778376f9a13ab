//! Solver runs checked against closed-form solutions.

use std::collections::BTreeMap;

use approx::assert_abs_diff_eq;
use gradient_lab::expr::parse;
use gradient_lab::solver::{evolve, nested_evolve, Advection, Grid, SolverConfig};
use gradient_lab::{presets, OperatorFamily};

fn preset(name: &str) -> OperatorFamily {
    OperatorFamily::build(&presets::instantiate(name, &BTreeMap::new()).unwrap()).unwrap()
}

/// Mehler formula for `q = 1, b = -x` and `f = exp(-x^2/2)`:
/// `X = x e^{-tau} + sqrt(1 - e^{-2 tau}) Z`.
fn ou_exact(tau: f64, x: f64) -> f64 {
    let m = x * (-tau).exp();
    let v = 1.0 - (-2.0 * tau).exp();
    (-m * m / (2.0 * (1.0 + v))).exp() / (1.0 + v).sqrt()
}

fn ou_error(advection: Advection) -> f64 {
    let op = preset("ou");
    let f = parse("exp(-x1^2/2)", 1).unwrap();
    let grid = Grid::new(1, 321, 8.0).unwrap();
    let config = SolverConfig {
        advection,
        ..SolverConfig::default()
    };
    let traj = evolve(&op, &f, 0.0, 1.0, &grid, &config).unwrap();
    let mut err: f64 = 0.0;
    for snap in &traj.snapshots {
        for idx in grid.inner_nodes(0.5) {
            let x = grid.point(idx)[0];
            err = err.max((snap.field.value(idx) - ou_exact(snap.time, x)).abs());
        }
    }
    err
}

#[test]
fn ou_matches_mehler() {
    // Upwinding is first order in h, centered differences second order.
    let (upwind, centered) = (ou_error(Advection::Upwind), ou_error(Advection::Centered));
    assert!(upwind < 6e-3, "{upwind} {centered}");
    assert!(centered < 1e-3, "{upwind} {centered}");
    assert!(centered < upwind, "{centered} vs {upwind}");
}

#[test]
fn ou_gradient_is_contracted_by_exp_minus_tau() {
    // grad G f = e^{-tau} G(f') for the OU operator.
    let op = preset("ou");
    let f = parse("exp(-x1^2/2)", 1).unwrap();
    let df = parse("-x1*exp(-x1^2/2)", 1).unwrap();
    let grid = Grid::new(1, 321, 8.0).unwrap();
    let config = SolverConfig::default();
    let u = evolve(&op, &f, 0.0, 0.5, &grid, &config).unwrap();
    let w = evolve(&op, &df, 0.0, 0.5, &grid, &config).unwrap();
    let last = u.snapshots.len() - 1;
    let tau = u.snapshots[last].time;
    let grad = u.gradient_field(last);
    for idx in grid.inner_nodes(0.5) {
        let expected = (-tau).exp() * w.snapshots[last].field.value(idx).abs();
        assert_abs_diff_eq!(grad.norms.value(idx), expected, epsilon = 2e-3);
    }
}

#[test]
fn larger_boxes_agree_on_the_inner_region() {
    let op = preset("ou");
    let f = parse("exp(-x1^2/2)", 1).unwrap();
    let run = nested_evolve(&op, &f, 0.0, 0.5, &[3.0, 5.0, 7.0], 0.05, &SolverConfig::default()).unwrap();
    assert!(run.warnings.is_empty(), "{:?}", run.warnings);
    let last = run.table.last().unwrap();
    // Gaussian data and inward drift: the boundary effect fades quickly.
    assert!(last.differences[1] <= last.differences[0] + 1e-12, "{:?}", last.differences);
    assert!(last.differences[1] < 1e-4, "{:?}", last.differences);
}
