//! Approximation of `G(t,s)f` by Cauchy–Dirichlet problems on boxes.
//!
//! Each run time-steps `D_t u = A(t)u` on a uniform grid with `u = 0` on the
//! boundary of the box. [`nested_evolve`] repeats the run on growing boxes
//! with a shared spacing and tabulates how much the interior changes.

mod grid;
mod linsolve;
mod stencil;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};



use crate::exec::{max_range, Execution};
use crate::expr::{Expr, Var};
use crate::operator::OperatorFamily;
use crate::report::fmt_f64;
use crate::{Error, Result};

pub use grid::{GradientField, Grid, ScalarField};
use stencil::Stencil;

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("time span [{s}, {t_end}] is not inside ({lo}, {hi}]")]
    TimeSpan { s: f64, t_end: f64, lo: f64, hi: f64 },
    #[error("unstable at t={time}: sup norm {sup} exceeds {bound}")]
    Unstable { time: f64, sup: f64, bound: f64 },
    #[error("non-finite value at t={time}")]
    NonFinite { time: f64 },
    #[error("linear solver stalled at t={time}: residual {residual} after {sweeps} sweeps")]
    NotConverged { time: f64, residual: f64, sweeps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    ExplicitEuler,
    /// `theta = 1` is backward Euler, `theta = 0.5` Crank–Nicolson.
    Theta(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Advection {
    Upwind,
    Centered,
}

/// Linear solver for the implicit part of a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearSolver {
    /// Symmetric Gauss–Seidel sweeps inside fixed slabs.
    GaussSeidel,
    /// BiCGSTAB preconditioned by one slab Gauss–Seidel sweep.
    #[default]
    BiCgStab,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub scheme: Scheme,
    /// Time step; `None` picks one from the grid and coefficients.
    pub dt: Option<f64>,
    pub advection: Advection,
    /// Number of equally spaced snapshots, including `s` and `t_end`.
    pub snapshots: usize,
    /// Inner box fraction used by the verification checks.
    pub inner_fraction: f64,
    /// Max-norm residual at which the implicit solve stops.
    pub tolerance: f64,
    /// Iteration cap of the linear solver.
    pub max_sweeps: usize,
    pub linear_solver: LinearSolver,
    pub execution: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            scheme: Scheme::Theta(1.0),
            dt: None,
            advection: Advection::Upwind,
            snapshots: 5,
            inner_fraction: 0.5,
            tolerance: 1e-10,
            max_sweeps: 20_000,
            linear_solver: LinearSolver::default(),
            execution: Execution::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if let Scheme::Theta(theta) = self.scheme {
            if !(0.0..=1.0).contains(&theta) {
                return bad(format!("theta must lie in [0, 1], got {theta}"));
            }
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        if self.snapshots < 2 {
            return bad("need at least 2 snapshots".into());
        }
        if !(self.inner_fraction > 0.0 && self.inner_fraction < 1.0) {
            return bad(format!("inner fraction must lie in (0, 1), got {}", self.inner_fraction));
        }
        if !(self.tolerance > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tolerance));
        }
        Ok(())
    }

    fn theta(&self) -> f64 {
        match self.scheme {
            Scheme::ExplicitEuler => 0.0,
            Scheme::Theta(theta) => theta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub field: ScalarField,
}

/// Snapshots of one run. The first snapshot is the initial datum at `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub s: f64,
    /// `sup |f|` over all nodes before the boundary was zeroed.
    pub f_sup: f64,
    pub snapshots: Vec<Snapshot>,
    /// `max |u|` per snapshot.
    pub sup_history: Vec<f64>,
    pub dt: f64,
    pub steps: usize,
    /// Total linear-solver sweeps (0 for explicit runs).
    pub sweeps: usize,
}

impl Trajectory {
    pub fn grid(&self) -> &Grid {
        self.snapshots[0].field.grid()
    }

    pub fn initial(&self) -> &ScalarField {
        &self.snapshots[0].field
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    /// Gradient of snapshot `k`.
    pub fn gradient_field(&self, k: usize) -> GradientField {
        self.snapshots[k].field.gradient_field()
    }
}

/// `A(t)` applied to `field` with the solver's stencil; boundary nodes are 0.
pub fn apply_discrete_generator(
    op: &OperatorFamily,
    field: &ScalarField,
    t: f64,
    advection: Advection,
    exec: Execution,
) -> Result<ScalarField> {
    let grid = field.grid();
    check_dimension(op, grid)?;
    let st = Stencil::build(op, grid, t, advection, exec)?;
    let mut out = vec![0.0; grid.len()];
    st.apply(field.values(), &mut out, slab_len(grid), exec);
    Ok(ScalarField::from_values(grid, out))
}

fn slab_len(grid: &Grid) -> usize {
    grid.chunk_layers() * grid.stride(0)
}

fn check_dimension(op: &OperatorFamily, grid: &Grid) -> Result<()> {
    if op.dimension() != grid.dimension() {
        return Err(SolverError::InvalidGrid(format!(
            "grid dimension {} does not match operator dimension {}",
            grid.dimension(),
            op.dimension()
        ))
        .into());
    }
    Ok(())
}

fn coefficients_depend_on_time(op: &OperatorFamily) -> bool {
    let d = op.dimension();
    (0..d).any(|i| op.b(i).depends_on(Var::T) || (i..d).any(|j| op.q(i, j).depends_on(Var::T)))
}

/// Largest `lambda_max(Q)` and `|b|` over the grid nodes at the given times.
fn coefficient_bounds(op: &OperatorFamily, grid: &Grid, times: &[f64], exec: Execution) -> Result<(f64, f64)> {
    let per_time = times
        .iter()
        .map(|&t| {
            let vals = crate::exec::try_map_range(exec, grid.len(), |idx| -> Result<(f64, f64)> {
                let x = grid.point(idx);
                let (q, b) = op.coefficients_at(t, &x)?;
                let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
                Ok((q.max_eigenvalue(), nb))
            })?;
            Ok(vals
                .into_iter()
                .fold((0.0f64, 0.0f64), |(l, b), (l2, b2)| (l.max(l2), b.max(b2))))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_time
        .into_iter()
        .fold((0.0, 0.0), |(l, b), (l2, b2)| (f64::max(l, l2), f64::max(b, b2))))
}

/// Time step used when the configuration does not fix one.
fn auto_dt(op: &OperatorFamily, grid: &Grid, s: f64, t_end: f64, config: &SolverConfig) -> Result<f64> {
    let h = grid.spacing();
    match config.scheme {
        Scheme::Theta(theta) if theta > 0.0 => Ok((h * h).min((t_end - s) / 20.0)),
        _ => {
            let (lambda, b) =
                coefficient_bounds(op, grid, &[s, 0.5 * (s + t_end), t_end], config.execution)?;
            let d = grid.dimension() as f64;
            Ok(0.9 * h * h / (2.0 * d * lambda + h * b).max(f64::MIN_POSITIVE))
        }
    }
}

/// Steps per snapshot interval and the resulting uniform step.
fn step_plan(span: f64, intervals: usize, dt_target: f64) -> (usize, f64) {
    let interval = span / intervals as f64;
    let per = (interval / dt_target * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (per, interval / per as f64)
}

/// Solves the Cauchy–Dirichlet problem from `u(s) = f` to `t_end`.
pub fn evolve(
    op: &OperatorFamily,
    f: &Expr,
    s: f64,
    t_end: f64,
    grid: &Grid,
    config: &SolverConfig,
) -> Result<Trajectory> {
    let f0 = ScalarField::sample(grid, f, s)?;
    evolve_field(op, f0, s, t_end, config)
}

/// Like [`evolve`] with the initial datum given as nodal values.
pub fn evolve_field(
    op: &OperatorFamily,
    mut u0: ScalarField,
    s: f64,
    t_end: f64,
    config: &SolverConfig,
) -> Result<Trajectory> {
    config.validate()?;
    let grid = u0.grid().clone();
    check_dimension(op, &grid)?;
    let (lo, hi) = op.time_interval();
    if !(s < t_end) || !op.contains_time(s) || !op.contains_time(t_end) {
        return Err(SolverError::TimeSpan { s, t_end, lo, hi }.into());
    }
    if u0.values().iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite { time: s }.into());
    }
    let f_sup = u0.sup_norm();
    u0.zero_boundary();

    let exec = config.execution;
    let dt_target = match config.dt {
        Some(dt) => dt,
        None => auto_dt(op, &grid, s, t_end, config)?,
    };
    let intervals = config.snapshots - 1;
    let (per, dt) = step_plan(t_end - s, intervals, dt_target);
    let theta = config.theta();
    let time_dependent = coefficients_depend_on_time(op);
    let bound = (f_sup * 1.01).max(f64::MIN_POSITIVE);
    let slab = slab_len(&grid);

    let mut stepper = Stepper {
        op,
        grid: &grid,
        config,
        theta,
        dt,
        slab,
        exec,
        current: None,
        next: None,
        time_dependent,
        sweeps: 0,
        previous: None,
    };

    let mut u = u0.values().to_vec();
    let mut snapshots = vec![Snapshot {
        time: s,
        field: u0.clone(),
    }];
    let mut sup_history = vec![u0.sup_norm()];
    let mut steps = 0;
    for k in 0..intervals {
        let t0 = s + (t_end - s) * k as f64 / intervals as f64;
        for j in 0..per {
            let t_old = t0 + j as f64 * dt;
            let t_new = if k + 1 == intervals && j + 1 == per {
                t_end
            } else {
                t0 + (j + 1) as f64 * dt
            };
            u = stepper.step(u, t_old, t_new)?;
            steps += 1;
            let sup = max_range(exec, u.len(), |i| {
                let a = u[i].abs();
                if a.is_nan() {
                    f64::INFINITY
                } else {
                    a
                }
            });
            if !sup.is_finite() {
                return Err(SolverError::NonFinite { time: t_new }.into());
            }
            if sup > bound {
                return Err(SolverError::Unstable {
                    time: t_new,
                    sup,
                    bound,
                }
                .into());
            }
        }
        let field = ScalarField::from_values(&grid, u.clone());
        sup_history.push(field.sup_norm());
        let time = if k + 1 == intervals { t_end } else { t0 + per as f64 * dt };
        snapshots.push(Snapshot { time, field });
    }
    Ok(Trajectory {
        s,
        f_sup,
        snapshots,
        sup_history,
        dt,
        steps,
        sweeps: stepper.sweeps,
    })
}

struct Stepper<'a> {
    op: &'a OperatorFamily,
    grid: &'a Grid,
    config: &'a SolverConfig,
    theta: f64,
    dt: f64,
    slab: usize,
    exec: Execution,
    /// Stencil at the start of the step, and at its end.
    current: Option<(f64, Stencil)>,
    next: Option<(f64, Stencil)>,
    time_dependent: bool,
    sweeps: usize,
    /// Solution one step back, for the linear initial guess.
    previous: Option<Vec<f64>>,
}

impl Stepper<'_> {
    fn stencil_at(&mut self, t: f64, slot_next: bool) -> Result<()> {
        let slot = if slot_next { &self.next } else { &self.current };
        let fresh = match slot {
            Some((t0, _)) => !self.time_dependent || *t0 == t,
            None => false,
        };
        if fresh {
            return Ok(());
        }
        // Reuse the other slot when it already holds this time.
        let other = if slot_next { &self.current } else { &self.next };
        let reuse = match other {
            Some((t0, st)) if !self.time_dependent || *t0 == t => Some(st.clone()),
            _ => None,
        };
        let st = match reuse {
            Some(st) => st,
            None => Stencil::build(self.op, self.grid, t, self.config.advection, self.exec)?,
        };
        if slot_next {
            self.next = Some((t, st));
        } else {
            self.current = Some((t, st));
        }
        Ok(())
    }

    fn step(&mut self, u: Vec<f64>, t_old: f64, t_new: f64) -> Result<Vec<f64>> {
        let dt = self.dt;
        let theta = self.theta;
        let mut rhs = u.clone();
        if theta < 1.0 {
            if self.time_dependent {
                // Move last step's end stencil into the start slot.
                if let Some((t, _)) = &self.next {
                    if *t == t_old {
                        self.current = self.next.take();
                    }
                }
            }
            self.stencil_at(t_old, false)?;
            let st = &self.current.as_ref().expect("stencil built").1;
            let mut au = vec![0.0; u.len()];
            st.apply(&u, &mut au, self.slab, self.exec);
            let w = (1.0 - theta) * dt;
            for (r, a) in rhs.iter_mut().zip(&au) {
                *r += w * a;
            }
        }
        if theta == 0.0 {
            return Ok(rhs);
        }
        self.stencil_at(t_new, true)?;
        let st = &self.next.as_ref().expect("stencil built").1;
        // Initial guess 2u - u_prev; the first step starts from u.
        let mut x = match &self.previous {
            Some(prev) => u.iter().zip(prev).map(|(a, b)| 2.0 * a - b).collect(),
            None => u.clone(),
        };
        self.previous = Some(u);
        let sys = linsolve::System {
            st,
            w: theta * dt,
            slab: self.slab,
            exec: self.exec,
        };
        let sweeps = linsolve::solve(&sys, &rhs, &mut x, self.config, t_new)?;
        self.sweeps += sweeps;
        Ok(x)
    }
}

/// One row of the nested-domain convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub time: f64,
    /// `max |u_{R_{k+1}} - u_{R_k}|` over the inner box, for each consecutive pair.
    pub differences: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NestedRun {
    /// Run on the largest box.
    pub trajectory: Trajectory,
    pub radii: Vec<f64>,
    pub table: Vec<ConvergenceRow>,
    pub warnings: Vec<String>,
}

impl NestedRun {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time");
        for w in self.radii.windows(2) {
            let _ = write!(s, ",diff_{}_{}", w[0], w[1]);
        }
        s.push('\n');
        for row in &self.table {
            s.push_str(&fmt_f64(row.time));
            for d in &row.differences {
                let _ = write!(s, ",{}", fmt_f64(*d));
            }
            s.push('\n');
        }
        s
    }
}

/// Runs [`evolve`] on boxes of the given half-widths (all centered at the
/// origin, shared spacing `h`) and compares them on the inner box of
/// half-width `inner_fraction * radii[0]`.
pub fn nested_evolve(
    op: &OperatorFamily,
    f: &Expr,
    s: f64,
    t_end: f64,
    radii: &[f64],
    h: f64,
    config: &SolverConfig,
) -> Result<NestedRun> {
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(SolverError::InvalidConfig(format!(
            "radii must be strictly increasing and at least two, got {radii:?}"
        ))
        .into());
    }
    let d = op.dimension();
    let grids = radii
        .iter()
        .map(|&r| Grid::with_spacing(d, r, h))
        .collect::<Result<Vec<_>, _>>()?;
    // Shared step so that snapshot times and step counts agree.
    let mut cfg = config.clone();
    if cfg.dt.is_none() {
        cfg.dt = Some(auto_dt(op, grids.last().expect("nonempty"), s, t_end, config)?);
    }
    let runs = grids
        .iter()
        .map(|g| evolve(op, f, s, t_end, g, &cfg))
        .collect::<Result<Vec<_>>>()?;

    let inner = grids[0].inner_nodes(config.inner_fraction);
    let table: Vec<ConvergenceRow> = (0..runs[0].snapshots.len())
        .map(|k| {
            let differences = runs
                .windows(2)
                .map(|pair| {
                    let (a, b) = (&pair[0].snapshots[k].field, &pair[1].snapshots[k].field);
                    inner
                        .iter()
                        .map(|&idx| {
                            let x = a.grid().point(idx);
                            let j = b.grid().node_at(&x).expect("nested grids share nodes");
                            (a.value(idx) - b.value(j)).abs()
                        })
                        .fold(0.0, f64::max)
                })
                .collect();
            ConvergenceRow {
                time: runs[0].snapshots[k].time,
                differences,
            }
        })
        .collect();

    let mut warnings = Vec::new();
    for row in &table {
        for (k, w) in row.differences.windows(2).enumerate() {
            if w[1] > 2.0 * w[0] && w[1] > 1e-12 {
                warnings.push(format!(
                    "t={}: difference grew from {:e} to {:e} between radii {} and {}; the box may be too small",
                    row.time,
                    w[0],
                    w[1],
                    radii[k + 1],
                    radii[k + 2]
                ));
            }
        }
    }
    Ok(NestedRun {
        trajectory: runs.into_iter().last().expect("nonempty"),
        radii: radii.to_vec(),
        table,
        warnings,
    })
}

/// Writes `snapshot_###.csv` (columns `x1..xd,u`) for every snapshot and an
/// `index.csv` listing times and file names. Returns the files written.
pub fn write_snapshots(traj: &Trajectory, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let grid = traj.grid();
    let d = grid.dimension();
    let mut header = String::new();
    for i in 1..=d {
        let _ = write!(header, "x{i},");
    }
    header.push_str("u\n");
    let mut index = String::from("index,time,file\n");
    let mut files = Vec::new();
    let mut x = vec![0.0; d];
    for (k, snap) in traj.snapshots.iter().enumerate() {
        let name = format!("snapshot_{k:03}.csv");
        let mut body = header.clone();
        for (idx, v) in snap.field.values().iter().enumerate() {
            grid.coords_into(idx, &mut x);
            for c in &x {
                body.push_str(&fmt_f64(*c));
                body.push(',');
            }
            body.push_str(&fmt_f64(*v));
            body.push('\n');
        }
        let path = dir.join(&name);
        std::fs::write(&path, body).map_err(Error::Io)?;
        let _ = writeln!(index, "{k},{},{name}", fmt_f64(snap.time));
        files.push(path);
    }
    let path = dir.join("index.csv");
    std::fs::write(&path, index)?;
    files.push(path);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    const HEAT: &str = "[meta]\nd=1\nt_lo=-1\nt_hi=10\n[diffusion]\nq11=1\n";

    fn heat() -> OperatorFamily {
        OperatorFamily::from_text(HEAT).unwrap()
    }

    fn exact_heat(t: f64, x: f64) -> f64 {
        (1.0 + 2.0 * t).powf(-0.5) * (-x * x / (2.0 * (1.0 + 2.0 * t))).exp()
    }

    #[test]
    fn second_difference_of_quadratic_is_exact() {
        let g = Grid::new(1, 21, 2.0).unwrap();
        let field = ScalarField::from_fn(&g, |x| x[0] * x[0]);
        let out = apply_discrete_generator(&heat(), &field, 0.0, Advection::Upwind, Execution::Sequential).unwrap();
        for idx in 1..20 {
            assert!((out.value(idx) - 2.0).abs() < 1e-9);
        }
        assert_eq!(out.value(0), 0.0);
    }

    #[test]
    fn constants_are_annihilated() {
        let op = OperatorFamily::from_text(
            "[meta]\nd=2\nt_hi=3\n[diffusion]\nq11=2+x2^2\nq12=x1*x2/4\nq22=1+x1^2\n[drift]\nb1=-x1^3\nb2=sin(x1)\n",
        )
        .unwrap();
        let g = Grid::new(2, 11, 1.0).unwrap();
        let one = ScalarField::from_fn(&g, |_| 1.0);
        for adv in [Advection::Upwind, Advection::Centered] {
            let out = apply_discrete_generator(&op, &one, 1.0, adv, Execution::Parallel).unwrap();
            assert!(out.values().iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn heat_gaussian_matches_closed_form() {
        let g = Grid::new(1, 161, 8.0).unwrap();
        let f = parse("exp(-x1^2/2)", 1).unwrap();
        let traj = evolve(&heat(), &f, 0.0, 0.5, &g, &SolverConfig::default()).unwrap();
        let last = &traj.snapshots.last().unwrap().field;
        assert_eq!(traj.times().len(), 5);
        assert_eq!(*traj.times().last().unwrap(), 0.5);
        let c = g.node_at(&[0.0]).unwrap();
        assert!((last.value(c) - exact_heat(0.5, 0.0)).abs() < 2e-3);
        assert!(traj.sup_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn zero_stays_zero() {
        let g = Grid::new(2, 11, 2.0).unwrap();
        let op = OperatorFamily::from_text(
            "[meta]\nd=2\nt_hi=3\n[diffusion]\nq11=1+x2^2\nq22=1\n[drift]\nb1=-x1\nb2=-x2^3\n",
        )
        .unwrap();
        let traj = evolve(&op, &Expr::constant(0.0), 0.0, 0.5, &g, &SolverConfig::default()).unwrap();
        assert!(traj.snapshots.iter().all(|s| s.field.sup_norm() == 0.0));
    }

    #[test]
    fn parallel_and_sequential_runs_are_identical() {
        let op = OperatorFamily::from_text(
            "[meta]\nd=2\nt_hi=3\n[diffusion]\nq11=1+x2^2\nq12=-x1*x2/2\nq22=1+x1^2\n[drift]\nb1=-x1*norm2(x)\nb2=-x2*norm2(x)\n",
        )
        .unwrap();
        let g = Grid::new(2, 41, 2.0).unwrap();
        let f = parse("exp(-norm2(x))", 2).unwrap();
        let mut cfg = SolverConfig::default();
        let par = evolve(&op, &f, 0.0, 0.1, &g, &cfg).unwrap();
        cfg.execution = Execution::Sequential;
        let seq = evolve(&op, &f, 0.0, 0.1, &g, &cfg).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn explicit_and_crank_nicolson_agree_with_implicit() {
        let g = Grid::new(1, 81, 6.0).unwrap();
        let f = parse("exp(-x1^2/2)", 1).unwrap();
        let c = g.node_at(&[0.0]).unwrap();
        let exact = exact_heat(0.25, 0.0);
        for scheme in [Scheme::ExplicitEuler, Scheme::Theta(0.5), Scheme::Theta(1.0)] {
            let cfg = SolverConfig {
                scheme,
                ..SolverConfig::default()
            };
            let traj = evolve(&heat(), &f, 0.0, 0.25, &g, &cfg).unwrap();
            let v = traj.snapshots.last().unwrap().field.value(c);
            assert!((v - exact).abs() < 5e-3, "{scheme:?}: {v} vs {exact}");
        }
    }

    #[test]
    fn oversized_explicit_step_is_reported() {
        let g = Grid::new(1, 81, 4.0).unwrap();
        let f = parse("exp(-x1^2/2)", 1).unwrap();
        let cfg = SolverConfig {
            scheme: Scheme::ExplicitEuler,
            dt: Some(0.05),
            ..SolverConfig::default()
        };
        let err = evolve(&heat(), &f, 0.0, 1.0, &g, &cfg).unwrap_err();
        assert!(matches!(err, Error::Solver(SolverError::Unstable { .. })), "{err}");
    }

    #[test]
    fn rejects_span_outside_interval() {
        let g = Grid::new(1, 11, 1.0).unwrap();
        let f = parse("1", 1).unwrap();
        assert!(evolve(&heat(), &f, -1.0, 0.5, &g, &SolverConfig::default()).is_err());
        assert!(evolve(&heat(), &f, 0.5, 0.5, &g, &SolverConfig::default()).is_err());
    }

    #[test]
    fn heat_gradient_at_one() {
        let g = Grid::new(1, 321, 8.0).unwrap();
        let f = parse("exp(-x1^2/2)", 1).unwrap();
        let traj = evolve(&heat(), &f, 0.0, 0.5, &g, &SolverConfig::default()).unwrap();
        let grad = traj.gradient_field(traj.snapshots.len() - 1);
        let one = g.node_at(&[1.0]).unwrap();
        let zero = g.node_at(&[0.0]).unwrap();
        // d/dx of the closed form at t = 0.5
        let t: f64 = 0.5;
        let expected = -(1.0 + 2.0 * t).powf(-1.5) * (-1.0 / (2.0 * (1.0 + 2.0 * t))).exp();
        assert!((grad.at(one)[0] - expected).abs() < 2e-3);
        assert!(grad.at(zero)[0].abs() < 1e-9);
    }

    #[test]
    fn nested_runs_converge_in_the_interior() {
        let f = parse("exp(-x1^2/2)", 1).unwrap();
        let run = nested_evolve(&heat(), &f, 0.0, 0.5, &[4.0, 6.0, 8.0], 0.05, &SolverConfig::default()).unwrap();
        let last = run.table.last().unwrap();
        assert!(last.differences[1] <= last.differences[0]);
        assert!(last.differences[1] <= 1e-4);
        assert!(run.warnings.is_empty(), "{:?}", run.warnings);
        assert_eq!(run.trajectory.grid().half_width(), 8.0);
    }

    #[test]
    fn snapshots_round_trip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(1, 11, 1.0).unwrap();
        let f = parse("cos(x1)", 1).unwrap();
        let traj = evolve(&heat(), &f, 0.0, 0.1, &g, &SolverConfig::default()).unwrap();
        let files = write_snapshots(&traj, dir.path()).unwrap();
        assert_eq!(files.len(), traj.snapshots.len() + 1);
        let text = std::fs::read_to_string(&files[2]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x1,u"));
        let row: Vec<f64> = lines.nth(5).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row[1], traj.snapshots[2].field.value(5));
    }
}
