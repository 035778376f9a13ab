//! Checks of the pointwise gradient estimate and of the inequalities behind
//! it.
//!
//! Margins are always `left side - right side`, so a non-positive worst
//! margin means the inequality held at every point checked.

use crate::conditions::algebraic_residual;
use crate::exec::map_range;
use crate::expr::{Expr, Func};
use crate::linalg::SymMatrix;
use crate::operator::OperatorFamily;
use crate::report::{argmax, ConditionReport, Extremum, SnapshotMargin, VerificationKind, VerificationReport};
use crate::solver::{evolve, Grid, ScalarField, SolverConfig, Trajectory};
use crate::{Error, Result};

/// Relative default tolerance of the gradient check (times `max |grad f|`).
pub const GRADIENT_TOL_FACTOR: f64 = 5e-3;
/// Relative default tolerance of the Bernstein diagnostic (times `max |grad u|^2`).
pub const BERNSTEIN_TOL_FACTOR: f64 = 1e-2;
pub const MAX_PRINCIPLE_TOL: f64 = 1e-6;
pub const BERNSTEIN_EPSILON: f64 = 1e-8;
/// Nodes with `|grad u|` at or below this are skipped by the diagnostic.
pub const GRADIENT_FLOOR: f64 = 1e-6;

fn collect_report(
    kind: VerificationKind,
    per_snapshot: Vec<Option<Extremum>>,
    times: &[f64],
    tolerance: f64,
) -> VerificationReport {
    let series: Vec<SnapshotMargin> = per_snapshot
        .iter()
        .zip(times)
        .filter_map(|(e, &time)| {
            e.as_ref().map(|e| SnapshotMargin {
                time,
                sup_margin: e.value,
                witness_x: e.x.clone(),
            })
        })
        .collect();
    let worst = argmax(per_snapshot.into_iter().flatten());
    let (worst_margin, witness_t, witness_x) = match worst {
        Some(e) => (e.value, e.t, e.x),
        None => (f64::NEG_INFINITY, f64::NAN, Vec::new()),
    };
    VerificationReport {
        kind,
        pass: worst_margin <= tolerance,
        worst_margin,
        witness_t,
        witness_x,
        tolerance,
        series,
        parameters: Vec::new(),
        notes: Vec::new(),
    }
}

fn echo_grid(report: &mut VerificationReport, grid: &Grid, config: &SolverConfig) {
    let p = &mut report.parameters;
    p.push(("grid_n".into(), grid.points_per_axis().to_string()));
    p.push(("half_width".into(), grid.half_width().to_string()));
    p.push(("h".into(), grid.spacing().to_string()));
    p.push(("rho".into(), config.inner_fraction.to_string()));
}

/// `|grad f|` as an expression.
pub fn gradient_norm_expr(f: &Expr, dimension: usize) -> Expr {
    let sum = f
        .gradient(dimension)
        .into_iter()
        .map(|g| g.clone() * g)
        .reduce(|a, b| a + b)
        .unwrap_or(Expr::Const(0.0));
    Expr::call(Func::Sqrt, vec![sum]).simplify()
}

/// Result of [`gradient_estimate_check`] with both trajectories.
#[derive(Debug, Clone)]
pub struct GradientCheck {
    pub report: VerificationReport,
    /// `u = G(t,s) f`.
    pub u: Trajectory,
    /// `v = G(t,s)|grad f|`.
    pub v: Trajectory,
}

/// Evolves `f` and `|grad f|` and measures
/// `|grad u(t,x)| - exp(c0 (t-s)) v(t,x)` on the inner box at every
/// snapshot. `tol` defaults to `5e-3 * max |grad f|`.
#[allow(clippy::too_many_arguments)]
pub fn gradient_estimate_check(
    op: &OperatorFamily,
    f: &Expr,
    s: f64,
    t_end: f64,
    c0: f64,
    grid: &Grid,
    config: &SolverConfig,
    tol: Option<f64>,
) -> Result<GradientCheck> {
    if !c0.is_finite() {
        return Err(Error::InvalidArgument(format!("c0 must be finite, got {c0}")));
    }
    let gnorm = gradient_norm_expr(f, op.dimension());
    let u = evolve(op, f, s, t_end, grid, config)?;
    let v = evolve(op, &gnorm, s, t_end, grid, config)?;
    let check = margins_from(u, v, c0, config, tol)?;
    Ok(check)
}

/// Gradient margins from trajectories computed elsewhere (same grid and
/// snapshot times).
pub fn margins_from(
    u: Trajectory,
    v: Trajectory,
    c0: f64,
    config: &SolverConfig,
    tol: Option<f64>,
) -> Result<GradientCheck> {
    if u.times() != v.times() || u.grid() != v.grid() {
        return Err(Error::InvalidArgument("u and v runs do not share grid and times".into()));
    }
    let grid = u.grid().clone();
    let d = grid.dimension();
    let grad_sup = v.f_sup;
    let tolerance = tol.unwrap_or(GRADIENT_TOL_FACTOR * grad_sup);
    let inner = grid.inner_nodes(config.inner_fraction);
    let times = u.times();
    let per_snapshot = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let uf = &u.snapshots[k].field;
            let vf = &v.snapshots[k].field;
            let growth = (c0 * (t - u.s)).exp();
            let cands = map_range(config.execution, inner.len(), |m| {
                let idx = inner[m];
                let mut g = vec![0.0; d];
                uf.gradient_at(idx, &mut g);
                let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                Extremum::new(norm - growth * vf.value(idx), t, grid.point(idx))
            });
            argmax(cands)
        })
        .collect();
    let mut report = collect_report(VerificationKind::Gradient, per_snapshot, &times, tolerance);
    report.parameters.push(("c0".into(), c0.to_string()));
    report.parameters.push(("s".into(), u.s.to_string()));
    report.parameters.push(("t_end".into(), times.last().copied().unwrap_or(u.s).to_string()));
    report.parameters.push(("grad_f_sup".into(), grad_sup.to_string()));
    report.parameters.push(("dt".into(), u.dt.to_string()));
    echo_grid(&mut report, &grid, config);
    Ok(GradientCheck { report, u, v })
}

/// `v - <v, n> n` for a unit vector `n`.
pub fn project(v: &[f64], n: &[f64]) -> Vec<f64> {
    let dot: f64 = v.iter().zip(n).map(|(a, b)| a * b).sum();
    v.iter().zip(n).map(|(a, b)| a - dot * b).collect()
}

/// Diagnostic fields of one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinFields {
    pub time: f64,
    /// `(|grad u|^2 + eps)^(1/2)` at every node.
    pub w: ScalarField,
    /// The Bernstein quantity `I` at checked nodes, `0` elsewhere.
    pub i_field: ScalarField,
    /// Nodes where `I` was evaluated.
    pub checked: Vec<usize>,
    /// Inner nodes skipped because `|grad u|` was too small.
    pub skipped: usize,
    /// Largest `|<P(D_i grad u), grad u>| / (|D_i grad u| |grad u|)` seen.
    pub projection_defect: f64,
}

#[derive(Debug, Clone)]
pub struct BernsteinCheck {
    pub report: VerificationReport,
    pub fields: Vec<BernsteinFields>,
}

/// The Bernstein quantity at a node:
/// `<grad b g, g> - sum q_ij <P H_i, P H_j> + sum_k g_k Tr(D_k Q H)`
/// with `g = grad u`, `H` the Hessian and `P` the projection orthogonal to
/// `g`. Returns `(I, projection defect)`.
pub fn bernstein_quantity(p: &crate::operator::PointEvaluation, g: &[f64], hess: &SymMatrix) -> (f64, f64) {
    let d = g.len();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let n: Vec<f64> = g.iter().map(|v| v / norm).collect();
    let mut drift = 0.0;
    for i in 0..d {
        for j in 0..d {
            drift += p.db(j, i) * g[j] * g[i];
        }
    }
    let rows: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| hess.get(i, j)).collect()).collect();
    let projected: Vec<Vec<f64>> = rows.iter().map(|r| project(r, &n)).collect();
    let mut defect: f64 = 0.0;
    for (r, pr) in rows.iter().zip(&projected) {
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rn > 0.0 {
            let dot: f64 = pr.iter().zip(g).map(|(a, b)| a * b).sum();
            defect = defect.max(dot.abs() / (rn * norm));
        }
    }
    let mut diffusion = 0.0;
    for i in 0..d {
        for j in 0..d {
            let dot: f64 = projected[i].iter().zip(&projected[j]).map(|(a, b)| a * b).sum();
            diffusion += p.q.get(i, j) * dot;
        }
    }
    let mut third = 0.0;
    for k in 0..d {
        let mut tr = 0.0;
        for i in 0..d {
            for j in 0..d {
                tr += p.dq(k, i, j) * hess.get(i, j);
            }
        }
        third += g[k] * tr;
    }
    (drift - diffusion + third, defect)
}

/// Assembles `I - c0 |grad u|^2` on the inner box of every snapshot.
/// `tol` defaults to `1e-2 * max |grad u|^2` over the checked nodes.
pub fn bernstein_diagnostic(
    op: &OperatorFamily,
    traj: &Trajectory,
    c0: f64,
    epsilon: f64,
    config: &SolverConfig,
    tol: Option<f64>,
) -> Result<BernsteinCheck> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if traj.snapshots.len() < 2 {
        return Err(Error::InvalidArgument("need at least two snapshots".into()));
    }
    let grid = traj.grid().clone();
    let d = grid.dimension();
    let inner = grid.inner_nodes(config.inner_fraction);
    let times = traj.times();

    struct NodeOut {
        margin: f64,
        i_val: f64,
        grad_sq: f64,
        defect: f64,
    }
    let mut per_snapshot = Vec::with_capacity(times.len());
    let mut fields = Vec::with_capacity(times.len());
    let mut grad_sq_max: f64 = 0.0;
    for (k, &t) in times.iter().enumerate() {
        let uf = &traj.snapshots[k].field;
        let outs = crate::exec::try_map_range(config.execution, inner.len(), |m| -> Result<Option<NodeOut>> {
            let idx = inner[m];
            let mut g = vec![0.0; d];
            uf.gradient_at(idx, &mut g);
            let grad_sq: f64 = g.iter().map(|v| v * v).sum();
            if grad_sq.sqrt() <= GRADIENT_FLOOR {
                return Ok(None);
            }
            let x = grid.point(idx);
            let p = op.eval_at(t, &x)?;
            let (i_val, defect) = bernstein_quantity(&p, &g, &uf.hessian_at(idx));
            Ok(Some(NodeOut {
                margin: i_val - c0 * grad_sq,
                i_val,
                grad_sq,
                defect,
            }))
        })?;
        let w = ScalarField::from_values(
            &grid,
            uf.gradient_field()
                .norms
                .values()
                .iter()
                .map(|n| (n * n + epsilon).sqrt())
                .collect(),
        );
        let mut i_vals = vec![0.0; grid.len()];
        let mut checked = Vec::new();
        let mut cands = Vec::new();
        let mut defect: f64 = 0.0;
        for (m, o) in outs.iter().enumerate() {
            if let Some(o) = o {
                let idx = inner[m];
                i_vals[idx] = o.i_val;
                checked.push(idx);
                grad_sq_max = grad_sq_max.max(o.grad_sq);
                defect = defect.max(o.defect);
                cands.push(Extremum::new(o.margin, t, grid.point(idx)));
            }
        }
        per_snapshot.push(argmax(cands));
        fields.push(BernsteinFields {
            time: t,
            w,
            i_field: ScalarField::from_values(&grid, i_vals),
            skipped: inner.len() - checked.len(),
            checked,
            projection_defect: defect,
        });
    }
    let tolerance = tol.unwrap_or(BERNSTEIN_TOL_FACTOR * grad_sq_max);
    let mut report = collect_report(VerificationKind::Bernstein, per_snapshot, &times, tolerance);
    if fields.iter().all(|f| f.checked.is_empty()) {
        report.pass = true;
        report.notes.push("vacuous pass: |grad u| below the floor at every inner node".into());
    }
    report.parameters.push(("c0".into(), c0.to_string()));
    report.parameters.push(("epsilon".into(), epsilon.to_string()));
    report.parameters.push(("grad_u_sq_max".into(), grad_sq_max.to_string()));
    echo_grid(&mut report, &grid, config);
    Ok(BernsteinCheck { report, fields })
}

/// Symbolic pieces of the Bakry residual for a fixed `f`, reusable across
/// points.
pub struct BakryProbe {
    grad: Vec<Expr>,
    grad_af: Vec<Expr>,
    norm: Expr,
    a_norm: Expr,
}

impl BakryProbe {
    pub fn new(op: &OperatorFamily, f: &Expr) -> Self {
        let d = op.dimension();
        let af = op.generator_expr(f);
        let norm = gradient_norm_expr(f, d);
        BakryProbe {
            grad: f.gradient(d),
            grad_af: af.gradient(d),
            a_norm: op.generator_expr(&norm),
            norm,
        }
    }

    /// `<grad f, grad(A f)> - |grad f| A|grad f| - c |grad f|^2` at `(s, x)`.
    pub fn residual(&self, s: f64, x: &[f64], c: f64) -> Result<f64> {
        let ev = |e: &Expr, what: &str| e.eval(s, x).map_err(|err| Error::eval_at(what, s, x, err));
        let norm = ev(&self.norm, "|grad f|")?;
        if !(norm > 1e-10) {
            return Err(Error::Probe(format!(
                "|grad f| = {norm:e} at x={x:?} is too small; pick a point where f is not critical"
            )));
        }
        let mut lhs = 0.0;
        for (g, ga) in self.grad.iter().zip(&self.grad_af) {
            lhs += ev(g, "grad f")? * ev(ga, "grad Af")?;
        }
        let a_norm = ev(&self.a_norm, "A|grad f|")?;
        Ok(lhs - norm * a_norm - c * norm * norm)
    }
}

/// Left minus right side of the Bakry-type inequality at `(s, x)`, with all
/// derivatives symbolic.
pub fn bakry_residual(op: &OperatorFamily, f: &Expr, s: f64, x: &[f64], c: f64) -> Result<f64> {
    BakryProbe::new(op, f).residual(s, x, c)
}

/// Step sizes of the `y -> x` limits.
pub const PROBE_STEPS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
/// Weights of the quadratic probe family.
pub const PROBE_EPSILONS: [f64; 3] = [0.1, 0.03, 0.01];

/// One inferred entry of the symmetrized tensor `T_kij`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternInference {
    /// `"iii"`, `"iij"` or `"ijk"`.
    pub pattern: &'static str,
    /// Zero-based indices `(k, i, j)` of `T`.
    pub indices: (usize, usize, usize),
    /// Inferred `T_kij` from Bakry residual limits.
    pub inferred: f64,
    /// `T_kij` from the symbolic derivatives, for comparison.
    pub symbolic: f64,
}

#[derive(Debug, Clone)]
pub struct NecessityReport {
    pub report: ConditionReport,
    pub patterns: Vec<PatternInference>,
    /// `max |T_kij|` from [`algebraic_residual`].
    pub algebraic_residual: f64,
}

impl NecessityReport {
    /// Inferred `D_i q_ii = T_iii / 3`.
    pub fn inferred_diagonal_derivative(&self, i: usize) -> Option<f64> {
        self.patterns
            .iter()
            .find(|p| p.indices == (i, i, i))
            .map(|p| p.inferred / 3.0)
    }
}

/// `lim_{delta -> 0} value(delta)` from both sides: Richardson
/// extrapolation of the two smallest steps, averaged over the signs.
fn two_sided_limit(mut value: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut sides = [0.0; 2];
    for (slot, sign) in sides.iter_mut().zip([1.0, -1.0]) {
        let n = PROBE_STEPS.len();
        let coarse = value(sign * PROBE_STEPS[n - 2])?;
        let fine = value(sign * PROBE_STEPS[n - 1])?;
        *slot = (10.0 * fine - coarse) / 9.0;
    }
    Ok(0.5 * (sides[0] + sides[1]))
}

/// `f(y) = <a, y - x>^2`.
fn quadratic_probe(x: &[f64], a: &[f64]) -> Expr {
    let lin = a
        .iter()
        .enumerate()
        .filter(|(_, &ai)| ai != 0.0)
        .map(|(i, &ai)| ai * (Expr::x(i) - x[i]))
        .reduce(|p, q| p + q)
        .unwrap_or(Expr::Const(0.0));
    lin.pow(Expr::Const(2.0))
}

/// `lim_{y -> x} R(y) / (4 <a, y - x>)` along `y = x + delta a`, which equals
/// the cubic form `sum T3 a_k a_i a_j` of the diffusion derivatives.
fn cubic_form_limit(op: &OperatorFamily, s: f64, x: &[f64], a: &[f64]) -> Result<f64> {
    let probe = BakryProbe::new(op, &quadratic_probe(x, a));
    two_sided_limit(|delta| {
        let y: Vec<f64> = x.iter().zip(a).map(|(xi, ai)| xi + delta * ai).collect();
        let l: f64 = a.iter().zip(y.iter().zip(x)).map(|(ai, (yi, xi))| ai * (yi - xi)).sum();
        Ok(probe.residual(s, &y, 0.0)? / (4.0 * l))
    })
}

/// Infers the algebraic tensor `T_kij = D_k q_ij + D_i q_kj + D_j q_ik` at
/// `(s, x)` from limits of the Bakry residual for the three probe families,
/// and compares with the symbolic value.
pub fn necessity_probe(op: &OperatorFamily, s: f64, x: &[f64]) -> Result<NecessityReport> {
    let d = op.dimension();
    if !op.contains_time(s) {
        let (lo, hi) = op.time_interval();
        return Err(Error::InvalidArgument(format!("s={s} is not in ({lo}, {hi}]")));
    }
    if x.len() != d {
        return Err(Error::InvalidArgument(format!("point has {} coordinates, expected {d}", x.len())));
    }
    let symbolic = crate::conditions::symmetrized_tensor(op, s, x)?;
    let sym = |k: usize, i: usize, j: usize| symbolic[(k * d + i) * d + j];
    let mut patterns = Vec::new();

    // i = j = k: f = cos(y_i - x_i); R / (sin cos) -> D_i q_ii.
    let mut diag = vec![0.0; d];
    for i in 0..d {
        let f = Expr::call(Func::Cos, vec![Expr::x(i) - x[i]]);
        let probe = BakryProbe::new(op, &f);
        diag[i] = two_sided_limit(|delta| {
            let mut y = x.to_vec();
            y[i] += delta;
            let (sn, cs) = (y[i] - x[i]).sin_cos();
            Ok(probe.residual(s, &y, 0.0)? / (sn * cs))
        })?;
        patterns.push(PatternInference {
            pattern: "iii",
            indices: (i, i, i),
            inferred: 3.0 * diag[i],
            symbolic: sym(i, i, i),
        });
    }

    // i != j, k = i: a = e_i + eps e_j; the cubic form is
    // D_i q_ii + eps T_iij + eps^2 T_jji + eps^3 D_j q_jj.
    let mut pair = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let slopes = PROBE_EPSILONS
                .iter()
                .map(|&eps| {
                    let mut a = vec![0.0; d];
                    a[i] = 1.0;
                    a[j] = eps;
                    let t3 = cubic_form_limit(op, s, x, &a)?;
                    Ok((eps, (t3 - diag[i] - eps.powi(3) * diag[j]) / eps))
                })
                .collect::<Result<Vec<_>>>()?;
            // The slope is linear in eps; extrapolate the two smallest to 0.
            let (e1, g1) = slopes[slopes.len() - 2];
            let (e2, g2) = slopes[slopes.len() - 1];
            let value = g2 - e2 * (g1 - g2) / (e1 - e2);
            pair[i * d + j] = value;
            patterns.push(PatternInference {
                pattern: "iij",
                indices: (i, i, j),
                inferred: value,
                symbolic: sym(i, i, j),
            });
        }
    }

    // Distinct i < j < k: a = e_i + e_j + e_k; the cubic form is
    // sum_p D_p q_pp + sum_{p != r} T_ppr + 2 T_ijk.
    for i in 0..d {
        for j in i + 1..d {
            for k in j + 1..d {
                let mut a = vec![0.0; d];
                for m in [i, j, k] {
                    a[m] = 1.0;
                }
                let t3 = cubic_form_limit(op, s, x, &a)?;
                let idx = [i, j, k];
                let mut known: f64 = idx.iter().map(|&p| diag[p]).sum();
                for &p in &idx {
                    for &r in &idx {
                        if p != r {
                            known += pair[p * d + r];
                        }
                    }
                }
                patterns.push(PatternInference {
                    pattern: "ijk",
                    indices: (i, j, k),
                    inferred: 0.5 * (t3 - known),
                    symbolic: sym(i, j, k),
                });
            }
        }
    }

    let alg = algebraic_residual(op, s, x)?;
    let worst = patterns
        .iter()
        .fold(0.0f64, |m, p| m.max(p.inferred.abs()));
    let tolerance = 1e-6;
    let mut notes = vec![format!("algebraic_residual={alg:e}")];
    let agree = (worst - alg).abs() <= 1e-3 * alg.max(1.0);
    notes.push(format!(
        "inferred and symbolic maxima {}",
        if agree { "agree" } else { "DISAGREE" }
    ));
    let report = ConditionReport {
        condition: "necessity".into(),
        pass: worst <= tolerance,
        extremal_value: worst,
        witness_t: s,
        witness_x: x.to_vec(),
        samples: patterns.len(),
        tolerance,
        eta_mode: None,
        seed: None,
        notes,
    };
    Ok(NecessityReport {
        report,
        patterns,
        algebraic_residual: alg,
    })
}

/// `max_k sup|u(t_k)| - f_sup`; passes when `<= tol` (default `1e-6`).
pub fn max_principle_check(traj: &Trajectory, f_sup: f64, tol: Option<f64>) -> VerificationReport {
    let tolerance = tol.unwrap_or(MAX_PRINCIPLE_TOL);
    let grid = traj.grid();
    let times = traj.times();
    let per_snapshot = traj
        .snapshots
        .iter()
        .map(|snap| {
            let vals = snap.field.values();
            // First node attaining the sup; nodes are in lexicographic order.
            let (idx, sup) = vals
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| {
                    if v.abs() > bv {
                        (i, v.abs())
                    } else {
                        (bi, bv)
                    }
                });
            Some(Extremum::new(sup - f_sup, snap.time, grid.point(idx)))
        })
        .collect();
    let mut report = collect_report(VerificationKind::MaxPrinciple, per_snapshot, &times, tolerance);
    report.parameters.push(("f_sup".into(), f_sup.to_string()));
    report
}
