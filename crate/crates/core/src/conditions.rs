//! Sampled checks of the structural hypotheses on `(Q, b)`.
//!
//! Every check evaluates a pointwise quantity on the samples of a
//! [`SampleRegion`] and reports its extremum together with the sample that
//! attains it. The checks are evidence, not certificates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::{try_map_range, Execution};
use crate::expr::Expr;
use crate::linalg::SymMatrix;
use crate::operator::{EtaMode, OperatorFamily, PointEvaluation};
use crate::report::{argmax, argmin, ConditionReport, Extremum};
use crate::{Error, Result};

pub const DEFAULT_SPACE_COUNT: usize = 11;
pub const DEFAULT_TIME_COUNT: usize = 7;
pub const DEFAULT_RANDOM_SAMPLES: usize = 1000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_ALGEBRAIC_TOL: f64 = 1e-10;

/// Space-time box sampled by a tensor grid plus uniform random points.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRegion {
    pub t_range: (f64, f64),
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Grid points per spatial axis.
    pub space_counts: Vec<usize>,
    /// Grid points in time.
    pub time_count: usize,
    pub random_samples: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl SampleRegion {
    /// Box `[lo, hi]` with the default sampling density.
    pub fn new(t_range: (f64, f64), lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let d = lo.len();
        let region = SampleRegion {
            t_range,
            lo,
            hi,
            space_counts: vec![DEFAULT_SPACE_COUNT; d],
            time_count: DEFAULT_TIME_COUNT,
            random_samples: DEFAULT_RANDOM_SAMPLES,
            seed: DEFAULT_SEED,
            execution: Execution::default(),
        };
        region.validate()?;
        Ok(region)
    }

    /// The cube `[-half_width, half_width]^d`.
    pub fn cube(dimension: usize, half_width: f64, t_range: (f64, f64)) -> Result<Self> {
        Self::new(
            t_range,
            vec![-half_width; dimension],
            vec![half_width; dimension],
        )
    }

    pub fn with_counts(mut self, space: usize, time: usize) -> Result<Self> {
        self.space_counts = vec![space; self.lo.len()];
        self.time_count = time;
        self.validate()?;
        Ok(self)
    }

    pub fn with_random(mut self, count: usize, seed: u64) -> Self {
        self.random_samples = count;
        self.seed = seed;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn dimension(&self) -> usize {
        self.lo.len()
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.lo.len() != self.hi.len() || self.space_counts.len() != self.lo.len() {
            return bad("sample region axes disagree".into());
        }
        if self.lo.is_empty() {
            return bad("sample region has no spatial axes".into());
        }
        for (a, (lo, hi)) in self.lo.iter().zip(&self.hi).enumerate() {
            if !(lo < hi) {
                return bad(format!("axis {}: need lo < hi, got [{lo}, {hi}]", a + 1));
            }
        }
        if self.space_counts.iter().any(|&c| c < 2) || self.time_count < 2 {
            return bad("sample counts must be at least 2".into());
        }
        if !(self.t_range.0 <= self.t_range.1) {
            return bad(format!("empty time range {:?}", self.t_range));
        }
        Ok(())
    }

    fn check_within(&self, op: &OperatorFamily) -> Result<()> {
        if op.dimension() != self.dimension() {
            return Err(Error::InvalidArgument(format!(
                "region has dimension {}, operator {}",
                self.dimension(),
                op.dimension()
            )));
        }
        if !op.contains_time(self.t_range.0) || !op.contains_time(self.t_range.1) {
            let (lo, hi) = op.time_interval();
            return Err(Error::InvalidArgument(format!(
                "time range {:?} is not inside ({lo}, {hi}]",
                self.t_range
            )));
        }
        Ok(())
    }

    /// Tensor-grid samples (time slowest) followed by the random samples.
    pub fn points(&self) -> Vec<(f64, Vec<f64>)> {
        let d = self.dimension();
        let lin = |lo: f64, hi: f64, n: usize, k: usize| {
            if k + 1 == n {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        };
        let grid_len: usize = self.space_counts.iter().product();
        let mut pts = Vec::with_capacity(self.time_count * grid_len + self.random_samples);
        for kt in 0..self.time_count {
            let t = lin(self.t_range.0, self.t_range.1, self.time_count, kt);
            for flat in 0..grid_len {
                let mut rest = flat;
                let mut x = vec![0.0; d];
                for a in (0..d).rev() {
                    let n = self.space_counts[a];
                    x[a] = lin(self.lo[a], self.hi[a], n, rest % n);
                    rest /= n;
                }
                pts.push((t, x));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..self.random_samples {
            let t = if self.t_range.0 < self.t_range.1 {
                rng.gen_range(self.t_range.0..=self.t_range.1)
            } else {
                self.t_range.0
            };
            let x = (0..d)
                .map(|a| rng.gen_range(self.lo[a]..=self.hi[a]))
                .collect();
            pts.push((t, x));
        }
        pts
    }
}

fn sample<F>(region: &SampleRegion, f: F) -> Result<(Vec<Extremum>, usize)>
where
    F: Fn(f64, &[f64]) -> Result<f64> + Sync + Send,
{
    let pts = region.points();
    let vals = try_map_range(region.execution, pts.len(), |k| {
        let (t, x) = &pts[k];
        f(*t, x).map(|v| Extremum::new(v, *t, x.clone()))
    })?;
    let n = vals.len();
    Ok((vals, n))
}

fn report(
    name: &str,
    best: Extremum,
    samples: usize,
    pass: bool,
    tolerance: f64,
    eta_mode: Option<EtaMode>,
    region: &SampleRegion,
) -> ConditionReport {
    ConditionReport {
        condition: name.to_string(),
        pass,
        extremal_value: best.value,
        witness_t: best.t,
        witness_x: best.x,
        samples,
        tolerance,
        eta_mode,
        seed: Some(region.seed),
        notes: Vec::new(),
    }
}

/// Minimum of `lambda_min(Q)` over the samples; passes when positive.
pub fn check_ellipticity(op: &OperatorFamily, region: &SampleRegion) -> Result<ConditionReport> {
    region.check_within(op)?;
    let (vals, n) = sample(region, |t, x| {
        let (q, _) = op.coefficients_at(t, x)?;
        Ok(q.min_eigenvalue())
    })?;
    let best = argmin(vals).expect("regions are never empty");
    let pass = best.value > 0.0;
    Ok(report("ellipticity", best, n, pass, 0.0, Some(EtaMode::LambdaMin), region))
}

/// `max_{i,j,k} |D_k q_ij + D_i q_kj + D_j q_ik|` from already evaluated
/// derivatives.
pub fn algebraic_residual_of(p: &PointEvaluation) -> f64 {
    let d = p.dimension();
    let mut worst: f64 = 0.0;
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                let s = p.dq(k, i, j) + p.dq(i, k, j) + p.dq(j, i, k);
                worst = worst.max(s.abs());
            }
        }
    }
    worst
}

/// The symmetrized tensor `T_kij = D_k q_ij + D_i q_kj + D_j q_ik` at a point,
/// stored as `[(k * d + i) * d + j]`.
pub fn symmetrized_tensor(op: &OperatorFamily, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    let d = op.dimension();
    let dq = |k: usize, i: usize, j: usize| {
        op.dq(k, i, j)
            .eval(t, x)
            .map_err(|e| Error::eval_at("diffusion derivative", t, x, e))
    };
    let mut out = Vec::with_capacity(d * d * d);
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                out.push(dq(k, i, j)? + dq(i, k, j)? + dq(j, i, k)?);
            }
        }
    }
    Ok(out)
}

/// Largest violation of `D_k q_ij + D_i q_kj + D_j q_ik = 0` at `(t, x)`.
pub fn algebraic_residual(op: &OperatorFamily, t: f64, x: &[f64]) -> Result<f64> {
    Ok(symmetrized_tensor(op, t, x)?
        .into_iter()
        .fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Maximum algebraic residual over the samples; passes when `<= tol`.
pub fn check_algebraic(op: &OperatorFamily, region: &SampleRegion, tol: f64) -> Result<ConditionReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    region.check_within(op)?;
    let (vals, n) = sample(region, |t, x| algebraic_residual(op, t, x))?;
    let best = argmax(vals).expect("regions are never empty");
    let pass = best.value <= tol;
    Ok(report("algebraic", best, n, pass, tol, None, region))
}

/// `M = S + (grad b + grad b^T)/2` with
/// `S_kl = 1/(2 eta) sum_ij D_k q_ij D_l q_ij`, so that the dissipativity
/// form equals `<M xi, xi>` and the sharp pointwise constant is
/// `lambda_max(M)`.
pub fn dissipativity_matrix_of(p: &PointEvaluation, eta: f64) -> SymMatrix {
    let d = p.dimension();
    SymMatrix::from_upper(d, |k, l| {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += p.dq(k, i, j) * p.dq(l, i, j);
            }
        }
        s / (2.0 * eta) + 0.5 * (p.db(k, l) + p.db(l, k))
    })
}

pub fn dissipativity_matrix(
    op: &OperatorFamily,
    t: f64,
    x: &[f64],
    mode: EtaMode,
) -> Result<SymMatrix> {
    let p = op.eval_at(t, x)?;
    let eta = op.eta_at(mode, t, x, &p.q)?;
    if !(eta > 0.0) {
        return Err(Error::Condition(format!(
            "degenerate ellipticity eta={eta} at t={t}, x={x:?}"
        )));
    }
    Ok(dissipativity_matrix_of(&p, eta))
}

/// Empirical dissipativity constant: the maximum of `lambda_max(M)` over the
/// samples. Passes when finite.
pub fn estimate_c0(op: &OperatorFamily, region: &SampleRegion, mode: EtaMode) -> Result<ConditionReport> {
    region.check_within(op)?;
    let (vals, n) = sample(region, |t, x| {
        Ok(dissipativity_matrix(op, t, x, mode)?.max_eigenvalue())
    })?;
    let best = argmax(vals).expect("regions are never empty");
    let pass = best.value.is_finite();
    Ok(report("dissipativity", best, n, pass, 0.0, Some(mode), region))
}

/// Maximum of `(A(t)phi)/phi` over the samples; passes when `<= gamma`
/// (relative slack `1e-9`). Radial unboundedness of `phi` is assumed, not
/// checked.
pub fn check_lyapunov(
    op: &OperatorFamily,
    phi: &Expr,
    gamma: f64,
    region: &SampleRegion,
) -> Result<ConditionReport> {
    region.check_within(op)?;
    let generator = op.generator_expr(phi);
    let (vals, n) = sample(region, |t, x| {
        let p = phi.eval(t, x).map_err(|e| Error::eval_at("phi", t, x, e))?;
        if !(p > 0.0) {
            return Err(Error::Condition(format!(
                "Lyapunov function is not positive at t={t}, x={x:?} (phi={p})"
            )));
        }
        let a = generator
            .eval(t, x)
            .map_err(|e| Error::eval_at("A(t)phi", t, x, e))?;
        Ok(a / p)
    })?;
    let best = argmax(vals).expect("regions are never empty");
    let tol = 1e-9 * gamma.abs().max(1.0);
    let pass = best.value <= gamma + tol;
    let mut r = report("lyapunov", best, n, pass, tol, None, region);
    r.notes.push(format!("gamma={gamma}"));
    r.notes
        .push("assumed: phi(x) -> infinity as |x| -> infinity (not checked)".into());
    Ok(r)
}
