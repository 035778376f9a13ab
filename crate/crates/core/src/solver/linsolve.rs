//! Solvers for the implicit step `(I - w A) x = rhs`.
//!
//! Boundary rows are the identity with zero right-hand side. Both solvers
//! split the nodes into the grid's fixed slabs, so parallel and sequential
//! runs do the same arithmetic in the same order.

use crate::exec::{map_chunks_mut, map_range, max_range, Execution};
use crate::Result;

use super::stencil::Stencil;
use super::{LinearSolver, SolverConfig, SolverError};

pub(crate) struct System<'a> {
    pub st: &'a Stencil,
    pub w: f64,
    pub slab: usize,
    pub exec: Execution,
}

impl System<'_> {
    /// `y = (I - w A) x` on interior nodes, `y = x` elsewhere.
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let st = self.st;
        let width = st.width();
        let slab = self.slab;
        let w = self.w;
        map_chunks_mut(self.exec, y, slab, |c, chunk| {
            let start = c * slab;
            for (local, out) in chunk.iter_mut().enumerate() {
                let p = start + local;
                if !st.interior[p] {
                    *out = x[p];
                    continue;
                }
                let row = &st.weights[p * width..(p + 1) * width];
                let mut acc = row[0] * x[p];
                for (wk, off) in row[1..].iter().zip(&st.offsets) {
                    acc += wk * x[(p as isize + off) as usize];
                }
                *out = x[p] - w * acc;
            }
        });
    }

    /// One symmetric Gauss–Seidel sweep per slab on `x`, reading neighbours
    /// outside the slab from `outside` (`None` means zero). Returns the
    /// largest residual seen in the forward pass.
    fn sgs_sweep(&self, rhs: &[f64], x: &mut [f64], outside: Option<&[f64]>) -> f64 {
        let st = self.st;
        let width = st.width();
        let slab = self.slab;
        let w = self.w;
        let res = map_chunks_mut(self.exec, x, slab, |c, chunk| {
            let start = c * slab;
            let end = start + chunk.len();
            let mut worst: f64 = 0.0;
            let mut relax = |p: usize, chunk: &mut [f64], track: bool| {
                if !st.interior[p] {
                    chunk[p - start] = rhs[p];
                    return;
                }
                let row = &st.weights[p * width..(p + 1) * width];
                let mut acc = 0.0;
                for (wk, off) in row[1..].iter().zip(&st.offsets) {
                    let q = (p as isize + off) as usize;
                    let v = if q >= start && q < end {
                        chunk[q - start]
                    } else {
                        outside.map_or(0.0, |o| o[q])
                    };
                    acc += wk * v;
                }
                let diag = 1.0 - w * row[0];
                let target = rhs[p] + w * acc;
                if track {
                    worst = worst.max((target - diag * chunk[p - start]).abs());
                }
                chunk[p - start] = target / diag;
            };
            for p in start..end {
                relax(p, chunk, true);
            }
            for p in (start..end).rev() {
                relax(p, chunk, false);
            }
            worst
        });
        res.into_iter().fold(0.0, nan_max)
    }

    /// Slab-local symmetric Gauss–Seidel preconditioner: one sweep from zero.
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        self.sgs_sweep(r, z, None);
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = a.len();
        let chunks = n.div_ceil(self.slab);
        map_range(self.exec, chunks, |c| {
            let lo = c * self.slab;
            let hi = (lo + self.slab).min(n);
            a[lo..hi].iter().zip(&b[lo..hi]).map(|(x, y)| x * y).sum::<f64>()
        })
        .into_iter()
        .sum()
    }

    fn norm_inf(&self, a: &[f64]) -> f64 {
        max_range(self.exec, a.len(), |i| {
            let v = a[i].abs();
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        })
    }
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Solves in place, starting from the value of `x`. Returns the number of
/// sweeps (Gauss–Seidel) or iterations (BiCGSTAB) used.
pub(crate) fn solve(
    sys: &System<'_>,
    rhs: &[f64],
    x: &mut [f64],
    config: &SolverConfig,
    time: f64,
) -> Result<usize> {
    match config.linear_solver {
        LinearSolver::GaussSeidel => gauss_seidel(sys, rhs, x, config, time),
        LinearSolver::BiCgStab => bicgstab(sys, rhs, x, config, time),
    }
}

fn gauss_seidel(sys: &System<'_>, rhs: &[f64], x: &mut [f64], config: &SolverConfig, time: f64) -> Result<usize> {
    let mut prev = x.to_vec();
    let mut residual = f64::INFINITY;
    for sweep in 1..=config.max_sweeps {
        prev.copy_from_slice(x);
        residual = sys.sgs_sweep(rhs, x, Some(&prev));
        if !residual.is_finite() {
            return Err(SolverError::NonFinite { time }.into());
        }
        if residual <= config.tolerance {
            return Ok(sweep);
        }
    }
    Err(SolverError::NotConverged {
        time,
        residual,
        sweeps: config.max_sweeps,
    }
    .into())
}

/// Right-preconditioned BiCGSTAB, restarted from the true residual whenever
/// the recursion breaks down or its residual drifts from the true one.
fn bicgstab(sys: &System<'_>, rhs: &[f64], x: &mut [f64], config: &SolverConfig, time: f64) -> Result<usize> {
    let n = x.len();
    let tol = config.tolerance;
    let mut r = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut iterations = 0;
    let mut residual;

    loop {
        sys.apply(x, &mut tmp);
        for i in 0..n {
            r[i] = rhs[i] - tmp[i];
        }
        residual = sys.norm_inf(&r);
        if !residual.is_finite() {
            return Err(SolverError::NonFinite { time }.into());
        }
        if residual <= tol {
            return Ok(iterations);
        }
        if iterations >= config.max_sweeps {
            break;
        }
        let r_hat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        p.iter_mut().for_each(|e| *e = 0.0);
        v.iter_mut().for_each(|e| *e = 0.0);
        while iterations < config.max_sweeps {
            iterations += 1;
            let rho_new = sys.dot(&r_hat, &r);
            if rho_new == 0.0 || !rho_new.is_finite() {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            sys.precondition(&p, &mut p_hat);
            sys.apply(&p_hat, &mut v);
            let denom = sys.dot(&r_hat, &v);
            if denom == 0.0 || !denom.is_finite() {
                break;
            }
            alpha = rho / denom;
            // r becomes s = r - alpha v
            for i in 0..n {
                x[i] += alpha * p_hat[i];
                r[i] -= alpha * v[i];
            }
            if sys.norm_inf(&r) <= tol {
                break;
            }
            sys.precondition(&r, &mut s_hat);
            sys.apply(&s_hat, &mut t);
            let tt = sys.dot(&t, &t);
            if tt == 0.0 || !tt.is_finite() {
                break;
            }
            omega = sys.dot(&t, &r) / tt;
            for i in 0..n {
                x[i] += omega * s_hat[i];
                r[i] -= omega * t[i];
            }
            if omega == 0.0 || sys.norm_inf(&r) <= 0.5 * tol {
                break;
            }
        }
    }
    Err(SolverError::NotConverged {
        time,
        residual,
        sweeps: iterations,
    }
    .into())
}
