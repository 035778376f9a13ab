//! Per-node finite-difference weights of `A(t)`.

use crate::exec::{map_chunks_mut, try_map_range, Execution};
use crate::operator::OperatorFamily;
use crate::{Error, Result};

use super::grid::Grid;
use super::Advection;

/// Discrete generator frozen at one time: for each node a center weight
/// followed by one weight per neighbour offset. Boundary rows are zero.
#[derive(Debug, Clone)]
pub(crate) struct Stencil {
    /// Neighbour offsets: `+e_a, -e_a` per axis, then for each pair `a < b`
    /// the corners `(+,+), (+,-), (-,+), (-,-)`.
    pub offsets: Vec<isize>,
    pub weights: Vec<f64>,
    pub interior: Vec<bool>,
}

impl Stencil {
    pub fn width(&self) -> usize {
        self.offsets.len() + 1
    }

    pub fn build(
        op: &OperatorFamily,
        grid: &Grid,
        t: f64,
        advection: Advection,
        exec: Execution,
    ) -> Result<Self> {
        let d = grid.dimension();
        let all = offsets(grid);
        // Cross corners of pairs whose q_ab is identically zero are dropped.
        let mut keep = vec![true; all.len() + 1];
        let mut slot = 1 + 2 * d;
        for a in 0..d {
            for b in a + 1..d {
                if op.q(a, b).as_const() == Some(0.0) {
                    keep[slot..slot + 4].iter_mut().for_each(|k| *k = false);
                }
                slot += 4;
            }
        }
        let offsets: Vec<isize> = all
            .iter()
            .zip(&keep[1..])
            .filter(|(_, &k)| k)
            .map(|(o, _)| *o)
            .collect();
        let full = all.len() + 1;
        let width = offsets.len() + 1;
        let slab = grid.chunk_layers() * grid.stride(0);
        let chunks = grid.len().div_ceil(slab);
        let h = grid.spacing();
        let (h2, nq) = (h * h, d * (d + 1) / 2);

        let parts = try_map_range(exec, chunks, |c| -> Result<(Vec<f64>, Vec<bool>)> {
            let start = c * slab;
            let end = (start + slab).min(grid.len());
            let mut w = vec![0.0; (end - start) * width];
            let mut interior = vec![false; end - start];
            let mut x = vec![0.0; d];
            let mut coef = vec![0.0; nq + d];
            let mut row = vec![0.0; full];
            for idx in start..end {
                if grid.is_boundary(idx) {
                    continue;
                }
                interior[idx - start] = true;
                grid.coords_into(idx, &mut x);
                op.coefficients_into(t, &x, &mut coef)
                    .map_err(|e| Error::eval_at("coefficients", t, &x, e))?;
                row.iter_mut().for_each(|v| *v = 0.0);
                fill_row(&mut row, &coef, d, h, h2, advection);
                let kept = row.iter().zip(&keep).filter(|(_, &k)| k).map(|(v, _)| *v);
                for (o, v) in w[(idx - start) * width..(idx - start + 1) * width].iter_mut().zip(kept) {
                    *o = v;
                }
            }
            Ok((w, interior))
        })?;

        let mut weights = Vec::with_capacity(grid.len() * width);
        let mut interior = Vec::with_capacity(grid.len());
        for (w, i) in parts {
            weights.extend(w);
            interior.extend(i);
        }
        Ok(Stencil {
            offsets,
            weights,
            interior,
        })
    }

    /// `out = A u` at interior nodes, `0` on the boundary.
    pub fn apply(&self, u: &[f64], out: &mut [f64], slab: usize, exec: Execution) {
        let width = self.width();
        map_chunks_mut(exec, out, slab, |c, chunk| {
            let start = c * slab;
            for (local, o) in chunk.iter_mut().enumerate() {
                let p = start + local;
                *o = if self.interior[p] {
                    self.row_apply(p, width, u)
                } else {
                    0.0
                };
            }
        });
    }

    #[inline]
    fn row_apply(&self, p: usize, width: usize, u: &[f64]) -> f64 {
        let row = &self.weights[p * width..(p + 1) * width];
        let mut acc = row[0] * u[p];
        for (w, off) in row[1..].iter().zip(&self.offsets) {
            acc += w * u[(p as isize + off) as usize];
        }
        acc
    }
}

fn offsets(grid: &Grid) -> Vec<isize> {
    let d = grid.dimension();
    let s: Vec<isize> = (0..d).map(|a| grid.stride(a) as isize).collect();
    let mut out = Vec::with_capacity(2 * d * d);
    for a in 0..d {
        out.push(s[a]);
        out.push(-s[a]);
    }
    for a in 0..d {
        for b in a + 1..d {
            out.extend([s[a] + s[b], s[a] - s[b], -s[a] + s[b], -s[a] - s[b]]);
        }
    }
    out
}

/// `coef` holds the upper triangle of `Q` row by row, then `b`.
fn fill_row(row: &mut [f64], coef: &[f64], d: usize, h: f64, h2: f64, advection: Advection) {
    let nq = d * (d + 1) / 2;
    let mut k = 0;
    let mut cross = 1 + 2 * d;
    for a in 0..d {
        for b in a..d {
            let q = coef[k];
            k += 1;
            if a == b {
                row[1 + 2 * a] += q / h2;
                row[2 + 2 * a] += q / h2;
                row[0] -= 2.0 * q / h2;
            } else {
                let w = q / (2.0 * h2);
                row[cross] += w;
                row[cross + 1] -= w;
                row[cross + 2] -= w;
                row[cross + 3] += w;
                cross += 4;
            }
        }
    }
    for a in 0..d {
        let b = coef[nq + a];
        match advection {
            Advection::Upwind => {
                if b > 0.0 {
                    row[1 + 2 * a] += b / h;
                    row[0] -= b / h;
                } else {
                    row[2 + 2 * a] -= b / h;
                    row[0] += b / h;
                }
            }
            Advection::Centered => {
                row[1 + 2 * a] += b / (2.0 * h);
                row[2 + 2 * a] -= b / (2.0 * h);
            }
        }
    }
}
