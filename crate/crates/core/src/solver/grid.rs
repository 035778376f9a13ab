//! Uniform Cartesian grids and nodal fields.

use crate::expr::Expr;
use crate::linalg::SymMatrix;
use crate::{Error, Result};

use super::SolverError;

/// Box `center + [-R, R]^d` with `n` nodes per axis. Node indices run with
/// axis 0 slowest, so a range of axis-0 layers is a contiguous slab.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dimension: usize,
    n: usize,
    half_width: f64,
    h: f64,
    center: Vec<f64>,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    pub fn new(dimension: usize, n: usize, half_width: f64) -> Result<Self, SolverError> {
        if dimension == 0 {
            return Err(SolverError::InvalidGrid("dimension must be positive".into()));
        }
        if n < 5 || n.is_multiple_of(2) {
            return Err(SolverError::InvalidGrid(format!(
                "points per axis must be odd and at least 5, got {n}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(SolverError::InvalidGrid(format!(
                "half-width must be positive, got {half_width}"
            )));
        }
        let len = n
            .checked_pow(dimension as u32)
            .filter(|&l| l <= 1 << 28)
            .ok_or_else(|| SolverError::InvalidGrid(format!("{n}^{dimension} nodes is too many")))?;
        let mut strides = vec![1; dimension];
        for a in (0..dimension.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * n;
        }
        Ok(Grid {
            dimension,
            n,
            half_width,
            h: 2.0 * half_width / (n - 1) as f64,
            center: vec![0.0; dimension],
            strides,
            len,
        })
    }

    /// Grid of half-width `half_width` and spacing `h`; `2R/h` must be an
    /// even integer.
    pub fn with_spacing(dimension: usize, half_width: f64, h: f64) -> Result<Self, SolverError> {
        let cells = 2.0 * half_width / h;
        let rounded = cells.round();
        if !(h > 0.0) || (cells - rounded).abs() > 1e-9 * cells.max(1.0) || !(rounded as usize).is_multiple_of(2) {
            return Err(SolverError::InvalidGrid(format!(
                "half-width {half_width} is not an even multiple of h/2 = {}",
                h / 2.0
            )));
        }
        Self::new(dimension, rounded as usize + 1, half_width)
    }

    pub fn centered_at(mut self, center: Vec<f64>) -> Result<Self, SolverError> {
        if center.len() != self.dimension || center.iter().any(|c| !c.is_finite()) {
            return Err(SolverError::InvalidGrid(format!("bad center {center:?}")));
        }
        self.center = center;
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Coordinate of index `i` along `axis`; symmetric about the center.
    #[inline]
    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        let m = (self.n - 1) / 2;
        self.center[axis] + (i as f64 - m as f64) * self.h
    }

    pub fn multi_index(&self, idx: usize, out: &mut [usize]) {
        let mut rest = idx;
        for a in 0..self.dimension {
            out[a] = rest / self.strides[a];
            rest %= self.strides[a];
        }
    }

    pub fn index_of(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn coords_into(&self, idx: usize, out: &mut [f64]) {
        let mut rest = idx;
        for a in 0..self.dimension {
            out[a] = self.axis_coord(a, rest / self.strides[a]);
            rest %= self.strides[a];
        }
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dimension];
        self.coords_into(idx, &mut x);
        x
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let mut rest = idx;
        for a in 0..self.dimension {
            let i = rest / self.strides[a];
            if i == 0 || i == self.n - 1 {
                return true;
            }
            rest %= self.strides[a];
        }
        false
    }

    /// Index of the node at `x`, if `x` is a node (up to `1e-9 h`).
    pub fn node_at(&self, x: &[f64]) -> Option<usize> {
        let m = ((self.n - 1) / 2) as f64;
        let mut multi = vec![0; self.dimension];
        for a in 0..self.dimension {
            let r = (x[a] - self.center[a]) / self.h + m;
            let k = r.round();
            if (r - k).abs() > 1e-9 || k < 0.0 || k > (self.n - 1) as f64 {
                return None;
            }
            multi[a] = k as usize;
        }
        Some(self.index_of(&multi))
    }

    /// Non-boundary nodes with `|x_a - center_a| <= fraction * R` on every
    /// axis, in index order.
    pub fn inner_nodes(&self, fraction: f64) -> Vec<usize> {
        let m = (self.n - 1) / 2;
        let reach = ((fraction * self.half_width / self.h) + 1e-9).floor() as usize;
        let reach = reach.min(m - 1);
        let lo = m - reach;
        let hi = m + reach;
        let mut multi = vec![0; self.dimension];
        (0..self.len)
            .filter(|&idx| {
                self.multi_index(idx, &mut multi);
                multi.iter().all(|&i| i >= lo && i <= hi)
            })
            .collect()
    }

    /// Number of whole axis-0 layers per solver chunk. Depends on the grid
    /// only, never on the thread count.
    pub(crate) fn chunk_layers(&self) -> usize {
        4096usize.div_ceil(self.strides[0]).clamp(1, self.n)
    }
}

/// One value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "field length must match grid");
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; grid.dimension()];
        let values = (0..grid.len())
            .map(|idx| {
                grid.coords_into(idx, &mut x);
                f(&x)
            })
            .collect();
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    /// Samples `e(t, x)` at every node.
    pub fn sample(grid: &Grid, e: &Expr, t: f64) -> Result<Self> {
        let mut x = vec![0.0; grid.dimension()];
        let mut values = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            grid.coords_into(idx, &mut x);
            let v = e.eval(t, &x).map_err(|err| Error::eval_at("initial datum", t, &x, err))?;
            values.push(v);
        }
        Ok(ScalarField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn zero_boundary(&mut self) {
        for idx in 0..self.grid.len() {
            if self.grid.is_boundary(idx) {
                self.values[idx] = 0.0;
            }
        }
    }

    /// Gradient at one node: centered differences inside, one-sided at
    /// boundary nodes.
    pub fn gradient_at(&self, idx: usize, out: &mut [f64]) {
        let g = &self.grid;
        let n = g.points_per_axis();
        let h = g.spacing();
        let mut rest = idx;
        for a in 0..g.dimension() {
            let s = g.stride(a);
            let i = rest / s;
            rest %= s;
            out[a] = if i == 0 {
                (self.values[idx + s] - self.values[idx]) / h
            } else if i == n - 1 {
                (self.values[idx] - self.values[idx - s]) / h
            } else {
                (self.values[idx + s] - self.values[idx - s]) / (2.0 * h)
            };
        }
    }

    /// Centered second differences at a non-boundary node; mixed entries use
    /// the 4-point cross stencil.
    pub fn hessian_at(&self, idx: usize) -> SymMatrix {
        let g = &self.grid;
        let d = g.dimension();
        let h2 = g.spacing() * g.spacing();
        let u = |k: usize| self.values[k];
        SymMatrix::from_upper(d, |a, b| {
            let sa = g.stride(a);
            if a == b {
                (u(idx + sa) - 2.0 * u(idx) + u(idx - sa)) / h2
            } else {
                let sb = g.stride(b);
                (u(idx + sa + sb) - u(idx + sa - sb) - u(idx - sa + sb) + u(idx - sa - sb))
                    / (4.0 * h2)
            }
        })
    }

    /// Gradient vectors and their norms at every node.
    pub fn gradient_field(&self) -> GradientField {
        let d = self.grid.dimension();
        let mut vectors = vec![0.0; self.grid.len() * d];
        for (idx, chunk) in vectors.chunks_mut(d).enumerate() {
            self.gradient_at(idx, chunk);
        }
        let norms = vectors
            .chunks(d)
            .map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        GradientField {
            dimension: d,
            vectors,
            norms: ScalarField::from_values(&self.grid, norms),
        }
    }
}

/// Per-node gradient vectors plus the field of their Euclidean norms.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    dimension: usize,
    vectors: Vec<f64>,
    pub norms: ScalarField,
}

impl GradientField {
    pub fn at(&self, idx: usize) -> &[f64] {
        &self.vectors[idx * self.dimension..(idx + 1) * self.dimension]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(Grid::new(2, 4, 1.0).is_err());
        assert!(Grid::new(2, 3, 1.0).is_err());
        assert!(Grid::new(2, 5, 0.0).is_err());
        assert!(Grid::with_spacing(1, 4.0, 0.3).is_err());
        assert_eq!(Grid::with_spacing(1, 4.0, 0.05).unwrap().points_per_axis(), 161);
    }

    #[test]
    fn index_round_trip_and_center_node() {
        let g = Grid::new(3, 7, 1.5).unwrap().centered_at(vec![1.0, 0.0, -1.0]).unwrap();
        let mut m = [0; 3];
        for idx in [0, 17, 200, g.len() - 1] {
            g.multi_index(idx, &mut m);
            assert_eq!(g.index_of(&m), idx);
        }
        let c = g.node_at(&[1.0, 0.0, -1.0]).unwrap();
        assert_eq!(g.point(c), vec![1.0, 0.0, -1.0]);
        assert!(g.is_boundary(0) && !g.is_boundary(c));
        assert_eq!(g.node_at(&[1.1, 0.0, -1.0]), None);
    }

    #[test]
    fn inner_nodes_cover_half_box() {
        let g = Grid::new(2, 21, 2.0).unwrap();
        let inner = g.inner_nodes(0.5);
        assert_eq!(inner.len(), 11 * 11);
        assert!(inner.iter().all(|&k| g.point(k).iter().all(|v| v.abs() <= 1.0 + 1e-12)));
    }

    #[test]
    fn gradient_of_linear_field_is_exact() {
        let g = Grid::new(2, 9, 2.0).unwrap();
        let f = ScalarField::from_fn(&g, |x| x[0]);
        let grad = f.gradient_field();
        for idx in 0..g.len() {
            let v = grad.at(idx);
            assert!((v[0] - 1.0).abs() < 1e-14 && v[1] == 0.0, "{v:?}");
        }
    }

    #[test]
    fn hessian_of_quadratic_is_exact() {
        let g = Grid::new(2, 9, 2.0).unwrap();
        let f = ScalarField::from_fn(&g, |x| 3.0 * x[0] * x[0] + x[0] * x[1] - x[1] * x[1]);
        let c = g.node_at(&[0.5, -0.5]).unwrap();
        let hess = f.hessian_at(c);
        assert!((hess.get(0, 0) - 6.0).abs() < 1e-12);
        assert!((hess.get(0, 1) - 1.0).abs() < 1e-12);
        assert!((hess.get(1, 1) + 2.0).abs() < 1e-12);
    }
}
