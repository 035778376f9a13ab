//! Small dense symmetric matrices and their eigenvalues.

use std::f64::consts::PI;

/// Symmetric `n x n` matrix with full row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from the upper triangle: `f(i, j)` is only called with `i <= j`.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets entries `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn quadratic_form(&self, xi: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.get(i, j) * xi[i] * xi[j];
            }
        }
        s
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += self.get(i, j).powi(2);
                }
            }
        }
        s.sqrt()
    }

    /// Eigenvalues in ascending order.
    ///
    /// Closed form for `n <= 3`; cyclic Jacobi for larger matrices and for
    /// 3x3 matrices whose eigenvalues nearly coincide, where the
    /// trigonometric formula loses about half the digits.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev = match self.n {
            0 => Vec::new(),
            1 => vec![self.get(0, 0)],
            2 => eigen2(self.get(0, 0), self.get(0, 1), self.get(1, 1)).to_vec(),
            3 => match eigen3(self) {
                Some(ev) => ev.to_vec(),
                None => jacobi_eigenvalues(self),
            },
            _ => jacobi_eigenvalues(self),
        };
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(f64::NAN)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(f64::NAN)
    }
}

fn eigen2(a: f64, b: f64, c: f64) -> [f64; 2] {
    let mean = 0.5 * (a + c);
    let radius = (0.5 * (a - c)).hypot(b);
    [mean - radius, mean + radius]
}

// Trigonometric solution of the characteristic cubic. Returns `None` when two
// eigenvalues are too close for the formula to be accurate.
fn eigen3(m: &SymMatrix) -> Option<[f64; 3]> {
    let off = m.get(0, 1).powi(2) + m.get(0, 2).powi(2) + m.get(1, 2).powi(2);
    if off == 0.0 {
        return Some([m.get(0, 0), m.get(1, 1), m.get(2, 2)]);
    }
    let q = m.trace() / 3.0;
    let p2 = (0..3).map(|i| (m.get(i, i) - q).powi(2)).sum::<f64>() + 2.0 * off;
    let p = (p2 / 6.0).sqrt();
    let b = |i: usize, j: usize| (m.get(i, j) - if i == j { q } else { 0.0 }) / p;
    let det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1))
        - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
        + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
    let r = (0.5 * det).clamp(-1.0, 1.0);
    // r = +-1 means a repeated eigenvalue; acos is ill-conditioned nearby.
    if 1.0 - r.abs() < 1e-6 {
        return None;
    }
    let phi = r.acos() / 3.0;
    let largest = q + 2.0 * p * phi.cos();
    let smallest = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    Some([smallest, 3.0 * q - largest - smallest, largest])
}

/// Cyclic Jacobi rotations until the off-diagonal norm drops below
/// `1e-12 * max(1, |A|_F)`.
pub fn jacobi_eigenvalues(m: &SymMatrix) -> Vec<f64> {
    let n = m.dim();
    let mut a = m.clone();
    let tol = 1e-12 * m.frobenius().max(1.0);
    for _sweep in 0..100 {
        if a.off_diagonal_norm() < tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.data[k * n + p] = c * akp - s * akq;
                    a.data[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.data[p * n + k] = c * apk - s * aqk;
                    a.data[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a.get(i, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference(m: &SymMatrix) -> Vec<f64> {
        let n = m.dim();
        let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| m.get(i, j));
        let mut ev: Vec<f64> = dm.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    #[test]
    fn diagonal_three_by_three_is_exact() {
        let m = SymMatrix::from_upper(3, |i, j| if i == j { [3.0, 1.0, 2.0][i] } else { 0.0 });
        assert_eq!(m.eigenvalues(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn repeated_eigenvalue_is_resolved_to_full_precision() {
        // [[2,-1,0],[-1,2,0],[0,0,1]] has eigenvalues 1, 1, 3.
        let entries = [[2.0, -1.0, 0.0], [-1.0, 2.0, 0.0], [0.0, 0.0, 1.0]];
        let m = SymMatrix::from_upper(3, |i, j| entries[i][j]);
        let ev = m.eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-14, "{ev:?}");
        assert!((ev[1] - 1.0).abs() < 1e-14, "{ev:?}");
        assert!((ev[2] - 3.0).abs() < 1e-14, "{ev:?}");
    }

    proptest! {
        #[test]
        fn matches_reference_eigensolver(
            n in 1usize..6,
            entries in proptest::collection::vec(-5.0f64..5.0, 36),
        ) {
            let m = SymMatrix::from_upper(n, |i, j| entries[i * 6 + j]);
            let ours = m.eigenvalues();
            let theirs = reference(&m);
            for (a, b) in ours.iter().zip(&theirs) {
                prop_assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{ours:?} vs {theirs:?}");
            }
        }

        #[test]
        fn rayleigh_quotient_bounded_by_extreme_eigenvalues(
            n in 1usize..5,
            entries in proptest::collection::vec(-5.0f64..5.0, 25),
            xi in proptest::collection::vec(-1.0f64..1.0, 5),
        ) {
            let m = SymMatrix::from_upper(n, |i, j| entries[i * 5 + j]);
            let xi = &xi[..n];
            let norm2: f64 = xi.iter().map(|v| v * v).sum();
            prop_assume!(norm2 > 1e-6);
            let q = m.quadratic_form(xi);
            prop_assert!(q >= m.min_eigenvalue() * norm2 - 1e-9);
            prop_assert!(q <= m.max_eigenvalue() * norm2 + 1e-9);
        }
    }
}
