//! The operator family `A(t) = Tr(Q(t,x) D^2) + <b(t,x), grad>`.

mod document;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;


use crate::expr::{parse_with_params, EvalError, Expr, ParseError, Params, Var};
use crate::linalg::SymMatrix;
use crate::{Error, Result};

pub use document::{LyapunovSpec, SpecDocument};

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("missing {0}")]
    Missing(&'static str),
    #[error("in `{entry}`: {source}")]
    Parse {
        entry: String,
        #[source]
        source: ParseError,
    },
    #[error("parameter `{name}` must not depend on x")]
    SpatialParameter { name: String },
    #[error("q{}{} and q{}{} are given with different values", .0 + 1, .1 + 1, .1 + 1, .0 + 1)]
    Asymmetric(usize, usize),
    #[error("diffusion entry q{}{} given twice", .0 + 1, .1 + 1)]
    Duplicate(usize, usize),
}

/// How the ellipticity function `eta(t, x)` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EtaMode {
    /// Smallest eigenvalue of `Q(t, x)`, the largest admissible choice.
    #[default]
    LambdaMin,
    /// The `[ellipticity] eta` expression of the spec document.
    UserExpression,
}

impl fmt::Display for EtaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EtaMode::LambdaMin => "lambda-min",
            EtaMode::UserExpression => "user-expression",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Lyapunov {
    pub phi: Expr,
    pub gamma: f64,
}

/// Coefficients of `A(t)` together with their symbolic first-order spatial
/// derivatives. Immutable after [`OperatorFamily::build`].
#[derive(Debug, Clone)]
pub struct OperatorFamily {
    dimension: usize,
    /// Upper triangle, row by row.
    q: Vec<Expr>,
    b: Vec<Expr>,
    /// `dq[(k * d + i) * d + j] = D_k q_ij`.
    dq: Vec<Expr>,
    /// `db[j * d + i] = D_j b_i`.
    db: Vec<Expr>,
    t_lo: f64,
    t_hi: f64,
    eta: Option<Expr>,
    lyapunov: Option<Lyapunov>,
}

/// Everything `A(t)` needs at one point.
#[derive(Debug, Clone)]
pub struct PointEvaluation {
    pub q: SymMatrix,
    pub b: Vec<f64>,
    /// `dq[(k * d + i) * d + j] = D_k q_ij`.
    pub dq: Vec<f64>,
    /// `db[j * d + i] = D_j b_i`.
    pub db: Vec<f64>,
    /// Smallest eigenvalue of `q`.
    pub eta: f64,
}

impl PointEvaluation {
    pub fn dimension(&self) -> usize {
        self.b.len()
    }

    #[inline]
    pub fn dq(&self, k: usize, i: usize, j: usize) -> f64 {
        let d = self.dimension();
        self.dq[(k * d + i) * d + j]
    }

    /// `D_j b_i`.
    #[inline]
    pub fn db(&self, j: usize, i: usize) -> f64 {
        let d = self.dimension();
        self.db[j * d + i]
    }
}

#[inline]
fn upper_index(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * d - i * (i + 1) / 2 + j
}

impl OperatorFamily {
    /// Parses a spec document and builds the operator.
    pub fn from_text(text: &str) -> Result<Self> {
        Self::build(&SpecDocument::parse(text)?)
    }

    pub fn build(doc: &SpecDocument) -> Result<Self> {
        let d = doc.dimension;
        let params = bind_params(doc)?;
        let parse_entry = |entry: String, src: &str| {
            parse_with_params(src, d, &params)
                .map(|e| e.simplify())
                .map_err(|source| SpecError::Parse { entry, source })
        };

        let mut q: Vec<Option<Expr>> = vec![None; d * (d + 1) / 2];
        let mut given_lower: Vec<((usize, usize), Expr)> = Vec::new();
        for ((i, j), src) in &doc.diffusion {
            let e = parse_entry(format!("q{}{}", i + 1, j + 1), src)?;
            if i <= j {
                let slot = &mut q[upper_index(d, *i, *j)];
                if slot.is_some() {
                    return Err(SpecError::Duplicate(*i, *j).into());
                }
                *slot = Some(e);
            } else {
                given_lower.push(((*i, *j), e));
            }
        }
        for ((i, j), e) in given_lower {
            let slot = &mut q[upper_index(d, i, j)];
            match slot {
                None => *slot = Some(e),
                Some(upper) => {
                    if !numerically_equal(upper, &e, d, doc.t_lo, doc.t_hi) {
                        return Err(SpecError::Asymmetric(j, i).into());
                    }
                }
            }
        }
        for i in 0..d {
            if q[upper_index(d, i, i)].is_none() {
                return Err(SpecError::Missing("diagonal diffusion entry").into());
            }
        }
        let q: Vec<Expr> = q
            .into_iter()
            .map(|e| e.unwrap_or(Expr::Const(0.0)))
            .collect();

        let mut b = vec![Expr::Const(0.0); d];
        for (i, src) in &doc.drift {
            b[*i] = parse_entry(format!("b{}", i + 1), src)?;
        }

        let mut dq = Vec::with_capacity(d * d * d);
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    dq.push(q[upper_index(d, i, j)].differentiate(Var::X(k)));
                }
            }
        }
        let mut db = Vec::with_capacity(d * d);
        for j in 0..d {
            for bi in &b {
                db.push(bi.differentiate(Var::X(j)));
            }
        }

        let eta = doc
            .eta
            .as_ref()
            .map(|src| parse_entry("eta".into(), src))
            .transpose()?;
        let lyapunov = doc
            .lyapunov
            .as_ref()
            .map(|l| {
                parse_entry("phi".into(), &l.phi).map(|phi| Lyapunov {
                    phi,
                    gamma: l.gamma,
                })
            })
            .transpose()?;

        Ok(OperatorFamily {
            dimension: d,
            q,
            b,
            dq,
            db,
            t_lo: doc.t_lo,
            t_hi: doc.t_hi,
            eta,
            lyapunov,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// The time interval `(t_lo, t_hi]`.
    pub fn time_interval(&self) -> (f64, f64) {
        (self.t_lo, self.t_hi)
    }

    pub fn contains_time(&self, t: f64) -> bool {
        t > self.t_lo && t <= self.t_hi
    }

    pub fn q(&self, i: usize, j: usize) -> &Expr {
        &self.q[upper_index(self.dimension, i, j)]
    }

    pub fn b(&self, i: usize) -> &Expr {
        &self.b[i]
    }

    /// `D_k q_ij`.
    pub fn dq(&self, k: usize, i: usize, j: usize) -> &Expr {
        let d = self.dimension;
        &self.dq[(k * d + i) * d + j]
    }

    /// `D_j b_i`.
    pub fn db(&self, j: usize, i: usize) -> &Expr {
        &self.db[j * self.dimension + i]
    }

    pub fn eta_expression(&self) -> Option<&Expr> {
        self.eta.as_ref()
    }

    pub fn lyapunov(&self) -> Option<&Lyapunov> {
        self.lyapunov.as_ref()
    }

    /// True when no diffusion entry depends on `x`.
    pub fn has_constant_diffusion(&self) -> bool {
        self.dq.iter().all(|e| e.as_const() == Some(0.0))
    }

    fn eval(&self, e: &Expr, what: &str, t: f64, x: &[f64]) -> Result<f64> {
        e.eval(t, x).map_err(|err| Error::eval_at(what, t, x, err))
    }

    /// Evaluates `Q` and `b` only.
    pub fn coefficients_at(&self, t: f64, x: &[f64]) -> Result<(SymMatrix, Vec<f64>)> {
        let d = self.dimension;
        let mut q = SymMatrix::zeros(d);
        for i in 0..d {
            for j in i..d {
                q.set(i, j, self.eval(self.q(i, j), "diffusion", t, x)?);
            }
        }
        let b = self
            .b
            .iter()
            .map(|e| self.eval(e, "drift", t, x))
            .collect::<Result<Vec<_>>>()?;
        Ok((q, b))
    }

    /// Writes the upper triangle of `Q` and then `b` into `out`
    /// (length `d(d+1)/2 + d`), without allocating.
    pub fn coefficients_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let nq = self.q.len();
        for (slot, e) in out[..nq].iter_mut().zip(&self.q) {
            *slot = e.eval(t, x)?;
        }
        for (slot, e) in out[nq..].iter_mut().zip(&self.b) {
            *slot = e.eval(t, x)?;
        }
        Ok(())
    }

    pub fn eval_at(&self, t: f64, x: &[f64]) -> Result<PointEvaluation> {
        let (q, b) = self.coefficients_at(t, x)?;
        let dq = self
            .dq
            .iter()
            .map(|e| self.eval(e, "diffusion derivative", t, x))
            .collect::<Result<Vec<_>>>()?;
        let db = self
            .db
            .iter()
            .map(|e| self.eval(e, "drift derivative", t, x))
            .collect::<Result<Vec<_>>>()?;
        let eta = q.min_eigenvalue();
        Ok(PointEvaluation { q, b, dq, db, eta })
    }

    /// `eta(t, x)` under the given mode. `q` is `Q(t, x)`.
    pub fn eta_at(&self, mode: EtaMode, t: f64, x: &[f64], q: &SymMatrix) -> Result<f64> {
        match mode {
            EtaMode::LambdaMin => Ok(q.min_eigenvalue()),
            EtaMode::UserExpression => {
                let e = self.eta.as_ref().ok_or_else(|| {
                    Error::InvalidArgument(
                        "eta-mode user-expression needs an [ellipticity] eta entry".into(),
                    )
                })?;
                self.eval(e, "eta", t, x)
            }
        }
    }

    /// `A(t)phi` as an expression: `sum_ij q_ij D_ij phi + sum_i b_i D_i phi`.
    pub fn generator_expr(&self, phi: &Expr) -> Expr {
        let d = self.dimension;
        let grad = phi.gradient(d);
        let mut acc = Expr::Const(0.0);
        for i in 0..d {
            for j in i..d {
                let second = grad[i].differentiate(Var::X(j));
                if second.as_const() == Some(0.0) || self.q(i, j).as_const() == Some(0.0) {
                    continue;
                }
                let weight = if i == j { 1.0 } else { 2.0 };
                acc = acc + weight * self.q(i, j).clone() * second;
            }
            acc = acc + self.b[i].clone() * grad[i].clone();
        }
        acc.simplify()
    }

    /// `(A(t)phi)(x)` with exact symbolic derivatives of `phi`.
    pub fn apply_generator(&self, phi: &Expr, t: f64, x: &[f64]) -> Result<f64> {
        let e = self.generator_expr(phi);
        self.eval(&e, "generator", t, x)
    }
}

fn bind_params(doc: &SpecDocument) -> Result<Params, SpecError> {
    let mut params = Params::new();
    for (name, src) in &doc.params {
        let e = parse_with_params(src, doc.dimension, &params)
            .map_err(|source| SpecError::Parse {
                entry: name.clone(),
                source,
            })?
            .simplify();
        if (0..doc.dimension).any(|i| e.depends_on(Var::X(i))) {
            return Err(SpecError::SpatialParameter { name: name.clone() });
        }
        params.insert(name.clone(), e);
    }
    Ok(params)
}

fn numerically_equal(a: &Expr, b: &Expr, d: usize, t_lo: f64, t_hi: f64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let lo = if t_lo.is_finite() { t_lo } else { t_hi - 10.0 };
    let mut x = vec![0.0; d];
    for _ in 0..16 {
        let t = rng.gen_range(lo..=t_hi);
        x.iter_mut().for_each(|v| *v = rng.gen_range(-2.0..2.0));
        match (a.eval(t, &x), b.eval(t, &x)) {
            (Ok(u), Ok(v)) => {
                if (u - v).abs() > 1e-12 * (1.0 + u.abs().max(v.abs())) {
                    return false;
                }
            }
            (Err(_), Err(_)) => {}
            _ => return false,
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    pub(crate) const EXAMPLE41: &str = "\
[meta]
d=3
t_lo=0
t_hi=10
[params]
a1=1
a2=2
a3=3
psi=1
gamma=3
[diffusion]
q11=a1+psi*x2^2
q12=-psi*x1*x2
q13=0
q22=a2+psi*x1^2
q23=0
q33=a3
[drift]
b1=-gamma*x1*norm2(x)
b2=-gamma*x2*norm2(x)
b3=-gamma*x3*norm2(x)
";

    fn with_unit_a(src: &str) -> String {
        src.replace("a2=2", "a2=1").replace("a3=3", "a3=1")
    }

    #[test]
    fn heat_has_vanishing_derivatives() {
        let op = OperatorFamily::from_text("[meta]\nd=1\nt_hi=1\n[diffusion]\nq11=1\n[drift]\nb1=0\n")
            .unwrap();
        assert!(op.has_constant_diffusion());
        let p = op.eval_at(0.5, &[3.0]).unwrap();
        assert_eq!(p.eta, 1.0);
        assert_eq!(p.dq, vec![0.0]);
        assert_eq!(p.db, vec![0.0]);
        assert_eq!(op.apply_generator(&parse("x1^2", 1).unwrap(), 0.5, &[7.0]).unwrap(), 2.0);
    }

    #[test]
    fn example41_diffusion_derivative() {
        let op = OperatorFamily::from_text(&with_unit_a(EXAMPLE41)).unwrap();
        // D_2 q_11 = 2 psi x2
        for x in [[0.3, -1.0, 2.0], [1.0, 2.5, 0.0]] {
            assert_eq!(op.dq(1, 0, 0).eval(1.0, &x).unwrap(), 2.0 * x[1]);
        }
    }

    #[test]
    fn example41_point_values() {
        let op = OperatorFamily::from_text(EXAMPLE41).unwrap();
        let p = op.eval_at(1.0, &[0.0; 3]).unwrap();
        assert_eq!(p.eta, 1.0);
        for i in 0..3 {
            assert_eq!(p.q.get(i, i), (i + 1) as f64);
        }

        let op = OperatorFamily::from_text(&with_unit_a(EXAMPLE41)).unwrap();
        let p = op.eval_at(1.0, &[1.0, 2.0, 0.0]).unwrap();
        assert_eq!([p.q.get(0, 0), p.q.get(0, 1), p.q.get(0, 2)], [5.0, -2.0, 0.0]);
    }

    #[test]
    fn example41_generator_identity() {
        // A phi = 2 (Tr Q + <b, x>) for phi = 1 + |x|^2.
        let op = OperatorFamily::from_text(&with_unit_a(EXAMPLE41)).unwrap();
        let phi = parse("1+norm2(x)", 3).unwrap();
        assert!((op.apply_generator(&phi, 1.0, &[0.0; 3]).unwrap() - 6.0).abs() < 1e-12);
        for r in [0.25f64, 0.7, 1.0, 1.9] {
            let expected = 2.0 * (3.0 + r * r - 3.0 * r.powi(4));
            let got = op.apply_generator(&phi, 1.0, &[r, 0.0, 0.0]).unwrap();
            assert!((got - expected).abs() < 1e-9, "r={r}: {got} vs {expected}");
        }
    }

    #[test]
    fn asymmetric_entries_are_rejected() {
        let src = "[meta]\nd=2\nt_hi=1\n[diffusion]\nq11=1\nq22=1\nq12=x1\nq21=x2\n";
        let err = OperatorFamily::from_text(src).unwrap_err();
        assert!(matches!(err, Error::Spec(SpecError::Asymmetric(0, 1))), "{err}");
        // Same function written differently is fine.
        let src = "[meta]\nd=2\nt_hi=1\n[diffusion]\nq11=1\nq22=1\nq12=x1*x2\nq21=x2*x1\n";
        let op = OperatorFamily::from_text(src).unwrap();
        assert_eq!(op.q(1, 0).eval(0.0, &[2.0, 3.0]).unwrap(), 6.0);
    }

    #[test]
    fn parse_errors_name_the_entry() {
        let src = "[meta]\nd=2\nt_hi=1\n[diffusion]\nq11=1\nq22=1+x3\n";
        match OperatorFamily::from_text(src).unwrap_err() {
            Error::Spec(SpecError::Parse { entry, .. }) => assert_eq!(entry, "q22"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn parameters_cannot_depend_on_space() {
        let src = "[meta]\nd=1\nt_hi=1\n[params]\na=x1\n[diffusion]\nq11=a\n";
        assert!(matches!(
            OperatorFamily::from_text(src).unwrap_err(),
            Error::Spec(SpecError::SpatialParameter { .. })
        ));
    }

    #[test]
    fn time_dependent_parameters() {
        let src = "[meta]\nd=1\nt_lo=0\nt_hi=10\n[params]\na1=2+sin(t)\n[diffusion]\nq11=a1(t)\n";
        let op = OperatorFamily::from_text(src).unwrap();
        let p = op.eval_at(1.0, &[0.0]).unwrap();
        assert_eq!(p.eta, 2.0 + 1f64.sin());
        assert!(op.contains_time(10.0) && !op.contains_time(0.0));
    }
}
