//! Coefficient formulas: a small expression language over `t, x1..xd`.
//!
//! Expressions are parsed from text ([`parse`]), evaluated in double
//! precision ([`Expr::eval`]), and differentiated symbolically
//! ([`Expr::differentiate`]). Trees are immutable once built and every
//! operation on them is pure, so they can be shared freely across threads.

mod calculus;
mod parser;

use std::fmt;
use std::ops;

use thiserror::Error;

pub use parser::{parse, parse_with_params, ParseError, Params};

/// A free variable of a coefficient formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    /// Time.
    T,
    /// Spatial coordinate, zero-based: `X(0)` is `x1`.
    X(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => f.write_str("t"),
            Var::X(i) => write!(f, "x{}", i + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Supported function set.
///
/// `Norm2` takes the whole spatial vector (written `norm2(x)`) and evaluates
/// to `x1^2 + ... + xd^2`. `Sign` is what the derivative of `abs`, `min` and
/// `max` is expressed with; it may also be written directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
    Sign,
    Pow,
    Min,
    Max,
    Norm2,
}

impl Func {
    pub const ALL: [Func; 12] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Tanh,
        Func::Sign,
        Func::Pow,
        Func::Min,
        Func::Max,
        Func::Norm2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Tanh => "tanh",
            Func::Sign => "sign",
            Func::Pow => "pow",
            Func::Min => "min",
            Func::Max => "max",
            Func::Norm2 => "norm2",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Number of scalar arguments. `norm2` takes none: its argument is the
    /// spatial vector itself.
    pub fn arity(self) -> usize {
        match self {
            Func::Pow | Func::Min | Func::Max => 2,
            Func::Norm2 => 0,
            _ => 1,
        }
    }
}

/// Expression tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Why an evaluation failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    LogNonPositive,
    SqrtNegative,
    DivisionByZero,
    InvalidPower,
    NonFinite,
    MissingVariable,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainKind::LogNonPositive => "log of a non-positive value",
            DomainKind::SqrtNegative => "sqrt of a negative value",
            DomainKind::DivisionByZero => "division by zero",
            DomainKind::InvalidPower => "power with negative base and non-integer exponent",
            DomainKind::NonFinite => "non-finite result",
            DomainKind::MissingVariable => "variable not supplied",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("domain error ({kind}) in `{expr}`")]
pub struct EvalError {
    pub kind: DomainKind,
    /// The offending sub-expression, pretty-printed.
    pub expr: String,
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn t() -> Expr {
        Expr::Var(Var::T)
    }

    /// Spatial variable with zero-based index.
    pub fn x(i: usize) -> Expr {
        Expr::Var(Var::X(i))
    }

    pub fn norm2() -> Expr {
        Expr::Call(Func::Norm2, Vec::new())
    }

    pub fn call(func: Func, args: Vec<Expr>) -> Expr {
        debug_assert_eq!(func.arity(), args.len());
        Expr::Call(func, args)
    }

    pub fn pow(self, exponent: Expr) -> Expr {
        Expr::Binary(BinOp::Pow, Box::new(self), Box::new(exponent))
    }

    pub fn apply(self, func: Func) -> Expr {
        Expr::Call(func, vec![self])
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// True when the tree contains no variables (and no `norm2`).
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var(_) => false,
            Expr::Neg(e) => e.is_constant(),
            Expr::Binary(_, l, r) => l.is_constant() && r.is_constant(),
            Expr::Call(Func::Norm2, _) => false,
            Expr::Call(_, args) => args.iter().all(Expr::is_constant),
        }
    }

    /// Whether `var` occurs in the tree. `norm2` counts as depending on every
    /// spatial variable.
    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(e) => e.depends_on(var),
            Expr::Binary(_, l, r) => l.depends_on(var) || r.depends_on(var),
            Expr::Call(Func::Norm2, _) => matches!(var, Var::X(_)),
            Expr::Call(_, args) => args.iter().any(|a| a.depends_on(var)),
        }
    }

    /// Largest zero-based spatial index referenced explicitly, if any.
    pub fn max_spatial_index(&self) -> Option<usize> {
        match self {
            Expr::Const(_) | Expr::Var(Var::T) => None,
            Expr::Var(Var::X(i)) => Some(*i),
            Expr::Neg(e) => e.max_spatial_index(),
            Expr::Binary(_, l, r) => l.max_spatial_index().max(r.max_spatial_index()),
            Expr::Call(_, args) => args.iter().filter_map(Expr::max_spatial_index).max(),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(e) => 1 + e.size(),
            Expr::Binary(_, l, r) => 1 + l.size() + r.size(),
            Expr::Call(_, args) => 1 + args.iter().map(Expr::size).sum::<usize>(),
        }
    }

    /// Evaluates at time `t` and position `x`.
    pub fn eval(&self, t: f64, x: &[f64]) -> Result<f64, EvalError> {
        let v = self.eval_raw(t, x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.domain(DomainKind::NonFinite))
        }
    }

    fn domain(&self, kind: DomainKind) -> EvalError {
        EvalError {
            kind,
            expr: self.to_string(),
        }
    }

    fn eval_raw(&self, t: f64, x: &[f64]) -> Result<f64, EvalError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(Var::T) => Ok(t),
            Expr::Var(Var::X(i)) => x
                .get(*i)
                .copied()
                .ok_or_else(|| self.domain(DomainKind::MissingVariable)),
            Expr::Neg(e) => Ok(-e.eval_raw(t, x)?),
            Expr::Binary(op, l, r) => {
                let a = l.eval_raw(t, x)?;
                let b = r.eval_raw(t, x)?;
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div => {
                        if b == 0.0 {
                            Err(self.domain(DomainKind::DivisionByZero))
                        } else {
                            Ok(a / b)
                        }
                    }
                    BinOp::Pow => self.power(a, b),
                }
            }
            Expr::Call(func, args) => {
                let arg = |k: usize| args[k].eval_raw(t, x);
                match func {
                    Func::Sin => Ok(arg(0)?.sin()),
                    Func::Cos => Ok(arg(0)?.cos()),
                    Func::Exp => Ok(arg(0)?.exp()),
                    Func::Tanh => Ok(arg(0)?.tanh()),
                    Func::Abs => Ok(arg(0)?.abs()),
                    Func::Sign => Ok(sign(arg(0)?)),
                    Func::Log => {
                        let a = arg(0)?;
                        if a <= 0.0 {
                            Err(self.domain(DomainKind::LogNonPositive))
                        } else {
                            Ok(a.ln())
                        }
                    }
                    Func::Sqrt => {
                        let a = arg(0)?;
                        if a < 0.0 {
                            Err(self.domain(DomainKind::SqrtNegative))
                        } else {
                            Ok(a.sqrt())
                        }
                    }
                    Func::Pow => self.power(arg(0)?, arg(1)?),
                    Func::Min => Ok(arg(0)?.min(arg(1)?)),
                    Func::Max => Ok(arg(0)?.max(arg(1)?)),
                    Func::Norm2 => Ok(x.iter().map(|v| v * v).sum()),
                }
            }
        }
    }

    fn power(&self, base: f64, exponent: f64) -> Result<f64, EvalError> {
        if base < 0.0 && exponent.fract() != 0.0 {
            return Err(self.domain(DomainKind::InvalidPower));
        }
        if base == 0.0 && exponent < 0.0 {
            return Err(self.domain(DomainKind::DivisionByZero));
        }
        Ok(base.powf(exponent))
    }
}

/// `sign(0) = 0`.
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

// Fully parenthesized so that printing and re-parsing a simplified tree
// reproduces it exactly. Constants use the shortest round-tripping form.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.is_sign_negative() {
                    write!(f, "(-{:?})", -c)
                } else {
                    write!(f, "{c:?}")
                }
            }
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(Func::Norm2, _) => f.write_str("norm2(x)"),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

macro_rules! binary_impl {
    ($trait:ident, $method:ident, $op:expr) => {
        impl ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::Binary($op, Box::new(self), Box::new(rhs))
            }
        }
        impl ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::Binary($op, Box::new(self), Box::new(Expr::Const(rhs)))
            }
        }
        impl ops::$trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::Binary($op, Box::new(Expr::Const(self)), Box::new(rhs))
            }
        }
    };
}

binary_impl!(Add, add, BinOp::Add);
binary_impl!(Sub, sub, BinOp::Sub);
binary_impl!(Mul, mul, BinOp::Mul);
binary_impl!(Div, div, BinOp::Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, d: usize, t: f64, x: &[f64]) -> f64 {
        parse(src, d).unwrap().eval(t, x).unwrap()
    }

    #[test]
    fn evaluates_polynomial() {
        assert_eq!(eval("1+x1^2+x2^2+x3^2", 3, 0.0, &[1.0, 2.0, 3.0]), 15.0);
    }

    #[test]
    fn evaluates_cos_at_zero() {
        assert_eq!(eval("cos(x1)", 1, 7.0, &[0.0]), 1.0);
    }

    #[test]
    fn norm2_is_sum_of_squares() {
        assert_eq!(eval("-3*x1*norm2(x)", 3, 0.0, &[1.0, 1.0, 1.0]), -9.0);
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let e = parse("1 + sqrt(x1 - 2)", 1).unwrap();
        let err = e.eval(0.0, &[1.0]).unwrap_err();
        assert_eq!(err.kind, DomainKind::SqrtNegative);
        assert!(err.expr.starts_with("sqrt("), "{}", err.expr);

        let e = parse("log(x1)", 1).unwrap();
        assert_eq!(e.eval(0.0, &[0.0]).unwrap_err().kind, DomainKind::LogNonPositive);
        let e = parse("1/x1", 1).unwrap();
        assert_eq!(e.eval(0.0, &[0.0]).unwrap_err().kind, DomainKind::DivisionByZero);
        let e = parse("x1^0.5", 1).unwrap();
        assert_eq!(e.eval(0.0, &[-1.0]).unwrap_err().kind, DomainKind::InvalidPower);
    }

    #[test]
    fn sign_of_zero_is_zero() {
        assert_eq!(sign(0.0), 0.0);
        assert_eq!(sign(-0.0), 0.0);
        assert_eq!(sign(-3.0), -1.0);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        const D: usize = 3;

        fn leaf() -> impl Strategy<Value = Expr> {
            prop_oneof![
                (-3.0f64..3.0).prop_map(Expr::Const),
                Just(Expr::t()),
                (0..D).prop_map(Expr::x),
                Just(Expr::norm2()),
            ]
        }

        /// Trees over the smooth part of the grammar.
        fn smooth() -> impl Strategy<Value = Expr> {
            leaf().prop_recursive(3, 24, 2, |inner| {
                prop_oneof![
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| a / (1.0 + b.clone() * b)),
                    (inner.clone(), 2..=3i32).prop_map(|(a, k)| a.pow(Expr::Const(k as f64))),
                    inner.clone().prop_map(|a| a.apply(Func::Sin)),
                    inner.clone().prop_map(|a| a.apply(Func::Cos)),
                    inner.clone().prop_map(|a| a.apply(Func::Tanh).apply(Func::Exp)),
                    inner.clone().prop_map(|a| (1.0 + a.clone() * a).apply(Func::Sqrt)),
                    inner.clone().prop_map(|a| (2.0 + a.apply(Func::Sin)).apply(Func::Log)),
                    inner.prop_map(|a| -a),
                ]
            })
        }

        /// Smooth trees plus the kinked functions.
        fn any_expr() -> impl Strategy<Value = Expr> {
            smooth().prop_recursive(2, 32, 2, |inner| {
                prop_oneof![
                    inner.clone().prop_map(|a| a.apply(Func::Abs)),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::call(Func::Min, vec![a, b])),
                    (inner.clone(), inner).prop_map(|(a, b)| Expr::call(Func::Max, vec![a, b])),
                ]
            })
        }

        fn var() -> impl Strategy<Value = Var> {
            prop_oneof![Just(Var::T), (0..D).prop_map(Var::X)]
        }

        fn point() -> impl Strategy<Value = (f64, Vec<f64>)> {
            (-1.0f64..1.0, proptest::collection::vec(-1.0f64..1.0, D))
        }

        fn shifted(e: &Expr, v: Var, t: f64, x: &[f64], s: f64) -> f64 {
            let mut x = x.to_vec();
            let mut t = t;
            match v {
                Var::T => t += s,
                Var::X(i) => x[i] += s,
            }
            e.eval(t, &x).unwrap()
        }

        proptest! {
            #[test]
            fn derivative_matches_central_difference(e in smooth(), v in var(), (t, x) in point()) {
                let h = 1e-5;
                let sym = e.differentiate(v).eval(t, &x).unwrap();
                let fd = (shifted(&e, v, t, &x, h) - shifted(&e, v, t, &x, -h)) / (2.0 * h);
                prop_assert!((sym - fd).abs() <= 1e-6 * (1.0 + sym.abs()), "{e}: {sym} vs {fd}");
            }

            #[test]
            fn differentiation_is_linear(e1 in any_expr(), e2 in any_expr(), a in -3.0f64..3.0, v in var(), (t, x) in point()) {
                let lhs = (a * e1.clone() + e2.clone()).differentiate(v).eval(t, &x).unwrap();
                let rhs = a * e1.differentiate(v).eval(t, &x).unwrap() + e2.differentiate(v).eval(t, &x).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())), "{lhs} vs {rhs}");
            }

            #[test]
            fn printing_round_trips(e in any_expr()) {
                let simple = e.simplify();
                let again = parse(&simple.to_string(), D).unwrap();
                prop_assert_eq!(again, simple);
            }
        }
    }

    #[test]
    fn display_round_trips_simplified_trees() {
        let e = parse("-2*x1^3 + exp(-x2^2/2) - min(t, 0.25)*norm2(x)", 2)
            .unwrap()
            .simplify();
        let again = parse(&e.to_string(), 2).unwrap();
        assert_eq!(again, e);
    }
}
