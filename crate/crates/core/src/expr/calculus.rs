use super::{BinOp, Expr, Func, Var};

impl Expr {
    /// Symbolic partial derivative with respect to `var`, constant-folded.
    ///
    /// `abs(u)` differentiates to `sign(u) * u'` with `sign(0) = 0`;
    /// `min`/`max` are rewritten through `abs` before differentiating.
    pub fn differentiate(&self, var: Var) -> Expr {
        self.derive(var).simplify()
    }

    /// Gradient with respect to `x1..x{dimension}`.
    pub fn gradient(&self, dimension: usize) -> Vec<Expr> {
        (0..dimension)
            .map(|i| self.differentiate(Var::X(i)))
            .collect()
    }

    fn derive(&self, var: Var) -> Expr {
        if !self.depends_on(var) {
            return Expr::Const(0.0);
        }
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(v) => Expr::Const(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(e) => -e.derive(var),
            Expr::Binary(op, l, r) => {
                let (u, v) = (l.as_ref(), r.as_ref());
                match op {
                    BinOp::Add => u.derive(var) + v.derive(var),
                    BinOp::Sub => u.derive(var) - v.derive(var),
                    BinOp::Mul => u.derive(var) * v.clone() + u.clone() * v.derive(var),
                    BinOp::Div => {
                        (u.derive(var) * v.clone() - u.clone() * v.derive(var))
                            / v.clone().pow(Expr::Const(2.0))
                    }
                    BinOp::Pow => power_rule(u, v, var),
                }
            }
            Expr::Call(func, args) => {
                let a = || args[0].clone();
                let da = || args[0].derive(var);
                match func {
                    Func::Sin => a().apply(Func::Cos) * da(),
                    Func::Cos => -(a().apply(Func::Sin) * da()),
                    Func::Exp => a().apply(Func::Exp) * da(),
                    Func::Log => da() / a(),
                    Func::Sqrt => da() / (2.0 * a().apply(Func::Sqrt)),
                    Func::Abs => a().apply(Func::Sign) * da(),
                    Func::Tanh => (1.0 - a().apply(Func::Tanh).pow(Expr::Const(2.0))) * da(),
                    Func::Sign => Expr::Const(0.0),
                    Func::Pow => power_rule(&args[0], &args[1], var),
                    Func::Min | Func::Max => {
                        // min/max(u, v) = (u + v)/2 -/+ |u - v|/2
                        let (u, v) = (&args[0], &args[1]);
                        let mean = (u.derive(var) + v.derive(var)) / 2.0;
                        let half_gap = (u.clone() - v.clone()).apply(Func::Sign)
                            * (u.derive(var) - v.derive(var))
                            / 2.0;
                        if *func == Func::Min {
                            mean - half_gap
                        } else {
                            mean + half_gap
                        }
                    }
                    Func::Norm2 => match var {
                        Var::X(i) => 2.0 * Expr::x(i),
                        Var::T => Expr::Const(0.0),
                    },
                }
            }
        }
    }

    /// Constant folding plus the identities `0*e = 0`, `1*e = e`, `e+0 = e`,
    /// `e-0 = e`, `e/1 = e`, `e^1 = e`, `e^0 = 1` and `--e = e`.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(e) => match e.simplify() {
                Expr::Const(c) => Expr::Const(-c),
                Expr::Neg(inner) => *inner,
                s => Expr::Neg(Box::new(s)),
            },
            Expr::Binary(op, l, r) => simplify_binary(*op, l.simplify(), r.simplify()),
            Expr::Call(func, args) => {
                let args: Vec<Expr> = args.iter().map(Expr::simplify).collect();
                let node = Expr::Call(*func, args);
                if *func != Func::Norm2 {
                    if let Some(c) = fold(&node) {
                        return Expr::Const(c);
                    }
                }
                node
            }
        }
    }
}

fn power_rule(base: &Expr, exponent: &Expr, var: Var) -> Expr {
    if !exponent.depends_on(var) {
        // d(u^c) = c * u^(c-1) * u'
        let reduced = exponent.clone() - 1.0;
        exponent.clone() * base.clone().pow(reduced) * base.derive(var)
    } else {
        // d(u^v) = u^v * (v' ln u + v u'/u)
        base.clone().pow(exponent.clone())
            * (exponent.derive(var) * base.clone().apply(Func::Log)
                + exponent.clone() * base.derive(var) / base.clone())
    }
}

fn fold(node: &Expr) -> Option<f64> {
    if !node.is_constant() {
        return None;
    }
    node.eval(0.0, &[]).ok()
}

fn is(e: &Expr, v: f64) -> bool {
    e.as_const() == Some(v)
}

fn simplify_binary(op: BinOp, l: Expr, r: Expr) -> Expr {
    if let (Expr::Const(_), Expr::Const(_)) = (&l, &r) {
        let node = Expr::Binary(op, Box::new(l.clone()), Box::new(r.clone()));
        if let Some(c) = fold(&node) {
            return Expr::Const(c);
        }
        return node;
    }
    match op {
        BinOp::Add if is(&l, 0.0) => r,
        BinOp::Add | BinOp::Sub if is(&r, 0.0) => l,
        BinOp::Sub if is(&l, 0.0) => match r {
            Expr::Neg(inner) => *inner,
            r => Expr::Neg(Box::new(r)),
        },
        BinOp::Mul if is(&l, 0.0) || is(&r, 0.0) => Expr::Const(0.0),
        BinOp::Mul if is(&l, 1.0) => r,
        BinOp::Mul if is(&r, 1.0) => l,
        BinOp::Div if is(&l, 0.0) => Expr::Const(0.0),
        BinOp::Div if is(&r, 1.0) => l,
        BinOp::Pow if is(&r, 1.0) => l,
        BinOp::Pow if is(&r, 0.0) => Expr::Const(1.0),
        _ => Expr::Binary(op, Box::new(l), Box::new(r)),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    fn d(src: &str, dim: usize, var: Var) -> Expr {
        parse(src, dim).unwrap().differentiate(var)
    }

    #[test]
    fn power_rule_on_parameterized_quadratic() {
        // a + psi*x2^2 with a = 1.5, psi = 0.75
        let e = d("1.5 + 0.75*x2^2", 2, Var::X(1));
        for x2 in [-2.0, 0.0, 0.3, 4.0] {
            assert_eq!(e.eval(0.0, &[9.0, x2]).unwrap(), 2.0 * 0.75 * x2);
        }
    }

    #[test]
    fn cross_entry_derivative() {
        // -psi*x1*x2 with psi = 1
        let e = d("-1*x1*x2", 3, Var::X(0));
        let expected = parse("-x2", 3).unwrap().simplify();
        for p in [[1.0, 2.0, 3.0], [-0.5, 0.25, 7.0]] {
            assert_eq!(e.eval(0.0, &p).unwrap(), expected.eval(0.0, &p).unwrap());
        }
    }

    #[test]
    fn gaussian_derivative_matches_central_difference() {
        let f = parse("exp(-x1^2/2)", 1).unwrap();
        let df = f.differentiate(Var::X(0));
        let h = 1e-5;
        let fd = (f.eval(0.0, &[1.0 + h]).unwrap() - f.eval(0.0, &[1.0 - h]).unwrap()) / (2.0 * h);
        assert!((df.eval(0.0, &[1.0]).unwrap() - fd).abs() < 1e-8);
    }

    #[test]
    fn simplify_identities() {
        assert_eq!(parse("0*x1 + 1*t", 1).unwrap().simplify(), Expr::t());
        assert_eq!(parse("2*3", 1).unwrap().simplify(), Expr::Const(6.0));
        assert_eq!(d("x1*x2", 3, Var::X(2)), Expr::Const(0.0));
        assert_eq!(parse("x1^1 - 0", 1).unwrap().simplify(), Expr::x(0));
        assert_eq!(parse("0 - (0 - x1)", 1).unwrap().simplify(), Expr::x(0));
        assert_eq!(parse("sqrt(4) + cos(0)", 1).unwrap().simplify(), Expr::Const(3.0));
    }

    #[test]
    fn simplify_does_not_fold_domain_errors() {
        let e = parse("1/0 + log(0-1)", 1).unwrap().simplify();
        assert!(e.eval(0.0, &[0.0]).is_err());
    }

    #[test]
    fn abs_uses_sign_with_zero_at_the_kink() {
        let e = d("abs(x1)", 1, Var::X(0));
        assert_eq!(e.eval(0.0, &[0.0]).unwrap(), 0.0);
        assert_eq!(e.eval(0.0, &[-2.0]).unwrap(), -1.0);
    }

    #[test]
    fn min_max_derivatives_pick_the_active_branch() {
        let dmin = d("min(x1^2, x2)", 2, Var::X(0));
        assert_eq!(dmin.eval(0.0, &[1.0, 5.0]).unwrap(), 2.0);
        assert_eq!(dmin.eval(0.0, &[3.0, 5.0]).unwrap(), 0.0);
        let dmax = d("max(x1^2, x2)", 2, Var::X(1));
        assert_eq!(dmax.eval(0.0, &[1.0, 5.0]).unwrap(), 1.0);
        assert_eq!(dmax.eval(0.0, &[3.0, 5.0]).unwrap(), 0.0);
    }

    #[test]
    fn variable_exponent() {
        let e = d("x1^x1", 1, Var::X(0));
        let x: f64 = 1.7;
        let exact = x.powf(x) * (x.ln() + 1.0);
        assert!((e.eval(0.0, &[x]).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn norm2_derivatives() {
        let e = d("norm2(x)", 3, Var::X(2));
        assert_eq!(e.eval(0.0, &[1.0, 2.0, 3.0]).unwrap(), 6.0);
        assert_eq!(d("norm2(x)", 3, Var::T), Expr::Const(0.0));
    }
}
