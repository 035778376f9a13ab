use std::collections::BTreeMap;

use thiserror::Error;

use super::{BinOp, Expr, Func, Var};

/// Named parameters substituted at parse time.
pub type Params = BTreeMap<String, Expr>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("variable `{name}` at byte {offset} exceeds dimension {dimension}")]
    VariableOutOfRange {
        name: String,
        offset: usize,
        dimension: usize,
    },
    #[error("`{function}` at byte {offset} takes {expected} argument(s), found {found}")]
    Arity {
        function: String,
        expected: usize,
        found: usize,
        offset: usize,
    },
}

/// Parses `source` as an expression over `t, x1..x{dimension}`.
pub fn parse(source: &str, dimension: usize) -> Result<Expr, ParseError> {
    parse_with_params(source, dimension, &Params::new())
}

/// Parses with named parameters bound to sub-expressions. A parameter may be
/// written bare (`psi`) or as a function of time (`psi(t)`); both forms are
/// replaced by the bound tree.
pub fn parse_with_params(
    source: &str,
    dimension: usize,
    params: &Params,
) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: source.as_bytes(),
        pos: 0,
        dimension,
        params,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax(format!("unexpected `{}`", p.src[p.pos] as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dimension: usize,
    params: &'a Params,
}

impl Parser<'_> {
    fn syntax(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    // Unary minus binds looser than `^`: `-x1^2` is `-(x1^2)`.
    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(match self.unary()? {
                Expr::Const(c) => Expr::Const(-c),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(self.syntax(format!("unexpected `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            self.pos = start;
            return Err(self.syntax("malformed number"));
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = mark;
                return Err(self.syntax("malformed exponent"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos])
            .expect("ascii")
            .to_string();

        if name == "t" {
            return Ok(Expr::Var(Var::T));
        }
        if let Some(index) = spatial_index(&name) {
            if index == 0 || index > self.dimension {
                return Err(ParseError::VariableOutOfRange {
                    name,
                    offset: start,
                    dimension: self.dimension,
                });
            }
            return Ok(Expr::Var(Var::X(index - 1)));
        }
        if let Some(func) = Func::from_name(&name) {
            return self.call(func, name, start);
        }
        if let Some(bound) = self.params.get(&name) {
            // `psi(t)` is accepted as a spelling of `psi`.
            if self.peek() == Some(b'(') {
                self.pos += 1;
                let arg = self.expr()?;
                self.expect(b')')?;
                if arg != Expr::Var(Var::T) {
                    return Err(ParseError::Syntax {
                        offset: start,
                        message: format!("parameter `{name}` can only be applied to `t`"),
                    });
                }
            }
            return Ok(bound.clone());
        }
        Err(ParseError::UnknownIdentifier {
            name,
            offset: start,
        })
    }

    fn call(&mut self, func: Func, name: String, start: usize) -> Result<Expr, ParseError> {
        self.expect(b'(')?;
        if func == Func::Norm2 {
            let at = self.pos;
            self.skip_ws();
            let ok = self.src.get(self.pos) == Some(&b'x')
                && !self
                    .src
                    .get(self.pos + 1)
                    .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_');
            if !ok {
                self.pos = at;
                return Err(self.syntax("norm2 takes the spatial vector `x`"));
            }
            self.pos += 1;
            self.expect(b')')?;
            return Ok(Expr::Call(Func::Norm2, Vec::new()));
        }
        let mut args = vec![self.expr()?];
        while self.eat(b',') {
            args.push(self.expr()?);
        }
        self.expect(b')')?;
        if args.len() != func.arity() {
            return Err(ParseError::Arity {
                function: name,
                expected: func.arity(),
                found: args.len(),
                offset: start,
            });
        }
        Ok(Expr::Call(func, args))
    }
}

fn spatial_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_identity() {
        let e = parse("1 + x1^2", 1).unwrap();
        let expected = Expr::Binary(
            BinOp::Add,
            Box::new(Expr::Const(1.0)),
            Box::new(Expr::Binary(
                BinOp::Pow,
                Box::new(Expr::x(0)),
                Box::new(Expr::Const(2.0)),
            )),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn undeclared_parameter_is_unknown_identifier() {
        let err = parse("-gamma * x1 * norm2(x)", 2).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier {
                name: "gamma".into(),
                offset: 1
            }
        );
    }

    #[test]
    fn bound_parameter_is_substituted() {
        let mut params = Params::new();
        let psi = parse("2 + sin(t)", 3).unwrap();
        params.insert("psi".into(), psi.clone());
        let e = parse_with_params("psi(t)*x2^2", 3, &params).unwrap();
        let manual = Expr::Binary(
            BinOp::Mul,
            Box::new(psi),
            Box::new(Expr::Binary(
                BinOp::Pow,
                Box::new(Expr::x(1)),
                Box::new(Expr::Const(2.0)),
            )),
        );
        assert_eq!(e, manual);
        assert_eq!(parse_with_params("psi*x2^2", 3, &params).unwrap(), manual);
    }

    #[test]
    fn variable_beyond_dimension() {
        assert!(matches!(
            parse("x1 + x3", 2),
            Err(ParseError::VariableOutOfRange { offset: 5, .. })
        ));
        assert!(matches!(
            parse("x0", 2),
            Err(ParseError::VariableOutOfRange { .. })
        ));
    }

    #[test]
    fn arity_mismatch() {
        assert!(matches!(
            parse("pow(x1)", 1),
            Err(ParseError::Arity {
                expected: 2,
                found: 1,
                ..
            })
        ));
        assert!(matches!(
            parse("sin(x1, x1)", 1),
            Err(ParseError::Arity { .. })
        ));
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        assert_eq!(
            parse("1 + * 2", 1).unwrap_err(),
            ParseError::Syntax {
                offset: 4,
                message: "unexpected `*`".into()
            }
        );
        assert!(matches!(
            parse("(x1", 1),
            Err(ParseError::Syntax { offset: 3, .. })
        ));
        assert!(matches!(
            parse("1e+", 1),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(
            parse("norm2(x1)", 2),
            Err(ParseError::Syntax { .. })
        ));
    }

    #[test]
    fn power_is_right_associative_and_binds_tighter_than_minus() {
        let e = parse("2^3^2", 1).unwrap();
        assert_eq!(e.eval(0.0, &[0.0]).unwrap(), 512.0);
        let e = parse("-x1^2", 1).unwrap();
        assert_eq!(e.eval(0.0, &[3.0]).unwrap(), -9.0);
        let e = parse("2^-1", 1).unwrap();
        assert_eq!(e.eval(0.0, &[0.0]).unwrap(), 0.5);
        let e = parse("1.5e-1 * .5E1", 1).unwrap();
        assert!((e.eval(0.0, &[0.0]).unwrap() - 0.75).abs() < 1e-15);
    }
}
