//! Expression language for nonlinearities, coefficients and functionals.
//!
//! One tree type covers every context; the [`ParseContext`] used at parse time
//! decides which identifiers are legal (`x1`, `x2`, `u1..un`, `w`) and whether
//! the functional atoms `INT(...)` and `EVAL(k, [p1, p2])` may appear.

mod parse;

use std::fmt;

use thiserror::Error;

pub use parse::{parse_expression, parse_with, ParseContext, ParseError, ParseErrorKind};

/// Negative arguments of fractional powers and `sqrt` down to this value are
/// treated as round-off and clamped to zero.
pub const NEGATIVE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X1,
    X2,
    /// Zero-based component index.
    U(usize),
    W,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X1 => f.write_str("x1"),
            Var::X2 => f.write_str("x2"),
            Var::U(k) => write!(f, "u{}", k + 1),
            Var::W => f.write_str("w"),
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

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Sqrt,
    Abs,
    Min,
    Max,
    Inv,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            "inv" => Func::Inv,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Inv => "inv",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    /// Integral over the domain of a pointwise integrand in `x` and `u`.
    Integral(Box<Expr>),
    /// Point value `u_k(p)`; `component` is zero-based.
    PointEval { component: usize, point: [f64; 2] },
}

const PREC_NEG: u8 = 3;
const PREC_ATOM: u8 = 5;

impl Expr {
    pub fn num(v: f64) -> Self {
        Expr::Num(v)
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Self {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Neg(_) => PREC_NEG,
            _ => PREC_ATOM,
        }
    }

    /// Visits every node, outermost first.
    pub fn walk(&self, visit: &mut dyn FnMut(&Expr)) {
        visit(self);
        match self {
            Expr::Neg(e) | Expr::Integral(e) => e.walk(visit),
            Expr::Binary(_, l, r) => {
                l.walk(visit);
                r.walk(visit);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.walk(visit)),
            Expr::Num(_) | Expr::Var(_) | Expr::PointEval { .. } => {}
        }
    }

    /// True if any node satisfies `pred`.
    pub fn any(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= pred(e));
        found
    }

    pub fn depends_on_x(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Var(Var::X1 | Var::X2)))
    }

    pub fn depends_on_w(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Var(Var::W)))
    }

    /// Splits top-level sums and differences into signed terms, e.g.
    /// `a + b - c` into `[(+1, a), (+1, b), (-1, c)]`.
    pub fn additive_terms(&self) -> Vec<(f64, &Expr)> {
        fn go<'a>(e: &'a Expr, sign: f64, out: &mut Vec<(f64, &'a Expr)>) {
            match e {
                Expr::Binary(BinOp::Add, l, r) => {
                    go(l, sign, out);
                    go(r, sign, out);
                }
                Expr::Binary(BinOp::Sub, l, r) => {
                    go(l, sign, out);
                    go(r, -sign, out);
                }
                Expr::Neg(inner) => go(inner, -sign, out),
                _ => out.push((sign, e)),
            }
        }
        let mut out = Vec::new();
        go(self, 1.0, &mut out);
        out
    }

    pub fn eval(&self, env: &dyn Env) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(var) => env.var(*var).ok_or_else(|| EvalError::Unbound(var.to_string()))?,
            Expr::Neg(e) => -e.eval(env)?,
            Expr::Binary(op, l, r) => {
                let a = l.eval(env)?;
                let b = r.eval(env)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(self.domain("division by zero"));
                        }
                        a / b
                    }
                    BinOp::Pow => self.power(a, b)?,
                }
            }
            Expr::Call(func, args) => {
                let a = args[0].eval(env)?;
                match func {
                    Func::Exp => a.exp(),
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Abs => a.abs(),
                    Func::Sqrt => {
                        if a < -NEGATIVE_CLAMP {
                            return Err(self.domain("square root of a negative number"));
                        }
                        a.max(0.0).sqrt()
                    }
                    Func::Inv => {
                        if a == 0.0 {
                            return Err(self.domain("inverse of zero"));
                        }
                        1.0 / a
                    }
                    Func::Min => a.min(args[1].eval(env)?),
                    Func::Max => a.max(args[1].eval(env)?),
                }
            }
            Expr::Integral(integrand) => env.integral(integrand)?,
            Expr::PointEval { component, point } => env.point_eval(*component, *point)?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.domain("non-finite result"))
        }
    }

    fn power(&self, base: f64, exponent: f64) -> Result<f64, EvalError> {
        let integral_exponent = exponent.fract() == 0.0;
        let base = if base < 0.0 && !integral_exponent {
            if base < -NEGATIVE_CLAMP {
                return Err(self.domain("fractional power of a negative number"));
            }
            0.0
        } else {
            base
        };
        if base == 0.0 && exponent < 0.0 {
            return Err(self.domain("zero raised to a negative power"));
        }
        if exponent == 0.5 {
            Ok(base.sqrt())
        } else if integral_exponent && exponent.abs() <= i32::MAX as f64 {
            Ok(base.powi(exponent as i32))
        } else {
            Ok(base.powf(exponent))
        }
    }

    fn domain(&self, reason: &str) -> EvalError {
        EvalError::Domain {
            expr: self.to_string(),
            reason: reason.to_string(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let child = |f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool| {
            if parens {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Expr::Num(v) => {
                if *v < 0.0 {
                    write!(f, "({v:?})")
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => {
                f.write_str("-")?;
                child(f, e, e.precedence() < PREC_NEG)
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                let (lp, rp) = (l.precedence(), r.precedence());
                let left_parens = if *op == BinOp::Pow { lp <= p } else { lp < p };
                let right_parens = match op {
                    BinOp::Pow => rp < PREC_NEG,
                    BinOp::Add | BinOp::Mul => rp <= p,
                    BinOp::Sub | BinOp::Div => rp <= p,
                };
                child(f, l, left_parens)?;
                f.write_str(op.symbol())?;
                child(f, r, right_parens)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Expr::Integral(e) => write!(f, "INT({e})"),
            Expr::PointEval { component, point } => {
                write!(f, "EVAL({},[{:?},{:?}])", component + 1, point[0], point[1])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain violation in `{expr}`: {reason}")]
    Domain { expr: String, reason: String },
    #[error("`{0}` cannot be evaluated pointwise")]
    Unsupported(String),
    #[error("point evaluation failed: {0}")]
    Point(String),
}

/// Variable bindings plus the nonlocal atoms available during evaluation.
pub trait Env {
    fn var(&self, v: Var) -> Option<f64>;

    fn integral(&self, integrand: &Expr) -> Result<f64, EvalError> {
        Err(EvalError::Unsupported(format!("INT({integrand})")))
    }

    fn point_eval(&self, component: usize, point: [f64; 2]) -> Result<f64, EvalError> {
        Err(EvalError::Unsupported(format!(
            "EVAL({},[{:?},{:?}])",
            component + 1,
            point[0],
            point[1]
        )))
    }
}

/// Pointwise bindings: position, state values and the scalar `w`.
#[derive(Debug, Clone, Copy)]
pub struct PointEnv<'a> {
    pub x: [f64; 2],
    pub u: &'a [f64],
    pub w: Option<f64>,
}

impl Env for PointEnv<'_> {
    fn var(&self, v: Var) -> Option<f64> {
        match v {
            Var::X1 => Some(self.x[0]),
            Var::X2 => Some(self.x[1]),
            Var::U(k) => self.u.get(k).copied(),
            Var::W => self.w,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_at(src: &str, x: [f64; 2], u: &[f64], w: Option<f64>) -> Result<f64, EvalError> {
        parse_expression(src).unwrap().eval(&PointEnv { x, u, w })
    }

    #[test]
    fn precedence() {
        assert_eq!(eval_at("1+2*x1", [3.0, 0.0], &[], None).unwrap(), 7.0);
        assert_eq!(eval_at("-2^2", [0.0; 2], &[], None).unwrap(), -4.0);
        assert_eq!(eval_at("2^3^2", [0.0; 2], &[], None).unwrap(), 512.0);
        assert_eq!(eval_at("8/2/2", [0.0; 2], &[], None).unwrap(), 2.0);
        assert_eq!(eval_at("2^-1", [0.0; 2], &[], None).unwrap(), 0.5);
    }

    #[test]
    fn example_nonlinearities() {
        let e = std::f64::consts::E;
        let v = eval_at("exp(max(u1,u2))", [0.0; 2], &[1.0, 1.0], None).unwrap();
        assert!((v - e).abs() < 1e-15);
        let pi = std::f64::consts::PI;
        let v = eval_at("w*exp(max(u1,u2))", [0.0; 2], &[0.0, 0.0], Some(1.0 / pi)).unwrap();
        assert!((v - 1.0 / pi).abs() < 1e-15);
    }

    #[test]
    fn domain_violations() {
        assert!(matches!(
            eval_at("sqrt(-1)", [0.0; 2], &[], None),
            Err(EvalError::Domain { .. })
        ));
        assert!(matches!(eval_at("1/(x1-x1)", [0.5, 0.0], &[], None), Err(EvalError::Domain { .. })));
        assert!(matches!(eval_at("(-2)^0.5", [0.0; 2], &[], None), Err(EvalError::Domain { .. })));
        assert!(matches!(eval_at("0^(-1)", [0.0; 2], &[], None), Err(EvalError::Domain { .. })));
        assert!(matches!(eval_at("exp(1000)", [0.0; 2], &[], None), Err(EvalError::Domain { .. })));
        // round-off below zero is absorbed
        assert_eq!(eval_at("u1^(1/2)", [0.0; 2], &[-1e-14], None).unwrap(), 0.0);
        assert_eq!(eval_at("sqrt(u1)", [0.0; 2], &[-1e-13], None).unwrap(), 0.0);
        assert!(eval_at("u1^(1/2)", [0.0; 2], &[-1e-6], None).is_err());
        // integer powers of negatives are fine
        assert_eq!(eval_at("(-2)^3", [0.0; 2], &[], None).unwrap(), -8.0);
    }

    #[test]
    fn unbound_variable() {
        assert_eq!(
            eval_at("w+1", [0.0; 2], &[], None),
            Err(EvalError::Unbound("w".into()))
        );
        assert!(matches!(eval_at("u3", [0.0; 2], &[1.0], None), Err(EvalError::Unbound(_))));
    }

    #[test]
    fn additive_terms_split() {
        let e = parse_expression("u1 + u2^2 - 3*u1").unwrap();
        let terms = e.additive_terms();
        assert_eq!(terms.len(), 3);
        assert_eq!(terms[2].0, -1.0);
        assert_eq!(terms[1].1.to_string(), "u2^2.0");
    }

    #[test]
    fn display_is_minimal_and_reparses() {
        for src in ["u1^2*sin(u2)", "-(a)", "(1+2)*3", "2^-3", "(2^3)^2", "1-(2-3)", "-x1^2"] {
            let src = src.replace("(a)", "(x1+1)");
            let e = parse_expression(&src).unwrap();
            let again = parse_expression(&e.to_string()).unwrap();
            assert_eq!(e, again, "{src} -> {e}");
        }
    }
}
