//! A small arithmetic expression language for coefficient functions and
//! kernels.
//!
//! Expressions are built from decimal literals, the variables `t` and `s`,
//! the binary operators `+ - * / ^`, unary minus, parentheses and a fixed
//! set of builtins:
//!
//! | function | arity | meaning |
//! |----------|-------|---------|
//! | `exp`, `log`, `sqrt`, `sin`, `cos`, `abs` | 1 | as usual (`log` is natural) |
//! | `loglog` | 1 | `log(log(x))` |
//! | `pow`, `min`, `max` | 2 | as usual |
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)` and `2^-x` is `2^(-x)`.
//!
//! Evaluation never produces NaN or an infinity: out-of-domain arguments
//! and overflowing results surface as [`EvalError::Domain`].
//!
//! ```
//! use itovolterra::exprlang::{parse, EvalContext};
//!
//! let e = parse("exp(-(t-s))").unwrap();
//! let v = e.eval(&EvalContext::pair(1.0, 0.0)).unwrap();
//! assert_eq!(v, (-1.0f64).exp());
//! ```

mod parser;
mod print;

pub use parser::parse;

use serde::{Deserialize, Serialize};
use std::fmt;

/// A free variable of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Var {
    T,
    S,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::S => "s",
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
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Builtin functions with fixed arity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    LogLog,
    Sqrt,
    Sin,
    Cos,
    Abs,
    Pow,
    Min,
    Max,
}

impl Func {
    pub const ALL: [Func; 10] = [
        Func::Exp,
        Func::Log,
        Func::LogLog,
        Func::Sqrt,
        Func::Sin,
        Func::Cos,
        Func::Abs,
        Func::Pow,
        Func::Min,
        Func::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::LogLog => "loglog",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
            Func::Pow => "pow",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow | Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Abstract syntax tree of a parsed expression.
///
/// Literals produced by the parser are always non-negative; a leading minus
/// is represented by [`Expr::Neg`].
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Variable bindings for [`Expr::eval`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalContext {
    pub t: f64,
    pub s: Option<f64>,
}

impl EvalContext {
    /// Binds only `t`.
    pub fn at(t: f64) -> Self {
        EvalContext { t, s: None }
    }

    pub fn pair(t: f64, s: f64) -> Self {
        EvalContext { t, s: Some(s) }
    }

    /// Binds both variables to the same value, used for univariate
    /// coefficient functions that may be written in either `t` or `s`.
    pub fn univariate(u: f64) -> Self {
        EvalContext { t: u, s: Some(u) }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unknown variable `{name}` at byte {offset}; only `t` and `s` are allowed")]
    UnknownVariable { name: String, offset: usize },
    #[error("`{function}` takes {expected} argument(s) but {found} were given (byte {offset})")]
    Arity {
        function: &'static str,
        expected: usize,
        found: usize,
        offset: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownFunction { offset, .. }
            | ParseError::UnknownVariable { offset, .. }
            | ParseError::Arity { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("variable `{}` is not bound", .0.name())]
    UnboundVariable(Var),
    #[error("`{function}` is undefined at argument {argument}")]
    Domain {
        function: &'static str,
        argument: f64,
    },
}

fn domain(function: &'static str, argument: f64) -> EvalError {
    EvalError::Domain { function, argument }
}

fn finite(function: &'static str, argument: f64, value: f64) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(domain(function, argument))
    }
}

fn ln(x: f64) -> Result<f64, EvalError> {
    if x > 0.0 && x.is_finite() {
        Ok(x.ln())
    } else {
        Err(domain("log", x))
    }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn neg(e: Expr) -> Expr {
        Expr::Neg(Box::new(e))
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn call(f: Func, args: Vec<Expr>) -> Expr {
        Expr::Call(f, args)
    }

    pub fn eval(&self, ctx: &EvalContext) -> Result<f64, EvalError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(Var::T) => Ok(ctx.t),
            Expr::Var(Var::S) => ctx.s.ok_or(EvalError::UnboundVariable(Var::S)),
            Expr::Neg(e) => Ok(-e.eval(ctx)?),
            Expr::Binary(op, l, r) => {
                let a = l.eval(ctx)?;
                let b = r.eval(ctx)?;
                match op {
                    BinOp::Add => finite("+", a, a + b),
                    BinOp::Sub => finite("-", a, a - b),
                    BinOp::Mul => finite("*", a, a * b),
                    BinOp::Div => {
                        if b == 0.0 {
                            Err(domain("/", b))
                        } else {
                            finite("/", b, a / b)
                        }
                    }
                    BinOp::Pow => finite("pow", a, a.powf(b)),
                }
            }
            Expr::Call(f, args) => {
                let x = args[0].eval(ctx)?;
                match f {
                    Func::Exp => finite("exp", x, x.exp()),
                    Func::Log => ln(x),
                    Func::LogLog => ln(ln(x)?),
                    Func::Sqrt => {
                        if x < 0.0 {
                            Err(domain("sqrt", x))
                        } else {
                            Ok(x.sqrt())
                        }
                    }
                    Func::Sin => Ok(x.sin()),
                    Func::Cos => Ok(x.cos()),
                    Func::Abs => Ok(x.abs()),
                    Func::Pow => {
                        let y = args[1].eval(ctx)?;
                        finite("pow", x, x.powf(y))
                    }
                    Func::Min => Ok(x.min(args[1].eval(ctx)?)),
                    Func::Max => Ok(x.max(args[1].eval(ctx)?)),
                }
            }
        }
    }

    /// Whether the variable occurs anywhere in the tree.
    pub fn references(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(e) => e.references(var),
            Expr::Binary(_, l, r) => l.references(var) || r.references(var),
            Expr::Call(_, args) => args.iter().any(|a| a.references(var)),
        }
    }

    pub fn is_constant(&self) -> bool {
        !self.references(Var::T) && !self.references(Var::S)
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Neg(e) => 1 + e.depth(),
            Expr::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
            Expr::Call(_, args) => 1 + args.iter().map(Expr::depth).max().unwrap_or(0),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_expr(f, self)
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, t: f64, s: Option<f64>) -> Result<f64, EvalError> {
        parse(src).unwrap().eval(&EvalContext { t, s })
    }

    #[test]
    fn arithmetic() {
        assert_eq!(ev("t+s", 2.0, Some(1.0)).unwrap(), 3.0);
        assert_eq!(ev("2^3^2", 0.0, None).unwrap(), 512.0);
        assert_eq!(ev("-2^2", 0.0, None).unwrap(), -4.0);
        assert_eq!(ev("2^-1", 0.0, None).unwrap(), 0.5);
        assert_eq!(ev("10-4-3", 0.0, None).unwrap(), 3.0);
        assert_eq!(ev("12/3/2", 0.0, None).unwrap(), 2.0);
        assert_eq!(ev("min(t, s) + max(t, s)", 2.0, Some(5.0)).unwrap(), 7.0);
        assert_eq!(ev("pow(2, 10)", 0.0, None).unwrap(), 1024.0);
        assert_eq!(ev("abs(-3.5e0)", 0.0, None).unwrap(), 3.5);
    }

    #[test]
    fn exponential_kernel_value() {
        // host libm e^{-1}
        let v = ev("exp(-(t-s))", 1.0, Some(0.0)).unwrap();
        assert_eq!(v, 0.36787944117144233);
        assert_eq!(v, (-1.0f64).exp());
    }

    #[test]
    fn loglog_domain() {
        assert!(ev("loglog(t)", 2.0, None).unwrap() < 0.0);
        assert!(ev("loglog(t)", 0.5, None).is_err());
        assert!(ev("loglog(t)", 3.0, None).unwrap() > 0.0);
        assert_eq!(
            ev("loglog(t)", 1.0, None),
            Err(EvalError::Domain {
                function: "log",
                argument: 0.0
            })
        );
    }

    #[test]
    fn domain_errors_instead_of_nan() {
        assert!(matches!(
            ev("log(t)", 0.0, None),
            Err(EvalError::Domain { function: "log", .. })
        ));
        assert!(matches!(
            ev("sqrt(t)", -1.0, None),
            Err(EvalError::Domain { function: "sqrt", .. })
        ));
        assert!(matches!(
            ev("1/t", 0.0, None),
            Err(EvalError::Domain { function: "/", .. })
        ));
        assert!(matches!(
            ev("(-8)^0.5", 0.0, None),
            Err(EvalError::Domain { function: "pow", .. })
        ));
        assert!(matches!(
            ev("exp(t)", 1000.0, None),
            Err(EvalError::Domain { function: "exp", .. })
        ));
    }

    #[test]
    fn unbound_s() {
        assert_eq!(
            ev("t*s", 1.0, None),
            Err(EvalError::UnboundVariable(Var::S))
        );
        assert_eq!(ev("t*2", 1.0, None).unwrap(), 2.0);
    }

    #[test]
    fn references() {
        let e = parse("exp(-t) * 3").unwrap();
        assert!(e.references(Var::T));
        assert!(!e.references(Var::S));
        assert!(parse("2*exp(1)").unwrap().is_constant());
    }
}
