use super::{BinOp, Expr};
use std::fmt;

// Precedence levels mirror the parser's binding powers.
const ADD: u8 = 1;
const MUL: u8 = 3;
const NEG: u8 = 5;
const POW: u8 = 7;
const ATOM: u8 = 9;

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => ATOM,
        Expr::Neg(_) => NEG,
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => ADD,
        Expr::Binary(BinOp::Mul | BinOp::Div, ..) => MUL,
        Expr::Binary(BinOp::Pow, ..) => POW,
    }
}

fn child(f: &mut fmt::Formatter<'_>, e: &Expr, min_level: u8) -> fmt::Result {
    if level(e) < min_level {
        f.write_str("(")?;
        write_expr(f, e)?;
        f.write_str(")")
    } else {
        write_expr(f, e)
    }
}

/// Writes `e` with the minimal parentheses needed to re-parse it to the
/// same tree.
pub(super) fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Num(v) => write!(f, "{v:?}"),
        Expr::Var(v) => f.write_str(v.name()),
        Expr::Neg(inner) => {
            f.write_str("-")?;
            child(f, inner, NEG)
        }
        Expr::Binary(op, l, r) => {
            let (left_min, right_min) = match op {
                BinOp::Pow => (ATOM, POW),
                _ => {
                    let p = level(e);
                    (p, p + 1)
                }
            };
            child(f, l, left_min)?;
            write!(f, " {} ", op.symbol())?;
            child(f, r, right_min)
        }
        Expr::Call(func, args) => {
            write!(f, "{}(", func.name())?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_expr(f, a)?;
            }
            f.write_str(")")
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::exprlang::parse;

    #[test]
    fn minimal_parentheses() {
        for (src, printed) in [
            ("exp(-(t-s))", "exp(-(t - s))"),
            ("-t^2", "-t ^ 2.0"),
            ("(-t)^2", "(-t) ^ 2.0"),
        ] {
            let e = parse(src).unwrap();
            assert_eq!(e.to_string(), printed);
            assert_eq!(parse(&e.to_string()).unwrap(), e);
        }
    }

    #[test]
    fn associativity_survives_printing() {
        for src in ["t-(s-1)", "(t-s)-1", "t/(s/2)", "(t^s)^2", "t^s^2", "2^-t"] {
            let e = parse(src).unwrap();
            assert_eq!(parse(&e.to_string()).unwrap(), e, "{src} -> {e}");
        }
    }
}
