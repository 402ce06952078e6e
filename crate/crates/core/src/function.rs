//! Coefficient functions `u -> R^{rows x cols}` on the half-line.

use crate::error::{Error, Result};
use crate::exprlang::{parse, BinOp, EvalContext, Expr, Func, Var};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};

/// Closed form of `u -> ∫_u^∞ ‖f(s)‖² ds`, registered for functions whose
/// square-integral tail is known analytically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SquareTail {
    Zero,
    /// `f(s) = amplitude * exp(-rate * s)`.
    ExpDecay { amplitude: f64, rate: f64 },
}

impl SquareTail {
    pub fn from(&self, u: f64) -> f64 {
        match *self {
            SquareTail::Zero => 0.0,
            SquareTail::ExpDecay { amplitude, rate } => {
                amplitude * amplitude * (-2.0 * rate * u).exp() / (2.0 * rate)
            }
        }
    }
}

/// A bounded continuous function on `[0, ∞)` with matrix values, given
/// entrywise by expressions in one variable (written as `t` or `s`).
#[derive(Debug, Clone)]
pub struct BoundedFunction {
    rows: usize,
    cols: usize,
    entries: Vec<Expr>,
    sup_bound: Option<f64>,
    square_tail: Option<SquareTail>,
    derivative: Option<Box<BoundedFunction>>,
    label: String,
}

impl BoundedFunction {
    /// Scalar function from an expression.
    pub fn parse(source: &str) -> Result<BoundedFunction> {
        let e = parse(source)?;
        Ok(BoundedFunction::from_expr(e).with_label(source))
    }

    pub fn from_expr(e: Expr) -> BoundedFunction {
        let label = e.to_string();
        BoundedFunction {
            rows: 1,
            cols: 1,
            entries: vec![e],
            sup_bound: None,
            square_tail: None,
            derivative: None,
            label,
        }
    }

    /// Matrix-valued function from row-major entry expressions.
    pub fn from_exprs(rows: usize, cols: usize, sources: &[&str]) -> Result<BoundedFunction> {
        if rows == 0 || cols == 0 || sources.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} function needs {} entries, got {}",
                rows * cols,
                sources.len()
            )));
        }
        let entries = sources
            .iter()
            .map(|s| parse(s))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(BoundedFunction {
            rows,
            cols,
            entries,
            sup_bound: None,
            square_tail: None,
            derivative: None,
            label: format!("[{}]", sources.join(", ")),
        })
    }

    pub fn constant(c: f64) -> BoundedFunction {
        let e = if c < 0.0 {
            Expr::neg(Expr::Num(-c))
        } else {
            Expr::Num(c)
        };
        let mut f = BoundedFunction::from_expr(e).with_sup_bound(c.abs());
        f.derivative = Some(Box::new(BoundedFunction::zero_raw()));
        if c == 0.0 {
            f.square_tail = Some(SquareTail::Zero);
        }
        f
    }

    fn zero_raw() -> BoundedFunction {
        let mut f = BoundedFunction::from_expr(Expr::Num(0.0));
        f.sup_bound = Some(0.0);
        f.square_tail = Some(SquareTail::Zero);
        f
    }

    pub fn zero() -> BoundedFunction {
        BoundedFunction::constant(0.0)
    }

    /// `amplitude * exp(-rate * u)` with its square tail registered.
    pub fn exp_decay(amplitude: f64, rate: f64) -> BoundedFunction {
        let arg = Expr::neg(Expr::binary(BinOp::Mul, Expr::Num(rate), Expr::Var(Var::S)));
        let e = Expr::binary(
            BinOp::Mul,
            Expr::Num(amplitude.abs()),
            Expr::call(Func::Exp, vec![arg]),
        );
        let e = if amplitude < 0.0 { Expr::neg(e) } else { e };
        let mut f = BoundedFunction::from_expr(e).with_sup_bound(amplitude.abs());
        if rate > 0.0 {
            f.square_tail = Some(SquareTail::ExpDecay { amplitude, rate });
        }
        f
    }

    pub fn with_sup_bound(mut self, bound: f64) -> Self {
        self.sup_bound = Some(bound);
        self
    }

    pub fn with_square_tail(mut self, tail: SquareTail) -> Self {
        self.square_tail = Some(tail);
        self
    }

    /// Attaches the derivative `u -> f'(u)`; used by kernel families whose
    /// t-dependence comes from this function.
    pub fn with_derivative(mut self, derivative: BoundedFunction) -> Self {
        self.derivative = Some(Box::new(derivative));
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn entries(&self) -> &[Expr] {
        &self.entries
    }

    pub fn sup_bound(&self) -> Option<f64> {
        self.sup_bound
    }

    pub fn square_tail(&self) -> Option<SquareTail> {
        self.square_tail
    }

    pub fn derivative(&self) -> Option<&BoundedFunction> {
        self.derivative.as_deref()
    }

    /// Value of a scalar function whose expression has no free variable.
    pub fn constant_value(&self) -> Option<f64> {
        if self.is_scalar() && self.entries[0].is_constant() {
            self.entries[0].eval(&EvalContext::univariate(0.0)).ok()
        } else {
            None
        }
    }

    pub fn eval_into(&self, u: f64, out: &mut [f64]) -> Result<()> {
        if !(u >= 0.0) || !u.is_finite() {
            return Err(Error::Precondition(format!(
                "coefficient function `{}` evaluated at u = {u}",
                self.label
            )));
        }
        let ctx = EvalContext::univariate(u);
        for (o, e) in out.iter_mut().zip(&self.entries) {
            *o = e.eval(&ctx)?;
        }
        Ok(())
    }

    pub fn eval(&self, u: f64) -> Result<Matrix> {
        let mut out = vec![0.0; self.rows * self.cols];
        self.eval_into(u, &mut out)?;
        Ok(Matrix::new(self.rows, self.cols, out))
    }

    pub fn eval_scalar(&self, u: f64) -> Result<f64> {
        if !self.is_scalar() {
            return Err(Error::DimensionMismatch(format!(
                "`{}` is {}x{}, expected scalar",
                self.label, self.rows, self.cols
            )));
        }
        let mut out = [0.0];
        self.eval_into(u, &mut out)?;
        Ok(out[0])
    }

    /// Largest `‖f(u)‖_F²` over the given sample points.
    pub fn sampled_sup_sq(&self, points: impl IntoIterator<Item = f64>) -> Result<f64> {
        let mut buf = vec![0.0; self.rows * self.cols];
        let mut best: f64 = 0.0;
        for u in points {
            self.eval_into(u, &mut buf)?;
            best = best.max(crate::matrix::frobenius_sq(&buf));
        }
        Ok(best)
    }

    /// Checks the registered sup bound at the sample points. Returns the
    /// first offending point.
    pub fn check_sup_bound(
        &self,
        points: impl IntoIterator<Item = f64>,
        tol: f64,
    ) -> Result<Option<f64>> {
        let Some(bound) = self.sup_bound else {
            return Ok(None);
        };
        let mut buf = vec![0.0; self.rows * self.cols];
        for u in points {
            self.eval_into(u, &mut buf)?;
            if crate::matrix::frobenius_sq(&buf).sqrt() > bound * (1.0 + tol) {
                return Ok(Some(u));
            }
        }
        Ok(None)
    }

    /// Scalar combination `a*self + b*other`, used to test linearity of the
    /// stochastic operator.
    pub fn linear_combination(&self, a: f64, other: &BoundedFunction, b: f64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(
                "linear combination of differently shaped functions".into(),
            ));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(x, y)| {
                Expr::binary(
                    BinOp::Add,
                    Expr::binary(BinOp::Mul, signed(a), x.clone()),
                    Expr::binary(BinOp::Mul, signed(b), y.clone()),
                )
            })
            .collect();
        Ok(BoundedFunction {
            rows: self.rows,
            cols: self.cols,
            entries,
            sup_bound: None,
            square_tail: None,
            derivative: None,
            label: format!("{a}*({}) + {b}*({})", self.label, other.label),
        })
    }
}

fn signed(v: f64) -> Expr {
    if v < 0.0 {
        Expr::neg(Expr::Num(-v))
    } else {
        Expr::Num(v)
    }
}
