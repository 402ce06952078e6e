use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Polynomial growth order `q`, optional constant `c_q` for
/// `f(t) <= c_q (1+t)^{2q}` bounds, and the exponent of the time sequence
/// `t_n = n^theta`, valid for `0 < theta < 1/(1+2q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaSchedule {
    pub q: f64,
    /// Fitted from the data when absent.
    pub c_q: Option<f64>,
    pub theta: f64,
}

impl ThetaSchedule {
    pub fn new(q: f64, c_q: Option<f64>, theta: f64) -> Result<ThetaSchedule> {
        let s = ThetaSchedule { q, c_q, theta };
        s.validate()?;
        Ok(s)
    }

    /// Exclusive upper end of the admissible `theta` range.
    pub fn bound(&self) -> f64 {
        1.0 / (1.0 + 2.0 * self.q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 0.0) || !self.q.is_finite() {
            return Err(Error::Precondition(format!("q must be >= 0, got {}", self.q)));
        }
        if let Some(c) = self.c_q {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::Precondition(format!("c_q must be positive, got {c}")));
            }
        }
        let bound = self.bound();
        if !(self.theta > 0.0 && self.theta < bound) {
            return Err(Error::InvalidTheta {
                theta: self.theta,
                q: self.q,
                bound,
            });
        }
        Ok(())
    }

    /// `t_n = n^theta`.
    pub fn time(&self, n: u64) -> f64 {
        (n as f64).powf(self.theta)
    }

    /// The growth envelope `c (1+t)^{2q}`.
    pub fn envelope(&self, c: f64, t: f64) -> f64 {
        c * (1.0 + t).powf(2.0 * self.q)
    }
}
