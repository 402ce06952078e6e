//! Finite-evidence verdicts for limit conditions on kernels.
//!
//! A condition `v(t) -> 0` is judged on samples along a geometric ladder
//! of times. The last `window` samples decide: a small mean with a clearly
//! negative log-log slope is [`Verdict::Holds`]; samples bounded away from
//! zero with no downward trend is [`Verdict::Fails`]; anything else is
//! [`Verdict::Inconclusive`]. No verdict claims a proven limit.

mod checks;
mod theta;

pub use checks::{
    check_additive_conditions, check_as_necessary, check_as_sufficient,
    check_diagonal_window_variant, check_equivalence, check_msq_condition,
    check_multiplicative_condition, check_split_conditions, check_window_condition,
    AdditiveVerdicts, Equivalence, SplitVerdicts, SufficientVerdicts, WindowVerdicts,
};
pub use theta::ThetaSchedule;

use crate::stats;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

impl Verdict {
    /// Holds if all hold, Fails if any fails, Inconclusive otherwise.
    pub fn all(vs: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::Holds;
        for v in vs {
            match v {
                Verdict::Fails => return Verdict::Fails,
                Verdict::Inconclusive => out = Verdict::Inconclusive,
                Verdict::Holds => {}
            }
        }
        out
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "Holds",
            Verdict::Fails => "Fails",
            Verdict::Inconclusive => "Inconclusive",
        })
    }
}

/// Thresholds of the trend engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Largest last-window mean compatible with a zero limit.
    pub eps_abs: f64,
    /// Required decay: log-log slope below `-slope_min`.
    pub slope_min: f64,
    /// Number of trailing samples judged.
    pub window: usize,
    /// Smallest last-window value compatible with a nonzero limit.
    pub fail_floor: f64,
    /// Discretization allowance per unit `dt` in Monte Carlo comparisons.
    pub c_disc: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps_abs: 1e-3,
            slope_min: 0.1,
            window: 5,
            fail_floor: 1e-2,
            c_disc: 1.0,
        }
    }
}

impl Tolerances {
    /// Profile for slowly varying decay such as `1/sqrt(log log t)`, which
    /// the default thresholds cannot separate from a positive limit.
    pub fn relaxed() -> Self {
        Tolerances {
            eps_abs: 0.75,
            slope_min: 0.01,
            ..Tolerances::default()
        }
    }
}

/// Slope above which a sequence counts as flat or growing.
const FLAT_SLOPE: f64 = -1e-6;
/// Window maxima below this are treated as exact zeros.
const NEGLIGIBLE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Trend {
    /// Log-log slope over the window; `None` when the window is negligible
    /// or holds non-positive values.
    pub slope: Option<f64>,
    pub window_mean: f64,
    pub window_min: f64,
    pub window_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionVerdict {
    pub criterion: String,
    pub verdict: Verdict,
    pub evidence: Vec<(f64, f64)>,
    pub trend: Trend,
    pub tolerances: Tolerances,
    pub truncated: bool,
    pub flags: Vec<String>,
    /// Sub-verdicts this one was combined from.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<CriterionVerdict>,
}

impl CriterionVerdict {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn fails(&self) -> bool {
        self.verdict == Verdict::Fails
    }

    pub fn last_value(&self) -> Option<f64> {
        self.evidence.last().map(|p| p.1)
    }

    pub fn with_flag(mut self, flag: impl Into<String>) -> Self {
        self.flags.push(flag.into());
        self
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("verdict serializes")
    }
}

/// Window statistics of the trailing `tol.window` samples.
pub fn trend(evidence: &[(f64, f64)], tol: &Tolerances) -> Trend {
    let w = tol.window.max(2).min(evidence.len());
    let tail = &evidence[evidence.len() - w..];
    let t: Vec<f64> = tail.iter().map(|p| p.0).collect();
    let v: Vec<f64> = tail.iter().map(|p| p.1).collect();
    let window_max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let window_min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let slope = if window_max <= NEGLIGIBLE {
        None
    } else {
        stats::log_log_slope(&t, &v)
    };
    Trend {
        slope,
        window_mean: stats::mean(&v),
        window_min,
        window_max,
    }
}

/// Applies the dual test to a sequence that should tend to zero.
pub fn judge(criterion: &str, evidence: Vec<(f64, f64)>, tol: &Tolerances) -> CriterionVerdict {
    let mut flags = Vec::new();
    let (verdict, tr) = if evidence.len() < 2 {
        flags.push("too-few-samples".to_string());
        let tr = Trend {
            slope: None,
            window_mean: evidence.first().map_or(f64::NAN, |p| p.1),
            window_min: f64::NAN,
            window_max: f64::NAN,
        };
        (Verdict::Inconclusive, tr)
    } else {
        let tr = trend(&evidence, tol);
        let v = if tr.window_max <= NEGLIGIBLE && tr.window_min >= -NEGLIGIBLE {
            Verdict::Holds
        } else {
            match tr.slope {
                Some(s) if tr.window_mean < tol.eps_abs && s < -tol.slope_min => Verdict::Holds,
                Some(s) if tr.window_min > tol.fail_floor && s >= FLAT_SLOPE => Verdict::Fails,
                _ => Verdict::Inconclusive,
            }
        };
        if evidence.len() < tol.window {
            flags.push("short-window".to_string());
        }
        (v, tr)
    };
    CriterionVerdict {
        criterion: criterion.to_string(),
        verdict,
        evidence,
        trend: tr,
        tolerances: *tol,
        truncated: false,
        flags,
        parts: Vec::new(),
    }
}
