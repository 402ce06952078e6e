use super::{judge, CriterionVerdict, ThetaSchedule, Tolerances, Trend, Verdict, FLAT_SLOPE};
use crate::error::{Error, Result};
use crate::function::BoundedFunction;
use crate::kernel::{make_exponential, Kernel};
use crate::quadrature::{
    compact_distance, derivative_mass, diagonal_mass, l2_distance_to_limit, limit_tail_mass,
    log_weighted_distance, tail_mass, Grid,
};
use crate::stats;
use rayon::prelude::*;
use serde::Serialize;

fn flat(criterion: &str, verdict: Verdict, evidence: Vec<(f64, f64)>, tol: &Tolerances) -> CriterionVerdict {
    let v: Vec<f64> = evidence.iter().map(|p| p.1).collect();
    CriterionVerdict {
        criterion: criterion.to_string(),
        verdict,
        trend: Trend {
            slope: None,
            window_mean: stats::mean(&v),
            window_min: v.iter().copied().fold(f64::INFINITY, f64::min),
            window_max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        },
        evidence,
        tolerances: *tol,
        truncated: false,
        flags: Vec::new(),
        parts: Vec::new(),
    }
}

fn combine(criterion: &str, parts: Vec<CriterionVerdict>) -> CriterionVerdict {
    let last = parts.last().expect("at least one part").clone();
    CriterionVerdict {
        criterion: criterion.to_string(),
        verdict: Verdict::all(parts.iter().map(|p| p.verdict)),
        evidence: last.evidence,
        trend: last.trend,
        tolerances: last.tolerances,
        truncated: parts.iter().any(|p| p.truncated),
        flags: Vec::new(),
        parts,
    }
}

// ∫₀^{t_max/2} vs ∫₀^{t_max} of ‖H_∞‖²: the gap must be below eps_abs.
fn limit_square_integrable(k: &Kernel, g: &Grid, tol: &Tolerances) -> Result<CriterionVerdict> {
    let half = g.node(g.steps() / 2);
    let whole = limit_tail_mass(k, g, 0.0)?;
    let from_half = limit_tail_mass(k, g, half)?;
    let from_end = limit_tail_mass(k, g, g.t_max())?;
    let at_half = whole.value - from_half.value;
    let at_end = whole.value - from_end.value;
    let gap = (at_end - at_half).abs();
    let verdict = if gap < tol.eps_abs {
        Verdict::Holds
    } else if gap > tol.fail_floor {
        Verdict::Fails
    } else {
        Verdict::Inconclusive
    };
    let mut v = flat(
        "limit-square-integrable",
        verdict,
        vec![(half, at_half), (g.t_max(), at_end)],
        tol,
    );
    v.truncated = whole.truncated;
    Ok(v)
}

/// Mean-square condition: `∫₀ᵗ ‖H(t,s) − H_∞(s)‖² ds -> 0` together with a
/// Cauchy check that `H_∞` is square integrable.
pub fn check_msq_condition(k: &Kernel, g: &Grid, tol: &Tolerances) -> Result<CriterionVerdict> {
    let curve = l2_distance_to_limit(k, g)?;
    let main = judge("l2-distance-to-limit", curve.points, tol);
    let sq = limit_square_integrable(k, g, tol)?;
    let mut out = main.clone();
    out.verdict = Verdict::all([main.verdict, sq.verdict]);
    out.truncated = sq.truncated;
    out.parts = vec![main, sq];
    Ok(out)
}

/// The mean-square condition read as a necessary condition for almost-sure
/// convergence: when it fails, almost-sure convergence is ruled out.
pub fn check_as_necessary(k: &Kernel, g: &Grid, tol: &Tolerances) -> Result<CriterionVerdict> {
    let mut v = check_msq_condition(k, g, tol)?;
    v.criterion = "as-necessary".to_string();
    v.flags.push("necessary-for-as-convergence".to_string());
    if v.fails() {
        v.flags.push("as-convergence-ruled-out".to_string());
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitVerdicts {
    /// `lim_T limsup_t ∫_T^t ‖H(t,s)‖² ds = 0`.
    pub tail: CriterionVerdict,
    /// `∫₀ᵀ ‖H(t,s) − H_∞(s)‖² ds -> 0` for each fixed `T`.
    pub compact: CriterionVerdict,
}

impl SplitVerdicts {
    pub fn both_hold(&self) -> bool {
        self.tail.holds() && self.compact.holds()
    }
}

fn last_eval_times(g: &Grid, from: f64, w: usize) -> Vec<f64> {
    let ts: Vec<f64> = g.eval_times().into_iter().filter(|t| *t >= from).collect();
    ts[ts.len().saturating_sub(w)..].to_vec()
}

/// Split form of the mean-square condition. The `limsup_t` is approximated
/// by the max over the last `window` eval times; `T` runs over the ladder
/// `1.5^i` up to `t_max / 10`. The compact part uses `T ∈ {1, 4, 16}`.
pub fn check_split_conditions(k: &Kernel, g: &Grid, tol: &Tolerances) -> Result<SplitVerdicts> {
    k.limit().ok_or(Error::MissingLimit)?;
    let t_max = g.t_max();
    let mut ladder = Vec::new();
    let mut big_t = 1.0;
    while big_t <= t_max / 10.0 {
        let node = g.node(g.snap(big_t));
        if ladder.last() != Some(&node) {
            ladder.push(node);
        }
        big_t *= 1.5;
    }
    if ladder.is_empty() {
        return Err(Error::HorizonTooShort(format!("t_max = {t_max} < 10")));
    }
    let evidence = ladder
        .par_iter()
        .map(|&bt| {
            let mut best: f64 = 0.0;
            for t in last_eval_times(g, bt, tol.window) {
                best = best.max(tail_mass(k, g, bt, t)?);
            }
            Ok((bt, best))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tail = judge("tail-mass", evidence, tol);
    if tail.fails() {
        // A flat T-profile only means the inner limit is not reached yet
        // if the inner curve is still falling.
        let bt = *ladder.last().unwrap();
        let inner = g
            .eval_times()
            .into_iter()
            .filter(|t| *t >= bt)
            .map(|t| Ok((t, tail_mass(k, g, bt, t)?)))
            .collect::<Result<Vec<_>>>()?;
        let tr = super::trend(&inner, tol);
        if tr.slope.is_some_and(|s| s < FLAT_SLOPE) {
            tail.verdict = Verdict::Inconclusive;
            tail.flags.push("inner-limit-still-decaying".to_string());
        }
    }

    let mut parts = Vec::new();
    for bt in [1.0, 4.0, 16.0] {
        if bt > t_max / 10.0 && !parts.is_empty() {
            break;
        }
        let ev = g
            .eval_times()
            .into_par_iter()
            .filter(|t| *t >= bt)
            .map(|t| Ok((t, compact_distance(k, g, bt, t)?)))
            .collect::<Result<Vec<_>>>()?;
        parts.push(judge(&format!("compact-distance[T={bt}]"), ev, tol));
    }
    Ok(SplitVerdicts {
        tail,
        compact: combine("compact-distance", parts),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equivalence {
    pub msq: CriterionVerdict,
    pub split: SplitVerdicts,
    /// `msq` holds exactly when both split verdicts hold.
    pub agree: bool,
}

/// Runs both forms of the mean-square condition and reports whether the
/// computed verdicts agree.
pub fn check_equivalence(k: &Kernel, g: &Grid, tol: &Tolerances) -> Result<Equivalence> {
    let msq = check_msq_condition(k, g, tol)?;
    let split = check_split_conditions(k, g, tol)?;
    let agree = msq.holds() == split.both_hold();
    Ok(Equivalence { msq, split, agree })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SufficientVerdicts {
    /// `∫₀ᵗ ‖H − H_∞‖² ds · log t -> 0`.
    pub log_weighted: CriterionVerdict,
    /// `∫₀ᵗ ‖∂₁H(t,s)‖² ds <= c_q (1+t)^{2q}`.
    pub derivative_growth: CriterionVerdict,
    /// `‖H(t,t)‖² <= c_q (1+t)^{2q}`.
    pub diagonal_growth: CriterionVerdict,
    pub overall: Verdict,
    pub message: String,
}

// Hard check of `points` against the envelope; evidence keeps `shown`.
fn growth_check(
    criterion: &str,
    points: &[(f64, f64)],
    shown: Vec<(f64, f64)>,
    sched: &ThetaSchedule,
    tol: &Tolerances,
) -> CriterionVerdict {
    let fitted = points
        .iter()
        .map(|&(t, v)| v / sched.envelope(1.0, t))
        .fold(0.0, f64::max);
    let mut flags = Vec::new();
    let (verdict, slope) = match sched.c_q {
        Some(c) => {
            let ok = points
                .iter()
                .all(|&(t, v)| v <= sched.envelope(c, t) * (1.0 + 1e-12));
            flags.push(format!("c_q={c}"));
            (if ok { Verdict::Holds } else { Verdict::Fails }, None)
        }
        None => {
            let w = tol.window.max(2).min(shown.len());
            let tail = &shown[shown.len() - w..];
            let x: Vec<f64> = tail.iter().map(|p| 1.0 + p.0).collect();
            let y: Vec<f64> = tail.iter().map(|p| p.1).collect();
            let exponent = stats::log_log_slope(&x, &y);
            flags.push(format!("c_q-fitted={fitted}"));
            let ok = exponent.map_or(true, |e| e <= 2.0 * sched.q + tol.slope_min);
            (if ok { Verdict::Holds } else { Verdict::Fails }, exponent)
        }
    };
    let mut v = flat(criterion, verdict, shown, tol);
    v.trend.slope = slope;
    v.flags = flags;
    v
}

/// Sufficient conditions for almost-sure convergence: the log-weighted
/// distance tends to zero, and both `∫₀ᵗ ‖∂₁H‖²` and `‖H(t,t)‖²` grow at
/// most like `(1+t)^{2q}`. The diagonal bound is checked at every node.
pub fn check_as_sufficient(
    k: &Kernel,
    g: &Grid,
    sched: &ThetaSchedule,
    tol: &Tolerances,
) -> Result<SufficientVerdicts> {
    sched.validate()?;
    k.limit().ok_or(Error::MissingLimit)?;
    if !k.has_d1() {
        return Err(Error::MissingDerivative);
    }
    let lw = log_weighted_distance(k, g)?;
    let mut log_weighted = judge("log-weighted-distance", lw.points, tol);
    if !lw.skipped.is_empty() {
        log_weighted
            .flags
            .push(format!("skipped-t<=1: {}", lw.skipped.len()));
    }
    let dm = derivative_mass(k, g)?;
    let derivative_growth = growth_check("derivative-growth", &dm.points, dm.points.clone(), sched, tol);

    let diag = (0..=g.steps())
        .into_par_iter()
        .map(|j| {
            let t = g.node(j);
            Ok((t, k.diagonal(t)?.frobenius_sq()))
        })
        .collect::<Result<Vec<_>>>()?;
    let shown = g.eval_indices().iter().map(|&j| diag[j]).collect();
    let diagonal_growth = growth_check("diagonal-growth", &diag, shown, sched, tol);

    let overall = Verdict::all([
        log_weighted.verdict,
        derivative_growth.verdict,
        diagonal_growth.verdict,
    ]);
    let message = match overall {
        Verdict::Holds => "sufficient conditions met: almost-sure convergence predicted".to_string(),
        Verdict::Fails => "sufficient conditions violated: no almost-sure prediction".to_string(),
        Verdict::Inconclusive => "sufficient conditions undecided at this horizon".to_string(),
    };
    Ok(SufficientVerdicts {
        log_weighted,
        derivative_growth,
        diagonal_growth,
        overall,
        message,
    })
}

/// Sequence `a_k = ∫_{k^θ}^{(k+1)^θ} ‖H(s,s)‖² ds · log k -> 0` along a
/// geometric integer ladder of `k >= 2` with `(k+1)^θ <= t_max`.
pub fn check_diagonal_window_variant(
    k: &Kernel,
    g: &Grid,
    sched: &ThetaSchedule,
    tol: &Tolerances,
) -> Result<CriterionVerdict> {
    sched.validate()?;
    let mut ks = Vec::new();
    let mut n: u64 = 2;
    while sched.time(n + 1) <= g.t_max() {
        ks.push(n);
        n = ((n as f64) * 1.5).ceil() as u64;
    }
    if ks.is_empty() {
        return Err(Error::HorizonTooShort(format!(
            "3^theta exceeds t_max = {}",
            g.t_max()
        )));
    }
    let evidence = ks
        .par_iter()
        .map(|&n| {
            let m = diagonal_mass(k, sched.time(n), sched.time(n + 1), g)?;
            Ok((n as f64, m * (n as f64).ln()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(judge("diagonal-window-mass", evidence, tol))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdditiveVerdicts {
    /// `sqrt(t) |H♯(t)| -> 0`.
    pub msq: CriterionVerdict,
    /// `sqrt(t log log t) |H♯(t)| -> 0`.
    pub as_: CriterionVerdict,
}

fn require_scalar(f: &BoundedFunction) -> Result<()> {
    if f.is_scalar() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!("`{}` must be scalar", f.label())))
    }
}

/// Pointwise conditions on the time factor of an additive kernel
/// `H_∞(s) + H♯(t)`, sampled at eval times `t > e`.
pub fn check_additive_conditions(
    h_sharp: &BoundedFunction,
    g: &Grid,
    tol: &Tolerances,
) -> Result<AdditiveVerdicts> {
    require_scalar(h_sharp)?;
    let times: Vec<f64> = g
        .eval_times()
        .into_iter()
        .filter(|t| *t > std::f64::consts::E)
        .collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for t in times {
        let h = h_sharp.eval_scalar(t)?.abs();
        a.push((t, t.sqrt() * h));
        b.push((t, (t * t.ln().ln()).sqrt() * h));
    }
    let mut msq = judge("additive-msq", a, tol);
    if msq.verdict == Verdict::Inconclusive && msq.trend.slope.is_some_and(|s| s < 0.0) {
        msq.flags.push(
            "slowly-varying decay cannot be told from a small positive limit at this horizon"
                .to_string(),
        );
    }
    Ok(AdditiveVerdicts {
        msq,
        as_: judge("additive-as", b, tol),
    })
}

/// `H♯(t) -> 1` for a multiplicative kernel `H_∞(s) H♯(t)`.
pub fn check_multiplicative_condition(
    h_sharp: &BoundedFunction,
    g: &Grid,
    tol: &Tolerances,
) -> Result<CriterionVerdict> {
    require_scalar(h_sharp)?;
    let ev = g
        .eval_times()
        .into_iter()
        .map(|t| Ok((t, (h_sharp.eval_scalar(t)? - 1.0).abs())))
        .collect::<Result<Vec<_>>>()?;
    Ok(judge("multiplicative-limit", ev, tol))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowVerdicts {
    /// `∫_t^{t+1} σ² ds -> 0`.
    pub msq: CriterionVerdict,
    /// The sequence `∫_t^{t+1} σ² ds · log t`, judged against zero.
    pub log_weighted: CriterionVerdict,
    /// Last-window mean of the log-weighted sequence.
    pub l_estimate: f64,
    /// Set when the log-weighted sequence is still growing.
    pub diverging: bool,
}

/// Unit-window conditions on the volatility of the exponential family
/// `e^{-(t-s)} σ(s)`, sampled at eval times with `t + 1 <= t_max`.
pub fn check_window_condition(
    sigma: &BoundedFunction,
    g: &Grid,
    tol: &Tolerances,
) -> Result<WindowVerdicts> {
    require_scalar(sigma)?;
    let k = make_exponential(sigma.clone(), 1.0)?;
    let times: Vec<f64> = g
        .eval_times()
        .into_iter()
        .filter(|t| *t + 1.0 <= g.t_max())
        .collect();
    let window = times
        .par_iter()
        .map(|&t| Ok((t, diagonal_mass(&k, t, t + 1.0, g)?)))
        .collect::<Result<Vec<_>>>()?;
    let weighted: Vec<(f64, f64)> = window
        .iter()
        .filter(|(t, _)| *t > 1.0)
        .map(|&(t, v)| (t, v * t.ln()))
        .collect();
    let msq = judge("window-mass", window, tol);
    let log_weighted = judge("window-log-weighted", weighted, tol);
    let l_estimate = log_weighted.trend.window_mean;
    let diverging = log_weighted.trend.slope.is_some_and(|s| s > tol.slope_min);
    Ok(WindowVerdicts {
        msq,
        log_weighted,
        l_estimate,
        diverging,
    })
}
