use super::ensemble::BrownianEnsemble;
use super::volterra::SimulationResult;
use crate::error::{Error, Result};
use crate::stats;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowStats {
    pub a: f64,
    pub b: f64,
    /// Per-path max of `‖X_f(t) − X_f*‖` over eval times in `[a, b]`.
    pub sups: Vec<f64>,
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
    /// `(eps, fraction of paths with sup < eps)`.
    pub below: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub windows: Vec<WindowStats>,
    /// Always set: sups over grid eval times underestimate the continuous
    /// sup over a window.
    pub grid_sup_underestimates: bool,
}

impl TailReport {
    /// Fraction of paths below `eps` in each window, in window order.
    pub fn fractions(&self, eps: f64) -> Vec<f64> {
        self.windows
            .iter()
            .map(|w| {
                w.below
                    .iter()
                    .find(|(e, _)| *e == eps)
                    .map_or(f64::NAN, |(_, f)| *f)
            })
            .collect()
    }
}

/// Empirical sup of `‖X_f(t) − X_f*‖` over the eval times inside each
/// window, with quantiles and the fraction of paths under each `eps`.
/// Evidence about almost-sure convergence, not a proof of it.
pub fn as_tail_statistics(
    r: &SimulationResult,
    windows: &[(f64, f64)],
    eps: &[f64],
) -> Result<TailReport> {
    if !r.has_limit() {
        return Err(Error::MissingLimit);
    }
    let t_max = r.grid.t_max();
    let mut out = Vec::with_capacity(windows.len());
    for &(a, b) in windows {
        if a > b {
            return Err(Error::Ordering { a, b });
        }
        if a < 0.0 || b > t_max {
            return Err(Error::Precondition(format!(
                "window [{a}, {b}] leaves [0, {t_max}]"
            )));
        }
        let ks: Vec<usize> = r
            .eval_times
            .iter()
            .enumerate()
            .filter(|(_, t)| **t >= a && **t <= b)
            .map(|(k, _)| k)
            .collect();
        if ks.len() < 2 {
            return Err(Error::EmptyWindow { a, b });
        }
        let sups: Vec<f64> = (0..r.paths)
            .map(|m| {
                let l = r.limit_value(m).unwrap();
                ks.iter()
                    .map(|&k| {
                        r.value(m, k)
                            .iter()
                            .zip(l)
                            .map(|(x, y)| (x - y) * (x - y))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        let mut sorted = sups.clone();
        sorted.sort_by(f64::total_cmp);
        let below = eps
            .iter()
            .map(|&e| (e, sups.iter().filter(|s| **s < e).count() as f64 / r.paths as f64))
            .collect();
        out.push(WindowStats {
            a,
            b,
            q10: stats::quantile_sorted(&sorted, 0.1),
            median: stats::quantile_sorted(&sorted, 0.5),
            q90: stats::quantile_sorted(&sorted, 0.9),
            sups,
            below,
        });
    }
    Ok(TailReport {
        windows: out,
        grid_sup_underestimates: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LilReport {
    pub horizon: usize,
    pub start: usize,
    pub per_path: Vec<f64>,
    pub median: f64,
}

/// Per-path `max_{3 <= n <= N} |B(n)| / sqrt(2 n log log n)` for the first
/// Brownian component.
pub fn lil_statistic(e: &BrownianEnsemble, horizon: usize) -> Result<LilReport> {
    lil_statistic_from(e, horizon, 3)
}

/// As [`lil_statistic`] with the maximum taken from `n = start` (at least 3,
/// where `log log n > 0`).
pub fn lil_statistic_from(e: &BrownianEnsemble, horizon: usize, start: usize) -> Result<LilReport> {
    if horizon < 10 {
        return Err(Error::HorizonTooShort(format!("N = {horizon} < 10")));
    }
    let start = start.max(3);
    if start > horizon {
        return Err(Error::HorizonTooShort(format!("start {start} exceeds N = {horizon}")));
    }
    let per_unit = (1.0 / e.dt()).round();
    if (per_unit * e.dt() - 1.0).abs() > 1e-9 || per_unit < 1.0 {
        return Err(Error::InvalidGrid(format!(
            "dt = {} does not place nodes on the integers",
            e.dt()
        )));
    }
    let per_unit = per_unit as usize;
    if horizon * per_unit > e.steps() {
        return Err(Error::HorizonTooShort(format!(
            "N = {horizon} beyond the ensemble horizon {}",
            e.steps() as f64 * e.dt()
        )));
    }
    let norms: Vec<f64> = (start..=horizon)
        .map(|n| (2.0 * n as f64 * (n as f64).ln().ln()).sqrt())
        .collect();
    let d = e.dim();
    let per_path: Vec<f64> = (0..e.paths())
        .map(|m| {
            let b = e.brownian_path(m);
            (start..=horizon)
                .zip(&norms)
                .map(|(n, w)| b[n * per_unit * d].abs() / w)
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(LilReport {
        horizon,
        start,
        median: stats::median(&per_path),
        per_path,
    })
}
