//! Composite trapezoid integration of kernel functionals on a uniform grid.
//!
//! Every integral sums left to right over grid nodes, so results do not
//! depend on how curves are split across threads.

use crate::error::{Error, Result};
use crate::function::BoundedFunction;
use crate::kernel::{Kernel, Scratch};
use crate::matrix::frobenius_sq;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

const NODE_TOL: f64 = 1e-9;

/// Uniform grid `t_j = j dt`, `j = 0..=steps`, with a sorted subset of
/// nodes marked as evaluation times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dt: f64,
    steps: usize,
    eval_indices: Vec<usize>,
}

impl Grid {
    /// Grid on `[0, t_max]` with the default geometric evaluation ladder
    /// `2 * 1.5^k` (snapped to nodes) closed by `t_max`.
    pub fn new(dt: f64, t_max: f64) -> Result<Grid> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::InvalidGrid(format!("t_max must be positive, got {t_max}")));
        }
        let n = (t_max / dt).round();
        if (n * dt - t_max).abs() > NODE_TOL * t_max.max(1.0) || n < 1.0 {
            return Err(Error::InvalidGrid(format!(
                "t_max = {t_max} is not an integer multiple of dt = {dt}"
            )));
        }
        let g = Grid {
            dt,
            steps: n as usize,
            eval_indices: Vec::new(),
        };
        Ok(g.with_ladder(2.0, 1.5))
    }

    /// Every `stride`-th node (excluding 0) plus the last one.
    pub fn uniform(dt: f64, t_max: f64, stride: usize) -> Result<Grid> {
        let mut g = Grid::new(dt, t_max)?;
        let stride = stride.max(1);
        let mut idx: Vec<usize> = (1..=g.steps).filter(|j| j % stride == 0).collect();
        if idx.last() != Some(&g.steps) {
            idx.push(g.steps);
        }
        g.eval_indices = idx;
        Ok(g)
    }

    /// Replaces the evaluation times; each must be a node.
    pub fn with_eval_times(mut self, times: &[f64]) -> Result<Grid> {
        let mut idx = times
            .iter()
            .map(|&t| self.node_index(t))
            .collect::<Result<Vec<_>>>()?;
        idx.sort_unstable();
        idx.dedup();
        self.eval_indices = idx;
        Ok(self)
    }

    /// Geometric ladder `start * ratio^k` up to `t_max`, snapped to the
    /// nearest node and closed by `t_max`.
    pub fn with_ladder(mut self, start: f64, ratio: f64) -> Grid {
        let mut idx = Vec::new();
        let mut t = start;
        while t <= self.t_max() && ratio > 1.0 {
            let j = self.snap(t);
            if j > 0 {
                idx.push(j);
            }
            t *= ratio;
        }
        idx.push(self.steps);
        idx.sort_unstable();
        idx.dedup();
        self.eval_indices = idx;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn t_max(&self) -> f64 {
        self.node(self.steps)
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn eval_indices(&self) -> &[usize] {
        &self.eval_indices
    }

    pub fn eval_times(&self) -> Vec<f64> {
        self.eval_indices.iter().map(|&j| self.node(j)).collect()
    }

    /// Index of the node equal to `t` (within `1e-9` of a step).
    pub fn node_index(&self, t: f64) -> Result<usize> {
        let x = t / self.dt;
        let j = x.round();
        if !(j >= 0.0) || j as usize > self.steps || (x - j).abs() > NODE_TOL * x.abs().max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "t = {t} is not a node of the grid with dt = {} on [0, {}]",
                self.dt,
                self.t_max()
            )));
        }
        Ok(j as usize)
    }

    /// Nearest node index, clamped to the grid.
    pub fn snap(&self, t: f64) -> usize {
        ((t / self.dt).round().max(0.0) as usize).min(self.steps)
    }

    /// Same horizon with `factor` times larger steps. Evaluation times must
    /// survive the coarsening.
    pub fn coarsened(&self, factor: usize) -> Result<Grid> {
        if factor == 0 || self.steps % factor != 0 {
            return Err(Error::InvalidGrid(format!(
                "cannot coarsen {} steps by {factor}",
                self.steps
            )));
        }
        if let Some(j) = self.eval_indices.iter().find(|&&j| j % factor != 0) {
            return Err(Error::InvalidGrid(format!(
                "evaluation time {} is not a node after coarsening by {factor}",
                self.node(*j)
            )));
        }
        Ok(Grid {
            dt: self.dt * factor as f64,
            steps: self.steps / factor,
            eval_indices: self.eval_indices.iter().map(|j| j / factor).collect(),
        })
    }
}

/// Composite trapezoid over equally spaced samples.
/// Full double precision for CSV cells: 17 significant digits in
/// scientific notation, so every value round-trips.
pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let mut acc = 0.5 * values[0];
            for v in &values[1..n - 1] {
                acc += v;
            }
            acc += 0.5 * values[n - 1];
            acc * h
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Functional {
    L2DistanceToLimit,
    LogWeightedDistance,
    DerivativeMass,
    IsometryPrediction,
}

impl Functional {
    pub fn name(self) -> &'static str {
        match self {
            Functional::L2DistanceToLimit => "l2-distance-to-limit",
            Functional::LogWeightedDistance => "log-weighted-distance",
            Functional::DerivativeMass => "derivative-mass",
            Functional::IsometryPrediction => "isometry-prediction",
        }
    }
}

/// A functional sampled along the grid's evaluation times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralCurve {
    pub functional: Functional,
    pub kernel: String,
    pub horizon: f64,
    pub points: Vec<(f64, f64)>,
    /// Set when an integral to infinity was cut at the horizon without an
    /// analytic tail.
    pub truncated: bool,
    /// Evaluation times left out (e.g. `t <= 1` for log weights).
    pub skipped: Vec<f64>,
}

impl IntegralCurve {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        self.points.last().copied()
    }

    /// Value at the evaluation time closest to `t`.
    pub fn value_near(&self, t: f64) -> Option<f64> {
        self.points
            .iter()
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            .map(|p| p.1)
    }

    /// `t,value` CSV, floats in [`csv_float`] form.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "value"])?;
        for (t, v) in &self.points {
            w.write_record([csv_float(*t), csv_float(*v)])?;
        }
        w.flush()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curve serializes")
    }
}

/// `∫ ‖H_∞(s)‖²` tail from some time on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailMass {
    pub value: f64,
    pub truncated: bool,
}

fn distance_sq(
    k: &Kernel,
    f: Option<&BoundedFunction>,
    t: f64,
    s: f64,
    sc: &mut Scratch,
) -> Result<f64> {
    k.eval_into(t, s, &mut sc.h)?;
    k.eval_limit_into(s, &mut sc.l)?;
    for (h, l) in sc.h.iter_mut().zip(&sc.l) {
        *h -= l;
    }
    weighted(k, f, s, sc)
}

// ‖sc.h f(s)‖² (or ‖sc.h‖² without f).
fn weighted(k: &Kernel, f: Option<&BoundedFunction>, s: f64, sc: &mut Scratch) -> Result<f64> {
    match f {
        None => Ok(frobenius_sq(&sc.h)),
        Some(f) => {
            f.eval_into(s, &mut sc.f)?;
            crate::matrix::matmul_into(&sc.h, &sc.f, k.dim(), k.dim(), f.cols(), &mut sc.prod);
            Ok(frobenius_sq(&sc.prod))
        }
    }
}

fn scratch_for(k: &Kernel, f: Option<&BoundedFunction>) -> Scratch {
    Scratch::new(k.dim(), f.map_or(k.dim(), |f| f.cols()))
}

fn check_f(k: &Kernel, f: &BoundedFunction) -> Result<()> {
    if f.rows() != k.dim() {
        return Err(Error::DimensionMismatch(format!(
            "kernel is {0}x{0} but f has {1} rows",
            k.dim(),
            f.rows()
        )));
    }
    Ok(())
}

// Trapezoid of `integrand(s_j)` over nodes lo..=hi.
fn integrate_nodes(
    g: &Grid,
    lo: usize,
    hi: usize,
    mut integrand: impl FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    if hi <= lo {
        return Ok(0.0);
    }
    let mut acc = 0.5 * integrand(g.node(lo))?;
    for j in lo + 1..hi {
        acc += integrand(g.node(j))?;
    }
    acc += 0.5 * integrand(g.node(hi))?;
    Ok(acc * g.dt())
}

fn distance_between(
    k: &Kernel,
    f: Option<&BoundedFunction>,
    g: &Grid,
    t: usize,
    lo: usize,
    hi: usize,
) -> Result<f64> {
    let mut sc = scratch_for(k, f);
    let tt = g.node(t);
    integrate_nodes(g, lo, hi, |s| distance_sq(k, f, tt, s, &mut sc))
}

fn curve(
    k: &Kernel,
    g: &Grid,
    functional: Functional,
    eval: impl Fn(usize) -> Result<f64> + Sync,
) -> Result<IntegralCurve> {
    let values = g
        .eval_indices()
        .par_iter()
        .map(|&j| eval(j))
        .collect::<Result<Vec<f64>>>()?;
    Ok(IntegralCurve {
        functional,
        kernel: k.label().to_string(),
        horizon: g.t_max(),
        points: g.eval_times().into_iter().zip(values).collect(),
        truncated: false,
        skipped: Vec::new(),
    })
}

/// `∫₀^{t_i} ‖(H(t_i,s) − H_∞(s)) f(s)‖² ds` at node `i`.
pub(crate) fn weighted_distance_at(k: &Kernel, f: &BoundedFunction, g: &Grid, i: usize) -> Result<f64> {
    k.limit().ok_or(Error::MissingLimit)?;
    check_f(k, f)?;
    distance_between(k, Some(f), g, i, 0, i)
}

/// `∫_{t_lo}^{t_hi} ‖H_∞(s) f(s)‖² ds`.
pub(crate) fn limit_mass_between(
    k: &Kernel,
    f: &BoundedFunction,
    g: &Grid,
    lo: usize,
    hi: usize,
) -> Result<f64> {
    let limit = k.limit().ok_or(Error::MissingLimit)?;
    check_f(k, f)?;
    let mut sc = scratch_for(k, Some(f));
    integrate_nodes(g, lo, hi, |s| {
        limit.eval_into(s, &mut sc.h)?;
        weighted(k, Some(f), s, &mut sc)
    })
}

/// `∫₀^{t_i} ‖∂₁H(t_i,s) f(s)‖² ds`.
pub(crate) fn derivative_mass_at(k: &Kernel, f: &BoundedFunction, g: &Grid, i: usize) -> Result<f64> {
    check_f(k, f)?;
    let mut sc = scratch_for(k, Some(f));
    let u = g.node(i);
    integrate_nodes(g, 0, i, |s| {
        k.eval_d1_into(u, s, &mut sc.h)?;
        weighted(k, Some(f), s, &mut sc)
    })
}

/// `D(t) = ∫₀ᵗ ‖H(t,s) − H_∞(s)‖² ds` along the evaluation times.
pub fn l2_distance_to_limit(k: &Kernel, g: &Grid) -> Result<IntegralCurve> {
    k.limit().ok_or(Error::MissingLimit)?;
    curve(k, g, Functional::L2DistanceToLimit, |j| {
        distance_between(k, None, g, j, 0, j)
    })
}

/// `∫_t^∞ ‖H_∞(s)‖² ds`: trapezoid up to the horizon plus the registered
/// analytic tail beyond it, or a truncation flag when none exists.
pub fn limit_tail_mass(k: &Kernel, g: &Grid, t: f64) -> Result<TailMass> {
    limit_tail_with(k, None, g, t)
}

/// `∫_t^∞ ‖H_∞(s) f(s)‖² ds`, truncated like [`limit_tail_mass`].
pub(crate) fn limit_tail_weighted(k: &Kernel, f: &BoundedFunction, g: &Grid, t: f64) -> Result<TailMass> {
    check_f(k, f)?;
    limit_tail_with(k, Some(f), g, t)
}

fn limit_tail_with(k: &Kernel, f: Option<&BoundedFunction>, g: &Grid, t: f64) -> Result<TailMass> {
    let limit = k.limit().ok_or(Error::MissingLimit)?;
    if t > g.t_max() * (1.0 + NODE_TOL) {
        return Err(Error::Precondition(format!(
            "tail start {t} lies beyond the horizon {}",
            g.t_max()
        )));
    }
    let j = g.node_index(t)?;
    let mut sc = scratch_for(k, f);
    let body = integrate_nodes(g, j, g.steps(), |s| {
        limit.eval_into(s, &mut sc.h)?;
        weighted(k, f, s, &mut sc)
    })?;
    let scale = match f {
        None => Some(1.0),
        Some(f) => f.constant_value().map(|c| c * c),
    };
    match (limit.square_tail(), scale) {
        (Some(tail), Some(c2)) => Ok(TailMass {
            value: body + c2 * tail.from(g.t_max()),
            truncated: false,
        }),
        _ => Ok(TailMass {
            value: body,
            truncated: true,
        }),
    }
}

fn ordered(g: &Grid, a: f64, b: f64) -> Result<(usize, usize)> {
    if a > b {
        return Err(Error::Ordering { a, b });
    }
    Ok((g.node_index(a)?, g.node_index(b)?))
}

/// `∫_T^t ‖H(t,s)‖² ds` for nodes `T <= t`.
pub fn tail_mass(k: &Kernel, g: &Grid, big_t: f64, t: f64) -> Result<f64> {
    let (lo, hi) = ordered(g, big_t, t)?;
    let mut sc = scratch_for(k, None);
    integrate_nodes(g, lo, hi, |s| {
        k.eval_into(t, s, &mut sc.h)?;
        Ok(frobenius_sq(&sc.h))
    })
}

/// `∫₀ᵀ ‖H(t,s) − H_∞(s)‖² ds` for nodes `T <= t`.
pub fn compact_distance(k: &Kernel, g: &Grid, big_t: f64, t: f64) -> Result<f64> {
    k.limit().ok_or(Error::MissingLimit)?;
    let (lo, hi) = ordered(g, big_t, t)?;
    distance_between(k, None, g, hi, 0, lo)
}

/// `D(t) log t` at evaluation times `t > 1`; smaller times are skipped.
pub fn log_weighted_distance(k: &Kernel, g: &Grid) -> Result<IntegralCurve> {
    k.limit().ok_or(Error::MissingLimit)?;
    let mut kept = g.clone();
    let (skip, keep): (Vec<usize>, Vec<usize>) =
        g.eval_indices().iter().partition(|&&j| g.node(j) <= 1.0);
    if keep.is_empty() {
        return Err(Error::LogDomain);
    }
    kept.eval_indices = keep;
    let mut c = curve(k, &kept, Functional::LogWeightedDistance, |j| {
        Ok(distance_between(k, None, g, j, 0, j)? * g.node(j).ln())
    })?;
    c.skipped = skip.into_iter().map(|j| g.node(j)).collect();
    Ok(c)
}

/// `∫₀ᵗ ‖∂₁H(t,s)‖² ds` along the evaluation times.
pub fn derivative_mass(k: &Kernel, g: &Grid) -> Result<IntegralCurve> {
    if !k.has_d1() {
        return Err(Error::MissingDerivative);
    }
    curve(k, g, Functional::DerivativeMass, |j| {
        let t = g.node(j);
        let mut sc = scratch_for(k, None);
        integrate_nodes(g, 0, j, |s| {
            k.eval_d1_into(t, s, &mut sc.h)?;
            Ok(frobenius_sq(&sc.h))
        })
    })
}

/// `∫_a^b ‖H(s,s)‖² ds` for arbitrary `0 <= a <= b <= t_max`. Endpoints off
/// the grid use linear interpolation of the integrand inside their cell.
pub fn diagonal_mass(k: &Kernel, a: f64, b: f64, g: &Grid) -> Result<f64> {
    if a > b {
        return Err(Error::Ordering { a, b });
    }
    let t_max = g.t_max();
    if a < 0.0 || b > t_max * (1.0 + NODE_TOL) {
        return Err(Error::Precondition(format!(
            "diagonal window [{a}, {b}] leaves [0, {t_max}]"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut sc = scratch_for(k, None);
    let mut phi = |s: f64| -> Result<f64> {
        k.eval_into(s, s, &mut sc.h)?;
        Ok(frobenius_sq(&sc.h))
    };
    let mut at = |x: f64| -> Result<f64> {
        if let Ok(j) = g.node_index(x) {
            return phi(g.node(j));
        }
        let j = ((x / g.dt()).floor() as usize).min(g.steps() - 1);
        let (x0, x1) = (g.node(j), g.node(j + 1));
        let (y0, y1) = (phi(x0)?, phi(x1)?);
        Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    };
    let snap = |x: f64| g.node_index(x).map_or(x, |j| g.node(j));
    let (a, b) = (snap(a), snap(b));
    let mut xs = vec![a];
    let mut j = (a / g.dt()).floor() as usize;
    while j <= g.steps() && g.node(j) < b {
        if g.node(j) > a {
            xs.push(g.node(j));
        }
        j += 1;
    }
    xs.push(b);
    let ys = xs.iter().map(|&x| at(x)).collect::<Result<Vec<f64>>>()?;
    let mut acc = 0.0;
    for i in 1..xs.len() {
        acc += 0.5 * (ys[i - 1] + ys[i]) * (xs[i] - xs[i - 1]);
    }
    Ok(acc)
}

/// Predicted `E‖X_f(t) − X_f*‖²`:
/// `∫₀ᵗ ‖(H(t,s) − H_∞(s)) f(s)‖² ds + ∫_t^∞ ‖H_∞(s) f(s)‖² ds`.
pub fn isometry_prediction(k: &Kernel, f: &BoundedFunction, g: &Grid) -> Result<IntegralCurve> {
    k.limit().ok_or(Error::MissingLimit)?;
    check_f(k, f)?;
    let truncated = limit_tail_with(k, Some(f), g, g.t_max())?.truncated;
    let mut c = curve(k, g, Functional::IsometryPrediction, |j| {
        let near = distance_between(k, Some(f), g, j, 0, j)?;
        let far = limit_tail_with(k, Some(f), g, g.node(j))?;
        Ok(near + far.value)
    })?;
    c.truncated = truncated;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{make_additive, make_exponential, make_multiplicative};

    fn exp_one() -> Kernel {
        make_exponential(BoundedFunction::constant(1.0), 1.0).unwrap()
    }

    fn multiplicative() -> Kernel {
        make_multiplicative(
            BoundedFunction::exp_decay(1.0, 1.0),
            BoundedFunction::parse("1+1/(1+t)").unwrap(),
        )
        .unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn grid_shape() {
        let g = Grid::new(0.25, 10.0).unwrap();
        assert_eq!(g.steps(), 40);
        assert_eq!(g.eval_times(), vec![2.0, 3.0, 4.5, 6.75, 10.0]);
        assert!(Grid::new(0.3, 1.0).is_err());
        assert!(Grid::new(0.0, 1.0).is_err());
        assert!(g.clone().with_eval_times(&[1.1]).is_err());
        let c = Grid::uniform(0.25, 4.0, 4).unwrap().coarsened(2).unwrap();
        assert_eq!(c.eval_times(), vec![1.0, 2.0, 3.0, 4.0]);
        assert!(Grid::uniform(0.25, 4.0, 1).unwrap().coarsened(2).is_err());
    }

    #[test]
    fn trapezoid_basics() {
        assert_eq!(trapezoid(&[], 1.0), 0.0);
        assert_eq!(trapezoid(&[3.0], 1.0), 0.0);
        assert_eq!(trapezoid(&[1.0, 1.0, 1.0], 0.5), 1.0);
    }

    #[test]
    fn distance_curves() {
        let flat = make_additive(BoundedFunction::exp_decay(1.0, 1.0), BoundedFunction::zero()).unwrap();
        let g = Grid::new(1.0 / 64.0, 10.0).unwrap();
        assert!(l2_distance_to_limit(&flat, &g).unwrap().values().iter().all(|v| *v == 0.0));

        let d = l2_distance_to_limit(&multiplicative(), &g).unwrap();
        // (1/121)(1 - e^{-20})/2 = 4.132231404958678e-3
        close(d.last().unwrap().1, 4.132231404958678e-3, 1e-6);

        let d = l2_distance_to_limit(&exp_one(), &g).unwrap();
        close(d.last().unwrap().1, 0.5 * (1.0 - (-20.0f64).exp()), 1e-4);

        let custom = crate::kernel::make_custom(1, &["1"], None, None).unwrap();
        assert!(matches!(l2_distance_to_limit(&custom, &g), Err(Error::MissingLimit)));
    }

    #[test]
    fn limit_tails() {
        let g = Grid::new(1.0 / 64.0, 8.0).unwrap();
        let tm = limit_tail_mass(&multiplicative(), &g, 1.0).unwrap();
        assert!(!tm.truncated);
        close(tm.value, 0.06766764161830635, 1e-5);
        let z = limit_tail_mass(&exp_one(), &g, 1.0).unwrap();
        assert_eq!(z, TailMass { value: 0.0, truncated: false });
        assert!(limit_tail_mass(&exp_one(), &g, 9.0).is_err());

        let parsed = make_additive(BoundedFunction::parse("exp(-s)").unwrap(), BoundedFunction::zero())
            .unwrap();
        assert!(limit_tail_mass(&parsed, &g, 1.0).unwrap().truncated);
    }

    #[test]
    fn tail_and_compact() {
        let g = Grid::new(1.0 / 128.0, 8.0).unwrap();
        let k = exp_one();
        assert_eq!(tail_mass(&k, &g, 5.0, 5.0).unwrap(), 0.0);
        close(tail_mass(&k, &g, 4.0, 5.0).unwrap(), 0.43233235838169365, 1e-5);
        assert!(matches!(tail_mass(&k, &g, 5.0, 4.0), Err(Error::Ordering { .. })));
        let c = make_additive(BoundedFunction::zero(), BoundedFunction::constant(2.0)).unwrap();
        close(tail_mass(&c, &g, 1.0, 3.5).unwrap(), 10.0, 1e-12);

        // (1/121)(1 - e^{-2})/2
        let expected = (1.0 - (-2.0f64).exp()) / 242.0;
        let g10 = Grid::new(1.0 / 128.0, 10.0).unwrap();
        close(compact_distance(&multiplicative(), &g10, 1.0, 10.0).unwrap(), expected, 1e-6);
    }

    #[test]
    fn log_weighted_skips_small_times() {
        let g = Grid::new(0.25, 8.0).unwrap().with_eval_times(&[0.5, 1.0, 2.0, 8.0]).unwrap();
        let c = log_weighted_distance(&exp_one(), &g).unwrap();
        assert_eq!(c.skipped, vec![0.5, 1.0]);
        assert_eq!(c.times(), vec![2.0, 8.0]);
        let g = Grid::new(0.25, 8.0).unwrap().with_eval_times(&[0.5]).unwrap();
        assert!(matches!(log_weighted_distance(&exp_one(), &g), Err(Error::LogDomain)));
    }

    #[test]
    fn derivative_and_diagonal() {
        let g = Grid::new(1.0 / 256.0, 4.0).unwrap();
        let d = derivative_mass(&exp_one(), &g).unwrap();
        for (t, v) in &d.points {
            close(*v, 0.5 * (1.0 - (-2.0 * t).exp()), 1e-5);
        }
        let flat = make_additive(BoundedFunction::exp_decay(1.0, 1.0), BoundedFunction::constant(0.5)).unwrap();
        assert!(derivative_mass(&flat, &g).unwrap().values().iter().all(|v| *v == 0.0));
        let nod1 = crate::kernel::make_custom(1, &["1"], None, None).unwrap();
        assert!(matches!(derivative_mass(&nod1, &g), Err(Error::MissingDerivative)));

        close(diagonal_mass(&exp_one(), 1.0, 2.0, &g).unwrap(), 1.0, 1e-14);
        assert_eq!(diagonal_mass(&exp_one(), 1.3, 1.3, &g).unwrap(), 0.0);
        close(diagonal_mass(&exp_one(), 0.1, 0.35, &g).unwrap(), 0.25, 1e-14);
        let dec = make_exponential(BoundedFunction::exp_decay(1.0, 1.0), 1.0).unwrap();
        close(diagonal_mass(&dec, 0.0, 1.0, &g).unwrap(), 0.43233235838169365, 1e-5);
        assert!(matches!(diagonal_mass(&dec, 2.0, 1.0, &g), Err(Error::Ordering { .. })));
    }

    #[test]
    fn isometry_predictions() {
        let g = Grid::new(1.0 / 256.0, 2.0).unwrap();
        let p = isometry_prediction(&exp_one(), &BoundedFunction::constant(1.0), &g).unwrap();
        close(p.last().unwrap().1, 0.4908421805556329, 1e-5);
        let z = isometry_prediction(&exp_one(), &BoundedFunction::zero(), &g).unwrap();
        assert!(z.values().iter().all(|v| *v == 0.0));

        let g = Grid::new(1.0 / 128.0, 10.0).unwrap();
        let p = isometry_prediction(&multiplicative(), &BoundedFunction::constant(1.0), &g).unwrap();
        let expected = (1.0 - (-20.0f64).exp()) / 242.0 + (-20.0f64).exp() / 2.0;
        close(p.last().unwrap().1, expected, 1e-6);
        assert!(!p.truncated);
    }

    #[test]
    fn csv_output() {
        let g = Grid::new(0.5, 3.0).unwrap();
        let c = l2_distance_to_limit(&exp_one(), &g).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,value\n2.0000000000000000e0,"));
        assert_eq!(text.lines().count(), 3);
        for line in text.lines().skip(1) {
            let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert!(c.points.iter().any(|p| p.1.to_bits() == v.to_bits()));
        }
    }
}
