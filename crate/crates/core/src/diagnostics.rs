//! Monte Carlo studies: mean-square error against the isometry, the
//! four-term decomposition of the tail supremum, the iterated-logarithm
//! counterexample, and the behavior of exponential kernels with slowly
//! decaying volatility.

use crate::criteria::{check_window_condition, ThetaSchedule, Tolerances, WindowVerdicts};
use crate::error::{Error, Result};
use crate::function::BoundedFunction;
use crate::kernel::{make_exponential, Kernel, Scratch};
use crate::matrix::{frobenius_sq, matmul_into};
use crate::quadrature::{
    derivative_mass_at, diagonal_mass, isometry_prediction, limit_mass_between, limit_tail_weighted,
    weighted_distance_at, Grid,
};
use crate::stats;
use crate::stochastic::{check_dims, ito_sum, volterra_integral, BrownianEnsemble};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MsqRow {
    pub t: f64,
    /// Mean over paths of `‖X_f(t) − X_f*‖²`, with `X_f*` cut at the horizon.
    pub mc: f64,
    pub std_error: f64,
    /// `∫₀ᵗ ‖(H − H_∞) f‖² + ∫_t^∞ ‖H_∞ f‖²`.
    pub prediction: f64,
    /// Part of the prediction beyond the horizon, missing from `mc`.
    pub truncation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MsqComparison {
    pub rows: Vec<MsqRow>,
    pub dt: f64,
    pub c_disc: f64,
    /// Set when the prediction itself stops at the horizon.
    pub truncated: bool,
    pub all_pass: bool,
}

impl MsqComparison {
    pub fn mc_curve(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.t, r.mc)).collect()
    }
}

/// Compares the Monte Carlo mean-square distance to the limit integral with
/// the isometry prediction. A row passes when
/// `|mc − (prediction − truncation)| <= 3 SE + c_disc dt`.
pub fn msq_convergence_study(
    k: &Kernel,
    f: &BoundedFunction,
    e: &BrownianEnsemble,
    g: &Grid,
    tol: &Tolerances,
) -> Result<MsqComparison> {
    k.limit().ok_or(Error::MissingLimit)?;
    let pred = isometry_prediction(k, f, g)?;
    let r = volterra_integral(k, f, e, g)?;
    let beyond = limit_tail_weighted(k, f, g, g.t_max())?.value;
    let mut rows = Vec::new();
    for (q, &(t, p)) in pred.points.iter().enumerate() {
        let se2 = r.squared_errors(q)?;
        let mc = stats::mean(&se2);
        let std_error = stats::std_error(&se2);
        let pass = (mc - (p - beyond)).abs() <= 3.0 * std_error + tol.c_disc * g.dt();
        rows.push(MsqRow {
            t,
            mc,
            std_error,
            prediction: p,
            truncation: beyond,
            pass,
        });
    }
    Ok(MsqComparison {
        all_pass: rows.iter().all(|r| r.pass),
        rows,
        dt: g.dt(),
        c_disc: tol.c_disc,
        truncated: pred.truncated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MachineryRow {
    pub n: u64,
    pub t_n: f64,
    pub t_next: f64,
    /// `∫₀^{t_n} ‖(H(t_n,s) − H_∞(s)) f(s)‖² ds`.
    pub v_sq: f64,
    pub v_sq_log_t: f64,
    /// `∫_{t_n}^{t_{n+1}} ‖H(s,s)‖² ds · sup ‖f‖²`.
    pub w: f64,
    pub w_log_n: f64,
    /// Path means of `|X̃(t_n)|²`, `sup|∫ H_∞ f dB|²`, `sup|∫ H(s,s) f dB|²`
    /// over the window, and of `∫ |∫₀ᵘ ∂₁H f dB| du`.
    pub mc: [f64; 4],
    /// Matching bounds: `v_n²`, `4 ∫ ‖H_∞ f‖²`, `4 w_n`, and
    /// `∫ (∫₀ᵘ ‖∂₁H f‖²)^{1/2} du`.
    pub bounds: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionDiagnostics {
    pub schedule: ThetaSchedule,
    pub sup_f_sq: f64,
    pub paths: usize,
    pub rows: Vec<MachineryRow>,
}

/// Sequences behind the almost-sure argument on windows
/// `[t_n, t_{n+1}]`, `t_n = n^theta` snapped to grid nodes, for
/// `n = 2, 3, …` while `t_{n+1} <= t_max`. Window suprema are grid suprema.
pub fn proof_machinery_report(
    k: &Kernel,
    f: &BoundedFunction,
    e: &BrownianEnsemble,
    g: &Grid,
    sched: &ThetaSchedule,
) -> Result<DecompositionDiagnostics> {
    sched.validate()?;
    let limit = k.limit().ok_or(Error::MissingLimit)?;
    if !k.has_d1() {
        return Err(Error::MissingDerivative);
    }
    check_dims(k, f, e, g)?;
    let mut ns = Vec::new();
    let mut n = 2u64;
    while sched.time(n + 1) <= g.t_max() {
        ns.push(n);
        n += 1;
    }
    if ns.is_empty() {
        return Err(Error::HorizonTooShort(format!(
            "3^theta exceeds t_max = {}",
            g.t_max()
        )));
    }
    let idx: Vec<(usize, usize)> = ns
        .iter()
        .map(|&n| (g.snap(sched.time(n)), g.snap(sched.time(n + 1))))
        .collect();
    let sup_f_sq = match f.sup_bound() {
        Some(b) => b * b,
        None => f.sampled_sup_sq((0..=g.steps()).map(|j| g.node(j)))?,
    };
    let (nr, d) = (k.dim(), e.dim());
    let block = nr * d;
    let top = idx.last().unwrap().1;

    // Deterministic sequences and bounds.
    let det = ns
        .par_iter()
        .zip(&idx)
        .map(|(&n, &(a, b))| {
            let v_sq = weighted_distance_at(k, f, g, a)?;
            let w = diagonal_mass(k, g.node(a), g.node(b), g)? * sup_f_sq;
            let lim = limit_mass_between(k, f, g, a, b)?;
            let roots = (a..=b)
                .map(|i| Ok(derivative_mass_at(k, f, g, i)?.sqrt()))
                .collect::<Result<Vec<f64>>>()?;
            let b4 = crate::quadrature::trapezoid(&roots, g.dt());
            Ok((n, v_sq, w, [v_sq, 4.0 * lim, 4.0 * w, b4]))
        })
        .collect::<Result<Vec<_>>>()?;

    // Weight rows shared by all paths.
    let mut sc = Scratch::new(nr, d);
    let mut lim_rows = vec![0.0; top * block];
    let mut diag_rows = vec![0.0; top * block];
    for j in 0..top {
        let s = g.node(j);
        limit.eval_into(s, &mut sc.l)?;
        f.eval_into(s, &mut sc.f)?;
        matmul_into(&sc.l, &sc.f, nr, nr, d, &mut lim_rows[j * block..(j + 1) * block]);
        k.apply_into(s, s, f, &mut sc, &mut diag_rows[j * block..(j + 1) * block])?;
    }
    let first = idx[0].0;
    let direct_rows = idx
        .par_iter()
        .map(|&(a, _)| {
            let mut sc = Scratch::new(nr, d);
            let t = g.node(a);
            let mut rows = vec![0.0; a * block];
            for j in 0..a {
                let out = &mut rows[j * block..(j + 1) * block];
                k.apply_into(t, g.node(j), f, &mut sc, out)?;
                for q in 0..block {
                    out[q] -= lim_rows[j * block + q];
                }
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let d1_rows = (first..=top)
        .into_par_iter()
        .map(|i| {
            let mut sc = Scratch::new(nr, d);
            let u = g.node(i);
            let mut rows = vec![0.0; i * block];
            for j in 0..i {
                let s = g.node(j);
                k.eval_d1_into(u, s, &mut sc.h)?;
                f.eval_into(s, &mut sc.f)?;
                matmul_into(&sc.h, &sc.f, nr, nr, d, &mut rows[j * block..(j + 1) * block]);
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;

    // Per path, per window: the four terms.
    let per_path: Vec<Vec<[f64; 4]>> = (0..e.paths())
        .into_par_iter()
        .map(|m| {
            let inc = e.increments(m);
            let mut inner = vec![0.0; nr];
            let norms: Vec<f64> = (first..=top)
                .map(|i| {
                    ito_sum(&d1_rows[i - first], &inc, i, nr, d, &mut inner);
                    frobenius_sq(&inner).sqrt()
                })
                .collect();
            let mut x = vec![0.0; nr];
            idx.iter()
                .enumerate()
                .map(|(q, &(a, b))| {
                    ito_sum(&direct_rows[q], &inc, a, nr, d, &mut x);
                    let t1 = frobenius_sq(&x);
                    let (mut acc2, mut acc3) = (vec![0.0; nr], vec![0.0; nr]);
                    let (mut t2, mut t3): (f64, f64) = (0.0, 0.0);
                    for j in a..b {
                        let db = &inc[j * d..(j + 1) * d];
                        for r in 0..nr {
                            for c in 0..d {
                                acc2[r] += lim_rows[j * block + r * d + c] * db[c];
                                acc3[r] += diag_rows[j * block + r * d + c] * db[c];
                            }
                        }
                        t2 = t2.max(frobenius_sq(&acc2));
                        t3 = t3.max(frobenius_sq(&acc3));
                    }
                    let t4 = crate::quadrature::trapezoid(&norms[a - first..=b - first], g.dt());
                    [t1, t2, t3, t4]
                })
                .collect()
        })
        .collect();

    let rows = det
        .into_iter()
        .zip(&idx)
        .enumerate()
        .map(|(q, ((n, v_sq, w, bounds), &(a, b)))| {
            let mut mc = [0.0; 4];
            for (c, slot) in mc.iter_mut().enumerate() {
                let xs: Vec<f64> = per_path.iter().map(|p| p[q][c]).collect();
                *slot = stats::mean(&xs);
            }
            let t_n = g.node(a);
            MachineryRow {
                n,
                t_n,
                t_next: g.node(b),
                v_sq,
                v_sq_log_t: if t_n > 0.0 { v_sq * t_n.ln() } else { 0.0 },
                w,
                w_log_n: w * (n as f64).ln(),
                mc,
                bounds,
            }
        })
        .collect();
    Ok(DecompositionDiagnostics {
        schedule: *sched,
        sup_f_sq,
        paths: e.paths(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub horizon: usize,
    /// Per path `max_{1 <= n <= N} |H♯(n) B(n)|`.
    pub running_max: Vec<f64>,
    pub median: f64,
    /// Limsup predicted by the law of the iterated logarithm.
    pub prediction: f64,
    /// Per path `max − min` of `H♯(t) B(t)` over nodes in `[N/2, N]`.
    pub oscillation: Vec<f64>,
    pub eps: f64,
    pub oscillation_fraction: f64,
}

/// Tracks `H♯(t) B(t)`, the part of an additive Volterra integral that
/// does not settle when `H♯` decays like `1/sqrt(t log log t)`.
pub fn counterexample_study(
    h_sharp: &BoundedFunction,
    e: &BrownianEnsemble,
    horizon: usize,
    eps: f64,
) -> Result<CounterexampleReport> {
    if horizon < 1000 {
        return Err(Error::HorizonTooShort(format!("N = {horizon} < 1000")));
    }
    if !h_sharp.is_scalar() {
        return Err(Error::DimensionMismatch("H♯ must be scalar".into()));
    }
    let per_unit = (1.0 / e.dt()).round();
    if (per_unit * e.dt() - 1.0).abs() > 1e-9 || per_unit < 1.0 {
        return Err(Error::InvalidGrid(format!(
            "dt = {} does not place nodes on the integers",
            e.dt()
        )));
    }
    let per_unit = per_unit as usize;
    let last = horizon * per_unit;
    if last > e.steps() {
        return Err(Error::HorizonTooShort(format!(
            "N = {horizon} beyond the ensemble horizon {}",
            e.steps() as f64 * e.dt()
        )));
    }
    let h: Vec<f64> = (0..=last)
        .map(|j| h_sharp.eval_scalar(j as f64 * e.dt()))
        .collect::<Result<_>>()?;
    let d = e.dim();
    let from = (horizon / 2) * per_unit;
    let stats_per_path: Vec<(f64, f64)> = (0..e.paths())
        .into_par_iter()
        .map(|m| {
            let b = e.brownian_path(m);
            let run = (1..=horizon)
                .map(|n| (h[n * per_unit] * b[n * per_unit * d]).abs())
                .fold(0.0, f64::max);
            let (lo, hi) = (from..=last)
                .map(|j| h[j] * b[j * d])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            (run, hi - lo)
        })
        .collect();
    let running_max: Vec<f64> = stats_per_path.iter().map(|p| p.0).collect();
    let oscillation: Vec<f64> = stats_per_path.iter().map(|p| p.1).collect();
    let oscillation_fraction =
        oscillation.iter().filter(|o| **o > eps).count() as f64 / oscillation.len() as f64;
    Ok(CounterexampleReport {
        horizon,
        median: stats::median(&running_max),
        prediction: std::f64::consts::SQRT_2,
        running_max,
        oscillation,
        eps,
        oscillation_fraction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Behavior {
    ConvergesToZero,
    BoundedOscillating,
    Unbounded,
}

/// Heuristic thresholds of the behavior classifier.
pub const CONVERGED_MEDIAN_SUP: f64 = 0.05;
pub const UNBOUNDED_GROWTH: f64 = 2.0;
pub const OSCILLATION_EPS: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OuSharpness {
    /// `(t, path mean of Y(t)², predicted E[Y(t)²])`.
    pub msq_curve: Vec<(f64, f64, f64)>,
    /// `(a, b, median over paths of sup |Y|)` on three trailing windows.
    pub windows: Vec<(f64, f64, f64)>,
    /// Fraction of paths with `max − min` of `Y` above
    /// [`OSCILLATION_EPS`] on the last window.
    pub oscillation_fraction: f64,
    pub window_verdicts: WindowVerdicts,
    pub behavior: Behavior,
}

/// Simulates `Y(t) = ∫₀ᵗ e^{-(t-s)} σ(s) dB(s)` and classifies it: median
/// sup of `|Y|` on the last window below [`CONVERGED_MEDIAN_SUP`] means
/// converging to zero; growth of that median by more than
/// [`UNBOUNDED_GROWTH`] from the first window means unbounded; otherwise
/// bounded and oscillating. The thresholds are heuristics.
pub fn ou_sharpness_study(
    sigma: &BoundedFunction,
    e: &BrownianEnsemble,
    g: &Grid,
    tol: &Tolerances,
) -> Result<OuSharpness> {
    let k = make_exponential(sigma.clone(), 1.0)?;
    let one = BoundedFunction::constant(1.0);
    let r = volterra_integral(&k, &one, e, g)?;
    let pred = isometry_prediction(&k, &one, g)?;
    let msq_curve = pred
        .points
        .iter()
        .enumerate()
        .map(|(q, &(t, p))| {
            let ys = r.samples(q, 0);
            (t, ys.iter().map(|y| y * y).sum::<f64>() / ys.len() as f64, p)
        })
        .collect();
    let t_max = g.t_max();
    let bounds = [(t_max / 8.0, t_max / 4.0), (t_max / 4.0, t_max / 2.0), (t_max / 2.0, t_max)];
    let mut windows = Vec::new();
    let mut oscillation_fraction = 0.0;
    for (w, &(a, b)) in bounds.iter().enumerate() {
        let ks: Vec<usize> = r
            .eval_times
            .iter()
            .enumerate()
            .filter(|(_, t)| **t >= a && **t <= b)
            .map(|(q, _)| q)
            .collect();
        if ks.len() < 2 {
            return Err(Error::EmptyWindow { a, b });
        }
        let mut sups = Vec::with_capacity(r.paths);
        let mut osc = 0usize;
        for m in 0..r.paths {
            let ys: Vec<f64> = ks.iter().map(|&q| r.value(m, q)[0]).collect();
            sups.push(ys.iter().fold(0.0f64, |acc, y| acc.max(y.abs())));
            let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
            if hi - lo > OSCILLATION_EPS {
                osc += 1;
            }
        }
        windows.push((a, b, stats::median(&sups)));
        if w == bounds.len() - 1 {
            oscillation_fraction = osc as f64 / r.paths as f64;
        }
    }
    let first = windows[0].2;
    let last = windows[2].2;
    let behavior = if last < CONVERGED_MEDIAN_SUP {
        Behavior::ConvergesToZero
    } else if last > UNBOUNDED_GROWTH * first {
        Behavior::Unbounded
    } else {
        Behavior::BoundedOscillating
    };
    Ok(OuSharpness {
        msq_curve,
        windows,
        oscillation_fraction,
        window_verdicts: check_window_condition(sigma, g, tol)?,
        behavior,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fixture;
    use crate::kernel::make_additive;
    use crate::quadrature::l2_distance_to_limit;
    use crate::stochastic::generate_ensemble;

    #[test]
    fn zero_coefficient_matches_prediction() {
        let g = Grid::new(1.0 / 16.0, 8.0).unwrap();
        let k = make_exponential(BoundedFunction::constant(1.0), 1.0).unwrap();
        let e = generate_ensemble(1, 50, 1, &g).unwrap();
        let c = msq_convergence_study(&k, &BoundedFunction::zero(), &e, &g, &Tolerances::default())
            .unwrap();
        assert!(c.all_pass);
        assert!(c.rows.iter().all(|r| r.mc == 0.0 && r.prediction == 0.0));
    }

    #[test]
    fn multiplicative_msq_decreases() {
        let fx = fixture("multiplicative").unwrap();
        let g = Grid::new(1.0 / 32.0, 10.0).unwrap();
        let e = generate_ensemble(5, 2000, 1, &g).unwrap();
        let c = msq_convergence_study(&fx.kernel, &BoundedFunction::constant(1.0), &e, &g, &Tolerances::default())
            .unwrap();
        assert!(c.all_pass, "{c:#?}");
        let mc = c.mc_curve();
        assert!(mc.last().unwrap().1 < 1e-2);
        assert!(mc.first().unwrap().1 > mc.last().unwrap().1);
    }

    #[test]
    fn machinery_matches_quadrature() {
        let fx = fixture("ou-decay").unwrap();
        let g = Grid::new(1.0 / 16.0, 40.0).unwrap();
        let e = generate_ensemble(3, 20, 1, &g).unwrap();
        let sched = ThetaSchedule::new(0.0, None, 0.9).unwrap();
        let one = BoundedFunction::constant(1.0);
        let rep = proof_machinery_report(&fx.kernel, &one, &e, &g, &sched).unwrap();
        assert_eq!(rep.rows.last().unwrap().n, 59);
        let times: Vec<f64> = rep.rows.iter().map(|r| r.t_n).collect();
        let curve = l2_distance_to_limit(&fx.kernel, &g.clone().with_eval_times(&times).unwrap()).unwrap();
        for r in &rep.rows {
            let (_, v) = curve.points.iter().find(|p| p.0 == r.t_n).copied().unwrap();
            assert_eq!(r.v_sq, v);
        }
        let tail = &rep.rows[rep.rows.len() - 5..];
        assert!(tail.iter().all(|r| r.v_sq_log_t < 1e-12 && r.w_log_n < 1e-12));
        assert!(matches!(
            proof_machinery_report(&fx.kernel, &one, &e, &g, &ThetaSchedule { q: 0.0, c_q: None, theta: 1.0 }),
            Err(Error::InvalidTheta { .. })
        ));
    }

    #[test]
    fn machinery_for_time_independent_kernel() {
        let k = make_additive(BoundedFunction::exp_decay(1.0, 1.0), BoundedFunction::zero()).unwrap();
        let g = Grid::new(1.0 / 16.0, 20.0).unwrap();
        let e = generate_ensemble(3, 50, 1, &g).unwrap();
        let sched = ThetaSchedule::new(0.0, None, 0.8).unwrap();
        let rep = proof_machinery_report(&k, &BoundedFunction::constant(1.0), &e, &g, &sched).unwrap();
        for r in &rep.rows {
            assert_eq!(r.v_sq, 0.0);
            assert_eq!(r.mc[0], 0.0);
            assert_eq!(r.mc[3], 0.0);
            assert_eq!(r.bounds[3], 0.0);
            assert!(r.bounds[1] > 0.0);
        }
    }

    #[test]
    fn counterexample_guards_and_symmetry() {
        let g = Grid::new(1.0, 2000.0).unwrap();
        let e = generate_ensemble(8, 30, 1, &g).unwrap();
        let h = fixture("additive-counterexample").unwrap().h_sharp.unwrap();
        let a = counterexample_study(&h, &e, 2000, 0.05).unwrap();
        let b = counterexample_study(&h, &e.scaled(-1.0), 2000, 0.05).unwrap();
        assert_eq!(a.running_max, b.running_max);
        assert_eq!(a.oscillation, b.oscillation);
        let z = counterexample_study(&h, &e.scaled(0.0), 2000, 0.05).unwrap();
        assert!(z.running_max.iter().all(|v| *v == 0.0));
        assert_eq!(z.oscillation_fraction, 0.0);
        assert!(matches!(counterexample_study(&h, &e, 500, 0.05), Err(Error::HorizonTooShort(_))));

        let fast = BoundedFunction::parse("exp(-t)").unwrap();
        let r = counterexample_study(&fast, &e, 2000, 0.05).unwrap();
        assert_eq!(r.oscillation_fraction, 0.0);
        for m in 0..e.paths() {
            let bp = e.brownian_path(m);
            let early = (1..=30).map(|n| ((-(n as f64)).exp() * bp[n]).abs()).fold(0.0, f64::max);
            assert_eq!(r.running_max[m], early);
        }
    }

    #[test]
    fn ou_classification() {
        let g = Grid::uniform(1.0 / 8.0, 200.0, 16).unwrap();
        let e = generate_ensemble(4, 100, 1, &g).unwrap();
        let tol = Tolerances::default();
        let z = ou_sharpness_study(&BoundedFunction::zero(), &e, &g, &tol).unwrap();
        assert_eq!(z.behavior, Behavior::ConvergesToZero);
        let d = ou_sharpness_study(&BoundedFunction::exp_decay(1.0, 1.0), &e, &g, &tol).unwrap();
        assert_eq!(d.behavior, Behavior::ConvergesToZero);
        let c = ou_sharpness_study(&BoundedFunction::constant(1.0), &e, &g, &tol).unwrap();
        assert_eq!(c.behavior, Behavior::BoundedOscillating);
        assert!(c.oscillation_fraction > 0.9);
    }
}
