//! One function per subcommand. Each returns the staged artifacts, a JSON
//! result and a short text table; `lib.rs` commits and prints them.

use crate::config::{Resolved, RunConfig};
use crate::output::Artifacts;
use crate::CliError;
use itovolterra::criteria::{
    check_additive_conditions, check_as_necessary, check_as_sufficient,
    check_diagonal_window_variant, check_msq_condition, check_multiplicative_condition,
    check_split_conditions, check_window_condition, CriterionVerdict,
};
use itovolterra::diagnostics::{counterexample_study, msq_convergence_study, ou_sharpness_study};
use itovolterra::kernel::KernelFamily;
use itovolterra::quadrature::{csv_float, l2_distance_to_limit};
use itovolterra::stochastic::{fubini_decomposition, generate_ensemble, lil_statistic_from, volterra_integral};
use itovolterra::{Error, Grid};
use serde::Serialize;
use serde_json::{json, Value};

pub struct Outcome {
    pub artifacts: Artifacts,
    pub result: Value,
    pub table: String,
}

fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<String>| {
        cells
            .iter()
            .zip(&width)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = vec![line(headers.iter().map(|h| h.to_string()).collect())];
    out.push(line(width.iter().map(|w| "-".repeat(*w)).collect()));
    out.extend(rows.iter().map(|r| line(r.clone())));
    out.join("\n") + "\n"
}

fn num(x: f64) -> String {
    format!("{x:.6e}")
}

fn csv_rows<W: std::io::Write>(out: W, header: &[&str], rows: Vec<Vec<String>>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()
}

#[derive(Debug, Clone, Serialize)]
pub struct Skipped {
    pub criterion: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Battery {
    pub kernel: String,
    pub verdicts: Vec<CriterionVerdict>,
    pub extras: serde_json::Map<String, Value>,
    pub skipped: Vec<Skipped>,
}

/// Errors that mean "prerequisite absent" rather than "run failed".
fn skippable(e: &Error) -> bool {
    matches!(
        e,
        Error::MissingLimit
            | Error::MissingDerivative
            | Error::HorizonTooShort(_)
            | Error::EmptyWindow { .. }
            | Error::LogDomain
    )
}

impl Battery {
    fn take<T>(&mut self, criterion: &str, r: itovolterra::Result<T>) -> Result<Option<T>, CliError> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(e) if skippable(&e) => {
                self.skipped.push(Skipped {
                    criterion: criterion.to_string(),
                    reason: e.to_string(),
                });
                Ok(None)
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn find(&self, criterion: &str) -> Option<&CriterionVerdict> {
        self.verdicts.iter().find(|v| v.criterion == criterion)
    }
}

/// Every criterion the kernel's data allows; the rest are listed as
/// skipped with the reason.
pub fn battery(cfg: &RunConfig, res: &Resolved) -> Result<Battery, CliError> {
    let (k, g, tol) = (&res.kernel, &res.grid, &cfg.tolerances);
    let mut b = Battery {
        kernel: k.label().to_string(),
        verdicts: Vec::new(),
        extras: serde_json::Map::new(),
        skipped: Vec::new(),
    };
    if let Some(v) = b.take("limit-l2-distance", check_msq_condition(k, g, tol))? {
        b.verdicts.push(v);
    }
    if let Some(v) = b.take("as-necessary", check_as_necessary(k, g, tol))? {
        b.verdicts.push(v);
    }
    if let Some(s) = b.take("split-conditions", check_split_conditions(k, g, tol))? {
        let msq_holds = b.find("limit-l2-distance").map(|v| v.holds());
        if let Some(h) = msq_holds {
            b.extras.insert("split-agrees-with-msq".into(), json!(h == s.both_hold()));
        }
        b.verdicts.push(s.tail);
        b.verdicts.push(s.compact);
    }
    let sched = &res.schedule;
    if let Some(s) = b.take("as-sufficient", check_as_sufficient(k, g, sched, tol))? {
        b.extras.insert("as-sufficient-overall".into(), json!(s.overall));
        b.extras.insert("as-sufficient-message".into(), json!(s.message));
        b.verdicts.push(s.log_weighted);
        b.verdicts.push(s.derivative_growth);
        b.verdicts.push(s.diagonal_growth);
    }
    if let Some(v) = b.take("diagonal-window-mass", check_diagonal_window_variant(k, g, sched, tol))? {
        b.verdicts.push(v);
    }
    match k.family() {
        KernelFamily::Additive { h_sharp, .. } => {
            if let Some(a) = b.take("additive", check_additive_conditions(h_sharp, g, tol))? {
                b.verdicts.push(a.msq);
                b.verdicts.push(a.as_);
            }
        }
        KernelFamily::Multiplicative { h_sharp, .. } => {
            if let Some(v) = b.take("multiplicative-limit", check_multiplicative_condition(h_sharp, g, tol))? {
                b.verdicts.push(v);
            }
        }
        KernelFamily::Exponential { sigma, lambda } if *lambda == 1.0 => {
            if let Some(w) = b.take("window", check_window_condition(sigma, g, tol))? {
                b.extras.insert("window-l-estimate".into(), json!(w.l_estimate));
                b.extras.insert("window-diverging".into(), json!(w.diverging));
                b.verdicts.push(w.msq);
                b.verdicts.push(w.log_weighted);
            }
        }
        KernelFamily::Exponential { .. } => b.skipped.push(Skipped {
            criterion: "window".into(),
            reason: "unit-window conditions assume lambda = 1".into(),
        }),
        _ => {}
    }
    Ok(b)
}

fn battery_table(b: &Battery) -> String {
    let mut rows: Vec<Vec<String>> = b
        .verdicts
        .iter()
        .map(|v| {
            vec![
                v.criterion.clone(),
                v.verdict.to_string(),
                v.last_value().map_or("-".into(), num),
                v.flags.join("; "),
            ]
        })
        .collect();
    for s in &b.skipped {
        rows.push(vec![s.criterion.clone(), "skipped".into(), "-".into(), s.reason.clone()]);
    }
    let mut out = format!("kernel: {}\n", b.kernel);
    out += &table(&["criterion", "verdict", "last value", "notes"], &rows);
    for (key, v) in &b.extras {
        out += &format!("{key}: {v}\n");
    }
    out
}

pub fn cmd_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let res = cfg.resolve()?;
    let b = battery(cfg, &res)?;
    let mut artifacts = Artifacts::new(cfg);
    artifacts.json("verdicts.json", &b);
    Ok(Outcome {
        artifacts,
        table: battery_table(&b),
        result: serde_json::to_value(&b).expect("battery serializes"),
    })
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let res = cfg.resolve()?;
    let e = cfg.ensemble(&res.grid)?;
    let r = volterra_integral(&res.kernel, &res.f, &e, &res.grid)?;
    let mut artifacts = Artifacts::new(cfg);
    artifacts.csv("paths.csv", |buf| r.write_csv(buf))?;
    let summary = r.summary_json();
    artifacts.json("summary.json", &summary);
    let rows: Vec<Vec<String>> = r
        .moments()
        .iter()
        .map(|m| vec![num(m.t), m.component.to_string(), num(m.mean), num(m.variance)])
        .collect();
    Ok(Outcome {
        artifacts,
        table: table(&["t", "component", "mean", "variance"], &rows),
        result: summary,
    })
}

pub fn cmd_isometry(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let res = cfg.resolve()?;
    let e = cfg.ensemble(&res.grid)?;
    let cmp = msq_convergence_study(&res.kernel, &res.f, &e, &res.grid, &cfg.tolerances)?;
    let mut artifacts = Artifacts::new(cfg);
    let csv: Vec<Vec<String>> = cmp
        .rows
        .iter()
        .map(|r| {
            vec![
                csv_float(r.t),
                csv_float(r.mc),
                csv_float(r.std_error),
                csv_float(r.prediction),
                csv_float(r.truncation),
                r.pass.to_string(),
            ]
        })
        .collect();
    artifacts.csv("isometry.csv", |buf| {
        csv_rows(buf, &["t", "mc", "std_error", "prediction", "truncation", "pass"], csv)
    })?;
    artifacts.json("isometry.json", &cmp);
    let rows: Vec<Vec<String>> = cmp
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.t),
                num(r.mc),
                num(r.std_error),
                num(r.prediction - r.truncation),
                if r.pass { "pass" } else { "FAIL" }.into(),
            ]
        })
        .collect();
    let mut text = table(&["t", "mc", "se", "prediction", "check"], &rows);
    text += &format!("all rows within 3 SE + {} dt: {}\n", cmp.c_disc, cmp.all_pass);
    Ok(Outcome {
        artifacts,
        table: text,
        result: serde_json::to_value(&cmp).expect("comparison serializes"),
    })
}

/// Residual band expected when `dt` halves.
pub const FUBINI_BAND: (f64, f64) = (1.5, 3.0);

/// Runs the decomposition at the configured `dt` and at `dt / 2`, the
/// coarse increments being sums of the fine ones.
pub fn cmd_fubini(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let res = cfg.resolve()?;
    let mut fine_cfg = cfg.clone();
    fine_cfg.grid.dt = cfg.grid.dt / 2.0;
    let fine = fine_cfg.grid()?;
    let coarse: Grid = fine.coarsened(2)?;
    let e = generate_ensemble(cfg.ensemble.seed, cfg.ensemble.paths, cfg.ensemble.dim, &fine)?;
    let a = fubini_decomposition(&res.kernel, &res.f, &e.coarsened(2)?, &coarse)?;
    let b = fubini_decomposition(&res.kernel, &res.f, &e, &fine)?;
    let ratio = a.max_residual / b.max_residual;
    let mut artifacts = Artifacts::new(cfg);
    for (name, rep) in [("fubini_dt.csv", &a), ("fubini_dt2.csv", &b)] {
        let rows = rep
            .max_residual_by_time()
            .into_iter()
            .map(|(t, r)| vec![csv_float(t), csv_float(r)])
            .collect();
        artifacts.csv(name, |buf| csv_rows(buf, &["t", "max_residual"], rows))?;
    }
    let in_band = (FUBINI_BAND.0..=FUBINI_BAND.1).contains(&ratio);
    let result = json!({
        "dt": coarse.dt(),
        "max_residual_dt": a.max_residual,
        "max_residual_dt2": b.max_residual,
        "ratio": ratio,
        "band": [FUBINI_BAND.0, FUBINI_BAND.1],
        "in_band": in_band,
    });
    artifacts.json("fubini.json", &result);
    let text = table(
        &["dt", "max residual"],
        &[
            vec![num(coarse.dt()), num(a.max_residual)],
            vec![num(fine.dt()), num(b.max_residual)],
        ],
    ) + &format!("ratio {ratio:.4} (expected {} to {}): {}\n", FUBINI_BAND.0, FUBINI_BAND.1, if in_band { "ok" } else { "outside" });
    Ok(Outcome {
        artifacts,
        table: text,
        result,
    })
}

fn integer_horizon(g: &Grid) -> Result<usize, CliError> {
    let n = g.t_max().floor();
    if n < 10.0 {
        return Err(CliError::Config(format!("t_max = {} gives fewer than 10 integer times", g.t_max())));
    }
    Ok(n as usize)
}

/// `max_n |B(n)| / sqrt(2 n log log n)` over `n` from 3, 10 and 100 up to
/// `N = floor(t_max)`; the per-path CSV uses `n >= 3`.
pub fn cmd_lil(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let res = cfg.resolve()?;
    let n = integer_horizon(&res.grid)?;
    let e = cfg.ensemble(&res.grid)?;
    let mut medians = serde_json::Map::new();
    let mut per_path = Vec::new();
    let mut rows = Vec::new();
    for start in [3usize, 10, 100] {
        if start > n {
            continue;
        }
        let r = lil_statistic_from(&e, n, start)?;
        medians.insert(start.to_string(), json!(r.median));
        rows.push(vec![start.to_string(), num(r.median)]);
        if start == 3 {
            per_path = r.per_path;
        }
    }
    let mut artifacts = Artifacts::new(cfg);
    let csv = per_path
        .iter()
        .enumerate()
        .map(|(m, v)| vec![m.to_string(), csv_float(*v)])
        .collect();
    artifacts.csv("lil.csv", |buf| csv_rows(buf, &["path", "statistic"], csv))?;
    let result = json!({
        "horizon": n,
        "paths": e.paths(),
        "median": medians.get("3").cloned().unwrap_or(Value::Null),
        "median_by_start": medians,
    });
    artifacts.json("lil.json", &result);
    Ok(Outcome {
        artifacts,
        table: format!("N = {n}, {} paths\n", e.paths()) + &table(&["from n", "median"], &rows),
        result,
    })
}

fn msq_curve(res: &Resolved, artifacts: &mut Artifacts) -> Result<Option<f64>, CliError> {
    if !res.kernel.has_limit() {
        return Ok(None);
    }
    let c = l2_distance_to_limit(&res.kernel, &res.grid)?;
    artifacts.csv("msq_curve.csv", |buf| c.write_csv(buf))?;
    Ok(c.last().map(|p| p.1))
}

/// Built-in study for a fixture: the criterion battery plus its
/// characteristic simulation.
pub fn cmd_example(cfg: &RunConfig, name: &str) -> Result<Outcome, CliError> {
    let mut cfg = cfg.clone();
    cfg.kernel.example = Some(name.to_string());
    let res = cfg.resolve()?;
    let fx = res.fixture.clone().expect("example resolves to a fixture");
    let b = battery(&cfg, &res)?;
    let mut artifacts = Artifacts::new(&cfg);
    artifacts.json("verdicts.json", &b);
    let mut result = json!({ "example": fx.name, "description": fx.description });
    let mut text = format!("{}: {}\n", fx.name, fx.description);
    if let Some(v) = msq_curve(&res, &mut artifacts)? {
        result["final_msq"] = json!(v);
        text += &format!("final mean-square distance to the limit: {}\n", num(v));
    }
    let e = cfg.ensemble(&res.grid)?;
    if let (Some(h), KernelFamily::Additive { .. }) = (&fx.h_sharp, fx.kernel.family()) {
        let n = integer_horizon(&res.grid)?;
        let rep = counterexample_study(h, &e, n, 0.05)?;
        let rows = rep
            .running_max
            .iter()
            .zip(&rep.oscillation)
            .enumerate()
            .map(|(m, (r, o))| vec![m.to_string(), csv_float(*r), csv_float(*o)])
            .collect();
        artifacts.csv("counterexample.csv", |buf| csv_rows(buf, &["path", "running_max", "oscillation"], rows))?;
        text += &format!(
            "median running max {} (limsup prediction {}), oscillating paths {:.1}%\n",
            num(rep.median),
            num(rep.prediction),
            100.0 * rep.oscillation_fraction
        );
        result["counterexample"] = json!({
            "horizon": rep.horizon,
            "median_running_max": rep.median,
            "prediction": rep.prediction,
            "oscillation_fraction": rep.oscillation_fraction,
            "eps": rep.eps,
        });
    }
    if let Some(sigma) = &fx.sigma {
        // The trailing windows need several eval times each.
        let stride = (res.grid.steps() / 100).max(1);
        let g = Grid::uniform(res.grid.dt(), res.grid.t_max(), stride)?;
        let ou = ou_sharpness_study(sigma, &e, &g, &cfg.tolerances)?;
        let rows = ou
            .msq_curve
            .iter()
            .map(|(t, mc, p)| vec![csv_float(*t), csv_float(*mc), csv_float(*p)])
            .collect();
        artifacts.csv("ou_msq.csv", |buf| csv_rows(buf, &["t", "mc", "prediction"], rows))?;
        text += &format!(
            "observed behavior: {} (oscillating paths {:.1}%)\n",
            serde_json::to_value(ou.behavior).expect("behavior serializes").as_str().unwrap_or("?"),
            100.0 * ou.oscillation_fraction
        );
        result["ou"] = serde_json::to_value(&ou).expect("study serializes");
    }
    artifacts.json("study.json", &result);
    text += &battery_table(&b);
    result["battery"] = serde_json::to_value(&b).expect("battery serializes");
    Ok(Outcome {
        artifacts,
        table: text,
        result,
    })
}
