use super::ensemble::{BrownianEnsemble, RNG_ID};
use crate::error::{Error, Result};
use crate::function::BoundedFunction;
use crate::kernel::{Kernel, Scratch};
use crate::matrix::matmul_into;
use crate::quadrature::{csv_float, limit_tail_mass, Grid, TailMass};
use crate::stats;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// Paths of `X_f(t_k)` at the grid's evaluation times, and of the limit
/// integral `X_f*` over the whole grid when the kernel has a limit.
#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub kernel: String,
    pub f: String,
    pub grid: Grid,
    pub seed: u64,
    pub rng: &'static str,
    pub paths: usize,
    /// Components of `X_f` (rows of `H`).
    pub dim: usize,
    pub eval_times: Vec<f64>,
    /// Variance of `X_f*` lost by stopping at the horizon (with `f ≡ 1`).
    pub limit_tail: Option<TailMass>,
    values: Vec<f64>,
    limit: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Moments {
    pub t: f64,
    pub component: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

// H(t_k, t_j) f(t_j) for j < k, stacked.
fn weight_rows(k: &Kernel, f: &BoundedFunction, g: &Grid, idx: usize) -> Result<Vec<f64>> {
    let block = k.dim() * f.cols();
    let mut sc = Scratch::new(k.dim(), f.cols());
    let mut rows = vec![0.0; idx * block];
    let t = g.node(idx);
    for j in 0..idx {
        k.apply_into(t, g.node(j), f, &mut sc, &mut rows[j * block..(j + 1) * block])?;
    }
    Ok(rows)
}

fn limit_rows(k: &Kernel, f: &BoundedFunction, g: &Grid) -> Result<Option<Vec<f64>>> {
    let Some(limit) = k.limit() else {
        return Ok(None);
    };
    let block = k.dim() * f.cols();
    let mut sc = Scratch::new(k.dim(), f.cols());
    let mut rows = vec![0.0; g.steps() * block];
    for j in 0..g.steps() {
        let s = g.node(j);
        limit.eval_into(s, &mut sc.l)?;
        f.eval_into(s, &mut sc.f)?;
        matmul_into(&sc.l, &sc.f, k.dim(), k.dim(), f.cols(), &mut rows[j * block..(j + 1) * block]);
    }
    Ok(Some(rows))
}

// Σ_{j < count} W_j ΔB_j, summed in ascending j.
pub(crate) fn ito_sum(rows: &[f64], inc: &[f64], count: usize, n: usize, d: usize, out: &mut [f64]) {
    out[..n].fill(0.0);
    for j in 0..count {
        let w = &rows[j * n * d..(j + 1) * n * d];
        let db = &inc[j * d..(j + 1) * d];
        for r in 0..n {
            let mut acc = 0.0;
            for c in 0..d {
                acc += w[r * d + c] * db[c];
            }
            out[r] += acc;
        }
    }
}

pub(crate) fn check_dims(k: &Kernel, f: &BoundedFunction, e: &BrownianEnsemble, g: &Grid) -> Result<()> {
    if f.rows() != k.dim() || f.cols() != e.dim() {
        return Err(Error::DimensionMismatch(format!(
            "H is {0}x{0}, f is {1}x{2}, B has {3} components",
            k.dim(),
            f.rows(),
            f.cols(),
            e.dim()
        )));
    }
    e.check_grid(g)
}

/// Left-point Itô sums `X_f(t_k) = Σ_{t_j < t_k} H(t_k,t_j) f(t_j) ΔB_j`
/// for every path and evaluation time. Cost is
/// `O(paths * eval times * steps)`: the kernel depends on `t_k`, so sums
/// cannot be reused across evaluation times.
pub fn volterra_integral(
    k: &Kernel,
    f: &BoundedFunction,
    e: &BrownianEnsemble,
    g: &Grid,
) -> Result<SimulationResult> {
    check_dims(k, f, e, g)?;
    let (n, d) = (k.dim(), e.dim());
    let idx = g.eval_indices().to_vec();
    let rows = idx
        .par_iter()
        .map(|&i| weight_rows(k, f, g, i))
        .collect::<Result<Vec<_>>>()?;
    let lim = limit_rows(k, f, g)?;
    let per_path: Vec<(Vec<f64>, Vec<f64>)> = (0..e.paths())
        .into_par_iter()
        .map(|m| {
            let inc = e.increments(m);
            let mut vals = vec![0.0; idx.len() * n];
            for (q, &i) in idx.iter().enumerate() {
                ito_sum(&rows[q], &inc, i, n, d, &mut vals[q * n..(q + 1) * n]);
            }
            let mut l = Vec::new();
            if let Some(lr) = &lim {
                l = vec![0.0; n];
                ito_sum(lr, &inc, g.steps(), n, d, &mut l);
            }
            (vals, l)
        })
        .collect();
    let mut values = Vec::with_capacity(e.paths() * idx.len() * n);
    let mut limit = lim.as_ref().map(|_| Vec::with_capacity(e.paths() * n));
    for (v, l) in per_path {
        values.extend(v);
        if let Some(acc) = &mut limit {
            acc.extend(l);
        }
    }
    let limit_tail = match k.limit() {
        Some(_) => Some(limit_tail_mass(k, g, g.t_max())?),
        None => None,
    };
    Ok(SimulationResult {
        kernel: k.label().to_string(),
        f: f.label().to_string(),
        grid: g.clone(),
        seed: e.master_seed(),
        rng: RNG_ID,
        paths: e.paths(),
        dim: n,
        eval_times: g.eval_times(),
        limit_tail,
        values,
        limit,
    })
}

impl SimulationResult {
    /// `X_f(t_k)` on path `m`.
    pub fn value(&self, m: usize, k: usize) -> &[f64] {
        let base = (m * self.eval_times.len() + k) * self.dim;
        &self.values[base..base + self.dim]
    }

    /// `X_f*` on path `m`.
    pub fn limit_value(&self, m: usize) -> Option<&[f64]> {
        self.limit
            .as_ref()
            .map(|l| &l[m * self.dim..(m + 1) * self.dim])
    }

    pub fn has_limit(&self) -> bool {
        self.limit.is_some()
    }

    /// Component `c` of `X_f(t_k)` across paths.
    pub fn samples(&self, k: usize, c: usize) -> Vec<f64> {
        (0..self.paths).map(|m| self.value(m, k)[c]).collect()
    }

    /// `‖X_f(t_k) − X_f*‖²` across paths.
    pub fn squared_errors(&self, k: usize) -> Result<Vec<f64>> {
        if self.limit.is_none() {
            return Err(Error::MissingLimit);
        }
        Ok((0..self.paths)
            .map(|m| {
                let x = self.value(m, k);
                let l = self.limit_value(m).unwrap();
                x.iter().zip(l).map(|(a, b)| (a - b) * (a - b)).sum()
            })
            .collect())
    }

    /// Per eval time and component moments across paths.
    pub fn moments(&self) -> Vec<Moments> {
        let mut out = Vec::new();
        for (k, &t) in self.eval_times.iter().enumerate() {
            for c in 0..self.dim {
                let xs = self.samples(k, c);
                let (skewness, excess_kurtosis) = stats::shape(&xs);
                out.push(Moments {
                    t,
                    component: c,
                    mean: stats::mean(&xs),
                    variance: stats::variance(&xs),
                    skewness,
                    excess_kurtosis,
                });
            }
        }
        out
    }

    /// Long-format CSV `path,t,component,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["path", "t", "component", "value"])?;
        for m in 0..self.paths {
            for (k, t) in self.eval_times.iter().enumerate() {
                for (c, v) in self.value(m, k).iter().enumerate() {
                    w.write_record([m.to_string(), csv_float(*t), c.to_string(), csv_float(*v)])?;
                }
            }
        }
        w.flush()
    }

    /// JSON summary: metadata, moments, and mean-square distance to the
    /// limit integral when available.
    pub fn summary_json(&self) -> serde_json::Value {
        let mse: Option<Vec<serde_json::Value>> = self.limit.as_ref().map(|_| {
            (0..self.eval_times.len())
                .map(|k| {
                    let se = self.squared_errors(k).unwrap();
                    serde_json::json!({
                        "t": self.eval_times[k],
                        "mean": stats::mean(&se),
                        "std_error": stats::std_error(&se),
                    })
                })
                .collect()
        });
        serde_json::json!({
            "kernel": self.kernel,
            "f": self.f,
            "seed": self.seed,
            "rng": self.rng,
            "paths": self.paths,
            "dt": self.grid.dt(),
            "t_max": self.grid.t_max(),
            "moments": self.moments(),
            "mean_square_error": mse,
            "limit_tail": self.limit_tail,
        })
    }
}
