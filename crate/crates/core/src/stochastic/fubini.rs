use super::ensemble::BrownianEnsemble;
use super::volterra::{check_dims, ito_sum};
use crate::error::{Error, Result};
use crate::function::BoundedFunction;
use crate::kernel::{Kernel, Scratch};
use crate::matrix::matmul_into;
use crate::quadrature::Grid;
use rayon::prelude::*;
use serde::Serialize;

/// Two discretizations of `X̃_f(t) = ∫₀ᵗ (H(t,s) − H_∞(s)) f(s) dB(s)` on
/// the same increments: the direct Itô sum, and the diagonal integral plus
/// the time integral of the inner `∂₁H` integrals.
#[derive(Debug, Clone, Serialize)]
pub struct FubiniReport {
    pub eval_times: Vec<f64>,
    pub paths: usize,
    pub dim: usize,
    direct: Vec<f64>,
    decomposed: Vec<f64>,
    /// `‖direct − decomposed‖` per path and eval time.
    residual: Vec<f64>,
    pub max_residual: f64,
}

impl FubiniReport {
    pub fn direct(&self, m: usize, k: usize) -> &[f64] {
        let b = (m * self.eval_times.len() + k) * self.dim;
        &self.direct[b..b + self.dim]
    }

    pub fn decomposed(&self, m: usize, k: usize) -> &[f64] {
        let b = (m * self.eval_times.len() + k) * self.dim;
        &self.decomposed[b..b + self.dim]
    }

    pub fn residual(&self, m: usize, k: usize) -> f64 {
        self.residual[m * self.eval_times.len() + k]
    }

    /// Largest residual over paths at each eval time.
    pub fn max_residual_by_time(&self) -> Vec<(f64, f64)> {
        self.eval_times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let worst = (0..self.paths)
                    .map(|m| self.residual(m, k))
                    .fold(0.0, f64::max);
                (t, worst)
            })
            .collect()
    }
}

/// Compares the direct sum with its stochastic-Fubini rewriting
/// `Σ_{j<k} H̃(t_j,t_j) f ΔB_j + trapezoid_u Σ_{t_j<u} ∂₁H(u,t_j) f ΔB_j`.
/// The time integral is first order in `dt`, so residuals halve with `dt`.
pub fn fubini_decomposition(
    k: &Kernel,
    f: &BoundedFunction,
    e: &BrownianEnsemble,
    g: &Grid,
) -> Result<FubiniReport> {
    let limit = k.limit().ok_or(Error::MissingLimit)?;
    if !k.has_d1() {
        return Err(Error::MissingDerivative);
    }
    check_dims(k, f, e, g)?;
    let (n, d) = (k.dim(), e.dim());
    let block = n * d;
    let idx = g.eval_indices().to_vec();
    let top = idx.last().copied().unwrap_or(0);

    let mut sc = Scratch::new(n, d);
    let mut lim_rows = vec![0.0; top * block];
    let mut diag_rows = vec![0.0; top * block];
    for j in 0..top {
        let s = g.node(j);
        limit.eval_into(s, &mut sc.l)?;
        f.eval_into(s, &mut sc.f)?;
        matmul_into(&sc.l, &sc.f, n, n, d, &mut lim_rows[j * block..(j + 1) * block]);
        k.apply_into(s, s, f, &mut sc, &mut diag_rows[j * block..(j + 1) * block])?;
        for q in 0..block {
            diag_rows[j * block + q] -= lim_rows[j * block + q];
        }
    }
    let direct_rows = idx
        .par_iter()
        .map(|&i| {
            let mut sc = Scratch::new(n, d);
            let t = g.node(i);
            let mut rows = vec![0.0; i * block];
            for j in 0..i {
                let out = &mut rows[j * block..(j + 1) * block];
                k.apply_into(t, g.node(j), f, &mut sc, out)?;
                for q in 0..block {
                    out[q] -= lim_rows[j * block + q];
                }
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    // Row u_i holds ∂₁H(u_i, t_j) f(t_j) for j < i.
    let d1_rows = (0..=top)
        .into_par_iter()
        .map(|i| {
            let mut sc = Scratch::new(n, d);
            let u = g.node(i);
            let mut rows = vec![0.0; i * block];
            for j in 0..i {
                let s = g.node(j);
                k.eval_d1_into(u, s, &mut sc.h)?;
                f.eval_into(s, &mut sc.f)?;
                matmul_into(&sc.h, &sc.f, n, n, d, &mut rows[j * block..(j + 1) * block]);
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;

    let dt = g.dt();
    let per_path: Vec<(Vec<f64>, Vec<f64>)> = (0..e.paths())
        .into_par_iter()
        .map(|m| {
            let inc = e.increments(m);
            let mut inner = vec![0.0; n];
            let mut prev = vec![0.0; n];
            // cumulative trapezoid Q_i and diagonal sum S_i
            let mut q_acc = vec![0.0; n];
            let mut s_acc = vec![0.0; n];
            let mut decomposed_at = vec![vec![0.0; n]; top + 1];
            for i in 1..=top {
                ito_sum(&d1_rows[i], &inc, i, n, d, &mut inner);
                for r in 0..n {
                    q_acc[r] += 0.5 * dt * (prev[r] + inner[r]);
                    let mut a = 0.0;
                    for c in 0..d {
                        a += diag_rows[(i - 1) * block + r * d + c] * inc[(i - 1) * d + c];
                    }
                    s_acc[r] += a;
                    decomposed_at[i][r] = s_acc[r] + q_acc[r];
                }
                std::mem::swap(&mut prev, &mut inner);
            }
            let mut dir = vec![0.0; idx.len() * n];
            let mut dec = vec![0.0; idx.len() * n];
            for (q, &i) in idx.iter().enumerate() {
                ito_sum(&direct_rows[q], &inc, i, n, d, &mut dir[q * n..(q + 1) * n]);
                dec[q * n..(q + 1) * n].copy_from_slice(&decomposed_at[i]);
            }
            (dir, dec)
        })
        .collect();

    let mut direct = Vec::with_capacity(e.paths() * idx.len() * n);
    let mut decomposed = Vec::with_capacity(direct.capacity());
    for (a, b) in per_path {
        direct.extend(a);
        decomposed.extend(b);
    }
    let residual: Vec<f64> = direct
        .chunks(n)
        .zip(decomposed.chunks(n))
        .map(|(a, b)| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let max_residual = residual.iter().copied().fold(0.0, f64::max);
    Ok(FubiniReport {
        eval_times: g.eval_times(),
        paths: e.paths(),
        dim: n,
        direct,
        decomposed,
        residual,
        max_residual,
    })
}
