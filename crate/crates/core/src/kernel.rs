//! Volterra kernels `H(t, s)` on the wedge `0 <= s <= t`.
//!
//! Three structured families come with analytic side information (limit
//! function, t-derivative, closed-form square integrals); arbitrary kernels
//! are built from expressions with [`make_custom`].

use crate::error::{Error, Result};
use crate::exprlang::{parse, EvalContext, Expr};
use crate::function::BoundedFunction;
use crate::matrix::{matmul_into, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, OnceLock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyTag {
    Additive,
    Multiplicative,
    Exponential,
    Custom,
}

#[derive(Debug, Clone)]
pub enum KernelFamily {
    /// `H(t,s) = h_inf(s) + h_sharp(t)`.
    Additive {
        h_inf: BoundedFunction,
        h_sharp: BoundedFunction,
    },
    /// `H(t,s) = h_inf(s) * h_sharp(t)`.
    Multiplicative {
        h_inf: BoundedFunction,
        h_sharp: BoundedFunction,
    },
    /// `H(t,s) = exp(-lambda (t-s)) sigma(s)`.
    Exponential { sigma: BoundedFunction, lambda: f64 },
    /// Entrywise expressions in `t` and `s`.
    Custom {
        entries: Vec<Expr>,
        d1: Option<Vec<Expr>>,
    },
}

/// Outcome of comparing the supplied t-derivative with forward differences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct D1Check {
    pub step: f64,
    pub points: usize,
    pub max_error: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone)]
pub struct Kernel {
    dim: usize,
    family: KernelFamily,
    limit: Option<BoundedFunction>,
    label: String,
    d1_check: Arc<OnceLock<D1Check>>,
}

fn require_scalar(f: &BoundedFunction, what: &str) -> Result<()> {
    if f.is_scalar() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what} must be scalar, got {}x{}",
            f.rows(),
            f.cols()
        )))
    }
}

/// `H(t,s) = h_inf(s) + h_sharp(t)`. The t-derivative is available when
/// `h_sharp` carries one.
pub fn make_additive(h_inf: BoundedFunction, h_sharp: BoundedFunction) -> Result<Kernel> {
    require_scalar(&h_inf, "h_inf")?;
    require_scalar(&h_sharp, "h_sharp")?;
    let label = format!("additive[{} + {}]", h_inf.label(), h_sharp.label());
    Ok(Kernel::build(
        1,
        KernelFamily::Additive {
            h_inf: h_inf.clone(),
            h_sharp,
        },
        Some(h_inf),
        label,
    ))
}

/// `H(t,s) = h_inf(s) * h_sharp(t)`. The limit slot is always `h_inf`;
/// whether it is the true limit depends on `h_sharp -> 1`.
pub fn make_multiplicative(h_inf: BoundedFunction, h_sharp: BoundedFunction) -> Result<Kernel> {
    require_scalar(&h_inf, "h_inf")?;
    require_scalar(&h_sharp, "h_sharp")?;
    let label = format!("multiplicative[{} * {}]", h_inf.label(), h_sharp.label());
    Ok(Kernel::build(
        1,
        KernelFamily::Multiplicative {
            h_inf: h_inf.clone(),
            h_sharp,
        },
        Some(h_inf),
        label,
    ))
}

/// `H(t,s) = exp(-lambda (t-s)) sigma(s)` with limit identically zero and
/// `∂₁H = -lambda H`.
pub fn make_exponential(sigma: BoundedFunction, lambda: f64) -> Result<Kernel> {
    require_scalar(&sigma, "sigma")?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::NonPositiveLambda(lambda));
    }
    let label = format!("exponential[lambda={lambda}, sigma={}]", sigma.label());
    Ok(Kernel::build(
        1,
        KernelFamily::Exponential { sigma, lambda },
        Some(BoundedFunction::zero()),
        label,
    ))
}

/// Kernel from `dim x dim` row-major entry expressions over `t` and `s`,
/// with optional limit entries (in `s`) and t-derivative entries.
pub fn make_custom(
    dim: usize,
    entries: &[&str],
    limit: Option<&[&str]>,
    d1: Option<&[&str]>,
) -> Result<Kernel> {
    let want = dim * dim;
    let check = |what: &str, n: usize| {
        if dim == 0 || n != want {
            Err(Error::DimensionMismatch(format!(
                "{what}: {dim}x{dim} kernel needs {want} entries, got {n}"
            )))
        } else {
            Ok(())
        }
    };
    check("kernel", entries.len())?;
    let parsed = entries
        .iter()
        .map(|s| parse(s))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let limit = match limit {
        Some(l) => {
            check("limit", l.len())?;
            Some(BoundedFunction::from_exprs(dim, dim, l)?)
        }
        None => None,
    };
    let d1 = match d1 {
        Some(d) => {
            check("d1", d.len())?;
            Some(
                d.iter()
                    .map(|s| parse(s))
                    .collect::<std::result::Result<Vec<_>, _>>()?,
            )
        }
        None => None,
    };
    let label = format!("custom[{}]", entries.join(", "));
    Ok(Kernel::build(
        dim,
        KernelFamily::Custom {
            entries: parsed,
            d1,
        },
        limit,
        label,
    ))
}

impl Kernel {
    fn build(
        dim: usize,
        family: KernelFamily,
        limit: Option<BoundedFunction>,
        label: String,
    ) -> Kernel {
        Kernel {
            dim,
            family,
            limit,
            label,
            d1_check: Arc::new(OnceLock::new()),
        }
    }

    /// Replaces the limit function, e.g. to register one with a known
    /// square tail.
    pub fn with_limit(mut self, limit: BoundedFunction) -> Result<Kernel> {
        if limit.rows() != self.dim || limit.cols() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "limit must be {0}x{0}",
                self.dim
            )));
        }
        self.limit = Some(limit);
        Ok(self)
    }

    pub fn without_limit(mut self) -> Kernel {
        self.limit = None;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Kernel {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn tag(&self) -> FamilyTag {
        match self.family {
            KernelFamily::Additive { .. } => FamilyTag::Additive,
            KernelFamily::Multiplicative { .. } => FamilyTag::Multiplicative,
            KernelFamily::Exponential { .. } => FamilyTag::Exponential,
            KernelFamily::Custom { .. } => FamilyTag::Custom,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn limit(&self) -> Option<&BoundedFunction> {
        self.limit.as_ref()
    }

    pub fn has_limit(&self) -> bool {
        self.limit.is_some()
    }

    pub fn has_d1(&self) -> bool {
        match &self.family {
            KernelFamily::Additive { h_sharp, .. } | KernelFamily::Multiplicative { h_sharp, .. } => {
                h_sharp.derivative().is_some()
            }
            KernelFamily::Exponential { .. } => true,
            KernelFamily::Custom { d1, .. } => d1.is_some(),
        }
    }

    fn check_domain(t: f64, s: f64) -> Result<()> {
        if s >= 0.0 && s <= t && t.is_finite() {
            Ok(())
        } else {
            Err(Error::OutsideDomain { t, s })
        }
    }

    /// Writes `H(t, s)` (row-major) into `out`.
    pub fn eval_into(&self, t: f64, s: f64, out: &mut [f64]) -> Result<()> {
        Kernel::check_domain(t, s)?;
        match &self.family {
            KernelFamily::Additive { h_inf, h_sharp } => {
                out[0] = h_inf.eval_scalar(s)? + h_sharp.eval_scalar(t)?;
            }
            KernelFamily::Multiplicative { h_inf, h_sharp } => {
                out[0] = h_inf.eval_scalar(s)? * h_sharp.eval_scalar(t)?;
            }
            KernelFamily::Exponential { sigma, lambda } => {
                out[0] = (-lambda * (t - s)).exp() * sigma.eval_scalar(s)?;
            }
            KernelFamily::Custom { entries, .. } => {
                let ctx = EvalContext::pair(t, s);
                for (o, e) in out.iter_mut().zip(entries) {
                    *o = e.eval(&ctx)?;
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, s: f64) -> Result<Matrix> {
        let mut out = vec![0.0; self.dim * self.dim];
        self.eval_into(t, s, &mut out)?;
        Ok(Matrix::new(self.dim, self.dim, out))
    }

    /// `H(t, t)`.
    pub fn diagonal(&self, t: f64) -> Result<Matrix> {
        self.eval(t, t)
    }

    pub fn eval_limit_into(&self, s: f64, out: &mut [f64]) -> Result<()> {
        self.limit
            .as_ref()
            .ok_or(Error::MissingLimit)?
            .eval_into(s, out)
    }

    /// Writes `∂₁H(t, s)` into `out`.
    pub fn eval_d1_into(&self, t: f64, s: f64, out: &mut [f64]) -> Result<()> {
        Kernel::check_domain(t, s)?;
        match &self.family {
            KernelFamily::Additive { h_sharp, .. } => {
                let d = h_sharp.derivative().ok_or(Error::MissingDerivative)?;
                out[0] = d.eval_scalar(t)?;
            }
            KernelFamily::Multiplicative { h_inf, h_sharp } => {
                let d = h_sharp.derivative().ok_or(Error::MissingDerivative)?;
                out[0] = h_inf.eval_scalar(s)? * d.eval_scalar(t)?;
            }
            KernelFamily::Exponential { sigma, lambda } => {
                out[0] = -lambda * (-lambda * (t - s)).exp() * sigma.eval_scalar(s)?;
            }
            KernelFamily::Custom { d1, .. } => {
                let d1 = d1.as_ref().ok_or(Error::MissingDerivative)?;
                self.d1_check.get_or_init(|| {
                    let check = self.d1_consistency(1e-4, 16, 10.0);
                    if !check.consistent {
                        log::warn!(
                            "kernel `{}`: supplied t-derivative disagrees with finite differences \
                             (max error {:.3e} at step {})",
                            self.label,
                            check.max_error,
                            check.step
                        );
                    }
                    check
                });
                let ctx = EvalContext::pair(t, s);
                for (o, e) in out.iter_mut().zip(d1) {
                    *o = e.eval(&ctx)?;
                }
            }
        }
        Ok(())
    }

    pub fn eval_d1(&self, t: f64, s: f64) -> Result<Matrix> {
        let mut out = vec![0.0; self.dim * self.dim];
        self.eval_d1_into(t, s, &mut out)?;
        Ok(Matrix::new(self.dim, self.dim, out))
    }

    /// Result of the lazy consistency check for custom derivatives, if it
    /// has run.
    pub fn d1_check(&self) -> Option<&D1Check> {
        self.d1_check.get()
    }

    /// Compares `∂₁H` with forward differences at `points` pseudo-random
    /// points of the wedge below `horizon`. Consistent when every error is
    /// within `10 h max(1, |∂₁H|)`.
    pub fn d1_consistency(&self, h: f64, points: usize, horizon: f64) -> D1Check {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d1c4);
        let n = self.dim * self.dim;
        let (mut a, mut b, mut d) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut max_error: f64 = 0.0;
        let mut consistent = true;
        let mut used = 0;
        for _ in 0..points {
            let t: f64 = rng.random_range(0.0..horizon);
            let s: f64 = rng.random_range(0.0..=t);
            let ok = self.eval_into(t, s, &mut a).is_ok()
                && self.eval_into(t + h, s, &mut b).is_ok()
                && self.raw_d1(t, s, &mut d).is_ok();
            if !ok {
                continue;
            }
            used += 1;
            for i in 0..n {
                let fd = (b[i] - a[i]) / h;
                let err = (d[i] - fd).abs();
                max_error = max_error.max(err);
                if err > 10.0 * h * d[i].abs().max(1.0) {
                    consistent = false;
                }
            }
        }
        D1Check {
            step: h,
            points: used,
            max_error,
            consistent,
        }
    }

    // d1 without triggering the lazy check (which calls this).
    fn raw_d1(&self, t: f64, s: f64, out: &mut [f64]) -> Result<()> {
        if let KernelFamily::Custom { d1, .. } = &self.family {
            let d1 = d1.as_ref().ok_or(Error::MissingDerivative)?;
            let ctx = EvalContext::pair(t, s);
            for (o, e) in out.iter_mut().zip(d1) {
                *o = e.eval(&ctx)?;
            }
            Ok(())
        } else {
            self.eval_d1_into(t, s, out)
        }
    }

    /// Closed form of `∫₀ᵗ ‖H(t,s)‖² ds`, registered for the exponential
    /// family with constant `sigma`.
    pub fn closed_form_square_mass(&self, t: f64) -> Option<f64> {
        match &self.family {
            KernelFamily::Exponential { sigma, lambda } => {
                let c = sigma.constant_value()?;
                Some(c * c * (1.0 - (-2.0 * lambda * t).exp()) / (2.0 * lambda))
            }
            _ => None,
        }
    }

    /// Closed form of `∫_t^∞ ‖H_∞(s)‖² ds` when the limit registers one.
    pub fn closed_form_limit_tail(&self, t: f64) -> Option<f64> {
        Some(self.limit.as_ref()?.square_tail()?.from(t))
    }

    /// `H(t,s) f(s)` written into `out` (`dim x f.cols()`), using `scratch`
    /// for the kernel and coefficient values.
    pub(crate) fn apply_into(
        &self,
        t: f64,
        s: f64,
        f: &BoundedFunction,
        scratch: &mut Scratch,
        out: &mut [f64],
    ) -> Result<()> {
        self.eval_into(t, s, &mut scratch.h)?;
        f.eval_into(s, &mut scratch.f)?;
        matmul_into(&scratch.h, &scratch.f, self.dim, self.dim, f.cols(), out);
        Ok(())
    }
}

/// Reusable evaluation buffers.
pub(crate) struct Scratch {
    pub h: Vec<f64>,
    pub l: Vec<f64>,
    pub f: Vec<f64>,
    pub prod: Vec<f64>,
}

impl Scratch {
    pub fn new(dim: usize, cols: usize) -> Scratch {
        Scratch {
            h: vec![0.0; dim * dim],
            l: vec![0.0; dim * dim],
            f: vec![0.0; dim * cols],
            prod: vec![0.0; dim * cols],
        }
    }
}

/// Sampling density for [`holder_constant_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderSample {
    pub s_points: usize,
    pub t_points: usize,
}

impl Default for HolderSample {
    fn default() -> Self {
        HolderSample {
            s_points: 33,
            t_points: 33,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderScan {
    pub alpha: f64,
    pub horizon: f64,
    /// `(s, K(s))` pairs.
    pub samples: Vec<(f64, f64)>,
    /// Trapezoid estimate of `∫₀ᵀ K(s)² ds`.
    pub k_sq_integral: f64,
}

/// Sampled surrogate of the smallest `K(s)` with
/// `‖H(t₂,s) − H(t₁,s)‖ <= K(s) (t₂ − t₁)^alpha` for `s <= t₁ < t₂ <= T`.
/// Evidence only: a finite sample bounds `K` from below.
pub fn holder_constant_scan(
    k: &Kernel,
    horizon: f64,
    alpha: f64,
    sample: HolderSample,
) -> Result<HolderScan> {
    if !(horizon > 0.0) {
        return Err(Error::Precondition(format!("horizon must be positive, got {horizon}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::Precondition(format!("alpha must be positive, got {alpha}")));
    }
    if sample.s_points < 2 || sample.t_points < 2 {
        return Err(Error::Precondition("need at least two sample points per axis".into()));
    }
    let n = k.dim() * k.dim();
    let ds = horizon / (sample.s_points - 1) as f64;
    let mut samples = Vec::with_capacity(sample.s_points);
    let mut values = vec![0.0; sample.t_points * n];
    for i in 0..sample.s_points {
        let s = i as f64 * ds;
        let dt = (horizon - s) / (sample.t_points - 1) as f64;
        let mut best: f64 = 0.0;
        if dt > 0.0 {
            let times: Vec<f64> = (0..sample.t_points)
                .map(|j| if j + 1 == sample.t_points { horizon } else { s + j as f64 * dt })
                .collect();
            for (j, &t) in times.iter().enumerate() {
                k.eval_into(t, s, &mut values[j * n..(j + 1) * n])?;
            }
            for a in 0..times.len() {
                for b in a + 1..times.len() {
                    let diff: f64 = (0..n)
                        .map(|e| {
                            let d = values[b * n + e] - values[a * n + e];
                            d * d
                        })
                        .sum::<f64>()
                        .sqrt();
                    best = best.max(diff / (times[b] - times[a]).powf(alpha));
                }
            }
        }
        samples.push((s, best));
    }
    let sq: Vec<f64> = samples.iter().map(|(_, k)| k * k).collect();
    Ok(HolderScan {
        alpha,
        horizon,
        k_sq_integral: crate::quadrature::trapezoid(&sq, ds),
        samples,
    })
}
