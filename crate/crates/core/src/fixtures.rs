//! Built-in example kernels with known limiting behavior.

use crate::error::{Error, Result};
use crate::function::BoundedFunction;
use crate::kernel::{make_additive, make_exponential, make_multiplicative, Kernel};
use crate::quadrature::Grid;
use serde::Serialize;

/// `H♯(t) = 1/sqrt(t log log(t+2))` for `t >= 1`, frozen on `[0, 1]`.
pub const SLOW_SHARP: &str = "1/sqrt(max(t,1)*loglog(max(t,1)+2))";
/// `σ(s) = 1/sqrt(log(s+e))`.
pub const LOG_SIGMA: &str = "1/sqrt(log(s+exp(1)))";
/// Master seed used to calibrate the Monte Carlo bands in the tests.
pub const DEFAULT_SEED: u64 = 20_160_301;

/// Analytic behavior of `∫₀ᵗ ‖H(t,s) − H_∞(s)‖² ds` as `t -> ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitTag {
    /// Tends to zero at a rate the default verdicts detect.
    Zero,
    /// Tends to a positive constant.
    Positive,
    /// Tends to zero like a power of `1/log t` or slower.
    SlowDecay,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub description: &'static str,
    pub kernel: Kernel,
    pub expected: LimitTag,
    /// Time factor of additive or multiplicative kernels.
    pub h_sharp: Option<BoundedFunction>,
    /// Volatility of exponential kernels.
    pub sigma: Option<BoundedFunction>,
}

pub const NAMES: [&str; 5] = [
    "additive-counterexample",
    "multiplicative",
    "ou-log",
    "ou-decay",
    "ou-constant",
];

fn exponential(name: &'static str, description: &'static str, sigma: BoundedFunction, expected: LimitTag) -> Result<Fixture> {
    Ok(Fixture {
        name,
        description,
        kernel: make_exponential(sigma.clone(), 1.0)?.with_label(name),
        expected,
        h_sharp: None,
        sigma: Some(sigma),
    })
}

/// Looks up a fixture by name; `exp-decay` is an alias of `ou-decay`.
pub fn fixture(name: &str) -> Result<Fixture> {
    match name {
        "additive-counterexample" => {
            let sharp = BoundedFunction::parse(SLOW_SHARP)?;
            Ok(Fixture {
                name: "additive-counterexample",
                description: "e^{-s} + 1/sqrt(t log log(t+2)): mean-square but not almost-sure convergence",
                kernel: make_additive(BoundedFunction::exp_decay(1.0, 1.0), sharp.clone())?
                    .with_label("additive-counterexample"),
                expected: LimitTag::SlowDecay,
                h_sharp: Some(sharp),
                sigma: None,
            })
        }
        "multiplicative" => {
            let sharp = BoundedFunction::parse("1+1/(1+t)")?
                .with_derivative(BoundedFunction::parse("-1/(1+t)^2")?);
            Ok(Fixture {
                name: "multiplicative",
                description: "e^{-s} (1 + 1/(1+t)): time factor tends to 1",
                kernel: make_multiplicative(BoundedFunction::exp_decay(1.0, 1.0), sharp.clone())?
                    .with_label("multiplicative"),
                expected: LimitTag::Zero,
                h_sharp: Some(sharp),
                sigma: None,
            })
        }
        "ou-log" => exponential(
            "ou-log",
            "e^{-(t-s)} / sqrt(log(s+e)): log-weighted condition fails",
            BoundedFunction::parse(LOG_SIGMA)?.with_sup_bound(1.0),
            LimitTag::SlowDecay,
        ),
        "ou-decay" | "exp-decay" => exponential(
            "ou-decay",
            "e^{-(t-s)} e^{-s}: every condition holds",
            BoundedFunction::exp_decay(1.0, 1.0),
            LimitTag::Zero,
        ),
        "ou-constant" => exponential(
            "ou-constant",
            "e^{-(t-s)}: stationary, no mean-square limit",
            BoundedFunction::constant(1.0),
            LimitTag::Positive,
        ),
        other => Err(Error::Precondition(format!(
            "unknown example `{other}`; expected one of {}",
            NAMES.join(", ")
        ))),
    }
}

pub fn builtin() -> Vec<Fixture> {
    NAMES.iter().map(|n| fixture(n).expect("built-in fixture")).collect()
}

/// Horizon and step used for fixture verdicts.
pub fn default_grid() -> Grid {
    Grid::new(1.0 / 16.0, 1000.0).expect("valid grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_fixtures_build() {
        let fs = builtin();
        assert_eq!(fs.len(), 5);
        for f in &fs {
            assert!(f.kernel.has_limit(), "{}", f.name);
            f.kernel.eval(3.0, 1.0).unwrap();
        }
        assert_eq!(fixture("exp-decay").unwrap().name, "ou-decay");
        assert!(fixture("nope").is_err());
    }

    #[test]
    fn counterexample_values() {
        let f = fixture("additive-counterexample").unwrap();
        let h = f.h_sharp.unwrap();
        // 1/sqrt(log log 3) below t = 1
        assert_eq!(h.eval_scalar(0.5).unwrap(), h.eval_scalar(1.0).unwrap());
        let v = h.eval_scalar(4.0).unwrap();
        assert!((v - 0.6547295784043771).abs() < 1e-15);
    }
}
