//! Brownian ensembles and discretized Itô–Volterra integrals.

mod ensemble;
mod fubini;
mod tail;
mod volterra;

pub use ensemble::{generate_ensemble, path_seed, BrownianEnsemble, RNG_ID};
pub use fubini::{fubini_decomposition, FubiniReport};
pub use tail::{
    as_tail_statistics, lil_statistic, lil_statistic_from, LilReport, TailReport, WindowStats,
};
pub(crate) use volterra::{check_dims, ito_sum};
pub use volterra::{volterra_integral, Moments, SimulationResult};
