use crate::error::{Error, Result};
use crate::quadrature::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

/// Identifies the seeding, generator and normal sampler. Stored in every
/// result so runs can be reproduced.
pub const RNG_ID: &str = "splitmix64-mix/chacha8/ziggurat-normal";

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of path `m`; depends only on the master seed and `m`.
pub fn path_seed(master: u64, m: u64) -> u64 {
    splitmix64(master ^ splitmix64(m.wrapping_add(GOLDEN_GAMMA)))
}

#[derive(Debug, Clone)]
enum Source {
    Seeded { refine: usize },
    /// `paths x steps x dim`, row-major.
    Explicit(Arc<Vec<f64>>),
}

/// `M` paths of a `d`-dimensional Brownian motion, stored as increments on
/// a uniform grid. Seeded ensembles generate each path on demand from its
/// own stream.
#[derive(Debug, Clone)]
pub struct BrownianEnsemble {
    master_seed: u64,
    paths: usize,
    dim: usize,
    dt: f64,
    steps: usize,
    scale: f64,
    source: Source,
}

/// Seeded ensemble with `paths` paths of a `dim`-dimensional Brownian
/// motion on the grid `g`.
pub fn generate_ensemble(seed: u64, paths: usize, dim: usize, g: &Grid) -> Result<BrownianEnsemble> {
    if paths == 0 || dim == 0 {
        return Err(Error::EmptyEnsemble);
    }
    Ok(BrownianEnsemble {
        master_seed: seed,
        paths,
        dim,
        dt: g.dt(),
        steps: g.steps(),
        scale: 1.0,
        source: Source::Seeded { refine: 1 },
    })
}

impl BrownianEnsemble {
    /// Ensemble with explicitly supplied increments (`paths x steps x dim`).
    pub fn from_increments(paths: usize, dim: usize, g: &Grid, increments: Vec<f64>) -> Result<Self> {
        if paths == 0 || dim == 0 {
            return Err(Error::EmptyEnsemble);
        }
        if increments.len() != paths * g.steps() * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {} increments, got {}",
                paths * g.steps() * dim,
                increments.len()
            )));
        }
        Ok(BrownianEnsemble {
            master_seed: 0,
            paths,
            dim,
            dt: g.dt(),
            steps: g.steps(),
            scale: 1.0,
            source: Source::Explicit(Arc::new(increments)),
        })
    }

    /// All increments multiplied by `factor` (e.g. `-1` for the mirrored
    /// ensemble, `0` for a degenerate one).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut e = self.clone();
        e.scale *= factor;
        e
    }

    /// The same paths observed on a grid with `factor` times larger steps:
    /// each coarse increment is the sum of the fine ones it covers.
    pub fn coarsened(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.steps % factor != 0 {
            return Err(Error::InvalidGrid(format!(
                "cannot coarsen {} steps by {factor}",
                self.steps
            )));
        }
        let mut e = self.clone();
        e.steps = self.steps / factor;
        e.dt = self.dt * factor as f64;
        e.source = match &self.source {
            Source::Seeded { refine } => Source::Seeded {
                refine: refine * factor,
            },
            Source::Explicit(data) => {
                let mut out = vec![0.0; self.paths * e.steps * self.dim];
                for m in 0..self.paths {
                    for j in 0..self.steps {
                        for c in 0..self.dim {
                            out[(m * e.steps + j / factor) * self.dim + c] +=
                                data[(m * self.steps + j) * self.dim + c];
                        }
                    }
                }
                Source::Explicit(Arc::new(out))
            }
        };
        Ok(e)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Errors unless the ensemble lives on the same nodes as `g`.
    pub fn check_grid(&self, g: &Grid) -> Result<()> {
        if self.steps != g.steps() || (self.dt - g.dt()).abs() > 1e-12 * g.dt() {
            return Err(Error::InvalidGrid(format!(
                "ensemble has {} steps of {}, grid has {} steps of {}",
                self.steps,
                self.dt,
                g.steps(),
                g.dt()
            )));
        }
        Ok(())
    }

    /// Increments of path `m`, `steps x dim` row-major.
    pub fn increments(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.steps * self.dim];
        self.increments_into(m, &mut out);
        out
    }

    pub fn increments_into(&self, m: usize, out: &mut [f64]) {
        assert!(m < self.paths, "path {m} out of range");
        let n = self.steps * self.dim;
        match &self.source {
            Source::Seeded { refine } => {
                let mut rng = ChaCha8Rng::seed_from_u64(path_seed(self.master_seed, m as u64));
                let sd = (self.dt / *refine as f64).sqrt();
                out[..n].fill(0.0);
                for j in 0..self.steps {
                    for _ in 0..*refine {
                        for c in 0..self.dim {
                            let z: f64 = rng.sample(StandardNormal);
                            out[j * self.dim + c] += z * sd;
                        }
                    }
                }
            }
            Source::Explicit(data) => out[..n].copy_from_slice(&data[m * n..(m + 1) * n]),
        }
        if self.scale != 1.0 {
            for v in &mut out[..n] {
                *v *= self.scale;
            }
        }
    }

    /// `B(t_j)` for `j = 0..=steps`, `(steps + 1) x dim` row-major.
    pub fn brownian_path(&self, m: usize) -> Vec<f64> {
        let inc = self.increments(m);
        let mut b = vec![0.0; (self.steps + 1) * self.dim];
        for j in 0..self.steps {
            for c in 0..self.dim {
                b[(j + 1) * self.dim + c] = b[j * self.dim + c] + inc[j * self.dim + c];
            }
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_spread() {
        assert_ne!(path_seed(1, 0), path_seed(1, 1));
        assert_ne!(path_seed(1, 0), path_seed(2, 0));
        assert_eq!(path_seed(7, 3), path_seed(7, 3));
    }

    #[test]
    fn deterministic_and_path_local() {
        let g = Grid::new(0.5, 4.0).unwrap();
        let a = generate_ensemble(9, 5, 2, &g).unwrap();
        let b = generate_ensemble(9, 50, 2, &g).unwrap();
        for m in 0..5 {
            let x = a.increments(m);
            let y = b.increments(m);
            assert!(x.iter().zip(&y).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
        assert!(matches!(generate_ensemble(1, 0, 1, &g), Err(Error::EmptyEnsemble)));
        assert!(matches!(generate_ensemble(1, 1, 0, &g), Err(Error::EmptyEnsemble)));
    }

    #[test]
    fn coarsening_sums_fine_increments() {
        let g = Grid::new(0.25, 2.0).unwrap();
        let fine = generate_ensemble(3, 2, 2, &g).unwrap();
        let coarse = fine.coarsened(2).unwrap();
        let explicit = BrownianEnsemble::from_increments(
            2,
            2,
            &g,
            (0..2).flat_map(|m| fine.increments(m)).collect(),
        )
        .unwrap()
        .coarsened(2)
        .unwrap();
        assert_eq!(coarse.steps(), 4);
        for m in 0..2 {
            let f = fine.increments(m);
            let c = coarse.increments(m);
            let x = explicit.increments(m);
            for j in 0..4 {
                for d in 0..2 {
                    let sum = f[(2 * j) * 2 + d] + f[(2 * j + 1) * 2 + d];
                    assert_eq!(c[j * 2 + d].to_bits(), sum.to_bits());
                    assert_eq!(x[j * 2 + d].to_bits(), sum.to_bits());
                }
            }
        }
    }

    #[test]
    fn brownian_endpoint_variance() {
        // B(4) on four unit cells, 10^5 reseeded draws.
        let g = Grid::new(1.0, 4.0).unwrap();
        let e = generate_ensemble(1, 100_000, 1, &g).unwrap();
        let ends: Vec<f64> = (0..e.paths()).map(|m| e.brownian_path(m)[4]).collect();
        let v = crate::stats::variance(&ends);
        let se = 4.0 * (2.0 / (ends.len() - 1) as f64).sqrt();
        assert!((v - 4.0).abs() < 3.0 * se, "var {v}");
    }

    #[test]
    fn scaling() {
        let g = Grid::new(0.5, 2.0).unwrap();
        let e = generate_ensemble(5, 1, 1, &g).unwrap();
        let neg = e.scaled(-1.0).increments(0);
        assert!(e.increments(0).iter().zip(&neg).all(|(a, b)| *a == -*b));
        assert!(e.scaled(0.0).brownian_path(0).iter().all(|v| *v == 0.0));
    }
}
