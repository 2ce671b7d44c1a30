//! Exact simulation of stationary Gaussian paths on an equally spaced grid:
//! Cholesky factorization of the Toeplitz autocovariance matrix, then
//! `X = L z` with per-replication deterministic random streams.

use crate::covmodel::CovarianceModel;
use crate::error::{FouGmmError, Result};
use crate::gmm::Trajectory;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Deterministic seed derivation: a base seed plus an index-addressed stream
/// per replication. The same (base, index) pair reproduces the same path
/// bit-exactly regardless of thread count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPlan {
    base_seed: u64,
}

impl SeedPlan {
    pub fn new(base_seed: u64) -> Self {
        Self { base_seed }
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    /// Child plan for a nested scope (scenario, cell, ...), by hashing the
    /// parts into the base seed.
    pub fn derive(&self, parts: &[u64]) -> SeedPlan {
        let mut state = self.base_seed;
        for &p in parts {
            state = splitmix64(state ^ splitmix64(p));
        }
        SeedPlan { base_seed: state }
    }

    /// Independent RNG stream for one replication.
    pub fn rng(&self, replication: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed);
        rng.set_stream(replication);
        rng
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Lower-triangular Cholesky factor of the `(N+1) x (N+1)` Toeplitz matrix
/// `[rho(alpha |i-j|)]`, plus grid metadata.
#[derive(Debug)]
pub struct CovarianceFactorization {
    /// Column-major dense storage of the lower factor (upper part zeroed).
    factor: Vec<f64>,
    dim: usize,
    alpha: f64,
    fingerprint: u64,
    jitter_used: bool,
}

impl CovarianceFactorization {
    /// Grid size (number of observations N+1).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Hash of (dim, alpha, covariance grid) identifying the model inputs.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Whether a diagonal jitter retry was needed to factorize.
    pub fn jitter_used(&self) -> bool {
        self.jitter_used
    }

    /// Entry L[i, j] of the lower factor.
    pub fn factor_entry(&self, i: usize, j: usize) -> f64 {
        self.factor[j * self.dim + i]
    }
}

/// Factorizes the autocovariance matrix of `n_points` equally spaced
/// observations. On a first pivot failure retries once with a diagonal
/// jitter of `1e-12 rho(0)`; a second failure reports the failing pivot.
pub fn factorize(
    model: &dyn CovarianceModel,
    n_points: usize,
    alpha: f64,
) -> Result<CovarianceFactorization> {
    if n_points == 0 {
        return Err(FouGmmError::InvalidParams("empty grid".into()));
    }
    let grid = model.rho_lag_grid(alpha, n_points)?;
    let mut fingerprint = splitmix64(n_points as u64 ^ alpha.to_bits());
    for &g in &grid {
        fingerprint = splitmix64(fingerprint ^ g.to_bits());
    }

    match cholesky_toeplitz(&grid, 0.0) {
        Ok(factor) => Ok(CovarianceFactorization {
            factor,
            dim: n_points,
            alpha,
            fingerprint,
            jitter_used: false,
        }),
        Err(_) => {
            let jitter = 1e-12 * grid[0];
            let factor = cholesky_toeplitz(&grid, jitter)?;
            Ok(CovarianceFactorization {
                factor,
                dim: n_points,
                alpha,
                fingerprint,
                jitter_used: true,
            })
        }
    }
}

/// Right-looking dense Cholesky of the Toeplitz matrix built from `grid`,
/// returning column-major lower-triangular storage. Reports the failing
/// pivot index on breakdown. Column updates run in parallel.
fn cholesky_toeplitz(grid: &[f64], jitter: f64) -> Result<Vec<f64>> {
    let n = grid.len();
    let mut data = vec![0.0f64; n * n];
    // Fill the lower triangle of the Toeplitz matrix column by column.
    for j in 0..n {
        let col = &mut data[j * n..(j + 1) * n];
        for (i, slot) in col.iter_mut().enumerate().skip(j) {
            *slot = grid[i - j];
        }
        col[j] += jitter;
    }
    for j in 0..n {
        let pivot = data[j * n + j];
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(FouGmmError::NotPositiveDefinite { pivot: j });
        }
        let inv = 1.0 / pivot.sqrt();
        for i in j..n {
            data[j * n + i] *= inv;
        }
        if j + 1 == n {
            break;
        }
        let (colj_part, rest) = data[j * n..].split_at_mut(n);
        let colj = &colj_part[j + 1..]; // L[j+1.., j]
        rest.par_chunks_mut(n).enumerate().for_each(|(offset, colk)| {
            let k = j + 1 + offset;
            let ljk = colj[offset];
            if ljk != 0.0 {
                for i in k..n {
                    colk[i] -= colj[i - j - 1] * ljk;
                }
            }
        });
    }
    Ok(data)
}

/// Draws one path: `X = L z` with `z` i.i.d. standard normal from the
/// replication's stream. Pure given its arguments; safe to call from many
/// threads at once.
pub fn sample_path(
    fact: &CovarianceFactorization,
    plan: &SeedPlan,
    replication: u64,
) -> Trajectory {
    let n = fact.dim;
    let mut rng = plan.rng(replication);
    let z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut x = vec![0.0f64; n];
    for (k, &zk) in z.iter().enumerate() {
        if zk == 0.0 {
            continue;
        }
        let col = &fact.factor[k * n..(k + 1) * n];
        for i in k..n {
            x[i] += col[i] * zk;
        }
    }
    Trajectory::new(x, fact.alpha).expect("factorization dims are valid")
}
