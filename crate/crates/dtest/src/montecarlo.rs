//! Seeded Monte Carlo validation of the closed forms.
//!
//! Matrices are sampled under the uniform i.i.d. model of
//! [`AlphabetProfile`](crate::probability::AlphabetProfile): cell `(i, j)`
//! uniform on `[0, k_j)`, generated row-major. Trials are pre-partitioned
//! into fixed blocks of [`BLOCK_SIZE`]; each block draws from its own
//! ChaCha8 stream seeded by a SplitMix64 mix of the run seed and the block
//! index, so the result is a pure function of `(profile, trials, seed)` no
//! matter how many workers merge the blocks.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::DiscreteMatrix;
use crate::probability::AlphabetProfile;
use crate::testing::{min_test_length, MinTestLength};

/// Identity of the RNG scheme, recorded in every report.
pub const GENERATOR_ID: &str = "chacha8(seed_from_u64(splitmix64(seed) ^ splitmix64(block)))";

/// Trials per block; the worker count cannot affect which block draws what.
pub const BLOCK_SIZE: u64 = 4096;

/// Simulation parameters. Results depend only on `(profile, trials, seed)`.
#[derive(Debug, Clone)]
pub struct McConfig {
    pub profile: AlphabetProfile,
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
}

impl McConfig {
    pub fn new(profile: AlphabetProfile, trials: u64, seed: u64, workers: usize) -> Result<Self> {
        if trials < 1 {
            return Err(Error::Parameter("trials must be at least 1".into()));
        }
        if workers < 1 {
            return Err(Error::Parameter("workers must be at least 1".into()));
        }
        Ok(Self {
            profile,
            trials,
            seed,
            workers,
        })
    }
}

/// A Bernoulli estimate with its binomial standard error.
#[derive(Debug, Clone, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub trials: u64,
    pub successes: u64,
    pub std_error: f64,
    pub seed: u64,
}

impl McEstimate {
    fn from_successes(successes: u64, trials: u64, seed: u64) -> Self {
        let estimate = successes as f64 / trials as f64;
        Self {
            estimate,
            trials,
            successes,
            std_error: (estimate * (1.0 - estimate) / trials as f64).sqrt(),
            seed,
        }
    }
}

/// Histogram of exact minimal test lengths over sampled matrices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MinLengthHistogram {
    /// length -> number of samples whose minimal test has that length.
    pub histogram: BTreeMap<usize, u64>,
    /// Samples with fully matching rows (no test of any length exists).
    pub matching_rows: u64,
    /// Samples whose search hit the time budget before completing.
    pub unresolved: u64,
    pub trials: u64,
    pub seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed) ^ splitmix64(block))
}

fn blocks(trials: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let mut block = 0;
    let mut remaining = trials;
    while remaining > 0 {
        let count = remaining.min(BLOCK_SIZE);
        out.push((block, count));
        remaining -= count;
        block += 1;
    }
    out
}

/// Fills `scratch` row-major with uniform symbols; every trial consumes
/// exactly `n * m` draws so later trials never depend on predicate shortcuts.
fn fill_matrix(rng: &mut ChaCha8Rng, sizes: &[u32], n: usize, scratch: &mut [u32]) {
    let m = sizes.len();
    for i in 0..n {
        for (j, &k) in sizes.iter().enumerate() {
            // Modulo bias is below k / 2^64, orders of magnitude under any
            // statistical resolution reachable here.
            scratch[i * m + j] = (rng.next_u64() % u64::from(k)) as u32;
        }
    }
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Parameter(format!("cannot build worker pool: {e}")))
}

fn count_successes<P>(config: &McConfig, predicate: P) -> Result<u64>
where
    P: Fn(&[u32], usize, usize) -> bool + Sync,
{
    let n = usize::try_from(config.profile.n())
        .map_err(|_| Error::Parameter("row count exceeds the addressable range".into()))?;
    let m = config.profile.m();
    let sizes = config.profile.sizes();
    let pool = build_pool(config.workers)?;
    let successes = pool.install(|| {
        blocks(config.trials)
            .par_iter()
            .map(|&(block, count)| {
                let mut rng = block_rng(config.seed, block);
                let mut scratch = vec![0u32; n * m];
                let mut hits = 0u64;
                for _ in 0..count {
                    fill_matrix(&mut rng, sizes, n, &mut scratch);
                    if predicate(&scratch, n, m) {
                        hits += 1;
                    }
                }
                hits
            })
            .sum()
    });
    Ok(successes)
}

/// Estimates the probability that some two sampled rows are identical.
pub fn mc_row_match(config: &McConfig) -> Result<McEstimate> {
    let successes = count_successes(config, |scratch, n, m| {
        for a in 0..n {
            for b in a + 1..n {
                if scratch[a * m..(a + 1) * m] == scratch[b * m..(b + 1) * m] {
                    return true;
                }
            }
        }
        false
    })?;
    Ok(McEstimate::from_successes(
        successes,
        config.trials,
        config.seed,
    ))
}

/// Estimates the probability that at least `l` columns are non-constant
/// across the sampled rows.
pub fn mc_matching_test(config: &McConfig, l: usize) -> Result<McEstimate> {
    let successes = count_successes(config, move |scratch, n, m| {
        let mut non_constant = 0usize;
        for j in 0..m {
            let first = scratch[j];
            if (1..n).any(|i| scratch[i * m + j] != first) {
                non_constant += 1;
                if non_constant >= l {
                    return true;
                }
            }
        }
        non_constant >= l
    })?;
    Ok(McEstimate::from_successes(
        successes,
        config.trials,
        config.seed,
    ))
}

/// Samples matrices and histograms their exact minimal test lengths.
///
/// Matrices with matching rows and samples whose search ran out of budget
/// are counted separately rather than thrown. The result is deterministic
/// whenever the budget is generous enough that no sample trips it.
pub fn mc_min_test_length_distribution(
    config: &McConfig,
    budget: Duration,
) -> Result<MinLengthHistogram> {
    if budget.is_zero() {
        return Err(Error::Parameter("time budget must be positive".into()));
    }
    let n = usize::try_from(config.profile.n())
        .map_err(|_| Error::Parameter("row count exceeds the addressable range".into()))?;
    let m = config.profile.m();
    let sizes = config.profile.sizes().to_vec();
    let deadline = Instant::now().checked_add(budget);
    let pool = build_pool(config.workers)?;

    let merged = pool.install(|| {
        blocks(config.trials)
            .par_iter()
            .map(|&(block, count)| {
                let mut rng = block_rng(config.seed, block);
                let mut scratch = vec![0u32; n * m];
                let mut histogram: BTreeMap<usize, u64> = BTreeMap::new();
                let mut matching_rows = 0u64;
                let mut unresolved = 0u64;
                for _ in 0..count {
                    fill_matrix(&mut rng, &sizes, n, &mut scratch);
                    let remaining = deadline
                        .map(|d| d.saturating_duration_since(Instant::now()))
                        .unwrap_or(Duration::MAX);
                    if remaining.is_zero() {
                        unresolved += 1;
                        continue;
                    }
                    let rows: Vec<Vec<u32>> =
                        (0..n).map(|i| scratch[i * m..(i + 1) * m].to_vec()).collect();
                    let matrix = DiscreteMatrix::from_rows(rows, Some(sizes.clone()))
                        .expect("sampled symbols are in range");
                    match min_test_length(&matrix, remaining) {
                        Ok(MinTestLength::Exact(len)) => {
                            *histogram.entry(len).or_insert(0) += 1;
                        }
                        Ok(MinTestLength::LowerBound(_)) => unresolved += 1,
                        Err(Error::IndistinguishableRows { .. }) => matching_rows += 1,
                        Err(other) => panic!("unexpected sampling failure: {other}"),
                    }
                }
                (histogram, matching_rows, unresolved)
            })
            .reduce(
                || (BTreeMap::new(), 0, 0),
                |mut a, b| {
                    for (len, count) in b.0 {
                        *a.0.entry(len).or_insert(0) += count;
                    }
                    (a.0, a.1 + b.1, a.2 + b.2)
                },
            )
    });

    Ok(MinLengthHistogram {
        histogram: merged.0,
        matching_rows: merged.1,
        unresolved: merged.2,
        trials: config.trials,
        seed: config.seed,
    })
}
