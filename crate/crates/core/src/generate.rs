//! Seeded instance generators.
//!
//! All randomness comes from [`SplitMix64`], fully specified by its constants
//! so other implementations can reproduce the same instances:
//!
//! ```text
//! state  ← state + 0x9E3779B97F4A7C15
//! z      ← state
//! z      ← (z ⊕ (z >> 30)) · 0xBF58476D1CE4E5B9
//! z      ← (z ⊕ (z >> 27)) · 0x94D049BB133111EB
//! output ← z ⊕ (z >> 31)
//! ```
//!
//! (all arithmetic wrapping mod 2⁶⁴). A uniform double in `[0, 1)` is
//! `(output >> 11) · 2⁻⁵³`. Cells of the full grid are visited in
//! lexicographic order when sampling patterns and values.

use crate::error::{Error, Result};
use crate::maxflow::pattern_feasible_maxflow;
use crate::tensor::{SparseTensor, TargetSums};

const PATTERN_RETRIES: usize = 1000;
const INFEASIBLE_DRAWS: usize = 10_000;
const INFEASIBLE_DENSITY: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() % (hi - lo + 1) as u64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GenOptions {
    /// When set, entries of `B` are drawn log-uniformly from
    /// `[1/spread, spread]` instead of uniformly from `[0.5, 1.5]`.
    pub value_spread: Option<f64>,
}

fn grid_cells(dims: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = dims.iter().product();
    let mut cells = Vec::with_capacity(total);
    let mut idx = vec![0; dims.len()];
    for _ in 0..total {
        cells.push(idx.clone());
        for k in (0..dims.len()).rev() {
            idx[k] += 1;
            if idx[k] < dims[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    cells
}

/// Samples a support in which every cell is kept with probability `density`,
/// retrying until no slice is empty.
pub fn sample_pattern(dims: &[usize], density: f64, rng: &mut SplitMix64) -> Result<Vec<Vec<usize>>> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidOptions(format!("density {} outside (0, 1]", density)));
    }
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidOptions(format!("bad dims {:?}", dims)));
    }
    let cells = grid_cells(dims);
    for _ in 0..PATTERN_RETRIES {
        let pattern: Vec<Vec<usize>> = cells
            .iter()
            .filter(|_| rng.next_f64() < density)
            .cloned()
            .collect();
        let probe = SparseTensor::from_entries(dims.to_vec(), pattern.iter().map(|c| (c.clone(), 1.0)).collect())?;
        if probe.zero_slices().is_empty() {
            return Ok(pattern);
        }
    }
    Err(Error::GeneratorExhausted(PATTERN_RETRIES))
}

fn fill(dims: &[usize], pattern: &[Vec<usize>], rng: &mut SplitMix64, opts: &GenOptions) -> Result<SparseTensor> {
    let entries = pattern
        .iter()
        .map(|c| {
            let v = match opts.value_spread {
                Some(spread) => rng.uniform(-spread.ln(), spread.ln()).exp(),
                None => rng.uniform(0.5, 1.5),
            };
            (c.clone(), v)
        })
        .collect();
    SparseTensor::from_entries(dims.to_vec(), entries)
}

/// A scalable pair `(B, s)`: `s` is read off a positive tensor on the sampled
/// pattern, and `B` is an independent positive draw on the same pattern.
pub fn generate_feasible(dims: &[usize], density: f64, seed: u64) -> Result<(SparseTensor, TargetSums)> {
    generate_feasible_with(dims, density, seed, &GenOptions::default())
}

pub fn generate_feasible_with(
    dims: &[usize],
    density: f64,
    seed: u64,
    opts: &GenOptions,
) -> Result<(SparseTensor, TargetSums)> {
    if let Some(spread) = opts.value_spread {
        if !(spread >= 1.0) {
            return Err(Error::InvalidOptions(format!("value spread {} below 1", spread)));
        }
    }
    let mut rng = SplitMix64::new(seed);
    let pattern = sample_pattern(dims, density, &mut rng)?;
    let witness = fill(dims, &pattern, &mut rng, &GenOptions::default())?;
    let targets = TargetSums::from_tensor(&witness)?;
    let b = fill(dims, &pattern, &mut rng, opts)?;
    Ok((b, targets))
}

/// A `size × size` matrix instance that no positive matrix on its pattern can
/// match, found by rejection against the max-flow oracle.
pub fn generate_infeasible_2mode(size: usize, seed: u64) -> Result<(SparseTensor, TargetSums)> {
    if size < 2 {
        return Err(Error::InvalidOptions("infeasible instances need size ≥ 2".into()));
    }
    let dims = [size, size];
    let mut rng = SplitMix64::new(seed);
    for _ in 0..INFEASIBLE_DRAWS {
        let pattern = sample_pattern(&dims, INFEASIBLE_DENSITY, &mut rng)?;
        let b = fill(&dims, &pattern, &mut rng, &GenOptions::default())?;
        let rows: Vec<f64> = (0..size).map(|_| rng.uniform(0.5, 1.5)).collect();
        let cols: Vec<f64> = (0..size).map(|_| rng.uniform(0.5, 1.5)).collect();
        let total: f64 = rows.iter().sum();
        let col_total: f64 = cols.iter().sum();
        let cols = cols.iter().map(|c| c * total / col_total).collect();
        let s = TargetSums::new(vec![rows, cols])?;
        if !pattern_feasible_maxflow(&b, &s)? {
            return Ok((b, s));
        }
    }
    fallback_infeasible(size)
}

/// Full matrix with `b_11` removed; column 1 demands more than rows 2..n hold.
fn fallback_infeasible(size: usize) -> Result<(SparseTensor, TargetSums)> {
    let mut data = vec![1.0; size * size];
    data[0] = 0.0;
    let b = SparseTensor::from_dense(vec![size, size], &data)?;
    let n = size as f64;
    let mut cols = vec![0.5 / (n - 1.0); size];
    cols[0] = n - 0.5;
    Ok((b, TargetSums::new(vec![vec![1.0; size], cols])?))
}
