//! Restricted isometry constants.
//!
//! The order-`s` constant is the largest deviation `max(lambda_max - 1, 1 - lambda_min)`
//! of the Gram block `Phi_S' Phi_S` over all column subsets of size `s`. Exhaustive
//! enumeration is exact; the sampled variant gives a lower bound.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numkernel::{extreme_eigenvalues, DenseMatrix};

pub const DEFAULT_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RicResult {
    pub order: usize,
    pub delta: f64,
    pub witness: Vec<usize>,
    pub subsets_examined: u128,
    pub exact: bool,
}

impl RicResult {
    /// The isometry inequality only holds as a restricted isometry when `delta < 1`.
    pub fn rip_holds(&self) -> bool {
        self.delta < 1.0
    }

    /// `order,delta,exact,witness` with the witness space-separated.
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{}",
            self.order,
            self.delta,
            self.exact,
            join_indices(&self.witness, " ")
        )
    }
}

pub(crate) fn join_indices(idx: &[usize], sep: &str) -> String {
    idx.iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(sep)
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Deviation of one column subset's Gram spectrum from 1.
pub fn subset_deviation(phi: &DenseMatrix, subset: &[usize]) -> f64 {
    let g = phi.gram(subset);
    let (lo, hi) = extreme_eigenvalues(&g).expect("Gram blocks are square and symmetric");
    (hi - 1.0).max(1.0 - lo)
}

fn validate_order(phi: &DenseMatrix, order: usize) -> Result<()> {
    if order == 0 {
        return Err(Error::validation("RIC order must be positive"));
    }
    if order > phi.cols() {
        return Err(Error::validation(format!(
            "RIC order {order} exceeds the column count {}",
            phi.cols()
        )));
    }
    Ok(())
}

/// Advances `c` to the next `k`-combination of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in (i + 1)..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[derive(Clone)]
struct Best {
    delta: f64,
    witness: Vec<usize>,
    examined: u128,
}

/// Scans every combination whose first element is `first`, lexicographically.
fn scan_leading(phi: &DenseMatrix, order: usize, first: usize) -> Best {
    let n = phi.cols();
    let mut combo: Vec<usize> = (0..order).map(|i| first + i).collect();
    let mut best = Best {
        delta: f64::NEG_INFINITY,
        witness: combo.clone(),
        examined: 0,
    };
    loop {
        let d = subset_deviation(phi, &combo);
        best.examined += 1;
        if d > best.delta {
            best.delta = d;
            best.witness.copy_from_slice(&combo);
        }
        if !next_combination(&mut combo, n) || combo[0] != first {
            break;
        }
    }
    best
}

/// Ordered merge: a later block wins only with a strictly larger deviation, so the
/// witness is the lexicographically first maximizer regardless of scheduling.
fn merge(blocks: Vec<Best>) -> Best {
    let mut iter = blocks.into_iter();
    let mut acc = iter.next().expect("at least one block");
    for b in iter {
        acc.examined += b.examined;
        if b.delta > acc.delta {
            acc.delta = b.delta;
            acc.witness = b.witness;
        }
    }
    acc
}

/// Exact constant by enumerating all `C(n, order)` subsets.
pub fn ric_exact(phi: &DenseMatrix, order: usize, cap: u128) -> Result<RicResult> {
    validate_order(phi, order)?;
    let count = binomial(phi.cols(), order);
    if count > cap {
        return Err(Error::Capacity { count, cap });
    }
    let leading: Vec<usize> = (0..=phi.cols() - order).collect();

    #[cfg(feature = "parallel")]
    let blocks: Vec<Best> = {
        use rayon::prelude::*;
        leading
            .par_iter()
            .map(|&f| scan_leading(phi, order, f))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let blocks: Vec<Best> = leading
        .iter()
        .map(|&f| scan_leading(phi, order, f))
        .collect();

    let best = merge(blocks);
    debug_assert_eq!(best.examined, count);
    Ok(RicResult {
        order,
        delta: best.delta,
        witness: best.witness,
        subsets_examined: best.examined,
        exact: true,
    })
}

/// Lower bound from `samples` distinct uniformly drawn subsets. Falls back to
/// exhaustive enumeration when `samples >= C(n, order)`.
pub fn ric_sampled_lower_bound(
    phi: &DenseMatrix,
    order: usize,
    samples: u64,
    seed: u64,
) -> Result<RicResult> {
    validate_order(phi, order)?;
    if samples == 0 {
        return Err(Error::validation("at least one sample is required"));
    }
    let total = binomial(phi.cols(), order);
    if samples as u128 >= total {
        return ric_exact(phi, order, total);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<Vec<usize>> = HashSet::with_capacity(samples as usize);
    let mut drawn: Vec<Vec<usize>> = Vec::with_capacity(samples as usize);
    while (drawn.len() as u64) < samples {
        let mut s = sample(&mut rng, phi.cols(), order).into_vec();
        s.sort_unstable();
        if seen.insert(s.clone()) {
            drawn.push(s);
        }
    }

    #[cfg(feature = "parallel")]
    let deviations: Vec<f64> = {
        use rayon::prelude::*;
        drawn.par_iter().map(|s| subset_deviation(phi, s)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let deviations: Vec<f64> = drawn.iter().map(|s| subset_deviation(phi, s)).collect();

    let mut best = 0;
    for (i, d) in deviations.iter().enumerate() {
        if *d > deviations[best] {
            best = i;
        }
    }
    Ok(RicResult {
        order,
        delta: deviations[best],
        witness: drawn.swap_remove(best),
        subsets_examined: samples as u128,
        exact: false,
    })
}
