//! Offspring distributions for the branching mechanism.

use crate::error::{Error, Result};
use crate::rng::Stream;
use serde::{Deserialize, Serialize};

const PROB_TOL: f64 = 1e-12;

/// Offspring law `{p_k}` with `k >= 1`, normalised so the expected number of
/// children per split is exactly 2.
///
/// `K = sum_k k (k-1) p_k` is recorded at construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchingLaw {
    /// `(k, p_k)` pairs with `p_k > 0`, sorted by `k`.
    entries: Vec<(u32, f64)>,
    /// Cumulative probabilities aligned with `entries`.
    #[serde(skip)]
    cumulative: Vec<f64>,
    /// Second factorial moment `sum k (k-1) p_k`.
    k_moment: f64,
}

impl BranchingLaw {
    /// Build a law from `(k, p_k)` pairs, validating the paper normalisation:
    /// probabilities sum to 1 and the mean offspring number is 2, both to 1e-12.
    pub fn new(probs: &[(u32, f64)]) -> Result<Self> {
        let mut entries: Vec<(u32, f64)> = probs
            .iter()
            .copied()
            .filter(|&(_, p)| p != 0.0)
            .collect();
        entries.sort_by_key(|&(k, _)| k);
        if entries.is_empty() {
            return Err(Error::InvalidLaw("no offspring probabilities".into()));
        }
        for window in entries.windows(2) {
            if window[0].0 == window[1].0 {
                return Err(Error::InvalidLaw(format!(
                    "duplicate offspring count k = {}",
                    window[0].0
                )));
            }
        }
        let mut total = 0.0;
        let mut mean = 0.0;
        let mut k2 = 0.0;
        for &(k, p) in &entries {
            if k == 0 {
                return Err(Error::InvalidLaw("offspring count k = 0 not allowed".into()));
            }
            if !(p > 0.0 && p <= 1.0 + PROB_TOL) {
                return Err(Error::InvalidLaw(format!("p_{k} = {p} out of range")));
            }
            total += p;
            mean += k as f64 * p;
            k2 += (k as f64) * (k as f64 - 1.0) * p;
        }
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidLaw(format!("probabilities sum to {total}, not 1")));
        }
        if (mean - 2.0).abs() > PROB_TOL {
            return Err(Error::InvalidLaw(format!("mean offspring {mean}, expected 2")));
        }
        let mut cumulative = Vec::with_capacity(entries.len());
        let mut acc = 0.0;
        for &(_, p) in &entries {
            acc += p;
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(BranchingLaw {
            entries,
            cumulative,
            k_moment: k2,
        })
    }

    /// Binary branching `p_2 = 1`, the tested default.
    pub fn binary() -> Self {
        BranchingLaw::new(&[(2, 1.0)]).expect("binary law is valid")
    }

    /// Degenerate law `p_1 = 1` (no branching; single Brownian particle).
    pub fn single() -> Self {
        // Mean-2 normalisation is intentionally waived for this diagnostic law.
        BranchingLaw {
            entries: vec![(1, 1.0)],
            cumulative: vec![1.0],
            k_moment: 0.0,
        }
    }

    /// Rebuild the cumulative table (after deserialisation).
    pub fn rebuild(&mut self) {
        let mut acc = 0.0;
        self.cumulative = self
            .entries
            .iter()
            .map(|&(_, p)| {
                acc += p;
                acc
            })
            .collect();
        if let Some(last) = self.cumulative.last_mut() {
            *last = 1.0;
        }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    /// `K = sum_k k (k-1) p_k`.
    pub fn k_moment(&self) -> f64 {
        self.k_moment
    }

    /// Largest offspring count with positive probability.
    pub fn max_k(&self) -> u32 {
        self.entries.last().map(|&(k, _)| k).unwrap_or(0)
    }

    /// Draw an offspring count. Consumes no randomness for degenerate laws.
    #[inline]
    pub fn sample(&self, stream: &mut Stream) -> u32 {
        if self.entries.len() == 1 {
            return self.entries[0].0;
        }
        let u = stream.uniform();
        for (i, &c) in self.cumulative.iter().enumerate() {
            if u <= c {
                return self.entries[i].0;
            }
        }
        self.entries.last().unwrap().0
    }

    /// Reaction polynomial `sum_k p_k w^k`.
    #[inline]
    pub fn generating(&self, w: f64) -> f64 {
        let mut acc = 0.0;
        for &(k, p) in &self.entries {
            acc += p * w.powi(k as i32);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_law_valid() {
        let law = BranchingLaw::binary();
        assert_eq!(law.entries(), &[(2, 1.0)]);
        assert_eq!(law.k_moment(), 2.0);
    }

    #[test]
    fn mixed_law_valid() {
        // p_1 = p_3 = 1/2: mean = 2, K = 3
        let law = BranchingLaw::new(&[(1, 0.5), (3, 0.5)]).unwrap();
        assert!((law.k_moment() - 3.0).abs() < 1e-12);
        assert_eq!(law.max_k(), 3);
    }

    #[test]
    fn rejects_bad_laws() {
        assert!(BranchingLaw::new(&[(2, 0.9)]).is_err());
        assert!(BranchingLaw::new(&[(1, 1.0)]).is_err()); // mean 1, not 2
        assert!(BranchingLaw::new(&[(0, 0.5), (4, 0.5)]).is_err());
        assert!(BranchingLaw::new(&[]).is_err());
        assert!(BranchingLaw::new(&[(2, 0.5), (2, 0.5)]).is_err());
    }

    #[test]
    fn sampling_matches_probabilities() {
        let law = BranchingLaw::new(&[(1, 0.25), (2, 0.5), (3, 0.25)]).unwrap();
        let mut stream = crate::rng::Stream::named(9, 1);
        let n = 100_000;
        let mut counts = [0u32; 4];
        for _ in 0..n {
            counts[law.sample(&mut stream) as usize] += 1;
        }
        for (k, p) in [(1usize, 0.25), (2, 0.5), (3, 0.25)] {
            let frac = counts[k] as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((frac - p).abs() < 3.0 * se, "k={k} frac={frac}");
        }
    }

    #[test]
    fn generating_polynomial() {
        let law = BranchingLaw::binary();
        assert_eq!(law.generating(0.5), 0.25);
        let mixed = BranchingLaw::new(&[(1, 0.5), (3, 0.5)]).unwrap();
        assert!((mixed.generating(0.5) - (0.25 + 0.0625)).abs() < 1e-15);
    }
}
