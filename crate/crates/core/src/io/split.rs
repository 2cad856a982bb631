use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

fn permutation(m: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Random `(train, test)` index split with `round(fraction·M)` test samples.
pub fn fraction_split(m: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let test = (test_fraction * m as f64).round() as usize;
    if !(test_fraction > 0.0 && test_fraction < 1.0) || test == 0 || test >= m {
        return Err(Error::InvalidInput(format!("test fraction {test_fraction} leaves an empty part of {m} samples")));
    }
    let idx = permutation(m, seed);
    let (mut te, mut tr) = (idx[..test].to_vec(), idx[test..].to_vec());
    te.sort_unstable();
    tr.sort_unstable();
    Ok((tr, te))
}

/// Fold `fold` of `folds` over a seeded permutation; test sets of different
/// folds are disjoint and together cover `0..M`.
pub fn fold_split(m: usize, folds: usize, fold: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if folds < 2 || folds > m {
        return Err(Error::InvalidInput(format!("need 2 <= folds <= M, got {folds} folds for {m} samples")));
    }
    if fold >= folds {
        return Err(Error::InvalidInput(format!("fold {fold} outside 0..{folds}")));
    }
    let idx = permutation(m, seed);
    let (start, end) = (fold * m / folds, (fold + 1) * m / folds);
    let mut te = idx[start..end].to_vec();
    let mut tr: Vec<usize> = idx[..start].iter().chain(&idx[end..]).copied().collect();
    te.sort_unstable();
    tr.sort_unstable();
    Ok((tr, te))
}

/// `(μ̂, sd)` with `μ̂ = errors/M_test` and `sd = sqrt(μ̂(1−μ̂)/M_test)`.
pub fn error_rate_estimate(errors: usize, m_test: usize) -> Result<(f64, f64)> {
    if m_test == 0 || errors > m_test {
        return Err(Error::InvalidInput(format!("{errors} errors out of {m_test} test samples")));
    }
    let mu = errors as f64 / m_test as f64;
    Ok((mu, (mu * (1.0 - mu) / m_test as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn fraction_examples() {
        let (tr, te) = fraction_split(10, 0.5, 3).unwrap();
        assert_eq!((tr.len(), te.len()), (5, 5));
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(fraction_split(10, 0.5, 3).unwrap(), (tr, te));
        assert!(fraction_split(10, 0.0, 1).is_err());
        assert!(fraction_split(10, 0.01, 1).is_err());
        assert!(fraction_split(10, 1.0, 1).is_err());
    }

    #[test]
    fn folds_partition_the_samples() {
        let mut seen = vec![0; 23];
        for f in 0..5 {
            let (tr, te) = fold_split(23, 5, f, 9).unwrap();
            assert_eq!(tr.len() + te.len(), 23);
            te.iter().for_each(|&i| seen[i] += 1);
            assert!(te.iter().all(|i| !tr.contains(i)));
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert!(fold_split(5, 6, 0, 0).is_err());
    }

    #[test]
    fn train_label_share_is_hypergeometric() {
        // 300 of 1000 samples are class 1; train has 700 draws without replacement
        let labels: Vec<usize> = (0..1000).map(|i| (i < 300) as usize).collect();
        let var: f64 = 700.0 * 0.3 * 0.7 * (300.0 / 999.0);
        for seed in 0..20 {
            let (tr, _) = fraction_split(1000, 0.3, seed).unwrap();
            let ones = tr.iter().filter(|&&i| labels[i] == 1).count() as f64;
            assert!((ones - 210.0).abs() < 4.0 * var.sqrt(), "{ones}");
        }
    }

    #[test]
    fn error_rate_examples() {
        assert_eq!(error_rate_estimate(0, 100).unwrap(), (0.0, 0.0));
        let (mu, sd) = error_rate_estimate(25, 100).unwrap();
        assert_eq!(mu, 0.25);
        assert!((sd - 0.0433).abs() < 5e-5);
        assert!(error_rate_estimate(1, 0).is_err());
    }

    #[test]
    fn sd_matches_simulated_folds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (p, m) = (0.2, 400);
        let rates: Vec<f64> = (0..4000)
            .map(|_| (0..m).filter(|_| rng.random::<f64>() < p).count() as f64 / m as f64)
            .collect();
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        let sd = (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (rates.len() - 1) as f64).sqrt();
        let (_, plug) = error_rate_estimate((p * m as f64) as usize, m).unwrap();
        assert!((sd - plug).abs() < 0.05 * plug, "{sd} vs {plug}");
    }
}
