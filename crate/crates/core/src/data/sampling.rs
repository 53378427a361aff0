use std::collections::HashSet;

use rand::Rng;

use super::InteractionMatrix;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Uniformly samples `count` distinct items outside `excluded` (sorted,
/// deduplicated) from `0..num_items`.
pub fn sample_excluding<R: Rng + ?Sized>(
    num_items: usize,
    excluded: &[u32],
    count: usize,
    rng: &mut R,
) -> Result<Vec<u32>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let legal = num_items - excluded.len();
    if legal == 0 {
        return Err(Error::Data("user has interacted with every item".into()));
    }
    if count > legal {
        return Err(Error::Data(format!(
            "asked for {count} negatives but only {legal} items are unobserved"
        )));
    }
    let is_excluded = |k: u32| excluded.binary_search(&k).is_ok();

    if count * 2 <= legal {
        // expected draws per accepted sample stay below 2 * n / legal
        let mut seen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let k = rng.gen_range(0..num_items as u32);
            if !is_excluded(k) && seen.insert(k) {
                out.push(k);
            }
        }
        Ok(out)
    } else {
        let mut pool: Vec<u32> = (0..num_items as u32).filter(|&k| !is_excluded(k)).collect();
        for i in 0..count {
            let j = rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(count);
        Ok(pool)
    }
}

/// Items `k` with `(j, k)` unobserved in `matrix`, drawn with `rng`.
pub fn sample_negatives_with<R: Rng + ?Sized>(
    matrix: &InteractionMatrix,
    user: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<u32>> {
    let observed: Vec<u32> = matrix.row(user).iter().map(|e| e.item).collect();
    sample_excluding(matrix.num_items(), &observed, count, rng)
}

/// Seeded convenience form of [`sample_negatives_with`].
pub fn sample_negatives(matrix: &InteractionMatrix, user: usize, count: usize, seed: u64) -> Result<Vec<u32>> {
    sample_negatives_with(matrix, user, count, &mut rng::stream(seed, Stream::Negatives))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Interaction;

    fn user_with(items: &[u32], n: usize) -> InteractionMatrix {
        InteractionMatrix::from_entries(
            1,
            n,
            items.iter().map(|&k| Interaction::new(0, k, 1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn only_legal_negative() {
        let m = user_with(&[0, 1, 2], 4);
        assert_eq!(sample_negatives(&m, 0, 1, 1).unwrap(), vec![3]);
        assert!(sample_negatives(&m, 0, 2, 1).is_err());
    }

    #[test]
    fn zero_count_is_empty() {
        let m = user_with(&[0], 4);
        assert!(sample_negatives(&m, 0, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn saturated_user_errors() {
        let m = user_with(&[0, 1, 2], 3);
        assert!(sample_negatives(&m, 0, 1, 1).is_err());
    }

    #[test]
    fn no_duplicates_and_never_observed() {
        let observed: Vec<u32> = (0..50).map(|i| i * 2).collect();
        let m = user_with(&observed, 100);
        for seed in 0..20 {
            for count in [5, 30, 50] {
                let s = sample_negatives(&m, 0, count, seed).unwrap();
                assert_eq!(s.len(), count);
                let set: HashSet<u32> = s.iter().copied().collect();
                assert_eq!(set.len(), count);
                assert!(s.iter().all(|k| k % 2 == 1));
            }
        }
    }

    #[test]
    fn draws_are_uniform() {
        // 10 observed of 100 -> 90 legal negatives; 100k single draws
        let observed: Vec<u32> = (0..10).map(|i| i * 10).collect();
        let m = user_with(&observed, 100);
        let mut rng = rng::stream(77, Stream::Negatives);
        let draws = 100_000usize;
        let mut counts = vec![0usize; 100];
        for _ in 0..draws {
            counts[sample_negatives_with(&m, 0, 1, &mut rng).unwrap()[0] as usize] += 1;
        }
        let p = 1.0 / 90.0;
        let mean = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        let mut chi2 = 0.0;
        for (k, &c) in counts.iter().enumerate() {
            if observed.contains(&(k as u32)) {
                assert_eq!(c, 0);
                continue;
            }
            assert!((c as f64 - mean).abs() < 5.0 * sigma, "item {k}: {c} vs {mean}");
            chi2 += (c as f64 - mean).powi(2) / mean;
        }
        // 89 dof: mean 89, sd ~13.3; 5 sd bound
        assert!(chi2 < 89.0 + 5.0 * (2.0f64 * 89.0).sqrt(), "chi2 {chi2}");
    }
}
