use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Interaction, InteractionMatrix};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitProtocol {
    RandomRatio,
    LeaveOneOut,
}

/// Train / validation / test partition of one matrix. All three parts share
/// the source dimensions.
#[derive(Debug, Clone)]
pub struct SplitBundle {
    pub train: InteractionMatrix,
    pub validation: InteractionMatrix,
    pub test: InteractionMatrix,
    pub protocol: SplitProtocol,
    pub seed: u64,
}

impl SplitBundle {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.train.nnz(), self.validation.nnz(), self.test.nnz())
    }

    /// Every observed entry regardless of part.
    pub fn all(&self) -> Result<InteractionMatrix> {
        self.train.union(&self.validation)?.union(&self.test)
    }

    /// Number of users/items seen in validation or test but not in train.
    pub fn cold_counts(&self) -> (usize, usize) {
        let m = self.train.num_users();
        let n = self.train.num_items();
        let cold_users = (0..m)
            .filter(|&j| {
                self.train.row_len(j) == 0
                    && (self.validation.row_len(j) > 0 || self.test.row_len(j) > 0)
            })
            .count();
        let cold_items = (0..n)
            .filter(|&k| {
                self.train.column_len(k) == 0
                    && (self.validation.column_len(k) > 0 || self.test.column_len(k) > 0)
            })
            .count();
        (cold_users, cold_items)
    }

    fn warn_cold(&self) {
        let (u, i) = self.cold_counts();
        if u + i > 0 {
            warn!("{u} users and {i} items appear only outside the training part");
        }
    }
}

/// Shuffles all entries with the `split` sub-stream of `seed` and cuts them
/// into three parts with sizes `round(r0 * N)`, `round(r1 * N)` and the rest.
pub fn split_random(matrix: &InteractionMatrix, ratios: [f64; 3], seed: u64) -> Result<SplitBundle> {
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::Config(format!("split ratios must be non-negative, got {ratios:?}")));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios must sum to 1, got {ratios:?} (sum {sum})"
        )));
    }
    let total = matrix.nnz();
    let n_train = ((ratios[0] * total as f64).round() as usize).min(total);
    let n_val = ((ratios[1] * total as f64).round() as usize).min(total - n_train);

    let mut entries: Vec<Interaction> = matrix.entries().to_vec();
    entries.shuffle(&mut rng::stream(seed, Stream::Split));
    let test: Vec<Interaction> = entries.split_off(n_train + n_val);
    let validation: Vec<Interaction> = entries.split_off(n_train);

    let bundle = SplitBundle {
        train: matrix.with_entries(entries)?,
        validation: matrix.with_entries(validation)?,
        test: matrix.with_entries(test)?,
        protocol: SplitProtocol::RandomRatio,
        seed,
    };
    bundle.warn_cold();
    Ok(bundle)
}

/// Holds out each user's latest interaction (ties: highest item index).
/// Users with fewer than two interactions stay entirely in train.
pub fn split_leave_one_out(matrix: &InteractionMatrix) -> Result<SplitBundle> {
    if !matrix.has_timestamps() {
        return Err(Error::Data(
            "leave-one-out needs a timestamp on every interaction".into(),
        ));
    }
    let mut train = Vec::with_capacity(matrix.nnz());
    let mut test = Vec::with_capacity(matrix.num_users());
    let mut skipped = 0usize;
    for j in 0..matrix.num_users() {
        let row = matrix.row(j);
        if row.len() < 2 {
            if !row.is_empty() {
                skipped += 1;
            }
            train.extend_from_slice(row);
            continue;
        }
        let latest = row
            .iter()
            .enumerate()
            .max_by_key(|(_, e)| (e.timestamp.expect("checked"), e.item))
            .map(|(i, _)| i)
            .expect("non-empty row");
        for (i, e) in row.iter().enumerate() {
            if i == latest {
                test.push(*e);
            } else {
                train.push(*e);
            }
        }
    }
    if skipped > 0 {
        warn!("{skipped} users with a single interaction kept train-only");
    }
    Ok(SplitBundle {
        train: matrix.with_entries(train)?,
        validation: InteractionMatrix::empty(matrix.num_users(), matrix.num_items()),
        test: matrix.with_entries(test)?,
        protocol: SplitProtocol::LeaveOneOut,
        seed: 0,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn matrix_with(n: usize) -> InteractionMatrix {
        let entries = (0..n)
            .map(|i| Interaction::new((i % 4) as u32, (i / 4) as u32, 1.0 + (i % 5) as f64))
            .collect();
        InteractionMatrix::from_entries(4, n / 4 + 1, entries).unwrap()
    }

    #[test]
    fn ten_entries_split_eight_one_one() {
        let b = split_random(&matrix_with(10), [0.8, 0.1, 0.1], 17).unwrap();
        assert_eq!(b.counts(), (8, 1, 1));
    }

    #[test]
    fn same_seed_same_partition() {
        let m = matrix_with(40);
        let a = split_random(&m, [0.8, 0.1, 0.1], 3).unwrap();
        let b = split_random(&m, [0.8, 0.1, 0.1], 3).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        let c = split_random(&m, [0.8, 0.1, 0.1], 4).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn ratio_sum_violation() {
        assert!(matches!(
            split_random(&matrix_with(10), [0.8, 0.2, 0.1], 0),
            Err(Error::Config(_))
        ));
    }

    fn timed(user: u32, item: u32, t: i64) -> Interaction {
        Interaction::new(user, item, 3.0).at(t)
    }

    #[test]
    fn leave_one_out_takes_latest() {
        let m = InteractionMatrix::from_entries(
            1,
            3,
            vec![timed(0, 0, 3), timed(0, 1, 9), timed(0, 2, 5)],
        )
        .unwrap();
        let b = split_leave_one_out(&m).unwrap();
        assert_eq!(b.test.entries().len(), 1);
        assert_eq!(b.test.entries()[0].item, 1);
        assert_eq!(b.train.nnz(), 2);
        assert!(b.validation.is_empty());
    }

    #[test]
    fn leave_one_out_tie_takes_highest_item() {
        // enumerate every placement of the tied maximum among four items
        for a in 0..4u32 {
            for b in (a + 1)..4 {
                let entries = (0..4u32)
                    .map(|i| timed(0, i, if i == a || i == b { 100 } else { i as i64 }))
                    .collect();
                let m = InteractionMatrix::from_entries(1, 4, entries).unwrap();
                let split = split_leave_one_out(&m).unwrap();
                assert_eq!(split.test.entries()[0].item, a.max(b));
            }
        }
    }

    #[test]
    fn single_interaction_user_stays_in_train() {
        let m = InteractionMatrix::from_entries(
            2,
            3,
            vec![timed(0, 0, 1), timed(1, 1, 1), timed(1, 2, 2)],
        )
        .unwrap();
        let b = split_leave_one_out(&m).unwrap();
        assert_eq!(b.test.row_len(0), 0);
        assert_eq!(b.train.row_len(0), 1);
        assert_eq!(b.test.row_len(1), 1);
    }

    #[test]
    fn leave_one_out_requires_timestamps() {
        let m = InteractionMatrix::from_entries(1, 2, vec![Interaction::new(0, 0, 1.0), Interaction::new(0, 1, 1.0)]).unwrap();
        assert!(split_leave_one_out(&m).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn parts_partition_the_entry_set(
            cells in prop::collection::btree_set((0u32..12, 0u32..15), 0..120),
            seed in any::<u64>(),
        ) {
            let entries: Vec<Interaction> = cells.iter().map(|&(u, i)| Interaction::new(u, i, 2.0)).collect();
            let m = InteractionMatrix::from_entries(12, 15, entries).unwrap();
            let b = split_random(&m, [0.8, 0.1, 0.1], seed).unwrap();
            let (tr, va, te) = b.counts();
            prop_assert_eq!(tr + va + te, m.nnz());
            let exact = 0.8 * m.nnz() as f64;
            prop_assert!((tr as f64 - exact).abs() <= 1.0);
            // union rebuilds the original; from_entries rejects any overlap
            let all = b.all().unwrap();
            prop_assert_eq!(all, m);
        }
    }
}
