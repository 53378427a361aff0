use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Interaction, InteractionMatrix};

/// Seeded `users x items` matrix observed at `density`, with values
/// `1 + 4 * sigmoid(⟨a_j, b_k⟩)` for uniform rank-`rank` factors. Every user
/// and item gets at least one entry.
pub fn synthetic_low_rank(users: usize, items: usize, rank: usize, density: f64, seed: u64) -> InteractionMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 3.0 / (rank.max(1) as f64).sqrt();
    let mut factors = |count: usize| -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| (0..rank).map(|_| rng.gen_range(-1.0..1.0) * scale).collect())
            .collect()
    };
    let a = factors(users);
    let b = factors(items);
    let value = |j: usize, k: usize| {
        let dot: f64 = a[j].iter().zip(&b[k]).map(|(x, y)| x * y).sum();
        1.0 + 4.0 / (1.0 + (-dot).exp())
    };
    let mut observed = vec![false; users * items];
    for row in observed.chunks_mut(items.max(1)).take(users) {
        for cell in row.iter_mut() {
            *cell = rng.gen_bool(density);
        }
        if items > 0 {
            row[rng.gen_range(0..items)] = true;
        }
    }
    for k in 0..items {
        if users > 0 && !(0..users).any(|j| observed[j * items + k]) {
            observed[rng.gen_range(0..users) * items + k] = true;
        }
    }
    let entries = (0..users)
        .flat_map(|j| (0..items).map(move |k| (j, k)))
        .filter(|&(j, k)| observed[j * items + k])
        .map(|(j, k)| Interaction::new(j as u32, k as u32, value(j, k)))
        .collect();
    InteractionMatrix::from_entries(users, items, entries).expect("valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_coverage_and_range() {
        let m = synthetic_low_rank(50, 60, 3, 0.2, 7);
        assert_eq!((m.num_users(), m.num_items()), (50, 60));
        assert!((0..50).all(|j| m.row_len(j) > 0));
        assert!((0..60).all(|k| m.column_len(k) > 0));
        assert!(m.entries().iter().all(|e| e.value > 1.0 && e.value < 5.0));
        assert_eq!(m, synthetic_low_rank(50, 60, 3, 0.2, 7));
    }
}
