use rand::Rng;

use super::measures::{rank_descending, RankedList, UserCandidates};
use crate::data::{sample_excluding, InteractionMatrix};
use crate::error::{shape_err, Error, Result};
use crate::model::Hypothesis;
use crate::numerics::Real;

fn check_dims<T: Real>(h: &Hypothesis<T>, m: &InteractionMatrix) -> Result<()> {
    if h.num_users() != m.num_users() || h.num_items() != m.num_items() {
        return shape_err(format!(
            "{}x{} hypothesis against a {}x{} matrix",
            h.num_users(),
            h.num_items(),
            m.num_users(),
            m.num_items()
        ));
    }
    Ok(())
}

/// `(actual, predicted)` for every held-out entry, in storage order.
pub fn rating_pairs<T: Real>(h: &Hypothesis<T>, heldout: &InteractionMatrix) -> Result<Vec<(f64, f64)>> {
    check_dims(h, heldout)?;
    heldout
        .entries()
        .iter()
        .map(|e| Ok((e.value, h.score(e.user as usize, e.item as usize)?.as_f64())))
        .collect()
}

/// Per-user candidate sets made of the held-out entries.
pub fn rating_candidates<T: Real>(h: &Hypothesis<T>, heldout: &InteractionMatrix) -> Result<Vec<UserCandidates>> {
    check_dims(h, heldout)?;
    (0..heldout.num_users())
        .filter(|&j| heldout.row_len(j) > 0)
        .map(|j| {
            let row = heldout.row(j);
            let items: Vec<u32> = row.iter().map(|e| e.item).collect();
            let predicted = h.score_items(j, &items)?.into_iter().map(Real::as_f64).collect();
            Ok(UserCandidates {
                user: j as u32,
                actual: row.iter().map(|e| e.value).collect(),
                items,
                predicted,
            })
        })
        .collect()
}

/// Ranks `test_item` together with `negatives` by descending score, ties
/// broken by ascending item index.
pub fn rank_with_sampled_negatives<T: Real>(
    h: &Hypothesis<T>,
    user: usize,
    test_item: u32,
    negatives: &[u32],
) -> Result<Vec<u32>> {
    if negatives.contains(&test_item) {
        return Err(Error::Data(format!("test item {test_item} is among the negatives of user {user}")));
    }
    let mut candidates = Vec::with_capacity(negatives.len() + 1);
    candidates.push(test_item);
    candidates.extend_from_slice(negatives);
    let scores: Vec<f64> = h.score_items(user, &candidates)?.into_iter().map(Real::as_f64).collect();
    Ok(rank_descending(&candidates, &scores).into_iter().map(|i| candidates[i]).collect())
}

/// One ranked list per held-out entry. Negatives avoid every item the user
/// has in `observed`, which should cover all known interactions.
pub fn leave_one_out_lists<T: Real, R: Rng + ?Sized>(
    h: &Hypothesis<T>,
    observed: &InteractionMatrix,
    heldout: &InteractionMatrix,
    num_negatives: usize,
    rng: &mut R,
) -> Result<Vec<RankedList>> {
    check_dims(h, heldout)?;
    check_dims(h, observed)?;
    let mut lists = Vec::with_capacity(heldout.num_users());
    for e in heldout.entries() {
        let j = e.user as usize;
        let mut excluded: Vec<u32> = observed.row(j).iter().map(|o| o.item).collect();
        if let Err(pos) = excluded.binary_search(&e.item) {
            excluded.insert(pos, e.item);
        }
        let negatives = sample_excluding(observed.num_items(), &excluded, num_negatives, rng)?;
        lists.push(RankedList {
            user: e.user,
            ranked: rank_with_sampled_negatives(h, j, e.item, &negatives)?,
            relevant: e.item,
        });
    }
    Ok(lists)
}
