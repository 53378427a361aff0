use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};

/// Root mean squared difference over `(actual, predicted)` pairs.
pub fn rmse(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Data("rmse of an empty set".into()));
    }
    let sum: f64 = pairs.iter().map(|(a, p)| (a - p) * (a - p)).sum();
    Ok((sum / pairs.len() as f64).sqrt())
}

/// How items tied with the last relevant rating are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelevanceTies {
    /// Every item rated at least as high as the cut-off item is relevant.
    #[default]
    Inclusive,
    /// Exactly `|retrieved|` items are relevant; equal ratings fall back to
    /// ascending item index.
    ByIndex,
}

/// One user's held-out candidates with their true and predicted values.
#[derive(Debug, Clone, PartialEq)]
pub struct UserCandidates {
    pub user: u32,
    pub items: Vec<u32>,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
}

/// `max(1, round_half_up(p * len / 100))`, or 0 for an empty set.
pub fn retrieved_count(len: usize, p_pct: f64) -> usize {
    if len == 0 {
        return 0;
    }
    let exact = p_pct * len as f64 / 100.0;
    ((exact + 0.5).floor() as usize).clamp(1, len)
}

/// Positions of `values` sorted by descending value, then ascending item.
pub fn rank_descending(items: &[u32], values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(Ordering::Equal)
            .then(items[a].cmp(&items[b]))
    });
    order
}

/// Per-user precision; `None` when the user has no candidates.
pub fn user_precision(c: &UserCandidates, p_pct: f64, ties: RelevanceTies) -> Result<Option<f64>> {
    if c.items.len() != c.actual.len() || c.items.len() != c.predicted.len() {
        return shape_err(format!(
            "user {}: {} items, {} ratings, {} predictions",
            c.user,
            c.items.len(),
            c.actual.len(),
            c.predicted.len()
        ));
    }
    let r = retrieved_count(c.items.len(), p_pct);
    if r == 0 {
        return Ok(None);
    }
    let retrieved = &rank_descending(&c.items, &c.predicted)[..r];
    let by_rating = rank_descending(&c.items, &c.actual);
    let mut relevant = vec![false; c.items.len()];
    match ties {
        RelevanceTies::ByIndex => by_rating[..r].iter().for_each(|&i| relevant[i] = true),
        RelevanceTies::Inclusive => {
            let cutoff = c.actual[by_rating[r - 1]];
            for (i, &a) in c.actual.iter().enumerate() {
                relevant[i] = a >= cutoff;
            }
        }
    }
    let hits = retrieved.iter().filter(|&&i| relevant[i]).count();
    Ok(Some(hits as f64 / r as f64))
}

/// Mean per-user precision of the top `p_pct` percent, skipping users
/// without candidates.
pub fn precision_at_pct(users: &[UserCandidates], p_pct: f64, ties: RelevanceTies) -> Result<f64> {
    check_pct(p_pct)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for c in users {
        if let Some(p) = user_precision(c, p_pct, ties)? {
            sum += p;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Data("no user has held-out candidates".into()));
    }
    Ok(sum / count as f64)
}

pub(crate) fn check_pct(p_pct: f64) -> Result<()> {
    if !(p_pct > 0.0 && p_pct <= 100.0) {
        return Err(Error::Config(format!("p must lie in (0, 100], got {p_pct}")));
    }
    Ok(())
}

/// One ranked candidate list and the held-out item it should surface.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub user: u32,
    pub ranked: Vec<u32>,
    pub relevant: u32,
}

impl RankedList {
    /// One-based position of the relevant item within the first `k`.
    pub fn hit_position(&self, k: usize) -> Option<usize> {
        self.ranked.iter().take(k).position(|&i| i == self.relevant).map(|p| p + 1)
    }

    pub fn hit(&self, k: usize) -> f64 {
        if self.hit_position(k).is_some() {
            1.0
        } else {
            0.0
        }
    }

    pub fn ndcg(&self, k: usize) -> f64 {
        self.hit_position(k)
            .map_or(0.0, |pos| 1.0 / ((pos + 1) as f64).log2())
    }
}

fn check_lists(lists: &[RankedList], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    if lists.is_empty() {
        return Err(Error::Data("no ranked lists".into()));
    }
    if let Some(l) = lists.iter().find(|l| l.ranked.len() < k) {
        return shape_err(format!("user {} has {} candidates, fewer than k = {k}", l.user, l.ranked.len()));
    }
    Ok(())
}

/// Fraction of lists whose relevant item appears in the top `k`.
pub fn hit_ratio_at_k(lists: &[RankedList], k: usize) -> Result<f64> {
    check_lists(lists, k)?;
    Ok(lists.iter().map(|l| l.hit(k)).sum::<f64>() / lists.len() as f64)
}

/// Mean of `1 / log2(position + 1)` over lists hit within the top `k`.
pub fn ndcg_at_k(lists: &[RankedList], k: usize) -> Result<f64> {
    check_lists(lists, k)?;
    Ok(lists.iter().map(|l| l.ndcg(k)).sum::<f64>() / lists.len() as f64)
}
