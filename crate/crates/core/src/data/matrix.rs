use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observed interaction. `value` is strictly positive; unknown entries
/// are simply not stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: u32,
    pub item: u32,
    pub value: f64,
    pub timestamp: Option<i64>,
}

impl Interaction {
    pub fn new(user: u32, item: u32, value: f64) -> Self {
        Self {
            user,
            item,
            value,
            timestamp: None,
        }
    }

    pub fn at(mut self, timestamp: i64) -> Self {
        self.timestamp = Some(timestamp);
        self
    }
}

/// Sparse `m x n` interaction matrix with row (user) and column (item)
/// access over the same entry set.
///
/// Entries are kept sorted by `(user, item)`; the column index stores entry
/// positions sorted by `(item, user)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    users: usize,
    items: usize,
    entries: Vec<Interaction>,
    row_ptr: Vec<usize>,
    col_ptr: Vec<usize>,
    col_entries: Vec<u32>,
}

impl InteractionMatrix {
    pub fn empty(users: usize, items: usize) -> Self {
        Self::from_entries(users, items, Vec::new()).expect("empty matrix is valid")
    }

    pub fn from_entries(users: usize, items: usize, mut entries: Vec<Interaction>) -> Result<Self> {
        for e in &entries {
            if e.user as usize >= users || e.item as usize >= items {
                return Err(Error::Data(format!(
                    "entry ({}, {}) outside a {users}x{items} matrix",
                    e.user, e.item
                )));
            }
            if !(e.value.is_finite() && e.value > 0.0) {
                return Err(Error::Data(format!(
                    "entry ({}, {}) has non-positive value {}",
                    e.user, e.item, e.value
                )));
            }
        }
        entries.sort_by_key(|e| (e.user, e.item));
        if let Some(w) = entries
            .windows(2)
            .find(|w| (w[0].user, w[0].item) == (w[1].user, w[1].item))
        {
            return Err(Error::Data(format!(
                "duplicate entry ({}, {})",
                w[0].user, w[0].item
            )));
        }

        let mut row_ptr = vec![0usize; users + 1];
        let mut col_ptr = vec![0usize; items + 1];
        for e in &entries {
            row_ptr[e.user as usize + 1] += 1;
            col_ptr[e.item as usize + 1] += 1;
        }
        for i in 0..users {
            row_ptr[i + 1] += row_ptr[i];
        }
        for i in 0..items {
            col_ptr[i + 1] += col_ptr[i];
        }
        // entries are sorted by user, so filling columns in entry order keeps
        // each column sorted by user
        let mut next = col_ptr.clone();
        let mut col_entries = vec![0u32; entries.len()];
        for (idx, e) in entries.iter().enumerate() {
            let slot = &mut next[e.item as usize];
            col_entries[*slot] = idx as u32;
            *slot += 1;
        }

        Ok(Self {
            users,
            items,
            entries,
            row_ptr,
            col_ptr,
            col_entries,
        })
    }

    #[inline]
    pub fn num_users(&self) -> usize {
        self.users
    }

    #[inline]
    pub fn num_items(&self) -> usize {
        self.items
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Interaction] {
        &self.entries
    }

    /// Entries of user `j`, sorted by item.
    #[inline]
    pub fn row(&self, j: usize) -> &[Interaction] {
        &self.entries[self.row_ptr[j]..self.row_ptr[j + 1]]
    }

    #[inline]
    pub fn row_len(&self, j: usize) -> usize {
        self.row_ptr[j + 1] - self.row_ptr[j]
    }

    /// Entries of item `k`, sorted by user.
    pub fn column(&self, k: usize) -> impl ExactSizeIterator<Item = &Interaction> + '_ {
        self.col_entries[self.col_ptr[k]..self.col_ptr[k + 1]]
            .iter()
            .map(move |&i| &self.entries[i as usize])
    }

    #[inline]
    pub fn column_len(&self, k: usize) -> usize {
        self.col_ptr[k + 1] - self.col_ptr[k]
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    /// Positions into [`entries`](Self::entries) in column-major order.
    pub fn column_order(&self) -> &[u32] {
        &self.col_entries
    }

    pub fn get(&self, j: usize, k: usize) -> Option<f64> {
        let row = self.row(j);
        row.binary_search_by_key(&(k as u32), |e| e.item)
            .ok()
            .map(|i| row[i].value)
    }

    pub fn contains(&self, j: usize, k: usize) -> bool {
        self.get(j, k).is_some()
    }

    pub fn has_timestamps(&self) -> bool {
        self.entries.iter().all(|e| e.timestamp.is_some())
    }

    /// Dense copy of row `j`, unknown entries as 0.
    pub fn dense_row(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.items];
        for e in self.row(j) {
            out[e.item as usize] = e.value;
        }
        out
    }

    pub fn distinct_values(&self) -> usize {
        let mut vals: Vec<u64> = self.entries.iter().map(|e| e.value.to_bits()).collect();
        vals.sort_unstable();
        vals.dedup();
        vals.len()
    }

    pub fn mean_value(&self) -> Option<f64> {
        if self.entries.is_empty() {
            None
        } else {
            Some(self.entries.iter().map(|e| e.value).sum::<f64>() / self.entries.len() as f64)
        }
    }

    /// Same shape, every stored value set to 1.
    pub fn to_implicit(&self) -> Self {
        let mut out = self.clone();
        out.entries.iter_mut().for_each(|e| e.value = 1.0);
        out
    }

    /// Copy with the same dimensions and a subset of entries.
    pub fn with_entries(&self, entries: Vec<Interaction>) -> Result<Self> {
        Self::from_entries(self.users, self.items, entries)
    }

    /// Entries of `self` and `other` combined; fails on overlap.
    pub fn union(&self, other: &Self) -> Result<Self> {
        if (self.users, self.items) != (other.users, other.items) {
            return Err(Error::Data("cannot merge matrices of different shape".into()));
        }
        let mut all = self.entries.clone();
        all.extend_from_slice(&other.entries);
        Self::from_entries(self.users, self.items, all)
    }
}

/// Euclidean distance between the dense rows `j1` and `j2`.
pub fn row_distance(matrix: &InteractionMatrix, j1: usize, j2: usize) -> f64 {
    let (a, b) = (matrix.row(j1), matrix.row(j2));
    let (mut i, mut k) = (0, 0);
    let mut sq = 0.0;
    while i < a.len() || k < b.len() {
        let ia = a.get(i).map_or(u32::MAX, |e| e.item);
        let ib = b.get(k).map_or(u32::MAX, |e| e.item);
        let d = if ia == ib {
            i += 1;
            k += 1;
            a[i - 1].value - b[k - 1].value
        } else if ia < ib {
            i += 1;
            a[i - 1].value
        } else {
            k += 1;
            b[k - 1].value
        };
        sq += d * d;
    }
    sq.sqrt()
}

#[cfg(test)]
pub(crate) fn toy_matrix() -> InteractionMatrix {
    // three users, four items, implicit feedback
    let cells = [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 3)];
    InteractionMatrix::from_entries(
        3,
        4,
        cells
            .iter()
            .map(|&(u, i)| Interaction::new(u, i, 1.0))
            .collect(),
    )
    .unwrap()
}
