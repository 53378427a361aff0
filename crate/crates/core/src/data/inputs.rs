//! Learnable input values aligned with the non-zero pattern of `R` and `Rᵀ`.
//!
//! User `j`'s input row only has slots for the items in `N_j` and item `k`'s
//! input row only for the users in `N_k`. Everything else is structurally
//! absent: there is no storage for it, so no update can ever make it non-zero.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::InteractionMatrix;
use crate::error::{Error, Result};
use crate::numerics::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    /// `value / value_max`
    Ratings,
    /// all ones
    Implicit,
}

/// CSR (users) and CSC (items) index arrays of a training matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputPattern {
    users: usize,
    items: usize,
    row_ptr: Vec<u32>,
    /// item index of every user-side slot
    row_items: Vec<u32>,
    col_ptr: Vec<u32>,
    /// user index of every item-side slot
    col_users: Vec<u32>,
}

impl InputPattern {
    pub fn from_matrix(matrix: &InteractionMatrix) -> Self {
        let row_items = matrix.entries().iter().map(|e| e.item).collect();
        let col_users = matrix
            .column_order()
            .iter()
            .map(|&i| matrix.entries()[i as usize].user)
            .collect();
        Self {
            users: matrix.num_users(),
            items: matrix.num_items(),
            row_ptr: matrix.row_ptr().iter().map(|&p| p as u32).collect(),
            row_items,
            col_ptr: matrix.col_ptr().iter().map(|&p| p as u32).collect(),
            col_users,
        }
    }

    /// Rebuilds a pattern from stored index arrays, validating consistency.
    pub fn from_parts(
        users: usize,
        items: usize,
        row_ptr: Vec<u32>,
        row_items: Vec<u32>,
        col_ptr: Vec<u32>,
        col_users: Vec<u32>,
    ) -> Result<Self> {
        let bad = |m: &str| Err(Error::Data(format!("inconsistent input pattern: {m}")));
        if row_ptr.len() != users + 1 || col_ptr.len() != items + 1 {
            return bad("pointer array length");
        }
        let nnz = row_items.len();
        if col_users.len() != nnz
            || *row_ptr.last().unwrap() as usize != nnz
            || *col_ptr.last().unwrap() as usize != nnz
        {
            return bad("slot count");
        }
        if row_ptr.windows(2).any(|w| w[0] > w[1]) || col_ptr.windows(2).any(|w| w[0] > w[1]) {
            return bad("pointers not monotone");
        }
        if row_items.iter().any(|&i| i as usize >= items) || col_users.iter().any(|&u| u as usize >= users) {
            return bad("index out of range");
        }
        let pattern = Self {
            users,
            items,
            row_ptr,
            row_items,
            col_ptr,
            col_users,
        };
        let mut by_rows: Vec<(u32, u32)> = (0..users)
            .flat_map(|j| pattern.user_items(j).iter().map(move |&k| (j as u32, k)))
            .collect();
        let mut by_cols: Vec<(u32, u32)> = (0..items)
            .flat_map(|k| pattern.item_users(k).iter().map(move |&j| (j, k as u32)))
            .collect();
        by_rows.sort_unstable();
        by_cols.sort_unstable();
        if by_rows != by_cols || by_rows.windows(2).any(|w| w[0] == w[1]) {
            return bad("row and column indices describe different entries");
        }
        Ok(pattern)
    }

    pub fn num_users(&self) -> usize {
        self.users
    }

    pub fn num_items(&self) -> usize {
        self.items
    }

    pub fn nnz(&self) -> usize {
        self.row_items.len()
    }

    #[inline]
    pub fn user_range(&self, j: usize) -> Range<usize> {
        self.row_ptr[j] as usize..self.row_ptr[j + 1] as usize
    }

    #[inline]
    pub fn item_range(&self, k: usize) -> Range<usize> {
        self.col_ptr[k] as usize..self.col_ptr[k + 1] as usize
    }

    /// `N_j`, sorted.
    #[inline]
    pub fn user_items(&self, j: usize) -> &[u32] {
        &self.row_items[self.user_range(j)]
    }

    /// `N_k`, sorted.
    #[inline]
    pub fn item_users(&self, k: usize) -> &[u32] {
        &self.col_users[self.item_range(k)]
    }

    pub fn row_ptr(&self) -> &[u32] {
        &self.row_ptr
    }

    pub fn row_items(&self) -> &[u32] {
        &self.row_items
    }

    pub fn col_ptr(&self) -> &[u32] {
        &self.col_ptr
    }

    pub fn col_users(&self) -> &[u32] {
        &self.col_users
    }
}

/// Trainable `U` (one value per user-side slot) and `V` (one value per
/// item-side slot), plus their initial values.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnableInputSet<T> {
    pattern: InputPattern,
    pub u: Vec<T>,
    pub v: Vec<T>,
    u_init: Vec<T>,
    v_init: Vec<T>,
}

impl<T: Real> LearnableInputSet<T> {
    pub fn new(pattern: InputPattern, u: Vec<T>, v: Vec<T>, u_init: Vec<T>, v_init: Vec<T>) -> Result<Self> {
        let nnz = pattern.nnz();
        if [u.len(), v.len(), u_init.len(), v_init.len()].iter().any(|&l| l != nnz) {
            return Err(Error::Shape(format!(
                "input values do not match a pattern with {nnz} slots"
            )));
        }
        Ok(Self {
            pattern,
            u,
            v,
            u_init,
            v_init,
        })
    }

    pub fn pattern(&self) -> &InputPattern {
        &self.pattern
    }

    /// Total learnable scalars, `2 * nnz`.
    pub fn len(&self) -> usize {
        self.u.len() + self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(N_j, U_j restricted to N_j)`
    #[inline]
    pub fn user_inputs(&self, j: usize) -> (&[u32], &[T]) {
        let r = self.pattern.user_range(j);
        (&self.pattern.row_items[r.clone()], &self.u[r])
    }

    /// `(N_k, V_k restricted to N_k)`
    #[inline]
    pub fn item_inputs(&self, k: usize) -> (&[u32], &[T]) {
        let r = self.pattern.item_range(k);
        (&self.pattern.col_users[r.clone()], &self.v[r])
    }

    /// `U_jl`, or `None` when `l` is not in `N_j`.
    pub fn user_weight(&self, j: usize, l: usize) -> Option<T> {
        let r = self.pattern.user_range(j);
        self.pattern.row_items[r.clone()]
            .binary_search(&(l as u32))
            .ok()
            .map(|i| self.u[r.start + i])
    }

    /// `V_kl`, or `None` when `l` is not in `N_k`.
    pub fn item_weight(&self, k: usize, l: usize) -> Option<T> {
        let r = self.pattern.item_range(k);
        self.pattern.col_users[r.clone()]
            .binary_search(&(l as u32))
            .ok()
            .map(|i| self.v[r.start + i])
    }

    pub fn u_init(&self) -> &[T] {
        &self.u_init
    }

    pub fn v_init(&self) -> &[T] {
        &self.v_init
    }

    pub fn reset(&mut self) {
        self.u.copy_from_slice(&self.u_init);
        self.v.copy_from_slice(&self.v_init);
    }
}

/// Initial input values: `R / value_max` for ratings, ones for implicit.
pub fn init_inputs<T: Real>(matrix: &InteractionMatrix, mode: InputMode, value_max: f64) -> LearnableInputSet<T> {
    let pattern = InputPattern::from_matrix(matrix);
    let scale = |v: f64| match mode {
        InputMode::Ratings => T::lit(v / value_max),
        InputMode::Implicit => T::one(),
    };
    let u: Vec<T> = matrix.entries().iter().map(|e| scale(e.value)).collect();
    let v: Vec<T> = matrix
        .column_order()
        .iter()
        .map(|&i| scale(matrix.entries()[i as usize].value))
        .collect();
    LearnableInputSet::new(pattern, u.clone(), v.clone(), u, v).expect("aligned by construction")
}
