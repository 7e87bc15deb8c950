//! Sparse observed ratings with dense index maps.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One observed rating, already remapped to dense indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rating<T> {
    pub user: usize,
    pub item: usize,
    pub value: T,
}

/// Bijection between external IDs (as they appear in the source table) and
/// dense indices `0..len`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdMap {
    index: HashMap<String, usize>,
    external: Vec<String>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// `"0"`, `"1"`, ... for datasets built directly from indices.
    pub fn identity(len: usize) -> Self {
        let mut map = Self::new();
        for i in 0..len {
            map.intern(&i.to_string());
        }
        map
    }

    /// Returns the dense index for `id`, assigning the next free index on
    /// first sight.
    pub fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.external.len();
        self.external.push(id.to_owned());
        self.index.insert(id.to_owned(), i);
        i
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn external_id(&self, index: usize) -> Option<&str> {
        self.external.get(index).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.external.len()
    }

    pub fn is_empty(&self) -> bool {
        self.external.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct RatingsDataset<T> {
    num_users: usize,
    num_items: usize,
    observations: Vec<Rating<T>>,
    r_min: T,
    r_max: T,
    user_ids: IdMap,
    item_ids: IdMap,
    // observation positions, user-major and item-major
    by_user: Vec<Vec<usize>>,
    by_item: Vec<Vec<usize>>,
    duplicate_count: usize,
}

impl<T: Scalar> RatingsDataset<T> {
    /// Builds a dataset with identity ID maps.
    pub fn new(
        num_users: usize,
        num_items: usize,
        observations: Vec<Rating<T>>,
        r_min: T,
        r_max: T,
    ) -> Result<Self> {
        Self::with_id_maps(
            IdMap::identity(num_users),
            IdMap::identity(num_items),
            observations,
            r_min,
            r_max,
        )
    }

    /// Builds a dataset whose dimensions are the sizes of the given ID maps.
    /// Rejects out-of-range indices, duplicate pairs and out-of-bounds
    /// ratings.
    pub fn with_id_maps(
        user_ids: IdMap,
        item_ids: IdMap,
        observations: Vec<Rating<T>>,
        r_min: T,
        r_max: T,
    ) -> Result<Self> {
        if !(r_min.is_finite() && r_max.is_finite() && r_min <= r_max) {
            return Err(Error::contract(format!(
                "invalid rating bounds [{r_min}, {r_max}]"
            )));
        }
        let num_users = user_ids.len();
        let num_items = item_ids.len();
        let mut seen = HashSet::with_capacity(observations.len());
        for (pos, r) in observations.iter().enumerate() {
            if r.user >= num_users || r.item >= num_items {
                return Err(Error::contract(format!(
                    "observation {pos}: index ({}, {}) outside {num_users}x{num_items}",
                    r.user, r.item
                )));
            }
            if !(r.value >= r_min && r.value <= r_max) {
                return Err(Error::contract(format!(
                    "observation {pos}: rating {} outside [{r_min}, {r_max}]",
                    r.value
                )));
            }
            if !seen.insert((r.user, r.item)) {
                return Err(Error::contract(format!(
                    "observation {pos}: duplicate pair ({}, {})",
                    r.user, r.item
                )));
            }
        }
        let mut by_user = vec![Vec::new(); num_users];
        let mut by_item = vec![Vec::new(); num_items];
        for (pos, r) in observations.iter().enumerate() {
            by_user[r.user].push(pos);
            by_item[r.item].push(pos);
        }
        Ok(RatingsDataset {
            num_users,
            num_items,
            observations,
            r_min,
            r_max,
            user_ids,
            item_ids,
            by_user,
            by_item,
            duplicate_count: 0,
        })
    }

    /// Same ID maps and bounds, different observations. Used by the splitter.
    pub(crate) fn sibling(&self, observations: Vec<Rating<T>>) -> Result<Self> {
        Self::with_id_maps(
            self.user_ids.clone(),
            self.item_ids.clone(),
            observations,
            self.r_min,
            self.r_max,
        )
    }

    pub(crate) fn set_duplicate_count(&mut self, n: usize) {
        self.duplicate_count = n;
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Rating<T>] {
        &self.observations
    }

    pub fn r_min(&self) -> T {
        self.r_min
    }

    pub fn r_max(&self) -> T {
        self.r_max
    }

    pub fn user_ids(&self) -> &IdMap {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &IdMap {
        &self.item_ids
    }

    /// Ratings of user `i` (the set Ω_i), in load order.
    pub fn user_ratings(&self, i: usize) -> impl Iterator<Item = &Rating<T>> + '_ {
        self.by_user[i].iter().map(move |&p| &self.observations[p])
    }

    /// Ratings of item `j` (the set Ω_j), in load order.
    pub fn item_ratings(&self, j: usize) -> impl Iterator<Item = &Rating<T>> + '_ {
        self.by_item[j].iter().map(move |&p| &self.observations[p])
    }

    pub fn user_count(&self, i: usize) -> usize {
        self.by_user[i].len()
    }

    pub fn item_count(&self, j: usize) -> usize {
        self.by_item[j].len()
    }

    /// Number of input rows that repeated an earlier (user, item) pair and
    /// replaced it while loading.
    pub fn duplicate_count(&self) -> usize {
        self.duplicate_count
    }

    pub fn mean_rating(&self) -> T {
        if self.observations.is_empty() {
            return (self.r_min + self.r_max) / T::of(2.0);
        }
        let sum: T = self.observations.iter().map(|r| r.value).sum();
        sum / T::of_usize(self.observations.len())
    }

    /// Same dimensions, bounds and observation multiset.
    pub fn same_contents(&self, other: &Self) -> bool {
        if self.num_users != other.num_users
            || self.num_items != other.num_items
            || self.r_min != other.r_min
            || self.r_max != other.r_max
            || self.len() != other.len()
        {
            return false;
        }
        let key = |r: &Rating<T>| (r.user, r.item);
        let mut a: Vec<_> = self.observations.clone();
        let mut b: Vec<_> = other.observations.clone();
        a.sort_by_key(key);
        b.sort_by_key(key);
        a == b
    }
}
