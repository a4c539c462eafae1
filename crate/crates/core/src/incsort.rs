//! Order-maintained heat index updated by binary deletion and insertion.

use std::cmp::Ordering;
use std::fmt::Debug;

use crate::error::{Error, Result};

/// One non-decay mutation of a heat entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Change<K> {
    pub key: K,
    pub old: Option<f64>,
    pub new: Option<f64>,
}

/// Mutations of one timestamp, sorted by key with unique keys.
#[derive(Clone, Debug, PartialEq)]
pub struct ChangeSet<K> {
    changes: Vec<Change<K>>,
}

impl<K> Default for ChangeSet<K> {
    fn default() -> Self {
        Self { changes: Vec::new() }
    }
}

impl<K: Ord + Copy + Debug> ChangeSet<K> {
    /// Sorts by key. Records with `old == new` are dropped.
    ///
    /// # Panics
    /// If two records share a key.
    pub fn new(mut changes: Vec<Change<K>>) -> Self {
        changes.retain(|c| c.old != c.new);
        changes.sort_unstable_by_key(|a| a.key);
        if let Some(w) = changes.windows(2).find(|w| w[0].key == w[1].key) {
            panic!("duplicate key {:?} in change set", w[0].key);
        }
        Self { changes }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Change<K>> {
        self.changes.iter()
    }

    pub fn len(&self) -> usize {
        self.changes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }
}

const BLOCK: usize = 512;

#[inline]
fn order<K: Ord>(a: &(f64, K), b: &(f64, K)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1))
}

/// Entries `(value, key)` kept sorted by value descending, then key ascending.
///
/// Storage is a list of sorted blocks, so a lookup is a binary search over
/// block tails followed by one inside the block.
#[derive(Clone, Debug)]
pub struct SortedHeatIndex<K> {
    blocks: Vec<Vec<(f64, K)>>,
    len: usize,
    comparisons: u64,
}

impl<K> Default for SortedHeatIndex<K> {
    fn default() -> Self {
        Self { blocks: Vec::new(), len: 0, comparisons: 0 }
    }
}

impl<K: Ord + Copy + Debug> SortedHeatIndex<K> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an index by full sort. Comparisons here are not counted.
    pub fn from_entries<I: IntoIterator<Item = (K, f64)>>(entries: I) -> Self {
        let mut flat: Vec<(f64, K)> = entries.into_iter().map(|(k, v)| (v, k)).collect();
        flat.sort_unstable_by(order);
        let mut idx = Self::default();
        idx.reblock(flat);
        idx
    }

    fn reblock(&mut self, flat: Vec<(f64, K)>) {
        self.len = flat.len();
        self.blocks = flat.chunks(BLOCK).map(<[_]>::to_vec).collect();
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Cumulative comparisons made by [`apply_changes`](Self::apply_changes).
    pub fn comparison_count(&self) -> u64 {
        self.comparisons
    }

    /// Entries in index order as `(key, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (K, f64)> + '_ {
        self.blocks.iter().flatten().map(|&(v, k)| (k, v))
    }

    pub fn top_k(&self, k: usize) -> Vec<K> {
        self.blocks.iter().flatten().take(k).map(|e| e.1).collect()
    }

    /// Multiplies every value by `factor`. Values that collapse onto equal
    /// doubles are re-ordered by key.
    pub fn decay(&mut self, factor: f64) {
        if factor == 1.0 {
            return;
        }
        for b in &mut self.blocks {
            for e in b.iter_mut() {
                e.0 *= factor;
            }
        }
        let mut prev: Option<&(f64, K)> = None;
        let mut broken = false;
        for e in self.blocks.iter().flatten() {
            if let Some(p) = prev {
                if order(p, e) != Ordering::Less {
                    broken = true;
                    break;
                }
            }
            prev = Some(e);
        }
        if broken {
            let mut flat: Vec<(f64, K)> = std::mem::take(&mut self.blocks).into_iter().flatten().collect();
            flat.sort_by(order);
            self.reblock(flat);
        }
    }

    /// Lower-bound position of `x`: the first entry not ordered before it.
    fn locate(&mut self, x: &(f64, K)) -> (usize, usize) {
        let mut c = 0u64;
        let b = self.blocks.partition_point(|blk| {
            c += 1;
            order(blk.last().expect("blocks are non-empty"), x) == Ordering::Less
        });
        let loc = if b == self.blocks.len() {
            match self.blocks.last() {
                Some(last) => (b - 1, last.len()),
                None => (0, 0),
            }
        } else {
            let p = self.blocks[b].partition_point(|e| {
                c += 1;
                order(e, x) == Ordering::Less
            });
            (b, p)
        };
        self.comparisons += c;
        loc
    }

    fn remove(&mut self, key: K, value: f64) -> Result<()> {
        let x = (value, key);
        let (b, p) = self.locate(&x);
        self.comparisons += 1;
        let hit = self
            .blocks
            .get(b)
            .and_then(|blk| blk.get(p))
            .is_some_and(|e| e.1 == key && e.0.to_bits() == value.to_bits());
        if !hit {
            return Err(Error::IndexDesync(format!("{key:?} = {value}")));
        }
        self.blocks[b].remove(p);
        if self.blocks[b].is_empty() {
            self.blocks.remove(b);
        }
        self.len -= 1;
        Ok(())
    }

    fn insert(&mut self, key: K, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidParam(format!(
                "index value for {key:?} must be positive and finite, got {value}"
            )));
        }
        let x = (value, key);
        let (b, p) = self.locate(&x);
        if self.blocks.is_empty() {
            self.blocks.push(vec![x]);
        } else {
            let blk = &mut self.blocks[b];
            blk.insert(p, x);
            if blk.len() > 2 * BLOCK {
                let tail = blk.split_off(BLOCK);
                self.blocks.insert(b + 1, tail);
            }
        }
        self.len += 1;
        Ok(())
    }

    /// Applies a change set: all deletions first, then all insertions.
    ///
    /// On error the index may be partially updated and should be discarded.
    pub fn apply_changes(&mut self, changes: &ChangeSet<K>) -> Result<()> {
        for c in changes.iter() {
            if let Some(old) = c.old {
                self.remove(c.key, old)?;
            }
        }
        for c in changes.iter() {
            if let Some(new) = c.new {
                self.insert(c.key, new)?;
            }
        }
        Ok(())
    }
}
