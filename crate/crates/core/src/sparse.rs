use rustc_hash::FxHashMap;

/// Sparse vector as `(index, value)` pairs sorted by index, zeros omitted.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVec<K> {
    entries: Vec<(K, f64)>,
}

impl<K> Default for SparseVec<K> {
    fn default() -> Self {
        Self { entries: Vec::new() }
    }
}

impl<K: Ord + Copy + std::hash::Hash> SparseVec<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_map(map: FxHashMap<K, f64>) -> Self {
        let mut entries: Vec<(K, f64)> = map.into_iter().filter(|&(_, v)| v != 0.0).collect();
        entries.sort_unstable_by_key(|a| a.0);
        Self { entries }
    }

    /// Sums duplicate keys.
    pub fn from_pairs<I: IntoIterator<Item = (K, f64)>>(pairs: I) -> Self {
        let mut map = FxHashMap::default();
        for (k, v) in pairs {
            *map.entry(k).or_insert(0.0) += v;
        }
        Self::from_map(map)
    }

    pub fn get(&self, k: K) -> f64 {
        self.entries.binary_search_by(|e| e.0.cmp(&k)).map_or(0.0, |i| self.entries[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (K, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn keys(&self) -> impl Iterator<Item = K> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// Elementwise sum.
    pub fn add(&self, other: &Self) -> Self {
        let (a, b) = (&self.entries, &other.entries);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Self { entries: out }
    }

    pub fn scale(&mut self, factor: f64) {
        for e in &mut self.entries {
            e.1 *= factor;
        }
    }
}

impl<K: Copy + Into<usize>> SparseVec<K> {
    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for &(k, v) in &self.entries {
            out[k.into()] = v;
        }
        out
    }
}
