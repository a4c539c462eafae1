#![allow(dead_code)]

use std::path::{Path, PathBuf};

use pkgsum_core::{EntityId, KgBuilder, KnowledgeGraph, Query, QueryLog, SparseVec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random multigraph-free KG with up to `max_entities` entities and
/// `max_triples` triples. Self-loops are allowed.
pub fn random_kg(rng: &mut ChaCha8Rng, max_entities: usize, max_triples: usize, relations: usize) -> KnowledgeGraph {
    let n = rng.gen_range(2..=max_entities);
    let m = rng.gen_range(1..=max_triples);
    let mut b = KgBuilder::new();
    for i in 0..n {
        b.entity(&format!("e{i}"));
    }
    for k in 0..relations {
        b.relation(&format!("r{k}"));
    }
    for _ in 0..m {
        let h = rng.gen_range(0..n);
        let t = rng.gen_range(0..n);
        let r = rng.gen_range(0..relations);
        b.add(&format!("e{h}"), &format!("r{r}"), &format!("e{t}"));
    }
    b.build().expect("at least one triple")
}

/// `steps` timestamps with 0..=`max_per_step` random answerable queries each.
pub fn random_log(rng: &mut ChaCha8Rng, kg: &KnowledgeGraph, steps: u64, max_per_step: usize) -> QueryLog {
    let heads: Vec<EntityId> =
        (0..kg.entity_count() as u32).map(EntityId).filter(|&e| !kg.outgoing_triples(e).unwrap().is_empty()).collect();
    let mut queries = Vec::new();
    for t in 0..steps {
        for _ in 0..rng.gen_range(0..=max_per_step) {
            let head = heads[rng.gen_range(0..heads.len())];
            let rels = kg.head_relations(head).unwrap();
            let rel = rels[rng.gen_range(0..rels.len())];
            queries.push(Query::from_kg(kg, head, rel, t).unwrap());
        }
    }
    QueryLog::new(queries).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest relative difference between two sparse vectors, or `None` when
/// their key sets differ.
pub fn max_rel_err<K: Ord + Copy + std::hash::Hash>(a: &SparseVec<K>, b: &SparseVec<K>) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let mut worst = 0.0f64;
    for ((ka, va), (kb, vb)) in a.iter().zip(b.iter()) {
        if ka != kb {
            return None;
        }
        let scale = va.abs().max(vb.abs());
        if scale > 0.0 {
            worst = worst.max((va - vb).abs() / scale);
        }
    }
    Some(worst)
}

/// Dataset root: `PKGSUM_DATA_DIR`, else `data/` at the workspace root.
pub fn data_dir() -> PathBuf {
    std::env::var_os("PKGSUM_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).ancestors().nth(2).unwrap().join("data"))
}

/// Builds a KG whose entity `i` is labeled `e{i}` for every `i < n`.
pub fn kg_from_edges(n: usize, edges: &[(usize, usize, usize)]) -> KnowledgeGraph {
    let mut b = KgBuilder::new();
    for i in 0..n {
        b.entity(&format!("e{i}"));
    }
    for &(h, r, t) in edges {
        b.add(&format!("e{}", h % n), &format!("r{r}"), &format!("e{}", t % n));
    }
    b.build().expect("at least one triple")
}

pub mod strategy {
    use proptest::prelude::*;

    /// `(entity count, triples)` with entity indices in range.
    pub fn small_kg(
        max_e: usize,
        max_r: usize,
        max_t: usize,
    ) -> impl Strategy<Value = (usize, Vec<(usize, usize, usize)>)> {
        (2..=max_e).prop_flat_map(move |n| (Just(n), prop::collection::vec((0..n, 0..max_r, 0..n), 1..=max_t)))
    }
}
