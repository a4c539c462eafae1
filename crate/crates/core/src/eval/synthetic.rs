//! Random multi-topic knowledge graphs with controlled connectivity.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashSet;

use crate::error::{Error, Result};
use crate::kg::{EntityId, KgBuilder, KnowledgeGraph, RelationId, Triple};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TopicSpec {
    pub entities: usize,
    /// Target average degree inside the topic.
    pub degree: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub topics: Vec<TopicSpec>,
    pub relations: usize,
    /// Random edges between distinct topics.
    pub bridges: usize,
}

#[derive(Clone, Debug)]
pub struct SyntheticKg {
    pub kg: KnowledgeGraph,
    /// Topic index of each entity.
    pub membership: Vec<usize>,
}

fn ordered(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// `count` distinct undirected edges on `n` vertices offset by `base`, as
/// close to regular as stub matching allows.
fn topic_edges(n: usize, count: usize, base: u32, rng: &mut ChaCha8Rng) -> Vec<(u32, u32)> {
    let max = n * (n - 1) / 2;
    if count * 2 > max {
        let mut all: Vec<(u32, u32)> = (0..n as u32).flat_map(|i| (i + 1..n as u32).map(move |j| (i, j))).collect();
        all.shuffle(rng);
        all.truncate(count);
        return all.into_iter().map(|(i, j)| (base + i, base + j)).collect();
    }
    let mut stubs: Vec<u32> = Vec::with_capacity(2 * count);
    let per = (2 * count) / n;
    for i in 0..n as u32 {
        stubs.extend(std::iter::repeat(i).take(per));
    }
    let mut extra: Vec<u32> = (0..n as u32).collect();
    extra.shuffle(rng);
    stubs.extend(extra.into_iter().take(2 * count - stubs.len()));
    stubs.shuffle(rng);

    let mut seen: FxHashSet<(u32, u32)> = FxHashSet::default();
    let mut edges = Vec::with_capacity(count);
    for pair in stubs.chunks(2) {
        if let [a, b] = *pair {
            if a != b && seen.insert(ordered(a, b)) {
                edges.push(ordered(a, b));
            }
        }
    }
    while edges.len() < count {
        let (a, b) = (rng.gen_range(0..n as u32), rng.gen_range(0..n as u32));
        if a != b && seen.insert(ordered(a, b)) {
            edges.push(ordered(a, b));
        }
    }
    edges.into_iter().map(|(i, j)| (base + i, base + j)).collect()
}

/// Builds disjoint random topics (entity labels `t{topic}_e{i}`), each with
/// `round(n * degree / 2)` distinct edges. Every edge becomes one triple with
/// a random relation and orientation.
pub fn generate_synthetic_topics(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticKg> {
    if spec.topics.is_empty() || spec.relations == 0 {
        return Err(Error::InvalidParam("need at least one topic and one relation".into()));
    }
    if spec.bridges > 0 && spec.topics.len() < 2 {
        return Err(Error::InvalidParam("bridges need at least two topics".into()));
    }
    for (k, t) in spec.topics.iter().enumerate() {
        if t.entities < 2 {
            return Err(Error::InvalidParam(format!("topic {k} needs at least 2 entities")));
        }
        if !(t.degree >= 0.0) || t.degree > (t.entities - 1) as f64 {
            return Err(Error::InvalidParam(format!(
                "topic {k}: degree {} infeasible with {} entities",
                t.degree, t.entities
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = KgBuilder::new();
    let mut membership = Vec::new();
    let mut ranges = Vec::new();
    for (k, t) in spec.topics.iter().enumerate() {
        let start = membership.len() as u32;
        for i in 0..t.entities {
            b.entity(&format!("t{k}_e{i}"));
            membership.push(k);
        }
        ranges.push((start, t.entities));
    }
    for r in 0..spec.relations {
        b.relation(&format!("r{r}"));
    }

    let mut edges = Vec::new();
    for (t, &(start, n)) in spec.topics.iter().zip(&ranges) {
        let count = (n as f64 * t.degree / 2.0).round() as usize;
        edges.extend(topic_edges(n, count, start, &mut rng));
    }
    let total = membership.len() as u32;
    let mut seen: FxHashSet<(u32, u32)> = edges.iter().copied().collect();
    let mut added = 0;
    let mut attempts = 0usize;
    while added < spec.bridges {
        attempts += 1;
        if attempts > 100 * (spec.bridges + 10) {
            return Err(Error::InvalidParam("could not place the requested bridges".into()));
        }
        let (x, y) = (rng.gen_range(0..total), rng.gen_range(0..total));
        if membership[x as usize] != membership[y as usize] && seen.insert(ordered(x, y)) {
            edges.push(ordered(x, y));
            added += 1;
        }
    }

    for (x, y) in edges {
        let relation = RelationId(rng.gen_range(0..spec.relations as u32));
        let (head, tail) = if rng.gen_bool(0.5) { (x, y) } else { (y, x) };
        b.add_ids(Triple { head: EntityId(head), relation, tail: EntityId(tail) });
    }
    Ok(SyntheticKg { kg: b.build()?, membership })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two(bridges: usize) -> SyntheticSpec {
        SyntheticSpec { topics: vec![TopicSpec { entities: 100, degree: 4.0 }; 2], relations: 3, bridges }
    }

    #[test]
    fn realized_degree_near_target() {
        let s = generate_synthetic_topics(&two(0), 1).unwrap();
        for topic in 0..2 {
            let ents: Vec<EntityId> = (0..200u32).map(EntityId).filter(|e| s.membership[e.index()] == topic).collect();
            let deg: usize = ents.iter().map(|&e| s.kg.degree(e).unwrap()).sum();
            let avg = deg as f64 / ents.len() as f64;
            assert!((3.6..=4.4).contains(&avg), "{avg}");
        }
    }

    #[test]
    fn no_bridges_is_block_diagonal() {
        let s = generate_synthetic_topics(&two(0), 2).unwrap();
        for t in s.kg.triples() {
            assert_eq!(s.membership[t.head.index()], s.membership[t.tail.index()]);
        }
        let s = generate_synthetic_topics(&two(5), 2).unwrap();
        let cross =
            s.kg.triples().iter().filter(|t| s.membership[t.head.index()] != s.membership[t.tail.index()]).count();
        assert_eq!(cross, 5);
    }

    #[test]
    fn seeded() {
        let a = generate_synthetic_topics(&two(3), 9).unwrap();
        let b = generate_synthetic_topics(&two(3), 9).unwrap();
        assert_eq!(a.kg.triples(), b.kg.triples());
    }

    #[test]
    fn infeasible_specs() {
        let mut s = two(0);
        s.topics[0].degree = 150.0;
        assert!(generate_synthetic_topics(&s, 0).is_err());
        s.topics[0] = TopicSpec { entities: 1, degree: 0.0 };
        assert!(generate_synthetic_topics(&s, 0).is_err());
    }

    #[test]
    fn dense_topic() {
        let spec = SyntheticSpec { topics: vec![TopicSpec { entities: 10, degree: 9.0 }], relations: 1, bridges: 0 };
        let s = generate_synthetic_topics(&spec, 0).unwrap();
        assert_eq!(s.kg.triple_count(), 45);
    }
}
