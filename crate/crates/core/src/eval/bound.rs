//! Adaptation bound between two topics and its empirical counterpart.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::heat::{DiffusionParams, EntityHeatState};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::query::Query;
use crate::summarizer::Method;

/// Size and average degree of one topic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TopicShape {
    pub connectivity: f64,
    pub entities: usize,
    pub triples: usize,
}

/// Number of queries on a new topic needed before its heat overtakes a
/// topic queried `a` times before.
pub fn adaptation_bound(
    old: TopicShape,
    new: TopicShape,
    alpha: f64,
    gamma: f64,
    d: usize,
    a: u32,
    method: Method,
) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParam(format!("gamma must be in (0,1), got {gamma}")));
    }
    let reach = |c: f64| -> Result<f64> {
        let x = alpha * c;
        if !(0.0..1.0).contains(&x) {
            return Err(Error::Divergent);
        }
        Ok((1.0 - x.powi(d as i32 + 1)) / (1.0 - x))
    };
    let (mut big_a, mut big_b) = (reach(old.connectivity)?, reach(new.connectivity)?);
    if method == Method::Apex2 {
        let exponent = |s: &TopicShape| {
            let (e, t) = (s.entities as f64, s.triples as f64);
            (e + 2.0 * t) / (e + 3.0 * t)
        };
        big_a = big_a.powf(exponent(&old));
        big_b = big_b.powf(exponent(&new));
    }
    let inner = big_a / big_b * (1.0 - gamma.powi(a as i32)) + 1.0;
    Ok((1.0 / inner).ln() / gamma.ln())
}

fn topic_query(kg: &KnowledgeGraph, heads: &[EntityId], t: u64, rng: &mut ChaCha8Rng) -> Query {
    let head = heads[rng.gen_range(0..heads.len())];
    let rels = kg.head_relations(head).expect("head in range");
    let rel = rels[rng.gen_range(0..rels.len())];
    Query::from_kg(kg, head, rel, t).expect("head has outgoing triples")
}

/// Issues `a` random queries inside topic `old`, then queries inside topic
/// `new` until the total entity heat of `new` exceeds that of `old`.
/// Returns how many `new` queries that took, or `None` within `max_b`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_switch_point(
    kg: &KnowledgeGraph,
    membership: &[usize],
    old: usize,
    new: usize,
    a: usize,
    max_b: usize,
    params: &DiffusionParams,
    seed: u64,
) -> Result<Option<usize>> {
    let heads_of = |topic: usize| -> Vec<EntityId> {
        (0..kg.entity_count() as u32)
            .map(EntityId)
            .filter(|&e| membership[e.index()] == topic && !kg.out_of(e).is_empty())
            .collect()
    };
    let (old_heads, new_heads) = (heads_of(old), heads_of(new));
    if old_heads.is_empty() || new_heads.is_empty() {
        return Err(Error::NoHeads);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = EntityHeatState::new();
    let mut t = 0u64;
    for _ in 0..a {
        let q = topic_query(kg, &old_heads, t, &mut rng);
        state.advance(kg, &[q], params)?;
        t += 1;
    }
    for b in 1..=max_b {
        let q = topic_query(kg, &new_heads, t, &mut rng);
        state.advance(kg, &[q], params)?;
        t += 1;
        let (mut heat_old, mut heat_new) = (0.0, 0.0);
        for (e, v) in state.entity_heat().iter() {
            match membership[e.index()] {
                m if m == old => heat_old += v,
                m if m == new => heat_new += v,
                _ => {}
            }
        }
        if heat_new > heat_old {
            return Ok(Some(b));
        }
    }
    Ok(None)
}
