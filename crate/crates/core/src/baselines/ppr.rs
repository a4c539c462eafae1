//! Personalized PageRank with greedy induced-subgraph construction.

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::query::{q_vector_sum, Query};
use crate::sparse::SparseVec;
use crate::summarizer::{greedy_entity_pkg, Pkg};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PprConfig {
    /// Probability of jumping back to the personalization vector.
    pub restart: f64,
    pub budget: usize,
    pub max_iter: usize,
    /// L1 change between iterates at which iteration stops.
    pub tol: f64,
}

impl PprConfig {
    pub fn new(budget: usize) -> Self {
        Self { restart: 0.85, budget, max_iter: 1000, tol: 1e-12 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.restart > 0.0 && self.restart < 1.0) {
            return Err(Error::InvalidParam(format!("restart must be in (0,1), got {}", self.restart)));
        }
        Ok(())
    }
}

/// Stationary distribution of the walk that follows a uniform neighbor with
/// probability `1 - restart` and otherwise jumps to `personalization`
/// (normalized). Dangling mass also jumps.
pub fn ppr_scores(kg: &KnowledgeGraph, personalization: &SparseVec<EntityId>, config: &PprConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let total = personalization.sum();
    if !(total > 0.0) {
        return Err(Error::ZeroPersonalization);
    }
    let n = kg.entity_count();
    let mut v = personalization.to_dense(n);
    for x in &mut v {
        *x /= total;
    }
    let inv_deg: Vec<f64> = (0..n)
        .map(|i| {
            let d = kg.adj_of(EntityId(i as u32)).len();
            if d == 0 {
                0.0
            } else {
                1.0 / d as f64
            }
        })
        .collect();
    let walk = 1.0 - config.restart;
    let mut x = v.clone();
    let mut next = vec![0.0; n];
    for _ in 0..config.max_iter {
        let dangling: f64 = (0..n).filter(|&i| inv_deg[i] == 0.0).map(|i| x[i]).sum();
        for (j, slot) in next.iter_mut().enumerate() {
            let inflow: f64 = kg.adj_of(EntityId(j as u32)).iter().map(|i| x[i.index()] * inv_deg[i.index()]).sum();
            *slot = config.restart * v[j] + walk * (inflow + dangling * v[j]);
        }
        let delta: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if delta <= config.tol {
            break;
        }
    }
    Ok(x)
}

/// Ranks entities by personalized PageRank over the prefix's undecayed
/// access counts and grows an induced subgraph within the budget.
pub fn ppr_summarize(kg: &KnowledgeGraph, log_prefix: &[Query], config: &PprConfig) -> Result<Pkg> {
    let scores = ppr_scores(kg, &q_vector_sum(log_prefix), config)?;
    let mut ranked: Vec<(f64, EntityId)> =
        scores.iter().enumerate().filter(|e| *e.1 > 0.0).map(|(i, &s)| (s, EntityId(i as u32))).collect();
    ranked.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(greedy_entity_pkg(kg, ranked.into_iter().map(|e| e.1), config.budget))
}
