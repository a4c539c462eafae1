//! Greedy sampled utility maximization over inferred preferences.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, RelationId, TripleId};
use crate::query::Query;
use crate::summarizer::Pkg;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlimpseConfig {
    /// Weight of a queried entity's 1-hop neighbors.
    pub alpha: f64,
    /// Sampling tolerance; each round draws `|candidates| / K * ln(1/epsilon)` triples.
    pub epsilon: f64,
    pub budget: usize,
    pub seed: u64,
}

impl GlimpseConfig {
    pub fn new(budget: usize, seed: u64) -> Self {
        Self { alpha: 0.3, epsilon: 1e-3, budget, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParam(format!("epsilon must be in (0,1), got {}", self.epsilon)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParam(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Entity and relation preferences inferred from a log prefix.
#[derive(Clone, Debug, Default)]
pub struct GlimpsePreferences {
    pub entity: FxHashMap<EntityId, f64>,
    pub relation: FxHashMap<RelationId, f64>,
}

impl GlimpsePreferences {
    /// Entity preference counts each query mentioning the entity plus `alpha`
    /// per mentioned neighbor; relation preference is query frequency.
    pub fn infer(kg: &KnowledgeGraph, queries: &[Query], alpha: f64) -> Self {
        let mut entity: FxHashMap<EntityId, f64> = FxHashMap::default();
        let mut relation: FxHashMap<RelationId, f64> = FxHashMap::default();
        let mut mentioned: Vec<EntityId> = Vec::new();
        for q in queries {
            mentioned.clear();
            mentioned.push(q.head);
            mentioned.extend_from_slice(&q.answers);
            mentioned.sort_unstable();
            mentioned.dedup();
            for &e in &mentioned {
                *entity.entry(e).or_insert(0.0) += 1.0;
                for &n in kg.adj_of(e) {
                    *entity.entry(n).or_insert(0.0) += alpha;
                }
            }
            *relation.entry(q.relation).or_insert(0.0) += 1.0;
        }
        if !queries.is_empty() {
            let total = queries.len() as f64;
            for v in relation.values_mut() {
                *v /= total;
            }
        }
        entity.retain(|_, v| *v > 0.0);
        Self { entity, relation }
    }

    pub fn entity_pref(&self, e: EntityId) -> f64 {
        self.entity.get(&e).copied().unwrap_or(0.0)
    }

    pub fn triple_pref(&self, kg: &KnowledgeGraph, id: TripleId) -> f64 {
        let t = kg.triple(id);
        self.entity_pref(t.head) * self.relation.get(&t.relation).copied().unwrap_or(0.0) * self.entity_pref(t.tail)
    }

    /// Utility gained by adding `id` to a summary covering `covered`.
    ///
    /// Each term is `ln(1 + preference)`, so gains are non-negative and shrink
    /// as endpoints become covered.
    pub fn marginal(&self, kg: &KnowledgeGraph, id: TripleId, covered: &FxHashSet<EntityId>) -> f64 {
        let t = kg.triple(id);
        let mut gain = self.triple_pref(kg, id).ln_1p();
        if !covered.contains(&t.head) {
            gain += self.entity_pref(t.head).ln_1p();
        }
        if t.tail != t.head && !covered.contains(&t.tail) {
            gain += self.entity_pref(t.tail).ln_1p();
        }
        gain
    }
}

/// Greedy summary: each round samples candidates with positive marginal
/// utility and keeps the best of the sample.
pub fn glimpse_summarize(kg: &KnowledgeGraph, log_prefix: &[Query], config: &GlimpseConfig) -> Result<Pkg> {
    config.validate()?;
    glimpse_with_trace(kg, log_prefix, config).map(|(pkg, _)| pkg)
}

/// As [`glimpse_summarize`], also returning the marginal gain of each pick.
pub(crate) fn glimpse_with_trace(
    kg: &KnowledgeGraph,
    log_prefix: &[Query],
    config: &GlimpseConfig,
) -> Result<(Pkg, Vec<f64>)> {
    let prefs = GlimpsePreferences::infer(kg, log_prefix, config.alpha);
    let mut residual: Vec<TripleId> = Vec::new();
    for &e in prefs.entity.keys() {
        residual.extend_from_slice(kg.inc_of(e));
    }
    residual.sort_unstable();
    residual.dedup();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let log_inv_eps = (1.0 / config.epsilon).ln();
    let k = config.budget;
    let mut covered: FxHashSet<EntityId> = FxHashSet::default();
    let mut picked: FxHashSet<TripleId> = FxHashSet::default();
    let mut chosen = Vec::with_capacity(k);
    let mut gains = Vec::with_capacity(k);
    while chosen.len() < k {
        residual.retain(|&t| !picked.contains(&t) && prefs.marginal(kg, t, &covered) > 0.0);
        if residual.is_empty() {
            break;
        }
        let want = (residual.len() as f64 / k as f64 * log_inv_eps).ceil();
        let size = if want >= residual.len() as f64 { residual.len() } else { (want as usize).max(1) };
        let mut best: Option<(f64, TripleId)> = None;
        let mut consider = |t: TripleId| {
            let g = prefs.marginal(kg, t, &covered);
            if best.map_or(true, |(bg, bt)| g > bg || (g == bg && t < bt)) {
                best = Some((g, t));
            }
        };
        if size == residual.len() {
            residual.iter().for_each(|&t| consider(t));
        } else {
            index::sample(&mut rng, residual.len(), size).iter().for_each(|i| consider(residual[i]));
        }
        let (gain, t) = best.expect("sample is non-empty");
        let tr = kg.triple(t);
        covered.insert(tr.head);
        covered.insert(tr.tail);
        picked.insert(t);
        chosen.push(t);
        gains.push(gain);
    }
    Ok((Pkg::from_triples(kg, chosen), gains))
}
