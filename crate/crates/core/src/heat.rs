//! Decayed heat-diffusion interest model.
//!
//! Entity heat is the decayed query-access vector pushed through the
//! adjacency for up to `d` hops with damping `alpha`; triple heat is the
//! product of both endpoint heats and the relation heat. The incremental
//! [`HeatState::advance`] recomputes only triples touched by new queries and
//! reports those mutations as a [`ChangeSet`]; everything else decays
//! uniformly, which preserves ranking.

use std::io::{BufRead, Write};

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};
use crate::incsort::{Change, ChangeSet};
use crate::kg::{EntityId, KnowledgeGraph, RelationId, TripleId};
use crate::query::{q_vector_sum, r_vector_sum, Query, QueryLog};
use crate::sparse::SparseVec;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionParams {
    /// Neighbor damping, in (0, 1).
    pub alpha: f64,
    /// Diffusion diameter in hops.
    pub d: usize,
    /// Per-timestamp decay, in (0, 1].
    pub gamma: f64,
    /// Entries at or below this magnitude are dropped.
    pub eps_ths: f64,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        Self { alpha: 0.3, d: 1, gamma: 0.5, eps_ths: 1e-9 }
    }
}

impl DiffusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParam(format!("alpha must be in (0,1), got {}", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParam(format!("gamma must be in (0,1], got {}", self.gamma)));
        }
        if !(self.eps_ths >= 0.0 && self.eps_ths.is_finite()) {
            return Err(Error::InvalidParam(format!("eps_ths must be >= 0, got {}", self.eps_ths)));
        }
        Ok(())
    }

    /// Decay applied to triple heat per timestamp (product of three factors).
    pub fn triple_decay(&self) -> f64 {
        self.gamma * self.gamma * self.gamma
    }
}

/// `sum_{l=0..d} alpha^l A^l q` as `d` sparse matrix-vector products.
pub fn diffuse(kg: &KnowledgeGraph, q: &SparseVec<EntityId>, alpha: f64, d: usize) -> SparseVec<EntityId> {
    let mut acc: FxHashMap<EntityId, f64> = q.iter().collect();
    let mut frontier = q.clone();
    let mut weight = 1.0;
    for _ in 0..d {
        let mut next: FxHashMap<EntityId, f64> = FxHashMap::default();
        for (i, v) in frontier.iter() {
            for &j in kg.adj_of(i) {
                *next.entry(j).or_insert(0.0) += v;
            }
        }
        frontier = SparseVec::from_map(next);
        if frontier.is_empty() {
            break;
        }
        weight *= alpha;
        for (j, v) in frontier.iter() {
            *acc.entry(j).or_insert(0.0) += weight * v;
        }
    }
    SparseVec::from_map(acc)
}

/// Solves `(I - alpha A) x = q` by fixed-point iteration. Intended for small graphs.
pub fn diffuse_closed_form(kg: &KnowledgeGraph, q: &SparseVec<EntityId>, alpha: f64) -> Result<SparseVec<EntityId>> {
    const MAX_ITER: usize = 100_000;
    let n = kg.entity_count();
    let b = q.to_dense(n);
    let mut x = b.clone();
    for _ in 0..MAX_ITER {
        let mut next = b.clone();
        for (i, slot) in next.iter_mut().enumerate() {
            let s: f64 = kg.adj_of(EntityId(i as u32)).iter().map(|j| x[j.index()]).sum();
            *slot += alpha * s;
        }
        let delta = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergent);
        }
        if delta <= 1e-12 {
            // Residual of the linear system equals alpha * A * (x - x_prev).
            let resid = residual(kg, &x, &b, alpha);
            if resid <= 1e-10 {
                return Ok(SparseVec::from_pairs(
                    x.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(i, &v)| (EntityId(i as u32), v)),
                ));
            }
        }
    }
    Err(Error::Divergent)
}

fn residual(kg: &KnowledgeGraph, x: &[f64], b: &[f64], alpha: f64) -> f64 {
    (0..x.len())
        .map(|i| {
            let s: f64 = kg.adj_of(EntityId(i as u32)).iter().map(|j| x[j.index()]).sum();
            (x[i] - alpha * s - b[i]).abs()
        })
        .fold(0.0, f64::max)
}

/// Work done by the most recent [`HeatState::advance`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AdvanceStats {
    /// Entities whose heat received a non-decay update.
    pub touched_entities: usize,
    /// Triples whose heat was recomputed.
    pub recomputed_triples: usize,
    /// Records in the returned change set.
    pub changes: usize,
}

/// Per-user decayed interest state.
#[derive(Clone, Debug, Default)]
pub struct HeatState {
    q_total: FxHashMap<EntityId, f64>,
    e: FxHashMap<EntityId, f64>,
    r: FxHashMap<RelationId, f64>,
    h: FxHashMap<TripleId, f64>,
    next_t: u64,
    last: AdvanceStats,
}

fn sorted<K: Ord + Copy + std::hash::Hash>(m: &FxHashMap<K, f64>) -> SparseVec<K> {
    SparseVec::from_map(m.clone())
}

fn decay_map<K: Copy>(m: &mut FxHashMap<K, f64>, factor: f64) {
    if factor != 1.0 {
        for v in m.values_mut() {
            *v *= factor;
        }
    }
}

/// Drops entries `<= eps`, returning the dropped keys.
fn eliminate<K: Copy + Eq + std::hash::Hash>(m: &mut FxHashMap<K, f64>, eps: f64) -> Vec<K> {
    let dropped: Vec<K> = m.iter().filter(|e| *e.1 <= eps).map(|e| *e.0).collect();
    for k in &dropped {
        m.remove(k);
    }
    dropped
}

fn check_batch(kg: &KnowledgeGraph, queries: &[Query], expected: u64) -> Result<()> {
    for q in queries {
        q.validate(kg)?;
        if q.timestamp != expected {
            return Err(Error::Timestamp { expected, found: q.timestamp });
        }
    }
    Ok(())
}

impl HeatState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Timestamp the next [`advance`](Self::advance) expects.
    pub fn next_timestamp(&self) -> u64 {
        self.next_t
    }

    /// Last processed timestamp.
    pub fn timestamp(&self) -> Option<u64> {
        self.next_t.checked_sub(1)
    }

    pub fn q_total(&self) -> SparseVec<EntityId> {
        sorted(&self.q_total)
    }

    pub fn entity_heat(&self) -> SparseVec<EntityId> {
        sorted(&self.e)
    }

    pub fn relation_heat(&self) -> SparseVec<RelationId> {
        sorted(&self.r)
    }

    pub fn triple_heats(&self) -> SparseVec<TripleId> {
        sorted(&self.h)
    }

    pub fn triple_heat_by_id(&self, t: TripleId) -> f64 {
        self.h.get(&t).copied().unwrap_or(0.0)
    }

    pub fn last_stats(&self) -> AdvanceStats {
        self.last
    }

    /// Advances one timestamp with the queries stamped [`next_timestamp`](Self::next_timestamp).
    pub fn advance(
        &mut self,
        kg: &KnowledgeGraph,
        new_queries: &[Query],
        params: &DiffusionParams,
    ) -> Result<ChangeSet<TripleId>> {
        params.validate()?;
        check_batch(kg, new_queries, self.next_t)?;
        let eps = params.eps_ths;
        let g3 = params.triple_decay();

        decay_map(&mut self.q_total, params.gamma);
        decay_map(&mut self.e, params.gamma);
        decay_map(&mut self.r, params.gamma);
        let mut faded: Vec<TripleId> = Vec::new();
        if g3 != 1.0 {
            for (&k, v) in self.h.iter_mut() {
                *v *= g3;
                if *v <= eps {
                    faded.push(k);
                }
            }
        }

        let q = q_vector_sum(new_queries);
        let qr = r_vector_sum(new_queries);
        let dq = diffuse(kg, &q, params.alpha, params.d);
        for (i, v) in q.iter() {
            *self.q_total.entry(i).or_insert(0.0) += v;
        }
        for (k, v) in qr.iter() {
            *self.r.entry(k).or_insert(0.0) += v;
        }
        for (i, v) in dq.iter() {
            *self.e.entry(i).or_insert(0.0) += v;
        }

        eliminate(&mut self.q_total, eps);
        let mut ent_updates: Vec<EntityId> = dq.keys().collect();
        ent_updates.extend(eliminate(&mut self.e, eps));
        let mut rel_updates: Vec<RelationId> = qr.keys().collect();
        rel_updates.extend(eliminate(&mut self.r, eps));
        ent_updates.sort_unstable();
        ent_updates.dedup();
        rel_updates.sort_unstable();
        rel_updates.dedup();

        let mut scope: Vec<TripleId> = Vec::new();
        for &i in &ent_updates {
            scope.extend_from_slice(kg.inc_of(i));
        }
        if !rel_updates.is_empty() {
            for &i in self.e.keys() {
                for &rel in &rel_updates {
                    for &t in kg.answers_of(i, rel) {
                        if self.e.contains_key(&kg.triple(t).tail) {
                            scope.push(t);
                        }
                    }
                }
            }
        }
        scope.sort_unstable();
        scope.dedup();

        let mut changes = Vec::new();
        for &id in &scope {
            let t = kg.triple(id);
            let value = self.e.get(&t.head).copied().unwrap_or(0.0)
                * self.r.get(&t.relation).copied().unwrap_or(0.0)
                * self.e.get(&t.tail).copied().unwrap_or(0.0);
            let new = (value > eps).then_some(value);
            let old = match new {
                Some(v) => self.h.insert(id, v),
                None => self.h.remove(&id),
            };
            if old != new {
                changes.push(Change { key: id, old, new });
            }
        }
        for id in faded {
            if let Some(&v) = self.h.get(&id) {
                if v <= eps {
                    self.h.remove(&id);
                    changes.push(Change { key: id, old: Some(v), new: None });
                }
            }
        }

        let changes = ChangeSet::new(changes);
        self.last =
            AdvanceStats { touched_entities: dq.len(), recomputed_triples: scope.len(), changes: changes.len() };
        self.next_t += 1;
        Ok(changes)
    }

    /// Evaluates the state at `up_to_t` directly from the decayed sums over
    /// the log, with heat on every triple, then one threshold pass.
    pub fn recompute_scratch(
        kg: &KnowledgeGraph,
        log: &QueryLog,
        up_to_t: u64,
        params: &DiffusionParams,
    ) -> Result<Self> {
        params.validate()?;
        let n = kg.entity_count();
        let m = kg.relation_count();
        let mut q_total = vec![0.0; n];
        let mut r = vec![0.0; m];
        let mut t = 0;
        let prefix = log.prefix(up_to_t);
        while t < prefix.len() {
            let stamp = prefix[t].timestamp;
            let end = t + prefix[t..].iter().take_while(|q| q.timestamp == stamp).count();
            let batch = &prefix[t..end];
            for q in batch {
                q.validate(kg)?;
            }
            let w = params.gamma.powi((up_to_t - stamp) as i32);
            for (i, v) in q_vector_sum(batch).iter() {
                q_total[i.index()] += w * v;
            }
            for (k, v) in r_vector_sum(batch).iter() {
                r[k.index()] += w * v;
            }
            t = end;
        }

        // Independent adjacency built straight from the triple list.
        let mut pairs: FxHashSet<(usize, usize)> = FxHashSet::default();
        for tr in kg.triples() {
            if tr.head != tr.tail {
                pairs.insert((tr.head.index(), tr.tail.index()));
                pairs.insert((tr.tail.index(), tr.head.index()));
            }
        }
        let mut e = q_total.clone();
        let mut power = q_total.clone();
        let mut weight = 1.0;
        for _ in 0..params.d {
            let mut next = vec![0.0; n];
            for &(i, j) in &pairs {
                next[i] += power[j];
            }
            weight *= params.alpha;
            for (acc, v) in e.iter_mut().zip(&next) {
                *acc += weight * v;
            }
            power = next;
        }

        let eps = params.eps_ths;
        let mut h = FxHashMap::default();
        for (id, tr) in kg.triples().iter().enumerate() {
            let v = e[tr.head.index()] * r[tr.relation.index()] * e[tr.tail.index()];
            if v != 0.0 && v > eps {
                h.insert(TripleId(id as u32), v);
            }
        }
        let keep = |v: &f64| *v != 0.0 && *v > eps;
        Ok(Self {
            q_total: q_total.iter().enumerate().filter(|e| keep(e.1)).map(|(i, &v)| (EntityId(i as u32), v)).collect(),
            e: e.iter().enumerate().filter(|e| keep(e.1)).map(|(i, &v)| (EntityId(i as u32), v)).collect(),
            r: r.iter().enumerate().filter(|e| keep(e.1)).map(|(i, &v)| (RelationId(i as u32), v)).collect(),
            h,
            next_t: up_to_t + 1,
            last: AdvanceStats::default(),
        })
    }

    /// Stored heat of a KG triple, 0 when absent.
    pub fn triple_heat(&self, kg: &KnowledgeGraph, head: EntityId, rel: RelationId, tail: EntityId) -> Result<f64> {
        let id =
            kg.find_triple(head, rel, tail).ok_or(Error::NotATriple { head: head.0, relation: rel.0, tail: tail.0 })?;
        Ok(self.triple_heat_by_id(id))
    }

    /// Writes `kind\tkey\tvalue` lines (kinds T, Q, E, R, H), sorted.
    pub fn write_snapshot<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "T\t{}", self.next_t)?;
        write_kind(w, "Q", &self.q_total())?;
        write_kind(w, "E", &self.entity_heat())?;
        write_kind(w, "R", &self.relation_heat())?;
        write_kind(w, "H", &self.triple_heats())
    }

    pub fn read_snapshot<R: BufRead>(reader: R) -> Result<Self> {
        let mut s = Self::default();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let (kind, key, value) = parse_snapshot_line(&line, n + 1)?;
            match kind {
                "T" => s.next_t = key as u64,
                "Q" => {
                    s.q_total.insert(EntityId(key), value);
                }
                "E" => {
                    s.e.insert(EntityId(key), value);
                }
                "R" => {
                    s.r.insert(RelationId(key), value);
                }
                "H" => {
                    s.h.insert(TripleId(key), value);
                }
                _ => unreachable!(),
            }
        }
        Ok(s)
    }
}

fn write_kind<W: Write + ?Sized, K: Ord + Copy + std::hash::Hash + std::fmt::Display>(
    w: &mut W,
    kind: &str,
    v: &SparseVec<K>,
) -> std::io::Result<()> {
    for (k, x) in v.iter() {
        writeln!(w, "{kind}\t{k}\t{x:e}")?;
    }
    Ok(())
}

fn parse_snapshot_line(line: &str, n: usize) -> Result<(&str, u32, f64)> {
    let perr = |msg: &str| Error::Parse { line: n, msg: msg.to_owned() };
    let mut it = line.split('\t');
    let kind = it.next().ok_or_else(|| perr("missing kind"))?;
    if !matches!(kind, "T" | "Q" | "E" | "R" | "H") {
        return Err(perr("unknown kind"));
    }
    let key: u32 = it.next().and_then(|k| k.parse().ok()).ok_or_else(|| perr("bad key"))?;
    let value =
        if kind == "T" { 0.0 } else { it.next().and_then(|v| v.parse().ok()).ok_or_else(|| perr("bad value"))? };
    Ok((kind, key, value))
}

/// Entity-only heat: decayed access counts and diffused entity heat.
#[derive(Clone, Debug, Default)]
pub struct EntityHeatState {
    q_total: FxHashMap<EntityId, f64>,
    e: FxHashMap<EntityId, f64>,
    next_t: u64,
    last: AdvanceStats,
}

impl EntityHeatState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_timestamp(&self) -> u64 {
        self.next_t
    }

    pub fn q_total(&self) -> SparseVec<EntityId> {
        sorted(&self.q_total)
    }

    pub fn entity_heat(&self) -> SparseVec<EntityId> {
        sorted(&self.e)
    }

    pub fn heat_of(&self, e: EntityId) -> f64 {
        self.e.get(&e).copied().unwrap_or(0.0)
    }

    pub fn last_stats(&self) -> AdvanceStats {
        self.last
    }

    /// Decays entity heat by `gamma`, injects the diffused new queries and
    /// reports every non-decay mutation.
    pub fn advance(
        &mut self,
        kg: &KnowledgeGraph,
        new_queries: &[Query],
        params: &DiffusionParams,
    ) -> Result<ChangeSet<EntityId>> {
        params.validate()?;
        check_batch(kg, new_queries, self.next_t)?;
        let eps = params.eps_ths;

        decay_map(&mut self.q_total, params.gamma);
        let mut faded = Vec::new();
        if params.gamma != 1.0 {
            for (&k, v) in self.e.iter_mut() {
                *v *= params.gamma;
                if *v <= eps {
                    faded.push(k);
                }
            }
        }

        let q = q_vector_sum(new_queries);
        for (i, v) in q.iter() {
            *self.q_total.entry(i).or_insert(0.0) += v;
        }
        eliminate(&mut self.q_total, eps);

        let dq = diffuse(kg, &q, params.alpha, params.d);
        let mut changes = Vec::with_capacity(dq.len());
        for (i, v) in dq.iter() {
            let old = self.e.get(&i).copied();
            let value = old.unwrap_or(0.0) + v;
            let new = (value > eps).then_some(value);
            match new {
                Some(x) => self.e.insert(i, x),
                None => self.e.remove(&i),
            };
            if old != new {
                changes.push(Change { key: i, old, new });
            }
        }
        for id in faded {
            if let Some(&v) = self.e.get(&id) {
                if v <= eps {
                    self.e.remove(&id);
                    changes.push(Change { key: id, old: Some(v), new: None });
                }
            }
        }

        let changes = ChangeSet::new(changes);
        self.last = AdvanceStats { touched_entities: dq.len(), recomputed_triples: 0, changes: changes.len() };
        self.next_t += 1;
        Ok(changes)
    }
}
