//! Budgeted personalized summaries and the two incremental pipelines.

use std::fmt;
use std::io::Write;

use rustc_hash::FxHashSet;

use crate::error::{Error, Result};
use crate::heat::{DiffusionParams, EntityHeatState, HeatState};
use crate::incsort::SortedHeatIndex;
use crate::kg::{EntityId, KnowledgeGraph, RelationId, TripleId};
use crate::query::Query;

/// A sub-KG: triples plus the entities and relations they use.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Pkg {
    entities: Vec<EntityId>,
    relations: Vec<RelationId>,
    triples: Vec<TripleId>,
}

impl Pkg {
    /// Builds a PKG whose entities and relations are induced by `triples`.
    pub fn from_triples(kg: &KnowledgeGraph, triples: impl IntoIterator<Item = TripleId>) -> Self {
        let mut triples: Vec<TripleId> = triples.into_iter().collect();
        triples.sort_unstable();
        triples.dedup();
        let mut entities = Vec::with_capacity(triples.len() * 2);
        let mut relations = Vec::with_capacity(triples.len());
        for &id in &triples {
            let t = kg.triple(id);
            entities.push(t.head);
            entities.push(t.tail);
            relations.push(t.relation);
        }
        entities.sort_unstable();
        entities.dedup();
        relations.sort_unstable();
        relations.dedup();
        Self { entities, relations, triples }
    }

    pub fn entities(&self) -> &[EntityId] {
        &self.entities
    }

    pub fn relations(&self) -> &[RelationId] {
        &self.relations
    }

    /// Ascending triple ids.
    pub fn triples(&self) -> &[TripleId] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Tails of `(head, rel, ·)` triples present in the summary.
    pub fn answers(&self, kg: &KnowledgeGraph, head: EntityId, rel: RelationId) -> Vec<EntityId> {
        let mut out: Vec<EntityId> = self
            .triples
            .iter()
            .map(|&t| kg.triple(t))
            .filter(|t| t.head == head && t.relation == rel)
            .map(|t| t.tail)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Summary export formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Tab3,
    Dot,
}

fn dot_quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn export_pkg<W: Write + ?Sized>(
    pkg: &Pkg,
    kg: &KnowledgeGraph,
    format: ExportFormat,
    w: &mut W,
) -> std::io::Result<()> {
    match format {
        ExportFormat::Tab3 => kg.write_tab3(w, pkg.triples.iter().copied()),
        ExportFormat::Dot => {
            writeln!(w, "digraph pkg {{")?;
            for &e in &pkg.entities {
                writeln!(w, "  {};", dot_quote(kg.entity_label(e)))?;
            }
            for &id in &pkg.triples {
                let t = kg.triple(id);
                writeln!(
                    w,
                    "  {} -> {} [label={}];",
                    dot_quote(kg.entity_label(t.head)),
                    dot_quote(kg.entity_label(t.tail)),
                    dot_quote(kg.relation_label(t.relation))
                )?;
            }
            writeln!(w, "}}")
        }
    }
}

/// `max(1, round(kappa * |T|))`.
pub fn budget_from_ratio(kg: &KnowledgeGraph, kappa: f64) -> Result<usize> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::InvalidParam(format!("kappa must be in (0,1], got {kappa}")));
    }
    Ok(((kappa * kg.triple_count() as f64).round() as usize).max(1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Triple-level heat, top-K triples.
    Apex2,
    /// Entity-level heat, greedy induced subgraph.
    Apex2N,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Apex2 => "APEX2",
            Method::Apex2N => "APEX2N",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummarizerConfig {
    pub budget: usize,
    /// Rebuild the summary on timestamps divisible by this.
    pub r_apex: u64,
    pub params: DiffusionParams,
}

impl SummarizerConfig {
    pub fn new(budget: usize, params: DiffusionParams) -> Self {
        Self { budget, r_apex: 1, params }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidParam("budget must be >= 1".into()));
        }
        if self.r_apex == 0 {
            return Err(Error::InvalidParam("r_apex must be >= 1".into()));
        }
        self.params.validate()
    }
}

/// Adds entities in `ranked` order while the triples they induce together
/// stay within `budget`; stops at the first entity that would overflow.
pub fn greedy_entity_pkg<I>(kg: &KnowledgeGraph, ranked: I, budget: usize) -> Pkg
where
    I: IntoIterator<Item = EntityId>,
{
    let mut chosen: FxHashSet<EntityId> = FxHashSet::default();
    let mut triples: Vec<TripleId> = Vec::new();
    let mut fresh: Vec<TripleId> = Vec::new();
    for v in ranked {
        if !chosen.insert(v) {
            continue;
        }
        fresh.clear();
        for &id in kg.inc_of(v) {
            let t = kg.triple(id);
            let other = if t.head == v { t.tail } else { t.head };
            if chosen.contains(&other) {
                fresh.push(id);
            }
        }
        if triples.len() + fresh.len() > budget {
            break;
        }
        triples.extend_from_slice(&fresh);
        if triples.len() == budget {
            // Further entities can only add triples or nothing.
            break;
        }
    }
    Pkg::from_triples(kg, triples)
}

/// Triple-level pipeline: heat state, sorted index and current summary.
#[derive(Clone, Debug)]
pub struct Apex2Pipeline {
    config: SummarizerConfig,
    state: HeatState,
    index: SortedHeatIndex<TripleId>,
    pkg: Pkg,
}

impl Apex2Pipeline {
    pub fn new(config: SummarizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, state: HeatState::new(), index: SortedHeatIndex::new(), pkg: Pkg::default() })
    }

    pub fn state(&self) -> &HeatState {
        &self.state
    }

    pub fn index(&self) -> &SortedHeatIndex<TripleId> {
        &self.index
    }

    pub fn pkg(&self) -> &Pkg {
        &self.pkg
    }

    /// Processes the queries of the next timestamp. Returns whether the
    /// summary was rebuilt.
    pub fn step(&mut self, kg: &KnowledgeGraph, new_queries: &[Query]) -> Result<bool> {
        let t = self.state.next_timestamp();
        let changes = self.state.advance(kg, new_queries, &self.config.params)?;
        self.index.decay(self.config.params.triple_decay());
        self.index.apply_changes(&changes)?;
        let rebuild = t % self.config.r_apex == 0;
        if rebuild {
            self.pkg = Pkg::from_triples(kg, self.index.top_k(self.config.budget));
        }
        Ok(rebuild)
    }
}

/// Entity-level pipeline with greedy induced-subgraph summaries.
#[derive(Clone, Debug)]
pub struct Apex2nPipeline {
    config: SummarizerConfig,
    state: EntityHeatState,
    index: SortedHeatIndex<EntityId>,
    pkg: Pkg,
}

impl Apex2nPipeline {
    pub fn new(config: SummarizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, state: EntityHeatState::new(), index: SortedHeatIndex::new(), pkg: Pkg::default() })
    }

    pub fn state(&self) -> &EntityHeatState {
        &self.state
    }

    pub fn index(&self) -> &SortedHeatIndex<EntityId> {
        &self.index
    }

    pub fn pkg(&self) -> &Pkg {
        &self.pkg
    }

    pub fn step(&mut self, kg: &KnowledgeGraph, new_queries: &[Query]) -> Result<bool> {
        let t = self.state.next_timestamp();
        let changes = self.state.advance(kg, new_queries, &self.config.params)?;
        self.index.decay(self.config.params.gamma);
        self.index.apply_changes(&changes)?;
        let rebuild = t % self.config.r_apex == 0;
        if rebuild {
            let ranked = self.index.iter().map(|(k, _)| k);
            self.pkg = greedy_entity_pkg(kg, ranked, self.config.budget);
        }
        Ok(rebuild)
    }
}

/// Either pipeline behind one interface.
#[derive(Clone, Debug)]
pub enum Pipeline {
    Apex2(Apex2Pipeline),
    Apex2N(Apex2nPipeline),
}

impl Pipeline {
    pub fn new(method: Method, config: SummarizerConfig) -> Result<Self> {
        Ok(match method {
            Method::Apex2 => Pipeline::Apex2(Apex2Pipeline::new(config)?),
            Method::Apex2N => Pipeline::Apex2N(Apex2nPipeline::new(config)?),
        })
    }

    pub fn step(&mut self, kg: &KnowledgeGraph, new_queries: &[Query]) -> Result<bool> {
        match self {
            Pipeline::Apex2(p) => p.step(kg, new_queries),
            Pipeline::Apex2N(p) => p.step(kg, new_queries),
        }
    }

    pub fn pkg(&self) -> &Pkg {
        match self {
            Pipeline::Apex2(p) => p.pkg(),
            Pipeline::Apex2N(p) => p.pkg(),
        }
    }

    /// Entities touched by the last step's diffusion.
    pub fn touched_entities(&self) -> usize {
        match self {
            Pipeline::Apex2(p) => p.state().last_stats().touched_entities,
            Pipeline::Apex2N(p) => p.state().last_stats().touched_entities,
        }
    }
}
