//! Knowledge graph storage: interning, the undirected entity adjacency and
//! directional answer lookup.

use std::fmt;
use std::io::{BufRead, Write};

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl From<$name> for usize {
            #[inline]
            fn from(id: $name) -> usize {
                id.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

id_type!(
    /// Dense entity handle, assigned in first-seen order.
    EntityId
);
id_type!(
    /// Dense relation handle, assigned in first-seen order.
    RelationId
);
id_type!(
    /// Dense triple handle, assigned in first-seen order after deduplication.
    TripleId
);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

/// Line formats accepted by [`load_kg`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KgFormat {
    /// `head\trelation\ttail`; lines starting with `#` or `@` are comments.
    Tab3,
    /// `<s> <p> <o> .`
    NTriples,
    /// `head|relation|tail`, as in the MetaQA `kb.txt`.
    Pipe3,
}

/// Ingestion counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub data_lines: usize,
    pub skipped_lines: usize,
    pub duplicate_triples: usize,
}

/// Incrementally interns labels and collects deduplicated triples.
#[derive(Debug, Default)]
pub struct KgBuilder {
    entity_labels: Vec<String>,
    entity_ids: FxHashMap<String, EntityId>,
    relation_labels: Vec<String>,
    relation_ids: FxHashMap<String, RelationId>,
    triples: Vec<Triple>,
    seen: FxHashSet<Triple>,
}

impl KgBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entity(&mut self, label: &str) -> EntityId {
        if let Some(&id) = self.entity_ids.get(label) {
            return id;
        }
        let id = EntityId(self.entity_labels.len() as u32);
        self.entity_labels.push(label.to_owned());
        self.entity_ids.insert(label.to_owned(), id);
        id
    }

    pub fn relation(&mut self, label: &str) -> RelationId {
        if let Some(&id) = self.relation_ids.get(label) {
            return id;
        }
        let id = RelationId(self.relation_labels.len() as u32);
        self.relation_labels.push(label.to_owned());
        self.relation_ids.insert(label.to_owned(), id);
        id
    }

    /// Adds a triple by label. Returns false if it was already present.
    pub fn add(&mut self, head: &str, relation: &str, tail: &str) -> bool {
        let t = Triple { head: self.entity(head), relation: self.relation(relation), tail: self.entity(tail) };
        self.add_ids(t)
    }

    /// Adds a triple over ids previously returned by this builder.
    pub fn add_ids(&mut self, t: Triple) -> bool {
        debug_assert!(t.head.index() < self.entity_labels.len());
        debug_assert!(t.tail.index() < self.entity_labels.len());
        debug_assert!(t.relation.index() < self.relation_labels.len());
        if self.seen.insert(t) {
            self.triples.push(t);
            true
        } else {
            false
        }
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn build(self) -> Result<KnowledgeGraph> {
        if self.triples.is_empty() {
            return Err(Error::EmptyKg);
        }
        Ok(KnowledgeGraph::assemble(
            self.entity_labels,
            self.entity_ids,
            self.relation_labels,
            self.relation_ids,
            self.triples,
        ))
    }
}

/// An immutable, indexed knowledge graph.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entity_labels: Vec<String>,
    entity_ids: FxHashMap<String, EntityId>,
    relation_labels: Vec<String>,
    relation_ids: FxHashMap<String, RelationId>,
    triples: Vec<Triple>,
    // CSR: sorted distinct neighbors, no self entries.
    adj_offsets: Vec<usize>,
    adj: Vec<EntityId>,
    // CSR: triples with the entity as head or tail (self-loops listed once).
    inc_offsets: Vec<usize>,
    inc: Vec<TripleId>,
    // CSR: triples with the entity as head, sorted by (relation, tail).
    out_offsets: Vec<usize>,
    out: Vec<TripleId>,
}

fn csr(n: usize, pairs: &mut [(u32, u32)]) -> (Vec<usize>, Vec<u32>) {
    pairs.sort_unstable();
    let mut offsets = vec![0usize; n + 1];
    for &(row, _) in pairs.iter() {
        offsets[row as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    (offsets, pairs.iter().map(|&(_, c)| c).collect())
}

impl KnowledgeGraph {
    fn assemble(
        entity_labels: Vec<String>,
        entity_ids: FxHashMap<String, EntityId>,
        relation_labels: Vec<String>,
        relation_ids: FxHashMap<String, RelationId>,
        triples: Vec<Triple>,
    ) -> Self {
        let n = entity_labels.len();

        let mut edges: Vec<(u32, u32)> = Vec::with_capacity(triples.len() * 2);
        for t in &triples {
            if t.head != t.tail {
                edges.push((t.head.0, t.tail.0));
                edges.push((t.tail.0, t.head.0));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let (adj_offsets, adj) = csr(n, &mut edges);

        let mut inc_pairs: Vec<(u32, u32)> = Vec::with_capacity(triples.len() * 2);
        for (i, t) in triples.iter().enumerate() {
            inc_pairs.push((t.head.0, i as u32));
            if t.tail != t.head {
                inc_pairs.push((t.tail.0, i as u32));
            }
        }
        let (inc_offsets, inc) = csr(n, &mut inc_pairs);

        let mut order: Vec<u32> = (0..triples.len() as u32).collect();
        order.sort_unstable_by_key(|&i| {
            let t = triples[i as usize];
            (t.head, t.relation, t.tail)
        });
        let mut out_offsets = vec![0usize; n + 1];
        for t in &triples {
            out_offsets[t.head.index() + 1] += 1;
        }
        for i in 0..n {
            out_offsets[i + 1] += out_offsets[i];
        }

        KnowledgeGraph {
            entity_labels,
            entity_ids,
            relation_labels,
            relation_ids,
            triples,
            adj_offsets,
            adj: adj.into_iter().map(EntityId).collect(),
            inc_offsets,
            inc: inc.into_iter().map(TripleId).collect(),
            out_offsets,
            out: order.into_iter().map(TripleId).collect(),
        }
    }

    /// Builds a KG from labeled triples. Mostly useful for tests and examples.
    pub fn from_labeled<'a, I>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    {
        let mut b = KgBuilder::new();
        for (h, r, t) in triples {
            b.add(h, r, t);
        }
        b.build()
    }

    pub fn entity_count(&self) -> usize {
        self.entity_labels.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relation_labels.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    #[inline]
    pub fn triple(&self, id: TripleId) -> Triple {
        self.triples[id.index()]
    }

    pub fn entity_label(&self, e: EntityId) -> &str {
        &self.entity_labels[e.index()]
    }

    pub fn relation_label(&self, r: RelationId) -> &str {
        &self.relation_labels[r.index()]
    }

    pub fn entity_id(&self, label: &str) -> Option<EntityId> {
        self.entity_ids.get(label).copied()
    }

    pub fn relation_id(&self, label: &str) -> Option<RelationId> {
        self.relation_ids.get(label).copied()
    }

    pub fn check_entity(&self, e: EntityId) -> Result<()> {
        if e.index() < self.entity_count() {
            Ok(())
        } else {
            Err(Error::OutOfRange { kind: "entity", id: e.index(), size: self.entity_count() })
        }
    }

    pub fn check_relation(&self, r: RelationId) -> Result<()> {
        if r.index() < self.relation_count() {
            Ok(())
        } else {
            Err(Error::OutOfRange { kind: "relation", id: r.index(), size: self.relation_count() })
        }
    }

    /// Distinct neighbors of `e` in the undirected adjacency, ascending.
    pub fn neighbors(&self, e: EntityId) -> Result<&[EntityId]> {
        self.check_entity(e)?;
        Ok(self.adj_of(e))
    }

    #[inline]
    pub(crate) fn adj_of(&self, e: EntityId) -> &[EntityId] {
        &self.adj[self.adj_offsets[e.index()]..self.adj_offsets[e.index() + 1]]
    }

    pub fn degree(&self, e: EntityId) -> Result<usize> {
        self.neighbors(e).map(<[_]>::len)
    }

    /// Number of undirected adjacency edges.
    pub fn edge_count(&self) -> usize {
        self.adj.len() / 2
    }

    /// Triples with `e` as head or tail.
    pub fn incident_triples(&self, e: EntityId) -> Result<&[TripleId]> {
        self.check_entity(e)?;
        Ok(self.inc_of(e))
    }

    #[inline]
    pub(crate) fn inc_of(&self, e: EntityId) -> &[TripleId] {
        &self.inc[self.inc_offsets[e.index()]..self.inc_offsets[e.index() + 1]]
    }

    /// Triples with `e` as head, ordered by (relation, tail).
    pub fn outgoing_triples(&self, e: EntityId) -> Result<&[TripleId]> {
        self.check_entity(e)?;
        Ok(self.out_of(e))
    }

    #[inline]
    pub(crate) fn out_of(&self, e: EntityId) -> &[TripleId] {
        &self.out[self.out_offsets[e.index()]..self.out_offsets[e.index() + 1]]
    }

    /// All triples `(head, rel, ·)`, ordered by tail.
    pub fn answer_triples(&self, head: EntityId, rel: RelationId) -> Result<&[TripleId]> {
        self.check_entity(head)?;
        self.check_relation(rel)?;
        Ok(self.answers_of(head, rel))
    }

    #[inline]
    pub(crate) fn answers_of(&self, head: EntityId, rel: RelationId) -> &[TripleId] {
        let out = self.out_of(head);
        let lo = out.partition_point(|&t| self.triples[t.index()].relation < rel);
        let hi = out.partition_point(|&t| self.triples[t.index()].relation <= rel);
        &out[lo..hi]
    }

    /// Distinct relations for which `head` has at least one outgoing triple.
    pub fn head_relations(&self, head: EntityId) -> Result<Vec<RelationId>> {
        let mut rels: Vec<RelationId> = self.outgoing_triples(head)?.iter().map(|&t| self.triple(t).relation).collect();
        rels.dedup();
        Ok(rels)
    }

    pub fn find_triple(&self, head: EntityId, rel: RelationId, tail: EntityId) -> Option<TripleId> {
        if head.index() >= self.entity_count() || rel.index() >= self.relation_count() {
            return None;
        }
        let ans = self.answers_of(head, rel);
        ans.binary_search_by(|&t| self.triples[t.index()].tail.cmp(&tail)).ok().map(|i| ans[i])
    }

    /// Writes the given triples as TAB3 lines.
    pub fn write_tab3<W, I>(&self, w: &mut W, triples: I) -> std::io::Result<()>
    where
        W: Write + ?Sized,
        I: IntoIterator<Item = TripleId>,
    {
        for id in triples {
            let t = self.triple(id);
            writeln!(
                w,
                "{}\t{}\t{}",
                self.entity_label(t.head),
                self.relation_label(t.relation),
                self.entity_label(t.tail)
            )?;
        }
        Ok(())
    }
}

fn split_tab3(line: &str) -> Option<(&str, &str, &str)> {
    if line.starts_with('#') || line.starts_with('@') {
        return None;
    }
    let mut it = line.split('\t');
    let (h, r, t) = (it.next()?, it.next()?, it.next()?);
    if it.next().is_some() || h.is_empty() || r.is_empty() || t.is_empty() {
        return None;
    }
    Some((h, r, t))
}

fn split_pipe3(line: &str) -> Option<(&str, &str, &str)> {
    let mut it = line.split('|');
    let (h, r, t) = (it.next()?, it.next()?, it.next()?);
    if it.next().is_some() || h.is_empty() || r.is_empty() || t.is_empty() {
        return None;
    }
    Some((h, r, t))
}

/// Splits off one N-Triples term, returning it with angle brackets removed.
fn nt_term(s: &str) -> Option<(&str, &str)> {
    let s = s.trim_start();
    if let Some(rest) = s.strip_prefix('<') {
        let end = rest.find('>')?;
        Some((&rest[..end], &rest[end + 1..]))
    } else if s.starts_with('"') {
        // Literal: find the closing quote, honoring escapes, then any tag.
        let bytes = s.as_bytes();
        let mut i = 1;
        while i < bytes.len() {
            match bytes[i] {
                b'\\' => i += 2,
                b'"' => break,
                _ => i += 1,
            }
        }
        if i >= bytes.len() {
            return None;
        }
        let mut end = i + 1;
        let tail = &s[end..];
        if let Some(dt) = tail.strip_prefix("^^<") {
            end += 3 + dt.find('>')? + 1;
        } else if tail.starts_with('@') {
            end += tail.find(char::is_whitespace).unwrap_or(tail.len());
        }
        Some((&s[..end], &s[end..]))
    } else {
        let end = s.find(char::is_whitespace).unwrap_or(s.len());
        if end == 0 {
            return None;
        }
        Some((&s[..end], &s[end..]))
    }
}

fn split_ntriples(line: &str) -> Option<(&str, &str, &str)> {
    if line.starts_with('#') {
        return None;
    }
    let body = line.trim_end().strip_suffix('.')?;
    let (s, rest) = nt_term(body)?;
    let (p, rest) = nt_term(rest)?;
    let (o, rest) = nt_term(rest)?;
    if !rest.trim().is_empty() || s.is_empty() || p.is_empty() || o.is_empty() {
        return None;
    }
    Some((s, p, o))
}

/// Parses a KG from a line stream. Malformed lines are skipped and counted.
pub fn load_kg<R: BufRead>(reader: R, format: KgFormat) -> Result<(KnowledgeGraph, LoadReport)> {
    let mut b = KgBuilder::new();
    let mut report = LoadReport::default();
    for line in reader.lines() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let fields = match format {
            KgFormat::Tab3 => {
                if line.starts_with('#') || line.starts_with('@') {
                    continue;
                }
                split_tab3(line)
            }
            KgFormat::Pipe3 => split_pipe3(line),
            KgFormat::NTriples => {
                if line.trim_start().starts_with('#') {
                    continue;
                }
                split_ntriples(line.trim())
            }
        };
        report.data_lines += 1;
        match fields {
            Some((h, r, t)) => {
                if !b.add(h, r, t) {
                    report.duplicate_triples += 1;
                }
            }
            None => report.skipped_lines += 1,
        }
    }
    if report.skipped_lines > 0 {
        log::warn!("skipped {} malformed KG lines", report.skipped_lines);
    }
    Ok((b.build()?, report))
}
