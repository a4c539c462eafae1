//! Queries, timestamped query logs, per-query vectors and workload synthesis.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, RelationId};
use crate::sparse::SparseVec;

/// A lookup `(head, relation)` with its answer entities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub head: EntityId,
    pub relation: RelationId,
    /// Ascending and deduplicated.
    pub answers: Vec<EntityId>,
    pub timestamp: u64,
}

impl Query {
    pub fn new(head: EntityId, relation: RelationId, mut answers: Vec<EntityId>, timestamp: u64) -> Result<Self> {
        answers.sort_unstable();
        answers.dedup();
        if answers.is_empty() {
            return Err(Error::NoAnswers);
        }
        Ok(Self { head, relation, answers, timestamp })
    }

    /// A query whose answers are every tail of `(head, relation)` in `kg`.
    pub fn from_kg(kg: &KnowledgeGraph, head: EntityId, relation: RelationId, timestamp: u64) -> Result<Self> {
        let answers = kg.answer_triples(head, relation)?.iter().map(|&t| kg.triple(t).tail).collect();
        Self::new(head, relation, answers, timestamp)
    }

    pub fn validate(&self, kg: &KnowledgeGraph) -> Result<()> {
        kg.check_entity(self.head)?;
        kg.check_relation(self.relation)?;
        if self.answers.is_empty() {
            return Err(Error::NoAnswers);
        }
        self.answers.iter().try_for_each(|&a| kg.check_entity(a))
    }
}

/// Entity access vector of one query: 1 on the head, `1/|answers|` on each answer.
pub fn q_vector(query: &Query) -> SparseVec<EntityId> {
    let w = 1.0 / query.answers.len() as f64;
    SparseVec::from_pairs(std::iter::once((query.head, 1.0)).chain(query.answers.iter().map(|&a| (a, w))))
}

/// Summed access vector of several queries.
pub fn q_vector_sum<'a, I: IntoIterator<Item = &'a Query>>(queries: I) -> SparseVec<EntityId> {
    SparseVec::from_pairs(queries.into_iter().flat_map(|q| {
        let w = 1.0 / q.answers.len() as f64;
        std::iter::once((q.head, 1.0)).chain(q.answers.iter().map(move |&a| (a, w)))
    }))
}

/// One-hot relation vector of one query.
pub fn r_vector(query: &Query) -> SparseVec<RelationId> {
    SparseVec::from_pairs([(query.relation, 1.0)])
}

pub fn r_vector_sum<'a, I: IntoIterator<Item = &'a Query>>(queries: I) -> SparseVec<RelationId> {
    SparseVec::from_pairs(queries.into_iter().map(|q| (q.relation, 1.0)))
}

/// Splits a query into single-answer sub-queries, ordered by answer.
pub fn decompose(query: &Query) -> Vec<Query> {
    query
        .answers
        .iter()
        .map(|&a| Query { head: query.head, relation: query.relation, answers: vec![a], timestamp: query.timestamp })
        .collect()
}

/// Queries ordered by non-decreasing timestamp.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueryLog {
    queries: Vec<Query>,
}

impl QueryLog {
    pub fn new(queries: Vec<Query>) -> Result<Self> {
        for w in queries.windows(2) {
            if w[1].timestamp < w[0].timestamp {
                return Err(Error::InvalidParam(format!(
                    "query log timestamps decrease ({} after {})",
                    w[1].timestamp, w[0].timestamp
                )));
            }
        }
        Ok(Self { queries })
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Largest timestamp, if any.
    pub fn last_timestamp(&self) -> Option<u64> {
        self.queries.last().map(|q| q.timestamp)
    }

    /// Queries stamped `<= t`.
    pub fn prefix(&self, t: u64) -> &[Query] {
        let end = self.queries.partition_point(|q| q.timestamp <= t);
        &self.queries[..end]
    }

    /// Queries stamped exactly `t`.
    pub fn at(&self, t: u64) -> &[Query] {
        let lo = self.queries.partition_point(|q| q.timestamp < t);
        let hi = self.queries.partition_point(|q| q.timestamp <= t);
        &self.queries[lo..hi]
    }

    /// Writes one line per query: `t\thead\trelation\tans1,ans2,...`.
    ///
    /// Backslash, tab, newline and comma inside labels are backslash-escaped.
    pub fn write<W: Write + ?Sized>(&self, kg: &KnowledgeGraph, w: &mut W) -> std::io::Result<()> {
        for q in &self.queries {
            write!(
                w,
                "{}\t{}\t{}\t",
                q.timestamp,
                escape(kg.entity_label(q.head)),
                escape(kg.relation_label(q.relation))
            )?;
            for (i, &a) in q.answers.iter().enumerate() {
                if i > 0 {
                    w.write_all(b",")?;
                }
                w.write_all(escape(kg.entity_label(a)).as_bytes())?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Parses the format produced by [`QueryLog::write`].
    pub fn read<R: BufRead>(kg: &KnowledgeGraph, reader: R) -> Result<Self> {
        let mut queries = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let perr = |msg: &str| Error::Parse { line: n + 1, msg: msg.to_owned() };
            let fields = split_escaped(&line, '\t');
            if fields.len() != 4 {
                return Err(perr("expected 4 tab-separated fields"));
            }
            let t: u64 = fields[0].parse().map_err(|_| perr("bad timestamp"))?;
            let entity = |label: &str| {
                kg.entity_id(label).ok_or_else(|| Error::UnknownLabel { kind: "entity", label: label.to_owned() })
            };
            let head = entity(&fields[1])?;
            let rel = kg
                .relation_id(&fields[2])
                .ok_or_else(|| Error::UnknownLabel { kind: "relation", label: fields[2].clone() })?;
            let answers =
                split_escaped(&raw_field(&line, 3), ',').iter().map(|a| entity(a)).collect::<Result<Vec<_>>>()?;
            queries.push(Query::new(head, rel, answers, t)?);
        }
        Self::new(queries)
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            ',' => out.push_str("\\,"),
            c => out.push(c),
        }
    }
    out
}

/// Splits on unescaped `sep` and unescapes each piece.
fn split_escaped(s: &str, sep: char) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('t') => out.last_mut().unwrap().push('\t'),
                Some('n') => out.last_mut().unwrap().push('\n'),
                Some(o) => out.last_mut().unwrap().push(o),
                None => out.last_mut().unwrap().push('\\'),
            }
        } else if c == sep {
            out.push(String::new());
        } else {
            out.last_mut().unwrap().push(c);
        }
    }
    out
}

/// Returns the still-escaped text of tab-separated field `idx`.
fn raw_field(line: &str, idx: usize) -> String {
    let mut field = 0;
    let mut start = 0;
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 1,
            b'\t' => {
                if field == idx {
                    return line[start..i].to_owned();
                }
                field += 1;
                start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    if field == idx {
        line[start..].to_owned()
    } else {
        String::new()
    }
}

fn user_rng(seed: u64, user: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(user as u64);
    rng
}

/// Stamps topic-grouped `(head, relation, answers)` templates consecutively from 0.
fn assemble_log(topics: Vec<Vec<(EntityId, RelationId, Vec<EntityId>)>>) -> QueryLog {
    let queries = topics
        .into_iter()
        .flatten()
        .enumerate()
        .map(|(t, (head, relation, answers))| Query { head, relation, answers, timestamp: t as u64 })
        .collect();
    QueryLog { queries }
}

/// Synthesizes topic-shifting query logs: per user, `topics_per_user`
/// distinct heads, each queried `queries_per_topic` times in a row with
/// relations drawn (with replacement) from the head's outgoing relations.
pub fn generate_workload(
    kg: &KnowledgeGraph,
    users: usize,
    topics_per_user: usize,
    queries_per_topic: usize,
    seed: u64,
) -> Result<Vec<QueryLog>> {
    if users == 0 || topics_per_user == 0 || queries_per_topic == 0 {
        return Err(Error::InvalidParam("workload counts must be >= 1".into()));
    }
    let heads: Vec<EntityId> =
        (0..kg.entity_count() as u32).map(EntityId).filter(|&e| !kg.out_of(e).is_empty()).collect();
    if heads.is_empty() {
        return Err(Error::NoHeads);
    }
    if topics_per_user > heads.len() {
        return Err(Error::InvalidParam(format!(
            "{topics_per_user} topics requested but only {} usable heads",
            heads.len()
        )));
    }
    let logs = (0..users)
        .into_par_iter()
        .map(|user| {
            let mut rng = user_rng(seed, user);
            let chosen = index::sample(&mut rng, heads.len(), topics_per_user);
            let topics = chosen
                .iter()
                .map(|i| {
                    let head = heads[i];
                    let rels = kg.head_relations(head).expect("head id in range");
                    (0..queries_per_topic)
                        .map(|_| {
                            let rel = rels[rng.gen_range(0..rels.len())];
                            let answers = kg.answers_of(head, rel).iter().map(|&t| kg.triple(t).tail).collect();
                            (head, rel, answers)
                        })
                        .collect()
                })
                .collect();
            assemble_log(topics)
        })
        .collect();
    Ok(logs)
}

/// MetaQA questions grouped by their query entity.
#[derive(Clone, Debug, Default)]
pub struct TopicPool {
    /// Per head: `(relation, answers)` of each retained question.
    pub topics: BTreeMap<EntityId, Vec<(RelationId, Vec<EntityId>)>>,
    pub unparsable: usize,
    pub dropped: usize,
}

impl TopicPool {
    pub fn question_count(&self) -> usize {
        self.topics.values().map(Vec::len).sum()
    }

    /// Samples topic-grouped logs from the pool. Questions within a topic are
    /// drawn without replacement when the topic has enough of them.
    pub fn sample_workload(
        &self,
        users: usize,
        topics_per_user: usize,
        queries_per_topic: usize,
        seed: u64,
    ) -> Result<Vec<QueryLog>> {
        if users == 0 || topics_per_user == 0 || queries_per_topic == 0 {
            return Err(Error::InvalidParam("workload counts must be >= 1".into()));
        }
        let heads: Vec<&EntityId> = self.topics.keys().collect();
        if heads.is_empty() {
            return Err(Error::NoHeads);
        }
        if topics_per_user > heads.len() {
            return Err(Error::InvalidParam(format!(
                "{topics_per_user} topics requested but the pool has {}",
                heads.len()
            )));
        }
        let logs = (0..users)
            .map(|user| {
                let mut rng = user_rng(seed, user);
                let chosen = index::sample(&mut rng, heads.len(), topics_per_user);
                let topics = chosen
                    .iter()
                    .map(|i| {
                        let head = *heads[i];
                        let qs = &self.topics[&head];
                        let picks: Vec<usize> = if qs.len() >= queries_per_topic {
                            index::sample(&mut rng, qs.len(), queries_per_topic).into_vec()
                        } else {
                            (0..queries_per_topic).map(|_| rng.gen_range(0..qs.len())).collect()
                        };
                        picks.into_iter().map(|p| (head, qs[p].0, qs[p].1.clone())).collect()
                    })
                    .collect();
                assemble_log(topics)
            })
            .collect();
        Ok(logs)
    }
}

/// Reads MetaQA "vanilla" questions (`text with [entity]\tans1|ans2`).
///
/// The question's relation is inferred as the relation of the bracketed head
/// whose tail set overlaps most with the listed answers (lowest id on ties);
/// answers are then taken from the KG so every query is answerable.
/// Lines without a bracketed entity or a tab are counted as unparsable; lines
/// whose head is unknown or whose answers match no relation are dropped.
pub fn load_metaqa_queries<R: BufRead>(reader: R, kg: &KnowledgeGraph) -> Result<TopicPool> {
    let mut pool = TopicPool::default();
    for line in reader.lines() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parsed = line.split_once('\t').and_then(|(question, answers)| {
            let open = question.find('[')?;
            let close = open + question[open..].find(']')?;
            Some((&question[open + 1..close], answers))
        });
        let Some((head_label, answer_field)) = parsed else {
            pool.unparsable += 1;
            continue;
        };
        let Some(head) = kg.entity_id(head_label.trim()) else {
            pool.dropped += 1;
            continue;
        };
        let mut stated: Vec<EntityId> = answer_field.split('|').filter_map(|a| kg.entity_id(a.trim())).collect();
        stated.sort_unstable();
        stated.dedup();

        let mut best: Option<(usize, RelationId)> = None;
        for rel in kg.head_relations(head)? {
            let overlap =
                kg.answers_of(head, rel).iter().filter(|&&t| stated.binary_search(&kg.triple(t).tail).is_ok()).count();
            if overlap > 0 && best.map_or(true, |(o, _)| overlap > o) {
                best = Some((overlap, rel));
            }
        }
        let Some((_, rel)) = best else {
            pool.dropped += 1;
            continue;
        };
        let answers = kg.answers_of(head, rel).iter().map(|&t| kg.triple(t).tail).collect();
        pool.topics.entry(head).or_default().push((rel, answers));
    }
    if pool.unparsable + pool.dropped > 0 {
        log::info!("MetaQA reader: {} unparsable, {} dropped", pool.unparsable, pool.dropped);
    }
    Ok(pool)
}
