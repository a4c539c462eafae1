//! Adaptive personalized summaries of large knowledge graphs.
//!
//! A user's queries inject heat into the entities and relations they touch;
//! heat spreads to nearby entities and fades geometrically with time. The
//! hottest triples (or the subgraph induced by the hottest entities) form a
//! tiny per-user summary that is kept current with incremental updates.
//!
//! ```
//! use pkgsum_core::{
//!     DiffusionParams, KnowledgeGraph, Query, Apex2nPipeline, SummarizerConfig,
//! };
//!
//! let kg = KnowledgeGraph::from_labeled([
//!     ("Nolan", "directed", "Tenet"),
//!     ("Nolan", "directed", "Inception"),
//!     ("Tenet", "genre", "Action"),
//! ])?;
//! let nolan = kg.entity_id("Nolan").unwrap();
//! let directed = kg.relation_id("directed").unwrap();
//!
//! let mut pipeline = Apex2nPipeline::new(SummarizerConfig::new(2, DiffusionParams::default()))?;
//! pipeline.step(&kg, &[Query::from_kg(&kg, nolan, directed, 0)?])?;
//! assert_eq!(pipeline.pkg().len(), 2);
//! # Ok::<(), pkgsum_core::Error>(())
//! ```

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod eval;
pub mod heat;
pub mod incsort;
pub mod io;
pub mod kg;
pub mod query;
pub mod sparse;
pub mod summarizer;

pub use error::{Error, Result};
pub use heat::{diffuse, diffuse_closed_form, AdvanceStats, DiffusionParams, EntityHeatState, HeatState};
pub use incsort::{Change, ChangeSet, SortedHeatIndex};
pub use kg::{load_kg, EntityId, KgBuilder, KgFormat, KnowledgeGraph, LoadReport, RelationId, Triple, TripleId};
pub use query::{decompose, generate_workload, load_metaqa_queries, q_vector, r_vector, Query, QueryLog, TopicPool};
pub use sparse::SparseVec;
pub use summarizer::{
    budget_from_ratio, export_pkg, greedy_entity_pkg, Apex2Pipeline, Apex2nPipeline, ExportFormat, Method, Pipeline,
    Pkg, SummarizerConfig,
};
