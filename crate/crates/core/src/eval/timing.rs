//! Per-step timing of the incremental pipelines across graph sizes.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::heat::DiffusionParams;
use crate::query::generate_workload;
use crate::summarizer::{Method, Pipeline, SummarizerConfig};

use super::synthetic::{generate_synthetic_topics, SyntheticSpec, TopicSpec};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimingRow {
    pub triples: usize,
    pub entities: usize,
    pub median_step_seconds: f64,
    /// Mean number of entities reached by diffusion per step.
    pub mean_touched: f64,
}

/// Builds one random topic per size with average degree `connectivity`,
/// replays a `steps`-query workload (10 queries per topic) through the
/// pipeline with a fixed `budget`, and reports the median step time.
pub fn timing_scaling_check(
    connectivity: f64,
    sizes: &[usize],
    method: Method,
    params: &DiffusionParams,
    budget: usize,
    steps: usize,
    seed: u64,
) -> Result<Vec<TimingRow>> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParam("sizes must be strictly increasing".into()));
    }
    if !(connectivity > 0.0) {
        return Err(Error::InvalidParam("connectivity must be positive".into()));
    }
    let topics = steps.div_ceil(10).max(1);
    sizes
        .iter()
        .map(|&triples| {
            let entities = ((2.0 * triples as f64 / connectivity).round() as usize).max(2);
            let spec = SyntheticSpec {
                topics: vec![TopicSpec { entities, degree: 2.0 * triples as f64 / entities as f64 }],
                relations: 8,
                bridges: 0,
            };
            let kg = generate_synthetic_topics(&spec, seed)?.kg;
            let log = generate_workload(&kg, 1, topics, 10, seed)?.remove(0);
            let mut pipeline = Pipeline::new(method, SummarizerConfig::new(budget, *params))?;
            let mut times = Vec::with_capacity(steps);
            let mut touched = 0usize;
            for t in 0..steps as u64 {
                let batch = log.at(t);
                let start = Instant::now();
                pipeline.step(&kg, batch)?;
                times.push(start.elapsed().as_secs_f64());
                touched += pipeline.touched_entities();
            }
            Ok(TimingRow {
                triples: kg.triple_count(),
                entities: kg.entity_count(),
                median_step_seconds: super::median(&mut times),
                mean_touched: touched as f64 / steps.max(1) as f64,
            })
        })
        .collect()
}
