//! Auto-regressive evaluation, reports, sweeps and analysis helpers.

mod bound;
mod synthetic;
mod timing;

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{glimpse_summarize, ppr_summarize, GlimpseConfig, PprConfig};
use crate::error::{Error, Result};
use crate::heat::DiffusionParams;
use crate::kg::KnowledgeGraph;
use crate::query::{Query, QueryLog};
use crate::summarizer::{budget_from_ratio, Method, Pipeline, Pkg, SummarizerConfig};

pub use bound::{adaptation_bound, empirical_switch_point, TopicShape};
pub use synthetic::{generate_synthetic_topics, SyntheticKg, SyntheticSpec, TopicSpec};
pub use timing::{timing_scaling_check, TimingRow};

/// F1 of the summary's answers to `query` against the KG's answers.
pub fn f1(pkg: &Pkg, query: &Query, kg: &KnowledgeGraph) -> Result<f64> {
    let truth: Vec<_> = kg.answer_triples(query.head, query.relation)?.iter().map(|&t| kg.triple(t).tail).collect();
    if truth.is_empty() {
        return Err(Error::NoAnswers);
    }
    let got = pkg.answers(kg, query.head, query.relation);
    Ok(f1_sets(&truth, &got))
}

/// F1 of two ascending, deduplicated id lists.
fn f1_sets<T: Ord>(truth: &[T], got: &[T]) -> f64 {
    let tp = got.iter().filter(|x| truth.binary_search(x).is_ok()).count() as f64;
    if tp == 0.0 {
        return 0.0;
    }
    let precision = tp / got.len() as f64;
    let recall = tp / truth.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EvalMethod {
    Apex2,
    Apex2N,
    Glimpse,
    Ppr,
}

impl EvalMethod {
    pub const ALL: [EvalMethod; 4] = [EvalMethod::Apex2N, EvalMethod::Apex2, EvalMethod::Glimpse, EvalMethod::Ppr];

    fn apex(self) -> Option<Method> {
        match self {
            EvalMethod::Apex2 => Some(Method::Apex2),
            EvalMethod::Apex2N => Some(Method::Apex2N),
            _ => None,
        }
    }
}

impl fmt::Display for EvalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMethod::Apex2 => "APEX2",
            EvalMethod::Apex2N => "APEX2N",
            EvalMethod::Glimpse => "GLIMPSE",
            EvalMethod::Ppr => "PPR",
        })
    }
}

impl FromStr for EvalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "apex2" => Ok(EvalMethod::Apex2),
            "apex2n" => Ok(EvalMethod::Apex2N),
            "glimpse" => Ok(EvalMethod::Glimpse),
            "ppr" => Ok(EvalMethod::Ppr),
            _ => Err(Error::InvalidParam(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Budget {
    Fixed(usize),
    /// Fraction of the KG's triples.
    Ratio(f64),
}

impl Budget {
    pub fn resolve(self, kg: &KnowledgeGraph) -> Result<usize> {
        match self {
            Budget::Fixed(0) => Err(Error::InvalidParam("budget must be >= 1".into())),
            Budget::Fixed(k) => Ok(k),
            Budget::Ratio(kappa) => budget_from_ratio(kg, kappa),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSettings {
    pub budget: Budget,
    pub params: DiffusionParams,
    /// Summary rebuild interval of the incremental methods.
    pub r_apex: u64,
    /// Re-summarization interval of the baselines.
    pub r_interval: u64,
    pub glimpse_epsilon: f64,
    pub restart: f64,
    pub seed: u64,
    /// Evaluate users concurrently. Disable for timing measurements.
    pub parallel: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            budget: Budget::Ratio(1e-4),
            params: DiffusionParams::default(),
            r_apex: 1,
            r_interval: 9,
            glimpse_epsilon: 1e-3,
            restart: 0.85,
            seed: 0,
            parallel: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalRecord {
    pub method: EvalMethod,
    pub user: usize,
    /// Timestamp of the summary; it is scored on the queries of `timestamp + 1`.
    pub timestamp: u64,
    pub f1: f64,
    pub step_seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MethodAggregate {
    pub method: EvalMethod,
    pub users: usize,
    /// Mean over users of each user's mean F1.
    pub mean_f1: f64,
    /// Population standard deviation of the per-user mean F1.
    pub std_f1: f64,
    /// Mean wall time of a summarizing step.
    pub mean_step_seconds: f64,
    /// Median wall time of a summarizing step.
    pub median_step_seconds: f64,
    /// Wall time over every step of every user, including steps that only tracked heat.
    pub total_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    records: Vec<EvalRecord>,
    /// `(method, user, seconds)` over all steps of the run.
    user_seconds: Vec<(EvalMethod, usize, f64)>,
    aggregates: Vec<MethodAggregate>,
}

fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

impl EvalReport {
    pub fn new(mut records: Vec<EvalRecord>, mut user_seconds: Vec<(EvalMethod, usize, f64)>) -> Self {
        records.sort_by_key(|a| (a.method, a.user, a.timestamp));
        user_seconds.sort_by_key(|a| (a.0, a.1));
        let aggregates = Self::aggregate(&records, &user_seconds);
        Self { records, user_seconds, aggregates }
    }

    fn aggregate(records: &[EvalRecord], user_seconds: &[(EvalMethod, usize, f64)]) -> Vec<MethodAggregate> {
        let mut methods: Vec<EvalMethod> = records.iter().map(|r| r.method).collect();
        methods.extend(user_seconds.iter().map(|u| u.0));
        methods.sort_unstable();
        methods.dedup();
        methods
            .into_iter()
            .map(|m| {
                let rs: Vec<&EvalRecord> = records.iter().filter(|r| r.method == m).collect();
                let mut users: Vec<usize> = rs.iter().map(|r| r.user).collect();
                users.dedup();
                let user_means: Vec<f64> = users
                    .iter()
                    .map(|&u| {
                        let f: Vec<f64> = rs.iter().filter(|r| r.user == u).map(|r| r.f1).collect();
                        f.iter().sum::<f64>() / f.len() as f64
                    })
                    .collect();
                let k = user_means.len().max(1) as f64;
                let mean_f1 = user_means.iter().sum::<f64>() / k;
                let std_f1 = (user_means.iter().map(|x| (x - mean_f1).powi(2)).sum::<f64>() / k).sqrt();
                let mut steps: Vec<f64> = rs.iter().map(|r| r.step_seconds).collect();
                let mean_step_seconds = steps.iter().sum::<f64>() / steps.len().max(1) as f64;
                MethodAggregate {
                    method: m,
                    users: users.len(),
                    mean_f1,
                    std_f1,
                    mean_step_seconds,
                    median_step_seconds: median(&mut steps),
                    total_seconds: user_seconds.iter().filter(|u| u.0 == m).map(|u| u.2).sum(),
                }
            })
            .collect()
    }

    pub fn records(&self) -> &[EvalRecord] {
        &self.records
    }

    pub fn aggregates(&self) -> &[MethodAggregate] {
        &self.aggregates
    }

    pub fn aggregate_for(&self, method: EvalMethod) -> Option<&MethodAggregate> {
        self.aggregates.iter().find(|a| a.method == method)
    }

    /// Aggregates recomputed from the stored records.
    pub fn recomputed_aggregates(&self) -> Vec<MethodAggregate> {
        Self::aggregate(&self.records, &self.user_seconds)
    }

    pub fn merge(reports: impl IntoIterator<Item = EvalReport>) -> Self {
        let mut records = Vec::new();
        let mut secs = Vec::new();
        for r in reports {
            records.extend(r.records);
            secs.extend(r.user_seconds);
        }
        Self::new(records, secs)
    }

    pub const CSV_HEADER: &'static str = "method,user,timestamp,f1,step_seconds";

    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            writeln!(w, "{},{},{},{},{}", r.method, r.user, r.timestamp, r.f1, r.step_seconds)?;
        }
        Ok(())
    }

    /// Human-readable per-method table.
    pub fn write_table<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(
            w,
            "{:<8} {:>5} {:>8} {:>8} {:>14} {:>14} {:>10}",
            "method", "users", "mean_f1", "std_f1", "mean_step_s", "median_step_s", "total_s"
        )?;
        for a in &self.aggregates {
            writeln!(
                w,
                "{:<8} {:>5} {:>8.4} {:>8.4} {:>14.3e} {:>14.3e} {:>10.3}",
                a.method.to_string(),
                a.users,
                a.mean_f1,
                a.std_f1,
                a.mean_step_seconds,
                a.median_step_seconds,
                a.total_seconds
            )?;
        }
        Ok(())
    }
}

/// Called with `(user, timestamp, summary)` after every (re)summarization.
pub type PkgObserver<'a> = &'a (dyn Fn(usize, u64, &Pkg) -> Result<()> + Sync);

fn derive_seed(seed: u64, user: usize, t: u64) -> u64 {
    let mut x = seed ^ (user as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ t.wrapping_mul(0xD1B5_4A32_D192_ED03);
    x ^= x >> 31;
    x
}

fn run_user(
    kg: &KnowledgeGraph,
    user: usize,
    log: &QueryLog,
    method: EvalMethod,
    settings: &RunSettings,
    budget: usize,
    observer: Option<PkgObserver<'_>>,
) -> Result<(Vec<EvalRecord>, f64)> {
    let Some(t_max) = log.last_timestamp() else {
        return Ok((Vec::new(), 0.0));
    };
    let mut pipeline = match method.apex() {
        Some(m) => {
            let mut cfg = SummarizerConfig::new(budget, settings.params);
            cfg.r_apex = settings.r_apex;
            Some(Pipeline::new(m, cfg)?)
        }
        None => None,
    };
    let mut baseline_pkg = Pkg::default();
    let mut records = Vec::new();
    let mut total = 0.0;
    for t in 0..=t_max {
        let start = Instant::now();
        let updated = match pipeline.as_mut() {
            Some(p) => p.step(kg, log.at(t))?,
            None if t % settings.r_interval == 0 => {
                let prefix = log.prefix(t);
                baseline_pkg = if prefix.is_empty() {
                    Pkg::default()
                } else if method == EvalMethod::Glimpse {
                    let mut cfg = GlimpseConfig::new(budget, derive_seed(settings.seed, user, t));
                    cfg.alpha = settings.params.alpha;
                    cfg.epsilon = settings.glimpse_epsilon;
                    glimpse_summarize(kg, prefix, &cfg)?
                } else {
                    let mut cfg = PprConfig::new(budget);
                    cfg.restart = settings.restart;
                    ppr_summarize(kg, prefix, &cfg)?
                };
                true
            }
            None => false,
        };
        let elapsed = start.elapsed().as_secs_f64();
        total += elapsed;
        if !updated {
            continue;
        }
        let pkg = pipeline.as_ref().map_or(&baseline_pkg, |p| p.pkg());
        if let Some(obs) = observer {
            obs(user, t, pkg)?;
        }
        if t == t_max {
            continue;
        }
        let next = log.at(t + 1);
        if next.is_empty() {
            continue;
        }
        let mut sum = 0.0;
        for q in next {
            sum += f1(pkg, q, kg)?;
        }
        records.push(EvalRecord { method, user, timestamp: t, f1: sum / next.len() as f64, step_seconds: elapsed });
    }
    Ok((records, total))
}

fn check_settings(settings: &RunSettings) -> Result<()> {
    if settings.r_apex == 0 || settings.r_interval == 0 {
        return Err(Error::InvalidParam("update intervals must be >= 1".into()));
    }
    settings.params.validate()
}

/// Scores the summary built at each update timestamp `t` on the queries of
/// `t + 1`, which the summarizer has not seen yet.
pub fn autoregressive_run(
    kg: &KnowledgeGraph,
    logs: &[QueryLog],
    method: EvalMethod,
    settings: &RunSettings,
) -> Result<EvalReport> {
    autoregressive_run_observed(kg, logs, method, settings, None)
}

pub fn autoregressive_run_observed(
    kg: &KnowledgeGraph,
    logs: &[QueryLog],
    method: EvalMethod,
    settings: &RunSettings,
    observer: Option<PkgObserver<'_>>,
) -> Result<EvalReport> {
    check_settings(settings)?;
    let budget = settings.budget.resolve(kg)?;
    let per_user = |(user, log): (usize, &QueryLog)| run_user(kg, user, log, method, settings, budget, observer);
    let results: Vec<(Vec<EvalRecord>, f64)> = if settings.parallel {
        logs.par_iter().enumerate().map(per_user).collect::<Result<_>>()?
    } else {
        logs.iter().enumerate().map(per_user).collect::<Result<_>>()?
    };
    let mut records = Vec::new();
    let mut secs = Vec::new();
    for (user, (r, s)) in results.into_iter().enumerate() {
        records.extend(r);
        secs.push((method, user, s));
    }
    Ok(EvalReport::new(records, secs))
}

/// Runs several methods on the same workload and merges their reports.
pub fn run_methods(
    kg: &KnowledgeGraph,
    logs: &[QueryLog],
    methods: &[EvalMethod],
    settings: &RunSettings,
) -> Result<EvalReport> {
    let reports = methods.iter().map(|&m| autoregressive_run(kg, logs, m, settings)).collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::merge(reports))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Gamma,
    Kappa,
    Alpha,
    D,
    RApex,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "gamma" => Ok(SweepAxis::Gamma),
            "kappa" => Ok(SweepAxis::Kappa),
            "alpha" => Ok(SweepAxis::Alpha),
            "d" => Ok(SweepAxis::D),
            "r-apex" => Ok(SweepAxis::RApex),
            _ => Err(Error::InvalidParam(format!("unknown sweep axis {s:?}"))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Gamma => "gamma",
            SweepAxis::Kappa => "kappa",
            SweepAxis::Alpha => "alpha",
            SweepAxis::D => "d",
            SweepAxis::RApex => "r-apex",
        })
    }
}

fn as_count(axis: SweepAxis, v: f64, min: f64) -> Result<f64> {
    if v.fract() != 0.0 || v < min {
        return Err(Error::InvalidParam(format!("{axis} values must be integers >= {min}, got {v}")));
    }
    Ok(v)
}

/// Settings with `axis` set to `value`.
pub fn apply_axis(base: &RunSettings, axis: SweepAxis, value: f64) -> Result<RunSettings> {
    let mut s = *base;
    match axis {
        SweepAxis::Gamma => s.params.gamma = value,
        SweepAxis::Kappa => s.budget = Budget::Ratio(value),
        SweepAxis::Alpha => s.params.alpha = value,
        SweepAxis::D => s.params.d = as_count(axis, value, 0.0)? as usize,
        SweepAxis::RApex => s.r_apex = as_count(axis, value, 1.0)? as u64,
    }
    check_settings(&s)?;
    Ok(s)
}

/// One merged report per value; workload and seed are shared.
pub fn sweep(
    kg: &KnowledgeGraph,
    logs: &[QueryLog],
    methods: &[EvalMethod],
    axis: SweepAxis,
    values: &[f64],
    base: &RunSettings,
) -> Result<Vec<(f64, EvalReport)>> {
    if values.is_empty() {
        return Err(Error::InvalidParam("sweep needs at least one value".into()));
    }
    let settings = values.iter().map(|&v| apply_axis(base, axis, v).map(|s| (v, s))).collect::<Result<Vec<_>>>()?;
    settings.into_iter().map(|(v, s)| run_methods(kg, logs, methods, &s).map(|r| (v, r))).collect()
}
