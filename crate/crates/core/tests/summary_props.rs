mod common;

use std::collections::BTreeSet;

use pkgsum_core::baselines::{
    glimpse_summarize, ppr_scores, ppr_summarize, GlimpseConfig, GlimpsePreferences, PprConfig,
};
use pkgsum_core::eval::{autoregressive_run, f1, Budget, EvalMethod, RunSettings};
use pkgsum_core::query::q_vector_sum;
use pkgsum_core::{
    Apex2Pipeline, Apex2nPipeline, DiffusionParams, EntityId, KnowledgeGraph, Pkg, SparseVec, SummarizerConfig,
    TripleId,
};
use proptest::prelude::*;

use common::{random_kg, random_log, rng};

/// Triples whose endpoints both lie in `set`.
fn induced(kg: &KnowledgeGraph, set: &BTreeSet<EntityId>) -> Vec<TripleId> {
    (0..kg.triple_count() as u32)
        .map(TripleId)
        .filter(|&t| set.contains(&kg.triple(t).head) && set.contains(&kg.triple(t).tail))
        .collect()
}

/// Grows entity prefixes of `ranked` until the induced subgraph would exceed `budget`.
fn greedy_oracle(kg: &KnowledgeGraph, ranked: &[EntityId], budget: usize) -> Pkg {
    let mut set = BTreeSet::new();
    let mut best = Vec::new();
    for &e in ranked {
        set.insert(e);
        let tri = induced(kg, &set);
        if tri.len() > budget {
            break;
        }
        best = tri;
    }
    Pkg::from_triples(kg, best)
}

/// Solves `x = c v + (1 - c) (P x + (dangling mass) v)` by Gaussian elimination.
fn ppr_dense(kg: &KnowledgeGraph, v: &[f64], c: f64) -> Vec<f64> {
    let n = kg.entity_count();
    let mut m = vec![vec![0.0; n + 1]; n];
    for (j, row) in m.iter_mut().enumerate() {
        row[j] = 1.0;
        row[n] = c * v[j];
    }
    for i in 0..n {
        let nb = kg.neighbors(EntityId(i as u32)).unwrap();
        if nb.is_empty() {
            for (j, row) in m.iter_mut().enumerate() {
                row[i] -= (1.0 - c) * v[j];
            }
        } else {
            for u in nb {
                m[u.index()][i] -= (1.0 - c) / nb.len() as f64;
            }
        }
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    let pivot = m[col].clone();
                    for (x, p) in m[r][col..].iter_mut().zip(&pivot[col..]) {
                        *x -= f * p;
                    }
                }
            }
        }
    }
    (0..n).map(|i| m[i][n] / m[i][i]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn apex2n_matches_brute_force_greedy(seed in any::<u64>(), budget in 1usize..30) {
        let mut r = rng(seed);
        let kg = random_kg(&mut r, 60, 150, 3);
        let log = random_log(&mut r, &kg, 8, 2);
        let mut p = Apex2nPipeline::new(SummarizerConfig::new(budget, DiffusionParams::default())).unwrap();
        for t in 0..8 {
            p.step(&kg, log.at(t)).unwrap();
            let mut ranked: Vec<(f64, EntityId)> = p.state().entity_heat().iter().map(|(e, v)| (v, e)).collect();
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let ranked: Vec<EntityId> = ranked.into_iter().map(|e| e.1).collect();
            prop_assert_eq!(p.pkg(), &greedy_oracle(&kg, &ranked, budget));
            prop_assert!(p.pkg().len() <= budget);
        }
    }

    #[test]
    fn apex2_summary_is_budgeted_top_heat(seed in any::<u64>(), budget in 1usize..30) {
        let mut r = rng(seed);
        let kg = random_kg(&mut r, 60, 150, 3);
        let log = random_log(&mut r, &kg, 8, 2);
        let mut p = Apex2Pipeline::new(SummarizerConfig::new(budget, DiffusionParams::default())).unwrap();
        for t in 0..8 {
            p.step(&kg, log.at(t)).unwrap();
            let pkg = p.pkg();
            prop_assert!(pkg.len() <= budget);
            let floor = pkg.triples().iter().map(|&t| p.state().triple_heat_by_id(t)).fold(f64::INFINITY, f64::min);
            for (t, v) in p.state().triple_heats().iter() {
                if pkg.triples().binary_search(&t).is_err() {
                    prop_assert!(v <= floor);
                }
            }
        }
    }

    #[test]
    fn ppr_matches_linear_solve(seed in any::<u64>(), restart in 0.05f64..0.95) {
        let mut r = rng(seed);
        let kg = random_kg(&mut r, 40, 80, 2);
        let log = random_log(&mut r, &kg, 3, 2);
        let q = q_vector_sum(log.queries());
        prop_assume!(q.sum() > 0.0);
        let mut cfg = PprConfig::new(10);
        cfg.restart = restart;
        let got = ppr_scores(&kg, &q, &cfg).unwrap();
        let v: Vec<f64> = q.to_dense(kg.entity_count()).iter().map(|x| x / q.sum()).collect();
        let want = ppr_dense(&kg, &v, restart);
        prop_assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!(*g >= 0.0);
            prop_assert!((g - w).abs() < 1e-8, "{g} vs {w}");
        }
        let pkg = ppr_summarize(&kg, log.queries(), &cfg).unwrap();
        prop_assert!(pkg.len() <= 10);
    }

    #[test]
    fn glimpse_exhaustive_sampling_is_exact_greedy(seed in any::<u64>(), budget in 1usize..20) {
        let mut r = rng(seed);
        let kg = random_kg(&mut r, 40, 100, 3);
        let log = random_log(&mut r, &kg, 5, 2);
        let mut cfg = GlimpseConfig::new(budget, seed);
        // ln(1/epsilon) exceeds any budget here, so every round scans all candidates.
        cfg.epsilon = 1e-300;
        let got = glimpse_summarize(&kg, log.queries(), &cfg).unwrap();

        let prefs = GlimpsePreferences::infer(&kg, log.queries(), cfg.alpha);
        let utility = |picked: &[TripleId]| -> f64 {
            let ents: BTreeSet<EntityId> = picked.iter().flat_map(|&t| [kg.triple(t).head, kg.triple(t).tail]).collect();
            picked.iter().map(|&t| prefs.triple_pref(&kg, t).ln_1p()).sum::<f64>()
                + ents.iter().map(|&e| prefs.entity_pref(e).ln_1p()).sum::<f64>()
        };
        let candidates: Vec<TripleId> = (0..kg.triple_count() as u32)
            .map(TripleId)
            .filter(|&t| prefs.entity_pref(kg.triple(t).head) > 0.0 || prefs.entity_pref(kg.triple(t).tail) > 0.0)
            .collect();
        let mut picked: Vec<TripleId> = Vec::new();
        let mut covered = rustc_hash::FxHashSet::default();
        while picked.len() < budget {
            let base = utility(&picked);
            let mut best: Option<(f64, TripleId)> = None;
            for &t in candidates.iter().filter(|t| !picked.contains(t)) {
                let gain = prefs.marginal(&kg, t, &covered);
                let mut with = picked.clone();
                with.push(t);
                let direct = utility(&with) - base;
                prop_assert!((gain - direct).abs() <= 1e-12 * base.max(1.0), "{gain} vs {direct}");
                if gain > 0.0 && best.map_or(true, |(g, _)| gain > g) {
                    best = Some((gain, t));
                }
            }
            let Some((_, t)) = best else { break };
            covered.insert(kg.triple(t).head);
            covered.insert(kg.triple(t).tail);
            picked.push(t);
        }
        prop_assert_eq!(got, Pkg::from_triples(&kg, picked));
    }

    #[test]
    fn f1_matches_set_definition(seed in any::<u64>(), keep in prop::collection::vec(any::<bool>(), 150)) {
        let mut r = rng(seed);
        let kg = random_kg(&mut r, 30, 150, 2);
        let log = random_log(&mut r, &kg, 4, 3);
        let pkg = Pkg::from_triples(&kg, (0..kg.triple_count()).filter(|&i| keep[i]).map(|i| TripleId(i as u32)));
        for q in log.queries() {
            let truth: BTreeSet<EntityId> = q.answers.iter().copied().collect();
            let got: BTreeSet<EntityId> = pkg
                .triples()
                .iter()
                .map(|&t| kg.triple(t))
                .filter(|t| t.head == q.head && t.relation == q.relation)
                .map(|t| t.tail)
                .collect();
            let tp = got.intersection(&truth).count() as f64;
            let want = if tp == 0.0 { 0.0 } else { 2.0 * tp / (got.len() + truth.len()) as f64 };
            let score = f1(&pkg, q, &kg).unwrap();
            prop_assert!((score - want).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&score));
        }
    }

    #[test]
    fn every_method_respects_budget(seed in any::<u64>(), budget in 1usize..15) {
        let mut r = rng(seed);
        let kg = random_kg(&mut r, 50, 120, 3);
        let logs = vec![random_log(&mut r, &kg, 12, 2), random_log(&mut r, &kg, 12, 1)];
        let settings = RunSettings { budget: Budget::Fixed(budget), parallel: false, seed, ..Default::default() };
        for m in EvalMethod::ALL {
            let check = |_: usize, _: u64, pkg: &Pkg| -> pkgsum_core::Result<()> {
                assert!(pkg.len() <= budget, "{m}: {} > {budget}", pkg.len());
                Ok(())
            };
            let report = pkgsum_core::eval::autoregressive_run_observed(&kg, &logs, m, &settings, Some(&check)).unwrap();
            for rec in report.records() {
                prop_assert!((0.0..=1.0).contains(&rec.f1));
            }
        }
    }
}

#[test]
fn aggregates_recompute_exactly() {
    let mut r = rng(3);
    let kg = random_kg(&mut r, 80, 300, 4);
    let logs: Vec<_> = (0..4).map(|_| random_log(&mut r, &kg, 30, 2)).collect();
    let settings = RunSettings { budget: Budget::Fixed(12), ..Default::default() };
    for m in EvalMethod::ALL {
        let report = autoregressive_run(&kg, &logs, m, &settings).unwrap();
        for (a, b) in report.aggregates().iter().zip(report.recomputed_aggregates()) {
            assert!((a.mean_f1 - b.mean_f1).abs() <= 1e-12);
            assert!((a.std_f1 - b.std_f1).abs() <= 1e-12);
        }
        let again = autoregressive_run(&kg, &logs, m, &settings).unwrap();
        let f1s = |r: &pkgsum_core::eval::EvalReport| r.records().iter().map(|x| x.f1).collect::<Vec<_>>();
        assert_eq!(f1s(&report), f1s(&again), "{m} not deterministic");
    }
}

#[test]
fn ppr_empty_personalization_errors() {
    let kg = KnowledgeGraph::from_labeled([("a", "r", "b")]).unwrap();
    assert!(ppr_scores(&kg, &SparseVec::new(), &PprConfig::new(1)).is_err());
}
