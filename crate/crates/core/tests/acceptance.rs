//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Run with `cargo test -p biascal --test acceptance`.

mod support;

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use biascal::backend::{BackendConfig, LabelScores, MockBackend};
use biascal::calibration::{argmax, calibrated_argmax, mean_scores, Method};
use biascal::config::{GridValue, RunSpec, SweepAxis};
use biascal::harness::{evaluate, run_bias_scan, run_sensitivity};
use biascal::metrics::{bias_from_priors, macro_f1, stratify, tier_sizes, BiasScore};
use biascal::sampling::WordList;
use biascal::synthetic::{word_class, SyntheticSpec, SyntheticTask};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------
// Independent oracles. These re-derive expected values from first
// principles without calling into the library.

mod oracle {
    pub fn half_l1(a: &[f64], b: &[f64]) -> f64 {
        let mut d = 0.0;
        for i in 0..a.len() {
            d += if a[i] > b[i] {
                a[i] - b[i]
            } else {
                b[i] - a[i]
            };
        }
        d / 2.0
    }

    pub fn macro_f1(preds: &[usize], golds: &[usize], n_classes: usize) -> f64 {
        let mut confusion = vec![vec![0u32; n_classes]; n_classes];
        for (&p, &g) in preds.iter().zip(golds) {
            confusion[g][p] += 1;
        }
        let mut sum = 0.0;
        for (c, row) in confusion.iter().enumerate() {
            let tp = row[c];
            let predicted: u32 = confusion.iter().map(|r| r[c]).sum();
            let actual: u32 = row.iter().sum();
            if predicted + actual > 0 {
                sum += 2.0 * tp as f64 / (predicted + actual) as f64;
            }
        }
        sum / n_classes as f64
    }

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    fn binom(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    /// Probability of the offset-favored class for a text of `len` domain
    /// words, `n1` of them from that class: logit gap
    /// `offset + signal * (n1 - n0) / len`.
    pub fn p_favored(n1: u64, len: u64, signal: f64, offset: f64) -> f64 {
        let n0 = len - n1;
        sigmoid(offset + signal * (n1 as f64 - n0 as f64) / len as f64)
    }

    /// Expected in-domain prior of the favored class when every word of a
    /// random text is drawn from a bag that is exactly half each class.
    pub fn expected_id_prior(len: u64, signal: f64, offset: f64) -> f64 {
        (0..=len)
            .map(|n1| binom(len, n1) / 2f64.powi(len as i32) * p_favored(n1, len, signal, offset))
            .sum()
    }
}

/// Frozen result of `oracle::expected_id_prior(20, 1, ln 19) - 0.5`,
/// cross-checked with an independent script.
const ORACLE_BIAS_L20: f64 = 0.44892580219415235;

// ---------------------------------------------------------------------

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let simplex = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
        let raw: Vec<f64> = (0..n)
            .map(|_| -rng.random::<f64>().max(1e-300).ln())
            .collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(2..=8);
        let (a, b) = (simplex(&mut rng, n), simplex(&mut rng, n));
        worst = worst.max((bias_from_priors(&a, &b) - oracle::half_l1(&a, &b)).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;

    let zero = bias_from_priors(&[0.5, 0.5], &[0.5, 0.5]);
    let one = bias_from_priors(&[1.0, 0.0], &[0.0, 1.0]);
    let worked = bias_from_priors(&[0.5, 0.5], &[0.95, 0.05]);
    ensure(zero == 0.0 && one == 1.0, || format!("got {zero}, {one}"))?;
    // 0.95 and 0.05 are not representable, so 0.45 is met to the last bit
    // of the exact half-L1 arithmetic, one ulp from the literal
    ensure(
        worked == oracle::half_l1(&[0.5, 0.5], &[0.95, 0.05]),
        || format!("got {worked}"),
    )?;
    ensure((worked - 0.45).abs() <= f64::EPSILON, || {
        format!("got {worked}")
    })?;
    Ok(format!(
        "50 random pairs, max deviation {worst:.1e}; tagged 0 and 1 exact, 0.45 within 1 ulp"
    ))
}

fn probs(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-6f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn criterion_2() -> Outcome {
    const CASES: u32 = 1000;
    let run = |name: &str, f: &mut dyn FnMut(&mut TestRunner) -> Result<(), String>| {
        let mut runner = TestRunner::new(Config {
            cases: CASES,
            failure_persistence: None,
            ..Config::default()
        });
        f(&mut runner).map_err(|e| format!("{name}: {e}"))
    };

    run("uniform-prior identity", &mut |r| {
        r.run(&(probs(2..8), 1e-9f64..10.0), |(p, c)| {
            let prior = vec![c; p.len()];
            prop_assert_eq!(calibrated_argmax(&p, &prior).unwrap(), argmax(&p));
            Ok(())
        })
        .map_err(|e| e.to_string())
    })?;

    run("positive-scale invariance", &mut |r| {
        let strat = (2usize..8).prop_flat_map(|n| {
            (
                probs(n..n + 1),
                prop::collection::vec(1e-6f64..1.0, n),
                1e-3f64..1e3,
            )
        });
        r.run(&strat, |(p, q, c)| {
            let scaled: Vec<f64> = q.iter().map(|x| x * c).collect();
            prop_assert_eq!(
                calibrated_argmax(&p, &q).unwrap(),
                calibrated_argmax(&p, &scaled).unwrap()
            );
            Ok(())
        })
        .map_err(|e| e.to_string())
    })?;

    run("batch-mean linearity", &mut |r| {
        let strat = (2usize..6).prop_flat_map(|n| {
            (
                prop::collection::vec(probs(n..n + 1), 1..12),
                prop::collection::vec(probs(n..n + 1), 1..12),
            )
        });
        r.run(&strat, |(a, b)| {
            let to_scores = |v: &[Vec<f64>]| -> Vec<LabelScores> {
                v.iter()
                    .map(|p| LabelScores::from_probs(p.clone()).unwrap())
                    .collect()
            };
            let (sa, sb) = (to_scores(&a), to_scores(&b));
            let all: Vec<LabelScores> = sa.iter().chain(&sb).cloned().collect();
            let (ma, mb, mall) = (
                mean_scores(&sa).unwrap(),
                mean_scores(&sb).unwrap(),
                mean_scores(&all).unwrap(),
            );
            let (na, nb) = (sa.len() as f64, sb.len() as f64);
            for y in 0..ma.len() {
                let combined = (na * ma[y] + nb * mb[y]) / (na + nb);
                prop_assert!((mall[y] - combined).abs() < 1e-12);
                let naive = all.iter().map(|s| s.probs()[y]).sum::<f64>() / (na + nb);
                prop_assert!((mall[y] - naive).abs() < 1e-12);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    })?;
    Ok(format!("3 properties x {CASES} cases"))
}

fn criterion_3() -> Outcome {
    fn sequences(len: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|s| {
                    (0..k).map(move |c| {
                        let mut t = s.clone();
                        t.push(c);
                        t
                    })
                })
                .collect();
        }
        out
    }
    let mut checked = 0u64;
    for k in 1..=3 {
        for len in 0..=6 {
            let seqs = sequences(len, k);
            for p in &seqs {
                for g in &seqs {
                    let got = macro_f1(p, g, k).map_err(|e| e.to_string())?;
                    let want = oracle::macro_f1(p, g, k);
                    ensure((got - want).abs() <= 1e-15, || {
                        format!("{p:?} vs {g:?}: {got} != {want}")
                    })?;
                    checked += 1;
                }
            }
        }
    }
    let third = macro_f1(&[0, 0, 0, 0], &[0, 1, 0, 1], 2).unwrap();
    let two_thirds = macro_f1(&[0, 1, 1, 0], &[0, 1, 1, 0], 3).unwrap();
    ensure(third == 1.0 / 3.0 && two_thirds == 2.0 / 3.0, || {
        format!("tagged: {third}, {two_thirds}")
    })?;
    Ok(format!(
        "{checked} (preds, golds) pairs agree; tagged 1/3 and 2/3 exact"
    ))
}

fn oracle_spec(task: &SyntheticTask, methods: Vec<Method>, seeds: Vec<u64>) -> RunSpec {
    let mut spec = RunSpec::new(vec![task.dataset.id.clone()], BackendConfig::default());
    spec.k = 0;
    spec.methods = methods;
    spec.seeds = seeds;
    spec.m_samples = 20;
    spec.with_bias = false;
    spec
}

fn criterion_4() -> Outcome {
    let syn = SyntheticSpec::default();
    let task = syn.build();
    let words = WordList::bundled();

    // oracle, before looking at the library's numbers
    let expected_bias =
        oracle::expected_id_prior(syn.text_len as u64, syn.signal, syn.offset) - 0.5;
    ensure((expected_bias - ORACLE_BIAS_L20).abs() < 1e-12, || {
        format!("oracle drifted: {expected_bias}")
    })?;
    let len = syn.text_len as u64;
    // real texts are pure, so their favored-class probability is one of two values
    let real = [
        oracle::p_favored(0, len, syn.signal, syn.offset),
        oracle::p_favored(len, len, syn.signal, syn.offset),
    ];
    ensure(real.iter().all(|&p| p > 0.5), || {
        "oracle: uncalibrated should favor the offset class".into()
    })?;
    // every random in-domain text lies between the two real texts, so any
    // mean of them strictly separates the classes unless all M samples sit
    // at an extreme (probability 2^-399 at M=20)
    let lo = (0..=len)
        .map(|n| oracle::p_favored(n, len, syn.signal, syn.offset))
        .fold(1.0, f64::min);
    let hi = (0..=len)
        .map(|n| oracle::p_favored(n, len, syn.signal, syn.offset))
        .fold(0.0, f64::max);
    ensure(lo == real[0] && hi == real[1], || {
        "oracle: prior range".into()
    })?;
    let vocab: BTreeSet<String> = task.table.assoc.keys().cloned().collect();
    let english: Vec<String> = include_str!("../data/english_words.txt")
        .lines()
        .map(str::to_string)
        .collect();
    ensure(
        english
            .iter()
            .all(|w| !vocab.contains(w) && word_class(w).is_none()),
        || "English list overlaps the domain vocabulary".into(),
    )?;

    let backend = MockBackend::new("mock-oracle", task.table.clone()).unwrap();
    let b: std::sync::Arc<dyn biascal::Backend> = std::sync::Arc::new(backend.clone());
    let scan = run_bias_scan(std::slice::from_ref(&task.dataset), &[b], &words, 20, 0);
    let bias = scan.scores.first().ok_or("bias scan failed")?.value;
    ensure((bias - 0.45).abs() <= 0.02, || format!("(a) bias {bias}"))?;
    ensure((bias - expected_bias).abs() <= 0.01, || {
        format!("(a) bias {bias} far from oracle {expected_bias}")
    })?;

    let spec = oracle_spec(
        &task,
        vec![Method::None, Method::DcInDomain, Method::DcEnglish],
        (1..=5).collect(),
    );
    let report = evaluate(&spec, std::slice::from_ref(&task.dataset), &backend, &words);
    ensure(report.errors.is_empty(), || format!("{:?}", report.errors))?;
    let id = &task.dataset.id;
    let mut worst = [f64::MAX, 0.0, f64::MAX, 0.0, 0.0];
    for seed in 1..=5 {
        let none = report.cell(id, Method::None, seed).unwrap();
        let dc = report.cell(id, Method::DcInDomain, seed).unwrap();
        let eng = report.cell(id, Method::DcEnglish, seed).unwrap();
        let frac = |c: &biascal::harness::CellReport| c.distribution.fractions.clone().unwrap();
        worst[0] = worst[0].min(frac(none)[syn.favored]);
        worst[1] = f64::max(worst[1], none.macro_f1);
        worst[2] = worst[2].min(dc.macro_f1);
        worst[3] = f64::max(
            worst[3],
            frac(dc).iter().map(|f| (f - 0.5).abs()).fold(0.0, f64::max),
        );
        worst[4] = f64::max(worst[4], eng.macro_f1);
    }
    ensure(worst[0] >= 0.9 && worst[1] <= 0.45, || {
        format!("(b) favored share {} / F1 {}", worst[0], worst[1])
    })?;
    ensure(worst[2] >= 0.95 && worst[3] <= 0.1, || {
        format!("(c) F1 {} / imbalance {}", worst[2], worst[3])
    })?;
    ensure(worst[4] <= 0.55, || format!("(d) F1 {}", worst[4]))?;
    // the oracle predicts the exact values
    ensure(
        worst[1] == 1.0 / 3.0 && worst[2] == 1.0 && worst[4] == 1.0 / 3.0,
        || format!("library disagrees with oracle: {worst:?}"),
    )?;
    Ok(format!(
        "(a) bias {bias:.4} (oracle {expected_bias:.4}); (b) {:.0}% favored, F1 {:.3}; (c) F1 {:.3}; (d) F1 {:.3}",
        worst[0] * 100.0,
        worst[1],
        worst[2],
        worst[4]
    ))
}

fn criterion_5() -> Outcome {
    let words = WordList::bundled();
    let seeds: Vec<u64> = (1..=60).collect();
    let mut detail = Vec::new();

    let variants = [
        ("oracle corpus", SyntheticSpec::default()),
        (
            "short noisy texts",
            SyntheticSpec {
                text_len: 4,
                purity: 0.8,
                ..SyntheticSpec::default()
            },
        ),
    ];
    for (name, syn) in variants {
        let task = syn.build();
        let backend = MockBackend::new("mock-oracle", task.table.clone()).unwrap();
        let spec = oracle_spec(&task, vec![Method::DcInDomain], seeds.clone());
        let grid = [GridValue::Count(1), GridValue::Count(20)];
        let t = run_sensitivity(
            &spec,
            &task.dataset,
            &backend,
            &words,
            SweepAxis::MSamples,
            &grid,
            &seeds,
        )
        .map_err(|e| e.to_string())?;
        let (s1, s20) = (t.points[0].std_f1, t.points[1].std_f1);
        ensure(s20 <= s1, || {
            format!("{name}: std at M=20 {s20} > M=1 {s1}")
        })?;
        detail.push(format!("{name} F1 std M=1 {s1:.4}, M=20 {s20:.4}"));
    }

    let task = SyntheticSpec::default().build();
    let backend = MockBackend::new("mock-oracle", task.table.clone()).unwrap();
    let spec = oracle_spec(&task, vec![Method::DcInDomain], seeds.clone());
    let grid = [GridValue::Count(10), GridValue::Count(50), GridValue::Full];
    let t = run_sensitivity(
        &spec,
        &task.dataset,
        &backend,
        &words,
        SweepAxis::CorpusSize,
        &grid,
        &seeds,
    )
    .map_err(|e| e.to_string())?;
    let v: Vec<f64> = t.points.iter().map(|p| p.mean_prior_var()).collect();
    ensure(v[0] >= v[1] && v[1] >= v[2], || {
        format!("prior variance not monotone: {v:?}")
    })?;
    detail.push(format!(
        "prior var 10/50/full {:.2e} / {:.2e} / {:.2e}",
        v[0], v[1], v[2]
    ));
    Ok(format!("{} replicates; {}", seeds.len(), detail.join("; ")))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_biascal"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!(
            "{args:?} exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    SyntheticSpec::default()
        .build()
        .write_to(dir.path(), "mock-biased")
        .map_err(|e| e.to_string())?;
    let run = dir.path().join("run.toml");
    fs::write(
        &run,
        "datasets = [\"synthetic_hate\"]\ndata_dir = \".\"\nk = 4\nseeds = [1, 2, 3]\n\
         [backend]\nkind = \"mock\"\nmock_tables = [\"synthetic_hate.mock.json\"]\n",
    )
    .map_err(|e| e.to_string())?;
    let run = run.to_str().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_cli(&[
        "eval",
        "--config",
        run,
        "--backend",
        "mock",
        "--out-dir",
        a.to_str().unwrap(),
        "-q",
    ])?;
    run_cli(&[
        "eval",
        "--config",
        run,
        "--backend",
        "mock",
        "--out-dir",
        b.to_str().unwrap(),
        "-q",
    ])?;
    let mut bytes = 0;
    for f in [
        "examples.jsonl",
        "aggregates.csv",
        "summary.json",
        "bias.csv",
    ] {
        let (x, y) = (
            fs::read(a.join(f)).map_err(|e| e.to_string())?,
            fs::read(b.join(f)).map_err(|e| e.to_string())?,
        );
        ensure(x == y, || format!("{f} differs between runs"))?;
        bytes += x.len();
    }
    Ok(format!(
        "4 report files, {bytes} bytes, identical across two runs"
    ))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let score = |i: usize, v: f64| BiasScore {
        value: v,
        dataset_id: format!("d{i:02}"),
        model_id: "m".into(),
        length: 1,
        n_samples: 1,
        p_eng: vec![],
        p_id: vec![],
    };
    let scores: Vec<BiasScore> = (0..24).map(|i| score(i, rng.random::<f64>())).collect();
    let t = stratify(&scores);
    let sizes = [t.small.len(), t.medium.len(), t.large.len()];
    ensure(sizes == [8, 8, 8], || format!("sizes {sizes:?}"))?;
    let max = |v: &[BiasScore]| v.iter().map(|s| s.value).fold(f64::MIN, f64::max);
    let min = |v: &[BiasScore]| v.iter().map(|s| s.value).fold(f64::MAX, f64::min);
    ensure(
        max(&t.small) <= min(&t.medium) && max(&t.medium) <= min(&t.large),
        || "tiers not monotone".into(),
    )?;
    let ids: BTreeSet<&str> = [&t.small, &t.medium, &t.large]
        .iter()
        .flat_map(|v| v.iter().map(|s| s.dataset_id.as_str()))
        .collect();
    ensure(ids.len() == 24, || "not a partition".into())?;

    for (n, want) in [(4, [1, 1, 2]), (5, [1, 2, 2])] {
        let t = stratify(&scores[..n]);
        let got = [t.small.len(), t.medium.len(), t.large.len()];
        ensure(got == want && tier_sizes(n) == want, || {
            format!("n={n}: {got:?}")
        })?;
    }
    let tied: Vec<BiasScore> = (0..24).rev().map(|i| score(i, 0.3)).collect();
    let t = stratify(&tied);
    ensure(
        t.small[0].dataset_id == "d00" && t.large[7].dataset_id == "d23",
        || "tie order".into(),
    )?;
    Ok("24 -> 8/8/8 monotone; 4 -> 1/1/2; 5 -> 1/2/2; ties by id".into())
}

fn criterion_8() -> Outcome {
    let external = std::env::var("BIASCAL_ENDPOINT")
        .ok()
        .zip(std::env::var("BIASCAL_MODEL").ok());
    let stub = external.is_none().then(support::StubServer::start);
    let (endpoint, model) = match (&external, &stub) {
        (Some((e, m)), _) => (e.clone(), m.clone()),
        (None, Some(s)) => (s.url.clone(), "stub-model".to_string()),
        _ => unreachable!(),
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    support::materialize_bundled(d, "sst2", 80, 24);
    let cache = d.join("cache");
    let args = |out: &Path, endpoint: &str| -> Vec<String> {
        [
            "eval",
            "--datasets",
            "sst2",
            "--data-dir",
            d.to_str().unwrap(),
            "--backend",
            "remote",
            "--endpoint",
            endpoint,
            "--model",
            &model,
            "--k",
            "8",
            "--seeds",
            "1,2",
            "--eval-cap",
            "50",
            "--methods",
            "none,cc,dc-eng,dc-id",
            "--cache-dir",
            cache.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
            "-q",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    };
    let call = |a: Vec<String>| run_cli(&a.iter().map(String::as_str).collect::<Vec<_>>());

    call(args(&d.join("first"), &endpoint))?;
    let after_first = stub.as_ref().map(|s| s.requests());
    let entries = biascal::backend::CacheStats::collect(&cache)
        .map_err(|e| e.to_string())?
        .entries;
    // 2 seeds x 50 examples, plus 1 + 20 + 20 prior prompts per seed, plus 40 bias prompts
    let expected_prompts = 2 * (50 + 1 + 20 + 20) + 40;
    ensure(entries == expected_prompts, || {
        format!("{entries} cache entries, expected {expected_prompts}")
    })?;

    call(args(&d.join("second"), &endpoint))?;
    if let (Some(s), Some(first)) = (&stub, after_first) {
        ensure(s.requests() == first, || {
            format!("second run issued {} requests", s.requests() - first)
        })?;
    }
    // and with the endpoint unreachable, every score still comes from disk
    call(args(&d.join("offline"), "http://127.0.0.1:9"))?;
    for f in ["examples.jsonl", "aggregates.csv"] {
        let a = fs::read(d.join("first").join(f)).map_err(|e| e.to_string())?;
        let b = fs::read(d.join("second").join(f)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{f} changed on the cached run"))?;
    }
    let target = if external.is_some() {
        endpoint
    } else {
        "local completions stub".into()
    };
    Ok(format!(
        "{target}: first run {} requests, {entries} cached prompts; second run 0 requests",
        after_first.map_or("?".into(), |n| n.to_string())
    ))
}

fn main() -> ExitCode {
    let checks: [Check; 8] = [
        ("bias metric oracle", criterion_1),
        ("prediction-rule invariants", criterion_2),
        ("macro-F1 exhaustive oracle", criterion_3),
        ("synthetic domain-label bias reproduction", criterion_4),
        ("sensitivity shape", criterion_5),
        ("CLI determinism", criterion_6),
        ("stratification", criterion_7),
        ("remote endpoint caching", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail} ({secs:.2}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {why} ({secs:.2}s)", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        checks.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
