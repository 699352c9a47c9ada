//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints one PASS/FAIL line; exits non-zero if any fail.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_program, replay, test_limits};
use sigdetect::bundled::{controller_v1, missions};
use sigdetect::corpus::{
    build_corpus, class_counts, load_corpus, Corpus, CorpusConfig, Label, Provenance,
};
use sigdetect::instrument::{
    collect, measure_overhead, InstrumentationMode, Signal, TraceRecorder,
};
use sigdetect::learn::{
    cross_version_eval, early_detection_sweep, fold_plans, gini, kfold, reduced_feature_eval,
    DecisionTree, Metrics,
};
use sigdetect::robosim::{
    delay_lab, intercept_grid, intercepts, run_mission, DelayConfig, MissionConfig, World,
    WorldConfig, TOPIC_CMD_VEL,
};
use sigdetect::time::SimTime;
use sigdetect::vm::{run, PortIo, ScriptedIo};

const SEED: u64 = 1;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fixture(version: &str) -> Corpus {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join(format!("../../fixtures/corpus/{version}"));
    load_corpus(&root).expect("shipped corpus loads")
}

fn pipeline_replication() -> Outcome {
    let start = Instant::now();
    let shipped = fixture("v1");
    let config = CorpusConfig {
        interval: shipped.meta.config.interval,
        ..CorpusConfig::default()
    };
    let corpus = build_corpus(&controller_v1(), &missions(), &config).map_err(|e| e.to_string())?;
    if corpus.records != shipped.records {
        return Err("regenerated corpus differs from the shipped one".into());
    }
    let ds = corpus.dataset().map_err(|e| e.to_string())?;
    let (pass, fail) = ds.class_counts();
    let balanced = 2 * pass.max(fail);
    let report = kfold(&ds, SEED, None).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let m = report.mean;
    check(
        m.f >= 0.85
            && m.prec >= 0.90
            && balanced >= 400
            && corpus.meta.mutants >= 200
            && corpus.meta.missions.len() == 3
            && report.k == 10
            && secs <= 600.0,
        format!(
            "F={:.3} prec={:.3} rec={:.3} acc={:.3}; {} mutants x {} missions, {} balanced examples, {:.1}s",
            m.f,
            m.prec,
            m.rec,
            m.acc,
            corpus.meta.mutants,
            corpus.meta.missions.len(),
            balanced,
            secs
        ),
    )
}

fn metric_arithmetic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let div = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    for i in 0..50 {
        let bound = if i < 5 { 2 } else { 1000 };
        let (tp, fp, tn, fn_) = (
            rng.random_range(0..bound),
            rng.random_range(0..bound),
            rng.random_range(0..bound),
            rng.random_range(0..bound),
        );
        let m = Metrics::from_counts(tp, fp, tn, fn_);
        let prec = div(tp, tp + fp);
        let rec = div(tp, tp + fn_);
        let f = if prec + rec == 0.0 {
            0.0
        } else {
            2.0 * prec * rec / (prec + rec)
        };
        let want = (div(tp + tn, tp + fp + tn + fn_), prec, rec, f);
        if (m.acc, m.prec, m.rec, m.f) != want {
            return Err(format!("({tp},{fp},{tn},{fn_}): {m:?} vs {want:?}"));
        }
    }
    Ok("50 tuples exact".into())
}

fn separable(pts: &[(i64, i64)], y: &[bool]) -> bool {
    let mut dirs = Vec::new();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let (dx, dy) = (pts[j].0 - pts[i].0, pts[j].1 - pts[i].1);
            dirs.extend([(dx, dy), (-dy, dx), (-dx, -dy), (dy, -dx)]);
        }
    }
    dirs.into_iter().filter(|&d| d != (0, 0)).any(|(a, b)| {
        let proj = |k: usize| a * pts[k].0 + b * pts[k].1;
        let hi = (0..pts.len()).filter(|&k| !y[k]).map(proj).max();
        let lo = (0..pts.len()).filter(|&k| y[k]).map(proj).min();
        matches!((hi, lo), (Some(h), Some(l)) if h < l)
    })
}

fn tree_correctness() -> Outcome {
    if gini(5, 5) != 0.5 || gini(10, 0) != 0.0 {
        return Err("gini values".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut sets = 0;
    while sets < 100 {
        let n = rng.random_range(2..=20);
        let pts: Vec<(i64, i64)> = (0..n)
            .map(|_| (rng.random_range(-10..10), rng.random_range(-10..10)))
            .collect();
        let y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let (a, b, c) = (rng.random_range(-4..=4), rng.random_range(-4..=4), rng.random_range(-8..=8));
        let y: Vec<bool> = if rng.random_bool(0.5) {
            y
        } else {
            pts.iter().map(|p| a * p.0 + b * p.1 > c).collect()
        };
        if y.iter().all(|&v| v) || !y.iter().any(|&v| v) || !separable(&pts, &y) {
            continue;
        }
        sets += 1;
        let x: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| {
                let mut r = vec![0.0; 26];
                r[0] = p.0 as f64;
                r[1] = p.1 as f64;
                r
            })
            .collect();
        let labels: Vec<Label> = y.iter().map(|&v| if v { Label::Fail } else { Label::Pass }).collect();
        let tree = DecisionTree::fit_matrix(&x, &labels, None).map_err(|e| e.to_string())?;
        let acc = Metrics::from_predictions(&labels, &tree.predict_batch(&x).unwrap()).acc;
        if acc != 1.0 {
            return Err(format!("training accuracy {acc} on {pts:?}"));
        }
        let total: f64 = tree.importances.iter().sum();
        if tree.split_count() >= 1 && (total - 1.0).abs() > 1e-9 {
            return Err(format!("importances sum to {total}"));
        }
    }
    Ok("100 separable sets fit exactly; gini exact; importances sum to 1".into())
}

fn mode_equivalence() -> Outcome {
    for seed in 0..200 {
        let program = random_program(10_000 + seed);
        let mut rec = TraceRecorder::default();
        run(&program, &mut ScriptedIo::new(seed), &test_limits(), &mut rec).unwrap();
        let (_, expected) = replay(&rec.events, 16);
        let mut finals = Vec::new();
        for mode in [InstrumentationMode::NaivePerInstruction, InstrumentationMode::Optimized] {
            let c = collect(&program, &mut ScriptedIo::new(seed), &test_limits(), mode, 16)
                .map_err(|e| e.to_string())?;
            finals.push(c.stream.final_summary);
        }
        if finals[0] != finals[1] {
            return Err(format!("program {seed}: naive and optimized differ"));
        }
        if finals[0] != expected {
            return Err(format!("program {seed}: trace replay differs"));
        }
    }
    Ok("200 programs: naive == optimized == replay".into())
}

fn overhead_ordering() -> Outcome {
    let program = controller_v1();
    let mission = missions().remove(0);
    let world = WorldConfig::default();
    let r = measure_overhead(
        &program,
        || -> Box<dyn PortIo> { Box::new(World::new(&mission, 0, world)) },
        &world.limits,
        11,
    )
    .map_err(|e| e.to_string())?;
    check(
        r.optimized_hooks < r.naive_hooks && r.optimized_s <= r.naive_s,
        format!(
            "hooks {} < {}; median wall {:.6}s <= {:.6}s (none {:.6}s)",
            r.optimized_hooks, r.naive_hooks, r.optimized_s, r.naive_s, r.none_s
        ),
    )
}

fn stream_contract() -> Outcome {
    let corpus = fixture("v1");
    for (id, stream) in &corpus.streams {
        let mut prev: Option<&sigdetect::instrument::SignalSummary> = None;
        for s in stream.entries.iter().map(|e| &e.summary).chain([&stream.final_summary]) {
            if let Some(p) = prev {
                for sig in Signal::ALL.iter().filter(|s| s.is_count()) {
                    if s[*sig] < p[*sig] {
                        return Err(format!("{id}: {} decreased", sig.name()));
                    }
                }
            }
            prev = Some(s);
        }
    }
    let sweep = early_detection_sweep(&corpus, SEED).map_err(|e| e.to_string())?;
    let rq1 = kfold(&corpus.dataset().unwrap(), SEED, None).map_err(|e| e.to_string())?;
    let last = sweep.rows.last().unwrap();
    let scored: Vec<String> = sweep
        .rows
        .iter()
        .filter_map(|r| r.report.as_ref().map(|rep| format!("{}:{:.2}", r.point, rep.mean.f)))
        .collect();
    check(
        last.report.as_ref() == Some(&rq1),
        format!(
            "{} streams monotone; {} sweep rows, final equals full run (F per point {})",
            corpus.streams.len(),
            sweep.rows.len(),
            scored.join(" ")
        ),
    )
}

fn balancing_and_hygiene() -> Outcome {
    let ds = fixture("v1").dataset().unwrap();
    let plans = fold_plans(&ds, SEED).map_err(|e| e.to_string())?;
    for (i, p) in plans.iter().enumerate() {
        let (tp, tf) = class_counts(&p.train);
        let (sp, sf) = class_counts(&p.test);
        if tp != tf || (p.test_balanced && sp != sf) {
            return Err(format!("fold {i}: train {tp}/{tf} test {sp}/{sf}"));
        }
        let train: std::collections::BTreeSet<&Provenance> =
            p.train.iter().map(|e| &e.provenance).collect();
        if p.test.iter().any(|e| train.contains(&e.provenance)) {
            return Err(format!("fold {i}: execution in both train and test"));
        }
    }
    let unbalanced = plans.iter().filter(|p| !p.test_balanced).count();
    check(
        unbalanced == 0,
        format!("{} folds balanced, disjoint by provenance", plans.len()),
    )
}

fn delay_lab_properties() -> Outcome {
    let program = controller_v1();
    let missions = missions();
    let seeds: Vec<u64> = (0..30).collect();
    for m in &missions {
        for &seed in &seeds {
            let base = MissionConfig::new(seed).with_mode(InstrumentationMode::Optimized);
            let nominal = run_mission(&program, m, &base).unwrap();
            let zero = run_mission(
                &program,
                m,
                &base.clone().with_delay(DelayConfig::intercept(TOPIC_CMD_VEL, SimTime::ZERO)),
            )
            .unwrap();
            if nominal.outcome != zero.outcome
                || nominal.stream != zero.stream
                || nominal.trajectory.to_csv() != zero.trajectory.to_csv()
            {
                return Err(format!("{} seed {seed}: zero delay differs from nominal", m.name));
            }
        }
    }
    let settings = intercepts(TOPIC_CMD_VEL, &intercept_grid());
    let lab = delay_lab(&program, &missions, &settings, &seeds, WorldConfig::default())
        .map_err(|e| e.to_string())?;
    let one_second = DelayConfig::intercept(TOPIC_CMD_VEL, SimTime::from_secs(1));
    let (nominal, delayed, wins, p) = lab.compare(&one_second);
    let table_complete = settings.iter().all(|s| {
        missions.iter().all(|m| {
            lab.cell(&m.name, Some(s))
                .is_some_and(|c| c.runs.len() == seeds.len() && c.crash_rate().is_finite())
        })
    });
    let crash: Vec<String> = settings
        .iter()
        .map(|s| {
            let rate: f64 = missions
                .iter()
                .map(|m| lab.cell(&m.name, Some(s)).unwrap().crash_rate())
                .sum::<f64>()
                / missions.len() as f64;
            format!("{}:{rate:.2}", s.delay())
        })
        .collect();
    check(
        delayed > nominal && p < 0.05 && table_complete && settings.len() == 9,
        format!(
            "zero delay identical; /cmd_vel@1s mean {delayed:.4} vs nominal {nominal:.4}, larger in {wins}/30, p={p:.2e}; crash rate {}",
            crash.join(" ")
        ),
    )
}

fn reduced_feature_stability() -> Outcome {
    let ds = fixture("v1").dataset().unwrap();
    let r = reduced_feature_eval(&ds, 5, SEED).map_err(|e| e.to_string())?;
    let names: Vec<&str> = r.selected.iter().map(|&i| Signal::ALL[i].name()).collect();
    let gap = (r.reduced.mean.f - r.full.mean.f).abs();
    check(
        gap <= 0.05,
        format!(
            "F top-5 {:.3} vs full {:.3} (|diff| {gap:.3}); top-5 {}",
            r.reduced.mean.f,
            r.full.mean.f,
            names.join(",")
        ),
    )
}

fn cross_version_transfer() -> Outcome {
    let v1 = fixture("v1").dataset().unwrap();
    let v2 = fixture("v2").dataset().unwrap();
    let cross = cross_version_eval(&v1, &v2, SEED).map_err(|e| e.to_string())?;
    let same = kfold(&v2, SEED, None).map_err(|e| e.to_string())?.mean;
    check(
        (cross.f - same.f).abs() <= 0.1,
        format!("v1->v2 F {:.3} vs v2 same-version F {:.3}", cross.f, same.f),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("pipeline replication", pipeline_replication),
        ("metric arithmetic", metric_arithmetic),
        ("decision-tree correctness", tree_correctness),
        ("instrumentation-mode equivalence", mode_equivalence),
        ("overhead ordering", overhead_ordering),
        ("interval stream contract", stream_contract),
        ("balancing and fold hygiene", balancing_and_hygiene),
        ("delay-lab properties", delay_lab_properties),
        ("reduced-feature stability", reduced_feature_stability),
        ("cross-version transfer", cross_version_transfer),
    ];
    let mut failed = 0;
    println!("acceptance criteria");
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(format!("panicked: {msg}"))
            });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
