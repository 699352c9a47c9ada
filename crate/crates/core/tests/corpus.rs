use std::path::PathBuf;

use proptest::prelude::*;

use sigdetect::bundled::{controller_v1, controller_v2, missions};
use sigdetect::corpus::{
    balance, balance_draws, build_corpus, class_counts, enumerate_with, label, load_corpus,
    write_corpus, CorpusConfig, CorpusError, Label, LabeledDataset, LabeledExample,
    OperatorKind, OperatorRegistry, Provenance, SummaryPoint,
};
use sigdetect::instrument::SignalSummary;
use sigdetect::robosim::{Mission, Trajectory, TrajectorySample};
use sigdetect::time::SimTime;
use sigdetect::vm::{CrashReason, ExitKind, Instruction, MemAddr, Program};

fn fixture(version: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../fixtures/corpus/{version}"))
}

/// Candidate count per instruction, worked out from the operator rules
/// rather than by calling them.
fn expected_candidates(ins: &Instruction) -> usize {
    let delete = usize::from(*ins != Instruction::Nop);
    let addr = |a: &MemAddr| match a {
        MemAddr::Direct(0) => 1,
        MemAddr::Direct(_) => 2,
        MemAddr::Indexed { .. } => 2,
    };
    delete
        + match ins {
            Instruction::Arith { .. } => 1,
            Instruction::Br { .. } => 1,
            Instruction::LoadI { imm, .. } => {
                let mut vals = vec![imm + 1, imm - 1, imm * 2, 0];
                vals.retain(|v| v != imm);
                vals.sort_unstable();
                vals.dedup();
                vals.len()
            }
            Instruction::Load { addr: a, .. } | Instruction::Store { addr: a, .. } => addr(a),
            _ => 0,
        }
}

fn static_scan(program: &Program) -> usize {
    program
        .blocks
        .iter()
        .filter(|b| program.is_core_block(b.id))
        .flat_map(|b| b.instructions.iter())
        .map(expected_candidates)
        .sum()
}

#[test]
fn mutant_count_matches_static_scan() {
    for program in [controller_v1(), controller_v2()] {
        let e = enumerate_with(&program, &OperatorRegistry::default());
        assert_eq!(e.mutants.len() + e.rejected.len(), static_scan(&program));
        assert!(e.mutants.len() >= 200, "{}", e.mutants.len());
        let mut ids: Vec<&str> = e.mutants.iter().map(|m| m.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), e.mutants.len());
        for m in &e.mutants {
            let diff: Vec<_> = program
                .sites()
                .zip(m.program.sites())
                .filter(|(a, b)| a.2 != b.2)
                .collect();
            assert_eq!(diff.len(), 1, "{}", m.id);
            assert_eq!((diff[0].0 .0, diff[0].0 .1), (m.site.block, m.site.offset));
        }
    }
}

#[test]
fn registry_restricts_enumeration() {
    let program = controller_v1();
    let mut only = OperatorRegistry::empty();
    only.register(Box::new(sigdetect::corpus::BranchFlip));
    let e = enumerate_with(&program, &only);
    let branches = program
        .sites()
        .filter(|(b, _, i)| program.is_core_block(*b) && matches!(i, Instruction::Br { .. }))
        .count();
    assert_eq!(e.mutants.len() + e.rejected.len(), branches);
    assert!(e.mutants.iter().all(|m| m.operator == OperatorKind::BranchFlip));
}

fn ex(tag: i64, label: Label) -> LabeledExample {
    let mut v = *SignalSummary::default().values();
    v[0] = tag;
    LabeledExample {
        features: SignalSummary::from_values(v),
        label,
        provenance: Provenance {
            mutant_id: format!("m{tag}"),
            mission_id: "M1".into(),
            point: SummaryPoint::Final,
        },
    }
}

fn ten_three() -> Vec<LabeledExample> {
    (0..13)
        .map(|i| ex(i, if i % 4 == 1 && i < 12 { Label::Fail } else { Label::Pass }))
        .collect()
}

#[test]
fn balance_of_ten_to_three_is_frozen() {
    let examples = ten_three();
    assert_eq!(class_counts(&examples), (10, 3));
    let draws = balance_draws(&examples, 42).unwrap();
    assert_eq!(draws, FROZEN_DRAWS_SEED_42);
    let ds = LabeledDataset::new(examples, "t").unwrap();
    let b = balance(&ds, 42).unwrap();
    assert_eq!(b.class_counts(), (10, 10));
    assert_eq!(&b.examples[..13], &ds.examples[..]);
}

const FROZEN_DRAWS_SEED_42: [usize; 7] = [1, 9, 1, 9, 9, 5, 5];

#[test]
fn balance_rejects_single_class() {
    let ds = LabeledDataset::new((0..5).map(|i| ex(i, Label::Pass)).collect(), "t").unwrap();
    assert!(matches!(balance(&ds, 0), Err(CorpusError::SingleClass)));
    assert!(matches!(LabeledDataset::new(Vec::new(), "t"), Err(CorpusError::EmptyCorpus)));
}

proptest! {
    #[test]
    fn balancing_only_appends_minority_copies(
        labels in prop::collection::vec(any::<bool>(), 2..120),
        seed in any::<u64>(),
    ) {
        let examples: Vec<_> = labels
            .iter()
            .enumerate()
            .map(|(i, &f)| ex(i as i64, if f { Label::Fail } else { Label::Pass }))
            .collect();
        let (pass, fail) = class_counts(&examples);
        prop_assume!(pass > 0 && fail > 0);
        let ds = LabeledDataset::new(examples.clone(), "t").unwrap();
        let b = balance(&ds, seed).unwrap();
        prop_assert_eq!(&b.examples[..examples.len()], &examples[..]);
        let (bp, bf) = b.class_counts();
        prop_assert_eq!(bp, bf);
        prop_assert_eq!(bp, pass.max(fail));
        let minority = if fail < pass { Label::Fail } else { Label::Pass };
        for extra in &b.examples[examples.len()..] {
            prop_assert_eq!(extra.label, minority);
            prop_assert!(examples.contains(extra));
        }
        prop_assert_eq!(balance(&ds, seed).unwrap(), b);
    }
}

fn straight_mission() -> Mission {
    Mission::from_points("line", &[(0.0, 0.0), (2.0, 0.0)]).unwrap()
}

fn path(pts: &[(f64, f64)]) -> Vec<TrajectorySample> {
    pts.iter()
        .enumerate()
        .map(|(i, &(x, y))| TrajectorySample {
            time: SimTime::from_secs(i as u64),
            x,
            y,
        })
        .collect()
}

#[test]
fn labels_follow_exit_and_waypoints() {
    let m = straight_mission();
    let good = path(&[(0.0, 0.0), (1.9, 0.1), (0.2, 0.0)]);
    let short = path(&[(0.0, 0.0), (0.5, 0.0), (0.0, 0.0)]);
    let stray = path(&[(0.0, 0.0), (2.0, 0.0), (3.5, 0.0)]);
    let t = |s: &Vec<TrajectorySample>, e| Trajectory::from_samples(s.clone(), &m, e);
    assert_eq!(label(&t(&good, ExitKind::Halted), &m, ExitKind::Halted), Label::Pass);
    let crash = ExitKind::Crashed(CrashReason::DivideByZero);
    assert_eq!(label(&t(&good, crash), &m, crash), Label::Fail);
    assert_eq!(label(&t(&good, ExitKind::TimedOut), &m, ExitKind::TimedOut), Label::Fail);
    assert_eq!(label(&t(&short, ExitKind::Halted), &m, ExitKind::Halted), Label::Fail);
    assert_eq!(label(&t(&stray, ExitKind::Halted), &m, ExitKind::Halted), Label::Fail);
}

#[test]
fn shipped_fixture_is_usable() {
    for v in ["v1", "v2"] {
        let corpus = load_corpus(&fixture(v)).unwrap();
        assert_eq!(corpus.meta.version_tag, v);
        let ds = corpus.dataset().unwrap();
        let (pass, fail) = ds.class_counts();
        assert!(pass > 0 && fail > 0);
        assert!(2 * pass.max(fail) >= 400);
        assert!(corpus.meta.mutants >= 200);
        for stream in corpus.streams.values() {
            stream.check_invariants().unwrap();
        }
    }
}

#[test]
fn regeneration_reproduces_the_fixture() {
    let shipped = load_corpus(&fixture("v1")).unwrap();
    let config = CorpusConfig {
        interval: shipped.meta.config.interval,
        ..CorpusConfig::default()
    };
    let fresh = build_corpus(&controller_v1(), &missions(), &config).unwrap();
    assert_eq!(fresh.meta, shipped.meta);
    assert_eq!(fresh.records, shipped.records);
    assert_eq!(fresh.streams, shipped.streams);
}

#[test]
fn corpus_round_trips_through_disk() {
    let config = CorpusConfig {
        interval: 3000,
        ..CorpusConfig::default()
    };
    let m = &missions()[..1];
    let corpus = build_corpus(&controller_v2(), m, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&corpus, dir.path()).unwrap();
    let back = load_corpus(dir.path()).unwrap();
    assert_eq!(back, corpus);
    assert!(matches!(
        build_corpus(&controller_v2(), &[], &config),
        Err(CorpusError::NoMissions)
    ));
}

#[test]
fn discarded_runs_are_early_crashes() {
    let corpus = load_corpus(&fixture("v1")).unwrap();
    let window = corpus.meta.config.discard_window;
    for r in &corpus.records {
        if r.discarded {
            assert!(r.exit_kind.starts_with("crashed"), "{}", r.run_id);
            assert!(r.instructions < window);
        } else {
            assert!(!(r.exit_kind.starts_with("crashed") && r.instructions < window));
        }
    }
}
