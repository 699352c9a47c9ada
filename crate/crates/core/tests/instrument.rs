mod common;

use proptest::prelude::*;

use common::{random_program, replay, test_limits};
use sigdetect::instrument::csvio::{read_rows, stream_from_rows, SummaryCsvWriter};
use sigdetect::instrument::{
    collect, InstrumentationMode, Signal, SummaryStream, TraceRecorder, PARTITION,
};
use sigdetect::vm::{run, ExitKind, ScriptedIo};

fn collected(seed: u64, mode: InstrumentationMode, interval: u64) -> SummaryStream {
    let program = random_program(seed);
    let mut io = ScriptedIo::new(seed).with_range(5);
    collect(&program, &mut io, &test_limits(), mode, interval)
        .unwrap()
        .stream
}

fn traced(seed: u64) -> Vec<sigdetect::instrument::TraceEvent> {
    let program = random_program(seed);
    let mut io = ScriptedIo::new(seed).with_range(5);
    let mut rec = TraceRecorder::default();
    run(&program, &mut io, &test_limits(), &mut rec).unwrap();
    rec.events
}

#[test]
fn random_programs_cover_every_exit_kind() {
    let mut kinds = std::collections::BTreeSet::new();
    for seed in 0..200 {
        let program = random_program(seed);
        let mut io = ScriptedIo::new(seed).with_range(5);
        let c = collect(&program, &mut io, &test_limits(), InstrumentationMode::Optimized, 10).unwrap();
        kinds.insert(match c.exit {
            ExitKind::Halted => 0,
            ExitKind::Crashed(_) => 1,
            ExitKind::TimedOut => 2,
        });
    }
    assert_eq!(kinds.len(), 3);
}

#[test]
fn naive_and_optimized_agree_on_random_programs() {
    for seed in 0..200 {
        for interval in [1, 7, 64] {
            let naive = collected(seed, InstrumentationMode::NaivePerInstruction, interval);
            let opt = collected(seed, InstrumentationMode::Optimized, interval);
            assert_eq!(naive, opt, "seed {seed} interval {interval}");
        }
    }
}

#[test]
fn summaries_match_independent_replay_of_raw_trace() {
    for seed in 0..200 {
        let events = traced(seed);
        for interval in [1, 5, 33] {
            let (entries, last) = replay(&events, interval);
            for mode in [InstrumentationMode::NaivePerInstruction, InstrumentationMode::Optimized] {
                let stream = collected(seed, mode, interval);
                assert_eq!(stream.final_summary, last, "seed {seed} {mode:?}");
                let got: Vec<_> = stream.entries.iter().map(|e| e.summary).collect();
                assert_eq!(got, entries, "seed {seed} {mode:?} interval {interval}");
            }
        }
    }
}

#[test]
fn interval_row_count_follows_instruction_count() {
    for seed in 0..100 {
        for interval in [1, 3, 10, 100] {
            let stream = collected(seed, InstrumentationMode::Optimized, interval);
            let ins = stream.final_summary[Signal::InsCount] as u64;
            assert_eq!(stream.entries.len() as u64, ins / interval);
            let mut buf = Vec::new();
            let mut w = SummaryCsvWriter::new(&mut buf).unwrap();
            w.write_stream("r", None, &stream).unwrap();
            w.finish().unwrap();
            let rows = read_rows(buf.as_slice()).unwrap();
            assert_eq!(rows.len() as u64, ins / interval + 1);
        }
    }
}

#[test]
fn bundled_controller_streams_agree_across_modes() {
    use sigdetect::bundled::{controller_v1, mission};
    use sigdetect::robosim::{run_mission, MissionConfig};
    let program = controller_v1();
    let m = mission("M2").unwrap();
    let run = |mode| {
        let cfg = MissionConfig::new(3).with_mode(mode).with_interval(997);
        run_mission(&program, &m, &cfg).unwrap()
    };
    let naive = run(InstrumentationMode::NaivePerInstruction);
    let opt = run(InstrumentationMode::Optimized);
    assert_eq!(naive.stream, opt.stream);
    assert_eq!(naive.outcome, opt.outcome);
    naive.stream.unwrap().check_invariants().unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn streams_are_monotone_and_partitioned(seed in 0u64..10_000, interval in 1u64..50) {
        let stream = collected(seed, InstrumentationMode::Optimized, interval);
        prop_assert!(stream.check_invariants().is_ok());
        for s in stream.entries.iter().map(|e| &e.summary).chain([&stream.final_summary]) {
            let sum: i64 = PARTITION.iter().map(|p| s[*p]).sum();
            prop_assert_eq!(sum, s[Signal::InsCount]);
            prop_assert!(s[Signal::SBExit] <= s[Signal::SBEnter]);
            prop_assert!(s[Signal::BranchTakenCount] <= s[Signal::ExitCount]);
        }
    }

    #[test]
    fn summary_csv_round_trips(seed in 0u64..10_000, interval in 1u64..40) {
        let stream = collected(seed, InstrumentationMode::NaivePerInstruction, interval);
        let mut buf = Vec::new();
        let mut w = SummaryCsvWriter::new(&mut buf).unwrap();
        w.write_stream("run-a", Some(1), &stream).unwrap();
        w.finish().unwrap();
        let rows = read_rows(buf.as_slice()).unwrap();
        prop_assert!(rows.iter().all(|r| r.run_id == "run-a" && r.label == Some(1)));
        let back = stream_from_rows(&rows, interval).unwrap();
        prop_assert_eq!(back, stream);
    }
}
