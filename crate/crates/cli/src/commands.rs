use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};

use sigdetect::bundled;
use sigdetect::corpus::{
    balance, build_corpus, label, load_corpus, write_corpus, Corpus, CorpusConfig, Label,
    LabeledDataset,
};
use sigdetect::instrument::csvio::SummaryCsvWriter;
use sigdetect::instrument::{measure_overhead, InstrumentationMode, Signal};
use sigdetect::learn::{
    cross_version_eval, default_curve_sizes, early_detection_sweep, kfold, learning_curve,
    reduced_feature_eval, report, DecisionTree, MeanMetrics, Metrics, SavedModel, MIN_FOLD_SIZE,
};
use sigdetect::robosim::{
    delay_lab, intercept_grid, run_mission, DelayConfig, Mission, MissionConfig, World,
    WorldConfig,
};
use sigdetect::time::SimTime;
use sigdetect::vm::{asm, ExitKind, PortIo, Program};

use crate::args::*;
use crate::output::{out_dir, write, write_config, write_report};
use crate::{config_err, internal_err, CliResult};

fn load_program(name_or_path: &str) -> CliResult<Program> {
    match name_or_path {
        "v1" => Ok(bundled::controller_v1()),
        "v2" => Ok(bundled::controller_v2()),
        path => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading program {path}"))
                .map_err(config_err)?;
            asm::load(&text)
                .with_context(|| format!("loading program {path}"))
                .map_err(config_err)
        }
    }
}

fn load_mission(name_or_path: &str) -> CliResult<Mission> {
    if let Some(m) = bundled::mission(name_or_path) {
        return Ok(m);
    }
    let text = fs::read_to_string(name_or_path)
        .with_context(|| format!("`{name_or_path}` is neither a bundled mission (M1, M2, M3) nor a readable file"))
        .map_err(config_err)?;
    let name = Path::new(name_or_path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| name_or_path.to_string());
    Mission::parse(name, &text)
        .with_context(|| format!("parsing mission {name_or_path}"))
        .map_err(config_err)
}

fn load_missions(names: &[String]) -> CliResult<Vec<Mission>> {
    if names.is_empty() {
        return Err(config_err(anyhow!("at least one mission is required")));
    }
    names.iter().map(|s| load_mission(s)).collect()
}

fn open_corpus(path: &Path) -> CliResult<Corpus> {
    load_corpus(path)
        .with_context(|| format!("loading corpus {}", path.display()))
        .map_err(config_err)
}

fn final_dataset(corpus: &Corpus) -> CliResult<LabeledDataset> {
    corpus.dataset().map_err(internal_err)
}

fn check_interval(interval: u64) -> CliResult<()> {
    if interval == 0 {
        return Err(config_err(anyhow!("--interval must be positive")));
    }
    Ok(())
}

pub fn trace(args: TraceArgs) -> CliResult<()> {
    let program = load_program(&args.program)?;
    let mission = load_mission(&args.mission)?;
    let mode: InstrumentationMode = args
        .mode
        .parse()
        .map_err(|e| config_err(anyhow!("{e}")))?;
    check_interval(args.interval)?;
    let dir = out_dir(&args.output, "trace")?;

    let config = MissionConfig::new(args.seed)
        .with_mode(mode)
        .with_interval(args.interval);
    let run = run_mission(&program, &mission, &config).map_err(internal_err)?;
    let verdict = label(&run.trajectory, &mission, run.exit);
    let run_id = format!("{}.{}.s{}", program.version, mission.name, args.seed);

    let mut rows = 0;
    if let Some(stream) = &run.stream {
        let mut w = SummaryCsvWriter::new(Vec::new()).map_err(internal_err)?;
        w.write_stream(&run_id, Some(verdict.as_u8()), stream)
            .map_err(internal_err)?;
        let bytes = w.finish().map_err(internal_err)?;
        write(&dir, "summary.csv", &String::from_utf8(bytes).map_err(internal_err)?)?;
        rows = stream.entries.len() + 1;
    }
    write(&dir, "trajectory.csv", &run.trajectory.to_csv())?;
    write_config(&dir, "trace", &args)?;
    println!(
        "{run_id}: {} after {} instructions, {:.2} s simulated, label {verdict}, {} summary rows",
        run.exit,
        run.outcome.state.executed,
        run.trajectory.end_time,
        rows
    );
    if args.strict && matches!(run.exit, ExitKind::Crashed(_)) {
        return Err(internal_err(anyhow!("controller crashed: {}", run.exit)));
    }
    Ok(())
}

pub fn corpus(args: CorpusArgs) -> CliResult<()> {
    let program = load_program(&args.program)?;
    let missions = load_missions(&args.missions)?;
    check_interval(args.interval)?;
    let dir = out_dir(&args.output, "corpus")?;
    let config = CorpusConfig {
        interval: args.interval,
        discard_window: args.discard_window,
        base_seed: args.seed,
        ..CorpusConfig::default()
    };
    let corpus = build_corpus(&program, &missions, &config).map_err(internal_err)?;
    write_corpus(&corpus, &dir).map_err(internal_err)?;
    let (pass, fail) = final_dataset(&corpus)?.class_counts();
    let discarded = corpus.records.iter().filter(|r| r.discarded).count();
    let errors = corpus.records.iter().filter(|r| r.error.is_some()).count();
    let body = format!(
        "program {} {}\nmutants {} (rejected by validation {})\nruns {} retained {} discarded {} errors {}\npass {} fail {}\n",
        corpus.meta.program,
        corpus.meta.version_tag,
        corpus.meta.mutants,
        corpus.meta.rejected_mutants,
        corpus.records.len(),
        pass + fail,
        discarded,
        errors,
        pass,
        fail
    );
    write_report(&dir, "summary", "corpus", &args, &body)
}

pub fn train(args: TrainArgs) -> CliResult<()> {
    let corpus = open_corpus(&args.corpus)?;
    let dataset = final_dataset(&corpus)?;
    if dataset.len() < 2 * MIN_FOLD_SIZE {
        return Err(config_err(anyhow!(
            "corpus has {} examples, cross-validation needs at least {}",
            dataset.len(),
            2 * MIN_FOLD_SIZE
        )));
    }
    let dir = out_dir(&args.output, "train")?;
    let cv = kfold(&dataset, args.seed, None).map_err(internal_err)?;
    let balanced = balance(&dataset, args.seed).map_err(internal_err)?;
    let tree = DecisionTree::fit(&balanced, None).map_err(internal_err)?;
    let model = SavedModel::new(tree, dataset.version_tag.clone(), args.seed);
    write(&dir, "model.json", &model.to_json())?;
    write(&dir, "cv.csv", &report::cv_csv(&cv))?;
    write(&dir, "importance.csv", &report::importance_csv(&cv))?;
    write_config(&dir, "train", &args)?;
    let (pass, fail) = dataset.class_counts();
    let body = format!(
        "corpus {} ({} pass / {} fail)\n{}\nFeature importance\n{}",
        dataset.version_tag,
        pass,
        fail,
        report::cv_text(&cv),
        report::importance_text(&cv)
    );
    write_report(&dir, "cv", "train", &args, &body)
}

fn metrics_table(rows: &[(&str, Metrics)]) -> (String, String) {
    let mut text = format!(
        "{:<12} {:>5} {:>5} {:>5} {:>5} {:>6} {:>6} {:>6} {:>6}\n",
        "", "tp", "fp", "tn", "fn", "acc", "prec", "rec", "f"
    );
    let mut csv = String::from("name,tp,fp,tn,fn,acc,prec,rec,f\n");
    for (name, m) in rows {
        let _ = writeln!(
            text,
            "{:<12} {:>5} {:>5} {:>5} {:>5} {}",
            name,
            m.tp,
            m.fp,
            m.tn,
            m.fn_,
            report::metrics_line(&MeanMetrics::from(*m))
        );
        let _ = writeln!(
            csv,
            "{name},{},{},{},{},{},{},{},{}",
            m.tp, m.fp, m.tn, m.fn_, m.acc, m.prec, m.rec, m.f
        );
    }
    (text, csv)
}

pub fn eval(args: EvalArgs) -> CliResult<()> {
    let text = fs::read_to_string(&args.model)
        .with_context(|| format!("reading {}", args.model.display()))
        .map_err(config_err)?;
    let model = SavedModel::from_json(&text).map_err(config_err)?;
    let corpus = open_corpus(&args.corpus)?;
    let dataset = final_dataset(&corpus)?;
    let dir = out_dir(&args.output, "eval")?;
    let (x, y): (Vec<Vec<f64>>, Vec<Label>) = dataset
        .examples
        .iter()
        .map(|e| (e.features.to_features(), e.label))
        .unzip();
    let predicted = model.tree.predict_batch(&x).map_err(internal_err)?;
    let m = Metrics::from_predictions(&y, &predicted);
    let (text, csv) = metrics_table(&[(&dataset.version_tag, m)]);
    write(&dir, "eval.csv", &csv)?;
    write_config(&dir, "eval", &args)?;
    let body = format!(
        "model trained on {} (seed {}), evaluated on {} ({} examples)\n{}",
        model.trained_on,
        model.seed,
        dataset.version_tag,
        dataset.len(),
        text
    );
    write_report(&dir, "eval", "eval", &args, &body)
}

pub fn curve(args: CurveArgs) -> CliResult<()> {
    let corpus = open_corpus(&args.corpus)?;
    let dataset = final_dataset(&corpus)?;
    let sizes = if args.sizes.is_empty() {
        default_curve_sizes(dataset.len())
    } else {
        args.sizes.clone()
    };
    if let Some(&bad) = sizes
        .iter()
        .find(|&&s| s > dataset.len() || s < 2 * MIN_FOLD_SIZE)
    {
        return Err(config_err(anyhow!(
            "sample size {bad} outside {}..={}",
            2 * MIN_FOLD_SIZE,
            dataset.len()
        )));
    }
    let dir = out_dir(&args.output, "curve")?;
    let rows = learning_curve(&dataset, &sizes, args.seed).map_err(internal_err)?;
    write(&dir, "curve.csv", &report::curve_csv(&rows))?;
    write_config(&dir, "curve", &args)?;
    write_report(&dir, "curve", "curve", &args, &report::curve_text(&rows))
}

pub fn early(args: EarlyArgs) -> CliResult<()> {
    let corpus = open_corpus(&args.corpus)?;
    let dir = out_dir(&args.output, "early")?;
    let sweep = early_detection_sweep(&corpus, args.seed).map_err(internal_err)?;
    write(&dir, "early.csv", &report::early_csv(&sweep))?;
    write_config(&dir, "early", &args)?;
    write_report(&dir, "early", "early", &args, &report::early_text(&sweep))
}

pub fn features(args: FeaturesArgs) -> CliResult<()> {
    if !(1..=Signal::ALL.len()).contains(&args.top_k) {
        return Err(config_err(anyhow!("--top-k must be in 1..=26")));
    }
    let corpus = open_corpus(&args.corpus)?;
    let dataset = final_dataset(&corpus)?;
    let dir = out_dir(&args.output, "features")?;
    let r = reduced_feature_eval(&dataset, args.top_k, args.seed).map_err(internal_err)?;
    write(&dir, "features.csv", &report::reduced_csv(&r))?;
    write(&dir, "importance.csv", &report::importance_csv(&r.full))?;
    write_config(&dir, "features", &args)?;
    let body = format!(
        "Feature importance across folds\n{}\n{}",
        report::importance_text(&r.full),
        report::reduced_text(&r)
    );
    write_report(&dir, "features", "features", &args, &body)
}

pub fn xversion(args: XversionArgs) -> CliResult<()> {
    let train = final_dataset(&open_corpus(&args.train)?)?;
    let test = final_dataset(&open_corpus(&args.test)?)?;
    let dir = out_dir(&args.output, "xversion")?;
    let cross = cross_version_eval(&train, &test, args.seed).map_err(internal_err)?;
    let same = kfold(&test, args.seed, None).map_err(internal_err)?;
    let (text, csv) = metrics_table(&[(&format!("{}->{}", train.version_tag, test.version_tag), cross)]);
    let mut csv = csv;
    let _ = writeln!(
        csv,
        "{}-kfold,,,,,{},{},{},{}",
        test.version_tag, same.mean.acc, same.mean.prec, same.mean.rec, same.mean.f
    );
    write(&dir, "xversion.csv", &csv)?;
    write_config(&dir, "xversion", &args)?;
    let body = format!(
        "train {} ({} examples), test {} ({} examples)\n{}{:<12} {:>23} {}\nF difference (cross - same-version): {:+.3}\n",
        train.version_tag,
        train.len(),
        test.version_tag,
        test.len(),
        text,
        format!("{} k-fold", test.version_tag),
        "",
        report::metrics_line(&same.mean),
        cross.f - same.mean.f
    );
    write_report(&dir, "xversion", "xversion", &args, &body)
}

pub fn overhead(args: OverheadArgs) -> CliResult<()> {
    if args.repeats < 3 || args.repeats.is_multiple_of(2) {
        return Err(config_err(anyhow!("--repeats must be odd and at least 3")));
    }
    let program = load_program(&args.program)?;
    let mission = load_mission(&args.mission)?;
    let dir = out_dir(&args.output, "overhead")?;
    let world = WorldConfig::default();
    let seed = args.seed;
    let r = measure_overhead(
        &program,
        || -> Box<dyn PortIo> { Box::new(World::new(&mission, seed, world)) },
        &world.limits,
        args.repeats,
    )
    .map_err(internal_err)?;
    let rows = [
        ("none", r.none_s, 1.0, r.none_hooks),
        ("naive", r.naive_s, r.naive_ratio(), r.naive_hooks),
        ("optimized", r.optimized_s, r.optimized_ratio(), r.optimized_hooks),
    ];
    let mut text = format!(
        "{} instructions, median of {} runs\n{:<10} {:>12} {:>8} {:>12}\n",
        r.instructions, r.repeats, "mode", "median_s", "ratio", "hook_calls"
    );
    let mut csv = String::from("mode,median_s,ratio,hook_calls\n");
    for (name, t, ratio, hooks) in rows {
        let _ = writeln!(text, "{name:<10} {t:>12.6} {ratio:>8.2} {hooks:>12}");
        let _ = writeln!(csv, "{name},{t},{ratio},{hooks}");
    }
    write(&dir, "overhead.csv", &csv)?;
    write_config(&dir, "overhead", &args)?;
    write_report(&dir, "overhead", "overhead", &args, &text)
}

pub fn delaylab(args: DelaylabArgs) -> CliResult<()> {
    let program = load_program(&args.program)?;
    let missions = load_missions(&args.missions)?;
    let delays: Vec<SimTime> = if args.delays.is_empty() {
        std::iter::once(SimTime::ZERO).chain(intercept_grid()).collect()
    } else {
        args.delays
            .iter()
            .map(|&s| {
                SimTime::from_secs_f64(s)
                    .ok_or_else(|| config_err(anyhow!("delay {s} is not a valid time")))
            })
            .collect::<CliResult<_>>()?
    };
    if args.seeds == 0 {
        return Err(config_err(anyhow!("--seeds must be positive")));
    }
    let mut settings = Vec::new();
    for topic in &args.topics {
        for &d in &delays {
            let cfg = DelayConfig::intercept(topic.clone(), d);
            cfg.validate().map_err(config_err)?;
            settings.push(cfg);
        }
    }
    let seeds: Vec<u64> = (args.first_seed..args.first_seed + args.seeds).collect();
    let dir = out_dir(&args.output, "delaylab")?;
    let lab = delay_lab(&program, &missions, &settings, &seeds, WorldConfig::default())
        .map_err(internal_err)?;
    let mut body = lab.distance_text();
    body.push_str("\nCrash rate and mean time taken (s), split by whether every waypoint was reached\n");
    body.push_str(&lab.outcome_text());
    body.push_str("\nPooled over missions, paired by seed (one-sided sign test)\n");
    let mut cmp_csv = String::from("setting,nominal_mean,delayed_mean,delayed_larger,seeds,p\n");
    for s in &settings {
        let (nominal, delayed, wins, p) = lab.compare(s);
        let name = match s {
            DelayConfig::TopicIntercept { topic, delay } => format!("{topic}@{delay}"),
            other => format!("{other:?}"),
        };
        let _ = writeln!(
            body,
            "{name:<22} nominal {nominal:.4} delayed {delayed:.4} larger in {wins}/{} seeds p={p:.3e}",
            seeds.len()
        );
        let _ = writeln!(cmp_csv, "{name},{nominal},{delayed},{wins},{},{p}", seeds.len());
    }
    write(&dir, "delaylab.csv", &lab.csv())?;
    write(&dir, "comparison.csv", &cmp_csv)?;
    write_config(&dir, "delaylab", &args)?;
    write_report(&dir, "delaylab", "delaylab", &args, &body)
}
