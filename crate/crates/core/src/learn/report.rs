//! Aligned text tables and CSV renderings of experiment results.

use std::fmt::Write as _;

use super::cv::CvReport;
use super::experiments::{CurveRow, EarlyReport, ReducedFeatureReport};
use super::metrics::{MeanMetrics, Metrics};
use crate::instrument::Signal;

fn csv_string(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

fn scores(m: &MeanMetrics) -> [String; 4] {
    [m.acc, m.prec, m.rec, m.f].map(|v| v.to_string())
}

pub fn metrics_line(m: &MeanMetrics) -> String {
    format!("{:>6.3} {:>6.3} {:>6.3} {:>6.3}", m.acc, m.prec, m.rec, m.f)
}

pub fn cv_text(report: &CvReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "K-fold cross-validation: n={} k={} seed={}{}",
        report.n,
        report.k,
        report.seed,
        report
            .feature_mask
            .as_ref()
            .map(|m| format!(" features={}", feature_list(m)))
            .unwrap_or_default()
    );
    let _ = writeln!(
        out,
        "{:>5} {:>6} {:>6} {:>5} {:>5} {:>5} {:>5} {:>6} {:>6} {:>6} {:>6}",
        "fold", "train", "test", "tp", "fp", "tn", "fn", "acc", "prec", "rec", "f"
    );
    for f in &report.folds {
        let m = &f.metrics;
        let _ = writeln!(
            out,
            "{:>5} {:>6} {:>6} {:>5} {:>5} {:>5} {:>5} {}{}",
            f.fold,
            f.train_size,
            f.test_size,
            m.tp,
            m.fp,
            m.tn,
            m.fn_,
            metrics_line(&MeanMetrics::from(*m)),
            if f.test_balanced { "" } else { "  (test fold single-class)" }
        );
    }
    let _ = writeln!(out, "{:>5} {:>43} {}", "mean", "", metrics_line(&report.mean));
    out
}

pub fn cv_csv(report: &CvReport) -> String {
    let mut rows = vec![[
        "fold", "train", "test", "tp", "fp", "tn", "fn", "acc", "prec", "rec", "f",
    ]
    .map(String::from)
    .to_vec()];
    for f in &report.folds {
        let m: &Metrics = &f.metrics;
        let mut r = vec![
            f.fold.to_string(),
            f.train_size.to_string(),
            f.test_size.to_string(),
            m.tp.to_string(),
            m.fp.to_string(),
            m.tn.to_string(),
            m.fn_.to_string(),
        ];
        r.extend(scores(&MeanMetrics::from(*m)));
        rows.push(r);
    }
    let mut r = vec!["mean".to_string()];
    r.extend(std::iter::repeat_n(String::new(), 6));
    r.extend(scores(&report.mean));
    rows.push(r);
    csv_string(rows)
}

fn feature_list(mask: &[usize]) -> String {
    mask.iter()
        .map(|&i| Signal::ALL[i].name())
        .collect::<Vec<_>>()
        .join(",")
}

/// Per-fold and mean importance of every feature, most important first.
pub fn importance_text(report: &CvReport) -> String {
    let order = super::experiments::rank_features(&report.mean_importances);
    let mut out = String::new();
    let _ = write!(out, "{:<16}", "feature");
    for f in &report.folds {
        let _ = write!(out, " {:>7}", format!("F{}", f.fold + 1));
    }
    let _ = writeln!(out, " {:>7}", "mean");
    for i in order {
        let _ = write!(out, "{:<16}", Signal::ALL[i].name());
        for f in &report.folds {
            let _ = write!(out, " {:>7.4}", f.importances[i]);
        }
        let _ = writeln!(out, " {:>7.4}", report.mean_importances[i]);
    }
    out
}

pub fn importance_csv(report: &CvReport) -> String {
    let mut header = vec!["feature".to_string()];
    header.extend(report.folds.iter().map(|f| format!("fold{}", f.fold)));
    header.push("mean".into());
    let mut rows = vec![header];
    for (i, s) in Signal::ALL.iter().enumerate() {
        let mut r = vec![s.name().to_string()];
        r.extend(report.folds.iter().map(|f| f.importances[i].to_string()));
        r.push(report.mean_importances[i].to_string());
        rows.push(r);
    }
    csv_string(rows)
}

pub fn curve_text(rows: &[CurveRow]) -> String {
    let mut out = format!(
        "{:>7} {:>3} {:>6} {:>6} {:>6} {:>6}\n",
        "samples", "k", "acc", "prec", "rec", "f"
    );
    for r in rows {
        let _ = writeln!(out, "{:>7} {:>3} {}", r.size, r.report.k, metrics_line(&r.report.mean));
    }
    out
}

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut out = vec![["samples", "k", "acc", "prec", "rec", "f"].map(String::from).to_vec()];
    for r in rows {
        let mut row = vec![r.size.to_string(), r.report.k.to_string()];
        row.extend(scores(&r.report.mean));
        out.push(row);
    }
    csv_string(out)
}

pub fn early_text(report: &EarlyReport) -> String {
    let mut out = format!(
        "interval size {} seed {}\n{:>9} {:>12} {:>6} {:>6} {:>6} {:>6} {:>6}\n",
        report.interval_size, report.seed, "interval", "instructions", "n", "acc", "prec", "rec", "f"
    );
    for row in &report.rows {
        let ins = row.instructions.map(|v| v.to_string()).unwrap_or_else(|| "end".into());
        let _ = write!(out, "{:>9} {:>12} {:>6} ", row.point.to_string(), ins, row.n);
        match (&row.report, &row.skipped) {
            (Some(r), _) => {
                let _ = writeln!(out, "{}", metrics_line(&r.mean));
            }
            (None, note) => {
                let _ = writeln!(out, "skipped: {}", note.as_deref().unwrap_or(""));
            }
        }
    }
    out
}

pub fn early_csv(report: &EarlyReport) -> String {
    let mut out = vec![[
        "interval", "instructions", "n", "k", "acc", "prec", "rec", "f", "skipped",
    ]
    .map(String::from)
    .to_vec()];
    for row in &report.rows {
        let mut r = vec![
            row.point.to_string(),
            row.instructions.map(|v| v.to_string()).unwrap_or_default(),
            row.n.to_string(),
        ];
        match &row.report {
            Some(cv) => {
                r.push(cv.k.to_string());
                r.extend(scores(&cv.mean));
            }
            None => r.extend(std::iter::repeat_n(String::new(), 5)),
        }
        r.push(row.skipped.clone().unwrap_or_default());
        out.push(r);
    }
    csv_string(out)
}

pub fn reduced_text(report: &ReducedFeatureReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "top-{} features: {}", report.top_k, feature_list(&report.selected));
    let _ = writeln!(out, "\nFull feature set\n{}", cv_text(&report.full));
    let _ = writeln!(out, "Reduced feature set\n{}", cv_text(&report.reduced));
    let _ = writeln!(
        out,
        "{:<10} {:>6} {:>6} {:>6} {:>6}\n{:<10} {}\n{:<10} {}",
        "features",
        "acc",
        "prec",
        "rec",
        "f",
        "all 26",
        metrics_line(&report.full.mean),
        format!("top {}", report.top_k),
        metrics_line(&report.reduced.mean)
    );
    out
}

pub fn reduced_csv(report: &ReducedFeatureReport) -> String {
    let mut out = vec![["features", "selected", "acc", "prec", "rec", "f"].map(String::from).to_vec()];
    let mut full = vec!["all".to_string(), String::new()];
    full.extend(scores(&report.full.mean));
    out.push(full);
    let mut red = vec![format!("top{}", report.top_k), feature_list(&report.selected)];
    red.extend(scores(&report.reduced.mean));
    out.push(red);
    csv_string(out)
}
