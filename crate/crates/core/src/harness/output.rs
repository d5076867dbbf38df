//! CSV writers. Every file starts with the run's config echoed as `# `
//! comment lines; numbers use shortest round-trip formatting, so a fixed
//! seed reproduces every byte.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::experiment::ExperimentSummary;
use super::trial::{StepTrace, TrialRecord, TrialStatus};
use crate::error::{Error, Result};

/// Shortest round-trip decimal, in exponent form outside `[1e−4, 1e15)`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        context: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |e| Error::Io {
        context: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    }
}

/// Writes `header` comment lines, then CSV rows.
pub fn write_csv(path: &Path, header: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    for line in header.lines() {
        writeln!(out, "# {line}").map_err(io_err(path))?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub const TRIAL_COLUMNS: [&str; 20] = [
    "trial",
    "seed",
    "status",
    "abort_step",
    "fault_mode",
    "fault_step",
    "fault_stage",
    "fault_slot",
    "fault_component",
    "fault_factor",
    "lte",
    "lte_step",
    "lte_numerator",
    "lte_denominator",
    "detected_at_fault",
    "detected_at_fault_or_next",
    "false_positives",
    "checked_steps",
    "n_steps",
    "flagged_steps",
];

pub fn trial_row(r: &TrialRecord) -> Vec<String> {
    let (status, abort) = match &r.status {
        TrialStatus::Completed => ("completed", String::new()),
        TrialStatus::Aborted { step, .. } => ("aborted", step.to_string()),
    };
    let f = r.fault.as_ref();
    let l = r.lte.as_ref();
    vec![
        r.trial.to_string(),
        r.seed.to_string(),
        status.to_string(),
        abort,
        f.map(|f| f.mode.id().to_string()).unwrap_or_default(),
        f.map(|f| f.step.to_string()).unwrap_or_default(),
        f.map(|f| f.stage.to_string()).unwrap_or_default(),
        f.map(|f| f.slot.to_string()).unwrap_or_default(),
        f.map(|f| f.component.to_string()).unwrap_or_default(),
        opt(f.map(|f| f.factor)),
        opt(l.map(|l| l.value)),
        l.map(|l| l.step.to_string()).unwrap_or_default(),
        opt(l.map(|l| l.numerator)),
        opt(l.map(|l| l.denominator)),
        r.detected_at_fault.to_string(),
        r.detected_at_fault_or_next.to_string(),
        r.false_positives.to_string(),
        r.checked_steps.to_string(),
        r.n_steps.to_string(),
        r.flagged_steps.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";"),
    ]
}

pub const SUMMARY_COLUMNS: [&str; 23] = [
    "problem",
    "scheme",
    "detector_mode",
    "trials",
    "completed",
    "aborted",
    "faulty",
    "tpr_at_fault",
    "tpr_fault_or_next",
    "false_positives",
    "checked_steps",
    "fpr",
    "infinite_l",
    "bandwidth",
    "bin_0_1_count",
    "bin_0_1_tpr",
    "bin_1_3_count",
    "bin_1_3_tpr",
    "bin_3_inf_count",
    "bin_3_inf_tpr",
    "tpr_l_above_3",
    "seed",
    "dt",
];

pub fn summary_row(s: &ExperimentSummary) -> Vec<String> {
    let a = &s.aggregate;
    let mut row = vec![
        s.config.problem.clone(),
        s.config.scheme.clone(),
        s.config.detector.mode.id().to_string(),
        a.trials.to_string(),
        a.completed.to_string(),
        a.aborted.to_string(),
        a.faulty.to_string(),
        opt(a.tpr_at_fault),
        opt(a.tpr_fault_or_next),
        a.false_positives.to_string(),
        a.checked_steps.to_string(),
        fmt_f64(a.fpr),
        a.infinite_l.to_string(),
        opt(s.bandwidth),
    ];
    for b in &s.bins {
        row.push(b.count.to_string());
        row.push(opt(b.tpr));
    }
    row.push(opt(super::experiment::tpr_where(&s.records, |l| l > 3.0)));
    row.push(s.config.seed.to_string());
    row.push(opt(s.config.dt));
    row
}

/// Writes `trials.csv`, `summary.csv`, `curve_at_fault.csv` and
/// `curve_fault_or_next.csv` into `dir`.
pub fn emit_outputs(summary: &ExperimentSummary, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let header = summary.config.to_toml_string();
    let trials = dir.join("trials.csv");
    let rows: Vec<Vec<String>> = summary.records.iter().map(trial_row).collect();
    write_csv(&trials, &header, &TRIAL_COLUMNS, &rows)?;

    let agg = dir.join("summary.csv");
    write_csv(&agg, &header, &SUMMARY_COLUMNS, &[summary_row(summary)])?;

    let mut paths = vec![trials, agg];
    for (name, pick) in [
        ("curve_at_fault.csv", (|c: &super::experiment::CurvePoint| c.tpr_at_fault) as fn(&_) -> f64),
        ("curve_fault_or_next.csv", |c| c.tpr_fault_or_next),
    ] {
        let path = dir.join(name);
        let rows: Vec<Vec<String>> = summary.curve.iter().map(|c| vec![fmt_f64(c.l), fmt_f64(pick(c))]).collect();
        write_csv(&path, &header, &["l", "tpr"], &rows)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Writes the three ablation runs into subdirectories plus `ablation.csv`.
pub fn emit_ablation(summaries: &[ExperimentSummary], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for s in summaries {
        paths.extend(emit_outputs(s, &dir.join(s.config.detector.mode.id()))?);
    }
    let path = dir.join("ablation.csv");
    let header = summaries.first().map(|s| s.config.to_toml_string()).unwrap_or_default();
    let rows: Vec<Vec<String>> = summaries.iter().map(summary_row).collect();
    write_csv(&path, &header, &SUMMARY_COLUMNS, &rows)?;
    paths.push(path);
    Ok(paths)
}

pub const TRACE_COLUMNS: [&str; 9] = ["step", "d", "jump", "variance", "tau_j", "tau_v", "flagged", "fault_step", "lte"];

pub fn trace_rows(record: &TrialRecord) -> Vec<Vec<String>> {
    let fault_step = record.fault.map(|f| f.step.to_string()).unwrap_or_default();
    let lte = opt(record.lte_value());
    record
        .trace
        .iter()
        .map(|t: &StepTrace| {
            vec![
                t.step.to_string(),
                fmt_f64(t.d),
                opt(t.verdict.jump),
                opt(t.verdict.variance),
                fmt_f64(t.verdict.thresholds_before.0),
                fmt_f64(t.verdict.thresholds_before.1),
                t.verdict.flagged.to_string(),
                fault_step.clone(),
                lte.clone(),
            ]
        })
        .collect()
}
