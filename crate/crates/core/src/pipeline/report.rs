//! Experiment tables: `oa.tsv`, confusion matrices and learned kernel
//! weights.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{Dataset, EvalMode, Evaluator, ExperimentReport, Method, SplitPlan, TrainConfig};
use crate::dataio::write_text_atomic;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentPlan {
    pub train_counts: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            train_counts: vec![5, 50, 80],
            repetitions: 10,
            seed: 0,
        }
    }
}

/// Evaluates every method at every train count. Reports are ordered by
/// method (single scales, then `sv`, then `mkl`) and then by train count.
pub fn run_experiment(
    ds: &Dataset,
    cfg: &TrainConfig,
    plan: &ExperimentPlan,
    mode: EvalMode,
) -> Result<Vec<ExperimentReport>> {
    let evaluator = Evaluator::new(ds, cfg)?;
    let mut reports = Vec::new();
    for method in Method::all(ds.scales().len()) {
        for &count in &plan.train_counts {
            let split = SplitPlan {
                train_per_class: count,
                repetitions: plan.repetitions,
                seed: plan.seed,
            };
            let report = evaluator.evaluate(&split, method, mode).map_err(|e| {
                e.context(format!(
                    "{} with {count} training samples per class",
                    method.name(ds.scales())
                ))
            })?;
            reports.push(report);
        }
    }
    Ok(reports)
}

fn percent(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

pub fn render_oa_table(reports: &[ExperimentReport], train_counts: &[usize]) -> String {
    let mut out = String::from("method");
    for c in train_counts {
        write!(out, "\t{c}").unwrap();
    }
    out.push('\n');
    let mut methods: Vec<&str> = Vec::new();
    for r in reports {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    for m in methods {
        out.push_str(m);
        for &c in train_counts {
            match reports.iter().find(|r| r.method == m && r.train_count == c) {
                Some(r) => write!(out, "\t{}±{}", percent(r.mean), percent(r.std)).unwrap(),
                None => out.push_str("\t-"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn render_confusion(report: &ExperimentReport) -> (String, String) {
    let cm = &report.confusion;
    let mut header = String::from("actual\\predicted");
    for c in cm.classes() {
        write!(header, "\t{c}").unwrap();
    }
    header.push('\n');
    let (mut counts, mut rates) = (header.clone(), header);
    for ((name, row), rate_row) in cm.classes().iter().zip(cm.counts()).zip(cm.rates()) {
        counts.push_str(name);
        rates.push_str(name);
        for (&n, r) in row.iter().zip(rate_row) {
            write!(counts, "\t{n}").unwrap();
            write!(rates, "\t{r:.4}").unwrap();
        }
        counts.push('\n');
        rates.push('\n');
    }
    (counts, rates)
}

pub fn render_weights(reports: &[ExperimentReport], classes: &[String], scales: &[usize]) -> String {
    let mut out = String::from("train_count\tclass");
    for s in scales {
        write!(out, "\td_{s}").unwrap();
    }
    out.push('\n');
    for r in reports {
        let Some(weights) = &r.weights else { continue };
        for (class, d) in classes.iter().zip(weights) {
            write!(out, "{}\t{class}", r.train_count).unwrap();
            for w in d {
                write!(out, "\t{w:.4}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

/// All report files as `(file name, contents)`, in a fixed order.
pub fn render_files(ds: &Dataset, plan: &ExperimentPlan, reports: &[ExperimentReport]) -> Vec<(String, String)> {
    let mut files = vec![("oa.tsv".to_string(), render_oa_table(reports, &plan.train_counts))];
    for r in reports {
        let (counts, rates) = render_confusion(r);
        files.push((format!("confusion_{}_{}.tsv", r.method, r.train_count), counts));
        files.push((format!("confusion_{}_{}_rates.tsv", r.method, r.train_count), rates));
    }
    files.push((
        "mkl_weights.tsv".to_string(),
        render_weights(reports, ds.classes(), ds.scales()),
    ));
    files
}

/// Writes every file or none: on failure, files already written are removed.
pub fn write_files(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let path = dir.join(name);
        if let Err(e) = write_text_atomic(&path, contents) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            return Err(e);
        }
        written.push(path);
    }
    Ok(written)
}
