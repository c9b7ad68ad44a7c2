//! One-vs-rest confusion counts, sensitivity, and the method comparison table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ClassCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    /// `tp / (tp + fn)`, absent when the class never occurs in the truth.
    pub fn sensitivity(&self) -> Option<f64> {
        let pos = self.tp + self.fn_;
        (pos > 0).then(|| self.tp as f64 / pos as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub per_class: Vec<ClassCounts>,
    /// Sum of the per-class counts.
    pub micro: ClassCounts,
    pub samples: u64,
}

pub fn confusion(predicted: &[usize], truth: &[usize], c: usize) -> Result<ConfusionCounts> {
    if predicted.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} predictions", truth.len()),
            actual: format!("{}", predicted.len()),
        });
    }
    if let Some(&bad) = predicted.iter().chain(truth).find(|&&k| k >= c) {
        return Err(Error::InvalidInput(format!(
            "class index {bad} out of range (c = {c})"
        )));
    }
    let mut per_class = vec![ClassCounts::default(); c];
    for (&p, &t) in predicted.iter().zip(truth) {
        if p == t {
            per_class[p].tp += 1;
        } else {
            per_class[t].fn_ += 1;
            per_class[p].fp += 1;
        }
    }
    let samples = truth.len() as u64;
    for counts in &mut per_class {
        counts.tn = samples - counts.tp - counts.fn_ - counts.fp;
    }
    let micro = per_class
        .iter()
        .fold(ClassCounts::default(), |acc, k| ClassCounts {
            tp: acc.tp + k.tp,
            fn_: acc.fn_ + k.fn_,
            fp: acc.fp + k.fp,
            tn: acc.tn + k.tn,
        });
    Ok(ConfusionCounts {
        per_class,
        micro,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    /// `Σ tp / Σ (tp + fn)`; equals accuracy under single-label prediction.
    pub micro: f64,
    /// Mean of the per-class values that are defined.
    #[serde(rename = "macro")]
    pub macro_: Option<f64>,
    pub per_class: Vec<Option<f64>>,
}

/// Micro-averaged sensitivity plus per-class and macro values. `None` when
/// no sample has a true class (`Σ (tp + fn) = 0`).
pub fn sensitivity(counts: &ConfusionCounts) -> Option<Sensitivity> {
    let micro = counts.micro.sensitivity()?;
    let per_class: Vec<Option<f64>> = counts
        .per_class
        .iter()
        .map(ClassCounts::sensitivity)
        .collect();
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    let macro_ = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Some(Sensitivity {
        micro,
        macro_,
        per_class,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub micro_q: Option<f64>,
    pub macro_q: Option<f64>,
    pub samples: u64,
    /// Set when the row's run failed; the Q columns are then empty.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ReportRow>,
    /// Index into `rows` of the highest micro Q (first on ties).
    pub best: Option<usize>,
}

impl ComparisonReport {
    pub fn from_rows(rows: Vec<ReportRow>) -> Self {
        let mut best: Option<usize> = None;
        for (i, r) in rows.iter().enumerate() {
            if let Some(q) = r.micro_q {
                if best.is_none_or(|b| q > rows[b].micro_q.unwrap_or(f64::NEG_INFINITY)) {
                    best = Some(i);
                }
            }
        }
        Self { rows, best }
    }

    pub fn best_row(&self) -> Option<&ReportRow> {
        self.best.map(|i| &self.rows[i])
    }

    /// Aligned plain-text table with sensitivities in percent.
    pub fn to_text(&self) -> String {
        let header = ["Method", "Sensitivity (%)", "Macro (%)", "Samples"];
        let fmt_q =
            |q: Option<f64>| q.map_or_else(|| "-".to_string(), |v| format!("{:.2}", 100.0 * v));
        let body: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                let micro = match &r.error {
                    Some(e) => format!("failed: {e}"),
                    None => fmt_q(r.micro_q),
                };
                [
                    r.method.clone(),
                    micro,
                    fmt_q(r.macro_q),
                    r.samples.to_string(),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: [&str; 4]| {
            let _ = writeln!(
                out,
                "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}",
                cells[0],
                cells[1],
                cells[2],
                cells[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3]
            );
        };
        line(&mut out, header);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        line(&mut out, [&rule[0], &rule[1], &rule[2], &rule[3]]);
        for row in &body {
            line(&mut out, [&row[0], &row[1], &row[2], &row[3]]);
        }
        if let Some(best) = self.best_row() {
            let _ = writeln!(out, "best: {}", best.method);
        }
        out
    }
}

/// One row per `(method, counts)` pair, in input order.
pub fn comparison_report(results: &[(String, ConfusionCounts)]) -> Result<ComparisonReport> {
    if results.is_empty() {
        return Err(Error::InvalidInput(
            "comparison report needs at least one method".into(),
        ));
    }
    let rows = results
        .iter()
        .map(|(method, counts)| {
            let q = sensitivity(counts);
            ReportRow {
                method: method.clone(),
                micro_q: q.as_ref().map(|s| s.micro),
                macro_q: q.and_then(|s| s.macro_),
                samples: counts.samples,
                error: None,
            }
        })
        .collect();
    Ok(ComparisonReport::from_rows(rows))
}
