//! Label distributions for evaluated runs.
//!
//! Labels come from an external evaluator as JSON lines
//! `{"intervention_id", "cq", "label", "run"}`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("line {line}: unknown label `{label}`")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("run `{0}` not present")]
    MissingRun(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EvalLabel {
    Useful,
    Unhelpful,
    Invalid,
    #[serde(rename = "not_able_to_evaluate")]
    NotAbleToEvaluate,
}

impl EvalLabel {
    pub const ALL: [EvalLabel; 4] = [
        EvalLabel::Useful,
        EvalLabel::Unhelpful,
        EvalLabel::Invalid,
        EvalLabel::NotAbleToEvaluate,
    ];

    pub fn column(self) -> &'static str {
        match self {
            EvalLabel::Useful => "Useful",
            EvalLabel::Unhelpful => "Unhelpful",
            EvalLabel::Invalid => "Invalid",
            EvalLabel::NotAbleToEvaluate => "N/A",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for EvalLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Useful" => Ok(EvalLabel::Useful),
            "Unhelpful" => Ok(EvalLabel::Unhelpful),
            "Invalid" => Ok(EvalLabel::Invalid),
            "not_able_to_evaluate" | "N/A" => Ok(EvalLabel::NotAbleToEvaluate),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledQuestion {
    pub intervention_id: String,
    pub cq: String,
    pub label: EvalLabel,
    pub run: String,
}

#[derive(Deserialize)]
struct LabelRecord {
    intervention_id: String,
    cq: String,
    label: String,
    run: String,
}

pub fn parse_labels(text: &str) -> Result<Vec<LabeledQuestion>, ReportError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let record: LabelRecord =
            serde_json::from_str(line).map_err(|e| ReportError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        let label = record
            .label
            .parse()
            .map_err(|label| ReportError::UnknownLabel {
                line: line_no,
                label,
            })?;
        out.push(LabeledQuestion {
            intervention_id: record.intervention_id,
            cq: record.cq,
            label,
            run: record.run,
        });
    }
    Ok(out)
}

/// Per-run label percentages, stored in hundredths of a percent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Distribution {
    pub run: String,
    pub total: usize,
    pub counts: [usize; 4],
    pub hundredths: [u64; 4],
}

/// `100 * count / total` in hundredths, rounded half-up.
fn percent_hundredths(count: usize, total: usize) -> u64 {
    let (count, total) = (count as u64, total as u64);
    (20_000 * count + total) / (2 * total)
}

impl Distribution {
    pub fn from_counts(run: impl Into<String>, counts: [usize; 4]) -> Option<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return None;
        }
        Some(Self {
            run: run.into(),
            total,
            counts,
            hundredths: counts.map(|c| percent_hundredths(c, total)),
        })
    }

    /// A row given directly as percentages, e.g. from a published table.
    pub fn from_percentages(run: impl Into<String>, percents: [f64; 4]) -> Self {
        Self {
            run: run.into(),
            total: 0,
            counts: [0; 4],
            hundredths: percents.map(|p| (p * 100.0).round() as u64),
        }
    }

    pub fn percent(&self, label: EvalLabel) -> f64 {
        self.hundredths[label.index()] as f64 / 100.0
    }

    pub fn rounded_sum(&self) -> f64 {
        self.hundredths.iter().sum::<u64>() as f64 / 100.0
    }

    fn cells(&self) -> [String; 4] {
        self.hundredths
            .map(|h| format!("{}.{:02}", h / 100, h % 100))
    }
}

/// Distributions per run, in order of each run's first appearance.
pub fn aggregate_labels(items: &[LabeledQuestion]) -> Vec<Distribution> {
    let mut order: Vec<&str> = Vec::new();
    let mut counts: BTreeMap<&str, [usize; 4]> = BTreeMap::new();
    for item in items {
        let entry = counts.entry(item.run.as_str()).or_insert_with(|| {
            order.push(item.run.as_str());
            [0; 4]
        });
        entry[item.label.index()] += 1;
    }
    order
        .into_iter()
        .filter_map(|run| Distribution::from_counts(run, counts[run]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Text,
    Csv,
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(TableFormat::Text),
            "csv" => Ok(TableFormat::Csv),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

impl fmt::Display for TableFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableFormat::Text => "text",
            TableFormat::Csv => "csv",
        })
    }
}

/// Renders rows in `order`. Text output has a left-aligned run column and
/// right-aligned two-decimal columns separated by spaces.
pub fn render_table(
    distributions: &[Distribution],
    order: &[String],
    format: TableFormat,
) -> Result<String, ReportError> {
    let rows: Vec<&Distribution> = order
        .iter()
        .map(|run| {
            distributions
                .iter()
                .find(|d| &d.run == run)
                .ok_or_else(|| ReportError::MissingRun(run.clone()))
        })
        .collect::<Result<_, _>>()?;
    let headers = EvalLabel::ALL.map(EvalLabel::column);
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str("run,");
            out.push_str(&headers.join(","));
            out.push('\n');
            for row in rows {
                out.push_str(&row.run);
                for cell in row.cells() {
                    out.push(',');
                    out.push_str(&cell);
                }
                out.push('\n');
            }
        }
        TableFormat::Text => {
            let label_width = rows
                .iter()
                .map(|r| r.run.len())
                .chain([6])
                .max()
                .unwrap_or(6);
            let widths = headers.map(|h| h.len().max(6));
            out.push_str(&format!("{:<label_width$}", "Method"));
            for (h, w) in headers.iter().zip(widths) {
                out.push_str(&format!("  {h:>w$}"));
            }
            out.push('\n');
            for row in rows {
                out.push_str(&format!("{:<label_width$}", row.run));
                for (cell, w) in row.cells().iter().zip(widths) {
                    out.push_str(&format!("  {cell:>w$}"));
                }
                out.push('\n');
            }
        }
    }
    Ok(out)
}
