//! CSV emission and parsing for score tables, ROC curves, and selection
//! traces. Every file written here re-parses under the loaders in this module.

use std::path::Path;

use crate::ensemble::{ComponentKey, ForwardTrace, GreedyTrace, ScoreTable};
use crate::error::{Error, Result};
use crate::metrics::RocCurve;
use crate::pipeline::manifest::Split;

/// Score rows as written to scores.csv: per-sample split/label bookkeeping,
/// per-component probabilities, and optionally a fused column.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRows {
    pub sample_ids: Vec<String>,
    pub splits: Vec<Option<Split>>,
    pub labels: Vec<Option<bool>>,
    pub components: Vec<ComponentKey>,
    /// Row-major `[sample][component]`.
    pub scores: Vec<Vec<f64>>,
    pub fused: Option<Vec<f64>>,
}

impl ScoreRows {
    /// View as a [`ScoreTable`]; labels attach only when every row has one.
    pub fn to_table(&self) -> Result<ScoreTable> {
        let labels = if self.labels.iter().all(|l| l.is_some()) {
            Some(self.labels.iter().map(|l| l.unwrap()).collect())
        } else {
            None
        };
        ScoreTable::new(
            self.sample_ids.clone(),
            self.components.clone(),
            self.scores.clone(),
            labels,
        )
    }
}

pub fn save_score_csv(path: &Path, rows: &ScoreRows) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut header = vec!["sample_id".to_string(), "split".to_string(), "label".to_string()];
    header.extend(rows.components.iter().map(|c| c.id()));
    if rows.fused.is_some() {
        header.push("fused".to_string());
    }
    wtr.write_record(&header).map_err(|e| csv_io(path, e))?;
    for i in 0..rows.sample_ids.len() {
        let mut record = vec![
            rows.sample_ids[i].clone(),
            rows.splits[i].map(|s| s.to_string()).unwrap_or_default(),
            rows.labels[i].map(|l| if l { "1" } else { "0" }.to_string()).unwrap_or_default(),
        ];
        record.extend(rows.scores[i].iter().map(|v| v.to_string()));
        if let Some(fused) = &rows.fused {
            record.push(fused[i].to_string());
        }
        wtr.write_record(&record).map_err(|e| csv_io(path, e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

pub fn load_score_csv(path: &Path) -> Result<ScoreRows> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_io(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_col = col("sample_id")
        .ok_or_else(|| Error::validation(format!("{}: missing sample_id column", path.display())))?;
    let split_col = col("split");
    let label_col = col("label");
    let fused_col = col("fused");
    let mut component_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if Some(i) != split_col && Some(i) != label_col && Some(i) != fused_col && i != id_col {
            component_cols.push((i, ComponentKey::parse(h)?));
        }
    }
    if component_cols.is_empty() && fused_col.is_none() {
        return Err(Error::validation(format!(
            "{}: no component or fused columns",
            path.display()
        )));
    }

    let mut rows = ScoreRows {
        sample_ids: Vec::new(),
        splits: Vec::new(),
        labels: Vec::new(),
        components: component_cols.iter().map(|(_, k)| k.clone()).collect(),
        scores: Vec::new(),
        fused: fused_col.map(|_| Vec::new()),
    };
    for record in reader.records() {
        let record = record.map_err(|e| csv_io(path, e))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let parse_err =
            |reason: String| Error::Parse { path: path.to_path_buf(), line, reason };
        let get = |i: usize| record.get(i).unwrap_or("");
        rows.sample_ids.push(get(id_col).to_string());
        rows.splits.push(match split_col.map(get) {
            None | Some("") => None,
            Some(s) => Some(s.parse().map_err(parse_err)?),
        });
        rows.labels.push(match label_col.map(get) {
            None | Some("") => None,
            Some("0") => Some(false),
            Some("1") => Some(true),
            Some(other) => return Err(parse_err(format!("label must be 0 or 1 (got `{other}`)"))),
        });
        let mut score_row = Vec::with_capacity(component_cols.len());
        for (i, key) in &component_cols {
            let v: f64 = get(*i)
                .parse()
                .map_err(|_| parse_err(format!("bad score for {}", key.id())))?;
            score_row.push(v);
        }
        rows.scores.push(score_row);
        if let (Some(i), Some(fused)) = (fused_col, rows.fused.as_mut()) {
            let v: f64 = get(i).parse().map_err(|_| parse_err("bad fused score".into()))?;
            fused.push(v);
        }
    }
    Ok(rows)
}

pub fn save_roc_csv(path: &Path, curve: &RocCurve) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    wtr.write_record(["threshold", "fpr", "tpr"]).map_err(|e| csv_io(path, e))?;
    for i in 0..curve.thresholds.len() {
        wtr.write_record([
            curve.thresholds[i].to_string(),
            curve.fpr[i].to_string(),
            curve.tpr[i].to_string(),
        ])
        .map_err(|e| csv_io(path, e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

pub fn load_roc_csv(path: &Path) -> Result<RocCurve> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut curve = RocCurve { thresholds: Vec::new(), tpr: Vec::new(), fpr: Vec::new() };
    for record in reader.records() {
        let record = record.map_err(|e| csv_io(path, e))?;
        let num = |i: usize| -> Result<f64> {
            record
                .get(i)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::validation(format!("{}: bad number", path.display())))
        };
        curve.thresholds.push(num(0)?);
        curve.fpr.push(num(1)?);
        curve.tpr.push(num(2)?);
    }
    Ok(curve)
}

/// Greedy trace: one row per ranked component with individual and cumulative
/// AP columns.
pub fn save_greedy_csv(path: &Path, trace: &GreedyTrace) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    wtr.write_record(["context", "feature", "individual_ap", "cumulative_ap"])
        .map_err(|e| csv_io(path, e))?;
    for step in &trace.steps {
        wtr.write_record([
            step.component.context.clone(),
            step.component.feature.clone(),
            step.individual_ap.to_string(),
            step.cumulative_ap.to_string(),
        ])
        .map_err(|e| csv_io(path, e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

/// Forward trace: one row per component, one AP column per iteration, empty
/// once the component has been absorbed into the ensemble.
pub fn save_forward_csv(
    path: &Path,
    trace: &ForwardTrace,
    components: &[ComponentKey],
) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut header = vec!["context".to_string(), "feature".to_string()];
    header.extend((1..=trace.iterations.len()).map(|i| format!("iter_{i}")));
    wtr.write_record(&header).map_err(|e| csv_io(path, e))?;
    for (idx, key) in components.iter().enumerate() {
        let mut record = vec![key.context.clone(), key.feature.clone()];
        for iteration in &trace.iterations {
            let cell = iteration
                .candidate_ap
                .iter()
                .find(|(c, _)| *c == idx)
                .map(|(_, ap)| ap.to_string())
                .unwrap_or_default();
            record.push(cell);
        }
        wtr.write_record(&record).map_err(|e| csv_io(path, e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

/// Re-parse an emitted greedy trace. The recovered `selected` prefix indexes
/// the ranked rows of the trace itself (the file does not carry the original
/// table's column order).
pub fn load_greedy_csv(path: &Path) -> Result<GreedyTrace> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut steps = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_io(path, e))?;
        let get = |i: usize| record.get(i).unwrap_or("").to_string();
        let num = |i: usize| -> Result<f64> {
            record
                .get(i)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::validation(format!("{}: bad number", path.display())))
        };
        steps.push(crate::ensemble::GreedyStep {
            component: ComponentKey::new(get(0), get(1)),
            individual_ap: num(2)?,
            cumulative_ap: num(3)?,
        });
    }
    // the selected prefix is recoverable from the cumulative column
    let mut best = f64::NEG_INFINITY;
    let mut best_len = 0;
    for (i, s) in steps.iter().enumerate() {
        if s.cumulative_ap > best {
            best = s.cumulative_ap;
            best_len = i + 1;
        }
    }
    Ok(GreedyTrace { selected: (0..best_len).collect(), steps })
}

/// Parse a forward trace back into per-iteration candidate evaluations.
pub fn load_forward_csv(path: &Path) -> Result<Vec<(ComponentKey, Vec<Option<f64>>)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let iterations = reader.headers().map_err(|e| csv_io(path, e))?.len() - 2;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_io(path, e))?;
        let key = ComponentKey::new(
            record.get(0).unwrap_or("").to_string(),
            record.get(1).unwrap_or("").to_string(),
        );
        let mut cells = Vec::with_capacity(iterations);
        for i in 0..iterations {
            let raw = record.get(2 + i).unwrap_or("");
            cells.push(if raw.is_empty() {
                None
            } else {
                Some(raw.parse().map_err(|_| {
                    Error::validation(format!("{}: bad number", path.display()))
                })?)
            });
        }
        rows.push((key, cells));
    }
    Ok(rows)
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}
