//! `cycle,value` CSV ingestion.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use latentcdf::CyclePanel;

use crate::error::{CliError, Result};

/// Observations grouped by cycle label, in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPanel {
    pub labels: Vec<String>,
    pub cycles: Vec<Vec<f64>>,
}

impl RawPanel {
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    /// Panel in estimation form; with `demean` each cycle is centred on its
    /// own mean.
    pub fn to_panel(&self, demean: bool) -> Result<CyclePanel> {
        let panel = CyclePanel::new(self.cycles.clone())?.with_labels(self.labels.clone())?;
        Ok(if demean { panel.demeaned() } else { panel })
    }
}

pub fn read_panel(path: &Path) -> Result<RawPanel> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Input { path: path.to_path_buf(), message: e.to_string() })?;
    parse_panel(file, path)
}

/// Cycles appear in order of first occurrence, except that labels which all
/// parse as `YYYY-MM-DD` dates are sorted chronologically.
pub fn parse_panel<R: Read>(reader: R, path: &Path) -> Result<RawPanel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let row_err = |line: u64, message: String| CliError::Row { path: path.to_path_buf(), line, message };
    let headers = rdr.headers().map_err(|e| row_err(1, e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "cycle" || &headers[1] != "value" {
        return Err(row_err(1, format!("expected header `cycle,value`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }

    let mut index: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut cycles: Vec<Vec<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            row_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(row_err(line, format!("expected 2 fields, found {}", record.len())));
        }
        let label = record[0].to_string();
        if label.is_empty() {
            return Err(row_err(line, "empty cycle label".into()));
        }
        let value: f64 = record[1].parse().map_err(|_| row_err(line, format!("value `{}` is not a number", &record[1])))?;
        if !value.is_finite() {
            return Err(row_err(line, format!("value `{}` is not finite", &record[1])));
        }
        let slot = *index.entry(label.clone()).or_insert_with(|| {
            labels.push(label);
            cycles.push(Vec::new());
            cycles.len() - 1
        });
        cycles[slot].push(value);
    }
    if cycles.is_empty() {
        return Err(CliError::Input { path: path.to_path_buf(), message: "no observations".into() });
    }

    let dates: Option<Vec<NaiveDate>> =
        labels.iter().map(|l| NaiveDate::parse_from_str(l, "%Y-%m-%d").ok()).collect();
    if let Some(dates) = dates {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.sort_by_key(|&i| dates[i]);
        labels = order.iter().map(|&i| labels[i].clone()).collect();
        cycles = order.iter().map(|&i| std::mem::take(&mut cycles[i])).collect();
    }
    Ok(RawPanel { labels, cycles })
}
