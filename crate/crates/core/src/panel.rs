//! Period-indexed covariate/response data.
//!
//! A [`Panel`] holds `T` contiguous periods, each a non-empty batch of
//! observations sharing the same covariate dimension. Periods are addressed
//! by their 1-based ordinal; the original period values from a CSV file are
//! kept as labels.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, domain};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Observation {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodBatch {
    pub period: usize,
    pub observations: Vec<Observation>,
}

impl PeriodBatch {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    dim: usize,
    feature_names: Vec<String>,
    periods: Vec<PeriodBatch>,
    labels: Option<Vec<String>>,
}

impl Panel {
    /// Builds a panel from per-period batches (period `j + 1` is `batches[j]`).
    pub fn new(dim: usize, batches: Vec<Vec<Observation>>) -> Result<Self> {
        let names = (1..=dim).map(|i| format!("x{i}")).collect();
        Self::with_metadata(names, batches, None)
    }

    pub fn with_metadata(
        feature_names: Vec<String>,
        batches: Vec<Vec<Observation>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let dim = feature_names.len();
        if batches.is_empty() {
            return Err(Error::NoData);
        }
        if let Some(labels) = &labels {
            if labels.len() != batches.len() {
                return Err(Error::invalid(format!(
                    "{} labels for {} periods",
                    labels.len(),
                    batches.len()
                )));
            }
        }
        let mut periods = Vec::with_capacity(batches.len());
        for (j, observations) in batches.into_iter().enumerate() {
            if observations.is_empty() {
                return Err(Error::invalid(format!("period {} is empty", j + 1)));
            }
            for obs in &observations {
                if obs.x.len() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        found: obs.x.len(),
                    });
                }
                if !obs.y.is_finite() || obs.x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(format!(
                        "non-finite value in period {}",
                        j + 1
                    )));
                }
            }
            periods.push(PeriodBatch {
                period: j + 1,
                observations,
            });
        }
        Ok(Self {
            dim,
            feature_names,
            periods,
            labels,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_periods(&self) -> usize {
        self.periods.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn periods(&self) -> &[PeriodBatch] {
        &self.periods
    }

    /// Batch for 1-based period `t`.
    pub fn period(&self, t: usize) -> &PeriodBatch {
        &self.periods[t - 1]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, t: usize) -> Option<&str> {
        self.labels.as_ref().map(|l| l[t - 1].as_str())
    }

    pub fn total_observations(&self) -> usize {
        self.periods.iter().map(PeriodBatch::len).sum()
    }

    /// Mutable access for callers that perturb responses (e.g. look-ahead tests).
    pub fn period_mut(&mut self, t: usize) -> &mut PeriodBatch {
        &mut self.periods[t - 1]
    }
}

/// Column roles for CSV ingestion. Every other column is a feature, in header order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub period_column: String,
    pub target_column: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            period_column: "period".into(),
            target_column: "y".into(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Panel> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Panel> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let period_col = position(&schema.period_column)?;
    let target_col = position(&schema.target_column)?;
    if period_col == target_col {
        return Err(Error::Schema(
            "period and target columns must differ".into(),
        ));
    }
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| c != period_col && c != target_col)
        .collect();
    let feature_names: Vec<String> = feature_cols
        .iter()
        .map(|&c| headers[c].trim().to_string())
        .collect();

    let parse = |row: usize, col: usize, cell: &str| -> Result<f64> {
        let cell = cell.trim();
        let value: f64 = cell.parse().map_err(|_| Error::Parse {
            row,
            column: headers[col].to_string(),
            message: if cell.is_empty() {
                "missing value".into()
            } else {
                format!("`{cell}` is not a number")
            },
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                row,
                column: headers[col].to_string(),
                message: format!("`{cell}` is not finite"),
            });
        }
        Ok(value)
    };

    let mut rows: Vec<(String, Observation)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let y = parse(row, target_col, &record[target_col])?;
        let x = feature_cols
            .iter()
            .map(|&c| parse(row, c, &record[c]))
            .collect::<Result<Vec<_>>>()?;
        let period = record[period_col].trim().to_string();
        if period.is_empty() {
            return Err(Error::Parse {
                row,
                column: schema.period_column.clone(),
                message: "missing period".into(),
            });
        }
        rows.push((period, Observation { x, y }));
    }
    if rows.is_empty() {
        return Err(Error::NoData);
    }

    // Numeric period values sort numerically; anything else (e.g. "1990-06") lexicographically.
    let numeric: Option<Vec<f64>> = rows.iter().map(|(p, _)| p.parse::<f64>().ok()).collect();
    let mut groups: BTreeMap<PeriodKey, (String, Vec<Observation>)> = BTreeMap::new();
    for (i, (label, obs)) in rows.into_iter().enumerate() {
        let key = match &numeric {
            Some(values) => PeriodKey::Numeric(values[i]),
            None => PeriodKey::Text(label.clone()),
        };
        groups
            .entry(key)
            .or_insert_with(|| (label, Vec::new()))
            .1
            .push(obs);
    }
    let (labels, batches): (Vec<String>, Vec<Vec<Observation>>) = groups.into_values().unzip();
    Panel::with_metadata(feature_names, batches, Some(labels))
}

#[derive(Debug, Clone, PartialEq)]
enum PeriodKey {
    Numeric(f64),
    Text(String),
}

impl Eq for PeriodKey {}

impl PartialOrd for PeriodKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PeriodKey {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (PeriodKey::Numeric(a), PeriodKey::Numeric(b)) => a.total_cmp(b),
            (PeriodKey::Text(a), PeriodKey::Text(b)) => a.cmp(b),
            (PeriodKey::Numeric(_), PeriodKey::Text(_)) => Ordering::Less,
            (PeriodKey::Text(_), PeriodKey::Numeric(_)) => Ordering::Greater,
        }
    }
}

pub fn save_csv(panel: &Panel, path: impl AsRef<Path>, schema: &CsvSchema) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_csv(panel, file, schema)
}

/// Writes `period, features..., target` with the shortest round-trip decimal
/// representation of every value. The period cell is the label when present.
pub fn write_csv<W: Write>(panel: &Panel, writer: W, schema: &CsvSchema) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = Vec::with_capacity(panel.dim + 2);
    header.push(schema.period_column.clone());
    header.extend(panel.feature_names.iter().cloned());
    header.push(schema.target_column.clone());
    wtr.write_record(&header)?;
    for batch in &panel.periods {
        let period = panel
            .label(batch.period)
            .map(str::to_string)
            .unwrap_or_else(|| batch.period.to_string());
        for obs in &batch.observations {
            let mut record = Vec::with_capacity(header.len());
            record.push(period.clone());
            record.extend(obs.x.iter().map(|v| v.to_string()));
            record.push(obs.y.to_string());
            wtr.write_record(&record)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Per-period partition of a panel into training and validation observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPanel {
    pub seed: u64,
    pub train_fraction: f64,
    train_index: Vec<Vec<usize>>,
    validation_index: Vec<Vec<usize>>,
    train: Vec<Vec<Observation>>,
    validation: Vec<Vec<Observation>>,
}

impl SplitPanel {
    pub fn num_periods(&self) -> usize {
        self.train.len()
    }

    /// Training observations of 1-based period `j`.
    pub fn train(&self, j: usize) -> &[Observation] {
        &self.train[j - 1]
    }

    pub fn validation(&self, j: usize) -> &[Observation] {
        &self.validation[j - 1]
    }

    /// Positions (within the period batch) of the training observations, ascending.
    pub fn train_index(&self, j: usize) -> &[usize] {
        &self.train_index[j - 1]
    }

    pub fn validation_index(&self, j: usize) -> &[usize] {
        &self.validation_index[j - 1]
    }

    /// Concatenated training observations of periods `from..=to`.
    pub fn train_window(&self, from: usize, to: usize) -> Vec<Observation> {
        (from..=to)
            .flat_map(|j| self.train(j).iter().cloned())
            .collect()
    }
}

/// Number of training draws for a period of size `b`: `ceil(fraction * b)`
/// capped at `b - 1`. The `1e-9` slack keeps products such as `0.7 * 10`
/// from rounding up past the intended integer.
pub fn train_count(b: usize, fraction: f64) -> usize {
    let m = (fraction * b as f64 - 1e-9).ceil().max(1.0) as usize;
    m.min(b.saturating_sub(1))
}

/// Seeded per-period split. Period `j` draws its training set with a partial
/// Fisher–Yates shuffle on `rng::substream(seed, SPLIT, j)`:
/// for `i in 0..m`, swap position `i` with `random_range(i..b)`; the first
/// `m` positions are the training set. Both sides are stored in ascending
/// position order.
pub fn split(panel: &Panel, train_fraction: f64, seed: u64) -> Result<SplitPanel> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let t_max = panel.num_periods();
    let mut train_index = Vec::with_capacity(t_max);
    let mut validation_index = Vec::with_capacity(t_max);
    let mut train = Vec::with_capacity(t_max);
    let mut validation = Vec::with_capacity(t_max);
    for batch in panel.periods() {
        let b = batch.len();
        if b < 2 {
            return Err(Error::SplitTooSmall {
                period: batch.period,
                size: b,
            });
        }
        let m = train_count(b, train_fraction);
        let mut rng = rng::substream(seed, domain::SPLIT, batch.period as u64);
        let mut idx: Vec<usize> = (0..b).collect();
        for i in 0..m {
            let k = rng.random_range(i..b);
            idx.swap(i, k);
        }
        let mut tr = idx[..m].to_vec();
        let mut va = idx[m..].to_vec();
        tr.sort_unstable();
        va.sort_unstable();
        train.push(tr.iter().map(|&i| batch.observations[i].clone()).collect());
        validation.push(va.iter().map(|&i| batch.observations[i].clone()).collect());
        train_index.push(tr);
        validation_index.push(va);
    }
    Ok(SplitPanel {
        seed,
        train_fraction,
        train_index,
        validation_index,
        train,
        validation,
    })
}
