//! Panels of aligned series and their CSV representation.
//!
//! CSV layout: a header row of labels, one column per series and one row per
//! timestamp. If the first header cell is `timestamp` (or `time`), that column
//! holds integer timestamps in minutes and is not a series.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Record of how a panel was produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub transforms: Vec<String>,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn with_step(&self, step: impl Into<String>, seed: Option<u64>) -> Self {
        let mut out = self.clone();
        out.transforms.push(step.into());
        if seed.is_some() {
            out.seed = seed;
        }
        out
    }
}

/// Raw price panel. All prices must be strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    tickers: Vec<String>,
    prices: Vec<Vec<f64>>,
    timestamps: Option<Vec<i64>>,
}

impl PricePanel {
    pub fn new(
        tickers: Vec<String>,
        prices: Vec<Vec<f64>>,
        timestamps: Option<Vec<i64>>,
    ) -> Result<Self> {
        check_shape(&tickers, &prices)?;
        for (label, series) in tickers.iter().zip(&prices) {
            if let Some((index, &value)) = series
                .iter()
                .enumerate()
                .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
            {
                return Err(Error::NonPositivePrice {
                    label: label.clone(),
                    index,
                    value,
                });
            }
        }
        if let Some(ts) = &timestamps {
            let len = prices.first().map_or(0, Vec::len);
            if ts.len() != len {
                return Err(Error::invalid(format!(
                    "{} timestamps for series of length {len}",
                    ts.len()
                )));
            }
            if ts.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::invalid("timestamps are not monotone"));
            }
        }
        Ok(PricePanel {
            tickers,
            prices,
            timestamps,
        })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn prices(&self) -> &[Vec<f64>] {
        &self.prices
    }

    pub fn timestamps(&self) -> Option<&[i64]> {
        self.timestamps.as_deref()
    }

    pub fn len(&self) -> usize {
        self.prices.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let raw = RawTable::read(reader)?;
        PricePanel::new(raw.labels, raw.columns, raw.timestamps)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// `N` aligned real-valued series of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPanel {
    labels: Vec<String>,
    series: Vec<Vec<f64>>,
    timestamps: Option<Vec<i64>>,
    meta: Provenance,
}

impl SeriesPanel {
    pub fn new(labels: Vec<String>, series: Vec<Vec<f64>>) -> Result<Self> {
        check_shape(&labels, &series)?;
        for (label, s) in labels.iter().zip(&series) {
            if let Some(i) = s.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "series '{label}' has a non-finite value at index {i}"
                )));
            }
        }
        Ok(SeriesPanel {
            labels,
            series,
            timestamps: None,
            meta: Provenance::default(),
        })
    }

    /// Panel with generated labels `S0`, `S1`, ...
    pub fn from_series(series: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (0..series.len()).map(|i| format!("S{i}")).collect();
        Self::new(labels, series)
    }

    pub fn with_timestamps(mut self, timestamps: Option<Vec<i64>>) -> Result<Self> {
        if let Some(ts) = &timestamps {
            if ts.len() != self.len() {
                return Err(Error::invalid(format!(
                    "{} timestamps for series of length {}",
                    ts.len(),
                    self.len()
                )));
            }
        }
        self.timestamps = timestamps;
        Ok(self)
    }

    pub fn with_meta(mut self, meta: Provenance) -> Self {
        self.meta = meta;
        self
    }

    /// Rebuild with the same labels and timestamps but new data.
    pub(crate) fn replace_series(&self, series: Vec<Vec<f64>>, meta: Provenance) -> Self {
        debug_assert_eq!(series.len(), self.series.len());
        SeriesPanel {
            labels: self.labels.clone(),
            series,
            timestamps: self.timestamps.clone(),
            meta,
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn series(&self) -> &[Vec<f64>] {
        &self.series
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.series[i]
    }

    pub fn timestamps(&self) -> Option<&[i64]> {
        self.timestamps.as_deref()
    }

    pub fn meta(&self) -> &Provenance {
        &self.meta
    }

    /// Number of series.
    pub fn n(&self) -> usize {
        self.series.len()
    }

    /// Common series length.
    pub fn len(&self) -> usize {
        self.series.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Keep only the listed series, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut labels = Vec::with_capacity(indices.len());
        let mut series = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n() {
                return Err(Error::invalid(format!("series index {i} out of range")));
            }
            labels.push(self.labels[i].clone());
            series.push(self.series[i].clone());
        }
        Ok(SeriesPanel::new(labels, series)?
            .with_timestamps(self.timestamps.clone())?
            .with_meta(self.meta.clone()))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let raw = RawTable::read(reader)?;
        SeriesPanel::new(raw.labels, raw.columns)?.with_timestamps(raw.timestamps)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = Vec::with_capacity(self.n() + 1);
        if self.timestamps.is_some() {
            header.push("timestamp");
        }
        header.extend(self.labels.iter().map(String::as_str));
        w.write_record(&header)?;
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        for t in 0..self.len() {
            row.clear();
            if let Some(ts) = &self.timestamps {
                row.push(ts[t].to_string());
            }
            row.extend(self.series.iter().map(|s| s[t].to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn check_shape(labels: &[String], series: &[Vec<f64>]) -> Result<()> {
    if labels.len() != series.len() {
        return Err(Error::invalid(format!(
            "{} labels for {} series",
            labels.len(),
            series.len()
        )));
    }
    let mut seen = HashSet::with_capacity(labels.len());
    for label in labels {
        if !seen.insert(label.as_str()) {
            return Err(Error::invalid(format!("duplicate label '{label}'")));
        }
    }
    if let Some(first) = series.first() {
        if let Some((label, s)) = labels
            .iter()
            .zip(series)
            .find(|(_, s)| s.len() != first.len())
        {
            return Err(Error::invalid(format!(
                "series '{label}' has length {} (expected {})",
                s.len(),
                first.len()
            )));
        }
    }
    Ok(())
}

struct RawTable {
    labels: Vec<String>,
    columns: Vec<Vec<f64>>,
    timestamps: Option<Vec<i64>>,
}

impl RawTable {
    fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        let has_ts = header
            .get(0)
            .is_some_and(|h| h.eq_ignore_ascii_case("timestamp") || h.eq_ignore_ascii_case("time"));
        let offset = usize::from(has_ts);
        let labels: Vec<String> = header.iter().skip(offset).map(str::to_owned).collect();
        if labels.is_empty() {
            return Err(Error::invalid("CSV header has no series columns"));
        }
        let mut columns = vec![Vec::new(); labels.len()];
        let mut timestamps = has_ts.then(Vec::new);
        for (row_idx, record) in rdr.records().enumerate() {
            let record = record?;
            let line = row_idx + 2;
            if record.len() != header.len() {
                return Err(Error::invalid(format!(
                    "line {line}: {} cells, expected {}",
                    record.len(),
                    header.len()
                )));
            }
            if let Some(ts) = timestamps.as_mut() {
                let cell = &record[0];
                ts.push(
                    cell.parse::<i64>().map_err(|_| {
                        Error::invalid(format!("line {line}: bad timestamp '{cell}'"))
                    })?,
                );
            }
            for (col, cell) in record.iter().skip(offset).enumerate() {
                if cell.is_empty() {
                    return Err(Error::invalid(format!(
                        "line {line}: missing value for '{}'",
                        labels[col]
                    )));
                }
                let v = cell.parse::<f64>().map_err(|_| {
                    Error::invalid(format!(
                        "line {line}: bad number '{cell}' for '{}'",
                        labels[col]
                    ))
                })?;
                columns[col].push(v);
            }
        }
        Ok(RawTable {
            labels,
            columns,
            timestamps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_timestamps() {
        let text = "timestamp,A,B\n0,1.5,2\n1,1.25,-3e-4\n5,0.1,7\n";
        let panel = SeriesPanel::read_csv(text.as_bytes()).unwrap();
        assert_eq!(panel.labels(), ["A", "B"]);
        assert_eq!(panel.timestamps(), Some(&[0, 1, 5][..]));
        assert_eq!(panel.get(1), [2.0, -3e-4, 7.0]);
        let mut out = Vec::new();
        panel.write_csv(&mut out).unwrap();
        let again = SeriesPanel::read_csv(out.as_slice()).unwrap();
        assert_eq!(again, panel);
    }

    #[test]
    fn missing_cell_is_an_error() {
        let text = "A,B\n1,2\n3,\n";
        let err = SeriesPanel::read_csv(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("missing value"), "{err}");
    }

    #[test]
    fn duplicate_labels_rejected() {
        let err = SeriesPanel::new(vec!["A".into(), "A".into()], vec![vec![1.0], vec![2.0]]);
        assert!(err.is_err());
    }

    #[test]
    fn ragged_series_rejected() {
        let err = SeriesPanel::new(
            vec!["A".into(), "B".into()],
            vec![vec![1.0], vec![2.0, 3.0]],
        );
        assert!(err.is_err());
    }

    #[test]
    fn non_positive_price_reports_index() {
        let err = PricePanel::new(vec!["X".into()], vec![vec![1.0, 2.0, 0.0]], None).unwrap_err();
        match err {
            Error::NonPositivePrice { index, .. } => assert_eq!(index, 2),
            other => panic!("unexpected {other}"),
        }
    }
}
