//! Dense symmetric matrices with labeled rows and columns.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    labels: Vec<String>,
    values: Vec<f64>,
}

impl LabeledMatrix {
    /// `values` is row-major `n × n`.
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n * n {
            return Err(Error::invalid(format!(
                "{} values for a {n}x{n} matrix",
                values.len()
            )));
        }
        Ok(LabeledMatrix { labels, values })
    }

    pub fn from_fn(labels: Vec<String>, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let n = labels.len();
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        LabeledMatrix { labels, values }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.labels.len() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (i + 1..n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.labels.clone(), |i, j| self.get(j, i))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        LabeledMatrix {
            labels: self.labels.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = Vec::with_capacity(self.n() + 1);
        header.push(String::new());
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (i, label) in self.labels.iter().enumerate() {
            let mut row = Vec::with_capacity(self.n() + 1);
            row.push(label.clone());
            row.extend((0..self.n()).map(|j| fmt_sig(self.get(i, j), 12)));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<matrix writer>", e))?;
        Ok(())
    }

    pub fn to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let labels: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_owned).collect();
        let n = labels.len();
        let mut values = Vec::with_capacity(n * n);
        let mut rows = 0;
        for record in rdr.records() {
            let record = record?;
            if rows >= n {
                return Err(Error::invalid("matrix has more rows than labels"));
            }
            if &record[0] != labels[rows].as_str() {
                return Err(Error::invalid(format!(
                    "row {rows} is labeled '{}' but column {rows} is '{}'",
                    &record[0], labels[rows]
                )));
            }
            if record.len() != n + 1 {
                return Err(Error::invalid(format!(
                    "row '{}' has wrong width",
                    &record[0]
                )));
            }
            for cell in record.iter().skip(1) {
                values.push(
                    cell.parse::<f64>()
                        .map_err(|_| Error::invalid(format!("bad matrix entry '{cell}'")))?,
                );
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::invalid(format!("{rows} rows for {n} labels")));
        }
        LabeledMatrix::new(labels, values)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Format with `digits` significant digits, `%g` style.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // the formatter's exponent already accounts for rounding up (9.99.. -> 1e1)
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, e) = sci.split_once('e').expect("scientific format");
    let e: i32 = e.parse().expect("exponent");
    if e < -5 || e >= digits as i32 {
        let m = trim_zeros(mantissa);
        format!("{m}e{e}")
    } else {
        let decimals = (digits as i32 - 1 - e).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
