//! Pearson baseline networks and the normalized scalar product between the
//! Pearson and `ρ_q` coefficient sets.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::aggregate_returns;
use crate::matrix::{fmt_sig, LabeledMatrix};
use crate::panel::SeriesPanel;
use crate::rho::{correlation_distance, rho_matrices, DistanceMatrix, RhoOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct PearsonMatrix {
    pub matrix: LabeledMatrix,
    pub dt: usize,
}

impl PearsonMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn to_distance(&self) -> Result<DistanceMatrix> {
        Ok(DistanceMatrix {
            matrix: correlation_distance(self.matrix.labels(), &self.matrix)?,
            scale: None,
            q: None,
        })
    }
}

/// Product-moment correlation of two equal-length series.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    // (T-1) normalization cancels
    let c = (sxy / (nf - 1.0)) / ((sxx / (nf - 1.0)) * (syy / (nf - 1.0))).sqrt();
    Some(c.clamp(-1.0, 1.0))
}

/// Pearson matrix of the `dt`-step returns obtained by summing blocks of
/// `dt` one-step returns of `panel`.
pub fn pearson_matrix(panel: &SeriesPanel, dt: usize) -> Result<PearsonMatrix> {
    let sampled = aggregate_returns(panel, dt)?;
    let n = sampled.n();
    if n < 2 {
        return Err(Error::invalid("need at least two series"));
    }
    if let Some(i) = (0..n).find(|&i| {
        let s = sampled.get(i);
        s.iter().all(|&v| v == s[0])
    }) {
        return Err(Error::ZeroFluctuation(sampled.labels()[i].clone()));
    }
    let mut values = vec![1.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let c = pearson(sampled.get(i), sampled.get(j))
                .ok_or_else(|| Error::ZeroFluctuation(sampled.labels()[i].clone()))?;
            values[i * n + j] = c;
            values[j * n + i] = c;
        }
    }
    Ok(PearsonMatrix {
        matrix: LabeledMatrix::new(sampled.labels().to_vec(), values)?,
        dt,
    })
}

/// Upper triangle row by row: `(1,2), (1,3), ..., (1,N), (2,3), ...`.
pub fn vectorize_upper(m: &LabeledMatrix) -> Vec<f64> {
    let n = m.n();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(m.get(i, j));
        }
    }
    out
}

/// `a·b / (|a||b|)`.
pub fn scalar_product(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "vector lengths differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Similarity {
    pub dt: usize,
    pub s: usize,
    pub q: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityReport {
    pub entries: Vec<Similarity>,
    pub vector_len: usize,
}

impl SimilarityReport {
    pub fn get(&self, dt: usize, s: usize, q: f64) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.dt == dt && e.s == s && e.q == q)
            .map(|e| e.p)
    }

    /// Rows `(dt, s)`, one column per q.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut qs: Vec<f64> = Vec::new();
        let mut rows: Vec<(usize, usize)> = Vec::new();
        for e in &self.entries {
            if !qs.contains(&e.q) {
                qs.push(e.q);
            }
            if !rows.contains(&(e.dt, e.s)) {
                rows.push((e.dt, e.s));
            }
        }
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["dt".to_owned(), "s".to_owned()];
        header.extend(qs.iter().map(|q| format!("q={q}")));
        w.write_record(&header)?;
        for &(dt, s) in &rows {
            let mut row = vec![dt.to_string(), s.to_string()];
            row.extend(
                qs.iter()
                    .map(|&q| self.get(dt, s, q).map_or(String::new(), |p| fmt_sig(p, 12))),
            );
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<similarity writer>", e))?;
        Ok(())
    }

    pub fn to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// `P(dt, s, q)` over a grid. `panel` holds one-step returns; `ρ_q` always
/// uses them directly while Pearson uses `dt`-aggregated returns.
pub fn similarity(
    panel: &SeriesPanel,
    dts: &[usize],
    scales: &[usize],
    q_values: &[f64],
    order: usize,
) -> Result<SimilarityReport> {
    let pearson_vecs: Vec<Vec<f64>> = dts
        .iter()
        .map(|&dt| Ok(vectorize_upper(&pearson_matrix(panel, dt)?.matrix)))
        .collect::<Result<_>>()?;
    let mut rho_vecs: Vec<(usize, f64, Vec<f64>)> = Vec::new();
    for &s in scales {
        for m in rho_matrices(panel, s, q_values, RhoOptions::with_order(order))? {
            rho_vecs.push((s, m.q, vectorize_upper(&m.matrix)));
        }
    }
    let mut entries = Vec::with_capacity(dts.len() * rho_vecs.len());
    for (&dt, c) in dts.iter().zip(&pearson_vecs) {
        for (s, q, r) in &rho_vecs {
            entries.push(Similarity {
                dt,
                s: *s,
                q: *q,
                p: scalar_product(c, r)?,
            });
        }
    }
    let n = panel.n();
    Ok(SimilarityReport {
        entries,
        vector_len: n * n.saturating_sub(1) / 2,
    })
}
