//! Surrogate-based significance thresholds for `ρ_q` and edge filtering.
//!
//! Each surrogate set shuffles every series independently, which keeps the
//! marginal distributions and destroys all temporal and cross structure. For
//! each `(s, q)` the largest off-diagonal `ρ_q` of every set is recorded and
//! the threshold is `mean + 2·sd` of those maxima (sample sd, `n - 1`).

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::shuffle;
use crate::matrix::fmt_sig;
use crate::panel::SeriesPanel;
use crate::rho::{rho_matrices, RhoMatrix, RhoOptions};
use crate::rng::derive_seed;
use crate::tree::Tree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub s: usize,
    pub q: f64,
    pub tau: f64,
    pub mean_max: f64,
    pub sd_max: f64,
    pub n_sets: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ThresholdTable {
    pub entries: Vec<Threshold>,
}

impl ThresholdTable {
    pub fn get(&self, s: usize, q: f64) -> Option<&Threshold> {
        self.entries.iter().find(|t| t.s == s && t.q == q)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["s", "q", "tau", "mean_max", "sd_max", "n_sets", "seed"])?;
        for t in &self.entries {
            w.write_record([
                t.s.to_string(),
                t.q.to_string(),
                fmt_sig(t.tau, 12),
                fmt_sig(t.mean_max, 12),
                fmt_sig(t.sd_max, 12),
                t.n_sets.to_string(),
                t.seed.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<threshold writer>", e))?;
        Ok(())
    }

    pub fn to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let entries = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<Threshold>, _>>()?;
        Ok(ThresholdTable { entries })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// `(mean, sample sd, mean + 2·sd)` of per-set maxima.
pub fn aggregate_maxima(maxima: &[f64]) -> (f64, f64, f64) {
    let n = maxima.len() as f64;
    let mean = maxima.iter().sum::<f64>() / n;
    let ss: f64 = maxima.iter().map(|m| (m - mean) * (m - mean)).sum();
    let sd = if maxima.len() > 1 {
        (ss / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd, mean + 2.0 * sd)
}

/// Largest off-diagonal entry.
pub fn max_offdiagonal(rho: &RhoMatrix) -> f64 {
    let n = rho.n();
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            best = best.max(rho.get(i, j));
        }
    }
    best
}

/// Threshold table over every `(s, q)` from `n_sets` shuffled surrogates.
/// Set `k` is shuffled with seed `derive_seed(seed, k)`.
pub fn surrogate_thresholds(
    panel: &SeriesPanel,
    scales: &[usize],
    q_values: &[f64],
    n_sets: usize,
    seed: u64,
    order: usize,
) -> Result<ThresholdTable> {
    if n_sets < 2 {
        return Err(Error::invalid("need at least two surrogate sets"));
    }
    if scales.is_empty() || q_values.is_empty() {
        return Err(Error::invalid("empty scale or q grid"));
    }
    // maxima[set][scale][q]
    let maxima: Vec<Vec<Vec<f64>>> = (0..n_sets)
        .into_par_iter()
        .map(|k| {
            let surrogate = shuffle(panel, derive_seed(seed, k as u64));
            scales
                .iter()
                .map(|&s| {
                    let mats =
                        rho_matrices(&surrogate, s, q_values, RhoOptions::with_order(order))?;
                    Ok(mats.iter().map(max_offdiagonal).collect())
                })
                .collect::<Result<Vec<Vec<f64>>>>()
        })
        .collect::<Result<_>>()?;

    let mut entries = Vec::with_capacity(scales.len() * q_values.len());
    for (si, &s) in scales.iter().enumerate() {
        for (qi, &q) in q_values.iter().enumerate() {
            let per_set: Vec<f64> = maxima.iter().map(|m| m[si][qi]).collect();
            let (mean_max, sd_max, tau) = aggregate_maxima(&per_set);
            entries.push(Threshold {
                s,
                q,
                tau,
                mean_max,
                sd_max,
                n_sets,
                seed,
            });
        }
    }
    Ok(ThresholdTable { entries })
}

fn check_labels(tree: &Tree, rho: &RhoMatrix) -> Result<()> {
    if tree.labels != rho.labels() {
        return Err(Error::invalid(
            "tree and correlation matrix have different labels",
        ));
    }
    Ok(())
}

/// Flag every edge with `ρ >= tau` as significant, keeping all edges.
pub fn mark_significance(tree: &Tree, rho: &RhoMatrix, tau: f64) -> Result<Tree> {
    check_labels(tree, rho)?;
    let mut out = tree.clone();
    for e in &mut out.edges {
        e.rho = rho.get(e.a, e.b);
        e.significant = e.rho >= tau;
    }
    Ok(out)
}

/// Drop edges with `ρ < tau` and the nodes they leave isolated.
pub fn filter_tree(tree: &Tree, rho: &RhoMatrix, tau: f64) -> Result<Tree> {
    let marked = mark_significance(tree, rho, tau)?;
    let edges: Vec<_> = marked.edges.into_iter().filter(|e| e.significant).collect();
    let mut active = vec![false; tree.n()];
    for e in &edges {
        active[e.a] = tree.active[e.a];
        active[e.b] = tree.active[e.b];
    }
    Ok(Tree {
        labels: tree.labels.clone(),
        edges,
        active,
        scale: tree.scale,
        q: tree.q,
        tau: Some(tau),
    })
}
