//! q-dependent detrended cross-correlation matrices, their distance
//! transform, and the triangle-inequality audit.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fluct::{self, box_covariances, partition, q_average, PolyBasis, Residuals};
use crate::matrix::LabeledMatrix;
use crate::panel::SeriesPanel;

/// Overshoots of `|ρ|` beyond 1 up to this size are rounding and get clamped.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

/// How out-of-range coefficients are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RhoMode {
    /// `q > 0` only; `|ρ| > 1 + 1e-12` is an error.
    #[default]
    Standard,
    /// Any `q != 0`; for `q < 0`, `|ρ| > 1` is replaced by `1/ρ`.
    Audit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RhoOptions {
    pub order: usize,
    pub mode: RhoMode,
    /// Reuse per-series `F_ZZ` across pairs. Turning it off recomputes them
    /// per pair, which must give identical bits.
    pub cache: bool,
}

impl Default for RhoOptions {
    fn default() -> Self {
        RhoOptions {
            order: 2,
            mode: RhoMode::Standard,
            cache: true,
        }
    }
}

impl RhoOptions {
    pub fn with_order(order: usize) -> Self {
        RhoOptions {
            order,
            ..Default::default()
        }
    }

    pub fn audit(order: usize) -> Self {
        RhoOptions {
            order,
            mode: RhoMode::Audit,
            cache: true,
        }
    }
}

fn finish_rho(
    fxy: f64,
    fxx: f64,
    fyy: f64,
    q: f64,
    mode: RhoMode,
    a: &str,
    b: &str,
) -> Result<f64> {
    if !(fxx > 0.0) {
        return Err(Error::ZeroFluctuation(a.to_owned()));
    }
    if !(fyy > 0.0) {
        return Err(Error::ZeroFluctuation(b.to_owned()));
    }
    let rho = fxy / (fxx * fyy).sqrt();
    if !rho.is_finite() {
        return Err(Error::OutOfRange {
            a: a.to_owned(),
            b: b.to_owned(),
            value: rho,
        });
    }
    if q < 0.0 && mode == RhoMode::Audit {
        return Ok(if rho.abs() > 1.0 { 1.0 / rho } else { rho });
    }
    if rho.abs() > 1.0 + CLAMP_TOLERANCE {
        return Err(Error::OutOfRange {
            a: a.to_owned(),
            b: b.to_owned(),
            value: rho,
        });
    }
    Ok(rho.clamp(-1.0, 1.0))
}

/// `ρ_q(s)` of two series (`q > 0`).
pub fn rho_q(x: &[f64], y: &[f64], scale: usize, q: f64, order: usize) -> Result<f64> {
    fluct::check_q(q, false)?;
    let f = fluct::fluctuation(x, y, scale, q, order)?;
    finish_rho(f.xy, f.xx, f.yy, q, RhoMode::Standard, "x", "y")
}

/// `ρ_q(s)` allowing `q < 0`, with out-of-range values inverted.
pub fn rho_q_audit(x: &[f64], y: &[f64], scale: usize, q: f64, order: usize) -> Result<f64> {
    let f = fluct::fluctuation(x, y, scale, q, order)?;
    finish_rho(f.xy, f.xx, f.yy, q, RhoMode::Audit, "x", "y")
}

/// Symmetric matrix of `ρ_q(s)` with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoMatrix {
    pub matrix: LabeledMatrix,
    pub scale: usize,
    pub q: f64,
    pub order: usize,
}

impl RhoMatrix {
    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn labels(&self) -> &[String] {
        self.matrix.labels()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }
}

/// `ρ_q(s)` for every pair of the panel.
pub fn rho_matrix(panel: &SeriesPanel, scale: usize, q: f64, order: usize) -> Result<RhoMatrix> {
    let mut out = rho_matrices(panel, scale, &[q], RhoOptions::with_order(order))?;
    Ok(out.pop().expect("one q requested"))
}

/// Per-series detrended residuals at one scale.
pub struct ScaleResiduals {
    scale: usize,
    residuals: Vec<Residuals>,
    variances: Vec<Vec<f64>>,
}

impl ScaleResiduals {
    pub fn compute(panel: &SeriesPanel, scale: usize, order: usize) -> Result<Self> {
        fluct::check_scale(panel.len(), scale, order)?;
        fluct::warn_coarse_scale(panel.len(), scale);
        let part = partition(panel.len(), scale)?;
        let basis = PolyBasis::new(scale, order)?;
        let residuals: Vec<Residuals> = panel
            .series()
            .par_iter()
            .map(|s| Residuals::compute(s, &part, &basis))
            .collect();
        let variances = residuals.iter().map(Residuals::box_variances).collect();
        Ok(ScaleResiduals {
            scale,
            residuals,
            variances,
        })
    }

    pub fn residuals(&self) -> &[Residuals] {
        &self.residuals
    }
}

/// `ρ_q(s)` matrices for several q at one scale, sharing the detrending work.
pub fn rho_matrices(
    panel: &SeriesPanel,
    scale: usize,
    q_values: &[f64],
    opts: RhoOptions,
) -> Result<Vec<RhoMatrix>> {
    let residuals = ScaleResiduals::compute(panel, scale, opts.order)?;
    rho_matrices_from(panel.labels(), &residuals, q_values, opts)
}

pub fn rho_matrices_from(
    labels: &[String],
    res: &ScaleResiduals,
    q_values: &[f64],
    opts: RhoOptions,
) -> Result<Vec<RhoMatrix>> {
    let n = labels.len();
    if n < 2 {
        return Err(Error::invalid("need at least two series"));
    }
    if q_values.is_empty() {
        return Err(Error::invalid("no q values requested"));
    }
    for &q in q_values {
        fluct::check_q(q, opts.mode == RhoMode::Audit)?;
    }

    // F_ZZ per series and q
    let auto: Vec<Vec<f64>> = res
        .variances
        .iter()
        .zip(labels)
        .map(|(v, label)| {
            q_values
                .iter()
                .map(|&q| q_average(v, q, true))
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| Error::Pair {
                    context: format!("series '{label}'"),
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let values: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let cov = box_covariances(&res.residuals[i], &res.residuals[j]);
            q_values
                .iter()
                .enumerate()
                .map(|(k, &q)| {
                    let fxy = q_average(&cov, q, false)?;
                    let (fxx, fyy) = if opts.cache {
                        (auto[i][k], auto[j][k])
                    } else {
                        (
                            q_average(&res.residuals[i].box_variances(), q, true)?,
                            q_average(&res.residuals[j].box_variances(), q, true)?,
                        )
                    };
                    finish_rho(fxy, fxx, fyy, q, opts.mode, &labels[i], &labels[j])
                })
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| e.for_pair(&labels[i], &labels[j]))
        })
        .collect::<Result<_>>()?;

    Ok(q_values
        .iter()
        .enumerate()
        .map(|(k, &q)| {
            let mut m = vec![1.0; n * n];
            for (&(i, j), v) in pairs.iter().zip(&values) {
                m[i * n + j] = v[k];
                m[j * n + i] = v[k];
            }
            RhoMatrix {
                matrix: LabeledMatrix::new(labels.to_vec(), m).expect("square"),
                scale: res.scale,
                q,
                order: opts.order,
            }
        })
        .collect())
}

/// Symmetric matrix of distances `sqrt(2(1 - ρ))` with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub matrix: LabeledMatrix,
    pub scale: Option<usize>,
    pub q: Option<f64>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn labels(&self) -> &[String] {
        self.matrix.labels()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    /// Wrap an arbitrary symmetric matrix of non-negative, finite distances.
    pub fn from_matrix(matrix: LabeledMatrix) -> Result<Self> {
        let n = matrix.n();
        for i in 0..n {
            for j in 0..n {
                let d = matrix.get(i, j);
                if !d.is_finite() {
                    return Err(Error::NonFiniteDistance {
                        a: matrix.labels()[i].clone(),
                        b: matrix.labels()[j].clone(),
                    });
                }
                if d < 0.0 {
                    return Err(Error::invalid(format!("negative distance {d}")));
                }
            }
        }
        if !matrix.is_symmetric() {
            return Err(Error::invalid("distance matrix is not symmetric"));
        }
        Ok(DistanceMatrix {
            matrix,
            scale: None,
            q: None,
        })
    }
}

/// Correlation to distance, rejecting entries above `1 + 1e-12`.
pub fn correlation_distance(labels: &[String], corr: &LabeledMatrix) -> Result<LabeledMatrix> {
    let n = corr.n();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let c = corr.get(i, j);
            if !(c.abs() <= 1.0 + CLAMP_TOLERANCE) {
                return Err(Error::OutOfRange {
                    a: labels[i].clone(),
                    b: labels[j].clone(),
                    value: c,
                });
            }
            values[i * n + j] = (2.0 * (1.0 - c.clamp(-1.0, 1.0))).sqrt();
        }
    }
    LabeledMatrix::new(labels.to_vec(), values)
}

pub fn to_distance(rho: &RhoMatrix) -> Result<DistanceMatrix> {
    Ok(DistanceMatrix {
        matrix: correlation_distance(rho.labels(), &rho.matrix)?,
        scale: Some(rho.scale),
        q: Some(rho.q),
    })
}

/// Triangle-inequality violations over all unordered triples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriangleAuditReport {
    pub triples_checked: u64,
    pub violations: u64,
    /// Most negative `d_XY + d_YZ - d_XZ` over all orientations.
    pub worst_slack: f64,
}

/// Slack below `-AUDIT_EPS` counts as a violation.
pub const AUDIT_EPS: f64 = 1e-12;

pub fn triangle_audit(d: &DistanceMatrix) -> Result<TriangleAuditReport> {
    let n = d.n();
    if n < 3 {
        return Err(Error::invalid("triangle audit needs at least three nodes"));
    }
    let per_i: Vec<(u64, u64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut checked = 0u64;
            let mut bad = 0u64;
            let mut worst = f64::INFINITY;
            for j in i + 1..n {
                let dij = d.get(i, j);
                for k in j + 1..n {
                    let djk = d.get(j, k);
                    let dik = d.get(i, k);
                    let slack = (dij + djk - dik).min(dij + dik - djk).min(dik + djk - dij);
                    checked += 1;
                    if slack < -AUDIT_EPS {
                        bad += 1;
                    }
                    worst = worst.min(slack);
                }
            }
            (checked, bad, worst)
        })
        .collect();
    let (triples_checked, violations, worst_slack) = per_i
        .into_iter()
        .fold((0, 0, f64::INFINITY), |(c, v, w), (c2, v2, w2)| {
            (c + c2, v + v2, w.min(w2))
        });
    Ok(TriangleAuditReport {
        triples_checked,
        violations,
        worst_slack,
    })
}
