//! Box-wise polynomial detrending and q-order fluctuation functions.
//!
//! A series of length `T` is cut into `2·M_s` boxes of `s` points, `M_s =
//! floor(T/s)`: `M_s` boxes anchored at the start and `M_s` anchored at the
//! end. Inside each box the cumulative sum of the series is detrended by a
//! least-squares polynomial of order `m`; box moments are mean products of
//! the residuals, and the q-order fluctuation function is the signed
//! `q/2`-power mean of those moments over all boxes.
//!
//! Polynomial fits use a basis that is orthonormal on the box abscissae, built
//! once per `(s, m)` by a three-term recurrence on abscissae rescaled to
//! `[-1, 1]`. Residuals are then a projection, never a normal-equation solve.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Order, scales and q values of a detrending request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetrendConfig {
    pub order: usize,
    pub scales: Vec<usize>,
    pub q_values: Vec<f64>,
}

impl Default for DetrendConfig {
    fn default() -> Self {
        DetrendConfig {
            order: 2,
            scales: Vec::new(),
            q_values: Vec::new(),
        }
    }
}

impl DetrendConfig {
    /// Check every scale and q against a series length `len`. Negative q is
    /// accepted only when `allow_negative_q` is set.
    pub fn validate(&self, len: usize, allow_negative_q: bool) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::invalid("no scales requested"));
        }
        if self.q_values.is_empty() {
            return Err(Error::invalid("no q values requested"));
        }
        for &s in &self.scales {
            check_scale(len, s, self.order)?;
        }
        for &q in &self.q_values {
            check_q(q, allow_negative_q)?;
        }
        Ok(())
    }
}

pub(crate) fn check_scale(len: usize, scale: usize, order: usize) -> Result<()> {
    if scale < order + 2 {
        return Err(Error::ScaleTooSmall { scale, order });
    }
    if scale > len {
        return Err(Error::ScaleTooLarge { scale, len });
    }
    Ok(())
}

pub(crate) fn check_q(q: f64, allow_negative: bool) -> Result<()> {
    if !q.is_finite() {
        return Err(Error::invalid(format!("q must be finite, got {q}")));
    }
    if q == 0.0 {
        return Err(Error::ZeroQ);
    }
    if q < 0.0 && !allow_negative {
        return Err(Error::NegativeQ(q));
    }
    Ok(())
}

/// Log a warning when a scale leaves fewer than eight boxes.
pub(crate) fn warn_coarse_scale(len: usize, scale: usize) {
    if scale * 4 > len {
        log::warn!(
            "scale s={scale} leaves {} boxes for T={len}; q-averages will be noisy",
            2 * (len / scale)
        );
    }
}

/// The `2·M_s` boxes of length `s` covering a series of length `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxPartition {
    len: usize,
    scale: usize,
    per_side: usize,
}

/// Partition a series of length `len` into boxes of `scale` points.
pub fn partition(len: usize, scale: usize) -> Result<BoxPartition> {
    if scale == 0 {
        return Err(Error::invalid("scale must be positive"));
    }
    if scale > len {
        return Err(Error::ScaleTooLarge { scale, len });
    }
    Ok(BoxPartition {
        len,
        scale,
        per_side: len / scale,
    })
}

impl BoxPartition {
    pub fn scale(&self) -> usize {
        self.scale
    }

    /// `M_s`, boxes per anchoring direction.
    pub fn per_side(&self) -> usize {
        self.per_side
    }

    /// `2·M_s`.
    pub fn count(&self) -> usize {
        2 * self.per_side
    }

    /// Start offset of box `nu`. Boxes `0..M_s` start at `nu·s`, boxes
    /// `M_s..2M_s` end at `T, T-s, ...`.
    pub fn start(&self, nu: usize) -> usize {
        assert!(nu < self.count(), "box {nu} out of range");
        if nu < self.per_side {
            nu * self.scale
        } else {
            self.len - (nu - self.per_side + 1) * self.scale
        }
    }

    pub fn starts(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.count()).map(|nu| self.start(nu))
    }
}

/// Discrete polynomials of degree `0..=m`, orthonormal on `s` equally spaced
/// points.
#[derive(Debug, Clone)]
pub struct PolyBasis {
    scale: usize,
    order: usize,
    // (m+1) rows of length s
    rows: Vec<Vec<f64>>,
}

impl PolyBasis {
    pub fn new(scale: usize, order: usize) -> Result<Self> {
        if scale < order + 2 {
            return Err(Error::ScaleTooSmall { scale, order });
        }
        let u: Vec<f64> = if scale == 1 {
            vec![0.0]
        } else {
            let half = (scale - 1) as f64 / 2.0;
            (0..scale).map(|i| (i as f64 - half) / half).collect()
        };
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

        // Stieltjes recurrence on monic polynomials, normalized afterwards.
        let mut monic: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
        let mut norms: Vec<f64> = Vec::with_capacity(order + 1);
        monic.push(vec![1.0; scale]);
        norms.push(scale as f64);
        for k in 0..order {
            let pk = &monic[k];
            let alpha = u.iter().zip(pk).map(|(x, p)| x * p * p).sum::<f64>() / norms[k];
            let mut next: Vec<f64> = u.iter().zip(pk).map(|(x, p)| (x - alpha) * p).collect();
            if k > 0 {
                let beta = norms[k] / norms[k - 1];
                for (n, prev) in next.iter_mut().zip(&monic[k - 1]) {
                    *n -= beta * prev;
                }
            }
            let nn = dot(&next, &next);
            monic.push(next);
            norms.push(nn);
        }

        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
        for mut v in monic {
            // one reorthogonalization pass against accepted rows
            for r in &rows {
                let c = dot(&v, r);
                for (x, y) in v.iter_mut().zip(r) {
                    *x -= c * y;
                }
            }
            let norm = dot(&v, &v).sqrt();
            if !(norm > 1e-10) {
                return Err(Error::SingularFit { start: 0, scale });
            }
            v.iter_mut().for_each(|x| *x /= norm);
            rows.push(v);
        }
        Ok(PolyBasis { scale, order, rows })
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Subtract the least-squares polynomial fit from `values` in place.
    pub fn detrend_in_place(&self, values: &mut [f64]) {
        debug_assert_eq!(values.len(), self.scale);
        for row in &self.rows {
            let c: f64 = row.iter().zip(values.iter()).map(|(b, v)| b * v).sum();
            for (v, b) in values.iter_mut().zip(row) {
                *v -= c * b;
            }
        }
    }

    /// Cumulative sum of `segment` minus its polynomial fit.
    ///
    /// Residuals at round-off level relative to the profile (an exactly
    /// polynomial profile) are flushed to zero.
    pub fn residuals_into(&self, segment: &[f64], out: &mut [f64]) {
        let mut acc = 0.0;
        let mut profile_sq = 0.0;
        for (o, &x) in out.iter_mut().zip(segment) {
            acc += x;
            *o = acc;
            profile_sq += acc * acc;
        }
        self.detrend_in_place(out);
        let res_sq: f64 = out.iter().map(|v| v * v).sum();
        let tol = 4.0 * self.scale as f64 * f64::EPSILON;
        if res_sq <= tol * tol * profile_sq {
            out.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// Residuals of the order-`m` detrended profile inside the box
/// `[start, start + s)`.
pub fn detrended_residuals(
    series: &[f64],
    start: usize,
    scale: usize,
    order: usize,
) -> Result<Vec<f64>> {
    if start + scale > series.len() {
        return Err(Error::invalid(format!(
            "box [{start}, {}) outside a series of length {}",
            start + scale,
            series.len()
        )));
    }
    let basis = PolyBasis::new(scale, order).map_err(|e| match e {
        Error::SingularFit { scale, .. } => Error::SingularFit { start, scale },
        other => other,
    })?;
    let mut out = vec![0.0; scale];
    basis.residuals_into(&series[start..start + scale], &mut out);
    Ok(out)
}

/// Covariance and variances of detrended residuals in one box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxMoments {
    pub xy: f64,
    pub xx: f64,
    pub yy: f64,
}

fn mean_product(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

pub fn box_moments(res_x: &[f64], res_y: &[f64]) -> BoxMoments {
    assert_eq!(res_x.len(), res_y.len(), "residual lengths differ");
    BoxMoments {
        xy: mean_product(res_x, res_y),
        xx: mean_product(res_x, res_x),
        yy: mean_product(res_y, res_y),
    }
}

/// One box's contribution `sign(f)·|f|^{q/2}`; exactly `f` at `q = 2`.
#[inline]
pub fn q_term(f: f64, q: f64) -> f64 {
    if q == 2.0 {
        f
    } else if f > 0.0 {
        f.powf(q / 2.0)
    } else if f < 0.0 {
        -(-f).powf(q / 2.0)
    } else {
        0.0
    }
}

/// Signed `q/2`-power mean of box moments.
///
/// For cross moments a zero box contributes zero. For auto moments
/// (`auto = true`) a zero box with `q < 0` diverges and is rejected.
pub fn q_average(moments: &[f64], q: f64, auto: bool) -> Result<f64> {
    if q == 0.0 {
        return Err(Error::ZeroQ);
    }
    let mut sum = 0.0;
    for (index, &f) in moments.iter().enumerate() {
        if auto && q < 0.0 && f == 0.0 {
            return Err(Error::DivergentMoment { q, index });
        }
        sum += q_term(f, q);
    }
    Ok(sum / moments.len() as f64)
}

/// `F^q_XY`, `F^q_XX`, `F^q_YY` at one `(s, q, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluctuationSet {
    pub xy: f64,
    pub xx: f64,
    pub yy: f64,
    pub scale: usize,
    pub q: f64,
    pub order: usize,
}

/// Fluctuation functions of a pair of equal-length series.
pub fn fluctuation(
    x: &[f64],
    y: &[f64],
    scale: usize,
    q: f64,
    order: usize,
) -> Result<FluctuationSet> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "series lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    check_q(q, true)?;
    check_scale(x.len(), scale, order)?;
    let part = partition(x.len(), scale)?;
    let basis = PolyBasis::new(scale, order)?;
    let rx = Residuals::compute(x, &part, &basis);
    let ry = Residuals::compute(y, &part, &basis);
    let cov = box_covariances(&rx, &ry);
    Ok(FluctuationSet {
        xy: q_average(&cov, q, false)?,
        xx: q_average(&rx.box_variances(), q, true)?,
        yy: q_average(&ry.box_variances(), q, true)?,
        scale,
        q,
        order,
    })
}

/// Detrended residuals of every box of one series, stored box after box.
#[derive(Debug, Clone)]
pub struct Residuals {
    scale: usize,
    data: Vec<f64>,
}

impl Residuals {
    pub fn compute(series: &[f64], part: &BoxPartition, basis: &PolyBasis) -> Self {
        let s = part.scale();
        debug_assert_eq!(s, basis.scale());
        let mut data = vec![0.0; part.count() * s];
        for (nu, out) in data.chunks_exact_mut(s).enumerate() {
            let start = part.start(nu);
            basis.residuals_into(&series[start..start + s], out);
        }
        Residuals { scale: s, data }
    }

    pub fn boxes(&self) -> usize {
        self.data.len() / self.scale
    }

    pub fn box_residuals(&self, nu: usize) -> &[f64] {
        &self.data[nu * self.scale..(nu + 1) * self.scale]
    }

    /// `f²_ZZ(s, ν)` for every box.
    pub fn box_variances(&self) -> Vec<f64> {
        self.data
            .chunks_exact(self.scale)
            .map(|r| mean_product(r, r))
            .collect()
    }
}

/// `f²_XY(s, ν)` for every box.
pub fn box_covariances(a: &Residuals, b: &Residuals) -> Vec<f64> {
    assert_eq!(a.scale, b.scale);
    assert_eq!(a.data.len(), b.data.len());
    a.data
        .chunks_exact(a.scale)
        .zip(b.data.chunks_exact(b.scale))
        .map(|(x, y)| mean_product(x, y))
        .collect()
}

/// Write per-box variances of each series as CSV rows
/// `s,q,series,nu,f2,term` for debugging.
pub fn dump_box_variances<W: Write>(
    writer: W,
    labels: &[String],
    residuals: &[Residuals],
    q: f64,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["s", "q", "series", "nu", "f2", "term"])?;
    for (label, res) in labels.iter().zip(residuals) {
        for (nu, f2) in res.box_variances().into_iter().enumerate() {
            w.write_record([
                res.scale.to_string(),
                q.to_string(),
                label.clone(),
                nu.to_string(),
                f2.to_string(),
                q_term(f2, q).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<moment dump>", e))?;
    Ok(())
}
