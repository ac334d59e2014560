//! Synthetic panels: ARFIMA(0, d, 0) long-memory series and correlated
//! Gaussian pairs.

use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::rank_remap;
use crate::panel::{Provenance, SeriesPanel};
use crate::rng;

pub const DEFAULT_TRUNCATION: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArfimaParams {
    pub d: f64,
    pub len: usize,
    /// Number of MA weights after `a_0`; also the discarded burn-in.
    pub truncation: usize,
    pub seed: u64,
}

impl ArfimaParams {
    pub fn new(d: f64, len: usize, seed: u64) -> Self {
        ArfimaParams {
            d,
            len,
            truncation: DEFAULT_TRUNCATION,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d.abs() < 0.5) {
            return Err(Error::invalid(format!(
                "ARFIMA d must satisfy |d| < 0.5, got {}",
                self.d
            )));
        }
        if self.truncation < 1 {
            return Err(Error::invalid("ARFIMA truncation must be at least 1"));
        }
        if self.len == 0 {
            return Err(Error::invalid("series length must be positive"));
        }
        Ok(())
    }
}

/// MA(∞) weights of `(1 - B)^{-d}`: `a_0 = 1`, `a_j = a_{j-1}(j - 1 + d)/j`.
pub fn arfima_weights(d: f64, truncation: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(truncation + 1);
    w.push(1.0);
    for j in 1..=truncation {
        let prev = w[j - 1];
        w.push(prev * (j as f64 - 1.0 + d) / j as f64);
    }
    w
}

struct Convolver {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel: Vec<Complex<f64>>,
}

impl Convolver {
    fn new(kernel: &[f64], signal_len: usize) -> Self {
        let size = (signal_len + kernel.len() - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut k: Vec<Complex<f64>> = kernel.iter().map(|&v| Complex::new(v, 0.0)).collect();
        k.resize(size, Complex::new(0.0, 0.0));
        forward.process(&mut k);
        Convolver {
            size,
            forward,
            inverse,
            kernel: k,
        }
    }

    /// Full linear convolution, first `take` samples.
    fn apply(&self, signal: &[f64], take: usize) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = signal.iter().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(self.size, Complex::new(0.0, 0.0));
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel) {
            *b *= k;
        }
        self.inverse.process(&mut buf);
        let norm = self.size as f64;
        buf[..take].iter().map(|c| c.re / norm).collect()
    }
}

/// `n` independent ARFIMA(0, d, 0) series. Series `i` draws its innovations
/// from stream `(seed, i)`.
pub fn arfima_panel(n: usize, params: &ArfimaParams) -> Result<SeriesPanel> {
    params.validate()?;
    let k = params.truncation;
    let total = params.len + k;
    let weights = arfima_weights(params.d, k);
    let convolver = (params.d != 0.0).then(|| Convolver::new(&weights, total));
    let series: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(params.seed, i as u64);
            let eps: Vec<f64> = (0..total)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            match &convolver {
                None => eps[k..].to_vec(),
                Some(c) => c.apply(&eps, total)[k..].to_vec(),
            }
        })
        .collect();
    let labels = (0..n).map(|i| format!("A{i}")).collect();
    let meta = Provenance::default().with_step(
        format!(
            "arfima(d={},T={},K={})",
            params.d, params.len, params.truncation
        ),
        Some(params.seed),
    );
    Ok(SeriesPanel::new(labels, series)?.with_meta(meta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedPairParams {
    pub gamma: f64,
    pub len: usize,
    pub seed: u64,
}

impl CorrelatedPairParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid(format!(
                "gamma must be in [0, 1], got {}",
                self.gamma
            )));
        }
        if self.len == 0 {
            return Err(Error::invalid("series length must be positive"));
        }
        Ok(())
    }
}

/// Pairs `X{k}`, `Y{k}` with `y = γx + sqrt(1-γ²)η`. The panel holds
/// `X0, Y0, X1, Y1, ...`.
pub fn correlated_pair_panel(n_pairs: usize, params: &CorrelatedPairParams) -> Result<SeriesPanel> {
    params.validate()?;
    let g = params.gamma;
    let h = (1.0 - g * g).sqrt();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..n_pairs)
        .into_par_iter()
        .map(|k| {
            let mut rx = rng::stream(params.seed, 2 * k as u64);
            let mut ry = rng::stream(params.seed, 2 * k as u64 + 1);
            let x: Vec<f64> = (0..params.len)
                .map(|_| StandardNormal.sample(&mut rx))
                .collect();
            let y = x
                .iter()
                .map(|&xv| {
                    let eta: f64 = StandardNormal.sample(&mut ry);
                    g * xv + h * eta
                })
                .collect();
            (x, y)
        })
        .collect();
    let mut labels = Vec::with_capacity(2 * n_pairs);
    let mut series = Vec::with_capacity(2 * n_pairs);
    for (k, (x, y)) in pairs.into_iter().enumerate() {
        labels.push(format!("X{k}"));
        labels.push(format!("Y{k}"));
        series.push(x);
        series.push(y);
    }
    let meta = Provenance::default().with_step(
        format!("pairs(gamma={},T={})", params.gamma, params.len),
        Some(params.seed),
    );
    Ok(SeriesPanel::new(labels, series)?.with_meta(meta))
}

/// Keep every series' ranks but replace its values by a Student-t sample
/// with `dof` degrees of freedom.
pub fn student_t_marginals(panel: &SeriesPanel, dof: f64, seed: u64) -> Result<SeriesPanel> {
    let dist = StudentT::new(dof)
        .map_err(|e| Error::invalid(format!("bad Student-t degrees of freedom {dof}: {e}")))?;
    let series = panel
        .series()
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = rng::stream(seed, i as u64);
            let sample: Vec<f64> = (0..s.len()).map(|_| dist.sample(&mut rng)).collect();
            rank_remap(s, sample)
        })
        .collect();
    Ok(panel.replace_series(
        series,
        panel
            .meta()
            .with_step(format!("student-t(dof={dof},seed={seed})"), Some(seed)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kurtosis(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        m4 / (m2 * m2)
    }

    fn pearson(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn weights_by_hand() {
        let w = arfima_weights(0.4, 3);
        assert_eq!(w[0], 1.0);
        assert!((w[1] - 0.4).abs() < 1e-15);
        assert!((w[2] - 0.28).abs() < 1e-15);
        assert!(arfima_weights(0.0, 5)[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weights_decay_slowly_and_stay_positive() {
        let w = arfima_weights(0.3, 10_000);
        assert!(w.iter().all(|&v| v > 0.0));
        for j in 1..w.len() {
            let r = w[j] / w[j - 1];
            assert!(r < 1.0);
        }
        assert!(w[10_000] / w[9_999] > 0.9999);
        assert!(w[10_000] < 1e-3);
    }

    #[test]
    fn d_out_of_range_rejected() {
        assert!(arfima_panel(1, &ArfimaParams::new(0.5, 100, 1)).is_err());
        assert!(arfima_panel(1, &ArfimaParams::new(-0.7, 100, 1)).is_err());
    }

    #[test]
    fn d_zero_is_iid_gaussian() {
        let p = arfima_panel(1, &ArfimaParams::new(0.0, 100_000, 3)).unwrap();
        let k = kurtosis(p.get(0));
        assert!((k - 3.0).abs() < 0.2, "kurtosis {k}");
    }

    #[test]
    fn fft_matches_direct_convolution() {
        let params = ArfimaParams {
            d: 0.35,
            len: 300,
            truncation: 50,
            seed: 9,
        };
        let p = arfima_panel(2, &params).unwrap();
        let w = arfima_weights(0.35, 50);
        for i in 0..2 {
            let mut rng = rng::stream(9, i as u64);
            let eps: Vec<f64> = (0..350).map(|_| StandardNormal.sample(&mut rng)).collect();
            for t in 0..300 {
                let direct: f64 = (0..=50).map(|j| w[j] * eps[t + 50 - j]).sum();
                assert!((p.get(i)[t] - direct).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn panels_reproducible() {
        let params = ArfimaParams {
            d: 0.2,
            len: 500,
            truncation: 100,
            seed: 4,
        };
        assert_eq!(
            arfima_panel(3, &params).unwrap(),
            arfima_panel(3, &params).unwrap()
        );
    }

    #[test]
    fn gamma_one_duplicates() {
        let p = correlated_pair_panel(
            2,
            &CorrelatedPairParams {
                gamma: 1.0,
                len: 100,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(p.get(0), p.get(1));
        assert_eq!(p.labels()[3], "Y1");
    }

    #[test]
    fn gamma_controls_correlation() {
        let p = correlated_pair_panel(
            1,
            &CorrelatedPairParams {
                gamma: 0.7,
                len: 100_000,
                seed: 2,
            },
        )
        .unwrap();
        let c = pearson(p.get(0), p.get(1));
        assert!((c - 0.7).abs() < 0.02, "{c}");
        let q = correlated_pair_panel(
            1,
            &CorrelatedPairParams {
                gamma: 0.0,
                len: 100_000,
                seed: 2,
            },
        )
        .unwrap();
        assert!(pearson(q.get(0), q.get(1)).abs() < 0.02);
        assert!(correlated_pair_panel(
            1,
            &CorrelatedPairParams {
                gamma: 1.5,
                len: 10,
                seed: 0
            }
        )
        .is_err());
    }

    #[test]
    fn student_t_keeps_ranks_and_fattens_tails() {
        let p = arfima_panel(1, &ArfimaParams::new(0.0, 50_000, 5)).unwrap();
        let t = student_t_marginals(&p, 3.0, 6).unwrap();
        assert_eq!(
            crate::ingest::ascending_order(p.get(0)),
            crate::ingest::ascending_order(t.get(0))
        );
        assert!(kurtosis(t.get(0)) > 5.0);
    }
}
