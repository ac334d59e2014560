//! Returns and the randomizing transforms applied to return panels.
//!
//! Every transform is a pure function of `(panel, seed)`. Series `i` draws
//! from its own stream keyed by `(seed, i)`, so output does not depend on the
//! order in which series are processed.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{PricePanel, SeriesPanel};
use crate::rng;

/// Options for [`log_returns_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ReturnOptions {
    /// Drop a return when its endpoints are more than this many minutes apart
    /// (needs timestamps). `None` concatenates sessions.
    pub max_gap: Option<i64>,
}

/// Non-overlapping log-returns `ln p(t+dt) - ln p(t)` at `t = 0, dt, 2dt, ...`.
pub fn log_returns(prices: &PricePanel, dt: usize) -> Result<SeriesPanel> {
    log_returns_with(prices, dt, ReturnOptions::default())
}

pub fn log_returns_with(
    prices: &PricePanel,
    dt: usize,
    opts: ReturnOptions,
) -> Result<SeriesPanel> {
    let len = prices.len();
    if dt == 0 {
        return Err(Error::invalid("dt must be positive"));
    }
    if dt >= len {
        return Err(Error::invalid(format!(
            "dt={dt} is not smaller than the series length {len}"
        )));
    }
    let count = (len - 1) / dt;
    let starts: Vec<usize> = match (opts.max_gap, prices.timestamps()) {
        (Some(gap), Some(ts)) => (0..count)
            .map(|k| k * dt)
            .filter(|&t| ts[t + dt] - ts[t] <= gap)
            .collect(),
        (Some(_), None) => {
            return Err(Error::invalid("dropping gap returns requires timestamps"));
        }
        (None, _) => (0..count).map(|k| k * dt).collect(),
    };
    let series = prices
        .prices()
        .iter()
        .map(|p| starts.iter().map(|&t| p[t + dt].ln() - p[t].ln()).collect())
        .collect();
    let timestamps = prices
        .timestamps()
        .map(|ts| starts.iter().map(|&t| ts[t]).collect());
    let meta = crate::panel::Provenance::default().with_step(format!("log-returns(dt={dt})"), None);
    Ok(SeriesPanel::new(prices.tickers().to_vec(), series)?
        .with_timestamps(timestamps)?
        .with_meta(meta))
}

/// Sum consecutive blocks of `dt` one-step returns. For one-step log-returns
/// this equals the stride-`dt` log-return series.
pub fn aggregate_returns(panel: &SeriesPanel, dt: usize) -> Result<SeriesPanel> {
    if dt == 0 || dt > panel.len() {
        return Err(Error::invalid(format!(
            "cannot aggregate {} returns in blocks of {dt}",
            panel.len()
        )));
    }
    if dt == 1 {
        return Ok(panel.clone());
    }
    let blocks = panel.len() / dt;
    let series = panel
        .series()
        .iter()
        .map(|s| {
            s.chunks_exact(dt)
                .take(blocks)
                .map(|c| c.iter().sum())
                .collect()
        })
        .collect();
    let timestamps = panel
        .timestamps()
        .map(|ts| (0..blocks).map(|k| ts[k * dt]).collect());
    let meta = panel.meta().with_step(format!("aggregate(dt={dt})"), None);
    Ok(SeriesPanel::new(panel.labels().to_vec(), series)?
        .with_timestamps(timestamps)?
        .with_meta(meta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    Shuffle,
    Gaussianize,
    Sign,
    AmpShuffleAbove,
    AmpShuffleBelow,
}

impl TransformKind {
    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Shuffle => "shuffle",
            TransformKind::Gaussianize => "gaussianize",
            TransformKind::Sign => "sign",
            TransformKind::AmpShuffleAbove => "amp-shuffle-above",
            TransformKind::AmpShuffleBelow => "amp-shuffle-below",
        }
    }

    pub fn is_amplitude(self) -> bool {
        matches!(
            self,
            TransformKind::AmpShuffleAbove | TransformKind::AmpShuffleBelow
        )
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "shuffle" => TransformKind::Shuffle,
            "gaussianize" => TransformKind::Gaussianize,
            "sign" => TransformKind::Sign,
            "amp-shuffle-above" => TransformKind::AmpShuffleAbove,
            "amp-shuffle-below" => TransformKind::AmpShuffleBelow,
            other => return Err(Error::invalid(format!("unknown transform '{other}'"))),
        })
    }
}

/// What the amplitude threshold is compared against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeMode {
    /// `|r(t)|` against `k·σ`.
    #[default]
    Absolute,
    /// Signed `r(t)` against `k·σ`.
    Signed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    pub kind: TransformKind,
    #[serde(default)]
    pub threshold_sigma: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub amplitude: AmplitudeMode,
}

impl TransformSpec {
    pub fn new(kind: TransformKind, seed: u64) -> Self {
        TransformSpec {
            kind,
            threshold_sigma: None,
            seed,
            amplitude: AmplitudeMode::Absolute,
        }
    }

    pub fn amplitude(kind: TransformKind, threshold_sigma: f64, seed: u64) -> Self {
        TransformSpec {
            kind,
            threshold_sigma: Some(threshold_sigma),
            seed,
            amplitude: AmplitudeMode::Absolute,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.threshold_sigma {
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::invalid(format!(
                    "threshold_sigma must be positive, got {k}"
                )));
            }
        }
        if self.kind.is_amplitude() && self.threshold_sigma.is_none() {
            return Err(Error::invalid(format!(
                "{} needs threshold_sigma",
                self.kind
            )));
        }
        Ok(())
    }

    fn describe(&self) -> String {
        match self.threshold_sigma {
            Some(k) if self.kind.is_amplitude() => {
                let mode = match self.amplitude {
                    AmplitudeMode::Absolute => "abs",
                    AmplitudeMode::Signed => "signed",
                };
                format!("{}({k}sigma,{mode},seed={})", self.kind, self.seed)
            }
            _ if self.kind == TransformKind::Sign => "sign".to_owned(),
            _ => format!("{}(seed={})", self.kind, self.seed),
        }
    }
}

/// Apply one transform.
pub fn apply(panel: &SeriesPanel, spec: &TransformSpec) -> Result<SeriesPanel> {
    spec.validate()?;
    match spec.kind {
        TransformKind::Shuffle => Ok(shuffle(panel, spec.seed)),
        TransformKind::Gaussianize => gaussianize(panel, spec.seed),
        TransformKind::Sign => Ok(sign_series(panel)),
        TransformKind::AmpShuffleAbove | TransformKind::AmpShuffleBelow => {
            amplitude_partition_shuffle(panel, spec)
        }
    }
}

/// Apply a chain of transforms in order.
pub fn apply_chain(panel: &SeriesPanel, chain: &[TransformSpec]) -> Result<SeriesPanel> {
    let mut out = panel.clone();
    for spec in chain {
        out = apply(&out, spec)?;
    }
    Ok(out)
}

fn map_series<F>(panel: &SeriesPanel, f: F) -> Vec<Vec<f64>>
where
    F: Fn(usize, &[f64]) -> Vec<f64> + Sync,
{
    panel
        .series()
        .par_iter()
        .enumerate()
        .map(|(i, s)| f(i, s))
        .collect()
}

/// Independent uniform permutation of every series.
pub fn shuffle(panel: &SeriesPanel, seed: u64) -> SeriesPanel {
    let series = map_series(panel, |i, s| {
        let mut out = s.to_vec();
        out.shuffle(&mut rng::stream(seed, i as u64));
        out
    });
    let spec = TransformSpec::new(TransformKind::Shuffle, seed);
    panel.replace_series(series, panel.meta().with_step(spec.describe(), Some(seed)))
}

/// Positions of `values` in ascending order; ties keep index order.
pub(crate) fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

/// Put the k-th smallest of `target` where `values` holds its k-th smallest.
pub fn rank_remap(values: &[f64], mut target: Vec<f64>) -> Vec<f64> {
    assert_eq!(values.len(), target.len());
    target.sort_by(f64::total_cmp);
    let mut out = vec![0.0; values.len()];
    for (rank, pos) in ascending_order(values).into_iter().enumerate() {
        out[pos] = target[rank];
    }
    out
}

/// Rank-preserving remap of every series onto a standard normal sample.
pub fn gaussianize(panel: &SeriesPanel, seed: u64) -> Result<SeriesPanel> {
    if panel.len() < 2 {
        return Err(Error::invalid("gaussianize needs series of length >= 2"));
    }
    let series = map_series(panel, |i, s| {
        let mut rng = rng::stream(seed, i as u64);
        let normals: Vec<f64> = (0..s.len())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        rank_remap(s, normals)
    });
    let spec = TransformSpec::new(TransformKind::Gaussianize, seed);
    Ok(panel.replace_series(series, panel.meta().with_step(spec.describe(), Some(seed))))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Replace every value by its sign (`0` stays `0`).
pub fn sign_series(panel: &SeriesPanel) -> SeriesPanel {
    let series = panel
        .series()
        .iter()
        .map(|s| s.iter().copied().map(sign).collect())
        .collect();
    panel.replace_series(series, panel.meta().with_step("sign", None))
}

pub(crate) fn sample_sd(s: &[f64]) -> f64 {
    let n = s.len();
    if n < 2 {
        return 0.0;
    }
    let mean = s.iter().sum::<f64>() / n as f64;
    let ss: f64 = s.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Shuffle the values of one amplitude class among their own positions,
/// leaving the rest of each series untouched.
///
/// The class is `a(t) > k·σ` for `amp-shuffle-above` and `a(t) < k·σ` for
/// `amp-shuffle-below`, where `a(t)` is `|r(t)|` or `r(t)` depending on the
/// amplitude mode and `σ` is the sample standard deviation of the series
/// before shuffling.
pub fn amplitude_partition_shuffle(
    panel: &SeriesPanel,
    spec: &TransformSpec,
) -> Result<SeriesPanel> {
    spec.validate()?;
    let above = match spec.kind {
        TransformKind::AmpShuffleAbove => true,
        TransformKind::AmpShuffleBelow => false,
        other => {
            return Err(Error::invalid(format!(
                "{other} is not an amplitude-partition transform"
            )))
        }
    };
    let k = spec.threshold_sigma.expect("validated");
    let series = map_series(panel, |i, s| {
        let cut = k * sample_sd(s);
        let amp = |v: f64| match spec.amplitude {
            AmplitudeMode::Absolute => v.abs(),
            AmplitudeMode::Signed => v,
        };
        let positions: Vec<usize> = (0..s.len())
            .filter(|&t| {
                let a = amp(s[t]);
                if above {
                    a > cut
                } else {
                    a < cut
                }
            })
            .collect();
        let mut out = s.to_vec();
        if positions.len() > 1 {
            let mut vals: Vec<f64> = positions.iter().map(|&t| s[t]).collect();
            vals.shuffle(&mut rng::stream(spec.seed, i as u64));
            for (&t, v) in positions.iter().zip(vals) {
                out[t] = v;
            }
        }
        out
    });
    Ok(panel.replace_series(
        series,
        panel.meta().with_step(spec.describe(), Some(spec.seed)),
    ))
}
