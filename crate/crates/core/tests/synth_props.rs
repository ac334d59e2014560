mod support;

use qmst::compare::pearson;
use qmst::ingest::gaussianize;
use qmst::synth::{arfima_panel, correlated_pair_panel, ArfimaParams, CorrelatedPairParams};
use qmst::SeriesPanel;
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn arfima_hurst_exponent_near_d_plus_half() {
    let p = arfima_panel(1, &ArfimaParams::new(0.3, 1 << 17, 8)).unwrap();
    let scales = [16, 32, 64, 128, 256, 512, 1024];
    let h = support::reference::dfa_hurst(p.get(0), &scales, 2);
    assert!((0.75..=0.85).contains(&h), "H = {h}");
}

#[test]
fn coupled_pairs_have_requested_pearson() {
    let p = correlated_pair_panel(
        1,
        &CorrelatedPairParams {
            gamma: 0.7,
            len: 100_000,
            seed: 12,
        },
    )
    .unwrap();
    let c = pearson(p.get(0), p.get(1)).unwrap();
    assert!((c - 0.7).abs() <= 0.02, "pearson = {c}");
    // cross-check with statrs' sample statistics
    use statrs::statistics::Statistics;
    let (x, y) = (p.get(0), p.get(1));
    let cov = x.covariance(y);
    let alt = cov / (x.std_dev() * y.std_dev());
    assert!((alt - c).abs() < 1e-12);
}

#[test]
fn gaussianized_output_passes_ks() {
    let n = 10_000;
    // exponential marginals: skewed, far from normal
    let raw: Vec<f64> = support::uniforms(n, 3)
        .iter()
        .map(|u| -(1.0 - u).ln())
        .collect();
    let panel = SeriesPanel::from_series(vec![raw]).unwrap();
    let g = gaussianize(&panel, 4).unwrap();
    let mut v = g.get(0).to_vec();
    v.sort_by(f64::total_cmp);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let nf = n as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = normal.cdf(x);
            (c - i as f64 / nf)
                .abs()
                .max(((i + 1) as f64 / nf - c).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value
    let crit = 1.628 / nf.sqrt();
    assert!(d < crit, "KS D = {d}, critical {crit}");
}
