mod support;

use proptest::prelude::*;
use qmst::fluct::{detrended_residuals, fluctuation};
use qmst::rho::{rho_matrix, rho_q, rho_q_audit};
use qmst::SeriesPanel;

use support::reference;

fn close(a: f64, b: f64, scale: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * scale
}

#[test]
fn residuals_match_householder_fit() {
    for (k, (s, m)) in [(8, 2), (20, 0), (20, 1), (50, 3), (120, 2)]
        .into_iter()
        .enumerate()
    {
        let x = support::normals(s, 40 + k as u64);
        let lib = detrended_residuals(&x, 0, s, m).unwrap();
        let want = reference::box_residuals(&x, m);
        let norm = want.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (a, b) in lib.iter().zip(&want) {
            assert!(close(*a, *b, norm, 1e-11), "s={s} m={m}: {a} vs {b}");
        }
    }
}

#[test]
fn quadratic_profile_leaves_no_residual() {
    // increments of a quadratic cumulative sum are linear
    let x: Vec<f64> = (0..30).map(|i| 0.3 + 0.07 * i as f64).collect();
    let r = detrended_residuals(&x, 0, 30, 2).unwrap();
    let scale: f64 = x.iter().sum();
    assert!(r.iter().all(|v| v.abs() <= 1e-10 * scale));
}

#[test]
fn fourth_order_pair_matches_brute_force() {
    let x = support::normals(200, 1);
    let e = support::normals(200, 2);
    let y: Vec<f64> = x.iter().zip(&e).map(|(a, b)| 0.4 * a + b).collect();
    let lib = fluctuation(&x, &y, 20, 4.0, 2).unwrap();
    let (fxy, fxx, fyy) = reference::fluctuations(&x, &y, 20, 4.0, 2);
    let scale = (fxx * fyy).sqrt();
    assert!(close(lib.xy, fxy, scale, 1e-10));
    assert!(close(lib.xx, fxx, fxx, 1e-10));
    assert!(close(lib.yy, fyy, fyy, 1e-10));
}

#[test]
fn hand_built_three_series_matrix() {
    let len = 40;
    let ramp: Vec<f64> = (0..len)
        .map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0)
        .collect();
    let wave: Vec<f64> = (0..len).map(|i| (i as f64 * 0.9).sin()).collect();
    let mix: Vec<f64> = ramp.iter().zip(&wave).map(|(a, b)| a - 0.5 * b).collect();
    let series = vec![ramp, wave, mix];
    let panel = SeriesPanel::from_series(series.clone()).unwrap();
    for q in [1.0, 2.0, 4.0] {
        let m = rho_matrix(&panel, 20, q, 2).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j {
                    1.0
                } else {
                    reference::rho(&series[i], &series[j], 20, q, 2)
                };
                assert!((m.get(i, j) - want).abs() <= 1e-12, "q={q} ({i},{j})");
            }
        }
    }
}

#[test]
fn two_independent_long_memory_series_decorrelate() {
    use qmst::synth::{arfima_panel, ArfimaParams};
    let p = arfima_panel(2, &ArfimaParams::new(0.3, 100_000, 21)).unwrap();
    let r = rho_q(p.get(0), p.get(1), 20, 2.0, 2).unwrap();
    assert!(r.abs() < 0.05, "rho = {r}");
}

#[test]
fn audit_mode_negative_q_matches_reference() {
    let x = support::normals(400, 11);
    let e = support::normals(400, 12);
    let y: Vec<f64> = x.iter().zip(&e).map(|(a, b)| 0.3 * a + b).collect();
    for q in [-4.0, -2.0, -1.0, -0.5] {
        let got = rho_q_audit(&x, &y, 20, q, 2).unwrap();
        let raw = reference::rho(&x, &y, 20, q, 2);
        let want = if raw.abs() > 1.0 { 1.0 / raw } else { raw };
        assert!((got - want).abs() < 1e-9, "q={q}: {got} vs {want}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_settings_match_reference(
        seed in 0u64..10_000,
        s in 6usize..64,
        m in 0usize..4,
        q in prop::sample::select(vec![0.5, 1.0, 1.5, 2.0, 3.0, 5.0]),
        boxes in 2usize..8,
        tail in 0usize..7,
        g in -0.95f64..0.95,
    ) {
        prop_assume!(s >= m + 2);
        let len = s * boxes + tail;
        let x = support::normals(len, seed);
        let e = support::normals(len, seed + 50_000);
        let y: Vec<f64> = x.iter().zip(&e).map(|(a, b)| g * a + (1.0 - g * g).sqrt() * b).collect();
        let lib = fluctuation(&x, &y, s, q, m).unwrap();
        let (fxy, fxx, fyy) = reference::fluctuations(&x, &y, s, q, m);
        let scale = (fxx * fyy).sqrt();
        prop_assert!(close(lib.xy, fxy, scale, 1e-9), "{} vs {}", lib.xy, fxy);
        prop_assert!(close(lib.xx, fxx, fxx, 1e-9));
        prop_assert!(close(lib.yy, fyy, fyy, 1e-9));
        let r = rho_q(&x, &y, s, q, m).unwrap();
        prop_assert!((r - fxy / scale).abs() <= 1e-9);
    }
}
