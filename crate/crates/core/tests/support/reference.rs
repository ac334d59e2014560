//! Brute-force ρ_q written straight from the definitions: per-box cumulative
//! sums, a monomial least-squares fit in i = 1..s solved by Householder QR,
//! box moments, signed q/2 power means, and the ratio.

/// Residuals of the cumulative sum of `seg` after an order-`m` fit.
pub fn box_residuals(seg: &[f64], m: usize) -> Vec<f64> {
    let s = seg.len();
    let cols = m + 1;
    let mut y = vec![0.0; s];
    let mut acc = 0.0;
    for i in 0..s {
        acc += seg[i];
        y[i] = acc;
    }
    // column-major Vandermonde in x = 1..s, columns scaled to unit max
    let mut a = vec![vec![0.0; s]; cols];
    for k in 0..cols {
        let top = (s as f64).powi(k as i32);
        for i in 0..s {
            a[k][i] = ((i + 1) as f64).powi(k as i32) / top;
        }
    }
    // Householder QR applied to a copy of y
    let mut qa = a.clone();
    let mut qy = y.clone();
    let mut vs: Vec<Vec<f64>> = Vec::new();
    for k in 0..cols {
        let mut norm = 0.0;
        for i in k..s {
            norm += qa[k][i] * qa[k][i];
        }
        let norm = norm.sqrt();
        let alpha = if qa[k][k] > 0.0 { -norm } else { norm };
        let mut v = vec![0.0; s];
        for i in k..s {
            v[i] = qa[k][i];
        }
        v[k] -= alpha;
        let vv: f64 = (k..s).map(|i| v[i] * v[i]).sum();
        for j in k..cols {
            let d: f64 = (k..s).map(|i| v[i] * qa[j][i]).sum();
            for i in k..s {
                qa[j][i] -= 2.0 * d / vv * v[i];
            }
        }
        let d: f64 = (k..s).map(|i| v[i] * qy[i]).sum();
        for i in k..s {
            qy[i] -= 2.0 * d / vv * v[i];
        }
        vs.push(v);
    }
    // back substitution for the coefficients
    let mut c = vec![0.0; cols];
    for k in (0..cols).rev() {
        let mut t = qy[k];
        for j in k + 1..cols {
            t -= qa[j][k] * c[j];
        }
        c[k] = t / qa[k][k];
    }
    let mut r = vec![0.0; s];
    for i in 0..s {
        let mut fit = 0.0;
        for k in 0..cols {
            fit += a[k][i] * c[k];
        }
        r[i] = y[i] - fit;
    }
    r
}

fn box_starts(t: usize, s: usize) -> Vec<usize> {
    let m = t / s;
    let mut starts = Vec::new();
    for nu in 0..m {
        starts.push(nu * s);
    }
    for nu in 0..m {
        starts.push(t - (nu + 1) * s);
    }
    starts
}

fn signed_pow(f: f64, q: f64) -> f64 {
    if f > 0.0 {
        f.powf(q / 2.0)
    } else if f < 0.0 {
        -(-f).powf(q / 2.0)
    } else {
        0.0
    }
}

/// `(F_xy, F_xx, F_yy)`.
pub fn fluctuations(x: &[f64], y: &[f64], s: usize, q: f64, m: usize) -> (f64, f64, f64) {
    let starts = box_starts(x.len(), s);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &st in &starts {
        let rx = box_residuals(&x[st..st + s], m);
        let ry = box_residuals(&y[st..st + s], m);
        let (mut fxy, mut fxx, mut fyy) = (0.0, 0.0, 0.0);
        for i in 0..s {
            fxy += rx[i] * ry[i];
            fxx += rx[i] * rx[i];
            fyy += ry[i] * ry[i];
        }
        sxy += signed_pow(fxy / s as f64, q);
        sxx += signed_pow(fxx / s as f64, q);
        syy += signed_pow(fyy / s as f64, q);
    }
    let n = starts.len() as f64;
    (sxy / n, sxx / n, syy / n)
}

pub fn rho(x: &[f64], y: &[f64], s: usize, q: f64, m: usize) -> f64 {
    let (fxy, fxx, fyy) = fluctuations(x, y, s, q, m);
    fxy / (fxx * fyy).sqrt()
}

pub fn distance(rho: f64) -> f64 {
    (2.0 * (1.0 - rho)).sqrt()
}

/// Hurst exponent from plain DFA-m: log-log slope of `F_2(s)` over `scales`.
pub fn dfa_hurst(x: &[f64], scales: &[usize], m: usize) -> f64 {
    let pts: Vec<(f64, f64)> = scales
        .iter()
        .map(|&s| {
            let (_, f, _) = fluctuations(x, x, s, 2.0, m);
            ((s as f64).ln(), 0.5 * f.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    num / den
}
