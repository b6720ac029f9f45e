//! Small least-squares fits used by the diagnostics.

/// Slope and intercept of the least-squares line through `(x, y)`.
/// `None` with fewer than two distinct abscissae.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs[..n].iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs[..n].iter().zip(&ys[..n]).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Fitted ratio `r` in `v_k ≈ C r^k`, ignoring nonpositive entries.
pub fn geometric_ratio(values: &[f64]) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(k, v)| (k as f64, v.ln()))
        .unzip();
    linear_fit(&xs, &ys).map(|(s, _)| s.exp())
}

/// Fitted exponent `p` in `v ≈ C x^p`.
pub fn power_law_exponent(xs: &[f64], vs: &[f64]) -> Option<f64> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(vs)
        .filter(|(x, v)| **x > 0.0 && **v > 0.0)
        .map(|(x, v)| (x.ln(), v.ln()))
        .unzip();
    linear_fit(&lx, &ly).map(|(s, _)| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits() {
        let v: Vec<f64> = (0..6).map(|k| 3.0 * 0.25f64.powi(k)).collect();
        assert!((geometric_ratio(&v).unwrap() - 0.25).abs() < 1e-12);
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 2.0 * x.powf(-3.5)).collect();
        assert!((power_law_exponent(&xs, &ys).unwrap() + 3.5).abs() < 1e-12);
        assert!(linear_fit(&[1.0], &[2.0]).is_none());
    }
}
