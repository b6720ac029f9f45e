//! Matrix-free linear algebra: restarted GMRES and a 1-norm estimator.

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    // conjugate-linear in a
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Outcome of a GMRES solve.
#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` from `x = 0` with restarts of length `restart` and at most
/// `max_iter` matrix applications.
pub fn gmres<F>(apply: F, b: &[Complex64], rel_tol: f64, restart: usize, max_iter: usize) -> GmresOutcome
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![ZERO; n];
    if bnorm == 0.0 {
        return GmresOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut iterations = 0;
    let mut r = b.to_vec();
    let mut rel = 1.0;
    while iterations < max_iter {
        let beta = norm2(&r);
        rel = beta / bnorm;
        if rel <= rel_tol {
            return GmresOutcome {
                x,
                iterations,
                relative_residual: rel,
                converged: true,
            };
        }
        let m = restart.min(max_iter - iterations).max(1);
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|c| c / beta).collect()];
        let mut h = vec![vec![ZERO; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![ZERO; m];
        let mut g = vec![ZERO; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            let mut w = apply(&basis[k]);
            iterations += 1;
            for (i, v) in basis.iter().enumerate() {
                let hik = dot(v, &w);
                h[i][k] = hik;
                w.iter_mut().zip(v).for_each(|(wj, vj)| *wj -= hik * vj);
            }
            let hn = norm2(&w);
            h[k + 1][k] = Complex64::new(hn, 0.0);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i].conj() * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let (a, bb) = (h[k][k], h[k + 1][k]);
            let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = ZERO;
            } else if a.norm() == 0.0 {
                cs[k] = 0.0;
                sn[k] = bb.conj() / bb.norm();
            } else {
                cs[k] = a.norm() / denom;
                sn[k] = (a / a.norm()) * bb.conj() / denom;
            }
            h[k][k] = cs[k] * a + sn[k] * bb;
            h[k + 1][k] = ZERO;
            g[k + 1] = -sn[k].conj() * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            rel = g[k + 1].norm() / bnorm;
            if rel <= rel_tol || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|c| c / hn).collect());
        }
        // back substitution on the k_used × k_used triangle
        let mut yk = vec![ZERO; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * yk[j];
            }
            yk[i] = if h[i][i] == ZERO { ZERO } else { s / h[i][i] };
        }
        for (j, yj) in yk.iter().enumerate() {
            x.iter_mut().zip(&basis[j]).for_each(|(xi, vi)| *xi += yj * vi);
        }
        // true residual for the restart
        let ax = apply(&x);
        iterations += 1;
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        rel = norm2(&r) / bnorm;
        if rel <= rel_tol {
            return GmresOutcome {
                x,
                iterations,
                relative_residual: rel,
                converged: true,
            };
        }
    }
    GmresOutcome {
        x,
        iterations,
        relative_residual: rel,
        converged: rel <= rel_tol,
    }
}

/// Lower bound on `‖B‖₁ = max_j Σ_i |b_ij|` (usually exact) from a handful
/// of products with `B` and `B^H`.
pub fn estimate_norm1<F, G>(n: usize, apply: F, apply_adjoint: G) -> f64
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
    G: Fn(&[Complex64]) -> Vec<Complex64>,
{
    if n == 0 {
        return 0.0;
    }
    let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
    let mut est = 0.0;
    let mut last_j = usize::MAX;
    for _ in 0..5 {
        let y = apply(&x);
        let ynorm: f64 = y.iter().map(|c| c.norm()).sum();
        est = f64::max(est, ynorm);
        let xi: Vec<Complex64> = y
            .iter()
            .map(|c| if c.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { c / c.norm() })
            .collect();
        let z = apply_adjoint(&xi);
        let (j, zmax) = z
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.norm()))
            .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        let ztx = dot(&z, &x).re;
        if zmax <= ztx || j == last_j {
            break;
        }
        last_j = j;
        x = vec![ZERO; n];
        x[j] = Complex64::new(1.0, 0.0);
    }
    // Higham's alternating-sign probe guards against unlucky cancellations
    let alt: Vec<Complex64> = (0..n)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(s * (1.0 + i as f64 / (n as f64 - 1.0).max(1.0)), 0.0)
        })
        .collect();
    let y = apply(&alt);
    let alt_est = 2.0 * y.iter().map(|c| c.norm()).sum::<f64>() / (3.0 * n as f64);
    est.max(alt_est)
}
