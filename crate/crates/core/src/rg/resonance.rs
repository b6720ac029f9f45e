//! Conditioning of the linearized scale step and the resonance kernel.
//!
//! `H_n = (1 - Dw̃_{n-1}(0) Γ_{n-1})^{-1} = (1 - KΓ_{<n})^{-1}(1 - KΓ_{<n-1})`
//! with `K` the Hessian operator at the previous scale's fixed point. Columns
//! outside the support of `Γ_{n-1}` are unit vectors, so only the band is
//! probed. Rows and columns are restricted to `|ω·q| ≤ η^{n-2}`: the modes
//! the scale-`n` problem still sees.
//!
//! `σ_n(κ)` is the `q = q' = 0` block of `(1 - KΓ_{<n}[κ])^{-1}K`, the
//! diagonal part of the linearized map with a shifted kernel.

use num_complex::Complex64;
use serde::Serialize;

use crate::compose::Hessian;
use crate::error::{Error, Result};
use crate::linalg::{estimate_norm1, gmres};
use crate::stats::power_law_exponent;

use super::stage::StageProblem;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Above this many band columns `‖H‖` is estimated instead of computed.
pub const EXACT_COLUMN_LIMIT: usize = 128;

/// Per-scale resonance diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResonanceDiagnostics {
    pub n: usize,
    /// `σ_n(0;0)`, row-major `d×d`.
    pub sigma_00: Vec<Complex64>,
    /// `∂_κ σ_n(κ;0)` at `κ = 0` by central differences.
    pub dsigma_00: Vec<Complex64>,
    /// `sup_{|κ| ≤ η^n} |σ_n(κ;0)|` over sampled shifts.
    pub sigma_envelope: f64,
    /// Exponent `p` in `|ρ(q,0)| ≈ C |q|₁^p`.
    pub rho_offdiag_decay: Option<f64>,
    pub h_norm: f64,
}

pub(crate) fn frobenius(m: &[Complex64]) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖H_n‖₁` restricted to `|ω·q| ≤ η^{n-2}` (all modes for `n = 1`), with
/// `K` taken at the previous scale.
pub fn linearization_h(p: &StageProblem, n: usize, hess_prev: &Hessian, tol: f64) -> Result<f64> {
    let d = p.d;
    let len = p.window.len();
    let g_now = p.kernel_below(n, 0.0);
    let g_prev = p.kernel_below(n - 1, 0.0);
    let eta = p.scales.eta();
    let in_r: Vec<bool> = p.kappas.iter().map(|&k| n == 1 || k.abs() <= eta.powi(n as i32 - 2)).collect();
    let band: Vec<usize> = (0..len).filter(|&i| in_r[i] && g_now[i] != g_prev[i]).collect();
    let trivial_in_r = (0..len).any(|i| in_r[i] && g_now[i] == g_prev[i]);
    let floor = if trivial_in_r { 1.0 } else { 0.0 };
    if band.is_empty() {
        return Ok(floor);
    }
    let singular = |e: Error| match e {
        Error::SingularResonanceMatrix { .. } => Error::SingularResonanceMatrix { scale: n },
        other => other,
    };
    let mul = |g: &[f64], v: &[Complex64]| -> Vec<Complex64> { v.iter().enumerate().map(|(i, x)| x * g[i / d]).collect() };
    let restrict = |v: &mut [Complex64]| {
        for (i, x) in v.iter_mut().enumerate() {
            if !in_r[i / d] {
                *x = ZERO;
            }
        }
    };
    // H v for v supported on the band
    let apply_h = |v: &[Complex64]| -> Result<Vec<Complex64>> {
        let kv = p.apply_k(hess_prev, &mul(&g_prev, v));
        let rhs: Vec<Complex64> = v.iter().zip(&kv).map(|(a, b)| a - b).collect();
        let mut out = p.solve_resolvent(hess_prev, &g_now, &rhs, tol).map_err(singular)?;
        restrict(&mut out);
        Ok(out)
    };
    let ncols = band.len() * d;
    let embed = |x: &[Complex64]| {
        let mut v = vec![ZERO; len * d];
        for (k, &i) in band.iter().enumerate() {
            v[i * d..(i + 1) * d].copy_from_slice(&x[k * d..(k + 1) * d]);
        }
        v
    };
    if ncols <= EXACT_COLUMN_LIMIT {
        let mut best = floor;
        for c in 0..ncols {
            let mut x = vec![ZERO; ncols];
            x[c] = Complex64::new(1.0, 0.0);
            let col = apply_h(&embed(&x))?;
            best = best.max(col.iter().map(|z| z.norm()).sum());
        }
        return Ok(best);
    }
    // H^H y = (1 - Γ_{<n-1}K)(1 - Γ_{<n}K)^{-1} y, K Hermitian
    let apply_h_adj = |y: &[Complex64]| -> Result<Vec<Complex64>> {
        let mut y = y.to_vec();
        restrict(&mut y);
        let out = gmres(
            |v| {
                let kv = p.apply_k(hess_prev, v);
                let gkv = mul(&g_now, &kv);
                v.iter().zip(&gkv).map(|(a, b)| a - b).collect()
            },
            &y,
            tol,
            60,
            1200,
        );
        if !out.converged && out.relative_residual > tol.sqrt() {
            return Err(Error::SingularResonanceMatrix { scale: n });
        }
        let t = out.x;
        let kt = p.apply_k(hess_prev, &t);
        let gkt = mul(&g_prev, &kt);
        Ok(t.iter().zip(&gkt).map(|(a, b)| a - b).collect())
    };
    let failure = std::cell::RefCell::new(None);
    let est = estimate_norm1(
        ncols,
        |x| match apply_h(&embed(x)) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                vec![ZERO; len * d]
            }
        },
        |y| match apply_h_adj(y) {
            Ok(v) => band.iter().flat_map(|&i| v[i * d..(i + 1) * d].to_vec()).collect(),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                vec![ZERO; ncols]
            }
        },
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(est.max(floor))
}

/// `σ_n(κ;0)` and the full first columns of the resolvent (for `ρ`).
pub fn sigma_at(p: &StageProblem, n: usize, hess: &Hessian, shift: f64, tol: f64) -> Result<(Vec<Complex64>, Vec<Vec<Complex64>>)> {
    let d = p.d;
    let len = p.window.len();
    let z0 = p.window.zero_index();
    let g = p.kernel_below(n, shift);
    let mut sigma = vec![ZERO; d * d];
    let mut cols = Vec::with_capacity(d);
    for a in 0..d {
        let mut e = vec![ZERO; len * d];
        e[z0 * d + a] = Complex64::new(1.0, 0.0);
        let b = p.apply_k(hess, &e);
        let u = p
            .solve_resolvent(hess, &g, &b, tol)
            .map_err(|_| Error::SingularResonanceMatrix { scale: n })?;
        for c in 0..d {
            sigma[c * d + a] = u[z0 * d + c];
        }
        cols.push(u);
    }
    Ok((sigma, cols))
}

/// σ/ρ diagnostics at the accepted fixed point of scale `n`.
pub fn resonance_diagnostics(
    p: &StageProblem,
    n: usize,
    hess: &Hessian,
    h_norm: f64,
    samples: usize,
    tol: f64,
) -> Result<ResonanceDiagnostics> {
    let d = p.d;
    let eta_n = p.scales.eta().powi(n as i32);
    let (sigma_00, cols) = sigma_at(p, n, hess, 0.0, tol)?;
    let h = 1e-3 * eta_n;
    let (sp, _) = sigma_at(p, n, hess, h, tol)?;
    let (sm, _) = sigma_at(p, n, hess, -h, tol)?;
    let dsigma_00 = sp.iter().zip(&sm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
    let mut envelope = frobenius(&sigma_00);
    let half = samples.div_ceil(2).max(1);
    for k in 1..=half {
        let s = eta_n * k as f64 / half as f64;
        for shift in [s, -s] {
            envelope = envelope.max(frobenius(&sigma_at(p, n, hess, shift, tol)?.0));
        }
    }
    // off-diagonal decay of the κ = 0 resolvent column
    let w = &p.window;
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    let top = cols.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
    for i in 0..w.len() {
        if i == w.zero_index() {
            continue;
        }
        let m: f64 = cols
            .iter()
            .map(|u| u[i * d..(i + 1) * d].iter().map(|c| c.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        if m > 1e-13 * top {
            xs.push(w.point(i).l1() as f64);
            vs.push(m);
        }
    }
    Ok(ResonanceDiagnostics {
        n,
        sigma_00,
        dsigma_00,
        sigma_envelope: envelope,
        rho_offdiag_decay: power_law_exponent(&xs, &vs),
        h_norm,
    })
}
