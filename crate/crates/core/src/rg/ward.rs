//! Residuals of the translation-covariance (Ward) identities at an accepted
//! scale. With `w̃ = W̃₀ʲ(z_n)` and `χ̄_n` the cutoff above scale `n`:
//!
//! ```text
//! w̃^γ(0) = Σ_{q≠0} i q^γ χ̄_n(ω·q) x̄^α(q) w̃^α(-q)
//! ```
//!
//! and, differentiating along `y^α(p)` with `u = Dw̃_n(0) e_p^α`,
//!
//! ```text
//! u^γ(0) = i p^γ Wʲ(x̄ + z_n)^α(-p) + Σ_q i q^γ χ̄_n(ω·q) x̄^β(q) u^β(-q).
//! ```

use num_complex::Complex64;

use crate::error::Result;
use crate::lattice::LatticePoint;

use super::stage::{ScaleSolution, StageProblem};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `Σ_{q≠0} i q^γ χ̄_n(ω·q) Σ_α x̄^α(q) f^α(-q)` for each `γ`.
fn xbar_pairing(p: &StageProblem, n: usize, f: &[Complex64]) -> Vec<Complex64> {
    let d = p.d;
    let w = &p.window;
    let mut out = vec![ZERO; d];
    for i in 0..w.len() {
        let xb = &p.xbar[i * d..(i + 1) * d];
        if i == w.zero_index() || xb.iter().all(|c| *c == ZERO) {
            continue;
        }
        let chi = p.scales.chi_bar_n(n, p.kappas[i]);
        if chi == 0.0 {
            continue;
        }
        let m = w.mirror(i);
        let pair: Complex64 = (0..d).map(|a| xb[a] * f[m * d + a]).sum();
        let q = w.point(i);
        for (g, o) in out.iter_mut().enumerate() {
            *o += I * q.0[g] as f64 * chi * pair;
        }
    }
    out
}

/// ℓ¹ norm of the constant-identity defect.
pub fn ward_residual_constant(p: &StageProblem, n: usize, sol: &ScaleSolution) -> f64 {
    let d = p.d;
    let z0 = p.window.zero_index();
    let rhs = xbar_pairing(p, n, &sol.w);
    (0..d).map(|g| (sol.w[z0 * d + g] - rhs[g]).norm()).sum()
}

/// Largest ℓ¹ defect of the differentiated identity over the probe modes
/// and all components.
pub fn ward_residual_derivative(p: &StageProblem, n: usize, sol: &ScaleSolution, probes: &[LatticePoint], tol: f64) -> Result<f64> {
    let d = p.d;
    let w = &p.window;
    let z0 = w.zero_index();
    let g = p.kernel_below(n, 0.0);
    let full: Vec<Complex64> = sol.w.iter().zip(&p.u).map(|(a, b)| a + b).collect();
    let mut worst: f64 = 0.0;
    for probe in probes {
        let Some(ip) = w.index(probe) else { continue };
        let im = w.mirror(ip);
        for alpha in 0..d {
            let mut e = vec![ZERO; w.len() * d];
            e[ip * d + alpha] = Complex64::new(1.0, 0.0);
            let b = p.apply_k(&sol.hessian, &e);
            let u = p.solve_resolvent(&sol.hessian, &g, &b, tol)?;
            let pair = xbar_pairing(p, n, &u);
            let defect: f64 = (0..d)
                .map(|gamma| {
                    let rhs = I * probe.0[gamma] as f64 * full[im * d + alpha] + pair[gamma];
                    (u[z0 * d + gamma] - rhs).norm()
                })
                .sum();
            worst = worst.max(defect);
        }
    }
    Ok(worst)
}
