//! Smooth multiscale splitting of the small-divisor operator `G₀`.
//!
//! With the normalized bump `h(u) = C e^{1/(u²-1)}` and its antiderivative
//! `H`, the step `χ̄(κ) = 1 - H(u₀(κ))`, `u₀(κ) = (2|κ| - 1 - η)/(1 - η)`,
//! is 1 below `η` and 0 above 1. Rescaled copies `χ̄_n(κ) = χ̄(η^{-n}κ)`
//! telescope into `χ_0 = 1 - χ̄_1`, `χ_n = χ̄_n - χ̄_{n+1}`, and the kernels
//! `γ_n = χ_n/κ²` sum to `1/κ²` wherever `|κ| ≥ η^N`.
//!
//! All pieces are evaluated through `H` or `1 - H` on the side where they
//! are small, so tails keep relative accuracy instead of cancelling to zero.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::lattice::LatticeWindow;
use crate::quad::integrate;

const TABLE_INTERVALS: usize = 2048;
/// Beyond this `|u|` the antiderivative is integrated directly.
const TAIL_START: f64 = 0.9;

fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 / (u * u - 1.0)).exp()
    }
}

struct Mollifier {
    c: f64,
    step: f64,
    values: Vec<f64>,
}

fn mollifier() -> &'static Mollifier {
    static M: OnceLock<Mollifier> = OnceLock::new();
    M.get_or_init(|| {
        let step = 2.0 / TABLE_INTERVALS as f64;
        let mut values = Vec::with_capacity(TABLE_INTERVALS + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for k in 0..TABLE_INTERVALS {
            let a = -1.0 + k as f64 * step;
            acc += integrate(bump, a, a + step, 1e-300, 1e-15);
            values.push(acc);
        }
        let total = acc;
        values.iter_mut().for_each(|v| *v /= total);
        Mollifier {
            c: 1.0 / total,
            step,
            values,
        }
    })
}

/// The normalization `C = 1/∫_{-1}^{1} e^{1/(x²-1)} dx ≈ 2.2523`.
pub fn mollifier_constant() -> f64 {
    mollifier().c
}

/// The normalized bump `h(u)`, zero outside `(-1, 1)`.
pub fn mollifier_h(u: f64) -> f64 {
    mollifier().c * bump(u)
}

fn lower_tail(u: f64) -> f64 {
    // ∫_{-1}^{u} h for u ≤ -TAIL_START
    if u <= -1.0 {
        return 0.0;
    }
    let m = mollifier();
    m.c * integrate(bump, -1.0, u, 1e-300, 1e-14)
}

/// `H(u) = ∫_{-1}^{u} h`.
pub fn mollifier_cdf(u: f64) -> f64 {
    if u <= -1.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else if u < -TAIL_START {
        lower_tail(u)
    } else if u > TAIL_START {
        1.0 - lower_tail(-u)
    } else {
        let m = mollifier();
        let x = (u + 1.0) / m.step;
        let k = (x.floor() as usize).min(TABLE_INTERVALS - 1);
        let t = x - k as f64;
        let u0 = -1.0 + k as f64 * m.step;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * m.values[k] + h10 * m.step * mollifier_h(u0) + h01 * m.values[k + 1] + h11 * m.step * mollifier_h(u0 + m.step)
    }
}

/// `1 - H(u) = H(-u)`, accurate when small.
pub fn mollifier_ccdf(u: f64) -> f64 {
    mollifier_cdf(-u)
}

/// The cutoff family at a fixed `η`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleDecomposition {
    eta: f64,
    max_scale: usize,
}

impl ScaleDecomposition {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidInput(format!("eta must lie in (0,1), got {eta}")));
        }
        Ok(ScaleDecomposition { eta, max_scale: 1 })
    }

    /// Chooses `N` as the first scale with `|ω·q| ≥ η^N` on every nonzero
    /// window mode, so that `Γ_{<N} = G₀` there.
    pub fn for_window(eta: f64, omega: &[f64], window: &LatticeWindow) -> Result<Self> {
        let mut s = ScaleDecomposition::new(eta)?;
        let min = window
            .points()
            .filter(|q| !q.is_zero())
            .map(|q| q.dot(omega).abs())
            .fold(f64::INFINITY, f64::min);
        if min == 0.0 {
            let q = window.points().find(|q| !q.is_zero() && q.dot(omega) == 0.0).expect("zero divisor");
            return Err(Error::ResonantFrequency(q));
        }
        let mut n = 1;
        while min.is_finite() && min < eta.powi(n as i32) {
            n += 1;
        }
        s.max_scale = n;
        Ok(s)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn max_scale(&self) -> usize {
        self.max_scale
    }

    pub fn mollifier_norm_c(&self) -> f64 {
        mollifier_constant()
    }

    fn u(&self, n: usize, kappa: f64) -> f64 {
        (2.0 * kappa.abs() * self.eta.powi(-(n as i32)) - 1.0 - self.eta) / (1.0 - self.eta)
    }

    fn du(&self, n: usize, kappa: f64) -> f64 {
        2.0 * self.eta.powi(-(n as i32)) * kappa.signum() / (1.0 - self.eta)
    }

    /// `χ̄(κ)`.
    pub fn chi_bar(&self, kappa: f64) -> f64 {
        self.chi_bar_n(0, kappa)
    }

    /// `χ̄_n(κ) = χ̄(η^{-n}κ)`.
    pub fn chi_bar_n(&self, n: usize, kappa: f64) -> f64 {
        mollifier_ccdf(self.u(n, kappa))
    }

    /// `χ_n(κ)`.
    pub fn chi_n(&self, n: usize, kappa: f64) -> f64 {
        if n == 0 {
            return mollifier_cdf(self.u(1, kappa));
        }
        if kappa.abs() >= self.eta.powi(n as i32 + 1) {
            mollifier_ccdf(self.u(n, kappa))
        } else {
            mollifier_cdf(self.u(n + 1, kappa))
        }
    }

    /// `∂_κ χ_n(κ)`.
    pub fn dchi_n(&self, n: usize, kappa: f64) -> f64 {
        if n == 0 {
            return mollifier_h(self.u(1, kappa)) * self.du(1, kappa);
        }
        // χ̄_n' - χ̄_{n+1}'
        let a = -mollifier_h(self.u(n, kappa)) * self.du(n, kappa);
        let b = -mollifier_h(self.u(n + 1, kappa)) * self.du(n + 1, kappa);
        a - b
    }

    /// `γ_n(κ) = χ_n(κ)/κ²`, zero at `κ = 0`.
    pub fn gamma_n(&self, n: usize, kappa: f64) -> f64 {
        if kappa == 0.0 {
            return 0.0;
        }
        self.chi_n(n, kappa) / (kappa * kappa)
    }

    /// `∂_κ γ_n(κ)`.
    pub fn dgamma_n(&self, n: usize, kappa: f64) -> f64 {
        if kappa == 0.0 {
            return 0.0;
        }
        let k2 = kappa * kappa;
        self.dchi_n(n, kappa) / k2 - 2.0 * self.chi_n(n, kappa) / (k2 * kappa)
    }

    /// `Γ_{<n}(κ) = Σ_{m<n} γ_m(κ) = (1 - χ̄_n(κ))/κ²` for `n ≥ 1`, zero for `n = 0`.
    pub fn gamma_below(&self, n: usize, kappa: f64) -> f64 {
        if n == 0 || kappa == 0.0 {
            return 0.0;
        }
        mollifier_cdf(self.u(n, kappa)) / (kappa * kappa)
    }

    /// Shifted kernel `Γ_n[κ](q) = γ_n(ω·q + κ)`, given `ω·q`.
    pub fn shifted_gamma(&self, n: usize, shift: f64, omega_dot_q: f64) -> f64 {
        self.gamma_n(n, omega_dot_q + shift)
    }

    /// `γ_{<n}` at a shifted argument.
    pub fn shifted_gamma_below(&self, n: usize, shift: f64, omega_dot_q: f64) -> f64 {
        self.gamma_below(n, omega_dot_q + shift)
    }

    /// Whether `Γ_{<n}(κ) ≠ 0`, i.e. `|κ| > η^{n+1}`.
    pub fn is_active(&self, n: usize, kappa: f64) -> bool {
        n > 0 && kappa.abs() > self.eta.powi(n as i32 + 1)
    }

    /// Whether `Γ_{<n}(κ) = 1/κ²` exactly, i.e. `|κ| ≥ η^n`.
    pub fn is_resolved(&self, n: usize, kappa: f64) -> bool {
        n > 0 && kappa.abs() >= self.eta.powi(n as i32)
    }

    /// Scale indices `n` with `χ_n(κ) ≠ 0`; one index or two adjacent ones.
    pub fn scale_set(&self, kappa: f64) -> Vec<usize> {
        if kappa == 0.0 {
            return Vec::new();
        }
        let centre = (kappa.abs().ln() / self.eta.ln()).floor().max(0.0) as usize;
        (centre.saturating_sub(2)..=centre + 2)
            .filter(|&n| self.chi_n(n, kappa) != 0.0)
            .collect()
    }

    /// Support of `γ_{n-1}`, the band solved at RG scale `n ≥ 1`:
    /// `(η^{n+1}, η^{n-1})`, unbounded above for `n = 1`.
    pub fn annulus(&self, n: usize) -> (f64, f64) {
        assert!(n >= 1, "RG scales start at 1");
        let lo = self.eta.powi(n as i32 + 1);
        let hi = if n == 1 { f64::INFINITY } else { self.eta.powi(n as i32 - 1) };
        (lo, hi)
    }

    /// Occupancy of each RG scale `1..=max_scale` on a window.
    pub fn scale_table(&self, omega: &[f64], window: &LatticeWindow) -> Vec<ScaleRow> {
        let kappas: Vec<f64> = window.points().filter(|q| !q.is_zero()).map(|q| q.dot(omega)).collect();
        (1..=self.max_scale)
            .map(|n| {
                let (lo, hi) = self.annulus(n);
                let mut count = 0;
                let mut max_gamma: f64 = 0.0;
                for &k in &kappas {
                    let g = self.gamma_n(n - 1, k);
                    if g != 0.0 {
                        count += 1;
                        max_gamma = max_gamma.max(g);
                    }
                }
                ScaleRow {
                    n,
                    annulus_lo: lo,
                    annulus_hi: hi,
                    mode_count: count,
                    max_gamma_n: max_gamma,
                }
            })
            .collect()
    }
}

/// One line of the scale occupancy table.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ScaleRow {
    pub n: usize,
    pub annulus_lo: f64,
    pub annulus_hi: f64,
    pub mode_count: usize,
    pub max_gamma_n: f64,
}

/// CSV with header `n,annulus_lo,annulus_hi,mode_count,max_gamma_n`.
pub fn scale_table_csv(rows: &[ScaleRow]) -> String {
    let mut out = String::from("n,annulus_lo,annulus_hi,mode_count,max_gamma_n\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:e},{:e},{},{:e}\n",
            r.n, r.annulus_lo, r.annulus_hi, r.mode_count, r.max_gamma_n
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mollifier_values() {
        assert_eq!(mollifier_h(1.0), 0.0);
        assert_eq!(mollifier_h(-1.0), 0.0);
        let c = mollifier_constant();
        assert!((c - 2.252_283_621_043_581).abs() < 1e-10, "{c}");
        assert!((mollifier_h(0.0) - c * (-1f64).exp()).abs() < 1e-15);
        let mass = integrate(mollifier_h, -1.0, 1.0, 0.0, 1e-13);
        assert!((mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cdf_table_matches_quadrature() {
        for i in 0..200 {
            let u = -0.995 + 1.99 * i as f64 / 199.0;
            let direct = integrate(mollifier_h, -1.0, u, 1e-300, 1e-14);
            let got = mollifier_cdf(u);
            assert!((got - direct).abs() < 1e-12, "u={u}: {got} vs {direct}");
        }
    }

    #[test]
    fn chi_bar_examples() {
        let s = ScaleDecomposition::new(0.5).unwrap();
        assert_eq!(s.chi_bar(0.3), 1.0);
        assert_eq!(s.chi_bar(0.5), 1.0);
        assert!(s.chi_bar(1.0).abs() < 1e-12);
        assert!(s.chi_bar(2.0).abs() < 1e-12);
        assert!((s.chi_bar(0.75) - 0.5).abs() < 1e-10);
    }

    #[test]
    fn gamma_examples() {
        let s = ScaleDecomposition::new(0.5).unwrap();
        assert!((s.gamma_n(0, 2.0) - 0.25).abs() < 1e-15);
        let k = 0.0371;
        let sum: f64 = (0..6).map(|n| s.gamma_n(n, k)).sum();
        assert!((sum - 1.0 / (k * k)).abs() < 1e-12 / (k * k));
    }

    #[test]
    fn scale_set_examples() {
        let s = ScaleDecomposition::new(0.5).unwrap();
        assert_eq!(s.scale_set(2.0), vec![0]);
        assert_eq!(s.scale_set(0.3), vec![0, 1]);
        // χ̄(0.8) ≈ 0.4 is positive, so χ₂(0.2) > 0 as well
        assert!(s.chi_bar(0.8) > 0.3 && s.chi_bar(0.8) < 0.5);
        assert_eq!(s.scale_set(0.2), vec![1, 2]);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let s = ScaleDecomposition::new(0.5).unwrap();
        for n in 0..4 {
            for &k in &[0.04, 0.07, 0.11, 0.2, 0.33, 0.6, 0.9] {
                let h = 1e-7;
                let fd = (s.gamma_n(n, k + h) - s.gamma_n(n, k - h)) / (2.0 * h);
                let an = s.dgamma_n(n, k);
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "n={n} k={k}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn adaptive_max_scale() {
        let omega = [1.0, (1.0 + 5f64.sqrt()) / 2.0];
        let w = LatticeWindow::new(2, 32);
        let s = ScaleDecomposition::for_window(0.5, &omega, &w).unwrap();
        // min |ω·q| on the window ≈ 0.0344 at (21,-13)
        assert_eq!(s.max_scale(), 5);
        assert!(ScaleDecomposition::for_window(0.5, &[1.0, 0.5], &w).is_err());
    }
}
