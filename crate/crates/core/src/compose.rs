//! `W₀(X)(θ) = λ ∂V(θ + X(θ))` by sampling `X`, summing the potential's
//! modes at the displaced points, and transforming back.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::{FourierMap, Potential};
use crate::grid::SpectralGrid;
use crate::lattice::LatticeWindow;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative ℓ¹ mass of `|q|²|v(q)|` that screening may discard.
const SCREEN_REL: f64 = 1e-18;

/// Dense coefficients of `W₀(X)` on the window plus the discarded spectrum.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: Vec<Complex64>,
    pub tail: f64,
}

/// Samples of `λ ∂²V(θ + X(θ))`, upper triangle `(a ≤ b)` row-major.
#[derive(Clone, Debug)]
pub struct Hessian {
    dim: usize,
    entries: Vec<Vec<f64>>,
}

impl Hessian {
    fn slot(&self, a: usize, b: usize) -> usize {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        a * self.dim - a * (a + 1) / 2 + b
    }

    pub fn at(&self, a: usize, b: usize) -> &[f64] {
        &self.entries[self.slot(a, b)]
    }

    /// Grid average of entry `(a, b)`, i.e. its zero Fourier mode.
    pub fn mean(&self, a: usize, b: usize) -> f64 {
        let e = self.at(a, b);
        e.iter().sum::<f64>() / e.len() as f64
    }
}

/// A potential prepared for repeated composition on one lattice window.
#[derive(Clone, Debug)]
pub struct Composer {
    grid: SpectralGrid,
    lambda: f64,
    half: Vec<(Vec<i32>, Complex64)>,
    max_pow: Vec<usize>,
    at_zero: Vec<Complex64>,
}

impl Composer {
    pub fn new(pot: &Potential, lambda: f64, window: LatticeWindow) -> Result<Self> {
        if pot.dim() != window.dim() {
            return Err(Error::DimensionMismatch {
                expected: window.dim(),
                got: pot.dim(),
            });
        }
        let grid = SpectralGrid::oversampled(window, pot.max_mode())?;
        Composer::with_grid(pot, lambda, grid)
    }

    pub fn with_grid(pot: &Potential, lambda: f64, grid: SpectralGrid) -> Result<Self> {
        let window = *grid.window();
        let d = window.dim();
        if pot.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: pot.dim(),
            });
        }
        // one representative per ±q pair: the lexicographically positive one
        let mut half: Vec<(Vec<i32>, Complex64, f64)> = pot
            .modes()
            .filter(|(q, v)| !q.is_zero() && q.0.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0) && *v != ZERO)
            .map(|(q, v)| {
                let l1 = q.l1() as f64;
                (q.0.clone(), v, v.norm() * l1 * l1.max(1.0))
            })
            .collect();
        let total: f64 = half.iter().map(|m| m.2).sum();
        half.sort_by(|a, b| a.2.total_cmp(&b.2));
        let mut dropped = 0.0;
        let cut = half
            .iter()
            .take_while(|m| {
                dropped += m.2;
                dropped <= SCREEN_REL * total
            })
            .count();
        let half: Vec<(Vec<i32>, Complex64)> = half.drain(cut..).map(|(q, v, _)| (q, v)).collect();
        let mut max_pow = vec![0usize; d];
        for (q, _) in &half {
            for (m, &c) in max_pow.iter_mut().zip(q) {
                *m = (*m).max(c.unsigned_abs() as usize);
            }
        }
        let mut at_zero = vec![ZERO; window.len() * d];
        for (q, v) in pot.modes() {
            if let Some(i) = window.index(q) {
                for c in 0..d {
                    at_zero[i * d + c] = -I * (q.0[c] as f64) * v * lambda;
                }
            }
        }
        Ok(Composer {
            grid,
            lambda,
            half,
            max_pow,
            at_zero,
        })
    }

    pub fn window(&self) -> &LatticeWindow {
        self.grid.window()
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `λ ∂V` on the window, exactly.
    pub fn at_zero(&self) -> &[Complex64] {
        &self.at_zero
    }

    fn displaced_sums(&self, x: &[Complex64], want_hessian: bool) -> (Vec<Vec<Complex64>>, Option<Hessian>) {
        let d = self.window().dim();
        let npts = self.grid.points();
        let xs: Vec<Vec<Complex64>> = (0..d).map(|c| self.grid.synthesize(x, d, c)).collect();
        let mut grad = vec![vec![ZERO; npts]; d];
        let nh = d * (d + 1) / 2;
        let mut hess = if want_hessian { vec![vec![0.0; npts]; nh] } else { Vec::new() };
        let mut pows: Vec<Vec<Complex64>> = self.max_pow.iter().map(|&m| vec![ZERO; 2 * m + 1]).collect();
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; nh];
        for k in 0..npts {
            let theta = self.grid.theta(k);
            for a in 0..d {
                let m = self.max_pow[a];
                let xi = theta[a] + xs[a][k].re;
                let e = Complex64::from_polar(1.0, -xi);
                let p = &mut pows[a];
                p[m] = Complex64::new(1.0, 0.0);
                for j in 1..=m {
                    p[m + j] = p[m + j - 1] * e;
                    p[m - j] = p[m + j].conj();
                }
            }
            g.iter_mut().for_each(|v| *v = 0.0);
            h.iter_mut().for_each(|v| *v = 0.0);
            for (q, v) in &self.half {
                let mut e = *v;
                for a in 0..d {
                    e *= pows[a][(self.max_pow[a] as i32 + q[a]) as usize];
                }
                // v e^{-iqξ} + c.c. contributes 2 q Im and -2 q q Re
                for a in 0..d {
                    g[a] += q[a] as f64 * e.im;
                }
                if want_hessian {
                    let mut s = 0;
                    for a in 0..d {
                        for b in a..d {
                            h[s] -= (q[a] * q[b]) as f64 * e.re;
                            s += 1;
                        }
                    }
                }
            }
            for a in 0..d {
                grad[a][k] = Complex64::new(2.0 * self.lambda * g[a], 0.0);
            }
            if want_hessian {
                for s in 0..nh {
                    hess[s][k] = 2.0 * self.lambda * h[s];
                }
            }
        }
        let hessian = want_hessian.then_some(Hessian { dim: d, entries: hess });
        (grad, hessian)
    }

    fn to_window(&self, samples: &[Vec<Complex64>]) -> Evaluation {
        let d = samples.len();
        let mut value = vec![ZERO; self.window().len() * d];
        let mut tail = 0.0;
        for (c, s) in samples.iter().enumerate() {
            tail += self.grid.analyze_into(s, &mut value, d, c);
        }
        hermitian_project(self.window(), d, &mut value);
        Evaluation { value, tail }
    }

    /// `W₀(X)` for a dense real map on the window.
    pub fn eval_dense(&self, x: &[Complex64]) -> Evaluation {
        if x.iter().all(|c| *c == ZERO) {
            return Evaluation {
                value: self.at_zero.clone(),
                tail: 0.0,
            };
        }
        let (grad, _) = self.displaced_sums(x, false);
        self.to_window(&grad)
    }

    /// `W₀(X)` together with the sampled Hessian at `θ + X(θ)`.
    pub fn eval_with_hessian(&self, x: &[Complex64]) -> (Evaluation, Hessian) {
        let (grad, hess) = self.displaced_sums(x, true);
        let eval = if x.iter().all(|c| *c == ZERO) {
            Evaluation {
                value: self.at_zero.clone(),
                tail: 0.0,
            }
        } else {
            self.to_window(&grad)
        };
        (eval, hess.expect("hessian requested"))
    }

    /// `DW₀(X)·Y`: pointwise `λ ∂²V(θ+X) Y(θ)` projected to the window.
    pub fn apply_hessian(&self, hess: &Hessian, y: &[Complex64]) -> Vec<Complex64> {
        let d = self.window().dim();
        let ys: Vec<Vec<Complex64>> = (0..d).map(|c| self.grid.synthesize(y, d, c)).collect();
        let npts = self.grid.points();
        let mut out = vec![ZERO; self.window().len() * d];
        let mut prod = vec![ZERO; npts];
        for a in 0..d {
            prod.iter_mut().for_each(|p| *p = ZERO);
            for (b, yb) in ys.iter().enumerate() {
                let hab = hess.at(a, b);
                for k in 0..npts {
                    prod[k] += yb[k] * hab[k];
                }
            }
            self.grid.analyze_into(&prod, &mut out, d, a);
        }
        out
    }

    /// Map-level composition, truncated to the composer's window.
    pub fn compose(&self, x: &FourierMap) -> Result<Composition> {
        if !x.is_real() {
            return Err(Error::InvalidInput("composition requires a real-valued map".into()));
        }
        let w = self.window();
        if x.lattice_bound() > w.bound() {
            return Err(Error::InvalidInput(format!(
                "map bound {} exceeds composition window {}",
                x.lattice_bound(),
                w.bound()
            )));
        }
        let eval = self.eval_dense(&x.to_dense(w));
        Ok(Composition {
            map: FourierMap::from_dense(w, true, &eval.value),
            tail: eval.tail,
        })
    }
}

/// Result of [`compose_w0`].
#[derive(Clone, Debug)]
pub struct Composition {
    pub map: FourierMap,
    /// ℓ¹ mass of the spectrum beyond the window. Large values mean the
    /// window is too small for the requested accuracy.
    pub tail: f64,
}

/// `λ ∂V(θ + X(θ))` truncated to the lattice bound of `x`.
pub fn compose_w0(pot: &Potential, x: &FourierMap, lambda: f64) -> Result<Composition> {
    Composer::new(pot, lambda, x.window())?.compose(x)
}

/// Enforces `v(-q) = conj v(q)` on a dense window vector.
pub(crate) fn hermitian_project(window: &LatticeWindow, d: usize, v: &mut [Complex64]) {
    let len = window.len();
    for i in 0..=len / 2 {
        let m = window.mirror(i);
        for c in 0..d {
            let a = v[i * d + c];
            let b = v[m * d + c];
            let s = (a + b.conj()) * 0.5;
            v[i * d + c] = s;
            v[m * d + c] = s.conj();
        }
    }
}
