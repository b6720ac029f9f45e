//! Independent reference solutions.
//!
//! Nothing here touches the FFT grid, the cutoffs or the composition code of
//! the main solver: trigonometric sums are done by direct DFT with a
//! roots-of-unity table, the potential is summed term by term with `sin`/`cos`,
//! and the Newton system is dense on the smallest lattice the solution can
//! live on.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{FourierMap, Potential};
use crate::lattice::{LatticePoint, LatticeWindow};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dense Newton refuses systems with more unknowns than this.
pub const MAX_UNKNOWNS: usize = 2500;

/// Direct-DFT evaluator on an odd grid of `4L + 1` points per axis.
pub struct DirectEvaluator {
    dim: usize,
    n: usize,
    roots: Vec<Complex64>,
}

impl DirectEvaluator {
    /// Resolves frequencies up to `|q|∞ ≤ 2·bound` without aliasing.
    pub fn new(dim: usize, bound: u32) -> Self {
        let n = 4 * bound as usize + 1;
        let roots = (0..n).map(|k| Complex64::from_polar(1.0, -TAU * k as f64 / n as f64)).collect();
        DirectEvaluator { dim, n, roots }
    }

    fn slot(&self, q: &LatticePoint) -> usize {
        q.0.iter().fold(0, |acc, &c| acc * self.n + c.rem_euclid(self.n as i32) as usize)
    }

    #[cfg(test)]
    fn freq(&self, k: usize) -> i32 {
        let n = self.n as i32;
        let k = k as i32;
        if k <= n / 2 {
            k
        } else {
            k - n
        }
    }

    /// Axis-by-axis `out[j] = Σ_k in[k] e^{∓2πi jk/n}`.
    fn dft(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let total = data.len();
        let mut line = vec![ZERO; n];
        let mut out = vec![ZERO; n];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            for o in 0..total / (n * stride) {
                for inner in 0..stride {
                    let base = o * n * stride + inner;
                    for (k, l) in line.iter_mut().enumerate() {
                        *l = data[base + k * stride];
                    }
                    for (j, slot) in out.iter_mut().enumerate() {
                        let mut s = ZERO;
                        for (k, l) in line.iter().enumerate() {
                            if *l == ZERO {
                                continue;
                            }
                            let w = self.roots[(j * k) % n];
                            s += l * if inverse { w.conj() } else { w };
                        }
                        *slot = s;
                    }
                    for (k, v) in out.iter().enumerate() {
                        data[base + k * stride] = if inverse { v / n as f64 } else { *v };
                    }
                }
            }
        }
    }

    fn points(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    fn theta(&self, mut k: usize) -> Vec<f64> {
        let mut t = vec![0.0; self.dim];
        for a in (0..self.dim).rev() {
            t[a] = TAU * (k % self.n) as f64 / self.n as f64;
            k /= self.n;
        }
        t
    }

    /// Samples of each component of `x` on the grid.
    fn samples(&self, x: &FourierMap) -> Vec<Vec<Complex64>> {
        (0..self.dim)
            .map(|c| {
                let mut buf = vec![ZERO; self.points()];
                for (q, v) in x.modes() {
                    buf[self.slot(q)] += v[c];
                }
                self.dft(&mut buf, false);
                buf
            })
            .collect()
    }

    /// Gradient and Hessian of `λV` at every displaced grid point.
    fn derivatives(&self, pot: &Potential, lambda: f64, x: &FourierMap, hessian: bool) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let d = self.dim;
        let xs = self.samples(x);
        let np = self.points();
        let mut grad = vec![vec![0.0; np]; d];
        let mut hess = if hessian { vec![vec![0.0; np]; d * d] } else { Vec::new() };
        let modes: Vec<(LatticePoint, Complex64)> = pot.modes().filter(|(q, _)| !q.is_zero()).map(|(q, v)| (q.clone(), v)).collect();
        for k in 0..np {
            let mut xi = self.theta(k);
            for a in 0..d {
                xi[a] += xs[a][k].re;
            }
            for (q, v) in &modes {
                let phase = -q.dot(&xi);
                let e = v * Complex64::new(phase.cos(), phase.sin());
                for a in 0..d {
                    grad[a][k] += lambda * (-I * q.0[a] as f64 * e).re;
                    if hessian {
                        for b in 0..d {
                            hess[a * d + b][k] -= lambda * (q.0[a] * q.0[b]) as f64 * e.re;
                        }
                    }
                }
            }
        }
        (grad, hess)
    }

    fn spectrum(&self, samples: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = samples.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        self.dft(&mut buf, true);
        buf
    }

    /// Coefficients of `λ∂V(θ + X(θ))` on `window`.
    pub fn w0(&self, pot: &Potential, lambda: f64, x: &FourierMap, window: &LatticeWindow) -> FourierMap {
        let (grad, _) = self.derivatives(pot, lambda, x, false);
        let specs: Vec<Vec<Complex64>> = grad.iter().map(|g| self.spectrum(g)).collect();
        let d = self.dim;
        let mut dense = vec![ZERO; window.len() * d];
        for (i, q) in window.points().enumerate() {
            let s = self.slot(&q);
            for (c, sp) in specs.iter().enumerate() {
                dense[i * d + c] = sp[s];
            }
        }
        let mut out = FourierMap::from_dense(window, true, &dense);
        out.symmetrize();
        out
    }

    /// Frequency of a grid slot as a lattice point.
    #[cfg(test)]
    fn slot_point(&self, mut s: usize) -> LatticePoint {
        let mut v = vec![0; self.dim];
        for a in (0..self.dim).rev() {
            v[a] = self.freq(s % self.n);
            s /= self.n;
        }
        LatticePoint(v)
    }
}

/// `‖D²X + λ∂V(θ+X)‖₁` over the window of `x`, including the mean mode.
pub fn residual(pot: &Potential, x: &FourierMap, lambda: f64, omega: &[f64]) -> f64 {
    let w = x.window();
    let eval = DirectEvaluator::new(x.dim(), w.bound().max(pot.max_mode()));
    let w0 = eval.w0(pot, lambda, x, &w);
    let d2 = x.apply_d2(omega);
    d2.add(&w0).map(|r| r.ell1_norm()).unwrap_or(f64::INFINITY)
}

/// `|∫ λ∂V(θ+X)dθ|`, the solvability condition of the mean equation.
pub fn mean_defect(pot: &Potential, x: &FourierMap, lambda: f64) -> f64 {
    let eval = DirectEvaluator::new(x.dim(), x.lattice_bound().max(pot.max_mode()));
    let w = LatticeWindow::new(x.dim(), 0);
    crate::fourier::vec_norm(&eval.w0(pot, lambda, x, &w).coeff(&LatticePoint::zero(x.dim())))
}

/// Window modes reachable from 0 by integer combinations of the potential's
/// modes: the only modes the solution can occupy.
pub fn support(pot: &Potential, bound: u32) -> Vec<LatticePoint> {
    let d = pot.dim();
    let gens: Vec<LatticePoint> = pot.modes().map(|(q, _)| q.clone()).filter(|q| !q.is_zero()).collect();
    let box_bound = 3 * bound.max(pot.max_mode()) as i64;
    let mut seen = BTreeSet::new();
    let zero = LatticePoint::zero(d);
    seen.insert(zero.clone());
    let mut queue = VecDeque::from([zero]);
    while let Some(p) = queue.pop_front() {
        for g in &gens {
            let next = &p + g;
            if next.0.iter().any(|&c| (c as i64).abs() > box_bound) {
                continue;
            }
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    seen.into_iter().filter(|q| !q.is_zero() && q.linf() <= bound).collect()
}

/// Result of [`newton_solve`].
#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub x: FourierMap,
    /// Independent residual of the torus equation, mean mode included.
    pub residual: f64,
    pub newton_iters: usize,
    pub lindstedt_orders: Vec<FourierMap>,
}

/// Solves `x = G₀ P λ∂V(θ + X)` on `|q|∞ ≤ bound` by dense Newton.
pub fn newton_solve(pot: &Potential, omega: &[f64], lambda: f64, bound: u32, x_init: Option<&FourierMap>) -> Result<OracleSolution> {
    let d = pot.dim();
    if omega.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: omega.len(),
        });
    }
    let sup = support(pot, bound);
    for q in &sup {
        if q.dot(omega) == 0.0 {
            return Err(Error::ResonantFrequency(q.clone()));
        }
    }
    let unknowns = sup.len() * d;
    if unknowns > MAX_UNKNOWNS {
        return Err(Error::OracleTooLarge {
            unknowns,
            limit: MAX_UNKNOWNS,
        });
    }
    let window = LatticeWindow::new(d, bound);
    let mut x = match x_init {
        Some(m) => m.truncate(bound).project_p().with_bound(bound)?,
        None => FourierMap::zero(d, bound, true),
    };
    if lambda == 0.0 || sup.is_empty() {
        let x = FourierMap::zero(d, bound, true);
        let residual = residual(pot, &x, lambda, omega);
        return Ok(OracleSolution {
            x,
            residual,
            newton_iters: 0,
            lindstedt_orders: Vec::new(),
        });
    }
    let eval = DirectEvaluator::new(d, bound.max(pot.max_mode()));
    let kappa: Vec<f64> = sup.iter().map(|q| q.dot(omega)).collect();

    let defect = |x: &FourierMap| -> (DVector<Complex64>, f64) {
        let w = eval.w0(pot, lambda, x, &window);
        let mut f = DVector::zeros(unknowns);
        for (i, q) in sup.iter().enumerate() {
            let xv = x.coeff(q);
            let wv = w.coeff(q);
            for c in 0..d {
                f[i * d + c] = xv[c] - wv[c] / (kappa[i] * kappa[i]);
            }
        }
        let norm = (0..sup.len())
            .map(|i| (0..d).map(|c| f[i * d + c].norm_sqr()).sum::<f64>().sqrt())
            .sum();
        (f, norm)
    };
    let (mut f, mut fnorm) = defect(&x);
    let mut iters = 0;
    let scale = |x: &FourierMap| x.ell1_norm().max(f64::MIN_POSITIVE);
    while fnorm > 1e-15 * scale(&x) {
        if iters >= 50 || !fnorm.is_finite() {
            return Err(Error::DivergedOracle {
                iterations: iters,
                residual: fnorm,
            });
        }
        iters += 1;
        let (_, hess) = eval.derivatives(pot, lambda, &x, true);
        let hspec: Vec<Vec<Complex64>> = hess.iter().map(|h| eval.spectrum(h)).collect();
        let mut jac = DMatrix::<Complex64>::identity(unknowns, unknowns);
        for (i, q) in sup.iter().enumerate() {
            let k2 = kappa[i] * kappa[i];
            for (l, p) in sup.iter().enumerate() {
                let s = eval.slot(&(q - p));
                for a in 0..d {
                    for b in 0..d {
                        jac[(i * d + a, l * d + b)] -= hspec[a * d + b][s] / k2;
                    }
                }
            }
        }
        let step = jac.lu().solve(&(-&f)).ok_or(Error::DivergedOracle {
            iterations: iters,
            residual: fnorm,
        })?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial = apply_step(&x, &sup, &step, t, d, bound)?;
            let (tf, tn) = defect(&trial);
            if tn < fnorm || tn <= 1e-15 * scale(&trial) {
                x = trial;
                f = tf;
                fnorm = tn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if fnorm <= 1e-12 * scale(&x) {
                break;
            }
            return Err(Error::DivergedOracle {
                iterations: iters,
                residual: fnorm,
            });
        }
    }
    let res = residual(pot, &x, lambda, omega);
    Ok(OracleSolution {
        x,
        residual: res,
        newton_iters: iters,
        lindstedt_orders: Vec::new(),
    })
}

fn apply_step(x: &FourierMap, sup: &[LatticePoint], step: &DVector<Complex64>, t: f64, d: usize, bound: u32) -> Result<FourierMap> {
    let modes = sup.iter().enumerate().map(|(i, q)| {
        let v: Vec<Complex64> = (0..d).map(|c| step[i * d + c] * t).collect();
        (q.clone(), v)
    });
    let delta = FourierMap::from_modes(d, bound, false, modes)?;
    let mut out = FourierMap::from_dense(
        &LatticeWindow::new(d, bound),
        true,
        &x.add(&delta)?.to_dense(&LatticeWindow::new(d, bound)),
    );
    out.symmetrize();
    Ok(out)
}

type Series = BTreeMap<LatticePoint, Complex64>;

fn convolve(a: &Series, b: &Series) -> Series {
    let mut out = Series::new();
    for (p, x) in a {
        for (q, y) in b {
            *out.entry(p + q).or_insert(ZERO) += x * y;
        }
    }
    out
}

/// `X_1, …, X_K` of the formal expansion `X = Σ λ^k X_k`, from
/// `D²X = -λ∂V(θ + X)` order by order. `e^{-iq·X}` is expanded with the
/// exponential-series recursion `E_k = (1/k) Σ_m m A_m E_{k-m}`.
pub fn lindstedt(pot: &Potential, omega: &[f64], order: usize) -> Result<Vec<FourierMap>> {
    let d = pot.dim();
    let modes: Vec<(LatticePoint, Complex64)> = pot.modes().filter(|(q, _)| !q.is_zero()).map(|(q, v)| (q.clone(), v)).collect();
    let mut xs: Vec<BTreeMap<LatticePoint, Vec<Complex64>>> = Vec::new();
    // e[m][k]: order-k coefficient of e^{-i q_m·X}
    let one: Series = [(LatticePoint::zero(d), Complex64::new(1.0, 0.0))].into();
    let mut e: Vec<Vec<Series>> = modes.iter().map(|_| vec![one.clone()]).collect();
    let mut a: Vec<Vec<Series>> = modes.iter().map(|_| vec![Series::new()]).collect();
    for k in 0..order {
        // forcing of order k: Σ_q (-iq) v(q) e^{-iqθ} E_{q,k}
        let mut force: BTreeMap<LatticePoint, Vec<Complex64>> = BTreeMap::new();
        for (m, (q, v)) in modes.iter().enumerate() {
            for (p, c) in &e[m][k] {
                let slot = force.entry(p + q).or_insert_with(|| vec![ZERO; d]);
                for (g, s) in slot.iter_mut().enumerate() {
                    *s += -I * q.0[g] as f64 * v * c;
                }
            }
        }
        let mut next = BTreeMap::new();
        for (p, f) in force {
            if p.is_zero() {
                continue;
            }
            let kp = p.dot(omega);
            if kp == 0.0 {
                return Err(Error::ResonantFrequency(p));
            }
            let v: Vec<Complex64> = f.iter().map(|c| c / (kp * kp)).collect();
            if v.iter().any(|c| *c != ZERO) {
                next.insert(p, v);
            }
        }
        xs.push(next);
        let new = xs.last().expect("just pushed");
        // extend A and E to order k+1
        for (m, (q, _)) in modes.iter().enumerate() {
            let am: Series = new
                .iter()
                .map(|(p, v)| {
                    let dot: Complex64 = (0..d).map(|g| v[g] * q.0[g] as f64).sum();
                    (p.clone(), -I * dot)
                })
                .collect();
            a[m].push(am);
            let kk = k + 1;
            let mut ek = Series::new();
            for j in 1..=kk {
                for (p, c) in convolve(&a[m][j], &e[m][kk - j]) {
                    *ek.entry(p).or_insert(ZERO) += c * (j as f64 / kk as f64);
                }
            }
            e[m].push(ek);
        }
    }
    xs.into_iter()
        .map(|m| {
            let bound = m.keys().map(LatticePoint::linf).max().unwrap_or(1).max(1);
            FourierMap::from_modes(d, bound, true, m)
        })
        .collect()
}

/// `Σ_{k≤K} λ^k X_k` on a common lattice bound.
pub fn lindstedt_sum(orders: &[FourierMap], lambda: f64, upto: usize, bound: u32) -> FourierMap {
    let d = orders.first().map_or(1, FourierMap::dim);
    let mut acc = FourierMap::zero(d, bound, true);
    for (k, xk) in orders.iter().take(upto).enumerate() {
        let term = xk.truncate(bound).scale(lambda.powi(k as i32 + 1));
        acc = acc.add(&term).expect("same dim");
    }
    acc.with_bound(bound).expect("truncated")
}

/// `{l1_distance, per_mode_max, lambda, bound}` between two solutions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub l1_distance: f64,
    pub per_mode_max: f64,
    pub lambda: f64,
    pub bound: u32,
}

pub fn compare(a: &FourierMap, b: &FourierMap, lambda: f64) -> Result<Comparison> {
    let diff = a.sub(b)?;
    let per_mode_max = diff.modes().map(|(_, v)| crate::fourier::vec_norm(v)).fold(0.0, f64::max);
    Ok(Comparison {
        l1_distance: diff.ell1_norm(),
        per_mode_max,
        lambda,
        bound: a.lattice_bound().max(b.lattice_bound()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frequency::golden;

    fn lp(v: &[i32]) -> LatticePoint {
        LatticePoint(v.to_vec())
    }

    #[test]
    fn direct_dft_roundtrip() {
        let ev = DirectEvaluator::new(2, 3);
        let m = FourierMap::from_modes(
            2,
            3,
            true,
            [(lp(&[2, -3]), vec![Complex64::new(0.1, 0.3), Complex64::new(-1.0, 0.0)])],
        )
        .unwrap();
        let s = ev.samples(&m);
        for k in [0, 17, 100] {
            let direct = m.eval(&ev.theta(k));
            assert!((s[1][k] - direct[1]).norm() < 1e-14);
        }
        let mut buf = s[0].clone();
        ev.dft(&mut buf, true);
        let slot = ev.slot(&lp(&[2, -3]));
        assert!((buf[slot] - Complex64::new(0.1, 0.3)).norm() < 1e-14);
        assert_eq!(ev.slot_point(slot), lp(&[2, -3]));
    }

    #[test]
    fn support_of_single_cosine_is_a_line() {
        let v = Potential::cosine(lp(&[1, 0]), 3);
        let s = support(&v, 32);
        assert_eq!(s.len(), 64);
        assert!(s.iter().all(|q| q.0[1] == 0));
    }

    #[test]
    fn zero_coupling() {
        let v = Potential::cosine(lp(&[1, 0]), 3);
        let sol = newton_solve(&v, &[1.0, golden()], 0.0, 8, None).unwrap();
        assert!(sol.x.is_empty());
        assert_eq!(sol.newton_iters, 0);
    }

    #[test]
    fn first_lindstedt_order() {
        let v = Potential::cosine(lp(&[1, 0]), 3);
        let xs = lindstedt(&v, &[1.0, golden()], 1).unwrap();
        let x1 = xs[0].coeff(&lp(&[1, 0]));
        assert!((x1[0] - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert_eq!(x1[1], ZERO);
        // v even and real ⇒ x₁(-q) = -x₁(q) = conj x₁(q)
        let xm = xs[0].coeff(&lp(&[-1, 0]));
        assert!((xm[0] + x1[0]).norm() < 1e-15 && (xm[0] - x1[0].conj()).norm() < 1e-15);
    }

    #[test]
    fn newton_converges_on_cosine() {
        let v = Potential::cosine(lp(&[1, 0]), 3);
        let omega = [1.0, golden()];
        let sol = newton_solve(&v, &omega, 1e-3, 16, None).unwrap();
        assert!(sol.residual <= 1e-12, "{}", sol.residual);
        assert!(sol.x.get(&LatticePoint::zero(2)).is_none());
    }
}
