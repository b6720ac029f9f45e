use num_complex::Complex64;

use crate::compose::{Composer, Hessian};
use crate::error::{Error, Result};
use crate::fourier::FourierMap;
use crate::ladder::ApproximationLadder;
use crate::lattice::LatticeWindow;
use crate::linalg::gmres;
use crate::scales::ScaleDecomposition;

use super::StageConfig;

/// Relative accuracy of one composition, used as the absolute floor.
const ROUNDOFF: f64 = 64.0 * f64::EPSILON;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `Σ_q |v(q)|` for a dense window vector with `d` components per mode.
pub fn dense_l1(v: &[Complex64], d: usize) -> f64 {
    v.chunks(d)
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, |a, b| a + b)
}

/// Everything fixed during one outer stage `j`: the truncations `V^j`,
/// `V^{j-1}`, the previous solution `x̄` and `U = W^{j-1}(x̄)`.
pub struct StageProblem<'s> {
    pub(crate) j: u32,
    pub(crate) window: LatticeWindow,
    pub(crate) d: usize,
    pub(crate) kappas: Vec<f64>,
    pub(crate) comp: Composer,
    pub(crate) xbar: Vec<Complex64>,
    pub(crate) u: Vec<Complex64>,
    pub(crate) scales: &'s ScaleDecomposition,
}

/// An accepted solution of `z = Γ_{<n} W̃₀(z)`.
#[derive(Clone, Debug)]
pub struct ScaleSolution {
    pub z: Vec<Complex64>,
    /// `W̃₀(z)`.
    pub w: Vec<Complex64>,
    /// `λ∂²V^j` sampled at `θ + x̄ + z`.
    pub hessian: Hessian,
    pub iterations: usize,
    /// `(iteration, ‖z - Γ_{<n}W̃₀(z)‖₁)`.
    pub log: Vec<(usize, f64)>,
    pub final_residual: f64,
    pub tail: f64,
}

impl<'s> StageProblem<'s> {
    pub fn new(
        j: u32,
        ladder: &ApproximationLadder,
        lambda: f64,
        omega: &[f64],
        window: LatticeWindow,
        scales: &'s ScaleDecomposition,
        xbar: &FourierMap,
    ) -> Result<Self> {
        let d = window.dim();
        if omega.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: omega.len(),
            });
        }
        let comp = Composer::new(ladder.truncation(j), lambda, window)?;
        let xbar = xbar.to_dense(&window);
        let u = if j == 0 {
            vec![ZERO; window.len() * d]
        } else {
            Composer::with_grid(ladder.truncation(j - 1), lambda, comp.grid().clone())?
                .eval_dense(&xbar)
                .value
        };
        let kappas = window.points().map(|q| q.dot(omega)).collect();
        Ok(StageProblem {
            j,
            window,
            d,
            kappas,
            comp,
            xbar,
            u,
            scales,
        })
    }

    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }

    pub fn j(&self) -> u32 {
        self.j
    }

    pub fn composer(&self) -> &Composer {
        &self.comp
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappas
    }

    pub fn xbar(&self) -> &[Complex64] {
        &self.xbar
    }

    /// `W^{j-1}(x̄)`.
    pub fn previous_image(&self) -> &[Complex64] {
        &self.u
    }

    fn shifted(&self, y: &[Complex64]) -> Vec<Complex64> {
        self.xbar.iter().zip(y).map(|(a, b)| a + b).collect()
    }

    /// `W̃₀ʲ(Y) = Wʲ(x̄ + Y) - W^{j-1}(x̄)` on the window.
    pub fn wtilde(&self, y: &[Complex64]) -> Vec<Complex64> {
        let e = self.comp.eval_dense(&self.shifted(y));
        e.value.iter().zip(&self.u).map(|(a, b)| a - b).collect()
    }

    fn wtilde_with_hessian(&self, y: &[Complex64]) -> (Vec<Complex64>, Hessian, f64) {
        let (e, h) = self.comp.eval_with_hessian(&self.shifted(y));
        (e.value.iter().zip(&self.u).map(|(a, b)| a - b).collect(), h, e.tail)
    }

    /// `Γ_{<n}(ω·q + shift)` for every window mode, zero at `q = 0` when unshifted.
    pub fn kernel_below(&self, n: usize, shift: f64) -> Vec<f64> {
        self.kappas.iter().map(|&k| self.scales.shifted_gamma_below(n, shift, k)).collect()
    }

    /// `DW̃₀ʲ · v`, i.e. the Hessian multiplication operator `K`.
    pub fn apply_k(&self, hessian: &Hessian, v: &[Complex64]) -> Vec<Complex64> {
        self.comp.apply_hessian(hessian, v)
    }

    fn mul_kernel(&self, g: &[f64], v: &[Complex64]) -> Vec<Complex64> {
        let d = self.d;
        v.iter().enumerate().map(|(i, x)| x * g[i / d]).collect()
    }

    /// Solves `(1 - K diag(g)) u = b`.
    pub fn solve_resolvent(&self, hessian: &Hessian, g: &[f64], b: &[Complex64], tol: f64) -> Result<Vec<Complex64>> {
        let out = gmres(
            |v| {
                let kv = self.apply_k(hessian, &self.mul_kernel(g, v));
                v.iter().zip(&kv).map(|(a, b)| a - b).collect()
            },
            b,
            tol,
            60,
            1200,
        );
        if !out.converged && out.relative_residual > tol.sqrt() {
            return Err(Error::SingularResonanceMatrix { scale: 0 });
        }
        Ok(out.x)
    }

    /// Residual `z - g ⊙ W̃₀(z)` and the size it is measured against: the
    /// larger of `scale_tol·‖g ⊙ W̃₀(z)‖₁` and the cancellation floor of
    /// `Wʲ(x̄ + z) - W^{j-1}(x̄)`.
    fn residual(&self, z: &[Complex64], w: &[Complex64], g: &[f64], scale_tol: f64) -> (Vec<Complex64>, f64, f64) {
        let gw = self.mul_kernel(g, w);
        let f: Vec<Complex64> = z.iter().zip(&gw).map(|(a, b)| a - b).collect();
        let full: Vec<Complex64> = w.iter().zip(&self.u).map(|(a, b)| a + b).collect();
        let floor = ROUNDOFF * dense_l1(&self.mul_kernel(g, &full), self.d);
        let target = (scale_tol * dense_l1(&gw, self.d)).max(floor);
        (f.clone(), dense_l1(&f, self.d), target)
    }

    /// Damped Newton–GMRES for `z = Γ_{<n} W̃₀(z)`, warm-started at `z0`.
    pub fn solve_scale(&self, n: usize, z0: &[Complex64], cfg: &StageConfig) -> Result<ScaleSolution> {
        let g = self.kernel_below(n, 0.0);
        let d = self.d;
        let active: Vec<bool> = g.iter().map(|&x| x != 0.0).collect();
        let mask = |v: &mut Vec<Complex64>| {
            for (i, x) in v.iter_mut().enumerate() {
                if !active[i / d] {
                    *x = ZERO;
                }
            }
        };
        let mut z = z0.to_vec();
        mask(&mut z);
        let (mut w, mut hess, mut tail) = self.wtilde_with_hessian(&z);
        let (mut f, mut res, mut target) = self.residual(&z, &w, &g, cfg.scale_tol);
        let mut log = vec![(0, res)];
        let mut iterations = 0;
        while !(res <= target || res == 0.0) {
            if iterations >= cfg.max_newton {
                return Err(Error::MaxIterations { iterations, residual: res });
            }
            iterations += 1;
            let rhs: Vec<Complex64> = f.iter().map(|x| -x).collect();
            let lin = gmres(
                |v| {
                    let kv = self.apply_k(&hess, v);
                    let gkv = self.mul_kernel(&g, &kv);
                    v.iter().zip(&gkv).map(|(a, b)| a - b).collect()
                },
                &rhs,
                cfg.gmres_tol,
                60,
                1200,
            );
            let mut accepted = false;
            if lin.converged || lin.relative_residual < 1e-6 {
                let mut delta = lin.x;
                mask(&mut delta);
                let mut t = 1.0;
                for _ in 0..=cfg.max_halvings {
                    let trial: Vec<Complex64> = z.iter().zip(&delta).map(|(a, b)| a + b * t).collect();
                    let (tw, th, tt) = self.wtilde_with_hessian(&trial);
                    let (tf, tres, tscale) = self.residual(&trial, &tw, &g, cfg.scale_tol);
                    if tres < res {
                        z = trial;
                        (w, hess, tail, f, res, target) = (tw, th, tt, tf, tres, tscale);
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
            }
            if !accepted {
                // Newton made no progress: either we sit at the round-off floor
                // or the linear solve is useless and Picard must contract.
                if res <= 1e3 * target {
                    break;
                }
                let mut trial = self.mul_kernel(&g, &w);
                mask(&mut trial);
                let (tw, th, tt) = self.wtilde_with_hessian(&trial);
                let (tf, tres, tscale) = self.residual(&trial, &tw, &g, cfg.scale_tol);
                let factor = tres / res;
                if factor >= 1.0 {
                    return Err(Error::ContractionFailure { scale: n, factor });
                }
                z = trial;
                (w, hess, tail, f, res, target) = (tw, th, tt, tf, tres, tscale);
            }
            log.push((iterations, res));
        }
        Ok(ScaleSolution {
            z,
            w,
            hessian: hess,
            iterations,
            log,
            final_residual: res,
            tail,
        })
    }
}

/// `W̃₀ʲ(Y)` as a map: `Wʲ(x̄ + Y) - W^{j-1}(x̄)`, with `W^{-1} ≡ 0`.
pub fn wtilde0(
    j: u32,
    xbar: &FourierMap,
    y: &FourierMap,
    ladder: &ApproximationLadder,
    lambda: f64,
    window: LatticeWindow,
) -> Result<FourierMap> {
    let scales = ScaleDecomposition::new(0.5)?;
    let omega = vec![0.0; window.dim()];
    let p = StageProblem::new(j, ladder, lambda, &omega, window, &scales, xbar)?;
    let w = p.wtilde(&y.to_dense(&window));
    Ok(FourierMap::from_dense(&window, true, &w))
}
