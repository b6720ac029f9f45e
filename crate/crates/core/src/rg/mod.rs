//! One outer stage of the renormalization scheme.
//!
//! For fixed `j` the correction `y^j` solves `Y = G₀ W̃₀ʲ(Y)` with
//! `W̃₀ʲ(Y) = Wʲ(x̄ + Y) - W^{j-1}(x̄)`. Instead of inverting `G₀` at once, the
//! small divisors are admitted one band at a time: scale `n` solves
//! `z_n = Γ_{<n} W̃₀ʲ(z_n)` starting from `z_{n-1}`, and `y^j = z_N` once
//! `Γ_{<N} = G₀` on the whole window.

mod resonance;
mod stage;
mod ward;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::FourierMap;
use crate::ladder::ApproximationLadder;
use crate::lattice::{LatticePoint, LatticeWindow};
use crate::scales::ScaleDecomposition;

pub use resonance::{linearization_h, resonance_diagnostics, sigma_at, ResonanceDiagnostics, EXACT_COLUMN_LIMIT};
pub use stage::{dense_l1, wtilde0, ScaleSolution, StageProblem};
pub use ward::{ward_residual_constant, ward_residual_derivative};

/// Tolerances and diagnostic switches for a stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageConfig {
    /// Relative ℓ¹ tolerance of each scale's fixed point.
    pub scale_tol: f64,
    /// Threshold on `‖z_n - z_{n-1}‖₁` below which growth is not alarming.
    pub stage_tol: f64,
    pub max_newton: usize,
    pub max_halvings: usize,
    pub gmres_tol: f64,
    /// Modes probed by the derivative Ward check; empty means `±e_a`.
    pub probes: Vec<LatticePoint>,
    /// Compute `‖H‖` and `σ`.
    pub resonance: bool,
    /// Shifts sampled for the `σ` envelope.
    pub sigma_samples: usize,
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig {
            scale_tol: 1e-12,
            stage_tol: 1e-11,
            max_newton: 50,
            max_halvings: 8,
            gmres_tol: 1e-13,
            probes: Vec::new(),
            resonance: true,
            sigma_samples: 8,
        }
    }
}

impl StageConfig {
    pub fn probe_set(&self, dim: usize) -> Vec<LatticePoint> {
        if !self.probes.is_empty() {
            return self.probes.clone();
        }
        (0..dim)
            .flat_map(|a| [LatticePoint::unit(dim, a, 1), LatticePoint::unit(dim, a, -1)])
            .collect()
    }
}

/// One accepted scale, as written to the stage report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRecord {
    pub n: usize,
    pub iters: usize,
    pub final_residual: f64,
    pub ward_const: f64,
    pub ward_deriv: f64,
    /// `None` when resonance diagnostics are switched off.
    #[serde(rename = "H_norm")]
    pub h_norm: Option<f64>,
    pub sigma00_abs: Option<f64>,
    pub dsigma00_abs: Option<f64>,
    pub z_norm: f64,
    pub dz_norm: f64,
    pub sigma_envelope: Option<f64>,
    pub rho_offdiag_decay: Option<f64>,
    /// `Σ e^{ᾱ_{j,n}|q|₁}|z_n(q)|` with `ᾱ_{j,n} = (n+2)/(2n+2)·ᾱ_j`.
    pub z_weighted_norm: f64,
    pub mean_mode: f64,
    pub composition_tail: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub j: u32,
    pub scales: Vec<ScaleRecord>,
    pub y_norm: f64,
}

/// Solver state after an accepted scale.
#[derive(Clone, Debug)]
pub struct RGStageState {
    pub j: u32,
    pub n: usize,
    pub z: FourierMap,
    pub w_at_z: FourierMap,
    pub ward_residual_constant: f64,
    pub ward_residual_derivative: f64,
    pub convergence_log: Vec<(usize, f64)>,
    pub contraction_estimate: f64,
}

/// Result of [`run_stage`]; the report is filled up to the failing scale.
#[derive(Debug)]
pub struct StageRun {
    pub report: StageReport,
    pub result: Result<(FourierMap, RGStageState)>,
}

/// Everything a stage needs besides `x̄`.
pub struct StageContext<'a> {
    pub ladder: &'a ApproximationLadder,
    pub lambda: f64,
    pub omega: &'a [f64],
    pub window: LatticeWindow,
    pub scales: &'a ScaleDecomposition,
    pub config: &'a StageConfig,
}

/// Sweeps scales `1..=N` for stage `j` and returns `y^j`.
pub fn run_stage(j: u32, xbar: &FourierMap, ctx: &StageContext) -> StageRun {
    run_stage_from(j, xbar, None, ctx)
}

/// [`run_stage`] with Newton warm-started at `guess` (e.g. `y^j` of a nearby
/// coupling). Each scale only keeps the part of the guess it can see.
pub fn run_stage_from(j: u32, xbar: &FourierMap, guess: Option<&FourierMap>, ctx: &StageContext) -> StageRun {
    let mut report = StageReport {
        j,
        scales: Vec::new(),
        y_norm: 0.0,
    };
    let result = sweep(j, xbar, guess, ctx, &mut report);
    StageRun { report, result }
}

fn sweep(
    j: u32,
    xbar: &FourierMap,
    guess: Option<&FourierMap>,
    ctx: &StageContext,
    report: &mut StageReport,
) -> Result<(FourierMap, RGStageState)> {
    let cfg = ctx.config;
    let p = StageProblem::new(j, ctx.ladder, ctx.lambda, ctx.omega, ctx.window, ctx.scales, xbar)?;
    let d = ctx.window.dim();
    let len = ctx.window.len();
    let probes = cfg.probe_set(d);
    let alpha_bar = {
        let c = ctx.ladder.constants(j).alpha_bar;
        *c.numer() as f64 / *c.denom() as f64
    };
    let guess = guess.map(|g| g.truncate(ctx.window.bound()).project_p().to_dense(&ctx.window));
    let mut z = vec![Complex64::new(0.0, 0.0); len * d];
    let mut hess_prev = p.composer().eval_with_hessian(p.xbar()).1;
    let mut growth = 0;
    let mut last_dz = f64::INFINITY;
    let mut state = None;
    for n in 1..=ctx.scales.max_scale() {
        let start = match &guess {
            // modes admitted only now take their value from the guess
            Some(g) => {
                let before = p.kernel_below(n - 1, 0.0);
                z.iter()
                    .zip(g)
                    .enumerate()
                    .map(|(i, (a, b))| if before[i / d] == 0.0 { *b } else { *a })
                    .collect()
            }
            None => z.clone(),
        };
        let sol = p.solve_scale(n, &start, cfg)?;
        let dz: Vec<Complex64> = sol.z.iter().zip(&z).map(|(a, b)| a - b).collect();
        let dz_norm = dense_l1(&dz, d);
        let ward_const = ward_residual_constant(&p, n, &sol);
        let ward_deriv = ward_residual_derivative(&p, n, &sol, &probes, cfg.gmres_tol)?;
        let (h_norm, diag) = if cfg.resonance {
            let h = linearization_h(&p, n, &hess_prev, cfg.gmres_tol)?;
            let diag = resonance_diagnostics(&p, n, &sol.hessian, h, cfg.sigma_samples, cfg.gmres_tol)?;
            (Some(h), Some(diag))
        } else {
            (None, None)
        };
        let zmap = FourierMap::from_dense(&ctx.window, true, &sol.z);
        let sigma_w = (n as f64 + 2.0) / (2.0 * n as f64 + 2.0) * alpha_bar;
        let z0 = ctx.window.zero_index();
        let mean_mode = sol.w[z0 * d..(z0 + 1) * d].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        report.scales.push(ScaleRecord {
            n,
            iters: sol.iterations,
            final_residual: sol.final_residual,
            ward_const,
            ward_deriv,
            h_norm,
            sigma00_abs: diag.as_ref().map(|g| resonance::frobenius(&g.sigma_00)),
            dsigma00_abs: diag.as_ref().map(|g| resonance::frobenius(&g.dsigma_00)),
            z_norm: dense_l1(&sol.z, d),
            dz_norm,
            sigma_envelope: diag.as_ref().map(|g| g.sigma_envelope),
            rho_offdiag_decay: diag.as_ref().and_then(|g| g.rho_offdiag_decay),
            z_weighted_norm: zmap.weighted_norm(sigma_w)?,
            mean_mode,
            composition_tail: sol.tail,
        });
        if dz_norm > cfg.stage_tol && dz_norm > last_dz {
            growth += 1;
            if growth >= 3 {
                return Err(Error::NonCauchy { stage: j as usize });
            }
        } else {
            growth = 0;
        }
        last_dz = dz_norm;
        let contraction = match sol.log.as_slice() {
            [.., (_, a), (_, b)] if *a > 0.0 => b / a,
            _ => 0.0,
        };
        state = Some(RGStageState {
            j,
            n,
            z: zmap,
            w_at_z: FourierMap::from_dense(&ctx.window, true, &sol.w),
            ward_residual_constant: ward_const,
            ward_residual_derivative: ward_deriv,
            convergence_log: sol.log.clone(),
            contraction_estimate: contraction,
        });
        z = sol.z;
        hess_prev = sol.hessian;
    }
    let state = state.ok_or_else(|| Error::InvalidInput("scale decomposition has no scales".into()))?;
    let mut y = state.z.clone();
    // y^j(0) = 0 holds because Γ vanishes at q = 0; keep it exact
    let zero = LatticePoint::zero(d);
    if y.get(&zero).is_some() {
        y = y.project_p();
    }
    report.y_norm = y.ell1_norm();
    Ok((y, state))
}
