//! The outer loop: `x_j = x_{j-1} + y^j` over the ladder, then the final
//! residual, norms and trajectories of the assembled torus.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::compose::compose_w0;
use crate::error::{Error, Result};
use crate::fourier::{vec_norm, FourierMap, Potential};
use crate::ladder::ApproximationLadder;
use crate::lattice::{LatticePoint, LatticeWindow};
use crate::rg::{run_stage_from, StageConfig, StageContext, StageReport};
use crate::scales::ScaleDecomposition;
use crate::stats::{linear_fit, power_law_exponent};

/// Solver settings shared by all stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    pub eta: f64,
    #[serde(rename = "M")]
    pub m: u64,
    pub lattice_bound: u32,
    /// Stop once `‖y^j‖₁` falls below this.
    pub global_tol: f64,
    /// Run exactly this many stages instead of stopping at the covering one.
    pub stages: Option<u32>,
    /// Orders `s` of the `Σ|q|^s|x(q)|` table.
    pub cs_orders: Vec<f64>,
    /// Reach `λ` through `λ/4, λ/2`, warm-starting each stage from the
    /// rescaled corrections of the previous coupling.
    pub continuation: bool,
    pub stage: StageConfig,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            eta: 0.5,
            m: 8,
            lattice_bound: 32,
            global_tol: 1e-14,
            stages: None,
            cs_orders: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            continuation: false,
            stage: StageConfig::default(),
        }
    }
}

/// One accepted outer stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub j: u32,
    pub gamma: u64,
    pub y_norm: f64,
    pub x_norm: f64,
    /// `‖x_j - G₀PW₀ʲ(x_j)‖₁` from the independent evaluator.
    pub residual: f64,
    pub decay_fit: DecayFit,
    pub scales: StageReport,
}

/// `Σ|q|₁^s|x(q)|` with a power-law tail beyond the window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsNorm {
    pub s: f64,
    pub windowed: f64,
    /// Same sum restricted to `|q|∞ ≤ L/2`.
    pub half_window: f64,
    pub tail: f64,
    pub total: f64,
    pub extrapolated: bool,
    /// Window doubling changes the sum by less than 5%.
    pub stable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    Failed { stage: u32, error: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub stages: Vec<StageRecord>,
    /// Every `y^j`, in order; their sum is `x`.
    pub corrections: Vec<FourierMap>,
    pub x: FourierMap,
    pub action: FourierMap,
    pub residual: f64,
    pub residual_tail: f64,
    pub cs_norms: Vec<CsNorm>,
    pub max_stable_s: Option<f64>,
    pub status: Status,
    /// Intermediate couplings visited by continuation and how they ended.
    pub continuation: Vec<(f64, Status)>,
    /// Wall time per stage; not serialized so reports stay reproducible.
    #[serde(skip)]
    pub stage_seconds: Vec<f64>,
}

impl SolveReport {
    pub fn succeeded(&self) -> bool {
        self.status == Status::Converged
    }

    /// `Σ_j y^j` recomputed from the stored corrections.
    pub fn resum(&self) -> Result<FourierMap> {
        let mut acc = FourierMap::zero(self.x.dim(), self.x.lattice_bound(), true);
        for y in &self.corrections {
            acc = acc.add(y)?;
        }
        Ok(acc)
    }
}

/// Runs the stages `j = 0..=jstop` and assembles `X`.
///
/// A failing stage ends the loop; the report then carries the stages that
/// succeeded, `x_{j-1}` as `x`, and the failure in `status`.
pub fn solve(pot: &Potential, omega: &[f64], lambda: f64, ell: u32, config: &SolveConfig) -> Result<SolveReport> {
    if !config.continuation || lambda == 0.0 {
        return solve_warm(pot, omega, lambda, ell, config, &[]);
    }
    let mut guess: Vec<FourierMap> = Vec::new();
    let mut previous = 0.0;
    let mut path = Vec::new();
    for mu in [lambda / 4.0, lambda / 2.0] {
        let scaled: Vec<FourierMap> = guess.iter().map(|y| y.scale(mu / previous)).collect();
        let rep = solve_warm(pot, omega, mu, ell, config, &scaled)?;
        path.push((mu, rep.status.clone()));
        if !rep.succeeded() {
            break;
        }
        guess = rep.corrections;
        previous = mu;
    }
    let scaled: Vec<FourierMap> = if previous > 0.0 {
        guess.iter().map(|y| y.scale(lambda / previous)).collect()
    } else {
        Vec::new()
    };
    let mut rep = solve_warm(pot, omega, lambda, ell, config, &scaled)?;
    rep.continuation = path;
    Ok(rep)
}

/// [`solve`] with stage `j` warm-started at `guess[j]` where given.
pub fn solve_warm(
    pot: &Potential,
    omega: &[f64],
    lambda: f64,
    ell: u32,
    config: &SolveConfig,
    guess: &[FourierMap],
) -> Result<SolveReport> {
    let d = pot.dim();
    if omega.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: omega.len(),
        });
    }
    if !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("lambda must be finite, got {lambda}")));
    }
    let bound = config.lattice_bound;
    let window = LatticeWindow::new(d, bound);
    let scales = ScaleDecomposition::for_window(config.eta, omega, &window)?;
    let jstop = match config.stages {
        Some(0) => return Err(Error::InvalidInput("stage count must be positive".into())),
        Some(k) => k - 1,
        None => ApproximationLadder::covering_stage(config.m, pot)?,
    };
    let ladder = ApproximationLadder::new(pot.clone(), config.m, jstop)?;
    let ctx = StageContext {
        ladder: &ladder,
        lambda,
        omega,
        window,
        scales: &scales,
        config: &config.stage,
    };
    let mut x = FourierMap::zero(d, bound, true);
    let mut stages = Vec::new();
    let mut corrections = Vec::new();
    let mut status = Status::Converged;
    let mut stage_seconds = Vec::new();
    for j in 0..=jstop {
        let clock = std::time::Instant::now();
        let run = run_stage_from(j, &x, guess.get(j as usize), &ctx);
        stage_seconds.push(clock.elapsed().as_secs_f64());
        let y = match run.result {
            Ok((y, _)) => y,
            Err(e) => {
                status = Status::Failed {
                    stage: j,
                    error: e.to_string(),
                };
                break;
            }
        };
        x = x.add(&y)?;
        let residual = stage_fixed_point_defect(ladder.truncation(j), &x, lambda, omega);
        stages.push(StageRecord {
            j,
            gamma: ladder.constants(j).gamma,
            y_norm: run.report.y_norm,
            x_norm: x.ell1_norm(),
            residual,
            decay_fit: decay_check(&x, &ladder, j, ell),
            scales: run.report,
        });
        corrections.push(y);
        if config.stages.is_none() && stages.last().is_some_and(|s| s.y_norm <= config.global_tol) {
            break;
        }
    }
    let (res, tail) = residual(&x, pot, lambda, omega)?;
    let cs_norms: Vec<CsNorm> = config.cs_orders.iter().map(|&s| cs_norm(&x, s)).collect();
    let max_stable_s = cs_norms
        .iter()
        .filter(|c| c.stable && c.total.is_finite())
        .map(|c| c.s)
        .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s))));
    Ok(SolveReport {
        stages,
        corrections,
        action: action_embedding(&x, omega),
        x,
        residual: res,
        residual_tail: tail,
        cs_norms,
        max_stable_s,
        status,
        continuation: Vec::new(),
        stage_seconds,
    })
}

/// `‖x - G₀PW₀ʲ(x)‖₁`, evaluated without the solver's composition path.
pub fn stage_fixed_point_defect(pot: &Potential, x: &FourierMap, lambda: f64, omega: &[f64]) -> f64 {
    let w = x.window();
    let eval = crate::oracle::DirectEvaluator::new(x.dim(), w.bound().max(pot.max_mode()));
    let image = eval.w0(pot, lambda, x, &w).project_p();
    match image.apply_g0(omega).and_then(|g| x.sub(&g)) {
        Ok(diff) => diff.ell1_norm(),
        Err(_) => f64::INFINITY,
    }
}

/// `‖D²X + λ∂V(θ+X)‖₁` on the window of `x` and the spectral mass the
/// composition left outside it.
pub fn residual(x: &FourierMap, pot: &Potential, lambda: f64, omega: &[f64]) -> Result<(f64, f64)> {
    if lambda == 0.0 {
        return Ok((x.apply_d2(omega).ell1_norm(), 0.0));
    }
    let comp = compose_w0(pot, x, lambda)?;
    Ok((x.apply_d2(omega).add(&comp.map)?.ell1_norm(), comp.tail))
}

/// `Y = ω + DX`, the action along the torus.
pub fn action_embedding(x: &FourierMap, omega: &[f64]) -> FourierMap {
    let dx = x.apply_d(omega);
    let zero = LatticePoint::zero(x.dim());
    let constant = FourierMap::from_modes(
        x.dim(),
        x.lattice_bound(),
        true,
        [(zero, omega.iter().map(|&w| Complex64::new(w, 0.0)).collect())],
    )
    .expect("zero mode fits every window");
    dx.add(&constant).expect("same dimension")
}

fn shell_sums(x: &FourierMap, s: f64, max_linf: u32) -> BTreeMap<u32, f64> {
    let mut shells = BTreeMap::new();
    for (q, v) in x.modes() {
        if q.is_zero() || q.linf() > max_linf {
            continue;
        }
        *shells.entry(q.l1()).or_insert(0.0) += (q.l1() as f64).powf(s) * vec_norm(v);
    }
    shells
}

/// `Σ|q|₁^s|x(q)|` with a tail extrapolated from the decay of the complete
/// `|q|₁`-shells in the upper half of the window.
pub fn cs_norm(x: &FourierMap, s: f64) -> CsNorm {
    let l = x.lattice_bound();
    let full = shell_sums(x, s, l);
    let half = shell_sums(x, s, l / 2);
    let windowed: f64 = full.values().sum();
    let half_window: f64 = half.values().sum();
    // shells with |q|₁ ≤ L lie entirely inside the box
    // shells at round-off level carry no decay information
    let top = full.values().copied().fold(0.0, f64::max);
    let (xs, vs): (Vec<f64>, Vec<f64>) = full
        .iter()
        .filter(|(&r, &v)| r >= (l / 2).max(1) && r <= l && v > 1e-13 * top)
        .map(|(&r, &v)| (r as f64, v))
        .unzip();
    let (tail, extrapolated) = match (power_law_exponent(&xs, &vs), xs.last()) {
        (Some(p), Some(&r_last)) if xs.len() >= 3 => {
            let c = vs.last().copied().unwrap_or(0.0) / r_last.powf(p);
            let big_l = l as f64;
            if p + 1.0 < 0.0 {
                (c * big_l.powf(p + 1.0) / -(p + 1.0), true)
            } else {
                (f64::INFINITY, true)
            }
        }
        _ => (0.0, false),
    };
    let stable = windowed == 0.0 || (windowed - half_window).abs() <= 0.05 * windowed;
    CsNorm {
        s,
        windowed,
        half_window,
        tail,
        total: windowed + tail,
        extrapolated,
        stable,
    }
}

/// Fit of `log|x(q)| ≈ log C - r|q|₁ - (ℓ/3)log|q|₁` against the inductive
/// envelope rate `r = 1/(4γ_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub points: usize,
    pub fitted_rate: Option<f64>,
    pub expected_rate: f64,
    /// Smallest `C` with `|x(q)| ≤ C e^{-|q|₁/(4γ_j)} |q|₁^{-ℓ/3}` on the window.
    pub envelope_constant: f64,
    pub worst_violator: Option<LatticePoint>,
    /// `|x(q)|` over the fitted envelope at the worst violator.
    pub worst_ratio: f64,
}

pub fn decay_check(x: &FourierMap, ladder: &ApproximationLadder, j: u32, ell: u32) -> DecayFit {
    let expected_rate = 1.0 / (4.0 * ladder.constants(j).gamma as f64);
    let k = ell as f64 / 3.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut pts = Vec::new();
    let mut envelope_constant: f64 = 0.0;
    let top = x.modes().map(|(_, v)| vec_norm(v)).fold(0.0, f64::max);
    for (q, v) in x.modes() {
        let n = vec_norm(v);
        if q.is_zero() || n <= 1e-13 * top {
            continue;
        }
        let r = q.l1() as f64;
        envelope_constant = envelope_constant.max(n * r.powf(k) * (r * expected_rate).exp());
        xs.push(r);
        ys.push(n.ln() + k * r.ln());
        pts.push((q.clone(), n));
    }
    let fit = linear_fit(&xs, &ys);
    let mut worst_violator = None;
    let mut worst_ratio = 0.0;
    if let Some((slope, intercept)) = fit {
        for (q, n) in &pts {
            let r = q.l1() as f64;
            let ratio = n / (intercept + slope * r - k * r.ln()).exp();
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst_violator = Some(q.clone());
            }
        }
    }
    DecayFit {
        points: pts.len(),
        fitted_rate: fit.map(|(slope, _)| -slope),
        expected_rate,
        envelope_constant,
        worst_violator,
        worst_ratio,
    }
}

/// `(θ(t), I(t))` along the torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub theta: Vec<f64>,
    pub action: Vec<f64>,
}

/// `θ(t) = θ₀ + ωt + X(θ₀ + ωt)` and `I(t) = ω + DX(θ₀ + ωt)`.
pub fn trajectory(x: &FourierMap, omega: &[f64], theta0: &[f64], t_grid: &[f64]) -> Result<Vec<TrajectorySample>> {
    if omega.len() != x.dim() || theta0.len() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: omega.len().min(theta0.len()),
        });
    }
    let beta: Vec<Complex64> = theta0.iter().map(|&t| Complex64::new(-t, 0.0)).collect();
    let shifted = x.shift(&beta);
    let action = action_embedding(&shifted, omega);
    Ok(t_grid
        .iter()
        .map(|&t| {
            let phi: Vec<f64> = omega.iter().map(|w| w * t).collect();
            let xv = shifted.eval(&phi);
            TrajectorySample {
                t,
                theta: (0..x.dim()).map(|a| theta0[a] + phi[a] + xv[a].re).collect(),
                action: action.eval(&phi).iter().map(|c| c.re).collect(),
            }
        })
        .collect())
}

/// `max_t |İ(t) + λ∂V(θ(t))|` with `İ = D²X` taken spectrally.
pub fn equation_of_motion_defect(
    x: &FourierMap,
    pot: &Potential,
    lambda: f64,
    omega: &[f64],
    theta0: &[f64],
    t_grid: &[f64],
) -> Result<f64> {
    let beta: Vec<Complex64> = theta0.iter().map(|&t| Complex64::new(-t, 0.0)).collect();
    let accel = x.shift(&beta).apply_d2(omega);
    let samples = trajectory(x, omega, theta0, t_grid)?;
    Ok(samples
        .iter()
        .map(|smp| {
            let phi: Vec<f64> = omega.iter().map(|w| w * smp.t).collect();
            let a = accel.eval(&phi);
            let g = pot.gradient_at(&smp.theta);
            (0..x.dim()).map(|c| (a[c].re + lambda * g[c]).powi(2)).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max))
}

/// Trajectory samples as CSV `t,theta_1..theta_d,I_1..I_d`.
pub fn trajectory_csv(samples: &[TrajectorySample]) -> String {
    let d = samples.first().map_or(0, |s| s.theta.len());
    let mut out = String::from("t");
    for a in 1..=d {
        out.push_str(&format!(",theta_{a}"));
    }
    for a in 1..=d {
        out.push_str(&format!(",I_{a}"));
    }
    out.push('\n');
    for s in samples {
        out.push_str(&format!("{:.17e}", s.t));
        for v in s.theta.iter().chain(&s.action) {
            out.push_str(&format!(",{v:.17e}"));
        }
        out.push('\n');
    }
    out
}
