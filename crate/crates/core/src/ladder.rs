//! The outer ladder of analytic approximations `V^j`, obtained by keeping
//! the modes `|q|∞ ≤ γ_j = M·8^j` of a finitely smooth potential.

use std::f64::consts::TAU;

use num_complex::Complex64;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{Potential, PotentialDoc};
use crate::lattice::LatticeWindow;

/// `(γ_j, α_j, ᾱ_j)` with `α_j = 1/(M 8^{j-2})` and `ᾱ_j = 1/γ_{j+1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LadderConstants {
    pub gamma: u64,
    pub alpha: Ratio<u64>,
    pub alpha_bar: Ratio<u64>,
}

pub fn ladder_constants(m: u64, j: u32) -> Result<LadderConstants> {
    if m == 0 {
        return Err(Error::InvalidInput("ladder base M must be at least 1".into()));
    }
    let overflow = || Error::Overflow(format!("ladder constants at M = {m}, j = {j}"));
    let gamma = 8u64.checked_pow(j).and_then(|p| p.checked_mul(m)).ok_or_else(overflow)?;
    let gamma_next = gamma.checked_mul(8).ok_or_else(overflow)?;
    Ok(LadderConstants {
        gamma,
        alpha: Ratio::new(64, gamma),
        alpha_bar: Ratio::new(1, gamma_next),
    })
}

/// `Σ_q |q|₁^{ℓ+1} |v(q)|`.
pub fn smoothness_constant(pot: &Potential, ell: u32) -> f64 {
    pot.modes().map(|(q, v)| (q.l1() as f64).powi(ell as i32 + 1) * v.norm()).sum()
}

/// A Hermitian potential with `v(q) = ½ e^{iφ(q)} / |q|₁^{ℓ+2+d}` on
/// `0 < |q|∞ ≤ window`, phases drawn from a seeded ChaCha8 stream.
pub fn synth_ck_potential(dim: usize, ell: u32, window: u32, seed: u64) -> Result<Potential> {
    if ell == 0 {
        return Err(Error::InvalidInput("synthetic potential needs ell ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = LatticeWindow::new(dim, window);
    let power = (ell as usize + 2 + dim) as i32;
    let mut modes = Vec::new();
    // the upper half of the window in index order; partners are conjugates
    for i in w.zero_index() + 1..w.len() {
        let q = w.point(i);
        let phase: f64 = rng.gen::<f64>() * TAU;
        let amp = 0.5 / (q.l1() as f64).powi(power);
        modes.push((q, Complex64::from_polar(amp, phase)));
    }
    Potential::new(dim, ell, modes)
}

/// Measured size of `∂V^j - ∂V^{j-1}` on the strip of width `1/(2γ_j)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailDifference {
    pub j: u32,
    /// `Σ_{γ_{j-1} < |q|∞ ≤ γ_j} |q|₁ |v(q)| e^{|q|₁/(2γ_j)}`.
    pub sum: f64,
    /// `sum · γ_{j-1}^ℓ`, to be bounded uniformly in `j`.
    pub ratio: f64,
}

pub fn tail_difference_bound(pot: &Potential, ell: u32, m: u64, j: u32) -> Result<TailDifference> {
    if j == 0 {
        return Err(Error::InvalidInput("tail difference needs j ≥ 1".into()));
    }
    let lo = ladder_constants(m, j - 1)?.gamma;
    let hi = ladder_constants(m, j)?.gamma;
    let sum: f64 = pot
        .modes()
        .filter(|(q, _)| {
            let r = q.linf() as u64;
            r > lo && r <= hi
        })
        .map(|(q, v)| {
            let l1 = q.l1() as f64;
            l1 * v.norm() * (l1 / (2.0 * hi as f64)).exp()
        })
        .sum();
    Ok(TailDifference {
        j,
        sum,
        ratio: sum * (lo as f64).powi(ell as i32),
    })
}

/// The truncations `V^0, …, V^{jmax}` of one potential.
#[derive(Clone, Debug)]
pub struct ApproximationLadder {
    m: u64,
    potential: Potential,
    truncations: Vec<Potential>,
}

impl ApproximationLadder {
    pub fn new(potential: Potential, m: u64, jmax: u32) -> Result<Self> {
        let truncations = (0..=jmax)
            .map(|j| ladder_constants(m, j).map(|c| truncate(&potential, c.gamma)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ApproximationLadder { m, potential, truncations })
    }

    /// The smallest `j` with `γ_j` covering every stored mode.
    pub fn covering_stage(m: u64, pot: &Potential) -> Result<u32> {
        let top = pot.max_mode() as u64;
        let mut j = 0;
        while ladder_constants(m, j)?.gamma < top {
            j += 1;
        }
        Ok(j)
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn jmax(&self) -> u32 {
        self.truncations.len() as u32 - 1
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn constants(&self, j: u32) -> LadderConstants {
        ladder_constants(self.m, j).expect("checked at construction")
    }

    /// `V^j`.
    pub fn truncation(&self, j: u32) -> &Potential {
        &self.truncations[j as usize]
    }
}

/// `V` restricted to `|q|∞ ≤ gamma`.
pub fn truncate(pot: &Potential, gamma: u64) -> Potential {
    pot.truncate(gamma.min(u32::MAX as u64) as u32)
}

/// Potential input document: explicit modes or a synthetic recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    Synthetic { synthetic: SyntheticSpec },
    Explicit(PotentialDoc),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub ell: u32,
    pub window: u32,
    pub seed: u64,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_dim() -> usize {
    2
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Potential> {
        match self {
            PotentialSpec::Synthetic { synthetic: s } => synth_ck_potential(s.dim, s.ell, s.window, s.seed),
            PotentialSpec::Explicit(doc) => Potential::from_doc(doc),
        }
    }
}
