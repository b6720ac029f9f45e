//! Truncated vector-valued Fourier series on `Z^d`.
//!
//! Convention throughout: `X(θ) = Σ_q e^{-i q·θ} x(q)`, and the same for
//! scalar potentials, so `∂_θ V` has coefficients `-i q v(q)` and
//! `D = ω·∂_θ` multiplies by `-i ω·q`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticePoint, LatticeWindow};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A finitely supported map `q ↦ x(q) ∈ C^d` with `|q|∞ ≤ lattice_bound`.
///
/// When `real` is set the map is kept Hermitian, `x(-q) = conj x(q)`, so
/// that `X(θ)` is real. Absent modes are exactly zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "FourierMapDoc", try_from = "FourierMapDoc")]
pub struct FourierMap {
    dim: usize,
    lattice_bound: u32,
    real: bool,
    coeffs: BTreeMap<LatticePoint, Vec<Complex64>>,
}

impl FourierMap {
    pub fn zero(dim: usize, lattice_bound: u32, real: bool) -> Self {
        FourierMap {
            dim,
            lattice_bound,
            real,
            coeffs: BTreeMap::new(),
        }
    }

    /// Builds a map from explicit modes. Repeated modes are summed; real
    /// maps are symmetrized, so supplying only one of `±q` is allowed
    /// provided the other is supplied consistently or not at all.
    pub fn from_modes<It>(dim: usize, lattice_bound: u32, real: bool, modes: It) -> Result<Self>
    where
        It: IntoIterator<Item = (LatticePoint, Vec<Complex64>)>,
    {
        let mut map = FourierMap::zero(dim, lattice_bound, real);
        for (q, v) in modes {
            if q.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: q.dim(),
                });
            }
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if q.linf() > lattice_bound {
                return Err(Error::InvalidInput(format!(
                    "mode {q} lies outside the lattice bound {lattice_bound}"
                )));
            }
            let slot = map.coeffs.entry(q).or_insert_with(|| vec![ZERO; dim]);
            for (s, x) in slot.iter_mut().zip(v) {
                *s += x;
            }
        }
        if real {
            map.fill_hermitian_partners();
        }
        map.prune_zeros();
        Ok(map)
    }

    /// Inserts missing `-q` partners as conjugates, then symmetrizes.
    fn fill_hermitian_partners(&mut self) {
        let missing: Vec<(LatticePoint, Vec<Complex64>)> = self
            .coeffs
            .iter()
            .filter(|(q, _)| !self.coeffs.contains_key(&-*q))
            .map(|(q, v)| (-q, v.iter().map(|c| c.conj()).collect()))
            .collect();
        self.coeffs.extend(missing);
        self.symmetrize();
    }

    /// Replaces `x(q)` by `(x(q) + conj x(-q)) / 2`. No-op for complex maps.
    pub fn symmetrize(&mut self) {
        if !self.real {
            return;
        }
        let keys: Vec<LatticePoint> = self.coeffs.keys().cloned().collect();
        for q in keys {
            let mq = -&q;
            if q > mq {
                continue;
            }
            let a = self.coeffs.get(&q).cloned().unwrap_or_else(|| vec![ZERO; self.dim]);
            let b = self.coeffs.get(&mq).cloned().unwrap_or_else(|| vec![ZERO; self.dim]);
            let sym: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| (x + y.conj()) * 0.5).collect();
            let conj: Vec<Complex64> = sym.iter().map(|c| c.conj()).collect();
            self.coeffs.insert(q, sym);
            self.coeffs.insert(mq, conj);
        }
    }

    fn prune_zeros(&mut self) {
        self.coeffs.retain(|_, v| v.iter().any(|c| *c != ZERO));
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lattice_bound(&self) -> u32 {
        self.lattice_bound
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn window(&self) -> LatticeWindow {
        LatticeWindow::new(self.dim, self.lattice_bound)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn get(&self, q: &LatticePoint) -> Option<&[Complex64]> {
        self.coeffs.get(q).map(Vec::as_slice)
    }

    /// `x(q)`, zero when absent.
    pub fn coeff(&self, q: &LatticePoint) -> Vec<Complex64> {
        self.get(q).map(<[_]>::to_vec).unwrap_or_else(|| vec![ZERO; self.dim])
    }

    pub fn modes(&self) -> impl Iterator<Item = (&LatticePoint, &[Complex64])> {
        self.coeffs.iter().map(|(q, v)| (q, v.as_slice()))
    }

    /// `max_q |x(-q) - conj x(q)|` over stored modes.
    pub fn hermitian_defect(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(q, v)| {
                let w = self.coeff(&-q);
                v.iter().zip(&w).map(|(a, b)| (b - a.conj()).norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// `Σ_q e^{-i q·θ} x(q)`.
    pub fn eval(&self, theta: &[f64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.dim];
        for (q, v) in &self.coeffs {
            let phase = Complex64::from_polar(1.0, -q.dot(theta));
            for (o, c) in out.iter_mut().zip(v) {
                *o += phase * c;
            }
        }
        out
    }

    /// `Σ_q |x(q)|` with `|·|` the Euclidean norm on `C^d`.
    pub fn ell1_norm(&self) -> f64 {
        self.coeffs.values().map(|v| vec_norm(v)).fold(0.0, |a, b| a + b)
    }

    /// `Σ_q e^{σ|q|₁} |x(q)|`.
    pub fn weighted_norm(&self, sigma: f64) -> Result<f64> {
        if sigma.is_nan() || sigma < 0.0 {
            return Err(Error::InvalidInput(format!("weight exponent must be nonnegative, got {sigma}")));
        }
        let mut total = 0.0;
        for (q, v) in &self.coeffs {
            let term = (sigma * q.l1() as f64).exp() * vec_norm(v);
            if !term.is_finite() {
                return Err(Error::Overflow(format!("weighted term at q = {q} with sigma = {sigma}")));
            }
            total += term;
        }
        if !total.is_finite() {
            return Err(Error::Overflow(format!("weighted norm with sigma = {sigma}")));
        }
        Ok(total)
    }

    /// Translation `(τ_β x)(q) = x(q) e^{i q·β}`, i.e. `X(θ) ↦ X(θ - β)`.
    ///
    /// A complex `β` breaks Hermitian symmetry, so the result is only flagged
    /// real when the input was real and `β` is real.
    pub fn shift(&self, beta: &[Complex64]) -> FourierMap {
        let real_beta = beta.iter().all(|b| b.im == 0.0);
        let coeffs = self
            .coeffs
            .iter()
            .map(|(q, v)| {
                let arg: Complex64 = q.0.iter().zip(beta).map(|(&c, b)| b * c as f64).sum();
                let f = (I * arg).exp();
                (q.clone(), v.iter().map(|c| c * f).collect())
            })
            .collect();
        FourierMap {
            dim: self.dim,
            lattice_bound: self.lattice_bound,
            real: self.real && real_beta,
            coeffs,
        }
    }

    fn map_modes(&self, mut f: impl FnMut(&LatticePoint, &[Complex64]) -> Option<Vec<Complex64>>) -> FourierMap {
        let mut out = FourierMap {
            dim: self.dim,
            lattice_bound: self.lattice_bound,
            real: self.real,
            coeffs: self.coeffs.iter().filter_map(|(q, v)| f(q, v).map(|w| (q.clone(), w))).collect(),
        };
        out.prune_zeros();
        out
    }

    /// `D²`: multiplies `x(q)` by `-(ω·q)²`.
    pub fn apply_d2(&self, omega: &[f64]) -> FourierMap {
        self.map_modes(|q, v| {
            let k = q.dot(omega);
            Some(v.iter().map(|c| c * (-k * k)).collect())
        })
    }

    /// `D`: multiplies `x(q)` by `-i ω·q`.
    pub fn apply_d(&self, omega: &[f64]) -> FourierMap {
        self.map_modes(|q, v| {
            let k = q.dot(omega);
            Some(v.iter().map(|c| c * (-I * k)).collect())
        })
    }

    /// `G₀ = (-D²)⁻¹` on zero-mean maps; the constant mode is discarded.
    pub fn apply_g0(&self, omega: &[f64]) -> Result<FourierMap> {
        if let Some((q, _)) = self.coeffs.iter().find(|(q, _)| !q.is_zero() && q.dot(omega) == 0.0) {
            return Err(Error::ResonantFrequency(q.clone()));
        }
        Ok(self.map_modes(|q, v| {
            if q.is_zero() {
                return None;
            }
            let k = q.dot(omega);
            Some(v.iter().map(|c| c / (k * k)).collect())
        }))
    }

    /// `P`: removes the constant mode.
    pub fn project_p(&self) -> FourierMap {
        self.map_modes(|q, v| (!q.is_zero()).then(|| v.to_vec()))
    }

    /// Keeps the modes with `|q|∞ ≤ bound` and lowers the lattice bound.
    pub fn truncate(&self, bound: u32) -> FourierMap {
        let mut out = self.map_modes(|q, v| (q.linf() <= bound).then(|| v.to_vec()));
        out.lattice_bound = bound.min(self.lattice_bound);
        out
    }

    /// Same coefficients with a larger lattice bound.
    pub fn with_bound(&self, bound: u32) -> Result<FourierMap> {
        if let Some((q, _)) = self.coeffs.iter().find(|(q, _)| q.linf() > bound) {
            return Err(Error::InvalidInput(format!("mode {q} exceeds new bound {bound}")));
        }
        let mut out = self.clone();
        out.lattice_bound = bound;
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> FourierMap {
        self.map_modes(|_, v| Some(v.iter().map(|c| c * s).collect()))
    }

    fn combine(&self, other: &FourierMap, sign: f64) -> Result<FourierMap> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut out = self.clone();
        out.lattice_bound = self.lattice_bound.max(other.lattice_bound);
        out.real = self.real && other.real;
        for (q, v) in &other.coeffs {
            let slot = out.coeffs.entry(q.clone()).or_insert_with(|| vec![ZERO; self.dim]);
            for (s, x) in slot.iter_mut().zip(v) {
                *s += x * sign;
            }
        }
        out.prune_zeros();
        Ok(out)
    }

    pub fn add(&self, other: &FourierMap) -> Result<FourierMap> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &FourierMap) -> Result<FourierMap> {
        self.combine(other, -1.0)
    }

    /// Dense coefficient vector on `window`, mode-major (`index * dim + component`).
    /// Modes outside the window are dropped.
    pub fn to_dense(&self, window: &LatticeWindow) -> Vec<Complex64> {
        let d = self.dim;
        let mut out = vec![ZERO; window.len() * d];
        for (q, v) in &self.coeffs {
            if let Some(i) = window.index(q) {
                out[i * d..(i + 1) * d].copy_from_slice(v);
            }
        }
        out
    }

    pub fn from_dense(window: &LatticeWindow, real: bool, dense: &[Complex64]) -> FourierMap {
        let d = window.dim();
        let coeffs = (0..window.len())
            .filter_map(|i| {
                let v = &dense[i * d..(i + 1) * d];
                v.iter().any(|c| *c != ZERO).then(|| (window.point(i), v.to_vec()))
            })
            .collect();
        let mut map = FourierMap {
            dim: d,
            lattice_bound: window.bound(),
            real,
            coeffs,
        };
        map.symmetrize();
        map
    }

    pub fn to_doc(&self) -> FourierMapDoc {
        FourierMapDoc {
            dim: self.dim,
            lattice_bound: self.lattice_bound,
            real_flag: self.real,
            modes: self
                .coeffs
                .iter()
                .map(|(q, v)| ModeDoc {
                    q: q.0.clone(),
                    re: v.iter().map(|c| c.re).collect(),
                    im: v.iter().map(|c| c.im).collect(),
                })
                .collect(),
        }
    }

    /// Reads a map without re-symmetrizing, so corrupted files stay corrupted.
    pub fn from_doc(doc: &FourierMapDoc) -> Result<FourierMap> {
        let mut coeffs = BTreeMap::new();
        for m in &doc.modes {
            if m.q.len() != doc.dim || m.re.len() != doc.dim || m.im.len() != doc.dim {
                return Err(Error::DimensionMismatch {
                    expected: doc.dim,
                    got: m.q.len(),
                });
            }
            let q = LatticePoint(m.q.clone());
            if q.linf() > doc.lattice_bound {
                return Err(Error::InvalidInput(format!("mode {q} outside lattice bound {}", doc.lattice_bound)));
            }
            let v = m.re.iter().zip(&m.im).map(|(&a, &b)| Complex64::new(a, b)).collect();
            coeffs.insert(q, v);
        }
        Ok(FourierMap {
            dim: doc.dim,
            lattice_bound: doc.lattice_bound,
            real: doc.real_flag,
            coeffs,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc())?)
    }

    pub fn from_json(s: &str) -> Result<FourierMap> {
        FourierMap::from_doc(&serde_json::from_str(s)?)
    }
}

/// JSON form of a [`FourierMap`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FourierMapDoc {
    pub dim: usize,
    pub lattice_bound: u32,
    pub real_flag: bool,
    pub modes: Vec<ModeDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ModeDoc {
    pub q: Vec<i32>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// A real scalar potential `V(θ) = Σ_q v(q) e^{-i q·θ}` of declared smoothness `ℓ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    dim: usize,
    ell: u32,
    coeffs: BTreeMap<LatticePoint, Complex64>,
}

impl Potential {
    /// Builds a Hermitian potential. Missing `-q` partners are filled in;
    /// inconsistent pairs are rejected.
    pub fn new<It>(dim: usize, ell: u32, modes: It) -> Result<Self>
    where
        It: IntoIterator<Item = (LatticePoint, Complex64)>,
    {
        let mut coeffs: BTreeMap<LatticePoint, Complex64> = BTreeMap::new();
        for (q, v) in modes {
            if q.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: q.dim(),
                });
            }
            *coeffs.entry(q).or_insert(ZERO) += v;
        }
        let keys: Vec<LatticePoint> = coeffs.keys().cloned().collect();
        for q in keys {
            let mq = -&q;
            let v = coeffs[&q];
            match coeffs.get(&mq) {
                Some(w) => {
                    let scale = v.norm().max(w.norm()).max(1e-300);
                    if (w - v.conj()).norm() > 1e-12 * scale {
                        return Err(Error::InvalidInput(format!("potential is not real: v({mq}) != conj v({q})")));
                    }
                }
                None => {
                    coeffs.insert(mq, v.conj());
                }
            }
        }
        // exact symmetry after validation
        let keys: Vec<LatticePoint> = coeffs.keys().cloned().collect();
        for q in keys {
            let mq = -&q;
            if q < mq {
                let v = coeffs[&q];
                coeffs.insert(mq, v.conj());
            } else if q == mq {
                let v = coeffs[&q];
                coeffs.insert(q, Complex64::new(v.re, 0.0));
            }
        }
        coeffs.retain(|_, v| *v != ZERO);
        Ok(Potential { dim, ell, coeffs })
    }

    pub fn zero(dim: usize, ell: u32) -> Self {
        Potential {
            dim,
            ell,
            coeffs: BTreeMap::new(),
        }
    }

    /// `cos(q₀·θ)`, i.e. `v(±q₀) = 1/2`.
    pub fn cosine(q0: LatticePoint, ell: u32) -> Self {
        let dim = q0.dim();
        Potential::new(dim, ell, [(q0, Complex64::new(0.5, 0.0))]).expect("cosine potential is real")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, q: &LatticePoint) -> Complex64 {
        self.coeffs.get(q).copied().unwrap_or(ZERO)
    }

    pub fn modes(&self) -> impl Iterator<Item = (&LatticePoint, Complex64)> {
        self.coeffs.iter().map(|(q, v)| (q, *v))
    }

    /// Largest `|q|∞` carrying a nonzero coefficient.
    pub fn max_mode(&self) -> u32 {
        self.coeffs.keys().map(LatticePoint::linf).max().unwrap_or(0)
    }

    /// Modes with `|q|∞ ≤ bound`.
    pub fn truncate(&self, bound: u32) -> Potential {
        Potential {
            dim: self.dim,
            ell: self.ell,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(q, _)| q.linf() <= bound)
                .map(|(q, v)| (q.clone(), *v))
                .collect(),
        }
    }

    /// `V(ξ)` for possibly complex `ξ`.
    pub fn eval(&self, xi: &[Complex64]) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(q, v)| {
                let arg: Complex64 = q.0.iter().zip(xi).map(|(&c, x)| x * c as f64).sum();
                v * (-I * arg).exp()
            })
            .sum()
    }

    /// `∂_θ V(θ)` at a real point.
    pub fn gradient_at(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for (q, v) in &self.coeffs {
            let e = v * Complex64::from_polar(1.0, -q.dot(theta));
            for (gc, &qc) in g.iter_mut().zip(&q.0) {
                *gc += (-I * qc as f64 * e).re;
            }
        }
        g
    }

    /// Coefficients of `λ ∂_θ V` as a real map on the given lattice bound.
    pub fn gradient_map(&self, lambda: f64, bound: u32) -> FourierMap {
        let coeffs = self
            .coeffs
            .iter()
            .filter(|(q, _)| q.linf() <= bound && !q.is_zero())
            .map(|(q, v)| (q.clone(), q.0.iter().map(|&c| -I * (c as f64) * v * lambda).collect::<Vec<_>>()))
            .filter(|(_, g)| g.iter().any(|c| *c != ZERO))
            .collect();
        FourierMap {
            dim: self.dim,
            lattice_bound: bound,
            real: true,
            coeffs,
        }
    }

    pub fn to_doc(&self) -> PotentialDoc {
        PotentialDoc {
            dim: self.dim,
            ell: self.ell,
            modes: self
                .coeffs
                .iter()
                .map(|(q, v)| ScalarModeDoc {
                    q: q.0.clone(),
                    re: v.re,
                    im: v.im,
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &PotentialDoc) -> Result<Potential> {
        Potential::new(
            doc.dim,
            doc.ell,
            doc.modes.iter().map(|m| (LatticePoint(m.q.clone()), Complex64::new(m.re, m.im))),
        )
    }
}

/// JSON form of an explicit [`Potential`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PotentialDoc {
    pub dim: usize,
    pub ell: u32,
    pub modes: Vec<ScalarModeDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScalarModeDoc {
    pub q: Vec<i32>,
    pub re: f64,
    pub im: f64,
}

pub(crate) fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

impl From<FourierMap> for FourierMapDoc {
    fn from(m: FourierMap) -> Self {
        m.to_doc()
    }
}

impl TryFrom<FourierMapDoc> for FourierMap {
    type Error = Error;

    fn try_from(doc: FourierMapDoc) -> Result<Self> {
        FourierMap::from_doc(&doc)
    }
}
