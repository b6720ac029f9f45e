//! Rotation vectors and windowed Diophantine certificates.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{l1_ball_points, LatticePoint};
use crate::scales::ScaleDecomposition;

/// The golden mean `(1 + √5)/2`.
pub fn golden() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

/// Real root of `x³ - x - 1` (the plastic number).
pub fn plastic() -> f64 {
    let mut x: f64 = 1.3;
    for _ in 0..60 {
        x -= (x * x * x - x - 1.0) / (3.0 * x * x - 1.0);
    }
    x
}

/// How a frequency is written in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrequencySpec {
    /// `"golden"`, `"cubic"`, or a literal such as `"1, 1.618"`.
    Named(String),
    Vector(Vec<f64>),
}

impl FrequencySpec {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        match self {
            FrequencySpec::Vector(v) => validate(v.clone()),
            FrequencySpec::Named(s) => s.parse::<Omega>().map(|o| o.0),
        }
    }
}

/// A parsed frequency literal.
#[derive(Clone, Debug, PartialEq)]
pub struct Omega(pub Vec<f64>);

impl FromStr for Omega {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t {
            "golden" => return Ok(Omega(vec![1.0, golden()])),
            "cubic" => {
                let p = plastic();
                return Ok(Omega(vec![1.0, p, p * p]));
            }
            _ => {}
        }
        let inner = t.trim_start_matches('[').trim_end_matches(']');
        let v = inner
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad frequency component {x:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        validate(v).map(Omega)
    }
}

fn validate(v: Vec<f64>) -> Result<Vec<f64>> {
    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "frequency must be a finite nonempty vector, got {v:?}"
        )));
    }
    Ok(v)
}

/// `γ = min_{0<|q|₁≤Qmax} |ω·q| |q|₁^ν` and where it is attained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub gamma: f64,
    pub nu: f64,
    #[serde(rename = "Qmax")]
    pub qmax: u32,
    pub argmin_q: LatticePoint,
}

/// Exhaustive scan of the ℓ¹ ball. Exact zero divisors are rejected.
pub fn certify(omega: &[f64], nu: f64, qmax: u32) -> Result<Certificate> {
    if qmax == 0 {
        return Err(Error::InvalidInput("Qmax must be at least 1".into()));
    }
    let mut best: Option<(f64, LatticePoint)> = None;
    for q in l1_ball_points(omega.len(), qmax) {
        // ±q give the same value; scan one half
        if q.0.iter().find(|&&c| c != 0).is_some_and(|&c| c < 0) {
            continue;
        }
        let k = q.dot(omega).abs();
        if k == 0.0 {
            return Err(Error::ResonantFrequency(q));
        }
        let g = k * (q.l1() as f64).powf(nu);
        if best.as_ref().is_none_or(|(b, _)| g < *b) {
            best = Some((g, q));
        }
    }
    let (gamma, argmin_q) = best.expect("Qmax ≥ 1 gives a nonempty ball");
    Ok(Certificate { gamma, nu, qmax, argmin_q })
}

/// A frequency together with its certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct DiophantineFrequency {
    omega: Vec<f64>,
    certificate: Certificate,
}

impl DiophantineFrequency {
    pub fn new(omega: Vec<f64>, nu: f64, qmax: u32) -> Result<Self> {
        let omega = validate(omega)?;
        if nu.is_nan() || nu <= 0.0 {
            return Err(Error::InvalidInput(format!("nu must be positive, got {nu}")));
        }
        let certificate = certify(&omega, nu, qmax)?;
        Ok(DiophantineFrequency { omega, certificate })
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn gamma(&self) -> f64 {
        self.certificate.gamma
    }

    pub fn nu(&self) -> f64 {
        self.certificate.nu
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    /// `ω·q`.
    pub fn small_divisor(&self, q: &LatticePoint) -> f64 {
        q.dot(&self.omega)
    }

    pub fn scale_set(&self, q: &LatticePoint, scales: &ScaleDecomposition) -> Vec<usize> {
        scales.scale_set(self.small_divisor(q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(v: &[i32]) -> LatticePoint {
        LatticePoint(v.to_vec())
    }

    #[test]
    fn small_divisor_examples() {
        let f = DiophantineFrequency::new(vec![1.0, golden()], 1.0, 10).unwrap();
        assert_eq!(f.small_divisor(&lp(&[0, 0])), 0.0);
        assert!((f.small_divisor(&lp(&[-2, 1])) + 0.381_966_011_3).abs() < 1e-10);
        assert!((f.small_divisor(&lp(&[3, -2])) + 0.236_067_977_5).abs() < 1e-10);
    }

    #[test]
    fn one_dimensional_gamma() {
        for qmax in [1, 5, 30] {
            assert_eq!(certify(&[1.0], 1.0, qmax).unwrap().gamma, 1.0);
        }
    }

    #[test]
    fn exact_resonance() {
        match certify(&[1.0, 0.5], 1.2, 5) {
            Err(Error::ResonantFrequency(q)) => assert_eq!(q.dot(&[1.0, 0.5]), 0.0),
            other => panic!("expected resonance, got {other:?}"),
        }
    }

    #[test]
    fn parsing() {
        assert_eq!("golden".parse::<Omega>().unwrap().0, vec![1.0, golden()]);
        let c = "cubic".parse::<Omega>().unwrap().0;
        assert_eq!(c.len(), 3);
        assert!((c[1].powi(3) - c[1] - 1.0).abs() < 1e-14);
        assert_eq!("[1, 0.25]".parse::<Omega>().unwrap().0, vec![1.0, 0.25]);
        assert!("1, x".parse::<Omega>().is_err());
    }
}
