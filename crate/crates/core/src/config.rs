//! Run configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assembly::SolveConfig;
use crate::error::{Error, Result};
use crate::fourier::{Potential, PotentialDoc};
use crate::frequency::{DiophantineFrequency, FrequencySpec};
use crate::ladder::PotentialSpec;
use crate::lattice::LatticePoint;
use crate::rg::StageConfig;

/// Where the potential comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSource {
    /// A JSON potential document, relative to the config file.
    File {
        path: PathBuf,
    },
    Inline(PotentialSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub scale_tol: f64,
    pub stage_tol: f64,
    pub global_tol: f64,
    pub gmres_tol: f64,
    /// Bound on `‖D²X + W₀(X)‖₁` that `verify` accepts.
    pub residual_tol: f64,
    pub ward_tol: f64,
    pub hermitian_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            scale_tol: 1e-12,
            stage_tol: 1e-11,
            global_tol: 1e-14,
            gmres_tol: 1e-13,
            residual_tol: 1e-9,
            ward_tol: 1e-8,
            hermitian_tol: 1e-12,
        }
    }
}

/// Samples written to the trajectory CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectorySpec {
    pub theta0: Option<Vec<f64>>,
    pub t_max: f64,
    pub samples: usize,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        TrajectorySpec {
            theta0: None,
            t_max: 20.0,
            samples: 201,
        }
    }
}

impl TrajectorySpec {
    pub fn times(&self) -> Vec<f64> {
        match self.samples {
            0 => Vec::new(),
            1 => vec![0.0],
            n => (0..n).map(|k| self.t_max * k as f64 / (n - 1) as f64).collect(),
        }
    }
}

fn default_ell() -> u32 {
    3
}

fn default_eta() -> f64 {
    0.5
}

fn default_m() -> u64 {
    8
}

fn default_bound() -> u32 {
    32
}

fn default_qmax() -> u32 {
    100
}

fn default_true() -> bool {
    true
}

/// A complete run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub frequency: FrequencySpec,
    pub potential: PotentialSource,
    pub lambda: f64,
    #[serde(default = "default_ell")]
    pub ell: u32,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(rename = "M", default = "default_m")]
    pub m: u64,
    #[serde(default = "default_bound")]
    pub lattice_bound: u32,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Modes for the derivative Ward check; empty means `±e_a`.
    #[serde(default)]
    pub probes: Vec<LatticePoint>,
    #[serde(default)]
    pub continuation: bool,
    /// Overrides the seed of a synthetic potential.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Force this many outer stages.
    #[serde(default)]
    pub stages: Option<u32>,
    /// Diophantine exponent; defaults to `max(d - 1, 1)`.
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(rename = "Qmax", default = "default_qmax")]
    pub qmax: u32,
    #[serde(default = "default_true")]
    pub resonance_diagnostics: bool,
    #[serde(default)]
    pub trajectory: TrajectorySpec,
}

/// A config with its potential loaded and frequency certified.
#[derive(Clone, Debug)]
pub struct ResolvedRun {
    pub config: RunConfig,
    pub frequency: DiophantineFrequency,
    pub potential: Potential,
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Loads the potential (paths relative to `base`) and certifies `ω`.
    pub fn resolve(&self, base: &Path) -> Result<ResolvedRun> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidInput(format!("eta must lie in (0,1), got {}", self.eta)));
        }
        if !self.lambda.is_finite() {
            return Err(Error::InvalidInput(format!("lambda must be finite, got {}", self.lambda)));
        }
        let potential = match &self.potential {
            PotentialSource::File { path } => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full).map_err(|source| Error::File {
                    path: full.clone(),
                    source,
                })?;
                let doc: PotentialDoc = serde_json::from_str(&text)?;
                Potential::from_doc(&doc)?
            }
            PotentialSource::Inline(PotentialSpec::Synthetic { synthetic }) => {
                let mut s = synthetic.clone();
                if let Some(seed) = self.seed {
                    s.seed = seed;
                }
                PotentialSpec::Synthetic { synthetic: s }.build()?
            }
            PotentialSource::Inline(spec) => spec.build()?,
        };
        let omega = self.frequency.resolve()?;
        if omega.len() != potential.dim() {
            return Err(Error::DimensionMismatch {
                expected: potential.dim(),
                got: omega.len(),
            });
        }
        if potential.max_mode() > self.lattice_bound {
            return Err(Error::InvalidInput(format!(
                "lattice_bound {} is below the largest potential mode {}",
                self.lattice_bound,
                potential.max_mode()
            )));
        }
        let nu = self.nu.unwrap_or((omega.len() as f64 - 1.0).max(1.0));
        let frequency = DiophantineFrequency::new(omega, nu, self.qmax)?;
        Ok(ResolvedRun {
            config: self.clone(),
            frequency,
            potential,
        })
    }

    pub fn solve_config(&self) -> SolveConfig {
        let t = &self.tolerances;
        SolveConfig {
            eta: self.eta,
            m: self.m,
            lattice_bound: self.lattice_bound,
            global_tol: t.global_tol,
            stages: self.stages,
            continuation: self.continuation,
            stage: StageConfig {
                scale_tol: t.scale_tol,
                stage_tol: t.stage_tol,
                gmres_tol: t.gmres_tol,
                probes: self.probes.clone(),
                resonance: self.resonance_diagnostics,
                ..StageConfig::default()
            },
            ..SolveConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = RunConfig::from_json(
            r#"{"frequency":"golden","potential":{"dim":2,"ell":3,"modes":[{"q":[1,0],"re":0.5,"im":0.0}]},"lambda":0.001}"#,
        )
        .unwrap();
        assert_eq!(c.eta, 0.5);
        assert_eq!(c.m, 8);
        let r = c.resolve(Path::new(".")).unwrap();
        assert_eq!(r.potential.len(), 2);
        assert!(r.frequency.gamma() > 0.0);
    }

    #[test]
    fn rejects_bad_eta_and_unknown_keys() {
        let c = RunConfig::from_json(
            r#"{"frequency":"golden","potential":{"synthetic":{"ell":9,"window":4,"seed":1}},"lambda":0.0,"eta":1.5}"#,
        )
        .unwrap();
        assert!(c.resolve(Path::new(".")).is_err());
        assert!(RunConfig::from_json(r#"{"frequency":"golden","potential":{"path":"v.json"},"lambda":0.0,"etta":0.5}"#).is_err());
    }

    #[test]
    fn missing_potential_file() {
        let c = RunConfig::from_json(r#"{"frequency":"golden","potential":{"path":"/nonexistent/v.json"},"lambda":0.0}"#).unwrap();
        assert!(matches!(c.resolve(Path::new(".")), Err(Error::File { .. })));
    }
}
