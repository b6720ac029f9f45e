//! Run reports on disk and their independent verification.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assembly::{action_embedding, cs_norm, stage_fixed_point_defect, CsNorm, SolveReport, StageRecord, Status};
use crate::config::{RunConfig, Tolerances};
use crate::error::{Error, Result};
use crate::fourier::{FourierMap, Potential, PotentialDoc};
use crate::frequency::Certificate;
use crate::ladder::ApproximationLadder;
use crate::oracle;

pub const REPORT_VERSION: u32 = 1;

pub const REPORT_FILE: &str = "report.json";
pub const COEFFICIENTS_FILE: &str = "x.json";
pub const CORRECTIONS_FILE: &str = "corrections.json";
pub const ACTION_FILE: &str = "action.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalNorms {
    pub residual: f64,
    pub residual_tail: f64,
    pub x_norm: f64,
    pub action_norm: f64,
    pub hermitian_defect: f64,
    /// `max_t |İ + λ∂V(θ)|` over the trajectory samples.
    pub motion_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFiles {
    pub coefficients: String,
    pub corrections: String,
    pub action: String,
    pub trajectory: String,
}

impl Default for OutputFiles {
    fn default() -> Self {
        OutputFiles {
            coefficients: COEFFICIENTS_FILE.into(),
            corrections: CORRECTIONS_FILE.into(),
            action: ACTION_FILE.into(),
            trajectory: TRAJECTORY_FILE.into(),
        }
    }
}

/// `report.json`. Everything here is a deterministic function of the config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub report_version: u32,
    pub config: RunConfig,
    pub potential: PotentialDoc,
    pub omega: Vec<f64>,
    pub certificate: Certificate,
    pub status: Status,
    pub stages: Vec<StageRecord>,
    pub continuation: Vec<(f64, Status)>,
    pub final_norms: FinalNorms,
    pub cs_norms: Vec<CsNorm>,
    pub max_stable_s: Option<f64>,
    pub files: OutputFiles,
}

/// `timing.json`, kept apart so that reports compare byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub stage_seconds: Vec<f64>,
    pub finished_unix: u64,
}

impl RunReport {
    pub fn new(
        config: &RunConfig,
        potential: &Potential,
        certificate: &Certificate,
        omega: &[f64],
        solved: &SolveReport,
        motion_defect: f64,
    ) -> Self {
        RunReport {
            report_version: REPORT_VERSION,
            config: config.clone(),
            potential: potential.to_doc(),
            omega: omega.to_vec(),
            certificate: certificate.clone(),
            status: solved.status.clone(),
            stages: solved.stages.clone(),
            continuation: solved.continuation.clone(),
            final_norms: FinalNorms {
                residual: solved.residual,
                residual_tail: solved.residual_tail,
                x_norm: solved.x.ell1_norm(),
                action_norm: solved.action.ell1_norm(),
                hermitian_defect: solved.x.hermitian_defect(),
                motion_defect,
            },
            cs_norms: solved.cs_norms.clone(),
            max_stable_s: solved.max_stable_s,
            files: OutputFiles::default(),
        }
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// One line of the verification table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            limit,
            pass: value <= limit,
        }
    }
}

/// The dumped maps next to a report.
pub struct Dump {
    pub report: RunReport,
    pub x: FourierMap,
    pub corrections: Vec<FourierMap>,
    pub action: FourierMap,
}

impl Dump {
    pub fn load(report_path: &Path) -> Result<Self> {
        let report: RunReport = read_json(report_path)?;
        if report.report_version != REPORT_VERSION {
            return Err(Error::InvalidInput(format!("unsupported report version {}", report.report_version)));
        }
        let dir = report_path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        let x = read_json(&dir.join(&report.files.coefficients))?;
        let corrections = read_json(&dir.join(&report.files.corrections))?;
        let action = read_json(&dir.join(&report.files.action))?;
        Ok(Dump {
            report,
            x,
            corrections,
            action,
        })
    }
}

/// Recomputes the report's claims with the independent evaluator. Limits
/// are the configured tolerances doubled.
pub fn verify(dump: &Dump) -> Result<Vec<Check>> {
    let r = &dump.report;
    let t: &Tolerances = &r.config.tolerances;
    let pot = Potential::from_doc(&r.potential)?;
    let lambda = r.config.lambda;
    let omega = &r.omega;
    let x = &dump.x;
    let mut checks = Vec::new();

    checks.push(Check::new(
        "status converged",
        if r.status == Status::Converged { 0.0 } else { 1.0 },
        0.0,
    ));
    checks.push(Check::new("hermitian symmetry", x.hermitian_defect(), 2.0 * t.hermitian_tol));
    checks.push(Check::new(
        "torus equation residual",
        oracle::residual(&pot, x, lambda, omega),
        2.0 * t.residual_tol,
    ));
    checks.push(Check::new(
        "fixed point x = G0 P W0(x)",
        stage_fixed_point_defect(&pot, x, lambda, omega),
        2.0 * 10.0 * t.stage_tol,
    ));

    let mut sum = FourierMap::zero(x.dim(), x.lattice_bound(), true);
    for y in &dump.corrections {
        sum = sum.add(y)?;
    }
    let scale = x.ell1_norm().max(1.0);
    checks.push(Check::new("telescopic sum", sum.sub(x)?.ell1_norm() / scale, 2.0 * 1e-14));

    // the constant Ward identity at the end of every stage: ∫ W^j(x_j) = 0
    if let Some(last) = r.stages.last() {
        let ladder = ApproximationLadder::new(pot.clone(), r.config.m, last.j)?;
        let mut xj = FourierMap::zero(x.dim(), x.lattice_bound(), true);
        let mut worst: f64 = 0.0;
        for (rec, y) in r.stages.iter().zip(&dump.corrections) {
            xj = xj.add(y)?;
            worst = worst.max(oracle::mean_defect(ladder.truncation(rec.j), &xj, lambda));
        }
        checks.push(Check::new("mean equation per stage", worst, 2.0 * t.ward_tol));
    }
    let reported_const = r
        .stages
        .iter()
        .flat_map(|s| &s.scales.scales)
        .map(|s| s.ward_const)
        .fold(0.0, f64::max);
    let reported_deriv = r
        .stages
        .iter()
        .flat_map(|s| &s.scales.scales)
        .map(|s| s.ward_deriv)
        .fold(0.0, f64::max);
    checks.push(Check::new("reported constant Ward residual", reported_const, 2.0 * t.ward_tol));
    checks.push(Check::new("reported derivative Ward residual", reported_deriv, 2.0 * t.ward_tol));

    let action = action_embedding(x, omega);
    checks.push(Check::new(
        "action embedding",
        action.sub(&dump.action)?.ell1_norm() / action.ell1_norm().max(1.0),
        2.0 * 1e-14,
    ));

    let mut worst_cs: f64 = 0.0;
    for c in &r.cs_norms {
        let again = cs_norm(x, c.s);
        let rel = if c.windowed == 0.0 {
            again.windowed
        } else {
            (again.windowed - c.windowed).abs() / c.windowed
        };
        worst_cs = worst_cs.max(rel);
    }
    checks.push(Check::new("cs_norm table", worst_cs, 2.0 * 1e-12));
    Ok(checks)
}
