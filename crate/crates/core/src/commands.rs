//! The batch commands behind the `torus-rg` binary.
//!
//! Each command returns an [`Outcome`] carrying the process exit code:
//! 0 success, 1 configuration error, 2 solver failure, 3 verification
//! mismatch.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::assembly::{equation_of_motion_defect, solve, trajectory, trajectory_csv, SolveReport, Status};
use crate::config::{ResolvedRun, RunConfig};
use crate::error::{Error, Result};
use crate::lattice::LatticeWindow;
use crate::report::{self, Check, Dump, RunReport, Timing};
use crate::scales::{scale_table_csv, ScaleDecomposition};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVE: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

/// Exit code plus the lines worth showing a human.
#[derive(Debug, Default)]
pub struct Outcome {
    pub code: i32,
    pub messages: Vec<String>,
}

impl Outcome {
    fn new(code: i32, messages: Vec<String>) -> Self {
        Outcome { code, messages }
    }
}

fn load(config_path: &Path) -> Result<ResolvedRun> {
    let cfg = RunConfig::load(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    cfg.resolve(base)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::File {
        path: path.to_path_buf(),
        source,
    }
}

fn run(resolved: &ResolvedRun) -> Result<SolveReport> {
    let c = &resolved.config;
    solve(&resolved.potential, resolved.frequency.omega(), c.lambda, c.ell, &c.solve_config())
}

/// `solve`: runs the config and writes report, coefficients and trajectory.
pub fn cmd_solve(config_path: &Path, out: &Path) -> Outcome {
    let resolved = match load(config_path) {
        Ok(r) => r,
        Err(e) => return Outcome::new(EXIT_CONFIG, vec![format!("config error: {e}")]),
    };
    let clock = Instant::now();
    let solved = match run(&resolved) {
        Ok(s) => s,
        Err(e) => return Outcome::new(EXIT_SOLVE, vec![format!("solve failed: {e}")]),
    };
    match write_solution(&resolved, &solved, out, clock.elapsed().as_secs_f64()) {
        Ok(mut msgs) => {
            let code = if solved.succeeded() { EXIT_OK } else { EXIT_SOLVE };
            if let Status::Failed { stage, error } = &solved.status {
                msgs.push(format!("stage {stage} failed: {error} (partial report written)"));
            }
            Outcome::new(code, msgs)
        }
        Err(e) => Outcome::new(EXIT_SOLVE, vec![format!("could not write outputs: {e}")]),
    }
}

fn write_solution(resolved: &ResolvedRun, solved: &SolveReport, out: &Path, seconds: f64) -> Result<Vec<String>> {
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let c = &resolved.config;
    let omega = resolved.frequency.omega();
    let theta0 = c.trajectory.theta0.clone().unwrap_or_else(|| vec![0.0; omega.len()]);
    let times = c.trajectory.times();
    let samples = trajectory(&solved.x, omega, &theta0, &times)?;
    let motion = equation_of_motion_defect(&solved.x, &resolved.potential, c.lambda, omega, &theta0, &times)?;
    let rep = RunReport::new(c, &resolved.potential, resolved.frequency.certificate(), omega, solved, motion);
    report::write_json(&out.join(report::COEFFICIENTS_FILE), &solved.x)?;
    report::write_json(&out.join(report::CORRECTIONS_FILE), &solved.corrections)?;
    report::write_json(&out.join(report::ACTION_FILE), &solved.action)?;
    let traj = out.join(report::TRAJECTORY_FILE);
    std::fs::write(&traj, trajectory_csv(&samples)).map_err(io_err(&traj))?;
    report::write_json(&out.join(report::REPORT_FILE), &rep)?;
    let finished_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    report::write_json(
        &out.join(report::TIMING_FILE),
        &Timing {
            total_seconds: seconds,
            stage_seconds: solved.stage_seconds.clone(),
            finished_unix,
        },
    )?;
    Ok(vec![format!(
        "{} stage(s), residual {:.3e}, |X|_1 {:.3e}, report in {}",
        solved.stages.len(),
        solved.residual,
        solved.x.ell1_norm(),
        out.join(report::REPORT_FILE).display()
    )])
}

/// `verify`: re-derives the report's claims independently.
pub fn cmd_verify(report_path: &Path) -> Outcome {
    let dump = match Dump::load(report_path) {
        Ok(d) => d,
        Err(e) => return Outcome::new(EXIT_CONFIG, vec![format!("cannot load report: {e}")]),
    };
    match report::verify(&dump) {
        Ok(checks) => {
            let failed = checks.iter().any(|c| !c.pass);
            Outcome::new(
                if failed { EXIT_VERIFY } else { EXIT_OK },
                checks.iter().map(format_check).collect(),
            )
        }
        Err(e) => Outcome::new(EXIT_VERIFY, vec![format!("verification error: {e}")]),
    }
}

fn format_check(c: &Check) -> String {
    format!(
        "{} {:<36} {:.3e} (limit {:.1e})",
        if c.pass { "ok  " } else { "FAIL" },
        c.name,
        c.value,
        c.limit
    )
}

/// Which config entry a scan varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanParam {
    Lambda,
    Eta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub param: f64,
    pub status: String,
    pub residual: f64,
    pub y_norms: Vec<f64>,
    pub max_stable_s: Option<f64>,
    pub error: String,
}

impl ScanRow {
    fn succeeded(&self) -> bool {
        self.status == "ok"
    }
}

fn scan_one(cfg: &RunConfig, base: &Path, param: ScanParam, value: f64) -> ScanRow {
    let mut cfg = cfg.clone();
    match param {
        ScanParam::Lambda => cfg.lambda = value,
        ScanParam::Eta => cfg.eta = value,
    }
    let failed = |status: &str, e: String| ScanRow {
        param: value,
        status: status.into(),
        residual: f64::NAN,
        y_norms: Vec::new(),
        max_stable_s: None,
        error: e,
    };
    let resolved = match cfg.resolve(base) {
        Ok(r) => r,
        Err(e) => return failed("config_error", e.to_string()),
    };
    match run(&resolved) {
        Ok(s) => ScanRow {
            param: value,
            status: if s.succeeded() { "ok".into() } else { "failed".into() },
            residual: s.residual,
            y_norms: s.stages.iter().map(|r| r.y_norm).collect(),
            max_stable_s: s.max_stable_s,
            error: match s.status {
                Status::Failed { error, .. } => error,
                Status::Converged => String::new(),
            },
        },
        Err(e) => failed("failed", e.to_string()),
    }
}

/// Solves once per value with up to `jobs` isolated workers.
pub fn scan(cfg: &RunConfig, base: &Path, param: ScanParam, values: &[f64], jobs: usize) -> Vec<ScanRow> {
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<ScanRow>>> = Mutex::new(vec![None; values.len()]);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, values.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&v) = values.get(i) else { break };
                let row = scan_one(cfg, base, param, v);
                rows.lock().expect("no worker panics while holding the lock")[i] = Some(row);
            });
        }
    });
    rows.into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|r| r.expect("every value scanned"))
        .collect()
}

pub fn scan_csv(param: ScanParam, rows: &[ScanRow]) -> String {
    let name = match param {
        ScanParam::Lambda => "lambda",
        ScanParam::Eta => "eta",
    };
    let mut out = format!("{name},status,residual,y_norms,max_stable_s,error\n");
    for r in rows {
        let ys: Vec<String> = r.y_norms.iter().map(|y| format!("{y:.6e}")).collect();
        out.push_str(&format!(
            "{:e},{},{:.6e},{},{},\"{}\"\n",
            r.param,
            r.status,
            r.residual,
            ys.join(";"),
            r.max_stable_s.map(|s| s.to_string()).unwrap_or_default(),
            r.error.replace('"', "'")
        ));
    }
    out
}

/// `scan`: writes `scan.csv`; exit 0 if any run succeeded.
pub fn cmd_scan(config_path: &Path, out: &Path, param: ScanParam, values: &[f64], jobs: usize) -> Outcome {
    let cfg = match RunConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => return Outcome::new(EXIT_CONFIG, vec![format!("config error: {e}")]),
    };
    if values.is_empty() {
        return Outcome::new(EXIT_CONFIG, vec!["empty parameter list".into()]);
    }
    let base = config_path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let rows = scan(&cfg, &base, param, values, jobs);
    let path = out.join("scan.csv");
    if let Err(e) = std::fs::create_dir_all(out).and_then(|_| std::fs::write(&path, scan_csv(param, &rows))) {
        return Outcome::new(EXIT_SOLVE, vec![format!("{}: {e}", path.display())]);
    }
    let mut msgs: Vec<String> = rows
        .iter()
        .map(|r| format!("{:e}: {} residual {:.3e} {}", r.param, r.status, r.residual, r.error))
        .collect();
    if let Some(b) = rows.iter().find(|r| !r.succeeded()) {
        msgs.push(format!("breakdown at {:e}: {}", b.param, b.error));
    }
    let code = if rows.iter().any(ScanRow::succeeded) { EXIT_OK } else { EXIT_SOLVE };
    Outcome::new(code, msgs)
}

/// Per-scale diagnostics of every stage as CSV.
pub fn stage_diagnostics_csv(solved: &SolveReport) -> String {
    let mut out = String::from("j,n,iters,final_residual,ward_const,ward_deriv,H_norm,sigma00_abs,dsigma00_abs,sigma_envelope,rho_offdiag_decay,z_norm,dz_norm,mean_mode\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
    for st in &solved.stages {
        for r in &st.scales.scales {
            out.push_str(&format!(
                "{},{},{},{:.6e},{:.6e},{:.6e},{},{},{},{},{},{:.6e},{:.6e},{:.6e}\n",
                st.j,
                r.n,
                r.iters,
                r.final_residual,
                r.ward_const,
                r.ward_deriv,
                opt(r.h_norm),
                opt(r.sigma00_abs),
                opt(r.dsigma00_abs),
                opt(r.sigma_envelope),
                opt(r.rho_offdiag_decay),
                r.z_norm,
                r.dz_norm,
                r.mean_mode
            ));
        }
    }
    out
}

/// `diagnose-scales`: scale occupancy and per-stage diagnostics.
pub fn cmd_diagnose_scales(config_path: &Path, out: &Path) -> Outcome {
    let resolved = match load(config_path) {
        Ok(r) => r,
        Err(e) => return Outcome::new(EXIT_CONFIG, vec![format!("config error: {e}")]),
    };
    let c = &resolved.config;
    let omega = resolved.frequency.omega();
    let window = LatticeWindow::new(omega.len(), c.lattice_bound);
    let scales = match ScaleDecomposition::for_window(c.eta, omega, &window) {
        Ok(s) => s,
        Err(e) => return Outcome::new(EXIT_CONFIG, vec![format!("config error: {e}")]),
    };
    let table = scale_table_csv(&scales.scale_table(omega, &window));
    let solved = match run(&resolved) {
        Ok(s) => s,
        Err(e) => return Outcome::new(EXIT_SOLVE, vec![format!("solve failed: {e}")]),
    };
    let write = || -> std::io::Result<()> {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("scales.csv"), &table)?;
        std::fs::write(out.join("stage_diagnostics.csv"), stage_diagnostics_csv(&solved))
    };
    if let Err(e) = write() {
        return Outcome::new(EXIT_SOLVE, vec![format!("{}: {e}", out.display())]);
    }
    let code = if solved.succeeded() { EXIT_OK } else { EXIT_SOLVE };
    Outcome::new(code, vec![format!("{} scales, tables in {}", scales.max_scale(), out.display())])
}
