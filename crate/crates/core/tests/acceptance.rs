//! Acceptance criteria 1–9, one line each. Runs without the libtest harness
//! so every line is printed; exits nonzero if any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use torus_rg::assembly::{solve, SolveConfig, SolveReport};
use torus_rg::commands::{cmd_solve, cmd_verify, EXIT_OK, EXIT_VERIFY};
use torus_rg::frequency::{certify, golden};
use torus_rg::ladder::synth_ck_potential;
use torus_rg::oracle::{compare, lindstedt, lindstedt_sum, newton_solve};
use torus_rg::scales::ScaleDecomposition;
use torus_rg::stats::{geometric_ratio, linear_fit};
use torus_rg::{Error, FourierMap, LatticePoint, LatticeWindow, Potential};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn omega() -> [f64; 2] {
    [1.0, golden()]
}

fn cosine() -> Potential {
    Potential::cosine(LatticePoint(vec![1, 0]), 3)
}

fn cutoff_algebra() -> Verdict {
    let eta = 0.5;
    let w = LatticeWindow::new(2, 64);
    let s = ScaleDecomposition::for_window(eta, &omega(), &w).unwrap();
    let big_n = s.max_scale();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut partition: f64 = 0.0;
    let mut inverse: f64 = 0.0;
    for _ in 0..10_000 {
        // log-uniform over [η^{N+2}, 8], both signs
        let lo = eta.powi(big_n as i32 + 2).ln();
        let k = (lo + rng.gen::<f64>() * (8f64.ln() - lo)).exp() * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let chi: Vec<f64> = (0..=big_n).map(|m| s.chi_n(m, k)).collect();
        let mut sum = 0.0;
        for n in 1..=big_n + 1 {
            sum += chi[n - 1];
            partition = partition.max((sum - s.gamma_below(n, k) * k * k).abs());
        }
        if k.abs() >= eta.powi(big_n as i32) {
            // Σ_{n<N} γ_n κ² = Σ_{n<N} χ_n
            let total: f64 = (0..big_n).map(|m| s.gamma_n(m, k)).sum();
            inverse = inverse.max((total * k * k - 1.0).abs());
        }
    }
    let mut mismatches = 0;
    for q in w.points().filter(|q| !q.is_zero()) {
        let k = q.dot(&omega());
        for n in 1..=big_n {
            let (lo, hi) = s.annulus(n);
            let inside = k.abs() > lo && k.abs() < hi;
            if inside != (s.gamma_n(n - 1, k) != 0.0) {
                mismatches += 1;
            }
        }
    }
    verdict(
        partition <= 1e-12 && inverse <= 1e-12 && mismatches == 0,
        format!("telescoping {partition:.1e}, exact inverse {inverse:.1e}, support mismatches {mismatches} (N = {big_n})"),
    )
}

fn analytic_config() -> SolveConfig {
    SolveConfig {
        lattice_bound: 32,
        ..SolveConfig::default()
    }
}

fn oracle_equivalence(run: &SolveReport) -> Verdict {
    let nw = match newton_solve(&cosine(), &omega(), 1e-3, 32, None) {
        Ok(n) => n,
        Err(e) => return verdict(false, format!("newton failed: {e}")),
    };
    let c = compare(&run.x, &nw.x, 1e-3).unwrap();
    verdict(
        run.succeeded() && c.l1_distance <= 1e-8 && run.residual <= 1e-10 && nw.residual <= 1e-10,
        format!(
            "|rg - newton|_1 {:.1e}, residuals rg {:.1e} newton {:.1e}",
            c.l1_distance, run.residual, nw.residual
        ),
    )
}

fn first_order() -> Verdict {
    let mut cfg = analytic_config();
    cfg.stage.resonance = false;
    let h = 1e-6;
    let plus = solve(&cosine(), &omega(), h, 3, &cfg).unwrap();
    let minus = solve(&cosine(), &omega(), -h, 3, &cfg).unwrap();
    let fd = plus.x.sub(&minus.x).unwrap().scale(0.5 / h);
    // x₁((±1,0)) = (∓i/2, 0) in closed form
    let closed = FourierMap::from_modes(
        2,
        32,
        true,
        [(LatticePoint(vec![1, 0]), vec![Complex64::new(0.0, -0.5), Complex64::new(0.0, 0.0)])],
    )
    .unwrap();
    let series = lindstedt(&cosine(), &omega(), 1).unwrap()[0].with_bound(32).unwrap();
    let rel = fd.sub(&closed).unwrap().ell1_norm() / closed.ell1_norm();
    let agree = series.sub(&closed).unwrap().ell1_norm();
    verdict(
        rel <= 1e-6 && agree <= 1e-14,
        format!("relative error {rel:.1e}, series vs closed form {agree:.1e}"),
    )
}

fn ward(run: &SolveReport) -> Verdict {
    let recs: Vec<_> = run.stages.iter().flat_map(|s| &s.scales.scales).collect();
    let c = recs.iter().map(|r| r.ward_const).fold(0.0, f64::max);
    let d = recs.iter().map(|r| r.ward_deriv).fold(0.0, f64::max);
    verdict(
        !recs.is_empty() && c <= 1e-8 && d <= 1e-8,
        format!("max constant {c:.1e}, max derivative {d:.1e} over {} scales", recs.len()),
    )
}

fn resonance(run: &SolveReport) -> Verdict {
    let recs: Vec<_> = run.stages.iter().flat_map(|s| &s.scales.scales).collect();
    let h = recs.iter().filter_map(|r| r.h_norm).fold(0.0, f64::max);
    let all_h = recs.iter().all(|r| r.h_norm.is_some_and(|v| v <= 2.0));
    let env: Vec<f64> = recs.iter().filter_map(|r| r.sigma_envelope).collect();
    let ratio = geometric_ratio(&env);
    let below = recs.iter().all(|r| match (r.sigma00_abs, r.sigma_envelope) {
        (Some(s), Some(e)) => s <= e,
        _ => false,
    });
    let s00 = recs.iter().filter_map(|r| r.sigma00_abs).fold(0.0, f64::max);
    verdict(
        all_h && below && ratio.is_some_and(|r| r < 1.0),
        format!(
            "max |H| {h:.4}, sigma envelope ratio {:.3}, max |sigma(0;0)| {s00:.1e}",
            ratio.unwrap_or(f64::NAN)
        ),
    )
}

fn telescoping() -> Verdict {
    let pot = synth_ck_potential(2, 9, 32, 1).unwrap();
    let mut cfg = SolveConfig {
        lattice_bound: 32,
        m: 1,
        stages: Some(4),
        ..SolveConfig::default()
    };
    cfg.stage.resonance = false;
    cfg.cs_orders = vec![2.0];
    let run = solve(&pot, &omega(), 1e-4, 9, &cfg).unwrap();
    let ys: Vec<f64> = run.stages.iter().map(|s| s.y_norm).collect();
    let ratios: Vec<f64> = ys.windows(2).map(|w| if w[0] == 0.0 { 0.0 } else { w[1] / w[0] }).collect();
    let cs = &run.cs_norms[0];
    let drift = (cs.windowed - cs.half_window).abs() / cs.windowed;
    verdict(
        run.succeeded() && ys.len() == 4 && ratios.iter().all(|r| *r <= 0.5) && run.residual <= 1e-9 && cs.total.is_finite() && cs.stable,
        format!(
            "stages {}, ratios [{}], residual {:.1e}, cs_norm(2) {:.4e} drift {drift:.1e}",
            ys.len(),
            ratios.iter().map(|r| format!("{r:.1e}")).collect::<Vec<_>>().join(", "),
            run.residual,
            cs.total
        ),
    )
}

fn diophantine() -> Verdict {
    let gammas: Vec<f64> = (1..=10).map(|k| certify(&omega(), 1.0, 10 * k).unwrap().gamma).collect();
    let monotone = gammas.windows(2).all(|w| w[1] <= w[0]);
    let drift = (gammas[4] - gammas[9]).abs() / gammas[4];
    let resonant = matches!(certify(&[1.0, 0.5], 1.0, 10), Err(Error::ResonantFrequency(_)));
    verdict(
        monotone && drift <= 0.05 && resonant,
        format!(
            "gamma(50) {:.6}, gamma(100) {:.6}, drift {drift:.1e}, (1,1/2) resonant: {resonant}",
            gammas[4], gammas[9]
        ),
    )
}

fn lindstedt_rate() -> Verdict {
    let k = 2;
    let orders = lindstedt(&cosine(), &omega(), k).unwrap();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for lambda in [1e-3, 5e-4, 2.5e-4] {
        let nw = newton_solve(&cosine(), &omega(), lambda, 16, None).unwrap();
        let partial = lindstedt_sum(&orders, lambda, k, 16);
        let err = nw.x.sub(&partial).unwrap().ell1_norm();
        xs.push(f64::ln(lambda));
        ys.push(err.ln());
    }
    let slope = linear_fit(&xs, &ys).map(|(s, _)| s).unwrap_or(f64::NAN);
    verdict(slope >= k as f64 + 0.8, format!("log-log slope {slope:.3} for K = {k}"))
}

fn pipeline() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/golden_cosine.json");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let s1 = cmd_solve(&cfg, &a).code;
    let s2 = cmd_solve(&cfg, &b).code;
    let same = std::fs::read(a.join("report.json")).ok() == std::fs::read(b.join("report.json")).ok();
    let v = cmd_verify(&a.join("report.json")).code;
    // perturb one stored coefficient by 1e-3
    let xpath = b.join("x.json");
    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&xpath).unwrap()).unwrap();
    let re = &mut doc["modes"][0]["re"][0];
    *re = serde_json::json!(re.as_f64().unwrap() + 1e-3);
    std::fs::write(&xpath, doc.to_string()).unwrap();
    let vc = cmd_verify(&b.join("report.json")).code;
    verdict(
        s1 == EXIT_OK && s2 == EXIT_OK && same && v == EXIT_OK && vc == EXIT_VERIFY,
        format!("solve {s1}/{s2}, identical reports {same}, verify {v}, corrupted verify {vc}"),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, budget: Duration, elapsed: Duration, v: Verdict| {
        let ok = v.pass && elapsed <= budget;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {n}: {} ({:.1}s / {}s) {}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            v.detail
        );
    };
    let timed = |f: &dyn Fn() -> Verdict| {
        let t = Instant::now();
        let v = f();
        (v, t.elapsed())
    };
    let secs = Duration::from_secs;

    let (v, t) = timed(&cutoff_algebra);
    report(1, secs(5), t, v);

    let clock = Instant::now();
    let run = solve(&cosine(), &omega(), 1e-3, 3, &analytic_config()).unwrap();
    let (v, t) = timed(&|| oracle_equivalence(&run));
    let t2 = clock.elapsed().max(t);
    report(2, secs(60), t2, v);

    let (v, t) = timed(&first_order);
    report(3, secs(30), t, v);
    report(4, secs(60), t2, ward(&run));
    report(5, secs(60), t2, resonance(&run));

    let (v, t) = timed(&telescoping);
    report(6, secs(600), t, v);
    let (v, t) = timed(&diophantine);
    report(7, secs(5), t, v);
    let (v, t) = timed(&lindstedt_rate);
    report(8, secs(60), t, v);
    let (v, t) = timed(&pipeline);
    report(9, secs(60), t, v);

    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
