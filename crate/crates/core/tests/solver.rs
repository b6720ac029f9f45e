use num_complex::Complex64;
use torus_rg::assembly::{
    action_embedding, cs_norm, equation_of_motion_defect, residual, solve, stage_fixed_point_defect, trajectory, SolveConfig, SolveReport,
};
use torus_rg::frequency::golden;
use torus_rg::ladder::ApproximationLadder;
use torus_rg::oracle::{compare, lindstedt, newton_solve};
use torus_rg::{FourierMap, LatticePoint, Potential};

fn omega() -> [f64; 2] {
    [1.0, golden()]
}

fn lp(v: &[i32]) -> LatticePoint {
    LatticePoint(v.to_vec())
}

/// Two incommensurate cosines, so the solution fills a 2-d sublattice.
fn two_mode() -> Potential {
    Potential::new(
        2,
        3,
        [(lp(&[1, 0]), Complex64::new(0.5, 0.0)), (lp(&[0, 1]), Complex64::new(0.0, 0.25))],
    )
    .unwrap()
}

fn quick(bound: u32) -> SolveConfig {
    let mut c = SolveConfig {
        lattice_bound: bound,
        ..SolveConfig::default()
    };
    c.stage.resonance = false;
    c
}

fn solved(pot: &Potential, lambda: f64, bound: u32) -> SolveReport {
    solve(pot, &omega(), lambda, 3, &quick(bound)).unwrap()
}

#[test]
fn zero_coupling_gives_zero_torus() {
    let r = solved(&two_mode(), 0.0, 8);
    assert!(r.succeeded());
    assert!(r.x.is_empty());
    assert_eq!(r.residual, 0.0);
}

#[test]
fn two_mode_potential_matches_newton() {
    let pot = two_mode();
    let r = solved(&pot, 2e-3, 12);
    // one stage suffices: γ₀ = 8 covers both modes
    assert_eq!(r.stages.len(), 1);
    let nw = newton_solve(&pot, &omega(), 2e-3, 12, None).unwrap();
    let c = compare(&r.x, &nw.x, 2e-3).unwrap();
    assert!(c.l1_distance <= 1e-10, "{c:?}");
    assert!(r.residual <= 1e-10);
}

#[test]
fn solution_has_no_mean_and_is_real() {
    let r = solved(&two_mode(), 2e-3, 12);
    assert!(r.x.get(&LatticePoint::zero(2)).is_none());
    assert!(r.x.hermitian_defect() <= 1e-15);
    for t in [0.0, 0.3, 2.0] {
        let v = r.x.eval(&[t, 1.0 - t]);
        assert!(v.iter().all(|c| c.im.abs() <= 1e-12));
    }
}

#[test]
fn telescopic_sum_and_stage_fixed_points() {
    let pot = two_mode();
    let mut cfg = quick(12);
    cfg.m = 1;
    cfg.stages = Some(2);
    let r = solve(&pot, &omega(), 2e-3, 3, &cfg).unwrap();
    assert_eq!(r.resum().unwrap().sub(&r.x).unwrap().ell1_norm(), 0.0);
    let ladder = ApproximationLadder::new(pot.clone(), 1, 1).unwrap();
    let mut x = FourierMap::zero(2, 12, true);
    for (rec, y) in r.stages.iter().zip(&r.corrections) {
        x = x.add(y).unwrap();
        let d = stage_fixed_point_defect(ladder.truncation(rec.j), &x, 2e-3, &omega());
        assert!(d <= 10.0 * cfg.stage.stage_tol, "stage {} defect {d:e}", rec.j);
        assert!(rec.residual <= 10.0 * cfg.stage.stage_tol);
    }
}

#[test]
fn first_lindstedt_order_from_newton() {
    let pot = two_mode();
    let h = 1e-6;
    let p = newton_solve(&pot, &omega(), h, 8, None).unwrap().x;
    let m = newton_solve(&pot, &omega(), -h, 8, None).unwrap().x;
    let fd = p.sub(&m).unwrap().scale(0.5 / h);
    let x1 = lindstedt(&pot, &omega(), 1).unwrap()[0].with_bound(8).unwrap();
    assert!(fd.sub(&x1).unwrap().ell1_norm() <= 1e-9 * x1.ell1_norm());
}

#[test]
fn action_is_the_time_derivative() {
    let r = solved(&two_mode(), 2e-3, 12);
    let y = action_embedding(&r.x, &omega());
    // central differences of θ(t) = ωt + X(ωt)
    let theta = |t: f64| -> Vec<f64> {
        let phi = [t, golden() * t];
        let x = r.x.eval(&phi);
        (0..2).map(|a| phi[a] + x[a].re).collect()
    };
    for t in [0.0, 0.7, 3.1] {
        let h = 1e-4;
        let (a, b, c, d) = (theta(t + 2.0 * h), theta(t + h), theta(t - h), theta(t - 2.0 * h));
        let yv = y.eval(&[t, golden() * t]);
        for k in 0..2 {
            let fd = (-a[k] + 8.0 * b[k] - 8.0 * c[k] + d[k]) / (12.0 * h);
            assert!((fd - yv[k].re).abs() <= 1e-10, "{fd} vs {}", yv[k].re);
        }
    }
}

#[test]
fn trajectory_obeys_equations_of_motion() {
    let pot = two_mode();
    let lambda = 2e-3;
    let r = solved(&pot, lambda, 16);
    let times: Vec<f64> = (0..50).map(|k| 0.37 * k as f64).collect();
    let theta0 = [0.4, -1.1];
    assert!(equation_of_motion_defect(&r.x, &pot, lambda, &omega(), &theta0, &times).unwrap() <= 1e-8);
    let s = trajectory(&r.x, &omega(), &[0.0, 0.0], &[0.0]).unwrap();
    let x0 = r.x.eval(&[0.0, 0.0]);
    assert!((s[0].theta[1] - x0[1].re).abs() < 1e-15);
}

#[test]
fn residual_of_the_zero_map_is_the_force() {
    let pot = two_mode();
    let lambda = 3e-2;
    let (r, _) = residual(&FourierMap::zero(2, 8, true), &pot, lambda, &omega()).unwrap();
    let force = pot.gradient_map(lambda, 8).ell1_norm();
    assert!((r - force).abs() <= 1e-15 * force);
}

#[test]
fn cs_norm_is_stable_under_window_doubling() {
    let r = solved(&two_mode(), 2e-3, 16);
    for s in [0.0, 2.0, 4.0] {
        let c = cs_norm(&r.x, s);
        assert!(c.stable && c.total.is_finite(), "{c:?}");
    }
    assert!((cs_norm(&r.x, 0.0).windowed - r.x.ell1_norm()).abs() <= 1e-15 * r.x.ell1_norm());
}

#[test]
fn continuation_reaches_the_same_torus() {
    let pot = two_mode();
    let direct = solved(&pot, 4e-3, 12);
    let mut cfg = quick(12);
    cfg.continuation = true;
    let cont = solve(&pot, &omega(), 4e-3, 3, &cfg).unwrap();
    assert_eq!(cont.continuation.len(), 2);
    assert!(cont.x.sub(&direct.x).unwrap().ell1_norm() <= 1e-14);
}

#[test]
fn decay_fit_of_an_analytic_stage() {
    let r = solved(&two_mode(), 2e-3, 16);
    let f = &r.stages[0].decay_fit;
    assert!(f.envelope_constant.is_finite() && f.envelope_constant > 0.0);
    assert!(f.fitted_rate.unwrap() > f.expected_rate);
}

#[test]
fn scales_change_the_solution_only_slightly() {
    // z_n - z_{n-1} lives on the newly admitted band up to O(λ) leakage
    let mut cfg = quick(16);
    cfg.stage.resonance = false;
    let lambda = 1e-3;
    let r = solve(&two_mode(), &omega(), lambda, 3, &cfg).unwrap();
    let recs = &r.stages[0].scales.scales;
    let first = recs[0].dz_norm;
    for rec in &recs[1..] {
        assert!(
            rec.dz_norm <= 10.0 * lambda * first.max(lambda),
            "scale {} moved by {:e}",
            rec.n,
            rec.dz_norm
        );
    }
}
