use std::f64::consts::PI;

use kgflrw::config::{bundled, bundled_names, parse_str, Mode, Scenario};
use kgflrw::dynamics::{self, parse_trace_csv, Termination, TRACE_HEADER};
use kgflrw::hypotheses::{self, Theorem};
use kgflrw::Error;

fn over(s: &Scenario, kv: &[(&str, &str)]) -> Scenario {
    kv.iter().fold(s.clone(), |acc, (k, v)| acc.with_override(k, v).unwrap())
}

fn blowup_scenarios() -> Vec<Scenario> {
    bundled_names()
        .into_iter()
        .map(|n| bundled(n).unwrap())
        .filter(|s| s.mode == Mode::Simulate)
        .filter(|s| hypotheses::evaluate(s).unwrap().theorem != Theorem::None)
        .collect()
}

#[test]
fn observed_blowup_precedes_every_certified_bound() {
    let scenarios = blowup_scenarios();
    assert!(scenarios.len() >= 5);
    for s in scenarios {
        let trace = dynamics::run(&s).unwrap();
        let t_star = trace.t_star().unwrap_or_else(|| panic!("{}: no blow-up", s.name));
        for bound in [trace.report.t_bound_thm1, trace.report.t_bound_thm2].into_iter().flatten() {
            assert!(t_star <= bound, "{}: {t_star} > {bound}", s.name);
        }
    }
}

#[test]
fn nehari_identity_holds_at_every_row() {
    for s in blowup_scenarios() {
        let trace = dynamics::run(&s).unwrap();
        for r in &trace.rows {
            let scale = r.nehari.abs() + r.l2_v + r.l2sq_prime.abs() + r.l2sq;
            assert!(
                r.nehari_residual.abs() <= 1e-10 * scale,
                "{} t = {}: residual {} scale {scale}",
                s.name,
                r.t,
                r.nehari_residual
            );
        }
    }
}

#[test]
fn l_dynamics_match_finite_differences() {
    let s = bundled("linear-desitter").unwrap();
    let h = 0.5;
    let trace = dynamics::run(&s).unwrap();
    let rows = &trace.rows;
    let mut worst: f64 = 0.0;
    for w in rows.windows(3) {
        let dt = w[2].t - w[0].t;
        let l2 = (w[2].l2sq_prime - w[0].l2sq_prime) / dt;
        let rhs = 2.0 * (w[1].l2_v - w[1].nehari) - h * w[1].l2sq_prime;
        let scale = w[1].l2_v + w[1].nehari.abs();
        worst = worst.max((l2 - rhs).abs() / scale);
    }
    // central difference over 2·record_every·dt = 0.02
    assert!(worst < 1e-3, "worst {worst}");
}

#[test]
fn hdiag_stays_positive_and_grows_in_theorem_two_runs() {
    for name in ["desitter-thm2-A6", "powerlaw-thm2-t0shift"] {
        let s = over(&bundled(name).unwrap(), &[("run.diagnostic_mode", "thm2")]);
        let trace = dynamics::run(&s).unwrap();
        for w in trace.rows.windows(2) {
            assert!(w[0].hdiag > 0.0);
            assert!(w[1].hdiag >= w[0].hdiag * (1.0 - 1e-9), "{name}: H decreased at t = {}", w[1].t);
        }
    }
}

#[test]
fn homogeneous_desitter_run_tracks_oracle() {
    let s = bundled("desitter-thm2-A6").unwrap();
    let trace = dynamics::run(&s).unwrap();
    let oracle_t = dynamics::homogeneous_blowup_time(&s, 30.0).unwrap().unwrap();
    let t_star = trace.t_star().unwrap();
    assert!((t_star - oracle_t).abs() < 1e-4 * oracle_t, "{t_star} vs {oracle_t}");
    let rows: Vec<_> = trace.rows.iter().filter(|r| r.t <= 0.99 * oracle_t).collect();
    let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let o = dynamics::homogeneous_oracle(&s, &times).unwrap();
    for (r, x) in rows.iter().zip(&o.samples) {
        assert!((r.l2sq.sqrt() / x.l2sq.sqrt() - 1.0).abs() < 1e-6, "t = {}", r.t);
    }
}

#[test]
fn frozen_blowup_times() {
    // quadrature of the homogeneous reductions, frozen
    let m0 = dynamics::homogeneous_blowup_time(&bundled("minkowski-m0-u2-A3").unwrap(), 10.0).unwrap().unwrap();
    assert!((m0 - 1.717_315_342_254_411).abs() < 1e-7, "{m0}");
    let pde = dynamics::run(&bundled("minkowski-m0-u2-A3").unwrap()).unwrap().t_star().unwrap();
    assert!((pde - 1.717_315_342_254_411).abs() < 1e-5, "{pde}");
}

#[test]
fn frozen_theorem_bounds_for_de_sitter_data() {
    let r = hypotheses::evaluate(&bundled("desitter-thm2-A6").unwrap()).unwrap();
    assert!((r.t_bound_thm1.unwrap() - 108.0 * PI * PI / 119.0).abs() < 1e-12);
    assert!((r.t_bound_thm2.unwrap() - 360.0 * PI * PI / 109.0).abs() < 1e-12);
    assert_eq!(r.t_bound, r.t_bound_thm1);
}

#[test]
fn wrap_around_aborts_long_localized_runs() {
    let s = over(&bundled("linear-minkowski").unwrap(), &[("run.t_end", "8")]);
    let trace = dynamics::run(&s).unwrap();
    match trace.termination {
        Termination::WrapAroundAbort { t } => assert!((t - 4.0).abs() < 0.01, "aborted at {t}"),
        other => panic!("expected wrap-around abort, got {other:?}"),
    }
    assert_eq!(trace.termination.exit_code(), 5);
    assert!(trace.rows.iter().all(|r| r.wrap_margin.is_finite()));
}

#[test]
fn runs_are_deterministic() {
    let s = bundled("minkowski-m1-gauss").unwrap();
    let a = dynamics::run(&s).unwrap();
    let b = dynamics::run(&s).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.summary(), b.summary());
    let parsed = parse_trace_csv(&a.to_csv()).unwrap();
    assert_eq!(parsed.len(), a.rows.len());
    assert_eq!(parsed[3][2], a.rows[3].l2sq);
    assert!(a.to_csv().starts_with(TRACE_HEADER));
}

const STANDING_WAVE: &str = "
scale.family = powerlaw
scale.H = 0
phys.m = 1
nonlin.family = gauge
nonlin.p = 3
nonlin.eps = 2
grid.n = 1
grid.N = 64
grid.half_width = 3.141592653589793
data0.kind = plane_mod
data0.amplitude = 0.1
data0.mode = 2
run.t_end = 1
run.record_every = 1
";

#[test]
fn time_stepping_is_fourth_order() {
    let base = parse_str(STANDING_WAVE, None).unwrap();
    let finals: Vec<Vec<_>> = ["0.02", "0.01", "0.005"]
        .iter()
        .map(|dt| {
            let t = dynamics::run(&over(&base, &[("run.dt", dt)])).unwrap();
            assert!(matches!(t.termination, Termination::Completed));
            assert!((t.final_state.t - 1.0).abs() < 1e-12);
            t.final_state.u.values().to_vec()
        })
        .collect();
    let diff = |a: &[num_complex::Complex64], b: &[num_complex::Complex64]| {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    };
    let ratio = diff(&finals[0], &finals[1]) / diff(&finals[1], &finals[2]);
    assert!((13.0..19.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn complex_lambda_is_rejected_at_run_start() {
    let s = parse_str(&STANDING_WAVE.replace("nonlin.eps = 2", "nonlin.eps = 2\nnonlin.lambda = 1, 0.5"), None).unwrap();
    assert!(matches!(dynamics::run(&s), Err(Error::NonRealLambdaNoPotential)));
}
