use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use kgflrw::config::bundled;
use kgflrw::field::{make_profile, Field, Grid, ProfileSpec};
use kgflrw::functionals::{self, Norms, PhysicalParams};
use kgflrw::hypotheses::{self, CaseLabel, HypothesisReport, Outcome};
use kgflrw::nonlinearity::{admissible_eps_range, FamilyKind, Nonlinearity};
use kgflrw::odelab::{self, ConcavityProblem, Forcing};
use kgflrw::scale_factor::{t0_threshold, ScaleFactor};
use kgflrw::Error;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn de_sitter_defect_vanishes(h in 0.0f64..3.0, t in 0.0f64..5.0, n in 1usize..=3) {
        let k = ScaleFactor::de_sitter(h, 1.0, n).unwrap().eval(t).unwrap();
        prop_assert!(k.expansion_defect().abs() <= 4.0 * f64::EPSILON * (k.adot * k.adot).max(f64::MIN_POSITIVE));
    }

    #[test]
    fn power_law_defect_rate_closed_form(
        sigma in -1.0f64..3.0, h in 0.01f64..2.0, t in 0.0f64..10.0, n in 1usize..=3,
    ) {
        prop_assume!(sigma != -1.0);
        let sf = ScaleFactor::power_law(sigma, h, 1.0, n).unwrap();
        let k = sf.eval(t).unwrap();
        let q = n as f64 * (1.0 + sigma) / 2.0;
        let expected = q * h * h / (1.0 + q * h * t).powi(2);
        prop_assert!(k.defect_rate() >= 0.0);
        prop_assert!((k.defect_rate() - expected).abs() <= 1e-10 * expected.max(1e-300));
    }

    #[test]
    fn horizon_and_eval_agree(sigma in -4.0f64..3.0, h in -2.0f64..2.0, n in 1usize..=3) {
        prop_assume!((sigma + 1.0).abs() > 1e-3 && h.abs() > 1e-3);
        let sf = ScaleFactor::power_law(sigma, h, 1.0, n).unwrap();
        let horizon = sf.horizon();
        prop_assert_eq!(horizon.is_finite(), (1.0 + sigma) * h < 0.0);
        if horizon.is_finite() {
            prop_assert!(sf.eval(horizon * (1.0 - 1e-9)).is_ok());
            let beyond = sf.eval(horizon);
            prop_assert!(matches!(beyond, Err(Error::TimeBeyondHorizon { .. })), "eval at the horizon must fail");
            prop_assert!(sf.eval(horizon * 1.5).is_err());
        }
    }

    #[test]
    fn min_admissible_t0_is_sharp(sigma in -0.9f64..2.0, h in 0.5f64..20.0, eps in 0.2f64..2.0) {
        let sf = ScaleFactor::power_law(sigma, h, 1.0, 1).unwrap();
        let found = sf.min_admissible_t0(1.0, 1.0, eps).unwrap();
        let (ok, threshold) = sf.check_t0_condition(found.t0, 1.0, 1.0, eps).unwrap();
        prop_assert!(ok);
        prop_assert!((threshold - t0_threshold(1.0, 1.0, eps, 1)).abs() <= 1e-15 * threshold);
        if found.t0 > 0.0 {
            let (before, _) = sf.check_t0_condition(found.t0 * (1.0 - 1e-6), 1.0, 1.0, eps).unwrap();
            prop_assert!(!before);
        }
    }

    #[test]
    fn gauge_power_structure(p in 1.1f64..5.0, frac in 0.05f64..1.0, seed in any::<u64>()) {
        let eps = frac * (p - 1.0);
        prop_assert!(admissible_eps_range(FamilyKind::GaugeInvariant, p, 1.0).contains(eps));
        let nl = Nonlinearity::gauge_invariant(p, c(1.0), eps).unwrap();
        prop_assert_eq!(nl.f(c(0.0)).unwrap(), c(0.0));
        let samples = sample_cloud(10_000, seed, false);
        let report = nl.verify_structure(&samples).unwrap();
        prop_assert!(report.inequality_holds(), "{:?}", report);
        prop_assert!(report.chain_rule_holds(), "{:?}", report);
    }

    #[test]
    fn real_abs_structure(p in 1.1f64..5.0, seed in any::<u64>()) {
        let nl = Nonlinearity::real_abs(p, 1.0, p - 1.0).unwrap();
        prop_assert_eq!(nl.f(c(0.0)).unwrap(), c(0.0));
        let report = nl.verify_structure(&sample_cloud(10_000, seed, true)).unwrap();
        prop_assert!(report.inequality_holds() && report.chain_rule_holds(), "{:?}", report);
    }

    #[test]
    fn local_lipschitz_constant_is_bounded(p in 1.1f64..5.0, seed in any::<u64>()) {
        let nl = Nonlinearity::gauge_invariant(p, c(1.0), p - 1.0).unwrap();
        let cloud = sample_cloud(2_000, seed, false);
        let pairs: Vec<_> = cloud.chunks(2).map(|w| (w[0], w[1])).collect();
        let fitted = nl.lipschitz_constant_fit(&pairs);
        prop_assert!(fitted.is_finite() && fitted <= p * (1.0 + 1e-12));
    }

    #[test]
    fn gauge_equivariance(p in 1.1f64..5.0, re in -3.0f64..3.0, im in -3.0f64..3.0, phi in 0.0f64..6.3) {
        let nl = Nonlinearity::gauge_invariant(p, Complex64::new(1.0, 0.3), 0.5 * (p - 1.0)).unwrap();
        let u = Complex64::new(re, im);
        let rot = Complex64::from_polar(1.0, phi);
        let lhs = nl.f(rot * u).unwrap();
        let rhs = rot * nl.f(u).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }

    #[test]
    fn laplacian_has_zero_mean(dim in 1usize..=2, seed in any::<u64>()) {
        let n = if dim == 1 { 64 } else { 16 };
        let grid = Grid::new(dim, n, PI).unwrap();
        let coeffs = fourier_coeffs(seed);
        let u = Field::from_fn(grid, |x| {
            let mut s = Complex64::new(0.0, 0.0);
            for (k, a) in coeffs.iter().enumerate() {
                let kx = (k + 1) as f64;
                s += a * Complex64::from_polar(1.0, kx * x[0] + x.get(1).map(|y| (k as f64) * y).unwrap_or(0.0));
            }
            s
        });
        let lap = u.laplacian();
        let mean: Complex64 = lap.values().iter().sum::<Complex64>() / lap.values().len() as f64;
        let scale = lap.max_abs().max(1.0);
        prop_assert!(mean.norm() <= 1e-12 * scale);
    }

    #[test]
    fn rho_delta_are_phase_invariant(a in 0.2f64..6.0, b in -2.0f64..2.0, phi in 0.0f64..6.3) {
        let grid = Grid::new(1, 32, PI).unwrap();
        let sf = ScaleFactor::de_sitter(0.3, 1.0, 1).unwrap();
        let params = PhysicalParams::new(1.0, 1.0, 1.0, 1).unwrap();
        let nl = Nonlinearity::gauge_invariant(2.0, c(1.0), 1.0).unwrap();
        let rot = Complex64::from_polar(1.0, phi);
        let u0 = Field::constant(grid, c(a));
        let u1 = Field::constant(grid, c(b));
        let r0 = functionals::rho(&u0, &u1, &sf, &params, &nl).unwrap();
        let d0 = functionals::delta(&u0, &u1, 0.4, &sf, &params, &nl).unwrap();
        let u0r = Field::constant(grid, rot * a);
        let u1r = Field::constant(grid, rot * b);
        let r1 = functionals::rho(&u0r, &u1r, &sf, &params, &nl).unwrap();
        let d1 = functionals::delta(&u0r, &u1r, 0.4, &sf, &params, &nl).unwrap();
        prop_assert!((r0 - r1).abs() <= 1e-10 * r0.abs().max(1.0));
        prop_assert!((d0 - d1).abs() <= 1e-10 * d0.abs().max(1.0));
    }

    #[test]
    fn theorem_one_implies_unstable_set(a in 0.1f64..8.0, b in 0.0f64..3.0, h in 0.0f64..1.0, m in 0.0f64..2.0) {
        let grid = Grid::new(1, 32, PI).unwrap();
        let sf = ScaleFactor::de_sitter(h, 1.0, 1).unwrap();
        let params = PhysicalParams::new(m, 1.0, 1.0, 1).unwrap();
        let nl = Nonlinearity::gauge_invariant(2.0, c(1.0), 1.0).unwrap();
        let u0 = Field::constant(grid, c(a));
        let u1 = Field::constant(grid, c(b));
        let check = hypotheses::check_theorem1(&u0, &u1, &sf, &params, &nl).unwrap();
        if check.outcome == Outcome::Applies {
            let kin = sf.eval(0.0).unwrap();
            let norms = Norms::measure(&u0, &u1, &nl).unwrap();
            prop_assert!(norms.nehari(&kin, &params) < 0.0);
        }
    }

    #[test]
    fn table_label_matches_quadrants(a in 0.05f64..6.0, b in -2.0f64..4.0) {
        let grid = Grid::new(1, 32, PI).unwrap();
        let sf = ScaleFactor::minkowski(1).unwrap();
        let params = PhysicalParams::new(1.0, 1.0, 1.0, 1).unwrap();
        let nl = Nonlinearity::gauge_invariant(2.0, c(1.0), 1.0).unwrap();
        let u0 = Field::constant(grid, c(a));
        let u1 = Field::constant(grid, c(b));
        let label = hypotheses::classify_table1(&u0, &u1, 0.0, &sf, &params, &nl).unwrap();
        let kin = sf.eval(0.0).unwrap();
        let norms = Norms::measure(&u0, &u1, &nl).unwrap();
        let e0 = norms.energy(&kin, &params);
        let k = params.m_tilde().powi(2) * params.c_tilde().powi(2) * params.eps / (2.0 * (params.eps + 2.0));
        let expected = if !(norms.nehari(&kin, &params) < 0.0 && norms.re_uv >= 0.0) {
            CaseLabel::None
        } else {
            match (k * norms.l2_u > e0, k * norms.re_uv > e0) {
                (true, false) => CaseLabel::I,
                (true, true) => CaseLabel::II,
                (false, true) => CaseLabel::III,
                (false, false) => CaseLabel::IV,
            }
        };
        prop_assert_eq!(label, expected);
    }

    #[test]
    fn theorem_one_bound_scales_linearly(l in 0.1f64..100.0, rho in 0.1f64..100.0, rate in 0.0f64..2.0, eps in 0.1f64..3.0) {
        let t = hypotheses::theorem1_bound(l, rho, rate, eps, 1.0);
        prop_assert!(t >= 1.0);
        let t2 = hypotheses::theorem1_bound(2.0 * l, rho, rate, eps, 1.0);
        if t > 1.0 {
            prop_assert!((t2 - 2.0 * t).abs() <= 1e-12 * t2);
        } else {
            prop_assert!(t2 >= t);
        }
        let s = hypotheses::theorem2_bound(0.5, l, rho, rate, eps, 1.0);
        prop_assert!(s >= 1.5);
    }

    #[test]
    fn concavity_chain_holds(seed in any::<u64>()) {
        for p in odelab::random_suite(5, seed) {
            let sol = odelab::solve_concavity(&p, Forcing::Equality).unwrap();
            let bound = odelab::tstar_bound(&p);
            prop_assert!(sol.vanish_time <= bound + 1e-8);
            prop_assert!(bound <= p.t_end + 1e-8);
        }
    }

    #[test]
    fn concavity_energy_relation(seed in any::<u64>()) {
        let p = odelab::random_suite(1, seed)[0];
        let sol = odelab::solve_concavity(&p, Forcing::Equality).unwrap();
        let i = p.const_i();
        let e = 2.0 + 1.0 / p.kappa;
        let scale = p.y1 * p.y1 + i * p.y0.powf(e);
        for &(_, y, dy) in &sol.trajectory {
            let residual = dy * dy - p.y1 * p.y1 - i * (p.y0.powf(e) - y.powf(e));
            prop_assert!(residual.abs() <= 1e-8 * scale, "residual {}", residual);
        }
    }

    #[test]
    fn tstar_bound_decreases(seed in any::<u64>(), extra in 0.01f64..2.0, grow in 1.01f64..3.0) {
        let p = odelab::random_suite(1, seed)[0];
        let base = odelab::tstar_bound(&p);
        let steeper = ConcavityProblem { y1: p.y1 - extra, ..p };
        let stronger = ConcavityProblem { a: p.a * grow, ..p };
        prop_assert!(odelab::tstar_bound(&steeper) < base);
        prop_assert!(odelab::tstar_bound(&stronger) < base);
        let v = odelab::solve_concavity(&p, Forcing::Equality).unwrap().vanish_time;
        let v_steep = odelab::solve_concavity(&steeper, Forcing::Equality).unwrap().vanish_time;
        prop_assert!(v_steep < v);
    }

    #[test]
    fn comparison_accepts_decaying_positive(rate in 0.1f64..3.0, slope in 0.1f64..5.0) {
        // slope must exceed the one-sided difference error r²dt/2 ≤ 0.045
        let t: Vec<f64> = (0..=400).map(|i| 4.0 * i as f64 / 400.0).collect();
        let h: Vec<f64> = t.iter().map(|t| (-rate * t).exp()).collect();
        let gamma: Vec<f64> = t.iter().map(|t| (rate + slope) * t).collect();
        let out = odelab::comparison_check(&t, &h, &gamma).unwrap();
        prop_assert!(out.holds());
        prop_assert_eq!(out.first_violation, None);
    }

    #[test]
    fn report_round_trips(amp in 0.05f64..8.0, name_idx in 0usize..5) {
        let names = ["minkowski-m0-u2-A3", "desitter-thm2-A6", "small-data-A0.1", "bigrip", "powerlaw-thm2-t0shift"];
        let s = bundled(names[name_idx]).unwrap().with_override("data0.amplitude", &format!("{amp}")).unwrap();
        let report = hypotheses::evaluate(&s).unwrap();
        let kv = HypothesisReport::from_kv(&report.to_kv()).unwrap();
        prop_assert_eq!(kv.to_kv(), report.to_kv());
        let row = HypothesisReport::from_csv_row(&HypothesisReport::csv_header(), &report.to_csv_row()).unwrap();
        prop_assert_eq!(row.to_csv_row(), report.to_csv_row());
    }
}

fn sample_cloud(count: usize, seed: u64, real: bool) -> Vec<Complex64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let r = 10f64.powf(rng.gen_range(-3.0..1.5));
            if real {
                c(if rng.gen_bool(0.5) { r } else { -r })
            } else {
                Complex64::from_polar(r, rng.gen_range(0.0..2.0 * PI))
            }
        })
        .collect()
}

fn fourier_coeffs(seed: u64) -> Vec<Complex64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..4).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

#[test]
fn laplacian_is_fourth_order() {
    let err = |n: usize| {
        let grid = Grid::new(1, n, PI).unwrap();
        let u = Field::from_fn(grid, |x| c((3.0 * x[0]).sin()));
        let lap = u.laplacian();
        lap.values()
            .iter()
            .zip(u.values())
            .map(|(l, v)| (l + 9.0 * v).norm())
            .fold(0.0, f64::max)
    };
    for n in [32, 64, 128] {
        let ratio = err(n) / err(2 * n);
        assert!((14.0..18.0).contains(&ratio), "N = {n}: ratio {ratio}");
    }
}

#[test]
fn gaussian_norms_converge() {
    let exact_l2 = (PI / 2.0).sqrt();
    let exact_grad = (PI / 2.0).sqrt();
    let measure = |n: usize| {
        let grid = Grid::new(1, n, 8.0).unwrap();
        let u = make_profile(&grid, &ProfileSpec::gaussian(1.0, 1.0)).unwrap();
        (u.l2_norm_sq(), u.grad_norm_sq(), u.inner_re(&u).unwrap())
    };
    let mut prev_err = f64::INFINITY;
    for n in [128, 256, 512, 1024] {
        let (l2, grad, inner) = measure(n);
        assert!((l2 - exact_l2).abs() < 1e-10);
        assert!((inner - l2).abs() < 1e-14);
        let e = (grad - exact_grad).abs();
        assert!(e < prev_err || e < 1e-12, "N = {n}: {e} vs {prev_err}");
        prev_err = e;
    }
    assert!(prev_err < 1e-6);
}
