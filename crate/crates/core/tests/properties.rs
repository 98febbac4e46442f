use kdsim_core::diffraction::{
    averaged_distribution, inm_quadrature, AveragingMethod, DiffractionParams, MomentumGrid,
};
use kdsim_core::experiment::{tau_estimate, BeamScenario, SODIUM_MASS};
use kdsim_core::randtime::{average_density, DensityMatrix, EnergySpectrum, GammaTimeLaw};
use kdsim_core::specfun::{bessel_j, bessel_j_all, gamma_p, gamma_sample, integrate_weighted, ln_gamma};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn density(dim: usize, raw: &[f64]) -> DensityMatrix {
    let a = DMatrix::from_fn(dim, dim, |i, j| {
        let k = 2 * (i * dim + j);
        Complex64::new(raw[k], raw[k + 1])
    });
    let mut rho = &a * a.adjoint();
    let tr = rho.trace();
    rho /= tr;
    DensityMatrix::new(rho).unwrap()
}

fn state_strategy() -> impl Strategy<Value = (DensityMatrix, EnergySpectrum)> {
    (2usize..=6).prop_flat_map(|d| {
        (
            prop::collection::vec(-1.0f64..1.0, 2 * d * d),
            prop::collection::vec(-5.0f64..5.0, d),
        )
            .prop_filter_map("degenerate matrix", move |(raw, levels)| {
                if raw.iter().map(|x| x * x).sum::<f64>() < 1e-3 {
                    return None;
                }
                Some((density(d, &raw), EnergySpectrum::new(levels).ok()?))
            })
    })
}

proptest! {
    #[test]
    fn bessel_reflection(n in 0i32..=10, x in 0.0f64..50.0) {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let d = bessel_j(-n, x).unwrap() - sign * bessel_j(n, x).unwrap();
        prop_assert!(d.abs() < 1e-13);
    }

    #[test]
    fn bessel_normalization(x in 0.0f64..20.0) {
        let n = (x + 30.0) as usize;
        let j = bessel_j_all(n, x).unwrap();
        let s = j[0] * j[0] + 2.0 * j[1..].iter().map(|v| v * v).sum::<f64>();
        prop_assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ln_gamma_recurrence(x in 0.1f64..100.0) {
        let d = ln_gamma(x + 1.0).unwrap() - ln_gamma(x).unwrap() - x.ln();
        prop_assert!(d.abs() < 1e-12, "x = {x}, defect {d:e}");
    }

    #[test]
    fn weighted_polynomials_exact(
        coeffs in prop::collection::vec(-1.0f64..1.0, 1..=11),
        alpha in -0.9f64..5.0,
    ) {
        let f = |s: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c);
        let moment = |k: usize| ln_gamma(alpha + k as f64 + 1.0).unwrap().exp();
        let want: f64 = coeffs.iter().enumerate().map(|(k, c)| c * moment(k)).sum();
        let scale: f64 = coeffs.iter().enumerate().map(|(k, c)| c.abs() * moment(k)).sum();
        let got = integrate_weighted(f, alpha, 1e30, 1e-12 * scale).unwrap();
        prop_assert!((got.value - want).abs() <= 1e-10 * scale, "{} vs {want}", got.value);
    }

    #[test]
    fn weighted_linearity(a in -3.0f64..3.0, b in -3.0f64..3.0, alpha in -0.5f64..4.0) {
        let f = |s: f64| s.cos();
        let g = |s: f64| (-0.5 * s).exp();
        let tol = 1e-13;
        let i = |h: &dyn Fn(f64) -> f64, bound| integrate_weighted(h, alpha, bound, tol).unwrap().value;
        let lhs = i(&|s| a * f(s) + b * g(s), a.abs() + b.abs());
        let rhs = a * i(&f, 1.0) + b * i(&g, 1.0);
        prop_assert!((lhs - rhs).abs() < 1e-11);
    }

    #[test]
    fn gamma_sample_reproducible(seed in any::<u64>(), shape in 0.05f64..20.0) {
        let draw = |s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            (0..32).map(|_| gamma_sample(&mut rng, shape, 1.5).unwrap()).collect::<Vec<_>>()
        };
        prop_assert_eq!(draw(seed), draw(seed));
    }

    #[test]
    fn averaged_state_invariants(
        (rho0, spectrum) in state_strategy(),
        tau in 0.01f64..3.0,
        t in 0.0f64..20.0,
    ) {
        let law = GammaTimeLaw::new(tau).unwrap();
        let rho = average_density(&rho0, &spectrum, t, &law).unwrap();
        prop_assert!((rho.trace() - 1.0).norm() < 1e-12);
        prop_assert!(rho.hermiticity_defect() < 1e-12);
        prop_assert!(rho.min_eigenvalue() >= -1e-10);
    }

    #[test]
    fn dephasing_is_monotone(
        (rho0, spectrum) in state_strategy(),
        tau in 0.01f64..3.0,
        t1 in 0.0f64..10.0,
        dt in 0.0f64..10.0,
    ) {
        let law = GammaTimeLaw::new(tau).unwrap();
        let a = average_density(&rho0, &spectrum, t1, &law).unwrap();
        let b = average_density(&rho0, &spectrum, t1 + dt, &law).unwrap();
        for n in 0..rho0.dim() {
            for m in 0..rho0.dim() {
                prop_assert!(b.get(n, m).norm() <= a.get(n, m).norm() * (1.0 + 1e-14) + 1e-300);
            }
        }
    }

    #[test]
    fn short_tau_is_unitary_to_first_order(
        (rho0, spectrum) in state_strategy(),
        t in 0.2f64..2.0,
    ) {
        let deviation = |tau: f64| {
            let rho = average_density(&rho0, &spectrum, t, &GammaTimeLaw::new(tau).unwrap()).unwrap();
            let mut worst = 0.0f64;
            for n in 0..rho0.dim() {
                for m in 0..rho0.dim() {
                    let omega = spectrum.transition(n, m);
                    let unitary = Complex64::new(0.0, -omega * t).exp() * rho0.get(n, m);
                    worst = worst.max((rho.get(n, m) - unitary).norm());
                }
            }
            worst
        };
        let (d1, d2) = (deviation(1e-4), deviation(5e-5));
        prop_assume!(d1 > 1e-12);
        let ratio = d1 / d2;
        prop_assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio}");
        // first-order coefficient is at most max ω² t / 2
        prop_assert!(d1 / 1e-4 <= 0.5 * 100.0 * t * 1.01);
    }

    #[test]
    fn time_law_concentrates(t in 0.01f64..100.0) {
        let tau = 1e-3 * t;
        let law = GammaTimeLaw::new(tau).unwrap();
        let half = 5.0 * (tau * t).sqrt();
        let shape = law.shape(t);
        let mass = gamma_p(shape, (t + half) / tau).unwrap() - gamma_p(shape, (t - half) / tau).unwrap();
        prop_assert!(mass > 1.0 - 1e-6, "mass {mass}");
    }

    #[test]
    fn tau_bounds_single_terms(
        eps_z in 1e-9f64..1e-6,
        spread in 0.0f64..1e-2,
        t_int in 1e-10f64..1e-6,
        v in 10.0f64..2000.0,
    ) {
        let beam = BeamScenario {
            mass: SODIUM_MASS,
            mean_p_z: SODIUM_MASS * v,
            eps_z,
            class_spread: spread * SODIUM_MASS * v,
            t_int,
            rabi: 1e11,
            detuning: 2e12,
        };
        let est = tau_estimate(&beam).unwrap();
        for term in [est.packet_width, est.schrodinger_spread, est.classical_spread] {
            prop_assert!(est.tau >= term.sqrt() / v * (1.0 - 1e-12));
        }
        let longer = BeamScenario { t_int: 2.0 * t_int, ..beam };
        prop_assert!(tau_estimate(&longer).unwrap().tau >= est.tau);
        let wider = BeamScenario { class_spread: 2.0 * beam.class_spread, ..beam };
        prop_assert!(tau_estimate(&wider).unwrap().tau >= est.tau);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn inm_bounded(n in -8i64..=8, m in -8i64..=8, t in 0.1f64..20.0, cal_t in 0.05f64..10.0) {
        let v = inm_quadrature(n, m, t, cal_t, 1e-11).unwrap();
        prop_assert!(v.value.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn averaged_distribution_shape(t in 0.5f64..12.0, cal_t in 0.05f64..10.0, eps in 1.5f64..20.0) {
        let params = DiffractionParams::new(t, cal_t, eps).unwrap();
        let grid = MomentumGrid::symmetric(6.0, 0.05).unwrap();
        let method = AveragingMethod::default();
        let w = averaged_distribution(&grid, &params, &method).unwrap();
        let vals = w.values();
        let k = vals.len();
        for i in 0..k {
            prop_assert!(vals[i] >= -1e-10);
            prop_assert!((vals[i] - vals[k - 1 - i]).abs() < 1e-12);
        }
        let doubled = params.with_n_max(2 * params.n_max()).unwrap();
        let w2 = averaged_distribution(&grid, &doubled, &method).unwrap();
        let diff = vals.iter().zip(w2.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-10, "truncation change {diff:e}");
    }
}
