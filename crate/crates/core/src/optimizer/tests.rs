use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::channel::{sample_scenario, FadingConfig, GeometryConfig};
use crate::linalg::CVector;
use crate::metrics::{effective_channel, sinr_v2v, spectral_efficiency};
use crate::scattering::Architecture;

fn random_channels(n: usize, seed: u64) -> ScenarioChannels {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = || Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
    ScenarioChannels {
        h_d: z(),
        h_t: CVector::from_fn(n, |_, _| z()),
        g_r: CVector::from_fn(n, |_, _| z()),
        f_d: z(),
        f_t: CVector::from_fn(n, |_, _| z()),
        q_d: z(),
        q_r: CVector::from_fn(n, |_, _| z()),
    }
}

fn silence_interference(ch: &mut ScenarioChannels) {
    let n = ch.n();
    ch.f_d = Complex64::new(0.0, 0.0);
    ch.f_t = CVector::zeros(n);
    ch.q_d = Complex64::new(0.0, 0.0);
    ch.q_r = CVector::zeros(n);
}

fn small_budget() -> LinkBudget {
    LinkBudget { p_v: 1.0, p_c: 1.0, sigma2: 0.1, i_max: 0.3 }
}

fn reflective(arch: Architecture, n: usize) -> RisConfig {
    RisConfig::reflective(arch, n).unwrap()
}

#[test]
fn optimal_power_examples() {
    let mut ch = random_channels(1, 0);
    ch.q_r[0] = Complex64::new(0.0, 0.0);
    ch.q_d = Complex64::new(1.0, 0.0);
    let m = random_feasible(&reflective(Architecture::SingleConnected, 1), 0).unwrap();
    let b = LinkBudget { i_max: 0.5, ..small_budget() };
    assert_eq!(optimal_power(&ch, Some(&m), &b, 1.0).unwrap(), 0.5);
    assert_eq!(optimal_power(&ch, Some(&m), &b, 0.25).unwrap(), 0.25);
    ch.q_d = Complex64::new(0.0, 0.0);
    assert_eq!(optimal_power(&ch, Some(&m), &b, 0.8).unwrap(), 0.8);
    assert!(optimal_power(&ch, Some(&m), &b, 0.0).is_err());
}

#[test]
fn optimal_power_respects_cap() {
    let b = LinkBudget::default();
    for seed in 0..200 {
        let ch = sample_scenario(&GeometryConfig::default(), &FadingConfig::default(), 8, seed).unwrap();
        let m = random_feasible(&reflective(Architecture::FullyConnected, 8), seed).unwrap();
        for p_max in [1e-3, 1.0, 1e3] {
            let p = optimal_power(&ch, Some(&m), &b, p_max).unwrap();
            assert!(p <= p_max);
            assert!(cellular_interference(&ch, Some(&m), p).unwrap() <= b.i_max * (1.0 + 1e-12));
        }
    }
}

/// Central differences of `obj` over the real and imaginary part of every
/// entry, combined as `(∂x + j∂y)/2`.
fn finite_difference(obj: &Objective, ch: &ScenarioChannels, m: &ScatteringMatrix, b: &LinkBudget, h: f64) -> CMatrix {
    let n = m.n();
    let eval = |phi: CMatrix| obj.value(ch, Some(&ScatteringMatrix::new(*m.config(), vec![phi]).unwrap()), b).unwrap();
    CMatrix::from_fn(n, n, |i, j| {
        let mut d = [0.0; 2];
        for (k, dir) in [Complex64::new(h, 0.0), Complex64::new(0.0, h)].into_iter().enumerate() {
            let mut plus = m.primary_block().clone();
            let mut minus = plus.clone();
            plus[(i, j)] += dir;
            minus[(i, j)] -= dir;
            d[k] = (eval(plus) - eval(minus)) / (2.0 * h);
        }
        Complex64::new(d[0], d[1]) * 0.5
    })
}

#[test]
fn gradient_matches_finite_differences() {
    let b = small_budget();
    let mut binding = 0;
    for n in [2, 4] {
        let cfg = reflective(Architecture::FullyConnected, n);
        for seed in 0..100 {
            let ch = random_channels(n, 1000 * n as u64 + seed);
            let m = random_feasible(&cfg, seed).unwrap();
            let l = cellular_interference(&ch, Some(&m), 1.0).unwrap();
            if b.i_max / l < 1.0 {
                binding += 1;
            }
            for obj in [Objective::FixedPower(0.6), Objective::CappedPower { p_max: 1.0 }] {
                let g = wirtinger_gradient(&obj, &ch, &m, &b).unwrap();
                let fd = finite_difference(&obj, &ch, &m, &b, 1e-6);
                let rel = (&g - &fd).norm() / g.norm();
                assert!(rel <= 1e-5, "n={n} seed={seed} {obj:?}: relative error {rel:e}");
            }
        }
    }
    assert!(binding > 20 && binding < 180, "cap binding on {binding} of 200 instances");
}

#[test]
fn zero_outgoing_channel_gives_zero_gradient() {
    let mut ch = random_channels(4, 2);
    ch.g_r = CVector::zeros(4);
    ch.q_r = CVector::zeros(4);
    let m = random_feasible(&reflective(Architecture::FullyConnected, 4), 1).unwrap();
    for obj in [Objective::FixedPower(1.0), Objective::CappedPower { p_max: 1.0 }] {
        assert_eq!(wirtinger_gradient(&obj, &ch, &m, &small_budget()).unwrap().norm(), 0.0);
    }
}

#[test]
fn tangent_projection_is_idempotent_and_masked() {
    let ch = random_channels(6, 3);
    let b = small_budget();
    for arch in [Architecture::SingleConnected, Architecture::GroupConnected { groups: 3 }, Architecture::FullyConnected] {
        let cfg = reflective(arch, 6);
        let m = random_feasible(&cfg, 4).unwrap();
        let g = wirtinger_gradient(&Objective::FixedPower(1.0), &ch, &m, &b).unwrap();
        let r = tangent_project(&m, &[g]);
        let rr = tangent_project(&m, &r);
        assert!((&rr[0] - &r[0]).norm() < 1e-13 * r[0].norm());
        for i in 0..6 {
            for j in 0..6 {
                if !cfg.in_pattern(i, j) {
                    assert_eq!(r[0][(i, j)], Complex64::new(0.0, 0.0));
                }
            }
        }
    }
}

#[test]
fn alignment_gain_chain_over_random_draws() {
    let gain = |ch: &ScenarioChannels, arch| {
        let m = closed_form_align(ch, &reflective(arch, 8)).unwrap();
        effective_channel(ch.h_d, &ch.h_t, &ch.g_r, m.primary_block()).unwrap().norm()
    };
    for seed in 0..1000 {
        let ch = random_channels(8, seed);
        let single = gain(&ch, Architecture::SingleConnected);
        let group = gain(&ch, Architecture::GroupConnected { groups: 2 });
        let fully = gain(&ch, Architecture::FullyConnected);
        assert!(fully >= group * (1.0 - 1e-12) && group >= single * (1.0 - 1e-12), "seed {seed}");
        let ideal = ch.h_d.norm() + ch.g_r.norm() * ch.h_t.norm();
        assert!((fully - ideal).abs() < 1e-12 * ideal);
    }
}

#[test]
fn no_surface_baseline_is_closed_form() {
    let ch = random_channels(3, 9);
    let b = small_budget();
    let r = power_only(&ch, &b, 1.0).unwrap();
    let p = (b.i_max / ch.q_d.norm_sqr()).min(1.0);
    assert_eq!(r.p_v_opt, p);
    assert_eq!(r.se, spectral_efficiency(sinr_v2v(&ch, None, &b.with_power(p)).unwrap()));
    assert!(r.matrix_opt.is_none() && r.converged && r.trace == vec![r.se]);
}

#[test]
fn alternating_results_are_monotone_and_feasible() {
    let b = LinkBudget::default();
    let settings = OptimizerSettings::default();
    for seed in 0..10 {
        let ch = sample_scenario(&GeometryConfig::default(), &FadingConfig::default(), 16, seed).unwrap();
        for arch in [Architecture::SingleConnected, Architecture::GroupConnected { groups: 4 }, Architecture::FullyConnected] {
            let r = alternating_optimize(&ch, &reflective(arch, 16), &b, b.p_v, &settings).unwrap();
            assert!(r.trace.windows(2).all(|w| w[1] >= w[0]), "{arch} seed {seed}");
            assert_eq!(r.se, *r.trace.last().unwrap());
            assert_eq!(r.trace.len(), r.iterations + 1);
            assert!(r.converged);
            let m = r.matrix_opt.as_ref().unwrap();
            assert!(m.validate(1e-10).passed);
            assert!(cellular_interference(&ch, Some(m), r.p_v_opt).unwrap() <= b.i_max * (1.0 + 1e-12));
            let achieved = spectral_efficiency(sinr_v2v(&ch, Some(m), &b.with_power(r.p_v_opt)).unwrap());
            assert_eq!(achieved, r.se);
        }
    }
}

#[test]
fn converged_solutions_are_stationary() {
    let b = LinkBudget::default();
    let settings = OptimizerSettings::default();
    for seed in 0..10 {
        let ch = sample_scenario(&GeometryConfig::default(), &FadingConfig::default(), 16, 40 + seed).unwrap();
        for arch in [Architecture::SingleConnected, Architecture::FullyConnected] {
            let r = alternating_optimize(&ch, &reflective(arch, 16), &b, b.p_v, &settings).unwrap();
            let obj = Objective::CappedPower { p_max: b.p_v };
            let g = riemannian_gradient_norm(&obj, &ch, r.matrix_opt.as_ref().unwrap(), &b).unwrap();
            assert!(g <= 1e-4, "{arch} seed {seed}: gradient norm {g:e}");
        }
    }
}

#[test]
fn aligned_optimum_is_kept_without_interference() {
    let b = small_budget();
    for seed in 0..20 {
        let mut ch = random_channels(4, 300 + seed);
        silence_interference(&mut ch);
        for arch in [Architecture::SingleConnected, Architecture::GroupConnected { groups: 2 }, Architecture::FullyConnected] {
            let cfg = reflective(arch, 4);
            let start = Objective::CappedPower { p_max: 1.0 }.value(&ch, Some(&closed_form_align(&ch, &cfg).unwrap()), &b).unwrap();
            let r = alternating_optimize(&ch, &cfg, &b, 1.0, &OptimizerSettings::default()).unwrap();
            assert!((r.se - start).abs() < 1e-9);
        }
    }
}

#[test]
fn phase_rotations_leave_optimum_unchanged() {
    let b = small_budget();
    let settings = OptimizerSettings::default();
    let rot = |v: &CVector, t: f64| v * Complex64::from_polar(1.0, t);
    for seed in 0..10 {
        let base = random_channels(4, 700 + seed);
        for arch in [Architecture::SingleConnected, Architecture::FullyConnected] {
            let cfg = reflective(arch, 4);

            let mut quiet = base.clone();
            silence_interference(&mut quiet);
            let mut turned = quiet.clone();
            turned.h_t = rot(&quiet.h_t, 0.7);
            turned.g_r = rot(&quiet.g_r, -2.1);
            let a = alternating_optimize(&quiet, &cfg, &b, 1.0, &settings).unwrap().se;
            let c = alternating_optimize(&turned, &cfg, &b, 1.0, &settings).unwrap().se;
            assert!((a - c).abs() < 1e-9, "{arch} seed {seed}");

            let mut turned = base.clone();
            for v in [&mut turned.h_t, &mut turned.g_r, &mut turned.f_t, &mut turned.q_r] {
                *v = rot(v, 1.3);
            }
            let a = alternating_optimize(&base, &cfg, &b, 1.0, &settings).unwrap().se;
            let c = alternating_optimize(&turned, &cfg, &b, 1.0, &settings).unwrap().se;
            // Rounding can move the stopping point along the power-cap switch.
            assert!((a - c).abs() < 10.0 * settings.tol_delta_se, "{arch} seed {seed}: {a} vs {c}");
        }
    }
}

#[test]
fn warm_started_architectures_dominate() {
    let b = LinkBudget::default();
    let settings = OptimizerSettings::default();
    for seed in 0..10 {
        let ch = sample_scenario(&GeometryConfig::default(), &FadingConfig::default(), 16, 90 + seed).unwrap();
        let none = power_only(&ch, &b, b.p_v).unwrap();
        let single = alternating_optimize(&ch, &reflective(Architecture::SingleConnected, 16), &b, b.p_v, &settings).unwrap();
        let warm = [single.matrix_opt.clone().unwrap()];
        let group = alternating_optimize_from(&ch, &reflective(Architecture::GroupConnected { groups: 4 }, 16), &b, b.p_v, &settings, &warm)
            .unwrap();
        let warm = [group.matrix_opt.clone().unwrap()];
        let fully = alternating_optimize_from(&ch, &reflective(Architecture::FullyConnected, 16), &b, b.p_v, &settings, &warm).unwrap();
        assert!(fully.se >= group.se && group.se >= single.se && single.se >= none.se, "seed {seed}");
    }
}

#[test]
fn warm_start_must_fit_the_target_pattern() {
    let ch = random_channels(4, 1);
    let fully = random_feasible(&reflective(Architecture::FullyConnected, 4), 0).unwrap();
    let r = alternating_optimize_from(&ch, &reflective(Architecture::SingleConnected, 4), &small_budget(), 1.0, &OptimizerSettings::default(), &[fully]);
    assert!(matches!(r, Err(OptimizeError::Scattering(ScatteringError::PatternMismatch { .. }))));
}

#[test]
fn agrees_with_oracle_on_small_instances() {
    let b = LinkBudget { p_v: 1.0, p_c: 1.0, sigma2: 1.0, i_max: 0.5 };
    for seed in 0..4 {
        let ch = random_channels(2, 900 + seed);
        for arch in [Architecture::SingleConnected, Architecture::FullyConnected] {
            let cfg = reflective(arch, 2);
            let points = if arch == Architecture::FullyConnected { 64 } else { 256 };
            let oracle = brute_force_oracle(&ch, &cfg, &b, 1.0, points).unwrap();
            let r = alternating_optimize(&ch, &cfg, &b, 1.0, &OptimizerSettings::default()).unwrap();
            assert!(r.se >= oracle.se - 1e-2, "{arch} seed {seed}: {} vs oracle {}", r.se, oracle.se);
        }
    }
}

#[test]
fn settings_validation() {
    assert!(OptimizerSettings::default().validate().is_ok());
    for bad in [
        OptimizerSettings { backtrack_factor: 1.0, ..Default::default() },
        OptimizerSettings { step_init: 0.0, ..Default::default() },
        OptimizerSettings { max_outer_iters: 0, ..Default::default() },
        OptimizerSettings { tol_delta_se: -1.0, ..Default::default() },
    ] {
        assert!(matches!(bad.validate(), Err(OptimizeError::InvalidSettings(_))));
    }
}

#[test]
fn stacked_modes_are_rejected() {
    let ch = random_channels(2, 0);
    let cfg = RisConfig::new(Architecture::FullyConnected, Mode::Hybrid, 2).unwrap();
    let r = alternating_optimize(&ch, &cfg, &small_budget(), 1.0, &OptimizerSettings::default());
    assert_eq!(r, Err(OptimizeError::UnsupportedMode(Mode::Hybrid)));
}

#[test]
fn capped_restarts_only_run_when_the_cap_is_active() {
    let plain = OptimizerSettings { capped_restarts: 0, ..OptimizerSettings::default() };
    let extra = OptimizerSettings::default();

    let b = LinkBudget::default();
    let ch = sample_scenario(&GeometryConfig::default(), &FadingConfig::default(), 8, 5).unwrap();
    let cfg = reflective(Architecture::FullyConnected, 8);
    let r = alternating_optimize(&ch, &cfg, &b, b.p_v, &plain).unwrap();
    assert!(!cap_active(&ch, &r, &b, b.p_v).unwrap());
    assert_eq!(r, alternating_optimize(&ch, &cfg, &b, b.p_v, &extra).unwrap());

    let b = small_budget();
    let mut active = 0;
    for seed in 0..20 {
        let ch = random_channels(3, 900 + seed);
        let cfg = reflective(Architecture::SingleConnected, 3);
        let r0 = alternating_optimize(&ch, &cfg, &b, 1.0, &plain).unwrap();
        let r1 = alternating_optimize(&ch, &cfg, &b, 1.0, &extra).unwrap();
        assert!(r1.se >= r0.se);
        if cap_active(&ch, &r0, &b, 1.0).unwrap() {
            active += 1;
        } else {
            assert_eq!(r0, r1);
        }
    }
    assert!(active > 0);
}
