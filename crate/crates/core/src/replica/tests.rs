use super::*;
use crate::model::{assign_species, sample_disorder, ModelSpec, SpinAssignment};
use crate::rng::StreamKey;
use crate::stats::mean_se;

fn draw_from(n: usize, combined: Vec<f64>, species: Vec<Vec<f64>>) -> OverlapDraw {
    OverlapDraw::new(n, combined, species, 1.0)
}

fn constant_sample(n: usize, off: f64) -> OverlapSample {
    let a: Vec<f64> = (0..n * n).map(|k| if k / n == k % n { 1.0 } else { off }).collect();
    let d = draw_from(n, a.clone(), vec![a]);
    OverlapSample::new(vec!["a".into()], vec![1.0], vec![d]).unwrap()
}

#[test]
fn weighted_overlap_examples() {
    let ra = vec![1.0, 0.4, 0.4, 1.0];
    let rb = vec![1.0, 0.2, 0.2, 1.0];
    let r: Vec<f64> = ra.iter().zip(&rb).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
    let s = OverlapSample::new(vec!["a".into(), "b".into()], vec![0.5, 0.5], vec![draw_from(2, r, vec![ra, rb])])
        .unwrap();
    assert_eq!(weighted_overlap(&s, 0, &[1.0, 0.0], 0, 1).unwrap(), 0.2);
    assert_eq!(weighted_overlap(&s, 0, &[0.0, 0.0], 0, 1).unwrap(), 0.0);
    assert_eq!(weighted_overlap(&s, 0, &[1.0, 1.0], 0, 1).unwrap(), s.draws()[0].r(0, 1));
    assert!(weighted_overlap(&s, 0, &[1.0], 0, 1).is_err());
    assert!(weighted_overlap(&s, 0, &[1.5, 0.0], 0, 1).is_err());
    assert!(weighted_overlap(&s, 3, &[1.0, 0.0], 0, 1).is_err());
}

#[test]
fn asymmetric_arrays_are_rejected() {
    let a = vec![1.0, 0.3, 0.2, 1.0];
    let d = draw_from(2, a.clone(), vec![a]);
    assert!(OverlapSample::new(vec!["a".into()], vec![1.0], vec![d]).is_err());
}

#[test]
fn perturbation_spec_validation() {
    let mut p = PerturbationSpec::new(2, 2, 0.3);
    assert!(p.validate(2).is_ok());
    assert_eq!(p.weights.len(), 5);
    assert!(p.validate(3).is_err());
    p.gamma = 0.25;
    assert!(p.validate(2).is_err());
    p.gamma = 0.3;
    p.p_max = 4;
    assert!(p.validate(2).is_err());
    p.p_max = 2;
    p.x = Some(vec![vec![0.5, 1.0]; 5]);
    assert!(p.validate(2).is_err());
    let x = PerturbationSpec::new(2, 3, 0.3).coefficients(4);
    assert!(x.iter().flatten().all(|v| (1.0..=2.0).contains(v)));
    assert!(p.variance_bound(&x) <= 4.0);
}

#[test]
fn zero_coefficients_vanish() {
    let mut p = PerturbationSpec::new(1, 3, 0.3);
    p.x = Some(vec![vec![0.0; 3]; p.weights.len()]);
    let a = SpinAssignment::from_counts(&[6]).unwrap();
    let s = [1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
    assert_eq!(perturbation_hamiltonian(&p, &a, &s, 3).unwrap(), 0.0);
}

fn perturbation_covariance(p_order: usize) -> (f64, f64) {
    let n = 8;
    let spec = PerturbationSpec { weights: vec![vec![1.0]], p_max: p_order, x: None, gamma: 0.3 };
    let mut coeffs = vec![vec![0.0; p_order]];
    coeffs[0][p_order - 1] = 1.0;
    let c = 2f64.powi(-1 - p_order as i32);
    let a = SpinAssignment::from_counts(&[n]).unwrap();
    let s1 = vec![1.0; n];
    let mut s2 = s1.clone();
    s2[3] = -1.0;
    let key = StreamKey::new(77).derive("cov");
    let prods: Vec<f64> = (0..10_000)
        .map(|k| {
            let h = perturbation_polynomial(&spec, &coeffs, &a, &key, k).unwrap();
            h.energy(&s1) * h.energy(&s2) / (c * c)
        })
        .collect();
    (mean_se(&prods).mean, 0.75f64.powi(p_order as i32))
}

#[test]
fn perturbation_covariance_is_overlap_power() {
    for p in [1, 2] {
        let (got, want) = perturbation_covariance(p);
        assert!((got - want).abs() <= 0.05 * want, "p = {p}: {got} vs {want}");
    }
}

#[test]
fn two_spin_gibbs_matches_hand_weights() {
    let m = ModelSpec::single(1.0).unwrap();
    let a = assign_species(&m, 2).unwrap();
    let g = sample_disorder(&m, &a, 5).unwrap();
    let probs = gibbs_probabilities(&g.to_polynomial()).unwrap();
    let s2 = 2f64.sqrt();
    let energy = |x: f64, y: f64| {
        (g.get(0, 0) + g.get(1, 1) + (g.get(0, 1) + g.get(1, 0)) * x * y) / s2
    };
    // code bit i set means spin i is -1
    let states = [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)];
    let w: Vec<f64> = states.iter().map(|&(x, y)| energy(x, y).exp()).collect();
    let z: f64 = w.iter().sum();
    for (p, wi) in probs.iter().zip(&w) {
        assert!((p - wi / z).abs() < 1e-12);
    }
}

#[test]
fn null_model_replicas_are_uniform() {
    let m = ModelSpec::new(vec!["a", "b"], vec![0.5, 0.5], vec![vec![0.0; 2]; 2]).unwrap();
    let cfg = GibbsConfig { replicas: 2, draws: 4000, seed: 3, perturbation: None };
    let s = gibbs_replica_samples(&m, 8, &cfg).unwrap();
    for sp in [None, Some(0), Some(1)] {
        let r: Vec<f64> = s.draws().iter().map(|d| d.entry(sp, 0, 1)).collect();
        assert!(mean_se(&r).within(0.0, 3.0));
    }
    let d = &s.draws()[0];
    assert_eq!(d.r(0, 0), 1.0);
    let lam = s.lambda();
    for d in s.draws() {
        assert!((d.r(0, 1) - (lam[0] * d.rs(0, 0, 1) + lam[1] * d.rs(1, 0, 1))).abs() < 1e-12);
    }
}

#[test]
fn gibbs_samples_are_deterministic() {
    let m = ModelSpec::new(vec!["a", "b"], vec![0.5, 0.5], vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
    let cfg = GibbsConfig { replicas: 3, draws: 20, seed: 9, perturbation: Some(PerturbationSpec::new(2, 2, 0.3)) };
    let a = gibbs_replica_samples(&m, 6, &cfg).unwrap();
    let b = gibbs_replica_samples(&m, 6, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(gibbs_replica_samples(&m, 30, &cfg).is_err());
}

#[test]
fn gg_constant_function_cancels() {
    let m = ModelSpec::new(vec!["a", "b"], vec![0.5, 0.5], vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
    let cfg = GibbsConfig { replicas: 3, draws: 50, seed: 2, perturbation: None };
    let s = gibbs_replica_samples(&m, 6, &cfg).unwrap();
    for p in [1, 2] {
        let d = gg_delta(&s, &TestFunction::Constant { value: 1.0 }, 2, &[1.0, 1.0], p).unwrap();
        assert!(d.value < 1e-12, "{d:?}");
    }
    assert!(gg_delta(&s, &TestFunction::Constant { value: 1.0 }, 3, &[1.0, 1.0], 1).is_err());
}

#[test]
fn gg_is_exchangeable() {
    let m = ModelSpec::new(vec!["a", "b"], vec![0.5, 0.5], vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
    let cfg = GibbsConfig { replicas: 4, draws: 40, seed: 6, perturbation: None };
    let s = gibbs_replica_samples(&m, 6, &cfg).unwrap();
    let perm = [2, 0, 3, 1];
    let t = OverlapSample::new(
        s.species().to_vec(),
        s.lambda().to_vec(),
        s.draws().iter().map(|d| d.permuted(&perm)).collect(),
    )
    .unwrap();
    let f = TestFunction::indicator(median_overlap(&s));
    for func in [f, TestFunction::degree_two(3)] {
        let a = gg_delta(&s, &func, 3, &[1.0, 0.5], 2).unwrap();
        let b = gg_delta(&t, &func, 3, &[1.0, 0.5], 2).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
    }
}

/// Under the uniform measure `R_13` is independent of `f(R_12)` and centered,
/// so `Δ = ½ E[R_12; R_12 ≥ t]`, which the binomial law gives exactly. It
/// vanishes only as `N → ∞`.
#[test]
fn null_gibbs_gg_matches_binomial_value() {
    let m = ModelSpec::single(0.0).unwrap();
    let mut last = f64::INFINITY;
    for n in [4usize, 12] {
        let cfg = GibbsConfig { replicas: 3, draws: 3000, seed: 1, perturbation: None };
        let s = gibbs_replica_samples(&m, n, &cfg).unwrap();
        let t = median_overlap(&s);
        let d = gg_delta(&s, &TestFunction::indicator(t), 2, &[1.0], 1).unwrap();
        let mut exact = 0.0;
        let mut binom = 1.0;
        for k in 0..=n {
            let r = (n as f64 - 2.0 * k as f64) / n as f64;
            if r >= t {
                exact += r * binom / 2f64.powi(n as i32);
            }
            binom = binom * (n - k) as f64 / (k + 1) as f64;
        }
        let exact = exact / 2.0;
        assert!((d.value - exact).abs() <= 3.0 * d.se, "N = {n}: {d:?} vs {exact}");
        assert!(exact < last);
        last = exact;
    }
}

#[test]
fn ultrametricity_examples() {
    let a = vec![1.0, 0.9, 0.9, 0.9, 1.0, 0.1, 0.9, 0.1, 1.0];
    let s = OverlapSample::new(vec!["a".into()], vec![1.0], vec![draw_from(3, a.clone(), vec![a])]).unwrap();
    let u = ultrametricity_violation(&s, 1e-9).unwrap();
    assert!((u.max_violation - 0.8).abs() < 1e-12);
    assert!(u.violating_fraction > 0.0);
    let u = ultrametricity_violation(&constant_sample(4, 0.3), 0.0).unwrap();
    assert_eq!(u.max_violation, 0.0);
    assert!(ultrametricity_violation(&constant_sample(2, 0.3), 0.0).is_err());
}

#[test]
fn synchronization_on_lipschitz_map() {
    let lambda = [0.3, 0.7];
    let l = |q: f64, s: usize| (q / lambda[s]).min(1.0);
    let draws: Vec<OverlapDraw> = (0..40)
        .map(|k| {
            let q = k as f64 / 40.0;
            let comb = vec![1.0, q, q, 1.0];
            let sp = (0..2).map(|s| vec![1.0, l(q, s), l(q, s), 1.0]).collect();
            draw_from(2, comb, sp)
        })
        .collect();
    let s = OverlapSample::new(vec!["a".into(), "b".into()], lambda.to_vec(), draws).unwrap();
    let fit = fit_synchronization(&s).unwrap();
    for (k, f) in fit.species.iter().enumerate() {
        assert!(f.max_residual <= 1e-12);
        assert!(f.lipschitz <= 1.0 / lambda[k] + 1e-9);
        assert!(f.lipschitz > 0.9 / lambda[k]);
        for &(x, y) in &f.knots {
            assert!((y - l(x, k)).abs() < 1e-12);
        }
    }
}

#[test]
fn synchronization_pools_violators() {
    let draws: Vec<OverlapDraw> = [(0.1, 0.5), (0.2, 0.3), (0.3, 0.9)]
        .iter()
        .map(|&(q, y)| draw_from(2, vec![1.0, q, q, 1.0], vec![vec![1.0, y, y, 1.0]]))
        .collect();
    let s = OverlapSample::new(vec!["a".into()], vec![1.0], draws).unwrap();
    let f = &fit_synchronization(&s).unwrap().species[0];
    assert!((f.knots[0].1 - 0.4).abs() < 1e-12 && (f.knots[1].1 - 0.4).abs() < 1e-12);
    assert!((f.max_residual - 0.1).abs() < 1e-12);
    let c = fit_synchronization(&constant_sample(2, 0.3)).unwrap();
    assert_eq!(c.species[0].lipschitz, 0.0);
}

#[test]
fn law_distance_basics() {
    let a = constant_sample(2, 0.3);
    assert_eq!(overlap_law_distance(&a, &a).unwrap(), 0.0);
    assert_eq!(overlap_law_distance(&a, &constant_sample(2, 0.5)).unwrap(), 1.0);
}

mod props {
    use super::*;
    use proptest::prelude::*;

    fn arb_sample() -> impl Strategy<Value = OverlapSample> {
        // Symmetric arrays with unit diagonal from random vectors in [-1, 1].
        proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 6), 3..8).prop_map(|rows| {
            let draws = rows
                .into_iter()
                .map(|v| {
                    let mut a = vec![1.0; 16];
                    let mut k = 0;
                    for l in 0..4 {
                        for lp in (l + 1)..4 {
                            a[l * 4 + lp] = v[k];
                            a[lp * 4 + l] = v[k];
                            k += 1;
                        }
                    }
                    draw_from(4, a.clone(), vec![a])
                })
                .collect();
            OverlapSample::new(vec!["a".into()], vec![1.0], draws).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn constant_test_function_has_zero_delta(s in arb_sample(), p in 1u32..3) {
            let d = gg_delta(&s, &TestFunction::Constant { value: 1.0 }, 3, &[1.0], p).unwrap();
            prop_assert!(d.value < 1e-12);
        }

        #[test]
        fn delta_is_invariant_under_replica_relabelling(s in arb_sample(), t in -1.0f64..1.0) {
            let perm = [2, 0, 3, 1];
            let draws = s.draws().iter().map(|d| d.permuted(&perm)).collect();
            let q = OverlapSample::new(s.species().to_vec(), s.lambda().to_vec(), draws).unwrap();
            let f = TestFunction::indicator(t);
            let a = gg_delta(&s, &f, 3, &[1.0], 1).unwrap();
            let b = gg_delta(&q, &f, 3, &[1.0], 1).unwrap();
            prop_assert!((a.value - b.value).abs() < 1e-12);
        }

        #[test]
        fn isotonic_fit_is_monotone(s in arb_sample()) {
            let fit = fit_synchronization(&s).unwrap();
            for k in fit.species[0].knots.windows(2) {
                prop_assert!(k[1].1 >= k[0].1 - 1e-12);
            }
        }
    }
}
