use super::*;
use proptest::prelude::*;

const LN2: f64 = std::f64::consts::LN_2;

fn reference_model() -> ModelSpec {
    ModelSpec::new(vec!["a", "b"], vec![0.5, 0.5], vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap()
}

fn reference_params() -> RsbParams {
    RsbParams::new(vec![0.4, 0.8], vec![vec![0.0, 0.3, 1.0], vec![0.0, 0.5, 1.0]]).unwrap()
}

/// Trapezoid rule against the normal density on a fine grid.
fn fine_expectation(f: impl Fn(f64) -> f64) -> f64 {
    let h = 1e-3;
    let n = 24_000;
    let norm = (2.0 * std::f64::consts::PI).sqrt();
    (0..=n)
        .map(|i| {
            let z = -12.0 + h * i as f64;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * f(z) * (-0.5 * z * z).exp() / norm
        })
        .sum::<f64>()
        * h
}

#[test]
fn path_sequence_examples() {
    let m = ModelSpec::new(vec!["a", "b"], vec![0.5, 0.5], vec![vec![0.0; 2]; 2]).unwrap();
    let p = path_sequences(&m, &RsbParams::uniform(vec![0.5], vec![0.0, 1.0], 2).unwrap()).unwrap();
    assert!(p.combined.iter().chain(p.species.iter().flatten()).all(|&v| v == 0.0));

    let m = ModelSpec::single(1.0).unwrap();
    let p = path_sequences(&m, &RsbParams::uniform(vec![0.5], vec![0.0, 1.0], 1).unwrap()).unwrap();
    assert_eq!(p.combined, vec![0.0, 1.0]);
    assert_eq!(p.species, vec![vec![0.0, 2.0]]);

    let m = ModelSpec::new(vec!["a", "b"], vec![0.5, 0.5], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let p = path_sequences(&m, &RsbParams::uniform(vec![0.5], vec![0.0, 1.0], 2).unwrap()).unwrap();
    assert_eq!(p.combined[1], 0.5);
    assert_eq!(p.species[0][1], 1.0);
    assert_eq!(p.species[1][1], 1.0);

    let p = path_sequences(&reference_model(), &reference_params()).unwrap();
    let want = [[0.0, 0.55, 1.5], [0.0, 0.65, 1.5]];
    for s in 0..2 {
        for l in 0..3 {
            assert!((p.species[s][l] - want[s][l]).abs() < 1e-15);
        }
    }
    assert!((p.combined[1] - 0.1225).abs() < 1e-15);
    assert!((p.combined[2] - 0.75).abs() < 1e-15);
    assert!((p.half_zeta_increment_sum(&[0.4, 0.8]) - 0.2755).abs() < 1e-15);
    assert!(path_sequences(&reference_model(), &RsbParams::uniform(vec![0.5], vec![0.0, 1.0], 1).unwrap()).is_err());
}

#[test]
fn null_model_gives_log_two() {
    let m = ModelSpec::new(vec!["a", "b"], vec![0.3, 0.7], vec![vec![0.0; 2]; 2]).unwrap();
    for quad in [QuadratureConfig::default(), QuadratureConfig::nested()] {
        let v = parisi_functional(&m, &RsbParams::uniform(vec![0.2, 0.6], vec![0.0, 0.4, 1.0], 2).unwrap(), &quad).unwrap();
        assert_eq!(v.x0, vec![0.0, 0.0]);
        assert_eq!(v.value, LN2);
    }
}

#[test]
fn annealed_limit() {
    let m = reference_model();
    let p = RsbParams::uniform(vec![1.0 - 1e-8], vec![0.0, 1.0], 2).unwrap();
    for quad in [QuadratureConfig::default(), QuadratureConfig::nested()] {
        let v = parisi_functional(&m, &p, &quad).unwrap();
        for (x, q) in v.x0.iter().zip(&v.paths.species) {
            assert!((x - q[1] / 2.0).abs() <= 1e-6, "{x} vs {}", q[1] / 2.0);
        }
        assert!((v.value - m.annealed_value()).abs() <= 1e-6);
    }
}

#[test]
fn vanishing_zeta_limit_matches_fine_quadrature() {
    let m = ModelSpec::single(1.0).unwrap();
    let p = RsbParams::uniform(vec![1e-8], vec![0.0, 1.0], 1).unwrap();
    let oracle = fine_expectation(|z| crate::stats::log_cosh(z * 2f64.sqrt()));
    for quad in [QuadratureConfig::default(), QuadratureConfig::nested()] {
        let x = parisi_recursion(&m, &p, &quad).unwrap()[0];
        assert!((x - oracle).abs() <= 1e-6, "{x} vs {oracle}");
    }
}

#[test]
fn reference_model_matches_independent_values() {
    // nested Gauss-Hermite with 80 nodes, computed independently
    let oracle = [0.6728089091563181, 0.6667640702341693];
    // cubic interpolation on the default grid is accurate to a few 1e-8
    for (quad, tol) in [(QuadratureConfig::default(), 5e-8), (QuadratureConfig::nested(), 1e-10)] {
        let x = parisi_recursion(&reference_model(), &reference_params(), &quad).unwrap();
        for (a, b) in x.iter().zip(oracle) {
            assert!((a - b).abs() < tol, "{a} vs {b}");
        }
    }
}

#[test]
fn single_species_grid_equals_nested() {
    let m = ModelSpec::single(1.0).unwrap();
    let p = RsbParams::uniform(vec![0.3, 0.7], vec![0.0, 0.5, 1.0], 1).unwrap();
    let g = parisi_functional(&m, &p, &QuadratureConfig::default()).unwrap().value;
    let n = parisi_functional(&m, &p, &QuadratureConfig::nested()).unwrap().value;
    assert!((g - n).abs() <= 1e-6);
    assert!((n - 1.2142676338530611).abs() < 1e-10);
    assert!((g - 1.2142676338530611).abs() < 5e-8);
}

#[test]
fn refinement_is_stable() {
    let m = reference_model();
    let p = RsbParams::new(vec![0.2, 0.5, 0.9], vec![vec![0.0, 0.1, 0.6, 1.0], vec![0.0, 0.3, 0.4, 1.0]]).unwrap();
    let base = parisi_functional(&m, &p, &QuadratureConfig::default()).unwrap().value;
    let fine = QuadratureConfig { hermite_nodes: 80, grid_points: 1025, ..Default::default() };
    let refined = parisi_functional(&m, &p, &fine).unwrap().value;
    assert!((base - refined).abs() <= 1e-7, "{}", (base - refined).abs());
}

#[test]
fn nested_mode_rejects_deep_trees() {
    let m = ModelSpec::single(1.0).unwrap();
    let p = RsbParams::uniform(vec![0.1, 0.2, 0.3, 0.4], vec![0.0, 0.2, 0.4, 0.6, 1.0], 1).unwrap();
    assert!(parisi_functional(&m, &p, &QuadratureConfig::nested()).is_err());
    assert!(parisi_functional(&m, &p, &QuadratureConfig::default()).is_ok());
}

#[test]
fn quadrature_config_validation() {
    let bad = QuadratureConfig { hermite_nodes: 7, ..Default::default() };
    assert!(bad.validate().is_err());
    let bad = QuadratureConfig { grid_points: 512, ..Default::default() };
    assert!(bad.validate().is_err());
}

#[test]
fn negative_increment_is_rejected() {
    let rule = crate::quadrature::GaussHermite::new(20).unwrap();
    let quad = QuadratureConfig::default();
    assert!(species_recursion(&[0.5, 0.7], &[0.0, 1.0, 0.5], &quad, &rule).is_err());
    assert!(species_recursion(&[0.5, 0.7], &[0.0, 0.0, 0.5], &quad, &rule).is_ok());
}

#[test]
fn soft_mean_limits() {
    let w = [0.25, 0.5, 0.25];
    let v = [1.0, 2.0, 4.0];
    assert_eq!(soft_mean(1e-12, &v, &w), 2.25);
    let exact = (0.25 * 1f64.exp() + 0.5 * 2f64.exp() + 0.25 * 4f64.exp()).ln();
    assert!((soft_mean(1.0, &v, &w) - exact).abs() < 1e-14);
    let tiny = soft_mean(1e-9, &v, &w);
    assert!((tiny - 2.25).abs() < 1e-8);
    assert!(soft_mean(1.0, &[1000.0, 0.0], &[0.5, 0.5]).is_finite());
}

fn arb_params(max_r: usize, species: usize) -> impl Strategy<Value = RsbParams> {
    (1..=max_r).prop_flat_map(move |r| {
        (
            proptest::collection::vec(0.01f64..0.99, r),
            proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, r - 1), species),
        )
            .prop_filter_map("distinct zeta", move |(mut z, qs)| {
                z.sort_by(|a, b| a.partial_cmp(b).unwrap());
                if z.windows(2).any(|w| w[1] - w[0] < 1e-3) {
                    return None;
                }
                let q = qs
                    .into_iter()
                    .map(|mut inner| {
                        inner.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        let mut s = vec![0.0];
                        s.extend(inner);
                        s.push(1.0);
                        s
                    })
                    .collect();
                RsbParams::new(z, q).ok()
            })
    })
}

fn arb_model() -> impl Strategy<Value = ModelSpec> {
    (0.1f64..0.9, 0.0f64..2.0, 0.0f64..1.0, 0.0f64..2.0)
        .prop_map(|(l, a, c, b)| ModelSpec::new(vec!["a", "b"], vec![l, 1.0 - l], vec![vec![a, c], vec![c, b]]).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn grid_agrees_with_nested(m in arb_model(), p in arb_params(3, 2)) {
        let g = parisi_functional(&m, &p, &QuadratureConfig::default()).unwrap();
        let n = parisi_functional(&m, &p, &QuadratureConfig::nested()).unwrap();
        prop_assert!((g.value - n.value).abs() <= 1e-6);
    }

    #[test]
    fn x0_is_nonnegative(m in arb_model(), p in arb_params(4, 2)) {
        let x = parisi_recursion(&m, &p, &QuadratureConfig::default()).unwrap();
        prop_assert!(x.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn duplicate_level_leaves_value_unchanged(m in arb_model(), p in arb_params(3, 2), j in 0usize..4) {
        let j = j.min(p.r());
        let d = p.with_duplicate_level(j).unwrap();
        for quad in [QuadratureConfig::default(), QuadratureConfig::nested()] {
            if d.r() > NESTED_MAX_LEVELS && quad.mode == QuadratureMode::NestedExact {
                continue;
            }
            let a = parisi_functional(&m, &p, &quad).unwrap().value;
            let b = parisi_functional(&m, &d, &quad).unwrap().value;
            prop_assert!((a - b).abs() <= 1e-10, "{} vs {}", a, b);
        }
    }

    #[test]
    fn species_permutation_equivariance(m in arb_model(), p in arb_params(3, 2)) {
        let swapped = m.permuted(&[1, 0]).unwrap();
        let ps = RsbParams::new(p.zeta().to_vec(), vec![p.q(1).to_vec(), p.q(0).to_vec()]).unwrap();
        let a = parisi_functional(&m, &p, &QuadratureConfig::default()).unwrap();
        let b = parisi_functional(&swapped, &ps, &QuadratureConfig::default()).unwrap();
        prop_assert!((a.x0[0] - b.x0[1]).abs() < 1e-12 && (a.x0[1] - b.x0[0]).abs() < 1e-12);
        prop_assert!((a.value - b.value).abs() < 1e-12);
    }
}
