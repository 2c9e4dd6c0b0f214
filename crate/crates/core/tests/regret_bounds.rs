use mcloss_core::entropy::{bregman, F0Base, ShannonEntropy};
use mcloss_core::hinge::{predict_dag, predict_tilde, HingeKind, HingeLoss};
use mcloss_core::loss::{ActionSampler, Loss};
use mcloss_core::regret::*;
use mcloss_core::scoring::ScoringRule;
use mcloss_core::simplex::{sample_simplex, CostMatrix, ProbVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cost(rng: &mut ChaCha8Rng, m: usize) -> CostMatrix {
    let rows = (0..m)
        .map(|j| {
            (0..m)
                .map(|k| if j == k { 0.0 } else { rng.gen_range(0.2..3.0) })
                .collect()
        })
        .collect();
    CostMatrix::new(rows).unwrap()
}

fn assert_clean(r: &BoundReport) {
    assert!(r.passed(), "{} violated: {:?}", r.bound_id, r);
}

#[test]
fn regret_examples() {
    let zo = HingeLoss::new(HingeKind::Zo4, 3).unwrap();
    let eta = ProbVector::new(vec![0.5, 0.3, 0.2]).unwrap();
    let h = mcloss_core::entropy::ZeroOneEntropy { m: 3 };
    // tau = (1, 0) predicts class 1; tau = (0, 0) predicts class 3.
    let r = regret(&zo, &h, &eta, &[1.0, 0.0]).unwrap();
    assert!(r.abs() < 1e-12);
    let z = zero_one_regret(&eta, &predict_tilde(&[0.0, 0.0]));
    assert!((z - 0.3).abs() < 1e-15);
    let rule = ScoringRule::likelihood(3).unwrap();
    let r = regret(&rule, rule.entropy().as_ref(), &eta, eta.as_slice()).unwrap();
    assert!(r.abs() < 1e-12);
    // Mismatched entropy is a configuration error.
    let bad = regret(&rule, &h, &eta, eta.as_slice());
    assert!(matches!(bad, Err(mcloss_core::Error::Config(_))));
}

#[test]
fn hinge_bounds_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for m in 2..=5 {
        let s = PairSampler::random(100 + m as u64);
        assert_clean(&check_hinge_bounds(HingeKind::Zo4, None, m, &s, 100_000).unwrap());
        assert_clean(&check_hinge_bounds(HingeKind::Zo3, None, m, &s, 100_000).unwrap());
        let c = random_cost(&mut rng, m);
        assert_clean(&check_hinge_bounds(HingeKind::Cw3, Some(&c), m, &s, 100_000).unwrap());
    }
}

#[test]
fn hinge_bound_vertex_prediction_is_tight_at_zero() {
    // tilde_tau = e_1 with class 1 the Bayes class: both sides vanish.
    let s = PairSampler::Pairs(vec![(vec![0.5, 0.3, 0.2], vec![1.0, 0.0])]);
    let r = check_hinge_bounds(HingeKind::Zo4, None, 3, &s, 1).unwrap();
    let w = r.witness.unwrap();
    assert_eq!(w.lhs, 0.0);
    assert!(w.rhs.abs() < 1e-15);
}

#[test]
fn general_bound_for_zero_one_entropy_losses() {
    for m in 2..=4 {
        let s = PairSampler::random(7 + m as u64);
        for (kind, pred) in [
            (HingeKind::Zo4, predict_tilde as fn(&[f64]) -> Vec<f64>),
            (HingeKind::Zo3, predict_dag),
            (HingeKind::Llw2, predict_tilde),
            (HingeKind::Dkr2, predict_tilde),
        ] {
            let l = HingeLoss::new(kind, m).unwrap();
            let reports = check_general_bound(&l, Some(&pred), &s, 100_000).unwrap();
            assert_eq!(reports.len(), 3);
            for r in &reports {
                assert_clean(r);
            }
        }
    }
}

#[test]
fn general_bound_rejects_other_entropies() {
    let rule = ScoringRule::likelihood(3).unwrap();
    let r = check_general_bound(&rule.composite_loss(), None, &PairSampler::random(1), 10);
    assert!(matches!(r, Err(mcloss_core::Error::Config(_))));
}

#[test]
fn general_bound_all_equal_losses() {
    // tau with tilde_tau uniform: every zo4 loss is equal, eta uniform.
    let l = HingeLoss::new(HingeKind::Zo4, 3).unwrap();
    let u = 1.0 / 3.0;
    let s = PairSampler::Pairs(vec![(vec![u; 3], vec![u, u])]);
    let r = check_general_bound(&l, None, &s, 1).unwrap();
    let w = r[0].witness.clone().unwrap();
    assert_eq!(w.lhs, 0.0);
    assert!(w.rhs.abs() < 1e-12);
}

#[test]
fn value_manifolds_at_three_classes() {
    let grid = ActionSampler::Box {
        lo: -3.0,
        hi: 3.0,
        points: 121,
    };
    for kind in [
        HingeKind::Zo3,
        HingeKind::Zo4,
        HingeKind::Llw2,
        HingeKind::Dkr2,
    ] {
        let l = HingeLoss::new(kind, 3).unwrap();
        for r in value_manifold_check(&l, &grid).unwrap() {
            assert_clean(&r);
        }
    }
    let l = HingeLoss::new(HingeKind::Zo4, 3).unwrap();
    assert_eq!(l.losses(&[1.0, 0.0]), vec![0.0, 1.0, 1.0]);
    let z = l.losses(&[0.6, -0.3]);
    let capped: f64 = z.iter().map(|v| v.min(1.0)).sum();
    assert!((capped - 2.0).abs() < 1e-12);
}

#[test]
fn hull_distance_examples() {
    let zs = vec![vec![0.0, 2.0], vec![2.0, 0.0]];
    assert!((hull_distance(&zs, &[1.0, 1.0])).abs() < 1e-12);
    assert!((hull_distance(&zs, &[0.0, 0.0]) - 2f64.sqrt()).abs() < 1e-9);
}

#[test]
fn strong_convexity_moduli() {
    let k = strong_convexity_modulus(&half_entropy(3).unwrap(), 30).unwrap();
    assert!(k >= 1.0 - 1e-3, "{k}");
    let pw = ScoringRule::pairwise_beta(3, -0.5).unwrap();
    let k = strong_convexity_modulus(pw.entropy().as_ref(), 30).unwrap();
    assert!(k >= 2.0 - 1e-3, "{k}");
    for m in 2..=4 {
        let k = strong_convexity_modulus(&ShannonEntropy { m }, 24).unwrap();
        assert!((1.0 - 1e-3..=1.2).contains(&k), "m={m}: {k}");
    }
    let zo = mcloss_core::entropy::ZeroOneEntropy { m: 3 };
    assert!(strong_convexity_modulus(&zo, 10).is_err());
}

#[test]
fn kappa_rescaled_limit() {
    // kappa / (m^(1/beta - 1) - 1) tends to 1/log m as beta -> 1.
    let m = 4usize;
    let beta = 1.0 - 1e-6;
    let k = kappa_constant(KappaFamily::LBeta { beta, m }).unwrap();
    let r = k / ((m as f64).powf(1.0 / beta - 1.0) - 1.0);
    assert!((r - 1.0 / (m as f64).ln()).abs() < 1e-4);
}

#[test]
fn scoring_bounds_sweep() {
    for m in 2..=5 {
        let s = PairSampler::random(31 + m as u64);
        let lik = ScoringRule::likelihood(m).unwrap();
        let half = ScoringRule::lbeta(m, 0.5, false).unwrap();
        for rule in [lik, half] {
            let kappa = kappa_for_rule(&rule).unwrap();
            assert_eq!(kappa, 1.0);
            for r in check_scoring_bounds(&rule, kappa, &s, 100_000).unwrap() {
                assert_clean(&r);
            }
        }
    }
}

#[test]
fn pinsker_spot_value() {
    let rule = ScoringRule::likelihood(2).unwrap();
    let s = PairSampler::Pairs(vec![(vec![0.9, 0.1], vec![0.5, 0.5])]);
    let r = check_scoring_bounds(&rule, 1.0, &s, 1).unwrap();
    // ||eta - q||_1 = 0.8; q ties, so the zero-one side uses class 1.
    let w = r[0].witness.clone().unwrap();
    assert!((w.lhs - 0.32).abs() < 1e-12);
    assert_eq!(r[1].witness.clone().unwrap().lhs, 0.0);
    // 0.9 log 1.8 + 0.1 log 0.2, evaluated independently.
    let kl = 0.9 * (1.8f64).ln() + 0.1 * (0.2f64).ln();
    assert!((w.rhs - kl).abs() < 1e-12);
    assert!((w.rhs - 0.36807).abs() < 1e-5);
}

#[test]
fn half_bregman_closed_form() {
    let h = half_entropy(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let e = sample_simplex(&mut rng, 4);
        let q = sample_simplex(&mut rng, 4);
        let b = bregman(
            &h,
            &ProbVector::new(e.clone()).unwrap(),
            &ProbVector::new(q.clone()).unwrap(),
        )
        .unwrap();
        assert!((b - bregman_half_closed_form(&e, &q)).abs() < 1e-10);
    }
}

#[test]
fn psi_q_profiles_are_monotone() {
    let ts: Vec<f64> = (0..=20).map(|i| i as f64 / 10.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for rule in [
        ScoringRule::likelihood(3).unwrap(),
        ScoringRule::lbeta(3, 0.5, false).unwrap(),
    ] {
        let q = vec![0.5, 0.3, 0.2];
        let p = PsiParams {
            q: Some(q.clone()),
            ..Default::default()
        };
        let prof = psi_profile(PsiKind::PsiQ, &rule, &p, &ts).unwrap();
        assert!(prof.monotone);
        assert_eq!(prof.points[0].1, 0.0);
        let p = PsiParams {
            q: Some(q),
            cost: Some(random_cost(&mut rng, 3)),
            ..Default::default()
        };
        let prof = psi_profile(PsiKind::PsiQC, &rule, &p, &ts).unwrap();
        assert!(prof.monotone);
    }
}

#[test]
fn psi_profile_errors() {
    let rule = ScoringRule::likelihood(5).unwrap();
    let r = psi_profile(PsiKind::PsiUnderline, &rule, &PsiParams::default(), &[0.1]);
    assert!(r.is_err());
    let rule = ScoringRule::likelihood(3).unwrap();
    let p = PsiParams {
        mesh: Some(0),
        ..Default::default()
    };
    assert!(psi_profile(PsiKind::PsiUnderline, &rule, &p, &[0.1]).is_err());
    assert!(psi_profile(PsiKind::PsiQ, &rule, &PsiParams::default(), &[0.1]).is_err());
    assert!(psi_profile(PsiKind::PsiBjm, &rule, &PsiParams::default(), &[0.1]).is_err());
}

#[test]
fn psi_underline_zero_at_zero() {
    let rule = ScoringRule::lbeta(3, 0.5, false).unwrap();
    let p = psi_profile(
        PsiKind::PsiUnderline,
        &rule,
        &PsiParams::default(),
        &[0.0, 0.5],
    )
    .unwrap();
    assert_eq!(p.points[0].1, 0.0);
    assert!(p.points[1].1 > 0.0);
}

#[test]
fn psi_rw_likelihood_table() {
    let rule = ScoringRule::likelihood(2).unwrap();
    let p = PsiParams {
        c0: Some(vec![2.0, 1.0]),
        ..Default::default()
    };
    let ts = [-2.0, -0.5, 0.0, 0.5, 1.0, 2.5];
    let prof = psi_profile(PsiKind::PsiRw, &rule, &p, &ts).unwrap();
    // eta_1 = (1 + d)/3, q_1 = 1/3; KL by hand.
    let kl = |e: f64, q: f64| e * (e / q).ln() + (1.0 - e) * ((1.0 - e) / (1.0 - q)).ln();
    for (t, v) in prof.points {
        let e1 = (1.0 + t) / 3.0;
        if (0.0..=1.0).contains(&e1) {
            let want = if e1 == 0.0 {
                -(2.0f64 / 3.0).ln()
            } else if e1 == 1.0 {
                -(1.0f64 / 3.0).ln()
            } else {
                kl(e1, 1.0 / 3.0)
            };
            assert!((v - want).abs() < 1e-12, "{t}: {v} vs {want}");
        } else {
            assert_eq!(v, f64::INFINITY);
        }
    }
}

#[test]
fn bjm_jensen_on_mixtures() {
    let rule = ScoringRule::two_class(F0Base::Exponential);
    let h = rule.entropy();
    let ts: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let prof = psi_profile(PsiKind::PsiBjm, &rule, &PsiParams::default(), &ts).unwrap();
    let hull = convex_minorant(&prof.points);
    let phi = PsiProfile {
        kind: PsiKind::PsiBjm,
        points: hull,
        monotone: true,
    };
    for (t, v) in &prof.points {
        assert!(phi.lookup_floor(*t) <= v + 1e-12);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..2000 {
        let w = sample_simplex(&mut rng, 3);
        let (mut bz, mut bl) = (0.0, 0.0);
        for wi in &w {
            let e = sample_simplex(&mut rng, 2);
            let q = sample_simplex(&mut rng, 2);
            bz += wi * zero_one_regret(&e, &q);
            bl += wi * (rule.risk_at(&e, &q) - h.value(&e));
        }
        assert!(phi.lookup_floor(bz) <= bl + 1e-9);
    }
}

#[test]
fn cost_transform_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let c = random_cost(&mut rng, 3);
    // L = zero-one loss on simplex predictions gives the cost-weighted loss.
    struct ZeroOne;
    impl Loss for ZeroOne {
        fn num_classes(&self) -> usize {
            3
        }
        fn action_dim(&self) -> usize {
            3
        }
        fn domain(&self) -> mcloss_core::numeric::Domain {
            mcloss_core::numeric::Domain::Simplex
        }
        fn loss(&self, j: usize, a: &[f64]) -> f64 {
            if mcloss_core::simplex::argmax_lowest(a) == j {
                0.0
            } else {
                1.0
            }
        }
        fn name(&self) -> String {
            "zo".into()
        }
    }
    let t = cost_transform(ZeroOne, &c).unwrap();
    for _ in 0..200 {
        let a = sample_simplex(&mut rng, 3);
        let k = mcloss_core::simplex::argmax_lowest(&a);
        for j in 0..3 {
            assert!((t.loss(j, &a) - c.get(j, k)).abs() < 1e-12);
        }
    }
    // Class-weighted costs scale a proper rule per label.
    let c0 = [2.0, 0.5, 1.5];
    let cw = CostMatrix::class_weighted(&c0).unwrap();
    let rule = ScoringRule::likelihood(3).unwrap();
    let t = cost_transform(rule.clone(), &cw).unwrap();
    for _ in 0..200 {
        let q = sample_simplex(&mut rng, 3);
        for j in 0..3 {
            assert!((t.loss(j, &q) - c0[j] * rule.loss(j, &q)).abs() < 1e-12);
        }
    }
}

#[test]
fn risk_identity_residuals() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rule = ScoringRule::likelihood(3).unwrap();
    for _ in 0..1000 {
        let c = random_cost(&mut rng, 3);
        let eta = ProbVector::new(sample_simplex(&mut rng, 3)).unwrap();
        let q = sample_simplex(&mut rng, 3);
        assert!(risk_identity_check(&rule, &c, &eta, &q).unwrap() <= 1e-10);
    }
    let zo = CostMatrix::zero_one(3);
    let eta = ProbVector::new(vec![0.2, 0.5, 0.3]).unwrap();
    assert_eq!(eta_tilde(&zo, &eta), eta.as_slice().to_vec());
    assert_eq!(d_eta(&zo, &eta), 0.0);
    let l = HingeLoss::new(HingeKind::Zo4, 3).unwrap();
    assert!(risk_identity_check(&l, &zo, &eta, &[0.6, -0.3]).unwrap() <= 1e-12);
    // eta = e_j: D = sum_{k != j} (c_jM - c_jk).
    let c = random_cost(&mut rng, 3);
    let cm = c.row_max();
    for j in 0..3 {
        let e = ProbVector::vertex(3, j);
        let want: f64 = (0..3)
            .filter(|&k| k != j)
            .map(|k| cm[j] - c.get(j, k))
            .sum();
        assert!((d_eta(&c, &e) - want).abs() < 1e-15);
    }
}

#[test]
fn regret_identity_for_transformed_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rule = ScoringRule::likelihood(3).unwrap();
    for _ in 0..5 {
        let c = random_cost(&mut rng, 3);
        let eta = ProbVector::new(sample_simplex(&mut rng, 3)).unwrap();
        let q = ProbVector::new(sample_simplex(&mut rng, 3)).unwrap();
        assert!(regret_identity_residual(&rule, &c, &eta, &q).unwrap() < 1e-6);
    }
}

#[test]
fn misclassification_bounds() {
    let eps = 1e-6;
    let eta = ProbVector::new(vec![0.8, 0.2, 0.0]).unwrap();
    let q = ProbVector::new(vec![0.5 - eps, 0.5 + eps, 0.0]).unwrap();
    let b = misclass_upper_bounds(&eta, &q, None).unwrap();
    assert!((b.zero_one.0 - 0.6).abs() < 3e-6);
    assert!((b.zero_one.1 - (0.6 + 2.0 * eps)).abs() < 1e-12);
    let b = misclass_upper_bounds(&eta, &eta, None).unwrap();
    assert_eq!(b.zero_one, (0.0, 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for m in 2..=6 {
        let c = random_cost(&mut rng, m);
        let s = PairSampler::random(m as u64);
        for r in check_misclass_bounds(m, Some(&c), &s, 100_000).unwrap() {
            assert_clean(&r);
        }
    }
}

#[test]
fn cw_bounds_two_class_likelihood() {
    let rule = ScoringRule::likelihood(2).unwrap();
    let c = CostMatrix::class_weighted(&[2.0, 1.0]).unwrap();
    let mut pairs = Vec::new();
    for i in 1..40 {
        for k in 1..40 {
            let (e, q) = (i as f64 / 40.0, k as f64 / 40.0);
            pairs.push((vec![e, 1.0 - e], vec![q, 1.0 - q]));
        }
    }
    let n = pairs.len();
    let reports = check_cw_bounds(
        &rule,
        &c,
        &PairSampler::Pairs(pairs),
        n,
        &CwOptions::default(),
    )
    .unwrap();
    assert_eq!(reports.len(), 4);
    for r in &reports {
        assert_clean(r);
    }
}

#[test]
fn cw_bounds_three_classes() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let c = random_cost(&mut rng, 3);
    for rule in [
        ScoringRule::likelihood(3).unwrap(),
        ScoringRule::lbeta(3, 0.5, false).unwrap(),
    ] {
        let reports = check_cw_bounds(
            &rule,
            &c,
            &PairSampler::random(5),
            2000,
            &CwOptions::default(),
        )
        .unwrap();
        for r in &reports {
            assert_clean(r);
        }
    }
}

#[test]
fn cw_bounds_zero_one_costs_reduce_to_underline_psi() {
    let rule = ScoringRule::likelihood(3).unwrap();
    let c = CostMatrix::zero_one(3);
    let reports = check_cw_bounds(
        &rule,
        &c,
        &PairSampler::random(6),
        500,
        &CwOptions::default(),
    )
    .unwrap();
    for r in &reports {
        assert_clean(r);
    }
}

#[test]
fn calibration_infima() {
    let eta = ProbVector::new(vec![0.5, 0.3, 0.2]).unwrap();
    let grid = ActionSampler::Box {
        lo: -3.0,
        hi: 3.0,
        points: 121,
    };
    let zo4 = HingeLoss::new(HingeKind::Zo4, 3).unwrap();
    let v = calibration_infimum(&zo4, predict_tilde, &eta, 2, &grid).unwrap();
    assert!(v >= 0.1 - 1e-3, "{v}");
    assert!(calibration_infimum(&zo4, predict_tilde, &eta, 0, &grid).is_err());
    let llw2 = HingeLoss::new(HingeKind::Llw2, 3).unwrap();
    let v = calibration_infimum(&llw2, predict_tilde, &eta, 1, &grid).unwrap();
    assert!(v >= 0.2 / 3.0 - 1e-3, "{v}");
    let none = ActionSampler::Points(vec![vec![1.0, 0.0]]);
    assert_eq!(
        calibration_infimum(&zo4, predict_tilde, &eta, 2, &none).unwrap(),
        f64::INFINITY
    );
}
