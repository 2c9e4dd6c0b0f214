use mcloss_core::entropy::{
    bregman, entropy_of_loss, Entropy, F0Base, PairwiseAsymmetricDissimilarity,
    ShannonDissimilarity, TwoClassDissimilarity,
};
use mcloss_core::loss::{ActionSampler, Loss};
use mcloss_core::numeric::central_gradient;
use mcloss_core::scoring::{
    beta_weight, canonical_representation_residual, lbeta_limit, lbeta_loss, loss_from_f_ratio,
    loss_from_f_simplex, pairwise_asymmetric, pairwise_symmetric, softmax_link,
    softmax_link_pinned, two_class_loss, two_class_weight, RatioFLoss, RuleDescriptor, ScoringRule,
};
use mcloss_core::simplex::{sample_simplex_interior, simplex_mesh, Margin, ProbVector};
use mcloss_core::suites::named_rules;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pv(v: &[f64]) -> ProbVector {
    ProbVector::new(v.to_vec()).unwrap()
}

fn interior_mesh(m: usize, n: usize) -> Vec<Vec<f64>> {
    simplex_mesh(m, n)
        .into_iter()
        .filter(|e| e.iter().all(|x| *x > 0.0))
        .collect()
}

fn shannon(eta: &[f64]) -> f64 {
    -eta.iter()
        .filter(|x| **x > 0.0)
        .map(|x| x * x.ln())
        .sum::<f64>()
}

#[test]
fn f_generated_losses() {
    let f = TwoClassDissimilarity {
        base: F0Base::Likelihood,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let q = pv(&sample_simplex_interior(&mut rng, 2, 1e-3));
        for j in 0..2 {
            let v = loss_from_f_simplex(&f, j, &q).unwrap();
            assert!((v + q[j].ln()).abs() < 1e-12);
        }
    }
    let f = TwoClassDissimilarity {
        base: F0Base::Exponential,
    };
    assert!((loss_from_f_simplex(&f, 0, &pv(&[0.8, 0.2])).unwrap() + 0.5).abs() < 1e-14);
    assert!(loss_from_f_ratio(&f, 1, &[1.0]).unwrap().abs() < 1e-15);
    assert!(loss_from_f_ratio(&f, 1, &[-1.0]).is_err());
    assert!(loss_from_f_simplex(&f, 2, &pv(&[0.8, 0.2])).is_err());
}

#[test]
fn f_generated_expected_loss_is_the_entropy() {
    let f = ShannonDissimilarity { m: 3 };
    let g = PairwiseAsymmetricDissimilarity {
        m: 3,
        base: F0Base::Likelihood,
    };
    for eta in interior_mesh(3, 20) {
        let p = pv(&eta);
        let r: f64 = (0..3)
            .map(|j| eta[j] * loss_from_f_simplex(&f, j, &p).unwrap())
            .sum();
        assert!((r - shannon(&eta)).abs() < 1e-12);
        let r: f64 = (0..3)
            .map(|j| eta[j] * loss_from_f_simplex(&g, j, &p).unwrap())
            .sum();
        let oracle: f64 = -(0..2)
            .map(|i| {
                let s = eta[i] + eta[2];
                eta[2] * (eta[2] / s).ln() + eta[i] * (eta[i] / s).ln()
            })
            .sum::<f64>();
        assert!((r - oracle).abs() < 1e-12);
    }
}

#[test]
fn ratio_and_simplex_forms_agree() {
    let f = ShannonDissimilarity { m: 4 };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let q = sample_simplex_interior(&mut rng, 4, 1e-3);
        let u: Vec<f64> = q[..3].iter().map(|x| x / q[3]).collect();
        for j in 0..4 {
            let a = loss_from_f_ratio(&f, j, &u).unwrap();
            let b = loss_from_f_simplex(&f, j, &pv(&q)).unwrap();
            assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        }
    }
}

#[test]
fn ratio_loss_recovers_its_entropy() {
    let loss = RatioFLoss(ShannonDissimilarity { m: 3 });
    let sampler = ActionSampler::Box {
        lo: 0.0,
        hi: 10.0,
        points: 101,
    };
    for eta in interior_mesh(3, 10).into_iter().filter(|e| e[2] >= 0.1) {
        let v = entropy_of_loss(&loss, &sampler, &pv(&eta)).unwrap();
        assert!((v - shannon(&eta)).abs() < 1e-3, "{eta:?}: {v}");
    }
}

#[test]
fn two_class_examples() {
    let half = ProbVector::uniform(2);
    assert!((two_class_loss(F0Base::Exponential, 0, &half).unwrap() - 1.0).abs() < 1e-15);
    for j in 0..2 {
        assert!((two_class_loss(F0Base::Likelihood, j, &half).unwrap() - 2f64.ln()).abs() < 1e-15);
    }
    let q = pv(&[0.8, 0.2]);
    assert!((two_class_loss(F0Base::Calibration, 0, &q).unwrap() - 0.125).abs() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let q = pv(&sample_simplex_interior(&mut rng, 2, 1e-3));
        let e = two_class_loss(F0Base::Exponential, 0, &q).unwrap();
        assert!((e - (q[1] / q[0]).sqrt()).abs() < 1e-12);
        let c = two_class_loss(F0Base::Calibration, 0, &q).unwrap();
        assert!((c - q[1] / (2.0 * q[0])).abs() < 1e-12);
    }
    assert!(two_class_loss(F0Base::Likelihood, 0, &ProbVector::uniform(3)).is_err());
}

#[test]
fn two_class_weights() {
    for q1 in [0.1, 0.3, 0.5, 0.77] {
        let q2 = 1.0 - q1;
        let w = two_class_weight(F0Base::Likelihood, q1).unwrap();
        assert!((w - 1.0 / (q1 * q2)).abs() < 1e-12 * w);
        assert!((w - beta_weight(0.0, 0.0, q1).unwrap()).abs() < 1e-12 * w);
        let w = two_class_weight(F0Base::Exponential, q1).unwrap();
        assert!((w - 0.5 * (q1 * q2).powf(-1.5)).abs() < 1e-12 * w);
    }
    assert!((beta_weight(0.0, 0.0, 0.5).unwrap() - 4.0).abs() < 1e-15);
    assert!(two_class_weight(F0Base::Likelihood, 1.0).is_err());
}

#[test]
fn risk_derivative_matches_weight() {
    for base in F0Base::ALL {
        let rule = ScoringRule::two_class(base);
        for q1 in [0.05, 0.2, 0.5, 0.63, 0.9] {
            let w = two_class_weight(base, q1).unwrap();
            for j in 0..2 {
                let l = |x: f64| rule.eval(j, &[x, 1.0 - x]);
                let h = 1e-4;
                let fd = (-l(q1 + 2.0 * h) + 8.0 * l(q1 + h) - 8.0 * l(q1 - h) + l(q1 - 2.0 * h))
                    / (12.0 * h);
                let ind = if j == 0 { 1.0 } else { 0.0 };
                let expect = -(ind - q1) * w;
                assert!(
                    (fd - expect).abs() <= 1e-8 * (1.0 + expect.abs()) * 1e3,
                    "{base:?} q1={q1} j={j}: {fd} vs {expect}"
                );
            }
        }
    }
}

#[test]
fn pairwise_examples() {
    let u3 = ProbVector::uniform(3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for base in F0Base::ALL {
        let q = pv(&sample_simplex_interior(&mut rng, 2, 1e-3));
        for j in 0..2 {
            let a = pairwise_asymmetric(base, j, &q).unwrap();
            let b = two_class_loss(base, j, &q).unwrap();
            let shift = ScoringRule::two_class(base).offset()[j];
            assert!((a + shift - b).abs() < 1e-12, "{base:?}");
        }
    }
    assert!(
        (pairwise_asymmetric(F0Base::Likelihood, 2, &u3).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-14
    );
    assert!((pairwise_symmetric(F0Base::Exponential, 0, &u3).unwrap() - 4.0).abs() < 1e-14);
    assert!(
        (pairwise_symmetric(F0Base::Likelihood, 0, &u3).unwrap() - 4.0 * 2f64.ln()).abs() < 1e-14
    );

    let asym = ScoringRule::pairwise_asymmetric(3, F0Base::Likelihood).unwrap();
    let h = asym.entropy();
    for eta in interior_mesh(3, 15) {
        let oracle: f64 = -(0..2)
            .map(|i| {
                let s = eta[i] + eta[2];
                eta[2] * (eta[2] / s).ln() + eta[i] * (eta[i] / s).ln()
            })
            .sum::<f64>();
        assert!((h.value(&eta) - oracle).abs() < 1e-12);
        assert!((asym.risk_at(&eta, &eta) - oracle).abs() < 1e-12);
    }

    let sym = ScoringRule::pairwise_symmetric(4, F0Base::Exponential).unwrap();
    let lik = ScoringRule::pairwise_symmetric(4, F0Base::Likelihood).unwrap();
    let half = ScoringRule::lbeta(4, 0.5, false).unwrap();
    for _ in 0..200 {
        let q = sample_simplex_interior(&mut rng, 4, 1e-3);
        for j in 0..4 {
            let e: f64 = 2.0
                * (0..4)
                    .filter(|k| *k != j)
                    .map(|k| (q[k] / q[j]).sqrt())
                    .sum::<f64>();
            assert!((sym.eval(j, &q) - e).abs() < 1e-12 * (1.0 + e));
            assert!((sym.eval(j, &q) - 2.0 * (half.eval(j, &q) - 1.0)).abs() < 1e-12 * (1.0 + e));
            let l: f64 = 2.0
                * (0..4)
                    .filter(|k| *k != j)
                    .map(|k| (1.0 + q[k] / q[j]).ln())
                    .sum::<f64>();
            assert!((lik.eval(j, &q) - l).abs() < 1e-12 * (1.0 + l));
        }
    }
}

#[test]
fn lbeta_examples() {
    for m in 2..6 {
        let u = ProbVector::uniform(m);
        for beta in [0.3, 0.5, 0.8] {
            let expect = (m as f64).powf((1.0 - beta) / beta);
            assert!((lbeta_loss(beta, 0, &u).unwrap() - expect).abs() < 1e-12 * expect);
        }
    }
    assert!((lbeta_loss(0.5, 1, &ProbVector::uniform(3)).unwrap() - 3.0).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let q = pv(&sample_simplex_interior(&mut rng, 3, 1e-3));
        for j in 0..3 {
            let s: f64 = q.iter().map(|k| (k / q[j]).sqrt()).sum();
            assert!((lbeta_loss(0.5, j, &q).unwrap() - s).abs() < 1e-12 * s);
            let two: f64 = -q[j] / q.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((lbeta_loss(2.0, j, &q).unwrap() - two).abs() < 1e-12);
        }
    }
    assert_eq!(lbeta_loss(2.0, 0, &pv(&[1.0, 0.0, 0.0])).unwrap(), -1.0);
    assert!(lbeta_loss(1.0, 0, &ProbVector::uniform(3)).is_err());
    assert!(lbeta_loss(0.0, 0, &ProbVector::uniform(3)).is_err());
}

#[test]
fn lbeta_limit_examples() {
    let u = ProbVector::uniform(3);
    assert!((lbeta_limit(0.0, 0, &u).unwrap() - 1.0).abs() < 1e-14);
    let q = pv(&[0.5, 0.3, 0.2]);
    assert!((lbeta_limit(f64::INFINITY, 1, &q).unwrap() - 1.5).abs() < 1e-15);
    assert_eq!(lbeta_limit(f64::INFINITY, 0, &q).unwrap(), 0.0);
    for j in 0..3 {
        let prod: f64 = q.iter().map(|k| k / q[j]).product();
        assert!((lbeta_limit(0.0, j, &q).unwrap() - prod.powf(1.0 / 3.0)).abs() < 1e-13);
        let s: f64 = (0..3)
            .filter(|k| *k != j)
            .map(|k| (q[k] / q[j]).sqrt())
            .sum::<f64>()
            / 2.0;
        assert!((lbeta_limit(0.5, j, &q).unwrap() - s).abs() < 1e-13);
        let l = -q[j].ln() / 3f64.ln();
        assert!((lbeta_limit(1.0, j, &q).unwrap() - l).abs() < 1e-13);
    }
    assert!(lbeta_limit(0.7, 0, &q).is_err());
    // beta = 0 through the softmax link is the exponential of mean score gaps.
    let rule = ScoringRule::lbeta(3, 0.0, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let h: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        for j in 0..3 {
            let expect = (h.iter().map(|hk| hk - h[j]).sum::<f64>() / 3.0).exp();
            assert!((rule.composite(j, &h) - expect).abs() < 1e-12 * expect);
        }
    }
}

#[test]
fn softmax_examples() {
    let q = softmax_link(&Margin::new(vec![0.0; 4]).unwrap()).unwrap();
    assert!(q.iter().all(|x| (x - 0.25).abs() < 1e-15));
    let q = softmax_link(&Margin::new(vec![4f64.ln(), 0.0]).unwrap()).unwrap();
    assert!((q[0] - 0.8).abs() < 1e-15 && (q[1] - 0.2).abs() < 1e-15);
    let q = softmax_link_pinned(&Margin::new(vec![4f64.ln()]).unwrap()).unwrap();
    assert!((q[0] - 0.8).abs() < 1e-15);
    let q = softmax_link(&Margin::new(vec![800.0, 0.0]).unwrap()).unwrap();
    assert!(q[0] == 1.0 && q[1] >= 0.0);
    assert!(Margin::new(vec![f64::NAN, 0.0]).is_err());
}

#[test]
fn composite_gradient_examples() {
    let r = ScoringRule::lbeta(3, 1.0, true).unwrap();
    let g = r.composite_gradient(0, &[0.0; 3]);
    let fd = central_gradient(|h| r.composite(0, h), &[0.0; 3], 1e-5);
    assert!((g[0] - fd[0]).abs() < 1e-9);
    assert!((g[0] + 2.0 / (3.0 * 3f64.ln())).abs() < 1e-12);
    assert!((g[0] + 0.606826).abs() < 1e-6);

    let r = ScoringRule::pairwise_symmetric(3, F0Base::Exponential).unwrap();
    let g = r.composite_gradient(0, &[0.0; 3]);
    let fd = central_gradient(|h| r.composite(0, h), &[0.0; 3], 1e-5);
    assert!((g[1] - fd[1]).abs() < 1e-8);
    assert!((g[1] - 1.0).abs() < 1e-12);

    let r = ScoringRule::two_class(F0Base::Exponential);
    let g = r.composite_gradient(0, &[0.0; 2]);
    let fd = central_gradient(|h| r.composite(0, h), &[0.0; 2], 1e-5);
    assert!((g[0] - fd[0]).abs() < 1e-8);
    assert!((g[0] + 0.5).abs() < 1e-12);
}

#[test]
fn canonical_representation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let lik = ScoringRule::likelihood(3).unwrap();
    let half = ScoringRule::lbeta(3, 0.5, false).unwrap();
    for _ in 0..1000 {
        let eta = pv(&sample_simplex_interior(&mut rng, 3, 0.0));
        let q = pv(&sample_simplex_interior(&mut rng, 3, 1e-3));
        assert!(canonical_representation_residual(&lik, &eta, &q).unwrap() <= 1e-10);
        assert!(canonical_representation_residual(&half, &eta, &q).unwrap() <= 1e-9);
        assert!(canonical_representation_residual(&lik, &q, &q).unwrap() <= 1e-12);
    }
    assert!(canonical_representation_residual(
        &lik,
        &ProbVector::uniform(3),
        &pv(&[1.0, 0.0, 0.0])
    )
    .is_err());
}

#[test]
fn regret_equals_bregman() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for m in 2..6 {
        for rule in named_rules(m) {
            let h = rule.entropy();
            for _ in 0..500 {
                let eta = pv(&sample_simplex_interior(&mut rng, m, 0.0));
                let q = pv(&sample_simplex_interior(&mut rng, m, 1e-3));
                let regret = rule.risk_at(&eta, &q) - h.value(&eta);
                let b = bregman(h.as_ref(), &eta, &q).unwrap();
                assert!(
                    (regret - b).abs() <= 1e-9 * (1.0 + b.abs()),
                    "{} m={m}: {regret} vs {b}",
                    rule.label()
                );
            }
        }
    }
}

#[test]
fn descriptors_round_trip() {
    for m in 2..5 {
        for rule in named_rules(m) {
            let d = rule.descriptor();
            let json = serde_json::to_string(&d).unwrap();
            let back: RuleDescriptor = serde_json::from_str(&json).unwrap();
            let r2 = ScoringRule::from_descriptor(&back).unwrap();
            assert_eq!(r2.label(), rule.label());
            let q = ProbVector::uniform(m);
            for j in 0..m {
                assert_eq!(r2.eval(j, &q), rule.eval(j, &q));
            }
        }
    }
    let sym = ScoringRule::pairwise_symmetric(3, F0Base::Exponential).unwrap();
    assert_eq!(sym.descriptor().offset, vec![4.0; 3]);
    assert_eq!(sym.descriptor().nu, Some(-0.5));
    assert!(ScoringRule::pairwise_beta(3, 0.3).is_err());
    assert!(ScoringRule::pairwise_beta(3, -0.5).is_ok());
}

#[test]
fn lbeta_two_is_not_convex_through_the_link() {
    let rule = ScoringRule::lbeta(3, 2.0, false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let a: Vec<f64> = (0..2).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let b: Vec<f64> = (0..2).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        for j in 0..3 {
            let gap =
                rule.composite(j, &mid) - 0.5 * (rule.composite(j, &a) + rule.composite(j, &b));
            worst = worst.max(gap);
        }
    }
    assert!(worst > 1e-3, "no midpoint violation found: {worst}");
}

fn composite_midpoint_gap(rule: &ScoringRule, a: &[f64], b: &[f64]) -> f64 {
    let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
    (0..rule.m())
        .map(|j| rule.composite(j, &mid) - 0.5 * (rule.composite(j, a) + rule.composite(j, b)))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn composite_convex_for_beta_in_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for m in [2, 3, 4] {
        for beta in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let rule = ScoringRule::lbeta(m, beta, true).unwrap();
            for _ in 0..10_000 / 3 {
                let a: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(-4.0..4.0)).collect();
                let b: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(-4.0..4.0)).collect();
                let gap = composite_midpoint_gap(&rule, &a, &b);
                assert!(gap <= 1e-9, "beta={beta} m={m}: {gap}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn softmax_translation_invariant(
        h in prop::collection::vec(-20.0f64..20.0, 2..7),
        c in -50.0f64..50.0,
    ) {
        let a = softmax_link(&Margin::new(h.clone()).unwrap()).unwrap();
        let shifted: Vec<f64> = h.iter().map(|x| x + c).collect();
        let b = softmax_link(&Margin::new(shifted).unwrap()).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn composite_gradients_match_differences(
        m in 2usize..6,
        h in prop::collection::vec(-2.0f64..2.0, 5),
        j in 0usize..5,
    ) {
        let h = &h[..m - 1];
        let j = j % m;
        for rule in named_rules(m) {
            let loss = rule.composite_loss();
            let g = loss.gradient(j, h);
            let fd = central_gradient(|x| loss.loss(j, x), h, 1e-5);
            for (a, b) in g.iter().zip(&fd) {
                prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{}: {} vs {}", rule.label(), a, b);
            }
        }
    }

    #[test]
    fn properness_against_random_reports(
        m in 2usize..6,
        seed in 0u64..10_000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eta = sample_simplex_interior(&mut rng, m, 0.0);
        let q = sample_simplex_interior(&mut rng, m, 0.0);
        for rule in named_rules(m) {
            prop_assert!(rule.risk_at(&eta, &eta) <= rule.risk_at(&eta, &q) + 1e-9, "{}", rule.label());
        }
    }
}
