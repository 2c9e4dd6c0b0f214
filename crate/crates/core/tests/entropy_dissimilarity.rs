use std::sync::Arc;

use mcloss_core::entropy::{
    bregman, conjugate_cw, conjugate_numeric, default_sampler, dissimilarity_from_entropy,
    entropy_cost_weighted, entropy_from_dissimilarity, entropy_lbeta, entropy_of_loss,
    entropy_zero_one, loss_from_entropy_duchi, CostWeightedDissimilarity, CostWeightedEntropy,
    Dissimilarity, DuchiLoss, Entropy, FnDissimilarity, LBetaEntropy, ShannonDissimilarity,
    ShannonEntropy, ZeroOneDissimilarity, ZeroOneEntropy,
};
use mcloss_core::hinge::{HingeKind, HingeLoss};
use mcloss_core::loss::ActionSampler;
use mcloss_core::scoring::{shannon_conjugate, ScoringRule};
use mcloss_core::simplex::{sample_simplex_interior, simplex_mesh, CostMatrix, Margin, ProbVector};
use mcloss_core::suites::{named_rules, random_cost};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pv(v: &[f64]) -> ProbVector {
    ProbVector::new(v.to_vec()).unwrap()
}

fn sqrt_dis() -> impl Dissimilarity {
    FnDissimilarity {
        dim: 1,
        f: |t: &[f64]| (t[0].sqrt() - 1.0).powi(2),
        grad: |t: &[f64]| vec![1.0 - 1.0 / t[0].sqrt()],
        label: "sqrt".into(),
    }
}

fn neg_min_dis() -> impl Dissimilarity {
    FnDissimilarity {
        dim: 1,
        f: |t: &[f64]| -t[0].min(1.0),
        grad: |t: &[f64]| vec![if t[0] <= 1.0 { -1.0 } else { 0.0 }],
        label: "neg_min".into(),
    }
}

/// Every implemented entropy with its dual dissimilarity for `m` classes.
fn all_entropies(m: usize, seed: u64) -> Vec<(Arc<dyn Entropy>, Arc<dyn Dissimilarity>)> {
    let mut out: Vec<(Arc<dyn Entropy>, Arc<dyn Dissimilarity>)> = named_rules(m)
        .iter()
        .map(|r| (r.entropy(), r.dissimilarity()))
        .collect();
    out.push((
        Arc::new(ZeroOneEntropy { m }),
        Arc::new(ZeroOneDissimilarity { m }),
    ));
    out.push((
        Arc::new(ShannonEntropy { m }),
        Arc::new(ShannonDissimilarity { m }),
    ));
    let cost = random_cost(&mut ChaCha8Rng::seed_from_u64(seed), m);
    out.push((
        Arc::new(CostWeightedEntropy { cost: cost.clone() }),
        Arc::new(CostWeightedDissimilarity { cost }),
    ));
    out
}

#[test]
fn entropy_from_dissimilarity_examples() {
    let h = entropy_from_dissimilarity(sqrt_dis());
    assert!(h.value(&[0.5, 0.5]).abs() < 1e-15);
    assert!((h.value(&[0.8, 0.2]) + 0.2).abs() < 1e-15);
    let h = entropy_from_dissimilarity(neg_min_dis());
    assert!((h.value(&[0.3, 0.7]) - 0.3).abs() < 1e-15);
    // Boundary limit: 0 * f(t/0) tends to the recession value -eta_1.
    assert!((h.value(&[1.0, 0.0]) - 0.0).abs() < 1e-9);
}

#[test]
fn dissimilarity_from_entropy_examples() {
    let f = dissimilarity_from_entropy(ZeroOneEntropy { m: 2 });
    for t in [0.0, 0.3, 1.0, 2.5, 10.0] {
        assert!((f.value(&[t]) + t.min(1.0)).abs() < 1e-14, "t = {t}");
    }
    let f = dissimilarity_from_entropy(ShannonEntropy { m: 3 });
    for t1 in [0.0, 0.2, 1.0, 3.0] {
        for t2 in [0.1, 0.5, 2.0] {
            let t = [t1, t2, 1.0];
            let dot: f64 = t.iter().sum();
            let oracle: f64 = t
                .iter()
                .map(|&x| if x == 0.0 { 0.0 } else { x * (x / dot).ln() })
                .sum();
            assert!((f.value(&[t1, t2]) - oracle).abs() < 1e-13);
        }
    }
}

#[test]
fn round_trip_on_simplex_grid() {
    for (h, _) in all_entropies(3, 1) {
        let back = entropy_from_dissimilarity(dissimilarity_from_entropy(h.clone()));
        for eta in simplex_mesh(3, 20).into_iter().filter(|e| e[2] > 0.0) {
            if !h.value(&eta).is_finite() {
                continue;
            }
            let err = (back.value(&eta) - h.value(&eta)).abs();
            assert!(err <= 1e-12, "{} at {eta:?}: {err}", h.label());
        }
    }
}

#[test]
fn round_trip_on_orthant_grid() {
    let ts = [0.0, 0.1, 0.5, 1.0, 2.0, 7.5];
    for (_, f) in all_entropies(3, 2) {
        let back = dissimilarity_from_entropy(entropy_from_dissimilarity(f.clone()));
        for &a in &ts {
            for &b in &ts {
                let (x, y) = (back.value(&[a, b]), f.value(&[a, b]));
                if x == y {
                    continue;
                }
                let scale = 1.0f64.max(y.abs());
                assert!(
                    (x - y).abs() <= 1e-10 * scale,
                    "{} at {a},{b}: {x} vs {y}",
                    f.label()
                );
            }
        }
    }
}

#[test]
fn closed_form_entropies() {
    assert!((entropy_zero_one(&pv(&[0.5, 0.3, 0.2])) - 0.5).abs() < 1e-15);
    assert!((entropy_zero_one(&ProbVector::uniform(4)) - 0.75).abs() < 1e-15);
    assert_eq!(entropy_zero_one(&pv(&[1.0, 0.0, 0.0])), 0.0);

    let zo = CostMatrix::zero_one(3);
    let c0 = [2.0, 1.0, 3.0];
    let cw = CostMatrix::class_weighted(&c0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let eta = pv(&sample_simplex_interior(&mut rng, 3, 0.0));
        let a = entropy_cost_weighted(&eta, &zo).unwrap();
        assert!((a - entropy_zero_one(&eta)).abs() < 1e-14);
        let oracle = eta.iter().zip(&c0).map(|(e, c)| e * c).sum::<f64>()
            - eta
                .iter()
                .zip(&c0)
                .map(|(e, c)| e * c)
                .fold(0.0f64, f64::max);
        assert!((entropy_cost_weighted(&eta, &cw).unwrap() - oracle).abs() < 1e-14);
    }
    for j in 0..3 {
        assert_eq!(
            entropy_cost_weighted(&ProbVector::vertex(3, j), &cw).unwrap(),
            0.0
        );
    }
    assert!(entropy_cost_weighted(&ProbVector::uniform(2), &zo).is_err());
}

#[test]
fn lbeta_entropy_examples() {
    for m in 2..6 {
        let u = ProbVector::uniform(m);
        for beta in [0.3, 0.5, 2.0, 3.5] {
            assert!((entropy_lbeta(&u, beta, true).unwrap() - 1.0).abs() < 1e-12);
            for j in 0..m {
                let e = ProbVector::vertex(m, j);
                assert!(entropy_lbeta(&e, beta, true).unwrap().abs() < 1e-12);
            }
        }
        for beta in [0.0, 1.0, f64::INFINITY] {
            assert!((entropy_lbeta(&u, beta, true).unwrap() - 1.0).abs() < 1e-12);
            assert!(entropy_lbeta(&u, beta, false).is_err());
        }
    }
    let eta = pv(&[0.25, 0.25, 0.5]);
    let norm = eta.iter().map(|x| x.sqrt()).sum::<f64>().powi(2);
    assert!((entropy_lbeta(&eta, 0.5, false).unwrap() - norm).abs() < 1e-14);
    assert!((entropy_lbeta(&eta, 0.5, true).unwrap() - (norm - 1.0) / 2.0).abs() < 1e-14);
    // Limits of the rescaled family.
    let eta = pv(&[0.2, 0.3, 0.5]);
    let geo = 3.0 * (0.2f64 * 0.3 * 0.5).powf(1.0 / 3.0);
    assert!((entropy_lbeta(&eta, 0.0, true).unwrap() - geo).abs() < 1e-14);
    let sh = -eta.iter().map(|x| x * x.ln()).sum::<f64>() / 3f64.ln();
    assert!((entropy_lbeta(&eta, 1.0, true).unwrap() - sh).abs() < 1e-14);
    assert!((entropy_lbeta(&eta, f64::INFINITY, true).unwrap() - 0.75).abs() < 1e-14);
    // Near-limit betas route to the limit forms.
    assert!((entropy_lbeta(&eta, 1.0 + 1e-10, true).unwrap() - sh).abs() < 1e-12);
}

#[test]
fn entropy_of_loss_examples() {
    let hin = HingeLoss::new(HingeKind::Hin, 2).unwrap();
    let grid = ActionSampler::Box {
        lo: -2.0,
        hi: 3.0,
        points: 501,
    };
    let v = entropy_of_loss(&hin, &grid, &pv(&[0.3, 0.7])).unwrap();
    assert!((v - 0.3).abs() < 1e-3);

    let lik = ScoringRule::likelihood(3).unwrap();
    let v = entropy_of_loss(&lik, &default_sampler(&lik), &ProbVector::uniform(3)).unwrap();
    assert!((v - 3f64.ln()).abs() < 1e-3);

    let zo4 = HingeLoss::new(HingeKind::Zo4, 3).unwrap();
    let v = entropy_of_loss(&zo4, &default_sampler(&zo4), &pv(&[0.5, 0.3, 0.2])).unwrap();
    assert!((v - 0.5).abs() < 1e-3);

    let empty = ActionSampler::Points(Vec::new());
    assert!(entropy_of_loss(&zo4, &empty, &ProbVector::uniform(3)).is_err());
    assert!(entropy_of_loss(&zo4, &grid, &ProbVector::uniform(2)).is_err());
}

#[test]
fn entropy_of_loss_refines_monotonically() {
    let lik = ScoringRule::likelihood(3).unwrap();
    let eta = pv(&[0.47, 0.31, 0.22]);
    let mut prev = f64::INFINITY;
    for n in [5, 10, 20, 40, 80] {
        let v = entropy_of_loss(&lik, &ActionSampler::SimplexMesh { n }, &eta).unwrap();
        assert!(v <= prev + 1e-12);
        prev = v;
    }
    let sh = -eta.iter().map(|x| x * x.ln()).sum::<f64>();
    assert!((prev - sh).abs() < 1e-6);
}

#[test]
fn conjugate_examples() {
    let f = neg_min_dis();
    assert!((conjugate_numeric(&f, &[-0.5]) - 0.5).abs() < 1e-9);
    assert_eq!(conjugate_numeric(&f, &[0.5]), f64::INFINITY);
    let zero = FnDissimilarity {
        dim: 1,
        f: |_: &[f64]| 0.0,
        grad: |_: &[f64]| vec![0.0],
        label: "zero".into(),
    };
    assert!(conjugate_numeric(&zero, &[0.0]).abs() < 1e-12);

    let zo = CostMatrix::zero_one(2);
    assert!((conjugate_cw(&zo, &[-0.5]) - 0.5).abs() < 1e-12);
    assert_eq!(conjugate_cw(&zo, &[0.1]), f64::INFINITY);
    // Oracle by a sweep over lambda: feasibility needs s <= -(C lambda)_1 = -lambda_2.
    for s in [-1.5, -1.0, -0.7, -0.2, 0.0] {
        let mut best = f64::INFINITY;
        for i in 0..=10_000 {
            let l1 = i as f64 / 10_000.0;
            if s <= -(1.0 - l1) + 1e-12 {
                best = best.min(l1);
            }
        }
        assert!((conjugate_cw(&zo, &[s]) - best).abs() < 1e-4, "s = {s}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for m in 2..6 {
        let c = random_cost(&mut rng, m);
        let s: Vec<f64> = (0..m - 1).map(|j| -c.get(j, m - 1)).collect();
        assert!(conjugate_cw(&c, &s).abs() < 1e-12);
    }
}

#[test]
fn bregman_examples() {
    let sh = ShannonEntropy { m: 2 };
    let eta = pv(&[0.9, 0.1]);
    let q = pv(&[0.5, 0.5]);
    let kl = 0.9 * 1.8f64.ln() + 0.1 * 0.2f64.ln();
    assert!((bregman(&sh, &eta, &q).unwrap() - kl).abs() < 1e-14);
    assert!((kl - 0.36807).abs() < 1e-5);
    assert_eq!(bregman(&sh, &q, &q).unwrap(), 0.0);

    let half = LBetaEntropy::new(3, 0.5, false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let eta = sample_simplex_interior(&mut rng, 3, 0.0);
        let q = sample_simplex_interior(&mut rng, 3, 1e-3);
        let a: f64 = q.iter().map(|x| x.sqrt()).sum();
        let b: f64 = eta.iter().zip(&q).map(|(e, x)| e / x.sqrt()).sum();
        let c: f64 = eta.iter().map(|x| x.sqrt()).sum();
        let oracle = a * b - c * c;
        let got = bregman(&half, &pv(&eta), &pv(&q)).unwrap();
        assert!((got - oracle).abs() < 1e-12 * (1.0 + oracle.abs()));
    }
    assert!(bregman(&sh, &ProbVector::uniform(3), &q).is_err());
}

#[test]
fn duchi_loss_examples() {
    for m in 2..5 {
        for j in 0..m {
            let v = loss_from_entropy_duchi(
                ZeroOneEntropy { m },
                j,
                &Margin::new(vec![0.0; m]).unwrap(),
            )
            .unwrap();
            assert!(
                (v - (1.0 - 1.0 / m as f64)).abs() < 1e-9,
                "m = {m}, j = {j}: {v}"
            );
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let g: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let shifted: Vec<f64> = g.iter().map(|x| x + 5.0).collect();
        for j in 0..3 {
            let a = loss_from_entropy_duchi(
                ShannonEntropy { m: 3 },
                j,
                &Margin::new(g.clone()).unwrap(),
            )
            .unwrap();
            let b = loss_from_entropy_duchi(
                ShannonEntropy { m: 3 },
                j,
                &Margin::new(shifted.clone()).unwrap(),
            )
            .unwrap();
            assert!((a - b).abs() < 1e-9);
        }
    }
    assert!(loss_from_entropy_duchi(
        ZeroOneEntropy { m: 3 },
        0,
        &Margin::new(vec![0.0; 2]).unwrap()
    )
    .is_err());
}

#[test]
fn duchi_loss_recovers_its_entropy() {
    let loss = DuchiLoss::new(ZeroOneEntropy { m: 3 }, 30);
    let sampler = ActionSampler::Box {
        lo: -1.0,
        hi: 1.0,
        points: 9,
    };
    for eta in simplex_mesh(3, 5) {
        let v = entropy_of_loss(&loss, &sampler, &pv(&eta)).unwrap();
        let h = 1.0 - eta.iter().cloned().fold(0.0f64, f64::max);
        assert!((v - h).abs() < 1e-3, "{eta:?}: {v} vs {h}");
    }
}

#[test]
fn uniform_point_relation() {
    for m in 2..6 {
        for (h, f) in all_entropies(m, m as u64) {
            let lhs = h.value(&vec![1.0 / m as f64; m]);
            let rhs = -f.value(&vec![1.0; m - 1]) / m as f64;
            assert!(
                (lhs - rhs).abs() < 1e-12,
                "{} m = {m}: {lhs} vs {rhs}",
                h.label()
            );
        }
    }
}

#[test]
fn bregman_nonnegative_on_many_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (m, pairs) in [(2, 20_000), (3, 100_000), (4, 20_000), (5, 20_000)] {
        let hs = all_entropies(m, 11);
        for _ in 0..pairs / 10 {
            let eta = pv(&sample_simplex_interior(&mut rng, m, 0.0));
            let q = pv(&sample_simplex_interior(&mut rng, m, 1e-4));
            for (h, _) in &hs {
                let b = bregman(h.as_ref(), &eta, &q).unwrap();
                assert!(b >= -1e-9, "{} m = {m}: {b}", h.label());
            }
        }
        for (h, _) in &hs {
            let q = pv(&sample_simplex_interior(&mut rng, m, 1e-3));
            assert!(bregman(h.as_ref(), &q, &q).unwrap().abs() < 1e-12);
        }
    }
}

fn interior(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, m).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect()
    })
}

fn mix(a: &[f64], b: &[f64], w: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| (1.0 - w) * x + w * y)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entropies_are_concave(
        (m, a, b) in (2usize..6).prop_flat_map(|m| (Just(m), interior(m), interior(m))),
        w in 0.0f64..1.0,
    ) {
        for (h, _) in all_entropies(m, 21) {
            let mid = h.value(&mix(&a, &b, w));
            let chord = (1.0 - w) * h.value(&a) + w * h.value(&b);
            prop_assert!(mid >= chord - 1e-9, "{}: {} < {}", h.label(), mid, chord);
        }
    }

    #[test]
    fn dissimilarities_are_convex(
        (m, a, b) in (2usize..6).prop_flat_map(|m| (
            Just(m),
            prop::collection::vec(0.0f64..5.0, m - 1),
            prop::collection::vec(0.0f64..5.0, m - 1),
        )),
        w in 0.0f64..1.0,
    ) {
        for (_, f) in all_entropies(m, 22) {
            let mid = f.value(&mix(&a, &b, w));
            let chord = (1.0 - w) * f.value(&a) + w * f.value(&b);
            prop_assert!(mid <= chord + 1e-9 * (1.0 + chord.abs()), "{}: {} > {}", f.label(), mid, chord);
        }
    }

    #[test]
    fn bregman_monotone_along_segments(
        (m, eta, q) in (2usize..6).prop_flat_map(|m| (Just(m), interior(m), interior(m))),
        w in 0.0f64..1.0,
    ) {
        for (h, _) in all_entropies(m, 23) {
            let b = bregman(h.as_ref(), &pv(&eta), &pv(&q)).unwrap();
            let b1 = bregman(h.as_ref(), &pv(&mix(&eta, &q, w)), &pv(&q)).unwrap();
            let b2 = bregman(h.as_ref(), &pv(&eta), &pv(&mix(&eta, &q, w))).unwrap();
            prop_assert!(b >= b1 - 1e-9, "{}: {} < {}", h.label(), b, b1);
            prop_assert!(b >= b2 - 1e-9, "{}: {} < {}", h.label(), b, b2);
        }
    }

    #[test]
    fn fenchel_inequality(
        (m, t, s) in (2usize..5).prop_flat_map(|m| (
            Just(m),
            prop::collection::vec(0.0f64..6.0, m - 1),
            prop::collection::vec(-4.0f64..0.0, m - 1),
        )),
        seed in 0u64..1000,
    ) {
        let f = ShannonDissimilarity { m };
        let fs = shannon_conjugate(&s);
        if fs.is_finite() {
            let st: f64 = s.iter().zip(&t).map(|(a, b)| a * b).sum();
            prop_assert!(st <= f.value(&t) + fs + 1e-9);
        }
        let c = random_cost(&mut ChaCha8Rng::seed_from_u64(seed), m);
        let fs = conjugate_cw(&c, &s);
        if fs.is_finite() {
            let f = CostWeightedDissimilarity { cost: c };
            let st: f64 = s.iter().zip(&t).map(|(a, b)| a * b).sum();
            prop_assert!(st <= f.value(&t) + fs + 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conjugate_cw_matches_numeric(
        (m, lambda, slack) in (2usize..5).prop_flat_map(|m| (
            Just(m),
            interior(m),
            prop::collection::vec(0.0f64..0.5, m - 1),
        )),
        seed in 0u64..1000,
        shift in prop_oneof![Just(0.0), -0.5f64..0.5],
    ) {
        let c = random_cost(&mut ChaCha8Rng::seed_from_u64(seed), m);
        let cl = c.times(&lambda);
        let s: Vec<f64> = (0..m - 1).map(|j| -cl[j] - slack[j] + shift).collect();
        let exact = conjugate_cw(&c, &s);
        let numeric = conjugate_numeric(&CostWeightedDissimilarity { cost: c }, &s);
        // A box search cannot certify slowly growing unbounded rays, so only
        // finite conjugates are compared.
        if exact.is_finite() {
            prop_assert!((exact - numeric).abs() <= 1e-6, "{} vs {}", exact, numeric);
        }
    }
}
