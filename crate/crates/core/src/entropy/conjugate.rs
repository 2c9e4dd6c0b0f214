//! Convex conjugates of dissimilarity functions.

use nalgebra::{DMatrix, DVector};

use super::Dissimilarity;
use crate::loss::box_grid;
use crate::numeric::{compass_search, Domain};
use crate::simplex::{simplex_mesh, CostMatrix};

/// Grid parameters for [`conjugate_numeric_with`].
#[derive(Debug, Clone)]
pub struct ConjugateConfig {
    /// Initial box `[0, box0]^(m-1)`.
    pub box0: f64,
    /// Grid points per axis (reduced automatically in dimension above 3).
    pub points: usize,
    /// Number of zoom rounds around the incumbent maximizer.
    pub rounds: usize,
    /// How many times the box is doubled before declaring `+inf`.
    pub doublings: usize,
    /// Finish with a compass search inside the box.
    pub polish: bool,
}

impl Default for ConjugateConfig {
    fn default() -> Self {
        ConjugateConfig {
            box0: 8.0,
            points: 33,
            rounds: 2,
            doublings: 2,
            polish: true,
        }
    }
}

/// `f*(s) = sup_{t >= 0} s^T t - f(t)` with the default grid.
pub fn conjugate_numeric<D: Dissimilarity + ?Sized>(f: &D, s: &[f64]) -> f64 {
    conjugate_numeric_with(f, s, &ConjugateConfig::default())
}

/// `f*(s)` by a coarse grid on a box, zoom refinement and a local polish.
/// Returns `+inf` when the maximizer stays on the upper face of the box
/// after every doubling.
pub fn conjugate_numeric_with<D: Dissimilarity + ?Sized>(
    f: &D,
    s: &[f64],
    cfg: &ConjugateConfig,
) -> f64 {
    let d = f.dim();
    assert_eq!(s.len(), d, "conjugate argument has the wrong dimension");
    let mut b = cfg.box0;
    for _ in 0..=cfg.doublings {
        let (x, v) = maximize_on_box(f, s, b, cfg);
        let on_face = x.iter().any(|xi| *xi >= b * (1.0 - 1e-9));
        if !on_face {
            return v;
        }
        b *= 2.0;
    }
    f64::INFINITY
}

fn objective<D: Dissimilarity + ?Sized>(f: &D, s: &[f64], t: &[f64]) -> f64 {
    let fv = f.value(t);
    if fv.is_nan() || fv == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    s.iter().zip(t).map(|(a, b)| a * b).sum::<f64>() - fv
}

fn maximize_on_box<D: Dissimilarity + ?Sized>(
    f: &D,
    s: &[f64],
    b: f64,
    cfg: &ConjugateConfig,
) -> (Vec<f64>, f64) {
    let d = s.len();
    let points = if d <= 3 {
        cfg.points
    } else {
        (35_937f64.powf(1.0 / d as f64).floor() as usize).clamp(3, cfg.points)
    };
    let mut lo = vec![0.0; d];
    let mut hi = vec![b; d];
    let mut best = (vec![0.0; d], f64::NEG_INFINITY);
    let mut h = b;
    for round in 0..=cfg.rounds {
        let unit = box_grid(d, 0.0, 1.0, points);
        let mut found = false;
        for u in unit {
            let t: Vec<f64> = (0..d).map(|i| lo[i] + (hi[i] - lo[i]) * u[i]).collect();
            let v = objective(f, s, &t);
            if v > best.1 {
                best = (t, v);
                found = true;
            }
        }
        h = (0..d)
            .map(|i| (hi[i] - lo[i]) / (points - 1) as f64)
            .fold(0.0, f64::max);
        if round == cfg.rounds || (!found && round > 0) {
            break;
        }
        for i in 0..d {
            lo[i] = (best.0[i] - 2.0 * h).max(0.0);
            hi[i] = (best.0[i] + 2.0 * h).min(b);
        }
    }
    if d <= NESTED_MAX_DIM {
        let mut prefix = Vec::with_capacity(d);
        let (x, v) = nested_golden(f, s, b, &mut prefix);
        if v > best.1 {
            best = (x, v);
        }
    }
    if cfg.polish && best.1.is_finite() {
        let res = compass_search(
            |t| {
                if t.iter().any(|x| *x > b) {
                    f64::INFINITY
                } else {
                    -objective(f, s, t)
                }
            },
            &best.0,
            h,
            Domain::Orthant,
            1e-13,
            20_000,
        );
        if -res.value > best.1 {
            best = (res.x, -res.value);
        }
    }
    best
}

/// Largest dimension refined by [`nested_golden`].
const NESTED_MAX_DIM: usize = 3;
const GOLDEN_ITERS: usize = 60;

/// Coordinatewise golden-section maximization of the concave objective on
/// `[0, b]^d`: partial maxima of a concave function stay concave, so each
/// level is a unimodal line search. Kinks and plateaus are handled exactly.
fn nested_golden<D: Dissimilarity + ?Sized>(
    f: &D,
    s: &[f64],
    b: f64,
    prefix: &mut Vec<f64>,
) -> (Vec<f64>, f64) {
    let d = s.len();
    if prefix.len() == d {
        return (prefix.clone(), objective(f, s, prefix));
    }
    let eval = |x: f64, prefix: &mut Vec<f64>| {
        prefix.push(x);
        let r = nested_golden(f, s, b, prefix);
        prefix.pop();
        r
    };
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, b);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut v1 = eval(x1, prefix);
    let mut v2 = eval(x2, prefix);
    let mut best = if v1.1 >= v2.1 { v1.clone() } else { v2.clone() };
    for _ in 0..GOLDEN_ITERS {
        if v1.1 >= v2.1 {
            hi = x2;
            x2 = x1;
            v2 = v1;
            x1 = hi - r * (hi - lo);
            v1 = eval(x1, prefix);
            if v1.1 > best.1 {
                best = v1.clone();
            }
        } else {
            lo = x1;
            x1 = x2;
            v1 = v2;
            x2 = lo + r * (hi - lo);
            v2 = eval(x2, prefix);
            if v2.1 > best.1 {
                best = v2.clone();
            }
        }
    }
    for x in [0.0, b] {
        let e = eval(x, prefix);
        if e.1 > best.1 {
            best = e;
        }
    }
    best
}

/// Conjugate of the cost-weighted dissimilarity: the linear program
/// `min (C lambda)_m` over `lambda in Delta_m` with
/// `s_j <= -(C lambda)_j` for `j < m-1`; `+inf` when infeasible.
///
/// Solved exactly by vertex enumeration for `m <= 6` and approximately on a
/// simplex mesh above that.
pub fn conjugate_cw(cost: &CostMatrix, s: &[f64]) -> f64 {
    let m = cost.m();
    assert_eq!(s.len(), m - 1, "conjugate argument has the wrong dimension");
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(2 * m - 1);
    for k in 0..m {
        let mut r = vec![0.0; m];
        r[k] = -1.0;
        rows.push((r, 0.0));
    }
    for (j, sj) in s.iter().enumerate() {
        rows.push(((0..m).map(|k| cost.get(j, k)).collect(), -sj));
    }
    let objective = |lam: &[f64]| (0..m).map(|k| cost.get(m - 1, k) * lam[k]).sum::<f64>();
    let feasible = |lam: &[f64]| {
        rows.iter().all(|(r, rhs)| {
            let lhs: f64 = r.iter().zip(lam).map(|(a, b)| a * b).sum();
            lhs <= rhs + 1e-9 * (1.0 + rhs.abs())
        })
    };

    let mut best = f64::INFINITY;
    if m <= 6 {
        for active in combinations(rows.len(), m - 1) {
            let mut a = DMatrix::<f64>::zeros(m, m);
            let mut rhs = DVector::<f64>::zeros(m);
            for (row, &idx) in active.iter().enumerate() {
                for k in 0..m {
                    a[(row, k)] = rows[idx].0[k];
                }
                rhs[row] = rows[idx].1;
            }
            for k in 0..m {
                a[(m - 1, k)] = 1.0;
            }
            rhs[m - 1] = 1.0;
            let lu = a.lu();
            if lu.determinant().abs() < 1e-12 {
                continue;
            }
            if let Some(sol) = lu.solve(&rhs) {
                let lam: Vec<f64> = sol.iter().cloned().collect();
                if lam.iter().all(|x| x.is_finite()) && feasible(&lam) {
                    best = best.min(objective(&lam));
                }
            }
        }
    } else {
        for lam in simplex_mesh(m, 12) {
            if feasible(&lam) {
                best = best.min(objective(&lam));
            }
        }
    }
    best
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}
