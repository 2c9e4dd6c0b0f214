//! Small derivative-free optimization and finite-difference helpers.

/// Feasible region explored by [`compass_search`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Points of `Delta_d`; moves along `e_i - e_k` keep the sum fixed.
    Simplex,
    /// The nonnegative orthant.
    Orthant,
    /// All of `R^d`.
    Euclidean,
    /// Vectors whose entries sum to zero; moves along `e_i - e_k`.
    SumZero,
}

impl Domain {
    fn directions(self, d: usize) -> Vec<Vec<f64>> {
        let mut dirs = Vec::new();
        match self {
            Domain::Simplex | Domain::SumZero => {
                for i in 0..d {
                    for k in 0..d {
                        if i != k {
                            let mut v = vec![0.0; d];
                            v[i] = 1.0;
                            v[k] = -1.0;
                            dirs.push(v);
                        }
                    }
                }
                // Balanced subset moves escape ridges where several
                // coordinates tie.
                if (3..=6).contains(&d) {
                    for mask in 1..((1usize << d) - 1) {
                        let k = mask.count_ones() as f64;
                        let v = (0..d)
                            .map(|i| {
                                if mask & (1 << i) != 0 {
                                    1.0 / k
                                } else {
                                    -1.0 / (d as f64 - k)
                                }
                            })
                            .collect();
                        dirs.push(v);
                    }
                }
            }
            Domain::Orthant | Domain::Euclidean => {
                for i in 0..d {
                    for s in [1.0, -1.0] {
                        let mut v = vec![0.0; d];
                        v[i] = s;
                        dirs.push(v);
                    }
                }
                // Mixed-sign moves in {-1, 0, 1}^d for small d.
                if (2..=4).contains(&d) {
                    for code in 0..3usize.pow(d as u32) {
                        let mut c = code;
                        let v: Vec<f64> = (0..d)
                            .map(|_| {
                                let s = (c % 3) as f64 - 1.0;
                                c /= 3;
                                s
                            })
                            .collect();
                        if v.iter().filter(|x| **x != 0.0).count() >= 2 {
                            dirs.push(v);
                        }
                    }
                }
            }
        }
        dirs
    }

    fn feasible(self, x: &[f64]) -> bool {
        match self {
            Domain::Simplex | Domain::Orthant => x.iter().all(|v| *v >= 0.0),
            Domain::Euclidean | Domain::SumZero => true,
        }
    }
}

/// Result of a local search.
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

/// Minimizes `f` by compass (pattern) search from `x0`.
///
/// The step starts at `step` and halves whenever no direction improves,
/// stopping once it falls below `min_step` or after `max_evals` calls.
pub fn compass_search<F>(
    f: F,
    x0: &[f64],
    step: f64,
    domain: Domain,
    min_step: f64,
    max_evals: usize,
) -> SearchResult
where
    F: Fn(&[f64]) -> f64,
{
    let d = x0.len();
    let dirs = domain.directions(d);
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut evals = 1;
    let mut h = step;
    let mut trial = vec![0.0; d];
    while h >= min_step && evals < max_evals {
        let mut improved = false;
        for dir in &dirs {
            for i in 0..d {
                trial[i] = x[i] + h * dir[i];
            }
            if domain == Domain::Simplex {
                // Snap tiny negatives produced by rounding at the faces.
                for t in trial.iter_mut() {
                    if *t < 0.0 && *t > -1e-15 {
                        *t = 0.0;
                    }
                }
            }
            if !domain.feasible(&trial) {
                continue;
            }
            let ft = f(&trial);
            evals += 1;
            if ft < fx {
                x.copy_from_slice(&trial);
                fx = ft;
                improved = true;
                break;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    SearchResult {
        x,
        value: fx,
        evals,
    }
}

/// Central-difference gradient with step `h`.
pub fn central_gradient<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let xi = x[i];
            xp[i] = xi + h;
            let fp = f(&xp);
            xp[i] = xi - h;
            let fm = f(&xp);
            xp[i] = xi;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian of `f` restricted to the directions `basis`
/// (rows), returned as a dense `k x k` matrix in row-major order.
pub fn directional_hessian<F>(f: F, x: &[f64], basis: &[Vec<f64>], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let k = basis.len();
    let d = x.len();
    let at = |a: f64, u: &[f64], b: f64, v: &[f64]| {
        let p: Vec<f64> = (0..d).map(|i| x[i] + a * u[i] + b * v[i]).collect();
        f(&p)
    };
    let f0 = f(x);
    let mut hess = vec![0.0; k * k];
    for a in 0..k {
        let u = &basis[a];
        let fpp = at(h, u, 0.0, u);
        let fmm = at(-h, u, 0.0, u);
        hess[a * k + a] = (fpp - 2.0 * f0 + fmm) / (h * h);
        for b in (a + 1)..k {
            let v = &basis[b];
            let val = (at(h, u, h, v) - at(h, u, -h, v) - at(-h, u, h, v) + at(-h, u, -h, v))
                / (4.0 * h * h);
            hess[a * k + b] = val;
            hess[b * k + a] = val;
        }
    }
    hess
}

/// An orthonormal basis of `{x in R^m : sum x = 0}` (rows).
pub fn sum_zero_basis(m: usize) -> Vec<Vec<f64>> {
    // Helmert-style contrasts.
    (1..m)
        .map(|k| {
            let norm = ((k * (k + 1)) as f64).sqrt();
            let mut v = vec![0.0; m];
            for item in v.iter_mut().take(k) {
                *item = 1.0 / norm;
            }
            v[k] = -(k as f64) / norm;
            v
        })
        .collect()
}

/// Relative error `|a - b| / max(1, |b|)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
