//! Derivative-free optimizers: Nelder–Mead simplex search and golden-section
//! search.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Converged once the spread of function values across the simplex is at
    /// most this value...
    pub f_tol: f64,
    /// ...and every vertex lies within this distance (∞-norm, relative to
    /// `1 + |x_best|`) of the best vertex.
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 5000,
            f_tol: 1e-10,
            x_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult<T> {
    pub x: Vec<T>,
    pub f: T,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
}

fn sanitize<T: Scalar>(v: T) -> T {
    if v.is_nan() {
        T::infinity()
    } else {
        v
    }
}

/// Minimizes `f` starting from `x0`. The initial simplex is `x0` plus one
/// vertex per coordinate displaced by `steps[j]`. NaN objective values are
/// treated as `+∞`.
pub fn nelder_mead<T, F>(mut f: F, x0: &[T], steps: &[T], opts: &NelderMeadOptions) -> NelderMeadResult<T>
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    let dim = x0.len();
    assert_eq!(steps.len(), dim, "one step per coordinate");
    let (alpha, gamma, rho, sigma) = (T::one(), T::lit(2.0), T::lit(0.5), T::lit(0.5));
    let f_tol = T::lit(opts.f_tol);
    let x_tol = T::lit(opts.x_tol);

    let mut evals = 0usize;
    let mut eval = |x: &[T], evals: &mut usize| {
        *evals += 1;
        sanitize(f(x))
    };

    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(dim + 1);
    let f0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), f0));
    for j in 0..dim {
        let mut x = x0.to_vec();
        x[j] += steps[j];
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }

    let mut iterations = 0usize;
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let (best_x, best_f) = (&simplex[0].0, simplex[0].1);
        let worst_f = simplex[dim].1;
        let scale = T::one() + best_x.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(best_x).map(|(a, b)| (*a - *b).abs()))
            .fold(T::zero(), T::max);
        let spread = if best_f.is_finite() { worst_f - best_f } else { T::infinity() };
        if spread <= f_tol && diameter <= x_tol * scale {
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            break;
        }
        iterations += 1;

        let n_t = T::from_usize_lossy(dim);
        let mut centroid = vec![T::zero(); dim];
        for (x, _) in &simplex[..dim] {
            for (c, &v) in centroid.iter_mut().zip(x) {
                *c += v;
            }
        }
        for c in &mut centroid {
            *c /= n_t;
        }
        let worst = simplex[dim].0.clone();
        let along = |t: T| -> Vec<T> {
            centroid
                .iter()
                .zip(&worst)
                .map(|(&c, &w)| c + t * (c - w))
                .collect()
        };

        let xr = along(alpha);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(gamma);
            let fe = eval(&xe, &mut evals);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst_f {
            let xc = along(rho * alpha);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < fr.min(worst_f) {
            simplex[dim] = (xc, fc);
            continue;
        }
        // Shrink toward the best vertex.
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<T> = best
                .iter()
                .zip(&vertex.0)
                .map(|(&b, &v)| b + sigma * (v - b))
                .collect();
            let fx = eval(&x, &mut evals);
            *vertex = (x, fx);
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, f) = simplex.swap_remove(0);
    NelderMeadResult {
        x,
        f,
        evaluations: evals,
        iterations,
        converged,
    }
}

/// Golden-section search for a maximum of `f` on `[a, b]`, stopping when the
/// bracket is narrower than `tol`. Returns `(argmax, max)`; endpoints are
/// considered too, so the result is never worse than `f(a)` or `f(b)`.
pub fn golden_section_max<T, F>(mut f: F, a: T, b: T, tol: T) -> (T, T)
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = T::lit(0.5) * (lo + hi);
    let mut best = (mid, f(mid));
    for x in [a, b] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}
