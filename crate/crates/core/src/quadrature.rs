//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use std::collections::BinaryHeap;

use crate::error::BmaError;
use crate::scalar::Scalar;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum number of times any sub-interval may be bisected.
    pub max_depth: u32,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 0.0,
            max_depth: 20,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    /// Default options with the relative tolerance raised to what `T` can
    /// resolve.
    pub fn for_scalar<T: Scalar>() -> Self {
        let floor = 64.0 * T::epsilon().to_f64_lossy();
        let base = Self::default();
        Self { rel_tol: base.rel_tol.max(floor), ..base }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature<T> {
    pub value: T,
    pub abs_error: T,
    pub evaluations: usize,
}

struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
    depth: u32,
}

impl<T: Scalar> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T: Scalar> Eq for Segment<T> {}
impl<T: Scalar> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(std::cmp::Ordering::Equal)
    }
}

fn kronrod_rule<T: Scalar, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half_len * T::lit(XGK[j]);
        let s = f(center - dx) + f(center + dx);
        kronrod += T::lit(WGK[j]) * s;
        if j % 2 == 1 {
            gauss += T::lit(WG[j / 2]) * s;
        }
    }
    (kronrod * half_len, ((kronrod - gauss) * half_len).abs())
}

/// Integrates `f` over `[a, b]`.
///
/// Sub-intervals with the largest error estimate are bisected until the
/// total estimate falls below `max(abs_tol, rel_tol·|I|)`. Fails when the
/// worst interval has already been bisected `max_depth` times or the
/// interval budget is exhausted.
pub fn integrate<T, F>(mut f: F, a: T, b: T, opts: &QuadOptions) -> Result<Quadrature<T>, BmaError>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(BmaError::InvalidInput("integration limits must be finite".into()));
    }
    if a == b {
        return Ok(Quadrature {
            value: T::zero(),
            abs_error: T::zero(),
            evaluations: 0,
        });
    }
    let rel = T::lit(opts.rel_tol);
    let abs = T::lit(opts.abs_tol);
    let mut evaluations = 15;
    let (v, e) = kronrod_rule(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e, depth: 0 });
    let mut total = v;
    let mut total_err = e;

    loop {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(BmaError::Integration("integrand produced a non-finite value".into()));
        }
        let target = abs.max(rel * total.abs());
        if total_err <= target {
            break;
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        if worst.depth >= opts.max_depth || heap.len() + 2 > opts.max_intervals {
            return Err(BmaError::Integration(format!(
                "error estimate {:e} above target {:e} after {} evaluations",
                total_err.to_f64_lossy(),
                target.to_f64_lossy(),
                evaluations
            )));
        }
        let mid = T::lit(0.5) * (worst.a + worst.b);
        let (v1, e1) = kronrod_rule(&mut f, worst.a, mid);
        let (v2, e2) = kronrod_rule(&mut f, mid, worst.b);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1, depth: worst.depth + 1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2, depth: worst.depth + 1 });
    }

    // Re-sum to shed accumulated cancellation from the running updates.
    let value = heap.iter().map(|s| s.value).sum();
    let abs_error = heap.iter().map(|s| s.error).sum();
    Ok(Quadrature { value, abs_error, evaluations })
}
