//! Adaptive Gauss–Legendre quadrature.

use std::cell::RefCell;

use crate::error::{Error, Result};

const NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    /// Maximum number of panels the interval may be split into.
    pub max_panels: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-12,
            rel: 1e-12,
            max_panels: 1 << 14,
        }
    }
}

/// Fixed 8-point rule on `[a, b]`; exact for polynomials of degree <= 15.
pub fn gauss8<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = 0.0;
    for (x, w) in NODES.iter().zip(WEIGHTS.iter()) {
        sum += w * (f(mid - half * x) + f(mid + half * x));
    }
    half * sum
}

/// Integrates `f` over `[a, b]`, bisecting panels until the one-panel and
/// two-panel estimates agree within the tolerance share of each panel.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate(f, b, a, tol).map(|v| -v);
    }
    let total_len = b - a;
    let whole = gauss8(&f, a, b);
    // Tolerance is split in proportion to panel length.
    let mut stack = vec![(a, b, whole)];
    let mut result = 0.0;
    let mut err_sum = 0.0;
    let mut panels = 1usize;
    let scale = whole.abs();
    while let Some((lo, hi, est)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = gauss8(&f, lo, mid);
        let right = gauss8(&f, mid, hi);
        let refined = left + right;
        let diff = (refined - est).abs();
        let share = (hi - lo) / total_len;
        let allowed = tol.abs.max(tol.rel * scale.max(refined.abs())) * share;
        if diff <= allowed || mid <= lo || mid >= hi {
            result += refined;
            err_sum += diff;
            continue;
        }
        panels += 1;
        if panels > tol.max_panels {
            return Err(Error::Quadrature {
                a,
                b,
                estimate: result + refined,
                error_estimate: err_sum + diff,
            });
        }
        stack.push((mid, hi, right));
        stack.push((lo, mid, left));
    }
    if !result.is_finite() {
        return Err(Error::Quadrature {
            a,
            b,
            estimate: result,
            error_estimate: f64::INFINITY,
        });
    }
    Ok(result)
}

/// Iterated integral over the rectangle `[a1, b1] x [a2, b2]`.
pub fn integrate_rect<F: Fn(f64, f64) -> f64>(
    f: F,
    (a1, b1): (f64, f64),
    (a2, b2): (f64, f64),
    tol: Tolerance,
) -> Result<f64> {
    let inner_err: RefCell<Option<Error>> = RefCell::new(None);
    let outer = integrate(
        |x1| match integrate(|x2| f(x1, x2), a2, b2, tol) {
            Ok(v) => v,
            Err(e) => {
                inner_err.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        a1,
        b1,
        tol,
    );
    match inner_err.into_inner() {
        Some(e) => Err(e),
        None => outer,
    }
}
