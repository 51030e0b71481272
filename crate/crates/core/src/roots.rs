//! Bracketed one-dimensional root finding shared by the solvers.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Bracketed<T> {
    pub root: T,
    /// Width of the final bracket.
    pub width: T,
    pub iterations: usize,
}

/// Bisection on `[lo, hi]`, where `f(lo)` and `f(hi)` have opposite signs
/// (either orientation). Stops once the bracket is narrower than
/// `abs_tol + rel_tol * |mid|`, when the midpoint can no longer be split in
/// floating point, or after `max_iter` halvings.
pub(crate) fn bisect<T: Scalar>(
    mut f: impl FnMut(T) -> T,
    mut lo: T,
    mut hi: T,
    abs_tol: T,
    rel_tol: T,
    max_iter: usize,
) -> Option<Bracketed<T>> {
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo.is_nan() || f_hi.is_nan() {
        return None;
    }
    if f_lo == T::zero() {
        return Some(Bracketed {
            root: lo,
            width: T::zero(),
            iterations: 0,
        });
    }
    if f_hi == T::zero() {
        return Some(Bracketed {
            root: hi,
            width: T::zero(),
            iterations: 0,
        });
    }
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    let increasing = f_lo < T::zero();
    let mut iterations = 0;
    while iterations < max_iter {
        let mid = lo + (hi - lo) * T::half();
        if (hi - lo) <= abs_tol + rel_tol * mid.abs() || mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let fm = f(mid);
        if fm.is_nan() {
            return None;
        }
        if fm == T::zero() {
            return Some(Bracketed {
                root: mid,
                width: T::zero(),
                iterations,
            });
        }
        if (fm < T::zero()) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(Bracketed {
        root: lo + (hi - lo) * T::half(),
        width: hi - lo,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two_both_orientations() {
        let r = bisect(|x: f64| x * x - 2.0, 0.0, 2.0, 0.0, 0.0, 200).unwrap();
        assert!((r.root - 2f64.sqrt()).abs() < 1e-15);
        let r = bisect(|x: f64| 2.0 - x * x, 0.0, 2.0, 1e-10, 0.0, 200).unwrap();
        assert!((r.root - 2f64.sqrt()).abs() < 1e-10);
        assert!(r.width <= 1e-10);
    }

    #[test]
    fn rejects_unbracketed() {
        assert!(bisect(|x: f64| x * x + 1.0, -1.0, 1.0, 0.0, 0.0, 100).is_none());
    }

    #[test]
    fn tiny_roots_resolved_relatively() {
        let r = bisect(|x: f64| x - 1e-30, -1.0, 1.0, 0.0, 1e-12, 500).unwrap();
        assert!((r.root / 1e-30 - 1.0).abs() < 1e-11);
    }
}
