//! Bessel function of the first kind (order zero) and bracketed root finding.

use crate::error::{Error, Result};

/// Largest argument accepted by the power series.
pub const J0_SERIES_LIMIT: f64 = 12.0;

/// First positive zero of `J0`.
pub const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

/// First positive zero of `J1`, where `J0` attains its first minimum.
pub const J1_FIRST_ZERO: f64 = 3.831_705_970_207_512_3;

/// `J0(x)` by its ascending power series, `sum (-1)^k (x^2/4)^k / (k!)^2`.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > J0_SERIES_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "J0 series evaluated only for |x| <= {J0_SERIES_LIMIT}, got {x}"
        )));
    }
    let q = -0.25 * x * x;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut k = 0.0f64;
    loop {
        k += 1.0;
        term *= q / (k * k);
        sum += term;
        if term.abs() <= 1e-16 * sum.abs().max(1e-16) || k > 200.0 {
            break;
        }
    }
    Ok(sum)
}

/// Plain bisection on `[lo, hi]` until `|f(x)| <= tol`.
///
/// `f(lo)` and `f(hi)` must differ in sign (or one of them must already be within `tol`).
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, tol: f64, what: &str) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a)?;
    let fb = f(b)?;
    if fa.abs() <= tol {
        return Ok(a);
    }
    if fb.abs() <= tol {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::NoSolution {
            what: what.to_string(),
            lo,
            hi,
        });
    }
    loop {
        let mid = 0.5 * (a + b);
        let fm = f(mid)?;
        if fm.abs() <= tol {
            return Ok(mid);
        }
        if mid <= a || mid >= b {
            // interval exhausted at machine resolution
            return Err(Error::NoSolution {
                what: format!("{what} (residual {:e} above tolerance {tol:e})", fm.abs()),
                lo,
                hi,
            });
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
}

/// Smallest `x >= 0` with `J0(x) = target`, restricted to the first monotone arch `[0, j_{1,1}]`.
pub fn solve_bessel_ratio(target: f64) -> Result<f64> {
    if !target.is_finite() || target > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "Bessel target {target} exceeds J0(0) = 1"
        )));
    }
    if target == 1.0 {
        return Ok(0.0);
    }
    let floor = bessel_j0(J1_FIRST_ZERO)?;
    if target < floor {
        return Err(Error::NoSolution {
            what: format!("J0(x) = {target} on the first arch (minimum {floor})"),
            lo: 0.0,
            hi: J1_FIRST_ZERO,
        });
    }
    bisect(
        |x| Ok(bessel_j0(x)? - target),
        0.0,
        J1_FIRST_ZERO,
        1e-14,
        "J0(x) = target",
    )
}
