//! Bessel functions of the first kind for integer order and real argument.
//!
//! Small arguments use the ascending series. Otherwise Miller's backward
//! recurrence is run from an order well past the turning point and the
//! resulting sequence is normalized with J_0² + 2 Σ_{k≥1} J_k² = 1, whose
//! terms are all positive.

use crate::error::{Error, Result};

use super::gamma::ln_gamma;

/// Largest supported |order|.
pub const MAX_ORDER: usize = 10_000;

const RESCALE_ABOVE: f64 = 1e100;
const RESCALE_BY: f64 = 1e-100;

/// J_n(x) for integer n and finite real x.
pub fn bessel_j(n: i32, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("bessel_j requires finite x, got {x}")));
    }
    let order = n.unsigned_abs() as usize;
    if order > MAX_ORDER {
        return Err(Error::Domain(format!("|n| = {order} exceeds {MAX_ORDER}")));
    }
    // J_{-n}(x) = (-1)^n J_n(x) and J_n(-x) = (-1)^n J_n(x)
    let mut sign = 1.0;
    if n < 0 && order % 2 == 1 {
        sign = -sign;
    }
    if x < 0.0 && order % 2 == 1 {
        sign = -sign;
    }
    let ax = x.abs();
    Ok(sign * bessel_j_nonneg(order, ax))
}

fn bessel_j_nonneg(order: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    if order == 0 && x <= 2.0 {
        return series_sum(0, x);
    }
    let n = order as f64;
    // log of the leading series term (x/2)^n / n!; −∞ when x/2 underflows
    let log_lead = n * (0.5 * x).ln() - ln_gamma(n + 1.0).expect("n + 1 > 0");
    if log_lead < -745.0 && x < n {
        return 0.0;
    }
    if x <= 2.0 || 0.25 * x * x < 0.1 * (n + 1.0) {
        // the product keeps full relative accuracy where exp(log_lead) would not
        let lead = (1..=order).fold(1.0, |acc, k| acc * (0.5 * x / k as f64));
        return series_sum(order, x) * lead;
    }
    miller(order, x)[order]
}

/// Σ_k (−x²/4)^k n! / (k! (n+k)!), the series without its leading factor.
fn series_sum(order: usize, x: f64) -> f64 {
    let q = -0.25 * x * x;
    let n = order as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let k = k as f64;
        term *= q / (k * (k + n));
        sum += term;
        if term.abs() < f64::EPSILON * sum.abs() * 0.5 {
            break;
        }
    }
    sum
}

/// Series for every order up to `top`, leading factors by recurrence so
/// that tiny x underflows to zero instead of overflowing the recurrence.
fn series_all(top: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; top + 1];
    let mut lead = 1.0;
    for (n, v) in out.iter_mut().enumerate() {
        if n > 0 {
            lead *= 0.5 * x / n as f64;
        }
        if lead == 0.0 {
            break;
        }
        *v = lead * series_sum(n, x);
    }
    out
}

/// Starting order for the backward recurrence.
fn miller_start(order: usize, x: f64) -> usize {
    let k0 = (order as f64).max(x.ceil());
    (k0 + 30.0 + 12.0 * k0.cbrt()).ceil() as usize
}

/// J_0(x), ..., J_top(x) for x > 0 by normalized backward recurrence.
fn miller(top: usize, x: f64) -> Vec<f64> {
    let start = miller_start(top, x);
    let mut out = vec![0.0; top + 1];
    let two_over_x = 2.0 / x;
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-30; // J_k, arbitrary scale
    let mut sum_sq = 0.0; // Σ_{j>k} J_j²
    for k in (1..=start).rev() {
        if k <= top {
            out[k] = cur;
        }
        sum_sq += cur * cur;
        let prev = (k as f64) * two_over_x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > RESCALE_ABOVE {
            cur *= RESCALE_BY;
            next *= RESCALE_BY;
            sum_sq *= RESCALE_BY * RESCALE_BY;
            for v in out.iter_mut().skip(k.saturating_sub(1)) {
                *v *= RESCALE_BY;
            }
        }
    }
    out[0] = cur;
    let norm = (cur * cur + 2.0 * sum_sq).sqrt();
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// J_0(x), ..., J_{n_max}(x) in one sweep.
pub fn bessel_j_all(n_max: usize, x: f64) -> Result<Vec<f64>> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("bessel_j_all requires finite x, got {x}")));
    }
    if n_max > MAX_ORDER {
        return Err(Error::Domain(format!("n_max = {n_max} exceeds {MAX_ORDER}")));
    }
    let ax = x.abs();
    let mut out = if ax == 0.0 {
        let mut v = vec![0.0; n_max + 1];
        v[0] = 1.0;
        v
    } else if ax <= 2.0 {
        series_all(n_max, ax)
    } else {
        miller(n_max, ax)
    };
    if x < 0.0 {
        for v in out.iter_mut().skip(1).step_by(2) {
            *v = -*v;
        }
    }
    Ok(out)
}
