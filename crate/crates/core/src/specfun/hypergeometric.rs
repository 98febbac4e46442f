//! Generalized hypergeometric ₄F₃ by direct series summation.

use crate::error::{Error, Result};

const MAX_TERMS: usize = 100_000;

/// Numerator/denominator parameters and argument of ₄F₃(u; v; z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfqParams {
    pub u: [f64; 4],
    pub v: [f64; 3],
    pub z: f64,
}

/// Series value with an estimate of its truncation plus rounding error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub error_estimate: f64,
    pub terms: usize,
}

/// ₄F₃(u; v; z) for |z| < 1.
pub fn pfq_4f3(params: &PfqParams) -> Result<f64> {
    pfq_4f3_series(params).map(|s| s.value)
}

pub fn pfq_4f3_series(params: &PfqParams) -> Result<SeriesValue> {
    let PfqParams { u, v, z } = *params;
    if u.iter().chain(v.iter()).any(|p| !p.is_finite()) || !z.is_finite() {
        return Err(Error::Domain("4F3 parameters must be finite".into()));
    }
    if let Some(bad) = v.iter().find(|&&b| b <= 0.0 && b == b.round()) {
        return Err(Error::Domain(format!(
            "denominator parameter {bad} is a pole of the series"
        )));
    }
    if z.abs() >= 1.0 {
        return Err(Error::ConvergenceDomain(z.abs()));
    }

    let mut term = 1.0;
    let mut sum = 1.0;
    let mut largest = 1.0f64;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        let num: f64 = u.iter().map(|a| a + kf).product();
        let den: f64 = v.iter().map(|b| b + kf).product::<f64>() * (kf + 1.0);
        let ratio = num / den * z;
        term *= ratio;
        sum += term;
        largest = largest.max(term.abs());
        if term == 0.0 || (term.abs() < 1e-16 * sum.abs() && ratio.abs() < 1.0) {
            let rounding = (k + 2) as f64 * f64::EPSILON * largest;
            return Ok(SeriesValue {
                value: sum,
                error_estimate: term.abs() + rounding,
                terms: k + 2,
            });
        }
    }
    Err(Error::NonConvergence {
        terms: MAX_TERMS,
        last_term: term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_argument_is_one() {
        let p = PfqParams {
            u: [0.3, 1.7, 2.0, 5.5],
            v: [1.0, 2.5, 0.5],
            z: 0.0,
        };
        assert_eq!(pfq_4f3(&p).unwrap(), 1.0);
    }

    #[test]
    fn reduces_to_trilog_series() {
        // (1)_k⁴ / ((2)_k³ k!) = 1/(k+1)³
        let p = PfqParams {
            u: [1.0; 4],
            v: [2.0; 3],
            z: 0.5,
        };
        let oracle: f64 = (0..200).map(|k| 0.5f64.powi(k) / ((k + 1) as f64).powi(3)).sum();
        assert_relative_eq!(pfq_4f3(&p).unwrap(), oracle, max_relative = 1e-15);
        let p = PfqParams { z: -0.9, ..p };
        let oracle: f64 = (0..2000).map(|k| (-0.9f64).powi(k) / ((k + 1) as f64).powi(3)).sum();
        assert_relative_eq!(pfq_4f3(&p).unwrap(), oracle, max_relative = 1e-14);
    }

    #[test]
    fn terminating_series() {
        // u1 = -2 stops after the k = 2 term
        let p = PfqParams {
            u: [-2.0, 1.0, 1.0, 1.0],
            v: [1.0, 1.0, 1.0],
            z: 0.5,
        };
        // 1 + (-2)(0.5) + (-2)(-1)/2 (0.25) = 0.25
        assert_relative_eq!(pfq_4f3(&p).unwrap(), 0.25, max_relative = 1e-15);
    }

    #[test]
    fn rejects_outside_disk_and_poles() {
        let mut p = PfqParams {
            u: [1.0; 4],
            v: [2.0; 3],
            z: 1.0,
        };
        assert!(matches!(pfq_4f3(&p), Err(Error::ConvergenceDomain(_))));
        p.z = -2.5;
        assert!(matches!(pfq_4f3(&p), Err(Error::ConvergenceDomain(_))));
        p.z = 0.1;
        p.v[1] = -3.0;
        assert!(matches!(pfq_4f3(&p), Err(Error::Domain(_))));
        p.v[1] = 0.0;
        assert!(matches!(pfq_4f3(&p), Err(Error::Domain(_))));
    }
}
