//! Special functions, weighted quadrature and Gamma sampling used by the
//! physics modules.

pub mod bessel;
pub mod gamma;
pub mod hypergeometric;
pub mod quadrature;
pub mod sampling;

pub use bessel::{bessel_j, bessel_j_all};
pub use gamma::{gamma_p, gamma_q, ln_gamma};
pub use hypergeometric::{pfq_4f3, pfq_4f3_series, PfqParams, SeriesValue};
pub use quadrature::{
    gamma_average, gamma_average_vec, integrate_weighted, WeightedIntegral, WeightedIntegralVec,
};
pub use sampling::{gamma_sample, GammaSampler};
