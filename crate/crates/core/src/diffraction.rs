//! Momentum distribution of ground-state atoms after a standing light wave,
//! ideal and averaged over a Gamma-distributed interaction time.
//!
//! Momenta are in units of ħk, times in the dimensionless form T = 2Ω²t/Δ,
//! and the decoherence scale is 𝒯 = 2Ω²τ/Δ. The initial momentum amplitude
//! is b̃(p, 0) = (ε/π)^{1/4} e^{−εp²/2}; the averaged distribution is
//!
//!   w̄(p) = Σ_{n,m} i^{n−m} I_{n,m}(T) b̃(p−2n, 0) b̃(p−2m, 0),
//!
//! where I_{n,m} is the Gamma-law average of J_n(T′/4) J_m(T′/4).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::specfun::{
    bessel_j_all, gamma_average, gamma_average_vec, gamma_q, ln_gamma, pfq_4f3_series, GammaSampler,
    PfqParams,
};

/// Default momentum spacing of generated grids.
pub const DEFAULT_STEP: f64 = 0.01;
/// Default absolute tolerance for the I_{n,m} quadratures.
pub const DEFAULT_TOL: f64 = 1e-11;
/// Smallest Monte Carlo sample count accepted.
pub const MIN_MC_SAMPLES: usize = 10_000;
/// Gamma-law tail mass ignored when sizing the comb truncation.
const ORDER_TAIL_MASS: f64 = 1e-16;
/// Amplitude products below this are dropped from the double sum.
const NEGLIGIBLE_AMPLITUDE: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffractionParams {
    t: f64,
    cal_t: f64,
    epsilon: f64,
    n_max: usize,
}

impl DiffractionParams {
    /// Interaction time T, decoherence scale 𝒯 (0 for the ideal case) and
    /// packet spread ε, with the default truncation order.
    pub fn new(t: f64, cal_t: f64, epsilon: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("T must be finite and nonnegative, got {t}")));
        }
        if !(cal_t >= 0.0) || !cal_t.is_finite() {
            return Err(Error::Domain(format!("calT must be finite and nonnegative, got {cal_t}")));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self {
            t,
            cal_t,
            epsilon,
            n_max: default_n_max(t, cal_t)?,
        })
    }

    pub fn with_n_max(mut self, n_max: usize) -> Result<Self> {
        if n_max == 0 || n_max > crate::specfun::bessel::MAX_ORDER {
            return Err(Error::Domain(format!("n_max out of range: {n_max}")));
        }
        self.n_max = n_max;
        Ok(self)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn cal_t(&self) -> f64 {
        self.cal_t
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Peaks spaced 2ħk apart only separate for ε > 1.
    pub fn resolution_warning(&self) -> Option<String> {
        (self.epsilon <= 1.0).then(|| {
            format!(
                "peaks unresolved (requires epsilon > 1, got {})",
                self.epsilon
            )
        })
    }
}

/// Truncation order for the comb: ceil(x/4) + 20 where x is T for the ideal
/// case and the 1 − 10⁻¹⁶ quantile of the Gamma-distributed time otherwise.
pub fn default_n_max(t: f64, cal_t: f64) -> Result<usize> {
    let mut x = t;
    if cal_t > 0.0 && t > 0.0 {
        let shape = t / cal_t;
        let step = shape.sqrt() + 1.0;
        let mut s = shape + step;
        while gamma_q(shape, s)? > ORDER_TAIL_MASS {
            s += step;
        }
        x = x.max(s * cal_t);
    }
    Ok((x / 4.0).ceil() as usize + 20)
}

/// Strictly increasing momentum sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGrid {
    points: Vec<f64>,
}

impl MomentumGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("grid must be non-empty and finite".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("grid must be strictly increasing".into()));
        }
        Ok(Self { points })
    }

    /// Points k·step for |k·step| ≤ half_width, symmetric about 0.
    pub fn symmetric(half_width: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(half_width >= 0.0) || !half_width.is_finite() {
            return Err(Error::Domain("symmetric grid needs step > 0 and half_width >= 0".into()));
        }
        let k = (half_width / step + 1e-9).floor() as i64;
        Self::new((-k..=k).map(|i| i as f64 * step).collect())
    }

    /// [p_min, p_max] sampled at `step`, with p_min + k·step points.
    pub fn range(p_min: f64, p_max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(p_max >= p_min) {
            return Err(Error::Domain("range grid needs step > 0 and p_max >= p_min".into()));
        }
        let k = ((p_max - p_min) / step + 1e-9).floor() as i64;
        Self::new((0..=k).map(|i| p_min + i as f64 * step).collect())
    }

    /// ±(2 n_max + 6) at the default spacing.
    pub fn default_for(params: &DiffractionParams) -> Result<Self> {
        Self::symmetric(2.0 * params.n_max() as f64 + 6.0, DEFAULT_STEP)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumDistribution {
    grid: MomentumGrid,
    values: Vec<f64>,
    error_estimate: f64,
}

impl MomentumDistribution {
    fn from_raw(grid: MomentumGrid, mut values: Vec<f64>, error_estimate: f64) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < -1e-10) {
            return Err(Error::InvalidState(format!("distribution value {v:e} is negative")));
        }
        for v in values.iter_mut() {
            *v = v.max(0.0);
        }
        Ok(Self {
            grid,
            values,
            error_estimate,
        })
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Bound on the pointwise error from the I_{n,m} evaluation.
    pub fn error_estimate(&self) -> f64 {
        self.error_estimate
    }

    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .points
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(p, w)| 0.5 * (p[1] - p[0]) * (w[0] + w[1]))
            .sum()
    }

    /// Value at the grid point closest to p.
    pub fn value_near(&self, p: f64) -> f64 {
        let idx = self
            .grid
            .points
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - p).abs().total_cmp(&(b.1 - p).abs()))
            .map(|(i, _)| i)
            .expect("grid is non-empty");
        self.values[idx]
    }
}

/// b̃(p, 0) = (ε/π)^{1/4} e^{−εp²/2}, unit-normalized.
pub fn initial_amplitude(p: f64, epsilon: f64) -> f64 {
    (epsilon / std::f64::consts::PI).powf(0.25) * (-0.5 * epsilon * p * p).exp()
}

/// Half-width beyond which b̃ is below [`NEGLIGIBLE_AMPLITUDE`].
fn amplitude_radius(epsilon: f64) -> f64 {
    let lead = 0.25 * (epsilon / std::f64::consts::PI).ln();
    let r2 = 2.0 * (lead - NEGLIGIBLE_AMPLITUDE.ln()) / epsilon;
    r2.max(0.0).sqrt()
}

/// Orders n ∈ [−n_max, n_max] whose image b̃(p − 2n) is not negligible.
fn active_orders(p: f64, radius: f64, n_max: usize) -> std::ops::RangeInclusive<i64> {
    let n = n_max as i64;
    let lo = ((p - radius) / 2.0).ceil() as i64;
    let hi = ((p + radius) / 2.0).floor() as i64;
    lo.max(-n)..=hi.min(n)
}

fn i_pow(n: i64) -> Complex64 {
    match n.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn signed(values: &[f64], n: i64) -> f64 {
    let v = values[n.unsigned_abs() as usize];
    if n < 0 && n % 2 != 0 {
        -v
    } else {
        v
    }
}

/// Ideal comb: Bessel coefficients J_n(T/4), n = 0..=n_max.
#[derive(Debug, Clone)]
pub struct IdealComb {
    params: DiffractionParams,
    coeffs: Vec<f64>,
}

impl IdealComb {
    pub fn new(params: &DiffractionParams) -> Result<Self> {
        Ok(Self {
            params: *params,
            coeffs: bessel_j_all(params.n_max(), params.t() / 4.0)?,
        })
    }

    /// Σ_n i^n J_n(T/4) b̃(p − 2n, 0), global phase dropped.
    pub fn amplitude(&self, p: f64) -> Complex64 {
        let eps = self.params.epsilon();
        let radius = amplitude_radius(eps);
        active_orders(p, radius, self.params.n_max())
            .map(|n| i_pow(n) * signed(&self.coeffs, n) * initial_amplitude(p - 2.0 * n as f64, eps))
            .sum()
    }

    /// Σ_{|n| > n_max} J_n(T/4)²: probability lost to truncation.
    pub fn truncation_error(&self) -> f64 {
        let kept = self.coeffs[0].powi(2) + 2.0 * self.coeffs[1..].iter().map(|c| c * c).sum::<f64>();
        (1.0 - kept).max(0.0)
    }
}

pub fn ideal_amplitude(p: f64, params: &DiffractionParams) -> Result<Complex64> {
    Ok(IdealComb::new(params)?.amplitude(p))
}

/// w(p) = |b̃(p, T)|².
pub fn ideal_distribution(grid: &MomentumGrid, params: &DiffractionParams) -> Result<MomentumDistribution> {
    let comb = IdealComb::new(params)?;
    let values = grid.points().iter().map(|&p| comb.amplitude(p).norm_sqr()).collect();
    MomentumDistribution::from_raw(grid.clone(), values, comb.truncation_error())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InmMethod {
    Quadrature,
    ClosedForm,
    MonteCarlo,
}

impl InmMethod {
    pub fn name(&self) -> &'static str {
        match self {
            InmMethod::Quadrature => "quadrature",
            InmMethod::ClosedForm => "closed-form",
            InmMethod::MonteCarlo => "monte-carlo",
        }
    }
}

/// One I_{n,m}(T) evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InmValue {
    pub n: i64,
    pub m: i64,
    pub value: f64,
    pub method: InmMethod,
    /// Absolute error bound for deterministic methods, standard error for Monte Carlo.
    pub error_estimate: f64,
}

/// (−1)^{(|n|−n+|m|−m)/2}: the sign relating I_{n,m} to I_{|n|,|m|}.
pub fn index_sign(n: i64, m: i64) -> f64 {
    let k = (n.abs() - n + m.abs() - m) / 2;
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_times(t: f64, cal_t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() || !(cal_t > 0.0) || !cal_t.is_finite() {
        return Err(Error::Domain(format!(
            "I_nm needs T > 0 and calT > 0, got T = {t}, calT = {cal_t}"
        )));
    }
    Ok(())
}

/// I_{n,m}(T) = E[J_n(s𝒯/4) J_m(s𝒯/4)] for s ~ Γ(T/𝒯, 1), by adaptive quadrature.
pub fn inm_quadrature(n: i64, m: i64, t: f64, cal_t: f64, tol: f64) -> Result<InmValue> {
    check_times(t, cal_t)?;
    let (a, b) = (n.unsigned_abs() as usize, m.unsigned_abs() as usize);
    let top = a.max(b);
    let r = gamma_average(
        |s| {
            let j = bessel_j_all(top, 0.25 * s * cal_t).expect("finite argument");
            j[a] * j[b]
        },
        t / cal_t,
        1.0,
        tol,
    )?;
    Ok(InmValue {
        n,
        m,
        value: index_sign(n, m) * r.value,
        method: InmMethod::Quadrature,
        error_estimate: r.error_estimate,
    })
}

/// Parameters of the ₄F₃ in the closed form of I_{|n|,|m|}.
pub fn closed_form_params(a: usize, b: usize, t: f64, cal_t: f64) -> PfqParams {
    let half_n = 0.5 * (a + b) as f64;
    let half_shape = 0.5 * t / cal_t;
    PfqParams {
        u: [
            0.5 + half_n,
            1.0 + half_n,
            half_n + half_shape,
            0.5 + half_n + half_shape,
        ],
        v: [1.0 + a as f64, 1.0 + b as f64, 1.0 + (a + b) as f64],
        z: -0.25 * cal_t * cal_t,
    }
}

/// Closed form through ₄F₃ at z = −𝒯²/4; only valid for 𝒯 < 2.
pub fn inm_closed_form(n: i64, m: i64, t: f64, cal_t: f64) -> Result<InmValue> {
    check_times(t, cal_t)?;
    if cal_t >= 2.0 {
        return Err(Error::ConvergenceDomain(0.25 * cal_t * cal_t));
    }
    let (a, b) = (n.unsigned_abs() as usize, m.unsigned_abs() as usize);
    let big_n = (a + b) as f64;
    let shape = t / cal_t;
    let ln_pref = big_n * cal_t.ln() + ln_gamma(big_n + shape)?
        - 3.0 * big_n * std::f64::consts::LN_2
        - ln_gamma(1.0 + a as f64)?
        - ln_gamma(1.0 + b as f64)?
        - ln_gamma(shape)?;
    let pref = ln_pref.exp();
    let series = pfq_4f3_series(&closed_form_params(a, b, t, cal_t))?;
    Ok(InmValue {
        n,
        m,
        value: index_sign(n, m) * pref * series.value,
        method: InmMethod::ClosedForm,
        error_estimate: pref * series.error_estimate + 4.0 * f64::EPSILON * (pref * series.value).abs(),
    })
}

/// Sample mean of J_n(T′/4) J_m(T′/4) over T′ ~ Γ(T/𝒯, 𝒯).
pub fn inm_monte_carlo<R: Rng + ?Sized>(
    n: i64,
    m: i64,
    t: f64,
    cal_t: f64,
    samples: usize,
    rng: &mut R,
) -> Result<InmValue> {
    check_times(t, cal_t)?;
    if samples < MIN_MC_SAMPLES {
        return Err(Error::Domain(format!(
            "Monte Carlo needs at least {MIN_MC_SAMPLES} samples, got {samples}"
        )));
    }
    let sampler = GammaSampler::new(t / cal_t, cal_t)?;
    let (a, b) = (n.unsigned_abs() as usize, m.unsigned_abs() as usize);
    let top = a.max(b);
    let mut stats = RunningMoments::default();
    for _ in 0..samples {
        let j = bessel_j_all(top, 0.25 * sampler.sample(rng))?;
        stats.push(j[a] * j[b]);
    }
    let sign = index_sign(n, m);
    Ok(InmValue {
        n,
        m,
        value: sign * stats.mean(),
        method: InmMethod::MonteCarlo,
        error_estimate: stats.standard_error(),
    })
}

#[derive(Debug, Default, Clone, Copy)]
struct RunningMoments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn mean(&self) -> f64 {
        self.mean
    }

    fn standard_error(&self) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
    }
}

/// I_{|n|,|m|} for a set of order pairs, indexed by nonnegative orders.
#[derive(Debug, Clone, PartialEq)]
pub struct InmTable {
    n_max: usize,
    method: InmMethod,
    // row-major (n_max+1)², NaN where not computed; symmetric
    values: Vec<f64>,
    errors: Vec<f64>,
}

impl InmTable {
    fn empty(n_max: usize, method: InmMethod) -> Self {
        let len = (n_max + 1) * (n_max + 1);
        Self {
            n_max,
            method,
            values: vec![f64::NAN; len],
            errors: vec![f64::NAN; len],
        }
    }

    fn set(&mut self, a: usize, b: usize, value: f64, error: f64) {
        let w = self.n_max + 1;
        for (i, j) in [(a, b), (b, a)] {
            self.values[i * w + j] = value;
            self.errors[i * w + j] = error;
        }
    }

    /// Signed I_{n,m}; `None` if the pair was not tabulated.
    pub fn get(&self, n: i64, m: i64) -> Option<f64> {
        let (a, b) = (n.unsigned_abs() as usize, m.unsigned_abs() as usize);
        if a > self.n_max || b > self.n_max {
            return None;
        }
        let v = self.values[a * (self.n_max + 1) + b];
        (!v.is_nan()).then(|| index_sign(n, m) * v)
    }

    pub fn error(&self, n: i64, m: i64) -> Option<f64> {
        let (a, b) = (n.unsigned_abs() as usize, m.unsigned_abs() as usize);
        if a > self.n_max || b > self.n_max {
            return None;
        }
        let e = self.errors[a * (self.n_max + 1) + b];
        (!e.is_nan()).then_some(e)
    }

    pub fn method(&self) -> InmMethod {
        self.method
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Largest error estimate over the tabulated entries.
    pub fn max_error(&self) -> f64 {
        self.errors.iter().filter(|e| !e.is_nan()).fold(0.0, |a, &e| a.max(e))
    }

    /// All pairs a ≤ b with a, b ≤ n_max.
    pub fn all_pairs(n_max: usize) -> Vec<(usize, usize)> {
        (0..=n_max).flat_map(|a| (a..=n_max).map(move |b| (a, b))).collect()
    }

    /// One vector quadrature sharing a Bessel sweep per node.
    pub fn quadrature(t: f64, cal_t: f64, n_max: usize, pairs: &[(usize, usize)], tol: f64) -> Result<Self> {
        check_times(t, cal_t)?;
        let r = gamma_average_vec(
            |s, out: &mut [f64]| {
                let j = bessel_j_all(n_max, 0.25 * s * cal_t).expect("finite argument");
                for (o, &(a, b)) in out.iter_mut().zip(pairs) {
                    *o = j[a] * j[b];
                }
            },
            pairs.len(),
            t / cal_t,
            1.0,
            tol,
        )?;
        let mut table = Self::empty(n_max, InmMethod::Quadrature);
        for (&(a, b), &v) in pairs.iter().zip(&r.values) {
            table.set(a, b, v, r.error_estimate);
        }
        Ok(table)
    }

    pub fn closed_form(t: f64, cal_t: f64, n_max: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut table = Self::empty(n_max, InmMethod::ClosedForm);
        for &(a, b) in pairs {
            let v = inm_closed_form(a as i64, b as i64, t, cal_t)?;
            table.set(a, b, v.value, v.error_estimate);
        }
        Ok(table)
    }

    /// Every pair is estimated from the same `samples` draws of one stream
    /// seeded with `seed`.
    pub fn monte_carlo(
        t: f64,
        cal_t: f64,
        n_max: usize,
        pairs: &[(usize, usize)],
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        check_times(t, cal_t)?;
        if samples < MIN_MC_SAMPLES {
            return Err(Error::Domain(format!(
                "Monte Carlo needs at least {MIN_MC_SAMPLES} samples, got {samples}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sampler = GammaSampler::new(t / cal_t, cal_t)?;
        let top = pairs.iter().map(|&(a, b)| a.max(b)).max().unwrap_or(0);
        let mut stats = vec![RunningMoments::default(); pairs.len()];
        for _ in 0..samples {
            let j = bessel_j_all(top, 0.25 * sampler.sample(&mut rng))?;
            for (s, &(a, b)) in stats.iter_mut().zip(pairs) {
                s.push(j[a] * j[b]);
            }
        }
        let mut table = Self::empty(n_max, InmMethod::MonteCarlo);
        for (s, &(a, b)) in stats.iter().zip(pairs) {
            table.set(a, b, s.mean(), s.standard_error());
        }
        Ok(table)
    }
}

/// How the averaged distribution evaluates I_{n,m}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AveragingMethod {
    Quadrature { tol: f64 },
    ClosedForm,
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for AveragingMethod {
    fn default() -> Self {
        AveragingMethod::Quadrature { tol: DEFAULT_TOL }
    }
}

/// Nonnegative-order pairs needed by the double sum: signed pairs (n, m)
/// whose images overlap somewhere, i.e. |n − m| ≤ radius.
pub fn required_pairs(params: &DiffractionParams) -> Vec<(usize, usize)> {
    let n = params.n_max() as i64;
    let band = amplitude_radius(params.epsilon()).floor() as i64;
    let mut pairs = Vec::new();
    for a in 0..=n {
        for b in a..=n {
            // signed representatives: (a, b) and (−a, b)
            if b - a <= band || a + b <= band {
                pairs.push((a as usize, b as usize));
            }
        }
    }
    pairs
}

/// Builds the I table for `params` with the chosen method.
pub fn inm_table(params: &DiffractionParams, method: &AveragingMethod) -> Result<InmTable> {
    let pairs = required_pairs(params);
    let (t, cal_t, n_max) = (params.t(), params.cal_t(), params.n_max());
    match *method {
        AveragingMethod::Quadrature { tol } => InmTable::quadrature(t, cal_t, n_max, &pairs, tol),
        AveragingMethod::ClosedForm => {
            if cal_t >= 2.0 {
                return Err(Error::Config(format!(
                    "closed form needs calT < 2 (series argument -calT²/4 inside the unit disk), got {cal_t}"
                )));
            }
            InmTable::closed_form(t, cal_t, n_max, &pairs)
        }
        AveragingMethod::MonteCarlo { samples, seed } => {
            InmTable::monte_carlo(t, cal_t, n_max, &pairs, samples, seed)
        }
    }
}

/// w̄ on `grid` from a precomputed table.
pub fn averaged_from_table(
    grid: &MomentumGrid,
    params: &DiffractionParams,
    table: &InmTable,
) -> Result<MomentumDistribution> {
    let eps = params.epsilon();
    let radius = amplitude_radius(eps);
    let mut values = Vec::with_capacity(grid.len());
    let mut worst_imag = 0.0f64;
    let mut error = 0.0f64;
    let table_error = table.max_error();
    for &p in grid.points() {
        let orders: Vec<(i64, f64)> = active_orders(p, radius, params.n_max())
            .map(|n| (n, initial_amplitude(p - 2.0 * n as f64, eps)))
            .collect();
        let mut sum = Complex64::new(0.0, 0.0);
        let mut abs_weight = 0.0;
        for &(n, bn) in &orders {
            for &(m, bm) in &orders {
                let inm = table.get(n, m).ok_or_else(|| {
                    Error::InvalidState(format!("I table lacks entry ({n}, {m})"))
                })?;
                sum += i_pow(n - m) * (inm * bn * bm);
                abs_weight += (bn * bm).abs();
            }
        }
        worst_imag = worst_imag.max(sum.im.abs());
        error = error.max(abs_weight * table_error);
        values.push(sum.re);
    }
    if worst_imag > 1e-10 {
        return Err(Error::InvalidState(format!(
            "averaged distribution has imaginary residue {worst_imag:e}"
        )));
    }
    MomentumDistribution::from_raw(grid.clone(), values, error)
}

/// w̄(p, T) averaged over the Gamma time law; 𝒯 = 0 gives the ideal comb.
pub fn averaged_distribution(
    grid: &MomentumGrid,
    params: &DiffractionParams,
    method: &AveragingMethod,
) -> Result<MomentumDistribution> {
    if params.cal_t() == 0.0 || params.t() == 0.0 {
        if matches!(method, AveragingMethod::ClosedForm) && params.cal_t() >= 2.0 {
            return Err(Error::Config("closed form needs calT < 2".into()));
        }
        return ideal_distribution(grid, params);
    }
    let table = inm_table(params, method)?;
    averaged_from_table(grid, params, &table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::bessel_j;
    use approx::assert_relative_eq;

    fn fig2(cal_t: f64) -> DiffractionParams {
        DiffractionParams::new(10.0, cal_t, 10.0).unwrap()
    }

    #[test]
    fn initial_amplitude_values() {
        let peak = (10.0 / std::f64::consts::PI).powf(0.25);
        assert_relative_eq!(initial_amplitude(0.0, 10.0), peak, max_relative = 1e-15);
        assert!((peak - 1.335_71).abs() < 1e-5);
        assert_relative_eq!(initial_amplitude(2.0, 10.0), peak * (-20.0f64).exp(), max_relative = 1e-14);
        for eps in [1.0, 10.0, 100.0] {
            let grid = MomentumGrid::symmetric(12.0, 0.001).unwrap();
            let norm: f64 = grid.points().windows(2)
                .map(|w| 0.5 * (w[1] - w[0]) * (initial_amplitude(w[0], eps).powi(2) + initial_amplitude(w[1], eps).powi(2)))
                .sum();
            assert!((norm - 1.0).abs() < 1e-10, "eps {eps}: {norm}");
        }
    }

    #[test]
    fn default_orders() {
        assert_eq!(default_n_max(10.0, 0.0).unwrap(), 23);
        assert!(default_n_max(10.0, 10.0).unwrap() > 23);
        assert!(default_n_max(10.0, 1e-3).unwrap() <= 25);
    }

    #[test]
    fn grid_construction() {
        let g = MomentumGrid::symmetric(1.0, 0.25).unwrap();
        assert_eq!(g.points(), &[-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(MomentumGrid::new(vec![0.0, 0.0]).is_err());
        assert!(MomentumGrid::new(vec![]).is_err());
        assert_eq!(MomentumGrid::range(-1.0, 1.0, 0.5).unwrap().len(), 5);
    }

    #[test]
    fn ideal_at_zero_time_is_initial_packet() {
        let params = DiffractionParams::new(0.0, 0.0, 10.0).unwrap();
        for p in [-0.3, 0.0, 0.1, 2.0] {
            let a = ideal_amplitude(p, &params).unwrap();
            assert_relative_eq!(a.re, initial_amplitude(p, 10.0), max_relative = 1e-14);
            assert_eq!(a.im, 0.0);
        }
    }

    #[test]
    fn ideal_peak_values() {
        let params = fig2(0.0);
        let comb = IdealComb::new(&params).unwrap();
        let scale = (10.0 / std::f64::consts::PI).sqrt();
        let w0 = comb.amplitude(0.0).norm_sqr();
        assert_relative_eq!(w0, bessel_j(0, 2.5).unwrap().powi(2) * scale, max_relative = 1e-12);
        assert!((w0 - 0.004_177_0).abs() < 1e-6);
        let w2 = comb.amplitude(2.0).norm_sqr();
        assert_relative_eq!(w2, bessel_j(1, 2.5).unwrap().powi(2) * scale, max_relative = 1e-12);
        assert!((w2 - 0.440_87).abs() < 1e-4);
    }

    #[test]
    fn ideal_matches_double_sum() {
        let params = fig2(0.0).with_n_max(40).unwrap();
        let comb = IdealComb::new(&params).unwrap();
        let j: Vec<f64> = (-40..=40).map(|n| bessel_j(n, 2.5).unwrap()).collect();
        for p in [-3.1, -0.2, 0.0, 0.7, 4.0] {
            let mut sum = Complex64::new(0.0, 0.0);
            for n in -40i64..=40 {
                for m in -40i64..=40 {
                    sum += i_pow(n - m)
                        * (j[(n + 40) as usize] * j[(m + 40) as usize]
                            * initial_amplitude(p - 2.0 * n as f64, 10.0)
                            * initial_amplitude(p - 2.0 * m as f64, 10.0));
                }
            }
            assert!(sum.im.abs() < 1e-12);
            assert!((sum.re - comb.amplitude(p).norm_sqr()).abs() < 1e-13);
        }
    }

    #[test]
    fn ideal_distribution_normalized_and_even() {
        let params = fig2(0.0);
        let grid = MomentumGrid::default_for(&params).unwrap();
        let w = ideal_distribution(&grid, &params).unwrap();
        assert!((w.integral() - 1.0).abs() < 1e-8);
        let v = w.values();
        for i in 0..v.len() {
            assert!((v[i] - v[v.len() - 1 - i]).abs() < 1e-14);
        }
    }

    #[test]
    fn sign_relation() {
        assert_eq!(index_sign(-1, 0), -1.0);
        assert_eq!(index_sign(-2, 0), 1.0);
        assert_eq!(index_sign(-1, -1), 1.0);
        assert_eq!(index_sign(3, -2), 1.0);
        let i10 = inm_closed_form(1, 0, 5.0, 1.0).unwrap().value;
        assert_eq!(inm_closed_form(-1, 0, 5.0, 1.0).unwrap().value, -i10);
    }

    #[test]
    fn closed_form_parameters_at_origin() {
        let p = closed_form_params(0, 0, 3.0, 1.5);
        assert_eq!(p.u, [0.5, 1.0, 1.0, 1.5]);
        assert_eq!(p.v, [1.0, 1.0, 1.0]);
        assert_eq!(p.z, -0.5625);
    }

    #[test]
    fn golden_inm_values() {
        // 30-digit references
        let q = inm_quadrature(0, 0, 1.0, 1.0, 1e-12).unwrap();
        assert!((q.value - 0.945_006_330_929_758_1).abs() < 1e-10);
        let c = inm_closed_form(0, 0, 1.0, 1.0).unwrap();
        assert!((c.value - q.value).abs() < 1e-8);
        let q = inm_quadrature(0, 0, 10.0, 10.0, 1e-12).unwrap();
        assert!((q.value - 0.378_938_471_536_622_2).abs() < 1e-10);
        let q = inm_quadrature(1, 2, 5.0, 1.8, 1e-12).unwrap();
        assert!((q.value - 0.083_514_295_036_412_68).abs() < 1e-10);
        let c = inm_closed_form(2, 0, 10.0, 0.3).unwrap();
        assert!((c.value + 0.020_992_348_232_332_454).abs() < 1e-10);
    }

    #[test]
    fn closed_form_rejects_large_scale() {
        assert!(matches!(inm_closed_form(0, 0, 10.0, 2.0), Err(Error::ConvergenceDomain(_))));
        assert!(inm_quadrature(0, 0, 0.0, 1.0, 1e-10).is_err());
    }

    #[test]
    fn small_scale_inm_follows_second_order_law() {
        // T′/4 has mean T/4 and variance T𝒯/16, so
        // I_{n,m} − J_n J_m ≈ ½ (T𝒯/16) (J_n J_m)'' at T/4.
        let t = 10.0;
        let x = t / 4.0;
        let prod = |n: i64, m: i64, x: f64| bessel_j(n as i32, x).unwrap() * bessel_j(m as i32, x).unwrap();
        for (n, m) in [(0, 0), (1, 1), (0, 2), (-1, 3)] {
            let h = 1e-3;
            let curv = (prod(n, m, x + h) - 2.0 * prod(n, m, x) + prod(n, m, x - h)) / (h * h);
            let cal_t = 1e-4 * t;
            let q = inm_quadrature(n, m, t, cal_t, 1e-13).unwrap();
            let predicted = 0.5 * t * cal_t / 16.0 * curv;
            let shift = q.value - prod(n, m, x);
            assert!((shift - predicted).abs() < 1e-6, "({n},{m}): {shift} vs {predicted}");
            // the shift vanishes linearly with 𝒯
            let q = inm_quadrature(n, m, t, 1e-7 * t, 1e-13).unwrap();
            assert!((q.value - prod(n, m, x)).abs() < 1e-6);
        }
    }

    #[test]
    fn monte_carlo_is_deterministic_and_close() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            inm_monte_carlo(0, 0, 1.0, 4.0, 20_000, &mut rng).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        let q = inm_quadrature(0, 0, 1.0, 4.0, 1e-12).unwrap();
        assert!((a.value - q.value).abs() < 4.0 * a.error_estimate);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(inm_monte_carlo(0, 0, 1.0, 4.0, 10, &mut rng).is_err());
    }

    #[test]
    fn table_matches_pointwise_quadrature() {
        let pairs = InmTable::all_pairs(4);
        let table = InmTable::quadrature(5.0, 1.0, 4, &pairs, 1e-12).unwrap();
        for n in -4..=4 {
            for m in -4..=4 {
                let q = inm_quadrature(n, m, 5.0, 1.0, 1e-12).unwrap().value;
                assert!((table.get(n, m).unwrap() - q).abs() < 1e-11);
            }
        }
        assert!(table.get(5, 0).is_none());
    }

    #[test]
    fn averaged_zero_scale_is_ideal() {
        let params = fig2(0.0);
        let grid = MomentumGrid::symmetric(10.0, 0.05).unwrap();
        let a = averaged_distribution(&grid, &params, &AveragingMethod::default()).unwrap();
        let b = ideal_distribution(&grid, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn closed_form_method_rejected_for_large_scale() {
        let params = fig2(10.0);
        let grid = MomentumGrid::symmetric(2.0, 0.5).unwrap();
        assert!(matches!(
            averaged_distribution(&grid, &params, &AveragingMethod::ClosedForm),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn averaged_central_peak_at_large_scale() {
        let params = fig2(10.0);
        let grid = MomentumGrid::symmetric(4.0, 0.5).unwrap();
        let w = averaged_distribution(&grid, &params, &AveragingMethod::default()).unwrap();
        let scale = (10.0 / std::f64::consts::PI).sqrt();
        assert!((w.value_near(0.0) - 0.378_938_471_536_622_2 * scale).abs() < 1e-9);
        assert!((w.value_near(0.0) - 0.676_07).abs() < 1e-5);
    }
}
