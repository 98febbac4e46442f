//! Adaptive Gauss–Kronrod integration against the Gamma weight s^α e^{-s}.
//!
//! The semi-infinite range is cut to [s_lo, s_hi] where the discarded weight
//! mass, bounded with the regularized incomplete gamma functions and the
//! caller's sup|f|, stays below a tenth of the requested tolerance. For
//! α < 0 the substitution σ = s^{1+α} removes the endpoint singularity.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

use super::gamma::{gamma_p, gamma_q, ln_gamma};

// Kronrod abscissae on [0, 1], Gauss nodes at the odd indices.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// weights of the Gauss nodes XGK[1], XGK[3], ..., XGK[9]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Default cap on the number of panels in one adaptive integration.
pub const MAX_PANELS: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedIntegral {
    pub value: f64,
    /// Quadrature error estimate plus the tail bound.
    pub error_estimate: f64,
    pub s_max: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedIntegralVec {
    pub values: Vec<f64>,
    /// Largest per-component error estimate, tail bound included.
    pub error_estimate: f64,
    pub s_max: f64,
    pub panels: usize,
}

/// ∫₀^∞ s^α e^{-s} f(s) ds for α > -1, with |f| ≤ `f_bound` on the tail.
pub fn integrate_weighted<F>(f: F, alpha: f64, f_bound: f64, tol: f64) -> Result<WeightedIntegral>
where
    F: Fn(f64) -> f64,
{
    if !(alpha > -1.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must exceed -1, got {alpha}")));
    }
    let norm = ln_gamma(alpha + 1.0)?.exp();
    let avg = gamma_average(f, alpha + 1.0, f_bound, tol / norm)?;
    Ok(WeightedIntegral {
        value: avg.value * norm,
        error_estimate: avg.error_estimate * norm,
        ..avg
    })
}

/// E[f(S)] for S ~ Γ(shape, 1), i.e. the normalized weighted integral.
pub fn gamma_average<F>(f: F, shape: f64, f_bound: f64, tol: f64) -> Result<WeightedIntegral>
where
    F: Fn(f64) -> f64,
{
    let out = gamma_average_vec(|s, out: &mut [f64]| out[0] = f(s), 1, shape, f_bound, tol)?;
    Ok(WeightedIntegral {
        value: out.values[0],
        error_estimate: out.error_estimate,
        s_max: out.s_max,
        panels: out.panels,
    })
}

/// Componentwise E[f_i(S)] for S ~ Γ(shape, 1); `f(s, out)` fills all `dim`
/// components at once so shared work (one Bessel sweep) is done per node.
pub fn gamma_average_vec<F>(
    mut f: F,
    dim: usize,
    shape: f64,
    f_bound: f64,
    tol: f64,
) -> Result<WeightedIntegralVec>
where
    F: FnMut(f64, &mut [f64]),
{
    if !(shape > 0.0) || !shape.is_finite() {
        return Err(Error::Domain(format!("shape must be positive, got {shape}")));
    }
    if !(tol > 0.0) || !(f_bound >= 0.0) {
        return Err(Error::Domain("tolerance must be positive and f_bound nonnegative".into()));
    }
    let tail_target = tol / (10.0 * f_bound.max(f64::MIN_POSITIVE));
    let (s_lo, s_hi, tail_mass) = truncation_range(shape, tail_target)?;
    let tail_bound = tail_mass * f_bound;
    let budget = tol - tail_bound;

    let ln_norm = ln_gamma(shape)?;
    let weight = GammaWeight::new(shape)?;
    let mut buf = vec![0.0; dim];

    let (values, quad_err, panels) = if shape >= 1.0 {
        let breaks = breakpoints(s_lo, s_hi, shape.sqrt().max(1.0));
        let mut g = |s: f64, out: &mut [f64]| {
            let w = weight.eval(s);
            f(s, &mut buf);
            for (o, v) in out.iter_mut().zip(&buf) {
                *o = w * v;
            }
        };
        adaptive_gk21(&mut g, dim, &breaks, budget, MAX_PANELS)?
    } else {
        // σ = s^shape, s^{shape-1} ds = dσ / shape
        let inv = 1.0 / shape;
        let scale = (-ln_norm).exp() * inv;
        let sigma_hi = s_hi.powf(shape);
        let breaks = breakpoints(0.0, sigma_hi, sigma_hi / 8.0);
        let mut g = |sigma: f64, out: &mut [f64]| {
            let s = sigma.powf(inv);
            let w = scale * (-s).exp();
            f(s, &mut buf);
            for (o, v) in out.iter_mut().zip(&buf) {
                *o = w * v;
            }
        };
        adaptive_gk21(&mut g, dim, &breaks, budget, MAX_PANELS)?
    };

    Ok(WeightedIntegralVec {
        values,
        error_estimate: quad_err + tail_bound,
        s_max: s_hi,
        panels,
    })
}

/// Density s^{a-1} e^{-s} / Γ(a) of the unit-scale Gamma law.
struct GammaWeight {
    shape: f64,
    ln_norm: f64,
    // ln of the density at the mode, used for large shapes
    ln_peak: f64,
}

impl GammaWeight {
    fn new(shape: f64) -> Result<Self> {
        let b = shape - 1.0;
        let ln_peak = if b >= 10.0 {
            // (b ln b - b) - lnΓ(b + 1) from the Stirling series
            let b2 = b * b;
            let corr = (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * b2)) / b2) / b2) / b;
            -0.5 * (2.0 * std::f64::consts::PI * b).ln() - corr
        } else {
            0.0
        };
        Ok(Self {
            shape,
            ln_norm: ln_gamma(shape)?,
            ln_peak,
        })
    }

    fn eval(&self, s: f64) -> f64 {
        let b = self.shape - 1.0;
        if s == 0.0 {
            return if b == 0.0 { 1.0 } else { 0.0 };
        }
        if b >= 10.0 {
            // b ln(s/b) - (s - b) with x = (s - b)/b
            let x = (s - b) / b;
            return (b * (x.ln_1p() - x) + self.ln_peak).exp();
        }
        (b * s.ln() - s - self.ln_norm).exp()
    }
}

/// [s_lo, s_hi] with P(shape, s_lo) + Q(shape, s_hi) ≤ target.
fn truncation_range(shape: f64, target: f64) -> Result<(f64, f64, f64)> {
    let step = shape.sqrt() + 1.0;
    let half = 0.5 * target;
    let mut s_hi = shape + step;
    let mut upper = gamma_q(shape, s_hi)?;
    while upper > half {
        s_hi += step;
        upper = gamma_q(shape, s_hi)?;
    }
    let mut s_lo = 0.0;
    let mut lower = 0.0;
    if shape > 4.0 {
        let sd = shape.sqrt();
        let mut k = 1.0;
        loop {
            let cand = shape - k * sd;
            if cand <= 0.0 {
                break;
            }
            let p = gamma_p(shape, cand)?;
            if p <= half {
                s_lo = cand;
                lower = p;
                break;
            }
            k += 1.0;
        }
    }
    Ok((s_lo, s_hi, lower + upper))
}

fn breakpoints(lo: f64, hi: f64, max_width: f64) -> Vec<f64> {
    let n = (((hi - lo) / max_width).ceil() as usize).clamp(1, 256);
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

struct Panel {
    a: f64,
    b: f64,
    values: Vec<f64>,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21_panel<G>(g: &mut G, dim: usize, a: f64, b: f64, fx: &mut [f64]) -> Panel
where
    G: FnMut(f64, &mut [f64]),
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let wg = if i % 2 == 1 { WG[i / 2] } else { 0.0 };
        let nodes: &[f64] = if x == 0.0 {
            &[center]
        } else {
            &[center - half * x, center + half * x]
        };
        for &node in nodes {
            g(node, fx);
            for d in 0..dim {
                kronrod[d] += wk * fx[d];
                gauss[d] += wg * fx[d];
            }
        }
    }
    let mut error = 0.0f64;
    for d in 0..dim {
        kronrod[d] *= half;
        gauss[d] *= half;
        error = error.max((kronrod[d] - gauss[d]).abs());
    }
    Panel {
        a,
        b,
        values: kronrod,
        error,
    }
}

/// Globally adaptive GK21 over consecutive panels given by `breaks`.
/// Returns (integrals, summed error estimate, panel count).
fn adaptive_gk21<G>(
    g: &mut G,
    dim: usize,
    breaks: &[f64],
    tol: f64,
    max_panels: usize,
) -> Result<(Vec<f64>, f64, usize)>
where
    G: FnMut(f64, &mut [f64]),
{
    let mut fx = vec![0.0; dim];
    let mut heap: BinaryHeap<Panel> = breaks
        .windows(2)
        .map(|w| gk21_panel(g, dim, w[0], w[1], &mut fx))
        .collect();
    let total_error = |heap: &BinaryHeap<Panel>| heap.iter().map(|p| p.error).sum::<f64>();
    let mut err = total_error(&heap);
    while err > tol {
        if heap.len() >= max_panels {
            return Err(Error::Accuracy {
                requested: tol,
                achieved: err,
            });
        }
        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Accuracy {
                requested: tol,
                achieved: err,
            });
        }
        let left = gk21_panel(g, dim, worst.a, mid, &mut fx);
        let right = gk21_panel(g, dim, mid, worst.b, &mut fx);
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // refresh the running sum now and then to shed accumulated rounding
        if heap.len().is_multiple_of(64) {
            err = total_error(&heap);
        }
    }
    let panels = heap.len();
    let mut values = vec![0.0; dim];
    // sum in position order for reproducible rounding
    let mut sorted = heap.into_vec();
    sorted.sort_by(|p, q| p.a.total_cmp(&q.a));
    for p in &sorted {
        for (v, pv) in values.iter_mut().zip(&p.values) {
            *v += pv;
        }
    }
    let err = sorted.iter().map(|p| p.error).sum();
    Ok((values, err, panels))
}
