//! Random evolution time: the Gamma time law and the averaged density-matrix
//! map it induces on a finite-level system.
//!
//! Everything is expressed in the energy eigenbasis, where the Liouvillian is
//! diagonal: the coherence ρ_{nm} evolves with ω_{nm} = ω_n − ω_m, and
//! averaging over the Gamma law multiplies it by (1 + iω_{nm}τ)^{−t/τ}.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::specfun::ln_gamma;

/// Tolerance used when validating Hermiticity and unit trace.
pub const STATE_TOLERANCE: f64 = 1e-12;
/// Most negative eigenvalue accepted for a density matrix.
pub const POSITIVITY_TOLERANCE: f64 = 1e-10;

/// Gamma-distributed evolution time with scaling time τ.
///
/// For nominal time t the actual time t′ has density
/// P(t, t′) = e^{−t′/τ} (t′/τ)^{t/τ−1} / (τ Γ(t/τ)), mean t and variance τt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaTimeLaw {
    tau: f64,
}

impl GammaTimeLaw {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Domain(format!("tau must be positive and finite, got {tau}")));
        }
        Ok(Self { tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Shape parameter t/τ of the law at nominal time t.
    pub fn shape(&self, t: f64) -> f64 {
        t / self.tau
    }

    pub fn mean(&self, t: f64) -> f64 {
        t
    }

    pub fn variance(&self, t: f64) -> f64 {
        self.tau * t
    }

    /// P(t, t′). At t′ = 0 the density is 0 for t/τ > 1, 1/τ for t/τ = 1 and
    /// singular (an error) for t/τ < 1.
    pub fn pdf(&self, t: f64, t_prime: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("nominal time must be positive, got {t}")));
        }
        if !(t_prime >= 0.0) {
            return Err(Error::Domain(format!("t' must be nonnegative, got {t_prime}")));
        }
        let shape = self.shape(t);
        if t_prime == 0.0 {
            return match shape.partial_cmp(&1.0) {
                Some(std::cmp::Ordering::Greater) => Ok(0.0),
                Some(std::cmp::Ordering::Equal) => Ok(1.0 / self.tau),
                _ => Err(Error::SingularPoint { shape }),
            };
        }
        let x = t_prime / self.tau;
        let log_p = (shape - 1.0) * x.ln() - x - ln_gamma(shape)? - self.tau.ln();
        Ok(log_p.exp())
    }
}

pub fn gamma_pdf(law: &GammaTimeLaw, t: f64, t_prime: f64) -> Result<f64> {
    law.pdf(t, t_prime)
}

/// Level frequencies ω_n = E_n/ħ.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySpectrum {
    omegas: Vec<f64>,
}

impl EnergySpectrum {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::Domain("spectrum needs at least one level".into()));
        }
        if omegas.iter().any(|w| !w.is_finite()) {
            return Err(Error::Domain("spectrum entries must be finite".into()));
        }
        Ok(Self { omegas })
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn levels(&self) -> &[f64] {
        &self.omegas
    }

    /// ω_{nm} = ω_n − ω_m.
    pub fn transition(&self, n: usize, m: usize) -> f64 {
        self.omegas[n] - self.omegas[m]
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix in the energy basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity.
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        let rho = Self { entries };
        rho.check_invariants()?;
        Ok(rho)
    }

    /// |ψ⟩⟨ψ| for a normalized copy of ψ.
    pub fn from_pure(psi: &[Complex64]) -> Result<Self> {
        let norm = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if psi.is_empty() || !(norm > 0.0) {
            return Err(Error::InvalidState("state vector must be nonzero".into()));
        }
        let dim = psi.len();
        let entries = DMatrix::from_fn(dim, dim, |i, j| psi[i] * psi[j].conj() / (norm * norm));
        Ok(Self { entries })
    }

    pub(crate) fn from_entries_unchecked(entries: DMatrix<Complex64>) -> Self {
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        self.entries[(n, m)]
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    /// Largest |ρ_{nm} − conj(ρ_{mn})|.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        // symmetrize first so rounding cannot leak into the eigen solver
        let herm = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn check_invariants(&self) -> Result<()> {
        let (r, c) = self.entries.shape();
        if r != c || r == 0 {
            return Err(Error::InvalidState(format!("density matrix must be square, got {r}x{c}")));
        }
        if self.entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        let h = self.hermiticity_defect();
        if h > STATE_TOLERANCE {
            return Err(Error::InvalidState(format!("not Hermitian (defect {h:e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).norm() > STATE_TOLERANCE {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_TOLERANCE {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }
}

/// Decay rate γ and shifted frequency ν of one coherence: the coherence is
/// multiplied by e^{−(γ + iν)t}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFactors {
    pub gamma: f64,
    pub nu: f64,
}

impl DecayFactors {
    pub fn factor(&self, t: f64) -> Complex64 {
        (-Complex64::new(self.gamma, self.nu) * t).exp()
    }
}

/// Exact factors from (1 + iωτ)^{−t/τ}: γ = ln(1 + ω²τ²)/(2τ), ν = arctan(ωτ)/τ.
pub fn decay_factors(omega: f64, law: &GammaTimeLaw) -> DecayFactors {
    let tau = law.tau();
    let x = omega * tau;
    DecayFactors {
        gamma: (x * x).ln_1p() / (2.0 * tau),
        nu: x.atan() / tau,
    }
}

/// Factors of the double-commutator truncation: γ = ω²τ/2, ν = ω.
pub fn second_order_factors(omega: f64, law: &GammaTimeLaw) -> DecayFactors {
    DecayFactors {
        gamma: 0.5 * omega * omega * law.tau(),
        nu: omega,
    }
}

fn check_dims(rho0: &DensityMatrix, spectrum: &EnergySpectrum) -> Result<()> {
    if rho0.dim() != spectrum.len() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.len(),
            found: rho0.dim(),
        });
    }
    Ok(())
}

/// ρ̄(t) in closed form.
pub fn average_density(
    rho0: &DensityMatrix,
    spectrum: &EnergySpectrum,
    t: f64,
    law: &GammaTimeLaw,
) -> Result<DensityMatrix> {
    check_dims(rho0, spectrum)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    let d = rho0.dim();
    let entries = DMatrix::from_fn(d, d, |n, m| {
        if n == m {
            rho0.get(n, m)
        } else {
            decay_factors(spectrum.transition(n, m), law).factor(t) * rho0.get(n, m)
        }
    });
    Ok(DensityMatrix::from_entries_unchecked(entries))
}

/// max_{n,m} |f_{nm}(t1 + t2) − f_{nm}(t1) f_{nm}(t2)| for the averaged-map factors.
pub fn check_semigroup(spectrum: &EnergySpectrum, law: &GammaTimeLaw, t1: f64, t2: f64) -> f64 {
    let d = spectrum.len();
    let mut worst = 0.0f64;
    for n in 0..d {
        for m in 0..d {
            let f = decay_factors(spectrum.transition(n, m), law);
            let dev = (f.factor(t1 + t2) - f.factor(t1) * f.factor(t2)).norm();
            worst = worst.max(dev);
        }
    }
    worst
}

/// Integrator tolerance for the master equations.
pub const ODE_TOLERANCE: f64 = 1e-10;

/// Integrates dρ̄/dt = −(1/τ) ln(1 + iLτ) ρ̄ entrywise.
pub fn evolve_exact_log(
    rho0: &DensityMatrix,
    spectrum: &EnergySpectrum,
    law: &GammaTimeLaw,
    t_grid: &[f64],
) -> Result<Vec<DensityMatrix>> {
    evolve_entrywise(rho0, spectrum, t_grid, |omega| decay_factors(omega, law))
}

/// Integrates dρ̄/dt = −i[H, ρ̄]/ħ − (τ/2ħ²)[H, [H, ρ̄]] entrywise.
pub fn evolve_second_order(
    rho0: &DensityMatrix,
    spectrum: &EnergySpectrum,
    law: &GammaTimeLaw,
    t_grid: &[f64],
) -> Result<Vec<DensityMatrix>> {
    evolve_entrywise(rho0, spectrum, t_grid, |omega| second_order_factors(omega, law))
}

fn evolve_entrywise<G>(
    rho0: &DensityMatrix,
    spectrum: &EnergySpectrum,
    t_grid: &[f64],
    generator: G,
) -> Result<Vec<DensityMatrix>>
where
    G: Fn(f64) -> DecayFactors,
{
    check_dims(rho0, spectrum)?;
    if t_grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::Domain("time grid must be finite and nonnegative".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("time grid must be strictly increasing".into()));
    }
    let d = rho0.dim();
    let mut out: Vec<DMatrix<Complex64>> = vec![rho0.entries().clone(); t_grid.len()];
    for n in 0..d {
        for m in (n + 1)..d {
            let f = generator(spectrum.transition(n, m));
            let rate = Complex64::new(f.gamma, f.nu);
            let rhs = |_t: f64, y: Complex64| -rate * y;
            let mut t = 0.0;
            let mut y = rho0.get(n, m);
            let mut h = initial_step(rate);
            for (k, &target) in t_grid.iter().enumerate() {
                if target > t {
                    (y, h) = dopri5(&rhs, t, y, target, h)?;
                    t = target;
                }
                out[k][(n, m)] = y;
                out[k][(m, n)] = y.conj();
            }
        }
    }
    Ok(out.into_iter().map(DensityMatrix::from_entries_unchecked).collect())
}

fn initial_step(rate: Complex64) -> f64 {
    let r = rate.norm();
    if r > 0.0 {
        0.01 / r
    } else {
        1.0
    }
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive step from t0 to t1; returns the state at t1 and the last accepted step.
fn dopri5<F>(f: &F, t0: f64, y0: Complex64, t1: f64, h0: f64) -> Result<(Complex64, f64)>
where
    F: Fn(f64, Complex64) -> Complex64,
{
    // the closed form must be matched to ODE_TOLERANCE, so steps are
    // controlled two orders tighter
    let atol = ODE_TOLERANCE * 1e-2;
    let rtol = ODE_TOLERANCE * 1e-2;
    let mut t = t0;
    let mut y = y0;
    let mut h = h0.min(t1 - t0);
    let min_step = 1e-14 * (t1.abs().max(1.0));
    while t < t1 {
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        let mut k = [Complex64::new(0.0, 0.0); 7];
        for s in 0..7 {
            let mut acc = y;
            for j in 0..s {
                acc += k[j] * (A[s][j] * h);
            }
            k[s] = f(t + C[s] * h, acc);
        }
        let mut y5 = y;
        let mut y4 = y;
        for s in 0..7 {
            y5 += k[s] * (B5[s] * h);
            y4 += k[s] * (B4[s] * h);
        }
        let scale = atol + rtol * y.norm().max(y5.norm());
        let err = (y5 - y4).norm() / scale;
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y = y5;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < min_step && t < t1 {
            return Err(Error::StepUnderflow(t));
        }
    }
    Ok((y, h))
}
