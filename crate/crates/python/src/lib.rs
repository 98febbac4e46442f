//! Python bindings. Library errors surface as `ValueError` (bad input or
//! configuration) or `ArithmeticError` (accuracy or convergence failure).

use pyo3::prelude::*;

mod convert {
    use kdsim_core::Error;
    use pyo3::exceptions::{PyArithmeticError, PyValueError};
    use pyo3::PyErr;

    pub fn err(e: Error) -> PyErr {
        match e {
            Error::Accuracy { .. }
            | Error::NonConvergence { .. }
            | Error::StepUnderflow(_)
            | Error::InvalidState(_) => PyArithmeticError::new_err(e.to_string()),
            _ => PyValueError::new_err(e.to_string()),
        }
    }
}

#[pymodule]
mod kdsim {
    use std::collections::BTreeMap;

    use kdsim_core::cli::{self as core_cli, Cli, RunConfig};
    use kdsim_core::diffraction::{self as d, AveragingMethod, MomentumGrid};
    use kdsim_core::experiment::{self as x, Preset};
    use kdsim_core::randtime::{self as r, EnergySpectrum};
    use kdsim_core::specfun;
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use pyo3::exceptions::PyValueError;
    use pyo3::prelude::*;

    use super::convert::err;

    #[allow(non_upper_case_globals)]
    #[pymodule_export]
    const __version__: &str = env!("CARGO_PKG_VERSION");

    /// Bessel function J_n(x).
    #[pyfunction]
    fn bessel_j(n: i32, x: f64) -> PyResult<f64> {
        specfun::bessel_j(n, x).map_err(err)
    }

    /// ln Γ(x) for x > 0.
    #[pyfunction]
    fn ln_gamma(x: f64) -> PyResult<f64> {
        specfun::ln_gamma(x).map_err(err)
    }

    /// Regularized lower incomplete gamma P(a, x).
    #[pyfunction]
    fn gamma_p(a: f64, x: f64) -> PyResult<f64> {
        specfun::gamma_p(a, x).map_err(err)
    }

    /// ₄F₃(u; v; z) for |z| < 1, returned as (value, error_estimate, terms).
    #[pyfunction]
    fn pfq_4f3(u: [f64; 4], v: [f64; 3], z: f64) -> PyResult<(f64, f64, usize)> {
        let s = specfun::pfq_4f3_series(&specfun::PfqParams { u, v, z }).map_err(err)?;
        Ok((s.value, s.error_estimate, s.terms))
    }

    /// Problem parameters in dimensionless units.
    #[pyclass(frozen, from_py_object)]
    #[derive(Clone)]
    struct DiffractionParams {
        inner: d::DiffractionParams,
    }

    #[pymethods]
    impl DiffractionParams {
        #[new]
        #[pyo3(signature = (t, cal_t, epsilon, n_max=None))]
        fn new(t: f64, cal_t: f64, epsilon: f64, n_max: Option<usize>) -> PyResult<Self> {
            let mut inner = d::DiffractionParams::new(t, cal_t, epsilon).map_err(err)?;
            if let Some(n) = n_max {
                inner = inner.with_n_max(n).map_err(err)?;
            }
            Ok(Self { inner })
        }

        #[getter]
        fn t(&self) -> f64 {
            self.inner.t()
        }

        #[getter]
        fn cal_t(&self) -> f64 {
            self.inner.cal_t()
        }

        #[getter]
        fn epsilon(&self) -> f64 {
            self.inner.epsilon()
        }

        #[getter]
        fn n_max(&self) -> usize {
            self.inner.n_max()
        }

        fn resolution_warning(&self) -> Option<String> {
            self.inner.resolution_warning()
        }

        fn __repr__(&self) -> String {
            format!(
                "DiffractionParams(t={}, cal_t={}, epsilon={}, n_max={})",
                self.inner.t(),
                self.inner.cal_t(),
                self.inner.epsilon(),
                self.inner.n_max()
            )
        }
    }

    fn grid(p: Vec<f64>) -> PyResult<MomentumGrid> {
        MomentumGrid::new(p).map_err(err)
    }

    /// Ideal momentum distribution w(p) on an increasing grid.
    #[pyfunction]
    fn ideal_distribution(p: Vec<f64>, params: &DiffractionParams) -> PyResult<Vec<f64>> {
        let dist = d::ideal_distribution(&grid(p)?, &params.inner).map_err(err)?;
        Ok(dist.values().to_vec())
    }

    /// Averaged distribution w̄(p). `method` is "quadrature", "closed-form" or
    /// "monte-carlo" (which needs `seed`).
    #[pyfunction]
    #[pyo3(signature = (p, params, method="quadrature", tol=d::DEFAULT_TOL, samples=1_000_000, seed=None))]
    fn averaged_distribution(
        p: Vec<f64>,
        params: &DiffractionParams,
        method: &str,
        tol: f64,
        samples: usize,
        seed: Option<u64>,
    ) -> PyResult<Vec<f64>> {
        let method = match method {
            "quadrature" => AveragingMethod::Quadrature { tol },
            "closed-form" => AveragingMethod::ClosedForm,
            "monte-carlo" => AveragingMethod::MonteCarlo {
                samples,
                seed: seed.ok_or_else(|| PyValueError::new_err("monte-carlo needs a seed"))?,
            },
            other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
        };
        let dist = d::averaged_distribution(&grid(p)?, &params.inner, &method).map_err(err)?;
        Ok(dist.values().to_vec())
    }

    /// I_{n,m} by adaptive quadrature: (value, error_estimate).
    #[pyfunction]
    #[pyo3(signature = (n, m, t, cal_t, tol=d::DEFAULT_TOL))]
    fn inm_quadrature(n: i64, m: i64, t: f64, cal_t: f64, tol: f64) -> PyResult<(f64, f64)> {
        let v = d::inm_quadrature(n, m, t, cal_t, tol).map_err(err)?;
        Ok((v.value, v.error_estimate))
    }

    /// I_{n,m} from the ₄F₃ closed form (cal_t < 2): (value, error_estimate).
    #[pyfunction]
    fn inm_closed_form(n: i64, m: i64, t: f64, cal_t: f64) -> PyResult<(f64, f64)> {
        let v = d::inm_closed_form(n, m, t, cal_t).map_err(err)?;
        Ok((v.value, v.error_estimate))
    }

    /// I_{n,m} by Monte Carlo: (mean, standard_error).
    #[pyfunction]
    fn inm_monte_carlo(n: i64, m: i64, t: f64, cal_t: f64, samples: usize, seed: u64) -> PyResult<(f64, f64)> {
        let (a, b) = (n.unsigned_abs() as usize, m.unsigned_abs() as usize);
        let pair = (a.min(b), a.max(b));
        let table = d::InmTable::monte_carlo(t, cal_t, pair.1, &[pair], samples, seed).map_err(err)?;
        Ok((table.get(n, m).unwrap_or(f64::NAN), table.error(n, m).unwrap_or(f64::NAN)))
    }

    /// Exact (γ, ν) of the averaged map for transition frequency ω.
    #[pyfunction]
    fn decay_factors(omega: f64, tau: f64) -> PyResult<(f64, f64)> {
        let f = r::decay_factors(omega, &r::GammaTimeLaw::new(tau).map_err(err)?);
        Ok((f.gamma, f.nu))
    }

    /// Second-order (γ, ν) = (ω²τ/2, ω).
    #[pyfunction]
    fn second_order_factors(omega: f64, tau: f64) -> PyResult<(f64, f64)> {
        let f = r::second_order_factors(omega, &r::GammaTimeLaw::new(tau).map_err(err)?);
        Ok((f.gamma, f.nu))
    }

    /// Gamma time-law density p(t, t′).
    #[pyfunction]
    fn gamma_pdf(tau: f64, t: f64, t_prime: f64) -> PyResult<f64> {
        r::GammaTimeLaw::new(tau).and_then(|law| law.pdf(t, t_prime)).map_err(err)
    }

    /// Averaged density matrix ρ̄(t) for energies ħω_n (rows of complex numbers).
    #[pyfunction]
    fn average_density(
        rho: Vec<Vec<Complex64>>,
        energies: Vec<f64>,
        t: f64,
        tau: f64,
    ) -> PyResult<Vec<Vec<Complex64>>> {
        let dim = rho.len();
        if rho.iter().any(|row| row.len() != dim) {
            return Err(PyValueError::new_err("density matrix must be square"));
        }
        let m = DMatrix::from_fn(dim, dim, |i, j| rho[i][j]);
        let rho0 = r::DensityMatrix::new(m).map_err(err)?;
        let spectrum = EnergySpectrum::new(energies).map_err(err)?;
        let law = r::GammaTimeLaw::new(tau).map_err(err)?;
        let out = r::average_density(&rho0, &spectrum, t, &law).map_err(err)?;
        Ok((0..dim).map(|i| (0..dim).map(|j| out.get(i, j)).collect()).collect())
    }

    /// Physical beam parameters in SI units.
    #[pyclass(frozen, from_py_object)]
    #[derive(Clone)]
    struct BeamScenario {
        inner: x::BeamScenario,
    }

    #[pymethods]
    impl BeamScenario {
        #[new]
        fn new(
            mass: f64,
            mean_p_z: f64,
            eps_z: f64,
            class_spread: f64,
            t_int: f64,
            rabi: f64,
            detuning: f64,
        ) -> PyResult<Self> {
            let inner = x::BeamScenario {
                mass,
                mean_p_z,
                eps_z,
                class_spread,
                t_int,
                rabi,
                detuning,
            };
            inner.validate().map_err(err)?;
            Ok(Self { inner })
        }

        /// Beam of a named preset ("cold-beam-sec5").
        #[staticmethod]
        fn preset(name: &str) -> PyResult<Self> {
            let p: Preset = name.parse().map_err(err)?;
            let inner = p
                .beam()
                .ok_or_else(|| PyValueError::new_err(format!("preset {name} has no beam")))?;
            Ok(Self { inner })
        }

        /// τ, its three contributions, T, 𝒯 and the dominant term.
        fn estimate(&self, py: Python<'_>) -> PyResult<BTreeMap<&'static str, Py<PyAny>>> {
            let est = x::tau_estimate(&self.inner).map_err(err)?;
            let dims = x::cal_t(&self.inner, est.tau).map_err(err)?;
            let mut out = BTreeMap::new();
            for (k, v) in [
                ("tau", est.tau),
                ("packet_width", est.packet_width),
                ("schrodinger_spread", est.schrodinger_spread),
                ("classical_spread", est.classical_spread),
                ("T", dims.t),
                ("calT", dims.cal_t),
            ] {
                out.insert(k, v.into_pyobject(py)?.into_any().unbind());
            }
            out.insert("dominant", est.dominant().label().into_pyobject(py)?.into_any().unbind());
            Ok(out)
        }
    }

    /// Runs the command-line front end with `args` (without the program name)
    /// and returns the rendered table.
    #[pyfunction]
    fn run_cli(args: Vec<String>) -> PyResult<String> {
        let argv = std::iter::once("kdsim".to_string()).chain(args);
        let parsed = Cli::try_from_args(argv).map_err(PyValueError::new_err)?;
        let config = RunConfig::from_cli(&parsed).map_err(err)?;
        let outcome = core_cli::run(&config).map_err(err)?;
        Ok(core_cli::render(&outcome.table, config.format))
    }
}
