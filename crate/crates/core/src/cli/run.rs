use num_complex::Complex64;

use super::config::{MethodChoice, Mode, RunConfig, Severity};
use super::output::Table;
use crate::diffraction::{
    averaged_from_table, default_n_max, ideal_distribution, inm_closed_form, inm_quadrature, inm_table,
    AveragingMethod, DiffractionParams, InmTable, MomentumDistribution, MomentumGrid,
};
use crate::error::{Error, Result};
use crate::experiment::{cal_t as dimensionless, tau_estimate};
use crate::randtime::{
    average_density, decay_factors, evolve_exact_log, evolve_second_order, second_order_factors, DensityMatrix,
    EnergySpectrum, GammaTimeLaw,
};

/// Monte Carlo sample count when `--mc-samples` is absent.
pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

/// Disagreement between quadrature and closed form that `auto` reports.
pub const CROSS_CHECK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub table: Table,
    pub warnings: Vec<String>,
}

/// Validates `config` and computes its table.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let mut warnings = Vec::new();
    let mut errors = Vec::new();
    for d in config.validate() {
        match d.severity {
            Severity::Warning => warnings.push(d.message),
            Severity::Error => errors.push(d.message),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Config(errors.join("; ")));
    }
    let mut table = match config.mode {
        Mode::Ideal => ideal(config)?,
        Mode::Averaged => averaged(config, &mut warnings)?,
        Mode::InmTable => inm_comparison(config)?,
        Mode::KernelDemo => kernel_demo(config)?,
        Mode::Scenario => scenario(config)?,
    };
    let mut meta = vec![("kdsim_version".to_string(), env!("CARGO_PKG_VERSION").to_string())];
    meta.extend(config.echo());
    meta.append(&mut table.meta);
    for w in &warnings {
        meta.push(("warning".into(), w.clone()));
    }
    table.meta = meta;
    Ok(RunOutcome { table, warnings })
}

fn grid(config: &RunConfig, n_max: usize) -> Result<MomentumGrid> {
    match (config.p_min, config.p_max) {
        (Some(lo), Some(hi)) => MomentumGrid::range(lo, hi, config.step),
        _ => MomentumGrid::symmetric(2.0 * n_max as f64 + 6.0, config.step),
    }
}

fn describe(table: &mut Table, column: &str, dist: &MomentumDistribution) {
    table.meta(format!("error_estimate[{column}]"), format!("{:e}", dist.error_estimate()));
    table.meta(format!("integral[{column}]"), format!("{:.12}", dist.integral()));
}

fn ideal(config: &RunConfig) -> Result<Table> {
    let params = config.params(0.0)?;
    let grid = grid(config, params.n_max())?;
    let dist = ideal_distribution(&grid, &params)?;
    let mut table = Table::new(vec!["p_x".into(), "w_ideal".into()]);
    table.meta("n_max_used", params.n_max());
    describe(&mut table, "w_ideal", &dist);
    for (p, w) in grid.points().iter().zip(dist.values()) {
        table.push_row(vec![*p, *w]);
    }
    Ok(table)
}

fn averaged(config: &RunConfig, warnings: &mut Vec<String>) -> Result<Table> {
    // one truncation order for every column so they share the grid
    let n_max = match config.n_max {
        Some(n) => n,
        None => {
            let mut n = default_n_max(config.t, 0.0)?;
            for &c in &config.cal_t {
                n = n.max(default_n_max(config.t, c)?);
            }
            n
        }
    };
    let mut shared = config.clone();
    shared.n_max = Some(n_max);
    let base = shared.params(0.0)?;
    let grid = grid(config, n_max)?;

    let mut columns = vec!["p_x".to_string(), "w_ideal".to_string()];
    let mut table = Table::new(Vec::new());
    table.meta("n_max_used", n_max);
    let ideal = ideal_distribution(&grid, &base)?;
    describe(&mut table, "w_ideal", &ideal);
    let mut curves = vec![ideal];
    for &c in &config.cal_t {
        let name = format!("w_bar[calT={c}]");
        let params = shared.params(c)?;
        let (dist, method) = averaged_column(config, &params, &grid, &name, &mut table, warnings)?;
        table.meta(format!("method[{name}]"), method);
        describe(&mut table, &name, &dist);
        columns.push(name);
        curves.push(dist);
    }
    table.columns = columns;
    for (i, p) in grid.points().iter().enumerate() {
        let mut row = vec![*p];
        row.extend(curves.iter().map(|d| d.values()[i]));
        table.push_row(row);
    }
    Ok(table)
}

fn averaged_column(
    config: &RunConfig,
    params: &DiffractionParams,
    grid: &MomentumGrid,
    name: &str,
    table: &mut Table,
    warnings: &mut Vec<String>,
) -> Result<(MomentumDistribution, &'static str)> {
    if params.cal_t() == 0.0 || params.t() == 0.0 {
        return Ok((ideal_distribution(grid, params)?, "ideal"));
    }
    let method = match config.method {
        MethodChoice::Quadrature | MethodChoice::Auto => AveragingMethod::Quadrature { tol: config.tol },
        MethodChoice::ClosedForm => AveragingMethod::ClosedForm,
        MethodChoice::MonteCarlo => AveragingMethod::MonteCarlo {
            samples: config.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES),
            seed: config.seed.ok_or_else(|| Error::Config("Monte Carlo requires --seed".into()))?,
        },
    };
    let inm = inm_table(params, &method)?;
    if config.method == MethodChoice::Auto && params.cal_t() < 2.0 {
        let check = inm_table(params, &AveragingMethod::ClosedForm)?;
        let diff = max_table_difference(&inm, &check);
        table.meta(format!("closed_form_check[{name}]"), format!("{diff:e}"));
        if !(diff <= CROSS_CHECK_TOLERANCE) {
            warnings.push(format!(
                "{name}: quadrature and closed form differ by {diff:e} (> {CROSS_CHECK_TOLERANCE:e})"
            ));
        }
    }
    let label = match method {
        AveragingMethod::Quadrature { .. } => "quadrature",
        AveragingMethod::ClosedForm => "closed-form",
        AveragingMethod::MonteCarlo { .. } => "monte-carlo",
    };
    Ok((averaged_from_table(grid, params, &inm)?, label))
}

fn max_table_difference(a: &InmTable, b: &InmTable) -> f64 {
    let n = a.n_max().min(b.n_max()) as i64;
    let mut worst = 0.0f64;
    for i in 0..=n {
        for j in i..=n {
            if let (Some(x), Some(y)) = (a.get(i, j), b.get(i, j)) {
                // NaN propagates as a failed check
                worst = if (x - y).is_nan() { f64::NAN } else { worst.max((x - y).abs()) };
            }
        }
    }
    worst
}

fn inm_comparison(config: &RunConfig) -> Result<Table> {
    let (t, c) = (config.t, config.cal_t[0]);
    let with_closed = c < 2.0;
    let mc = match config.mc_samples {
        Some(samples) => {
            let top = config.n.start.unsigned_abs().max(config.n.end.unsigned_abs())
                .max(config.m.start.unsigned_abs().max(config.m.end.unsigned_abs())) as usize;
            let seed = config.seed.ok_or_else(|| Error::Config("Monte Carlo requires --seed".into()))?;
            Some(InmTable::monte_carlo(t, c, top, &InmTable::all_pairs(top), samples, seed)?)
        }
        None => None,
    };

    let mut columns: Vec<String> = ["n", "m", "quadrature", "quadrature_error"].map(String::from).to_vec();
    if with_closed {
        columns.extend(["closed_form", "closed_form_error"].map(String::from));
    }
    if mc.is_some() {
        columns.extend(["monte_carlo", "monte_carlo_stderr"].map(String::from));
    }
    if with_closed {
        columns.push("abs_diff_quadrature_closed_form".into());
    }
    if mc.is_some() {
        columns.push("abs_diff_quadrature_monte_carlo".into());
        if with_closed {
            columns.push("abs_diff_closed_form_monte_carlo".into());
        }
    }
    let mut table = Table::new(columns);
    if !with_closed {
        table.meta("closed_form", format!("omitted: calT = {c} is outside the series domain (calT < 2)"));
    }
    if mc.is_none() {
        table.meta("monte_carlo", "omitted: no --mc-samples");
    }

    for n in config.n.iter() {
        for m in config.m.iter() {
            let q = inm_quadrature(n, m, t, c, config.tol)?;
            let mut row = vec![n as f64, m as f64, q.value, q.error_estimate];
            let cf = if with_closed { Some(inm_closed_form(n, m, t, c)?) } else { None };
            if let Some(cf) = &cf {
                row.extend([cf.value, cf.error_estimate]);
            }
            let mc_val = mc.as_ref().map(|tab| {
                let v = tab.get(n, m).expect("pairs up to top are tabulated");
                (v, tab.error(n, m).expect("tabulated"))
            });
            if let Some((v, e)) = mc_val {
                row.extend([v, e]);
            }
            if let Some(cf) = &cf {
                row.push((q.value - cf.value).abs());
            }
            if let Some((v, _)) = mc_val {
                row.push((q.value - v).abs());
                if let Some(cf) = &cf {
                    row.push((cf.value - v).abs());
                }
            }
            table.push_row(row);
        }
    }
    Ok(table)
}

fn kernel_demo(config: &RunConfig) -> Result<Table> {
    // τ = 1: times and frequencies are in units of τ and 1/τ
    let law = GammaTimeLaw::new(1.0)?;
    let steps = 20;
    let times: Vec<f64> = (0..=steps).map(|k| config.t_max * k as f64 / steps as f64).collect();
    let half = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let rho0 = DensityMatrix::from_pure(&[half, half])?;

    let mut table = Table::new(
        [
            "omega_tau",
            "t_over_tau",
            "gamma_exact",
            "nu_exact",
            "gamma_second_order",
            "nu_second_order",
            "coherence_closed_re",
            "coherence_closed_im",
            "coherence_exact_re",
            "coherence_exact_im",
            "coherence_second_order_re",
            "coherence_second_order_im",
        ]
        .map(String::from)
        .to_vec(),
    );
    table.meta("initial_state", "(|0> + |1>)/sqrt(2), energies 0 and omega");
    table.meta("coherence", "rho_01(t)");
    for &w in &config.omega_tau {
        let spectrum = EnergySpectrum::new(vec![0.0, w])?;
        let exact = decay_factors(spectrum.transition(0, 1), &law);
        let second = second_order_factors(spectrum.transition(0, 1), &law);
        let me_exact = evolve_exact_log(&rho0, &spectrum, &law, &times)?;
        let me_second = evolve_second_order(&rho0, &spectrum, &law, &times)?;
        for (k, &t) in times.iter().enumerate() {
            let closed = average_density(&rho0, &spectrum, t, &law)?.get(0, 1);
            let a = me_exact[k].get(0, 1);
            let b = me_second[k].get(0, 1);
            table.push_row(vec![
                w,
                t,
                exact.gamma,
                exact.nu,
                second.gamma,
                second.nu,
                closed.re,
                closed.im,
                a.re,
                a.im,
                b.re,
                b.im,
            ]);
        }
    }
    Ok(table)
}

fn scenario(config: &RunConfig) -> Result<Table> {
    let preset = config.preset.ok_or_else(|| Error::Config("scenario mode needs a preset".into()))?;
    let beam = preset
        .beam()
        .ok_or_else(|| Error::Config(format!("preset {} has no beam scenario", preset.name())))?;
    let est = tau_estimate(&beam)?;
    let dims = dimensionless(&beam, est.tau)?;
    let dominant = est.dominant();
    let mut table = Table::new(
        [
            "tau_s",
            "T",
            "calT",
            "packet_width_term",
            "schrodinger_spread_term",
            "classical_spread_term",
            "dominant_index",
        ]
        .map(String::from)
        .to_vec(),
    );
    table.meta("scenario", preset.name());
    table.meta("assumption", "sodium mass; Rabi and detuning chosen so that 2 Omega^2 / Delta = 1e10 rad/s");
    table.meta("mass_kg", format!("{:e}", beam.mass));
    table.meta("mean_p_z", format!("{:e}", beam.mean_p_z));
    table.meta("eps_z", format!("{:e}", beam.eps_z));
    table.meta("class_spread", format!("{:e}", beam.class_spread));
    table.meta("t_int_s", format!("{:e}", beam.t_int));
    table.meta("rabi", format!("{:e}", beam.rabi));
    table.meta("detuning", format!("{:e}", beam.detuning));
    table.meta("dominant_term", dominant.label());
    table.meta("dominant_index", "0 packet_width, 1 schrodinger_spread, 2 classical_spread");
    let index = match dominant {
        crate::experiment::DominantTerm::PacketWidth => 0.0,
        crate::experiment::DominantTerm::SchrodingerSpread => 1.0,
        crate::experiment::DominantTerm::ClassicalSpread => 2.0,
    };
    table.push_row(vec![
        est.tau,
        dims.t,
        dims.cal_t,
        est.packet_width,
        est.schrodinger_spread,
        est.classical_spread,
        index,
    ]);
    Ok(table)
}
