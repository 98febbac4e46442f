use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};

use crate::diffraction::{DiffractionParams, DEFAULT_STEP, DEFAULT_TOL, MIN_MC_SAMPLES};
use crate::error::{Error, Result};
use crate::experiment::Preset;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "KDSIM_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Ideal,
    Averaged,
    InmTable,
    KernelDemo,
    Scenario,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodChoice {
    Quadrature,
    ClosedForm,
    MonteCarlo,
    /// Quadrature, cross-checked against the closed form when calT < 2.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

macro_rules! value_enum_str {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let v = self.to_possible_value().expect("no skipped variants");
                f.write_str(v.get_name())
            }
        }

        impl FromStr for $t {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                <$t as ValueEnum>::from_str(s, false).map_err(Error::Config)
            }
        }
    )*};
}

value_enum_str!(Mode, MethodChoice, Format);

/// Inclusive order range written `a..b` (or a single integer).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderRange {
    pub start: i64,
    pub end: i64,
}

impl OrderRange {
    pub fn iter(&self) -> impl Iterator<Item = i64> {
        self.start..=self.end
    }
}

impl fmt::Display for OrderRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl FromStr for OrderRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid order range '{s}' (expected a..b)"));
        let (start, end) = match s.split_once("..") {
            Some((a, b)) => (
                a.trim().parse().map_err(|_| bad())?,
                b.trim().trim_start_matches('=').parse().map_err(|_| bad())?,
            ),
            None => {
                let v = s.trim().parse().map_err(|_| bad())?;
                (v, v)
            }
        };
        if end < start {
            return Err(bad());
        }
        Ok(Self { start, end })
    }
}

fn parse_order_range(s: &str) -> std::result::Result<OrderRange, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Atomic diffraction by a standing light wave with a Gamma-distributed
/// interaction time.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "kdsim", version)]
pub struct Cli {
    /// Flat key = value file with the same keys as the long flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named preset: figure2 or cold-beam-sec5
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Dimensionless interaction time T = 2Ω²t/Δ
    #[arg(long = "T")]
    pub t: Option<f64>,
    /// Decoherence scales 𝒯 = 2Ω²τ/Δ, comma separated
    #[arg(long = "calT", value_delimiter = ',', num_args = 1..)]
    pub cal_t: Option<Vec<f64>>,
    /// Transverse packet spread ε
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Comb truncation order
    #[arg(long = "n-max")]
    pub n_max: Option<usize>,
    #[arg(long = "p-min", allow_negative_numbers = true)]
    pub p_min: Option<f64>,
    #[arg(long = "p-max", allow_negative_numbers = true)]
    pub p_max: Option<f64>,
    /// Momentum grid spacing
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodChoice>,
    #[arg(long = "mc-samples")]
    pub mc_samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Absolute tolerance of the I_nm quadratures
    #[arg(long)]
    pub tol: Option<f64>,
    /// Order range for inm-table, e.g. 0..2
    #[arg(long, value_parser = parse_order_range, allow_hyphen_values = true)]
    pub n: Option<OrderRange>,
    #[arg(long, value_parser = parse_order_range, allow_hyphen_values = true)]
    pub m: Option<OrderRange>,
    /// ωτ values for kernel-demo, comma separated
    #[arg(long = "omega-tau", value_delimiter = ',', num_args = 1..)]
    pub omega_tau: Option<Vec<f64>>,
    /// Last time of the kernel-demo traces, in units of τ
    #[arg(long = "t-max")]
    pub t_max: Option<f64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Cli {
    /// Parses an argument list (program name first) without exiting on error.
    pub fn try_from_args<I, T>(args: I) -> std::result::Result<Self, String>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        Self::try_parse_from(args).map_err(|e| e.to_string())
    }
}

/// Partially specified configuration; later layers override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub preset: Option<String>,
    pub mode: Option<Mode>,
    pub t: Option<f64>,
    pub cal_t: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub n_max: Option<usize>,
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
    pub step: Option<f64>,
    pub method: Option<MethodChoice>,
    pub mc_samples: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub n: Option<OrderRange>,
    pub m: Option<OrderRange>,
    pub omega_tau: Option<Vec<f64>>,
    pub t_max: Option<f64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

impl From<&Cli> for RawConfig {
    fn from(c: &Cli) -> Self {
        Self {
            preset: c.preset.clone(),
            mode: c.mode,
            t: c.t,
            cal_t: c.cal_t.clone(),
            epsilon: c.epsilon,
            n_max: c.n_max,
            p_min: c.p_min,
            p_max: c.p_max,
            step: c.step,
            method: c.method,
            mc_samples: c.mc_samples,
            seed: c.seed,
            tol: c.tol,
            n: c.n,
            m: c.m,
            omega_tau: c.omega_tau.clone(),
            t_max: c.t_max,
            output: c.output.clone(),
            format: c.format,
        }
    }
}

impl RawConfig {
    /// Values set in `over` win.
    pub fn overlay(self, over: RawConfig) -> RawConfig {
        RawConfig {
            preset: over.preset.or(self.preset),
            mode: over.mode.or(self.mode),
            t: over.t.or(self.t),
            cal_t: over.cal_t.or(self.cal_t),
            epsilon: over.epsilon.or(self.epsilon),
            n_max: over.n_max.or(self.n_max),
            p_min: over.p_min.or(self.p_min),
            p_max: over.p_max.or(self.p_max),
            step: over.step.or(self.step),
            method: over.method.or(self.method),
            mc_samples: over.mc_samples.or(self.mc_samples),
            seed: over.seed.or(self.seed),
            tol: over.tol.or(self.tol),
            n: over.n.or(self.n),
            m: over.m.or(self.m),
            omega_tau: over.omega_tau.or(self.omega_tau),
            t_max: over.t_max.or(self.t_max),
            output: over.output.or(self.output),
            format: over.format.or(self.format),
        }
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("invalid value '{v}' for key '{key}'")))
        }
        fn list(key: &str, v: &str) -> Result<Vec<f64>> {
            v.split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| num(key, s.trim()))
                .collect()
        }
        match key {
            "preset" => self.preset = Some(value.to_string()),
            "mode" => self.mode = Some(value.parse()?),
            "T" => self.t = Some(num(key, value)?),
            "calT" => self.cal_t = Some(list(key, value)?),
            "epsilon" => self.epsilon = Some(num(key, value)?),
            "n-max" => self.n_max = Some(num(key, value)?),
            "p-min" => self.p_min = Some(num(key, value)?),
            "p-max" => self.p_max = Some(num(key, value)?),
            "step" => self.step = Some(num(key, value)?),
            "method" => self.method = Some(value.parse()?),
            "mc-samples" => self.mc_samples = Some(num(key, value)?),
            "seed" => self.seed = Some(num(key, value)?),
            "tol" => self.tol = Some(num(key, value)?),
            "n" => self.n = Some(value.parse()?),
            "m" => self.m = Some(value.parse()?),
            "omega-tau" => self.omega_tau = Some(list(key, value)?),
            "t-max" => self.t_max = Some(num(key, value)?),
            "output" => self.output = Some(PathBuf::from(value)),
            "format" => self.format = Some(value.parse()?),
            _ => return Err(Error::Config(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config_file(text: &str) -> Result<RawConfig> {
    let mut raw = RawConfig::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key = value", lineno + 1))
        })?;
        raw.set(key.trim().trim_start_matches("--"), value.trim())?;
    }
    Ok(raw)
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub mode: Mode,
    pub t: f64,
    pub cal_t: Vec<f64>,
    pub epsilon: f64,
    pub n_max: Option<usize>,
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
    pub step: f64,
    pub method: MethodChoice,
    pub mc_samples: Option<usize>,
    pub seed: Option<u64>,
    pub tol: f64,
    pub n: OrderRange,
    pub m: OrderRange,
    pub omega_tau: Vec<f64>,
    pub t_max: f64,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    /// Loads the optional file named by `--config` and overlays the flags.
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let file = match &cli.config {
            Some(path) => load_file(path)?,
            None => RawConfig::default(),
        };
        Self::resolve(file.overlay(RawConfig::from(cli)))
    }

    /// Applies preset values under explicit ones, then defaults.
    pub fn resolve(raw: RawConfig) -> Result<Self> {
        let preset = raw.preset.as_deref().map(str::parse::<Preset>).transpose()?;
        let mut base = RawConfig::default();
        if let Some(p) = preset {
            if let Some((t, eps, cal_t)) = p.diffraction() {
                base.mode = Some(Mode::Averaged);
                base.t = Some(t);
                base.epsilon = Some(eps);
                base.cal_t = Some(cal_t);
            }
            if p.beam().is_some() {
                base.mode = Some(Mode::Scenario);
            }
        }
        let raw = base.overlay(raw);
        Ok(Self {
            preset,
            mode: raw.mode.unwrap_or(Mode::Averaged),
            t: raw.t.unwrap_or(10.0),
            cal_t: raw.cal_t.unwrap_or_else(|| vec![0.0, 1.0, 10.0]),
            epsilon: raw.epsilon.unwrap_or(10.0),
            n_max: raw.n_max,
            p_min: raw.p_min,
            p_max: raw.p_max,
            step: raw.step.unwrap_or(DEFAULT_STEP),
            method: raw.method.unwrap_or(MethodChoice::Auto),
            mc_samples: raw.mc_samples,
            seed: raw.seed,
            tol: raw.tol.unwrap_or(DEFAULT_TOL),
            n: raw.n.unwrap_or(OrderRange { start: 0, end: 2 }),
            m: raw.m.unwrap_or(OrderRange { start: 0, end: 2 }),
            omega_tau: raw.omega_tau.unwrap_or_else(|| vec![0.1, 1.0, 2.0]),
            t_max: raw.t_max.unwrap_or(10.0),
            output: raw.output,
            format: raw.format.unwrap_or(Format::Csv),
        })
    }

    /// Every parameter that can affect the numbers, in a fixed order.
    pub fn echo(&self) -> Vec<(String, String)> {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        let opt = |v: Option<String>| v.unwrap_or_else(|| "default".to_string());
        vec![
            ("preset".into(), opt(self.preset.map(|p| p.name().to_string()))),
            ("mode".into(), self.mode.to_string()),
            ("T".into(), format!("{}", self.t)),
            ("calT".into(), list(&self.cal_t)),
            ("epsilon".into(), format!("{}", self.epsilon)),
            ("n-max".into(), opt(self.n_max.map(|v| v.to_string()))),
            ("p-min".into(), opt(self.p_min.map(|v| v.to_string()))),
            ("p-max".into(), opt(self.p_max.map(|v| v.to_string()))),
            ("step".into(), format!("{}", self.step)),
            ("method".into(), self.method.to_string()),
            ("mc-samples".into(), opt(self.mc_samples.map(|v| v.to_string()))),
            ("seed".into(), opt(self.seed.map(|v| v.to_string()))),
            ("tol".into(), format!("{:e}", self.tol)),
            ("n".into(), self.n.to_string()),
            ("m".into(), self.m.to_string()),
            ("omega-tau".into(), list(&self.omega_tau)),
            ("t-max".into(), format!("{}", self.t_max)),
            ("format".into(), self.format.to_string()),
        ]
    }

    /// Output path: `--output`, else `$KDSIM_OUTPUT_DIR/<mode>.<ext>`, else stdout.
    pub fn output_path(&self) -> Option<PathBuf> {
        if let Some(p) = &self.output {
            return Some(p.clone());
        }
        std::env::var_os(OUTPUT_DIR_ENV)
            .filter(|d| !d.is_empty())
            .map(|d| PathBuf::from(d).join(format!("{}.{}", self.mode, self.format.extension())))
    }

    /// Diagnostics; any [`Severity::Error`] makes the configuration unusable.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut error = |msg: String| out.push(Diagnostic::error(msg));
        if !(self.t >= 0.0) || !self.t.is_finite() {
            error(format!("T must be finite and nonnegative, got {}", self.t));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            error(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            error(format!("step must be positive, got {}", self.step));
        }
        if !(self.tol > 0.0) {
            error(format!("tol must be positive, got {}", self.tol));
        }
        if let (Some(lo), Some(hi)) = (self.p_min, self.p_max) {
            if !(hi > lo) {
                error(format!("p-max ({hi}) must exceed p-min ({lo})"));
            }
        }
        if self.p_min.is_some() != self.p_max.is_some() {
            error("p-min and p-max must be given together".into());
        }
        if self.n_max == Some(0) {
            error("n-max must be positive".into());
        }
        if let Some(bad) = self.cal_t.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
            error(format!("calT values must be finite and nonnegative, got {bad}"));
        }
        let uses_cal_t = matches!(self.mode, Mode::Averaged | Mode::InmTable);
        if uses_cal_t && self.cal_t.is_empty() {
            error(format!("mode {} needs at least one calT value", self.mode));
        }
        if self.method == MethodChoice::ClosedForm && uses_cal_t {
            if let Some(c) = self.cal_t.iter().find(|c| **c >= 2.0) {
                error(format!(
                    "closed-form method needs calT < 2 (4F3 argument -calT²/4 outside the unit disk for calT = {c}); use quadrature"
                ));
            }
        }
        let wants_mc = self.method == MethodChoice::MonteCarlo
            || (self.mode == Mode::InmTable && self.mc_samples.is_some());
        if wants_mc && uses_cal_t {
            if self.seed.is_none() {
                error("Monte Carlo requires --seed".into());
            }
            if self.mc_samples.unwrap_or(MIN_MC_SAMPLES) < MIN_MC_SAMPLES {
                error(format!("mc-samples must be at least {MIN_MC_SAMPLES}"));
            }
        }
        if self.mode == Mode::InmTable {
            if self.cal_t.len() != 1 || !self.cal_t.iter().all(|c| *c > 0.0) {
                error("inm-table needs exactly one positive calT".into());
            }
            if !(self.t > 0.0) {
                error("inm-table needs T > 0".into());
            }
        }
        if self.mode == Mode::KernelDemo {
            if self.omega_tau.is_empty() || self.omega_tau.iter().any(|w| !w.is_finite()) {
                error("kernel-demo needs finite omega-tau values".into());
            }
            if !(self.t_max > 0.0) || !self.t_max.is_finite() {
                error(format!("t-max must be positive, got {}", self.t_max));
            }
        }
        if self.mode == Mode::Scenario {
            match self.preset.and_then(|p| p.beam()) {
                None => error("scenario mode needs --preset cold-beam-sec5".into()),
                Some(beam) => {
                    if let Some(w) = beam.detuning_warning() {
                        out.push(Diagnostic::warning(w));
                    }
                }
            }
        }
        if matches!(self.mode, Mode::Ideal | Mode::Averaged) && self.epsilon > 0.0 && self.epsilon <= 1.0 {
            out.push(Diagnostic::warning(format!(
                "peaks unresolved (requires epsilon > 1, got {})",
                self.epsilon
            )));
        }
        out
    }

    pub(crate) fn params(&self, cal_t: f64) -> Result<DiffractionParams> {
        let p = DiffractionParams::new(self.t, cal_t, self.epsilon)?;
        match self.n_max {
            Some(n) => p.with_n_max(n),
            None => Ok(p),
        }
    }
}

fn load_file(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
    parse_config_file(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn error(message: String) -> Self {
        Self {
            severity: Severity::Error,
            message,
        }
    }

    fn warning(message: String) -> Self {
        Self {
            severity: Severity::Warning,
            message,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}", self.message)
    }
}
