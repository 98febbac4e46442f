//! Time uncertainty from atomic beam parameters and its dimensionless scale.
//!
//! The arrival-time spread is the longitudinal packet width divided by the
//! mean velocity, with the width grown by free spreading and by the classical
//! momentum spread over the interaction time t:
//!
//!   τ = (M/⟨P_Z⟩) √(ε_Z² + (ħ/2M)² t²/ε_Z² + (ℰ/M)² t²).

use std::fmt;
use std::str::FromStr;


use crate::error::{Error, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_8e-34;

/// Sodium-23 atomic mass, kg.
pub const SODIUM_MASS: f64 = 3.82e-26;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamScenario {
    /// Atomic mass M, kg.
    pub mass: f64,
    /// Mean longitudinal momentum ⟨P_Z⟩, kg·m/s.
    pub mean_p_z: f64,
    /// Longitudinal packet width ε_Z, m.
    pub eps_z: f64,
    /// Classical longitudinal momentum spread ℰ, kg·m/s.
    pub class_spread: f64,
    /// Interaction time t, s.
    pub t_int: f64,
    /// Rabi frequency Ω, rad/s.
    pub rabi: f64,
    /// Detuning Δ, rad/s.
    pub detuning: f64,
}

impl BeamScenario {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("mean_p_z", self.mean_p_z),
            ("eps_z", self.eps_z),
            ("t_int", self.t_int),
            ("rabi", self.rabi),
            ("detuning", self.detuning),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.class_spread >= 0.0) || !self.class_spread.is_finite() {
            return Err(Error::Domain(format!(
                "class_spread must be nonnegative, got {}",
                self.class_spread
            )));
        }
        Ok(())
    }

    /// The effective Hamiltonian needs Δ ≫ Ω; warn below Δ = 10 Ω.
    pub fn detuning_warning(&self) -> Option<String> {
        (self.detuning < 10.0 * self.rabi).then(|| {
            format!(
                "large-detuning approximation questionable: detuning/rabi = {:.3} < 10",
                self.detuning / self.rabi
            )
        })
    }

    pub fn mean_velocity(&self) -> f64 {
        self.mean_p_z / self.mass
    }

    /// 2Ω²/Δ in rad/s: the factor turning times into T and 𝒯.
    pub fn light_shift_rate(&self) -> f64 {
        2.0 * self.rabi * self.rabi / self.detuning
    }
}

/// Which addend under the square root dominates. Ties go to the earlier variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DominantTerm {
    PacketWidth,
    SchrodingerSpread,
    ClassicalSpread,
}

impl DominantTerm {
    pub fn label(&self) -> &'static str {
        match self {
            DominantTerm::PacketWidth => "packet_width",
            DominantTerm::SchrodingerSpread => "schrodinger_spread",
            DominantTerm::ClassicalSpread => "classical_spread",
        }
    }
}

impl fmt::Display for DominantTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauEstimate {
    /// τ, s.
    pub tau: f64,
    /// ε_Z², m².
    pub packet_width: f64,
    /// (ħ/2M)² t²/ε_Z², m².
    pub schrodinger_spread: f64,
    /// (ℰ/M)² t², m².
    pub classical_spread: f64,
}

impl TauEstimate {
    pub fn dominant(&self) -> DominantTerm {
        let mut best = (DominantTerm::PacketWidth, self.packet_width);
        for cand in [
            (DominantTerm::SchrodingerSpread, self.schrodinger_spread),
            (DominantTerm::ClassicalSpread, self.classical_spread),
        ] {
            if cand.1 > best.1 {
                best = cand;
            }
        }
        best.0
    }
}

pub fn tau_estimate(s: &BeamScenario) -> Result<TauEstimate> {
    tau_estimate_with_hbar(s, HBAR)
}

pub(crate) fn tau_estimate_with_hbar(s: &BeamScenario, hbar: f64) -> Result<TauEstimate> {
    s.validate()?;
    let spread = hbar / (2.0 * s.mass) * s.t_int / s.eps_z;
    let classical = s.class_spread / s.mass * s.t_int;
    let est = TauEstimate {
        tau: 0.0,
        packet_width: s.eps_z * s.eps_z,
        schrodinger_spread: spread * spread,
        classical_spread: classical * classical,
    };
    let width = (est.packet_width + est.schrodinger_spread + est.classical_spread).sqrt();
    Ok(TauEstimate {
        tau: width / s.mean_velocity(),
        ..est
    })
}

/// Dimensionless (T, 𝒯) = 2Ω²/Δ · (t_int, τ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessTimes {
    pub t: f64,
    pub cal_t: f64,
}

pub fn cal_t(s: &BeamScenario, tau: f64) -> Result<DimensionlessTimes> {
    s.validate()?;
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("tau must be nonnegative, got {tau}")));
    }
    let rate = s.light_shift_rate();
    Ok(DimensionlessTimes {
        t: rate * s.t_int,
        cal_t: rate * tau,
    })
}

pub fn dominant_term(s: &BeamScenario) -> Result<DominantTerm> {
    Ok(tau_estimate(s)?.dominant())
}

/// Named parameter sets loadable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// T = 10, ε = 10, 𝒯 ∈ {0, 1, 10}.
    Figure2,
    /// Cold sodium beam: v = 10³ m/s, ε_Z = 10⁻¹¹ m, t = 10⁻⁹ s, ℰ/⟨P_Z⟩ = 10⁻³.
    ColdBeamSec5,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::Figure2, Preset::ColdBeamSec5];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Figure2 => "figure2",
            Preset::ColdBeamSec5 => "cold-beam-sec5",
        }
    }

    /// Dimensionless (T, ε, 𝒯 list) of the diffraction scan.
    pub fn diffraction(&self) -> Option<(f64, f64, Vec<f64>)> {
        match self {
            Preset::Figure2 => Some((10.0, 10.0, vec![0.0, 1.0, 10.0])),
            Preset::ColdBeamSec5 => None,
        }
    }

    /// Beam parameters. The atomic species, Ω and Δ are assumptions: sodium
    /// with Ω = 10¹¹ rad/s and Δ = 2·10¹² rad/s, so 2Ω²/Δ = 10¹⁰ rad/s and
    /// T = 10 at t = 1 ns.
    pub fn beam(&self) -> Option<BeamScenario> {
        match self {
            Preset::Figure2 => None,
            Preset::ColdBeamSec5 => {
                let mean_p_z = SODIUM_MASS * 1e3;
                Some(BeamScenario {
                    mass: SODIUM_MASS,
                    mean_p_z,
                    eps_z: 1e-11,
                    class_spread: 1e-3 * mean_p_z,
                    t_int: 1e-9,
                    rabi: 1e11,
                    detuning: 2e12,
                })
            }
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown preset '{s}' (expected one of: figure2, cold-beam-sec5)"
                ))
            })
    }
}
