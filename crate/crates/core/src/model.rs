//! Physical parameters, optical drive and pixel geometry.
//!
//! Every field is stored in SI units. Configuration keys keep the
//! conventional symbol names (`k31`, `Gamma`, `n_NV`, ...).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{self, LAMBDA_PROBE, LAMBDA_PUMP, MHZ_PER_MW_INTENSITY, NANOMETER, PER_US};

/// Rate constants, cross sections, density and coherence times of the NV
/// ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhotophysicsParams {
    /// ³E(m_s=0) → ³A₂(m_s=0), s⁻¹
    pub k31: f64,
    /// ³E(m_s=±1) → ³A₂(m_s=±1), s⁻¹
    pub k42: f64,
    /// ³E(m_s=0) → ¹A₁ intersystem crossing, s⁻¹
    pub k35: f64,
    /// ³E(m_s=±1) → ¹A₁ intersystem crossing, s⁻¹
    pub k45: f64,
    /// ¹E → ³A₂(m_s=0), s⁻¹
    pub k61: f64,
    /// ¹E → ³A₂(m_s=±1), s⁻¹
    pub k62: f64,
    /// Photo-ionization out of ³E, s⁻¹ per W·m⁻².
    pub k38: f64,
    pub k48: f64,
    /// Recombination NV⁰* → NV⁻, s⁻¹ per W·m⁻².
    pub k71: f64,
    pub k72: f64,
    /// Total ¹A₁ → ¹E decay rate without plasmonic modification, s⁻¹.
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    #[serde(rename = "Gamma_NV0")]
    pub gamma_nv0: f64,
    pub sigma_t: f64,
    pub sigma_s: f64,
    #[serde(rename = "sigma_NV0")]
    pub sigma_nv0: f64,
    #[serde(rename = "n_NV")]
    pub n_nv: f64,
    #[serde(rename = "T2_star")]
    pub t2_star: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
    /// Rabi angular frequency, rad/s.
    #[serde(rename = "Omega_R")]
    pub omega_r: f64,
    /// Radiative part of `gamma`, s⁻¹.
    pub gamma_r: f64,
    #[serde(rename = "F_p")]
    pub purcell: f64,
    pub gamma_quenching: f64,
}

/// Radiative quantum efficiency of the singlet transition used to derive the
/// default `gamma_r`.
pub const SINGLET_QUANTUM_EFFICIENCY: f64 = 1e-3;

/// The tabulated room-temperature parameter set.
pub fn default_params() -> PhotophysicsParams {
    let gamma = 1e9;
    PhotophysicsParams {
        k31: 66.0 * PER_US,
        k42: 66.0 * PER_US,
        k35: 7.9 * PER_US,
        k45: 53.0 * PER_US,
        k61: 1.0 * PER_US,
        k62: 0.7 * PER_US,
        k38: 41.8 * MHZ_PER_MW_INTENSITY,
        k48: 41.8 * MHZ_PER_MW_INTENSITY,
        k71: 35.5 * MHZ_PER_MW_INTENSITY,
        k72: 35.5 * MHZ_PER_MW_INTENSITY,
        gamma,
        gamma_nv0: 53.0 * PER_US,
        sigma_t: 3e-21,
        sigma_s: 3e-22,
        sigma_nv0: 6e-21,
        n_nv: 28e23,
        t2_star: 200e-9,
        t2: 2e-6,
        omega_r: 2.0 * std::f64::consts::PI * 1.5e6,
        gamma_r: SINGLET_QUANTUM_EFFICIENCY * gamma,
        purcell: 1.0,
        gamma_quenching: 0.0,
    }
}

impl Default for PhotophysicsParams {
    fn default() -> Self {
        default_params()
    }
}

impl PhotophysicsParams {
    /// Effective ¹A₁ → ¹E rate γ_nr + F_p·γ_r + γ_quenching, with
    /// γ_nr = Γ − γ_r.
    pub fn singlet_decay(&self) -> f64 {
        (self.gamma - self.gamma_r) + self.purcell * self.gamma_r + self.gamma_quenching
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let named = [
            ("k31", self.k31),
            ("k42", self.k42),
            ("k35", self.k35),
            ("k45", self.k45),
            ("k61", self.k61),
            ("k62", self.k62),
            ("k38", self.k38),
            ("k48", self.k48),
            ("k71", self.k71),
            ("k72", self.k72),
            ("Gamma", self.gamma),
            ("Gamma_NV0", self.gamma_nv0),
            ("sigma_t", self.sigma_t),
            ("sigma_s", self.sigma_s),
            ("sigma_NV0", self.sigma_nv0),
            ("n_NV", self.n_nv),
            ("T2_star", self.t2_star),
            ("T2", self.t2),
            ("Omega_R", self.omega_r),
            ("gamma_r", self.gamma_r),
            ("F_p", self.purcell),
            ("gamma_quenching", self.gamma_quenching),
        ];
        for (name, value) in named {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::validation(
                    format!("{prefix}.{name}"),
                    format!("must be finite and nonnegative, got {value}"),
                ));
            }
        }
        if self.t2_star <= 0.0 {
            return Err(Error::validation(format!("{prefix}.T2_star"), "must be positive"));
        }
        if self.t2 < self.t2_star {
            return Err(Error::validation(
                format!("{prefix}.T2"),
                format!("T2 = {} s is shorter than T2_star = {} s", self.t2, self.t2_star),
            ));
        }
        if self.gamma_r > self.gamma {
            return Err(Error::validation(
                format!("{prefix}.gamma_r"),
                format!("radiative rate {} exceeds total decay Gamma = {}", self.gamma_r, self.gamma),
            ));
        }
        Ok(())
    }
}

/// Green pump and IR probe intensities (W·m⁻²) and the microwave switch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticalDrive {
    #[serde(rename = "I_t")]
    pub pump_intensity: f64,
    #[serde(rename = "I_s")]
    pub probe_intensity: f64,
    pub mw_on: bool,
    pub lambda_pump: f64,
    pub lambda_probe: f64,
}

impl Default for OpticalDrive {
    fn default() -> Self {
        OpticalDrive {
            pump_intensity: units::intensity_from_mw_um2(0.1),
            probe_intensity: units::intensity_from_mw_um2(1.0),
            mw_on: false,
            lambda_pump: LAMBDA_PUMP,
            lambda_probe: LAMBDA_PROBE,
        }
    }
}

impl OpticalDrive {
    pub fn dark() -> Self {
        OpticalDrive {
            pump_intensity: 0.0,
            probe_intensity: 0.0,
            ..Default::default()
        }
    }

    pub fn with_mw(self, mw_on: bool) -> Self {
        OpticalDrive { mw_on, ..self }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        for (name, value) in [("I_t", self.pump_intensity), ("I_s", self.probe_intensity)] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::validation(
                    format!("{prefix}.{name}"),
                    format!("intensity must be finite and nonnegative, got {value}"),
                ));
            }
        }
        for (name, value) in [("lambda_pump", self.lambda_pump), ("lambda_probe", self.lambda_probe)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::validation(format!("{prefix}.{name}"), "wavelength must be positive"));
            }
        }
        Ok(())
    }
}

/// Sensing pixel and grating geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PixelGeometry {
    /// Pixel side, m.
    #[serde(rename = "L")]
    pub side: f64,
    /// NV layer (sensing) thickness, m.
    #[serde(rename = "d_NV")]
    pub d_nv: f64,
    /// Grating period, m.
    #[serde(rename = "p")]
    pub period: f64,
    #[serde(rename = "w")]
    pub wire_width: f64,
    #[serde(rename = "t")]
    pub wire_thickness: f64,
    pub n_diamond: f64,
}

impl Default for PixelGeometry {
    fn default() -> Self {
        PixelGeometry {
            side: 1e-6,
            d_nv: 5e-6,
            period: 434.0 * NANOMETER,
            wire_width: 125.0 * NANOMETER,
            wire_thickness: 125.0 * NANOMETER,
            n_diamond: 2.4,
        }
    }
}

impl PixelGeometry {
    /// Sensing volume L²·d_NV.
    pub fn volume(&self) -> f64 {
        self.side * self.side * self.d_nv
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let named = [
            ("L", self.side),
            ("d_NV", self.d_nv),
            ("p", self.period),
            ("w", self.wire_width),
            ("t", self.wire_thickness),
            ("n_diamond", self.n_diamond),
        ];
        for (name, value) in named {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::validation(
                    format!("{prefix}.{name}"),
                    format!("must be positive, got {value}"),
                ));
            }
        }
        if self.wire_width >= self.period {
            return Err(Error::validation(
                format!("{prefix}.w"),
                format!("wire width {} must be below the period {}", self.wire_width, self.period),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_table_values() {
        let p = default_params();
        assert_eq!(p.k45, 53e6);
        assert_eq!(p.sigma_s, 3e-22);
        assert_eq!(p.n_nv, 2.8e24);
        assert!((p.gamma_r - 1e6).abs() < 1e-6);
        assert_eq!(p.purcell, 1.0);
        assert_eq!(p.gamma_quenching, 0.0);
        assert!((p.k38 - 0.0418).abs() < 1e-15);
    }

    #[test]
    fn defaults_satisfy_invariants() {
        default_params().validate("photophysics").unwrap();
        OpticalDrive::default().validate("drive").unwrap();
        PixelGeometry::default().validate("geometry").unwrap();
    }

    #[test]
    fn unmodified_singlet_decay_equals_gamma() {
        let p = default_params();
        assert!((p.singlet_decay() - p.gamma).abs() < 1e-3);
        let purcell = PhotophysicsParams { purcell: 11.0, ..p };
        assert!((purcell.singlet_decay() - (p.gamma + 10.0 * p.gamma_r)).abs() < 1e-3);
    }

    #[test]
    fn invariant_violations_name_the_field() {
        let p = PhotophysicsParams { t2: 1e-7, ..default_params() };
        match p.validate("photophysics") {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "photophysics.T2"),
            other => panic!("unexpected {other:?}"),
        }
        let p = PhotophysicsParams { gamma_r: 2e9, ..default_params() };
        assert!(p.validate("photophysics").is_err());
        let g = PixelGeometry { wire_width: 500e-9, ..Default::default() };
        assert!(g.validate("geometry").is_err());
    }
}
