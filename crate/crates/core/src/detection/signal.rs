use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::homodyne::DetectionMode;
use super::populations::PopulationGrid;
use crate::error::{Error, Result};
use crate::model::PhotophysicsParams;
use crate::photonics::FieldMap;

/// Map from input-normalized absorption A_pixel to the NV-induced
/// reflection phase Δφ_NV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseModel {
    /// Δφ_NV = κ·A_pixel.
    Linear { kappa: f64 },
    /// Piecewise-linear interpolation of (A_pixel, Δφ_NV) points with
    /// strictly increasing A_pixel.
    Table { points: Vec<[f64; 2]> },
}

impl PhaseModel {
    pub fn validate(&self, field: &str) -> Result<()> {
        match self {
            PhaseModel::Linear { kappa } if !kappa.is_finite() => {
                Err(Error::validation(field, format!("kappa must be finite, got {kappa}")))
            }
            PhaseModel::Linear { .. } => Ok(()),
            PhaseModel::Table { points } => {
                if points.len() < 2 {
                    return Err(Error::validation(field, "phase table needs at least two points"));
                }
                if points.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
                    return Err(Error::validation(field, "phase table contains non-finite values"));
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(Error::validation(field, "phase table A_pixel must increase strictly"));
                }
                Ok(())
            }
        }
    }
}

/// Reads a two-column `A_pixel, dphi_rad` CSV.
pub fn load_phase_table(path: &Path) -> Result<PhaseModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if i == 0 && fields.first().is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if fields.len() != 2 {
            return Err(Error::Format(format!("{}:{}: expected 2 columns", path.display(), i + 1)));
        }
        let a: f64 = fields[0]
            .parse()
            .map_err(|_| Error::Format(format!("{}:{}: bad A_pixel `{}`", path.display(), i + 1, fields[0])))?;
        let phi: f64 = fields[1]
            .parse()
            .map_err(|_| Error::Format(format!("{}:{}: bad phase `{}`", path.display(), i + 1, fields[1])))?;
        points.push([a, phi]);
    }
    let model = PhaseModel::Table { points };
    model.validate(&path.display().to_string()).map_err(|e| Error::Format(e.to_string()))?;
    Ok(model)
}

/// Beam-splitter ratio, LO phase, bare reflectance and NV phase model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "delta_phi_LO")]
    pub delta_phi_lo: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
    pub mode: DetectionMode,
    /// Choose (R, Δφ_LO) per evaluation to maximize the homodyne SNR instead
    /// of using the fixed values above.
    pub optimize: bool,
    pub phase_model: PhaseModel,
    /// Two-column `A_pixel, dphi_rad` CSV that replaces `phase_model` when
    /// the configuration is resolved.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_table: Option<PathBuf>,
}

/// Slope of the default linear phase model, rad per unit A_pixel.
pub const DEFAULT_KAPPA: f64 = -80.0;

/// Bare reflectance that, together with [`DEFAULT_KAPPA`], places the
/// homodyne optimum at R ≈ 0.87, Δφ_LO ≈ 1.28π for the default drive and
/// synthetic maps.
pub const CALIBRATED_R0: f64 = 0.14;

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            r: 0.87,
            delta_phi_lo: 1.28 * std::f64::consts::PI,
            r0: 1.0,
            mode: DetectionMode::Homodyne,
            optimize: true,
            phase_model: PhaseModel::Linear { kappa: DEFAULT_KAPPA },
            phase_table: None,
        }
    }
}

impl DetectionConfig {
    /// Default configuration with the calibrated bare reflectance.
    pub fn calibrated() -> Self {
        DetectionConfig {
            r0: CALIBRATED_R0,
            ..DetectionConfig::default()
        }
    }

    /// Tabulated copy of the linear phase model over [0, a_max], for runs
    /// that exercise the table path.
    pub fn linear_as_table(&self, a_max: f64, points: usize) -> Result<DetectionConfig> {
        let PhaseModel::Linear { kappa } = self.phase_model else {
            return Err(Error::validation("phase_model", "not a linear model"));
        };
        let table = (0..points)
            .map(|k| {
                let a = a_max * k as f64 / (points - 1) as f64;
                [a, kappa * a]
            })
            .collect();
        Ok(DetectionConfig {
            phase_model: PhaseModel::Table { points: table },
            ..self.clone()
        })
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(0.0..=1.0).contains(&self.r) {
            return Err(Error::validation(format!("{prefix}.R"), format!("must lie in [0, 1], got {}", self.r)));
        }
        if !(self.r0 > 0.0 && self.r0 <= 1.0) {
            return Err(Error::validation(format!("{prefix}.R0"), format!("must lie in (0, 1], got {}", self.r0)));
        }
        if !self.delta_phi_lo.is_finite() {
            return Err(Error::validation(format!("{prefix}.delta_phi_LO"), "must be finite"));
        }
        self.phase_model.validate(&format!("{prefix}.phase_model"))
    }
}

/// Pixel absorption with and without microwaves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionSignal {
    pub i_nv_on: f64,
    pub i_nv_off: f64,
    pub a_pixel_on: f64,
    pub a_pixel_off: f64,
    pub delta_phi_nv_on: f64,
    pub delta_phi_nv_off: f64,
}

impl AbsorptionSignal {
    /// I_NV(Ω_R) − I_NV(0).
    pub fn contrast(&self) -> f64 {
        self.i_nv_on - self.i_nv_off
    }
}

/// Δφ_NV for a given A_pixel.
pub fn nv_phase(a_pixel: f64, config: &DetectionConfig) -> Result<f64> {
    match &config.phase_model {
        PhaseModel::Linear { kappa } => Ok(kappa * a_pixel),
        PhaseModel::Table { points } => {
            let (min, max) = (points[0][0], points[points.len() - 1][0]);
            if !(a_pixel >= min && a_pixel <= max) {
                return Err(Error::Extrapolation { value: a_pixel, min, max });
            }
            let k = points.partition_point(|p| p[0] <= a_pixel).clamp(1, points.len() - 1);
            let ([a0, f0], [a1, f1]) = (points[k - 1], points[k]);
            let t = (a_pixel - a0) / (a1 - a0);
            Ok(f0 + (f1 - f0) * t)
        }
    }
}

/// Fractional IR absorption σ_s/(R0·p)·∬|E/E₀|²(n6 − n5) dx dy over the
/// sensing depth `d`, for both microwave states.
pub fn pixel_absorption(
    on: &PopulationGrid,
    off: &PopulationGrid,
    map_probe: &FieldMap,
    params: &PhotophysicsParams,
    d: f64,
    config: &DetectionConfig,
) -> Result<AbsorptionSignal> {
    let i_nv = |grid: &PopulationGrid| -> Result<f64> {
        if grid.nx != map_probe.nx() {
            return Err(Error::Format("population grid does not match the probe map".into()));
        }
        let weighted: Vec<f64> = grid
            .net_singlet()
            .iter()
            .zip(map_probe.values())
            .map(|(n, e)| n * e)
            .collect();
        let integral = map_probe.integrate_to_depth(d, &weighted)?;
        Ok(params.sigma_s * integral / (config.r0 * map_probe.period()))
    };
    let i_nv_on = i_nv(on)?;
    let i_nv_off = i_nv(off)?;
    let a_pixel_on = i_nv_on * config.r0;
    let a_pixel_off = i_nv_off * config.r0;
    Ok(AbsorptionSignal {
        i_nv_on,
        i_nv_off,
        a_pixel_on,
        a_pixel_off,
        delta_phi_nv_on: nv_phase(a_pixel_on, config)?,
        delta_phi_nv_off: nv_phase(a_pixel_off, config)?,
    })
}

/// |r| = √(R0(1 − I_NV)) for (MW on, MW off).
pub fn reflection_magnitude(signal: &AbsorptionSignal, config: &DetectionConfig) -> Result<(f64, f64)> {
    let r = |i_nv: f64| {
        if i_nv > 1.0 {
            Err(Error::UnphysicalAbsorption(i_nv))
        } else {
            Ok((config.r0 * (1.0 - i_nv)).sqrt())
        }
    };
    Ok((r(signal.i_nv_on)?, r(signal.i_nv_off)?))
}
