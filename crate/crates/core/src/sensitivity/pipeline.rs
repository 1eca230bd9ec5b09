use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::formulas::{
    eta_ac, eta_cw, eta_spin_projection, optimal_tau, photons_per_spin, readout_fidelity, Estimate,
};
use super::readout::{optimize_readout_time, WindowOptimum};
use crate::detection::{
    homodyne_output, nv_phase, optimize_homodyne, pixel_absorption, reflection_magnitude,
    resolve_populations_to_depth, snr_shot_limited, AbsorptionSignal, DetectionConfig, DetectionMode, PhaseModel,
};
use crate::error::{Error, Result};
use crate::model::{OpticalDrive, PhotophysicsParams, PixelGeometry};
use crate::photonics::FieldMap;
use crate::rates::IntegratorOptions;
use crate::units::{intensity_to_mw_um2, sensitivity_to_pt_per_um, MICRON};

/// Which sensitivities to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Cw,
    Pulsed,
    #[default]
    Both,
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cw" => Ok(Protocol::Cw),
            "pulsed" => Ok(Protocol::Pulsed),
            "both" => Ok(Protocol::Both),
            other => Err(Error::validation("protocol", format!("expected cw, pulsed or both, got `{other}`"))),
        }
    }
}

/// Timing and bookkeeping choices for the sensitivity pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivitySettings {
    /// Measurement time used when optimizing the CW homodyne operating point.
    pub t_mea: f64,
    /// Green initialization time t_I.
    pub t_init: f64,
    /// Fixed free-precession time; `None` picks the η_ac-optimal τ.
    pub tau: Option<f64>,
    /// Readout simulation horizon and sample count.
    pub readout_horizon: f64,
    pub readout_samples: usize,
    /// Multiplies n_NV everywhere in the pipelines.
    pub conversion_efficiency: f64,
    pub protocol: Protocol,
}

impl Default for SensitivitySettings {
    fn default() -> Self {
        SensitivitySettings {
            t_mea: 10e-6,
            t_init: 5e-6,
            tau: None,
            readout_horizon: 10e-6,
            readout_samples: 1000,
            conversion_efficiency: 1.0,
            protocol: Protocol::Both,
        }
    }
}

impl SensitivitySettings {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        for (name, v) in [
            ("t_mea", self.t_mea),
            ("t_init", self.t_init),
            ("readout_horizon", self.readout_horizon),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("{prefix}.{name}"), format!("must be positive, got {v}")));
            }
        }
        if let Some(tau) = self.tau {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(Error::validation(format!("{prefix}.tau"), format!("must be positive, got {tau}")));
            }
        }
        if self.readout_samples < 10 {
            return Err(Error::validation(format!("{prefix}.readout_samples"), "need at least 10 samples"));
        }
        if !(self.conversion_efficiency > 0.0 && self.conversion_efficiency <= 1.0) {
            return Err(Error::validation(
                format!("{prefix}.conversion_efficiency"),
                format!("must lie in (0, 1], got {}", self.conversion_efficiency),
            ));
        }
        Ok(())
    }
}

/// Everything one pipeline evaluation reads.
#[derive(Debug, Clone, Copy)]
pub struct PipelineInputs<'a> {
    pub params: &'a PhotophysicsParams,
    pub drive: &'a OpticalDrive,
    pub geometry: &'a PixelGeometry,
    pub pump: &'a FieldMap,
    pub probe: &'a FieldMap,
    pub detection: &'a DetectionConfig,
    pub settings: &'a SensitivitySettings,
    pub solver: &'a IntegratorOptions,
}

impl PipelineInputs<'_> {
    fn effective_params(&self) -> PhotophysicsParams {
        PhotophysicsParams {
            n_nv: self.params.n_nv * self.settings.conversion_efficiency,
            ..*self.params
        }
    }

    /// (R, Δφ_LO) to use for `signal`.
    fn operating_point(&self, signal: &AbsorptionSignal) -> Result<(f64, f64)> {
        match self.detection.mode {
            DetectionMode::Direct => Ok((1.0, 0.0)),
            DetectionMode::Homodyne if self.detection.optimize => {
                let i_s = self.drive.probe_intensity;
                let opt = optimize_homodyne(signal, self.detection, i_s, self.settings.t_mea, self.geometry.side);
                match opt {
                    Ok(o) => Ok((o.r, o.delta_phi_lo)),
                    Err(Error::DegenerateOptimum(_)) => Ok((self.detection.r, self.detection.delta_phi_lo)),
                    Err(e) => Err(e),
                }
            }
            DetectionMode::Homodyne => Ok((self.detection.r, self.detection.delta_phi_lo)),
        }
    }
}

/// Steady-state (CW-ODMR) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwResult {
    pub signal: AbsorptionSignal,
    pub r: f64,
    pub delta_phi_lo: f64,
    /// SNR/√(Δt·L²) in Hz^(1/2)·m⁻¹.
    pub snr_density: f64,
    pub eta_cw: Estimate,
}

pub fn cw_pipeline(inputs: &PipelineInputs) -> Result<CwResult> {
    let params = inputs.effective_params();
    let d = inputs.geometry.d_nv;
    let solve = |mw| resolve_populations_to_depth(inputs.pump, inputs.probe, &params, &inputs.drive.with_mw(mw), d);
    let on = solve(true)?;
    let off = solve(false)?;
    let signal = pixel_absorption(&on, &off, inputs.probe, &params, d, inputs.detection)?;
    let (r, delta_phi_lo) = inputs.operating_point(&signal)?;
    let t = inputs.settings.t_mea;
    let side = inputs.geometry.side;
    let fixed = DetectionConfig {
        r,
        delta_phi_lo,
        ..inputs.detection.clone()
    };
    let snr = match snr_shot_limited(&signal, &fixed, inputs.drive.probe_intensity, side, t, DetectionMode::Homodyne) {
        Ok(v) => v,
        Err(Error::UndefinedSnr) => 0.0,
        Err(e) => return Err(e),
    };
    let snr_density = snr / (t * side * side).sqrt();
    Ok(CwResult {
        signal,
        r,
        delta_phi_lo,
        snr_density,
        eta_cw: eta_cw(snr_density, params.t2_star),
    })
}

/// Pulsed (Hahn-echo) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulsedResult {
    pub window: WindowOptimum,
    /// Readout-window-averaged absorption signal.
    pub signal: AbsorptionSignal,
    pub r: f64,
    pub delta_phi_lo: f64,
    /// Photons per spin per shot for m_s = 0 and m_s = ±1.
    pub a: f64,
    pub b: f64,
    pub sigma_r: Estimate,
    pub tau: f64,
    pub eta_sp_tau: f64,
    pub eta_ac: Estimate,
}

pub fn pulsed_pipeline(inputs: &PipelineInputs) -> Result<PulsedResult> {
    let params = inputs.effective_params();
    let s = inputs.settings;
    let d = inputs.geometry.d_nv;
    let ro = optimize_readout_time(
        &params,
        inputs.drive,
        inputs.pump,
        inputs.probe,
        d,
        s.readout_horizon,
        s.readout_samples,
        inputs.solver,
    )?;
    let t_read = ro.window.t_opt;
    let tr = &ro.transient;
    let (i_on, i_off) = tr.i_nv(params.sigma_s, inputs.detection.r0);

    let mean = |v: &[f64]| super::formulas::integrate_window(&tr.times, v, t_read) / t_read;
    let (mean_on, mean_off) = (mean(&i_on), mean(&i_off));
    let r0 = inputs.detection.r0;
    let averaged = AbsorptionSignal {
        i_nv_on: mean_on,
        i_nv_off: mean_off,
        a_pixel_on: mean_on * r0,
        a_pixel_off: mean_off * r0,
        delta_phi_nv_on: nv_phase(mean_on * r0, inputs.detection)?,
        delta_phi_nv_off: nv_phase(mean_off * r0, inputs.detection)?,
    };
    let (r, delta_phi_lo) = inputs.operating_point(&averaged)?;

    let mut out_on = Vec::with_capacity(tr.times.len());
    let mut out_off = Vec::with_capacity(tr.times.len());
    for k in 0..tr.times.len() {
        let sig = AbsorptionSignal {
            i_nv_on: i_on[k],
            i_nv_off: i_off[k],
            a_pixel_on: i_on[k] * r0,
            a_pixel_off: i_off[k] * r0,
            delta_phi_nv_on: nv_phase(i_on[k] * r0, inputs.detection)?,
            delta_phi_nv_off: nv_phase(i_off[k] * r0, inputs.detection)?,
        };
        let (m_on, m_off) = reflection_magnitude(&sig, inputs.detection)?;
        out_on.push(homodyne_output(m_on, sig.delta_phi_nv_on, r, delta_phi_lo));
        out_off.push(homodyne_output(m_off, sig.delta_phi_nv_off, r, delta_phi_lo));
    }
    let (a, b) = photons_per_spin(
        &tr.times,
        &out_off,
        &out_on,
        inputs.drive.probe_intensity,
        inputs.geometry.side,
        d,
        params.n_nv,
        t_read,
    );
    let sigma_r = readout_fidelity(a, b);
    let tau = s.tau.unwrap_or_else(|| optimal_tau(params.t2, s.t_init, t_read));
    let eta = sigma_r.map(|sr| eta_ac(params.n_nv, d, params.t2, sr, tau, s.t_init, t_read));
    Ok(PulsedResult {
        window: ro.window,
        signal: averaged,
        r,
        delta_phi_lo,
        a,
        b,
        sigma_r,
        tau,
        eta_sp_tau: eta_spin_projection(params.n_nv, d, tau),
        eta_ac: eta,
    })
}

/// Sensitivities for one operating point.
///
/// Sensitivities are in T·Hz^(−1/2)·m; divide by the pixel side to get the
/// sensitivity of one pixel. `eta_sp` uses τ = T2*.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub i_t: f64,
    pub i_s: f64,
    pub d_nv: f64,
    pub side: f64,
    pub mode: DetectionMode,
    pub protocol: Protocol,
    pub conversion_efficiency: f64,
    pub eta_sp: f64,
    pub eta_cw: Option<Estimate>,
    pub eta_ac: Option<Estimate>,
    pub sigma_r: Option<Estimate>,
    pub t_read_opt: Option<f64>,
    pub cw: Option<CwResult>,
    pub pulsed: Option<PulsedResult>,
    /// True when a field map or the phase model is synthetic.
    pub synthetic_inputs: bool,
}

pub const REPORT_CSV_UNITS: &str = "# units: I_t,I_s mW/um^2; d_NV um; eta_* pT/sqrt(Hz) for a 1 um^2 pixel; t_read_opt ns";
pub const REPORT_CSV_HEADER: &str = "I_t,I_s,d_NV,mode,eta_cw,eta_ac,eta_sp,sigma_R,t_read_opt,status";

fn cell(v: Option<Estimate>, f: impl Fn(f64) -> f64) -> String {
    match v {
        None => String::new(),
        Some(Estimate::Value(x)) => format!("{:.6e}", f(x)),
        Some(Estimate::Unmeasurable) => "unmeasurable".into(),
    }
}

impl SensitivityReport {
    pub fn csv_row(&self) -> String {
        let mut row = String::new();
        let _ = write!(
            row,
            "{:.6e},{:.6e},{:.6e},{},{},{},{:.6e},{},{},ok",
            intensity_to_mw_um2(self.i_t),
            intensity_to_mw_um2(self.i_s),
            self.d_nv / MICRON,
            self.mode.as_str(),
            cell(self.eta_cw, sensitivity_to_pt_per_um),
            cell(self.eta_ac, sensitivity_to_pt_per_um),
            sensitivity_to_pt_per_um(self.eta_sp),
            cell(self.sigma_r, |x| x),
            cell(self.t_read_opt.map(Estimate::Value), |t| t * 1e9),
        );
        row
    }

    /// CSV row for a failed point; the message is sanitized to one field.
    pub fn error_row(i_t: f64, i_s: f64, d_nv: f64, mode: DetectionMode, err: &Error) -> String {
        let msg: String = err.to_string().chars().map(|c| if c == ',' || c == '\n' { ';' } else { c }).collect();
        format!(
            "{:.6e},{:.6e},{:.6e},{},,,,,,error: {msg}",
            intensity_to_mw_um2(i_t),
            intensity_to_mw_um2(i_s),
            d_nv / MICRON,
            mode.as_str()
        )
    }
}

/// Runs the CW and/or pulsed pipelines selected by `inputs.settings.protocol`.
pub fn evaluate_sensitivity(inputs: &PipelineInputs) -> Result<SensitivityReport> {
    let protocol = inputs.settings.protocol;
    let cw = match protocol {
        Protocol::Cw | Protocol::Both => Some(cw_pipeline(inputs)?),
        Protocol::Pulsed => None,
    };
    let pulsed = match protocol {
        Protocol::Pulsed | Protocol::Both => Some(pulsed_pipeline(inputs)?),
        Protocol::Cw => None,
    };
    let n_eff = inputs.params.n_nv * inputs.settings.conversion_efficiency;
    Ok(SensitivityReport {
        i_t: inputs.drive.pump_intensity,
        i_s: inputs.drive.probe_intensity,
        d_nv: inputs.geometry.d_nv,
        side: inputs.geometry.side,
        mode: inputs.detection.mode,
        protocol,
        conversion_efficiency: inputs.settings.conversion_efficiency,
        eta_sp: eta_spin_projection(n_eff, inputs.geometry.d_nv, inputs.params.t2_star),
        eta_cw: cw.as_ref().map(|c| c.eta_cw),
        eta_ac: pulsed.as_ref().map(|p| p.eta_ac),
        sigma_r: pulsed.as_ref().map(|p| p.sigma_r),
        t_read_opt: pulsed.as_ref().map(|p| p.window.t_opt),
        cw,
        pulsed,
        synthetic_inputs: inputs.pump.is_synthetic()
            || inputs.probe.is_synthetic()
            || matches!(inputs.detection.phase_model, PhaseModel::Linear { .. }),
    })
}
