use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::signal::{reflection_magnitude, AbsorptionSignal, DetectionConfig};
use crate::error::{Error, Result};
use crate::optim::{argmax, golden_section_max};
use crate::units::{photon_energy, LAMBDA_PROBE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionMode {
    #[default]
    Homodyne,
    /// No local oscillator (R = 1).
    Direct,
}

impl DetectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectionMode::Homodyne => "homodyne",
            DetectionMode::Direct => "direct",
        }
    }
}

impl std::str::FromStr for DetectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homodyne" => Ok(DetectionMode::Homodyne),
            "direct" => Ok(DetectionMode::Direct),
            other => Err(Error::validation("mode", format!("expected homodyne or direct, got `{other}`"))),
        }
    }
}

/// Camera intensity normalized to I_s:
/// (1 − R) + R|r|² + 2√((1 − R)R)|r|cos(Δφ_LO + Δφ_NV).
pub fn homodyne_output(r_mag: f64, delta_phi_nv: f64, r: f64, delta_phi_lo: f64) -> f64 {
    (1.0 - r) + r * r_mag * r_mag + 2.0 * ((1.0 - r) * r).sqrt() * r_mag * (delta_phi_lo + delta_phi_nv).cos()
}

/// Normalized detected intensities (MW off, MW on) at splitting `r` and LO
/// phase `phi`.
pub fn detected_intensities(signal: &AbsorptionSignal, config: &DetectionConfig, r: f64, phi: f64) -> Result<(f64, f64)> {
    let (r_on, r_off) = reflection_magnitude(signal, config)?;
    Ok((
        homodyne_output(r_off, signal.delta_phi_nv_off, r, phi),
        homodyne_output(r_on, signal.delta_phi_nv_on, r, phi),
    ))
}

fn photon_rate_scale(i_s: f64, l: f64, t_mea: f64) -> Result<f64> {
    if !(t_mea > 0.0) {
        return Err(Error::validation("t_mea", format!("must be positive, got {t_mea}")));
    }
    Ok((t_mea * l * l * i_s / photon_energy(LAMBDA_PROBE)).sqrt())
}

fn shot_noise_snr(scale: f64, i0: f64, i1: f64) -> Result<f64> {
    let sum = i0 + i1;
    if sum <= 0.0 {
        return Err(Error::UndefinedSnr);
    }
    Ok(scale * (i0 - i1).abs() / sum.sqrt())
}

/// √(Δt L²/ħω)·|I_out(0) − I_out(Ω_R)|/√(I_out(0) + I_out(Ω_R)).
///
/// Homodyne mode uses `config.r` and `config.delta_phi_lo`; direct mode sets
/// R = 1.
pub fn snr_shot_limited(
    signal: &AbsorptionSignal,
    config: &DetectionConfig,
    i_s: f64,
    l: f64,
    t_mea: f64,
    mode: DetectionMode,
) -> Result<f64> {
    let scale = photon_rate_scale(i_s, l, t_mea)?;
    let (r, phi) = match mode {
        DetectionMode::Homodyne => (config.r, config.delta_phi_lo),
        DetectionMode::Direct => (1.0, 0.0),
    };
    let (i0, i1) = detected_intensities(signal, config, r, phi)?;
    shot_noise_snr(scale, i0, i1)
}

/// Low-contrast form √(I_out(0,0)Δt L²/2ħω)·(I_NV(Ω_R) − I_NV(0)), with
/// `baseline` = I_out(0,0)/I_s.
pub fn snr_low_contrast(signal: &AbsorptionSignal, baseline: f64, i_s: f64, l: f64, t_mea: f64) -> Result<f64> {
    let scale = photon_rate_scale(i_s * baseline / 2.0, l, t_mea)?;
    Ok(scale * signal.contrast())
}

/// Best homodyne operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneOptimum {
    pub r: f64,
    pub delta_phi_lo: f64,
    pub snr: f64,
}

/// Coarse grid for [`optimize_homodyne_with`]: `r_count` points spanning
/// R ∈ [0, 1] inclusive and `phi_count` points over [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomodyneGrid {
    pub r_count: usize,
    pub phi_count: usize,
    pub tol: f64,
}

impl Default for HomodyneGrid {
    fn default() -> Self {
        HomodyneGrid {
            r_count: 101,
            phi_count: 128,
            tol: 1e-10,
        }
    }
}

impl HomodyneGrid {
    pub fn r_values(&self) -> Vec<f64> {
        (0..self.r_count).map(|i| i as f64 / (self.r_count - 1) as f64).collect()
    }

    pub fn phi_values(&self) -> Vec<f64> {
        (0..self.phi_count).map(|j| TAU * j as f64 / self.phi_count as f64).collect()
    }
}

pub fn optimize_homodyne(
    signal: &AbsorptionSignal,
    config: &DetectionConfig,
    i_s: f64,
    t_mea: f64,
    l: f64,
) -> Result<HomodyneOptimum> {
    optimize_homodyne_with(signal, config, i_s, t_mea, l, &HomodyneGrid::default())
}

/// Grid search over (R, Δφ_LO) followed by cyclic golden-section refinement
/// around the best grid point.
///
/// Because the grid includes R = 1, the result is never below direct
/// detection.
pub fn optimize_homodyne_with(
    signal: &AbsorptionSignal,
    config: &DetectionConfig,
    i_s: f64,
    t_mea: f64,
    l: f64,
    grid: &HomodyneGrid,
) -> Result<HomodyneOptimum> {
    if grid.r_count < 2 || grid.phi_count < 3 {
        return Err(Error::validation("grid", "need at least 2 R points and 3 phase points"));
    }
    let scale = photon_rate_scale(i_s, l, t_mea)?;
    let (r_on, r_off) = reflection_magnitude(signal, config)?;
    let snr = |r: f64, phi: f64| {
        let i0 = homodyne_output(r_off, signal.delta_phi_nv_off, r, phi);
        let i1 = homodyne_output(r_on, signal.delta_phi_nv_on, r, phi);
        shot_noise_snr(scale, i0, i1).unwrap_or(f64::NAN)
    };

    let rs = grid.r_values();
    let phis = grid.phi_values();
    let values: Vec<f64> = rs.iter().flat_map(|&r| phis.iter().map(move |&p| (r, p))).map(|(r, p)| snr(r, p)).collect();
    let best = argmax(&values).ok_or(Error::DegenerateOptimum(0.0))?;
    if !(values[best] > 0.0) {
        return Err(Error::DegenerateOptimum(values[best]));
    }
    let (mut r, mut phi) = (rs[best / phis.len()], phis[best % phis.len()]);
    let mut value = values[best];

    let dr = 1.0 / (grid.r_count - 1) as f64;
    let dphi = TAU / grid.phi_count as f64;
    let (r_lo, r_hi) = ((r - dr).max(0.0), (r + dr).min(1.0));
    let (p_lo, p_hi) = (phi - dphi, phi + dphi);
    for _ in 0..500 {
        let before = value;
        let (nr, vr) = golden_section_max(|x| snr(x, phi), r_lo, r_hi, grid.tol);
        if vr >= value {
            r = nr;
            value = vr;
        }
        let (np, vp) = golden_section_max(|x| snr(r, x), p_lo, p_hi, grid.tol);
        if vp >= value {
            phi = np;
            value = vp;
        }
        if value - before <= 1e-15 * value {
            break;
        }
    }
    Ok(HomodyneOptimum {
        r,
        delta_phi_lo: phi.rem_euclid(TAU),
        snr: value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn signal(on: f64, off: f64, kappa: f64) -> AbsorptionSignal {
        AbsorptionSignal {
            i_nv_on: on,
            i_nv_off: off,
            a_pixel_on: on,
            a_pixel_off: off,
            delta_phi_nv_on: kappa * on,
            delta_phi_nv_off: kappa * off,
        }
    }

    #[test]
    fn output_limits() {
        assert!((homodyne_output(0.7, 0.3, 1.0, 1.1) - 0.49).abs() < 1e-15);
        assert_eq!(homodyne_output(0.7, 0.3, 0.0, 1.1), 1.0);
        assert!(homodyne_output(1.0, 0.4, 0.5, PI - 0.4).abs() < 1e-15);
    }

    #[test]
    fn zero_contrast_gives_zero_snr() {
        let s = signal(0.01, 0.01, 3.0);
        let cfg = DetectionConfig::default();
        assert_eq!(snr_shot_limited(&s, &cfg, 1e9, 1e-6, 1.0, DetectionMode::Homodyne).unwrap(), 0.0);
        assert_eq!(snr_low_contrast(&s, 1.0, 1e9, 1e-6, 1.0).unwrap(), 0.0);
        assert!(matches!(
            optimize_homodyne(&s, &cfg, 1e9, 1e-5, 1e-6),
            Err(Error::DegenerateOptimum(_))
        ));
    }

    #[test]
    fn shot_noise_scaling() {
        let s = signal(0.012, 0.01, 3.0);
        let cfg = DetectionConfig::default();
        let base = snr_shot_limited(&s, &cfg, 1e9, 1e-6, 1.0, DetectionMode::Direct).unwrap();
        let t4 = snr_shot_limited(&s, &cfg, 1e9, 1e-6, 4.0, DetectionMode::Direct).unwrap();
        let l3 = snr_shot_limited(&s, &cfg, 1e9, 3e-6, 1.0, DetectionMode::Direct).unwrap();
        assert!((t4 / base - 2.0).abs() < 1e-12);
        assert!((l3 / base - 3.0).abs() < 1e-12);
    }

    #[test]
    fn low_contrast_matches_direct() {
        let cfg = DetectionConfig::default();
        let s = signal(0.0105, 0.01, 0.0);
        let direct = snr_shot_limited(&s, &cfg, 1e9, 1e-6, 1e-5, DetectionMode::Direct).unwrap();
        let approx = snr_low_contrast(&s, cfg.r0, 1e9, 1e-6, 1e-5).unwrap();
        assert!((approx / direct - 1.0).abs() < 0.01, "{approx} {direct}");
    }

    #[test]
    fn undefined_snr_when_dark() {
        let cfg = DetectionConfig::default();
        let s = signal(1.0, 1.0, 0.0);
        assert!(matches!(
            snr_shot_limited(&s, &cfg, 1e9, 1e-6, 1.0, DetectionMode::Direct),
            Err(Error::UndefinedSnr)
        ));
    }

    #[test]
    fn optimum_is_local_maximum_and_beats_direct() {
        let cfg = DetectionConfig::default();
        let s = signal(0.004, 0.003, 25.0);
        let opt = optimize_homodyne(&s, &cfg, 1e9, 1e-5, 1e-6).unwrap();
        let direct = snr_shot_limited(&s, &cfg, 1e9, 1e-6, 1e-5, DetectionMode::Direct).unwrap();
        assert!(opt.snr >= direct);
        let at = |r: f64, p: f64| {
            let c = DetectionConfig {
                r,
                delta_phi_lo: p,
                ..cfg.clone()
            };
            snr_shot_limited(&s, &c, 1e9, 1e-6, 1e-5, DetectionMode::Homodyne).unwrap()
        };
        assert!((at(opt.r, opt.delta_phi_lo) - opt.snr).abs() < 1e-12 * opt.snr);
        for (dr, dp) in [(1e-3, 0.0), (-1e-3, 0.0), (0.0, 1e-3), (0.0, -1e-3)] {
            let r = (opt.r + dr).clamp(0.0, 1.0);
            assert!(at(r, opt.delta_phi_lo + dp) <= opt.snr * (1.0 + 1e-12));
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("direct".parse::<DetectionMode>().unwrap(), DetectionMode::Direct);
        assert!("camera".parse::<DetectionMode>().is_err());
    }
}
