use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::optim::golden_section_max;
use crate::units::{photon_energy, BOHR_MAGNETON, G_NV, HBAR, LAMBDA_PROBE};

/// A quantity that may be undefined because the readout carries no
/// information (zero SNR, identical photon counts).
///
/// Serializes as a number or the string `"unmeasurable"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimate {
    Value(f64),
    Unmeasurable,
}

impl Estimate {
    pub fn value(self) -> Option<f64> {
        match self {
            Estimate::Value(v) => Some(v),
            Estimate::Unmeasurable => None,
        }
    }

    pub fn map(self, f: impl FnOnce(f64) -> f64) -> Estimate {
        match self {
            Estimate::Value(v) => Estimate::Value(f(v)),
            Estimate::Unmeasurable => Estimate::Unmeasurable,
        }
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimate::Value(v) => write!(f, "{v:.6e}"),
            Estimate::Unmeasurable => f.write_str("unmeasurable"),
        }
    }
}

impl Serialize for Estimate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Estimate::Value(v) => s.serialize_f64(*v),
            Estimate::Unmeasurable => s.serialize_str("unmeasurable"),
        }
    }
}

impl<'de> Deserialize<'de> for Estimate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Estimate::Value(v)),
            Raw::Text(t) if t == "unmeasurable" => Ok(Estimate::Unmeasurable),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected number or \"unmeasurable\", got {t}"))),
        }
    }
}

fn gyromagnetic_energy() -> f64 {
    G_NV * BOHR_MAGNETON
}

/// CW-ODMR sensitivity ħΓ_MW/(gµ_B)/snr_density with Γ_MW = 2/T2*, in
/// T·Hz^(−1/2)·m (divide by the pixel side for a given area).
///
/// `snr_density` is SNR/√(Δt·L²).
pub fn eta_cw(snr_density: f64, t2_star: f64) -> Estimate {
    if !(snr_density > 0.0) {
        return Estimate::Unmeasurable;
    }
    Estimate::Value(HBAR * (2.0 / t2_star) / gyromagnetic_energy() / snr_density)
}

/// ħ/(gµ_B√(n_NV d_NV τ)) in T·Hz^(−1/2)·m.
pub fn eta_spin_projection(n_nv: f64, d_nv: f64, tau: f64) -> f64 {
    HBAR / (gyromagnetic_energy() * (n_nv * d_nv * tau).sqrt())
}

/// σ_R = √(1 + 2(a + b)/(a − b)²).
pub fn readout_fidelity(a: f64, b: f64) -> Estimate {
    if a == b {
        return Estimate::Unmeasurable;
    }
    Estimate::Value((1.0 + 2.0 * (a + b) / ((a - b) * (a - b))).sqrt())
}

/// Hahn-echo AC sensitivity in T·Hz^(−1/2)·m:
/// η_sp(τ)·σ_R·e^(τ/T2)·√(1 + (t_I + t_R)/τ).
pub fn eta_ac(n_nv: f64, d_nv: f64, t2: f64, sigma_r: f64, tau: f64, t_i: f64, t_r: f64) -> f64 {
    eta_spin_projection(n_nv, d_nv, tau) * sigma_r * (tau / t2).exp() * (1.0 + (t_i + t_r) / tau).sqrt()
}

/// Free-precession time in (0, 3·T2] minimizing η_ac for fixed overheads,
/// found by a log-spaced scan and golden-section refinement.
pub fn optimal_tau(t2: f64, t_i: f64, t_r: f64) -> f64 {
    let objective = |tau: f64| -(tau / t2 + 0.5 * (tau + t_i + t_r).ln() - tau.ln());
    let hi = 3.0 * t2;
    let grid = crate::optim::spaced(hi * 1e-6, hi, 241, true);
    let values: Vec<f64> = grid.iter().map(|&t| objective(t)).collect();
    let k = crate::optim::argmax(&values).expect("finite objective");
    let lo = grid[k.saturating_sub(1)];
    let up = grid[(k + 1).min(grid.len() - 1)];
    golden_section_max(objective, lo, up, 1e-12 * t2).0
}

/// Photons detected per spin per shot, (a, b) for the m_s = 0 (MW-off) and
/// m_s = ±1 (MW-on) preparations.
///
/// `out_off`/`out_on` are camera intensities normalized to I_s sampled at
/// `times`; the flux I_s·L²·out/ħω is integrated over [0, t_read] with the
/// trapezoid rule and divided by N_spins = n_NV·L²·d_NV.
pub fn photons_per_spin(
    times: &[f64],
    out_off: &[f64],
    out_on: &[f64],
    i_s: f64,
    side: f64,
    d_nv: f64,
    n_nv: f64,
    t_read: f64,
) -> (f64, f64) {
    let scale = i_s * side * side / photon_energy(LAMBDA_PROBE) / (n_nv * side * side * d_nv);
    (
        scale * integrate_window(times, out_off, t_read),
        scale * integrate_window(times, out_on, t_read),
    )
}

/// Same as [`photons_per_spin`] for populations frozen over the window.
pub fn photons_per_spin_static(
    out_off: f64,
    out_on: f64,
    i_s: f64,
    side: f64,
    d_nv: f64,
    n_nv: f64,
    t_read: f64,
) -> (f64, f64) {
    photons_per_spin(&[0.0, t_read], &[out_off; 2], &[out_on; 2], i_s, side, d_nv, n_nv, t_read)
}

/// ∫₀^t f over piecewise-linear samples, interpolating at `t`.
pub fn integrate_window(times: &[f64], f: &[f64], t: f64) -> f64 {
    let mut total = 0.0;
    for k in 1..times.len() {
        let (t0, t1) = (times[k - 1], times[k]);
        if t0 >= t {
            break;
        }
        if t1 <= t {
            total += 0.5 * (t1 - t0) * (f[k - 1] + f[k]);
        } else {
            let ft = f[k - 1] + (f[k] - f[k - 1]) * (t - t0) / (t1 - t0);
            total += 0.5 * (t - t0) * (f[k - 1] + ft);
        }
    }
    total
}
