use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::units::{photon_energy, ELECTRON_VOLT};

/// Single Lorentz oscillator added to the free-electron response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzTerm {
    pub strength: f64,
    pub resonance_ev: f64,
    pub width_ev: f64,
}

/// ε(ω) = ε∞ − ω_p²/(ω² + iγω) [+ Δε·ω_L²/(ω_L² − ω² − iγ_L ω)], energies in eV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrudeLorentz {
    pub eps_inf: f64,
    pub plasma_ev: f64,
    pub damping_ev: f64,
    #[serde(default)]
    pub lorentz: Option<LorentzTerm>,
}

impl DrudeLorentz {
    /// Free-electron fit for silver in the near infrared.
    pub fn silver() -> Self {
        DrudeLorentz {
            eps_inf: 3.7,
            plasma_ev: 9.1,
            damping_ev: 0.018,
            lorentz: None,
        }
    }

    pub fn permittivity(&self, lambda: f64) -> Complex64 {
        let w = photon_energy(lambda) / ELECTRON_VOLT;
        let i = Complex64::i();
        let mut eps = Complex64::from(self.eps_inf)
            - self.plasma_ev * self.plasma_ev / (w * w + i * self.damping_ev * w);
        if let Some(l) = self.lorentz {
            let w0 = l.resonance_ev;
            eps += l.strength * w0 * w0 / (w0 * w0 - w * w - i * l.width_ev * w);
        }
        eps
    }
}

impl Default for DrudeLorentz {
    fn default() -> Self {
        DrudeLorentz::silver()
    }
}
