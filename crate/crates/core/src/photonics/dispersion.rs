use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Period p solving (2π/λ)·n_d = (2π/λ)·sin θ + m·2π/p.
pub fn rwa_period(lambda: f64, n_d: f64, m_order: i32, theta_i: f64) -> Result<f64> {
    if m_order == 0 {
        return Err(Error::Domain("diffraction order m must be nonzero".into()));
    }
    let denom = n_d - theta_i.sin();
    let p = m_order as f64 * lambda / denom;
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::Domain(format!(
            "m = {m_order}, n_d - sin(theta) = {denom:.6} gives p = {p:.6e}"
        )));
    }
    Ok(p)
}

/// Signed incidence angle θ with sin θ = n_d − m·λ/p.
pub fn rwa_incidence_angle(lambda: f64, n_d: f64, m_order: i32, p: f64) -> Result<f64> {
    if m_order == 0 {
        return Err(Error::Domain("diffraction order m must be nonzero".into()));
    }
    if !(p > 0.0) {
        return Err(Error::Domain(format!("period must be positive, got {p}")));
    }
    let sin_theta = n_d - m_order as f64 * lambda / p;
    if sin_theta.abs() > 1.0 {
        return Err(Error::NoCoupling { sin_theta });
    }
    Ok(sin_theta.asin())
}

/// Grating-coupled surface-plasmon matching query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionQuery {
    pub lambda: f64,
    pub n_d: f64,
    pub m: i32,
    pub theta_i: f64,
    pub p: f64,
    /// Metal permittivity at `lambda`; `None` is the perfect-conductor limit.
    pub eps_metal: Option<Complex64>,
}

/// Re[(ω/c)·√(ε_m ε_d/(ε_m + ε_d))] − |k_x + m·2π/p| in rad/m.
///
/// A zero locates an SPP-Bloch-wave resonance; positive values mean the
/// plasmon momentum exceeds the grating-supplied momentum.
pub fn spp_bw_mismatch(q: &DispersionQuery) -> Result<f64> {
    let k0 = 2.0 * PI / q.lambda;
    let eps_d = q.n_d * q.n_d;
    let k_spp = match q.eps_metal {
        None => k0 * q.n_d,
        Some(eps_m) => {
            let sum = eps_m + eps_d;
            if sum.norm() < 1e-9 * eps_d.max(1.0) {
                return Err(Error::Pole(sum.norm()));
            }
            (k0 * (eps_m * eps_d / sum).sqrt()).re
        }
    };
    let grating = if q.m == 0 { 0.0 } else { q.m as f64 * 2.0 * PI / q.p };
    Ok(k_spp - (k0 * q.theta_i.sin() + grating).abs())
}
