use std::f64::consts::PI;

use crate::units::{EPSILON_0, HBAR, SPEED_OF_LIGHT};

/// Mean cos²θ between an in-plane field and the four ⟨111⟩ NV axes.
///
/// The four body diagonals of a cube form a spherical 2-design, so the
/// equal-weight mean of cos²θ is 1/3 for any field direction, including every
/// direction in the (100) surface plane. `orientation_mean_cos2` recomputes it.
pub const ORIENTATION_MEAN_COS2: f64 = 1.0 / 3.0;

const NV_AXES: [[f64; 3]; 4] = [
    [1.0, 1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
];

/// Equal-weight mean of cos²θ between `field` and the four NV axes.
pub fn orientation_mean_cos2(field: [f64; 3]) -> f64 {
    let norm2: f64 = field.iter().map(|v| v * v).sum();
    NV_AXES
        .iter()
        .map(|a| {
            let dot: f64 = a.iter().zip(&field).map(|(u, v)| u * v).sum();
            dot * dot / (3.0 * norm2)
        })
        .sum::<f64>()
        / NV_AXES.len() as f64
}

/// |E|² inside a medium of index `n_d` for a plane wave of intensity `intensity`.
pub fn plane_wave_field_sq(intensity: f64, n_d: f64) -> f64 {
    2.0 * intensity / (SPEED_OF_LIGHT * EPSILON_0 * n_d)
}

/// Golden-rule absorption rate (3/π²ħ)(γ/γ*)(λ/n)³·½ε₀n²|E|²·cos²θ.
pub fn golden_rule_absorption(gamma_r: f64, gamma_star: f64, lambda: f64, n_d: f64, e_sq: f64, cos2_theta: f64) -> f64 {
    let mode_volume = (lambda / n_d).powi(3);
    let energy_density = 0.5 * EPSILON_0 * n_d * n_d * e_sq;
    3.0 / (PI * PI * HBAR) * (gamma_r / gamma_star) * mode_volume * energy_density * cos2_theta
}

/// Linewidth γ* that makes the golden-rule rate of a plane wave equal σ_s·I/ħω,
/// using the orientation-averaged cos²θ.
pub fn calibrate_linewidth(sigma_s: f64, gamma_r: f64, lambda: f64, n_d: f64) -> f64 {
    calibrate_linewidth_with(sigma_s, gamma_r, lambda, n_d, ORIENTATION_MEAN_COS2)
}

pub fn calibrate_linewidth_with(sigma_s: f64, gamma_r: f64, lambda: f64, n_d: f64, cos2_theta: f64) -> f64 {
    6.0 / PI * gamma_r * lambda * lambda * cos2_theta / (n_d * n_d * sigma_s)
}
