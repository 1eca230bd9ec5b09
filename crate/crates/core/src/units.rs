//! Physical constants (CODATA 2018) and reporting-unit conversions.

pub const HBAR: f64 = 1.054_571_817e-34;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
pub const MU_0: f64 = 1.256_637_062_12e-6;
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
pub const ELECTRON_VOLT: f64 = 1.602_176_634e-19;

/// Electronic g-factor of the NV centre.
pub const G_NV: f64 = 2.003;

/// Pump (green) and probe (singlet IR) wavelengths.
pub const LAMBDA_PUMP: f64 = 532e-9;
pub const LAMBDA_PROBE: f64 = 1042e-9;

/// 1 mW/µm² expressed in W/m².
pub const MW_PER_UM2: f64 = 1e9;
/// 1 µs⁻¹ expressed in s⁻¹.
pub const PER_US: f64 = 1e6;
pub const MICRON: f64 = 1e-6;
pub const NANOMETER: f64 = 1e-9;

/// Conversion of a tabulated photo-ionization/recombination coefficient in
/// "MHz/mW" to SI, s⁻¹ per W·m⁻² of local intensity.
///
/// The coefficient is read as MHz per (mW/µm²), the intensity unit used on
/// every plot axis, so 1 MHz/mW = 1e6 s⁻¹ / 1e9 W·m⁻².
pub const MHZ_PER_MW_INTENSITY: f64 = 1e6 / MW_PER_UM2;

/// Photon energy ħω = 2πħc/λ in joules.
pub fn photon_energy(lambda: f64) -> f64 {
    2.0 * std::f64::consts::PI * HBAR * SPEED_OF_LIGHT / lambda
}

pub fn intensity_from_mw_um2(value: f64) -> f64 {
    value * MW_PER_UM2
}

pub fn intensity_to_mw_um2(value: f64) -> f64 {
    value / MW_PER_UM2
}

/// Per-root-area sensitivity (T·√s·m) to the sensitivity of a square pixel of
/// side 1 µm, in pT/√Hz.
pub fn sensitivity_to_pt_per_um(value: f64) -> f64 {
    value / MICRON * 1e12
}
