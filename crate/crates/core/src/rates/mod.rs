//! Eight-level NV rate equations.
//!
//! Level indexing (1-based in names, 0-based in arrays):
//!
//! | level | state                  |
//! |-------|------------------------|
//! | 1     | ³A₂, m_s = 0           |
//! | 2     | ³A₂, m_s = ±1          |
//! | 3     | ³E,  m_s = 0           |
//! | 4     | ³E,  m_s = ±1          |
//! | 5     | ¹A₁ (singlet excited)  |
//! | 6     | ¹E  (singlet ground)   |
//! | 7     | NV⁰ excited            |
//! | 8     | NV⁰ ground             |
//!
//! The generator acts on column vectors of level densities, dn/dt = G·n, with
//! `G[(to, from)]` the rate of the `from → to` transition.

mod integrate;
mod steady;

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{OpticalDrive, PhotophysicsParams};
use crate::units::{HBAR, SPEED_OF_LIGHT};

pub use integrate::{evolve, evolve_with, IntegratorOptions, PopulationTrace, TrBdf2};
pub use steady::{null_space_dimension, steady_state, steady_state_from};

pub const N_LEVELS: usize = 8;

pub type Matrix8 = SMatrix<f64, N_LEVELS, N_LEVELS>;
pub type Vector8 = SMatrix<f64, N_LEVELS, 1>;

/// Incoherent microwave transition rate Ω_R²·T2*/2.
pub fn microwave_rate(omega_r: f64, t2_star: f64) -> f64 {
    omega_r * omega_r * t2_star / 2.0
}

/// Optical excitation rate σ·I/ħω scaled by the local field enhancement.
pub fn optical_rate(sigma: f64, intensity: f64, lambda: f64, enhancement: f64) -> f64 {
    enhancement * sigma * intensity * lambda / (HBAR * 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT)
}

/// Densities (m⁻³) of the eight levels at one spatial cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelPopulations(pub [f64; N_LEVELS]);

impl LevelPopulations {
    pub fn zeros() -> Self {
        LevelPopulations([0.0; N_LEVELS])
    }

    /// Whole density in a single level (1-based).
    pub fn all_in(level: usize, n_nv: f64) -> Self {
        let mut n = [0.0; N_LEVELS];
        n[level - 1] = n_nv;
        LevelPopulations(n)
    }

    /// Density of level `level` (1-based).
    pub fn level(&self, level: usize) -> f64 {
        self.0[level - 1]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn as_vector(&self) -> Vector8 {
        Vector8::from_column_slice(&self.0)
    }

    pub fn from_vector(v: &Vector8) -> Self {
        let mut n = [0.0; N_LEVELS];
        n.copy_from_slice(v.as_slice());
        LevelPopulations(n)
    }

    /// Ideal microwave π-pulse: exchanges the ground spin sublevels.
    pub fn spin_flipped(&self) -> Self {
        let mut n = self.0;
        n.swap(0, 1);
        LevelPopulations(n)
    }

    /// Checks positivity (absolute, in m⁻³) and conservation against `n_nv`.
    pub fn check(&self, n_nv: f64, rel_tol: f64, neg_tol: f64) -> Result<()> {
        if let Some((i, &v)) = self.0.iter().enumerate().find(|(_, &v)| v < -neg_tol || !v.is_finite()) {
            return Err(Error::validation(format!("n{}", i + 1), format!("negative or non-finite density {v}")));
        }
        let total = self.total();
        if ((total - n_nv) / n_nv).abs() > rel_tol {
            return Err(Error::validation(
                "populations",
                format!("sum {total:.12e} differs from n_NV {n_nv:.12e}"),
            ));
        }
        Ok(())
    }
}

/// Net ground-singlet population n6 − n5 that sets the IR absorption.
pub fn net_singlet_population(pop: &LevelPopulations) -> f64 {
    pop.level(6) - pop.level(5)
}

/// Effective (locally enhanced) drive rates entering a generator.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DriveRates {
    pub w_pump: f64,
    pub w_probe: f64,
    pub w_mw: f64,
    pub w_nv0: f64,
    /// Local green intensity multiplying the ionization/recombination
    /// coefficients, W·m⁻².
    pub local_pump_intensity: f64,
}

/// Transition-rate matrix with columns summing to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RateGenerator {
    matrix: Matrix8,
    rates: DriveRates,
}

impl RateGenerator {
    /// Wraps an arbitrary matrix after checking the generator invariants.
    pub fn from_matrix(matrix: Matrix8) -> Result<Self> {
        for j in 0..N_LEVELS {
            let mut sum = 0.0;
            let mut scale = 0.0f64;
            for i in 0..N_LEVELS {
                let g = matrix[(i, j)];
                if i != j && g < 0.0 {
                    return Err(Error::validation(
                        format!("G[{}->{}]", j + 1, i + 1),
                        "off-diagonal rate is negative",
                    ));
                }
                sum += g;
                scale = scale.max(g.abs());
            }
            if sum.abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::validation(format!("G column {}", j + 1), format!("sums to {sum:e}")));
            }
        }
        Ok(RateGenerator {
            matrix,
            rates: DriveRates::default(),
        })
    }

    pub fn matrix(&self) -> &Matrix8 {
        &self.matrix
    }

    pub fn rates(&self) -> &DriveRates {
        &self.rates
    }

    /// Rate of the `from → to` transition (1-based levels).
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.matrix[(to - 1, from - 1)]
    }

    /// Largest total outflow rate of any level.
    pub fn max_rate(&self) -> f64 {
        (0..N_LEVELS).map(|i| -self.matrix[(i, i)]).fold(0.0, f64::max)
    }
}

/// Assembles the eight-level generator for one cell.
///
/// Green-driven processes (triplet pumping, photo-ionization, NV⁰ excitation
/// and recombination) all see the local pump intensity `I_t·enh_pump`; the
/// singlet absorption and stimulated emission see `I_s·enh_probe`.
pub fn build_generator(
    params: &PhotophysicsParams,
    drive: &OpticalDrive,
    enh_pump: f64,
    enh_probe: f64,
) -> Result<RateGenerator> {
    if !(enh_pump >= 0.0 && enh_pump.is_finite()) {
        return Err(Error::validation("enh_pump", format!("must be nonnegative, got {enh_pump}")));
    }
    if !(enh_probe >= 0.0 && enh_probe.is_finite()) {
        return Err(Error::validation("enh_probe", format!("must be nonnegative, got {enh_probe}")));
    }
    let p = params;
    let i_green = drive.pump_intensity * enh_pump;
    let rates = DriveRates {
        w_pump: optical_rate(p.sigma_t, drive.pump_intensity, drive.lambda_pump, enh_pump),
        w_probe: optical_rate(p.sigma_s, drive.probe_intensity, drive.lambda_probe, enh_probe),
        w_mw: if drive.mw_on {
            microwave_rate(p.omega_r, p.t2_star)
        } else {
            0.0
        },
        w_nv0: optical_rate(p.sigma_nv0, drive.pump_intensity, drive.lambda_pump, enh_pump),
        local_pump_intensity: i_green,
    };
    let singlet = p.singlet_decay();
    let transitions: [(usize, usize, f64); 18] = [
        (1, 2, rates.w_mw),
        (2, 1, rates.w_mw),
        (1, 3, rates.w_pump),
        (2, 4, rates.w_pump),
        (3, 1, p.k31),
        (4, 2, p.k42),
        (3, 5, p.k35),
        (4, 5, p.k45),
        (3, 8, p.k38 * i_green),
        (4, 8, p.k48 * i_green),
        (5, 6, singlet + rates.w_probe),
        (6, 5, rates.w_probe),
        (6, 1, p.k61),
        (6, 2, p.k62),
        (7, 1, p.k71 * i_green),
        (7, 2, p.k72 * i_green),
        (7, 8, p.gamma_nv0),
        (8, 7, rates.w_nv0),
    ];
    let mut g = Matrix8::zeros();
    for (from, to, rate) in transitions {
        g[(to - 1, from - 1)] += rate;
        g[(from - 1, from - 1)] -= rate;
    }
    Ok(RateGenerator { matrix: g, rates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_params;
    use crate::units::intensity_from_mw_um2;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn microwave_rate_examples() {
        assert_eq!(microwave_rate(0.0, 2e-7), 0.0);
        let w = microwave_rate(2.0 * std::f64::consts::PI * 1.5e6, 200e-9);
        // (2π·1.5e6)²·2e-7/2 = 8.8826e6
        assert!(rel(w, 8.8826e6) < 1e-4, "{w}");
        let w2 = microwave_rate(2.0 * 2.0 * std::f64::consts::PI * 1.5e6, 200e-9);
        assert!(rel(w2, 4.0 * w) < 1e-14);
    }

    #[test]
    fn optical_rate_examples() {
        let green = optical_rate(3e-21, 1e8, 532e-9, 1.0);
        assert!(rel(green, 3e-21 * 1e8 / 3.735e-19) < 1e-3, "{green}");
        assert!(rel(green, 8.03e5) < 1e-3);
        let ir = optical_rate(3e-22, 1e9, 1042e-9, 1.0);
        assert!(rel(ir, 3e-22 * 1e9 / 1.907e-19) < 1e-3, "{ir}");
        assert!(rel(ir, 1.57e6) < 5e-3);
        assert_eq!(optical_rate(3e-21, 0.0, 532e-9, 5.0), 0.0);
    }

    #[test]
    fn dark_generator_has_only_spontaneous_rates() {
        let p = default_params();
        let g = build_generator(&p, &OpticalDrive::dark(), 1.0, 1.0).unwrap();
        assert_eq!(g.rate(1, 3), 0.0);
        assert_eq!(g.rate(1, 2), 0.0);
        assert_eq!(g.rate(3, 8), 0.0);
        assert_eq!(g.rate(8, 7), 0.0);
        assert_eq!(g.rate(7, 1), 0.0);
        assert_eq!(g.rate(3, 1), p.k31);
        assert_eq!(g.rate(6, 2), p.k62);
        assert_eq!(g.rate(7, 8), p.gamma_nv0);
        RateGenerator::from_matrix(*g.matrix()).unwrap();
    }

    #[test]
    fn singlet_entry_includes_probe_rate() {
        let p = default_params();
        for (i_s, enh) in [(0.0, 1.0), (1e9, 1.0), (1e9, 7.5), (3e10, 0.2)] {
            let drive = OpticalDrive {
                probe_intensity: i_s,
                ..OpticalDrive::default()
            };
            let g = build_generator(&p, &drive, 1.3, enh).unwrap();
            let w_probe = optical_rate(p.sigma_s, i_s, drive.lambda_probe, 1.0);
            assert!(rel(g.rate(5, 6), 1e9 + w_probe * enh) < 1e-14);
            assert!((g.rate(6, 5) - w_probe * enh).abs() <= 1e-9 * (1.0 + w_probe * enh));
        }
    }

    #[test]
    fn pump_entry_matches_optical_rate() {
        let p = default_params();
        let drive = OpticalDrive {
            pump_intensity: intensity_from_mw_um2(0.1),
            ..OpticalDrive::default()
        };
        for enh in [0.0, 1.0, 2.5] {
            let g = build_generator(&p, &drive, enh, 1.0).unwrap();
            let expected = 3e-21 * 1e8 / crate::units::photon_energy(532e-9) * enh;
            assert!((g.rate(1, 3) - expected).abs() <= 1e-9 * expected.max(1.0));
            assert!((g.rate(1, 3) - 8.03e5 * enh).abs() <= 1e-3 * 8.03e5 * enh.max(1e-9));
        }
    }

    #[test]
    fn microwave_only_when_switched_on() {
        let p = default_params();
        let off = build_generator(&p, &OpticalDrive::default(), 1.0, 1.0).unwrap();
        let on = build_generator(&p, &OpticalDrive::default().with_mw(true), 1.0, 1.0).unwrap();
        assert_eq!(off.rate(1, 2), 0.0);
        assert!(rel(on.rate(1, 2), microwave_rate(p.omega_r, p.t2_star)) < 1e-14);
        assert_eq!(on.rate(2, 1), on.rate(1, 2));
    }

    #[test]
    fn rejects_negative_enhancement() {
        assert!(build_generator(&default_params(), &OpticalDrive::default(), -1.0, 1.0).is_err());
    }

    #[test]
    fn net_singlet_examples() {
        let mut n = [0.0; 8];
        n[4] = 3.0;
        n[5] = 3.0;
        assert_eq!(net_singlet_population(&LevelPopulations(n)), 0.0);
        let full = LevelPopulations::all_in(6, 2.8e24);
        assert_eq!(net_singlet_population(&full), 2.8e24);
    }

    #[test]
    fn from_matrix_rejects_non_generators() {
        let mut m = Matrix8::zeros();
        m[(1, 0)] = 1.0;
        assert!(RateGenerator::from_matrix(m).is_err());
        m[(0, 0)] = -1.0;
        assert!(RateGenerator::from_matrix(m).is_ok());
        m[(2, 0)] = -0.5;
        m[(0, 0)] = -0.5;
        assert!(RateGenerator::from_matrix(m).is_err());
    }
}
