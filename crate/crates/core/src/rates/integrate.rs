//! Adaptive TR-BDF2 integration of dn/dt = G·n.
//!
//! TR-BDF2 is L-stable and second order; the local error is estimated by step
//! doubling. Because 1ᵀG = 0 every stage matrix preserves Σn exactly up to
//! round-off, so conservation holds independently of the step size.

use std::io::Write;

use nalgebra::LU;
use serde::{Deserialize, Serialize};

use super::{LevelPopulations, Matrix8, RateGenerator, Vector8, N_LEVELS};
use crate::error::{Error, Result};

/// Clamping threshold for round-off negatives, as a fraction of n_NV.
pub const NEGATIVE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorOptions {
    pub rtol: f64,
    /// Absolute tolerance on populations expressed as fractions of n_NV.
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-8,
            atol: 1e-14,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return Err(Error::Validation {
                field: format!("{prefix}.rtol"),
                reason: format!("must lie in (0, 1), got {}", self.rtol),
            });
        }
        if !(self.atol > 0.0 && self.atol.is_finite()) {
            return Err(Error::Validation {
                field: format!("{prefix}.atol"),
                reason: format!("must be positive, got {}", self.atol),
            });
        }
        if self.max_steps == 0 {
            return Err(Error::Validation {
                field: format!("{prefix}.max_steps"),
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Time samples and the populations at each of them.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTrace {
    pub times: Vec<f64>,
    pub samples: Vec<LevelPopulations>,
    /// Number of sample entries clamped from [−1e-12·n_NV, 0) to zero.
    pub clamped: usize,
    /// Most negative raw value seen at a sample, as a fraction of n_NV.
    pub min_raw_fraction: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl PopulationTrace {
    pub fn last(&self) -> &LevelPopulations {
        self.samples.last().expect("trace always holds the initial sample")
    }

    /// Level density over time (1-based level).
    pub fn level_series(&self, level: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.level(level)).collect()
    }

    /// Writes `time_s,n1..n8` with one header row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time_s,n1,n2,n3,n4,n5,n6,n7,n8")?;
        for (t, s) in self.times.iter().zip(&self.samples) {
            write!(w, "{t:.9e}")?;
            for v in s.0 {
                write!(w, ",{v:.9e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// One-step TR-BDF2 propagator for a fixed step size.
pub struct TrBdf2 {
    trapezoid_lhs: LU<f64, nalgebra::Const<8>, nalgebra::Const<8>>,
    trapezoid_rhs: Matrix8,
    bdf_lhs: LU<f64, nalgebra::Const<8>, nalgebra::Const<8>>,
}

const GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;

impl TrBdf2 {
    pub fn new(g: &Matrix8, h: f64) -> Self {
        let id = Matrix8::identity();
        let half = 0.5 * GAMMA * h;
        let d = (1.0 - GAMMA) / (2.0 - GAMMA);
        TrBdf2 {
            trapezoid_lhs: (id - g * half).lu(),
            trapezoid_rhs: id + g * half,
            bdf_lhs: (id - g * (d * h)).lu(),
        }
    }

    pub fn step(&self, y: &Vector8) -> Vector8 {
        let w = 1.0 / (GAMMA * (2.0 - GAMMA));
        let c = (1.0 - GAMMA) * (1.0 - GAMMA) * w;
        let stage = self
            .trapezoid_lhs
            .solve(&(self.trapezoid_rhs * y))
            .expect("I - hγG/2 is an M-matrix");
        self.bdf_lhs
            .solve(&(stage * w - y * c))
            .expect("I - hdG is an M-matrix")
    }
}

fn error_norm(err: &Vector8, a: &Vector8, b: &Vector8, opts: &IntegratorOptions) -> f64 {
    (0..N_LEVELS)
        .map(|i| err[i].abs() / (opts.atol + opts.rtol * a[i].abs().max(b[i].abs())))
        .fold(0.0, f64::max)
}

fn sample_times(t_end: f64, sampling: f64) -> Vec<f64> {
    let n = (t_end / sampling * (1.0 + 1e-12)).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * sampling).collect();
    if t_end - times[n] > 1e-9 * sampling {
        times.push(t_end);
    } else {
        times[n] = t_end;
    }
    times
}

/// Integrates from `initial` to `t_end`, reporting samples every `sampling`
/// seconds (plus `t_end`), with default tolerances.
pub fn evolve(gen: &RateGenerator, initial: &LevelPopulations, t_end: f64, sampling: f64) -> Result<PopulationTrace> {
    evolve_with(gen, initial, t_end, sampling, &IntegratorOptions::default())
}

pub fn evolve_with(
    gen: &RateGenerator,
    initial: &LevelPopulations,
    t_end: f64,
    sampling: f64,
    opts: &IntegratorOptions,
) -> Result<PopulationTrace> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::validation("t_end", format!("must be positive, got {t_end}")));
    }
    if !(sampling > 0.0 && sampling.is_finite()) {
        return Err(Error::validation("sampling", format!("must be positive, got {sampling}")));
    }
    let n_nv = initial.total();
    if !(n_nv > 0.0) {
        return Err(Error::validation("initial", "total population must be positive"));
    }
    initial.check(n_nv, 1e-9, NEGATIVE_CLAMP * n_nv)?;

    let g = gen.matrix();
    let times = sample_times(t_end, sampling);
    let mut trace = PopulationTrace {
        times: times.clone(),
        samples: Vec::with_capacity(times.len()),
        clamped: 0,
        min_raw_fraction: 0.0,
        accepted_steps: 0,
        rejected_steps: 0,
    };

    let mut y = initial.as_vector() / n_nv;
    trace.samples.push(*initial);

    let max_rate = gen.max_rate();
    let h_min = t_end * 1e-14;
    let mut h = if max_rate > 0.0 {
        (1e-3 / max_rate).min(sampling)
    } else {
        sampling
    };
    let mut t = 0.0;

    for &target in &times[1..] {
        while t < target {
            let remaining = target - t;
            let landing = h >= remaining * (1.0 - 1e-12);
            let step = if landing { remaining } else { h };

            let full = TrBdf2::new(g, step).step(&y);
            let halves = TrBdf2::new(g, 0.5 * step);
            let two_halves = halves.step(&halves.step(&y));
            let err = (two_halves - full) / 3.0;
            let en = error_norm(&err, &y, &two_halves, opts);

            if en <= 1.0 {
                t = if landing { target } else { t + step };
                y = two_halves;
                trace.accepted_steps += 1;
                if trace.accepted_steps > opts.max_steps {
                    return Err(Error::Stiffness {
                        t,
                        h: step,
                        detail: format!("exceeded {} steps", opts.max_steps),
                    });
                }
            } else {
                trace.rejected_steps += 1;
            }
            let factor = if en == 0.0 {
                5.0
            } else {
                (0.9 * en.powf(-1.0 / 3.0)).clamp(0.2, 5.0)
            };
            if !landing || en > 1.0 {
                h = step * factor;
            } else {
                h = h.max(step * factor);
            }
            if h < h_min {
                return Err(Error::Stiffness {
                    t,
                    h,
                    detail: format!("error norm {en:.3e}; stiffest rate {max_rate:.3e} s^-1"),
                });
            }
        }
        let mut n = [0.0; N_LEVELS];
        for (i, v) in n.iter_mut().enumerate() {
            let raw = y[i];
            trace.min_raw_fraction = trace.min_raw_fraction.min(raw);
            if raw < -NEGATIVE_CLAMP {
                return Err(Error::NegativePopulation { level: i + 1, value: raw, t });
            }
            if raw < 0.0 {
                trace.clamped += 1;
                *v = 0.0;
            } else {
                *v = raw * n_nv;
            }
        }
        trace.samples.push(LevelPopulations(n));
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{default_params, OpticalDrive};
    use crate::rates::{build_generator, steady_state};
    use crate::units::intensity_from_mw_um2;

    #[test]
    fn frozen_dynamics_keep_the_initial_state() {
        let gen = RateGenerator::from_matrix(Matrix8::zeros()).unwrap();
        let init = LevelPopulations([1.0, 2.0, 0.0, 0.5, 0.0, 0.0, 3.0, 0.25]);
        let trace = evolve(&gen, &init, 1e-6, 1e-7).unwrap();
        assert_eq!(trace.times.len(), 11);
        for s in &trace.samples {
            for i in 0..8 {
                assert!((s.0[i] - init.0[i]).abs() < 1e-14 * init.total());
            }
        }
    }

    #[test]
    fn sample_grid_ends_at_t_end() {
        assert_eq!(sample_times(1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let t = sample_times(1.0, 0.3);
        assert_eq!(t.len(), 5);
        assert_eq!(*t.last().unwrap(), 1.0);
    }

    #[test]
    fn dark_excited_state_decays_exponentially() {
        let p = default_params();
        let gen = build_generator(&p, &OpticalDrive::dark(), 1.0, 1.0).unwrap();
        let rate = p.k31 + p.k35;
        let init = LevelPopulations::all_in(3, 1.0);
        let opts = IntegratorOptions {
            rtol: 1e-10,
            atol: 1e-16,
            ..Default::default()
        };
        let trace = evolve_with(&gen, &init, 5.0 / rate, 0.25 / rate, &opts).unwrap();
        for (t, s) in trace.times.iter().zip(&trace.samples) {
            let exact = (-rate * t).exp();
            assert!((s.level(3) - exact).abs() < 1e-6 * exact + 1e-14, "t = {t}: {} vs {exact}", s.level(3));
        }
    }

    #[test]
    fn conservation_and_positivity_under_strong_drive() {
        let p = default_params();
        let drive = OpticalDrive {
            pump_intensity: intensity_from_mw_um2(5.0),
            probe_intensity: intensity_from_mw_um2(20.0),
            mw_on: true,
            ..OpticalDrive::default()
        };
        let gen = build_generator(&p, &drive, 10.0, 30.0).unwrap();
        let trace = evolve(&gen, &LevelPopulations::all_in(1, p.n_nv), 20e-6, 0.1e-6).unwrap();
        for s in &trace.samples {
            s.check(p.n_nv, 1e-9, 0.0).unwrap();
        }
        assert!(trace.min_raw_fraction >= -NEGATIVE_CLAMP);
    }

    #[test]
    fn long_time_limit_is_the_steady_state() {
        let p = default_params();
        let drive = OpticalDrive {
            pump_intensity: intensity_from_mw_um2(0.1),
            probe_intensity: intensity_from_mw_um2(1.0),
            ..OpticalDrive::default()
        };
        let gen = build_generator(&p, &drive, 1.0, 1.0).unwrap();
        let ss = steady_state(&gen, p.n_nv).unwrap();
        let trace = evolve(&gen, &LevelPopulations::all_in(1, p.n_nv), 10e-3, 10e-3).unwrap();
        let last = trace.last();
        for i in 0..8 {
            assert!((last.0[i] - ss.0[i]).abs() <= 1e-6 * ss.0[i], "level {}", i + 1);
        }
    }

    #[test]
    fn fixed_step_convergence_is_second_order() {
        let p = default_params();
        let gen = build_generator(&p, &OpticalDrive::default().with_mw(true), 1.0, 1.0).unwrap();
        let y0 = LevelPopulations::all_in(1, 1.0).as_vector();
        let t_end = 1e-6;
        let run = |n: usize| {
            let stepper = TrBdf2::new(gen.matrix(), t_end / n as f64);
            (0..n).fold(y0, |y, _| stepper.step(&y))
        };
        let reference = run(1 << 16);
        let e1 = (run(64) - reference).amax();
        let e2 = (run(128) - reference).amax();
        let e3 = (run(256) - reference).amax();
        let order1 = (e1 / e2).log2();
        let order2 = (e2 / e3).log2();
        assert!((order1 - 2.0).abs() < 0.2 && (order2 - 2.0).abs() < 0.2, "{order1} {order2}");
    }

    #[test]
    fn tighter_tolerance_reduces_error_at_nominal_rate() {
        let p = default_params();
        let gen = build_generator(&p, &OpticalDrive::default().with_mw(true), 2.0, 1.0).unwrap();
        let init = LevelPopulations::all_in(1, 1.0);
        let run = |rtol: f64| {
            let opts = IntegratorOptions {
                rtol,
                atol: rtol * 1e-4,
                ..Default::default()
            };
            evolve_with(&gen, &init, 5e-6, 5e-6, &opts).unwrap().last().as_vector()
        };
        let reference = run(1e-13);
        let e_coarse = (run(1e-5) - reference).amax();
        let e_fine = (run(1e-5 / 16.0) - reference).amax();
        // error-per-step control of a second-order method: global error ~ tol^(2/3)
        let exponent = (e_coarse / e_fine).ln() / 16f64.ln();
        assert!(exponent > 0.4 && exponent < 1.2, "observed exponent {exponent}");
    }

    #[test]
    fn csv_has_header_and_one_row_per_sample() {
        let gen = RateGenerator::from_matrix(Matrix8::zeros()).unwrap();
        let trace = evolve(&gen, &LevelPopulations::all_in(1, 1.0), 1.0, 0.5).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "time_s,n1,n2,n3,n4,n5,n6,n7,n8");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn rejects_bad_horizon() {
        let gen = RateGenerator::from_matrix(Matrix8::zeros()).unwrap();
        assert!(evolve(&gen, &LevelPopulations::all_in(1, 1.0), 0.0, 1.0).is_err());
    }
}
