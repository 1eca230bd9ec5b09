use serde::{Deserialize, Serialize};

use super::formulas::integrate_window;
use crate::detection::{classify_cells, map_unique};
use crate::error::{Error, Result};
use crate::model::{OpticalDrive, PhotophysicsParams};
use crate::optim::{argmax, golden_section_max};
use crate::photonics::FieldMap;
use crate::rates::{
    build_generator, evolve_with, net_singlet_population, steady_state, steady_state_from, IntegratorOptions,
    LevelPopulations,
};

/// Best averaging window for a sampled contrast trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowOptimum {
    /// Window length maximizing (1/t)∫₀^t contrast. When the maximum sits at
    /// t → 0 this is the first nonzero sample time and `at_start` is set.
    pub t_opt: f64,
    /// Window-averaged contrast at `t_opt`.
    pub value: f64,
    pub at_start: bool,
    /// The maximum sits on the last sample.
    pub at_horizon: bool,
    /// The contrast has not decayed below 10% of its peak by the end of the
    /// trace, so a longer horizon could move the optimum.
    pub horizon_warning: bool,
}

/// Maximizes the window average (1/t)∫₀^t c(t') dt' of a piecewise-linear
/// trace by scanning the samples and refining with golden-section search.
pub fn window_average_optimum(times: &[f64], contrast: &[f64]) -> Result<WindowOptimum> {
    if times.len() < 3 || times.len() != contrast.len() || times[0] != 0.0 {
        return Err(Error::validation(
            "times",
            "need at least 3 samples starting at t = 0, one contrast value per sample",
        ));
    }
    let ratio = |t: f64| {
        if t <= 0.0 {
            contrast[0]
        } else {
            integrate_window(times, contrast, t) / t
        }
    };
    let values: Vec<f64> = times.iter().map(|&t| ratio(t)).collect();
    let k = argmax(&values).ok_or_else(|| Error::validation("contrast", "no finite values"))?;
    let last = times.len() - 1;
    let peak = contrast.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let horizon_warning = k == last || contrast[last].abs() > 0.1 * peak;
    let (t_opt, value) = if k == 0 {
        (times[1], values[1])
    } else if k == last {
        (times[last], values[last])
    } else {
        let (t, v) = golden_section_max(ratio, times[k - 1], times[k + 1], 1e-9 * times[last]);
        if v >= values[k] {
            (t, v)
        } else {
            (times[k], values[k])
        }
    };
    Ok(WindowOptimum {
        t_opt,
        value,
        at_start: k == 0,
        at_horizon: k == last,
        horizon_warning,
    })
}

/// Pixel-level readout transients after green initialization, with
/// (`on`) and without (`off`) an ideal microwave π-pulse.
///
/// Spatial reductions weight every cell by its quadrature weight times the
/// local probe enhancement, the same weighting as the absorption integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelTransient {
    pub times: Vec<f64>,
    /// Probe-weighted mean n6 (m⁻³).
    pub n6_on: Vec<f64>,
    pub n6_off: Vec<f64>,
    /// (1/(p·d))∬|E/E₀|²(n6 − n5) dx dy (m⁻³); the fractional absorption is
    /// σ_s·d·value/R0.
    pub net_on: Vec<f64>,
    pub net_off: Vec<f64>,
    pub depth: f64,
}

impl PixelTransient {
    /// Readout contrast: n6 with the π-pulse minus n6 without.
    pub fn contrast(&self) -> Vec<f64> {
        self.n6_on.iter().zip(&self.n6_off).map(|(a, b)| a - b).collect()
    }

    /// Fractional absorption I_NV(t) for (on, off).
    pub fn i_nv(&self, sigma_s: f64, r0: f64) -> (Vec<f64>, Vec<f64>) {
        let f = |v: &Vec<f64>| v.iter().map(|x| sigma_s * self.depth * x / r0).collect();
        (f(&self.net_on), f(&self.net_off))
    }
}

/// Green-only steady state of one cell: probe and microwaves off.
fn initial_state(params: &PhotophysicsParams, drive: &OpticalDrive, enh_pump: f64) -> Result<LevelPopulations> {
    let init_drive = OpticalDrive {
        probe_intensity: 0.0,
        mw_on: false,
        ..*drive
    };
    let gen = build_generator(params, &init_drive, enh_pump, 0.0)?;
    match steady_state(&gen, params.n_nv) {
        Err(Error::Degenerate { .. }) if drive.pump_intensity * enh_pump == 0.0 => {
            steady_state_from(&gen, &LevelPopulations::all_in(1, params.n_nv))
        }
        other => other,
    }
}

/// Integrates both readout branches in every distinct cell down to depth
/// `d` over [0, t_max] with `samples` uniform intervals.
///
/// Readout runs under green and IR with microwaves off; the MW-on branch
/// starts from the initialized state with |1⟩ and |2⟩ swapped.
pub fn readout_transients(
    pump: &FieldMap,
    probe: &FieldMap,
    params: &PhotophysicsParams,
    drive: &OpticalDrive,
    d: f64,
    t_max: f64,
    samples: usize,
    opts: &IntegratorOptions,
) -> Result<PixelTransient> {
    if !(t_max > 0.0) || samples < 2 {
        return Err(Error::validation("readout", "need t_max > 0 and at least 2 samples"));
    }
    let rows = probe.rows_for_depth(d)?;
    let classes = classify_cells(pump, probe, rows)?;
    let weights = probe.quadrature_weights(d)?;
    let mut class_weight = vec![0.0; classes.unique.len()];
    for (cell, &slot) in classes.slot.iter().enumerate() {
        class_weight[slot] += weights[cell] * probe.values()[cell];
    }
    let read_drive = drive.with_mw(false);
    let dt = t_max / samples as f64;
    let traces = map_unique(&classes, |enh_pump, enh_probe| {
        let init = initial_state(params, drive, enh_pump)?;
        let gen = build_generator(params, &read_drive, enh_pump, enh_probe)?;
        let off = evolve_with(&gen, &init, t_max, dt, opts)?;
        let on = evolve_with(&gen, &init.spin_flipped(), t_max, dt, opts)?;
        let n6 = |s: &[LevelPopulations]| s.iter().map(|p| p.level(6)).collect::<Vec<_>>();
        let net = |s: &[LevelPopulations]| s.iter().map(net_singlet_population).collect::<Vec<_>>();
        Ok((off.times.clone(), n6(&on.samples), n6(&off.samples), net(&on.samples), net(&off.samples)))
    })?;
    let times = traces
        .first()
        .map(|t| t.0.clone())
        .ok_or_else(|| Error::validation("d", "no cells within the sensing depth"))?;
    let n = times.len();
    let total_weight: f64 = class_weight.iter().sum();
    let area = probe.period() * d;
    let mut out = PixelTransient {
        times,
        n6_on: vec![0.0; n],
        n6_off: vec![0.0; n],
        net_on: vec![0.0; n],
        net_off: vec![0.0; n],
        depth: d,
    };
    for (w, (_, n6_on, n6_off, net_on, net_off)) in class_weight.iter().zip(&traces) {
        for k in 0..n {
            if total_weight > 0.0 {
                out.n6_on[k] += w * n6_on[k] / total_weight;
                out.n6_off[k] += w * n6_off[k] / total_weight;
            }
            out.net_on[k] += w * net_on[k] / area;
            out.net_off[k] += w * net_off[k] / area;
        }
    }
    Ok(out)
}

/// Readout window maximizing the time-averaged n6 contrast, plus the
/// transients it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutOptimum {
    pub window: WindowOptimum,
    pub transient: PixelTransient,
}

pub fn optimize_readout_time(
    params: &PhotophysicsParams,
    drive: &OpticalDrive,
    pump: &FieldMap,
    probe: &FieldMap,
    d: f64,
    t_max: f64,
    samples: usize,
    opts: &IntegratorOptions,
) -> Result<ReadoutOptimum> {
    let transient = readout_transients(pump, probe, params, drive, d, t_max, samples, opts)?;
    let window = window_average_optimum(&transient.times, &transient.contrast())?;
    Ok(ReadoutOptimum { window, transient })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_params;
    use crate::photonics::MapMetadata;
    use crate::units::intensity_from_mw_um2;

    #[test]
    fn pure_exponential_gives_boundary_optimum() {
        let tau_c = 300e-9;
        let times: Vec<f64> = (0..=400).map(|k| k as f64 * 10e-9).collect();
        let c: Vec<f64> = times.iter().map(|t| (-t / tau_c).exp()).collect();
        let w = window_average_optimum(&times, &c).unwrap();
        assert!(w.at_start);
        assert!(!w.horizon_warning);
        assert_eq!(w.t_opt, times[1]);
        let closed = |t: f64| tau_c / t * (1.0 - (-t / tau_c).exp());
        assert!((w.value - closed(times[1])).abs() < 1e-4);
    }

    #[test]
    fn rise_and_decay_has_interior_optimum() {
        let (t1, t2) = (50e-9, 500e-9);
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 5e-9).collect();
        let c: Vec<f64> = times.iter().map(|t| (-t / t2).exp() - (-t / t1).exp()).collect();
        let w = window_average_optimum(&times, &c).unwrap();
        assert!(!w.at_start && !w.at_horizon);
        // d/dt[(1/t)∫c] = 0  ⇔  c(t)·t = ∫₀^t c
        let integral = |t: f64| t2 * (1.0 - (-t / t2).exp()) - t1 * (1.0 - (-t / t1).exp());
        let c_at = (-w.t_opt / t2).exp() - (-w.t_opt / t1).exp();
        assert!((c_at * w.t_opt - integral(w.t_opt)).abs() < 1e-3 * integral(w.t_opt));
    }

    #[test]
    fn growing_contrast_warns_at_horizon() {
        let times: Vec<f64> = (0..=10).map(|k| k as f64).collect();
        let c: Vec<f64> = times.clone();
        let w = window_average_optimum(&times, &c).unwrap();
        assert!(w.at_horizon && w.horizon_warning);
    }

    fn uniform(lambda: f64) -> FieldMap {
        let meta = MapMetadata {
            wavelength: lambda,
            period: 434e-9,
            synthetic: true,
            description: None,
        };
        FieldMap::new(meta, 2, 2, 5e-6, vec![1.0; 4]).unwrap()
    }

    fn drive() -> OpticalDrive {
        OpticalDrive {
            pump_intensity: intensity_from_mw_um2(0.1),
            probe_intensity: intensity_from_mw_um2(1.0),
            ..OpticalDrive::default()
        }
    }

    #[test]
    fn readout_optimum_is_independent_of_density() {
        let opts = IntegratorOptions::default();
        let (pump, probe) = (uniform(532e-9), uniform(1042e-9));
        let mut p = default_params();
        let a = optimize_readout_time(&p, &drive(), &pump, &probe, 5e-6, 10e-6, 400, &opts).unwrap();
        p.n_nv *= 0.5;
        let b = optimize_readout_time(&p, &drive(), &pump, &probe, 5e-6, 10e-6, 400, &opts).unwrap();
        assert!((a.window.t_opt - b.window.t_opt).abs() < 1e-6 * a.window.t_opt);
        assert!(a.window.value > 0.0);
        assert!((a.window.value / b.window.value - 2.0).abs() < 1e-6);
    }

    #[test]
    fn pi_pulse_raises_singlet_population() {
        let opts = IntegratorOptions::default();
        let p = default_params();
        let tr = readout_transients(&uniform(532e-9), &uniform(1042e-9), &p, &drive(), 5e-6, 5e-6, 200, &opts).unwrap();
        let c = tr.contrast();
        assert!(c.iter().cloned().fold(f64::MIN, f64::max) > 0.0);
        let (on, off) = tr.i_nv(p.sigma_s, 1.0);
        let peak = (0..on.len()).map(|k| on[k] - off[k]).fold(f64::MIN, f64::max);
        assert!(peak > 0.0);
        let net0 = net_singlet_population(&initial_state(&p, &drive(), 1.0).unwrap());
        assert!((tr.net_off[0] - net0).abs() < 1e-12 * net0);
    }
}
