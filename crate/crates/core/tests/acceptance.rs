//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints its PASS/FAIL line; the process fails if any hard criterion fails.
//! Criterion 10 is informational and never fails the run.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use nvir_core::cli::{cmd_sensitivity, SweepSpec};
use nvir_core::detection::{
    homodyne_output, optimize_homodyne, pixel_absorption, resolve_populations_to_depth, snr_low_contrast,
    snr_shot_limited, DetectionConfig, DetectionMode,
};
use nvir_core::photonics::{
    calibrate_linewidth, golden_rule_absorption, plane_wave_field_sq, rwa_incidence_angle, rwa_period, FieldMap,
    MapMetadata, ORIENTATION_MEAN_COS2,
};
use nvir_core::rates::{build_generator, evolve, evolve_with, steady_state, IntegratorOptions, LevelPopulations};
use nvir_core::sensitivity::{cw_pipeline, eta_spin_projection, pulsed_pipeline, PipelineInputs, Protocol};
use nvir_core::units::{intensity_from_mw_um2, photon_energy, sensitivity_to_pt_per_um, LAMBDA_PROBE};
use nvir_core::{default_params, OpticalDrive, PhotophysicsParams, PixelGeometry, RunConfig};

// tolerances pinned by the acceptance criteria
const CONSERVATION_REL: f64 = 1e-9;
const POSITIVITY_ABS: f64 = 1e-12; // as a fraction of n_NV
const ORACLE_REL: f64 = 1e-6;
const PERIOD_TARGET_NM: f64 = 434.0;
const PERIOD_TOL_NM: f64 = 1.0;
const ANGLE_TARGET_DEG: f64 = 2.9;
const ANGLE_TOL_DEG: f64 = 0.2;
const HALF_LIFE_REL: f64 = 1e-4;
const GOLDEN_RULE_REL: f64 = 1e-9;
const HOMODYNE_ABS: f64 = 1e-12;
const LINEARITY_REL: f64 = 0.01;
const SPIN_PROJECTION_TARGET_PT: f64 = 3.4;
const SPIN_PROJECTION_REL: f64 = 0.02;
const D_FACTOR_TARGET: f64 = 9.0;
const D_FACTOR_SPAN: f64 = 2.0;

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &'static str, pass: bool, detail: String) -> Outcome {
    println!("{} [{id:>2}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    Outcome { id, name, pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Effective green intensity 0.03 to 3 mW/µm², probe 0.01 to 10 mW/µm².
fn random_drive(rng: &mut StdRng) -> (OpticalDrive, f64, f64) {
    let drive = OpticalDrive {
        pump_intensity: intensity_from_mw_um2(10f64.powf(rng.random_range(-1.5..0.0))),
        probe_intensity: intensity_from_mw_um2(10f64.powf(rng.random_range(-2.0..1.0))),
        mw_on: rng.random_bool(0.5),
        ..Default::default()
    };
    (drive, 10f64.powf(rng.random_range(0.0..0.5)), 10f64.powf(rng.random_range(0.0..1.5)))
}

fn conservation(p: &PhotophysicsParams) -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(1);
    let (mut worst_sum, mut worst_neg, mut samples) = (0.0f64, 0.0f64, 0usize);
    // before the integrator's clamp of round-off negatives
    let mut worst_raw = 0.0f64;
    let mut failures = 0;
    for k in 0..120 {
        let (drive, ep, eq) = random_drive(&mut rng);
        let result = (|| -> nvir_core::Result<()> {
            let gen = build_generator(p, &drive, ep, eq)?;
            let mut states = vec![steady_state(&gen, p.n_nv)?];
            let initial = LevelPopulations::all_in(1 + k % 8, p.n_nv);
            let trace = evolve(&gen, &initial, 5e-6, 25e-9)?;
            worst_raw = worst_raw.min(trace.min_raw_fraction);
            states.extend(trace.samples);
            for s in &states {
                worst_sum = worst_sum.max(rel(s.total(), p.n_nv));
                worst_neg = worst_neg.min(s.0.iter().fold(0.0f64, |m, &v| m.min(v)) / p.n_nv);
            }
            samples += states.len();
            Ok(())
        })();
        if result.is_err() {
            failures += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures == 0
        && worst_sum <= CONSERVATION_REL
        && worst_neg >= -POSITIVITY_ABS
        && worst_raw >= -POSITIVITY_ABS
        && secs < 60.0;
    report(
        1,
        "conservation and positivity",
        pass,
        format!(
            "120 configs, {samples} states, max |sum/n_NV - 1| = {worst_sum:.2e}, min n_i/n_NV = {worst_neg:.2e} (raw {worst_raw:.2e}), {failures} errors, {secs:.1} s"
        ),
    )
}

fn oracle_equivalence(p: &PhotophysicsParams) -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let opts = IntegratorOptions::default();
    for _ in 0..20 {
        let (drive, ep, eq) = random_drive(&mut rng);
        let gen = build_generator(p, &drive, ep, eq).unwrap();
        let exact = steady_state(&gen, p.n_nv).unwrap();
        let trace = evolve_with(&gen, &LevelPopulations::all_in(1, p.n_nv), 10e-3, 1e-3, &opts).unwrap();
        let late = trace.last();
        for i in 0..8 {
            worst = worst.max(rel(late.0[i], exact.0[i]));
        }
    }
    report(
        2,
        "steady state equals 10 ms transient limit",
        worst <= ORACLE_REL,
        format!("20 configs, max component-wise relative difference {worst:.2e} (tol {ORACLE_REL:e})"),
    )
}

fn dispersion() -> Outcome {
    let p = rwa_period(1042e-9, 2.4, 1, 0.0).unwrap() * 1e9;
    let theta = rwa_incidence_angle(532e-9, 2.4, 2, 434e-9).unwrap().to_degrees().abs();
    let pass = (p - PERIOD_TARGET_NM).abs() <= PERIOD_TOL_NM && (theta - ANGLE_TARGET_DEG).abs() <= ANGLE_TOL_DEG;
    report(
        3,
        "grating dispersion",
        pass,
        format!("p = {p:.2} nm (target 434 +/- 1), |theta_i| = {theta:.3} deg (target 2.9 +/- 0.2)"),
    )
}

fn analytic_decay(p: &PhotophysicsParams) -> Outcome {
    let gen = build_generator(p, &OpticalDrive::dark(), 1.0, 1.0).unwrap();
    let opts = IntegratorOptions {
        rtol: 1e-10,
        atol: 1e-16,
        ..Default::default()
    };
    let trace = evolve_with(&gen, &LevelPopulations::all_in(3, p.n_nv), 30e-9, 0.1e-9, &opts).unwrap();
    let n3 = trace.level_series(3);
    let half = 0.5 * p.n_nv;
    let k = n3.iter().position(|&v| v < half).unwrap();
    // log-linear interpolation is exact for a pure exponential
    let (t0, t1) = (trace.times[k - 1], trace.times[k]);
    let (l0, l1) = (n3[k - 1].ln(), n3[k].ln());
    let measured = t0 + (half.ln() - l0) / (l1 - l0) * (t1 - t0);
    let expected = std::f64::consts::LN_2 / (p.k31 + p.k35);
    let err = rel(measured, expected);
    report(
        4,
        "dark |3> decay half-life",
        err <= HALF_LIFE_REL,
        format!("{:.6} ns vs ln2/(k31+k35) = {:.6} ns, rel err {err:.2e}", measured * 1e9, expected * 1e9),
    )
}

fn golden_rule(p: &PhotophysicsParams) -> Outcome {
    let n_d = 2.4;
    let gamma_star = calibrate_linewidth(p.sigma_s, p.gamma_r, LAMBDA_PROBE, n_d);
    let mut worst = 0.0f64;
    for k in 0..=50 {
        let intensity = 1e6 * 10f64.powf(5.0 * k as f64 / 50.0);
        let e_sq = plane_wave_field_sq(intensity, n_d);
        let rate = golden_rule_absorption(p.gamma_r, gamma_star, LAMBDA_PROBE, n_d, e_sq, ORIENTATION_MEAN_COS2);
        worst = worst.max(rel(rate, p.sigma_s * intensity / photon_energy(LAMBDA_PROBE)));
    }
    report(
        5,
        "golden rule reproduces sigma_s I / hbar omega",
        worst <= GOLDEN_RULE_REL,
        format!("I = 1e6..1e11 W/m^2, max rel err {worst:.2e}"),
    )
}

fn homodyne_algebra() -> Outcome {
    let mut rng = StdRng::seed_from_u64(6);
    let (mut bound, mut avg, mut null) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let r: f64 = rng.random_range(0.0..=1.0);
        let rm: f64 = rng.random_range(0.0..=1.0);
        let phi: f64 = rng.random_range(0.0..TAU);
        let nv: f64 = rng.random_range(-PI..PI);
        let out = homodyne_output(rm, nv, r, phi - nv);
        let lo = ((1.0 - r).sqrt() - r.sqrt() * rm).powi(2);
        let hi = ((1.0 - r).sqrt() + r.sqrt() * rm).powi(2);
        bound = bound.max(lo - out).max(out - hi);
        let mean = (0..8).map(|j| homodyne_output(rm, nv, r, phi + TAU * j as f64 / 8.0)).sum::<f64>() / 8.0;
        avg = avg.max((mean - ((1.0 - r) + r * rm * rm)).abs());
        // dark fringe: √(1 − R) = √R·|r| and total phase π
        let r_null = 1.0 / (1.0 + rm * rm);
        null = null.max(homodyne_output(rm, nv, r_null, PI - nv).abs());
    }
    let pass = bound <= HOMODYNE_ABS && avg <= HOMODYNE_ABS && null <= HOMODYNE_ABS;
    report(
        6,
        "homodyne output identities",
        pass,
        format!("1e4 triples: bound excess {bound:.1e}, phase-average err {avg:.1e}, null residual {null:.1e}"),
    )
}

struct Scene {
    config: RunConfig,
    pump: FieldMap,
    probe: FieldMap,
}

impl Scene {
    fn new(config: RunConfig) -> Self {
        let r = config.resolve().unwrap();
        Scene {
            config: RunConfig {
                detection: r.detection,
                ..config
            },
            pump: r.pump,
            probe: r.probe,
        }
    }

    fn inputs<'a>(&'a self, drive: &'a OpticalDrive, detection: &'a DetectionConfig) -> PipelineInputs<'a> {
        PipelineInputs {
            params: &self.config.photophysics,
            drive,
            geometry: &self.config.geometry,
            pump: &self.pump,
            probe: &self.probe,
            detection,
            settings: &self.config.sensitivity,
            solver: &self.config.solver,
        }
    }
}

fn optimizer_stationarity(scene: &Scene) -> Outcome {
    let c = &scene.config;
    let direct_cfg = DetectionConfig {
        mode: DetectionMode::Direct,
        ..c.detection.clone()
    };
    let signal = cw_pipeline(&scene.inputs(&c.drive, &direct_cfg)).unwrap().signal;
    let (i_s, t, l) = (c.drive.probe_intensity, c.sensitivity.t_mea, c.geometry.side);
    let opt = optimize_homodyne(&signal, &c.detection, i_s, t, l).unwrap();
    let mut grid_best = 0.0f64;
    for i in 0..200 {
        for j in 0..200 {
            let cfg = DetectionConfig {
                r: i as f64 / 199.0,
                delta_phi_lo: TAU * (j as f64 + 0.5) / 200.0,
                ..c.detection.clone()
            };
            let snr = snr_shot_limited(&signal, &cfg, i_s, l, t, DetectionMode::Homodyne).unwrap_or(0.0);
            grid_best = grid_best.max(snr);
        }
    }
    let stationary = grid_best <= opt.snr * (1.0 + 1e-9);

    // homodyne never loses to direct over the SNR-vs-intensity sweep
    let mut worst_ratio = f64::INFINITY;
    let mut points = 0;
    for &is in &[0.1, 1.0, 10.0] {
        for k in 0..=12 {
            let drive = OpticalDrive {
                pump_intensity: intensity_from_mw_um2(10f64.powf(-2.0 + 3.0 * k as f64 / 12.0)),
                probe_intensity: intensity_from_mw_um2(is),
                ..c.drive
            };
            let homo = cw_pipeline(&scene.inputs(&drive, &c.detection)).unwrap().snr_density;
            let direct = cw_pipeline(&scene.inputs(&drive, &direct_cfg)).unwrap().snr_density;
            worst_ratio = worst_ratio.min(homo / direct);
            points += 1;
        }
    }
    let dominant = worst_ratio >= 1.0 - 1e-12;
    report(
        7,
        "homodyne optimizer stationarity and dominance",
        stationary && dominant,
        format!(
            "optimum SNR {:.6e} vs best of 200x200 grid {grid_best:.6e}; min homodyne/direct over {points} sweep points = {worst_ratio:.3}",
            opt.snr
        ),
    )
}

fn uniform_map(wavelength: f64, value: f64) -> FieldMap {
    let meta = MapMetadata {
        wavelength,
        period: 434e-9,
        synthetic: true,
        description: Some("uniform".into()),
    };
    FieldMap::new(meta, 3, 201, 10e-6, vec![value; 3 * 201]).unwrap()
}

/// The proportionality to ⟨|E/E₀|²⟩·V·n_NV assumes an unsaturated probe
/// transition (w_probe ≪ Γ), so the map-scale ratio is taken at 0.1 mW/µm²,
/// where the brightest cell absorbs at ~0.4% of Γ. The default 1 mW/µm² is
/// printed for reference.
fn low_contrast_linearity(p: &PhotophysicsParams) -> Outcome {
    let det = DetectionConfig::default();
    let snr_at = |i_s_mw: f64, n_nv: f64, d: f64, scale: f64| {
        let drive = OpticalDrive {
            probe_intensity: intensity_from_mw_um2(i_s_mw),
            ..OpticalDrive::default()
        };
        let params = PhotophysicsParams { n_nv, ..*p };
        let pump = uniform_map(532e-9, 2.0);
        let probe = uniform_map(1042e-9, 8.0 * scale);
        let on = resolve_populations_to_depth(&pump, &probe, &params, &drive.with_mw(true), d).unwrap();
        let off = resolve_populations_to_depth(&pump, &probe, &params, &drive.with_mw(false), d).unwrap();
        let signal = pixel_absorption(&on, &off, &probe, &params, d, &det).unwrap();
        snr_low_contrast(&signal, det.r0, drive.probe_intensity, 1e-6, 1e-3).unwrap()
    };
    let snr = |n_nv, d, scale| snr_at(0.1, n_nv, d, scale);
    let base = snr(0.28e24, 1e-6, 0.3);
    let ratios = [
        ("n_NV", snr(2.8e24, 1e-6, 0.3) / base),
        ("d_NV", snr(0.28e24, 10e-6, 0.3) / base),
        ("map scale", snr(0.28e24, 1e-6, 3.0) / base),
    ];
    let pass = ratios.iter().all(|(_, r)| rel(*r, 10.0) <= LINEARITY_REL);
    let mut detail = ratios.iter().map(|(n, r)| format!("{n} x10 -> x{r:.4}")).collect::<Vec<_>>().join(", ");
    let saturated = snr_at(1.0, 0.28e24, 1e-6, 3.0) / snr_at(1.0, 0.28e24, 1e-6, 0.3);
    detail.push_str(&format!(" at I_s = 0.1 mW/um^2 (map scale at 1 mW/um^2: x{saturated:.4})"));
    report(8, "low-contrast SNR linearity", pass, detail)
}

fn spin_projection(p: &PhotophysicsParams) -> Outcome {
    let value = sensitivity_to_pt_per_um(eta_spin_projection(p.n_nv, 5e-6, 200e-9));
    // by hand: ħ/(g μB √(n d τ)) with n d τ = 2.8e24 · 5e-6 · 2e-7 = 2.8e12 m⁻²·s
    let hand = 1.054_571_8e-34 / (2.003 * 9.274_010_1e-24 * 2.8e12f64.sqrt()) * 1e6 * 1e12;
    let pass = rel(value, SPIN_PROJECTION_TARGET_PT) <= SPIN_PROJECTION_REL && rel(value, hand) < 1e-6;
    report(
        9,
        "spin-projection sensitivity",
        pass,
        format!("{value:.4} pT/sqrt(Hz) um (hand evaluation {hand:.4}, target 3.4 +/- 2%)"),
    )
}

struct Soft {
    label: &'static str,
    measured: String,
    target: &'static str,
    within: bool,
}

fn soft_targets() -> Outcome {
    let start = Instant::now();
    let mut base = RunConfig {
        detection: DetectionConfig::calibrated(),
        ..RunConfig::default()
    };
    base.detection = base.detection.linear_as_table(0.2, 401).unwrap();
    let scene = Scene::new(base);
    let c = &scene.config;
    let cw = cw_pipeline(&scene.inputs(&c.drive, &c.detection)).unwrap();
    let pulsed = pulsed_pipeline(&scene.inputs(&c.drive, &c.detection)).unwrap();
    let eta_cw_nt = sensitivity_to_pt_per_um(cw.eta_cw.value().unwrap()) / 1e3;
    let eta_ac_pt = pulsed.eta_ac.value().map(sensitivity_to_pt_per_um);
    let fidelity = pulsed.sigma_r.value().map(|s| 1.0 / s);
    let t_read = pulsed.window.t_opt;
    let phi = cw.delta_phi_lo / PI;

    let checks = [
        Soft {
            label: "eta_cw",
            measured: format!("{:.4} nT/sqrt(Hz)/um", eta_cw_nt),
            target: "below 1 nT (x3)",
            within: eta_cw_nt <= 3.0,
        },
        Soft {
            label: "eta_ac",
            measured: format!("{:.3} pT/sqrt(Hz)/um", eta_ac_pt.unwrap_or(f64::NAN)),
            target: "10 pT (x3)",
            within: eta_ac_pt.is_some_and(|v| (10.0 / 3.0..=30.0).contains(&v)),
        },
        Soft {
            label: "t_read_opt",
            measured: format!("{:.0} ns", t_read * 1e9),
            target: "near 500 ns, within [100 ns, 2 us]",
            within: (100e-9..=2e-6).contains(&t_read),
        },
        Soft {
            label: "1/sigma_R",
            measured: format!("{:.3}", fidelity.unwrap_or(f64::NAN)),
            target: "near 0.5, within [0.2, 0.8]",
            within: fidelity.is_some_and(|f| (0.2..=0.8).contains(&f)),
        },
        Soft {
            label: "homodyne R",
            measured: format!("{:.3}", cw.r),
            target: "0.87 +/- 0.1",
            within: (cw.r - 0.87).abs() <= 0.1,
        },
        Soft {
            label: "homodyne phase",
            measured: format!("{phi:.3} pi"),
            target: "1.28 pi +/- 0.15 pi",
            within: (phi - 1.28).abs() <= 0.15,
        },
    ];
    for s in &checks {
        println!(
            "     [10] {:<3} {:<15} measured {:<28} target {}",
            if s.within { "ok" } else { "off" },
            s.label,
            s.measured,
            s.target
        );
    }

    // same pipeline with the uncalibrated defaults (R0 = 1), for reference
    let plain = Scene::new(RunConfig::default());
    let pc = &plain.config;
    let cw0 = cw_pipeline(&plain.inputs(&pc.drive, &pc.detection)).unwrap();
    let pu0 = pulsed_pipeline(&plain.inputs(&pc.drive, &pc.detection)).unwrap();
    println!(
        "     [10] info default detection (R0 = 1): eta_cw {:.3} pT, eta_ac {:.3} pT, 1/sigma_R {:.3}, t_read {:.0} ns, R {:.3}, phase {:.3} pi",
        sensitivity_to_pt_per_um(cw0.eta_cw.value().unwrap_or(f64::NAN)),
        pu0.eta_ac.value().map(sensitivity_to_pt_per_um).unwrap_or(f64::NAN),
        pu0.sigma_r.value().map(|s| 1.0 / s).unwrap_or(f64::NAN),
        pu0.window.t_opt * 1e9,
        cw0.r,
        cw0.delta_phi_lo / PI
    );
    let hits = checks.iter().filter(|s| s.within).count();
    report(
        10,
        "soft targets (informational)",
        true,
        format!("{hits}/{} within tolerance, {:.1} s", checks.len(), start.elapsed().as_secs_f64()),
    )
}

fn depth_monotonicity() -> Outcome {
    let scene = Scene::new(RunConfig::default());
    let c = &scene.config;
    let depths: Vec<f64> = nvir_core::optim::spaced(0.5e-6, 10e-6, 12, true);
    let mut etas = Vec::new();
    for &d in &depths {
        let geometry = PixelGeometry { d_nv: d, ..c.geometry };
        let inputs = PipelineInputs {
            geometry: &geometry,
            ..scene.inputs(&c.drive, &c.detection)
        };
        etas.push(sensitivity_to_pt_per_um(cw_pipeline(&inputs).unwrap().eta_cw.value().unwrap()));
    }
    let monotone = etas.windows(2).all(|w| w[1] < w[0]);
    let factor = etas[0] / etas[etas.len() - 1];
    let in_band = (D_FACTOR_TARGET / D_FACTOR_SPAN..=D_FACTOR_TARGET * D_FACTOR_SPAN).contains(&factor);
    report(
        11,
        "sensitivity improves with NV layer depth",
        monotone && in_band,
        format!(
            "eta_cw {:.2} -> {:.2} pT over d = 0.5..10 um, monotone = {monotone}, factor {factor:.2} (target ~9, x2)",
            etas[0],
            etas[etas.len() - 1]
        ),
    )
}

fn determinism() -> Outcome {
    let config = RunConfig::default();
    let sweep = SweepSpec {
        axes: vec!["I_t=1e7:1e9:4:log".parse().unwrap(), "d_NV=1e-6:5e-6:2".parse().unwrap()],
        modes: vec![DetectionMode::Homodyne, DetectionMode::Direct],
        protocol: Some(Protocol::Cw),
    };
    let pulsed = SweepSpec {
        protocol: Some(Protocol::Both),
        ..Default::default()
    };
    let run = |threads: usize, spec: &SweepSpec| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| cmd_sensitivity(&config, spec).unwrap().csv)
    };
    let a = run(1, &sweep);
    let b = run(3, &sweep);
    let c = run(2, &sweep);
    let p1 = run(1, &pulsed);
    let p2 = run(2, &pulsed);
    let same = a == b && b == c && p1 == p2;
    report(
        12,
        "sensitivity CSV is byte-identical across runs",
        same,
        format!(
            "{} sweep rows x3 runs (1/3/2 workers), pulsed point x2: {}",
            a.lines().count() - 3,
            if same { "identical" } else { "differ" }
        ),
    )
}

fn main() {
    let start = Instant::now();
    let p = default_params();
    let default_scene = Scene::new(RunConfig::default());
    let outcomes = vec![
        conservation(&p),
        oracle_equivalence(&p),
        dispersion(),
        analytic_decay(&p),
        golden_rule(&p),
        homodyne_algebra(),
        optimizer_stationarity(&default_scene),
        low_contrast_linearity(&p),
        spin_projection(&p),
        soft_targets(),
        depth_monotonicity(),
        determinism(),
    ];
    let failed: Vec<&Outcome> = outcomes.iter().filter(|o| !o.pass).collect();
    println!(
        "acceptance: {}/{} passed in {:.1} s",
        outcomes.len() - failed.len(),
        outcomes.len(),
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        for o in failed {
            eprintln!("failed [{}] {}: {}", o.id, o.name, o.detail);
        }
        std::process::exit(1);
    }
}
