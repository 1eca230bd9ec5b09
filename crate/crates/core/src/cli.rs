//! `nvir` command-line front end.
//!
//! Exit status: 0 on success, 1 for usage, configuration and input-file
//! errors, 2 for numerical failures (degenerate steady states, stiffness,
//! flat optimizers, no grating coupling).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use plotters::prelude::*;
use rayon::prelude::*;

use crate::config::{load_config_file, resolve_key, RunConfig, CONFIG_ENV};
use crate::detection::{
    optimize_homodyne_with, snr_shot_limited, DetectionMode, HomodyneGrid, HomodyneOptimum,
};
use crate::error::{Error, Result};
use crate::optim::spaced;
use crate::photonics::{
    average_enhancement, figure_of_merit, rwa_incidence_angle, rwa_period, spp_bw_mismatch, DispersionQuery,
    FieldMap,
};
use crate::rates::{
    build_generator, evolve_with, net_singlet_population, steady_state, steady_state_from, LevelPopulations,
};
use crate::sensitivity::{
    cw_pipeline, evaluate_sensitivity, optimize_readout_time, PipelineInputs, Protocol, SensitivityReport,
    REPORT_CSV_HEADER, REPORT_CSV_UNITS,
};
use crate::units::{intensity_to_mw_um2, sensitivity_to_pt_per_um, MICRON, NANOMETER};

#[derive(Parser, Debug)]
#[command(name = "nvir", version, about = "NV-diamond IR-absorption magnetometry simulator")]
pub struct Cli {
    /// TOML run configuration; defaults apply to everything it omits.
    #[arg(long, global = true, env = CONFIG_ENV, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory for CSV and SVG files.
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,
    /// Worker threads for sweeps and per-cell solves (default: logical cores).
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
    /// Configuration override, e.g. `--set drive.I_t=2e8` or `--set mode=direct`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Steady-state level populations with the microwaves off and on.
    Steady(SteadyArgs),
    /// Time evolution of the level populations of one cell.
    Evolve(EvolveArgs),
    /// CW and pulsed sensitivities, optionally over a parameter sweep.
    Sensitivity(SensitivityArgs),
    /// Homodyne operating point or pulsed readout window.
    Optimize(OptimizeArgs),
    /// Grating momentum-matching solutions.
    Dispersion(DispersionArgs),
    /// Statistics of the configured pump and probe field maps.
    FieldmapStats(FieldmapArgs),
}

/// One swept parameter: `key=min:max:count[:lin|log]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub log: bool,
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        spaced(self.min, self.max, self.count, self.log)
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (key, range) = s.split_once('=').ok_or("expected key=min:max:count[:lin|log]")?;
        let parts: Vec<&str> = range.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err("expected key=min:max:count[:lin|log]".into());
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
        let (min, max) = (num(parts[0])?, num(parts[1])?);
        let count: usize = parts[2].trim().parse().map_err(|e| format!("count `{}`: {e}", parts[2]))?;
        let log = match parts.get(3).map(|t| t.trim()) {
            None | Some("lin") => false,
            Some("log") => true,
            Some(other) => return Err(format!("scale must be lin or log, got `{other}`")),
        };
        if count < 2 {
            return Err(format!("count must be at least 2, got {count}"));
        }
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(format!("need finite min < max, got {min}..{max}"));
        }
        if log && min <= 0.0 {
            return Err("log sweeps need min > 0".into());
        }
        Ok(SweepAxis {
            key: key.trim().to_string(),
            min,
            max,
            count,
            log,
        })
    }
}

/// Swept axes (cartesian product, first axis outermost) and mode flags.
#[derive(Debug, Clone, Default)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
    pub modes: Vec<DetectionMode>,
    pub protocol: Option<Protocol>,
}

impl SweepSpec {
    /// Checks that every swept key names a real configuration key and
    /// returns the canonical dotted names.
    pub fn resolve_keys(&self) -> Result<Vec<String>> {
        self.axes.iter().map(|a| resolve_key(&a.key).map(|p| p.join("."))).collect()
    }

    /// Every sweep point; a spec without axes has a single empty point.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut points = vec![Vec::new()];
        for axis in &self.axes {
            let values = axis.values();
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        points
    }
}

#[derive(Args, Debug)]
pub struct SteadyArgs {
    /// Parameter sweep `key=min:max:count[:lin|log]`; repeat for a grid.
    #[arg(long, value_name = "SPEC")]
    pub sweep: Vec<SweepAxis>,
    /// Local pump enhancement |E/E₀|² at 532 nm.
    #[arg(long, default_value_t = 1.0)]
    pub enh_pump: f64,
    /// Local probe enhancement |E/E₀|² at 1042 nm.
    #[arg(long, default_value_t = 1.0)]
    pub enh_probe: f64,
    /// Report the long-time limit from the m_s = 0 ground state when the
    /// steady state is not unique (dark configurations).
    #[arg(long)]
    pub from_ground: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InitialState {
    /// Everything in ³A₂(m_s = 0).
    Ground,
    /// Equal split over the three ground spin sublevels.
    Thermal,
    /// Green-only steady state (probe and microwaves off).
    Green,
}

#[derive(Args, Debug)]
pub struct EvolveArgs {
    /// Simulated time, s.
    #[arg(long, default_value_t = 10e-6)]
    pub t_end: f64,
    /// Sample spacing, s.
    #[arg(long, default_value_t = 10e-9)]
    pub sampling: f64,
    #[arg(long, value_enum, default_value_t = InitialState::Ground)]
    pub initial: InitialState,
    #[arg(long, default_value_t = 1.0)]
    pub enh_pump: f64,
    #[arg(long, default_value_t = 1.0)]
    pub enh_probe: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeFlag {
    Homodyne,
    Direct,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProtocolFlag {
    Cw,
    Pulsed,
    Both,
}

#[derive(Args, Debug)]
pub struct SensitivityArgs {
    /// Parameter sweep `key=min:max:count[:lin|log]`; repeat for a grid.
    #[arg(long, value_name = "SPEC")]
    pub sweep: Vec<SweepAxis>,
    /// Detection mode(s); defaults to the configured mode.
    #[arg(long, value_enum)]
    pub mode: Option<ModeFlag>,
    /// Protocol(s); defaults to the configured protocol.
    #[arg(long, value_enum)]
    pub protocol: Option<ProtocolFlag>,
    /// Base name of the CSV and SVG outputs inside `--out`.
    #[arg(long, default_value = "sensitivity")]
    pub name: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OptimizeTarget {
    Homodyne,
    ReadoutTime,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[arg(value_enum)]
    pub target: OptimizeTarget,
    /// Splitting-ratio grid points over [0, 1].
    #[arg(long, default_value_t = 101)]
    pub r_count: usize,
    /// Phase grid points over [0, 2π).
    #[arg(long, default_value_t = 128)]
    pub phi_count: usize,
}

#[derive(Args, Debug)]
pub struct DispersionArgs {
    #[command(subcommand)]
    pub query: DispersionCommand,
}

fn nonzero_order(s: &str) -> std::result::Result<i32, String> {
    let m: i32 = s.parse().map_err(|e| format!("{e}"))?;
    if m == 0 {
        return Err("diffraction order must be nonzero".into());
    }
    Ok(m)
}

#[derive(Subcommand, Debug)]
pub enum DispersionCommand {
    /// Grating period for a Rayleigh-Wood anomaly at a given incidence.
    Period {
        /// Vacuum wavelength, m.
        #[arg(long)]
        lambda: f64,
        /// Refractive index of the dielectric.
        #[arg(long = "n", default_value_t = 2.4)]
        n_d: f64,
        /// Diffraction order (nonzero).
        #[arg(long, value_parser = nonzero_order, allow_hyphen_values = true)]
        m: i32,
        /// Incidence angle, degrees.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        theta: f64,
    },
    /// Incidence angle for a Rayleigh-Wood anomaly at a given period.
    Angle {
        /// Vacuum wavelength, m.
        #[arg(long)]
        lambda: f64,
        /// Refractive index of the dielectric.
        #[arg(long = "n", default_value_t = 2.4)]
        n_d: f64,
        /// Diffraction order (nonzero).
        #[arg(long, value_parser = nonzero_order, allow_hyphen_values = true)]
        m: i32,
        /// Grating period, m.
        #[arg(long)]
        p: f64,
    },
    /// Surface-plasmon Bloch-wave momentum mismatch.
    Spp {
        /// Vacuum wavelength, m.
        #[arg(long)]
        lambda: f64,
        /// Refractive index of the dielectric.
        #[arg(long = "n", default_value_t = 2.4)]
        n_d: f64,
        /// Diffraction order (nonzero).
        #[arg(long, value_parser = nonzero_order, allow_hyphen_values = true)]
        m: i32,
        /// Grating period, m.
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        theta: f64,
        /// Treat the metal as a perfect conductor instead of the configured
        /// Drude-Lorentz model.
        #[arg(long)]
        pec: bool,
    },
}

#[derive(Args, Debug)]
pub struct FieldmapArgs {
    /// Integration depth, m (default: geometry.d_NV).
    #[arg(long)]
    pub depth: Option<f64>,
    /// Also write both maps (CSV plus metadata sidecar) to `--out`.
    #[arg(long)]
    pub export: bool,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Degenerate { .. }) {
                eprintln!("hint: `steady --from-ground` reports the long-time limit from m_s = 0");
            }
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => load_config_file(path)?,
        None => RunConfig::default(),
    };
    for item in &cli.overrides {
        let (key, value) = item.split_once('=').ok_or_else(|| Error::Schema {
            key: item.clone(),
            message: "override must look like key=value".into(),
        })?;
        config.set(key.trim(), value.trim())?;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        pool = pool.num_threads(n as usize);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::validation("jobs", format!("cannot start worker pool: {e}")))?;
    pool.install(|| dispatch(cli, &config))
}

fn dispatch(cli: &Cli, config: &RunConfig) -> Result<()> {
    let out = &cli.out;
    match &cli.command {
        Command::Steady(args) => {
            let csv = cmd_steady(config, args)?;
            let path = out.join("steady.csv");
            write_file(&path, &csv)?;
            print!("{}", steady_summary(&csv));
            println!("wrote {}", path.display());
        }
        Command::Evolve(args) => {
            let csv = cmd_evolve(config, args)?;
            let path = out.join("evolve.csv");
            write_file(&path, &csv)?;
            println!("wrote {}", path.display());
        }
        Command::Sensitivity(args) => {
            let spec = SweepSpec {
                axes: args.sweep.clone(),
                modes: match args.mode {
                    None => vec![config.detection.mode],
                    Some(ModeFlag::Homodyne) => vec![DetectionMode::Homodyne],
                    Some(ModeFlag::Direct) => vec![DetectionMode::Direct],
                    Some(ModeFlag::Both) => vec![DetectionMode::Homodyne, DetectionMode::Direct],
                },
                protocol: args.protocol.map(|p| match p {
                    ProtocolFlag::Cw => Protocol::Cw,
                    ProtocolFlag::Pulsed => Protocol::Pulsed,
                    ProtocolFlag::Both => Protocol::Both,
                }),
            };
            let result = cmd_sensitivity(config, &spec)?;
            let csv_path = out.join(format!("{}.csv", args.name));
            let svg_path = out.join(format!("{}.svg", args.name));
            write_file(&csv_path, &result.csv)?;
            write_file(&svg_path, &result.svg)?;
            if result.failures > 0 {
                eprintln!("warning: {} of {} points failed, see the status column", result.failures, result.rows);
            }
            if result.rows == 1 {
                print!("{}", result.csv);
            }
            println!("wrote {} and {}", csv_path.display(), svg_path.display());
        }
        Command::Optimize(args) => match args.target {
            OptimizeTarget::Homodyne => {
                let grid = HomodyneGrid {
                    r_count: args.r_count,
                    phi_count: args.phi_count,
                    ..Default::default()
                };
                let report = cmd_optimize_homodyne(config, &grid)?;
                let path = out.join("homodyne_contour.csv");
                write_file(&path, &report.contour_csv)?;
                println!("wrote {}", path.display());
                let opt = match report.optimum {
                    Ok(o) => o,
                    Err(e) => {
                        let degenerate = matches!(e, Error::DegenerateOptimum(_));
                        println!("status: {}", if degenerate { "degenerate" } else { "failed" });
                        return Err(e);
                    }
                };
                println!("status: ok");
                println!("R = {:.6}", opt.r);
                println!("delta_phi_LO = {:.6} rad ({:.4} pi)", opt.delta_phi_lo, opt.delta_phi_lo / std::f64::consts::PI);
                println!("SNR = {:.6e} (t_mea = {:.3e} s)", opt.snr, config.sensitivity.t_mea);
            }
            OptimizeTarget::ReadoutTime => {
                let (csv, summary) = cmd_optimize_readout(config)?;
                let path = out.join("readout.csv");
                write_file(&path, &csv)?;
                print!("{summary}");
                println!("wrote {}", path.display());
            }
        },
        Command::Dispersion(args) => print!("{}", cmd_dispersion(config, &args.query)?),
        Command::FieldmapStats(args) => {
            let inputs = config.resolve()?;
            print!("{}", cmd_fieldmap_stats(config, &inputs.pump, &inputs.probe, args.depth)?);
            if args.export {
                for (name, map) in [("pump", &inputs.pump), ("probe", &inputs.probe)] {
                    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
                    let path = out.join(format!("{name}.csv"));
                    map.save(&path)?;
                    println!("wrote {}", path.display());
                }
            }
        }
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Applies one sweep coordinate; integer-valued keys take the rounded value.
fn apply_point(config: &RunConfig, keys: &[String], point: &[f64]) -> Result<RunConfig> {
    let mut c = config.clone();
    for (key, &v) in keys.iter().zip(point) {
        match c.set_value(key, toml::Value::Float(v)) {
            Err(Error::Schema { .. }) => c.set_value(key, toml::Value::Integer(v.round() as i64))?,
            other => other?,
        }
    }
    Ok(c)
}

fn fmt_populations(row: &mut String, pop: &LevelPopulations) {
    for v in pop.0 {
        let _ = write!(row, ",{v:.9e}");
    }
    let _ = write!(row, ",{:.9e}", net_singlet_population(pop));
}

/// Steady-state populations for every sweep point, one CSV row per point
/// with the microwave-off and microwave-on states side by side.
pub fn cmd_steady(config: &RunConfig, args: &SteadyArgs) -> Result<String> {
    let spec = SweepSpec {
        axes: args.sweep.clone(),
        ..Default::default()
    };
    let keys = spec.resolve_keys()?;
    let mut csv = String::new();
    for k in &keys {
        let _ = write!(csv, "{k},");
    }
    let levels = |prefix: &str| {
        let mut s: Vec<String> = (1..=8).map(|i| format!("{prefix}_n{i}")).collect();
        s.push(format!("{prefix}_n6_minus_n5"));
        s.join(",")
    };
    let _ = writeln!(csv, "{},{}", levels("off"), levels("on"));

    let rows: Vec<Result<String>> = spec
        .points()
        .par_iter()
        .map(|point| {
            let c = apply_point(config, &keys, point)?;
            let mut row: String = point.iter().map(|v| format!("{v:.9e},")).collect();
            for (i, mw) in [false, true].into_iter().enumerate() {
                let drive = c.drive.with_mw(mw);
                let gen = build_generator(&c.photophysics, &drive, args.enh_pump, args.enh_probe)?;
                let n = c.photophysics.n_nv;
                let pop = if args.from_ground {
                    steady_state_from(&gen, &LevelPopulations::all_in(1, n))?
                } else {
                    steady_state(&gen, n)?
                };
                let mut cells = String::new();
                fmt_populations(&mut cells, &pop);
                row.push_str(if i == 0 { &cells[1..] } else { &cells });
            }
            Ok(row)
        })
        .collect();
    for row in rows {
        let _ = writeln!(csv, "{}", row?);
    }
    Ok(csv)
}

/// Human-readable view of a single-row steady report.
fn steady_summary(csv: &str) -> String {
    let mut lines = csv.lines();
    let (Some(header), Some(row), None) = (lines.next(), lines.next(), lines.next()) else {
        return String::new();
    };
    let mut s = String::new();
    for (h, v) in header.split(',').zip(row.split(',')) {
        let _ = writeln!(s, "{h:>16} = {v}");
    }
    s
}

/// Population trace of one cell as `time_s,n1..n8` CSV.
pub fn cmd_evolve(config: &RunConfig, args: &EvolveArgs) -> Result<String> {
    let p = &config.photophysics;
    let n = p.n_nv;
    let initial = match args.initial {
        InitialState::Ground => LevelPopulations::all_in(1, n),
        InitialState::Thermal => {
            let mut pop = LevelPopulations::zeros();
            pop.0[0] = n / 3.0;
            pop.0[1] = 2.0 * n / 3.0;
            pop
        }
        InitialState::Green => {
            let green = crate::OpticalDrive {
                probe_intensity: 0.0,
                mw_on: false,
                ..config.drive
            };
            steady_state(&build_generator(p, &green, args.enh_pump, 0.0)?, n)?
        }
    };
    let gen = build_generator(p, &config.drive, args.enh_pump, args.enh_probe)?;
    let trace = evolve_with(&gen, &initial, args.t_end, args.sampling, &config.solver)?;
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).expect("writing to memory");
    Ok(String::from_utf8(buf).expect("ASCII output"))
}

/// CSV and plot of a sensitivity sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub csv: String,
    pub svg: String,
    pub rows: usize,
    pub failures: usize,
}

struct PointResult {
    point: Vec<f64>,
    mode: DetectionMode,
    report: Result<SensitivityReport>,
    fallback: (f64, f64, f64),
}

fn evaluate_point(config: &RunConfig, keys: &[String], point: &[f64], mode: DetectionMode, protocol: Option<Protocol>) -> PointResult {
    let fallback = (config.drive.pump_intensity, config.drive.probe_intensity, config.geometry.d_nv);
    let run = || -> Result<(SensitivityReport, (f64, f64, f64))> {
        let mut c = apply_point(config, keys, point)?;
        c.detection.mode = mode;
        if let Some(p) = protocol {
            c.sensitivity.protocol = p;
        }
        let here = (c.drive.pump_intensity, c.drive.probe_intensity, c.geometry.d_nv);
        let resolved = c.resolve()?;
        let inputs = PipelineInputs {
            params: &c.photophysics,
            drive: &c.drive,
            geometry: &c.geometry,
            pump: &resolved.pump,
            probe: &resolved.probe,
            detection: &resolved.detection,
            settings: &c.sensitivity,
            solver: &c.solver,
        };
        Ok((evaluate_sensitivity(&inputs)?, here))
    };
    match run() {
        Ok((report, here)) => PointResult {
            point: point.to_vec(),
            mode,
            report: Ok(report),
            fallback: here,
        },
        Err(e) => PointResult {
            point: point.to_vec(),
            mode,
            report: Err(e),
            fallback,
        },
    }
}

/// Runs the full sensitivity pipeline for every sweep point and mode.
///
/// Points are evaluated on the current rayon pool; rows come out in sweep
/// order (first axis outermost, then mode). Failed points become error rows.
pub fn cmd_sensitivity(config: &RunConfig, spec: &SweepSpec) -> Result<SweepOutput> {
    let keys = spec.resolve_keys()?;
    let modes = if spec.modes.is_empty() {
        vec![config.detection.mode]
    } else {
        spec.modes.clone()
    };
    let jobs: Vec<(Vec<f64>, DetectionMode)> = spec
        .points()
        .into_iter()
        .flat_map(|p| modes.iter().map(move |&m| (p.clone(), m)))
        .collect();
    let results: Vec<PointResult> = jobs
        .par_iter()
        .map(|(p, m)| evaluate_point(config, &keys, p, *m, spec.protocol))
        .collect();

    let mut csv = String::new();
    let _ = writeln!(csv, "# nvir {} sensitivity", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(csv, "{REPORT_CSV_UNITS}; swept keys SI");
    for k in &keys {
        let _ = write!(csv, "{k},");
    }
    let _ = writeln!(csv, "{REPORT_CSV_HEADER}");
    let mut failures = 0;
    for r in &results {
        for v in &r.point {
            let _ = write!(csv, "{v:.9e},");
        }
        match &r.report {
            Ok(rep) => {
                let _ = writeln!(csv, "{}", rep.csv_row());
            }
            Err(e) => {
                failures += 1;
                let (i_t, i_s, d) = r.fallback;
                let _ = writeln!(csv, "{}", SensitivityReport::error_row(i_t, i_s, d, r.mode, e));
            }
        }
    }
    let svg = sensitivity_plot(&keys, spec, &results, &csv)?;
    Ok(SweepOutput {
        csv,
        svg,
        rows: results.len(),
        failures,
    })
}

/// Scale and label for presenting a swept key in reporting units.
fn axis_units(key: &str) -> (f64, String) {
    let leaf = key.rsplit('.').next().unwrap_or(key);
    match leaf {
        "I_t" | "I_s" => (intensity_to_mw_um2(1.0), format!("{leaf} (mW/um^2)")),
        "d_NV" | "L" | "y_max" | "readout_horizon" => (1.0 / MICRON, format!("{leaf} (um)")),
        "p" | "w" | "t" | "lambda_pump" | "lambda_probe" | "wavelength" => (1.0 / NANOMETER, format!("{leaf} (nm)")),
        _ => (1.0, leaf.to_string()),
    }
}

struct Curve {
    label: String,
    color: RGBColor,
    points: Vec<(f64, f64)>,
}

fn sensitivity_plot(keys: &[String], spec: &SweepSpec, results: &[PointResult], csv: &str) -> Result<String> {
    let (x_scale, x_label) = keys.first().map(|k| axis_units(k)).unwrap_or((1.0, "point".into()));
    let x_of = |r: &PointResult, i: usize| r.point.first().map(|v| v * x_scale).unwrap_or(i as f64);
    let group_of = |r: &PointResult| {
        r.point
            .iter()
            .zip(keys)
            .skip(1)
            .map(|(v, k)| format!("{}={v:.3e}", k.rsplit('.').next().unwrap_or(k)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let palette = [RED, BLUE, GREEN, MAGENTA, CYAN, RGBColor(255, 140, 0)];
    let mut curves: Vec<Curve> = Vec::new();
    let mut spin: Vec<Curve> = Vec::new();
    let push = |list: &mut Vec<Curve>, label: String, color: RGBColor, pt: (f64, f64)| {
        if let Some(c) = list.iter_mut().find(|c| c.label == label) {
            c.points.push(pt);
        } else {
            list.push(Curve {
                label,
                color,
                points: vec![pt],
            });
        }
    };
    for (i, r) in results.iter().enumerate() {
        let Ok(rep) = &r.report else { continue };
        let x = x_of(r, i);
        let group = group_of(r);
        let tag = if group.is_empty() { String::new() } else { format!(" {group}") };
        for (name, value) in [("eta_cw", rep.eta_cw), ("eta_ac", rep.eta_ac)] {
            if let Some(v) = value.and_then(|e| e.value()) {
                let label = format!("{name} {}{tag}", r.mode.as_str());
                let idx = curves.iter().position(|c| c.label == label).unwrap_or(curves.len());
                push(&mut curves, label, palette[idx % palette.len()], (x, sensitivity_to_pt_per_um(v)));
            }
        }
        if r.mode == *spec.modes.first().unwrap_or(&r.mode) {
            push(&mut spin, format!("eta_sp{tag}"), BLACK, (x, sensitivity_to_pt_per_um(rep.eta_sp)));
        }
    }
    curves.extend(spin);

    let all: Vec<(f64, f64)> = curves.iter().flat_map(|c| c.points.iter().copied()).filter(|p| p.1 > 0.0).collect();
    let (mut x0, mut x1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y0, mut y1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 1.0, 10.0);
    }
    if x1 <= x0 {
        let pad = if x0 == 0.0 { 1.0 } else { 0.1 * x0.abs() };
        (x0, x1) = (x0 - pad, x1 + pad);
    }
    (y0, y1) = (y0 / 2.0, y1 * 2.0);
    let x_log = spec.axes.first().is_some_and(|a| a.log);

    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (800, 560)).into_drawing_area();
        let plot_err = |e: &dyn std::fmt::Display| Error::Format(format!("plot: {e}"));
        root.fill(&WHITE).map_err(|e| plot_err(&e))?;
        macro_rules! draw {
            ($chart:expr) => {{
                let mut chart = $chart;
                chart
                    .configure_mesh()
                    .x_desc(x_label.as_str())
                    .y_desc("sensitivity (pT/sqrt(Hz), 1 um^2 pixel)")
                    .draw()
                    .map_err(|e| plot_err(&e))?;
                for c in &curves {
                    let color = c.color;
                    chart
                        .draw_series(LineSeries::new(c.points.iter().copied(), color.stroke_width(2)))
                        .map_err(|e| plot_err(&e))?
                        .label(c.label.as_str())
                        .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
                    chart
                        .draw_series(c.points.iter().map(|&p| Circle::new(p, 3, color.filled())))
                        .map_err(|e| plot_err(&e))?;
                }
                chart
                    .configure_series_labels()
                    .background_style(WHITE.mix(0.8))
                    .border_style(BLACK)
                    .draw()
                    .map_err(|e| plot_err(&e))?;
            }};
        }
        let mut builder = ChartBuilder::on(&root);
        builder.margin(20).x_label_area_size(45).y_label_area_size(70);
        if x_log && x0 > 0.0 {
            draw!(builder
                .build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale())
                .map_err(|e| plot_err(&e))?);
        } else {
            draw!(builder
                .build_cartesian_2d(x0..x1, (y0..y1).log_scale())
                .map_err(|e| plot_err(&e))?);
        }
        root.present().map_err(|e| plot_err(&e))?;
    }
    // XML comments may not contain "--"
    let provenance = csv.replace("--", "- -");
    Ok(format!("<!-- nvir sensitivity data\n{provenance}-->\n{svg}"))
}

/// SNR contour over the (R, Δφ_LO) grid plus the optimizer result.
#[derive(Debug)]
pub struct HomodyneReport {
    /// `R,delta_phi_LO,snr`, R outermost, R-count × φ-count rows.
    pub contour_csv: String,
    pub optimum: Result<HomodyneOptimum>,
}

pub fn cmd_optimize_homodyne(config: &RunConfig, grid: &HomodyneGrid) -> Result<HomodyneReport> {
    let resolved = config.resolve()?;
    let mut detection = resolved.detection.clone();
    detection.mode = DetectionMode::Direct;
    let inputs = PipelineInputs {
        params: &config.photophysics,
        drive: &config.drive,
        geometry: &config.geometry,
        pump: &resolved.pump,
        probe: &resolved.probe,
        detection: &detection,
        settings: &config.sensitivity,
        solver: &config.solver,
    };
    let signal = cw_pipeline(&inputs)?.signal;
    let (i_s, t, side) = (config.drive.probe_intensity, config.sensitivity.t_mea, config.geometry.side);

    let mut csv = String::from("R,delta_phi_LO,snr\n");
    for r in grid.r_values() {
        for phi in grid.phi_values() {
            let fixed = crate::detection::DetectionConfig {
                r,
                delta_phi_lo: phi,
                ..resolved.detection.clone()
            };
            let snr = match snr_shot_limited(&signal, &fixed, i_s, side, t, DetectionMode::Homodyne) {
                Ok(v) => v,
                Err(Error::UndefinedSnr) => f64::NAN,
                Err(e) => return Err(e),
            };
            let _ = writeln!(csv, "{r:.9e},{phi:.9e},{snr:.9e}");
        }
    }
    let optimum = optimize_homodyne_with(&signal, &resolved.detection, i_s, t, side, grid);
    Ok(HomodyneReport {
        contour_csv: csv,
        optimum,
    })
}

/// Readout transient CSV and a text summary of the optimal window.
pub fn cmd_optimize_readout(config: &RunConfig) -> Result<(String, String)> {
    let resolved = config.resolve()?;
    let s = &config.sensitivity;
    let params = crate::PhotophysicsParams {
        n_nv: config.photophysics.n_nv * s.conversion_efficiency,
        ..config.photophysics
    };
    let ro = optimize_readout_time(
        &params,
        &config.drive,
        &resolved.pump,
        &resolved.probe,
        config.geometry.d_nv,
        s.readout_horizon,
        s.readout_samples,
        &config.solver,
    )?;
    let tr = &ro.transient;
    let contrast = tr.contrast();
    let mut csv = String::from("time_s,n6_off,n6_on,contrast,window_mean\n");
    let mut area = 0.0;
    for k in 0..tr.times.len() {
        if k > 0 {
            area += 0.5 * (contrast[k] + contrast[k - 1]) * (tr.times[k] - tr.times[k - 1]);
        }
        let mean = if tr.times[k] > 0.0 { area / tr.times[k] } else { contrast[k] };
        let _ = writeln!(
            csv,
            "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
            tr.times[k], tr.n6_off[k], tr.n6_on[k], contrast[k], mean
        );
    }
    let w = &ro.window;
    let mut summary = format!("t_read_opt = {:.3} ns\nwindow mean contrast = {:.6e} m^-3\n", w.t_opt * 1e9, w.value);
    if w.at_start {
        summary.push_str("warning: optimum at the first sample; the readout contrast decays from t = 0\n");
    }
    if w.at_horizon {
        summary.push_str("warning: optimum at the simulation horizon; increase sensitivity.readout_horizon\n");
    } else if w.horizon_warning {
        summary.push_str("warning: contrast still significant at the horizon\n");
    }
    Ok((csv, summary))
}

/// Text report for a dispersion query.
pub fn cmd_dispersion(config: &RunConfig, query: &DispersionCommand) -> Result<String> {
    let mut s = String::new();
    let mismatch = |s: &mut String, q: DispersionQuery| {
        match spp_bw_mismatch(&q) {
            Ok(dk) => {
                let _ = writeln!(s, "SPP-BW mismatch = {:.6} rad/um", dk * MICRON);
            }
            Err(e) => {
                let _ = writeln!(s, "SPP-BW mismatch undefined: {e}");
            }
        }
    };
    let eps = |lambda: f64, pec: bool| (!pec).then(|| config.metal.permittivity(lambda));
    match *query {
        DispersionCommand::Period { lambda, n_d, m, theta } => {
            let theta_i = theta.to_radians();
            let p = rwa_period(lambda, n_d, m, theta_i)?;
            let _ = writeln!(s, "p = {:.2} nm", p / NANOMETER);
            mismatch(&mut s, DispersionQuery { lambda, n_d, m, theta_i, p, eps_metal: eps(lambda, false) });
        }
        DispersionCommand::Angle { lambda, n_d, m, p } => {
            let theta_i = rwa_incidence_angle(lambda, n_d, m, p).map_err(|e| match e {
                Error::NoCoupling { .. } => Error::Domain(format!(
                    "{e}; order {m} cannot reach a Rayleigh-Wood anomaly at p = {:.2} nm",
                    p / NANOMETER
                )),
                other => other,
            })?;
            let _ = writeln!(s, "theta_i = {:.3} deg (signed {:.3} deg)", theta_i.to_degrees().abs(), theta_i.to_degrees());
            mismatch(&mut s, DispersionQuery { lambda, n_d, m, theta_i, p, eps_metal: eps(lambda, false) });
        }
        DispersionCommand::Spp { lambda, n_d, m, p, theta, pec } => {
            let q = DispersionQuery {
                lambda,
                n_d,
                m,
                theta_i: theta.to_radians(),
                p,
                eps_metal: eps(lambda, pec),
            };
            if let Some(e) = q.eps_metal {
                let _ = writeln!(s, "eps_metal = {:.4} {:+.4}i", e.re, e.im);
            }
            let dk = spp_bw_mismatch(&q)?;
            let _ = writeln!(s, "SPP-BW mismatch = {:.6} rad/um", dk * MICRON);
        }
    }
    Ok(s)
}

/// Text report of grid, range and depth averages of both maps.
pub fn cmd_fieldmap_stats(config: &RunConfig, pump: &FieldMap, probe: &FieldMap, depth: Option<f64>) -> Result<String> {
    let d = depth.unwrap_or(config.geometry.d_nv);
    let geom = crate::PixelGeometry { d_nv: d, ..config.geometry };
    let mut s = String::new();
    for (name, map) in [("pump", pump), ("probe", probe)] {
        let (lo, hi) = map.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let _ = writeln!(s, "[{name}]{}", if map.is_synthetic() { " synthetic" } else { "" });
        let _ = writeln!(s, "  wavelength = {:.1} nm", map.wavelength() / NANOMETER);
        let _ = writeln!(s, "  period = {:.1} nm", map.period() / NANOMETER);
        let _ = writeln!(s, "  grid = {} x {}, depth {:.3} um", map.nx(), map.ny(), map.y_max() / MICRON);
        let _ = writeln!(s, "  enhancement range = [{lo:.4}, {hi:.4}]");
        let _ = writeln!(s, "  mean enhancement to {:.3} um = {:.6}", d / MICRON, average_enhancement(map, d)?);
        let _ = writeln!(s, "  figure of merit <|E/E0|^2> V n_NV = {:.6e}", figure_of_merit(map, &geom, config.photophysics.n_nv)?);
    }
    Ok(s)
}
