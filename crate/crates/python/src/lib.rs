//! Python bindings for `nvir-core`.
//!
//! Configurations travel as TOML text or [`Config`] objects; structured
//! results come back as plain dicts and lists. Input problems raise
//! `nvir.ConfigError` (a `ValueError`), numerical failures raise
//! `nvir.NumericalError` (a `RuntimeError`).

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use nvir_core::detection::{optimize_homodyne, DetectionMode};
use nvir_core::photonics::{average_enhancement, DispersionQuery};
use nvir_core::rates::{build_generator, evolve_with, steady_state, steady_state_from, LevelPopulations};
use nvir_core::sensitivity::{cw_pipeline, evaluate_sensitivity, PipelineInputs, Protocol};
use nvir_core::{Error, RunConfig};

create_exception!(nvir, ConfigError, PyValueError);
create_exception!(nvir, NumericalError, PyRuntimeError);

fn to_py_err(e: Error) -> PyErr {
    match e.exit_code() {
        1 => ConfigError::new_err(e.to_string()),
        _ => NumericalError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value;
    Ok(match value {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_any()
        }
    })
}

fn serialize<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let json = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &json)
}

/// A validated run configuration.
#[pyclass(module = "nvir", from_py_object)]
#[derive(Clone)]
struct Config {
    inner: RunConfig,
}

#[pymethods]
impl Config {
    /// Parse TOML text; missing keys take the built-in defaults.
    #[new]
    #[pyo3(signature = (toml = ""))]
    fn new(toml: &str) -> PyResult<Self> {
        Ok(Config {
            inner: nvir_core::load_config(toml).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn from_file(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Config {
            inner: nvir_core::load_config_file(&path).map_err(to_py_err)?,
        })
    }

    /// Override one key (dotted path or unique leaf name); `value` is TOML
    /// or a bare string.
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner.set(key, value).map_err(to_py_err)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    /// The configuration as nested dicts.
    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serialize(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(I_t={:e}, I_s={:e}, d_NV={:e}, mode={})",
            self.inner.drive.pump_intensity,
            self.inner.drive.probe_intensity,
            self.inner.geometry.d_nv,
            self.inner.detection.mode.as_str()
        )
    }
}

fn config_or_default(config: Option<&Config>) -> RunConfig {
    config.map(|c| c.inner.clone()).unwrap_or_default()
}

/// Table parameter defaults as a dict (SI units).
#[pyfunction]
fn default_params(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    serialize(py, &nvir_core::default_params())
}

/// Steady-state populations n1..n8 (m⁻³) of one cell.
///
/// With `from_ground`, returns the long-time limit from m_s = 0 instead,
/// which exists even when the steady state is not unique.
#[pyfunction]
#[pyo3(signature = (config=None, enh_pump=1.0, enh_probe=1.0, mw_on=None, from_ground=false))]
fn steady_populations(
    config: Option<&Config>,
    enh_pump: f64,
    enh_probe: f64,
    mw_on: Option<bool>,
    from_ground: bool,
) -> PyResult<Vec<f64>> {
    let c = config_or_default(config);
    let drive = c.drive.with_mw(mw_on.unwrap_or(c.drive.mw_on));
    let gen = build_generator(&c.photophysics, &drive, enh_pump, enh_probe).map_err(to_py_err)?;
    let n = c.photophysics.n_nv;
    let pop = if from_ground {
        steady_state_from(&gen, &LevelPopulations::all_in(1, n))
    } else {
        steady_state(&gen, n)
    }
    .map_err(to_py_err)?;
    Ok(pop.0.to_vec())
}

/// Integrates the rate equations from `initial` (eight densities, or a
/// 1-based level that holds all of n_NV). Returns (times, populations).
#[pyfunction]
#[pyo3(signature = (t_end, sampling, initial=None, config=None, enh_pump=1.0, enh_probe=1.0))]
fn evolve(
    py: Python<'_>,
    t_end: f64,
    sampling: f64,
    initial: Option<&Bound<'_, PyAny>>,
    config: Option<&Config>,
    enh_pump: f64,
    enh_probe: f64,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let c = config_or_default(config);
    let n = c.photophysics.n_nv;
    let start = match initial {
        None => LevelPopulations::all_in(1, n),
        Some(obj) => {
            if let Ok(level) = obj.extract::<usize>() {
                if !(1..=8).contains(&level) {
                    return Err(ConfigError::new_err(format!("level must be 1..8, got {level}")));
                }
                LevelPopulations::all_in(level, n)
            } else {
                let v: Vec<f64> = obj.extract()?;
                let arr: [f64; 8] = v
                    .try_into()
                    .map_err(|_| ConfigError::new_err("initial populations need exactly 8 values"))?;
                LevelPopulations(arr)
            }
        }
    };
    let gen = build_generator(&c.photophysics, &c.drive, enh_pump, enh_probe).map_err(to_py_err)?;
    let trace = py
        .detach(|| evolve_with(&gen, &start, t_end, sampling, &c.solver))
        .map_err(to_py_err)?;
    Ok((trace.times, trace.samples.iter().map(|s| s.0.to_vec()).collect()))
}

fn check_order(m: i32) -> PyResult<()> {
    if m == 0 {
        return Err(ConfigError::new_err("diffraction order m must be nonzero"));
    }
    Ok(())
}

/// Grating period (m) of the Rayleigh-Wood anomaly of order `m`.
#[pyfunction]
#[pyo3(signature = (wavelength, n_d, m, theta_i=0.0))]
fn rwa_period(wavelength: f64, n_d: f64, m: i32, theta_i: f64) -> PyResult<f64> {
    check_order(m)?;
    nvir_core::photonics::rwa_period(wavelength, n_d, m, theta_i).map_err(to_py_err)
}

/// Signed incidence angle (rad) of the Rayleigh-Wood anomaly of order `m`.
#[pyfunction]
fn rwa_incidence_angle(wavelength: f64, n_d: f64, m: i32, p: f64) -> PyResult<f64> {
    check_order(m)?;
    nvir_core::photonics::rwa_incidence_angle(wavelength, n_d, m, p).map_err(to_py_err)
}

/// SPP-Bloch-wave momentum mismatch (rad/m). Uses the configured metal
/// model unless `pec` is set.
#[pyfunction]
#[pyo3(signature = (wavelength, n_d, m, p, theta_i=0.0, pec=false, config=None))]
fn spp_bw_mismatch(wavelength: f64, n_d: f64, m: i32, p: f64, theta_i: f64, pec: bool, config: Option<&Config>) -> PyResult<f64> {
    check_order(m)?;
    let metal = config_or_default(config).metal;
    let q = DispersionQuery {
        lambda: wavelength,
        n_d,
        m,
        theta_i,
        p,
        eps_metal: (!pec).then(|| metal.permittivity(wavelength)),
    };
    nvir_core::photonics::spp_bw_mismatch(&q).map_err(to_py_err)
}

/// Normalized camera intensity of the homodyne interferometer.
#[pyfunction]
fn homodyne_output(r_mag: f64, delta_phi_nv: f64, r: f64, delta_phi_lo: f64) -> f64 {
    nvir_core::detection::homodyne_output(r_mag, delta_phi_nv, r, delta_phi_lo)
}

/// Spin-projection-limited sensitivity per root area, T·Hz^(−1/2)·m.
#[pyfunction]
fn eta_spin_projection(n_nv: f64, d_nv: f64, tau: f64) -> f64 {
    nvir_core::sensitivity::eta_spin_projection(n_nv, d_nv, tau)
}

/// σ_R for mean photon counts `a`, `b`; None when a == b.
#[pyfunction]
fn readout_fidelity(a: f64, b: f64) -> Option<f64> {
    nvir_core::sensitivity::readout_fidelity(a, b).value()
}

#[pyfunction]
fn optimal_tau(t2: f64, t_init: f64, t_read: f64) -> f64 {
    nvir_core::sensitivity::optimal_tau(t2, t_init, t_read)
}

/// Mean probe enhancement down to `depth` (default d_NV) of the `"pump"`
/// or `"probe"` map.
#[pyfunction]
#[pyo3(signature = (which, config=None, depth=None))]
fn mean_enhancement(which: &str, config: Option<&Config>, depth: Option<f64>) -> PyResult<f64> {
    let c = config_or_default(config);
    let maps = c.resolve().map_err(to_py_err)?;
    let map = match which {
        "pump" => &maps.pump,
        "probe" => &maps.probe,
        other => return Err(ConfigError::new_err(format!("expected 'pump' or 'probe', got '{other}'"))),
    };
    average_enhancement(map, depth.unwrap_or(c.geometry.d_nv)).map_err(to_py_err)
}

fn parse_protocol(s: &str) -> PyResult<Protocol> {
    s.parse().map_err(to_py_err)
}

/// Full sensitivity evaluation; returns the report as a dict (SI units).
#[pyfunction]
#[pyo3(signature = (config=None, protocol=None, mode=None))]
fn evaluate<'py>(
    py: Python<'py>,
    config: Option<&Config>,
    protocol: Option<&str>,
    mode: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut c = config_or_default(config);
    if let Some(p) = protocol {
        c.sensitivity.protocol = parse_protocol(p)?;
    }
    if let Some(m) = mode {
        c.detection.mode = m.parse::<DetectionMode>().map_err(to_py_err)?;
    }
    let report = py
        .detach(|| {
            let r = c.resolve()?;
            evaluate_sensitivity(&PipelineInputs {
                params: &c.photophysics,
                drive: &c.drive,
                geometry: &c.geometry,
                pump: &r.pump,
                probe: &r.probe,
                detection: &r.detection,
                settings: &c.sensitivity,
                solver: &c.solver,
            })
        })
        .map_err(to_py_err)?;
    serialize(py, &report)
}

/// Homodyne operating point {r, delta_phi_lo, snr} for the CW signal.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn optimize_operating_point<'py>(py: Python<'py>, config: Option<&Config>) -> PyResult<Bound<'py, PyAny>> {
    let c = config_or_default(config);
    let opt = py
        .detach(|| {
            let r = c.resolve()?;
            let direct = nvir_core::detection::DetectionConfig {
                mode: DetectionMode::Direct,
                ..r.detection.clone()
            };
            let inputs = PipelineInputs {
                params: &c.photophysics,
                drive: &c.drive,
                geometry: &c.geometry,
                pump: &r.pump,
                probe: &r.probe,
                detection: &direct,
                settings: &c.sensitivity,
                solver: &c.solver,
            };
            let signal = cw_pipeline(&inputs)?.signal;
            optimize_homodyne(&signal, &r.detection, c.drive.probe_intensity, c.sensitivity.t_mea, c.geometry.side)
        })
        .map_err(to_py_err)?;
    serialize(py, &opt)
}

#[pymodule]
pub fn nvir(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<Config>()?;
    m.add_function(wrap_pyfunction!(default_params, m)?)?;
    m.add_function(wrap_pyfunction!(steady_populations, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(rwa_period, m)?)?;
    m.add_function(wrap_pyfunction!(rwa_incidence_angle, m)?)?;
    m.add_function(wrap_pyfunction!(spp_bw_mismatch, m)?)?;
    m.add_function(wrap_pyfunction!(homodyne_output, m)?)?;
    m.add_function(wrap_pyfunction!(eta_spin_projection, m)?)?;
    m.add_function(wrap_pyfunction!(readout_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_tau, m)?)?;
    m.add_function(wrap_pyfunction!(mean_enhancement, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_operating_point, m)?)?;
    Ok(())
}
