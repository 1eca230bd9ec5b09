//! TOML run configuration.
//!
//! Every section is optional and falls back to the library defaults, so an
//! empty document is a valid configuration. Values are SI. Relative file
//! paths are resolved against the directory of the configuration file.
//!
//! ```toml
//! schema_version = 1
//!
//! [photophysics]
//! n_NV = 1.4e24
//!
//! [drive]
//! I_t = 1e8          # W/m², i.e. 0.1 mW/µm²
//!
//! [field_maps]
//! probe = "maps/probe_1042.csv"   # sidecar maps/probe_1042.meta.json
//!
//! [detection.phase_model]
//! kind = "linear"
//! kappa = -80.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detection::{load_phase_table, DetectionConfig};
use crate::error::{Error, Result};
use crate::model::{OpticalDrive, PhotophysicsParams, PixelGeometry};
use crate::photonics::{load_field_map, synthetic_field_map, DrudeLorentz, FieldMap, SyntheticMapSpec};
use crate::rates::IntegratorOptions;
use crate::sensitivity::SensitivitySettings;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming a configuration file when `--config` is absent.
pub const CONFIG_ENV: &str = "NVIR_CONFIG";

/// Field-map sources: files when given, otherwise the synthetic profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldMapConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pump: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<PathBuf>,
    pub synthetic_pump: SyntheticMapSpec,
    pub synthetic_probe: SyntheticMapSpec,
}

impl Default for FieldMapConfig {
    fn default() -> Self {
        FieldMapConfig {
            pump: None,
            probe: None,
            synthetic_pump: SyntheticMapSpec::pump_default(),
            synthetic_probe: SyntheticMapSpec::probe_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub photophysics: PhotophysicsParams,
    pub drive: OpticalDrive,
    pub geometry: PixelGeometry,
    pub field_maps: FieldMapConfig,
    pub detection: DetectionConfig,
    pub solver: IntegratorOptions,
    pub sensitivity: SensitivitySettings,
    /// Metal permittivity model for plasmon dispersion queries.
    pub metal: DrudeLorentz,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            photophysics: crate::model::default_params(),
            drive: OpticalDrive::default(),
            geometry: PixelGeometry::default(),
            field_maps: FieldMapConfig::default(),
            detection: DetectionConfig::default(),
            solver: IntegratorOptions::default(),
            sensitivity: SensitivitySettings::default(),
            metal: DrudeLorentz::silver(),
            base_dir: None,
        }
    }
}

/// Field maps and detection settings with every file reference loaded.
#[derive(Debug, Clone)]
pub struct ResolvedInputs {
    pub pump: FieldMap,
    pub probe: FieldMap,
    pub detection: DetectionConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema {
                key: "schema_version".into(),
                message: format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            });
        }
        self.photophysics.validate("photophysics")?;
        self.drive.validate("drive")?;
        self.geometry.validate("geometry")?;
        self.field_maps.synthetic_pump.validate("field_maps.synthetic_pump")?;
        self.field_maps.synthetic_probe.validate("field_maps.synthetic_probe")?;
        self.detection.validate("detection")?;
        self.solver.validate("solver")?;
        self.sensitivity.validate("sensitivity")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    fn resolve_path(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Loads or synthesizes both field maps and the phase table.
    pub fn resolve(&self) -> Result<ResolvedInputs> {
        let map = |path: &Option<PathBuf>, spec: &SyntheticMapSpec| match path {
            Some(p) => load_field_map(&self.resolve_path(p)),
            None => synthetic_field_map(self.geometry.period, spec),
        };
        let pump = map(&self.field_maps.pump, &self.field_maps.synthetic_pump)?;
        let probe = map(&self.field_maps.probe, &self.field_maps.synthetic_probe)?;
        let mut detection = self.detection.clone();
        if let Some(table) = &self.detection.phase_table {
            detection.phase_model = load_phase_table(&self.resolve_path(table))?;
        }
        Ok(ResolvedInputs { pump, probe, detection })
    }

    /// Applies `key = value`, where `key` is a dotted path (`drive.I_t`) or a
    /// leaf name unique across sections (`I_t`), and `value` is TOML
    /// (`1e8`, `true`, `"direct"`) or a bare string.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let parsed = parse_value(value);
        self.set_value(key, parsed)
    }

    pub fn set_value(&mut self, key: &str, value: toml::Value) -> Result<()> {
        let path = resolve_key(key)?;
        let mut table = toml::Table::try_from(&*self).expect("configuration serializes");
        let (leaf, parents) = path.split_last().expect("nonempty key path");
        let mut cursor = &mut table;
        for part in parents {
            cursor = cursor
                .entry(part.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| Error::Schema {
                    key: key.into(),
                    message: format!("`{part}` is not a section"),
                })?;
        }
        cursor.insert(leaf.clone(), value);
        let base_dir = self.base_dir.take();
        let mut updated = from_table(table)?;
        updated.base_dir = base_dir;
        updated.validate()?;
        *self = updated;
        Ok(())
    }
}

fn parse_value(text: &str) -> toml::Value {
    format!("v = {text}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

/// Keys that may be absent from a serialized configuration.
const OPTIONAL_KEYS: [&str; 4] = ["field_maps.pump", "field_maps.probe", "detection.phase_table", "sensitivity.tau"];

fn known_keys() -> Vec<String> {
    fn walk(prefix: &str, table: &toml::Table, out: &mut Vec<String>) {
        for (k, v) in table {
            let full = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            match v {
                toml::Value::Table(t) => walk(&full, t, out),
                _ => out.push(full),
            }
        }
    }
    let table = toml::Table::try_from(RunConfig::default()).expect("configuration serializes");
    let mut out = Vec::new();
    walk("", &table, &mut out);
    out.extend(OPTIONAL_KEYS.iter().map(|s| s.to_string()));
    out
}

/// Expands a dotted or leaf key to the full path of a real configuration key.
pub fn resolve_key(key: &str) -> Result<Vec<String>> {
    let keys = known_keys();
    if keys.iter().any(|k| k == key) {
        return Ok(key.split('.').map(str::to_string).collect());
    }
    let suffix = format!(".{key}");
    let matches: Vec<&String> = keys.iter().filter(|k| k.ends_with(&suffix)).collect();
    match matches.as_slice() {
        [one] => Ok(one.split('.').map(str::to_string).collect()),
        [] => Err(Error::Schema {
            key: key.into(),
            message: "no such configuration key".into(),
        }),
        many => Err(Error::Schema {
            key: key.into(),
            message: format!(
                "ambiguous key, candidates: {}",
                many.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
            ),
        }),
    }
}

fn from_table(table: toml::Table) -> Result<RunConfig> {
    serde_path_to_error::deserialize(table).map_err(|e| {
        let key = e.path().to_string();
        Error::Schema {
            key: if key == "." { "<document>".into() } else { key },
            message: e.into_inner().message().to_string(),
        }
    })
}

/// Parses and validates a configuration document.
pub fn load_config(source: &str) -> Result<RunConfig> {
    let table: toml::Table = source.parse().map_err(|e: toml::de::Error| Error::Schema {
        key: "<document>".into(),
        message: e.to_string().trim().to_string(),
    })?;
    let config = from_table(table)?;
    config.validate()?;
    Ok(config)
}

/// Reads a configuration file; relative paths inside it resolve against its
/// directory.
pub fn load_config_file(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config = load_config(&text)?;
    config.base_dir = path.parent().map(Path::to_path_buf);
    Ok(config)
}
