use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PixelGeometry;
use crate::units::{LAMBDA_PROBE, LAMBDA_PUMP, MICRON, NANOMETER};

const CSV_HEADER: &str = "x_m,y_m,enh";
const GRID_TOL: f64 = 1e-6;

/// Sidecar metadata stored next to a field-map CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapMetadata {
    pub wavelength: f64,
    pub period: f64,
    pub synthetic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// |E/E₀|² on a uniform grid spanning x ∈ [−p/2, p/2], y ∈ [0, y_max].
///
/// Samples are row-major with y as the outer index.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    nx: usize,
    ny: usize,
    y_max: f64,
    values: Vec<f64>,
    meta: MapMetadata,
}

impl FieldMap {
    pub fn new(meta: MapMetadata, nx: usize, ny: usize, y_max: f64, values: Vec<f64>) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::Format(format!("grid must be at least 2x2, got {nx}x{ny}")));
        }
        if values.len() != nx * ny {
            return Err(Error::Format(format!(
                "expected {} samples for a {nx}x{ny} grid, got {}",
                nx * ny,
                values.len()
            )));
        }
        if !(meta.period.is_finite() && meta.period > 0.0) {
            return Err(Error::Format(format!("period must be positive, got {}", meta.period)));
        }
        if !(meta.wavelength.is_finite() && meta.wavelength > 0.0) {
            return Err(Error::Format(format!("wavelength must be positive, got {}", meta.wavelength)));
        }
        if !(y_max.is_finite() && y_max > 0.0) {
            return Err(Error::Format(format!("y_max must be positive, got {y_max}")));
        }
        if let Some((cell, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Format(format!(
                "sample {v} at cell {cell} (ix = {}, iy = {}) is negative or not finite",
                cell % nx,
                cell / nx
            )));
        }
        Ok(FieldMap {
            nx,
            ny,
            y_max,
            values,
            meta,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.meta.period / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        self.y_max / (self.ny - 1) as f64
    }

    pub fn x(&self, ix: usize) -> f64 {
        -0.5 * self.meta.period + ix as f64 * self.dx()
    }

    pub fn y(&self, iy: usize) -> f64 {
        iy as f64 * self.dy()
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn period(&self) -> f64 {
        self.meta.period
    }

    pub fn wavelength(&self) -> f64 {
        self.meta.wavelength
    }

    pub fn is_synthetic(&self) -> bool {
        self.meta.synthetic
    }

    pub fn metadata(&self) -> &MapMetadata {
        &self.meta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    /// True when `other` samples the same (x, y) points.
    pub fn same_grid(&self, other: &FieldMap) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && (self.meta.period - other.meta.period).abs() <= GRID_TOL * self.meta.period
            && (self.y_max - other.y_max).abs() <= GRID_TOL * self.y_max
    }

    fn check_depth(&self, d: f64) -> Result<()> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::validation("d", format!("depth must be positive, got {d}")));
        }
        if d > self.y_max * (1.0 + 1e-12) {
            return Err(Error::Extent {
                requested: d,
                available: self.y_max,
            });
        }
        Ok(())
    }

    fn depth_split(&self, d: f64) -> (usize, f64) {
        let s = (d / self.dy()).min((self.ny - 1) as f64);
        let j = s.round();
        if (s - j).abs() < 1e-9 {
            (j as usize, 0.0)
        } else {
            (s.floor() as usize, s - s.floor())
        }
    }

    /// Number of leading rows touched by an integral down to depth `d`.
    pub fn rows_for_depth(&self, d: f64) -> Result<usize> {
        self.check_depth(d)?;
        let (j, frac) = self.depth_split(d);
        Ok(if frac > 0.0 { j + 2 } else { j + 1 })
    }

    /// Quadrature weights w such that ∫₀^d ∫ f dx dy ≈ Σ w·f over the first
    /// `rows_for_depth(d)` rows.
    ///
    /// Composite trapezoid in both directions; the partial interval ending at
    /// `d` integrates the linear interpolant between the bracketing rows.
    pub fn quadrature_weights(&self, d: f64) -> Result<Vec<f64>> {
        let rows = self.rows_for_depth(d)?;
        let (dx, dy) = (self.dx(), self.dy());
        let (j, frac) = self.depth_split(d);
        let mut wy = vec![0.0; rows];
        for iy in 0..j {
            wy[iy] += 0.5 * dy;
            wy[iy + 1] += 0.5 * dy;
        }
        if frac > 0.0 {
            wy[j] += 0.5 * frac * dy * (2.0 - frac);
            wy[j + 1] += 0.5 * frac * frac * dy;
        }
        let mut weights = Vec::with_capacity(rows * self.nx);
        for w in wy {
            for ix in 0..self.nx {
                let wx = if ix == 0 || ix == self.nx - 1 { 0.5 * dx } else { dx };
                weights.push(w * wx);
            }
        }
        Ok(weights)
    }

    /// ∫₀^d ∫ f dx dy for a grid function `f` laid out like the samples; only
    /// the first `rows_for_depth(d)` rows of `f` are read.
    pub fn integrate_to_depth(&self, d: f64, f: &[f64]) -> Result<f64> {
        let weights = self.quadrature_weights(d)?;
        if f.len() < weights.len() {
            return Err(Error::Format(format!(
                "grid function has {} samples, need {}",
                f.len(),
                weights.len()
            )));
        }
        Ok(weights.iter().zip(f).map(|(w, v)| w * v).sum())
    }

    /// Writes `<path>` as CSV and the metadata sidecar next to it.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(self.values.len() * 40);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let _ = writeln!(out, "{:e},{:e},{:e}", self.x(ix), self.y(iy), self.value(ix, iy));
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))?;
        let sidecar = sidecar_path(path);
        let meta = serde_json::to_string_pretty(&self.meta).expect("metadata serializes");
        std::fs::write(&sidecar, meta + "\n").map_err(|e| Error::io(&sidecar, e))
    }

    /// Parses CSV text against already-loaded metadata.
    pub fn parse(csv: &str, meta: MapMetadata) -> Result<Self> {
        let mut lines = csv.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Format("empty field map".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["x_m", "y_m", "enh"] {
            return Err(Error::Format(format!("expected header `{CSV_HEADER}`, got `{header}`")));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Format(format!("data row {i}: expected 3 columns, got {}", fields.len())));
            }
            let mut parsed = [0.0; 3];
            for (slot, text) in parsed.iter_mut().zip(&fields) {
                *slot = text
                    .parse()
                    .map_err(|_| Error::Format(format!("data row {i}: cannot parse `{text}`")))?;
            }
            rows.push(parsed);
        }
        if rows.is_empty() {
            return Err(Error::Format("field map has no samples".into()));
        }
        let y0 = rows[0][1];
        let nx = rows.iter().take_while(|r| r[1] == y0).count();
        if nx < 2 || rows.len() % nx != 0 {
            return Err(Error::Format(format!(
                "{} samples do not form a rectangular grid with {nx} columns",
                rows.len()
            )));
        }
        let ny = rows.len() / nx;
        let xs: Vec<f64> = rows[..nx].iter().map(|r| r[0]).collect();
        let ys: Vec<f64> = rows.iter().step_by(nx).map(|r| r[1]).collect();
        let x_span = xs[nx - 1] - xs[0];
        let p = meta.period;
        if (x_span - p).abs() > GRID_TOL * p || (xs[0] + 0.5 * p).abs() > GRID_TOL * p {
            return Err(Error::Format(format!(
                "x range [{:e}, {:e}] does not cover one period {p:e} centred on 0",
                xs[0],
                xs[nx - 1]
            )));
        }
        let y_max = ys[ys.len() - 1];
        if y0.abs() > GRID_TOL * y_max.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::Format(format!("y must start at 0, got {y0:e}")));
        }
        let dx = p / (nx - 1) as f64;
        let dy = y_max / (ny.max(2) - 1) as f64;
        for (k, r) in rows.iter().enumerate() {
            let (ix, iy) = (k % nx, k / nx);
            if (r[0] - xs[ix]).abs() > GRID_TOL * dx || (r[1] - ys[iy]).abs() > GRID_TOL * dy {
                return Err(Error::Format(format!("cell {k} breaks the row-major grid layout")));
            }
        }
        for (i, &x) in xs.iter().enumerate() {
            if (x - (xs[0] + i as f64 * dx)).abs() > GRID_TOL * dx {
                return Err(Error::Format(format!("non-uniform x spacing at column {i}")));
            }
        }
        for (i, &y) in ys.iter().enumerate() {
            if (y - i as f64 * dy).abs() > GRID_TOL * dy {
                return Err(Error::Format(format!("non-uniform y spacing at row {i}")));
            }
        }
        FieldMap::new(meta, nx, ny, y_max, rows.iter().map(|r| r[2]).collect())
    }
}

/// `pump.csv` → `pump.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

/// Loads a CSV field map and its `.meta.json` sidecar.
pub fn load_field_map(path: &Path) -> Result<FieldMap> {
    let csv = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let sidecar = sidecar_path(path);
    let meta_text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let meta: MapMetadata = serde_json::from_str(&meta_text)
        .map_err(|e| Error::Format(format!("{}: {e}", sidecar.display())))?;
    FieldMap::parse(&csv, meta)
}

/// Parameters of the two-component synthetic enhancement profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticMapSpec {
    pub wavelength: f64,
    pub spp_amplitude: f64,
    pub spp_decay_length: f64,
    pub rwa_amplitude: f64,
    pub rwa_decay_length: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl SyntheticMapSpec {
    /// Green profile whose 5 µm depth average is close to 2.
    pub fn pump_default() -> Self {
        SyntheticMapSpec {
            wavelength: LAMBDA_PUMP,
            spp_amplitude: 40.0,
            spp_decay_length: 100.0 * NANOMETER,
            rwa_amplitude: 2.5,
            rwa_decay_length: 5.0 * MICRON,
            y_max: 10.0 * MICRON,
            nx: 9,
            ny: 401,
        }
    }

    /// IR profile: strong interface plasmon over a slowly decaying lattice mode.
    pub fn probe_default() -> Self {
        SyntheticMapSpec {
            wavelength: LAMBDA_PROBE,
            spp_amplitude: 100.0,
            spp_decay_length: 100.0 * NANOMETER,
            rwa_amplitude: 12.0,
            rwa_decay_length: 5.0 * MICRON,
            ..Self::pump_default()
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let positive = [
            ("wavelength", self.wavelength),
            ("spp_decay_length", self.spp_decay_length),
            ("rwa_decay_length", self.rwa_decay_length),
            ("y_max", self.y_max),
        ];
        for (name, v) in positive {
            if v.is_nan() || v <= 0.0 || (name != "spp_decay_length" && name != "rwa_decay_length" && !v.is_finite()) {
                return Err(Error::validation(format!("{prefix}.{name}"), format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [("spp_amplitude", self.spp_amplitude), ("rwa_amplitude", self.rwa_amplitude)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!("{prefix}.{name}"), format!("must be nonnegative, got {v}")));
            }
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::validation(format!("{prefix}.nx"), "grid needs at least 2x2 points"));
        }
        Ok(())
    }
}

/// rwa·e^(−y/ℓ_rwa) + spp·e^(−y/ℓ_spp)·cos²(πx/p), tagged synthetic.
///
/// An infinite decay length gives a depth-independent term.
pub fn synthetic_field_map(p: f64, spec: &SyntheticMapSpec) -> Result<FieldMap> {
    spec.validate("synthetic")?;
    let meta = MapMetadata {
        wavelength: spec.wavelength,
        period: p,
        synthetic: true,
        description: Some(format!(
            "synthetic: {}*exp(-y/{:e}) + {}*exp(-y/{:e})*cos^2(pi x/p)",
            spec.rwa_amplitude, spec.rwa_decay_length, spec.spp_amplitude, spec.spp_decay_length
        )),
    };
    let dx = p / (spec.nx - 1) as f64;
    let dy = spec.y_max / (spec.ny - 1) as f64;
    let mut values = Vec::with_capacity(spec.nx * spec.ny);
    for iy in 0..spec.ny {
        let y = iy as f64 * dy;
        let rwa = spec.rwa_amplitude * (-y / spec.rwa_decay_length).exp();
        let spp = spec.spp_amplitude * (-y / spec.spp_decay_length).exp();
        for ix in 0..spec.nx {
            let x = -0.5 * p + ix as f64 * dx;
            values.push(rwa + spp * (PI * x / p).cos().powi(2));
        }
    }
    FieldMap::new(meta, spec.nx, spec.ny, spec.y_max, values)
}

/// Volume-averaged |E/E₀|² over one period and depth `d`.
pub fn average_enhancement(map: &FieldMap, d: f64) -> Result<f64> {
    Ok(map.integrate_to_depth(d, map.values())? / (map.period() * d))
}

/// ⟨|E/E₀|²⟩·L²·d_NV·n_NV.
pub fn figure_of_merit(map: &FieldMap, geom: &PixelGeometry, n_nv: f64) -> Result<f64> {
    Ok(average_enhancement(map, geom.d_nv)? * geom.volume() * n_nv)
}
