use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{OpticalDrive, PhotophysicsParams};
use crate::photonics::FieldMap;
use crate::rates::{build_generator, net_singlet_population, steady_state, steady_state_from, LevelPopulations};

/// Populations for the leading `rows` rows of a field-map grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationGrid {
    pub nx: usize,
    pub rows: usize,
    pub cells: Vec<LevelPopulations>,
}

impl PopulationGrid {
    pub fn cell(&self, ix: usize, iy: usize) -> &LevelPopulations {
        &self.cells[iy * self.nx + ix]
    }

    /// n6 − n5 per cell.
    pub fn net_singlet(&self) -> Vec<f64> {
        self.cells.iter().map(net_singlet_population).collect()
    }
}

/// Distinct (enh_pump, enh_probe) pairs among the leading rows of two maps
/// sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellClasses {
    /// (first cell index, enh_pump, enh_probe) per distinct pair, in grid order.
    pub unique: Vec<(usize, f64, f64)>,
    /// Index into `unique` for every cell.
    pub slot: Vec<usize>,
}

pub fn classify_cells(pump: &FieldMap, probe: &FieldMap, rows: usize) -> Result<CellClasses> {
    if !pump.same_grid(probe) {
        return Err(Error::Format(format!(
            "pump ({}x{}, p = {:e}) and probe ({}x{}, p = {:e}) maps must share one grid",
            pump.nx(),
            pump.ny(),
            pump.period(),
            probe.nx(),
            probe.ny(),
            probe.period()
        )));
    }
    let n = rows.min(pump.ny()) * pump.nx();
    let mut index = HashMap::new();
    let mut unique: Vec<(usize, f64, f64)> = Vec::new();
    let slot = (0..n)
        .map(|cell| {
            let (a, b) = (pump.values()[cell], probe.values()[cell]);
            *index.entry((a.to_bits(), b.to_bits())).or_insert_with(|| {
                unique.push((cell, a, b));
                unique.len() - 1
            })
        })
        .collect();
    Ok(CellClasses { unique, slot })
}

/// Runs `f(enh_pump, enh_probe)` once per distinct pair on the current rayon
/// pool, returning results in `classes.unique` order.
///
/// Failures carry the index of the first cell with the offending pair.
pub fn map_unique<T, F>(classes: &CellClasses, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(f64, f64) -> Result<T> + Sync,
{
    classes
        .unique
        .par_iter()
        .map(|&(cell, a, b)| {
            f(a, b).map_err(|e| Error::Cell {
                cell,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Evaluates `f(enh_pump, enh_probe)` once per distinct enhancement pair in
/// the leading `rows` rows and scatters the results back onto the grid.
///
/// Output order follows the grid, so the result does not depend on the
/// number of workers.
pub fn solve_cells<T, F>(pump: &FieldMap, probe: &FieldMap, rows: usize, f: F) -> Result<Vec<T>>
where
    T: Clone + Send,
    F: Fn(f64, f64) -> Result<T> + Sync,
{
    let classes = classify_cells(pump, probe, rows)?;
    let solved = map_unique(&classes, f)?;
    Ok(classes.slot.iter().map(|&k| solved[k].clone()).collect())
}

/// Steady-state populations of every cell of the shared grid.
pub fn resolve_populations(
    pump: &FieldMap,
    probe: &FieldMap,
    params: &PhotophysicsParams,
    drive: &OpticalDrive,
) -> Result<PopulationGrid> {
    resolve_rows(pump, probe, params, drive, pump.ny())
}

/// Like [`resolve_populations`] but only for the rows an integral down to `d`
/// needs.
pub fn resolve_populations_to_depth(
    pump: &FieldMap,
    probe: &FieldMap,
    params: &PhotophysicsParams,
    drive: &OpticalDrive,
    d: f64,
) -> Result<PopulationGrid> {
    let rows = probe.rows_for_depth(d)?;
    resolve_rows(pump, probe, params, drive, rows)
}

fn resolve_rows(
    pump: &FieldMap,
    probe: &FieldMap,
    params: &PhotophysicsParams,
    drive: &OpticalDrive,
    rows: usize,
) -> Result<PopulationGrid> {
    let cells = solve_cells(pump, probe, rows, |a, b| cell_steady_state(params, drive, a, b))?;
    Ok(PopulationGrid {
        nx: pump.nx(),
        rows: rows.min(pump.ny()),
        cells,
    })
}

/// Unique steady state, or for unlit cells (where NV⁰ and the spin levels
/// decouple) the long-time limit starting from |1⟩.
pub(crate) fn cell_steady_state(
    params: &PhotophysicsParams,
    drive: &OpticalDrive,
    enh_pump: f64,
    enh_probe: f64,
) -> Result<LevelPopulations> {
    let gen = build_generator(params, drive, enh_pump, enh_probe)?;
    match steady_state(&gen, params.n_nv) {
        Err(Error::Degenerate { .. }) if drive.pump_intensity * enh_pump == 0.0 => {
            steady_state_from(&gen, &LevelPopulations::all_in(1, params.n_nv))
        }
        other => other,
    }
}
