//! From per-cell populations to the pixel absorption signal, homodyne and
//! direct detection, shot-noise SNR and the homodyne operating point.

mod homodyne;
mod populations;
mod signal;

pub use homodyne::{
    detected_intensities, homodyne_output, optimize_homodyne, optimize_homodyne_with, snr_low_contrast,
    snr_shot_limited, DetectionMode, HomodyneGrid, HomodyneOptimum,
};
pub use populations::{
    classify_cells, map_unique, resolve_populations, resolve_populations_to_depth, solve_cells, CellClasses,
    PopulationGrid,
};
pub use signal::{
    load_phase_table, nv_phase, pixel_absorption, reflection_magnitude, AbsorptionSignal, DetectionConfig,
    PhaseModel, CALIBRATED_R0, DEFAULT_KAPPA,
};
