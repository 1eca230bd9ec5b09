//! DC (CW-ODMR), AC (Hahn-echo) and spin-projection sensitivities, readout
//! fidelity and the optimal pulsed readout window.

mod formulas;
mod pipeline;
mod readout;

pub use formulas::{
    eta_ac, eta_cw, eta_spin_projection, integrate_window, optimal_tau, photons_per_spin, photons_per_spin_static,
    readout_fidelity, Estimate,
};
pub use pipeline::{
    cw_pipeline, evaluate_sensitivity, pulsed_pipeline, CwResult, PipelineInputs, Protocol, PulsedResult,
    SensitivityReport, SensitivitySettings, REPORT_CSV_HEADER, REPORT_CSV_UNITS,
};
pub use readout::{
    optimize_readout_time, readout_transients, window_average_optimum, PixelTransient, ReadoutOptimum,
    WindowOptimum,
};
