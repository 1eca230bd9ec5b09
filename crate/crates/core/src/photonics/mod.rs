//! Grating design equations, field-enhancement maps, golden-rule absorption
//! and the wire-array microwave field.

mod absorption;
mod dispersion;
mod drude;
mod fieldmap;
mod wires;

pub use absorption::{
    calibrate_linewidth, calibrate_linewidth_with, golden_rule_absorption, orientation_mean_cos2,
    plane_wave_field_sq, ORIENTATION_MEAN_COS2,
};
pub use dispersion::{rwa_incidence_angle, rwa_period, spp_bw_mismatch, DispersionQuery};
pub use drude::{DrudeLorentz, LorentzTerm};
pub use fieldmap::{
    average_enhancement, figure_of_merit, load_field_map, sidecar_path, synthetic_field_map, FieldMap, MapMetadata,
    SyntheticMapSpec,
};
pub use wires::wire_array_bfield;
