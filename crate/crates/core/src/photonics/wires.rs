use crate::error::{Error, Result};
use crate::units::MU_0;

/// Transverse field (B_x, B_y) in tesla of `n_wires` infinite parallel wires
/// along z, each carrying `current` in +z, centred on x = 0 with spacing `p`
/// at y = 0.
///
/// For odd `n_wires` the wires sit at x = k·p, k ∈ [−n/2, n/2].
pub fn wire_array_bfield(current: f64, p: f64, n_wires: usize, points: &[(f64, f64)]) -> Result<Vec<[f64; 2]>> {
    let centre = (n_wires as f64 - 1.0) / 2.0;
    let scale = MU_0 * current / (2.0 * std::f64::consts::PI);
    points
        .iter()
        .map(|&(x, y)| {
            let mut b = [0.0; 2];
            for k in 0..n_wires {
                let dx = x - (k as f64 - centre) * p;
                let r2 = dx * dx + y * y;
                if r2 <= (1e-12 * p.max(1e-9)).powi(2) {
                    return Err(Error::Singularity { x, y, wire: k });
                }
                b[0] -= scale * y / r2;
                b[1] += scale * dx / r2;
            }
            Ok(b)
        })
        .collect()
}
