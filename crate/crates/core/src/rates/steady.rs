use nalgebra::{DMatrix, DVector};

use super::{LevelPopulations, Matrix8, RateGenerator, Vector8, N_LEVELS};
use crate::error::{Error, Result};

/// Transitive closure of the `from → to` graph of positive rates.
fn reachability(g: &Matrix8) -> [[bool; N_LEVELS]; N_LEVELS] {
    let mut reach = [[false; N_LEVELS]; N_LEVELS];
    for (from, row) in reach.iter_mut().enumerate() {
        row[from] = true;
        for (to, cell) in row.iter_mut().enumerate() {
            if to != from && g[(to, from)] > 0.0 {
                *cell = true;
            }
        }
    }
    for k in 0..N_LEVELS {
        for i in 0..N_LEVELS {
            if reach[i][k] {
                for j in 0..N_LEVELS {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    reach
}

/// Closed communicating classes; each spans one stationary direction.
fn closed_classes(g: &Matrix8) -> Vec<Vec<usize>> {
    let reach = reachability(g);
    let mut seen = [false; N_LEVELS];
    let mut classes = Vec::new();
    for i in 0..N_LEVELS {
        if seen[i] {
            continue;
        }
        let class: Vec<usize> = (0..N_LEVELS).filter(|&j| reach[i][j] && reach[j][i]).collect();
        for &j in &class {
            seen[j] = true;
        }
        let closed = class
            .iter()
            .all(|&a| (0..N_LEVELS).all(|b| !reach[a][b] || class.contains(&b)));
        if closed {
            classes.push(class);
        }
    }
    classes
}

/// Dimension of the null space of the generator, i.e. the number of
/// independent stationary distributions.
pub fn null_space_dimension(gen: &RateGenerator) -> usize {
    closed_classes(gen.matrix()).len()
}

/// Solves G·x = 0, Σx = 1 on an irreducible generator block by replacing the
/// first balance row with the normalisation row, with one step of iterative
/// refinement.
fn normalized_null_vector(g: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = g.nrows();
    let mut a = g.clone();
    for j in 0..n {
        a[(0, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[0] = 1.0;
    let lu = a.clone().lu();
    let mut x = lu.solve(&b)?;
    let residual = &b - &a * &x;
    if let Some(dx) = lu.solve(&residual) {
        x += dx;
    }
    Some(x)
}

fn to_populations(x: &Vector8, n_nv: f64) -> LevelPopulations {
    let mut n = [0.0; N_LEVELS];
    for (i, v) in n.iter_mut().enumerate() {
        // round-off below the solver's resolution on empty levels
        *v = if x[i] < 0.0 && x[i] > -1e-12 { 0.0 } else { x[i] * n_nv };
    }
    LevelPopulations(n)
}

/// Unique stationary populations with Σn = `n_nv`.
///
/// Fails with [`Error::Degenerate`] when the generator has more than one
/// closed class (for example no light and no microwaves, where any split of
/// the ground spin levels is stationary).
pub fn steady_state(gen: &RateGenerator, n_nv: f64) -> Result<LevelPopulations> {
    let null_dim = null_space_dimension(gen);
    if null_dim != 1 {
        return Err(Error::Degenerate { null_dim });
    }
    let g = DMatrix::from_column_slice(N_LEVELS, N_LEVELS, gen.matrix().as_slice());
    let x = normalized_null_vector(&g).ok_or(Error::Degenerate { null_dim: 0 })?;
    Ok(to_populations(&Vector8::from_column_slice(x.as_slice()), n_nv))
}

/// Long-time limit of the dynamics started from `initial`.
///
/// Unlike [`steady_state`] this is defined for degenerate generators: mass in
/// transient levels is routed into the closed classes by absorption
/// probabilities, and each class relaxes to its own stationary distribution.
pub fn steady_state_from(gen: &RateGenerator, initial: &LevelPopulations) -> Result<LevelPopulations> {
    let g = gen.matrix();
    let classes = closed_classes(g);
    let in_closed: Vec<bool> = (0..N_LEVELS).map(|i| classes.iter().any(|c| c.contains(&i))).collect();
    let transient: Vec<usize> = (0..N_LEVELS).filter(|&i| !in_closed[i]).collect();

    // time-integrated occupation of transient levels: G_TT τ = −x_T(0)
    let tau = if transient.is_empty() {
        DVector::zeros(0)
    } else {
        let m = transient.len();
        let g_tt = DMatrix::from_fn(m, m, |i, j| g[(transient[i], transient[j])]);
        let rhs = DVector::from_fn(m, |i, _| -initial.0[transient[i]]);
        g_tt.lu().solve(&rhs).ok_or(Error::Degenerate { null_dim: classes.len() })?
    };

    let mut out = Vector8::zeros();
    for class in &classes {
        let mut mass: f64 = class.iter().map(|&j| initial.0[j]).sum();
        for &j in class {
            for (ti, &i) in transient.iter().enumerate() {
                mass += g[(j, i)] * tau[ti];
            }
        }
        let pi = if class.len() == 1 {
            DVector::from_element(1, 1.0)
        } else {
            let sub = DMatrix::from_fn(class.len(), class.len(), |a, b| g[(class[a], class[b])]);
            normalized_null_vector(&sub).ok_or(Error::Degenerate { null_dim: classes.len() })?
        };
        for (a, &j) in class.iter().enumerate() {
            out[j] = mass * pi[a];
        }
    }
    let mut n = [0.0; N_LEVELS];
    for (i, v) in n.iter_mut().enumerate() {
        *v = out[i].max(0.0);
    }
    Ok(LevelPopulations(n))
}
