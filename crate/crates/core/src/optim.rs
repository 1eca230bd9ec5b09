//! Small deterministic 1-D/2-D maximizers shared by the detection and
//! sensitivity optimizers.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section maximization of a unimodal `f` on [a, b].
///
/// Stops when the bracket is narrower than `tol`; returns (x, f(x)).
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Index of the largest finite value; ties resolve to the first index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        match best {
            Some(j) if values[j] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// `count` points from `min` to `max` inclusive, linear or geometric.
pub fn spaced(min: f64, max: f64, count: usize, log: bool) -> Vec<f64> {
    if count == 1 {
        return vec![min];
    }
    (0..count)
        .map(|i| {
            let s = i as f64 / (count - 1) as f64;
            if i == 0 {
                min
            } else if i == count - 1 {
                max
            } else if log {
                (min.ln() + s * (max.ln() - min.ln())).exp()
            } else {
                min + s * (max - min)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 0.3).powi(2) + 2.0, -1.0, 4.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-15);
    }

    #[test]
    fn golden_handles_edge_maximum() {
        let (x, _) = golden_section_max(|x| x, 0.0, 1.0, 1e-9);
        assert!(x > 1.0 - 1e-8);
    }

    #[test]
    fn argmax_skips_nan() {
        assert_eq!(argmax(&[1.0, f64::NAN, 3.0, 3.0]), Some(2));
        assert_eq!(argmax(&[f64::NAN]), None);
    }

    #[test]
    fn spacing_hits_endpoints() {
        let v = spaced(1e-3, 10.0, 5, true);
        assert_eq!(v[0], 1e-3);
        assert_eq!(v[4], 10.0);
        assert!((v[1] / v[0] - 10.0).abs() < 1e-12);
        assert_eq!(spaced(0.0, 1.0, 3, false), vec![0.0, 0.5, 1.0]);
    }
}
