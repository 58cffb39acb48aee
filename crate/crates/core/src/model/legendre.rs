//! Numeric Legendre transform for models without a closed-form Lagrangian.

use crate::error::{Error, Result};
use crate::torus::{Vector, MAX_DIM};

const COARSE_SAMPLES: usize = 64;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Maximizes `⟨p, v⟩ − H(p)` over `|p_a| ≤ radius` with a coarse grid of 64
/// samples per axis followed by one golden-section refinement pass per axis.
///
/// Returns the value and the maximizing momentum. Fails when the maximizer
/// sits on the search boundary, which means the radius underestimates the
/// model's gradient range.
pub fn legendre_transform(
    hamiltonian: &dyn Fn(Vector) -> f64,
    v: Vector,
    dim: usize,
    radius: f64,
) -> Result<(f64, Vector)> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Legendre search radius must be positive, got {radius}"
        )));
    }
    let objective = |p: Vector| -> f64 {
        let mut s = 0.0;
        for a in 0..dim {
            s += p[a] * v[a];
        }
        s - hamiltonian(p)
    };
    let step = 2.0 * radius / (COARSE_SAMPLES - 1) as f64;
    let coord = |j: usize| -radius + j as f64 * step;

    // Coarse pass.
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = [0usize; MAX_DIM];
    let axis_len = |a: usize| if a < dim { COARSE_SAMPLES } else { 1 };
    for j0 in 0..axis_len(0) {
        for j1 in 0..axis_len(1) {
            let mut p = [0.0; MAX_DIM];
            p[0] = coord(j0);
            if dim > 1 {
                p[1] = coord(j1);
            }
            let val = objective(p);
            if val > best {
                best = val;
                best_idx = [j0, j1];
            }
        }
    }
    for a in 0..dim {
        if best_idx[a] == 0 || best_idx[a] == COARSE_SAMPLES - 1 {
            return Err(Error::GradientRadiusExceeded { radius });
        }
    }

    // One golden-section pass per axis on the bracketing interval.
    let mut p_star = [0.0; MAX_DIM];
    for a in 0..dim {
        p_star[a] = coord(best_idx[a]);
    }
    for a in 0..dim {
        let mut lo = p_star[a] - step;
        let mut hi = p_star[a] + step;
        let eval = |t: f64, p_star: &Vector| {
            let mut p = *p_star;
            p[a] = t;
            objective(p)
        };
        let mut m1 = hi - GOLDEN * (hi - lo);
        let mut m2 = lo + GOLDEN * (hi - lo);
        let mut f1 = eval(m1, &p_star);
        let mut f2 = eval(m2, &p_star);
        for _ in 0..48 {
            if f1 < f2 {
                lo = m1;
                m1 = m2;
                f1 = f2;
                m2 = lo + GOLDEN * (hi - lo);
                f2 = eval(m2, &p_star);
            } else {
                hi = m2;
                m2 = m1;
                f2 = f1;
                m1 = hi - GOLDEN * (hi - lo);
                f1 = eval(m1, &p_star);
            }
        }
        p_star[a] = 0.5 * (lo + hi);
    }
    Ok((objective(p_star), p_star))
}
