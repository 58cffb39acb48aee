//! Structural-constant estimation.
//!
//! The growth/coercivity assumptions behind the solver use a handful of
//! constants. One constant cannot play every role at once for legitimate
//! models (the quadratic rate wants a small value, the zero-momentum bound a
//! large one), so the estimator keeps them separate:
//!
//! * `coercivity`: largest `c` with `H(x, p, m) ≥ c |p|² − alpha_bound` on
//!   the sampled range;
//! * `gradient_growth`: smallest `c` with `|D_p H| ≤ c (1 + |p|)` observed;
//! * `alpha_bound`: `sup |H(y, 0, m)|`, which dominates the critical value;
//! * `gradient_radius`: momenta outside this radius exceed the sublevel
//!   `{H ≤ alpha_bound}`;
//! * `velocity_bound`: speed cap for calibrated curves,
//!   `gradient_growth · (1 + gradient_radius)`;
//! * `path_lipschitz`: W1-Lipschitz constant of transported measure paths,
//!   `g^{1/2} (g^{1/2} + (alpha_bound + g)^{1/2})` with `g` the growth rate.

use super::Hamiltonian;
use crate::error::{Error, Result};
use crate::torus::{GridMeasure, ParticleEnsemble, TorusGrid, Vector, MAX_DIM};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct ModelConstants {
    pub coercivity: f64,
    pub gradient_growth: f64,
    pub alpha_bound: f64,
    pub gradient_radius: f64,
    pub velocity_bound: f64,
    pub path_lipschitz: f64,
    pub notes: Vec<String>,
}

impl ModelConstants {
    /// Momentum bound for a critical solution at level `alpha`: combining
    /// `H(y, Du) = −alpha` with `H ≥ coercivity·|p|² − alpha_bound` gives
    /// `|Du| ≤ sqrt((alpha_bound − alpha) / coercivity)`.
    pub fn costate_bound(&self, alpha: f64) -> f64 {
        ((self.alpha_bound - alpha).max(0.0) / self.coercivity).sqrt()
    }
}

const RADIUS_LIMIT: f64 = 1e3;

/// Default measure samples: uniform, one seeded random, one near-Dirac bump
/// at the origin.
pub fn default_measure_samples(grid: TorusGrid, seed: u64) -> Vec<GridMeasure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = grid.num_nodes();
    let random = GridMeasure::normalized(
        grid,
        (0..nodes).map(|_| rng.random::<f64>() + 0.05).collect(),
    )
    .expect("positive weights");
    let bump_particles = (0..128.max(ParticleEnsembleMin::MIN))
        .map(|_| [0.0, 0.0])
        .collect();
    let near_dirac = crate::torus::kernel_density(
        &ParticleEnsemble::new(grid.dim(), bump_particles).expect("bump ensemble"),
        grid,
    )
    .expect("bump measure");
    vec![GridMeasure::uniform(grid), random, near_dirac]
}

struct ParticleEnsembleMin;
impl ParticleEnsembleMin {
    const MIN: usize = crate::torus::MIN_PARTICLES;
}

fn directions(dim: usize) -> Vec<Vector> {
    if dim == 1 {
        vec![[1.0, 0.0], [-1.0, 0.0]]
    } else {
        (0..8)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 8.0;
                [a.cos(), a.sin()]
            })
            .collect()
    }
}

/// Estimates the structural constants by sampling the model over the given
/// measures. Deterministic for a fixed grid and sample list.
pub fn estimate_constants(
    model: &dyn Hamiltonian,
    grid: TorusGrid,
    samples: &[GridMeasure],
) -> Result<ModelConstants> {
    if samples.is_empty() {
        return Err(Error::InvalidInput(
            "constant estimation needs at least one measure sample".into(),
        ));
    }
    let dim = model.dim();
    if grid.dim() != dim {
        return Err(Error::InvalidInput(format!(
            "grid dimension {} does not match model dimension {dim}",
            grid.dim()
        )));
    }
    let dirs = directions(dim);
    // Subsample nodes to keep the scan linear on big grids.
    let stride = (grid.num_nodes() / 512).max(1);
    let nodes: Vec<usize> = (0..grid.num_nodes()).step_by(stride).collect();

    let mut alpha_bound = 0.0f64;
    for m in samples {
        for &i in &nodes {
            alpha_bound = alpha_bound.max(model.hamiltonian(grid.node(i), [0.0, 0.0], m).abs());
        }
    }

    // Smallest radius whose momentum sphere clears the sublevel {H <= alpha_bound}.
    let clears = |r: f64| -> bool {
        for m in samples {
            for &i in &nodes {
                let x = grid.node(i);
                for d in &dirs {
                    let mut p = [0.0; MAX_DIM];
                    for a in 0..dim {
                        p[a] = r * d[a];
                    }
                    if model.hamiltonian(x, p, m) <= alpha_bound {
                        return false;
                    }
                }
            }
        }
        true
    };
    let mut hi = 1.0;
    while !clears(hi) {
        hi *= 2.0;
        if hi > RADIUS_LIMIT {
            return Err(Error::CoercivityFailure {
                limit: RADIUS_LIMIT,
            });
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if clears(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let gradient_radius = hi;

    // Growth and coercivity rates sampled on |p| <= 2 max(R_p, 1).
    let r_ref = gradient_radius.max(1.0);
    let r_max = 2.0 * r_ref;
    let radii: Vec<f64> = (1..=32).map(|k| r_max * k as f64 / 32.0).collect();
    let mut gradient_growth = 0.0f64;
    let mut coercivity = f64::INFINITY;
    for m in samples {
        for &i in &nodes {
            let x = grid.node(i);
            let g0 = crate::torus::norm(model.grad_p(x, [0.0, 0.0], m), dim);
            gradient_growth = gradient_growth.max(g0);
            for d in &dirs {
                for &r in &radii {
                    let mut p = [0.0; MAX_DIM];
                    for a in 0..dim {
                        p[a] = r * d[a];
                    }
                    let g = crate::torus::norm(model.grad_p(x, p, m), dim);
                    gradient_growth = gradient_growth.max(g / (1.0 + r));
                    if r >= r_ref * 0.999 {
                        let h = model.hamiltonian(x, p, m);
                        coercivity = coercivity.min((h + alpha_bound) / (r * r));
                    }
                }
            }
        }
    }

    let mut notes = Vec::new();
    if gradient_radius < 1e-3 {
        notes.push(
            "near-zero gradient radius: coupling-free regime, the Aubry set may fill the torus"
                .to_string(),
        );
    }
    if !(coercivity.is_finite() && coercivity > 0.0) {
        return Err(Error::CoercivityFailure {
            limit: RADIUS_LIMIT,
        });
    }

    let velocity_bound = gradient_growth * (1.0 + gradient_radius);
    let g = gradient_growth;
    let path_lipschitz = g.sqrt() * (g.sqrt() + (alpha_bound + g).sqrt());

    Ok(ModelConstants {
        coercivity,
        gradient_growth,
        alpha_bound,
        gradient_radius,
        velocity_bound,
        path_lipschitz,
        notes,
    })
}
