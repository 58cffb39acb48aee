//! Empirical validation of the Tonelli structure assumptions.

use super::{estimate_constants, Hamiltonian, ModelConstants};
use crate::error::Result;
use crate::torus::{self, GridMeasure, TorusGrid, MAX_DIM};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub statistic: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TonelliReport {
    pub checks: Vec<CheckResult>,
    pub constants: ModelConstants,
}

impl TonelliReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

/// Runs sampled checks of strict momentum convexity, superlinear growth,
/// gradient growth and continuity in the measure. Report-only: callers decide
/// what a failure means.
pub fn validate_tonelli(
    model: &dyn Hamiltonian,
    grid: TorusGrid,
    n_samples: usize,
    seed: u64,
) -> Result<TonelliReport> {
    let dim = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let measures = super::default_measure_samples(grid, seed);
    let constants = estimate_constants(model, grid, &measures)?;
    let r_ref = constants.gradient_radius.max(1.0);
    let n_samples = n_samples.max(16);

    let mut checks = Vec::new();
    let random_point = |rng: &mut ChaCha8Rng| {
        let mut x = [0.0; MAX_DIM];
        for a in 0..dim {
            x[a] = rng.random::<f64>();
        }
        x
    };
    let random_momentum = |rng: &mut ChaCha8Rng, radius: f64| {
        let mut p = [0.0; MAX_DIM];
        for a in 0..dim {
            p[a] = rng.random_range(-radius..radius);
        }
        p
    };

    // Strict midpoint convexity in p. Pairs are kept well separated so that
    // piecewise-linear interpolants of genuinely convex data still show their
    // curvature across cells.
    {
        let min_gap = (r_ref / 8.0).max(0.25);
        let mut min_curvature = f64::INFINITY;
        let mut tested = 0;
        while tested < n_samples {
            let x = random_point(&mut rng);
            let m = &measures[tested % measures.len()];
            let p1 = random_momentum(&mut rng, r_ref);
            let p2 = random_momentum(&mut rng, r_ref);
            let mut sep = 0.0;
            for a in 0..dim {
                sep += (p1[a] - p2[a]) * (p1[a] - p2[a]);
            }
            if sep.sqrt() < min_gap {
                continue;
            }
            tested += 1;
            let mut mid = [0.0; MAX_DIM];
            for a in 0..dim {
                mid[a] = 0.5 * (p1[a] + p2[a]);
            }
            let defect = 0.5 * (model.hamiltonian(x, p1, m) + model.hamiltonian(x, p2, m))
                - model.hamiltonian(x, mid, m);
            min_curvature = min_curvature.min(defect / sep);
        }
        checks.push(CheckResult {
            name: "p-convexity".into(),
            passed: min_curvature > 1e-6,
            statistic: min_curvature,
            detail: format!(
                "min midpoint defect / |p1-p2|^2 over {n_samples} sampled pairs (strictly positive for uniformly convex momenta)"
            ),
        });
    }

    // Superlinear growth: ray slopes must keep increasing.
    {
        let dirs = if dim == 1 {
            vec![[1.0, 0.0], [-1.0, 0.0]]
        } else {
            vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]
        };
        let mut min_gain = f64::INFINITY;
        for k in 0..n_samples {
            let x = random_point(&mut rng);
            let m = &measures[k % measures.len()];
            for d in &dirs {
                let at = |r: f64| {
                    let mut p = [0.0; MAX_DIM];
                    for a in 0..dim {
                        p[a] = r * d[a];
                    }
                    model.hamiltonian(x, p, m)
                };
                let inner = (at(r_ref) - at(0.0)) / r_ref;
                let outer = (at(2.0 * r_ref) - at(r_ref)) / r_ref;
                min_gain = min_gain.min(outer - 1.05 * inner.max(0.0));
            }
        }
        checks.push(CheckResult {
            name: "superlinear-growth".into(),
            passed: min_gain > 0.0,
            statistic: min_gain,
            detail:
                "outer ray slope minus 1.05x the inner slope; positive when growth outruns linear"
                    .into(),
        });
    }

    // Gradient growth |D_p H| <= c (1 + |p|) re-checked on fresh samples with
    // a 5% estimation margin.
    {
        let mut worst = 0.0f64;
        for k in 0..n_samples {
            let x = random_point(&mut rng);
            let m = &measures[k % measures.len()];
            let p = random_momentum(&mut rng, 2.0 * r_ref);
            let g = torus::norm(model.grad_p(x, p, m), dim);
            worst = worst.max(g / (1.0 + torus::norm(p, dim)));
        }
        checks.push(CheckResult {
            name: "gradient-growth".into(),
            passed: worst <= 1.05 * constants.gradient_growth + 1e-12,
            statistic: worst,
            detail: format!(
                "max |D_p H| / (1 + |p|) on fresh samples vs estimated rate {:.6}",
                constants.gradient_growth
            ),
        });
    }

    // Continuity in the measure: |H(x, p, m1) − H(x, p, m2)| against
    // W1(m1, m2). Exact transport distances exist on 1d grids only.
    if dim == 1 {
        let mut max_ratio = 0.0f64;
        let nodes = grid.num_nodes();
        for _ in 0..n_samples {
            let w1v: Vec<f64> = (0..nodes).map(|_| rng.random::<f64>() + 0.02).collect();
            let w2v: Vec<f64> = (0..nodes).map(|_| rng.random::<f64>() + 0.02).collect();
            let m1 = GridMeasure::normalized(grid, w1v)?;
            let m2 = GridMeasure::normalized(grid, w2v)?;
            let dist = torus::w1(&m1, &m2)?;
            if dist < 1e-9 {
                continue;
            }
            let x = random_point(&mut rng);
            let p = random_momentum(&mut rng, r_ref);
            let dh = (model.hamiltonian(x, p, &m1) - model.hamiltonian(x, p, &m2)).abs();
            max_ratio = max_ratio.max(dh / dist);
        }
        checks.push(CheckResult {
            name: "measure-continuity".into(),
            passed: max_ratio.is_finite() && max_ratio < 1e9,
            statistic: max_ratio,
            detail: "max |H(m1) - H(m2)| / W1(m1, m2): empirical modulus slope".into(),
        });
    } else {
        checks.push(CheckResult {
            name: "measure-continuity".into(),
            passed: true,
            statistic: f64::NAN,
            detail: "skipped: exact W1 is unavailable on 2d grids".into(),
        });
    }

    // Rest-point structure of mechanical couplings.
    if let Some(mech) = model.as_mechanical() {
        let violations = mech.kernel().mechanical_role_violations(grid);
        checks.push(CheckResult {
            name: "coupling-kernel-role".into(),
            passed: violations.is_empty(),
            statistic: violations.len() as f64,
            detail: if violations.is_empty() {
                "k(0, y) = 0 and k(x, y) > 0 for x != 0 on all nodes".into()
            } else {
                violations.join("; ")
            },
        });
    }

    Ok(TonelliReport { checks, constants })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CustomHamiltonian, Mechanical, ScaledSeparable, Tabulated};

    fn grid() -> TorusGrid {
        TorusGrid::new(1, 64).unwrap()
    }

    #[test]
    fn mechanical_builtin_passes_all_checks() {
        let model = Mechanical::builtin(1.0).unwrap();
        let report = validate_tonelli(&model, grid(), 64, 3).unwrap();
        assert!(report.all_passed(), "failures: {:?}", report.failures());
    }

    #[test]
    fn scaled_separable_passes_all_checks() {
        let model = ScaledSeparable::builtin();
        let report = validate_tonelli(&model, grid(), 64, 3).unwrap();
        assert!(report.all_passed(), "failures: {:?}", report.failures());
    }

    #[test]
    fn linear_momentum_growth_fails_convexity() {
        // H = |p| - F tabulated: convex but not strictly, and sublinear.
        let model = Tabulated::from_fn(32, 65, 6.0, |x, p| {
            p.abs() - (1.0 - (std::f64::consts::TAU * x).cos())
        })
        .unwrap();
        let report = validate_tonelli(&model, grid(), 64, 3).unwrap();
        let convexity = report
            .checks
            .iter()
            .find(|c| c.name == "p-convexity")
            .unwrap();
        assert!(
            !convexity.passed,
            "linear growth must fail strict convexity"
        );
        let growth = report
            .checks
            .iter()
            .find(|c| c.name == "superlinear-growth")
            .unwrap();
        assert!(!growth.passed, "linear growth is not superlinear");
    }

    #[test]
    fn custom_quadratic_passes_convexity() {
        let model = CustomHamiltonian::new(1, "quad", |_x, p, _m| 0.5 * p[0] * p[0] + 1.0).unwrap();
        let report = validate_tonelli(&model, grid(), 32, 5).unwrap();
        let convexity = report
            .checks
            .iter()
            .find(|c| c.name == "p-convexity")
            .unwrap();
        assert!(convexity.passed);
    }
}
