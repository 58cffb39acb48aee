//! Certificate checks built on barrier fields: calibrated curves, the
//! domination inequality, and semiconcavity of grid fields.

use super::{BarrierField, LaxOleinikParams, StepKernel, WeakKamEngine};
use crate::error::{Error, Result};
use crate::torus::{GridField, Vector, MAX_DIM};
use serde::Serialize;

/// Discrete curve extracted by backtracking dynamic-programming minimizers.
#[derive(Debug, Clone, Serialize)]
pub struct CalibratedCurve {
    /// Nodes `γ_0 … γ_K` with `γ_K` the requested endpoint.
    pub nodes: Vec<usize>,
    /// Per-step velocities `(γ_{k+1} ⊖ γ_k) / dtau`.
    pub velocities: Vec<Vector>,
    /// Per-step calibration defects
    /// `[h(γ_{k+1}) − h(γ_k)] − [step cost + (−alpha)·dtau]`.
    pub defects: Vec<f64>,
    pub max_defect: f64,
    pub max_speed: f64,
}

pub(super) fn calibrated_curve(
    engine: &WeakKamEngine,
    kernel: &StepKernel,
    barrier: &BarrierField,
    end: usize,
    steps: usize,
) -> Result<CalibratedCurve> {
    let grid = engine.grid();
    let nodes_total = grid.num_nodes();
    if end >= nodes_total {
        return Err(Error::InvalidInput(format!(
            "endpoint {end} out of range ({nodes_total} nodes)"
        )));
    }
    if barrier.backlink.len() != nodes_total {
        return Err(Error::InvalidInput(
            "barrier is missing its backtracking links".into(),
        ));
    }
    let critical_level = -barrier.alpha;
    let dtau = kernel.dtau();
    // The certificate policy is stationary, so one backlink table drives
    // every step of the backtracking.
    let mut reversed = vec![end];
    let mut current = end;
    for _ in 0..steps {
        current = barrier.backlink[current] as usize;
        reversed.push(current);
    }
    reversed.reverse();
    let nodes = reversed;

    let mut velocities = Vec::with_capacity(steps);
    let mut defects = Vec::with_capacity(steps);
    let mut max_defect = 0.0f64;
    let mut max_speed = 0.0f64;
    for k in 0..steps {
        let src = nodes[k];
        let dst = nodes[k + 1];
        let v = kernel
            .transition_velocity(src, dst)
            .expect("backlinked step stays within the search radius");
        let cost = kernel
            .transition_cost(src, dst)
            .expect("backlinked step stays within the search radius");
        let defect = (barrier.values.value(dst) - barrier.values.value(src))
            - (cost + critical_level * dtau);
        max_defect = max_defect.max(defect.abs());
        max_speed = max_speed.max(crate::torus::norm(v, grid.dim()));
        velocities.push(v);
        defects.push(defect);
    }
    Ok(CalibratedCurve {
        nodes,
        velocities,
        defects,
        max_defect,
        max_speed,
    })
}

/// Outcome of the domination inequality over every sub-interval of a curve.
#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    /// Worst value of `Δh − (cost + (−alpha)·Δt)` over sub-intervals; at most
    /// `steps · tol_fp` for dominated curves, near zero along calibrated ones.
    pub max_margin: f64,
    /// Smallest margin (most slack); near zero means calibration somewhere.
    pub min_margin: f64,
    pub intervals_checked: usize,
}

/// Asserts `h(γ_b) − h(γ_a) ≤ Σ cost + (−alpha)(b−a)·dtau + (b−a)·tol_fp`
/// over every sub-interval of a node curve stepping within the search radius.
pub(super) fn check_dominated(
    params: &LaxOleinikParams,
    kernel: &StepKernel,
    barrier: &BarrierField,
    curve: &[usize],
) -> Result<DominationReport> {
    if curve.len() < 2 {
        return Err(Error::InvalidInput(
            "domination check needs at least two curve nodes".into(),
        ));
    }
    let critical_level = -barrier.alpha;
    let dtau = kernel.dtau();
    // Prefix sums of the per-step right-hand side.
    let mut prefix = Vec::with_capacity(curve.len());
    prefix.push(0.0f64);
    for k in 0..curve.len() - 1 {
        let cost = kernel
            .transition_cost(curve[k], curve[k + 1])
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "curve step {} -> {} exceeds the search radius",
                    curve[k],
                    curve[k + 1]
                ))
            })?;
        prefix.push(prefix[k] + cost + critical_level * dtau);
    }
    let mut max_margin = f64::NEG_INFINITY;
    let mut min_margin = f64::INFINITY;
    let mut worst = (0usize, 0usize);
    let mut intervals = 0usize;
    for a in 0..curve.len() {
        for b in a + 1..curve.len() {
            let lhs = barrier.values.value(curve[b]) - barrier.values.value(curve[a]);
            let rhs = prefix[b] - prefix[a];
            let margin = lhs - rhs;
            if margin > max_margin {
                max_margin = margin;
                worst = (a, b);
            }
            min_margin = min_margin.min(margin);
            intervals += 1;
        }
    }
    let slack = (curve.len() - 1) as f64 * params.tol_fp;
    if max_margin > slack {
        return Err(Error::DominationFailure {
            violation: max_margin - slack,
            a: worst.0,
            b: worst.1,
        });
    }
    Ok(DominationReport {
        max_margin,
        min_margin,
        intervals_checked: intervals,
    })
}

/// Per-axis maxima of centered second differences `(f_{i+1} + f_{i-1} - 2 f_i)/h²`.
///
/// Semiconcave fields keep this bounded above as the grid refines; convex
/// kinks blow up like `1/h` and get flagged by refinement studies.
#[derive(Debug, Clone, Serialize)]
pub struct SemiconcavityReport {
    pub per_axis: Vec<f64>,
    /// Largest upper second difference across axes.
    pub constant: f64,
}

pub fn check_semiconcavity(f: &GridField) -> SemiconcavityReport {
    let grid = f.grid();
    let h2 = grid.spacing() * grid.spacing();
    let mut per_axis = Vec::with_capacity(grid.dim());
    for axis in 0..grid.dim() {
        let mut offset = [0i64; MAX_DIM];
        let mut worst = f64::NEG_INFINITY;
        for i in 0..grid.num_nodes() {
            offset[axis] = 1;
            let up = f.value(grid.shifted_index(i, offset));
            offset[axis] = -1;
            let down = f.value(grid.shifted_index(i, offset));
            offset[axis] = 0;
            worst = worst.max((up + down - 2.0 * f.value(i)) / h2);
        }
        per_axis.push(worst);
    }
    let constant = per_axis.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    SemiconcavityReport { per_axis, constant }
}
