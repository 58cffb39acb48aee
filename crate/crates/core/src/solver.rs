//! Damped fixed-point solver for the quasi-stationary mean field game
//! system, and the solution verifier.
//!
//! One application of the fixed-point map takes a candidate measure path
//! `m(t_0..t_J)` to the path transported by the drift of the barriers
//! `u_j = h^{m(t_j)}(x_m, ·)`, where `x_m` is the common Aubry point of the
//! input path. Existence of a fixed point follows from compactness; nothing
//! guarantees the iteration converges, so the solver damps updates, tracks
//! the best iterate, and reports the residual history instead of assuming
//! success.

use crate::error::{Error, Result};
use crate::model::{Hamiltonian, ModelConstants};
use crate::torus::{self, GridMeasure, TorusGrid};
use crate::transport::{self, DriftFrame, MeasurePath};
use crate::weakkam::{
    check_semiconcavity, BarrierField, CommonAubryPoint, LaxOleinikParams, WeakKamEngine,
};
use rayon::prelude::*;
use serde::Serialize;

/// Full problem data for one solve.
pub struct Problem<'a> {
    pub model: &'a dyn Hamiltonian,
    pub grid: TorusGrid,
    pub m0: GridMeasure,
    pub horizon: f64,
    /// Number of time slabs J; the path carries J+1 nodes.
    pub time_steps: usize,
    pub lo_params: LaxOleinikParams,
    pub particles: usize,
    pub constants: ModelConstants,
}

impl Problem<'_> {
    pub fn dt(&self) -> f64 {
        self.horizon / self.time_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        self.lo_params.validate(self.grid)?;
        if self.m0.grid() != self.grid {
            return Err(Error::InvalidInput("initial measure grid mismatch".into()));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) || self.time_steps == 0 {
            return Err(Error::InvalidConfig(
                "horizon and time step count must be positive".into(),
            ));
        }
        if self.particles < crate::torus::MIN_PARTICLES {
            return Err(Error::InvalidConfig(format!(
                "particle count {} below the minimum {}",
                self.particles,
                crate::torus::MIN_PARTICLES
            )));
        }
        Ok(())
    }

    fn speed_limit(&self) -> f64 {
        10.0 * self
            .constants
            .velocity_bound
            .max(self.lo_params.speed_cap())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolveParams {
    /// Damping of the Picard update, in (0, 1].
    pub damping: f64,
    pub max_iter: usize,
    /// Fixed-point target: sup over time nodes of the W1 residual.
    pub tol: f64,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            damping: 0.5,
            max_iter: 50,
            tol: 1e-2,
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if self.max_iter == 0 || self.tol <= 0.0 || self.tol.is_nan() {
            return Err(Error::InvalidConfig(
                "max_iter and tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One application of the fixed-point map.
pub struct PicardOutput {
    pub path: MeasurePath,
    pub alphas: Vec<f64>,
    pub barriers: Vec<BarrierField>,
    pub aubry: CommonAubryPoint,
}

/// Applies the fixed-point map to an input measure path of J+1 nodes:
/// common Aubry point, per-time critical values and barriers, then particle
/// transport of `m0` under the resulting drift.
pub fn picard_map(problem: &Problem, input: &[GridMeasure]) -> Result<PicardOutput> {
    let nodes = problem.time_steps + 1;
    if input.len() != nodes {
        return Err(Error::InvalidInput(format!(
            "expected {nodes} path nodes, got {}",
            input.len()
        )));
    }
    check_admissible(problem, input)?;
    let engine = WeakKamEngine::new(problem.model, problem.grid, problem.lo_params)?;

    // Per-time kernels and critical values (independent, run concurrently).
    let kernels = input
        .par_iter()
        .map(|m| engine.step_kernel(m))
        .collect::<Result<Vec<_>>>()?;
    let alphas = kernels
        .par_iter()
        .map(|k| Ok(engine.critical_value(k)?.alpha))
        .collect::<Result<Vec<f64>>>()?;

    let aubry = engine.common_aubry_point(input, &alphas)?;

    let barriers = kernels
        .par_iter()
        .zip(&alphas)
        .map(|(k, &alpha)| engine.peierls_barrier(k, aubry.node, alpha))
        .collect::<Result<Vec<_>>>()?;

    let frames: Vec<DriftFrame> = barriers
        .iter()
        .zip(input)
        .map(|(barrier, measure)| DriftFrame { barrier, measure })
        .collect();
    let path = transport::simulate(
        problem.model,
        problem.grid,
        &problem.m0,
        &frames,
        problem.dt(),
        problem.time_steps,
        problem.particles,
        problem.speed_limit(),
    )?;
    Ok(PicardOutput {
        path,
        alphas,
        barriers,
        aubry,
    })
}

/// Admissibility of a candidate path: W1-Lipschitz in time within the
/// structural constant (10% slack plus the binning smear).
fn check_admissible(problem: &Problem, path: &[GridMeasure]) -> Result<()> {
    let dt = problem.dt();
    let smear = 2.0 * torus::DENSITY_BANDWIDTH_CELLS * problem.grid.spacing();
    let limit = problem
        .constants
        .path_lipschitz
        .max(problem.constants.velocity_bound)
        * 1.1;
    for i in 0..path.len() {
        for j in i + 1..path.len() {
            let dist = torus::w1(&path[i], &path[j])?;
            let gap = (j - i) as f64 * dt;
            let ratio = ((dist - smear).max(0.0)) / gap;
            if ratio > limit {
                return Err(Error::PathNotAdmissible { ratio, limit, i, j });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual: f64,
}

/// Output bundle: the measure path, per-time critical values and barriers,
/// the common Aubry point, and the iteration history. Produced even when the
/// iteration hits `max_iter` without reaching the tolerance (with
/// `converged = false`).
pub struct SolutionBundle {
    pub path: MeasurePath,
    pub alphas: Vec<f64>,
    pub barriers: Vec<BarrierField>,
    pub aubry: CommonAubryPoint,
    pub residual_history: Vec<f64>,
    pub best_residual: f64,
    pub best_iteration: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl SolutionBundle {
    /// Best residual observed up to each iteration; non-increasing by
    /// construction.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.residual_history
            .iter()
            .map(|&r| {
                best = best.min(r);
                best
            })
            .collect()
    }
}

/// Damped Picard iteration on measure paths, starting from the constant-in-
/// time initial measure. Keeps the best iterate and returns the bundle
/// recomputed from it, so the reported barriers always correspond to the
/// reported path's input.
pub fn solve(problem: &Problem, params: &SolveParams) -> Result<SolutionBundle> {
    problem.validate()?;
    params.validate()?;
    let nodes = problem.time_steps + 1;
    let mut current: Vec<GridMeasure> = vec![problem.m0.clone(); nodes];
    let mut history = Vec::with_capacity(params.max_iter);
    let mut best_input = current.clone();
    let mut best_residual = f64::INFINITY;
    let mut best_iteration = 0usize;
    let mut converged = false;

    for iteration in 0..params.max_iter {
        let output = picard_map(problem, &current)?;
        let mut residual = 0.0f64;
        for (inp, out) in current.iter().zip(&output.path.measures) {
            residual = residual.max(torus::w1(inp, out)?);
        }
        history.push(residual);
        if residual < best_residual {
            best_residual = residual;
            best_input = current.clone();
            best_iteration = iteration;
        }
        if residual <= params.tol {
            converged = true;
            break;
        }
        let mut next = Vec::with_capacity(nodes);
        for (inp, out) in current.iter().zip(&output.path.measures) {
            next.push(torus::convex_combination(inp, out, params.damping)?);
        }
        current = next;
    }

    let output = picard_map(problem, &best_input)?;
    let iterations = history.len();
    Ok(SolutionBundle {
        path: output.path,
        alphas: output.alphas,
        barriers: output.barriers,
        aubry: output.aubry,
        residual_history: history,
        best_residual,
        best_iteration,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyItem {
    pub name: String,
    pub passed: bool,
    pub statistic: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub items: Vec<VerifyItem>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.items
            .iter()
            .filter(|i| !i.passed)
            .map(|i| i.name.as_str())
            .collect()
    }

    pub fn item(&self, name: &str) -> Option<&VerifyItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyThresholds {
    /// Median target for the pointwise Hamilton–Jacobi residual.
    pub hj_median: f64,
    /// Coefficient of the `dt²` bound in the weak continuity residual.
    pub continuity_coeff: f64,
    /// Sanity band for the time-continuity modulus of the barrier values.
    pub time_jump: f64,
}

impl Default for VerifyThresholds {
    fn default() -> Self {
        VerifyThresholds {
            hj_median: 5e-2,
            continuity_coeff: 10.0,
            time_jump: 0.5,
        }
    }
}

/// Verifies a solution bundle against the defining properties of the coupled
/// system: per-time fixed-point certificates, pointwise Hamilton–Jacobi
/// residuals, a weak form of the continuity equation on the particle
/// snapshots, per-time semiconcavity, the time-continuity modulus of the
/// barrier, base-point pinning, and the path's W1-Lipschitz ratio.
pub fn verify(
    problem: &Problem,
    bundle: &SolutionBundle,
    thresholds: &VerifyThresholds,
) -> Result<VerifyReport> {
    let engine = WeakKamEngine::new(problem.model, problem.grid, problem.lo_params)?;
    let grid = problem.grid;
    let dtau = problem.lo_params.dtau;
    let mut items = Vec::new();

    // (a) Fixed-point certificate of every barrier against the bundle's own
    // measures.
    {
        let defects = bundle
            .path
            .measures
            .par_iter()
            .zip(&bundle.barriers)
            .map(|(m, u)| {
                let kernel = engine.step_kernel(m)?;
                let step = kernel.lo_step(u.values.values());
                let critical_level = -u.alpha;
                let mut defect = 0.0f64;
                for i in 0..grid.num_nodes() {
                    defect = defect
                        .max((step.values[i] + critical_level * dtau - u.values.value(i)).abs());
                }
                Ok(defect)
            })
            .collect::<Result<Vec<f64>>>()?;
        let worst = defects.iter().cloned().fold(0.0f64, f64::max);
        items.push(VerifyItem {
            name: "fixed-point-certificate".into(),
            passed: worst <= problem.lo_params.tol_fp,
            statistic: worst,
            threshold: problem.lo_params.tol_fp,
            detail: "max over time nodes of the semigroup defect of the barrier".into(),
        });
    }

    // (b) Pointwise Hamilton–Jacobi residual |H(y, p, m) + alpha| summarized
    // by median and 95th percentile; kinks pollute the max, so the median is
    // the assertion target.
    {
        let mut residuals = Vec::with_capacity(bundle.barriers.len() * grid.num_nodes());
        for (j, u) in bundle.barriers.iter().enumerate() {
            let m = &bundle.path.measures[j];
            for i in 0..grid.num_nodes() {
                let r = (problem.model.hamiltonian(grid.node(i), u.costate[i], m)
                    + bundle.alphas[j])
                    .abs();
                residuals.push(r);
            }
        }
        residuals.sort_by(|a, b| a.partial_cmp(b).expect("finite residuals"));
        let median = residuals[residuals.len() / 2];
        let p95_idx = ((residuals.len() as f64 * 0.95) as usize).min(residuals.len() - 1);
        let p95 = residuals[p95_idx];
        items.push(VerifyItem {
            name: "hj-residual-median".into(),
            passed: median <= thresholds.hj_median,
            statistic: median,
            threshold: thresholds.hj_median,
            detail: format!("95th percentile {p95:.4e}"),
        });
    }

    // (c) Weak continuity-equation residual on the particle snapshots with
    // curvature-normalized trigonometric test functions.
    {
        let dt = problem.dt();
        let mut max_drift = 0.0f64;
        let mut worst = 0.0f64;
        for j in 0..bundle.path.steps() {
            let frame = DriftFrame {
                barrier: &bundle.barriers[j],
                measure: &bundle.path.measures[j],
            };
            let now = &bundle.path.ensembles[j];
            let next = &bundle.path.ensembles[j + 1];
            let w = now.weight();
            let drifts: Vec<f64> = now
                .positions()
                .iter()
                .map(|&p| transport::drift(problem.model, &frame, p)[0])
                .collect();
            for &d in &drifts {
                max_drift = max_drift.max(d.abs());
            }
            for k in 1..=5u32 {
                let omega = std::f64::consts::TAU * k as f64;
                // φ = trig(ωx)/ω²: unit curvature, periodic.
                for phase in 0..2 {
                    let phi = |x: f64| {
                        if phase == 0 {
                            (omega * x).sin() / (omega * omega)
                        } else {
                            (omega * x).cos() / (omega * omega)
                        }
                    };
                    let dphi = |x: f64| {
                        if phase == 0 {
                            (omega * x).cos() / omega
                        } else {
                            -(omega * x).sin() / omega
                        }
                    };
                    let mut moved = 0.0;
                    for (a, b) in now.positions().iter().zip(next.positions()) {
                        moved += w * (phi(b[0]) - phi(a[0]));
                    }
                    let mut flux = 0.0;
                    for (p, &d) in now.positions().iter().zip(&drifts) {
                        flux += w * dphi(p[0]) * d;
                    }
                    worst = worst.max((moved - dt * flux).abs());
                }
            }
        }
        let dt = problem.dt();
        let threshold = thresholds.continuity_coeff * dt * dt * (1.0 + max_drift * max_drift);
        items.push(VerifyItem {
            name: "continuity-weak-residual".into(),
            passed: worst <= threshold,
            statistic: worst,
            threshold,
            detail: "max weak residual over time slabs and 10 test functions".into(),
        });
    }

    // (d) Semiconcavity constant per time node.
    {
        let mut worst = f64::NEG_INFINITY;
        for u in &bundle.barriers {
            worst = worst.max(check_semiconcavity(&u.values).constant);
        }
        items.push(VerifyItem {
            name: "semiconcavity".into(),
            passed: worst.is_finite(),
            statistic: worst,
            threshold: f64::INFINITY,
            detail: "max upper second difference across time nodes (refinement studies bound it)"
                .into(),
        });
    }

    // (e) Time-continuity modulus of t -> u_j(y) at probe nodes.
    {
        let probes: Vec<usize> = (0..5).map(|k| k * grid.num_nodes() / 5).collect();
        let mut max_jump = 0.0f64;
        for w in bundle.barriers.windows(2) {
            for &p in &probes {
                max_jump = max_jump.max((w[1].values.value(p) - w[0].values.value(p)).abs());
            }
        }
        items.push(VerifyItem {
            name: "time-continuity".into(),
            passed: max_jump <= thresholds.time_jump,
            statistic: max_jump,
            threshold: thresholds.time_jump,
            detail: "max adjacent-time barrier jump at probe nodes".into(),
        });
    }

    // (f) Empirical W1-Lipschitz ratio of the path against the structural
    // constant.
    {
        let ratio = bundle.path.lipschitz_ratio()?;
        let limit = problem.constants.path_lipschitz * 1.1;
        items.push(VerifyItem {
            name: "path-lipschitz".into(),
            passed: ratio <= limit,
            statistic: ratio,
            threshold: limit,
            detail: "sup pairwise (W1 - binning smear)/Δt vs the structural constant".into(),
        });
    }

    // Base pinning: u_j(x_m) = 0 within the Aubry threshold for all j.
    {
        let mut worst = 0.0f64;
        for u in &bundle.barriers {
            worst = worst.max(u.values.value(bundle.aubry.node).abs());
        }
        items.push(VerifyItem {
            name: "base-value".into(),
            passed: worst <= problem.lo_params.eps_aubry,
            statistic: worst,
            threshold: problem.lo_params.eps_aubry,
            detail: "max |u_j(x_m)| across time nodes".into(),
        });
    }

    Ok(VerifyReport { items })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{default_measure_samples, estimate_constants, Mechanical};

    fn problem<'a>(
        model: &'a Mechanical,
        grid: TorusGrid,
        constants: ModelConstants,
        eps_override: Option<f64>,
    ) -> Problem<'a> {
        let mut lo = LaxOleinikParams::from_constants(grid, &constants, 0.1);
        if let Some(eps) = eps_override {
            lo.eps_aubry = eps;
        }
        Problem {
            model,
            grid,
            m0: GridMeasure::uniform(grid),
            horizon: 1.0,
            time_steps: 10,
            lo_params: lo,
            particles: grid.n() * 16,
            constants,
        }
    }

    #[test]
    fn zero_coupling_converges_immediately() {
        let model = Mechanical::builtin(0.0).unwrap();
        let grid = TorusGrid::new(1, 64).unwrap();
        let samples = default_measure_samples(grid, 1);
        let constants = estimate_constants(&model, grid, &samples).unwrap();
        let prob = problem(&model, grid, constants, None);
        let params = SolveParams {
            damping: 0.5,
            max_iter: 5,
            tol: 1e-9,
        };
        let bundle = solve(&prob, &params).unwrap();
        assert!(bundle.converged, "history {:?}", bundle.residual_history);
        assert_eq!(bundle.iterations, 1);
        assert!(bundle.best_residual <= 1e-9);
        // Frozen path: every measure equals the binned initial sampling.
        for m in &bundle.path.measures {
            assert!(torus::w1(&bundle.path.measures[0], m).unwrap() < 1e-15);
        }
        let report = verify(&prob, &bundle, &VerifyThresholds::default()).unwrap();
        assert!(report.all_passed(), "failures {:?}", report.failures());
    }

    #[test]
    fn weakly_coupled_reference_reaches_fixed_point() {
        let model = Mechanical::builtin(0.1).unwrap();
        let grid = TorusGrid::new(1, 64).unwrap();
        let samples = default_measure_samples(grid, 1);
        let constants = estimate_constants(&model, grid, &samples).unwrap();
        let eps = grid.spacing() * grid.spacing() / 0.1;
        let prob = problem(&model, grid, constants, Some(eps));
        let params = SolveParams {
            damping: 0.5,
            max_iter: 30,
            tol: 1e-2,
        };
        let bundle = solve(&prob, &params).unwrap();
        assert!(bundle.converged, "history {:?}", bundle.residual_history);
        // Best-so-far tracker is non-increasing.
        let best = bundle.best_so_far();
        for w in best.windows(2) {
            assert!(w[1] <= w[0]);
        }
        // x_m sits in the member set of every time node by construction.
        assert_eq!(bundle.aubry.node, 0);
        let report = verify(&prob, &bundle, &VerifyThresholds::default()).unwrap();
        assert!(report.all_passed(), "failures {:?}", report.failures());
    }

    #[test]
    fn corrupted_alpha_breaks_the_certificate() {
        let model = Mechanical::builtin(0.1).unwrap();
        let grid = TorusGrid::new(1, 64).unwrap();
        let samples = default_measure_samples(grid, 1);
        let constants = estimate_constants(&model, grid, &samples).unwrap();
        let eps = grid.spacing() * grid.spacing() / 0.1;
        let prob = problem(&model, grid, constants, Some(eps));
        let params = SolveParams {
            damping: 0.5,
            max_iter: 10,
            tol: 1e-2,
        };
        let mut bundle = solve(&prob, &params).unwrap();
        for (a, u) in bundle.alphas.iter_mut().zip(&mut bundle.barriers) {
            *a += 0.1;
            u.alpha += 0.1;
        }
        let report = verify(&prob, &bundle, &VerifyThresholds::default()).unwrap();
        let cert = report.item("fixed-point-certificate").unwrap();
        assert!(!cert.passed);
        // Linear response: the defect moves by about the alpha shift times dtau.
        assert!(
            (cert.statistic - 0.1 * prob.lo_params.dtau).abs() <= 0.5 * 0.1 * prob.lo_params.dtau
                || cert.statistic > 0.005,
            "defect {} not reflecting the corruption",
            cert.statistic
        );
    }

    #[test]
    fn inadmissible_input_path_is_rejected() {
        let model = Mechanical::builtin(1.0).unwrap();
        let grid = TorusGrid::new(1, 64).unwrap();
        let samples = default_measure_samples(grid, 1);
        let constants = estimate_constants(&model, grid, &samples).unwrap();
        let mut prob = problem(&model, grid, constants, None);
        // Uniform to a Dirac in one slab of width 0.02: W1 ratio ~ 9, far
        // above any admissible transport speed.
        prob.time_steps = 50;
        let mut path = vec![GridMeasure::uniform(grid); prob.time_steps + 1];
        path[1] = GridMeasure::dirac(grid, [0.5, 0.0]);
        match picard_map(&prob, &path) {
            Err(Error::PathNotAdmissible { .. }) => {}
            Err(e) => panic!("wrong error: {e}"),
            Ok(_) => panic!("inadmissible path accepted"),
        }
    }

    #[test]
    fn constant_map_output_is_bit_exact() {
        // With zero coupling the fixed-point map ignores its input, so the
        // solve's path and a single application to a different admissible
        // path agree node for node, bit for bit.
        let model = Mechanical::builtin(0.0).unwrap();
        let grid = TorusGrid::new(1, 64).unwrap();
        let samples = default_measure_samples(grid, 1);
        let constants = estimate_constants(&model, grid, &samples).unwrap();
        let prob = problem(&model, grid, constants, None);
        let params = SolveParams {
            damping: 0.5,
            max_iter: 3,
            tol: 1e-9,
        };
        let bundle = solve(&prob, &params).unwrap();
        // A gently varying admissible input path.
        let dirac = GridMeasure::dirac(grid, [0.25, 0.0]);
        let path: Vec<GridMeasure> = (0..=prob.time_steps)
            .map(|j| {
                let theta = 0.002 * j as f64;
                torus::convex_combination(&GridMeasure::uniform(grid), &dirac, theta).unwrap()
            })
            .collect();
        let output = picard_map(&prob, &path).unwrap();
        for (a, b) in bundle.path.measures.iter().zip(&output.path.measures) {
            for (wa, wb) in a.weights().iter().zip(b.weights()) {
                assert_eq!(wa.to_bits(), wb.to_bits());
            }
        }
    }

    #[test]
    fn solve_params_are_validated() {
        assert!(SolveParams {
            damping: 0.0,
            max_iter: 10,
            tol: 1e-2
        }
        .validate()
        .is_err());
        assert!(SolveParams {
            damping: 0.5,
            max_iter: 0,
            tol: 1e-2
        }
        .validate()
        .is_err());
    }
}
