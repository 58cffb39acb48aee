//! Discrete Lax–Oleinik semigroup and the weak KAM objects built on it.
//!
//! For a frozen measure `m` the engine iterates the inf-convolution
//!
//! `(T u)(y) = min_z [ u(z) + dtau · L(mid(z, y), (y ⊖ z)/dtau, m) ]`
//!
//! over nodes `z` within a velocity-bounded search radius. Everything else
//! follows from those iterates:
//!
//! * the critical value `alpha` from the asymptotic growth rate of iterates
//!   started at zero (`alpha = lim (T^{k+1}u - T^k u)/dtau`, matching the
//!   convention `H + alpha = 0`);
//! * the barrier based at `x` as the windowed minimum of
//!   `A_k + (−alpha)·k·dtau` over post-burn-in steps, where `A_k` are the
//!   iterates of a one-point indicator;
//! * the Aubry set as the near-zero sublevel of the barrier diagonal;
//! * calibrated curves by walking the argmin links backwards.
//!
//! Every returned barrier carries a fixed-point certificate: one more
//! semigroup application must reproduce it within `tol_fp`.

mod checks;
mod kernel;

pub use checks::{check_semiconcavity, CalibratedCurve, DominationReport, SemiconcavityReport};
pub use kernel::{LoStep, StepKernel};

use crate::error::{Error, Result};
use crate::model::{Hamiltonian, ModelConstants};
use crate::torus::{self, GridField, GridMeasure, Point, TorusGrid, Vector, MAX_DIM};
use rayon::prelude::*;
use serde::Serialize;

/// Sentinel standing in for +infinity in indicator initializations; keeps all
/// arithmetic total. Reachability checks guard against it leaking into
/// results.
pub const SENTINEL: f64 = 1e9;
const SENTINEL_GUARD: f64 = 1e8;

/// Tolerance for treating dynamic-programming minimizers as tied. Tied
/// momenta are averaged so that mirror-symmetric models keep exactly
/// antisymmetric co-states across cut loci.
const TIE_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LaxOleinikParams {
    /// Intrinsic time step of the semigroup.
    pub dtau: f64,
    /// Spatial search radius per step; derived as `velocity_bound · dtau`.
    pub search_radius: f64,
    /// Steps discarded before the liminf window opens.
    pub n_burn: usize,
    /// Width of the windowed minimum realizing the liminf.
    pub n_window: usize,
    /// Threshold on the barrier diagonal for Aubry membership.
    pub eps_aubry: f64,
    /// Fixed-point certificate tolerance.
    pub tol_fp: f64,
}

impl LaxOleinikParams {
    pub const DEFAULT_DTAU: f64 = 0.1;
    pub const DEFAULT_BURN: usize = 100;
    pub const DEFAULT_WINDOW: usize = 50;
    pub const DEFAULT_TOL_FP: f64 = 1e-2;

    /// Derives parameters from estimated model constants. The search radius
    /// is floored at 1.5 cells so degenerate (coupling-free) models still
    /// move, and capped just under the torus half-width so displacements stay
    /// unambiguous.
    pub fn from_constants(grid: TorusGrid, constants: &ModelConstants, dtau: f64) -> Self {
        let h = grid.spacing();
        let radius = (constants.velocity_bound * dtau).max(1.5 * h).min(0.499);
        LaxOleinikParams {
            dtau,
            search_radius: radius,
            n_burn: Self::DEFAULT_BURN,
            n_window: Self::DEFAULT_WINDOW,
            eps_aubry: 3.0 * h * constants.velocity_bound.max(1e-6),
            tol_fp: Self::DEFAULT_TOL_FP,
        }
    }

    pub fn validate(&self, grid: TorusGrid) -> Result<()> {
        if !(self.dtau.is_finite() && self.dtau > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dtau must be positive, got {}",
                self.dtau
            )));
        }
        if self.n_window == 0 {
            return Err(Error::InvalidConfig(
                "liminf window must be nonempty".into(),
            ));
        }
        if self.search_radius < grid.spacing() {
            return Err(Error::InvalidConfig(format!(
                "search radius {} is below one grid cell {}",
                self.search_radius,
                grid.spacing()
            )));
        }
        if self.search_radius >= 0.5 {
            return Err(Error::InvalidConfig(format!(
                "search radius {} must stay under the torus half-width",
                self.search_radius
            )));
        }
        if !(self.tol_fp > 0.0 && self.eps_aubry > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        Ok(())
    }

    /// Velocity cap implied by the search radius.
    pub fn speed_cap(&self) -> f64 {
        self.search_radius / self.dtau
    }
}

/// Critical value estimate with its convergence diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalValue {
    pub alpha: f64,
    /// Spread (max − min) of the windowed increments; small means the
    /// semigroup reached its linear regime.
    pub spread: f64,
    pub increments: Vec<f64>,
}

/// Peierls barrier based at one node, together with its dynamic-programming
/// co-state and certificate data.
#[derive(Debug, Clone)]
pub struct BarrierField {
    pub base: usize,
    pub values: GridField,
    /// Momentum `D_v L` at the final-step minimizer of each node; the
    /// one-sided gradient the optimal drift needs at semiconcavity kinks.
    pub costate: Vec<Vector>,
    /// Critical value used when assembling the barrier.
    pub alpha: f64,
    /// Fixed-point defect `max |T h + (−alpha)·dtau − h|`.
    pub defect: f64,
    /// Argmin source per node from the certificate step.
    pub backlink: Vec<u32>,
}

impl BarrierField {
    pub fn grid(&self) -> TorusGrid {
        self.values.grid()
    }

    /// Interpolated co-state at an off-node point.
    pub fn costate_at(&self, x: Point) -> Vector {
        let grid = self.grid();
        let mut out = [0.0; MAX_DIM];
        for a in 0..grid.dim() {
            let comp: Vec<f64> = self.costate.iter().map(|p| p[a]).collect();
            out[a] = torus::interp_scalar(grid, &comp, x);
        }
        out
    }
}

/// Barrier diagonal scan and thresholded member set.
#[derive(Debug, Clone, Serialize)]
pub struct AubryData {
    pub threshold: f64,
    /// `None` where the coarse pass skipped a node.
    pub diagonal: Vec<Option<f64>>,
    pub members: Vec<usize>,
}

/// Common Aubry point across a measure path.
#[derive(Debug, Clone, Serialize)]
pub struct CommonAubryPoint {
    pub node: usize,
    pub point: Point,
    /// Worst diagonal value of the selected node across the path.
    pub max_diag: f64,
    /// Geodesic spread of the surviving candidate set.
    pub spread: f64,
    /// Set when several well-separated candidates survive; the returned node
    /// minimizes the worst diagonal.
    pub warning: Option<String>,
}

/// Report from a critical-value continuity probe between two measures.
#[derive(Debug, Clone, Serialize)]
pub struct ContinuityProbe {
    pub alpha_diff: f64,
    pub w1: f64,
    pub ratio: f64,
}

/// Lax–Oleinik engine bound to one model, grid and parameter set.
pub struct WeakKamEngine<'m> {
    model: &'m dyn Hamiltonian,
    grid: TorusGrid,
    params: LaxOleinikParams,
}

impl<'m> WeakKamEngine<'m> {
    pub fn new(
        model: &'m dyn Hamiltonian,
        grid: TorusGrid,
        params: LaxOleinikParams,
    ) -> Result<Self> {
        params.validate(grid)?;
        if model.dim() != grid.dim() {
            return Err(Error::InvalidInput(format!(
                "model dimension {} does not match grid dimension {}",
                model.dim(),
                grid.dim()
            )));
        }
        Ok(WeakKamEngine {
            model,
            grid,
            params,
        })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn params(&self) -> &LaxOleinikParams {
        &self.params
    }

    pub fn model(&self) -> &'m dyn Hamiltonian {
        self.model
    }

    /// Builds the frozen transition-cost kernel for one measure. Reused by
    /// every computation against that measure.
    pub fn step_kernel(&self, m: &GridMeasure) -> Result<StepKernel> {
        StepKernel::build(self.model, self.grid, &self.params, m)
    }

    /// Steps needed before every node is reachable from a one-point support.
    fn reachability_horizon(&self) -> usize {
        let diameter = 0.5 * (self.grid.dim() as f64).sqrt();
        (diameter / self.params.search_radius).ceil() as usize + 1
    }

    /// Estimates the critical value from the growth rate of semigroup
    /// iterates started at zero, averaged over five probe nodes across the
    /// last `n_window` steps.
    pub fn critical_value(&self, kernel: &StepKernel) -> Result<CriticalValue> {
        let nodes = self.grid.num_nodes();
        let probes: Vec<usize> = (0..5).map(|k| k * nodes / 5).collect();
        let mut u = vec![0.0f64; nodes];
        for _ in 0..self.params.n_burn {
            u = kernel.lo_step(&u).values;
        }
        let mut increments = Vec::with_capacity(self.params.n_window);
        for _ in 0..self.params.n_window {
            let next = kernel.lo_step(&u).values;
            let inc = probes.iter().map(|&i| next[i] - u[i]).sum::<f64>() / probes.len() as f64;
            increments.push(inc);
            u = next;
        }
        let mean = increments.iter().sum::<f64>() / increments.len() as f64;
        let spread = increments.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - increments.iter().cloned().fold(f64::INFINITY, f64::min);
        let alpha = mean / self.params.dtau;
        let limit = 10.0 * self.params.tol_fp;
        if spread > limit {
            return Err(Error::NoConvergence {
                spread,
                limit,
                alpha,
            });
        }
        Ok(CriticalValue {
            alpha,
            spread,
            increments,
        })
    }

    /// Iterated action from a one-point indicator at `base`: entry `k-1`
    /// approximates the least cost of reaching each node from `base` in time
    /// `k · dtau`.
    pub fn action_table(
        &self,
        kernel: &StepKernel,
        base: usize,
        steps: usize,
    ) -> Result<Vec<GridField>> {
        if steps == 0 {
            return Err(Error::InvalidInput("action table needs >= 1 step".into()));
        }
        let nodes = self.grid.num_nodes();
        if base >= nodes {
            return Err(Error::InvalidInput(format!(
                "base node {base} out of range ({nodes} nodes)"
            )));
        }
        let horizon = self.reachability_horizon();
        let mut u = vec![SENTINEL; nodes];
        u[base] = 0.0;
        let mut out = Vec::with_capacity(steps);
        for k in 1..=steps {
            u = kernel.lo_step(&u).values;
            if k >= horizon {
                let max = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if max >= SENTINEL_GUARD {
                    return Err(Error::Reachability { steps: k, max });
                }
            }
            out.push(GridField::new(self.grid, u.clone())?);
        }
        Ok(out)
    }

    /// Peierls barrier based at `base` for the kernel's measure, using the
    /// already-computed critical value `alpha`.
    ///
    /// The returned field passes the discrete fixed-point certificate
    /// `max |T h + (−alpha)·dtau − h| ≤ tol_fp` or the call fails.
    pub fn peierls_barrier(
        &self,
        kernel: &StepKernel,
        base: usize,
        alpha: f64,
    ) -> Result<BarrierField> {
        let nodes = self.grid.num_nodes();
        if base >= nodes {
            return Err(Error::InvalidInput(format!(
                "base node {base} out of range ({nodes} nodes)"
            )));
        }
        let critical_level = -alpha;
        let dtau = self.params.dtau;
        let horizon = self.reachability_horizon();
        let total = self.params.n_burn + self.params.n_window;
        let mut u = vec![SENTINEL; nodes];
        u[base] = 0.0;
        let mut best: Vec<f64> = vec![f64::INFINITY; nodes];
        for k in 1..=total {
            u = kernel.lo_step(&u).values;
            if k == horizon {
                let max = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if max >= SENTINEL_GUARD {
                    return Err(Error::Reachability { steps: k, max });
                }
            }
            if k >= self.params.n_burn {
                let shift = critical_level * k as f64 * dtau;
                for (b, &v) in best.iter_mut().zip(&u) {
                    let candidate = v + shift;
                    if candidate < *b {
                        *b = candidate;
                    }
                }
            }
        }

        // Certificate pass; its argmin links double as the calibration policy.
        let step = kernel.lo_step(&best);
        let mut defect = 0.0f64;
        for i in 0..nodes {
            defect = defect.max((step.values[i] + critical_level * dtau - best[i]).abs());
        }
        if defect > self.params.tol_fp {
            return Err(Error::BarrierNotCritical {
                defect,
                tol: self.params.tol_fp,
            });
        }

        // Co-state: momentum at the segment endpoint of the minimizing step
        // into each node. The step's momentum lives at its midpoint, so the
        // Euler–Lagrange relation `d/dt D_v L = D_x L` shifts it forward half
        // a step; without this the co-state lags the barrier gradient by
        // O(dtau · force). Exact ties are averaged so mirror symmetries
        // survive discretization.
        let frozen = crate::model::frozen(self.model, kernel.measure());
        let scale = TIE_TOL * (1.0 + best.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let mut costate = vec![[0.0; MAX_DIM]; nodes];
        for y in 0..nodes {
            let tied = kernel.tied_sources(&best, y, scale);
            let mut acc = [0.0; MAX_DIM];
            for &src in &tied {
                let v = kernel
                    .transition_velocity(src, y)
                    .expect("tied source within radius");
                let mid = midpoint(self.grid, src, y);
                let p = frozen.grad_v(mid, v)?;
                let force = frozen.grad_x(mid, v)?;
                for a in 0..self.grid.dim() {
                    acc[a] += p[a] + 0.5 * dtau * force[a];
                }
            }
            for a in 0..self.grid.dim() {
                costate[y][a] = acc[a] / tied.len() as f64;
            }
        }

        Ok(BarrierField {
            base,
            values: GridField::new(self.grid, best)?,
            costate,
            alpha,
            defect,
            backlink: step.backlink,
        })
    }

    /// Barrier diagonal `h(y, y)` and the thresholded Aubry member set.
    ///
    /// Grids above 128 nodes use a coarse pass on every 4th node followed by
    /// refinement around near-threshold coarse values; skipped nodes report
    /// `None` in the diagonal.
    pub fn aubry_set(&self, kernel: &StepKernel, alpha: f64) -> Result<AubryData> {
        let nodes = self.grid.num_nodes();
        let threshold = self.params.eps_aubry;
        let mut diagonal: Vec<Option<f64>> = vec![None; nodes];

        let evaluate = |targets: &[usize]| -> Result<Vec<(usize, f64)>> {
            targets
                .par_iter()
                .map(|&i| {
                    let b = self.peierls_barrier(kernel, i, alpha)?;
                    Ok((i, b.values.value(i)))
                })
                .collect()
        };

        if nodes <= 128 {
            let all: Vec<usize> = (0..nodes).collect();
            for (i, d) in evaluate(&all)? {
                diagonal[i] = Some(d);
            }
        } else {
            let coarse: Vec<usize> = (0..nodes).step_by(4).collect();
            let coarse_vals = evaluate(&coarse)?;
            for &(i, d) in &coarse_vals {
                diagonal[i] = Some(d);
            }
            // Lipschitz margin: moving base and evaluation point by up to
            // four cells changes the diagonal by at most 4h per unit slope.
            let margin = threshold + 4.0 * self.grid.spacing() * self.params.speed_cap();
            let mut refine: std::collections::BTreeSet<usize> = std::collections::BTreeSet::new();
            for &(i, d) in &coarse_vals {
                if d <= margin {
                    let reach = 3i64;
                    match self.grid.dim() {
                        1 => {
                            for o in -reach..=reach {
                                refine.insert(self.grid.shifted_index(i, [o, 0]));
                            }
                        }
                        _ => {
                            for ox in -reach..=reach {
                                for oy in -reach..=reach {
                                    refine.insert(self.grid.shifted_index(i, [ox, oy]));
                                }
                            }
                        }
                    }
                }
            }
            let pending: Vec<usize> = refine
                .into_iter()
                .filter(|&i| diagonal[i].is_none())
                .collect();
            for (i, d) in evaluate(&pending)? {
                diagonal[i] = Some(d);
            }
        }

        let members: Vec<usize> = (0..nodes)
            .filter(|&i| matches!(diagonal[i], Some(d) if d <= threshold))
            .collect();
        if members.is_empty() {
            let min_diag = diagonal
                .iter()
                .flatten()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            return Err(Error::EmptyAubrySet {
                threshold,
                min_diag,
            });
        }
        Ok(AubryData {
            threshold,
            diagonal,
            members,
        })
    }

    /// Intersects Aubry member sets across a measure path, with a one-cell
    /// tolerance, and returns the common point.
    ///
    /// The first time node gets a full member scan; later nodes only need
    /// diagonal values at the surviving candidates (the intersection can only
    /// shrink). Several survivors within one cell count as a single point; a
    /// wider spread selects the minimizer of the worst diagonal and sets a
    /// warning, since uniqueness is an assumption rather than a theorem here.
    pub fn common_aubry_point(
        &self,
        measures: &[GridMeasure],
        alphas: &[f64],
    ) -> Result<CommonAubryPoint> {
        if measures.is_empty() || measures.len() != alphas.len() {
            return Err(Error::InvalidInput(
                "need one critical value per measure, at least one".into(),
            ));
        }
        let kernel0 = self.step_kernel(&measures[0])?;
        let aubry0 = self.aubry_set(&kernel0, alphas[0])?;
        let mut candidates: Vec<(usize, f64)> = aubry0
            .members
            .iter()
            .map(|&i| (i, aubry0.diagonal[i].unwrap_or(f64::INFINITY)))
            .collect();

        let threshold = self.params.eps_aubry;
        for (j, (m, &alpha)) in measures.iter().zip(alphas).enumerate().skip(1) {
            let kernel = self.step_kernel(m)?;
            let evaluated: Vec<(usize, f64, bool)> = candidates
                .par_iter()
                .map(|&(c, worst)| -> Result<(usize, f64, bool)> {
                    let b = self.peierls_barrier(&kernel, c, alpha)?;
                    let own = b.values.value(c);
                    if own <= threshold {
                        return Ok((c, worst.max(own), true));
                    }
                    // One-cell tolerance: a member may sit in an adjacent cell.
                    let neighbors: Vec<usize> = match self.grid.dim() {
                        1 => vec![
                            self.grid.shifted_index(c, [-1, 0]),
                            self.grid.shifted_index(c, [1, 0]),
                        ],
                        _ => plane_neighbors(self.grid, c),
                    };
                    for nb in neighbors {
                        let bn = self.peierls_barrier(&kernel, nb, alpha)?;
                        if bn.values.value(nb) <= threshold {
                            return Ok((c, worst.max(own), true));
                        }
                    }
                    Ok((c, worst.max(own), false))
                })
                .collect::<Result<Vec<_>>>()?;
            candidates = evaluated
                .into_iter()
                .filter(|&(_, _, alive)| alive)
                .map(|(c, w, _)| (c, w))
                .collect();
            if candidates.is_empty() {
                return Err(Error::AssumptionAViolated { failed_at: j });
            }
        }

        let mut spread = 0.0f64;
        for (i, &(a, _)) in candidates.iter().enumerate() {
            for &(b, _) in &candidates[i + 1..] {
                spread = spread.max(torus::distance(
                    self.grid.node(a),
                    self.grid.node(b),
                    self.grid.dim(),
                ));
            }
        }
        let cluster_width = 1.5 * self.grid.spacing() * (self.grid.dim() as f64).sqrt();
        let &(node, max_diag) = candidates
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite diagonals"))
            .expect("nonempty candidate set");
        let warning = if spread > cluster_width {
            Some(format!(
                "{} Aubry candidates spread over {spread:.4}; returning the one with the smallest worst diagonal (uniqueness assumption not certified)",
                candidates.len()
            ))
        } else {
            None
        };
        Ok(CommonAubryPoint {
            node,
            point: self.grid.node(node),
            max_diag,
            spread,
            warning,
        })
    }

    /// Backtracks `steps` argmin links of the barrier's certificate policy
    /// from `end`, returning the curve with per-step calibration defects.
    pub fn calibrated_curve(
        &self,
        kernel: &StepKernel,
        barrier: &BarrierField,
        end: usize,
        steps: usize,
    ) -> Result<CalibratedCurve> {
        checks::calibrated_curve(self, kernel, barrier, end, steps)
    }

    /// Domination check of a node curve against a barrier.
    pub fn check_dominated(
        &self,
        kernel: &StepKernel,
        barrier: &BarrierField,
        curve: &[usize],
    ) -> Result<DominationReport> {
        checks::check_dominated(&self.params, kernel, barrier, curve)
    }

    /// Critical-value continuity probe between two measures.
    pub fn critical_continuity_probe(
        &self,
        m1: &GridMeasure,
        m2: &GridMeasure,
    ) -> Result<ContinuityProbe> {
        let k1 = self.step_kernel(m1)?;
        let k2 = self.step_kernel(m2)?;
        let a1 = self.critical_value(&k1)?.alpha;
        let a2 = self.critical_value(&k2)?.alpha;
        let dist = torus::w1(m1, m2)?;
        let alpha_diff = (a1 - a2).abs();
        Ok(ContinuityProbe {
            alpha_diff,
            w1: dist,
            ratio: if dist > 0.0 { alpha_diff / dist } else { 0.0 },
        })
    }
}

fn plane_neighbors(grid: TorusGrid, c: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(8);
    for ox in -1..=1i64 {
        for oy in -1..=1i64 {
            if ox == 0 && oy == 0 {
                continue;
            }
            out.push(grid.shifted_index(c, [ox, oy]));
        }
    }
    out
}

pub(crate) fn midpoint(grid: TorusGrid, src: usize, dst: usize) -> Point {
    let a = grid.node(src);
    let b = grid.node(dst);
    let d = torus::displacement(a, b, grid.dim());
    let mut mid = [0.0; MAX_DIM];
    for axis in 0..grid.dim() {
        mid[axis] = torus::wrap(a[axis] + 0.5 * d[axis]);
    }
    mid
}
