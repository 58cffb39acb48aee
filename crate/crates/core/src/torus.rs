//! Periodic grids on the unit torus, probability measures and scalar fields
//! living on them, the exact circular Wasserstein-1 distance, interpolation
//! and particle density estimation.
//!
//! Points and vectors are fixed `[f64; 2]` arrays; a grid of dimension 1
//! simply ignores the second component (kept at zero). This keeps the 1d
//! production path and the 2d diagnostic path on a single code branch.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const MAX_DIM: usize = 2;

/// A point on the unit torus (components in `[0, 1)`).
pub type Point = [f64; MAX_DIM];
/// A velocity or momentum vector.
pub type Vector = [f64; MAX_DIM];

pub const ZERO: Vector = [0.0, 0.0];

/// Wrap a coordinate into `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let y = x - x.floor();
    // x.floor() == x for negative tiny values can still yield 1.0 after
    // rounding; fold that case back.
    if y >= 1.0 {
        y - 1.0
    } else {
        y
    }
}

#[inline]
pub fn wrap_point(x: Point, dim: usize) -> Point {
    let mut out = [0.0; MAX_DIM];
    for a in 0..dim {
        out[a] = wrap(x[a]);
    }
    out
}

/// Shortest signed displacement from `a` to `b` along one axis, in `[-1/2, 1/2)`.
#[inline]
pub fn axis_displacement(a: f64, b: f64) -> f64 {
    let mut d = b - a;
    d -= d.round();
    d
}

/// Shortest displacement vector from `a` to `b` on the torus.
#[inline]
pub fn displacement(a: Point, b: Point, dim: usize) -> Vector {
    let mut out = [0.0; MAX_DIM];
    for axis in 0..dim {
        out[axis] = axis_displacement(a[axis], b[axis]);
    }
    out
}

/// Geodesic distance on the torus.
#[inline]
pub fn distance(a: Point, b: Point, dim: usize) -> f64 {
    norm(displacement(a, b, dim), dim)
}

#[inline]
pub fn norm(v: Vector, dim: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..dim {
        s += v[a] * v[a];
    }
    s.sqrt()
}

#[inline]
pub fn dot(u: Vector, v: Vector, dim: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..dim {
        s += u[a] * v[a];
    }
    s
}

/// Uniform periodic grid with `n` nodes per axis, spacing `h = 1/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

#[derive(Deserialize)]
struct RawGrid {
    dim: usize,
    n: usize,
}

impl TryFrom<RawGrid> for TorusGrid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        TorusGrid::new(raw.dim, raw.n)
    }
}

impl TorusGrid {
    pub const MIN_NODES_PER_AXIS: usize = 8;

    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidInput(format!(
                "grid dimension must be 1 or 2, got {dim}"
            )));
        }
        if n < Self::MIN_NODES_PER_AXIS {
            return Err(Error::InvalidInput(format!(
                "grid needs at least {} nodes per axis, got {n}",
                Self::MIN_NODES_PER_AXIS
            )));
        }
        Ok(TorusGrid { dim, n })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes per axis.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Total node count `n^dim`.
    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    #[inline]
    pub fn multi_index(&self, flat: usize) -> [usize; MAX_DIM] {
        debug_assert!(flat < self.num_nodes());
        if self.dim == 1 {
            [flat, 0]
        } else {
            [flat % self.n, flat / self.n]
        }
    }

    #[inline]
    pub fn flat_index(&self, idx: [usize; MAX_DIM]) -> usize {
        if self.dim == 1 {
            idx[0]
        } else {
            idx[0] + self.n * idx[1]
        }
    }

    /// Flat index after shifting node `flat` by `offset` cells (wrapped).
    #[inline]
    pub fn shifted_index(&self, flat: usize, offset: [i64; MAX_DIM]) -> usize {
        let n = self.n as i64;
        let idx = self.multi_index(flat);
        let mut out = [0usize; MAX_DIM];
        for a in 0..self.dim {
            out[a] = (idx[a] as i64 + offset[a]).rem_euclid(n) as usize;
        }
        self.flat_index(out)
    }

    #[inline]
    pub fn node(&self, flat: usize) -> Point {
        let idx = self.multi_index(flat);
        let h = self.spacing();
        let mut p = [0.0; MAX_DIM];
        for a in 0..self.dim {
            p[a] = idx[a] as f64 * h;
        }
        p
    }

    /// Flat index of the node closest to `x`.
    pub fn nearest_node(&self, x: Point) -> usize {
        let n = self.n as i64;
        let mut idx = [0usize; MAX_DIM];
        for a in 0..self.dim {
            idx[a] = ((wrap(x[a]) * self.n as f64).round() as i64).rem_euclid(n) as usize;
        }
        self.flat_index(idx)
    }

    fn check_same(&self, other: &TorusGrid) -> Result<()> {
        if self != other {
            return Err(Error::InvalidInput(format!(
                "grid mismatch: {}d n={} vs {}d n={}",
                self.dim, self.n, other.dim, other.n
            )));
        }
        Ok(())
    }
}

/// A probability measure supported on the grid nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct GridMeasure {
    grid: TorusGrid,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMeasure {
    grid: TorusGrid,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for GridMeasure {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        GridMeasure::new(raw.grid, raw.weights)
    }
}

pub const MASS_TOL: f64 = 1e-12;

impl GridMeasure {
    /// Validates nonnegativity and unit total mass (within `1e-12`); weights
    /// are stored as given so file round-trips stay bit-exact.
    pub fn new(grid: TorusGrid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.num_nodes() {
            return Err(Error::InvalidInput(format!(
                "expected {} weights, got {}",
                grid.num_nodes(),
                weights.len()
            )));
        }
        let mut total = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "weight {w} at node {i} is negative or not finite"
                )));
            }
            total += w;
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidInput(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(GridMeasure { grid, weights })
    }

    /// Normalizes a nonnegative weight vector to unit mass.
    pub fn normalized(grid: TorusGrid, mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidInput(format!(
                "cannot normalize weights with total {total}"
            )));
        }
        for w in &mut weights {
            *w /= total;
        }
        GridMeasure::new(grid, weights)
    }

    pub fn uniform(grid: TorusGrid) -> Self {
        let n = grid.num_nodes();
        GridMeasure {
            grid,
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// Unit mass on the node nearest to `x`.
    pub fn dirac(grid: TorusGrid, x: Point) -> Self {
        let mut weights = vec![0.0; grid.num_nodes()];
        weights[grid.nearest_node(x)] = 1.0;
        GridMeasure { grid, weights }
    }

    #[inline]
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, node: usize) -> f64 {
        self.weights[node]
    }

    /// Density value at a node: `w_i * n^dim`.
    #[inline]
    pub fn density(&self, node: usize) -> f64 {
        self.weights[node] * self.grid.num_nodes() as f64
    }

    pub fn sup_density(&self) -> f64 {
        let scale = self.grid.num_nodes() as f64;
        self.weights.iter().fold(0.0f64, |m, &w| m.max(w * scale))
    }
}

/// Real-valued field sampled at grid nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawField")]
pub struct GridField {
    grid: TorusGrid,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl TryFrom<RawField> for GridField {
    type Error = Error;

    fn try_from(raw: RawField) -> Result<Self> {
        GridField::new(raw.grid, raw.values)
    }
}

impl GridField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::InvalidInput(format!(
                "expected {} values, got {}",
                grid.num_nodes(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite field value {v}")));
        }
        Ok(GridField { grid, values })
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        GridField {
            grid,
            values: vec![c; grid.num_nodes()],
        }
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.num_nodes()).map(|i| f(grid.node(i))).collect();
        GridField { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    /// Periodic multilinear interpolation; exact at the nodes.
    pub fn interp(&self, x: Point) -> f64 {
        interp_scalar(self.grid, &self.values, x)
    }

    pub fn max_abs_diff(&self, other: &GridField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Periodic multilinear interpolation of per-node scalar data.
pub fn interp_scalar(grid: TorusGrid, values: &[f64], x: Point) -> f64 {
    let n = grid.n();
    let nf = n as f64;
    match grid.dim() {
        1 => {
            let s = wrap(x[0]) * nf;
            let i0 = s.floor() as usize % n;
            let t = s - s.floor();
            let i1 = (i0 + 1) % n;
            (1.0 - t) * values[i0] + t * values[i1]
        }
        _ => {
            let sx = wrap(x[0]) * nf;
            let sy = wrap(x[1]) * nf;
            let ix = sx.floor() as usize % n;
            let iy = sy.floor() as usize % n;
            let tx = sx - sx.floor();
            let ty = sy - sy.floor();
            let jx = (ix + 1) % n;
            let jy = (iy + 1) % n;
            let v00 = values[grid.flat_index([ix, iy])];
            let v10 = values[grid.flat_index([jx, iy])];
            let v01 = values[grid.flat_index([ix, jy])];
            let v11 = values[grid.flat_index([jx, jy])];
            (1.0 - tx) * (1.0 - ty) * v00
                + tx * (1.0 - ty) * v10
                + (1.0 - tx) * ty * v01
                + tx * ty * v11
        }
    }
}

/// Exact Wasserstein-1 distance between two grid measures on the circle
/// (`dim == 1` only).
///
/// Computed as the minimum over a constant shift `s` of the integrated
/// absolute CDF difference; the optimal shift is a median of the per-cell
/// CDF differences, which makes the result independent of where the circle
/// is cut.
pub fn w1(mu: &GridMeasure, nu: &GridMeasure) -> Result<f64> {
    mu.grid().check_same(&nu.grid())?;
    if mu.grid().dim() != 1 {
        return Err(Error::InvalidInput(
            "exact W1 is only defined for 1d grids; use w1_entropic for the 2d diagnostic".into(),
        ));
    }
    let n = mu.grid().n();
    let h = mu.grid().spacing();
    let mut cdf_diff = Vec::with_capacity(n);
    let mut acc = 0.0;
    for i in 0..n {
        acc += mu.weight(i) - nu.weight(i);
        cdf_diff.push(acc);
    }
    let mut sorted = cdf_diff.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite CDF values"));
    // Midpoint of the median pair: still an optimal shift, and symmetric
    // under swapping the arguments so w1(a, b) == w1(b, a) exactly.
    let shift = 0.5 * (sorted[(n - 1) / 2] + sorted[n / 2]);
    Ok(cdf_diff.iter().map(|g| (g - shift).abs()).sum::<f64>() * h)
}

/// Diagnostic report from the entropic 2d transport approximation.
#[derive(Debug, Clone, Serialize)]
pub struct EntropicW1 {
    /// Transport cost of the entropic plan (upper-biased by roughly the
    /// regularization scale; declared accuracy about 1e-3 on unit-diameter
    /// grids).
    pub value: f64,
    pub epsilon: f64,
    pub marginal_error: f64,
    pub iterations: usize,
}

/// Entropic (Sinkhorn) approximation of W1 for 2d grids. Diagnostic only:
/// the solver's convergence metric always runs through the exact 1d path.
pub fn w1_entropic(mu: &GridMeasure, nu: &GridMeasure, epsilon: f64) -> Result<EntropicW1> {
    mu.grid().check_same(&nu.grid())?;
    let grid = mu.grid();
    if grid.dim() != 2 {
        return Err(Error::InvalidInput(
            "entropic W1 is the 2d diagnostic; use w1 for 1d grids".into(),
        ));
    }
    let nodes = grid.num_nodes();
    if nodes > 2048 {
        return Err(Error::InvalidInput(format!(
            "entropic diagnostic is limited to 2048 nodes, got {nodes}"
        )));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidInput(format!(
            "regularization must be positive, got {epsilon}"
        )));
    }
    // Dense ground cost: geodesic distance between node pairs.
    let mut cost = vec![0.0f64; nodes * nodes];
    for i in 0..nodes {
        let xi = grid.node(i);
        for j in 0..nodes {
            cost[i * nodes + j] = distance(xi, grid.node(j), 2);
        }
    }
    let log_mu: Vec<f64> = mu.weights().iter().map(|w| w.max(1e-300).ln()).collect();
    let log_nu: Vec<f64> = nu.weights().iter().map(|w| w.max(1e-300).ln()).collect();
    let mut f = vec![0.0f64; nodes];
    let mut g = vec![0.0f64; nodes];
    let max_iter = 2000;
    let mut iterations = 0;
    // Log-domain Sinkhorn with a short epsilon-annealing schedule.
    for (stage, &eps) in [8.0 * epsilon, 3.0 * epsilon, epsilon].iter().enumerate() {
        let iters = if stage == 2 { max_iter } else { 200 };
        for _ in 0..iters {
            iterations += 1;
            for i in 0..nodes {
                let mut m = f64::NEG_INFINITY;
                for j in 0..nodes {
                    m = m.max(log_nu[j] + (g[j] - cost[i * nodes + j]) / eps);
                }
                let mut s = 0.0;
                for j in 0..nodes {
                    s += (log_nu[j] + (g[j] - cost[i * nodes + j]) / eps - m).exp();
                }
                f[i] = -eps * (m + s.ln());
            }
            let mut worst = 0.0f64;
            for j in 0..nodes {
                let mut m = f64::NEG_INFINITY;
                for i in 0..nodes {
                    m = m.max(log_mu[i] + (f[i] - cost[i * nodes + j]) / eps);
                }
                let mut s = 0.0;
                for i in 0..nodes {
                    s += (log_mu[i] + (f[i] - cost[i * nodes + j]) / eps - m).exp();
                }
                let new_g = -eps * (m + s.ln());
                worst = worst.max((new_g - g[j]).abs());
                g[j] = new_g;
            }
            if stage == 2 && worst < epsilon * 1e-4 {
                break;
            }
        }
    }
    // Transport cost of the entropic plan and its row-marginal defect.
    let mut value = 0.0;
    let mut marginal_error = 0.0f64;
    for i in 0..nodes {
        let mut row_mass = 0.0;
        for j in 0..nodes {
            let c = cost[i * nodes + j];
            let pi = (log_mu[i] + log_nu[j] + (f[i] + g[j] - c) / epsilon).exp();
            value += pi * c;
            row_mass += pi;
        }
        marginal_error = marginal_error.max((row_mass - mu.weight(i)).abs());
    }
    Ok(EntropicW1 {
        value,
        epsilon,
        marginal_error,
        iterations,
    })
}

/// Damped mixture `(1 - theta) * mu + theta * nu`, the Picard update step.
pub fn convex_combination(mu: &GridMeasure, nu: &GridMeasure, theta: f64) -> Result<GridMeasure> {
    mu.grid().check_same(&nu.grid())?;
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidInput(format!(
            "mixing parameter must lie in [0, 1], got {theta}"
        )));
    }
    let weights = mu
        .weights()
        .iter()
        .zip(nu.weights())
        .map(|(a, b)| (1.0 - theta) * a + theta * b)
        .collect();
    GridMeasure::normalized(mu.grid(), weights)
}

/// Weighted particle cloud on the torus (equal weights `1/P`).
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    dim: usize,
    positions: Vec<Point>,
}

pub const MIN_PARTICLES: usize = 100;

impl ParticleEnsemble {
    pub fn new(dim: usize, positions: Vec<Point>) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidInput(format!("bad ensemble dimension {dim}")));
        }
        if positions.len() < MIN_PARTICLES {
            return Err(Error::InvalidInput(format!(
                "ensemble needs at least {MIN_PARTICLES} particles, got {}",
                positions.len()
            )));
        }
        let positions = positions.into_iter().map(|p| wrap_point(p, dim)).collect();
        Ok(ParticleEnsemble { dim, positions })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[inline]
    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    #[inline]
    pub fn weight(&self) -> f64 {
        1.0 / self.positions.len() as f64
    }
}

/// Bandwidth of the triangular binning kernel, in units of the grid spacing.
pub const DENSITY_BANDWIDTH_CELLS: f64 = 2.0;

/// Deposits a particle cloud onto the grid with a periodic triangular kernel
/// of bandwidth `2h`. Each particle's stencil is normalized before
/// depositing, so total mass is conserved exactly up to a final
/// renormalization.
pub fn kernel_density(particles: &ParticleEnsemble, grid: TorusGrid) -> Result<GridMeasure> {
    if particles.is_empty() {
        return Err(Error::InvalidInput("empty particle ensemble".into()));
    }
    if particles.dim() != grid.dim() {
        return Err(Error::InvalidInput(format!(
            "ensemble dimension {} does not match grid dimension {}",
            particles.dim(),
            grid.dim()
        )));
    }
    let n = grid.n();
    let h = grid.spacing();
    let bandwidth = DENSITY_BANDWIDTH_CELLS * h;
    let reach = DENSITY_BANDWIDTH_CELLS.ceil() as i64;
    let mut weights = vec![0.0f64; grid.num_nodes()];
    let w_particle = particles.weight();
    let dim = grid.dim();
    // Stencil buffer: (flat node, kernel value).
    let mut stencil: Vec<(usize, f64)> =
        Vec::with_capacity((2 * reach as usize + 2).pow(dim as u32));
    for &pos in particles.positions() {
        stencil.clear();
        let mut total = 0.0;
        match dim {
            1 => {
                let base = (wrap(pos[0]) * n as f64).floor() as i64;
                for o in -reach..=reach + 1 {
                    let idx = (base + o).rem_euclid(n as i64) as usize;
                    let d = axis_displacement(pos[0], idx as f64 * h).abs();
                    let k = (1.0 - d / bandwidth).max(0.0);
                    if k > 0.0 {
                        stencil.push((idx, k));
                        total += k;
                    }
                }
            }
            _ => {
                let bx = (wrap(pos[0]) * n as f64).floor() as i64;
                let by = (wrap(pos[1]) * n as f64).floor() as i64;
                for ox in -reach..=reach + 1 {
                    let ix = (bx + ox).rem_euclid(n as i64) as usize;
                    let dx = axis_displacement(pos[0], ix as f64 * h).abs();
                    let kx = (1.0 - dx / bandwidth).max(0.0);
                    if kx <= 0.0 {
                        continue;
                    }
                    for oy in -reach..=reach + 1 {
                        let iy = (by + oy).rem_euclid(n as i64) as usize;
                        let dy = axis_displacement(pos[1], iy as f64 * h).abs();
                        let k = kx * (1.0 - dy / bandwidth).max(0.0);
                        if k > 0.0 {
                            stencil.push((grid.flat_index([ix, iy]), k));
                            total += k;
                        }
                    }
                }
            }
        }
        for &(idx, k) in &stencil {
            weights[idx] += w_particle * k / total;
        }
    }
    GridMeasure::normalized(grid, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::new(1, n).unwrap()
    }

    fn random_measure(g: TorusGrid, rng: &mut StdRng) -> GridMeasure {
        let weights: Vec<f64> = (0..g.num_nodes())
            .map(|_| rng.random::<f64>() + 0.01)
            .collect();
        GridMeasure::normalized(g, weights).unwrap()
    }

    /// Independent oracle for the circular W1: split both measures into equal
    /// atoms and take the best cyclic-order-preserving matching over all
    /// rotations.
    fn w1_brute_force(mu: &GridMeasure, nu: &GridMeasure, atoms_per_unit: usize) -> f64 {
        let g = mu.grid();
        let mut a: Vec<f64> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        for i in 0..g.num_nodes() {
            let x = g.node(i)[0];
            let ka = (mu.weight(i) * atoms_per_unit as f64).round() as usize;
            let kb = (nu.weight(i) * atoms_per_unit as f64).round() as usize;
            a.extend(std::iter::repeat_n(x, ka));
            b.extend(std::iter::repeat_n(x, kb));
        }
        assert_eq!(a.len(), b.len(), "oracle needs commensurable weights");
        let m = a.len();
        let mut best = f64::INFINITY;
        for r in 0..m {
            let cost: f64 = (0..m)
                .map(|i| axis_displacement(a[i], b[(i + r) % m]).abs())
                .sum();
            best = best.min(cost / m as f64);
        }
        best
    }

    #[test]
    fn grid_invariants() {
        assert!(TorusGrid::new(1, 4).is_err());
        assert!(TorusGrid::new(3, 32).is_err());
        let g = TorusGrid::new(2, 16).unwrap();
        assert_eq!(g.num_nodes(), 256);
        assert_eq!(g.flat_index(g.multi_index(137)), 137);
    }

    #[test]
    fn w1_identical_measures_is_zero() {
        let g = grid(64);
        let mut rng = StdRng::seed_from_u64(3);
        let mu = random_measure(g, &mut rng);
        assert_eq!(w1(&mu, &mu).unwrap(), 0.0);
    }

    #[test]
    fn w1_antipodal_diracs() {
        let g = grid(64);
        let mu = GridMeasure::dirac(g, [0.0, 0.0]);
        let nu = GridMeasure::dirac(g, [0.5, 0.0]);
        assert!((w1(&mu, &nu).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn w1_wraparound_geodesic() {
        // delta at 0 vs delta at 3/4: the short way goes through 1 == 0.
        let g = grid(16);
        let mu = GridMeasure::dirac(g, [0.0, 0.0]);
        let nu = GridMeasure::dirac(g, [0.75, 0.0]);
        let d = w1(&mu, &nu).unwrap();
        assert!((d - 0.25).abs() < 1e-14);
        let oracle = w1_brute_force(&mu, &nu, 16);
        assert!((d - oracle).abs() < 1e-12);
    }

    #[test]
    fn w1_matches_brute_force_assignment() {
        let g = grid(16);
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..5 {
            // Commensurable random weights (multiples of 1/64).
            let raw: Vec<usize> = (0..16).map(|_| rng.random_range(0..9usize)).collect();
            let total: usize = raw.iter().sum();
            let mu = GridMeasure::new(g, raw.iter().map(|&k| k as f64 / total as f64).collect());
            let mu = match mu {
                Ok(m) => m,
                Err(_) => continue, // all-zero draw
            };
            let raw2: Vec<usize> = (0..16).map(|_| rng.random_range(0..9usize)).collect();
            let total2: usize = raw2.iter().sum();
            let nu =
                match GridMeasure::new(g, raw2.iter().map(|&k| k as f64 / total2 as f64).collect())
                {
                    Ok(m) => m,
                    Err(_) => continue,
                };
            // Renormalize atoms to a common count for the matching oracle.
            let atoms = total * total2;
            let exact = w1(&mu, &nu).unwrap();
            let oracle = w1_brute_force(&mu, &nu, atoms);
            assert!(
                (exact - oracle).abs() < 1e-10,
                "exact {exact} vs assignment oracle {oracle}"
            );
        }
    }

    #[test]
    fn w1_metric_axioms_on_sampled_triples() {
        let g = grid(32);
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..25 {
            let a = random_measure(g, &mut rng);
            let b = random_measure(g, &mut rng);
            let c = random_measure(g, &mut rng);
            let dab = w1(&a, &b).unwrap();
            let dba = w1(&b, &a).unwrap();
            assert_eq!(dab, dba, "symmetry must be exact");
            let dac = w1(&a, &c).unwrap();
            let dcb = w1(&c, &b).unwrap();
            assert!(dab <= dac + dcb + 1e-12, "triangle inequality violated");
            assert!(dab <= 0.5 + 1e-15, "circle diameter bound violated");
        }
    }

    #[test]
    fn w1_rejects_dimension_and_grid_mismatch() {
        let mu = GridMeasure::uniform(grid(32));
        let nu = GridMeasure::uniform(grid(64));
        assert!(matches!(w1(&mu, &nu), Err(Error::InvalidInput(_))));
        let g2 = TorusGrid::new(2, 16).unwrap();
        let a = GridMeasure::uniform(g2);
        assert!(w1(&a, &a).is_err());
    }

    #[test]
    fn entropic_w1_matches_geodesic_for_diracs() {
        let g = TorusGrid::new(2, 12).unwrap();
        let mu = GridMeasure::dirac(g, [0.0, 0.0]);
        let nu = GridMeasure::dirac(g, [0.5, 0.5]);
        let report = w1_entropic(&mu, &nu, 2e-3).unwrap();
        let exact = 0.5f64.hypot(0.5);
        assert!(
            (report.value - exact).abs() < 1e-3,
            "entropic {} vs exact {exact}",
            report.value
        );
    }

    #[test]
    fn interp_constant_and_knots() {
        let g = grid(32);
        let f = GridField::constant(g, 2.5);
        assert_eq!(f.interp([0.1234, 0.0]), 2.5);
        let f = GridField::from_fn(g, |p| (13.0 * p[0]).cos());
        for i in 0..g.num_nodes() {
            assert_eq!(f.interp(g.node(i)), f.value(i));
        }
    }

    #[test]
    fn interp_linear_error_bound_for_sine() {
        let g = grid(256);
        let f = GridField::from_fn(g, |p| (2.0 * std::f64::consts::PI * p[0]).sin());
        let x = 0.1234;
        let exact = (2.0 * std::f64::consts::PI * x).sin();
        assert!((f.interp([x, 0.0]) - exact).abs() < 1e-3);
    }

    #[test]
    fn interp_bilinear_2d() {
        let g = TorusGrid::new(2, 16).unwrap();
        let f = GridField::from_fn(g, |p| 1.0 + 0.5 * p[0] + 0.25 * p[1]);
        // Multilinear interpolation reproduces affine data away from the wrap.
        let v = f.interp([0.4, 0.3]);
        assert!((v - (1.0 + 0.2 + 0.075)).abs() < 1e-12);
    }

    #[test]
    fn convex_combination_endpoints_and_mixture() {
        let g = grid(16);
        let mu = GridMeasure::dirac(g, [0.0, 0.0]);
        let nu = GridMeasure::dirac(g, [0.5, 0.0]);
        let at0 = convex_combination(&mu, &nu, 0.0).unwrap();
        let at1 = convex_combination(&mu, &nu, 1.0).unwrap();
        assert_eq!(at0.weights(), mu.weights());
        assert_eq!(at1.weights(), nu.weights());
        let mid = convex_combination(&mu, &nu, 0.5).unwrap();
        assert!((mid.weight(0) - 0.5).abs() < 1e-15);
        assert!((mid.weight(8) - 0.5).abs() < 1e-15);
        assert!(convex_combination(&mu, &nu, 1.5).is_err());
    }

    #[test]
    fn convex_combination_contracts_w1() {
        let g = grid(32);
        let mut rng = StdRng::seed_from_u64(19);
        for _ in 0..20 {
            let mu = random_measure(g, &mut rng);
            let nu = random_measure(g, &mut rng);
            let theta: f64 = rng.random();
            let mix = convex_combination(&mu, &nu, theta).unwrap();
            let lhs = w1(&mix, &mu).unwrap();
            let rhs = theta * w1(&nu, &mu).unwrap();
            assert!(lhs <= rhs + 1e-12, "W1 convexity violated: {lhs} > {rhs}");
        }
    }

    #[test]
    fn density_single_site() {
        let g = grid(64);
        let positions = vec![[g.node(10)[0], 0.0]; 128];
        let ens = ParticleEnsemble::new(1, positions).unwrap();
        let m = kernel_density(&ens, g).unwrap();
        let total: f64 = m.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for i in 0..64 {
            let cells = (i as i64 - 10)
                .rem_euclid(64)
                .min((10i64 - i as i64).rem_euclid(64));
            if cells > 2 {
                assert_eq!(m.weight(i), 0.0, "weight leaked to node {i}");
            }
        }
    }

    #[test]
    fn density_of_node_lattice_is_uniform() {
        let g = grid(32);
        // 4 particles per node, exactly on the lattice.
        let mut positions = Vec::new();
        for _ in 0..4 {
            for i in 0..32 {
                positions.push([g.node(i)[0], 0.0]);
            }
        }
        let ens = ParticleEnsemble::new(1, positions).unwrap();
        let m = kernel_density(&ens, g).unwrap();
        for i in 0..32 {
            assert!((m.weight(i) - 1.0 / 32.0).abs() < 1e-12);
        }
    }

    #[test]
    fn density_monte_carlo_uniform_deviation() {
        let g = grid(64);
        let mut rng = StdRng::seed_from_u64(42);
        let positions: Vec<Point> = (0..10_000).map(|_| [rng.random::<f64>(), 0.0]).collect();
        let ens = ParticleEnsemble::new(1, positions).unwrap();
        let m = kernel_density(&ens, g).unwrap();
        let worst = (0..64)
            .map(|i| (m.density(i) - 1.0).abs())
            .fold(0.0f64, f64::max);
        assert!(worst <= 0.15, "sup density deviation {worst} > 0.15");
    }

    #[test]
    fn density_rejects_empty_and_mismatched() {
        let g = grid(16);
        assert!(ParticleEnsemble::new(1, vec![]).is_err());
        let g2 = TorusGrid::new(2, 16).unwrap();
        let ens = ParticleEnsemble::new(2, vec![[0.1, 0.2]; 128]).unwrap();
        assert!(kernel_density(&ens, g).is_err());
        assert!(kernel_density(&ens, g2).is_ok());
    }

    #[test]
    fn measure_validation() {
        let g = grid(8);
        assert!(GridMeasure::new(g, vec![0.2; 8]).is_err()); // mass 1.6
        assert!(GridMeasure::new(g, vec![-0.1, 1.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        let ok = GridMeasure::new(g, vec![0.125; 8]).unwrap();
        assert_eq!(ok.density(3), 1.0);
    }
}
