//! Per-measure transition-cost kernel for the discrete Lax–Oleinik step.

use super::LaxOleinikParams;
use crate::error::{Error, Result};
use crate::model::Hamiltonian;
use crate::torus::{wrap, GridMeasure, Point, TorusGrid, Vector, MAX_DIM};
use std::collections::BTreeMap;

/// One Lax–Oleinik application: updated values and, per node, the source
/// node realizing the minimum.
#[derive(Debug, Clone)]
pub struct LoStep {
    pub values: Vec<f64>,
    pub backlink: Vec<u32>,
}

/// Frozen transition costs for one `(measure, grid, dtau, radius)` tuple:
/// `cost(z -> z + o) = dtau · L(mid(z, z+o), o·h/dtau, m)`.
///
/// The Lagrangian is sampled at the segment midpoint, which upgrades the
/// time quadrature from first to second order and preserves the mirror
/// symmetry of symmetric models; sampling at the segment start biases long
/// transits by `O(dtau)`, which is visible against closed-form barriers.
pub struct StepKernel {
    grid: TorusGrid,
    dtau: f64,
    offsets: Vec<[i64; MAX_DIM]>,
    velocities: Vec<Vector>,
    /// Row-major `[offset][source node]`.
    cost: Vec<f64>,
    offset_lookup: BTreeMap<[i64; MAX_DIM], usize>,
    measure: GridMeasure,
}

impl StepKernel {
    pub(super) fn build(
        model: &dyn Hamiltonian,
        grid: TorusGrid,
        params: &LaxOleinikParams,
        m: &GridMeasure,
    ) -> Result<StepKernel> {
        params.validate(grid)?;
        if m.grid() != grid {
            return Err(Error::InvalidInput(
                "measure grid does not match the engine grid".into(),
            ));
        }
        if model.dim() != grid.dim() {
            return Err(Error::InvalidInput(format!(
                "model dimension {} does not match grid dimension {}",
                model.dim(),
                grid.dim()
            )));
        }
        let n = grid.n() as i64;
        let h = grid.spacing();
        let reach = ((params.search_radius / h).floor() as i64).min((n - 1) / 2);
        let mut offsets = Vec::new();
        match grid.dim() {
            1 => {
                for o in -reach..=reach {
                    offsets.push([o, 0]);
                }
            }
            _ => {
                for oy in -reach..=reach {
                    for ox in -reach..=reach {
                        let d2 = (ox * ox + oy * oy) as f64 * h * h;
                        if d2.sqrt() <= params.search_radius {
                            offsets.push([ox, oy]);
                        }
                    }
                }
            }
        }
        let velocities: Vec<Vector> = offsets
            .iter()
            .map(|o| {
                let mut v = [0.0; MAX_DIM];
                for a in 0..grid.dim() {
                    v[a] = o[a] as f64 * h / params.dtau;
                }
                v
            })
            .collect();
        let nodes = grid.num_nodes();
        let frozen = crate::model::frozen(model, m);
        let mut cost = vec![0.0f64; offsets.len() * nodes];
        for (k, (&off, &v)) in offsets.iter().zip(&velocities).enumerate() {
            let row = &mut cost[k * nodes..(k + 1) * nodes];
            for (src, slot) in row.iter_mut().enumerate() {
                let z = grid.node(src);
                let mut mid: Point = [0.0; MAX_DIM];
                for a in 0..grid.dim() {
                    mid[a] = wrap(z[a] + 0.5 * off[a] as f64 * h);
                }
                *slot = params.dtau * frozen.lagrangian(mid, v)?;
            }
        }
        let offset_lookup = offsets.iter().enumerate().map(|(k, &o)| (o, k)).collect();
        Ok(StepKernel {
            grid,
            dtau: params.dtau,
            offsets,
            velocities,
            cost,
            offset_lookup,
            measure: m.clone(),
        })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }

    pub fn measure(&self) -> &GridMeasure {
        &self.measure
    }

    pub fn num_offsets(&self) -> usize {
        self.offsets.len()
    }

    /// One inf-convolution step:
    /// `u'(y) = min over reachable z of [u(z) + cost(z -> y)]`.
    ///
    /// Monotone in `u` and equivariant under adding constants. On exact ties
    /// the earliest offset in scan order wins, which keeps runs bit-stable.
    pub fn lo_step(&self, u: &[f64]) -> LoStep {
        debug_assert_eq!(u.len(), self.grid.num_nodes());
        match self.grid.dim() {
            1 => self.lo_step_1d(u),
            _ => self.lo_step_2d(u),
        }
    }

    fn lo_step_1d(&self, u: &[f64]) -> LoStep {
        let n = self.grid.n();
        let mut values = vec![f64::INFINITY; n];
        let mut backlink = vec![0u32; n];
        for (k, off) in self.offsets.iter().enumerate() {
            let row = &self.cost[k * n..(k + 1) * n];
            let mut src = (-off[0]).rem_euclid(n as i64) as usize;
            for y in 0..n {
                let c = u[src] + row[src];
                if c < values[y] {
                    values[y] = c;
                    backlink[y] = src as u32;
                }
                src += 1;
                if src == n {
                    src = 0;
                }
            }
        }
        LoStep { values, backlink }
    }

    fn lo_step_2d(&self, u: &[f64]) -> LoStep {
        let n = self.grid.n();
        let nodes = n * n;
        let mut values = vec![f64::INFINITY; nodes];
        let mut backlink = vec![0u32; nodes];
        for (k, off) in self.offsets.iter().enumerate() {
            let row = &self.cost[k * nodes..(k + 1) * nodes];
            for ty in 0..n {
                let sy = (ty as i64 - off[1]).rem_euclid(n as i64) as usize;
                let trow = ty * n;
                let srow = sy * n;
                let mut sx = (-off[0]).rem_euclid(n as i64) as usize;
                for tx in 0..n {
                    let src = srow + sx;
                    let y = trow + tx;
                    let c = u[src] + row[src];
                    if c < values[y] {
                        values[y] = c;
                        backlink[y] = src as u32;
                    }
                    sx += 1;
                    if sx == n {
                        sx = 0;
                    }
                }
            }
        }
        LoStep { values, backlink }
    }

    /// Cost of the single step `src -> dst`, if `dst` is reachable within the
    /// search radius.
    pub fn transition_cost(&self, src: usize, dst: usize) -> Option<f64> {
        let k = self.offset_index(src, dst)?;
        Some(self.cost[k * self.grid.num_nodes() + src])
    }

    /// Velocity of the step `src -> dst` (shortest displacement over dtau).
    pub fn transition_velocity(&self, src: usize, dst: usize) -> Option<Vector> {
        let k = self.offset_index(src, dst)?;
        Some(self.velocities[k])
    }

    fn offset_index(&self, src: usize, dst: usize) -> Option<usize> {
        let n = self.grid.n() as i64;
        let si = self.grid.multi_index(src);
        let di = self.grid.multi_index(dst);
        let mut off = [0i64; MAX_DIM];
        for a in 0..self.grid.dim() {
            let mut d = di[a] as i64 - si[a] as i64;
            // Shortest wrap.
            if d > n / 2 {
                d -= n;
            } else if d < -n / 2 {
                d += n;
            }
            off[a] = d;
        }
        self.offset_lookup.get(&off).copied()
    }

    /// Near-minimizing sources for node `y` given the previous values `u`,
    /// restricted to the smallest displacement among the tied set. Ties
    /// happen at cut loci (mirror pairs, kept and averaged) and on flat
    /// cost cones, where a one-cell move costs exactly the value decrement;
    /// preferring the rest representative there recovers the continuum's
    /// zero drift instead of a half-quantum artifact.
    pub(super) fn tied_sources(&self, u: &[f64], y: usize, tol: f64) -> Vec<usize> {
        let nodes = self.grid.num_nodes();
        let mut best = f64::INFINITY;
        let mut tied: Vec<(usize, i64)> = Vec::new();
        for (k, off) in self.offsets.iter().enumerate() {
            let src = self.source_of(y, k);
            let c = u[src] + self.cost[k * nodes + src];
            let cells = off[0] * off[0] + off[1] * off[1];
            if c < best - tol {
                best = c;
                tied.clear();
                tied.push((src, cells));
            } else if c <= best + tol {
                if c < best {
                    best = c;
                }
                tied.push((src, cells));
            }
        }
        let min_cells = tied.iter().map(|&(_, c)| c).min().unwrap_or(0);
        tied.into_iter()
            .filter(|&(_, c)| c == min_cells)
            .map(|(src, _)| src)
            .collect()
    }

    fn source_of(&self, y: usize, k: usize) -> usize {
        let off = self.offsets[k];
        let neg = [-off[0], -off[1]];
        self.grid.shifted_index(y, neg)
    }
}
