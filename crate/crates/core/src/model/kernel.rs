//! Coupling kernels for the mechanical family.

use crate::error::{Error, Result};
use crate::torus::{wrap, TorusGrid};
use std::f64::consts::TAU;

/// Tabulated kernel values `k(x_i, y_j)` on an `n × n` node lattice,
/// row-major in `i`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub n: usize,
    pub values: Vec<f64>,
}

impl KernelTable {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n < 2 || values.len() != n * n {
            return Err(Error::InvalidConfig(format!(
                "kernel table must be n x n with n >= 2; got n={n}, {} values",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "kernel table holds a non-finite value {v}"
            )));
        }
        Ok(KernelTable { n, values })
    }
}

/// Continuous kernel `k: T x T -> R` defining the coupling cost
/// `F(x, m) = ∫ k(x, y) m(dy)`.
#[derive(Debug, Clone)]
pub enum CouplingKernel {
    /// `scale · (1 − cos 2πx)(1 + ½ cos 2πy)`; vanishes on `{x = 0}` and is
    /// positive elsewhere, so the origin is the unique rest point.
    Builtin { scale: f64 },
    /// Tabulated values with periodic bilinear interpolation.
    Tabulated { table: KernelTable, scale: f64 },
}

impl CouplingKernel {
    pub fn builtin(scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "kernel scale must be a nonnegative number, got {scale}"
            )));
        }
        Ok(CouplingKernel::Builtin { scale })
    }

    pub fn tabulated(table: KernelTable, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "kernel scale must be a nonnegative number, got {scale}"
            )));
        }
        Ok(CouplingKernel::Tabulated { table, scale })
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            CouplingKernel::Builtin { scale } => {
                scale * (1.0 - (TAU * x).cos()) * (1.0 + 0.5 * (TAU * y).cos())
            }
            CouplingKernel::Tabulated { table, scale } => {
                let n = table.n;
                let nf = n as f64;
                let sx = wrap(x) * nf;
                let sy = wrap(y) * nf;
                let ix = sx.floor() as usize % n;
                let iy = sy.floor() as usize % n;
                let tx = sx - sx.floor();
                let ty = sy - sy.floor();
                let jx = (ix + 1) % n;
                let jy = (iy + 1) % n;
                let at = |i: usize, j: usize| table.values[i * n + j];
                scale
                    * ((1.0 - tx) * (1.0 - ty) * at(ix, iy)
                        + tx * (1.0 - ty) * at(jx, iy)
                        + (1.0 - tx) * ty * at(ix, jy)
                        + tx * ty * at(jx, jy))
            }
        }
    }

    /// Checks the rest-point structure required of Example-style mechanical
    /// couplings on the grid nodes: `k(0, y) = 0` exactly and `k(x, y) > 0`
    /// for `x ≠ 0`. Returns the violations; an empty list means the model
    /// keeps the origin as its unique zero-cost point for every measure.
    pub fn mechanical_role_violations(&self, grid: TorusGrid) -> Vec<String> {
        let mut out = Vec::new();
        let n = grid.n();
        for j in 0..n {
            let y = j as f64 / n as f64;
            let k0 = self.eval(0.0, y);
            if k0 != 0.0 {
                out.push(format!("k(0, {y}) = {k0}, expected exactly 0"));
                break;
            }
        }
        'outer: for i in 1..n {
            let x = i as f64 / n as f64;
            for j in 0..n {
                let y = j as f64 / n as f64;
                let k = self.eval(x, y);
                if k <= 0.0 {
                    out.push(format!("k({x}, {y}) = {k}, expected > 0"));
                    break 'outer;
                }
            }
        }
        out
    }

    /// Nonnegativity on the nodes (required for a mechanical coupling cost).
    pub fn nonnegative_on(&self, grid: TorusGrid) -> Result<()> {
        let n = grid.n();
        for i in 0..n {
            for j in 0..n {
                let k = self.eval(i as f64 / n as f64, j as f64 / n as f64);
                if k < 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "kernel is negative at nodes ({i}, {j}): {k}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_vanishes_on_the_zero_section() {
        let k = CouplingKernel::builtin(1.0).unwrap();
        for j in 0..16 {
            assert_eq!(k.eval(0.0, j as f64 / 16.0), 0.0);
        }
        assert!(k.eval(0.25, 0.6) > 0.0);
        let grid = TorusGrid::new(1, 32).unwrap();
        assert!(k.mechanical_role_violations(grid).is_empty());
    }

    #[test]
    fn tabulated_interpolates_periodically() {
        // Tabulate k(x, y) = 1 - cos 2π(x - y) on 16 nodes.
        let n = 16;
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let d = (i as f64 - j as f64) / n as f64;
                values.push(1.0 - (TAU * d).cos());
            }
        }
        let k = CouplingKernel::tabulated(KernelTable::new(n, values).unwrap(), 1.0).unwrap();
        assert!((k.eval(0.5, 0.0) - 2.0).abs() < 1e-12);
        // Exact at nodes, periodic across the wrap.
        assert!((k.eval(15.0 / 16.0, 0.0) - k.eval(-1.0 / 16.0, 0.0)).abs() < 1e-12);
        // This kernel moves its zero set with y, so it fails the role check.
        let grid = TorusGrid::new(1, 16).unwrap();
        assert!(!k.mechanical_role_violations(grid).is_empty());
    }
}
