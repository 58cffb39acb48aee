//! Measure-dependent Hamiltonian models.
//!
//! Every model family implements the [`Hamiltonian`] trait and is registered
//! by name in a [`FamilyRegistry`]; configuration files select the family at
//! runtime. Built-ins:
//!
//! * `mechanical` — kinetic energy minus a nonnegative coupling cost
//!   `F(x, m) = ∫ k(x, y) m(dy)`, with a closed-form Legendre pair;
//! * `scaled-separable` — `F(m) · (|p|²/2 − V(x))` with a measure-dependent
//!   positive scale;
//! * `tabulated` — user-supplied grid values of `H(x, p)` with periodic/linear
//!   interpolation and a numeric Legendre transform.
//!
//! Sign conventions used throughout: the ergodic equation is
//! `H(x, Du, m) + alpha = 0`, so the reported critical value is
//! `alpha = −inf_u sup_x H(x, Du, m)`.

mod constants;
mod families;
mod kernel;
mod legendre;
mod validate;

pub use constants::{default_measure_samples, estimate_constants, ModelConstants};
pub use families::{CustomHamiltonian, Mechanical, ScaledSeparable, Tabulated};
pub use kernel::{CouplingKernel, KernelTable};
pub use legendre::legendre_transform;
pub use validate::{validate_tonelli, CheckResult, TonelliReport};

use crate::error::{Error, Result};
use crate::torus::{GridMeasure, Point, Vector, MAX_DIM};
use std::collections::BTreeMap;

/// Finite-difference step scale for momentum gradients of custom models.
pub(crate) const FD_STEP: f64 = 1e-5;

/// A Tonelli Hamiltonian depending on a grid measure, together with its
/// Legendre-dual Lagrangian.
///
/// Implementations must be pure: all methods are `&self` and safe to call
/// concurrently. Points use fixed-size arrays with the model's `dim()`
/// leading components meaningful.
pub trait Hamiltonian: Send + Sync {
    fn dim(&self) -> usize;

    fn family_name(&self) -> &str;

    /// `H(x, p, m)`.
    fn hamiltonian(&self, x: Point, p: Vector, m: &GridMeasure) -> f64;

    /// `L(x, v, m) = sup_p ⟨p, v⟩ − H(x, p, m)`.
    ///
    /// Families without a closed form run a bounded numeric search and fail
    /// with [`Error::GradientRadiusExceeded`] when the supremum escapes it.
    fn lagrangian(&self, x: Point, v: Vector, m: &GridMeasure) -> Result<f64> {
        let (value, _) = legendre::legendre_transform(
            &|p| self.hamiltonian(x, p, m),
            v,
            self.dim(),
            self.legendre_radius(),
        )?;
        Ok(value)
    }

    /// `D_p H(x, p, m)`, the drift direction of the continuity equation.
    fn grad_p(&self, x: Point, p: Vector, m: &GridMeasure) -> Vector {
        let mut out = [0.0; MAX_DIM];
        let step = FD_STEP * (1.0 + crate::torus::norm(p, self.dim()));
        for axis in 0..self.dim() {
            let mut hi = p;
            let mut lo = p;
            hi[axis] += step;
            lo[axis] -= step;
            out[axis] = (self.hamiltonian(x, hi, m) - self.hamiltonian(x, lo, m)) / (2.0 * step);
        }
        out
    }

    /// `D_v L(x, v, m)`: the momentum achieving the Legendre supremum. This
    /// is the co-state attached to dynamic-programming minimizers.
    fn grad_v_lagrangian(&self, x: Point, v: Vector, m: &GridMeasure) -> Result<Vector> {
        let (_, p) = legendre::legendre_transform(
            &|p| self.hamiltonian(x, p, m),
            v,
            self.dim(),
            self.legendre_radius(),
        )?;
        Ok(p)
    }

    /// Coupling cost `F(x, m)`; only the mechanical family exposes one.
    fn coupling(&self, _x: Point, _m: &GridMeasure) -> Result<f64> {
        Err(Error::UnsupportedFamily {
            required: "mechanical",
            actual: self.family_name().to_string(),
        })
    }

    /// Momentum search bound for numeric Legendre transforms.
    fn legendre_radius(&self) -> f64 {
        20.0
    }

    /// Downcast hook for mechanical-specific validation.
    fn as_mechanical(&self) -> Option<&Mechanical> {
        None
    }

    /// Measure-frozen Lagrangian evaluator for assembling transition-cost
    /// tables. Families with expensive couplings precompute measure moments
    /// here; the default just forwards.
    fn frozen<'a>(&'a self, m: &'a GridMeasure) -> Box<dyn FrozenLagrangian + 'a>
    where
        Self: Sized,
    {
        Box::new(ForwardingFrozen { model: self, m })
    }

    /// Slice-based checked evaluation for boundary layers (CLI, tests).
    fn eval_checked(&self, x: &[f64], p: &[f64], m: &GridMeasure) -> Result<f64> {
        if x.len() != self.dim() || p.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "expected {}-dimensional point and momentum, got {} and {}",
                self.dim(),
                x.len(),
                p.len()
            )));
        }
        if m.grid().dim() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "measure lives on a {}d grid but the model is {}d",
                m.grid().dim(),
                self.dim()
            )));
        }
        let mut xp = [0.0; MAX_DIM];
        let mut pp = [0.0; MAX_DIM];
        xp[..x.len()].copy_from_slice(x);
        pp[..p.len()].copy_from_slice(p);
        Ok(self.hamiltonian(xp, pp, m))
    }
}

/// Lagrangian with the measure argument frozen; used by the DP cost builder.
pub trait FrozenLagrangian: Sync {
    fn lagrangian(&self, x: Point, v: Vector) -> Result<f64>;
    fn grad_v(&self, x: Point, v: Vector) -> Result<Vector>;

    /// `D_x L`, the force along extremals (`d/dt D_v L = D_x L`). Needed to
    /// shift midpoint momenta to segment endpoints. Default: central
    /// differences.
    fn grad_x(&self, x: Point, v: Vector) -> Result<Vector> {
        let mut out = [0.0; MAX_DIM];
        for (axis, slot) in out.iter_mut().enumerate() {
            let mut hi = x;
            let mut lo = x;
            hi[axis] = crate::torus::wrap(x[axis] + FD_STEP);
            lo[axis] = crate::torus::wrap(x[axis] - FD_STEP);
            *slot = (self.lagrangian(hi, v)? - self.lagrangian(lo, v)?) / (2.0 * FD_STEP);
        }
        Ok(out)
    }
}

struct ForwardingFrozen<'a, M: Hamiltonian> {
    model: &'a M,
    m: &'a GridMeasure,
}

impl<M: Hamiltonian> FrozenLagrangian for ForwardingFrozen<'_, M> {
    fn lagrangian(&self, x: Point, v: Vector) -> Result<f64> {
        self.model.lagrangian(x, v, self.m)
    }

    fn grad_v(&self, x: Point, v: Vector) -> Result<Vector> {
        self.model.grad_v_lagrangian(x, v, self.m)
    }
}

/// Helper to freeze a model behind a trait object.
pub fn frozen<'a>(
    model: &'a dyn Hamiltonian,
    m: &'a GridMeasure,
) -> Box<dyn FrozenLagrangian + 'a> {
    Box::new(DynForwardingFrozen { model, m })
}

struct DynForwardingFrozen<'a> {
    model: &'a dyn Hamiltonian,
    m: &'a GridMeasure,
}

impl FrozenLagrangian for DynForwardingFrozen<'_> {
    fn lagrangian(&self, x: Point, v: Vector) -> Result<f64> {
        self.model.lagrangian(x, v, self.m)
    }

    fn grad_v(&self, x: Point, v: Vector) -> Result<Vector> {
        self.model.grad_v_lagrangian(x, v, self.m)
    }
}

/// Language-agnostic model description parsed from configuration.
#[derive(Debug, Clone, Default)]
pub struct ModelSpec {
    pub family: String,
    pub dim: usize,
    /// Scalar parameters, e.g. `kernel.scale`, `f0`, `f_cos`, `v0`.
    pub params: BTreeMap<String, f64>,
    /// Tabulated coupling kernel `k(x_i, y_j)`, row-major.
    pub kernel_table: Option<KernelTable>,
    /// Tabulated Hamiltonian values for the `tabulated` family.
    pub hamiltonian_table: Option<HamiltonianTable>,
}

impl ModelSpec {
    pub fn builtin_mechanical(scale: f64) -> Self {
        let mut params = BTreeMap::new();
        params.insert("kernel.scale".to_string(), scale);
        ModelSpec {
            family: "mechanical".into(),
            dim: 1,
            params,
            ..Default::default()
        }
    }

    pub fn builtin_scaled_separable() -> Self {
        ModelSpec {
            family: "scaled-separable".into(),
            dim: 1,
            ..Default::default()
        }
    }

    pub fn param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }
}

/// Tabulated Hamiltonian: `values[i * p_samples + j] = H(x_i, p_j)` with
/// `x_i = i / x_nodes` periodic and `p_j` uniform on `[-p_max, p_max]`.
#[derive(Debug, Clone)]
pub struct HamiltonianTable {
    pub x_nodes: usize,
    pub p_samples: usize,
    pub p_max: f64,
    pub values: Vec<f64>,
}

type BuildFn = Box<dyn Fn(&ModelSpec) -> Result<Box<dyn Hamiltonian>> + Send + Sync>;

/// Runtime registry of model families, keyed by name.
pub struct FamilyRegistry {
    builders: BTreeMap<String, BuildFn>,
}

impl FamilyRegistry {
    /// Registry preloaded with the built-in families.
    pub fn with_builtins() -> Self {
        let mut reg = FamilyRegistry {
            builders: BTreeMap::new(),
        };
        reg.register("mechanical", |spec| {
            Ok(Box::new(Mechanical::from_spec(spec)?) as Box<dyn Hamiltonian>)
        });
        reg.register("scaled-separable", |spec| {
            Ok(Box::new(ScaledSeparable::from_spec(spec)?) as Box<dyn Hamiltonian>)
        });
        reg.register("tabulated", |spec| {
            Ok(Box::new(Tabulated::from_spec(spec)?) as Box<dyn Hamiltonian>)
        });
        reg
    }

    pub fn register(
        &mut self,
        name: &str,
        build: impl Fn(&ModelSpec) -> Result<Box<dyn Hamiltonian>> + Send + Sync + 'static,
    ) {
        self.builders.insert(name.to_string(), Box::new(build));
    }

    pub fn build(&self, spec: &ModelSpec) -> Result<Box<dyn Hamiltonian>> {
        match self.builders.get(&spec.family) {
            Some(b) => b(spec),
            None => Err(Error::InvalidConfig(format!(
                "unknown model family '{}'; known: {}",
                spec.family,
                self.names().join(", ")
            ))),
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.builders.keys().map(|s| s.as_str()).collect()
    }
}
