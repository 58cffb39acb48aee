//! Built-in model families.

use super::kernel::CouplingKernel;
use super::{FrozenLagrangian, Hamiltonian, ModelSpec};
use crate::error::{Error, Result};
use crate::torus::{interp_scalar, wrap, GridMeasure, Point, TorusGrid, Vector, MAX_DIM};
use std::f64::consts::TAU;

/// Kinetic energy minus a nonnegative coupling cost:
/// `H(x, p, m) = |p|²/2 − F(x, m)` with `F(x, m) = ∫ k(x, y) m(dy)`.
///
/// With a kernel vanishing exactly on `{x = 0}` the critical value is 0 and
/// the projected Aubry set is the origin, for every measure.
pub struct Mechanical {
    kernel: CouplingKernel,
}

impl Mechanical {
    pub fn new(kernel: CouplingKernel) -> Self {
        Mechanical { kernel }
    }

    pub fn builtin(scale: f64) -> Result<Self> {
        Ok(Mechanical::new(CouplingKernel::builtin(scale)?))
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        if spec.dim > 1 {
            return Err(Error::InvalidConfig(
                "the mechanical family is one-dimensional".into(),
            ));
        }
        let scale = spec.param("kernel.scale", 1.0);
        let kernel = match &spec.kernel_table {
            Some(table) => CouplingKernel::tabulated(table.clone(), scale)?,
            None => CouplingKernel::builtin(scale)?,
        };
        Ok(Mechanical::new(kernel))
    }

    pub fn kernel(&self) -> &CouplingKernel {
        &self.kernel
    }

    fn coupling_cost(&self, x: f64, m: &GridMeasure) -> f64 {
        match &self.kernel {
            CouplingKernel::Builtin { scale } => {
                scale * (1.0 - (TAU * x).cos()) * builtin_moment(m)
            }
            _ => {
                let grid = m.grid();
                let mut f = 0.0;
                for j in 0..grid.num_nodes() {
                    let w = m.weight(j);
                    if w > 0.0 {
                        f += self.kernel.eval(x, grid.node(j)[0]) * w;
                    }
                }
                f
            }
        }
    }
}

/// Integral of the builtin kernel's `y`-factor against `m`.
fn builtin_moment(m: &GridMeasure) -> f64 {
    let grid = m.grid();
    let mut c = 0.0;
    for j in 0..grid.num_nodes() {
        c += (1.0 + 0.5 * (TAU * grid.node(j)[0]).cos()) * m.weight(j);
    }
    c
}

impl Hamiltonian for Mechanical {
    fn dim(&self) -> usize {
        1
    }

    fn family_name(&self) -> &str {
        "mechanical"
    }

    fn hamiltonian(&self, x: Point, p: Vector, m: &GridMeasure) -> f64 {
        0.5 * p[0] * p[0] - self.coupling_cost(x[0], m)
    }

    fn lagrangian(&self, x: Point, v: Vector, m: &GridMeasure) -> Result<f64> {
        Ok(0.5 * v[0] * v[0] + self.coupling_cost(x[0], m))
    }

    fn grad_p(&self, _x: Point, p: Vector, _m: &GridMeasure) -> Vector {
        [p[0], 0.0]
    }

    fn grad_v_lagrangian(&self, _x: Point, v: Vector, _m: &GridMeasure) -> Result<Vector> {
        Ok([v[0], 0.0])
    }

    fn coupling(&self, x: Point, m: &GridMeasure) -> Result<f64> {
        Ok(self.coupling_cost(x[0], m))
    }

    fn as_mechanical(&self) -> Option<&Mechanical> {
        Some(self)
    }

    fn frozen<'a>(&'a self, m: &'a GridMeasure) -> Box<dyn FrozenLagrangian + 'a> {
        match &self.kernel {
            CouplingKernel::Builtin { scale } => Box::new(FrozenMechanicalBuiltin {
                scale: *scale,
                moment: builtin_moment(m),
            }),
            _ => {
                // Freeze F on a fine grid (4 samples per measure cell) so the
                // DP table build does O(1) lookups; midpoints between nodes
                // land exactly on fine-grid samples.
                let n_fine = 4 * m.grid().n();
                let fine = TorusGrid::new(1, n_fine).expect("fine grid");
                let values: Vec<f64> = (0..n_fine)
                    .map(|i| self.coupling_cost(i as f64 / n_fine as f64, m))
                    .collect();
                Box::new(FrozenMechanicalTabulated { fine, values })
            }
        }
    }
}

struct FrozenMechanicalBuiltin {
    scale: f64,
    moment: f64,
}

impl FrozenLagrangian for FrozenMechanicalBuiltin {
    fn lagrangian(&self, x: Point, v: Vector) -> Result<f64> {
        Ok(0.5 * v[0] * v[0] + self.scale * (1.0 - (TAU * x[0]).cos()) * self.moment)
    }

    fn grad_v(&self, _x: Point, v: Vector) -> Result<Vector> {
        Ok([v[0], 0.0])
    }

    fn grad_x(&self, x: Point, _v: Vector) -> Result<Vector> {
        Ok([self.scale * TAU * (TAU * x[0]).sin() * self.moment, 0.0])
    }
}

struct FrozenMechanicalTabulated {
    fine: TorusGrid,
    values: Vec<f64>,
}

impl FrozenLagrangian for FrozenMechanicalTabulated {
    fn lagrangian(&self, x: Point, v: Vector) -> Result<f64> {
        Ok(0.5 * v[0] * v[0] + interp_scalar(self.fine, &self.values, x))
    }

    fn grad_v(&self, _x: Point, v: Vector) -> Result<Vector> {
        Ok([v[0], 0.0])
    }

    fn grad_x(&self, x: Point, _v: Vector) -> Result<Vector> {
        let step = self.fine.spacing();
        let hi = interp_scalar(
            self.fine,
            &self.values,
            [crate::torus::wrap(x[0] + step), 0.0],
        );
        let lo = interp_scalar(
            self.fine,
            &self.values,
            [crate::torus::wrap(x[0] - step), 0.0],
        );
        Ok([(hi - lo) / (2.0 * step), 0.0])
    }
}

/// Non-separable family `H(x, p, m) = F(m) · (|p|²/2 − V(x))` with
/// `F(m) = f0 + f_cos ∫ cos(2π y₁) m(dy)` and `V(x) = v0 − Σ_a cos(2π x_a)`.
///
/// `V` has its unique minimum at the origin, so the projected Aubry set is
/// `{0}` and the critical value is `F(m) · V(0)`.
pub struct ScaledSeparable {
    dim: usize,
    f0: f64,
    f_cos: f64,
    v0: f64,
}

impl ScaledSeparable {
    pub fn new(dim: usize, f0: f64, f_cos: f64, v0: f64) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidConfig(format!("bad model dimension {dim}")));
        }
        let floor = f0 - f_cos.abs();
        if !(floor.is_finite() && floor > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "measure scale must stay positive: f0 - |f_cos| = {floor}"
            )));
        }
        if !(v0.is_finite() && v0 > dim as f64) {
            return Err(Error::InvalidConfig(format!(
                "potential offset v0 = {v0} must exceed {} so V stays positive",
                dim
            )));
        }
        Ok(ScaledSeparable { dim, f0, f_cos, v0 })
    }

    pub fn builtin() -> Self {
        ScaledSeparable::new(1, 1.0, 0.5, 2.0).expect("builtin parameters are valid")
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let dim = if spec.dim == 0 { 1 } else { spec.dim };
        ScaledSeparable::new(
            dim,
            spec.param("f0", 1.0),
            spec.param("f_cos", 0.5),
            spec.param("v0", 2.0),
        )
    }

    /// Measure scale `F(m) ≥ f0 − |f_cos| > 0`.
    pub fn measure_scale(&self, m: &GridMeasure) -> f64 {
        let grid = m.grid();
        let mut c = 0.0;
        for j in 0..grid.num_nodes() {
            c += (TAU * grid.node(j)[0]).cos() * m.weight(j);
        }
        self.f0 + self.f_cos * c
    }

    pub fn potential(&self, x: Point) -> f64 {
        let mut v = self.v0;
        for a in 0..self.dim {
            v -= (TAU * x[a]).cos();
        }
        v
    }

    /// Minimum of the potential (attained at the origin).
    pub fn potential_min(&self) -> f64 {
        self.v0 - self.dim as f64
    }
}

impl Hamiltonian for ScaledSeparable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn family_name(&self) -> &str {
        "scaled-separable"
    }

    fn hamiltonian(&self, x: Point, p: Vector, m: &GridMeasure) -> f64 {
        let f = self.measure_scale(m);
        let mut kinetic = 0.0;
        for a in 0..self.dim {
            kinetic += 0.5 * p[a] * p[a];
        }
        f * (kinetic - self.potential(x))
    }

    fn lagrangian(&self, x: Point, v: Vector, m: &GridMeasure) -> Result<f64> {
        let f = self.measure_scale(m);
        let mut kinetic = 0.0;
        for a in 0..self.dim {
            kinetic += 0.5 * v[a] * v[a];
        }
        Ok(kinetic / f + f * self.potential(x))
    }

    fn grad_p(&self, _x: Point, p: Vector, m: &GridMeasure) -> Vector {
        let f = self.measure_scale(m);
        let mut out = [0.0; MAX_DIM];
        for a in 0..self.dim {
            out[a] = f * p[a];
        }
        out
    }

    fn grad_v_lagrangian(&self, _x: Point, v: Vector, m: &GridMeasure) -> Result<Vector> {
        let f = self.measure_scale(m);
        let mut out = [0.0; MAX_DIM];
        for a in 0..self.dim {
            out[a] = v[a] / f;
        }
        Ok(out)
    }

    fn frozen<'a>(&'a self, m: &'a GridMeasure) -> Box<dyn FrozenLagrangian + 'a> {
        Box::new(FrozenScaled {
            model: self,
            scale: self.measure_scale(m),
        })
    }
}

struct FrozenScaled<'a> {
    model: &'a ScaledSeparable,
    scale: f64,
}

impl FrozenLagrangian for FrozenScaled<'_> {
    fn lagrangian(&self, x: Point, v: Vector) -> Result<f64> {
        let mut kinetic = 0.0;
        for a in 0..self.model.dim {
            kinetic += 0.5 * v[a] * v[a];
        }
        Ok(kinetic / self.scale + self.scale * self.model.potential(x))
    }

    fn grad_v(&self, _x: Point, v: Vector) -> Result<Vector> {
        let mut out = [0.0; MAX_DIM];
        for a in 0..self.model.dim {
            out[a] = v[a] / self.scale;
        }
        Ok(out)
    }

    fn grad_x(&self, x: Point, _v: Vector) -> Result<Vector> {
        let mut out = [0.0; MAX_DIM];
        for a in 0..self.model.dim {
            out[a] = self.scale * TAU * (TAU * x[a]).sin();
        }
        Ok(out)
    }
}

/// Measure-independent Hamiltonian given by tabulated values `H(x_i, p_j)`
/// with periodic linear interpolation in `x` and linear interpolation (with
/// linear extrapolation past the edges) in `p`. One-dimensional.
pub struct Tabulated {
    x_nodes: usize,
    p_samples: usize,
    p_max: f64,
    values: Vec<f64>,
    search_radius: f64,
}

impl Tabulated {
    pub fn new(x_nodes: usize, p_samples: usize, p_max: f64, values: Vec<f64>) -> Result<Self> {
        if x_nodes < 2 || p_samples < 3 {
            return Err(Error::InvalidConfig(format!(
                "tabulated Hamiltonian needs >= 2 x-nodes and >= 3 p-samples, got {x_nodes} and {p_samples}"
            )));
        }
        if !(p_max.is_finite() && p_max > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tabulated momentum range must be positive, got {p_max}"
            )));
        }
        if values.len() != x_nodes * p_samples {
            return Err(Error::InvalidConfig(format!(
                "tabulated Hamiltonian expects {} values, got {}",
                x_nodes * p_samples,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "tabulated Hamiltonian holds a non-finite value {v}"
            )));
        }
        Ok(Tabulated {
            x_nodes,
            p_samples,
            p_max,
            values,
            search_radius: 0.5 * p_max,
        })
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let table = spec
            .hamiltonian_table
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("the tabulated family needs model.table".into()))?;
        let mut model = Tabulated::new(
            table.x_nodes,
            table.p_samples,
            table.p_max,
            table.values.clone(),
        )?;
        if let Some(&r) = spec.params.get("legendre.radius") {
            model = model.with_search_radius(r)?;
        }
        Ok(model)
    }

    /// Tabulates a closed-form `H(x, p)` for tests and custom setups.
    pub fn from_fn(
        x_nodes: usize,
        p_samples: usize,
        p_max: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(x_nodes * p_samples);
        for i in 0..x_nodes {
            let x = i as f64 / x_nodes as f64;
            for j in 0..p_samples {
                let p = -p_max + 2.0 * p_max * j as f64 / (p_samples - 1) as f64;
                values.push(f(x, p));
            }
        }
        Tabulated::new(x_nodes, p_samples, p_max, values)
    }

    pub fn with_search_radius(mut self, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "Legendre search radius must be positive, got {radius}"
            )));
        }
        self.search_radius = radius;
        Ok(self)
    }

    fn eval(&self, x: f64, p: f64) -> f64 {
        let nx = self.x_nodes;
        let sx = wrap(x) * nx as f64;
        let ix = sx.floor() as usize % nx;
        let tx = sx - sx.floor();
        let jx = (ix + 1) % nx;

        let np = self.p_samples;
        let dp = 2.0 * self.p_max / (np - 1) as f64;
        let sp = (p + self.p_max) / dp;
        // Clamp to the outermost segment; its slope extrapolates linearly.
        let jp = sp.floor().clamp(0.0, (np - 2) as f64) as usize;
        let tp = sp - jp as f64;

        let row = |i: usize| {
            let lo = self.values[i * np + jp];
            let hi = self.values[i * np + jp + 1];
            lo + tp * (hi - lo)
        };
        (1.0 - tx) * row(ix) + tx * row(jx)
    }
}

impl Hamiltonian for Tabulated {
    fn dim(&self) -> usize {
        1
    }

    fn family_name(&self) -> &str {
        "tabulated"
    }

    fn hamiltonian(&self, x: Point, p: Vector, _m: &GridMeasure) -> f64 {
        self.eval(x[0], p[0])
    }

    fn legendre_radius(&self) -> f64 {
        self.search_radius
    }
}

type HamiltonianFn = dyn Fn(Point, Vector, &GridMeasure) -> f64 + Send + Sync;

/// Caller-supplied Hamiltonian/Lagrangian pair. The Lagrangian falls back to
/// the numeric Legendre transform when not given. Register instances in a
/// [`super::FamilyRegistry`] to expose them by name.
pub struct CustomHamiltonian {
    dim: usize,
    name: String,
    h: Box<HamiltonianFn>,
    l: Option<Box<HamiltonianFn>>,
    search_radius: f64,
}

impl CustomHamiltonian {
    pub fn new(
        dim: usize,
        name: impl Into<String>,
        h: impl Fn(Point, Vector, &GridMeasure) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidConfig(format!("bad model dimension {dim}")));
        }
        Ok(CustomHamiltonian {
            dim,
            name: name.into(),
            h: Box::new(h),
            l: None,
            search_radius: 20.0,
        })
    }

    pub fn with_lagrangian(
        mut self,
        l: impl Fn(Point, Vector, &GridMeasure) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.l = Some(Box::new(l));
        self
    }

    pub fn with_search_radius(mut self, radius: f64) -> Self {
        self.search_radius = radius;
        self
    }
}

impl Hamiltonian for CustomHamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn family_name(&self) -> &str {
        &self.name
    }

    fn hamiltonian(&self, x: Point, p: Vector, m: &GridMeasure) -> f64 {
        (self.h)(x, p, m)
    }

    fn lagrangian(&self, x: Point, v: Vector, m: &GridMeasure) -> Result<f64> {
        match &self.l {
            Some(l) => Ok(l(x, v, m)),
            None => {
                let (value, _) = super::legendre::legendre_transform(
                    &|p| (self.h)(x, p, m),
                    v,
                    self.dim,
                    self.search_radius,
                )?;
                Ok(value)
            }
        }
    }

    fn legendre_radius(&self) -> f64 {
        self.search_radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{dot, norm};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::new(1, n).unwrap()
    }

    #[test]
    fn mechanical_builtin_values() {
        let model = Mechanical::builtin(1.0).unwrap();
        let m = GridMeasure::uniform(grid(256));
        // Kernel vanishes at the origin.
        assert_eq!(model.hamiltonian([0.0, 0.0], [0.0, 0.0], &m), 0.0);
        // F(1/4, uniform) = (1 - cos π/2) · 1 = 1.
        let h = model.hamiltonian([0.25, 0.0], [0.0, 0.0], &m);
        assert!((h + 1.0).abs() < 1e-12, "H = {h}, expected -1");
        let l = model.lagrangian([0.25, 0.0], [1.0, 0.0], &m).unwrap();
        assert!((l - 1.5).abs() < 1e-12, "L = {l}, expected 1.5");
        assert_eq!(model.lagrangian([0.0, 0.0], [0.0, 0.0], &m).unwrap(), 0.0);
        // D_p H = p.
        assert_eq!(model.grad_p([0.3, 0.0], [0.3, 0.0], &m)[0], 0.3);
    }

    #[test]
    fn mechanical_coupling_examples() {
        let model = Mechanical::builtin(1.0).unwrap();
        let g = grid(256);
        let uniform = GridMeasure::uniform(g);
        let dirac0 = GridMeasure::dirac(g, [0.0, 0.0]);
        assert_eq!(model.coupling([0.0, 0.0], &uniform).unwrap(), 0.0);
        let f = model.coupling([0.5, 0.0], &dirac0).unwrap();
        assert!((f - 3.0).abs() < 1e-12, "F(1/2, dirac_0) = {f}");
        // Discrete cosine sums vanish exactly, so the uniform moment is 1.
        let f = model.coupling([0.25, 0.0], &uniform).unwrap();
        assert!((f - 1.0).abs() < 1e-12, "F(1/4, uniform) = {f}");
        // Coupling is nonnegative with F(0, m) = 0 for random measures.
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..10 {
            let w: Vec<f64> = (0..256).map(|_| rng.random::<f64>() + 1e-3).collect();
            let m = GridMeasure::normalized(g, w).unwrap();
            assert_eq!(model.coupling([0.0, 0.0], &m).unwrap(), 0.0);
            for i in (0..256).step_by(17) {
                assert!(model.coupling([i as f64 / 256.0, 0.0], &m).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn scaled_separable_values() {
        let model = ScaledSeparable::builtin();
        let g = grid(128);
        let uniform = GridMeasure::uniform(g);
        // F(uniform) = 1, V(0) = 1, so H(0, 0, uniform) = -1.
        let h = model.hamiltonian([0.0, 0.0], [0.0, 0.0], &uniform);
        assert!((h + 1.0).abs() < 1e-12, "H = {h}");
        let dp = model.grad_p([0.3, 0.0], [0.5, 0.0], &uniform);
        assert!((dp[0] - 0.5).abs() < 1e-12);
        let dirac0 = GridMeasure::dirac(g, [0.0, 0.0]);
        assert!((model.measure_scale(&dirac0) - 1.5).abs() < 1e-12);
        assert!(ScaledSeparable::new(1, 1.0, 1.0, 2.0).is_err());
        // Coupling costs exist only for the mechanical family.
        assert!(matches!(
            model.coupling([0.3, 0.0], &uniform),
            Err(crate::error::Error::UnsupportedFamily { .. })
        ));
    }

    #[test]
    fn custom_matches_closed_form_mechanical() {
        // Wrap the mechanical formula as an opaque callable and compare the
        // numeric Legendre transform against the analytic dual.
        let custom = CustomHamiltonian::new(1, "wrapped-mechanical", |x, p, m| {
            let mech = Mechanical::builtin(1.0).unwrap();
            mech.hamiltonian(x, p, m)
        })
        .unwrap()
        .with_search_radius(6.0);
        let mech = Mechanical::builtin(1.0).unwrap();
        let g = grid(64);
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..25 {
            let w: Vec<f64> = (0..64).map(|_| rng.random::<f64>() + 1e-3).collect();
            let m = GridMeasure::normalized(g, w).unwrap();
            let x = [rng.random::<f64>(), 0.0];
            let v = [rng.random_range(-2.0..2.0), 0.0];
            let numeric = custom.lagrangian(x, v, &m).unwrap();
            let exact = mech.lagrangian(x, v, &m).unwrap();
            assert!(
                (numeric - exact).abs() < 1e-6,
                "numeric {numeric} vs exact {exact}"
            );
        }
    }

    #[test]
    fn custom_finite_difference_gradient() {
        let custom = CustomHamiltonian::new(1, "quad", |_x, p, _m| 0.5 * p[0] * p[0]).unwrap();
        let m = GridMeasure::uniform(grid(32));
        let mut rng = StdRng::seed_from_u64(21);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let p = rng.random_range(-3.0..3.0);
            let fd = custom.grad_p([0.0, 0.0], [p, 0.0], &m)[0];
            worst = worst.max((fd - p).abs());
        }
        assert!(worst <= 1e-4, "finite-difference deviation {worst}");
    }

    #[test]
    fn fenchel_young_for_builtins() {
        let mech = Mechanical::builtin(1.0).unwrap();
        let scaled = ScaledSeparable::builtin();
        let models: [&dyn Hamiltonian; 2] = [&mech, &scaled];
        let g = grid(64);
        let mut rng = StdRng::seed_from_u64(13);
        for model in models {
            for _ in 0..50 {
                let w: Vec<f64> = (0..64).map(|_| rng.random::<f64>() + 1e-3).collect();
                let m = GridMeasure::normalized(g, w).unwrap();
                let x = [rng.random::<f64>(), 0.0];
                let p = [rng.random_range(-2.0..2.0), 0.0];
                let v = [rng.random_range(-2.0..2.0), 0.0];
                let l = model.lagrangian(x, v, &m).unwrap();
                let h = model.hamiltonian(x, p, &m);
                assert!(dot(p, v, 1) <= l + h + 1e-12, "Fenchel-Young violated");
                // Equality at v = D_p H(x, p, m).
                let v_star = model.grad_p(x, p, &m);
                let l_star = model.lagrangian(x, v_star, &m).unwrap();
                let gap = (l_star + h - dot(p, v_star, 1)).abs();
                assert!(gap < 1e-8, "duality gap {gap}");
                let _ = norm(v_star, 1);
            }
        }
    }

    #[test]
    fn tabulated_reproduces_samples_and_extrapolates() {
        let t =
            Tabulated::from_fn(64, 65, 4.0, |x, p| 0.5 * p * p - (1.0 - (TAU * x).cos())).unwrap();
        let m = GridMeasure::uniform(grid(64));
        // Exact at table nodes.
        let h = t.hamiltonian([0.25, 0.0], [0.0, 0.0], &m);
        assert!((h + 1.0).abs() < 1e-12);
        // Linear extrapolation beyond p_max keeps finite values.
        let h_out = t.hamiltonian([0.0, 0.0], [6.0, 0.0], &m);
        assert!(h_out.is_finite());
        assert!(Tabulated::new(2, 3, -1.0, vec![0.0; 6]).is_err());
    }
}
