//! Built-in oracle suite: a fast subset of the crate's closed-form and
//! derived checks at n = 64, runnable from a fresh binary. Checks carry
//! stable names so CI and mutation runs can assert which property broke
//! (see CONTRIBUTING.md for the documented mutation runs).

use std::f64::consts::PI;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use weakmfg::model::{CustomHamiltonian, Hamiltonian, Mechanical, ScaledSeparable};
use weakmfg::solver::{self, Problem, SolveParams, VerifyThresholds};
use weakmfg::torus::{self, GridMeasure, ParticleEnsemble, TorusGrid};
use weakmfg::transport::{self, DriftFrame};
use weakmfg::weakkam::{LaxOleinikParams, WeakKamEngine};

type CheckResult = Result<(), String>;

fn ensure(cond: bool, msg: impl Into<String>) -> CheckResult {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

struct Fixture {
    grid: TorusGrid,
    params: LaxOleinikParams,
}

fn fixture() -> Fixture {
    let grid = TorusGrid::new(1, 64).expect("grid");
    let params = LaxOleinikParams {
        dtau: 0.1,
        search_radius: 0.45,
        n_burn: 100,
        n_window: 50,
        eps_aubry: grid.spacing() * grid.spacing() / 0.1,
        tol_fp: 1e-2,
    };
    Fixture { grid, params }
}

fn maupertuis_uniform(y: f64) -> f64 {
    let c = 2.0 / PI;
    (c * (1.0 - (PI * y).cos())).min(c * (1.0 + (PI * y).cos()))
}

fn check_hamiltonian_values() -> CheckResult {
    let f = fixture();
    let mech = Mechanical::builtin(1.0).map_err(|e| e.to_string())?;
    let uniform = GridMeasure::uniform(f.grid);
    ensure(
        mech.hamiltonian([0.0, 0.0], [0.0, 0.0], &uniform) == 0.0,
        "H(0,0,uniform) must vanish",
    )?;
    let h = mech.hamiltonian([0.25, 0.0], [0.0, 0.0], &uniform);
    ensure((h + 1.0).abs() < 1e-12, format!("H(1/4,0,uniform) = {h}"))?;
    let l = mech
        .lagrangian([0.25, 0.0], [1.0, 0.0], &uniform)
        .map_err(|e| e.to_string())?;
    ensure((l - 1.5).abs() < 1e-12, format!("L(1/4,1,uniform) = {l}"))?;
    let dirac = GridMeasure::dirac(f.grid, [0.0, 0.0]);
    let c = mech
        .coupling([0.5, 0.0], &dirac)
        .map_err(|e| e.to_string())?;
    ensure((c - 3.0).abs() < 1e-12, format!("F(1/2,dirac_0) = {c}"))?;
    let scaled = ScaledSeparable::builtin();
    let h = scaled.hamiltonian([0.0, 0.0], [0.0, 0.0], &uniform);
    ensure(
        (h + 1.0).abs() < 1e-12,
        format!("scaled H(0,0,uniform) = {h}"),
    )?;
    let dp = scaled.grad_p([0.0, 0.0], [0.5, 0.0], &uniform);
    ensure(
        (dp[0] - 0.5).abs() < 1e-12,
        format!("scaled D_p = {}", dp[0]),
    )
}

fn check_legendre_duality() -> CheckResult {
    let f = fixture();
    let custom = CustomHamiltonian::new(1, "wrapped", |x, p, m| {
        Mechanical::builtin(1.0).unwrap().hamiltonian(x, p, m)
    })
    .map_err(|e| e.to_string())?
    .with_search_radius(6.0);
    let mech = Mechanical::builtin(1.0).map_err(|e| e.to_string())?;
    let mut rng = StdRng::seed_from_u64(17);
    for _ in 0..10 {
        let m = GridMeasure::normalized(
            f.grid,
            (0..64).map(|_| rng.random::<f64>() + 0.01).collect(),
        )
        .map_err(|e| e.to_string())?;
        let x = [rng.random::<f64>(), 0.0];
        let v = [rng.random_range(-2.0..2.0), 0.0];
        let numeric = custom.lagrangian(x, v, &m).map_err(|e| e.to_string())?;
        let exact = mech.lagrangian(x, v, &m).map_err(|e| e.to_string())?;
        ensure(
            (numeric - exact).abs() < 1e-6,
            format!("numeric Legendre {numeric} vs closed form {exact}"),
        )?;
    }
    Ok(())
}

fn check_w1_exact() -> CheckResult {
    let f = fixture();
    let d0 = GridMeasure::dirac(f.grid, [0.0, 0.0]);
    let dhalf = GridMeasure::dirac(f.grid, [0.5, 0.0]);
    let d34 = GridMeasure::dirac(f.grid, [0.75, 0.0]);
    let a = torus::w1(&d0, &dhalf).map_err(|e| e.to_string())?;
    ensure((a - 0.5).abs() < 1e-12, format!("antipodal W1 = {a}"))?;
    let b = torus::w1(&d0, &d34).map_err(|e| e.to_string())?;
    ensure((b - 0.25).abs() < 1e-12, format!("wraparound W1 = {b}"))
}

fn check_density_binning() -> CheckResult {
    let f = fixture();
    let mut positions = Vec::new();
    for _ in 0..4 {
        for i in 0..64 {
            positions.push([f.grid.node(i)[0], 0.0]);
        }
    }
    let ens = ParticleEnsemble::new(1, positions).map_err(|e| e.to_string())?;
    let m = torus::kernel_density(&ens, f.grid).map_err(|e| e.to_string())?;
    for i in 0..64 {
        ensure(
            (m.weight(i) - 1.0 / 64.0).abs() < 1e-12,
            format!("lattice binning not uniform at node {i}"),
        )?;
    }
    let total: f64 = m.weights().iter().sum();
    ensure((total - 1.0).abs() <= 1e-12, format!("mass {total}"))
}

fn check_critical_value_example_i() -> CheckResult {
    let f = fixture();
    let mech = Mechanical::builtin(1.0).map_err(|e| e.to_string())?;
    let engine = WeakKamEngine::new(&mech, f.grid, f.params).map_err(|e| e.to_string())?;
    for (name, m) in [
        ("uniform", GridMeasure::uniform(f.grid)),
        ("dirac:0", GridMeasure::dirac(f.grid, [0.0, 0.0])),
        ("dirac:0.5", GridMeasure::dirac(f.grid, [0.5, 0.0])),
    ] {
        let kernel = engine.step_kernel(&m).map_err(|e| e.to_string())?;
        let alpha = engine
            .critical_value(&kernel)
            .map_err(|e| e.to_string())?
            .alpha;
        ensure(
            alpha.abs() <= 5e-2,
            format!("alpha({name}) = {alpha}, expected 0"),
        )?;
    }
    Ok(())
}

fn check_critical_value_example_ii() -> CheckResult {
    let f = fixture();
    let scaled = ScaledSeparable::builtin();
    let engine = WeakKamEngine::new(&scaled, f.grid, f.params).map_err(|e| e.to_string())?;
    let kernel = engine
        .step_kernel(&GridMeasure::uniform(f.grid))
        .map_err(|e| e.to_string())?;
    let alpha = engine
        .critical_value(&kernel)
        .map_err(|e| e.to_string())?
        .alpha;
    ensure(
        (alpha - 1.0).abs() <= 5e-2,
        format!("alpha(uniform) = {alpha}, expected 1"),
    )?;
    let kernel = engine
        .step_kernel(&GridMeasure::dirac(f.grid, [0.0, 0.0]))
        .map_err(|e| e.to_string())?;
    let alpha = engine
        .critical_value(&kernel)
        .map_err(|e| e.to_string())?
        .alpha;
    ensure(
        (alpha - 1.5).abs() <= 5e-2,
        format!("alpha(dirac_0) = {alpha}, expected 1.5"),
    )
}

fn check_barrier_oracle() -> CheckResult {
    let f = fixture();
    let mech = Mechanical::builtin(1.0).map_err(|e| e.to_string())?;
    let engine = WeakKamEngine::new(&mech, f.grid, f.params).map_err(|e| e.to_string())?;
    let m = GridMeasure::uniform(f.grid);
    let kernel = engine.step_kernel(&m).map_err(|e| e.to_string())?;
    let alpha = engine
        .critical_value(&kernel)
        .map_err(|e| e.to_string())?
        .alpha;
    let barrier = engine
        .peierls_barrier(&kernel, 0, alpha)
        .map_err(|e| e.to_string())?;
    ensure(
        barrier.defect <= f.params.tol_fp,
        format!("certificate defect {}", barrier.defect),
    )?;
    for i in 0..64 {
        let oracle = maupertuis_uniform(f.grid.node(i)[0]);
        let got = barrier.values.value(i);
        ensure(
            (got - oracle).abs() <= 5e-2,
            format!("barrier({}) = {got}, oracle {oracle}", f.grid.node(i)[0]),
        )?;
    }
    Ok(())
}

fn check_aubry_origin() -> CheckResult {
    let f = fixture();
    let mech = Mechanical::builtin(1.0).map_err(|e| e.to_string())?;
    let engine = WeakKamEngine::new(&mech, f.grid, f.params).map_err(|e| e.to_string())?;
    let m = GridMeasure::uniform(f.grid);
    let kernel = engine.step_kernel(&m).map_err(|e| e.to_string())?;
    let alpha = engine
        .critical_value(&kernel)
        .map_err(|e| e.to_string())?
        .alpha;
    let aubry = engine
        .aubry_set(&kernel, alpha)
        .map_err(|e| e.to_string())?;
    ensure(
        aubry.members.iter().all(|&i| i.min(64 - i) <= 1) && aubry.members.contains(&0),
        format!("members {:?}", aubry.members),
    )
}

fn check_calibrated_curves() -> CheckResult {
    let f = fixture();
    let mech = Mechanical::builtin(1.0).map_err(|e| e.to_string())?;
    let engine = WeakKamEngine::new(&mech, f.grid, f.params).map_err(|e| e.to_string())?;
    let m = GridMeasure::uniform(f.grid);
    let kernel = engine.step_kernel(&m).map_err(|e| e.to_string())?;
    let alpha = engine
        .critical_value(&kernel)
        .map_err(|e| e.to_string())?
        .alpha;
    let barrier = engine
        .peierls_barrier(&kernel, 0, alpha)
        .map_err(|e| e.to_string())?;
    for end in (0..64).step_by(4) {
        let curve = engine
            .calibrated_curve(&kernel, &barrier, end, 25)
            .map_err(|e| e.to_string())?;
        ensure(
            curve.max_defect <= 5.0 * f.params.tol_fp,
            format!("defect {} from endpoint {end}", curve.max_defect),
        )?;
        ensure(
            curve.max_speed <= f.params.speed_cap() + 1e-12,
            format!("speed {} from endpoint {end}", curve.max_speed),
        )?;
    }
    Ok(())
}

fn check_domination() -> CheckResult {
    let f = fixture();
    let mech = Mechanical::builtin(1.0).map_err(|e| e.to_string())?;
    let engine = WeakKamEngine::new(&mech, f.grid, f.params).map_err(|e| e.to_string())?;
    let m = GridMeasure::uniform(f.grid);
    let kernel = engine.step_kernel(&m).map_err(|e| e.to_string())?;
    let alpha = engine
        .critical_value(&kernel)
        .map_err(|e| e.to_string())?
        .alpha;
    let barrier = engine
        .peierls_barrier(&kernel, 0, alpha)
        .map_err(|e| e.to_string())?;
    let cells = (f.params.search_radius / f.grid.spacing()).floor() as i64;
    let mut rng = StdRng::seed_from_u64(31);
    for trial in 0..20 {
        let mut node = rng.random_range(0..64usize);
        let mut curve = vec![node];
        for _ in 0..30 {
            node = f
                .grid
                .shifted_index(node, [rng.random_range(-cells..=cells), 0]);
            curve.push(node);
        }
        engine
            .check_dominated(&kernel, &barrier, &curve)
            .map_err(|e| format!("trial {trial}: {e}"))?;
    }
    Ok(())
}

fn check_drift_oracle() -> CheckResult {
    let grid = TorusGrid::new(1, 256).expect("grid");
    let params = LaxOleinikParams {
        dtau: 0.1,
        search_radius: 0.45,
        n_burn: 100,
        n_window: 50,
        eps_aubry: grid.spacing() * grid.spacing() / 0.1,
        tol_fp: 1e-2,
    };
    let mech = Mechanical::builtin(1.0).map_err(|e| e.to_string())?;
    let engine = WeakKamEngine::new(&mech, grid, params).map_err(|e| e.to_string())?;
    let m = GridMeasure::uniform(grid);
    let kernel = engine.step_kernel(&m).map_err(|e| e.to_string())?;
    let alpha = engine
        .critical_value(&kernel)
        .map_err(|e| e.to_string())?
        .alpha;
    let barrier = engine
        .peierls_barrier(&kernel, 0, alpha)
        .map_err(|e| e.to_string())?;
    let frame = DriftFrame {
        barrier: &barrier,
        measure: &m,
    };
    let d = transport::drift(&mech, &frame, [0.25, 0.0]);
    ensure(
        (d[0] + 2f64.sqrt()).abs() <= 0.1,
        format!("drift(1/4) = {}, expected -sqrt(2)", d[0]),
    )?;
    let at_base = transport::drift(&mech, &frame, [0.0, 0.0]);
    ensure(at_base[0] == 0.0, format!("drift(0) = {}", at_base[0]))
}

fn check_concentration_monotonicity() -> CheckResult {
    let f = fixture();
    let mech = Mechanical::builtin(1.0).map_err(|e| e.to_string())?;
    let engine = WeakKamEngine::new(&mech, f.grid, f.params).map_err(|e| e.to_string())?;
    let m0 = GridMeasure::uniform(f.grid);
    let kernel = engine.step_kernel(&m0).map_err(|e| e.to_string())?;
    let alpha = engine
        .critical_value(&kernel)
        .map_err(|e| e.to_string())?
        .alpha;
    let barrier = engine
        .peierls_barrier(&kernel, 0, alpha)
        .map_err(|e| e.to_string())?;
    let frames: Vec<DriftFrame> = (0..10)
        .map(|_| DriftFrame {
            barrier: &barrier,
            measure: &m0,
        })
        .collect();
    let path = transport::simulate(&mech, f.grid, &m0, &frames, 0.1, 10, 64 * 32, 100.0)
        .map_err(|e| e.to_string())?;
    let near = |m: &GridMeasure| -> f64 {
        (0..64)
            .filter(|&i| torus::distance(f.grid.node(i), [0.0, 0.0], 1) <= 0.1)
            .map(|i| m.weight(i))
            .sum()
    };
    let series: Vec<f64> = path.measures.iter().map(near).collect();
    for (j, w) in series.windows(2).enumerate() {
        ensure(
            w[1] > w[0] - 1e-12,
            format!("mass near the rest point not increasing at step {j}: {series:?}"),
        )?;
    }
    ensure(
        series[10] > series[0],
        format!("no net concentration: {series:?}"),
    )?;
    // Mass conservation along the run.
    for m in &path.measures {
        let total: f64 = m.weights().iter().sum();
        ensure((total - 1.0).abs() <= 1e-12, format!("mass drift {total}"))?;
    }
    Ok(())
}

fn check_rk2_order() -> CheckResult {
    let grid = TorusGrid::new(1, 256).expect("grid");
    let m = GridMeasure::uniform(grid);
    let free = Mechanical::builtin(0.0).map_err(|e| e.to_string())?;
    let nodes = grid.num_nodes();
    // Linear costate: exactly interpolated, so the discrepancy follows the
    // smooth flow dy/dt = -2(y - 1/2).
    let barrier = weakmfg::weakkam::BarrierField {
        base: 0,
        values: weakmfg::torus::GridField::constant(grid, 0.0),
        costate: (0..nodes)
            .map(|i| [2.0 * (grid.node(i)[0] - 0.5), 0.0])
            .collect(),
        alpha: 0.0,
        defect: 0.0,
        backlink: vec![0; nodes],
    };
    let frame = DriftFrame {
        barrier: &barrier,
        measure: &m,
    };
    let start = ParticleEnsemble::new(1, vec![[0.3, 0.0]; 128]).map_err(|e| e.to_string())?;
    let discrepancy = |dt: f64| -> Result<f64, String> {
        let one =
            transport::advance(&free, &frame, &start, dt, 100.0).map_err(|e| e.to_string())?;
        let half = transport::advance(&free, &frame, &start, dt / 2.0, 100.0)
            .map_err(|e| e.to_string())?;
        let two =
            transport::advance(&free, &frame, &half, dt / 2.0, 100.0).map_err(|e| e.to_string())?;
        Ok((one.positions()[0][0] - two.positions()[0][0]).abs())
    };
    let ratio = discrepancy(0.1)? / discrepancy(0.05)?;
    ensure(
        (ratio - 8.0).abs() <= 2.0,
        format!("integrator order ratio {ratio}, expected about 8"),
    )
}

fn check_zero_coupling_fixed_point() -> CheckResult {
    let f = fixture();
    let model = Mechanical::builtin(0.0).map_err(|e| e.to_string())?;
    let samples = weakmfg::model::default_measure_samples(f.grid, 1);
    let constants =
        weakmfg::model::estimate_constants(&model, f.grid, &samples).map_err(|e| e.to_string())?;
    let problem = Problem {
        model: &model,
        grid: f.grid,
        m0: GridMeasure::uniform(f.grid),
        horizon: 1.0,
        time_steps: 10,
        lo_params: LaxOleinikParams::from_constants(f.grid, &constants, 0.1),
        particles: 64 * 16,
        constants,
    };
    let bundle = solver::solve(
        &problem,
        &SolveParams {
            damping: 0.5,
            max_iter: 5,
            tol: 1e-9,
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(
        bundle.converged && bundle.iterations == 1,
        format!(
            "zero-coupling run: converged={} after {} iterations, history {:?}",
            bundle.converged, bundle.iterations, bundle.residual_history
        ),
    )?;
    let report = solver::verify(&problem, &bundle, &VerifyThresholds::default())
        .map_err(|e| e.to_string())?;
    ensure(
        report.all_passed(),
        format!("verify failures: {:?}", report.failures()),
    )
}

fn check_continuity_probe() -> CheckResult {
    let f = fixture();
    let scaled = ScaledSeparable::builtin();
    let engine = WeakKamEngine::new(&scaled, f.grid, f.params).map_err(|e| e.to_string())?;
    let probe = engine
        .critical_continuity_probe(
            &GridMeasure::uniform(f.grid),
            &GridMeasure::dirac(f.grid, [0.0, 0.0]),
        )
        .map_err(|e| e.to_string())?;
    ensure(
        (probe.alpha_diff - 0.5).abs() <= 0.1,
        format!("alpha difference {}", probe.alpha_diff),
    )?;
    ensure((probe.w1 - 0.25).abs() <= 1e-9, format!("w1 {}", probe.w1))
}

type NamedCheck = (&'static str, fn() -> CheckResult);

/// Runs the named checks; returns the failures.
pub fn run() -> Vec<(String, String)> {
    let checks: Vec<NamedCheck> = vec![
        ("hamiltonian-values", check_hamiltonian_values),
        ("legendre-duality", check_legendre_duality),
        ("w1-exact", check_w1_exact),
        ("density-binning", check_density_binning),
        ("critical-value-example-i", check_critical_value_example_i),
        ("critical-value-example-ii", check_critical_value_example_ii),
        ("barrier-maupertuis-oracle", check_barrier_oracle),
        ("aubry-origin", check_aubry_origin),
        ("calibrated-curves", check_calibrated_curves),
        ("domination-inequality", check_domination),
        ("drift-oracle", check_drift_oracle),
        (
            "transport-concentration-monotonicity",
            check_concentration_monotonicity,
        ),
        ("integrator-order", check_rk2_order),
        ("zero-coupling-fixed-point", check_zero_coupling_fixed_point),
        ("continuity-probe", check_continuity_probe),
    ];
    let mut failures = Vec::new();
    for (name, check) in checks {
        let started = std::time::Instant::now();
        match check() {
            Ok(()) => println!("[pass] {name} ({:.2?})", started.elapsed()),
            Err(msg) => {
                println!("[FAIL] {name}: {msg}");
                failures.push((name.to_string(), msg));
            }
        }
    }
    failures
}
