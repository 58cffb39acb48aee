//! Subcommand implementations and the exit-code contract.
//!
//! Exit codes are stable so CI can assert failure modes:
//! 0 success; 1 unreadable or out-of-range configuration; 2 model/data
//! validation failure; 3 weak-KAM computation error; 4 fixed-point iteration
//! hit max_iter (bundle still written); 5 no common Aubry point
//! (uniqueness-of-rest-point assumption violated); 6 self-test failure.

use std::path::Path;

use weakmfg::model::validate_tonelli;
use weakmfg::solver::{self, Problem, VerifyThresholds};
use weakmfg::torus::GridMeasure;
use weakmfg::weakkam::WeakKamEngine;
use weakmfg::Error;

use crate::config::{parse_measure, ResolvedConfig};
use crate::io;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_WEAKKAM: i32 = 3;
pub const EXIT_MAX_ITER: i32 = 4;
pub const EXIT_ASSUMPTION_A: i32 = 5;
pub const EXIT_SELFTEST: i32 = 6;

fn weakkam_exit(err: &Error) -> i32 {
    match err {
        Error::AssumptionAViolated { .. } => EXIT_ASSUMPTION_A,
        _ => EXIT_WEAKKAM,
    }
}

/// `validate`: structural checks of the model, the constants, and the
/// initial measure. JSON report on stdout; exit 2 on any failed check.
pub fn cmd_validate(cfg: &ResolvedConfig) -> i32 {
    let report = match validate_tonelli(cfg.model.as_ref(), cfg.grid, 64, cfg.sample_seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("validation aborted: {e}");
            return EXIT_VALIDATION;
        }
    };
    // Initial-measure checks: nonnegative unit-mass weights are enforced by
    // construction; report the density ceiling alongside.
    let m0_sup = cfg.m0.sup_density();
    let doc = serde_json::json!({
        "checks": serde_json::to_value(&report.checks).expect("serializable checks"),
        "constants": serde_json::to_value(&report.constants).expect("serializable constants"),
        "initial_measure": {
            "sup_density": m0_sup,
            "mass": cfg.m0.weights().iter().sum::<f64>(),
        },
        "passed": report.all_passed(),
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&doc).expect("serializable report")
    );
    if report.all_passed() {
        EXIT_OK
    } else {
        eprintln!("failed checks: {}", report.failures().join(", "));
        EXIT_VALIDATION
    }
}

fn build_engine(cfg: &ResolvedConfig) -> Result<WeakKamEngine<'_>, Error> {
    WeakKamEngine::new(cfg.model.as_ref(), cfg.grid, cfg.lo_params)
}

/// `critical-value`: alpha for one measure; writes alpha.json under --out.
pub fn cmd_critical_value(cfg: &ResolvedConfig, measure_spec: &str) -> i32 {
    let measure = match parse_measure(measure_spec, cfg.grid, Path::new(".")) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    match critical_value_inner(cfg, &measure) {
        Ok((alpha, spread)) => {
            println!("alpha = {alpha:.6} (increment spread {spread:.3e})");
            let doc = serde_json::json!({
                "alpha": alpha,
                "increment_spread": spread,
                "measure": measure_spec,
                "grid_n": cfg.grid.n(),
                "dtau": cfg.lo_params.dtau,
            });
            if let Err(e) = io::write_json(&cfg.out_dir.join("alpha.json"), &doc) {
                eprintln!("cannot write alpha.json: {e}");
                return EXIT_CONFIG;
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{e}");
            weakkam_exit(&e)
        }
    }
}

fn critical_value_inner(cfg: &ResolvedConfig, m: &GridMeasure) -> Result<(f64, f64), Error> {
    let engine = build_engine(cfg)?;
    let kernel = engine.step_kernel(m)?;
    let cv = engine.critical_value(&kernel)?;
    Ok((cv.alpha, cv.spread))
}

/// `barrier`: Peierls barrier based at `base`; writes barrier.csv.
pub fn cmd_barrier(cfg: &ResolvedConfig, measure_spec: &str, base: f64) -> i32 {
    let measure = match parse_measure(measure_spec, cfg.grid, Path::new(".")) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    let run = || -> Result<(), Error> {
        let engine = build_engine(cfg)?;
        let kernel = engine.step_kernel(&measure)?;
        let alpha = engine.critical_value(&kernel)?.alpha;
        let base_node = cfg.grid.nearest_node([base, 0.0]);
        let barrier = engine.peierls_barrier(&kernel, base_node, alpha)?;
        println!(
            "barrier at base node {base_node} (x = {:.6}): alpha = {alpha:.6}, defect = {:.3e}",
            cfg.grid.node(base_node)[0],
            barrier.defect
        );
        let probes = [cfg.grid.num_nodes() / 4, cfg.grid.num_nodes() / 2];
        for p in probes {
            println!(
                "  h({:.4}) = {:.6}",
                cfg.grid.node(p)[0],
                barrier.values.value(p)
            );
        }
        io::write_text(&cfg.out_dir.join("barrier.csv"), &io::barrier_csv(&barrier))?;
        Ok(())
    };
    match run() {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            weakkam_exit(&e)
        }
    }
}

/// `aubry`: diagonal scan and member set; writes aubry.json.
pub fn cmd_aubry(cfg: &ResolvedConfig, measure_spec: &str) -> i32 {
    let measure = match parse_measure(measure_spec, cfg.grid, Path::new(".")) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    let run = || -> Result<(), Error> {
        let engine = build_engine(cfg)?;
        let kernel = engine.step_kernel(&measure)?;
        let alpha = engine.critical_value(&kernel)?.alpha;
        let aubry = engine.aubry_set(&kernel, alpha)?;
        println!(
            "aubry members ({} of {} nodes, threshold {:.3e}): {:?}",
            aubry.members.len(),
            cfg.grid.num_nodes(),
            aubry.threshold,
            aubry.members
        );
        io::write_json(&cfg.out_dir.join("aubry.json"), &io::aubry_json(&aubry))?;
        Ok(())
    };
    match run() {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            weakkam_exit(&e)
        }
    }
}

/// `solve`: the full fixed-point run plus verification and export.
pub fn cmd_solve(cfg: &ResolvedConfig) -> i32 {
    let problem = Problem {
        model: cfg.model.as_ref(),
        grid: cfg.grid,
        m0: cfg.m0.clone(),
        horizon: cfg.dt * cfg.time_steps as f64,
        time_steps: cfg.time_steps,
        lo_params: cfg.lo_params,
        particles: cfg.particles,
        constants: cfg.constants.clone(),
    };
    let bundle = match solver::solve(&problem, &cfg.solve_params) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("{e}");
            return weakkam_exit(&e);
        }
    };
    let report = match solver::verify(&problem, &bundle, &VerifyThresholds::default()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("verification failed to run: {e}");
            return weakkam_exit(&e);
        }
    };
    for item in &report.items {
        println!(
            "[{}] {}: {:.4e} (threshold {:.4e})",
            if item.passed { "pass" } else { "FAIL" },
            item.name,
            item.statistic,
            item.threshold
        );
    }
    println!(
        "iterations: {} (best residual {:.4e} at {}), converged: {}",
        bundle.iterations, bundle.best_residual, bundle.best_iteration, bundle.converged
    );
    if let Some(w) = &bundle.aubry.warning {
        eprintln!("warning: {w}");
    }
    if let Err(e) = io::write_bundle(&cfg.out_dir, &cfg.echo, cfg.seed, &cfg.m0, &bundle, &report) {
        eprintln!("cannot write solution directory: {e}");
        return EXIT_CONFIG;
    }
    println!("solution written to {}", cfg.out_dir.display());
    if bundle.converged && report.all_passed() {
        EXIT_OK
    } else {
        EXIT_MAX_ITER
    }
}
