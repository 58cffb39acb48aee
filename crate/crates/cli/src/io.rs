//! Deterministic file output: CSV with '.' decimals, LF endings and
//! 17-significant-digit floats (bit-exact round trips), plus JSON documents
//! with stable key order. No timestamps or host data anywhere, so identical
//! runs produce byte-identical directories.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use weakmfg::solver::{SolutionBundle, VerifyReport};
use weakmfg::torus::GridMeasure;
use weakmfg::weakkam::{AubryData, BarrierField};

/// 17 significant digits: enough for exact f64 round trips.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_text(path: &Path, text: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    write_text(path, &text)
}

pub fn measure_csv(m: &GridMeasure) -> String {
    let mut out = String::from("node,weight\n");
    for (i, w) in m.weights().iter().enumerate() {
        out.push_str(&format!("{i},{}\n", fmt(*w)));
    }
    out
}

pub fn barrier_csv(b: &BarrierField) -> String {
    let dim = b.grid().dim();
    let mut out = String::from(if dim == 1 {
        "node,h,costate\n"
    } else {
        "node,h,costate_x,costate_y\n"
    });
    for i in 0..b.grid().num_nodes() {
        if dim == 1 {
            out.push_str(&format!(
                "{i},{},{}\n",
                fmt(b.values.value(i)),
                fmt(b.costate[i][0])
            ));
        } else {
            out.push_str(&format!(
                "{i},{},{},{}\n",
                fmt(b.values.value(i)),
                fmt(b.costate[i][0]),
                fmt(b.costate[i][1])
            ));
        }
    }
    out
}

pub fn aubry_json(a: &AubryData) -> serde_json::Value {
    serde_json::json!({
        "threshold": a.threshold,
        "members": a.members,
        "diagonal": a.diagonal,
    })
}

/// Writes the full solution directory: manifest, alpha table, per-time
/// barriers, the measure path, the initial measure (reloadable through
/// `file:`), the verification report, and plot-ready CSVs.
pub fn write_bundle(
    dir: &Path,
    echo: &BTreeMap<String, String>,
    seed: u64,
    m0: &GridMeasure,
    bundle: &SolutionBundle,
    verify: &VerifyReport,
) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    write_text(&dir.join("initial_measure.csv"), &measure_csv(m0))?;

    let manifest = serde_json::json!({
        "config": echo,
        "seed": seed,
        "converged": bundle.converged,
        "iterations": bundle.iterations,
        "best_iteration": bundle.best_iteration,
        "best_residual": bundle.best_residual,
        "residual_history": bundle.residual_history,
        "aubry_point": {
            "node": bundle.aubry.node,
            "x": bundle.aubry.point[0],
            "max_diag": bundle.aubry.max_diag,
            "warning": bundle.aubry.warning,
        },
        "verify_passed": verify.all_passed(),
    });
    write_json(&dir.join("manifest.json"), &manifest)?;

    let mut alpha = String::from("t,alpha\n");
    for (j, a) in bundle.alphas.iter().enumerate() {
        alpha.push_str(&format!("{},{}\n", fmt(bundle.path.time(j)), fmt(*a)));
    }
    write_text(&dir.join("alpha.csv"), &alpha)?;

    for (j, b) in bundle.barriers.iter().enumerate() {
        write_text(&dir.join(format!("barrier_{j}.csv")), &barrier_csv(b))?;
    }

    let mut measures = String::from("t,node,weight\n");
    for (j, m) in bundle.path.measures.iter().enumerate() {
        let t = fmt(bundle.path.time(j));
        for (i, w) in m.weights().iter().enumerate() {
            measures.push_str(&format!("{t},{i},{}\n", fmt(*w)));
        }
    }
    write_text(&dir.join("measures.csv"), &measures)?;

    write_json(
        &dir.join("verify.json"),
        &serde_json::to_value(verify).expect("serializable report"),
    )?;

    // Plot data: gnuplot-ready tables.
    let plot = dir.join("plotdata");
    fs::create_dir_all(&plot)?;
    let grid = bundle.path.measures[0].grid();
    let mut density = String::from("# t, density per node\n");
    for (j, m) in bundle.path.measures.iter().enumerate() {
        density.push_str(&fmt(bundle.path.time(j)));
        for i in 0..grid.num_nodes() {
            density.push(',');
            density.push_str(&fmt(m.density(i)));
        }
        density.push('\n');
    }
    write_text(&plot.join("density.csv"), &density)?;

    let mut residuals = String::from("iteration,residual\n");
    for (k, r) in bundle.residual_history.iter().enumerate() {
        residuals.push_str(&format!("{k},{}\n", fmt(*r)));
    }
    write_text(&plot.join("residuals.csv"), &residuals)?;

    let mut alpha_vs_t = String::from("t,alpha\n");
    for (j, a) in bundle.alphas.iter().enumerate() {
        alpha_vs_t.push_str(&format!("{},{}\n", fmt(bundle.path.time(j)), fmt(*a)));
    }
    write_text(&plot.join("alpha_vs_t.csv"), &alpha_vs_t)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use weakmfg::torus::TorusGrid;

    #[test]
    fn float_round_trip_is_exact() {
        use rand::Rng;
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        use rand::SeedableRng;
        for _ in 0..1000 {
            let x: f64 = rng.random::<f64>() * 10f64.powi(rng.random_range(-12..12));
            let parsed: f64 = fmt(x).parse().unwrap();
            assert_eq!(parsed.to_bits(), x.to_bits(), "{x} round-tripped badly");
        }
    }

    #[test]
    fn measure_csv_round_trip() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let m = crate::config::random_measure(grid, 3);
        let text = measure_csv(&m);
        let dir = std::env::temp_dir().join("weakmfg-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.csv");
        write_text(&path, &text).unwrap();
        let back = crate::config::load_measure_csv(&path, grid).unwrap();
        for i in 0..16 {
            assert_eq!(back.weight(i).to_bits(), m.weight(i).to_bits());
        }
    }

    #[test]
    fn measure_json_round_trip() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let m = crate::config::random_measure(grid, 9);
        let json = serde_json::to_string(&m).unwrap();
        let back: weakmfg::torus::GridMeasure = serde_json::from_str(&json).unwrap();
        for i in 0..32 {
            assert_eq!(back.weight(i).to_bits(), m.weight(i).to_bits());
        }
    }
}
