//! Flat dotted-key configuration files.
//!
//! One `section.key = value` per line, `#` comments, no nesting. The format
//! is trivially parseable from any language and diffs cleanly, which is what
//! the reproducibility manifests need. Every run echoes the fully-resolved
//! key set (defaults materialized) into its manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use weakmfg::model::{
    default_measure_samples, estimate_constants, FamilyRegistry, Hamiltonian, HamiltonianTable,
    KernelTable, ModelConstants, ModelSpec,
};
use weakmfg::solver::SolveParams;
use weakmfg::torus::{GridMeasure, TorusGrid};
use weakmfg::weakkam::LaxOleinikParams;

/// Configuration or input-file problem; maps to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> CResult<T> {
    Err(ConfigError(msg.into()))
}

/// Raw parsed key/value pairs plus the config file's directory (relative
/// paths resolve against it).
pub struct RawConfig {
    entries: BTreeMap<String, String>,
    base_dir: PathBuf,
}

impl RawConfig {
    pub fn from_file(path: &Path) -> CResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Self::parse(&text, base_dir)
    }

    pub fn parse(text: &str, base_dir: PathBuf) -> CResult<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("line {}: expected `key = value`", lineno + 1));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return err(format!("line {}: empty key or value", lineno + 1));
            }
            if entries.insert(key.clone(), value).is_some() {
                return err(format!("line {}: duplicate key `{key}`", lineno + 1));
            }
        }
        Ok(RawConfig { entries, base_dir })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn f64_or(&self, key: &str, default: f64) -> CResult<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .map_err(|_| ConfigError(format!("{key}: `{v}` is not a number"))),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> CResult<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<usize>()
                .map_err(|_| ConfigError(format!("{key}: `{v}` is not a nonnegative integer"))),
        }
    }

    fn u64_or(&self, key: &str, default: u64) -> CResult<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<u64>()
                .map_err(|_| ConfigError(format!("{key}: `{v}` is not an integer"))),
        }
    }

    fn resolve_path(&self, value: &str) -> PathBuf {
        let p = Path::new(value);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Everything a command needs, with defaults materialized and numeric ranges
/// validated. Building one never runs heavy computation beyond the constant
/// estimation needed to derive solver parameters.
pub struct ResolvedConfig {
    pub model: Box<dyn Hamiltonian>,
    pub grid: TorusGrid,
    pub constants: ModelConstants,
    pub lo_params: LaxOleinikParams,
    pub m0: GridMeasure,
    pub particles: usize,
    pub dt: f64,
    pub time_steps: usize,
    pub seed: u64,
    pub solve_params: SolveParams,
    pub out_dir: PathBuf,
    pub sample_seed: u64,
    /// Fully-resolved key/value echo for the manifest.
    pub echo: BTreeMap<String, String>,
}

pub fn load(
    path: &Path,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
) -> CResult<ResolvedConfig> {
    let raw = RawConfig::from_file(path)?;
    resolve(&raw, out_override, seed_override)
}

fn fmt_num(x: f64) -> String {
    let mut s = String::new();
    let _ = write!(s, "{x}");
    s
}

const KNOWN_KEYS: &[&str] = &[
    "grid.d",
    "grid.n",
    "model.family",
    "model.kernel.scale",
    "model.kernel.table",
    "model.f0",
    "model.f_cos",
    "model.v0",
    "model.table",
    "model.p_max",
    "model.legendre.radius",
    "model.sample_seed",
    "weakkam.dtau",
    "weakkam.search_radius",
    "weakkam.n_burn",
    "weakkam.n_window",
    "weakkam.eps_aubry",
    "weakkam.tol_fp",
    "initial.measure",
    "transport.particles",
    "transport.dt",
    "transport.steps",
    "transport.seed",
    "solver.damping",
    "solver.max_iter",
    "solver.tol",
    "output.dir",
    "output.formats",
];

pub fn resolve(
    raw: &RawConfig,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
) -> CResult<ResolvedConfig> {
    // Misspelled keys silently falling back to defaults would poison
    // reproducibility manifests; reject anything unknown up front.
    for key in raw.entries.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return err(format!("unknown configuration key `{key}`"));
        }
    }

    // Grid section.
    let dim = raw.usize_or("grid.d", 1)?;
    if !(1..=2).contains(&dim) {
        return err(format!("grid.d must be 1 or 2, got {dim}"));
    }
    let n = raw.usize_or("grid.n", 128)?;
    let grid = TorusGrid::new(dim, n).map_err(|e| ConfigError(e.to_string()))?;

    // Model section.
    let family = raw.get("model.family").unwrap_or("mechanical").to_string();
    let mut spec = ModelSpec {
        family: family.clone(),
        dim,
        ..Default::default()
    };
    for key in ["kernel.scale", "f0", "f_cos", "v0", "legendre.radius"] {
        if let Some(v) = raw.get(&format!("model.{key}")) {
            let parsed = v
                .parse::<f64>()
                .map_err(|_| ConfigError(format!("model.{key}: `{v}` is not a number")))?;
            spec.params.insert(key.to_string(), parsed);
        }
    }
    if let Some(table_path) = raw.get("model.kernel.table") {
        spec.kernel_table = Some(load_kernel_table(&raw.resolve_path(table_path))?);
    }
    if let Some(table_path) = raw.get("model.table") {
        let p_max = raw.f64_or("model.p_max", 4.0)?;
        spec.hamiltonian_table = Some(load_hamiltonian_table(
            &raw.resolve_path(table_path),
            p_max,
        )?);
    }
    let registry = FamilyRegistry::with_builtins();
    let model = registry
        .build(&spec)
        .map_err(|e| ConfigError(format!("model: {e}")))?;

    // Structural constants drive the derived solver parameters.
    let sample_seed = raw.u64_or("model.sample_seed", 1)?;
    let samples = default_measure_samples(grid, sample_seed);
    let constants = estimate_constants(model.as_ref(), grid, &samples)
        .map_err(|e| ConfigError(format!("constant estimation: {e}")))?;

    // Weak-KAM section.
    let dtau = raw.f64_or("weakkam.dtau", LaxOleinikParams::DEFAULT_DTAU)?;
    if !(dtau.is_finite() && dtau > 0.0) {
        return err(format!("weakkam.dtau must be positive, got {dtau}"));
    }
    let mut lo_params = LaxOleinikParams::from_constants(grid, &constants, dtau);
    lo_params.n_burn = raw.usize_or("weakkam.n_burn", lo_params.n_burn)?;
    lo_params.n_window = raw.usize_or("weakkam.n_window", lo_params.n_window)?;
    if let Some(v) = raw.get("weakkam.eps_aubry") {
        if v != "auto" {
            lo_params.eps_aubry = v
                .parse::<f64>()
                .map_err(|_| ConfigError(format!("weakkam.eps_aubry: `{v}` is not a number")))?;
        }
    }
    if let Some(v) = raw.get("weakkam.search_radius") {
        if v != "auto" {
            lo_params.search_radius = v.parse::<f64>().map_err(|_| {
                ConfigError(format!("weakkam.search_radius: `{v}` is not a number"))
            })?;
        }
    }
    lo_params.tol_fp = raw.f64_or("weakkam.tol_fp", lo_params.tol_fp)?;
    lo_params
        .validate(grid)
        .map_err(|e| ConfigError(format!("weakkam: {e}")))?;

    // Initial measure.
    let m0_spec = raw.get("initial.measure").unwrap_or("uniform").to_string();
    let m0 = parse_measure(&m0_spec, grid, &raw.base_dir)?;

    // Transport section.
    let particles = raw.usize_or("transport.particles", 8192)?;
    if particles < weakmfg::torus::MIN_PARTICLES {
        return err(format!(
            "transport.particles must be at least {}, got {particles}",
            weakmfg::torus::MIN_PARTICLES
        ));
    }
    let dt = raw.f64_or("transport.dt", 0.05)?;
    if !(dt.is_finite() && dt > 0.0) {
        return err(format!("transport.dt must be positive, got {dt}"));
    }
    let time_steps = raw.usize_or("transport.steps", 20)?;
    if time_steps == 0 {
        return err("transport.steps must be at least 1");
    }
    let seed = seed_override.unwrap_or(raw.u64_or("transport.seed", 7)?);

    // Solver section.
    let solve_params = SolveParams {
        damping: raw.f64_or("solver.damping", 0.5)?,
        max_iter: raw.usize_or("solver.max_iter", 50)?,
        tol: raw.f64_or("solver.tol", 1e-2)?,
    };
    solve_params
        .validate()
        .map_err(|e| ConfigError(format!("solver: {e}")))?;

    // Input tables resolve against the config file; outputs land relative to
    // the working directory, like any `-o`-style destination.
    let out_dir = out_override
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(raw.get("output.dir").unwrap_or("out")));

    // Fully-resolved echo, defaults included.
    let mut echo = BTreeMap::new();
    echo.insert("grid.d".into(), dim.to_string());
    echo.insert("grid.n".into(), n.to_string());
    echo.insert("model.family".into(), family);
    for (k, v) in &spec.params {
        echo.insert(format!("model.{k}"), fmt_num(*v));
    }
    if spec.family == "mechanical" && !spec.params.contains_key("kernel.scale") {
        echo.insert("model.kernel.scale".into(), "1".into());
    }
    if let Some(p) = raw.get("model.kernel.table") {
        echo.insert("model.kernel.table".into(), p.to_string());
    }
    if let Some(p) = raw.get("model.table") {
        echo.insert("model.table".into(), p.to_string());
        echo.insert(
            "model.p_max".into(),
            fmt_num(raw.f64_or("model.p_max", 4.0)?),
        );
    }
    echo.insert("model.sample_seed".into(), sample_seed.to_string());
    echo.insert("weakkam.dtau".into(), fmt_num(lo_params.dtau));
    echo.insert(
        "weakkam.search_radius".into(),
        fmt_num(lo_params.search_radius),
    );
    echo.insert("weakkam.n_burn".into(), lo_params.n_burn.to_string());
    echo.insert("weakkam.n_window".into(), lo_params.n_window.to_string());
    echo.insert("weakkam.eps_aubry".into(), fmt_num(lo_params.eps_aubry));
    echo.insert("weakkam.tol_fp".into(), fmt_num(lo_params.tol_fp));
    echo.insert("initial.measure".into(), m0_spec);
    echo.insert("transport.particles".into(), particles.to_string());
    echo.insert("transport.dt".into(), fmt_num(dt));
    echo.insert("transport.steps".into(), time_steps.to_string());
    echo.insert("transport.seed".into(), seed.to_string());
    echo.insert("solver.damping".into(), fmt_num(solve_params.damping));
    echo.insert("solver.max_iter".into(), solve_params.max_iter.to_string());
    echo.insert("solver.tol".into(), fmt_num(solve_params.tol));
    // The echo materializes the configuration, not the run placement: a
    // --out override must not change the manifest bytes.
    echo.insert(
        "output.dir".into(),
        raw.get("output.dir").unwrap_or("out").to_string(),
    );

    Ok(ResolvedConfig {
        model,
        grid,
        constants,
        lo_params,
        m0,
        particles,
        dt,
        time_steps,
        seed,
        solve_params,
        out_dir,
        sample_seed,
        echo,
    })
}

/// Measure specifications: `uniform`, `dirac:<x>`, `random:<seed>`, or
/// `file:<path>` (CSV `node_index,weight`).
pub fn parse_measure(spec: &str, grid: TorusGrid, base_dir: &Path) -> CResult<GridMeasure> {
    if spec == "uniform" {
        return Ok(GridMeasure::uniform(grid));
    }
    if let Some(x) = spec.strip_prefix("dirac:") {
        let x: f64 = x
            .parse()
            .map_err(|_| ConfigError(format!("dirac position `{x}` is not a number")))?;
        return Ok(GridMeasure::dirac(grid, [x, 0.0]));
    }
    if let Some(seed) = spec.strip_prefix("random:") {
        let seed: u64 = seed
            .parse()
            .map_err(|_| ConfigError(format!("random seed `{seed}` is not an integer")))?;
        return Ok(random_measure(grid, seed));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let full = if Path::new(path).is_absolute() {
            PathBuf::from(path)
        } else {
            base_dir.join(path)
        };
        return load_measure_csv(&full, grid);
    }
    err(format!(
        "unknown measure spec `{spec}` (expected uniform | dirac:<x> | random:<seed> | file:<path>)"
    ))
}

/// Seeded strictly-positive random measure (used by probes and samples).
pub fn random_measure(grid: TorusGrid, seed: u64) -> GridMeasure {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..grid.num_nodes())
        .map(|_| rng.random::<f64>() + 0.05)
        .collect();
    GridMeasure::normalized(grid, weights).expect("positive weights")
}

pub fn load_measure_csv(path: &Path, grid: TorusGrid) -> CResult<GridMeasure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read measure {}: {e}", path.display())))?;
    let mut weights = vec![0.0f64; grid.num_nodes()];
    let mut seen = vec![false; grid.num_nodes()];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("node") {
            continue;
        }
        let mut parts = line.split(',');
        let (Some(i), Some(w)) = (parts.next(), parts.next()) else {
            return err(format!(
                "{}:{}: expected `node,weight`",
                path.display(),
                lineno + 1
            ));
        };
        let i: usize = i.trim().parse().map_err(|_| {
            ConfigError(format!("{}:{}: bad node index", path.display(), lineno + 1))
        })?;
        let w: f64 = w
            .trim()
            .parse()
            .map_err(|_| ConfigError(format!("{}:{}: bad weight", path.display(), lineno + 1)))?;
        if i >= weights.len() {
            return err(format!(
                "{}:{}: node {i} out of range ({} nodes)",
                path.display(),
                lineno + 1,
                weights.len()
            ));
        }
        weights[i] = w;
        seen[i] = true;
    }
    if !seen.iter().any(|&s| s) {
        return err(format!("{}: no measure rows found", path.display()));
    }
    GridMeasure::new(grid, weights).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

/// Kernel table CSV: `i,j,value` rows on an n x n node lattice.
pub fn load_kernel_table(path: &Path) -> CResult<KernelTable> {
    let triples = load_triples(path)?;
    let n = triples
        .iter()
        .map(|&(i, j, _)| i.max(j) + 1)
        .max()
        .unwrap_or(0);
    let mut values = vec![f64::NAN; n * n];
    for (i, j, v) in triples {
        values[i * n + j] = v;
    }
    if values.iter().any(|v| v.is_nan()) {
        return err(format!(
            "{}: kernel table has missing entries",
            path.display()
        ));
    }
    KernelTable::new(n, values).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

/// Hamiltonian table CSV: `i,j,value` with `i` indexing x-nodes and `j`
/// momentum samples on `[-p_max, p_max]`.
pub fn load_hamiltonian_table(path: &Path, p_max: f64) -> CResult<HamiltonianTable> {
    let triples = load_triples(path)?;
    let x_nodes = triples.iter().map(|&(i, _, _)| i + 1).max().unwrap_or(0);
    let p_samples = triples.iter().map(|&(_, j, _)| j + 1).max().unwrap_or(0);
    let mut values = vec![f64::NAN; x_nodes * p_samples];
    for (i, j, v) in triples {
        values[i * p_samples + j] = v;
    }
    if values.iter().any(|v| v.is_nan()) {
        return err(format!(
            "{}: Hamiltonian table has missing entries",
            path.display()
        ));
    }
    Ok(HamiltonianTable {
        x_nodes,
        p_samples,
        p_max,
        values,
    })
}

fn load_triples(path: &Path) -> CResult<Vec<(usize, usize, f64)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read table {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('i') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return err(format!(
                "{}:{}: expected `i,j,value`",
                path.display(),
                lineno + 1
            ));
        }
        let i: usize = fields[0].parse().map_err(|_| {
            ConfigError(format!("{}:{}: bad row index", path.display(), lineno + 1))
        })?;
        let j: usize = fields[1].parse().map_err(|_| {
            ConfigError(format!(
                "{}:{}: bad column index",
                path.display(),
                lineno + 1
            ))
        })?;
        let v: f64 = fields[2]
            .parse()
            .map_err(|_| ConfigError(format!("{}:{}: bad value", path.display(), lineno + 1)))?;
        out.push((i, j, v));
    }
    if out.is_empty() {
        return err(format!("{}: empty table", path.display()));
    }
    Ok(out)
}
