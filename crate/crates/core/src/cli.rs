//! Command-line driver: configuration loading, subcommand execution and
//! report emission. The `circtype` binary is a thin wrapper over [`run`].
//!
//! Every run writes into the output directory:
//!
//! - `summary.json`: scalar results, versioned by `schema_version`;
//! - one or more data tables (`*.csv`, or `*.json` with `--format json`);
//! - `manifest.json`: resolved configuration and settings, seed, and SHA-256
//!   hashes of all inputs and outputs.
//!
//! Files are written to a temporary name and renamed into place. Exit codes:
//! 0 on success, 2 for invalid configuration or input, 3 for numerical
//! failures (a diagnostic summary and manifest are still written).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::acs::{
    check_bound_constraint, check_hermitian_constraint, AcsField, DeformationTensor, DeformedStructure, SampledDeformation,
    SamplingPlan, StandardStructure,
};
use crate::error::{Error, Result};
use crate::generator::{build_phi_leading, probe_points, Amplitude, GeneratorInput};
use crate::geometry::{ComplexPoint, ScalarField, StandardExhaustion};
use crate::kobayashi::{
    exhaustion_field, extremal_disk, indicatrix, pushforward_deformation, CircularRepresentation, Domain,
    DomainSpec,
};
use crate::ma_verify::{
    christoffel_symmetry_residual, curvature_component, curvature_symmetry_residual, line_angle, ma_residuals,
    CurvatureMethod, ExhaustionMetric, ExprMetric, FlatMetric, MetricBlock, Slots,
};
use crate::settings::Settings;
use crate::spectrum::{
    decay_fit, default_tolerance, direction_grid, extract_grid, predict_regularity, regularity_to_vanishing,
    vanishing_order, RegularityPrediction, VanishingOrder,
};

/// Version of `summary.json` and `manifest.json`.
pub const REPORT_SCHEMA_VERSION: u32 = 1;
/// Seed used when neither the flag nor the config provides one.
pub const DEFAULT_SEED: u64 = 0x5eed_c1c1;
pub const DEFAULT_PROBES: usize = 1000;
pub const DEFAULT_DECAY_RADII: [f64; 5] = [0.05, 0.1, 0.2, 0.3, 0.4];
pub const DEFAULT_TRACE_SAMPLES: usize = 64;

#[derive(Parser, Debug)]
#[command(name = "circtype", version, about = "Circular-type domains: spectra, generators, Monge-Ampere checks and Kobayashi geometry")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default `circtype-out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Fiber Fourier modes, vanishing order and decay of a deformation tensor.
    Spectrum,
    /// Leading-order deformation tensor from a generator recipe.
    Generate,
    /// Monge-Ampere residuals and foliation kernel on random probes.
    VerifyMa,
    /// Extremal disk of a domain through a point and direction.
    ExtremalDisk,
    /// Kobayashi indicatrix at the center and its linear normalization.
    Indicatrix,
    /// Normal-form deformation tensor of a domain.
    Normalize,
    /// Christoffel symbols and curvature of a metric block.
    Curvature,
    /// Regularity classes predicted from a vanishing order.
    Regularity {
        /// Vanishing order.
        #[arg(long)]
        k: Option<usize>,
        /// Smoothness `2k` of the exhaustion for the converse table.
        #[arg(long)]
        two_k: Option<i64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Generate => "generate",
            Command::VerifyMa => "verify-ma",
            Command::ExtremalDisk => "extremal-disk",
            Command::Indicatrix => "indicatrix",
            Command::Normalize => "normalize",
            Command::Curvature => "curvature",
            Command::Regularity { .. } => "regularity",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Input recipe, tagged by `type`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Recipe {
    /// `phi = 0` on the unit ball.
    Standard {
        #[serde(default = "two_dims")]
        dimension: usize,
    },
    Generator {
        m: u32,
        fhat: String,
        epsilon: Amplitude,
        #[serde(default = "two_dims")]
        dimension: usize,
    },
    /// Fiber polynomial `sum c_k zeta^k` in dimension 2, modes as `[k, re, im]`.
    Planted { modes: Vec<(u32, f64, f64)> },
    /// Sampled tensor file, relative to the config file.
    Deformation { path: PathBuf },
    Domain { domain: DomainSpec },
    /// Hermitian block given by `entries` (row-major), by the Levi matrix of
    /// `exhaustion`, or the identity when both are absent.
    Metric {
        dimension: usize,
        #[serde(default)]
        entries: Option<Vec<String>>,
        #[serde(default)]
        exhaustion: Option<String>,
    },
}

fn two_dims() -> usize {
    2
}

/// Run configuration. Unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub recipe: Option<Recipe>,
    #[serde(default)]
    pub settings: Settings,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub jobs: Option<usize>,
    /// Number of random probes for `verify-ma`.
    #[serde(default)]
    pub probes: Option<usize>,
    /// Base point for `extremal-disk` (default: the center).
    #[serde(default)]
    pub point: Option<Vec<[f64; 2]>>,
    /// Tangent direction for `extremal-disk`.
    #[serde(default)]
    pub direction: Option<Vec<[f64; 2]>>,
    /// Probe points for `curvature` (default: the origin).
    #[serde(default)]
    pub points: Option<Vec<Vec<[f64; 2]>>>,
    /// Curvature slots `[a, b, c, d]` (default: all).
    #[serde(default)]
    pub slots: Option<Vec<[usize; 4]>>,
    /// Leaf index for the curvature shortcut comparison.
    #[serde(default)]
    pub leaf: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub two_k: Option<i64>,
    #[serde(default)]
    pub decay_radii: Option<Vec<f64>>,
    /// Sampling grid for `generate` and `normalize`.
    #[serde(default)]
    pub plan: Option<SamplingPlan>,
    /// Boundary samples of the `extremal-disk` trace.
    #[serde(default)]
    pub trace_samples: Option<usize>,
}

/// Loaded configuration together with the files it was read from.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub inputs: Vec<PathBuf>,
}

/// Parse a configuration file; defaults are filled and settings validated.
pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let config = parse_config(&text)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut inputs = vec![path.to_path_buf()];
    if let Some(Recipe::Deformation { path }) = &config.recipe {
        inputs.push(base_dir.join(path));
    }
    Ok(LoadedConfig { config, base_dir, inputs })
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.settings.validate()?;
    Ok(config)
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => format!("{v:e}"),
            Cell::Text(v) => v.clone(),
        }
    }
}

/// Tabular output; `name` is the file stem.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    fn with_columns(name: &str, columns: Vec<String>) -> Self {
        Table { name: name.into(), columns, rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn encode(&self, format: Format) -> Result<(String, Vec<u8>)> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.columns)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::render))?;
                }
                let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
                Ok((format!("{}.csv", self.name), bytes))
            }
            Format::Json => {
                let v = json!({ "schema_version": REPORT_SCHEMA_VERSION, "columns": self.columns, "rows": self.rows });
                Ok((format!("{}.json", self.name), serde_json::to_vec_pretty(&v)?))
            }
        }
    }
}

/// Results of one command.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub summary: Value,
    pub tables: Vec<Table>,
    /// Additional JSON documents such as sampled tensors.
    pub documents: Vec<(String, Vec<u8>)>,
}

impl Report {
    fn new(summary: Value) -> Self {
        Report { summary, tables: Vec::new(), documents: Vec::new() }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes every file to a temporary name first, then renames them all.
/// Temporary files are removed when anything fails.
fn write_atomically(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut staged = Vec::new();
    let result = (|| -> Result<()> {
        for (name, bytes) in files {
            let tmp = dir.join(format!(".{name}.tmp"));
            staged.push(tmp.clone());
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        for (tmp, (name, _)) in staged.iter().zip(files) {
            fs::rename(tmp, dir.join(name))?;
        }
        Ok(())
    })();
    if result.is_err() {
        for tmp in &staged {
            let _ = fs::remove_file(tmp);
        }
    }
    result
}

fn point_from_pairs(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|p| Complex64::new(p[0], p[1])).collect()
}

fn pairs(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

fn matrix_pairs(m: &nalgebra::DMatrix<Complex64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|k| [m[(i, k)].re, m[(i, k)].im]).collect()).collect()
}

// ---------------------------------------------------------------------------
// Commands

/// Effective parameters of a run after merging flags into the configuration.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub command: Command,
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub inputs: Vec<PathBuf>,
    pub seed: u64,
    pub format: Format,
    pub jobs: usize,
    pub out: PathBuf,
}

impl Resolved {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let loaded = match &cli.config {
            Some(p) => load_config(p)?,
            None => LoadedConfig { config: RunConfig::default(), base_dir: PathBuf::new(), inputs: Vec::new() },
        };
        let mut config = loaded.config;
        if let Command::Regularity { k, two_k } = cli.command {
            config.k = k.or(config.k);
            config.two_k = two_k.or(config.two_k);
        }
        let seed = cli.seed.or(config.seed).unwrap_or(DEFAULT_SEED);
        let format = cli.format.or(config.format).unwrap_or_default();
        let jobs = cli.jobs.or(config.jobs).unwrap_or(0);
        let out = cli.out.clone().or(config.out.clone()).unwrap_or_else(|| PathBuf::from("circtype-out"));
        config.seed = Some(seed);
        config.format = Some(format);
        config.jobs = Some(jobs);
        config.out = Some(out.clone());
        Ok(Resolved { command: cli.command, config, base_dir: loaded.base_dir, inputs: loaded.inputs, seed, format, jobs, out })
    }
}

fn recipe(r: &Resolved) -> Result<&Recipe> {
    r.config
        .recipe
        .as_ref()
        .ok_or_else(|| Error::Config(format!("`{}` needs a recipe", r.command.name())))
}

fn wrong_recipe(r: &Resolved) -> Error {
    Error::Config(format!("recipe type is not supported by `{}`", r.command.name()))
}

/// Deformation tensor of a recipe, with a description for the summary.
fn tensor_from_recipe(r: &Resolved) -> Result<(DeformationTensor, Value)> {
    let s = &r.config.settings;
    match recipe(r)? {
        Recipe::Standard { dimension } => Ok((DeformationTensor::zero(*dimension), json!({ "type": "standard" }))),
        Recipe::Generator { m, fhat, epsilon, dimension } => {
            let probe = GeneratorInput::new(*m, fhat, 1.0, *dimension)?;
            let eps = epsilon.resolve(&probe.fhat, *m, *dimension, s)?;
            let input = GeneratorInput::new(*m, fhat, eps, *dimension)?;
            let out = build_phi_leading(&input, s)?;
            Ok((
                out.phi,
                json!({ "type": "generator", "epsilon": eps, "max_amplitude": finite_or_null(out.max_amplitude), "vanishing": out.vanishing }),
            ))
        }
        Recipe::Planted { modes } => {
            let coeffs = modes.iter().map(|&(k, re, im)| (k, Complex64::new(re, im))).collect();
            Ok((DeformationTensor::fiber_polynomial(coeffs), json!({ "type": "planted" })))
        }
        Recipe::Deformation { path } => {
            let full = r.base_dir.join(path);
            let text = fs::read_to_string(&full)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", full.display())))?;
            let sampled = SampledDeformation::from_json(&text)?;
            Ok((DeformationTensor::sampled(sampled), json!({ "type": "deformation" })))
        }
        _ => Err(wrong_recipe(r)),
    }
}

fn domain_from_recipe(r: &Resolved) -> Result<Domain> {
    match recipe(r)? {
        Recipe::Domain { domain } => domain.build(&r.config.settings),
        _ => Err(wrong_recipe(r)),
    }
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn vanishing_json(v: VanishingOrder) -> Value {
    match v {
        VanishingOrder::Order(k) => json!(k),
        VanishingOrder::AllVanish(_) => json!("all-vanish"),
    }
}

fn regularity_json(p: RegularityPrediction) -> Value {
    match p {
        RegularityPrediction::NoConclusion => json!({ "kind": "no_conclusion" }),
        RegularityPrediction::Classes { j_class, tau_class } => json!({
            "kind": "classes",
            "j_class": j_class,
            "tau_class": tau_class,
            "j": format!("C^{j_class}"),
            "tau": tau_class.map(|t| format!("C^{t}")).unwrap_or_else(|| "n/a".into()),
        }),
    }
}

fn cmd_spectrum(r: &Resolved) -> Result<Report> {
    let s = &r.config.settings;
    let (phi, source) = tensor_from_recipe(r)?;
    let grid = direction_grid(phi.dim(), s.directions)?;
    let spectra = extract_grid(&phi, &grid, s)?;
    let tol = default_tolerance(&spectra, s);
    let order = vanishing_order(&spectra, tol)?;
    let mut table = Table::new("spectrum", &["direction", "k", "row", "col", "abs", "re", "im", "radius"]);
    for (d, sp) in spectra.iter().enumerate() {
        for (k, m) in sp.modes.iter().enumerate() {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    let c = m[(i, j)];
                    table.push(vec![d.into(), k.into(), i.into(), j.into(), c.norm().into(), c.re.into(), c.im.into(), sp.radius.into()]);
                }
            }
        }
    }
    let radii = r.config.decay_radii.clone().unwrap_or_else(|| DEFAULT_DECAY_RADII.to_vec());
    let mut decay = Table::new("decay", &["log_r", "log_norm"]);
    // First grid direction along which the deviation is measurable.
    let mut slope = Value::Null;
    let mut decay_direction = Value::Null;
    for dir in &grid {
        match decay_fit(&phi, dir, &radii) {
            Ok(fit) => {
                for (x, y) in &fit.points {
                    decay.push(vec![(*x).into(), (*y).into()]);
                }
                slope = json!(fit.slope);
                decay_direction = json!(pairs(dir));
                break;
            }
            Err(Error::DegenerateFit(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    let max_negative = spectra.iter().map(|sp| sp.max_negative()).fold(0.0, f64::max);
    let prediction = match order {
        VanishingOrder::Order(k) => regularity_json(predict_regularity(k)),
        VanishingOrder::AllVanish(_) => Value::Null,
    };
    let summary = json!({
        "source": source,
        "directions": grid.len(),
        "samples": s.samples,
        "modes": s.modes,
        "radius": s.radius,
        "tolerance": tol,
        "vanishing_order": vanishing_json(order),
        "regularity": prediction,
        "max_negative_bin": max_negative,
        "decay_slope": slope,
        "decay_direction": decay_direction,
    });
    let mut rep = Report::new(summary);
    rep.tables = vec![table, decay];
    Ok(rep)
}

fn default_plan() -> SamplingPlan {
    SamplingPlan::uniform(0.3, 0.7, 3, 0.5, 5, 8)
}

fn cmd_generate(r: &Resolved) -> Result<Report> {
    let s = &r.config.settings;
    let Recipe::Generator { dimension, .. } = recipe(r)? else {
        return Err(wrong_recipe(r));
    };
    let (phi, source) = tensor_from_recipe(r)?;
    let probes = probe_points(*dimension, s)?;
    let mut table = Table::new("constraints", &["probe", "norm", "hermitian_residual", "bound_margin"]);
    let mut worst_herm: f64 = 0.0;
    let mut worst_margin = f64::INFINITY;
    for (i, x) in probes.iter().enumerate() {
        let h = check_hermitian_constraint(&phi, x, s)?;
        let b = check_bound_constraint(&phi, x)?;
        worst_herm = worst_herm.max(h);
        worst_margin = worst_margin.min(b);
        table.push(vec![i.into(), x.norm().into(), h.into(), b.into()]);
    }
    let mut rep = Report::new(json!({
        "source": source,
        "probes": probes.len(),
        "max_hermitian_residual": worst_herm,
        "min_bound_margin": worst_margin,
        "sampled": *dimension == 2,
    }));
    rep.tables.push(table);
    if *dimension == 2 {
        let plan = r.config.plan.clone().unwrap_or_else(default_plan);
        let sampled = SampledDeformation::from_tensor(&phi, &plan)?;
        rep.documents.push(("phi.json".into(), sampled.to_json()?.into_bytes()));
    }
    Ok(rep)
}

/// Structure, exhaustion and center for `verify-ma`.
enum MaSetting<'a> {
    Deformed(DeformedStructure, StandardExhaustion),
    Domain(&'a Domain, Box<dyn ScalarField + 'a>),
}

/// Largest affine coordinate `|w|` of tensor probes, matching the direction grid.
const PROBE_W_MAX: f64 = 0.85;

/// Seeded probes `(unit direction, fraction of the way to the boundary)`.
/// With `chart_bounded`, directions are drawn from `|w| <= 0.85` in the last
/// chart, the region where generated tensors are certified.
fn random_probes(n: usize, count: usize, seed: u64, chart_bounded: bool) -> Vec<(Vec<Complex64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut v: Vec<Complex64> = (0..n).map(|_| draw()).collect();
        if chart_bounded {
            let w2: f64 = v[..n - 1].iter().map(|c| c.norm_sqr()).sum();
            if w2 > PROBE_W_MAX * PROBE_W_MAX {
                continue;
            }
            let phase = Complex64::from_polar(1.0, std::f64::consts::PI * (draw().re + 1.0));
            v[n - 1] = Complex64::new(1.0, 0.0);
            v.iter_mut().for_each(|c| *c *= phase);
        }
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        let t = 0.1 + 0.85 * (draw().re + 1.0) / 2.0;
        out.push((v.into_iter().map(|c| c / norm).collect(), t));
    }
    out
}

fn cmd_verify_ma(r: &Resolved) -> Result<Report> {
    use rayon::prelude::*;
    let s = &r.config.settings;
    let domain;
    let setting = match recipe(r)? {
        Recipe::Domain { .. } => {
            domain = domain_from_recipe(r)?;
            let field = exhaustion_field(&domain, s)?;
            MaSetting::Domain(&domain, field)
        }
        _ => {
            let (phi, _) = tensor_from_recipe(r)?;
            let n = phi.dim();
            MaSetting::Deformed(DeformedStructure::new(phi), StandardExhaustion { n })
        }
    };
    let (n, center) = match &setting {
        MaSetting::Deformed(_, t) => (t.n, ComplexPoint::origin(t.n)),
        MaSetting::Domain(d, _) => (d.n, d.center.clone()),
    };
    let count = r.config.probes.unwrap_or(DEFAULT_PROBES);
    if count == 0 {
        return Err(Error::Config("probes must be positive".into()));
    }
    let std_j = StandardStructure::new(n);
    let probes = random_probes(n, count, r.seed, matches!(setting, MaSetting::Deformed(..)));
    let eval = |(u, t): &(Vec<Complex64>, f64)| -> Result<(Vec<Complex64>, crate::ma_verify::MaReport)> {
        let (tau, j, scale): (&dyn ScalarField, &dyn AcsField, f64) = match &setting {
            MaSetting::Deformed(j, tau) => (tau, j, 1.0),
            MaSetting::Domain(d, f) => (f.as_ref(), &std_j, d.distance_to_boundary(center.coords(), u)?),
        };
        let x: Vec<Complex64> = center.coords().iter().zip(u).map(|(c, v)| c + v * (t * scale)).collect();
        let rep = ma_residuals(tau, j, &ComplexPoint::new(x.clone())?, s)?;
        Ok((x, rep))
    };
    let mut results = Vec::with_capacity(count);
    const CADENCE: usize = 100;
    for (i, chunk) in probes.chunks(CADENCE).enumerate() {
        let part: Vec<_> = chunk.par_iter().map(eval).collect::<Result<_>>()?;
        results.extend(part);
        eprintln!("verify-ma: {}/{} probes", (i * CADENCE + chunk.len()).min(count), count);
    }
    let mut table = Table::new(
        "ma",
        &["probe", "norm", "det_residual", "min_eig_ddc_tau", "min_eig_ddc_log_tau", "kernel_angle", "gap_ratio"],
    );
    let (mut det, mut angle, mut min_tau, mut min_gap) = (0.0f64, 0.0f64, f64::INFINITY, f64::INFINITY);
    for (i, (x, rep)) in results.iter().enumerate() {
        let radial: Vec<Complex64> = x.iter().zip(center.coords()).map(|(a, c)| a - c).collect();
        let kernel = point_from_pairs(&rep.kernel);
        let a = line_angle(&kernel, &radial);
        det = det.max(rep.det_residual);
        angle = angle.max(a);
        min_tau = min_tau.min(rep.min_eig_ddc_tau);
        min_gap = min_gap.min(rep.gap_ratio);
        let norm = radial.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        table.push(vec![
            i.into(),
            norm.into(),
            rep.det_residual.into(),
            rep.min_eig_ddc_tau.into(),
            rep.min_eig_ddc_log_tau.into(),
            a.into(),
            rep.gap_ratio.into(),
        ]);
    }
    let mut rep = Report::new(json!({
        "probes": count,
        "seed": r.seed,
        "max_det_residual": det,
        "max_kernel_angle": angle,
        "min_eig_ddc_tau": min_tau,
        "min_gap_ratio": min_gap,
    }));
    rep.tables.push(table);
    Ok(rep)
}

fn cmd_extremal_disk(r: &Resolved) -> Result<Report> {
    let s = &r.config.settings;
    let d = domain_from_recipe(r)?;
    let v = point_from_pairs(r.config.direction.as_deref().ok_or_else(|| Error::Config("`extremal-disk` needs a direction".into()))?);
    let p = match &r.config.point {
        Some(p) => point_from_pairs(p),
        None => d.center.coords().to_vec(),
    };
    if v.len() != d.n || p.len() != d.n {
        return Err(Error::DimensionMismatch { expected: d.n, got: v.len().min(p.len()) });
    }
    if v.iter().all(|c| c.norm() == 0.0) {
        return Err(Error::DegenerateDirection);
    }
    let disk = extremal_disk(&d, &p, &v, s)?;
    let samples = r.config.trace_samples.unwrap_or(DEFAULT_TRACE_SAMPLES).max(1);
    let mut cols = vec!["theta".to_string()];
    for i in 1..=d.n {
        cols.push(format!("z{i}_re"));
        cols.push(format!("z{i}_im"));
    }
    cols.push("rho".into());
    let mut table = Table::with_columns("disk", cols);
    let mut worst_rho: f64 = 0.0;
    for q in 0..samples {
        let theta = std::f64::consts::TAU * q as f64 / samples as f64;
        let z = disk.disk.eval(Complex64::from_polar(1.0, theta));
        let rho = d.rho(&z)?;
        worst_rho = worst_rho.max(rho.abs());
        let mut row = vec![Cell::from(theta)];
        for c in &z {
            row.push(c.re.into());
            row.push(c.im.into());
        }
        row.push(rho.into());
        table.push(row);
    }
    let mut rep = Report::new(json!({
        "point": pairs(&p),
        "direction": pairs(&v),
        "lambda": disk.lambda,
        "kappa": disk.kappa,
        "penalty": disk.penalty,
        "iterations": disk.iterations,
        "method": disk.method,
        "max_boundary_rho": worst_rho,
        "coefficients": disk.disk.coeffs.iter().map(|c| pairs(c)).collect::<Vec<_>>(),
    }));
    rep.tables.push(table);
    Ok(rep)
}

fn cmd_indicatrix(r: &Resolved) -> Result<Report> {
    let s = &r.config.settings;
    let d = domain_from_recipe(r)?;
    let ind = indicatrix(&d, s.directions, s)?;
    let mut cols = vec!["direction".to_string()];
    for i in 1..=d.n {
        cols.push(format!("v{i}_re"));
        cols.push(format!("v{i}_im"));
    }
    cols.push("kappa".into());
    let mut table = Table::with_columns("indicatrix", cols);
    for (i, (v, k)) in ind.directions.iter().zip(&ind.kappa).enumerate() {
        let mut row = vec![Cell::from(i)];
        for c in v {
            row.push(c.re.into());
            row.push(c.im.into());
        }
        row.push((*k).into());
        table.push(row);
    }
    let mut rep = Report::new(json!({
        "directions": ind.directions.len(),
        "c2_at_center": ind.c2_at_center,
        "levi": matrix_pairs(&ind.levi),
        "basis": matrix_pairs(&ind.basis),
        "normalization_residual": ind.residual,
        "kappa_identity_residual": ind.kappa_identity_residual(),
    }));
    rep.tables.push(table);
    Ok(rep)
}

fn cmd_normalize(r: &Resolved) -> Result<Report> {
    let s = &r.config.settings;
    let d = domain_from_recipe(r)?;
    let rep_map = CircularRepresentation::new(&d, s)?;
    let plan = r.config.plan.clone().unwrap_or_else(default_plan);
    let sampled = pushforward_deformation(&d, &plan, s)?;
    let mut rep = Report::new(json!({
        "basis": matrix_pairs(&rep_map.basis),
        "indicatrix_residual": rep_map.indicatrix_residual,
        "max_abs_phi": sampled.max_abs(),
        "samples": sampled.values.len(),
    }));
    rep.documents.push(("phi.json".into(), sampled.to_json()?.into_bytes()));
    Ok(rep)
}

fn metric_from_recipe<'a>(r: &Resolved, domain: Option<&'a Domain>) -> Result<Box<dyn MetricBlock + 'a>> {
    let s = r.config.settings.clone();
    match recipe(r)? {
        Recipe::Metric { dimension, entries: Some(e), exhaustion: None } => {
            let refs: Vec<&str> = e.iter().map(String::as_str).collect();
            Ok(Box::new(ExprMetric::new(*dimension, &refs)?))
        }
        Recipe::Metric { dimension, entries: None, exhaustion: Some(t) } => {
            let tau = Box::new(crate::geometry::ExprField::parse(t, *dimension)?);
            Ok(Box::new(ExhaustionMetric { tau, settings: s }))
        }
        Recipe::Metric { dimension, entries: None, exhaustion: None } => Ok(Box::new(FlatMetric { n: *dimension })),
        Recipe::Metric { .. } => Err(Error::Config("metric recipe takes either `entries` or `exhaustion`".into())),
        Recipe::Standard { dimension } => Ok(Box::new(FlatMetric { n: *dimension })),
        Recipe::Domain { .. } => {
            let d = domain.expect("domain prepared by caller");
            Ok(Box::new(ExhaustionMetric { tau: exhaustion_field(d, &s)?, settings: s }))
        }
        _ => Err(wrong_recipe(r)),
    }
}

fn cmd_curvature(r: &Resolved) -> Result<Report> {
    let s = &r.config.settings;
    let domain = match recipe(r)? {
        Recipe::Domain { .. } => Some(domain_from_recipe(r)?),
        _ => None,
    };
    let w = metric_from_recipe(r, domain.as_ref())?;
    let n = w.dim();
    let points: Vec<ComplexPoint> = match &r.config.points {
        Some(p) => p.iter().map(|q| ComplexPoint::new(point_from_pairs(q))).collect::<Result<_>>()?,
        None => vec![ComplexPoint::origin(n)],
    };
    let slots: Vec<Slots> = match &r.config.slots {
        Some(v) => v.iter().map(|a| Slots::new(a[0], a[1], a[2], a[3])).collect(),
        None => (0..n * n * n * n).map(|i| Slots::new(i / (n * n * n), (i / (n * n)) % n, (i / n) % n, i % n)).collect(),
    };
    let mut cols: Vec<&str> = vec!["point", "a", "b", "c", "d", "re", "im"];
    if r.config.leaf.is_some() {
        cols.extend(["shortcut_re", "shortcut_im"]);
    }
    let mut table = Table::new("curvature", &cols);
    let (mut max_r, mut max_sym, mut max_gamma_sym, mut max_diff) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (pi, x) in points.iter().enumerate() {
        max_gamma_sym = max_gamma_sym.max(christoffel_symmetry_residual(w.as_ref(), x, s)?);
        for &sl in &slots {
            let v = curvature_component(w.as_ref(), x, sl, CurvatureMethod::Full, s)?;
            max_r = max_r.max(v.norm());
            max_sym = max_sym.max(curvature_symmetry_residual(w.as_ref(), x, sl, s)?);
            let mut row: Vec<Cell> = vec![pi.into(), sl.a.into(), sl.b.into(), sl.c.into(), sl.d.into(), v.re.into(), v.im.into()];
            if let Some(leaf) = r.config.leaf {
                let sc = curvature_component(w.as_ref(), x, sl, CurvatureMethod::LeafShortcut { leaf }, s)?;
                max_diff = max_diff.max((sc - v).norm());
                row.push(sc.re.into());
                row.push(sc.im.into());
            }
            table.push(row);
        }
    }
    let mut rep = Report::new(json!({
        "points": points.len(),
        "components": slots.len(),
        "max_abs_curvature": max_r,
        "max_symmetry_residual": max_sym,
        "max_christoffel_asymmetry": max_gamma_sym,
        "max_shortcut_difference": r.config.leaf.map(|_| max_diff),
    }));
    rep.tables.push(table);
    Ok(rep)
}

fn cmd_regularity(r: &Resolved) -> Result<Report> {
    let (k, two_k) = (r.config.k, r.config.two_k);
    if k.is_none() && two_k.is_none() {
        return Err(Error::Config("`regularity` needs `k` or `two_k`".into()));
    }
    let mut summary = BTreeMap::new();
    if let Some(k) = k {
        summary.insert("k", json!(k));
        summary.insert("prediction", regularity_json(predict_regularity(k)));
    }
    if let Some(t) = two_k {
        summary.insert("two_k", json!(t));
        summary.insert("vanishing_modes", json!(regularity_to_vanishing(t)?));
    }
    Ok(Report::new(json!(summary)))
}

/// Execute a resolved command without writing anything.
pub fn execute(r: &Resolved) -> Result<Report> {
    match r.command {
        Command::Spectrum => cmd_spectrum(r),
        Command::Generate => cmd_generate(r),
        Command::VerifyMa => cmd_verify_ma(r),
        Command::ExtremalDisk => cmd_extremal_disk(r),
        Command::Indicatrix => cmd_indicatrix(r),
        Command::Normalize => cmd_normalize(r),
        Command::Curvature => cmd_curvature(r),
        Command::Regularity { .. } => cmd_regularity(r),
    }
}

fn manifest(r: &Resolved, outputs: &[(String, Vec<u8>)], status: &str, error: Option<&Error>) -> Result<Vec<u8>> {
    let inputs = r
        .inputs
        .iter()
        .map(|p| {
            let bytes = fs::read(p)?;
            Ok(json!({ "path": p.display().to_string(), "sha256": sha256_hex(&bytes) }))
        })
        .collect::<Result<Vec<_>>>()?;
    let outs: Vec<Value> = outputs.iter().map(|(n, b)| json!({ "name": n, "sha256": sha256_hex(b) })).collect();
    let v = json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "tool": "circtype",
        "version": env!("CARGO_PKG_VERSION"),
        "command": r.command.name(),
        "status": status,
        "error": error.map(|e| e.to_string()),
        "seed": r.seed,
        "format": r.format,
        "jobs": r.jobs,
        "settings": r.config.settings,
        "config": r.config,
        "inputs": inputs,
        "outputs": outs,
    });
    Ok(serde_json::to_vec_pretty(&v)?)
}

fn summary_bytes(r: &Resolved, status: &str, body: Value) -> Result<Vec<u8>> {
    let v = json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "command": r.command.name(),
        "status": status,
        "result": body,
    });
    Ok(serde_json::to_vec_pretty(&v)?)
}

/// Execute and write all outputs.
pub fn run_resolved(r: &Resolved) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(r.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    match pool.install(|| execute(r)) {
        Ok(rep) => {
            let mut files = vec![("summary.json".to_string(), summary_bytes(r, "ok", rep.summary)?)];
            for t in &rep.tables {
                files.push(t.encode(r.format)?);
            }
            files.extend(rep.documents);
            let m = manifest(r, &files, "ok", None)?;
            files.push(("manifest.json".into(), m));
            write_atomically(&r.out, &files)
        }
        Err(e) if e.is_numerical() => {
            let mut files = vec![("summary.json".to_string(), summary_bytes(r, "error", json!({ "error": e.to_string() }))?)];
            let m = manifest(r, &files, "error", Some(&e))?;
            files.push(("manifest.json".into(), m));
            write_atomically(&r.out, &files)?;
            Err(e)
        }
        Err(e) => Err(e),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = Resolved::from_cli(&cli).and_then(|r| run_resolved(&r));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("{}").unwrap();
        assert_eq!(c.settings.samples, 64);
        assert_eq!(c.settings.modes, 16);
        assert_eq!(c.settings.directions, 32);
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = parse_config(r#"{"settings": {"samples": 64}, "bogus": 1}"#).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        let e = parse_config(r#"{"settings": {"sampels": 64}}"#).unwrap_err();
        assert!(e.to_string().contains("sampels"), "{e}");
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn recipes_parse_by_type() {
        let c = parse_config(r#"{"recipe": {"type": "generator", "m": 3, "fhat": "abs2(w)", "epsilon": "auto"}}"#).unwrap();
        assert!(matches!(c.recipe, Some(Recipe::Generator { dimension: 2, .. })));
        let c = parse_config(r#"{"recipe": {"type": "domain", "domain": {"kind": "ball", "dimension": 2}}}"#).unwrap();
        assert!(matches!(c.recipe, Some(Recipe::Domain { .. })));
        assert!(parse_config(r#"{"recipe": {"type": "teapot"}}"#).is_err());
    }

    #[test]
    fn table_encodings() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![1usize.into(), 0.5.into()]);
        let (name, bytes) = t.encode(Format::Csv).unwrap();
        assert_eq!(name, "t.csv");
        assert_eq!(String::from_utf8(bytes).unwrap(), "a,b\n1,5e-1\n");
        let (name, bytes) = t.encode(Format::Json).unwrap();
        assert_eq!(name, "t.json");
        let v: Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["rows"][0][1], json!(0.5));
    }
}
