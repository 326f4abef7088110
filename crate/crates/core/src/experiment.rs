//! End-to-end experiment: load a cloud, project it, rebuild the k-distance
//! filtration on both sides and audit how much of its structure survives.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, combinations};
use crate::error::{Error, Result};
use crate::filtration::{approx_kdist_cech, exact_kdist_cech, weighted_rips, FilteredComplex};
use crate::geometry::{Point, PointCloud, WeightedCloud};
use crate::kdistance::{
    approx_k_distance, assign_approx_weights, barycenter_cloud, k_distance, k_distance_sq,
    DEFAULT_BARYCENTER_BUDGET,
};
use crate::meb::{weighted_meb_with, MebOptions};
use crate::persistence::{certify_interleaving, compute_persistence, InterleavingCertificate, PersistenceDiagram};
use crate::projection::{
    apply, audit_distortion, difference_set, estimate_gaussian_width, gw_dimension, jl_dimension,
    sample_projector, DistortionReport, ProjectorKind, DEFAULT_JL_CONSTANT,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Additive slack on the `[1 − ε, 1 + ε]` preservation bands.
pub const BAND_SLACK: f64 = 1e-9;

/// Relative MEB tolerance used when auditing radii.
pub const AUDIT_MEB_TOL: f64 = 1e-10;

/// Monte-Carlo samples for the Gaussian width of the normalized difference set.
pub const GW_SAMPLES: usize = 200;

pub const DEFAULT_RADIUS_SAMPLES: usize = 500;
pub const DEFAULT_RADIUS_MAX_CARD: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetDim {
    AutoJl,
    AutoGw,
    Explicit(usize),
}

impl fmt::Display for TargetDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetDim::AutoJl => f.write_str("auto-jl"),
            TargetDim::AutoGw => f.write_str("auto-gw"),
            TargetDim::Explicit(d) => write!(f, "{d}"),
        }
    }
}

impl FromStr for TargetDim {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto-jl" => Ok(TargetDim::AutoJl),
            "auto-gw" => Ok(TargetDim::AutoGw),
            other => other
                .parse()
                .map(TargetDim::Explicit)
                .map_err(|_| Error::Config(format!("target dimension must be auto-jl, auto-gw or an integer, got '{other}'"))),
        }
    }
}

impl Serialize for TargetDim {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TargetDim {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiltrationMode {
    /// Weighted Čech complex of the barycentric cloud.
    ExactCech,
    /// Weighted Čech complex of the approximate k-distance cloud.
    ApproxCech,
    /// Weighted Rips complex of the approximate k-distance cloud.
    Rips,
}

impl fmt::Display for FiltrationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FiltrationMode::ExactCech => "exact-cech",
            FiltrationMode::ApproxCech => "approx-cech",
            FiltrationMode::Rips => "rips",
        })
    }
}

impl FromStr for FiltrationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-cech" => Ok(FiltrationMode::ExactCech),
            "approx-cech" => Ok(FiltrationMode::ApproxCech),
            "rips" => Ok(FiltrationMode::Rips),
            other => Err(Error::Config(format!("unknown filtration '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// CSV if any data line contains a comma, whitespace-separated otherwise.
    #[default]
    Auto,
    Csv,
    Whitespace,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(InputFormat::Auto),
            "csv" => Ok(InputFormat::Csv),
            "whitespace" | "ws" => Ok(InputFormat::Whitespace),
            other => Err(Error::Config(format!("unknown input format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub input_path: PathBuf,
    pub format: InputFormat,
    pub k: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub projector_kind: ProjectorKind,
    pub seed: u64,
    pub target_dim: TargetDim,
    pub jl_constant: f64,
    /// When false the map is the identity and `target_dim` is ignored.
    pub project: bool,
    pub filtration: FiltrationMode,
    pub max_homology_degree: usize,
    #[serde(with = "crate::persistence::inf_as_string")]
    pub alpha_max: f64,
    pub budget: usize,
    /// Random probes for the approximation sandwich audit.
    pub probes: usize,
    pub radius_samples: usize,
    pub radius_max_card: usize,
    pub output_path: Option<PathBuf>,
    pub svg_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(input_path: impl Into<PathBuf>, alpha_max: f64) -> Self {
        Self {
            input_path: input_path.into(),
            format: InputFormat::Auto,
            k: 2,
            epsilon: 0.25,
            delta: 0.1,
            projector_kind: ProjectorKind::Gaussian,
            seed: 0,
            target_dim: TargetDim::AutoJl,
            jl_constant: DEFAULT_JL_CONSTANT,
            project: true,
            filtration: FiltrationMode::ApproxCech,
            max_homology_degree: 1,
            alpha_max,
            budget: DEFAULT_BARYCENTER_BUDGET,
            probes: 1000,
            radius_samples: DEFAULT_RADIUS_SAMPLES,
            radius_max_card: DEFAULT_RADIUS_MAX_CARD,
            output_path: None,
            svg_dir: None,
        }
    }

    /// Checks the parameters against a loaded cloud.
    pub fn validate(&self, n: usize, ambient: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.k == 0 || self.k > n {
            return bad(format!("k = {} must lie in [1, n = {n}]", self.k));
        }
        for (name, v) in [("epsilon", self.epsilon), ("delta", self.delta)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} = {v} must lie in (0, 1)"));
            }
        }
        if !(self.jl_constant > 0.0 && self.jl_constant.is_finite()) {
            return bad(format!("JL constant {} must be positive", self.jl_constant));
        }
        if self.alpha_max.is_nan() || self.alpha_max < 0.0 {
            return bad(format!("alpha_max = {} must be >= 0", self.alpha_max));
        }
        if self.budget == 0 {
            return bad("budget must be positive".into());
        }
        if self.radius_max_card < 2 {
            return bad("radius checks need max cardinality >= 2".into());
        }
        if self.project {
            match self.target_dim {
                TargetDim::Explicit(d) if d == 0 || d > ambient => {
                    return bad(format!("target dimension {d} must lie in [1, D = {ambient}]"));
                }
                TargetDim::AutoJl | TargetDim::AutoGw if n < 2 => {
                    return bad("automatic target dimensions need at least two points".into());
                }
                TargetDim::AutoGw if self.projector_kind != ProjectorKind::Gaussian => {
                    return bad("auto-gw is only available for gaussian projectors".into());
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Parses a numeric matrix, one point per row. Blank lines and lines starting
/// with `#` are skipped.
pub fn parse_points(text: &str, format: InputFormat) -> Result<PointCloud<f64>> {
    let data_lines = || {
        text.lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
    };
    let csv = match format {
        InputFormat::Csv => true,
        InputFormat::Whitespace => false,
        InputFormat::Auto => data_lines().any(|(_, l)| l.contains(',')),
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (line, l) in data_lines() {
        let fields: Vec<&str> = if csv {
            l.split(',').map(str::trim).collect()
        } else {
            l.split_whitespace().collect()
        };
        let row = fields
            .iter()
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    line,
                    message: format!("non-numeric field '{f}'"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {w} columns, found {}", row.len()),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: text.lines().count(),
            message: "input contains no points".into(),
        });
    }
    PointCloud::from_rows(rows)
}

pub fn load_points(path: &Path, format: InputFormat) -> Result<PointCloud<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_points(&text, format)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexSample {
    pub subsets: Vec<Vec<usize>>,
    /// All subsets were returned because fewer than `count` exist.
    pub exhaustive: bool,
}

/// Random index subsets of cardinality in `[2, max_card]`, for radius audits.
/// The cardinality is drawn uniformly, then a uniform subset of that size.
pub fn sample_simplices_for_radius_check<T: crate::scalar::Scalar>(
    cloud: &WeightedCloud<T>,
    count: usize,
    max_card: usize,
    seed: u64,
) -> Result<SimplexSample> {
    if max_card < 2 {
        return Err(Error::contract("max_card must be >= 2"));
    }
    let n = cloud.len();
    let top = max_card.min(n);
    if top < 2 {
        return Ok(SimplexSample {
            subsets: Vec::new(),
            exhaustive: true,
        });
    }
    let available = (2..=top).try_fold(0u128, |acc, c| binomial(n, c).and_then(|b| acc.checked_add(b)));
    if available.is_some_and(|a| a <= count as u128) {
        let subsets = (2..=top).flat_map(|c| combinations(n, c)).collect();
        return Ok(SimplexSample {
            subsets,
            exhaustive: true,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subsets = (0..count)
        .map(|_| {
            let card = rng.random_range(2..=top);
            let mut s = sample_indices(&mut rng, n, card).into_vec();
            s.sort_unstable();
            s
        })
        .collect();
    Ok(SimplexSample {
        subsets,
        exhaustive: false,
    })
}

fn derive_seed(seed: u64, tag: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17) ^ tag.wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

fn in_band(ratio: f64, epsilon: f64) -> bool {
    ratio >= 1.0 - epsilon - BAND_SLACK && ratio <= 1.0 + epsilon + BAND_SLACK
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseAudit {
    pub k: usize,
    /// Points with a well-defined ratio.
    pub checked: usize,
    /// Points whose source k-distance is zero.
    pub degenerate: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub worst_index: Option<usize>,
    pub pass: bool,
}

/// Ratios `d²_{f(P),k}(f(x)) / d²_{P,k}(x)` over all `x ∈ P`.
pub fn pointwise_kdist_audit(
    source: &PointCloud<f64>,
    image: &PointCloud<f64>,
    k: usize,
    epsilon: f64,
) -> Result<PointwiseAudit> {
    if source.len() != image.len() {
        return Err(Error::contract("source and image differ in size"));
    }
    let ratios = (0..source.len())
        .into_par_iter()
        .map(|i| {
            let s = k_distance_sq(source.point(i), source, k)?;
            let t = k_distance_sq(image.point(i), image, k)?;
            Ok((s > 0.0).then(|| t / s))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut audit = PointwiseAudit {
        k,
        checked: 0,
        degenerate: 0,
        min_ratio: 1.0,
        max_ratio: 1.0,
        worst_index: None,
        pass: true,
    };
    let mut worst = -1.0;
    for (i, r) in ratios.into_iter().enumerate() {
        let Some(r) = r else {
            audit.degenerate += 1;
            continue;
        };
        if audit.checked == 0 {
            (audit.min_ratio, audit.max_ratio) = (r, r);
        }
        audit.checked += 1;
        audit.min_ratio = audit.min_ratio.min(r);
        audit.max_ratio = audit.max_ratio.max(r);
        if (r - 1.0).abs() > worst {
            worst = (r - 1.0).abs();
            audit.worst_index = Some(i);
        }
    }
    audit.pass = in_band(audit.min_ratio, epsilon) && in_band(audit.max_ratio, epsilon);
    Ok(audit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusAudit {
    /// Which weighted cloud the simplices come from.
    pub cloud: String,
    pub sampled: usize,
    pub exhaustive: bool,
    pub max_card: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub worst_simplex: Option<Vec<usize>>,
    pub pass: bool,
    /// Set when the audit could not run.
    pub skipped: Option<String>,
}

impl RadiusAudit {
    fn skipped(cloud: &str, max_card: usize, reason: String) -> Self {
        Self {
            cloud: cloud.into(),
            sampled: 0,
            exhaustive: false,
            max_card,
            min_ratio: 1.0,
            max_ratio: 1.0,
            worst_simplex: None,
            pass: true,
            skipped: Some(reason),
        }
    }
}

/// Ratios `rad²(f(σ)̂) / rad²(σ̂)` over the given index subsets. `source[i]`
/// and `image[i]` must describe the same weighted point before and after the map.
pub fn radius_audit(
    label: &str,
    source: &WeightedCloud<f64>,
    image: &WeightedCloud<f64>,
    sample: &SimplexSample,
    max_card: usize,
    epsilon: f64,
) -> Result<RadiusAudit> {
    if source.len() != image.len() {
        return Err(Error::contract("source and image clouds differ in size"));
    }
    let opts = MebOptions {
        tol: AUDIT_MEB_TOL,
        ..MebOptions::default()
    };
    let rad_sq = |cloud: &WeightedCloud<f64>, s: &[usize]| -> Result<f64> {
        weighted_meb_with(&cloud.select(s)?, &opts)
            .map(|r| r.rad_sq)
            .map_err(|e| match e {
                Error::NoConvergence {
                    iterations,
                    residual,
                    best_center,
                    best_rad_sq,
                    ..
                } => Error::NoConvergence {
                    iterations,
                    residual,
                    best_center,
                    best_rad_sq,
                    simplex: Some(s.to_vec()),
                },
                e => e,
            })
    };
    let ratios = sample
        .subsets
        .par_iter()
        .map(|s| {
            let before = rad_sq(source, s)?;
            let after = rad_sq(image, s)?;
            Ok(if before > 0.0 {
                after / before
            } else if after == before {
                1.0
            } else {
                f64::INFINITY
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut audit = RadiusAudit {
        cloud: label.into(),
        sampled: ratios.len(),
        exhaustive: sample.exhaustive,
        max_card,
        min_ratio: 1.0,
        max_ratio: 1.0,
        worst_simplex: None,
        pass: true,
        skipped: None,
    };
    let mut worst = -1.0;
    for (i, &r) in ratios.iter().enumerate() {
        if i == 0 {
            (audit.min_ratio, audit.max_ratio) = (r, r);
        }
        audit.min_ratio = audit.min_ratio.min(r);
        audit.max_ratio = audit.max_ratio.max(r);
        if (r - 1.0).abs() > worst {
            worst = (r - 1.0).abs();
            audit.worst_simplex = Some(sample.subsets[i].clone());
        }
    }
    audit.pass = in_band(audit.min_ratio, epsilon) && in_band(audit.max_ratio, epsilon);
    Ok(audit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichAudit {
    pub probes: usize,
    pub degenerate: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub pass: bool,
}

/// Ratios `d̃_{P,k}(x) / d_{P,k}(x)` at probes drawn uniformly from the
/// bounding box of `P` enlarged by 10% on each side.
pub fn sandwich_audit(cloud: &PointCloud<f64>, k: usize, probes: usize, seed: u64) -> Result<SandwichAudit> {
    let approx = assign_approx_weights(cloud, k)?;
    let dim = cloud.dim();
    let (mut lo, mut hi) = (vec![f64::INFINITY; dim], vec![f64::NEG_INFINITY; dim]);
    for p in cloud.iter() {
        for (j, &c) in p.coords().iter().enumerate() {
            lo[j] = lo[j].min(c);
            hi[j] = hi[j].max(c);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Point<f64>> = (0..probes)
        .map(|_| {
            let coords = (0..dim)
                .map(|j| {
                    let pad = 0.1 * (hi[j] - lo[j]) + 1e-9;
                    rng.random_range(lo[j] - pad..hi[j] + pad)
                })
                .collect();
            Point::new(coords)
        })
        .collect::<Result<_>>()?;
    let ratios = points
        .par_iter()
        .map(|x| {
            let exact = k_distance(x, cloud, k)?.value;
            let approx = approx_k_distance(x, &approx)?;
            Ok((exact > 0.0).then(|| approx / exact))
        })
        .collect::<Result<Vec<_>>>()?;
    let valid: Vec<f64> = ratios.iter().flatten().copied().collect();
    let min_ratio = valid.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = valid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (min_ratio, max_ratio) = if valid.is_empty() { (1.0, 1.0) } else { (min_ratio, max_ratio) };
    Ok(SandwichAudit {
        probes,
        degenerate: probes - valid.len(),
        min_ratio,
        max_ratio,
        pass: min_ratio >= std::f64::consts::FRAC_1_SQRT_2 - BAND_SLACK && max_ratio <= 3f64.sqrt() + BAND_SLACK,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSummary {
    pub projected: bool,
    pub kind: ProjectorKind,
    pub seed: u64,
    pub source_dim: usize,
    pub target_dim: usize,
    /// Dimension produced by the selection rule before clamping to `D`.
    pub requested_dim: usize,
    pub target_dim_clamped: bool,
    /// Estimated Gaussian width of the normalized difference set and its standard error.
    pub gaussian_width: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSummary {
    pub simplices_before: Vec<usize>,
    pub simplices_after: Vec<usize>,
    /// Simplices whose negative squared radius was clamped to zero.
    pub clamped_before: usize,
    pub clamped_after: usize,
}

/// The audits are reported independently; the guarantees only apply when
/// the map is an ε-distortion map, so a failure is a violation only then.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Implications {
    pub distortion_pass: bool,
    pub squared_distortion_pass: bool,
    pub pointwise_pass: bool,
    pub barycentric_radius_pass: Option<bool>,
    pub approx_radius_pass: bool,
    pub interleaving_pass: bool,
    /// Audits that failed although the distortion audit passed.
    pub conditional_violations: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub load_ms: f64,
    pub projection_ms: f64,
    pub audits_ms: f64,
    pub filtration_ms: f64,
    pub persistence_ms: f64,
    pub certificate_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub n_points: usize,
    pub projection: ProjectionSummary,
    pub distortion: DistortionReport,
    pub pointwise_kdist: PointwiseAudit,
    pub sandwich: SandwichAudit,
    pub radius_checks: RadiusAudit,
    pub approx_radius_checks: RadiusAudit,
    pub complexes: ComplexSummary,
    pub diagrams_before: Vec<PersistenceDiagram<f64>>,
    pub diagrams_after: Vec<PersistenceDiagram<f64>>,
    pub interleaving: InterleavingCertificate,
    pub implications: Implications,
    pub timings: Timings,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report with timings zeroed, for run-to-run comparisons.
    pub fn without_timings(&self) -> Self {
        Self {
            timings: Timings::default(),
            ..self.clone()
        }
    }
}

/// Machine-readable description of a failed run.
pub fn error_json(e: &Error) -> serde_json::Value {
    let mut obj = serde_json::json!({
        "error": {
            "kind": e.kind(),
            "exit_code": e.exit_code(),
            "message": e.to_string(),
        }
    });
    let inner = &mut obj["error"];
    match e {
        Error::Parse { line, .. } => inner["line"] = (*line).into(),
        Error::BudgetExceeded { n, k, count, budget } => {
            inner["n"] = (*n).into();
            inner["k"] = (*k).into();
            inner["count"] = count.to_string().into();
            inner["budget"] = (*budget).into();
        }
        Error::NoConvergence {
            iterations,
            residual,
            simplex,
            ..
        } => {
            inner["iterations"] = (*iterations).into();
            inner["residual"] = (*residual).into();
            inner["simplex"] = serde_json::json!(simplex);
        }
        _ => {}
    }
    obj
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Builds the filtration selected by `mode`, up to simplices of dimension `max_dim`.
pub fn build_filtration(
    cloud: &PointCloud<f64>,
    mode: FiltrationMode,
    k: usize,
    max_dim: usize,
    alpha_max: f64,
    budget: usize,
) -> Result<FilteredComplex<f64>> {
    match mode {
        FiltrationMode::ExactCech => exact_kdist_cech(cloud, k, max_dim, alpha_max, budget),
        FiltrationMode::ApproxCech => approx_kdist_cech(cloud, k, max_dim, alpha_max),
        FiltrationMode::Rips => weighted_rips(&assign_approx_weights(cloud, k)?, max_dim, alpha_max),
    }
}

/// Resolves the target dimension and maps the cloud.
fn project(cloud: &PointCloud<f64>, config: &ExperimentConfig) -> Result<(PointCloud<f64>, ProjectionSummary)> {
    let ambient = cloud.dim();
    let mut summary = ProjectionSummary {
        projected: config.project,
        kind: config.projector_kind,
        seed: config.seed,
        source_dim: ambient,
        target_dim: ambient,
        requested_dim: ambient,
        target_dim_clamped: false,
        gaussian_width: None,
    };
    if !config.project {
        return Ok((cloud.clone(), summary));
    }
    let requested = match config.target_dim {
        TargetDim::Explicit(d) => d,
        TargetDim::AutoJl => jl_dimension(cloud.len(), config.epsilon, config.jl_constant)?,
        TargetDim::AutoGw => {
            let diffs = difference_set(cloud)?;
            let (w, se) = estimate_gaussian_width(&diffs, GW_SAMPLES, derive_seed(config.seed, 1))?;
            summary.gaussian_width = Some((w, se));
            gw_dimension(w, config.delta, config.epsilon)?
        }
    };
    let d = requested.min(ambient);
    summary.requested_dim = requested;
    summary.target_dim = d;
    summary.target_dim_clamped = d < requested;
    let projector = sample_projector(ambient, d, config.projector_kind, config.seed)?;
    Ok((apply(&projector, cloud)?, summary))
}

/// Runs every stage on an in-memory cloud; `config.input_path` is only echoed.
pub fn run_on_cloud(cloud: &PointCloud<f64>, config: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    config.validate(cloud.len(), cloud.dim())?;
    let (k, eps) = (config.k, config.epsilon);
    let mut timings = Timings::default();

    let t = Instant::now();
    let (image, projection) = project(cloud, config)?;
    timings.projection_ms = ms(t);

    let t = Instant::now();
    let distortion = audit_distortion(cloud, &image, eps)?;
    let pointwise_kdist = pointwise_kdist_audit(cloud, &image, k, eps)?;
    let sandwich = sandwich_audit(cloud, k, config.probes, derive_seed(config.seed, 2))?;
    let radius_checks = match binomial(cloud.len(), k) {
        Some(c) if c <= config.budget as u128 => {
            let before = barycenter_cloud(cloud, k, config.budget)?;
            let after = barycenter_cloud(&image, k, config.budget)?;
            let sample = sample_simplices_for_radius_check(
                &before,
                config.radius_samples,
                config.radius_max_card,
                derive_seed(config.seed, 3),
            )?;
            radius_audit("barycentric", &before, &after, &sample, config.radius_max_card, eps)?
        }
        _ => RadiusAudit::skipped(
            "barycentric",
            config.radius_max_card,
            format!("C({}, {k}) exceeds the budget of {}", cloud.len(), config.budget),
        ),
    };
    let approx_before = assign_approx_weights(cloud, k)?;
    let approx_after = assign_approx_weights(&image, k)?;
    let sample = sample_simplices_for_radius_check(
        &approx_before,
        config.radius_samples,
        config.radius_max_card,
        derive_seed(config.seed, 4),
    )?;
    let approx_radius_checks = radius_audit("approximate", &approx_before, &approx_after, &sample, config.radius_max_card, eps)?;
    timings.audits_ms = ms(t);

    let t = Instant::now();
    let max_dim = config.max_homology_degree + 1;
    let build = |c: &PointCloud<f64>| build_filtration(c, config.filtration, k, max_dim, config.alpha_max, config.budget);
    let before = build(cloud)?;
    let after = build(&image)?;
    timings.filtration_ms = ms(t);

    let t = Instant::now();
    let diagrams_before = compute_persistence(&before, config.max_homology_degree)?;
    let diagrams_after = compute_persistence(&after, config.max_homology_degree)?;
    timings.persistence_ms = ms(t);

    let t = Instant::now();
    let interleaving = certify_interleaving(&diagrams_before, &diagrams_after, eps)?;
    timings.certificate_ms = ms(t);

    let mut violations = Vec::new();
    if distortion.is_epsilon_distortion {
        if !pointwise_kdist.pass {
            violations.push("pointwise k-distance".to_string());
        }
        if !radius_checks.pass {
            violations.push("barycentric radii".to_string());
        }
        if !approx_radius_checks.pass {
            violations.push("approximate radii".to_string());
        }
        if !interleaving.passes {
            violations.push("interleaving".to_string());
        }
    }
    let implications = Implications {
        distortion_pass: distortion.is_epsilon_distortion,
        squared_distortion_pass: distortion.is_squared_epsilon_distortion,
        pointwise_pass: pointwise_kdist.pass,
        barycentric_radius_pass: radius_checks.skipped.is_none().then_some(radius_checks.pass),
        approx_radius_pass: approx_radius_checks.pass,
        interleaving_pass: interleaving.passes,
        conditional_violations: violations,
    };
    timings.total_ms = ms(start);

    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        n_points: cloud.len(),
        projection,
        distortion,
        pointwise_kdist,
        sandwich,
        radius_checks,
        approx_radius_checks,
        complexes: ComplexSummary {
            simplices_before: before.count_by_dim(),
            simplices_after: after.count_by_dim(),
            clamped_before: before.clamped,
            clamped_after: after.clamped,
        },
        diagrams_before,
        diagrams_after,
        interleaving,
        implications,
        timings,
    })
}

/// Loads the input, runs the pipeline and writes the requested outputs.
/// Nothing is written unless every stage succeeds.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let t = Instant::now();
    let cloud = load_points(&config.input_path, config.format)?;
    let load_ms = ms(t);
    let mut report = run_on_cloud(&cloud, config)?;
    report.timings.load_ms = load_ms;
    report.timings.total_ms += load_ms;
    if let Some(dir) = &config.svg_dir {
        write_svgs(&report, dir)?;
    }
    if let Some(out) = &config.output_path {
        fs::write(out, report.to_json()).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    }
    Ok(report)
}

/// Writes `h<degree>_before.svg` and `h<degree>_after.svg` for every degree.
pub fn write_svgs(report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let beta = report.interleaving.beta;
    for (tag, diagrams) in [("before", &report.diagrams_before), ("after", &report.diagrams_after)] {
        for d in diagrams.iter() {
            let path = dir.join(format!("h{}_{tag}.svg", d.dimension));
            let title = format!("H{} {tag}", d.dimension);
            fs::write(&path, diagram_svg(d, beta, &title)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        }
    }
    Ok(())
}

/// Static birth/death scatter plot with the diagonal and the line `death = β²·birth`.
pub fn diagram_svg(diagram: &PersistenceDiagram<f64>, beta: f64, title: &str) -> String {
    const SIZE: f64 = 400.0;
    const MARGIN: f64 = 40.0;
    let top = diagram
        .pairs
        .iter()
        .flat_map(|p| std::iter::once(p.birth).chain(p.death))
        .fold(0.0f64, f64::max);
    let top = if top > 0.0 { top * 1.1 } else { 1.0 };
    let plot = SIZE - 2.0 * MARGIN;
    let x = |v: f64| MARGIN + v / top * plot;
    let y = |v: f64| SIZE - MARGIN - v / top * plot;
    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{title}</text>
<rect x="{MARGIN}" y="{MARGIN}" width="{plot}" height="{plot}" fill="none" stroke="black"/>
<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray"/>
"#,
        SIZE / 2.0,
        x(0.0),
        y(0.0),
        x(top),
        y(top)
    );
    let b2 = beta * beta;
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"steelblue\" stroke-dasharray=\"4 3\"/>\n",
        x(0.0),
        y(0.0),
        x(top / b2),
        y(top)
    ));
    for p in &diagram.pairs {
        match p.death {
            Some(d) => svg.push_str(&format!(
                "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"3\" fill=\"crimson\"/>\n",
                x(p.birth),
                y(d)
            )),
            None => svg.push_str(&format!(
                "<path d=\"M {:.3} {:.3} l -4 7 l 8 0 z\" fill=\"black\"/>\n",
                x(p.birth),
                MARGIN
            )),
        }
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">birth (max {top:.4})</text>\n</svg>\n",
        MARGIN,
        SIZE - 12.0
    ));
    svg
}
