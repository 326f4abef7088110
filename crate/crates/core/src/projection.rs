//! Random subgaussian linear maps `f(v) = √(D/d)·G·v` and the tools to size
//! and audit them.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, squared_distance, Point, PointCloud};
use crate::scalar::Scalar;

/// Default constant in `d = ⌈c·ln n / ε²⌉`.
pub const DEFAULT_JL_CONSTANT: f64 = 8.0;

/// Relative slack applied to the distortion inequalities.
pub const AUDIT_SLACK: f64 = 1e-12;

/// Entry law of the random matrix. Every law has mean 0 and variance `1/D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectorKind {
    Gaussian,
    Rademacher,
    /// `±√(3/D)` with probability 1/6 each, 0 otherwise.
    #[serde(rename = "sparse")]
    SparseAchlioptas,
}

impl fmt::Display for ProjectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProjectorKind::Gaussian => "gaussian",
            ProjectorKind::Rademacher => "rademacher",
            ProjectorKind::SparseAchlioptas => "sparse",
        })
    }
}

impl FromStr for ProjectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(ProjectorKind::Gaussian),
            "rademacher" => Ok(ProjectorKind::Rademacher),
            "sparse" | "sparse-achlioptas" => Ok(ProjectorKind::SparseAchlioptas),
            other => Err(Error::Config(format!("unknown projector kind '{other}'"))),
        }
    }
}

/// A materialized `d × D` random matrix together with its scale `√(D/d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector<T> {
    source_dim: usize,
    target_dim: usize,
    kind: ProjectorKind,
    seed: u64,
    /// Row-major, `target_dim` rows of `source_dim` entries.
    matrix: Vec<T>,
    scale: T,
}

impl<T: Scalar> Projector<T> {
    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn kind(&self) -> ProjectorKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn matrix(&self) -> &[T] {
        &self.matrix
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.matrix[r * self.source_dim..(r + 1) * self.source_dim]
    }

    /// Maps a single vector.
    pub fn apply_point(&self, v: &Point<T>) -> Result<Point<T>> {
        if v.dim() != self.source_dim {
            return Err(Error::DimensionMismatch {
                expected: self.source_dim,
                found: v.dim(),
            });
        }
        let coords = (0..self.target_dim)
            .map(|r| self.scale * dot(self.row(r), v.coords()))
            .collect();
        Ok(Point::from_vec_unchecked(coords))
    }
}

/// Draws a projector with i.i.d. entries of the requested law.
pub fn sample_projector<T: Scalar>(
    source_dim: usize,
    target_dim: usize,
    kind: ProjectorKind,
    seed: u64,
) -> Result<Projector<T>> {
    if target_dim == 0 || target_dim > source_dim {
        return Err(Error::contract(format!(
            "target dimension {target_dim} must lie in 1..={source_dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let big_d = source_dim as f64;
    let sd = 1.0 / big_d.sqrt();
    let sparse_mag = (3.0 / big_d).sqrt();
    let matrix = (0..source_dim * target_dim)
        .map(|_| {
            let e = match kind {
                ProjectorKind::Gaussian => rng.sample::<f64, _>(StandardNormal) * sd,
                ProjectorKind::Rademacher => {
                    if rng.random_bool(0.5) {
                        sd
                    } else {
                        -sd
                    }
                }
                ProjectorKind::SparseAchlioptas => match rng.random_range(0u8..6) {
                    0 => sparse_mag,
                    1 => -sparse_mag,
                    _ => 0.0,
                },
            };
            T::lit(e)
        })
        .collect();
    Ok(Projector {
        source_dim,
        target_dim,
        kind,
        seed,
        matrix,
        scale: T::lit((big_d / target_dim as f64).sqrt()),
    })
}

/// Maps every point of `cloud`, preserving order.
pub fn apply<T: Scalar>(projector: &Projector<T>, cloud: &PointCloud<T>) -> Result<PointCloud<T>> {
    if cloud.dim() != projector.source_dim {
        return Err(Error::DimensionMismatch {
            expected: projector.source_dim,
            found: cloud.dim(),
        });
    }
    let pts = cloud
        .points()
        .par_iter()
        .map(|p| projector.apply_point(p))
        .collect::<Result<Vec<_>>>()?;
    PointCloud::new(pts)
}

// Ceiling that ignores rounding noise just above an integer.
fn ceil_dimension(x: f64) -> usize {
    let c = (x * (1.0 - 1e-12)).ceil();
    c.max(1.0) as usize
}

fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::contract(format!("{name} = {v} must lie in (0, 1)")));
    }
    Ok(())
}

/// `⌈c·ln(n)/ε²⌉`.
pub fn jl_dimension(n: usize, epsilon: f64, c: f64) -> Result<usize> {
    if n < 2 {
        return Err(Error::contract("jl_dimension needs n >= 2"));
    }
    check_unit_open("epsilon", epsilon)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::contract(format!("JL constant {c} must be positive")));
    }
    Ok(ceil_dimension(c * (n as f64).ln() / (epsilon * epsilon)))
}

/// `⌈(w + √(2 ln(2/δ)))²/ε² + 1⌉`, the target dimension for a set of Gaussian width `w`.
pub fn gw_dimension(width: f64, delta: f64, epsilon: f64) -> Result<usize> {
    if !(width >= 0.0 && width.is_finite()) {
        return Err(Error::contract(format!("width {width} must be finite and >= 0")));
    }
    check_unit_open("delta", delta)?;
    check_unit_open("epsilon", epsilon)?;
    let t = width + (2.0 * (2.0 / delta).ln()).sqrt();
    Ok(ceil_dimension(t * t / (epsilon * epsilon) + 1.0))
}

/// Outcome of an all-pairs distortion check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub epsilon_target: f64,
    /// Largest `‖f(x) − f(y)‖ / ‖x − y‖`.
    pub max_expansion: f64,
    /// Smallest `‖f(x) − f(y)‖ / ‖x − y‖`.
    pub max_contraction: f64,
    pub is_epsilon_distortion: bool,
    /// The same check on squared distances: `(1−ε)‖x−y‖² ≤ ‖f(x)−f(y)‖² ≤ (1+ε)‖x−y‖²`.
    pub is_squared_epsilon_distortion: bool,
    /// Pair whose ratio strays furthest from 1.
    pub worst_pair: (usize, usize),
    /// Source pairs at distance zero, excluded from the ratios.
    pub coincident_pairs: usize,
}

/// Checks `(1−ε)‖x−y‖ ≤ ‖f(x)−f(y)‖ ≤ (1+ε)‖x−y‖` over all pairs, where `f`
/// maps `source[i]` to `image[i]`.
pub fn audit_distortion<T: Scalar>(
    source: &PointCloud<T>,
    image: &PointCloud<T>,
    epsilon: f64,
) -> Result<DistortionReport> {
    if source.len() != image.len() {
        return Err(Error::contract(format!(
            "audit needs corresponding clouds, got {} and {} points",
            source.len(),
            image.len()
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::contract("epsilon must be positive"));
    }
    let n = source.len();
    // (max ratio, min ratio, worst deviation, worst pair, coincident)
    type Row = (f64, f64, f64, (usize, usize), usize);
    let rows: Vec<Row> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc: Row = (f64::NEG_INFINITY, f64::INFINITY, -1.0, (0, 0), 0);
            for j in i + 1..n {
                let src = squared_distance(source.point(i).coords(), source.point(j).coords()).as_f64();
                if src == 0.0 {
                    acc.4 += 1;
                    continue;
                }
                let img = squared_distance(image.point(i).coords(), image.point(j).coords()).as_f64();
                let ratio = (img / src).sqrt();
                acc.0 = acc.0.max(ratio);
                acc.1 = acc.1.min(ratio);
                let dev = (ratio - 1.0).abs();
                if dev > acc.2 {
                    acc.2 = dev;
                    acc.3 = (i, j);
                }
            }
            acc
        })
        .collect();
    let mut total: Row = (f64::NEG_INFINITY, f64::INFINITY, -1.0, (0, 0), 0);
    for r in rows {
        total.0 = total.0.max(r.0);
        total.1 = total.1.min(r.1);
        if r.2 > total.2 {
            total.2 = r.2;
            total.3 = r.3;
        }
        total.4 += r.4;
    }
    let (max_expansion, max_contraction) = if total.0.is_finite() {
        (total.0, total.1)
    } else {
        // no non-degenerate pair: the identity bound holds vacuously
        (1.0, 1.0)
    };
    let is_epsilon_distortion = max_expansion <= (1.0 + epsilon) * (1.0 + AUDIT_SLACK)
        && max_contraction >= (1.0 - epsilon) * (1.0 - AUDIT_SLACK);
    let is_squared_epsilon_distortion = max_expansion * max_expansion <= (1.0 + epsilon) * (1.0 + AUDIT_SLACK)
        && max_contraction * max_contraction >= (1.0 - epsilon) * (1.0 - AUDIT_SLACK);
    Ok(DistortionReport {
        epsilon_target: epsilon,
        max_expansion,
        max_contraction,
        is_epsilon_distortion,
        is_squared_epsilon_distortion,
        worst_pair: total.3,
        coincident_pairs: total.4,
    })
}

/// Normalized differences `(x − y)/‖x − y‖` over ordered pairs of distinct points.
pub fn difference_set<T: Scalar>(cloud: &PointCloud<T>) -> Result<PointCloud<T>> {
    if cloud.len() < 2 {
        return Err(Error::contract("difference set needs at least two points"));
    }
    let mut out = Vec::with_capacity(cloud.len() * (cloud.len() - 1));
    for (i, x) in cloud.iter().enumerate() {
        for (j, y) in cloud.iter().enumerate() {
            if i == j {
                continue;
            }
            let norm = squared_distance(x.coords(), y.coords()).sqrt();
            if norm == T::zero() {
                continue;
            }
            let coords = x
                .coords()
                .iter()
                .zip(y.coords())
                .map(|(&a, &b)| (a - b) / norm)
                .collect();
            out.push(Point::from_vec_unchecked(coords));
        }
    }
    if out.is_empty() {
        return Err(Error::contract("all points coincide; difference set is empty"));
    }
    PointCloud::new(out)
}

/// Monte-Carlo estimate of `E sup_{x∈S} ⟨x, g⟩` with its standard error.
pub fn estimate_gaussian_width<T: Scalar>(
    set: &PointCloud<T>,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < 100 {
        return Err(Error::contract("gaussian width estimation needs >= 100 samples"));
    }
    if set.is_empty() {
        return Err(Error::contract("gaussian width of an empty set"));
    }
    let dim = set.dim();
    let rows: Vec<Vec<f64>> = set
        .iter()
        .map(|p| p.coords().iter().map(|c| c.as_f64()).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = vec![0.0f64; dim];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        for gi in g.iter_mut() {
            *gi = rng.sample(StandardNormal);
        }
        let sup = rows
            .iter()
            .map(|r| dot(r, &g))
            .fold(f64::NEG_INFINITY, f64::max);
        sum += sup;
        sum_sq += sup * sup;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0);
    Ok((mean, (var / m).sqrt()))
}
