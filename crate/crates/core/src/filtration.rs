//! Weighted Čech and weighted Rips filtrations.
//!
//! A simplex `σ` of a weighted cloud enters the Čech filtration at
//! `α = rad(σ̂)`, the square root of the weighted minimum enclosing ball's
//! squared radius. A single weighted point `(p, w)` gives a real ball once
//! `α² ≥ −w`, so vertices enter at `√(−w)`. The Rips variant keeps the vertex
//! and edge values and lets higher simplices enter with their last edge.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, WeightedCloud};
use crate::kdistance::{assign_approx_weights, barycenter_cloud};
use crate::meb::{two_point_rad_sq, weighted_meb_with, MebOptions};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simplex<T> {
    /// Strictly increasing vertex indices.
    pub vertices: Vec<usize>,
    /// Filtration value, in radius units.
    pub value: T,
}

impl<T: Scalar> Simplex<T> {
    pub fn new(mut vertices: Vec<usize>, value: T) -> Self {
        vertices.sort_unstable();
        Self { vertices, value }
    }

    /// Simplicial dimension (vertex count − 1).
    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    /// Facets, each obtained by dropping one vertex (in order of the dropped position).
    pub fn facets(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let k = self.vertices.len();
        (0..if k > 1 { k } else { 0 }).map(move |skip| {
            self.vertices
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != skip)
                .map(|(_, &v)| v)
                .collect()
        })
    }
}

/// Canonical filtration order: value, then dimension, then lexicographic vertices.
pub fn filtration_order<T: Scalar>(a: &Simplex<T>, b: &Simplex<T>) -> Ordering {
    a.value
        .partial_cmp(&b.value)
        .unwrap_or(Ordering::Equal)
        .then(a.vertices.len().cmp(&b.vertices.len()))
        .then_with(|| a.vertices.cmp(&b.vertices))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredComplex<T> {
    pub n_vertices: usize,
    /// Simplices in filtration order.
    pub simplices: Vec<Simplex<T>>,
    /// Largest simplex dimension considered.
    pub max_dim: usize,
    pub alpha_max: T,
    /// Simplices whose squared radius was negative and got clamped to 0.
    pub clamped: usize,
}

impl<T: Scalar> FilteredComplex<T> {
    /// Wraps simplices as given; see [`FilteredComplex::validate`].
    pub fn from_simplices(n_vertices: usize, simplices: Vec<Simplex<T>>, alpha_max: T) -> Self {
        let max_dim = simplices.iter().map(Simplex::dim).max().unwrap_or(0);
        Self {
            n_vertices,
            simplices,
            max_dim,
            alpha_max,
            clamped: 0,
        }
    }

    /// Sorts simplices into canonical filtration order.
    pub fn sort(&mut self) {
        self.simplices.sort_by(filtration_order);
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn count_by_dim(&self) -> Vec<usize> {
        let mut out = vec![0; self.max_dim + 1];
        for s in &self.simplices {
            if s.dim() >= out.len() {
                out.resize(s.dim() + 1, 0);
            }
            out[s.dim()] += 1;
        }
        out
    }

    /// Index of every simplex, keyed by its vertex list.
    pub fn index(&self) -> HashMap<&[usize], usize> {
        self.simplices
            .iter()
            .enumerate()
            .map(|(i, s)| (s.vertices.as_slice(), i))
            .collect()
    }

    /// Checks vertex ordering, face closure, value monotonicity and that every
    /// face precedes its cofaces.
    pub fn validate(&self) -> Result<()> {
        let index = self.index();
        if index.len() != self.simplices.len() {
            return Err(Error::contract("complex contains duplicate simplices"));
        }
        for (pos, s) in self.simplices.iter().enumerate() {
            if s.vertices.is_empty() {
                return Err(Error::contract("empty simplex"));
            }
            if s.vertices.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::contract(format!(
                    "simplex {:?} vertices not strictly increasing",
                    s.vertices
                )));
            }
            if s.vertices.iter().any(|&v| v >= self.n_vertices) {
                return Err(Error::contract(format!("simplex {:?} has a vertex out of range", s.vertices)));
            }
            if !s.value.is_finite() {
                return Err(Error::contract(format!("simplex {:?} has non-finite value", s.vertices)));
            }
            for f in s.facets() {
                match index.get(f.as_slice()) {
                    None => {
                        return Err(Error::contract(format!(
                            "face {f:?} of {:?} missing",
                            s.vertices
                        )))
                    }
                    Some(&fp) => {
                        if fp > pos {
                            return Err(Error::contract(format!(
                                "face {f:?} appears after coface {:?}",
                                s.vertices
                            )));
                        }
                        if self.simplices[fp].value > s.value {
                            return Err(Error::contract(format!(
                                "face {f:?} has larger value than coface {:?}",
                                s.vertices
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Line format `dim v0 v1 ... vk value`, one simplex per line in filtration order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.simplices {
            let _ = write!(out, "{}", s.dim());
            for v in &s.vertices {
                let _ = write!(out, " {v}");
            }
            let _ = writeln!(out, " {}", s.value);
        }
        out
    }

    /// Parses the [`FilteredComplex::to_text`] format and validates the result.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut simplices = Vec::new();
        let mut n_vertices = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let dim: usize = fields[0]
                .parse()
                .map_err(|_| parse_err(format!("bad dimension '{}'", fields[0])))?;
            if fields.len() != dim + 3 {
                return Err(parse_err(format!(
                    "expected {} fields for a {dim}-simplex, found {}",
                    dim + 3,
                    fields.len()
                )));
            }
            let vertices = fields[1..=dim + 1]
                .iter()
                .map(|f| f.parse::<usize>().map_err(|_| parse_err(format!("bad vertex '{f}'"))))
                .collect::<Result<Vec<_>>>()?;
            let value: f64 = fields[dim + 2]
                .parse()
                .map_err(|_| parse_err(format!("bad value '{}'", fields[dim + 2])))?;
            n_vertices = n_vertices.max(vertices.iter().max().map_or(0, |m| m + 1));
            simplices.push(Simplex {
                vertices,
                value: T::lit(value),
            });
        }
        let alpha_max = simplices
            .iter()
            .map(|s| s.value)
            .fold(T::zero(), T::max);
        let complex = Self::from_simplices(n_vertices, simplices, alpha_max);
        complex.validate()?;
        Ok(complex)
    }
}

fn check_args<T: Scalar>(max_dim: usize, alpha_max: T) -> Result<()> {
    if max_dim < 1 {
        return Err(Error::contract("max_dim must be >= 1"));
    }
    if alpha_max.is_nan() || alpha_max < T::zero() {
        return Err(Error::contract("alpha_max must be >= 0"));
    }
    Ok(())
}

fn vertex_value<T: Scalar>(weight: T) -> (T, bool) {
    if weight > T::zero() {
        (T::zero(), true)
    } else {
        ((-weight).sqrt(), false)
    }
}

/// Radius-valued filtration built level by level. `value_of` returns the
/// squared radius of a candidate simplex given the largest value among its facets.
fn build_levels<T, F>(
    cloud: &WeightedCloud<T>,
    max_dim: usize,
    alpha_max: T,
    value_of: F,
) -> Result<FilteredComplex<T>>
where
    T: Scalar,
    F: Fn(&[usize], T) -> Result<T> + Sync,
{
    check_args(max_dim, alpha_max)?;
    let n = cloud.len();
    let mut clamped = 0;
    let mut all = Vec::new();
    let mut level: Vec<Simplex<T>> = Vec::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let (v, c) = vertex_value(p.weight);
        clamped += c as usize;
        if v <= alpha_max {
            level.push(Simplex {
                vertices: vec![i],
                value: v,
            });
        }
    }
    for _dim in 1..=max_dim {
        if level.is_empty() {
            break;
        }
        let lookup: HashMap<&[usize], T> = level
            .iter()
            .map(|s| (s.vertices.as_slice(), s.value))
            .collect();
        // candidates whose facets all survived, with their largest facet value
        let mut candidates: Vec<(Vec<usize>, T)> = Vec::new();
        for s in &level {
            let last = *s.vertices.last().expect("non-empty simplex");
            'ext: for v in last + 1..n {
                let mut verts = s.vertices.clone();
                verts.push(v);
                let mut facet_max = s.value;
                for skip in 0..verts.len() - 1 {
                    let facet: Vec<usize> = verts
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != skip)
                        .map(|(_, &x)| x)
                        .collect();
                    match lookup.get(facet.as_slice()) {
                        Some(&fv) => facet_max = facet_max.max(fv),
                        None => continue 'ext,
                    }
                }
                candidates.push((verts, facet_max));
            }
        }
        let evaluated: Vec<(Vec<usize>, T, bool)> = candidates
            .into_par_iter()
            .map(|(verts, facet_max)| {
                let rad_sq = value_of(&verts, facet_max)?;
                let neg = rad_sq < T::zero();
                let value = rad_sq.max(T::zero()).sqrt().max(facet_max);
                Ok((verts, value, neg))
            })
            .collect::<Result<Vec<_>>>()?;
        all.append(&mut level);
        level = evaluated
            .into_iter()
            .filter_map(|(vertices, value, neg)| {
                (value <= alpha_max).then(|| {
                    clamped += neg as usize;
                    Simplex { vertices, value }
                })
            })
            .collect();
    }
    all.append(&mut level);
    let mut complex = FilteredComplex {
        n_vertices: n,
        simplices: all,
        max_dim,
        alpha_max,
        clamped,
    };
    complex.sort();
    Ok(complex)
}

/// Weighted Čech filtration with simplex values `√rad²(σ̂)` from the MEB solver.
pub fn weighted_cech<T: Scalar>(
    cloud: &WeightedCloud<T>,
    max_dim: usize,
    alpha_max: T,
) -> Result<FilteredComplex<T>> {
    weighted_cech_with(cloud, max_dim, alpha_max, &MebOptions::default())
}

pub fn weighted_cech_with<T: Scalar>(
    cloud: &WeightedCloud<T>,
    max_dim: usize,
    alpha_max: T,
    opts: &MebOptions<T>,
) -> Result<FilteredComplex<T>> {
    build_levels(cloud, max_dim, alpha_max, |verts, facet_max| {
        // the facet bound already exceeds the cutoff: skip the solve
        if facet_max > alpha_max {
            return Ok(facet_max * facet_max);
        }
        let sub = cloud.select(verts)?;
        match weighted_meb_with(&sub, opts) {
            Ok(r) => Ok(r.rad_sq),
            Err(Error::NoConvergence {
                iterations,
                residual,
                best_center,
                best_rad_sq,
                ..
            }) => Err(Error::NoConvergence {
                iterations,
                residual,
                best_center,
                best_rad_sq,
                simplex: Some(verts.to_vec()),
            }),
            Err(e) => Err(e),
        }
    })
}

/// Weighted Rips filtration: vertices at `√(−w)`, edges at the two-point
/// weighted radius, higher simplices at their largest edge.
pub fn weighted_rips<T: Scalar>(
    cloud: &WeightedCloud<T>,
    max_dim: usize,
    alpha_max: T,
) -> Result<FilteredComplex<T>> {
    build_levels(cloud, max_dim, alpha_max, |verts, facet_max| {
        if verts.len() == 2 {
            Ok(two_point_rad_sq(cloud.point(verts[0]), cloud.point(verts[1])))
        } else {
            Ok(facet_max * facet_max)
        }
    })
}

/// Čech filtration of the k-distance, through the barycentric weighted cloud.
pub fn exact_kdist_cech<T: Scalar>(
    cloud: &PointCloud<T>,
    k: usize,
    max_dim: usize,
    alpha_max: T,
    budget: usize,
) -> Result<FilteredComplex<T>> {
    let bary = barycenter_cloud(cloud, k, budget)?;
    weighted_cech(&bary, max_dim, alpha_max)
}

/// Čech filtration of the approximate k-distance (n vertices).
pub fn approx_kdist_cech<T: Scalar>(
    cloud: &PointCloud<T>,
    k: usize,
    max_dim: usize,
    alpha_max: T,
) -> Result<FilteredComplex<T>> {
    let weighted = assign_approx_weights(cloud, k)?;
    weighted_cech(&weighted, max_dim, alpha_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, WeightedPoint};
    use crate::kdistance::k_distance;
    use crate::meb::{weighted_meb_exact, DEFAULT_MAX_ITER};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unweighted(rows: &[&[f64]]) -> WeightedCloud<f64> {
        WeightedCloud::raw(
            rows.iter()
                .map(|r| WeightedPoint::unweighted(Point::new(r.to_vec()).unwrap()))
                .collect(),
        )
        .unwrap()
    }

    fn value_of(c: &FilteredComplex<f64>, verts: &[usize]) -> f64 {
        c.simplices.iter().find(|s| s.vertices == verts).unwrap().value
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> PointCloud<f64> {
        PointCloud::from_rows(
            (0..n)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn pair_at_distance_two() {
        let c = weighted_cech(&unweighted(&[&[0.0], &[2.0]]), 1, 10.0).unwrap();
        assert_eq!(c.len(), 3);
        assert!((value_of(&c, &[0, 1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vertex_value_is_root_of_negated_weight() {
        let w = WeightedCloud::raw(vec![WeightedPoint::new(Point::new(vec![0.0]).unwrap(), -4.0).unwrap()]).unwrap();
        let c = weighted_cech(&w, 1, 10.0).unwrap();
        assert_eq!(c.simplices[0].value, 2.0);
    }

    #[test]
    fn unit_square() {
        let sq = unweighted(&[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        let c = weighted_cech(&sq, 2, 10.0).unwrap();
        c.validate().unwrap();
        let h = 2f64.sqrt() / 2.0;
        for side in [[0, 1], [1, 2], [2, 3], [0, 3]] {
            assert!((value_of(&c, &side) - 0.5).abs() < 1e-12);
        }
        for diag in [[0, 2], [1, 3]] {
            assert!((value_of(&c, &diag) - h).abs() < 1e-12);
        }
        assert_eq!(c.count_by_dim(), vec![4, 6, 4]);
        for s in c.simplices.iter().filter(|s| s.dim() == 2) {
            assert!((s.value - h).abs() < 1e-9);
            let exact = weighted_meb_exact(&sq.select(&s.vertices).unwrap()).unwrap();
            assert!((s.value - exact.rad_sq.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn rips_edges_are_half_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let cloud = random_cloud(&mut rng, 8, 3);
        let w = WeightedCloud::raw(cloud.iter().cloned().map(WeightedPoint::unweighted).collect()).unwrap();
        let rips = weighted_rips(&w, 2, 10.0).unwrap();
        let cech = weighted_cech(&w, 2, 10.0).unwrap();
        rips.validate().unwrap();
        for s in rips.simplices.iter().filter(|s| s.dim() <= 1) {
            let d = if s.dim() == 0 {
                0.0
            } else {
                crate::geometry::squared_distance(
                    cloud.point(s.vertices[0]).coords(),
                    cloud.point(s.vertices[1]).coords(),
                )
                .sqrt()
                    / 2.0
            };
            assert!((s.value - d).abs() < 1e-12);
            assert!((value_of(&cech, &s.vertices) - s.value).abs() < 1e-9);
        }
        // Rips values never undercut Čech values on the shared skeleton
        for s in cech.simplices.iter() {
            assert!(value_of(&rips, &s.vertices) <= s.value + 1e-12);
        }
    }

    #[test]
    fn rips_two_point_closed_form_matches_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for _ in 0..20 {
            let cloud = random_cloud(&mut rng, 6, 2);
            let w = assign_approx_weights(&cloud, 3).unwrap();
            let rips = weighted_rips(&w, 1, 100.0).unwrap();
            let cech = weighted_cech_with(
                &w,
                1,
                100.0,
                &MebOptions { tol: 1e-12, max_iter: DEFAULT_MAX_ITER, init: Default::default() },
            )
            .unwrap();
            for s in rips.simplices.iter() {
                assert!((value_of(&cech, &s.vertices) - s.value).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn k_one_gives_ordinary_cech() {
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let cloud = random_cloud(&mut rng, 7, 2);
        let a = exact_kdist_cech(&cloud, 1, 2, 5.0, 100).unwrap();
        let b = approx_kdist_cech(&cloud, 1, 2, 5.0).unwrap();
        let plain = weighted_cech(
            &WeightedCloud::raw(cloud.iter().cloned().map(WeightedPoint::unweighted).collect()).unwrap(),
            2,
            5.0,
        )
        .unwrap();
        assert_eq!(a.simplices, b.simplices);
        assert_eq!(a.simplices, plain.simplices);
    }

    #[test]
    fn collinear_barycenters() {
        let cloud = PointCloud::from_rows(vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let bary = barycenter_cloud(&cloud, 2, 10).unwrap();
        let centers: Vec<f64> = bary.points().iter().map(|p| p.point.coords()[0]).collect();
        let weights: Vec<f64> = bary.points().iter().map(|p| p.weight).collect();
        assert_eq!(centers, vec![0.5, 1.0, 1.5]);
        assert_eq!(weights, vec![-0.25, -1.0, -0.25]);
        let c = exact_kdist_cech(&cloud, 2, 1, 10.0, 10).unwrap();
        assert_eq!(c.n_vertices, 3);
    }

    #[test]
    fn approx_two_point_example() {
        let cloud = PointCloud::from_rows(vec![vec![0.0], vec![2.0]]).unwrap();
        let c = approx_kdist_cech(&cloud, 2, 1, 10.0).unwrap();
        assert_eq!(c.count_by_dim(), vec![2, 1]);
        assert!((value_of(&c, &[0]) - 2f64.sqrt()).abs() < 1e-15);
        assert!((value_of(&c, &[1]) - 2f64.sqrt()).abs() < 1e-15);
        assert!((value_of(&c, &[0, 1]) - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn approx_vertex_values_are_k_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let cloud = random_cloud(&mut rng, 10, 3);
        let c = approx_kdist_cech(&cloud, 3, 1, 10.0).unwrap();
        assert_eq!(c.count_by_dim()[0], 10);
        for s in c.simplices.iter().filter(|s| s.dim() == 0) {
            let d = k_distance(cloud.point(s.vertices[0]), &cloud, 3).unwrap().value;
            assert!((s.value - d).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_max_truncates_and_budget_propagates() {
        let mut rng = ChaCha8Rng::seed_from_u64(89);
        let cloud = random_cloud(&mut rng, 12, 2);
        let full = approx_kdist_cech(&cloud, 2, 2, 100.0).unwrap();
        let cut = approx_kdist_cech(&cloud, 2, 2, 0.4).unwrap();
        cut.validate().unwrap();
        assert!(cut.len() < full.len());
        assert!(cut.simplices.iter().all(|s| s.value <= 0.4));
        let expected: Vec<_> = full.simplices.iter().filter(|s| s.value <= 0.4).cloned().collect();
        assert_eq!(cut.simplices, expected);
        assert!(matches!(
            exact_kdist_cech(&cloud, 3, 1, 1.0, 100),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(weighted_cech(&assign_approx_weights(&cloud, 2).unwrap(), 0, 1.0).is_err());
    }

    #[test]
    fn complex_size_is_polynomial_in_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        let cloud = random_cloud(&mut rng, 9, 2);
        let c = approx_kdist_cech(&cloud, 4, 2, 100.0).unwrap();
        assert_eq!(c.count_by_dim(), vec![9, 36, 84]);
    }

    #[test]
    fn positive_weights_clamp() {
        let w = WeightedCloud::raw(vec![
            WeightedPoint::new(Point::new(vec![0.0]).unwrap(), 1.0).unwrap(),
            WeightedPoint::new(Point::new(vec![0.5]).unwrap(), 1.0).unwrap(),
        ])
        .unwrap();
        let c = weighted_cech(&w, 1, 1.0).unwrap();
        assert_eq!(c.clamped, 3);
        assert!(c.simplices.iter().all(|s| s.value == 0.0));
    }

    #[test]
    fn text_round_trip_and_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let cloud = random_cloud(&mut rng, 6, 2);
        let c = approx_kdist_cech(&cloud, 2, 2, 10.0).unwrap();
        let text = c.to_text();
        assert!(text.lines().next().unwrap().starts_with("0 "));
        let back = FilteredComplex::<f64>::from_text(&text).unwrap();
        assert_eq!(back.simplices, c.simplices);

        assert!(FilteredComplex::<f64>::from_text("1 0 1 0.5\n").is_err());
        assert!(FilteredComplex::<f64>::from_text("0 0 0.0\n0 1 0.0\n1 0 1 x\n").is_err());
        let mut bad = c.clone();
        bad.simplices.reverse();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn convergence_failure_names_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        let cloud = random_cloud(&mut rng, 8, 3);
        let w = assign_approx_weights(&cloud, 2).unwrap();
        let opts = MebOptions { tol: 1e-300, max_iter: 1, init: crate::meb::MebInit::Uniform };
        match weighted_cech_with(&w, 2, 100.0, &opts) {
            Err(Error::NoConvergence { simplex: Some(s), .. }) => assert!(s.len() >= 2),
            other => panic!("expected convergence failure, got {:?}", other.map(|c| c.len())),
        }
    }
}
