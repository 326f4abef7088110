//! Points, weighted points and power distances.
//!
//! A weighted point `p̂ = (p, w)` acts on a location `x` through its power
//! `D(x, p̂) = ‖x − p‖² − w`. Two weighted points are compared through
//! `D(p̂, q̂) = ‖p − q‖² − w(p) − w(q)`. Barycenters of point subsets carry the
//! weight `−(1/k) Σ ‖b − pᵢ‖²`, which makes the k-distance a minimum of powers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A location in Euclidean space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    coords: Vec<T>,
}

impl<T: Scalar> Point<T> {
    /// Builds a point, rejecting empty or non-finite coordinate vectors.
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::contract("point must have dimension >= 1"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::contract("point coordinates must be finite"));
        }
        Ok(Self { coords })
    }

    pub fn origin(dim: usize) -> Self {
        Self {
            coords: vec![T::zero(); dim],
        }
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<T>) -> Self {
        Self { coords }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<T> {
        self.coords
    }

    pub fn norm_sq(&self) -> T {
        self.coords.iter().map(|&c| c * c).sum()
    }

    pub fn translated(&self, offset: &[T]) -> Self {
        Self {
            coords: self.coords.iter().zip(offset).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            coords: self.coords.iter().map(|&a| a * factor).collect(),
        }
    }
}

/// Squared Euclidean distance, accumulated as `Σ (xᵢ − yᵢ)²`.
#[inline]
pub fn squared_distance<T: Scalar>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .map(|(&a, &b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

#[inline]
pub(crate) fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// A point together with a real weight (its squared "radius").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoint<T> {
    pub point: Point<T>,
    pub weight: T,
}

impl<T: Scalar> WeightedPoint<T> {
    pub fn new(point: Point<T>, weight: T) -> Result<Self> {
        if !weight.is_finite() {
            return Err(Error::contract("weight must be finite"));
        }
        Ok(Self { point, weight })
    }

    /// Weighted point with zero weight.
    pub fn unweighted(point: Point<T>) -> Self {
        Self {
            point,
            weight: T::zero(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.point.dim()
    }
}

/// Power of `x` with respect to `p̂`: `‖x − p‖² − w(p)`.
pub fn power_distance<T: Scalar>(x: &Point<T>, p: &WeightedPoint<T>) -> Result<T> {
    check_dims(x.dim(), p.dim())?;
    Ok(power_distance_raw(x.coords(), p))
}

#[inline]
pub(crate) fn power_distance_raw<T: Scalar>(x: &[T], p: &WeightedPoint<T>) -> T {
    squared_distance(x, p.point.coords()) - p.weight
}

/// `‖p − q‖² − w(p) − w(q)`; zero when the two weighted points are orthogonal.
pub fn weighted_pair_distance<T: Scalar>(p: &WeightedPoint<T>, q: &WeightedPoint<T>) -> Result<T> {
    check_dims(p.dim(), q.dim())?;
    Ok(weighted_pair_distance_raw(p, q))
}

#[inline]
pub(crate) fn weighted_pair_distance_raw<T: Scalar>(p: &WeightedPoint<T>, q: &WeightedPoint<T>) -> T {
    squared_distance(p.point.coords(), q.point.coords()) - (p.weight + q.weight)
}

/// Iso-barycenter of `subset`, weighted by minus its mean squared spread.
pub fn barycenter<T: Scalar>(subset: &[&Point<T>]) -> Result<WeightedPoint<T>> {
    let first = subset
        .first()
        .ok_or_else(|| Error::contract("barycenter of an empty subset"))?;
    let dim = first.dim();
    for p in subset {
        check_dims(dim, p.dim())?;
    }
    let k = T::from_count(subset.len());
    let mut center = vec![T::zero(); dim];
    for p in subset {
        for (c, &x) in center.iter_mut().zip(p.coords()) {
            *c = *c + x;
        }
    }
    for c in center.iter_mut() {
        *c = *c / k;
    }
    let spread: T = subset
        .iter()
        .map(|p| squared_distance(&center, p.coords()))
        .sum::<T>()
        / k;
    Ok(WeightedPoint {
        point: Point::from_vec_unchecked(center),
        weight: -spread,
    })
}

/// Ordered, dimension-consistent point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud<T> {
    points: Vec<Point<T>>,
    dim: usize,
}

impl<T: Scalar> PointCloud<T> {
    pub fn new(points: Vec<Point<T>>) -> Result<Self> {
        let dim = points
            .first()
            .ok_or_else(|| Error::contract("point cloud must contain at least one point"))?
            .dim();
        for p in &points {
            check_dims(dim, p.dim())?;
        }
        Ok(Self { points, dim })
    }

    /// Builds a cloud from raw coordinate rows.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let points = rows.into_iter().map(Point::new).collect::<Result<Vec<_>>>()?;
        Self::new(points)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    #[inline]
    pub fn point(&self, i: usize) -> &Point<T> {
        &self.points[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point<T>> {
        self.points.iter()
    }

    pub fn map_points(&self, mut f: impl FnMut(&Point<T>) -> Point<T>) -> Result<Self> {
        Self::new(self.points.iter().map(&mut f).collect())
    }
}

/// Where the weights of a [`WeightedCloud`] came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Raw,
    /// Points of the source cloud weighted by `−d²_{P,k}(p)`.
    Approx { k: usize },
    /// Iso-barycenters of every k-subset of a source cloud of `source_len` points.
    Barycentric { k: usize, source_len: usize },
}

/// Ordered set of weighted points with a provenance tag.
///
/// Barycentric clouds keep the generating subset of every point: two subsets
/// can share a barycenter while carrying different weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedCloud<T> {
    points: Vec<WeightedPoint<T>>,
    dim: usize,
    provenance: Provenance,
    generators: Vec<Vec<usize>>,
}

impl<T: Scalar> WeightedCloud<T> {
    /// Cloud with [`Provenance::Raw`].
    pub fn raw(points: Vec<WeightedPoint<T>>) -> Result<Self> {
        Self::with_provenance(points, Provenance::Raw, Vec::new())
    }

    pub(crate) fn with_provenance(
        points: Vec<WeightedPoint<T>>,
        provenance: Provenance,
        generators: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let dim = points
            .first()
            .ok_or_else(|| Error::contract("weighted cloud must contain at least one point"))?
            .dim();
        for p in &points {
            check_dims(dim, p.dim())?;
        }
        if let Provenance::Barycentric { .. } = provenance {
            if generators.len() != points.len() {
                return Err(Error::contract("barycentric cloud needs one generator per point"));
            }
        }
        Ok(Self {
            points,
            dim,
            provenance,
            generators,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn points(&self) -> &[WeightedPoint<T>] {
        &self.points
    }

    #[inline]
    pub fn point(&self, i: usize) -> &WeightedPoint<T> {
        &self.points[i]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Generating subset (indices into the source cloud) of point `i`, for barycentric clouds.
    pub fn generator(&self, i: usize) -> Option<&[usize]> {
        self.generators.get(i).map(Vec::as_slice)
    }

    pub fn generators(&self) -> &[Vec<usize>] {
        &self.generators
    }

    /// Sub-cloud made of the given indices, tagged [`Provenance::Raw`].
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let pts = indices
            .iter()
            .map(|&i| {
                self.points
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::contract(format!("index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::raw(pts)
    }

    pub fn max_weight(&self) -> T {
        self.points
            .iter()
            .map(|p| p.weight)
            .fold(T::neg_infinity(), T::max)
    }
}
