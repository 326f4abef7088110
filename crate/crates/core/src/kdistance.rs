//! Exact and approximate k-distance.
//!
//! `d_{P,k}(x)` is the root mean squared distance from `x` to its k nearest
//! neighbours in `P`. It equals `min_b √D(x, b̂)` over the weighted
//! iso-barycenters of all k-subsets, and is sandwiched by the approximation
//! `d̃_{P,k}(x) = min_p √D(x, p̂)` with `w(p) = −d²_{P,k}(p)`:
//! `d/√2 ≤ d̃ ≤ √3·d`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, combinations};
use crate::error::{Error, Result};
use crate::geometry::{
    barycenter, power_distance_raw, squared_distance, Point, PointCloud, Provenance, WeightedCloud,
    WeightedPoint,
};
use crate::scalar::Scalar;

/// Default cap on the number of weighted barycenters materialized.
pub const DEFAULT_BARYCENTER_BUDGET: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KDistanceQueryResult<T> {
    pub value: T,
    /// Indices of the k nearest points, nearest first (ties by index).
    pub neighbor_indices: Vec<usize>,
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::contract(format!("k = {k} outside 1..={n}")));
    }
    Ok(())
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Squared distances from `x` to every point of `cloud`, sorted ascending with index tie-break.
fn sorted_squared_distances<T: Scalar>(x: &[T], cloud: &PointCloud<T>) -> Vec<(T, usize)> {
    let mut d: Vec<(T, usize)> = cloud
        .iter()
        .enumerate()
        .map(|(i, p)| (squared_distance(x, p.coords()), i))
        .collect();
    d.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    d
}

/// k-distance of `x` to `cloud`.
pub fn k_distance<T: Scalar>(
    x: &Point<T>,
    cloud: &PointCloud<T>,
    k: usize,
) -> Result<KDistanceQueryResult<T>> {
    let (mean, neighbor_indices) = k_distance_sq_with_neighbors(x, cloud, k)?;
    Ok(KDistanceQueryResult {
        value: mean.sqrt(),
        neighbor_indices,
    })
}

/// Squared k-distance, without the rounding of a square root round trip.
pub fn k_distance_sq<T: Scalar>(x: &Point<T>, cloud: &PointCloud<T>, k: usize) -> Result<T> {
    k_distance_sq_with_neighbors(x, cloud, k).map(|(v, _)| v)
}

fn k_distance_sq_with_neighbors<T: Scalar>(
    x: &Point<T>,
    cloud: &PointCloud<T>,
    k: usize,
) -> Result<(T, Vec<usize>)> {
    check_k(k, cloud.len())?;
    check_dim(cloud.dim(), x.dim())?;
    let sorted = sorted_squared_distances(x.coords(), cloud);
    let head = &sorted[..k];
    let mean = head.iter().map(|&(d, _)| d).sum::<T>() / T::from_count(k);
    Ok((mean, head.iter().map(|&(_, i)| i).collect()))
}

/// [`k_distance`] values for a batch of probes, evaluated in parallel.
pub fn k_distances<T: Scalar>(probes: &[Point<T>], cloud: &PointCloud<T>, k: usize) -> Result<Vec<T>> {
    check_k(k, cloud.len())?;
    probes
        .par_iter()
        .map(|x| k_distance(x, cloud, k).map(|r| r.value))
        .collect()
}

/// Weights every point of `cloud` by its negated squared k-distance.
pub fn assign_approx_weights<T: Scalar>(cloud: &PointCloud<T>, k: usize) -> Result<WeightedCloud<T>> {
    check_k(k, cloud.len())?;
    let points = cloud
        .points()
        .par_iter()
        .map(|p| {
            Ok(WeightedPoint {
                point: p.clone(),
                weight: -k_distance_sq(p, cloud, k)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    WeightedCloud::with_provenance(points, Provenance::Approx { k }, Vec::new())
}

fn min_root_power<T: Scalar>(x: &[T], cloud: &WeightedCloud<T>) -> T {
    cloud
        .points()
        .iter()
        .map(|p| power_distance_raw(x, p))
        .fold(T::infinity(), T::min)
        .max(T::zero())
        .sqrt()
}

/// Approximate k-distance over an [`assign_approx_weights`] cloud.
pub fn approx_k_distance<T: Scalar>(x: &Point<T>, weighted: &WeightedCloud<T>) -> Result<T> {
    if !matches!(weighted.provenance(), Provenance::Approx { .. }) {
        return Err(Error::contract(format!(
            "approx_k_distance needs an approx(k) cloud, got {:?}",
            weighted.provenance()
        )));
    }
    check_dim(weighted.dim(), x.dim())?;
    Ok(min_root_power(x.coords(), weighted))
}

/// Every k-subset's iso-barycenter, weighted, in lexicographic subset order.
pub fn barycenter_cloud<T: Scalar>(
    cloud: &PointCloud<T>,
    k: usize,
    budget: usize,
) -> Result<WeightedCloud<T>> {
    let n = cloud.len();
    check_k(k, n)?;
    let count = binomial(n, k).unwrap_or(u128::MAX);
    if count > budget as u128 {
        return Err(Error::BudgetExceeded { n, k, count, budget });
    }
    let subsets: Vec<Vec<usize>> = combinations(n, k).collect();
    let points = subsets
        .par_iter()
        .map(|s| {
            let refs: Vec<&Point<T>> = s.iter().map(|&i| cloud.point(i)).collect();
            barycenter(&refs)
        })
        .collect::<Result<Vec<_>>>()?;
    WeightedCloud::with_provenance(
        points,
        Provenance::Barycentric { k, source_len: n },
        subsets,
    )
}

/// k-distance evaluated as the minimum power over a barycentric cloud.
pub fn k_distance_via_barycenters<T: Scalar>(x: &Point<T>, bary: &WeightedCloud<T>) -> Result<T> {
    if !matches!(bary.provenance(), Provenance::Barycentric { .. }) {
        return Err(Error::contract(format!(
            "k_distance_via_barycenters needs a barycentric(k) cloud, got {:?}",
            bary.provenance()
        )));
    }
    check_dim(bary.dim(), x.dim())?;
    Ok(min_root_power(x.coords(), bary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::weighted_pair_distance;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(xs: &[f64]) -> PointCloud<f64> {
        PointCloud::from_rows(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    fn pt(c: &[f64]) -> Point<f64> {
        Point::new(c.to_vec()).unwrap()
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> PointCloud<f64> {
        PointCloud::from_rows(
            (0..n)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
        )
        .unwrap()
    }

    // Independent oracle: minimum over all k-subsets of the mean squared distance.
    fn brute_force_k_distance(x: &[f64], cloud: &PointCloud<f64>, k: usize) -> f64 {
        combinations(cloud.len(), k)
            .map(|s| {
                s.iter()
                    .map(|&i| squared_distance(x, cloud.point(i).coords()))
                    .sum::<f64>()
                    / k as f64
            })
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    #[test]
    fn k_distance_examples() {
        let p = line(&[0.0, 1.0, 2.0]);
        let r = k_distance(&pt(&[0.4]), &p, 1).unwrap();
        assert!((r.value - 0.4).abs() < 1e-15);
        assert_eq!(r.neighbor_indices, vec![0]);
        let r = k_distance(&pt(&[0.0]), &p, 2).unwrap();
        assert!((r.value - 0.5f64.sqrt()).abs() < 1e-15);
        let r = k_distance(&pt(&[0.0]), &p, 3).unwrap();
        assert!((r.value - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn k_out_of_range() {
        let p = line(&[0.0, 1.0]);
        assert!(k_distance(&pt(&[0.0]), &p, 0).is_err());
        assert!(k_distance(&pt(&[0.0]), &p, 3).is_err());
        assert!(assign_approx_weights(&p, 3).is_err());
        assert!(barycenter_cloud(&p, 0, 10).is_err());
        assert!(matches!(
            k_distance(&pt(&[0.0, 1.0]), &p, 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ties_break_by_index() {
        let p = line(&[1.0, -1.0, 1.0, -1.0]);
        let r = k_distance(&pt(&[0.0]), &p, 3).unwrap();
        assert_eq!(r.neighbor_indices, vec![0, 1, 2]);
    }

    #[test]
    fn k_distance_matches_subset_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.random_range(2..9);
            let dim = rng.random_range(1..5);
            let cloud = random_cloud(&mut rng, n, dim);
            let k = rng.random_range(1..=n);
            let x = random_cloud(&mut rng, 1, dim).point(0).clone();
            let r = k_distance(&x, &cloud, k).unwrap();
            let oracle = brute_force_k_distance(x.coords(), &cloud, k);
            assert!((r.value - oracle).abs() <= 1e-12 * oracle.max(1.0));
            let mean: f64 = r
                .neighbor_indices
                .iter()
                .map(|&i| squared_distance(x.coords(), cloud.point(i).coords()))
                .sum::<f64>()
                / k as f64;
            assert!((mean - r.value * r.value).abs() < 1e-12);
        }
    }

    #[test]
    fn approx_weight_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cloud = random_cloud(&mut rng, 12, 3);
        let w = assign_approx_weights(&cloud, 1).unwrap();
        assert!(w.points().iter().all(|p| p.weight == 0.0));
        assert_eq!(w.provenance(), &Provenance::Approx { k: 1 });

        let w = assign_approx_weights(&line(&[0.0, 2.0]), 2).unwrap();
        assert_eq!(w.point(0).weight, -2.0);
        assert_eq!(w.point(1).weight, -2.0);

        let cloud = random_cloud(&mut rng, 20, 4);
        let w = assign_approx_weights(&cloud, 4).unwrap();
        for (i, p) in cloud.iter().enumerate() {
            let oracle = brute_force_k_distance(p.coords(), &cloud, 4);
            assert!((w.point(i).weight + oracle * oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn approx_k_distance_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cloud = random_cloud(&mut rng, 15, 2);
        let w = assign_approx_weights(&cloud, 1).unwrap();
        for _ in 0..20 {
            let x = random_cloud(&mut rng, 1, 2).point(0).clone();
            let nn = k_distance(&x, &cloud, 1).unwrap().value;
            assert!((approx_k_distance(&x, &w).unwrap() - nn).abs() < 1e-12);
        }

        let w = assign_approx_weights(&line(&[0.0, 2.0]), 2).unwrap();
        let v = approx_k_distance(&pt(&[1.0]), &w).unwrap();
        assert!((v - 3f64.sqrt()).abs() < 1e-15);
        let exact = k_distance(&pt(&[1.0]), &line(&[0.0, 2.0]), 2).unwrap().value;
        assert!((exact - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wrong_provenance_is_rejected() {
        let cloud = line(&[0.0, 1.0, 2.0]);
        let bary = barycenter_cloud(&cloud, 2, 100).unwrap();
        let approx = assign_approx_weights(&cloud, 2).unwrap();
        assert!(approx_k_distance(&pt(&[0.0]), &bary).is_err());
        assert!(k_distance_via_barycenters(&pt(&[0.0]), &approx).is_err());
    }

    #[test]
    fn sandwich_on_random_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let lo = 1.0 / 2f64.sqrt() - 1e-9;
        let hi = 3f64.sqrt() + 1e-9;
        for _ in 0..10 {
            let n = rng.random_range(5..30);
            let dim = rng.random_range(1..6);
            let k = rng.random_range(1..=n.min(5));
            let cloud = random_cloud(&mut rng, n, dim);
            let w = assign_approx_weights(&cloud, k).unwrap();
            for _ in 0..200 {
                let x = Point::new((0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
                let d = k_distance(&x, &cloud, k).unwrap().value;
                let a = approx_k_distance(&x, &w).unwrap();
                assert!(a >= lo * d && a <= hi * d, "ratio {} out of band", a / d);
            }
        }
    }

    #[test]
    fn barycenter_cloud_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        assert_eq!(barycenter_cloud(&line(&[0.0, 1.0, 2.0]), 2, 100).unwrap().len(), 3);
        assert_eq!(barycenter_cloud(&random_cloud(&mut rng, 4, 2), 2, 100).unwrap().len(), 6);
        let b = barycenter_cloud(&random_cloud(&mut rng, 6, 3), 3, 100).unwrap();
        assert_eq!(b.len(), 20);
        assert!(b.points().iter().all(|p| p.weight <= 0.0));
        assert_eq!(b.generator(0), Some(&[0usize, 1, 2][..]));
        assert_eq!(b.generator(19), Some(&[3usize, 4, 5][..]));
    }

    #[test]
    fn budget_error_names_count() {
        let cloud = line(&(0..12).map(f64::from).collect::<Vec<_>>());
        match barycenter_cloud(&cloud, 3, 100) {
            Err(Error::BudgetExceeded { n, k, count, budget }) => {
                assert_eq!((n, k, count, budget), (12, 3, 220, 100));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(barycenter_cloud(&cloud, 3, DEFAULT_BARYCENTER_BUDGET).unwrap().len(), 220);
    }

    #[test]
    fn barycentric_form_matches_k_distance() {
        let p = line(&[0.0, 1.0, 2.0]);
        let b = barycenter_cloud(&p, 2, 100).unwrap();
        let v = k_distance_via_barycenters(&pt(&[0.0]), &b).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-15);
        let b1 = barycenter_cloud(&p, 1, 100).unwrap();
        assert_eq!(k_distance_via_barycenters(&pt(&[1.0]), &b1).unwrap(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..30 {
            let n = rng.random_range(3..=10);
            let k = rng.random_range(1..=3);
            let dim = rng.random_range(1..5);
            let cloud = random_cloud(&mut rng, n, dim);
            let b = barycenter_cloud(&cloud, k, 1000).unwrap();
            for _ in 0..100 {
                let x = Point::new((0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
                let exact = k_distance(&x, &cloud, k).unwrap().value;
                let via = k_distance_via_barycenters(&x, &b).unwrap();
                assert!((exact - via).abs() <= 1e-9 * exact.max(1e-12), "{exact} vs {via}");
            }
        }
    }

    #[test]
    fn barycenter_pair_identity_all_subset_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let cloud = random_cloud(&mut rng, 6, 3);
        let k = 2;
        let b = barycenter_cloud(&cloud, k, 100).unwrap();
        for i in 0..b.len() {
            for j in 0..b.len() {
                let lhs = weighted_pair_distance(b.point(i), b.point(j)).unwrap();
                let rhs: f64 = b
                    .generator(i)
                    .unwrap()
                    .iter()
                    .flat_map(|&l| {
                        b.generator(j).unwrap().iter().map(move |&s| (l, s))
                    })
                    .map(|(l, s)| squared_distance(cloud.point(l).coords(), cloud.point(s).coords()))
                    .sum::<f64>()
                    / (k * k) as f64;
                assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1e-12));
            }
        }
    }

    #[test]
    fn neighbor_set_invariant_under_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..20 {
            let n = 15;
            let cloud = random_cloud(&mut rng, n, 3);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let shuffled =
                PointCloud::new(perm.iter().map(|&i| cloud.point(i).clone()).collect()).unwrap();
            let x = random_cloud(&mut rng, 1, 3).point(0).clone();
            for k in 1..=5 {
                let a = k_distance(&x, &cloud, k).unwrap();
                let b = k_distance(&x, &shuffled, k).unwrap();
                let mut a_set = a.neighbor_indices.clone();
                let mut b_set: Vec<usize> = b.neighbor_indices.iter().map(|&i| perm[i]).collect();
                a_set.sort();
                b_set.sort();
                assert_eq!(a_set, b_set);
                assert_eq!(a.value, b.value);
            }
        }
    }

    #[test]
    fn zero_k_distance_only_on_duplicates() {
        let p = line(&[0.0, 0.0, 0.0, 3.0]);
        assert_eq!(k_distance(&pt(&[0.0]), &p, 3).unwrap().value, 0.0);
        assert!(k_distance(&pt(&[0.0]), &p, 4).unwrap().value > 0.0);
        assert_eq!(k_distance(&pt(&[3.0]), &p, 1).unwrap().value, 0.0);
        assert!(k_distance(&pt(&[3.0]), &p, 2).unwrap().value > 0.0);
        assert!(k_distance(&pt(&[1.0]), &p, 1).unwrap().value > 0.0);
    }

    #[test]
    fn batch_matches_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let cloud = random_cloud(&mut rng, 25, 4);
        let probes: Vec<_> = random_cloud(&mut rng, 40, 4).points().to_vec();
        let batch = k_distances(&probes, &cloud, 3).unwrap();
        for (x, v) in probes.iter().zip(batch) {
            assert_eq!(k_distance(x, &cloud, 3).unwrap().value, v);
        }
    }
}
