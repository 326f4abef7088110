//! Weighted minimum enclosing balls.
//!
//! For weighted points `p̂ᵢ = (pᵢ, wᵢ)` the squared radius is
//! `rad² = min_x max_i D(x, p̂ᵢ)`. The center is unique, is a convex
//! combination `Σ λᵢ pᵢ` of the points attaining the maximum, and
//! `rad² = ½ Σᵢ Σⱼ λᵢ λⱼ D(p̂ᵢ, p̂ⱼ)`.
//!
//! The dual of the min-max problem is the concave quadratic
//! `g(λ) = Σ λᵢ (‖pᵢ‖² − wᵢ) − ‖Σ λᵢ pᵢ‖²` over the probability simplex, and
//! `max_i D(c, p̂ᵢ) − g(λ)` at `c = Σ λᵢ pᵢ` is a duality gap that certifies
//! the iterate. [`weighted_meb`] maximizes `g` with away-step Frank-Wolfe and
//! polishes the support by solving its stationarity system exactly.
//! [`weighted_meb_exact`] enumerates candidate supports instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, squared_distance, weighted_pair_distance_raw, Point, WeightedCloud};
use crate::scalar::Scalar;

/// Multipliers at or below this value are treated as zero.
pub const SUPPORT_THRESHOLD: f64 = 1e-10;

/// Default convergence tolerance on the duality gap.
pub const DEFAULT_TOL: f64 = 1e-8;

pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Largest input accepted by [`weighted_meb_exact`].
pub const EXACT_CAP: usize = 12;

/// Starting point of the iterative solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MebInit {
    /// All mass on the point with the largest power at the centroid.
    #[default]
    FarthestFromCentroid,
    /// Uniform multipliers.
    Uniform,
    /// All mass on the given index.
    Vertex(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MebOptions<T> {
    /// Relative tolerance; scaled by the spread of the input (see [`input_scale`]).
    pub tol: T,
    pub max_iter: usize,
    pub init: MebInit,
}

impl<T: Scalar> Default for MebOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(DEFAULT_TOL),
            max_iter: DEFAULT_MAX_ITER,
            init: MebInit::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MebResult<T> {
    pub center: Point<T>,
    pub rad_sq: T,
    /// `(index, λ)` with `λ > SUPPORT_THRESHOLD`, sorted by index, summing to 1.
    pub support: Vec<(usize, T)>,
    pub iterations: usize,
    /// `|rad² − ½ ΣΣ λᵢλⱼ D(p̂ᵢ, p̂ⱼ)|`.
    pub residual: T,
    /// `rad² < 0`: the ball is imaginary (only possible with positive weights).
    pub imaginary: bool,
}

impl<T: Scalar> MebResult<T> {
    /// Multipliers as a dense vector of length `n`.
    pub fn dense_lambdas(&self, n: usize) -> Vec<T> {
        let mut out = vec![T::zero(); n];
        for &(i, l) in &self.support {
            out[i] = l;
        }
        out
    }
}

/// Magnitude used to turn relative tolerances into absolute ones:
/// the largest squared offset from the first point plus the largest |weight|.
pub fn input_scale<T: Scalar>(cloud: &WeightedCloud<T>) -> T {
    let origin = cloud.point(0).point.coords();
    let spread = cloud
        .points()
        .iter()
        .map(|p| squared_distance(p.point.coords(), origin))
        .fold(T::zero(), T::max);
    let weights = cloud
        .points()
        .iter()
        .map(|p| p.weight.abs())
        .fold(T::zero(), T::max);
    (spread + weights).max(T::min_positive_value())
}

/// Points translated so that the first one sits at the origin.
struct Local<T> {
    origin: Vec<T>,
    q: Vec<Vec<T>>,
    w: Vec<T>,
    dim: usize,
}

impl<T: Scalar> Local<T> {
    fn new(cloud: &WeightedCloud<T>) -> Self {
        let origin = cloud.point(0).point.coords().to_vec();
        let q = cloud
            .points()
            .iter()
            .map(|p| {
                p.point
                    .coords()
                    .iter()
                    .zip(&origin)
                    .map(|(&a, &b)| a - b)
                    .collect()
            })
            .collect();
        let w = cloud.points().iter().map(|p| p.weight).collect();
        Self {
            origin,
            q,
            w,
            dim: cloud.dim(),
        }
    }

    fn len(&self) -> usize {
        self.q.len()
    }

    fn power(&self, c: &[T], i: usize) -> T {
        squared_distance(c, &self.q[i]) - self.w[i]
    }

    fn combination(&self, lambda: &[T]) -> Vec<T> {
        let mut c = vec![T::zero(); self.dim];
        for (qi, &l) in self.q.iter().zip(lambda) {
            if l != T::zero() {
                for (ck, &x) in c.iter_mut().zip(qi) {
                    *ck = *ck + l * x;
                }
            }
        }
        c
    }

    fn to_global(&self, c: &[T]) -> Point<T> {
        Point::from_vec_unchecked(c.iter().zip(&self.origin).map(|(&a, &b)| a + b).collect())
    }
}

/// Solves `a·x = b` in place by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot falls below `rel_eps` times the largest entry.
pub(crate) fn solve_dense<T: Scalar>(a: &mut [T], b: &mut [T], n: usize, rel_eps: T) -> Option<()> {
    let max_entry = a.iter().map(|x| x.abs()).fold(T::zero(), T::max);
    if max_entry == T::zero() {
        return None;
    }
    let eps = rel_eps * max_entry;
    for col in 0..n {
        let (piv, piv_val) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .fold((col, -T::one()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if piv_val <= eps {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                a[r * n + k] = a[r * n + k] - f * a[col * n + k];
            }
            b[r] = b[r] - f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s = s - a[col * n + k] * b[k];
        }
        b[col] = s / a[col * n + col];
    }
    Some(())
}

/// Maximizer of the dual over the affine hull of `support`, from the bordered
/// system `[2G 1; 1ᵀ 0]·[λ; ν] = [a; 1]` written around `center`.
fn affine_optimum<T: Scalar>(local: &Local<T>, support: &[usize], center: &[T]) -> Option<Vec<T>> {
    let s = support.len();
    if s == 1 {
        return Some(vec![T::one()]);
    }
    let n = s + 1;
    let rel: Vec<Vec<T>> = support
        .iter()
        .map(|&i| local.q[i].iter().zip(center).map(|(&a, &b)| a - b).collect())
        .collect();
    let mut m = vec![T::zero(); n * n];
    let mut rhs = vec![T::zero(); n];
    let two = T::lit(2.0);
    for r in 0..s {
        for c in r..s {
            let g = two * dot(&rel[r], &rel[c]);
            m[r * n + c] = g;
            m[c * n + r] = g;
        }
        m[r * n + s] = T::one();
        m[s * n + r] = T::one();
        rhs[r] = dot(&rel[r], &rel[r]) - local.w[support[r]];
    }
    rhs[s] = T::one();
    solve_dense(&mut m, &mut rhs, n, T::lit(1e-13))?;
    rhs.truncate(s);
    if rhs.iter().any(|x| !x.is_finite()) {
        return None;
    }
    Some(rhs)
}

/// Coefficients `ν` with `Σν_i q_i = 0` and `Σν_i = 0` over `support`, if the
/// support is (numerically) affinely dependent.
fn affine_dependence<T: Scalar>(local: &Local<T>, support: &[usize]) -> Option<Vec<T>> {
    let s = support.len();
    if s < 2 {
        return None;
    }
    let base = &local.q[support[0]];
    let v: Vec<Vec<T>> = support[1..]
        .iter()
        .map(|&i| local.q[i].iter().zip(base).map(|(&a, &b)| a - b).collect())
        .collect();
    let n = s - 1;
    let mut g = vec![T::zero(); n * n];
    for r in 0..n {
        for c in r..n {
            let x = dot(&v[r], &v[c]);
            g[r * n + c] = x;
            g[c * n + r] = x;
        }
    }
    let mu = null_vector(&mut g, n, T::lit(1e-10))?;
    let mut nu = Vec::with_capacity(s);
    nu.push(-mu.iter().copied().sum::<T>());
    nu.extend(mu);
    Some(nu)
}

/// A unit-free null vector of the square matrix `a` by Gaussian elimination
/// with full pivoting, or `None` when every pivot exceeds `rel_eps` times the
/// largest entry.
fn null_vector<T: Scalar>(a: &mut [T], n: usize, rel_eps: T) -> Option<Vec<T>> {
    let max_entry = a.iter().map(|x| x.abs()).fold(T::zero(), T::max);
    let mut cols: Vec<usize> = (0..n).collect();
    if max_entry == T::zero() {
        let mut x = vec![T::zero(); n];
        x[0] = T::one();
        return Some(x);
    }
    let eps = rel_eps * max_entry;
    let mut rank = n;
    for k in 0..n {
        let (mut pr, mut pc, mut pv) = (k, k, -T::one());
        for r in k..n {
            for c in k..n {
                let x = a[r * n + c].abs();
                if x > pv {
                    (pr, pc, pv) = (r, c, x);
                }
            }
        }
        if pv <= eps {
            rank = k;
            break;
        }
        if pr != k {
            for c in 0..n {
                a.swap(k * n + c, pr * n + c);
            }
        }
        if pc != k {
            for r in 0..n {
                a.swap(r * n + k, r * n + pc);
            }
            cols.swap(k, pc);
        }
        for r in k + 1..n {
            let f = a[r * n + k] / a[k * n + k];
            for c in k..n {
                a[r * n + c] = a[r * n + c] - f * a[k * n + c];
            }
        }
    }
    if rank == n {
        return None;
    }
    // free variable `rank` set to 1, the remaining free ones to 0
    let mut y = vec![T::zero(); n];
    y[rank] = T::one();
    for k in (0..rank).rev() {
        let mut acc = T::zero();
        for c in k + 1..n {
            acc = acc + a[k * n + c] * y[c];
        }
        y[k] = -acc / a[k * n + k];
    }
    let mut x = vec![T::zero(); n];
    for (k, &c) in cols.iter().enumerate() {
        x[c] = y[k];
    }
    Some(x)
}

fn initial_lambda<T: Scalar>(local: &Local<T>, init: MebInit) -> Result<Vec<T>> {
    let m = local.len();
    let mut lambda = vec![T::zero(); m];
    match init {
        MebInit::Uniform => {
            let u = T::one() / T::from_count(m);
            lambda.iter_mut().for_each(|l| *l = u);
        }
        MebInit::Vertex(i) => {
            if i >= m {
                return Err(Error::contract(format!("initial vertex {i} out of range")));
            }
            lambda[i] = T::one();
        }
        MebInit::FarthestFromCentroid => {
            let u = vec![T::one() / T::from_count(m); m];
            let centroid = local.combination(&u);
            let best = (0..m)
                .map(|i| (i, local.power(&centroid, i)))
                .fold((0, T::neg_infinity()), |acc, x| if x.1 > acc.1 { x } else { acc });
            lambda[best.0] = T::one();
        }
    }
    Ok(lambda)
}

fn finish<T: Scalar>(
    local: &Local<T>,
    cloud: &WeightedCloud<T>,
    lambda: &[T],
    iterations: usize,
) -> MebResult<T> {
    let threshold = T::lit(SUPPORT_THRESHOLD);
    let mut support: Vec<(usize, T)> = lambda
        .iter()
        .enumerate()
        .filter(|&(_, &l)| l > threshold)
        .map(|(i, &l)| (i, l))
        .collect();
    let total: T = support.iter().map(|&(_, l)| l).sum();
    for s in support.iter_mut() {
        s.1 = s.1 / total;
    }
    let mut dense = vec![T::zero(); local.len()];
    for &(i, l) in &support {
        dense[i] = l;
    }
    let c = local.combination(&dense);
    let rad_sq = (0..local.len())
        .map(|i| local.power(&c, i))
        .fold(T::neg_infinity(), T::max);
    let residual = (rad_sq - quadratic_form(&support, cloud)).abs();
    MebResult {
        center: local.to_global(&c),
        rad_sq,
        support,
        iterations,
        residual,
        imaginary: rad_sq < T::zero(),
    }
}

fn quadratic_form<T: Scalar>(support: &[(usize, T)], cloud: &WeightedCloud<T>) -> T {
    let mut acc = T::zero();
    for &(i, li) in support {
        for &(j, lj) in support {
            acc = acc + li * lj * weighted_pair_distance_raw(cloud.point(i), cloud.point(j));
        }
    }
    acc * T::lit(0.5)
}

/// Weighted minimum enclosing ball with default initialization.
pub fn weighted_meb<T: Scalar>(cloud: &WeightedCloud<T>, tol: T, max_iter: usize) -> Result<MebResult<T>> {
    weighted_meb_with(
        cloud,
        &MebOptions {
            tol,
            max_iter,
            init: MebInit::default(),
        },
    )
}

/// Weighted minimum enclosing ball by away-step Frank-Wolfe on the dual simplex
/// with exact line search and active-set polishing.
pub fn weighted_meb_with<T: Scalar>(cloud: &WeightedCloud<T>, opts: &MebOptions<T>) -> Result<MebResult<T>> {
    if cloud.is_empty() {
        return Err(Error::contract("weighted MEB of an empty set"));
    }
    if !(opts.tol > T::zero()) {
        return Err(Error::contract("MEB tolerance must be positive"));
    }
    let local = Local::new(cloud);
    let m = local.len();
    if m == 1 {
        return Ok(finish(&local, cloud, &[T::one()], 0));
    }
    let eff_tol = opts.tol * input_scale(cloud);
    let threshold = T::lit(SUPPORT_THRESHOLD);
    let two = T::lit(2.0);

    let mut lambda = initial_lambda(&local, opts.init)?;
    let mut c = local.combination(&lambda);
    let mut powers = vec![T::zero(); m];
    let mut last_support: Vec<usize> = Vec::new();
    let mut best = (T::infinity(), lambda.clone());

    for iter in 0..opts.max_iter {
        for (i, p) in powers.iter_mut().enumerate() {
            *p = local.power(&c, i);
        }
        let (j_fw, d_max) = powers
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
        let dual: T = lambda.iter().zip(&powers).map(|(&l, &p)| l * p).sum();
        let gap = d_max - dual;
        if gap < best.0 {
            best = (gap, lambda.clone());
        }
        if gap <= eff_tol {
            return Ok(finish(&local, cloud, &lambda, iter));
        }

        // polish whenever the active set changes
        let support: Vec<usize> = (0..m).filter(|&i| lambda[i] > threshold).collect();
        if support != last_support {
            last_support = support.clone();
            if let Some(mu) = affine_optimum(&local, &support, &c) {
                if mu.iter().all(|&x| x > threshold) {
                    let mut cand = vec![T::zero(); m];
                    for (&i, &x) in support.iter().zip(&mu) {
                        cand[i] = x;
                    }
                    let cc = local.combination(&cand);
                    let cand_max = (0..m).map(|i| local.power(&cc, i)).fold(T::neg_infinity(), T::max);
                    let cand_dual: T = support.iter().map(|&i| cand[i] * local.power(&cc, i)).sum();
                    if cand_max - cand_dual <= eff_tol {
                        return Ok(finish(&local, cloud, &cand, iter + 1));
                    }
                    if cand_dual > dual {
                        lambda = cand;
                        c = cc;
                        continue;
                    }
                } else if mu.iter().all(|x| x.is_finite()) {
                    // walk toward the affine optimum until a multiplier vanishes
                    let mut theta = T::one();
                    for (&i, &x) in support.iter().zip(&mu) {
                        if x < lambda[i] && x <= threshold {
                            theta = theta.min(lambda[i] / (lambda[i] - x));
                        }
                    }
                    if theta > T::zero() {
                        for (&i, &x) in support.iter().zip(&mu) {
                            let v = lambda[i] + theta * (x - lambda[i]);
                            lambda[i] = if v <= threshold { T::zero() } else { v };
                        }
                        let total: T = lambda.iter().copied().sum();
                        lambda.iter_mut().for_each(|l| *l = *l / total);
                        c = local.combination(&lambda);
                        continue;
                    }
                }
            } else if let Some(nu) = affine_dependence(&local, &support) {
                // Carathéodory step: the center stays put, the dual does not
                // decrease, and one multiplier leaves the support
                let slope: T = support.iter().zip(&nu).map(|(&i, &v)| v * powers[i]).sum();
                let sign = if slope < T::zero() { -T::one() } else { T::one() };
                let (mut t, mut leaving) = (T::infinity(), None);
                for (&i, &v) in support.iter().zip(&nu) {
                    let v = sign * v;
                    if v < T::zero() && lambda[i] / -v < t {
                        t = lambda[i] / -v;
                        leaving = Some(i);
                    }
                }
                if let Some(out) = leaving {
                    for (&i, &v) in support.iter().zip(&nu) {
                        lambda[i] = (lambda[i] + t * sign * v).max(T::zero());
                    }
                    lambda[out] = T::zero();
                    let total: T = lambda.iter().copied().sum();
                    lambda.iter_mut().for_each(|l| *l = *l / total);
                    c = local.combination(&lambda);
                    continue;
                }
            }
        }

        // away vertex: smallest power among the active set
        let (j_away, d_min) = (0..m)
            .filter(|&i| lambda[i] > T::zero())
            .map(|i| (i, powers[i]))
            .fold((0, T::infinity()), |acc, x| if x.1 < acc.1 { x } else { acc });
        let fw_gain = d_max - dual;
        let away_gain = dual - d_min;

        let (toward, step_max, gain, sign) = if fw_gain >= away_gain || lambda[j_away] >= T::one() {
            (j_fw, T::one(), fw_gain, T::one())
        } else {
            let la = lambda[j_away];
            (j_away, la / (T::one() - la), away_gain, -T::one())
        };
        // direction in center space: sign·(q_toward − c)
        let u: Vec<T> = local.q[toward]
            .iter()
            .zip(&c)
            .map(|(&a, &b)| sign * (a - b))
            .collect();
        let curv = dot(&u, &u);
        let gamma = if curv > T::zero() {
            (gain / (two * curv)).min(step_max)
        } else {
            step_max
        };
        if !(gamma > T::zero()) {
            break;
        }
        if sign > T::zero() {
            for l in lambda.iter_mut() {
                *l = *l * (T::one() - gamma);
            }
            lambda[toward] = lambda[toward] + gamma;
        } else {
            for l in lambda.iter_mut() {
                *l = *l * (T::one() + gamma);
            }
            lambda[toward] = lambda[toward] - gamma;
            if lambda[toward] <= threshold * T::lit(1e-3) {
                lambda[toward] = T::zero();
            }
        }
        for (ck, &uk) in c.iter_mut().zip(&u) {
            *ck = *ck + gamma * uk;
        }
        // refresh the center periodically to shed accumulated drift
        if iter % 64 == 63 {
            c = local.combination(&lambda);
        }
    }

    let r = finish(&local, cloud, &best.1, opts.max_iter);
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: best.0.as_f64(),
        best_center: r.center.coords().iter().map(|x| x.as_f64()).collect(),
        best_rad_sq: r.rad_sq.as_f64(),
        simplex: None,
    })
}

/// Exact weighted MEB by enumerating affinely independent candidate supports.
///
/// For each subset the center is taken in the affine hull of the subset with
/// equal powers to all of its members; a candidate is kept when its affine
/// coordinates are non-negative and no other point has a larger power.
pub fn weighted_meb_exact<T: Scalar>(cloud: &WeightedCloud<T>) -> Result<MebResult<T>> {
    let m = cloud.len();
    if m == 0 {
        return Err(Error::contract("weighted MEB of an empty set"));
    }
    if m > EXACT_CAP {
        return Err(Error::contract(format!(
            "exact MEB oracle is capped at {EXACT_CAP} points, got {m}"
        )));
    }
    let local = Local::new(cloud);
    let scale = input_scale(cloud);
    let slack = T::lit(1e-9) * scale;
    let max_card = m.min(cloud.dim() + 1);
    let mut best: Option<(T, Vec<T>)> = None;
    let mut tried = 0usize;

    for mask in 1u32..(1u32 << m) {
        let subset: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        if subset.len() > max_card {
            continue;
        }
        tried += 1;
        let Some(coeffs) = circumcenter_coefficients(&local, &subset) else {
            continue;
        };
        if coeffs.iter().any(|&x| x < -T::lit(1e-9)) {
            continue;
        }
        let mut lambda = vec![T::zero(); m];
        for (&i, &x) in subset.iter().zip(&coeffs) {
            lambda[i] = x.max(T::zero());
        }
        let c = local.combination(&lambda);
        let r = local.power(&c, subset[0]);
        let dominated = (0..m).all(|i| local.power(&c, i) <= r + slack);
        if !dominated {
            continue;
        }
        let better = match &best {
            None => true,
            Some((br, _)) => r < *br,
        };
        if better {
            best = Some((r, lambda));
        }
    }
    let (_, lambda) = best.ok_or_else(|| Error::contract("exact MEB found no admissible support"))?;
    Ok(finish(&local, cloud, &lambda, tried))
}

/// Affine coordinates of the point of `aff(subset)` with equal powers to every member.
fn circumcenter_coefficients<T: Scalar>(local: &Local<T>, subset: &[usize]) -> Option<Vec<T>> {
    let s = subset.len();
    if s == 1 {
        return Some(vec![T::one()]);
    }
    let base = &local.q[subset[0]];
    let w0 = local.w[subset[0]];
    let v: Vec<Vec<T>> = subset[1..]
        .iter()
        .map(|&i| local.q[i].iter().zip(base).map(|(&a, &b)| a - b).collect())
        .collect();
    let n = s - 1;
    let mut gram = vec![T::zero(); n * n];
    let mut rhs = vec![T::zero(); n];
    let two = T::lit(2.0);
    for r in 0..n {
        for c in 0..n {
            gram[r * n + c] = two * dot(&v[r], &v[c]);
        }
        rhs[r] = dot(&v[r], &v[r]) - local.w[subset[r + 1]] + w0;
    }
    solve_dense(&mut gram, &mut rhs, n, T::lit(1e-10))?;
    let lead = T::one() - rhs.iter().copied().sum::<T>();
    let mut out = Vec::with_capacity(s);
    out.push(lead);
    out.extend(rhs);
    Some(out)
}

/// `½ Σᵢ Σⱼ λᵢ λⱼ D(p̂ᵢ, p̂ⱼ)` for convex weights `lambdas` indexed like `cloud`.
pub fn radius_from_support<T: Scalar>(lambdas: &[T], cloud: &WeightedCloud<T>) -> Result<T> {
    if lambdas.len() != cloud.len() {
        return Err(Error::contract(format!(
            "expected {} weights, got {}",
            cloud.len(),
            lambdas.len()
        )));
    }
    let sum: T = lambdas.iter().copied().sum();
    if lambdas.iter().any(|&l| !(l >= T::zero())) || (sum - T::one()).abs() > T::lit(1e-9) {
        return Err(Error::contract("weights must be non-negative and sum to 1"));
    }
    let support: Vec<(usize, T)> = lambdas
        .iter()
        .enumerate()
        .filter(|&(_, &l)| l > T::zero())
        .map(|(i, &l)| (i, l))
        .collect();
    Ok(quadratic_form(&support, cloud))
}

/// Closed-form squared radius of two weighted points.
pub fn two_point_rad_sq<T: Scalar>(
    p: &crate::geometry::WeightedPoint<T>,
    q: &crate::geometry::WeightedPoint<T>,
) -> T {
    let l2 = squared_distance(p.point.coords(), q.point.coords());
    if l2 == T::zero() {
        return (-p.weight).max(-q.weight);
    }
    // center at p + t(q − p), with equal powers to both points
    let t = (l2 + p.weight - q.weight) / (T::lit(2.0) * l2);
    if t <= T::zero() {
        -p.weight
    } else if t >= T::one() {
        -q.weight
    } else {
        t * t * l2 - p.weight
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WeightedPoint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(pts: &[(&[f64], f64)]) -> WeightedCloud<f64> {
        WeightedCloud::raw(
            pts.iter()
                .map(|(c, w)| WeightedPoint::new(Point::new(c.to_vec()).unwrap(), *w).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn random_weighted(rng: &mut ChaCha8Rng, m: usize, dim: usize, wmin: f64) -> WeightedCloud<f64> {
        WeightedCloud::raw(
            (0..m)
                .map(|_| {
                    let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
                    let w = if wmin < 0.0 { rng.random_range(wmin..=0.0) } else { 0.0 };
                    WeightedPoint::new(Point::new(c).unwrap(), w).unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    fn check_invariants(x: &WeightedCloud<f64>, r: &MebResult<f64>, tol: f64) {
        let scale = input_scale(x);
        let sum: f64 = r.support.iter().map(|s| s.1).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(r.support.iter().all(|s| s.1 > SUPPORT_THRESHOLD));
        let mut c = vec![0.0; x.dim()];
        for &(i, l) in &r.support {
            for (ck, &p) in c.iter_mut().zip(x.point(i).point.coords()) {
                *ck += l * p;
            }
        }
        assert!(squared_distance(&c, r.center.coords()) <= 1e-18 * scale.max(1.0));
        for i in 0..x.len() {
            let d = squared_distance(r.center.coords(), x.point(i).point.coords()) - x.point(i).weight;
            if r.support.iter().any(|s| s.0 == i) {
                assert!((d - r.rad_sq).abs() <= tol * scale, "support {i}: {d} vs {}", r.rad_sq);
            } else {
                assert!(d <= r.rad_sq + tol * scale);
            }
        }
        assert!(r.residual <= tol * scale);
    }

    #[test]
    fn two_point_unweighted() {
        let x = cloud(&[(&[0.0, 0.0], 0.0), (&[4.0, 0.0], 0.0)]);
        let r = weighted_meb(&x, 1e-8, 1000).unwrap();
        assert!((r.rad_sq - 4.0).abs() < 1e-12);
        assert!((r.center.coords()[0] - 2.0).abs() < 1e-12);
        assert!(r.center.coords()[1].abs() < 1e-12);
        let e = weighted_meb_exact(&x).unwrap();
        assert!((e.rad_sq - 4.0).abs() < 1e-12);
        assert_eq!(two_point_rad_sq(x.point(0), x.point(1)), 4.0);
    }

    #[test]
    fn two_point_equal_weights() {
        let x = cloud(&[(&[0.0, 0.0], -3.0), (&[4.0, 0.0], -3.0)]);
        let r = weighted_meb(&x, 1e-8, 1000).unwrap();
        assert!((r.rad_sq - 7.0).abs() < 1e-12);
        assert!((r.center.coords()[0] - 2.0).abs() < 1e-12);
        assert_eq!(two_point_rad_sq(x.point(0), x.point(1)), 7.0);
    }

    #[test]
    fn dominating_power_gives_single_support() {
        let x = cloud(&[(&[0.0, 0.0], 0.0), (&[0.1, 0.0], -100.0)]);
        let r = weighted_meb(&x, 1e-8, 1000).unwrap();
        assert!((r.rad_sq - 100.0).abs() < 1e-9);
        assert!((r.center.coords()[0] - 0.1).abs() < 1e-12);
        assert_eq!(r.support.len(), 1);
        assert_eq!(r.support[0].0, 1);
        let e = weighted_meb_exact(&x).unwrap();
        assert_eq!(e.support.len(), 1);
        assert_eq!(two_point_rad_sq(x.point(0), x.point(1)), 100.0);
    }

    #[test]
    fn singleton() {
        let x = cloud(&[(&[1.0, 2.0], -5.0)]);
        for r in [weighted_meb(&x, 1e-8, 10).unwrap(), weighted_meb_exact(&x).unwrap()] {
            assert_eq!(r.rad_sq, 5.0);
            assert_eq!(r.center.coords(), &[1.0, 2.0]);
            assert_eq!(r.support, vec![(0, 1.0)]);
        }
    }

    #[test]
    fn coincident_points() {
        let x = cloud(&[(&[1.0, 1.0], 0.0), (&[1.0, 1.0], 0.0), (&[1.0, 1.0], 0.0)]);
        let r = weighted_meb(&x, 1e-8, 100).unwrap();
        assert_eq!(r.rad_sq, 0.0);
        assert_eq!(r.center.coords(), &[1.0, 1.0]);
        let x = cloud(&[(&[1.0, 1.0], -1.0), (&[1.0, 1.0], -4.0)]);
        let r = weighted_meb(&x, 1e-8, 100).unwrap();
        assert!((r.rad_sq - 4.0).abs() < 1e-12);
        assert_eq!(weighted_meb_exact(&x).unwrap().rad_sq, 4.0);
    }

    #[test]
    fn acute_triangle_circumcircle() {
        // closed-form circumcenter of (0,0), (4,0), (1,3)
        let (ax, ay, bx, by, cx, cy): (f64, f64, f64, f64, f64, f64) = (0.0, 0.0, 4.0, 0.0, 1.0, 3.0);
        let d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
        let ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / d;
        let uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / d;
        let r2 = (ux - ax).powi(2) + (uy - ay).powi(2);
        let x = cloud(&[(&[ax, ay], 0.0), (&[bx, by], 0.0), (&[cx, cy], 0.0)]);
        for r in [weighted_meb(&x, 1e-10, 1000).unwrap(), weighted_meb_exact(&x).unwrap()] {
            assert!((r.rad_sq - r2).abs() < 1e-10);
            assert!((r.center.coords()[0] - ux).abs() < 1e-8);
            assert!((r.center.coords()[1] - uy).abs() < 1e-8);
            assert_eq!(r.support.len(), 3);
        }
    }

    #[test]
    fn obtuse_triangle_uses_long_edge() {
        let x = cloud(&[(&[0.0, 0.0], 0.0), (&[4.0, 0.0], 0.0), (&[2.0, 0.5], 0.0)]);
        let r = weighted_meb(&x, 1e-10, 1000).unwrap();
        assert!((r.rad_sq - 4.0).abs() < 1e-10);
        assert_eq!(r.support.iter().map(|s| s.0).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn radius_from_support_examples() {
        let x = cloud(&[(&[1.0, 2.0], -5.0)]);
        assert_eq!(radius_from_support(&[1.0], &x).unwrap(), 5.0);
        let x = cloud(&[(&[0.0, 0.0], 0.0), (&[4.0, 0.0], 0.0)]);
        assert_eq!(radius_from_support(&[0.5, 0.5], &x).unwrap(), 4.0);
        assert!(radius_from_support(&[0.7, 0.7], &x).is_err());
        assert!(radius_from_support(&[1.2, -0.2], &x).is_err());
        assert!(radius_from_support(&[1.0], &x).is_err());
    }

    #[test]
    fn random_instances_agree_with_exact_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..300 {
            let m = rng.random_range(1..=8);
            let dim = rng.random_range(1..=6);
            let x = random_weighted(&mut rng, m, dim, -10.0);
            let it = weighted_meb(&x, 1e-8, 10_000).unwrap();
            check_invariants(&x, &it, 1e-8);
            let ex = weighted_meb_exact(&x).unwrap();
            let rel = (it.rad_sq - ex.rad_sq).abs() / ex.rad_sq.abs().max(1e-12);
            assert!(rel <= 1e-6, "iterative {} exact {}", it.rad_sq, ex.rad_sq);
            let dual = radius_from_support(&it.dense_lambdas(m), &x).unwrap();
            assert!((dual - it.rad_sq).abs() <= 1e-6 * it.rad_sq.abs().max(1e-12));
        }
    }

    // lattice points in a low-dimensional subspace: duplicates, cocircular
    // sets and supports larger than the affine hull allows
    #[test]
    fn degenerate_instances_agree_with_exact_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..600 {
            let intrinsic = rng.random_range(1..=3);
            let dim = rng.random_range(intrinsic..=6);
            let m = rng.random_range(2..=8);
            let basis: Vec<Vec<f64>> = (0..intrinsic)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let offset: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
            let pts = (0..m)
                .map(|_| {
                    let z: Vec<f64> = (0..intrinsic).map(|_| rng.random_range(-2..=2) as f64).collect();
                    let coords = (0..dim)
                        .map(|j| offset[j] + (0..intrinsic).map(|a| z[a] * basis[a][j]).sum::<f64>())
                        .collect();
                    let w = [0.0, -0.5, -1.0][rng.random_range(0..3)];
                    WeightedPoint::new(Point::new(coords).unwrap(), w).unwrap()
                })
                .collect();
            let x = WeightedCloud::raw(pts).unwrap();
            for init in [MebInit::FarthestFromCentroid, MebInit::Uniform] {
                let opts = MebOptions { tol: 1e-10, max_iter: 10_000, init };
                let it = weighted_meb_with(&x, &opts).unwrap();
                check_invariants(&x, &it, 1e-8);
                let ex = weighted_meb_exact(&x).unwrap();
                let rel = (it.rad_sq - ex.rad_sq).abs() / ex.rad_sq.abs().max(1e-12);
                assert!(rel <= 1e-8, "iterative {} exact {}", it.rad_sq, ex.rad_sq);
            }
        }
    }

    #[test]
    fn caratheodory_reduction_on_dependent_support() {
        // five cocircular points and a nearby sixth in R^3: the optimal support has
        // at most three points, but early iterates can hold more
        let mut rows = Vec::new();
        for i in 0..5 {
            let t = i as f64 * 1.3;
            rows.push((vec![t.cos(), t.sin(), 0.0], -0.25));
        }
        rows.push((vec![0.1, 0.0, 0.001], -0.9));
        let x = WeightedCloud::raw(
            rows.into_iter()
                .map(|(c, w)| WeightedPoint::new(Point::new(c).unwrap(), w).unwrap())
                .collect(),
        )
        .unwrap();
        let it = weighted_meb(&x, 1e-12, 10_000).unwrap();
        let ex = weighted_meb_exact(&x).unwrap();
        assert!((it.rad_sq - ex.rad_sq).abs() <= 1e-10);
    }

    #[test]
    fn null_vectors() {
        let mut a: Vec<f64> = vec![1.0, 2.0, 2.0, 4.0];
        let v = null_vector(&mut a, 2, 1e-12).unwrap();
        assert!((v[0] + 2.0 * v[1]).abs() < 1e-12 && v.iter().any(|x| *x != 0.0));
        let mut b: Vec<f64> = vec![1.0, 0.0, 0.0, 1.0];
        assert!(null_vector(&mut b, 2, 1e-12).is_none());
    }

    #[test]
    fn initializations_reach_the_same_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..100 {
            let m = rng.random_range(2..=10);
            let dim = rng.random_range(1..=5);
            let x = random_weighted(&mut rng, m, dim, -4.0);
            let a = weighted_meb_with(&x, &MebOptions { init: MebInit::Uniform, ..Default::default() }).unwrap();
            let b = weighted_meb_with(
                &x,
                &MebOptions { init: MebInit::Vertex(m - 1), ..Default::default() },
            )
            .unwrap();
            assert!(squared_distance(a.center.coords(), b.center.coords()).sqrt() <= 1e-5);
        }
    }

    #[test]
    fn adding_points_never_shrinks_the_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..100 {
            let dim = rng.random_range(1..=4);
            let x = random_weighted(&mut rng, 9, dim, -5.0);
            let mut last = f64::NEG_INFINITY;
            for m in 1..=9 {
                let idx: Vec<usize> = (0..m).collect();
                let r = weighted_meb(&x.select(&idx).unwrap(), 1e-10, 10_000).unwrap();
                assert!(r.rad_sq >= last - 1e-9 * last.abs().max(1.0));
                last = r.rad_sq;
            }
        }
    }

    #[test]
    fn translation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..50 {
            let dim = rng.random_range(1..=5);
            let x = random_weighted(&mut rng, 6, dim, -3.0);
            let offset: Vec<f64> = (0..dim).map(|_| rng.random_range(-50.0..50.0)).collect();
            let shifted = WeightedCloud::raw(
                x.points()
                    .iter()
                    .map(|p| WeightedPoint::new(p.point.translated(&offset), p.weight).unwrap())
                    .collect(),
            )
            .unwrap();
            let a = weighted_meb(&x, 1e-10, 10_000).unwrap();
            let b = weighted_meb(&shifted, 1e-10, 10_000).unwrap();
            assert!((a.rad_sq - b.rad_sq).abs() <= 1e-9 * a.rad_sq.abs().max(1.0));
            let moved = a.center.translated(&offset);
            assert!(squared_distance(moved.coords(), b.center.coords()).sqrt() <= 1e-7);
        }
    }

    #[test]
    fn positive_weights_can_give_imaginary_balls() {
        let x = cloud(&[(&[0.0], 5.0), (&[1.0], 5.0)]);
        let r = weighted_meb(&x, 1e-8, 100).unwrap();
        assert!((r.rad_sq - (0.25 - 5.0)).abs() < 1e-12);
        assert!(r.imaginary);
    }

    #[test]
    fn non_convergence_reports_best_iterate() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let x = random_weighted(&mut rng, 12, 5, -1.0);
        match weighted_meb_with(&x, &MebOptions { tol: 1e-300, max_iter: 1, init: MebInit::Uniform }) {
            Err(Error::NoConvergence { iterations, best_center, .. }) => {
                assert_eq!(iterations, 1);
                assert_eq!(best_center.len(), 5);
            }
            Ok(r) => assert!(r.residual == 0.0, "unexpected convergence {r:?}"),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn exact_oracle_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let x = random_weighted(&mut rng, 13, 2, -1.0);
        assert!(weighted_meb_exact(&x).is_err());
    }

    #[test]
    fn two_point_closed_form_matches_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for _ in 0..500 {
            let dim = rng.random_range(1..=6);
            let x = random_weighted(&mut rng, 2, dim, -20.0);
            let r = weighted_meb(&x, 1e-12, 10_000).unwrap();
            let cf = two_point_rad_sq(x.point(0), x.point(1));
            assert!((cf - r.rad_sq).abs() <= 1e-8 * cf.abs().max(1.0));
        }
    }

    #[test]
    fn f32_solver() {
        let x = WeightedCloud::raw(vec![
            WeightedPoint::new(Point::new(vec![0.0f32, 0.0]).unwrap(), -1.0).unwrap(),
            WeightedPoint::new(Point::new(vec![2.0f32, 0.0]).unwrap(), -1.0).unwrap(),
            WeightedPoint::new(Point::new(vec![1.0f32, 2.0]).unwrap(), 0.0).unwrap(),
        ])
        .unwrap();
        let r = weighted_meb(&x, 1e-5, 1000).unwrap();
        let e = weighted_meb_exact(&x).unwrap();
        assert!((r.rad_sq - e.rad_sq).abs() < 1e-4);
    }
}
