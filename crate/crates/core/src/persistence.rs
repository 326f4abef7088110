//! Persistent homology over Z/2, bottleneck distances and multiplicative
//! interleaving certificates.

use std::fmt;

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtration::FilteredComplex;
use crate::scalar::Scalar;

/// Largest complex accepted by [`betti_oracle`].
pub const ORACLE_CAP: usize = 2000;

/// Slack added to `ln β` when deciding whether a certificate passes.
pub const CERTIFICATE_SLACK: f64 = 1e-12;

/// A birth/death pair; `death == None` is an essential (infinite) class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistencePair<T> {
    pub birth: T,
    pub death: Option<T>,
}

impl<T: Scalar> PersistencePair<T> {
    pub fn finite(birth: T, death: T) -> Self {
        Self {
            birth,
            death: Some(death),
        }
    }

    pub fn essential(birth: T) -> Self {
        Self { birth, death: None }
    }

    pub fn is_essential(&self) -> bool {
        self.death.is_none()
    }

    /// Alive on the sublevel complex at `alpha`: `birth ≤ α < death`.
    pub fn alive_at(&self, alpha: T) -> bool {
        self.birth <= alpha && self.death.is_none_or(|d| alpha < d)
    }
}

// Serialized as `[birth, death]` with the string "inf" for essential classes.
impl<T: Scalar> Serialize for PersistencePair<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&self.birth.as_f64())?;
        match self.death {
            Some(d) => t.serialize_element(&d.as_f64())?,
            None => t.serialize_element("inf")?,
        }
        t.end()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DeathRepr {
    Num(f64),
    Str(String),
}

impl<'de, T: Scalar> Deserialize<'de> for PersistencePair<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct PairVisitor<T>(std::marker::PhantomData<T>);
        impl<'de, T: Scalar> Visitor<'de> for PairVisitor<T> {
            type Value = PersistencePair<T>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a [birth, death] pair")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Self::Value, A::Error> {
                let birth: f64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let death: DeathRepr = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
                let death = match death {
                    DeathRepr::Num(v) => Some(T::lit(v)),
                    DeathRepr::Str(s) if s == "inf" => None,
                    DeathRepr::Str(s) => return Err(de::Error::custom(format!("unexpected death '{s}'"))),
                };
                Ok(PersistencePair {
                    birth: T::lit(birth),
                    death,
                })
            }
        }
        d.deserialize_tuple(2, PairVisitor(std::marker::PhantomData))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram<T: Scalar> {
    pub dimension: usize,
    /// Sorted by birth, then death (essential classes last among equal births).
    pub pairs: Vec<PersistencePair<T>>,
    /// Pairs with `birth == death`, dropped from `pairs`.
    #[serde(default)]
    pub zero_length: usize,
}

impl<T: Scalar> PersistenceDiagram<T> {
    pub fn new(dimension: usize, mut pairs: Vec<PersistencePair<T>>) -> Self {
        sort_pairs(&mut pairs);
        Self {
            dimension,
            pairs,
            zero_length: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn essential_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.is_essential()).count()
    }

    pub fn alive_at(&self, alpha: T) -> usize {
        self.pairs.iter().filter(|p| p.alive_at(alpha)).count()
    }

    /// Applies `f` to every coordinate (deaths at infinity stay infinite).
    pub fn map_values(&self, f: impl Fn(T) -> T) -> Self {
        let pairs = self
            .pairs
            .iter()
            .map(|p| PersistencePair {
                birth: f(p.birth),
                death: p.death.map(&f),
            })
            .collect();
        let mut out = Self::new(self.dimension, pairs);
        out.zero_length = self.zero_length;
        out
    }
}

fn sort_pairs<T: Scalar>(pairs: &mut [PersistencePair<T>]) {
    pairs.sort_by(|a, b| {
        a.birth
            .partial_cmp(&b.birth)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| match (a.death, b.death) {
                (Some(x), Some(y)) => x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal),
                (Some(_), None) => std::cmp::Ordering::Less,
                (None, Some(_)) => std::cmp::Ordering::Greater,
                (None, None) => std::cmp::Ordering::Equal,
            })
    });
}

/// Symmetric difference of two sorted index lists (addition over Z/2).
fn add_columns(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Standard column reduction of the boundary matrix, in filtration order.
/// Returns one diagram per degree `0..=max_degree`.
pub fn compute_persistence<T: Scalar>(
    complex: &FilteredComplex<T>,
    max_degree: usize,
) -> Result<Vec<PersistenceDiagram<T>>> {
    complex.validate()?;
    let simplices = &complex.simplices;
    let n = simplices.len();
    let index = complex.index();

    let mut reduced: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut owner_of_low: Vec<Option<usize>> = vec![None; n];
    let mut paired = vec![false; n];
    let mut finite: Vec<Vec<PersistencePair<T>>> = vec![Vec::new(); max_degree + 1];
    let mut zero_length = vec![0usize; max_degree + 1];

    for j in 0..n {
        let s = &simplices[j];
        if s.dim() == 0 || s.dim() > max_degree + 1 {
            continue;
        }
        let mut col: Vec<usize> = s.facets().map(|f| index[f.as_slice()]).collect();
        col.sort_unstable();
        while let Some(&low) = col.last() {
            match owner_of_low[low] {
                Some(other) => col = add_columns(&col, &reduced[other]),
                None => break,
            }
        }
        if let Some(&low) = col.last() {
            owner_of_low[low] = Some(j);
            paired[low] = true;
            paired[j] = true;
            let degree = simplices[low].dim();
            if degree <= max_degree {
                let (birth, death) = (simplices[low].value, s.value);
                if birth == death {
                    zero_length[degree] += 1;
                } else {
                    finite[degree].push(PersistencePair::finite(birth, death));
                }
            }
        }
        reduced[j] = col;
    }

    let mut diagrams: Vec<PersistenceDiagram<T>> = finite
        .into_iter()
        .enumerate()
        .map(|(dim, pairs)| PersistenceDiagram::new(dim, pairs))
        .collect();
    for (i, s) in simplices.iter().enumerate() {
        if !paired[i] && s.dim() <= max_degree {
            diagrams[s.dim()].pairs.push(PersistencePair::essential(s.value));
        }
    }
    for (d, z) in diagrams.iter_mut().zip(zero_length) {
        sort_pairs(&mut d.pairs);
        d.zero_length = z;
    }
    Ok(diagrams)
}

/// Rank over Z/2 of a dense matrix stored as bit rows.
fn rank_z2(mut rows: Vec<Vec<u64>>) -> usize {
    let words = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..words * 64 {
        let (w, bit) = (col / 64, 1u64 << (col % 64));
        let Some(p) = (rank..rows.len()).find(|&r| rows[r][w] & bit != 0) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[w] & bit != 0 {
                for (x, y) in row.iter_mut().zip(&pivot) {
                    *x ^= y;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Betti number of the subcomplex `{σ : value(σ) ≤ alpha}` in `degree`, by
/// dense rank computations on the boundary matrices.
pub fn betti_oracle<T: Scalar>(complex: &FilteredComplex<T>, alpha: T, degree: usize) -> Result<usize> {
    if complex.len() > ORACLE_CAP {
        return Err(Error::contract(format!(
            "betti oracle limited to {ORACLE_CAP} simplices, complex has {}",
            complex.len()
        )));
    }
    let by_dim = |p: usize| -> Vec<&[usize]> {
        complex
            .simplices
            .iter()
            .filter(|s| s.dim() == p && s.value <= alpha)
            .map(|s| s.vertices.as_slice())
            .collect()
    };
    let boundary_rank = |p: usize| -> usize {
        if p == 0 {
            return 0;
        }
        let rows = by_dim(p - 1);
        let cols = by_dim(p);
        if rows.is_empty() || cols.is_empty() {
            return 0;
        }
        let row_of: std::collections::HashMap<&[usize], usize> =
            rows.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let words = cols.len().div_ceil(64);
        let mut matrix = vec![vec![0u64; words]; rows.len()];
        for (c, verts) in cols.iter().enumerate() {
            for skip in 0..verts.len() {
                let face: Vec<usize> = verts
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &v)| v)
                    .collect();
                if let Some(&r) = row_of.get(face.as_slice()) {
                    matrix[r][c / 64] |= 1 << (c % 64);
                }
            }
        }
        rank_z2(matrix)
    };
    let chains = by_dim(degree).len();
    Ok(chains - boundary_rank(degree) - boundary_rank(degree + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    /// Coordinates mapped through `ln` before comparison.
    Log,
}

/// A diagram coordinate after scaling; births at zero map to −∞ in log scale.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Coord {
    NegInf,
    Finite(f64),
    PosInf,
}

impl Coord {
    fn gap(self, other: Coord) -> f64 {
        match (self, other) {
            (Coord::Finite(a), Coord::Finite(b)) => (a - b).abs(),
            (Coord::NegInf, Coord::NegInf) | (Coord::PosInf, Coord::PosInf) => 0.0,
            _ => f64::INFINITY,
        }
    }
}

fn scaled(v: f64, scale: Scale) -> Coord {
    match scale {
        Scale::Linear => Coord::Finite(v),
        Scale::Log if v > 0.0 => Coord::Finite(v.ln()),
        Scale::Log => Coord::NegInf,
    }
}

fn to_coords<T: Scalar>(d: &PersistenceDiagram<T>, scale: Scale) -> Vec<(Coord, Coord)> {
    d.pairs
        .iter()
        .map(|p| {
            (
                scaled(p.birth.as_f64(), scale),
                p.death.map_or(Coord::PosInf, |x| scaled(x.as_f64(), scale)),
            )
        })
        .collect()
}

fn pair_cost(a: (Coord, Coord), b: (Coord, Coord)) -> f64 {
    a.0.gap(b.0).max(a.1.gap(b.1))
}

fn diagonal_cost(a: (Coord, Coord)) -> f64 {
    match a {
        (Coord::Finite(b), Coord::Finite(d)) => (d - b).abs() / 2.0,
        _ => f64::INFINITY,
    }
}

/// One edge of a bottleneck matching; `None` stands for the diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub a: Option<usize>,
    pub b: Option<usize>,
    #[serde(with = "crate::persistence::inf_as_string")]
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BottleneckMatching {
    #[serde(with = "crate::persistence::inf_as_string")]
    pub distance: f64,
    /// Optimal matching; empty when the distance is infinite.
    pub pairs: Vec<MatchedPair>,
}

/// Kuhn's augmenting-path matching; `adj[l]` lists right vertices.
fn perfect_matching(adj: &[Vec<usize>], n_right: usize) -> Option<Vec<usize>> {
    fn augment(l: usize, adj: &[Vec<usize>], seen: &mut [bool], match_r: &mut [Option<usize>]) -> bool {
        for &r in &adj[l] {
            if !seen[r] {
                seen[r] = true;
                if match_r[r].is_none_or(|l2| augment(l2, adj, seen, match_r)) {
                    match_r[r] = Some(l);
                    return true;
                }
            }
        }
        false
    }
    let mut match_r: Vec<Option<usize>> = vec![None; n_right];
    let mut seen = vec![false; n_right];
    for l in 0..adj.len() {
        seen.iter_mut().for_each(|s| *s = false);
        if !augment(l, adj, &mut seen, &mut match_r) {
            return None;
        }
    }
    let mut match_l = vec![0; adj.len()];
    for (r, l) in match_r.iter().enumerate() {
        if let Some(l) = l {
            match_l[*l] = r;
        }
    }
    Some(match_l)
}

/// Exact bottleneck distance with its optimal matching.
pub fn bottleneck_matching<T: Scalar>(
    a: &PersistenceDiagram<T>,
    b: &PersistenceDiagram<T>,
    scale: Scale,
) -> Result<BottleneckMatching> {
    if a.dimension != b.dimension {
        return Err(Error::contract(format!(
            "cannot compare degree {} with degree {}",
            a.dimension, b.dimension
        )));
    }
    let ca = to_coords(a, scale);
    let cb = to_coords(b, scale);
    let (n, m) = (ca.len(), cb.len());
    let cross: Vec<Vec<f64>> = ca.iter().map(|&x| cb.iter().map(|&y| pair_cost(x, y)).collect()).collect();
    let diag_a: Vec<f64> = ca.iter().map(|&x| diagonal_cost(x)).collect();
    let diag_b: Vec<f64> = cb.iter().map(|&y| diagonal_cost(y)).collect();

    // left: a_0..a_n, then diagonal slots for b; right: b_0..b_m, then diagonal slots for a
    let graph = |t: f64| -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); n + m];
        for i in 0..n {
            adj[i].extend((0..m).filter(|&j| cross[i][j] <= t));
            if diag_a[i] <= t {
                adj[i].push(m + i);
            }
        }
        for j in 0..m {
            if diag_b[j] <= t {
                adj[n + j].push(j);
            }
            adj[n + j].extend(m..m + n);
        }
        adj
    };

    let mut candidates: Vec<f64> = cross
        .iter()
        .flatten()
        .chain(&diag_a)
        .chain(&diag_b)
        .copied()
        .filter(|c| c.is_finite())
        .collect();
    candidates.push(0.0);
    candidates.sort_by(|x, y| x.partial_cmp(y).expect("finite costs"));
    candidates.dedup();

    let top = *candidates.last().expect("non-empty");
    if perfect_matching(&graph(top), n + m).is_none() {
        return Ok(BottleneckMatching {
            distance: f64::INFINITY,
            pairs: Vec::new(),
        });
    }
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if perfect_matching(&graph(candidates[mid]), n + m).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let t = candidates[lo];
    let matching = perfect_matching(&graph(t), n + m).expect("feasible at threshold");
    let mut pairs = Vec::new();
    for (l, &r) in matching.iter().enumerate() {
        match (l < n, r < m) {
            (true, true) => pairs.push(MatchedPair {
                a: Some(l),
                b: Some(r),
                cost: cross[l][r],
            }),
            (true, false) => pairs.push(MatchedPair {
                a: Some(l),
                b: None,
                cost: diag_a[l],
            }),
            (false, true) => pairs.push(MatchedPair {
                a: None,
                b: Some(r),
                cost: diag_b[r],
            }),
            (false, false) => {}
        }
    }
    Ok(BottleneckMatching { distance: t, pairs })
}

/// Exact bottleneck distance; `f64::INFINITY` when no finite matching exists.
pub fn bottleneck<T: Scalar>(a: &PersistenceDiagram<T>, b: &PersistenceDiagram<T>, scale: Scale) -> Result<f64> {
    Ok(bottleneck_matching(a, b, scale)?.distance)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeComparison {
    pub degree: usize,
    #[serde(with = "crate::persistence::inf_as_string")]
    pub log_bottleneck: f64,
    pub matching: Vec<MatchedPair>,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterleavingCertificate {
    pub epsilon: f64,
    /// `(1 − ε)^{−1/2}`.
    pub beta: f64,
    /// `ln β`.
    pub threshold: f64,
    /// Largest log-scale bottleneck distance over all degrees.
    #[serde(with = "crate::persistence::inf_as_string")]
    pub log_bottleneck: f64,
    pub passes: bool,
    pub degrees: Vec<DegreeComparison>,
    pub diagnostic: Option<String>,
}

/// Explains why two diagrams are at infinite log-bottleneck distance.
fn infinite_reason<T: Scalar>(a: &PersistenceDiagram<T>, b: &PersistenceDiagram<T>) -> String {
    let zero = T::zero();
    let count = |d: &PersistenceDiagram<T>, essential: bool| {
        (
            d.pairs.iter().filter(|p| p.is_essential() == essential && p.birth == zero).count(),
            d.pairs.iter().filter(|p| p.is_essential() == essential).count(),
        )
    };
    let (az, ae) = count(a, true);
    let (bz, be) = count(b, true);
    let (afz, _) = count(a, false);
    let (bfz, _) = count(b, false);
    if ae != be {
        format!(
            "degree {}: {ae} essential classes before, {be} after",
            a.dimension
        )
    } else if az != bz || afz != bfz {
        format!(
            "degree {}: zero-birth points cannot be matched multiplicatively \
             (before: {az} essential + {afz} finite, after: {bz} essential + {bfz} finite)",
            a.dimension
        )
    } else {
        format!("degree {}: no finite matching", a.dimension)
    }
}

/// Checks that diagrams are within log-scale bottleneck distance `ln β`,
/// `β = (1 − ε)^{−1/2}`, in every degree.
pub fn certify_interleaving<T: Scalar>(
    a: &[PersistenceDiagram<T>],
    b: &[PersistenceDiagram<T>],
    epsilon: f64,
) -> Result<InterleavingCertificate> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::contract("epsilon must lie in (0, 1)"));
    }
    if a.len() != b.len() {
        return Err(Error::contract(format!(
            "diagram lists differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let beta = (1.0 - epsilon).powf(-0.5);
    let threshold = -0.5 * (1.0 - epsilon).ln();
    let mut degrees = Vec::with_capacity(a.len());
    for (da, db) in a.iter().zip(b) {
        let m = bottleneck_matching(da, db, Scale::Log)?;
        let diagnostic = (!m.distance.is_finite()).then(|| infinite_reason(da, db));
        degrees.push(DegreeComparison {
            degree: da.dimension,
            log_bottleneck: m.distance,
            matching: m.pairs,
            diagnostic,
        });
    }
    let log_bottleneck = degrees.iter().map(|d| d.log_bottleneck).fold(0.0, f64::max);
    let passes = log_bottleneck <= threshold + CERTIFICATE_SLACK;
    let diagnostic = {
        let msgs: Vec<&str> = degrees.iter().filter_map(|d| d.diagnostic.as_deref()).collect();
        (!msgs.is_empty()).then(|| msgs.join("; "))
    };
    Ok(InterleavingCertificate {
        epsilon,
        beta,
        threshold,
        log_bottleneck,
        passes,
        degrees,
        diagnostic,
    })
}

/// Serde adapter writing non-finite values as the string "inf".
pub(crate) mod inf_as_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str("inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("unexpected value '{s}'"))),
        }
    }
}
