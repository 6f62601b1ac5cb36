//! Puncture-local polar data, the level decomposition of `End(E)`, and the
//! order-by-order normalization of an irregular polar part.
//!
//! A connection near a puncture is `d + A_n dz/z^n + ... + A_1 dz/z` with
//! diagonal `A_i`. The level of a matrix entry `(a, b)` is the largest `i`
//! whose coefficient distinguishes `a` from `b`; entries of level zero
//! commute with the whole polar part.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CMat, C64};
use crate::series::MatSeries;

/// Default relative eigenvalue-separation tolerance for normalization.
pub const DEFAULT_NORMALIZE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolarError {
    #[error("invalid polar data: {0}")]
    Invalid(String),
    #[error("leading coefficient is not diagonalizable within tolerance (cluster at {eigenvalue} has geometric multiplicity {geometric} < {algebraic})")]
    NonSemisimpleLeading { eigenvalue: C64, algebraic: usize, geometric: usize },
    #[error("truncation order {truncation} is below the pole order {order}")]
    TruncationTooShort { truncation: usize, order: usize },
}

/// A diagonal matrix stored by its diagonal entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiagonalMatrix(pub Vec<C64>);

impl DiagonalMatrix {
    pub fn new(entries: Vec<C64>) -> Self {
        Self(entries)
    }

    pub fn from_real(entries: &[f64]) -> Self {
        Self(entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zeros(rank: usize) -> Self {
        Self(vec![C64::new(0.0, 0.0); rank])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[C64] {
        &self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.iter().sum()
    }

    pub fn to_matrix(&self) -> CMat {
        linalg::diag(&self.0)
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|z| z * factor).collect())
    }

    /// Distinct entries (exact comparison).
    pub fn is_regular(&self) -> bool {
        let e = &self.0;
        (0..e.len()).all(|i| (i + 1..e.len()).all(|j| e[i] != e[j]))
    }
}

/// Connection-side local data at one puncture: `d + sum_i A_i dz/z^i`
/// with parabolic weights `beta`.
///
/// JSON: `{"rank", "order", "coeffs": [A_1, ..., A_n], "weights": [...]}`
/// where each `A_i` is a list of `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PuncturePolarData {
    pub rank: usize,
    pub order: usize,
    /// `coeffs[i - 1]` is `A_i`.
    pub coeffs: Vec<DiagonalMatrix>,
    pub weights: Vec<f64>,
}

impl PuncturePolarData {
    pub fn new(coeffs: Vec<DiagonalMatrix>, weights: Vec<f64>) -> Result<Self, PolarError> {
        let rank = weights.len();
        let data = Self { rank, order: coeffs.len(), coeffs, weights };
        data.validate()?;
        Ok(data)
    }

    /// Zero polar part of order one.
    pub fn zero(rank: usize) -> Self {
        Self {
            rank,
            order: 1,
            coeffs: vec![DiagonalMatrix::zeros(rank)],
            weights: vec![0.0; rank],
        }
    }

    pub fn validate(&self) -> Result<(), PolarError> {
        if self.rank == 0 {
            return Err(PolarError::Invalid("rank must be positive".into()));
        }
        if self.order == 0 {
            return Err(PolarError::Invalid("order must be positive".into()));
        }
        if self.coeffs.len() != self.order {
            return Err(PolarError::Invalid(format!(
                "expected {} coefficient matrices, found {}",
                self.order,
                self.coeffs.len()
            )));
        }
        if let Some((i, m)) = self.coeffs.iter().enumerate().find(|(_, m)| m.len() != self.rank) {
            return Err(PolarError::Invalid(format!(
                "A_{} has {} entries, rank is {}",
                i + 1,
                m.len(),
                self.rank
            )));
        }
        if self.weights.len() != self.rank {
            return Err(PolarError::Invalid(format!(
                "expected {} weights, found {}",
                self.rank,
                self.weights.len()
            )));
        }
        if let Some(b) = self.weights.iter().find(|b| !(0.0..1.0).contains(*b)) {
            return Err(PolarError::Invalid(format!("weight {b} outside [0, 1)")));
        }
        if self.coeffs.iter().flat_map(|m| m.entries()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(PolarError::Invalid("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// `A_i` for `1 <= i <= order`.
    pub fn coeff(&self, i: usize) -> &DiagonalMatrix {
        &self.coeffs[i - 1]
    }

    /// Residue eigenvalues `mu` (the diagonal of `A_1`).
    pub fn residue(&self) -> &[C64] {
        self.coeffs[0].entries()
    }

    pub fn leading(&self) -> &DiagonalMatrix {
        &self.coeffs[self.order - 1]
    }

    /// Apply the same permutation to every coefficient and to the weights:
    /// new index `i` carries old index `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let pick = |v: &[C64]| perm.iter().map(|&p| v[p]).collect::<Vec<_>>();
        Self {
            rank: self.rank,
            order: self.order,
            coeffs: self.coeffs.iter().map(|m| DiagonalMatrix(pick(m.entries()))).collect(),
            weights: perm.iter().map(|&p| self.weights[p]).collect(),
        }
    }
}

/// Entrywise level map of `End(E)` plus the per-level spectral gaps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelDecomposition {
    pub level: Vec<Vec<usize>>,
    /// Level `k >= 1` mapped to the smallest `|(A_k)_aa - (A_k)_bb|` over its entries.
    pub min_gap: BTreeMap<usize, f64>,
}

impl LevelDecomposition {
    pub fn rank(&self) -> usize {
        self.level.len()
    }

    pub fn at(&self, a: usize, b: usize) -> usize {
        self.level[a][b]
    }

    pub fn max_level(&self) -> usize {
        self.level.iter().flatten().copied().max().unwrap_or(0)
    }

    /// Level-0 only decomposition (every entry commutes with the polar part).
    pub fn trivial(rank: usize) -> Self {
        Self { level: vec![vec![0; rank]; rank], min_gap: BTreeMap::new() }
    }
}

pub fn end_levels(data: &PuncturePolarData) -> LevelDecomposition {
    let r = data.rank;
    let mut level = vec![vec![0usize; r]; r];
    let mut min_gap: BTreeMap<usize, f64> = BTreeMap::new();
    for a in 0..r {
        for b in 0..r {
            if a == b {
                continue;
            }
            let found = (1..=data.order).rev().find(|&i| {
                let m = data.coeff(i).entries();
                m[a] != m[b]
            });
            if let Some(k) = found {
                level[a][b] = k;
                let m = data.coeff(k).entries();
                let gap = (m[a] - m[b]).norm();
                min_gap.entry(k).and_modify(|g| *g = g.min(gap)).or_insert(gap);
            }
        }
    }
    LevelDecomposition { level, min_gap }
}

/// Formal connection `d + sum_{j=-n}^{N} C_j z^j dz` with full matrix coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct FormalConnection {
    pub rank: usize,
    pub order: usize,
    /// `coeffs[j + n]` is `C_j`, for `j = -n ..= truncation`.
    pub coeffs: Vec<CMat>,
}

impl FormalConnection {
    pub fn new(order: usize, coeffs: Vec<CMat>) -> Result<Self, PolarError> {
        let rank = coeffs.first().map(|m| m.nrows()).unwrap_or(0);
        let conn = Self { rank, order, coeffs };
        conn.validate()?;
        Ok(conn)
    }

    pub fn validate(&self) -> Result<(), PolarError> {
        if self.order == 0 || self.rank == 0 {
            return Err(PolarError::Invalid("rank and order must be positive".into()));
        }
        if self.coeffs.len() < self.order + 1 {
            return Err(PolarError::Invalid(format!(
                "need coefficients C_-{}..C_0 at least, found {}",
                self.order,
                self.coeffs.len()
            )));
        }
        if self.coeffs.iter().any(|m| m.nrows() != self.rank || m.ncols() != self.rank) {
            return Err(PolarError::Invalid("coefficient shapes disagree with rank".into()));
        }
        Ok(())
    }

    /// Top power `N` of the truncated series.
    pub fn truncation(&self) -> usize {
        self.coeffs.len() - self.order - 1
    }

    /// `C_j` for `-n <= j <= N`.
    pub fn coeff(&self, j: i32) -> &CMat {
        &self.coeffs[(j + self.order as i32) as usize]
    }

    pub fn to_series(&self) -> MatSeries {
        MatSeries { low: -(self.order as i32), coeffs: self.coeffs.clone(), dim: self.rank }
    }

    pub fn from_series(order: usize, s: &MatSeries) -> Self {
        let low = -(order as i32);
        let coeffs = (low..=s.top())
            .map(|p| s.coeff(p).cloned().unwrap_or_else(|| CMat::zeros(s.dim, s.dim)))
            .collect();
        Self { rank: s.dim, order, coeffs }
    }

    /// Diagonal polar data from a connection whose polar part is diagonal.
    pub fn from_polar_data(data: &PuncturePolarData, truncation: usize) -> Self {
        let n = data.order;
        let mut coeffs = vec![CMat::zeros(data.rank, data.rank); n + truncation + 1];
        for i in 1..=n {
            coeffs[n - i] = data.coeff(i).to_matrix();
        }
        Self { rank: data.rank, order: n, coeffs }
    }
}

/// Holomorphic gauge `u(z) = u_0 + u_1 z + ... + u_N z^N`.
#[derive(Clone, Debug, PartialEq)]
pub struct FormalGauge {
    pub coeffs: Vec<CMat>,
    pub fix_origin: bool,
}

impl FormalGauge {
    pub fn truncation(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn to_series(&self) -> MatSeries {
        let dim = self.coeffs[0].nrows();
        MatSeries { low: 0, coeffs: self.coeffs.clone(), dim }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }
}

/// Result of [`normalize_polar`]: the normal form is `e^u` applied to the
/// connection written in the eigenbasis `basis` of the leading term.
#[derive(Clone, Debug)]
pub struct Normalization {
    pub basis: CMat,
    pub gauge: FormalGauge,
    pub normal_form: FormalConnection,
    /// Cluster label of each diagonal slot of the leading term.
    pub clusters: Vec<usize>,
    /// Largest off-kernel entry left in the polar coefficients.
    pub residual: f64,
    /// Distance of `basis^{-1} C_{-n} basis` from the snapped diagonal.
    pub diagonalization_error: f64,
}

impl Normalization {
    /// The diagonal polar data, when every polar coefficient of the normal
    /// form is diagonal to `tol`.
    pub fn polar_data(&self, weights: Vec<f64>, tol: f64) -> Option<PuncturePolarData> {
        let n = self.normal_form.order;
        let r = self.normal_form.rank;
        let mut coeffs = Vec::with_capacity(n);
        for i in 1..=n {
            let m = self.normal_form.coeff(-(i as i32));
            let off = (0..r)
                .flat_map(|a| (0..r).map(move |b| (a, b)))
                .filter(|(a, b)| a != b)
                .fold(0.0_f64, |acc, (a, b)| acc.max(m[(a, b)].norm()));
            if off > tol {
                return None;
            }
            coeffs.push(DiagonalMatrix(linalg::diagonal_of(m)));
        }
        PuncturePolarData::new(coeffs, weights).ok()
    }
}

struct Eigenbasis {
    basis: CMat,
    diagonal: Vec<C64>,
    clusters: Vec<usize>,
}

/// Diagonalize `m`, grouping eigenvalues closer than `tol * scale` into
/// clusters; fails if some cluster lacks a full eigenspace.
fn diagonalize(m: &CMat, tol: f64) -> Result<Eigenbasis, PolarError> {
    let r = m.nrows();
    let scale = linalg::max_abs(m).max(1.0);
    let sep = tol * scale;
    let mut eig: Vec<(usize, C64)> = linalg::eigenvalues(m).into_iter().enumerate().collect();
    eig.sort_by(|(i, a), (j, b)| {
        a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)).then(i.cmp(j))
    });

    // Single-linkage clustering of eigenvalues within `sep`.
    let mut parent: Vec<usize> = (0..r).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut i = i;
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..r {
        for j in i + 1..r {
            if (eig[i].1 - eig[j].1).norm() <= sep {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..r {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }

    let mut basis = CMat::zeros(r, r);
    let mut diagonal = Vec::with_capacity(r);
    let mut clusters = Vec::with_capacity(r);
    let mut col = 0;
    // Groups are keyed by their first member in sorted order, so iteration
    // follows the lexicographic eigenvalue order.
    for (label, (_, members)) in groups.iter().enumerate() {
        let mean: C64 = members.iter().map(|&i| eig[i].1).sum::<C64>() / members.len() as f64;
        let shifted = m - CMat::identity(r, r) * mean;
        let ns = linalg::null_space(&shifted, (10.0 * tol).max(1e-13));
        if ns.ncols() < members.len() {
            return Err(PolarError::NonSemisimpleLeading {
                eigenvalue: mean,
                algebraic: members.len(),
                geometric: ns.ncols(),
            });
        }
        let vecs = canonical_basis(&ns, members.len());
        for k in 0..members.len() {
            basis.set_column(col, &vecs.column(k));
            diagonal.push(mean);
            clusters.push(label);
            col += 1;
        }
    }
    Ok(Eigenbasis { basis, diagonal, clusters })
}

/// Deterministic basis of the column span of `q`: pick pivot rows greedily
/// by modulus, reduce to echelon form on those rows, then orthonormalize in
/// pivot order and fix phases so each pivot entry is real positive.
fn canonical_basis(q: &CMat, want: usize) -> CMat {
    let n = q.nrows();
    let mut work = q.columns(0, want.min(q.ncols())).into_owned();
    let k = work.ncols();
    let mut pivots = Vec::with_capacity(k);
    for c in 0..k {
        let (row, _) = (0..n)
            .filter(|r| !pivots.contains(r))
            .map(|r| (r, work[(r, c)].norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("nonempty row set");
        let p = work[(row, c)];
        for i in 0..n {
            work[(i, c)] /= p;
        }
        for other in 0..k {
            if other != c {
                let f = work[(row, other)];
                for i in 0..n {
                    let v = work[(i, c)];
                    work[(i, other)] -= f * v;
                }
            }
        }
        pivots.push(row);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&c| pivots[c]);
    let mut out = CMat::zeros(n, k);
    for (slot, &c) in order.iter().enumerate() {
        let mut v = work.column(c).into_owned();
        for prev in 0..slot {
            let u = out.column(prev).into_owned();
            let proj = u.dotc(&v);
            v -= u * proj;
        }
        let norm = v.norm();
        v /= C64::new(norm, 0.0);
        let piv = v[pivots[c]];
        if piv.norm() > 0.0 {
            v *= piv.conj() / piv.norm();
        }
        out.set_column(slot, &v);
    }
    out
}

/// Bring the polar part of `conn` to a form whose coefficients all commute
/// with the diagonalized leading term.
///
/// After a constant change of basis diagonalizing `C_{-n}`, the step at
/// order `k = 1..n-1` applies `exp(u_k z^k)` with `[u_k, A_n]` cancelling the
/// off-kernel part of the coefficient of `z^{k-n}`; lower orders are left
/// untouched by later steps. The accumulated gauge is returned as a single
/// logarithm `u` with `u(0) = 0`.
pub fn normalize_polar(conn: &FormalConnection, tol: f64) -> Result<Normalization, PolarError> {
    conn.validate()?;
    let n = conn.order;
    let truncation = conn.truncation();
    if truncation < n {
        return Err(PolarError::TruncationTooShort { truncation, order: n });
    }
    let r = conn.rank;
    let top = truncation as i32;
    let lead = conn.coeff(-(n as i32));
    let eb = diagonalize(lead, tol)?;
    let basis_inv = linalg::inverse(&eb.basis).ok_or_else(|| {
        PolarError::NonSemisimpleLeading { eigenvalue: C64::new(0.0, 0.0), algebraic: r, geometric: 0 }
    })?;

    let mut current = conn.to_series();
    for m in current.coeffs.iter_mut() {
        *m = &basis_inv * &*m * &eb.basis;
    }
    let snapped = linalg::diag(&eb.diagonal);
    let diagonalization_error = linalg::max_abs(&(current.coeff(-(n as i32)).unwrap() - &snapped));
    *current.coeff_mut(-(n as i32)) = snapped;

    let mut total = MatSeries::identity(r, top);
    for k in 1..n {
        let target = current.coeff(k as i32 - n as i32).unwrap();
        let mut u = CMat::zeros(r, r);
        for a in 0..r {
            for b in 0..r {
                if eb.clusters[a] != eb.clusters[b] {
                    u[(a, b)] = target[(a, b)] / (eb.diagonal[a] - eb.diagonal[b]);
                }
            }
        }
        if linalg::max_abs(&u) == 0.0 {
            continue;
        }
        let step = MatSeries::monomial(u, k as i32, top);
        let g = step.exp();
        let g_inv = step.scale(C64::new(-1.0, 0.0)).exp();
        current = current.gauge_connection(&g, &g_inv);
        total = g.mul(&total);
    }
    let log = total.log();
    let mut gauge_coeffs: Vec<CMat> = (0..=top)
        .map(|p| log.coeff(p).cloned().unwrap_or_else(|| CMat::zeros(r, r)))
        .collect();
    gauge_coeffs[0] = CMat::zeros(r, r);

    let normal_form = FormalConnection::from_series(n, &current);
    let residual = (1..=n)
        .map(|i| off_kernel_max(normal_form.coeff(-(i as i32)), &eb.clusters))
        .fold(0.0, f64::max);
    Ok(Normalization {
        basis: eb.basis,
        gauge: FormalGauge { coeffs: gauge_coeffs, fix_origin: true },
        normal_form,
        clusters: eb.clusters,
        residual,
        diagonalization_error,
    })
}

fn off_kernel_max(m: &CMat, clusters: &[usize]) -> f64 {
    let r = m.nrows();
    let mut worst = 0.0_f64;
    for a in 0..r {
        for b in 0..r {
            if clusters[a] != clusters[b] {
                worst = worst.max(m[(a, b)].norm());
            }
        }
    }
    worst
}
