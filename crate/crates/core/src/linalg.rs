//! Small dense complex linear algebra helpers shared by the modules.
//!
//! Everything here works on `nalgebra::DMatrix<Complex64>`; ranks in this
//! crate are small (the largest systems are the r(r-1) orbit unknowns), so
//! the helpers favour clarity over blocking.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn diag(entries: &[C64]) -> CMat {
    let n = entries.len();
    let mut m = CMat::zeros(n, n);
    for (i, e) in entries.iter().enumerate() {
        m[(i, i)] = *e;
    }
    m
}

pub fn diagonal_of(m: &CMat) -> Vec<C64> {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).collect()
}

/// Max-modulus entry (the l-infinity norm on entries).
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().try_inverse()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Eigenvalues of a general complex square matrix via the complex Schur form.
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    let schur = m.clone().schur();
    let (_, t) = schur.unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Orthonormal basis (as columns) of the numerical null space of `m`,
/// using singular values below `tol * max(1, sigma_max)`.
pub fn null_space(m: &CMat, tol: f64) -> CMat {
    let n = m.ncols();
    // Pad to square so the SVD exposes all right singular vectors.
    let rows = m.nrows().max(n);
    let mut padded = CMat::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = tol * sigma_max.max(1.0);
    let cols: Vec<usize> = (0..n)
        .filter(|&i| svd.singular_values[i] <= cutoff)
        .collect();
    let mut basis = CMat::zeros(n, cols.len());
    for (k, &i) in cols.iter().enumerate() {
        for j in 0..n {
            basis[(j, k)] = v_t[(i, j)].conj();
        }
    }
    basis
}

/// Characteristic polynomial coefficients `[c_0, ..., c_{n-1}, 1]` of
/// `det(xI - m)` by the Faddeev-LeVerrier recursion.
pub fn char_poly(m: &CMat) -> Vec<C64> {
    let n = m.nrows();
    let mut coeffs = vec![ZERO; n + 1];
    coeffs[n] = ONE;
    let mut mk = CMat::zeros(n, n);
    let id = CMat::identity(n, n);
    for k in 1..=n {
        mk = m * &mk + &id * coeffs[n - k + 1];
        let amk = m * &mk;
        coeffs[n - k] = -amk.trace() / (k as f64);
    }
    coeffs
}

/// Coefficients `[c_0, ..., c_{n-1}, 1]` of `prod_j (x - roots_j)`.
pub fn poly_from_roots(roots: &[C64]) -> Vec<C64> {
    let mut coeffs = vec![ONE];
    for &r in roots {
        let mut next = vec![ZERO; coeffs.len() + 1];
        for (i, &ci) in coeffs.iter().enumerate() {
            next[i + 1] += ci;
            next[i] -= ci * r;
        }
        coeffs = next;
    }
    coeffs
}

/// Power sums `p_k = sum_j roots_j^k` for `k = 1..=max_k`.
pub fn power_sums(roots: &[C64], max_k: usize) -> Vec<C64> {
    (1..=max_k)
        .map(|k| roots.iter().map(|r| r.powu(k as u32)).sum())
        .collect()
}

/// Smallest total distance matching between two equally sized multisets of
/// complex numbers; returns the maximum pairwise distance of that matching.
///
/// Exhaustive over permutations up to size 8, greedy beyond.
pub fn matched_max_distance(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len(), "multisets must have equal size");
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    if n <= 8 {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best_sum = f64::INFINITY;
        let mut best_max = f64::INFINITY;
        permute(&mut perm, 0, &mut |p| {
            let dists = p.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).norm());
            let (sum, max) = dists.fold((0.0, 0.0_f64), |(s, m), d| (s + d, m.max(d)));
            if sum < best_sum {
                best_sum = sum;
                best_max = max;
            }
        });
        best_max
    } else {
        let mut used = vec![false; n];
        let mut worst = 0.0_f64;
        for x in a {
            let (j, d) = b
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, y)| (j, (x - y).norm()))
                .min_by(|p, q| p.1.total_cmp(&q.1))
                .expect("unused element remains");
            used[j] = true;
            worst = worst.max(d);
        }
        worst
    }
}

fn permute(perm: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == perm.len() {
        visit(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, visit);
        perm.swap(k, i);
    }
}

/// Distance of a complex number to the nearest integer, measured as
/// `|Im z| + dist(Re z, Z)`.
pub fn distance_to_integer(z: C64) -> f64 {
    z.im.abs() + (z.re - z.re.round()).abs()
}
