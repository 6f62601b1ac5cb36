//! Adjoint orbits with prescribed diagonal: the diagonal moment map for the
//! torus action, a Newton solver for its fibres, torus gauge fixing, and the
//! rank-3 example of a stable connection on a nontrivial bundle.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::json;
use crate::linalg::{self, c, CMat, C64};
use crate::polar::{DiagonalMatrix, PuncturePolarData};
use crate::stability::{self, CurveConfig, SubsumReport};

pub const DEFAULT_RESTARTS: usize = 16;
pub const DEFAULT_ORBIT_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const MAX_NEWTON_ITERS: usize = 200;
const EIGENVALUE_CHECK_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("eigenvalue sum {sigma} differs from diagonal sum {lambda}")]
    TraceMismatch { sigma: C64, lambda: C64 },
    #[error("no restart converged; best residual {best_residual:e}")]
    NoConvergence { best_residual: f64 },
    #[error("expected rank 3, got {0}")]
    RankMismatch(usize),
}

/// Eigenvalues `sigma` and the diagonal `lambda` a matrix must have.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitDiagonalProblem {
    pub sigma: Vec<C64>,
    pub lambda: DiagonalMatrix,
}

impl OrbitDiagonalProblem {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    fn scale(&self) -> f64 {
        self.sigma
            .iter()
            .chain(self.lambda.entries())
            .map(|z| z.norm())
            .fold(1.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), OrbitError> {
        if self.sigma.is_empty() || self.sigma.len() != self.lambda.len() {
            return Err(OrbitError::Invalid(format!(
                "sigma has {} entries, lambda has {}",
                self.sigma.len(),
                self.lambda.len()
            )));
        }
        let s: C64 = self.sigma.iter().sum();
        let l = self.lambda.trace();
        if (s - l).norm() > TRACE_TOL * self.scale() {
            return Err(OrbitError::TraceMismatch { sigma: s, lambda: l });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitSolution {
    #[serde(with = "json::matrix")]
    pub b: CMat,
    /// Largest characteristic-polynomial coefficient error, coefficient
    /// `c_k` scaled by `s^{r-k}` with `s = max(1, |sigma|, |lambda|)`.
    pub charpoly_residual: f64,
    pub diagonal_residual: f64,
    /// Largest distance between matched eigenvalues of `b` and `sigma`.
    pub eigenvalue_error: f64,
    pub gauge_balanced: bool,
    pub restart: usize,
    pub iterations: usize,
}

pub fn moment_diag(b: &CMat) -> DiagonalMatrix {
    DiagonalMatrix(linalg::diagonal_of(b))
}

fn charpoly_residual(b: &CMat, target: &[C64], scale: f64) -> f64 {
    let r = b.nrows();
    linalg::char_poly(b)
        .iter()
        .zip(target)
        .enumerate()
        .take(r)
        .map(|(k, (x, y))| (x - y).norm() / scale.powi((r - k) as i32))
        .fold(0.0, f64::max)
}

struct Attempt {
    b: CMat,
    residual: f64,
    iterations: usize,
}

/// Off-diagonal positions in row-major order.
fn unknowns(r: usize) -> Vec<(usize, usize)> {
    (0..r).flat_map(|i| (0..r).map(move |j| (i, j))).filter(|(i, j)| i != j).collect()
}

/// Scaled power-sum equations `(tr B^k - p_k) / s^k`, `k = 2..r`, and their
/// Jacobian with respect to the off-diagonal entries.
fn equations(b: &CMat, targets: &[C64], scale: f64, pos: &[(usize, usize)]) -> (Vec<C64>, CMat) {
    let r = b.nrows();
    let mut powers = vec![CMat::identity(r, r)];
    for k in 1..r {
        powers.push(&powers[k - 1] * b);
    }
    let mut f = Vec::with_capacity(r - 1);
    let mut jac = CMat::zeros(r - 1, pos.len());
    for k in 2..=r {
        let sk = scale.powi(k as i32);
        let bk = &powers[k - 1] * b;
        f.push((bk.trace() - targets[k - 1]) / sk);
        for (col, &(i, j)) in pos.iter().enumerate() {
            jac[(k - 2, col)] = powers[k - 1][(j, i)] * (k as f64 / sk);
        }
    }
    (f, jac)
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Damped minimum-norm Newton iteration from `b` (diagonal already fixed).
fn newton(mut b: CMat, targets: &[C64], charpoly: &[C64], scale: f64, tol: f64) -> Attempt {
    let r = b.nrows();
    let pos = unknowns(r);
    let (mut f, mut jac) = equations(&b, targets, scale, &pos);
    let mut fnorm = norm(&f);
    let mut iterations = 0;
    let mut polish = 0;
    while iterations < MAX_NEWTON_ITERS {
        if charpoly_residual(&b, charpoly, scale) < tol {
            // A couple of extra steps take the residual to roundoff level.
            polish += 1;
            if polish > 2 || fnorm == 0.0 {
                break;
            }
        }
        iterations += 1;
        let jh = jac.adjoint();
        let gram = &jac * &jh;
        let Some(gram_inv) = linalg::inverse(&gram) else { break };
        let fv = CMat::from_column_slice(r - 1, 1, &f);
        let step = &jh * (gram_inv * fv);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-6 {
            let mut trial = b.clone();
            for (k, &(i, j)) in pos.iter().enumerate() {
                trial[(i, j)] -= step[(k, 0)] * t;
            }
            let (tf, tj) = equations(&trial, targets, scale, &pos);
            let tn = norm(&tf);
            if tn.is_finite() && tn < fnorm {
                b = trial;
                f = tf;
                jac = tj;
                fnorm = tn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let residual = charpoly_residual(&b, charpoly, scale);
    Attempt { b, residual, iterations }
}

/// Finds `B` with eigenvalues `sigma` and diagonal exactly `lambda`, then
/// balances it with [`canonical_torus_representative`].
///
/// Restarts draw their initial off-diagonal entries from a ChaCha stream
/// seeded by `seed` and the restart index; restarts run in parallel and the
/// converged one with the lowest index is returned.
pub fn solve_orbit_diagonal(
    prob: &OrbitDiagonalProblem,
    seed: u64,
    restarts: usize,
    tol: f64,
) -> Result<OrbitSolution, OrbitError> {
    prob.validate()?;
    let r = prob.rank();
    let scale = prob.scale();
    let charpoly = linalg::poly_from_roots(&prob.sigma);
    let targets = linalg::power_sums(&prob.sigma, r);
    let base = linalg::diag(prob.lambda.entries());

    let finish = |b: CMat, restart: usize, iterations: usize| {
        let b = canonical_torus_representative(&b);
        let charpoly_residual = charpoly_residual(&b, &charpoly, scale);
        let diagonal_residual = prob
            .lambda
            .entries()
            .iter()
            .enumerate()
            .map(|(i, l)| (b[(i, i)] - l).norm())
            .fold(0.0, f64::max);
        let eigenvalue_error = linalg::matched_max_distance(&linalg::eigenvalues(&b), &prob.sigma);
        OrbitSolution {
            b,
            charpoly_residual,
            diagonal_residual,
            eigenvalue_error,
            gauge_balanced: true,
            restart,
            iterations,
        }
    };

    if charpoly_residual(&base, &charpoly, scale) < tol {
        return Ok(finish(base, 0, 0));
    }
    if r == 1 {
        return Err(OrbitError::NoConvergence { best_residual: charpoly_residual(&base, &charpoly, scale) });
    }

    let attempts: Vec<Attempt> = (0..restarts.max(1))
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart as u64));
            let mut b = base.clone();
            for (i, j) in unknowns(r) {
                b[(i, j)] = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale;
            }
            newton(b, &targets, &charpoly, scale, tol)
        })
        .collect();
    for (restart, a) in attempts.iter().enumerate() {
        if a.residual < tol {
            let sol = finish(a.b.clone(), restart, a.iterations);
            if sol.eigenvalue_error <= EIGENVALUE_CHECK_TOL * scale {
                return Ok(sol);
            }
        }
    }
    let best_residual = attempts.iter().map(|a| a.residual).fold(f64::INFINITY, f64::min);
    Err(OrbitError::NoConvergence { best_residual })
}

/// Conjugates `b` by a diagonal matrix so that `B_ij = B_ji` (both equal to
/// the principal square root of `B_ij B_ji`) along a BFS spanning tree of
/// the graph whose edges are the pairs with both entries nonzero.
///
/// The result does not depend on a prior diagonal conjugation within each
/// connected component; the diagonal is copied unchanged.
pub fn canonical_torus_representative(b: &CMat) -> CMat {
    let r = b.nrows();
    let eps = 1e-14 * linalg::max_abs(b);
    let edge = |i: usize, j: usize| i != j && b[(i, j)].norm() > eps && b[(j, i)].norm() > eps;
    let mut t: Vec<Option<C64>> = vec![None; r];
    for root in 0..r {
        if t[root].is_some() {
            continue;
        }
        t[root] = Some(c(1.0, 0.0));
        let mut queue = VecDeque::from([root]);
        while let Some(p) = queue.pop_front() {
            let tp = t[p].expect("visited");
            for ch in 0..r {
                if t[ch].is_none() && edge(p, ch) {
                    let w = (b[(p, ch)] * b[(ch, p)]).sqrt();
                    t[ch] = Some(tp * b[(p, ch)] / w);
                    queue.push_back(ch);
                }
            }
        }
    }
    let t: Vec<C64> = t.into_iter().map(|x| x.expect("every node visited")).collect();
    CMat::from_fn(r, r, |i, j| if i == j { b[(i, i)] } else { t[i] * b[(i, j)] / t[j] })
}

/// Outcome of checking the rank-3 example hypotheses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleReport {
    /// `|(g^{-1} A0 g)_{31}|`.
    pub companion_entry: f64,
    pub companion_ok: bool,
    pub lambda: DiagonalMatrix,
    pub subsums: SubsumReport,
    pub subsums_ok: bool,
    /// `B'_0 + diag(1, 0, -1)`, the residue of the model at infinity.
    pub b0: DiagonalMatrix,
    /// Model at 0: `d + A0 dz/z^2 + Lambda dz/z`.
    pub model_zero: PuncturePolarData,
    /// Model at infinity in the coordinate `w = 1/z`: residue `-B_0`.
    pub model_infinity: PuncturePolarData,
    pub degree: C64,
    pub degree_ok: bool,
    pub leading_regular: bool,
    pub monodromy_distinct: bool,
    pub moduli_dim: usize,
    pub all_ok: bool,
}

fn distinct(v: &[C64], tol: f64) -> bool {
    (0..v.len()).all(|i| (i + 1..v.len()).all(|j| (v[i] - v[j]).norm() > tol))
}

pub fn verify_nontrivial_example(
    a0: &DiagonalMatrix,
    bp0: &DiagonalMatrix,
    g: &CMat,
    tol: f64,
) -> Result<ExampleReport, OrbitError> {
    for n in [a0.len(), bp0.len(), g.nrows(), g.ncols()] {
        if n != 3 {
            return Err(OrbitError::RankMismatch(n));
        }
    }
    let g_inv = linalg::inverse(g).ok_or_else(|| OrbitError::Invalid("g is singular".into()))?;
    let conj = &g_inv * a0.to_matrix() * g;
    let companion_entry = conj[(2, 0)].norm();

    let lambda = moment_diag(&(g * bp0.to_matrix() * &g_inv));
    let residue_only = |d: DiagonalMatrix| {
        PuncturePolarData { rank: 3, order: 1, coeffs: vec![d], weights: vec![0.0; 3] }
    };
    let pair = CurveConfig { punctures: vec![residue_only(bp0.scale(-1.0)), residue_only(lambda.clone())], c1: 0 };
    let subsums = stability::subsum_check(&pair, tol, stability::DEFAULT_SUBSUM_CAP)
        .map_err(|e| OrbitError::Invalid(e.to_string()))?;

    let shift = [1.0, 0.0, -1.0];
    let b0 = DiagonalMatrix(bp0.entries().iter().zip(shift).map(|(b, s)| b + s).collect());
    let model_zero = PuncturePolarData { rank: 3, order: 2, coeffs: vec![lambda.clone(), a0.clone()], weights: vec![0.0; 3] };
    let model_infinity = residue_only(b0.scale(-1.0));
    let models = CurveConfig { punctures: vec![model_zero.clone(), model_infinity.clone()], c1: 0 };
    let degree = stability::degree_from_residues(&models);
    let degree_ok = (degree - c(0.0, 0.0)).norm() <= tol.max(1e-10);

    let leading_regular = distinct(a0.entries(), tol);
    let monodromy: Vec<C64> =
        bp0.entries().iter().map(|b| (c(0.0, 2.0 * std::f64::consts::PI) * b).exp()).collect();
    let monodromy_distinct = distinct(&monodromy, tol);
    let moduli_dim = stability::expected_moduli_dim(&[1, 1, 1], 3).expect("regular orbit");

    let companion_ok = companion_entry < tol;
    let subsums_ok = subsums.generic;
    let all_ok = companion_ok && subsums_ok && degree_ok && leading_regular && monodromy_distinct;
    Ok(ExampleReport {
        companion_entry,
        companion_ok,
        lambda,
        subsums,
        subsums_ok,
        b0,
        model_zero,
        model_infinity,
        degree,
        degree_ok,
        leading_regular,
        monodromy_distinct,
        moduli_dim,
        all_ok,
    })
}

/// The built-in rank-3 fixture: `A0 = diag(1,2,4)`,
/// `B'_0 = diag(sqrt 2, sqrt 3, sqrt 5)/10` and a matrix whose conjugate of
/// `A0` is a companion matrix.
pub fn example_fixture() -> (DiagonalMatrix, DiagonalMatrix, CMat) {
    let a0 = DiagonalMatrix::from_real(&[1.0, 2.0, 4.0]);
    let bp0 = DiagonalMatrix::from_real(&[2f64.sqrt() / 10.0, 3f64.sqrt() / 10.0, 5f64.sqrt() / 10.0]);
    let g = CMat::from_row_slice(
        3,
        3,
        &[1.0, 1.0, 1.0, 2.0, 4.0, 8.0, 3.0, 12.0, 48.0].map(|x| c(x, 0.0)),
    );
    (a0, bp0, g)
}
