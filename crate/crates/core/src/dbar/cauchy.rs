//! The Cauchy transform `T0 g(z) = (1/pi) int g(u) / (z - u) dA(u)`, so that
//! `d/dzbar T0 g = g`.
//!
//! The fast path expands `g` in angular Fourier modes. Mode `k` of `g`
//! feeds mode `k - 1` of `T0 g` through a radial integral,
//!
//! * `k <= 0`: `2 r^{k-1} int_0^r g_k(rho) rho^{1-k} drho`,
//! * `k >= 1`: `-2 r^{k-1} int_r^{r_max} g_k(rho) rho^{1-k} drho`,
//!
//! evaluated in `s = ln r` by product integration against a six-point
//! Lagrange interpolant of `g_k`. Below `r_min` the mode is continued as
//! `g_k(r_min) (r / r_min)^{-k}`, the leading behaviour of a smooth function.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::fields::grid::DiskGrid;
use crate::linalg::{c, C64};

const STENCIL: usize = 6;

/// Monomial coefficients of the six Lagrange basis polynomials for each
/// possible stencil offset `0, -1, ..., -4` relative to the left end of
/// the interval.
fn lagrange_patterns() -> Vec<[[f64; STENCIL]; STENCIL]> {
    (0..STENCIL - 1)
        .map(|shift| {
            let nodes: Vec<f64> = (0..STENCIL).map(|q| q as f64 - shift as f64).collect();
            let mut out = [[0.0; STENCIL]; STENCIL];
            for q in 0..STENCIL {
                let mut poly = vec![1.0];
                let mut denom = 1.0;
                for (m, &x) in nodes.iter().enumerate() {
                    if m == q {
                        continue;
                    }
                    denom *= nodes[q] - x;
                    let mut next = vec![0.0; poly.len() + 1];
                    for (p, &a) in poly.iter().enumerate() {
                        next[p + 1] += a;
                        next[p] -= a * x;
                    }
                    poly = next;
                }
                for p in 0..STENCIL {
                    out[q][p] = poly[p] / denom;
                }
            }
            out
        })
        .collect()
}

/// `M_p = int_0^1 e^{c t} t^p dt` for `p = 0..6`.
fn moments(c: f64) -> [f64; STENCIL] {
    let mut m = [0.0; STENCIL];
    if c.abs() < 2.0 {
        for (p, slot) in m.iter_mut().enumerate() {
            let mut term = 1.0;
            let mut acc = 0.0;
            for k in 0..60 {
                let add = term / (k + p + 1) as f64;
                acc += add;
                if add.abs() < 1e-18 * acc.abs() {
                    break;
                }
                term *= c / (k + 1) as f64;
            }
            *slot = acc;
        }
    } else {
        let e = c.exp();
        m[0] = (e - 1.0) / c;
        for p in 1..STENCIL {
            m[p] = (e - p as f64 * m[p - 1]) / c;
        }
    }
    m
}

/// Radial part for one angular mode: values of the output mode `k - 1`
/// divided by `e^{i (k-1) theta}`.
fn radial_mode(gk: &[C64], k: i64, grid: &DiskGrid, patterns: &[[[f64; STENCIL]; STENCIL]]) -> Vec<C64> {
    let nr = grid.n_r;
    let h = grid.h_s();
    let r = &grid.radii;
    let mom = moments((2 - k) as f64 * h);
    let weights: Vec<[f64; STENCIL]> = patterns
        .iter()
        .map(|pat| {
            let mut w = [0.0; STENCIL];
            for q in 0..STENCIL {
                w[q] = (0..STENCIL).map(|p| pat[q][p] * mom[p]).sum();
            }
            w
        })
        .collect();
    let integral = |j: usize| -> C64 {
        let start = j.saturating_sub(2).min(nr - STENCIL);
        let w = &weights[j - start];
        (0..STENCIL).map(|q| gk[start + q] * w[q]).sum::<C64>() * (r[j] * h)
    };
    let mut out = vec![c(0.0, 0.0); nr];
    if k <= 0 {
        let decay = ((k - 1) as f64 * h).exp();
        let mut acc = gk[0] * r[0] / (2 - 2 * k) as f64;
        out[0] = acc * 2.0;
        for j in 0..nr - 1 {
            acc = (acc + integral(j)) * decay;
            out[j + 1] = acc * 2.0;
        }
    } else {
        let decay = (-(k - 1) as f64 * h).exp();
        let mut acc = c(0.0, 0.0);
        for j in (0..nr - 1).rev() {
            acc = integral(j) + acc * decay;
            out[j] = acc * -2.0;
        }
    }
    out
}

/// Spectral Cauchy transform of one scalar field on `grid`.
pub fn cauchy_transform(g: &[C64], grid: &DiskGrid) -> Vec<C64> {
    assert_eq!(g.len(), grid.len(), "field does not match grid");
    assert!(grid.n_r >= STENCIL, "need at least {STENCIL} radii");
    let (nr, nt) = (grid.n_r, grid.n_theta);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(nt);
    let inv = planner.plan_fft_inverse(nt);

    let mut spec = g.to_vec();
    spec.par_chunks_mut(nt).for_each(|ring| fwd.process(ring));
    let patterns = lagrange_patterns();
    let scale = 1.0 / nt as f64;
    let cols: Vec<(usize, Vec<C64>)> = (0..nt)
        .into_par_iter()
        .filter(|&m| 2 * m != nt)
        .map(|m| {
            let k = if 2 * m < nt { m as i64 } else { m as i64 - nt as i64 };
            let gk: Vec<C64> = (0..nr).map(|i| spec[i * nt + m] * scale).collect();
            ((k - 1).rem_euclid(nt as i64) as usize, radial_mode(&gk, k, grid, &patterns))
        })
        .collect();

    let mut out = vec![c(0.0, 0.0); nr * nt];
    for (slot, col) in cols {
        for (i, v) in col.into_iter().enumerate() {
            out[i * nt + slot] = v;
        }
    }
    out.par_chunks_mut(nt).for_each(|ring| inv.process(ring));
    out
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (mut q0, mut q1) = (1.0, x);
                for k in 2..=n {
                    let q2 = ((2 * k - 1) as f64 * x * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let d = n as f64 * (x * q1 - q0) / (x * x - 1.0);
                ws[i] = 2.0 / ((1.0 - x * x) * d * d);
                break;
            }
        }
        xs[i] = x;
    }
    (xs, ws)
}

/// `int_cell dA(u) / (z - u)` for the polar cell `[r_lo, r_hi] x [-a, a]`
/// and `z = r` on the positive axis inside it, as `-int e^{-i psi} R(psi) dpsi`
/// with `R` the distance to the cell boundary along direction `psi`.
fn self_cell_integral(r: f64, r_lo: f64, r_hi: f64, a: f64, gl: &(Vec<f64>, Vec<f64>)) -> C64 {
    let exit = |psi: f64| -> f64 {
        let cs = psi.cos();
        let mut t = -r * cs + (r * r * cs * cs - r * r + r_hi * r_hi).max(0.0).sqrt();
        let disc = r * r * cs * cs - (r * r - r_lo * r_lo);
        if disc >= 0.0 {
            let t_in = -r * cs - disc.sqrt();
            if t_in >= -1e-14 * r {
                t = t.min(t_in.max(0.0));
            }
        }
        for phi in [a, -a] {
            let s = (psi - phi).sin();
            if s.abs() > 1e-300 {
                let t_line = r * phi.sin() / s;
                if t_line > 0.0 {
                    t = t.min(t_line);
                }
            }
        }
        t
    };
    let z = c(r, 0.0);
    let mut corners: Vec<f64> = [C64::from_polar(r_lo, a), C64::from_polar(r_lo, -a), C64::from_polar(r_hi, a), C64::from_polar(r_hi, -a)]
        .iter()
        .map(|p| {
            let d = p - z;
            if d.norm() == 0.0 {
                0.0
            } else {
                d.arg().rem_euclid(2.0 * PI)
            }
        })
        .collect();
    corners.extend([0.0, 0.5 * PI, PI, 1.5 * PI]);
    corners.sort_by(|x, y| x.partial_cmp(y).unwrap());
    corners.push(2.0 * PI);
    let mut acc = c(0.0, 0.0);
    for w in corners.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo < 1e-15 {
            continue;
        }
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for (x, wt) in gl.0.iter().zip(&gl.1) {
            let psi = mid + half * x;
            acc -= C64::from_polar(exit(psi), -psi) * (wt * half);
        }
    }
    acc
}

/// Direct quadrature of the Cauchy integral over the grid cells, with `g`
/// constant on each cell. The cell containing `z` is integrated exactly;
/// its neighbours are subdivided `4 x 4`. Quadratic cost: test use only.
pub fn cauchy_transform_direct(g: &[C64], grid: &DiskGrid) -> Vec<C64> {
    assert_eq!(g.len(), grid.len(), "field does not match grid");
    let (nr, nt) = (grid.n_r, grid.n_theta);
    let ht = grid.h_theta();
    let mut bounds = Vec::with_capacity(nr + 1);
    bounds.push(grid.r_min);
    for i in 0..nr - 1 {
        bounds.push((grid.radii[i] * grid.radii[i + 1]).sqrt());
    }
    bounds.push(grid.r_max);
    let gl = gauss_legendre(24);
    let points = grid.points();
    const SUB: usize = 4;

    (0..grid.len())
        .into_par_iter()
        .map(|n| {
            let (i, j) = (n / nt, n % nt);
            let z = points[n];
            let mut acc = c(0.0, 0.0);
            for ci in 0..nr {
                for cj in 0..nt {
                    let m = ci * nt + cj;
                    let dj = (cj + nt - j) % nt;
                    let near = ci.abs_diff(i) <= 1 && (dj <= 1 || dj == nt - 1);
                    if m == n {
                        let local = self_cell_integral(grid.radii[i], bounds[i], bounds[i + 1], 0.5 * ht, &gl);
                        acc += g[m] * local * C64::from_polar(1.0, -grid.angles[j]);
                    } else if near {
                        let (s0, s1) = (bounds[ci].ln(), bounds[ci + 1].ln());
                        for a in 0..SUB {
                            let ra = (s0 + (s1 - s0) * a as f64 / SUB as f64).exp();
                            let rb = (s0 + (s1 - s0) * (a + 1) as f64 / SUB as f64).exp();
                            let area = 0.5 * (rb * rb - ra * ra) * ht / SUB as f64;
                            for b in 0..SUB {
                                let th = grid.angles[cj] - 0.5 * ht + ht * (b as f64 + 0.5) / SUB as f64;
                                let u = C64::from_polar((ra * rb).sqrt(), th);
                                acc += g[m] * area / (z - u);
                            }
                        }
                    } else {
                        acc += g[m] * grid.cell_areas[ci] / (z - points[m]);
                    }
                }
            }
            acc / PI
        })
        .collect()
}
