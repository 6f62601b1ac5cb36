//! Gauge fixing `(1 + u) (dbar0 + b) (1 + u)^{-1} = dbar0` for a
//! `(0,1)`-perturbation `b` of the model operator, through the fixed point
//! `u = T((1 + u) b)` of `dbar0 u - u b = b`.
//!
//! On `End(E)` the model operator acts entrywise,
//! `dbar0 u_ab = d/dzbar u_ab + (M_a - M_b) u_ab` with
//! `M_a = -Re(mu_a) / (2 zbar) + 1/2 sum_{j>=2} conj(A_j,aa) / zbar^j`,
//! and `T` inverts it entry by entry.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solve::{dbar_residual, resonance_distance, solve_entry, EntryTwist, RESONANCE_GUARD};
use super::DbarError;
use crate::fields::grid::{d_dzbar, Component, DiskGrid, FieldKind, GridField};
use crate::linalg::{c, C64};
use crate::polar::{end_levels, LevelDecomposition, PuncturePolarData};

pub const DEFAULT_P: f64 = 4.0;
pub const DEFAULT_DELTA: f64 = 0.5;
pub const CONTRACTION_THRESHOLD: f64 = 0.9;
pub const DEFAULT_MAX_ITER: usize = 50;
/// Fewest radii a shrunk grid may keep.
pub const MIN_RADII: usize = 16;
const FD_ORDER: usize = 8;

/// The model operator on `End(E)` for one puncture.
#[derive(Clone, Debug)]
pub struct GaugeOperator {
    pub data: PuncturePolarData,
    pub levels: LevelDecomposition,
    pub twists: Vec<Vec<EntryTwist>>,
}

impl GaugeOperator {
    pub fn new(data: &PuncturePolarData) -> Self {
        let r = data.rank;
        let mu = data.residue();
        let twists = (0..r)
            .map(|a| {
                (0..r)
                    .map(|b| {
                        let irregular = (2..=data.order)
                            .filter_map(|j| {
                                let m = data.coeff(j).entries();
                                let l = (m[a] - m[b]).conj() * 0.5;
                                (l != c(0.0, 0.0)).then_some((j, l))
                            })
                            .collect();
                        EntryTwist { kappa: c(mu[b].re - mu[a].re, 0.0), irregular }
                    })
                    .collect()
            })
            .collect();
        Self { data: data.clone(), levels: end_levels(data), twists }
    }

    pub fn rank(&self) -> usize {
        self.data.rank
    }

    /// `M_a(z)`.
    pub fn diagonal_term(&self, a: usize, z: C64) -> C64 {
        let zb = z.conj();
        let mut m = c(-0.5 * self.data.residue()[a].re, 0.0) / zb;
        for j in 2..=self.data.order {
            m += self.data.coeff(j).entries()[a].conj() * 0.5 / zb.powi(j as i32);
        }
        m
    }

    fn level(&self, a: usize, b: usize) -> usize {
        self.levels.at(a, b)
    }

    /// Exponent `e` of the solution weight `|u_ab| / r^e`.
    fn solution_exponent(&self, a: usize, b: usize, delta: f64) -> f64 {
        let k = self.level(a, b);
        if k <= 1 {
            delta
        } else {
            k as f64 - 1.0 + delta
        }
    }

    /// Exponent `e` of the residual weight `r^e |R_ab|`.
    fn residual_exponent(&self, a: usize, b: usize, delta: f64) -> f64 {
        let k = self.level(a, b);
        if k <= 1 {
            1.0 - delta
        } else {
            2.0 - delta - k as f64
        }
    }

    fn check_resonance(&self, delta: f64) -> Result<(), DbarError> {
        let r = self.rank();
        for a in 0..r {
            for b in 0..r {
                let t = &self.twists[a][b];
                if !t.is_irregular() {
                    let distance = resonance_distance(delta, t.kappa);
                    if distance < RESONANCE_GUARD {
                        return Err(DbarError::ResonantWeight { distance });
                    }
                }
            }
        }
        Ok(())
    }

    /// Entrywise `T` applied to a matrix field given as `rank x rank` node arrays.
    fn invert(&self, rhs: &[Vec<C64>], grid: &DiskGrid) -> Result<Vec<Vec<C64>>, DbarError> {
        let r = self.rank();
        (0..r * r)
            .into_par_iter()
            .map(|e| solve_entry(&rhs[e], grid, &self.twists[e / r][e % r]))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeFixOptions {
    pub delta: f64,
    pub p: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub threshold: f64,
}

impl Default for GaugeFixOptions {
    fn default() -> Self {
        Self { delta: DEFAULT_DELTA, p: DEFAULT_P, tol: 1e-8, max_iter: DEFAULT_MAX_ITER, threshold: CONTRACTION_THRESHOLD }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub varpi: f64,
    pub iteration: usize,
    pub increment: f64,
    pub ratio: Option<f64>,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct GaugeFixResult {
    pub u: GridField,
    /// The grid `u` lives on (the input grid cut at `varpi * r_max`).
    pub grid: DiskGrid,
    pub residual: f64,
    pub varpi: f64,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
}

fn entries_of(field: &GridField, comp: Component, n_nodes: usize) -> Vec<Vec<C64>> {
    let r = field.rank;
    (0..r * r).map(|e| field.entry(comp, e / r, e % r)[..n_nodes].to_vec()).collect()
}

/// `(1 + u) b`, entrywise arrays.
fn source(u: &[Vec<C64>], b: &[Vec<C64>], rank: usize) -> Vec<Vec<C64>> {
    (0..rank * rank)
        .map(|e| {
            let (a, cc) = (e / rank, e % rank);
            let mut v = b[e].clone();
            for d in 0..rank {
                let (ua, bc) = (&u[a * rank + d], &b[d * rank + cc]);
                for n in 0..v.len() {
                    v[n] += ua[n] * bc[n];
                }
            }
            v
        })
        .collect()
}

fn weighted_sup(op: &GaugeOperator, vals: &[Vec<C64>], grid: &DiskGrid, expo: impl Fn(usize, usize) -> f64, interior: bool) -> f64 {
    let r = op.rank();
    let nodes: Vec<usize> = if interior { grid.interior_nodes(FD_ORDER).collect() } else { (0..grid.len()).collect() };
    let mut m = 0.0_f64;
    for e in 0..r * r {
        let x = expo(e / r, e % r);
        for &n in &nodes {
            m = m.max(vals[e][n].norm() * grid.radius_of(n).powf(x));
        }
    }
    m
}

/// Weighted sup of `dbar0 u - u b - b` over interior nodes.
fn residual(op: &GaugeOperator, u: &[Vec<C64>], b: &[Vec<C64>], grid: &DiskGrid, delta: f64) -> f64 {
    let r = op.rank();
    let rhs = source(u, b, r);
    let res: Vec<Vec<C64>> =
        (0..r * r).into_par_iter().map(|e| dbar_residual(&u[e], &rhs[e], grid, &op.twists[e / r][e % r], FD_ORDER)).collect();
    weighted_sup(op, &res, grid, |a, cc| op.residual_exponent(a, cc, delta), true)
}

fn dzbar_part(a: &GridField) -> Result<Component, DbarError> {
    match a.kind {
        FieldKind::Form01 | FieldKind::Mixed => Ok(Component::Dzbar),
        k => Err(DbarError::Invalid(format!("perturbation must carry a dzbar component, got {k:?}"))),
    }
}

/// Solve `dbar0 u - u b = b` where `b` is the `dzbar` part of `a`.
pub fn gauge_fix(a: &GridField, data: &PuncturePolarData, grid: &DiskGrid, opts: &GaugeFixOptions) -> Result<GaugeFixResult, DbarError> {
    data.validate().map_err(|e| DbarError::Invalid(e.to_string()))?;
    if a.rank != data.rank || a.nodes != grid.len() {
        return Err(DbarError::Invalid("perturbation shape disagrees with data or grid".into()));
    }
    if !(opts.tol > 0.0 && opts.p > 2.0 && opts.threshold > 0.0 && opts.threshold < 1.0) {
        return Err(DbarError::Invalid("need tol > 0, p > 2 and a contraction threshold in (0, 1)".into()));
    }
    let comp = dzbar_part(a)?;
    let op = GaugeOperator::new(data);
    op.check_resonance(opts.delta)?;
    let r = data.rank;
    let full_b = entries_of(a, comp, grid.len());

    if a.max_abs() == 0.0 {
        return Ok(GaugeFixResult {
            u: GridField::zeros(FieldKind::Function, r, grid.len()),
            grid: grid.clone(),
            residual: 0.0,
            varpi: 1.0,
            iterations: 0,
            trace: Vec::new(),
        });
    }

    let mut trace = Vec::new();
    let mut varpi = 1.0;
    loop {
        let n_r = grid.radii_within(varpi * grid.r_max);
        if n_r < MIN_RADII {
            return Err(DbarError::NoContraction { varpi, radii: n_r });
        }
        let sub = if n_r == grid.n_r { grid.clone() } else { grid.inner(n_r)? };
        let nodes = sub.len();
        let b: Vec<Vec<C64>> = full_b.iter().map(|v| v[..nodes].to_vec()).collect();
        let norm = |x: &[Vec<C64>]| weighted_sup(&op, x, &sub, |a, cc| -op.solution_exponent(a, cc, opts.delta), false);

        let mut u: Vec<Vec<C64>> = vec![vec![c(0.0, 0.0); nodes]; r * r];
        let mut prev: Option<f64> = None;
        let mut contracting = true;
        for it in 1..=opts.max_iter {
            let next = op.invert(&source(&u, &b, r), &sub)?;
            let diff: Vec<Vec<C64>> =
                next.iter().zip(&u).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect();
            let increment = norm(&diff);
            u = next;
            let ratio = prev.map(|p| if p > 0.0 { increment / p } else { 0.0 });
            let res = residual(&op, &u, &b, &sub, opts.delta);
            trace.push(IterationRecord { varpi, iteration: it, increment, ratio, residual: res });
            if !increment.is_finite() || ratio.is_some_and(|q| q >= opts.threshold && increment > 1e-3 * opts.tol) {
                contracting = false;
                break;
            }
            if increment <= 1e-3 * opts.tol || res < 1e-2 * opts.tol {
                let mut field = GridField::zeros(FieldKind::Function, r, nodes);
                for e in 0..r * r {
                    *field.entry_mut(Component::Value, e / r, e % r) = u[e].clone();
                }
                return Ok(GaugeFixResult { u: field, grid: sub, residual: res, varpi, iterations: it, trace });
            }
            prev = Some(increment);
        }
        if contracting {
            let increment = trace.last().map_or(f64::NAN, |t| t.increment);
            return Err(DbarError::NotConverged { iterations: opts.max_iter, increment });
        }
        varpi *= 0.5;
    }
}

/// Independent check of `dbar0 (1 + u) = (1 + u)(dbar0 + b)` applied to the
/// sections `e_j` and `(2 + zbar) e_j`, with derivatives taken of the image
/// sections. Returns the weighted sup over interior nodes, normalised by
/// the modulus of the scalar factor.
pub fn verify_gauge(result: &GaugeFixResult, a: &GridField, data: &PuncturePolarData, delta: f64) -> Result<f64, DbarError> {
    let op = GaugeOperator::new(data);
    let grid = &result.grid;
    let r = data.rank;
    let b = entries_of(a, dzbar_part(a)?, grid.len());
    let u: Vec<Vec<C64>> = (0..r * r).map(|e| result.u.entry(Component::Value, e / r, e % r).to_vec()).collect();
    let pts = grid.points();
    let m: Vec<Vec<C64>> = (0..r).map(|x| pts.iter().map(|&z| op.diagonal_term(x, z)).collect()).collect();
    let sections: [(fn(C64) -> C64, fn(C64) -> C64); 2] = [(|_| c(1.0, 0.0), |_| c(0.0, 0.0)), (|z| 2.0 + z.conj(), |_| c(1.0, 0.0))];

    let mut worst = 0.0_f64;
    for (f, df) in sections {
        let fv: Vec<C64> = pts.iter().map(|&z| f(z)).collect();
        let dfv: Vec<C64> = pts.iter().map(|&z| df(z)).collect();
        let mut defect = vec![vec![c(0.0, 0.0); grid.len()]; r * r];
        for j in 0..r {
            for x in 0..r {
                let id = if x == j { 1.0 } else { 0.0 };
                let image: Vec<C64> = (0..grid.len()).map(|n| (u[x * r + j][n] + id) * fv[n]).collect();
                let d = d_dzbar(&image, grid, FD_ORDER);
                let out = &mut defect[x * r + j];
                for n in 0..grid.len() {
                    let lhs = d[n] + m[x][n] * image[n];
                    let mut rhs = (u[x * r + j][n] + id) * (dfv[n] + m[j][n] * fv[n]);
                    for y in 0..r {
                        let idy = if x == y { 1.0 } else { 0.0 };
                        rhs += (u[x * r + y][n] + idy) * b[y * r + j][n] * fv[n];
                    }
                    out[n] = (lhs - rhs) / fv[n].norm();
                }
            }
        }
        worst = worst.max(weighted_sup(&op, &defect, grid, |x, j| op.residual_exponent(x, j, delta), true));
    }
    Ok(worst)
}

/// Level-weighted `L^p` norm of the `dzbar` part: entries of level 0 in
/// `L^p_{-1+delta}`, level `k >= 1` in `L^p_{-2+delta+k}`.
pub fn perturbation_norm(a: &GridField, data: &PuncturePolarData, grid: &DiskGrid, delta: f64, p: f64) -> Result<f64, DbarError> {
    let b = entries_of(a, dzbar_part(a)?, grid.len());
    let levels = end_levels(data);
    let r = data.rank;
    let mut total = 0.0;
    for e in 0..r * r {
        let k = levels.at(e / r, e % r);
        let w = if k == 0 { -1.0 + delta } else { -2.0 + delta + k as f64 };
        let expo = w + 2.0 / p;
        for n in 0..grid.len() {
            total += grid.cell_areas[n / grid.n_theta] * (b[e][n].norm() / grid.radius_of(n).powf(expo)).powf(p);
        }
    }
    Ok(total.powf(1.0 / p))
}
