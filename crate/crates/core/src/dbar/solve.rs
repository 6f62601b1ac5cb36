//! Twisted `dbar` problems `(d/dzbar + c(z)) f = g` with
//! `c(z) = kappa / (2 zbar) + sum_j lambda_j / zbar^j`, solved through the
//! integrating factor
//! `Phi = r^{-kappa} exp(sum_j lambda_j / ((j-1) zbar^{j-1}) - conj(lambda_j) / ((j-1) z^{j-1}))`
//! as `f = Phi T0(g / Phi)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cauchy::cauchy_transform;
use super::DbarError;
use crate::fields::grid::{d_dzbar, DiskGrid};
use crate::linalg::{c, C64};

/// Distance of `delta - Re kappa` to the integers below which the
/// log-twisted problem counts as resonant.
pub const RESONANCE_GUARD: f64 = 1e-6;

/// Largest phase change of the oscillatory factor between neighbouring nodes.
pub const MAX_PHASE_STEP: f64 = PI / 4.0;

const UNIMODULAR_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EntryTwist {
    pub kappa: C64,
    /// Pairs `(j, lambda_j)` with `j >= 2`.
    pub irregular: Vec<(usize, C64)>,
}

impl EntryTwist {
    pub fn log(kappa: C64) -> Self {
        Self { kappa, irregular: Vec::new() }
    }

    pub fn pole(k: usize, lambda: C64) -> Self {
        Self { kappa: c(0.0, 0.0), irregular: vec![(k, lambda)] }
    }

    pub fn is_trivial(&self) -> bool {
        self.kappa == c(0.0, 0.0) && !self.is_irregular()
    }

    pub fn is_irregular(&self) -> bool {
        self.irregular.iter().any(|&(_, l)| l != c(0.0, 0.0))
    }

    fn holomorphic_part(&self, z: C64) -> C64 {
        self.irregular
            .iter()
            .map(|&(j, l)| l / ((j - 1) as f64 * z.conj().powi(j as i32 - 1)))
            .sum()
    }

    /// Phase of the unimodular factor, `2 Im sum_j lambda_j / ((j-1) zbar^{j-1})`.
    pub fn phase(&self, z: C64) -> f64 {
        2.0 * self.holomorphic_part(z).im
    }

    /// The unimodular factor itself, built from its exponent `w - conj(w)`.
    pub fn oscillation(&self, z: C64) -> C64 {
        let w = self.holomorphic_part(z);
        (w - w.conj()).exp()
    }

    pub fn factor(&self, z: C64) -> C64 {
        (-self.kappa * z.norm().ln()).exp() * self.oscillation(z)
    }

    /// The zeroth-order coefficient `c(z)`.
    pub fn coefficient(&self, z: C64) -> C64 {
        let zb = z.conj();
        self.kappa / (2.0 * zb) + self.irregular.iter().map(|&(j, l)| l / zb.powi(j as i32)).sum::<C64>()
    }
}

/// Largest phase step of the oscillatory factor between radial or angular
/// neighbours.
pub fn max_phase_step(twist: &EntryTwist, grid: &DiskGrid) -> f64 {
    if !twist.is_irregular() {
        return 0.0;
    }
    let nt = grid.n_theta;
    let phase: Vec<f64> = grid.points().iter().map(|&z| twist.phase(z)).collect();
    (0..grid.len())
        .into_par_iter()
        .map(|n| {
            let (i, j) = (n / nt, n % nt);
            let mut m = (phase[i * nt + (j + 1) % nt] - phase[n]).abs();
            if i + 1 < grid.n_r {
                m = m.max((phase[n + nt] - phase[n]).abs());
            }
            m
        })
        .reduce(|| 0.0, f64::max)
}

fn check_unimodular(twist: &EntryTwist, grid: &DiskGrid) -> Result<(), DbarError> {
    let worst = grid.points().iter().map(|&z| (twist.oscillation(z).norm() - 1.0).abs()).fold(0.0, f64::max);
    if worst > UNIMODULAR_TOL {
        return Err(DbarError::Invalid(format!("oscillatory factor deviates from modulus one by {worst:e}")));
    }
    Ok(())
}

/// `f = Phi T0(g / Phi)` for any twist.
pub fn solve_entry(g: &[C64], grid: &DiskGrid, twist: &EntryTwist) -> Result<Vec<C64>, DbarError> {
    if twist.is_trivial() {
        return Ok(cauchy_transform(g, grid));
    }
    if twist.is_irregular() {
        check_unimodular(twist, grid)?;
        let step = max_phase_step(twist, grid);
        if step > MAX_PHASE_STEP {
            return Err(DbarError::OscillationUnresolved { max_step: step });
        }
    }
    let phi: Vec<C64> = grid.points().iter().map(|&z| twist.factor(z)).collect();
    let scaled: Vec<C64> = g.iter().zip(&phi).map(|(x, p)| x / p).collect();
    Ok(cauchy_transform(&scaled, grid).iter().zip(&phi).map(|(x, p)| x * p).collect())
}

pub fn resonance_distance(delta: f64, kappa: C64) -> f64 {
    let x = delta - kappa.re;
    (x - x.round()).abs()
}

/// Level-one problem `(d/dzbar + lambda / (2 zbar)) f = g`.
pub fn twisted_solve(g: &[C64], grid: &DiskGrid, lambda: C64, delta: f64) -> Result<Vec<C64>, DbarError> {
    let distance = resonance_distance(delta, lambda);
    if distance < RESONANCE_GUARD {
        return Err(DbarError::ResonantWeight { distance });
    }
    if lambda == c(0.0, 0.0) {
        return Ok(cauchy_transform(g, grid));
    }
    solve_entry(g, grid, &EntryTwist::log(lambda))
}

/// Level-`k` problem `(d/dzbar + lambda / zbar^k) f = g`, `k >= 2`.
pub fn irregular_solve(g: &[C64], grid: &DiskGrid, k: usize, lambda: C64) -> Result<Vec<C64>, DbarError> {
    if k < 2 {
        return Err(DbarError::Invalid(format!("irregular solve needs pole order >= 2, got {k}")));
    }
    solve_entry(g, grid, &EntryTwist::pole(k, lambda))
}

/// Pointwise residual `(d/dzbar + c) f - g` by finite differences. With an
/// oscillatory twist the derivative is taken of `f / Phi` and multiplied
/// back, `Phi d/dzbar(f / Phi) = (d/dzbar + c) f`.
pub fn dbar_residual(f: &[C64], g: &[C64], grid: &DiskGrid, twist: &EntryTwist, order: usize) -> Vec<C64> {
    let pts = grid.points();
    if twist.is_irregular() {
        let phi: Vec<C64> = pts.iter().map(|&z| twist.factor(z)).collect();
        let scaled: Vec<C64> = f.iter().zip(&phi).map(|(x, p)| x / p).collect();
        let d = d_dzbar(&scaled, grid, order);
        (0..f.len()).map(|n| phi[n] * d[n] - g[n]).collect()
    } else {
        let d = d_dzbar(f, grid, order);
        (0..f.len()).map(|n| d[n] + twist.coefficient(pts[n]) * f[n] - g[n]).collect()
    }
}

/// Ratio `||T0 g||_{C^0_{-1+delta}} / ||g||_{L^p_{-2+delta}}` used to probe the
/// weighted estimate for the plain transform.
pub fn weighted_estimate_ratio(g: &[C64], grid: &DiskGrid, delta: f64, p: f64) -> f64 {
    let f = cauchy_transform(g, grid);
    let sup = (0..f.len()).map(|n| f[n].norm() * grid.radius_of(n).powf(1.0 - delta)).fold(0.0, f64::max);
    let expo = -2.0 + delta + 2.0 / p;
    let lp: f64 = (0..g.len())
        .map(|n| {
            let r = grid.radius_of(n);
            grid.cell_areas[n / grid.n_theta] * (g[n].norm() / r.powf(expo)).powf(p)
        })
        .sum::<f64>()
        .powf(1.0 / p);
    sup / lp
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sup_on(res: &[C64], grid: &DiskGrid, order: usize) -> f64 {
        grid.interior_nodes(order).map(|k| res[k].norm()).fold(0.0, f64::max)
    }

    fn levels(r_min: f64, sizes: &[usize]) -> Vec<DiskGrid> {
        sizes.iter().map(|&n| DiskGrid::new(r_min, 1.0, n, n).unwrap()).collect()
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = DiskGrid::new(0.5, 1.0, 16, 32).unwrap();
        let zero = vec![c(0.0, 0.0); g.len()];
        assert!(twisted_solve(&zero, &g, c(0.3, 0.0), 0.5).unwrap().iter().all(|z| z.norm() == 0.0));
        assert!(irregular_solve(&zero, &g, 2, c(1.0, 0.0)).unwrap().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn untwisted_solve_is_bitwise_cauchy() {
        let g = DiskGrid::new(0.2, 1.0, 16, 16).unwrap();
        let rhs: Vec<C64> = g.points().iter().map(|z| z.conj() * z + 0.5).collect();
        assert_eq!(twisted_solve(&rhs, &g, c(0.0, 0.0), 0.5).unwrap(), cauchy_transform(&rhs, &g));
    }

    #[test]
    fn resonant_weight_is_rejected() {
        let g = DiskGrid::new(0.2, 1.0, 16, 16).unwrap();
        let rhs = vec![c(1.0, 0.0); g.len()];
        let err = twisted_solve(&rhs, &g, c(0.5, 0.0), 1.5 + 1e-8).unwrap_err();
        assert!(matches!(err, DbarError::ResonantWeight { .. }));
    }

    #[test]
    fn log_twisted_residual_decays() {
        let lambda = c(0.5, 0.0);
        let mut last = f64::INFINITY;
        for grid in levels(0.25, &[16, 32, 64, 128]) {
            // f0 = zbar r^{-1/2} solves the problem with g = r^{-1/2}.
            let rhs: Vec<C64> = grid.points().iter().map(|z| c(z.norm().powf(-0.5), 0.0)).collect();
            let f = twisted_solve(&rhs, &grid, lambda, 0.3).unwrap();
            let res = sup_on(&dbar_residual(&f, &rhs, &grid, &EntryTwist::log(lambda), 2), &grid, 2);
            assert!(res < last, "{res} !< {last}");
            last = res;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn irregular_residual_decays() {
        let lambda = c(1.0, 0.0);
        let twist = EntryTwist::pole(2, lambda);
        let mut last = f64::INFINITY;
        for grid in levels(0.5, &[32, 64, 128, 256]) {
            let rhs: Vec<C64> = grid.points().iter().map(|&z| twist.oscillation(z)).collect();
            let f = irregular_solve(&rhs, &grid, 2, lambda).unwrap();
            let res = sup_on(&dbar_residual(&f, &rhs, &grid, &twist, 2), &grid, 2);
            assert!(res < last, "{res} !< {last}");
            last = res;
        }
    }

    #[test]
    fn irregular_factor_is_unimodular() {
        let twist = EntryTwist { kappa: c(0.0, 0.0), irregular: vec![(2, c(3.0, -1.0)), (3, c(0.5, 2.0))] };
        let g = DiskGrid::new(0.5, 1.0, 8, 64).unwrap();
        assert!(check_unimodular(&twist, &g).is_ok());
    }

    #[test]
    fn coarse_grid_cannot_resolve_large_twist() {
        let g = DiskGrid::new(0.5, 1.0, 32, 32).unwrap();
        let rhs = vec![c(1.0, 0.0); g.len()];
        let err = irregular_solve(&rhs, &g, 2, c(100.0, 0.0)).unwrap_err();
        assert!(matches!(err, DbarError::OscillationUnresolved { .. }));
    }

    #[test]
    fn weighted_estimate_ratio_stays_bounded() {
        let (delta, p) = (0.5, 4.0);
        let grid = DiskGrid::new(1e-3, 1.0, 96, 64).unwrap();
        let mut ratios = Vec::new();
        for m in 0..4 {
            for x in [0.0, 0.5, 1.0] {
                for varpi in [1.0, 0.5, 0.25] {
                    // Homothety pullback of the (0,1)-form g dzbar: varpi g(varpi z).
                    let rhs: Vec<C64> = grid
                        .points()
                        .iter()
                        .map(|&z| {
                            let w = z * varpi;
                            C64::from_polar(w.norm().powf(x - 0.5), m as f64 * w.arg()) * varpi
                        })
                        .collect();
                    ratios.push(weighted_estimate_ratio(&rhs, &grid, delta, p));
                }
            }
        }
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(ratios.iter().all(|r| r.is_finite()) && max < 10.0, "{ratios:?}");
    }
}
