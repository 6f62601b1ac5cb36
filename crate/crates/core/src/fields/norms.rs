//! Level-weighted Sobolev norms on polar grids.
//!
//! `L^p_delta` is the space of `f` with `f / r^{delta + 2/p}` in `L^p`. The
//! weighted Sobolev norm of order `k` puts an entry of level `i` in
//! `nabla^j f / r^{i (k - j)}` for `j = 0..=k`, where `nabla` is the model
//! unitary connection acting on `End(E)`.

use serde::{Deserialize, Serialize};

use super::grid::{d_ds, d_dtheta, Component, DiskGrid, GridField};
use super::FieldError;
use crate::linalg::{c, C64};
use crate::polar::LevelDecomposition;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub p: f64,
    pub k: usize,
    pub delta: f64,
    /// Weight level-0 entries like level-1 entries.
    pub hat: bool,
}

/// Cartesian derivatives `(D_x f, D_y f)` of an entry twisted by
/// `i kappa dtheta`.
fn twisted_gradient(f: &[C64], grid: &DiskGrid, kappa: f64, order: usize) -> (Vec<C64>, Vec<C64>) {
    let fs = d_ds(f, grid, order);
    let ft = d_dtheta(f, grid, order);
    let mut dx = Vec::with_capacity(f.len());
    let mut dy = Vec::with_capacity(f.len());
    for n in 0..f.len() {
        let r = grid.radius_of(n);
        let th = grid.angles[n % grid.n_theta];
        let dr = fs[n] / r;
        let dth = (ft[n] + c(0.0, kappa) * f[n]) / r;
        dx.push(dr * th.cos() - dth * th.sin());
        dy.push(dr * th.sin() + dth * th.cos());
    }
    (dx, dy)
}

/// The level-weighted norm of one component of `f`.
///
/// `twist[a]` is `Re mu_a`; derivatives of entry `(a, b)` use the twist
/// `Re mu_a - Re mu_b`. Finite differences are fourth order.
pub fn weighted_norm(
    f: &GridField,
    comp: Component,
    grid: &DiskGrid,
    levels: &LevelDecomposition,
    twist: &[f64],
    spec: NormSpec,
) -> Result<f64, FieldError> {
    if spec.k >= 1 && (grid.n_r < 16 || grid.n_theta < 16) {
        return Err(FieldError::GridTooCoarse { n_r: grid.n_r, n_theta: grid.n_theta, needed: 16 });
    }
    if spec.p < 1.0 {
        return Err(FieldError::InvalidGrid(format!("norm exponent p = {} must be >= 1", spec.p)));
    }
    let r = f.rank;
    let base = spec.delta + 2.0 / spec.p;
    let mut total = 0.0;
    for a in 0..r {
        for b in 0..r {
            let mut level = levels.at(a, b);
            if spec.hat {
                level = level.max(1);
            }
            let kappa = twist[a] - twist[b];
            // Components of nabla^j f, flattened over tensor slots.
            let mut comps: Vec<Vec<C64>> = vec![f.entry(comp, a, b).to_vec()];
            for j in 0..=spec.k {
                let expo = base + (level * (spec.k - j)) as f64;
                for n in 0..grid.len() {
                    let rad = grid.radius_of(n);
                    let mag2: f64 = comps.iter().map(|v| v[n].norm_sqr()).sum();
                    let w = grid.cell_areas[n / grid.n_theta];
                    total += w * (mag2.sqrt() / rad.powf(expo)).powf(spec.p);
                }
                if j < spec.k {
                    comps = comps
                        .iter()
                        .flat_map(|v| {
                            let (dx, dy) = twisted_gradient(v, grid, kappa, 4);
                            [dx, dy]
                        })
                        .collect();
                }
            }
        }
    }
    Ok(total.powf(1.0 / spec.p))
}
