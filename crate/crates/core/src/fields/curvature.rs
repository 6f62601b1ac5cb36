//! Discrete curvature `F = D^2` and pseudo-curvature `G = -2 (D'')^2` of a
//! connection form sampled on a grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{d_dz, d_dzbar, Component, DiskGrid, GridField};
use super::model::eval_model_fields;
use super::FieldError;
use crate::linalg::{c, CMat, C64};
use crate::polar::PuncturePolarData;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub max_f: f64,
    pub max_g: f64,
}

/// Max node-wise norms of `F` and `G` over the interior nodes.
///
/// For `A = A_z dz + A_zbar dzbar`, `F` is the `dz ^ dzbar` coefficient
/// `d_z A_zbar - d_zbar A_z + [A_z, A_zbar]`. Splitting `A` into its unitary
/// part `A+` and self-adjoint part `phi`, `D'' = dbar + A+_zbar dzbar + phi_z dz`
/// and `G = -2 (d_zbar phi_z + [A+_zbar, phi_z])`.
pub fn discrete_curvature(conn: &GridField, grid: &DiskGrid, order: usize) -> Result<CurvatureReport, FieldError> {
    if grid.n_r < 8 || grid.n_theta < 8 {
        return Err(FieldError::GridTooCoarse { n_r: grid.n_r, n_theta: grid.n_theta, needed: 8 });
    }
    let r = conn.rank;
    let n = grid.len();
    let az = |node: usize| conn.matrix_at(Component::Dz, node);
    let azb = |node: usize| conn.matrix_at(Component::Dzbar, node);

    // Pointwise split into unitary and self-adjoint parts.
    let mut plus_zbar = vec![CMat::zeros(r, r); n];
    let mut phi_z = vec![CMat::zeros(r, r); n];
    for k in 0..n {
        let (a, b) = (az(k), azb(k));
        plus_zbar[k] = (&b - a.adjoint()) * c(0.5, 0.0);
        phi_z[k] = (&a + b.adjoint()) * c(0.5, 0.0);
    }

    let entries: Vec<(usize, usize)> = (0..r).flat_map(|a| (0..r).map(move |b| (a, b))).collect();
    let derivs: Vec<(Vec<C64>, Vec<C64>, Vec<C64>)> = entries
        .par_iter()
        .map(|&(a, b)| {
            let phi_ab: Vec<C64> = phi_z.iter().map(|m| m[(a, b)]).collect();
            (
                d_dz(conn.entry(Component::Dzbar, a, b), grid, order),
                d_dzbar(conn.entry(Component::Dz, a, b), grid, order),
                d_dzbar(&phi_ab, grid, order),
            )
        })
        .collect();

    let mut max_f = 0.0_f64;
    let mut max_g = 0.0_f64;
    for k in grid.interior_nodes(order) {
        let (a, b) = (az(k), azb(k));
        let mut f = &a * &b - &b * &a;
        let mut g = &plus_zbar[k] * &phi_z[k] - &phi_z[k] * &plus_zbar[k];
        for (e, &(i, j)) in entries.iter().enumerate() {
            f[(i, j)] += derivs[e].0[k] - derivs[e].1[k];
            g[(i, j)] += derivs[e].2[k];
        }
        max_f = max_f.max(f.norm());
        max_g = max_g.max(2.0 * g.norm());
    }
    Ok(CurvatureReport { max_f, max_g })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub n_r: usize,
    pub n_theta: usize,
    pub h: f64,
    pub max_f: f64,
    pub max_g: f64,
    /// `log2` of the ratio to the previous level (absent on the first row).
    pub order_f: Option<f64>,
    pub order_g: Option<f64>,
}

/// Curvature of the exact model under repeated doubling of the grid.
pub fn model_refinement(
    data: &PuncturePolarData,
    r_min: f64,
    r_max: f64,
    base_n_r: usize,
    base_n_theta: usize,
    levels: usize,
) -> Result<Vec<RefinementRow>, FieldError> {
    let mut rows: Vec<RefinementRow> = Vec::with_capacity(levels);
    for l in 0..levels {
        let (nr, nt) = (base_n_r << l, base_n_theta << l);
        let grid = DiskGrid::new(r_min, r_max, nr, nt)?;
        let model = eval_model_fields(data, &grid);
        let rep = discrete_curvature(&model.connection, &grid, 2)?;
        let order = |prev: f64, cur: f64| if prev > 0.0 && cur > 0.0 { Some((prev / cur).log2()) } else { None };
        let (order_f, order_g) = match rows.last() {
            Some(p) => (order(p.max_f, rep.max_f), order(p.max_g, rep.max_g)),
            None => (None, None),
        };
        rows.push(RefinementRow { n_r: nr, n_theta: nt, h: grid.h(), max_f: rep.max_f, max_g: rep.max_g, order_f, order_g });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::grid::FieldKind;
    use crate::polar::DiagonalMatrix;

    fn sample() -> PuncturePolarData {
        PuncturePolarData::new(
            vec![
                DiagonalMatrix(vec![c(0.3, 0.2), c(-0.7, 0.1)]),
                DiagonalMatrix(vec![c(0.5, -0.2), c(-0.1, 0.4)]),
            ],
            vec![0.25, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn zero_connection_is_flat() {
        let g = DiskGrid::new(0.3, 0.9, 16, 16).unwrap();
        let z = GridField::zeros(FieldKind::Mixed, 2, g.len());
        assert_eq!(discrete_curvature(&z, &g, 2).unwrap(), CurvatureReport { max_f: 0.0, max_g: 0.0 });
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let g = DiskGrid::new(0.3, 0.9, 6, 16).unwrap();
        let z = GridField::zeros(FieldKind::Mixed, 1, g.len());
        assert!(matches!(discrete_curvature(&z, &g, 2), Err(FieldError::GridTooCoarse { .. })));
    }

    #[test]
    fn model_converges_at_second_order() {
        let rows = model_refinement(&sample(), 0.3, 0.9, 32, 32, 3).unwrap();
        for row in &rows[1..] {
            assert!(row.order_f.unwrap() > 1.9, "{row:?}");
            assert!(row.order_g.unwrap() > 1.9, "{row:?}");
        }
    }

    #[test]
    fn non_closed_perturbation_keeps_curvature() {
        let mut last = f64::INFINITY;
        for n in [32, 64, 128] {
            let g = DiskGrid::new(0.3, 0.9, n, n).unwrap();
            let mut conn = eval_model_fields(&sample(), &g).connection;
            // d_z of eps * z in the dzbar slot leaves F = eps on the (0,1) entry.
            for (k, z) in g.points().into_iter().enumerate() {
                conn.entry_mut(Component::Dzbar, 0, 1)[k] += 0.1 * z;
            }
            let rep = discrete_curvature(&conn, &g, 2).unwrap();
            assert!(rep.max_f > 0.09, "n={n}: {rep:?}");
            last = last.min(rep.max_f);
        }
        assert!(last > 0.09);
    }
}
