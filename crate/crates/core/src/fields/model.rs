//! The flat local model in the unitary frame `e_i`:
//!
//! * `D+ = d + Re(A_1) i dtheta`,
//! * `phi = 1/2 sum (A_i dz/z^i + A_i^* dzbar/zbar^i) - beta dr/r`,
//! * `dbar^E = dbar - 1/2 Re(A_1) dzbar/zbar`,
//! * `theta = 1/2 sum A_i dz/z^i - beta/2 dz/z`.
//!
//! All coefficients are diagonal, so evaluators return diagonal entries.

use crate::linalg::{c, diag, C64};
use crate::polar::PuncturePolarData;

use super::grid::{Component, DiskGrid, FieldKind, GridField};

#[derive(Clone, Debug)]
pub struct ModelFields {
    pub data: PuncturePolarData,
}

impl ModelFields {
    pub fn new(data: &PuncturePolarData) -> Self {
        Self { data: data.clone() }
    }

    fn rank(&self) -> usize {
        self.data.rank
    }

    fn re_residue(&self) -> Vec<f64> {
        self.data.residue().iter().map(|m| m.re).collect()
    }

    /// `dz` coefficient of `theta`.
    pub fn theta(&self, z: C64) -> Vec<C64> {
        (0..self.rank())
            .map(|a| {
                let polar: C64 = (1..=self.data.order).map(|i| self.data.coeff(i).entries()[a] / z.powi(i as i32)).sum();
                0.5 * polar - self.data.weights[a] / (2.0 * z)
            })
            .collect()
    }

    /// `(dz, dzbar)` coefficients of the self-adjoint part `phi`.
    pub fn phi(&self, z: C64) -> (Vec<C64>, Vec<C64>) {
        let dz = self.theta(z);
        // The dzbar part is the adjoint of the dz part.
        let dzbar = (0..self.rank())
            .map(|a| {
                let polar: C64 = (1..=self.data.order)
                    .map(|i| self.data.coeff(i).entries()[a].conj() / z.conj().powi(i as i32))
                    .sum();
                0.5 * polar - self.data.weights[a] / (2.0 * z.conj())
            })
            .collect();
        (dz, dzbar)
    }

    /// `dzbar` coefficient of `dbar^E - dbar`.
    pub fn dbar_e(&self, z: C64) -> Vec<C64> {
        self.re_residue().iter().map(|m| c(-0.5 * m, 0.0) / z.conj()).collect()
    }

    /// `(dz, dzbar)` coefficients of `D+ - d`.
    pub fn d_plus(&self, z: C64) -> (Vec<C64>, Vec<C64>) {
        let re = self.re_residue();
        (
            re.iter().map(|m| c(0.5 * m, 0.0) / z).collect(),
            re.iter().map(|m| c(-0.5 * m, 0.0) / z.conj()).collect(),
        )
    }

    /// `(dz, dzbar)` coefficients of the flat connection `D = D+ + phi`.
    pub fn connection(&self, z: C64) -> (Vec<C64>, Vec<C64>) {
        let (pz, pzb) = self.phi(z);
        let (uz, uzb) = self.d_plus(z);
        (
            pz.iter().zip(&uz).map(|(a, b)| a + b).collect(),
            pzb.iter().zip(&uzb).map(|(a, b)| a + b).collect(),
        )
    }
}

/// The model fields sampled on a grid.
#[derive(Clone, Debug)]
pub struct SampledModel {
    pub theta: GridField,
    pub phi: GridField,
    pub dbar_e: GridField,
    pub d_plus: GridField,
    /// `D = D+ + phi`.
    pub connection: GridField,
}

pub fn eval_model_fields(data: &PuncturePolarData, grid: &DiskGrid) -> SampledModel {
    let m = ModelFields::new(data);
    let r = data.rank;
    let pick = |pair: (Vec<C64>, Vec<C64>), comp: Component| match comp {
        Component::Dz => diag(&pair.0),
        _ => diag(&pair.1),
    };
    SampledModel {
        theta: GridField::from_fn(FieldKind::Form10, r, grid, |_, z| diag(&m.theta(z))),
        phi: GridField::from_fn(FieldKind::Mixed, r, grid, |comp, z| pick(m.phi(z), comp)),
        dbar_e: GridField::from_fn(FieldKind::Form01, r, grid, |_, z| diag(&m.dbar_e(z))),
        d_plus: GridField::from_fn(FieldKind::Mixed, r, grid, |comp, z| pick(m.d_plus(z), comp)),
        connection: GridField::from_fn(FieldKind::Mixed, r, grid, |comp, z| pick(m.connection(z), comp)),
    }
}
