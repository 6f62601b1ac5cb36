//! Canonical frames of the model and their growth rates at the puncture.
//!
//! In the unitary frame `e_i`:
//!
//! * the holomorphic frame of `dbar^E` is `sigma_i = z^{-m_i} |z|^{Re mu_i} e_i`
//!   with `m_i = floor(Re mu_i)`, so `|sigma_i| = |z|^{alpha_i}`;
//! * the flat-bundle frame is `tau_i = |z|^{beta_i} |z|^{i Im mu_i} E_i(z) e_i`
//!   with the unimodular factor
//!   `E_i = exp(sum_{j>=2} conj(A_j)/(2(j-1) zbar^{j-1}) - A_j/(2(j-1) z^{j-1}))`,
//!   so `|tau_i| = |z|^{beta_i}`.

use serde::{Deserialize, Serialize};

use super::grid::DiskGrid;
use super::FieldError;
use crate::correspondence::dr_to_dol;
use crate::linalg::{c, C64};
use crate::polar::PuncturePolarData;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameSide {
    Dolbeault,
    DeRham,
}

/// The unimodular factor `|z|^{i Im mu} E_i(z)` of `tau_i`.
fn derham_phase(data: &PuncturePolarData, i: usize, z: C64) -> C64 {
    let mut arg = c(0.0, 0.0);
    for j in 2..=data.order {
        let a = data.coeff(j).entries()[i];
        let k = (j - 1) as i32;
        let d = 2.0 * (j - 1) as f64;
        arg += a.conj() / (d * z.conj().powi(k)) - a / (d * z.powi(k));
    }
    let im_mu = data.residue()[i].im;
    (arg + c(0.0, im_mu * z.norm().ln())).exp()
}

/// Coefficient of `e_i` in the `i`-th canonical frame vector at `z`.
pub fn frame_coefficient(data: &PuncturePolarData, side: FrameSide, i: usize, z: C64) -> C64 {
    match side {
        FrameSide::Dolbeault => {
            let re_mu = data.residue()[i].re;
            let m = re_mu.floor() as i32;
            z.powi(-m) * z.norm().powf(re_mu)
        }
        FrameSide::DeRham => derham_phase(data, i, z) * z.norm().powf(data.weights[i]),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameGrowth {
    pub side: FrameSide,
    pub slopes: Vec<f64>,
    /// `alpha` on the Dolbeault side, `beta` on the de Rham side.
    pub expected: Vec<f64>,
    /// Largest deviation of the unimodular factors from modulus one.
    pub phase_defect: f64,
}

/// Least-squares slope of `ln |frame_i|` against `ln r` along the ray at
/// the grid angle with index `ray`.
pub fn frame_growth(
    data: &PuncturePolarData,
    side: FrameSide,
    grid: &DiskGrid,
    ray: usize,
) -> Result<FrameGrowth, FieldError> {
    data.validate().map_err(|e| FieldError::InvalidData(e.to_string()))?;
    let theta = grid.angles[ray % grid.n_theta];
    let xs: Vec<f64> = grid.radii.iter().map(|r| r.ln()).collect();
    let mean_x = xs.iter().sum::<f64>() / xs.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let mut slopes = Vec::with_capacity(data.rank);
    let mut phase_defect = 0.0_f64;
    for i in 0..data.rank {
        let ys: Vec<f64> = grid
            .radii
            .iter()
            .map(|&r| {
                let z = C64::from_polar(r, theta);
                if side == FrameSide::DeRham {
                    phase_defect = phase_defect.max((derham_phase(data, i, z).norm() - 1.0).abs());
                }
                frame_coefficient(data, side, i, z).norm().ln()
            })
            .collect();
        let mean_y = ys.iter().sum::<f64>() / ys.len() as f64;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
        slopes.push(sxy / sxx);
    }
    let expected = match side {
        FrameSide::Dolbeault => dr_to_dol(data).weights,
        FrameSide::DeRham => data.weights.clone(),
    };
    Ok(FrameGrowth { side, slopes, expected, phase_defect })
}
