//! Dictionary between connection-side local data `(mu, beta, A_i)` and
//! Higgs-side local data `(lambda, alpha, T_i)`.
//!
//! Higher coefficients halve, `T_i = A_i / 2`; the residues are related by
//! `lambda = (mu - beta) / 2` and the Higgs weights are the fractional parts
//! `alpha = Re mu - floor(Re mu)`.

use serde::{Deserialize, Serialize};

use crate::linalg::C64;
use crate::polar::{DiagonalMatrix, PolarError, PuncturePolarData};

/// Fractional parts closer than this to 0 or 1 snap to exactly 0.
pub const MOD_ONE_SNAP: f64 = 1e-12;

/// Higgs-side local data at one puncture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiggsPolarData {
    pub rank: usize,
    pub order: usize,
    /// `higgs_coeffs[i - 1]` is `T_i`.
    pub higgs_coeffs: Vec<DiagonalMatrix>,
    pub weights: Vec<f64>,
    pub residue_eigs: Vec<C64>,
}

impl HiggsPolarData {
    pub fn validate(&self) -> Result<(), PolarError> {
        if self.rank == 0 || self.order == 0 {
            return Err(PolarError::Invalid("rank and order must be positive".into()));
        }
        if self.higgs_coeffs.len() != self.order
            || self.higgs_coeffs.iter().any(|m| m.len() != self.rank)
        {
            return Err(PolarError::Invalid("higgs_coeffs shape disagrees with rank/order".into()));
        }
        if self.weights.len() != self.rank || self.residue_eigs.len() != self.rank {
            return Err(PolarError::Invalid("weights/residue_eigs length disagrees with rank".into()));
        }
        if let Some(a) = self.weights.iter().find(|a| !(0.0..1.0).contains(*a)) {
            return Err(PolarError::Invalid(format!("weight {a} outside [0, 1)")));
        }
        Ok(())
    }
}

/// Representative of `x mod 1` in `[0, 1)`, snapping roundoff near the ends to 0.
pub fn mod_one(x: f64) -> f64 {
    let f = x - x.floor();
    if !(MOD_ONE_SNAP..=1.0 - MOD_ONE_SNAP).contains(&f) {
        0.0
    } else {
        f
    }
}

pub fn dr_to_dol(data: &PuncturePolarData) -> HiggsPolarData {
    let mu = data.residue();
    let beta = &data.weights;
    let residue_eigs: Vec<C64> = mu.iter().zip(beta).map(|(m, b)| (m - b) / 2.0).collect();
    let weights = mu.iter().map(|m| mod_one(m.re)).collect();
    let mut higgs_coeffs = Vec::with_capacity(data.order);
    higgs_coeffs.push(DiagonalMatrix(residue_eigs.clone()));
    for i in 2..=data.order {
        higgs_coeffs.push(data.coeff(i).scale(0.5));
    }
    HiggsPolarData { rank: data.rank, order: data.order, higgs_coeffs, weights, residue_eigs }
}

pub fn dol_to_dr(data: &HiggsPolarData) -> PuncturePolarData {
    let weights: Vec<f64> = data
        .residue_eigs
        .iter()
        .zip(&data.weights)
        .map(|(l, a)| mod_one(a - 2.0 * l.re))
        .collect();
    let mu: Vec<C64> = data.residue_eigs.iter().zip(&weights).map(|(l, b)| l * 2.0 + b).collect();
    let mut coeffs = Vec::with_capacity(data.order);
    coeffs.push(DiagonalMatrix(mu));
    for i in 1..data.order {
        coeffs.push(data.higgs_coeffs[i].scale(2.0));
    }
    PuncturePolarData { rank: data.rank, order: data.order, coeffs, weights }
}

/// Growth orders of parallel sections along rays, `gamma_i = beta_i - Re mu_i`.
pub fn local_system_weights(data: &PuncturePolarData) -> Vec<f64> {
    data.residue().iter().zip(&data.weights).map(|(m, b)| b - m.re).collect()
}

/// Local-system weights with the regime they put stability in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalSystemReport {
    pub gammas: Vec<f64>,
    /// All weights vanish: subbundle degrees are zero and stability reduces
    /// to irreducibility of the connection.
    pub irreducibility_regime: bool,
}

pub fn local_system_report(data: &PuncturePolarData) -> LocalSystemReport {
    let gammas = local_system_weights(data);
    let irreducibility_regime = gammas.iter().all(|g| g.abs() <= MOD_ONE_SNAP);
    LocalSystemReport { gammas, irreducibility_regime }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use proptest::prelude::*;

    fn single(mu: C64, beta: f64) -> PuncturePolarData {
        PuncturePolarData::new(vec![DiagonalMatrix(vec![mu])], vec![beta]).unwrap()
    }

    #[test]
    fn zero_data_maps_to_zero() {
        let h = dr_to_dol(&PuncturePolarData::zero(2));
        assert_eq!(h.weights, vec![0.0, 0.0]);
        assert!(h.residue_eigs.iter().all(|l| *l == c(0.0, 0.0)));
        assert!(h.higgs_coeffs.iter().all(|m| m.entries().iter().all(|z| *z == c(0.0, 0.0))));
    }

    #[test]
    fn half_integer_residue() {
        let h = dr_to_dol(&single(c(-0.5, 0.0), 0.5));
        assert_eq!(h.weights, vec![0.5]);
        assert_eq!(h.residue_eigs, vec![c(-0.5, 0.0)]);
        let back = dol_to_dr(&h);
        assert_eq!(back.weights, vec![0.5]);
        assert_eq!(back.residue(), &[c(-0.5, 0.0)]);
    }

    #[test]
    fn higher_coefficients_halve() {
        let data = PuncturePolarData::new(
            vec![DiagonalMatrix(vec![c(0.0, 0.0), c(0.0, 0.0)]), DiagonalMatrix(vec![c(2.0, 0.0), c(0.0, 4.0)])],
            vec![0.0, 0.0],
        )
        .unwrap();
        let h = dr_to_dol(&data);
        assert_eq!(h.higgs_coeffs[1].entries(), &[c(1.0, 0.0), c(0.0, 2.0)]);
    }

    #[test]
    fn higgs_residue_coefficient_equals_lambda() {
        let h = dr_to_dol(&single(c(1.3, -0.7), 0.2));
        assert_eq!(h.higgs_coeffs[0].entries(), h.residue_eigs.as_slice());
    }

    #[test]
    fn local_system_weight_examples() {
        assert_eq!(local_system_weights(&single(c(0.0, 0.0), 0.0)), vec![0.0]);
        let d = single(c(-0.5, 0.0), 0.5);
        let g = local_system_weights(&d);
        assert_eq!(g, vec![1.0]);
        assert_eq!(g[0], -2.0 * dr_to_dol(&d).residue_eigs[0].re);
        let report = local_system_report(&single(c(0.0, 3.7), 0.0));
        assert_eq!(report.gammas, vec![0.0]);
        assert!(report.irreducibility_regime);
        assert!(!local_system_report(&d).irreducibility_regime);
    }

    #[test]
    fn integer_real_part_gives_zero_weight() {
        for k in -5..=5 {
            let h = dr_to_dol(&single(c(k as f64, 0.25), 0.0));
            assert_eq!(h.weights, vec![0.0]);
        }
    }

    fn arb_dr() -> impl Strategy<Value = PuncturePolarData> {
        (1usize..5, 1usize..4).prop_flat_map(|(rank, order)| {
            let entry = (-50.0f64..50.0, -50.0f64..50.0).prop_map(|(a, b)| C64::new(a, b));
            (
                proptest::collection::vec(proptest::collection::vec(entry, rank), order),
                proptest::collection::vec(0.0f64..1.0, rank),
            )
                .prop_map(|(cs, w)| {
                    PuncturePolarData::new(cs.into_iter().map(DiagonalMatrix).collect(), w).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn dr_round_trip(data in arb_dr()) {
            let back = dol_to_dr(&dr_to_dol(&data));
            for (x, y) in back.weights.iter().zip(&data.weights) {
                // beta near 1 may legitimately wrap to 0 only within the snap width.
                prop_assert!((x - y).abs() < 1e-12 || (x - y).abs() > 1.0 - 1e-12);
            }
            for (mx, my) in back.coeffs.iter().zip(&data.coeffs) {
                for (x, y) in mx.entries().iter().zip(my.entries()) {
                    prop_assert!((x - y).norm() < 1e-12);
                }
            }
        }

        #[test]
        fn gamma_plus_twice_re_lambda_vanishes(data in arb_dr()) {
            let gam = local_system_weights(&data);
            let h = dr_to_dol(&data);
            for (g, l) in gam.iter().zip(&h.residue_eigs) {
                prop_assert!((g + 2.0 * l.re).abs() < 1e-12);
            }
        }

        #[test]
        fn alpha_ignores_integer_shifts(num in -1_000_000i64..1_000_000, shift in -1000i64..1000, beta in 0.0f64..1.0) {
            // Dyadic real parts keep mu + k exact in floating point.
            let re = num as f64 / 1024.0;
            let a = dr_to_dol(&single(c(re, 0.5), beta)).weights[0];
            let b = dr_to_dol(&single(c(re + shift as f64, 0.5), beta)).weights[0];
            prop_assert_eq!(a, b);
        }
    }
}
