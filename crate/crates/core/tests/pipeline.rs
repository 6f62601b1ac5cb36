//! Cross-module properties: serialization, normalization feeding the
//! correspondence, and the subsum test across punctures.

use proptest::prelude::*;

use wildhodge::correspondence::{dol_to_dr, dr_to_dol, HiggsPolarData};
use wildhodge::json::to_canonical_string;
use wildhodge::linalg::{self, c};
use wildhodge::polar::{normalize_polar, DiagonalMatrix, FormalConnection, PuncturePolarData, DEFAULT_NORMALIZE_TOL};
use wildhodge::stability::{subsum_check, CurveConfig, DEFAULT_INTEGER_TOL, DEFAULT_SUBSUM_CAP};
use wildhodge::{CMat, C64};

fn polar_strategy() -> impl Strategy<Value = PuncturePolarData> {
    (1usize..4, 1usize..4).prop_flat_map(|(rank, order)| {
        (
            proptest::collection::vec(proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), rank), order),
            proptest::collection::vec(0.0f64..1.0, rank),
        )
            .prop_map(|(coeffs, weights)| {
                let coeffs = coeffs
                    .into_iter()
                    .map(|m| DiagonalMatrix(m.into_iter().map(|(a, b)| c(a, b)).collect()))
                    .collect();
                PuncturePolarData::new(coeffs, weights).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn emitted_json_reparses_to_the_same_bytes(data in polar_strategy()) {
        let text = to_canonical_string(&data).unwrap();
        let back: PuncturePolarData = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(to_canonical_string(&back).unwrap(), text);

        let higgs = dr_to_dol(&data);
        let text = to_canonical_string(&higgs).unwrap();
        let back: HiggsPolarData = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &higgs);
    }

    #[test]
    fn conjugated_diagonal_connection_normalizes_to_its_polar_data(
        data in polar_strategy(),
        mix in proptest::collection::vec(-0.3f64..0.3, 9),
    ) {
        prop_assume!(data.leading().is_regular());
        let lead = data.leading().entries();
        let gap = (0..lead.len())
            .flat_map(|a| (0..lead.len()).map(move |b| (a, b)))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (lead[a] - lead[b]).norm())
            .fold(f64::INFINITY, f64::min);
        prop_assume!(gap > 0.5);

        let r = data.rank;
        let p = CMat::identity(r, r) + CMat::from_fn(r, r, |a, b| c(mix[3 * a + b], 0.0));
        let p_inv = linalg::inverse(&p).unwrap();
        let base = FormalConnection::from_polar_data(&data, 2 * data.order);
        let coeffs = base.coeffs.iter().map(|m| &p * m * &p_inv).collect();
        let conn = FormalConnection::new(data.order, coeffs).unwrap();
        let out = normalize_polar(&conn, DEFAULT_NORMALIZE_TOL).unwrap();
        let recovered = out.polar_data(data.weights.clone(), 1e-9).unwrap();

        // The eigenbasis may reorder the slots; match them by leading entry.
        for (slot, x) in recovered.leading().entries().iter().enumerate() {
            let i = lead.iter().position(|y| (x - y).norm() < 1e-8).unwrap();
            for k in 1..=data.order {
                let got: C64 = recovered.coeff(k).entries()[slot];
                prop_assert!((got - data.coeff(k).entries()[i]).norm() < 1e-8);
            }
        }

        let higgs = dr_to_dol(&recovered);
        let back = dol_to_dr(&higgs);
        for (x, y) in back.residue().iter().zip(recovered.residue()) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }
}

#[test]
fn complementary_residues_are_flagged() {
    let data = PuncturePolarData::new(
        vec![DiagonalMatrix(vec![c(0.25, 0.0), c(-0.25, 0.0)]), DiagonalMatrix(vec![c(1.0, 0.0), c(-1.0, 0.0)])],
        vec![0.0, 0.0],
    )
    .unwrap();
    let mirrored = PuncturePolarData::new(
        vec![DiagonalMatrix(vec![c(0.75, 0.0), c(-0.75, 0.0)]), DiagonalMatrix(vec![c(2.0, 0.0), c(-2.0, 0.0)])],
        vec![0.0, 0.0],
    )
    .unwrap();
    let cfg = CurveConfig { punctures: vec![data, mirrored], c1: 0 };
    let report = subsum_check(&cfg, DEFAULT_INTEGER_TOL, DEFAULT_SUBSUM_CAP).unwrap();
    // 0.25 + 0.75 = 1 and -0.25 - 0.75 = -1 are integers.
    assert!(!report.generic);
    assert_eq!(report.violations.len(), 2);
}
