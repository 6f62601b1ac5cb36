//! Degrees, parabolic degrees and the subsum genericity test.
//!
//! Residues are read in the local coordinate of each puncture. For a
//! puncture at infinity the coordinate is `w = 1/z`, so a global residue
//! `B` there enters as `-B`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correspondence::{dr_to_dol, local_system_weights};
use crate::linalg::{distance_to_integer, C64};
use crate::polar::PuncturePolarData;

pub const DEFAULT_INTEGER_TOL: f64 = 1e-9;
pub const DEFAULT_SUBSUM_CAP: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("degree {value} is not an integer within tolerance")]
    NonIntegerDegree { value: C64 },
    #[error("subsum enumeration needs {required} evaluations, cap is {cap}")]
    BudgetExceeded { cap: u64, required: u64 },
    #[error("expected moduli dimension is negative ({dim})")]
    NegativeDim { dim: i64 },
}

/// Punctures on a compact curve together with `c_1` of the chosen extension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveConfig {
    pub punctures: Vec<PuncturePolarData>,
    pub c1: i64,
}

impl CurveConfig {
    pub fn validate(&self) -> Result<(), StabilityError> {
        for (i, p) in self.punctures.iter().enumerate() {
            p.validate().map_err(|e| StabilityError::Invalid(format!("puncture {i}: {e}")))?;
        }
        if let Some(first) = self.punctures.first() {
            if self.punctures.iter().any(|p| p.rank != first.rank) {
                return Err(StabilityError::Invalid("punctures disagree on rank".into()));
            }
        }
        Ok(())
    }

    pub fn rank(&self) -> Option<usize> {
        self.punctures.first().map(|p| p.rank)
    }
}

/// `-sum_i tr(A_1)` over all punctures.
pub fn degree_from_residues(cfg: &CurveConfig) -> C64 {
    -cfg.punctures.iter().map(|p| p.coeffs[0].trace()).sum::<C64>()
}

/// The degree rounded to an integer, or `NonIntegerDegree` when it is not
/// within `tol` of one.
pub fn integer_degree(cfg: &CurveConfig, tol: f64) -> Result<i64, StabilityError> {
    let value = degree_from_residues(cfg);
    if distance_to_integer(value) > tol {
        return Err(StabilityError::NonIntegerDegree { value });
    }
    Ok(value.re.round() as i64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSide {
    /// Higgs-side weights `alpha`.
    Alpha,
    /// Parabolic weights `beta` carried by the data.
    Beta,
    /// Local-system weights `gamma = beta - Re mu`.
    LocalSystem,
}

pub fn parabolic_degree(cfg: &CurveConfig, side: WeightSide) -> f64 {
    let weights: f64 = cfg
        .punctures
        .iter()
        .map(|p| match side {
            WeightSide::Alpha => dr_to_dol(p).weights.iter().sum::<f64>(),
            WeightSide::Beta => p.weights.iter().sum(),
            WeightSide::LocalSystem => local_system_weights(p).iter().sum(),
        })
        .sum();
    cfg.c1 as f64 + weights
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// One index subset per puncture, all of the same size.
    pub subsets: Vec<Vec<usize>>,
    pub value: C64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsumReport {
    pub generic: bool,
    pub violations: Vec<Violation>,
    /// Number of subsums evaluated.
    pub evaluated: u64,
    /// Whether every leading coefficient has distinct entries; the
    /// genericity criterion is only known to be sufficient in that case.
    pub regular_leading: bool,
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Total subsum count `sum_{k=1}^{r-1} C(r,k)^m`, saturating.
pub fn subsum_count(rank: usize, punctures: usize) -> u64 {
    (1..rank)
        .map(|k| {
            let b = binomial(rank, k);
            (0..punctures).fold(1u64, |acc, _| acc.saturating_mul(b))
        })
        .fold(0u64, |acc, x| acc.saturating_add(x))
}

fn k_subsets(r: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let mut i = k;
        while i > 0 && cur[i - 1] == r - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Reports every choice of equally sized proper index subsets, one per
/// puncture, whose residue eigenvalues sum to within `tol` of an integer.
pub fn subsum_check(cfg: &CurveConfig, tol: f64, cap: u64) -> Result<SubsumReport, StabilityError> {
    cfg.validate()?;
    let r = cfg
        .rank()
        .ok_or_else(|| StabilityError::Invalid("subsum check needs at least one puncture".into()))?;
    let m = cfg.punctures.len();
    let required = subsum_count(r, m);
    if required > cap {
        return Err(StabilityError::BudgetExceeded { cap, required });
    }
    let regular_leading = cfg.punctures.iter().all(|p| p.leading().is_regular());

    let mut violations = Vec::new();
    for k in 1..r {
        let subsets = k_subsets(r, k);
        // Subset sums per puncture, indexed like `subsets`.
        let sums: Vec<Vec<C64>> = cfg
            .punctures
            .iter()
            .map(|p| {
                let mu = p.residue();
                subsets.iter().map(|s| s.iter().map(|&j| mu[j]).sum()).collect()
            })
            .collect();
        let base = subsets.len() as u64;
        let total = base.pow(m as u32);
        let found: Vec<Vec<usize>> = (0..total)
            .into_par_iter()
            .filter_map(|code| {
                let mut c = code;
                let mut value = C64::new(0.0, 0.0);
                let mut choice = Vec::with_capacity(m);
                for s in &sums {
                    let idx = (c % base) as usize;
                    c /= base;
                    value += s[idx];
                    choice.push(idx);
                }
                (distance_to_integer(value) <= tol).then_some(choice)
            })
            .collect();
        for choice in found {
            let value: C64 = choice.iter().zip(&sums).map(|(&i, s)| s[i]).sum();
            violations.push(Violation {
                subsets: choice.iter().map(|&i| subsets[i].clone()).collect(),
                value,
                distance: distance_to_integer(value),
            });
        }
    }
    violations.sort_by(|a, b| {
        a.subsets[0].len().cmp(&b.subsets[0].len()).then_with(|| a.subsets.cmp(&b.subsets))
    });
    Ok(SubsumReport { generic: violations.is_empty(), violations, evaluated: required, regular_leading })
}

/// `dim O - 2(r - 1)` for the orbit with eigenvalue multiplicities `mults`.
pub fn expected_moduli_dim(mults: &[usize], rank: usize) -> Result<usize, StabilityError> {
    if mults.iter().sum::<usize>() != rank || mults.contains(&0) {
        return Err(StabilityError::Invalid(format!(
            "multiplicities {mults:?} do not partition rank {rank}"
        )));
    }
    let r = rank as i64;
    let orbit = r * r - mults.iter().map(|&m| (m * m) as i64).sum::<i64>();
    let dim = orbit - 2 * (r - 1);
    if dim < 0 {
        return Err(StabilityError::NegativeDim { dim });
    }
    Ok(dim as usize)
}
