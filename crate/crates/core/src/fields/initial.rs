//! Initial frame of a meromorphic Higgs germ
//! `theta = (sum_{i=1..n} B_i z^{-i} + sum_m H_m z^m) dz` with diagonal polar part.
//!
//! A holomorphic gauge `g = exp(u_{n+N} z^{n+N}) ... exp(u_n z^n)` removes
//! the off-diagonal coefficients of `theta` at `z^0, ..., z^N`. In the
//! frame `e_i = s_i |z|^{-alpha_i} (z/|z|)^{m_i}` the holomorphic structure
//! and metric agree with the model, so the flat connection differs from the
//! model by `a = vartheta dz + vartheta^* dzbar`, where `vartheta` is the
//! gauged Higgs field minus the model Higgs field.

use serde::{Deserialize, Serialize};

use super::grid::{Component, DiskGrid, FieldKind, GridField};
use super::model::ModelFields;
use super::FieldError;
use crate::correspondence::{dol_to_dr, HiggsPolarData};
use crate::linalg::{c, diag, CMat, C64};
use crate::polar::{DiagonalMatrix, PuncturePolarData};
use crate::series::MatSeries;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiggsGerm {
    /// `polar[i - 1]` is `B_i`.
    pub polar: Vec<DiagonalMatrix>,
    pub weights: Vec<f64>,
    /// `holomorphic[m]` is `H_m`.
    #[serde(with = "crate::json::matrices")]
    pub holomorphic: Vec<CMat>,
}

impl HiggsGerm {
    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn order(&self) -> usize {
        self.polar.len()
    }

    fn validate(&self) -> Result<(), FieldError> {
        let r = self.rank();
        if r == 0 || self.polar.is_empty() {
            return Err(FieldError::InvalidData("rank and pole order must be positive".into()));
        }
        if self.polar.iter().any(|b| b.len() != r) || self.holomorphic.iter().any(|h| h.shape() != (r, r)) {
            return Err(FieldError::InvalidData("coefficient shapes disagree with rank".into()));
        }
        if self.weights.iter().any(|a| !(0.0..1.0).contains(a)) {
            return Err(FieldError::InvalidData("weights must lie in [0, 1)".into()));
        }
        if !self.polar[self.order() - 1].is_regular() {
            return Err(FieldError::NonRegularLeading);
        }
        Ok(())
    }

    /// Connection-side local data of the model with the same polar part.
    pub fn model_data(&self) -> PuncturePolarData {
        let higgs = HiggsPolarData {
            rank: self.rank(),
            order: self.order(),
            higgs_coeffs: self.polar.clone(),
            weights: self.weights.clone(),
            residue_eigs: self.polar[0].0.clone(),
        };
        dol_to_dr(&higgs)
    }

    /// `theta` as a Laurent series up to `z^top`.
    pub fn series(&self, top: i32) -> MatSeries {
        let n = self.order() as i32;
        let mut s = MatSeries::zero(self.rank(), -n, top);
        for (i, b) in self.polar.iter().enumerate() {
            *s.coeff_mut(-(i as i32) - 1) = b.to_matrix();
        }
        for (m, h) in self.holomorphic.iter().enumerate() {
            if m as i32 <= top {
                *s.coeff_mut(m as i32) += h;
            }
        }
        s
    }

    pub fn eval(&self, z: C64) -> CMat {
        let r = self.rank();
        let mut acc = CMat::zeros(r, r);
        for (i, b) in self.polar.iter().enumerate() {
            acc += b.to_matrix() / z.powi(i as i32 + 1);
        }
        for (m, h) in self.holomorphic.iter().enumerate() {
            acc += h * z.powi(m as i32);
        }
        acc
    }
}

#[derive(Clone, Debug)]
pub struct InitialFrame {
    /// `steps[j]` is `u_{n+j}`; the gauge is applied as `g theta g^{-1}`.
    pub steps: Vec<CMat>,
    /// `g` as a series up to `z^{n+N}`.
    pub gauge: MatSeries,
    /// Gauged Higgs field up to `z^N`.
    pub gauged: MatSeries,
    pub model: PuncturePolarData,
    /// Mixed 1-form perturbation of the model flat connection.
    pub perturbation: GridField,
}

fn gauge_at(steps: &[CMat], n: usize, z: C64) -> (CMat, CMat) {
    let r = steps.first().map_or(0, |m| m.nrows());
    let mut g = CMat::identity(r, r);
    let mut g_inv = CMat::identity(r, r);
    for (j, u) in steps.iter().enumerate() {
        let x = u * z.powi((n + j) as i32);
        g = x.exp() * g;
        g_inv *= (-x).exp();
    }
    (g, g_inv)
}

/// Gauge away the off-diagonal part of `theta` through order `truncation`
/// and sample the resulting perturbation on `grid`.
pub fn build_initial_frame(germ: &HiggsGerm, truncation: usize, grid: &DiskGrid) -> Result<InitialFrame, FieldError> {
    germ.validate()?;
    if truncation == 0 {
        return Err(FieldError::InvalidData("truncation order must be at least 1".into()));
    }
    let (r, n) = (germ.rank(), germ.order());
    let top = truncation as i32;
    let lead = germ.polar[n - 1].entries().to_vec();

    let mut theta = germ.series(top);
    let mut gauge = MatSeries::identity(r, top + n as i32);
    let mut steps = Vec::with_capacity(truncation + 1);
    for j in 0..=truncation {
        let k = (n + j) as i32;
        let target = theta.coeff(j as i32).expect("within truncation");
        let u = CMat::from_fn(r, r, |a, b| if a == b { c(0.0, 0.0) } else { target[(a, b)] / (lead[a] - lead[b]) });
        let step = MatSeries::monomial(u.clone(), k, top + n as i32).exp();
        let step_inv = MatSeries::monomial(-u.clone(), k, top + n as i32).exp();
        theta = theta.conjugate_by(&step, &step_inv);
        gauge = step.mul(&gauge);
        steps.push(u);
    }

    let model = germ.model_data();
    let fields = ModelFields::new(&model);
    let re_mu: Vec<f64> = model.residue().iter().map(|m| m.re).collect();
    let windings: Vec<i32> = re_mu.iter().map(|m| m.floor() as i32).collect();
    let alpha = germ.weights.clone();
    let vartheta = |z: C64| -> CMat {
        let (g, g_inv) = gauge_at(&steps, n, z);
        let gauged = &g * germ.eval(z) * &g_inv - diag(&fields.theta(z));
        let unit = z / z.norm();
        let factor = |i: usize| z.norm().powf(-alpha[i]) * unit.powi(windings[i]);
        CMat::from_fn(r, r, |a, b| gauged[(a, b)] * factor(b) / factor(a))
    };
    let perturbation = GridField::from_fn(FieldKind::Mixed, r, grid, |comp, z| match comp {
        Component::Dz => vartheta(z),
        _ => vartheta(z).adjoint(),
    });
    Ok(InitialFrame { steps, gauge, gauged: theta, model, perturbation })
}

/// Least-squares slope of `ln max |a_ab|` (off-diagonal, both components,
/// all angles) against `ln r`.
pub fn off_diagonal_slope(a: &GridField, grid: &DiskGrid) -> f64 {
    let mut pts = Vec::new();
    for i in 0..grid.n_r {
        let mut m = 0.0_f64;
        for node in i * grid.n_theta..(i + 1) * grid.n_theta {
            for comp in [Component::Dz, Component::Dzbar] {
                for x in 0..a.rank {
                    for y in 0..a.rank {
                        if x != y {
                            m = m.max(a.entry(comp, x, y)[node].norm());
                        }
                    }
                }
            }
        }
        if m > 0.0 {
            pts.push((grid.radii[i].ln(), m.ln()));
        }
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
