//! Polar grids on an annulus and finite differences on them.
//!
//! Radii are geometric (uniform in `s = ln r`) and angles uniform, so a
//! node `(i_r, i_theta)` sits at `r_min * q^{i_r} * exp(i * 2 pi i_theta / n_theta)`.
//! Node indices are `i_r * n_theta + i_theta`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::FieldError;
use crate::linalg::{c, CMat, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub radii: Vec<f64>,
    pub angles: Vec<f64>,
    /// Area of one cell at each radius (cells at the same radius are equal).
    pub cell_areas: Vec<f64>,
}

impl DiskGrid {
    pub fn new(r_min: f64, r_max: f64, n_r: usize, n_theta: usize) -> Result<Self, FieldError> {
        if !(r_min > 0.0 && r_min < r_max && r_max <= 1.0) {
            return Err(FieldError::InvalidGrid(format!("need 0 < r_min < r_max <= 1, got [{r_min}, {r_max}]")));
        }
        if n_r < 4 || n_theta < 4 {
            return Err(FieldError::InvalidGrid(format!("need n_r, n_theta >= 4, got {n_r} x {n_theta}")));
        }
        let h = (r_max / r_min).ln() / (n_r - 1) as f64;
        let mut radii: Vec<f64> = (0..n_r).map(|i| r_min * (h * i as f64).exp()).collect();
        radii[n_r - 1] = r_max;
        let angles = (0..n_theta).map(|j| 2.0 * PI * j as f64 / n_theta as f64).collect();
        let mut bounds = Vec::with_capacity(n_r + 1);
        bounds.push(r_min);
        for i in 0..n_r - 1 {
            bounds.push((radii[i] * radii[i + 1]).sqrt());
        }
        bounds.push(r_max);
        let dtheta = 2.0 * PI / n_theta as f64;
        let cell_areas = (0..n_r).map(|i| 0.5 * (bounds[i + 1].powi(2) - bounds[i].powi(2)) * dtheta).collect();
        Ok(Self { r_min, r_max, n_r, n_theta, radii, angles, cell_areas })
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spacing in `s = ln r`.
    pub fn h_s(&self) -> f64 {
        (self.r_max / self.r_min).ln() / (self.n_r - 1) as f64
    }

    pub fn h_theta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn index(&self, i_r: usize, i_theta: usize) -> usize {
        i_r * self.n_theta + i_theta
    }

    pub fn radius_of(&self, node: usize) -> f64 {
        self.radii[node / self.n_theta]
    }

    pub fn point(&self, node: usize) -> C64 {
        let (i, j) = (node / self.n_theta, node % self.n_theta);
        C64::from_polar(self.radii[i], self.angles[j])
    }

    pub fn points(&self) -> Vec<C64> {
        (0..self.len()).map(|n| self.point(n)).collect()
    }

    pub fn area(&self) -> f64 {
        self.cell_areas.iter().sum::<f64>() * self.n_theta as f64
    }

    /// The grid of the first `n` radii (same angles).
    pub fn inner(&self, n: usize) -> Result<Self, FieldError> {
        if n < 4 || n > self.n_r {
            return Err(FieldError::InvalidGrid(format!("cannot keep {n} of {} radii", self.n_r)));
        }
        let mut g = Self::new(self.r_min, self.radii[n - 1], n, self.n_theta)?;
        g.radii.copy_from_slice(&self.radii[..n]);
        Ok(g)
    }

    /// Number of radii not exceeding `radius`.
    pub fn radii_within(&self, radius: f64) -> usize {
        self.radii.iter().take_while(|&&r| r <= radius * (1.0 + 1e-12)).count()
    }

    /// Radial indices where a centered stencil of the given order fits.
    pub fn interior_radii(&self, order: usize) -> std::ops::Range<usize> {
        let m = order / 2;
        m..self.n_r.saturating_sub(m)
    }

    pub fn interior_nodes(&self, order: usize) -> impl Iterator<Item = usize> + '_ {
        self.interior_radii(order).flat_map(move |i| (0..self.n_theta).map(move |j| i * self.n_theta + j))
    }

    /// Grid-level smoothness resolution: larger of the two spacings.
    pub fn h(&self) -> f64 {
        self.h_s().max(self.h_theta())
    }
}

/// Weights of the `m`-th derivative at `x0` from values at `xs` (Fornberg).
pub fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

fn check_order(order: usize) {
    assert!(matches!(order, 2 | 4 | 6 | 8), "finite-difference order must be 2, 4, 6 or 8");
}

/// `d/ds` with `s = ln r`: centered where the stencil fits, shifted
/// one-sided stencils of the same width near the radial ends.
pub fn d_ds(f: &[C64], grid: &DiskGrid, order: usize) -> Vec<C64> {
    check_order(order);
    let (nr, nt) = (grid.n_r, grid.n_theta);
    let width = (order + 1).min(nr);
    let h = grid.h_s();
    let mut out = vec![c(0.0, 0.0); f.len()];
    for i in 0..nr {
        let start = i.saturating_sub(order / 2).min(nr - width);
        let xs: Vec<f64> = (start..start + width).map(|k| k as f64 - i as f64).collect();
        let w: Vec<f64> = fd_weights(0.0, &xs, 1).into_iter().map(|x| x / h).collect();
        for j in 0..nt {
            let mut acc = c(0.0, 0.0);
            for (q, wq) in w.iter().enumerate() {
                acc += f[(start + q) * nt + j] * *wq;
            }
            out[i * nt + j] = acc;
        }
    }
    out
}

/// `d/dtheta`, periodic centered differences.
pub fn d_dtheta(f: &[C64], grid: &DiskGrid, order: usize) -> Vec<C64> {
    check_order(order);
    let (nr, nt) = (grid.n_r, grid.n_theta);
    let m = order / 2;
    let xs: Vec<f64> = (0..=order).map(|k| k as f64 - m as f64).collect();
    let w: Vec<f64> = fd_weights(0.0, &xs, 1).into_iter().map(|x| x / grid.h_theta()).collect();
    let mut out = vec![c(0.0, 0.0); f.len()];
    for i in 0..nr {
        for j in 0..nt {
            let mut acc = c(0.0, 0.0);
            for (q, wq) in w.iter().enumerate() {
                if *wq != 0.0 {
                    let jj = (j + nt + q - m) % nt;
                    acc += f[i * nt + jj] * *wq;
                }
            }
            out[i * nt + j] = acc;
        }
    }
    out
}

/// `d/dz = e^{-i theta} / (2r) (d/ds - i d/dtheta)`.
pub fn d_dz(f: &[C64], grid: &DiskGrid, order: usize) -> Vec<C64> {
    let fs = d_ds(f, grid, order);
    let ft = d_dtheta(f, grid, order);
    (0..f.len())
        .map(|n| {
            let z = grid.point(n);
            (fs[n] - c(0.0, 1.0) * ft[n]) / (2.0 * z)
        })
        .collect()
}

/// `d/dzbar = e^{i theta} / (2r) (d/ds + i d/dtheta)`.
pub fn d_dzbar(f: &[C64], grid: &DiskGrid, order: usize) -> Vec<C64> {
    let fs = d_ds(f, grid, order);
    let ft = d_dtheta(f, grid, order);
    (0..f.len())
        .map(|n| {
            let z = grid.point(n);
            (fs[n] + c(0.0, 1.0) * ft[n]) / (2.0 * z.conj())
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Function,
    /// `(1,0)`-form, stored as its `dz` coefficient.
    Form10,
    /// `(0,1)`-form, stored as its `dzbar` coefficient.
    Form01,
    /// Both components.
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Value,
    Dz,
    Dzbar,
}

impl FieldKind {
    fn components(self) -> &'static [Component] {
        match self {
            FieldKind::Function => &[Component::Value],
            FieldKind::Form10 => &[Component::Dz],
            FieldKind::Form01 => &[Component::Dzbar],
            FieldKind::Mixed => &[Component::Dz, Component::Dzbar],
        }
    }
}

/// Matrix-valued samples on a grid, stored entry by entry: each matrix
/// entry of each component is a contiguous array over the nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub kind: FieldKind,
    pub rank: usize,
    pub nodes: usize,
    data: Vec<Vec<C64>>,
}

impl GridField {
    pub fn zeros(kind: FieldKind, rank: usize, nodes: usize) -> Self {
        let parts = kind.components().len() * rank * rank;
        Self { kind, rank, nodes, data: vec![vec![c(0.0, 0.0); nodes]; parts] }
    }

    fn slot(&self, comp: Component, a: usize, b: usize) -> usize {
        let ci = self
            .kind
            .components()
            .iter()
            .position(|&x| x == comp)
            .unwrap_or_else(|| panic!("{:?} field has no {:?} component", self.kind, comp));
        (ci * self.rank + a) * self.rank + b
    }

    pub fn has(&self, comp: Component) -> bool {
        self.kind.components().contains(&comp)
    }

    pub fn entry(&self, comp: Component, a: usize, b: usize) -> &[C64] {
        &self.data[self.slot(comp, a, b)]
    }

    pub fn entry_mut(&mut self, comp: Component, a: usize, b: usize) -> &mut Vec<C64> {
        let s = self.slot(comp, a, b);
        &mut self.data[s]
    }

    pub fn matrix_at(&self, comp: Component, node: usize) -> CMat {
        CMat::from_fn(self.rank, self.rank, |a, b| self.entry(comp, a, b)[node])
    }

    pub fn set_matrix(&mut self, comp: Component, node: usize, m: &CMat) {
        for a in 0..self.rank {
            for b in 0..self.rank {
                self.entry_mut(comp, a, b)[node] = m[(a, b)];
            }
        }
    }

    /// Sample `f` at every node for each component.
    pub fn from_fn(
        kind: FieldKind,
        rank: usize,
        grid: &DiskGrid,
        mut f: impl FnMut(Component, C64) -> CMat,
    ) -> Self {
        let mut out = Self::zeros(kind, rank, grid.len());
        for &comp in kind.components() {
            for n in 0..grid.len() {
                let m = f(comp, grid.point(n));
                out.set_matrix(comp, n, &m);
            }
        }
        out
    }

    pub fn scale(&self, factor: C64) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut().flatten() {
            *v *= factor;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().flatten().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Keep the nodes of the first `n_r` radii.
    pub fn restrict(&self, n_r: usize, n_theta: usize) -> Self {
        let nodes = n_r * n_theta;
        Self {
            kind: self.kind,
            rank: self.rank,
            nodes,
            data: self.data.iter().map(|v| v[..nodes].to_vec()).collect(),
        }
    }
}
