//! Truncated Laurent series with matrix coefficients, `sum_j C_j z^j`.
//!
//! A series stores the coefficients from its lowest power up to a fixed
//! top power; every product is truncated back to the top power of the
//! operands.

use crate::linalg::{CMat, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct MatSeries {
    /// Power of z carried by `coeffs[0]`.
    pub low: i32,
    pub coeffs: Vec<CMat>,
    pub dim: usize,
}

impl MatSeries {
    pub fn zero(dim: usize, low: i32, top: i32) -> Self {
        assert!(top >= low, "empty series range");
        let len = (top - low + 1) as usize;
        Self { low, coeffs: vec![CMat::zeros(dim, dim); len], dim }
    }

    pub fn identity(dim: usize, top: i32) -> Self {
        let mut s = Self::zero(dim, 0, top);
        s.coeffs[0] = CMat::identity(dim, dim);
        s
    }

    /// `m z^power`, padded with zeros up to `top`.
    pub fn monomial(m: CMat, power: i32, top: i32) -> Self {
        let dim = m.nrows();
        let mut s = Self::zero(dim, power.min(top), top);
        if power <= top {
            *s.coeff_mut(power) = m;
        }
        s
    }

    pub fn top(&self) -> i32 {
        self.low + self.coeffs.len() as i32 - 1
    }

    pub fn coeff(&self, power: i32) -> Option<&CMat> {
        if power < self.low || power > self.top() {
            None
        } else {
            Some(&self.coeffs[(power - self.low) as usize])
        }
    }

    pub fn coeff_mut(&mut self, power: i32) -> &mut CMat {
        assert!(power >= self.low && power <= self.top(), "power out of range");
        &mut self.coeffs[(power - self.low) as usize]
    }

    pub fn add(&self, other: &Self) -> Self {
        let low = self.low.min(other.low);
        let top = self.top().min(other.top());
        let mut out = Self::zero(self.dim, low, top);
        for p in low..=top {
            let mut acc = CMat::zeros(self.dim, self.dim);
            if let Some(a) = self.coeff(p) {
                acc += a;
            }
            if let Some(b) = other.coeff(p) {
                acc += b;
            }
            *out.coeff_mut(p) = acc;
        }
        out
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            low: self.low,
            coeffs: self.coeffs.iter().map(|m| m * factor).collect(),
            dim: self.dim,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Product truncated at the smaller of the two top powers.
    pub fn mul(&self, other: &Self) -> Self {
        let top = self.top().min(other.top());
        let low = self.low + other.low;
        if low > top {
            return Self::zero(self.dim, top, top);
        }
        let mut out = Self::zero(self.dim, low, top);
        for (i, a) in self.coeffs.iter().enumerate() {
            let pa = self.low + i as i32;
            for (j, b) in other.coeffs.iter().enumerate() {
                let p = pa + other.low + j as i32;
                if p > top {
                    break;
                }
                *out.coeff_mut(p) += a * b;
            }
        }
        out
    }

    /// d/dz, keeping the same top power (the new top coefficient is zero).
    pub fn derivative(&self) -> Self {
        let mut out = Self::zero(self.dim, self.low - 1, self.top());
        for (i, m) in self.coeffs.iter().enumerate() {
            let p = self.low + i as i32;
            if p != 0 {
                *out.coeff_mut(p - 1) = m * C64::new(p as f64, 0.0);
            }
        }
        out
    }

    /// Lowest power with a coefficient above `tol` in max-modulus.
    pub fn valuation(&self, tol: f64) -> Option<i32> {
        self.coeffs
            .iter()
            .position(|m| crate::linalg::max_abs(m) > tol)
            .map(|i| self.low + i as i32)
    }

    /// `exp(self)` for a series with positive valuation.
    pub fn exp(&self) -> Self {
        let top = self.top();
        let mut result = Self::identity(self.dim, top);
        let mut term = Self::identity(self.dim, top);
        let min_power = self.valuation(0.0).unwrap_or(top + 1).max(1);
        let mut m = 1;
        while m * min_power <= top {
            term = term.mul(self).scale(C64::new(1.0 / m as f64, 0.0));
            result = result.add(&term);
            m += 1;
        }
        result
    }

    /// `log(self)` for a series of the form `I + X` with X of positive valuation.
    pub fn log(&self) -> Self {
        let top = self.top();
        let x = self.sub(&Self::identity(self.dim, top));
        let min_power = x.valuation(0.0).unwrap_or(top + 1).max(1);
        let mut result = Self::zero(self.dim, 0, top);
        let mut power = Self::identity(self.dim, top);
        let mut m = 1;
        while m * min_power <= top {
            power = power.mul(&x);
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            result = result.add(&power.scale(C64::new(sign / m as f64, 0.0)));
            m += 1;
        }
        result
    }

    /// Gauge action of `g` (holomorphic, invertible at 0) on a connection
    /// form `self dz`: `g C g^{-1} - g' g^{-1}`.
    pub fn gauge_connection(&self, g: &Self, g_inv: &Self) -> Self {
        let conj = g.mul(self).mul(g_inv);
        let deriv = g.derivative().mul(g_inv);
        conj.sub(&deriv)
    }

    /// Conjugation `g C g^{-1}` (Higgs fields transform without a derivative term).
    pub fn conjugate_by(&self, g: &Self, g_inv: &Self) -> Self {
        g.mul(self).mul(g_inv)
    }

    /// Evaluate at a nonzero point.
    pub fn eval(&self, z: C64) -> CMat {
        let mut acc = CMat::zeros(self.dim, self.dim);
        for (i, m) in self.coeffs.iter().enumerate() {
            let p = self.low + i as i32;
            acc += m * z.powi(p);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs};

    fn nilpotent_gauge() -> MatSeries {
        let mut u = CMat::zeros(2, 2);
        u[(0, 1)] = c(0.3, -0.2);
        u[(1, 0)] = c(-0.1, 0.4);
        let mut s = MatSeries::monomial(u, 1, 5);
        *s.coeff_mut(2) = CMat::identity(2, 2) * c(0.05, 0.0);
        s
    }

    #[test]
    fn exp_log_round_trip() {
        let u = nilpotent_gauge();
        let back = u.exp().log();
        for p in 0..=5 {
            let diff = back.coeff(p).unwrap() - u.coeff(p).unwrap_or(&CMat::zeros(2, 2));
            assert!(max_abs(&diff) < 1e-14, "order {p}");
        }
    }

    #[test]
    fn exp_inverse_is_exp_of_negative() {
        let u = nilpotent_gauge();
        let prod = u.exp().mul(&u.scale(c(-1.0, 0.0)).exp());
        let id = MatSeries::identity(2, 5);
        assert!(prod.sub(&id).coeffs.iter().all(|m| max_abs(m) < 1e-14));
    }

    #[test]
    fn derivative_of_monomial() {
        let s = MatSeries::monomial(CMat::identity(2, 2), -2, 3);
        let d = s.derivative();
        assert_eq!(d.coeff(-3).unwrap()[(0, 0)], c(-2.0, 0.0));
    }
}
