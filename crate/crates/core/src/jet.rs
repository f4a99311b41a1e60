//! Truncated Taylor jets of maps fixing the origin.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

pub const DEFAULT_ORDER: usize = 32;

/// Coefficients `c_1..c_K` of a map fixing 0. The constant term is implicit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jet {
    coeffs: Vec<C>,
}

impl Jet {
    /// `coeffs[0]` is `c_1`.
    pub fn new(coeffs: Vec<C>) -> Self {
        assert!(!coeffs.is_empty(), "jet needs at least c_1");
        Jet { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        Jet::new(vec![C::new(0.0, 0.0); order])
    }

    pub fn identity(order: usize) -> Self {
        Jet::linear(C::new(1.0, 0.0), order)
    }

    pub fn linear(lambda: C, order: usize) -> Self {
        let mut j = Jet::zero(order);
        j.coeffs[0] = lambda;
        j
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient of `z^k`, `k >= 1`. Zero beyond the truncation order.
    pub fn coeff(&self, k: usize) -> C {
        assert!(k >= 1);
        self.coeffs.get(k - 1).copied().unwrap_or_default()
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let mut c = self.coeffs.clone();
        c.resize(order, C::default());
        Jet::new(c)
    }

    pub fn is_invertible(&self) -> bool {
        self.coeffs[0] != C::default()
    }

    pub fn add(&self, other: &Jet) -> Jet {
        let n = self.order().max(other.order());
        Jet::new((1..=n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        let n = self.order().max(other.order());
        Jet::new((1..=n).map(|k| self.coeff(k) - other.coeff(k)).collect())
    }

    /// Horner evaluation of the truncated series.
    pub fn eval(&self, z: C) -> C {
        self.coeffs.iter().rev().fold(C::default(), |acc, &c| (acc + c) * z)
    }

    /// Truncated series of `self ∘ inner`.
    pub fn compose(&self, inner: &Jet) -> Jet {
        let k = self.order().min(inner.order());
        // Series with constant term, length k+1.
        let inner_s: Vec<C> = std::iter::once(C::default())
            .chain((1..=k).map(|i| inner.coeff(i)))
            .collect();
        let mut acc = vec![C::default(); k + 1];
        acc[0] = self.coeff(k);
        for j in (1..k).rev() {
            acc = series_mul(&acc, &inner_s, k);
            acc[0] += self.coeff(j);
        }
        let out = series_mul(&acc, &inner_s, k);
        Jet::new(out[1..].to_vec())
    }

    /// Compositional inverse, computed order by order. Requires `c_1 != 0`.
    pub fn reversion(&self) -> Option<Jet> {
        if !self.is_invertible() {
            return None;
        }
        let k = self.order();
        let c1 = self.coeff(1);
        let mut g = Jet::zero(k);
        g.coeffs[0] = c1.inv();
        for n in 2..=k {
            let e = self.compose(&g).coeff(n);
            g.coeffs[n - 1] = -e / c1;
        }
        Some(g)
    }
}

/// Product of two series (index = power), truncated at `k`.
fn series_mul(a: &[C], b: &[C], k: usize) -> Vec<C> {
    let mut out = vec![C::default(); k + 1];
    for (i, &ai) in a.iter().enumerate().take(k + 1) {
        if ai == C::default() {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(k + 1 - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// `max_k |c_k|^{1/k}` over the coefficients of `a - b`.
pub fn jet_distance(a: &Jet, b: &Jet) -> f64 {
    let n = a.order().max(b.order());
    (1..=n)
        .map(|k| (a.coeff(k) - b.coeff(k)).norm().powf(1.0 / k as f64))
        .fold(0.0, f64::max)
}

/// Largest `α <= K-1` with `jet - id` vanishing to order `α+1`.
pub fn jet_tangency_order(jet: &Jet, threshold: f64) -> u32 {
    if (jet.coeff(1) - C::new(1.0, 0.0)).norm() > threshold {
        return 0;
    }
    let k = jet.order();
    let first = (2..=k).find(|&i| jet.coeff(i).norm() > threshold);
    match first {
        Some(i) => (i - 1) as u32,
        None => (k - 1) as u32,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    #[test]
    fn geometric_series_composes_to_double_step() {
        // z/(1-z) composed with itself is z/(1-2z).
        let j = Jet::new(vec![c(1.0); 8]);
        let jj = j.compose(&j);
        for k in 1..=8 {
            assert!((jj.coeff(k) - c(2f64.powi(k as i32 - 1))).norm() < 1e-12);
        }
    }

    #[test]
    fn reversion_of_geometric_series_alternates() {
        let j = Jet::new(vec![c(1.0); 6]);
        let r = j.reversion().unwrap();
        for k in 1..=6 {
            let want = if k % 2 == 1 { 1.0 } else { -1.0 };
            assert!((r.coeff(k) - c(want)).norm() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn reversion_undoes_composition() {
        let j = Jet::new(vec![C::new(0.7, 0.2), c(0.3), C::new(0.0, -0.5), c(0.1), c(0.0), c(2.0)]);
        let r = j.reversion().unwrap();
        let id = j.compose(&r);
        assert!((id.coeff(1) - c(1.0)).norm() < 1e-14);
        for k in 2..=6 {
            assert!(id.coeff(k).norm() < 1e-12);
        }
    }

    #[test]
    fn distance_example() {
        let a = Jet::identity(4);
        let b = Jet::new(vec![c(1.0), c(0.25), c(0.5), c(0.0)]);
        assert!((jet_distance(&a, &b) - 0.5f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn tangency_thresholding() {
        let j = Jet::new(vec![c(1.0), c(1e-15), c(0.0), c(1.0), c(0.0)]);
        assert_eq!(jet_tangency_order(&j, 1e-12), 3);
        assert_eq!(jet_tangency_order(&Jet::linear(c(2.0), 4), 1e-12), 0);
        assert_eq!(jet_tangency_order(&Jet::identity(5), 1e-12), 4);
    }

    #[test]
    fn horner_eval_matches_sum() {
        let j = Jet::new(vec![c(1.0), c(2.0), c(3.0)]);
        let z = C::new(0.1, 0.2);
        let want = z + c(2.0) * z * z + c(3.0) * z * z * z;
        assert!((j.eval(z) - want).norm() < 1e-15);
    }
}
