//! Lagrange-type polynomials vanishing on prescribed nodes, and the
//! `h + t z^{α+1} P` perturbation of a conjugator.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use super::PerturbationError;
use crate::germ::{AddedTerm, Germ};
use crate::word::Letter;

/// Minimum gap between interpolation nodes.
pub const NODE_GAP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub point: C,
    pub value: C,
}

/// `P(z) = value · Π (z − zero_k)/(anchor − zero_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishingInterpolant {
    pub zeros: Vec<C>,
    pub anchor: Anchor,
    /// Monomial coefficients, index = power.
    pub coefficients: Vec<C>,
    /// Leading factor `value / Π (anchor − zero_k)`.
    pub scale: C,
}

impl VanishingInterpolant {
    pub fn eval(&self, z: C) -> C {
        self.zeros.iter().fold(self.scale, |acc, r| acc * (z - r))
    }

    pub fn degree(&self) -> usize {
        if self.scale == C::default() {
            0
        } else {
            self.zeros.len()
        }
    }
}

pub fn vanishing_interpolant(zeros: &[C], anchor: Anchor) -> Result<VanishingInterpolant, PerturbationError> {
    let mut nodes: Vec<C> = zeros.to_vec();
    nodes.push(anchor.point);
    let mut gap = f64::INFINITY;
    for i in 0..nodes.len() {
        for j in 0..i {
            gap = gap.min((nodes[i] - nodes[j]).norm());
        }
    }
    if gap <= NODE_GAP {
        return Err(PerturbationError::DegenerateNodes { gap });
    }
    let denom = zeros.iter().fold(C::new(1.0, 0.0), |acc, r| acc * (anchor.point - r));
    let scale = anchor.value / denom;
    let mut coefficients = vec![scale];
    for r in zeros {
        let mut next = vec![C::default(); coefficients.len() + 1];
        for (i, &c) in coefficients.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * r;
        }
        coefficients = next;
    }
    Ok(VanishingInterpolant { zeros: zeros.to_vec(), anchor, coefficients, scale })
}

/// Keeps the first of any points closer than `gap`, and drops points within
/// `gap` of the origin (the factor `z^{α+1}` already vanishes there).
pub fn dedup_nodes(points: &[C], gap: f64) -> Vec<C> {
    let mut out: Vec<C> = Vec::new();
    for &p in points {
        if p.norm() <= gap || out.iter().any(|q| (q - p).norm() <= gap) {
            continue;
        }
        out.push(p);
    }
    out
}

/// `h_target ← h_target + t z^{α+1} P(z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationStep {
    pub target: Letter,
    pub interpolant: VanishingInterpolant,
    pub t: f64,
    pub alpha: u32,
}

impl PerturbationStep {
    /// The added term `t z^{α+1} P(z)` in factored form.
    pub fn term(&self) -> AddedTerm {
        AddedTerm::Factored {
            scale: self.interpolant.scale * self.t,
            order: self.alpha + 1,
            roots: self.interpolant.zeros.clone(),
        }
    }

    /// Generator number, 1 for `a`, 2 for `b`.
    pub fn generator_index(&self) -> u8 {
        match self.target {
            Letter::A => 1,
            Letter::B => 2,
        }
    }
}

/// Geometric grid `1e-3 · 2^k` inside `[1e-8, 1e-1]`, largest first.
pub fn t_grid() -> Vec<f64> {
    (-16..=6).rev().map(|k| 1e-3 * 2f64.powi(k)).filter(|t| (1e-8..=1e-1).contains(t)).collect()
}

/// `h + t z^{α+1} P`, rejected when `|t (z^{α+1}P)'|` exceeds half of `|h'|`
/// somewhere on the circle of radius `0.9 ρ`.
pub fn perturb_conjugator(h: &Germ, step: &PerturbationStep) -> Result<Germ, PerturbationError> {
    if !(step.t > 0.0) {
        return Err(PerturbationError::Precondition(format!("t = {} must be positive", step.t)));
    }
    let term = step.term();
    let radius = h.radius().is_finite().then_some(h.radius());
    let r = radius.unwrap_or(f64::INFINITY);
    if r.is_finite() {
        for k in 0..256 {
            let z = C::from_polar(0.9 * r, std::f64::consts::TAU * (k as f64 + 0.5) / 256.0);
            let dh = h.derivative(z).map_err(|e| PerturbationError::InjectivityLoss(e.to_string()))?;
            let dq = term.eval_d(z).1;
            if !(dq.norm() <= 0.5 * dh.norm()) {
                return Err(PerturbationError::InjectivityLoss(format!(
                    "perturbation derivative {:.3e} against {:.3e} at {z}",
                    dq.norm(),
                    dh.norm()
                )));
            }
        }
    }
    Germ::poly_additive(h.clone(), term, radius).map_err(|e| PerturbationError::InjectivityLoss(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    #[test]
    fn interpolant_examples() {
        let p = vanishing_interpolant(&[c(1.0), c(2.0)], Anchor { point: c(0.0), value: c(1.0) }).unwrap();
        // (z−1)(z−2)/2 = 1 − 1.5 z + 0.5 z².
        let want = [c(1.0), c(-1.5), c(0.5)];
        for (a, b) in p.coefficients.iter().zip(want) {
            assert!((a - b).norm() < 1e-15);
        }
        // Oracle: solve the Vandermonde system for the same three conditions.
        let nodes = [(c(0.0), c(1.0)), (c(1.0), c(0.0)), (c(2.0), c(0.0))];
        let coeffs = solve_vandermonde(&nodes);
        for (a, b) in p.coefficients.iter().zip(coeffs) {
            assert!((a - b).norm() < 1e-12);
        }
        let k = vanishing_interpolant(&[], Anchor { point: c(0.0), value: C::new(0.3, -0.2) }).unwrap();
        assert_eq!(k.coefficients, vec![C::new(0.3, -0.2)]);
        let z = vanishing_interpolant(&[c(1.0)], Anchor { point: c(0.0), value: c(0.0) }).unwrap();
        assert!(z.coefficients.iter().all(|x| *x == C::default()));
        assert_eq!(z.degree(), 0);
        assert_eq!(p.degree(), 2);
    }

    /// Gaussian elimination on the Vandermonde system.
    fn solve_vandermonde(nodes: &[(C, C)]) -> Vec<C> {
        let n = nodes.len();
        let mut m: Vec<Vec<C>> = nodes
            .iter()
            .map(|(x, y)| {
                let mut row: Vec<C> = (0..n).map(|k| x.powu(k as u32)).collect();
                row.push(*y);
                row
            })
            .collect();
        for col in 0..n {
            let piv = (col..n).max_by(|&a, &b| m[a][col].norm().total_cmp(&m[b][col].norm())).unwrap();
            m.swap(col, piv);
            for row in 0..n {
                if row != col {
                    let f = m[row][col] / m[col][col];
                    for k in col..=n {
                        let v = m[col][k];
                        m[row][k] -= f * v;
                    }
                }
            }
        }
        (0..n).map(|i| m[i][n] / m[i][i]).collect()
    }

    #[test]
    fn degenerate_nodes_are_rejected() {
        let e = vanishing_interpolant(&[c(1.0), c(1.0 + 1e-9)], Anchor { point: c(0.0), value: c(1.0) });
        assert!(matches!(e, Err(PerturbationError::DegenerateNodes { .. })));
        let e = vanishing_interpolant(&[c(1.0)], Anchor { point: c(1.0), value: c(1.0) });
        assert!(matches!(e, Err(PerturbationError::DegenerateNodes { .. })));
    }

    #[test]
    fn dedup_keeps_first_and_drops_origin() {
        let pts = [c(0.3), c(0.3 + 1e-10), c(0.0), c(0.5), c(0.3)];
        assert_eq!(dedup_nodes(&pts, NODE_GAP), vec![c(0.3), c(0.5)]);
    }

    #[test]
    fn perturbation_examples() {
        let id = Germ::identity();
        let one = vanishing_interpolant(&[], Anchor { point: c(0.5), value: c(1.0) }).unwrap();
        let step = PerturbationStep { target: Letter::A, interpolant: one, t: 0.1, alpha: 0 };
        let h = perturb_conjugator(&id, &step).unwrap();
        assert!((h.evaluate(c(0.3)).unwrap() - c(0.33)).norm() < 1e-15);

        let p = vanishing_interpolant(&[c(1.0)], Anchor { point: c(0.0), value: c(-1.0) }).unwrap();
        let step = PerturbationStep { target: Letter::B, interpolant: p, t: 1e-3, alpha: 1 };
        let h = perturb_conjugator(&id, &step).unwrap();
        assert_eq!(h.evaluate(c(1.0)).unwrap(), c(1.0));
        let z = C::new(0.4, 0.1);
        let want = z + z * z * (z - 1.0) * 1e-3;
        assert!((h.evaluate(z).unwrap() - want).norm() < 1e-15);
        assert_eq!(h.jet().coeff(1), c(1.0));
    }

    #[test]
    fn large_perturbations_lose_injectivity() {
        let h = Germ::identity().with_radius(1.0);
        let p = vanishing_interpolant(&[c(0.2)], Anchor { point: c(0.5), value: c(50.0) }).unwrap();
        let step = PerturbationStep { target: Letter::A, interpolant: p, t: 0.1, alpha: 0 };
        assert!(matches!(perturb_conjugator(&h, &step), Err(PerturbationError::InjectivityLoss(_))));
    }

    #[test]
    fn grid_is_descending_and_bounded() {
        let g = t_grid();
        assert_eq!(g.len(), 23);
        assert!((g[0] - 0.064).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] > w[1]));
        assert!(*g.last().unwrap() >= 1e-8);
        assert!(g.contains(&1e-3));
    }
}
