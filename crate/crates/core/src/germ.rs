//! Holomorphic germs fixing the origin, as expression trees over a few
//! primitive families.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jet::{jet_distance, jet_tangency_order, Jet, DEFAULT_ORDER};

/// Coefficient threshold below which a jet coefficient counts as zero.
pub const TANGENCY_THRESHOLD: f64 = 1e-12;
/// Residual accepted from the Newton solve behind inverse nodes.
pub const INVERSE_RESIDUAL: f64 = 1e-12;
pub const INVERSE_MAX_ITER: usize = 64;
const TORSION_TOL: f64 = 1e-10;
const BOUNDARY_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GermError {
    #[error("point {z} lies outside the domain radius {radius}")]
    OutOfDomain { z: C, radius: f64 },
    #[error("inverse Newton iteration failed at {z} (residual {residual:e})")]
    NewtonDivergence { z: C, residual: f64 },
    #[error("composite has no positive domain radius")]
    EmptyDomain,
    #[error("map is not injective on its domain: {0}")]
    InjectivityLoss(String),
    #[error("invalid germ: {0}")]
    Invalid(String),
}

/// Disc `|z - center| < radius`, or `<=` when closed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskDomain {
    pub center: C,
    pub radius: f64,
    pub closed: bool,
}

impl DiskDomain {
    pub fn new(center: C, radius: f64, closed: bool) -> Self {
        assert!(radius > 0.0, "disc radius must be positive");
        DiskDomain { center, radius, closed }
    }

    pub fn centered(radius: f64) -> Self {
        DiskDomain::new(C::default(), radius, false)
    }

    pub fn contains(&self, z: C) -> bool {
        let d = (z - self.center).norm();
        if self.closed {
            d <= self.radius
        } else {
            d < self.radius
        }
    }

    /// Membership in the closed disc enlarged by `eps`.
    pub fn contains_relaxed(&self, z: C, eps: f64) -> bool {
        (z - self.center).norm() <= self.radius + eps
    }
}

/// Polynomial added to a base germ. Always vanishes at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AddedTerm {
    /// `Σ coeffs[i] z^(i+1)`.
    Coefficients(Vec<C>),
    /// `scale · z^order · Π (z - root)`.
    Factored { scale: C, order: u32, roots: Vec<C> },
}

impl AddedTerm {
    fn validate(&self) -> Result<(), GermError> {
        if let AddedTerm::Factored { order, roots, .. } = self {
            if *order == 0 && !roots.iter().any(|r| *r == C::default()) {
                return Err(GermError::Invalid(
                    "added polynomial must vanish at the origin".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn eval_d(&self, z: C) -> (C, C) {
        match self {
            AddedTerm::Coefficients(cs) => {
                let mut v = C::default();
                let mut d = C::default();
                // Horner on p(z) = Σ c_i z^i, then multiply by z.
                for &c in cs.iter().rev() {
                    d = d * z + v;
                    v = v * z + c;
                }
                (v * z, d * z + v)
            }
            AddedTerm::Factored { scale, order, roots } => {
                let (mut v, mut d) = if *order == 0 {
                    (*scale, C::default())
                } else {
                    (
                        scale * z.powu(*order),
                        scale * (*order as f64) * z.powu(order - 1),
                    )
                };
                for r in roots {
                    let f = z - r;
                    d = d * f + v;
                    v *= f;
                }
                (v, d)
            }
        }
    }

    /// Monomial coefficients `c_1, c_2, ...` (index 0 is `z^1`).
    pub fn monomials(&self) -> Vec<C> {
        match self {
            AddedTerm::Coefficients(cs) => cs.clone(),
            AddedTerm::Factored { scale, order, roots } => {
                // Ascending powers, index = power.
                let mut p = vec![C::default(); *order as usize];
                p.push(*scale);
                for r in roots {
                    let mut q = vec![C::default(); p.len() + 1];
                    for (i, &c) in p.iter().enumerate() {
                        q[i + 1] += c;
                        q[i] -= c * r;
                    }
                    p = q;
                }
                p.remove(0);
                p
            }
        }
    }

    fn jet(&self, order: usize) -> Jet {
        let mut m = self.monomials();
        m.resize(order, C::default());
        Jet::new(m)
    }
}

#[derive(Debug, Clone)]
pub enum GermExpr {
    /// `λ z`
    Linear(C),
    /// `z / (1 - a z)`
    Mobius(C),
    /// `base(z) + Q(z)`
    PolyAdditive { base: Germ, term: AddedTerm },
    /// `outer ∘ inner`
    Compose { outer: Germ, inner: Germ },
    /// Solved by Newton iteration seeded from the reverted jet.
    Inverse { forward: Germ },
}

#[derive(Debug)]
struct Node {
    expr: GermExpr,
    radius: f64,
    jet: Jet,
    alpha: u32,
    torsion: Option<u32>,
}

/// An injective holomorphic map on the disc `|z| < radius` fixing 0.
/// Cheap to clone.
#[derive(Debug, Clone)]
pub struct Germ(Arc<Node>);

impl Germ {
    fn from_parts(expr: GermExpr, radius: f64, jet: Jet, torsion: Option<u32>) -> Self {
        let alpha = jet_tangency_order(&jet, TANGENCY_THRESHOLD);
        Germ(Arc::new(Node { expr, radius, jet, alpha, torsion }))
    }

    pub fn identity() -> Self {
        Germ::linear(C::new(1.0, 0.0)).expect("identity is a valid germ")
    }

    pub fn linear(lambda: C) -> Result<Self, GermError> {
        if lambda == C::default() || !lambda.is_finite() {
            return Err(GermError::Invalid(format!("linear multiplier {lambda} is not invertible")));
        }
        let jet = Jet::linear(lambda, DEFAULT_ORDER);
        Ok(Germ::from_parts(GermExpr::Linear(lambda), f64::INFINITY, jet, None))
    }

    pub fn mobius(a: C) -> Result<Self, GermError> {
        if !a.is_finite() {
            return Err(GermError::Invalid(format!("Möbius parameter {a} is not finite")));
        }
        let radius = if a == C::default() { f64::INFINITY } else { 0.9 / a.norm() };
        let jet = Jet::new((0..DEFAULT_ORDER).map(|k| a.powu(k as u32)).collect());
        Ok(Germ::from_parts(GermExpr::Mobius(a), radius, jet, None))
    }

    /// `base + term`. Without a declared radius, the largest disc on which
    /// `|term'| < |base'|` on the boundary circle is used.
    pub fn poly_additive(base: Germ, term: AddedTerm, radius: Option<f64>) -> Result<Self, GermError> {
        term.validate()?;
        let r = match radius {
            Some(r) if r > 0.0 => r.min(base.radius()),
            Some(r) => return Err(GermError::Invalid(format!("radius {r} must be positive"))),
            None => derivative_dominance_radius(&base, &term),
        };
        if r <= 0.0 {
            return Err(GermError::EmptyDomain);
        }
        let jet = base.0.jet.add(&term.jet(DEFAULT_ORDER));
        if !jet.is_invertible() {
            return Err(GermError::Invalid("derivative at 0 vanishes".into()));
        }
        let g = Germ::from_parts(GermExpr::PolyAdditive { base, term }, r, jet, None);
        g.check_derivative_nonvanishing()?;
        Ok(g)
    }

    pub fn compose(outer: &Germ, inner: &Germ) -> Result<Self, GermError> {
        let radius = composite_radius(outer, inner)?;
        let jet = outer.0.jet.compose(&inner.0.jet);
        let expr = GermExpr::Compose { outer: outer.clone(), inner: inner.clone() };
        Ok(Germ::from_parts(expr, radius, jet, None))
    }

    /// Inverse germ. Closed forms for the linear and Möbius families,
    /// otherwise an inverse node.
    pub fn inverse(&self) -> Result<Self, GermError> {
        let torsion = self.0.torsion;
        let g = match &self.0.expr {
            GermExpr::Linear(l) => Germ::linear(l.inv())?,
            GermExpr::Mobius(a) => Germ::mobius(-a)?,
            GermExpr::Compose { outer, inner } => Germ::compose(&inner.inverse()?, &outer.inverse()?)?,
            GermExpr::Inverse { forward } => forward.clone(),
            GermExpr::PolyAdditive { .. } => {
                let jet = self.0.jet.reversion().ok_or_else(|| GermError::Invalid("derivative at 0 vanishes".into()))?;
                let radius = inverse_radius(self);
                if radius <= 0.0 {
                    return Err(GermError::EmptyDomain);
                }
                Germ::from_parts(GermExpr::Inverse { forward: self.clone() }, radius, jet, None)
            }
        };
        Ok(g.with_torsion_unchecked(torsion))
    }

    /// Same map on a possibly smaller disc.
    pub fn with_radius(&self, radius: f64) -> Self {
        assert!(radius > 0.0);
        let n = &self.0;
        Germ(Arc::new(Node {
            expr: n.expr.clone(),
            radius: n.radius.min(radius),
            jet: n.jet.clone(),
            alpha: n.alpha,
            torsion: n.torsion,
        }))
    }

    /// Declares a finite order, verified numerically.
    pub fn with_torsion(&self, r: u32) -> Result<Self, GermError> {
        if !verify_torsion(self, r)? {
            return Err(GermError::Invalid(format!("map does not have order {r}")));
        }
        Ok(self.with_torsion_unchecked(Some(r)))
    }

    fn with_torsion_unchecked(&self, torsion: Option<u32>) -> Self {
        let n = &self.0;
        Germ(Arc::new(Node {
            expr: n.expr.clone(),
            radius: n.radius,
            jet: n.jet.clone(),
            alpha: n.alpha,
            torsion,
        }))
    }

    pub fn expr(&self) -> &GermExpr {
        &self.0.expr
    }

    pub fn radius(&self) -> f64 {
        self.0.radius
    }

    /// Tangency order to the identity, read from the cached jet.
    pub fn alpha(&self) -> u32 {
        self.0.alpha
    }

    /// Declared finite order, `None` for infinite order.
    pub fn torsion(&self) -> Option<u32> {
        self.0.torsion
    }

    pub fn jet(&self) -> &Jet {
        &self.0.jet
    }

    pub fn multiplier(&self) -> C {
        self.0.jet.coeff(1)
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.0.expr, GermExpr::Linear(l) if l == C::new(1.0, 0.0))
    }

    pub fn evaluate(&self, z: C) -> Result<C, GermError> {
        self.eval_d(z).map(|(v, _)| v)
    }

    pub fn derivative(&self, z: C) -> Result<C, GermError> {
        self.eval_d(z).map(|(_, d)| d)
    }

    /// Value and derivative at `z`.
    pub fn eval_d(&self, z: C) -> Result<(C, C), GermError> {
        if !(z.norm() < self.0.radius) {
            return Err(GermError::OutOfDomain { z, radius: self.0.radius });
        }
        match &self.0.expr {
            GermExpr::Linear(l) => Ok((l * z, *l)),
            GermExpr::Mobius(a) => {
                let den = C::new(1.0, 0.0) - a * z;
                Ok((z / den, (den * den).inv()))
            }
            GermExpr::PolyAdditive { base, term } => {
                let (v, d) = base.eval_d(z)?;
                let (q, dq) = term.eval_d(z);
                Ok((v + q, d + dq))
            }
            GermExpr::Compose { outer, inner } => {
                let (w, dw) = inner.eval_d(z)?;
                let (v, dv) = outer.eval_d(w)?;
                Ok((v, dv * dw))
            }
            GermExpr::Inverse { forward } => self.solve_inverse(forward, z),
        }
    }

    fn solve_inverse(&self, forward: &Germ, z: C) -> Result<(C, C), GermError> {
        if z == C::default() {
            return Ok((z, forward.multiplier().inv()));
        }
        let series = self.0.jet.eval(z);
        let linear = z / forward.multiplier();
        let mut best = f64::INFINITY;
        for seed in [series, linear] {
            if !seed.is_finite() || !(seed.norm() < forward.radius()) {
                continue;
            }
            match newton_inverse(forward, z, seed) {
                Ok(r) => return Ok(r),
                Err(res) => best = best.min(res),
            }
        }
        Err(GermError::NewtonDivergence { z, residual: best })
    }

    /// Coefficients through order `k` from jet arithmetic on the tree.
    pub fn taylor_jet(&self, k: usize) -> Jet {
        assert!(k >= 1);
        if k <= self.0.jet.order() {
            return self.0.jet.truncate(k);
        }
        match &self.0.expr {
            GermExpr::Linear(l) => Jet::linear(*l, k),
            GermExpr::Mobius(a) => Jet::new((0..k).map(|i| a.powu(i as u32)).collect()),
            GermExpr::PolyAdditive { base, term } => base.taylor_jet(k).add(&term.jet(k)),
            GermExpr::Compose { outer, inner } => outer.taylor_jet(k).compose(&inner.taylor_jet(k)),
            GermExpr::Inverse { forward } => forward
                .taylor_jet(k)
                .reversion()
                .expect("forward germ has nonzero multiplier"),
        }
    }

    fn check_derivative_nonvanishing(&self) -> Result<(), GermError> {
        let r = self.radius();
        if !r.is_finite() {
            return Ok(());
        }
        let floor = 1e-9 * self.multiplier().norm();
        for i in 0..8 {
            let rho = 0.9 * r * (i as f64 + 0.5) / 8.0;
            for k in 0..32 {
                let z = C::from_polar(rho, TAU * (k as f64 + 0.25) / 32.0);
                let d = self.derivative(z)?;
                if d.norm() < floor {
                    return Err(GermError::InjectivityLoss(format!("derivative vanishes near {z}")));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Germ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0.expr {
            GermExpr::Linear(l) => write!(f, "({l})z"),
            GermExpr::Mobius(a) => write!(f, "z/(1-({a})z)"),
            GermExpr::PolyAdditive { base, term } => write!(f, "[{base} + {term:?}]"),
            GermExpr::Compose { outer, inner } => write!(f, "{outer}∘{inner}"),
            GermExpr::Inverse { forward } => write!(f, "inv({forward})"),
        }
    }
}

/// Newton on `forward(w) = z`; returns the best residual on failure.
fn newton_inverse(forward: &Germ, z: C, seed: C) -> Result<(C, C), f64> {
    let tol = 1e-14 * (1.0 + z.norm());
    let mut w = seed;
    let (mut fw, mut dfw) = forward.eval_d(w).map_err(|_| f64::INFINITY)?;
    let mut res = (fw - z).norm();
    for _ in 0..INVERSE_MAX_ITER {
        if res <= tol {
            return Ok((w, dfw.inv()));
        }
        let step = (fw - z) / dfw;
        if !step.is_finite() {
            return Err(res);
        }
        // Damp steps that leave the forward domain or increase the residual.
        let mut accepted = false;
        let mut scale = 1.0;
        for _ in 0..20 {
            let cand = w - step * scale;
            if let Ok((fc, dc)) = forward.eval_d(cand) {
                let rc = (fc - z).norm();
                if rc < res || scale == 1.0 && rc <= 2.0 * res {
                    w = cand;
                    fw = fc;
                    dfw = dc;
                    res = rc;
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
        if (step * scale).norm() <= 4.0 * f64::EPSILON * w.norm().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    if res < INVERSE_RESIDUAL {
        Ok((w, dfw.inv()))
    } else {
        Err(res)
    }
}

fn circle(r: f64, n: usize) -> impl Iterator<Item = C> {
    (0..n).map(move |k| C::from_polar(r, TAU * (k as f64 + 0.5) / n as f64))
}

/// Largest radius with `max |term'| < min |base'|` on the circle.
fn derivative_dominance_radius(base: &Germ, term: &AddedTerm) -> f64 {
    let ok = |r: f64| -> bool {
        let mut max_q = 0.0f64;
        let mut min_h = f64::INFINITY;
        for z in circle(r, 128) {
            let Ok(d) = base.derivative(z) else { return false };
            min_h = min_h.min(d.norm());
            max_q = max_q.max(term.eval_d(z).1.norm());
        }
        max_q < min_h
    };
    let hi0 = if base.radius().is_finite() { base.radius() * (1.0 - 1e-12) } else { 1e6 };
    if ok(hi0) {
        return if base.radius().is_finite() { base.radius() } else { f64::INFINITY };
    }
    let (mut lo, mut hi) = (0.0, hi0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn composite_radius(outer: &Germ, inner: &Germ) -> Result<f64, GermError> {
    let rin = inner.radius();
    let rout = outer.radius();
    if rout.is_infinite() {
        return Ok(rin);
    }
    if let GermExpr::Linear(mu) = inner.expr() {
        let r = rin.min(rout / mu.norm());
        return if r > 0.0 { Ok(r) } else { Err(GermError::EmptyDomain) };
    }
    let fits = |r: f64| {
        circle(r * (1.0 - 1e-12), BOUNDARY_SAMPLES)
            .all(|z| matches!(inner.evaluate(z), Ok(w) if w.norm() < rout))
    };
    let r0 = if rin.is_finite() { rin } else { 4.0 * rout / inner.multiplier().norm() };
    if fits(r0) && rin.is_finite() {
        return Ok(r0);
    }
    let (mut lo, mut hi) = (0.0, r0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Sampled maximum modulus; keep a little room.
    let r = lo * 0.999;
    if r > 0.0 {
        Ok(r)
    } else {
        Err(GermError::EmptyDomain)
    }
}

/// `0.9 · min |forward|` over the circle of radius `0.9 ρ`: the image of that
/// disc contains this smaller disc because the forward map is injective.
fn inverse_radius(forward: &Germ) -> f64 {
    let r = if forward.radius().is_finite() { 0.9 * forward.radius() } else { 1e6 };
    let m = circle(r, BOUNDARY_SAMPLES)
        .map(|z| forward.evaluate(z).map(|w| w.norm()).unwrap_or(0.0))
        .fold(f64::INFINITY, f64::min);
    0.9 * m
}

/// `max_{k<=K} |c_k|^{1/k}` for the jet of `a - b`.
pub fn analytic_distance(a: &Germ, b: &Germ, k: usize) -> f64 {
    jet_distance(&a.taylor_jet(k), &b.taylor_jet(k))
}

pub fn tangency_order(g: &Germ, k: usize) -> u32 {
    jet_tangency_order(&g.taylor_jet(k), TANGENCY_THRESHOLD)
}

/// True iff `g^r = id` at 16 sample points and no proper divisor of `r` does.
pub fn verify_torsion(g: &Germ, r: u32) -> Result<bool, GermError> {
    assert!(r >= 1);
    let s = 0.25 * g.radius().min(1.0);
    let starts: Vec<C> = (0..16)
        .map(|k| C::from_polar(s * (0.5 + (k % 4) as f64 / 8.0), TAU * (k as f64 + 0.3) / 16.0))
        .collect();
    let mut pts: Vec<Option<C>> = starts.iter().map(|&z| Some(z)).collect();
    let mut back_at: Vec<u32> = Vec::new();
    for step in 1..=r {
        for p in pts.iter_mut() {
            if let Some(z) = *p {
                *p = g.evaluate(z).ok();
            }
        }
        let live: Vec<(C, C)> = pts
            .iter()
            .zip(&starts)
            .filter_map(|(p, &z0)| p.map(|p| (p, z0)))
            .collect();
        if live.is_empty() {
            return Err(GermError::OutOfDomain { z: starts[0], radius: g.radius() });
        }
        if live.iter().all(|(p, z0)| (p - z0).norm() < TORSION_TOL) {
            back_at.push(step);
        }
    }
    let full = back_at.contains(&r);
    let smaller = back_at.iter().any(|&d| d < r && r % d == 0);
    Ok(full && !smaller)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    fn close(a: C, b: C, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn evaluation_examples() {
        let two = Germ::linear(c(2.0)).unwrap();
        assert!(close(two.evaluate(c(0.1)).unwrap(), c(0.2), 1e-15));
        let m = Germ::mobius(c(1.0)).unwrap();
        assert!(close(m.evaluate(c(0.4)).unwrap(), c(2.0 / 3.0), 1e-15));
        let mi = m.inverse().unwrap();
        assert!(close(mi.evaluate(c(0.5)).unwrap(), c(1.0 / 3.0), 1e-15));
        assert!(close(m.evaluate(mi.evaluate(c(0.5)).unwrap()).unwrap(), c(0.5), 1e-14));
    }

    #[test]
    fn derivative_examples() {
        let half = Germ::linear(c(0.5)).unwrap();
        let m = Germ::mobius(c(1.0)).unwrap();
        assert!(close(m.derivative(c(0.0)).unwrap(), c(1.0), 1e-15));
        let ba = Germ::compose(&half, &m).unwrap();
        assert!(close(ba.derivative(c(0.5)).unwrap(), c(2.0), 1e-12));
        assert!(close(ba.evaluate(c(0.3)).unwrap(), c(0.3 / (2.0 * 0.7)), 1e-15));
    }

    #[test]
    fn out_of_domain_is_reported() {
        let m = Germ::mobius(c(1.0)).unwrap();
        assert!(matches!(m.evaluate(c(0.95)), Err(GermError::OutOfDomain { .. })));
    }

    #[test]
    fn linear_composition_radius() {
        let m = Germ::mobius(c(0.5)).unwrap(); // radius 1.8
        let mu = Germ::linear(c(3.0)).unwrap();
        let g = Germ::compose(&m, &mu).unwrap();
        assert!((g.radius() - 0.6).abs() < 1e-15);
        let g = Germ::compose(&mu, &Germ::linear(c(2.0)).unwrap()).unwrap();
        assert!(g.radius().is_infinite());
    }

    #[test]
    fn nonlinear_composition_radius_keeps_image_inside() {
        let m = Germ::mobius(c(1.0)).unwrap(); // radius 0.9
        let sq = Germ::poly_additive(Germ::identity(), AddedTerm::Coefficients(vec![c(0.0), c(0.5)]), None)
            .unwrap();
        let g = Germ::compose(&m, &sq).unwrap();
        assert!(g.radius() > 0.0 && g.radius() <= sq.radius());
        for z in circle(g.radius() * 0.999, 64) {
            assert!(sq.evaluate(z).unwrap().norm() < 0.9);
        }
    }

    #[test]
    fn jets_of_primitives() {
        let m = Germ::mobius(c(1.0)).unwrap();
        let j = m.taylor_jet(4);
        assert_eq!(j.coeffs(), &[c(1.0); 4]);
        let l = Germ::linear(C::new(0.0, 2.0)).unwrap().taylor_jet(3);
        assert_eq!(l.coeffs(), &[C::new(0.0, 2.0), c(0.0), c(0.0)]);
        let inv = m.inverse().unwrap().taylor_jet(3);
        assert!(jet_distance(&inv, &Jet::new(vec![c(1.0), c(-1.0), c(1.0)])) < 1e-12);
        // Jets beyond the cached order are rebuilt from the tree.
        assert!((m.taylor_jet(40).coeff(40) - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn inverse_node_round_trip() {
        let h = Germ::poly_additive(
            Germ::identity(),
            AddedTerm::Coefficients(vec![c(0.0), C::new(0.3, 0.1), c(-0.2)]),
            None,
        )
        .unwrap();
        let hi = h.inverse().unwrap();
        assert!(matches!(hi.expr(), GermExpr::Inverse { .. }));
        for z in circle(0.5 * hi.radius(), 16) {
            let w = hi.evaluate(z).unwrap();
            assert!(close(h.evaluate(w).unwrap(), z, 1e-12));
            let d = hi.derivative(z).unwrap() * h.derivative(w).unwrap();
            assert!(close(d, c(1.0), 1e-10));
        }
        let id = Germ::compose(&h, &hi).unwrap();
        for z in circle(0.3 * id.radius(), 16) {
            assert!(close(id.evaluate(z).unwrap(), z, 1e-12));
        }
    }

    #[test]
    fn analytic_distance_examples() {
        let id = Germ::identity();
        let p = Germ::poly_additive(id.clone(), AddedTerm::Coefficients(vec![c(0.0), c(1.0)]), None).unwrap();
        assert_eq!(analytic_distance(&p, &p, 32), 0.0);
        assert!((analytic_distance(&p, &id, 8) - 1.0).abs() < 1e-15);
        let q = Germ::poly_additive(id.clone(), AddedTerm::Coefficients(vec![c(0.0), c(0.25), c(0.5)]), None)
            .unwrap();
        assert!((analytic_distance(&id, &q, 5) - 0.793_700_525_984_1).abs() < 1e-12);
    }

    #[test]
    fn tangency_examples() {
        let id = Germ::identity();
        let cube = Germ::poly_additive(id.clone(), AddedTerm::Coefficients(vec![c(0.0), c(0.0), c(1.0)]), None)
            .unwrap();
        assert_eq!(tangency_order(&cube, 8), 2);
        assert_eq!(tangency_order(&Germ::linear(c(2.0)).unwrap(), 8), 0);
        let tiny = Germ::poly_additive(
            id,
            AddedTerm::Coefficients(vec![c(0.0), c(1e-15), c(0.0), c(1.0)]),
            None,
        )
        .unwrap();
        assert_eq!(tangency_order(&tiny, 8), 3);
    }

    #[test]
    fn torsion_examples() {
        assert!(verify_torsion(&Germ::linear(c(-1.0)).unwrap(), 2).unwrap());
        assert!(!verify_torsion(&Germ::linear(C::i()).unwrap(), 2).unwrap());
        assert!(verify_torsion(&Germ::linear(C::i()).unwrap(), 4).unwrap());
        let m = Germ::mobius(c(1.0)).unwrap();
        for r in 1..6 {
            assert!(!verify_torsion(&m, r).unwrap());
        }
        // Order 2 is a proper divisor of 4.
        assert!(!verify_torsion(&Germ::linear(c(-1.0)).unwrap(), 4).unwrap());
        assert!(Germ::linear(C::i()).unwrap().with_torsion(3).is_err());
    }

    #[test]
    fn factored_term_matches_monomials() {
        let t = AddedTerm::Factored { scale: C::new(2.0, -1.0), order: 2, roots: vec![c(1.0), C::new(0.0, 0.5)] };
        let m = AddedTerm::Coefficients(t.monomials());
        for z in circle(0.7, 9) {
            let (a, da) = t.eval_d(z);
            let (b, db) = m.eval_d(z);
            assert!(close(a, b, 1e-14) && close(da, db, 1e-13));
        }
        assert!(AddedTerm::Factored { scale: c(1.0), order: 0, roots: vec![c(1.0)] }.validate().is_err());
    }

    #[test]
    fn coefficient_term_derivative() {
        let t = AddedTerm::Coefficients(vec![c(1.0), c(2.0), c(3.0)]);
        let z = C::new(0.2, -0.3);
        let (v, d) = t.eval_d(z);
        assert!(close(v, z + c(2.0) * z * z + c(3.0) * z.powu(3), 1e-15));
        assert!(close(d, c(1.0) + c(4.0) * z + c(9.0) * z * z, 1e-15));
    }

    #[test]
    fn disk_membership() {
        let d = DiskDomain::centered(0.5);
        assert!(!d.contains(c(0.5)));
        assert!(DiskDomain::new(C::default(), 0.5, true).contains(c(0.5)));
        assert!(d.contains_relaxed(c(0.55), 0.1));
    }
}
