//! Pseudogroup elements: reduced words bound to a generator pair and a base
//! disc, with the recursive domain of definition.

use num_complex::Complex64 as C;
use serde::Serialize;
use thiserror::Error;

use crate::germ::{verify_torsion, DiskDomain, Germ, GermError};
use crate::jet::Jet;
use crate::word::{Letter, Orders, ReducedWord, Syllable};

/// Conjugators given without a radius (the identity, say) are restricted to
/// this multiple of the base radius.
pub const CONJUGATOR_RADIUS_FACTOR: f64 = 2.0;
/// Shrink applied to conjugator radii for their closed sub-domains.
pub const CLOSED_SHRINK: f64 = 0.9;
/// Unbounded conjugators also reach this multiple of the largest core image
/// of the base circle.
pub const IMAGE_MARGIN: f64 = 1.6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PgError {
    #[error("point leaves the domain after {index} letters (at {point})")]
    OutOfDomain { index: usize, point: C },
    #[error(transparent)]
    Germ(GermError),
    #[error("invalid generator pair: {0}")]
    InvalidPair(String),
}

/// Which membership test applies between letters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Closure {
    /// `|z| < R`: the pseudogroup itself.
    Open,
    /// `|z| <= R`: domains over the closed disc.
    Closed,
    /// `|z| <= R + ε`: holomorphic extension past the closed domain.
    Extended(f64),
}

impl Closure {
    pub fn admits(self, z: C, radius: f64) -> bool {
        let d = z.norm();
        match self {
            Closure::Open => d < radius,
            Closure::Closed => d <= radius,
            Closure::Extended(eps) => d <= radius + eps,
        }
    }
}

/// `h⁻¹ ∘ core ∘ h`, or just `core` when the conjugator is the identity.
#[derive(Debug, Clone)]
pub struct Generator {
    core: Germ,
    core_inv: Germ,
    conjugator: Germ,
    conjugator_inv: Germ,
    plain: bool,
}

impl Generator {
    pub fn new(core: Germ, conjugator: Germ) -> Result<Self, GermError> {
        let plain = conjugator.is_identity();
        Ok(Generator {
            core_inv: core.inverse()?,
            conjugator_inv: conjugator.inverse()?,
            core,
            conjugator,
            plain,
        })
    }

    pub fn plain(core: Germ) -> Result<Self, GermError> {
        Generator::new(core, Germ::identity())
    }

    pub fn core(&self) -> &Germ {
        &self.core
    }

    pub fn conjugator(&self) -> &Germ {
        &self.conjugator
    }

    pub fn conjugator_inverse(&self) -> &Germ {
        &self.conjugator_inv
    }

    pub fn is_plain(&self) -> bool {
        self.plain
    }

    /// Value and derivative of the generator (or its inverse) at `z`.
    /// Conjugated generators run `h`, the core and `h⁻¹` as three steps, each
    /// restricted to the `0.9 ρ` sub-disc of the conjugator in play.
    pub fn apply(&self, z: C, inverse: bool, closure: Closure) -> Result<(C, C), GermError> {
        let core = if inverse { &self.core_inv } else { &self.core };
        if self.plain {
            return core.eval_d(z);
        }
        let guard = |g: &Germ, p: C| -> Result<(), GermError> {
            let r = CLOSED_SHRINK * g.radius();
            if closure.admits(p, r) {
                Ok(())
            } else {
                Err(GermError::OutOfDomain { z: p, radius: r })
            }
        };
        guard(&self.conjugator, z)?;
        let (w, dw) = self.conjugator.eval_d(z)?;
        let (v, dv) = core.eval_d(w)?;
        guard(&self.conjugator_inv, v)?;
        let (u, du) = self.conjugator_inv.eval_d(v)?;
        Ok((u, du * dv * dw))
    }
}

/// `(f̃, g̃)` with the base disc `D` and the orders of the cores.
#[derive(Debug, Clone)]
pub struct GeneratorPair {
    f: Generator,
    g: Generator,
    disc: DiskDomain,
    orders: Orders,
}

impl GeneratorPair {
    /// Validates that both generators and their inverses evaluate on a
    /// neighbourhood of the closed disc and fix 0, and that declared finite
    /// orders hold.
    pub fn new(f: Generator, g: Generator, radius: f64, orders: Orders) -> Result<Self, PgError> {
        if !(radius > 0.0) {
            return Err(PgError::InvalidPair(format!("disc radius {radius} must be positive")));
        }
        let bound = |gen: Generator| -> Result<Generator, PgError> {
            if gen.conjugator.radius().is_finite() {
                return Ok(gen);
            }
            // The conjugator must also cover the core images of the disc,
            // with room for the shrink of its inverse's radius.
            let reach = (0..64)
                .map(|k| C::from_polar(radius, std::f64::consts::TAU * (k as f64 + 0.5) / 64.0))
                .flat_map(|z| [gen.core.evaluate(z), gen.core_inv.evaluate(z)])
                .map(|v| v.map_or(f64::INFINITY, |v| v.norm()))
                .fold(radius, f64::max);
            let cap = (CONJUGATOR_RADIUS_FACTOR * radius / CLOSED_SHRINK).max(IMAGE_MARGIN * reach);
            let h = gen.conjugator.with_radius(cap);
            Generator::new(gen.core.clone(), h).map_err(PgError::Germ)
        };
        let pair = GeneratorPair {
            f: bound(f)?,
            g: bound(g)?,
            disc: DiskDomain::centered(radius),
            orders,
        };
        pair.validate()?;
        Ok(pair)
    }

    fn validate(&self) -> Result<(), PgError> {
        let r = self.disc.radius;
        let probe: Vec<C> = (0..64)
            .map(|k| C::from_polar(r * (1.0 + 1e-9), std::f64::consts::TAU * (k as f64 + 0.5) / 64.0))
            .chain((0..16).map(|k| C::from_polar(r * 0.5, std::f64::consts::TAU * k as f64 / 16.0)))
            .collect();
        for letter in [Letter::A, Letter::B] {
            let gen = self.generator(letter);
            for inverse in [false, true] {
                let (v, _) = gen
                    .apply(C::default(), inverse, Closure::Extended(1e-9))
                    .map_err(|e| PgError::InvalidPair(format!("{letter}: {e}")))?;
                if v.norm() > 1e-12 {
                    return Err(PgError::InvalidPair(format!("{letter} does not fix 0")));
                }
                for &z in &probe {
                    gen.apply(z, inverse, Closure::Extended(2e-9)).map_err(|e| {
                        let sign = if inverse { "^-1" } else { "" };
                        PgError::InvalidPair(format!("{letter}{sign} is not defined near the closed disc: {e}"))
                    })?;
                }
            }
            if let Some(n) = self.orders.of(letter) {
                let ok = verify_torsion(gen.core(), n).map_err(PgError::Germ)?;
                if !ok {
                    return Err(PgError::InvalidPair(format!("{letter} does not have order {n}")));
                }
            }
        }
        Ok(())
    }

    pub fn generator(&self, letter: Letter) -> &Generator {
        match letter {
            Letter::A => &self.f,
            Letter::B => &self.g,
        }
    }

    pub fn f(&self) -> &Generator {
        &self.f
    }

    pub fn g(&self) -> &Generator {
        &self.g
    }

    pub fn disc(&self) -> DiskDomain {
        self.disc
    }

    pub fn radius(&self) -> f64 {
        self.disc.radius
    }

    pub fn orders(&self) -> Orders {
        self.orders
    }

    /// Same pair with one conjugator replaced, re-validated.
    pub fn with_conjugator(&self, letter: Letter, h: Germ) -> Result<Self, PgError> {
        let gen = Generator::new(self.generator(letter).core.clone(), h).map_err(PgError::Germ)?;
        let mut next = self.clone();
        match letter {
            Letter::A => next.f = gen,
            Letter::B => next.g = gen,
        }
        next.validate()?;
        Ok(next)
    }

    pub fn element(&self, word: ReducedWord, closure: Closure) -> PseudogroupElement {
        PseudogroupElement { word, pair: self.clone(), closure }
    }

    /// Taylor jet at 0 of the germ a word defines, through order `k`.
    pub fn word_jet(&self, word: &ReducedWord, k: usize) -> Jet {
        let letter_jet = |letter: Letter, inverse: bool| -> Jet {
            let gen = self.generator(letter);
            let core = gen.core().taylor_jet(k);
            let core = if inverse { core.reversion().expect("cores are invertible") } else { core };
            if gen.is_plain() {
                return core;
            }
            let h = gen.conjugator().taylor_jet(k);
            let h_inv = h.reversion().expect("conjugators are invertible");
            h_inv.compose(&core.compose(&h))
        };
        let mut acc = Jet::identity(k);
        for syl in word.syllables() {
            let step = letter_jet(syl.letter, syl.exp < 0);
            for _ in 0..syl.exp.unsigned_abs() {
                acc = step.compose(&acc);
            }
        }
        acc
    }

    /// Applies one signed letter; the membership test before it is the
    /// caller's business.
    pub fn apply_letter(&self, letter: Letter, inverse: bool, z: C, closure: Closure) -> Result<(C, C), GermError> {
        self.generator(letter).apply(z, inverse, closure)
    }

    /// Walks `syllables` (application order) from `z`. The start point and
    /// every intermediate point must pass the membership test; the final
    /// point is unconstrained. `on_syllable` sees the point after each
    /// syllable.
    pub fn walk(
        &self,
        syllables: &[Syllable],
        closure: Closure,
        z: C,
        mut on_syllable: impl FnMut(C),
    ) -> Result<(C, C), PgError> {
        let r = self.disc.radius;
        let mut p = z;
        let mut d = C::new(1.0, 0.0);
        let mut index = 0usize;
        for s in syllables {
            let gen = self.generator(s.letter);
            let inverse = s.exp < 0;
            for _ in 0..s.exp.unsigned_abs() {
                if !closure.admits(p, r) {
                    return Err(PgError::OutOfDomain { index, point: p });
                }
                let (q, dq) = gen.apply(p, inverse, closure).map_err(|e| match e {
                    GermError::OutOfDomain { .. } => PgError::OutOfDomain { index, point: p },
                    other => PgError::Germ(other),
                })?;
                p = q;
                d *= dq;
                index += 1;
            }
            on_syllable(p);
        }
        if syllables.is_empty() && !closure.admits(p, r) {
            return Err(PgError::OutOfDomain { index: 0, point: p });
        }
        Ok((p, d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Syllable,
    Letter,
}

/// Points visited by a word from a start point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Itinerary {
    pub points: Vec<C>,
    pub granularity: Granularity,
    pub success: bool,
    /// Syllables (or letters) applied before the failure.
    pub failing_index: Option<usize>,
}

/// A reduced word bound to a generator pair.
#[derive(Debug, Clone)]
pub struct PseudogroupElement {
    word: ReducedWord,
    pair: GeneratorPair,
    closure: Closure,
}

impl PseudogroupElement {
    pub fn word(&self) -> &ReducedWord {
        &self.word
    }

    pub fn pair(&self) -> &GeneratorPair {
        &self.pair
    }

    pub fn closure(&self) -> Closure {
        self.closure
    }

    pub fn with_closure(&self, closure: Closure) -> Self {
        PseudogroupElement { closure, ..self.clone() }
    }

    /// The same letterwise evaluation with every membership test relaxed by
    /// `eps`; `eps = 0` is the closed-domain evaluation.
    pub fn extension_neighborhood(&self, eps: f64) -> Self {
        self.with_closure(Closure::Extended(eps))
    }

    /// Letter-by-letter evaluation; the error carries the number of letters
    /// applied before leaving the domain.
    pub fn apply(&self, z: C) -> Result<C, PgError> {
        self.eval_d(z).map(|(v, _)| v)
    }

    pub fn eval_d(&self, z: C) -> Result<(C, C), PgError> {
        self.pair.walk(self.word.syllables(), self.closure, z, |_| {})
    }

    pub fn contains(&self, z: C) -> bool {
        self.apply(z).is_ok()
    }

    pub fn itinerary(&self, z: C, granularity: Granularity) -> Itinerary {
        match granularity {
            Granularity::Syllable => {
                let mut points = vec![z];
                let res = self.pair.walk(self.word.syllables(), self.closure, z, |p| points.push(p));
                let failing_index = res.as_ref().err().map(|_| points.len() - 1);
                Itinerary { points, granularity, success: res.is_ok(), failing_index }
            }
            Granularity::Letter => {
                let singles: Vec<Syllable> = self
                    .word
                    .letters()
                    .iter()
                    .map(|l| Syllable::new(l.letter, if l.inverse { -1 } else { 1 }))
                    .collect();
                let mut points = vec![z];
                let res = self.pair.walk(&singles, self.closure, z, |p| points.push(p));
                let failing_index = res.as_ref().err().map(|_| points.len() - 1);
                Itinerary { points, granularity, success: res.is_ok(), failing_index }
            }
        }
    }

    /// Membership on an odd `m × m` grid over the square around `D`
    /// (`m = n` rounded up to odd, so the centre is a grid point), restricted
    /// to points of the open disc.
    pub fn domain_sample(&self, n: usize) -> Vec<DomainSample> {
        assert!(n >= 8, "resolution must be at least 8");
        let m = n | 1;
        let r = self.pair.radius();
        let coord = |i: usize| -r + 2.0 * r * i as f64 / (m - 1) as f64;
        let row = |j: usize| -> Vec<DomainSample> {
            let y = coord(j);
            (0..m)
                .filter_map(|i| {
                    let x = coord(i);
                    let z = C::new(x, y);
                    (z.norm() < r).then(|| DomainSample { x, y, in_domain: self.contains(z) })
                })
                .collect()
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..m).into_par_iter().map(row).collect::<Vec<_>>().concat()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..m).map(row).collect::<Vec<_>>().concat()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainSample {
    pub x: f64,
    pub y: f64,
    pub in_domain: bool,
}
