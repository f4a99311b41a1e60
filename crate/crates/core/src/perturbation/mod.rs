//! Perturbations of the conjugators that break periodic points, separate
//! itineraries and split common fixed points of two words.
//!
//! Every step has the form `h ← h + t z^{α+1} P(z)` with `P` a vanishing
//! interpolant, and every step is accepted only after numerical
//! verification; the verification residuals go into a JSON transcript.

mod interpolant;

pub use interpolant::{
    dedup_nodes, perturb_conjugator, t_grid, vanishing_interpolant, Anchor, PerturbationStep, VanishingInterpolant,
    NODE_GAP,
};

use std::collections::BTreeMap;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixed_points::{
    common_fixed_points, displacement_winding, isolate_fixed_points, match_records, Contour, FixedPointError,
    FixedPointOptions,
};
use crate::germ::DiskDomain;
use crate::pseudogroup::{Closure, GeneratorPair, PgError};
use crate::word::{Letter, ReducedWord};

pub type Residuals = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranscriptEntry {
    pub stage: String,
    pub word: String,
    pub target: Letter,
    pub generator: u8,
    pub t: f64,
    pub alpha: u32,
    pub zeros: Vec<C>,
    pub anchor: C,
    pub anchor_value: C,
    pub residuals: Residuals,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Transcript {
    pub case_path: Vec<String>,
    pub steps: Vec<TranscriptEntry>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerturbationError {
    #[error("interpolation nodes closer than the gap threshold (gap {gap:e})")]
    DegenerateNodes { gap: f64 },
    #[error("perturbed conjugator is not injective: {0}")]
    InjectivityLoss(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("words are commensurable (common root {root})")]
    Commensurable { root: String },
    #[error("no admissible t for {stage}: {reason}")]
    NoAdmissibleStep { stage: String, reason: String },
    #[error("budget exhausted: {reason}")]
    BudgetExhausted { reason: String, transcript: Box<Transcript> },
    #[error(transparent)]
    Pair(#[from] PgError),
    #[error(transparent)]
    FixedPoint(#[from] FixedPointError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationOptions {
    pub alpha: u32,
    /// Maximum number of accepted perturbation steps.
    pub budget: usize,
    /// Displacement below which a point counts as fixed.
    pub fixed_tol: f64,
    /// Itinerary points closer than this count as colliding.
    pub distinct: f64,
    pub max_depth: usize,
    pub fixed_points: FixedPointOptions,
}

impl Default for PerturbationOptions {
    fn default() -> Self {
        PerturbationOptions {
            alpha: 0,
            budget: 64,
            fixed_tol: 1e-8,
            distinct: 1e-7,
            max_depth: 6,
            fixed_points: FixedPointOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItineraryMode {
    /// `q_0 ≠ q_l`; the endpoint `q_l` is kept.
    FreeEndpoint,
    /// `q_0 = q_l` and the word is cyclically reduced.
    PinnedEndpoint,
    /// `w = W3⁻¹ W4 W3`; the returning half of the itinerary is exempt.
    Conjugate,
}

#[derive(Debug, Clone)]
pub struct PerturbationOutcome {
    pub pair: GeneratorPair,
    pub steps: Vec<PerturbationStep>,
    pub transcript: Transcript,
}

impl PerturbationOutcome {
    pub fn transcript_json(&self) -> String {
        serde_json::to_string(&self.transcript).expect("transcript serializes")
    }
}

/// Case labels of the splitting procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SplitCase {
    LongerCore,
    EqualCoreConjugated,
    FirstLetterMismatch,
    FirstExponentMismatch,
    CommonPrefix,
    ShorterCoreConjugation,
}

impl SplitCase {
    fn label(self) -> &'static str {
        match self {
            SplitCase::LongerCore => "longer-core",
            SplitCase::EqualCoreConjugated => "equal-core-conjugated",
            SplitCase::FirstLetterMismatch => "first-letter-mismatch",
            SplitCase::FirstExponentMismatch => "first-exponent-mismatch",
            SplitCase::CommonPrefix => "common-prefix",
            SplitCase::ShorterCoreConjugation => "shorter-core-conjugation",
        }
    }
}

fn near(a: C, b: C, tol: f64) -> bool {
    (a - b).norm() <= tol
}

/// First index `j` in `1..upto` whose point is within `tol` of an earlier
/// point or of a pin.
fn first_collision(pts: &[C], upto: usize, pins: &[C], tol: f64) -> Option<usize> {
    (1..upto).find(|&j| pts[..j].iter().chain(pins).any(|p| near(pts[j], *p, tol)))
}

fn all_distinct(pts: &[C], pins: &[C], tol: f64) -> bool {
    first_collision(pts, pts.len(), pins, tol).is_none()
}

fn max_dev(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Success criterion of a split at `q`, evaluated on the original words.
struct Goal {
    wi: ReducedWord,
    wj: ReducedWord,
    q: C,
    delta: f64,
    winding: i64,
    /// Balls already split that must stay split.
    guards: Vec<(C, f64)>,
    opts: FixedPointOptions,
}

impl Goal {
    fn check(&self, pair: &GeneratorPair) -> Option<Residuals> {
        let closure = Closure::Extended(self.delta);
        let ei = pair.element(self.wi.clone(), closure);
        let ej = pair.element(self.wj.clone(), closure);
        let ball = DiskDomain::new(self.q, self.delta, false);
        let ri = isolate_fixed_points(&ei, ball, &self.opts).ok()?;
        let rj = isolate_fixed_points(&ej, ball, &self.opts).ok()?;
        if !match_records(&ri, &rj, self.opts.match_tol()).is_empty() {
            return None;
        }
        let w = displacement_winding(&ei, &Contour::circle(self.q, self.delta), &self.opts).ok()?;
        if w != self.winding {
            return None;
        }
        for &(c, r) in &self.guards {
            let ball = DiskDomain::new(c, r, false);
            if !common_fixed_points(&ei, &ej, ball, &self.opts).ok()?.is_empty() {
                return None;
            }
        }
        let mut res = Residuals::new();
        res.insert("displacement_i".into(), ei.apply(self.q).map_or(f64::NAN, |v| (v - self.q).norm()));
        res.insert("displacement_j".into(), ej.apply(self.q).map_or(f64::NAN, |v| (v - self.q).norm()));
        let gap = ri
            .iter()
            .flat_map(|a| rj.iter().map(move |b| (a.location - b.location).norm()))
            .fold(f64::INFINITY, f64::min);
        res.insert("min_fixed_point_distance".into(), if gap.is_finite() { gap } else { -1.0 });
        res.insert("winding_i".into(), w as f64);
        Some(res)
    }
}

struct Engine<'a> {
    opts: &'a PerturbationOptions,
    steps: Vec<PerturbationStep>,
    transcript: Transcript,
    /// Upper bound on grid values of `t`.
    t_cap: f64,
}

type Verify<'v> = &'v dyn Fn(&GeneratorPair) -> Option<Residuals>;

impl<'a> Engine<'a> {
    fn new(opts: &'a PerturbationOptions) -> Self {
        Engine { opts, steps: Vec::new(), transcript: Transcript::default(), t_cap: f64::INFINITY }
    }

    fn finish(self, pair: GeneratorPair) -> PerturbationOutcome {
        PerturbationOutcome { pair, steps: self.steps, transcript: self.transcript }
    }

    fn exhausted(&self, reason: String) -> PerturbationError {
        PerturbationError::BudgetExhausted { reason, transcript: Box::new(self.transcript.clone()) }
    }

    /// Syllable itinerary `q_0..q_l` under the open-domain semantics.
    fn chain(&self, pair: &GeneratorPair, word: &ReducedWord, z: C) -> Result<Vec<C>, PerturbationError> {
        let mut pts = vec![z];
        pair.walk(word.syllables(), Closure::Open, z, |p| pts.push(p))
            .map_err(|e| PerturbationError::Precondition(format!("itinerary of {word} from {z} fails: {e}")))?;
        Ok(pts)
    }

    fn chain_opt(pair: &GeneratorPair, word: &ReducedWord, z: C) -> Option<Vec<C>> {
        let mut pts = vec![z];
        pair.walk(word.syllables(), Closure::Open, z, |p| pts.push(p)).ok()?;
        Some(pts)
    }

    /// One accepted step: `t` from the grid (largest first) or fixed, the
    /// first candidate passing `verify` wins.
    #[allow(clippy::too_many_arguments)]
    fn perturb(
        &mut self,
        pair: &GeneratorPair,
        stage: &str,
        word: &ReducedWord,
        target: Letter,
        zeros: &[C],
        anchor: C,
        value: C,
        fixed_t: Option<f64>,
        verify: Verify<'_>,
    ) -> Result<GeneratorPair, PerturbationError> {
        if self.steps.len() >= self.opts.budget {
            return Err(self.exhausted(format!("step budget {} used up", self.opts.budget)));
        }
        let zeros = dedup_nodes(zeros, NODE_GAP);
        let interp = vanishing_interpolant(&zeros, Anchor { point: anchor, value })?;
        let h = pair.generator(target).conjugator().clone();
        let cap = self.t_cap;
        let grid = fixed_t.map_or_else(|| t_grid().into_iter().filter(|t| *t <= cap).collect(), |t| vec![t]);
        let mut last = String::from("empty grid");
        for t in grid {
            let step = PerturbationStep { target, interpolant: interp.clone(), t, alpha: self.opts.alpha };
            let ht = match perturb_conjugator(&h, &step) {
                Ok(g) => g,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let next = match pair.with_conjugator(target, ht.clone()) {
                Ok(p) => p,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let Some(mut res) = verify(&next) else {
                last = format!("verification failed down to t = {t:e}");
                continue;
            };
            let pin = zeros
                .iter()
                .map(|z| match (ht.evaluate(*z), h.evaluate(*z)) {
                    (Ok(a), Ok(b)) => (a - b).norm(),
                    _ => f64::NAN,
                })
                .fold(0.0, f64::max);
            res.insert("pin_max".into(), pin);
            self.transcript.steps.push(TranscriptEntry {
                stage: stage.to_string(),
                word: word.to_string(),
                target,
                generator: step.generator_index(),
                t,
                alpha: self.opts.alpha,
                zeros: zeros.clone(),
                anchor,
                anchor_value: value,
                residuals: res,
            });
            self.steps.push(step);
            return Ok(next);
        }
        Err(PerturbationError::NoAdmissibleStep { stage: stage.to_string(), reason: last })
    }

    /// Breaks the first collision of `pts` (an itinerary of `word`) at index
    /// `j`: zeros on `q_0..q_{j−2}` and the pins, anchor `q_{j−1}`, target the
    /// letter of syllable `j`.
    #[allow(clippy::too_many_arguments)]
    fn break_collision(
        &mut self,
        pair: &GeneratorPair,
        stage: &str,
        word: &ReducedWord,
        start: C,
        pts: &[C],
        j: usize,
        pins: &[C],
        guard: &[C],
    ) -> Result<GeneratorPair, PerturbationError> {
        let distinct = self.opts.distinct;
        let mut zeros: Vec<C> = pts[..j - 1].to_vec();
        zeros.extend(pins.iter().filter(|e| !near(**e, pts[j - 1], NODE_GAP)));
        let target = word.syllables()[j - 1].letter;
        let prefix = pts[..j].to_vec();
        let verify = |p: &GeneratorPair| -> Option<Residuals> {
            let c = Self::chain_opt(p, word, start)?;
            let dev = max_dev(&c[..j], &prefix);
            let sep = c[..j].iter().chain(guard).map(|x| (c[j] - x).norm()).fold(f64::INFINITY, f64::min);
            (dev < 1e-9 && sep > distinct).then(|| {
                Residuals::from([("prefix_drift".to_string(), dev), ("separation".to_string(), sep)])
            })
        };
        self.perturb(pair, stage, word, target, &zeros, pts[j - 1], C::new(1.0, 0.0), None, &verify)
    }

    /// Makes `q_0..q_{l−1}` distinct (and distinct from the pins), then moves
    /// `W(q)` off `q` through the last syllable.
    fn break_periodic(
        &mut self,
        pair: &GeneratorPair,
        word: &ReducedWord,
        q: C,
        pins: &[C],
    ) -> Result<GeneratorPair, PerturbationError> {
        if q.norm() <= NODE_GAP {
            return Err(PerturbationError::Precondition("q = 0 is fixed by every word".into()));
        }
        if word.is_identity() {
            return Err(PerturbationError::Precondition("the identity fixes every point".into()));
        }
        let l = word.len();
        let moved = 10.0 * self.opts.fixed_tol;
        let mut pair = pair.clone();
        for _ in 0..4 * l + 4 {
            let pts = self.chain(&pair, word, q)?;
            if (pts[l] - q).norm() > moved {
                return Ok(pair);
            }
            if let Some(j) = first_collision(&pts, l, pins, self.opts.distinct) {
                pair = self.break_collision(&pair, "break-collision", word, q, &pts, j, pins, pins)?;
                continue;
            }
            let mut zeros: Vec<C> = pts[..l - 1].to_vec();
            zeros.extend_from_slice(pins);
            let target = word.syllables()[l - 1].letter;
            let prefix = pts[..l].to_vec();
            let verify = |p: &GeneratorPair| -> Option<Residuals> {
                let c = Self::chain_opt(p, word, q)?;
                let dev = max_dev(&c[..l], &prefix);
                let disp = (c[l] - q).norm();
                (dev < 1e-9 && disp > moved)
                    .then(|| Residuals::from([("prefix_drift".to_string(), dev), ("displacement".to_string(), disp)]))
            };
            return self.perturb(&pair, "break-periodic", word, target, &zeros, pts[l - 1], C::new(1.0, 0.0), None, &verify);
        }
        Err(self.exhausted(format!("collisions of {word} kept reappearing")))
    }

    /// Correction step: sets `h̃_X(q) = h_X(c_l)` with zeros on `zeros`, so
    /// the reversed chain ends exactly at `q` again.
    #[allow(clippy::too_many_arguments)]
    fn correct_endpoint(
        &mut self,
        pair: &GeneratorPair,
        stage: &str,
        word: &ReducedWord,
        letter: Letter,
        q: C,
        reached: C,
        zeros: &[C],
        verify: Verify<'_>,
    ) -> Result<GeneratorPair, PerturbationError> {
        if (reached - q).norm() < 1e-15 {
            return Ok(pair.clone());
        }
        let h = pair.generator(letter).conjugator();
        let hv = |z: C| h.evaluate(z).map_err(|e| PerturbationError::Precondition(e.to_string()));
        let value = (hv(reached)? - hv(q)?) / q.powu(self.opts.alpha + 1);
        self.perturb(pair, stage, word, letter, zeros, q, value, Some(1.0), verify)
    }

    /// Runs a two-stage separation, shrinking the first-stage `t` when the
    /// endpoint correction it forces is too large to stay injective.
    fn with_shrinking_t(
        &mut self,
        pair: &GeneratorPair,
        mut run: impl FnMut(&mut Self, &GeneratorPair) -> Result<GeneratorPair, PerturbationError>,
    ) -> Result<GeneratorPair, PerturbationError> {
        let saved = self.t_cap;
        let mark = (self.steps.len(), self.transcript.steps.len());
        let mut result = Err(PerturbationError::Precondition("no attempt".into()));
        for cap in [saved, 1e-3, 1e-5, 1e-7] {
            if cap > saved {
                continue;
            }
            self.t_cap = cap;
            result = run(self, pair);
            match &result {
                Err(PerturbationError::NoAdmissibleStep { stage, .. }) if stage == "endpoint-correction" => {
                    self.steps.truncate(mark.0);
                    self.transcript.steps.truncate(mark.1);
                    self.transcript.notes.push(format!("endpoint correction too large; first stage t capped at {cap:e}"));
                }
                _ => break,
            }
        }
        self.t_cap = saved;
        result
    }

    fn disjoint_free(
        &mut self,
        pair: &GeneratorPair,
        word: &ReducedWord,
        q: C,
        pins: &[C],
    ) -> Result<GeneratorPair, PerturbationError> {
        self.with_shrinking_t(pair, |e, p| e.disjoint_free_once(p, word, q, pins))
    }

    fn disjoint_pinned(
        &mut self,
        pair: &GeneratorPair,
        word: &ReducedWord,
        q: C,
        pins: &[C],
    ) -> Result<GeneratorPair, PerturbationError> {
        self.with_shrinking_t(pair, |e, p| e.disjoint_pinned_once(p, word, q, pins))
    }

    fn disjoint_free_once(
        &mut self,
        pair: &GeneratorPair,
        word: &ReducedWord,
        q: C,
        pins: &[C],
    ) -> Result<GeneratorPair, PerturbationError> {
        let l = word.len();
        let distinct = self.opts.distinct;
        let pts = self.chain(pair, word, q)?;
        if l == 0 || all_distinct(&pts, pins, distinct) {
            return Ok(pair.clone());
        }
        let ql = pts[l];
        if near(ql, q, distinct) {
            return Err(PerturbationError::Precondition("free-endpoint mode needs q_0 ≠ q_l".into()));
        }
        let wbar = word.inverse();
        let mut guard = pins.to_vec();
        guard.push(q);
        let mut pair = pair.clone();
        let mut settled = false;
        for _ in 0..4 * l + 4 {
            let c = self.chain(&pair, &wbar, ql)?;
            match first_collision(&c, l, &guard, distinct) {
                Some(j) => pair = self.break_collision(&pair, "disjoint-reversed", &wbar, ql, &c, j, pins, &guard)?,
                None => {
                    settled = true;
                    break;
                }
            }
        }
        if !settled {
            return Err(self.exhausted(format!("collisions of {wbar} kept reappearing")));
        }
        let c = self.chain(&pair, &wbar, ql)?;
        let letter = wbar.syllables()[l - 1].letter;
        let mut zeros: Vec<C> = c[..l].to_vec();
        zeros.extend_from_slice(pins);
        let verify = |p: &GeneratorPair| -> Option<Residuals> {
            let w = Self::chain_opt(p, word, q)?;
            let drift = (w[l] - ql).norm();
            (drift < 1e-9 * (1.0 + ql.norm()) && all_distinct(&w, pins, distinct))
                .then(|| Residuals::from([("endpoint_drift".to_string(), drift)]))
        };
        self.correct_endpoint(&pair, "endpoint-correction", word, letter, q, c[l], &zeros, &verify)
    }

    fn disjoint_pinned_once(
        &mut self,
        pair: &GeneratorPair,
        word: &ReducedWord,
        q: C,
        pins: &[C],
    ) -> Result<GeneratorPair, PerturbationError> {
        let l = word.len();
        let distinct = self.opts.distinct;
        if l <= 1 {
            return Ok(pair.clone());
        }
        if !word.is_cyclically_reduced() {
            return Err(PerturbationError::Precondition(format!("{word} is conjugate to a shorter word")));
        }
        let pts = self.chain(pair, word, q)?;
        if !near(pts[l], q, 10.0 * self.opts.fixed_tol) {
            return Err(PerturbationError::Precondition(format!("{word} does not fix {q}")));
        }
        if all_distinct(&pts[..l], pins, distinct) {
            return Ok(pair.clone());
        }
        let wbar = word.inverse();
        let mut pair = pair.clone();
        let mut settled = false;
        for _ in 0..4 * l + 4 {
            let c = self.chain(&pair, &wbar, q)?;
            match first_collision(&c, l, pins, distinct) {
                Some(j) => pair = self.break_collision(&pair, "disjoint-reversed", &wbar, q, &c, j, pins, pins)?,
                None => {
                    settled = true;
                    break;
                }
            }
        }
        if !settled {
            return Err(self.exhausted(format!("collisions of {wbar} kept reappearing")));
        }
        let c = self.chain(&pair, &wbar, q)?;
        let letter = wbar.syllables()[l - 1].letter;
        let mut zeros: Vec<C> = c[1..l].to_vec();
        zeros.extend_from_slice(pins);
        let verify = |p: &GeneratorPair| -> Option<Residuals> {
            let w = Self::chain_opt(p, word, q)?;
            let drift = (w[l] - q).norm();
            (drift < 1e-9 * (1.0 + q.norm()) && all_distinct(&w[..l], pins, distinct))
                .then(|| Residuals::from([("endpoint_drift".to_string(), drift)]))
        };
        self.correct_endpoint(&pair, "endpoint-correction", word, letter, q, c[l], &zeros, &verify)
    }

    /// `w = W3⁻¹ W4 W3`: pinned mode on `W4` at `p = W3(q)`, then free mode on
    /// `W3`. The points of the returning `W3⁻¹` leg are not required distinct.
    fn disjoint_conjugate(
        &mut self,
        pair: &GeneratorPair,
        word: &ReducedWord,
        q: C,
        pins: &[C],
    ) -> Result<GeneratorPair, PerturbationError> {
        let mc = word.minimal_conjugate();
        if mc.w3.is_identity() {
            return self.disjoint_pinned(pair, word, q, pins);
        }
        let s0 = mc.w3.len();
        let w3 = self.chain(pair, &mc.w3, q)?;
        let p = w3[s0];
        let mut pins1 = pins.to_vec();
        pins1.extend_from_slice(&w3[..s0]);
        let pair = self.disjoint_pinned(pair, &mc.w4, p, &pins1)?;
        let w4 = self.chain(&pair, &mc.w4, p)?;
        let mut pins2 = pins.to_vec();
        pins2.extend_from_slice(&w4[1..mc.w4.len().max(1)]);
        if near(p, q, self.opts.distinct) {
            return Err(PerturbationError::Precondition(format!("{} fixes {q}", mc.w3)));
        }
        let pair = self.disjoint_free(&pair, &mc.w3, q, &pins2)?;
        let mut all = self.chain(&pair, &mc.w3, q)?;
        let w4 = self.chain(&pair, &mc.w4, p)?;
        all.extend_from_slice(&w4[1..mc.w4.len()]);
        if !all_distinct(&all, pins, self.opts.distinct) {
            return Err(self.exhausted(format!("itinerary of {word} still has collisions")));
        }
        Ok(pair)
    }

    fn disjoint(
        &mut self,
        pair: &GeneratorPair,
        word: &ReducedWord,
        q: C,
        mode: ItineraryMode,
        pins: &[C],
    ) -> Result<GeneratorPair, PerturbationError> {
        match mode {
            ItineraryMode::FreeEndpoint => self.disjoint_free(pair, word, q, pins),
            ItineraryMode::PinnedEndpoint => self.disjoint_pinned(pair, word, q, pins),
            ItineraryMode::Conjugate => self.disjoint_conjugate(pair, word, q, pins),
        }
    }

    /// Perturbs the letter of syllable `n+1` of `word` at its itinerary
    /// point `q_n`, with zeros on every other listed point.
    #[allow(clippy::too_many_arguments)]
    fn anchored_split(
        &mut self,
        pair: &GeneratorPair,
        stage: &str,
        word: &ReducedWord,
        itin: &[C],
        n: usize,
        others: &[C],
        goal: &Goal,
    ) -> Result<GeneratorPair, PerturbationError> {
        let anchor = itin[n];
        let zeros: Vec<C> = others.iter().copied().filter(|z| !near(*z, anchor, self.opts.distinct)).collect();
        let target = word.syllables()[n].letter;
        let verify = |p: &GeneratorPair| goal.check(p);
        self.perturb(pair, stage, word, target, &zeros, anchor, C::new(1.0, 0.0), None, &verify)
    }

    /// Tries anchors at points of `a`'s itinerary that `b`'s avoids.
    fn exclusive_split(
        &mut self,
        pair: &GeneratorPair,
        stage: &str,
        a: &ReducedWord,
        b: &ReducedWord,
        q: C,
        pins: &[C],
        goal: &Goal,
    ) -> Result<GeneratorPair, PerturbationError> {
        let ia = self.chain(pair, a, q)?;
        let ib = self.chain(pair, b, q)?;
        let mut others: Vec<C> = ia[..a.len()].to_vec();
        others.extend_from_slice(&ib[..b.len()]);
        others.extend_from_slice(pins);
        let mut last = PerturbationError::NoAdmissibleStep { stage: stage.into(), reason: "no exclusive point".into() };
        for n in 1..a.len() {
            if ib.iter().any(|p| near(*p, ia[n], self.opts.distinct)) {
                continue;
            }
            match self.anchored_split(pair, stage, a, &ia, n, &others, goal) {
                Ok(p) => return Ok(p),
                Err(e @ PerturbationError::BudgetExhausted { .. }) => return Err(e),
                Err(e) => last = e,
            }
        }
        Err(last)
    }

    /// Every itinerary point of either word as anchor, in order.
    fn generic_split(
        &mut self,
        pair: &GeneratorPair,
        words: [&ReducedWord; 2],
        q: C,
        pins: &[C],
        goal: &Goal,
    ) -> Result<GeneratorPair, PerturbationError> {
        let ia = self.chain(pair, words[0], q)?;
        let ib = self.chain(pair, words[1], q)?;
        let mut others: Vec<C> = ia[..words[0].len()].to_vec();
        others.extend_from_slice(&ib[..words[1].len()]);
        others.extend_from_slice(pins);
        let mut last = PerturbationError::NoAdmissibleStep { stage: "generic".into(), reason: "no anchors".into() };
        for (w, itin) in [(words[0], &ia), (words[1], &ib)] {
            for n in 0..w.len() {
                match self.anchored_split(pair, "generic-anchor", w, itin, n, &others, goal) {
                    Ok(p) => return Ok(p),
                    Err(e @ PerturbationError::BudgetExhausted { .. }) => return Err(e),
                    Err(e) => last = e,
                }
            }
        }
        Err(last)
    }

    fn classify(l: &ReducedWord, s: &ReducedWord) -> SplitCase {
        let mc = l.minimal_conjugate();
        let (lp, s0, m) = (mc.w4.len(), mc.w3.len(), s.len());
        if s0 > 0 && lp < m {
            SplitCase::ShorterCoreConjugation
        } else if l.len() > m {
            SplitCase::LongerCore
        } else if !l.is_cyclically_reduced() || !s.is_cyclically_reduced() {
            SplitCase::EqualCoreConjugated
        } else {
            let (x, y) = (l.syllables()[0], s.syllables()[0]);
            if x.letter != y.letter {
                SplitCase::FirstLetterMismatch
            } else if x.exp != y.exp {
                SplitCase::FirstExponentMismatch
            } else {
                SplitCase::CommonPrefix
            }
        }
    }

    /// Separates the itineraries of both words where possible; failures are
    /// noted, not fatal.
    fn preprocess(&mut self, pair: &GeneratorPair, a: &ReducedWord, b: &ReducedWord, q: C, pins: &[C]) -> GeneratorPair {
        let mut pair = pair.clone();
        for (w, v) in [(a, b), (b, a)] {
            let Some(iv) = Self::chain_opt(&pair, v, q) else { continue };
            let mut p: Vec<C> = iv[1..v.len()].to_vec();
            p.extend_from_slice(pins);
            p.retain(|z| !near(*z, q, self.opts.distinct));
            let mode = if w.is_cyclically_reduced() { ItineraryMode::PinnedEndpoint } else { ItineraryMode::Conjugate };
            let mark = (self.steps.len(), self.transcript.steps.len());
            match self.disjoint(&pair, w, q, mode, &p) {
                Ok(next) => pair = next,
                Err(e) => {
                    self.steps.truncate(mark.0);
                    self.transcript.steps.truncate(mark.1);
                    self.transcript.notes.push(format!("itinerary separation of {w} skipped: {e}"));
                }
            }
        }
        pair
    }

    #[allow(clippy::too_many_arguments)]
    fn dispatch(
        &mut self,
        pair: &GeneratorPair,
        wi: &ReducedWord,
        wj: &ReducedWord,
        q: C,
        pins: &[C],
        goal: &Goal,
        depth: usize,
    ) -> Result<GeneratorPair, PerturbationError> {
        if depth > self.opts.max_depth {
            return Err(PerturbationError::NoAdmissibleStep {
                stage: "dispatch".into(),
                reason: "case recursion too deep".into(),
            });
        }
        let (l, s) = if wi.len() >= wj.len() { (wi, wj) } else { (wj, wi) };
        let case = Self::classify(l, s);
        self.transcript.case_path.push(format!("{} ({l} | {s} at {q})", case.label()));
        match case {
            SplitCase::ShorterCoreConjugation => {
                let mc = l.minimal_conjugate();
                let p = *self.chain(pair, &mc.w3, q)?.last().expect("nonempty chain");
                let s2 = s.conjugate_by(&mc.w3.inverse());
                self.dispatch(pair, &mc.w4, &s2, p, pins, goal, depth + 1)
            }
            SplitCase::CommonPrefix => {
                let x = ReducedWord::from_syllables(&l.syllables()[..1], l.orders());
                let p = *self.chain(pair, &x, q)?.last().expect("nonempty chain");
                let xi = x.inverse();
                self.dispatch(pair, &l.conjugate_by(&xi), &s.conjugate_by(&xi), p, pins, goal, depth + 1)
            }
            SplitCase::LongerCore | SplitCase::EqualCoreConjugated => {
                let pair = self.preprocess(pair, l, s, q, pins);
                self.exclusive_split(&pair, case.label(), l, s, q, pins, goal)
                    .or_else(|_| self.exclusive_split(&pair, case.label(), s, l, q, pins, goal))
            }
            SplitCase::FirstLetterMismatch => {
                let pair = self.preprocess(pair, l, s, q, pins);
                let il = self.chain(&pair, l, q)?;
                let is = self.chain(&pair, s, q)?;
                let mut others: Vec<C> = il[..l.len()].to_vec();
                others.extend_from_slice(&is[..s.len()]);
                others.extend_from_slice(pins);
                self.anchored_split(&pair, case.label(), l, &il, 0, &others, goal)
                    .or_else(|_| self.anchored_split(&pair, case.label(), s, &is, 0, &others, goal))
                    .or_else(|_| self.exclusive_split(&pair, case.label(), l, s, q, pins, goal))
            }
            SplitCase::FirstExponentMismatch => {
                let pair = self.preprocess(pair, l, s, q, pins);
                if let Ok(p) = self.exclusive_split(&pair, case.label(), l, s, q, pins, goal) {
                    return Ok(p);
                }
                // Auxiliary shorter word through the point s reaches after
                // its first syllable.
                let il = self.chain(&pair, l, q)?;
                let is = self.chain(&pair, s, q)?;
                let first = ReducedWord::from_syllables(&s.syllables()[..1], s.orders());
                let n = (1..l.len()).find(|&n| near(il[n], is[1], self.opts.distinct));
                let Some(n) = n else {
                    return self.exclusive_split(&pair, case.label(), s, l, q, pins, goal);
                };
                let aux = first.inverse().concat(&l.slice(0..n));
                if aux.is_identity() || aux.len() >= s.len() || aux.commensurable(s).is_some() {
                    return self.exclusive_split(&pair, case.label(), s, l, q, pins, goal);
                }
                self.transcript.notes.push(format!("auxiliary word {aux} fixes {q}"));
                let sub = self.sub_goal(&pair, &aux, s, goal);
                let pair = match sub {
                    Some(sub) => self.dispatch(&pair, &aux, s, q, pins, &sub, depth + 1).unwrap_or(pair),
                    None => pair,
                };
                self.exclusive_split(&pair, case.label(), l, s, q, pins, goal)
                    .or_else(|_| self.exclusive_split(&pair, case.label(), s, l, q, pins, goal))
            }
        }
    }

    fn sub_goal(&self, pair: &GeneratorPair, a: &ReducedWord, b: &ReducedWord, goal: &Goal) -> Option<Goal> {
        let ea = pair.element(a.clone(), Closure::Extended(goal.delta));
        let winding = displacement_winding(&ea, &Contour::circle(goal.q, goal.delta), &goal.opts).ok()?;
        Some(Goal {
            wi: a.clone(),
            wj: b.clone(),
            q: goal.q,
            delta: goal.delta,
            winding,
            guards: Vec::new(),
            opts: goal.opts,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn split(
        &mut self,
        pair: &GeneratorPair,
        wi: &ReducedWord,
        wj: &ReducedWord,
        q: C,
        delta: f64,
        guards: Vec<(C, f64)>,
        pins: &[C],
    ) -> Result<GeneratorPair, PerturbationError> {
        if q.norm() <= NODE_GAP {
            return Err(PerturbationError::Precondition("q = 0 is common to every pair of words".into()));
        }
        if wi.is_identity() || wj.is_identity() {
            return Err(PerturbationError::Precondition("identity word".into()));
        }
        if let Some(root) = wi.commensurable_up_to_inverse(wj) {
            return Err(PerturbationError::Commensurable { root: root.to_string() });
        }
        let fp = self.opts.fixed_points;
        let fixed = 10.0 * self.opts.fixed_tol;
        for w in [wi, wj] {
            let v = pair
                .element(w.clone(), Closure::Open)
                .apply(q)
                .map_err(|e| PerturbationError::Precondition(format!("{q} not in the domain of {w}: {e}")))?;
            if !near(v, q, fixed) {
                return Err(PerturbationError::Precondition(format!("{w} does not fix {q}")));
            }
        }
        let ball = DiskDomain::new(q, delta, false);
        let closure = Closure::Extended(delta);
        for w in [wi, wj] {
            let recs = isolate_fixed_points(&pair.element(w.clone(), closure), ball, &fp)?;
            if recs.iter().any(|r| !near(r.location, q, 1e-6)) {
                return Err(PerturbationError::Precondition(format!("B({q}, {delta}) holds other fixed points of {w}")));
            }
        }
        let winding = displacement_winding(&pair.element(wi.clone(), closure), &Contour::circle(q, delta), &fp)?;
        let goal = Goal { wi: wi.clone(), wj: wj.clone(), q, delta, winding, guards, opts: fp };

        let reduce = |w: &ReducedWord| -> ReducedWord {
            let (root, n) = w.primitive_root();
            let fixes = n > 1
                && pair.element(root.clone(), Closure::Open).apply(q).map_or(false, |v| near(v, q, fixed));
            if fixes {
                root
            } else {
                w.clone()
            }
        };
        let (ai, aj) = (reduce(wi), reduce(wj));
        if ai != *wi || aj != *wj {
            self.transcript.notes.push(format!("reduced to primitive roots {ai} and {aj}"));
        }

        let mark = (self.steps.len(), self.transcript.steps.len());
        match self.dispatch(pair, &ai, &aj, q, pins, &goal, 0) {
            Ok(p) if goal.check(&p).is_some() => return Ok(p),
            Ok(_) => self.transcript.notes.push("case analysis left the point common".into()),
            Err(e @ PerturbationError::BudgetExhausted { .. }) => return Err(e),
            Err(e) => self.transcript.notes.push(format!("case analysis failed: {e}")),
        }
        self.steps.truncate(mark.0);
        self.transcript.steps.truncate(mark.1);
        self.transcript.case_path.push("generic-anchor".into());
        match self.generic_split(pair, [&ai, &aj], q, pins, &goal) {
            Ok(p) => Ok(p),
            Err(e @ PerturbationError::BudgetExhausted { .. }) => Err(e),
            Err(e) => Err(self.exhausted(format!("no verified split at {q}: {e}"))),
        }
    }
}

/// Perturbs one conjugator so that `word` no longer fixes `q`. Returns no
/// steps when `q` is already moved.
pub fn break_periodic_point(
    word: &ReducedWord,
    pair: &GeneratorPair,
    q: C,
    opts: &PerturbationOptions,
) -> Result<PerturbationOutcome, PerturbationError> {
    let mut engine = Engine::new(opts);
    let pts = engine.chain(pair, word, q)?;
    if !near(*pts.last().expect("nonempty chain"), q, 10.0 * opts.fixed_tol) && q.norm() > NODE_GAP {
        return Ok(engine.finish(pair.clone()));
    }
    let next = engine.break_periodic(pair, word, q, &[])?;
    Ok(engine.finish(next))
}

/// Makes the syllable itinerary of `q` pairwise distinct on the range the
/// mode demands, keeping its endpoint.
pub fn disjoint_itinerary(
    word: &ReducedWord,
    pair: &GeneratorPair,
    q: C,
    mode: ItineraryMode,
    opts: &PerturbationOptions,
) -> Result<PerturbationOutcome, PerturbationError> {
    let mut engine = Engine::new(opts);
    let next = engine.disjoint(pair, word, q, mode, &[])?;
    Ok(engine.finish(next))
}

/// Separates the fixed points of two incommensurable words near a common
/// fixed point `q ≠ 0`.
pub fn split_common_fixed_point(
    wi: &ReducedWord,
    wj: &ReducedWord,
    pair: &GeneratorPair,
    q: C,
    delta: f64,
    opts: &PerturbationOptions,
) -> Result<PerturbationOutcome, PerturbationError> {
    let mut engine = Engine::new(opts);
    let next = engine.split(pair, wi, wj, q, delta, Vec::new(), &[])?;
    Ok(engine.finish(next))
}

/// Splits every common fixed point other than 0 inside `region`, one ball at
/// a time; already split balls are re-verified at each later step.
pub fn eliminate_all_common_fixed_points(
    wi: &ReducedWord,
    wj: &ReducedWord,
    pair: &GeneratorPair,
    region: DiskDomain,
    opts: &PerturbationOptions,
) -> Result<PerturbationOutcome, PerturbationError> {
    let fp = opts.fixed_points;
    let mut engine = Engine::new(opts);
    let ei = pair.element(wi.clone(), Closure::Open);
    let ej = pair.element(wj.clone(), Closure::Open);
    let ri = isolate_fixed_points(&ei, region, &fp)?;
    let rj = isolate_fixed_points(&ej, region, &fp)?;
    let mut common: Vec<C> = match_records(&ri, &rj, fp.match_tol())
        .into_iter()
        .map(|(a, _)| a.location)
        .filter(|p| p.norm() > 1e-6)
        .collect();
    common.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)));
    if common.is_empty() {
        return Ok(engine.finish(pair.clone()));
    }
    let all: Vec<C> = ri.iter().chain(&rj).map(|r| r.location).collect();
    let radius_for = |q: C| -> f64 {
        let other = all
            .iter()
            .filter(|p| !near(**p, q, fp.match_tol()))
            .map(|p| (p - q).norm())
            .fold(q.norm(), f64::min);
        let edge = region.radius - (q - region.center).norm();
        (0.4 * other).min(0.9 * edge).min(0.05)
    };
    let mut state = pair.clone();
    let mut done: Vec<(C, f64)> = Vec::new();
    for (k, &q) in common.iter().enumerate() {
        let delta = radius_for(q);
        let ball = DiskDomain::new(q, delta, false);
        let closure = Closure::Extended(delta);
        let still = common_fixed_points(
            &state.element(wi.clone(), closure),
            &state.element(wj.clone(), closure),
            ball,
            &fp,
        )?;
        if still.is_empty() {
            engine.transcript.notes.push(format!("ball {k} at {q} already split"));
            done.push((q, delta));
            continue;
        }
        let pins: Vec<C> = common.iter().copied().filter(|p| !near(*p, q, fp.match_tol())).collect();
        engine.transcript.case_path.push(format!("ball {k} at {q}"));
        state = match engine.split(&state, wi, wj, q, delta, done.clone(), &pins) {
            Ok(s) => s,
            Err(PerturbationError::BudgetExhausted { reason, .. }) => {
                return Err(engine.exhausted(format!("ball {k} of {}: {reason}", common.len())))
            }
            Err(e) => return Err(e),
        };
        done.push((q, delta));
    }
    Ok(engine.finish(state))
}
