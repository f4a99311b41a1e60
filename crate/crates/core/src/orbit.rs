//! Word enumeration, hyperbolic fixed points, multiplier groups and
//! budgeted orbit exploration.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::fixed_points::{isolate_report, FixedPointOptions, FixedPointRecord};
use crate::pseudogroup::{Closure, GeneratorPair};
use crate::word::{Letter, Orders, ReducedWord, Syllable};

/// Exponents allowed for one letter: `±1..±e` for infinite order, the
/// normalized residues `1..n−1` (capped at `e`) for order `n`.
fn exponents(order: Option<u32>, max_abs: u32) -> Vec<i64> {
    let e = max_abs as i64;
    match order {
        None => (-e..=e).filter(|x| *x != 0).collect(),
        Some(n) => (1..n as i64).filter(|x| *x <= e).collect(),
    }
}

/// Canonical representative of the cyclic conjugacy class: the least
/// rotation of the cyclically reduced core.
pub fn conjugacy_representative(word: &ReducedWord) -> ReducedWord {
    let core = word.minimal_conjugate().w4;
    let s = core.syllables();
    if s.len() <= 1 {
        return core;
    }
    (0..s.len())
        .map(|k| {
            let rotated: Vec<Syllable> = s[k..].iter().chain(&s[..k]).copied().collect();
            ReducedWord::from_syllables(&rotated, core.orders())
        })
        .min()
        .expect("nonempty rotation set")
}

/// Every reduced word with `1..=max_syllables` syllables and bounded
/// exponents, ordered by length, first letter, then exponents.
pub fn enumerate_words(orders: Orders, max_syllables: usize, max_abs_exponent: u32, one_per_class: bool) -> Vec<ReducedWord> {
    let mut out = Vec::new();
    for len in 1..=max_syllables {
        for first in [Letter::A, Letter::B] {
            let mut stack: Vec<Vec<Syllable>> = vec![Vec::new()];
            for k in 0..len {
                let letter = if k % 2 == 0 { first } else { first.other() };
                let exps = exponents(orders.of(letter), max_abs_exponent);
                stack = stack
                    .into_iter()
                    .flat_map(|prefix| {
                        exps.iter().map(move |&e| {
                            let mut p = prefix.clone();
                            p.push(Syllable::new(letter, e));
                            p
                        })
                    })
                    .collect();
            }
            out.extend(stack.into_iter().map(|s| ReducedWord::from_syllables(&s, orders)));
        }
    }
    if one_per_class {
        let mut seen = BTreeSet::new();
        out.retain(|w| seen.insert(conjugacy_representative(w)));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorerBudget {
    pub max_syllables: usize,
    pub max_exponent: u32,
    /// Breadth-first depth of orbit exploration (letters).
    pub orbit_depth: usize,
    /// Cap on distinct cells visited per orbit.
    pub max_points: usize,
    pub separation_n: i64,
    pub separation_eps: f64,
}

impl Default for ExplorerBudget {
    fn default() -> Self {
        ExplorerBudget {
            max_syllables: 4,
            max_exponent: 2,
            orbit_depth: 8,
            max_points: 4096,
            separation_n: 5,
            separation_eps: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperbolicRecord {
    pub word: ReducedWord,
    pub record: FixedPointRecord,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScanReport {
    /// Every nonzero fixed point found, in enumeration order.
    pub all: Vec<HyperbolicRecord>,
    /// Words skipped because isolation failed, with the reason.
    pub skipped: Vec<(String, String)>,
}

fn cell_of(z: C, size: f64) -> (i64, i64) {
    ((z.re / size).floor() as i64, (z.im / size).floor() as i64)
}

/// Fixed points of every enumerated word in `region` (origin excluded).
pub fn scan_fixed_points(
    pair: &GeneratorPair,
    region: crate::germ::DiskDomain,
    budget: &ExplorerBudget,
    closure: Closure,
    opts: &FixedPointOptions,
) -> ScanReport {
    let words = enumerate_words(pair.orders(), budget.max_syllables, budget.max_exponent, false);
    let one = |w: &ReducedWord| {
        let el = pair.element(w.clone(), closure);
        match isolate_report(&el, region, opts) {
            Ok(rep) => {
                let mut v: Vec<HyperbolicRecord> = rep
                    .records
                    .into_iter()
                    .filter(|r| r.location.norm() > 1e-6)
                    .map(|record| HyperbolicRecord { word: w.clone(), record })
                    .collect();
                v.sort_by(|a, b| a.record.location.re.total_cmp(&b.record.location.re));
                Ok(v)
            }
            Err(e) => Err((w.to_string(), e.to_string())),
        }
    };
    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        words.par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = words.iter().map(one).collect();
    let mut report = ScanReport::default();
    for r in results {
        match r {
            Ok(v) => report.all.extend(v),
            Err(s) => report.skipped.push(s),
        }
    }
    report
}

/// Hyperbolic records, deduplicated by (location cell, primitive root up to
/// inversion); the first occurrence in enumeration order is kept.
pub fn find_hyperbolic(scan: &ScanReport, opts: &FixedPointOptions) -> Vec<HyperbolicRecord> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for h in &scan.all {
        if !h.record.hyperbolic {
            continue;
        }
        let (root, _) = h.word.primitive_root();
        let key_root = root.clone().min(root.inverse());
        let key = (cell_of(h.record.location, opts.match_tol()), key_root);
        if seen.insert(key) {
            out.push(h.clone());
        }
    }
    out
}

/// `{λⁿ}` stored as `(log|λ|, arg λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierGroup {
    pub log_abs: f64,
    pub arg: f64,
}

impl MultiplierGroup {
    pub fn new(lambda: C, tol_hyp: f64) -> Option<Self> {
        ((lambda.norm() - 1.0).abs() > tol_hyp).then(|| MultiplierGroup { log_abs: lambda.norm().ln(), arg: lambda.arg() })
    }

    pub fn generator(&self) -> C {
        C::from_polar(self.log_abs.exp(), self.arg)
    }
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y <= -PI {
        y + TAU
    } else {
        y
    }
}

/// Smallest `max(|n ln|λ₁| − m ln|λ₂||, |n arg λ₁ − m arg λ₂| mod 2π)` over
/// `0 < |n|, |m| ≤ N`.
pub fn multiplier_margin(m1: &MultiplierGroup, m2: &MultiplierGroup, n_max: i64) -> f64 {
    let mut best = f64::INFINITY;
    for n in (-n_max..=n_max).filter(|n| *n != 0) {
        for m in (-n_max..=n_max).filter(|m| *m != 0) {
            let modulus = (n as f64 * m1.log_abs - m as f64 * m2.log_abs).abs();
            let angle = wrap(n as f64 * m1.arg - m as f64 * m2.arg).abs();
            best = best.min(modulus.max(angle));
        }
    }
    best
}

pub fn multiplier_separation(m1: &MultiplierGroup, m2: &MultiplierGroup, n_max: i64, eps: f64) -> bool {
    multiplier_margin(m1, m2, n_max) > eps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitRelation {
    Yes,
    NoWithinBudget,
    BudgetExhausted,
}

/// Breadth-first orbit exploration.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitExploration {
    /// Cell → first point seen in it.
    pub cells: BTreeMap<(i64, i64), C>,
    pub depth_reached: usize,
    /// The point cap cut the exploration short.
    pub capped: bool,
}

/// Applies `a^{±1}, b^{±1}` letter by letter from `p`, keeping only points of
/// the open disc, up to `depth` letters; stops early once a point within
/// `cell` of `stop` is visited.
pub fn explore_orbit(
    pair: &GeneratorPair,
    p: C,
    depth: usize,
    max_points: usize,
    cell: f64,
    stop: Option<C>,
) -> OrbitExploration {
    explore(pair, p, depth, max_points, cell, stop).0
}

fn explore(
    pair: &GeneratorPair,
    p: C,
    depth: usize,
    max_points: usize,
    cell: f64,
    stop: Option<C>,
) -> (OrbitExploration, bool) {
    let hit = |z: C| stop.is_some_and(|s| (z - s).norm() < cell);
    let r = pair.radius();
    let mut cells = BTreeMap::new();
    let mut frontier = VecDeque::new();
    let mut capped = false;
    let mut depth_reached = 0;
    if p.norm() < r {
        cells.insert(cell_of(p, cell), p);
        frontier.push_back((p, 0usize));
    }
    if p.norm() < r && hit(p) {
        return (OrbitExploration { cells, depth_reached, capped }, true);
    }
    let mut found = false;
    'outer: while let Some((z, d)) = frontier.pop_front() {
        if d >= depth {
            continue;
        }
        for (letter, inverse) in [(Letter::A, false), (Letter::A, true), (Letter::B, false), (Letter::B, true)] {
            let Ok((w, _)) = pair.apply_letter(letter, inverse, z, Closure::Open) else { continue };
            if !(w.norm() < r) {
                continue;
            }
            let key = cell_of(w, cell);
            if cells.contains_key(&key) {
                continue;
            }
            if cells.len() >= max_points {
                capped = true;
                break 'outer;
            }
            cells.insert(key, w);
            depth_reached = depth_reached.max(d + 1);
            if hit(w) {
                found = true;
                break 'outer;
            }
            frontier.push_back((w, d + 1));
        }
    }
    (OrbitExploration { cells, depth_reached, capped }, found)
}

/// Semi-decision of `q ∈ Γ·p` within `depth` letters.
pub fn same_orbit(pair: &GeneratorPair, p: C, q: C, depth: usize, max_points: usize, cell: f64) -> OrbitRelation {
    let (ex, found) = explore(pair, p, depth, max_points, cell, Some(q));
    if found {
        OrbitRelation::Yes
    } else if ex.capped {
        OrbitRelation::BudgetExhausted
    } else {
        OrbitRelation::NoWithinBudget
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Margin {
    pub other: usize,
    pub multiplier: f64,
    /// Smallest distance between visited points of the two orbits.
    pub orbit_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitCertificate {
    pub representative: C,
    pub word: String,
    pub multiplier: C,
    pub group: MultiplierGroup,
    pub orbit_depth: usize,
    pub visited_cells: Vec<(i64, i64)>,
    pub capped: bool,
    pub margins: Vec<Margin>,
    #[serde(skip)]
    visited_points: Vec<C>,
}

impl OrbitCertificate {
    pub fn visited_points(&self) -> &[C] {
        &self.visited_points
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitReport {
    pub certificates: Vec<OrbitCertificate>,
    /// Stabilizers that are not cyclic within the scanned words.
    pub findings: Vec<String>,
    pub hyperbolic_found: usize,
    pub words_skipped: Vec<(String, String)>,
}

/// Greedy certificates over hyperbolic records, ordered by `|location|`
/// descending and by word length at a shared location: each new one must be multiplier-separated from and
/// cell-disjoint with every certificate already accepted.
pub fn disjoint_hyperbolic_orbits(
    pair: &GeneratorPair,
    scan: &ScanReport,
    budget: &ExplorerBudget,
    opts: &FixedPointOptions,
) -> OrbitReport {
    let mut hyps = find_hyperbolic(scan, opts);
    let cell = opts.match_tol();
    // Clusters of coincident locations, each led by its shortest word.
    hyps.sort_by(|a, b| a.word.letter_len().cmp(&b.word.letter_len()).then(a.word.cmp(&b.word)));
    let mut clusters: Vec<Vec<HyperbolicRecord>> = Vec::new();
    for h in hyps {
        match clusters.iter_mut().find(|c| (c[0].record.location - h.record.location).norm() < cell) {
            Some(c) => c.push(h),
            None => clusters.push(vec![h]),
        }
    }
    // Moduli within the matching tolerance count as equal.
    clusters.sort_by(|a, b| {
        let (p, q) = (a[0].record.location, b[0].record.location);
        let by_norm = if (q.norm() - p.norm()).abs() < cell { std::cmp::Ordering::Equal } else { q.norm().total_cmp(&p.norm()) };
        by_norm.then(q.re.total_cmp(&p.re)).then(q.im.total_cmp(&p.im))
    });
    let hyps: Vec<HyperbolicRecord> = clusters.into_iter().flatten().collect();
    let mut certs: Vec<OrbitCertificate> = Vec::new();
    for h in &hyps {
        let p = h.record.location;
        if !(p.norm() < pair.radius()) {
            continue;
        }
        let Some(group) = MultiplierGroup::new(h.record.multiplier, opts.tol_hyp) else { continue };
        if certs.iter().any(|c| !multiplier_separation(&group, &c.group, budget.separation_n, budget.separation_eps)) {
            continue;
        }
        let ex = explore_orbit(pair, p, budget.orbit_depth, budget.max_points, cell, None);
        if certs.iter().any(|c| c.visited_cells.iter().any(|k| ex.cells.contains_key(k))) {
            continue;
        }
        certs.push(OrbitCertificate {
            representative: p,
            word: h.word.to_string(),
            multiplier: h.record.multiplier,
            group,
            orbit_depth: budget.orbit_depth,
            visited_cells: ex.cells.keys().copied().collect(),
            capped: ex.capped,
            margins: Vec::new(),
            visited_points: ex.cells.values().copied().collect(),
        });
    }
    for i in 0..certs.len() {
        let margins: Vec<Margin> = (0..certs.len())
            .filter(|j| *j != i)
            .map(|j| Margin {
                other: j,
                multiplier: multiplier_margin(&certs[i].group, &certs[j].group, budget.separation_n),
                orbit_distance: certs[i]
                    .visited_points
                    .iter()
                    .flat_map(|a| certs[j].visited_points.iter().map(move |b| (a - b).norm()))
                    .fold(f64::INFINITY, f64::min),
            })
            .collect();
        certs[i].margins = margins;
    }
    let mut findings = Vec::new();
    for c in &certs {
        let stabilizers: Vec<&ReducedWord> = scan
            .all
            .iter()
            .filter(|h| (h.record.location - c.representative).norm() < cell)
            .map(|h| &h.word)
            .collect();
        'pairs: for (i, u) in stabilizers.iter().enumerate() {
            for v in &stabilizers[i + 1..] {
                if u.commensurable_up_to_inverse(v).is_none() {
                    findings.push(format!(
                        "stabilizer of {} is not cyclic within budget: {u} and {v} are incommensurable",
                        c.representative
                    ));
                    break 'pairs;
                }
            }
        }
    }
    OrbitReport { certificates: certs, findings, hyperbolic_found: hyps.len(), words_skipped: scan.skipped.clone() }
}
