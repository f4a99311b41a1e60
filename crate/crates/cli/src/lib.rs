//! Subcommand implementations. Each command returns named artifacts and an
//! exit code; the binary decides where the artifacts go.

use pseudogroup::config::RunConfig;
use pseudogroup::fixed_points::{
    common_fixed_points, displacement_winding, isolate_fixed_points, Contour, FixedPointError,
};
use pseudogroup::germ::DiskDomain;
use pseudogroup::jet::{jet_distance, jet_tangency_order, Jet};
use pseudogroup::orbit::{disjoint_hyperbolic_orbits, scan_fixed_points};
use pseudogroup::perturbation::{
    eliminate_all_common_fixed_points, split_common_fixed_point, PerturbationError, PerturbationOutcome, Transcript,
};
use pseudogroup::pseudogroup::{Closure, GeneratorPair};
use pseudogroup::word::{Letter, Orders, ReducedWord};
use pseudogroup::Complex64 as C;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Config = 1,
    Separation = 2,
    Commensurable = 3,
    Budget = 4,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: Exit,
    /// First artifact is the one printed when no output directory is given.
    pub artifacts: Vec<Artifact>,
    pub diagnostic: Option<String>,
}

impl Outcome {
    fn ok(artifacts: Vec<Artifact>) -> Self {
        Outcome { code: Exit::Ok, artifacts, diagnostic: None }
    }

    fn fail(code: Exit, message: impl Into<String>) -> Self {
        Outcome { code, artifacts: Vec::new(), diagnostic: Some(message.into()) }
    }

    pub fn artifact(&self, name: &str) -> Option<&str> {
        self.artifacts.iter().find(|a| a.name == name).map(|a| a.contents.as_str())
    }
}

fn artifact(name: &str, contents: String) -> Artifact {
    Artifact { name: name.to_string(), contents }
}

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string(value).expect("serializable") + "\n"
}

fn json_lines<T: Serialize>(items: &[T]) -> String {
    items.iter().map(|x| json(x)).collect()
}

fn csv_table(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Reads and validates a config, applying command-line overrides.
pub fn load_config(text: &str, seed: Option<u64>, tol: Option<f64>) -> Result<RunConfig, String> {
    let mut cfg = RunConfig::from_json(text).map_err(|e| e.to_string())?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = tol {
        if !(t > 0.0) {
            return Err(format!("--tol {t} must be positive"));
        }
        cfg.fixed_points.tol = t;
        cfg.validate().map_err(|e| e.to_string())?;
    }
    Ok(cfg)
}

fn pair_of(cfg: &RunConfig) -> Result<GeneratorPair, Outcome> {
    cfg.build_pair().map_err(|e| Outcome::fail(Exit::Config, e.to_string()))
}

fn parse_word(text: &str, orders: Orders) -> Result<ReducedWord, Outcome> {
    ReducedWord::parse(text, orders).map_err(|e| Outcome::fail(Exit::Config, format!("{text:?}: {e}")))
}

fn fixed_point_failure(e: FixedPointError) -> Outcome {
    Outcome::fail(Exit::Separation, e.to_string())
}

#[derive(Serialize)]
struct MinimalConjugateReport {
    w3: String,
    w4: String,
    simplified: bool,
}

#[derive(Serialize)]
struct LetterSplit {
    a: usize,
    b: usize,
    /// `w = W1⁻¹ ∗ W2 ∗ W1`.
    w1: String,
    w2: String,
}

#[derive(Serialize)]
struct DomainStats {
    samples: usize,
    in_domain: usize,
    fraction: f64,
}

#[derive(Serialize)]
struct WordReport {
    input: String,
    reduced: String,
    identity: bool,
    syllables: usize,
    letters: usize,
    cyclically_reduced: bool,
    primitive_root: Option<String>,
    power: Option<u32>,
    minimal_conjugate: MinimalConjugateReport,
    letter_split: LetterSplit,
    #[serde(skip_serializing_if = "Option::is_none")]
    domain: Option<DomainStats>,
}

/// Algebraic report on a word; domain statistics when a pair is configured.
pub fn cmd_word(cfg: Option<&RunConfig>, text: &str) -> Outcome {
    let orders = match cfg.map(|c| c.orders()).transpose() {
        Ok(o) => o.unwrap_or(Orders::FREE),
        Err(e) => return Outcome::fail(Exit::Config, e.to_string()),
    };
    let w = match parse_word(text, orders) {
        Ok(w) => w,
        Err(o) => return o,
    };
    let root = (!w.is_identity()).then(|| w.primitive_root());
    let mc = w.minimal_conjugate();
    let (w1, w2) = w.type1_decomposition();
    let letters = w.letters();
    let domain = match cfg {
        Some(c) => {
            let pair = match pair_of(c) {
                Ok(p) => p,
                Err(o) => return o,
            };
            let s = pair.element(w.clone(), c.closure()).domain_sample(c.domain_resolution);
            let inside = s.iter().filter(|p| p.in_domain).count();
            Some(DomainStats { samples: s.len(), in_domain: inside, fraction: inside as f64 / s.len() as f64 })
        }
        None => None,
    };
    let report = WordReport {
        input: text.to_string(),
        reduced: w.to_string(),
        identity: w.is_identity(),
        syllables: w.len(),
        letters: w.letter_len(),
        cyclically_reduced: w.is_cyclically_reduced(),
        primitive_root: root.as_ref().map(|(p, _)| p.to_string()),
        power: root.map(|(_, n)| n),
        minimal_conjugate: MinimalConjugateReport { w3: mc.w3.to_string(), w4: mc.w4.to_string(), simplified: mc.simplified },
        letter_split: LetterSplit {
            a: letters.iter().filter(|l| l.letter == Letter::A).count(),
            b: letters.iter().filter(|l| l.letter == Letter::B).count(),
            w1: w1.to_string(),
            w2: w2.to_string(),
        },
        domain,
    };
    Outcome::ok(vec![artifact("word.json", json(&report))])
}

/// Every fixed point of the word's element in the configured region.
pub fn cmd_fixed_points(cfg: &RunConfig, text: &str) -> Outcome {
    let pair = match pair_of(cfg) {
        Ok(p) => p,
        Err(o) => return o,
    };
    let w = match parse_word(text, pair.orders()) {
        Ok(w) => w,
        Err(o) => return o,
    };
    let el = pair.element(w, cfg.closure());
    let records = match isolate_fixed_points(&el, cfg.region(), &cfg.fixed_points) {
        Ok(r) => r,
        Err(e) => return fixed_point_failure(e),
    };
    let rows = records
        .iter()
        .map(|r| {
            vec![
                r.word.clone(),
                r.location.re.to_string(),
                r.location.im.to_string(),
                r.multiplicity.to_string(),
                r.multiplier.re.to_string(),
                r.multiplier.im.to_string(),
                r.multiplier.norm().to_string(),
                r.hyperbolic.to_string(),
                r.near_boundary.to_string(),
                r.in_domain.to_string(),
            ]
        })
        .collect();
    let table = csv_table(
        &["word", "re", "im", "multiplicity", "multiplier_re", "multiplier_im", "abs_multiplier", "hyperbolic", "near_boundary", "in_domain"],
        rows,
    );
    Outcome::ok(vec![artifact("fixed_points.jsonl", json_lines(&records)), artifact("fixed_points.csv", table)])
}

#[derive(Serialize)]
struct SplitSummary {
    word_i: String,
    word_j: String,
    seed: u64,
    mode: &'static str,
    steps: usize,
    /// Common fixed points left (origin excluded) in each verified ball.
    remaining_common: usize,
    balls: Vec<BallCheck>,
}

#[derive(Serialize)]
struct BallCheck {
    center: C,
    radius: f64,
    winding_before: i64,
    winding_after: i64,
    common_after: usize,
}

fn check_ball(
    before: &GeneratorPair,
    after: &GeneratorPair,
    wi: &ReducedWord,
    wj: &ReducedWord,
    ball: DiskDomain,
    cfg: &RunConfig,
) -> Result<BallCheck, FixedPointError> {
    let fp = &cfg.fixed_points;
    let closure = Closure::Extended(ball.radius);
    let contour = Contour::circle(ball.center, ball.radius);
    let winding_before = displacement_winding(&before.element(wi.clone(), closure), &contour, fp)?;
    let ei = after.element(wi.clone(), closure);
    let winding_after = displacement_winding(&ei, &contour, fp)?;
    let common = common_fixed_points(&ei, &after.element(wj.clone(), closure), ball, fp)?;
    let common_after = common.iter().filter(|(a, _)| a.location.norm() > 1e-6).count();
    Ok(BallCheck { center: ball.center, radius: ball.radius, winding_before, winding_after, common_after })
}

fn transcript_artifact(t: &Transcript) -> Artifact {
    artifact("transcript.json", json(t))
}

/// Splits the common fixed points of two incommensurable words and writes
/// the perturbed pair back as a config.
pub fn cmd_split(cfg: &RunConfig, text_i: &str, text_j: &str) -> Outcome {
    let pair = match pair_of(cfg) {
        Ok(p) => p,
        Err(o) => return o,
    };
    let (wi, wj) = match (parse_word(text_i, pair.orders()), parse_word(text_j, pair.orders())) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(o), _) | (_, Err(o)) => return o,
    };
    if wi.is_identity() || wj.is_identity() {
        return Outcome::fail(Exit::Config, "split needs two nontrivial words");
    }
    if let Some(root) = wi.commensurable_up_to_inverse(&wj) {
        return Outcome::fail(Exit::Commensurable, format!("{wi} and {wj} are both powers of {root} or its inverse"));
    }
    let opts = cfg.perturbation_options();
    let (result, mode) = match cfg.split.q {
        Some(q) => (split_common_fixed_point(&wi, &wj, &pair, q, cfg.split.delta, &opts), "point"),
        None => (eliminate_all_common_fixed_points(&wi, &wj, &pair, cfg.region(), &opts), "region"),
    };
    let out: PerturbationOutcome = match result {
        Ok(o) => o,
        Err(e) => return perturbation_failure(e),
    };

    let balls: Vec<DiskDomain> = match cfg.split.q {
        Some(q) => vec![DiskDomain::new(q, cfg.split.delta, false)],
        None => Vec::new(),
    };
    let mut checks = Vec::new();
    for b in balls {
        match check_ball(&pair, &out.pair, &wi, &wj, b, cfg) {
            Ok(c) => checks.push(c),
            Err(e) => return fixed_point_failure(e),
        }
    }
    let remaining = match cfg.split.q {
        Some(_) => checks.iter().map(|c| c.common_after).sum(),
        None => {
            let ei = out.pair.element(wi.clone(), Closure::Open);
            let ej = out.pair.element(wj.clone(), Closure::Open);
            match common_fixed_points(&ei, &ej, cfg.region(), &cfg.fixed_points) {
                Ok(v) => v.iter().filter(|(a, _)| a.location.norm() > 1e-6).count(),
                Err(e) => return fixed_point_failure(e),
            }
        }
    };
    let summary = SplitSummary {
        word_i: wi.to_string(),
        word_j: wj.to_string(),
        seed: cfg.seed,
        mode,
        steps: out.steps.len(),
        remaining_common: remaining,
        balls: checks,
    };
    let next = cfg.with_pair(&out.pair);
    if let Err(e) = next.validate() {
        return Outcome::fail(Exit::Config, format!("perturbed config does not validate: {e}"));
    }
    let artifacts = vec![
        artifact("split_summary.json", json(&summary)),
        transcript_artifact(&out.transcript),
        artifact("perturbed_config.json", next.to_json() + "\n"),
    ];
    let windings_kept = summary.balls.iter().all(|b| b.winding_before == b.winding_after);
    if remaining > 0 || !windings_kept {
        return Outcome {
            code: Exit::Budget,
            artifacts,
            diagnostic: Some(format!("{remaining} common fixed points remain after the perturbation")),
        };
    }
    Outcome::ok(artifacts)
}

fn perturbation_failure(e: PerturbationError) -> Outcome {
    match e {
        PerturbationError::Commensurable { .. } => Outcome::fail(Exit::Commensurable, e.to_string()),
        PerturbationError::Precondition(_) | PerturbationError::Pair(_) => Outcome::fail(Exit::Config, e.to_string()),
        PerturbationError::FixedPoint(f) => fixed_point_failure(f),
        PerturbationError::BudgetExhausted { ref transcript, .. } => Outcome {
            code: Exit::Budget,
            artifacts: vec![transcript_artifact(transcript)],
            diagnostic: Some(e.to_string()),
        },
        PerturbationError::NoAdmissibleStep { .. }
        | PerturbationError::DegenerateNodes { .. }
        | PerturbationError::InjectivityLoss(_) => Outcome::fail(Exit::Budget, e.to_string()),
    }
}

#[derive(Serialize)]
struct HyperbolicSummary {
    seed: u64,
    words_scanned_max_syllables: usize,
    hyperbolic_found: usize,
    certificates: usize,
    findings: Vec<String>,
    words_skipped: Vec<(String, String)>,
}

/// Hyperbolic fixed points with pairwise disjoint orbits.
pub fn cmd_hyperbolic(cfg: &RunConfig) -> Outcome {
    let pair = match pair_of(cfg) {
        Ok(p) => p,
        Err(o) => return o,
    };
    let scan = scan_fixed_points(&pair, cfg.region(), &cfg.explorer, cfg.closure(), &cfg.fixed_points);
    let report = disjoint_hyperbolic_orbits(&pair, &scan, &cfg.explorer, &cfg.fixed_points);
    let rows = report
        .certificates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let m = c.margins.iter().map(|m| m.multiplier).fold(f64::INFINITY, f64::min);
            let d = c.margins.iter().map(|m| m.orbit_distance).fold(f64::INFINITY, f64::min);
            vec![
                i.to_string(),
                c.word.clone(),
                c.representative.re.to_string(),
                c.representative.im.to_string(),
                c.multiplier.re.to_string(),
                c.multiplier.im.to_string(),
                c.multiplier.norm().to_string(),
                m.to_string(),
                d.to_string(),
                c.visited_cells.len().to_string(),
                c.capped.to_string(),
            ]
        })
        .collect();
    let table = csv_table(
        &["index", "word", "re", "im", "multiplier_re", "multiplier_im", "abs_multiplier", "min_multiplier_margin", "min_orbit_distance", "visited_cells", "capped"],
        rows,
    );
    let summary = HyperbolicSummary {
        seed: cfg.seed,
        words_scanned_max_syllables: cfg.explorer.max_syllables,
        hyperbolic_found: report.hyperbolic_found,
        certificates: report.certificates.len(),
        findings: report.findings.clone(),
        words_skipped: report.words_skipped.clone(),
    };
    Outcome::ok(vec![
        artifact("certificates.jsonl", json_lines(&report.certificates)),
        artifact("certificates.csv", table),
        artifact("hyperbolic_summary.json", json(&summary)),
    ])
}

#[derive(Serialize)]
struct JetLine {
    name: String,
    multiplier: C,
    tangency_order: u32,
    /// Leading Taylor coefficients `c_1..c_8`.
    leading: Vec<C>,
}

/// Pairwise analytic distances between the generators, the conjugators, the
/// identity and any extra words, all as jets at 0.
pub fn cmd_metric(cfg: &RunConfig, words: &[String]) -> Outcome {
    let pair = match pair_of(cfg) {
        Ok(p) => p,
        Err(o) => return o,
    };
    let k = cfg.jet_order;
    let mut jets: Vec<(String, Jet)> = vec![
        ("id".into(), Jet::identity(k)),
        ("f".into(), pair.f().core().taylor_jet(k)),
        ("g".into(), pair.g().core().taylor_jet(k)),
        ("h1".into(), pair.f().conjugator().taylor_jet(k)),
        ("h2".into(), pair.g().conjugator().taylor_jet(k)),
    ];
    for text in words {
        let w = match parse_word(text, pair.orders()) {
            Ok(w) => w,
            Err(o) => return o,
        };
        jets.push((w.to_string(), pair.word_jet(&w, k)));
    }
    let mut rows = Vec::new();
    for i in 0..jets.len() {
        for j in i + 1..jets.len() {
            rows.push(vec![jets[i].0.clone(), jets[j].0.clone(), jet_distance(&jets[i].1, &jets[j].1).to_string()]);
        }
    }
    let lines: Vec<JetLine> = jets
        .iter()
        .map(|(name, j)| JetLine {
            name: name.clone(),
            multiplier: j.coeff(1),
            tangency_order: jet_tangency_order(j, pseudogroup::germ::TANGENCY_THRESHOLD),
            leading: (1..=8.min(k)).map(|i| j.coeff(i)).collect(),
        })
        .collect();
    Outcome::ok(vec![artifact("metric.csv", csv_table(&["left", "right", "distance"], rows)), artifact("jets.jsonl", json_lines(&lines))])
}

/// Membership grid of the word's domain over the square around `D`.
pub fn cmd_domain_map(cfg: &RunConfig, text: &str) -> Outcome {
    let pair = match pair_of(cfg) {
        Ok(p) => p,
        Err(o) => return o,
    };
    let w = match parse_word(text, pair.orders()) {
        Ok(w) => w,
        Err(o) => return o,
    };
    let samples = pair.element(w, cfg.closure()).domain_sample(cfg.domain_resolution);
    let rows = samples
        .iter()
        .map(|s| vec![s.x.to_string(), s.y.to_string(), u8::from(s.in_domain).to_string()])
        .collect();
    Outcome::ok(vec![artifact("domain_map.csv", csv_table(&["x", "y", "in_domain"], rows))])
}
