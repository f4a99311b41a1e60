//! Acceptance checks, one PASS/FAIL line each. Exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use pseudogroup::fixed_points::{
    displacement_winding, isolate_fixed_points, verify_count_stability, winding_with_value, Contour, FixedPointOptions,
    FixedPointRecord, FnMap, MapError,
};
use pseudogroup::germ::{analytic_distance, AddedTerm, DiskDomain, Germ};
use pseudogroup::jet::{jet_distance, Jet, DEFAULT_ORDER};
use pseudogroup::orbit::{multiplier_separation, MultiplierGroup};
use pseudogroup::perturbation::{perturb_conjugator, t_grid, vanishing_interpolant, Anchor, PerturbationStep, NODE_GAP};
use pseudogroup::pseudogroup::{Closure, Generator, GeneratorPair, PseudogroupElement};
use pseudogroup::word::{Letter, Orders, ReducedWord, Syllable};
use pseudogroup::Complex64 as C;
use pseudogroup_cli::{cmd_fixed_points, cmd_hyperbolic, cmd_split, load_config, Exit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Check = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn config(name: &str) -> pseudogroup::config::RunConfig {
    load_config(&std::fs::read_to_string(fixture(name)).unwrap(), None, None).unwrap()
}

fn jsonl(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn complex(v: &Value) -> C {
    C::new(v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

fn within(elapsed: Duration, limit: f64) -> Check {
    if elapsed.as_secs_f64() < limit {
        Ok(String::new())
    } else {
        Err(format!("took {:.1} s, limit {limit} s", elapsed.as_secs_f64()))
    }
}

fn polar(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> C {
    C::from_polar(rng.gen_range(lo..hi), rng.gen_range(0.0..std::f64::consts::TAU))
}

fn random_word(rng: &mut ChaCha8Rng, orders: Orders) -> ReducedWord {
    loop {
        let n = rng.gen_range(1..=4);
        let raw: Vec<Syllable> = (0..n)
            .map(|_| {
                let letter = if rng.gen_bool(0.5) { Letter::A } else { Letter::B };
                let e = rng.gen_range(1..=2) * if rng.gen_bool(0.5) { 1 } else { -1 };
                Syllable::new(letter, e)
            })
            .collect();
        let w = ReducedWord::from_syllables(&raw, orders);
        if !w.is_identity() && w.len() <= 4 {
            return w;
        }
    }
}

const RADIUS: f64 = 0.5;

fn random_pair(rng: &mut ChaCha8Rng) -> GeneratorPair {
    loop {
        let (a, l) = (polar(rng, 0.3, 1.4), polar(rng, 0.3, 3.0));
        let Ok(f) = Germ::mobius(a).and_then(Generator::plain) else { continue };
        let Ok(g) = Germ::linear(l).and_then(Generator::plain) else { continue };
        if let Ok(p) = GeneratorPair::new(f, g, RADIUS, Orders::FREE) {
            return p;
        }
    }
}

/// Largest centred disc from a geometric ladder on which the element is
/// defined on a polar grid and whose boundary keeps away from fixed points.
fn defined_disc(el: &PseudogroupElement, opts: &FixedPointOptions) -> Option<DiskDomain> {
    for k in 0..40 {
        let rho = 0.9 * RADIUS * 0.7f64.powi(k);
        let ok = (1..=24).all(|i| {
            (0..96).all(|j| el.contains(C::from_polar(rho * i as f64 / 24.0, std::f64::consts::TAU * j as f64 / 96.0)))
        });
        if ok && displacement_winding(el, &Contour::circle(C::default(), rho), opts).is_ok() {
            return Some(DiskDomain::centered(rho));
        }
    }
    None
}

fn newton_sweep(el: &PseudogroupElement, region: DiskDomain, seeds: usize) -> Vec<C> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut roots: Vec<C> = Vec::new();
    for i in 0..seeds {
        let r = region.radius * ((i as f64 + 0.5) / seeds as f64).sqrt();
        let mut z = region.center + C::from_polar(r, golden * i as f64);
        for _ in 0..80 {
            let Ok((w, dw)) = el.eval_d(z) else { break };
            let step = (w - z) / (dw - 1.0);
            if !step.norm().is_finite() || (w - z).norm() < 1e-15 {
                break;
            }
            z -= step;
        }
        let converged = el.eval_d(z).map(|(w, _)| (w - z).norm() < 1e-11).unwrap_or(false);
        if converged && region.contains(z) && !roots.iter().any(|p| (p - z).norm() < 1e-6) {
            roots.push(z);
        }
    }
    roots
}

fn total(records: &[FixedPointRecord]) -> i64 {
    records.iter().map(|r| r.multiplicity as i64).sum()
}

fn ac1() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let opts = FixedPointOptions::default();
    let mut points = 0;
    for case in 0..100 {
        let pair = random_pair(&mut rng);
        let w = random_word(&mut rng, Orders::FREE);
        let el = pair.element(w.clone(), Closure::Open);
        let region = defined_disc(&el, &opts).ok_or(format!("case {case}: no disc for {w}"))?;
        let records = isolate_fixed_points(&el, region, &opts).map_err(|e| format!("case {case} {w}: {e}"))?;
        let (n, value) = winding_with_value(&el, &Contour::circle(region.center, region.radius), &opts)
            .map_err(|e| format!("case {case} {w}: {e}"))?;
        if total(&records) != n || (value - C::new(n as f64, 0.0)).norm() > 0.05 {
            return Err(format!("case {case} {w}: {} records against winding {n} ({value})", total(&records)));
        }
        let roots = newton_sweep(&el, region, 2000);
        let unmatched = roots.iter().find(|z| !records.iter().any(|r| (r.location - *z).norm() < 1e-6));
        let unreached = records.iter().find(|r| !roots.iter().any(|z| (r.location - z).norm() < 1e-6));
        if let Some(z) = unmatched {
            return Err(format!("case {case} {w}: newton root {z} missing"));
        }
        if let Some(r) = unreached {
            return Err(format!("case {case} {w}: record {} not reached by newton", r.location));
        }
        points += records.len();
    }
    within(start.elapsed(), 60.0)?;
    Ok(format!("100 words, {points} fixed points"))
}

fn ac2() -> Check {
    let cfg = config("mobius_demo.json");
    let start = Instant::now();
    let out = cmd_fixed_points(&cfg, "b a");
    let elapsed = start.elapsed();
    if out.code != Exit::Ok {
        return Err(format!("exit {:?}: {:?}", out.code, out.diagnostic));
    }
    let lines = jsonl(out.artifact("fixed_points.jsonl").unwrap());
    // Closed form: z/(2(1−z)) = z has the roots 0 and 1/2.
    let want = [(0.0, 0.5), (0.5, 2.0)];
    if lines.len() != want.len() {
        return Err(format!("{} records", lines.len()));
    }
    for (p, l) in want {
        let hit = lines.iter().find(|v| (C::new(v["re"].as_f64().unwrap(), v["im"].as_f64().unwrap()) - p).norm() < 1e-9);
        let Some(v) = hit else { return Err(format!("no record at {p}")) };
        let m = C::new(v["multiplier_re"].as_f64().unwrap(), v["multiplier_im"].as_f64().unwrap());
        if (m - l).norm() >= 1e-9 || v["hyperbolic"] != true {
            return Err(format!("record at {p} has multiplier {m}"));
        }
    }
    within(elapsed, 1.0)?;
    Ok(format!("{{0: 0.5, 0.5: 2}} in {:.0} ms", elapsed.as_secs_f64() * 1e3))
}

fn ac3() -> Check {
    let orders = Orders::FREE;
    let w = ReducedWord::parse("a^-1 b a^2", orders).unwrap();
    let mc = w.minimal_conjugate();
    if mc.w3.to_string() != "a^2" || mc.w4.to_string() != "a b" || !mc.simplified {
        return Err(format!("minimal conjugate ({}, {}, {})", mc.w3, mc.w4, mc.simplified));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let all_orders = [Orders::FREE, Orders::new(Some(3), None).unwrap(), Orders::new(Some(2), Some(5)).unwrap()];
    let raw = |rng: &mut ChaCha8Rng| -> Vec<Syllable> {
        let n = rng.gen_range(0..=8);
        (0..n)
            .map(|_| Syllable::new(if rng.gen_bool(0.5) { Letter::A } else { Letter::B }, rng.gen_range(-4i64..=4)))
            .collect()
    };
    for case in 0..1000 {
        let o = all_orders[case % all_orders.len()];
        let (x, y, z) = (raw(&mut rng), raw(&mut rng), raw(&mut rng));
        let (wx, wy, wz) = (
            ReducedWord::from_syllables(&x, o),
            ReducedWord::from_syllables(&y, o),
            ReducedWord::from_syllables(&z, o),
        );
        if ReducedWord::from_syllables(wx.syllables(), o) != wx {
            return Err(format!("case {case}: reducing {wx} again changes it"));
        }
        if wx.concat(&wy).concat(&wz) != wx.concat(&wy.concat(&wz)) {
            return Err(format!("case {case}: concatenation of {wx}, {wy}, {wz} is not associative"));
        }
        if wx.inverse().inverse() != wx || !wx.concat(&wx.inverse()).is_identity() {
            return Err(format!("case {case}: inverse of {wx}"));
        }
        let mc = wx.minimal_conjugate();
        if mc.w4.conjugate_by(&mc.w3) != wx {
            return Err(format!("case {case}: {} conjugated by {} is not {wx}", mc.w4, mc.w3));
        }
    }
    Ok("(a^2, a b, simplified) and 1000 property cases".into())
}

fn ac4() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let jet = |rng: &mut ChaCha8Rng| Jet::new((0..DEFAULT_ORDER).map(|_| polar(rng, 0.0, 2.0)).collect());
    let mut worst = f64::INFINITY;
    for case in 0..1000 {
        let (a, b, c) = (jet(&mut rng), jet(&mut rng), jet(&mut rng));
        let (ab, bc, ac) = (jet_distance(&a, &b), jet_distance(&b, &c), jet_distance(&a, &c));
        if ab != jet_distance(&b, &a) {
            return Err(format!("case {case}: asymmetric"));
        }
        if jet_distance(&a, &a) != 0.0 || ab == 0.0 {
            return Err(format!("case {case}: indiscernibles"));
        }
        // Equal except for one coefficient must still be apart.
        let mut coeffs = a.coeffs().to_vec();
        let k = rng.gen_range(0..DEFAULT_ORDER);
        coeffs[k] += C::new(1e-9, 0.0);
        if jet_distance(&a, &Jet::new(coeffs)) <= 0.0 {
            return Err(format!("case {case}: coefficient {} change invisible", k + 1));
        }
        let slack = ab + bc - ac;
        worst = worst.min(slack);
        if slack < -1e-12 {
            return Err(format!("case {case}: triangle slack {slack:e}"));
        }
    }
    within(start.elapsed(), 5.0)?;
    Ok(format!("1000 triples, least triangle slack {worst:.3e}"))
}

fn random_step(rng: &mut ChaCha8Rng, alpha: u32) -> Option<(Germ, PerturbationStep)> {
    let h = if rng.gen_bool(0.5) {
        Germ::identity().with_radius(1.0)
    } else {
        let mut coeffs = vec![C::default(); alpha.max(1) as usize];
        coeffs.push(polar(rng, 0.0, 0.2));
        Germ::poly_additive(Germ::identity(), AddedTerm::Coefficients(coeffs), Some(1.0)).ok()?
    };
    let zeros: Vec<C> = (0..rng.gen_range(0..=3)).map(|_| polar(rng, 0.0, 0.8)).collect();
    let anchor = Anchor { point: polar(rng, 0.0, 0.8), value: polar(rng, 0.0, 2.0) };
    let p = vanishing_interpolant(&zeros, anchor).ok()?;
    let grid = t_grid();
    let t = grid[rng.gen_range(0..grid.len())];
    Some((h, PerturbationStep { target: Letter::A, interpolant: p, t, alpha }))
}

/// Jets, pins and monotone distance hold; the linear bound `d_A ≤ C·t` is
/// tested with `C` fitted at the largest `t` and checked down the grid.
fn ac5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut accepted, mut refused, mut linear) = (0, 0, 0);
    let mut worst_growth: f64 = 1.0;
    while accepted < 200 {
        let alpha = accepted as u32 % 4;
        let Some((h, step)) = random_step(&mut rng, alpha) else { continue };
        let Ok(next) = perturb_conjugator(&h, &step) else {
            refused += 1;
            continue;
        };
        accepted += 1;
        let (j0, j1) = (h.taylor_jet(DEFAULT_ORDER), next.taylor_jet(DEFAULT_ORDER));
        if let Some(k) = (1..=alpha as usize).find(|&k| j0.coeff(k) != j1.coeff(k)) {
            return Err(format!("alpha {alpha}: coefficient {k} moved"));
        }
        for z in step.interpolant.zeros.iter().filter(|z| z.norm() > NODE_GAP) {
            if (next.evaluate(*z).unwrap() - h.evaluate(*z).unwrap()).norm() >= 1e-10 {
                return Err(format!("alpha {alpha}: zero {z} moved"));
            }
        }
        let mut curve = Vec::new();
        for t in t_grid() {
            let Ok(g) = perturb_conjugator(&h, &PerturbationStep { t, ..step.clone() }) else { continue };
            curve.push((t, analytic_distance(&h, &g, DEFAULT_ORDER)));
        }
        if curve.windows(2).any(|w| !(w[1].1 < w[0].1)) {
            return Err(format!("alpha {alpha}: distance not decreasing along the t grid"));
        }
        let Some(&(t0, d0)) = curve.first() else { continue };
        let c = d0 / t0;
        let growth = curve.iter().map(|(t, d)| d / (c * t)).fold(1.0, f64::max);
        worst_growth = worst_growth.max(growth);
        if growth <= 1.0 + 1e-9 {
            linear += 1;
        }
    }
    let detail = format!(
        "200 steps ({refused} refused): jets, pins and monotone distance hold; d_A <= C t on {linear}/200, worst d/(C t) = {worst_growth:.3e}"
    );
    if linear == 200 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn parabola(t: f64) -> impl Fn(C) -> Result<(C, C), MapError> + Sync {
    move |z: C| Ok((z + z * z + t, C::new(1.0, 0.0) + z * 2.0))
}

fn ac6() -> Check {
    let opts = FixedPointOptions::default();
    let region = DiskDomain::centered(0.5);
    let ball = [DiskDomain::centered(0.1)];
    let f0 = FnMap::new("z+z^2", parabola(0.0));
    let n = displacement_winding(&f0, &Contour::circle(C::default(), 0.1), &opts).map_err(|e| e.to_string())?;
    if n != 2 {
        return Err(format!("winding {n} on the ball"));
    }
    for t in [1e-4, -1e-4, 5e-5, -3e-5, 1e-6] {
        let ft = FnMap::new("z+z^2+t", parabola(t));
        if !verify_count_stability(&f0, &ft, &ball, region, &opts).map_err(|e| e.to_string())? {
            return Err(format!("unstable at t = {t}"));
        }
    }
    // z² + t = 0 has |z| = √|t| > 0.1 for |t| > 0.01.
    for t in [0.02, -0.02, 0.05] {
        let ft = FnMap::new("z+z^2+t", parabola(t));
        if verify_count_stability(&f0, &ft, &ball, region, &opts).map_err(|e| e.to_string())? {
            return Err(format!("stable at t = {t} although the roots left the ball"));
        }
    }
    Ok("count 2 kept for |t| <= 1e-4, lost for |t| = 0.02, 0.05".into())
}

fn ac7() -> Check {
    let cfg = config("engineered_split.json");
    let q = cfg.split.q.unwrap();
    let delta = cfg.split.delta;
    let (wi, wj) = ("b a", "a^2 b");
    let before = cfg.build_pair().unwrap();
    let orders = before.orders();
    let (ei, ej) = (ReducedWord::parse(wi, orders).unwrap(), ReducedWord::parse(wj, orders).unwrap());
    let opts = cfg.fixed_points;
    let closure = Closure::Extended(delta);
    for w in [&ei, &ej] {
        let (p, _) = before.element(w.clone(), closure).eval_d(q).map_err(|e| e.to_string())?;
        if (p - q).norm() > 1e-12 {
            return Err(format!("{q} is not fixed by {w} before the split"));
        }
    }
    let start = Instant::now();
    let out = cmd_split(&cfg, wi, wj);
    let elapsed = start.elapsed();
    if out.code != Exit::Ok {
        return Err(format!("exit {:?}: {:?}", out.code, out.diagnostic));
    }
    let next = load_config(out.artifact("perturbed_config.json").unwrap(), None, None)?;
    let after = next.build_pair().map_err(|e| e.to_string())?;
    let ball = DiskDomain::new(q, delta, false);
    let contour = Contour::circle(q, delta);
    let n0 = displacement_winding(&before.element(ei.clone(), closure), &contour, &opts).map_err(|e| e.to_string())?;
    let ai = after.element(ei.clone(), closure);
    let n1 = displacement_winding(&ai, &contour, &opts).map_err(|e| e.to_string())?;
    let ri = isolate_fixed_points(&ai, ball, &opts).map_err(|e| e.to_string())?;
    let rj = isolate_fixed_points(&after.element(ej.clone(), closure), ball, &opts).map_err(|e| e.to_string())?;
    let shared = ri.iter().filter(|a| rj.iter().any(|b| (a.location - b.location).norm() < opts.match_tol())).count();
    if shared > 0 || n0 != n1 {
        return Err(format!("{shared} common fixed points left, winding {n0} -> {n1}"));
    }
    within(elapsed, 30.0)?;
    let steps = serde_json::from_str::<Value>(out.artifact("split_summary.json").unwrap()).unwrap()["steps"].clone();
    Ok(format!("{wi} / {wj} split at {q} in {steps} step(s), winding {n0} kept, {:.1} s", elapsed.as_secs_f64()))
}

fn certificates(name: &str) -> Result<(Vec<Value>, Duration), String> {
    let cfg = config(name);
    let start = Instant::now();
    let out = cmd_hyperbolic(&cfg);
    let elapsed = start.elapsed();
    if out.code != Exit::Ok {
        return Err(format!("{name}: exit {:?}: {:?}", out.code, out.diagnostic));
    }
    Ok((jsonl(out.artifact("certificates.jsonl").unwrap()), elapsed))
}

fn ac8() -> Check {
    let (demo, t0) = certificates("mobius_demo.json")?;
    if !demo.iter().any(|c| (complex(&c["representative"]) - 0.5).norm() < 1e-9) {
        return Err(format!("demo: no certificate at 0.5 among {}", demo.len()));
    }
    let (rich, t1) = certificates("rich_pair.json")?;
    if rich.len() < 2 {
        return Err(format!("rich pair: {} certificate(s)", rich.len()));
    }
    let cells = |c: &Value| -> Vec<(i64, i64)> {
        c["visited_cells"].as_array().unwrap().iter().map(|k| (k[0].as_i64().unwrap(), k[1].as_i64().unwrap())).collect()
    };
    for (i, a) in rich.iter().enumerate() {
        let ga = MultiplierGroup::new(complex(&a["multiplier"]), 1e-6).ok_or("non-hyperbolic certificate")?;
        for b in &rich[i + 1..] {
            let gb = MultiplierGroup::new(complex(&b["multiplier"]), 1e-6).ok_or("non-hyperbolic certificate")?;
            if !multiplier_separation(&ga, &gb, 5, 1e-3) {
                return Err(format!("{} and {} are not multiplier-separated", a["word"], b["word"]));
            }
            let cb = cells(b);
            if cells(a).iter().any(|k| cb.contains(k)) {
                return Err(format!("{} and {} share a cell", a["word"], b["word"]));
            }
        }
    }
    within(t0 + t1, 300.0)?;
    Ok(format!(
        "demo {} certificate(s) incl. 0.5 in {:.1} s; rich pair {} certificates in {:.1} s",
        demo.len(),
        t0.as_secs_f64(),
        rich.len(),
        t1.as_secs_f64()
    ))
}

fn run_cli(args: &[&str], out: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let _ = std::fs::remove_dir_all(out);
    let o = Command::new(env!("CARGO_BIN_EXE_pseudogroup"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(out)
        .map_err(|e| e.to_string())?
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files.push(("stdout".into(), o.stdout));
    files.push(("status".into(), o.status.code().unwrap_or(-1).to_string().into_bytes()));
    Ok(files)
}

fn ac9() -> Check {
    let dir = std::env::temp_dir().join(format!("pseudogroup-acceptance-{}", std::process::id()));
    let demo = fixture("mobius_demo.json");
    let split = fixture("engineered_split.json");
    let linear = fixture("linear_pair.json");
    let runs: Vec<Vec<&str>> = vec![
        vec!["--config", split.to_str().unwrap(), "--seed", "11", "split", "b a", "a^2 b"],
        vec!["--config", demo.to_str().unwrap(), "fixed-points", "b a"],
        vec!["--config", demo.to_str().unwrap(), "metric", "b a", "a^2 b"],
        vec!["--config", linear.to_str().unwrap(), "--threads", "2", "hyperbolic"],
        vec!["--config", demo.to_str().unwrap(), "domain-map", "b a"],
    ];
    let mut files = 0;
    for (k, args) in runs.iter().enumerate() {
        let first = run_cli(args, &dir.join(format!("{k}-a")))?;
        let second = run_cli(args, &dir.join(format!("{k}-b")))?;
        if first != second {
            return Err(format!("`{}` differs between runs", args[2..].join(" ")));
        }
        files += first.len();
    }
    std::fs::remove_dir_all(&dir).ok();
    Ok(format!("{} commands run twice, {files} outputs identical", runs.len()))
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Check); 9] = [
        ("AC1 isolation agrees with winding and Newton", ac1),
        ("AC2 Mobius fixture fixed points", ac2),
        ("AC3 word algebra", ac3),
        ("AC4 analytic metric", ac4),
        ("AC5 perturbation class preservation", ac5),
        ("AC6 count stability", ac6),
        ("AC7 split demonstration", ac7),
        ("AC8 hyperbolic orbits", ac8),
        ("AC9 determinism", ac9),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
