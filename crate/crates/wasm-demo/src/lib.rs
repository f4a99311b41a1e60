//! Browser bindings: word reports, domain maps and fixed points of a pair
//! given as a JSON run config.

use pseudogroup::config::RunConfig;
use pseudogroup::fixed_points::isolate_fixed_points;
use pseudogroup::pseudogroup::PseudogroupElement;
use pseudogroup::word::{Orders, ReducedWord};
use pseudogroup::Complex64 as C;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn element(config: &str, word: &str) -> Result<(RunConfig, PseudogroupElement), String> {
    let cfg = RunConfig::from_json(config).map_err(|e| e.to_string())?;
    let pair = cfg.build_pair().map_err(|e| e.to_string())?;
    let w = ReducedWord::parse(word, pair.orders()).map_err(|e| e.to_string())?;
    let el = pair.element(w, cfg.closure());
    Ok((cfg, el))
}

pub fn word_report_json(word: &str) -> Result<String, String> {
    let w = ReducedWord::parse(word, Orders::FREE).map_err(|e| e.to_string())?;
    let mc = w.minimal_conjugate();
    let root = (!w.is_identity()).then(|| w.primitive_root());
    Ok(json!({
        "reduced": w.to_string(),
        "inverse": w.inverse().to_string(),
        "syllables": w.len(),
        "letters": w.letter_len(),
        "cyclically_reduced": w.is_cyclically_reduced(),
        "primitive_root": root.as_ref().map(|(p, _)| p.to_string()),
        "power": root.map(|(_, n)| n),
        "w3": mc.w3.to_string(),
        "w4": mc.w4.to_string(),
        "simplified": mc.simplified,
    })
    .to_string())
}

/// Row-major `n × n` grid over the square around `D`, top row first:
/// 0 outside `D`, 1 in `D` but outside the word's domain, 2 in the domain.
pub fn domain_grid(config: &str, word: &str, n: usize) -> Result<Vec<u8>, String> {
    if n < 2 {
        return Err("grid needs at least 2 points a side".into());
    }
    let (_, el) = element(config, word)?;
    let r = el.pair().radius();
    let coord = |i: usize| -r + 2.0 * r * i as f64 / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for j in (0..n).rev() {
        for i in 0..n {
            let z = C::new(coord(i), coord(j));
            out.push(if z.norm() >= r {
                0
            } else if el.contains(z) {
                2
            } else {
                1
            });
        }
    }
    Ok(out)
}

pub fn fixed_points_json(config: &str, word: &str) -> Result<String, String> {
    let (cfg, el) = element(config, word)?;
    let records = isolate_fixed_points(&el, cfg.region(), &cfg.fixed_points).map_err(|e| e.to_string())?;
    let rows: Vec<_> = records
        .iter()
        .map(|r| {
            json!({
                "re": r.location.re,
                "im": r.location.im,
                "multiplicity": r.multiplicity,
                "multiplier_re": r.multiplier.re,
                "multiplier_im": r.multiplier.im,
                "hyperbolic": r.hyperbolic,
                "in_domain": r.in_domain,
            })
        })
        .collect();
    Ok(serde_json::Value::from(rows).to_string())
}

#[wasm_bindgen]
pub fn word_report(word: &str) -> Result<String, JsValue> {
    word_report_json(word).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn domain_map(config: &str, word: &str, n: usize) -> Result<Vec<u8>, JsValue> {
    domain_grid(config, word, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn fixed_points(config: &str, word: &str) -> Result<String, JsValue> {
    fixed_points_json(config, word).map_err(|e| JsValue::from_str(&e))
}
