//! Counting, isolating and classifying fixed points.

mod contour;
mod isolate;

pub use contour::{displacement_winding, winding_with_value, Contour};
pub use isolate::{isolate_fixed_points, isolate_report, IsolationReport};

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::germ::{DiskDomain, Germ};
use crate::pseudogroup::{Closure, PseudogroupElement};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("outside the evaluable region at {0}")]
    OutOfDomain(C),
    #[error("{0}")]
    Failed(String),
}

/// Anything that can be evaluated with its derivative.
pub trait HolomorphicMap: Sync {
    fn eval_d(&self, z: C) -> Result<(C, C), MapError>;

    fn label(&self) -> String;

    /// `(in_domain, near_boundary)` for a fixed point found at `z`.
    fn domain_flags(&self, _z: C, _tol: f64) -> (bool, bool) {
        (true, false)
    }
}

impl HolomorphicMap for Germ {
    fn eval_d(&self, z: C) -> Result<(C, C), MapError> {
        Germ::eval_d(self, z).map_err(|e| match e {
            crate::germ::GermError::OutOfDomain { z, .. } => MapError::OutOfDomain(z),
            other => MapError::Failed(other.to_string()),
        })
    }

    fn label(&self) -> String {
        self.to_string()
    }

    fn domain_flags(&self, z: C, tol: f64) -> (bool, bool) {
        let d = z.norm();
        (d < self.radius(), (d - self.radius()).abs() < 2.0 * tol)
    }
}

impl HolomorphicMap for PseudogroupElement {
    fn eval_d(&self, z: C) -> Result<(C, C), MapError> {
        PseudogroupElement::eval_d(self, z).map_err(|e| match e {
            crate::pseudogroup::PgError::OutOfDomain { point, .. } => MapError::OutOfDomain(point),
            other => MapError::Failed(other.to_string()),
        })
    }

    fn label(&self) -> String {
        self.word().to_string()
    }

    /// In-domain means `p ∈ Dom_W(D)`; near-boundary means closed-domain
    /// membership changes within `2·tol` of `p`.
    fn domain_flags(&self, z: C, tol: f64) -> (bool, bool) {
        let open = self.with_closure(Closure::Open).contains(z);
        let closed = self.with_closure(Closure::Closed);
        let here = closed.contains(z);
        let near = (0..8).any(|k| {
            let q = z + C::from_polar(2.0 * tol, std::f64::consts::TAU * k as f64 / 8.0);
            closed.contains(q) != here
        });
        (open, near)
    }
}

/// A map given by a closure, mostly for tests and perturbed model maps.
pub struct FnMap<F> {
    label: String,
    f: F,
}

impl<F> FnMap<F>
where
    F: Fn(C) -> Result<(C, C), MapError> + Sync,
{
    pub fn new(label: &str, f: F) -> Self {
        FnMap { label: label.to_string(), f }
    }
}

impl<F> HolomorphicMap for FnMap<F>
where
    F: Fn(C) -> Result<(C, C), MapError> + Sync,
{
    fn eval_d(&self, z: C) -> Result<(C, C), MapError> {
        (self.f)(z)
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixedPointOptions {
    /// Subdivision floor (box half-width).
    pub tol: f64,
    pub newton_residual: f64,
    pub tol_hyp: f64,
    /// Minimum displacement `|W(z) − z|` allowed on a contour.
    pub separation: f64,
    pub max_samples: usize,
    /// Matching tolerance as a multiple of `tol`.
    pub match_factor: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            tol: 1e-8,
            newton_residual: 1e-12,
            tol_hyp: 1e-6,
            separation: 1e-9,
            max_samples: 1 << 20,
            match_factor: 10.0,
        }
    }
}

impl FixedPointOptions {
    pub fn match_tol(&self) -> f64 {
        self.match_factor * self.tol
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FixedPointError {
    #[error("contour {contour:?} passes within {min_displacement:e} of a fixed point")]
    SeparationFailure { contour: Contour, min_displacement: f64 },
    #[error("winding quadrature did not settle on {contour:?}")]
    NonConvergence { contour: Contour },
    #[error("map could not be evaluated at {point}: {message}")]
    Evaluation { point: C, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointRecord {
    pub word: String,
    pub location: C,
    pub multiplicity: u32,
    pub multiplier: C,
    pub hyperbolic: bool,
    pub near_boundary: bool,
    pub in_domain: bool,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    word: String,
    re: f64,
    im: f64,
    multiplicity: u32,
    multiplier_re: f64,
    multiplier_im: f64,
    hyperbolic: bool,
    near_boundary: bool,
    in_domain: bool,
}

impl Serialize for FixedPointRecord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RecordLine {
            word: self.word.clone(),
            re: self.location.re,
            im: self.location.im,
            multiplicity: self.multiplicity,
            multiplier_re: self.multiplier.re,
            multiplier_im: self.multiplier.im,
            hyperbolic: self.hyperbolic,
            near_boundary: self.near_boundary,
            in_domain: self.in_domain,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FixedPointRecord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = RecordLine::deserialize(d)?;
        Ok(FixedPointRecord {
            word: r.word,
            location: C::new(r.re, r.im),
            multiplicity: r.multiplicity,
            multiplier: C::new(r.multiplier_re, r.multiplier_im),
            hyperbolic: r.hyperbolic,
            near_boundary: r.near_boundary,
            in_domain: r.in_domain,
        })
    }
}

/// Sets the hyperbolic flag: multiplicity one and `||λ| − 1| > tol_hyp`.
pub fn classify(mut record: FixedPointRecord, tol_hyp: f64) -> FixedPointRecord {
    record.hyperbolic = record.multiplicity == 1 && (record.multiplier.norm() - 1.0).abs() > tol_hyp;
    record
}

/// Pairs of fixed points of the two maps closer than the matching tolerance.
pub fn common_fixed_points(
    map_i: &dyn HolomorphicMap,
    map_j: &dyn HolomorphicMap,
    region: DiskDomain,
    opts: &FixedPointOptions,
) -> Result<Vec<(FixedPointRecord, FixedPointRecord)>, FixedPointError> {
    let ri = isolate_fixed_points(map_i, region, opts)?;
    let rj = isolate_fixed_points(map_j, region, opts)?;
    Ok(match_records(&ri, &rj, opts.match_tol()))
}

pub fn match_records(
    ri: &[FixedPointRecord],
    rj: &[FixedPointRecord],
    tol: f64,
) -> Vec<(FixedPointRecord, FixedPointRecord)> {
    let mut out = Vec::new();
    for a in ri {
        for b in rj {
            if (a.location - b.location).norm() < tol {
                out.push((a.clone(), b.clone()));
            }
        }
    }
    out
}

/// Same winding count in every ball before and after, and no fixed point of
/// the perturbed map in `region` outside the balls.
pub fn verify_count_stability(
    original: &dyn HolomorphicMap,
    perturbed: &dyn HolomorphicMap,
    balls: &[DiskDomain],
    region: DiskDomain,
    opts: &FixedPointOptions,
) -> Result<bool, FixedPointError> {
    for b in balls {
        let contour = Contour::circle(b.center, b.radius);
        let before = displacement_winding(original, &contour, opts)?;
        let after = displacement_winding(perturbed, &contour, opts)?;
        if before != after {
            return Ok(false);
        }
    }
    let records = isolate_fixed_points(perturbed, region, opts)?;
    Ok(records
        .iter()
        .all(|r| balls.iter().any(|b| (r.location - b.center).norm() < b.radius)))
}
