//! Argument-principle counting of fixed points inside a contour.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C;
use serde::Serialize;

use super::{FixedPointError, FixedPointOptions, HolomorphicMap};

pub const MIN_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Contour {
    Circle { center: C, radius: f64 },
    /// Axis-aligned rectangle with half-widths `hw` (real) and `hh` (imaginary).
    Rect { center: C, hw: f64, hh: f64 },
}

impl Contour {
    pub fn circle(center: C, radius: f64) -> Self {
        Contour::Circle { center, radius }
    }

    pub fn square(center: C, half_width: f64) -> Self {
        Contour::Rect { center, hw: half_width, hh: half_width }
    }

    /// Points and quadrature weights for `m` samples; the weights already
    /// include `dz / (2πi)`.
    fn nodes(&self, m: usize) -> Vec<(C, C)> {
        match *self {
            Contour::Circle { center, radius } => (0..m)
                .map(|k| {
                    let e = C::from_polar(1.0, TAU * (k as f64 + 0.5) / m as f64);
                    (center + e * radius, e * radius / m as f64)
                })
                .collect(),
            Contour::Rect { center, hw, hh } => {
                let corners = [
                    center + C::new(-hw, -hh),
                    center + C::new(hw, -hh),
                    center + C::new(hw, hh),
                    center + C::new(-hw, hh),
                ];
                let n = m / 4;
                let scale = C::new(0.0, -1.0 / (TAU * n as f64));
                let mut out = Vec::with_capacity(4 * n);
                for side in 0..4 {
                    let a = corners[side];
                    let b = corners[(side + 1) % 4];
                    for j in 0..n {
                        let s = (j as f64 + 0.5) / n as f64;
                        out.push((a + (b - a) * periodize(s), (b - a) * periodize_d(s) * scale));
                    }
                }
                out
            }
        }
    }
}

/// `φ(s) = s − (2/(3π)) sin 2πs + (1/(12π)) sin 4πs`, with `φ' ∝ sin⁴ πs`.
/// Its derivatives vanish at the corners, so the trapezoid rule on each
/// side converges like on a periodic integrand.
fn periodize(s: f64) -> f64 {
    s - (2.0 / (3.0 * PI)) * (TAU * s).sin() + (1.0 / (12.0 * PI)) * (2.0 * TAU * s).sin()
}

fn periodize_d(s: f64) -> f64 {
    (8.0 / 3.0) * (PI * s).sin().powi(4)
}

/// Quadrature value of `(1/2πi) ∮ (W'−1)/(W−z) dz` with `m` samples.
fn quadrature(map: &dyn HolomorphicMap, contour: &Contour, m: usize, opts: &FixedPointOptions) -> Result<C, FixedPointError> {
    let mut sum = C::default();
    let mut min_disp = f64::INFINITY;
    for (z, w) in contour.nodes(m) {
        let (v, d) = map
            .eval_d(z)
            .map_err(|e| FixedPointError::Evaluation { point: z, message: e.to_string() })?;
        let disp = v - z;
        min_disp = min_disp.min(disp.norm());
        sum += (d - 1.0) / disp * w;
    }
    if !(min_disp > opts.separation) {
        return Err(FixedPointError::SeparationFailure { contour: *contour, min_displacement: min_disp });
    }
    Ok(sum)
}

/// Number of fixed points inside `contour`, with multiplicity. Samples double
/// from `m = 64` until two consecutive values sit within 0.25 of the same
/// integer and the later one within 0.05 of it.
pub fn displacement_winding(map: &dyn HolomorphicMap, contour: &Contour, opts: &FixedPointOptions) -> Result<i64, FixedPointError> {
    winding_with_value(map, contour, opts).map(|(n, _)| n)
}

/// As [`displacement_winding`], also returning the accepted quadrature value.
pub fn winding_with_value(
    map: &dyn HolomorphicMap,
    contour: &Contour,
    opts: &FixedPointOptions,
) -> Result<(i64, C), FixedPointError> {
    let mut m = MIN_SAMPLES;
    let mut prev: Option<C> = None;
    while m <= opts.max_samples {
        let v = quadrature(map, contour, m, opts)?;
        let n = v.re.round();
        let near = |x: C, tol: f64| (x - C::new(n, 0.0)).norm() < tol;
        if let Some(p) = prev {
            if near(p, 0.25) && near(v, 0.25) && near(v, 0.05) {
                return Ok((n as i64, v));
            }
        }
        prev = Some(v);
        m *= 2;
    }
    Err(FixedPointError::NonConvergence { contour: *contour })
}
