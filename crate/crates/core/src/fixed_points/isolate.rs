//! Quadtree isolation of fixed points driven by winding counts.

use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex64 as C;

use super::contour::{displacement_winding, Contour};
use super::{classify, FixedPointError, FixedPointOptions, FixedPointRecord, HolomorphicMap};
use crate::germ::DiskDomain;

/// Split-point offsets, as fractions of the half-widths, tried in order when
/// a child contour passes too close to a fixed point.
const SPLIT_JITTER: [(f64, f64); 8] = [
    (0.0123, -0.0087),
    (-0.0311, 0.0219),
    (0.0577, 0.0413),
    (-0.0731, -0.0629),
    (0.1013, -0.0911),
    (-0.1231, 0.1117),
    (0.1409, 0.1327),
    (-0.1553, -0.1471),
];

/// Root-square offsets, as fractions of the region radius.
const ROOT_JITTER: [(f64, f64); 8] = [
    (0.0071, 0.0043),
    (-0.0113, 0.0097),
    (0.0157, -0.0139),
    (-0.0199, -0.0181),
    (0.0241, 0.0223),
    (-0.0283, 0.0265),
    (0.0307, -0.0293),
    (-0.0331, -0.0319),
];

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationReport {
    pub records: Vec<FixedPointRecord>,
    /// Boxes dropped because the map could not be evaluated on them.
    pub unevaluable_boxes: usize,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    center: C,
    hw: f64,
    hh: f64,
}

impl Cell {
    fn contour(&self) -> Contour {
        Contour::Rect { center: self.center, hw: self.hw, hh: self.hh }
    }

    fn contains(&self, z: C, slack: f64) -> bool {
        let d = z - self.center;
        d.re.abs() <= self.hw + slack && d.im.abs() <= self.hh + slack
    }

    fn meets(&self, disc: &DiskDomain) -> bool {
        let d = disc.center - self.center;
        let nx = d.re.clamp(-self.hw, self.hw);
        let ny = d.im.clamp(-self.hh, self.hh);
        (d - C::new(nx, ny)).norm() <= disc.radius
    }

    fn size(&self) -> f64 {
        self.hw.max(self.hh)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Count {
    Known(u32),
    Unevaluable,
    Outside,
}

type Found = Vec<(Vec<u8>, FixedPointRecord)>;

struct Ctx<'a> {
    map: &'a dyn HolomorphicMap,
    region: DiskDomain,
    opts: &'a FixedPointOptions,
    unevaluable: AtomicUsize,
    min_unknown: f64,
}

impl Ctx<'_> {
    fn count(&self, cell: &Cell) -> Result<Count, FixedPointError> {
        if !cell.meets(&self.region) {
            return Ok(Count::Outside);
        }
        match displacement_winding(self.map, &cell.contour(), self.opts) {
            Ok(n) if n >= 0 => Ok(Count::Known(n as u32)),
            Ok(_) => Err(FixedPointError::NonConvergence { contour: cell.contour() }),
            Err(FixedPointError::Evaluation { .. }) => Ok(Count::Unevaluable),
            Err(e) => Err(e),
        }
    }

    fn split(&self, cell: &Cell, parent: Option<u32>) -> Result<Vec<(Cell, Count)>, FixedPointError> {
        let mut last_err = None;
        let mut fallback = None;
        for (jx, jy) in SPLIT_JITTER {
            let sx = cell.center.re + jx * cell.hw;
            let sy = cell.center.im + jy * cell.hh;
            let (x0, x1) = (cell.center.re - cell.hw, cell.center.re + cell.hw);
            let (y0, y1) = (cell.center.im - cell.hh, cell.center.im + cell.hh);
            let boxes = [(x0, sx, y0, sy), (sx, x1, y0, sy), (x0, sx, sy, y1), (sx, x1, sy, y1)];
            let mut children = Vec::with_capacity(4);
            let mut failed = false;
            for (a, b, c, d) in boxes {
                let child = Cell {
                    center: C::new(0.5 * (a + b), 0.5 * (c + d)),
                    hw: 0.5 * (b - a),
                    hh: 0.5 * (d - c),
                };
                match self.count(&child) {
                    Ok(n) => children.push((child, n)),
                    Err(e) => {
                        last_err = Some(e);
                        failed = true;
                        break;
                    }
                }
            }
            if failed {
                continue;
            }
            let known: Option<u32> = children
                .iter()
                .map(|(_, n)| match n {
                    Count::Known(k) => Some(*k),
                    _ => None,
                })
                .sum();
            if let (Some(p), Some(s)) = (parent, known) {
                if p != s {
                    fallback.get_or_insert(children);
                    continue;
                }
            }
            return Ok(children);
        }
        match fallback {
            Some(children) => Ok(children),
            None => Err(last_err.expect("at least one split attempt failed")),
        }
    }

    fn descend(&self, cell: &Cell, parent: Option<u32>, addr: &[u8]) -> Result<Found, FixedPointError> {
        let children = self.split(cell, parent)?;
        let work = |(i, (child, n)): (usize, &(Cell, Count))| -> Result<Found, FixedPointError> {
            let mut a = addr.to_vec();
            a.push(i as u8);
            self.process(child, *n, a)
        };
        #[cfg(feature = "parallel")]
        let parts: Vec<Result<Found, FixedPointError>> = {
            use rayon::prelude::*;
            children.par_iter().enumerate().map(work).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let parts: Vec<Result<Found, FixedPointError>> = children.iter().enumerate().map(work).collect();
        let mut out = Vec::new();
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    fn process(&self, cell: &Cell, count: Count, addr: Vec<u8>) -> Result<Found, FixedPointError> {
        let at_floor = cell.size() <= self.opts.tol;
        match count {
            Count::Outside | Count::Known(0) => Ok(Vec::new()),
            Count::Unevaluable => {
                if cell.size() < self.min_unknown {
                    self.unevaluable.fetch_add(1, Ordering::Relaxed);
                    Ok(Vec::new())
                } else {
                    self.descend(cell, None, &addr)
                }
            }
            Count::Known(1) => match self.polish(cell.center, 1.0) {
                Some(p) if cell.contains(p, self.opts.tol) => Ok(vec![(addr, self.record(p, 1))]),
                _ if at_floor => Ok(vec![(addr, self.record(cell.center, 1))]),
                _ => self.descend(cell, Some(1), &addr),
            },
            Count::Known(n) => {
                if let Some(p) = self.multiple_root(cell, n) {
                    return Ok(vec![(addr, self.record(p, n))]);
                }
                if at_floor {
                    let p = self
                        .polish(cell.center, n as f64)
                        .filter(|p| cell.contains(*p, self.opts.tol))
                        .unwrap_or(cell.center);
                    return Ok(vec![(addr, self.record(p, n))]);
                }
                self.descend(cell, Some(n), &addr)
            }
        }
    }

    /// Newton on `W(z) − z`, with step multiplied by `mult` for multiple roots.
    fn polish(&self, z0: C, mult: f64) -> Option<C> {
        let mut z = z0;
        for _ in 0..60 {
            let (w, d) = self.map.eval_d(z).ok()?;
            let f = w - z;
            if f.norm() <= 1e-3 * self.opts.newton_residual {
                return Some(z);
            }
            let fp = d - 1.0;
            if fp == C::default() {
                return None;
            }
            let step = f * mult / fp;
            z -= step;
            if !z.is_finite() {
                return None;
            }
            if step.norm() <= 1e-15 * (1.0 + z.norm()) {
                break;
            }
        }
        let (w, _) = self.map.eval_d(z).ok()?;
        ((w - z).norm() < 100.0 * self.opts.newton_residual).then_some(z)
    }

    /// A single point of multiplicity `n`: modified Newton converges inside
    /// the box, `W' = 1` there, and the count is `n` on two nested circles.
    fn multiple_root(&self, cell: &Cell, n: u32) -> Option<C> {
        let p = self.polish(cell.center, n as f64)?;
        if !cell.contains(p, self.opts.tol) {
            return None;
        }
        let (_, d) = self.map.eval_d(p).ok()?;
        if (d - 1.0).norm() > 1e-6 {
            return None;
        }
        let r1 = 0.5 * cell.hw.min(cell.hh);
        for r in [r1, 0.5 * r1] {
            match displacement_winding(self.map, &Contour::circle(p, r), self.opts) {
                Ok(k) if k == n as i64 => {}
                _ => return None,
            }
        }
        Some(p)
    }

    fn record(&self, p: C, multiplicity: u32) -> FixedPointRecord {
        let multiplier = self.map.eval_d(p).map(|(_, d)| d).unwrap_or(C::new(f64::NAN, f64::NAN));
        let (in_domain, near) = self.map.domain_flags(p, self.opts.tol);
        let near_region = ((p - self.region.center).norm() - self.region.radius).abs() < 2.0 * self.opts.tol;
        classify(
            FixedPointRecord {
                word: self.map.label(),
                location: p,
                multiplicity,
                multiplier,
                hyperbolic: false,
                near_boundary: near || near_region,
                in_domain,
            },
            self.opts.tol_hyp,
        )
    }
}

/// Fixed points in `region`, ordered by quadtree address.
pub fn isolate_fixed_points(
    map: &dyn HolomorphicMap,
    region: DiskDomain,
    opts: &FixedPointOptions,
) -> Result<Vec<FixedPointRecord>, FixedPointError> {
    isolate_report(map, region, opts).map(|r| r.records)
}

pub fn isolate_report(
    map: &dyn HolomorphicMap,
    region: DiskDomain,
    opts: &FixedPointOptions,
) -> Result<IsolationReport, FixedPointError> {
    let r = region.radius;
    let ctx = Ctx { map, region, opts, unevaluable: AtomicUsize::new(0), min_unknown: r / 64.0 };
    let mut root = None;
    let mut last_err = None;
    for (jx, jy) in ROOT_JITTER {
        let off = C::new(jx, jy) * r;
        let half = r * 1.02 + off.re.abs().max(off.im.abs());
        let cell = Cell { center: region.center + off, hw: half, hh: half };
        match ctx.count(&cell) {
            Ok(n) => {
                root = Some((cell, n));
                break;
            }
            Err(e) => last_err = Some(e),
        }
    }
    let Some((cell, n)) = root else {
        return Err(last_err.expect("root attempts recorded an error"));
    };
    let mut found = ctx.process(&cell, n, Vec::new())?;
    found.sort_by(|a, b| a.0.cmp(&b.0));
    let tol = opts.match_tol();
    let mut records: Vec<FixedPointRecord> = Vec::new();
    for (_, rec) in found {
        if (rec.location - region.center).norm() > r + 2.0 * opts.tol {
            continue;
        }
        if records.iter().any(|k| (k.location - rec.location).norm() < tol) {
            continue;
        }
        records.push(rec);
    }
    Ok(IsolationReport { records, unevaluable_boxes: ctx.unevaluable.into_inner() })
}
