//! Dynamically defined cylinder partitions `P_n` (maximal intervals of
//! monotonicity of `f^n`) and Birkhoff sums along branches.
//!
//! Partitions are computed by endpoint propagation: each refinement pulls the
//! critical/junction set back through the monotone restriction of `f^n`,
//! rather than composing polynomials symbolically, which keeps round-off
//! under control at depth.

use crate::error::Error;
use crate::map_model::{split_at_cuts, IntervalMap, Potential};
use crate::numerics::{self, Iv};
use crate::Result;
use serde::{Deserialize, Serialize};

/// Width below which cylinder endpoints can no longer be separated in double
/// precision; such cylinders are kept but flagged.
pub const WIDTH_FLOOR: f64 = 1e-14;
/// Tolerance of the monotone branch inversion.
pub const INVERT_TOL: f64 = 1e-13;

/// A maximal interval on which `f^n` is a homeomorphism.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cylinder {
    pub depth: usize,
    pub interval: Iv,
    /// Branch index of `f^k(x)` for `k = 0..depth`.
    pub itinerary: Vec<u32>,
    /// `f^depth(interval)`.
    pub image: Iv,
    /// Width underflowed the separation floor during refinement.
    pub truncated: bool,
}

impl Cylinder {
    /// Whether `f^depth` is increasing on this cylinder.
    pub fn increasing(&self, map: &IntervalMap) -> bool {
        let mut inc = true;
        let mut iv = self.interval;
        for &b in &self.itinerary {
            let branch = &map.branches()[b as usize];
            if matches!(branch.orientation, crate::map_model::Orientation::Decreasing) {
                inc = !inc;
            }
            let fa = map.eval_on_branch(b as usize, iv.a);
            let fb = map.eval_on_branch(b as usize, iv.b);
            iv = Iv::new(fa, fb);
        }
        inc
    }
}

/// The ordered partition `P_n` with a point-location index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Partition {
    pub depth: usize,
    pub cylinders: Vec<Cylinder>,
    /// Some cylinder hit the width floor.
    pub truncation_warning: bool,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.cylinders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cylinders.is_empty()
    }

    /// Containing cylinder; shared endpoints resolve to the left cylinder.
    pub fn cylinder_at(&self, x: f64) -> &Cylinder {
        let mut lo = 0usize;
        let mut hi = self.cylinders.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if x <= self.cylinders[mid].interval.b {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        &self.cylinders[lo]
    }

    pub fn index_of(&self, x: f64) -> usize {
        let mut lo = 0usize;
        let mut hi = self.cylinders.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if x <= self.cylinders[mid].interval.b {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }
}

/// Evaluate `f^n` restricted to a known itinerary (branch indices), which
/// stays defined slightly outside the cylinder and is what the inversion
/// bisects on.
pub(crate) fn iterate_on_itinerary(map: &IntervalMap, itinerary: &[u32], x: f64) -> f64 {
    let mut y = x;
    for &b in itinerary {
        y = map.eval_on_branch(b as usize, y);
    }
    y
}

fn iterate_deriv_on_itinerary(map: &IntervalMap, itinerary: &[u32], x: f64) -> f64 {
    let mut y = x;
    let mut d = 1.0;
    for &b in itinerary {
        d *= map.branches()[b as usize].deriv(y);
        y = map.eval_on_branch(b as usize, y);
    }
    d
}

/// Build `P_n` by iterated subdivision of `P_{n-1}` at preimages of branch
/// endpoints and critical points.
pub fn refine_partition(map: &IntervalMap, n: usize) -> Partition {
    let mut part = Partition {
        depth: 0,
        cylinders: vec![Cylinder {
            depth: 0,
            interval: Iv::new(0.0, 1.0),
            itinerary: Vec::new(),
            image: Iv::new(0.0, 1.0),
            truncated: false,
        }],
        truncation_warning: false,
    };
    for _ in 0..n {
        part = refine_once(map, &part);
    }
    part
}

/// One refinement step `P_{n-1} -> P_n`.
pub fn refine_once(map: &IntervalMap, part: &Partition) -> Partition {
    let cuts = map.cut_points();
    let mut cylinders = Vec::with_capacity(part.cylinders.len() * map.branch_count());
    let mut warning = part.truncation_warning;
    for cyl in &part.cylinders {
        let increasing = cyl.depth == 0 || cyl.increasing(map);
        let image_pieces = split_at_cuts(cyl.image, &cuts);
        // pull each interior cut back through f^depth restricted to the cylinder
        let mut boundary = vec![cyl.interval.a];
        let interior_cuts: Vec<f64> = image_pieces.iter().skip(1).map(|p| p.a).collect();
        let mut pullbacks: Vec<f64> = interior_cuts
            .iter()
            .map(|&c| invert_on_itinerary(map, &cyl.itinerary, cyl.interval, c))
            .collect();
        if !increasing {
            pullbacks.reverse();
        }
        boundary.extend(pullbacks);
        boundary.push(cyl.interval.b);
        let k = boundary.len() - 1;
        for j in 0..k {
            let sub = Iv::new(boundary[j], boundary[j + 1]);
            // the f^depth image of this sub-piece is one of the image pieces
            let piece = if increasing { image_pieces[j] } else { image_pieces[k - 1 - j] };
            let branch = map.branch_index(piece.mid()) as u32;
            let fa = map.eval_on_branch(branch as usize, piece.a);
            let fb = map.eval_on_branch(branch as usize, piece.b);
            let mut itin = cyl.itinerary.clone();
            itin.push(branch);
            let truncated = sub.len() < WIDTH_FLOOR;
            warning |= truncated;
            cylinders.push(Cylinder {
                depth: cyl.depth + 1,
                interval: sub,
                itinerary: itin,
                image: Iv::new(fa.clamp(0.0, 1.0), fb.clamp(0.0, 1.0)),
                truncated: truncated || cyl.truncated,
            });
        }
    }
    Partition {
        depth: part.depth + 1,
        cylinders,
        truncation_warning: warning,
    }
}

pub(crate) fn invert_on_itinerary(
    map: &IntervalMap,
    itinerary: &[u32],
    domain: Iv,
    target: f64,
) -> f64 {
    let f = |x: f64| iterate_on_itinerary(map, itinerary, x);
    let root = numerics::bisect_monotone(&f, domain.a, domain.b, target, INVERT_TOL);
    numerics::newton_polish(
        &f,
        &|x| iterate_deriv_on_itinerary(map, itinerary, x),
        root,
        domain.a,
        domain.b,
        target,
        4,
    )
}

/// The unique `x` in the cylinder with `f^depth(x) = y`, by monotone
/// bisection polished by derivative iteration.
pub fn invert_branch(map: &IntervalMap, cyl: &Cylinder, y: f64) -> Result<f64> {
    let pad = 1e-12 * (1.0 + cyl.image.len());
    if y < cyl.image.a - pad || y > cyl.image.b + pad {
        return Err(Error::Range(y));
    }
    if cyl.depth == 0 {
        return Ok(y);
    }
    let y = y.clamp(cyl.image.a, cyl.image.b);
    Ok(invert_on_itinerary(map, &cyl.itinerary, cyl.interval, y))
}

/// A Birkhoff sum value; `singular_hit` carries the first orbit index where a
/// log-singular potential was evaluated at a critical point, in which case
/// `value` is the negative-infinity sentinel.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BirkhoffSum {
    pub value: f64,
    pub singular_hit: Option<usize>,
}

/// `S_n phi(x) = phi(x) + ... + phi(f^{n-1} x)`; for the geometric kind this
/// is `-t log|Df^n(x)|`.
pub fn birkhoff_sum(map: &IntervalMap, phi: &Potential, x: f64, n: usize) -> BirkhoffSum {
    let mut sum = 0.0;
    let mut y = x;
    for k in 0..n {
        let v = phi.eval(map, y);
        if !v.is_finite() {
            return BirkhoffSum {
                value: f64::NEG_INFINITY,
                singular_hit: Some(k),
            };
        }
        sum += v;
        y = map.eval_unchecked(y).clamp(0.0, 1.0);
    }
    BirkhoffSum { value: sum, singular_hit: None }
}

/// Incrementally tracked cylinder `C_n[x]` along an orbit, with its image.
/// Avoids building whole partitions when only one point's cylinders matter.
#[derive(Debug, Clone)]
pub struct CylinderTracker {
    pub depth: usize,
    pub interval: Iv,
    pub image: Iv,
    /// `f^depth(x)`.
    pub orbit_point: f64,
    pub itinerary: Vec<u32>,
    /// Set once the cylinder width underflows; the tracker then refuses to
    /// refine further.
    pub truncated: bool,
    x: f64,
}

impl CylinderTracker {
    pub fn new(x: f64) -> Self {
        CylinderTracker {
            depth: 0,
            interval: Iv::new(0.0, 1.0),
            image: Iv::new(0.0, 1.0),
            orbit_point: x,
            itinerary: Vec::new(),
            truncated: false,
            x,
        }
    }

    /// Refine to depth + 1. Returns false when the width floor stops it.
    pub fn step(&mut self, map: &IntervalMap) -> bool {
        if self.truncated {
            return false;
        }
        let cuts = map.cut_points();
        let pieces = split_at_cuts(self.image, &cuts);
        // piece containing the orbit point, left convention at shared cuts
        let mut piece = pieces[pieces.len() - 1];
        for p in &pieces {
            if self.orbit_point <= p.b {
                piece = *p;
                break;
            }
        }
        let increasing = {
            // orientation of f^depth on the cylinder: image endpoints ordered
            // like interval endpoints
            let fa = iterate_on_itinerary(map, &self.itinerary, self.interval.a);
            (fa - self.image.a).abs() < (fa - self.image.b).abs()
        };
        let mut lo = self.interval.a;
        let mut hi = self.interval.b;
        if piece.a > self.image.a {
            let p = invert_on_itinerary(map, &self.itinerary, self.interval, piece.a);
            if increasing {
                lo = p;
            } else {
                hi = p;
            }
        }
        if piece.b < self.image.b {
            let p = invert_on_itinerary(map, &self.itinerary, self.interval, piece.b);
            if increasing {
                hi = p;
            } else {
                lo = p;
            }
        }
        let branch = map.branch_index(piece.mid());
        let fa = map.eval_on_branch(branch, piece.a);
        let fb = map.eval_on_branch(branch, piece.b);
        self.interval = Iv::new(lo, hi);
        self.image = Iv::new(fa.clamp(0.0, 1.0), fb.clamp(0.0, 1.0));
        self.orbit_point = map.eval_on_branch(branch, self.orbit_point).clamp(0.0, 1.0);
        self.itinerary.push(branch as u32);
        self.depth += 1;
        if self.interval.len() < WIDTH_FLOOR {
            self.truncated = true;
        }
        let _ = self.x;
        true
    }
}

/// CSV emission for the `cylinders` subcommand:
/// `depth,index,a,b,image_a,image_b,itinerary`.
pub fn partition_to_csv(part: &Partition) -> String {
    let mut out = String::from("depth,index,a,b,image_a,image_b,itinerary\n");
    for (i, c) in part.cylinders.iter().enumerate() {
        let itin: Vec<String> = c.itinerary.iter().map(|b| b.to_string()).collect();
        out.push_str(&format!(
            "{},{},{:.11e},{:.11e},{:.11e},{:.11e},{}\n",
            c.depth,
            i,
            c.interval.a,
            c.interval.b,
            c.image.a,
            c.image.b,
            itin.join("-")
        ));
    }
    out
}
