//! Type A and type B inducing schemes built as first-return maps on the
//! truncated Hofbauer extension: inducing times, induced branches, induced
//! potentials, distortion bounds and membership traces.
//!
//! Branch discovery is breadth-first in return time with a hard cap and a
//! per-piece width floor; undiscovered mass is always reported.

use crate::cylinders::{invert_on_itinerary, iterate_on_itinerary, refine_once, refine_partition};
use crate::error::Error;
use crate::hofbauer::{TowerGraph, TowerPoint, TowerStep};
use crate::map_model::{IntervalMap, Potential};
use crate::numerics::{self, Iv};
use crate::Result;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Endpoint tolerance for `f^tau(X_i) = X`.
pub const COVER_TOL: f64 = 1e-9;
/// Pieces narrower than this stop being tracked; their mass is reported as
/// undiscovered.
pub const PIECE_FLOOR: f64 = 1e-13;
const PIECE_CAP: usize = 200_000;

/// One full branch of the induced map: `f^tau` maps `domain` onto the base.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InducedBranch {
    /// `X_i`, a subinterval of the base.
    pub domain: Iv,
    pub tau: usize,
    /// Tower domains visited at steps `0..=tau`.
    pub tower_itinerary: Vec<usize>,
    /// Branch indices of the original map along the block (length `tau`).
    pub map_itinerary: Vec<u32>,
    /// Whether `f^tau` is increasing on the branch.
    pub increasing: bool,
}

impl InducedBranch {
    /// `f^tau` restricted to (an extension of) the branch.
    pub fn apply(&self, map: &IntervalMap, x: f64) -> f64 {
        iterate_on_itinerary(map, &self.map_itinerary, x)
    }

    /// `|Df^tau(x)|` by the chain rule along the stored itinerary.
    pub fn derivative_abs(&self, map: &IntervalMap, x: f64) -> f64 {
        let mut y = x;
        let mut d = 1.0f64;
        for &b in &self.map_itinerary {
            d *= map.branches()[b as usize].deriv(y);
            y = map.eval_on_branch(b as usize, y);
        }
        d.abs()
    }

    /// Inverse branch `X -> X_i`.
    pub fn invert(&self, map: &IntervalMap, y: f64) -> f64 {
        invert_on_itinerary(map, &self.map_itinerary, self.domain, y)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum SchemeKind {
    /// Base set is one interval compactly inside a single tower domain;
    /// `boundary_distance` records the distance to the domain boundary
    /// (zero when the base is the whole domain).
    TypeA { boundary_distance: f64 },
    /// Base set is the union of the copies of `X` in every transitive-part
    /// domain whose projection contains the `delta`-scaled neighbourhood.
    TypeB { delta: f64, x_prime: Iv, components: Vec<usize> },
}

/// Outcome of the type B lift-independence cross-check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiftIndependence {
    pub samples: usize,
    pub mismatches: usize,
    /// Walks that left the truncation before deciding (components too close
    /// to the level cap); these say nothing about independence.
    pub untrackable: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InducingScheme {
    /// `X`, always a cylinder of some `P_n`.
    pub base: Iv,
    /// Cylinder coordinates of the base: `(depth, index)`.
    pub base_cylinder: (usize, usize),
    /// Tower domain holding the primary copy of the base.
    pub base_domain: usize,
    pub kind: SchemeKind,
    pub branches: Vec<InducedBranch>,
    /// Fraction of `|X|` covered by discovered branch domains.
    pub coverage: f64,
    /// Mass returning to the base without covering it (tolerance artifacts).
    pub partial_return_mass: f64,
    /// Mass leaving the tower truncation.
    pub escaped_mass: f64,
    /// Mass still unresolved at the return-time cap (plus dropped slivers).
    pub unresolved_mass: f64,
    pub tau_cap: usize,
    pub lift_check: Option<LiftIndependence>,
    pub warnings: Vec<String>,
}

impl InducingScheme {
    /// Branch containing `x`, by interval lookup with a left-endpoint
    /// convention. `None` when `x` falls in an undiscovered gap.
    pub fn branch_at(&self, x: f64) -> Option<usize> {
        self.branches
            .iter()
            .position(|b| b.domain.a - 1e-12 <= x && x <= b.domain.b + 1e-12)
    }

    /// Serialize to the JSON layout used by the `induce` subcommand.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "base": [self.base.a, self.base.b],
            "base_cylinder": { "depth": self.base_cylinder.0, "index": self.base_cylinder.1 },
            "kind": match &self.kind {
                SchemeKind::TypeA { boundary_distance } =>
                    serde_json::json!({"type": "A", "boundary_distance": boundary_distance}),
                SchemeKind::TypeB { delta, x_prime, components } =>
                    serde_json::json!({"type": "B", "delta": delta,
                        "x_prime": [x_prime.a, x_prime.b], "components": components}),
            },
            "coverage": self.coverage,
            "escaped_mass": self.escaped_mass,
            "unresolved_mass": self.unresolved_mass,
            "tau_cap": self.tau_cap,
            "branches": self.branches.iter().map(|b| serde_json::json!({
                "interval": [b.domain.a, b.domain.b],
                "tau": b.tau,
                "tower_itinerary": b.tower_itinerary,
                "map_itinerary": b.map_itinerary,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Locate an interval among the cylinders of `P_0..P_max_depth`.
pub fn find_cylinder(map: &IntervalMap, iv: Iv, max_depth: usize) -> Option<(usize, usize)> {
    let mut part = refine_partition(map, 0);
    for depth in 0..=max_depth {
        if let Some(idx) = part
            .cylinders
            .iter()
            .position(|c| c.interval.close_to(&iv, 1e-9))
        {
            return Some((depth, idx));
        }
        // no cylinder can match once all are narrower than the target
        if part.cylinders.iter().all(|c| c.interval.len() < iv.len() - 1e-9) {
            return None;
        }
        part = refine_once(map, &part);
    }
    None
}

struct Piece {
    pull: Iv,
    cur: Iv,
    domain: usize,
    map_itin: Vec<u32>,
    tower_itin: Vec<usize>,
    increasing: bool,
}

impl Piece {
    /// Pull a point of the current image back to base coordinates.
    fn pull_point(&self, map: &IntervalMap, y: f64) -> f64 {
        if self.map_itin.is_empty() {
            return y;
        }
        invert_on_itinerary(map, &self.map_itin, self.pull, y)
    }

    /// Split at interior points of the current image (sorted), keeping the
    /// pullback correspondence.
    fn split_at(&self, map: &IntervalMap, points: &[f64]) -> Vec<(Iv, Iv)> {
        let interior: Vec<f64> = points
            .iter()
            .copied()
            .filter(|&p| p > self.cur.a + 1e-15 && p < self.cur.b - 1e-15)
            .collect();
        if interior.is_empty() {
            return vec![(self.pull, self.cur)];
        }
        let mut cur_bounds = vec![self.cur.a];
        cur_bounds.extend(interior.iter());
        cur_bounds.push(self.cur.b);
        let mut pulls: Vec<f64> = interior.iter().map(|&p| self.pull_point(map, p)).collect();
        if !self.increasing {
            pulls.reverse();
        }
        let mut pull_bounds = vec![self.pull.a];
        pull_bounds.extend(pulls);
        pull_bounds.push(self.pull.b);
        let k = cur_bounds.len() - 1;
        (0..k)
            .map(|j| {
                let cur = Iv::new(cur_bounds[j], cur_bounds[j + 1]);
                let pull = if self.increasing {
                    Iv::new(pull_bounds[j], pull_bounds[j + 1])
                } else {
                    Iv::new(pull_bounds[k - 1 - j], pull_bounds[k - 1 - j + 1])
                };
                (pull, cur)
            })
            .collect()
    }
}

/// First-return scheme over the copy of `base` inside `domain_id`.
/// The base must be (the closure of) a cylinder and either coincide with the
/// domain or be compactly contained in it.
pub fn build_scheme_type_a(
    tower: &TowerGraph,
    map: &IntervalMap,
    domain_id: usize,
    base: Iv,
    tau_cap: usize,
) -> Result<InducingScheme> {
    let dom = tower
        .domains
        .get(domain_id)
        .ok_or_else(|| Error::Precondition(format!("no tower domain {domain_id}")))?;
    let left = base.a - dom.interval.a;
    let right = dom.interval.b - base.b;
    if left < -1e-9 || right < -1e-9 {
        return Err(Error::Precondition(format!(
            "base [{}, {}] not contained in domain {:?}",
            base.a, base.b, dom.interval
        )));
    }
    // the theory wants compact containment; oracle bases touching the
    // boundary are admitted with a zero recorded distance
    let boundary_distance = left.min(right).max(0.0);
    let base_cylinder = find_cylinder(map, base, 14).ok_or_else(|| {
        Error::Precondition(format!("base [{}, {}] is not a cylinder of any P_n (n <= 14)", base.a, base.b))
    })?;
    let kind = SchemeKind::TypeA { boundary_distance };
    explore(tower, map, base, base_cylinder, domain_id, vec![domain_id], kind, tau_cap)
}

/// Type B scheme: base copies in every transitive-part domain whose
/// projection contains the `delta`-scaled neighbourhood `X'` of `X`.
pub fn build_scheme_type_b(
    tower: &TowerGraph,
    map: &IntervalMap,
    base: Iv,
    delta: f64,
    tau_cap: usize,
) -> Result<InducingScheme> {
    if delta <= 0.0 {
        return Err(Error::Precondition("delta must be positive".into()));
    }
    let base_cylinder = find_cylinder(map, base, 14).ok_or_else(|| {
        Error::Precondition(format!("base [{}, {}] is not a cylinder of any P_n (n <= 14)", base.a, base.b))
    })?;
    let pad = delta * base.len();
    let x_prime = Iv::new((base.a - pad).max(0.0), (base.b + pad).min(1.0));
    let tpart = tower.transitive_part();
    let components: Vec<usize> = tower
        .domains
        .iter()
        .filter(|d| {
            tpart.contains(d.id)
                && d.interval.a <= x_prime.a + 1e-12
                && d.interval.b >= x_prime.b - 1e-12
        })
        .map(|d| d.id)
        .collect();
    if components.is_empty() {
        return Err(Error::EmptyScheme(format!(
            "no transitive-part domain projects over X' = [{}, {}]",
            x_prime.a, x_prime.b
        )));
    }
    let primary = components[0];
    let kind = SchemeKind::TypeB { delta, x_prime, components: components.clone() };
    let mut scheme = explore(tower, map, base, base_cylinder, primary, components, kind, tau_cap)?;
    scheme.lift_check = Some(lift_independence_check(tower, map, &scheme, 200));
    Ok(scheme)
}

#[allow(clippy::too_many_arguments)]
fn explore(
    tower: &TowerGraph,
    map: &IntervalMap,
    base: Iv,
    base_cylinder: (usize, usize),
    primary: usize,
    return_domains: Vec<usize>,
    kind: SchemeKind,
    tau_cap: usize,
) -> Result<InducingScheme> {
    let cuts = map.cut_points();
    let mut warnings = Vec::new();
    let mut branches: Vec<InducedBranch> = Vec::new();
    let mut partial_return_mass = 0.0;
    let mut escaped_mass = 0.0;
    let mut dropped_mass = 0.0;
    let mut active = vec![Piece {
        pull: base,
        cur: base,
        domain: primary,
        map_itin: Vec::new(),
        tower_itin: vec![primary],
        increasing: true,
    }];
    for _t in 1..=tau_cap {
        let mut next: Vec<Piece> = Vec::new();
        for piece in active.drain(..) {
            for (pull, cur) in piece.split_at(map, &cuts) {
                if pull.len() < PIECE_FLOOR {
                    dropped_mass += pull.len();
                    continue;
                }
                // advance one map step, following the tower edge of the piece
                let branch_idx = map.branch_index(cur.mid());
                let fa = map.eval_on_branch(branch_idx, cur.a).clamp(0.0, 1.0);
                let fb = map.eval_on_branch(branch_idx, cur.b).clamp(0.0, 1.0);
                let img = Iv::new(fa, fb);
                let target = if tower.domains[piece.domain].expanded {
                    tower.edges[piece.domain]
                        .iter()
                        .find(|e| e.piece.contains(cur.mid()))
                        .and_then(|e| e.target)
                } else {
                    None
                };
                let Some(target) = target else {
                    escaped_mass += pull.len();
                    continue;
                };
                let dec = matches!(
                    map.branches()[branch_idx].orientation,
                    crate::map_model::Orientation::Decreasing
                );
                let mut map_itin = piece.map_itin.clone();
                map_itin.push(branch_idx as u32);
                let mut tower_itin = piece.tower_itin.clone();
                tower_itin.push(target);
                let q = Piece {
                    pull,
                    cur: img,
                    domain: target,
                    map_itin,
                    tower_itin,
                    increasing: piece.increasing ^ dec,
                };
                if return_domains.contains(&target) {
                    let covers = img.a <= base.a + COVER_TOL && img.b >= base.b - COVER_TOL;
                    if covers {
                        let xa = q.pull_point(map, base.a);
                        let xb = q.pull_point(map, base.b);
                        branches.push(InducedBranch {
                            domain: Iv::new(xa, xb),
                            tau: q.map_itin.len(),
                            tower_itinerary: q.tower_itin.clone(),
                            map_itinerary: q.map_itin.clone(),
                            increasing: q.increasing,
                        });
                        // remainders outside the base continue
                        for (rp, rc) in q.split_at(map, &[base.a, base.b]) {
                            if rc.b <= base.a + 1e-15 || rc.a >= base.b - 1e-15 {
                                if rp.len() >= PIECE_FLOOR {
                                    next.push(Piece {
                                        pull: rp,
                                        cur: rc,
                                        domain: target,
                                        map_itin: q.map_itin.clone(),
                                        tower_itin: q.tower_itin.clone(),
                                        increasing: q.increasing,
                                    });
                                } else {
                                    dropped_mass += rp.len();
                                }
                            }
                        }
                    } else if let Some(overlap) = img.intersect(&base) {
                        // returned but not onto: report, stop that part
                        let oa = q.pull_point(map, overlap.a);
                        let ob = q.pull_point(map, overlap.b);
                        partial_return_mass += (ob - oa).abs();
                        for (rp, rc) in q.split_at(map, &[overlap.a, overlap.b]) {
                            if rc.b <= overlap.a + 1e-15 || rc.a >= overlap.b - 1e-15 {
                                if rp.len() >= PIECE_FLOOR {
                                    next.push(Piece {
                                        pull: rp,
                                        cur: rc,
                                        domain: target,
                                        map_itin: q.map_itin.clone(),
                                        tower_itin: q.tower_itin.clone(),
                                        increasing: q.increasing,
                                    });
                                } else {
                                    dropped_mass += rp.len();
                                }
                            }
                        }
                    } else {
                        next.push(q);
                    }
                } else {
                    next.push(q);
                }
            }
        }
        if next.len() > PIECE_CAP {
            next.sort_by(|a, b| b.pull.len().partial_cmp(&a.pull.len()).unwrap());
            for p in next.drain(PIECE_CAP..) {
                dropped_mass += p.pull.len();
            }
            warnings.push(format!("piece cap {PIECE_CAP} hit; smallest pieces dropped"));
        }
        active = next;
        if active.is_empty() {
            break;
        }
    }
    let unresolved_mass =
        dropped_mass + active.iter().map(|p| p.pull.len()).sum::<f64>();
    branches.sort_by(|a, b| a.domain.a.partial_cmp(&b.domain.a).unwrap());
    let covered: f64 = branches.iter().map(|b| b.domain.len()).sum();
    let coverage = covered / base.len();
    if branches.is_empty() {
        return Err(Error::EmptyScheme(format!(
            "no full return branch found up to tau_cap {tau_cap}"
        )));
    }
    if coverage < 0.5 {
        warnings.push(format!("coverage {coverage:.4} below 0.5 after tau_cap {tau_cap}"));
    }
    Ok(InducingScheme {
        base,
        base_cylinder,
        base_domain: primary,
        kind,
        branches,
        coverage,
        partial_return_mass,
        escaped_mass,
        unresolved_mass,
        tau_cap,
        lift_check: None,
        warnings,
    })
}

/// Check that the type B inducing time does not depend on the lift: sample
/// points of discovered branches, lift to each non-primary component, and
/// compare first entry times into the base-copy union.
fn lift_independence_check(
    tower: &TowerGraph,
    map: &IntervalMap,
    scheme: &InducingScheme,
    max_samples: usize,
) -> LiftIndependence {
    let SchemeKind::TypeB { components, .. } = &scheme.kind else {
        return LiftIndependence { samples: 0, mismatches: 0, untrackable: 0 };
    };
    let others: Vec<usize> = components.iter().copied().filter(|&d| d != scheme.base_domain).collect();
    if others.is_empty() {
        return LiftIndependence { samples: 0, mismatches: 0, untrackable: 0 };
    }
    let mut samples = 0usize;
    let mut mismatches = 0usize;
    let mut untrackable = 0usize;
    'outer: for b in &scheme.branches {
        for &d in &others {
            if samples >= max_samples {
                break 'outer;
            }
            let x = b.domain.mid();
            let mut p = TowerPoint { x, domain: d };
            let mut time = 0usize;
            let entered = loop {
                match tower.step(map, p) {
                    TowerStep::Inside(q) => {
                        time += 1;
                        p = q;
                        if components.contains(&q.domain) && scheme.base.contains(q.x) {
                            break Ok(time);
                        }
                        if time > scheme.tau_cap + b.tau {
                            break Ok(usize::MAX);
                        }
                    }
                    TowerStep::Escaped { .. } => break Err(()),
                }
            };
            samples += 1;
            match entered {
                Err(()) => untrackable += 1,
                Ok(t) if t != b.tau => mismatches += 1,
                Ok(_) => {}
            }
        }
    }
    LiftIndependence { samples, mismatches, untrackable }
}

/// Candidate `(domain, boundary distance)` pairs for siting a type A base
/// over the cylinder `X`. The spectral theory picks such sets abstractly;
/// here the choice is the user's, so the candidates are just listed.
pub fn scheme_candidates(tower: &TowerGraph, base: Iv) -> Vec<(usize, f64)> {
    let tpart = tower.transitive_part();
    let mut out: Vec<(usize, f64)> = tower
        .domains
        .iter()
        .filter(|d| tpart.contains(d.id))
        .filter_map(|d| {
            let left = base.a - d.interval.a;
            let right = d.interval.b - base.b;
            if left >= -1e-9 && right >= -1e-9 {
                Some((d.id, left.min(right).max(0.0)))
            } else {
                None
            }
        })
        .collect();
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    out
}

// ---------------------------------------------------------------------------
// Induced potentials
// ---------------------------------------------------------------------------

/// Per-branch sampled data of an induced potential `Phi = S_tau phi` and of
/// `log|DF|`; sup/inf come from the shared sample set so that combinations
/// `-t log|DF| + q Phi` can be bounded per branch after the fact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchPotential {
    pub xs: Vec<f64>,
    pub phi: Vec<f64>,
    pub log_df: Vec<f64>,
    pub phi_sup: f64,
    pub phi_inf: f64,
    pub log_df_sup: f64,
    pub log_df_inf: f64,
    /// A sample hit a singular potential value inside the branch.
    pub singular: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InducedPotentialData {
    pub branches: Vec<BranchPotential>,
}

impl InducedPotentialData {
    /// Value of `psi = -t log|DF| + q Phi` at sample `j` of branch `i`.
    pub fn psi(&self, i: usize, j: usize, t: f64, q: f64) -> f64 {
        let b = &self.branches[i];
        -t * b.log_df[j] + q * b.phi[j]
    }

    pub fn psi_sup(&self, i: usize, t: f64, q: f64) -> f64 {
        let b = &self.branches[i];
        (0..b.xs.len())
            .map(|j| -t * b.log_df[j] + q * b.phi[j])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn psi_inf(&self, i: usize, t: f64, q: f64) -> f64 {
        let b = &self.branches[i];
        (0..b.xs.len())
            .map(|j| -t * b.log_df[j] + q * b.phi[j])
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest oscillation of `Phi` or `log|DF|` within a branch; zero means
    /// the induced data is locally constant and word sums are exact.
    pub fn max_oscillation(&self) -> f64 {
        self.branches
            .iter()
            .map(|b| (b.phi_sup - b.phi_inf).max(b.log_df_sup - b.log_df_inf))
            .fold(0.0, f64::max)
    }
}

/// Sample `Phi_i = S_{tau_i} phi` and `log|DF|` on each branch: endpoints
/// (inset by a hair) plus Chebyshev interior points, doubled until the
/// recorded sup/inf move by less than 1e-8.
pub fn induced_potential(
    scheme: &InducingScheme,
    map: &IntervalMap,
    phi: &Potential,
) -> InducedPotentialData {
    let branches = scheme
        .branches
        .iter()
        .map(|b| {
            let mut n = 33usize;
            let mut best: Option<BranchPotential> = None;
            loop {
                let mut xs = numerics::chebyshev_points(b.domain.a, b.domain.b, n);
                let inset = 1e-9 * b.domain.len().max(1e-6);
                xs.push(b.domain.a + inset);
                xs.push(b.domain.b - inset);
                let mut phi_vals = Vec::with_capacity(xs.len());
                let mut ldf_vals = Vec::with_capacity(xs.len());
                let mut singular = false;
                for &x in &xs {
                    let mut s = 0.0f64;
                    let mut y = x;
                    let mut ldf = 0.0f64;
                    for &bi in &b.map_itinerary {
                        let v = phi.eval(map, y);
                        if !v.is_finite() {
                            singular = true;
                        } else {
                            s += v;
                        }
                        let d = map.branches()[bi as usize].deriv(y).abs();
                        if d > 0.0 {
                            ldf += d.ln();
                        } else {
                            singular = true;
                        }
                        y = map.eval_on_branch(bi as usize, y);
                    }
                    phi_vals.push(s);
                    ldf_vals.push(ldf);
                }
                let sup = phi_vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let inf = phi_vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let lsup = ldf_vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let linf = ldf_vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let cand = BranchPotential {
                    xs,
                    phi: phi_vals,
                    log_df: ldf_vals,
                    phi_sup: sup,
                    phi_inf: inf,
                    log_df_sup: lsup,
                    log_df_inf: linf,
                    singular,
                };
                match &best {
                    Some(prev)
                        if (prev.phi_sup - cand.phi_sup).abs() < 1e-8
                            && (prev.phi_inf - cand.phi_inf).abs() < 1e-8 =>
                    {
                        break cand;
                    }
                    _ if n >= 129 => break cand,
                    _ => {
                        best = Some(cand);
                        n *= 2;
                    }
                }
            }
        })
        .collect();
    InducedPotentialData { branches }
}

// ---------------------------------------------------------------------------
// Orbit traces, distortion, tails
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitReason {
    /// Completed all requested induced steps: certifies membership of the
    /// depth-k approximation of `(X, F)^infinity`.
    Completed,
    /// Fell into a gap between discovered branch domains.
    Undiscovered { step: usize },
    /// Left the base entirely (numerical boundary effects).
    Escaped { step: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MembershipTrace {
    pub branch_sequence: Vec<usize>,
    pub exit: ExitReason,
}

/// Iterate the induced map while the orbit stays in discovered branch
/// domains.
pub fn orbit_in_scheme(
    scheme: &InducingScheme,
    map: &IntervalMap,
    x: f64,
    k: usize,
) -> MembershipTrace {
    let mut seq = Vec::new();
    let mut y = x;
    for step in 0..k {
        if !(scheme.base.a - 1e-12 <= y && y <= scheme.base.b + 1e-12) {
            return MembershipTrace { branch_sequence: seq, exit: ExitReason::Escaped { step } };
        }
        let Some(i) = scheme.branch_at(y) else {
            return MembershipTrace { branch_sequence: seq, exit: ExitReason::Undiscovered { step } };
        };
        seq.push(i);
        y = scheme.branches[i].apply(map, y);
    }
    MembershipTrace { branch_sequence: seq, exit: ExitReason::Completed }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistortionBound {
    /// `max DF(x)/DF(y)` over sampled pairs, maximised over branches.
    pub k: f64,
    pub witness_branch: usize,
}

/// Sampled distortion constant; exactly 1 for piecewise-linear schemes.
pub fn distortion_bound(scheme: &InducingScheme, map: &IntervalMap) -> Result<DistortionBound> {
    if scheme.branches.is_empty() {
        return Err(Error::EmptyScheme("distortion bound needs branches".into()));
    }
    let mut k = 1.0f64;
    let mut witness = 0usize;
    for (i, b) in scheme.branches.iter().enumerate() {
        let mut dmax = f64::NEG_INFINITY;
        let mut dmin = f64::INFINITY;
        for x in numerics::chebyshev_points(b.domain.a, b.domain.b, 33) {
            let d = b.derivative_abs(map, x);
            dmax = dmax.max(d);
            dmin = dmin.min(d);
        }
        if dmin > 0.0 {
            let ki = dmax / dmin;
            if ki > k {
                k = ki;
                witness = i;
            }
        }
    }
    Ok(DistortionBound { k, witness_branch: witness })
}

/// How branch mass is weighted in the return-time tail.
pub enum TailWeights<'a> {
    /// Normalized Lebesgue length `|X_i| / |X|`.
    Lebesgue,
    /// `e^{Phi_i}` at the branch midpoint sample.
    Potential(&'a InducedPotentialData),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailBar {
    pub count: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReturnTimeTail {
    pub per_tau: BTreeMap<usize, TailBar>,
    /// Slope of `log mass` against `tau` when at least three distinct return
    /// times carry mass.
    pub slope: Option<f64>,
}

pub fn return_time_tail(
    scheme: &InducingScheme,
    map: &IntervalMap,
    weights: TailWeights,
) -> Result<ReturnTimeTail> {
    if scheme.branches.is_empty() {
        return Err(Error::EmptyScheme("return-time tail needs branches".into()));
    }
    let mut per_tau: BTreeMap<usize, TailBar> = BTreeMap::new();
    for (i, b) in scheme.branches.iter().enumerate() {
        let mass = match &weights {
            TailWeights::Lebesgue => b.domain.len() / scheme.base.len(),
            TailWeights::Potential(data) => {
                let bp = &data.branches[i];
                let mid = bp.phi[bp.phi.len() / 2];
                mid.exp()
            }
        };
        let _ = map;
        let e = per_tau.entry(b.tau).or_insert(TailBar { count: 0, mass: 0.0 });
        e.count += 1;
        e.mass += mass;
    }
    let pts: Vec<(f64, f64)> = per_tau
        .iter()
        .filter(|(_, bar)| bar.mass > 0.0)
        .map(|(&n, bar)| (n as f64, bar.mass.ln()))
        .collect();
    let slope = if pts.len() >= 3 {
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        numerics::linear_fit(&xs, &ys).map(|f| f.slope)
    } else {
        None
    };
    Ok(ReturnTimeTail { per_tau, slope })
}
