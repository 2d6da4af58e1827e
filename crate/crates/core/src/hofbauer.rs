//! Finite truncation of the Hofbauer extension: domains `D = f^k(C_k)`
//! identified by interval equality, the directed graph `D -> D'`, levels,
//! the transitive part, and the extension dynamics with projection and lift.
//!
//! Interval identification "as subsets of I" is implemented as endpoint
//! proximity under a configurable tolerance, and the tolerance is reported so
//! spurious merges can be detected. Truncation is a hard level cap plus a
//! minimum-width floor; escaping mass is reported.

use crate::cylinders::invert_on_itinerary;
use crate::error::Error;
use crate::map_model::{split_at_cuts, IntervalMap};
use crate::numerics::Iv;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_DEDUP_TOL: f64 = 1e-9;
pub const DEFAULT_DOMAIN_CAP: usize = 10_000;

/// One domain of the truncated extension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TowerDomain {
    pub id: usize,
    pub interval: Iv,
    /// Length of the shortest edge path from the base domain.
    pub level: usize,
    /// Depth `k` of the generating cylinder.
    pub witness_depth: usize,
    /// Generating cylinder `C_k` with `f^k(C_k) = interval`.
    pub witness: Iv,
    pub(crate) witness_itinerary: Vec<u32>,
    /// Width fell below the floor; the domain is kept but never expanded.
    pub width_flagged: bool,
    /// Out-edges were computed for this domain.
    pub expanded: bool,
}

/// An edge `D -> D'` labelled by the sub-interval of `D` driving it.
/// `target = None` marks an image dropped by the domain cap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TowerEdge {
    pub piece: Iv,
    pub target: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TruncationReport {
    /// Domains at the level cap whose out-edges were not generated.
    pub unexpanded: usize,
    /// Domains below the width floor.
    pub width_flagged: usize,
    /// The configured domain cap stopped generation.
    pub domain_cap_hit: bool,
}

/// The truncated extension graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TowerGraph {
    pub domains: Vec<TowerDomain>,
    /// Out-edges per domain, ordered left to right by piece.
    pub edges: Vec<Vec<TowerEdge>>,
    pub level_cap: usize,
    pub min_width: f64,
    pub dedup_tol: f64,
    pub truncation: TruncationReport,
}

/// A point of the extension: base coordinate plus domain id.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TowerPoint {
    pub x: f64,
    pub domain: usize,
}

/// Outcome of one extension step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TowerStep {
    Inside(TowerPoint),
    /// The step leaves the truncation; carries the interval the image would
    /// have occupied.
    Escaped { would_be: Iv, from: usize },
}

impl TowerStep {
    pub fn inside(self) -> Option<TowerPoint> {
        match self {
            TowerStep::Inside(p) => Some(p),
            TowerStep::Escaped { .. } => None,
        }
    }
}

/// Breadth-first generation from the base domain `[0, 1]`: split each domain
/// at interior critical/junction points, push each piece forward, and dedupe
/// images against existing domains by endpoint distance.
pub fn build_tower(map: &IntervalMap, level_cap: usize, min_width: f64) -> TowerGraph {
    build_tower_with(map, level_cap, min_width, DEFAULT_DEDUP_TOL, DEFAULT_DOMAIN_CAP)
}

pub fn build_tower_with(
    map: &IntervalMap,
    level_cap: usize,
    min_width: f64,
    dedup_tol: f64,
    domain_cap: usize,
) -> TowerGraph {
    let cuts = map.cut_points();
    let mut domains = vec![TowerDomain {
        id: 0,
        interval: Iv::new(0.0, 1.0),
        level: 0,
        witness_depth: 0,
        witness: Iv::new(0.0, 1.0),
        witness_itinerary: Vec::new(),
        width_flagged: false,
        expanded: false,
    }];
    let mut edges: Vec<Vec<TowerEdge>> = vec![Vec::new()];
    let mut truncation = TruncationReport::default();
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(id) = queue.pop_front() {
        let (interval, level) = (domains[id].interval, domains[id].level);
        if domains[id].width_flagged {
            continue;
        }
        if level >= level_cap {
            truncation.unexpanded += 1;
            continue;
        }
        let mut out = Vec::new();
        for piece in split_at_cuts(interval, &cuts) {
            let fa = map.eval_unchecked(piece.a).clamp(0.0, 1.0);
            let fb = map.eval_unchecked(piece.b).clamp(0.0, 1.0);
            let image = Iv::new(fa, fb);
            let existing = domains.iter().find(|d| d.interval.close_to(&image, dedup_tol));
            let target = match existing {
                Some(d) => Some(d.id),
                None => {
                    if domains.len() >= domain_cap {
                        truncation.domain_cap_hit = true;
                        None
                    } else {
                        let src = &domains[id];
                        // pull the piece back through f^k on the witness cylinder
                        let wa = invert_on_itinerary(map, &src.witness_itinerary, src.witness, piece.a);
                        let wb = invert_on_itinerary(map, &src.witness_itinerary, src.witness, piece.b);
                        let mut itin = src.witness_itinerary.clone();
                        itin.push(map.branch_index(piece.mid()) as u32);
                        let nid = domains.len();
                        let flagged = image.len() < min_width;
                        if flagged {
                            truncation.width_flagged += 1;
                        }
                        domains.push(TowerDomain {
                            id: nid,
                            interval: image,
                            level: level + 1,
                            witness_depth: src.witness_depth + 1,
                            witness: Iv::new(wa, wb),
                            witness_itinerary: itin,
                            width_flagged: flagged,
                            expanded: false,
                        });
                        edges.push(Vec::new());
                        queue.push_back(nid);
                        Some(nid)
                    }
                }
            };
            out.push(TowerEdge { piece, target });
        }
        edges[id] = out;
        domains[id].expanded = true;
    }
    TowerGraph {
        domains,
        edges,
        level_cap,
        min_width,
        dedup_tol,
        truncation,
    }
}

impl TowerGraph {
    pub fn base(&self) -> &TowerDomain {
        &self.domains[0]
    }

    /// No escape routes: every domain expanded and nothing capped.
    pub fn complete(&self) -> bool {
        self.truncation.unexpanded == 0
            && !self.truncation.domain_cap_hit
            && self.truncation.width_flagged == 0
    }

    /// `(f(x), D')` following the unique edge whose piece contains `x`;
    /// shared piece boundaries resolve to the left piece.
    pub fn step(&self, map: &IntervalMap, p: TowerPoint) -> TowerStep {
        let d = &self.domains[p.domain];
        if d.expanded {
            let out = &self.edges[p.domain];
            let mut chosen = out.len() - 1;
            for (i, e) in out.iter().enumerate() {
                if p.x <= e.piece.b {
                    chosen = i;
                    break;
                }
            }
            let e = &out[chosen];
            let fx = map.eval_unchecked(p.x).clamp(0.0, 1.0);
            match e.target {
                Some(t) => TowerStep::Inside(TowerPoint { x: fx, domain: t }),
                None => {
                    let fa = map.eval_unchecked(e.piece.a).clamp(0.0, 1.0);
                    let fb = map.eval_unchecked(e.piece.b).clamp(0.0, 1.0);
                    TowerStep::Escaped { would_be: Iv::new(fa, fb), from: p.domain }
                }
            }
        } else {
            // unexpanded: compute the would-be image on demand
            let cuts = map.cut_points();
            let pieces = split_at_cuts(d.interval, &cuts);
            let mut piece = pieces[pieces.len() - 1];
            for q in &pieces {
                if p.x <= q.b {
                    piece = *q;
                    break;
                }
            }
            let fa = map.eval_unchecked(piece.a).clamp(0.0, 1.0);
            let fb = map.eval_unchecked(piece.b).clamp(0.0, 1.0);
            TowerStep::Escaped { would_be: Iv::new(fa, fb), from: p.domain }
        }
    }

    /// `iota`: the inverse of the projection restricted to the base copy.
    pub fn lift(&self, x: f64) -> Result<TowerPoint> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(x));
        }
        Ok(TowerPoint { x, domain: 0 })
    }

    /// `pi`: forget the domain.
    pub fn project(&self, p: TowerPoint) -> f64 {
        p.x
    }

    /// Maximal closed strongly-connected part of the truncated graph
    /// reachable from the base, forward-closed within the truncation.
    /// Approximate by construction: truncation can hide edges.
    pub fn transitive_part(&self) -> TransitivePart {
        use petgraph::graph::{DiGraph, NodeIndex};
        let mut g: DiGraph<usize, ()> = DiGraph::new();
        let nodes: Vec<NodeIndex> = (0..self.domains.len()).map(|i| g.add_node(i)).collect();
        for (src, out) in self.edges.iter().enumerate() {
            for e in out {
                if let Some(t) = e.target {
                    g.add_edge(nodes[src], nodes[t], ());
                }
            }
        }
        let sccs = petgraph::algo::tarjan_scc(&g);
        // nontrivial: more than one node, or a self-loop
        let mut best: Option<Vec<usize>> = None;
        for scc in &sccs {
            let ids: Vec<usize> = scc.iter().map(|n| g[*n]).collect();
            let nontrivial = ids.len() > 1
                || self.edges[ids[0]]
                    .iter()
                    .any(|e| e.target == Some(ids[0]));
            if !nontrivial {
                continue;
            }
            if best.as_ref().is_none_or(|b| ids.len() > b.len()) {
                best = Some(ids);
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        let warning = match best {
            None => Some("no nontrivial strongly-connected component within truncation".into()),
            Some(seed) => {
                // forward closure within the truncated graph
                let mut stack: Vec<usize> = seed.clone();
                while let Some(d) = stack.pop() {
                    if !ids.insert(d) {
                        continue;
                    }
                    for e in &self.edges[d] {
                        if let Some(t) = e.target {
                            if !ids.contains(&t) {
                                stack.push(t);
                            }
                        }
                    }
                }
                None
            }
        };
        TransitivePart {
            ids,
            approximate: !self.complete(),
            warning,
        }
    }

    /// Domain counts per level plus a flag where the count exceeds the
    /// `2 #Crit` bound expected for multimodal maps.
    pub fn level_census(&self, map: &IntervalMap) -> LevelCensus {
        let crit = map.critical_report(20);
        let folds = crit.points.len() + crit.turning_points.len();
        let bound = 2 * folds.max(1);
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for d in &self.domains {
            *counts.entry(d.level).or_insert(0) += 1;
        }
        let violations: Vec<usize> = counts
            .iter()
            .filter(|(lev, &c)| **lev > 0 && c > bound)
            .map(|(lev, _)| *lev)
            .collect();
        LevelCensus { counts, bound, violations }
    }

    /// Deterministic DOT rendering; nodes labelled `L{level}:[a,b]`, one edge
    /// per driving piece.
    pub fn export_dot(&self) -> String {
        let mut out = String::from("digraph tower {\n");
        for d in &self.domains {
            out.push_str(&format!(
                "  d{} [label=\"L{}:[{:.6},{:.6}]\"];\n",
                d.id, d.level, d.interval.a, d.interval.b
            ));
        }
        for (src, es) in self.edges.iter().enumerate() {
            for e in es {
                if let Some(t) = e.target {
                    out.push_str(&format!("  d{src} -> d{t};\n"));
                }
            }
        }
        out.push_str("}\n");
        out
    }

    /// CSV for the census: `level,count`.
    pub fn census_csv(&self, map: &IntervalMap) -> String {
        let census = self.level_census(map);
        let mut out = String::from("level,count\n");
        for (lev, c) in &census.counts {
            out.push_str(&format!("{lev},{c}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitivePart {
    pub ids: std::collections::BTreeSet<usize>,
    pub approximate: bool,
    pub warning: Option<String>,
}

impl TransitivePart {
    pub fn contains(&self, id: usize) -> bool {
        self.ids.contains(&id)
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelCensus {
    pub counts: BTreeMap<usize, usize>,
    pub bound: usize,
    pub violations: Vec<usize>,
}
