//! Pressure estimation: Gurevich-style word sums over the induced full shift,
//! and cylinder sums over the original partitions.
//!
//! Word sums are evaluated through a `WordTable`: for each word the Birkhoff
//! sums of `log|DF|` and of the base potential are stored at three sample
//! orbits, so the pressure of any combination `-t log|DF| + q Phi`
//! re-evaluates in one pass over the table. When both the potential and the
//! branch slopes are constant per branch the sums collapse to the closed
//! full-shift formula and word sums are exact at every depth.

use crate::cylinders::{refine_once, refine_partition};
use crate::error::Error;
use crate::inducing::InducingScheme;
use crate::map_model::{IntervalMap, Potential, PotentialKind};
use crate::numerics::{self, Iv};
use crate::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PressureMethod {
    InducedWordSum,
    OriginalCylinderSum,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PressureEstimate {
    pub value: f64,
    pub method: PressureMethod,
    pub depth_used: usize,
    /// `(1/n) log Z_n` for each computed depth.
    pub sequence: Vec<f64>,
    pub converged: bool,
    /// Base-mass coverage of the truncated scheme (1 for cylinder sums).
    pub truncation_coverage: f64,
    /// Sup over cylinders was sampled, so the estimate is biased low where
    /// the potential blows up at cylinder boundaries.
    pub lower_bound_biased: bool,
}

/// Per-word data: `(log|DF^n|, S_n Phi)` at three sample orbits, plus the
/// original-map time the word occupies and its first symbol.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WordEntry {
    pub samples: [(f64, f64); 3],
    pub tau_sum: usize,
    pub first: u16,
}

/// Precomputed word sums over the widest branches of an inducing scheme.
/// The `(t, q)` dependence enters only at evaluation time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WordTable {
    /// Scheme branch indices forming the alphabet, widest first.
    pub branch_order: Vec<usize>,
    /// Per-symbol `(log|DF|, Phi)` at the three seeds.
    pub branch_samples: Vec<[(f64, f64); 3]>,
    pub branch_taus: Vec<usize>,
    /// `levels[n-1]`: all depth-`n` words; empty when sums are exact.
    pub levels: Vec<Vec<WordEntry>>,
    pub depth: usize,
    pub locally_constant: bool,
    pub coverage: f64,
    /// Per-step normalization shift applied to the base potential during
    /// evaluation: the induced sums see `Phi - shift * tau`. This folds a
    /// residual `P(phi) = 0` correction into the table exactly.
    pub phi_shift: f64,
}

/// Birkhoff sums `(sum log|Df|, sum phi)` along one inducing block.
pub(crate) fn block_sums(map: &IntervalMap, itinerary: &[u32], x: f64, phi: &Potential) -> (f64, f64) {
    let mut y = x;
    let mut l = 0.0f64;
    let mut g = 0.0f64;
    for &b in itinerary {
        let d = map.branches()[b as usize].deriv(y).abs();
        if d > 0.0 {
            l += d.ln();
        }
        let v = phi.eval(map, y);
        if v.is_finite() {
            g += v;
        }
        y = map.eval_on_branch(b as usize, y);
    }
    (l, g)
}

fn seeds_of(base: Iv) -> [f64; 3] {
    let inset = 1e-9 * base.len();
    [base.a + inset, base.mid(), base.b - inset]
}

impl WordTable {
    pub fn build(
        scheme: &InducingScheme,
        map: &IntervalMap,
        phi: &Potential,
        word_depth: usize,
        branch_cap: usize,
        node_budget: usize,
    ) -> Result<Self> {
        if scheme.branches.is_empty() {
            return Err(Error::EmptyScheme("word table needs branches".into()));
        }
        let mut order: Vec<usize> = (0..scheme.branches.len()).collect();
        order.sort_by(|&a, &b| {
            scheme.branches[b]
                .domain
                .len()
                .partial_cmp(&scheme.branches[a].domain.len())
                .unwrap()
                .then(a.cmp(&b))
        });
        order.truncate(branch_cap.max(1));
        let seeds = seeds_of(scheme.base);
        let branch_samples: Vec<[(f64, f64); 3]> = order
            .iter()
            .map(|&i| {
                let b = &scheme.branches[i];
                let mut out = [(0.0, 0.0); 3];
                for (j, &y) in seeds.iter().enumerate() {
                    let x = b.invert(map, y);
                    out[j] = block_sums(map, &b.map_itinerary, x, phi);
                }
                out
            })
            .collect();
        let branch_taus: Vec<usize> = order.iter().map(|&i| scheme.branches[i].tau).collect();
        let linear = map.branches().iter().all(|b| b.coeffs.len() <= 2);
        let locally_constant = linear
            && matches!(
                phi.kind,
                PotentialKind::Constant { .. } | PotentialKind::BranchConstants { .. }
            );
        let mut levels: Vec<Vec<WordEntry>> = Vec::new();
        let mut depth = word_depth.max(1);
        if !locally_constant {
            let b = order.len();
            let mut nodes = 0usize;
            let mut d = 0usize;
            let mut layer = 1usize;
            while d < word_depth {
                layer = layer.saturating_mul(b);
                if nodes.saturating_add(layer) > node_budget {
                    break;
                }
                nodes += layer;
                d += 1;
            }
            depth = d.max(1);
            // words grow by prepending a symbol; each node carries three
            // (point, log|DF| sum, Phi sum) sample states
            #[derive(Clone)]
            struct Node {
                states: [(f64, f64, f64); 3],
                tau_sum: usize,
                first: u16,
            }
            let push_level = |nodes: &Vec<Node>| -> Vec<WordEntry> {
                nodes
                    .iter()
                    .map(|n| WordEntry {
                        samples: [
                            (n.states[0].1, n.states[0].2),
                            (n.states[1].1, n.states[1].2),
                            (n.states[2].1, n.states[2].2),
                        ],
                        tau_sum: n.tau_sum,
                        first: n.first,
                    })
                    .collect()
            };
            let mut frontier: Vec<Node> = order
                .iter()
                .enumerate()
                .map(|(s, &i)| {
                    let br = &scheme.branches[i];
                    let mut states = [(0.0, 0.0, 0.0); 3];
                    for (j, &y) in seeds.iter().enumerate() {
                        let x = br.invert(map, y);
                        let (l, g) = branch_samples[s][j];
                        states[j] = (x, l, g);
                    }
                    Node { states, tau_sum: br.tau, first: s as u16 }
                })
                .collect();
            levels.push(push_level(&frontier));
            for _ in 1..depth {
                let mut next: Vec<Node> = Vec::with_capacity(frontier.len() * order.len());
                for node in &frontier {
                    for (s, &i) in order.iter().enumerate() {
                        let br = &scheme.branches[i];
                        let mut states = [(0.0, 0.0, 0.0); 3];
                        for (j, &(z, l, g)) in node.states.iter().enumerate() {
                            let x = br.invert(map, z);
                            let (dl, dg) = block_sums(map, &br.map_itinerary, x, phi);
                            states[j] = (x, l + dl, g + dg);
                        }
                        next.push(Node { states, tau_sum: node.tau_sum + br.tau, first: s as u16 });
                    }
                }
                levels.push(push_level(&next));
                frontier = next;
            }
        }
        Ok(WordTable {
            branch_order: order,
            branch_samples,
            branch_taus,
            levels,
            depth,
            locally_constant,
            coverage: scheme.coverage,
            phi_shift: 0.0,
        })
    }

    /// `psi = -t log|DF| + q (Phi - shift tau)` at sample `j` of symbol `s`.
    fn psi_branch(&self, s: usize, j: usize, t: f64, q: f64) -> f64 {
        let (l, g) = self.branch_samples[s][j];
        -t * l + q * (g - self.phi_shift * self.branch_taus[s] as f64)
    }

    /// Sup-sampled `psi` over the three seeds of symbol `s`.
    pub fn psi_branch_sup(&self, s: usize, t: f64, q: f64) -> f64 {
        (0..3)
            .map(|j| self.psi_branch(s, j, t, q))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `log Z_1(t, q)` over the included branches (sup-sampled).
    pub fn log_z1(&self, t: f64, q: f64) -> f64 {
        let terms: Vec<f64> = (0..self.branch_samples.len())
            .map(|s| self.psi_branch_sup(s, t, q))
            .collect();
        numerics::log_sum_exp(&terms)
    }

    /// `(1/n) log Z_n(t, q)` for every available depth.
    pub fn sequence(&self, t: f64, q: f64) -> Vec<f64> {
        if self.locally_constant {
            let z1 = self.log_z1(t, q);
            return vec![z1; self.depth];
        }
        self.levels
            .iter()
            .enumerate()
            .map(|(k, words)| {
                let n = (k + 1) as f64;
                let terms: Vec<f64> = words
                    .iter()
                    .map(|w| {
                        let adj = self.phi_shift * w.tau_sum as f64;
                        w.samples
                            .iter()
                            .map(|&(l, g)| -t * l + q * (g - adj))
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .collect();
                numerics::log_sum_exp(&terms) / n
            })
            .collect()
    }

    /// Branch-cap monotonicity diagnostic: `log Z_1` over growing prefixes of
    /// the weight-ordered alphabet.
    pub fn z1_prefix_diagnostic(&self, t: f64, q: f64) -> Vec<f64> {
        let mut weights: Vec<f64> = (0..self.branch_samples.len())
            .map(|s| self.psi_branch_sup(s, t, q))
            .collect();
        weights.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut out = Vec::with_capacity(weights.len());
        let mut acc = Vec::new();
        for w in weights {
            acc.push(w);
            out.push(numerics::log_sum_exp(&acc));
        }
        out
    }

    /// Tail decay of `sum_{tau_i = n} e^{psi_i}` against `n`; a nonnegative
    /// slope across at least three return times signals divergence.
    pub fn tail_slope(&self, t: f64, q: f64) -> Option<f64> {
        let mut by_tau: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
        for (s, tau) in self.branch_taus.iter().enumerate() {
            by_tau.entry(*tau).or_default().push(self.psi_branch_sup(s, t, q));
        }
        if by_tau.len() < 3 {
            return None;
        }
        let xs: Vec<f64> = by_tau.keys().map(|&n| n as f64).collect();
        let ys: Vec<f64> = by_tau.values().map(|v| numerics::log_sum_exp(v)).collect();
        numerics::linear_fit(&xs, &ys).map(|f| f.slope)
    }

    /// Pressure of `-t log|DF| + q Phi` from the deepest word sum, with the
    /// convergence sequence exposed. Divergent tails produce a typed error.
    pub fn pressure(&self, t: f64, q: f64, tol: f64) -> Result<PressureEstimate> {
        if let Some(slope) = self.tail_slope(t, q) {
            if slope >= 0.0 {
                return Err(Error::Divergence(format!(
                    "branch weights grow with tau (slope {slope:.4}) at t={t}, q={q}"
                )));
            }
        }
        let seq = self.sequence(t, q);
        let n = seq.len();
        // geometric-tail criterion: with shrinking gaps of ratio r = d1/d2,
        // the distance to the limit is about d1 r / (1 - r); call the value
        // converged once that estimate is below 5e-2
        let converged = self.locally_constant
            || n < 2
            || (seq[n - 1] - seq[n - 2]).abs() < tol.max(1e-12) * 10.0
            || (n >= 3 && {
                let d1 = (seq[n - 1] - seq[n - 2]).abs();
                let d2 = (seq[n - 2] - seq[n - 3]).abs();
                d1 <= d2 + 1e-12 && d2 - d1 > 1e-15 && d1 * d1 / (d2 - d1) < 5e-2
            });
        Ok(PressureEstimate {
            value: seq[n - 1],
            method: PressureMethod::InducedWordSum,
            depth_used: n,
            sequence: seq,
            converged,
            truncation_coverage: self.coverage,
            lower_bound_biased: false,
        })
    }
}

impl WordTable {
    /// Solve the per-step shift making `P(Phi - s tau) = 0` and store it, so
    /// the standing normalization `P(phi) = 0` holds under this table's own
    /// estimator. Returns the shift. The pressure is strictly decreasing in
    /// `s`, so plain bisection applies.
    pub fn normalize_induced(&mut self, tol: f64) -> Result<f64> {
        let base = self.phi_shift;
        // divergence means the shift is far below the normalization point:
        // read it as P = +infinity, which bisection handles
        let press = |s: f64, me: &mut Self| -> Result<f64> {
            me.phi_shift = base + s;
            let p = match me.pressure(0.0, 1.0, 1e-6) {
                Ok(p) => Ok(p.value),
                Err(Error::Divergence(_)) => Ok(f64::INFINITY),
                Err(e) => Err(e),
            };
            me.phi_shift = base;
            p
        };
        let mut lo = -1.0f64;
        let mut hi = 1.0f64;
        let mut guard = 0;
        while press(lo, self)? < 0.0 && guard < 12 {
            lo *= 2.0;
            guard += 1;
        }
        guard = 0;
        while press(hi, self)? > 0.0 && guard < 12 {
            hi *= 2.0;
            guard += 1;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let p = press(mid, self)?;
            if p.abs() < tol || hi - lo < 1e-12 {
                self.phi_shift = base + mid;
                return Ok(mid);
            }
            if p > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mid = 0.5 * (lo + hi);
        self.phi_shift = base + mid;
        Ok(mid)
    }
}

/// Convenience wrapper: build a table and evaluate one pressure.
pub fn pressure_induced(
    scheme: &InducingScheme,
    map: &IntervalMap,
    phi: &Potential,
    t: f64,
    q: f64,
    word_depth: usize,
    branch_cap: usize,
) -> Result<PressureEstimate> {
    let table = WordTable::build(scheme, map, phi, word_depth, branch_cap, 200_000)?;
    table.pressure(t, q, 1e-8)
}

/// Cylinder-sum pressure `(1/n) log sum_{C in P_n} e^{sup_C S_n phi}` with
/// Aitken extrapolation and a last-three-term Cauchy convergence test at
/// 1e-4.
pub fn pressure_original(map: &IntervalMap, phi: &Potential, depth: usize) -> Result<PressureEstimate> {
    if depth < 4 {
        return Err(Error::Precondition("cylinder-sum pressure needs depth >= 4".into()));
    }
    let has_geometric = potential_has_geometric(phi);
    let smooth_crit = has_geometric && !map.critical_report(12).points.is_empty();
    let mut part = refine_partition(map, 0);
    let mut seq = Vec::with_capacity(depth);
    let mut skipped_singular = false;
    for n in 1..=depth {
        part = refine_once(map, &part);
        let mut terms = Vec::with_capacity(part.len());
        for c in &part.cylinders {
            let iv = c.interval;
            let inset = (1e-12f64).min(iv.len() * 1e-6);
            let samples = [iv.a + inset, iv.mid(), iv.b - inset];
            let mut sup = f64::NEG_INFINITY;
            for &x in &samples {
                let s = crate::cylinders::birkhoff_sum(map, phi, x, n);
                if s.singular_hit.is_none() && s.value.is_finite() {
                    sup = sup.max(s.value);
                } else {
                    skipped_singular = true;
                }
            }
            if sup.is_finite() {
                terms.push(sup);
            }
        }
        if terms.is_empty() {
            return Err(Error::Convergence {
                context: format!("all cylinder sums singular at depth {n}"),
                partial: seq,
            });
        }
        seq.push(numerics::log_sum_exp(&terms) / n as f64);
    }
    let n = seq.len();
    let converged = n >= 3 && {
        let d1 = (seq[n - 1] - seq[n - 2]).abs();
        let d2 = (seq[n - 2] - seq[n - 3]).abs();
        d1 < 1e-4 && d2 < 1e-4
    };
    let value = match numerics::aitken(&seq) {
        Some(v) if (v - seq[n - 1]).abs() < 0.5 => v,
        _ => seq[n - 1],
    };
    Ok(PressureEstimate {
        value,
        method: PressureMethod::OriginalCylinderSum,
        depth_used: n,
        sequence: seq,
        converged,
        truncation_coverage: 1.0,
        lower_bound_biased: skipped_singular || smooth_crit,
    })
}

fn potential_has_geometric(phi: &Potential) -> bool {
    match &phi.kind {
        PotentialKind::Geometric { t } => *t != 0.0,
        PotentialKind::Combination { t, base, .. } => *t != 0.0 || potential_has_geometric(base),
        _ => false,
    }
}

/// Interval of cylinder `index` in `P_depth`.
pub fn cylinder_interval(map: &IntervalMap, depth: usize, index: usize) -> Result<Iv> {
    let part = refine_partition(map, depth);
    part.cylinders
        .get(index)
        .map(|c| c.interval)
        .ok_or_else(|| Error::Config(format!("P_{depth} has no cylinder {index}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hofbauer::build_tower;
    use crate::inducing::build_scheme_type_a;

    fn tent_scheme(base: Iv, cap: usize) -> (IntervalMap, InducingScheme) {
        let map = IntervalMap::tent(2.0);
        let tower = build_tower(&map, 5, 1e-9);
        let scheme = build_scheme_type_a(&tower, &map, 0, base, cap).unwrap();
        (map, scheme)
    }

    #[test]
    fn full_shift_word_sum_is_exact() {
        let (map, scheme) = tent_scheme(Iv::new(0.0, 1.0), 4);
        let phi = Potential::bernoulli(0.3);
        let table = WordTable::build(&scheme, &map, &phi, 8, usize::MAX, 200_000).unwrap();
        assert!(table.locally_constant);
        let p = table.pressure(0.0, 1.0, 1e-10).unwrap();
        assert!(p.converged);
        assert!(p.value.abs() < 1e-12, "P = log(p + 1-p) = 0, got {}", p.value);
        for s in &p.sequence {
            assert!(s.abs() < 1e-12, "exact at every depth");
        }
    }

    #[test]
    fn geometric_pressure_closed_form() {
        let (map, scheme) = tent_scheme(Iv::new(0.0, 1.0), 4);
        let phi = Potential::constant(0.0);
        let table = WordTable::build(&scheme, &map, &phi, 6, usize::MAX, 200_000).unwrap();
        // psi = -t log|DF|: P = (1 - t) log 2
        for t in [-0.5, 0.0, 0.5, 1.0, 1.7] {
            let p = table.pressure(t, 0.0, 1e-10).unwrap();
            assert!(
                (p.value - (1.0 - t) * 2f64.ln()).abs() < 1e-12,
                "t={t}: {} vs {}",
                p.value,
                (1.0 - t) * 2f64.ln()
            );
        }
    }

    #[test]
    fn single_branch_degenerate_case() {
        let (map, scheme) = tent_scheme(Iv::new(0.0, 0.5), 6);
        let phi = Potential::constant(-0.5);
        // alphabet capped at the single widest branch (tau = 1, log|DF| = log 2)
        let table = WordTable::build(&scheme, &map, &phi, 5, 1, 200_000).unwrap();
        let p = table.pressure(0.0, 1.0, 1e-10).unwrap();
        assert!((p.value + 0.5).abs() < 1e-12);
    }

    #[test]
    fn pressure_in_t_strictly_decreasing() {
        let (map, scheme) = tent_scheme(Iv::new(0.0, 0.5), 12);
        let phi = Potential::bernoulli(0.3);
        let table = WordTable::build(&scheme, &map, &phi, 6, usize::MAX, 200_000).unwrap();
        // sample t around the temperature solution; far below it the word
        // sums genuinely diverge (the undefined regime)
        for q in [-1.0, 0.0, 0.5, 1.0, 2.0] {
            let t_near = ((0.3f64.powf(q) + 0.7f64.powf(q)).ln()) / 2f64.ln();
            let mut prev = f64::INFINITY;
            for k in 0..5 {
                let t = t_near - 0.2 + k as f64 * 0.1;
                let p = table.pressure(t, q, 1e-10).unwrap().value;
                assert!(p < prev, "pressure not decreasing at q={q}, t={t}");
                prev = p;
            }
        }
    }

    #[test]
    fn z1_monotone_in_branch_cap() {
        let (map, scheme) = tent_scheme(Iv::new(0.0, 0.5), 12);
        let phi = Potential::bernoulli(0.3);
        let table = WordTable::build(&scheme, &map, &phi, 4, usize::MAX, 200_000).unwrap();
        let prefix = table.z1_prefix_diagnostic(0.0, 1.0);
        assert_eq!(prefix.len(), scheme.branches.len());
        for w in prefix.windows(2) {
            assert!(w[1] >= w[0], "Z_1 grows with the branch cap");
        }
        // the full-cap value matches log Z_1
        assert!((prefix[prefix.len() - 1] - table.log_z1(0.0, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn divergence_detected_for_growing_weights() {
        let (map, scheme) = tent_scheme(Iv::new(0.0, 0.5), 12);
        let phi = Potential::bernoulli(0.3);
        let table = WordTable::build(&scheme, &map, &phi, 4, usize::MAX, 200_000).unwrap();
        // strongly negative t: -t log|DF| grows like tau log 2, faster than
        // the word weights decay
        let res = table.pressure(-6.0, 1.0, 1e-10);
        assert!(matches!(res, Err(Error::Divergence(_))), "{res:?}");
    }

    #[test]
    fn cylinder_sum_oracles() {
        let tent = IntervalMap::tent(2.0);
        let p0 = pressure_original(&tent, &Potential::constant(0.0), 10).unwrap();
        assert!((p0.value - 2f64.ln()).abs() < 1e-9);
        for s in &p0.sequence {
            assert!((s - 2f64.ln()).abs() < 1e-9, "log 2 at every depth");
        }
        let pb = pressure_original(&tent, &Potential::bernoulli(0.3), 10).unwrap();
        assert!(pb.value.abs() < 1e-6);
        let pg = pressure_original(&tent, &Potential::geometric(0.5), 10).unwrap();
        assert!((pg.value - 0.5 * 2f64.ln()).abs() < 1e-6);
        assert!(pb.converged && pg.converged);
    }

    #[test]
    fn normalize_constant_on_tent() {
        let tent = IntervalMap::tent(2.0);
        let phi = Potential::constant(0.0);
        let norm = crate::map_model::normalize_potential(
            &tent,
            &phi,
            crate::map_model::NormalizeConfig::default(),
        )
        .unwrap();
        assert!((norm.normalization_shift - 2f64.ln()).abs() < 1e-9);
        assert!((norm.eval(&tent, 0.3) + 2f64.ln()).abs() < 1e-9);
        let again = crate::map_model::normalize_potential(
            &tent,
            &norm,
            crate::map_model::NormalizeConfig::default(),
        )
        .unwrap();
        assert!((again.normalization_shift - norm.normalization_shift).abs() < 1e-8);

        let bern = crate::map_model::normalize_potential(
            &tent,
            &Potential::bernoulli(0.3),
            crate::map_model::NormalizeConfig::default(),
        )
        .unwrap();
        assert!(bern.normalization_shift.abs() < 1e-6, "already P = 0");
    }
}
