//! Gibbs-measure approximation on inducing schemes: word weights with an
//! empirical Gibbs bracket, and projection to the interval by spreading
//! branch mass along inducing blocks, with entropy, Lyapunov exponent and
//! potential integrals rescaled by the mean return time.

use crate::error::Error;
use crate::inducing::{InducingScheme, TailWeights};
use crate::map_model::{IntervalMap, Potential};
use crate::numerics::{self, Iv};
use crate::thermo::pressure::{block_sums, WordTable};
use crate::Result;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One word of the induced full shift with its normalized weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GibbsWord {
    /// Symbols are indices into `GibbsApprox::branch_ids`.
    pub symbols: Vec<u16>,
    pub weight: f64,
    /// The word cylinder inside the base.
    pub interval: Iv,
    /// Birkhoff sums along the word at its midpoint sample.
    pub log_df_sum: f64,
    pub phi_sum: f64,
    /// Original-map steps the word occupies.
    pub tau_sum: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GibbsApprox {
    pub depth: usize,
    /// Scheme branch index per symbol.
    pub branch_ids: Vec<usize>,
    /// Words at the maximum depth.
    pub words: Vec<GibbsWord>,
    /// Normalized weights at depth `depth - 1`, for aggregation checks.
    pub prev_words: Vec<GibbsWord>,
    /// Empirical Gibbs constant: worst ratio between weights and
    /// `e^{S_n psi}` over sampled points.
    pub k_constant: f64,
    /// Largest aggregation discrepancy between consecutive depths.
    pub aggregation_drift: f64,
    /// `(t, q)` of the weighting potential `psi = -t log|DF| + q phi`.
    pub t: f64,
    pub q: f64,
    /// Raw normalizer `sum e^{S_n psi}` at max depth (1 when `P(psi) = 0`).
    pub normalizer: f64,
    pub non_gibbs_warning: bool,
}

impl GibbsApprox {
    /// Depth-1 marginal: mass per scheme branch.
    pub fn branch_masses(&self) -> Vec<(usize, f64)> {
        let mut acc = vec![0.0f64; self.branch_ids.len()];
        for w in &self.words {
            acc[w.symbols[0] as usize] += w.weight;
        }
        self.branch_ids.iter().copied().zip(acc).collect()
    }

    /// Weight of the word with the given symbol sequence, if enumerated.
    pub fn weight_of(&self, symbols: &[u16]) -> Option<f64> {
        self.words
            .iter()
            .find(|w| w.symbols == symbols)
            .map(|w| w.weight)
    }
}

struct WordState {
    symbols: Vec<u16>,
    interval: Iv,
    mid: f64,
    lo: f64,
    hi: f64,
    sums_mid: (f64, f64),
    sums_lo: (f64, f64),
    sums_hi: (f64, f64),
    tau_sum: usize,
}

fn enumerate_words(
    scheme: &InducingScheme,
    map: &IntervalMap,
    phi: &Potential,
    branch_ids: &[usize],
    depth: usize,
) -> Vec<Vec<WordState>> {
    let base = scheme.base;
    // intervals carry exact endpoints; the sup/inf sample orbits are inset
    // so potentials evaluate on the correct branch at word boundaries
    let inset = 1e-9 * base.len();
    let mut levels: Vec<Vec<WordState>> = Vec::with_capacity(depth);
    let mut frontier: Vec<WordState> = branch_ids
        .iter()
        .enumerate()
        .map(|(s, &i)| {
            let b = &scheme.branches[i];
            let xa = b.invert(map, base.a);
            let xb = b.invert(map, base.b);
            let xl = b.invert(map, base.a + inset);
            let xh = b.invert(map, base.b - inset);
            let xm = b.invert(map, base.mid());
            WordState {
                symbols: vec![s as u16],
                interval: Iv::new(xa, xb),
                mid: xm,
                lo: xl,
                hi: xh,
                sums_mid: block_sums(map, &b.map_itinerary, xm, phi),
                sums_lo: block_sums(map, &b.map_itinerary, xl, phi),
                sums_hi: block_sums(map, &b.map_itinerary, xh, phi),
                tau_sum: b.tau,
            }
        })
        .collect();
    for d in 1..=depth {
        if d < depth {
            let mut next = Vec::with_capacity(frontier.len() * branch_ids.len());
            for w in &frontier {
                for (s, &i) in branch_ids.iter().enumerate() {
                    let b = &scheme.branches[i];
                    let xa = b.invert(map, w.interval.a);
                    let xb = b.invert(map, w.interval.b);
                    let xm = b.invert(map, w.mid);
                    let xl = b.invert(map, w.lo);
                    let xh = b.invert(map, w.hi);
                    let add = |x: f64, prev: (f64, f64)| {
                        let (l, g) = block_sums(map, &b.map_itinerary, x, phi);
                        (prev.0 + l, prev.1 + g)
                    };
                    let mut symbols = Vec::with_capacity(w.symbols.len() + 1);
                    symbols.push(s as u16);
                    symbols.extend(&w.symbols);
                    next.push(WordState {
                        symbols,
                        interval: Iv::new(xa, xb),
                        mid: xm,
                        lo: xl,
                        hi: xh,
                        sums_mid: add(xm, w.sums_mid),
                        sums_lo: add(xl, w.sums_lo),
                        sums_hi: add(xh, w.sums_hi),
                        tau_sum: w.tau_sum + b.tau,
                    });
                }
            }
            levels.push(std::mem::replace(&mut frontier, next));
        } else {
            levels.push(std::mem::take(&mut frontier));
        }
    }
    levels
}

/// Word weights proportional to `e^{S_n psi}` at the mid-word sample,
/// normalized at each depth, with the empirical Gibbs bracket and the
/// depth-aggregation drift.
///
/// Precondition: the word-sum pressure of `psi` must vanish to 1e-3.
pub fn gibbs_weights(
    scheme: &InducingScheme,
    map: &IntervalMap,
    phi: &Potential,
    t: f64,
    q: f64,
    depth: usize,
) -> Result<GibbsApprox> {
    if scheme.branches.is_empty() {
        return Err(Error::EmptyScheme("gibbs weights need branches".into()));
    }
    let table = WordTable::build(scheme, map, phi, depth.min(4), usize::MAX, 100_000)?;
    let p = table.pressure(t, q, 1e-6)?;
    if p.value.abs() > 1e-3 {
        return Err(Error::Precondition(format!(
            "gibbs weights need P(psi) = 0 within 1e-3, got {}",
            p.value
        )));
    }
    let branch_ids: Vec<usize> = (0..scheme.branches.len()).collect();
    let depth = depth.max(1);
    let mut levels = enumerate_words(scheme, map, phi, &branch_ids, depth);
    let deepest = levels.pop().unwrap();
    let prev = levels.pop();

    let weigh = |words: &[WordState]| -> (Vec<f64>, f64) {
        let raw: Vec<f64> = words
            .iter()
            .map(|w| (-t * w.sums_mid.0 + q * w.sums_mid.1).exp())
            .collect();
        let total = numerics::comp_sum(raw.iter().copied());
        (raw.iter().map(|r| r / total).collect(), total)
    };
    let (weights, normalizer) = weigh(&deepest);

    // empirical Gibbs bracket: compare normalized weights against e^{S_n psi}
    // at the three samples of each word
    let mut k = 1.0f64;
    for (w, &wt) in deepest.iter().zip(&weights) {
        for sums in [w.sums_mid, w.sums_lo, w.sums_hi] {
            let e = (-t * sums.0 + q * sums.1).exp();
            if e > 0.0 && wt > 0.0 {
                let r = wt / e;
                k = k.max(r.max(1.0 / r));
            }
        }
    }

    // aggregation drift: deepest weights summed over the last symbol versus
    // the previous depth's normalized weights
    let mut drift = 0.0f64;
    let prev_words: Vec<GibbsWord> = match &prev {
        Some(prev_states) => {
            let (prev_weights, _) = weigh(prev_states);
            let mut agg: BTreeMap<&[u16], f64> = BTreeMap::new();
            for (w, &wt) in deepest.iter().zip(&weights) {
                *agg.entry(&w.symbols[..w.symbols.len() - 1]).or_insert(0.0) += wt;
            }
            for (pw, &pwt) in prev_states.iter().zip(&prev_weights) {
                let got = agg.get(&pw.symbols[..]).copied().unwrap_or(0.0);
                drift = drift.max((got - pwt).abs());
            }
            prev_states
                .iter()
                .zip(prev_weights)
                .map(|(w, weight)| GibbsWord {
                    symbols: w.symbols.clone(),
                    weight,
                    interval: w.interval,
                    log_df_sum: w.sums_mid.0,
                    phi_sum: w.sums_mid.1,
                    tau_sum: w.tau_sum,
                })
                .collect()
        }
        None => Vec::new(),
    };

    let words: Vec<GibbsWord> = deepest
        .iter()
        .zip(&weights)
        .map(|(w, &weight)| GibbsWord {
            symbols: w.symbols.clone(),
            weight,
            interval: w.interval,
            log_df_sum: w.sums_mid.0,
            phi_sum: w.sums_mid.1,
            tau_sum: w.tau_sum,
        })
        .collect();

    Ok(GibbsApprox {
        depth,
        branch_ids,
        words,
        prev_words,
        k_constant: k,
        aggregation_drift: drift,
        t,
        q,
        normalizer,
        non_gibbs_warning: drift > 0.05,
    })
}

/// A measure on `[0, 1]` as masses over a uniform grid, plus the projected
/// dynamical invariants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectedMeasure {
    pub cells: usize,
    pub masses: Vec<f64>,
    /// Mean return time of the induced measure.
    pub int_tau: f64,
    /// Induced-system entropy (word estimate) and its projection.
    pub h_induced: f64,
    pub h_mu: f64,
    /// Lyapunov exponent of the projected measure.
    pub lambda_mu: f64,
    /// Integral of the base potential against the projected measure.
    pub int_phi_mu: f64,
    /// Mass not represented because the scheme truncation lost it.
    pub mass_deficit: f64,
}

impl ProjectedMeasure {
    /// Mass of an interval by fractional cell overlap.
    pub fn mass_of(&self, iv: Iv) -> f64 {
        let g = self.cells as f64;
        let lo = (iv.a.max(0.0) * g).floor() as usize;
        let hi = ((iv.b.min(1.0) * g).ceil() as usize).min(self.cells);
        let mut total = 0.0;
        for c in lo..hi {
            let cell = Iv::new(c as f64 / g, (c + 1) as f64 / g);
            if let Some(ov) = cell.intersect(&iv) {
                total += self.masses[c] * ov.len() / cell.len();
            }
        }
        total
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "grid": self.cells,
            "masses": self.masses,
            "int_tau": self.int_tau,
            "h_mu": self.h_mu,
            "lambda_mu": self.lambda_mu,
            "int_phi_mu": self.int_phi_mu,
        })
    }
}

/// Spread branch masses along inducing blocks: each word cylinder `C_w`
/// contributes its weight, uniformly over `f^k(C_w)`, for every
/// `0 <= k < tau` of its first branch; the result is normalized by the mean
/// return time. Entropy projects by the Abramov rescaling.
pub fn project_measure(
    scheme: &InducingScheme,
    map: &IntervalMap,
    gibbs: &GibbsApprox,
    cells: usize,
) -> Result<ProjectedMeasure> {
    // integrability: return-time tail must decay
    let tail = crate::inducing::return_time_tail(scheme, map, TailWeights::Lebesgue)?;
    if let Some(slope) = tail.slope {
        if slope >= 0.0 {
            return Err(Error::Integrability(format!(
                "return-time tail fails to decay (slope {slope:.4})"
            )));
        }
    }
    let d = gibbs.depth as f64;
    let int_tau_words: f64 = gibbs.words.iter().map(|w| w.weight * w.tau_sum as f64).sum::<f64>() / d;
    let mut masses = vec![0.0f64; cells];
    let g = cells as f64;
    let mut spread = |iv: Iv, mass: f64| {
        if iv.len() <= 0.0 {
            return;
        }
        let lo = (iv.a.max(0.0) * g).floor() as usize;
        let hi = (((iv.b.min(1.0)) * g).ceil() as usize).min(cells);
        for (c, slot) in masses.iter_mut().enumerate().take(hi).skip(lo) {
            let cell = Iv::new(c as f64 / g, (c + 1) as f64 / g);
            if let Some(ov) = cell.intersect(&iv) {
                *slot += mass * ov.len() / iv.len();
            }
        }
    };
    let mut pushed_total = 0.0f64;
    for w in &gibbs.words {
        let first = gibbs.branch_ids[w.symbols[0] as usize];
        let branch = &scheme.branches[first];
        let mut a = w.interval.a;
        let mut b = w.interval.b;
        for k in 0..branch.tau {
            spread(Iv::new(a, b), w.weight);
            pushed_total += w.weight;
            if k + 1 < branch.tau {
                let bi = branch.map_itinerary[k] as usize;
                a = map.eval_on_branch(bi, a).clamp(0.0, 1.0);
                b = map.eval_on_branch(bi, b).clamp(0.0, 1.0);
            }
        }
    }
    if pushed_total <= 0.0 {
        return Err(Error::Integrability("no mass pushed through the lift".into()));
    }
    for m in masses.iter_mut() {
        *m /= pushed_total;
    }
    // word-entropy estimate with a small-sample style correction: the
    // inverse of the scheme's missing mass acts as the effective sample
    // count, so the correction vanishes for complete schemes
    let h_words: f64 = -gibbs
        .words
        .iter()
        .filter(|w| w.weight > 0.0)
        .map(|w| w.weight * w.weight.ln())
        .sum::<f64>();
    let m_nonzero = gibbs.words.iter().filter(|w| w.weight > 0.0).count() as f64;
    let missing = (1.0 - scheme.coverage).max(0.0);
    let correction = if missing > 0.0 {
        (m_nonzero - 1.0) / (2.0 * (1.0 / missing).max(m_nonzero))
    } else {
        0.0
    };
    let h_induced = (h_words + correction) / d;
    let lambda_induced: f64 = gibbs.words.iter().map(|w| w.weight * w.log_df_sum).sum::<f64>() / d;
    let int_phi_induced: f64 = gibbs.words.iter().map(|w| w.weight * w.phi_sum).sum::<f64>() / d;
    Ok(ProjectedMeasure {
        cells,
        masses,
        int_tau: int_tau_words,
        h_induced,
        h_mu: h_induced / int_tau_words,
        lambda_mu: lambda_induced / int_tau_words,
        int_phi_mu: int_phi_induced / int_tau_words,
        mass_deficit: 1.0 - scheme.coverage,
    })
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
    fn bernoulli_weights_exact() {
        let (map, scheme) = tent_scheme(Iv::new(0.0, 1.0), 4);
        let g = gibbs_weights(&scheme, &map, &Potential::bernoulli(0.3), 0.0, 1.0, 6).unwrap();
        assert_eq!(g.words.len(), 64);
        for w in &g.words {
            let lefts = w.symbols.iter().filter(|&&s| g.branch_ids[s as usize] == 0).count();
            // branch 0 is [0, 1/2] (left), branch 1 right
            let expect = 0.3f64.powi(lefts as i32) * 0.7f64.powi((6 - lefts) as i32);
            assert!(
                (w.weight - expect).abs() < 1e-12,
                "word {:?}: {} vs {}",
                w.symbols,
                w.weight,
                expect
            );
        }
        assert!((g.k_constant - 1.0).abs() < 1e-9);
        assert!(g.aggregation_drift < 1e-9);
        assert!(!g.non_gibbs_warning);
    }

    #[test]
    fn lebesgue_weights_uniform() {
        let (map, scheme) = tent_scheme(Iv::new(0.0, 1.0), 4);
        let g = gibbs_weights(&scheme, &map, &Potential::constant(0.0), 1.0, 0.0, 5).unwrap();
        for w in &g.words {
            assert!((w.weight - 2f64.powi(-5)).abs() < 1e-13);
        }
    }

    #[test]
    fn projection_is_identity_for_full_base() {
        let (map, scheme) = tent_scheme(Iv::new(0.0, 1.0), 4);
        let g = gibbs_weights(&scheme, &map, &Potential::constant(0.0), 1.0, 0.0, 8).unwrap();
        let m = project_measure(&scheme, &map, &g, 256).unwrap();
        assert!((m.int_tau - 1.0).abs() < 1e-12);
        for c in &m.masses {
            assert!((c - 1.0 / 256.0).abs() < 1e-9, "Lebesgue per cell");
        }
        assert!((m.h_mu - 2f64.ln()).abs() < 0.01);
        assert!((m.lambda_mu - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn half_base_kac_and_projection() {
        let (map, scheme) = tent_scheme(Iv::new(0.0, 0.5), 26);
        let g = gibbs_weights(&scheme, &map, &Potential::constant(0.0), 1.0, 0.0, 2).unwrap();
        let m = project_measure(&scheme, &map, &g, 128).unwrap();
        assert!((m.int_tau - 2.0).abs() < 1e-6, "Kac: mean return 2, got {}", m.int_tau);
        for c in &m.masses {
            assert!((c - 1.0 / 128.0).abs() < 0.01 / 128.0, "Lebesgue within 1% per cell");
        }
        assert!((m.h_mu - 2f64.ln()).abs() < 0.02 * 2f64.ln(), "h projected to log 2");
        assert!((m.lambda_mu - 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn bernoulli_projection_invariants() {
        let (map, scheme) = tent_scheme(Iv::new(0.0, 1.0), 4);
        let g = gibbs_weights(&scheme, &map, &Potential::bernoulli(0.3), 0.0, 1.0, 10).unwrap();
        let m = project_measure(&scheme, &map, &g, 256).unwrap();
        let h = -(0.3f64.ln() * 0.3 + 0.7f64.ln() * 0.7);
        assert!((m.lambda_mu - 2f64.ln()).abs() < 1e-9);
        assert!((m.h_mu - h).abs() < 0.01, "h = H(0.3), got {}", m.h_mu);
        assert!((m.h_mu / m.lambda_mu - 0.8813).abs() < 0.01);
        assert!((m.int_phi_mu + h).abs() < 1e-9, "int phi = -H(p) for Bernoulli");
    }

    #[test]
    fn half_base_projection_recovers_bernoulli() {
        // lifting through the first-return scheme and spreading along blocks
        // must reproduce the equilibrium measure itself; for the Bernoulli
        // potential the target is the product measure, computable per
        // dyadic cell as p^{#L} (1-p)^{#R}
        let (map, scheme) = tent_scheme(Iv::new(0.0, 0.5), 24);
        let g = gibbs_weights(&scheme, &map, &Potential::bernoulli(0.3), 0.0, 1.0, 3).unwrap();
        let cells = 32usize;
        let m = project_measure(&scheme, &map, &g, cells).unwrap();
        let depth = 5; // 2^5 = 32 cells
        let mut worst = 0.0f64;
        for c in 0..cells {
            // mass of the dyadic cell under the product measure: follow the
            // tent itinerary of the cell midpoint
            let mut x = (c as f64 + 0.5) / cells as f64;
            let mut exact = 1.0f64;
            for _ in 0..depth {
                if x <= 0.5 {
                    exact *= 0.3;
                } else {
                    exact *= 0.7;
                }
                x = map.eval_unchecked(x);
            }
            worst = worst.max((m.masses[c] - exact).abs() / exact);
        }
        assert!(worst < 0.08, "relative cell error {worst}");
        // projected invariants: lambda = log 2, h = H(0.3), int phi = -H(0.3)
        let h = -(0.3f64 * 0.3f64.ln() + 0.7 * 0.7f64.ln());
        assert!((m.lambda_mu - 2f64.ln()).abs() < 1e-3);
        assert!((m.h_mu - h).abs() < 0.02);
        assert!((m.int_phi_mu + h).abs() < 1e-3);
    }

    #[test]
    fn precondition_rejects_unnormalized() {
        let (map, scheme) = tent_scheme(Iv::new(0.0, 1.0), 4);
        let res = gibbs_weights(&scheme, &map, &Potential::constant(0.0), 0.0, 1.0, 4);
        assert!(matches!(res, Err(Error::Precondition(_))), "P = log 2 != 0");
    }
}
