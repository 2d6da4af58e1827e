//! Dimension and Lyapunov spectra by Legendre transform of the temperature
//! curve, landmark identities, degeneracy detection, and pointwise
//! estimators (dimension, Lyapunov exponents, tower-visit frequency,
//! large-scale times).

use crate::cylinders::CylinderTracker;
use crate::error::Error;
use crate::hofbauer::{TowerGraph, TowerStep};
use crate::inducing::{orbit_in_scheme, ExitReason, InducingScheme};
use crate::map_model::{IntervalMap, Potential};
use crate::numerics::Iv;
use crate::thermo::{
    gibbs_weights, project_measure, tq_curve, GibbsApprox, ProjectedMeasure, SolveConfig, TqCurve,
    WordTable,
};
use crate::Result;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumKind {
    Dimension,
    Lyapunov,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub q: f64,
    pub alpha: f64,
    pub value: f64,
    pub converged: bool,
}

/// Sampled spectrum `alpha -> DS(alpha)` (or `lambda -> dim L_lambda` after
/// relabelling), with landmark values attached.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumCurve {
    pub kind: SpectrumKind,
    /// Ordered by `alpha`.
    pub samples: Vec<SpectrumSample>,
    /// `alpha(1)` and the spectrum value there (candidate `dim_H mu`).
    pub alpha_1: Option<(f64, f64)>,
    /// `alpha(0)`, where the spectrum should touch 1.
    pub alpha_0: Option<(f64, f64)>,
    /// `alpha_ac` from the acip proxy.
    pub alpha_ac: Option<f64>,
    pub degenerate: bool,
}

impl SpectrumCurve {
    /// Divided-difference concavity defect: max increase of consecutive
    /// slopes; concave data stays below 1e-6.
    pub fn max_concavity_defect(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .samples
            .iter()
            .filter(|s| s.converged)
            .map(|s| (s.alpha, s.value))
            .collect();
        if pts.len() < 3 {
            return None;
        }
        let mut worst: f64 = f64::NEG_INFINITY;
        for w in pts.windows(3) {
            let (a0, v0) = w[0];
            let (a1, v1) = w[1];
            let (a2, v2) = w[2];
            if (a1 - a0).abs() < 1e-9 || (a2 - a1).abs() < 1e-9 {
                continue;
            }
            let s0 = (v1 - v0) / (a1 - a0);
            let s1 = (v2 - v1) / (a2 - a1);
            worst = worst.max(s1 - s0);
        }
        if worst.is_finite() {
            Some(worst)
        } else {
            None
        }
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("q,T,alpha,DS,converged,degenerate\n");
        for s in &self.samples {
            let t = s.value - s.q * s.alpha;
            out.push_str(&format!(
                "{:.11e},{:.11e},{:.11e},{:.11e},{},{}\n",
                s.q, t, s.alpha, s.value, s.converged, self.degenerate
            ));
        }
        out
    }
}

/// Legendre transform of a sampled convex `T(q)`: `alpha = -T'` by central
/// differences and `DS = T + q alpha`, ordered by `alpha`. Refuses curves
/// whose convexity defect exceeds the tolerance.
pub fn legendre_transform(curve: &TqCurve) -> Result<SpectrumCurve> {
    let converged = curve.converged_samples();
    if converged.len() < 3 {
        return Err(Error::Precondition(format!(
            "legendre transform needs >= 3 converged samples, got {}",
            converged.len()
        )));
    }
    if let Some(min2) = curve.min_second_difference() {
        if min2 < -1e-6 {
            let ts: Vec<f64> = converged.iter().map(|p| p.1).collect();
            let bad: Vec<usize> = crate::numerics::second_differences(&ts)
                .iter()
                .enumerate()
                .filter(|(_, &d)| d < -1e-6)
                .map(|(i, _)| i + 1)
                .collect();
            return Err(Error::Precondition(format!(
                "temperature curve convexity violated beyond tolerance at indices {bad:?}"
            )));
        }
    }
    let degenerate = affinity_detector(curve)?.degenerate;
    let mut samples: Vec<SpectrumSample> = curve
        .samples
        .iter()
        .filter(|s| s.t.is_some() && s.alpha.is_some())
        .map(|s| {
            let alpha = s.alpha.unwrap();
            SpectrumSample {
                q: s.q,
                alpha,
                value: s.t.unwrap() + s.q * alpha,
                converged: s.converged,
            }
        })
        .collect();
    if degenerate {
        // affine T: the transform degenerates to the single point
        // (alpha, DS) = (common slope magnitude, T + q alpha)
        let mid = &samples[samples.len() / 2];
        samples = vec![SpectrumSample { q: mid.q, alpha: mid.alpha, value: mid.value, converged: true }];
    }
    samples.sort_by(|a, b| a.alpha.partial_cmp(&b.alpha).unwrap());
    let at = |q0: f64| -> Option<(f64, f64)> {
        samples
            .iter()
            .filter(|s| s.converged)
            .min_by(|a, b| (a.q - q0).abs().partial_cmp(&(b.q - q0).abs()).unwrap())
            .filter(|s| (s.q - q0).abs() < 1e-9 || degenerate)
            .map(|s| (s.alpha, s.value))
    };
    Ok(SpectrumCurve {
        kind: SpectrumKind::Dimension,
        alpha_1: at(1.0),
        alpha_0: at(0.0),
        alpha_ac: None,
        samples,
        degenerate,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffinityReport {
    pub degenerate: bool,
    /// Largest absolute second difference over the converged window.
    pub span: f64,
}

/// Detect the affine case `T(q) = T(0) - q alpha`, which signals that the
/// equilibrium state coincides with the acip and the spectrum collapses.
pub fn affinity_detector(curve: &TqCurve) -> Result<AffinityReport> {
    let pts = curve.converged_samples();
    if pts.len() < 4 {
        return Err(Error::Precondition(format!(
            "affinity detector needs >= 4 converged samples, got {}",
            pts.len()
        )));
    }
    let ts: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let span = crate::numerics::second_differences(&ts)
        .iter()
        .fold(0.0f64, |m, d| m.max(d.abs()));
    Ok(AffinityReport { degenerate: span < 1e-5, span })
}

/// Configuration shared by the spectrum drivers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumConfig {
    pub solve: SolveConfig,
    pub word_depth: usize,
    pub branch_cap: usize,
    pub node_budget: usize,
    /// Grid cells for projected acip-proxy measures.
    pub cells: usize,
    /// Word depth of the Gibbs approximation used for the proxy.
    pub gibbs_depth: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            solve: SolveConfig::default(),
            word_depth: 6,
            branch_cap: 64,
            node_budget: 200_000,
            cells: 512,
            gibbs_depth: 4,
        }
    }
}

/// Dimension spectrum: temperature curve, Legendre transform, and the
/// `alpha_ac` landmark computed from the acip proxy (the projected Gibbs
/// measure of `-log|DF|` on the scheme).
pub fn dimension_spectrum(
    scheme: &InducingScheme,
    map: &IntervalMap,
    phi: &Potential,
    q_grid: &[f64],
    cfg: &SpectrumConfig,
) -> Result<(TqCurve, SpectrumCurve)> {
    let table = WordTable::build(scheme, map, phi, cfg.word_depth, cfg.branch_cap, cfg.node_budget)?;
    let curve = tq_curve(&table, q_grid, &cfg.solve);
    let mut spectrum = legendre_transform(&curve)?;
    if let Ok(acip) = acip_proxy(scheme, map, phi, cfg) {
        if acip.lambda_mu > 0.0 {
            spectrum.alpha_ac = Some(-acip.int_phi_mu / acip.lambda_mu);
        }
    }
    Ok((curve, spectrum))
}

/// The acip proxy: projected Gibbs measure of `psi = -log|DF|` on the scheme
/// (Lebesgue for the piecewise-linear oracles).
pub fn acip_proxy(
    scheme: &InducingScheme,
    map: &IntervalMap,
    phi: &Potential,
    cfg: &SpectrumConfig,
) -> Result<ProjectedMeasure> {
    let g = gibbs_weights(scheme, map, phi, 1.0, 0.0, cfg.gibbs_depth)?;
    project_measure(scheme, map, &g, cfg.cells)
}

/// Lyapunov spectrum through the constant potential `-h_top`: run the
/// dimension machinery and relabel `lambda = h_top / alpha`,
/// `dim L_lambda = DS(alpha)`.
pub fn lyapunov_spectrum(
    scheme: &InducingScheme,
    map: &IntervalMap,
    h_top: f64,
    q_grid: &[f64],
    cfg: &SpectrumConfig,
) -> Result<(TqCurve, SpectrumCurve, SpectrumCurve)> {
    let phi = Potential::constant(-h_top);
    let (curve, dim_spec) = dimension_spectrum(scheme, map, &phi, q_grid, cfg)?;
    let mut samples: Vec<SpectrumSample> = dim_spec
        .samples
        .iter()
        .filter(|s| s.alpha.abs() > 1e-12)
        .map(|s| SpectrumSample {
            q: s.q,
            alpha: h_top / s.alpha,
            value: s.value,
            converged: s.converged,
        })
        .collect();
    samples.sort_by(|a, b| a.alpha.partial_cmp(&b.alpha).unwrap());
    let relabel = |p: Option<(f64, f64)>| p.map(|(a, v)| (h_top / a, v));
    let lyap = SpectrumCurve {
        kind: SpectrumKind::Lyapunov,
        samples,
        alpha_1: relabel(dim_spec.alpha_1),
        alpha_0: relabel(dim_spec.alpha_0),
        alpha_ac: dim_spec.alpha_ac.map(|a| h_top / a),
        degenerate: dim_spec.degenerate,
    };
    Ok((curve, dim_spec, lyap))
}

/// Running Birkhoff averages of `log|Df|` with liminf/limsup proxied by the
/// extrema over the tail window `[n/2, n]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointwiseLyapunov {
    pub lower: f64,
    pub upper: f64,
    pub sequence: Vec<f64>,
    /// Orbit indices where `log|Df|` was singular (critical hits).
    pub singular_hits: Vec<usize>,
}

pub fn pointwise_lyapunov(map: &IntervalMap, x: f64, n_max: usize) -> Result<PointwiseLyapunov> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(x));
    }
    let mut y = x;
    let mut sum = 0.0f64;
    let mut count = 0usize;
    let mut seq = Vec::with_capacity(n_max);
    let mut hits = Vec::new();
    for k in 0..n_max {
        let d = map.derivative_unchecked(y).abs();
        if d > 0.0 {
            sum += d.ln();
            count += 1;
        } else {
            hits.push(k);
        }
        seq.push(if count > 0 { sum / count as f64 } else { f64::NAN });
        y = map.eval_unchecked(y).clamp(0.0, 1.0);
    }
    let tail = &seq[n_max / 2..];
    let lower = tail.iter().cloned().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    let upper = tail.iter().cloned().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    Ok(PointwiseLyapunov { lower, upper, sequence: seq, singular_hits: hits })
}

/// Pointwise dimension estimates at a point of the scheme base: the cylinder
/// route through induced word weights and `|DF^n|`, and the ball route
/// through projected-measure masses of shrinking balls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointwiseReport {
    pub x: f64,
    /// Cylinder estimate (the induced-measure route).
    pub d_cylinder: Option<f64>,
    /// Ball estimate from the projected measure.
    pub d_ball: Option<f64>,
    pub agreement: Option<bool>,
    pub steps_used: usize,
    pub exit: ExitReason,
}

/// Tolerance for cylinder/ball agreement.
pub const POINTWISE_AGREE_TOL: f64 = 5e-2;

#[allow(clippy::too_many_arguments)]
pub fn pointwise_dimension(
    scheme: &InducingScheme,
    map: &IntervalMap,
    phi: &Potential,
    t: f64,
    q: f64,
    projected: Option<&ProjectedMeasure>,
    x: f64,
    depth: usize,
) -> Result<PointwiseReport> {
    if !scheme.base.contains(x) {
        return Err(Error::Precondition(format!("x={x} outside the scheme base")));
    }
    let trace = orbit_in_scheme(scheme, map, x, depth);
    let steps = trace.branch_sequence.len();
    let mut d_cylinder = None;
    if steps > 0 {
        // S_n psi(x) / -log|DF^n(x)| along the induced orbit
        let mut y = x;
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for &bi in &trace.branch_sequence {
            let b = &scheme.branches[bi];
            let (l, g) = crate::thermo::word_sums_for(map, &b.map_itinerary, y, phi);
            num += -t * l + q * g;
            den += l;
            y = b.apply(map, y);
        }
        if den > 0.0 {
            d_cylinder = Some(num / -den);
        }
    }
    let mut d_ball = None;
    if let Some(m) = projected {
        // log mu(B_r) / log r over shrinking radii, final-slope fit
        let mut rs = Vec::new();
        let mut ms = Vec::new();
        let mut r = 0.25f64;
        while r > 2.0 / m.cells as f64 {
            let mass = m.mass_of(Iv::new((x - r).max(0.0), (x + r).min(1.0)));
            if mass > 0.0 {
                rs.push(r.ln());
                ms.push(mass.ln());
            }
            r *= 0.5;
        }
        if rs.len() >= 3 {
            d_ball = crate::numerics::linear_fit(&rs, &ms).map(|f| f.slope);
        }
    }
    let agreement = match (d_cylinder, d_ball) {
        (Some(a), Some(b)) => Some((a - b).abs() < POINTWISE_AGREE_TOL),
        _ => None,
    };
    Ok(PointwiseReport {
        x,
        d_cylinder,
        d_ball,
        agreement,
        steps_used: steps,
        exit: trace.exit,
    })
}

/// Cylinder-route pointwise dimension along a symbolically sampled word of
/// the Gibbs measure: the only way to reach depths beyond floating-point
/// cylinder resolution.
pub fn pointwise_dimension_sampled<R: Rng>(
    scheme: &InducingScheme,
    map: &IntervalMap,
    gibbs: &GibbsApprox,
    phi: &Potential,
    rng: &mut R,
    depth: usize,
) -> Result<f64> {
    let masses = gibbs.branch_masses();
    let total: f64 = masses.iter().map(|(_, m)| m).sum();
    if total <= 0.0 {
        return Err(Error::Precondition("gibbs marginal carries no mass".into()));
    }
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for _ in 0..depth {
        let mut u = rng.gen::<f64>() * total;
        let mut chosen = masses.len() - 1;
        for (k, (_, m)) in masses.iter().enumerate() {
            if u < *m {
                chosen = k;
                break;
            }
            u -= m;
        }
        let branch_id = masses[chosen].0;
        let b = &scheme.branches[branch_id];
        let xm = b.domain.mid();
        let (l, g) = crate::thermo::word_sums_for(map, &b.map_itinerary, xm, phi);
        num += -gibbs.t * l + gibbs.q * g;
        den += l;
    }
    if den <= 0.0 {
        return Err(Error::Precondition("sampled word carries no expansion".into()));
    }
    Ok(num / -den)
}

/// Fraction of the extension orbit `iota(x), .., f-hat^{n-1}(iota(x))`
/// spending time at level `<= r`. The lift itself counts (it sits at level
/// zero); escaping the truncation counts as a non-visit from then on.
pub fn tower_visit_frequency(
    tower: &TowerGraph,
    map: &IntervalMap,
    x: f64,
    n: usize,
    r: usize,
) -> Result<f64> {
    let levels = tower_level_sequence(tower, map, x, n)?;
    let visits = levels.iter().filter(|l| l.is_some_and(|lv| lv <= r)).count();
    Ok(visits as f64 / n as f64)
}

/// Levels of `f-hat^k(iota(x))` for `k = 0..n`, for frequency studies across
/// many thresholds at once. `None` marks steps beyond an escape.
pub fn tower_level_sequence(
    tower: &TowerGraph,
    map: &IntervalMap,
    x: f64,
    n: usize,
) -> Result<Vec<Option<usize>>> {
    let mut p = tower.lift(x)?;
    let mut out = Vec::with_capacity(n);
    out.push(Some(0));
    while out.len() < n {
        match tower.step(map, p) {
            TowerStep::Inside(q) => {
                out.push(Some(tower.domains[q.domain].level));
                p = q;
            }
            TowerStep::Escaped { .. } => break,
        }
    }
    while out.len() < n {
        out.push(None);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LargeScaleVisits {
    pub times: Vec<usize>,
    /// Cylinder tracking stopped before `n_max` (width underflow).
    pub truncated: bool,
}

/// Times `n <= n_max` at which the branch image of `C_n[x]` contains the
/// `delta`-ball around `f^n(x)` (as an interval of the line, not clipped).
pub fn large_scale_visits(
    map: &IntervalMap,
    x: f64,
    delta: f64,
    n_max: usize,
) -> Result<LargeScaleVisits> {
    if delta <= 0.0 {
        return Err(Error::Precondition("delta must be positive".into()));
    }
    let mut tracker = CylinderTracker::new(x);
    let mut times = Vec::new();
    for n in 0..=n_max {
        let y = tracker.orbit_point;
        if tracker.image.a <= y - delta && y + delta <= tracker.image.b {
            times.push(n);
        }
        if n < n_max && !tracker.step(map) {
            return Ok(LargeScaleVisits { times, truncated: true });
        }
    }
    Ok(LargeScaleVisits { times, truncated: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hofbauer::build_tower;
    use crate::inducing::build_scheme_type_a;
    use rand::SeedableRng;

    fn binomial_t(p: f64, q: f64) -> f64 {
        ((p.powf(q) + (1.0 - p).powf(q)).ln()) / 2f64.ln()
    }

    fn binomial_alpha(p: f64, q: f64) -> f64 {
        let (a, b) = (p.powf(q), (1.0 - p).powf(q));
        -(a * p.ln() + b * (1.0 - p).ln()) / ((a + b) * 2f64.ln())
    }

    fn tent_scheme(base: Iv, cap: usize) -> (IntervalMap, InducingScheme) {
        let map = IntervalMap::tent(2.0);
        let tower = build_tower(&map, 5, 1e-9);
        let scheme = build_scheme_type_a(&tower, &map, 0, base, cap).unwrap();
        (map, scheme)
    }

    #[test]
    fn binomial_spectrum_landmarks() {
        let (map, scheme) = tent_scheme(Iv::new(0.0, 1.0), 4);
        let phi = Potential::bernoulli(0.3);
        let grid: Vec<f64> = (0..=40).map(|k| -2.0 + 0.1 * k as f64).collect();
        let cfg = SpectrumConfig::default();
        let (curve, spec) = dimension_spectrum(&scheme, &map, &phi, &grid, &cfg).unwrap();
        assert!(!spec.degenerate);
        let (a0, ds0) = spec.alpha_0.unwrap();
        assert!((ds0 - 1.0).abs() < 1e-2, "DS(alpha(0)) = 1, got {ds0}");
        assert!((a0 - 1.1258).abs() < 5e-3, "alpha(0) = 1.1258, got {a0}");
        let (a1, ds1) = spec.alpha_1.unwrap();
        assert!((a1 - 0.8813).abs() < 5e-3);
        assert!((ds1 - a1).abs() < 1e-2, "DS(alpha(1)) = alpha(1)");
        let ac = spec.alpha_ac.unwrap();
        assert!((ac - 1.1258).abs() < 5e-3, "alpha_ac from acip proxy, got {ac}");
        // construction identity: DS - (T + q alpha) = 0
        for s in &spec.samples {
            let t = curve.t_at(s.q).unwrap();
            assert!((s.value - (t + s.q * s.alpha)).abs() < 1e-12);
        }
        // sup-norm against the closed-form binomial pair
        for s in &spec.samples {
            let exact_q = invert_alpha(0.3, s.alpha);
            let exact_ds = binomial_t(0.3, exact_q) + exact_q * s.alpha;
            assert!(
                (s.value - exact_ds).abs() <= 1e-2,
                "alpha={}, DS={} vs {}",
                s.alpha,
                s.value,
                exact_ds
            );
        }
        assert!(spec.max_concavity_defect().unwrap() <= 1e-6);
    }

    #[test]
    fn binomial_spectrum_sweep() {
        // sup-norm oracle equality across the Bernoulli family
        let (map, scheme) = tent_scheme(Iv::new(0.0, 1.0), 4);
        let grid: Vec<f64> = (0..=40).map(|k| -2.0 + 0.1 * k as f64).collect();
        let cfg = SpectrumConfig::default();
        for p in [0.2, 0.3, 0.4] {
            let (_, spec) =
                dimension_spectrum(&scheme, &map, &Potential::bernoulli(p), &grid, &cfg).unwrap();
            let mut sup = 0.0f64;
            for s in &spec.samples {
                let q = invert_alpha(p, s.alpha);
                let exact = binomial_t(p, q) + q * s.alpha;
                sup = sup.max((s.value - exact).abs());
            }
            assert!(sup <= 1e-2, "p={p}: sup-norm {sup}");
            assert!(spec.max_concavity_defect().unwrap() <= 1e-6);
            let (_, ds0) = spec.alpha_0.unwrap();
            assert!((ds0 - 1.0).abs() < 1e-2, "p={p}: DS(alpha(0)) = {ds0}");
            let (a1, ds1) = spec.alpha_1.unwrap();
            assert!((ds1 - a1).abs() < 1e-2, "p={p}: landmark at alpha(1)");
        }
    }

    fn invert_alpha(p: f64, alpha: f64) -> f64 {
        // Newton on q -> binomial_alpha(p, q) = alpha (alpha decreasing in q)
        let mut lo = -8.0;
        let mut hi = 8.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if binomial_alpha(p, mid) > alpha {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn constant_potential_degenerates() {
        let (map, scheme) = tent_scheme(Iv::new(0.0, 1.0), 4);
        let phi = Potential::constant(-(2f64.ln()));
        let grid: Vec<f64> = (0..=20).map(|k| -1.0 + 0.1 * k as f64).collect();
        let cfg = SpectrumConfig::default();
        let (curve, spec) = dimension_spectrum(&scheme, &map, &phi, &grid, &cfg).unwrap();
        assert!(spec.degenerate);
        assert_eq!(spec.samples.len(), 1);
        assert!((spec.samples[0].alpha - 1.0).abs() < 1e-6);
        assert!((spec.samples[0].value - 1.0).abs() < 1e-6);
        let aff = affinity_detector(&curve).unwrap();
        assert!(aff.degenerate);
        // and the Bernoulli curve is NOT degenerate
        let (bcurve, _) = dimension_spectrum(
            &scheme,
            &map,
            &Potential::bernoulli(0.3),
            &grid,
            &cfg,
        )
        .unwrap();
        assert!(!affinity_detector(&bcurve).unwrap().degenerate);
        // short window errors
        let short = TqCurve {
            samples: bcurve.samples.iter().take(3).cloned().collect(),
        };
        assert!(affinity_detector(&short).is_err());
    }

    #[test]
    fn lyapunov_tent_degenerate_and_relabel() {
        let (map, scheme) = tent_scheme(Iv::new(0.0, 1.0), 4);
        let grid: Vec<f64> = (0..=20).map(|k| -1.0 + 0.1 * k as f64).collect();
        let cfg = SpectrumConfig::default();
        let h = 2f64.ln();
        let (_, dim_spec, lyap) = lyapunov_spectrum(&scheme, &map, h, &grid, &cfg).unwrap();
        assert!(lyap.degenerate, "tent has constant slope");
        assert_eq!(lyap.samples.len(), 1);
        assert!((lyap.samples[0].alpha - h).abs() < 1e-6, "single lambda = log 2");
        assert!((lyap.samples[0].value - 1.0).abs() < 1e-6);
        // relabel identity: lambda = h/alpha pointwise
        for (d, l) in dim_spec.samples.iter().zip(&lyap.samples) {
            assert!((l.alpha - h / d.alpha).abs() < 1e-12);
            assert!((l.value - d.value).abs() < 1e-12);
        }
    }

    #[test]
    fn two_slope_lyapunov_matches_closed_form() {
        // full-branch Markov map: slope 3 on [0, 1/3], slope -1.5 on [1/3, 1]
        let map = IntervalMap::piecewise_linear(vec![
            (Iv::new(0.0, 1.0 / 3.0), vec![0.0, 3.0]),
            (Iv::new(1.0 / 3.0, 1.0), vec![1.5, -1.5]),
        ])
        .unwrap();
        let tower = build_tower(&map, 5, 1e-9);
        let scheme = build_scheme_type_a(&tower, &map, 0, Iv::new(0.0, 1.0), 4).unwrap();
        let h = 2f64.ln();
        let grid: Vec<f64> = (0..=40).map(|k| -2.0 + 0.1 * k as f64).collect();
        let cfg = SpectrumConfig::default();
        let (_, _, lyap) = lyapunov_spectrum(&scheme, &map, h, &grid, &cfg).unwrap();
        assert!(!lyap.degenerate);
        for s in &lyap.samples {
            assert!(s.alpha >= 1.5f64.ln() - 1e-6 && s.alpha <= 3f64.ln() + 1e-6);
        }
        // Lebesgue is the acip (sum of reciprocal slopes is 1), so the
        // acip landmark sits at lambda(acip) with full dimension there
        let lambda_ac = (3f64.ln() + 2.0 * 1.5f64.ln()) / 3.0;
        let ac = lyap.alpha_ac.unwrap();
        assert!((ac - lambda_ac).abs() < 1e-9, "acip landmark {ac} vs {lambda_ac}");
        let at_ac = lyap
            .samples
            .iter()
            .min_by(|a, b| {
                (a.alpha - lambda_ac)
                    .abs()
                    .partial_cmp(&(b.alpha - lambda_ac).abs())
                    .unwrap()
            })
            .unwrap();
        assert!((at_ac.value - 1.0).abs() < 1e-3, "dim L_lambda(acip) = 1");
        // oracle: T solves log(3^{-T} + 1.5^{-T}) = q log 2; compare the
        // spectrum against the Legendre pair of that scalar equation
        for s in &lyap.samples {
            let alpha_dim = h / s.alpha;
            let q = invert_two_slope_alpha(alpha_dim);
            let t = two_slope_t(q);
            let exact = t + q * alpha_dim;
            assert!(
                (s.value - exact).abs() <= 1e-2,
                "lambda={}, dim={} vs {}",
                s.alpha,
                s.value,
                exact
            );
        }
    }

    #[test]
    fn lyapunov_is_dimension_relabelled() {
        let map = IntervalMap::piecewise_linear(vec![
            (Iv::new(0.0, 1.0 / 3.0), vec![0.0, 3.0]),
            (Iv::new(1.0 / 3.0, 1.0), vec![1.5, -1.5]),
        ])
        .unwrap();
        let tower = build_tower(&map, 5, 1e-9);
        let scheme = build_scheme_type_a(&tower, &map, 0, Iv::new(0.0, 1.0), 4).unwrap();
        let h = 2f64.ln();
        let grid: Vec<f64> = (0..=20).map(|k| -1.0 + 0.1 * k as f64).collect();
        let cfg = SpectrumConfig::default();
        let (_, dim, lyap) = lyapunov_spectrum(&scheme, &map, h, &grid, &cfg).unwrap();
        assert!(!lyap.degenerate);
        assert_eq!(dim.samples.len(), lyap.samples.len());
        // same points up to the lambda = h/alpha relabelling (reversed order)
        for (d, l) in dim.samples.iter().zip(lyap.samples.iter().rev()) {
            assert!((l.alpha - h / d.alpha).abs() < 1e-12);
            assert!((l.value - d.value).abs() < 1e-12);
        }
    }

    fn two_slope_t(q: f64) -> f64 {
        // solve log(3^{-T} + 1.5^{-T}) = q log 2 by bisection
        let f = |t: f64| (3f64.powf(-t) + 1.5f64.powf(-t)).ln() - q * 2f64.ln();
        let mut lo = -30.0;
        let mut hi = 30.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn invert_two_slope_alpha(alpha: f64) -> f64 {
        let alpha_of = |q: f64| {
            let t = two_slope_t(q);
            let (a, b) = (3f64.powf(-t), 1.5f64.powf(-t));
            // alpha = -dT/dq = (log 2)(a + b) / (a log 3 + b log 1.5)
            2f64.ln() * (a + b) / (a * 3f64.ln() + b * 1.5f64.ln())
        };
        let mut lo = -8.0;
        let mut hi = 8.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if alpha_of(mid) > alpha {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn pointwise_lyapunov_examples() {
        let tent = IntervalMap::tent(2.0);
        let r = pointwise_lyapunov(&tent, 0.3321, 1000).unwrap();
        assert!((r.lower - 2f64.ln()).abs() < 1e-12);
        assert!((r.upper - 2f64.ln()).abs() < 1e-12);

        let q4 = IntervalMap::quadratic(4.0);
        let r = pointwise_lyapunov(&q4, 0.75, 500).unwrap();
        assert!((r.lower - 2f64.ln()).abs() < 1e-9, "fixed point multiplier 2");

        let q39 = IntervalMap::quadratic(3.9);
        let r = pointwise_lyapunov(&q39, 0.3137, 10_000).unwrap();
        assert!(r.lower <= r.upper);
    }

    #[test]
    fn pointwise_dimension_at_zero() {
        let (map, scheme) = tent_scheme(Iv::new(0.0, 1.0), 4);
        let phi = Potential::bernoulli(0.3);
        let rep = pointwise_dimension(&scheme, &map, &phi, 0.0, 1.0, None, 0.0, 200).unwrap();
        let d = rep.d_cylinder.unwrap();
        let expect = 0.3f64.ln() / -(2f64.ln());
        assert!((d - expect).abs() < 1e-10, "{d} vs {expect}");
        assert_eq!(rep.exit, ExitReason::Completed);
    }

    #[test]
    fn pointwise_dimension_lebesgue_generic() {
        let (map, scheme) = tent_scheme(Iv::new(0.0, 1.0), 4);
        let phi = Potential::constant(-(2f64.ln()));
        let g = gibbs_weights(&scheme, &map, &Potential::constant(0.0), 1.0, 0.0, 8).unwrap();
        let m = project_measure(&scheme, &map, &g, 512).unwrap();
        // Lebesgue-Gibbs: use psi = -log|DF| (t=1, q=0)
        let rep =
            pointwise_dimension(&scheme, &map, &phi, 1.0, 0.0, Some(&m), 0.377117, 400).unwrap();
        let d = rep.d_cylinder.unwrap();
        assert!((d - 1.0).abs() < 1e-2, "Lebesgue pointwise dimension 1, got {d}");
        let db = rep.d_ball.unwrap();
        assert!((db - 1.0).abs() < 5e-2, "ball estimate {db}");
        assert_eq!(rep.agreement, Some(true));
    }

    #[test]
    fn gibbs_typical_sample_dimension() {
        let (map, scheme) = tent_scheme(Iv::new(0.0, 1.0), 4);
        let phi = Potential::bernoulli(0.3);
        let g = gibbs_weights(&scheme, &map, &phi, 0.0, 1.0, 6).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let d = pointwise_dimension_sampled(&scheme, &map, &g, &phi, &mut rng, 1000).unwrap();
        let h = -(0.3 * 0.3f64.ln() + 0.7 * 0.7f64.ln());
        assert!((d - h / 2f64.ln()).abs() < 2e-2, "typical dimension h/lambda, got {d}");
    }

    #[test]
    fn visit_frequency_tent_and_monotone_in_r() {
        let tent = IntervalMap::tent(2.0);
        let tower = build_tower(&tent, 5, 1e-9);
        for r in 0..3 {
            let f = tower_visit_frequency(&tower, &tent, 0.337, 500, r).unwrap();
            assert_eq!(f, 1.0);
        }
        let q39 = IntervalMap::quadratic(3.9);
        let tower = build_tower(&q39, 40, 1e-12);
        let levels = tower_level_sequence(&tower, &q39, 0.2817, 10_000).unwrap();
        let freq = |r: usize| {
            levels.iter().filter(|l| l.is_some_and(|lv| lv <= r)).count() as f64
                / levels.len() as f64
        };
        let mut prev = 0.0;
        for r in 0..20 {
            let f = freq(r);
            assert!(f >= prev - 1e-12, "frequency nondecreasing in r");
            prev = f;
        }
        assert!(freq(0) > 0.0, "base level revisited");
    }

    #[test]
    fn deep_itinerary_stays_high() {
        // a point shadowing the critical orbit climbs the tower and rarely
        // visits low levels over the shadowing window
        let q39 = IntervalMap::quadratic(3.9);
        let tower = build_tower(&q39, 60, 1e-13);
        let x = 0.5 + 1e-12;
        let f = tower_visit_frequency(&tower, &q39, x, 40, 3).unwrap();
        assert!(f < 0.3, "trapped above level 3, frequency {f}");
    }

    #[test]
    fn large_scale_visit_times() {
        let tent = IntervalMap::tent(2.0);
        let x = 0.3127;
        let v = large_scale_visits(&tent, x, 0.4, 40).unwrap();
        // full-branch: every image is [0,1]; time counts iff f^n(x) in [0.4, 0.6]
        let mut y = x;
        let mut expect = Vec::new();
        for n in 0..=40 {
            if (0.4..=0.6).contains(&y) {
                expect.push(n);
            }
            y = tent.eval_unchecked(y);
        }
        assert_eq!(v.times, expect);

        let none = large_scale_visits(&tent, 0.1239, 0.75, 30).unwrap();
        assert!(none.times.is_empty(), "ball of radius > 1/2 cannot fit");

        let q39 = IntervalMap::quadratic(3.9);
        let v = large_scale_visits(&q39, 0.377, 0.05, 500).unwrap();
        assert!(!v.times.is_empty(), "smoke check: some large-scale times");
    }
}
