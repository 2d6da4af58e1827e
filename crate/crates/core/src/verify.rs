//! Built-in oracle suite: every pipeline stage checked against closed-form
//! values on piecewise-linear full-branch maps, plus a property suite on the
//! smooth quadratic map where exact values are out of reach. The rendered
//! report is byte-stable for a fixed seed; wall-clock budgets are checked
//! but never written into the report.

use crate::hofbauer::{build_tower, TowerPoint, TowerStep};
use crate::inducing::{
    build_scheme_type_a, return_time_tail, InducingScheme, TailWeights,
};
use crate::map_model::{
    check_range_condition, normalize_potential, IntervalMap, NormalizeConfig, Potential,
};
use crate::numerics::Iv;
use crate::spectra::{
    dimension_spectrum, pointwise_dimension, pointwise_dimension_sampled, SpectrumConfig,
};
use crate::thermo::{
    gibbs_weights, pb_diagnostic, project_measure, propagate_conformal_tower, solve_t, tq_curve,
    ConformalApprox, PbVerdict, SolveConfig, WordTable,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub outcomes: Vec<CriterionOutcome>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    /// Canonical textual report; identical bytes for identical seeds.
    pub fn render(&self) -> String {
        let mut out = String::from("oracle verification report\n");
        for o in &self.outcomes {
            let _ = writeln!(
                out,
                "{} criterion {:2}: {} [{}]",
                if o.passed { "PASS" } else { "FAIL" },
                o.id,
                o.name,
                o.details
            );
        }
        let _ = writeln!(
            out,
            "result: {}",
            if self.all_passed() { "all criteria passed" } else { "FAILURES PRESENT" }
        );
        out
    }
}

struct Check {
    ok: bool,
    notes: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check { ok: true, notes: Vec::new() }
    }

    fn within(&mut self, label: &str, value: f64, target: f64, tol: f64) {
        let pass = (value - target).abs() <= tol;
        self.ok &= pass;
        self.notes.push(format!(
            "{label}={value:.6e} target {target:.6e}±{tol:.1e} {}",
            if pass { "ok" } else { "VIOLATED" }
        ));
    }

    fn holds(&mut self, label: &str, pass: bool) {
        self.ok &= pass;
        self.notes.push(format!("{label} {}", if pass { "ok" } else { "VIOLATED" }));
    }

    fn details(&self) -> String {
        self.notes.join("; ")
    }
}

fn binomial_t(p: f64, q: f64) -> f64 {
    ((p.powf(q) + (1.0 - p).powf(q)).ln()) / 2f64.ln()
}

fn binomial_alpha(p: f64, q: f64) -> f64 {
    let (a, b) = (p.powf(q), (1.0 - p).powf(q));
    -(a * p.ln() + b * (1.0 - p).ln()) / ((a + b) * 2f64.ln())
}

fn binomial_ds_at_alpha(p: f64, alpha: f64) -> f64 {
    let mut lo = -16.0;
    let mut hi = 16.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if binomial_alpha(p, mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = 0.5 * (lo + hi);
    binomial_t(p, q) + q * alpha
}

fn tent_full_scheme(map: &IntervalMap) -> InducingScheme {
    let tower = build_tower(map, 5, 1e-9);
    build_scheme_type_a(&tower, map, 0, Iv::new(0.0, 1.0), 4).expect("tent full-base scheme")
}

/// Budgets checked per criterion, in milliseconds.
const BUDGET_T_CURVE_MS: u128 = 10_000;
const BUDGET_SPECTRUM_MS: u128 = 60_000;
const BUDGET_SMOOTH_MS: u128 = 300_000;

fn run_criteria(seed: u64) -> Vec<CriterionOutcome> {
    let mut outcomes = Vec::with_capacity(11);
    let tent = IntervalMap::tent(2.0);
    let bern = Potential::bernoulli(0.3);
    let full_scheme = tent_full_scheme(&tent);
    let solve_cfg = SolveConfig::default();

    // 1: binomial temperature oracle
    let started = Instant::now();
    let mut c = Check::new();
    let table = WordTable::build(&full_scheme, &tent, &bern, 8, usize::MAX, 200_000).unwrap();
    for q in [-1.0, 0.0, 0.5, 1.0, 2.0] {
        match solve_t(&table, q, &solve_cfg, None) {
            Ok((t, _)) => c.within(&format!("T({q})"), t, binomial_t(0.3, q), 1e-3),
            Err(e) => c.holds(&format!("T({q}) solved ({e})"), false),
        }
    }
    if let Ok((t2, _)) = solve_t(&table, 2.0, &solve_cfg, None) {
        c.within("T(2)", t2, -0.7859, 1e-3);
    }
    c.holds("runtime<10s", started.elapsed().as_millis() < BUDGET_T_CURVE_MS);
    outcomes.push(CriterionOutcome {
        id: 1,
        name: "binomial T-curve oracle",
        passed: c.ok,
        details: c.details(),
    });

    // 2: spectrum landmarks and sup-norm
    let started = Instant::now();
    let mut c = Check::new();
    let grid: Vec<f64> = (0..=40).map(|k| -2.0 + 0.1 * k as f64).collect();
    let spec_cfg = SpectrumConfig::default();
    let spectrum_curves = dimension_spectrum(&full_scheme, &tent, &bern, &grid, &spec_cfg);
    let mut registry: Vec<(&'static str, Option<f64>, Option<f64>)> = Vec::new();
    match &spectrum_curves {
        Ok((curve, spec)) => {
            let (a0, ds0) = spec.alpha_0.unwrap_or((f64::NAN, f64::NAN));
            c.within("DS(alpha(0))", ds0, 1.0, 1e-2);
            c.within("alpha(0)", a0, 1.1258, 5e-3);
            let (a1, ds1) = spec.alpha_1.unwrap_or((f64::NAN, f64::NAN));
            c.within("alpha(1)", a1, 0.8813, 1e-2);
            c.within("DS(alpha(1))-alpha(1)", ds1 - a1, 0.0, 1e-2);
            let sup = spec
                .samples
                .iter()
                .map(|s| (s.value - binomial_ds_at_alpha(0.3, s.alpha)).abs())
                .fold(0.0f64, f64::max);
            c.holds(&format!("sup-norm {sup:.3e} <= 1e-2"), sup <= 1e-2);
            registry.push((
                "binomial",
                curve.min_second_difference(),
                spec.max_concavity_defect(),
            ));
        }
        Err(e) => c.holds(&format!("spectrum built ({e})"), false),
    }
    c.holds("runtime<60s", started.elapsed().as_millis() < BUDGET_SPECTRUM_MS);
    outcomes.push(CriterionOutcome {
        id: 2,
        name: "spectrum landmarks",
        passed: c.ok,
        details: c.details(),
    });

    // 4 (computed before 3 so its curves join the registry): degeneracy
    let mut c4 = Check::new();
    let norm_const = normalize_potential(&tent, &Potential::constant(0.0), NormalizeConfig::default());
    match norm_const {
        Ok(phi0) => {
            match dimension_spectrum(&full_scheme, &tent, &phi0, &grid, &spec_cfg) {
                Ok((curve, spec)) => {
                    let mut worst = 0.0f64;
                    for s in &curve.samples {
                        if let Some(t) = s.t {
                            worst = worst.max((t - (1.0 - s.q)).abs());
                        }
                    }
                    c4.holds(&format!("max|T(q)-(1-q)| {worst:.3e} <= 1e-6"), worst <= 1e-6);
                    c4.holds("degenerate flag", spec.degenerate);
                    registry.push(("affine", curve.min_second_difference(), spec.max_concavity_defect()));
                }
                Err(e) => c4.holds(&format!("affine spectrum built ({e})"), false),
            }
        }
        Err(e) => c4.holds(&format!("normalization ({e})"), false),
    }

    // 11: smooth-map property suite (also feeds the registry)
    let started = Instant::now();
    let mut c11 = Check::new();
    let q39 = IntervalMap::quadratic(3.9);
    let smooth = smooth_suite(&q39, &mut c11);
    if let Some((min2, maxc)) = smooth {
        registry.push(("smooth", min2, maxc));
    }
    c11.holds("runtime<5min", started.elapsed().as_millis() < BUDGET_SMOOTH_MS);

    // 3: convexity/concavity across every curve the suite produced
    let mut c3 = Check::new();
    for (name, min2, maxc) in &registry {
        match min2 {
            Some(v) => c3.holds(&format!("{name} T second-diff {v:.2e} >= -1e-6"), *v >= -1e-6),
            None => c3.notes.push(format!("{name} T second-diff skipped (degenerate)")),
        }
        match maxc {
            Some(v) => c3.holds(&format!("{name} DS concavity defect {v:.2e} <= 1e-6"), *v <= 1e-6),
            None => c3.notes.push(format!("{name} DS concavity skipped (single point)")),
        }
    }
    outcomes.push(CriterionOutcome {
        id: 3,
        name: "convexity/concavity",
        passed: c3.ok,
        details: c3.details(),
    });
    outcomes.push(CriterionOutcome {
        id: 4,
        name: "degeneracy detection",
        passed: c4.ok,
        details: c4.details(),
    });

    // 5: Gibbs exactness
    let mut c = Check::new();
    match gibbs_weights(&full_scheme, &tent, &bern, 0.0, 1.0, 10) {
        Ok(g) => {
            let mut worst = 0.0f64;
            for w in &g.words {
                let lefts = w
                    .symbols
                    .iter()
                    .filter(|&&s| g.branch_ids[s as usize] == 0)
                    .count() as i32;
                let expect = 0.3f64.powi(lefts) * 0.7f64.powi(10 - lefts);
                worst = worst.max((w.weight - expect).abs());
            }
            c.holds(&format!("max|weight-product| {worst:.2e} <= 1e-12"), worst <= 1e-12);
            c.within("K", g.k_constant, 1.0, 1e-9);
        }
        Err(e) => c.holds(&format!("gibbs built ({e})"), false),
    }
    outcomes.push(CriterionOutcome {
        id: 5,
        name: "gibbs exactness",
        passed: c.ok,
        details: c.details(),
    });

    // 6 + 7: Kac/Abramov and tail decay on the half-base scheme
    let tower = build_tower(&tent, 5, 1e-9);
    let half = build_scheme_type_a(&tower, &tent, 0, Iv::new(0.0, 0.5), 28).unwrap();
    let mut c = Check::new();
    match gibbs_weights(&half, &tent, &Potential::constant(0.0), 1.0, 0.0, 2) {
        Ok(g) => match project_measure(&half, &tent, &g, 128) {
            Ok(m) => {
                c.within("int tau", m.int_tau, 2.0, 1e-6);
                let h_f = m.h_induced;
                c.holds(
                    &format!("h_induced {h_f:.6} within 2% of 2 log 2"),
                    (h_f - 2.0 * 2f64.ln()).abs() <= 0.02 * 2.0 * 2f64.ln(),
                );
                c.holds(
                    &format!("h_mu {:.6} within 2% of log 2", m.h_mu),
                    (m.h_mu - 2f64.ln()).abs() <= 0.02 * 2f64.ln(),
                );
            }
            Err(e) => c.holds(&format!("projection ({e})"), false),
        },
        Err(e) => c.holds(&format!("lebesgue gibbs ({e})"), false),
    }
    outcomes.push(CriterionOutcome {
        id: 6,
        name: "kac/abramov",
        passed: c.ok,
        details: c.details(),
    });

    let mut c = Check::new();
    match return_time_tail(&half, &tent, TailWeights::Lebesgue) {
        Ok(tail) => {
            let mut worst = 0.0f64;
            for n in 1..=12usize {
                let mass = tail.per_tau.get(&n).map_or(0.0, |b| b.mass);
                worst = worst.max((mass - 2f64.powi(-(n as i32))).abs());
            }
            c.holds(&format!("max|mass(tau=n)-2^-n| {worst:.2e} <= 1e-12"), worst <= 1e-12);
            match tail.slope {
                Some(s) => c.holds(
                    &format!("slope {s:.6} within 5% of -log 2"),
                    (s + 2f64.ln()).abs() <= 0.05 * 2f64.ln(),
                ),
                None => c.holds("slope fit available", false),
            }
        }
        Err(e) => c.holds(&format!("tail ({e})"), false),
    }
    outcomes.push(CriterionOutcome {
        id: 7,
        name: "return-time tail",
        passed: c.ok,
        details: c.details(),
    });

    // 8: conformality of the propagated measure (complete scheme: the
    // rounding floor is the only defect left)
    let mut c = Check::new();
    let geom = Potential::geometric(1.0);
    match gibbs_weights(&full_scheme, &tent, &geom, 0.0, 1.0, 6) {
        Ok(g) => {
            let m_base = ConformalApprox::lebesgue_on_base(&full_scheme, &g);
            match propagate_conformal_tower(&tower, &full_scheme, &tent, &m_base, &geom, 4096, 8) {
                Ok(tc) => {
                    c.holds(
                        &format!("residual {:.2e} < 1e-12", tc.residual),
                        tc.residual < 1e-12,
                    );
                    c.holds(
                        &format!("overlap density spread {:.2e}", tc.density_spread),
                        tc.density_spread < 1e-9,
                    );
                }
                Err(e) => c.holds(&format!("propagation ({e})"), false),
            }
        }
        Err(e) => c.holds(&format!("base measure ({e})"), false),
    }
    outcomes.push(CriterionOutcome {
        id: 8,
        name: "conformality",
        passed: c.ok,
        details: c.details(),
    });

    // 9: tower structure
    let mut c = Check::new();
    let tower39 = build_tower(&q39, 12, 1e-12);
    let census = tower39.level_census(&q39);
    let max_count = census.counts.values().copied().max().unwrap_or(0);
    c.holds(&format!("census max {max_count} <= 2"), max_count <= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    while checked < 1000 {
        let d = rng.gen_range(0..tower39.domains.len());
        let dom = &tower39.domains[d];
        let x = dom.interval.a + rng.gen::<f64>() * dom.interval.len();
        if let TowerStep::Inside(p) = tower39.step(&q39, TowerPoint { x, domain: d }) {
            let fx = q39.eval_unchecked(x);
            worst = worst.max((p.x - fx).abs());
            checked += 1;
        }
    }
    c.holds(&format!("semiconjugacy defect {worst:.2e} < 1e-12"), worst < 1e-12);
    let tent_tower = build_tower(&tent, 6, 1e-9);
    c.holds("tent tower collapses", tent_tower.domains.len() == 1);
    let q4 = IntervalMap::quadratic(4.0);
    let q4_tower = build_tower(&q4, 6, 1e-9);
    c.holds("chebyshev tower collapses", q4_tower.domains.len() == 1);
    outcomes.push(CriterionOutcome {
        id: 9,
        name: "tower structure",
        passed: c.ok,
        details: c.details(),
    });

    // 10: pointwise dimension
    let mut c = Check::new();
    match pointwise_dimension(&full_scheme, &tent, &bern, 0.0, 1.0, None, 0.0, 200) {
        Ok(rep) => match rep.d_cylinder {
            Some(d) => c.within("d(0)", d, 1.737, 1e-2),
            None => c.holds("d(0) computed", false),
        },
        Err(e) => c.holds(&format!("d(0) ({e})"), false),
    }
    match gibbs_weights(&full_scheme, &tent, &bern, 0.0, 1.0, 6) {
        Ok(g) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
            match pointwise_dimension_sampled(&full_scheme, &tent, &g, &bern, &mut rng, 1000) {
                Ok(d) => c.within("d(typical)", d, 0.8813, 2e-2),
                Err(e) => c.holds(&format!("typical sample ({e})"), false),
            }
        }
        Err(e) => c.holds(&format!("gibbs for sampling ({e})"), false),
    }
    outcomes.push(CriterionOutcome {
        id: 10,
        name: "pointwise dimension",
        passed: c.ok,
        details: c.details(),
    });

    outcomes.push(CriterionOutcome {
        id: 11,
        name: "smooth-map property suite",
        passed: c11.ok,
        details: c11.details(),
    });

    outcomes.sort_by_key(|o| o.id);
    outcomes
}

/// The quadratic(3.9) suite: range-checked Holder potential, normalization,
/// tower scheme, converged temperatures on `[0.5, 1.5]` with `T(1)` near 0,
/// pressure monotonicity in `t`, and a definite tail verdict.
/// Returns the curve diagnostics for the convexity criterion.
fn smooth_suite(q39: &IntervalMap, c: &mut Check) -> Option<(Option<f64>, Option<f64>)> {
    // Holder potential: 0.2 sin(2 pi x) as a dense table; oscillation 0.4
    // stays under h_top(3.9) ~ 0.67
    let xs: Vec<f64> = (0..=128).map(|k| k as f64 / 128.0).collect();
    let vals: Vec<f64> = xs
        .iter()
        .map(|&x| 0.2 * (2.0 * std::f64::consts::PI * x).sin())
        .collect();
    let raw = Potential::table(xs, vals);
    let h_top = match q39.estimate_topological_entropy(16) {
        Ok(e) => e.value,
        Err(_) => {
            c.holds("entropy estimate", false);
            return None;
        }
    };
    let range = check_range_condition(q39, &raw, h_top);
    c.holds(
        &format!("range condition margin {:.4}", range.margin),
        range.ok,
    );
    let phi = match normalize_potential(q39, &raw, NormalizeConfig { depth: 12, tolerance: 1e-3 }) {
        Ok(p) => p,
        Err(e) => {
            c.holds(&format!("normalization ({e})"), false);
            return None;
        }
    };
    // tall truncation: two domains per level keeps this cheap, and return
    // exploration then never escapes within the tau cap
    let tower = build_tower(q39, 44, 1e-13);
    let scheme = match smooth_scheme(q39, &tower) {
        Ok(s) => s,
        Err(e) => {
            c.holds(&format!("scheme built ({e})"), false);
            return None;
        }
    };
    c.holds(
        &format!("scheme coverage {:.4} >= 0.8", scheme.coverage),
        scheme.coverage >= 0.8,
    );
    let mut table = match WordTable::build(&scheme, q39, &phi, 4, 16, 100_000) {
        Ok(t) => t,
        Err(e) => {
            c.holds(&format!("word table ({e})"), false);
            return None;
        }
    };
    // the cylinder-sum and induced estimators differ at desk scale; fold the
    // residual of the standing normalization into the table so downstream
    // identities are judged against one pressure functional
    match table.normalize_induced(1e-9) {
        Ok(s) => c.holds(
            &format!("induced renormalization shift {s:.4} small"),
            s.abs() < 0.2,
        ),
        Err(e) => c.holds(&format!("induced renormalization ({e})"), false),
    }
    let grid: Vec<f64> = (0..=10).map(|k| 0.5 + 0.1 * k as f64).collect();
    let cfg = SolveConfig::default();
    let curve = tq_curve(&table, &grid, &cfg);
    let all_converged = curve.samples.iter().all(|s| s.converged && s.t.is_some());
    c.holds("all q in [0.5,1.5] converged", all_converged);
    match curve.t_at(1.0) {
        Some(t1) => c.within("T(1)", t1, 0.0, 5e-2),
        None => c.holds("T(1) solved", false),
    }
    // pressure monotone in t at every sampled q; divergence below the
    // convergence threshold reads as +infinity
    let mut monotone = true;
    for s in &curve.samples {
        let Some(tq) = s.t else { continue };
        let mut prev: Option<f64> = None;
        for k in 0..5 {
            let t = tq - 0.5 + 0.25 * k as f64;
            let value = match table.pressure(t, s.q, 1e-6) {
                Ok(p) => p.value,
                Err(crate::Error::Divergence(_)) => f64::INFINITY,
                Err(_) => {
                    monotone = false;
                    continue;
                }
            };
            if let Some(p) = prev {
                // an infinite plateau is allowed; finite values must drop
                if p.is_finite() && value >= p {
                    monotone = false;
                }
            }
            prev = Some(value);
        }
    }
    c.holds("pressure decreasing in t at every q", monotone);
    // definite tail verdict with a beta estimate
    let t1 = curve.t_at(1.0).unwrap_or(0.0);
    let pb = pb_diagnostic(&table, t1, 1.0, cfg.pb_margin);
    c.holds(
        &format!(
            "tail verdict definite ({})",
            match pb.verdict {
                PbVerdict::In => "in",
                PbVerdict::Out => "out",
                PbVerdict::Inconclusive => "inconclusive",
            }
        ),
        pb.verdict != PbVerdict::Inconclusive && pb.beta.is_some(),
    );
    // spectrum for the registry
    match crate::spectra::legendre_transform(&curve) {
        Ok(spec) => Some((curve.min_second_difference(), spec.max_concavity_defect())),
        Err(e) => {
            c.holds(&format!("legendre transform ({e})"), false);
            Some((curve.min_second_difference(), None))
        }
    }
}

/// Deterministic scheme choice for the smooth suite: the widest cylinder of
/// `P_1..P_4` sitting compactly inside a transitive-part domain, as the base
/// of a type B scheme. Wide bases return fast (Kac), so a moderate cap
/// already covers nearly all of the base.
fn smooth_scheme(
    map: &IntervalMap,
    tower: &crate::hofbauer::TowerGraph,
) -> crate::Result<InducingScheme> {
    let tpart = tower.transitive_part();
    let mut best: Option<(f64, Iv)> = None;
    let mut part = crate::cylinders::refine_partition(map, 0);
    for _ in 1..=4 {
        part = crate::cylinders::refine_once(map, &part);
        for cyl in &part.cylinders {
            for d in tower.domains.iter().filter(|d| tpart.contains(d.id)) {
                let left = cyl.interval.a - d.interval.a;
                let right = d.interval.b - cyl.interval.b;
                if left > 1e-6 && right > 1e-6 {
                    let score = cyl.interval.len();
                    if best.as_ref().is_none_or(|(s, _)| score > *s) {
                        best = Some((score, cyl.interval));
                    }
                }
            }
        }
    }
    let (_, base) = best.ok_or_else(|| {
        crate::Error::Precondition("no cylinder compactly inside a transitive domain".into())
    })?;
    crate::inducing::build_scheme_type_b(tower, map, base, 0.05, 24)
}

/// Run the full suite. Criterion 12 re-runs the first eleven criteria with
/// the same seed and byte-compares the rendered fragments.
pub fn run_all(seed: u64) -> VerifyReport {
    let first = run_criteria(seed);
    let second = run_criteria(seed);
    let render = |os: &[CriterionOutcome]| {
        let mut s = String::new();
        for o in os {
            let _ = writeln!(s, "{} {} {}", o.id, o.passed, o.details);
        }
        s
    };
    let identical = render(&first) == render(&second);
    let mut outcomes = first;
    outcomes.push(CriterionOutcome {
        id: 12,
        name: "determinism",
        passed: identical,
        details: if identical {
            "two runs with the same seed rendered identical reports".into()
        } else {
            "reports differed between runs".into()
        },
    });
    VerifyReport { outcomes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_helpers_match_closed_forms() {
        assert!((binomial_t(0.3, 2.0) + 0.785875).abs() < 1e-5);
        assert!((binomial_t(0.3, 0.0) - 1.0).abs() < 1e-12);
        assert!((binomial_alpha(0.3, 0.0) - 1.12577).abs() < 1e-4);
        assert!((binomial_alpha(0.3, 1.0) - 0.88129).abs() < 1e-4);
        let ds = binomial_ds_at_alpha(0.3, binomial_alpha(0.3, 1.0));
        assert!((ds - 0.88129).abs() < 1e-3, "DS at alpha(1) equals alpha(1)");
    }
}
