//! Interval maps, critical data, potentials and global diagnostics.
//!
//! Maps are stored as ordered lists of polynomial branches on subintervals of
//! `[0, 1]`. Piecewise-linear families (tent, two-slope Markov) are admitted
//! alongside smooth ones even though the smooth theory does not cover them:
//! they are the closed-form oracle families every later stage is verified
//! against.

use crate::error::Error;
use crate::numerics::{self, Iv};
use crate::Result;
use serde::{Deserialize, Serialize};

/// Tolerance for locating critical points by bisection.
pub const CRIT_TOL: f64 = 1e-12;
/// Tolerance for the critical-orbit disjointness scan (condition d).
pub const ORBIT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Increasing,
    Decreasing,
}

/// One monotone piece of the map: a polynomial on a subinterval.
/// Coefficients are in ascending order of degree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub interval: Iv,
    pub coeffs: Vec<f64>,
    pub orientation: Orientation,
}

impl Branch {
    /// Polynomial value, defined on all of `R` (monotone extension).
    pub fn value(&self, x: f64) -> f64 {
        self.horner(x)
    }

    /// Polynomial derivative.
    pub fn deriv(&self, x: f64) -> f64 {
        self.horner_deriv(x)
    }

    fn horner(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    fn horner_deriv(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * x + c * k as f64;
        }
        acc
    }

    fn horner_deriv2(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(2).rev() {
            acc = acc * x + c * (k * (k - 1)) as f64;
        }
        acc
    }

    fn horner_deriv3(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(3).rev() {
            acc = acc * x + c * (k * (k - 1) * (k - 2)) as f64;
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FamilyTag {
    /// Symmetric tent with the given slope; `slope = 2` is the full tent.
    Tent { slope: f64 },
    /// Logistic family `x -> lambda x (1 - x)`.
    Quadratic { lambda: f64 },
    /// Piecewise-linear (Markov or not) map given branch by branch.
    PiecewiseLinear,
    Custom,
}

impl FamilyTag {
    /// Whether branches are expected to join continuously.
    pub fn demands_continuity(&self) -> bool {
        matches!(self, FamilyTag::Tent { .. } | FamilyTag::Quadratic { .. })
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, FamilyTag::Quadratic { .. } | FamilyTag::Custom)
    }
}

/// A piecewise-monotone interval map on `[0, 1]`.
#[derive(Debug, Serialize, Deserialize)]
pub struct IntervalMap {
    branches: Vec<Branch>,
    family: FamilyTag,
    /// Lazily computed interior junctions and critical points; immutable
    /// once filled, so orbit trackers stop re-deriving fold data.
    #[serde(skip)]
    cuts: std::sync::OnceLock<Vec<f64>>,
}

impl Clone for IntervalMap {
    fn clone(&self) -> Self {
        IntervalMap {
            branches: self.branches.clone(),
            family: self.family.clone(),
            cuts: std::sync::OnceLock::new(),
        }
    }
}

impl IntervalMap {
    pub fn tent(slope: f64) -> Self {
        let branches = vec![
            Branch {
                interval: Iv::new(0.0, 0.5),
                coeffs: vec![0.0, slope],
                orientation: Orientation::Increasing,
            },
            Branch {
                interval: Iv::new(0.5, 1.0),
                coeffs: vec![slope, -slope],
                orientation: Orientation::Decreasing,
            },
        ];
        IntervalMap {
            branches,
            family: FamilyTag::Tent { slope },
            cuts: std::sync::OnceLock::new(),
        }
    }

    pub fn quadratic(lambda: f64) -> Self {
        let coeffs = vec![0.0, lambda, -lambda];
        let branches = vec![
            Branch {
                interval: Iv::new(0.0, 0.5),
                coeffs: coeffs.clone(),
                orientation: Orientation::Increasing,
            },
            Branch {
                interval: Iv::new(0.5, 1.0),
                coeffs,
                orientation: Orientation::Decreasing,
            },
        ];
        IntervalMap {
            branches,
            family: FamilyTag::Quadratic { lambda },
            cuts: std::sync::OnceLock::new(),
        }
    }

    /// Full-branch piecewise-linear map: each `(interval, [c0, c1])` branch
    /// must map its interval onto `[0, 1]`.
    pub fn piecewise_linear(pieces: Vec<(Iv, Vec<f64>)>) -> Result<Self> {
        let branches = pieces
            .into_iter()
            .map(|(interval, coeffs)| {
                let b = Branch {
                    interval,
                    coeffs,
                    orientation: Orientation::Increasing,
                };
                let orientation = if b.horner_deriv(interval.mid()) >= 0.0 {
                    Orientation::Increasing
                } else {
                    Orientation::Decreasing
                };
                Branch { orientation, ..b }
            })
            .collect();
        let map = IntervalMap {
            branches,
            family: FamilyTag::PiecewiseLinear,
            cuts: std::sync::OnceLock::new(),
        };
        map.validate()?;
        Ok(map)
    }

    pub fn from_branches(branches: Vec<(Iv, Vec<f64>)>, family: FamilyTag) -> Result<Self> {
        let branches = branches
            .into_iter()
            .map(|(interval, coeffs)| {
                let tmp = Branch {
                    interval,
                    coeffs,
                    orientation: Orientation::Increasing,
                };
                let orientation = if tmp.horner_deriv(interval.mid()) >= 0.0 {
                    Orientation::Increasing
                } else {
                    Orientation::Decreasing
                };
                Branch {
                    orientation,
                    ..tmp
                }
            })
            .collect();
        let map = IntervalMap { branches, family, cuts: std::sync::OnceLock::new() };
        map.validate()?;
        Ok(map)
    }

    /// Branch intervals partition `[0,1]`, each branch strictly monotone on
    /// its interior (sampled), continuity where the family demands it.
    fn validate(&self) -> Result<()> {
        if self.branches.is_empty() {
            return Err(Error::Config("map has no branches".into()));
        }
        let mut prev_end = 0.0;
        for (i, b) in self.branches.iter().enumerate() {
            if (b.interval.a - prev_end).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "branch {i} starts at {} but previous ends at {prev_end}",
                    b.interval.a
                )));
            }
            prev_end = b.interval.b;
            let sign0 = match b.orientation {
                Orientation::Increasing => 1.0,
                Orientation::Decreasing => -1.0,
            };
            for x in numerics::chebyshev_points(b.interval.a, b.interval.b, 17) {
                if sign0 * b.horner_deriv(x) <= 0.0 && self.family != FamilyTag::Custom {
                    // allow an interior critical point only for smooth maps
                    if !self.family.is_smooth() {
                        return Err(Error::Config(format!(
                            "branch {i} not strictly monotone at x={x}"
                        )));
                    }
                }
            }
        }
        if (prev_end - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "branches end at {prev_end}, expected 1"
            )));
        }
        if self.family.demands_continuity() {
            for w in self.branches.windows(2) {
                let x = w[0].interval.b;
                let l = w[0].horner(x);
                let r = w[1].horner(x);
                if (l - r).abs() > 1e-9 {
                    return Err(Error::Config(format!(
                        "discontinuity at junction {x}: {l} vs {r}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn family(&self) -> &FamilyTag {
        &self.family
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    /// Index of the branch containing `x`; shared endpoints resolve to the
    /// left branch.
    pub fn branch_index(&self, x: f64) -> usize {
        for (i, b) in self.branches.iter().enumerate() {
            if x <= b.interval.b || i == self.branches.len() - 1 {
                return i;
            }
        }
        unreachable!()
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(x));
        }
        Ok(self.branches[self.branch_index(x)].horner(x))
    }

    /// `f(x)` without the domain check, for hot loops on trusted input.
    pub fn eval_unchecked(&self, x: f64) -> f64 {
        self.branches[self.branch_index(x)].horner(x)
    }

    /// Evaluate on a specific branch (ignores the branch's interval bounds;
    /// used for one-sided values and monotone extensions).
    pub fn eval_on_branch(&self, idx: usize, x: f64) -> f64 {
        self.branches[idx].horner(x)
    }

    /// `Df(x)`. At a junction where the one-sided derivatives agree the common
    /// value is returned; otherwise a junction error carries both.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(x));
        }
        for w in 0..self.branches.len().saturating_sub(1) {
            let j = self.branches[w].interval.b;
            if (x - j).abs() < 1e-15 {
                let left = self.branches[w].horner_deriv(j);
                let right = self.branches[w + 1].horner_deriv(j);
                if (left - right).abs() < 1e-9 {
                    return Ok(left);
                }
                return Err(Error::Junction { x, left, right });
            }
        }
        Ok(self.branches[self.branch_index(x)].horner_deriv(x))
    }

    /// `Df(x)` resolved to the left-branch value at junctions.
    pub fn derivative_unchecked(&self, x: f64) -> f64 {
        self.branches[self.branch_index(x)].horner_deriv(x)
    }

    /// Interior branch junctions and interior zeros of `Df` (where the map
    /// folds); these are the points cylinder refinement cuts at. Computed
    /// once and cached.
    pub fn cut_points(&self) -> Vec<f64> {
        self.cuts
            .get_or_init(|| {
                let mut cuts: Vec<f64> = self
                    .branches
                    .windows(2)
                    .map(|w| w[0].interval.b)
                    .collect();
                for c in self.critical_report(40).points {
                    if cuts.iter().all(|&q| (q - c.position).abs() > 1e-12) {
                        cuts.push(c.position);
                    }
                }
                cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                cuts
            })
            .clone()
    }

    /// Orbit `x, f(x), ..., f^{n}(x)` (length `n + 1`).
    pub fn orbit(&self, x: f64, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n + 1);
        let mut y = x;
        out.push(y);
        for _ in 0..n {
            y = self.eval_unchecked(y).clamp(0.0, 1.0);
            out.push(y);
        }
        out
    }

    /// Interior zeros of `Df` with fitted orders, plus turning points of
    /// non-smooth families (junctions where the one-sided slopes flip sign
    /// without vanishing).
    pub fn critical_report(&self, order_fit_depth: usize) -> CriticalReport {
        let mut points = Vec::new();
        let mut turning = Vec::new();
        for b in &self.branches {
            // sign-change scan inside the branch
            let grid = 64;
            let (a, bb) = (b.interval.a, b.interval.b);
            let h = (bb - a) / grid as f64;
            let mut prev_x = a + 1e-13 * (bb - a).max(1e-3);
            let mut prev_s = b.horner_deriv(prev_x);
            for k in 1..=grid {
                let x = if k == grid { bb - 1e-13 } else { a + h * k as f64 };
                let s = b.horner_deriv(x);
                if prev_s == 0.0 || prev_s * s < 0.0 {
                    let root = numerics::bisect_monotone(
                        &|t| b.horner_deriv(t),
                        prev_x,
                        x,
                        0.0,
                        CRIT_TOL,
                    );
                    points.push(self.fit_critical_order(root, order_fit_depth));
                }
                prev_x = x;
                prev_s = s;
            }
        }
        for w in self.branches.windows(2) {
            let j = w[0].interval.b;
            let dl = w[0].horner_deriv(j);
            let dr = w[1].horner_deriv(j);
            if dl.abs() < 1e-6 && dr.abs() < 1e-6 {
                // smooth fold sitting exactly at a branch junction
                if points.iter().all(|p: &CriticalPoint| (p.position - j).abs() > 1e-9) {
                    points.push(self.fit_critical_order(j, order_fit_depth));
                }
            } else if dl * dr < 0.0 && dl.abs() > 1e-6 && dr.abs() > 1e-6 {
                turning.push(j);
            }
        }
        points.sort_by(|a, b| a.position.partial_cmp(&b.position).unwrap());
        points.dedup_by(|a, b| (a.position - b.position).abs() < 1e-9);
        CriticalReport { points, turning_points: turning }
    }

    /// Fit `ell_c` from log|f(x) - f(c)| against log|x - c| over dyadic
    /// offsets on each side.
    fn fit_critical_order(&self, c: f64, depth: usize) -> CriticalPoint {
        let fc = self.eval_unchecked(c);
        let fit_side = |sign: f64| -> (f64, f64) {
            let mut lx = Vec::new();
            let mut ly = Vec::new();
            // offsets below ~2^-22 drown in cancellation of f(x) - f(c)
            for j in 8..depth.clamp(12, 22) {
                let off = 2f64.powi(-(j as i32));
                let x = c + sign * off;
                if !(0.0..=1.0).contains(&x) {
                    continue;
                }
                let d = (self.eval_unchecked(x) - fc).abs();
                if d > 1e4 * f64::EPSILON * fc.abs().max(1e-3) {
                    lx.push(off.ln());
                    ly.push(d.ln());
                }
            }
            match numerics::linear_fit(&lx, &ly) {
                Some(f) => (f.slope, f.intercept.exp()),
                None => (f64::NAN, f64::NAN),
            }
        };
        let (ol, cl) = fit_side(-1.0);
        let (or_, cr) = fit_side(1.0);
        let order = match (ol.is_finite(), or_.is_finite()) {
            (true, true) => 0.5 * (ol + or_),
            (true, false) => ol,
            (false, true) => or_,
            _ => f64::NAN,
        };
        CriticalPoint {
            position: c,
            order,
            side_coefficients: (cl, cr),
        }
    }

    /// Lap counts (numbers of monotone branches) of `f^n` for `n = 1..=n_max`
    /// by forward image propagation. Counting stops early when the number of
    /// pieces exceeds `piece_cap`; the flag reports that truncation.
    pub fn lap_counts(&self, n_max: usize, piece_cap: usize) -> (Vec<u64>, bool) {
        let cuts = self.cut_points();
        let mut pieces: Vec<Iv> = vec![Iv::new(0.0, 1.0)];
        let mut laps = Vec::with_capacity(n_max);
        let mut truncated = false;
        for _ in 0..n_max {
            let mut next = Vec::with_capacity(pieces.len() * 2);
            for piece in &pieces {
                for sub in split_at_cuts(*piece, &cuts) {
                    let fa = self.eval_unchecked(sub.a);
                    let fb = self.eval_unchecked(sub.b);
                    next.push(Iv::new(fa.clamp(0.0, 1.0), fb.clamp(0.0, 1.0)));
                }
            }
            laps.push(next.len() as u64);
            if next.len() > piece_cap {
                truncated = true;
                break;
            }
            pieces = next;
        }
        (laps, truncated)
    }

    /// Topological entropy from the growth rate of lap counts,
    /// `h = lim (1/n) log lap(f^n)`, with the whole sequence exposed.
    pub fn estimate_topological_entropy(&self, n_max: usize) -> Result<EntropyEstimate> {
        if n_max < 4 {
            return Err(Error::Precondition("entropy estimate needs n_max >= 4".into()));
        }
        let (laps, truncated) = self.lap_counts(n_max, 4_000_000);
        let seq: Vec<f64> = laps
            .iter()
            .enumerate()
            .map(|(i, &l)| (l as f64).ln() / (i + 1) as f64)
            .collect();
        // slope of log lap_n over the tail half; robust to the prefactor
        let half = laps.len() / 2;
        let xs: Vec<f64> = (half..laps.len()).map(|i| (i + 1) as f64).collect();
        let ys: Vec<f64> = laps[half..].iter().map(|&l| (l as f64).ln()).collect();
        let fit = numerics::linear_fit(&xs, &ys)
            .ok_or_else(|| Error::Convergence {
                context: "entropy fit".into(),
                partial: seq.clone(),
            })?;
        Ok(EntropyEstimate {
            value: fit.slope,
            sequence: seq,
            truncated,
        })
    }

    /// Derivative growth along critical orbits with exponential and
    /// polynomial model fits. Turning points of non-smooth families are
    /// included as critical points so the tent oracle is covered.
    pub fn growth_diagnostic(&self, n_max: usize) -> Result<GrowthReport> {
        if n_max < 10 {
            return Err(Error::Precondition("growth diagnostic needs n_max >= 10".into()));
        }
        let report = self.critical_report(40);
        let mut seeds: Vec<f64> = report.points.iter().map(|c| c.position).collect();
        seeds.extend(&report.turning_points);
        if seeds.is_empty() {
            return Err(Error::Precondition("map has no critical or turning points".into()));
        }
        let all_crit = seeds.clone();
        let entries = seeds
            .into_iter()
            .map(|c| {
                let mut series = Vec::with_capacity(n_max);
                let mut x = self.eval_unchecked(c);
                let mut acc = 1.0f64;
                let mut preperiodic = false;
                let mut seen = vec![x];
                for _ in 0..n_max {
                    acc *= self.derivative_unchecked(x).abs();
                    series.push(acc);
                    x = self.eval_unchecked(x).clamp(0.0, 1.0);
                    if all_crit.iter().any(|&cc| (x - cc).abs() < ORBIT_TOL)
                        || seen.iter().any(|&s| (x - s).abs() < ORBIT_TOL)
                    {
                        preperiodic = true;
                    }
                    seen.push(x);
                }
                let ns: Vec<f64> = (1..=series.len()).map(|n| n as f64).collect();
                let logs: Vec<f64> = series.iter().map(|v| v.max(1e-300).ln()).collect();
                let exp_fit = numerics::linear_fit(&ns, &logs);
                let log_ns: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
                let poly_fit = numerics::linear_fit(&log_ns, &logs);
                let regime = match (exp_fit, poly_fit) {
                    (Some(e), Some(p)) => {
                        if e.rms < 0.15 && e.slope > 0.01 && e.rms <= p.rms {
                            Regime::Exponential { beta: e.slope, c: e.intercept.exp() }
                        } else if p.rms < 0.25 && p.slope > 0.0 {
                            Regime::Polynomial { exponent: p.slope, c: p.intercept.exp() }
                        } else {
                            Regime::Inconclusive
                        }
                    }
                    _ => Regime::Inconclusive,
                };
                let fit_quality = match (&regime, exp_fit, poly_fit) {
                    (Regime::Exponential { .. }, Some(e), _) => e.rms,
                    (Regime::Polynomial { .. }, _, Some(p)) => p.rms,
                    _ => f64::NAN,
                };
                GrowthEntry {
                    critical_point: c,
                    series,
                    regime,
                    fit_quality,
                    preperiodic_flag: preperiodic,
                }
            })
            .collect();
        Ok(GrowthReport { entries })
    }

    /// Heuristic class-membership report: attracting/parabolic cycle scan up
    /// to period 8, covering (transitivity) check on a coarse interval grid,
    /// critical-orbit disjointness up to `n_max`, and the sampled sign of the
    /// Schwarzian derivative. Reported, never enforced.
    pub fn class_f_report(&self, n_max: usize) -> ClassFReport {
        let mut attracting = Vec::new();
        let mut parabolic = Vec::new();
        for period in 1..=8usize {
            for p in self.periodic_points(period) {
                let mut mult = 1.0f64;
                let mut y = p;
                for _ in 0..period {
                    mult *= self.derivative_unchecked(y);
                    y = self.eval_unchecked(y).clamp(0.0, 1.0);
                }
                let m = mult.abs();
                if m < 1.0 - 1e-6 {
                    attracting.push((p, period, m));
                } else if (m - 1.0).abs() <= 1e-6 {
                    parabolic.push((p, period, m));
                }
            }
        }
        // covering check against the dynamical core: maps like the quadratic
        // family never cover all of [0,1], so covering is asked of the
        // invariant interval spanned by the critical/turning values
        let cuts = self.cut_points();
        let core = self.core_interval();
        let mut transitive = true;
        for k in 0..8 {
            let j0 = core.a + core.len() * k as f64 / 8.0;
            let mut pieces = vec![Iv::new(j0, j0 + core.len() / 8.0)];
            let mut covered = false;
            for _ in 0..60 {
                let mut lo = 1.0f64;
                let mut hi = 0.0f64;
                for p in &pieces {
                    for sub in split_at_cuts(*p, &cuts) {
                        let iv = Iv::new(
                            self.eval_unchecked(sub.a).clamp(0.0, 1.0),
                            self.eval_unchecked(sub.b).clamp(0.0, 1.0),
                        );
                        lo = lo.min(iv.a);
                        hi = hi.max(iv.b);
                    }
                }
                // merge to the bounding interval: enough for a heuristic
                pieces = vec![Iv::new(lo, hi)];
                if lo < core.a + 1e-6 && hi > core.b - 1e-6 {
                    covered = true;
                    break;
                }
            }
            if !covered {
                transitive = false;
                break;
            }
        }
        // condition d): critical orbits pairwise disjoint up to n_max
        let crit = self.critical_report(30);
        let mut seeds: Vec<f64> = crit.points.iter().map(|c| c.position).collect();
        seeds.extend(&crit.turning_points);
        let orbits: Vec<Vec<f64>> = seeds.iter().map(|&c| self.orbit(self.eval_unchecked(c), n_max)).collect();
        let mut orbits_disjoint = true;
        for (i, oi) in orbits.iter().enumerate() {
            for (j, oj) in orbits.iter().enumerate() {
                for (n, &a) in oi.iter().enumerate() {
                    for (m, &b) in oj.iter().enumerate() {
                        if (i != j || n != m) && (a - b).abs() < ORBIT_TOL {
                            orbits_disjoint = false;
                        }
                    }
                }
            }
        }
        // sampled Schwarzian sign (smooth families only)
        let mut neg = 0usize;
        let mut tot = 0usize;
        if self.family.is_smooth() {
            for b in &self.branches {
                for x in numerics::chebyshev_points(b.interval.a, b.interval.b, 33) {
                    let d1 = b.horner_deriv(x);
                    if d1.abs() < 1e-8 {
                        continue;
                    }
                    let d2 = b.horner_deriv2(x);
                    let d3 = b.horner_deriv3(x);
                    let s = d3 / d1 - 1.5 * (d2 / d1) * (d2 / d1);
                    tot += 1;
                    if s < 0.0 {
                        neg += 1;
                    }
                }
            }
        }
        ClassFReport {
            attracting_cycles: attracting,
            parabolic_cycles: parabolic,
            transitive_heuristic: transitive,
            critical_orbits_disjoint: orbits_disjoint,
            schwarzian_negative_fraction: if tot > 0 { Some(neg as f64 / tot as f64) } else { None },
        }
    }

    /// The invariant interval spanned by the forward images of the fold
    /// values: `[min f^2(c-ish), max f(c-ish)]` over critical and turning
    /// points, falling back to `[0, 1]` for full-branch maps.
    pub fn core_interval(&self) -> Iv {
        let rep = self.critical_report(20);
        let mut folds: Vec<f64> = rep.points.iter().map(|p| p.position).collect();
        folds.extend(&rep.turning_points);
        if folds.is_empty() {
            return Iv::new(0.0, 1.0);
        }
        let mut hi = 0.0f64;
        let mut lo = 1.0f64;
        for &c in &folds {
            let v1 = self.eval_unchecked(c).clamp(0.0, 1.0);
            let v2 = self.eval_unchecked(v1).clamp(0.0, 1.0);
            hi = hi.max(v1);
            lo = lo.min(v2.min(v1));
        }
        if hi > 1.0 - 1e-9 {
            return Iv::new(0.0, 1.0);
        }
        Iv::new(lo, hi)
    }

    /// Fixed points of `f^period` located by sign change of `f^p(x) - x` on a
    /// grid, refined by bisection.
    fn periodic_points(&self, period: usize) -> Vec<f64> {
        let iter = |x: f64| {
            let mut y = x;
            for _ in 0..period {
                y = self.eval_unchecked(y).clamp(0.0, 1.0);
            }
            y - x
        };
        let grid = 512;
        let mut roots: Vec<f64> = Vec::new();
        let mut prev_x = 0.0;
        let mut prev_v = iter(0.0);
        for k in 1..=grid {
            let x = k as f64 / grid as f64;
            let v = iter(x);
            if prev_v == 0.0 {
                roots.push(prev_x);
            } else if prev_v * v < 0.0 {
                roots.push(numerics::bisect_monotone(&iter, prev_x, x, 0.0, 1e-12));
            }
            prev_x = x;
            prev_v = v;
        }
        roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        roots
    }
}

/// Split an interval at the cut points lying strictly inside it.
pub fn split_at_cuts(iv: Iv, cuts: &[f64]) -> Vec<Iv> {
    let mut pieces = Vec::with_capacity(2);
    let mut lo = iv.a;
    for &c in cuts {
        if c > lo + 1e-15 && c < iv.b - 1e-15 {
            pieces.push(Iv::new(lo, c));
            lo = c;
        }
    }
    pieces.push(Iv::new(lo, iv.b));
    pieces
}

/// A non-flat critical point with fitted order and one-sided local expansion
/// coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub position: f64,
    /// Fitted critical order `ell_c`; the smooth theory needs `1 < ell < inf`.
    pub order: f64,
    pub side_coefficients: (f64, f64),
}

/// Critical points plus turning-point annotations for non-smooth families.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalReport {
    pub points: Vec<CriticalPoint>,
    pub turning_points: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    /// `(1/n) log lap(f^n)` for each computed depth.
    pub sequence: Vec<f64>,
    /// Lap counting hit the piece cap before `n_max`.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Regime {
    Exponential { beta: f64, c: f64 },
    Polynomial { exponent: f64, c: f64 },
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthEntry {
    pub critical_point: f64,
    /// `|Df^n(f(c))|` for `n = 1..=n_max`.
    pub series: Vec<f64>,
    pub regime: Regime,
    pub fit_quality: f64,
    /// Critical orbit revisits a previous point or another critical point
    /// within tolerance: condition d) fails.
    pub preperiodic_flag: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthReport {
    pub entries: Vec<GrowthEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassFReport {
    pub attracting_cycles: Vec<(f64, usize, f64)>,
    pub parabolic_cycles: Vec<(f64, usize, f64)>,
    pub transitive_heuristic: bool,
    pub critical_orbits_disjoint: bool,
    /// Fraction of sample points with negative Schwarzian derivative; `None`
    /// for non-smooth families. Which smoothness hypothesis the user intends
    /// is not decided here.
    pub schwarzian_negative_fraction: Option<f64>,
}

// ---------------------------------------------------------------------------
// Potentials
// ---------------------------------------------------------------------------

/// Potential kinds: Hölder data (piecewise-linear table or per-branch
/// constants), the geometric family `-t log|Df|`, constants, and the
/// combination `-t log|Df| + q phi` used by the temperature solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum PotentialKind {
    Constant { a: f64 },
    Geometric { t: f64 },
    /// Locally constant on branches: `values[i]` on branch `i`.
    BranchConstants { values: Vec<f64> },
    /// Piecewise-linear interpolation through `(xs, values)`.
    Table { xs: Vec<f64>, values: Vec<f64> },
    Combination { t: f64, q: f64, base: Box<Potential> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Potential {
    pub kind: PotentialKind,
    /// Constant subtracted from the raw values so that the estimated pressure
    /// of the result is zero.
    pub normalization_shift: f64,
}

impl Potential {
    pub fn constant(a: f64) -> Self {
        Potential { kind: PotentialKind::Constant { a }, normalization_shift: 0.0 }
    }

    pub fn geometric(t: f64) -> Self {
        Potential { kind: PotentialKind::Geometric { t }, normalization_shift: 0.0 }
    }

    /// `log p` on the first branch, `log (1-p)` on the second.
    pub fn bernoulli(p: f64) -> Self {
        Potential {
            kind: PotentialKind::BranchConstants { values: vec![p.ln(), (1.0 - p).ln()] },
            normalization_shift: 0.0,
        }
    }

    pub fn branch_constants(values: Vec<f64>) -> Self {
        Potential { kind: PotentialKind::BranchConstants { values }, normalization_shift: 0.0 }
    }

    pub fn table(xs: Vec<f64>, values: Vec<f64>) -> Self {
        Potential { kind: PotentialKind::Table { xs, values }, normalization_shift: 0.0 }
    }

    /// `psi_q = -t log|Df| + q phi` built over a base potential.
    pub fn combination(t: f64, q: f64, base: Potential) -> Self {
        Potential {
            kind: PotentialKind::Combination { t, q, base: Box::new(base) },
            normalization_shift: 0.0,
        }
    }

    /// Evaluate at `x`; returns `-inf` for the geometric kind at critical
    /// points (`log 0`).
    pub fn eval(&self, map: &IntervalMap, x: f64) -> f64 {
        let raw = match &self.kind {
            PotentialKind::Constant { a } => *a,
            PotentialKind::Geometric { t } => {
                let d = map.derivative_unchecked(x).abs();
                if d == 0.0 {
                    return f64::NEG_INFINITY;
                }
                -t * d.ln()
            }
            PotentialKind::BranchConstants { values } => {
                let i = map.branch_index(x).min(values.len() - 1);
                values[i]
            }
            PotentialKind::Table { xs, values } => interp_linear(xs, values, x),
            PotentialKind::Combination { t, q, base } => {
                let d = map.derivative_unchecked(x).abs();
                if d == 0.0 && *t != 0.0 {
                    return if *t > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
                }
                let g = if *t == 0.0 { 0.0 } else { -t * d.ln() };
                g + q * base.eval(map, x)
            }
        };
        raw - self.normalization_shift
    }

    /// Whether the potential is constant on each map branch (evaluation does
    /// not vary within a branch), which makes induced word sums exact.
    pub fn is_locally_constant(&self, map: &IntervalMap) -> bool {
        match &self.kind {
            PotentialKind::Constant { .. } => true,
            PotentialKind::BranchConstants { .. } => true,
            PotentialKind::Geometric { .. } | PotentialKind::Combination { .. } => {
                // constant-slope branches only
                map.branches().iter().all(|b| b.coeffs.len() <= 2)
                    && match &self.kind {
                        PotentialKind::Combination { base, .. } => base.is_locally_constant(map),
                        _ => true,
                    }
            }
            PotentialKind::Table { .. } => false,
        }
    }

    /// Sampled `sup` and `inf` over `[0,1]`, avoiding junctions.
    pub fn sampled_range(&self, map: &IntervalMap, per_branch: usize) -> (f64, f64) {
        let mut sup = f64::NEG_INFINITY;
        let mut inf = f64::INFINITY;
        for b in map.branches() {
            for x in numerics::chebyshev_points(b.interval.a, b.interval.b, per_branch) {
                let v = self.eval(map, x);
                if v.is_finite() {
                    sup = sup.max(v);
                    inf = inf.min(v);
                }
            }
        }
        (sup, inf)
    }
}

fn interp_linear(xs: &[f64], values: &[f64], x: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    if x <= xs[0] {
        return values[0];
    }
    if x >= xs[xs.len() - 1] {
        return values[values.len() - 1];
    }
    let i = xs.partition_point(|&p| p <= x).saturating_sub(1);
    let (x0, x1) = (xs[i], xs[i + 1]);
    let w = (x - x0) / (x1 - x0);
    values[i] * (1.0 - w) + values[i + 1] * w
}

/// Result of the range condition `sup phi - inf phi < h_top`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RangeCheck {
    pub ok: bool,
    pub margin: f64,
    pub sup: f64,
    pub inf: f64,
    pub h_top: f64,
}

pub fn check_range_condition(map: &IntervalMap, phi: &Potential, h_top: f64) -> RangeCheck {
    let (sup, inf) = phi.sampled_range(map, 65);
    let osc = sup - inf;
    RangeCheck { ok: osc < h_top, margin: h_top - osc, sup, inf, h_top }
}

/// Configuration for the pressure estimator used during normalization.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NormalizeConfig {
    pub depth: usize,
    pub tolerance: f64,
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        NormalizeConfig { depth: 12, tolerance: 1e-4 }
    }
}

/// Shift the potential so its estimated pressure is zero. Idempotent within
/// estimator tolerance.
pub fn normalize_potential(
    map: &IntervalMap,
    phi: &Potential,
    cfg: NormalizeConfig,
) -> Result<Potential> {
    match phi.kind {
        PotentialKind::Constant { .. } | PotentialKind::BranchConstants { .. }
        | PotentialKind::Table { .. } => {}
        _ => {
            return Err(Error::Precondition(
                "normalize_potential expects a holder or constant potential".into(),
            ))
        }
    }
    let est = crate::thermo::pressure_original(map, phi, cfg.depth)?;
    // slow O(1/n) cylinder-sum drift is acceptable when the Aitken tail has
    // stabilized to the requested tolerance
    let converged = est.converged || {
        let s = &est.sequence;
        let n = s.len();
        n >= 4
            && match (
                crate::numerics::aitken(&s[..n]),
                crate::numerics::aitken(&s[..n - 1]),
            ) {
                (Some(a), Some(b)) => (a - b).abs() < cfg.tolerance,
                _ => false,
            }
    };
    if !converged {
        return Err(Error::Convergence {
            context: "pressure estimate during normalization".into(),
            partial: est.sequence,
        });
    }
    let mut out = phi.clone();
    out.normalization_shift += est.value;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_known_values() {
        let q4 = IntervalMap::quadratic(4.0);
        assert!((q4.eval(0.5).unwrap() - 1.0).abs() < 1e-15);
        let tent = IntervalMap::tent(2.0);
        assert!((tent.eval(0.75).unwrap() - 0.5).abs() < 1e-15);
        let q39 = IntervalMap::quadratic(3.9);
        assert!((q39.eval(0.5).unwrap() - 0.975).abs() < 1e-15);
        assert!(q4.eval(1.5).is_err());
    }

    #[test]
    fn derivative_values_and_junction() {
        let q4 = IntervalMap::quadratic(4.0);
        assert_eq!(q4.derivative(0.5).unwrap(), 0.0);
        let tent = IntervalMap::tent(2.0);
        assert!((tent.derivative(0.25).unwrap() - 2.0).abs() < 1e-15);
        match tent.derivative(0.5) {
            Err(Error::Junction { left, right, .. }) => {
                assert!((left - 2.0).abs() < 1e-12 && (right + 2.0).abs() < 1e-12);
            }
            other => panic!("expected junction error, got {other:?}"),
        }
        let q39 = IntervalMap::quadratic(3.9);
        assert!((q39.derivative(0.25).unwrap() - 1.95).abs() < 1e-12);
    }

    #[test]
    fn derivative_sign_matches_orientation() {
        for map in [IntervalMap::tent(2.0), IntervalMap::quadratic(3.9)] {
            for b in map.branches() {
                let x = b.interval.mid();
                let d = map.derivative(x).unwrap();
                match b.orientation {
                    Orientation::Increasing => assert!(d > 0.0),
                    Orientation::Decreasing => assert!(d < 0.0),
                }
            }
        }
    }

    #[test]
    fn critical_points_quadratic_and_tent() {
        let q39 = IntervalMap::quadratic(3.9);
        let rep = q39.critical_report(40);
        assert_eq!(rep.points.len(), 1);
        assert!((rep.points[0].position - 0.5).abs() < 1e-11);
        assert!((rep.points[0].order - 2.0).abs() < 0.05);
        assert!(rep.turning_points.is_empty());

        let tent = IntervalMap::tent(2.0);
        let rep = tent.critical_report(40);
        assert!(rep.points.is_empty());
        assert_eq!(rep.turning_points, vec![0.5]);
    }

    #[test]
    fn critical_points_two_hump_cubic() {
        // bimodal cubic with folds at exactly 1/3 and 2/3:
        // f' = k (x - 1/3)(x - 2/3), so f = k (x^3/3 - x^2/2 + 2x/9)
        let k = 5.0;
        let coeffs = vec![0.0, 2.0 * k / 9.0, -k / 2.0, k / 3.0];
        let map = IntervalMap::from_branches(
            vec![
                (Iv::new(0.0, 1.0 / 3.0), coeffs.clone()),
                (Iv::new(1.0 / 3.0, 2.0 / 3.0), coeffs.clone()),
                (Iv::new(2.0 / 3.0, 1.0), coeffs.clone()),
            ],
            FamilyTag::Custom,
        )
        .unwrap();
        let rep = map.critical_report(40);
        assert_eq!(rep.points.len(), 2);
        assert!((rep.points[0].position - 1.0 / 3.0).abs() < 1e-9);
        assert!((rep.points[1].position - 2.0 / 3.0).abs() < 1e-9);
        for p in &rep.points {
            assert!((p.order - 2.0).abs() < 0.05, "order {}", p.order);
        }
    }

    #[test]
    fn entropy_tent_exact_and_quadratic() {
        let tent = IntervalMap::tent(2.0);
        let est = tent.estimate_topological_entropy(12).unwrap();
        assert!((est.value - 2f64.ln()).abs() < 1e-9);
        for (i, s) in est.sequence.iter().enumerate() {
            assert!((s - 2f64.ln()).abs() < 1e-12, "lap seq at {i}");
        }
        let q4 = IntervalMap::quadratic(4.0);
        let est = q4.estimate_topological_entropy(12).unwrap();
        assert!((est.value - 2f64.ln()).abs() < 1e-3);
        let q35 = IntervalMap::quadratic(3.5);
        let est = q35.estimate_topological_entropy(14).unwrap();
        assert!(est.value < 2f64.ln() - 0.05);
        let cls = q35.class_f_report(30);
        assert!(!cls.attracting_cycles.is_empty(), "lambda=3.5 has an attracting cycle");
    }

    #[test]
    fn lap_counts_submultiplicative() {
        let q39 = IntervalMap::quadratic(3.9);
        let (laps, _) = q39.lap_counts(10, 1_000_000);
        for m in 1..laps.len() {
            for n in 1..laps.len() - m {
                assert!(laps[m + n - 1] <= laps[m - 1] * laps[n - 1]);
            }
        }
    }

    #[test]
    fn entropy_fit_within_upper_bracket() {
        // submultiplicativity makes (1/n) log lap_n a sequence of upper
        // estimates; the fitted rate must sit below every one of them
        for map in [IntervalMap::quadratic(3.9), IntervalMap::tent(2.0)] {
            let est = map.estimate_topological_entropy(14).unwrap();
            for (i, s) in est.sequence.iter().enumerate() {
                assert!(
                    est.value <= s + 1e-9,
                    "fit {} above upper estimate {} at depth {}",
                    est.value,
                    s,
                    i + 1
                );
            }
        }
    }

    #[test]
    fn growth_tent_bit_exact_and_q4_preperiodic() {
        let tent = IntervalMap::tent(2.0);
        let rep = tent.growth_diagnostic(20).unwrap();
        let e = &rep.entries[0];
        for (n, v) in e.series.iter().enumerate() {
            assert_eq!(*v, 2f64.powi(n as i32 + 1));
        }
        assert!(matches!(e.regime, Regime::Exponential { .. }));

        let q4 = IntervalMap::quadratic(4.0);
        let rep = q4.growth_diagnostic(15).unwrap();
        assert!(rep.entries[0].preperiodic_flag);

        let q39 = IntervalMap::quadratic(3.9);
        let rep = q39.growth_diagnostic(30).unwrap();
        assert!(!rep.entries[0].series.is_empty());
    }

    #[test]
    fn range_condition_examples() {
        let tent = IntervalMap::tent(2.0);
        let h = 2f64.ln();
        let c = check_range_condition(&tent, &Potential::constant(-h), h);
        assert!(c.ok);
        assert!((c.margin - h).abs() < 1e-12);
        let b3 = check_range_condition(&tent, &Potential::bernoulli(0.3), h);
        assert!(!b3.ok, "log(0.7/0.3) = 0.847 exceeds log 2");
        let b4 = check_range_condition(&tent, &Potential::bernoulli(0.4), h);
        assert!(b4.ok);
    }

    #[test]
    fn schwarzian_negative_for_quadratic() {
        let q39 = IntervalMap::quadratic(3.9);
        let rep = q39.class_f_report(20);
        assert_eq!(rep.schwarzian_negative_fraction, Some(1.0));
        assert!(rep.transitive_heuristic);
        assert!(rep.attracting_cycles.is_empty());
    }
}
