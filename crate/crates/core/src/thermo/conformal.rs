//! Conformal-measure machinery: propagation of a base conformal measure
//! through the extension along inducing blocks with density factor
//! `e^{-S_k phi}`, projection to the interval through a section where the
//! projection is bijective, conformality residuals, density-ratio brackets
//! and variation series.

use crate::error::Error;
use crate::hofbauer::TowerGraph;
use crate::inducing::InducingScheme;
use crate::map_model::{IntervalMap, Potential};
use crate::numerics::{self, Iv};
use crate::thermo::gibbs::GibbsApprox;
use crate::thermo::pressure::block_sums;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Where a conformal approximation lives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ConformalSupport {
    /// Masses on word cylinders of a scheme base.
    SchemeWords,
    /// Masses on a uniform grid over `[0, 1]`.
    Projected,
}

/// A measure approximation with conformality bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConformalApprox {
    pub support: ConformalSupport,
    /// `(interval, mass)` pairs for scheme words; cell masses for projected.
    pub atoms: Vec<(Iv, f64)>,
    /// Largest conformality defect observed on the test cylinders.
    pub residual: Option<f64>,
}

impl ConformalApprox {
    /// Base conformal measure from Gibbs word weights (for induced full
    /// shifts with vanishing pressure the two coincide up to the bracket).
    pub fn from_gibbs(gibbs: &GibbsApprox) -> Self {
        ConformalApprox {
            support: ConformalSupport::SchemeWords,
            atoms: gibbs.words.iter().map(|w| (w.interval, w.weight)).collect(),
            residual: None,
        }
    }

    /// Lebesgue measure on the scheme base at word resolution.
    pub fn lebesgue_on_base(scheme: &InducingScheme, gibbs: &GibbsApprox) -> Self {
        let total: f64 = scheme.base.len();
        ConformalApprox {
            support: ConformalSupport::SchemeWords,
            atoms: gibbs
                .words
                .iter()
                .map(|w| (w.interval, w.interval.len() / total))
                .collect(),
            residual: None,
        }
    }
}

/// Per-cell statistics of the propagated measure inside one tower domain.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct CellStat {
    pub mass: f64,
    pub covered: f64,
    pub min_density: f64,
    pub max_density: f64,
}

/// The measure propagated over the truncated extension, plus its projection
/// through a section.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TowerConformal {
    pub cells: usize,
    /// Per domain id: global grid cell -> accumulated statistics.
    pub domains: Vec<BTreeMap<usize, CellStat>>,
    /// Normalized projection to `[0, 1]` through the lowest-level section.
    pub projected: Vec<f64>,
    /// Worst relative disagreement between overlapping block densities.
    pub density_spread: f64,
    /// Conformality residual `|m(f(A)) - int_A e^{-phi} dm|` maximised over
    /// the test cylinders.
    pub residual: f64,
    /// Mass lost to the truncation during propagation.
    pub mass_deficit: f64,
}

impl TowerConformal {
    pub fn projected_measure(&self) -> crate::thermo::gibbs::ProjectedMeasure {
        crate::thermo::gibbs::ProjectedMeasure {
            cells: self.cells,
            masses: self.projected.clone(),
            int_tau: f64::NAN,
            h_induced: f64::NAN,
            h_mu: f64::NAN,
            lambda_mu: f64::NAN,
            int_phi_mu: f64::NAN,
            mass_deficit: self.mass_deficit,
        }
    }
}

/// Push the base conformal measure along every inducing block
/// `f^k(X_i), 0 <= k < tau_i`, weighting by `e^{-S_k phi}`, then project to
/// the interval through the lowest-level covering domain and normalize.
pub fn propagate_conformal_tower(
    tower: &TowerGraph,
    scheme: &InducingScheme,
    map: &IntervalMap,
    m_base: &ConformalApprox,
    phi: &Potential,
    cells: usize,
    test_depth: usize,
) -> Result<TowerConformal> {
    if scheme.branches.is_empty() || m_base.atoms.is_empty() {
        return Err(Error::EmptyScheme("conformal propagation needs a nonempty scheme".into()));
    }
    let mut domains: Vec<BTreeMap<usize, CellStat>> = vec![BTreeMap::new(); tower.domains.len()];
    let g = cells as f64;
    let mut mass_deficit = 0.0f64;
    // atoms are word cylinders inside the base; each belongs to one branch
    for &(iv, mass) in &m_base.atoms {
        if mass <= 0.0 || iv.len() <= 0.0 {
            continue;
        }
        let Some(bi) = scheme.branch_at(iv.mid()) else {
            mass_deficit += mass;
            continue;
        };
        let branch = &scheme.branches[bi];
        let mut cur = iv;
        let x0 = iv.mid();
        for k in 0..branch.tau {
            // density factor e^{-S_k phi} at the block's base point
            let factor = if k == 0 {
                1.0
            } else {
                let (_, s_k) = block_sums(map, &branch.map_itinerary[..k], x0, phi);
                (-s_k).exp()
            };
            let block_mass = mass * factor;
            let dom = branch.tower_itinerary[k];
            if dom >= domains.len() {
                mass_deficit += block_mass;
                continue;
            }
            let density = block_mass / cur.len();
            let lo = (cur.a.max(0.0) * g).floor() as usize;
            let hi = ((cur.b.min(1.0) * g).ceil() as usize).min(cells);
            for c in lo..hi {
                let cell = Iv::new(c as f64 / g, (c + 1) as f64 / g);
                if let Some(ov) = cell.intersect(&cur) {
                    let stat = domains[dom].entry(c).or_insert(CellStat {
                        mass: 0.0,
                        covered: 0.0,
                        min_density: f64::INFINITY,
                        max_density: f64::NEG_INFINITY,
                    });
                    stat.mass += density * ov.len();
                    stat.covered += ov.len();
                    stat.min_density = stat.min_density.min(density);
                    stat.max_density = stat.max_density.max(density);
                }
            }
            if k + 1 < branch.tau {
                let bmap = branch.map_itinerary[k] as usize;
                cur = Iv::new(
                    map.eval_on_branch(bmap, cur.a).clamp(0.0, 1.0),
                    map.eval_on_branch(bmap, cur.b).clamp(0.0, 1.0),
                );
            }
        }
    }
    // density disagreement between overlapping blocks
    let mut spread = 0.0f64;
    for dm in &domains {
        for stat in dm.values() {
            if stat.max_density > 0.0 && stat.min_density.is_finite() {
                let avg = stat.mass / stat.covered.max(1e-300);
                if avg > 0.0 {
                    spread = spread.max((stat.max_density - stat.min_density) / avg);
                }
            }
        }
    }
    // section: per cell take the lowest-level domain with coverage there
    let mut order: Vec<usize> = (0..tower.domains.len()).collect();
    order.sort_by_key(|&d| (tower.domains[d].level, d));
    let mut projected = vec![0.0f64; cells];
    for (c, slot) in projected.iter_mut().enumerate() {
        for &d in &order {
            if let Some(stat) = domains[d].get(&c) {
                // length-weighted mean density over the covering blocks,
                // applied to the covered portion of the cell
                let dom_iv = tower.domains[d].interval;
                let cell = Iv::new(c as f64 / g, (c + 1) as f64 / g);
                let frac = cell.intersect(&dom_iv).map_or(0.0, |o| o.len());
                let density = stat.mass / stat.covered.max(1e-300);
                *slot = density * frac.min(stat.covered);
                break;
            }
        }
    }
    let total = numerics::comp_sum(projected.iter().copied());
    if total <= 0.0 {
        return Err(Error::EmptyScheme("propagated measure carries no mass".into()));
    }
    for p in projected.iter_mut() {
        *p /= total;
    }
    // sigma-conformality residual on the test cylinders
    let measure = crate::thermo::gibbs::ProjectedMeasure {
        cells,
        masses: projected.clone(),
        int_tau: f64::NAN,
        h_induced: f64::NAN,
        h_mu: f64::NAN,
        lambda_mu: f64::NAN,
        int_phi_mu: f64::NAN,
        mass_deficit,
    };
    let residual = conformality_residual(map, phi, &measure, test_depth)?;
    Ok(TowerConformal {
        cells,
        domains,
        projected,
        density_spread: spread,
        residual,
        mass_deficit,
    })
}

/// Max over cylinders of depth `1..=test_depth` of
/// `|m(f(A)) - int_A e^{-phi} dm|`.
pub fn conformality_residual(
    map: &IntervalMap,
    phi: &Potential,
    m: &crate::thermo::gibbs::ProjectedMeasure,
    test_depth: usize,
) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut part = crate::cylinders::refine_partition(map, 0);
    for _ in 1..=test_depth {
        part = crate::cylinders::refine_once(map, &part);
        for c in &part.cylinders {
            let a = c.interval;
            // f is monotone on any cylinder of depth >= 1
            let b0 = map.branch_index(a.mid());
            let fa = map.eval_on_branch(b0, a.a).clamp(0.0, 1.0);
            let fb = map.eval_on_branch(b0, a.b).clamp(0.0, 1.0);
            let image_mass = m.mass_of(Iv::new(fa, fb));
            // integrate e^{-phi} against m over A by cell midpoints
            let g = m.cells as f64;
            let lo = (a.a.max(0.0) * g).floor() as usize;
            let hi = ((a.b.min(1.0) * g).ceil() as usize).min(m.cells);
            let mut integral = 0.0f64;
            for cell_idx in lo..hi {
                let cell = Iv::new(cell_idx as f64 / g, (cell_idx + 1) as f64 / g);
                if let Some(ov) = cell.intersect(&a) {
                    let x = ov.mid();
                    let v = phi.eval(map, x);
                    if v.is_finite() {
                        integral += m.masses[cell_idx] * (ov.len() / cell.len()) * (-v).exp();
                    }
                }
            }
            worst = worst.max((image_mass - integral).abs());
        }
    }
    Ok(worst)
}

/// Per-cell ratio extremes between two grid measures over cells where both
/// carry mass above the floor.
pub fn density_ratio_check(
    a: &crate::thermo::gibbs::ProjectedMeasure,
    b: &crate::thermo::gibbs::ProjectedMeasure,
    floor: f64,
) -> Result<(f64, f64)> {
    if a.cells != b.cells {
        return Err(Error::Precondition("grids differ".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&ma, &mb) in a.masses.iter().zip(&b.masses) {
        if ma > floor && mb > floor {
            let r = ma / mb;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    if !lo.is_finite() {
        return Err(Error::DisjointSupports);
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariationSeries {
    /// `V_n` over induced `n`-cylinders by sampled oscillation.
    pub v: Vec<f64>,
    /// Fitted exponential decay rate of the nonzero tail, if any.
    pub decay_rate: Option<f64>,
    /// Partial sum: evidence for summable variations.
    pub partial_sum: f64,
    /// All oscillations sat below sampling resolution.
    pub below_resolution: bool,
}

/// Oscillation of the induced potential over induced `n`-cylinders,
/// `n = 1..=depth`, with an exponential-decay fit.
pub fn variation_series(
    scheme: &InducingScheme,
    map: &IntervalMap,
    phi: &Potential,
    depth: usize,
) -> Result<VariationSeries> {
    if scheme.branches.is_empty() {
        return Err(Error::EmptyScheme("variation series needs branches".into()));
    }
    // enumerate induced cylinders by backward refinement, tracking, per word,
    // the interval and the first branch (whose induced potential we oscillate)
    struct W {
        interval: Iv,
        first: usize,
    }
    let mut v = Vec::with_capacity(depth);
    let mut frontier: Vec<W> = scheme
        .branches
        .iter()
        .enumerate()
        .map(|(i, b)| W { interval: b.domain, first: i })
        .collect();
    for _n in 1..=depth {
        let mut vn = 0.0f64;
        for w in &frontier {
            let b = &scheme.branches[w.first];
            let mut sup = f64::NEG_INFINITY;
            let mut inf = f64::INFINITY;
            for x in numerics::chebyshev_points(w.interval.a, w.interval.b, 9) {
                let (_, s) = block_sums(map, &b.map_itinerary, x, phi);
                sup = sup.max(s);
                inf = inf.min(s);
            }
            if sup.is_finite() && inf.is_finite() {
                vn = vn.max(sup - inf);
            }
        }
        v.push(vn);
        if v.len() == depth {
            break;
        }
        // refine by prepending a symbol: the new branch becomes the first
        // symbol, whose induced potential is the one oscillated
        let mut next = Vec::with_capacity(frontier.len() * scheme.branches.len());
        for w in &frontier {
            for (bi, b) in scheme.branches.iter().enumerate() {
                let xa = b.invert(map, w.interval.a);
                let xb = b.invert(map, w.interval.b);
                next.push(W { interval: Iv::new(xa, xb), first: bi });
            }
        }
        if next.len() > 100_000 {
            next.truncate(100_000);
        }
        frontier = next;
    }
    let below = v.iter().all(|&x| x < 1e-13);
    let pts: Vec<(f64, f64)> = v
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > 1e-300)
        .map(|(i, &x)| ((i + 1) as f64, x.ln()))
        .collect();
    let decay_rate = if pts.len() >= 3 {
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        numerics::linear_fit(&xs, &ys).map(|f| -f.slope)
    } else {
        None
    };
    Ok(VariationSeries {
        partial_sum: v.iter().sum(),
        v,
        decay_rate,
        below_resolution: below,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hofbauer::build_tower;
    use crate::inducing::build_scheme_type_a;
    use crate::thermo::gibbs::gibbs_weights;

    fn tent_setup(base: Iv, cap: usize) -> (IntervalMap, TowerGraph, InducingScheme) {
        let map = IntervalMap::tent(2.0);
        let tower = build_tower(&map, 5, 1e-9);
        let scheme = build_scheme_type_a(&tower, &map, 0, base, cap).unwrap();
        (map, tower, scheme)
    }

    #[test]
    fn lebesgue_conformal_for_geometric() {
        // complete scheme: conformality exact to rounding
        let (map, tower, scheme) = tent_setup(Iv::new(0.0, 1.0), 4);
        let phi = Potential::geometric(1.0);
        let g = gibbs_weights(&scheme, &map, &phi, 0.0, 1.0, 6).unwrap();
        let m_base = ConformalApprox::lebesgue_on_base(&scheme, &g);
        let tc =
            propagate_conformal_tower(&tower, &scheme, &map, &m_base, &phi, 4096, 8).unwrap();
        assert!(tc.residual < 1e-12, "residual {}", tc.residual);
        assert!(tc.density_spread < 1e-9, "overlapping blocks agree");
        for p in &tc.projected {
            assert!((p - 1.0 / 4096.0).abs() < 1e-12, "projected Lebesgue");
        }
    }

    #[test]
    fn truncated_scheme_residual_tracks_deficit() {
        // first-return scheme truncated at tau_cap: the conformality defect
        // is bounded by the missing return mass, not by rounding
        let (map, tower, scheme) = tent_setup(Iv::new(0.0, 0.5), 14);
        let phi = Potential::geometric(1.0);
        let g = gibbs_weights(&scheme, &map, &phi, 0.0, 1.0, 3).unwrap();
        let m_base = ConformalApprox::lebesgue_on_base(&scheme, &g);
        let tc =
            propagate_conformal_tower(&tower, &scheme, &map, &m_base, &phi, 4096, 6).unwrap();
        assert!(tc.density_spread < 1e-9, "overlapping blocks agree");
        let deficit = 1.0 - scheme.coverage;
        assert!(
            tc.residual < 1e3 * deficit.max(1e-12),
            "residual {} vs truncation deficit {}",
            tc.residual,
            deficit
        );
        assert!(tc.residual < 1e-3);
    }

    #[test]
    fn bernoulli_conformal_product_measure() {
        let (map, tower, scheme) = tent_setup(Iv::new(0.0, 1.0), 4);
        let phi = Potential::bernoulli(0.3);
        let g = gibbs_weights(&scheme, &map, &phi, 0.0, 1.0, 10).unwrap();
        let m_base = ConformalApprox::from_gibbs(&g);
        let tc =
            propagate_conformal_tower(&tower, &scheme, &map, &m_base, &phi, 4096, 6).unwrap();
        assert!(tc.residual < 1e-9, "residual {}", tc.residual);
    }

    #[test]
    fn empty_scheme_errors() {
        let (map, tower, scheme) = tent_setup(Iv::new(0.0, 1.0), 4);
        let empty = ConformalApprox { support: ConformalSupport::SchemeWords, atoms: vec![], residual: None };
        let res = propagate_conformal_tower(
            &tower,
            &scheme,
            &map,
            &empty,
            &Potential::geometric(1.0),
            256,
            4,
        );
        assert!(matches!(res, Err(Error::EmptyScheme(_))));
    }

    #[test]
    fn density_ratio_brackets() {
        let (map, _, scheme) = tent_setup(Iv::new(0.0, 1.0), 4);
        let lebesgue = {
            let g = gibbs_weights(&scheme, &map, &Potential::constant(0.0), 1.0, 0.0, 8).unwrap();
            crate::thermo::gibbs::project_measure(&scheme, &map, &g, 256).unwrap()
        };
        let bern = {
            let g = gibbs_weights(&scheme, &map, &Potential::bernoulli(0.3), 0.0, 1.0, 8).unwrap();
            crate::thermo::gibbs::project_measure(&scheme, &map, &g, 256).unwrap()
        };
        // identical measures bracket at [1, 1]
        let (lo, hi) = density_ratio_check(&lebesgue, &lebesgue, 1e-12).unwrap();
        assert!((lo - 1.0).abs() < 1e-9 && (hi - 1.0).abs() < 1e-9);
        // Lebesgue vs Bernoulli(0.3) on depth-8 cells: ratios (2p)^n wide
        let (lo, hi) = density_ratio_check(&lebesgue, &bern, 1e-12).unwrap();
        assert!(lo < 0.7f64, "min ratio {lo}");
        assert!(hi > 5.0, "max ratio {hi}");
        // and the bracket widens with depth
        let lebesgue4 = {
            let g = gibbs_weights(&scheme, &map, &Potential::constant(0.0), 1.0, 0.0, 4).unwrap();
            crate::thermo::gibbs::project_measure(&scheme, &map, &g, 16).unwrap()
        };
        let bern4 = {
            let g = gibbs_weights(&scheme, &map, &Potential::bernoulli(0.3), 0.0, 1.0, 4).unwrap();
            crate::thermo::gibbs::project_measure(&scheme, &map, &g, 16).unwrap()
        };
        let (lo4, hi4) = density_ratio_check(&lebesgue4, &bern4, 1e-12).unwrap();
        assert!(lo4 > lo && hi4 < hi, "negative control detects scaling");
    }

    #[test]
    fn variations_vanish_for_locally_constant() {
        let (map, _, scheme) = tent_setup(Iv::new(0.0, 0.5), 10);
        let vs = variation_series(&scheme, &map, &Potential::bernoulli(0.3), 3).unwrap();
        for x in &vs.v {
            assert!(*x < 1e-12);
        }
        assert!(vs.below_resolution);
        let vg = variation_series(&scheme, &map, &Potential::geometric(1.0), 3).unwrap();
        assert!(vg.below_resolution, "linear branches have constant log|DF|");
    }

    #[test]
    fn variations_decay_for_smooth_map() {
        let map = IntervalMap::quadratic(4.0);
        let tower = build_tower(&map, 5, 1e-9);
        let scheme = build_scheme_type_a(&tower, &map, 0, Iv::new(0.0, 1.0), 3).unwrap();
        let phi = Potential::table(
            vec![0.0, 0.25, 0.5, 0.75, 1.0],
            vec![0.0, 0.1, 0.05, -0.1, 0.0],
        );
        let vs = variation_series(&scheme, &map, &phi, 4).unwrap();
        assert!(!vs.below_resolution);
        assert!(vs.v[0] > 0.0);
        // oscillation shrinks as cylinders refine
        assert!(vs.v[3] < vs.v[0]);
    }
}
