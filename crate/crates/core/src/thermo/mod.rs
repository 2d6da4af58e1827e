//! Pressure estimation, the temperature function `T(q)`, Gibbs-measure
//! approximation on inducing schemes, and conformal-measure machinery.

mod conformal;
mod gibbs;
mod pressure;
mod tq;

pub use conformal::{
    conformality_residual, density_ratio_check, propagate_conformal_tower, variation_series,
    CellStat, ConformalApprox, ConformalSupport, TowerConformal, VariationSeries,
};
pub use gibbs::{gibbs_weights, project_measure, GibbsApprox, GibbsWord, ProjectedMeasure};
pub use pressure::{
    cylinder_interval, pressure_induced, pressure_original, PressureEstimate, PressureMethod,
    WordEntry, WordTable,
};
pub use tq::{
    pb_diagnostic, pb_diagnostic_from_masses, solve_t, tq_curve, PbDiagnostic, PbVerdict,
    SolveConfig, SolveDiagnostics, TqCurve, TqSample,
};

/// Birkhoff sums `(sum log|Df|, sum phi)` along one inducing block; shared
/// with the pointwise estimators.
pub fn word_sums_for(
    map: &crate::map_model::IntervalMap,
    itinerary: &[u32],
    x: f64,
    phi: &crate::map_model::Potential,
) -> (f64, f64) {
    pressure::block_sums(map, itinerary, x, phi)
}
