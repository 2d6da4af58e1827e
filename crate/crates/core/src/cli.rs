//! Command-line orchestration: config ingestion, pipeline wiring and
//! emission of CSV/JSON/DOT artifacts. All floats are written with 12
//! significant digits so identical configs and seeds give identical bytes.

use crate::config::RunConfig;
use crate::error::Error;
use crate::hofbauer::{build_tower_with, TowerGraph};
use crate::inducing::{build_scheme_type_a, build_scheme_type_b, scheme_candidates, InducingScheme};
use crate::map_model::{check_range_condition, IntervalMap, Potential};
use crate::spectra::{
    dimension_spectrum, large_scale_visits, lyapunov_spectrum, pointwise_dimension,
    pointwise_lyapunov, tower_visit_frequency, SpectrumConfig,
};
use crate::thermo::{pressure_original, tq_curve, SolveConfig, TqCurve, WordTable};
use crate::Result;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "multifract", version, about = "thermodynamic formalism and multifractal spectra for interval maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output path (defaults to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker pool size for per-q sections.
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Map diagnostics: entropy, critical points, growth, class heuristics.
    MapInspect {
        #[command(flatten)]
        common: Common,
    },
    /// Emit the cylinder partition P_n as CSV.
    Cylinders {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        depth: usize,
    },
    /// Build the truncated extension; write DOT and census CSV.
    Tower {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        level_cap: Option<usize>,
        #[arg(long)]
        min_width: Option<f64>,
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long)]
        census: Option<PathBuf>,
    },
    /// Build an inducing scheme and serialize it as JSON.
    Induce {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "A|B")]
        r#type: Option<String>,
        #[arg(long, value_name = "DEPTH:INDEX")]
        base_cylinder: Option<String>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        tau_cap: Option<usize>,
    },
    /// One pressure evaluation of -t log|DF| + q phi.
    Pressure {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
        #[arg(long, allow_negative_numbers = true)]
        q: f64,
    },
    /// Temperature curve over a q grid (CSV: q, T, converged, pb, alpha).
    Tq {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        qmin: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        qmax: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Dimension or Lyapunov spectrum (CSV: q, T, alpha, DS, converged, degenerate).
    Spectrum {
        #[arg(value_name = "dimension|lyapunov")]
        kind: String,
        #[command(flatten)]
        common: Common,
        /// Also write the acip-proxy measure as JSON {grid, masses}.
        #[arg(long)]
        measure_out: Option<PathBuf>,
    },
    /// Pointwise dimension and Lyapunov estimates at a point.
    Pointwise {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long)]
        depth: usize,
    },
    /// Large-scale visit times and tower visit frequency for an orbit.
    Visits {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, allow_negative_numbers = true)]
        delta: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        freq_level: Option<usize>,
    },
    /// Run the oracle acceptance suite; exit 0 iff every criterion passes.
    VerifyOracles {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

struct Pipeline {
    cfg: RunConfig,
    map: IntervalMap,
    phi: Option<Potential>,
}

impl Pipeline {
    fn load(common: &Common) -> Result<Pipeline> {
        let text = std::fs::read_to_string(&common.config)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", common.config.display())))?;
        let mut cfg = RunConfig::from_json(&text)?;
        if let Some(j) = common.jobs {
            cfg.jobs = j;
        }
        if let Some(s) = common.seed {
            cfg.seed = s;
        }
        let map = cfg.map.build()?;
        let phi = cfg.potential.as_ref().map(|p| p.build());
        Ok(Pipeline { cfg, map, phi })
    }

    fn tower(&self) -> TowerGraph {
        build_tower_with(
            &self.map,
            self.cfg.tower.level_cap,
            self.cfg.tower.min_width,
            self.cfg.tower.dedup_tol,
            crate::hofbauer::DEFAULT_DOMAIN_CAP,
        )
    }

    fn scheme(&self, tower: &TowerGraph) -> Result<InducingScheme> {
        let tau_cap = self.cfg.scheme.tau_cap;
        let type_b = self.cfg.scheme.scheme_type.eq_ignore_ascii_case("b");
        let base = match self.cfg.base_cylinder()? {
            None => crate::numerics::Iv::new(0.0, 1.0),
            Some((depth, index)) => crate::thermo::cylinder_interval(&self.map, depth, index)?,
        };
        if type_b {
            build_scheme_type_b(tower, &self.map, base, self.cfg.scheme.delta, tau_cap)
        } else if self.cfg.base_cylinder()?.is_none() {
            build_scheme_type_a(tower, &self.map, 0, base, tau_cap)
        } else {
            let cands = scheme_candidates(tower, base);
            let (domain, _) = cands.first().ok_or_else(|| {
                Error::Precondition(format!(
                    "no tower domain admits base cylinder {}",
                    self.cfg.scheme.base
                ))
            })?;
            build_scheme_type_a(tower, &self.map, *domain, base, tau_cap)
        }
    }

    fn potential(&self) -> Result<&Potential> {
        self.phi
            .as_ref()
            .ok_or_else(|| Error::Config("this subcommand needs a potential".into()))
    }

    fn word_table(&self, scheme: &InducingScheme, phi: &Potential) -> Result<WordTable> {
        WordTable::build(
            scheme,
            &self.map,
            phi,
            self.cfg.thermo.word_depth,
            self.cfg.thermo.branch_cap,
            400_000,
        )
    }

    fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            t_tol: self.cfg.thermo.t_tol,
            p_tol: self.cfg.thermo.p_tol,
            ..SolveConfig::default()
        }
    }
}

/// Temperature curve with an optional worker pool: the grid splits into
/// contiguous chunks, each solved sequentially with warm starts.
fn tq_curve_jobs(table: &WordTable, grid: &[f64], cfg: &SolveConfig, jobs: usize) -> TqCurve {
    if jobs <= 1 || grid.len() < 2 * jobs {
        return tq_curve(table, grid, cfg);
    }
    let chunk = grid.len().div_ceil(jobs);
    let chunks: Vec<&[f64]> = grid.chunks(chunk).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("worker pool");
    let parts: Vec<TqCurve> = pool.install(|| {
        use rayon::prelude::*;
        chunks.par_iter().map(|c| tq_curve(table, c, cfg)).collect()
    });
    let mut samples = Vec::with_capacity(grid.len());
    for p in parts {
        samples.extend(p.samples);
    }
    TqCurve { samples }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::MapInspect { common } => {
            let p = Pipeline::load(&common)?;
            let entropy = p.map.estimate_topological_entropy(14)?;
            let crit = p.map.critical_report(40);
            let growth = p.map.growth_diagnostic(30).ok();
            let class = p.map.class_f_report(30);
            let range = p
                .phi
                .as_ref()
                .map(|phi| check_range_condition(&p.map, phi, entropy.value));
            let report = serde_json::json!({
                "topological_entropy": entropy,
                "critical_report": crit,
                "growth": growth,
                "class_heuristics": class,
                "range_condition": range,
            });
            emit(&common.out, &format!("{}\n", serde_json::to_string_pretty(&report)?))?;
            Ok(0)
        }
        Command::Cylinders { common, depth } => {
            let p = Pipeline::load(&common)?;
            let part = crate::cylinders::refine_partition(&p.map, depth);
            emit(&common.out, &crate::cylinders::partition_to_csv(&part))?;
            Ok(0)
        }
        Command::Tower { common, level_cap, min_width, dot, census } => {
            let p = Pipeline::load(&common)?;
            let tower = build_tower_with(
                &p.map,
                level_cap.unwrap_or(p.cfg.tower.level_cap),
                min_width.unwrap_or(p.cfg.tower.min_width),
                p.cfg.tower.dedup_tol,
                crate::hofbauer::DEFAULT_DOMAIN_CAP,
            );
            if let Some(path) = &dot {
                std::fs::write(path, tower.export_dot())?;
            }
            if let Some(path) = &census {
                std::fs::write(path, tower.census_csv(&p.map))?;
            }
            let summary = serde_json::json!({
                "domains": tower.domains.len(),
                "levels": tower.level_census(&p.map).counts,
                "complete": tower.complete(),
                "truncation": tower.truncation,
            });
            emit(&common.out, &format!("{}\n", serde_json::to_string_pretty(&summary)?))?;
            Ok(0)
        }
        Command::Induce { common, r#type, base_cylinder, delta, tau_cap } => {
            let mut p = Pipeline::load(&common)?;
            if let Some(t) = r#type {
                p.cfg.scheme.scheme_type = t;
            }
            if let Some(b) = base_cylinder {
                p.cfg.scheme.base = b;
            }
            if let Some(d) = delta {
                p.cfg.scheme.delta = d;
            }
            if let Some(t) = tau_cap {
                p.cfg.scheme.tau_cap = t;
            }
            let tower = p.tower();
            let scheme = p.scheme(&tower)?;
            emit(&common.out, &format!("{}\n", serde_json::to_string_pretty(&scheme.to_json())?))?;
            Ok(0)
        }
        Command::Pressure { common, t, q } => {
            let p = Pipeline::load(&common)?;
            let phi = p.potential()?.clone();
            let tower = p.tower();
            // induced method preferred, cylinder-sum fallback
            let estimate = match p.scheme(&tower).and_then(|s| {
                let table = p.word_table(&s, &phi)?;
                table.pressure(t, q, 1e-8)
            }) {
                Ok(e) => e,
                Err(Error::Divergence(d)) => return Err(Error::Divergence(d)),
                Err(_) => {
                    let psi = Potential::combination(t, q, phi.clone());
                    pressure_original(&p.map, &psi, p.cfg.thermo.pressure_depth)?
                }
            };
            if !estimate.converged {
                return Err(Error::Convergence {
                    context: format!("pressure at t={t}, q={q}"),
                    partial: estimate.sequence,
                });
            }
            emit(&common.out, &format!("{}\n", serde_json::to_string_pretty(&estimate)?))?;
            Ok(0)
        }
        Command::Tq { common, qmin, qmax, steps } => {
            let mut p = Pipeline::load(&common)?;
            if let Some(v) = qmin {
                p.cfg.thermo.q_grid.min = v;
            }
            if let Some(v) = qmax {
                p.cfg.thermo.q_grid.max = v;
            }
            if let Some(v) = steps {
                p.cfg.thermo.q_grid.steps = v;
            }
            let grid = p.cfg.thermo.q_grid.build()?;
            let phi = p.potential()?.clone();
            let tower = p.tower();
            let scheme = p.scheme(&tower)?;
            let table = p.word_table(&scheme, &phi)?;
            let curve = tq_curve_jobs(&table, &grid, &p.solve_config(), p.cfg.jobs);
            if curve.samples.iter().all(|s| s.t.is_none()) {
                return Err(Error::Divergence("no q in the grid admits a temperature".into()));
            }
            emit(&common.out, &curve.csv())?;
            Ok(0)
        }
        Command::Spectrum { kind, common, measure_out } => {
            let p = Pipeline::load(&common)?;
            let grid = p.cfg.thermo.q_grid.build()?;
            let tower = p.tower();
            let scheme = p.scheme(&tower)?;
            let spec_cfg = SpectrumConfig {
                solve: p.solve_config(),
                word_depth: p.cfg.thermo.word_depth,
                branch_cap: p.cfg.thermo.branch_cap,
                ..SpectrumConfig::default()
            };
            if let Some(path) = &measure_out {
                let phi = p.phi.clone().unwrap_or_else(|| Potential::constant(0.0));
                let proxy = crate::spectra::acip_proxy(&scheme, &p.map, &phi, &spec_cfg)?;
                std::fs::write(path, format!("{}\n", serde_json::to_string(&proxy.to_json())?))?;
            }
            let spec = match kind.as_str() {
                "dimension" => {
                    let phi = p.potential()?.clone();
                    let (_, spec) = dimension_spectrum(&scheme, &p.map, &phi, &grid, &spec_cfg)?;
                    spec
                }
                "lyapunov" => {
                    let h = p.map.estimate_topological_entropy(14)?.value;
                    let (_, _, lyap) = lyapunov_spectrum(&scheme, &p.map, h, &grid, &spec_cfg)?;
                    lyap
                }
                other => {
                    return Err(Error::Config(format!(
                        "spectrum kind must be 'dimension' or 'lyapunov', got {other}"
                    )))
                }
            };
            emit(&common.out, &spec.csv())?;
            Ok(0)
        }
        Command::Pointwise { common, x, depth } => {
            let p = Pipeline::load(&common)?;
            let tower = p.tower();
            let scheme = p.scheme(&tower)?;
            let lyap = pointwise_lyapunov(&p.map, x, depth.max(10))?;
            let dim = match p.phi.as_ref() {
                Some(phi) => {
                    pointwise_dimension(&scheme, &p.map, phi, 0.0, 1.0, None, x, depth).ok()
                }
                None => None,
            };
            let report = serde_json::json!({
                "x": x,
                "lyapunov_lower": lyap.lower,
                "lyapunov_upper": lyap.upper,
                "dimension": dim,
            });
            emit(&common.out, &format!("{}\n", serde_json::to_string_pretty(&report)?))?;
            Ok(0)
        }
        Command::Visits { common, x, delta, n, freq_level } => {
            let p = Pipeline::load(&common)?;
            let v = large_scale_visits(&p.map, x, delta, n)?;
            let freq = match freq_level {
                Some(r) => {
                    let tower = p.tower();
                    Some(tower_visit_frequency(&tower, &p.map, x, n.max(1), r)?)
                }
                None => None,
            };
            let mut out = String::from("time\n");
            for t in &v.times {
                out.push_str(&format!("{t}\n"));
            }
            if let Some(f) = freq {
                out.push_str(&format!("# tower_visit_frequency,{f:.11e}\n"));
            }
            if v.truncated {
                out.push_str("# truncated,true\n");
            }
            emit(&common.out, &out)?;
            Ok(0)
        }
        Command::VerifyOracles { seed, out } => {
            let report = crate::verify::run_all(seed.unwrap_or(7));
            let text = report.render();
            emit(&out, &text)?;
            Ok(if report.all_passed() { 0 } else { 1 })
        }
    }
}

/// Entry point used by the binary: parse, dispatch, map errors to exit codes
/// (2 config, 3 convergence, 4 divergence).
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap renders help/version on stdout with success status
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_subcommand_exits_2() {
        let code = run_command(["multifract", "frobnicate"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn missing_config_is_config_error() {
        let code = run_command(["multifract", "tq", "--config", "/nonexistent.json"]);
        assert_eq!(code, 2);
    }
}
