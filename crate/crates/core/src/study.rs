//! Convergence studies across a decreasing sequence of `eps`, driven by a
//! TOML description of the geometry, coefficients and study parameters.
//! Produces machine-readable CSV/JSON reports plus per-metric decay flags.

use crate::cell::{CellCache, CoefficientSet};
use crate::epssolve::{eps_resolution, solve_eps_problem};
use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::geometry::GeometryModel;
use crate::limit1d::InterpolatedEffectiveData;
use crate::measure::{integrate_mu_eps, integrate_mu_star, MeasureQuadrature};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;

/// Environment variable capping the worker threads of a study run.
pub const WORKERS_ENV: &str = "THINHOMOG_WORKERS";

fn default_per_period() -> usize {
    8
}
fn default_n2() -> usize {
    8
}
fn default_cell_n1() -> usize {
    64
}
fn default_cell_n2() -> usize {
    32
}
fn default_limit_elements() -> usize {
    1024
}
fn default_profile_degree() -> usize {
    16
}
fn default_measure_phi() -> String {
    "(1 + x2^2) * (1 - x1^2)".into()
}
fn default_flux_phi() -> String {
    // odd in x1: even test functions pair to zero against the odd limit
    // derivative on symmetric problems, hiding the convergence entirely
    "x1 * (1 - x1^2)".into()
}
fn default_flux_psi() -> Vec<String> {
    vec!["1".into(), "cos(2*pi*y1)".into()]
}
fn default_seed() -> u64 {
    0
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct GeometryConfig {
    /// Level-set expression in `x1, y1, y2`; the channel is its positivity
    /// region.
    pub f: String,
    pub half_length: f64,
    pub search_radius: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct CoefficientConfig {
    pub a11: String,
    #[serde(default = "zero_string")]
    pub a12: String,
    pub a22: String,
    #[serde(default = "zero_string")]
    pub c: String,
    pub f: String,
    #[serde(default = "default_lambda0")]
    pub lambda0: f64,
}

fn zero_string() -> String {
    "0".into()
}
fn default_lambda0() -> f64 {
    0.1
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct StudyParams {
    /// Strictly decreasing sequence.
    pub eps: Vec<f64>,
    #[serde(default = "default_per_period")]
    pub per_period: usize,
    #[serde(default = "default_n2")]
    pub n2: usize,
    #[serde(default = "default_cell_n1")]
    pub cell_n1: usize,
    #[serde(default = "default_cell_n2")]
    pub cell_n2: usize,
    #[serde(default = "default_limit_elements")]
    pub limit_elements: usize,
    #[serde(default = "default_profile_degree")]
    pub profile_degree: usize,
    #[serde(default = "default_measure_phi")]
    pub measure_phi: String,
    #[serde(default = "default_flux_phi")]
    pub flux_phi: String,
    #[serde(default = "default_flux_psi")]
    pub flux_psi: Vec<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct StudyConfig {
    pub geometry: GeometryConfig,
    pub coefficients: CoefficientConfig,
    pub study: StudyParams,
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: StudyConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("bad study config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<()> {
        if self.study.eps.is_empty() {
            return Err(Error::Config("study.eps must not be empty".into()));
        }
        if !self.study.eps.windows(2).all(|w| w[0] > w[1]) {
            return Err(Error::Config(
                "study.eps must be strictly decreasing".into(),
            ));
        }
        if self.study.eps.iter().any(|&e| e <= 0.0) {
            return Err(Error::Config("study.eps entries must be positive".into()));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<GeometryModel> {
        GeometryModel::new(
            parse(&self.geometry.f)?,
            self.geometry.half_length,
            self.geometry.search_radius,
        )
    }

    pub fn build_coefficients(&self) -> Result<CoefficientSet> {
        CoefficientSet::new(
            parse(&self.coefficients.a11)?,
            parse(&self.coefficients.a12)?,
            parse(&self.coefficients.a22)?,
            parse(&self.coefficients.c)?,
            parse(&self.coefficients.f)?,
            self.coefficients.lambda0,
        )
    }
}

/// One line of the study table.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StudyRow {
    pub eps: f64,
    pub measure_gap: f64,
    pub l2_error: f64,
    pub flux_residual: f64,
    pub avg_gap: f64,
    pub apriori_norm: f64,
}

/// Decay verdict per metric: the last value must drop below 0.6 of the
/// first and no step may grow by more than 5 percent.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayFlags {
    pub measure_gap: bool,
    pub l2_error: bool,
    pub flux_residual: bool,
    pub avg_gap: bool,
    /// Uniform boundedness instead of decay: max/min within 1.2.
    pub apriori_norm: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    pub decay: DecayFlags,
    pub all_pass: bool,
}

fn decays(values: &[f64]) -> bool {
    if values.len() < 2 {
        return false;
    }
    let steps_ok = values.windows(2).all(|w| w[1] <= 1.05 * w[0]);
    steps_ok && values[values.len() - 1] <= 0.6 * values[0]
}

fn bounded(values: &[f64]) -> bool {
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    min > 0.0 && max / min <= 1.2
}

/// Run the full study: measure convergence, the limit solve, one thin
/// solve per `eps`, and the derived error metrics.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    let model = config.build_model()?;
    let coeffs = config.build_coefficients()?;
    coeffs.validate(&model, 6, config.study.seed)?;
    let report = crate::geometry::validate(&model, 6, config.study.seed);
    if !report.all_pass() {
        return Err(Error::Config(format!(
            "geometry validation failed: {}",
            report.messages.join("; ")
        )));
    }

    let measure_phi = parse(&config.study.measure_phi)?;
    let flux_phi = parse(&config.study.flux_phi)?;
    let flux_psi: Vec<Expr> = config
        .study
        .flux_psi
        .iter()
        .map(|s| parse(s))
        .collect::<Result<_>>()?;

    let cache = CellCache::new();
    let interp = InterpolatedEffectiveData::build(
        &model,
        &coeffs,
        config.study.profile_degree,
        config.study.cell_n1,
        config.study.cell_n2,
        &cache,
    )?;
    let limit = interp.solve(&coeffs, model.half_length, config.study.limit_elements)?;
    let mu_star = integrate_mu_star(&measure_phi, &model, 64)?;

    let eps0 = config.study.eps[0];
    let compute_row = |&eps: &f64| -> Result<StudyRow> {
        let q = MeasureQuadrature::new(&model, eps, 8, 6);
        let measure_gap = (integrate_mu_eps(&measure_phi, &q)? - mu_star).abs();
        // Scale the per-period resolution like eps^(-1/2) along the
        // sequence so the discretization floor (per-period error is
        // second order) stays subordinate to the modelling error.
        let scale = (eps0 / eps).sqrt();
        let per_period = ((config.study.per_period as f64) * scale).round() as usize;
        let n2 = ((config.study.n2 as f64) * scale).round() as usize;
        let (n1, n2) = eps_resolution(model.half_length, eps, per_period, n2)?;
        let sol = solve_eps_problem(&model, &coeffs, eps, n1, n2)?;
        let l2_error = sol.l2_error_vs_limit(&model, &limit)?;
        let avg_gap = sol.average_gap(&model, &limit, 16)?;
        let norms = sol.scaled_norms(&model)?;
        let apriori_norm = (norms.l2 * norms.l2 + norms.h1_semi * norms.h1_semi).sqrt();
        let mut flux_residual = 0.0f64;
        for psi in &flux_psi {
            flux_residual = flux_residual.max(sol.flux_two_scale_residual(
                &model,
                &coeffs,
                &limit,
                &flux_phi,
                psi,
                &cache,
                (config.study.cell_n1, config.study.cell_n2),
            )?);
        }
        Ok(StudyRow {
            eps,
            measure_gap,
            l2_error,
            flux_residual,
            avg_gap,
            apriori_norm,
        })
    };

    let rows: Vec<StudyRow> = match workers_from_env() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(|| -> Result<Vec<StudyRow>> {
                config.study.eps.par_iter().map(compute_row).collect()
            })?,
        None => config.study.eps.par_iter().map(compute_row).collect::<Result<_>>()?,
    };

    let pick = |sel: &dyn Fn(&StudyRow) -> f64| -> Vec<f64> { rows.iter().map(sel).collect() };
    let decay = DecayFlags {
        measure_gap: decays(&pick(&|r| r.measure_gap)),
        l2_error: decays(&pick(&|r| r.l2_error)),
        flux_residual: decays(&pick(&|r| r.flux_residual)),
        avg_gap: decays(&pick(&|r| r.avg_gap)),
        apriori_norm: bounded(&pick(&|r| r.apriori_norm)),
    };
    let all_pass = decay.measure_gap
        && decay.l2_error
        && decay.flux_residual
        && decay.avg_gap
        && decay.apriori_norm;
    Ok(StudyReport {
        rows,
        decay,
        all_pass,
    })
}

fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
}

impl StudyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,measure_gap,l2_error,flux_residual,avg_gap,apriori_norm\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                r.eps, r.measure_gap, r.l2_error, r.flux_residual, r.avg_gap, r.apriori_norm
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(format!("serialize: {e}")))
    }

    /// Write `study.csv`, `study.json` and one two-column CSV per metric
    /// into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("study.csv"), self.to_csv())?;
        std::fs::write(dir.join("study.json"), self.to_json()?)?;
        let metrics: [(&str, &dyn Fn(&StudyRow) -> f64); 5] = [
            ("measure_gap", &|r| r.measure_gap),
            ("l2_error", &|r| r.l2_error),
            ("flux_residual", &|r| r.flux_residual),
            ("avg_gap", &|r| r.avg_gap),
            ("apriori_norm", &|r| r.apriori_norm),
        ];
        for (name, sel) in metrics {
            let mut f = std::fs::File::create(dir.join(format!("metric_{name}.csv")))?;
            writeln!(f, "eps,{name}")?;
            for r in &self.rows {
                writeln!(f, "{},{:.12e}", r.eps, sel(r))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAT: &str = r#"
        [geometry]
        f = "1 - y2^2"
        half_length = 1.0
        search_radius = 4.0

        [coefficients]
        a11 = "1"
        a22 = "1"
        c = "1"
        f = "1"
        lambda0 = 0.5

        [study]
        eps = [0.2, 0.1]
        per_period = 6
        n2 = 4
        cell_n1 = 16
        cell_n2 = 8
        limit_elements = 256
        profile_degree = 2
        flux_psi = ["1"]
    "#;

    #[test]
    fn config_parses_with_defaults() {
        let cfg = StudyConfig::from_toml(FLAT).unwrap();
        assert_eq!(cfg.study.eps, vec![0.2, 0.1]);
        assert_eq!(cfg.study.per_period, 6);
        assert_eq!(cfg.coefficients.a12, "0");
        assert_eq!(cfg.study.seed, 0);
        assert!(cfg.build_model().is_ok());
        assert!(cfg.build_coefficients().is_ok());
    }

    #[test]
    fn config_rejects_bad_eps_sequences() {
        let bad = FLAT.replace("eps = [0.2, 0.1]", "eps = [0.1, 0.2]");
        assert!(matches!(StudyConfig::from_toml(&bad), Err(Error::Config(_))));
        let empty = FLAT.replace("eps = [0.2, 0.1]", "eps = []");
        assert!(matches!(StudyConfig::from_toml(&empty), Err(Error::Config(_))));
    }

    #[test]
    fn config_rejects_malformed_expressions() {
        let cfg = StudyConfig::from_toml(&FLAT.replace(r#"a11 = "1""#, r#"a11 = "1 +""#)).unwrap();
        assert!(cfg.build_coefficients().is_err());
    }

    #[test]
    fn small_flat_study_runs_and_serialises() {
        let cfg = StudyConfig::from_toml(FLAT).unwrap();
        let report = run_study(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2);
        let csv = report.to_csv();
        assert!(csv.starts_with("eps,measure_gap,l2_error,flux_residual,avg_gap,apriori_norm\n"));
        assert_eq!(csv.lines().count(), 3);
        let json = report.to_json().unwrap();
        assert!(json.contains("\"all_pass\""));
        assert!(report.decay.apriori_norm, "{report:?}");
        let dir = std::env::temp_dir().join(format!("study_test_{}", std::process::id()));
        report.write_to_dir(&dir).unwrap();
        assert!(dir.join("study.csv").exists());
        assert!(dir.join("metric_l2_error.csv").exists());
        std::fs::remove_dir_all(&dir).ok();
    }
}
