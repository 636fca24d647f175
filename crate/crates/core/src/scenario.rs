//! Scenario orchestration: build, verify, analyze and export in one pass.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::{json, Value};

use crate::bump::BumpError;
use crate::complex2d::{build_complex_solution, classify_blowup, energy, BlowupClass, Complex2DError};
use crate::config::{ConfigError, Precision, ScenarioConfig};
use crate::construction::{build_solution, dot, off_axis_terms_carry_bump, BoxSize, ConstructionError, FourierSolution3D};
use crate::export::{self, Table};
use crate::multifractal::{dyadic_range, spectrum_report, AnalysisError, ClosedFormSlice, Prediction, SliceAxis};
use crate::term_algebra::{Coefficient, ExactCoeff};
use crate::verifier::{axis_evolution, branch_contrast, check_structure, residual_report, VerifyError};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("construction failed: {0}")]
    Construction(#[from] ConstructionError),
    #[error("verification failed to run: {0}")]
    Verify(#[from] VerifyError),
    #[error("analysis failed: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("2D construction failed: {0}")]
    Complex2D(#[from] Complex2DError),
    #[error("bump evaluation failed: {0}")]
    Bump(#[from] BumpError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl ScenarioError {
    pub fn is_config(&self) -> bool {
        matches!(self, ScenarioError::Config(_))
    }
}

/// Outcome of one acceptance check declared by the configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), passed: value <= threshold, value, threshold, detail: String::new() }
    }

    fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, value: f64::from(u8::from(passed)), threshold: 1.0, detail: detail.into() }
    }

    fn to_json(&self) -> Value {
        json!({ "name": self.name, "passed": self.passed, "value": self.value, "threshold": self.threshold, "detail": self.detail })
    }
}

/// Checks and named file contents produced by a run.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub checks: Vec<Check>,
    pub files: BTreeMap<String, String>,
}

impl Artifacts {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn table(&mut self, name: &str, table: &Table) {
        self.files.insert(name.to_string(), table.to_csv());
    }

    fn extend(&mut self, other: Artifacts) {
        self.checks.extend(other.checks);
        self.files.extend(other.files);
    }

    /// Write every file under `dir`; returns the written paths in name order.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, ScenarioError> {
        self.files
            .iter()
            .map(|(name, contents)| {
                let path = dir.join(name);
                export::write_file(&path, contents).map_err(|source| ScenarioError::Io { path: path.clone(), source })?;
                Ok(path)
            })
            .collect()
    }
}

pub fn build<C: Coefficient>(config: &ScenarioConfig) -> Result<FourierSolution3D<C>, ScenarioError> {
    config.validate()?;
    Ok(build_solution::<C>(config.frame(), config.generator(), config.box_size())?)
}

pub fn build_artifacts<C: Coefficient>(solution: &FourierSolution3D<C>) -> Artifacts {
    let mut out = Artifacts::default();
    out.table("modes.csv", &export::modes_table(solution));
    out.files.insert("modes.json".into(), export::json_string(&export::modes_json(solution)));
    out
}

/// Run the `[verify]` block (defaults when absent).
pub fn verify<C: Coefficient>(config: &ScenarioConfig, solution: &FourierSolution3D<C>) -> Result<Artifacts, ScenarioError> {
    let v = config.verify.clone().unwrap_or_default();
    let mut out = Artifacts::default();
    let times = config.sample_times();

    let report = residual_report(solution, &times)?;
    out.table("residuals.csv", &export::residual_table(&report));
    out.checks.push(Check::at_most("residual", report.max_relative, v.residual_tol));
    out.checks.push(Check::at_most("reduction", report.max_reduction_gap, v.reduction_tol));

    if v.structure {
        let check = match check_structure(solution) {
            Ok(()) => Check::flag("structure", true, ""),
            Err(e) => Check::flag("structure", false, format!("{:?} at ({}, {}): {}", e.check, e.k, e.m, e.detail)),
        };
        out.checks.push(check);
    }

    if v.endpoint {
        let t0 = config.switch_on() + 1.0;
        let v_norm = (dot(&solution.frame.v, &solution.frame.v) as f64).sqrt();
        let table = solution.derivative_table(t0, 0)?;
        let mut worst = 0.0f64;
        for m in 1..=solution.bounds.m {
            let u = solution.mode(0, m).expect("seed in box").evaluate_with(&table)?;
            let got = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let target = config.g.target(solution.point(0, m)).expect("calibrated g") * v_norm;
            worst = worst.max((got - target).abs() / target);
        }
        out.checks.push(Check::at_most("endpoint", worst, v.endpoint_tol));
    }

    for &t in &v.zero_times {
        let structural = solution.bump().vanishes_at(t)
            && solution.modes().filter(|((_, m), _)| *m != 0).all(|(_, mode)| off_axis_terms_carry_bump(mode));
        let values = solution.evaluate_all(t)?;
        let largest = solution
            .modes()
            .zip(&values)
            .filter(|(((_, m), _), _)| *m != 0)
            .flat_map(|(_, u)| u.iter().map(|z| z.norm()))
            .fold(0.0f64, f64::max);
        let passed = structural && largest == 0.0;
        out.checks.push(Check {
            name: format!("off_axis_zero@{}", export::fmt_f64(t)),
            passed,
            value: largest,
            threshold: 0.0,
            detail: if structural { String::new() } else { "bump does not vanish or a term lacks the bump factor".into() },
        });
    }

    for &t in &v.nonzero_times {
        let table = solution.derivative_table(t, 0)?;
        let mut smallest = f64::INFINITY;
        for m in (-solution.bounds.m..=solution.bounds.m).filter(|&m| m != 0 && solution.generator.g(m).norm() > 0.0) {
            let u = solution.mode(0, m).expect("seed in box").evaluate_with(&table)?;
            smallest = smallest.min(u.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        let smallest = if smallest.is_finite() { smallest } else { 0.0 };
        out.checks.push(Check {
            name: format!("seeded_nonzero@{}", export::fmt_f64(t)),
            passed: smallest > 0.0,
            value: smallest,
            threshold: 0.0,
            detail: String::new(),
        });
    }

    if let Some(g) = &v.galerkin {
        out.extend(oracle(config, g.bounds.map(|b| (b.k, b.m)), g.t_probe, g.tol, g.threshold)?);
    }
    Ok(out)
}

/// Galerkin contrast on a (possibly smaller) box, always in double precision.
pub fn oracle(
    config: &ScenarioConfig,
    bounds: Option<(i64, i64)>,
    t_probe: Option<f64>,
    tol: f64,
    threshold: f64,
) -> Result<Artifacts, ScenarioError> {
    let (k, m) = bounds.unwrap_or((config.bounds.k, config.bounds.m));
    let bounds = BoxSize::new(k, m)?;
    let solution = build_solution::<Complex64>(config.frame(), config.generator(), bounds)?;
    let t = t_probe.unwrap_or(config.switch_on() + 1.0);
    let report = branch_contrast(&solution, t, tol)?;
    let mut out = Artifacts::default();
    out.table("branch_contrast.csv", &export::branch_table(&report));

    let initial = solution.evaluate_all(0.0)?;
    let (mut off_axis, mut phase) = (0.0f64, 0.0f64);
    for ((((kk, mm), _), u0), g) in solution.modes().zip(&initial).zip(&report.galerkin.modes) {
        if mm == 0 {
            let expect = axis_evolution(&solution.frame, kk, *u0, t);
            phase = phase.max((0..3).map(|i| (g[i] - expect[i]).norm()).fold(0.0, f64::max));
        } else {
            off_axis = off_axis.max(g.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }
    out.checks.push(Check::at_most("galerkin_off_axis", off_axis, threshold));
    out.checks.push(Check::at_most("galerkin_axis_phase", phase, threshold));
    let seed = solution.mode(0, 1).map(|mode| mode.evaluate(t, solution.bump())).transpose()?;
    let seed_norm = seed.map_or(0.0, |u| u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
    out.checks.push(Check {
        name: "symbolic_seed_nonzero".into(),
        passed: seed_norm > 0.0 && report.seeds_separated,
        value: seed_norm,
        threshold: 0.0,
        detail: if report.seeds_separated { String::new() } else { "branches not separated at every seed".into() },
    });
    Ok(out)
}

/// Run the `[analysis]` block on the closed-form transversal slice.
pub fn analyze(config: &ScenarioConfig) -> Result<Artifacts, ScenarioError> {
    let a = config.analysis.clone().unwrap_or_default();
    let slice = ClosedFormSlice::new(config.generator(), config.frame(), SliceAxis::Transversal);
    let t = a.t.unwrap_or(config.switch_on() + 1.0);
    let ns = dyadic_range(a.n_range[0], a.n_range[1]);
    let report = spectrum_report(&slice, t, &a.q, &ns, config.prediction_alpha(), &a.s)?;
    let mut out = Artifacts::default();
    out.table("entropy.csv", &export::entropy_table(&report));
    out.table("dq.csv", &export::dq_table(&report));
    out.table("sobolev.csv", &export::sobolev_table(&report));
    for (fit, pred) in report.fits.iter().zip(&report.predicted) {
        if let Some(Prediction::Value(p)) = pred {
            let mut check = Check::at_most(format!("dq@q={}", export::fmt_f64(fit.q)), (fit.slope - p).abs(), a.dq_tolerance);
            check.detail = format!("fitted {} predicted {}", export::fmt_f64(fit.slope), export::fmt_f64(*p));
            out.checks.push(check);
        }
    }
    Ok(out)
}

/// Run the `[complex2d]` block.
pub fn complex2d(config: &ScenarioConfig) -> Result<Artifacts, ScenarioError> {
    let c = config.complex2d.clone().unwrap_or_default();
    let sol = build_complex_solution(c.v, c.xi0, c.gamma, c.amplitude())?;
    let big_t = sol.blowup_time();
    let mut out = Artifacts::default();
    let mut reports = Vec::with_capacity(c.cases.len());
    for case in &c.cases {
        let report = classify_blowup(&sol, case.s, case.t_over_t * big_t, c.n_max)?;
        if let Some(expect) = &case.expect {
            let wanted = if expect == "convergent" { BlowupClass::Convergent } else { BlowupClass::Divergent };
            out.checks.push(Check {
                name: format!("blowup@s={},t={}T", export::fmt_f64(case.s), export::fmt_f64(case.t_over_t)),
                passed: report.class == wanted,
                value: report.last_ratio,
                threshold: 1.0,
                detail: format!("got {}, expected {}", report.class, wanted),
            });
        }
        reports.push(report);
    }
    out.table("blowup.csv", &export::blowup_table(&reports));
    let rows: Vec<(f64, u64, f64)> =
        c.energy_times.iter().map(|&f| (f * big_t, c.energy_n, energy(&sol, f * big_t, c.energy_n))).collect();
    out.table("energy2d.csv", &export::energy_table(&rows));
    Ok(out)
}

fn run_generic<C: Coefficient>(config: &ScenarioConfig) -> Result<Artifacts, ScenarioError> {
    let solution = build::<C>(config)?;
    let mut out = build_artifacts(&solution);
    let bump = export::bump_table(solution.bump(), &config.sample_times(), 5)?;
    out.table("bump.csv", &bump);
    if config.verify.is_some() {
        out.extend(verify(config, &solution)?);
    }
    if config.analysis.is_some() {
        out.extend(analyze(config)?);
    }
    if config.complex2d.is_some() {
        out.extend(complex2d(config)?);
    }
    Ok(out)
}

/// A single pipeline stage, for callers that do not want the full run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Build,
    Verify,
    Analyze,
    Oracle,
    Complex2D,
}

fn stage_generic<C: Coefficient>(config: &ScenarioConfig, stage: Stage) -> Result<Artifacts, ScenarioError> {
    let solution = build::<C>(config)?;
    Ok(match stage {
        Stage::Verify => verify(config, &solution)?,
        _ => build_artifacts(&solution),
    })
}

pub fn run_stage(config: &ScenarioConfig, stage: Stage) -> Result<Artifacts, ScenarioError> {
    config.validate()?;
    match stage {
        Stage::Build | Stage::Verify => match config.precision {
            Precision::Exact => stage_generic::<ExactCoeff>(config, stage),
            Precision::Double => stage_generic::<Complex64>(config, stage),
        },
        Stage::Analyze => analyze(config),
        Stage::Complex2D => complex2d(config),
        Stage::Oracle => {
            let g = config.verify.as_ref().and_then(|v| v.galerkin.clone()).unwrap_or_default();
            oracle(config, g.bounds.map(|b| (b.k, b.m)), g.t_probe, g.tol, g.threshold)
        }
    }
}

/// Modes of the configured solution as CSV or JSON text.
pub fn export_modes(config: &ScenarioConfig, json: bool) -> Result<String, ScenarioError> {
    fn render<C: Coefficient>(config: &ScenarioConfig, json: bool) -> Result<String, ScenarioError> {
        let solution = build::<C>(config)?;
        Ok(if json { export::json_string(&export::modes_json(&solution)) } else { export::modes_table(&solution).to_csv() })
    }
    match config.precision {
        Precision::Exact => render::<ExactCoeff>(config, json),
        Precision::Double => render::<Complex64>(config, json),
    }
}

/// Full pipeline; `summary.json` lists every check.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Artifacts, ScenarioError> {
    let mut out = match config.precision {
        Precision::Exact => run_generic::<ExactCoeff>(config)?,
        Precision::Double => run_generic::<Complex64>(config)?,
    };
    let summary = json!({
        "name": config.name,
        "precision": config.precision.to_string(),
        "passed": out.passed(),
        "checks": out.checks.iter().map(Check::to_json).collect::<Vec<_>>(),
        "files": out.files.keys().collect::<Vec<_>>(),
    });
    out.files.insert("summary.json".into(), export::json_string(&summary));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{preset, BoxConfig, VerifyConfig};

    #[test]
    fn regain_preset_passes() {
        let config = ScenarioConfig { precision: Precision::Exact, ..preset("regain").unwrap() };
        let out = run_scenario(&config).unwrap();
        assert!(out.passed(), "{:?}", out.checks);
        let names: Vec<&str> = out.checks.iter().map(|c| c.name.as_str()).collect();
        assert!(names.contains(&"off_axis_zero@4.0") && names.contains(&"seeded_nonzero@2.5"), "{names:?}");
    }

    #[test]
    fn failing_check_is_reported() {
        let config = ScenarioConfig {
            bounds: BoxConfig { k: 3, m: 2 },
            verify: Some(VerifyConfig { zero_times: vec![2.0], ..VerifyConfig::default() }),
            ..ScenarioConfig::default()
        };
        let out = run_scenario(&config).unwrap();
        assert!(!out.passed());
        assert!(out.checks.iter().any(|c| c.name == "off_axis_zero@2.0" && !c.passed));
    }

    #[test]
    fn runs_are_deterministic() {
        let config = ScenarioConfig { bounds: BoxConfig { k: 3, m: 3 }, verify: Some(VerifyConfig::default()), ..ScenarioConfig::default() };
        let a = run_scenario(&config).unwrap();
        let b = run_scenario(&config).unwrap();
        assert_eq!(a.files, b.files);
        assert!(a.files.contains_key("summary.json") && a.files.contains_key("residuals.csv"));
    }

    #[test]
    fn complex2d_preset_matches_trichotomy() {
        let out = run_scenario(&preset("complex2d").unwrap()).unwrap();
        assert!(out.passed(), "{:?}", out.checks);
        assert_eq!(out.checks.len(), 4);
        assert_eq!(out.files["blowup.csv"].lines().count(), 5);
    }

    #[test]
    fn writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let config = ScenarioConfig { bounds: BoxConfig { k: 1, m: 1 }, ..ScenarioConfig::default() };
        let out = run_scenario(&config).unwrap();
        let paths = out.write(dir.path()).unwrap();
        assert!(paths.iter().all(|p| p.exists()));
        assert!(paths.iter().any(|p| p.ends_with("modes.json")));
    }
}
