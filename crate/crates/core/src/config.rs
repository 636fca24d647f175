//! Scenario configuration: TOML parsing, validation and conversion into the
//! domain types used by the pipeline.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bump::{BumpError, BumpKind, BumpSpec, DEFAULT_MAX_ORDER};
use crate::complex2d::Amplitude2D;
use crate::construction::{
    calibrate_initial_data, exponential_law, power_law, BoxSize, GeneratorData, LatticeFrame, LatticeLaw, Profile,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}")]
    Syntax(String),
    #[error("{0}")]
    Constraint(String),
}

fn constraint(msg: impl Into<String>) -> ConfigError {
    ConfigError::Constraint(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Exact,
    #[default]
    Double,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Exact => "exact",
            Precision::Double => "double",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    pub v: [i64; 3],
    pub eta0: [i64; 3],
    pub xi0: [i64; 3],
    pub xi1: [i64; 3],
}

impl Default for FrameConfig {
    fn default() -> Self {
        let f = LatticeFrame::default();
        FrameConfig { v: f.v, eta0: f.eta0, xi0: f.xi0, xi1: f.xi1 }
    }
}

impl FrameConfig {
    pub fn to_frame(&self) -> LatticeFrame {
        LatticeFrame { v: self.v, eta0: self.eta0, xi0: self.xi0, xi1: self.xi1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BumpConfig {
    Half { threshold: f64 },
    Compact { start: f64, end: f64 },
    Multi { intervals: Vec<[f64; 2]> },
}

impl Default for BumpConfig {
    fn default() -> Self {
        BumpConfig::Half { threshold: 1.0 }
    }
}

impl BumpConfig {
    pub fn to_spec(&self, max_order: usize) -> Result<BumpSpec, BumpError> {
        let kind = match self {
            BumpConfig::Half { threshold } => BumpKind::Half { threshold: *threshold },
            BumpConfig::Compact { start, end } => BumpKind::Compact { start: *start, end: *end },
            BumpConfig::Multi { intervals } => BumpKind::Multi { intervals: intervals.iter().map(|i| (i[0], i[1])).collect() },
        };
        Ok(BumpSpec::new(kind)?.with_max_order(max_order))
    }

    /// First time at which the bump leaves zero.
    pub fn switch_on(&self) -> f64 {
        match self {
            BumpConfig::Half { threshold } => *threshold,
            BumpConfig::Compact { start, .. } => *start,
            BumpConfig::Multi { intervals } => intervals.first().map_or(0.0, |i| i[0]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub k: i64,
    pub m: i64,
}

impl Default for BoxConfig {
    fn default() -> Self {
        BoxConfig { k: 8, m: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub n: i64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Law for `h` or `g`.
///
/// `exponential` and `power` are decay targets `f(ξ)` on the lattice and go
/// through calibration; `table` gives the raw profile values for `n ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase", deny_unknown_fields)]
pub enum LawSpec {
    Zero,
    Exponential { rate: f64 },
    Power { alpha: f64 },
    Table { entries: Vec<TableEntry> },
}

impl LawSpec {
    fn lattice_law(&self) -> Option<LatticeLaw> {
        match self {
            LawSpec::Zero => Some(Arc::new(|_| 0.0)),
            LawSpec::Exponential { rate } => Some(exponential_law(*rate)),
            LawSpec::Power { alpha } => Some(power_law(*alpha)),
            LawSpec::Table { .. } => None,
        }
    }

    fn table(&self) -> Option<Profile> {
        match self {
            LawSpec::Table { entries } => {
                Some(Profile::Table(entries.iter().map(|e| (e.n, Complex64::new(e.re, e.im))).collect()))
            }
            _ => None,
        }
    }

    /// Target `f(ξ)` for calibrated laws.
    pub fn target(&self, xi: [i64; 3]) -> Option<f64> {
        self.lattice_law().map(|f| f(xi))
    }

    fn validate(&self, name: &str) -> Result<(), ConfigError> {
        match self {
            LawSpec::Zero => Ok(()),
            LawSpec::Exponential { rate } if rate.is_finite() && *rate > 0.0 => Ok(()),
            LawSpec::Exponential { rate } => Err(constraint(format!("{name}: decay rate must be positive, got {rate}"))),
            LawSpec::Power { alpha } if alpha.is_finite() && *alpha > 0.0 => Ok(()),
            LawSpec::Power { alpha } => Err(constraint(format!("{name}: power exponent must be positive, got {alpha}"))),
            LawSpec::Table { entries } => {
                for e in entries {
                    if e.n < 1 {
                        return Err(constraint(format!("{name}: table entries need n >= 1, got {}", e.n)));
                    }
                    if !(e.re.is_finite() && e.im.is_finite()) {
                        return Err(constraint(format!("{name}: table entry {} is not finite", e.n)));
                    }
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GalerkinConfig {
    pub tol: f64,
    /// Probe time; defaults to `T + 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_probe: Option<f64>,
    /// Box used for the integration; defaults to the scenario box.
    #[serde(rename = "box", skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoxConfig>,
    /// Bound on off-axis Galerkin modes and axis phase error.
    pub threshold: f64,
}

impl Default for GalerkinConfig {
    fn default() -> Self {
        GalerkinConfig { tol: 1e-10, t_probe: None, bounds: None, threshold: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub residual_tol: f64,
    pub reduction_tol: f64,
    pub structure: bool,
    /// Check `|û(mξ₁, T+1)| = f₂(mξ₁)·|v|`; needs a calibrated `g`.
    pub endpoint: bool,
    pub endpoint_tol: f64,
    /// Times at which every off-axis mode must vanish.
    pub zero_times: Vec<f64>,
    /// Times at which every seeded column must be nonzero.
    pub nonzero_times: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub galerkin: Option<GalerkinConfig>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            residual_tol: 1e-8,
            reduction_tol: 1e-12,
            structure: true,
            endpoint: false,
            endpoint_tol: 1e-12,
            zero_times: Vec::new(),
            nonzero_times: Vec::new(),
            galerkin: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub q: Vec<f64>,
    /// Decay exponent used for predictions; defaults to the power of `g`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Dyadic exponents `[lo, hi]` of the cutoffs `N = 2^j`.
    pub n_range: [u32; 2],
    pub s: Vec<f64>,
    /// Analysis time; defaults to `T + 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub dq_tolerance: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { q: vec![2.0], alpha: None, n_range: [14, 24], s: vec![1.0], t: None, dq_tolerance: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupCase {
    pub s: f64,
    /// Time as a multiple of the blow-up time.
    pub t_over_t: f64,
    /// `convergent` or `divergent`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Complex2DConfig {
    pub v: [i64; 2],
    pub xi0: [i64; 2],
    pub gamma: f64,
    pub alpha_exp: f64,
    pub n_max: u64,
    pub cases: Vec<BlowupCase>,
    /// Energy samples as multiples of the blow-up time.
    pub energy_times: Vec<f64>,
    pub energy_n: u64,
}

impl Default for Complex2DConfig {
    fn default() -> Self {
        Complex2DConfig {
            v: [1, 0],
            xi0: [0, 1],
            gamma: 1.0,
            alpha_exp: 0.75,
            n_max: 100_000,
            cases: Vec::new(),
            energy_times: vec![0.0, 0.5, 0.9, 0.99],
            energy_n: 1000,
        }
    }
}

impl Complex2DConfig {
    pub fn amplitude(&self) -> Amplitude2D {
        Amplitude2D::PowerAlongXi0 { alpha: self.alpha_exp }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub name: String,
    pub precision: Precision,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Sample times; default `T·{0, 1/2, 1}` and `T + {1/2, 1, 2}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    pub frame: FrameConfig,
    pub bump: BumpConfig,
    #[serde(rename = "box")]
    pub bounds: BoxConfig,
    pub h: LawSpec,
    pub g: LawSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complex2d: Option<Complex2DConfig>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "custom".into(),
            precision: Precision::Double,
            output: None,
            times: None,
            frame: FrameConfig::default(),
            bump: BumpConfig::default(),
            bounds: BoxConfig::default(),
            h: LawSpec::Exponential { rate: 1.0 },
            g: LawSpec::Power { alpha: 0.3 },
            verify: None,
            analysis: None,
            complex2d: None,
        }
    }
}

/// Parse and validate a TOML scenario.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let config: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

impl ScenarioConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn switch_on(&self) -> f64 {
        self.bump.switch_on()
    }

    pub fn sample_times(&self) -> Vec<f64> {
        self.times.clone().unwrap_or_else(|| {
            let t = self.switch_on();
            vec![0.0, 0.5 * t, t, t + 0.5, t + 1.0, t + 2.0]
        })
    }

    pub fn frame(&self) -> LatticeFrame {
        self.frame.to_frame()
    }

    pub fn box_size(&self) -> BoxSize {
        BoxSize::new(self.bounds.k, self.bounds.m).expect("validated box")
    }

    /// Bump derivative orders needed by the build plus headroom for residuals.
    pub fn max_order(&self) -> usize {
        DEFAULT_MAX_ORDER.max(self.bounds.k.max(self.bounds.m) as usize + 8)
    }

    pub fn bump_spec(&self) -> BumpSpec {
        self.bump.to_spec(self.max_order()).expect("validated bump")
    }

    /// Generator data: calibrated laws for `h`/`g`, raw profiles for tables.
    pub fn generator(&self) -> GeneratorData {
        let frame = self.frame();
        let bump = self.bump_spec();
        let zero = || -> LatticeLaw { Arc::new(|_| 0.0) };
        let calibrated = calibrate_initial_data(
            self.h.lattice_law().unwrap_or_else(zero),
            self.g.lattice_law().unwrap_or_else(zero),
            &frame,
            bump.clone(),
        );
        let h = match (&self.h, self.h.table()) {
            (LawSpec::Zero, _) => Profile::Zero,
            (_, Some(t)) => t,
            _ => calibrated.h,
        };
        let g = match (&self.g, self.g.table()) {
            (LawSpec::Zero, _) => Profile::Zero,
            (_, Some(t)) => t,
            _ => calibrated.g,
        };
        GeneratorData { h, g, bump }
    }

    /// Exponent for D_q predictions.
    pub fn prediction_alpha(&self) -> Option<f64> {
        self.analysis.as_ref().and_then(|a| a.alpha).or(match self.g {
            LawSpec::Power { alpha } => Some(alpha),
            _ => None,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.frame().validate().map_err(|e| constraint(format!("frame: {e}")))?;
        if self.bounds.k < 1 || self.bounds.m < 1 {
            return Err(constraint(format!("box: K and M must be at least 1, got {}x{}", self.bounds.k, self.bounds.m)));
        }
        if self.bounds.k > 200 || self.bounds.m > 100_000 {
            return Err(constraint("box: K must be at most 200 and M at most 100000"));
        }
        self.bump.to_spec(self.max_order()).map_err(|e| constraint(format!("bump: {e}")))?;
        self.h.validate("h")?;
        self.g.validate("g")?;
        if let Some(times) = &self.times {
            if times.iter().any(|t| !t.is_finite()) {
                return Err(constraint("times must be finite"));
            }
        }
        if let Some(v) = &self.verify {
            for (name, x) in [("residual_tol", v.residual_tol), ("reduction_tol", v.reduction_tol), ("endpoint_tol", v.endpoint_tol)] {
                if !(x > 0.0) {
                    return Err(constraint(format!("verify: {name} must be positive")));
                }
            }
            if v.endpoint && !matches!(self.g, LawSpec::Power { .. } | LawSpec::Exponential { .. }) {
                return Err(constraint("verify: endpoint check needs a calibrated g law (power or exponential)"));
            }
            if v.endpoint && !matches!(self.bump, BumpConfig::Half { .. }) {
                return Err(constraint("verify: endpoint check needs the half bump"));
            }
            if let Some(g) = &v.galerkin {
                if !(g.tol > 0.0 && g.threshold > 0.0) {
                    return Err(constraint("verify.galerkin: tol and threshold must be positive"));
                }
                if let Some(b) = g.bounds {
                    if b.k < 1 || b.m < 1 {
                        return Err(constraint("verify.galerkin: box must be at least 1x1"));
                    }
                }
            }
        }
        if let Some(a) = &self.analysis {
            if let Some(alpha) = a.alpha {
                if !(alpha > 0.0 && alpha < 0.5) {
                    return Err(constraint(format!("analysis: α must lie in (0, 1/2), got {alpha}")));
                }
            }
            if a.q.iter().any(|&q| !(q > 1.0 && q.is_finite())) {
                return Err(constraint("analysis: every q must be finite and greater than 1"));
            }
            let [lo, hi] = a.n_range;
            if lo > hi || hi > 30 || hi - lo < 3 {
                return Err(constraint("analysis: n_range needs lo <= hi - 3 and hi <= 30"));
            }
            if a.s.iter().any(|s| !s.is_finite()) || !(a.dq_tolerance > 0.0) {
                return Err(constraint("analysis: s must be finite and dq_tolerance positive"));
            }
        }
        if let Some(c) = &self.complex2d {
            if c.v == [0, 0] || c.xi0 == [0, 0] || c.v[0] * c.xi0[0] + c.v[1] * c.xi0[1] != 0 {
                return Err(constraint("complex2d: need nonzero v, xi0 with v·xi0 = 0"));
            }
            if !(c.gamma > 0.0 && c.gamma.is_finite()) {
                return Err(constraint("complex2d: gamma must be positive"));
            }
            if !(c.alpha_exp > 0.5 && c.alpha_exp.is_finite()) {
                return Err(constraint("complex2d: α_exp must exceed 1/2"));
            }
            for case in &c.cases {
                if let Some(e) = &case.expect {
                    if e != "convergent" && e != "divergent" {
                        return Err(constraint(format!("complex2d: unknown expectation {e:?}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Built-in scenarios.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let base = ScenarioConfig { name: name.to_string(), ..ScenarioConfig::default() };
    let config = match name {
        "theorem11" => ScenarioConfig {
            bounds: BoxConfig { k: 12, m: 12 },
            verify: Some(VerifyConfig {
                endpoint: true,
                galerkin: Some(GalerkinConfig { bounds: Some(BoxConfig { k: 8, m: 4 }), ..GalerkinConfig::default() }),
                ..VerifyConfig::default()
            }),
            ..base
        },
        "corollary22" => ScenarioConfig {
            analysis: Some(AnalysisConfig { q: vec![2.0, 3.0, 4.0], alpha: Some(0.3), ..AnalysisConfig::default() }),
            ..base
        },
        "regain" => ScenarioConfig {
            bump: BumpConfig::Compact { start: 2.0, end: 3.0 },
            times: Some(vec![1.0, 2.25, 2.5, 2.75, 4.0]),
            verify: Some(VerifyConfig { zero_times: vec![1.0, 4.0], nonzero_times: vec![2.5], ..VerifyConfig::default() }),
            ..base
        },
        "multi-window" => ScenarioConfig {
            bump: BumpConfig::Multi { intervals: vec![[2.0, 3.0], [4.0, 5.0], [6.0, 7.0]] },
            times: Some(vec![1.0, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5]),
            verify: Some(VerifyConfig {
                zero_times: vec![1.0, 3.5, 5.5, 7.5],
                nonzero_times: vec![2.5, 4.5, 6.5],
                ..VerifyConfig::default()
            }),
            ..base
        },
        "complex2d" => ScenarioConfig {
            bounds: BoxConfig { k: 2, m: 2 },
            complex2d: Some(Complex2DConfig {
                cases: vec![
                    BlowupCase { s: 5.0, t_over_t: 0.9, expect: Some("convergent".into()) },
                    BlowupCase { s: -5.0, t_over_t: 1.1, expect: Some("divergent".into()) },
                    BlowupCase { s: 0.3, t_over_t: 1.0, expect: Some("divergent".into()) },
                    BlowupCase { s: 0.2, t_over_t: 1.0, expect: Some("convergent".into()) },
                ],
                ..Complex2DConfig::default()
            }),
            ..base
        },
        _ => return None,
    };
    Some(config)
}

pub const PRESETS: [&str; 5] = ["theorem11", "corollary22", "regain", "multi-window", "complex2d"];
