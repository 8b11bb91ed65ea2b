//! Run configuration: schema validation, defaults, and the derived-constant
//! echo that makes every output self-describing.

use lab_core::branch::EventParams;
use lab_core::map::{self, MapFamily, NoiseModel, XiKind};
use lab_core::measure::UlamMode;
use lab_core::times::HyperbolicParams;
use lab_core::tower::TowerParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema error at `{0}`: {1}")]
    Schema(String, String),
    #[error("map error: {0}")]
    Map(#[from] map::MapError),
}

fn schema_err(path: &str, msg: &str) -> ConfigError {
    ConfigError::Schema(path.to_string(), msg.to_string())
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct HyperbolicBlock {
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default = "default_b")]
    pub b: f64,
}

fn default_sigma2() -> f64 {
    0.75
}
fn default_r() -> f64 {
    0.05
}
fn default_b() -> f64 {
    0.25
}

impl Default for HyperbolicBlock {
    fn default() -> Self {
        HyperbolicBlock {
            sigma2: default_sigma2(),
            r: default_r(),
            b: default_b(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EventBlock {
    pub delta0: Option<f64>,
    pub delta1: Option<f64>,
    pub epsilon0: Option<f64>,
    pub l: Option<usize>,
    pub x0: Option<f64>,
    pub branch_cap: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TowerBlock {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_grid_exp")]
    pub grid_exp: u32,
    pub c1: Option<f64>,
    #[serde(default = "default_c1_samples")]
    pub c1_samples: usize,
    #[serde(default = "default_width_floor")]
    pub width_floor: f64,
    #[serde(default = "default_max_elements")]
    pub max_elements: usize,
}

fn default_horizon() -> usize {
    400
}
fn default_grid_exp() -> u32 {
    14
}
fn default_c1_samples() -> usize {
    64
}
fn default_width_floor() -> f64 {
    1e-21
}
fn default_max_elements() -> usize {
    200_000
}

impl Default for TowerBlock {
    fn default() -> Self {
        TowerBlock {
            horizon: default_horizon(),
            grid_exp: default_grid_exp(),
            c1: None,
            c1_samples: default_c1_samples(),
            width_floor: default_width_floor(),
            max_elements: default_max_elements(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureBlock {
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_n_back")]
    pub n_back: usize,
    #[serde(default = "default_mc")]
    pub mc: usize,
    #[serde(default = "default_noise_nodes")]
    pub noise_nodes: usize,
}

fn default_bins() -> usize {
    1024
}
fn default_n_back() -> usize {
    80
}
fn default_mc() -> usize {
    100_000
}
fn default_noise_nodes() -> usize {
    16
}

impl Default for MeasureBlock {
    fn default() -> Self {
        MeasureBlock {
            bins: default_bins(),
            n_back: default_n_back(),
            mc: default_mc(),
            noise_nodes: default_noise_nodes(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleBlock {
    #[serde(default = "default_ensemble")]
    pub count: usize,
    pub seed: Option<u64>,
}

fn default_ensemble() -> usize {
    16
}

impl Default for EnsembleBlock {
    fn default() -> Self {
        EnsembleBlock {
            count: default_ensemble(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LdpBlock {
    pub big_r: Option<f64>,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_ell")]
    pub ell: u32,
    #[serde(default = "default_ldp_grid")]
    pub grid: usize,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
}

fn default_h() -> f64 {
    0.5
}
fn default_ell() -> u32 {
    32
}
fn default_ldp_grid() -> usize {
    10_000_000
}
fn default_beta2() -> f64 {
    0.1
}

impl Default for LdpBlock {
    fn default() -> Self {
        LdpBlock {
            big_r: None,
            h: default_h(),
            ell: default_ell(),
            grid: default_ldp_grid(),
            beta2: default_beta2(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_out_dir() -> String {
    "out".to_string()
}
fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            dir: default_out_dir(),
            formats: default_formats(),
        }
    }
}

/// Raw config as written by the user.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub xi: String,
    pub slope: Option<f64>,
    pub alpha: f64,
    pub a: f64,
    pub epsilon: f64,
    pub c: f64,
    pub seed: u64,
    #[serde(default)]
    pub hyperbolic: HyperbolicBlock,
    #[serde(default)]
    pub event: EventBlock,
    #[serde(default)]
    pub tower: TowerBlock,
    #[serde(default)]
    pub measure: MeasureBlock,
    #[serde(default)]
    pub ensemble: EnsembleBlock,
    #[serde(default)]
    pub ldp: LdpBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

/// Auto-derived constants, echoed into every output.
#[derive(Debug, Clone, Serialize)]
pub struct DerivedConstants {
    pub delta0: f64,
    pub delta0_admissible: bool,
    pub delta1: f64,
    pub epsilon0: f64,
    pub big_l: usize,
    pub x0: f64,
    pub sigma2: f64,
    pub r: f64,
    pub b: f64,
    /// Set when epsilon <= alpha^(c-1), i.e. outside the theorem regime.
    pub regime_warning: bool,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub config: RunConfig,
    pub derived: DerivedConstants,
    pub config_hash: String,
    pub version: String,
}

impl Resolved {
    pub fn family(&self) -> MapFamily {
        let kind = match self.config.xi.as_str() {
            "sine" => XiKind::Sine,
            "two-bump" => XiKind::TwoBump,
            "test-linear" => XiKind::TestLinear {
                slope: self.config.slope.unwrap_or(self.config.alpha),
            },
            _ => unreachable!("validated"),
        };
        MapFamily::new(kind, self.config.alpha, self.config.a).expect("validated")
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel::new(self.config.epsilon)
    }

    pub fn hyperbolic_params(&self) -> HyperbolicParams {
        HyperbolicParams::new(
            self.derived.sigma2,
            self.derived.r,
            self.derived.b,
            self.derived.big_l,
        )
    }

    pub fn event_params(&self) -> EventParams {
        EventParams {
            big_l: self.derived.big_l,
            delta0: self.derived.delta0,
            delta1: self.derived.delta1,
            epsilon0: self.derived.epsilon0,
            x0: self.derived.x0,
            branch_cap: self.config.event.branch_cap.unwrap_or(1_000_000),
        }
    }

    pub fn tower_params(&self) -> TowerParams {
        TowerParams {
            horizon: self.config.tower.horizon,
            grid_exp: self.config.tower.grid_exp,
            width_floor: self.config.tower.width_floor,
            max_elements: self.config.tower.max_elements,
        }
    }

    pub fn ulam_mode(&self) -> UlamMode {
        UlamMode::BranchExact
    }

    pub fn ensemble_seed(&self) -> u64 {
        self.config.ensemble.seed.unwrap_or(self.config.seed)
    }
}

/// Validate, fill defaults, and derive constants.
pub fn parse_config(text: &str) -> Result<Resolved, ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let obj = value
        .as_object()
        .ok_or_else(|| schema_err("", "top level must be an object"))?;
    // required scalars with field-path errors
    for (field, kind) in [
        ("xi", "string"),
        ("alpha", "number"),
        ("a", "number"),
        ("epsilon", "number"),
        ("c", "number"),
        ("seed", "integer"),
    ] {
        let v = obj
            .get(field)
            .ok_or_else(|| schema_err(field, "missing required field"))?;
        let ok = match kind {
            "string" => v.is_string(),
            "integer" => v.is_u64(),
            _ => v.is_number(),
        };
        if !ok {
            return Err(schema_err(field, &format!("expected a {kind}")));
        }
    }
    let config: RunConfig =
        serde_json::from_value(value.clone()).map_err(|e| schema_err("", &e.to_string()))?;
    match config.xi.as_str() {
        "sine" | "two-bump" => {}
        "test-linear" => {
            if config.slope.is_none() {
                return Err(schema_err("slope", "test-linear requires a slope"));
            }
        }
        other => {
            return Err(schema_err(
                "xi",
                &format!("unknown profile `{other}` (sine | two-bump | test-linear)"),
            ))
        }
    }
    if !(config.alpha > 0.0) {
        return Err(schema_err("alpha", "must be positive"));
    }
    if !(0.0..1.0).contains(&config.a) {
        return Err(schema_err("a", "must lie in [0,1)"));
    }
    if !(config.epsilon > 0.0) {
        return Err(schema_err("epsilon", "must be positive"));
    }
    if !(config.c > 0.0 && config.c < 1.0) {
        return Err(schema_err("c", "must lie in (0,1)"));
    }
    if !(config.hyperbolic.sigma2 > 0.0 && config.hyperbolic.sigma2 < 1.0) {
        return Err(schema_err("hyperbolic.sigma2", "must lie in (0,1)"));
    }
    if !(config.hyperbolic.r > 0.0 && config.hyperbolic.r < 0.5) {
        return Err(schema_err("hyperbolic.r", "must lie in (0,1/2)"));
    }
    if !(config.hyperbolic.b > 0.0 && config.hyperbolic.b < 0.5) {
        return Err(schema_err("hyperbolic.b", "must lie in (0,1/2)"));
    }

    let kind = match config.xi.as_str() {
        "sine" => XiKind::Sine,
        "two-bump" => XiKind::TwoBump,
        _ => XiKind::TestLinear {
            slope: config.slope.unwrap(),
        },
    };
    let family = MapFamily::new(kind, config.alpha, config.a)?;
    let d0 = config
        .event
        .delta0
        .unwrap_or_else(|| map::delta0(&family).value);
    let delta1 = config.event.delta1.unwrap_or(d0 / 10.0);
    let epsilon0 = config.event.epsilon0.unwrap_or(d0 / 4.0);
    let big_l = config
        .event
        .l
        .unwrap_or_else(|| EventParams::derive_big_l(d0, delta1, config.alpha, config.c));
    let x0 = config.event.x0.unwrap_or_else(|| derive_x0(&family));
    let regime_warning = config.epsilon <= config.alpha.powf(config.c - 1.0);

    let derived = DerivedConstants {
        delta0: d0,
        delta0_admissible: d0 < 0.25,
        delta1,
        epsilon0,
        big_l,
        x0,
        sigma2: config.hyperbolic.sigma2,
        r: config.hyperbolic.r,
        b: config.hyperbolic.b,
        regime_warning,
    };
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let config_hash = hex_string(&hasher.finalize());
    Ok(Resolved {
        config,
        derived,
        config_hash,
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// The reference point: among coarse-grid maximisers of |xi'|, the one
/// nearest 0.
fn derive_x0(family: &MapFamily) -> f64 {
    let n = 4096;
    let mut best_v = 0.0f64;
    for i in 0..n {
        let x = i as f64 / n as f64;
        best_v = best_v.max(family.xi_prime(x).abs());
    }
    let mut best_x = 0.0f64;
    let mut best_d = f64::INFINITY;
    for i in 0..n {
        let x = i as f64 / n as f64;
        if family.xi_prime(x).abs() >= best_v * (1.0 - 1e-9) {
            let d = map::circle_dist(x, 0.0);
            if d < best_d {
                best_d = d;
                best_x = x;
            }
        }
    }
    best_x
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        r#"{"xi":"sine","alpha":400.0,"a":0.0,"epsilon":0.05,"c":0.5,"seed":1}"#;

    #[test]
    fn minimal_config_derives_defaults() {
        let r = parse_config(MINIMAL).unwrap();
        assert!((r.derived.delta0 - 0.15253302959105844).abs() < 1e-12);
        assert!((r.derived.delta1 - r.derived.delta0 / 10.0).abs() < 1e-15);
        assert!((r.derived.epsilon0 - r.derived.delta0 / 4.0).abs() < 1e-15);
        assert_eq!(r.derived.big_l, 2);
        assert_eq!(r.derived.x0, 0.0);
        // epsilon = alpha^(c-1) exactly: boundary case flags the regime
        assert!(r.derived.regime_warning);
        assert_eq!(r.config_hash.len(), 64);
    }

    #[test]
    fn missing_alpha_is_a_schema_error() {
        let err = parse_config(r#"{"xi":"sine","a":0.0,"epsilon":0.05,"c":0.5,"seed":1}"#)
            .unwrap_err();
        match err {
            ConfigError::Schema(path, _) => assert_eq!(path, "alpha"),
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn regime_warning_boundary() {
        // epsilon strictly above alpha^(c-1): no warning
        let r = parse_config(
            r#"{"xi":"sine","alpha":400.0,"a":0.0,"epsilon":0.06,"c":0.5,"seed":1}"#,
        )
        .unwrap();
        assert!(!r.derived.regime_warning);
    }

    #[test]
    fn unknown_profile_rejected() {
        let err =
            parse_config(r#"{"xi":"cubic","alpha":400.0,"a":0.0,"epsilon":0.05,"c":0.5,"seed":1}"#)
                .unwrap_err();
        assert!(matches!(err, ConfigError::Schema(ref p, _) if p == "xi"));
    }

    #[test]
    fn golden_resolved_snapshot() {
        let r = parse_config(MINIMAL).unwrap();
        let json = serde_json::to_string(&r.derived).unwrap();
        let expect = r#"{"delta0":0.15253302959105844,"delta0_admissible":true,"delta1":0.015253302959105843,"epsilon0":0.03813325739776461,"big_l":2,"x0":0.0,"sigma2":0.75,"r":0.05,"b":0.25,"regime_warning":true}"#;
        assert_eq!(json, expect);
    }
}
