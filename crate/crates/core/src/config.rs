//! TOML run configuration.
//!
//! Every section is optional except `[model]`, whose `U`, `V`, `omega0` and
//! `lambda` are required. Unknown keys are rejected and every diagnostic
//! names the offending key path (`model.omega0`, `kvqa.t_range`, ...). The
//! resolved [`RunConfig`] serializes back to a document that parses to the
//! same value, which is what run manifests echo.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dmft::DmftConfig;
use crate::error::{Error, Result};
use crate::greens::FrequencyGrid;
use crate::kvqa::{HoleSide, KrylovSearchConfig};
use crate::model::{resolve_mu, ModelParams, MuConvention};
use crate::statevector::NoiseSpec;
use crate::time_evolution::TimeGrid;
use crate::vqe::{EvalMode, LandscapeGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(rename = "U")]
    u: f64,
    #[serde(rename = "V")]
    v: f64,
    omega0: f64,
    lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu_convention: Option<MuConvention>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_boson_levels: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
    model: RawModel,
    #[serde(default)]
    vqe: VqeSection,
    #[serde(default)]
    kvqa: KrylovSearchConfig,
    #[serde(default)]
    spectrum: SpectrumSection,
    #[serde(default)]
    noise: NoiseSection,
    #[serde(default)]
    dmft: DmftConfig,
    #[serde(default)]
    scan: ScanSection,
    #[serde(default)]
    time: TimeSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub omega0: f64,
    pub lambda: f64,
    pub mu: f64,
    pub mu_convention: MuConvention,
    pub n_boson_levels: usize,
}

impl ModelSection {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            u: self.u,
            v: self.v,
            mu: self.mu,
            omega0: self.omega0,
            lambda: self.lambda,
            n_boson_levels: self.n_boson_levels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VqeSection {
    pub theta0_points: usize,
    pub theta1_points: usize,
    pub theta0_range: [f64; 2],
    pub theta1_range: [f64; 2],
    pub mode: EvalMode,
}

impl Default for VqeSection {
    fn default() -> Self {
        let g = LandscapeGrid::default();
        Self {
            theta0_points: g.theta0_points,
            theta1_points: g.theta1_points,
            theta0_range: g.theta0_range,
            theta1_range: g.theta1_range,
            mode: EvalMode::default(),
        }
    }
}

impl VqeSection {
    pub fn grid(&self) -> LandscapeGrid {
        LandscapeGrid {
            theta0_points: self.theta0_points,
            theta1_points: self.theta1_points,
            theta0_range: self.theta0_range,
            theta1_range: self.theta1_range,
        }
    }
}

/// Which solver produces the frequency-domain spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumSolver {
    /// Full Lehmann sum over every eigenstate.
    Lehmann,
    /// Dense Lanczos chains of finite depth.
    Lanczos,
    /// Krylov chains from the `[kvqa]` section.
    #[default]
    Kvqa,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_points: usize,
    pub delta: f64,
    pub solver: SpectrumSolver,
    pub depth: usize,
    pub hole_side: HoleSide,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        let g = FrequencyGrid::default();
        Self {
            omega_min: g.omega_min,
            omega_max: g.omega_max,
            n_points: g.n_points,
            delta: g.delta,
            solver: SpectrumSolver::default(),
            depth: 2,
            hole_side: HoleSide::default(),
        }
    }
}

impl SpectrumSection {
    pub fn grid(&self) -> FrequencyGrid {
        FrequencyGrid {
            omega_min: self.omega_min,
            omega_max: self.omega_max,
            n_points: self.n_points,
            delta: self.delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub shots: u64,
    pub readout_flip: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseSpec::default();
        Self {
            shots: n.shots,
            readout_flip: n.readout_flip,
        }
    }
}

/// V range of the self-consistency scan (`sqrt(Z·M2)` against V).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub v_min: f64,
    pub v_max: f64,
    pub n_points: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            v_min: 0.5,
            v_max: 1.2,
            n_points: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub t_max: f64,
    pub n_steps: usize,
    /// Trotter steps per unit time.
    pub n_t: usize,
    /// Trotter-structured layers of the variational ansatz.
    pub vha_layers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ordering: Option<Vec<usize>>,
}

impl Default for TimeSection {
    fn default() -> Self {
        let g = TimeGrid::default();
        Self {
            t_max: g.t_max,
            n_steps: g.n_steps,
            n_t: 10,
            vha_layers: 1,
            ordering: None,
        }
    }
}

impl TimeSection {
    pub fn grid(&self) -> TimeGrid {
        TimeGrid {
            t_max: self.t_max,
            n_steps: self.n_steps,
        }
    }
}

/// A fully resolved run configuration; μ is always a number here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub model: ModelSection,
    pub vqe: VqeSection,
    pub kvqa: KrylovSearchConfig,
    pub spectrum: SpectrumSection,
    pub noise: NoiseSection,
    pub dmft: DmftConfig,
    pub scan: ScanSection,
    pub time: TimeSection,
}

impl RunConfig {
    /// Defaults around the given model parameters, μ fixed by `conv`.
    pub fn for_model(p: &ModelParams, conv: MuConvention) -> Result<Self> {
        let mut text = format!(
            "[model]\nU = {:?}\nV = {:?}\nomega0 = {:?}\nlambda = {:?}\nn_boson_levels = {}\n",
            p.u, p.v, p.omega0, p.lambda, p.n_boson_levels
        );
        text.push_str(&format!("mu_convention = \"{}\"\n", conv.label()));
        if conv == MuConvention::Explicit {
            text.push_str(&format!("mu = {:?}\n", p.mu));
        }
        parse_config(&text)
    }

    pub fn params(&self) -> ModelParams {
        self.model.params()
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec {
            shots: self.noise.shots,
            readout_flip: self.noise.readout_flip,
            seed: self.seed,
        }
    }

    /// TOML text that [`parse_config`] maps back to `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }
}

fn config_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Path of a validation failure: the section plus the field the message
/// starts with, when that field belongs to the section.
fn locate(section: &str, fields: &[&str], err: Error) -> Error {
    let message = match err {
        Error::InvalidArgument(m) | Error::Unsupported(m) => m,
        other => other.to_string(),
    };
    let first = message
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .next()
        .unwrap_or("");
    let path = if fields.contains(&first) {
        format!("{section}.{first}")
    } else {
        section.to_string()
    };
    config_err(path, message)
}

fn resolve_model(raw: &RawModel) -> Result<ModelSection> {
    for (key, x) in [
        ("U", raw.u),
        ("V", raw.v),
        ("omega0", raw.omega0),
        ("lambda", raw.lambda),
    ] {
        if !x.is_finite() {
            return Err(config_err(
                format!("model.{key}"),
                format!("must be finite, got {x}"),
            ));
        }
    }
    if raw.omega0 <= 0.0 {
        return Err(config_err(
            "model.omega0",
            format!("must be positive, got {}", raw.omega0),
        ));
    }
    if raw.v < 0.0 {
        return Err(config_err(
            "model.V",
            format!("must be non-negative, got {}", raw.v),
        ));
    }
    let n_boson_levels = raw.n_boson_levels.unwrap_or(2);
    if n_boson_levels < 2 {
        return Err(config_err(
            "model.n_boson_levels",
            format!("must be at least 2, got {n_boson_levels}"),
        ));
    }
    if let Some(mu) = raw.mu {
        if !mu.is_finite() {
            return Err(config_err("model.mu", format!("must be finite, got {mu}")));
        }
    }
    let conv = match (raw.mu, raw.mu_convention) {
        (Some(_), None) => MuConvention::Explicit,
        (None, Some(MuConvention::Explicit)) => {
            return Err(config_err(
                "model.mu",
                "mu_convention = \"explicit\" requires mu",
            ));
        }
        (_, Some(c)) => c,
        (None, None) => MuConvention::default(),
    };
    let mut p = ModelParams {
        u: raw.u,
        v: raw.v,
        mu: raw.mu.unwrap_or(0.0),
        omega0: raw.omega0,
        lambda: raw.lambda,
        n_boson_levels,
    };
    let mu = resolve_mu(&p, conv).map_err(|e| config_err("model.mu_convention", e.to_string()))?;
    if let Some(given) = raw.mu {
        if (given - mu).abs() > 1e-9 {
            return Err(config_err(
                "model.mu",
                format!(
                    "mu = {given} contradicts mu_convention \"{}\" (mu = {mu})",
                    conv.label()
                ),
            ));
        }
    }
    p.mu = mu;
    Ok(ModelSection {
        u: p.u,
        v: p.v,
        omega0: p.omega0,
        lambda: p.lambda,
        mu,
        mu_convention: conv,
        n_boson_levels,
    })
}

fn validate_sections(cfg: &RunConfig) -> Result<()> {
    cfg.vqe.grid().validate().map_err(|e| {
        locate(
            "vqe",
            &[
                "theta0_points",
                "theta1_points",
                "theta0_range",
                "theta1_range",
            ],
            e,
        )
    })?;
    cfg.kvqa.validate().map_err(|e| {
        locate(
            "kvqa",
            &[
                "points_per_angle",
                "t_points",
                "t_range",
                "b2_floor",
                "refine_iterations",
            ],
            e,
        )
    })?;
    cfg.spectrum.grid().validate().map_err(|e| {
        locate(
            "spectrum",
            &["omega_min", "omega_max", "n_points", "delta"],
            e,
        )
    })?;
    if cfg.spectrum.depth == 0 {
        return Err(config_err("spectrum.depth", "must be at least 1"));
    }
    if cfg.noise.shots == 0 {
        return Err(config_err("noise.shots", "must be at least 1"));
    }
    if !(0.0..0.5).contains(&cfg.noise.readout_flip) {
        return Err(config_err(
            "noise.readout_flip",
            format!("must lie in [0, 0.5), got {}", cfg.noise.readout_flip),
        ));
    }
    cfg.dmft.validate().map_err(|e| {
        locate(
            "dmft",
            &["m2", "v_initial", "tol", "max_iter", "mixing", "depth"],
            e,
        )
    })?;
    if !(cfg.scan.v_min > 0.0 && cfg.scan.v_min < cfg.scan.v_max) {
        return Err(config_err("scan.v_max", "need 0 < v_min < v_max"));
    }
    if cfg.scan.n_points < 2 {
        return Err(config_err("scan.n_points", "must be at least 2"));
    }
    cfg.time
        .grid()
        .validate()
        .map_err(|e| locate("time", &["t_max", "n_steps"], e))?;
    if cfg.time.n_t == 0 {
        return Err(config_err("time.n_t", "must be at least 1"));
    }
    if cfg.time.vha_layers == 0 {
        return Err(config_err("time.vha_layers", "must be at least 1"));
    }
    Ok(())
}

/// Parse and validate a TOML run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| config_err("", e.message()))?;
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        config_err(path, e.into_inner().message())
    })?;
    let model = resolve_model(&raw.model)?;
    let cfg = RunConfig {
        seed: raw.seed,
        output_dir: raw.output_dir,
        model,
        vqe: raw.vqe,
        kvqa: raw.kvqa,
        spectrum: raw.spectrum,
        noise: raw.noise,
        dmft: raw.dmft,
        scan: raw.scan,
        time: raw.time,
    };
    validate_sections(&cfg)?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kvqa::KrylovMode;

    const MINIMAL: &str = "[model]\nU = 4.0\nV = 0.8\nomega0 = 5.0\nlambda = 1.5\n";

    fn path_of(text: &str) -> String {
        match parse_config(text) {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_document_takes_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.model.mu_convention, MuConvention::HalfFilling);
        assert!((cfg.model.mu - 1.2739).abs() < 1e-3);
        assert_eq!(cfg.model.n_boson_levels, 2);
        assert_eq!(cfg.vqe.grid(), LandscapeGrid::default());
        assert_eq!(cfg.kvqa, KrylovSearchConfig::default());
        assert_eq!(cfg.dmft, DmftConfig::default());
        assert_eq!(cfg.time.grid(), TimeGrid::default());
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn negative_omega0_names_the_key() {
        let text = MINIMAL.replace("omega0 = 5.0", "omega0 = -1.0");
        assert_eq!(path_of(&text), "model.omega0");
        let msg = parse_config(&text).unwrap_err().to_string();
        assert!(msg.contains("omega0"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_paths() {
        assert_eq!(path_of(&format!("colour = 1\n{MINIMAL}")), "colour");
        assert_eq!(path_of(&format!("{MINIMAL}colour = 1\n")), "model.colour");
        assert_eq!(
            path_of(&format!("{MINIMAL}[kvqa]\ndepthh = 3\n")),
            "kvqa.depthh"
        );
        let text = format!("{MINIMAL}[time]\nt_max = \"ten\"\n");
        assert_eq!(path_of(&text), "time.t_max");
    }

    #[test]
    fn missing_model_key_is_reported() {
        let text = MINIMAL.replace("lambda = 1.5\n", "");
        let msg = parse_config(&text).unwrap_err().to_string();
        assert!(msg.contains("lambda"), "{msg}");
    }

    #[test]
    fn validation_errors_carry_field_paths() {
        assert_eq!(
            path_of(&format!("{MINIMAL}[dmft]\nmixing = 1.5\n")),
            "dmft.mixing"
        );
        assert_eq!(
            path_of(&format!("{MINIMAL}[time]\nt_max = -2.0\n")),
            "time.t_max"
        );
        assert_eq!(
            path_of(&format!("{MINIMAL}[noise]\nreadout_flip = 0.7\n")),
            "noise.readout_flip"
        );
    }

    #[test]
    fn explicit_mu_and_conventions() {
        let cfg = parse_config(&format!("{MINIMAL}mu = 0.25\n")).unwrap();
        assert_eq!(cfg.model.mu_convention, MuConvention::Explicit);
        assert_eq!(cfg.model.mu, 0.25);
        let cfg = parse_config(&format!("{MINIMAL}mu_convention = \"half-u\"\n")).unwrap();
        assert_eq!(cfg.model.mu, 2.0);
        let text = format!("{MINIMAL}mu = 0.3\nmu_convention = \"half-u\"\n");
        assert_eq!(path_of(&text), "model.mu");
        let text = format!("{MINIMAL}mu_convention = \"explicit\"\n");
        assert_eq!(path_of(&text), "model.mu");
    }

    #[test]
    fn echo_round_trips() {
        let text = format!(
            "seed = 7\n{MINIMAL}[kvqa]\nmode = \"variational-sampled\"\nt_range = [0.02, 0.2]\n\
             [time]\nordering = [1, 0, 2, 3]\n[dmft]\nsolver = \"kvqa-direct\"\n"
        );
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.kvqa.mode, KrylovMode::VariationalSampled);
        let echoed = cfg.to_toml();
        assert_eq!(parse_config(&echoed).unwrap(), cfg);
        assert!(
            echoed.contains("mu_convention = \"half-filling\""),
            "{echoed}"
        );
    }

    #[test]
    fn for_model_matches_parsed_minimal() {
        let p = ModelParams::representative();
        let a = RunConfig::for_model(&p, MuConvention::HalfFilling).unwrap();
        let b = parse_config(MINIMAL).unwrap();
        assert_eq!(a, b);
        let e = RunConfig::for_model(&p.with_mu(0.5), MuConvention::Explicit).unwrap();
        assert_eq!(e.model.mu, 0.5);
    }
}
