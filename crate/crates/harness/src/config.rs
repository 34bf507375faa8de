//! Experiment configuration (TOML).
//!
//! Only `benchmark` and `seed` are required; everything else falls back to
//! the per-benchmark defaults below. Unknown keys are rejected.
//!
//! ```toml
//! benchmark = "duffing"          # or "golf"
//! seed = 7
//! library = "duffing_psi1"       # or: library = { terms = ["1", "x1", "x1^3", ...] }
//! dt = 0.01
//! horizon = 20.0
//!
//! [excitation]
//! amplitude = 1.0
//! frequency = 1.0                # rad/s
//!
//! [sparsity]
//! n_theta_act = 3
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sparse_ukf::library::FunctionLibrary;
use sparse_ukf::models::{Benchmark, Duffing, Golf, GolfParams};
use sparse_ukf::sparse::SparsityConfig;
use sparse_ukf::ukf::WeightScheme;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkKind {
    Duffing,
    Golf,
}

impl BenchmarkKind {
    pub fn key(self) -> &'static str {
        match self {
            BenchmarkKind::Duffing => "duffing",
            BenchmarkKind::Golf => "golf",
        }
    }
}

/// A built-in library key or an inline list of term expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LibrarySpec {
    Key(String),
    Inline(InlineLibrary),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineLibrary {
    pub terms: Vec<String>,
}

/// Sine excitation `u(t) = amplitude·sin(frequency·t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Excitation {
    pub amplitude: f64,
    pub frequency: f64,
}

impl Excitation {
    pub fn at(&self, t: f64) -> f64 {
        self.amplitude * (self.frequency * t).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DuffingSection {
    pub p: [f64; 3],
}

impl Default for DuffingSection {
    fn default() -> Self {
        Self { p: Duffing::default().p }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GolfSection {
    pub m: f64,
    pub a: f64,
    pub d: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub r: f64,
    pub mu: f64,
}

impl Default for GolfSection {
    fn default() -> Self {
        let p = GolfParams::default();
        Self { m: p.m, a: p.a, d: p.d, j: p.j, r: p.r, mu: p.mu }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub q_x: f64,
    pub q_theta: f64,
    pub r: f64,
    pub p0_x: f64,
    pub p0_theta: f64,
    /// Add `N(0, q_x·I)` process noise to the simulated truth.
    pub truth_process_noise: bool,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { q_x: 1e-6, q_theta: 1e-4, r: 1e-4, p0_x: 1e-6, p0_theta: 1e-4, truth_process_noise: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightsKey {
    #[default]
    Standard,
    Kappa,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnscentedSection {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub weights: WeightsKey,
    pub redraw_sigma_points: bool,
}

impl Default for UnscentedSection {
    fn default() -> Self {
        Self { alpha: 1e-3, beta: 2.0, kappa: 0.0, weights: WeightsKey::Standard, redraw_sigma_points: true }
    }
}

impl UnscentedSection {
    pub fn scheme(&self) -> WeightScheme {
        match self.weights {
            WeightsKey::Standard => WeightScheme::Standard,
            WeightsKey::Kappa => WeightScheme::Kappa,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SparsitySection {
    pub lambda_tilde: f64,
    pub n_theta_act: usize,
    pub max_pseudo_iters: usize,
    pub gamma: f64,
    pub r_pm: f64,
    pub pseudo_predict: bool,
}

impl Default for SparsitySection {
    fn default() -> Self {
        let c = SparsityConfig::default();
        Self {
            lambda_tilde: c.lambda_tilde,
            n_theta_act: c.n_theta_act,
            max_pseudo_iters: c.max_pseudo_iters,
            gamma: c.gamma,
            r_pm: c.r_pm,
            pseudo_predict: c.pseudo_predict,
        }
    }
}

impl From<SparsitySection> for SparsityConfig {
    fn from(s: SparsitySection) -> Self {
        SparsityConfig {
            lambda_tilde: s.lambda_tilde,
            n_theta_act: s.n_theta_act,
            max_pseudo_iters: s.max_pseudo_iters,
            gamma: s.gamma,
            r_pm: s.r_pm,
            pseudo_predict: s.pseudo_predict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub library: Option<LibrarySpec>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// RK4 sub-steps per sampling interval for the ground truth.
    #[serde(default = "default_substeps")]
    pub truth_substeps: usize,
    /// Fraction of the horizon treated as transient in the metrics.
    #[serde(default = "default_transient")]
    pub transient_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<f64>>,
    /// Filter initial estimate; defaults to the truth plus a fixed offset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_estimate: Option<Vec<f64>>,
    /// Initial value of every coefficient.
    #[serde(default = "default_theta0")]
    pub theta0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excitation: Option<Excitation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub duffing: DuffingSection,
    #[serde(default)]
    pub golf: GolfSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub unscented: UnscentedSection,
    #[serde(default)]
    pub sparsity: SparsitySection,
}

fn default_dt() -> f64 {
    0.01
}
fn default_horizon() -> f64 {
    20.0
}
fn default_substeps() -> usize {
    10
}
fn default_transient() -> f64 {
    0.5
}
fn default_theta0() -> f64 {
    1e-3
}

impl ExperimentConfig {
    /// Built-in configuration for one of the benchmarks.
    pub fn demo(benchmark: BenchmarkKind, seed: u64) -> Self {
        Self {
            benchmark,
            seed,
            library: None,
            dt: default_dt(),
            horizon: default_horizon(),
            truth_substeps: default_substeps(),
            transient_fraction: default_transient(),
            initial_state: None,
            initial_estimate: None,
            theta0: default_theta0(),
            excitation: None,
            output_dir: None,
            duffing: DuffingSection::default(),
            golf: GolfSection::default(),
            noise: NoiseSection::default(),
            unscented: UnscentedSection::default(),
            sparsity: SparsitySection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn benchmark_model(&self) -> Benchmark {
        match self.benchmark {
            BenchmarkKind::Duffing => Benchmark::Duffing(Duffing { p: self.duffing.p }),
            BenchmarkKind::Golf => {
                let g = self.golf;
                Benchmark::Golf(Golf { p: GolfParams { m: g.m, a: g.a, d: g.d, j: g.j, r: g.r, mu: g.mu } })
            }
        }
    }

    pub fn library(&self) -> Result<FunctionLibrary, ConfigError> {
        let lib = match &self.library {
            None => FunctionLibrary::builtin(match self.benchmark {
                BenchmarkKind::Duffing => "duffing_psi1",
                BenchmarkKind::Golf => "golf_psi",
            }),
            Some(LibrarySpec::Key(k)) => FunctionLibrary::builtin(k),
            Some(LibrarySpec::Inline(InlineLibrary { terms })) => FunctionLibrary::from_names(terms),
        };
        lib.map_err(|e| invalid("library", e.to_string()))
    }

    pub fn library_label(&self) -> String {
        match &self.library {
            None => self.library().map(|_| match self.benchmark {
                BenchmarkKind::Duffing => "duffing_psi1".to_string(),
                BenchmarkKind::Golf => "golf_psi".to_string(),
            }).unwrap_or_default(),
            Some(LibrarySpec::Key(k)) => k.clone(),
            Some(LibrarySpec::Inline(_)) => "inline".to_string(),
        }
    }

    pub fn excitation(&self) -> Excitation {
        self.excitation.unwrap_or(match self.benchmark {
            BenchmarkKind::Duffing => Excitation { amplitude: 2.0, frequency: 0.8 },
            BenchmarkKind::Golf => Excitation { amplitude: 0.4, frequency: 1.0 },
        })
    }

    pub fn initial_state(&self) -> Vec<f64> {
        self.initial_state.clone().unwrap_or_else(|| match self.benchmark {
            BenchmarkKind::Duffing => vec![1.0, 0.0],
            BenchmarkKind::Golf => vec![0.0, 0.0],
        })
    }

    pub fn initial_estimate(&self) -> Vec<f64> {
        self.initial_estimate.clone().unwrap_or_else(|| {
            let offset = match self.benchmark {
                BenchmarkKind::Duffing => [0.5, 0.5],
                BenchmarkKind::Golf => [0.3, 0.0],
            };
            self.initial_state().iter().zip(offset).map(|(x, o)| x + o).collect()
        })
    }

    /// Number of filter steps after the initial record.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(field, format!("must be positive and finite, got {v}")))
            }
        };
        positive("dt", self.dt)?;
        positive("horizon", self.horizon)?;
        if self.horizon < self.dt {
            return Err(invalid("horizon", "must be at least one sampling interval"));
        }
        if self.truth_substeps == 0 {
            return Err(invalid("truth_substeps", "must be at least 1"));
        }
        if !(self.transient_fraction >= 0.0 && self.transient_fraction < 1.0) {
            return Err(invalid("transient_fraction", "must lie in [0, 1)"));
        }
        if !self.theta0.is_finite() {
            return Err(invalid("theta0", "must be finite"));
        }
        let n_x = 2;
        let finite_vec = |field: &'static str, v: &[f64]| {
            if v.len() != n_x {
                Err(invalid(field, format!("expected {n_x} components, got {}", v.len())))
            } else if v.iter().any(|x| !x.is_finite()) {
                Err(invalid(field, "components must be finite"))
            } else {
                Ok(())
            }
        };
        finite_vec("initial_state", &self.initial_state())?;
        finite_vec("initial_estimate", &self.initial_estimate())?;
        let ex = self.excitation();
        if !ex.amplitude.is_finite() || !ex.frequency.is_finite() {
            return Err(invalid("excitation", "amplitude and frequency must be finite"));
        }
        if self.duffing.p.iter().any(|v| !v.is_finite()) {
            return Err(invalid("duffing.p", "parameters must be finite"));
        }
        let g = self.golf;
        for (field, v) in [("golf.m", g.m), ("golf.a", g.a), ("golf.J", g.j), ("golf.r", g.r)] {
            positive(field, v)?;
        }
        if !(g.d >= 0.0 && g.mu >= 0.0) {
            return Err(invalid("golf", "d and mu must be non-negative"));
        }
        let n = self.noise;
        for (field, v) in [
            ("noise.q_x", n.q_x),
            ("noise.q_theta", n.q_theta),
            ("noise.r", n.r),
            ("noise.p0_x", n.p0_x),
            ("noise.p0_theta", n.p0_theta),
        ] {
            positive(field, v)?;
        }
        let u = self.unscented;
        if !(u.alpha > 0.0 && u.alpha <= 1.0) {
            return Err(invalid("unscented.alpha", format!("must lie in (0, 1], got {}", u.alpha)));
        }
        let lib = self.library()?;
        if lib.required_state_dim() > n_x {
            return Err(invalid("library", format!("terms reference x{} but the state has {n_x} components", lib.required_state_dim())));
        }
        if lib.len() < n_x + 2 {
            return Err(invalid("library", format!("needs at least {} terms, got {}", n_x + 2, lib.len())));
        }
        let n_tilde = n_x + lib.len();
        if !(u.alpha * u.alpha * (n_tilde as f64 + u.kappa) > 0.0) {
            return Err(invalid("unscented.kappa", "n + lambda must be positive"));
        }
        SparsityConfig::from(self.sparsity).validate(lib.len()).map_err(|e| invalid("sparsity", e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_toml("benchmark = \"duffing\"\nseed = 3\n").unwrap();
        assert_eq!(cfg.dt, 0.01);
        assert_eq!(cfg.steps(), 2000);
        assert_eq!(cfg.library().unwrap().len(), 9);
        assert_eq!(cfg.initial_estimate(), vec![1.5, 0.5]);
        assert_eq!(cfg.sparsity.n_theta_act, 3);
    }

    #[test]
    fn inline_library_and_sections() {
        let text = r#"
            benchmark = "golf"
            seed = 1
            library = { terms = ["1", "x1", "x2", "u", "sign(x2)"] }
            [golf]
            J = 0.02
            [sparsity]
            gamma = 0.5
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.library().unwrap().len(), 5);
        assert_eq!(cfg.golf.j, 0.02);
        assert_eq!(cfg.sparsity.gamma, 0.5);
        assert_eq!(cfg.library_label(), "inline");
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            ("benchmark = \"duffing\"\nseed = 1\nbogus = 2\n", "bogus"),
            ("benchmark = \"duffing\"\n", "seed"),
            ("benchmark = \"duffing\"\nseed = 1\ndt = -1.0\n", "dt"),
            ("benchmark = \"duffing\"\nseed = 1\n[sparsity]\ngamma = 2.0\n", "sparsity"),
            ("benchmark = \"duffing\"\nseed = 1\n[noise]\nr = 0.0\n", "noise.r"),
            ("benchmark = \"duffing\"\nseed = 1\nlibrary = \"nope\"\n", "library"),
            ("benchmark = \"duffing\"\nseed = 1\n[sparsity]\nbad_key = 1\n", "bad_key"),
            ("benchmark = \"pendulum\"\nseed = 1\n", "pendulum"),
        ];
        for (text, field) in cases {
            let err = ExperimentConfig::from_toml(text).unwrap_err().to_string();
            assert!(err.contains(field), "`{err}` does not mention `{field}`");
        }
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::demo(BenchmarkKind::Golf, 9);
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }
}
