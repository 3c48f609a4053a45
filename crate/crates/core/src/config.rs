//! Experiment configuration: one TOML file, every key optional, unknown keys
//! rejected. The resolved form is written next to every output.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beliefs::ConstraintWindow;
use crate::distribution::OpinionDistribution;
use crate::error::{Error, Result};
use crate::game::GameParams;
use crate::platform::{PlatformConfig, PlatformSetup};
use crate::stewarding::{BeliefInit, SimConfig, StewardingMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameSection {
    pub alpha: f64,
    pub lambda_in: f64,
    pub lambda_out: f64,
    pub n_hat: f64,
    pub gamma_silence: f64,
}

impl Default for GameSection {
    fn default() -> Self {
        GameSection { alpha: 0.6, lambda_in: 2.0, lambda_out: 0.5, n_hat: 0.5, gamma_silence: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeliefsSection {
    pub approval_a: f64,
    pub approval_b: f64,
    pub disapproval_a: f64,
    pub disapproval_b: f64,
    /// Heterogeneity half-width in the steward runs (the platform has its own).
    pub spread: f64,
    pub tau: f64,
    pub n_samples: usize,
    pub posterior_bins: usize,
}

impl Default for BeliefsSection {
    fn default() -> Self {
        let b = BeliefInit::default();
        BeliefsSection {
            approval_a: b.approval_a,
            approval_b: b.approval_b,
            disapproval_a: b.disapproval_a,
            disapproval_b: b.disapproval_b,
            spread: b.spread,
            tau: 0.2,
            n_samples: 10_000,
            posterior_bins: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MdpSection {
    pub bins: usize,
    pub discount: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for MdpSection {
    fn default() -> Self {
        MdpSection { bins: 50, discount: 0.9, tol: 1e-6, max_sweeps: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriumSection {
    /// Believed values at which best-response curves are tabulated.
    pub curve_values: Vec<f64>,
    /// Grid points over the partner's intensity in `[0, 1]`.
    pub gamma_points: usize,
    /// Grid points over `v_bar` in `[0.5, 1]`.
    pub v_points: usize,
    /// Random parameter tuples in the theorem check.
    pub theorem_tuples: usize,
}

impl Default for EquilibriumSection {
    fn default() -> Self {
        EquilibriumSection {
            curve_values: vec![0.5, 0.6, 0.7, 0.9],
            gamma_points: 101,
            v_points: 51,
            theorem_tuples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StewardSection {
    pub n_agents: usize,
    pub timesteps: usize,
    pub batches: usize,
    pub alphas: Vec<f64>,
    pub modes: Vec<StewardingMode>,
    pub record_agents: bool,
}

impl Default for StewardSection {
    fn default() -> Self {
        StewardSection {
            n_agents: 100,
            timesteps: 100,
            batches: 10,
            alphas: vec![0.5, 0.6],
            modes: vec![StewardingMode::Participatory, StewardingMode::IdeologicalApproval, StewardingMode::None],
            record_agents: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub game: GameSection,
    pub population: OpinionDistribution,
    pub beliefs: BeliefsSection,
    pub mdp: MdpSection,
    pub equilibrium: EquilibriumSection,
    pub steward: StewardSection,
    pub platform: PlatformConfig,
}

fn config_error(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.into(), message: message.into() }
}

/// Re-key a domain error raised while validating a section.
fn in_section(section: &str, e: Error) -> Error {
    match e {
        Error::Domain { name, value, expected } => config_error(&format!("{section}.{name}"), format!("{value} violates {expected}")),
        other => other,
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let key = e.span().map(|s| text[s].trim().to_string()).unwrap_or_default();
            config_error(&key, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn game(&self) -> Result<GameParams<f64>> {
        let g = &self.game;
        GameParams::new(g.alpha, g.lambda_in, g.lambda_out, g.n_hat, g.gamma_silence).map_err(|e| in_section("game", e))
    }

    pub fn window(&self) -> Result<ConstraintWindow<f64>> {
        ConstraintWindow::new(self.beliefs.tau).map_err(|e| in_section("beliefs", e))
    }

    pub fn belief_init(&self) -> BeliefInit {
        let b = &self.beliefs;
        BeliefInit {
            approval_a: b.approval_a,
            approval_b: b.approval_b,
            disapproval_a: b.disapproval_a,
            disapproval_b: b.disapproval_b,
            spread: b.spread,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.game()?;
        self.window()?;
        self.population.validate()?;
        self.belief_init().validate()?;
        if self.beliefs.n_samples == 0 || self.beliefs.posterior_bins == 0 {
            return Err(config_error("beliefs.n_samples", "n_samples and posterior_bins must be >= 1"));
        }
        let m = &self.mdp;
        if m.bins == 0 {
            return Err(config_error("mdp.bins", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&m.discount) {
            return Err(config_error("mdp.discount", "must lie in [0, 1)"));
        }
        if !(m.tol > 0.0) {
            return Err(config_error("mdp.tol", "must be > 0"));
        }
        let e = &self.equilibrium;
        if e.curve_values.iter().any(|v| !(0.5..=1.0).contains(v)) {
            return Err(config_error("equilibrium.curve_values", "values must lie in [0.5, 1]"));
        }
        if e.gamma_points < 2 || e.v_points < 2 {
            return Err(config_error("equilibrium.gamma_points", "grids need at least 2 points"));
        }
        let s = &self.steward;
        for &alpha in &s.alphas {
            self.game()?.with_alpha(alpha).validate().map_err(|e| in_section("steward.alphas", e))?;
        }
        if s.alphas.is_empty() || s.modes.is_empty() {
            return Err(config_error("steward.alphas", "need at least one alpha and one mode"));
        }
        self.sim_config(s.alphas[0], s.modes[0])?.validate()?;
        self.platform_setup()?.validate()
    }

    /// Simulation settings for one (alpha, mode) cell of the steward sweep.
    pub fn sim_config(&self, alpha: f64, mode: StewardingMode) -> Result<SimConfig> {
        Ok(SimConfig {
            n_agents: self.steward.n_agents,
            timesteps: self.steward.timesteps,
            batches: self.steward.batches,
            opinion_dist: self.population.clone(),
            game: self.game()?.with_alpha(alpha),
            window: self.window()?,
            mode,
            beliefs: self.belief_init(),
            n_samples: self.beliefs.n_samples,
            posterior_bins: self.beliefs.posterior_bins,
            record_agents: self.steward.record_agents,
            seed: self.seed,
        })
    }

    pub fn platform_setup(&self) -> Result<PlatformSetup> {
        Ok(PlatformSetup {
            platform: self.platform.clone(),
            opinion_dist: self.population.clone(),
            game: self.game()?,
            window: self.window()?,
            beliefs: self.belief_init(),
            n_samples: self.beliefs.n_samples,
            posterior_bins: self.beliefs.posterior_bins,
            seed: self.seed,
        })
    }
}
