//! Single-organization stewarding: a fixed-opinion population, one organization
//! signaling on alternating sides, and community feedback through expression.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beliefs::{beta_update_from_community, update_from_signal, BetaBelief, ConstraintWindow, SignalUptake};
use crate::distribution::OpinionDistribution;
use crate::error::{Error, Result};
use crate::expression::{mean_where, population_response, EquilibriumCache};
use crate::game::{GameParams, Side};
use crate::organizations::{sample_signal, OrgPolicies, OrgType, PlanningModel};
use crate::rng::{substream, Stream};

/// Mean Beta parameters for both group beliefs, with an optional per-agent spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeliefInit {
    pub approval_a: f64,
    pub approval_b: f64,
    pub disapproval_a: f64,
    pub disapproval_b: f64,
    /// Half-width of the uniform draw around each parameter; 0 gives every
    /// agent exactly the mean parameters.
    pub spread: f64,
}

impl Default for BeliefInit {
    fn default() -> Self {
        BeliefInit { approval_a: 5.0, approval_b: 3.0, disapproval_a: 3.0, disapproval_b: 5.0, spread: 0.0 }
    }
}

/// Parameters drawn with a spread are clipped here from below.
pub const MIN_PSEUDO_COUNT: f64 = 0.5;

impl BeliefInit {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("beliefs.approval_a", self.approval_a),
            ("beliefs.approval_b", self.approval_b),
            ("beliefs.disapproval_a", self.disapproval_a),
            ("beliefs.disapproval_b", self.disapproval_b),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config { key: key.into(), message: "must be > 0".into() });
            }
        }
        if !(self.spread >= 0.0 && self.spread.is_finite()) {
            return Err(Error::Config { key: "beliefs.spread".into(), message: "must be >= 0".into() });
        }
        Ok(())
    }

    pub fn prior(&self, side: Side) -> BetaBelief<f64> {
        let (a, b) = match side {
            Side::Approval => (self.approval_a, self.approval_b),
            Side::Disapproval => (self.disapproval_a, self.disapproval_b),
        };
        BetaBelief { a, b, side }
    }

    /// Draw one agent's pair of beliefs `(approval, disapproval)`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (BetaBelief<f64>, BetaBelief<f64>) {
        let mut jitter = |m: f64| {
            if self.spread == 0.0 {
                m
            } else {
                (m + self.spread * (2.0 * rng.random::<f64>() - 1.0)).max(MIN_PSEUDO_COUNT)
            }
        };
        let approval = BetaBelief { a: jitter(self.approval_a), b: jitter(self.approval_b), side: Side::Approval };
        let disapproval =
            BetaBelief { a: jitter(self.disapproval_a), b: jitter(self.disapproval_b), side: Side::Disapproval };
        (approval, disapproval)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub opinion: f64,
    /// Belief about the approval group's mean opinion.
    pub approval: BetaBelief<f64>,
    /// Belief about the disapproval group's mean opinion.
    pub disapproval: BetaBelief<f64>,
    pub last_gamma: f64,
    pub expressed: bool,
}

impl Agent {
    pub fn side(&self) -> Side {
        Side::of(self.opinion)
    }

    pub fn belief_about(&self, side: Side) -> &BetaBelief<f64> {
        match side {
            Side::Approval => &self.approval,
            Side::Disapproval => &self.disapproval,
        }
    }

    pub fn belief_about_mut(&mut self, side: Side) -> &mut BetaBelief<f64> {
        match side {
            Side::Approval => &mut self.approval,
            Side::Disapproval => &mut self.disapproval,
        }
    }

    pub fn belief_in(&self) -> &BetaBelief<f64> {
        self.belief_about(self.side())
    }

    pub fn belief_out(&self) -> &BetaBelief<f64> {
        self.belief_about(self.side().other())
    }

    /// Believed `(approval, disapproval)` group means.
    pub fn believed_means(&self) -> (f64, f64) {
        (self.approval.mean(), self.disapproval.mean())
    }
}

pub fn sample_population<R: Rng + ?Sized>(
    dist: &OpinionDistribution,
    n: usize,
    init: &BeliefInit,
    rng: &mut R,
) -> Vec<Agent> {
    let opinions: Vec<f64> = (0..n).map(|_| dist.sample(rng)).collect();
    opinions
        .into_iter()
        .map(|opinion| {
            let (approval, disapproval) = init.draw(rng);
            Agent { opinion, approval, disapproval, last_gamma: 0.0, expressed: false }
        })
        .collect()
}

/// Which organization, if any, stewards the population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StewardingMode {
    Participatory,
    IdeologicalApproval,
    IdeologicalDisapproval,
    None,
}

impl StewardingMode {
    pub fn org(self) -> Option<OrgType> {
        match self {
            StewardingMode::Participatory => Some(OrgType::Participatory),
            StewardingMode::IdeologicalApproval => Some(OrgType::IdeologicalApproval),
            StewardingMode::IdeologicalDisapproval => Some(OrgType::IdeologicalDisapproval),
            StewardingMode::None => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self.org() {
            Some(org) => org.name(),
            None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_agents: usize,
    pub timesteps: usize,
    pub batches: usize,
    pub opinion_dist: OpinionDistribution,
    pub game: GameParams<f64>,
    pub window: ConstraintWindow<f64>,
    pub mode: StewardingMode,
    pub beliefs: BeliefInit,
    pub n_samples: usize,
    pub posterior_bins: usize,
    /// Keep per-agent gammas and expression flags in the trace.
    pub record_agents: bool,
    /// Batch `k` runs from seed `seed + k`.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_agents: 100,
            timesteps: 100,
            batches: 10,
            opinion_dist: OpinionDistribution::default(),
            game: GameParams::default(),
            window: ConstraintWindow::default(),
            mode: StewardingMode::Participatory,
            beliefs: BeliefInit::default(),
            n_samples: 10_000,
            posterior_bins: 100,
            record_agents: false,
            seed: 0,
        }
    }
}

/// Reference opinions used when planning signals.
pub const PLANNING_POPULATION: usize = 100;

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("steward.n_agents", self.n_agents),
            ("steward.timesteps", self.timesteps),
            ("steward.batches", self.batches),
            ("beliefs.n_samples", self.n_samples),
            ("beliefs.posterior_bins", self.posterior_bins),
        ] {
            if v == 0 {
                return Err(Error::Config { key: key.into(), message: "must be >= 1".into() });
            }
        }
        self.opinion_dist.validate()?;
        self.beliefs.validate()?;
        self.game.validate()
    }

    /// Planning model matching this population and its priors.
    pub fn planning_model(&self, seed: u64) -> PlanningModel {
        PlanningModel {
            game: self.game,
            window: self.window,
            reference: self.opinion_dist.quantile_sample(PLANNING_POPULATION),
            approval_prior: self.beliefs.prior(Side::Approval),
            disapproval_prior: self.beliefs.prior(Side::Disapproval),
            n_samples: self.n_samples,
            posterior_bins: self.posterior_bins,
            seed,
        }
    }
}

/// Side the single organization signals about at step `t`.
pub fn signal_side(t: usize) -> Side {
    if t.is_multiple_of(2) {
        Side::Approval
    } else {
        Side::Disapproval
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub signal_side: Option<Side>,
    pub signal: Option<f64>,
    /// Agents who took the signal up.
    pub accepted: usize,
    pub participation: f64,
    pub mean_expressed_approval: Option<f64>,
    pub mean_expressed_disapproval: Option<f64>,
    /// Mean believed out-group mean among approval-side agents.
    pub belief_out_approval_side: Option<f64>,
    pub belief_out_disapproval_side: Option<f64>,
    pub belief_in_approval_side: Option<f64>,
    pub belief_in_disapproval_side: Option<f64>,
    /// `|believed - actual|` out-group mean, averaged over both sides.
    pub distortion: f64,
    pub gammas: Option<Vec<f64>>,
}

pub fn participation_rate(pop: &[Agent]) -> f64 {
    if pop.is_empty() {
        return 0.0;
    }
    pop.iter().filter(|a| a.expressed).count() as f64 / pop.len() as f64
}

fn mean_over_side(pop: &[Agent], side: Side, value: impl Fn(&Agent) -> f64) -> Option<f64> {
    let xs: Vec<f64> = pop.iter().filter(|a| a.side() == side).map(value).collect();
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Mean believed out-group mean among agents on `side`.
pub fn mean_outgroup_belief(pop: &[Agent], side: Side) -> Option<f64> {
    mean_over_side(pop, side, |a| a.belief_out().mean())
}

pub fn mean_ingroup_belief(pop: &[Agent], side: Side) -> Option<f64> {
    mean_over_side(pop, side, |a| a.belief_in().mean())
}

/// Average over both sides of `|believed out-group mean - actual out-group mean|`.
pub fn outgroup_distortion(pop: &[Agent]) -> f64 {
    let opinions: Vec<f64> = pop.iter().map(|a| a.opinion).collect();
    let gaps: Vec<f64> = [Side::Approval, Side::Disapproval]
        .into_iter()
        .filter_map(|side| {
            let believed = mean_outgroup_belief(pop, side)?;
            let actual = mean_where(&opinions, |_, o| Side::of(o) == side.other())?;
            Some((believed - actual).abs())
        })
        .collect();
    if gaps.is_empty() {
        0.0
    } else {
        gaps.iter().sum::<f64>() / gaps.len() as f64
    }
}

/// Window-update every agent's belief about `side`; agents holding the same
/// belief share one posterior estimate.
fn apply_signal(pop: &mut [Agent], side: Side, signal: f64, cfg: &SimConfig, seed: u64, t: usize) -> Result<usize> {
    let mut seen: BTreeMap<(u64, u64), (BetaBelief<f64>, SignalUptake)> = BTreeMap::new();
    let mut accepted = 0;
    for agent in pop.iter_mut() {
        let b = *agent.belief_about(side);
        let key = (b.a.to_bits(), b.b.to_bits());
        let (updated, uptake) = match seen.get(&key) {
            Some(&hit) => hit,
            None => {
                let mut rng = substream(seed, Stream::Posterior, &[t as u64, key.0, key.1]);
                let hit = update_from_signal(&b, signal, &cfg.window, cfg.n_samples, cfg.posterior_bins, &mut rng)?;
                seen.insert(key, hit);
                hit
            }
        };
        if uptake == SignalUptake::Accepted {
            accepted += 1;
        }
        *agent.belief_about_mut(side) = updated;
    }
    Ok(accepted)
}

/// Steps 1 to 4 of one stewarding cycle at time `t` for the batch seeded with
/// `batch_seed`.
pub fn stewarding_step(
    pop: &mut [Agent],
    policies: Option<&OrgPolicies>,
    t: usize,
    cfg: &SimConfig,
    batch_seed: u64,
) -> Result<StepRecord> {
    let mut record_signal = None;
    let mut accepted = 0;
    if let (Some(_), Some(policies)) = (cfg.mode.org(), policies) {
        let side = signal_side(t);
        let solved = policies.side(side);
        let state = pop.iter().map(|a| a.belief_about(side).mean()).sum::<f64>() / pop.len() as f64;
        let mut jitter = substream(batch_seed, Stream::Jitter, &[t as u64]);
        let signal = sample_signal(&solved.policy(), solved.grid.bin_of(state), &mut jitter);
        accepted = apply_signal(pop, side, signal, cfg, batch_seed, t)?;
        record_signal = Some((side, signal));
    }

    let opinions: Vec<f64> = pop.iter().map(|a| a.opinion).collect();
    let mut cache = EquilibriumCache::default();
    let outcome = population_response(&opinions, |i| pop[i].believed_means(), &cfg.game, &mut cache)?;
    for (agent, (&g, &e)) in pop.iter_mut().zip(outcome.gammas.iter().zip(&outcome.expressed)) {
        agent.last_gamma = g;
        agent.expressed = e;
    }
    for side in [Side::Approval, Side::Disapproval] {
        if let Some(m) = outcome.mean_expressed(side) {
            for agent in pop.iter_mut() {
                let b = beta_update_from_community(agent.belief_about(side), m)?;
                *agent.belief_about_mut(side) = b;
            }
        }
    }

    Ok(StepRecord {
        t,
        signal_side: record_signal.map(|(s, _)| s),
        signal: record_signal.map(|(_, x)| x),
        accepted,
        participation: outcome.participation,
        mean_expressed_approval: outcome.mean_expressed_approval,
        mean_expressed_disapproval: outcome.mean_expressed_disapproval,
        belief_out_approval_side: mean_outgroup_belief(pop, Side::Approval),
        belief_out_disapproval_side: mean_outgroup_belief(pop, Side::Disapproval),
        belief_in_approval_side: mean_ingroup_belief(pop, Side::Approval),
        belief_in_disapproval_side: mean_ingroup_belief(pop, Side::Disapproval),
        distortion: outgroup_distortion(pop),
        gammas: cfg.record_agents.then(|| outcome.gammas.clone()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchTrace {
    pub batch: usize,
    pub opinions: Vec<f64>,
    pub steps: Vec<StepRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSd {
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> Option<MeanSd> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(MeanSd { mean, sd: var.sqrt() })
    }
}

/// Across-batch statistics at one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub t: usize,
    pub participation: MeanSd,
    pub belief_out_approval_side: Option<MeanSd>,
    pub belief_out_disapproval_side: Option<MeanSd>,
    pub distortion: MeanSd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub mode: StewardingMode,
    pub alpha: f64,
    pub batches: Vec<BatchTrace>,
    pub aggregate: Vec<AggregateRow>,
}

impl SimTrace {
    /// Aggregate row at the final timestep.
    pub fn terminal(&self) -> &AggregateRow {
        self.aggregate.last().expect("at least one timestep")
    }
}

pub fn run_batch(cfg: &SimConfig, policies: Option<&OrgPolicies>, batch: usize) -> Result<BatchTrace> {
    let batch_seed = cfg.seed.wrapping_add(batch as u64);
    let mut rng = substream(batch_seed, Stream::Population, &[]);
    let mut pop = sample_population(&cfg.opinion_dist, cfg.n_agents, &cfg.beliefs, &mut rng);
    let opinions = pop.iter().map(|a| a.opinion).collect();
    let steps = (0..cfg.timesteps)
        .map(|t| stewarding_step(&mut pop, policies, t, cfg, batch_seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchTrace { batch, opinions, steps })
}

/// Run every batch (in parallel) and aggregate per timestep.
pub fn run_simulation(cfg: &SimConfig, policies: Option<&OrgPolicies>) -> Result<SimTrace> {
    cfg.validate()?;
    if cfg.mode.org().is_some() && policies.is_none() {
        return Err(Error::Config { key: "steward.mode".into(), message: "stewarding mode needs solved policies".into() });
    }
    let batches = (0..cfg.batches)
        .into_par_iter()
        .map(|b| run_batch(cfg, policies, b))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = (0..cfg.timesteps)
        .map(|t| {
            let col = |f: &dyn Fn(&StepRecord) -> Option<f64>| -> Vec<f64> {
                batches.iter().filter_map(|b| f(&b.steps[t])).collect()
            };
            AggregateRow {
                t,
                participation: MeanSd::of(&col(&|s| Some(s.participation))).expect("batches >= 1"),
                belief_out_approval_side: MeanSd::of(&col(&|s| s.belief_out_approval_side)),
                belief_out_disapproval_side: MeanSd::of(&col(&|s| s.belief_out_disapproval_side)),
                distortion: MeanSd::of(&col(&|s| Some(s.distortion))).expect("batches >= 1"),
            }
        })
        .collect();
    Ok(SimTrace { mode: cfg.mode, alpha: cfg.game.alpha, batches, aggregate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent(opinion: f64) -> Agent {
        let init = BeliefInit::default();
        Agent {
            opinion,
            approval: init.prior(Side::Approval),
            disapproval: init.prior(Side::Disapproval),
            last_gamma: 0.0,
            expressed: false,
        }
    }

    #[test]
    fn rates_and_degenerate_means() {
        let mut pop: Vec<Agent> = (0..100).map(|k| agent(if k % 2 == 0 { 0.7 } else { 0.3 })).collect();
        assert_eq!(participation_rate(&pop), 0.0);
        for a in pop.iter_mut().take(75) {
            a.expressed = true;
        }
        assert_eq!(participation_rate(&pop), 0.75);
        assert_eq!(mean_outgroup_belief(&pop, Side::Approval), Some(0.375));
        assert_eq!(mean_outgroup_belief(&pop, Side::Disapproval), Some(0.625));
    }

    #[test]
    fn heterogeneous_draws_stay_positive() {
        let init = BeliefInit { spread: 2.0, ..BeliefInit::default() };
        let mut rng = substream(3, Stream::Beliefs, &[]);
        for _ in 0..1000 {
            let (a, d) = init.draw(&mut rng);
            assert!(a.b >= MIN_PSEUDO_COUNT && d.a >= MIN_PSEUDO_COUNT);
            assert!((3.0..=7.0).contains(&a.a));
        }
    }

    #[test]
    fn sides_alternate() {
        assert_eq!(signal_side(0), Side::Approval);
        assert_eq!(signal_side(1), Side::Disapproval);
        assert_eq!(signal_side(42), Side::Approval);
    }
}
