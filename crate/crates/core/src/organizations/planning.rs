//! Belief-state MDPs: one stewarding cycle as the transition model.

use rand::Rng;
use rayon::prelude::*;

use super::{value_iteration_with_ties, OrgType, TabularMdp, ValueTable};
use crate::beliefs::{beta_update_from_community, update_from_signal, BetaBelief, ConstraintWindow, SignalUptake};
use crate::error::{Error, Result};
use crate::expression::{population_response, EquilibriumCache, ExpressionOutcome};
use crate::game::{GameParams, Side};
use crate::rng::{substream, Stream};

/// Uniform bins over one side's half of the opinion interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignalGrid {
    pub side: Side,
    pub bins: usize,
}

impl SignalGrid {
    pub fn new(side: Side, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::Config { key: "mdp.bins".into(), message: "need at least one bin".into() });
        }
        Ok(SignalGrid { side, bins })
    }

    pub fn width(&self) -> f64 {
        0.5 / self.bins as f64
    }

    pub fn left(&self, k: usize) -> f64 {
        self.side.support::<f64>().0 + self.width() * k as f64
    }

    pub fn right(&self, k: usize) -> f64 {
        self.side.support::<f64>().0 + self.width() * (k + 1) as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        self.side.support::<f64>().0 + self.width() * (k as f64 + 0.5)
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.bins).map(|k| self.center(k)).collect()
    }

    pub fn bin_of(&self, x: f64) -> usize {
        let k = ((x - self.side.support::<f64>().0) / self.width()).floor();
        (k.max(0.0) as usize).min(self.bins - 1)
    }
}

/// Deterministic reference population used to evaluate one stewarding cycle.
///
/// Every reference agent holds the same beliefs: the state's group belief is
/// the configured prior moment-matched to the state center, and the other
/// group is believed to sit at the mirror image `1 - center`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanningModel {
    pub game: GameParams<f64>,
    pub window: ConstraintWindow<f64>,
    /// Opinions at evenly spaced percentiles of the opinion distribution.
    pub reference: Vec<f64>,
    pub approval_prior: BetaBelief<f64>,
    pub disapproval_prior: BetaBelief<f64>,
    pub n_samples: usize,
    pub posterior_bins: usize,
    pub seed: u64,
}

/// What one planned cycle produced.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleResult {
    pub uptake: SignalUptake,
    pub outcome: ExpressionOutcome,
    pub reward: f64,
    /// Believed mean of the state's group after both updates.
    pub next_mean: f64,
}

impl PlanningModel {
    pub fn prior(&self, side: Side) -> &BetaBelief<f64> {
        match side {
            Side::Approval => &self.approval_prior,
            Side::Disapproval => &self.disapproval_prior,
        }
    }

    /// One stewarding cycle from a homogeneous belief `state_mean` about `side`.
    ///
    /// A signal the constraint window rules out leaves the state where it is;
    /// the reward is then that of expression under the unchanged belief.
    pub fn cycle<R: Rng + ?Sized>(
        &self,
        org: OrgType,
        side: Side,
        state_mean: f64,
        signal: f64,
        rng: &mut R,
    ) -> Result<CycleResult> {
        let belief = self.prior(side).moment_matched(state_mean)?;
        let (updated, uptake) =
            update_from_signal(&belief, signal, &self.window, self.n_samples, self.posterior_bins, rng)?;
        let other_mean = 1.0 - state_mean;
        let (approval, disapproval) = match side {
            Side::Approval => (updated.mean(), other_mean),
            Side::Disapproval => (other_mean, updated.mean()),
        };
        let mut cache = EquilibriumCache::default();
        let outcome = population_response(&self.reference, |_| (approval, disapproval), &self.game, &mut cache)?;
        let reward = org.reward(&outcome)?;
        let next_mean = match (uptake, outcome.mean_expressed(side)) {
            (SignalUptake::Accepted, Some(m)) => beta_update_from_community(&updated, m)?.mean(),
            (SignalUptake::Accepted, None) => updated.mean(),
            _ => state_mean,
        };
        Ok(CycleResult { uptake, outcome, reward, next_mean })
    }
}

/// One of an organization's two signaling problems.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpSpec {
    pub org: OrgType,
    /// Group whose mean opinion the signal describes.
    pub side: Side,
    pub grid: SignalGrid,
    pub discount: f64,
    pub model: PlanningModel,
}

impl MdpSpec {
    /// Planned cycle from state bin `s` under action bin `a`.
    pub fn evaluate(&self, s: usize, a: usize) -> Result<CycleResult> {
        let side_index = match self.side {
            Side::Approval => 0,
            Side::Disapproval => 1,
        };
        let mut rng = substream(
            self.model.seed,
            Stream::Planning,
            &[self.org.index(), side_index, s as u64, a as u64],
        );
        self.model
            .cycle(self.org, self.side, self.grid.center(s), self.grid.center(a), &mut rng)
    }

    /// Next state bin after signaling bin `a` in state bin `s`.
    pub fn transition(&self, s: usize, a: usize) -> Result<usize> {
        Ok(self.grid.bin_of(self.evaluate(s, a)?.next_mean))
    }

    /// Reward and transition tables over every (state, action) pair.
    pub fn tables(&self) -> Result<TabularMdp<f64>> {
        let n = self.grid.bins;
        let rows: Vec<Vec<(f64, usize)>> = (0..n)
            .into_par_iter()
            .map(|s| {
                (0..n)
                    .map(|a| {
                        let r = self.evaluate(s, a)?;
                        Ok((r.reward, self.grid.bin_of(r.next_mean)))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let (reward, next) = rows.into_iter().flatten().unzip();
        TabularMdp::new(n, n, reward, next, self.discount)
    }

    /// Solve by value iteration; among tied actions the one nearest the state wins.
    pub fn solve(&self, tol: f64, max_sweeps: usize) -> Result<SolvedMdp> {
        let mdp = self.tables()?;
        let table = value_iteration_with_ties(&mdp, tol, max_sweeps, |s, a| s.abs_diff(a))?;
        Ok(SolvedMdp { org: self.org, side: self.side, grid: self.grid, mdp, table })
    }
}

/// Immediate-reward surface `R(state, action)` for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub state_centers: Vec<f64>,
    pub action_centers: Vec<f64>,
    /// `rewards[s][a]`.
    pub rewards: Vec<Vec<f64>>,
}

impl Heatmap {
    pub fn max(&self) -> f64 {
        self.rewards.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Deterministic signaling policy on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalingPolicy {
    pub grid: SignalGrid,
    /// Action bin per state bin.
    pub actions: Vec<usize>,
}

/// Signal drawn uniformly inside the action bin the policy assigns to `state_bin`.
pub fn sample_signal<R: Rng + ?Sized>(policy: &SignalingPolicy, state_bin: usize, rng: &mut R) -> f64 {
    let k = policy.actions[state_bin.min(policy.actions.len() - 1)];
    let (l, r) = (policy.grid.left(k), policy.grid.right(k));
    let x = l + (r - l) * rng.random::<f64>();
    // guard the half-open bin against rounding up to its right edge
    if x >= r {
        l
    } else {
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolvedMdp {
    pub org: OrgType,
    pub side: Side,
    pub grid: SignalGrid,
    pub mdp: TabularMdp<f64>,
    pub table: ValueTable<f64>,
}

impl SolvedMdp {
    pub fn policy(&self) -> SignalingPolicy {
        SignalingPolicy { grid: self.grid, actions: self.table.policy.clone() }
    }

    pub fn heatmap(&self) -> Heatmap {
        let n = self.grid.bins;
        Heatmap {
            state_centers: self.grid.centers(),
            action_centers: self.grid.centers(),
            rewards: (0..n).map(|s| (0..n).map(|a| self.mdp.reward(s, a)).collect()).collect(),
        }
    }

    /// Best immediate reward reachable from state bin `s`.
    pub fn max_reward(&self, s: usize) -> f64 {
        (0..self.mdp.n_actions)
            .map(|a| self.mdp.reward(s, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Q-values `Q[s][a]` under the solved value function.
    pub fn q_values(&self) -> Vec<Vec<f64>> {
        let n = self.grid.bins;
        (0..n)
            .map(|s| (0..n).map(|a| self.mdp.q(&self.table.values, s, a)).collect())
            .collect()
    }
}

/// Both signaling problems of one organization, solved.
#[derive(Debug, Clone, PartialEq)]
pub struct OrgPolicies {
    pub org: OrgType,
    pub approval: SolvedMdp,
    pub disapproval: SolvedMdp,
}

impl OrgPolicies {
    pub fn solve(
        org: OrgType,
        model: &PlanningModel,
        bins: usize,
        discount: f64,
        tol: f64,
        max_sweeps: usize,
    ) -> Result<Self> {
        let spec = |side| -> Result<MdpSpec> {
            Ok(MdpSpec { org, side, grid: SignalGrid::new(side, bins)?, discount, model: model.clone() })
        };
        Ok(OrgPolicies {
            org,
            approval: spec(Side::Approval)?.solve(tol, max_sweeps)?,
            disapproval: spec(Side::Disapproval)?.solve(tol, max_sweeps)?,
        })
    }

    pub fn side(&self, side: Side) -> &SolvedMdp {
        match side {
            Side::Approval => &self.approval,
            Side::Disapproval => &self.disapproval,
        }
    }
}
