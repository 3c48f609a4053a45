//! Recommender platform with three organizations: each user is served either
//! the participatory organization or the ideological one aligned with their
//! side, and those who express join that organization's community.

use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beliefs::{beta_update_from_community, update_from_signal, ConstraintWindow, SignalUptake};
use crate::distribution::OpinionDistribution;
use crate::error::{Error, Result};
use crate::expression::{mean_where, population_response, EquilibriumCache};
use crate::game::{GameParams, Side};
use crate::organizations::{sample_signal, OrgPolicies, OrgType};
use crate::rng::{substream, Stream};
use crate::stewarding::{sample_population, Agent, BeliefInit, MeanSd};

/// The two recommender arms every user has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    Participatory,
    /// The ideological organization on the user's own side.
    Ideological,
}

impl Arm {
    pub const ALL: [Arm; 2] = [Arm::Participatory, Arm::Ideological];

    pub fn index(self) -> usize {
        match self {
            Arm::Participatory => 0,
            Arm::Ideological => 1,
        }
    }

    pub fn org_for(self, side: Side) -> OrgType {
        match self {
            Arm::Participatory => OrgType::Participatory,
            Arm::Ideological => OrgType::ideological_for(side),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Arm::Participatory => "participatory",
            Arm::Ideological => "ideological",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ArmStats {
    pub pulls: u64,
    pub reward: f64,
}

impl ArmStats {
    pub fn mean(&self) -> f64 {
        self.reward / self.pulls as f64
    }
}

/// Per-user two-armed UCB1 state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecommenderState {
    pub arms: Vec<[ArmStats; 2]>,
}

impl RecommenderState {
    pub fn new(users: usize) -> Self {
        RecommenderState { arms: vec![[ArmStats::default(); 2]; users] }
    }

    pub fn total_pulls(&self, user: usize) -> u64 {
        self.arms[user].iter().map(|a| a.pulls).sum()
    }

    pub fn credit(&mut self, user: usize, arm: Arm, reward: f64) {
        let a = &mut self.arms[user][arm.index()];
        a.pulls += 1;
        a.reward += reward;
    }
}

/// UCB1 index `mean + sqrt(2 ln t / n)`.
pub fn ucb_index(arm: &ArmStats, t: u64) -> f64 {
    arm.mean() + (2.0 * (t as f64).ln() / arm.pulls as f64).sqrt()
}

/// Unpulled arms first (participatory before ideological), then the larger
/// UCB1 index; ties go to participatory.
pub fn ucb_select(state: &RecommenderState, user: usize) -> Arm {
    let arms = &state.arms[user];
    if let Some(&arm) = Arm::ALL.iter().find(|a| arms[a.index()].pulls == 0) {
        return arm;
    }
    let t = state.total_pulls(user);
    if ucb_index(&arms[1], t) > ucb_index(&arms[0], t) {
        Arm::Ideological
    } else {
        Arm::Participatory
    }
}

/// Probability of signaling about the approval group given the best immediate
/// reward on each side; rewards are shifted by +1 to be nonnegative.
pub fn approval_side_probability(max_approval: f64, max_disapproval: f64) -> f64 {
    let (wa, wd) = ((max_approval + 1.0).max(0.0), (max_disapproval + 1.0).max(0.0));
    if wa + wd == 0.0 {
        0.5
    } else {
        wa / (wa + wd)
    }
}

/// Draw which group's opinion the organization signals about, for a receiver
/// holding `(approval, disapproval)` believed means.
pub fn choose_signal_side<R: Rng + ?Sized>(policies: &OrgPolicies, believed: (f64, f64), rng: &mut R) -> Side {
    let best = |side: Side, mean: f64| {
        let solved = policies.side(side);
        solved.max_reward(solved.grid.bin_of(mean))
    };
    let p = approval_side_probability(best(Side::Approval, believed.0), best(Side::Disapproval, believed.1));
    if rng.random::<f64>() < p {
        Side::Approval
    } else {
        Side::Disapproval
    }
}

/// One organization's digital space.
#[derive(Debug, Clone, PartialEq)]
pub struct Community {
    pub org: OrgType,
    /// Everyone who has ever expressed here.
    pub members: BTreeSet<usize>,
    /// `(t, user, opinion)` for every expression made here.
    pub record: Vec<(usize, usize, f64)>,
}

impl Community {
    pub fn new(org: OrgType) -> Self {
        Community { org, members: BTreeSet::new(), record: Vec::new() }
    }

    /// Sides whose expressed mean this community passes on to its members.
    pub fn broadcast_sides(&self) -> Vec<Side> {
        match self.org.favoured_side() {
            None => vec![Side::Approval, Side::Disapproval],
            Some(side) => vec![side],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlatformConfig {
    pub n_users: usize,
    pub timesteps: usize,
    /// Independent runs; run `k` uses seed `seed + k`.
    pub seeds: usize,
    pub belief_spread: f64,
    /// Pool standard deviations weighted by class size in Cohen's d.
    pub weighted_cohens_d: bool,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        PlatformConfig { n_users: 100, timesteps: 100, seeds: 10, belief_spread: 2.0, weighted_cohens_d: false }
    }
}

/// Everything a platform run needs besides the solved organizations.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatformSetup {
    pub platform: PlatformConfig,
    pub opinion_dist: OpinionDistribution,
    pub game: GameParams<f64>,
    pub window: ConstraintWindow<f64>,
    pub beliefs: BeliefInit,
    pub n_samples: usize,
    pub posterior_bins: usize,
    pub seed: u64,
}

impl PlatformSetup {
    pub fn validate(&self) -> Result<()> {
        let p = &self.platform;
        for (key, v) in [("platform.n_users", p.n_users), ("platform.seeds", p.seeds)] {
            if v == 0 {
                return Err(Error::Config { key: key.into(), message: "must be >= 1".into() });
            }
        }
        if p.timesteps < 2 {
            return Err(Error::Config { key: "platform.timesteps".into(), message: "must be >= 2".into() });
        }
        if !(p.belief_spread >= 0.0 && p.belief_spread.is_finite()) {
            return Err(Error::Config { key: "platform.belief_spread".into(), message: "must be >= 0".into() });
        }
        self.opinion_dist.validate()?;
        self.beliefs.validate()?;
        self.game.validate()
    }
}

/// The three organizations, solved.
#[derive(Debug, Clone, PartialEq)]
pub struct Organizations {
    pub participatory: OrgPolicies,
    pub ideological_approval: OrgPolicies,
    pub ideological_disapproval: OrgPolicies,
}

impl Organizations {
    pub fn get(&self, org: OrgType) -> &OrgPolicies {
        match org {
            OrgType::Participatory => &self.participatory,
            OrgType::IdeologicalApproval => &self.ideological_approval,
            OrgType::IdeologicalDisapproval => &self.ideological_disapproval,
        }
    }

    fn community_index(org: OrgType) -> usize {
        match org {
            OrgType::Participatory => 0,
            OrgType::IdeologicalApproval => 1,
            OrgType::IdeologicalDisapproval => 2,
        }
    }
}

/// What happened to one user in one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserStep {
    pub arm: Arm,
    pub org: OrgType,
    pub signal_side: Side,
    pub signal: f64,
    pub uptake: SignalUptake,
    pub gamma: f64,
    pub expressed: bool,
}

/// Mutable state of one platform run.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatformState {
    pub users: Vec<Agent>,
    pub recommender: RecommenderState,
    /// Participatory, ideological-approval, ideological-disapproval.
    pub communities: [Community; 3],
    pub t: usize,
}

impl PlatformState {
    pub fn new(users: Vec<Agent>) -> Self {
        let n = users.len();
        PlatformState {
            users,
            recommender: RecommenderState::new(n),
            communities: OrgType::ALL.map(Community::new),
            t: 0,
        }
    }

    pub fn community(&self, org: OrgType) -> &Community {
        &self.communities[Organizations::community_index(org)]
    }
}

/// Steps 1 to 3 for one user against the frozen pre-step state.
fn user_step(state: &PlatformState, orgs: &Organizations, setup: &PlatformSetup, seed: u64, i: usize) -> Result<(UserStep, Agent)> {
    let mut user = state.users[i].clone();
    let arm = ucb_select(&state.recommender, i);
    let org = arm.org_for(user.side());
    let policies = orgs.get(org);
    let path = [state.t as u64, i as u64];
    let mut signals = substream(seed, Stream::Signals, &path);
    let side = choose_signal_side(policies, user.believed_means(), &mut signals);
    let solved = policies.side(side);
    let mut jitter = substream(seed, Stream::Jitter, &path);
    let signal = sample_signal(&solved.policy(), solved.grid.bin_of(user.belief_about(side).mean()), &mut jitter);
    let mut post_rng = substream(seed, Stream::Posterior, &path);
    let (updated, uptake) = update_from_signal(
        user.belief_about(side),
        signal,
        &setup.window,
        setup.n_samples,
        setup.posterior_bins,
        &mut post_rng,
    )?;
    *user.belief_about_mut(side) = updated;
    let mut cache = EquilibriumCache::default();
    let out = population_response(&[user.opinion], |_| user.believed_means(), &setup.game, &mut cache)?;
    user.last_gamma = out.gammas[0];
    user.expressed = out.expressed[0];
    let step = UserStep { arm, org, signal_side: side, signal, uptake, gamma: user.last_gamma, expressed: user.expressed };
    Ok((step, user))
}

/// One platform timestep: per-user recommendation, signal and response in
/// parallel, then a sequential commit of memberships, community updates and
/// recommender credit.
pub fn platform_step(
    state: &mut PlatformState,
    orgs: &Organizations,
    setup: &PlatformSetup,
    seed: u64,
) -> Result<Vec<UserStep>> {
    let results = (0..state.users.len())
        .into_par_iter()
        .map(|i| user_step(state, orgs, setup, seed, i))
        .collect::<Result<Vec<_>>>()?;
    let (steps, users): (Vec<UserStep>, Vec<Agent>) = results.into_iter().unzip();
    state.users = users;
    let t = state.t;

    for (i, step) in steps.iter().enumerate() {
        if step.expressed {
            let c = &mut state.communities[Organizations::community_index(step.org)];
            c.members.insert(i);
            c.record.push((t, i, state.users[i].opinion));
        }
        state.recommender.credit(i, step.arm, if step.expressed { 1.0 } else { 0.0 });
    }

    for community in &state.communities {
        let speakers: Vec<usize> = community.record.iter().rev().take_while(|r| r.0 == t).map(|r| r.1).collect();
        if speakers.is_empty() {
            continue;
        }
        let opinions: Vec<f64> = speakers.iter().map(|&i| state.users[i].opinion).collect();
        for side in community.broadcast_sides() {
            let Some(m) = mean_where(&opinions, |_, o| Side::of(o) == side) else {
                continue;
            };
            for &i in &speakers {
                let b = beta_update_from_community(state.users[i].belief_about(side), m)?;
                *state.users[i].belief_about_mut(side) = b;
            }
        }
    }
    state.t += 1;
    Ok(steps)
}

/// Per-user summary over the statistics window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserWindow {
    pub opinion: f64,
    pub class: UserClass,
    pub belief_in: f64,
    pub belief_out: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UserClass {
    Participatory,
    Ideological,
    Silent,
}

impl UserClass {
    pub const ALL: [UserClass; 3] = [UserClass::Participatory, UserClass::Ideological, UserClass::Silent];

    pub fn name(self) -> &'static str {
        match self {
            UserClass::Participatory => "participatory",
            UserClass::Ideological => "ideological",
            UserClass::Silent => "silent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlatformRun {
    pub seed: u64,
    pub state: PlatformState,
    /// `steps[t][user]`.
    pub steps: Vec<Vec<UserStep>>,
    /// Per-user window summaries.
    pub window: Vec<UserWindow>,
}

impl PlatformRun {
    pub fn participation(&self, t: usize) -> f64 {
        let s = &self.steps[t];
        s.iter().filter(|u| u.expressed).count() as f64 / s.len() as f64
    }
}

/// First timestep of the statistics window (the second half of the run).
pub fn window_start(timesteps: usize) -> usize {
    timesteps / 2
}

/// Classify users by where they expressed during the window: the community
/// type with more expressions wins, none is silent, and an even split is
/// settled by `tie_break` (true means ideological).
pub fn classify(steps: &[Vec<UserStep>], from: usize, user: usize, tie_break: impl FnOnce() -> bool) -> UserClass {
    let (mut pa, mut id) = (0usize, 0usize);
    for s in &steps[from..] {
        let u = &s[user];
        if u.expressed {
            match u.arm {
                Arm::Participatory => pa += 1,
                Arm::Ideological => id += 1,
            }
        }
    }
    match (pa, id) {
        (0, 0) => UserClass::Silent,
        (p, i) if i > p => UserClass::Ideological,
        (p, i) if p > i => UserClass::Participatory,
        _ if tie_break() => UserClass::Ideological,
        _ => UserClass::Participatory,
    }
}

/// Run the platform loop once from `seed`.
pub fn run_platform(setup: &PlatformSetup, orgs: &Organizations, seed: u64) -> Result<PlatformRun> {
    let mut rng = substream(seed, Stream::Population, &[]);
    let init = BeliefInit { spread: setup.platform.belief_spread, ..setup.beliefs };
    let users = sample_population(&setup.opinion_dist, setup.platform.n_users, &init, &mut rng);
    let mut state = PlatformState::new(users);
    let from = window_start(setup.platform.timesteps);
    let n = state.users.len();
    let mut sums = vec![(0.0, 0.0); n];
    let mut steps = Vec::with_capacity(setup.platform.timesteps);
    for t in 0..setup.platform.timesteps {
        steps.push(platform_step(&mut state, orgs, setup, seed)?);
        if t >= from {
            for (acc, u) in sums.iter_mut().zip(&state.users) {
                acc.0 += u.belief_in().mean();
                acc.1 += u.belief_out().mean();
            }
        }
    }
    let len = (setup.platform.timesteps - from) as f64;
    let window = (0..n)
        .map(|i| UserWindow {
            opinion: state.users[i].opinion,
            class: classify(&steps, from, i, || substream(seed, Stream::BanditTies, &[i as u64]).random::<bool>()),
            belief_in: sums[i].0 / len,
            belief_out: sums[i].1 / len,
        })
        .collect();
    Ok(PlatformRun { seed, state, steps, window })
}

/// Run every seed of the setup.
pub fn run_platform_seeds(setup: &PlatformSetup, orgs: &Organizations) -> Result<Vec<PlatformRun>> {
    setup.validate()?;
    (0..setup.platform.seeds as u64)
        .map(|k| run_platform(setup, orgs, setup.seed.wrapping_add(k)))
        .collect()
}

/// Measures summarized per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    Opinion,
    BeliefOut,
    BeliefIn,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::Opinion, Measure::BeliefOut, Measure::BeliefIn];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Opinion => "opinion",
            Measure::BeliefOut => "belief_out",
            Measure::BeliefIn => "belief_in",
        }
    }

    pub fn of(self, u: &UserWindow) -> f64 {
        match self {
            Measure::Opinion => u.opinion,
            Measure::BeliefOut => u.belief_out,
            Measure::BeliefIn => u.belief_in,
        }
    }

    /// Distance from 0.5, comparable across the two opinion groups.
    pub fn extremity(self, u: &UserWindow) -> f64 {
        (self.of(u) - 0.5).abs()
    }
}

/// Summary of one (class, opinion group) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSummary {
    pub class: UserClass,
    pub group: Side,
    pub count: usize,
    /// `None` for an empty cell; otherwise opinion, belief_out, belief_in.
    pub stats: Option<[MeanSd; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommunityStats {
    pub rows: Vec<ClassSummary>,
}

impl CommunityStats {
    pub fn cell(&self, class: UserClass, group: Side) -> &ClassSummary {
        self.rows.iter().find(|r| r.class == class && r.group == group).expect("every cell is tabulated")
    }
}

pub fn community_stats(users: &[UserWindow]) -> CommunityStats {
    let mut rows = Vec::new();
    for class in UserClass::ALL {
        for group in [Side::Approval, Side::Disapproval] {
            let cell: Vec<&UserWindow> = users.iter().filter(|u| u.class == class && Side::of(u.opinion) == group).collect();
            let stats = (!cell.is_empty()).then(|| {
                Measure::ALL.map(|m| MeanSd::of(&cell.iter().map(|u| m.of(u)).collect::<Vec<_>>()).expect("non-empty"))
            });
            rows.push(ClassSummary { class, group, count: cell.len(), stats });
        }
    }
    CommunityStats { rows }
}

/// `(mean_a - mean_b) / sqrt((sd_a^2 + sd_b^2) / 2)`.
pub fn cohens_d(a: MeanSd, b: MeanSd) -> Result<f64> {
    let pooled = ((a.sd * a.sd + b.sd * b.sd) / 2.0).sqrt();
    if !(pooled > 0.0) {
        return Err(Error::UndefinedEffect);
    }
    Ok((a.mean - b.mean) / pooled)
}

/// Cohen's d with the pooled variance weighted by `n - 1`.
pub fn cohens_d_weighted(a: MeanSd, na: usize, b: MeanSd, nb: usize) -> Result<f64> {
    if na + nb < 3 {
        return Err(Error::UndefinedEffect);
    }
    // population sds back to sample variances
    let var = |s: MeanSd, n: usize| s.sd * s.sd * n as f64;
    let pooled = ((var(a, na) + var(b, nb)) / (na + nb - 2) as f64).sqrt();
    if !(pooled > 0.0) {
        return Err(Error::UndefinedEffect);
    }
    Ok((a.mean - b.mean) / pooled)
}

/// Extremity samples of `measure` for one class.
pub fn class_extremity(users: &[UserWindow], class: UserClass, measure: Measure) -> Vec<f64> {
    users.iter().filter(|u| u.class == class).map(|u| measure.extremity(u)).collect()
}

/// Verdicts of the four community sign tests for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Battery {
    /// Ideological members hold more extreme opinions than participatory ones.
    pub opinion_ideological_above_participatory: bool,
    /// Ideological members believe the out-group more extreme.
    pub belief_out_ideological_above_participatory: bool,
    /// Silent users' opinions sit within 0.05 of 0.5 on average.
    pub silent_opinion_moderate: bool,
    /// Silent users believe their in-group more extreme than either community does.
    pub silent_belief_in_most_extreme: bool,
}

impl Battery {
    pub fn passed(&self) -> bool {
        self.opinion_ideological_above_participatory
            && self.belief_out_ideological_above_participatory
            && self.silent_opinion_moderate
            && self.silent_belief_in_most_extreme
    }
}

fn mean_of(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sign tests on class means of extremity; a test involving an empty class fails.
pub fn battery(users: &[UserWindow]) -> Battery {
    let m = |class, measure| mean_of(&class_extremity(users, class, measure));
    let gt = |a: Option<f64>, b: Option<f64>| matches!((a, b), (Some(a), Some(b)) if a > b);
    let silent_in = m(UserClass::Silent, Measure::BeliefIn);
    Battery {
        opinion_ideological_above_participatory: gt(
            m(UserClass::Ideological, Measure::Opinion),
            m(UserClass::Participatory, Measure::Opinion),
        ),
        belief_out_ideological_above_participatory: gt(
            m(UserClass::Ideological, Measure::BeliefOut),
            m(UserClass::Participatory, Measure::BeliefOut),
        ),
        silent_opinion_moderate: m(UserClass::Silent, Measure::Opinion).is_some_and(|x| x <= 0.05),
        silent_belief_in_most_extreme: gt(silent_in, m(UserClass::Ideological, Measure::BeliefIn))
            && gt(silent_in, m(UserClass::Participatory, Measure::BeliefIn)),
    }
}
