use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use steward_core::config::ExperimentConfig;
use steward_core::experiments::solve_organizations;
use steward_core::organizations::{OrgType, SignalGrid};
use steward_core::platform::*;
use steward_core::stewarding::{sample_population, BeliefInit, MeanSd};
use steward_core::Side;

fn small() -> (PlatformSetup, Organizations) {
    let mut cfg = ExperimentConfig::default();
    cfg.mdp.bins = 10;
    cfg.beliefs.n_samples = 1_000;
    cfg.platform.n_users = 30;
    cfg.platform.timesteps = 8;
    cfg.platform.seeds = 2;
    let orgs = solve_organizations(&cfg, cfg.game().unwrap()).unwrap();
    (cfg.platform_setup().unwrap(), orgs)
}

fn fresh_state(setup: &PlatformSetup) -> PlatformState {
    let init = BeliefInit { spread: setup.platform.belief_spread, ..setup.beliefs };
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    PlatformState::new(sample_population(&setup.opinion_dist, setup.platform.n_users, &init, &mut rng))
}

#[test]
fn ucb_index_by_hand() {
    let arm = ArmStats { pulls: 4, reward: 3.0 };
    let oracle = 0.75 + (2.0 * 10f64.ln() / 4.0).sqrt();
    assert!((ucb_index(&arm, 10) - oracle).abs() < 1e-12);
    let mut s = RecommenderState::new(1);
    s.arms[0] = [ArmStats { pulls: 3, reward: 1.0 }, ArmStats { pulls: 3, reward: 1.0 }];
    assert_eq!(ucb_select(&s, 0), Arm::Participatory);
}

#[test]
fn side_odds_follow_shifted_rewards() {
    assert!((approval_side_probability(1.0, 0.0) - 2.0 / 3.0).abs() < 1e-12);
    assert!((approval_side_probability(0.0, 0.0) - 0.5).abs() < 1e-12);
    assert_eq!(approval_side_probability(-1.0, -1.0), 0.5);
    assert_eq!(approval_side_probability(1.0, -1.0), 1.0);

    let (_, orgs) = small();
    let policies = orgs.get(OrgType::IdeologicalApproval);
    let believed = (0.7, 0.35);
    let best = |side: Side, m: f64| {
        let g = SignalGrid::new(side, 10).unwrap();
        policies.side(side).max_reward(g.bin_of(m))
    };
    let p = approval_side_probability(best(Side::Approval, believed.0), best(Side::Disapproval, believed.1));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 40_000;
    let hits = (0..n).filter(|_| choose_signal_side(policies, believed, &mut rng) == Side::Approval).count();
    let freq = hits as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((freq - p).abs() < 4.0 * se + 1e-12, "{freq} vs {p}");
}

#[test]
fn step_bookkeeping() {
    let (setup, orgs) = small();
    let mut state = fresh_state(&setup);
    for t in 0..setup.platform.timesteps {
        let before = state.clone();
        let steps = platform_step(&mut state, &orgs, &setup, setup.seed).unwrap();
        assert_eq!(state.t, t + 1);
        for (i, s) in steps.iter().enumerate() {
            let u = &state.users[i];
            assert_eq!(u.opinion, before.users[i].opinion);
            assert_eq!(s.org, s.arm.org_for(u.side()));
            if s.arm == Arm::Ideological {
                assert_eq!(s.org.favoured_side(), Some(u.side()));
            }
            assert_eq!(state.recommender.total_pulls(i), t as u64 + 1);
            let credited: f64 = state.recommender.arms[i].iter().map(|a| a.reward).sum();
            let prior: f64 = before.recommender.arms[i].iter().map(|a| a.reward).sum();
            assert_eq!(credited - prior, if s.expressed { 1.0 } else { 0.0 });
            assert_eq!(u.expressed, s.expressed);
            assert_eq!(Side::of(s.signal), s.signal_side);
        }
        for org in [OrgType::Participatory, OrgType::IdeologicalApproval, OrgType::IdeologicalDisapproval] {
            let c = state.community(org);
            let speakers: Vec<usize> = c.record.iter().filter(|r| r.0 == t).map(|r| r.1).collect();
            let oracle: Vec<usize> = (0..steps.len()).filter(|&i| steps[i].expressed && steps[i].org == org).collect();
            assert_eq!(speakers, oracle);
            if let Some(side) = org.favoured_side() {
                assert!(c.members.iter().all(|&i| state.users[i].side() == side));
            }
        }
    }
}

#[test]
fn community_feedback_reaches_only_speakers_and_broadcast_sides() {
    let (setup, orgs) = small();
    let mut state = fresh_state(&setup);
    for _ in 0..4 {
        let before = state.clone();
        let steps = platform_step(&mut state, &orgs, &setup, setup.seed).unwrap();
        let t = before.t;
        for (i, s) in steps.iter().enumerate() {
            for side in [Side::Approval, Side::Disapproval] {
                let gain = state.users[i].belief_about(side).pseudo_count() - before.users[i].belief_about(side).pseudo_count();
                // signal updates keep the pseudo-count, community updates add one
                let voiced = s.expressed
                    && state.community(s.org).broadcast_sides().contains(&side)
                    && state.community(s.org).record.iter().any(|r| r.0 == t && Side::of(r.2) == side);
                let expected = if voiced { 1.0 } else { 0.0 };
                assert!((gain - expected).abs() < 1e-9, "user {i} side {side:?}: gain {gain}");
            }
        }
    }
    assert_eq!(
        state.community(OrgType::IdeologicalDisapproval).broadcast_sides(),
        vec![Side::Disapproval]
    );
    assert_eq!(state.community(OrgType::Participatory).broadcast_sides().len(), 2);
}

#[test]
fn runs_are_reproducible_and_thread_independent() {
    let (setup, orgs) = small();
    let a = run_platform(&setup, &orgs, 21).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| run_platform(&setup, &orgs, 21)).unwrap();
    assert_eq!(a, b);
    let runs = run_platform_seeds(&setup, &orgs).unwrap();
    assert_eq!(runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![setup.seed, setup.seed + 1]);
    assert_eq!(runs[0].steps.len(), setup.platform.timesteps);
}

fn user(opinion: f64, class: UserClass, belief_in: f64, belief_out: f64) -> UserWindow {
    UserWindow { opinion, class, belief_in, belief_out }
}

#[test]
fn community_stats_by_hand() {
    let users = vec![
        user(0.9, UserClass::Ideological, 0.8, 0.1),
        user(0.7, UserClass::Ideological, 0.7, 0.3),
        user(0.2, UserClass::Participatory, 0.3, 0.6),
        user(0.55, UserClass::Silent, 0.9, 0.2),
    ];
    let stats = community_stats(&users);
    assert_eq!(stats.rows.len(), 6);
    let cell = stats.cell(UserClass::Ideological, Side::Approval);
    assert_eq!(cell.count, 2);
    let [o, out, inn] = cell.stats.unwrap();
    assert!((o.mean - 0.8).abs() < 1e-12 && (o.sd - 0.1).abs() < 1e-12);
    assert!((out.mean - 0.2).abs() < 1e-12 && (out.sd - 0.1).abs() < 1e-12);
    assert!((inn.mean - 0.75).abs() < 1e-12 && (inn.sd - 0.05).abs() < 1e-12);
    assert_eq!(stats.cell(UserClass::Silent, Side::Disapproval).stats, None);
    assert_eq!(stats.cell(UserClass::Participatory, Side::Disapproval).count, 1);
}

#[test]
fn effect_sizes_by_hand() {
    let a = MeanSd { mean: 0.3, sd: 0.1 };
    let b = MeanSd { mean: 0.2, sd: 0.1 };
    assert!((cohens_d(a, b).unwrap() - 1.0).abs() < 1e-12);
    // sample variances 0.01 * 10 / 9 each, pooled over 18 degrees of freedom
    let w = cohens_d_weighted(a, 10, b, 10).unwrap();
    let pooled = ((0.01 * 10.0 + 0.01 * 10.0) / 18.0f64).sqrt();
    assert!((w - 0.1 / pooled).abs() < 1e-12);
    assert!(cohens_d(MeanSd { mean: 1.0, sd: 0.0 }, MeanSd { mean: 0.0, sd: 0.0 }).is_err());
}

#[test]
fn battery_by_hand() {
    let users = vec![
        user(0.95, UserClass::Ideological, 0.8, 0.1),
        user(0.05, UserClass::Ideological, 0.2, 0.9),
        user(0.65, UserClass::Participatory, 0.7, 0.35),
        user(0.52, UserClass::Silent, 0.9, 0.3),
        user(0.47, UserClass::Silent, 0.05, 0.6),
    ];
    assert!(battery(&users).passed());
    let no_silent: Vec<UserWindow> = users.iter().copied().filter(|u| u.class != UserClass::Silent).collect();
    let b = battery(&no_silent);
    assert!(b.opinion_ideological_above_participatory);
    assert!(!b.silent_opinion_moderate);
    assert!(!b.passed());
}
