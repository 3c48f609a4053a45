use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use steward_core::beliefs::SignalUptake;
use steward_core::config::ExperimentConfig;
use steward_core::organizations::*;
use steward_core::stewarding::StewardingMode;
use steward_core::Side;

fn model(n_samples: usize) -> PlanningModel {
    let cfg = ExperimentConfig::default();
    let mut sim = cfg.sim_config(0.6, StewardingMode::None).unwrap();
    sim.n_samples = n_samples;
    sim.planning_model(cfg.seed)
}

/// Exact value of a fixed deterministic policy by following its orbit.
fn policy_value(mdp: &TabularMdp<f64>, policy: &[usize], start: usize) -> f64 {
    let (mut v, mut disc, mut s) = (0.0, 1.0, start);
    for _ in 0..2000 {
        v += disc * mdp.reward(s, policy[s]);
        disc *= mdp.discount;
        s = mdp.next(s, policy[s]);
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn value_iteration_matches_policy_enumeration(
        rewards in prop::collection::vec(-1.0..1.0f64, 6),
        next in prop::collection::vec(0usize..3, 6),
        discount in 0.0..0.95f64,
    ) {
        let mdp = TabularMdp::new(3, 2, rewards, next, discount).unwrap();
        let table = value_iteration(&mdp, 1e-10, 100_000).unwrap();
        for s in 0..3 {
            let mut best = f64::NEG_INFINITY;
            for code in 0..8usize {
                let policy: Vec<usize> = (0..3).map(|k| (code >> k) & 1).collect();
                best = best.max(policy_value(&mdp, &policy, s));
            }
            prop_assert!((table.values[s] - best).abs() < 1e-7, "state {}: {} vs {}", s, table.values[s], best);
            prop_assert!((policy_value(&mdp, &table.policy, s) - best).abs() < 1e-7);
        }
    }

    #[test]
    fn participatory_reward_is_affine(f in 0.0..=1.0f64) {
        prop_assert!((reward_participatory(f).unwrap() - (2.0 * f - 1.0)).abs() < 1e-12);
        prop_assert!(reward_participatory(f).unwrap() >= -1.0 && reward_participatory(f).unwrap() <= 1.0);
    }

    #[test]
    fn ideological_reward_is_affine(m in 0.5..=1.0f64) {
        prop_assert!((reward_ideological(m).unwrap() - (4.0 * m - 3.0)).abs() < 1e-12);
    }
}

#[test]
fn reward_examples() {
    assert_eq!(reward_participatory(1.0).unwrap(), 1.0);
    assert_eq!(reward_participatory(0.5).unwrap(), 0.0);
    assert_eq!(reward_ideological(1.0).unwrap(), 1.0);
    assert_eq!(reward_ideological(0.75).unwrap(), 0.0);
    assert_eq!(reward_ideological(0.5).unwrap(), -1.0);
    assert!(reward_participatory(1.2).is_err());
    assert!(reward_ideological(0.4).is_err());
}

#[test]
fn zero_discount_is_myopic() {
    let spec = MdpSpec {
        org: OrgType::Participatory,
        side: Side::Approval,
        grid: SignalGrid::new(Side::Approval, 10).unwrap(),
        discount: 0.0,
        model: model(2_000),
    };
    let solved = spec.solve(1e-9, 10).unwrap();
    let heat = solved.heatmap();
    for s in 0..10 {
        let best = heat.rewards[s].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((solved.table.values[s] - best).abs() < 1e-12);
        assert!((heat.rewards[s][solved.table.policy[s]] - best).abs() <= 1e-9);
    }
}

#[test]
fn rejected_signal_leaves_state_unchanged() {
    let m = model(2_000);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // window half-width 0.1 around a far signal never reaches a belief centred at 0.6
    let r = m.cycle(OrgType::Participatory, Side::Approval, 0.6, 0.95, &mut rng).unwrap();
    assert_eq!(r.uptake, SignalUptake::OutOfWindow);
    assert_eq!(r.next_mean, 0.6);
    let grid = SignalGrid::new(Side::Approval, 50).unwrap();
    let spec = MdpSpec { org: OrgType::Participatory, side: Side::Approval, grid, discount: 0.9, model: m };
    let s = grid.bin_of(0.6);
    assert_eq!(spec.transition(s, grid.bin_of(0.99)).unwrap(), s);
}

#[test]
fn accepted_signal_moves_state_toward_it() {
    let m = model(10_000);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let r = m.cycle(OrgType::Participatory, Side::Approval, 0.7, 0.75, &mut rng).unwrap();
    assert_eq!(r.uptake, SignalUptake::Accepted);
    assert!(r.next_mean > 0.7, "{}", r.next_mean);
}

#[test]
fn sampled_signals_stay_in_their_bin() {
    let grid = SignalGrid::new(Side::Disapproval, 50).unwrap();
    let policy = SignalingPolicy { grid, actions: (0..50).rev().collect() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for s in [0, 7, 49] {
        let a = policy.actions[s];
        let n = 20_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = sample_signal(&policy, s, &mut rng);
            assert!(x >= grid.left(a) && x < grid.right(a));
            sum += x;
        }
        assert!((sum / n as f64 - grid.center(a)).abs() < 2e-4);
    }
}

#[test]
fn grid_geometry() {
    let a = SignalGrid::new(Side::Approval, 50).unwrap();
    assert!((a.width() - 0.01).abs() < 1e-15);
    assert!((a.center(0) - 0.505).abs() < 1e-12);
    assert_eq!(a.bin_of(1.0), 49);
    assert_eq!(a.bin_of(0.5), 0);
    let d = SignalGrid::new(Side::Disapproval, 50).unwrap();
    assert_eq!(d.bin_of(0.0), 0);
    assert_eq!(d.bin_of(0.4999), 49);
    assert!(SignalGrid::new(Side::Approval, 0).is_err());
}

#[test]
fn full_grid_converges() {
    let cfg = ExperimentConfig::default();
    let spec = MdpSpec {
        org: OrgType::IdeologicalApproval,
        side: Side::Approval,
        grid: SignalGrid::new(Side::Approval, cfg.mdp.bins).unwrap(),
        discount: cfg.mdp.discount,
        model: model(cfg.beliefs.n_samples),
    };
    let solved = spec.solve(cfg.mdp.tol, cfg.mdp.max_sweeps).unwrap();
    assert!(solved.table.residual <= 1e-6, "{}", solved.table.residual);
    let heat = solved.heatmap();
    assert_eq!(heat.rewards.len(), 50);
    assert!(heat.rewards.iter().all(|row| row.len() == 50));
    assert!(heat.rewards.iter().flatten().all(|r| (-1.0..=1.0).contains(r)));
    assert_eq!(solved.policy().actions.len(), 50);
}

#[test]
fn solving_is_deterministic() {
    let spec = MdpSpec {
        org: OrgType::Participatory,
        side: Side::Disapproval,
        grid: SignalGrid::new(Side::Disapproval, 12).unwrap(),
        discount: 0.9,
        model: model(2_000),
    };
    assert_eq!(spec.solve(1e-6, 10_000).unwrap(), spec.solve(1e-6, 10_000).unwrap());
}
