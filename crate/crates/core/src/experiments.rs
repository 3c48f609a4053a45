//! The four experiment commands: each reads a resolved configuration and
//! writes CSV tables plus the configuration itself into an output directory.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::game::{
    best_response, equilibrium_fixed_points, silence_threshold, symmetric_equilibrium, GameParams, Side,
};
use crate::io::{fmt_num, fmt_opt, Table};
use crate::organizations::{OrgPolicies, OrgType, SolvedMdp};
use crate::platform::{
    battery, class_extremity, cohens_d, cohens_d_weighted, community_stats, run_platform_seeds, Arm, Measure,
    Organizations, UserClass, UserWindow,
};
use crate::rng::{substream, Stream};
use crate::stewarding::{run_simulation, MeanSd, SimTrace, StewardingMode};

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

fn prepare(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    let path = out.join(RESOLVED_CONFIG);
    fs::write(&path, cfg.to_toml())?;
    Ok(path)
}

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect()
}

/// One randomized instance of the silence-condition check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremCase {
    pub params: GameParams<f64>,
    pub v_bar: f64,
    pub threshold: f64,
    pub gamma_star: f64,
}

impl TheoremCase {
    pub fn predicted_silent(&self) -> bool {
        self.v_bar < self.threshold
    }

    pub fn observed_silent(&self) -> bool {
        self.gamma_star == 0.0
    }

    pub fn pass(&self) -> bool {
        self.predicted_silent() == self.observed_silent()
    }
}

/// Margin kept between a drawn `v_bar` and the silence threshold.
pub const THRESHOLD_BAND: f64 = 1e-4;

/// Random games (alpha in [0, 2], n_hat in {0.3, 0.5, 0.7}, lambda_in in (1, 3],
/// lambda_out in (0, 1)) with `v_bar` in [0.5, 1] away from the threshold.
pub fn theorem_cases(n: usize, seed: u64) -> Result<Vec<TheoremCase>> {
    let mut rng = substream(seed, Stream::Oracle, &[1]);
    let mut cases = Vec::with_capacity(n);
    while cases.len() < n {
        let alpha = 2.0 * rng.random::<f64>();
        let n_hat = [0.3, 0.5, 0.7][rng.random_range(0..3)];
        let lambda_in = 3.0 - 2.0 * rng.random::<f64>();
        let lambda_out = 1.0 - rng.random::<f64>();
        if lambda_in <= 1.0 || lambda_out <= 0.0 || lambda_out >= 1.0 {
            continue;
        }
        let params = GameParams::new(alpha, lambda_in, lambda_out, n_hat, 0.3)?;
        let v_bar = 0.5 + 0.5 * rng.random::<f64>();
        let threshold = silence_threshold(&params);
        if (v_bar - threshold).abs() <= THRESHOLD_BAND {
            continue;
        }
        let gamma_star = symmetric_equilibrium(v_bar, &params)?;
        cases.push(TheoremCase { params, v_bar, threshold, gamma_star });
    }
    Ok(cases)
}

/// Best-response curves, the equilibrium sweep and optionally the theorem check.
pub fn cmd_equilibrium(cfg: &ExperimentConfig, out: &Path, check_theorem: bool) -> Result<Vec<PathBuf>> {
    let mut files = vec![prepare(cfg, out)?];
    let game = cfg.game()?;
    let e = &cfg.equilibrium;

    let mut curves = Table::new(&["v", "gamma_other", "best_response"]);
    for &v in &e.curve_values {
        for g in grid(0.0, 1.0, e.gamma_points) {
            curves.push(vec![fmt_num(v), fmt_num(g), fmt_num(best_response(g, v, &game)?)]);
        }
    }
    files.push(curves.write(out, "best_response.csv")?);

    let threshold = silence_threshold(&game);
    let mut sweep = Table::new(&["v_bar", "gamma_star", "fixed_points", "silence_threshold", "silent"]);
    for v in grid(0.5, 1.0, e.v_points) {
        let star = symmetric_equilibrium(v, &game)?;
        let roots = equilibrium_fixed_points(v, &game)?;
        sweep.push(vec![
            fmt_num(v),
            fmt_num(star),
            roots.len().to_string(),
            fmt_num(threshold),
            (star == 0.0).to_string(),
        ]);
    }
    files.push(sweep.write(out, "equilibrium.csv")?);

    if check_theorem {
        let cases = theorem_cases(e.theorem_tuples, cfg.seed)?;
        let mut t = Table::new(&[
            "case", "alpha", "n_hat", "lambda_in", "lambda_out", "v_bar", "threshold", "gamma_star", "predicted_silent",
            "observed_silent", "pass",
        ]);
        for (k, c) in cases.iter().enumerate() {
            t.push(vec![
                k.to_string(),
                fmt_num(c.params.alpha),
                fmt_num(c.params.n_hat),
                fmt_num(c.params.lambda_in),
                fmt_num(c.params.lambda_out),
                fmt_num(c.v_bar),
                fmt_num(c.threshold),
                fmt_num(c.gamma_star),
                c.predicted_silent().to_string(),
                c.observed_silent().to_string(),
                c.pass().to_string(),
            ]);
        }
        files.push(t.write(out, "theorem_check.csv")?);
        let failures = cases.iter().filter(|c| !c.pass()).count();
        let mut s = Table::new(&["cases", "failures", "pass"]);
        s.push(vec![cases.len().to_string(), failures.to_string(), (failures == 0).to_string()]);
        files.push(s.write(out, "theorem_summary.csv")?);
    }
    Ok(files)
}

/// Solve all three organizations for `game`.
pub fn solve_organizations(cfg: &ExperimentConfig, game: GameParams<f64>) -> Result<Organizations> {
    let sim = cfg.sim_config(game.alpha, StewardingMode::None)?;
    let model = crate::organizations::PlanningModel { game, ..sim.planning_model(cfg.seed) };
    let m = &cfg.mdp;
    let solve = |org| OrgPolicies::solve(org, &model, m.bins, m.discount, m.tol, m.max_sweeps);
    Ok(Organizations {
        participatory: solve(OrgType::Participatory)?,
        ideological_approval: solve(OrgType::IdeologicalApproval)?,
        ideological_disapproval: solve(OrgType::IdeologicalDisapproval)?,
    })
}

fn policy_tables(solved: &SolvedMdp) -> (Table, Table) {
    let centers = solved.grid.centers();
    let mut policy = Table::new(&["state_center", "action_center", "value"]);
    for (s, &a) in solved.table.policy.iter().enumerate() {
        policy.push(vec![fmt_num(centers[s]), fmt_num(centers[a]), fmt_num(solved.table.values[s])]);
    }
    // rows are states, columns are actions
    let heat = solved.heatmap();
    let mut header = vec!["state_center\\action_center".to_string()];
    header.extend(heat.action_centers.iter().map(|&c| fmt_num(c)));
    let mut heatmap = Table::new(&header);
    for (s, row) in heat.rewards.iter().enumerate() {
        let mut r = vec![fmt_num(heat.state_centers[s])];
        r.extend(row.iter().map(|&x| fmt_num(x)));
        heatmap.push(r);
    }
    (policy, heatmap)
}

/// Optimal signaling policies and reward heatmaps for every organization and side.
pub fn cmd_policy(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let mut files = vec![prepare(cfg, out)?];
    let orgs = solve_organizations(cfg, cfg.game()?)?;
    let mut summary = Table::new(&["org", "side", "iterations", "bellman_residual", "max_reward"]);
    for org in OrgType::ALL {
        for side in [Side::Approval, Side::Disapproval] {
            let solved = orgs.get(org).side(side);
            let (policy, heatmap) = policy_tables(solved);
            let stem = format!("{}_{}", org.name(), side.name());
            files.push(policy.write(out, &format!("policy_{stem}.csv"))?);
            files.push(heatmap.write(out, &format!("heatmap_{stem}.csv"))?);
            let best = (0..solved.grid.bins).map(|s| solved.max_reward(s)).fold(f64::NEG_INFINITY, f64::max);
            summary.push(vec![
                org.name().into(),
                side.name().into(),
                solved.table.iterations.to_string(),
                fmt_num(solved.table.residual),
                fmt_num(best),
            ]);
        }
    }
    files.push(summary.write(out, "policy_summary.csv")?);
    Ok(files)
}

/// Run every (alpha, mode) cell of the steward sweep.
pub fn steward_sweep(cfg: &ExperimentConfig) -> Result<Vec<SimTrace>> {
    let mut traces = Vec::new();
    for &alpha in &cfg.steward.alphas {
        let game = cfg.game()?.with_alpha(alpha);
        let needs_policies = cfg.steward.modes.iter().any(|m| m.org().is_some());
        let orgs = if needs_policies { Some(solve_organizations(cfg, game)?) } else { None };
        for &mode in &cfg.steward.modes {
            let sim = cfg.sim_config(alpha, mode)?;
            let policies = mode.org().and_then(|o| orgs.as_ref().map(|x| x.get(o)));
            traces.push(run_simulation(&sim, policies)?);
        }
    }
    Ok(traces)
}

/// One ordering claim evaluated on terminal batch means.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingCheck {
    pub claim: String,
    pub alpha: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn terminal(traces: &[SimTrace], mode: StewardingMode, alpha: f64) -> Option<&SimTrace> {
    traces.iter().find(|t| t.mode == mode && t.alpha == alpha)
}

/// Participation and distortion orderings across the sweep.
pub fn steward_orderings(traces: &[SimTrace]) -> Vec<OrderingCheck> {
    let mut alphas: Vec<f64> = traces.iter().map(|t| t.alpha).collect();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let ideological = [StewardingMode::IdeologicalApproval, StewardingMode::IdeologicalDisapproval];
    let mut checks = Vec::new();
    let mut push = |claim: String, alpha, lhs: f64, rhs: f64, strict: bool| {
        let holds = if strict { lhs > rhs } else { lhs >= rhs };
        checks.push(OrderingCheck { claim, alpha, lhs, rhs, holds });
    };
    for &alpha in &alphas {
        let part = |m| terminal(traces, m, alpha).map(|t| t.terminal().participation.mean);
        let dist = |m| terminal(traces, m, alpha).map(|t| t.terminal().distortion.mean);
        if let (Some(p), Some(n)) = (part(StewardingMode::Participatory), part(StewardingMode::None)) {
            push("participation participatory > none".into(), Some(alpha), p, n, true);
        }
        for ide in ideological {
            let Some(i) = part(ide) else { continue };
            if let Some(n) = part(StewardingMode::None) {
                push(format!("participation none > {}", ide.name()), Some(alpha), n, i, true);
            }
            let di = dist(ide).expect("same trace");
            for other in [StewardingMode::Participatory, StewardingMode::None] {
                if let Some(d) = dist(other) {
                    push(format!("distortion {} > {}", ide.name(), other.name()), Some(alpha), di, d, true);
                }
            }
        }
    }
    if let (Some(&lo), Some(&hi)) = (alphas.first(), alphas.last()) {
        if lo < hi {
            let modes: std::collections::BTreeSet<StewardingMode> = traces.iter().map(|t| t.mode).collect();
            for mode in modes {
                if let (Some(a), Some(b)) = (terminal(traces, mode, lo), terminal(traces, mode, hi)) {
                    push(
                        format!("participation {} alpha {} >= alpha {}", mode.name(), fmt_num(lo), fmt_num(hi)),
                        None,
                        a.terminal().participation.mean,
                        b.terminal().participation.mean,
                        false,
                    );
                }
            }
        }
    }
    checks
}

fn mean_sd_cells(m: Option<MeanSd>) -> [String; 2] {
    match m {
        Some(m) => [fmt_num(m.mean), fmt_num(m.sd)],
        None => [String::new(), String::new()],
    }
}

/// Stewarding traces, across-batch aggregates and the ordering report.
pub fn cmd_steward(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let mut files = vec![prepare(cfg, out)?];
    let traces = steward_sweep(cfg)?;

    let mut header = vec![
        "batch", "t", "mode", "alpha", "participation", "mean_belief_out_approval_side",
        "mean_belief_out_disapproval_side", "mean_belief_in_approval_side", "mean_belief_in_disapproval_side",
        "mean_expressed_approval", "mean_expressed_disapproval", "distortion", "signal_side", "signal", "accepted",
    ];
    if cfg.steward.record_agents {
        header.push("gammas");
    }
    let mut trace = Table::new(&header);
    let mut agg = Table::new(&[
        "t", "mode", "alpha", "participation_mean", "participation_sd", "belief_out_approval_side_mean",
        "belief_out_approval_side_sd", "belief_out_disapproval_side_mean", "belief_out_disapproval_side_sd",
        "distortion_mean", "distortion_sd",
    ]);
    for tr in &traces {
        for b in &tr.batches {
            for s in &b.steps {
                let mut row = vec![
                    b.batch.to_string(),
                    s.t.to_string(),
                    tr.mode.name().into(),
                    fmt_num(tr.alpha),
                    fmt_num(s.participation),
                    fmt_opt(s.belief_out_approval_side),
                    fmt_opt(s.belief_out_disapproval_side),
                    fmt_opt(s.belief_in_approval_side),
                    fmt_opt(s.belief_in_disapproval_side),
                    fmt_opt(s.mean_expressed_approval),
                    fmt_opt(s.mean_expressed_disapproval),
                    fmt_num(s.distortion),
                    s.signal_side.map_or("", |x| x.name()).into(),
                    fmt_opt(s.signal),
                    s.accepted.to_string(),
                ];
                if cfg.steward.record_agents {
                    let g: Vec<String> = s.gammas.iter().flatten().map(|&x| fmt_num(x)).collect();
                    row.push(g.join(" "));
                }
                trace.push(row);
            }
        }
        for a in &tr.aggregate {
            let mut row = vec![a.t.to_string(), tr.mode.name().into(), fmt_num(tr.alpha)];
            row.extend(mean_sd_cells(Some(a.participation)));
            row.extend(mean_sd_cells(a.belief_out_approval_side));
            row.extend(mean_sd_cells(a.belief_out_disapproval_side));
            row.extend(mean_sd_cells(Some(a.distortion)));
            agg.push(row);
        }
    }
    files.push(trace.write(out, "steward_trace.csv")?);
    files.push(agg.write(out, "steward_aggregate.csv")?);

    let mut report = Table::new(&["claim", "alpha", "lhs", "rhs", "holds"]);
    for c in steward_orderings(&traces) {
        report.push(vec![c.claim, fmt_opt(c.alpha), fmt_num(c.lhs), fmt_num(c.rhs), c.holds.to_string()]);
    }
    files.push(report.write(out, "steward_orderings.csv")?);
    Ok(files)
}

/// Class pairs compared in the effect-size table.
pub const CLASS_PAIRS: [(UserClass, UserClass); 3] = [
    (UserClass::Ideological, UserClass::Participatory),
    (UserClass::Ideological, UserClass::Silent),
    (UserClass::Participatory, UserClass::Silent),
];

/// Cohen's d of `measure` extremity between two classes, if both are populated.
pub fn class_effect(users: &[UserWindow], a: UserClass, b: UserClass, measure: Measure, weighted: bool) -> Option<f64> {
    let xa = class_extremity(users, a, measure);
    let xb = class_extremity(users, b, measure);
    let (ma, mb) = (MeanSd::of(&xa)?, MeanSd::of(&xb)?);
    let d = if weighted { cohens_d_weighted(ma, xa.len(), mb, xb.len()) } else { cohens_d(ma, mb) };
    d.ok()
}

/// Platform runs over all seeds: class summaries, effect sizes, sign-test
/// battery and a participation trace.
pub fn cmd_platform(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let mut files = vec![prepare(cfg, out)?];
    let setup = cfg.platform_setup()?;
    let orgs = solve_organizations(cfg, setup.game)?;
    let runs = run_platform_seeds(&setup, &orgs)?;

    let mut trace = Table::new(&[
        "seed", "t", "participation", "ideological_share", "participatory_members", "ideological_members",
    ]);
    let mut bat = Table::new(&[
        "seed", "opinion_ideological_above_participatory", "belief_out_ideological_above_participatory",
        "silent_opinion_moderate", "silent_belief_in_most_extreme", "pass",
    ]);
    let mut pooled = Vec::new();
    for run in &runs {
        let mut members = [0usize; 2];
        for (t, step) in run.steps.iter().enumerate() {
            for (i, u) in step.iter().enumerate() {
                if u.expressed && !run.steps[..t].iter().any(|s| s[i].expressed && s[i].arm == u.arm) {
                    members[u.arm.index()] += 1;
                }
            }
            let ideological = step.iter().filter(|u| u.arm == Arm::Ideological).count() as f64 / step.len() as f64;
            trace.push(vec![
                run.seed.to_string(),
                t.to_string(),
                fmt_num(run.participation(t)),
                fmt_num(ideological),
                members[0].to_string(),
                members[1].to_string(),
            ]);
        }
        let b = battery(&run.window);
        bat.push(vec![
            run.seed.to_string(),
            b.opinion_ideological_above_participatory.to_string(),
            b.belief_out_ideological_above_participatory.to_string(),
            b.silent_opinion_moderate.to_string(),
            b.silent_belief_in_most_extreme.to_string(),
            b.passed().to_string(),
        ]);
        pooled.extend(run.window.iter().copied());
    }
    files.push(trace.write(out, "platform_trace.csv")?);
    files.push(bat.write(out, "battery.csv")?);

    let stats = community_stats(&pooled);
    let mut t2 = Table::new(&[
        "class", "group", "count", "opinion_mean", "opinion_sd", "belief_out_mean", "belief_out_sd", "belief_in_mean",
        "belief_in_sd", "empty",
    ]);
    for row in &stats.rows {
        let mut r = vec![row.class.name().into(), row.group.name().into(), row.count.to_string()];
        for k in 0..3 {
            r.extend(mean_sd_cells(row.stats.map(|s| s[k])));
        }
        r.push(row.stats.is_none().to_string());
        t2.push(r);
    }
    files.push(t2.write(out, "community_stats.csv")?);

    let weighted = cfg.platform.weighted_cohens_d;
    let mut t3 = Table::new(&["pair", "measure", "cohens_d", "pooling"]);
    for (a, b) in CLASS_PAIRS {
        for m in Measure::ALL {
            t3.push(vec![
                format!("{}-{}", a.name(), b.name()),
                m.name().into(),
                fmt_opt(class_effect(&pooled, a, b, m, weighted)),
                if weighted { "weighted" } else { "unweighted" }.into(),
            ]);
        }
    }
    files.push(t3.write(out, "cohens_d.csv")?);
    Ok(files)
}
