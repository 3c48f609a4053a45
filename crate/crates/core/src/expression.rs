//! Population-level expression: equilibrium estimate, interim responses and the
//! silence cutoff.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::game::{believed_value, interim_response, symmetric_equilibrium, GameParams, Side};

/// Who expressed in one round and what the expressed opinions average to.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionOutcome {
    pub gammas: Vec<f64>,
    pub expressed: Vec<bool>,
    pub participation: f64,
    pub mean_expressed_approval: Option<f64>,
    pub mean_expressed_disapproval: Option<f64>,
}

impl ExpressionOutcome {
    pub fn mean_expressed(&self, side: Side) -> Option<f64> {
        match side {
            Side::Approval => self.mean_expressed_approval,
            Side::Disapproval => self.mean_expressed_disapproval,
        }
    }
}

/// Memoizes the equilibrium per believed value; agents with identical beliefs
/// share one solve.
#[derive(Debug, Default)]
pub struct EquilibriumCache {
    solved: BTreeMap<u64, f64>,
}

impl EquilibriumCache {
    pub fn equilibrium(&mut self, v_bar: f64, game: &GameParams<f64>) -> Result<f64> {
        if let Some(&g) = self.solved.get(&v_bar.to_bits()) {
            return Ok(g);
        }
        let g = symmetric_equilibrium(v_bar, game)?;
        self.solved.insert(v_bar.to_bits(), g);
        Ok(g)
    }
}

/// Mean of the opinions selected by `keep`, if any.
pub fn mean_where(opinions: &[f64], keep: impl Fn(usize, f64) -> bool) -> Option<f64> {
    let (sum, n) = opinions
        .iter()
        .enumerate()
        .filter(|&(i, &o)| keep(i, o))
        .fold((0.0, 0usize), |(s, n), (_, &o)| (s + o, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Each agent estimates the ex-ante equilibrium from its believed group means
/// `(approval, disapproval)` and best-responds with its own type; responses
/// below `gamma_silence` are silence.
pub fn population_response(
    opinions: &[f64],
    believed_means: impl Fn(usize) -> (f64, f64),
    game: &GameParams<f64>,
    cache: &mut EquilibriumCache,
) -> Result<ExpressionOutcome> {
    let mut gammas = Vec::with_capacity(opinions.len());
    let mut expressed = Vec::with_capacity(opinions.len());
    for (i, &o) in opinions.iter().enumerate() {
        let (approval, disapproval) = believed_means(i);
        let v_bar = believed_value(approval, disapproval, game);
        let star = cache.equilibrium(v_bar, game)?;
        let g = interim_response(o, star, game)?;
        gammas.push(g);
        expressed.push(g >= game.gamma_silence);
    }
    let count = expressed.iter().filter(|&&e| e).count();
    let participation = if opinions.is_empty() { 0.0 } else { count as f64 / opinions.len() as f64 };
    let mean_expressed_approval = mean_where(opinions, |i, o| expressed[i] && Side::of(o) == Side::Approval);
    let mean_expressed_disapproval = mean_where(opinions, |i, o| expressed[i] && Side::of(o) == Side::Disapproval);
    Ok(ExpressionOutcome {
        gammas,
        expressed,
        participation,
        mean_expressed_approval,
        mean_expressed_disapproval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_beliefs_make_expression_monotone_in_type() {
        let game = GameParams::default();
        let opinions: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        let mut cache = EquilibriumCache::default();
        let out = population_response(&opinions, |_| (0.8, 0.2), &game, &mut cache).unwrap();
        for side in [Side::Approval, Side::Disapproval] {
            let mut idx: Vec<usize> = (0..opinions.len()).filter(|&i| Side::of(opinions[i]) == side).collect();
            idx.sort_by(|&i, &j| {
                let vi = crate::game::opinion_value(opinions[i]).unwrap();
                let vj = crate::game::opinion_value(opinions[j]).unwrap();
                vi.total_cmp(&vj)
            });
            let flags: Vec<bool> = idx.iter().map(|&i| out.expressed[i]).collect();
            // once someone expresses, every more extreme agent does too
            if let Some(first) = flags.iter().position(|&e| e) {
                assert!(flags[first..].iter().all(|&e| e), "{side:?}: {flags:?}");
            }
        }
        for (g, e) in out.gammas.iter().zip(&out.expressed) {
            assert_eq!(*e, *g >= 0.3);
        }
    }

    #[test]
    fn means_of_empty_selection() {
        assert_eq!(mean_where(&[0.2, 0.4], |_, o| o > 0.5), None);
        assert!((mean_where(&[0.6, 0.8], |_, o| o > 0.5).unwrap() - 0.7).abs() < 1e-12);
    }
}
