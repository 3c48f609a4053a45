use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Finite MDP with deterministic transitions.
///
/// `reward[s * n_actions + a]` and `next[s * n_actions + a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp<F> {
    pub n_states: usize,
    pub n_actions: usize,
    pub reward: Vec<F>,
    pub next: Vec<usize>,
    pub discount: F,
}

impl<F: Scalar> TabularMdp<F> {
    pub fn new(n_states: usize, n_actions: usize, reward: Vec<F>, next: Vec<usize>, discount: F) -> Result<Self> {
        let cells = n_states * n_actions;
        if n_states == 0 || n_actions == 0 || reward.len() != cells || next.len() != cells {
            return Err(Error::Config {
                key: "mdp".into(),
                message: format!("tables must hold {n_states} x {n_actions} cells"),
            });
        }
        if next.iter().any(|&s| s >= n_states) {
            return Err(Error::Config { key: "mdp".into(), message: "transition leaves the state space".into() });
        }
        if !(discount >= F::zero() && discount < F::one()) {
            return Err(Error::Domain {
                name: "discount",
                value: discount.to_f64_lossy(),
                expected: "0 <= discount < 1",
            });
        }
        Ok(TabularMdp { n_states, n_actions, reward, next, discount })
    }

    pub fn reward(&self, s: usize, a: usize) -> F {
        self.reward[s * self.n_actions + a]
    }

    pub fn next(&self, s: usize, a: usize) -> usize {
        self.next[s * self.n_actions + a]
    }

    pub fn q(&self, values: &[F], s: usize, a: usize) -> F {
        self.reward(s, a) + self.discount * values[self.next(s, a)]
    }

    fn backup(&self, values: &[F], s: usize) -> F {
        (0..self.n_actions)
            .map(|a| self.q(values, s, a))
            .fold(F::neg_infinity(), F::max)
    }

    /// `max_s |max_a Q(s, a) - V(s)|`.
    pub fn bellman_residual(&self, values: &[F]) -> F {
        (0..self.n_states)
            .map(|s| (self.backup(values, s) - values[s]).abs())
            .fold(F::zero(), F::max)
    }
}

/// Solved values and the greedy policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable<F> {
    pub values: Vec<F>,
    pub policy: Vec<usize>,
    pub iterations: usize,
    pub residual: F,
}

/// Value iteration; ties in the greedy step go to the lowest action index.
pub fn value_iteration<F: Scalar>(mdp: &TabularMdp<F>, tol: F, max_sweeps: usize) -> Result<ValueTable<F>> {
    value_iteration_with_ties(mdp, tol, max_sweeps, |_, a| a)
}

/// Value iteration from `V = 0` until successive sweeps differ by at most
/// `tol` in sup norm (which bounds the Bellman residual by `discount * tol`).
///
/// Actions whose Q-value lies within `tol` of the best are treated as tied and
/// the one with the smallest `tie_rank(state, action)` is chosen.
pub fn value_iteration_with_ties<F: Scalar>(
    mdp: &TabularMdp<F>,
    tol: F,
    max_sweeps: usize,
    tie_rank: impl Fn(usize, usize) -> usize,
) -> Result<ValueTable<F>> {
    let mut values = vec![F::zero(); mdp.n_states];
    let mut next_values = values.clone();
    let mut iterations = 0;
    let mut delta = F::infinity();
    while iterations < max_sweeps {
        iterations += 1;
        delta = F::zero();
        for s in 0..mdp.n_states {
            next_values[s] = mdp.backup(&values, s);
            delta = delta.max((next_values[s] - values[s]).abs());
        }
        std::mem::swap(&mut values, &mut next_values);
        if delta <= tol {
            break;
        }
    }
    if delta > tol || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::ValueIteration { sweeps: max_sweeps, residual: delta.to_f64_lossy() });
    }

    let policy = (0..mdp.n_states)
        .map(|s| {
            let best = mdp.backup(&values, s);
            (0..mdp.n_actions)
                .filter(|&a| mdp.q(&values, s, a) >= best - tol)
                .min_by_key(|&a| (tie_rank(s, a), a))
                .expect("at least one action attains the maximum")
        })
        .collect();
    let residual = mdp.bellman_residual(&values);
    Ok(ValueTable { values, policy, iterations, residual })
}
