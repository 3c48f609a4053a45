//! Viewpoint organizations: objectives, the belief-state MDP and its solution.

mod mdp;
mod planning;

pub use mdp::{value_iteration, value_iteration_with_ties, TabularMdp, ValueTable};
pub use planning::{
    sample_signal, CycleResult, Heatmap, MdpSpec, OrgPolicies, PlanningModel, SignalGrid, SignalingPolicy,
    SolvedMdp,
};

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Result};
use crate::expression::ExpressionOutcome;
use crate::game::Side;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrgType {
    /// Maximizes the share of the population that expresses.
    Participatory,
    /// Pushes the expressed approval mean toward 1.
    IdeologicalApproval,
    /// Pushes the expressed disapproval mean toward 0.
    IdeologicalDisapproval,
}

impl OrgType {
    pub const ALL: [OrgType; 3] = [
        OrgType::Participatory,
        OrgType::IdeologicalApproval,
        OrgType::IdeologicalDisapproval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OrgType::Participatory => "participatory",
            OrgType::IdeologicalApproval => "ideological-approval",
            OrgType::IdeologicalDisapproval => "ideological-disapproval",
        }
    }

    /// Ideological organization aligned with an opinion on `side`.
    pub fn ideological_for(side: Side) -> OrgType {
        match side {
            Side::Approval => OrgType::IdeologicalApproval,
            Side::Disapproval => OrgType::IdeologicalDisapproval,
        }
    }

    /// Side an ideological organization favours.
    pub fn favoured_side(self) -> Option<Side> {
        match self {
            OrgType::Participatory => None,
            OrgType::IdeologicalApproval => Some(Side::Approval),
            OrgType::IdeologicalDisapproval => Some(Side::Disapproval),
        }
    }

    pub(crate) fn index(self) -> u64 {
        match self {
            OrgType::Participatory => 0,
            OrgType::IdeologicalApproval => 1,
            OrgType::IdeologicalDisapproval => 2,
        }
    }

    /// Immediate reward of an expression round.
    pub fn reward(self, outcome: &ExpressionOutcome) -> Result<f64> {
        match self {
            OrgType::Participatory => reward_participatory(outcome.participation),
            OrgType::IdeologicalApproval => match outcome.mean_expressed_approval {
                Some(m) => reward_ideological(m),
                None => Ok(-1.0),
            },
            OrgType::IdeologicalDisapproval => match outcome.mean_expressed_disapproval {
                Some(m) => reward_ideological(1.0 - m),
                None => Ok(-1.0),
            },
        }
    }
}

/// `2 * (fraction - 0.5)`.
pub fn reward_participatory<F: Scalar>(expressed_fraction: F) -> Result<F> {
    let f = check_range("expressed_fraction", expressed_fraction, F::zero(), F::one(), "0 <= fraction <= 1")?;
    Ok(F::lit(2.0) * (f - F::lit(0.5)))
}

/// `4 * mean - 3` on the mean expressed opinion of the favoured side, measured
/// toward that side's extreme.
pub fn reward_ideological<F: Scalar>(mean_expressed: F) -> Result<F> {
    let m = check_range("mean_expressed", mean_expressed, F::lit(0.5), F::one(), "0.5 <= mean <= 1")?;
    Ok(F::lit(4.0) * m - F::lit(3.0))
}
