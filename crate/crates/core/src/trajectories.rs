//! Dissemination and tie-strength trajectories, the slope index, and the
//! successful / unsuccessful labels.

use crate::corpus::CorpusStore;
use crate::error::{PipelineError, Result};
use crate::innovations::InnovationCandidate;
use crate::socialgraph::TieStrengthMap;

pub const SLOPE_WINDOW: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Successful,
    Unsuccessful,
    ExcludedMiddle,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Successful => "successful",
            Label::Unsuccessful => "unsuccessful",
            Label::ExcludedMiddle => "excluded-middle",
        }
    }
}

impl std::str::FromStr for Label {
    type Err = PipelineError;
    fn from_str(s: &str) -> Result<Label> {
        match s {
            "successful" => Ok(Label::Successful),
            "unsuccessful" => Ok(Label::Unsuccessful),
            "excluded-middle" => Ok(Label::ExcludedMiddle),
            other => Err(PipelineError::invalid(format!("unknown label `{other}`"))),
        }
    }
}

/// One innovation with its trajectories and label. Both vectors run from
/// the introduction bin to the last retained bin and have equal length.
#[derive(Debug, Clone)]
pub struct InnovationRecord {
    pub candidate: InnovationCandidate,
    pub dissemination: Vec<f64>,
    pub tie_trajectory: Vec<f64>,
    /// `None` when the trajectory is shorter than 12 months.
    pub slope: Option<f64>,
    /// `None` when the trajectory is shorter than 6 months.
    pub final_dissemination: Option<f64>,
    pub label: Label,
}

/// Entry `t` = |users of the term in bin intro+t| / |active users of that bin|.
pub fn dissemination_trajectory(cand: &InnovationCandidate, store: &CorpusStore) -> Vec<f64> {
    (cand.intro_bin..store.lifespan_months())
        .map(|b| {
            let active = store.bins[b].active_users.len();
            if active == 0 {
                0.0
            } else {
                cand.monthly_user_sets[b].len() as f64 / active as f64
            }
        })
        .collect()
}

/// Entry `t` = max tie-strength among the term's users in bin intro+t;
/// 0 when nobody used the term that month.
pub fn tie_strength_trajectory(
    cand: &InnovationCandidate,
    store: &CorpusStore,
    ties: &[TieStrengthMap],
) -> Result<Vec<f64>> {
    (cand.intro_bin..store.lifespan_months())
        .map(|b| {
            let mut best = 0.0f64;
            for &u in &cand.monthly_user_sets[b] {
                let v = ties[b].get(u).ok_or_else(|| PipelineError::InconsistentGraph {
                    user: store.user_name(u).to_string(),
                    bin: b,
                })?;
                if v > best {
                    best = v;
                }
            }
            Ok(best)
        })
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean dissemination over the last six months; `None` on short
/// trajectories (exclusion signal).
pub fn final_dissemination(dissemination: &[f64]) -> Option<f64> {
    if dissemination.len() < SLOPE_WINDOW {
        return None;
    }
    Some(mean(&dissemination[dissemination.len() - SLOPE_WINDOW..]))
}

/// Mean of the last six months minus the mean of the first six; `None`
/// on trajectories shorter than 12 months.
pub fn slope_index(dissemination: &[f64]) -> Option<f64> {
    if dissemination.len() < 2 * SLOPE_WINDOW {
        return None;
    }
    let first = mean(&dissemination[..SLOPE_WINDOW]);
    let last = mean(&dissemination[dissemination.len() - SLOPE_WINDOW..]);
    Some(last - first)
}

/// Compute both trajectories and the per-record indices for every
/// candidate; labels start as excluded-middle until [`label_innovations`].
pub fn build_records(
    candidates: Vec<InnovationCandidate>,
    store: &CorpusStore,
    ties: &[TieStrengthMap],
) -> Result<Vec<InnovationRecord>> {
    candidates
        .into_iter()
        .map(|cand| {
            let dissemination = dissemination_trajectory(&cand, store);
            let tie_trajectory = tie_strength_trajectory(&cand, store, ties)?;
            debug_assert_eq!(dissemination.len(), tie_trajectory.len());
            let slope = slope_index(&dissemination);
            let final_dissemination = final_dissemination(&dissemination);
            Ok(InnovationRecord {
                candidate: cand,
                dissemination,
                tie_trajectory,
                slope,
                final_dissemination,
                label: Label::ExcludedMiddle,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct LabelSummary {
    pub community_mean_slope: f64,
    pub n_successful: usize,
    pub n_unsuccessful: usize,
    pub n_excluded: usize,
    /// The mean slope is expected to be positive on organic data; a
    /// non-positive mean degenerates the successful class.
    pub mean_slope_nonpositive: bool,
}

/// Assign labels: slope <= 0 -> unsuccessful; slope > community mean ->
/// successful; otherwise excluded-middle. Records without a computable
/// slope stay excluded-middle.
pub fn label_innovations(records: &mut [InnovationRecord]) -> Result<LabelSummary> {
    let slopes: Vec<f64> = records.iter().filter_map(|r| r.slope).collect();
    if slopes.len() < 2 {
        return Err(PipelineError::SmallData {
            got: slopes.len(),
            required: 2,
        });
    }
    let community_mean_slope = mean(&slopes);
    let mut summary = LabelSummary {
        community_mean_slope,
        n_successful: 0,
        n_unsuccessful: 0,
        n_excluded: 0,
        mean_slope_nonpositive: community_mean_slope <= 0.0,
    };
    for rec in records.iter_mut() {
        rec.label = match rec.slope {
            Some(s) if s <= 0.0 => Label::Unsuccessful,
            Some(s) if s > community_mean_slope => Label::Successful,
            _ => Label::ExcludedMiddle,
        };
        match rec.label {
            Label::Successful => summary.n_successful += 1,
            Label::Unsuccessful => summary.n_unsuccessful += 1,
            Label::ExcludedMiddle => summary.n_excluded += 1,
        }
    }
    Ok(summary)
}
