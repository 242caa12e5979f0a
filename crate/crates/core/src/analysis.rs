//! Population statistics, innovator profiling, and the strong-tie
//! adoption-probability procedure.

use std::collections::{BTreeMap, HashMap};

use crate::corpus::CorpusStore;
use crate::error::{PipelineError, Result};
use crate::socialgraph::{tie_strength_histogram, CentralityMap, TieStrengthMap};
use crate::stats::{kl_divergence, mean, spearman, welch_t_test, WelchResult};
use crate::trajectories::InnovationRecord;

pub const HISTOGRAM_BIN_WIDTH: f64 = 0.1;
pub const KL_EPSILON: f64 = 1e-9;

/// Tie-strength groups for the adoption analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Group {
    Strong,
    Weak,
}

impl Group {
    pub fn as_str(&self) -> &'static str {
        match self {
            Group::Strong => "strong",
            Group::Weak => "weak",
        }
    }
}

/// Thresholds and the weak-group reading used by the adoption analysis.
#[derive(Debug, Clone)]
pub struct AdoptionParams {
    pub threshold_strong: f64,
    pub threshold_weak: f64,
    /// When true, a weak month must also contain no strong user, so the
    /// strong and weak treatments are disjoint.
    pub weak_exclusive: bool,
    /// Months of dissemination compared after the run.
    pub post_window: usize,
}

impl Default for AdoptionParams {
    fn default() -> Self {
        AdoptionParams {
            threshold_strong: 0.5,
            threshold_weak: 0.05,
            weak_exclusive: true,
            post_window: 6,
        }
    }
}

/// A k-month run of term usage by one tie-strength group, with the
/// dissemination means before and after it.
#[derive(Debug, Clone)]
pub struct AdoptionEvent {
    pub term: String,
    pub group: Group,
    pub start_t: usize,
    pub run_length: usize,
    pub pre_mean: f64,
    pub post_mean: f64,
}

/// Per-month group qualification for one record's trajectory.
fn qualifying_months(
    rec: &InnovationRecord,
    ties: &[TieStrengthMap],
    params: &AdoptionParams,
    group: Group,
) -> Vec<bool> {
    let intro = rec.candidate.intro_bin;
    (0..rec.dissemination.len())
        .map(|t| {
            let users = &rec.candidate.monthly_user_sets[intro + t];
            if users.is_empty() {
                return false;
            }
            let map = &ties[intro + t];
            match group {
                Group::Strong => users
                    .iter()
                    .any(|&u| map.get(u).unwrap_or(0.0) >= params.threshold_strong),
                Group::Weak => {
                    let any_weak = users
                        .iter()
                        .any(|&u| map.get(u).unwrap_or(0.0) <= params.threshold_weak);
                    if !any_weak {
                        return false;
                    }
                    if params.weak_exclusive {
                        !users
                            .iter()
                            .any(|&u| map.get(u).unwrap_or(0.0) >= params.threshold_strong)
                    } else {
                        true
                    }
                }
            }
        })
        .collect()
}

/// Every index `t_i >= 1` where the group's condition holds for `k`
/// consecutive months and a full post-window follows the run.
pub fn adoption_events(
    rec: &InnovationRecord,
    ties: &[TieStrengthMap],
    params: &AdoptionParams,
    group: Group,
    k: usize,
) -> Vec<AdoptionEvent> {
    assert!(k >= 1);
    let months = qualifying_months(rec, ties, params, group);
    let d = &rec.dissemination;
    let n = d.len();
    let mut out = Vec::new();
    for start in 1..n {
        if start + k + params.post_window > n {
            break;
        }
        if !months[start..start + k].iter().all(|&q| q) {
            continue;
        }
        let pre_mean = mean(&d[..start]);
        let post_mean = mean(&d[start + k..start + k + params.post_window]);
        out.push(AdoptionEvent {
            term: rec.candidate.term.clone(),
            group,
            start_t: start,
            run_length: k,
            pre_mean,
            post_mean,
        });
    }
    out
}

/// Fraction of pooled (group, k) events whose dissemination increased;
/// `None` when no event exists (the missing-cell case).
pub fn dissemination_increase_probability(events: &[AdoptionEvent]) -> Option<f64> {
    if events.is_empty() {
        return None;
    }
    let ups = events.iter().filter(|e| e.post_mean > e.pre_mean).count();
    Some(ups as f64 / events.len() as f64)
}

/// The Appendix-A style probability table pooled across records.
#[derive(Debug, Clone)]
pub struct AdoptionTable {
    pub max_k: usize,
    /// (group, k) -> (probability, event count); probability absent when
    /// no event was found.
    pub cells: BTreeMap<(Group, usize), (Option<f64>, usize)>,
}

pub fn adoption_table(
    records: &[InnovationRecord],
    ties: &[TieStrengthMap],
    params: &AdoptionParams,
    max_k: usize,
) -> AdoptionTable {
    let mut cells = BTreeMap::new();
    for group in [Group::Strong, Group::Weak] {
        for k in 1..=max_k {
            let mut pooled = Vec::new();
            for rec in records {
                pooled.extend(adoption_events(rec, ties, params, group, k));
            }
            cells.insert(
                (group, k),
                (dissemination_increase_probability(&pooled), pooled.len()),
            );
        }
    }
    AdoptionTable { max_k, cells }
}

#[derive(Debug, Clone)]
pub struct InnovatorProfile {
    pub kl: f64,
    pub innovator_histogram: Vec<f64>,
    pub population_histogram: Vec<f64>,
    /// Welch results per variable; `None` when a group had < 2 values.
    pub welch: Vec<(String, Option<WelchResult>)>,
}

/// Compare innovators' tie-strength distribution at their introduction
/// months against the population distribution of those months, and run
/// Welch tests on centralities and posting activity.
pub fn innovator_profile(
    store: &CorpusStore,
    ties: &[TieStrengthMap],
    centralities: &[CentralityMap],
    records: &[InnovationRecord],
) -> Result<InnovatorProfile> {
    if records.len() < 10 {
        return Err(PipelineError::SmallData {
            got: records.len(),
            required: 10,
        });
    }

    let n_bins = (1.0 / HISTOGRAM_BIN_WIDTH).ceil() as usize;
    let mut innovator_ties = Vec::with_capacity(records.len());
    let mut population_histogram = vec![0.0f64; n_bins];

    // Population distribution: mean of the per-intro-month histograms,
    // months weighted by how many introductions they host.
    for rec in records {
        let intro = rec.candidate.intro_bin;
        let map = &ties[intro];
        innovator_ties.push(map.get(rec.candidate.innovator).ok_or_else(|| {
            PipelineError::InconsistentGraph {
                user: store.user_name(rec.candidate.innovator).to_string(),
                bin: intro,
            }
        })?);
        let h = tie_strength_histogram(&map.values, HISTOGRAM_BIN_WIDTH);
        for (acc, m) in population_histogram.iter_mut().zip(h.iter()) {
            *acc += m;
        }
    }
    for m in &mut population_histogram {
        *m /= records.len() as f64;
    }
    let innovator_histogram = tie_strength_histogram(&innovator_ties, HISTOGRAM_BIN_WIDTH);
    let kl = kl_divergence(&innovator_histogram, &population_histogram, KL_EPSILON)?;

    // Welch: innovators vs non-innovators, sampled per intro month and
    // pooled across introductions.
    let post_counts = store.posting_counts();
    let mut samples: [(Vec<f64>, Vec<f64>); 4] = Default::default();
    for rec in records {
        let intro = rec.candidate.intro_bin;
        let cmap = &centralities[intro];
        let counts = &post_counts[intro];
        for (i, &u) in cmap.users.iter().enumerate() {
            let vals = [
                cmap.degree[i],
                cmap.betweenness[i],
                cmap.eigenvector[i],
                counts.get(&u).copied().unwrap_or(0) as f64,
            ];
            let is_innovator = u == rec.candidate.innovator;
            for (s, v) in samples.iter_mut().zip(vals) {
                if is_innovator {
                    s.0.push(v);
                } else {
                    s.1.push(v);
                }
            }
        }
    }
    let names = ["degree", "betweenness", "eigenvector", "post_count"];
    let welch = names
        .iter()
        .zip(samples.iter())
        .map(|(name, (inn, rest))| {
            let res = if inn.len() < 2 || rest.len() < 2 {
                None
            } else {
                welch_t_test(inn, rest).ok()
            };
            (name.to_string(), res)
        })
        .collect();

    Ok(InnovatorProfile {
        kl,
        innovator_histogram,
        population_histogram,
        welch,
    })
}

/// Spearman correlations among per-user metrics, averaged across bins.
/// Metrics: degree, betweenness, eigenvector, tie_strength, post_count.
pub fn metric_correlations(
    store: &CorpusStore,
    ties: &[TieStrengthMap],
    centralities: &[CentralityMap],
) -> BTreeMap<(String, String), f64> {
    let names = ["degree", "betweenness", "eigenvector", "tie_strength", "post_count"];
    let post_counts = store.posting_counts();
    let mut sums: HashMap<(usize, usize), (f64, usize)> = HashMap::new();

    for bin in 0..store.lifespan_months() {
        let cmap = &centralities[bin];
        let tmap = &ties[bin];
        let counts = &post_counts[bin];
        let columns: Vec<Vec<f64>> = vec![
            cmap.degree.clone(),
            cmap.betweenness.clone(),
            cmap.eigenvector.clone(),
            cmap.users.iter().map(|&u| tmap.get(u).unwrap_or(0.0)).collect(),
            cmap.users
                .iter()
                .map(|&u| counts.get(&u).copied().unwrap_or(0) as f64)
                .collect(),
        ];
        for i in 0..names.len() {
            for j in (i + 1)..names.len() {
                if let Ok(Some(rho)) = spearman(&columns[i], &columns[j]) {
                    let e = sums.entry((i, j)).or_insert((0.0, 0));
                    e.0 += rho;
                    e.1 += 1;
                }
            }
        }
    }

    let mut out = BTreeMap::new();
    for ((i, j), (sum, n)) in sums {
        if n > 0 {
            out.insert((names[i].to_string(), names[j].to_string()), sum / n as f64);
        }
    }
    out
}

/// Tie-strength population structure over all bins.
#[derive(Debug, Clone)]
pub struct PopulationSummary {
    /// Mean histogram mass per 0.1-wide bin across months.
    pub mean_histogram: Vec<f64>,
    /// Per-bin standard deviation of the monthly masses.
    pub std_histogram: Vec<f64>,
    /// Shares over all pooled (month, user) values.
    pub share_le_005: f64,
    pub share_le_01: f64,
    pub share_ge_05: f64,
    pub n_values: usize,
}

pub fn population_summary(ties: &[TieStrengthMap]) -> Result<PopulationSummary> {
    if ties.is_empty() {
        return Err(PipelineError::SmallData { got: 0, required: 1 });
    }
    let n_bins = (1.0 / HISTOGRAM_BIN_WIDTH).ceil() as usize;
    let monthly: Vec<Vec<f64>> = ties
        .iter()
        .map(|m| {
            let h = tie_strength_histogram(&m.values, HISTOGRAM_BIN_WIDTH);
            if h.is_empty() {
                vec![0.0; n_bins]
            } else {
                h
            }
        })
        .collect();
    let months = monthly.len() as f64;
    let mut mean_histogram = vec![0.0f64; n_bins];
    for h in &monthly {
        for (acc, m) in mean_histogram.iter_mut().zip(h.iter()) {
            *acc += m;
        }
    }
    for m in &mut mean_histogram {
        *m /= months;
    }
    let std_histogram: Vec<f64> = (0..n_bins)
        .map(|b| {
            let mu = mean_histogram[b];
            (monthly.iter().map(|h| (h[b] - mu) * (h[b] - mu)).sum::<f64>() / months).sqrt()
        })
        .collect();

    let (mut le005, mut le01, mut ge05, mut n) = (0usize, 0usize, 0usize, 0usize);
    for map in ties {
        for &v in &map.values {
            n += 1;
            if v <= 0.05 {
                le005 += 1;
            }
            if v <= 0.1 {
                le01 += 1;
            }
            if v >= 0.5 {
                ge05 += 1;
            }
        }
    }
    if n == 0 {
        return Err(PipelineError::SmallData { got: 0, required: 1 });
    }
    Ok(PopulationSummary {
        mean_histogram,
        std_histogram,
        share_le_005: le005 as f64 / n as f64,
        share_le_01: le01 as f64 / n as f64,
        share_ge_05: ge05 as f64 / n as f64,
        n_values: n,
    })
}
