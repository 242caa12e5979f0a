//! Stage orchestration and artifact I/O.
//!
//! Each CLI stage writes its results under an output directory; staged
//! commands that depend on an earlier stage read those artifacts back and
//! fail with [`PipelineError::MissingArtifact`] naming the command to run
//! first. All files are written with fixed headers, fixed column order and
//! fixed float formatting, so repeated runs are byte-identical.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    adoption_table, innovator_profile, metric_correlations, population_summary, AdoptionParams,
    AdoptionTable, InnovatorProfile, PopulationSummary,
};
use crate::corpus::{CorpusStore, IngestReport, UserId};
use crate::error::{PipelineError, Result};
use crate::innovations::{detect_innovations, DetectionParams, InnovationCandidate, Lexicon};
use crate::prediction::{
    build_dataset, build_dataset_from_rows, cross_validate, derive_seed, CVReport, ForestParams,
};
use crate::socialgraph::{
    build_interaction_graph, centralities, tie_strength, CentralityMap, CentralityOptions,
    InteractionGraph, TieStrengthMap,
};
use crate::trajectories::{build_records, label_innovations, InnovationRecord, Label, LabelSummary};

/// Knobs shared by the pipeline stages; defaults follow the standard setup.
#[derive(Debug, Clone)]
pub struct PipelineParams {
    pub window: usize,
    pub min_count: u64,
    pub strong_threshold: f64,
    pub weak_threshold: f64,
    pub weak_exclusive: bool,
    /// Largest run length in the adoption table.
    pub max_k: usize,
    /// Trajectory prefix length used for prediction.
    pub predict_k: usize,
    pub runs: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            window: 2,
            min_count: 10,
            strong_threshold: 0.5,
            weak_threshold: 0.05,
            weak_exclusive: true,
            max_k: 6,
            predict_k: 12,
            runs: 100,
            train_fraction: 0.9,
            seed: 42,
        }
    }
}

impl PipelineParams {
    pub fn adoption(&self) -> AdoptionParams {
        AdoptionParams {
            threshold_strong: self.strong_threshold,
            threshold_weak: self.weak_threshold,
            weak_exclusive: self.weak_exclusive,
            post_window: 6,
        }
    }

    pub fn detection(&self) -> DetectionParams {
        DetectionParams {
            min_count: self.min_count,
            ..Default::default()
        }
    }
}

/// Per-bin graph structure and user metrics.
#[derive(Debug)]
pub struct BinArtifacts {
    pub graphs: Vec<InteractionGraph>,
    pub ties: Vec<TieStrengthMap>,
    pub centralities: Vec<CentralityMap>,
}

/// Build every bin's interaction graph, tie strengths and centralities.
/// Bins are processed in parallel with per-bin derived seeds, so results
/// do not depend on the worker count.
pub fn compute_bins(store: &CorpusStore, params: &PipelineParams) -> BinArtifacts {
    let per_bin: Vec<(InteractionGraph, TieStrengthMap, CentralityMap)> = store
        .bins
        .par_iter()
        .map(|bin| {
            let g = build_interaction_graph(store, bin, params.window);
            let ts = tie_strength(&g);
            let opts = CentralityOptions {
                seed: derive_seed(params.seed, bin.index as u64),
                ..Default::default()
            };
            let cm = centralities(&g, &opts);
            (g, ts, cm)
        })
        .collect();
    let mut graphs = Vec::with_capacity(per_bin.len());
    let mut ties = Vec::with_capacity(per_bin.len());
    let mut cents = Vec::with_capacity(per_bin.len());
    for (g, t, c) in per_bin {
        graphs.push(g);
        ties.push(t);
        cents.push(c);
    }
    BinArtifacts {
        graphs,
        ties,
        centralities: cents,
    }
}

/// Everything the full pipeline produces in memory.
pub struct PipelineOutput {
    pub bins: BinArtifacts,
    pub records: Vec<InnovationRecord>,
    pub label_summary: LabelSummary,
    pub adoption: AdoptionTable,
    /// `None` when fewer than 10 innovations were detected.
    pub profile: Option<InnovatorProfile>,
    pub correlations: std::collections::BTreeMap<(String, String), f64>,
    pub population: PopulationSummary,
    /// `None` when the labelled dataset is too small to cross-validate.
    pub prediction: Option<CVReport>,
}

/// Run every stage in memory: graphs, detection, trajectories, labels,
/// adoption analysis, innovator profile and prediction.
pub fn run_all(
    store: &CorpusStore,
    lexicon: &Lexicon,
    params: &PipelineParams,
) -> Result<PipelineOutput> {
    let bins = compute_bins(store, params);
    let candidates = detect_innovations(store, lexicon, &params.detection())?;
    let mut records = build_records(candidates, store, &bins.ties)?;
    let label_summary = label_innovations(&mut records)?;
    let adoption = adoption_table(&records, &bins.ties, &params.adoption(), params.max_k);
    let profile = match innovator_profile(store, &bins.ties, &bins.centralities, &records) {
        Ok(p) => Some(p),
        Err(PipelineError::SmallData { .. }) => None,
        Err(e) => return Err(e),
    };
    let correlations = metric_correlations(store, &bins.ties, &bins.centralities);
    let population = population_summary(&bins.ties)?;
    let prediction = match build_dataset(&records, params.predict_k) {
        Ok(dataset) => Some(cross_validate(
            &dataset,
            &ForestParams::default(),
            params.runs,
            params.train_fraction,
            params.seed,
        )?),
        Err(PipelineError::SmallData { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(PipelineOutput {
        bins,
        records,
        label_summary,
        adoption,
        profile,
        correlations,
        population,
        prediction,
    })
}

// ---------------------------------------------------------------------------
// Formatting and file helpers
// ---------------------------------------------------------------------------

/// Fixed-precision float formatting shared by every artifact writer.
pub fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn require(path: &Path, producer: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::MissingArtifact {
            path: path.display().to_string(),
            command: producer.to_string(),
        })
    }
}

// ---------------------------------------------------------------------------
// corpus_summary.json
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct BinSummary {
    index: usize,
    year_month: String,
    n_posts: usize,
    n_active_users: usize,
}

#[derive(Serialize, Deserialize)]
struct CorpusSummary {
    community: String,
    n_posts: usize,
    n_users: usize,
    n_bins: usize,
    parsed_lines: usize,
    malformed_lines: usize,
    dropped_bins: usize,
    bins: Vec<BinSummary>,
}

pub fn write_corpus_summary(
    store: &CorpusStore,
    report: &IngestReport,
    out_dir: &Path,
) -> Result<PathBuf> {
    let summary = CorpusSummary {
        community: store.community_name.clone(),
        n_posts: store.posts.len(),
        n_users: store.users.len(),
        n_bins: store.bins.len(),
        parsed_lines: report.parsed,
        malformed_lines: report.malformed,
        dropped_bins: report.dropped_bins,
        bins: store
            .bins
            .iter()
            .map(|b| BinSummary {
                index: b.index,
                year_month: b.year_month(),
                n_posts: b.n_posts(),
                n_active_users: b.active_users.len(),
            })
            .collect(),
    };
    let path = out_dir.join("corpus_summary.json");
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &summary)?;
    w.write_all(b"\n")?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// graph_bins/: per-bin metrics and edge lists
// ---------------------------------------------------------------------------

pub fn write_graph_artifacts(
    store: &CorpusStore,
    bins: &BinArtifacts,
    out_dir: &Path,
) -> Result<PathBuf> {
    let dir = out_dir.join("graph_bins");
    fs::create_dir_all(&dir)?;
    for ((g, ts), cm) in bins.graphs.iter().zip(&bins.ties).zip(&bins.centralities) {
        let mut w = create(&dir.join(format!("metrics_{:04}.csv", g.bin_index)))?;
        writeln!(w, "user,degree,tie_strength,betweenness,eigenvector")?;
        for (i, &u) in g.node_ids.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                store.user_name(u),
                fmt_f(cm.degree[i]),
                fmt_f(ts.values[i]),
                fmt_f(cm.betweenness[i]),
                fmt_f(cm.eigenvector[i]),
            )?;
        }
        let mut w = create(&dir.join(format!("edges_{:04}.tsv", g.bin_index)))?;
        writeln!(w, "user_a\tuser_b")?;
        for (i, neighbours) in g.adj.iter().enumerate() {
            for &j in neighbours {
                if (j as usize) > i {
                    writeln!(
                        w,
                        "{}\t{}",
                        store.user_name(g.node_ids[i]),
                        store.user_name(g.node_ids[j as usize]),
                    )?;
                }
            }
        }
    }
    Ok(dir)
}

// ---------------------------------------------------------------------------
// innovations.json / innovations.csv
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct InnovationJson {
    term: String,
    total_count: u64,
    intro_bin: usize,
    monthly_counts: Vec<u32>,
    /// User names per retained bin; carried so later stages can re-derive
    /// trajectories without rescanning the corpus.
    monthly_users: Vec<Vec<String>>,
    innovator: String,
    innovator_post_id: String,
}

pub fn write_innovations(
    store: &CorpusStore,
    candidates: &[InnovationCandidate],
    out_dir: &Path,
) -> Result<PathBuf> {
    let json: Vec<InnovationJson> = candidates
        .iter()
        .map(|c| InnovationJson {
            term: c.term.clone(),
            total_count: c.total_count,
            intro_bin: c.intro_bin,
            monthly_counts: c.monthly_counts.clone(),
            monthly_users: c
                .monthly_user_sets
                .iter()
                .map(|users| users.iter().map(|&u| store.user_name(u).to_string()).collect())
                .collect(),
            innovator: store.user_name(c.innovator).to_string(),
            innovator_post_id: c.innovator_post_id.clone(),
        })
        .collect();
    let path = out_dir.join("innovations.json");
    let mut w = create(&path)?;
    serde_json::to_writer(&mut w, &json)?;
    w.write_all(b"\n")?;

    let mut w = create(&out_dir.join("innovations.csv"))?;
    writeln!(w, "term,total_count,intro_bin,innovator,innovator_post_id")?;
    for c in candidates {
        writeln!(
            w,
            "{},{},{},{},{}",
            c.term,
            c.total_count,
            c.intro_bin,
            store.user_name(c.innovator),
            c.innovator_post_id,
        )?;
    }
    Ok(path)
}

/// Read `innovations.json` back and re-intern the user names against the
/// given corpus.
pub fn read_innovations(store: &CorpusStore, out_dir: &Path) -> Result<Vec<InnovationCandidate>> {
    let path = out_dir.join("innovations.json");
    require(&path, "innovations")?;
    let json: Vec<InnovationJson> = serde_json::from_reader(File::open(&path)?)?;
    json.into_iter()
        .map(|j| {
            let lookup = |name: &str| -> Result<UserId> {
                store
                    .users
                    .lookup(name)
                    .map(UserId)
                    .ok_or_else(|| {
                        PipelineError::invalid(format!(
                            "user `{name}` from innovations.json is not in this corpus; \
                             rerun `innovations` on the same input"
                        ))
                    })
            };
            let monthly_user_sets = j
                .monthly_users
                .iter()
                .map(|users| users.iter().map(|n| lookup(n)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            let token = store
                .tokens
                .lookup(&j.term)
                .map(crate::corpus::TokenId)
                .ok_or_else(|| {
                    PipelineError::invalid(format!(
                        "term `{}` from innovations.json does not occur in this corpus",
                        j.term
                    ))
                })?;
            Ok(InnovationCandidate {
                term: j.term,
                token,
                total_count: j.total_count,
                intro_bin: j.intro_bin,
                monthly_counts: j.monthly_counts,
                monthly_user_sets,
                innovator: lookup(&j.innovator)?,
                innovator_post_id: j.innovator_post_id,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// trajectories.csv / labels.csv
// ---------------------------------------------------------------------------

pub fn write_trajectories(records: &[InnovationRecord], out_dir: &Path) -> Result<PathBuf> {
    let path = out_dir.join("trajectories.csv");
    let mut w = create(&path)?;
    writeln!(w, "term,offset,bin,dissemination,max_tie_strength")?;
    for rec in records {
        for (t, (&d, &ts)) in rec.dissemination.iter().zip(&rec.tie_trajectory).enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                rec.candidate.term,
                t,
                rec.candidate.intro_bin + t,
                fmt_f(d),
                fmt_f(ts),
            )?;
        }
    }

    let mut w = create(&out_dir.join("labels.csv"))?;
    writeln!(w, "term,slope,final_dissemination,label")?;
    for rec in records {
        writeln!(
            w,
            "{},{},{},{}",
            rec.candidate.term,
            fmt_opt(rec.slope),
            fmt_opt(rec.final_dissemination),
            rec.label.as_str(),
        )?;
    }
    Ok(path)
}

/// `(term, tie trajectory, label)` rows re-read from the trajectory stage.
pub fn read_trajectory_rows(out_dir: &Path) -> Result<Vec<(String, Vec<f64>, Label)>> {
    let traj_path = out_dir.join("trajectories.csv");
    let labels_path = out_dir.join("labels.csv");
    require(&traj_path, "trajectories")?;
    require(&labels_path, "trajectories")?;

    let parse_err = |path: &Path, line: usize, message: &str| PipelineError::MalformedRecord {
        line,
        message: format!("{}: {message}", path.display()),
    };

    let mut ties: Vec<(String, Vec<f64>)> = Vec::new();
    for (i, line) in fs::read_to_string(&traj_path)?.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(parse_err(&traj_path, i + 1, "expected 5 columns"));
        }
        let tie: f64 = fields[4]
            .parse()
            .map_err(|_| parse_err(&traj_path, i + 1, "bad tie strength"))?;
        match ties.last_mut() {
            Some((term, traj)) if term == fields[0] => traj.push(tie),
            _ => ties.push((fields[0].to_string(), vec![tie])),
        }
    }

    let mut rows = Vec::new();
    for (i, line) in fs::read_to_string(&labels_path)?.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(&labels_path, i + 1, "expected 4 columns"));
        }
        let label: Label = fields[3]
            .parse()
            .map_err(|_| parse_err(&labels_path, i + 1, "bad label"))?;
        let traj = ties
            .iter()
            .find(|(t, _)| t == fields[0])
            .map(|(_, v)| v.clone())
            .ok_or_else(|| parse_err(&labels_path, i + 1, "term missing from trajectories.csv"))?;
        rows.push((fields[0].to_string(), traj, label));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// analysis artifacts
// ---------------------------------------------------------------------------

pub fn write_adoption_table(table: &AdoptionTable, out_dir: &Path) -> Result<PathBuf> {
    let path = out_dir.join("adoption_table.csv");
    let mut w = create(&path)?;
    writeln!(w, "group,k,probability,n_events")?;
    for ((group, k), (prob, n)) in &table.cells {
        writeln!(w, "{},{},{},{}", group.as_str(), k, fmt_opt(*prob), n)?;
    }
    Ok(path)
}

pub fn write_tie_distribution(pop: &PopulationSummary, out_dir: &Path) -> Result<PathBuf> {
    let path = out_dir.join("tie_distribution.csv");
    let mut w = create(&path)?;
    writeln!(w, "bin_lo,bin_hi,mean_share,std_share")?;
    for (i, (&m, &s)) in pop.mean_histogram.iter().zip(&pop.std_histogram).enumerate() {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f(i as f64 * 0.1),
            fmt_f((i as f64 + 1.0) * 0.1),
            fmt_f(m),
            fmt_f(s),
        )?;
    }
    Ok(path)
}

pub fn write_analysis_report(
    label_summary: &LabelSummary,
    profile: Option<&InnovatorProfile>,
    correlations: &std::collections::BTreeMap<(String, String), f64>,
    population: &PopulationSummary,
    out_dir: &Path,
) -> Result<PathBuf> {
    let welch = profile.map(|p| {
        p.welch
            .iter()
            .map(|(name, res)| {
                serde_json::json!({
                    "metric": name,
                    "t": res.as_ref().map(|r| r.t),
                    "df": res.as_ref().map(|r| r.df),
                    "p": res.as_ref().map(|r| r.p),
                })
            })
            .collect::<Vec<_>>()
    });
    let correlations: std::collections::BTreeMap<String, f64> = correlations
        .iter()
        .map(|((a, b), rho)| (format!("{a}|{b}"), *rho))
        .collect();
    let report = serde_json::json!({
        "labels": {
            "community_mean_slope": label_summary.community_mean_slope,
            "n_successful": label_summary.n_successful,
            "n_unsuccessful": label_summary.n_unsuccessful,
            "n_excluded": label_summary.n_excluded,
            "mean_slope_nonpositive": label_summary.mean_slope_nonpositive,
        },
        "innovator_profile": profile.map(|p| serde_json::json!({
            "kl_divergence": p.kl,
            "innovator_histogram": p.innovator_histogram,
            "population_histogram": p.population_histogram,
            "welch": welch,
        })),
        "correlations": correlations,
        "population": {
            "share_le_005": population.share_le_005,
            "share_le_01": population.share_le_01,
            "share_ge_05": population.share_ge_05,
            "n_values": population.n_values,
        },
    });
    let path = out_dir.join("analysis_report.json");
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    w.write_all(b"\n")?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// prediction artifacts
// ---------------------------------------------------------------------------

pub fn write_prediction_report(reports: &[CVReport], out_dir: &Path) -> Result<PathBuf> {
    let path = out_dir.join("prediction_report.csv");
    let mut w = create(&path)?;
    writeln!(
        w,
        "k,mean_model_precision,mean_model_recall,mean_model_f1,\
         mean_baseline_precision,mean_baseline_recall,mean_baseline_f1,t,df,p,redraws"
    )?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            fmt_f(r.mean_model.precision),
            fmt_f(r.mean_model.recall),
            fmt_f(r.mean_model.f1),
            fmt_f(r.mean_baseline.precision),
            fmt_f(r.mean_baseline.recall),
            fmt_f(r.mean_baseline.f1),
            fmt_opt(r.paired_t.as_ref().map(|t| t.t)),
            fmt_opt(r.paired_t.as_ref().map(|t| t.df)),
            fmt_opt(r.paired_t.as_ref().map(|t| t.p)),
            r.redraws,
        )?;
    }

    let runs: Vec<serde_json::Value> = reports
        .iter()
        .map(|r| {
            serde_json::json!({
                "k": r.k,
                "runs": r.runs.iter().enumerate().map(|(i, run)| {
                    serde_json::json!({
                        "run": i,
                        "model": {"precision": run.model.precision, "recall": run.model.recall, "f1": run.model.f1},
                        "baseline": {"precision": run.baseline.precision, "recall": run.baseline.recall, "f1": run.baseline.f1},
                    })
                }).collect::<Vec<_>>(),
            })
        })
        .collect();
    let mut w = create(&out_dir.join("prediction_runs.json"))?;
    serde_json::to_writer(&mut w, &runs)?;
    w.write_all(b"\n")?;
    Ok(path)
}

/// Prediction from stage artifacts alone (no corpus needed).
pub fn predict_from_artifacts(out_dir: &Path, params: &PipelineParams) -> Result<CVReport> {
    let rows = read_trajectory_rows(out_dir)?;
    let dataset = build_dataset_from_rows(rows, params.predict_k)?;
    cross_validate(
        &dataset,
        &ForestParams::default(),
        params.runs,
        params.train_fraction,
        params.seed,
    )
}

// ---------------------------------------------------------------------------
// synthetic corpus artifacts
// ---------------------------------------------------------------------------

pub fn write_synth_output(
    out: &crate::synthcommunity::SynthOutput,
    out_dir: &Path,
) -> Result<PathBuf> {
    let corpus_path = out_dir.join("synth_corpus.jsonl");
    let mut w = create(&corpus_path)?;
    for line in &out.records {
        writeln!(w, "{line}")?;
    }

    let mut w = create(&out_dir.join("synth_ground_truth.csv"))?;
    writeln!(w, "term,kind,intro_month,innovator,intended_label")?;
    for gt in &out.ground_truth {
        writeln!(
            w,
            "{},{},{},{},{}",
            gt.term,
            gt.kind.as_str(),
            gt.intro_month,
            gt.innovator,
            gt.intended_label.as_str(),
        )?;
    }

    let mut w = create(&out_dir.join("synth_lexicon.txt"))?;
    for term in &out.lexicon_terms {
        writeln!(w, "{term}")?;
    }
    Ok(corpus_path)
}

/// Write every artifact a full run produces.
pub fn write_all_artifacts(
    store: &CorpusStore,
    report: &IngestReport,
    output: &PipelineOutput,
    out_dir: &Path,
) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    write_corpus_summary(store, report, out_dir)?;
    write_graph_artifacts(store, &output.bins, out_dir)?;
    let candidates: Vec<InnovationCandidate> =
        output.records.iter().map(|r| r.candidate.clone()).collect();
    write_innovations(store, &candidates, out_dir)?;
    write_trajectories(&output.records, out_dir)?;
    write_adoption_table(&output.adoption, out_dir)?;
    write_tie_distribution(&output.population, out_dir)?;
    write_analysis_report(
        &output.label_summary,
        output.profile.as_ref(),
        &output.correlations,
        &output.population,
        out_dir,
    )?;
    if let Some(pred) = &output.prediction {
        write_prediction_report(std::slice::from_ref(pred), out_dir)?;
    }
    Ok(())
}
