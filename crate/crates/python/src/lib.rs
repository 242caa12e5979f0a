//! Python bindings for the lexspread pipeline.
//!
//! Exposes corpus ingestion, the synthetic community generator, the full
//! measurement pipeline and its artifact writer:
//!
//! ```python
//! import lexspread_py as lx
//! sim = lx.simulate(users=280, months=24, driven=40, noise=40, seed=7)
//! corpus = lx.Corpus.from_lines(sim["records"])
//! result = corpus.run(sim["lexicon"])
//! print(result.label_summary())
//! ```

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::json;

use lexspread::analysis::Group;
use lexspread::corpus::{ingest_lines, ingest_path, CorpusStore, IngestConfig, IngestReport};
use lexspread::innovations::Lexicon;
use lexspread::pipeline::{run_all, write_all_artifacts, PipelineOutput, PipelineParams};
use lexspread::synthcommunity::{generate, SynthConfig};

fn py_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Convert a JSON value into the corresponding Python object.
fn to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use pyo3::IntoPyObjectExt;
    Ok(match v {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_py_any(py)?,
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py_any(py)?
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py_any(py)?
            }
        }
        serde_json::Value::String(s) => s.into_py_any(py)?,
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_py_any(py)?
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, val) in map {
                dict.set_item(k, to_py(py, val)?)?;
            }
            dict.into_py_any(py)?
        }
    })
}

fn opt(v: Option<f64>) -> serde_json::Value {
    match v {
        Some(x) => json!(x),
        None => serde_json::Value::Null,
    }
}

/// A parsed corpus, binned into months.
#[pyclass]
struct Corpus {
    store: CorpusStore,
    report: IngestReport,
}

fn ingest_config(min_active_users: usize, community: &str, include_thread_roots: bool) -> IngestConfig {
    IngestConfig {
        community_name: community.to_string(),
        min_active_users,
        include_thread_roots,
    }
}

#[pymethods]
impl Corpus {
    /// Parse JSONL post records from an in-memory list of lines.
    #[staticmethod]
    #[pyo3(signature = (lines, min_active_users=200, community="community", include_thread_roots=true))]
    fn from_lines(
        lines: Vec<String>,
        min_active_users: usize,
        community: &str,
        include_thread_roots: bool,
    ) -> PyResult<Self> {
        let (store, report) =
            ingest_lines(lines, &ingest_config(min_active_users, community, include_thread_roots))
                .map_err(py_err)?;
        Ok(Corpus { store, report })
    }

    /// Parse a JSONL corpus file (optionally gzip-compressed).
    #[staticmethod]
    #[pyo3(signature = (path, min_active_users=200, community="community", include_thread_roots=true))]
    fn from_path(
        path: PathBuf,
        min_active_users: usize,
        community: &str,
        include_thread_roots: bool,
    ) -> PyResult<Self> {
        let (store, report) =
            ingest_path(&path, &ingest_config(min_active_users, community, include_thread_roots))
                .map_err(py_err)?;
        Ok(Corpus { store, report })
    }

    #[getter]
    fn n_posts(&self) -> usize {
        self.store.posts.len()
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.store.users.len()
    }

    #[getter]
    fn n_bins(&self) -> usize {
        self.store.bins.len()
    }

    /// Ingestion counters (parsed, skipped, malformed, ...).
    fn report(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let r = &self.report;
        to_py(
            py,
            &json!({
                "lines": r.lines,
                "parsed": r.parsed,
                "skipped_unknown_author": r.skipped_unknown_author,
                "skipped_empty_body": r.skipped_empty_body,
                "skipped_roots": r.skipped_roots,
                "malformed": r.malformed,
                "duplicates": r.duplicates,
                "raw_bins": r.raw_bins,
                "dropped_bins": r.dropped_bins,
            }),
        )
    }

    /// Run the full pipeline against a lexicon of candidate terms.
    #[pyo3(signature = (
        lexicon,
        seed=42,
        window=2,
        min_count=10,
        strong_threshold=0.5,
        weak_threshold=0.05,
        max_k=6,
        predict_k=12,
        runs=100,
        train_fraction=0.9,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn run(
        slf: &Bound<'_, Self>,
        lexicon: Vec<String>,
        seed: u64,
        window: usize,
        min_count: u64,
        strong_threshold: f64,
        weak_threshold: f64,
        max_k: usize,
        predict_k: usize,
        runs: usize,
        train_fraction: f64,
    ) -> PyResult<PipelineResult> {
        let lexicon = Lexicon::from_terms(lexicon, "python").map_err(py_err)?;
        let params = PipelineParams {
            seed,
            window,
            min_count,
            strong_threshold,
            weak_threshold,
            max_k,
            predict_k,
            runs,
            train_fraction,
            ..Default::default()
        };
        let output = run_all(&slf.borrow().store, &lexicon, &params).map_err(py_err)?;
        Ok(PipelineResult {
            output,
            corpus: slf.clone().unbind(),
        })
    }
}

/// The result of a full pipeline run over one corpus.
#[pyclass]
struct PipelineResult {
    output: PipelineOutput,
    corpus: Py<Corpus>,
}

#[pymethods]
impl PipelineResult {
    /// Label counts and the community mean slope.
    fn label_summary(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let s = &self.output.label_summary;
        to_py(
            py,
            &json!({
                "community_mean_slope": s.community_mean_slope,
                "n_successful": s.n_successful,
                "n_unsuccessful": s.n_unsuccessful,
                "n_excluded": s.n_excluded,
            }),
        )
    }

    /// One dict per detected innovation: term, label, slope, trajectories
    /// and the innovator's user name.
    fn innovations(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let corpus = self.corpus.bind(py).borrow();
        let items: Vec<serde_json::Value> = self
            .output
            .records
            .iter()
            .map(|r| {
                json!({
                    "term": r.candidate.term,
                    "label": r.label.as_str(),
                    "slope": opt(r.slope),
                    "final_dissemination": opt(r.final_dissemination),
                    "total_count": r.candidate.total_count,
                    "intro_bin": r.candidate.intro_bin,
                    "innovator": corpus.store.user_name(r.candidate.innovator),
                    "dissemination": r.dissemination,
                    "tie_trajectory": r.tie_trajectory,
                })
            })
            .collect();
        to_py(py, &serde_json::Value::Array(items))
    }

    /// Adoption probability cells: one dict per (group, k).
    fn adoption_table(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let items: Vec<serde_json::Value> = self
            .output
            .adoption
            .cells
            .iter()
            .map(|(&(group, k), &(prob, n))| {
                let group = match group {
                    Group::Strong => "strong",
                    Group::Weak => "weak",
                };
                json!({"group": group, "k": k, "probability": opt(prob), "n_events": n})
            })
            .collect();
        to_py(py, &serde_json::Value::Array(items))
    }

    /// Spearman correlations between per-user metrics, keyed "a|b".
    fn correlations(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let map: serde_json::Map<String, serde_json::Value> = self
            .output
            .correlations
            .iter()
            .map(|((a, b), rho)| (format!("{a}|{b}"), json!(rho)))
            .collect();
        to_py(py, &serde_json::Value::Object(map))
    }

    /// Population-level tie-strength distribution summary.
    fn population(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let p = &self.output.population;
        to_py(
            py,
            &json!({
                "mean_histogram": p.mean_histogram,
                "std_histogram": p.std_histogram,
                "share_le_005": p.share_le_005,
                "share_le_01": p.share_le_01,
                "share_ge_05": p.share_ge_05,
            }),
        )
    }

    /// Cross-validated prediction scores, or None when the labelled set
    /// was too small.
    fn prediction(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let Some(cv) = &self.output.prediction else {
            return Ok(py.None());
        };
        let t = cv.paired_t.as_ref();
        to_py(
            py,
            &json!({
                "k": cv.k,
                "runs": cv.runs.len(),
                "model": {"precision": cv.mean_model.precision, "recall": cv.mean_model.recall, "f1": cv.mean_model.f1},
                "baseline": {"precision": cv.mean_baseline.precision, "recall": cv.mean_baseline.recall, "f1": cv.mean_baseline.f1},
                "t": opt(t.map(|t| t.t)),
                "p": opt(t.map(|t| t.p)),
                "redraws": cv.redraws,
            }),
        )
    }

    /// Innovator-versus-population profile, or None when there were too
    /// few innovations.
    fn innovator_profile(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let Some(p) = &self.output.profile else {
            return Ok(py.None());
        };
        let welch: Vec<serde_json::Value> = p
            .welch
            .iter()
            .map(|(name, w)| match w {
                Some(w) => json!({"variable": name, "t": w.t, "df": w.df, "p": w.p}),
                None => json!({"variable": name, "t": null, "df": null, "p": null}),
            })
            .collect();
        to_py(
            py,
            &json!({
                "kl": p.kl,
                "innovator_histogram": p.innovator_histogram,
                "population_histogram": p.population_histogram,
                "welch": welch,
            }),
        )
    }

    /// Write the full artifact tree (CSV/TSV/JSON) under `out_dir`.
    fn write_artifacts(&self, py: Python<'_>, out_dir: PathBuf) -> PyResult<()> {
        let corpus = self.corpus.bind(py).borrow();
        write_all_artifacts(&corpus.store, &corpus.report, &self.output, &out_dir).map_err(py_err)
    }
}

/// Generate a synthetic threaded community with planted innovations.
///
/// Returns a dict with `records` (JSONL lines), `lexicon` (planted terms),
/// `ground_truth` (one dict per planted term) and `n_posts`.
#[pyfunction]
#[pyo3(signature = (users=280, months=24, driven=40, noise=40, seed=7))]
fn simulate(
    py: Python<'_>,
    users: usize,
    months: usize,
    driven: usize,
    noise: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let config = SynthConfig::standard(users, months, driven, noise, seed);
    let synth = generate(&config).map_err(py_err)?;
    let gt: Vec<serde_json::Value> = synth
        .ground_truth
        .iter()
        .map(|g| {
            json!({
                "term": g.term,
                "kind": g.kind.as_str(),
                "intro_month": g.intro_month,
                "innovator": g.innovator,
                "intended_label": g.intended_label.as_str(),
            })
        })
        .collect();
    to_py(
        py,
        &json!({
            "records": synth.records,
            "lexicon": synth.lexicon_terms,
            "ground_truth": gt,
            "n_posts": synth.n_posts,
        }),
    )
}

#[pymodule]
fn lexspread_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Corpus>()?;
    m.add_class::<PipelineResult>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
