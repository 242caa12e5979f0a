//! Corpus ingestion: newline-delimited JSON dumps -> monthly time bins.
//!
//! Posts with unknown authors are dropped, months with too few active
//! users are discarded, and bin indices are reassigned contiguously over
//! the retained months. The resulting [`CorpusStore`] is immutable and
//! shared read-only by every downstream stage.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::{DateTime, Datelike};
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{PipelineError, Result};
use crate::innovations::tokenize;

pub const DELETED_AUTHOR: &str = "[deleted]";

/// Interned user identifier, stable within one [`CorpusStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UserId(pub u32);

/// Interned thread identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ThreadId(pub u32);

/// Interned token identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenId(pub u32);

/// String interner; ids are assigned in first-seen order.
#[derive(Debug, Default, Clone)]
pub struct Interner {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn lookup(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// One comment or submission after normalisation.
#[derive(Debug, Clone)]
pub struct Post {
    pub post_id: String,
    pub author: UserId,
    pub thread: ThreadId,
    pub parent_id: Option<String>,
    /// Seconds since epoch, UTC.
    pub timestamp: i64,
    pub tokens: Vec<TokenId>,
}

/// One calendar month of posts.
#[derive(Debug, Clone)]
pub struct TimeBin {
    /// Index among retained bins, contiguous from 0.
    pub index: usize,
    pub year: i32,
    pub month: u32,
    /// Half-open range into `CorpusStore::posts`.
    pub post_range: (usize, usize),
    /// Sorted set of authors posting in this bin.
    pub active_users: Vec<UserId>,
}

impl TimeBin {
    pub fn year_month(&self) -> String {
        format!("{:04}-{:02}", self.year, self.month)
    }

    pub fn n_posts(&self) -> usize {
        self.post_range.1 - self.post_range.0
    }
}

/// Immutable container for one community's retained posts and bins.
#[derive(Debug, Clone)]
pub struct CorpusStore {
    pub community_name: String,
    pub users: Interner,
    pub threads: Interner,
    pub tokens: Interner,
    /// Sorted by (timestamp, post_id).
    pub posts: Vec<Post>,
    pub bins: Vec<TimeBin>,
}

impl CorpusStore {
    pub fn lifespan_months(&self) -> usize {
        self.bins.len()
    }

    pub fn posts_in(&self, bin: &TimeBin) -> &[Post] {
        &self.posts[bin.post_range.0..bin.post_range.1]
    }

    pub fn user_name(&self, u: UserId) -> &str {
        self.users.get(u.0)
    }

    /// Per-bin post counts by author; absent user means zero.
    pub fn posting_counts(&self) -> Vec<HashMap<UserId, u32>> {
        self.bins
            .iter()
            .map(|bin| {
                let mut counts: HashMap<UserId, u32> = HashMap::new();
                for p in self.posts_in(bin) {
                    *counts.entry(p.author).or_insert(0) += 1;
                }
                counts
            })
            .collect()
    }
}

/// Distinct authors of the posts in a bin.
pub fn active_users(bin: &TimeBin) -> &[UserId] {
    &bin.active_users
}

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub community_name: String,
    pub min_active_users: usize,
    /// When false, thread roots (records without a parent) are skipped.
    pub include_thread_roots: bool,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            community_name: "community".to_string(),
            min_active_users: 200,
            include_thread_roots: true,
        }
    }
}

/// Counters describing what ingestion kept and dropped.
#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub lines: usize,
    pub parsed: usize,
    pub skipped_unknown_author: usize,
    pub skipped_empty_body: usize,
    pub skipped_roots: usize,
    pub malformed: usize,
    pub duplicates: usize,
    pub raw_bins: usize,
    pub dropped_bins: usize,
    /// First few recoverable errors, for diagnostics.
    pub warnings: Vec<String>,
}

/// A record parsed from one JSONL line, before interning.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedPost {
    pub id: String,
    pub author: String,
    pub thread: String,
    pub parent_id: Option<String>,
    pub timestamp: i64,
    pub tokens: Vec<String>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    author: Option<String>,
    link_id: Option<String>,
    #[serde(default)]
    parent_id: Option<String>,
    created_utc: Option<serde_json::Value>,
    body: Option<String>,
}

fn timestamp_from_value(v: &serde_json::Value) -> Option<i64> {
    match v {
        serde_json::Value::Number(n) => n.as_f64().map(|f| f as i64),
        serde_json::Value::String(s) => s.parse::<f64>().ok().map(|f| f as i64),
        _ => None,
    }
}

/// Parse one JSONL record. `Ok(None)` is the skip signal: unknown or
/// deleted author, or an empty body.
pub fn parse_post_record(line: &str, line_no: usize) -> Result<Option<ParsedPost>> {
    let raw: RawRecord =
        serde_json::from_str(line).map_err(|e| PipelineError::MalformedRecord {
            line: line_no,
            message: e.to_string(),
        })?;

    let author = match raw.author {
        Some(a) if !a.is_empty() && a != DELETED_AUTHOR => a,
        _ => return Ok(None),
    };

    let id = raw.id.ok_or(PipelineError::MissingField {
        line: line_no,
        field: "id",
    })?;
    let thread = raw.link_id.ok_or(PipelineError::MissingField {
        line: line_no,
        field: "link_id",
    })?;
    let created = raw.created_utc.ok_or(PipelineError::MissingField {
        line: line_no,
        field: "created_utc",
    })?;
    let body = raw.body.ok_or(PipelineError::MissingField {
        line: line_no,
        field: "body",
    })?;

    let timestamp =
        timestamp_from_value(&created).ok_or_else(|| PipelineError::MalformedRecord {
            line: line_no,
            message: "created_utc is not a number".to_string(),
        })?;
    if timestamp <= 0 {
        return Err(PipelineError::MalformedRecord {
            line: line_no,
            message: format!("non-positive timestamp {timestamp}"),
        });
    }

    let tokens = tokenize(&body);
    if tokens.is_empty() {
        return Ok(None);
    }

    Ok(Some(ParsedPost {
        id,
        author,
        thread,
        parent_id: raw.parent_id,
        timestamp,
        tokens,
    }))
}

fn month_key(ts: i64) -> (i32, u32) {
    // Timestamps are UTC epochs; month boundaries in UTC.
    let dt = DateTime::from_timestamp(ts, 0).expect("timestamp validated at parse time");
    (dt.year(), dt.month())
}

/// Retain bins with enough active users, preserving order.
pub fn filter_bins(bins: Vec<TimeBin>, min_active_users: usize) -> Vec<TimeBin> {
    bins.into_iter()
        .filter(|b| b.active_users.len() >= min_active_users)
        .collect()
}

/// Ingest already-parsed records (arrival order irrelevant to the result,
/// except that the first occurrence of a duplicate post id wins).
pub fn ingest_records(
    mut records: Vec<ParsedPost>,
    config: &IngestConfig,
    report: &mut IngestReport,
) -> Result<CorpusStore> {
    if !config.include_thread_roots {
        let before = records.len();
        records.retain(|r| r.parent_id.is_some());
        report.skipped_roots += before - records.len();
    }

    // Duplicate post ids: first occurrence wins.
    let mut seen: HashSet<&str> = HashSet::with_capacity(records.len());
    let mut keep = vec![false; records.len()];
    for (i, r) in records.iter().enumerate() {
        if seen.insert(r.id.as_str()) {
            keep[i] = true;
        } else {
            report.duplicates += 1;
        }
    }
    let mut records: Vec<ParsedPost> = records
        .into_iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r))
        .collect();

    report.parsed = records.len();

    // Total order over posts; makes ingestion deterministic regardless of
    // record arrival order.
    records.sort_by(|a, b| (a.timestamp, &a.id).cmp(&(b.timestamp, &b.id)));

    let mut users = Interner::default();
    let mut threads = Interner::default();
    let mut tokens = Interner::default();
    let mut posts: Vec<Post> = Vec::with_capacity(records.len());
    for r in records {
        posts.push(Post {
            author: UserId(users.intern(&r.author)),
            thread: ThreadId(threads.intern(&r.thread)),
            parent_id: r.parent_id,
            timestamp: r.timestamp,
            tokens: r.tokens.iter().map(|t| TokenId(tokens.intern(t))).collect(),
            post_id: r.id,
        });
    }

    // Group contiguous runs of posts by calendar month.
    let mut raw_bins: Vec<TimeBin> = Vec::new();
    let mut start = 0usize;
    while start < posts.len() {
        let key = month_key(posts[start].timestamp);
        let mut end = start + 1;
        while end < posts.len() && month_key(posts[end].timestamp) == key {
            end += 1;
        }
        let mut active: Vec<UserId> = posts[start..end].iter().map(|p| p.author).collect();
        active.sort_unstable();
        active.dedup();
        raw_bins.push(TimeBin {
            index: 0,
            year: key.0,
            month: key.1,
            post_range: (start, end),
            active_users: active,
        });
        start = end;
    }
    report.raw_bins = raw_bins.len();

    let mut bins = filter_bins(raw_bins, config.min_active_users);
    report.dropped_bins = report.raw_bins - bins.len();
    if bins.is_empty() {
        return Err(PipelineError::EmptyCorpus {
            min_active_users: config.min_active_users,
        });
    }

    // Compact the post list to retained bins and reindex contiguously.
    let mut kept_posts: Vec<Post> = Vec::new();
    for (i, bin) in bins.iter_mut().enumerate() {
        let new_start = kept_posts.len();
        kept_posts.extend_from_slice(&posts[bin.post_range.0..bin.post_range.1]);
        bin.index = i;
        bin.post_range = (new_start, kept_posts.len());
    }

    Ok(CorpusStore {
        community_name: config.community_name.clone(),
        users,
        threads,
        tokens,
        posts: kept_posts,
        bins,
    })
}

/// Ingest a stream of JSONL lines.
pub fn ingest_lines<I: IntoIterator<Item = String>>(
    lines: I,
    config: &IngestConfig,
) -> Result<(CorpusStore, IngestReport)> {
    let lines: Vec<String> = lines.into_iter().collect();
    let mut report = IngestReport {
        lines: lines.len(),
        ..Default::default()
    };

    let parsed: Vec<Result<Option<ParsedPost>>> = lines
        .par_iter()
        .enumerate()
        .map(|(i, line)| {
            if line.trim().is_empty() {
                return Ok(None);
            }
            parse_post_record(line, i + 1)
        })
        .collect();
    drop(lines);

    let mut records = Vec::with_capacity(parsed.len());
    for item in parsed {
        match item {
            Ok(Some(r)) => records.push(r),
            Ok(None) => report.skipped_unknown_author += 1,
            Err(e) => {
                report.malformed += 1;
                if report.warnings.len() < 20 {
                    report.warnings.push(e.to_string());
                }
            }
        }
    }

    let store = ingest_records(records, config, &mut report)?;
    Ok((store, report))
}

/// Ingest a JSONL file; `.gz` suffixed paths are transparently inflated.
pub fn ingest_path(path: &Path, config: &IngestConfig) -> Result<(CorpusStore, IngestReport)> {
    let file = File::open(path)?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(flate2::read::GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    let lines = BufReader::new(reader)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()?;
    ingest_lines(lines, config)
}

/// Aggregate per-bin, per-user post counts as a sorted map, mainly for
/// reporting and tests.
pub fn posting_counts(store: &CorpusStore) -> BTreeMap<(usize, UserId), u32> {
    let mut out = BTreeMap::new();
    for bin in &store.bins {
        for p in store.posts_in(bin) {
            *out.entry((bin.index, p.author)).or_insert(0) += 1;
        }
    }
    out
}
