//! Slang lexicon, tokenisation, and innovation detection.
//!
//! A lexicon term counts as an innovation in a community when it is used
//! often enough overall, is absent from the first months, and is
//! introduced within the initial quarter of the community lifespan. The
//! innovator is the author of the earliest post containing the term.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::corpus::{CorpusStore, TokenId, UserId};
use crate::error::{PipelineError, Result};

/// Lowercase; split on any character outside `[a-z0-9]`; empty tokens
/// dropped. Tokens containing digits are kept for counting but can never
/// match the alphabetic lexicon.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        let lc = ch.to_ascii_lowercase();
        if lc.is_ascii_lowercase() || lc.is_ascii_digit() {
            cur.push(lc);
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Slang lexicon: lowercase alphabetic terms only.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub terms: BTreeSet<String>,
    pub source_path: String,
    /// Entries removed because they contained non-alphabetic characters.
    pub dropped: usize,
}

impl Lexicon {
    pub fn from_terms<I: IntoIterator<Item = String>>(entries: I, source_path: &str) -> Result<Lexicon> {
        let mut terms = BTreeSet::new();
        let mut dropped = 0usize;
        for raw in entries {
            // Optional TAB-separated gloss is ignored.
            let entry = raw.split('\t').next().unwrap_or("").trim().to_lowercase();
            if entry.is_empty() {
                continue;
            }
            if entry.chars().all(|c| c.is_ascii_lowercase()) {
                terms.insert(entry);
            } else {
                dropped += 1;
            }
        }
        if terms.is_empty() {
            return Err(PipelineError::BadLexicon {
                path: source_path.to_string(),
                reason: "no alphabetic terms".to_string(),
            });
        }
        Ok(Lexicon {
            terms,
            source_path: source_path.to_string(),
            dropped,
        })
    }

    pub fn load(path: &Path) -> Result<Lexicon> {
        let text = fs::read_to_string(path)?;
        Lexicon::from_terms(text.lines().map(|s| s.to_string()), &path.display().to_string())
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains(term)
    }
}

/// Detection thresholds; defaults follow the pipeline's standard setup.
#[derive(Debug, Clone)]
pub struct DetectionParams {
    pub min_count: u64,
    pub absent_prefix_months: usize,
    pub intro_quarter: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            min_count: 10,
            absent_prefix_months: 3,
            intro_quarter: 0.25,
        }
    }
}

/// A detected innovation with its monthly usage structure.
#[derive(Debug, Clone)]
pub struct InnovationCandidate {
    pub term: String,
    pub token: TokenId,
    pub total_count: u64,
    /// First retained bin in which the term occurs.
    pub intro_bin: usize,
    /// Occurrences per retained bin.
    pub monthly_counts: Vec<u32>,
    /// Distinct users of the term per retained bin (sorted); length equals
    /// the community lifespan.
    pub monthly_user_sets: Vec<Vec<UserId>>,
    pub innovator: UserId,
    pub innovator_post_id: String,
}

/// Minimum lifespan for trajectory analyses downstream.
pub const MIN_LIFESPAN_BINS: usize = 12;

struct TermAccumulator {
    counts: Vec<u32>,
    users: Vec<BTreeSet<UserId>>,
    first_post: Option<(UserId, String)>,
}

/// Scan the corpus once and return every lexicon term satisfying the
/// three filters, ordered lexicographically by term.
pub fn detect_innovations(
    store: &CorpusStore,
    lexicon: &Lexicon,
    params: &DetectionParams,
) -> Result<Vec<InnovationCandidate>> {
    let lifespan = store.lifespan_months();
    if lifespan < MIN_LIFESPAN_BINS {
        return Err(PipelineError::ShortLifespan {
            got: lifespan,
            required: MIN_LIFESPAN_BINS,
        });
    }

    // Map lexicon terms to token ids actually present in the corpus.
    let mut token_to_term: HashMap<TokenId, usize> = HashMap::new();
    let mut term_names: Vec<&str> = Vec::new();
    for term in &lexicon.terms {
        if let Some(id) = store.tokens.lookup(term) {
            token_to_term.insert(TokenId(id), term_names.len());
            term_names.push(term);
        }
    }

    let mut acc: Vec<TermAccumulator> = term_names
        .iter()
        .map(|_| TermAccumulator {
            counts: vec![0; lifespan],
            users: vec![BTreeSet::new(); lifespan],
            first_post: None,
        })
        .collect();

    for bin in &store.bins {
        for post in store.posts_in(bin) {
            for &tok in &post.tokens {
                if let Some(&ti) = token_to_term.get(&tok) {
                    let a = &mut acc[ti];
                    a.counts[bin.index] += 1;
                    a.users[bin.index].insert(post.author);
                    if a.first_post.is_none() {
                        a.first_post = Some((post.author, post.post_id.clone()));
                    }
                }
            }
        }
    }

    let intro_limit = (params.intro_quarter * lifespan as f64).floor() as usize;
    let mut out = Vec::new();
    for (ti, a) in acc.into_iter().enumerate() {
        let total: u64 = a.counts.iter().map(|&c| c as u64).sum();
        if total < params.min_count {
            continue;
        }
        if a.counts[..params.absent_prefix_months.min(lifespan)]
            .iter()
            .any(|&c| c > 0)
        {
            continue;
        }
        let intro_bin = match a.counts.iter().position(|&c| c > 0) {
            Some(b) => b,
            None => continue,
        };
        if intro_bin >= intro_limit {
            continue;
        }
        let (innovator, innovator_post_id) = a.first_post.expect("total > 0 implies a first post");
        out.push(InnovationCandidate {
            term: term_names[ti].to_string(),
            token: TokenId(store.tokens.lookup(term_names[ti]).unwrap()),
            total_count: total,
            intro_bin,
            monthly_counts: a.counts,
            monthly_user_sets: a.users.into_iter().map(|s| s.into_iter().collect()).collect(),
            innovator,
            innovator_post_id,
        });
    }
    // term_names comes from a BTreeSet, so `out` is already sorted by term.
    Ok(out)
}

/// Author and post id of the earliest post (by `(timestamp, post_id)`)
/// containing `term`; `None` when the term never occurs.
pub fn find_innovator(store: &CorpusStore, term: &str) -> Option<(UserId, String)> {
    let token = TokenId(store.tokens.lookup(term)?);
    store
        .posts
        .iter()
        .find(|p| p.tokens.contains(&token))
        .map(|p| (p.author, p.post_id.clone()))
}
