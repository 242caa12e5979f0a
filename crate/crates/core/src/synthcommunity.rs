//! Synthetic community generator with known ground truth.
//!
//! Topology: close-knit cliques (members interact almost exclusively with
//! each other, which drives their neighbourhood overlap toward 1) plus a
//! large mixing crowd whose members post across many threads (high degree,
//! low overlap, hence weak ties). Planted innovations come in two kinds:
//! `driven` terms are introduced by an innovator and then sustained by
//! clique members while crowd adoption ramps up; `noise` terms are carried
//! by a few weak-tie users and fade out.
//!
//! The generated corpus is emitted in the ingestion JSONL format together
//! with a ground-truth table, and is fully deterministic per master seed.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PipelineError, Result};
use crate::trajectories::Label;

/// Organic vocabulary; planted terms must stay disjoint from this list.
const WORDLIST: &[&str] = &[
    "the", "and", "that", "this", "with", "have", "from", "they", "will", "what", "about",
    "which", "when", "there", "think", "just", "like", "really", "game", "team", "play",
    "year", "time", "good", "great", "people", "thing", "know", "want", "look", "first",
    "also", "after", "them", "some", "other", "than", "then", "over", "such", "only",
    "most", "made", "make", "well", "back", "even", "here", "much", "before", "still",
    "never", "maybe", "every", "those", "being", "both", "while", "since", "right",
    "point", "season", "player", "match", "score", "round", "price", "thread", "post",
    "comment", "reply", "agree", "wrong", "better", "worse", "best", "same", "different",
    "actually", "probably", "though", "always", "pretty", "sure", "guess", "sounds",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnovationKind {
    Driven,
    Noise,
}

impl InnovationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            InnovationKind::Driven => "driven",
            InnovationKind::Noise => "noise",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnovatorKind {
    Hub,
    Peripheral,
    CliqueMember,
}

#[derive(Debug, Clone)]
pub struct PlantedInnovation {
    pub term: String,
    pub kind: InnovationKind,
    pub intro_month: usize,
    pub innovator_profile: InnovatorKind,
    /// Months of guaranteed clique usage after introduction (driven only;
    /// clique adoption is sustained beyond the run).
    pub strong_run_length: usize,
    /// Fraction of the crowd adopting a driven term at the plateau.
    pub adoption_rate: f64,
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_cliques: usize,
    pub clique_size_range: (usize, usize),
    /// Per clique and month, the probability that one crowd user drops a
    /// bridge post into the clique thread.
    pub bridge_probability: f64,
    pub months: usize,
    /// Uniform range of monthly posts per crowd user.
    pub posts_per_user_range: (usize, usize),
    pub thread_len: usize,
    pub innovations: Vec<PlantedInnovation>,
    pub master_seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.months < 16 {
            return Err(PipelineError::invalid("months must be >= 16"));
        }
        if self.clique_size_range.0 < 3
            || self.clique_size_range.1 > 5
            || self.clique_size_range.0 > self.clique_size_range.1
        {
            // Two rounds of in-clique posting only close all pairs for
            // sizes up to 5 under the default window.
            return Err(PipelineError::invalid("clique sizes must be within 3..=5"));
        }
        for inn in &self.innovations {
            if inn.intro_month < 3 || inn.intro_month * 4 >= self.months {
                return Err(PipelineError::invalid(format!(
                    "planted term `{}` must be introduced in months 3..{}",
                    inn.term,
                    self.months / 4
                )));
            }
            if WORDLIST.contains(&inn.term.as_str()) {
                return Err(PipelineError::invalid(format!(
                    "planted term `{}` collides with the organic vocabulary",
                    inn.term
                )));
            }
            if !inn.term.chars().all(|c| c.is_ascii_lowercase()) {
                return Err(PipelineError::invalid(format!(
                    "planted term `{}` must be alphabetic",
                    inn.term
                )));
            }
        }
        Ok(())
    }

    /// A ready-made configuration: `n_driven` successful-by-construction
    /// terms and `n_noise` fading terms, intro months cycling over the
    /// admissible early window.
    pub fn standard(
        n_users: usize,
        months: usize,
        n_driven: usize,
        n_noise: usize,
        master_seed: u64,
    ) -> SynthConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ 0xC0FFEE);
        let intro_hi = (months / 4).saturating_sub(1).max(4);
        let mut innovations = Vec::new();
        for i in 0..n_driven {
            innovations.push(PlantedInnovation {
                term: format!("zd{}", alpha_suffix(i)),
                kind: InnovationKind::Driven,
                intro_month: 3 + i % (intro_hi - 3),
                innovator_profile: InnovatorKind::Hub,
                strong_run_length: 6,
                adoption_rate: 0.3 + 0.3 * rng.random::<f64>(),
            });
        }
        for i in 0..n_noise {
            innovations.push(PlantedInnovation {
                term: format!("zn{}", alpha_suffix(i)),
                kind: InnovationKind::Noise,
                intro_month: 3 + i % (intro_hi - 3),
                innovator_profile: InnovatorKind::Peripheral,
                strong_run_length: 0,
                adoption_rate: 0.0,
            });
        }
        SynthConfig {
            n_users,
            n_cliques: (n_users / 28).max(4),
            clique_size_range: (4, 5),
            bridge_probability: 0.3,
            months,
            posts_per_user_range: (12, 16),
            thread_len: 25,
            innovations,
            master_seed,
        }
    }
}

fn alpha_suffix(mut i: usize) -> String {
    let mut s = String::new();
    for _ in 0..4 {
        s.push((b'a' + (i % 26) as u8) as char);
        i /= 26;
    }
    s
}

/// Static social structure: clique membership and crowd roles.
#[derive(Debug, Clone)]
pub struct Network {
    pub user_names: Vec<String>,
    pub cliques: Vec<Vec<usize>>,
    /// Crowd users eligible for bridge posts and organic adoption.
    pub crowd: Vec<usize>,
    /// Crowd users never used for bridges; planted weak-tie users come
    /// from here so their tie-strength stays low.
    pub reserved: Vec<usize>,
    pub hubs: Vec<usize>,
}

pub fn generate_network(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Network> {
    let user_names: Vec<String> = (0..config.n_users).map(|i| format!("user{i:05}")).collect();
    let mut cliques = Vec::with_capacity(config.n_cliques);
    let mut next = 0usize;
    let (lo, hi) = config.clique_size_range;
    for _ in 0..config.n_cliques {
        let size = rng.random_range(lo..=hi);
        if next + size > config.n_users {
            break;
        }
        cliques.push((next..next + size).collect());
        next += size;
    }
    let crowd_all: Vec<usize> = (next..config.n_users).collect();
    if crowd_all.len() < 50 {
        return Err(PipelineError::invalid(
            "not enough crowd users; lower n_cliques or raise n_users",
        ));
    }
    let n_reserved = crowd_all.len() * 35 / 100;
    let reserved = crowd_all[..n_reserved].to_vec();
    let crowd = crowd_all[n_reserved..].to_vec();
    let hubs = crowd[..10.min(crowd.len())].to_vec();
    Ok(Network {
        user_names,
        cliques,
        crowd,
        reserved,
        hubs,
    })
}

struct SimPost {
    author: usize,
    thread: usize,
    words: Vec<String>,
}

struct MonthSim {
    posts: Vec<SimPost>,
    /// Post indices per author, in timestamp order.
    by_author: HashMap<usize, Vec<usize>>,
    n_threads: usize,
}

fn shuffle<T>(v: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

fn organic_words(rng: &mut ChaCha8Rng) -> Vec<String> {
    let n = rng.random_range(5..=9);
    (0..n)
        .map(|_| WORDLIST[rng.random_range(0..WORDLIST.len())].to_string())
        .collect()
}

/// One month of threads: clique threads (two rounds per clique, optional
/// crowd bridge post at the end) and shuffled crowd threads.
fn simulate_month(config: &SynthConfig, network: &Network, rng: &mut ChaCha8Rng) -> MonthSim {
    let mut posts: Vec<SimPost> = Vec::new();
    let mut n_threads = 0usize;

    for clique in &network.cliques {
        let thread = n_threads;
        n_threads += 1;
        let mut order = clique.clone();
        shuffle(&mut order, rng);
        for round in 0..2 {
            let _ = round;
            for &member in &order {
                posts.push(SimPost {
                    author: member,
                    thread,
                    words: organic_words(rng),
                });
            }
        }
        if rng.random::<f64>() < config.bridge_probability {
            let visitor = network.crowd[rng.random_range(0..network.crowd.len())];
            posts.push(SimPost {
                author: visitor,
                thread,
                words: organic_words(rng),
            });
        }
    }

    // Peripheral pairs: each reserved pair exchanges one private two-post
    // thread. Both endpoints end the month with degree 1, so the overlap
    // denominator is zero and their tie strength is exactly 0, the
    // weakest possible tie. An odd leftover user posts a solo root
    // (isolated, also tie 0).
    for pair in network.reserved.chunks(2) {
        let thread = n_threads;
        n_threads += 1;
        for &u in pair {
            posts.push(SimPost {
                author: u,
                thread,
                words: organic_words(rng),
            });
        }
    }

    // Crowd slots: every crowd user posts several times, hubs three times
    // as often; slots are shuffled into fixed-length threads, which mixes
    // neighbourhoods and keeps overlap far from both extremes.
    let (pmin, pmax) = config.posts_per_user_range;
    let mut slots: Vec<usize> = Vec::new();
    for &u in network.crowd.iter() {
        let mut p = rng.random_range(pmin..=pmax);
        if network.hubs.contains(&u) {
            p *= 3;
        }
        for _ in 0..p {
            slots.push(u);
        }
    }
    shuffle(&mut slots, rng);
    for chunk in slots.chunks(config.thread_len) {
        let thread = n_threads;
        n_threads += 1;
        for &u in chunk {
            posts.push(SimPost {
                author: u,
                thread,
                words: organic_words(rng),
            });
        }
    }

    let mut by_author: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, p) in posts.iter().enumerate() {
        by_author.entry(p.author).or_default().push(i);
    }
    MonthSim {
        posts,
        by_author,
        n_threads,
    }
}

#[derive(Debug, Clone)]
pub struct GroundTruthEntry {
    pub term: String,
    pub kind: InnovationKind,
    pub intro_month: usize,
    pub innovator: String,
    pub intended_label: Label,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// JSONL records in the ingestion format.
    pub records: Vec<String>,
    pub ground_truth: Vec<GroundTruthEntry>,
    /// Lexicon entries covering exactly the planted terms.
    pub lexicon_terms: Vec<String>,
    pub n_posts: usize,
}

/// Inject `term` once into the author's `nth` post of the month (wrapping),
/// returning the post index, or `None` if the author has no posts.
fn inject(sim: &mut MonthSim, author: usize, term: &str, nth: usize) -> Option<usize> {
    let idx = {
        let list = sim.by_author.get(&author)?;
        list[nth % list.len()]
    };
    sim.posts[idx].words.push(term.to_string());
    Some(idx)
}

/// Like `inject`, but only into posts strictly after `after_idx`, keeping
/// the intended innovator's post the earliest use in the month.
fn inject_after(sim: &mut MonthSim, author: usize, term: &str, after_idx: usize) -> Option<usize> {
    let idx = {
        let list = sim.by_author.get(&author)?;
        *list.iter().find(|&&i| i > after_idx)?
    };
    sim.posts[idx].words.push(term.to_string());
    Some(idx)
}

fn month_epoch(m: usize) -> i64 {
    let year = 2012 + (m / 12) as i32;
    let month = (m % 12) as u32 + 1;
    chrono::NaiveDate::from_ymd_opt(year, month, 1)
        .expect("valid month")
        .and_hms_opt(0, 0, 0)
        .unwrap()
        .and_utc()
        .timestamp()
}

/// Generate a full synthetic corpus with planted innovations.
pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    let network = generate_network(config, &mut rng)?;

    let mut records: Vec<String> = Vec::new();
    let mut ground_truth: Vec<GroundTruthEntry> = Vec::new();
    let mut driven_counter = 0usize;
    let mut noise_counter = 0usize;

    // Fixed per-term assignments, decided up front for determinism.
    struct Assignment {
        clique: usize,
        innovator: usize,
        persistent: usize,
        extras: Vec<usize>,
    }
    let assignments: Vec<Assignment> = config
        .innovations
        .iter()
        .map(|inn| {
            let counter = match inn.kind {
                InnovationKind::Driven => {
                    driven_counter += 1;
                    driven_counter - 1
                }
                InnovationKind::Noise => {
                    noise_counter += 1;
                    noise_counter - 1
                }
            };
            let clique = counter % network.cliques.len();
            let persistent = network.reserved[counter % network.reserved.len()];
            let extras: Vec<usize> = (1..=3)
                .map(|j| network.reserved[(counter + j * 7) % network.reserved.len()])
                .filter(|&u| u != persistent)
                .collect();
            let innovator = match inn.innovator_profile {
                InnovatorKind::Hub => network.hubs[counter % network.hubs.len()],
                InnovatorKind::Peripheral => persistent,
                InnovatorKind::CliqueMember => network.cliques[clique][0],
            };
            Assignment {
                clique,
                innovator,
                persistent,
                extras,
            }
        })
        .collect();

    for entry in config.innovations.iter().zip(assignments.iter()) {
        let (inn, asg) = entry;
        ground_truth.push(GroundTruthEntry {
            term: inn.term.clone(),
            kind: inn.kind,
            intro_month: inn.intro_month,
            innovator: network.user_names[asg.innovator].clone(),
            intended_label: match inn.kind {
                InnovationKind::Driven => Label::Successful,
                InnovationKind::Noise => Label::Unsuccessful,
            },
        });
    }

    let n_crowd = network.crowd.len();
    let growth_months = 18usize;

    for m in 0..config.months {
        let mut sim = simulate_month(config, &network, &mut rng);

        for (inn, asg) in config.innovations.iter().zip(assignments.iter()) {
            let clique = &network.cliques[asg.clique];
            match inn.kind {
                InnovationKind::Driven => {
                    if m == inn.intro_month {
                        inject(&mut sim, asg.innovator, &inn.term, 0);
                    } else if m > inn.intro_month {
                        // Sustained clique adoption: two members each month.
                        let t = m - inn.intro_month;
                        inject(&mut sim, clique[t % clique.len()], &inn.term, 0);
                        inject(&mut sim, clique[(t + 1) % clique.len()], &inn.term, 1);
                        // Crowd adoption ramps linearly to the plateau.
                        let frac = (t as f64 / growth_months as f64).min(1.0);
                        let target = ((inn.adoption_rate * n_crowd as f64 * frac) as usize).max(2);
                        let target = target.min(n_crowd);
                        let mut seed_rng = ChaCha8Rng::seed_from_u64(prediction_seed(
                            config.master_seed,
                            &inn.term,
                            m,
                        ));
                        for i in sample(&mut seed_rng, n_crowd, target) {
                            inject(&mut sim, network.crowd[i], &inn.term, 0);
                        }
                    }
                }
                InnovationKind::Noise => {
                    if m == inn.intro_month {
                        let first = inject(&mut sim, asg.persistent, &inn.term, 0);
                        if let Some(first) = first {
                            for &e in &asg.extras {
                                inject_after(&mut sim, e, &inn.term, first);
                            }
                        }
                    } else if m > inn.intro_month && m <= inn.intro_month + 11 {
                        let t = m - inn.intro_month;
                        inject(&mut sim, asg.persistent, &inn.term, t);
                        for &e in asg.extras.iter().take(3usize.saturating_sub(t)) {
                            inject(&mut sim, e, &inn.term, t);
                        }
                        // Short strong burst: a clique member uses the term
                        // in the two months after introduction.
                        if t <= 2 {
                            inject(&mut sim, clique[t % clique.len()], &inn.term, 0);
                        }
                    }
                }
            }
        }

        // Serialise the month: timestamps strictly increasing in post
        // order, first post of each thread is the root.
        let base_ts = month_epoch(m);
        let mut thread_root: Vec<Option<String>> = vec![None; sim.n_threads];
        for (i, p) in sim.posts.iter().enumerate() {
            let id = format!("m{m:03}p{i:07}");
            let thread_name = format!("t3_m{m:03}x{:05}", p.thread);
            let parent = match &thread_root[p.thread] {
                None => {
                    thread_root[p.thread] = Some(id.clone());
                    serde_json::Value::Null
                }
                Some(root) => serde_json::Value::String(root.clone()),
            };
            let record = serde_json::json!({
                "id": id,
                "author": network.user_names[p.author],
                "link_id": thread_name,
                "parent_id": parent,
                "created_utc": base_ts + i as i64,
                "body": p.words.join(" "),
            });
            records.push(serde_json::to_string(&record).expect("serialisable record"));
        }
    }

    let mut lexicon_terms: Vec<String> =
        config.innovations.iter().map(|i| i.term.clone()).collect();
    lexicon_terms.sort();
    lexicon_terms.dedup();

    let n_posts = records.len();
    Ok(SynthOutput {
        records,
        ground_truth,
        lexicon_terms,
        n_posts,
    })
}

fn prediction_seed(master: u64, term: &str, month: usize) -> u64 {
    let mut h = master ^ 0x9e3779b97f4a7c15;
    for b in term.bytes() {
        h = h.wrapping_mul(0x100000001b3).wrapping_add(b as u64);
    }
    h.wrapping_mul(31).wrapping_add(month as u64)
}
