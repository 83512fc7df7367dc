//! Patch optimization: candidate filtering, per-chunk ranking and capped
//! best-first combination across chunks.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};

use crate::config::CampaignConfig;
use crate::error::{Error, Result};
use crate::model::{aggregate, BuggyChunk, CandidateFragment, CombinedPatch, SourceText};
use crate::syntax::{edit_script, SubjectLanguage};

/// `source` with the chunk's line range replaced by `replacement`.
pub fn substitute(source: &SourceText, chunk: &BuggyChunk, replacement: &[String]) -> SourceText {
    let mut lines = source.lines.clone();
    let start = (chunk.start_line - 1).min(lines.len());
    let end = (start + chunk.deleted_lines.len()).min(lines.len());
    lines.splice(start..end, replacement.iter().cloned());
    SourceText {
        origin: source.origin.clone(),
        lines,
        trailing_newline: source.trailing_newline,
    }
}

fn normalized(lines: &[String], lang: &dyn SubjectLanguage) -> String {
    lang.normalize(&lines.join("\n"))
}

/// Drops fragments that break the file's parse, that duplicate an earlier
/// fragment of lower model rank, or that equal the buggy body, all judged
/// after normalization. Survivors keep their relative order.
pub fn filter_candidates(
    fragments: &[CandidateFragment],
    chunk: &BuggyChunk,
    source: &SourceText,
    lang: &dyn SubjectLanguage,
) -> Vec<CandidateFragment> {
    let buggy = normalized(&chunk.deleted_lines, lang);
    let mut best_rank: HashMap<String, usize> = HashMap::new();
    let mut keep = Vec::with_capacity(fragments.len());
    for f in fragments {
        let norm = normalized(&f.replacement_lines, lang);
        if norm == buggy {
            continue;
        }
        let patched = substitute(source, chunk, &f.replacement_lines).to_text();
        if lang.parse(&lang.normalize(&patched)).is_err() {
            continue;
        }
        let slot = best_rank.entry(norm.clone()).or_insert(f.model_rank);
        *slot = (*slot).min(f.model_rank);
        keep.push((norm, f));
    }
    keep.into_iter()
        .filter(|(norm, f)| best_rank[norm] == f.model_rank)
        .map(|(_, f)| f.clone())
        .collect()
}

/// Dice coefficient over the multisets of length-`n` token windows. A
/// sequence shorter than `n` is a single gram.
pub fn ngram_similarity<T: AsRef<str>>(a: &[T], b: &[T], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidConfig {
            field: "ngram_n",
            reason: "must be at least 1".into(),
        });
    }
    fn grams<T: AsRef<str>>(s: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
        let toks: Vec<&str> = s.iter().map(AsRef::as_ref).collect();
        let mut out = HashMap::new();
        if toks.len() < n {
            *out.entry(toks).or_default() += 1;
        } else {
            for w in toks.windows(n) {
                *out.entry(w.to_vec()).or_default() += 1;
            }
        }
        out
    }
    let (ga, gb) = (grams(a, n), grams(b, n));
    let total: usize = ga.values().sum::<usize>() + gb.values().sum::<usize>();
    let common: usize = ga
        .iter()
        .map(|(g, &c)| c.min(gb.get(g).copied().unwrap_or(0)))
        .sum();
    Ok(2.0 * common as f64 / total as f64)
}

fn tokens(lines: &[String], lang: &dyn SubjectLanguage) -> Vec<String> {
    let text = lines.join("\n");
    lang.tokenize(&text)
        .unwrap_or_else(|_| text.split_whitespace().map(str::to_owned).collect())
}

/// Similarity prior of a fragment to the buggy code: half edit
/// conservatism `1 / (1 + script length)` over whole-file trees, half
/// n-gram similarity of the chunk tokens.
pub fn similarity(
    fragment: &CandidateFragment,
    chunk: &BuggyChunk,
    source: &SourceText,
    buggy_tree: Option<&crate::syntax::GenericTree>,
    n: usize,
    lang: &dyn SubjectLanguage,
) -> Result<f64> {
    let patched = substitute(source, chunk, &fragment.replacement_lines).to_text();
    let conservatism = match (buggy_tree, lang.parse(&lang.normalize(&patched))) {
        (Some(a), Ok(b)) => 1.0 / (1.0 + edit_script(a, &b).len() as f64),
        _ => 0.0,
    };
    let gram = ngram_similarity(
        &tokens(&chunk.deleted_lines, lang),
        &tokens(&fragment.replacement_lines, lang),
        n,
    )?;
    Ok(0.5 * conservatism + 0.5 * gram)
}

/// Min-max normalized model scores; a single survivor or a flat pool maps to 1.
pub fn normalize_model_scores(fragments: &[CandidateFragment]) -> Vec<f64> {
    let min = fragments.iter().map(|f| f.model_score).fold(f64::INFINITY, f64::min);
    let max = fragments.iter().map(|f| f.model_score).fold(f64::NEG_INFINITY, f64::max);
    fragments
        .iter()
        .map(|f| {
            if max > min {
                ((f.model_score - min) / (max - min)).clamp(0.0, 1.0)
            } else {
                1.0
            }
        })
        .collect()
}

/// Scores and orders filtered fragments by opt_score, ties by model rank.
/// With patch optimization disabled the model order is kept and the score
/// is the normalized model score alone.
pub fn rank_candidates(
    fragments: &[CandidateFragment],
    chunk: &BuggyChunk,
    source: &SourceText,
    cfg: &CampaignConfig,
    lang: &dyn SubjectLanguage,
) -> Result<Vec<CandidateFragment>> {
    let norm = normalize_model_scores(fragments);
    let mut out = Vec::with_capacity(fragments.len());
    if cfg.no_patch_optimization {
        for (f, m) in fragments.iter().zip(norm) {
            out.push(f.clone().with_opt_score(m)?);
        }
        out.sort_by_key(|f| f.model_rank);
        return Ok(out);
    }
    let buggy_tree = lang.parse(&lang.normalize(&source.to_text())).ok();
    for (f, m) in fragments.iter().zip(norm) {
        let sim = if cfg.p < 1.0 {
            similarity(f, chunk, source, buggy_tree.as_ref(), cfg.ngram_n, lang)?
        } else {
            0.0
        };
        let score = (cfg.p * m + (1.0 - cfg.p) * sim).clamp(0.0, 1.0);
        out.push(f.clone().with_opt_score(score)?);
    }
    out.sort_by(|a, b| {
        b.opt_score
            .total_cmp(&a.opt_score)
            .then(a.model_rank.cmp(&b.model_rank))
    });
    Ok(out)
}

#[derive(Debug)]
struct Entry {
    score: f64,
    ranks: Vec<usize>,
    positions: Vec<usize>,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // max-heap: higher score first, then lexicographically smaller ranks
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.ranks.cmp(&self.ranks))
            .then_with(|| other.positions.cmp(&self.positions))
    }
}

/// Best-first stream of combined patches over ranked per-chunk pools.
///
/// Emits in non-increasing aggregate score, ties broken by the tuple of
/// per-chunk model ranks, and stops after `mc` patches or when the product
/// lattice is exhausted.
#[derive(Debug)]
pub struct Combinations {
    pools: Vec<Vec<CandidateFragment>>,
    frontier: BinaryHeap<Entry>,
    visited: HashSet<Vec<usize>>,
    emitted: usize,
    mc: usize,
}

impl Combinations {
    fn entry(&self, positions: Vec<usize>) -> Entry {
        let picked: Vec<CandidateFragment> = positions
            .iter()
            .zip(&self.pools)
            .map(|(&p, pool)| pool[p].clone())
            .collect();
        Entry {
            score: aggregate(&picked),
            ranks: picked.iter().map(|f| f.model_rank).collect(),
            positions,
        }
    }
}

impl Iterator for Combinations {
    type Item = CombinedPatch;

    fn next(&mut self) -> Option<CombinedPatch> {
        if self.emitted >= self.mc {
            return None;
        }
        let top = self.frontier.pop()?;
        for k in 0..self.pools.len() {
            if top.positions[k] + 1 < self.pools[k].len() {
                let mut next = top.positions.clone();
                next[k] += 1;
                if self.visited.insert(next.clone()) {
                    let e = self.entry(next);
                    self.frontier.push(e);
                }
            }
        }
        self.emitted += 1;
        let fragments = top
            .positions
            .iter()
            .zip(&self.pools)
            .map(|(&p, pool)| pool[p].clone())
            .collect();
        Some(CombinedPatch::new(fragments, self.emitted).expect("pools are in chunk order"))
    }
}

/// Starts the combination stream. Pools must be ranked (non-increasing
/// opt_score) and given in chunk order.
pub fn combine(pools: Vec<Vec<CandidateFragment>>, mc: usize) -> Result<Combinations> {
    for (k, pool) in pools.iter().enumerate() {
        let Some(first) = pool.first() else {
            return Err(Error::NoCandidates { chunk_id: k });
        };
        if pool.iter().any(|f| f.chunk_id != first.chunk_id) {
            return Err(Error::Invariant {
                what: "candidate pool",
                reason: format!("pool {k} mixes chunks"),
            });
        }
        if pool.windows(2).any(|w| w[1].opt_score > w[0].opt_score) {
            return Err(Error::Invariant {
                what: "candidate pool",
                reason: format!("pool {k} is not ranked"),
            });
        }
    }
    let mut c = Combinations {
        pools,
        frontier: BinaryHeap::new(),
        visited: HashSet::new(),
        emitted: 0,
        mc,
    };
    if !c.pools.is_empty() {
        let origin = vec![0; c.pools.len()];
        c.visited.insert(origin.clone());
        let e = c.entry(origin);
        c.frontier.push(e);
    }
    Ok(c)
}
