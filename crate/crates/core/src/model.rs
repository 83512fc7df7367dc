//! Shared domain vocabulary: source texts, chunks, blocks, candidates,
//! combined patches and verdicts.
//!
//! Constructors check invariants; everything is immutable once built and can
//! be shared freely between worker threads.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A text file split into lines.
///
/// Lines are separated by `\n`. A `\r` before the newline stays part of the
/// line, so `to_text` reproduces the original bytes exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceText {
    pub origin: String,
    pub lines: Vec<String>,
    pub trailing_newline: bool,
}

impl SourceText {
    pub fn new(origin: impl Into<String>, text: &str) -> Self {
        let trailing_newline = text.ends_with('\n');
        let body = if trailing_newline {
            &text[..text.len() - 1]
        } else {
            text
        };
        let lines = if text.is_empty() {
            Vec::new()
        } else {
            body.split('\n').map(str::to_owned).collect()
        };
        SourceText {
            origin: origin.into(),
            lines,
            trailing_newline,
        }
    }

    pub fn from_lines(origin: impl Into<String>, lines: Vec<String>) -> Self {
        let trailing_newline = !lines.is_empty();
        SourceText {
            origin: origin.into(),
            lines,
            trailing_newline,
        }
    }

    pub fn read(root: &Path, relative: &str) -> Result<Self> {
        let path = root.join(relative);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(SourceText::new(relative, &text))
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// 1-based line access.
    pub fn line(&self, number: usize) -> Option<&str> {
        number
            .checked_sub(1)
            .and_then(|i| self.lines.get(i))
            .map(String::as_str)
    }

    /// Lines `start..=end` (1-based). An empty range (`end == start - 1`) is allowed.
    pub fn range(&self, start: usize, end: usize) -> Option<&[String]> {
        if start == 0 || end + 1 < start || end > self.lines.len() {
            return None;
        }
        Some(&self.lines[start - 1..end])
    }

    pub fn to_text(&self) -> String {
        let mut out = self.lines.join("\n");
        if self.trailing_newline && !self.lines.is_empty() {
            out.push('\n');
        }
        out
    }
}

/// One contiguous buggy region of a file.
///
/// `end_line == start_line - 1` marks an omission chunk: nothing is deleted and
/// the fix inserts code before line `start_line`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuggyChunk {
    pub chunk_id: usize,
    pub file: String,
    pub start_line: usize,
    pub end_line: usize,
    pub deleted_lines: Vec<String>,
    pub effective_locations: usize,
}

impl BuggyChunk {
    pub fn new(
        chunk_id: usize,
        file: impl Into<String>,
        start_line: usize,
        end_line: usize,
        deleted_lines: Vec<String>,
        effective_locations: usize,
    ) -> Result<Self> {
        let invalid = |reason: String| Error::Invariant {
            what: "chunk",
            reason,
        };
        if start_line == 0 {
            return Err(invalid("start_line must be 1-based".into()));
        }
        if end_line + 1 < start_line {
            return Err(invalid(format!(
                "end_line {end_line} precedes start_line {start_line} by more than one"
            )));
        }
        let span = end_line + 1 - start_line;
        if deleted_lines.len() != span {
            return Err(invalid(format!(
                "range {start_line}-{end_line} spans {span} lines but {} were given",
                deleted_lines.len()
            )));
        }
        if span == 0 && effective_locations != 1 {
            return Err(invalid("an omission chunk counts exactly one location".into()));
        }
        if effective_locations > span.max(1) {
            return Err(invalid(format!(
                "{effective_locations} locations exceed {span} deleted lines"
            )));
        }
        Ok(BuggyChunk {
            chunk_id,
            file: file.into(),
            start_line,
            end_line,
            deleted_lines,
            effective_locations,
        })
    }

    pub fn is_omission(&self) -> bool {
        self.end_line + 1 == self.start_line
    }

    fn sort_key(&self) -> (&str, usize, usize) {
        (&self.file, self.start_line, self.end_line)
    }
}

/// Checks that chunks are sorted by `(file, start_line)` and pairwise disjoint.
pub fn check_chunk_order(chunks: &[BuggyChunk]) -> Result<()> {
    for pair in chunks.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.sort_key() >= b.sort_key() {
            return Err(Error::Invariant {
                what: "chunk set",
                reason: format!(
                    "chunk {} ({}:{}) is not ordered before chunk {} ({}:{})",
                    a.chunk_id, a.file, a.start_line, b.chunk_id, b.file, b.start_line
                ),
            });
        }
        if a.file == b.file && b.start_line <= a.end_line {
            return Err(Error::Invariant {
                what: "chunk set",
                reason: format!(
                    "chunks {} and {} overlap in {}",
                    a.chunk_id, b.chunk_id, a.file
                ),
            });
        }
    }
    Ok(())
}

/// Reserved block markers. None of them tokenize in the bundled language.
pub mod markers {
    /// Boundary between two chunk segments.
    pub const CHUNK_SEPARATOR: &str = "<|sep|>";
    /// Opens a chunk body; lines above it in the segment are leading context.
    pub const BODY_OPEN: &str = "<|bug|>";
    /// Closes a chunk body; lines below it in the segment are trailing context.
    pub const BODY_CLOSE: &str = "<|/bug|>";

    pub const ALL: [&str; 3] = [CHUNK_SEPARATOR, BODY_OPEN, BODY_CLOSE];

    /// Prefix shared by all markers; subject sources may not contain it.
    pub const PREFIX: &str = "<|";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub pre_context: Vec<String>,
    pub body: Vec<String>,
    pub post_context: Vec<String>,
}

/// All chunks of a bug with their contexts, serialized as one generator input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuggyBlock {
    pub block_id: String,
    pub segments: Vec<Segment>,
    pub token_count: usize,
}

impl BuggyBlock {
    /// Line-oriented serialization:
    ///
    /// ```text
    /// <pre context lines>
    /// <|bug|>
    /// <body lines>
    /// <|/bug|>
    /// <post context lines>
    /// <|sep|>
    /// ... next segment ...
    /// ```
    pub fn serialize(&self) -> String {
        let mut lines: Vec<&str> = Vec::new();
        for (i, seg) in self.segments.iter().enumerate() {
            if i > 0 {
                lines.push(markers::CHUNK_SEPARATOR);
            }
            lines.extend(seg.pre_context.iter().map(String::as_str));
            lines.push(markers::BODY_OPEN);
            lines.extend(seg.body.iter().map(String::as_str));
            lines.push(markers::BODY_CLOSE);
            lines.extend(seg.post_context.iter().map(String::as_str));
        }
        lines.join("\n")
    }

    /// Inverse of [`BuggyBlock::serialize`]. `token_count` is left at zero;
    /// callers that need it recount with their tokenizer.
    pub fn parse(block_id: impl Into<String>, text: &str) -> Result<Self> {
        let mut segments = Vec::new();
        for part in split_lines_on_separator(text) {
            let open = part.iter().position(|l| l == markers::BODY_OPEN);
            let close = part.iter().position(|l| l == markers::BODY_CLOSE);
            let (open, close) = match (open, close) {
                (Some(o), Some(c)) if o < c => (o, c),
                _ => {
                    return Err(Error::Invariant {
                        what: "block",
                        reason: format!("segment {} lacks body markers", segments.len() + 1),
                    })
                }
            };
            segments.push(Segment {
                pre_context: part[..open].to_vec(),
                body: part[open + 1..close].to_vec(),
                post_context: part[close + 1..].to_vec(),
            });
        }
        Ok(BuggyBlock {
            block_id: block_id.into(),
            segments,
            token_count: 0,
        })
    }
}

/// Splits a serialized block (or label) into parts on separator lines.
pub(crate) fn split_lines_on_separator(text: &str) -> Vec<Vec<String>> {
    let mut parts = vec![Vec::new()];
    for line in text.split('\n') {
        if line == markers::CHUNK_SEPARATOR {
            parts.push(Vec::new());
        } else {
            parts.last_mut().expect("non-empty").push(line.to_owned());
        }
    }
    parts
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MethodEntry {
    pub name: String,
    pub signature: String,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FieldEntry {
    pub name: String,
    pub type_name: String,
    pub file: String,
}

/// Project-level repair ingredients.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngredientIndex {
    pub methods: Vec<MethodEntry>,
    pub fields: Vec<FieldEntry>,
    /// `(caller, callee)` method-name pairs.
    pub relations: Vec<(String, String)>,
}

/// One generated replacement for one chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFragment {
    pub chunk_id: usize,
    pub replacement_lines: Vec<String>,
    pub model_rank: usize,
    pub model_score: f64,
    pub opt_score: f64,
}

impl CandidateFragment {
    pub fn new(
        chunk_id: usize,
        replacement_lines: Vec<String>,
        model_rank: usize,
        model_score: f64,
    ) -> Result<Self> {
        if model_rank == 0 {
            return Err(Error::Invariant {
                what: "candidate",
                reason: "model_rank is 1-based".into(),
            });
        }
        if !model_score.is_finite() {
            return Err(Error::Invariant {
                what: "candidate",
                reason: format!("model_score {model_score} is not finite"),
            });
        }
        Ok(CandidateFragment {
            chunk_id,
            replacement_lines,
            model_rank,
            model_score,
            opt_score: 0.0,
        })
    }

    pub fn with_opt_score(mut self, opt_score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&opt_score) {
            return Err(Error::Invariant {
                what: "candidate",
                reason: format!("opt_score {opt_score} outside [0, 1]"),
            });
        }
        self.opt_score = opt_score;
        Ok(self)
    }
}

/// One fragment per chunk, in chunk order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedPatch {
    pub fragments: Vec<CandidateFragment>,
    pub aggregate_score: f64,
    pub emit_index: usize,
}

impl CombinedPatch {
    pub fn new(fragments: Vec<CandidateFragment>, emit_index: usize) -> Result<Self> {
        if fragments
            .windows(2)
            .any(|w| w[0].chunk_id >= w[1].chunk_id)
        {
            return Err(Error::Invariant {
                what: "combined patch",
                reason: "fragments must be ordered by chunk_id".into(),
            });
        }
        if emit_index == 0 {
            return Err(Error::Invariant {
                what: "combined patch",
                reason: "emit_index is 1-based".into(),
            });
        }
        let aggregate_score = aggregate(&fragments);
        Ok(CombinedPatch {
            fragments,
            aggregate_score,
            emit_index,
        })
    }

    pub fn model_ranks(&self) -> Vec<usize> {
        self.fragments.iter().map(|f| f.model_rank).collect()
    }
}

/// Sum of opt scores, always accumulated in chunk order.
pub fn aggregate(fragments: &[CandidateFragment]) -> f64 {
    fragments.iter().fold(0.0, |acc, f| acc + f.opt_score)
}

/// Outcome tiers of validating one combined patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VerdictKind {
    #[serde(rename = "filtered")]
    Filtered,
    #[serde(rename = "apply_error")]
    ApplyError,
    #[serde(rename = "timeout")]
    Timeout,
    #[serde(rename = "CO")]
    CompiledOnly,
    #[serde(rename = "PL")]
    Plausible,
    #[serde(rename = "CR")]
    Correct,
}

impl VerdictKind {
    /// Funnel tier: 0 for the failure kinds, then CO < PL < CR.
    pub fn tier(self) -> u8 {
        match self {
            VerdictKind::Filtered | VerdictKind::ApplyError | VerdictKind::Timeout => 0,
            VerdictKind::CompiledOnly => 1,
            VerdictKind::Plausible => 2,
            VerdictKind::Correct => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            VerdictKind::Filtered => "filtered",
            VerdictKind::ApplyError => "apply_error",
            VerdictKind::Timeout => "timeout",
            VerdictKind::CompiledOnly => "CO",
            VerdictKind::Plausible => "PL",
            VerdictKind::Correct => "CR",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        Some(match text.trim() {
            "filtered" | "Filtered" => VerdictKind::Filtered,
            "apply_error" | "ApplyError" => VerdictKind::ApplyError,
            "timeout" | "Timeout" => VerdictKind::Timeout,
            "CO" | "co" => VerdictKind::CompiledOnly,
            "PL" | "pl" => VerdictKind::Plausible,
            "CR" | "cr" => VerdictKind::Correct,
            _ => return None,
        })
    }
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub detail: String,
}

impl Verdict {
    pub fn new(kind: VerdictKind, detail: impl Into<String>) -> Self {
        Verdict {
            kind,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BugType {
    Type1,
    Type2,
    Type3,
}

impl BugType {
    /// Single-chunk single-location, single-chunk multi-location, multi-chunk.
    pub fn classify(chunk_count: usize, location_count: usize) -> Result<Self> {
        if chunk_count == 0 || location_count == 0 {
            return Err(Error::Invariant {
                what: "bug classification",
                reason: format!(
                    "chunk_count {chunk_count} and location_count {location_count} must be positive"
                ),
            });
        }
        Ok(match (chunk_count, location_count) {
            (1, 1) => BugType::Type1,
            (1, _) => BugType::Type2,
            _ => BugType::Type3,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugRecord {
    pub bug_id: String,
    pub module_id: String,
    pub chunk_count: usize,
    pub location_count: usize,
    pub bug_type: BugType,
    pub best_verdict: VerdictKind,
    pub patches_examined: usize,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl BugRecord {
    pub fn new(
        bug_id: impl Into<String>,
        module_id: impl Into<String>,
        chunk_count: usize,
        location_count: usize,
    ) -> Result<Self> {
        Ok(BugRecord {
            bug_id: bug_id.into(),
            module_id: module_id.into(),
            chunk_count,
            location_count,
            bug_type: BugType::classify(chunk_count, location_count)?,
            best_verdict: VerdictKind::Filtered,
            patches_examined: 0,
            detail: String::new(),
        })
    }
}
