//! Buggy-chunk extraction from line diffs, fault-spec loading and
//! effective-location counting.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BuggyChunk, SourceText};
use crate::syntax::SubjectLanguage;
use crate::util::lcs_pairs;

/// A chunk together with the fixed-side lines that replace it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub chunk: BuggyChunk,
    pub inserted_lines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultEntry {
    pub file: String,
    pub start_line: usize,
    pub end_line: usize,
}

/// Known buggy locations of one bug.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub bug_id: String,
    pub entries: Vec<FaultEntry>,
}

impl FaultSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn from_chunks<'a>(
        bug_id: impl Into<String>,
        chunks: impl IntoIterator<Item = &'a BuggyChunk>,
    ) -> Self {
        FaultSpec {
            bug_id: bug_id.into(),
            entries: chunks
                .into_iter()
                .map(|c| FaultEntry {
                    file: c.file.clone(),
                    start_line: c.start_line,
                    end_line: c.end_line,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fault spec serializes")
    }
}

/// Counts deleted lines that are not blank, comment-only or null locations.
/// An omission chunk always counts one location.
pub fn count_effective_locations(chunk: &BuggyChunk, lang: &dyn SubjectLanguage) -> usize {
    if chunk.is_omission() {
        return 1;
    }
    count_lines(&chunk.deleted_lines, lang)
}

fn count_lines(lines: &[String], lang: &dyn SubjectLanguage) -> usize {
    lines
        .iter()
        .filter(|l| {
            !l.trim().is_empty() && !lang.is_comment_line(l) && !lang.is_null_location(l)
        })
        .count()
}

fn make_chunk(
    chunk_id: usize,
    file: &str,
    start_line: usize,
    deleted: Vec<String>,
    lang: &dyn SubjectLanguage,
) -> BuggyChunk {
    let locations = if deleted.is_empty() {
        1
    } else {
        count_lines(&deleted, lang)
    };
    let end_line = start_line + deleted.len() - 1;
    BuggyChunk::new(chunk_id, file, start_line, end_line, deleted, locations)
        .expect("diff regions form valid chunks")
}

/// Change regions of a line diff, as half-open `(buggy, fixed)` index ranges.
/// Regions separated by at most `merge_distance` unchanged lines are merged.
fn change_regions(
    buggy: &[String],
    fixed: &[String],
    merge_distance: usize,
) -> Vec<((usize, usize), (usize, usize))> {
    let pairs = lcs_pairs(buggy, fixed, |a, b| a == b);
    let mut regions: Vec<((usize, usize), (usize, usize))> = Vec::new();
    let (mut i, mut j) = (0, 0);
    let ends = pairs
        .iter()
        .copied()
        .chain(std::iter::once((buggy.len(), fixed.len())));
    for (mi, mj) in ends {
        if mi > i || mj > j {
            match regions.last_mut() {
                Some(last) if i - last.0 .1 <= merge_distance => {
                    last.0 .1 = mi;
                    last.1 .1 = mj;
                }
                _ => regions.push(((i, mi), (j, mj))),
            }
        }
        i = mi + 1;
        j = mj + 1;
    }
    regions
}

/// Chunks and their replacements for one file pair. `merge_distance` is the
/// largest number of unchanged lines absorbed into a single chunk.
pub fn extract_hunks(
    buggy: &SourceText,
    fixed: &SourceText,
    lang: &dyn SubjectLanguage,
    merge_distance: usize,
) -> Vec<Hunk> {
    change_regions(&buggy.lines, &fixed.lines, merge_distance)
        .into_iter()
        .enumerate()
        .map(|(k, ((b0, b1), (f0, f1)))| Hunk {
            chunk: make_chunk(k, &buggy.origin, b0 + 1, buggy.lines[b0..b1].to_vec(), lang),
            inserted_lines: fixed.lines[f0..f1].to_vec(),
        })
        .collect()
}

/// Buggy chunks of a file pair; any unchanged line separates two chunks.
pub fn extract_chunks(
    buggy: &SourceText,
    fixed: &SourceText,
    lang: &dyn SubjectLanguage,
) -> Vec<BuggyChunk> {
    extract_hunks(buggy, fixed, lang, 0)
        .into_iter()
        .map(|h| h.chunk)
        .collect()
}

/// Replaces each hunk's buggy range with its inserted lines.
pub fn replay_hunks(buggy: &[String], hunks: &[Hunk]) -> Vec<String> {
    let mut out = buggy.to_vec();
    for h in hunks.iter().rev() {
        let start = h.chunk.start_line - 1;
        let end = start + h.chunk.deleted_lines.len();
        out.splice(start..end, h.inserted_lines.iter().cloned());
    }
    out
}

fn source_files(root: &Path, ext: &str) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    if !root.exists() {
        return Ok(out);
    }
    for entry in walkdir::WalkDir::new(root) {
        let entry = entry.map_err(|e| Error::Other(format!("{}: {e}", root.display())))?;
        let path = entry.path();
        if entry.file_type().is_file() && path.extension().is_some_and(|e| e == ext) {
            let rel = path.strip_prefix(root).expect("walk stays under root");
            let rel: Vec<_> = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect();
            out.insert(rel.join("/"));
        }
    }
    Ok(out)
}

/// Hunks over every source file of two project trees, in path order, with
/// chunk ids numbered across files. A file present on one side only is
/// diffed against an empty file.
pub fn extract_project(
    buggy_root: &Path,
    fixed_root: &Path,
    lang: &dyn SubjectLanguage,
    merge_distance: usize,
) -> Result<Vec<Hunk>> {
    let mut files = source_files(buggy_root, lang.extension())?;
    files.extend(source_files(fixed_root, lang.extension())?);
    let read = |root: &Path, rel: &str| {
        if root.join(rel).exists() {
            SourceText::read(root, rel)
        } else {
            Ok(SourceText::from_lines(rel, Vec::new()))
        }
    };
    let mut hunks = Vec::new();
    for rel in &files {
        let b = read(buggy_root, rel)?;
        let f = read(fixed_root, rel)?;
        for mut h in extract_hunks(&b, &f, lang, merge_distance) {
            h.chunk.chunk_id = hunks.len();
            hunks.push(h);
        }
    }
    Ok(hunks)
}

/// Reads the buggy lines of every entry from `project`.
pub fn load_fault_spec(
    spec: &FaultSpec,
    project: &Path,
    lang: &dyn SubjectLanguage,
) -> Result<Vec<BuggyChunk>> {
    let mut chunks: Vec<BuggyChunk> = Vec::with_capacity(spec.entries.len());
    for (index, e) in spec.entries.iter().enumerate() {
        let fail = |reason: String| Error::FaultEntry {
            index,
            file: e.file.clone(),
            start: e.start_line,
            end: e.end_line,
            reason,
        };
        if e.start_line == 0 || e.end_line + 1 < e.start_line {
            return Err(fail("invalid line range".into()));
        }
        if !project.join(&e.file).is_file() {
            return Err(fail("file does not exist".into()));
        }
        let source = SourceText::read(project, &e.file).map_err(|err| fail(err.to_string()))?;
        // an omission may sit just past the last line
        let lines = if e.end_line < e.start_line {
            (e.start_line <= source.len() + 1).then(Vec::new)
        } else {
            source.range(e.start_line, e.end_line).map(<[String]>::to_vec)
        };
        let lines = lines.ok_or_else(|| {
            fail(format!("range outside the file's {} lines", source.len()))
        })?;
        if let Some(prev) = chunks.last() {
            let ordered = (prev.file.as_str(), prev.start_line, prev.end_line)
                < (e.file.as_str(), e.start_line, e.end_line);
            if !ordered || (prev.file == e.file && e.start_line <= prev.end_line) {
                return Err(fail("entries must be sorted and non-overlapping".into()));
            }
        }
        chunks.push(make_chunk(index, &e.file, e.start_line, lines, lang));
    }
    Ok(chunks)
}
