//! Buggy-block construction, generator-output splitting and ingredient
//! indexing.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::config::CampaignConfig;
use crate::error::{Error, Result};
use crate::model::{markers, split_lines_on_separator, BuggyBlock, BuggyChunk, IngredientIndex, Segment, SourceText};
use crate::model::{FieldEntry, MethodEntry};
use crate::syntax::minijava::ast::{Block, Expr, ForInit, Member, Stmt, StmtKind};
use crate::syntax::minijava::parse_unit;
use crate::syntax::SubjectLanguage;

/// Tokens in a run of lines; each line is counted on its own.
pub fn count_line_tokens(lines: &[String], lang: &dyn SubjectLanguage) -> usize {
    lines.iter().map(|l| lang.count_tokens(l)).sum()
}

/// Token count of a block: line tokens plus one per marker line.
pub fn block_tokens(segments: &[Segment], lang: &dyn SubjectLanguage) -> usize {
    let markers = 3 * segments.len() - usize::from(!segments.is_empty());
    segments
        .iter()
        .map(|s| {
            count_line_tokens(&s.pre_context, lang)
                + count_line_tokens(&s.body, lang)
                + count_line_tokens(&s.post_context, lang)
        })
        .sum::<usize>()
        + markers
}

/// Fails if any line of `source` contains the reserved marker prefix.
pub fn check_reserved(source: &SourceText) -> Result<()> {
    for (i, line) in source.lines.iter().enumerate() {
        if line.contains(markers::PREFIX) {
            let marker = markers::ALL
                .into_iter()
                .find(|m| line.contains(m))
                .unwrap_or(markers::PREFIX);
            return Err(Error::ReservedMarker {
                marker,
                file: source.origin.clone(),
                line: i + 1,
            });
        }
    }
    Ok(())
}

/// Builds the block for `chunks` (sorted, non-overlapping) of the project
/// rooted at `project`.
pub fn build_block(
    block_id: &str,
    chunks: &[BuggyChunk],
    project: &Path,
    cfg: &CampaignConfig,
    lang: &dyn SubjectLanguage,
) -> Result<BuggyBlock> {
    let mut files: BTreeMap<&str, SourceText> = BTreeMap::new();
    for c in chunks {
        if !files.contains_key(c.file.as_str()) {
            let source = SourceText::read(project, &c.file)?;
            check_reserved(&source)?;
            files.insert(&c.file, source);
        }
    }
    build_block_from(block_id, chunks, &files, cfg, lang)
}

/// [`build_block`] over already-loaded sources keyed by file.
pub fn build_block_from(
    block_id: &str,
    chunks: &[BuggyChunk],
    files: &BTreeMap<&str, SourceText>,
    cfg: &CampaignConfig,
    lang: &dyn SubjectLanguage,
) -> Result<BuggyBlock> {
    if chunks.is_empty() {
        return Err(Error::Invariant {
            what: "block",
            reason: "no chunks".into(),
        });
    }
    crate::model::check_chunk_order(chunks)?;
    let width = if cfg.no_buggy_contexts { 0 } else { cfg.context_width };
    let mut segments = Vec::with_capacity(chunks.len());
    for (k, c) in chunks.iter().enumerate() {
        let source = files.get(c.file.as_str()).ok_or_else(|| Error::Invariant {
            what: "block",
            reason: format!("source {} not loaded", c.file),
        })?;
        // contexts stop at neighbouring chunks of the same file
        let lower = match k.checked_sub(1).map(|p| &chunks[p]) {
            Some(p) if p.file == c.file => p.end_line + 1,
            _ => 1,
        };
        let upper = match chunks.get(k + 1) {
            Some(n) if n.file == c.file => n.start_line - 1,
            _ => source.len(),
        };
        let pre_start = c.start_line.saturating_sub(width).max(lower);
        let post_end = (c.end_line + width).min(upper);
        let slice = |a: usize, b: usize| {
            if a > b {
                Vec::new()
            } else {
                source.range(a, b).map(<[String]>::to_vec).unwrap_or_default()
            }
        };
        segments.push(Segment {
            pre_context: slice(pre_start, c.start_line - 1),
            body: c.deleted_lines.clone(),
            post_context: slice(c.end_line + 1, post_end),
        });
    }
    let segments = fit_budget(segments, chunks, cfg.token_budget, lang)?;
    let token_count = block_tokens(&segments, lang);
    Ok(BuggyBlock {
        block_id: block_id.to_owned(),
        segments,
        token_count,
    })
}

/// Drops outermost context lines round-robin across segments until the block
/// fits. Within a segment the longer side loses a line first.
fn fit_budget(
    mut segments: Vec<Segment>,
    chunks: &[BuggyChunk],
    budget: usize,
    lang: &dyn SubjectLanguage,
) -> Result<Vec<Segment>> {
    let mut total = block_tokens(&segments, lang);
    let mut turn = 0;
    while total > budget {
        let has_context = |s: &Segment| !s.pre_context.is_empty() || !s.post_context.is_empty();
        if !segments.iter().any(has_context) {
            let (k, _) = segments
                .iter()
                .enumerate()
                .map(|(k, s)| (k, count_line_tokens(&s.body, lang)))
                .max_by_key(|&(k, n)| (n, std::cmp::Reverse(k)))
                .expect("at least one segment");
            return Err(Error::UnbuildableBlock {
                chunk_id: chunks[k].chunk_id,
                budget,
                needed: total,
            });
        }
        let k = turn % segments.len();
        turn += 1;
        let s = &mut segments[k];
        if !has_context(s) {
            continue;
        }
        let removed = if s.pre_context.len() >= s.post_context.len() {
            s.pre_context.remove(0)
        } else {
            s.post_context.pop().expect("non-empty")
        };
        total -= lang.count_tokens(&removed);
    }
    Ok(segments)
}

/// Label format: every body wrapped in body markers, joined by separators.
pub fn serialize_label(bodies: &[Vec<String>]) -> String {
    let mut lines: Vec<&str> = Vec::new();
    for (i, body) in bodies.iter().enumerate() {
        if i > 0 {
            lines.push(markers::CHUNK_SEPARATOR);
        }
        lines.push(markers::BODY_OPEN);
        lines.extend(body.iter().map(String::as_str));
        lines.push(markers::BODY_CLOSE);
    }
    lines.join("\n")
}

/// Splits a generator output into exactly `expected_chunks` fragment bodies.
/// Lines outside the body markers of a part are context and are dropped; a
/// part without markers is taken whole.
pub fn split_block_output(text: &str, expected_chunks: usize) -> Result<Vec<Vec<String>>> {
    let parts = split_lines_on_separator(text);
    if parts.len() != expected_chunks {
        return Err(Error::MalformedOutput {
            expected: expected_chunks.saturating_sub(1),
            found: parts.len() - 1,
        });
    }
    let malformed = |k: usize, why: &str| Error::Invariant {
        what: "generator output",
        reason: format!("part {}: {why}", k + 1),
    };
    let mut out = Vec::with_capacity(parts.len());
    for (k, part) in parts.into_iter().enumerate() {
        let opens: Vec<usize> = positions(&part, markers::BODY_OPEN);
        let closes: Vec<usize> = positions(&part, markers::BODY_CLOSE);
        let body = match (opens.as_slice(), closes.as_slice()) {
            ([], []) => part,
            ([o], [c]) if o < c => part[o + 1..*c].to_vec(),
            _ => return Err(malformed(k, "unbalanced body markers")),
        };
        if body.iter().any(|l| l.contains(markers::PREFIX)) {
            return Err(malformed(k, "reserved marker inside a body"));
        }
        out.push(body);
    }
    Ok(out)
}

fn positions(lines: &[String], marker: &str) -> Vec<usize> {
    lines
        .iter()
        .enumerate()
        .filter(|(_, l)| l.as_str() == marker)
        .map(|(i, _)| i)
        .collect()
}

/// Method signatures, fields and caller-callee relations of every source
/// file under `project`. Files that fail to parse are reported and skipped.
pub fn build_ingredient_index(
    project: &Path,
    lang: &dyn SubjectLanguage,
) -> Result<(IngredientIndex, Vec<String>)> {
    let mut index = IngredientIndex::default();
    let mut errors = Vec::new();
    let mut calls: Vec<(String, String)> = Vec::new();
    let mut paths = Vec::new();
    if project.exists() {
        for entry in walkdir::WalkDir::new(project).sort_by_file_name() {
            let entry = entry.map_err(|e| Error::Other(format!("{}: {e}", project.display())))?;
            let path = entry.path();
            if entry.file_type().is_file() && path.extension().is_some_and(|e| e == lang.extension()) {
                paths.push(path.to_path_buf());
            }
        }
    }
    for path in paths {
        let rel = path
            .strip_prefix(project)
            .expect("walk stays under root")
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let unit = match parse_unit(&text) {
            Ok(u) => u,
            Err(e) => {
                errors.push(format!("{rel}: {e}"));
                continue;
            }
        };
        for class in &unit.classes {
            for member in &class.members {
                match member {
                    Member::Field(f) => index.fields.push(FieldEntry {
                        name: format!("{}.{}", class.name, f.name),
                        type_name: f.ty.to_string(),
                        file: rel.clone(),
                    }),
                    Member::Method(m) => {
                        let caller = format!("{}.{}", class.name, m.name);
                        index.methods.push(MethodEntry {
                            name: caller.clone(),
                            signature: m.signature(),
                            file: rel.clone(),
                        });
                        let mut callees = Vec::new();
                        walk_block(&m.body, &mut |e| {
                            if let Expr::Call { qualifier, name, .. } = e {
                                match qualifier.as_deref() {
                                    None => callees.push(format!("{}.{name}", class.name)),
                                    Some(Expr::Name(q)) => callees.push(format!("{q}.{name}")),
                                    Some(_) => {}
                                }
                            }
                        });
                        calls.extend(callees.into_iter().map(|c| (caller.clone(), c)));
                    }
                }
            }
        }
    }
    let known: BTreeSet<&str> = index.methods.iter().map(|m| m.name.as_str()).collect();
    let relations: BTreeSet<(String, String)> = calls
        .into_iter()
        .filter(|(_, callee)| known.contains(callee.as_str()))
        .collect();
    index.relations = relations.into_iter().collect();
    index.methods.sort();
    index.fields.sort();
    Ok((index, errors))
}

fn walk_block(b: &Block, f: &mut dyn FnMut(&Expr)) {
    for s in &b.stmts {
        walk_stmt(s, f);
    }
}

fn walk_stmt(s: &Stmt, f: &mut dyn FnMut(&Expr)) {
    match &s.kind {
        StmtKind::Block(b) => walk_block(b, f),
        StmtKind::Empty | StmtKind::Break | StmtKind::Continue | StmtKind::Return(None) => {}
        StmtKind::If {
            cond,
            then,
            otherwise,
        } => {
            walk_expr(cond, f);
            walk_stmt(then, f);
            if let Some(o) = otherwise {
                walk_stmt(o, f);
            }
        }
        StmtKind::While { cond, body } => {
            walk_expr(cond, f);
            walk_stmt(body, f);
        }
        StmtKind::For {
            init,
            cond,
            update,
            body,
        } => {
            match init {
                Some(ForInit::Local { init: Some(e), .. }) => walk_expr(e, f),
                Some(ForInit::Exprs(es)) => es.iter().for_each(|e| walk_expr(e, f)),
                _ => {}
            }
            if let Some(c) = cond {
                walk_expr(c, f);
            }
            update.iter().for_each(|e| walk_expr(e, f));
            walk_stmt(body, f);
        }
        StmtKind::Return(Some(e)) | StmtKind::Expr(e) => walk_expr(e, f),
        StmtKind::Local { init, .. } => {
            if let Some(e) = init {
                walk_expr(e, f);
            }
        }
    }
}

fn walk_expr(e: &Expr, f: &mut dyn FnMut(&Expr)) {
    f(e);
    match e {
        Expr::Int(_) | Expr::Str(_) | Expr::Bool(_) | Expr::Null | Expr::Name(_) => {}
        Expr::Assign { target, value, .. } => {
            walk_expr(target, f);
            walk_expr(value, f);
        }
        Expr::Binary { lhs, rhs, .. } => {
            walk_expr(lhs, f);
            walk_expr(rhs, f);
        }
        Expr::Unary { operand, .. } | Expr::Postfix { operand, .. } => walk_expr(operand, f),
        Expr::Ternary {
            cond,
            then,
            otherwise,
        } => {
            walk_expr(cond, f);
            walk_expr(then, f);
            walk_expr(otherwise, f);
        }
        Expr::Call { qualifier, args, .. } => {
            if let Some(q) = qualifier {
                walk_expr(q, f);
            }
            args.iter().for_each(|a| walk_expr(a, f));
        }
        Expr::Field { target, .. } => walk_expr(target, f),
        Expr::Index { target, index } => {
            walk_expr(target, f);
            walk_expr(index, f);
        }
        Expr::NewArray { size, .. } => walk_expr(size, f),
    }
}
