//! Generator contract: requests, the candidate JSONL wire format, a seeded
//! mock generator and an adapter for external generator commands.

use std::collections::{BTreeMap, HashSet};
use std::io::Write as _;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blocker::split_block_output;
use crate::error::{Error, Result};
use crate::model::{markers, BuggyBlock, CandidateFragment, IngredientIndex};
use crate::syntax::SubjectLanguage;
use crate::util::fnv64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRequest {
    pub block_id: String,
    /// Serialized buggy block.
    pub block: String,
    pub beam_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingredients: Option<IngredientIndex>,
}

impl GeneratorRequest {
    pub fn new(block: &BuggyBlock, beam_size: usize) -> Result<Self> {
        if beam_size == 0 {
            return Err(Error::InvalidConfig {
                field: "beam_size",
                reason: "must be at least 1".into(),
            });
        }
        Ok(GeneratorRequest {
            block_id: block.block_id.clone(),
            block: block.serialize(),
            beam_size,
            ingredients: None,
        })
    }
}

/// One line of the candidates file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateRecord {
    pub block_id: String,
    pub rank: usize,
    pub model_score: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorOutput {
    pub text: String,
    pub model_score: f64,
}

/// Beam outputs ordered by non-increasing score; rank is position + 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratorResponse {
    pub block_id: String,
    pub outputs: Vec<GeneratorOutput>,
}

impl GeneratorResponse {
    pub fn check(&self) -> Result<()> {
        for (i, o) in self.outputs.iter().enumerate() {
            if !o.model_score.is_finite() {
                return Err(Error::CandidateLine {
                    line: i + 1,
                    reason: "model_score is not finite".into(),
                });
            }
            if i > 0 && o.model_score > self.outputs[i - 1].model_score {
                return Err(Error::CandidateLine {
                    line: i + 1,
                    reason: "model_score increases".into(),
                });
            }
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (i, o) in self.outputs.iter().enumerate() {
            let rec = CandidateRecord {
                block_id: self.block_id.clone(),
                rank: i + 1,
                model_score: o.model_score,
                text: o.text.clone(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses the JSONL wire format. Blank lines are skipped; ranks must run
    /// 1, 2, 3, ... and scores must not increase.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut resp = GeneratorResponse::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| Error::CandidateLine { line: i + 1, reason };
            let rec: CandidateRecord =
                serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            if resp.outputs.is_empty() {
                resp.block_id = rec.block_id.clone();
            } else if rec.block_id != resp.block_id {
                return Err(bad(format!(
                    "block_id {} differs from {}",
                    rec.block_id, resp.block_id
                )));
            }
            if rec.rank != resp.outputs.len() + 1 {
                return Err(bad(format!(
                    "rank {} out of sequence (expected {})",
                    rec.rank,
                    resp.outputs.len() + 1
                )));
            }
            if !rec.model_score.is_finite() {
                return Err(bad("model_score is not finite".into()));
            }
            if let Some(prev) = resp.outputs.last() {
                if rec.model_score > prev.model_score {
                    return Err(bad("model_score increases".into()));
                }
            }
            resp.outputs.push(GeneratorOutput {
                text: rec.text,
                model_score: rec.model_score,
            });
        }
        Ok(resp)
    }
}

pub fn write_candidates(resp: &GeneratorResponse, path: &Path) -> Result<()> {
    std::fs::write(path, resp.to_jsonl()).map_err(|e| Error::io(path, e))
}

pub fn read_candidates(path: &Path) -> Result<GeneratorResponse> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    GeneratorResponse::from_jsonl(&text)
}

/// Per-chunk candidate pools from a response. Outputs that do not split into
/// `chunk_ids.len()` parts are counted as malformed and skipped.
pub fn fragments_from_response(
    resp: &GeneratorResponse,
    chunk_ids: &[usize],
) -> Result<(Vec<Vec<CandidateFragment>>, usize)> {
    let mut pools = vec![Vec::new(); chunk_ids.len()];
    let mut malformed = 0;
    for (i, o) in resp.outputs.iter().enumerate() {
        match split_block_output(&o.text, chunk_ids.len()) {
            Ok(bodies) => {
                for ((pool, &id), body) in pools.iter_mut().zip(chunk_ids).zip(bodies) {
                    pool.push(CandidateFragment::new(id, body, i + 1, o.model_score)?);
                }
            }
            Err(_) => malformed += 1,
        }
    }
    Ok((pools, malformed))
}

/// A fragment the mock generator emits for one chunk at a fixed rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Plant {
    pub rank: usize,
    /// Chunk position within the block, 0-based.
    pub chunk: usize,
    pub lines: Vec<String>,
    /// Emit only when this text appears in the request block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requires_context: Option<String>,
}

/// Mock generator configuration for one bug.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hints {
    #[serde(default)]
    pub plants: Vec<Plant>,
    /// Ranks whose outputs are deliberately structurally broken.
    #[serde(default)]
    pub malformed: Vec<usize>,
}

impl Hints {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

const OPERATOR_FAMILIES: [&[&str]; 5] = [
    &["<", "<=", ">", ">=", "==", "!="],
    &["+", "-", "*", "/", "%"],
    &["&&", "||"],
    &["+=", "-=", "="],
    &["++", "--"],
];

fn leading_ws(line: &str) -> &str {
    &line[..line.len() - line.trim_start().len()]
}

struct Mutator<'a> {
    rng: ChaCha8Rng,
    lang: &'a dyn SubjectLanguage,
    idents: Vec<String>,
    context: Vec<String>,
}

impl Mutator<'_> {
    fn mutate_line(&mut self, line: &str) -> Option<String> {
        let mut tokens = self.lang.tokenize(line).ok()?;
        if tokens.is_empty() {
            return None;
        }
        let k = self.rng.random_range(0..tokens.len());
        let tok = tokens[k].clone();
        let first = tok.chars().next()?;
        let replacement = if let Some(family) = OPERATOR_FAMILIES.iter().find(|f| f.contains(&tok.as_str())) {
            (*family.choose(&mut self.rng)?).to_owned()
        } else if first.is_ascii_digit() {
            let v: i64 = tok.parse().ok()?;
            let delta = *[-1i64, 1, 2].choose(&mut self.rng)?;
            (v + delta).max(0).to_string()
        } else if first.is_ascii_alphabetic() || first == '_' {
            self.idents.choose(&mut self.rng)?.clone()
        } else {
            return None;
        };
        tokens[k] = replacement;
        Some(format!("{}{}", leading_ws(line), tokens.join(" ")))
    }

    fn mutate_body(&mut self, body: &[String], strength: usize) -> Vec<String> {
        let mut out = body.to_vec();
        for _ in 0..strength {
            let choice = self.rng.random_range(0..10);
            match choice {
                0..=5 if !out.is_empty() => {
                    let k = self.rng.random_range(0..out.len());
                    if let Some(m) = self.mutate_line(&out[k]) {
                        out[k] = m;
                    }
                }
                6 if out.len() > 1 => {
                    let k = self.rng.random_range(0..out.len());
                    out.remove(k);
                }
                7 if !out.is_empty() => {
                    let k = self.rng.random_range(0..out.len());
                    out.insert(k, out[k].clone());
                }
                _ => {
                    let source = if self.context.is_empty() { &out } else { &self.context };
                    if let Some(line) = source.choose(&mut self.rng).cloned() {
                        let k = self.rng.random_range(0..=out.len());
                        out.insert(k, line);
                    }
                }
            }
        }
        out
    }
}

/// Deterministic stand-in for a neural generator.
///
/// Each output mutates every chunk body of the request block. Planted
/// fragments replace the mutation of their chunk at their rank; outputs at
/// malformed ranks lose or gain a separator. Scores strictly decrease.
pub fn generate_mock(
    req: &GeneratorRequest,
    hints: &Hints,
    seed: u64,
    lang: &dyn SubjectLanguage,
) -> Result<GeneratorResponse> {
    let block = BuggyBlock::parse(&req.block_id, &req.block)?;
    let bodies: Vec<Vec<String>> = block.segments.iter().map(|s| s.body.clone()).collect();
    let context: Vec<String> = block
        .segments
        .iter()
        .flat_map(|s| s.pre_context.iter().chain(&s.post_context))
        .filter(|l| !l.trim().is_empty())
        .cloned()
        .collect();
    let mut idents: Vec<String> = Vec::new();
    for line in bodies.iter().flatten().chain(&context) {
        for t in lang.tokenize(line).unwrap_or_default() {
            if t.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') && !idents.contains(&t) {
                idents.push(t);
            }
        }
    }
    let mut plants: BTreeMap<(usize, usize), &Plant> = BTreeMap::new();
    for p in &hints.plants {
        let visible = p
            .requires_context
            .as_deref()
            .is_none_or(|c| req.block.contains(c));
        if visible && p.chunk < bodies.len() {
            plants.insert((p.rank, p.chunk), p);
        }
    }
    let mut m = Mutator {
        rng: ChaCha8Rng::seed_from_u64(seed ^ fnv64(req.block_id.as_bytes())),
        lang,
        idents,
        context,
    };
    let label = |parts: &[Vec<String>]| crate::blocker::serialize_label(parts);
    let mut seen: HashSet<String> = HashSet::new();
    let mut outputs = Vec::with_capacity(req.beam_size);
    let mut score = 0.0f64;
    for rank in 1..=req.beam_size {
        let planted = |chunk: usize| plants.get(&(rank, chunk)).map(|p| p.lines.clone());
        let mut text = String::new();
        for attempt in 0..64 {
            let parts: Vec<Vec<String>> = bodies
                .iter()
                .enumerate()
                .map(|(c, body)| planted(c).unwrap_or_else(|| m.mutate_body(body, 1 + attempt / 8)))
                .collect();
            text = label(&parts);
            if !seen.contains(&text) || (0..bodies.len()).all(|c| planted(c).is_some()) {
                break;
            }
        }
        if seen.contains(&text) && (0..bodies.len()).any(|c| planted(c).is_none()) {
            // last resort: a fresh local keeps outputs distinct
            let c = (0..bodies.len()).find(|&c| planted(c).is_none()).expect("unplanted chunk");
            let mut parts: Vec<Vec<String>> = (0..bodies.len())
                .map(|k| planted(k).unwrap_or_else(|| bodies[k].clone()))
                .collect();
            parts[c].push(format!("int tmp{rank} = {rank};"));
            text = label(&parts);
        }
        seen.insert(text.clone());
        if hints.malformed.contains(&rank) {
            text = break_structure(&text);
        }
        score -= m.rng.random_range(0.001..0.02);
        outputs.push(GeneratorOutput {
            text,
            model_score: score,
        });
    }
    Ok(GeneratorResponse {
        block_id: req.block_id.clone(),
        outputs,
    })
}

/// Drops the first separator, or adds one when there is none.
fn break_structure(text: &str) -> String {
    let sep = format!("\n{}\n", markers::CHUNK_SEPARATOR);
    if text.contains(&sep) {
        text.replacen(&sep, "\n", 1)
    } else {
        format!("{text}{sep}")
    }
}

/// Runs an external generator. `{request}` and `{output}` in `argv` are
/// replaced by the request JSON path and the candidates path to write.
pub fn run_external(
    argv: &[String],
    req: &GeneratorRequest,
    work_dir: &Path,
    timeout: Duration,
) -> Result<GeneratorResponse> {
    let (program, args) = argv.split_first().ok_or_else(|| Error::InvalidConfig {
        field: "generator_command",
        reason: "is empty".into(),
    })?;
    let request_path = work_dir.join("request.json");
    let output_path = work_dir.join("candidates.jsonl");
    let mut f = std::fs::File::create(&request_path).map_err(|e| Error::io(&request_path, e))?;
    f.write_all(serde_json::to_string(req).expect("request serializes").as_bytes())
        .map_err(|e| Error::io(&request_path, e))?;
    let subst = |a: &String| {
        a.replace("{request}", &request_path.to_string_lossy())
            .replace("{output}", &output_path.to_string_lossy())
    };
    let mut child = Command::new(subst(program))
        .args(args.iter().map(subst))
        .current_dir(work_dir)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| Error::Other(format!("cannot start generator {program}: {e}")))?;
    let start = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait().map_err(|e| Error::Other(e.to_string()))? {
            break status;
        }
        if start.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Err(Error::Other(format!("generator {program} timed out")));
        }
        std::thread::sleep(Duration::from_millis(10));
    };
    if !status.success() {
        return Err(Error::Other(format!("generator {program} exited with {status}")));
    }
    read_candidates(&output_path)
}
