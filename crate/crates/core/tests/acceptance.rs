//! Acceptance suite. Every test prints one `[acceptance] PASS|FAIL` line and
//! fails when its criterion is not met. The lines bypass the test harness's
//! output capture so they show up in a plain `cargo test` run.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use patchweave_core::blocker::{build_block_from, serialize_label, split_block_output};
use patchweave_core::campaign::{
    load_corpus, read_results_csv, run_campaign, BugCase, RepairReport, RunOptions,
};
use patchweave_core::diffchunk::{count_effective_locations, extract_chunks, extract_hunks, replay_hunks};
use patchweave_core::genbridge::GeneratorResponse;
use patchweave_core::optimizer::{combine, ngram_similarity};
use patchweave_core::syntax::{action_similarity, apply, edit_script, EditAction, EditOp, EditScript, GenericTree, Node};
use patchweave_core::validator::{load_sources, location_count};
use patchweave_core::{
    BugType, BuggyChunk, CampaignConfig, CandidateFragment, MiniJava, SourceText, SubjectLanguage,
    VerdictKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DEFAULT_MC: usize = 10_000;
const TOKEN_BUDGET: usize = 512;
const CORPUS_RUNTIME_LIMIT: Duration = Duration::from_secs(120);
const MIN_CORPUS_CR: usize = 9;
const ORACLE_INSTANCES: usize = 50;
const ORACLE_POOL: usize = 20;
const ORACLE_MC: usize = 100;
const DIFF_PAIRS: usize = 500;
const DIFF_MAX_LINES: usize = 40;
const TREE_PAIRS: usize = 1_000;
const TREE_MAX_NODES: usize = 25;

fn report(name: &str, outcome: Result<String, String>) {
    let line = match &outcome {
        Ok(detail) => format!("[acceptance] PASS  {name}: {detail}\n"),
        Err(why) => format!("[acceptance] FAIL  {name}: {why}\n"),
    };
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    if let Err(why) = outcome {
        panic!("{name}: {why}");
    }
}

fn ensure(cond: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(why())
    }
}

fn corpus_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn cases() -> &'static [BugCase] {
    static CASES: OnceLock<Vec<BugCase>> = OnceLock::new();
    CASES.get_or_init(|| load_corpus(&corpus_root().join("mini")).expect("corpus loads"))
}

struct CampaignRun {
    report: RepairReport,
    report_json: Vec<u8>,
    elapsed: Duration,
    results: tempfile::TempDir,
}

fn campaign(cfg: CampaignConfig) -> CampaignRun {
    let results = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        results_dir: Some(results.path().to_path_buf()),
        ..RunOptions::default()
    };
    let start = Instant::now();
    let report = run_campaign(&cfg, cases(), &opts, &MiniJava).expect("campaign runs");
    let elapsed = start.elapsed();
    let report_json = std::fs::read(results.path().join("report.json")).unwrap();
    CampaignRun {
        report,
        report_json,
        elapsed,
        results,
    }
}

fn full_run() -> &'static CampaignRun {
    static RUN: OnceLock<CampaignRun> = OnceLock::new();
    RUN.get_or_init(|| campaign(CampaignConfig::default()))
}

fn cr_ids(r: &RepairReport) -> Vec<&str> {
    r.bugs
        .iter()
        .filter(|b| b.record.best_verdict == VerdictKind::Correct)
        .map(|b| b.record.bug_id.as_str())
        .collect()
}

fn normalized(lines: &[String]) -> String {
    MiniJava.normalize(&lines.join("\n"))
}

/// Whether some single generator output already carries the whole fix.
fn single_output_fixes(case: &BugCase, candidates: &Path) -> Result<bool, String> {
    let lang = MiniJava;
    let chunks = case.chunks(&lang).map_err(|e| e.to_string())?;
    let reference = case
        .reference_fix(&chunks, &lang)
        .map_err(|e| e.to_string())?
        .ok_or("no reference fix")?;
    let want: Vec<String> = reference.iter().map(|b| normalized(b)).collect();
    let text = std::fs::read_to_string(candidates).map_err(|e| e.to_string())?;
    let resp = GeneratorResponse::from_jsonl(&text).map_err(|e| e.to_string())?;
    Ok(resp.outputs.iter().any(|o| {
        split_block_output(&o.text, chunks.len())
            .map(|parts| parts.iter().map(|p| normalized(p)).collect::<Vec<_>>() == want)
            .unwrap_or(false)
    }))
}

#[test]
fn mini_corpus_end_to_end() {
    let outcome = (|| {
        let mut by_chunks = BTreeMap::new();
        for c in cases() {
            let n = c.chunks(&MiniJava).map_err(|e| e.to_string())?.len();
            *by_chunks.entry(n).or_insert(0usize) += 1;
        }
        ensure(by_chunks == BTreeMap::from([(1, 4), (2, 4), (3, 2)]), || {
            format!("corpus composition by chunk count is {by_chunks:?}")
        })?;
        let run = full_run();
        let r = &run.report;
        ensure(r.failures.is_empty(), || format!("failures: {:?}", r.failures))?;
        let cr = cr_ids(r);
        ensure(cr.len() >= MIN_CORPUS_CR, || format!("only {}/10 CR: {cr:?}", cr.len()))?;
        ensure(run.elapsed < CORPUS_RUNTIME_LIMIT, || format!("took {:?}", run.elapsed))?;
        let mut combination_only = Vec::new();
        for b in &r.bugs {
            let rec = &b.record;
            if rec.chunk_count < 2 || rec.best_verdict != VerdictKind::Correct {
                continue;
            }
            let case = cases().iter().find(|c| c.project.bug_id == rec.bug_id).unwrap();
            let candidates = run.results.path().join(&rec.bug_id).join("candidates.jsonl");
            if !single_output_fixes(case, &candidates)? {
                combination_only.push(rec.bug_id.clone());
            }
        }
        ensure(!combination_only.is_empty(), || {
            "every multi-chunk CR is fixed by some single output".into()
        })?;
        Ok(format!(
            "{}/10 CR in {:.1?}; reachable only by combination: {}",
            cr.len(),
            run.elapsed,
            combination_only.join(", ")
        ))
    })();
    report("mini-corpus end-to-end", outcome);
}

fn pool(chunk: usize, scores: &[f64]) -> Vec<CandidateFragment> {
    let mut p: Vec<CandidateFragment> = scores
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            CandidateFragment::new(chunk, vec![format!("c{chunk}r{k}")], k + 1, -(k as f64))
                .unwrap()
                .with_opt_score(s)
                .unwrap()
        })
        .collect();
    p.sort_by(|a, b| b.opt_score.total_cmp(&a.opt_score).then(a.model_rank.cmp(&b.model_rank)));
    p
}

fn non_increasing(scores: &[f64]) -> bool {
    scores.windows(2).all(|w| w[0] >= w[1])
}

#[test]
fn cap_arithmetic() {
    let outcome = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let big: Vec<_> = (0..3)
            .map(|c| pool(c, &(0..500).map(|_| rng.random::<f64>()).collect::<Vec<_>>()))
            .collect();
        let emitted: Vec<f64> = combine(big, DEFAULT_MC)
            .map_err(|e| e.to_string())?
            .map(|p| p.aggregate_score)
            .collect();
        ensure(emitted.len() == DEFAULT_MC, || format!("500^3 emitted {}", emitted.len()))?;
        ensure(non_increasing(&emitted), || "500^3 order increases".into())?;
        let small = vec![pool(0, &[0.9, 0.5, 0.1]), pool(1, &[0.8, 0.7, 0.2, 0.0])];
        let emitted: Vec<f64> = combine(small, DEFAULT_MC)
            .map_err(|e| e.to_string())?
            .map(|p| p.aggregate_score)
            .collect();
        ensure(emitted.len() == 12, || format!("3x4 emitted {}", emitted.len()))?;
        ensure(non_increasing(&emitted), || "3x4 order increases".into())?;
        Ok("500x500x500 -> 10000, 3x4 -> 12, non-increasing".into())
    })();
    report("cap arithmetic", outcome);
}

#[test]
fn combination_oracle() {
    let outcome = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for inst in 0..ORACLE_INSTANCES {
            // coarse scores force many ties
            let pools: Vec<Vec<CandidateFragment>> = (0..3)
                .map(|c| {
                    let s: Vec<f64> = (0..ORACLE_POOL)
                        .map(|_| f64::from(rng.random_range(0..8u8)) / 8.0)
                        .collect();
                    pool(c, &s)
                })
                .collect();
            let mut all = Vec::with_capacity(ORACLE_POOL.pow(3));
            for a in &pools[0] {
                for b in &pools[1] {
                    for c in &pools[2] {
                        let score = a.opt_score + b.opt_score + c.opt_score;
                        all.push((score, vec![a.model_rank, b.model_rank, c.model_rank]));
                    }
                }
            }
            all.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.cmp(&y.1)));
            all.truncate(ORACLE_MC);
            let got: Vec<(f64, Vec<usize>)> = combine(pools, ORACLE_MC)
                .map_err(|e| e.to_string())?
                .map(|p| (p.aggregate_score, p.model_ranks()))
                .collect();
            ensure(got == all, || format!("instance {inst}: emission differs from brute force"))?;
        }
        Ok(format!("{ORACLE_INSTANCES} instances of 20x20x20, top-{ORACLE_MC} identical in order"))
    })();
    report("combination oracle", outcome);
}

/// Change regions from an independent top-down LCS with the same tie-break
/// (prefer advancing the buggy side).
fn oracle_chunks(a: &[String], b: &[String]) -> (Vec<(usize, usize)>, usize) {
    fn lcs(a: &[String], b: &[String], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() || j == b.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = if a[i] == b[j] {
            1 + lcs(a, b, i + 1, j + 1, memo)
        } else {
            lcs(a, b, i + 1, j, memo).max(lcs(a, b, i, j + 1, memo))
        };
        memo.insert((i, j), v);
        v
    }
    let mut memo = HashMap::new();
    let mut matched = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] == b[j] {
            matched.push((i, j));
            i += 1;
            j += 1;
        } else if lcs(a, b, i + 1, j, &mut memo) >= lcs(a, b, i, j + 1, &mut memo) {
            i += 1;
        } else {
            j += 1;
        }
    }
    // regions lie between consecutive matched pairs
    let mut regions = Vec::new();
    let (mut pi, mut pj) = (0, 0);
    for &(mi, mj) in matched.iter().chain(std::iter::once(&(a.len(), b.len()))) {
        if mi > pi || mj > pj {
            regions.push((pi + 1, mi));
        }
        pi = mi + 1;
        pj = mj + 1;
    }
    (regions, matched.len())
}

fn lcs_length(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    for x in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        prev = cur;
    }
    prev[b.len()]
}

fn random_lines(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    const POOL: [&str; 7] = ["x = 1;", "y++;", "}", "", "return x;", "if (a) {", "  // note"];
    (0..n).map(|_| POOL[rng.random_range(0..POOL.len())].to_string()).collect()
}

#[test]
fn diff_oracle() {
    let outcome = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for pair in 0..DIFF_PAIRS {
            let n = rng.random_range(0..=DIFF_MAX_LINES);
            let buggy = random_lines(&mut rng, n);
            let mut fixed = buggy.clone();
            for _ in 0..rng.random_range(0..6) {
                let at = rng.random_range(0..=fixed.len());
                match rng.random_range(0..3) {
                    0 if at < fixed.len() => {
                        fixed.remove(at);
                    }
                    1 if at < fixed.len() => fixed[at] = random_lines(&mut rng, 1).remove(0),
                    _ if fixed.len() < DIFF_MAX_LINES => fixed.insert(at, random_lines(&mut rng, 1).remove(0)),
                    _ => {}
                }
            }
            let text = |lines: &[String]| lines.iter().map(|l| format!("{l}\n")).collect::<String>();
            let (b, f) = (SourceText::new("F.mj", &text(&buggy)), SourceText::new("F.mj", &text(&fixed)));
            let chunks = extract_chunks(&b, &f, &MiniJava);
            let got: Vec<(usize, usize)> = chunks.iter().map(|c| (c.start_line, c.end_line)).collect();
            let (want, matched) = oracle_chunks(&buggy, &fixed);
            ensure(matched == lcs_length(&buggy, &fixed), || format!("pair {pair}: oracle is not an LCS"))?;
            ensure(got == want, || format!("pair {pair}: chunks {got:?}, oracle {want:?}"))?;
            let replayed = replay_hunks(&b.lines, &extract_hunks(&b, &f, &MiniJava, 0));
            ensure(text(&replayed).as_bytes() == text(&fixed).as_bytes(), || {
                format!("pair {pair}: replay differs from the fixed file")
            })?;
        }
        Ok(format!("{DIFF_PAIRS} pairs of up to {DIFF_MAX_LINES} lines"))
    })();
    report("diff oracle", outcome);
}

fn random_tree(rng: &mut ChaCha8Rng, budget: &mut usize, depth: usize) -> Node {
    const INNER: [&str; 4] = ["Block", "If", "Call", "Assign"];
    const LEAF: [&str; 3] = ["Ident", "Int", "Lit"];
    *budget -= 1;
    if depth == 0 || *budget == 0 || rng.random_bool(0.4) {
        let value = rng.random_range(0..4u8).to_string();
        return Node::leaf(LEAF[rng.random_range(0..LEAF.len())], value);
    }
    let mut children = Vec::new();
    for _ in 0..rng.random_range(0..4) {
        if *budget == 0 {
            break;
        }
        children.push(random_tree(rng, budget, depth - 1));
    }
    Node::new(INNER[rng.random_range(0..INNER.len())], children)
}

#[test]
fn edit_script_apply_back() {
    let outcome = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut actions = 0;
        for pair in 0..TREE_PAIRS {
            let tree = |rng: &mut ChaCha8Rng| {
                let mut budget = rng.random_range(1..=TREE_MAX_NODES);
                GenericTree::from_node(&random_tree(rng, &mut budget, 6))
            };
            let a = tree(&mut rng);
            let b = tree(&mut rng);
            ensure(a.len() <= TREE_MAX_NODES && b.len() <= TREE_MAX_NODES, || "tree too large".into())?;
            let script = edit_script(&a, &b);
            actions += script.len();
            let out = apply(&script, &a).map_err(|e| format!("pair {pair}: {e}"))?;
            ensure(out == b, || format!("pair {pair}: replay does not reach the target"))?;
        }
        Ok(format!("{TREE_PAIRS} pairs of up to {TREE_MAX_NODES} nodes, {actions} actions replayed"))
    })();
    report("edit-script apply-back", outcome);
}

fn action(op: EditOp, label: &str) -> EditAction {
    EditAction {
        op,
        node: 0,
        label: label.into(),
        value: None,
        old_value: None,
        parent: None,
        position: None,
    }
}

#[test]
fn similarity_properties() {
    let outcome = (|| {
        let a = ["a", "b", "c", "d"];
        let b = ["b", "c", "d", "e"];
        let worked = ngram_similarity(&a, &b, 3).map_err(|e| e.to_string())?;
        ensure(worked == 0.5, || format!("worked example gives {worked}"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let toks = ["x", "y", "=", "+", ";", "(", ")"];
        for _ in 0..500 {
            let seq = |rng: &mut ChaCha8Rng| -> Vec<&str> {
                (0..rng.random_range(0..12)).map(|_| toks[rng.random_range(0..toks.len())]).collect()
            };
            let (s, t) = (seq(&mut rng), seq(&mut rng));
            let st = ngram_similarity(&s, &t, 3).unwrap();
            let ts = ngram_similarity(&t, &s, 3).unwrap();
            ensure(st == ts && (0.0..=1.0).contains(&st), || format!("{s:?} vs {t:?}: {st} / {ts}"))?;
            ensure(ngram_similarity(&s, &s, 3).unwrap() == 1.0, || format!("{s:?} not self-similar"))?;
        }
        let disjoint = ngram_similarity(&["p", "q", "r"], &["s", "t", "u"], 3).unwrap();
        ensure(disjoint == 0.0, || format!("disjoint trigrams give {disjoint}"))?;

        let ops = [EditOp::Insert, EditOp::Delete, EditOp::Update, EditOp::Move];
        let labels = ["Ident", "Int", "Call"];
        for _ in 0..500 {
            let script = |rng: &mut ChaCha8Rng| EditScript {
                actions: (0..rng.random_range(1..8))
                    .map(|_| action(ops[rng.random_range(0..4)], labels[rng.random_range(0..3)]))
                    .collect(),
            };
            let (s, t) = (script(&mut rng), script(&mut rng));
            let st = action_similarity(&s, &t, 0.5, 0.5).unwrap();
            let ts = action_similarity(&t, &s, 0.5, 0.5).unwrap();
            ensure(st == ts && (0.0..=1.0).contains(&st), || format!("action similarity {st} / {ts}"))?;
            ensure(action_similarity(&s, &s, 0.5, 0.5).unwrap() == 1.0, || "script not self-similar".into())?;
        }
        let s = EditScript { actions: vec![action(EditOp::Insert, "Ident"), action(EditOp::Delete, "Int")] };
        let t = EditScript { actions: vec![action(EditOp::Update, "Call"), action(EditOp::Move, "Block")] };
        let d = action_similarity(&s, &t, 0.5, 0.5).unwrap();
        ensure(d == 0.0, || format!("disjoint scripts give {d}"))?;
        Ok("worked example 0.5; symmetric, bounded, 1 on identical, 0 on disjoint".into())
    })();
    report("similarity properties", outcome);
}

#[test]
fn block_round_trip() {
    let outcome = (|| {
        let lang = MiniJava;
        let cfg = CampaignConfig::default();
        let mut largest = 0;
        for case in cases() {
            let id = &case.project.bug_id;
            let chunks = case.chunks(&lang).map_err(|e| format!("{id}: {e}"))?;
            let fixed = case
                .reference_fix(&chunks, &lang)
                .map_err(|e| format!("{id}: {e}"))?
                .ok_or_else(|| format!("{id}: no fixed tree"))?;
            let back = split_block_output(&serialize_label(&fixed), chunks.len())
                .map_err(|e| format!("{id}: {e}"))?;
            ensure(back == fixed, || format!("{id}: label round trip differs"))?;
            let files = load_sources(&case.project.root, lang.extension()).map_err(|e| e.to_string())?;
            let by_ref: BTreeMap<&str, SourceText> = files.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
            for no_ctx in [false, true] {
                let c = CampaignConfig { no_buggy_contexts: no_ctx, ..cfg.clone() };
                let block = build_block_from(id, &chunks, &by_ref, &c, &lang).map_err(|e| format!("{id}: {e}"))?;
                ensure(block.token_count <= TOKEN_BUDGET, || {
                    format!("{id}: block of {} tokens", block.token_count)
                })?;
                largest = largest.max(block.token_count);
            }
        }
        Ok(format!("{} bugs round-trip; largest block {largest} <= {TOKEN_BUDGET} tokens", cases().len()))
    })();
    report("block round trip", outcome);
}

fn chunk_of(lines: &[&str]) -> BuggyChunk {
    let lines: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
    let n = lines.len();
    let locations = if n == 0 {
        1
    } else {
        lines
            .iter()
            .filter(|l| {
                let l = l.as_str();
                !l.trim().is_empty() && !MiniJava.is_comment_line(l) && !MiniJava.is_null_location(l)
            })
            .count()
    };
    let c = BuggyChunk::new(0, "F.mj", 10, 10 + n - 1, lines, locations).unwrap();
    assert_eq!(count_effective_locations(&c, &MiniJava), locations);
    c
}

#[test]
fn classification_and_stats() {
    let outcome = (|| {
        // (chunk bodies, expected type); `[]` is an omission
        let table: Vec<(Vec<Vec<&str>>, BugType)> = vec![
            (vec![vec!["x = 1;"]], BugType::Type1),
            (vec![vec!["x = 1;", "y = 2;"]], BugType::Type2),
            (vec![vec!["x = 1;", ";"]], BugType::Type1),
            (vec![vec!["for (int i = 0; i < 10; i++);", "x = 1;"]], BugType::Type1),
            (vec![vec![";", "for(int i=0;i<10;i++);", "y++;", "z--;"]], BugType::Type2),
            (vec![vec!["", "x = 1;", "  "]], BugType::Type1),
            (vec![vec!["// comment", "x = 1;"]], BugType::Type1),
            (vec![vec!["/* a */", " * b", "x = 1;", "y = 1;"]], BugType::Type2),
            (vec![vec![]], BugType::Type1),
            (vec![vec!["if (a) {", "b();", "}"]], BugType::Type2),
            (vec![vec!["{", "}", "x = 1;"]], BugType::Type1),
            (vec![vec!["while (ok);", "ok = f();"]], BugType::Type1),
            (vec![vec!["x = 1;"], vec!["y = 2;"]], BugType::Type3),
            (vec![vec![";"], vec!["y = 2;"]], BugType::Type3),
            (vec![vec![], vec![]], BugType::Type3),
            (vec![vec!["a();", "b();", "c();"]], BugType::Type2),
            (vec![vec!["a();"], vec!["b();"], vec!["c();"]], BugType::Type3),
            (vec![vec!["return x;", "// done", ""]], BugType::Type1),
            (vec![vec!["x = 1;", ";", ";", "y = 2;"]], BugType::Type2),
            (vec![vec!["for (;;);", "if (a) return;"]], BugType::Type1),
        ];
        ensure(table.len() == 20, || "table must hold 20 cases".into())?;
        for (k, (bodies, want)) in table.iter().enumerate() {
            let chunks: Vec<BuggyChunk> = bodies.iter().map(|b| chunk_of(b)).collect();
            let got = BugType::classify(chunks.len(), location_count(&chunks)).map_err(|e| e.to_string())?;
            ensure(got == *want, || format!("case {k} {bodies:?}: {got:?}, expected {want:?}"))?;
        }
        let csv = std::fs::File::open(corpus_root().join("published/results.csv")).map_err(|e| e.to_string())?;
        let records = read_results_csv(csv).map_err(|e| e.to_string())?;
        let stats = patchweave_core::campaign::range_stats(&records);
        ensure(stats.chunks == BTreeMap::from([(1, 44), (2, 18), (3, 3)]), || {
            format!("chunk histogram {:?}", stats.chunks)
        })?;
        ensure(stats.locations.counts() == [37, 12, 7, 2, 4, 3], || {
            format!("location histogram {:?}", stats.locations.counts())
        })?;
        let mut types = BTreeMap::new();
        for r in &records {
            *types.entry(r.bug_type).or_insert(0usize) += 1;
        }
        let expected = BTreeMap::from([(BugType::Type1, 37), (BugType::Type2, 7), (BugType::Type3, 21)]);
        ensure(types == expected, || format!("type totals {types:?}"))?;
        ensure(types.values().sum::<usize>() == 65, || "type totals do not sum to 65".into())?;
        Ok("20-case table; chunks {1:44, 2:18, 3:3}; locations 37/12/7/2/4/3; 37+7+21 = 65".into())
    })();
    report("classification and stats", outcome);
}

#[test]
fn ablation_direction() {
    let outcome = (|| {
        let full = cr_ids(&full_run().report);
        let no_opt = campaign(CampaignConfig { no_patch_optimization: true, ..Default::default() });
        let no_ctx = campaign(CampaignConfig { no_buggy_contexts: true, ..Default::default() });
        let (a, b) = (cr_ids(&no_opt.report), cr_ids(&no_ctx.report));
        ensure(a.len() < full.len(), || format!("no patch optimization: {} vs full {}", a.len(), full.len()))?;
        ensure(b.len() < full.len(), || format!("no buggy contexts: {} vs full {}", b.len(), full.len()))?;
        let lost = |x: &[&str]| full.iter().filter(|id| !x.contains(id)).copied().collect::<Vec<_>>().join(",");
        Ok(format!(
            "CR full {} > no-optimization {} (lost {}) and > no-contexts {} (lost {})",
            full.len(),
            a.len(),
            lost(&a),
            b.len(),
            lost(&b)
        ))
    })();
    report("ablation direction", outcome);
}

#[test]
fn determinism() {
    let outcome = (|| {
        let first = &full_run().report_json;
        let second = campaign(CampaignConfig::default());
        ensure(*first == second.report_json, || "report.json differs between runs".into())?;
        let other_seed = campaign(CampaignConfig { seed: 99, ..Default::default() });
        Ok(format!(
            "two runs byte-identical ({} bytes); seed 99 {} the report",
            first.len(),
            if other_seed.report_json == *first { "does not change" } else { "changes" }
        ))
    })();
    report("determinism", outcome);
}
