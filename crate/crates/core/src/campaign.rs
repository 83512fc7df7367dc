//! Multi-bug repair runs, bug classification and range statistics.
//!
//! A bug directory holds `subject.json`, the buggy project tree and
//! optionally the fixed tree, `faults.json` and `hints.json` for the mock
//! generator. Without `subject.json` a directory is taken as a bare buggy
//! project validated with the bundled toolchain.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::blocker::{build_block_from, check_reserved};
use crate::config::CampaignConfig;
use crate::diffchunk::{extract_project, load_fault_spec, FaultSpec};
use crate::error::{Error, Result};
use crate::genbridge::{
    fragments_from_response, generate_mock, read_candidates, run_external, GeneratorRequest,
    GeneratorResponse, Hints,
};
use crate::model::{BugRecord, BugType, BuggyChunk, CombinedPatch, SourceText, VerdictKind};
use crate::optimizer::{combine, filter_candidates, rank_candidates};
use crate::syntax::SubjectLanguage;
use crate::validator::{load_sources, run_bug, PatchOutcome, SubjectProject, Validator};

/// Environment variable naming the default results root.
pub const RESULTS_ENV: &str = "PATCHWEAVE_RESULTS";

pub fn classify_bug(chunk_count: usize, location_count: usize) -> Result<BugType> {
    BugType::classify(chunk_count, location_count)
}

/// Hardest type present; `None` for an empty module.
pub fn aggregate_module_type(types: &[BugType]) -> Option<BugType> {
    types.iter().copied().max()
}

/// Counts per location bucket.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationBuckets {
    #[serde(rename = "1")]
    pub one: usize,
    #[serde(rename = "2")]
    pub two: usize,
    #[serde(rename = "3")]
    pub three: usize,
    #[serde(rename = "4")]
    pub four: usize,
    #[serde(rename = "5-9")]
    pub five_to_nine: usize,
    #[serde(rename = ">=10")]
    pub ten_or_more: usize,
}

impl LocationBuckets {
    pub const LABELS: [&'static str; 6] = ["1", "2", "3", "4", "5-9", ">=10"];

    pub fn add(&mut self, locations: usize) {
        match locations {
            0 | 1 => self.one += 1,
            2 => self.two += 1,
            3 => self.three += 1,
            4 => self.four += 1,
            5..=9 => self.five_to_nine += 1,
            _ => self.ten_or_more += 1,
        }
    }

    pub fn counts(&self) -> [usize; 6] {
        [
            self.one,
            self.two,
            self.three,
            self.four,
            self.five_to_nine,
            self.ten_or_more,
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeStats {
    pub chunks: BTreeMap<usize, usize>,
    pub locations: LocationBuckets,
}

/// Histograms of the CR bugs by chunk count and location bucket.
pub fn range_stats(records: &[BugRecord]) -> RangeStats {
    let mut stats = RangeStats::default();
    for r in records.iter().filter(|r| r.best_verdict == VerdictKind::Correct) {
        *stats.chunks.entry(r.chunk_count).or_default() += 1;
        stats.locations.add(r.location_count);
    }
    stats
}

impl RangeStats {
    pub fn render(&self) -> String {
        let mut out = String::from("chunks:\n");
        if self.chunks.is_empty() {
            out.push_str("  (none)\n");
        }
        for (k, v) in &self.chunks {
            out.push_str(&format!("  {k:>5}: {v}\n"));
        }
        out.push_str("locations:\n");
        for (label, v) in LocationBuckets::LABELS.iter().zip(self.locations.counts()) {
            out.push_str(&format!("  {label:>5}: {v}\n"));
        }
        out
    }
}

/// Reads published per-bug results: a CSV with header
/// `bug_id,chunk_count,location_count,verdict`. Row numbers in errors are
/// 1-based data rows.
pub fn read_results_csv(reader: impl std::io::Read) -> Result<Vec<BugRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::ResultsRow { row: 0, reason: e.to_string() })?
        .clone();
    let expected = ["bug_id", "chunk_count", "location_count", "verdict"];
    if !header.is_empty() && header.iter().ne(expected) {
        return Err(Error::ResultsRow {
            row: 0,
            reason: format!("header must be {}", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let bad = |reason: String| Error::ResultsRow { row, reason };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", rec.len())));
        }
        let count = |k: usize, name: &str| {
            rec[k]
                .parse::<usize>()
                .map_err(|_| bad(format!("{name} {:?} is not a count", &rec[k])))
        };
        let chunks = count(1, "chunk_count")?;
        let locations = count(2, "location_count")?;
        let verdict = VerdictKind::parse(&rec[3])
            .ok_or_else(|| bad(format!("unknown verdict {:?}", &rec[3])))?;
        let bug_id = rec[0].to_string();
        if bug_id.is_empty() {
            return Err(bad("empty bug_id".into()));
        }
        let module = bug_id.rsplit_once('-').map_or(bug_id.as_str(), |(m, _)| m).to_string();
        let mut record =
            BugRecord::new(bug_id, module, chunks, locations).map_err(|e| bad(e.to_string()))?;
        record.best_verdict = verdict;
        out.push(record);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubjectFile {
    #[serde(default)]
    bug_id: Option<String>,
    #[serde(default)]
    module_id: Option<String>,
    #[serde(default)]
    buggy: Option<String>,
    #[serde(default)]
    fixed: Option<String>,
    #[serde(default)]
    build_command: Option<Vec<String>>,
    #[serde(default)]
    test_command: Option<Vec<String>>,
    #[serde(default)]
    accepted_variants: Vec<Vec<Vec<String>>>,
}

/// Everything needed to run one bug.
#[derive(Debug, Clone, PartialEq)]
pub struct BugCase {
    pub dir: PathBuf,
    pub project: SubjectProject,
    /// Fixed project tree the reference fix is derived from.
    pub fixed_root: Option<PathBuf>,
    pub faults: Option<FaultSpec>,
    pub hints: Hints,
}

impl BugCase {
    /// Loads a bug directory. `faults` overrides `<dir>/faults.json`.
    pub fn load(dir: &Path, faults: Option<&Path>) -> Result<Self> {
        let subject_path = dir.join("subject.json");
        let subject: SubjectFile = if subject_path.is_file() {
            let text =
                std::fs::read_to_string(&subject_path).map_err(|e| Error::io(&subject_path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::json(&subject_path, e))?
        } else if dir.is_dir() {
            SubjectFile::default()
        } else {
            return Err(Error::io(dir, std::io::Error::from(std::io::ErrorKind::NotFound)));
        };
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "bug".into());
        let bug_id = subject.bug_id.unwrap_or(name);
        let module_id = subject
            .module_id
            .unwrap_or_else(|| bug_id.rsplit_once('-').map_or(bug_id.as_str(), |(m, _)| m).into());
        let root = subject.buggy.map_or_else(|| dir.to_path_buf(), |b| dir.join(b));
        let bundled = |a: &str| vec![crate::validator::BUNDLED_TOOLCHAIN.to_string(), a.to_string()];
        let faults_path = faults.map_or_else(|| dir.join("faults.json"), Path::to_path_buf);
        let faults = if faults.is_some() || faults_path.is_file() {
            Some(FaultSpec::load(&faults_path)?)
        } else {
            None
        };
        let hints_path = dir.join("hints.json");
        let hints = if hints_path.is_file() {
            Hints::load(&hints_path)?
        } else {
            Hints::default()
        };
        Ok(BugCase {
            dir: dir.to_path_buf(),
            project: SubjectProject {
                bug_id,
                module_id,
                root,
                build_command: subject.build_command.unwrap_or_else(|| bundled("build")),
                test_command: subject.test_command.unwrap_or_else(|| bundled("test")),
                reference_fix: None,
                accepted_variants: subject.accepted_variants,
            },
            fixed_root: subject.fixed.map(|f| dir.join(f)),
            faults,
            hints,
        })
    }

    /// Buggy chunks from the fault spec, or from the fix when no spec is given.
    pub fn chunks(&self, lang: &dyn SubjectLanguage) -> Result<Vec<BuggyChunk>> {
        match (&self.faults, &self.fixed_root) {
            (Some(spec), _) => load_fault_spec(spec, &self.project.root, lang),
            (None, Some(fixed)) => Ok(extract_project(&self.project.root, fixed, lang, 0)?
                .into_iter()
                .map(|h| h.chunk)
                .collect()),
            (None, None) => Err(Error::InvalidConfig {
                field: "faults",
                reason: format!("{}: no fault spec and no fixed tree", self.dir.display()),
            }),
        }
    }

    /// Fixed bodies for `chunks`, which must coincide with the fix's hunks.
    pub fn reference_fix(
        &self,
        chunks: &[BuggyChunk],
        lang: &dyn SubjectLanguage,
    ) -> Result<Option<Vec<Vec<String>>>> {
        let Some(fixed) = &self.fixed_root else {
            return Ok(None);
        };
        let hunks = extract_project(&self.project.root, fixed, lang, 0)?;
        let key = |c: &BuggyChunk| (c.file.clone(), c.start_line, c.end_line);
        let bodies: BTreeMap<_, _> = hunks.iter().map(|h| (key(&h.chunk), &h.inserted_lines)).collect();
        if hunks.len() != chunks.len() {
            return Err(Error::Invariant {
                what: "reference fix",
                reason: format!("fix has {} chunks, fault spec {}", hunks.len(), chunks.len()),
            });
        }
        chunks
            .iter()
            .map(|c| {
                bodies.get(&key(c)).map(|b| b.to_vec()).ok_or_else(|| Error::Invariant {
                    what: "reference fix",
                    reason: format!("{}:{}-{} is not a chunk of the fix", c.file, c.start_line, c.end_line),
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

/// Bug directories (those holding `subject.json`) under `root`, by name.
pub fn load_corpus(root: &Path) -> Result<Vec<BugCase>> {
    let mut dirs = Vec::new();
    for entry in std::fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.join("subject.json").is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    dirs.iter().map(|d| BugCase::load(d, None)).collect()
}

/// Where candidate fragments come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Generator {
    /// Seeded mock driven by each bug's hints.
    Mock,
    /// A committed candidates file (single-bug runs).
    Candidates(PathBuf),
    /// External command; see [`run_external`].
    External(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub generator: Generator,
    /// Results root; nothing is written when `None`.
    pub results_dir: Option<PathBuf>,
    /// Concurrent patch validations per bug.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            generator: Generator::Mock,
            results_dir: None,
            jobs: 1,
        }
    }
}

/// Counts of validated combined patches.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Funnel {
    pub examined: usize,
    pub filtered: usize,
    pub apply_error: usize,
    pub timeout: usize,
    /// Patches reaching at least CO.
    pub compiled: usize,
    /// At least PL.
    pub plausible: usize,
    pub correct: usize,
}

impl Funnel {
    fn add(&mut self, kind: VerdictKind) {
        self.examined += 1;
        match kind {
            VerdictKind::Filtered => self.filtered += 1,
            VerdictKind::ApplyError => self.apply_error += 1,
            VerdictKind::Timeout => self.timeout += 1,
            _ => {}
        }
        let tier = kind.tier();
        self.compiled += usize::from(tier >= 1);
        self.plausible += usize::from(tier >= 2);
        self.correct += usize::from(tier >= 3);
    }

    fn merge(&mut self, o: &Funnel) {
        self.examined += o.examined;
        self.filtered += o.filtered;
        self.apply_error += o.apply_error;
        self.timeout += o.timeout;
        self.compiled += o.compiled;
        self.plausible += o.plausible;
        self.correct += o.correct;
    }
}

/// Bugs by best verdict, cumulative over the funnel.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub bugs: usize,
    pub co: usize,
    pub pl: usize,
    pub cr: usize,
}

impl Totals {
    fn add(&mut self, r: &BugRecord) {
        let tier = r.best_verdict.tier();
        self.bugs += 1;
        self.co += usize::from(tier >= 1);
        self.pl += usize::from(tier >= 2);
        self.cr += usize::from(tier >= 3);
    }
}

/// Per-bug line of the report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugSummary {
    #[serde(flatten)]
    pub record: BugRecord,
    pub candidates: usize,
    pub malformed: usize,
    /// Surviving fragments per chunk after filtering.
    pub pool_sizes: Vec<usize>,
    pub funnel: Funnel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugFailure {
    pub bug_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    pub config: CampaignConfig,
    pub bugs: Vec<BugSummary>,
    pub excluded: Vec<String>,
    pub failures: Vec<BugFailure>,
    pub totals: Totals,
    pub per_type: BTreeMap<BugType, Totals>,
    pub range_stats: RangeStats,
    pub funnel: Funnel,
}

impl RepairReport {
    pub fn new(config: CampaignConfig) -> Self {
        RepairReport {
            config,
            bugs: Vec::new(),
            excluded: Vec::new(),
            failures: Vec::new(),
            totals: Totals::default(),
            per_type: BTreeMap::new(),
            range_stats: RangeStats::default(),
            funnel: Funnel::default(),
        }
    }

    pub fn records(&self) -> Vec<BugRecord> {
        self.bugs.iter().map(|b| b.record.clone()).collect()
    }

    /// Recomputes every aggregate from the per-bug entries.
    pub fn recompute(&mut self) {
        self.totals = Totals::default();
        self.per_type.clear();
        self.funnel = Funnel::default();
        for b in &self.bugs {
            self.totals.add(&b.record);
            self.per_type.entry(b.record.bug_type).or_default().add(&b.record);
            self.funnel.merge(&b.funnel);
        }
        self.range_stats = range_stats(&self.records());
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Human-readable summary table.
    pub fn summary_table(&self) -> String {
        let mut out = format!(
            "{:<16} {:>6} {:>4} {:>8} {:>9}  {}\n",
            "bug", "type", "ch", "loc", "examined", "verdict"
        );
        for b in &self.bugs {
            let r = &b.record;
            out.push_str(&format!(
                "{:<16} {:>6} {:>4} {:>8} {:>9}  {}\n",
                r.bug_id,
                format!("{:?}", r.bug_type),
                r.chunk_count,
                r.location_count,
                r.patches_examined,
                r.best_verdict
            ));
        }
        for f in &self.failures {
            out.push_str(&format!("{:<16} error: {}\n", f.bug_id, f.error));
        }
        let t = &self.totals;
        out.push_str(&format!("\nbugs {}  CO {}  PL {}  CR {}\n", t.bugs, t.co, t.pl, t.cr));
        for (ty, t) in &self.per_type {
            out.push_str(&format!("  {ty:?}: bugs {}  CR {}\n", t.bugs, t.cr));
        }
        if !self.excluded.is_empty() {
            out.push_str(&format!("excluded: {}\n", self.excluded.join(", ")));
        }
        out
    }
}

fn is_excluded(cfg: &CampaignConfig, p: &SubjectProject) -> bool {
    cfg.excluded_module_ids
        .iter()
        .any(|m| *m == p.bug_id || *m == p.module_id)
}

/// Artifacts of one bug's pipeline run.
#[derive(Debug, Clone)]
pub struct BugOutcome {
    pub summary: BugSummary,
    pub block: String,
    pub candidates: GeneratorResponse,
    pub combined: Vec<CombinedPatch>,
    pub outcomes: Vec<PatchOutcome>,
}

/// Runs the whole pipeline for one bug.
pub fn repair_bug(
    case: &BugCase,
    cfg: &CampaignConfig,
    opts: &RunOptions,
    lang: &dyn SubjectLanguage,
) -> Result<BugOutcome> {
    let deadline = Instant::now() + Duration::from_secs(cfg.timeout_seconds);
    let project = &case.project;
    let chunks = case.chunks(lang)?;
    if chunks.is_empty() {
        return Err(Error::Invariant {
            what: "bug",
            reason: "no buggy chunks".into(),
        });
    }
    let files = load_sources(&project.root, lang.extension())?;
    for c in &chunks {
        let source = files.get(&c.file).ok_or_else(|| Error::Invariant {
            what: "bug",
            reason: format!("{} is not a {} source", c.file, lang.name()),
        })?;
        check_reserved(source)?;
    }
    let by_ref: BTreeMap<&str, SourceText> =
        files.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    let block = build_block_from(&project.bug_id, &chunks, &by_ref, cfg, lang)?;
    let request = GeneratorRequest::new(&block, cfg.beam_size)?;
    let mut response = match &opts.generator {
        Generator::Mock => generate_mock(&request, &case.hints, cfg.seed, lang)?,
        Generator::Candidates(path) => read_candidates(path)?,
        Generator::External(argv) => {
            let work = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
            let left = deadline.saturating_duration_since(Instant::now());
            run_external(argv, &request, work.path(), left)?
        }
    };
    response.outputs.truncate(cfg.beam_size);
    let ids: Vec<usize> = chunks.iter().map(|c| c.chunk_id).collect();
    let (pools, malformed) = fragments_from_response(&response, &ids)?;

    let mut ranked = Vec::with_capacity(chunks.len());
    for (pool, chunk) in pools.iter().zip(&chunks) {
        let source = &files[&chunk.file];
        let kept = filter_candidates(pool, chunk, source, lang);
        ranked.push(rank_candidates(&kept, chunk, source, cfg, lang)?);
    }
    let pool_sizes: Vec<usize> = ranked.iter().map(Vec::len).collect();

    let mut project = project.clone();
    project.reference_fix = case.reference_fix(&chunks, lang)?;
    let validator = Validator::new(&project, &chunks, &files, lang)?;

    let mut combined = Vec::new();
    let run = if pool_sizes.contains(&0) {
        let mut record = BugRecord::new(
            &project.bug_id,
            &project.module_id,
            chunks.len(),
            crate::validator::location_count(&chunks),
        )?;
        record.detail = "a chunk has no surviving candidates".into();
        crate::validator::BugRun {
            record,
            outcomes: Vec::new(),
        }
    } else {
        let stream = combine(ranked, cfg.mc)?.inspect(|p| combined.push(p.clone()));
        run_bug(&validator, stream, deadline, opts.jobs)?
    };
    combined.truncate(run.outcomes.len());

    let mut funnel = Funnel::default();
    for o in &run.outcomes {
        funnel.add(o.verdict.kind);
    }
    Ok(BugOutcome {
        summary: BugSummary {
            record: run.record,
            candidates: response.outputs.len(),
            malformed,
            pool_sizes,
            funnel,
        },
        block: block.serialize(),
        candidates: response,
        combined,
        outcomes: run.outcomes,
    })
}

#[derive(Serialize)]
struct CombinedLine<'a> {
    emit_index: usize,
    model_ranks: Vec<usize>,
    aggregate_score: f64,
    fragments: Vec<&'a [String]>,
}

/// Writes `<root>/<bug_id>/{block.txt, candidates.jsonl, combined.jsonl,
/// verdicts.jsonl, logs/}`.
pub fn write_bug_artifacts(root: &Path, outcome: &BugOutcome) -> Result<()> {
    let dir = root.join(&outcome.summary.record.bug_id);
    let logs = dir.join("logs");
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    std::fs::create_dir_all(&logs).map_err(|e| Error::io(&logs, e))?;
    let write = |name: &str, text: &str| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write("block.txt", &outcome.block)?;
    write("candidates.jsonl", &outcome.candidates.to_jsonl())?;
    let mut combined = String::new();
    for p in &outcome.combined {
        let line = CombinedLine {
            emit_index: p.emit_index,
            model_ranks: p.model_ranks(),
            aggregate_score: p.aggregate_score,
            fragments: p.fragments.iter().map(|f| f.replacement_lines.as_slice()).collect(),
        };
        combined.push_str(&serde_json::to_string(&line).expect("serializes"));
        combined.push('\n');
    }
    write("combined.jsonl", &combined)?;
    let mut verdicts = String::new();
    for o in &outcome.outcomes {
        verdicts.push_str(&serde_json::to_string(o).expect("serializes"));
        verdicts.push('\n');
        let p = logs.join(format!("{:05}.log", o.emit_index));
        std::fs::write(&p, &o.log).map_err(|e| Error::io(&p, e))?;
    }
    write("verdicts.jsonl", &verdicts)
}

/// Runs every non-excluded bug and aggregates the report. Per-bug failures
/// are recorded and do not stop the campaign. With a results root, artifacts
/// and `report.json` are written there.
pub fn run_campaign(
    cfg: &CampaignConfig,
    cases: &[BugCase],
    opts: &RunOptions,
    lang: &dyn SubjectLanguage,
) -> Result<RepairReport> {
    let cfg = crate::config::validate_config(cfg.clone())?;
    let mut report = RepairReport::new(cfg.clone());
    if let Some(root) = &opts.results_dir {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    }
    for case in cases {
        if is_excluded(&cfg, &case.project) {
            report.excluded.push(case.project.bug_id.clone());
            continue;
        }
        match repair_bug(case, &cfg, opts, lang) {
            Ok(outcome) => {
                if let Some(root) = &opts.results_dir {
                    write_bug_artifacts(root, &outcome)?;
                }
                report.bugs.push(outcome.summary);
            }
            Err(e) => report.failures.push(BugFailure {
                bug_id: case.project.bug_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    report.recompute();
    if let Some(root) = &opts.results_dir {
        let p = root.join("report.json");
        std::fs::write(&p, report.to_json()).map_err(|e| Error::io(&p, e))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(chunks: usize, locations: usize, verdict: VerdictKind) -> BugRecord {
        let mut r = BugRecord::new("X-1", "X", chunks, locations).unwrap();
        r.best_verdict = verdict;
        r
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_bug(1, 1).unwrap(), BugType::Type1);
        assert_eq!(classify_bug(1, 3).unwrap(), BugType::Type2);
        assert_eq!(classify_bug(2, 2).unwrap(), BugType::Type3);
        assert!(classify_bug(0, 1).is_err());
        assert!(classify_bug(1, 0).is_err());
        use BugType::*;
        assert_eq!(aggregate_module_type(&[Type1, Type3]), Some(Type3));
        assert_eq!(aggregate_module_type(&[Type1]), Some(Type1));
        assert_eq!(aggregate_module_type(&[Type2, Type2]), Some(Type2));
        assert_eq!(aggregate_module_type(&[]), None);
    }

    #[test]
    fn chunk_histogram_counts_correct_bugs_only() {
        let rs: Vec<_> = [1, 1, 2, 3]
            .into_iter()
            .map(|c| record(c, c, VerdictKind::Correct))
            .chain([record(5, 5, VerdictKind::Plausible)])
            .collect();
        let s = range_stats(&rs);
        assert_eq!(s.chunks, BTreeMap::from([(1, 2), (2, 1), (3, 1)]));
        assert_eq!(s.locations.counts(), [2, 1, 1, 0, 0, 0]);
    }

    #[test]
    fn location_bucket_edges() {
        let mut b = LocationBuckets::default();
        for n in [1, 2, 3, 4, 5, 9, 10, 250] {
            b.add(n);
        }
        assert_eq!(b.counts(), [1, 1, 1, 1, 2, 2]);
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(json, r#"{"1":1,"2":1,"3":1,"4":1,"5-9":2,">=10":2}"#);
    }

    #[test]
    fn results_csv_parsing() {
        let ok = "bug_id,chunk_count,location_count,verdict\nChart-1,1,1,CR\nLang-7, 2, 5 ,PL\n";
        let rs = read_results_csv(ok.as_bytes()).unwrap();
        assert_eq!(rs.len(), 2);
        assert_eq!(rs[1].module_id, "Lang");
        assert_eq!(rs[1].bug_type, BugType::Type3);
        assert!(read_results_csv("".as_bytes()).unwrap().is_empty());
        assert!(read_results_csv("bug_id,chunk_count,location_count,verdict\n".as_bytes())
            .unwrap()
            .is_empty());
        for (bad, row) in [
            ("bug_id,chunk_count,location_count,verdict\nA-1,1,1,CR\nA-2,x,1,CR\n", 2),
            ("bug_id,chunk_count,location_count,verdict\nA-1,0,1,CR\n", 1),
            ("bug_id,chunk_count,location_count,verdict\nA-1,1,1,maybe\n", 1),
            ("bug_id,chunk_count,location_count,verdict\nA-1,1,1\n", 1),
            ("id,chunks\nA-1,1\n", 0),
        ] {
            match read_results_csv(bad.as_bytes()) {
                Err(Error::ResultsRow { row: r, .. }) => assert_eq!(r, row, "{bad}"),
                other => panic!("{bad}: {other:?}"),
            }
        }
    }

    #[test]
    fn empty_campaign_has_zero_totals() {
        let r = run_campaign(&CampaignConfig::default(), &[], &RunOptions::default(), &crate::MiniJava)
            .unwrap();
        assert_eq!(r.totals, Totals::default());
        assert!(r.bugs.is_empty() && r.per_type.is_empty());
        assert_eq!(r.range_stats, RangeStats::default());
    }

    proptest! {
        #[test]
        fn classification_agrees_with_records(c in 0usize..6, l in 0usize..30) {
            match (classify_bug(c, l), BugRecord::new("b", "m", c, l)) {
                (Ok(t), Ok(r)) => {
                    prop_assert_eq!(t, r.bug_type);
                    prop_assert_eq!(t == BugType::Type3, c >= 2);
                    prop_assert_eq!(t == BugType::Type1, c == 1 && l == 1);
                }
                (Err(_), Err(_)) => prop_assert!(c == 0 || l == 0),
                _ => prop_assert!(false, "classification and record disagree"),
            }
        }

        #[test]
        fn report_totals_are_sums(
            bugs in proptest::collection::vec((1usize..4, 1usize..12, 0usize..6), 0..40)
        ) {
            let kinds = [
                VerdictKind::Filtered, VerdictKind::ApplyError, VerdictKind::Timeout,
                VerdictKind::CompiledOnly, VerdictKind::Plausible, VerdictKind::Correct,
            ];
            let mut report = RepairReport::new(CampaignConfig::default());
            for (c, l, k) in bugs {
                report.bugs.push(BugSummary {
                    record: record(c, l, kinds[k]),
                    candidates: 0,
                    malformed: 0,
                    pool_sizes: vec![],
                    funnel: Funnel::default(),
                });
            }
            report.recompute();
            let t = &report.totals;
            prop_assert!(t.bugs >= t.co && t.co >= t.pl && t.pl >= t.cr);
            let sum = |f: fn(&Totals) -> usize| report.per_type.values().map(f).sum::<usize>();
            prop_assert_eq!(sum(|t| t.bugs), t.bugs);
            prop_assert_eq!(sum(|t| t.cr), t.cr);
            prop_assert_eq!(report.range_stats.chunks.values().sum::<usize>(), t.cr);
            prop_assert_eq!(report.range_stats.locations.counts().iter().sum::<usize>(), t.cr);
        }
    }
}
