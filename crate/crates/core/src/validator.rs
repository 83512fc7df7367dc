//! Patch application and build/test validation.
//!
//! Patches are applied to an in-memory overlay of the touched files. The
//! bundled toolchain (`minijava build` / `minijava test`) runs in-process on
//! that overlay; any other command runs in a fresh temporary copy of the
//! project with the overlay written over it.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BugRecord, BuggyChunk, CombinedPatch, SourceText, Verdict, VerdictKind};
use crate::syntax::minijava::Program;
use crate::syntax::{trees_equal_normalized, SubjectLanguage};

/// Command name that selects the in-process toolchain.
pub const BUNDLED_TOOLCHAIN: &str = "minijava";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectProject {
    pub bug_id: String,
    pub module_id: String,
    pub root: PathBuf,
    pub build_command: Vec<String>,
    pub test_command: Vec<String>,
    /// Developer fix as one replacement body per chunk.
    pub reference_fix: Option<Vec<Vec<String>>>,
    /// Further per-chunk bodies accepted as correct.
    pub accepted_variants: Vec<Vec<Vec<String>>>,
}

impl SubjectProject {
    pub fn check(&self, chunks: &[BuggyChunk]) -> Result<()> {
        if self.build_command.is_empty() || self.test_command.is_empty() {
            return Err(Error::InvalidConfig {
                field: "build_command/test_command",
                reason: "must be declared".into(),
            });
        }
        for fix in self.reference_fix.iter().chain(&self.accepted_variants) {
            if fix.len() != chunks.len() {
                return Err(Error::Invariant {
                    what: "reference fix",
                    reason: format!("{} bodies for {} chunks", fix.len(), chunks.len()),
                });
            }
        }
        Ok(())
    }
}

/// Replaced files of a patched project, keyed by project-relative path.
pub type Overlay = BTreeMap<String, SourceText>;

/// Splices `bodies` (one per chunk) into `files`. Later chunks of a file are
/// applied first so earlier line numbers stay valid. Fails when a chunk's
/// buggy lines no longer match the file.
pub fn apply_bodies(
    files: &BTreeMap<String, SourceText>,
    chunks: &[BuggyChunk],
    bodies: &[&[String]],
) -> Result<Overlay> {
    if bodies.len() != chunks.len() {
        return Err(Error::Apply(format!(
            "{} fragments for {} chunks",
            bodies.len(),
            chunks.len()
        )));
    }
    let mut order: Vec<usize> = (0..chunks.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&chunks[a], &chunks[b]);
        (&x.file, x.start_line).cmp(&(&y.file, y.start_line)).reverse()
    });
    let mut out: Overlay = BTreeMap::new();
    for k in order {
        let c = &chunks[k];
        let target = match out.get_mut(&c.file) {
            Some(t) => t,
            None => {
                let original = files
                    .get(&c.file)
                    .ok_or_else(|| Error::Apply(format!("{} is not in the project", c.file)))?;
                out.entry(c.file.clone()).or_insert_with(|| original.clone())
            }
        };
        let start = c.start_line - 1;
        let end = start + c.deleted_lines.len();
        if end > target.lines.len() || target.lines[start..end] != c.deleted_lines[..] {
            return Err(Error::Apply(format!(
                "{}:{}-{} no longer matches chunk {}",
                c.file, c.start_line, c.end_line, c.chunk_id
            )));
        }
        target.lines.splice(start..end, bodies[k].iter().cloned());
    }
    Ok(out)
}

pub fn apply_patch(
    files: &BTreeMap<String, SourceText>,
    chunks: &[BuggyChunk],
    patch: &CombinedPatch,
) -> Result<Overlay> {
    if patch
        .fragments
        .iter()
        .zip(chunks)
        .any(|(f, c)| f.chunk_id != c.chunk_id)
    {
        return Err(Error::Apply("fragments do not align with chunks".into()));
    }
    let bodies: Vec<&[String]> = patch
        .fragments
        .iter()
        .map(|f| f.replacement_lines.as_slice())
        .collect();
    apply_bodies(files, chunks, &bodies)
}

/// Every source file of a project tree, keyed by `/`-separated relative path.
pub fn load_sources(root: &Path, ext: &str) -> Result<BTreeMap<String, SourceText>> {
    let mut out = BTreeMap::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Other(format!("{}: {e}", root.display())))?;
        let path = entry.path();
        if entry.file_type().is_file() && path.extension().is_some_and(|e| e == ext) {
            let rel = relative(root, path);
            out.insert(rel.clone(), SourceText::read(root, &rel)?);
        }
    }
    Ok(out)
}

fn relative(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .expect("walk stays under root")
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Outcome of one build or test step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepResult {
    Passed,
    Failed,
    TimedOut,
}

/// Runs project commands against a patched overlay.
pub struct Validator<'a> {
    pub project: &'a SubjectProject,
    pub chunks: &'a [BuggyChunk],
    /// Buggy-version sources of the whole project.
    pub files: &'a BTreeMap<String, SourceText>,
    pub lang: &'a dyn SubjectLanguage,
    reference: Vec<Overlay>,
}

impl<'a> Validator<'a> {
    pub fn new(
        project: &'a SubjectProject,
        chunks: &'a [BuggyChunk],
        files: &'a BTreeMap<String, SourceText>,
        lang: &'a dyn SubjectLanguage,
    ) -> Result<Self> {
        project.check(chunks)?;
        let mut reference = Vec::new();
        for fix in project.reference_fix.iter().chain(&project.accepted_variants) {
            let bodies: Vec<&[String]> = fix.iter().map(Vec::as_slice).collect();
            reference.push(apply_bodies(files, chunks, &bodies)?);
        }
        Ok(Validator {
            project,
            chunks,
            files,
            lang,
            reference,
        })
    }

    /// Build, then test, then compare against the reference fix.
    pub fn validate(&self, overlay: &Overlay, deadline: Instant) -> (Verdict, String) {
        let mut log = String::new();
        if Instant::now() >= deadline {
            return (Verdict::new(VerdictKind::Timeout, "deadline expired"), log);
        }
        match self.run(&self.project.build_command, overlay, deadline, &mut log) {
            Ok(StepResult::Passed) => {}
            Ok(StepResult::Failed) => return (Verdict::new(VerdictKind::Filtered, "build failed"), log),
            Ok(StepResult::TimedOut) => return (Verdict::new(VerdictKind::Timeout, "build timed out"), log),
            Err(e) => return (Verdict::new(VerdictKind::ApplyError, e.to_string()), log),
        }
        match self.run(&self.project.test_command, overlay, deadline, &mut log) {
            Ok(StepResult::Passed) => {}
            Ok(StepResult::Failed) => return (Verdict::new(VerdictKind::CompiledOnly, "tests failed"), log),
            Ok(StepResult::TimedOut) => return (Verdict::new(VerdictKind::Timeout, "tests timed out"), log),
            Err(e) => return (Verdict::new(VerdictKind::ApplyError, e.to_string()), log),
        }
        if self.matches_reference(overlay) {
            (Verdict::new(VerdictKind::Correct, "matches the reference fix"), log)
        } else {
            (Verdict::new(VerdictKind::Plausible, "tests pass"), log)
        }
    }

    fn matches_reference(&self, overlay: &Overlay) -> bool {
        self.reference.iter().any(|reference| {
            let files: std::collections::BTreeSet<&String> =
                reference.keys().chain(overlay.keys()).collect();
            files.into_iter().all(|f| {
                let text = |o: &Overlay| {
                    o.get(f)
                        .or_else(|| self.files.get(f))
                        .map(SourceText::to_text)
                        .unwrap_or_default()
                };
                trees_equal_normalized(&text(overlay), &text(reference), self.lang)
            })
        })
    }

    fn run(
        &self,
        argv: &[String],
        overlay: &Overlay,
        deadline: Instant,
        log: &mut String,
    ) -> Result<StepResult> {
        log.push_str(&format!("$ {}\n", argv.join(" ")));
        if argv.first().map(String::as_str) == Some(BUNDLED_TOOLCHAIN) {
            return Ok(self.run_bundled(argv, overlay, deadline, log));
        }
        self.run_external(argv, overlay, deadline, log)
    }

    fn run_bundled(
        &self,
        argv: &[String],
        overlay: &Overlay,
        deadline: Instant,
        log: &mut String,
    ) -> StepResult {
        let texts: Vec<(String, String)> = self
            .files
            .iter()
            .map(|(path, src)| {
                let src = overlay.get(path).unwrap_or(src);
                (path.clone(), src.to_text())
            })
            .collect();
        let result = bundled_toolchain(
            argv.get(1).map(String::as_str).unwrap_or(""),
            texts.iter().map(|(p, t)| (p.as_str(), t.as_str())),
            Some(deadline),
        );
        log.push_str(&result.1);
        result.0
    }

    fn run_external(
        &self,
        argv: &[String],
        overlay: &Overlay,
        deadline: Instant,
        log: &mut String,
    ) -> Result<StepResult> {
        let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        copy_tree(&self.project.root, dir.path())?;
        for (rel, src) in overlay {
            let path = dir.path().join(rel);
            std::fs::write(&path, src.to_text()).map_err(|e| Error::io(&path, e))?;
        }
        let out_path = dir.path().join(".patchweave-output.log");
        let out = File::create(&out_path).map_err(|e| Error::io(&out_path, e))?;
        let err = out.try_clone().map_err(|e| Error::io(&out_path, e))?;
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .current_dir(dir.path())
            .stdin(Stdio::null())
            .stdout(out)
            .stderr(err)
            .spawn()
            .map_err(|e| Error::Apply(format!("cannot run {}: {e}", argv[0])))?;
        let status = loop {
            if let Some(s) = child.try_wait().map_err(|e| Error::io(&argv[0], e))? {
                break Some(s);
            }
            if Instant::now() >= deadline {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            std::thread::sleep(Duration::from_millis(5));
        };
        log.push_str(&std::fs::read_to_string(&out_path).unwrap_or_default());
        Ok(match status {
            None => StepResult::TimedOut,
            Some(s) if s.success() => StepResult::Passed,
            Some(_) => StepResult::Failed,
        })
    }
}

fn copy_tree(from: &Path, to: &Path) -> Result<()> {
    for entry in walkdir::WalkDir::new(from) {
        let entry = entry.map_err(|e| Error::Other(format!("{}: {e}", from.display())))?;
        let target = to.join(entry.path().strip_prefix(from).expect("under root"));
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&target).map_err(|e| Error::io(&target, e))?;
        } else if entry.file_type().is_file() {
            std::fs::copy(entry.path(), &target).map_err(|e| Error::io(&target, e))?;
        }
    }
    Ok(())
}

/// `build` or `test` over in-memory sources. Returns the outcome and a log.
pub fn bundled_toolchain<'a>(
    action: &str,
    files: impl IntoIterator<Item = (&'a str, &'a str)>,
    deadline: Option<Instant>,
) -> (StepResult, String) {
    let program = match Program::build(files) {
        Ok(p) => p,
        Err(diags) => return (StepResult::Failed, diags.join("\n") + "\n"),
    };
    match action {
        "build" => (StepResult::Passed, "build ok\n".into()),
        "test" => {
            let report = program.run_tests(deadline);
            let result = if report.timed_out {
                StepResult::TimedOut
            } else if report.success() {
                StepResult::Passed
            } else {
                StepResult::Failed
            };
            (result, report.render())
        }
        other => (StepResult::Failed, format!("unknown toolchain action {other:?}\n")),
    }
}

/// Verdict of one examined patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchOutcome {
    pub emit_index: usize,
    pub model_ranks: Vec<usize>,
    pub aggregate_score: f64,
    pub verdict: Verdict,
    #[serde(skip)]
    pub log: String,
}

/// Result of validating one bug's combination stream.
#[derive(Debug, Clone, PartialEq)]
pub struct BugRun {
    pub record: BugRecord,
    pub outcomes: Vec<PatchOutcome>,
}

/// Number of effective locations of a chunk set, never below one.
pub fn location_count(chunks: &[BuggyChunk]) -> usize {
    chunks.iter().map(|c| c.effective_locations).sum::<usize>().max(1)
}

/// Validates combinations in emit order until the first CR, the end of the
/// stream or the deadline. Up to `jobs` patches are validated at once;
/// results past the first CR are discarded.
pub fn run_bug(
    validator: &Validator<'_>,
    combined: impl IntoIterator<Item = CombinedPatch>,
    deadline: Instant,
    jobs: usize,
) -> Result<BugRun> {
    let project = validator.project;
    let mut record = BugRecord::new(
        &project.bug_id,
        &project.module_id,
        validator.chunks.len().max(1),
        location_count(validator.chunks),
    )?;
    let mut outcomes = Vec::new();
    let mut timed_out = false;
    let mut stream = combined.into_iter();
    'outer: loop {
        if Instant::now() >= deadline {
            timed_out = true;
            break;
        }
        let batch: Vec<CombinedPatch> = stream.by_ref().take(jobs.max(1)).collect();
        if batch.is_empty() {
            break;
        }
        let results: Vec<(Verdict, String)> = if batch.len() == 1 {
            vec![check_one(validator, &batch[0], deadline)]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = batch
                    .iter()
                    .map(|p| s.spawn(move || check_one(validator, p, deadline)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("validation worker panicked"))
                    .collect()
            })
        };
        for (patch, (verdict, log)) in batch.iter().zip(results) {
            let kind = verdict.kind;
            outcomes.push(PatchOutcome {
                emit_index: patch.emit_index,
                model_ranks: patch.model_ranks(),
                aggregate_score: patch.aggregate_score,
                verdict,
                log,
            });
            if kind == VerdictKind::Timeout {
                timed_out = true;
                break 'outer;
            }
            if kind.tier() > record.best_verdict.tier() {
                record.best_verdict = kind;
            }
            if kind == VerdictKind::Correct {
                break 'outer;
            }
        }
    }
    record.patches_examined = outcomes
        .iter()
        .filter(|o| o.verdict.kind != VerdictKind::Timeout)
        .count();
    if timed_out && record.best_verdict.tier() == 0 {
        record.best_verdict = VerdictKind::Timeout;
    }
    Ok(BugRun { record, outcomes })
}

fn check_one(validator: &Validator<'_>, patch: &CombinedPatch, deadline: Instant) -> (Verdict, String) {
    match apply_patch(validator.files, validator.chunks, patch) {
        Ok(overlay) => validator.validate(&overlay, deadline),
        Err(e) => (Verdict::new(VerdictKind::ApplyError, e.to_string()), String::new()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CandidateFragment;
    use crate::syntax::MiniJava;

    const LIB: &str = "class Calc {\n  static int add(int a, int b) {\n    return a - b;\n  }\n  static int twice(int a) {\n    int r = a;\n    return r;\n  }\n}\n";
    const TESTS: &str = "class CalcTest {\n  static void testAdd() {\n    assertEquals(5, Calc.add(2, 3));\n  }\n  static void testTwice() {\n    assertEquals(8, Calc.twice(4));\n  }\n}\n";

    fn files() -> BTreeMap<String, SourceText> {
        BTreeMap::from([
            ("Calc.mj".to_string(), SourceText::new("Calc.mj", LIB)),
            ("CalcTest.mj".to_string(), SourceText::new("CalcTest.mj", TESTS)),
        ])
    }

    fn chunks() -> Vec<BuggyChunk> {
        vec![
            BuggyChunk::new(0, "Calc.mj", 3, 3, vec!["    return a - b;".into()], 1).unwrap(),
            BuggyChunk::new(1, "Calc.mj", 6, 6, vec!["    int r = a;".into()], 1).unwrap(),
        ]
    }

    fn project(root: &Path) -> SubjectProject {
        SubjectProject {
            bug_id: "Calc-1".into(),
            module_id: "Calc".into(),
            root: root.to_path_buf(),
            build_command: vec!["minijava".into(), "build".into()],
            test_command: vec!["minijava".into(), "test".into()],
            reference_fix: Some(vec![vec!["    return a + b;".into()], vec!["    int r = a * 2;".into()]]),
            accepted_variants: vec![],
        }
    }

    fn patch(bodies: [&str; 2], emit: usize) -> CombinedPatch {
        let frags = bodies
            .iter()
            .enumerate()
            .map(|(k, b)| CandidateFragment::new(k, vec![b.to_string()], emit, 0.0).unwrap())
            .collect();
        CombinedPatch::new(frags, emit).unwrap()
    }

    fn far() -> Instant {
        Instant::now() + Duration::from_secs(60)
    }

    #[test]
    fn identity_patch_leaves_files_unchanged() {
        let f = files();
        let out = apply_patch(&f, &chunks(), &patch(["    return a - b;", "    int r = a;"], 1)).unwrap();
        assert_eq!(out["Calc.mj"], f["Calc.mj"]);
    }

    #[test]
    fn two_chunks_in_one_file_are_spliced() {
        let f = files();
        let out = apply_patch(&f, &chunks(), &patch(["    return b;", "    int r = 0;\n    r = a;"], 1)).unwrap();
        // hand-built expectation
        let expected = "class Calc {\n  static int add(int a, int b) {\n    return b;\n  }\n  static int twice(int a) {\n    int r = 0;\n    r = a;\n    return r;\n  }\n}\n";
        assert_eq!(out["Calc.mj"].to_text(), expected);
    }

    #[test]
    fn omission_inserts_before_the_anchor() {
        let src = SourceText::new("F.mj", "l1\nl2\nl3\nl4\nl5\nl6\nl7\nl8\n");
        let f = BTreeMap::from([("F.mj".to_string(), src)]);
        let c = [BuggyChunk::new(0, "F.mj", 7, 6, vec![], 1).unwrap()];
        let new = vec!["x".to_string()];
        let out = apply_bodies(&f, &c, &[&new]).unwrap();
        assert_eq!(out["F.mj"].lines, ["l1", "l2", "l3", "l4", "l5", "l6", "x", "l7", "l8"]);
    }

    #[test]
    fn drifted_ranges_are_apply_errors() {
        let f = files();
        let mut c = chunks();
        c[0].deleted_lines = vec!["    return 0;".into()];
        assert!(matches!(
            apply_patch(&f, &c, &patch(["a;", "b;"], 1)),
            Err(Error::Apply(_))
        ));
    }

    #[test]
    fn verdict_tiers() {
        let dir = tempfile::tempdir().unwrap();
        let p = project(dir.path());
        let (f, c) = (files(), chunks());
        let v = Validator::new(&p, &c, &f, &MiniJava).unwrap();
        let verdict = |b: [&str; 2]| {
            let overlay = apply_patch(&f, &c, &patch(b, 1)).unwrap();
            v.validate(&overlay, far()).0.kind
        };
        assert_eq!(verdict(["    return a +;", "    int r = a;"]), VerdictKind::Filtered);
        assert_eq!(verdict(["    return zz;", "    int r = a;"]), VerdictKind::Filtered);
        assert_eq!(verdict(["    return a + b;", "    int r = a;"]), VerdictKind::CompiledOnly);
        assert_eq!(verdict(["    return a + b;", "    int r = a + a;"]), VerdictKind::Plausible);
        assert_eq!(verdict(["  return a+b;", "      int r = a *2;"]), VerdictKind::Correct);
        let overlay = apply_patch(&f, &c, &patch(["    return a + b;", "    int r = a * 2;"], 1)).unwrap();
        assert_eq!(v.validate(&overlay, Instant::now()).0.kind, VerdictKind::Timeout);
    }

    #[test]
    fn accepted_variants_count_as_correct() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = project(dir.path());
        p.accepted_variants = vec![vec![vec!["    return b + a;".into()], vec!["    int r = a + a;".into()]]];
        let (f, c) = (files(), chunks());
        let v = Validator::new(&p, &c, &f, &MiniJava).unwrap();
        let overlay = apply_patch(&f, &c, &patch(["    return b + a;", "    int r = a + a;"], 1)).unwrap();
        assert_eq!(v.validate(&overlay, far()).0.kind, VerdictKind::Correct);
    }

    #[test]
    fn run_bug_stops_at_first_correct_patch() {
        let dir = tempfile::tempdir().unwrap();
        let p = project(dir.path());
        let (f, c) = (files(), chunks());
        let v = Validator::new(&p, &c, &f, &MiniJava).unwrap();
        let stream = vec![
            patch(["    return a + b;", "    int r = a;"], 1),
            patch(["    return a + b;", "    int r = a * 2;"], 2),
            patch(["    return a;", "    int r = a;"], 3),
        ];
        for jobs in [1, 2, 4] {
            let run = run_bug(&v, stream.clone(), far(), jobs).unwrap();
            assert_eq!(run.record.best_verdict, VerdictKind::Correct);
            assert_eq!(run.record.patches_examined, 2);
            assert_eq!(run.record.bug_type, crate::model::BugType::Type3);
        }
        let first = run_bug(&v, stream[1..2].to_vec(), far(), 1).unwrap();
        assert_eq!(first.record.patches_examined, 1);
        let zero = run_bug(&v, stream.clone(), Instant::now(), 1).unwrap();
        assert_eq!(zero.record.best_verdict, VerdictKind::Timeout);
        assert_eq!(zero.record.patches_examined, 0);
        let exhausted = run_bug(&v, vec![stream[0].clone(), stream[2].clone()], far(), 1).unwrap();
        assert_eq!(exhausted.record.patches_examined, 2);
        assert_eq!(exhausted.record.best_verdict, VerdictKind::CompiledOnly);
    }

    #[test]
    fn external_commands_run_in_a_copy() {
        let dir = tempfile::tempdir().unwrap();
        for (name, src) in files() {
            std::fs::write(dir.path().join(&name), src.to_text()).unwrap();
        }
        let mut p = project(dir.path());
        p.build_command = vec!["sh".into(), "-c".into(), "grep -q 'a + b' Calc.mj".into()];
        p.test_command = vec!["true".into()];
        let (f, c) = (files(), chunks());
        let v = Validator::new(&p, &c, &f, &MiniJava).unwrap();
        let good = apply_patch(&f, &c, &patch(["    return a + b;", "    int r = a;"], 1)).unwrap();
        assert_eq!(v.validate(&good, far()).0.kind, VerdictKind::Plausible);
        let bad = apply_patch(&f, &c, &patch(["    return b;", "    int r = a;"], 1)).unwrap();
        assert_eq!(v.validate(&bad, far()).0.kind, VerdictKind::Filtered);
        // original untouched
        assert_eq!(std::fs::read_to_string(dir.path().join("Calc.mj")).unwrap(), LIB);
        p.build_command = vec!["sleep".into(), "5".into()];
        let v = Validator::new(&p, &c, &f, &MiniJava).unwrap();
        let (verdict, _) = v.validate(&good, Instant::now() + Duration::from_millis(100));
        assert_eq!(verdict.kind, VerdictKind::Timeout);
        p.build_command = vec!["/nonexistent/tool".into()];
        let v = Validator::new(&p, &c, &f, &MiniJava).unwrap();
        assert_eq!(v.validate(&good, far()).0.kind, VerdictKind::ApplyError);
    }
}
