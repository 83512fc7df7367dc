//! `patchweave` command-line front end.
//!
//! Exit codes: 0 on success (for `repair`, a plausible or correct patch was
//! found), 1 when a run completes without one, 2 on usage or input errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use patchweave_core::campaign::{
    load_corpus, read_results_csv, run_campaign, BugCase, Generator, RepairReport, RunOptions,
    RESULTS_ENV,
};
use patchweave_core::diffchunk::{extract_hunks, extract_project};
use patchweave_core::validator::{bundled_toolchain, load_sources, StepResult};
use patchweave_core::{BugType, CampaignConfig, MiniJava, SourceText, SubjectLanguage, VerdictKind};

#[derive(Parser)]
#[command(name = "patchweave", version, about = "Multi-chunk automated program repair")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the buggy chunks between two files (or two project trees) as JSON.
    Extract {
        #[arg(long)]
        buggy: PathBuf,
        #[arg(long)]
        fixed: PathBuf,
        /// Unchanged lines absorbed into one chunk.
        #[arg(long, default_value_t = 0)]
        merge_distance: usize,
    },
    /// Repair one bug.
    Repair {
        /// Bug directory (with subject.json) or bare buggy project tree.
        #[arg(long)]
        project: PathBuf,
        /// Fault spec; defaults to <project>/faults.json.
        #[arg(long)]
        faults: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
        /// Read candidates from a JSONL file instead of generating them.
        #[arg(long, conflicts_with = "generator")]
        candidates: Option<PathBuf>,
        /// External generator command; `{request}` and `{output}` are substituted.
        #[arg(long)]
        generator: Option<String>,
    },
    /// Run every bug of a corpus directory.
    Campaign {
        #[arg(long)]
        corpus: PathBuf,
        /// Only these bug ids (comma separated).
        #[arg(long, value_delimiter = ',')]
        bugs: Vec<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Histograms of correctly repaired bugs from a results CSV
    /// (bug_id,chunk_count,location_count,verdict).
    Stats {
        #[arg(long)]
        results: PathBuf,
        /// Print JSON instead of tables.
        #[arg(long)]
        json: bool,
    },
    /// Print the default configuration file.
    Config,
    /// Bundled toolchain for the subject language.
    Minijava {
        #[command(subcommand)]
        action: ToolAction,
    },
}

#[derive(Subcommand)]
enum ToolAction {
    /// Parse and resolve every source file.
    Build {
        #[arg(default_value = ".")]
        dir: PathBuf,
    },
    /// Build, then run every test method.
    Test {
        #[arg(default_value = ".")]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    no_patch_optimization: bool,
    #[arg(long)]
    no_buggy_contexts: bool,
    #[arg(long)]
    mc: Option<usize>,
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    timeout: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Concurrent patch validations.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Results root directory.
    #[arg(long, env = RESULTS_ENV, default_value = "results")]
    results: PathBuf,
}

impl RunArgs {
    fn config(&self) -> Result<CampaignConfig> {
        let mut cfg = match &self.config {
            Some(path) => CampaignConfig::load(path)
                .with_context(|| format!("loading {}", path.display()))?,
            None => CampaignConfig::default(),
        };
        cfg.no_patch_optimization |= self.no_patch_optimization;
        cfg.no_buggy_contexts |= self.no_buggy_contexts;
        if let Some(v) = self.mc {
            cfg.mc = v;
        }
        if let Some(v) = self.beam {
            cfg.beam_size = v;
        }
        if let Some(v) = self.timeout {
            cfg.timeout_seconds = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        Ok(patchweave_core::validate_config(cfg)?)
    }

    fn options(&self, generator: Generator) -> Result<RunOptions> {
        if self.jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        Ok(RunOptions {
            generator,
            results_dir: Some(self.results.clone()),
            jobs: self.jobs,
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    let lang = MiniJava;
    match command {
        Command::Extract {
            buggy,
            fixed,
            merge_distance,
        } => extract(&buggy, &fixed, merge_distance, &lang),
        Command::Repair {
            project,
            faults,
            run,
            candidates,
            generator,
        } => {
            let cfg = run.config()?;
            let generator = match (candidates, generator) {
                (Some(path), _) => Generator::Candidates(path),
                (None, Some(cmd)) => Generator::External(
                    shlex::split(&cmd).filter(|v| !v.is_empty()).context("unparsable --generator")?,
                ),
                (None, None) => Generator::Mock,
            };
            let case = BugCase::load(&project, faults.as_deref())
                .with_context(|| format!("loading {}", project.display()))?;
            let report = run_campaign(&cfg, &[case], &run.options(generator)?, &lang)?;
            print_report(&report, &run.results);
            if let Some(f) = report.failures.first() {
                eprintln!("error: {}: {}", f.bug_id, f.error);
            }
            let best = report.bugs.first().map(|b| b.record.best_verdict);
            Ok(if best.is_some_and(|v| v >= VerdictKind::Plausible) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Campaign { corpus, bugs, run } => {
            let cfg = run.config()?;
            let mut cases = load_corpus(&corpus)
                .with_context(|| format!("loading corpus {}", corpus.display()))?;
            if !bugs.is_empty() {
                for b in &bugs {
                    if !cases.iter().any(|c| &c.project.bug_id == b) {
                        bail!("no bug {b} in {}", corpus.display());
                    }
                }
                cases.retain(|c| bugs.contains(&c.project.bug_id));
            }
            let report = run_campaign(&cfg, &cases, &run.options(Generator::Mock)?, &lang)?;
            print_report(&report, &run.results);
            Ok(ExitCode::SUCCESS)
        }
        Command::Stats { results, json } => {
            let file = std::fs::File::open(&results)
                .with_context(|| format!("cannot read {}", results.display()))?;
            let records = read_results_csv(file)
                .with_context(|| format!("{}", results.display()))?;
            let stats = patchweave_core::campaign::range_stats(&records);
            let mut per_type = [0usize; 3];
            for r in records.iter().filter(|r| r.best_verdict == VerdictKind::Correct) {
                per_type[r.bug_type as usize] += 1;
            }
            if json {
                let doc = serde_json::json!({
                    "chunks": stats.chunks,
                    "locations": stats.locations,
                    "types": {
                        "Type1": per_type[BugType::Type1 as usize],
                        "Type2": per_type[BugType::Type2 as usize],
                        "Type3": per_type[BugType::Type3 as usize],
                        "total": per_type.iter().sum::<usize>(),
                    },
                });
                println!("{}", serde_json::to_string_pretty(&doc)?);
            } else {
                print!("{}", stats.render());
                println!("types:");
                for (k, n) in per_type.iter().enumerate() {
                    println!("  Type{}: {n}", k + 1);
                }
                println!("  total: {}", per_type.iter().sum::<usize>());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Config => {
            print!("{}", CampaignConfig::default().to_toml());
            Ok(ExitCode::SUCCESS)
        }
        Command::Minijava { action } => {
            let (name, dir) = match &action {
                ToolAction::Build { dir } => ("build", dir),
                ToolAction::Test { dir } => ("test", dir),
            };
            if !dir.is_dir() {
                bail!("{} is not a directory", dir.display());
            }
            let files = load_sources(dir, lang.extension())?;
            let texts: Vec<(String, String)> =
                files.iter().map(|(k, v)| (k.clone(), v.to_text())).collect();
            let (result, log) = bundled_toolchain(
                name,
                texts.iter().map(|(p, t)| (p.as_str(), t.as_str())),
                None,
            );
            print!("{log}");
            Ok(match result {
                StepResult::Passed => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            })
        }
    }
}

fn extract(buggy: &Path, fixed: &Path, merge: usize, lang: &dyn SubjectLanguage) -> Result<ExitCode> {
    for p in [buggy, fixed] {
        if !p.exists() {
            bail!("{}: no such file or directory", p.display());
        }
    }
    let hunks = if buggy.is_dir() && fixed.is_dir() {
        extract_project(buggy, fixed, lang, merge)?
    } else if buggy.is_file() && fixed.is_file() {
        let read = |p: &Path| -> Result<SourceText> {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            let name = p.file_name().map_or_else(|| p.to_string_lossy(), |n| n.to_string_lossy());
            Ok(SourceText::new(name, &text))
        };
        extract_hunks(&read(buggy)?, &read(fixed)?, lang, merge)
    } else {
        bail!("--buggy and --fixed must both be files or both be directories");
    };
    println!("{}", serde_json::to_string_pretty(&hunks)?);
    Ok(ExitCode::SUCCESS)
}

fn print_report(report: &RepairReport, results: &Path) {
    print!("{}", report.summary_table());
    println!("report: {}", results.join("report.json").display());
}
