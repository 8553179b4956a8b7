//! Command-line driver: a run config names the inputs, each subcommand runs
//! one stage (or all of them) and writes deterministic artifacts.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::callgraph::{build_all, detect_entry_points, parse_exclude_list, CallGraph, EntryPointConfig, ExcludeList};
use crate::checkmining::{analyze_all, CheckSet, EntryAnalysis, MiningConfig, MiningContext};
use crate::cpfilter::{parse_filter, FilterSpec};
use crate::ir::{check_source, parse_program_sources, MethodRef, Program};
use crate::matchlang::{identify_context_queries, parse_matchers, parse_seeds};
use crate::report::{build_exploration_dump, emit_exploration_dump, emit_rule_reports, summarize_run, to_json, Format};
use crate::rulemine::{default_minconf, mine_rules, parse_confidence, MinSupport, Rational, RuleSet};

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_ANALYSIS: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Analysis(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Analysis(_) => EXIT_ANALYSIS,
        }
    }
}

fn config_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

fn analysis_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Analysis(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "authmine",
    version,
    about = "Mine authorization checks and flag inconsistently protected entry points"
)]
pub struct Cli {
    /// Confidence threshold, e.g. 0.85 or 17/20.
    #[arg(long, global = true)]
    pub minconf: Option<String>,
    /// Support threshold: `k/E` for an absolute count, or a fraction.
    #[arg(long, global = true)]
    pub minsup: Option<String>,
    /// Worker threads for per-entry-point analysis.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Rule report format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump the call graph of every entry point.
    Callgraph { config: PathBuf },
    /// Dump strings, fields and methods seen by candidate conditionals.
    Explore { config: PathBuf },
    /// Mine the authorization checks of every entry point.
    MineChecks { config: PathBuf },
    /// Mine rules from a check set file.
    MineRules {
        checks: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage and write all artifacts.
    Analyze { config: PathBuf },
    /// Render reports from rule and check set files.
    Report {
        rules: PathBuf,
        #[arg(long)]
        checks: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Threshold {
    Number(f64),
    Text(String),
}

impl Threshold {
    fn text(&self) -> String {
        match self {
            Threshold::Number(v) => v.to_string(),
            Threshold::Text(s) => s.clone(),
        }
    }
}

/// Run configuration; relative paths are resolved against the config file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub ir_paths: Vec<PathBuf>,
    pub exclude_list: Option<PathBuf>,
    pub cq_exprs: Option<PathBuf>,
    pub cq_seeds: Option<PathBuf>,
    pub cp_filter: Option<PathBuf>,
    pub security_exception_type: Option<String>,
    pub bundle_class: Option<String>,
    pub minconf: Option<Threshold>,
    pub minsup: Option<Threshold>,
    pub workers: Option<usize>,
    pub out_dir: PathBuf,
    pub format: Option<Format>,
    #[serde(default)]
    pub entry_points: EntryPointConfig,
}

/// Settings after applying command-line overrides.
#[derive(Debug, Clone)]
pub struct Settings {
    pub minconf: Rational,
    pub minsup: MinSupport,
    pub workers: Option<usize>,
    pub format: Format,
}

impl Settings {
    fn resolve(cli: &Cli, config: Option<&RunConfig>) -> Result<Self, CliError> {
        let minconf = match cli.minconf.clone().or_else(|| config.and_then(|c| c.minconf.as_ref()).map(Threshold::text))
        {
            Some(s) => parse_confidence(&s).map_err(|e| CliError::Config(format!("minconf: {e}")))?,
            None => default_minconf(),
        };
        let minsup = match cli.minsup.clone().or_else(|| config.and_then(|c| c.minsup.as_ref()).map(Threshold::text)) {
            Some(s) => MinSupport::parse(&s).map_err(|e| CliError::Config(format!("minsup: {e}")))?,
            None => MinSupport::default(),
        };
        let workers = cli.workers.or_else(|| config.and_then(|c| c.workers));
        if workers == Some(0) {
            return Err(CliError::Config("workers: must be at least 1".into()));
        }
        let format = cli.format.or_else(|| config.and_then(|c| c.format)).unwrap_or_default();
        Ok(Settings { minconf, minsup, workers, format })
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| config_err(path, e))
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let mut c: RunConfig = toml::from_str(&read(path)?).map_err(|e| config_err(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let fix = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    c.ir_paths.iter_mut().for_each(fix);
    for p in [&mut c.exclude_list, &mut c.cq_exprs, &mut c.cq_seeds, &mut c.cp_filter].into_iter().flatten() {
        fix(p);
    }
    fix(&mut c.out_dir);
    if c.ir_paths.is_empty() {
        return Err(config_err(path, "ir_paths is empty"));
    }
    Ok(c)
}

/// Parsed inputs of one run.
pub struct Inputs {
    pub program: Program,
    pub entry_points: BTreeSet<MethodRef>,
    pub cqs: BTreeSet<MethodRef>,
    pub filter: FilterSpec,
    pub exclude: ExcludeList,
    pub mining: MiningConfig,
}

impl Inputs {
    pub fn load(c: &RunConfig) -> Result<Self, CliError> {
        let texts: Vec<String> = c.ir_paths.iter().map(|p| read(p)).collect::<Result<_, _>>()?;
        for (p, t) in c.ir_paths.iter().zip(&texts) {
            check_source(t).map_err(|e| analysis_err(p, e))?;
        }
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let program = parse_program_sources(&refs).map_err(|e| {
            let names: Vec<String> = c.ir_paths.iter().map(|p| p.display().to_string()).collect();
            CliError::Analysis(format!("{}: {e}", names.join(", ")))
        })?;
        let optional = |p: &Option<PathBuf>| -> Result<Option<(PathBuf, String)>, CliError> {
            p.as_ref().map(|p| Ok((p.clone(), read(p)?))).transpose()
        };
        let exclude = match optional(&c.exclude_list)? {
            Some((p, t)) => parse_exclude_list(&t).map_err(|e| config_err(&p, e))?,
            None => ExcludeList::default(),
        };
        let exprs = match optional(&c.cq_exprs)? {
            Some((p, t)) => parse_matchers(&t).map_err(|e| config_err(&p, e))?,
            None => Vec::new(),
        };
        let seeds = match optional(&c.cq_seeds)? {
            Some((p, t)) => parse_seeds(&t).map_err(|e| config_err(&p, e))?,
            None => Vec::new(),
        };
        let filter = match optional(&c.cp_filter)? {
            Some((p, t)) => parse_filter(&t).map_err(|e| config_err(&p, e))?,
            None => FilterSpec::default(),
        };
        let mut mining = MiningConfig::default();
        if let Some(t) = &c.security_exception_type {
            mining.security_exception = t.clone();
        }
        if let Some(b) = &c.bundle_class {
            mining.bundle_class = b.clone();
        }
        let entry_points = detect_entry_points(&program, &c.entry_points).into_iter().collect();
        let cqs = identify_context_queries(&program, &exprs, &seeds);
        Ok(Inputs { program, entry_points, cqs, filter, exclude, mining })
    }

    pub fn context(&self) -> MiningContext<'_> {
        MiningContext {
            program: &self.program,
            entry_points: &self.entry_points,
            cqs: &self.cqs,
            filter: &self.filter,
            exclude: &self.exclude,
            config: &self.mining,
        }
    }
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::Analysis(format!("worker pool: {e}"))),
        None => Ok(f()),
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| analysis_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| analysis_err(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| config_err(path, e))
}

#[derive(Serialize)]
struct GraphDump<'a> {
    graphs: &'a [CallGraph],
}

fn mine(inputs: &Inputs, workers: Option<usize>) -> Result<Vec<EntryAnalysis>, CliError> {
    let ctx = inputs.context();
    with_workers(workers, || analyze_all(&ctx))
}

fn check_sets(analyses: &[EntryAnalysis]) -> Vec<CheckSet> {
    analyses.iter().map(|a| a.checks.clone()).collect()
}

fn write_rules_and_reports(out: &Path, sets: &[CheckSet], s: &Settings) -> Result<RuleSet, CliError> {
    let rules = with_workers(s.workers, || mine_rules(sets, s.minsup, s.minconf))?;
    write(&out.join("rules.json"), &to_json(&rules))?;
    emit_rule_reports(&rules, sets, s.format, &out.join("reports")).map_err(|e| CliError::Analysis(e.to_string()))?;
    Ok(rules)
}

fn count(n: usize, noun: &str) -> String {
    if n == 1 {
        format!("1 {noun}")
    } else {
        format!("{n} {noun}s")
    }
}

/// Runs one parsed command line; returns a message for stdout.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Callgraph { config } => {
            let c = load_config(config)?;
            let s = Settings::resolve(cli, Some(&c))?;
            let inputs = Inputs::load(&c)?;
            let eps: Vec<MethodRef> = inputs.entry_points.iter().cloned().collect();
            let graphs = with_workers(s.workers, || build_all(&inputs.program, &eps, &inputs.exclude))?;
            let path = c.out_dir.join("callgraphs.json");
            write(&path, &to_json(&GraphDump { graphs: &graphs }))?;
            Ok(format!("{} call graphs written to {}", graphs.len(), path.display()))
        }
        Command::Explore { config } => {
            let c = load_config(config)?;
            let s = Settings::resolve(cli, Some(&c))?;
            let inputs = Inputs::load(&c)?;
            let analyses = mine(&inputs, s.workers)?;
            let dump = build_exploration_dump(analyses.iter().flat_map(|a| &a.candidates));
            let path = emit_exploration_dump(&dump, &c.out_dir).map_err(|e| analysis_err(&c.out_dir, e))?;
            Ok(format!("exploration dump written to {}", path.display()))
        }
        Command::MineChecks { config } => {
            let c = load_config(config)?;
            let s = Settings::resolve(cli, Some(&c))?;
            let inputs = Inputs::load(&c)?;
            let sets = check_sets(&mine(&inputs, s.workers)?);
            let path = c.out_dir.join("checksets.json");
            write(&path, &to_json(&sets))?;
            Ok(format!("{} check sets written to {}", sets.len(), path.display()))
        }
        Command::MineRules { checks, out } => {
            let s = Settings::resolve(cli, None)?;
            let sets: Vec<CheckSet> = read_json(checks)?;
            let rules = write_rules_and_reports(out, &sets, &s)?;
            Ok(format!("{} written to {}", count(rules.rules.len(), "rule"), out.display()))
        }
        Command::Analyze { config } => {
            let c = load_config(config)?;
            let s = Settings::resolve(cli, Some(&c))?;
            let inputs = Inputs::load(&c)?;
            let analyses = mine(&inputs, s.workers)?;
            let sets = check_sets(&analyses);
            write(&c.out_dir.join("checksets.json"), &to_json(&sets))?;
            let dump = build_exploration_dump(analyses.iter().flat_map(|a| &a.candidates));
            emit_exploration_dump(&dump, &c.out_dir).map_err(|e| analysis_err(&c.out_dir, e))?;
            let rules = write_rules_and_reports(&c.out_dir, &sets, &s)?;
            let summary = summarize_run(&sets, &rules);
            write(&c.out_dir.join("summary.json"), &to_json(&summary))?;
            Ok(format!(
                "{}; {} written to {}",
                summary.describe(),
                count(rules.rules.len(), "rule"),
                c.out_dir.display()
            ))
        }
        Command::Report { rules, checks, out } => {
            let s = Settings::resolve(cli, None)?;
            let rules: RuleSet = read_json(rules)?;
            let sets: Vec<CheckSet> = read_json(checks)?;
            let files =
                emit_rule_reports(&rules, &sets, s.format, out).map_err(|e| CliError::Analysis(e.to_string()))?;
            Ok(format!("{} report files written to {}", files.len(), out.display()))
        }
    }
}

/// Parses arguments, runs, prints, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
