//! Rule reports for triage, exploration dumps for refining the inputs, and
//! run summaries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checkmining::CheckSet;
use crate::cpfilter::{ConditionalCandidate, ElementKind};
use crate::rulemine::{AssociationRule, RuleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Html,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Html => "html",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleReport {
    pub service: String,
    pub target: String,
    pub supporters: Vec<String>,
    pub antecedent: Vec<String>,
    pub recommended: Vec<String>,
    /// Checks of the target outside the antecedent.
    pub extra: Vec<String>,
    pub confidence: String,
    pub support: String,
    /// Declaring methods of each check, over the target and its supporters.
    pub locations: BTreeMap<String, Vec<String>>,
}

pub fn build_rule_report(rule: &AssociationRule, check_sets: &[CheckSet]) -> RuleReport {
    let by_entry: BTreeMap<String, &CheckSet> = check_sets.iter().map(|c| (c.entry_point.to_string(), c)).collect();
    let involved: Vec<&CheckSet> =
        std::iter::once(&rule.target).chain(&rule.supporters).filter_map(|e| by_entry.get(e).copied()).collect();
    let antecedent: BTreeSet<&String> = rule.antecedent.iter().collect();
    let extra = by_entry
        .get(&rule.target)
        .map(|cs| cs.checks.iter().filter(|c| !antecedent.contains(c)).cloned().collect())
        .unwrap_or_default();
    let mut locations = BTreeMap::new();
    for check in rule.antecedent.iter().chain(&rule.consequent) {
        let locs: BTreeSet<String> = involved.iter().flat_map(|cs| cs.locations(check)).collect();
        locations.insert(check.clone(), locs.into_iter().collect());
    }
    RuleReport {
        service: rule.service.clone(),
        target: rule.target.clone(),
        supporters: rule.supporters.clone(),
        antecedent: rule.antecedent.clone(),
        recommended: rule.consequent.clone(),
        extra,
        confidence: rule.confidence.to_string(),
        support: rule.support.to_string(),
        locations,
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

const STYLE: &str = "body{font-family:sans-serif;margin:2em}code{font-size:90%}\
table{border-collapse:collapse}td,th{border:1px solid #ccc;padding:4px 8px;text-align:left}\
.missing{background:#fde8e8}.have{background:#e8f5e8}";

fn html_list(out: &mut String, title: &str, class: &str, items: &[String], locations: &BTreeMap<String, Vec<String>>) {
    let _ = write!(out, "<h2>{}</h2>\n<table class=\"{class}\">\n", escape(title));
    if items.is_empty() {
        out.push_str("<tr><td>none</td></tr>\n");
    }
    for item in items {
        let locs = locations.get(item).map(|l| l.join(", ")).unwrap_or_default();
        let _ = writeln!(out, "<tr><td><code>{}</code></td><td><code>{}</code></td></tr>", escape(item), escape(&locs));
    }
    out.push_str("</table>\n");
}

pub fn render_html(r: &RuleReport) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>{t}</title><style>{STYLE}</style></head><body>\n\
         <h1>Inconsistent checks in <code>{t}</code></h1>\n<p>Service <code>{s}</code>, confidence {c}, support {p}.</p>\n",
        t = escape(&r.target),
        s = escape(&r.service),
        c = r.confidence,
        p = r.support,
    );
    out.push_str("<h2>Supporting entry points</h2>\n<ul>\n");
    for s in &r.supporters {
        let _ = writeln!(out, "<li><code>{}</code></li>", escape(s));
    }
    out.push_str("</ul>\n");
    html_list(&mut out, "Shared checks", "have", &r.antecedent, &r.locations);
    html_list(&mut out, "Recommended checks", "missing", &r.recommended, &r.locations);
    html_list(&mut out, "Other checks of the target", "", &r.extra, &BTreeMap::new());
    out.push_str("</body></html>\n");
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub file: String,
    pub confidence: String,
    pub recommended: usize,
}

/// Report files grouped by service and target.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReportIndex {
    pub services: BTreeMap<String, BTreeMap<String, Vec<IndexEntry>>>,
}

fn write_file(path: &Path, text: &str) -> io::Result<()> {
    fs::write(path, text).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

/// Writes one document per rule into `dir` plus an index.
pub fn emit_rule_reports(
    rules: &RuleSet,
    check_sets: &[CheckSet],
    format: Format,
    dir: &Path,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", dir.display())))?;
    remove_stale_reports(dir)?;
    let mut index = ReportIndex::default();
    let mut written = Vec::new();
    for (i, rule) in rules.rules.iter().enumerate() {
        let report = build_rule_report(rule, check_sets);
        let file = format!("rule-{:04}.{}", i + 1, format.extension());
        let text = match format {
            Format::Json => to_json(&report),
            Format::Html => render_html(&report),
        };
        let path = dir.join(&file);
        write_file(&path, &text)?;
        written.push(path);
        index
            .services
            .entry(rule.service.clone())
            .or_default()
            .entry(rule.target.clone())
            .or_default()
            .push(IndexEntry { file, confidence: rule.confidence.to_string(), recommended: rule.consequent.len() });
    }
    let path = dir.join(format!("index.{}", format.extension()));
    let text = match format {
        Format::Json => to_json(&index),
        Format::Html => render_index_html(&index),
    };
    write_file(&path, &text)?;
    written.push(path);
    Ok(written)
}

/// Drops reports left by an earlier run so the directory mirrors this one.
fn remove_stale_reports(dir: &Path) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        let ours = (name.starts_with("rule-") || name.starts_with("index."))
            && (name.ends_with(".json") || name.ends_with(".html"));
        if ours && path.is_file() {
            fs::remove_file(&path)?;
        }
    }
    Ok(())
}

fn render_index_html(index: &ReportIndex) -> String {
    let mut out = format!("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Rules</title><style>{STYLE}</style></head><body>\n<h1>Rules</h1>\n");
    if index.services.is_empty() {
        out.push_str("<p>No rules.</p>\n");
    }
    for (service, targets) in &index.services {
        let _ = writeln!(out, "<h2><code>{}</code></h2>\n<ul>", escape(service));
        for (target, entries) in targets {
            let _ = writeln!(out, "<li><code>{}</code><ul>", escape(target));
            for e in entries {
                let _ = writeln!(
                    out,
                    "<li><a href=\"{f}\">{f}</a>: confidence {c}, {n} recommended</li>",
                    f = escape(&e.file),
                    c = e.confidence,
                    n = e.recommended
                );
            }
            out.push_str("</ul></li>\n");
        }
        out.push_str("</ul>\n");
    }
    out.push_str("</body></html>\n");
    out
}

/// Most sample sites kept per exploration entry.
pub const MAX_SAMPLES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpEntry {
    pub name: String,
    pub count: usize,
    pub sites: Vec<String>,
}

/// What the candidate conditionals look at, for writing matchers and filters.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExplorationDump {
    pub strings: Vec<DumpEntry>,
    pub fields: Vec<DumpEntry>,
    pub methods_used: Vec<DumpEntry>,
    pub methods_containing: Vec<DumpEntry>,
}

#[derive(Default)]
struct Tally(BTreeMap<String, (usize, BTreeSet<String>)>);

impl Tally {
    fn add(&mut self, name: String, site: &str) {
        let e = self.0.entry(name).or_default();
        e.0 += 1;
        e.1.insert(site.to_string());
    }

    fn finish(self) -> Vec<DumpEntry> {
        self.0
            .into_iter()
            .map(|(name, (count, sites))| DumpEntry {
                name,
                count,
                sites: sites.into_iter().take(MAX_SAMPLES).collect(),
            })
            .collect()
    }
}

/// Counts each distinct conditional once, however many entry points reach it.
pub fn build_exploration_dump<'a>(candidates: impl IntoIterator<Item = &'a ConditionalCandidate>) -> ExplorationDump {
    let unique: BTreeMap<String, &ConditionalCandidate> =
        candidates.into_iter().map(|c| (c.site.to_string(), c)).collect();
    let (mut strings, mut fields, mut used, mut containing) =
        (Tally::default(), Tally::default(), Tally::default(), Tally::default());
    for (site, c) in unique {
        containing.add(c.method().to_string(), &site);
        let mut seen = BTreeSet::new();
        for e in &c.elements {
            let names: Vec<(u8, String)> = match &e.kind {
                ElementKind::StringConst(s) => vec![(0, s.clone())],
                ElementKind::Field(f) => vec![(1, f.to_string())],
                ElementKind::MethodReturn { targets, .. } => targets.iter().map(|t| (2, t.to_string())).collect(),
            };
            for key in names {
                if !seen.insert(key.clone()) {
                    continue;
                }
                let tally = match key.0 {
                    0 => &mut strings,
                    1 => &mut fields,
                    _ => &mut used,
                };
                tally.add(key.1, &site);
            }
        }
    }
    ExplorationDump {
        strings: strings.finish(),
        fields: fields.finish(),
        methods_used: used.finish(),
        methods_containing: containing.finish(),
    }
}

pub fn emit_exploration_dump(dump: &ExplorationDump, dir: &Path) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("exploration.json");
    write_file(&path, &to_json(dump))?;
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunSummary {
    pub entry_points: usize,
    pub with_checks: usize,
    pub with_rules: usize,
}

pub fn summarize_run(check_sets: &[CheckSet], rules: &RuleSet) -> RunSummary {
    let targets: BTreeSet<&str> = rules.rules.iter().map(|r| r.target.as_str()).collect();
    let entries: BTreeSet<String> = check_sets.iter().map(|c| c.entry_point.to_string()).collect();
    RunSummary {
        entry_points: entries.len(),
        with_checks: check_sets.iter().filter(|c| !c.is_empty()).count(),
        with_rules: entries.iter().filter(|e| targets.contains(e.as_str())).count(),
    }
}

impl RunSummary {
    pub fn describe(&self) -> String {
        format!(
            "{} entry points, {} with authorization checks, {} flagged by rules",
            self.entry_points, self.with_checks, self.with_rules
        )
    }
}
