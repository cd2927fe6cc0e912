//! Directory-backed store for models, scenarios, analysis reports and
//! traces, with an index file recording creation order and tags.
//!
//! Layout: `<root>/<kind>/<id>.json`, traces also as `<root>/traces/<id>.csv`,
//! and `<root>/index.json`. Writes go through a temporary file and a rename.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::{from_json, net_to_json, scenario_to_json, to_json, SchemaError};
use crate::dss::{Analysis, AnalysisReport};
use crate::net::{validate, HybridNet, Id, Violation};
use crate::scenario::ScenarioConfig;
use crate::simulator::{trace_csv, Outcome, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DocumentKind {
    Model,
    Scenario,
    Report,
    Trace,
}

impl DocumentKind {
    pub fn dir(self) -> &'static str {
        match self {
            DocumentKind::Model => "models",
            DocumentKind::Scenario => "scenarios",
            DocumentKind::Report => "reports",
            DocumentKind::Trace => "traces",
        }
    }

    const ALL: [DocumentKind; 4] = [
        DocumentKind::Model,
        DocumentKind::Scenario,
        DocumentKind::Report,
        DocumentKind::Trace,
    ];
}

impl std::fmt::Display for DocumentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            DocumentKind::Model => "model",
            DocumentKind::Scenario => "scenario",
            DocumentKind::Report => "report",
            DocumentKind::Trace => "trace",
        };
        f.write_str(name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RepositoryEntry {
    pub id: Id,
    pub kind: DocumentKind,
    pub created_at: String,
    /// Insertion sequence number; orders the history.
    pub seq: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HistoryRecord {
    #[serde(flatten)]
    pub entry: RepositoryEntry,
    pub summary: String,
}

/// One line of a side-by-side comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComparisonRow {
    pub id: Id,
    pub kind: DocumentKind,
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delivery_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<f64>,
    pub configuration: String,
}

#[derive(Debug, Error)]
pub enum RepoError {
    #[error("{kind} `{id}` not found")]
    NotFound { kind: DocumentKind, id: Id },
    #[error("{kind} `{id}` already exists")]
    ConflictingId { kind: DocumentKind, id: Id },
    #[error("`{0}` cannot be used as a document id")]
    InvalidId(Id),
    #[error("net is not valid ({} violations)", .0.len())]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Index {
    next_seq: u64,
    /// Keyed by `<kind dir>/<id>`.
    entries: BTreeMap<String, RepositoryEntry>,
}

pub struct Repository {
    root: PathBuf,
    index: Index,
}

fn key(kind: DocumentKind, id: &Id) -> String {
    format!("{}/{}", kind.dir(), id)
}

fn check_id(id: &Id) -> Result<(), RepoError> {
    let s = id.as_str();
    if s.starts_with('.') || s.contains(['/', '\\', ':']) {
        return Err(RepoError::InvalidId(id.clone()));
    }
    Ok(())
}

fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

impl Repository {
    /// Opens (creating if needed) the store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, RepoError> {
        let root = root.into();
        for kind in DocumentKind::ALL {
            fs::create_dir_all(root.join(kind.dir()))?;
        }
        let index_path = root.join("index.json");
        let index = if index_path.exists() {
            from_json(&fs::read_to_string(&index_path)?)?
        } else {
            Index::default()
        };
        Ok(Repository { root, index })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, kind: DocumentKind, id: &Id, ext: &str) -> PathBuf {
        self.root.join(kind.dir()).join(format!("{id}.{ext}"))
    }

    fn save_index(&self) -> Result<(), RepoError> {
        write_atomic(&self.root.join("index.json"), &to_json(&self.index))?;
        Ok(())
    }

    fn insert(
        &mut self,
        kind: DocumentKind,
        id: &Id,
        json: &str,
        tags: &[String],
    ) -> Result<RepositoryEntry, RepoError> {
        check_id(id)?;
        if self.index.entries.contains_key(&key(kind, id)) {
            return Err(RepoError::ConflictingId {
                kind,
                id: id.clone(),
            });
        }
        write_atomic(&self.path(kind, id, "json"), json)?;
        let entry = RepositoryEntry {
            id: id.clone(),
            kind,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            seq: self.index.next_seq,
            tags: tags.to_vec(),
        };
        self.index.next_seq += 1;
        self.index.entries.insert(key(kind, id), entry.clone());
        self.save_index()?;
        Ok(entry)
    }

    fn load<T: DeserializeOwned>(&self, kind: DocumentKind, id: &Id) -> Result<T, RepoError> {
        let not_found = || RepoError::NotFound {
            kind,
            id: id.clone(),
        };
        check_id(id).map_err(|_| not_found())?;
        if !self.index.entries.contains_key(&key(kind, id)) {
            return Err(not_found());
        }
        let text = fs::read_to_string(self.path(kind, id, "json")).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => not_found(),
            _ => RepoError::Io(e),
        })?;
        Ok(from_json(&text)?)
    }

    fn fresh_id(&self, kind: DocumentKind) -> Id {
        let prefix = match kind {
            DocumentKind::Report => "report",
            DocumentKind::Trace => "trace",
            DocumentKind::Model => "model",
            DocumentKind::Scenario => "scenario",
        };
        let mut n = self.index.next_seq;
        loop {
            let id = Id::new(format!("{prefix}-{n}"));
            if !self.index.entries.contains_key(&key(kind, &id)) {
                return id;
            }
            n += 1;
        }
    }

    /// Stores a valid net under its name.
    pub fn put_model(&mut self, net: &HybridNet, tags: &[String]) -> Result<RepositoryEntry, RepoError> {
        let validation = validate(net);
        if !validation.is_ok() {
            return Err(RepoError::Invalid(validation.violations));
        }
        self.insert(DocumentKind::Model, &net.name, &net_to_json(net), tags)
    }

    pub fn get_model(&self, id: &Id) -> Result<HybridNet, RepoError> {
        self.load(DocumentKind::Model, id)
    }

    pub fn put_scenario(
        &mut self,
        scenario: &ScenarioConfig,
        tags: &[String],
    ) -> Result<RepositoryEntry, RepoError> {
        self.insert(DocumentKind::Scenario, &scenario.id, &scenario_to_json(scenario), tags)
    }

    pub fn get_scenario(&self, id: &Id) -> Result<ScenarioConfig, RepoError> {
        self.load(DocumentKind::Scenario, id)
    }

    /// Stores a trace as JSON and CSV under a fresh id.
    pub fn put_trace(&mut self, trace: &Trace, tags: &[String]) -> Result<RepositoryEntry, RepoError> {
        let id = self.fresh_id(DocumentKind::Trace);
        write_atomic(&self.path(DocumentKind::Trace, &id, "csv"), &trace_csv(trace))?;
        self.insert(DocumentKind::Trace, &id, &to_json(trace), tags)
    }

    pub fn get_trace(&self, id: &Id) -> Result<Trace, RepoError> {
        self.load(DocumentKind::Trace, id)
    }

    pub fn get_trace_csv(&self, id: &Id) -> Result<String, RepoError> {
        let not_found = || RepoError::NotFound {
            kind: DocumentKind::Trace,
            id: id.clone(),
        };
        check_id(id).map_err(|_| not_found())?;
        if !self.index.entries.contains_key(&key(DocumentKind::Trace, id)) {
            return Err(not_found());
        }
        fs::read_to_string(self.path(DocumentKind::Trace, id, "csv")).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => not_found(),
            _ => RepoError::Io(e),
        })
    }

    /// Stores the report and the trace of each attempt; returns the report
    /// with its id and trace references filled in.
    pub fn put_report(&mut self, analysis: &Analysis, tags: &[String]) -> Result<AnalysisReport, RepoError> {
        let mut report = analysis.report.clone();
        for (attempt, trace) in report.attempts.iter_mut().zip(&analysis.traces) {
            if let Some(trace) = trace {
                attempt.trace = Some(self.put_trace(trace, tags)?.id);
            }
        }
        let id = self.fresh_id(DocumentKind::Report);
        report.id = Some(id.clone());
        self.insert(DocumentKind::Report, &id, &to_json(&report), tags)?;
        Ok(report)
    }

    pub fn get_report(&self, id: &Id) -> Result<AnalysisReport, RepoError> {
        self.load(DocumentKind::Report, id)
    }

    /// Entries of `kind` in creation order.
    pub fn list(&self, kind: DocumentKind) -> Vec<RepositoryEntry> {
        let mut entries: Vec<RepositoryEntry> = self
            .index
            .entries
            .values()
            .filter(|e| e.kind == kind)
            .cloned()
            .collect();
        entries.sort_by_key(|e| e.seq);
        entries
    }

    pub fn delete(&mut self, kind: DocumentKind, id: &Id) -> Result<(), RepoError> {
        if self.index.entries.remove(&key(kind, id)).is_none() {
            return Err(RepoError::NotFound {
                kind,
                id: id.clone(),
            });
        }
        for ext in ["json", "csv"] {
            match fs::remove_file(self.path(kind, id, ext)) {
                Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e.into()),
                _ => {}
            }
        }
        self.save_index()
    }

    /// Stored reports and traces, oldest first.
    pub fn history(&self) -> Result<Vec<HistoryRecord>, RepoError> {
        let mut entries: Vec<&RepositoryEntry> = self
            .index
            .entries
            .values()
            .filter(|e| matches!(e.kind, DocumentKind::Report | DocumentKind::Trace))
            .collect();
        entries.sort_by_key(|e| e.seq);
        entries
            .into_iter()
            .map(|entry| {
                let summary = match entry.kind {
                    DocumentKind::Report => {
                        let r = self.get_report(&entry.id)?;
                        format!(
                            "scenario {} deadline {}: {} attempts, {}",
                            r.scenario.id,
                            r.deadline,
                            r.attempts.len(),
                            r.selected.as_ref().map_or("nothing selected".to_string(), |c| {
                                format!("selected {}", c.summary())
                            })
                        )
                    }
                    _ => {
                        let t = self.get_trace(&entry.id)?;
                        format!("scenario {}: {}", t.scenario.id, outcome_label(&t.outcome))
                    }
                };
                Ok(HistoryRecord {
                    entry: entry.clone(),
                    summary,
                })
            })
            .collect()
    }

    /// Outcome, delivery time and configuration of each listed report or trace.
    pub fn compare(&self, ids: &[Id]) -> Result<Vec<ComparisonRow>, RepoError> {
        ids.iter()
            .map(|id| {
                if self.index.entries.contains_key(&key(DocumentKind::Report, id)) {
                    let r = self.get_report(id)?;
                    let shown = r.selected_attempt().or(r.attempts.last());
                    Ok(ComparisonRow {
                        id: id.clone(),
                        kind: DocumentKind::Report,
                        outcome: shown.map_or("no attempts".into(), |a| outcome_label(&a.outcome)),
                        delivery_time: shown.and_then(|a| a.delivery_time),
                        deadline: Some(r.deadline),
                        configuration: shown.map_or(String::new(), |a| a.configuration.summary()),
                    })
                } else {
                    let t = self.get_trace(id).map_err(|_| RepoError::NotFound {
                        kind: DocumentKind::Report,
                        id: id.clone(),
                    })?;
                    Ok(ComparisonRow {
                        id: id.clone(),
                        kind: DocumentKind::Trace,
                        outcome: outcome_label(&t.outcome),
                        delivery_time: t.outcome.delivered_at().copied(),
                        deadline: t.scenario.deadline,
                        configuration: t.scenario.id.to_string(),
                    })
                }
            })
            .collect()
    }
}

fn outcome_label(outcome: &Outcome) -> String {
    match outcome {
        Outcome::Delivered { at } => format!("delivered at {at}"),
        Outcome::DeadlineMissed => "deadline missed".into(),
        Outcome::HorizonReached => "horizon reached".into(),
        Outcome::Error { error, .. } => format!("error: {error}"),
    }
}
