//! Reports, result tables and human statistics files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use phyq_core::score::{
    aggregate, compute_phyq, rank, Aggregate, AttemptRecord, HumanScenarioStats, HumanStats, PhyQReport, ScenarioRates,
    ScoreError, HUMAN_STATS_SCHEMA, SCENARIO_COUNT,
};
use phyq_core::taskgen::SplitSpec;
use serde::{Deserialize, Serialize};

use crate::files::{read_json, write_json, FileError};

pub const REPORT_SCHEMA: &str = "phyq.report/1";
pub const SESSION_SCHEMA: &str = "phyq.session/1";
/// Attempts a human gets per task.
pub const HUMAN_ATTEMPTS: u32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    File(#[from] FileError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("unrecognised schema {0:?}")]
    Schema(String),
    #[error("{0}")]
    Invalid(String),
}

/// A set of agent reports as written to disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema: String,
    pub reports: Vec<PhyQReport>,
}

impl ReportFile {
    pub fn new(reports: Vec<PhyQReport>) -> ReportFile {
        ReportFile { schema: REPORT_SCHEMA.into(), reports }
    }

    pub fn save(&self, path: &Path) -> Result<(), ReportError> {
        Ok(write_json(path, self)?)
    }

    pub fn load(path: &Path) -> Result<ReportFile, ReportError> {
        let f: ReportFile = read_json(path)?;
        if f.schema != REPORT_SCHEMA {
            return Err(ReportError::Schema(f.schema));
        }
        Ok(f)
    }
}

/// Aggregated logs of one agent, and its Phy-Q score against `random`.
///
/// The score uses the broad-generalisation scenario rates when a broad log
/// is present, otherwise the local ones.
pub fn build_report(
    agent: &str,
    local: Option<(&[AttemptRecord], &SplitSpec)>,
    broad: Option<(&[AttemptRecord], &SplitSpec)>,
    human: Option<&HumanStats>,
    random: Option<&ScenarioRates>,
) -> Result<PhyQReport, ReportError> {
    let local = local.map(|(log, s)| aggregate(log, s));
    let broad = broad.map(|(log, s)| aggregate(log, s));
    let basis = broad.as_ref().or(local.as_ref());
    let phyq = match (basis, human, random) {
        (Some(b), Some(h), Some(r)) => Some(compute_phyq(&b.scenario_rates, h, r)?),
        _ => None,
    };
    Ok(PhyQReport { agent: agent.into(), local, broad, phyq })
}

/// Scenario rates the score is computed from, as chosen by [`build_report`].
pub fn scoring_rates(report: &PhyQReport) -> Option<&ScenarioRates> {
    report.broad.as_ref().or(report.local.as_ref()).map(|a: &Aggregate| &a.scenario_rates)
}

fn rate(a: &Option<Aggregate>) -> String {
    a.as_ref().map(|a| format!("{:.4}", a.headline)).unwrap_or_else(|| "-".into())
}

/// Generalisation table: one row per protocol, one column per agent.
pub fn generalisation_table(reports: &[PhyQReport]) -> String {
    let mut out = String::from("| Generalisation |");
    for r in reports {
        let _ = write!(out, " {} |", r.agent);
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(reports.len()));
    out.push('\n');
    for (label, pick) in [("Local", 0), ("Broad", 1)] {
        let _ = write!(out, "| {label} |");
        for r in reports {
            let cell = if pick == 0 { rate(&r.local) } else { rate(&r.broad) };
            let _ = write!(out, " {cell} |");
        }
        out.push('\n');
    }
    out
}

/// Leaderboard: rank, agent, Phy-Q score, highest first.
pub fn phyq_table(reports: &[PhyQReport]) -> String {
    let mut out = String::from("| Rank | Agent | Phy-Q |\n|---|---|---|\n");
    for (i, r) in rank(reports).into_iter().enumerate() {
        let score = r.phyq.map(|p| format!("{:.2}", p.score)).unwrap_or_else(|| "-".into());
        let _ = writeln!(out, "| {} | {} | {} |", i + 1, r.agent, score);
    }
    out
}

/// Per-scenario pass rates of the reports, one row per scenario.
pub fn scenario_table(reports: &[PhyQReport]) -> String {
    let mut out = String::from("| Scenario |");
    for r in reports {
        let _ = write!(out, " {} |", r.agent);
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(reports.len()));
    out.push('\n');
    for s in 1..=SCENARIO_COUNT as u8 {
        let _ = write!(out, "| {s} |");
        for r in reports {
            let cell =
                scoring_rates(r).and_then(|m| m.get(&s)).map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
            let _ = write!(out, " {cell} |");
        }
        out.push('\n');
    }
    out
}

/// One attempt of a human player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanAttempt {
    /// Milliseconds from task load to the first action.
    pub thinking_time_ms: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanTask {
    pub template_id: String,
    pub scenario: u8,
    pub task_index: u32,
    pub attempts: Vec<HumanAttempt>,
}

impl HumanTask {
    /// `(6 - k) / 5` for a pass on attempt `k`, zero without a pass.
    pub fn credit(&self) -> f64 {
        match self.attempts.iter().take(HUMAN_ATTEMPTS as usize).position(|a| a.passed) {
            Some(k) => (HUMAN_ATTEMPTS as usize - k) as f64 / HUMAN_ATTEMPTS as f64,
            None => 0.0,
        }
    }
}

/// A play session as exported by the browser client.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionExport {
    pub schema: String,
    /// Anonymous participant token.
    pub participant: String,
    pub tasks: Vec<HumanTask>,
}

impl SessionExport {
    pub fn validate(&self) -> Result<(), ReportError> {
        if self.schema != SESSION_SCHEMA {
            return Err(ReportError::Schema(self.schema.clone()));
        }
        for t in &self.tasks {
            if t.attempts.len() > HUMAN_ATTEMPTS as usize {
                return Err(ReportError::Invalid(format!("task {} has {} attempts", t.template_id, t.attempts.len())));
            }
            if t.attempts.iter().any(|a| !(a.thinking_time_ms >= 0.0)) {
                return Err(ReportError::Invalid(format!("task {} has a negative thinking time", t.template_id)));
            }
        }
        Ok(())
    }
}

/// Per-scenario mean and population deviation of task credits over one or
/// more sessions. Scenarios with no tasks or zero deviation are flagged
/// unusable.
pub fn human_stats_from_sessions(sessions: &[SessionExport]) -> Result<HumanStats, ReportError> {
    let mut credits: BTreeMap<u8, Vec<f64>> = BTreeMap::new();
    for s in sessions {
        s.validate()?;
        for t in &s.tasks {
            credits.entry(t.scenario).or_default().push(t.credit());
        }
    }
    let rows = (1..=SCENARIO_COUNT as u8)
        .map(|s| {
            let xs = credits.get(&s).map(Vec::as_slice).unwrap_or(&[]);
            if xs.is_empty() {
                return HumanScenarioStats { scenario: s, mean: 0.0, sigma: 0.0, unusable: true };
            }
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let sigma = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            HumanScenarioStats { scenario: s, mean, sigma, unusable: sigma == 0.0 }
        })
        .collect();
    Ok(HumanStats::new(format!("{} play session(s)", sessions.len()), rows))
}

/// Reads either a human stats file or a session export.
pub fn load_human_stats(path: &Path) -> Result<HumanStats, ReportError> {
    let value: serde_json::Value = read_json(path)?;
    let schema = value.get("schema").and_then(|s| s.as_str()).unwrap_or_default().to_string();
    let parse_err = |e: serde_json::Error| FileError::Json { path: path.into(), source: e };
    match schema.as_str() {
        HUMAN_STATS_SCHEMA => Ok(serde_json::from_value(value).map_err(parse_err)?),
        SESSION_SCHEMA => {
            let s: SessionExport = serde_json::from_value(value).map_err(parse_err)?;
            human_stats_from_sessions(&[s])
        }
        _ => Err(ReportError::Schema(schema)),
    }
}
