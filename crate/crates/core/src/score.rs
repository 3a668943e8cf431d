//! Pass-rate aggregation and the Phy-Q score: a human-normalised deviation
//! averaged over the scored scenarios, rescaled so that the average human
//! sits at 100 and the random agent at 0.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::taskgen::{SplitMode, SplitSpec};

pub const SCENARIO_COUNT: usize = 15;
/// Scenarios 1 and 2 are solved by aiming alone and do not count.
pub const FIRST_SCORED_SCENARIO: u8 = 3;
pub const HUMAN_STATS_SCHEMA: &str = "phyq.human/1";

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ScoreError {
    #[error("human sigma of scenario {0} is not positive")]
    ZeroSigma(u8),
    #[error("the random agent's Z score is zero")]
    ZeroRandomZ,
    #[error("the random agent's Z score is positive ({0}); humans must outperform it")]
    PositiveRandomZ(f64),
    #[error("no pass rate for scenario {0}")]
    MissingScenario(u8),
    #[error("pass rate {1} of scenario {0} is outside [0, 1]")]
    RateOutOfRange(u8, f64),
    #[error("unsupported human stats schema {0:?}")]
    Schema(String),
}

/// Pass rate per scenario, indexed by scenario number.
pub type ScenarioRates = BTreeMap<u8, f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanScenarioStats {
    pub scenario: u8,
    pub mean: f64,
    pub sigma: f64,
    /// Rows with a zero sigma cannot divide and are flagged by exporters.
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub unusable: bool,
}

/// Per-scenario human pass-rate means and standard deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanStats {
    pub schema: String,
    /// Where the numbers come from.
    pub source: String,
    pub scenarios: Vec<HumanScenarioStats>,
}

impl HumanStats {
    pub fn new(source: impl Into<String>, scenarios: Vec<HumanScenarioStats>) -> HumanStats {
        HumanStats { schema: HUMAN_STATS_SCHEMA.into(), source: source.into(), scenarios }
    }

    /// Built-in synthetic profile: humans pass most tasks, with lower and
    /// more spread rates on the scenarios that need the most reasoning.
    /// Not measured data.
    pub fn synthetic() -> HumanStats {
        const MEANS: [f64; SCENARIO_COUNT] =
            [0.98, 0.95, 0.85, 0.86, 0.84, 0.78, 0.80, 0.82, 0.83, 0.88, 0.75, 0.80, 0.77, 0.72, 0.81];
        const SIGMAS: [f64; SCENARIO_COUNT] =
            [0.05, 0.08, 0.18, 0.17, 0.19, 0.22, 0.21, 0.20, 0.19, 0.15, 0.24, 0.21, 0.22, 0.25, 0.20];
        let rows = (0..SCENARIO_COUNT)
            .map(|i| HumanScenarioStats { scenario: i as u8 + 1, mean: MEANS[i], sigma: SIGMAS[i], unusable: false })
            .collect();
        HumanStats::new("synthetic default profile (not measured)", rows)
    }

    /// Schema skeleton to be filled with transcribed values.
    pub fn empty_template() -> HumanStats {
        let rows = (1..=SCENARIO_COUNT as u8)
            .map(|s| HumanScenarioStats { scenario: s, mean: 0.0, sigma: 0.0, unusable: true })
            .collect();
        HumanStats::new("unfilled template", rows)
    }

    pub fn get(&self, scenario: u8) -> Option<&HumanScenarioStats> {
        self.scenarios.iter().find(|r| r.scenario == scenario)
    }

    pub fn means(&self) -> ScenarioRates {
        self.scenarios.iter().map(|r| (r.scenario, r.mean)).collect()
    }

    /// Checks the schema tag and that every scored scenario can divide.
    pub fn validate(&self) -> Result<(), ScoreError> {
        if self.schema != HUMAN_STATS_SCHEMA {
            return Err(ScoreError::Schema(self.schema.clone()));
        }
        for s in FIRST_SCORED_SCENARIO..=SCENARIO_COUNT as u8 {
            let row = self.get(s).ok_or(ScoreError::MissingScenario(s))?;
            if !(row.sigma > 0.0) || row.unusable {
                return Err(ScoreError::ZeroSigma(s));
            }
            check_rate(s, row.mean)?;
        }
        Ok(())
    }
}

fn check_rate(s: u8, r: f64) -> Result<f64, ScoreError> {
    if (0.0..=1.0).contains(&r) {
        Ok(r)
    } else {
        Err(ScoreError::RateOutOfRange(s, r))
    }
}

/// Mean human-normalised deviation over scenarios 3 to 15.
pub fn z_score(rates: &ScenarioRates, human: &HumanStats) -> Result<f64, ScoreError> {
    human.validate()?;
    let mut sum = 0.0;
    let scored = FIRST_SCORED_SCENARIO..=SCENARIO_COUNT as u8;
    let n = scored.clone().count() as f64;
    for s in scored {
        let p = check_rate(s, *rates.get(&s).ok_or(ScoreError::MissingScenario(s))?)?;
        let h = human.get(s).ok_or(ScoreError::MissingScenario(s))?;
        sum += (p - h.mean) / h.sigma;
    }
    Ok(sum / n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhyQ {
    pub z_agent: f64,
    pub z_random: f64,
    pub score: f64,
}

/// `100 + Z_agent * 100 / |Z_random|`.
pub fn compute_phyq(agent: &ScenarioRates, human: &HumanStats, random: &ScenarioRates) -> Result<PhyQ, ScoreError> {
    let z_random = z_score(random, human)?;
    if z_random == 0.0 {
        return Err(ScoreError::ZeroRandomZ);
    }
    if z_random > 0.0 {
        return Err(ScoreError::PositiveRandomZ(z_random));
    }
    let z_agent = z_score(agent, human)?;
    Ok(PhyQ { z_agent, z_random, score: 100.0 + z_agent * 100.0 / z_random.abs() })
}

/// One attempt of one task by one agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub agent: String,
    pub mode: SplitMode,
    pub template_id: String,
    pub task_index: u32,
    pub attempt_index: u32,
    pub seed: u64,
    pub passed: bool,
    pub shots_used: u32,
    pub wall_time_ms: f64,
    /// The agent's stated reason for each shot, when it gives one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub decisions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRate {
    pub template_id: String,
    pub task_index: u32,
    /// Mean over attempts.
    pub rate: f64,
    pub attempts: u32,
}

/// Pass rates at task, template and scenario granularity.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub task_rates: Vec<TaskRate>,
    /// Mean over the template's tested tasks.
    pub template_rates: BTreeMap<String, f64>,
    /// Mean over the scenario's tested templates.
    pub scenario_rates: ScenarioRates,
    /// Local mode: mean over templates. Broad mode: mean over scenarios.
    pub headline: f64,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Averages the attempts of the split's test tasks.
pub fn aggregate(records: &[AttemptRecord], splits: &SplitSpec) -> Aggregate {
    let mut per_task: BTreeMap<(String, u32), (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = per_task.entry((r.template_id.clone(), r.task_index)).or_default();
        e.0 += r.passed as u8 as f64;
        e.1 += 1;
    }
    let task_rates: BTreeMap<(String, u32), (f64, usize)> = splits
        .test_tasks()
        .into_iter()
        .filter_map(|k| per_task.get(&k).map(|(s, n)| (k, (s / *n as f64, *n))))
        .collect();
    let mut template_rates = BTreeMap::new();
    for t in &splits.templates {
        if t.test_tasks.is_empty() {
            continue;
        }
        let rates: Vec<f64> =
            t.test_tasks.iter().filter_map(|i| task_rates.get(&(t.template_id.clone(), *i)).map(|r| r.0)).collect();
        if !rates.is_empty() {
            template_rates.insert(t.template_id.clone(), mean(rates));
        }
    }
    let mut scenario_rates = ScenarioRates::new();
    for s in &splits.scenarios {
        let rates: Vec<f64> = s.test_templates.iter().filter_map(|t| template_rates.get(t).copied()).collect();
        if !rates.is_empty() {
            scenario_rates.insert(s.scenario.number(), mean(rates));
        }
    }
    let headline = match splits.mode {
        SplitMode::Local => mean(template_rates.values().copied()),
        SplitMode::Broad => mean(scenario_rates.values().copied()),
    };
    let task_rates = task_rates
        .into_iter()
        .map(|((template_id, task_index), (rate, n))| TaskRate { template_id, task_index, rate, attempts: n as u32 })
        .collect();
    Aggregate { task_rates, template_rates, scenario_rates, headline }
}

/// Everything reported for one agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhyQReport {
    pub agent: String,
    /// Per-template local-generalisation pass rates and their mean.
    pub local: Option<Aggregate>,
    /// Per-scenario broad-generalisation pass rates and their mean.
    pub broad: Option<Aggregate>,
    pub phyq: Option<PhyQ>,
}

/// Agents sorted by descending Phy-Q score, agents without a score last.
pub fn rank(reports: &[PhyQReport]) -> Vec<&PhyQReport> {
    let mut v: Vec<&PhyQReport> = reports.iter().collect();
    v.sort_by(|a, b| {
        let sa = a.phyq.map(|p| p.score).unwrap_or(f64::NEG_INFINITY);
        let sb = b.phyq.map(|p| p.score).unwrap_or(f64::NEG_INFINITY);
        sb.total_cmp(&sa)
    });
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(v: f64) -> ScenarioRates {
        (1..=15).map(|s| (s, v)).collect()
    }

    fn uniform_human(mean: f64, sigma: f64) -> HumanStats {
        HumanStats::new(
            "test",
            (1..=15).map(|s| HumanScenarioStats { scenario: s, mean, sigma, unusable: false }).collect(),
        )
    }

    #[test]
    fn worked_example_scores_fifty() {
        let h = uniform_human(0.8, 0.1);
        let p = compute_phyq(&flat(0.45), &h, &flat(0.1)).unwrap();
        assert!((p.z_agent + 3.5).abs() < 1e-12);
        assert!((p.z_random + 7.0).abs() < 1e-12);
        assert!((p.score - 50.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let mut h = uniform_human(0.8, 0.1);
        assert_eq!(compute_phyq(&flat(0.5), &h, &flat(0.8)), Err(ScoreError::ZeroRandomZ));
        assert!(matches!(compute_phyq(&flat(0.5), &h, &flat(0.9)), Err(ScoreError::PositiveRandomZ(_))));
        h.scenarios[6].sigma = 0.0;
        assert_eq!(compute_phyq(&flat(0.5), &h, &flat(0.1)), Err(ScoreError::ZeroSigma(7)));
        assert_eq!(z_score(&flat(0.5), &HumanStats::empty_template()), Err(ScoreError::ZeroSigma(3)));
    }

    #[test]
    fn synthetic_profile_is_valid() {
        HumanStats::synthetic().validate().unwrap();
    }
}
