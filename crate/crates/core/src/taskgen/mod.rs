//! Task templates for the fifteen scenarios, seeded instance generation with
//! replay verification, distractor placement and train/test splits.

mod templates;

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::game::{replay, Action, Level, LevelBody};
use crate::math::{Transform, Vec2};
use crate::physics::{MaterialKind, SettleTracker, Shape};

pub use templates::catalog;

/// Rejected parameter draws tolerated before giving up on an instance.
pub const MAX_DRAWS: u64 = 100;
pub const MAX_DISTRACTORS: usize = 4;
pub const DEFAULT_TASKS_PER_TEMPLATE: u32 = 100;
/// Ticks allowed for a freshly built level to come to rest.
const PRESETTLE_TICKS: u32 = 600;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TaskGenError {
    #[error("template {0}: no verified instance after {MAX_DRAWS} draws")]
    GenerationExhausted(String),
    #[error("scenario {0} has fewer than two templates")]
    InsufficientTemplates(u8),
    #[error("unknown template {0}")]
    UnknownTemplate(String),
}

/// One of the fifteen physical scenarios, numbered 1 to 15.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ScenarioId(u8);

impl ScenarioId {
    pub const NAMES: [&'static str; 15] = [
        "single force",
        "multiple forces",
        "rolling",
        "falling",
        "sliding",
        "bouncing",
        "relative weight",
        "relative height",
        "relative width",
        "shape difference",
        "non-greedy actions",
        "structural analysis",
        "clearing paths",
        "adequate timing",
        "manoeuvring",
    ];

    pub fn new(n: u8) -> Option<ScenarioId> {
        (1..=15).contains(&n).then_some(ScenarioId(n))
    }

    pub fn all() -> impl Iterator<Item = ScenarioId> {
        (1..=15).map(ScenarioId)
    }

    pub fn number(self) -> u8 {
        self.0
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self.0 as usize - 1]
    }
}

impl TryFrom<u8> for ScenarioId {
    type Error = String;

    fn try_from(n: u8) -> Result<Self, Self::Error> {
        ScenarioId::new(n).ok_or_else(|| alloc::format!("scenario {n} outside 1..=15"))
    }
}

impl From<ScenarioId> for u8 {
    fn from(s: ScenarioId) -> u8 {
        s.0
    }
}

/// Named interval a template parameter is drawn from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamRange {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
}

pub const fn range(name: &'static str, lo: f64, hi: f64) -> ParamRange {
    ParamRange { name, lo, hi }
}

/// One draw of a template's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    ranges: &'static [ParamRange],
    values: Vec<f64>,
}

impl Params {
    pub fn draw(ranges: &'static [ParamRange], rng: &mut impl Rng) -> Params {
        let values = ranges.iter().map(|r| if r.hi > r.lo { rng.random_range(r.lo..r.hi) } else { r.lo }).collect();
        Params { ranges, values }
    }

    /// Parameters at the midpoint of every range.
    pub fn midpoint(ranges: &'static [ParamRange]) -> Params {
        Params { ranges, values: ranges.iter().map(|r| 0.5 * (r.lo + r.hi)).collect() }
    }

    pub fn get(&self, name: &str) -> f64 {
        let i = self.ranges.iter().position(|r| r.name == name).unwrap_or_else(|| panic!("no parameter {name}"));
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Where distractor blocks may go and how many.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistractorPolicy {
    pub materials: &'static [MaterialKind],
    /// Horizontal extent of the ground strip distractors stand on.
    pub x_range: (f64, f64),
    pub max: usize,
}

pub type Builder = fn(&Params) -> Level;
pub type Rule = fn(&Params, &Level) -> Vec<Action>;

/// A parameterised layout with the rule that solves every instance of it.
#[derive(Clone, Copy)]
pub struct TaskTemplate {
    pub id: &'static str,
    pub scenario: ScenarioId,
    pub description: &'static str,
    pub ranges: &'static [ParamRange],
    pub build: Builder,
    pub rule: Rule,
    pub distractors: DistractorPolicy,
    /// Side of the shipped broad split this template belongs to.
    pub broad_train: bool,
}

impl core::fmt::Debug for TaskTemplate {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("TaskTemplate").field("id", &self.id).field("scenario", &self.scenario).finish()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub template_id: String,
    pub seed: u64,
    pub index: u32,
    pub level: Level,
    pub reference_solution: Vec<Action>,
}

pub fn find_template(id: &str) -> Result<TaskTemplate, TaskGenError> {
    catalog().into_iter().find(|t| t.id == id).ok_or_else(|| TaskGenError::UnknownTemplate(id.to_string()))
}

/// Seed of task `index` of a template in a catalog generated from `base_seed`.
pub fn task_seed(base_seed: u64, index: u32) -> u64 {
    base_seed.wrapping_add(index as u64)
}

/// Lets the level come to rest with damage disabled, then writes the rest
/// poses back with zero velocity. Returns `None` if a body left the level.
pub fn presettle(level: &Level) -> Option<Level> {
    let mut world = level.build_world();
    world.config_mut().damage = false;
    let count = world.bodies().len();
    let mut tracker = SettleTracker::default();
    for _ in 0..PRESETTLE_TICKS {
        world.step();
        tracker.observe(&world);
        if world.bodies().len() != count {
            return None;
        }
        if crate::physics::is_settled(&world, &tracker) {
            break;
        }
    }
    let mut out = level.clone();
    // Body 0 of the world is the slingshot; level bodies follow in order.
    for (lb, b) in out.bodies.iter_mut().zip(world.bodies().iter().skip(1)) {
        if lb.path.is_none() {
            lb.position = b.position;
            lb.rotation = b.rotation;
        }
    }
    Some(out)
}

fn passes(level: &Level, actions: &[Action]) -> bool {
    replay(level, actions).map(|o| o.passed).unwrap_or(false)
}

/// Builds a verified instance of `template` for `seed`: parameters are
/// redrawn until the settled level is stable and its reference solution
/// passes, then distractors are added.
pub fn instantiate(template: &TaskTemplate, seed: u64) -> Result<TaskInstance, TaskGenError> {
    instantiate_indexed(template, seed, 0)
}

pub fn instantiate_indexed(template: &TaskTemplate, seed: u64, index: u32) -> Result<TaskInstance, TaskGenError> {
    for draw in 0..MAX_DRAWS {
        let mut rng = crate::rng::stream_rng(template.id, seed, draw);
        let params = Params::draw(template.ranges, &mut rng);
        let Some(level) = prepare(template, &params) else {
            continue;
        };
        let actions = (template.rule)(&params, &level);
        if actions.is_empty() || !passes(&level, &actions) {
            continue;
        }
        let level = add_distractors(&level, &template.distractors, &mut rng, |l| l.is_stable() && passes(l, &actions));
        return Ok(TaskInstance {
            template_id: template.id.to_string(),
            seed,
            index,
            level,
            reference_solution: actions,
        });
    }
    Err(TaskGenError::GenerationExhausted(template.id.to_string()))
}

/// Builds, validates and settles the level for `params`.
pub fn prepare(template: &TaskTemplate, params: &Params) -> Option<Level> {
    let level = (template.build)(params);
    level.validate().ok()?;
    let level = presettle(&level)?;
    (level.validate().is_ok() && level.is_stable()).then_some(level)
}

const DISTRACTOR_SHAPES: [(f64, f64); 4] = [(0.5, 0.5), (0.25, 0.5), (0.5, 0.25), (0.75, 0.25)];

/// Places up to `policy.max` blocks on the ground strip. Each placement is
/// kept only if `keeps_solution` still holds with it.
pub fn add_distractors(
    level: &Level,
    policy: &DistractorPolicy,
    rng: &mut impl Rng,
    keeps_solution: impl Fn(&Level) -> bool,
) -> Level {
    let mut out = level.clone();
    if policy.max == 0 || policy.materials.is_empty() {
        return out;
    }
    let count = rng.random_range(0..=policy.max);
    let floor = ground_top(level);
    for _ in 0..count {
        let material = policy.materials[rng.random_range(0..policy.materials.len())];
        let (hw, hh) = DISTRACTOR_SHAPES[rng.random_range(0..DISTRACTOR_SHAPES.len())];
        let x = rng.random_range(policy.x_range.0..policy.x_range.1);
        let body = LevelBody::new(Shape::Box { half_w: hw, half_h: hh }, material, Vec2::new(x, floor + hh));
        if overlaps_any(&out, &body) {
            continue;
        }
        let mut candidate = out.clone();
        candidate.bodies.push(body);
        if candidate.validate().is_ok() && keeps_solution(&candidate) {
            out = candidate;
        }
    }
    out
}

fn ground_top(level: &Level) -> f64 {
    level
        .bodies
        .first()
        .map(|g| g.shape.aabb(&Transform::new(g.position, g.rotation)).max.y)
        .unwrap_or(level.bounds.min.y)
}

fn overlaps_any(level: &Level, body: &LevelBody) -> bool {
    let bb = body.shape.aabb(&Transform::new(body.position, body.rotation)).inflate(0.3);
    level.bodies.iter().skip(1).any(|b| bb.overlaps(&b.shape.aabb(&Transform::new(b.position, b.rotation))))
        || bb.contains(level.slingshot_anchor)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Local,
    Broad,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSplit {
    pub template_id: String,
    pub train_tasks: Vec<u32>,
    pub test_tasks: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSplit {
    pub scenario: ScenarioId,
    pub train_templates: Vec<String>,
    pub test_templates: Vec<String>,
}

/// Train/test partition at template and task level.
///
/// In local mode every template appears on both sides of its scenario split
/// and its tasks are divided 80/20. In broad mode whole templates are
/// assigned to one side and all of their tasks follow.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub tasks_per_template: u32,
    pub scenarios: Vec<ScenarioSplit>,
    pub templates: Vec<TemplateSplit>,
}

impl SplitSpec {
    pub fn template(&self, id: &str) -> Option<&TemplateSplit> {
        self.templates.iter().find(|t| t.template_id == id)
    }

    /// `(template, task index)` pairs evaluated at test time.
    pub fn test_tasks(&self) -> Vec<(String, u32)> {
        self.templates.iter().flat_map(|t| t.test_tasks.iter().map(move |&i| (t.template_id.clone(), i))).collect()
    }

    pub fn train_tasks(&self) -> Vec<(String, u32)> {
        self.templates.iter().flat_map(|t| t.train_tasks.iter().map(move |&i| (t.template_id.clone(), i))).collect()
    }
}

pub fn make_splits(
    catalog: &[TaskTemplate],
    mode: SplitMode,
    tasks_per_template: u32,
) -> Result<SplitSpec, TaskGenError> {
    let mut scenarios = Vec::new();
    let mut templates = Vec::new();
    for s in ScenarioId::all() {
        let members: Vec<&TaskTemplate> = catalog.iter().filter(|t| t.scenario == s).collect();
        if members.is_empty() {
            continue;
        }
        match mode {
            SplitMode::Local => {
                let ids: Vec<String> = members.iter().map(|t| t.id.to_string()).collect();
                let cut = tasks_per_template * 4 / 5;
                for t in &members {
                    templates.push(TemplateSplit {
                        template_id: t.id.to_string(),
                        train_tasks: (0..cut).collect(),
                        test_tasks: (cut..tasks_per_template).collect(),
                    });
                }
                scenarios.push(ScenarioSplit { scenario: s, train_templates: ids.clone(), test_templates: ids });
            }
            SplitMode::Broad => {
                if members.len() < 2 {
                    return Err(TaskGenError::InsufficientTemplates(s.number()));
                }
                let mut split = ScenarioSplit { scenario: s, train_templates: Vec::new(), test_templates: Vec::new() };
                for t in &members {
                    let all: Vec<u32> = (0..tasks_per_template).collect();
                    if t.broad_train {
                        split.train_templates.push(t.id.to_string());
                        templates.push(TemplateSplit {
                            template_id: t.id.to_string(),
                            train_tasks: all,
                            test_tasks: Vec::new(),
                        });
                    } else {
                        split.test_templates.push(t.id.to_string());
                        templates.push(TemplateSplit {
                            template_id: t.id.to_string(),
                            train_tasks: Vec::new(),
                            test_tasks: all,
                        });
                    }
                }
                if split.train_templates.is_empty() || split.test_templates.is_empty() {
                    return Err(TaskGenError::InsufficientTemplates(s.number()));
                }
                scenarios.push(split);
            }
        }
    }
    Ok(SplitSpec { mode, tasks_per_template, scenarios, templates })
}
