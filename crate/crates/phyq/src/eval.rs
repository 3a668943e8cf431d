//! Local and broad generalisation protocols.
//!
//! Non-learning agents play every test task `attempts` times, one fresh
//! episode per attempt. The learner is trained first, one table per
//! template (local) or per scenario (broad), and then plays each test task
//! once. Work units run on a rayon pool; every finished attempt is sent to
//! a single sink.

use std::collections::BTreeMap;
use std::sync::mpsc;
use std::time::Instant;

use phyq_core::agents::{agent_by_name, play_episode, Agent, LearnerAgent, LearnerConfig, AGENT_NAMES};
use phyq_core::game::GameError;
use phyq_core::rng::{hash_str, hash_words};
use phyq_core::score::AttemptRecord;
use phyq_core::taskgen::{SplitMode, SplitSpec, TaskInstance};

use crate::files::TaskSet;

/// Salt separating training seeds from test seeds.
const TRAIN_SALT: u64 = 0x7472_6169_6e;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("the split has no test tasks")]
    SplitEmpty,
    #[error("unknown agent {0:?}")]
    UnknownAgent(String),
    #[error("attempts must be at least 1")]
    ZeroAttempts,
    #[error("a learning agent is tested with exactly one attempt, not {0}")]
    LearnerAttempts(u32),
    #[error("split mode {split:?} does not match the requested mode {mode:?}")]
    ModeMismatch { mode: SplitMode, split: SplitMode },
    #[error("task {0} #{1} is not in the task set")]
    MissingTask(String, u32),
    #[error("game error: {0}")]
    Game(#[from] GameError),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Attempts per test task used when none is given.
pub fn default_attempts(agent: &str) -> u32 {
    match agent {
        "random" => 50,
        "learner" => 1,
        _ => 5,
    }
}

pub fn is_learning_agent(agent: &str) -> bool {
    agent == "learner"
}

/// Seed of attempt `attempt` of task `task` of `template`.
pub fn attempt_seed(run_seed: u64, template: &str, task: u32, attempt: u32) -> u64 {
    hash_words(&[run_seed, hash_str(template), task as u64, attempt as u64])
}

#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    pub agent: String,
    pub mode: SplitMode,
    pub attempts: u32,
    pub run_seed: u64,
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
    /// Learner settings. When `None` the defaults are used with the
    /// exploration decay spread over the first half of each training run.
    pub learner: Option<LearnerConfig>,
}

impl ProtocolConfig {
    pub fn new(agent: &str, mode: SplitMode) -> ProtocolConfig {
        ProtocolConfig {
            agent: agent.into(),
            mode,
            attempts: default_attempts(agent),
            run_seed: 0,
            threads: None,
            learner: None,
        }
    }
}

/// One unit of parallel work.
enum Job<'a> {
    /// All attempts of one test task.
    Attempts { task: &'a TaskInstance },
    /// Train one learner, then test it.
    Learn { train: Vec<&'a TaskInstance>, test: Vec<&'a TaskInstance> },
}

fn lookup<'a>(tasks: &'a TaskSet, id: &str, index: u32) -> Result<&'a TaskInstance, EvalError> {
    tasks.get(id, index).ok_or_else(|| EvalError::MissingTask(id.into(), index))
}

fn build_jobs<'a>(cfg: &ProtocolConfig, tasks: &'a TaskSet, splits: &SplitSpec) -> Result<Vec<Job<'a>>, EvalError> {
    if !is_learning_agent(&cfg.agent) {
        return splits
            .test_tasks()
            .iter()
            .map(|(id, i)| lookup(tasks, id, *i).map(|task| Job::Attempts { task }))
            .collect();
    }
    let mut jobs = Vec::new();
    match splits.mode {
        SplitMode::Local => {
            for t in &splits.templates {
                let train =
                    t.train_tasks.iter().map(|&i| lookup(tasks, &t.template_id, i)).collect::<Result<_, _>>()?;
                let test = t.test_tasks.iter().map(|&i| lookup(tasks, &t.template_id, i)).collect::<Result<_, _>>()?;
                jobs.push(Job::Learn { train, test });
            }
        }
        SplitMode::Broad => {
            for s in &splits.scenarios {
                let side = |ids: &[String], want_test: bool| -> Result<Vec<&'a TaskInstance>, EvalError> {
                    let mut out = Vec::new();
                    for id in ids {
                        if let Some(t) = splits.template(id) {
                            let idx = if want_test { &t.test_tasks } else { &t.train_tasks };
                            for &i in idx {
                                out.push(lookup(tasks, id, i)?);
                            }
                        }
                    }
                    Ok(out)
                };
                jobs.push(Job::Learn { train: side(&s.train_templates, false)?, test: side(&s.test_templates, true)? });
            }
        }
    }
    Ok(jobs)
}

fn record(
    cfg: &ProtocolConfig,
    agent: &mut dyn Agent,
    task: &TaskInstance,
    attempt: u32,
) -> Result<AttemptRecord, EvalError> {
    let seed = attempt_seed(cfg.run_seed, &task.template_id, task.index, attempt);
    let t0 = Instant::now();
    let played = play_episode(agent, &task.level, seed)?;
    Ok(AttemptRecord {
        agent: cfg.agent.clone(),
        mode: cfg.mode,
        template_id: task.template_id.clone(),
        task_index: task.index,
        attempt_index: attempt,
        seed,
        passed: played.outcome.passed,
        shots_used: played.outcome.shot_log.len() as u32,
        wall_time_ms: t0.elapsed().as_secs_f64() * 1e3,
        decisions: played.decisions,
    })
}

/// Trains a fresh learner on `train`, cycling through the tasks
/// `episodes_per_task` times.
pub fn train_learner(
    config: &LearnerConfig,
    train: &[&TaskInstance],
    run_seed: u64,
) -> Result<LearnerAgent, EvalError> {
    let mut learner = LearnerAgent::new(*config);
    learner.set_training(true);
    for epoch in 0..config.episodes_per_task {
        for task in train {
            let seed = hash_words(&[TRAIN_SALT, attempt_seed(run_seed, &task.template_id, task.index, epoch)]);
            play_episode(&mut learner, &task.level, seed)?;
        }
    }
    learner.set_training(false);
    Ok(learner)
}

fn learner_config(cfg: &ProtocolConfig, train_len: usize) -> LearnerConfig {
    cfg.learner.unwrap_or_else(|| {
        let d = LearnerConfig::default();
        LearnerConfig { decay_episodes: (train_len as u32 * d.episodes_per_task / 2).max(1), ..d }
    })
}

fn run_job(cfg: &ProtocolConfig, job: &Job<'_>, sink: &mpsc::Sender<AttemptRecord>) -> Result<(), EvalError> {
    match job {
        Job::Attempts { task } => {
            let mut agent = agent_by_name(&cfg.agent).ok_or_else(|| EvalError::UnknownAgent(cfg.agent.clone()))?;
            for k in 0..cfg.attempts {
                let r = record(cfg, agent.as_mut(), task, k)?;
                let _ = sink.send(r);
            }
        }
        Job::Learn { train, test } => {
            let mut learner = train_learner(&learner_config(cfg, train.len()), train, cfg.run_seed)?;
            for task in test {
                let r = record(cfg, &mut learner, task, 0)?;
                let _ = sink.send(r);
            }
        }
    }
    Ok(())
}

/// Runs the protocol and returns the log in template, task, attempt order.
/// `on_record` sees each attempt as it finishes, from a single thread.
pub fn run_protocol(
    cfg: &ProtocolConfig,
    tasks: &TaskSet,
    splits: &SplitSpec,
    mut on_record: impl FnMut(&AttemptRecord),
) -> Result<Vec<AttemptRecord>, EvalError> {
    if !AGENT_NAMES.contains(&cfg.agent.as_str()) {
        return Err(EvalError::UnknownAgent(cfg.agent.clone()));
    }
    if cfg.attempts == 0 {
        return Err(EvalError::ZeroAttempts);
    }
    if is_learning_agent(&cfg.agent) && cfg.attempts != 1 {
        return Err(EvalError::LearnerAttempts(cfg.attempts));
    }
    if splits.mode != cfg.mode {
        return Err(EvalError::ModeMismatch { mode: cfg.mode, split: splits.mode });
    }
    if splits.test_tasks().is_empty() {
        return Err(EvalError::SplitEmpty);
    }
    let jobs = build_jobs(cfg, tasks, splits)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| EvalError::Pool(e.to_string()))?;

    let (tx, rx) = mpsc::channel::<AttemptRecord>();
    let mut log = Vec::new();
    let result = std::thread::scope(|scope| {
        let worker = scope.spawn(|| {
            use rayon::prelude::*;
            pool.install(|| jobs.par_iter().try_for_each_with(tx, |tx, job| run_job(cfg, job, tx)))
        });
        for r in rx {
            on_record(&r);
            log.push(r);
        }
        worker.join().unwrap_or_else(|_| Err(EvalError::Pool("worker panicked".into())))
    });
    result?;
    let order: BTreeMap<&str, usize> =
        splits.templates.iter().enumerate().map(|(i, t)| (t.template_id.as_str(), i)).collect();
    log.sort_by_key(|r| (order.get(r.template_id.as_str()).copied(), r.task_index, r.attempt_index));
    Ok(log)
}
