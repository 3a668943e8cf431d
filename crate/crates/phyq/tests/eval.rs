use std::collections::BTreeMap;

use phyq::eval::{attempt_seed, run_protocol, EvalError, ProtocolConfig};
use phyq::files::{generate_task_set, TaskSet};
use phyq_core::agents::LearnerConfig;
use phyq_core::score::aggregate;
use phyq_core::taskgen::{find_template, make_splits, SplitMode, SplitSpec, TaskTemplate};

fn templates(ids: &[&str]) -> Vec<TaskTemplate> {
    ids.iter().map(|id| find_template(id).unwrap()).collect()
}

fn setup(ids: &[&str], n: u32, mode: SplitMode) -> (TaskSet, SplitSpec) {
    let t = templates(ids);
    (generate_task_set(&t, n, 5).unwrap(), make_splits(&t, mode, n).unwrap())
}

fn quick_learner() -> Option<LearnerConfig> {
    Some(LearnerConfig { episodes_per_task: 2, decay_episodes: 10, ..LearnerConfig::default() })
}

#[test]
fn deterministic_agent_rates_are_zero_or_one() {
    let (tasks, splits) = setup(&["4.1", "4.2"], 5, SplitMode::Local);
    let log = run_protocol(&ProtocolConfig::new("heuristic", SplitMode::Local), &tasks, &splits, |_| {}).unwrap();
    assert_eq!(log.len(), 2 * 1 * 5);
    let seeds: std::collections::BTreeSet<u64> = log.iter().map(|r| r.seed).collect();
    assert_eq!(seeds.len(), log.len(), "attempts are seeded distinctly");
    for t in aggregate(&log, &splits).task_rates {
        assert!(t.rate == 0.0 || t.rate == 1.0, "{t:?}");
        assert_eq!(t.attempts, 5);
    }
}

#[test]
fn random_rates_are_multiples_of_one_fiftieth() {
    let (tasks, splits) = setup(&["1.1"], 5, SplitMode::Local);
    let log = run_protocol(&ProtocolConfig::new("random", SplitMode::Local), &tasks, &splits, |_| {}).unwrap();
    assert_eq!(log.len(), 50);
    for t in aggregate(&log, &splits).task_rates {
        assert!(((t.rate * 50.0) - (t.rate * 50.0).round()).abs() < 1e-9);
    }
}

#[test]
fn runs_repeat_exactly_and_the_sink_sees_every_record() {
    let (tasks, splits) = setup(&["7.1", "7.2"], 5, SplitMode::Broad);
    let cfg = ProtocolConfig { attempts: 3, threads: Some(2), ..ProtocolConfig::new("pig_shooter", SplitMode::Broad) };
    let mut seen = 0;
    let a = run_protocol(&cfg, &tasks, &splits, |_| seen += 1).unwrap();
    let b = run_protocol(&cfg, &tasks, &splits, |_| {}).unwrap();
    assert_eq!(seen, a.len());
    let strip = |v: &[phyq_core::score::AttemptRecord]| {
        v.iter().map(|r| (r.template_id.clone(), r.task_index, r.attempt_index, r.seed, r.passed)).collect::<Vec<_>>()
    };
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(a[0].seed, attempt_seed(0, &a[0].template_id, a[0].task_index, 0));
}

#[test]
fn learner_tests_once_per_task_in_both_modes() {
    for mode in [SplitMode::Local, SplitMode::Broad] {
        let (tasks, splits) = setup(&["3.1", "3.2"], 5, mode);
        let cfg = ProtocolConfig { learner: quick_learner(), ..ProtocolConfig::new("learner", mode) };
        let log = run_protocol(&cfg, &tasks, &splits, |_| {}).unwrap();
        let mut per_task: BTreeMap<(String, u32), u32> = BTreeMap::new();
        for r in &log {
            assert_eq!(r.attempt_index, 0);
            *per_task.entry((r.template_id.clone(), r.task_index)).or_default() += 1;
        }
        assert!(per_task.values().all(|&n| n == 1));
        assert_eq!(per_task.len(), splits.test_tasks().len());
    }
}

#[test]
fn bad_configurations_are_refused() {
    let (tasks, splits) = setup(&["3.1"], 5, SplitMode::Local);
    let run = |cfg: ProtocolConfig| run_protocol(&cfg, &tasks, &splits, |_| {}).unwrap_err();
    assert!(matches!(run(ProtocolConfig::new("nobody", SplitMode::Local)), EvalError::UnknownAgent(_)));
    assert!(matches!(
        run(ProtocolConfig { attempts: 0, ..ProtocolConfig::new("random", SplitMode::Local) }),
        EvalError::ZeroAttempts
    ));
    assert!(matches!(
        run(ProtocolConfig { attempts: 5, ..ProtocolConfig::new("learner", SplitMode::Local) }),
        EvalError::LearnerAttempts(5)
    ));
    assert!(matches!(run(ProtocolConfig::new("random", SplitMode::Broad)), EvalError::ModeMismatch { .. }));

    let mut empty = splits.clone();
    empty.templates.iter_mut().for_each(|t| t.test_tasks.clear());
    let err = run_protocol(&ProtocolConfig::new("random", SplitMode::Local), &tasks, &empty, |_| {}).unwrap_err();
    assert!(matches!(err, EvalError::SplitEmpty));

    let missing = TaskSet { tasks: tasks.tasks[..2].to_vec(), ..tasks.clone() };
    let err = run_protocol(&ProtocolConfig::new("random", SplitMode::Local), &missing, &splits, |_| {}).unwrap_err();
    assert!(matches!(err, EvalError::MissingTask(..)));
}
