use std::cell::Cell;
use std::collections::HashSet;

use phyq_core::catalog::BirdType;
use phyq_core::game::{default_bounds, replay, Action, Episode, Level, LevelBody, V_MAX};
use phyq_core::math::Vec2;
use phyq_core::physics::{MaterialKind, Shape};
use phyq_core::rng::stream_rng;
use phyq_core::taskgen::{
    add_distractors, catalog, find_template, instantiate, instantiate_indexed, make_splits, task_seed,
    DistractorPolicy, ScenarioId, SplitMode, TaskGenError,
};
use phyq_core::trajectory::{solve_release, ArcKind};

fn fingerprint(level: &phyq_core::game::Level) -> String {
    format!("{:?}", level.bodies)
}

#[test]
fn catalog_covers_every_scenario_with_two_or_more_templates() {
    let cat = catalog();
    let ids: HashSet<&str> = cat.iter().map(|t| t.id).collect();
    assert_eq!(ids.len(), cat.len(), "template ids are unique");
    for s in ScenarioId::all() {
        let n = cat.iter().filter(|t| t.scenario == s).count();
        assert!(n >= 2, "scenario {} has {n} templates", s.number());
    }
    for t in &cat {
        let prefix = format!("{}.", t.scenario.number());
        assert!(t.id.starts_with(&prefix), "{} sits in scenario {}", t.id, t.scenario.number());
    }
}

#[test]
fn generation_is_deterministic() {
    for t in catalog() {
        let a = instantiate(&t, 11).unwrap();
        let b = instantiate(&t, 11).unwrap();
        assert_eq!(a, b, "{}", t.id);
    }
}

#[test]
fn unknown_template_is_reported() {
    assert!(matches!(find_template("99.9"), Err(TaskGenError::UnknownTemplate(_))));
}

/// The generator's verification loop re-run independently: one hundred
/// seeds per template, all distinct, every reference solution replays to a
/// pass and every level starts at rest.
#[test]
fn hundred_seeds_per_template_are_distinct_and_solvable() {
    for t in catalog() {
        let mut seen = HashSet::new();
        for i in 0..100u32 {
            let inst = instantiate_indexed(&t, task_seed(2024, i), i).unwrap();
            assert_eq!(inst.template_id, t.id);
            assert!(inst.level.is_stable(), "{} #{i} not at rest", t.id);
            let out = replay(&inst.level, &inst.reference_solution).unwrap();
            assert!(out.passed, "{} #{i} reference fails", t.id);
            assert!(seen.insert(fingerprint(&inst.level)), "{} #{i} duplicates an earlier task", t.id);
        }
    }
}

#[test]
fn zero_distractor_policy_leaves_level_unchanged() {
    let t = find_template("1.1").unwrap();
    let inst = instantiate(&t, 3).unwrap();
    let policy = DistractorPolicy { max: 0, ..t.distractors };
    let mut rng = stream_rng("d", 0, 0);
    let out = add_distractors(&inst.level, &policy, &mut rng, |_| true);
    assert_eq!(out, inst.level);
}

/// A lone pig on the ground and a flat shot at it.
fn ground_pig_level(x: f64) -> (Level, Vec<Action>) {
    let level = Level {
        bounds: default_bounds(),
        slingshot_anchor: Vec2::new(6.0, 5.0),
        bird_queue: vec![BirdType::Red],
        bodies: vec![
            LevelBody::platform(Shape::rect(42.0, 0.5).unwrap(), Vec2::new(42.0, 0.5)),
            LevelBody::new(Shape::circle(0.5).unwrap(), MaterialKind::Pig, Vec2::new(x, 1.5)),
        ],
    };
    let ep = Episode::new(&level).unwrap();
    let w = ep.world();
    let arcs = solve_release(ep.anchor(), Vec2::new(x, 1.5), V_MAX, w.gravity(), &ep.bounds(), w.dt()).unwrap();
    let low = arcs.iter().find(|a| a.arc == ArcKind::Low).unwrap();
    (level, vec![Action::new(low.release)])
}

#[test]
fn distractors_on_the_shot_path_are_rolled_back() {
    let mut rejected = 0;
    for seed in 0..20u64 {
        let x = 24.0 + 2.0 * seed as f64;
        let (level, shot) = ground_pig_level(x);
        assert!(replay(&level, &shot).unwrap().passed);
        // The strip right in front of the pig, where the low arc comes in.
        let policy = DistractorPolicy { materials: &[MaterialKind::Stone], x_range: (x - 2.6, x - 1.6), max: 4 };
        let calls = Cell::new(0);
        let mut rng = stream_rng("path", seed, 0);
        let out = add_distractors(&level, &policy, &mut rng, |l| {
            let ok = replay(l, &shot).map(|o| o.passed).unwrap_or(false);
            if !ok {
                calls.set(calls.get() + 1);
            }
            ok
        });
        rejected += calls.get();
        assert!(replay(&out, &shot).unwrap().passed);
    }
    assert!(rejected > 0, "no proposal ever blocked the reference shot");
}

#[test]
fn fifty_generations_keep_their_reference_after_distractors() {
    let t = find_template("4.1").unwrap();
    assert!(t.distractors.max > 0);
    for seed in 0..50u64 {
        let inst = instantiate(&t, seed).unwrap();
        assert!(replay(&inst.level, &inst.reference_solution).unwrap().passed);
    }
}

#[test]
fn local_split_is_eighty_twenty() {
    let cat = catalog();
    let spec = make_splits(&cat, SplitMode::Local, 100).unwrap();
    assert_eq!(spec.templates.len(), cat.len());
    for t in &spec.templates {
        assert_eq!(t.train_tasks, (0..80).collect::<Vec<_>>());
        assert_eq!(t.test_tasks, (80..100).collect::<Vec<_>>());
    }
}

#[test]
fn broad_split_partitions_each_scenario() {
    let cat = catalog();
    let spec = make_splits(&cat, SplitMode::Broad, 20).unwrap();
    assert_eq!(spec.scenarios.len(), 15);
    for s in &spec.scenarios {
        assert!(!s.train_templates.is_empty() && !s.test_templates.is_empty());
        for id in &s.train_templates {
            assert!(!s.test_templates.contains(id));
        }
    }
    let train: HashSet<_> = spec.train_tasks().into_iter().collect();
    let test: HashSet<_> = spec.test_tasks().into_iter().collect();
    assert!(train.is_disjoint(&test));
    assert_eq!(train.len() + test.len(), cat.len() * 20);
}

#[test]
fn broad_split_needs_two_templates() {
    let cat: Vec<_> = catalog().into_iter().filter(|t| t.id != "7.2").collect();
    assert_eq!(make_splits(&cat, SplitMode::Broad, 10), Err(TaskGenError::InsufficientTemplates(7)));
}
