use phyq_core::agents::{
    pig_shooter_act, play_episode, Agent, AgentError, HeuristicAgent, HeuristicProfile, LearnerAgent, LearnerConfig,
    Observation, PigShooterAgent, RandomAgent, Strategy, SupportGraph,
};
use phyq_core::catalog::{BirdType, ObjectClass};
use phyq_core::game::{default_bounds, replay, Action, Episode, Level, LevelBody, V_MAX};
use phyq_core::math::Vec2;
use phyq_core::physics::{MaterialKind, Shape};
use phyq_core::rng::stream_rng;
use phyq_core::taskgen::{catalog, find_template, instantiate_indexed, task_seed, TaskInstance};
use phyq_core::trajectory::{solve_release, ArcKind};

fn instances(id: &str, n: u32) -> Vec<TaskInstance> {
    let t = find_template(id).unwrap();
    (0..n).map(|i| instantiate_indexed(&t, task_seed(500, i), i).unwrap()).collect()
}

fn ground() -> LevelBody {
    LevelBody::platform(Shape::rect(42.0, 0.5).unwrap(), Vec2::new(42.0, 0.5))
}

fn level(bodies: Vec<LevelBody>) -> Level {
    Level { bounds: default_bounds(), slingshot_anchor: Vec2::new(6.0, 5.0), bird_queue: vec![BirdType::Red], bodies }
}

fn pig(x: f64, y: f64) -> LevelBody {
    LevelBody::new(Shape::circle(0.5).unwrap(), MaterialKind::Pig, Vec2::new(x, y))
}

#[test]
fn pig_shooter_releases_lie_on_an_arc_through_a_pig() {
    for inst in instances("11.1", 5) {
        let ep = Episode::new(&inst.level).unwrap();
        let obs = Observation::new(&ep);
        let pigs: Vec<Vec2> =
            ep.world().bodies().iter().filter(|b| b.class == ObjectClass::Pig).map(|b| b.position).collect();
        let mut rng = stream_rng("ps", inst.seed, 0);
        for _ in 0..10 {
            let a = pig_shooter_act(&obs, &mut rng).unwrap();
            let near = pigs.iter().any(|p| {
                solve_release(ep.anchor(), *p, V_MAX, ep.world().gravity(), &ep.bounds(), ep.world().dt())
                    .unwrap()
                    .iter()
                    .any(|arc| arc.release.distance(a.release) < 0.02)
            });
            assert!(near, "release {:?} aims at no pig", a.release);
        }
    }
}

#[test]
fn pig_shooter_with_a_single_pig_uses_both_arcs() {
    let lvl = level(vec![ground(), pig(40.0, 1.5)]);
    let ep = Episode::new(&lvl).unwrap();
    let obs = Observation::new(&ep);
    let mut rng = stream_rng("ps", 1, 0);
    let releases: std::collections::BTreeSet<(i64, i64)> = (0..40)
        .map(|_| pig_shooter_act(&obs, &mut rng).unwrap().release)
        .map(|r| ((r.x * 1e4) as i64, (r.y * 1e4) as i64))
        .collect();
    assert_eq!(releases.len(), 2);
}

#[test]
fn no_pig_is_an_error() {
    let inst = &instances("1.1", 1)[0];
    let mut ep = Episode::new(&inst.level).unwrap();
    ep.launch(inst.reference_solution[0]).unwrap();
    assert_eq!(ep.pigs_left(), 0);
    let obs = Observation::new(&ep);
    assert_eq!(pig_shooter_act(&obs, &mut stream_rng("ps", 0, 0)), Err(AgentError::NoPigVisible));
}

#[test]
fn unreachable_pig_falls_back_to_the_maximum_range_arc_and_fails() {
    let tower = LevelBody::platform(Shape::rect(1.0, 20.0).unwrap(), Vec2::new(80.0, 21.0));
    let lvl = level(vec![ground(), tower, pig(80.0, 41.5)]);
    let ep = Episode::new(&lvl).unwrap();
    let g = ep.world().gravity();
    assert!(solve_release(ep.anchor(), Vec2::new(80.0, 41.5), V_MAX, g, &ep.bounds(), ep.world().dt()).is_err());
    let mut agent = PigShooterAgent::new();
    let played = play_episode(&mut agent, &lvl, 3).unwrap();
    assert!(!played.outcome.passed);
    let v = phyq_core::game::release_to_velocity(played.outcome.shot_log[0].action.release).unwrap();
    assert!((v.angle() - std::f64::consts::FRAC_PI_4).abs() < 1e-9);
}

#[test]
fn agents_repeat_their_actions_for_the_same_seed() {
    let inst = &instances("8.1", 1)[0];
    let agents: Vec<Box<dyn Fn() -> Box<dyn Agent>>> = vec![
        Box::new(|| Box::new(RandomAgent::new())),
        Box::new(|| Box::new(PigShooterAgent::new())),
        Box::new(|| Box::new(HeuristicAgent::new(HeuristicProfile::Full))),
        Box::new(|| Box::new(LearnerAgent::new(LearnerConfig::default()))),
    ];
    for make in agents {
        let a = play_episode(make().as_mut(), &inst.level, 42).unwrap();
        let b = play_episode(make().as_mut(), &inst.level, 42).unwrap();
        assert_eq!(a.outcome, b.outcome);
        assert_eq!(a.decisions, b.decisions);
    }
}

#[test]
fn heuristic_picks_the_rule_the_template_calls_for() {
    for (id, want) in
        [("1.1", Strategy::Direct), ("3.1", Strategy::Roll), ("10.1", Strategy::Roll), ("12.1", Strategy::Topple)]
    {
        for inst in instances(id, 5) {
            let mut agent = HeuristicAgent::new(HeuristicProfile::Full);
            let played = play_episode(&mut agent, &inst.level, 0).unwrap();
            assert_eq!(played.decisions[0], want.name(), "{id} seed {}", inst.seed);
            assert!(played.outcome.passed, "{id} seed {}", inst.seed);
        }
    }
}

#[test]
fn heuristic_choice_ignores_the_attempt_seed() {
    let inst = &instances("13.2", 1)[0];
    let mut agent = HeuristicAgent::new(HeuristicProfile::Full);
    let a = play_episode(&mut agent, &inst.level, 1).unwrap();
    let b = play_episode(&mut agent, &inst.level, 99).unwrap();
    assert_eq!(a.outcome, b.outcome);
    assert_eq!(a.decisions, b.decisions);
}

#[test]
fn support_graph_of_a_stack() {
    let b = |y: f64| LevelBody::new(Shape::rect(0.5, 0.5).unwrap(), MaterialKind::Wood, Vec2::new(30.0, y));
    let lvl = level(vec![ground(), b(1.5), b(2.5), b(3.5), pig(40.0, 1.5)]);
    let ep = Episode::new(&lvl).unwrap();
    let obs = Observation::new(&ep);
    let g = SupportGraph::from_frame(obs.frame(), &obs.screen_map());
    assert!(g.is_acyclic());
    let blocks: Vec<usize> = (0..g.nodes.len()).filter(|&i| g.nodes[i].class == ObjectClass::Wood).collect();
    assert_eq!(blocks.len(), 3);
    let mut by_height = blocks.clone();
    by_height.sort_by(|&i, &j| g.nodes[i].centroid.y.total_cmp(&g.nodes[j].centroid.y));
    let [low, mid, top] = [by_height[0], by_height[1], by_height[2]];
    assert!(g.nodes[g.nodes[low].rests_on[0]].is_platform());
    assert_eq!(g.nodes[mid].rests_on, vec![low]);
    assert_eq!(g.nodes[top].rests_on, vec![mid]);
    assert!((g.nodes[low].load - 2.0).abs() < 0.05);
    assert!((g.nodes[mid].load - 1.0).abs() < 0.05);
    assert_eq!(g.nodes[top].load, 0.0);
    assert!(g.nodes.iter().filter(|n| n.is_platform()).all(|n| n.rests_on.is_empty()));
}

#[test]
fn support_graphs_of_the_catalog_are_acyclic() {
    for t in catalog() {
        let inst = instantiate_indexed(&t, 9, 0).unwrap();
        let ep = Episode::new(&inst.level).unwrap();
        let obs = Observation::new(&ep);
        assert!(SupportGraph::from_frame(obs.frame(), &obs.screen_map()).is_acyclic(), "{}", t.id);
    }
}

#[test]
fn greedy_learner_is_deterministic_and_bounded() {
    let insts = instances("1.1", 6);
    let mut learner = LearnerAgent::new(LearnerConfig { decay_episodes: 30, ..LearnerConfig::default() });
    learner.set_training(true);
    for (k, inst) in insts.iter().enumerate() {
        for e in 0..8 {
            play_episode(&mut learner, &inst.level, (k * 10 + e) as u64).unwrap();
        }
    }
    for row in learner.table().rows() {
        for a in 0..phyq_core::agents::ACTION_COUNT {
            if let Some(v) = row.value(a) {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }
    learner.set_training(false);
    let table = learner.table().clone();
    let mut a = LearnerAgent::new(LearnerConfig::default()).with_table(table.clone());
    let mut b = LearnerAgent::new(LearnerConfig::default()).with_table(table);
    for inst in &insts {
        let x = play_episode(&mut a, &inst.level, 1).unwrap();
        let y = play_episode(&mut b, &inst.level, 1).unwrap();
        assert_eq!(x.outcome, y.outcome);
    }
    assert_eq!(learner.table().rows().len(), a.table().rows().len(), "testing leaves the table alone");
}

/// Shoots every pig in turn with perfect aim on one fixed arc.
fn shoot_every_pig(level: &Level, arc: ArcKind) -> bool {
    let mut ep = Episode::new(level).unwrap();
    while ep.result() == phyq_core::game::EpisodeResult::Ongoing {
        let w = ep.world();
        let Some(p) = w.bodies().iter().find(|b| b.class == ObjectClass::Pig) else { break };
        let arcs = solve_release(ep.anchor(), p.position, V_MAX, w.gravity(), &ep.bounds(), w.dt()).unwrap_or_default();
        let Some(a) = arcs.iter().find(|a| a.arc == arc).or(arcs.first()) else { break };
        if ep.launch(Action::new(a.release)).is_err() {
            break;
        }
    }
    ep.outcome().passed || ep.pigs_left() == 0
}

/// Templates beyond the direct-shot scenarios must need more than aim: the
/// perfect pig shooter fails on at least half of their instances with
/// either arc.
#[test]
fn perfect_pig_shooting_fails_outside_the_direct_scenarios() {
    const N: u32 = 30;
    for t in catalog().into_iter().filter(|t| t.scenario.number() > 2) {
        for arc in [ArcKind::Low, ArcKind::High] {
            let passes = (0..N)
                .map(|i| instantiate_indexed(&t, task_seed(77, i), i).unwrap())
                .filter(|inst| shoot_every_pig(&inst.level, arc))
                .count() as u32;
            assert!(passes * 2 <= N, "{} {:?}: {passes}/{N}", t.id, arc);
        }
    }
}

#[test]
fn reference_solutions_are_not_pig_shots_in_disguise() {
    // Sanity check on the oracle used above: on the direct-shot scenarios the
    // perfect pig shooter does succeed.
    for id in ["1.1", "2.1"] {
        for inst in instances(id, 5) {
            assert!(shoot_every_pig(&inst.level, ArcKind::Low), "{id}");
            assert!(replay(&inst.level, &inst.reference_solution).unwrap().passed);
        }
    }
}
