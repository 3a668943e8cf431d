use phyq_core::catalog::ObjectClass;
use phyq_core::math::{Aabb, Vec2};
use phyq_core::physics::material::{self, Material, MaterialKind};
use phyq_core::physics::{collide, is_settled, Body, PhysicsConfig, SettleTracker, Shape, World};
use proptest::prelude::*;

fn ball(r: f64, mat: Material, at: Vec2) -> Body {
    Body::dynamic(Shape::circle(r).unwrap(), mat, ObjectClass::Stone, at, 0.0)
}

fn block(hw: f64, hh: f64, mat: Material, at: Vec2) -> Body {
    let class = match mat.kind {
        MaterialKind::Ice => ObjectClass::Ice,
        MaterialKind::Stone => ObjectClass::Stone,
        _ => ObjectClass::Wood,
    };
    Body::dynamic(Shape::rect(hw, hh).unwrap(), mat, class, at, 0.0)
}

fn ground(world: &mut World) -> u32 {
    world.add(Body::fixed(Shape::rect(40.0, 0.5).unwrap(), Vec2::new(40.0, 0.5), 0.0))
}

#[test]
fn free_fall_matches_semi_implicit_closed_form() {
    let mut w = World::new(PhysicsConfig::default(), 1);
    let id = w.add(ball(0.5, material::WOOD, Vec2::new(0.0, 100.0)));
    let g = 9.8;
    let dt = w.dt();
    for n in 1..=60u64 {
        w.step();
        let y = w.body(id).unwrap().position.y;
        let expected = 100.0 - g * dt * dt * (n * (n + 1)) as f64 / 2.0;
        assert!((y - expected).abs() < 1e-9, "tick {n}: {y} vs {expected}");
    }
}

#[test]
fn equal_elastic_circles_exchange_velocities() {
    let cfg = PhysicsConfig { gravity: Vec2::ZERO, ..PhysicsConfig::default() };
    let mat = Material { restitution: 1.0, friction: 0.0, ..material::WOOD };
    let mut w = World::new(cfg, 1);
    let a = w.add(ball(0.5, mat, Vec2::new(0.0, 0.0)));
    let b = w.add(ball(0.5, mat, Vec2::new(3.0, 0.0)));
    w.body_mut(a).unwrap().linear_velocity = Vec2::new(3.0, 0.0);
    w.body_mut(b).unwrap().linear_velocity = Vec2::new(-3.0, 0.0);
    for _ in 0..60 {
        w.step();
    }
    let va = w.body(a).unwrap().linear_velocity;
    let vb = w.body(b).unwrap().linear_velocity;
    assert!((va.x + 3.0).abs() < 1e-6, "{va:?}");
    assert!((vb.x - 3.0).abs() < 1e-6, "{vb:?}");
    assert!((va.x + vb.x).abs() < 1e-6);
}

#[test]
fn three_box_tower_stays_stable() {
    let mut w = World::new(PhysicsConfig::default(), 7);
    ground(&mut w);
    let mut ids = Vec::new();
    for k in 0..3 {
        ids.push(w.add(block(0.6, 0.5, material::WOOD, Vec2::new(20.0, 1.5 + k as f64))));
    }
    let start: Vec<Vec2> = ids.iter().map(|id| w.body(*id).unwrap().position).collect();
    let mut tracker = SettleTracker::default();
    for _ in 0..600 {
        w.step();
        tracker.observe(&w);
    }
    assert!(is_settled(&w, &tracker));
    for (id, p0) in ids.iter().zip(start) {
        let b = w.body(*id).expect("tower block destroyed");
        assert!((b.position - p0).length() < 0.05, "block drifted {:?}", b.position - p0);
        assert!(b.linear_velocity.length() < 0.05);
    }
}

#[test]
fn settle_detection_edge_cases() {
    let w = World::new(PhysicsConfig::default(), 0);
    assert!(is_settled(&w, &SettleTracker::default()));

    let mut w = World::new(PhysicsConfig::default(), 0);
    ground(&mut w);
    let id = w.add(ball(0.5, material::STONE, Vec2::new(10.0, 1.5)));
    w.body_mut(id).unwrap().linear_velocity = Vec2::new(5.0, 0.0);
    let mut tracker = SettleTracker::default();
    w.step();
    tracker.observe(&w);
    assert!(!is_settled(&w, &tracker));
}

#[test]
fn rolling_ball_settles_within_ten_seconds() {
    let mut w = World::new(PhysicsConfig::default(), 0);
    ground(&mut w);
    let id = w.add(ball(0.8, material::WOOD, Vec2::new(10.0, 1.8)));
    w.body_mut(id).unwrap().linear_velocity = Vec2::new(3.0, 0.0);
    w.body_mut(id).unwrap().angular_velocity = -3.0 / 0.8;
    let mut tracker = SettleTracker::default();
    let mut settled_at = None;
    for t in 0..600 {
        w.step();
        tracker.observe(&w);
        if is_settled(&w, &tracker) {
            settled_at = Some(t);
            break;
        }
    }
    let t = settled_at.expect("ball never settled within 10 s");
    assert!(w.body(id).unwrap().position.x > 11.0, "ball did not roll (settled at tick {t})");
}

#[test]
fn static_bodies_never_move() {
    let mut w = World::new(PhysicsConfig::default(), 0);
    let g = ground(&mut w);
    let p = w.add(Body::fixed(Shape::rect(1.0, 0.25).unwrap(), Vec2::new(10.0, 5.0), 0.3));
    for k in 0..8 {
        w.add(ball(0.4, material::STONE, Vec2::new(9.0 + 0.3 * k as f64, 8.0 + k as f64)));
    }
    let before = (w.body(g).unwrap().clone(), w.body(p).unwrap().clone());
    for _ in 0..300 {
        w.step();
        assert_eq!(w.body(g).unwrap().position, before.0.position);
        assert_eq!(w.body(p).unwrap().position, before.1.position);
        assert_eq!(w.body(p).unwrap().rotation, before.1.rotation);
        assert_eq!(w.body(p).unwrap().linear_velocity, Vec2::ZERO);
    }
}

#[test]
fn impulse_below_threshold_leaves_health_unchanged() {
    let mut w = World::new(PhysicsConfig::default(), 0);
    let id = w.add(block(0.5, 0.5, material::WOOD, Vec2::new(0.0, 10.0)));
    let other = w.add(block(0.5, 0.5, material::WOOD, Vec2::new(5.0, 10.0)));
    let h = w.body(id).unwrap().health;
    w.apply_damage(&[phyq_core::physics::Contact {
        body_a: id,
        body_b: other,
        point: Vec2::ZERO,
        normal: Vec2::new(1.0, 0.0),
        impulse: material::WOOD.damage_threshold * 0.9,
    }]);
    assert_eq!(w.body(id).unwrap().health, h);
    assert_eq!(w.body(other).unwrap().health, h);
}

#[test]
fn bodies_are_removed_exactly_when_health_is_exhausted() {
    let cfg = PhysicsConfig::default();
    let mut w = World::new(cfg, 3);
    ground(&mut w);
    for k in 0..6 {
        w.add(block(0.4, 0.4, material::ICE, Vec2::new(10.0 + k as f64, 1.4)));
    }
    let heavy = w.add(ball(1.2, material::STONE, Vec2::new(12.5, 12.0)));
    w.body_mut(heavy).unwrap().linear_velocity = Vec2::new(0.0, -25.0);
    let mut saw_removal = false;
    for _ in 0..240 {
        let before: Vec<u32> = w.bodies().iter().map(|b| b.id).collect();
        w.step();
        let after: Vec<u32> = w.bodies().iter().map(|b| b.id).collect();
        let removed = w.removed_last_tick().to_vec();
        for id in &before {
            assert_eq!(!after.contains(id), removed.contains(id));
        }
        saw_removal |= !removed.is_empty();
        for b in w.bodies() {
            assert!(b.health > 0.0);
        }
    }
    assert!(saw_removal, "a heavy stone dropped on ice should destroy something");
}

fn random_pile(seed: u64) -> World {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let cfg = PhysicsConfig {
        kill_bounds: Some(Aabb::new(Vec2::new(-10.0, -10.0), Vec2::new(90.0, 200.0))),
        ..PhysicsConfig::default()
    };
    let mut w = World::new(cfg, seed);
    ground(&mut w);
    w.add(Body::fixed(Shape::rect(3.0, 0.25).unwrap(), Vec2::new(30.0, 6.0), 0.2));
    for _ in 0..12 {
        let x = rng.random_range(20.0..40.0);
        let y = rng.random_range(3.0..20.0);
        let body = match rng.random_range(0..3) {
            0 => ball(rng.random_range(0.3..1.0), material::WOOD, Vec2::new(x, y)),
            1 => block(rng.random_range(0.2..1.0), rng.random_range(0.2..1.0), material::STONE, Vec2::new(x, y)),
            _ => {
                let (s, c) =
                    Shape::triangle([Vec2::new(x, y), Vec2::new(x + 1.0, y), Vec2::new(x + 0.3, y + 1.2)]).unwrap();
                Body::dynamic(s, material::ICE, ObjectClass::Ice, c, 0.0)
            }
        };
        let overlaps = w
            .bodies()
            .iter()
            .any(|o| collide(&o.shape, &o.transform(), &body.shape, &body.transform(), 0.05).is_some());
        if !overlaps {
            w.add(body);
        }
    }
    w
}

#[test]
fn identical_worlds_produce_identical_hashes() {
    for seed in 0..20u64 {
        let mut a = random_pile(seed);
        let mut b = random_pile(seed);
        for _ in 0..1000 {
            a.step();
            b.step();
            assert_eq!(a.state_hash(), b.state_hash(), "seed {seed} tick {}", a.tick());
        }
    }
}

fn max_speed_shot(angle: f64, thickness: f64, wall_x: f64) -> (World, u32) {
    let cfg = PhysicsConfig { gravity: Vec2::ZERO, ..PhysicsConfig::default() };
    let mut w = World::new(cfg, 0);
    // Thin platform crossing the shot direction.
    w.add(Body::fixed(Shape::rect(thickness / 2.0, 10.0).unwrap(), Vec2::new(wall_x, 0.0), 0.0));
    let bird = Body::dynamic(Shape::circle(0.45).unwrap(), material::BIRD, ObjectClass::RedBird, Vec2::ZERO, 0.0);
    let id = w.add(bird);
    w.body_mut(id).unwrap().linear_velocity = Vec2::from_angle(angle) * 54.0;
    (w, id)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn birds_do_not_tunnel_through_thin_platforms(angle in -0.8f64..0.8, wall_x in 2.0f64..8.0) {
        let (mut w, id) = max_speed_shot(angle, 0.5, wall_x);
        for _ in 0..40 {
            w.step();
            let x = w.body(id).unwrap().position.x;
            prop_assert!(x < wall_x, "bird crossed the wall: x = {x}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_never_increases_across_a_tick(seed in 0u64..10_000) {
        let mut w = random_pile(seed);
        for _ in 0..400 {
            let e0 = w.total_energy();
            let n0 = w.bodies().len();
            w.step();
            if w.bodies().len() != n0 {
                continue;
            }
            let e1 = w.total_energy();
            prop_assert!(e1 <= e0 + 1e-6 * e0.abs().max(1.0), "tick {}: {e0} -> {e1}", w.tick());
        }
    }
}
