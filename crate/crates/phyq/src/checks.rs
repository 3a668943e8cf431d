//! Measurements shared by the `bench` command and the test suites.

use std::time::Instant;

use phyq_core::game::{Action, Episode, EpisodeResult};
use phyq_core::taskgen::TaskInstance;

/// State hash after each of the first `ticks` ticks of playing `actions`
/// on the task. Once the actions run out or the episode ends, the world
/// keeps stepping on its own.
pub fn tick_hashes(task: &TaskInstance, actions: &[Action], ticks: usize) -> Vec<u64> {
    let mut hashes = Vec::with_capacity(ticks);
    let mut ep = Episode::new(&task.level).expect("shipped levels are valid");
    for a in actions {
        if hashes.len() >= ticks || ep.result() != EpisodeResult::Ongoing {
            break;
        }
        let _ = ep.launch_observed(*a, |w| hashes.push(w.state_hash()));
    }
    hashes.truncate(ticks);
    let mut world = ep.world().clone();
    while hashes.len() < ticks {
        world.step();
        hashes.push(world.state_hash());
    }
    hashes
}

/// One digest per task over all its tick hashes.
pub fn digest(hashes: &[u64]) -> u64 {
    phyq_core::rng::hash_words(hashes)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Throughput {
    pub episodes: usize,
    pub simulated_seconds: f64,
    pub wall_seconds: f64,
}

impl Throughput {
    /// Simulated seconds per wall second.
    pub fn speedup(&self) -> f64 {
        self.simulated_seconds / self.wall_seconds
    }

    pub fn episodes_per_second(&self) -> f64 {
        self.episodes as f64 / self.wall_seconds
    }
}

/// Plays each task's reference solution in process and times it.
pub fn replay_throughput(tasks: &[TaskInstance]) -> Throughput {
    let t0 = Instant::now();
    let mut sim = 0.0;
    for task in tasks {
        let mut ep = Episode::new(&task.level).expect("shipped levels are valid");
        for a in &task.reference_solution {
            if let Ok(shot) = ep.launch(*a) {
                sim += shot.ticks as f64 * ep.world().dt();
            }
        }
    }
    Throughput { episodes: tasks.len(), simulated_seconds: sim, wall_seconds: t0.elapsed().as_secs_f64() }
}

/// `n` tasks drawn from the catalog by hashing `(seed, i)`.
pub fn sample_tasks(n: usize, seed: u64) -> Result<Vec<TaskInstance>, phyq_core::taskgen::TaskGenError> {
    let cat = phyq_core::taskgen::catalog();
    (0..n)
        .map(|i| {
            let h = phyq_core::rng::hash_words(&[seed, i as u64]);
            let t = &cat[(h % cat.len() as u64) as usize];
            phyq_core::taskgen::instantiate_indexed(t, h, i as u32)
        })
        .collect()
}

/// One-sided exact sign test: the probability of at least `wins` successes
/// in `wins + losses` fair coin flips.
pub fn sign_test(wins: u32, losses: u32) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let mut pmf = 0.5f64.powi(n as i32);
    let mut tail = 0.0;
    for k in 0..=n {
        if k >= wins {
            tail += pmf;
        }
        pmf *= (n - k) as f64 / (k + 1) as f64;
    }
    tail.min(1.0)
}

/// Result of aiming both planner arcs at one target on an empty level.
#[derive(Clone, Debug, PartialEq)]
pub struct PlannerTrial {
    pub target: phyq_core::math::Vec2,
    /// Whether the launch-angle quadratic has two distinct roots.
    pub two_roots: bool,
    pub arcs: usize,
    /// Closest approach of the simulated bird to the target, per arc.
    pub misses: Vec<f64>,
}

/// Distance from `p` to the segment `a`-`b`.
fn segment_distance(p: phyq_core::math::Vec2, a: phyq_core::math::Vec2, b: phyq_core::math::Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.length_squared();
    let t = if len2 == 0.0 { 0.0 } else { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) };
    p.distance(a + ab * t)
}

/// Level with only the ground and a pig tucked behind the slingshot.
pub fn open_level() -> phyq_core::game::Level {
    use phyq_core::game::{default_bounds, LevelBody};
    use phyq_core::math::Vec2;
    use phyq_core::physics::{MaterialKind, Shape};
    phyq_core::game::Level {
        bounds: default_bounds(),
        slingshot_anchor: Vec2::new(6.0, 5.0),
        bird_queue: vec![phyq_core::catalog::BirdType::Red],
        bodies: vec![
            LevelBody::platform(Shape::rect(42.0, 0.5).expect("valid"), Vec2::new(42.0, 0.5)),
            LevelBody::new(Shape::circle(0.5).expect("valid"), MaterialKind::Pig, Vec2::new(1.0, 1.5)),
        ],
    }
}

/// Plans full-speed arcs to `target`, flies a red bird along each and
/// measures how close it passes.
pub fn planner_trial(target: phyq_core::math::Vec2) -> PlannerTrial {
    use phyq_core::catalog::ObjectClass;
    use phyq_core::game::V_MAX;
    let level = open_level();
    let probe = Episode::new(&level).expect("valid level");
    let g = -probe.world().gravity().y;
    let d = target - probe.anchor();
    let v2 = V_MAX * V_MAX;
    let two_roots = v2 * v2 - g * (g * d.x * d.x + 2.0 * d.y * v2) > 0.0;
    let arcs = phyq_core::trajectory::solve_release(
        probe.anchor(),
        target,
        V_MAX,
        probe.world().gravity(),
        &probe.bounds(),
        probe.world().dt(),
    )
    .unwrap_or_default();
    let mut misses = Vec::new();
    for arc in &arcs {
        let mut ep = Episode::new(&level).expect("valid level");
        let mut last: Option<phyq_core::math::Vec2> = None;
        let mut best = f64::INFINITY;
        let _ = ep.launch_observed(Action::new(arc.release), |w| {
            if let Some(b) = w.bodies().iter().find(|b| b.class == ObjectClass::RedBird) {
                let from = last.unwrap_or(b.position);
                best = best.min(segment_distance(target, from, b.position));
                last = Some(b.position);
            }
        });
        misses.push(best);
    }
    PlannerTrial { target, two_roots, arcs: arcs.len(), misses }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_test_matches_exact_binomial_tails() {
        // Tails computed independently from binomial coefficients.
        assert!((sign_test(26, 13) - 0.026625957048963755).abs() < 1e-12);
        assert!((sign_test(15, 7) - 0.06690025329589844).abs() < 1e-12);
        assert_eq!(sign_test(5, 0), 0.03125);
        assert_eq!(sign_test(0, 4), 1.0);
        assert_eq!(sign_test(0, 0), 1.0);
    }
}
