//! Baseline agents: uniform random releases, the pig shooter, a heuristic
//! strategy agent and a tabular learner over a discretised action space.

mod heuristic;
mod learner;

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::{BirdType, ObjectClass};
use crate::game::{velocity_to_release, Action, Episode, EpisodeOutcome, EpisodeResult, GameError, Level, V_MAX};
use crate::math::{Aabb, Vec2};
use crate::perception::{symbolize, ScreenMap, SymbolicFrame, PX_PER_UNIT};
use crate::trajectory::{solve_release, ArcSolution};

pub use heuristic::{HeuristicAgent, HeuristicProfile, Strategy, SupportGraph, SupportNode};
pub use learner::{angle_of_action, DiscreteActionTable, LearnerAgent, LearnerConfig, ACTION_COUNT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error("no pig is visible")]
    NoPigVisible,
}

/// What an agent gets to see of the episode it plays.
///
/// The episode is borrowed immutably, so an agent can only change the world
/// through the actions it returns.
pub struct Observation<'a> {
    pub episode: &'a Episode,
    frame: core::cell::OnceCell<SymbolicFrame>,
}

impl<'a> Observation<'a> {
    pub fn new(episode: &'a Episode) -> Observation<'a> {
        Observation { episode, frame: core::cell::OnceCell::new() }
    }

    pub fn screen_map(&self) -> ScreenMap {
        ScreenMap::new(&self.episode.bounds())
    }

    /// Symbolic frame of the current world, computed once.
    pub fn frame(&self) -> &SymbolicFrame {
        self.frame.get_or_init(|| symbolize(self.episode.world(), &self.screen_map()))
    }

    pub fn bird(&self) -> BirdType {
        self.episode.next_bird().unwrap_or(BirdType::Red)
    }

    pub fn anchor(&self) -> Vec2 {
        self.episode.anchor()
    }

    pub fn bounds(&self) -> Aabb {
        self.episode.bounds()
    }
}

/// The contract shared by the evaluation harness and the server.
pub trait Agent: Send {
    fn name(&self) -> String;
    /// True when the agent's actions depend on the observation alone.
    fn is_deterministic(&self) -> bool;
    /// Called before each episode with that attempt's seed.
    fn begin_episode(&mut self, seed: u64);
    fn act(&mut self, obs: &Observation<'_>) -> Action;
    /// Called once the episode has ended.
    fn end_episode(&mut self, _passed: bool) {}
    /// Switches between training (exploring, updating) and testing.
    fn set_training(&mut self, _training: bool) {}
    /// Short description of why the last action was chosen, for logs.
    fn last_decision(&self) -> Option<String> {
        None
    }
}

pub const RANDOM_X_PX: (f64, f64) = (-100.0, -10.0);
pub const RANDOM_Y_PX: (f64, f64) = (-100.0, 100.0);
pub const RANDOM_TAP: (f64, f64) = (0.5, 0.8);

/// Release offset for a screen-pixel drag relative to the slingshot. Screen
/// y grows downward.
pub fn pixels_to_release(px: f64, py: f64) -> Vec2 {
    Vec2::new(px / PX_PER_UNIT, -py / PX_PER_UNIT)
}

/// A uniformly random release point, with a random tap when the bird has a
/// power.
pub fn random_act(rng: &mut impl Rng, bird: BirdType) -> Action {
    let px = rng.random_range(RANDOM_X_PX.0..=RANDOM_X_PX.1);
    let py = rng.random_range(RANDOM_Y_PX.0..=RANDOM_Y_PX.1);
    let release = pixels_to_release(px, py);
    if bird.has_power() {
        Action::with_tap(release, rng.random_range(RANDOM_TAP.0..=RANDOM_TAP.1))
    } else {
        Action::new(release)
    }
}

/// Centroids of the visible pigs in world coordinates.
pub fn pig_targets(frame: &SymbolicFrame, map: &ScreenMap) -> Vec<Vec2> {
    frame.objects_of(ObjectClass::Pig).map(|o| map.to_world(o.centroid())).collect()
}

/// Full-speed arcs through `target`; when none exists the 45 degree
/// maximum-range arc is used, which falls short along the same line.
pub fn arcs_or_max_range(anchor: Vec2, target: Vec2, gravity: Vec2, bounds: &Aabb, dt: f64) -> Vec<ArcSolution> {
    match solve_release(anchor, target, V_MAX, gravity, bounds, dt) {
        Ok(arcs) => arcs,
        Err(_) => {
            let dir = if target.x >= anchor.x { 1.0 } else { -1.0 };
            let theta = if dir > 0.0 { core::f64::consts::FRAC_PI_4 } else { 3.0 * core::f64::consts::FRAC_PI_4 };
            let v = Vec2::from_angle(theta) * V_MAX;
            alloc::vec![ArcSolution {
                release: velocity_to_release(v),
                arc: crate::trajectory::ArcKind::Low,
                launch_angle: theta,
                speed: V_MAX,
                time_to_target: 0.0,
                predicted_path: crate::trajectory::predicted_path(anchor, v, gravity, bounds, dt),
                first_obstruction: None,
            }]
        }
    }
}

/// Picks a visible pig and one of its arcs uniformly at random.
pub fn pig_shooter_act(obs: &Observation<'_>, rng: &mut impl Rng) -> Result<Action, AgentError> {
    let map = obs.screen_map();
    let pigs = pig_targets(obs.frame(), &map);
    if pigs.is_empty() {
        return Err(AgentError::NoPigVisible);
    }
    let target = pigs[rng.random_range(0..pigs.len())];
    let world = obs.episode.world();
    let arcs = arcs_or_max_range(obs.anchor(), target, world.gravity(), &obs.bounds(), world.dt());
    let arc = &arcs[rng.random_range(0..arcs.len())];
    Ok(Action::new(arc.release))
}

fn attempt_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub struct RandomAgent {
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new() -> RandomAgent {
        RandomAgent { rng: attempt_rng(0) }
    }
}

impl Default for RandomAgent {
    fn default() -> Self {
        RandomAgent::new()
    }
}

impl Agent for RandomAgent {
    fn name(&self) -> String {
        "random".into()
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn begin_episode(&mut self, seed: u64) {
        self.rng = attempt_rng(seed);
    }

    fn act(&mut self, obs: &Observation<'_>) -> Action {
        random_act(&mut self.rng, obs.bird())
    }
}

pub struct PigShooterAgent {
    rng: ChaCha8Rng,
}

impl PigShooterAgent {
    pub fn new() -> PigShooterAgent {
        PigShooterAgent { rng: attempt_rng(0) }
    }
}

impl Default for PigShooterAgent {
    fn default() -> Self {
        PigShooterAgent::new()
    }
}

impl Agent for PigShooterAgent {
    fn name(&self) -> String {
        "pig_shooter".into()
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn begin_episode(&mut self, seed: u64) {
        self.rng = attempt_rng(seed);
    }

    fn act(&mut self, obs: &Observation<'_>) -> Action {
        pig_shooter_act(obs, &mut self.rng).unwrap_or_else(|_| random_act(&mut self.rng, obs.bird()))
    }
}

/// A finished episode with the agent's reason for each shot.
#[derive(Clone, Debug, PartialEq)]
pub struct PlayedEpisode {
    pub outcome: EpisodeOutcome,
    pub decisions: Vec<String>,
}

/// Plays `level` to the end with `agent`, seeded for this attempt. A shot
/// the game refuses ends the episode as failed.
pub fn play_episode(agent: &mut dyn Agent, level: &Level, seed: u64) -> Result<PlayedEpisode, GameError> {
    let mut ep = Episode::new(level)?;
    agent.begin_episode(seed);
    let mut decisions = Vec::new();
    while ep.result() == EpisodeResult::Ongoing {
        let action = {
            let obs = Observation::new(&ep);
            agent.act(&obs)
        };
        decisions.push(agent.last_decision().unwrap_or_default());
        if ep.launch(action).is_err() {
            break;
        }
    }
    let mut outcome = ep.outcome().clone();
    outcome.passed = ep.result() == EpisodeResult::Passed;
    agent.end_episode(outcome.passed);
    Ok(PlayedEpisode { outcome, decisions })
}

/// Names accepted by [`agent_by_name`].
pub const AGENT_NAMES: [&str; 7] = ["random", "pig_shooter", "heuristic", "datalab", "eagle", "bambirds", "learner"];

/// Builds an in-process agent from its command-line name.
pub fn agent_by_name(name: &str) -> Option<alloc::boxed::Box<dyn Agent>> {
    use alloc::boxed::Box;
    Some(match name {
        "random" => Box::new(RandomAgent::new()),
        "pig_shooter" => Box::new(PigShooterAgent::new()),
        "heuristic" => Box::new(HeuristicAgent::new(HeuristicProfile::Full)),
        "datalab" => Box::new(HeuristicAgent::new(HeuristicProfile::Rolling)),
        "eagle" => Box::new(HeuristicAgent::new(HeuristicProfile::HighRound)),
        "bambirds" => Box::new(HeuristicAgent::new(HeuristicProfile::Structural)),
        "learner" => Box::new(LearnerAgent::new(LearnerConfig::default())),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn random_draws_stay_in_the_pixel_box() {
        let mut rng = stream_rng("random", 1, 0);
        for _ in 0..10_000 {
            let a = random_act(&mut rng, BirdType::Black);
            let px = a.release.x * PX_PER_UNIT;
            let py = -a.release.y * PX_PER_UNIT;
            assert!((-100.0 - 1e-9..=-10.0 + 1e-9).contains(&px));
            assert!((-100.0 - 1e-9..=100.0 + 1e-9).contains(&py));
            let tap = a.tap_fraction.unwrap();
            assert!((0.5..=0.8).contains(&tap));
        }
    }

    #[test]
    fn red_bird_gets_no_tap() {
        let mut rng = stream_rng("random", 2, 0);
        assert!((0..100).all(|_| random_act(&mut rng, BirdType::Red).tap_fraction.is_none()));
    }

    #[test]
    fn fixed_seed_repeats_the_draws() {
        let mut a = stream_rng("random", 3, 0);
        let mut b = stream_rng("random", 3, 0);
        for _ in 0..50 {
            assert_eq!(random_act(&mut a, BirdType::Blue), random_act(&mut b, BirdType::Blue));
        }
    }

    #[test]
    fn every_name_builds_an_agent() {
        for n in AGENT_NAMES {
            assert_eq!(agent_by_name(n).unwrap().name(), n);
        }
        assert!(agent_by_name("nobody").is_none());
    }
}
