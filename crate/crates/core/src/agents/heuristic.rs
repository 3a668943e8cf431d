//! Rule-based agent that scores a handful of physical strategies on the
//! symbolic frame and shoots the best one.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{arcs_or_max_range, pig_shooter_act, random_act, Agent, Observation};
use crate::catalog::{BirdType, ObjectClass, Power};
use crate::game::{planned_arc_length, Action};
use crate::math::Vec2;
use crate::perception::{ScreenMap, SymbolicFrame};
use crate::physics::shape::segment_distance;
use crate::physics::BodyId;
use crate::trajectory::{first_obstruction, ArcKind, ArcSolution};

/// Vertical gap under which two outlines count as touching.
const TOUCH: f64 = 0.15;
/// Height above the target at which the white bird lays its egg.
const EGG_LIFT: f64 = 4.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SupportNode {
    pub id: BodyId,
    pub class: ObjectClass,
    /// World-space outline.
    pub polygon: Vec<Vec2>,
    pub centroid: Vec2,
    pub mass: f64,
    pub round: bool,
    /// Indices of the nodes this one rests on.
    pub rests_on: Vec<usize>,
    /// Total mass of everything resting on this node, directly or not.
    pub load: f64,
}

impl SupportNode {
    pub fn top(&self) -> f64 {
        self.polygon.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.y))
    }

    pub fn bottom(&self) -> f64 {
        self.polygon.iter().fold(f64::INFINITY, |m, v| m.min(v.y))
    }

    pub fn x_extent(&self) -> (f64, f64) {
        self.polygon.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.x), hi.max(v.x)))
    }

    pub fn is_platform(&self) -> bool {
        self.class == ObjectClass::Platform
    }
}

/// Which block rests on which, read off the symbolic frame.
///
/// A node only ever rests on nodes whose centroid is lower, so the graph is
/// acyclic by construction; platforms rest on nothing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SupportGraph {
    pub nodes: Vec<SupportNode>,
}

fn density(class: ObjectClass) -> f64 {
    match class {
        ObjectClass::Ice => 0.7,
        ObjectClass::Stone => 2.5,
        ObjectClass::Platform => 0.0,
        _ => 1.0,
    }
}

fn polygon_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i].cross(poly[(i + 1) % n])).sum::<f64>().abs() * 0.5
}

fn polygon_distance(poly: &[Vec2], p: Vec2) -> f64 {
    if crate::perception::point_in_polygon(poly, p) {
        return 0.0;
    }
    let n = poly.len();
    (0..n).map(|i| segment_distance(p, poly[i], poly[(i + 1) % n])).fold(f64::INFINITY, f64::min)
}

fn segments_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn segment_hits_polygon(a: Vec2, b: Vec2, poly: &[Vec2]) -> bool {
    let n = poly.len();
    crate::perception::point_in_polygon(poly, a)
        || crate::perception::point_in_polygon(poly, b)
        || (0..n).any(|i| segments_cross(a, b, poly[i], poly[(i + 1) % n]))
}

/// `upper` has a low vertex touching `lower`, or `lower` has a high vertex
/// touching `upper`.
fn touches_from_above(upper: &SupportNode, lower: &SupportNode) -> bool {
    upper.polygon.iter().filter(|v| v.y <= upper.centroid.y).any(|v| polygon_distance(&lower.polygon, *v) < TOUCH)
        || lower
            .polygon
            .iter()
            .filter(|v| v.y >= lower.centroid.y)
            .any(|v| polygon_distance(&upper.polygon, *v) < TOUCH)
}

impl SupportGraph {
    pub fn from_frame(frame: &SymbolicFrame, map: &ScreenMap) -> SupportGraph {
        let mut nodes: Vec<SupportNode> = frame
            .objects
            .iter()
            .filter_map(|o| {
                let class = o.class()?;
                if class.is_bird() || class == ObjectClass::Slingshot || o.polygon.len() < 3 {
                    return None;
                }
                let polygon: Vec<Vec2> = o.polygon.iter().map(|p| map.to_world(*p)).collect();
                let n = polygon.len() as f64;
                let centroid = polygon.iter().fold(Vec2::ZERO, |acc, v| acc + *v) / n;
                Some(SupportNode {
                    id: o.id,
                    class,
                    mass: polygon_area(&polygon) * density(class),
                    round: polygon.len() > 6,
                    polygon,
                    centroid,
                    rests_on: Vec::new(),
                    load: 0.0,
                })
            })
            .collect();
        for i in 0..nodes.len() {
            if nodes[i].is_platform() {
                continue;
            }
            let rests: Vec<usize> = (0..nodes.len())
                .filter(|&j| {
                    j != i
                        && nodes[j].centroid.y < nodes[i].centroid.y - 1e-6
                        && touches_from_above(&nodes[i], &nodes[j])
                })
                .collect();
            nodes[i].rests_on = rests;
        }
        let mut g = SupportGraph { nodes };
        for i in 0..g.nodes.len() {
            let load = g.above(i).iter().map(|&j| g.nodes[j].mass).sum();
            g.nodes[i].load = load;
        }
        g
    }

    /// Every node that rests on `i`, directly or through others.
    pub fn above(&self, i: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = alloc::vec![i];
        while let Some(k) = stack.pop() {
            for (j, n) in self.nodes.iter().enumerate() {
                if n.rests_on.contains(&k) && out.insert(j) {
                    stack.push(j);
                }
            }
        }
        out
    }

    pub fn index_of(&self, id: BodyId) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Depth-first check that no chain of `rests_on` edges returns to its
    /// start.
    pub fn is_acyclic(&self) -> bool {
        let n = self.nodes.len();
        let mut state = alloc::vec![0u8; n];
        fn visit(g: &SupportGraph, i: usize, state: &mut [u8]) -> bool {
            match state[i] {
                1 => return false,
                2 => return true,
                _ => {}
            }
            state[i] = 1;
            for &j in &g.nodes[i].rests_on {
                if !visit(g, j, state) {
                    return false;
                }
            }
            state[i] = 2;
            true
        }
        (0..n).all(|i| visit(self, i, &mut state))
    }

    fn pigs(&self) -> impl Iterator<Item = (usize, &SupportNode)> {
        self.nodes.iter().enumerate().filter(|(_, n)| n.class == ObjectClass::Pig)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Unobstructed arc to a pig.
    Direct,
    /// Knock a round object down a clear path into a pig.
    Roll,
    /// Hit a block that holds up mass over or beside a pig.
    Topple,
    /// Remove the block that stops every arc to a pig.
    Clear,
    /// Nothing scored; shoot at a pig anyway.
    Fallback,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Direct => "direct",
            Strategy::Roll => "roll",
            Strategy::Topple => "topple",
            Strategy::Clear => "clear",
            Strategy::Fallback => "fallback",
        }
    }
}

/// Strategy subsets modelled on the rule families of well-known competition
/// agents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeuristicProfile {
    /// Every strategy.
    Full,
    /// Direct shots, round objects and obstacle clearing.
    Rolling,
    /// Direct shots and elevated round objects, preferring high arcs.
    HighRound,
    /// Direct shots, load-bearing blocks and protective blocks.
    Structural,
}

impl HeuristicProfile {
    pub fn name(self) -> &'static str {
        match self {
            HeuristicProfile::Full => "heuristic",
            HeuristicProfile::Rolling => "datalab",
            HeuristicProfile::HighRound => "eagle",
            HeuristicProfile::Structural => "bambirds",
        }
    }

    pub fn allows(self, s: Strategy) -> bool {
        match self {
            HeuristicProfile::Full => true,
            HeuristicProfile::Rolling => matches!(s, Strategy::Direct | Strategy::Roll | Strategy::Clear),
            HeuristicProfile::HighRound => matches!(s, Strategy::Direct | Strategy::Roll | Strategy::Topple),
            HeuristicProfile::Structural => matches!(s, Strategy::Direct | Strategy::Topple | Strategy::Clear),
        }
    }

    fn prefers_high(self) -> bool {
        self == HeuristicProfile::HighRound
    }
}

/// A scored way to spend the next bird.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub strategy: Strategy,
    pub score: f64,
    pub target: Vec2,
    /// Bodies the bird may touch first for the shot to count as on target.
    pub accept: Vec<BodyId>,
}

/// Scores every strategy the profile allows. Pure function of the frame's
/// geometry plus the obstruction sweeps of the planner.
pub fn candidates(graph: &SupportGraph, profile: HeuristicProfile) -> Vec<Candidate> {
    let mut out = Vec::new();
    let pigs: Vec<(usize, &SupportNode)> = graph.pigs().collect();
    for (k, (_, p)) in pigs.iter().enumerate() {
        out.push(Candidate {
            strategy: Strategy::Direct,
            score: 3.0 - 0.01 * k as f64,
            target: p.centroid,
            accept: alloc::vec![p.id],
        });
    }
    if profile.allows(Strategy::Roll) {
        for (i, r) in graph.nodes.iter().enumerate() {
            if !r.round || r.is_platform() || r.class == ObjectClass::Pig {
                continue;
            }
            let supports: Vec<BodyId> = r.rests_on.iter().map(|&j| graph.nodes[j].id).collect();
            for (_, p) in &pigs {
                let dx = p.centroid.x - r.centroid.x;
                if !(dx > 0.5 && dx < 30.0 && p.centroid.y < r.centroid.y + 0.5) {
                    continue;
                }
                let blocked = graph.nodes.iter().enumerate().any(|(j, n)| {
                    j != i
                        && n.id != p.id
                        && !n.is_platform()
                        && !supports.contains(&n.id)
                        && segment_hits_polygon(r.centroid, p.centroid, &n.polygon)
                });
                if blocked {
                    continue;
                }
                let mut score = 2.5 + 0.3 * r.mass / (r.mass + 5.0) - 0.005 * dx;
                if profile.prefers_high() {
                    score += 0.02 * (r.centroid.y - p.centroid.y);
                }
                out.push(Candidate { strategy: Strategy::Roll, score, target: r.centroid, accept: alloc::vec![r.id] });
            }
        }
    }
    if profile.allows(Strategy::Topple) {
        for (i, n) in graph.nodes.iter().enumerate() {
            if n.is_platform() || n.class == ObjectClass::Pig {
                continue;
            }
            let above = graph.above(i);
            let height = n.top() - n.bottom();
            let (x0, x1) = n.x_extent();
            let reach = (n.top() - graph_floor(graph, n)).max(height);
            let carries_pig = above.iter().any(|&j| graph.nodes[j].class == ObjectClass::Pig);
            let falls_on_pig = pigs.iter().any(|(_, p)| {
                let dx = p.centroid.x - x1;
                dx > -0.5 && dx < reach + 0.5 && p.centroid.y < n.top()
            }) && height > (x1 - x0) * 1.2;
            if !carries_pig && !falls_on_pig {
                continue;
            }
            let mut score = 1.0 + 0.6 * n.load / (n.load + 5.0);
            if carries_pig {
                score += 0.3;
            }
            let target = Vec2::new(n.centroid.x, n.centroid.y + 0.5 * (n.top() - n.centroid.y));
            let mut accept: Vec<BodyId> = above.iter().map(|&j| graph.nodes[j].id).collect();
            accept.push(n.id);
            out.push(Candidate { strategy: Strategy::Topple, score, target, accept });
        }
    }
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    out
}

/// Height of the highest platform directly under the node's centre.
fn graph_floor(graph: &SupportGraph, n: &SupportNode) -> f64 {
    graph
        .nodes
        .iter()
        .filter(|p| p.is_platform())
        .filter(|p| {
            let (lo, hi) = p.x_extent();
            (lo..=hi).contains(&n.centroid.x) && p.top() <= n.bottom() + TOUCH
        })
        .map(|p| p.top())
        .fold(f64::NEG_INFINITY, f64::max)
        .max(n.bottom() - 50.0)
}

/// Fraction of the planned path length at which a power should fire for a
/// shot aimed at `target`.
pub fn tap_for(bird: BirdType, arc: &ArcSolution, anchor: Vec2, target: Vec2, obs: &Observation<'_>) -> Option<f64> {
    let scale = match bird.power() {
        Power::None => return None,
        Power::Accelerate => 0.85,
        Power::Split3 => 0.75,
        Power::Explode => 0.97,
        Power::DropEgg => 1.0,
    };
    let world = obs.episode.world();
    let total = planned_arc_length(anchor, arc.velocity(), world.gravity(), &obs.bounds(), world.dt());
    if !(total > 0.0) {
        return Some(0.5);
    }
    let mut length = 0.0;
    for w in arc.predicted_path.windows(2) {
        length += w[0].distance(w[1]);
        if w[1].x >= target.x {
            break;
        }
    }
    Some((scale * length / total).clamp(0.05, 1.0))
}

pub struct HeuristicAgent {
    profile: HeuristicProfile,
    last: Option<Strategy>,
    fallback_rng: ChaCha8Rng,
}

impl HeuristicAgent {
    pub fn new(profile: HeuristicProfile) -> HeuristicAgent {
        HeuristicAgent { profile, last: None, fallback_rng: ChaCha8Rng::seed_from_u64(0) }
    }

    pub fn profile(&self) -> HeuristicProfile {
        self.profile
    }

    /// Strategy behind the most recent action.
    pub fn last_strategy(&self) -> Option<Strategy> {
        self.last
    }

    /// Chooses a strategy and the action that executes it.
    pub fn decide(&mut self, obs: &Observation<'_>) -> (Strategy, Action) {
        let map = obs.screen_map();
        let graph = SupportGraph::from_frame(obs.frame(), &map);
        let world = obs.episode.world();
        let anchor = obs.anchor();
        let bounds = obs.bounds();
        let bird = obs.bird();
        let radius = bird.radius();
        let mut cands = candidates(&graph, self.profile);
        if self.profile.allows(Strategy::Clear) {
            cands.extend(clear_candidates(&graph, obs));
            cands.sort_by(|a, b| b.score.total_cmp(&a.score));
        }
        for c in &cands {
            let aim = if bird.power() == Power::DropEgg { c.target + Vec2::new(0.0, EGG_LIFT) } else { c.target };
            let Ok(mut arcs) =
                crate::trajectory::solve_release(anchor, aim, crate::game::V_MAX, world.gravity(), &bounds, world.dt())
            else {
                continue;
            };
            if self.profile.prefers_high() {
                arcs.reverse();
            }
            for arc in &arcs {
                let hit = first_obstruction(anchor, arc, world, radius, &bounds);
                let on_target = match hit {
                    Some(id) => c.accept.contains(&id),
                    None => bird.power() == Power::DropEgg,
                };
                if on_target {
                    let action = match tap_for(bird, arc, anchor, aim, obs) {
                        Some(f) => Action::with_tap(arc.release, f),
                        None => Action::new(arc.release),
                    };
                    return (c.strategy, action);
                }
            }
        }
        self.fallback_rng = ChaCha8Rng::seed_from_u64(world.tick());
        let action =
            pig_shooter_act(obs, &mut self.fallback_rng).unwrap_or_else(|_| random_act(&mut self.fallback_rng, bird));
        let action = match (bird.has_power(), action.tap_fraction) {
            (true, None) => Action::with_tap(action.release, 0.9),
            _ => action,
        };
        (Strategy::Fallback, action)
    }
}

/// Blocks that sit first on every arc toward some pig.
fn clear_candidates(graph: &SupportGraph, obs: &Observation<'_>) -> Vec<Candidate> {
    let world = obs.episode.world();
    let anchor = obs.anchor();
    let bounds = obs.bounds();
    let radius = obs.bird().radius();
    let mut out = Vec::new();
    for (_, p) in graph.pigs() {
        let arcs = arcs_or_max_range(anchor, p.centroid, world.gravity(), &bounds, world.dt());
        let hits: Vec<Option<BodyId>> =
            arcs.iter().map(|a| first_obstruction(anchor, a, world, radius, &bounds)).collect();
        let blockers: Vec<usize> = hits
            .iter()
            .filter_map(|h| h.and_then(|id| graph.index_of(id)))
            .filter(|&j| {
                let n = &graph.nodes[j];
                !n.is_platform() && n.class != ObjectClass::Pig
            })
            .collect();
        if blockers.is_empty() {
            continue;
        }
        let all_same = blockers.len() == arcs.len() && blockers.iter().all(|&j| j == blockers[0]);
        let prefer = arcs.iter().position(|a| a.arc == ArcKind::Low).unwrap_or(0).min(blockers.len() - 1);
        let j = if all_same { blockers[0] } else { blockers[prefer] };
        let n = &graph.nodes[j];
        out.push(Candidate {
            strategy: Strategy::Clear,
            score: if all_same { 0.9 } else { 0.6 },
            target: n.centroid,
            accept: alloc::vec![n.id],
        });
    }
    out
}

impl Agent for HeuristicAgent {
    fn name(&self) -> String {
        self.profile.name().into()
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn begin_episode(&mut self, _seed: u64) {
        self.last = None;
    }

    fn act(&mut self, obs: &Observation<'_>) -> Action {
        let (s, a) = self.decide(obs);
        self.last = Some(s);
        a
    }

    fn last_decision(&self) -> Option<String> {
        self.last.map(|s| s.name().into())
    }
}
