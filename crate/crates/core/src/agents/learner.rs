//! Tabular learner over a fixed set of full-stretch release angles.
//!
//! The state key is a binarised 15 x 20 pooling of the observation tensor.
//! A key never seen in training is answered by the stored key nearest in
//! Hamming distance, so what the table learns carries over to levels that
//! look alike.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Agent, Observation};
use crate::game::Action;
use crate::perception::encode_tensor;
use crate::rng::hash_words;
use crate::trajectory::release_for_angle;

pub const ACTION_COUNT: usize = 180;
pub const POOL_ROWS: usize = 15;
pub const POOL_COLS: usize = 20;
/// Tap used for every powered bird, as a fraction of the planned path.
pub const LEARNER_TAP: f64 = 0.75;

/// Launch angle of action `k`: one degree steps from -89 to +90 degrees.
pub fn angle_of_action(k: usize) -> f64 {
    (k as f64 - 89.0).to_radians()
}

/// Pooled occupancy bits of the observation; the exact key is their hash.
pub type StateBits = Vec<u64>;

pub fn state_bits(obs: &Observation<'_>) -> StateBits {
    let pooled = match encode_tensor(obs.frame()) {
        Ok(t) => t.pooled(POOL_ROWS, POOL_COLS),
        Err(_) => Vec::new(),
    };
    let mut bits = alloc::vec![0u64; pooled.len().div_ceil(64)];
    for (i, v) in pooled.iter().enumerate() {
        if *v > 0.0 {
            bits[i / 64] |= 1 << (i % 64);
        }
    }
    bits
}

fn hamming(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum::<u32>() + a.len().abs_diff(b.len()) as u32 * 64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub bits: StateBits,
    pub reward_sum: Vec<f64>,
    pub visits: Vec<u32>,
}

impl TableRow {
    fn new(bits: StateBits) -> TableRow {
        TableRow { bits, reward_sum: alloc::vec![0.0; ACTION_COUNT], visits: alloc::vec![0; ACTION_COUNT] }
    }

    /// Mean terminal reward of action `a`, `None` if never tried.
    pub fn value(&self, a: usize) -> Option<f64> {
        (self.visits[a] > 0).then(|| self.reward_sum[a] / self.visits[a] as f64)
    }
}

/// Value estimates for the 180 actions in every state seen so far.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscreteActionTable {
    rows: Vec<TableRow>,
    #[serde(skip)]
    index: BTreeMap<StateBits, usize>,
}

impl DiscreteActionTable {
    pub fn new() -> DiscreteActionTable {
        DiscreteActionTable::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    fn rebuild_index(&mut self) {
        if self.index.len() != self.rows.len() {
            self.index = self.rows.iter().enumerate().map(|(i, r)| (r.bits.clone(), i)).collect();
        }
    }

    /// Row for `bits`, or the nearest stored row.
    pub fn lookup(&mut self, bits: &StateBits) -> Option<&TableRow> {
        self.rebuild_index();
        if let Some(&i) = self.index.get(bits) {
            return Some(&self.rows[i]);
        }
        self.rows.iter().min_by_key(|r| hamming(&r.bits, bits))
    }

    /// Averages `reward` into the estimate of `(bits, action)`.
    pub fn update(&mut self, bits: &StateBits, action: usize, reward: f64) {
        self.rebuild_index();
        let i = match self.index.get(bits) {
            Some(&i) => i,
            None => {
                self.rows.push(TableRow::new(bits.clone()));
                self.index.insert(bits.clone(), self.rows.len() - 1);
                self.rows.len() - 1
            }
        };
        self.rows[i].reward_sum[action] += reward;
        self.rows[i].visits[action] += 1;
    }

    /// Best known action for `bits`: the exact row if stored, otherwise a
    /// blend of the `k` nearest rows. Estimates are smoothed over
    /// `spread` neighbouring angles on each side. Ties break on a hash of
    /// the state so the choice is a pure function of the table and the key.
    pub fn greedy(&mut self, bits: &StateBits, k: usize, spread: usize) -> Option<usize> {
        self.rebuild_index();
        if self.rows.is_empty() {
            return None;
        }
        let rows: Vec<(u32, usize)> = match self.index.get(bits) {
            Some(&i) => alloc::vec![(0, i)],
            None => {
                let mut by_distance: Vec<(u32, usize)> =
                    self.rows.iter().enumerate().map(|(i, r)| (hamming(&r.bits, bits), i)).collect();
                by_distance.sort_unstable();
                by_distance.truncate(k.max(1));
                by_distance
            }
        };
        let nearest = rows[0].0 as f64;
        let salt = hash_words(bits);
        let mut best: Option<(f64, u64, usize)> = None;
        for a in 0..ACTION_COUNT {
            let (mut num, mut den) = (0.0, 0.0);
            for &(d, i) in &rows {
                let w_row = 1.0 / (1.0 + d as f64 - nearest);
                let lo = a.saturating_sub(spread);
                let hi = (a + spread).min(ACTION_COUNT - 1);
                for b in lo..=hi {
                    if let Some(v) = self.rows[i].value(b) {
                        let w = w_row / (1 + a.abs_diff(b)) as f64;
                        num += w * v;
                        den += w;
                    }
                }
            }
            if den == 0.0 {
                continue;
            }
            let v = num / den;
            let tie = hash_words(&[salt, a as u64]);
            if best.is_none_or(|(bv, bt, _)| v > bv || (v == bv && tie > bt)) {
                best = Some((v, tie, a));
            }
        }
        best.filter(|(v, _, _)| *v > 0.0).map(|(_, _, a)| a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Exploration rate at the start of training.
    pub epsilon_start: f64,
    /// Exploration rate after `decay_episodes` training episodes.
    pub epsilon_end: f64,
    pub decay_episodes: u32,
    /// Exploration rate while testing.
    pub epsilon_test: f64,
    /// Training episodes played per training task.
    pub episodes_per_task: u32,
    /// Stored states blended when the current one was never seen.
    pub neighbours: usize,
    /// Neighbouring angles on each side that share an estimate.
    pub angle_spread: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            epsilon_start: 1.0,
            epsilon_end: 0.2,
            decay_episodes: 2000,
            epsilon_test: 0.0,
            episodes_per_task: 20,
            neighbours: 3,
            angle_spread: 1,
        }
    }
}

pub struct LearnerAgent {
    config: LearnerConfig,
    table: DiscreteActionTable,
    training: bool,
    episodes: u32,
    rng: ChaCha8Rng,
    pending: Vec<(StateBits, usize)>,
}

impl LearnerAgent {
    pub fn new(config: LearnerConfig) -> LearnerAgent {
        LearnerAgent {
            config,
            table: DiscreteActionTable::new(),
            training: false,
            episodes: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
            pending: Vec::new(),
        }
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn table(&self) -> &DiscreteActionTable {
        &self.table
    }

    pub fn with_table(mut self, table: DiscreteActionTable) -> LearnerAgent {
        self.table = table;
        self
    }

    pub fn epsilon(&self) -> f64 {
        if !self.training {
            return self.config.epsilon_test;
        }
        let c = &self.config;
        let f = (self.episodes as f64 / c.decay_episodes.max(1) as f64).min(1.0);
        c.epsilon_start + (c.epsilon_end - c.epsilon_start) * f
    }

    /// Index of the action to play for `bits`.
    pub fn choose(&mut self, bits: &StateBits) -> usize {
        let eps = self.epsilon();
        if eps > 0.0 && self.rng.random::<f64>() < eps {
            return self.rng.random_range(0..ACTION_COUNT);
        }
        match self.table.greedy(bits, self.config.neighbours, self.config.angle_spread) {
            Some(a) => a,
            None => self.rng.random_range(0..ACTION_COUNT),
        }
    }
}

impl Agent for LearnerAgent {
    fn name(&self) -> String {
        "learner".into()
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn begin_episode(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.pending.clear();
    }

    fn act(&mut self, obs: &Observation<'_>) -> Action {
        let bits = state_bits(obs);
        let a = self.choose(&bits);
        self.pending.push((bits, a));
        let release = release_for_angle(angle_of_action(a));
        if obs.bird().has_power() {
            Action::with_tap(release, LEARNER_TAP)
        } else {
            Action::new(release)
        }
    }

    fn end_episode(&mut self, passed: bool) {
        if self.training {
            let reward = if passed { 1.0 } else { 0.0 };
            for (bits, a) in core::mem::take(&mut self.pending) {
                self.table.update(&bits, a, reward);
            }
            self.episodes += 1;
        }
        self.pending.clear();
    }

    fn set_training(&mut self, training: bool) {
        self.training = training;
    }

    fn last_decision(&self) -> Option<String> {
        self.pending.last().map(|(_, a)| alloc::format!("angle {}", *a as i64 - 89))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_180_actions_spanning_the_sector() {
        assert_eq!(ACTION_COUNT, 180);
        assert!((angle_of_action(0).to_degrees() + 89.0).abs() < 1e-9);
        assert!((angle_of_action(179).to_degrees() - 90.0).abs() < 1e-9);
    }

    #[test]
    fn averages_stay_in_unit_interval() {
        let mut t = DiscreteActionTable::new();
        let key = alloc::vec![1u64, 2];
        for k in 0..10 {
            t.update(&key, 7, (k % 2) as f64);
        }
        let v = t.lookup(&key).unwrap().value(7).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        assert_eq!(t.greedy(&key, 1, 0), Some(7));
    }

    #[test]
    fn unseen_key_uses_nearest_row() {
        let mut t = DiscreteActionTable::new();
        t.update(&alloc::vec![0b1111], 3, 1.0);
        t.update(&alloc::vec![0b1111_0000_0000], 9, 1.0);
        assert_eq!(t.greedy(&alloc::vec![0b0111], 1, 0), Some(3));
        assert_eq!(t.greedy(&alloc::vec![0b0111_0000_0000], 1, 0), Some(9));
    }

    #[test]
    fn untrained_full_exploration_is_uniform() {
        let mut agent = LearnerAgent::new(LearnerConfig { epsilon_start: 1.0, ..LearnerConfig::default() });
        agent.set_training(true);
        let mut counts = [0u32; ACTION_COUNT];
        let key = alloc::vec![0u64];
        for _ in 0..180_000 {
            counts[agent.choose(&key)] += 1;
        }
        // 1000 expected per bin; six standard deviations either side.
        assert!(counts.iter().all(|&c| (810..=1190).contains(&c)));
    }
}
