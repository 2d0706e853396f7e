use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::reward::{RewardModel, SummaryFeaturizer};
use crate::prefs::dot;

/// An episodic decision problem: from each state either move to a successor
/// (reward 0) or terminate and collect the terminal reward.
pub trait EpisodicTask {
    type State: Clone;
    fn initial(&self) -> Self::State;
    /// Successor states reachable in one step.
    fn successors(&self, state: &Self::State) -> Vec<Self::State>;
    fn features(&self, state: &Self::State) -> Vec<f64>;
    fn terminal_reward(&self, state: &Self::State) -> f64;
    /// Whether stopping is allowed here.
    fn can_terminate(&self, _state: &Self::State) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyOptions {
    pub episodes: usize,
    /// Exploration rate of the first episode, decayed linearly to zero.
    pub epsilon0: f64,
    /// TD step size.
    pub eta: f64,
    /// Initial value of every weight; positive values explore optimistically.
    pub init: f64,
    pub seed: u64,
}

impl Default for PolicyOptions {
    fn default() -> Self {
        Self {
            episodes: 2000,
            epsilon0: 0.2,
            eta: 0.01,
            init: 0.0,
            seed: 0,
        }
    }
}

/// Linear state-value function `v(s) = theta . features(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub theta: Vec<f64>,
    pub epsilon0: f64,
    pub episodes: usize,
}

enum Choice<S> {
    Stop,
    Go(S),
}

impl Policy {
    pub fn value<T: EpisodicTask>(&self, task: &T, state: &T::State) -> f64 {
        dot(&self.theta, &task.features(state))
    }

    /// Stop when the terminal reward beats the best successor value; ties
    /// and empty successor lists stop. The first successor wins among equals.
    fn greedy<T: EpisodicTask>(&self, task: &T, state: &T::State) -> Choice<T::State> {
        let mut best: Option<(T::State, f64)> = None;
        for s in task.successors(state) {
            let v = self.value(task, &s);
            if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
                best = Some((s, v));
            }
        }
        match best {
            None => Choice::Stop,
            Some((s, _)) if !task.can_terminate(state) => Choice::Go(s),
            Some((s, v)) if v > task.terminal_reward(state) => Choice::Go(s),
            Some(_) => Choice::Stop,
        }
    }

    /// Deterministic greedy episode; returns the final state.
    pub fn rollout<T: EpisodicTask>(&self, task: &T) -> T::State {
        let mut s = task.initial();
        loop {
            match self.greedy(task, &s) {
                Choice::Stop => return s,
                Choice::Go(next) => s = next,
            }
        }
    }
}

/// Linear TD(0) with discount 1 and epsilon-greedy exploration.
pub fn learn_policy<T: EpisodicTask>(task: &T, opts: &PolicyOptions) -> Policy {
    let dim = task.features(&task.initial()).len();
    let mut policy = Policy {
        theta: vec![opts.init; dim],
        epsilon0: opts.epsilon0,
        episodes: opts.episodes,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for episode in 0..opts.episodes {
        let epsilon = opts.epsilon0 * (1.0 - episode as f64 / opts.episodes as f64);
        let mut s = task.initial();
        loop {
            let x = task.features(&s);
            let v = dot(&policy.theta, &x);
            let choice = if epsilon > 0.0 && rng.gen_bool(epsilon.min(1.0)) {
                let mut succ = task.successors(&s);
                let stop_ok = task.can_terminate(&s);
                let options = succ.len() + usize::from(stop_ok);
                if options == 0 {
                    Choice::Stop
                } else {
                    let k = rng.gen_range(0..options);
                    if k < succ.len() {
                        Choice::Go(succ.swap_remove(k))
                    } else {
                        Choice::Stop
                    }
                }
            } else {
                policy.greedy(task, &s)
            };
            let (target, next) = match choice {
                Choice::Stop => (task.terminal_reward(&s), None),
                Choice::Go(n) => (policy.value(task, &n), Some(n)),
            };
            let delta = target - v;
            for (t, xi) in policy.theta.iter_mut().zip(&x) {
                *t += opts.eta * delta * xi;
            }
            match next {
                Some(n) => s = n,
                None => break,
            }
        }
    }
    policy
}

/// Building a summary sentence by sentence under a word budget, scored at
/// the end by a reward model.
pub struct SummaryTask<'a> {
    pub featurizer: &'a SummaryFeaturizer<'a>,
    pub reward: &'a RewardModel,
    /// Sentences the agent may add.
    pub candidates: Vec<usize>,
}

impl<'a> SummaryTask<'a> {
    pub fn new(featurizer: &'a SummaryFeaturizer<'a>, reward: &'a RewardModel, candidates: Vec<usize>) -> Self {
        Self {
            featurizer,
            reward,
            candidates,
        }
    }

    /// Every sentence that fits the budget on its own.
    pub fn all_sentences(featurizer: &'a SummaryFeaturizer<'a>, reward: &'a RewardModel) -> Self {
        let budget = featurizer.budget();
        let candidates = featurizer
            .corpus()
            .sentences
            .iter()
            .filter(|s| s.length_words > 0 && s.length_words <= budget)
            .map(|s| s.id)
            .collect();
        Self::new(featurizer, reward, candidates)
    }
}

impl EpisodicTask for SummaryTask<'_> {
    type State = Vec<usize>;

    fn initial(&self) -> Vec<usize> {
        Vec::new()
    }

    fn successors(&self, state: &Vec<usize>) -> Vec<Vec<usize>> {
        let corpus = self.featurizer.corpus();
        let used = corpus.word_count(state);
        self.candidates
            .iter()
            .filter(|c| !state.contains(c) && used + corpus.sentences[**c].length_words <= self.featurizer.budget())
            .map(|&c| {
                let mut next = state.clone();
                let at = next.partition_point(|&i| i < c);
                next.insert(at, c);
                next
            })
            .collect()
    }

    fn features(&self, state: &Vec<usize>) -> Vec<f64> {
        self.featurizer.features(state)
    }

    fn terminal_reward(&self, state: &Vec<usize>) -> f64 {
        self.reward.value(&self.featurizer.features(state))
    }

    /// An episode ends only once no further candidate fits the budget.
    fn can_terminate(&self, state: &Vec<usize>) -> bool {
        !state.is_empty() && self.successors(state).is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// States in a line; each may step right, and stops are allowed only
    /// where `stops[s]` is set, collecting `rewards[s]`.
    pub(crate) struct Chain {
        pub rewards: Vec<f64>,
        pub stops: Vec<bool>,
    }

    impl EpisodicTask for Chain {
        type State = usize;
        fn initial(&self) -> usize {
            0
        }
        fn successors(&self, s: &usize) -> Vec<usize> {
            if s + 1 < self.rewards.len() {
                vec![s + 1]
            } else {
                vec![]
            }
        }
        fn features(&self, s: &usize) -> Vec<f64> {
            (0..self.rewards.len()).map(|i| f64::from(u8::from(i == *s))).collect()
        }
        fn terminal_reward(&self, s: &usize) -> f64 {
            self.rewards[*s]
        }
        fn can_terminate(&self, s: &usize) -> bool {
            self.stops[*s]
        }
    }

    fn value_iteration(chain: &Chain) -> Vec<f64> {
        let n = chain.rewards.len();
        let mut v = vec![0.0; n];
        for s in (0..n).rev() {
            let stop = if chain.stops[s] { chain.rewards[s] } else { f64::NEG_INFINITY };
            let go = if s + 1 < n { v[s + 1] } else { f64::NEG_INFINITY };
            v[s] = stop.max(go);
        }
        v
    }

    #[test]
    fn forced_chain_matches_value_iteration() {
        let chain = Chain {
            rewards: vec![0.0, 0.0, 0.7],
            stops: vec![false, false, true],
        };
        let p = learn_policy(&chain, &PolicyOptions { episodes: 10_000, ..Default::default() });
        let dp = value_iteration(&chain);
        for s in 0..3 {
            assert!((p.value(&chain, &s) - dp[s]).abs() < 1e-3);
        }
    }

    #[test]
    fn chain_with_choices_stops_at_best() {
        let chain = Chain {
            rewards: vec![0.2, 0.9, 0.4],
            stops: vec![true; 3],
        };
        let p = learn_policy(&chain, &PolicyOptions { episodes: 10_000, epsilon0: 0.3, seed: 4, ..Default::default() });
        let dp = value_iteration(&chain);
        assert_eq!(p.rollout(&chain), 1);
        for s in 0..3 {
            assert!((p.value(&chain, &s) - dp[s]).abs() < 0.02, "state {s}: {} vs {}", p.value(&chain, &s), dp[s]);
        }
    }
}
