use ndarray::{s, Array1, Array2, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};

/// One joint slot, agent-major in every vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub states: Vec<f64>,
    /// Actions actually played, as the critics see them, `K + 2` per agent.
    pub actions: Vec<f64>,
    pub local_rewards: Vec<f64>,
    /// `[CAM task, AoI task]` per agent.
    pub task_rewards: Vec<[f64; 2]>,
    pub global_reward: f64,
    pub next_states: Vec<f64>,
    /// Last slot of an episode; no bootstrapping past it.
    pub terminal: bool,
}

impl Transition {
    pub fn is_finite(&self) -> bool {
        self.states
            .iter()
            .chain(&self.actions)
            .chain(&self.local_rewards)
            .chain(self.task_rewards.iter().flatten())
            .chain(&self.next_states)
            .all(|v| v.is_finite())
            && self.global_reward.is_finite()
    }
}

/// Fixed-capacity ring of transitions; the oldest is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Stored transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// `size` distinct storage indices, uniformly at random.
    pub fn sample_indices<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Vec<usize>> {
        if size == 0 || size > self.items.len() {
            return Err(Error::InsufficientSamples {
                available: self.items.len(),
                requested: size,
            });
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), size).into_vec())
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.items.get(index)
    }

    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Minibatch> {
        let idx = self.sample_indices(size, rng)?;
        Ok(Minibatch::from_transitions(idx.iter().map(|&i| &self.items[i])))
    }
}

/// Row-stacked minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub local_rewards: Array2<f64>,
    pub task_cam_rewards: Array2<f64>,
    pub task_aoi_rewards: Array2<f64>,
    pub global_rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    /// 0 for terminal rows, 1 otherwise.
    pub not_done: Array1<f64>,
}

fn stack<'a>(rows: impl Iterator<Item = &'a [f64]>, n: usize, width: usize) -> Array2<f64> {
    let mut flat = Vec::with_capacity(n * width);
    for r in rows {
        flat.extend_from_slice(r);
    }
    Array2::from_shape_vec((n, width), flat).expect("transitions share one layout")
}

impl Minibatch {
    pub fn from_transitions<'a>(items: impl Iterator<Item = &'a Transition> + Clone) -> Self {
        let n = items.clone().count();
        let first = items.clone().next().expect("minibatch needs at least one transition");
        let agents = first.local_rewards.len();
        let task = |k: usize| {
            let flat: Vec<f64> = items
                .clone()
                .flat_map(|t| t.task_rewards.iter().map(move |r| r[k]))
                .collect();
            Array2::from_shape_vec((n, agents), flat).expect("transitions share one layout")
        };
        Minibatch {
            states: stack(items.clone().map(|t| t.states.as_slice()), n, first.states.len()),
            actions: stack(items.clone().map(|t| t.actions.as_slice()), n, first.actions.len()),
            local_rewards: stack(items.clone().map(|t| t.local_rewards.as_slice()), n, agents),
            task_cam_rewards: task(0),
            task_aoi_rewards: task(1),
            global_rewards: items.clone().map(|t| t.global_reward).collect(),
            next_states: stack(
                items.clone().map(|t| t.next_states.as_slice()),
                n,
                first.next_states.len(),
            ),
            not_done: items.map(|t| if t.terminal { 0.0 } else { 1.0 }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn agent_states(&self, agent: usize, obs_dim: usize) -> ArrayView2<'_, f64> {
        self.states.slice(s![.., agent * obs_dim..(agent + 1) * obs_dim])
    }

    pub fn agent_next_states(&self, agent: usize, obs_dim: usize) -> ArrayView2<'_, f64> {
        self.next_states.slice(s![.., agent * obs_dim..(agent + 1) * obs_dim])
    }

    pub fn agent_actions(&self, agent: usize, act_dim: usize) -> ArrayView2<'_, f64> {
        self.actions.slice(s![.., agent * act_dim..(agent + 1) * act_dim])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn transition(id: f64) -> Transition {
        Transition {
            states: vec![id, id + 0.5],
            actions: vec![-id],
            local_rewards: vec![id],
            task_rewards: vec![[id, 0.0]],
            global_reward: 2.0 * id,
            next_states: vec![id + 1.0, id + 1.5],
            terminal: false,
        }
    }

    #[test]
    fn evicts_oldest_when_full() {
        let mut buf = ReplayBuffer::new(50_000);
        for i in 0..50_001 {
            buf.push(transition(i as f64));
        }
        assert_eq!(buf.len(), 50_000);
        assert_eq!(buf.iter().next().unwrap().states[0], 1.0);
        assert_eq!(buf.iter().last().unwrap().states[0], 50_000.0);
        assert!(buf.iter().all(|t| t.states[0] != 0.0));
    }

    #[test]
    fn sampling_returns_only_stored_transitions() {
        let mut buf = ReplayBuffer::new(8);
        for i in 0..5 {
            buf.push(transition(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let b = buf.sample(1, &mut rng).unwrap();
            let id = b.states[[0, 0]];
            assert!((0.0..5.0).contains(&id) && id.fract() == 0.0);
            assert_eq!(b.global_rewards[0], 2.0 * id);
        }
    }

    #[test]
    fn empty_or_short_buffer_is_an_error() {
        let buf = ReplayBuffer::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            buf.sample(1, &mut rng),
            Err(Error::InsufficientSamples { .. })
        ));
        let mut buf = buf;
        buf.push(transition(0.0));
        assert!(buf.sample(2, &mut rng).is_err());
    }

    #[test]
    fn full_size_sample_is_a_permutation() {
        let mut buf = ReplayBuffer::new(32);
        for i in 0..20 {
            buf.push(transition(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut idx = buf.sample_indices(20, &mut rng).unwrap();
        idx.sort_unstable();
        assert_eq!(idx, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let mut buf = ReplayBuffer::new(100);
        for i in 0..100 {
            buf.push(transition(i as f64));
        }
        let a = buf.sample_indices(10, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = buf.sample_indices(10, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn minibatch_layout() {
        let items = [transition(1.0), transition(2.0)];
        let mut t = transition(3.0);
        t.terminal = true;
        let items: Vec<_> = items.into_iter().chain([t]).collect();
        let b = Minibatch::from_transitions(items.iter());
        assert_eq!(b.len(), 3);
        assert_eq!(b.states.dim(), (3, 2));
        assert_eq!(b.agent_states(0, 2).row(1).to_vec(), vec![2.0, 2.5]);
        assert_eq!(b.task_cam_rewards[[2, 0]], 3.0);
        assert_eq!(b.not_done.to_vec(), vec![1.0, 1.0, 0.0]);
    }
}
