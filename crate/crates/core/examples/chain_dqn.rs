//! Trains the DQN on a four-state chain and compares the learned Q-values
//! with value iteration.

use warehouse_orch::dqn::{argmax, train_dqn, Environment, Hyperparams, QNetwork, Transition};
use warehouse_orch::encode::Observation;
use warehouse_orch::error::SimError;
use warehouse_orch::rng::stream_rng;

/// States 0..=3. Right from 2 reaches the goal (reward 1); left from 0
/// takes a small exit (reward 0.5). Both end the episode.
struct Chain {
    state: usize,
}

fn one_hot(s: usize) -> Observation {
    Observation::dense_only((0..4).map(|i| if i == s { 1.0 } else { 0.0 }).collect())
}

impl Environment for Chain {
    fn n_actions(&self) -> usize {
        2
    }
    fn reset(&mut self, episode: u64) -> Result<Observation, SimError> {
        self.state = (episode % 3) as usize;
        Ok(one_hot(self.state))
    }
    fn step(&mut self, action: usize) -> Result<Transition, SimError> {
        let (reward, done) = match (action, self.state) {
            (0, 0) => (0.5, true),
            (0, s) => {
                self.state = s - 1;
                (0.0, false)
            }
            (_, 2) => {
                self.state = 3;
                (1.0, true)
            }
            (_, s) => {
                self.state = s + 1;
                (0.0, false)
            }
        };
        Ok(Transition { observation: one_hot(self.state), reward, done, elapsed: 1.0 })
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let hp = Hyperparams {
        gamma: 0.9,
        learning_rate: 0.01,
        train_steps: 20_000,
        epsilon_decay_steps: 5_000,
        epsilon_end: 0.3,
        batch_size: 32,
        hidden_layers: 2,
        hidden_width: 32,
        target_sync_every: 200,
        ..Hyperparams::default()
    };
    let init = QNetwork::new(0, 0, 4, 2, &hp, &mut stream_rng(1, "chain-init"));
    let (net, log) = train_dqn(&mut Chain { state: 0 }, init, &hp, 1)?;
    println!("{} steps, {} episodes, {} target syncs", log.steps, log.episode_returns.len(), log.target_syncs);
    // Optimal Q for gamma 0.9, worked out by hand.
    let exact = [[0.5, 0.81], [0.729, 0.9], [0.81, 1.0]];
    for (s, row) in exact.iter().enumerate() {
        let q = net.q_values(&one_hot(s))?;
        println!("state {s}: learned [{:.3}, {:.3}]  exact [{:.3}, {:.3}]  greedy {}", q[0], q[1], row[0], row[1], argmax(&q));
    }
    Ok(())
}
