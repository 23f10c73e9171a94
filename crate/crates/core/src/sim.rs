//! The repeated game: `T` synchronous rounds of choose, pay, learn.
//!
//! Every round all agents choose from their pre-round q-tables, route costs are
//! computed once from the resulting flows, then every agent learns. A run is a
//! pure function of its [`SimConfig`].

use rayon::prelude::*;
use thiserror::Error;

use crate::game::{tally, Action, FlowCounts, GameSpec};
use crate::learner::{Agent, AgentParams, InitMode, MonitoringFeedback, ParamError};
use crate::rng::{agent_rng, child_seed};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("horizon must be at least 1 round")]
    EmptyHorizon,
    #[error("{got} parameter sets supplied for {expected} agents")]
    ParamCount { expected: usize, got: usize },
    #[error("agent {index}: {source}")]
    Param {
        index: usize,
        #[source]
        source: ParamError,
    },
    #[error("agent index {index} out of range for {n} agents")]
    AgentIndex { index: usize, n: usize },
    #[error("batch needs at least one repetition")]
    NoRepetitions,
}

/// Everything needed to run one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub spec: GameSpec,
    pub horizon: usize,
    /// One entry per agent.
    pub params: Vec<AgentParams>,
    pub init: InitMode,
    /// Root of the per-agent streams. In a batch this is the child seed of
    /// the repetition; [`run_batch`] treats it as the master seed.
    pub seed: u64,
    pub feedback: MonitoringFeedback,
    /// Keep the full `T x n` matrix of realized costs.
    pub record_agent_costs: bool,
}

impl SimConfig {
    pub fn homogeneous(
        spec: GameSpec,
        horizon: usize,
        params: AgentParams,
        init: InitMode,
        seed: u64,
    ) -> Self {
        SimConfig {
            spec,
            horizon,
            params: vec![params; spec.players()],
            init,
            seed,
            feedback: MonitoringFeedback::default(),
            record_agent_costs: false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.horizon == 0 {
            return Err(SimError::EmptyHorizon);
        }
        if self.params.len() != self.spec.players() {
            return Err(SimError::ParamCount {
                expected: self.spec.players(),
                got: self.params.len(),
            });
        }
        // Parameters are validated on construction; re-check in case a caller
        // assembled them some other way.
        for (index, p) in self.params.iter().enumerate() {
            AgentParams::new(p.alpha(), p.beta(), p.epsilon())
                .map_err(|source| SimError::Param { index, source })?;
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SimConfig {
            seed,
            ..self.clone()
        }
    }
}

/// Shared settings of a family of runs that differ only in agent parameters
/// and seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseConfig {
    pub spec: GameSpec,
    pub horizon: usize,
    pub init: InitMode,
    pub master_seed: u64,
    pub feedback: MonitoringFeedback,
    /// Values of the parameters a sweep does not vary.
    pub params: AgentParams,
}

impl BaseConfig {
    pub fn config(&self, params: Vec<AgentParams>, seed: u64) -> SimConfig {
        SimConfig {
            spec: self.spec,
            horizon: self.horizon,
            params,
            init: self.init,
            seed,
            feedback: self.feedback,
            record_agent_costs: false,
        }
    }

    /// All agents share `params`; seeded with the master seed.
    pub fn homogeneous(&self, params: AgentParams) -> SimConfig {
        self.config(vec![params; self.spec.players()], self.master_seed)
    }
}

/// Recorded output of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n: usize,
    /// Route flows after each round.
    pub counts: Vec<FlowCounts>,
    /// `C_t`, the mean realized cost of each round.
    pub system_cost: Vec<f64>,
    /// Sum over rounds of each agent's realized cost.
    pub agent_cost_sum: Vec<f64>,
    /// Row-major `T x n` realized costs, when requested.
    pub agent_costs: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.system_cost.len()
    }

    pub fn players(&self) -> usize {
        self.n
    }

    /// `<C>`: mean of the system-cost series.
    pub fn time_averaged_cost(&self) -> f64 {
        self.system_cost.iter().sum::<f64>() / self.horizon() as f64
    }

    /// `<C_j>`: agent `j`'s mean realized cost.
    pub fn agent_time_averaged_cost(&self, j: usize) -> Result<f64, SimError> {
        self.agent_cost_sum
            .get(j)
            .map(|s| s / self.horizon() as f64)
            .ok_or(SimError::AgentIndex {
                index: j,
                n: self.n,
            })
    }

    /// Realized costs of round `t` (0-based), if they were recorded.
    pub fn round_costs(&self, t: usize) -> Option<&[f64]> {
        self.agent_costs
            .as_ref()
            .and_then(|m| m.get(t * self.n..(t + 1) * self.n))
    }
}

/// Runs one simulation. Agent `i` draws from stream `i` of `config.seed`,
/// starting with its q-table initialization.
pub fn run_simulation(config: &SimConfig) -> Result<Trajectory, SimError> {
    config.validate()?;
    let agents = config
        .params
        .iter()
        .enumerate()
        .map(|(i, &p)| Agent::new(p, config.init, agent_rng(config.seed, i)))
        .collect();
    Ok(play(
        config.spec,
        agents,
        config.horizon,
        config.feedback,
        config.record_agent_costs,
    ))
}

/// Plays `horizon` rounds with explicitly constructed agents.
pub fn play(
    spec: GameSpec,
    mut agents: Vec<Agent>,
    horizon: usize,
    feedback: MonitoringFeedback,
    record_agent_costs: bool,
) -> Trajectory {
    let n = spec.players();
    assert_eq!(agents.len(), n, "one agent per player");

    let mut actions = vec![Action::Cross; n];
    let mut counts = Vec::with_capacity(horizon);
    let mut system_cost = Vec::with_capacity(horizon);
    let mut agent_cost_sum = vec![0.0; n];
    let mut agent_costs = record_agent_costs.then(|| Vec::with_capacity(horizon * n));

    for _ in 0..horizon {
        for (slot, agent) in actions.iter_mut().zip(agents.iter_mut()) {
            *slot = agent.act();
        }
        let flows = tally(&actions);
        let route = flows.route_costs(n);

        for ((agent, &a), sum) in agents.iter_mut().zip(&actions).zip(&mut agent_cost_sum) {
            agent.learn(a, &route, feedback);
            *sum += route[a.index()];
        }
        if let Some(m) = agent_costs.as_mut() {
            m.extend(actions.iter().map(|a| route[a.index()]));
        }

        counts.push(flows);
        system_cost.push(flows.mean_cost(n));
    }

    Trajectory {
        n,
        counts,
        system_cost,
        agent_cost_sum,
        agent_costs,
    }
}

/// One repetition of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct RepRow<R> {
    pub rep: usize,
    pub seed: u64,
    pub params: Vec<AgentParams>,
    pub metrics: R,
}

/// Runs `reps` repetitions of `template`, repetition `k` seeded with
/// `child_seed(template.seed, k)`, and extracts metrics from each trajectory.
///
/// Repetitions run on the current rayon pool; rows come back in repetition
/// order regardless of scheduling.
pub fn run_batch<R, F>(
    template: &SimConfig,
    reps: usize,
    extract: F,
) -> Result<Vec<RepRow<R>>, SimError>
where
    R: Send,
    F: Fn(&Trajectory) -> R + Sync,
{
    if reps == 0 {
        return Err(SimError::NoRepetitions);
    }
    template.validate()?;
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let seed = child_seed(template.seed, rep as u64);
            let traj = run_simulation(&template.with_seed(seed))?;
            Ok(RepRow {
                rep,
                seed,
                params: template.params.clone(),
                metrics: extract(&traj),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::QTable;

    fn config(
        n: usize,
        horizon: usize,
        alpha: f64,
        beta: f64,
        eps: f64,
        init: InitMode,
    ) -> SimConfig {
        SimConfig::homogeneous(
            GameSpec::new(n).unwrap(),
            horizon,
            AgentParams::new(alpha, beta, eps).unwrap(),
            init,
            42,
        )
    }

    #[test]
    fn nash_lock_in_without_exploration() {
        for alpha in [0.1, 0.5, 1.0] {
            let traj =
                run_simulation(&config(100, 500, alpha, 0.0, 0.0, InitMode::NashEq)).unwrap();
            assert!(traj.system_cost.iter().all(|&c| c == 2.0));
            assert!(traj.counts.iter().all(|f| f.cross == 100));
            assert_eq!(traj.time_averaged_cost(), 2.0);
            for j in 0..100 {
                assert_eq!(traj.agent_time_averaged_cost(j).unwrap(), 2.0);
            }
        }
    }

    #[test]
    fn two_player_single_round() {
        let spec = GameSpec::new(2).unwrap();
        let p = AgentParams::new(0.5, 0.0, 0.0).unwrap();
        let agents = vec![
            Agent::with_qtable(p, QTable([1.0, 2.0, 2.0]), agent_rng(0, 0)),
            Agent::with_qtable(p, QTable([2.0, 1.0, 2.0]), agent_rng(0, 1)),
        ];
        let traj = play(spec, agents, 1, MonitoringFeedback::RouteCost, false);
        assert_eq!(traj.counts[0], FlowCounts::new(1, 1, 0));
        assert_eq!(traj.agent_time_averaged_cost(0).unwrap(), 1.5);
        assert_eq!(traj.agent_time_averaged_cost(1).unwrap(), 1.5);
        assert!(traj.agent_time_averaged_cost(2).is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = config(4, 10, 0.5, 0.0, 0.1, InitMode::Random);
        cfg.params.pop();
        assert!(matches!(
            run_simulation(&cfg),
            Err(SimError::ParamCount { .. })
        ));
        let cfg = config(4, 0, 0.5, 0.0, 0.1, InitMode::Random);
        assert_eq!(run_simulation(&cfg), Err(SimError::EmptyHorizon));
        assert_eq!(
            run_batch(&config(4, 10, 0.5, 0.0, 0.1, InitMode::Random), 0, |_| ()),
            Err(SimError::NoRepetitions)
        );
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = config(20, 300, 0.3, 0.1, 0.05, InitMode::Random);
        assert_eq!(run_simulation(&cfg).unwrap(), run_simulation(&cfg).unwrap());
        let other = run_simulation(&cfg.with_seed(43)).unwrap();
        assert_ne!(run_simulation(&cfg).unwrap().system_cost, other.system_cost);
    }

    #[test]
    fn conservation_and_bounds() {
        let mut cfg = config(30, 400, 0.7, 0.2, 0.05, InitMode::Random);
        cfg.record_agent_costs = true;
        let traj = run_simulation(&cfg).unwrap();
        for t in 0..traj.horizon() {
            let row = traj.round_costs(t).unwrap();
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            assert!((mean - traj.system_cost[t]).abs() < 1e-12);
            assert!(row.iter().all(|c| (1.0..=2.0).contains(c)));
            assert!((1.5..=2.0).contains(&traj.system_cost[t]));
        }
        let mean_of_agents = (0..30)
            .map(|j| traj.agent_time_averaged_cost(j).unwrap())
            .sum::<f64>()
            / 30.0;
        assert!((mean_of_agents - traj.time_averaged_cost()).abs() < 1e-9);
    }

    #[test]
    fn zero_beta_is_pure_bandit() {
        // Hand-rolled loop with only the self update.
        let cfg = config(10, 200, 0.6, 0.0, 0.05, InitMode::Random);
        let traj = run_simulation(&cfg).unwrap();

        let mut agents: Vec<Agent> = (0..10)
            .map(|i| Agent::new(cfg.params[i], cfg.init, agent_rng(cfg.seed, i)))
            .collect();
        let mut series = Vec::new();
        for _ in 0..200 {
            let acts: Vec<Action> = agents.iter_mut().map(|a| a.act()).collect();
            let f = tally(&acts);
            let route = f.route_costs(10);
            for (ag, &a) in agents.iter_mut().zip(&acts) {
                ag.q.update_self(a, route[a.index()], ag.params.alpha());
            }
            series.push(f.mean_cost(10));
        }
        assert_eq!(series, traj.system_cost);
    }

    #[test]
    fn permuting_agents_permutes_outputs() {
        let spec = GameSpec::new(3).unwrap();
        let p = AgentParams::new(0.5, 0.1, 0.3).unwrap();
        let build = |order: &[usize]| -> Vec<Agent> {
            order
                .iter()
                .map(|&i| Agent::new(p, InitMode::Random, agent_rng(1000 + i as u64, 0)))
                .collect()
        };
        let base = play(
            spec,
            build(&[0, 1, 2]),
            5,
            MonitoringFeedback::RouteCost,
            true,
        );
        let perm = [2, 0, 1];
        let permuted = play(spec, build(&perm), 5, MonitoringFeedback::RouteCost, true);
        assert_eq!(base.system_cost, permuted.system_cost);
        for (pos, &orig) in perm.iter().enumerate() {
            assert_eq!(permuted.agent_cost_sum[pos], base.agent_cost_sum[orig]);
        }
    }

    #[test]
    fn batch_rows_are_reproducible() {
        let cfg = config(10, 100, 0.4, 0.0, 0.05, InitMode::Random);
        let extract = |t: &Trajectory| t.time_averaged_cost();
        let a = run_batch(&cfg, 4, extract).unwrap();
        let b = run_batch(&cfg, 4, extract).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert_eq!(a[2].seed, child_seed(42, 2));
        assert_ne!(a[0].metrics, a[1].metrics);
    }
}
