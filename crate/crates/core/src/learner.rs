//! Stateless continual Q-learning with an epsilon-greedy policy.
//!
//! q-values are travel-time estimates, so the greedy action is the one with the
//! *smallest* q-value. The taken action learns from its own cost at rate
//! `alpha`; when monitoring is enabled (`beta > 0`) the two untaken actions
//! learn at rate `beta` from the cost their route had in the same round.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::Action;
use crate::rng::AgentRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("beta = {beta} exceeds alpha = {alpha}")]
    BetaExceedsAlpha { alpha: f64, beta: f64 },
}

/// Learning parameters of one agent. Always satisfies `0 <= beta <= alpha <= 1`
/// and `0 <= epsilon <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentParams {
    alpha: f64,
    beta: f64,
    epsilon: f64,
}

impl AgentParams {
    pub fn new(alpha: f64, beta: f64, epsilon: f64) -> Result<Self, ParamError> {
        for (name, value) in [("alpha", alpha), ("beta", beta), ("epsilon", epsilon)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ParamError::OutOfRange { name, value });
            }
        }
        if beta > alpha {
            return Err(ParamError::BetaExceedsAlpha { alpha, beta });
        }
        Ok(AgentParams {
            alpha,
            beta,
            epsilon,
        })
    }

    /// Bandit learner: no monitoring feedback.
    pub fn bandit(alpha: f64, epsilon: f64) -> Result<Self, ParamError> {
        Self::new(alpha, 0.0, epsilon)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self, ParamError> {
        Self::new(alpha, self.beta, self.epsilon)
    }

    pub fn with_beta(self, beta: f64) -> Result<Self, ParamError> {
        Self::new(self.alpha, beta, self.epsilon)
    }

    pub fn with_epsilon(self, epsilon: f64) -> Result<Self, ParamError> {
        Self::new(self.alpha, self.beta, epsilon)
    }
}

/// How q-tables are seeded before the first round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Each entry drawn independently from `Uniform[1, 2]`.
    #[default]
    Random,
    /// `(up, down, cross) = (2.1, 2.1, 2.0)`, which makes everyone cross.
    NashEq,
}

/// Which cost the untaken actions learn from when `beta > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonitoringFeedback {
    /// Each untaken action moves toward its own route's realized cost.
    #[default]
    RouteCost,
    /// Every untaken action moves toward the cost of the action actually taken.
    TakenCost,
}

/// Per-action q-values in cost units, indexed by [`Action::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QTable(pub [f64; 3]);

pub const NASH_EQ_QVALUES: [f64; 3] = [2.1, 2.1, 2.0];

impl QTable {
    pub fn get(&self, a: Action) -> f64 {
        self.0[a.index()]
    }

    pub fn values(&self) -> [f64; 3] {
        self.0
    }

    /// Moves `Q(a)` toward `cost` at rate `alpha`; other entries are untouched.
    #[inline]
    pub fn update_self(&mut self, a: Action, cost: f64, alpha: f64) {
        let q = &mut self.0[a.index()];
        *q += alpha * (cost - *q);
    }

    /// Moves each untaken entry toward its own observed cost at rate `beta`.
    ///
    /// `observed` is indexed by action; the entry for `taken` is ignored.
    #[inline]
    pub fn update_monitored(&mut self, taken: Action, observed: &[f64; 3], beta: f64) {
        for (i, q) in self.0.iter_mut().enumerate() {
            if i != taken.index() {
                *q += beta * (observed[i] - *q);
            }
        }
    }

    /// Cost-minimizing actions, in index order.
    fn minimizers(&self) -> ([Action; 3], usize) {
        let min = self.0.iter().copied().fold(f64::INFINITY, f64::min);
        let mut out = [Action::Up; 3];
        let mut k = 0;
        for a in Action::ALL {
            if self.0[a.index()] == min {
                out[k] = a;
                k += 1;
            }
        }
        (out, k)
    }
}

/// Fresh q-table. `Random` consumes three draws (up, down, cross order);
/// `NashEq` consumes none.
pub fn init_qtable(mode: InitMode, rng: &mut AgentRng) -> QTable {
    match mode {
        InitMode::Random => {
            let mut q = [0.0; 3];
            for v in &mut q {
                *v = rng.gen_range(1.0..=2.0);
            }
            QTable(q)
        }
        InitMode::NashEq => QTable(NASH_EQ_QVALUES),
    }
}

/// Epsilon-greedy choice over cost-valued q.
///
/// Draw order is fixed: one exploration coin; then one uniform action draw if
/// exploring, or one tie-break draw if the greedy minimum is shared, or
/// nothing more.
pub fn select_action(q: &QTable, epsilon: f64, rng: &mut AgentRng) -> Action {
    let coin: f64 = rng.gen();
    if coin < epsilon {
        return Action::from_index(rng.gen_range(0..3));
    }
    let (tied, k) = q.minimizers();
    if k == 1 {
        tied[0]
    } else {
        tied[rng.gen_range(0..k)]
    }
}

/// One learner: its q-table, parameters and private random stream.
#[derive(Debug, Clone)]
pub struct Agent {
    pub q: QTable,
    pub params: AgentParams,
    rng: AgentRng,
}

impl Agent {
    /// Builds an agent, drawing its initial q-table from its own stream.
    pub fn new(params: AgentParams, init: InitMode, mut rng: AgentRng) -> Self {
        let q = init_qtable(init, &mut rng);
        Agent { q, params, rng }
    }

    pub fn with_qtable(params: AgentParams, q: QTable, rng: AgentRng) -> Self {
        Agent { q, params, rng }
    }

    #[inline]
    pub fn act(&mut self) -> Action {
        select_action(&self.q, self.params.epsilon, &mut self.rng)
    }

    /// Applies one round of feedback. `route_costs` are the realized costs of
    /// all three routes this round.
    #[inline]
    pub fn learn(&mut self, taken: Action, route_costs: &[f64; 3], feedback: MonitoringFeedback) {
        let own = route_costs[taken.index()];
        self.q.update_self(taken, own, self.params.alpha);
        if self.params.beta > 0.0 {
            match feedback {
                MonitoringFeedback::RouteCost => {
                    self.q
                        .update_monitored(taken, route_costs, self.params.beta)
                }
                MonitoringFeedback::TakenCost => {
                    self.q.update_monitored(taken, &[own; 3], self.params.beta)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::agent_rng;
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, prop_assume, proptest};

    #[test]
    fn params_enforce_ordering() {
        assert!(AgentParams::new(0.3, 0.5, 0.01).is_err());
        assert!(AgentParams::new(0.5, 0.5, 0.01).is_ok());
        assert!(matches!(
            AgentParams::new(1.2, 0.0, 0.01),
            Err(ParamError::OutOfRange { name: "alpha", .. })
        ));
        assert!(AgentParams::new(0.5, 0.0, -0.1).is_err());
        assert!(AgentParams::new(f64::NAN, 0.0, 0.1).is_err());
    }

    #[test]
    fn nash_init_consumes_nothing_and_crosses() {
        let mut rng = agent_rng(3, 0);
        let q = init_qtable(InitMode::NashEq, &mut rng);
        assert_eq!(q.values(), [2.1, 2.1, 2.0]);
        let mut untouched = agent_rng(3, 0);
        assert_eq!(rng.gen::<u64>(), untouched.gen::<u64>());

        let mut rng = agent_rng(3, 0);
        for _ in 0..100 {
            assert_eq!(select_action(&q, 0.0, &mut rng), Action::Cross);
        }
    }

    #[test]
    fn random_init_in_unit_band() {
        for seed in 0..200 {
            let q = init_qtable(InitMode::Random, &mut agent_rng(seed, 1));
            assert!(q.values().iter().all(|v| (1.0..=2.0).contains(v)));
        }
    }

    #[test]
    fn greedy_picks_unique_minimum() {
        let q = QTable([1.5, 1.7, 1.9]);
        let mut rng = agent_rng(0, 0);
        for _ in 0..50 {
            assert_eq!(select_action(&q, 0.0, &mut rng), Action::Up);
        }
    }

    #[test]
    fn full_exploration_is_uniform() {
        let q = QTable([1.0, 2.0, 2.0]);
        let mut rng = agent_rng(11, 0);
        let mut hits = [0usize; 3];
        let draws = 60_000;
        for _ in 0..draws {
            hits[select_action(&q, 1.0, &mut rng).index()] += 1;
        }
        // 5 sigma of a binomial(60000, 1/3) is about 577.
        for h in hits {
            assert!((h as i64 - 20_000).abs() < 600, "{hits:?}");
        }
    }

    #[test]
    fn ties_break_uniformly_with_one_extra_draw() {
        let q = QTable([2.0, 2.0, 2.0]);
        let mut rng = agent_rng(5, 0);
        let mut hits = [0usize; 3];
        for _ in 0..30_000 {
            hits[select_action(&q, 0.0, &mut rng).index()] += 1;
        }
        for h in hits {
            assert!((h as i64 - 10_000).abs() < 450, "{hits:?}");
        }

        // Draw accounting: coin then tie-break.
        let mut a = agent_rng(9, 2);
        let _ = select_action(&QTable([1.0, 1.0, 2.0]), 0.0, &mut a);
        let mut b = agent_rng(9, 2);
        let _: f64 = b.gen();
        let _ = b.gen_range(0..2usize);
        assert_eq!(a.gen::<u64>(), b.gen::<u64>());

        // No tie: only the coin.
        let mut a = agent_rng(9, 2);
        let _ = select_action(&QTable([1.0, 1.5, 2.0]), 0.0, &mut a);
        let mut b = agent_rng(9, 2);
        let _: f64 = b.gen();
        assert_eq!(a.gen::<u64>(), b.gen::<u64>());
    }

    #[test]
    fn self_update_arithmetic() {
        let mut q = QTable([1.5, 1.9, 1.9]);
        q.update_self(Action::Up, 2.0, 0.5);
        assert_eq!(q.values(), [1.75, 1.9, 1.9]);

        let mut q = QTable([1.3, 1.4, 1.5]);
        q.update_self(Action::Down, 1.85, 1.0);
        assert_eq!(q.get(Action::Down), 1.85);

        let mut q = QTable([1.3, 1.4, 1.5]);
        q.update_self(Action::Cross, 1.85, 0.0);
        assert_eq!(q.values(), [1.3, 1.4, 1.5]);
    }

    #[test]
    fn monitored_update_arithmetic() {
        let mut q = QTable([1.6, 1.8, 1.7]);
        q.update_monitored(Action::Up, &[1.9, 1.5, 1.2], 0.2);
        assert_eq!(q.get(Action::Up), 1.6);
        assert!((q.get(Action::Down) - 1.74).abs() < 1e-15);
        assert!((q.get(Action::Cross) - 1.6).abs() < 1e-15);

        let before = QTable([1.6, 1.8, 1.7]);
        let mut q = before;
        q.update_monitored(Action::Up, &[1.9, 1.5, 1.2], 0.0);
        assert_eq!(q, before);
    }

    #[test]
    fn beta_equal_alpha_moves_every_entry() {
        let params = AgentParams::new(0.4, 0.4, 0.0).unwrap();
        let mut agent = Agent::with_qtable(params, QTable([1.2, 1.4, 1.6]), agent_rng(0, 0));
        agent.learn(
            Action::Down,
            &[2.0, 2.0, 2.0],
            MonitoringFeedback::RouteCost,
        );
        let q = agent.q.values();
        assert!(q.iter().zip([1.2, 1.4, 1.6]).all(|(new, old)| new > &old));
    }

    #[test]
    fn taken_cost_feedback_pulls_toward_own_cost() {
        let params = AgentParams::new(0.5, 0.5, 0.0).unwrap();
        let mut agent = Agent::with_qtable(params, QTable([1.0, 1.0, 1.0]), agent_rng(0, 0));
        agent.learn(Action::Up, &[2.0, 1.0, 1.0], MonitoringFeedback::TakenCost);
        assert_eq!(agent.q.values(), [1.5, 1.5, 1.5]);
    }

    proptest! {
        #[test]
        fn ema_expansion_matches_recursion(
            q0 in 1.0f64..2.0,
            alpha in 0.0f64..=1.0,
            costs in prop::collection::vec(1.0f64..=2.0, 1..200),
        ) {
            let mut q = QTable([q0, 0.0, 0.0]);
            for &r in &costs {
                q.update_self(Action::Up, r, alpha);
            }
            let k = costs.len() as i32;
            let mut closed = (1.0 - alpha).powi(k) * q0;
            for (j, &r) in costs.iter().enumerate() {
                closed += alpha * (1.0 - alpha).powi(k - 1 - j as i32) * r;
            }
            prop_assert!((q.get(Action::Up) - closed).abs() < 1e-12);
        }

        #[test]
        fn entries_stay_in_hull(
            init in prop::array::uniform3(0.5f64..2.5),
            alpha in 0.0f64..=1.0,
            beta_frac in 0.0f64..=1.0,
            steps in prop::collection::vec((0usize..3, prop::array::uniform3(1.0f64..=2.0)), 1..100),
        ) {
            let params = AgentParams::new(alpha, alpha * beta_frac, 0.1).unwrap();
            let mut agent = Agent::with_qtable(params, QTable(init), agent_rng(0, 0));
            for (a, costs) in steps {
                agent.learn(Action::from_index(a), &costs, MonitoringFeedback::RouteCost);
            }
            for (v, q0) in agent.q.values().iter().zip(init) {
                prop_assert!(*v >= q0.min(1.0) - 1e-12 && *v <= q0.max(2.0) + 1e-12);
            }
        }

        #[test]
        fn greedy_ignores_common_offset(
            q in prop::array::uniform3(1.0f64..2.0),
            shift in -10.0f64..10.0,
            scale in 0.1f64..10.0,
        ) {
            let base = QTable(q);
            let moved = QTable([q[0] * scale + shift, q[1] * scale + shift, q[2] * scale + shift]);
            // Affine maps can round distinct values together; only compare strict minima.
            prop_assume!(base.minimizers().1 == 1 && moved.minimizers().1 == 1);
            let mut r1 = agent_rng(1, 1);
            let mut r2 = agent_rng(1, 1);
            prop_assert_eq!(select_action(&base, 0.0, &mut r1), select_action(&moved, 0.0, &mut r2));
        }
    }
}
