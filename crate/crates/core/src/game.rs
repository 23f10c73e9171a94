//! The three-route Braess congestion game.
//!
//! Players pick one of `up`, `down` or `cross`. Route costs depend only on how
//! many players use each route:
//!
//! | action | cost                                  |
//! |--------|---------------------------------------|
//! | up     | `1 + (f_up + f_cross) / n`            |
//! | cross  | `(f_up + 2 f_cross + f_down) / n`     |
//! | down   | `1 + (f_down + f_cross) / n`          |
//!
//! Everyone on `cross` is the stage-game Nash equilibrium (cost 2 for all),
//! while an even up/down split is the social optimum (cost 1.5 for all).
//! Costs are travel times: lower is better everywhere in this crate.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("a game needs at least 2 players, got {0}")]
    TooFewPlayers(usize),
    #[error("action profile has {got} entries but the game has {expected} players")]
    ProfileLength { expected: usize, got: usize },
    #[error("flow counts sum to {got} but the game has {expected} players")]
    CountsMismatch { expected: usize, got: usize },
}

/// A route choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Up = 0,
    Down = 1,
    Cross = 2,
}

impl Action {
    /// All actions in index order.
    pub const ALL: [Action; 3] = [Action::Up, Action::Down, Action::Cross];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// Inverse of [`Action::index`]. Panics on indices above 2.
    #[inline]
    pub fn from_index(i: usize) -> Action {
        Action::ALL[i]
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Cross => "cross",
        };
        f.write_str(name)
    }
}

/// Game size. The payoff structure itself is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameSpec {
    n: usize,
}

impl GameSpec {
    pub fn new(n: usize) -> Result<Self, GameError> {
        if n < 2 {
            return Err(GameError::TooFewPlayers(n));
        }
        Ok(GameSpec { n })
    }

    #[inline]
    pub fn players(&self) -> usize {
        self.n
    }
}

/// Number of players on each route.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlowCounts {
    pub up: u32,
    pub down: u32,
    pub cross: u32,
}

impl FlowCounts {
    pub fn new(up: u32, down: u32, cross: u32) -> Self {
        FlowCounts { up, down, cross }
    }

    pub fn total(&self) -> usize {
        self.up as usize + self.down as usize + self.cross as usize
    }

    pub fn get(&self, a: Action) -> u32 {
        match a {
            Action::Up => self.up,
            Action::Down => self.down,
            Action::Cross => self.cross,
        }
    }

    fn bump(&mut self, a: Action) {
        match a {
            Action::Up => self.up += 1,
            Action::Down => self.down += 1,
            Action::Cross => self.cross += 1,
        }
    }

    /// Costs of all three routes at these counts, indexed by [`Action::index`].
    ///
    /// Numerators are exact integers; the only rounding is the final division.
    pub fn route_costs(&self, n: usize) -> [f64; 3] {
        let [up, down, cross] = self.numerators(n);
        let n = n as f64;
        [up as f64 / n, down as f64 / n, cross as f64 / n]
    }

    /// `n` times each route cost.
    fn numerators(&self, n: usize) -> [u64; 3] {
        let (n, up, down, cross) = (
            n as u64,
            self.up as u64,
            self.down as u64,
            self.cross as u64,
        );
        [n + up + cross, n + down + cross, up + 2 * cross + down]
    }

    /// Mean realized cost over all players at these counts, rounded once.
    pub fn mean_cost(&self, n: usize) -> f64 {
        let [up, down, cross] = self.numerators(n);
        let total = self.up as u64 * up + self.down as u64 * down + self.cross as u64 * cross;
        total as f64 / (n as u64 * n as u64) as f64
    }
}

/// One action per player.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionProfile {
    actions: Vec<Action>,
}

impl ActionProfile {
    pub fn new(spec: GameSpec, actions: Vec<Action>) -> Result<Self, GameError> {
        if actions.len() != spec.players() {
            return Err(GameError::ProfileLength {
                expected: spec.players(),
                got: actions.len(),
            });
        }
        Ok(ActionProfile { actions })
    }

    pub fn uniform(spec: GameSpec, a: Action) -> Self {
        ActionProfile {
            actions: vec![a; spec.players()],
        }
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Tally of route usage in a profile.
pub fn count_actions(profile: &ActionProfile) -> FlowCounts {
    tally(profile.actions())
}

pub(crate) fn tally(actions: &[Action]) -> FlowCounts {
    let mut f = FlowCounts::default();
    for &a in actions {
        f.bump(a);
    }
    f
}

/// Cost of route `a` when the flows are `f` in an `n`-player game.
pub fn action_cost(a: Action, f: &FlowCounts, n: usize) -> Result<f64, GameError> {
    if f.total() != n {
        return Err(GameError::CountsMismatch {
            expected: n,
            got: f.total(),
        });
    }
    Ok(f.route_costs(n)[a.index()])
}

/// Realized cost for every player.
pub fn profile_costs(profile: &ActionProfile, spec: GameSpec) -> Result<Vec<f64>, GameError> {
    check_len(profile, spec)?;
    let costs = count_actions(profile).route_costs(spec.players());
    Ok(profile.actions().iter().map(|a| costs[a.index()]).collect())
}

/// Mean realized cost `C_t` of one round.
pub fn system_cost(profile: &ActionProfile, spec: GameSpec) -> Result<f64, GameError> {
    check_len(profile, spec)?;
    Ok(count_actions(profile).mean_cost(spec.players()))
}

fn check_len(profile: &ActionProfile, spec: GameSpec) -> Result<(), GameError> {
    if profile.len() != spec.players() {
        return Err(GameError::ProfileLength {
            expected: spec.players(),
            got: profile.len(),
        });
    }
    Ok(())
}

/// Analytic landmarks of the stage game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePoints {
    /// System cost when everybody crosses.
    pub nash_cost: f64,
    /// Lowest system cost over all integer splits.
    pub social_optimum_cost: f64,
    /// Flows that attain the optimum.
    pub optimum_flows: FlowCounts,
    /// False for odd `n`, where no exact half/half split exists.
    pub even_split: bool,
}

/// Nash and social-optimum system costs.
///
/// The optimum is found by evaluating every split of `n` players over the
/// three routes; for even `n` that is the half/half up/down split at 1.5.
pub fn reference_points(spec: GameSpec) -> ReferencePoints {
    let n = spec.players();
    let nash = FlowCounts::new(0, 0, n as u32).mean_cost(n);

    let mut best = FlowCounts::new(0, 0, n as u32);
    let mut best_cost = nash;
    for up in 0..=n as u32 {
        for down in 0..=(n as u32 - up) {
            let f = FlowCounts::new(up, down, n as u32 - up - down);
            let c = f.mean_cost(n);
            if c < best_cost {
                best_cost = c;
                best = f;
            }
        }
    }

    ReferencePoints {
        nash_cost: nash,
        social_optimum_cost: best_cost,
        optimum_flows: best,
        even_split: n.is_multiple_of(2),
    }
}
