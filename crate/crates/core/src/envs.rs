//! Built-in environments: a 1-D chain and a gridworld with configurable
//! walls and stochastic slip. Both are small enough for exact
//! dynamic-programming solutions.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SeqEvalError};
use crate::mdp::{MdpSpec, Outcome};

/// Chain actions.
pub const CHAIN_LEFT: usize = 0;
pub const CHAIN_RIGHT: usize = 1;

/// A deterministic chain of `n_states` states. State 0 is the start, the
/// last state is the terminal goal. Moving right advances one state, moving
/// left retreats one (staying put at state 0). Every move earns
/// `step_reward` and entering the goal additionally earns `goal_reward`.
pub fn chain(name: &str, n_states: usize, step_reward: f64, goal_reward: f64, horizon: usize) -> MdpSpec {
    assert!(n_states >= 2, "chain needs at least two states");
    let goal = n_states - 1;
    let mut transitions = vec![vec![Vec::new(); 2]; n_states];
    for s in 0..n_states {
        if s == goal {
            continue;
        }
        let left = s.saturating_sub(1);
        let right = s + 1;
        let reward_to = |next: usize| step_reward + if next == goal { goal_reward } else { 0.0 };
        transitions[s][CHAIN_LEFT] = vec![Outcome {
            next_state: left,
            probability: 1.0,
            reward: reward_to(left),
        }];
        transitions[s][CHAIN_RIGHT] = vec![Outcome {
            next_state: right,
            probability: 1.0,
            reward: reward_to(right),
        }];
    }
    let mut start_distribution = vec![0.0; n_states];
    start_distribution[0] = 1.0;
    let mut terminal = vec![false; n_states];
    terminal[goal] = true;
    let spec = MdpSpec {
        name: name.to_string(),
        n_states,
        n_actions: 2,
        transitions,
        start_distribution,
        terminal,
        horizon,
    };
    spec.validate().expect("chain construction is valid");
    spec
}

/// Gridworld actions, in tie-break order.
pub const GRID_UP: usize = 0;
pub const GRID_DOWN: usize = 1;
pub const GRID_LEFT: usize = 2;
pub const GRID_RIGHT: usize = 3;

/// Where gridworld episodes begin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StartMode {
    /// Always the given cell.
    Fixed(usize, usize),
    /// Uniform over free, non-goal cells.
    UniformFree,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridworldConfig {
    pub name: String,
    pub width: usize,
    pub height: usize,
    /// Blocked cells; moving into one keeps the agent in place.
    pub walls: Vec<(usize, usize)>,
    /// Probability that the intended move is replaced by one of the other
    /// three moves, each equally likely.
    pub slip: f64,
    pub step_reward: f64,
    /// Added on top of `step_reward` when entering the goal.
    pub goal_reward: f64,
    pub start: StartMode,
    pub goal: (usize, usize),
    pub horizon: usize,
}

impl GridworldConfig {
    /// A small deterministic grid used across tests: fixed start in one
    /// corner, goal in the opposite corner, step cost -1.
    pub fn example(name: &str, width: usize, height: usize) -> Self {
        GridworldConfig {
            name: name.to_string(),
            width,
            height,
            walls: Vec::new(),
            slip: 0.0,
            step_reward: -1.0,
            goal_reward: 0.0,
            start: StartMode::Fixed(0, 0),
            goal: (width - 1, height - 1),
            horizon: 10 * (width + height),
        }
    }

    fn cell_id(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    fn is_wall(&self, x: usize, y: usize) -> bool {
        self.walls.contains(&(x, y))
    }

    /// Resolves the destination of a move effect, staying put on walls and
    /// boundaries.
    fn destination(&self, x: usize, y: usize, action: usize) -> (usize, usize) {
        let (nx, ny) = match action {
            GRID_UP => (x as isize, y as isize - 1),
            GRID_DOWN => (x as isize, y as isize + 1),
            GRID_LEFT => (x as isize - 1, y as isize),
            GRID_RIGHT => (x as isize + 1, y as isize),
            _ => unreachable!("gridworld has four actions"),
        };
        if nx < 0 || ny < 0 || nx as usize >= self.width || ny as usize >= self.height {
            return (x, y);
        }
        let (nx, ny) = (nx as usize, ny as usize);
        if self.is_wall(nx, ny) {
            (x, y)
        } else {
            (nx, ny)
        }
    }
}

/// Builds the gridworld MDP described by `cfg`.
pub fn gridworld(cfg: &GridworldConfig) -> Result<MdpSpec> {
    if cfg.width == 0 || cfg.height == 0 {
        return Err(SeqEvalError::InvalidInput("empty grid".into()));
    }
    if !(0.0..=1.0).contains(&cfg.slip) {
        return Err(SeqEvalError::InvalidInput(format!(
            "slip {} outside [0, 1]",
            cfg.slip
        )));
    }
    if cfg.is_wall(cfg.goal.0, cfg.goal.1) {
        return Err(SeqEvalError::InvalidInput("goal cell is a wall".into()));
    }
    if cfg.goal.0 >= cfg.width || cfg.goal.1 >= cfg.height {
        return Err(SeqEvalError::InvalidInput("goal outside the grid".into()));
    }
    let n_states = cfg.width * cfg.height;
    let goal_id = cfg.cell_id(cfg.goal.0, cfg.goal.1);
    let mut transitions = vec![vec![Vec::new(); 4]; n_states];
    for y in 0..cfg.height {
        for x in 0..cfg.width {
            let s = cfg.cell_id(x, y);
            if s == goal_id {
                continue;
            }
            for a in 0..4 {
                // Aggregate slip effects that land on the same cell.
                let mut mass = vec![0.0; n_states];
                for effect in 0..4 {
                    let p = if effect == a {
                        1.0 - cfg.slip
                    } else {
                        cfg.slip / 3.0
                    };
                    if p == 0.0 {
                        continue;
                    }
                    let (dx, dy) = cfg.destination(x, y, effect);
                    mass[cfg.cell_id(dx, dy)] += p;
                }
                let row: Vec<Outcome> = mass
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(next_state, &probability)| Outcome {
                        next_state,
                        probability,
                        reward: cfg.step_reward
                            + if next_state == goal_id { cfg.goal_reward } else { 0.0 },
                    })
                    .collect();
                transitions[s][a] = row;
            }
        }
    }
    let mut start_distribution = vec![0.0; n_states];
    match cfg.start {
        StartMode::Fixed(x, y) => {
            if x >= cfg.width || y >= cfg.height || cfg.is_wall(x, y) {
                return Err(SeqEvalError::InvalidInput(
                    "start cell outside the grid or on a wall".into(),
                ));
            }
            start_distribution[cfg.cell_id(x, y)] = 1.0;
        }
        StartMode::UniformFree => {
            let free: Vec<usize> = (0..cfg.height)
                .flat_map(|y| (0..cfg.width).map(move |x| (x, y)))
                .filter(|&(x, y)| !cfg.is_wall(x, y) && cfg.cell_id(x, y) != goal_id)
                .map(|(x, y)| cfg.cell_id(x, y))
                .collect();
            if free.is_empty() {
                return Err(SeqEvalError::InvalidInput("no free start cells".into()));
            }
            // Assign exactly-1 total mass; last cell takes the remainder so
            // the distribution sums to one in floating point.
            let p = 1.0 / free.len() as f64;
            let mut assigned = 0.0;
            for (i, &s) in free.iter().enumerate() {
                if i + 1 == free.len() {
                    start_distribution[s] = 1.0 - assigned;
                } else {
                    start_distribution[s] = p;
                    assigned += p;
                }
            }
        }
    }
    let mut terminal = vec![false; n_states];
    terminal[goal_id] = true;
    let spec = MdpSpec {
        name: cfg.name.clone(),
        n_states,
        n_actions: 4,
        transitions,
        start_distribution,
        terminal,
        horizon: cfg.horizon,
    };
    spec.validate()?;
    Ok(spec)
}
