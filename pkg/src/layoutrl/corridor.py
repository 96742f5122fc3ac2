"""Exactly solvable 1D sliding-item MDP used to validate the learners.

An item of integer width slides along a corridor of integer length, one
cell per step.  The reward for arriving in a state is the 1D overlap
ratio between the item there and the item at the goal, scaled by theta1.
The goal state is absorbing: every action self-loops and keeps paying
the full reward, so the optimal policy has no incentive to hover next
to the goal.  Value iteration on this chain gives a closed-form check
for the tabular and network learners.
"""

from dataclasses import dataclass

import numpy as np

# action 0 slides right (+1 cell), action 1 slides left (-1 cell)
MOVES = (1, -1)


@dataclass(frozen=True)
class CorridorMDP:
    length: int
    width: int
    goal: int
    gamma: float
    theta1: float = 1.0

    def __post_init__(self):
        if self.width <= 0 or self.length <= self.width:
            raise ValueError("corridor must be longer than the item")
        if not 0 <= self.goal <= self.length - self.width:
            raise ValueError("goal placement leaves the corridor")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")

    @property
    def n_states(self) -> int:
        return self.length - self.width + 1

    def overlap_ratio(self, state: int) -> float:
        """1D IoU between the item at `state` and the item at the goal."""
        inter = max(0, self.width - abs(state - self.goal))
        return inter / (2 * self.width - inter)

    def valid_mask(self, state: int) -> np.ndarray:
        if state == self.goal:
            return np.ones(len(MOVES), dtype=bool)
        return np.array([state + 1 < self.n_states, state - 1 >= 0])

    def step(self, state: int, action: int) -> tuple[int, float]:
        """Deterministic transition; returns (next_state, reward)."""
        if state == self.goal:
            return state, self.theta1
        nxt = state + MOVES[action]
        if not 0 <= nxt < self.n_states:
            raise ValueError("move leaves the corridor")
        return nxt, self.theta1 * self.overlap_ratio(nxt)


def value_iteration(mdp: CorridorMDP, tol: float = 1e-12,
                    max_sweeps: int = 1_000_000) -> np.ndarray:
    """Optimal state values, accurate to `tol` in the sup norm."""
    # residual r after a Bellman backup bounds the error by r*gamma/(1-gamma)
    if mdp.gamma > 0.0:
        thresh = tol * (1.0 - mdp.gamma) / mdp.gamma
    else:
        thresh = tol
    v = np.zeros(mdp.n_states)
    for _ in range(max_sweeps):
        new = np.empty_like(v)
        for s in range(mdp.n_states):
            mask = mdp.valid_mask(s)
            best = -np.inf
            for a in range(len(MOVES)):
                if not mask[a]:
                    continue
                nxt, r = mdp.step(s, a)
                best = max(best, r + mdp.gamma * v[nxt])
            new[s] = best
        resid = float(np.max(np.abs(new - v)))
        v = new
        if resid <= thresh:
            return v
    raise RuntimeError("value iteration did not converge")


def optimal_q(mdp: CorridorMDP, v: np.ndarray | None = None) -> np.ndarray:
    """Optimal action values; invalid actions hold -inf."""
    if v is None:
        v = value_iteration(mdp)
    q = np.full((mdp.n_states, len(MOVES)), -np.inf)
    for s in range(mdp.n_states):
        mask = mdp.valid_mask(s)
        for a in range(len(MOVES)):
            if mask[a]:
                nxt, r = mdp.step(s, a)
                q[s, a] = r + mdp.gamma * v[nxt]
    return q


def greedy_policy(mdp: CorridorMDP, v: np.ndarray | None = None) -> np.ndarray:
    """Greedy action per state; ties break to the lower action index."""
    return np.argmax(optimal_q(mdp, v), axis=1)


def train_tabular(mdp: CorridorMDP, sweeps: int = 2000):
    """Q-learning over exhaustive (state, action) sweeps.

    Dynamics are deterministic, so a step size bounded away from zero
    still contracts; the schedule below starts at 1.0 and settles at 0.5.
    """
    from .agent import TabularQ

    tq = TabularQ(mdp.n_states, len(MOVES))
    for k in range(sweeps):
        alpha = 0.5 + 0.5 * 0.99 ** k
        for s in range(mdp.n_states):
            mask = mdp.valid_mask(s)
            for a in range(len(MOVES)):
                if not mask[a]:
                    continue
                nxt, r = mdp.step(s, a)
                tq.update(s, a, r, nxt, False, mdp.valid_mask(nxt),
                          mdp.gamma, alpha)
    return tq
