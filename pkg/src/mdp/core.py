from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from errors import InvalidMdpError
from util.fingerprint import array_digest
from util.logging import logger

PROB_TOL = 1e-12
# Minimum probability of jumping to the terminal state in generated MDPs
TERMINAL_MASS = 0.05


@dataclass(frozen=True, eq=False)
class Mdp:
    """Finite episodic MDP with expected rewards R(s, a).

    Terminal states are absorbing and pay nothing; initial mass never sits on
    them. Arrays are copied to float/bool and frozen on construction.
    """

    transition: np.ndarray  # P[s, a, s']
    reward: np.ndarray  # R[s, a]
    gamma: float
    initial: np.ndarray  # mu0[s]
    terminal: np.ndarray  # bool per state

    def __post_init__(self):
        for name, dtype in (
            ("transition", float),
            ("reward", float),
            ("initial", float),
            ("terminal", bool),
        ):
            arr = np.array(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def num_states(self) -> int:
        return int(self.transition.shape[0])

    @property
    def num_actions(self) -> int:
        return int(self.transition.shape[1])

    @cached_property
    def decision_states(self) -> np.ndarray:
        """Indices of non-terminal states, in increasing order."""
        return np.flatnonzero(~self.terminal)

    @cached_property
    def fingerprint(self) -> str:
        return array_digest(
            self.transition,
            self.reward,
            np.array([self.gamma]),
            self.initial,
            self.terminal,
            tag="mdp",
        )

    def __repr__(self):
        return (
            f"Mdp(num_states={self.num_states}, num_actions={self.num_actions}, "
            f"gamma={self.gamma}, terminal={self.terminal.nonzero()[0].tolist()})"
        )


@dataclass(frozen=True)
class Violation:
    field: str
    index: tuple[int, ...] = ()
    magnitude: float = 0.0
    message: str = ""

    def __str__(self):
        where = f"[{','.join(str(i) for i in self.index)}]" if self.index else ""
        return f"{self.field}{where}: {self.message} (magnitude {self.magnitude:.3g})"


def validate_mdp(mdp: Mdp) -> list[Violation]:
    """Check every Mdp invariant and report the violations.

    Validation never raises; an empty list means the MDP is valid.
    """
    report: list[Violation] = []
    P, R, mu0, term = mdp.transition, mdp.reward, mdp.initial, mdp.terminal

    if P.ndim != 3 or P.shape[0] != P.shape[2] or P.shape[0] < 1 or P.shape[1] < 1:
        return [Violation("transition", (), 0.0, f"expected shape (S, A, S), got {P.shape}")]
    S, A = P.shape[0], P.shape[1]
    for name, arr, shape in (
        ("reward", R, (S, A)),
        ("initial", mu0, (S,)),
        ("terminal", term, (S,)),
    ):
        if arr.shape != shape:
            report.append(
                Violation(name, (), 0.0, f"expected shape {shape}, got {arr.shape}")
            )
    if report:
        return report

    for name, arr in (("transition", P), ("reward", R), ("initial", mu0)):
        for idx in zip(*np.nonzero(~np.isfinite(arr))):
            report.append(Violation(name, tuple(int(i) for i in idx), np.inf, "not finite"))
    if report:
        return report

    for idx in zip(*np.nonzero(P < 0)):
        report.append(
            Violation("transition", tuple(int(i) for i in idx), float(-P[idx]), "negative probability")
        )

    row_sums = P.sum(axis=2)
    for s in range(S):
        for a in range(A):
            if term[s]:
                if abs(P[s, a, s] - 1.0) > PROB_TOL:
                    report.append(
                        Violation("transition", (s, a), abs(P[s, a, s] - 1.0), "terminal state not absorbing")
                    )
                if R[s, a] != 0.0:
                    report.append(
                        Violation("reward", (s, a), abs(R[s, a]), "terminal state pays non-zero reward")
                    )
            elif abs(row_sums[s, a] - 1.0) > PROB_TOL:
                report.append(
                    Violation("transition", (s, a), abs(row_sums[s, a] - 1.0), "row does not sum to 1")
                )

    for s in np.flatnonzero(mu0 < 0):
        report.append(Violation("initial", (int(s),), float(-mu0[s]), "negative probability"))
    if abs(mu0.sum() - 1.0) > PROB_TOL:
        report.append(Violation("initial", (), abs(mu0.sum() - 1.0), "does not sum to 1"))
    for s in np.flatnonzero(term & (mu0 != 0)):
        report.append(
            Violation("initial", (int(s),), abs(float(mu0[s])), "initial mass on terminal state")
        )

    gamma = mdp.gamma
    if not 0.0 < gamma <= 1.0:
        report.append(Violation("gamma", (), gamma, "discount must lie in (0, 1]"))
    elif gamma == 1.0:
        stuck = np.flatnonzero(~terminal_attractor(mdp))
        if stuck.size:
            report.append(
                Violation(
                    "gamma",
                    tuple(int(s) for s in stuck),
                    float(stuck.size),
                    "gamma = 1 but termination is not reachable under every deterministic policy",
                )
            )

    if report:
        logger.debug(f"MDP validation found {len(report)} violation(s)")
    return report


def require_valid(mdp: Mdp) -> Mdp:
    report = validate_mdp(mdp)
    if report:
        logger.warning(f"Rejecting invalid MDP with {len(report)} violation(s)")
        raise InvalidMdpError(report)
    return mdp


def terminal_attractor(mdp: Mdp) -> np.ndarray:
    """States from which a terminal state is reachable whatever the policy does.

    A state belongs to the set when every action has some successor (in the
    support of P) already in the set. Iterated to a fixed point from the
    terminal states.
    """
    support = mdp.transition > 0
    good = mdp.terminal.copy()
    while True:
        reaches = (support & good[None, None, :]).any(axis=2).all(axis=1)
        updated = good | reaches
        if np.array_equal(updated, good):
            return good
        good = updated


def make_two_arm_bandit(gamma: float = 1.0) -> Mdp:
    """One decision from s0: a0 pays 1, a1 pays 0, both end the episode."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    transition = np.zeros((2, 2, 2))
    transition[:, :, 1] = 1.0
    reward = np.array([[1.0, 0.0], [0.0, 0.0]])
    return Mdp(
        transition=transition,
        reward=reward,
        gamma=gamma,
        initial=np.array([1.0, 0.0]),
        terminal=np.array([False, True]),
    )


def _random_rows(rng: np.random.Generator, num_rows: tuple[int, ...], num_states: int, terminal_state: int | None):
    rows = rng.dirichlet(np.ones(num_states), size=num_rows)
    if terminal_state is not None:
        rows *= 1.0 - TERMINAL_MASS
        rows[..., terminal_state] += TERMINAL_MASS
    return rows / rows.sum(axis=-1, keepdims=True)


def make_random_mdp(num_states: int, num_actions: int, gamma: float, seed: int) -> Mdp:
    """Seeded random MDP whose last state is the terminal one.

    Every non-terminal (s, a) moves to the terminal state with probability at
    least TERMINAL_MASS; rewards are uniform in [-1, 1].
    """
    if num_states < 2 or num_actions < 2:
        raise ValueError(
            f"need at least 2 states and 2 actions, got {num_states}x{num_actions}"
        )
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")

    rng = np.random.default_rng(seed)
    S, A = num_states, num_actions
    terminal_state = S - 1

    transition = np.zeros((S, A, S))
    transition[: S - 1] = _random_rows(rng, (S - 1, A), S, terminal_state)
    transition[terminal_state, :, terminal_state] = 1.0

    reward = rng.uniform(-1.0, 1.0, size=(S, A))
    reward[terminal_state] = 0.0

    initial = np.zeros(S)
    initial[: S - 1] = rng.dirichlet(np.ones(S - 1))

    terminal = np.zeros(S, dtype=bool)
    terminal[terminal_state] = True

    return Mdp(transition=transition, reward=reward, gamma=gamma, initial=initial, terminal=terminal)


def perturb_mdp(
    mdp: Mdp,
    reward_shift: float = 0.0,
    transition_seed: int | None = None,
    mix: float = 1.0,
) -> Mdp:
    """Approximate model of ``mdp`` with the same shape and terminal set.

    Rewards on decision states are shifted by ``reward_shift``. With a
    ``transition_seed`` the decision rows become ``(1 - mix) P + mix P'`` for
    freshly drawn rows P'.
    """
    if not 0.0 <= mix <= 1.0:
        raise ValueError(f"mix must lie in [0, 1], got {mix}")
    decision = ~mdp.terminal

    reward = np.array(mdp.reward)
    reward[decision] += reward_shift

    transition = np.array(mdp.transition)
    if transition_seed is not None:
        rng = np.random.default_rng(transition_seed)
        terminals = np.flatnonzero(mdp.terminal)
        fresh = _random_rows(
            rng,
            (int(decision.sum()), mdp.num_actions),
            mdp.num_states,
            int(terminals[0]) if terminals.size else None,
        )
        mixed = (1.0 - mix) * transition[decision] + mix * fresh
        transition[decision] = mixed / mixed.sum(axis=-1, keepdims=True)

    return Mdp(
        transition=transition,
        reward=reward,
        gamma=mdp.gamma,
        initial=mdp.initial,
        terminal=mdp.terminal,
    )
