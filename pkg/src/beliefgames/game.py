"""Tabular primitives for finite dynamic games: spaces, kernels, rewards, priors."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GameSpec:
    """A finite dynamic game with per-player states, observations and actions.

    All kernels are tabular and indexed by 0-based state/observation/action
    indices.  ``transition[i]`` has shape ``(S_i, A_joint, S_i)`` and gives the
    distribution of player i's next own state given its current own state and
    the flat joint-action index.  ``observation[i]`` has shape
    ``(S_i, A_joint, W_i)``: the distribution of the private observation given
    the own state just reached and the joint action that produced it.
    ``reward[i]`` has shape ``(X_joint, A_joint)`` over flat joint-state and
    joint-action indices.  ``prior[i]`` is the initial own-state distribution.

    Instances are immutable after construction (arrays are frozen) and safe to
    share across solver and simulation workers.
    """

    num_players: int
    horizon: int
    state_sizes: tuple
    obs_sizes: tuple
    action_sizes: tuple
    transition: tuple
    observation: tuple
    reward: tuple
    prior: tuple
    static_states: bool = False

    def __post_init__(self):
        object.__setattr__(self, "state_sizes", tuple(self.state_sizes))
        object.__setattr__(self, "obs_sizes", tuple(self.obs_sizes))
        object.__setattr__(self, "action_sizes", tuple(self.action_sizes))
        for name in ("transition", "observation", "reward", "prior"):
            arrs = tuple(np.asarray(a, dtype=float) for a in getattr(self, name))
            for a in arrs:
                a.setflags(write=False)
            object.__setattr__(self, name, arrs)

    @cached_property
    def num_joint_actions(self):
        n = 1
        for a in self.action_sizes:
            n *= a
        return n

    @cached_property
    def num_joint_states(self):
        n = 1
        for s in self.state_sizes:
            n *= s
        return n

    @cached_property
    def _action_strides(self):
        return _strides(self.action_sizes)

    @cached_property
    def _state_strides(self):
        return _strides(self.state_sizes)

    def joint_action_index(self, a):
        return _flat_index(a, self.action_sizes, self._action_strides, "action")

    def joint_state_index(self, x):
        return _flat_index(x, self.state_sizes, self._state_strides, "state")

    def joint_actions(self):
        """All joint action profiles, in row-major (flat index) order."""
        return list(itertools.product(*(range(n) for n in self.action_sizes)))

    def joint_states(self):
        return list(itertools.product(*(range(n) for n in self.state_sizes)))


def _strides(sizes):
    strides = [1] * len(sizes)
    for k in range(len(sizes) - 2, -1, -1):
        strides[k] = strides[k + 1] * sizes[k + 1]
    return tuple(strides)


def _flat_index(idx, sizes, strides, what):
    if len(idx) != len(sizes):
        raise IndexError(f"expected {len(sizes)} {what} indices, got {len(idx)}")
    flat = 0
    for v, n, s in zip(idx, sizes, strides):
        if not 0 <= v < n:
            raise IndexError(f"{what} index {v} out of range [0, {n})")
        flat += v * s
    return flat


def reward_lookup(spec, player, x, a):
    """Instantaneous reward of ``player`` for joint state ``x`` and joint action ``a``."""
    if not 0 <= player < spec.num_players:
        raise IndexError(f"player index {player} out of range")
    return float(spec.reward[player][spec.joint_state_index(x), spec.joint_action_index(a)])


def validate_spec(spec):
    """Check every structural invariant of a GameSpec.

    Returns a list of human-readable violation strings; an empty list means the
    spec is valid.  Violations are data, not exceptions.
    """
    report = []
    n = spec.num_players
    if n < 1:
        report.append(f"num_players must be positive, got {n}")
        return report
    if spec.horizon < 1:
        report.append(f"horizon must be positive, got {spec.horizon}")
    for name, sizes in (("state", spec.state_sizes), ("observation", spec.obs_sizes),
                        ("action", spec.action_sizes)):
        if len(sizes) != n:
            report.append(f"{name}_sizes has {len(sizes)} entries for {n} players")
        for i, s in enumerate(sizes):
            if s < 1:
                report.append(f"player {i}: {name} space size {s} must be positive")
    if report:
        return report

    aj = spec.num_joint_actions
    for i in range(n):
        s, w = spec.state_sizes[i], spec.obs_sizes[i]
        _check_kernel(report, spec.transition[i], (s, aj, s), f"player {i} transition",
                      allow_zeros=spec.static_states)
        _check_kernel(report, spec.observation[i], (s, aj, w), f"player {i} observation",
                      allow_zeros=False)
        if spec.reward[i].shape != (spec.num_joint_states, aj):
            report.append(f"player {i} reward: shape {spec.reward[i].shape} != "
                          f"{(spec.num_joint_states, aj)}")
        p = spec.prior[i]
        if p.shape != (s,):
            report.append(f"player {i} prior: shape {p.shape} != ({s},)")
        elif abs(p.sum() - 1.0) > ROW_SUM_TOL:
            report.append(f"player {i} prior sums to {p.sum()!r}")
        elif (p < 0).any():
            report.append(f"player {i} prior has negative entries")
    return report


def _check_kernel(report, arr, shape, label, allow_zeros):
    if arr.shape != shape:
        report.append(f"{label}: shape {arr.shape} != {shape}")
        return
    rows = arr.reshape(-1, shape[-1])
    sums = rows.sum(axis=1)
    bad = np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)[0]
    for r in bad[:8]:
        report.append(f"{label}: row {r} sums to {sums[r]!r}")
    if (rows < 0).any():
        report.append(f"{label}: negative entries")
    elif not allow_zeros and (rows <= 0).any():
        r = int(np.nonzero((rows <= 0).any(axis=1))[0][0])
        report.append(f"{label}: row {r} has zero entries (full support required)")
