"""Exact private/public belief filtering over finite observation histories.

Private beliefs are plain tuples of floats (a distribution over a player's own
state space).  Public beliefs are finite atom lists: every positive-probability
action history induces finitely many exact posteriors, so no simplex meshing is
needed and Bayes-oracle tests can demand 1e-10 agreement.
"""

from __future__ import annotations

import hashlib
import itertools
from bisect import bisect_left
from dataclasses import dataclass, field

import numpy as np

ATOM_MERGE_TOL = 1e-10
WEIGHT_PRUNE_TOL = 1e-12
DIST_SUM_TOL = 1e-12


class ImpossibleObservationError(ValueError):
    """An observation with zero predictive probability (degenerate kernels only)."""


def check_belief(xi, tol=DIST_SUM_TOL):
    if any(p < 0 or p > 1 for p in xi):
        raise ValueError(f"belief entries outside [0, 1]: {xi}")
    if abs(sum(xi) - 1.0) > tol:
        raise ValueError(f"belief sums to {sum(xi)!r}")


def _atoms_close(a, b, tol=ATOM_MERGE_TOL):
    return all(abs(u - v) <= tol for u, v in zip(a, b))


def merge_pairs(pairs, prune=True):
    """Sort (belief, weight) pairs, merge atoms equal within tolerance,
    optionally prune negligible weights and renormalize."""
    pairs = sorted(pairs)
    merged = []
    for atom, w in pairs:
        if merged and _atoms_close(merged[-1][0], atom):
            merged[-1][1] += w
        else:
            merged.append([atom, w])
    if prune:
        merged = [[a, w] for a, w in merged if w > WEIGHT_PRUNE_TOL]
        total = sum(w for _, w in merged)
        if merged and abs(total - 1.0) > 1e-15:
            merged = [[a, w / total] for a, w in merged]
    return [(a, w) for a, w in merged]


@dataclass(frozen=True)
class PublicBelief:
    """Distribution over one player's private-belief atoms.

    ``off_equilibrium`` marks a belief produced through the zero-probability
    update branch; it is carried as metadata and ignored by equality.
    """

    atoms: tuple
    weights: tuple
    off_equilibrium: bool = field(default=False, compare=False)

    @staticmethod
    def from_pairs(pairs, off_equilibrium=False):
        merged = merge_pairs(pairs)
        return PublicBelief(tuple(a for a, _ in merged),
                            tuple(w for _, w in merged),
                            off_equilibrium=off_equilibrium)

    def pairs(self):
        return list(zip(self.atoms, self.weights))

    def support(self, tol=WEIGHT_PRUNE_TOL):
        return [(a, w) for a, w in zip(self.atoms, self.weights) if w > tol]

    def validate(self):
        for a in self.atoms:
            check_belief(a)
        if any(w < 0 for w in self.weights):
            raise ValueError("negative atom weight")
        if abs(sum(self.weights) - 1.0) > DIST_SUM_TOL:
            raise ValueError(f"atom weights sum to {sum(self.weights)!r}")


def point_mass(xi):
    return PublicBelief((tuple(xi),), (1.0,))


@dataclass(frozen=True)
class JointPublicBelief:
    """Vector of per-player public beliefs; the joint belief is their product."""

    players: tuple

    @property
    def off_equilibrium(self):
        return any(p.off_equilibrium for p in self.players)

    def validate(self):
        for p in self.players:
            p.validate()


def mean_belief(pi):
    """Weighted average of a public belief's atoms, as a vector over own states."""
    n = len(pi.atoms[0])
    out = [0.0] * n
    for atom, w in zip(pi.atoms, pi.weights):
        for k in range(n):
            out[k] += w * atom[k]
    return tuple(out)


def private_update(xi, w, a, spec, player):
    """One exact Bayes step for a private belief: propagate through the own-state
    transition under joint action ``a``, then condition on observation ``w``."""
    aj = a if isinstance(a, int) else spec.joint_action_index(a)
    pred = np.asarray(xi) @ spec.transition[player][:, aj, :]
    num = pred * spec.observation[player][:, aj, w]
    z = num.sum()
    if z <= 0.0:
        raise ImpossibleObservationError(
            f"player {player}: observation {w} has zero predictive probability")
    return tuple(float(v) for v in num / z)


def private_kernel(xi, a, spec, player):
    """Distribution over next private beliefs induced by joint action ``a``.

    Returns (belief, probability) pairs with atoms merged within tolerance;
    probabilities sum to 1.
    """
    aj = a if isinstance(a, int) else spec.joint_action_index(a)
    pred = np.asarray(xi) @ spec.transition[player][:, aj, :]
    pairs = []
    for w in range(spec.obs_sizes[player]):
        num = pred * spec.observation[player][:, aj, w]
        z = float(num.sum())
        if z <= 0.0:
            continue
        pairs.append((tuple(float(v) for v in num / z), z))
    return merge_pairs(pairs, prune=False)


def public_update(pi, gamma, a, spec, player):
    """Public-belief update for one player given prescription ``gamma`` and the
    realized joint action ``a``.

    On-equilibrium: atoms are reweighted by gamma's probability of the realized
    own action, then propagated through the private-belief kernel.  When the
    realized own action has zero probability under gamma, the reweighting is
    skipped (all atoms propagate with their prior weights) and the result is
    flagged ``off_equilibrium``.
    """
    ai = a[player]
    sel = [w * gamma.action_prob(atom, ai) for atom, w in zip(pi.atoms, pi.weights)]
    z = sum(sel)
    off = z <= 0.0
    base = pi.weights if off else [s / z for s in sel]
    pairs = []
    for atom, w in zip(pi.atoms, base):
        if w <= 0.0:
            continue
        for nxt, q in private_kernel(atom, a, spec, player):
            pairs.append((nxt, w * q))
    return PublicBelief.from_pairs(pairs, off_equilibrium=off)


def joint_public_update(joint, prescriptions, a, spec):
    """Componentwise public update; the product structure is preserved."""
    return JointPublicBelief(tuple(
        public_update(joint.players[i], prescriptions[i], a, spec, i)
        for i in range(spec.num_players)))


# ---------------------------------------------------------------------------
# Prescriptions

@dataclass(frozen=True)
class Prescription:
    """Map from private-belief cells to action distributions.

    The domain is a canonical simplex grid plus any exact atoms the caller
    supplies, so the map is defined for every belief: off-domain beliefs are
    assigned the nearest cell (Euclidean, ties to the lower index).
    """

    cells: tuple
    dists: tuple

    def _ensure_lookup(self):
        if getattr(self, "_lookup", None) is None:
            # reversed so the lowest index wins on (tolerance-level) collisions
            lookup = {tuple(round(c, 10) for c in cell): k
                      for k, cell in reversed(list(enumerate(self.cells)))}
            object.__setattr__(self, "_lookup", lookup)

    def cell_index(self, xi):
        self._ensure_lookup()
        hit = self._lookup.get(tuple(round(c, 10) for c in xi))
        if hit is not None:
            return hit
        cells = self.cells
        lo = bisect_left(cells, tuple(xi))
        for k in (lo - 1, lo, lo + 1):
            if 0 <= k < len(cells) and _atoms_close(cells[k], xi):
                return k
        if len(xi) == 2:
            # cells are sorted, so the Euclidean-nearest cell neighbors the
            # insertion point; ties resolve to the lower index
            best, best_d = 0, float("inf")
            for k in (lo - 1, lo):
                if 0 <= k < len(cells):
                    d = abs(cells[k][0] - xi[0])
                    if d < best_d:
                        best, best_d = k, d
            return best
        best, best_d = 0, float("inf")
        for k, cell in enumerate(cells):
            d = sum((u - v) * (u - v) for u, v in zip(cell, xi))
            if d < best_d:
                best, best_d = k, d
        return best

    def action_dist(self, xi):
        return self.dists[self.cell_index(xi)]

    def action_prob(self, xi, action):
        return self.dists[self.cell_index(xi)][action]

    def validate(self):
        for d in self.dists:
            if abs(sum(d) - 1.0) > DIST_SUM_TOL or any(p < 0 for p in d):
                raise ValueError(f"invalid action distribution {d}")


def simplex_grid(n_states, k):
    """Distributions over ``n_states`` points whose coordinates are multiples of
    1/(k-1).  For two states this is k evenly spaced scalar beliefs."""
    if k < 2:
        raise ValueError("grid size must be at least 2")
    denom = k - 1
    if n_states == 1:
        return [(1.0,)]
    points = []
    for bars in itertools.combinations(range(denom + n_states - 1), n_states - 1):
        prev, counts = -1, []
        for b in bars:
            counts.append(b - prev - 1)
            prev = b
        counts.append(denom + n_states - 2 - prev)
        points.append(tuple(c / denom for c in counts))
        if len(points) > 200_000:
            raise ValueError("simplex grid too large")
    return sorted(points)


def prescription_cells(spec, player, extra_cells=(), grid_k=51):
    """Canonical cell set: the uniform grid plus the given exact atoms, sorted,
    deduplicated within the atom-merge tolerance."""
    candidates = sorted(set(simplex_grid(spec.state_sizes[player], grid_k))
                        | {tuple(a) for a in extra_cells})
    out = []
    for c in candidates:
        if out and _atoms_close(out[-1], c):
            continue
        out.append(c)
    return tuple(out)


def make_prescription(rule_fn, spec, player, extra_cells=(), grid_k=51):
    """Materialize a belief->action-distribution rule on the canonical cells."""
    cells = prescription_cells(spec, player, extra_cells, grid_k)
    dists = tuple(tuple(rule_fn(c)) for c in cells)
    return Prescription(cells, dists)


def constant_prescription(spec, player, action, extra_cells=(), grid_k=51):
    n = spec.action_sizes[player]
    dist = tuple(1.0 if a == action else 0.0 for a in range(n))
    return make_prescription(lambda _: dist, spec, player, extra_cells, grid_k)


def pure_prescription(cells, actions, num_actions):
    """Prescription assigning a deterministic action per cell."""
    dists = tuple(tuple(1.0 if a == act else 0.0 for a in range(num_actions))
                  for act in actions)
    return Prescription(tuple(cells), dists)


# ---------------------------------------------------------------------------
# Canonical identifiers (memoization, determinism)

def canonical_belief_key(pi):
    return tuple((tuple(round(c, 12) for c in atom), round(w, 12))
                 for atom, w in zip(pi.atoms, pi.weights))


def canonical_id(joint):
    """Deterministic identifier for a joint public belief: atoms sorted, weights
    rounded to 12 decimals, hashed.  Ignores off-equilibrium flags."""
    key = tuple(canonical_belief_key(p) for p in joint.players)
    return hashlib.sha1(repr(key).encode()).hexdigest()[:16]
