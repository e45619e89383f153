"""Equilibrium computation by backward fixed-point recursion over the reachable
public-belief tree, plus forward construction and deviation verification.

Each node of the tree is a joint public belief at a stage.  Solving a node means
finding a pure prescription profile that is a per-cell best response to itself,
where the profile is also fixed inside the belief update that generates the
children.  Values are evaluated lazily at exact private beliefs, so closed-form
value checks can be made at tight tolerances without grid error.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field

from .beliefs import (
    JointPublicBelief,
    canonical_id,
    joint_public_update,
    prescription_cells,
    private_kernel,
    pure_prescription,
)


@dataclass(frozen=True)
class SolverConfig:
    grid_k: int = 51
    tolerance: float = 1e-9
    max_iterations: int = 100
    max_nodes: int = 50_000
    enumeration_limit: int = 2048
    multi_stage_horizon: int = 3
    memoize: bool = True
    # None = closure when the horizon is within multi_stage_horizon.  With the
    # closure on, each child's prescription domain inherits the Bayes images of
    # the parent's domain cells, so prescriptions are optimal at every private
    # belief a deviation can reach and multi-stage deviation checks are exact.
    deviation_closure: bool = None

    def closure_active(self, horizon):
        if self.deviation_closure is None:
            return horizon <= self.multi_stage_horizon
        return self.deviation_closure


class SolverError(Exception):
    pass


class FixedPointError(SolverError):
    """No pure prescription profile met the fixed-point tolerance at some node."""

    def __init__(self, message, residual=None, node=None):
        super().__init__(message)
        self.residual = residual
        self.node = node


class BudgetError(SolverError):
    pass


class UnsolvedHistoryError(SolverError):
    pass


def _round_belief(xi):
    return tuple(round(c, 12) for c in xi)


@dataclass
class SolvedNode:
    node_id: str
    t: int
    belief: JointPublicBelief
    prescriptions: tuple
    children: dict = field(default_factory=dict)
    child_off: dict = field(default_factory=dict)
    residual: float = 0.0


class _ProfileEval:
    """Expected payoff of one own action at one node under a fixed profile.

    Precomputes, per player and own action, the others' reward-weighted measure
    (the per-player tables carry prescription weight times state probability, so
    others' actions and states stay correlated through their belief atoms) and
    the others' total action probabilities used to weight continuations.
    ``child_value`` maps (flat joint action, player, next private belief) to the
    continuation value; None at the last stage.
    """

    def __init__(self, spec, joint, prescriptions, child_value, kernel):
        self.spec = spec
        self.child_value = child_value
        self.kernel = kernel
        n = spec.num_players
        M = []
        A = []
        for j in range(n):
            pi = joint.players[j]
            na, ns = spec.action_sizes[j], spec.state_sizes[j]
            tab = [[0.0] * ns for _ in range(na)]
            for atom, w in zip(pi.atoms, pi.weights):
                dist = prescriptions[j].action_dist(atom)
                for a in range(na):
                    ga = w * dist[a]
                    if ga > 0.0:
                        for x in range(ns):
                            tab[a][x] += ga * atom[x]
            M.append(tab)
            A.append([sum(row) for row in tab])

        joint_actions = spec.joint_actions()
        joint_states = spec.joint_states()
        state_idx = [spec.joint_state_index(x) for x in joint_states]
        # reward_vec[i][a_i][x_i] and cont[i][a_i] = [(flat joint action, others' weight)]
        self.reward_vec = []
        self.cont = []
        for i in range(n):
            rv = [[0.0] * spec.state_sizes[i] for _ in range(spec.action_sizes[i])]
            ct = [[] for _ in range(spec.action_sizes[i])]
            for aflat, a in enumerate(joint_actions):
                wo = 1.0
                for j in range(n):
                    if j != i:
                        wo *= A[j][a[j]]
                ct[a[i]].append((aflat, wo))
                if wo == 0.0:
                    continue
                rtab = spec.reward[i]
                for x, xflat in zip(joint_states, state_idx):
                    m = 1.0
                    for j in range(n):
                        if j != i:
                            m *= M[j][a[j]][x[j]]
                    if m > 0.0:
                        rv[a[i]][x[i]] += m * rtab[xflat, aflat]
            self.reward_vec.append(rv)
            self.cont.append(ct)

    def payoff(self, player, xi, own_action):
        rv = self.reward_vec[player][own_action]
        total = 0.0
        for k, p in enumerate(xi):
            if p:
                total += p * rv[k]
        if self.child_value is not None:
            for aflat, wo in self.cont[player][own_action]:
                if wo == 0.0:
                    continue
                c = 0.0
                for nxt, q in self.kernel(player, aflat, xi):
                    c += q * self.child_value(aflat, player, nxt)
                total += wo * c
        return total


def _br_pass(ev, spec, cells, actions):
    """One best-response sweep.  Returns (new actions, max gain vs current)."""
    new = []
    gain = 0.0
    for i in range(spec.num_players):
        row = []
        for k, cell in enumerate(cells[i]):
            vals = [ev.payoff(i, cell, a) for a in range(spec.action_sizes[i])]
            best = 0
            for a in range(1, len(vals)):
                if vals[a] > vals[best]:
                    best = a
            row.append(best)
            g = vals[best] - vals[actions[i][k]]
            if g > gain:
                gain = g
        new.append(row)
    return new, gain


def _domain_cells(spec, config, joint, inherited=None):
    return [prescription_cells(
        spec, i,
        extra_cells=([a for a, _ in joint.players[i].support()]
                     + (list(inherited[i]) if inherited else [])),
        grid_k=config.grid_k)
        for i in range(spec.num_players)]


def _fixed_point(spec, config, joint, make_cv, kernel, cells=None):
    """Solve one stage: find a pure profile that best-responds to itself.

    ``make_cv(prescriptions)`` returns (aux, child_value); child_value is None
    at the last stage.  Iterated best response from the myopic profile, then
    enumeration over supported-cell action assignments if iteration cycles.
    Returns (cells, prescriptions, aux, ev, residual).
    """
    n = spec.num_players
    if cells is None:
        cells = _domain_cells(spec, config, joint)
    support_idx = []
    for i in range(n):
        atoms = {_round_belief(a) for a, _ in joint.players[i].support()}
        support_idx.append(tuple(k for k, c in enumerate(cells[i])
                                 if _round_belief(c) in atoms))

    def build(actions):
        return tuple(pure_prescription(cells[i], actions[i], spec.action_sizes[i])
                     for i in range(n))

    # phase 1: myopic profile, continuation ignored
    actions = [[0] * len(cells[i]) for i in range(n)]
    seen = set()
    for _ in range(config.max_iterations):
        ev = _ProfileEval(spec, joint, build(actions), None, kernel)
        new, _ = _br_pass(ev, spec, cells, actions)
        if new == actions:
            break
        sig = tuple(map(tuple, new))
        if sig in seen:
            break
        seen.add(sig)
        actions = new

    # phase 2: full best response with continuation
    seen = set()
    converged = False
    for _ in range(config.max_iterations):
        prescriptions = build(actions)
        aux, cv = make_cv(prescriptions)
        ev = _ProfileEval(spec, joint, prescriptions, cv, kernel)
        new, gain = _br_pass(ev, spec, cells, actions)
        if new == actions:
            converged = True
            residual = gain
            break
        sig = tuple(map(tuple, new))
        if sig in seen:
            break
        seen.add(sig)
        actions = new

    if not converged:
        # enumerate action assignments on supported cells only: off-support
        # cells carry no weight, so they affect neither the belief update nor
        # other players and can be filled in by best response afterward
        slots = [(i, k) for i in range(n) for k in support_idx[i]]
        count = 1
        for i, _ in slots:
            count *= spec.action_sizes[i]
        if count > config.enumeration_limit:
            raise FixedPointError(
                f"no pure fixed point found: enumeration over {count} supported "
                f"assignments exceeds limit {config.enumeration_limit}",
                residual=None)
        best_res = float("inf")
        found = None
        for assign in itertools.product(*(range(spec.action_sizes[i]) for i, _ in slots)):
            trial = [[0] * len(cells[i]) for i in range(n)]
            for val, (i, k) in zip(assign, slots):
                trial[i][k] = val
            prescriptions = build(trial)
            aux, cv = make_cv(prescriptions)
            ev = _ProfileEval(spec, joint, prescriptions, cv, kernel)
            new, _ = _br_pass(ev, spec, cells, trial)
            res = 0.0
            for i, k in slots:
                gap = (ev.payoff(i, cells[i][k], new[i][k])
                       - ev.payoff(i, cells[i][k], trial[i][k]))
                if gap > res:
                    res = gap
            if res < best_res:
                best_res = res
            if res <= config.tolerance:
                merged = [list(row) for row in new]
                for val, (i, k) in zip(assign, slots):
                    merged[i][k] = val
                actions = merged
                found = (build(actions), aux, res)
                break
        if found is None:
            raise FixedPointError(
                f"no pure fixed point found: best residual {best_res!r}",
                residual=best_res)
        prescriptions, aux, residual = found
        _, cv = make_cv(prescriptions)
        ev = _ProfileEval(spec, joint, prescriptions, cv, kernel)

    return cells, prescriptions, aux, ev, residual


class _Solver:
    def __init__(self, spec, config):
        self.spec = spec
        self.config = config
        self.nodes = {}
        self.memo = {}
        self._kernel_cache = {}
        self._value_cache = {}
        self._eval_cache = {}

    def kernel(self, player, aflat, xi):
        key = (player, aflat, _round_belief(xi))
        hit = self._kernel_cache.get(key)
        if hit is None:
            hit = tuple(private_kernel(xi, aflat, self.spec, player))
            self._kernel_cache[key] = hit
        return hit

    def value(self, node_id, player, xi):
        key = (node_id, player, _round_belief(xi))
        hit = self._value_cache.get(key)
        if hit is not None:
            return hit
        node = self.nodes[node_id]
        ev = self.node_eval(node)
        dist = node.prescriptions[player].action_dist(xi)
        v = 0.0
        for a, p in enumerate(dist):
            if p:
                v += p * ev.payoff(player, xi, a)
        self._value_cache[key] = v
        return v

    def node_eval(self, node):
        ev = self._eval_cache.get(node.node_id)
        if ev is None:
            cv = None
            if node.children:
                children = node.children

                def cv(aflat, pl, nxt, children=children):
                    return self.value(children[aflat], pl, nxt)

            ev = _ProfileEval(self.spec, node.belief, node.prescriptions, cv, self.kernel)
            self._eval_cache[node.node_id] = ev
        return ev

    def solve_node(self, t, joint, inherited=None):
        cid = canonical_id(joint)
        if inherited is not None:
            blob = repr(tuple(tuple(_round_belief(c) for c in comp)
                              for comp in inherited)).encode()
            cid = cid + ":" + hashlib.sha1(blob).hexdigest()[:8]
        key = (t, cid)
        if self.config.memoize and key in self.memo:
            return self.memo[key]
        if len(self.nodes) >= self.config.max_nodes:
            raise BudgetError(f"node budget exceeded at {len(self.nodes)} nodes")
        node_id = f"t{t}:{cid}"
        if not self.config.memoize and node_id in self.nodes:
            node_id = f"{node_id}#{len(self.nodes)}"
        spec = self.spec
        joint_actions = spec.joint_actions()
        cells = _domain_cells(spec, self.config, joint, inherited)
        closure = self.config.closure_active(spec.horizon)

        inherit_cache = {}

        def child_inherited(aflat):
            if aflat in inherit_cache:
                return inherit_cache[aflat]
            # Bayes images of every parent domain cell under this joint action:
            # the private beliefs a (possibly deviating) player can hold at the
            # child, which its prescription must therefore cover
            out = []
            for i in range(spec.num_players):
                seen = {}
                for c in cells[i]:
                    for nxt, _ in self.kernel(i, aflat, c):
                        seen[_round_belief(nxt)] = nxt
                out.append(tuple(seen[k] for k in sorted(seen)))
            inherit_cache[aflat] = out
            return out

        def make_cv(prescriptions):
            if t == spec.horizon:
                return ({}, {}), None
            kids = {}
            off = {}
            for aflat, a in enumerate(joint_actions):
                child = joint_public_update(joint, prescriptions, a, spec)
                off[aflat] = child.off_equilibrium
                extra = child_inherited(aflat) if closure else None
                kids[aflat] = self.solve_node(t + 1, child, extra)

            def cv(aflat, pl, nxt, kids=kids):
                return self.value(kids[aflat], pl, nxt)

            return (kids, off), cv

        try:
            _, prescriptions, (kids, off), ev, residual = _fixed_point(
                spec, self.config, joint, make_cv, self.kernel, cells)
        except FixedPointError as exc:
            if exc.node is None:
                exc.node = node_id
            raise
        node = SolvedNode(node_id, t, joint, prescriptions, kids, off, residual)
        self.nodes[node_id] = node
        self._eval_cache[node_id] = ev
        self.memo[key] = node_id
        return node_id


class ValueFn:
    """Lazy equilibrium value accessor V(node, player, private belief)."""

    def __init__(self, solver):
        self._solver = solver

    def __call__(self, node_id, player, xi):
        return self._solver.value(node_id, player, tuple(xi))


class EquilibriumRule:
    """Solved prescription profiles over the reachable public-belief tree."""

    def __init__(self, spec, config, solver, root_id):
        self.spec = spec
        self.config = config
        self._solver = solver
        self.root_id = root_id
        self.values = ValueFn(solver)

    @property
    def nodes(self):
        return self._solver.nodes

    def node(self, node_id):
        return self._solver.nodes[node_id]

    def value(self, node_id, player, xi):
        return self._solver.value(node_id, player, tuple(xi))

    def invalidate_cache(self):
        """Drop cached node evaluations and values; required after mutating a
        stored node (corruption experiments in deviation testing)."""
        self._solver._value_cache.clear()
        self._solver._eval_cache.clear()

    def reachable_ids(self):
        """Node ids reachable from the root via child links, sorted by stage."""
        seen = {self.root_id}
        frontier = [self.root_id]
        while frontier:
            nid = frontier.pop()
            for child in self.nodes[nid].children.values():
                if child not in seen:
                    seen.add(child)
                    frontier.append(child)
        return sorted(seen, key=lambda n: (self.nodes[n].t, n))

    def max_residual(self):
        return max(self.nodes[n].residual for n in self.reachable_ids())

    def to_jsonable(self):
        out = []
        for nid in self.reachable_ids():
            node = self.nodes[nid]
            belief = []
            for comp in node.belief.players:
                belief.append({
                    "atoms": [list(a) for a in comp.atoms],
                    "weights": list(comp.weights),
                    "off_equilibrium": comp.off_equilibrium,
                })
            prescriptions = []
            values = []
            for i, gam in enumerate(node.prescriptions):
                prescriptions.append({
                    "cells": [list(c) for c in gam.cells],
                    "dists": [list(d) for d in gam.dists],
                })
                comp = node.belief.players[i]
                values.append({
                    "atoms": [list(a) for a, _ in comp.support()],
                    "values": [self.value(nid, i, a) for a, _ in comp.support()],
                })
            out.append({
                "id": nid,
                "t": node.t,
                "belief": belief,
                "prescriptions": prescriptions,
                "children": {str(a): c for a, c in sorted(node.children.items())},
                "child_off_equilibrium": {str(a): o for a, o in sorted(node.child_off.items())},
                "residual": node.residual,
                "values": values,
            })
        return {"root": self.root_id, "num_nodes": len(out), "nodes": out}


def root_from_priors(spec):
    from .beliefs import point_mass
    return JointPublicBelief(tuple(point_mass(spec.prior[i]) for i in range(spec.num_players)))


def backward_solve(spec, pi_root=None, config=None):
    """Solve the reachable belief tree from ``pi_root`` (default: point mass on
    the priors).  Returns an EquilibriumRule whose every node satisfies the
    stage fixed-point contract within the configured tolerance."""
    config = config or SolverConfig()
    if pi_root is None:
        pi_root = root_from_priors(spec)
    solver = _Solver(spec, config)
    root_id = solver.solve_node(1, pi_root)
    return EquilibriumRule(spec, config, solver, root_id)


def stage_payoff(player, pi, own_cell, own_dist, profile, v_next, spec, last_stage=False):
    """Expected reward plus continuation for one player playing ``own_dist`` at
    private belief ``own_cell``, while everyone (including this player inside
    the belief update) is treated as following ``profile``.

    ``v_next(child_joint, player, xi)`` supplies continuation values; pass
    None (or last_stage=True) for a terminal stage.
    """
    solver_kernel = _KernelCache(spec)
    cv = None
    if v_next is not None and not last_stage:
        children = {aflat: joint_public_update(pi, profile, a, spec)
                    for aflat, a in enumerate(spec.joint_actions())}

        def cv(aflat, pl, nxt):
            return v_next(children[aflat], pl, nxt)

    ev = _ProfileEval(spec, pi, profile, cv, solver_kernel)
    total = 0.0
    for a, p in enumerate(own_dist):
        if p:
            total += p * ev.payoff(player, tuple(own_cell), a)
    return total


class _KernelCache:
    def __init__(self, spec):
        self.spec = spec
        self.cache = {}

    def __call__(self, player, aflat, xi):
        key = (player, aflat, _round_belief(xi))
        hit = self.cache.get(key)
        if hit is None:
            hit = tuple(private_kernel(xi, aflat, self.spec, player))
            self.cache[key] = hit
        return hit


def solve_stage(t, pi, v_next, spec, config=None):
    """Solve the single-stage fixed point at belief ``pi`` given continuation
    accessor ``v_next`` (None at the last stage).  Returns (prescription
    profile, per-player dict cell -> stage value)."""
    config = config or SolverConfig()
    kernel = _KernelCache(spec)

    def make_cv(prescriptions):
        if v_next is None or t == spec.horizon:
            return None, None
        children = {aflat: joint_public_update(pi, prescriptions, a, spec)
                    for aflat, a in enumerate(spec.joint_actions())}

        def cv(aflat, pl, nxt, children=children):
            return v_next(children[aflat], pl, nxt)

        return children, cv

    cells, prescriptions, _aux, ev, _residual = _fixed_point(spec, config, pi, make_cv, kernel)
    values = []
    for i in range(spec.num_players):
        vals = {}
        for cell in cells[i]:
            dist = prescriptions[i].action_dist(cell)
            vals[cell] = sum(p * ev.payoff(i, cell, a) for a, p in enumerate(dist) if p)
        values.append(vals)
    return prescriptions, values


class ForwardProfile:
    """Equilibrium strategy and belief path indexed by joint-action histories."""

    def __init__(self, rule, spec):
        self.rule = rule
        self.spec = spec

    def node_id_for(self, history):
        nid = self.rule.root_id
        for step, a in enumerate(history):
            aflat = a if isinstance(a, int) else self.spec.joint_action_index(a)
            node = self.rule.node(nid)
            if aflat not in node.children:
                raise UnsolvedHistoryError(
                    f"history step {step} (joint action {a}) leaves the solved "
                    f"tree at node {nid}")
            nid = node.children[aflat]
        return nid

    def belief(self, history):
        return self.rule.node(self.node_id_for(history)).belief

    def strategy(self, history):
        return self.rule.node(self.node_id_for(history)).prescriptions


def forward_construct(rule, spec=None):
    return ForwardProfile(rule, spec or rule.spec)


def verify_equilibrium(rule, spec=None, pi_root=None):
    """Maximum best-response gain over all reachable nodes, players and domain
    cells: single-stage deviations everywhere, and full multi-stage deviations
    when the horizon is within the configured multi-stage depth.  A value at or
    below 1e-8 certifies the profile."""
    spec = spec or rule.spec
    solver = rule._solver
    max_gain = 0.0
    reachable = rule.reachable_ids()
    for nid in reachable:
        node = rule.node(nid)
        ev = solver.node_eval(node)
        for i in range(spec.num_players):
            for cell in node.prescriptions[i].cells:
                best = max(ev.payoff(i, cell, a) for a in range(spec.action_sizes[i]))
                gain = best - rule.value(nid, i, cell)
                if gain > max_gain:
                    max_gain = gain

    if spec.horizon <= rule.config.multi_stage_horizon:
        br_memo = {}
        br_evals = {}

        def br(nid, player, xi):
            key = (nid, player, _round_belief(xi))
            hit = br_memo.get(key)
            if hit is not None:
                return hit
            node = rule.node(nid)
            ev = br_evals.get(nid)
            if ev is None:
                cv = None
                if node.children:
                    children = node.children

                    def cv(aflat, pl, nxt, children=children):
                        return br(children[aflat], pl, nxt)

                ev = _ProfileEval(spec, node.belief, node.prescriptions, cv, solver.kernel)
                br_evals[nid] = ev
            v = max(ev.payoff(player, xi, a) for a in range(spec.action_sizes[player]))
            br_memo[key] = v
            return v

        for nid in reachable:
            node = rule.node(nid)
            for i in range(spec.num_players):
                for cell in node.prescriptions[i].cells:
                    gain = br(nid, i, cell) - rule.value(nid, i, cell)
                    if gain > max_gain:
                        max_gain = gain
    return max_gain
