"""Binary investment game: static two-valued states observed through a binary
symmetric channel, investment rewards weighting own state against the team
average, the analytic cascade region, closed-form in-cascade values, the
one-step belief drift, and seeded Monte Carlo simulation.

State index 0 means state -1 and index 1 means state +1.  Observation symbol
index 1 is the +1-indicative symbol: P(w=-1 | x=+1) = p, where the crossover p
depends on the player's own previous action (p1 when it invested, p0 when not).
Scalar beliefs denote the probability of the +1 state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beliefs import JointPublicBelief, mean_belief, point_mass
from .game import GameSpec

STATE_VALUES = (-1.0, 1.0)


@dataclass(frozen=True)
class InvestmentParams:
    num_players: int
    horizon: int
    lam: float
    p0: float
    p1: float = None

    def __post_init__(self):
        if self.p1 is None:
            object.__setattr__(self, "p1", self.p0)
        if self.num_players < 1:
            raise ValueError(f"need at least one player, got {self.num_players}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must be in [0, 1], got {self.lam}")
        if not 0.0 <= self.p1 <= self.p0 < 0.5:
            raise ValueError(
                f"need 0 <= p1 <= p0 < 0.5, got p0={self.p0}, p1={self.p1}")

    def crossover(self, own_action):
        return self.p1 if own_action == 1 else self.p0


def build_spec(params):
    """Tabular game for the investment model: identity state transition
    (static flag set), action-dependent BSC observations, reward
    a_i * (lam * x_i + (1 - lam) * avg of others' states)."""
    n, lam = params.num_players, params.lam
    sizes = (2,) * n
    num_aj = 2 ** n
    actions = [tuple((aj >> (n - 1 - k)) & 1 for k in range(n)) for aj in range(num_aj)]
    states = [tuple((xj >> (n - 1 - k)) & 1 for k in range(n)) for xj in range(num_aj)]

    transition = []
    observation = []
    reward = []
    for i in range(n):
        tr = np.zeros((2, num_aj, 2))
        ob = np.zeros((2, num_aj, 2))
        for aj, a in enumerate(actions):
            p = params.crossover(a[i])
            for x in range(2):
                tr[x, aj, x] = 1.0
            ob[0, aj, 0] = 1.0 - p
            ob[0, aj, 1] = p
            ob[1, aj, 0] = p
            ob[1, aj, 1] = 1.0 - p
        rw = np.zeros((num_aj, num_aj))
        for xj, x in enumerate(states):
            for aj, a in enumerate(actions):
                own = STATE_VALUES[x[i]]
                if n > 1:
                    social = sum(STATE_VALUES[x[j]] for j in range(n) if j != i) / (n - 1)
                else:
                    social = 0.0
                rw[xj, aj] = a[i] * (lam * own + (1.0 - lam) * social)
        transition.append(tr)
        observation.append(ob)
        reward.append(rw)

    return GameSpec(
        num_players=n,
        horizon=params.horizon,
        state_sizes=sizes,
        obs_sizes=sizes,
        action_sizes=sizes,
        transition=tuple(transition),
        observation=tuple(observation),
        reward=tuple(reward),
        prior=tuple(np.array([0.5, 0.5]) for _ in range(n)),
        static_states=True,
    )


def scalar_mean(pi):
    return mean_belief(pi)[1]


def hat_xi(pi_others):
    """Average of the other players' public mean beliefs about the +1 state."""
    if not pi_others:
        return 0.5
    return sum(scalar_mean(p) for p in pi_others) / len(pi_others)


def in_analytic_cascade(joint_pi, a, params):
    """Weak-inequality membership test of the analytic cascade region for joint
    action ``a``: a non-investor must see lam + (1-lam)(2*hat-1) <= 0, an
    investor must see -lam + (1-lam)(2*hat-1) >= 0, for every player."""
    n = params.num_players
    lam = params.lam
    for i in range(n):
        others = [joint_pi.players[j] for j in range(n) if j != i]
        social = (1.0 - lam) * (2.0 * hat_xi(others) - 1.0) if n > 1 else 0.0
        if a[i] == 0:
            if not lam + social <= 0.0:
                return False
        else:
            if not -lam + social >= 0.0:
                return False
    return True


def cascade_value(params, t, xi, hat, a_i):
    """Closed-form continuation value inside a constant cascade: the number of
    remaining stages times the per-stage investment margin."""
    if params.num_players > 1:
        social = (1.0 - params.lam) * (2.0 * hat - 1.0)
    else:
        social = 0.0
    return (params.horizon - t + 1) * (params.lam * (2.0 * xi - 1.0) + social) * a_i


def drift(xi, p):
    """Expected one-step change of the scalar private belief given the true
    state is +1; strictly positive away from the endpoints when p < 1/2."""
    num = xi * (1.0 - xi) ** 2 * (1.0 - 2.0 * p) ** 2
    if num == 0.0:
        return 0.0
    den = (xi * p + (1.0 - xi) * (1.0 - p)) * (xi * (1.0 - p) + (1.0 - xi) * p)
    return num / den


def scalar_update(xi, w, p):
    """Bayes update of the scalar belief for observation symbol w in {0, 1}."""
    if w == 1:
        num = xi * (1.0 - p)
        den = num + (1.0 - xi) * p
    else:
        num = xi * p
        den = num + (1.0 - xi) * (1.0 - p)
    return num / den


@dataclass
class Trajectory:
    states: tuple            # per player, state index in {0, 1}
    xi: list                 # per player, scalar belief path of length T+1
    actions: list            # per stage, joint action tuple
    in_cascade: list         # per stage, per player bool (realized-action test)
    entry_time: dict         # flat constant profile -> first stage in region, or 0
    node_ids: list = None    # rule mode only: public node per stage


@dataclass
class SimulationResult:
    params: InvestmentParams
    num_traj: int
    seed: int
    trajectories: list
    stats: dict


def _sample_from(rng, weights):
    u = rng.random()
    acc = 0.0
    for k, w in enumerate(weights):
        acc += w
        if u < acc:
            return k
    return len(weights) - 1


def _policy_action(policy, player, t, xi):
    if callable(policy):
        return policy(player, t, xi)
    return policy[player]


def monte_carlo(params, rule=None, policy=None, num_traj=1, seed=0, force_states=None):
    """Simulate trajectories of the investment game under a solved rule or a
    fixed policy (constant joint action tuple, or callable(player, t, xi)).

    Per trajectory: draw each player's initial private belief from the root
    public belief (the prior point mass in policy mode), draw the static state
    from it unless forced, then per stage act, observe through the BSC with the
    action-dependent crossover, and update beliefs.  Trajectory k uses the
    derived seed (seed, k), so results are reproducible and order-independent.
    """
    if (rule is None) == (policy is None):
        raise ValueError("exactly one of rule or policy must be given")
    n, T = params.num_players, params.horizon
    spec = rule.spec if rule is not None else None
    joint_actions = [tuple((aj >> (n - 1 - k)) & 1 for k in range(n))
                     for aj in range(2 ** n)]

    if rule is not None:
        root = rule.node(rule.root_id).belief
    else:
        root = JointPublicBelief(tuple(point_mass((0.5, 0.5)) for _ in range(n)))

    def node_belief(nid):
        return rule.node(nid).belief

    def cascade_flags(joint_pi, a):
        flags = []
        for i in range(n):
            others = [joint_pi.players[j] for j in range(n) if j != i]
            social = (1.0 - params.lam) * (2.0 * hat_xi(others) - 1.0) if n > 1 else 0.0
            if a[i] == 0:
                flags.append(params.lam + social <= 0.0)
            else:
                flags.append(-params.lam + social >= 0.0)
        return tuple(flags)

    trajectories = []
    for k in range(num_traj):
        rng = np.random.default_rng([seed, k])
        xi0 = []
        for i in range(n):
            comp = root.players[i]
            atom = comp.atoms[_sample_from(rng, comp.weights)]
            xi0.append(float(atom[1]))
        if force_states is None:
            states = tuple(1 if rng.random() < xi0[i] else 0 for i in range(n))
        elif isinstance(force_states, int):
            states = (force_states,) * n
        else:
            states = tuple(force_states)

        xi_paths = [[xi0[i]] for i in range(n)]
        actions = []
        flags = []
        entry = {aj: 0 for aj in range(len(joint_actions))}
        node_ids = [rule.root_id] if rule is not None else None

        nid = rule.root_id if rule is not None else None
        belief = root
        xi = list(xi0)
        for t in range(1, T + 1):
            for aj, cand in enumerate(joint_actions):
                if entry[aj] == 0 and in_analytic_cascade(belief, cand, params):
                    entry[aj] = t
            a = []
            for i in range(n):
                if rule is not None:
                    dist = rule.node(nid).prescriptions[i].action_dist((1.0 - xi[i], xi[i]))
                    a.append(_sample_from(rng, dist))
                else:
                    a.append(_policy_action(policy, i, t, xi[i]))
            a = tuple(a)
            actions.append(a)
            flags.append(cascade_flags(belief, a))
            for i in range(n):
                p = params.crossover(a[i])
                flip = rng.random() < p
                w = (1 - states[i]) if flip else states[i]
                xi[i] = scalar_update(xi[i], w, p)
                xi_paths[i].append(xi[i])
            if rule is not None and t < T:
                aflat = spec.joint_action_index(a)
                nid = rule.node(nid).children[aflat]
                node_ids.append(nid)
                belief = node_belief(nid)

        trajectories.append(Trajectory(states, xi_paths, actions, flags, entry, node_ids))

    stats = _aggregate(params, trajectories, joint_actions)
    return SimulationResult(params, num_traj, seed, trajectories, stats)


def _aggregate(params, trajectories, joint_actions):
    n, T = params.num_players, params.horizon
    lam = params.lam
    plus_total = plus_high = 0
    gap_sum = 0.0
    good = bad = 0
    entry_hist = {aj: {} for aj in range(len(joint_actions))}
    for tr in trajectories:
        for i in range(n):
            terminal = tr.xi[i][-1]
            target = 1.0 if tr.states[i] == 1 else 0.0
            gap_sum += abs(terminal - target)
            if tr.states[i] == 1:
                plus_total += 1
                if terminal > 0.99:
                    plus_high += 1
        for aj, t in tr.entry_time.items():
            if t:
                entry_hist[aj][t] = entry_hist[aj].get(t, 0) + 1
        last_a = tr.actions[-1]
        if all(tr.in_cascade[-1]):
            optimal = []
            for i in range(n):
                own = STATE_VALUES[tr.states[i]]
                if n > 1:
                    social = sum(STATE_VALUES[tr.states[j]]
                                 for j in range(n) if j != i) / (n - 1)
                else:
                    social = 0.0
                optimal.append(1 if lam * own + (1.0 - lam) * social >= 0.0 else 0)
            if tuple(optimal) == last_a:
                good += 1
            else:
                bad += 1
    total_players = len(trajectories) * n
    return {
        "mean_terminal_gap": gap_sum / total_players if total_players else 0.0,
        "frac_high_given_plus": (plus_high / plus_total) if plus_total else 0.0,
        "num_plus_states": plus_total,
        "good_cascades": good,
        "bad_cascades": bad,
        "entry_time_hist": entry_hist,
    }
