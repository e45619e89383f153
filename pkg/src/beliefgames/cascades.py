"""Cascade detection: belief-based recursive definition, history-based
definition over the forward profile, and the equivalence spot-check between the
two.

A belief node is cascading for an action sequence when every player's
prescription puts probability one on the prescribed action at every support
atom, and the updated belief is (recursively) cascading for the remainder of
the sequence.  The history-based check asks the same of the realized strategy
along every positive-probability continuation of a common history.
"""

from __future__ import annotations

from dataclasses import dataclass

PROB_ONE_TOL = 1e-9
SUPPORT_TOL = 1e-12


@dataclass(frozen=True)
class CascadeCheck:
    cascading: bool
    chain: tuple = ()
    violation: tuple = None  # (t, player, atom) of the first failing prescription


def _normalize_seq(spec, a_seq, length):
    """Accept a single joint-action profile (constant cascade) or a sequence of
    profiles; return a list of flat joint-action indices of the given length."""
    if len(a_seq) > 0 and isinstance(a_seq[0], int):
        flat = spec.joint_action_index(tuple(a_seq))
        return [flat] * length
    seq = [a if isinstance(a, int) else spec.joint_action_index(tuple(a)) for a in a_seq]
    if len(seq) != length:
        raise ValueError(f"action sequence has {len(seq)} profiles, need {length}")
    return seq


def is_cascading_belief(rule, node_id, a_seq):
    """Check the recursive belief-based cascade condition starting at a solved
    node.  ``a_seq`` is a single joint profile (repeated to the horizon) or one
    profile per remaining stage.  Returns a CascadeCheck with either the
    certified chain of node ids or the first violating (t, player, atom)."""
    spec = rule.spec
    node = rule.node(node_id)
    seq = _normalize_seq(spec, a_seq, spec.horizon - node.t + 1)
    chain = []
    nid = node_id
    for aflat in seq:
        node = rule.node(nid)
        profile = spec.joint_actions()[aflat]
        for i in range(spec.num_players):
            gam = node.prescriptions[i]
            for atom, w in node.belief.players[i].support(SUPPORT_TOL):
                if gam.action_prob(atom, profile[i]) < 1.0 - PROB_ONE_TOL:
                    return CascadeCheck(False, tuple(chain), (node.t, i, atom))
        chain.append(nid)
        if node.t < spec.horizon:
            nid = node.children[aflat]
    return CascadeCheck(True, tuple(chain), None)


def is_cascading_history(profile, rule, common_history, a_seq):
    """History-based cascade check: from the given common history onward, every
    positive-probability continuation plays the prescribed actions almost
    surely.  Walks the forward profile, checking the realized strategy at every
    support atom; once a stage passes, the only positive-probability
    continuation is the prescribed action itself."""
    spec = rule.spec
    history = [a if isinstance(a, int) else spec.joint_action_index(tuple(a))
               for a in common_history]
    t = len(history) + 1
    seq = _normalize_seq(spec, a_seq, spec.horizon - t + 1)
    for aflat in seq:
        prescriptions = profile.strategy(history)
        belief = profile.belief(history)
        joint_a = spec.joint_actions()[aflat]
        for i in range(spec.num_players):
            for atom, w in belief.players[i].support(SUPPORT_TOL):
                if prescriptions[i].action_prob(atom, joint_a[i]) < 1.0 - PROB_ONE_TOL:
                    return False
        history.append(aflat)
        if len(history) >= spec.horizon:
            break
    return True


def check_equivalence(profile, rule, histories, a_seq):
    """Compare the history-based and belief-based cascade verdicts on each of
    the given common histories.  ``a_seq`` covers absolute stages 1..T (or is a
    single constant profile); each history of depth d uses the tail from stage
    d+1.  Returns the list of mismatching histories (empty for a correct
    implementation)."""
    spec = rule.spec
    joint_actions = spec.joint_actions()
    full = _normalize_seq(spec, a_seq, spec.horizon)
    mismatches = []
    for history in histories:
        hist = [a if isinstance(a, int) else spec.joint_action_index(tuple(a))
                for a in history]
        tail = [joint_actions[f] for f in full[len(hist):]]
        if not tail:
            continue
        by_history = is_cascading_history(profile, rule, hist, tail)
        node_id = profile.node_id_for(hist)
        by_belief = is_cascading_belief(rule, node_id, tail).cascading
        if by_history != by_belief:
            mismatches.append({
                "history": tuple(hist),
                "history_based": by_history,
                "belief_based": by_belief,
            })
    return mismatches
