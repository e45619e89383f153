import numpy as np
import pytest

from beliefgames.beliefs import (
    JointPublicBelief,
    Prescription,
    PublicBelief,
    canonical_id,
    constant_prescription,
    joint_public_update,
    make_prescription,
    mean_belief,
    point_mass,
    prescription_cells,
    private_kernel,
    private_update,
    public_update,
    simplex_grid,
)
from beliefgames.investment import InvestmentParams, build_spec

from oracles import random_full_support_spec

SPEC = build_spec(InvestmentParams(2, 3, 0.5, 0.25))
ACT = (1, 1)


def threshold_prescription(player, threshold=0.5):
    # invest iff own belief in the +1 state reaches the threshold
    return make_prescription(
        lambda c: (0.0, 1.0) if c[1] >= threshold else (1.0, 0.0),
        SPEC, player)


def test_private_update_symmetric_prior():
    assert private_update((0.5, 0.5), 1, ACT, SPEC, 0) == pytest.approx((0.25, 0.75))


def test_private_update_informed_prior():
    # 0.75*0.75 / (0.75*0.75 + 0.25*0.25) = 0.9
    out = private_update((0.25, 0.75), 1, ACT, SPEC, 0)
    assert out[1] == pytest.approx(0.9, abs=1e-12)


def test_private_update_point_mass_absorbing():
    for w in (0, 1):
        assert private_update((0.0, 1.0), w, ACT, SPEC, 0)[1] == pytest.approx(1.0)


def test_private_kernel_uniform_split():
    pairs = dict(private_kernel((0.5, 0.5), ACT, SPEC, 0))
    assert len(pairs) == 2
    for atom, prob in pairs.items():
        assert prob == pytest.approx(0.5)
        assert atom[1] in (pytest.approx(0.25), pytest.approx(0.75))


def test_private_kernel_asymmetric():
    pairs = sorted(private_kernel((0.2, 0.8), ACT, SPEC, 0), key=lambda p: p[0][1])
    (lo, p_lo), (hi, p_hi) = pairs
    assert lo[1] == pytest.approx(0.5714285714285714)
    assert p_lo == pytest.approx(0.35)
    assert hi[1] == pytest.approx(0.9230769230769231)
    assert p_hi == pytest.approx(0.65)


def test_private_kernel_point_mass_merges():
    pairs = private_kernel((0.0, 1.0), ACT, SPEC, 0)
    total = sum(p for _, p in pairs)
    assert total == pytest.approx(1.0)
    merged = PublicBelief.from_pairs(pairs)
    assert len(merged.atoms) == 1
    assert merged.atoms[0][1] == pytest.approx(1.0)


def test_private_kernel_martingale_static_states():
    # with static states the expected posterior equals the prior exactly
    for xi1 in np.linspace(0.0, 1.0, 21):
        xi = (1.0 - xi1, xi1)
        for aj in range(SPEC.num_joint_actions):
            pairs = private_kernel(xi, aj, SPEC, 0)
            mean = [sum(p * a[k] for a, p in pairs) for k in range(2)]
            assert abs(mean[0] - xi[0]) <= 1e-12
            assert abs(mean[1] - xi[1]) <= 1e-12


def test_private_kernel_tower_property_controlled_states():
    # with a controlled transition the expected posterior equals the one-step
    # predicted distribution of the next state
    rng = np.random.default_rng(3)
    spec = random_full_support_spec(rng)
    for xi1 in np.linspace(0.0, 1.0, 11):
        xi = np.array([1.0 - xi1, xi1])
        for aj in range(spec.num_joint_actions):
            pred = xi @ spec.transition[0][:, aj, :]
            pairs = private_kernel(tuple(xi), aj, spec, 0)
            mean = [sum(p * a[k] for a, p in pairs) for k in range(2)]
            assert abs(mean[0] - pred[0]) <= 1e-12
            assert abs(mean[1] - pred[1]) <= 1e-12


def test_public_update_noninformative_spreads_atoms():
    pi = point_mass((0.5, 0.5))
    gam = constant_prescription(SPEC, 0, 1)
    out = public_update(pi, gam, ACT, SPEC, 0)
    assert not out.off_equilibrium
    got = {round(a[1], 6): w for a, w in out.pairs()}
    assert got[0.75] == pytest.approx(0.5)
    assert got[0.25] == pytest.approx(0.5)
    assert mean_belief(out)[1] == pytest.approx(0.5, abs=1e-15)


def test_public_update_selects_consistent_atoms():
    pi = PublicBelief.from_pairs([((0.8, 0.2), 0.5), ((0.2, 0.8), 0.5)])
    out = public_update(pi, threshold_prescription(0), ACT, SPEC, 0)
    assert not out.off_equilibrium
    got = {round(a[1], 4): w for a, w in out.pairs()}
    assert got[0.9231] == pytest.approx(0.65)
    assert got[0.5714] == pytest.approx(0.35)


def test_public_update_zero_probability_branch():
    # the observed action has probability 0 under the prescription: atoms
    # propagate unreweighted and the result is flagged
    pi = point_mass((0.8, 0.2))
    out = public_update(pi, threshold_prescription(0), ACT, SPEC, 0)
    assert out.off_equilibrium
    got = {round(a[1], 6): w for a, w in out.pairs()}
    assert got[0.428571] == pytest.approx(0.35)
    assert got[0.076923] == pytest.approx(0.65)


def test_mean_preservation_under_constant_prescriptions():
    pi = PublicBelief.from_pairs([((0.7, 0.3), 0.25), ((0.1, 0.9), 0.75)])
    for action in (0, 1):
        gam = constant_prescription(SPEC, 0, action)
        for a in SPEC.joint_actions():
            if a[0] != action:
                continue
            out = public_update(pi, gam, a, SPEC, 0)
            assert abs(mean_belief(out)[1] - mean_belief(pi)[1]) <= 1e-12


def test_joint_public_update_componentwise():
    joint = JointPublicBelief((point_mass((0.5, 0.5)), point_mass((0.2, 0.8))))
    gams = (constant_prescription(SPEC, 0, 1), constant_prescription(SPEC, 1, 1))
    out = joint_public_update(joint, gams, ACT, SPEC)
    for i in range(2):
        expected = public_update(joint.players[i], gams[i], ACT, SPEC, i)
        assert out.players[i] == expected


def test_mean_belief_examples():
    assert mean_belief(point_mass((0.2, 0.8)))[1] == pytest.approx(0.8)
    pi = PublicBelief.from_pairs([((0.8, 0.2), 0.5), ((0.4, 0.6), 0.5)])
    assert mean_belief(pi)[1] == pytest.approx(0.4)
    pi = PublicBelief.from_pairs([((1.0, 0.0), 0.5), ((0.0, 1.0), 0.5)])
    assert mean_belief(pi)[1] == pytest.approx(0.5)


def test_from_pairs_merges_and_prunes():
    eps = 1e-11
    pi = PublicBelief.from_pairs([
        ((0.5, 0.5), 0.6),
        ((0.5 + eps, 0.5 - eps), 0.4 - 1e-13),
        ((0.9, 0.1), 1e-13),
    ])
    assert len(pi.atoms) == 1
    assert pi.weights[0] == pytest.approx(1.0)


def test_simplex_grid_binary():
    grid = simplex_grid(2, 51)
    assert len(grid) == 51
    firsts = [g[0] for g in grid]
    assert firsts == sorted(firsts)
    assert firsts[0] == 0.0 and firsts[-1] == 1.0
    assert firsts[1] - firsts[0] == pytest.approx(0.02)
    for g in grid:
        assert sum(g) == pytest.approx(1.0)


def test_simplex_grid_three_states():
    grid = simplex_grid(3, 5)
    assert len(grid) == 15  # compositions of 4 into 3 parts
    for g in grid:
        assert sum(g) == pytest.approx(1.0)


def test_prescription_cell_lookup():
    cells = prescription_cells(SPEC, 0, extra_cells=[(0.305, 0.695)])
    gam = Prescription(cells, tuple((1.0, 0.0) for _ in cells))
    # exact atom present in the domain
    k = gam.cell_index((0.305, 0.695))
    assert cells[k] == (0.305, 0.695)
    # within merge tolerance of a grid cell
    k = gam.cell_index((0.5 + 1e-12, 0.5 - 1e-12))
    assert cells[k] == (0.5, 0.5)
    # off-domain snaps to the nearest cell
    k = gam.cell_index((0.4951, 0.5049))
    assert cells[k][1] == pytest.approx(0.5)
    # midpoint tie resolves to the lower index (cells sorted by first coord,
    # so the lower index is the cell with the smaller first coordinate)
    k = gam.cell_index((0.49, 0.51))
    assert cells[k] == (0.48, 0.52)


def test_canonical_id_ignores_off_equilibrium_flag():
    a = PublicBelief.from_pairs([((0.3, 0.7), 1.0)])
    b = PublicBelief.from_pairs([((0.3, 0.7), 1.0)], off_equilibrium=True)
    assert canonical_id(JointPublicBelief((a,))) == canonical_id(JointPublicBelief((b,)))
    c = PublicBelief.from_pairs([((0.4, 0.6), 1.0)])
    assert canonical_id(JointPublicBelief((a,))) != canonical_id(JointPublicBelief((c,)))
