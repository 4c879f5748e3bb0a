import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cerkit.channels import FactorizedChannel, PauliChannel, marginalize, random_sparse_channel
from cerkit.estimation import EigenvalueTable, reconstruct_marginal
from cerkit.grf import (
    EnumerationCapError,
    Factor,
    FactorGraph,
    JointErrorModel,
    build_transversal_graph,
    joint_probability,
    random_chain_channel,
    split_orbit_mass,
    total_variation,
)
from cerkit.pauli import HardCycle, PauliOperator, all_paulis, embed, enumerate_orbits, restrict

P = PauliOperator.from_string


def _dense_joint(model):
    """Oracle: evaluate the product of conditionals on every Pauli of the register."""
    return {x: model.probability(x) for x in all_paulis(model.graph.n) if model.probability(x) > 0}


# --------------------------------------------------------------------------
# graph structure


def test_default_graph_is_a_chain():
    g = build_transversal_graph()
    assert g.n == 16 and len(g.pairs) == 7
    assert g.pairs[3] == (3, 12)
    assert [f.separators for f in g.factors] == [(i + 1,) for i in range(6)] + [()]
    assert g.neighbours(3) == {2, 4}
    assert g.qubits((0, 1)) == (0, 9, 1, 10)


def test_single_pair_graph():
    g = build_transversal_graph(1, offset=1)
    assert g.factors == [Factor(0)]
    ch = random_sparse_channel(2, 6, np.random.default_rng(0))
    model = JointErrorModel.from_channel(g, ch)
    joint = model.enumerate()
    assert total_variation(joint, ch.terms) < 1e-15


def test_graph_validation():
    with pytest.raises(ValueError):
        FactorGraph([(0, 1), (2, 3)], [Factor(1), Factor(0, (1,))], 4)
    with pytest.raises(ValueError):
        FactorGraph([(0, 1), (2, 3)], [Factor(0)], 4)
    with pytest.raises(ValueError):
        build_transversal_graph(0)


# --------------------------------------------------------------------------
# joint model


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_chain_channel_is_reproduced_exactly(seed):
    g = build_transversal_graph(3, offset=3)
    ch = random_chain_channel(g, np.random.default_rng(seed))
    model = JointErrorModel.from_channel(g, ch, threshold=0.0)
    joint = model.enumerate()
    assert math.fsum(joint.values()) == pytest.approx(1.0, abs=1e-12)
    assert total_variation(joint, ch.terms) < 1e-12
    assert total_variation(joint, _dense_joint(model)) < 1e-12


def test_independent_pairs_give_a_product():
    g = build_transversal_graph(3, offset=3)
    rng = np.random.default_rng(1)
    parts = [random_sparse_channel(2, 4, rng, p_identity=0.9) for _ in g.pairs]
    fac = FactorizedChannel(g.n, list(zip(g.pairs, parts)))
    model = JointErrorModel.from_channel(g, fac)
    for x in [P("XIIXII"), P("ZYIIXZ"), P("IIYIIZ"), P("IIIIII")]:
        expected = math.prod(c.probability(restrict(x, p)) for c, p in zip(parts, g.pairs))
        assert joint_probability(model, x) == pytest.approx(expected, abs=1e-15)


def test_conditional_rows_are_normalised():
    g = build_transversal_graph(4, offset=4)
    ch = random_chain_channel(g, np.random.default_rng(2), support=4)
    model = JointErrorModel.from_channel(g, ch)
    for rows in model.cond.values():
        for row in rows.values():
            assert math.fsum(row.values()) == pytest.approx(1.0, abs=1e-12)


def test_pair_marginal_matches_channel():
    g = build_transversal_graph(3, offset=3)
    ch = random_chain_channel(g, np.random.default_rng(3))
    model = JointErrorModel.from_channel(g, ch)
    for i, pair in enumerate(g.pairs):
        got = model.pair_marginal(i)
        ref = marginalize(ch, pair)
        assert total_variation(got.terms, ref.terms) < 1e-12


def test_probability_outside_pairs_and_wrong_size():
    g = build_transversal_graph(2, offset=3)
    model = JointErrorModel.from_channel(g, PauliChannel.identity(g.n))
    assert model.probability(PauliOperator.identity(g.n)) == 1.0
    assert model.probability(PauliOperator.single(g.n, 2, "X")) == 0.0
    with pytest.raises(ValueError):
        model.probability(PauliOperator.identity(3))


def test_threshold_prunes_mass():
    g = build_transversal_graph(3, offset=3)
    ch = random_chain_channel(g, np.random.default_rng(4), p_identity=0.9)
    model = JointErrorModel.from_channel(g, ch)
    full = model.enumerate(threshold=0.0)
    pruned = model.enumerate(threshold=1e-3)
    assert len(pruned) < len(full)
    assert all(v >= 1e-3 for v in pruned.values())
    assert math.fsum(pruned.values()) < 1.0


def test_enumeration_cap():
    g = build_transversal_graph(3, offset=3)
    ch = random_chain_channel(g, np.random.default_rng(5), support=5)
    model = JointErrorModel.from_channel(g, ch)
    with pytest.raises(EnumerationCapError) as info:
        model.enumerate(cap=10)
    assert len(info.value.partial) > 0
    assert 0 < info.value.mass <= 1


def test_missing_marginal():
    g = build_transversal_graph(2, offset=2)
    with pytest.raises(KeyError):
        JointErrorModel.from_marginals(g, {(1,): PauliChannel.identity(2)})


# --------------------------------------------------------------------------
# from reconstructed marginals


def test_split_orbit_mass():
    cyc = HardCycle.single_cnot()
    orbs = enumerate_orbits(cyc)
    table = EigenvalueTable((0, 1), orbs, np.ones(len(orbs)))
    est = reconstruct_marginal((0, 1), cyc, table)
    xi = next(i for i, o in enumerate(orbs) if o.label == "XI")
    est.probabilities = np.zeros(len(orbs))
    est.probabilities[0], est.probabilities[xi] = 0.9, 0.1
    ch = split_orbit_mass(est)
    assert ch.probability(P("XI")) == pytest.approx(0.05)
    assert ch.probability(P("XX")) == pytest.approx(0.05)
    assert ch.p_identity == pytest.approx(0.9)


def _estimates(cycle, channel, subsets):
    out = []
    for s in subsets:
        table = EigenvalueTable.exact(cycle, s, channel, mean="arithmetic")
        out.append(reconstruct_marginal(s, cycle, table))
    return out


def test_from_estimates_uses_host_marginal_for_terminal_factor():
    g = build_transversal_graph(3, offset=3)
    cyc = HardCycle.transversal(3, offset=3)
    ch = random_chain_channel(g, np.random.default_rng(6))
    ests = _estimates(cyc, ch, [g.qubits((0, 1)), g.qubits((1, 2))])
    model = JointErrorModel.from_estimates(g, ests)
    joint = model.enumerate()
    assert math.fsum(joint.values()) == pytest.approx(1.0, abs=1e-12)
    # terminal marginal: orbit masses of the host estimate restricted to the last pair
    host = split_orbit_mass(ests[1]).marginalize((2, 3))
    got = model.pair_marginal(2)
    assert total_variation(got.terms, host.terms) < 1e-12
    # the orbit masses of every pair marginal are exact
    for i, pair in enumerate(g.pairs):
        local = HardCycle.single_cnot()
        ref = marginalize(ch, pair)
        mine = model.pair_marginal(i)
        for o in enumerate_orbits(local):
            assert sum(mine.probability(m) for m in o) == pytest.approx(sum(ref.probability(m) for m in o),
                                                                         abs=1e-10)


def test_from_estimates_requires_coverage():
    g = build_transversal_graph(3, offset=3)
    cyc = HardCycle.transversal(3, offset=3)
    ests = _estimates(cyc, PauliChannel.identity(6), [g.qubits((0, 1))])
    with pytest.raises(KeyError):
        JointErrorModel.from_estimates(g, ests)


def test_embedding_helper_consistency():
    g = build_transversal_graph(2, offset=2)
    model = JointErrorModel.from_channel(g, PauliChannel.from_strings({"IIII": 0.5, "XIXI": 0.5}))
    assert model.probability(embed(P("XX"), g.pairs[0], g.n)) == pytest.approx(0.5)


def test_identity_probability_with_positive_correlations():
    # errors strike neighbouring pairs together, so identities are positively correlated
    g = build_transversal_graph(3, offset=3)
    ch = PauliChannel.from_strings({"IIIIII": 0.96, "XXIXXI": 0.02, "IZZIZZ": 0.02})
    model = JointErrorModel.from_channel(g, ch)
    ident = PauliOperator.identity(6)
    product = math.prod(model.pair_marginal(i).p_identity for i in range(3))
    assert model.probability(ident) >= product
    assert model.probability(ident) == pytest.approx(0.96)
    assert math.fsum(_dense_joint(model).values()) == pytest.approx(1.0, abs=1e-12)
