import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cerkit.pauli import (
    DimensionError,
    HardCycle,
    PauliOperator,
    UnsupportedSubsetError,
    all_paulis,
    canonical_orbit,
    commute,
    cycle_order,
    embed,
    enumerate_orbits,
    induced_cycle,
    multiply,
    orbit,
    pauli_index,
    restrict,
)

P = PauliOperator.from_string

_MATS = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1, -1]),
}


def dense(p: PauliOperator) -> np.ndarray:
    # qubit 0 is the most significant tensor factor
    out = np.eye(1)
    for ch in str(p):
        out = np.kron(out, _MATS[ch])
    return out


def cnot_matrix(n, c, t):
    dim = 2 ** n
    u = np.zeros((dim, dim))
    for b in range(dim):
        bits = [(b >> (n - 1 - q)) & 1 for q in range(n)]
        if bits[c]:
            bits[t] ^= 1
        u[sum(v << (n - 1 - q) for q, v in enumerate(bits)), b] = 1
    return u


def paulis(n):
    return st.tuples(st.integers(0, 2 ** n - 1), st.integers(0, 2 ** n - 1)).map(lambda xz: PauliOperator(n, *xz))


# --------------------------------------------------------------------------
# construction and text form


def test_string_round_trip():
    p = P("ZXIY")
    assert str(p) == "ZXIY"
    assert p.support == (0, 1, 3)
    assert p.weight == 3
    assert p.letter(3) == "Y"


def test_invalid_letter():
    with pytest.raises(ValueError):
        P("XQ")


def test_masks_must_fit():
    with pytest.raises(ValueError):
        PauliOperator(2, 4, 0)


def test_dense_index_layout():
    ps = all_paulis(2)
    assert len(ps) == 16
    assert all(pauli_index(p) == i for i, p in enumerate(ps))
    assert str(ps[1]) == "XI"


# --------------------------------------------------------------------------
# commutation and products


@pytest.mark.parametrize("a, b, expected", [("ZI", "XX", 1), ("ZZ", "XX", 0), ("XY", "II", 0), ("X", "Z", 1)])
def test_commute_examples(a, b, expected):
    assert commute(P(a), P(b)) == expected


def test_commute_dimension_mismatch():
    with pytest.raises(DimensionError):
        commute(P("X"), P("XX"))


@pytest.mark.parametrize("a, b, expected", [("X", "Z", "Y"), ("XI", "IZ", "XZ"), ("YZ", "YZ", "II")])
def test_multiply_examples(a, b, expected):
    assert multiply(P(a), P(b)) == P(expected)
    assert P(a) * P(b) == P(expected)


@given(paulis(3), paulis(3))
def test_commute_matches_matrices(a, b):
    ma, mb = dense(a), dense(b)
    anti = np.allclose(ma @ mb, -mb @ ma)
    assert commute(a, b) == int(anti)


@given(paulis(3), paulis(3), paulis(3))
def test_commute_is_bilinear(a, b, c):
    assert commute(a, b * c) == commute(a, b) ^ commute(a, c)


# --------------------------------------------------------------------------
# restriction


def test_restrict_examples():
    # Z on qubit 1, X on qubit 2, Y on qubit 4
    p = P("IZXIY")
    assert restrict(p, (2, 3)) == P("XI")
    assert restrict(p, (4, 1)) == P("YZ")
    assert restrict(p, range(5)) == p


def test_restrict_rejects_bad_subsets():
    with pytest.raises(IndexError):
        restrict(P("XX"), (0, 2))
    with pytest.raises(ValueError):
        restrict(P("XX"), ())


@given(paulis(5), st.permutations(range(5)), st.integers(1, 5))
def test_embed_inverts_restrict(p, perm, k):
    subset = tuple(perm[:k])
    r = restrict(p, subset)
    e = embed(r, subset, 5)
    assert restrict(e, subset) == r
    assert set(e.support) <= set(subset)


# --------------------------------------------------------------------------
# hard cycles


def test_cnot_conjugation_examples():
    cyc = HardCycle.single_cnot()
    assert cyc.conjugate(P("XI")) == P("XX")
    assert cyc.conjugate(P("IX")) == P("IX")
    assert cyc.conjugate(P("IZ")) == P("ZZ")


@given(paulis(3))
def test_cnot_layer_matches_dense_conjugation(p):
    cyc = HardCycle.cnot_layer(3, [(0, 2)])
    u = cnot_matrix(3, 0, 2)
    q = cyc.conjugate(p)
    m = u @ dense(p) @ u.conj().T
    # equal up to a sign
    assert np.allclose(m, dense(q)) or np.allclose(m, -dense(q))


@given(paulis(4))
def test_transversal_is_an_involution(p):
    cyc = HardCycle.transversal(2, offset=2)
    assert cyc.conjugate(cyc.conjugate(p)) == p
    assert cyc.inverse(cyc.conjugate(p)) == p


def test_conjugation_is_a_bijection():
    cyc = HardCycle.cnot_layer(3, [(1, 0)])
    images = {cyc.conjugate(p) for p in all_paulis(3)}
    assert len(images) == 64


def test_overlapping_gates_rejected():
    with pytest.raises(ValueError):
        HardCycle.cnot_layer(3, [(0, 1), (1, 2)])


@pytest.mark.parametrize("cyc, expected", [
    (HardCycle.transversal(), 2),
    (HardCycle.identity(3), 1),
    (HardCycle.single_cnot(), 2),
])
def test_cycle_order(cyc, expected):
    assert cycle_order(cyc) == expected
    assert cyc.order == expected


def test_supports_group_gate_qubits():
    cyc = HardCycle.transversal(2, offset=2, n=5)
    assert cyc.supports() == [(0, 2), (1, 3), (4,)]


# --------------------------------------------------------------------------
# orbits


@pytest.mark.parametrize("start, members", [("XI", {"XI", "XX"}), ("YZ", {"YZ", "XY"}), ("IX", {"IX"})])
def test_cnot_orbits(start, members):
    o = orbit(HardCycle.single_cnot(), P(start))
    assert {str(m) for m in o} == members


def test_orbit_equality_ignores_start():
    cyc = HardCycle.single_cnot()
    assert orbit(cyc, P("XX")) == orbit(cyc, P("XI"))
    assert canonical_orbit(cyc, P("XX")).members[0] == P("XI")
    assert canonical_orbit(cyc, P("XX")).label == "XI"


def test_orbit_counts():
    assert len(enumerate_orbits(HardCycle.single_cnot())) == 10
    two = HardCycle.cnot_layer(4, [(0, 1), (2, 3)])
    assert len(enumerate_orbits(two)) == 136
    ident = enumerate_orbits(HardCycle.identity(1))
    assert len(ident) == 4 and all(len(o) == 1 for o in ident)


def test_orbits_partition_subset():
    cyc = HardCycle.transversal()
    orbs = enumerate_orbits(cyc, (0, 9, 3, 12))
    assert orbs[0].is_identity()
    assert sum(len(o) for o in orbs) == 256
    members = [m for o in orbs for m in o]
    assert len(set(members)) == 256


def test_induced_cycle_relabels_gates():
    cyc = HardCycle.transversal()
    local = induced_cycle(cyc, (3, 12))
    assert list(local.gates) == [(0, 1)]
    assert local.conjugate(P("XI")) == P("XX")


def test_split_gate_subset_rejected():
    with pytest.raises(UnsupportedSubsetError):
        induced_cycle(HardCycle.transversal(), (0, 1))


@settings(max_examples=50)
@given(st.permutations(range(4)))
def test_induced_cycle_commutes_with_restriction(perm):
    cyc = HardCycle.cnot_layer(4, [(0, 1), (2, 3)])
    subset = tuple(q for q in perm if q in (0, 1))
    local = induced_cycle(cyc, subset)
    for p in all_paulis(2):
        full = embed(p, subset, 4)
        assert restrict(cyc.conjugate(full), subset) == local.conjugate(p)


def test_orbit_sizes_divide_order():
    cyc = HardCycle.transversal(3, offset=3)
    for o in enumerate_orbits(cyc, (0, 3, 1, 4)):
        assert cyc.order % len(o) == 0


def test_weight_one_and_two_orbit_mix():
    # one CNOT: orbits of size two mix weights, e.g. {XI, XX}
    sizes = sorted(len(o) for o in enumerate_orbits(HardCycle.single_cnot()))
    assert sizes.count(1) == 4 and sizes.count(2) == 6
    weights = [{m.weight for m in o} for o in enumerate_orbits(HardCycle.single_cnot()) if len(o) == 2]
    assert {1, 2} in weights


def test_all_two_qubit_cnot_orbits_are_closed():
    cyc = HardCycle.single_cnot()
    for o in enumerate_orbits(cyc):
        assert all(cyc.conjugate(m) in o for m in o)


def test_letters_combinations_cover_register():
    labels = {"".join(t) for t in itertools.product("IXYZ", repeat=2)}
    assert labels == {str(p) for p in all_paulis(2)}
