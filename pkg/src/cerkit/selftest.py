"""Fast internal consistency checks behind ``cerkit selftest``."""
from __future__ import annotations

import itertools

import numpy as np

from .channels import orbit_marginals, random_sparse_channel
from .design import marginal_target, plan_initial_states
from .estimation import EigenvalueTable, project_physical, reconstruct_marginal, reconstruction_matrix
from .pauli import HardCycle, PauliOperator, embed, enumerate_orbits
from .steane import SteaneCodePair, classify_error, decoder_oracle


def _counts():
    single = HardCycle.single_cnot()
    two = HardCycle(4, [(0, 1), (2, 3)])
    got = (
        len(plan_initial_states(single, marginal_target(single, "1cnot")).initial_states),
        len(plan_initial_states(two, marginal_target(two, "2cnot")).initial_states),
        len(enumerate_orbits(single)) - 1,
    )
    return got == (4, 36, 9), f"1cnot/2cnot states and orbits per CNOT = {got}"


def _round_trip(rng):
    cycle = HardCycle(4, [(0, 1), (2, 3)])
    ch = random_sparse_channel(4, 20, rng)
    table = EigenvalueTable.exact(cycle, (0, 1, 2, 3), ch, mean="arithmetic")
    est = reconstruct_marginal((0, 1, 2, 3), cycle, table)
    ref = orbit_marginals(ch, cycle, (0, 1, 2, 3), table.orbits)
    err = max(abs(p - ref[o]) for o, p in zip(table.orbits, est.probabilities))
    return err < 1e-10, f"max reconstruction error {err:.2e}"


def _projection(rng):
    orbits = enumerate_orbits(HardCycle.single_cnot())
    w = reconstruction_matrix(orbits)
    lam = np.clip(1 - rng.exponential(0.02, len(orbits)) + rng.normal(0, 0.01, len(orbits)), 0, 1)
    out = project_physical(lam, w)
    worst = float((w @ out).min())
    return worst > -1e-10, f"min projected probability {worst:.2e}"


def _decoder():
    code = SteaneCodePair()
    qubits = code.block_a + code.block_b
    bad = 0
    total = 0
    for q, letter in itertools.product(qubits, "XYZ"):
        e = PauliOperator.single(code.n, q, letter)
        total += 1
        bad += classify_error(code, e) != decoder_oracle(code, e)
    xx = embed(PauliOperator.from_string("XX"), (0, 1), code.n)
    bad += classify_error(code, xx) is not False
    return bad == 0, f"{total} weight-1 errors plus X0X1 checked, {bad} disagreements"


def run_checks(seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for name, fn in (("design counts", _counts), ("round trip", lambda: _round_trip(rng)),
                     ("projection", lambda: _projection(rng)), ("decoder", _decoder)):
        try:
            ok, detail = fn()
        except Exception as exc:  # report, do not crash the whole selftest
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out
