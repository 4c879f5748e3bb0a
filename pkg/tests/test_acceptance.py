"""
Acceptance suite.  Every test states its criterion, evaluates it at the stated
tolerance and runtime limit, prints one PASS/FAIL line and then asserts.
"""
import itertools
import time

import numpy as np
import pytest

from cerkit import (
    EigenvalueTable,
    FactorizedChannel,
    HardCycle,
    JointErrorModel,
    PauliOperator,
    SteaneCodePair,
    bootstrap,
    build_transversal_graph,
    canonical_orbit,
    choose_sequence_lengths,
    classify_error,
    commute,
    cycle_benchmark_fidelity,
    decoder_oracle,
    enumerate_orbits,
    estimate_marginals,
    estimate_with_errors,
    exact_expectation,
    fit_decay,
    logical_rates,
    marginal_target,
    plan_initial_states,
    project_physical,
    project_simplex,
    random_sparse_channel,
    reconstruct_marginal,
    reconstruction_matrix,
    run_plan,
    twirl,
    unitary_process,
)
from cerkit.channels import orbit_marginals
from cerkit.estimation import fourier_matrix
from cerkit.grf import random_chain_channel, total_variation
from cerkit.pauli import all_paulis, embed


def _two_cnot_layer():
    return HardCycle.cnot_layer(4, [(0, 1), (2, 3)])


# --------------------------------------------------------------------------
# 1. round trip


def test_round_trip_exactness(verdict):
    """Exact expectations -> fit -> reconstruction reproduce orbit marginals to 1e-8."""
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for trial in range(24):
        cyc = HardCycle.single_cnot() if trial % 2 == 0 else _two_cnot_layer()
        subset = tuple(range(cyc.n))
        channel = random_sparse_channel(cyc.n, 10, rng)
        fits = {}
        for o in enumerate_orbits(cyc, subset)[1:]:
            p = o.representative
            fits[canonical_orbit(cyc, p).label] = fit_decay([(m, exact_expectation(channel, cyc, p, m))
                                                             for m in (2, 4, 8)])
        table = EigenvalueTable.from_mapping(cyc, subset, fits)
        est = reconstruct_marginal(subset, cyc, table)
        ref = orbit_marginals(channel, cyc, subset, table.orbits)
        worst = max(worst, max(abs(p - ref[o]) for o, p in zip(table.orbits, est.probabilities)))
    elapsed = time.perf_counter() - t0
    ok = verdict("1 round-trip exactness", worst <= 1e-8 and elapsed < 10,
                 f"24 channels, max |error| {worst:.2e} (tol 1e-8), {elapsed:.1f} s")
    assert ok


# --------------------------------------------------------------------------
# 2. Monte Carlo consistency


def test_monte_carlo_consistency(verdict, transversal):
    """Seven CNOT pairs at 1-3% error, 40 randomizations x 150 shots per state."""
    cyc = transversal
    rng = np.random.default_rng(0)
    noise = FactorizedChannel(16, [(g, random_sparse_channel(2, 6, rng, p_identity=1 - rng.uniform(0.01, 0.03)))
                                   for g in cyc.gates])
    t0 = time.perf_counter()
    plan = plan_initial_states(cyc, marginal_target(cyc, "1cnot"), lengths=choose_sequence_lengths(0.98, 3))
    data = run_plan(plan, cyc, noise, 40, 150, seed=0)
    est = estimate_with_errors(data, cyc, cyc.gates, resamples=200, seed=0)
    elapsed = time.perf_counter() - t0
    z = []
    for e in est:
        ref = orbit_marginals(noise, cyc, e.subset, e.orbits)
        for o, p, s in zip(e.orbits, e.probabilities, e.std_errors):
            d = abs(p - ref[o])
            z.append(0.0 if d == 0 else (d / s if s > 0 else np.inf))
    z = np.array(z)
    within3 = bool(np.all(z <= 3))
    frac2 = float(np.mean(z <= 2))
    ok = verdict("2 Monte Carlo consistency", within3 and frac2 >= 0.9 and elapsed < 600,
                 f"{len(z)} orbits, max |z| {z.max():.2f} (tol 3), {frac2:.1%} within 2 SE (tol 90%), "
                 f"{elapsed:.0f} s")
    assert ok


# --------------------------------------------------------------------------
# 3. design counts


def test_design_counts(verdict, single, transversal):
    t0 = time.perf_counter()
    n1 = len(plan_initial_states(single, marginal_target(single, "1cnot")).initial_states)
    pair = _two_cnot_layer()
    n2 = len(plan_initial_states(pair, marginal_target(pair, "2cnot")).initial_states)
    n7 = len(plan_initial_states(transversal, marginal_target(transversal, "2cnot")).initial_states)
    per_gate = [len(enumerate_orbits(transversal, g)) - 1 for g in transversal.gates]
    values = 0
    for a, b in itertools.combinations(transversal.gates, 2):
        values += sum(len(o) for o in enumerate_orbits(transversal, a + b))
    elapsed = time.perf_counter() - t0
    got = (n1, n2, n7, per_gate[0], sum(per_gate), values)
    ok = verdict("3 design counts", got == (4, 36, 100, 9, 63, 5376) and len(set(per_gate)) == 1 and elapsed < 1,
                 f"states {n1}/{n2}/{n7}, orbits {per_gate[0]} per CNOT ({sum(per_gate)} total), "
                 f"{values} two-CNOT values, {elapsed:.2f} s")
    assert ok


# --------------------------------------------------------------------------
# 4. projection


def _qp_oracle(lam, w):
    cp = pytest.importorskip("cvxpy")
    x = cp.Variable(len(lam) - 1)
    prob = cp.Problem(cp.Minimize(cp.sum_squares(x - lam[1:])),
                      [w[:, 0] + w[:, 1:] @ x >= 0, x <= 1, x >= 0])
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return np.concatenate([[1.0], x.value])


def _infeasible_instance(rng, cyc, subset):
    channel = random_sparse_channel(cyc.n, int(rng.integers(3, 10)), rng, p_identity=rng.uniform(0.9, 0.99))
    table = EigenvalueTable.exact(cyc, subset, channel, mean="arithmetic")
    noise = rng.normal(scale=rng.choice([3e-3, 1e-2, 3e-2]), size=len(table.values))
    lam = np.clip(table.values + noise, -1, 1.05)
    lam[0] = 1.0
    return lam, reconstruction_matrix(table.orbits)


def test_projection_correctness(verdict, single):
    pytest.importorskip("cvxpy")
    rng = np.random.default_rng(7)
    pair = _two_cnot_layer()
    t0 = time.perf_counter()
    worst, infeasible = 0.0, 0
    for k in range(50):
        cyc, subset = (single, (0, 1)) if k % 2 == 0 else (pair, (0, 1, 2, 3))
        lam, w = _infeasible_instance(rng, cyc, subset)
        infeasible += bool((w @ lam).min() < 0)
        ours = project_physical(lam, w)
        worst = max(worst, float(np.max(np.abs(ours - _qp_oracle(lam, w)))))
    # unmerged transform: eigenvalue-space and probability-space projections agree
    eq_worst = 0.0
    for n in (1, 2):
        f = fourier_matrix(n)
        for _ in range(10):
            channel = random_sparse_channel(n, 4, rng, p_identity=0.95)
            lam = channel.dense_eigenvalues() + rng.normal(scale=0.01, size=4 ** n)
            lam[0] = 1.0
            mu_11 = f @ project_physical(lam, f)
            mu_10 = project_simplex(f @ lam)
            eq_worst = max(eq_worst, float(np.max(np.abs(mu_11 - mu_10))))
    elapsed = time.perf_counter() - t0
    ok = verdict("4 projection correctness",
                 worst <= 1e-6 and eq_worst <= 1e-6 and infeasible >= 25 and elapsed < 30,
                 f"50 instances ({infeasible} infeasible), max |dlambda| vs QP {worst:.1e} (tol 1e-6), "
                 f"probability-space agreement {eq_worst:.1e}, {elapsed:.1f} s")
    assert ok


# --------------------------------------------------------------------------
# 5. GRF fidelity


def test_grf_fidelity(verdict):
    t0 = time.perf_counter()
    worst_tv, worst_marg = 0.0, 0.0
    for seed in range(10):
        graph = build_transversal_graph(3, offset=3)
        rng = np.random.default_rng(seed)
        channel = random_chain_channel(graph, rng, support=int(rng.integers(2, 5)), p_identity=rng.uniform(0.8, 0.99))
        model = JointErrorModel.from_channel(graph, channel, threshold=0.0)
        joint = {x: model.probability(x) for x in channel.terms}
        worst_tv = max(worst_tv, total_variation(joint, channel.terms),
                       total_variation(model.enumerate(threshold=0.0), channel.terms))
        for i, qs in enumerate(graph.pairs):
            got = model.pair_marginal(i)
            ref = channel.marginalize(qs)
            worst_marg = max(worst_marg, total_variation(got.terms, ref.terms))
    elapsed = time.perf_counter() - t0
    ok = verdict("5 GRF fidelity", worst_tv < 1e-10 and worst_marg < 1e-10 and elapsed < 10,
                 f"10 chains, max TV {worst_tv:.1e}, max pair-marginal TV {worst_marg:.1e} (tol 1e-10), "
                 f"{elapsed:.1f} s")
    assert ok


# --------------------------------------------------------------------------
# 6. Steane classification


def _on_code(code, letters: dict) -> PauliOperator:
    s = ["I"] * code.n
    for q, a in letters.items():
        s[q] = a
    return PauliOperator.from_string("".join(s))


def test_steane_classification(verdict):
    code = SteaneCodePair()
    t0 = time.perf_counter()
    disagree, checked = 0, 0
    for w in (0, 1, 2):
        for sup in itertools.combinations(range(14), w):
            for letters in itertools.product("XYZ", repeat=w):
                e = PauliOperator.from_string("".join(letters[sup.index(q)] if q in sup else "I"
                                                      for q in range(14)))
                disagree += classify_error(code, e) != decoder_oracle(code, e)
                checked += 1
    rng = np.random.default_rng(6)
    qubits = code.block_a + code.block_b
    for _ in range(10_000):
        w = int(rng.integers(0, 5))
        sup = rng.choice(qubits, size=w, replace=False)
        e = _on_code(code, {int(q): "XYZ"[rng.integers(3)] for q in sup})
        disagree += classify_error(code, e) != decoder_oracle(code, e)
        checked += 1
    verdicts = (
        classify_error(code, _on_code(code, {0: "X", 1: "X"})) is False,
        classify_error(code, _on_code(code, {0: "X", 9: "X"})) is True,
        all(classify_error(code, _on_code(code, {i: "X", j: "Z"}))
            for i in code.block_a for j in code.block_a if i != j),
    )
    elapsed = time.perf_counter() - t0
    ok = verdict("6 Steane classification", disagree == 0 and all(verdicts) and checked == 862 + 10_000
                 and elapsed < 60,
                 f"{checked} errors, {disagree} disagreements, cited verdicts {verdicts}, {elapsed:.1f} s")
    assert ok


# --------------------------------------------------------------------------
# 7. logical rates and cycle benchmarking


def test_logical_rate_pipeline(verdict, transversal):
    code = SteaneCodePair()
    graph = build_transversal_graph()
    channel = random_chain_channel(graph, np.random.default_rng(7), support=3, p_identity=0.97)
    model = JointErrorModel.from_channel(graph, channel, threshold=0.0)
    rates = logical_rates(model, code, transversal, threshold=0.0)
    # sparse exhaustive oracle: decode every orbit member of every support term
    corr = unc = 0.0
    for x, p in channel.terms.items():
        if x.is_identity():
            continue
        if all(decoder_oracle(code, m) for m in canonical_orbit(transversal, x)):
            corr += p
        else:
            unc += p
    total = 1.0 - channel.p_identity
    dev = max(abs(rates.total - total), abs(rates.correctable - corr), abs(rates.uncorrectable - unc))
    # cycle benchmarking over the orbital eigenvalues of every two-CNOT subset
    lams = {}
    for a, b in itertools.combinations(transversal.gates, 2):
        for o in enumerate_orbits(transversal, a + b)[1:]:
            members = [embed(m, a + b, transversal.n) for m in o]
            key = canonical_orbit(transversal, members[0]).key
            if key not in lams:
                lams[key] = float(np.exp(np.mean(np.log(channel.eigenvalues(members)))))
    cb = cycle_benchmark_fidelity(list(lams.values()), draws=20, n_qubits=14, seed=0)
    cb_ok = abs(cb.total_error - cb.exact_table_error) <= 2 * cb.std
    ok = verdict("7 logical-rate pipeline", dev <= 1e-10 and cb_ok,
                 f"{len(channel.terms)} support terms, max rate deviation {dev:.1e} (tol 1e-10); "
                 f"CB {cb.total_error:.4f} +- {cb.std:.4f} vs table {cb.exact_table_error:.4f}")
    assert ok


# --------------------------------------------------------------------------
# 8. coherent ZX signature


def test_coherent_signature(verdict, single):
    zx = PauliOperator.from_string("ZX")
    process = unitary_process(zx, 0.1)
    twirled = twirl(process)
    t0 = time.perf_counter()
    plan = plan_initial_states(single, marginal_target(single, "1cnot"), lengths=(2, 4, 6, 8))
    randomizations = 50
    data = run_plan(plan, single, process, randomizations, None, seed=0, engine="dense")
    a = data.arrays()
    values = a["expectation"] * a["ideal"]
    var = {0: [], 1: []}
    worst_z = 0.0
    keys = set(zip(a["state"].tolist(), a["observable"].tolist(), a["m"].tolist()))
    for state, obs, m in sorted(keys):
        sel = (a["state"] == state) & (a["observable"] == obs) & (a["m"] == m)
        v = values[sel]
        p = PauliOperator.from_string(obs)
        if m == 8:
            var[commute(p, zx)].append(v.var(ddof=1))
        sem = v.std(ddof=1) / np.sqrt(len(v))
        d = abs(v.mean() - exact_expectation(twirled, single, p, m))
        worst_z = max(worst_z, 0.0 if d <= 1e-12 else (d / sem if sem > 0 else np.inf))
    elapsed = time.perf_counter() - t0
    anti, comm = min(var[1]), max(var[0])
    ratio_ok = anti >= 10 * comm and anti > 0
    ok = verdict("8 coherent-ZX signature", ratio_ok and worst_z <= 3 and elapsed < 60,
                 f"min anticommuting var {anti:.2e}, max commuting var {comm:.2e}, "
                 f"worst mean deviation {worst_z:.2f} SEM (tol 3), {elapsed:.1f} s")
    assert ok


# --------------------------------------------------------------------------
# 9. determinism


def _pipeline_outputs(workers: int) -> list:
    cyc = HardCycle.transversal(3, offset=3)
    rng = np.random.default_rng(3)
    noise = FactorizedChannel(6, [(g, random_sparse_channel(2, 5, rng, p_identity=0.97)) for g in cyc.gates])
    plan = plan_initial_states(cyc, marginal_target(cyc, "2cnot"), lengths=(2, 6, 20))
    data = run_plan(plan, cyc, noise, 10, 50, seed=11, workers=workers)
    est = estimate_marginals(data, cyc, plan.target.subsets)
    se = bootstrap(data, 100, seed=11, cycle=cyc, subsets=plan.target.subsets)
    single = HardCycle.single_cnot()
    dense = run_plan(plan_initial_states(single, marginal_target(single, "1cnot"), lengths=(2, 4)), single,
                     unitary_process(PauliOperator.from_string("ZX"), 0.1), 5, 20, seed=11, engine="dense",
                     workers=workers)
    graph = build_transversal_graph()
    chain = random_chain_channel(graph, np.random.default_rng(11))
    rates = logical_rates(JointErrorModel.from_channel(graph, chain), SteaneCodePair(), HardCycle.transversal())
    cb = cycle_benchmark_fidelity(chain.eigenvalues([embed(p, (0, 9), 16) for p in all_paulis(2)[1:]]),
                                  n_qubits=14, seed=11)
    return [plan.to_text(), data.to_csv(), "".join(e.to_text() for e in est), se.tobytes(), dense.to_csv(),
            rates.to_text(), repr(cb)]


def test_determinism(verdict):
    t0 = time.perf_counter()
    first = _pipeline_outputs(workers=1)
    again = _pipeline_outputs(workers=1)
    threaded = _pipeline_outputs(workers=4)
    elapsed = time.perf_counter() - t0
    same = first == again and first == threaded
    ok = verdict("9 determinism", same, f"plan, dataset, marginals, bootstrap, dense data, logical rates and "
                                        f"CB identical across repeats and 1 vs 4 workers, {elapsed:.1f} s")
    assert ok
