"""
Logical error rates of a transversal CNOT
=========================================

Marginals over neighbouring pairs of CNOTs are stitched into a joint error
model for all seven pairs.  Each error in its support is then sorted into
correctable and uncorrectable for two Steane code blocks.  The total error
from the joint model is compared with a cycle-benchmarking style estimate
that averages a handful of sampled eigenvalues.

Run from the repository root::

    python3 demos/demo_04_logical_rates.py
"""

import numpy as np

from cerkit import io as fmt
from cerkit.design import marginal_target, plan_initial_states
from cerkit.estimation import cycle_benchmark_fidelity, estimate_marginals, fit_dataset
from cerkit.grf import JointErrorModel, build_transversal_graph
from cerkit.pauli import HardCycle, PauliOperator
from cerkit.simulate import run_plan
from cerkit.steane import SteaneCodePair, logical_rates

###############################################################################
# Injected noise and the chain of pairs
# -------------------------------------
# Pair ``i`` couples qubit ``i`` of block A with qubit ``i + 9`` of block B.
# The joint model is ``p(x0|x1) p(x1|x2) ... p(x5|x6) p(x6)``, so it needs
# marginals over neighbouring pairs only.

cycle = HardCycle.transversal()
code = SteaneCodePair()
graph = build_transversal_graph()
noise = fmt.parse_channel(open("demos/configs/transversal7_pairs.channel").read())

reference = logical_rates(JointErrorModel.from_channel(graph, noise), code, cycle)
print("injected channel")
print(reference.to_text())

###############################################################################
# A reduced experiment
# --------------------
# 36 initial states cover every neighbouring-pair marginal.  20
# randomizations of 100 shots keep this script under a minute.

plan = plan_initial_states(cycle, marginal_target(cycle, "2cnot", pairs="adjacent"), lengths=(2, 10, 34))
data = run_plan(plan, cycle, noise, 20, 100, seed=11)
fits = fit_dataset(data)
estimates = estimate_marginals(data, cycle, plan.target.subsets, fits)

model = JointErrorModel.from_estimates(graph, estimates, threshold=1e-9)
rates = logical_rates(model, code, cycle, threshold=1e-9)
print("reconstructed joint model")
print(rates.to_text())

###############################################################################
# Cycle benchmarking for comparison
# ---------------------------------
# Cycle benchmarking measures the eigenvalues of a few random Paulis on the
# whole register.  Their mean, scaled by ``(4**n - 1) / 4**n``, estimates the
# total error ``1 - p(identity)``.  Here the eigenvalues come straight from
# the injected channel; twenty are drawn per estimate and the error bar shows
# how much another draw of twenty would move it.

rng = np.random.default_rng(11)
code_qubits = code.block_a + code.block_b
pool = []
while len(pool) < 2000:
    bits = rng.integers(0, 4, size=14)
    if bits.any():
        x = sum(1 << q for q, b in zip(code_qubits, bits) if b & 1)
        z = sum(1 << q for q, b in zip(code_qubits, bits) if b & 2)
        pool.append(noise.eigenvalue(PauliOperator(16, x, z)))
cb = cycle_benchmark_fidelity(pool, draws=20, n_qubits=14, seed=11)
print(f"cycle benchmarking total error {cb.total_error:.4f} +- {cb.std:.4f} "
      f"(mean over the pool of {len(pool)}: {cb.exact_table_error:.4f})")
print(f"joint-model total error        {rates.total:.4f} (injected {reference.total:.4f})")
assert np.isfinite(rates.uncorrectable)
