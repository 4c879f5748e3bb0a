"""
Planning an experiment
======================

How many initial states, which sequence lengths, and how to split a fixed
time budget between fresh randomizations and repeated shots.

Run from the repository root::

    python3 demos/demo_03_design_and_budget.py
"""

import numpy as np

from cerkit.channels import random_sparse_channel, twirl, unitary_process
from cerkit.design import CostModel, allocate_budget, choose_sequence_lengths, marginal_target, plan_initial_states
from cerkit.pauli import HardCycle, PauliOperator, enumerate_orbits
from cerkit.simulate import CircuitSpec, run_dense, run_monte_carlo

###############################################################################
# Initial states
# --------------
# Seven parallel CNOTs joining two code blocks.  Single-CNOT marginals need
# the same four states as an isolated CNOT because every gate can read the
# same local pattern.  Marginals over every pair of CNOTs need more, since
# two gates must show all nine-by-nine letter combinations.

cycle = HardCycle.transversal()
for level, pairs in [("1cnot", "all"), ("2cnot", "adjacent"), ("2cnot", "all")]:
    target = marginal_target(cycle, level, pairs=pairs)
    plan = plan_initial_states(cycle, target)
    print(f"{level} ({pairs:8s} subsets={len(target.subsets):2d}): {len(plan.initial_states):3d} initial states")

per_cnot = len(enumerate_orbits(HardCycle.single_cnot())) - 1
pair_values = sum(sum(len(o) for o in enumerate_orbits(cycle, s))
                  for s in marginal_target(cycle, "2cnot").subsets)
print(f"non-trivial orbits per CNOT: {per_cnot}, over seven CNOTs: {7 * per_cnot}")
print(f"two-CNOT expectation values, 256 per pair of CNOTs: {pair_values}")

###############################################################################
# Sequence lengths
# ----------------
# Lengths are even, since the CNOT squares to the identity, and geometrically
# spaced up to roughly one decay constant.

for guess in (0.99, 0.97, 0.9):
    print(f"lambda ~ {guess}: lengths {choose_sequence_lengths(guess, 3)}")

###############################################################################
# Randomizations against shots
# ----------------------------
# A pilot dataset is resampled to predict the spread of the fitted eigenvalue
# for every affordable split of the budget.  Changing randomization costs 50
# shot-equivalents here.  Stochastic noise is well served by more shots per
# randomization; coherent noise needs more randomizations because each one
# carries its own bias.

cost = CostModel(cost_per_randomization_setup=50.0, cost_per_shot=1.0)
small = HardCycle.single_cnot()
rotation = unitary_process(PauliOperator.from_string("ZX"), 0.15)
budget = 3 * 40 * 250 / 4
for name, noise, engine in [("stochastic", twirl(rotation), run_monte_carlo), ("coherent", rotation, run_dense)]:
    pilot = engine(CircuitSpec(small, (2, 8, 16), ("X+", "Y+"), noise, seed=1, observables=("XI",)), 40, 200)
    choice = allocate_budget(cost, budget, pilot, subsamples=100)
    print(f"{name:10s}: {choice.randomizations} randomizations x {choice.shots_per_randomization} shots, "
          f"predicted spread {choice.std:.4f}")

###############################################################################
# With free randomization changes the best split is as many randomizations
# as the pilot allows.

pilot = run_monte_carlo(CircuitSpec(small, (2, 8, 16), ("X+", "Y+"),
                                    random_sparse_channel(2, 4, np.random.default_rng(0), p_identity=0.95),
                                    seed=1, observables=("XI",)), 40, 200)
free = allocate_budget(CostModel(0.0, 1.0), 3 * 40 * 50, pilot)
print(f"no setup cost: {free.randomizations} randomizations x {free.shots_per_randomization} shots")
