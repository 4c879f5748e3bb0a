"""
Cycle error reconstruction: learn marginal Pauli error distributions of a
Clifford hard cycle from randomized decay data, and turn them into logical
error rates for a pair of Steane code blocks.
"""
from .channels import (
    DenseProcess,
    FactorizedChannel,
    PauliChannel,
    eigenvalue,
    orbit_marginal,
    orbit_marginals,
    orbital_eigenvalue,
    random_sparse_channel,
    twirl,
    unitary_process,
)
from .design import (
    CostModel,
    DesignPlan,
    MarginalTarget,
    allocate_budget,
    choose_sequence_lengths,
    marginal_target,
    plan_initial_states,
)
from .estimation import (
    DecayFit,
    EigenvalueTable,
    MarginalEstimate,
    bootstrap,
    cycle_benchmark_fidelity,
    estimate_marginals,
    estimate_with_errors,
    fit_dataset,
    fit_decay,
    project_physical,
    project_simplex,
    reconstruct_marginal,
    reconstruction_matrix,
)
from .grf import FactorGraph, JointErrorModel, build_transversal_graph, joint_probability
from .pauli import (
    HardCycle,
    Orbit,
    PauliOperator,
    canonical_orbit,
    commute,
    embed,
    enumerate_orbits,
    induced_cycle,
    orbit,
    restrict,
)
from .simulate import CircuitSpec, DecayDataset, exact_expectation, run_dense, run_monte_carlo, run_plan
from .steane import SteaneCodePair, classify_error, classify_orbit, decoder_oracle, logical_rates

__version__ = "0.1.0"
