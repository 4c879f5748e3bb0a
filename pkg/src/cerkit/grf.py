"""
Joint error model for parallel CNOT pairs as a chain-structured Gibbs random field.

Each pair variable ``x_i`` is the two-qubit Pauli error on ``(control_i,
target_i)``.  The joint distribution is a product of conditionals
``p(x_i | x_sep)`` obtained from estimated marginals over a pair and its
separating set, times a terminal marginal.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .channels import PauliChannel, marginalize
from .pauli import PauliOperator, embed, restrict


class EnumerationCapError(RuntimeError):
    """Support enumeration exceeded its cap; ``partial`` holds what was found."""

    def __init__(self, msg, partial: dict, mass: float):
        super().__init__(msg)
        self.partial = partial
        self.mass = mass


@dataclass(frozen=True)
class Factor:
    pair: int
    separators: tuple = ()


@dataclass
class FactorGraph:
    """
    Pair variables and the factors of the joint.  Factors are listed so that
    every separator of a factor belongs to a later factor.
    """

    pairs: list
    factors: list
    n: int

    def __post_init__(self):
        seen = set()
        for f in reversed(self.factors):
            if any(s not in seen for s in f.separators):
                raise ValueError("separators must be introduced by later factors")
            seen.add(f.pair)
        if seen != set(range(len(self.pairs))):
            raise ValueError("every pair needs exactly one factor")

    def qubits(self, pair_ids: Sequence[int]) -> tuple:
        return tuple(q for i in pair_ids for q in self.pairs[i])

    def neighbours(self, i: int) -> set:
        out = set()
        for f in self.factors:
            if f.pair == i:
                out.update(f.separators)
            if i in f.separators:
                out.add(f.pair)
        return out


def build_transversal_graph(n_pairs: int = 7, offset: int = 9, n: int | None = None) -> FactorGraph:
    """Chain over pairs ``(i, i + offset)``: ``p(x_0|x_1) ... p(x_{k-2}|x_{k-1}) p(x_{k-1})``."""
    if n_pairs < 1:
        raise ValueError("need at least one pair")
    pairs = [(i, i + offset) for i in range(n_pairs)]
    factors = [Factor(i, (i + 1,)) for i in range(n_pairs - 1)] + [Factor(n_pairs - 1)]
    n = n if n is not None else n_pairs + offset
    return FactorGraph(pairs, factors, n)


def split_orbit_mass(estimate) -> PauliChannel:
    """Per-Pauli channel on the estimate's subset with each orbit's mass shared equally."""
    terms = {}
    for o, p in zip(estimate.orbits, estimate.probabilities):
        for member in o:
            terms[member] = terms.get(member, 0.0) + max(float(p), 0.0) / len(o)
    total = sum(terms.values())
    return PauliChannel({k: v / total for k, v in terms.items()}, n=len(estimate.subset))


@dataclass
class JointErrorModel:
    """
    Conditional tables ``cond[i][x_sep][x_i]`` with ``x_sep`` a tuple of
    two-qubit Paulis, one per separator pair.
    """

    graph: FactorGraph
    cond: dict
    threshold: float = 1e-12
    flags: dict = field(default_factory=dict)

    @classmethod
    def from_marginals(cls, graph: FactorGraph, marginals: Mapping, threshold: float = 1e-12) -> "JointErrorModel":
        """
        ``marginals[(i, *separators)]`` is a :class:`PauliChannel` on the
        qubits of those pairs in that order.  Each conditional is the joint
        marginal divided by its own marginal over the separators, so rows sum
        to one even when the inputs disagree slightly.
        """
        cond = {}
        flags = {}
        for f in graph.factors:
            key = (f.pair,) + f.separators
            if key not in marginals:
                raise KeyError(f"missing marginal over pairs {key}")
            mu = marginals[key]
            table: dict = {}
            for p, v in mu.terms.items():
                xi = restrict(p, (0, 1))
                xs = tuple(restrict(p, (2 + 2 * k, 3 + 2 * k)) for k in range(len(f.separators)))
                row = table.setdefault(xs, {})
                row[xi] = row.get(xi, 0.0) + v
            rows = {}
            for xs, row in table.items():
                tot = sum(row.values())
                if tot <= 0:
                    flags.setdefault(f.pair, []).append(xs)
                    continue
                rows[xs] = {xi: v / tot for xi, v in row.items() if v > 0}
            cond[f.pair] = rows
        return cls(graph, cond, threshold, flags)

    @classmethod
    def from_channel(cls, graph: FactorGraph, channel, threshold: float = 1e-12) -> "JointErrorModel":
        marg = {}
        for f in graph.factors:
            key = (f.pair,) + f.separators
            marg[key] = marginalize(channel, graph.qubits(key))
        return cls.from_marginals(graph, marg, threshold)

    @classmethod
    def from_estimates(cls, graph: FactorGraph, estimates: Sequence, threshold: float = 1e-12) -> "JointErrorModel":
        """Model from reconstructed marginals whose subsets are the factor qubit tuples."""
        by_subset = {tuple(e.subset): e for e in estimates}
        marg = {}
        for f in graph.factors:
            key = (f.pair,) + f.separators
            qubits = graph.qubits(key)
            if qubits in by_subset:
                marg[key] = split_orbit_mass(by_subset[qubits])
                continue
            # fall back to the marginal of any estimate that contains these qubits
            host = next((e for s, e in by_subset.items() if set(qubits) <= set(s)), None)
            if host is None:
                raise KeyError(f"no marginal estimate over qubits {qubits}")
            local = [tuple(host.subset).index(q) for q in qubits]
            marg[key] = split_orbit_mass(host).marginalize(local)
        return cls.from_marginals(graph, marg, threshold)

    def _pair_values(self, x: PauliOperator):
        g = self.graph
        if x.n != g.n:
            raise ValueError(f"error acts on {x.n} qubits, model on {g.n}")
        covered = set(q for p in g.pairs for q in p)
        if any(q not in covered for q in x.support):
            return None
        return [restrict(x, p) for p in g.pairs]

    def probability(self, x: PauliOperator) -> float:
        vals = self._pair_values(x)
        if vals is None:
            return 0.0
        prob = 1.0
        for f in self.graph.factors:
            row = self.cond[f.pair].get(tuple(vals[s] for s in f.separators))
            if row is None:
                return 0.0
            prob *= row.get(vals[f.pair], 0.0)
            if prob == 0.0:
                return 0.0
        return prob

    def pair_marginal(self, i: int, threshold: float = 0.0) -> PauliChannel:
        acc = {}
        for x, p in self.enumerate(threshold=threshold).items():
            k = restrict(x, self.graph.pairs[i])
            acc[k] = acc.get(k, 0.0) + p
        return PauliChannel(acc, n=2)

    def enumerate(self, threshold: float | None = None, cap: int = 10_000_000) -> dict:
        """
        Joint support as ``{PauliOperator: probability}``, built factor by
        factor from the last; partial products below ``threshold`` are pruned.
        """
        thr = self.threshold if threshold is None else threshold
        g = self.graph
        partial = [({}, 1.0)]
        for f in reversed(g.factors):
            nxt = []
            for assign, p in partial:
                row = self.cond[f.pair].get(tuple(assign[s] for s in f.separators), {})
                for xi, v in row.items():
                    pv = p * v
                    if pv < thr or pv == 0.0:
                        continue
                    a = dict(assign)
                    a[f.pair] = xi
                    nxt.append((a, pv))
                    if len(nxt) > cap:
                        done = {self._assemble(a): q for a, q in nxt}
                        raise EnumerationCapError(f"support exceeds {cap} configurations", done,
                                                  float(sum(done.values())))
            partial = nxt
        out = {}
        for a, p in partial:
            x = self._assemble(a)
            out[x] = out.get(x, 0.0) + p
        return out

    def _assemble(self, assign: dict) -> PauliOperator:
        x = z = 0
        for i, v in assign.items():
            e = embed(v, self.graph.pairs[i], self.graph.n)
            x |= e.x
            z |= e.z
        return PauliOperator(self.graph.n, x, z)


def joint_probability(model: JointErrorModel, x: PauliOperator) -> float:
    return model.probability(x)


def total_variation(p: Mapping, q: Mapping) -> float:
    keys = set(p) | set(q)
    return 0.5 * float(np.sum([abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys]))


def random_chain_channel(graph: FactorGraph, rng: np.random.Generator, support: int = 3,
                         p_identity: float = 0.97) -> PauliChannel:
    """
    A channel that factors exactly over ``graph``: each conditional row puts
    ``p_identity`` on the identity and spreads the rest over ``support - 1``
    random non-identity pair errors.
    """
    errs = [PauliOperator(2, i & 3, i >> 2) for i in range(1, 16)]
    tables = {}
    for f in reversed(graph.factors):
        rows = {}
        for xs in _separator_values(graph, f, tables):
            picks = rng.choice(len(errs), size=support - 1, replace=False)
            w = rng.dirichlet(np.ones(support - 1)) * (1 - p_identity)
            row = {PauliOperator.identity(2): p_identity}
            row.update({errs[k]: float(v) for k, v in zip(picks, w)})
            rows[xs] = row
        tables[f.pair] = rows
    model = JointErrorModel(graph, tables, threshold=0.0)
    return PauliChannel(model.enumerate(threshold=0.0), n=graph.n)


def _separator_values(graph: FactorGraph, f: Factor, tables: dict) -> list:
    """All separator assignments reachable under the already-built later factors."""
    if not f.separators:
        return [()]
    values = {s: set() for s in f.separators}
    for s in f.separators:
        for row in tables[s].values():
            values[s].update(row)
    return [tuple(c) for c in itertools.product(*(sorted(values[s]) for s in f.separators))]
