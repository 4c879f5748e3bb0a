"""
Stochastic Pauli channels, their eigenvalues, marginals, and small dense
processes (Pauli-transfer matrices) for coherent-error studies.
"""
from __future__ import annotations

import math
from functools import reduce
from typing import Mapping, Sequence

import numpy as np

from .pauli import (
    DimensionError,
    HardCycle,
    Orbit,
    PauliOperator,
    all_paulis,
    check_subset,
    commute,
    embed,
    pauli_index,
    restrict,
)

SUM_TOL = 1e-12
MAX_DENSE_QUBITS = 4


class UnreliableEstimateError(ValueError):
    """Orbital eigenvalue product is non-positive for an even-length orbit."""


class NonPhysicalProcessError(ValueError):
    """Twirled probabilities came out negative beyond tolerance."""


class PauliChannel:
    """
    Sparse stochastic Pauli channel ``rho -> sum_i p_i P_i rho P_i``.

    ``terms`` maps :class:`PauliOperator` to probability.  The identity term is
    always present (possibly with probability zero).  Probabilities must be
    non-negative and sum to one within ``1e-12``; nothing is renormalised.
    """

    def __init__(self, terms: Mapping[PauliOperator, float], n: int | None = None):
        terms = dict(terms)
        if n is None:
            if not terms:
                raise ValueError("cannot infer qubit count of an empty channel")
            n = next(iter(terms)).n
        self.n = int(n)
        for p, v in terms.items():
            if p.n != self.n:
                raise DimensionError(f"term {p} is not on {self.n} qubits")
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"probability of {p} is {v}")
        total = math.fsum(terms.values())
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        terms.setdefault(PauliOperator.identity(self.n), 0.0)
        self.terms = terms
        self._keys = None

    @classmethod
    def identity(cls, n: int) -> "PauliChannel":
        return cls({PauliOperator.identity(n): 1.0})

    @classmethod
    def from_strings(cls, terms: Mapping[str, float]) -> "PauliChannel":
        return cls({PauliOperator.from_string(k): float(v) for k, v in terms.items()})

    @classmethod
    def from_probabilities(cls, probs, n: int, atol: float = 0.0) -> "PauliChannel":
        """Build from a dense vector indexed by :func:`pauli_index`."""
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (4 ** n,):
            raise DimensionError("dense probability vector has the wrong length")
        paulis = all_paulis(n)
        return cls({paulis[i]: float(v) for i, v in enumerate(probs) if v > atol or i == 0}, n=n)

    @property
    def p_identity(self) -> float:
        return self.terms[PauliOperator.identity(self.n)]

    def probability(self, p: PauliOperator) -> float:
        return self.terms.get(p, 0.0)

    def eigenvalue(self, p: PauliOperator) -> float:
        return eigenvalue(self, p)

    def eigenvalues(self, paulis: Sequence[PauliOperator]) -> np.ndarray:
        """Vectorised :meth:`eigenvalue` over many Paulis (up to 62 qubits)."""
        if self.n > 62:
            raise DimensionError("bit-mask eigenvalues limited to 62 qubits")
        keys = list(self.terms)
        probs = np.array([self.terms[k] for k in keys])
        tx = np.array([k.x for k in keys], dtype=np.int64)
        tz = np.array([k.z for k in keys], dtype=np.int64)
        px = np.array([p.x for p in paulis], dtype=np.int64)[:, None]
        pz = np.array([p.z for p in paulis], dtype=np.int64)[:, None]
        parity = np.bitwise_count((px & tz) ^ (pz & tx)) & 1
        return (1.0 - 2.0 * parity) @ probs

    def marginalize(self, subset: Sequence[int]) -> "PauliChannel":
        return marginalize(self, subset)

    def dense_probabilities(self) -> np.ndarray:
        if self.n > 10:
            raise DimensionError("dense form limited to 10 qubits")
        out = np.zeros(4 ** self.n)
        for p, v in self.terms.items():
            out[pauli_index(p)] += v
        return out

    def dense_eigenvalues(self) -> np.ndarray:
        return symplectic_fourier(self.dense_probabilities())

    def _arrays(self):
        if self._keys is None:
            keys = sorted(self.terms)
            probs = np.array([self.terms[k] for k in keys])
            xb = np.array([k.x_bits for k in keys], dtype=np.uint8)
            zb = np.array([k.z_bits for k in keys], dtype=np.uint8)
            self._keys = (probs / probs.sum(), xb, zb)
        return self._keys

    def sample(self, rng: np.random.Generator, size) -> tuple:
        """Draw Pauli errors; returns ``(x, z)`` bit arrays of shape ``size + (n,)``."""
        probs, xb, zb = self._arrays()
        idx = rng.choice(len(probs), size=size, p=probs)
        return xb[idx], zb[idx]

    def compose(self, other: "PauliChannel") -> "PauliChannel":
        """Channel applying ``other`` then ``self`` (Pauli channels commute)."""
        if other.n != self.n:
            raise DimensionError("cannot compose channels of different size")
        acc = {}
        for p, a in self.terms.items():
            for q, b in other.terms.items():
                k = p * q
                acc[k] = acc.get(k, 0.0) + a * b
        return PauliChannel(acc, n=self.n)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliChannel) or other.n != self.n:
            return NotImplemented
        keys = set(self.terms) | set(other.terms)
        return all(self.probability(k) == other.probability(k) for k in keys)

    def __repr__(self) -> str:
        body = ", ".join(f"{p}: {v:.6g}" for p, v in sorted(self.terms.items(), key=lambda t: str(t[0])))
        return f"PauliChannel({{{body}}})"


class FactorizedChannel:
    """
    Independent Pauli channels on disjoint qubit blocks of an ``n``-qubit register.

    Qubits not covered by any factor are noiseless.  Offers the same
    ``eigenvalue`` / ``marginalize`` / ``sample`` surface as :class:`PauliChannel`
    without expanding the product.
    """

    def __init__(self, n: int, factors: Sequence):
        self.n = int(n)
        self.factors = []
        used = set()
        for subset, channel in factors:
            subset = check_subset(subset, self.n)
            if used & set(subset):
                raise ValueError("factor supports overlap")
            if channel.n != len(subset):
                raise DimensionError("factor channel size does not match its support")
            used |= set(subset)
            self.factors.append((subset, channel))

    def eigenvalue(self, p: PauliOperator) -> float:
        if p.n != self.n:
            raise DimensionError("Pauli size does not match channel")
        return float(np.prod([c.eigenvalue(restrict(p, s)) for s, c in self.factors]))

    def marginalize(self, subset: Sequence[int]) -> PauliChannel:
        subset = check_subset(subset, self.n)
        pos = {q: k for k, q in enumerate(subset)}
        acc = {PauliOperator.identity(len(subset)): 1.0}
        for s, c in self.factors:
            inner = [q for q in s if q in pos]
            if not inner:
                continue
            local = c.marginalize([s.index(q) for q in inner])
            placed = {embed(p, [pos[q] for q in inner], len(subset)): v for p, v in local.terms.items()}
            nxt = {}
            for a, pa in acc.items():
                for b, pb in placed.items():
                    k = a * b
                    nxt[k] = nxt.get(k, 0.0) + pa * pb
            acc = nxt
        return PauliChannel(acc, n=len(subset))

    def sample(self, rng: np.random.Generator, size) -> tuple:
        size = (size,) if np.isscalar(size) else tuple(size)
        x = np.zeros(size + (self.n,), dtype=np.uint8)
        z = np.zeros_like(x)
        for s, c in self.factors:
            fx, fz = c.sample(rng, size)
            x[..., list(s)] = fx
            z[..., list(s)] = fz
        return x, z

    def to_channel(self) -> PauliChannel:
        return self.marginalize(tuple(range(self.n))) if self.n else None

    def __repr__(self) -> str:
        return f"FactorizedChannel(n={self.n}, factors={[s for s, _ in self.factors]})"


def symplectic_fourier(v: np.ndarray) -> np.ndarray:
    """
    ``out[i] = sum_j (-1)^omega(P_i, P_j) v[j]`` over Paulis indexed by
    :func:`pauli_index`.  Applied twice it returns ``4**n * v``.
    """
    v = np.asarray(v, dtype=float)
    size = v.size
    n2 = size.bit_length() - 1
    if 1 << n2 != size or n2 % 2:
        raise DimensionError("length must be a power of four")
    n = n2 // 2
    idx = np.arange(size)
    swapped = (idx >> n) | ((idx & ((1 << n) - 1)) << n)
    return fwht(v[swapped])


def fwht(v: np.ndarray) -> np.ndarray:
    """Unnormalised fast Walsh-Hadamard transform of a length ``2**k`` vector."""
    a = np.array(v, dtype=float, copy=True)
    h = 1
    while h < a.size:
        a = a.reshape(-1, 2, h)
        a = np.stack([a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]], axis=1)
        h *= 2
    return a.reshape(-1)


def probabilities_from_eigenvalues(lams: np.ndarray) -> np.ndarray:
    lams = np.asarray(lams, dtype=float)
    return symplectic_fourier(lams) / lams.size


def eigenvalue(channel, p: PauliOperator) -> float:
    """``lambda_P = sum_j (-1)^omega(P, P_j) p_j`` over the channel's support."""
    if isinstance(channel, FactorizedChannel):
        return channel.eigenvalue(p)
    if p.n != channel.n:
        raise DimensionError("Pauli size does not match channel")
    return math.fsum(-v if commute(p, q) else v for q, v in channel.terms.items())


def orbital_eigenvalue(channel, orb: Orbit) -> float:
    """Geometric mean of the member eigenvalues of ``orb``."""
    return geometric_mean([eigenvalue(channel, p) for p in orb])


def geometric_mean(values) -> float:
    values = [float(v) for v in values]
    prod = float(np.prod(values))
    k = len(values)
    if prod > 0:
        return prod ** (1.0 / k)
    if prod == 0:
        if k % 2 == 0 and any(v < 0 for v in values):
            raise UnreliableEstimateError("zero product with negative members in an even orbit")
        return 0.0
    if k % 2 == 1:
        return -((-prod) ** (1.0 / k))
    raise UnreliableEstimateError(f"negative eigenvalue product {prod:.3g} for an orbit of length {k}")


def marginalize(channel, subset: Sequence[int]) -> PauliChannel:
    """``mu_S(P) = sum of p(P_i) over P_i whose restriction to S equals P``."""
    if isinstance(channel, FactorizedChannel):
        return channel.marginalize(subset)
    subset = check_subset(subset, channel.n)
    acc = {}
    parts = {}
    for p, v in channel.terms.items():
        k = restrict(p, subset)
        parts.setdefault(k, []).append(v)
    for k, vals in parts.items():
        acc[k] = math.fsum(vals)
    return PauliChannel(acc, n=len(subset))


def orbit_marginal(channel, cycle: HardCycle, subset: Sequence[int], orb: Orbit) -> float:
    """Total marginal probability on ``subset`` of the Paulis in ``orb``."""
    subset = check_subset(subset, cycle.n)
    if orb.n != len(subset):
        raise DimensionError("orbit must live on the restricted subset")
    marg = marginalize(channel, subset)
    return math.fsum(marg.probability(q) for q in orb)


def orbit_marginals(channel, cycle: HardCycle, subset: Sequence[int], orbits) -> dict:
    marg = marginalize(channel, subset)
    return {o: math.fsum(marg.probability(q) for q in o) for o in orbits}


def random_sparse_channel(
    n: int,
    n_terms: int,
    rng: np.random.Generator,
    p_identity: float = 0.9,
    concentration: float = 1.0,
) -> PauliChannel:
    """Identity weight ``p_identity`` plus ``n_terms`` random non-identity terms."""
    nontrivial = 4 ** n - 1
    n_terms = min(n_terms, nontrivial)
    picks = rng.choice(nontrivial, size=n_terms, replace=False) + 1
    weights = rng.dirichlet(np.full(n_terms, concentration)) * (1.0 - p_identity)
    paulis = all_paulis(n)
    terms = {paulis[0]: p_identity}
    for i, w in zip(picks, weights):
        terms[paulis[int(i)]] = float(w)
    total = math.fsum(terms.values())
    terms[paulis[0]] += 1.0 - total
    return PauliChannel(terms, n=n)


# --------------------------------------------------------------------------
# Dense Pauli-transfer matrices (n <= 4)

_SINGLE = {
    (0, 0): np.eye(2, dtype=complex),
    (1, 0): np.array([[0, 1], [1, 0]], dtype=complex),
    (0, 1): np.array([[1, 0], [0, -1]], dtype=complex),
    (1, 1): np.array([[0, -1j], [1j, 0]], dtype=complex),
}


def pauli_matrix(p: PauliOperator) -> np.ndarray:
    """Dense Hermitian matrix; qubit 0 is the leftmost tensor factor."""
    mats = [_SINGLE[((p.x >> q) & 1, (p.z >> q) & 1)] for q in range(p.n)]
    return reduce(np.kron, mats)


def _pauli_basis(n: int):
    return [pauli_matrix(p) for p in all_paulis(n)]


class DenseProcess:
    """Pauli-transfer matrix ``R[i, j] = tr(P_i G(P_j)) / 2**n`` for ``n <= 4``."""

    def __init__(self, n: int, matrix):
        if n > MAX_DENSE_QUBITS:
            raise DimensionError(f"dense processes limited to {MAX_DENSE_QUBITS} qubits")
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (4 ** n, 4 ** n):
            raise DimensionError("transfer matrix has the wrong shape")
        if abs(matrix[0, 0] - 1) > 1e-9 or np.any(np.abs(matrix[0, 1:]) > 1e-9):
            raise ValueError("process is not trace preserving")
        self.n = n
        self.matrix = matrix

    @classmethod
    def identity(cls, n: int) -> "DenseProcess":
        return cls(n, np.eye(4 ** n))

    @classmethod
    def from_unitary(cls, u: np.ndarray, n: int) -> "DenseProcess":
        basis = _pauli_basis(n)
        ud = u.conj().T
        m = np.empty((4 ** n, 4 ** n))
        images = [u @ b @ ud for b in basis]
        for i, bi in enumerate(basis):
            for j, img in enumerate(images):
                m[i, j] = np.real(np.trace(bi @ img)) / 2 ** n
        return cls(n, m)

    @classmethod
    def from_pauli_channel(cls, channel: PauliChannel) -> "DenseProcess":
        return cls(channel.n, np.diag(channel.dense_eigenvalues()))

    @classmethod
    def from_cycle(cls, cycle: HardCycle) -> "DenseProcess":
        if not cycle.is_cnot_layer:
            raise ValueError("dense construction needs an explicit CNOT layer")
        return cls.from_unitary(cnot_layer_unitary(cycle), cycle.n)

    def compose(self, other: "DenseProcess") -> "DenseProcess":
        """Process applying ``other`` first, then ``self``."""
        return DenseProcess(self.n, self.matrix @ other.matrix)

    def eigenvalue(self, p: PauliOperator) -> float:
        i = pauli_index(p)
        return float(self.matrix[i, i])


def cnot_layer_unitary(cycle: HardCycle) -> np.ndarray:
    n = cycle.n
    dim = 2 ** n
    perm = np.empty(dim, dtype=int)
    for b in range(dim):
        bits = [(b >> (n - 1 - q)) & 1 for q in range(n)]
        for c, t in cycle.gates:
            bits[t] ^= bits[c]
        perm[b] = sum(bit << (n - 1 - q) for q, bit in enumerate(bits))
    u = np.zeros((dim, dim))
    u[perm, np.arange(dim)] = 1.0
    return u.astype(complex)


def unitary_process(generator: PauliOperator, angle: float) -> DenseProcess:
    """Transfer matrix of ``exp(-i angle P / 2)`` for the Pauli ``generator``."""
    n = generator.n
    if n > MAX_DENSE_QUBITS:
        raise DimensionError(f"dense processes limited to {MAX_DENSE_QUBITS} qubits")
    pm = pauli_matrix(generator)
    u = math.cos(angle / 2) * np.eye(2 ** n) - 1j * math.sin(angle / 2) * pm
    return DenseProcess.from_unitary(u, n)


def twirl(process: DenseProcess, tol: float = 1e-9) -> PauliChannel:
    """Pauli twirl: keep the transfer-matrix diagonal and invert to probabilities."""
    lams = np.diag(process.matrix).copy()
    probs = probabilities_from_eigenvalues(lams)
    if probs.min() < -tol:
        raise NonPhysicalProcessError(f"twirled probability {probs.min():.3g} < 0")
    probs = np.where(probs < 1e-15, 0.0, probs)
    return PauliChannel.from_probabilities(probs, process.n)
