"""
Pauli operators modulo phase and their action under Clifford hard cycles.

A Pauli on ``n`` qubits is stored as two integer bit masks, ``x`` and ``z``;
bit ``q`` of each mask is the X (resp. Z) component on qubit ``q``.  Text form
lists qubit 0 first, so ``PauliOperator.from_string("ZXIY")`` has Z on qubit 0
and Y on qubit 3.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

_LETTERS = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
_BITS = {v: k for k, v in _LETTERS.items()}

QubitSubset = tuple  # ordered tuple of distinct qubit indices


class DimensionError(ValueError):
    """Operands live on different numbers of qubits."""


class UnsupportedSubsetError(ValueError):
    """A qubit subset splits the support of a hard-cycle gate."""


@dataclass(frozen=True, order=True)
class PauliOperator:
    n: int
    x: int
    z: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("a Pauli needs at least one qubit")
        full = (1 << self.n) - 1
        if self.x & ~full or self.z & ~full or self.x < 0 or self.z < 0:
            raise ValueError("bit masks exceed the qubit count")

    @classmethod
    def identity(cls, n: int) -> "PauliOperator":
        return cls(n, 0, 0)

    @classmethod
    def from_string(cls, label: str) -> "PauliOperator":
        x = z = 0
        for q, ch in enumerate(label.strip().upper()):
            try:
                bx, bz = _BITS[ch]
            except KeyError:
                raise ValueError(f"invalid Pauli letter {ch!r} in {label!r}") from None
            x |= bx << q
            z |= bz << q
        return cls(len(label.strip()), x, z)

    @classmethod
    def from_bits(cls, x_bits, z_bits) -> "PauliOperator":
        x_bits = np.asarray(x_bits, dtype=np.uint8).ravel()
        z_bits = np.asarray(z_bits, dtype=np.uint8).ravel()
        if x_bits.shape != z_bits.shape:
            raise DimensionError("x and z bit vectors differ in length")
        weights = 1 << np.arange(x_bits.size, dtype=object)
        return cls(int(x_bits.size), int((x_bits * weights).sum()), int((z_bits * weights).sum()))

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PauliOperator":
        bx, bz = _BITS[letter]
        return cls(n, bx << qubit, bz << qubit)

    def letter(self, q: int) -> str:
        return _LETTERS[((self.x >> q) & 1, (self.z >> q) & 1)]

    @property
    def x_bits(self) -> np.ndarray:
        return np.array([(self.x >> q) & 1 for q in range(self.n)], dtype=np.uint8)

    @property
    def z_bits(self) -> np.ndarray:
        return np.array([(self.z >> q) & 1 for q in range(self.n)], dtype=np.uint8)

    @property
    def support(self) -> tuple:
        mask = self.x | self.z
        return tuple(q for q in range(self.n) if (mask >> q) & 1)

    @property
    def weight(self) -> int:
        return bin(self.x | self.z).count("1")

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def __mul__(self, other: "PauliOperator") -> "PauliOperator":
        return multiply(self, other)

    def __str__(self) -> str:
        return "".join(self.letter(q) for q in range(self.n))

    def __repr__(self) -> str:
        return f"PauliOperator('{self}')"


def _check_dims(p: PauliOperator, q: PauliOperator) -> None:
    if p.n != q.n:
        raise DimensionError(f"qubit counts differ: {p.n} vs {q.n}")


def commute(p: PauliOperator, q: PauliOperator) -> int:
    """Symplectic product: 1 if ``p`` and ``q`` anticommute, else 0."""
    _check_dims(p, q)
    return bin((p.x & q.z) ^ (p.z & q.x)).count("1") & 1


def multiply(p: PauliOperator, q: PauliOperator) -> PauliOperator:
    _check_dims(p, q)
    return PauliOperator(p.n, p.x ^ q.x, p.z ^ q.z)


def check_subset(subset: Sequence[int], n: int) -> tuple:
    subset = tuple(int(q) for q in subset)
    if len(set(subset)) != len(subset):
        raise ValueError(f"duplicate qubit in subset {subset}")
    for q in subset:
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} out of range for {n} qubits")
    if not subset:
        raise ValueError("empty qubit subset")
    return subset


def restrict(p: PauliOperator, subset: Sequence[int]) -> PauliOperator:
    """Restriction of ``p`` to ``subset``; position ``k`` holds qubit ``subset[k]``."""
    subset = check_subset(subset, p.n)
    x = z = 0
    for k, q in enumerate(subset):
        x |= ((p.x >> q) & 1) << k
        z |= ((p.z >> q) & 1) << k
    return PauliOperator(len(subset), x, z)


def embed(p: PauliOperator, subset: Sequence[int], n: int) -> PauliOperator:
    """Inverse of :func:`restrict`: place ``p`` on ``subset`` of an ``n``-qubit register."""
    subset = check_subset(subset, n)
    if len(subset) != p.n:
        raise DimensionError("subset size does not match Pauli size")
    x = z = 0
    for k, q in enumerate(subset):
        x |= ((p.x >> k) & 1) << q
        z |= ((p.z >> k) & 1) << q
    return PauliOperator(n, x, z)


def all_paulis(n: int) -> list:
    """All ``4**n`` Paulis, indexed so that ``index = x | (z << n)``."""
    return [PauliOperator(n, i & ((1 << n) - 1), i >> n) for i in range(4 ** n)]


def pauli_index(p: PauliOperator) -> int:
    return p.x | (p.z << p.n)


class HardCycle:
    """
    A Clifford layer acting on Paulis by conjugation, signs discarded.

    Built either from disjoint CNOT pairs ``(control, target)`` or from the
    images of the single-qubit generators (``x_images[q]`` is the image of X_q,
    ``z_images[q]`` that of Z_q, each as a :class:`PauliOperator`).
    """

    def __init__(self, n: int, gates: Iterable = (), x_images=None, z_images=None, name: str = ""):
        self.n = int(n)
        self.gates = tuple((int(c), int(t)) for c, t in gates)
        self.name = name
        self._cnot = x_images is None
        used = [q for g in self.gates for q in g]
        if len(set(used)) != len(used):
            raise ValueError("gate supports must be pairwise disjoint")
        for q in used:
            if not 0 <= q < self.n:
                raise IndexError(f"gate qubit {q} out of range")
        if x_images is not None:
            if self.gates:
                raise ValueError("give either CNOT gates or generator images, not both")
            self._x_img = tuple((p.x, p.z) for p in x_images)
            self._z_img = tuple((p.x, p.z) for p in z_images)
            if len(self._x_img) != self.n or len(self._z_img) != self.n:
                raise DimensionError("need one image per qubit")
            self._check_symplectic()
        else:
            xi = [(1 << q, 0) for q in range(self.n)]
            zi = [(0, 1 << q) for q in range(self.n)]
            for c, t in self.gates:
                xi[c] = (xi[c][0] | (1 << t), 0)
                zi[t] = (0, zi[t][1] | (1 << c))
            self._x_img, self._z_img = tuple(xi), tuple(zi)

    @classmethod
    def cnot_layer(cls, n: int, gates, name: str = "") -> "HardCycle":
        return cls(n, gates, name=name)

    @classmethod
    def identity(cls, n: int) -> "HardCycle":
        return cls(n, (), name="identity")

    @classmethod
    def single_cnot(cls) -> "HardCycle":
        return cls(2, [(0, 1)], name="single")

    @classmethod
    def transversal(cls, n_pairs: int = 7, offset: int = 9, n: int | None = None) -> "HardCycle":
        """Transversal CNOT with controls ``0..n_pairs-1`` and targets shifted by ``offset``."""
        n = n if n is not None else n_pairs + offset
        name = "transversal7" if (n_pairs, offset, n) == (7, 9, 16) else f"transversal{n_pairs}"
        return cls(n, [(i, i + offset) for i in range(n_pairs)], name=name)

    def _check_symplectic(self) -> None:
        imgs = [PauliOperator(self.n, *v) for v in self._x_img + self._z_img]
        gens = [PauliOperator.single(self.n, q, "X") for q in range(self.n)]
        gens += [PauliOperator.single(self.n, q, "Z") for q in range(self.n)]
        for a, b in itertools.combinations(range(2 * self.n), 2):
            if commute(imgs[a], imgs[b]) != commute(gens[a], gens[b]):
                raise ValueError("generator images do not preserve commutation")

    def conjugate(self, p: PauliOperator) -> PauliOperator:
        if p.n != self.n:
            raise DimensionError(f"cycle acts on {self.n} qubits, Pauli has {p.n}")
        x = z = 0
        for q in range(self.n):
            if (p.x >> q) & 1:
                x ^= self._x_img[q][0]
                z ^= self._x_img[q][1]
            if (p.z >> q) & 1:
                x ^= self._z_img[q][0]
                z ^= self._z_img[q][1]
        return PauliOperator(self.n, x, z)

    __call__ = conjugate

    def inverse(self, p: PauliOperator) -> PauliOperator:
        r = self.order
        for _ in range(r - 1):
            p = self.conjugate(p)
        return p

    @cached_property
    def symplectic(self) -> np.ndarray:
        """``(2n, 2n)`` matrix M with ``[x|z]_out = [x|z]_in @ M (mod 2)``."""
        m = np.zeros((2 * self.n, 2 * self.n), dtype=np.uint8)
        for q in range(self.n):
            for row, (ix, iz) in ((q, self._x_img[q]), (self.n + q, self._z_img[q])):
                for k in range(self.n):
                    m[row, k] = (ix >> k) & 1
                    m[row, self.n + k] = (iz >> k) & 1
        return m

    def conjugate_frames(self, x: np.ndarray, z: np.ndarray):
        """Vectorised conjugation of bit arrays of shape ``(..., n)``."""
        if self._cnot:
            x = x.copy()
            z = z.copy()
            for c, t in self.gates:
                x[..., t] ^= x[..., c]
                z[..., c] ^= z[..., t]
            return x, z
        xz = np.concatenate([x, z], axis=-1).astype(np.int64) @ self.symplectic.astype(np.int64)
        xz = (xz & 1).astype(np.uint8)
        return xz[..., : self.n], xz[..., self.n:]

    @property
    def is_cnot_layer(self) -> bool:
        return self._cnot

    @cached_property
    def order(self) -> int:
        return cycle_order(self)

    def supports(self) -> list:
        """Qubit blocks that the cycle never mixes (gate supports plus idle singletons)."""
        parent = list(range(self.n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for q in range(self.n):
            for ix, iz in (self._x_img[q], self._z_img[q]):
                for k in range(self.n):
                    if ((ix | iz) >> k) & 1:
                        parent[find(k)] = find(q)
        blocks = {}
        for q in range(self.n):
            blocks.setdefault(find(q), []).append(q)
        return sorted(tuple(b) for b in blocks.values())

    def __repr__(self) -> str:
        return f"HardCycle(n={self.n}, gates={list(self.gates)})"


def conjugate(cycle: HardCycle, p: PauliOperator) -> PauliOperator:
    return cycle.conjugate(p)


def cycle_order(cycle: HardCycle, max_order: int = 10_000) -> int:
    """Least ``r >= 1`` such that ``r`` applications act trivially on every Pauli."""
    gens = [PauliOperator.single(cycle.n, q, s) for q in range(cycle.n) for s in "XZ"]
    current = list(gens)
    for r in range(1, max_order + 1):
        current = [cycle.conjugate(p) for p in current]
        if current == gens:
            return r
    raise RuntimeError("cycle order exceeds search limit")


@dataclass(frozen=True, eq=False)
class Orbit:
    """Ordered orbit ``members[k] = H^k(P)``; equality ignores the starting point."""

    members: tuple

    def __post_init__(self):
        if len(set(self.members)) != len(self.members):
            raise ValueError("orbit members must be distinct")

    @cached_property
    def key(self) -> frozenset:
        return frozenset(self.members)

    @property
    def representative(self) -> PauliOperator:
        return min(self.members, key=str)

    @property
    def label(self) -> str:
        return str(self.representative)

    @property
    def n(self) -> int:
        return self.members[0].n

    def is_identity(self) -> bool:
        return self.members[0].is_identity()

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, p) -> bool:
        return p in self.key

    def __eq__(self, other) -> bool:
        return isinstance(other, Orbit) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __repr__(self) -> str:
        return "Orbit{" + ",".join(str(m) for m in self.members) + "}"


def orbit(cycle: HardCycle, p: PauliOperator) -> Orbit:
    members = [p]
    q = cycle.conjugate(p)
    while q != p:
        members.append(q)
        q = cycle.conjugate(q)
    return Orbit(tuple(members))


def canonical_orbit(cycle: HardCycle, p: PauliOperator) -> Orbit:
    """Orbit of ``p`` started from its lexicographically least member."""
    return orbit(cycle, orbit(cycle, p).representative)


def induced_cycle(cycle: HardCycle, subset: Sequence[int]) -> HardCycle:
    """
    Action of ``cycle`` on Paulis supported within ``subset``, re-indexed to
    ``len(subset)`` qubits.  Raises :class:`UnsupportedSubsetError` if the cycle
    couples qubits inside ``subset`` with qubits outside it.
    """
    subset = check_subset(subset, cycle.n)
    inside = set(subset)
    for q in range(cycle.n):
        for letter in "XZ":
            img = cycle.conjugate(PauliOperator.single(cycle.n, q, letter))
            outside = [k for k in img.support if (k in inside) != (q in inside)]
            if outside:
                raise UnsupportedSubsetError(
                    f"subset {subset} splits the support of the cycle at qubit {q}"
                )
    k = len(subset)
    x_img, z_img = [], []
    for q in subset:
        for letter, store in (("X", x_img), ("Z", z_img)):
            store.append(restrict(cycle.conjugate(PauliOperator.single(cycle.n, q, letter)), subset))
    if cycle.is_cnot_layer:
        pos = {q: i for i, q in enumerate(subset)}
        gates = [(pos[c], pos[t]) for c, t in cycle.gates if c in inside]
        return HardCycle(k, gates)
    return HardCycle(k, x_images=x_img, z_images=z_img)


def enumerate_orbits(cycle: HardCycle, subset: Sequence[int] | None = None) -> list:
    """
    Partition of the Paulis on ``subset`` into orbits of the induced action.

    Each orbit starts from its lexicographically least member; the list is
    sorted by that representative, so the identity orbit comes first.
    """
    local = cycle if subset is None else induced_cycle(cycle, subset)
    seen = set()
    out = []
    for p in sorted(all_paulis(local.n), key=str):
        if p in seen:
            continue
        o = orbit(local, p)
        seen.update(o.members)
        out.append(o)
    return out
