"""
Two [[7,1,3]] Steane blocks joined by a transversal CNOT, and the split of a
joint error model into correctable and uncorrectable mass.

Block A holds qubits 0-6 and block B qubits 9-15 of a 16-qubit register.
Both stabilizer types use the Hamming parity checks, so a block corrects any
error whose X part and Z part are each stabilizer-equivalent to weight at
most one.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .pauli import HardCycle, PauliOperator, canonical_orbit, commute, embed

HAMMING = np.array([[0, 0, 0, 1, 1, 1, 1],
                    [0, 1, 1, 0, 0, 1, 1],
                    [1, 0, 1, 0, 1, 0, 1]], dtype=np.uint8)


def _mask(bits, qubits) -> int:
    return sum(1 << q for b, q in zip(bits, qubits) if b)


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True)
class SteaneCodePair:
    block_a: tuple = tuple(range(7))
    block_b: tuple = tuple(range(9, 16))
    n: int = 16

    @property
    def blocks(self) -> tuple:
        return (self.block_a, self.block_b)

    def stabilizers(self, block: int) -> list:
        """Six generators for ``block`` (0 or 1): three X type then three Z type."""
        qs = self.blocks[block]
        xs = [PauliOperator(self.n, _mask(row, qs), 0) for row in HAMMING]
        zs = [PauliOperator(self.n, 0, _mask(row, qs)) for row in HAMMING]
        return xs + zs

    def logicals(self, block: int) -> tuple:
        """Minimum-weight logical X and Z for ``block``."""
        qs = self.blocks[block]
        full = _mask([1] * 7, qs)
        lx = min((full ^ s for s in self._row_space(block)), key=lambda v: (_popcount(v), v))
        return PauliOperator(self.n, lx, 0), PauliOperator(self.n, 0, lx)

    def _row_space(self, block: int) -> list:
        qs = self.blocks[block]
        rows = [_mask(r, qs) for r in HAMMING]
        out = []
        for coeffs in itertools.product((0, 1), repeat=3):
            v = 0
            for c, r in zip(coeffs, rows):
                if c:
                    v ^= r
            out.append(v)
        return out

    @cached_property
    def _code_mask(self) -> int:
        return _mask([1] * 14, self.block_a + self.block_b)


def _on_register(code: SteaneCodePair, e: PauliOperator) -> PauliOperator:
    """Accept errors on the full register or on the 14 code qubits in block order."""
    if e.n == 14 and code.n != 14:
        e = embed(e, code.block_a + code.block_b, code.n)
    if e.n != code.n:
        raise ValueError(f"error acts on {e.n} qubits, code register has {code.n}")
    if (e.x | e.z) & ~code._code_mask:
        raise ValueError("error touches qubits outside both code blocks")
    return e


def classify_error(code: SteaneCodePair, e: PauliOperator) -> bool:
    """
    True if ``e`` is correctable: in each block the X part and the Z part are
    each stabilizer-equivalent to weight at most one.
    """
    e = _on_register(code, e)
    for b, qs in enumerate(code.blocks):
        bm = _mask([1] * 7, qs)
        space = code._row_space(b)
        for part in (e.x & bm, e.z & bm):
            if min(_popcount(part ^ s) for s in space) > 1:
                return False
    return True


def _syndrome(part: int, qs) -> tuple:
    bits = np.array([(part >> q) & 1 for q in qs], dtype=np.uint8)
    return tuple((HAMMING @ bits) % 2)


def decoder_oracle(code: SteaneCodePair, e: PauliOperator) -> bool:
    """
    Syndrome lookup decoding per block and type, then a logical check: the
    residual must commute with the opposite-type logical.
    """
    e = _on_register(code, e)
    for b, qs in enumerate(code.blocks):
        table = {(0, 0, 0): 0}
        for k, q in enumerate(qs):
            table[tuple(HAMMING[:, k])] = 1 << q
        lx, lz = code.logicals(b)
        bm = _mask([1] * 7, qs)
        for part, logical, is_x in ((e.x & bm, lz, True), (e.z & bm, lx, False)):
            residual = part ^ table[_syndrome(part, qs)]
            if _syndrome(residual, qs) != (0, 0, 0):
                return False
            r = PauliOperator(code.n, residual, 0) if is_x else PauliOperator(code.n, 0, residual)
            if commute(r, logical):
                return False
    return True


def classify_orbit(code: SteaneCodePair, cycle: HardCycle, p: PauliOperator) -> bool:
    """Worst case over the orbit of ``p``: correctable only if every member is."""
    return all(classify_error(code, m) for m in canonical_orbit(cycle, p))


@dataclass
class LogicalRates:
    """
    ``total = 1 - p(identity)``; ``correctable + uncorrectable`` covers the
    enumerated support and ``residual_mass`` is what pruning left out.
    """

    total: float
    correctable: float
    uncorrectable: float
    residual_mass: float
    top_uncorrectable: list = field(default_factory=list)

    def to_text(self) -> str:
        lines = [
            f"total_error {self.total!r}",
            f"correctable_rate {self.correctable!r}",
            f"uncorrectable_rate {self.uncorrectable!r}",
            f"residual_mass {self.residual_mass!r}",
        ]
        for label, p in self.top_uncorrectable:
            lines.append(f"uncorrectable_orbit {label} {p!r}")
        return "\n".join(lines) + "\n"


def logical_rates(model, code: SteaneCodePair, cycle: HardCycle, threshold: float | None = None,
                  cap: int = 10_000_000, top: int = 10) -> LogicalRates:
    """
    Split the enumerated joint support of ``model`` into correctable and
    uncorrectable mass, classifying each error by the worst member of its orbit.
    """
    support = model.enumerate(threshold=threshold, cap=cap)
    return rates_from_support(support, code, cycle, top=top)


def rates_from_support(support: dict, code: SteaneCodePair, cycle: HardCycle, top: int = 10) -> LogicalRates:
    cache = {}
    corr = unc = 0.0
    p_id = 0.0
    by_orbit = {}
    for x, p in sorted(support.items(), key=lambda kv: str(kv[0])):
        if x.is_identity():
            p_id += p
            continue
        o = canonical_orbit(cycle, x)
        if o.key not in cache:
            cache[o.key] = all(classify_error(code, m) for m in o)
        if cache[o.key]:
            corr += p
        else:
            unc += p
            by_orbit[o.label] = by_orbit.get(o.label, 0.0) + p
    mass = p_id + corr + unc
    worst = sorted(by_orbit.items(), key=lambda kv: (-kv[1], kv[0]))[:top]
    return LogicalRates(1.0 - p_id, corr, unc, max(0.0, 1.0 - mass), worst)


def rates_vector(r: LogicalRates):
    return [r.total, r.correctable, r.uncorrectable]
