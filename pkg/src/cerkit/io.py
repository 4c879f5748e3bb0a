"""
Line-oriented text formats shared by the command-line tools.

Every writer can prepend provenance comments (``# config_hash=... seed=...``)
so repeated runs with the same inputs produce identical files.
"""
from __future__ import annotations

import hashlib
import math
from pathlib import Path

from .channels import FactorizedChannel, PauliChannel
from .estimation import MarginalEstimate
from .pauli import HardCycle, PauliOperator


class FormatError(ValueError):
    pass


# --------------------------------------------------------------------------
# channels


def parse_channel(text: str):
    """
    ``<PauliString> <probability>`` per line.  A ``[factor q0 q1 ...]`` line
    starts a factor acting on those qubits (local strings follow) and an
    optional ``[register n]`` line fixes the register size; with factors the
    result is a :class:`FactorizedChannel`.
    """
    register = None
    factors = []
    current = None
    flat = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise FormatError(f"line {lineno}: unterminated section header")
            head, *args = line[1:-1].split()
            if head == "register":
                register = int(args[0])
            elif head == "factor":
                current = (tuple(int(a) for a in args), {})
                factors.append(current)
            else:
                raise FormatError(f"line {lineno}: unknown section {head!r}")
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"line {lineno}: expected '<Pauli> <probability>'")
        try:
            p = PauliOperator.from_string(parts[0])
            v = float(parts[1])
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        target = current[1] if current is not None else flat
        if p in target:
            raise FormatError(f"line {lineno}: duplicate term {parts[0]}")
        target[p] = v
    if factors and flat:
        raise FormatError("terms outside a [factor] section in a factorized channel file")
    if not factors:
        if not flat:
            raise FormatError("channel file has no terms")
        ch = _channel(flat)
        if register is not None and register != ch.n:
            raise FormatError(f"register size {register} does not match {ch.n}-qubit terms")
        return ch
    n = register if register is not None else max(q for qs, _ in factors for q in qs) + 1
    return FactorizedChannel(n, [(qs, _channel(terms)) for qs, terms in factors])


def _channel(terms: dict) -> PauliChannel:
    n = next(iter(terms)).n
    if PauliOperator.identity(n) not in terms:
        raise FormatError("identity term is mandatory")
    try:
        return PauliChannel(terms)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def format_channel(channel) -> str:
    lines = []
    if isinstance(channel, FactorizedChannel):
        lines.append(f"[register {channel.n}]")
        for qs, ch in channel.factors:
            lines.append("[factor " + " ".join(map(str, qs)) + "]")
            lines.extend(_terms(ch))
    else:
        lines.extend(_terms(channel))
    return "\n".join(lines) + "\n"


def _terms(ch: PauliChannel) -> list:
    return [f"{p} {v!r}" for p, v in sorted(ch.terms.items(), key=lambda t: str(t[0]))]


# --------------------------------------------------------------------------
# config and provenance


def parse_config(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"config line {lineno}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def config_hash(params: dict, inputs: dict | None = None) -> str:
    """Hash of the sorted parameters plus the contents of any input files."""
    h = hashlib.sha256()
    for k in sorted(params):
        h.update(f"{k}={params[k]}\n".encode())
    for name, path in sorted((inputs or {}).items()):
        h.update(f"{name}:{file_checksum(path)}\n".encode())
    return h.hexdigest()[:16]


def file_checksum(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def provenance(chash: str, seed: int, **extra) -> str:
    tail = "".join(f" {k}={v}" for k, v in extra.items())
    return f"# config_hash={chash} seed={seed}{tail}\n"


# --------------------------------------------------------------------------
# cycles and marginals


def cycle_from_name(name: str) -> HardCycle:
    """``single``, ``transversal7`` (16 qubits), ``transversalK`` (pairs ``(i, i+K)``) or ``identityN``."""
    if name == "single":
        return HardCycle.single_cnot()
    if name == "transversal7":
        return HardCycle.transversal()
    if name.startswith("transversal") and name[11:].isdigit():
        k = int(name[11:])
        return HardCycle.transversal(k, offset=k)
    if name.startswith("identity") and name[8:].isdigit():
        return HardCycle.identity(int(name[8:]))
    raise FormatError(f"unknown cycle {name!r}")


def format_marginals(estimates) -> str:
    return "".join(e.to_text() for e in estimates)


def parse_marginals(text: str, cycle: HardCycle) -> list:
    blocks, current = [], []
    for line in text.splitlines():
        if line.startswith("# subset"):
            if current:
                blocks.append("\n".join(current))
            current = [line]
        elif current and line.strip() and not line.startswith("#"):
            current.append(line)
    if current:
        blocks.append("\n".join(current))
    if not blocks:
        raise FormatError("no marginal records found")
    return [MarginalEstimate.from_text(b, cycle) for b in blocks]


def fmt_float(v: float) -> str:
    return "nan" if math.isnan(v) else repr(float(v))
