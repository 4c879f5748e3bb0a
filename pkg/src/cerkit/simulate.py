"""
Forward simulation of randomized-compiled benchmarking circuits.

A circuit prepares a Pauli product state, applies ``m`` noisy repetitions of
the hard cycle (each preceded by a uniformly random Pauli layer), undoes the
compiled Pauli frame, and measures every qubit in its preparation basis.
Expectation values of product observables are products of single-qubit
outcomes.

Two engines are provided:

* :func:`run_monte_carlo` samples Pauli errors shot by shot and tracks them as
  a Pauli frame.  For Pauli noise the random layers cancel exactly, so they are
  not simulated; only the grouping of shots into randomizations matters.
* :func:`run_dense` propagates Pauli-transfer vectors (``n <= 4``) through each
  specific random circuit, so coherent noise shows its per-randomization
  scatter.

Random streams are keyed by ``(seed, *stream, m, randomization)`` through
:class:`numpy.random.SeedSequence`, so results do not depend on the order or
degree of parallel execution.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import DenseProcess, FactorizedChannel, eigenvalue
from .pauli import HardCycle, PauliOperator, all_paulis, canonical_orbit, pauli_index

_PREP_BITS = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


class PrepError(ValueError):
    """The requested preparation is not a Pauli product eigenstate."""


def parse_prep(labels: Sequence[str], n: int) -> tuple:
    """``["Z+", "X-", ...]`` -> tuple of ``(letter, sign)``."""
    if len(labels) != n:
        raise PrepError(f"need {n} preparation labels, got {len(labels)}")
    out = []
    for lab in labels:
        lab = lab.strip().replace("−", "-")
        if len(lab) != 2 or lab[0] not in _PREP_BITS or lab[1] not in "+-":
            raise PrepError(f"cannot prepare {lab!r}; expected e.g. 'Z+' or 'X-'")
        out.append((lab[0], 1 if lab[1] == "+" else -1))
    return tuple(out)


def prep_stabilizer(prep: Sequence, subset: Sequence[int] | None = None) -> PauliOperator:
    n = len(prep)
    subset = range(n) if subset is None else subset
    x = z = 0
    for q in subset:
        bx, bz = _PREP_BITS[prep[q][0]]
        x |= bx << q
        z |= bz << q
    return PauliOperator(n, x, z)


def compatible(observable: PauliOperator, prep: Sequence) -> bool:
    """True if ``observable`` is a product of the prepared single-qubit stabilizers."""
    return all(observable.letter(q) == prep[q][0] for q in observable.support)


def compatible_observables(prep: Sequence, subsets) -> list:
    """Non-identity observables readable from ``prep`` and supported in one subset."""
    out = []
    for subset in subsets:
        subset = tuple(subset)
        for mask in range(1, 1 << len(subset)):
            chosen = [q for k, q in enumerate(subset) if (mask >> k) & 1]
            p = prep_stabilizer(prep, chosen)
            if p not in out:
                out.append(p)
    return sorted(out, key=str)


@dataclass(frozen=True)
class CircuitSpec:
    """
    One preparation and a set of sequence lengths for a noisy hard cycle.

    ``noise`` is a :class:`PauliChannel` or :class:`FactorizedChannel` for the
    Monte Carlo engine, or additionally a :class:`DenseProcess` for
    :func:`run_dense`.  ``spam`` is the per-qubit readout flip probability.
    """

    hard_cycle: HardCycle
    lengths: tuple
    prep: tuple
    noise: object
    seed: int = 0
    stream: tuple = ()
    easy_noise: object = None
    spam: float = 0.0
    idle_noise: object = None
    idle_slots: int = 0
    observables: tuple = None
    state_index: int = 0

    def __post_init__(self):
        n = self.hard_cycle.n
        prep = self.prep
        if prep and isinstance(prep[0], str):
            prep = parse_prep(prep, n)
        object.__setattr__(self, "prep", tuple(prep))
        if len(self.prep) != n:
            raise PrepError("preparation does not cover the register")
        lengths = tuple(int(m) for m in np.atleast_1d(self.lengths))
        if any(m < 0 for m in lengths):
            raise ValueError("sequence lengths must be non-negative")
        r = self.hard_cycle.order
        bad = [m for m in lengths if m % r]
        if bad:
            raise ValueError(f"lengths {bad} are not multiples of the cycle order {r}; product readout needs them")
        object.__setattr__(self, "lengths", lengths)
        if not 0 <= self.spam < 0.5:
            raise ValueError("spam flip probability must lie in [0, 0.5)")
        if getattr(self.noise, "n", n) != n:
            raise ValueError("noise does not act on the hard-cycle register")
        obs = self.observables
        if obs is None:
            obs = compatible_observables(self.prep, self.hard_cycle.supports())
        obs = tuple(PauliOperator.from_string(o) if isinstance(o, str) else o for o in obs)
        for o in obs:
            if not compatible(o, self.prep):
                raise PrepError(f"observable {o} cannot be read out from this preparation")
        object.__setattr__(self, "observables", obs)

    @property
    def n(self) -> int:
        return self.hard_cycle.n

    def prep_labels(self) -> list:
        return [f"{a}{'+' if s > 0 else '-'}" for a, s in self.prep]

    def ideal_signs(self) -> np.ndarray:
        signs = np.array([s for _, s in self.prep])
        return np.array([int(np.prod(signs[list(o.support)])) for o in self.observables])


class DecayDataset:
    """
    Per-randomization expectation values, one row per
    ``(state, m, observable, randomization)``.

    ``expectation`` is the raw measured mean; ``ideal`` is its noiseless value
    (``+1`` or ``-1``), so ``ideal * expectation`` decays from ``1``.  Columns
    are numpy arrays; rows appended one at a time are buffered.
    """

    COLUMNS = ("state", "m", "orbit", "observable", "randomization", "ideal", "expectation", "shots")
    _DTYPES = {"state": np.int64, "m": np.int64, "orbit": object, "observable": object,
               "randomization": np.int64, "ideal": np.int64, "expectation": float, "shots": np.int64}

    def __init__(self, n: int, seed: int = 0, columns: dict | None = None):
        self.n = int(n)
        self.seed = int(seed)
        self._cols = {c: np.asarray(columns[c], dtype=self._DTYPES[c]) if columns else
                      np.empty(0, dtype=self._DTYPES[c]) for c in self.COLUMNS}
        self._pending = []

    def _flush(self) -> None:
        if self._pending:
            block = list(zip(*self._pending))
            for c, vals in zip(self.COLUMNS, block):
                self._cols[c] = np.concatenate([self._cols[c], np.asarray(vals, dtype=self._DTYPES[c])])
            self._pending = []

    def __len__(self) -> int:
        return len(self._cols["m"]) + len(self._pending)

    def __getattr__(self, name):
        if name in DecayDataset.COLUMNS:
            self._flush()
            return self._cols[name]
        raise AttributeError(name)

    def append(self, state, m, orbit, observable, randomization, ideal, expectation, shots):
        self._pending.append((int(state), int(m), str(orbit), str(observable), int(randomization),
                              int(ideal), float(expectation), int(shots)))

    def extend(self, other: "DecayDataset") -> None:
        self._flush()
        other._flush()
        for c in self.COLUMNS:
            self._cols[c] = np.concatenate([self._cols[c], other._cols[c]])

    def take(self, rows) -> "DecayDataset":
        self._flush()
        rows = np.asarray(rows, dtype=np.int64)
        return DecayDataset(self.n, self.seed, {c: self._cols[c][rows] for c in self.COLUMNS})

    def arrays(self) -> dict:
        self._flush()
        return dict(self._cols)

    def orbits(self) -> list:
        return sorted(set(self.orbit.tolist()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# seed={self.seed} n={self.n}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        cols = self.arrays()
        for row in zip(*(cols[c].tolist() for c in self.COLUMNS)):
            row = list(row)
            row[6] = repr(float(row[6]))
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DecayDataset":
        header = {}
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                for tok in line[1:].split():
                    k, _, v = tok.partition("=")
                    header[k] = v
            elif line.strip():
                body.append(line)
        out = cls(int(header.get("n", 0)), int(header.get("seed", 0)))
        reader = csv.DictReader(body)
        missing = set(cls.COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"dataset is missing columns {sorted(missing)}")
        for rec in reader:
            e = float(rec["expectation"])
            if not -1.0 - 1e-12 <= e <= 1.0 + 1e-12:
                raise ValueError(f"expectation {e} outside [-1, 1]")
            out.append(rec["state"], rec["m"], rec["orbit"], rec["observable"],
                       rec["randomization"], rec["ideal"], e, rec["shots"])
        if not out.n and len(out):
            out.n = len(out.observable[0])
        return out


def _rng(spec: CircuitSpec, m: int, r: int) -> np.random.Generator:
    key = tuple(int(k) for k in spec.stream) + (int(spec.state_index), int(m), int(r))
    return np.random.default_rng(np.random.SeedSequence(int(spec.seed), spawn_key=key))


def exact_expectation(noise, cycle: HardCycle, p: PauliOperator, m: int) -> float:
    """
    Twirl-averaged, infinite-shot value of the measured observable ``p`` after
    ``m`` noisy cycles: ``prod_{j<m} lambda(H^{-j}(p))``.
    """
    if m < 0:
        raise ValueError("m must be non-negative")
    cache = {}
    total = 1.0
    q = p
    for _ in range(m):
        if q not in cache:
            cache[q] = _eig(noise, q)
        total *= cache[q]
        q = cycle.inverse(q)
    return total


def _eig(noise, p: PauliOperator) -> float:
    if isinstance(noise, DenseProcess):
        return noise.eigenvalue(p)
    return eigenvalue(noise, p)


def _observable_masks(spec: CircuitSpec) -> np.ndarray:
    masks = np.zeros((len(spec.observables), spec.n), dtype=np.uint8)
    for k, o in enumerate(spec.observables):
        masks[k, list(o.support)] = 1
    return masks


def _frame_task(spec: CircuitSpec, m: int, r: int, shots: int, masks: np.ndarray) -> np.ndarray:
    rng = _rng(spec, m, r)
    n = spec.n
    x = np.zeros((shots, n), dtype=np.uint8)
    z = np.zeros((shots, n), dtype=np.uint8)
    # draw every layer's errors up front; one call per channel is much cheaper
    hx, hz = spec.noise.sample(rng, (m, shots))
    if spec.easy_noise is not None:
        eax, eaz = spec.easy_noise.sample(rng, (m, shots))
    if spec.idle_slots:
        ix, iz = spec.idle_noise.sample(rng, (m, spec.idle_slots, shots))
    for j in range(m):
        if spec.easy_noise is not None:
            x ^= eax[j]
            z ^= eaz[j]
        x, z = spec.hard_cycle.conjugate_frames(x, z)
        x ^= hx[j]
        z ^= hz[j]
        for k in range(spec.idle_slots):
            x ^= ix[j, k]
            z ^= iz[j, k]
    if spec.easy_noise is not None:
        # final randomizing layer
        ex, ez = spec.easy_noise.sample(rng, shots)
        x ^= ex
        z ^= ez
    bx = np.array([_PREP_BITS[a][0] for a, _ in spec.prep], dtype=np.uint8)
    bz = np.array([_PREP_BITS[a][1] for a, _ in spec.prep], dtype=np.uint8)
    flips = (x & bz) ^ (z & bx)
    if spec.spam > 0:
        flips ^= (rng.random((shots, n)) < spec.spam).astype(np.uint8)
    parity = (flips.astype(np.int64) @ masks.T.astype(np.int64)) & 1
    return 1.0 - 2.0 * parity.mean(axis=0)


def _map(fn, tasks, workers: int):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda t: fn(*t), tasks))
    return [fn(*t) for t in tasks]


def _collect(spec: CircuitSpec, results, tasks, shots: int, seed: int) -> DecayDataset:
    ds = DecayDataset(spec.n, seed)
    ideal = spec.ideal_signs()
    labels = [canonical_orbit(spec.hard_cycle, o).label for o in spec.observables]
    for (m, r), values in zip(tasks, results):
        for k, o in enumerate(spec.observables):
            ds.append(spec.state_index, m, labels[k], o, r, ideal[k], ideal[k] * values[k], shots)
    return ds


def run_monte_carlo(spec: CircuitSpec, randomizations: int, shots: int, workers: int = 1) -> DecayDataset:
    """Pauli-frame Monte Carlo of ``spec`` for every sequence length."""
    if randomizations < 1 or shots < 1:
        raise ValueError("need at least one randomization and one shot")
    if isinstance(spec.noise, DenseProcess):
        raise TypeError("coherent noise needs run_dense")
    if spec.idle_slots and spec.idle_noise is None:
        raise ValueError("idle slots given without an idle channel")
    masks = _observable_masks(spec)
    tasks = [(m, r) for m in spec.lengths for r in range(randomizations)]
    results = _map(lambda m, r: _frame_task(spec, m, r, shots, masks), tasks, workers)
    return _collect(spec, results, tasks, shots, spec.seed)


# --------------------------------------------------------------------------
# dense engine


def _sign_table(n: int) -> np.ndarray:
    """``table[a, i] = (-1)^omega(P_a, P_i)`` for all Paulis."""
    idx = np.arange(4 ** n)
    xs = idx & ((1 << n) - 1)
    zs = idx >> n
    sym = (xs[:, None] & zs[None, :]) ^ (zs[:, None] & xs[None, :])
    parity = np.zeros_like(sym)
    for b in range(n):
        parity ^= (sym >> b) & 1
    return 1.0 - 2.0 * parity


def _prep_vector(spec: CircuitSpec) -> np.ndarray:
    n = spec.n
    v = np.zeros(4 ** n)
    for mask in range(1 << n):
        chosen = [q for q in range(n) if (mask >> q) & 1]
        p = prep_stabilizer(spec.prep, chosen)
        v[pauli_index(p)] = np.prod([spec.prep[q][1] for q in chosen]) if chosen else 1.0
    return v


def _dense_noise(obj, n: int):
    if obj is None:
        return None
    if isinstance(obj, DenseProcess):
        return obj.matrix
    if isinstance(obj, FactorizedChannel):
        obj = obj.to_channel()
    return np.diag(obj.dense_eigenvalues())


def run_dense(spec: CircuitSpec, randomizations: int, shots: int | None = None, workers: int = 1) -> DecayDataset:
    """
    Exact per-randomization propagation of each random circuit (``n <= 4``).

    With ``shots=None`` the recorded values are exact expectations of each
    circuit instance; otherwise joint readout outcomes are sampled.
    """
    n = spec.n
    if n > 4:
        raise ValueError("dense simulation is limited to 4 qubits")
    if randomizations < 1:
        raise ValueError("need at least one randomization")
    cycle_ptm = DenseProcess.from_cycle(spec.hard_cycle).matrix
    noise = _dense_noise(spec.noise, n)
    easy = _dense_noise(spec.easy_noise, n)
    idle = _dense_noise(spec.idle_noise, n)
    step = noise @ cycle_ptm
    if spec.idle_slots:
        step = np.linalg.matrix_power(idle, spec.idle_slots) @ step
    signs = _sign_table(n)
    v0 = _prep_vector(spec)
    paulis = all_paulis(n)
    obs_idx = [pauli_index(o) for o in spec.observables]
    # readout: outcome patterns s in {+1,-1}^n over the prepared stabilizers
    patterns = np.array([[1 - 2 * ((b >> q) & 1) for q in range(n)] for b in range(1 << n)])
    sub_idx, sub_sign = [], []
    for mask in range(1 << n):
        chosen = [q for q in range(n) if (mask >> q) & 1]
        sub_idx.append(pauli_index(prep_stabilizer(spec.prep, chosen)))
        sub_sign.append(np.prod(patterns[:, chosen], axis=1) if chosen else np.ones(1 << n))
    sub_sign = np.array(sub_sign)  # (subsets, patterns)
    masks = _observable_masks(spec)
    prep_signs = np.array([s for _, s in spec.prep])

    def task(m, r):
        rng = _rng(spec, m, r)
        v = v0.copy()
        frame = PauliOperator.identity(n)
        for _ in range(m):
            a = int(rng.integers(4 ** n))
            v = signs[a] * v
            if easy is not None:
                v = easy @ v
            v = step @ v
            frame = spec.hard_cycle.conjugate(frame * paulis[a])
        if easy is not None:
            v = easy @ v
        v = signs[pauli_index(frame)] * v
        if shots is None:
            vals = v[obs_idx]
            if spec.spam:
                vals = vals * np.array([(1 - 2 * spec.spam) ** o.weight for o in spec.observables])
            return spec.ideal_signs() * vals
        # outcome s_q = +1 means the prepared eigenvalue was observed
        probs = (sub_sign * (v[sub_idx] * np.array([
            np.prod(prep_signs[[q for q in range(n) if (mask >> q) & 1]]) for mask in range(1 << n)
        ]))[:, None]).sum(axis=0) / 2 ** n
        probs = np.clip(probs, 0, None)
        probs /= probs.sum()
        counts = rng.multinomial(shots, probs)
        flips = (patterns < 0).astype(np.uint8)
        outcome = np.repeat(flips, counts, axis=0)
        if spec.spam:
            outcome ^= (rng.random(outcome.shape) < spec.spam).astype(np.uint8)
        parity = (outcome.astype(np.int64) @ masks.T.astype(np.int64)) & 1
        return 1.0 - 2.0 * parity.mean(axis=0)

    tasks = [(m, r) for m in spec.lengths for r in range(randomizations)]
    results = _map(task, tasks, workers)
    return _collect(spec, results, tasks, shots or 0, spec.seed)


def run_plan(plan, cycle: HardCycle, noise, randomizations: int, shots: int, seed: int = 0,
             engine: str = "monte_carlo", workers: int = 1, **kwargs) -> DecayDataset:
    """Simulate every initial state of a design plan and concatenate the results."""
    out = DecayDataset(cycle.n, seed)
    for k, prep in enumerate(plan.initial_states):
        spec = CircuitSpec(cycle, plan.sequence_lengths, prep, noise, seed=seed, state_index=k,
                           observables=plan.observables_for(k, cycle), **kwargs)
        if engine == "dense":
            ds = run_dense(spec, randomizations, shots, workers=workers)
        else:
            ds = run_monte_carlo(spec, randomizations, shots, workers=workers)
        out.extend(ds)
    return out


def analytic_spam_intercept(spam: float, observable: PauliOperator) -> float:
    return (1.0 - 2.0 * spam) ** observable.weight


def binomial_mean_se(expectation: float, shots: int) -> float:
    return math.sqrt(max(1.0 - expectation ** 2, 0.0) / shots)
