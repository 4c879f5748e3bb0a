"""
Experiment design: which product states to prepare, which sequence lengths to
run, and how to split a time budget between randomizations and shots.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .pauli import HardCycle, check_subset, embed, enumerate_orbits
from .simulate import DecayDataset, compatible_observables, parse_prep

LEVELS = ("single", "1cnot", "2cnot")
_LETTERS = "XYZ"
_BITS = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


class CoverageError(RuntimeError):
    pass


@dataclass(frozen=True)
class MarginalTarget:
    level: str
    subsets: tuple

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"unknown marginal level {self.level!r}; choose from {LEVELS}")
        object.__setattr__(self, "subsets", tuple(tuple(s) for s in self.subsets))


def marginal_target(cycle: HardCycle, level: str, pairs: str = "all") -> MarginalTarget:
    """
    Subsets for a marginal level: idle qubits (``single``), each gate support
    (``1cnot``), or unions of two gate supports (``2cnot``; ``pairs="adjacent"``
    keeps only neighbouring gates).
    """
    if level == "single":
        idle = [b for b in cycle.supports() if len(b) == 1]
        if not idle:
            raise ValueError("cycle has no idle qubits for single-qubit marginals")
        return MarginalTarget(level, tuple(idle))
    if not cycle.gates:
        raise ValueError(f"level {level!r} needs a cycle with gates")
    gates = [tuple(g) for g in cycle.gates]
    if level == "1cnot":
        return MarginalTarget(level, tuple(gates))
    if level == "2cnot":
        if len(gates) < 2:
            raise ValueError("2cnot marginals need at least two gates")
        if pairs == "adjacent":
            combos = list(zip(gates[:-1], gates[1:]))
        else:
            combos = list(itertools.combinations(gates, 2))
        return MarginalTarget(level, tuple(a + b for a, b in combos))
    raise ValueError(level)


@dataclass
class DesignPlan:
    initial_states: list
    sequence_lengths: tuple
    randomizations: int
    shots_per_randomization: int
    covered_orbits: dict = field(default_factory=dict)
    target: MarginalTarget | None = None
    seed: int = 0
    cycle_name: str = ""

    def observables_for(self, state_index: int, cycle: HardCycle) -> tuple:
        prep = parse_prep(self.initial_states[state_index], cycle.n)
        subsets = self.target.subsets if self.target else cycle.supports()
        return tuple(compatible_observables(prep, subsets))

    def to_text(self) -> str:
        lines = ["# cycle error reconstruction design plan"]
        lines.append(f"cycle = {self.cycle_name}")
        if self.target is not None:
            lines.append(f"level = {self.target.level}")
            lines.append("subsets = " + " ".join(",".join(map(str, s)) for s in self.target.subsets))
        lines.append("lengths = " + " ".join(map(str, self.sequence_lengths)))
        lines.append(f"randomizations = {self.randomizations}")
        lines.append(f"shots = {self.shots_per_randomization}")
        lines.append(f"seed = {self.seed}")
        for st in self.initial_states:
            lines.append("state " + " ".join(st))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DesignPlan":
        header = {}
        states = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("state "):
                states.append(tuple(line.split()[1:]))
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"malformed plan line: {raw!r}")
            header[key.strip()] = value.strip()
        target = None
        if "level" in header:
            subsets = tuple(tuple(int(q) for q in s.split(",")) for s in header.get("subsets", "").split())
            target = MarginalTarget(header["level"], subsets)
        return cls(
            initial_states=states,
            sequence_lengths=tuple(int(m) for m in header.get("lengths", "").split()),
            randomizations=int(header.get("randomizations", 1)),
            shots_per_randomization=int(header.get("shots", 1)),
            target=target,
            seed=int(header.get("seed", 0)),
            cycle_name=header.get("cycle", ""),
        )


# --------------------------------------------------------------------------
# initial-state planning


def _state_masks(state: Sequence[str]):
    x = z = 0
    for q, lab in enumerate(state):
        bx, bz = _BITS[lab[0]]
        x |= bx << q
        z |= bz << q
    return x, z


def covered(cycle: HardCycle, state: Sequence[str], subsets) -> set:
    """``(subset, orbit label)`` pairs measurable from product state ``state``."""
    sx, sz = _state_masks(state)
    out = set()
    for s in subsets:
        s = tuple(s)
        mx, mz, owner, labels = _member_table(cycle, s)
        supp = mx | mz
        ok = (((mx ^ sx) & supp) == 0) & (((mz ^ sz) & supp) == 0)
        out.update((s, labels[i]) for i in np.unique(owner[ok]))
    return out


_ORBIT_CACHE: dict = {}


def _orbits(cycle: HardCycle, subset) -> list:
    return _cached(cycle, tuple(subset))[0]


def _member_table(cycle: HardCycle, subset: tuple):
    return _cached(cycle, subset)[1]


def _cached(cycle: HardCycle, subset: tuple):
    """Orbits of ``subset`` and the register bit masks of their non-identity members."""
    key = (id(cycle), subset)
    hit = _ORBIT_CACHE.get(key)
    if hit is None or hit[0] is not cycle:
        orbits = enumerate_orbits(cycle, subset)
        mx, mz, owner, labels = [], [], [], []
        for o in orbits:
            if o.is_identity():
                continue
            for p in o:
                e = embed(p, subset, cycle.n)
                mx.append(e.x)
                mz.append(e.z)
                owner.append(len(labels))
            labels.append(o.label)
        table = (np.array(mx, dtype=np.int64), np.array(mz, dtype=np.int64), np.array(owner), labels)
        hit = (cycle, (orbits, table))
        _ORBIT_CACHE[key] = hit
    return hit[1]


def _local_cover(block_cycle: HardCycle) -> list:
    """Greedy cover of one block's non-trivial orbits by local product states."""
    k = block_cycle.n
    block = tuple(range(k))
    candidates = [tuple(f"{c}+" for c in letters) for letters in itertools.product(_LETTERS, repeat=k)]
    cov = [covered(block_cycle, c, [block]) for c in candidates]
    need = {(block, o.label) for o in enumerate_orbits(block_cycle) if not o.is_identity()}
    return _greedy(candidates, cov, need)


def _greedy(candidates, cov, need) -> list:
    chosen = []
    remaining = set(need)
    while remaining:
        gains = [len(c & remaining) for c in cov]
        best = max(range(len(candidates)), key=lambda i: (gains[i], -i))
        if gains[best] == 0:
            raise CoverageError(f"{len(remaining)} orbits cannot be covered")
        chosen.append(candidates[best])
        remaining -= cov[best]
    return chosen


def _assemble(n: int, assignment: dict) -> tuple:
    state = ["Z+"] * n
    for block, local in assignment.items():
        for q, lab in zip(block, local):
            state[q] = lab
    return tuple(state)


def _block_cycle(cycle: HardCycle, block) -> HardCycle:
    from .pauli import induced_cycle

    return induced_cycle(cycle, block)


def _cut_codes(k: int, pairs) -> tuple:
    """
    Binary codes for ``k`` blocks such that every pair in ``pairs`` gets
    different codes; bit ``t`` of a code is that block's role in tiling ``t``.
    Codes are greedy colours, so a chain needs one tiling and a complete
    graph on ``k`` blocks needs ``ceil(log2 k)``.
    """
    colour = []
    for b in range(k):
        taken = {colour[a] for a in range(b) if (a, b) in pairs or (b, a) in pairs}
        colour.append(next(c for c in itertools.count() if c not in taken))
    bits = max(1, math.ceil(math.log2(max(colour) + 1)))
    return [[(c >> t) & 1 for t in range(bits)] for c in colour], bits


def plan_initial_states(
    cycle: HardCycle,
    target: MarginalTarget,
    method: str = "tiling",
    lengths: Sequence[int] = (2,),
    randomizations: int = 40,
    shots: int = 150,
    seed: int = 0,
) -> DesignPlan:
    """
    Product initial states such that every non-trivial orbit of every target
    subset has a member readable from at least one state.

    ``method="tiling"`` builds the states block by block: a greedy local cover
    ``A`` of one gate's orbits, tiled across gates for 1-CNOT targets; for
    2-CNOT targets, every gate plays role ``A`` or role ``B`` (all local
    letter assignments) in each of a few tilings, chosen so every targeted
    pair of gates has opposite roles in some tiling; duplicates are dropped.
    ``method="greedy"`` runs greedy set cover over all product states of the
    target qubits (small registers only).
    """
    n = cycle.n
    for s in target.subsets:
        check_subset(s, n)
    if method == "greedy":
        states = _greedy_plan(cycle, target)
    elif method == "tiling":
        states = _tiling_plan(cycle, target)
    else:
        raise ValueError(f"unknown planning method {method!r}")
    cov = {k: covered(cycle, st, target.subsets) for k, st in enumerate(states)}
    need = {(s, o.label) for s in target.subsets for o in _orbits(cycle, s) if not o.is_identity()}
    missing = need - set().union(*cov.values()) if cov else need
    if missing:
        raise CoverageError(f"{len(missing)} orbits left uncovered, e.g. {sorted(missing)[:3]}")
    return DesignPlan(
        initial_states=states,
        sequence_lengths=tuple(lengths),
        randomizations=randomizations,
        shots_per_randomization=shots,
        covered_orbits=cov,
        target=target,
        seed=seed,
        cycle_name=cycle.name,
    )


def _blocks_of(cycle: HardCycle, target: MarginalTarget) -> list:
    supports = cycle.supports()
    involved = sorted({q for s in target.subsets for q in s})
    blocks = [b for b in supports if set(b) & set(involved)]
    for s in target.subsets:
        for b in supports:
            if set(b) & set(s) and not set(b) <= set(s):
                raise ValueError(f"subset {s} splits block {b}")
    return blocks


def _tiling_plan(cycle: HardCycle, target: MarginalTarget) -> list:
    n = cycle.n
    blocks = _blocks_of(cycle, target)
    covers = {b: _local_cover(_block_cycle(cycle, b)) for b in blocks}
    if target.level in ("single", "1cnot"):
        depth = max(len(c) for c in covers.values())
        return _dedupe(
            _assemble(n, {b: covers[b][min(j, len(covers[b]) - 1)] for b in blocks})
            for j in range(depth)
        )
    # 2cnot: role-A blocks take the local cover, role-B blocks every local assignment
    index = {q: i for i, b in enumerate(blocks) for q in b}
    needed = set()
    for sub in target.subsets:
        ids = sorted({index[q] for q in sub})
        needed.update(itertools.combinations(ids, 2))
    codes, n_tilings = _cut_codes(len(blocks), needed)
    full = {b: [tuple(f"{c}+" for c in letters) for letters in itertools.product(_LETTERS, repeat=len(b))]
            for b in blocks}
    states = []
    for t in range(n_tilings):
        role_a = [b for b, code in zip(blocks, codes) if code[t] == 0]
        role_b = [b for b, code in zip(blocks, codes) if code[t] == 1]
        depth_a = max(len(covers[b]) for b in role_a)
        depth_b = max(len(full[b]) for b in role_b)
        for ja in range(depth_a):
            for jb in range(depth_b):
                assign = {b: covers[b][min(ja, len(covers[b]) - 1)] for b in role_a}
                assign.update({b: full[b][min(jb, len(full[b]) - 1)] for b in role_b})
                states.append(_assemble(n, assign))
    return _dedupe(states)


def _dedupe(states) -> list:
    seen = set()
    out = []
    for s in states:
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


def _greedy_plan(cycle: HardCycle, target: MarginalTarget, limit: int = 100_000) -> list:
    n = cycle.n
    involved = sorted({q for s in target.subsets for q in s})
    if 3 ** len(involved) > limit:
        raise ValueError("greedy planning over this many qubits is intractable; use method='tiling'")
    candidates = []
    for letters in itertools.product(_LETTERS, repeat=len(involved)):
        state = ["Z+"] * n
        for q, c in zip(involved, letters):
            state[q] = f"{c}+"
        candidates.append(tuple(state))
    cov = [covered(cycle, c, target.subsets) for c in candidates]
    need = {(s, o.label) for s in target.subsets for o in _orbits(cycle, s) if not o.is_identity()}
    return _greedy(candidates, cov, need)


# --------------------------------------------------------------------------
# sequence lengths and budget


def choose_sequence_lengths(lambda_guess: float, count: int, order: int = 2) -> list:
    """
    Lengths that are multiples of ``order``, geometrically spaced from ``order``
    up to the multiple nearest ``1 / (1 - |lambda_guess|)``.
    """
    lam = abs(float(lambda_guess))
    if not 0 < lam < 1:
        raise ValueError("need 0 < |lambda_guess| < 1 for a finite longest length")
    if count < 2:
        raise ValueError("need at least two sequence lengths")
    m_long = max(order, order * round(1.0 / (1.0 - lam) / order))
    grid = np.geomspace(order, m_long, count)
    out = sorted({max(order, order * int(round(g / order))) for g in grid})
    return out


@dataclass(frozen=True)
class CostModel:
    """Abstract time units for changing randomization and for one shot."""

    cost_per_randomization_setup: float
    cost_per_shot: float

    def __post_init__(self):
        if self.cost_per_randomization_setup < 0 or self.cost_per_shot <= 0:
            raise ValueError("shot cost must be positive and setup cost non-negative")

    def cost(self, randomizations: int, shots: int, configurations: int = 1) -> float:
        return configurations * randomizations * (self.cost_per_randomization_setup + shots * self.cost_per_shot)


@dataclass
class BudgetResult:
    randomizations: int
    shots_per_randomization: int
    std: float
    grid: list


def allocate_budget(
    cost: CostModel,
    total_budget: float,
    variance_samples: DecayDataset,
    orbit: str | None = None,
    subsamples: int = 200,
    seed: int = 0,
) -> BudgetResult:
    """
    Choose ``(randomizations, shots per randomization)`` under ``total_budget``
    by subsampling ``variance_samples``: randomizations are redrawn with
    replacement, shots are redrawn binomially from each randomization's
    observed frequency, and the spread of the refitted eigenvalue is compared.
    Candidates whose spread is statistically indistinguishable from the best
    are tied and the tie goes to more randomizations.
    """
    from scipy.stats import norm

    from .estimation import fit_decay

    if len(variance_samples) == 0:
        raise ValueError("variance_samples is empty")
    a = variance_samples.arrays()
    labels = a["orbit"]
    if orbit is None:
        vals, counts = np.unique(labels, return_counts=True)
        orbit = str(vals[np.argmax(counts)])
    sel = labels == orbit
    if not sel.any():
        raise ValueError(f"orbit {orbit} not in dataset")
    m_all = a["m"][sel]
    rel = (a["ideal"] * a["expectation"])[sel]
    rand = a["randomization"][sel]
    shots_avail = a["shots"][sel]
    lengths = sorted(set(m_all.tolist()))
    groups = []
    for m in lengths:
        gm = m_all == m
        ids = np.unique(rand[gm])
        groups.append((m, [rel[gm & (rand == r)] for r in ids]))
    r_max = min(len(g[1]) for g in groups)
    s_data = int(shots_avail.min()) if shots_avail.min() > 0 else None
    configs = len(lengths)
    if cost.cost(1, 1, configs) > total_budget:
        raise ValueError("budget below a single one-shot configuration")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xB0D,)))
    grid = []
    for r in range(1, r_max + 1):
        per = total_budget / (configs * r) - cost.cost_per_randomization_setup
        s = int(per // cost.cost_per_shot)
        if s_data is not None:
            s = min(s, s_data)
        if s < 1:
            continue
        est = []
        for _ in range(subsamples):
            pts = []
            for m, per_rand in groups:
                picks = rng.integers(len(per_rand), size=r)
                e = np.concatenate([per_rand[i] for i in picks])
                p = np.clip((1 + e) / 2, 0, 1)
                e2 = 2 * rng.binomial(s, p) / s - 1
                pts.append((m, e2.mean(), 1.0))
            try:
                est.append(fit_decay(pts).lambda_hat)
            except ValueError:
                est.append(np.nan)
        est = np.asarray(est)
        std = float(np.nanstd(est, ddof=1)) if np.isfinite(est).sum() > 1 else np.inf
        grid.append((r, s, std))
    if not grid:
        raise ValueError("no feasible configuration under this budget")
    best = min(g[2] for g in grid)
    # a sample std has relative error ~ 1/sqrt(2(K-1)); the tie band is a
    # Bonferroni-corrected 5% test on a difference of two such stds, since
    # the minimum over the grid is itself biased low
    z = float(norm.ppf(1.0 - 0.05 / max(len(grid), 1)))
    slack = best * z * math.sqrt(2.0) / math.sqrt(2.0 * (subsamples - 1))
    tied = [g for g in grid if g[2] <= best + slack]
    r, s, std = max(tied, key=lambda g: (g[0], g[1]))
    return BudgetResult(r, s, std, grid)
