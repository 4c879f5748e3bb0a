"""
From decay data to physical marginal error distributions.

The pipeline is: fit ``A * lambda**m`` per orbit, map the orbital eigenvalues
of a qubit subset to orbit probabilities with the orbit-merged Walsh-Hadamard
matrix ``W``, and project the eigenvalues so that ``W @ lambda`` is a
probability vector.  Uncertainties come from bootstrapping randomizations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .pauli import HardCycle, Orbit, all_paulis, canonical_orbit, commute, embed, enumerate_orbits
from .simulate import DecayDataset

FEAS_TOL = 1e-10
MAX_ITER = 100_000
MIN_RESAMPLES = 100


class UnfittableError(ValueError):
    """Decay data carries no usable signal."""


class ProjectionError(RuntimeError):
    """The projection did not converge; ``best`` holds the last iterate."""

    def __init__(self, msg: str, best: np.ndarray, violation: float):
        super().__init__(msg)
        self.best = best
        self.violation = violation


# --------------------------------------------------------------------------
# decay fits


@dataclass
class DecayFit:
    lambda_hat: float
    intercept: float
    residual: float
    se: float = float("nan")
    clamped: bool = False
    method: str = "loglinear"
    orbit: str = ""


def _profile(lam: float, m, e, w):
    """Best intercept and weighted residual for fixed ``lam``."""
    f = lam ** m
    den = np.sum(w * f * f)
    a = np.sum(w * f * e) / den if den > 0 else 0.0
    r = e - a * f
    return a, float(np.sum(w * r * r))


def fit_decay(points: Sequence, orbit: str = "") -> DecayFit:
    """
    Weighted least-squares fit of ``A * lam**m`` to ``(m, expectation[, weight])``.

    Uses a log-linear fit when every expectation is positive (log weights
    ``w * e**2``) and otherwise a bounded scalar search over ``lam`` with ``A``
    profiled out.  Estimates outside ``[-1, 1]`` are clamped and flagged.

    Examples
    --------
    >>> round(fit_decay([(2, 0.9025), (4, 0.81450625)]).lambda_hat, 12)
    0.95
    """
    pts = np.asarray([tuple(p) + (1.0,) * (3 - len(p)) for p in points], dtype=float)
    if pts.ndim != 2 or len(pts) == 0:
        raise UnfittableError("no decay points")
    m, e, w = pts[:, 0], pts[:, 1], pts[:, 2]
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    if len(np.unique(m)) < 2:
        raise UnfittableError("need at least two distinct sequence lengths")
    m0 = m.min()
    if np.all(e[m == m0] <= 0):
        raise UnfittableError("all expectations at the shortest length are non-positive")
    if np.all(e > 0):
        y = np.log(e)
        wl = w * e * e
        s0, s1, s2 = wl.sum(), (wl * m).sum(), (wl * m * m).sum()
        t0, t1 = (wl * y).sum(), (wl * m * y).sum()
        det = s0 * s2 - s1 * s1
        if det <= 0:
            raise UnfittableError("degenerate log-linear system")
        slope = (s0 * t1 - s1 * t0) / det
        icpt = (s2 * t0 - s1 * t1) / det
        lam, a = math.exp(slope), math.exp(icpt)
        se = lam * math.sqrt(s0 / det)
        method = "loglinear"
    else:
        res = minimize_scalar(lambda l: _profile(l, m, e, w)[1], bounds=(-1.0, 1.0),
                              method="bounded", options={"xatol": 1e-12})
        lam = float(res.x)
        a = _profile(lam, m, e, w)[0]
        se = float("nan")
        method = "bounded"
    clamped = abs(lam) > 1.0
    if clamped:
        lam = math.copysign(1.0, lam)
        a = _profile(lam, m, e, w)[0]
    _, resid = _profile(lam, m, e, w)
    return DecayFit(float(lam), float(a), math.sqrt(resid), float(se), clamped, method, orbit)


class _Groups:
    """Row grouping of a dataset by ``(orbit, m)``, reused across bootstrap resamples."""

    def __init__(self, dataset: DecayDataset):
        a = dataset.arrays()
        self.rel = (a["ideal"] * a["expectation"]).astype(float)
        self.shots = a["shots"].astype(float)
        self.labels, orbit_idx = np.unique(a["orbit"].astype(str), return_inverse=True)
        self.lengths, m_idx = np.unique(a["m"], return_inverse=True)
        self.key = orbit_idx * len(self.lengths) + m_idx
        self.size = len(self.labels) * len(self.lengths)

    def fits(self, counts: np.ndarray | None = None) -> dict:
        c = np.ones_like(self.rel) if counts is None else counts
        tot = np.bincount(self.key, weights=c, minlength=self.size)
        s = np.bincount(self.key, weights=c * self.rel, minlength=self.size)
        shots = np.bincount(self.key, weights=c * self.shots, minlength=self.size)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = s / tot
        mean = mean.reshape(len(self.labels), len(self.lengths))
        tot = tot.reshape(mean.shape)
        shots = shots.reshape(mean.shape)
        out = {}
        for k, lab in enumerate(self.labels):
            ok = tot[k] > 0
            ms, es = self.lengths[ok], mean[k, ok]
            # inverse shot-noise variance; exact data (no shots) gets unit weights
            if np.all(shots[k, ok] > 0):
                ws = shots[k, ok] / np.maximum(1.0 - es ** 2, 1e-6)
            else:
                ws = np.ones_like(es)
            out[str(lab)] = fit_decay(list(zip(ms, es, ws)), orbit=str(lab))
        return out


def fit_dataset(dataset: DecayDataset) -> dict:
    """``orbit label -> DecayFit`` pooling every row measured for that orbit."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    return _Groups(dataset).fits()


# --------------------------------------------------------------------------
# reconstruction


@dataclass
class EigenvalueTable:
    """Orbital eigenvalues of one qubit subset, ordered as :func:`enumerate_orbits`."""

    subset: tuple
    orbits: list
    values: np.ndarray
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(self.values) != len(self.orbits):
            raise ValueError("one eigenvalue per orbit is required")
        if self.orbits and self.orbits[0].is_identity():
            self.values[0] = 1.0

    def __getitem__(self, orb) -> float:
        if isinstance(orb, str):
            for o, v in zip(self.orbits, self.values):
                if o.label == orb:
                    return float(v)
            raise KeyError(orb)
        return float(self.values[self.orbits.index(orb)])

    @property
    def entries(self) -> dict:
        return dict(zip(self.orbits, self.values.tolist()))

    @classmethod
    def from_mapping(cls, cycle: HardCycle, subset, mapping: Mapping) -> "EigenvalueTable":
        """
        Table for ``subset`` from ``mapping``, keyed by full-register orbit
        labels (as produced by :func:`fit_dataset`) or by local :class:`Orbit`.
        """
        subset = tuple(subset)
        orbits, labels, _ = _structure(cycle, subset)
        vals = []
        flags = {}
        for o, full in zip(orbits, labels):
            if o.is_identity():
                vals.append(1.0)
                continue
            if o in mapping:
                v = mapping[o]
            elif full in mapping:
                v = mapping[full]
            else:
                raise KeyError(f"no eigenvalue for orbit {o.label} on {subset}")
            if isinstance(v, DecayFit):
                if v.clamped:
                    flags[o.label] = "clamped"
                v = v.lambda_hat
            if v < 0:
                flags[o.label] = "negative"
            vals.append(float(v))
        return cls(subset, orbits, np.array(vals), flags)

    @classmethod
    def exact(cls, cycle: HardCycle, subset, channel, mean: str = "geometric") -> "EigenvalueTable":
        """
        Orbital eigenvalues of ``channel`` on ``subset``.

        ``mean="geometric"`` is what decay fits measure; ``mean="arithmetic"``
        is the average for which orbit reconstruction is exact.
        """
        from .channels import eigenvalue, orbital_eigenvalue

        subset = tuple(subset)
        orbits = enumerate_orbits(cycle, subset)
        local = channel.marginalize(subset)
        if mean == "geometric":
            vals = [orbital_eigenvalue(local, o) for o in orbits]
        elif mean == "arithmetic":
            vals = [float(np.mean([eigenvalue(local, p) for p in o])) for o in orbits]
        else:
            raise ValueError(f"unknown mean {mean!r}")
        return cls(subset, orbits, np.array(vals))


_STRUCTURE: dict = {}


def _structure(cycle: HardCycle, subset: tuple):
    """Cached local orbits, their full-register labels and reconstruction matrix."""
    key = (id(cycle), subset)
    hit = _STRUCTURE.get(key)
    if hit is None or hit[0] is not cycle:
        orbits = enumerate_orbits(cycle, subset)
        labels = [canonical_orbit(cycle, embed(o.representative, subset, cycle.n)).label for o in orbits]
        hit = (cycle, orbits, labels, reconstruction_matrix(orbits))
        _STRUCTURE[key] = hit
    return hit[1:]


def reconstruction_matrix(orbits: Sequence[Orbit]) -> np.ndarray:
    """
    ``W[a, b] = |O_a| / 4**k * sum_{P in O_b} (-1)**omega(rep(O_a), P)`` so that
    orbit probabilities are ``W @ lambda`` over orbital eigenvalues.
    """
    k = orbits[0].n
    reps = [o.representative for o in orbits]
    w = np.zeros((len(orbits), len(orbits)))
    for a, (oa, ra) in enumerate(zip(orbits, reps)):
        for b, ob in enumerate(orbits):
            w[a, b] = sum(1 - 2 * commute(ra, p) for p in ob)
        w[a] *= len(oa) / 4 ** k
    return w


def fourier_matrix(n: int) -> np.ndarray:
    """Full (unmerged) map from Pauli eigenvalues to Pauli probabilities."""
    ps = all_paulis(n)
    return np.array([[1 - 2 * commute(p, q) for q in ps] for p in ps], dtype=float) / 4 ** n


@dataclass
class MarginalEstimate:
    subset: tuple
    orbits: list
    probabilities: np.ndarray
    std_errors: np.ndarray | None = None
    projected: bool = False
    raw: np.ndarray | None = None
    lambdas: np.ndarray | None = None
    flags: dict = field(default_factory=dict)

    def __getitem__(self, label: str) -> float:
        for o, p in zip(self.orbits, self.probabilities):
            if o.label == label:
                return float(p)
        raise KeyError(label)

    def as_dict(self) -> dict:
        return {o.label: float(p) for o, p in zip(self.orbits, self.probabilities)}

    def to_text(self) -> str:
        se = self.std_errors if self.std_errors is not None else np.full(len(self.orbits), np.nan)
        lines = [f"# subset {' '.join(map(str, self.subset))} projected={int(self.projected)}"]
        for o, p, s in zip(self.orbits, self.probabilities, se):
            flag = self.flags.get(o.label, "projected" if self.projected else "ok")
            lines.append(f"{o.label} {float(p)!r} {float(s)!r} {flag}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, cycle: HardCycle) -> "MarginalEstimate":
        subset, projected, rows = None, False, {}
        flags = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                toks = line[1:].split()
                if toks and toks[0] == "subset":
                    subset = tuple(int(t) for t in toks[1:] if "=" not in t)
                    projected = any(t == "projected=1" for t in toks)
                continue
            label, p, s, flag = line.split()
            rows[label] = (float(p), float(s))
            if flag not in ("ok", "projected"):
                flags[label] = flag
        if subset is None:
            raise ValueError("marginal record lacks a subset header")
        orbits = enumerate_orbits(cycle, subset)
        missing = [o.label for o in orbits if o.label not in rows]
        if missing:
            raise ValueError(f"marginal record misses orbits {missing[:3]}")
        probs = np.array([rows[o.label][0] for o in orbits])
        se = np.array([rows[o.label][1] for o in orbits])
        return cls(subset, orbits, probs, se, projected, flags=flags)


def reconstruct_marginal(subset, cycle: HardCycle, table: EigenvalueTable, project: bool = True) -> MarginalEstimate:
    """Orbit marginal probabilities on ``subset`` from its orbital eigenvalues."""
    subset = tuple(subset)
    if table.subset != subset:
        raise ValueError(f"table is for {table.subset}, not {subset}")
    orbits, _, w = _structure(cycle, subset)
    if [o.key for o in orbits] != [o.key for o in table.orbits]:
        w = reconstruction_matrix(table.orbits)
    raw = w @ table.values
    lam = table.values
    changed = False
    if project:
        lam = project_physical(table.values, w)
        changed = bool(np.max(np.abs(lam - table.values)) > FEAS_TOL)
    probs = w @ lam
    if project:
        probs = np.clip(probs, 0.0, None)
    return MarginalEstimate(subset, list(table.orbits), probs, projected=changed, raw=raw,
                            lambdas=np.asarray(lam), flags=dict(table.flags))


# --------------------------------------------------------------------------
# projection


def _constraints(w: np.ndarray):
    """``G x <= h`` over the non-identity eigenvalues ``x = lambda[1:]``."""
    k = w.shape[1] - 1
    g = np.vstack([-w[:, 1:], np.eye(k), -np.eye(k)])
    h = np.concatenate([w[:, 0], np.ones(k), np.zeros(k)])
    return g, h


def project_physical(raw, w: np.ndarray, tol: float = FEAS_TOL, max_iter: int = MAX_ITER) -> np.ndarray:
    """
    Closest eigenvalue vector (Euclidean) whose image under ``w`` is
    non-negative, with every non-identity eigenvalue in ``[0, 1]`` and the
    identity eigenvalue fixed at 1.

    A primal-dual active-set iteration usually finds the exact solution in a
    few linear solves; if it stalls, accelerated projected gradient on the
    dual supplies better active-set guesses until the iteration cap.

    Raises
    ------
    ProjectionError
        If no iterate meets the feasibility tolerance within ``max_iter`` steps.
    """
    lam = np.array(raw.values if isinstance(raw, EigenvalueTable) else raw, dtype=float)
    lam[0] = 1.0
    x0 = lam[1:]
    if x0.size == 0:
        return lam
    g, h = _constraints(w)
    if np.max(g @ x0 - h) <= tol:
        return lam
    y = np.zeros(len(h))
    polished = _active_set(x0, g, h, y, tol)
    if polished is not None:
        return np.concatenate([[1.0], polished])
    b = g @ x0 - h
    step = 1.0 / np.linalg.norm(g, 2) ** 2
    z = y.copy()
    t = 1.0
    best, best_viol = x0, np.inf
    next_polish = 50
    for it in range(1, max_iter + 1):
        grad = g @ (g.T @ z) - b
        y_new = np.maximum(z - step * grad, 0.0)
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        if np.dot(y_new - y, y_new - z) > 0:
            # adaptive restart
            t_new = 1.0
            z = y_new
        else:
            z = y_new + ((t - 1) / t_new) * (y_new - y)
        y, t = y_new, t_new
        if it >= next_polish or it == max_iter:
            next_polish = min(2 * next_polish, next_polish + 5000)
            x = x0 - g.T @ y
            viol = float(np.max(g @ x - h))
            if viol < best_viol:
                best, best_viol = x, viol
            polished = _active_set(x0, g, h, y, tol)
            if polished is not None:
                return np.concatenate([[1.0], polished])
            gap = float(np.max(np.abs(np.minimum(y, h - g @ x))))
            if viol <= tol and gap <= tol:
                return np.concatenate([[1.0], x])
    if best_viol <= tol:
        return np.concatenate([[1.0], best])
    raise ProjectionError(f"projection did not reach feasibility {tol} in {max_iter} steps",
                          np.concatenate([[1.0], best]), best_viol)


def _active_set(x0, g, h, y, tol, rounds: int = 40):
    """
    Primal-dual active-set iteration from dual guess ``y``; returns the
    KKT point or ``None`` if it cycles or fails to converge.
    """
    x = x0 - g.T @ y
    active = np.flatnonzero(y + (g @ x - h) > 0)
    seen = set()
    for _ in range(rounds):
        key = active.tobytes()
        if key in seen:
            return None
        seen.add(key)
        if active.size == 0:
            x, ya = x0, np.zeros(0)
        else:
            ga = g[active]
            ya, *_ = np.linalg.lstsq(ga @ ga.T, ga @ x0 - h[active], rcond=None)
            x = x0 - ga.T @ ya
        yfull = np.zeros(len(h))
        yfull[active] = ya
        nxt = np.flatnonzero(yfull + (g @ x - h) > 0)
        if np.array_equal(nxt, active):
            if np.max(g @ x - h) <= tol and (ya.size == 0 or ya.min() >= -1e-9):
                return x
            return None
        active = nxt
    return None


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


# --------------------------------------------------------------------------
# end to end


def estimate_marginals(dataset: DecayDataset, cycle: HardCycle, subsets, fits: dict | None = None) -> list:
    """Fit every orbit in ``dataset`` and reconstruct each subset's marginal."""
    fits = fit_dataset(dataset) if fits is None else fits
    out = []
    for s in subsets:
        table = EigenvalueTable.from_mapping(cycle, s, fits)
        out.append(reconstruct_marginal(s, cycle, table))
    return out


def bootstrap(dataset: DecayDataset, resamples: int, pipeline: Callable | None = None,
              seed: int = 0, cycle: HardCycle | None = None, subsets=None,
              fit_pipeline: Callable | None = None, return_samples: bool = False, projected: bool = False):
    """
    Standard errors by resampling randomizations with replacement inside each
    ``(state, m)`` group and rerunning the pipeline.

    ``pipeline(dataset) -> array`` may be any estimator.  ``fit_pipeline(fits)
    -> array`` starts from the per-orbit fits instead, which avoids rebuilding
    datasets.  With neither, the reconstruction of ``subsets`` is used and the
    concatenated orbit probabilities are returned: unprojected by default,
    since clipping at zero shrinks the spread of orbits near the boundary and
    understates their uncertainty.
    """
    if resamples < MIN_RESAMPLES:
        raise ValueError(f"need at least {MIN_RESAMPLES} resamples, got {resamples}")
    a = dataset.arrays()
    group = a["state"].astype(np.int64) * (int(a["m"].max()) + 1) + a["m"]
    rand = a["randomization"]
    units = {}
    for gkey in np.unique(group):
        rows = np.flatnonzero(group == gkey)
        ids = np.unique(rand[rows])
        if len(ids) < 2:
            raise ValueError("bootstrap needs at least two randomizations per configuration")
        units[int(gkey)] = [rows[rand[rows] == r] for r in ids]
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xB007,)))
    fast = pipeline is None
    if fast:
        if fit_pipeline is None:
            if cycle is None or subsets is None:
                raise ValueError("default pipeline needs cycle and subsets")

            def fit_pipeline(fits):
                est = [reconstruct_marginal(s, cycle, EigenvalueTable.from_mapping(cycle, s, fits), project=projected)
                       for s in subsets]
                return np.concatenate([e.probabilities for e in est])

        groups = _Groups(dataset)

        def run(counts):
            return np.atleast_1d(np.asarray(fit_pipeline(groups.fits(counts)), dtype=float))

    samples = []
    for _ in range(resamples):
        counts = np.zeros(len(dataset))
        rows = []
        for blocks in units.values():
            for i in rng.integers(len(blocks), size=len(blocks)):
                counts[blocks[i]] += 1
                rows.append(blocks[i])
        if fast:
            samples.append(run(counts))
        else:
            samples.append(np.atleast_1d(np.asarray(pipeline(dataset.take(np.concatenate(rows))), dtype=float)))
    samples = np.array(samples)
    se = samples.std(axis=0, ddof=1)
    return (se, samples) if return_samples else se


def estimate_with_errors(dataset: DecayDataset, cycle: HardCycle, subsets, resamples: int = 200,
                         seed: int = 0) -> list:
    """:func:`estimate_marginals` with bootstrap standard errors attached."""
    est = estimate_marginals(dataset, cycle, subsets)
    se = bootstrap(dataset, resamples, seed=seed, cycle=cycle, subsets=subsets)
    k = 0
    for e in est:
        e.std_errors = se[k:k + len(e.orbits)]
        k += len(e.orbits)
    return est


@dataclass
class FidelityEstimate:
    total_error: float
    std: float
    exact_table_error: float


def cycle_benchmark_fidelity(eigenvalues, draws: int = 20, resamples: int = 200, n_qubits: int | None = None,
                             seed: int = 0) -> FidelityEstimate:
    """
    Total error from ``draws`` uniformly sampled non-identity eigenvalues,
    ``(4**n - 1) / 4**n * (1 - mean)``.  The first draw is the estimate;
    ``resamples`` further draws give its standard deviation.

    ``eigenvalues`` is an :class:`EigenvalueTable`, a mapping, or a sequence
    of eigenvalues that excludes the identity.
    """
    if isinstance(eigenvalues, EigenvalueTable):
        vals = [v for o, v in zip(eigenvalues.orbits, eigenvalues.values) if not o.is_identity()]
        n = n_qubits or len(eigenvalues.subset)
    else:
        vals = list(eigenvalues.values()) if isinstance(eigenvalues, Mapping) else list(eigenvalues)
        if n_qubits is None:
            raise ValueError("n_qubits is required for a bare eigenvalue list")
        n = n_qubits
    vals = np.asarray([getattr(v, "lambda_hat", v) for v in vals], dtype=float)
    if vals.size == 0:
        raise ValueError("empty eigenvalue table")
    factor = (4.0 ** n - 1) / 4.0 ** n
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xCB,)))
    if resamples < 2:
        raise ValueError("need at least two resamples for a spread")
    errs = factor * (1.0 - vals[rng.integers(vals.size, size=(resamples + 1, draws))].mean(axis=1))
    return FidelityEstimate(float(errs[0]), float(errs[1:].std(ddof=1)), float(factor * (1.0 - vals.mean())))
