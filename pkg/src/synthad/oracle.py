"""Exact ground-truth world for piecewise-constant densities on [0,1]^d.

A density h is constant on axis-aligned grid cells, which makes the
conditional probability eta, the Bayes classifier/risk, hinge generalization
error, and level-set error all computable by exact cell sums. Arbitrary
classifiers are handled by adaptive sign subdivision or Monte Carlo.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "SyntheticDensity",
    "OracleProblem",
    "MCEstimate",
    "NoiseProfile",
    "density_eval",
    "eta",
    "sample_Q",
    "sample_mu",
    "sample_labels",
    "bayes_classifier",
    "bayes_risk",
    "misclassification_risk",
    "generalization_error",
    "level_set_error",
    "noise_profile",
]

_MASS_TOL = 1e-12


@dataclass(frozen=True)
class SyntheticDensity:
    """Piecewise-constant density: per-axis breakpoints and per-cell values."""

    breakpoints: tuple[tuple[float, ...], ...]
    values: np.ndarray  # shape (len(bp_0)-1, ..., len(bp_{d-1})-1)

    def __post_init__(self):
        bps = tuple(tuple(float(b) for b in axis) for axis in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        for axis in bps:
            if len(axis) < 2 or axis[0] != 0.0 or axis[-1] != 1.0:
                raise ValueError("each axis must run from 0 to 1")
            if any(b >= c for b, c in zip(axis, axis[1:])):
                raise ValueError("breakpoints must be strictly increasing")
        expected = tuple(len(axis) - 1 for axis in bps)
        if vals.shape != expected:
            raise ValueError(f"values shape {vals.shape} != grid shape {expected}")
        if np.any(vals < 0):
            raise ValueError("density values must be >= 0")
        total = float(np.sum(vals * self.cell_volumes()))
        if abs(total - 1.0) > _MASS_TOL:
            raise ValueError(f"density mass {total} != 1")

    @property
    def dim(self) -> int:
        return len(self.breakpoints)

    def axis_widths(self) -> list[np.ndarray]:
        return [np.diff(np.asarray(axis)) for axis in self.breakpoints]

    def cell_volumes(self) -> np.ndarray:
        vols = np.ones(())
        widths = self.axis_widths()
        vols = widths[0]
        for wd in widths[1:]:
            vols = np.multiply.outer(vols, wd)
        return vols.reshape(self.values.shape)

    def cell_index(self, X: np.ndarray) -> tuple[np.ndarray, ...]:
        """Left-closed cell lookup; x == 1 belongs to the last cell."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError("dimension mismatch")
        if np.any(X < 0.0) or np.any(X > 1.0):
            raise ValueError("points must lie in [0,1]^d")
        idx = []
        for j, axis in enumerate(self.breakpoints):
            k = np.searchsorted(np.asarray(axis), X[:, j], side="right") - 1
            idx.append(np.clip(k, 0, len(axis) - 2))
        return tuple(idx)

    def to_json(self, path=None) -> str:
        doc = json.dumps(
            {"breakpoints": [list(a) for a in self.breakpoints],
             "values": self.values.tolist()}
        )
        if path is not None:
            Path(path).write_text(doc)
        return doc

    @classmethod
    def from_json(cls, doc_or_path) -> "SyntheticDensity":
        text = doc_or_path
        p = Path(str(doc_or_path))
        if p.exists():
            text = p.read_text()
        d = json.loads(text)
        return cls(tuple(tuple(a) for a in d["breakpoints"]), np.asarray(d["values"]))


@dataclass(frozen=True)
class OracleProblem:
    """A density plus threshold level rho; the mixing weight is s = 1/(1+rho)."""

    density: SyntheticDensity
    rho: float

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be > 0")
        if np.any(self.density.values == self.rho):
            raise ValueError("no cell value may equal rho (boundary must be null)")

    @property
    def s(self) -> float:
        return 1.0 / (1.0 + self.rho)


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float


def density_eval(density: SyntheticDensity, x) -> float:
    x = np.asarray(x, dtype=float)
    vals = density.values[density.cell_index(x[None, :] if x.ndim == 1 else x)]
    return float(vals[0]) if x.ndim == 1 else vals


def eta(problem: OracleProblem, x):
    """Conditional probability of the normal class: s h / (s h + 1 - s)."""
    h = density_eval(problem.density, x)
    s = problem.s
    return s * h / (s * h + 1.0 - s)


def _eta_cells(problem: OracleProblem) -> np.ndarray:
    h = problem.density.values
    s = problem.s
    return s * h / (s * h + 1.0 - s)


def sample_Q(problem_or_density, n: int, seed) -> np.ndarray:
    """i.i.d. draws from dQ = h d(uniform): pick a cell by mass, then uniform."""
    density = (
        problem_or_density.density
        if isinstance(problem_or_density, OracleProblem)
        else problem_or_density
    )
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    vols = density.cell_volumes()
    probs = (density.values * vols).ravel()
    probs = probs / probs.sum()
    flat = rng.choice(probs.size, size=n, p=probs)
    multi = np.unravel_index(flat, density.values.shape)
    X = np.empty((n, density.dim))
    u = rng.random((n, density.dim))
    for j, axis in enumerate(density.breakpoints):
        lo = np.asarray(axis)[multi[j]]
        hi = np.asarray(axis)[multi[j] + 1]
        X[:, j] = lo + u[:, j] * (hi - lo)
    return X


def sample_mu(d: int, n: int, seed) -> np.ndarray:
    """i.i.d. draws from the reference measure (uniform on [0,1]^d)."""
    return np.random.default_rng(seed).random((n, d))


def sample_labels(problem: OracleProblem, xs: np.ndarray, seed) -> np.ndarray:
    """Bernoulli labels: P(+1 | x) = eta(x)."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    etas = _eta_cells(problem)[problem.density.cell_index(xs)]
    rng = np.random.default_rng(seed)
    return np.where(rng.random(len(xs)) < etas, 1, -1)


def bayes_classifier(problem: OracleProblem, x):
    """+1 iff h(x) > rho; the eta > 1/2 form is computed too and must agree.

    Accepts a single point (returns int) or a row matrix (returns an array).
    """
    arr = np.asarray(x, dtype=float)
    h = density_eval(problem.density, arr)
    by_h = np.where(np.asarray(h) > problem.rho, 1, -1)
    by_eta = np.where(np.asarray(eta(problem, x)) > 0.5, 1, -1)
    if not np.array_equal(by_h, by_eta):
        raise AssertionError("h-form and eta-form of the Bayes classifier disagree")
    return int(by_h) if arr.ndim == 1 else by_h


def bayes_cell_values(problem: OracleProblem) -> np.ndarray:
    """Per-cell values of the Bayes classifier (cell-constant by construction)."""
    return np.where(problem.density.values > problem.rho, 1.0, -1.0)


def bayes_risk(problem: OracleProblem) -> float:
    """Exact cell sum: s * sum_{h<=rho} h vol + (1-s) * sum_{h>rho} vol."""
    h = problem.density.values
    vols = problem.density.cell_volumes()
    s = problem.s
    low = h <= problem.rho
    return float(s * np.sum(h[low] * vols[low]) + (1.0 - s) * np.sum(vols[~low]))


def _sign(v):
    # sign(0) = +1 convention: {f > 0} with boundary assigned normal
    return np.where(np.asarray(v, dtype=float) >= 0.0, 1.0, -1.0)


_PRESPLIT_LEVELS = 2
_MAX_SPLIT_LEVELS = 24


def _split_boxes(lo: np.ndarray, hi: np.ndarray):
    """Split every box (rows of lo/hi) into its 2^d children, vectorized."""
    d = lo.shape[1]
    mid = 0.5 * (lo + hi)
    los, his = [], []
    for mask in range(2**d):
        bits = np.array([(mask >> j) & 1 for j in range(d)], dtype=bool)
        los.append(np.where(bits, mid, lo))
        his.append(np.where(bits, hi, mid))
    return np.vstack(los), np.vstack(his)


def _probe_signs(f, lo: np.ndarray, hi: np.ndarray, k: int = 3):
    """Sign of f on a k^d interior probe grid of every box; one batched call.

    Probes stay strictly inside each box so that functions constant on
    left-closed grid cells are decided at the cell level rather than seen
    as mixed through their shared faces.
    """
    m, d = lo.shape
    inner = (np.arange(k) + 0.5) / k
    frac = _probe_grid(np.full(d, inner[0]), np.full(d, inner[-1]), k)
    pts = lo[:, None, :] + frac[None, :, :] * (hi - lo)[:, None, :]
    vals = _sign(f(pts.reshape(-1, d))).reshape(m, -1)
    all_neg = np.all(vals < 0, axis=1)
    all_pos = np.all(vals > 0, axis=1)
    return all_neg, all_pos


def _signed_volumes(f, lo: np.ndarray, hi: np.ndarray, w_neg: np.ndarray,
                    w_pos: np.ndarray, tol: float):
    """(sum w_neg_i vol{f<0 in box_i}, sum w_pos_i vol{f>=0 in box_i}) by
    adaptive sign subdivision; undecided volume below tol is halved."""
    # pre-split so thin slivers cannot hide inside one coarse uniform probe
    for _ in range(_PRESPLIT_LEVELS):
        reps = 2 ** lo.shape[1]
        w_neg = np.tile(w_neg, reps)
        w_pos = np.tile(w_pos, reps)
        lo, hi = _split_boxes(lo, hi)
    neg = pos = 0.0
    for _ in range(_MAX_SPLIT_LEVELS):
        vols = np.prod(hi - lo, axis=1)
        all_neg, all_pos = _probe_signs(f, lo, hi)
        neg += float(np.sum(w_neg[all_neg] * vols[all_neg]))
        pos += float(np.sum(w_pos[all_pos] * vols[all_pos]))
        mixed = ~(all_neg | all_pos)
        if not np.any(mixed):
            return neg, pos
        if float(np.sum(vols[mixed])) <= tol:
            half = vols[mixed] * 0.5
            neg += float(np.sum(w_neg[mixed] * half))
            pos += float(np.sum(w_pos[mixed] * half))
            return neg, pos
        reps = 2 ** lo.shape[1]
        w_neg = np.tile(w_neg[mixed], reps)
        w_pos = np.tile(w_pos[mixed], reps)
        lo, hi = _split_boxes(lo[mixed], hi[mixed])
    half = np.prod(hi - lo, axis=1) * 0.5
    neg += float(np.sum(w_neg * half))
    pos += float(np.sum(w_pos * half))
    return neg, pos


def _split_box(lo, hi):
    d = len(lo)
    mid = 0.5 * (lo + hi)
    out = []
    for mask in range(2**d):
        blo = lo.copy()
        bhi = hi.copy()
        for j in range(d):
            if (mask >> j) & 1:
                blo[j] = mid[j]
            else:
                bhi[j] = mid[j]
        out.append((blo, bhi))
    return out


def _probe_grid(lo, hi, k: int) -> np.ndarray:
    axes = [np.linspace(lo[j], hi[j], k) for j in range(len(lo))]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def misclassification_risk(
    f, problem: OracleProblem, mode: str = "exact",
    n_mc: int = 100_000, seed: int = 0, tol: float = 1e-4,
):
    """R(f) = s Q(sign f = -1) + (1-s) mu(sign f = +1).

    f may be a callable on row matrices or an array of per-cell values matched
    to the density grid (then the exact mode is pure cell arithmetic). MC mode
    returns an MCEstimate with a standard error.
    """
    dens = problem.density
    s = problem.s
    vols = dens.cell_volumes()
    if isinstance(f, np.ndarray):
        neg = _sign(f) < 0
        q_err = float(np.sum(dens.values[neg] * vols[neg]))
        mu_err = float(np.sum(vols[~neg]))
        return s * q_err + (1.0 - s) * mu_err
    if mode == "exact":
        idx = np.stack(
            [g.ravel() for g in np.indices(dens.values.shape)], axis=1
        )
        bps = [np.asarray(dens.breakpoints[j]) for j in range(dens.dim)]
        lo = np.stack([bps[j][idx[:, j]] for j in range(dens.dim)], axis=1)
        hi = np.stack([bps[j][idx[:, j] + 1] for j in range(dens.dim)], axis=1)
        # per-box weights: h on the negative side (Q-error), 1 on the
        # positive side (mu-error); one subdivision pass yields both terms
        h = dens.values.ravel()
        q_err, mu_err = _signed_volumes(
            f, lo, hi, h, np.ones_like(h), tol
        )
        return s * q_err + (1.0 - s) * mu_err
    if mode == "mc":
        xq = sample_Q(problem, n_mc, seed)
        xm = sample_mu(dens.dim, n_mc, seed + 1)
        a = (_sign(f(xq)) < 0).astype(float)
        b = (_sign(f(xm)) > 0).astype(float)
        value = s * a.mean() + (1.0 - s) * b.mean()
        var = s**2 * a.var(ddof=1) / n_mc + (1.0 - s) ** 2 * b.var(ddof=1) / n_mc
        return MCEstimate(float(value), float(np.sqrt(var)))
    raise ValueError("mode must be 'exact' or 'mc'")


def _hinge(t):
    return np.maximum(0.0, 1.0 - t)


def generalization_error(
    f, problem: OracleProblem, mode: str = "exact",
    n_mc: int = 100_000, seed: int = 0, tol: float = 1e-6, max_depth: int = 12,
):
    """Hinge generalization error: s int phi(f) dQ + (1-s) int phi(-f) dmu."""
    dens = problem.density
    s = problem.s
    vols = dens.cell_volumes()
    if isinstance(f, np.ndarray):
        q_term = float(np.sum(_hinge(f) * dens.values * vols))
        mu_term = float(np.sum(_hinge(-f) * vols))
        return s * q_term + (1.0 - s) * mu_term
    if mode == "exact":
        total = 0.0
        for idx in np.ndindex(dens.values.shape):
            lo = np.array([dens.breakpoints[j][idx[j]] for j in range(dens.dim)])
            hi = np.array([dens.breakpoints[j][idx[j] + 1] for j in range(dens.dim)])
            weight = s * dens.values[idx]
            g = lambda X: weight * _hinge(f(X)) + (1.0 - s) * _hinge(-f(X))
            total += _adaptive_mean(g, lo, hi, tol, max_depth) * float(np.prod(hi - lo))
        return total
    if mode == "mc":
        xq = sample_Q(problem, n_mc, seed)
        xm = sample_mu(dens.dim, n_mc, seed + 1)
        a = _hinge(np.asarray(f(xq), dtype=float))
        b = _hinge(-np.asarray(f(xm), dtype=float))
        value = s * a.mean() + (1.0 - s) * b.mean()
        var = s**2 * a.var(ddof=1) / n_mc + (1.0 - s) ** 2 * b.var(ddof=1) / n_mc
        return MCEstimate(float(value), float(np.sqrt(var)))
    raise ValueError("mode must be 'exact' or 'mc'")


def _adaptive_mean(g, lo, hi, tol: float, max_depth: int, depth: int = 0) -> float:
    """Mean of g over the box, refined until two midpoint levels agree."""
    coarse = float(np.mean(g(_probe_grid(lo, hi, 3))))
    subs = _split_box(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    fine = float(np.mean([np.mean(g(_probe_grid(blo, bhi, 3))) for blo, bhi in subs]))
    if abs(fine - coarse) <= tol or depth >= max_depth:
        return fine
    return float(
        np.mean(
            [_adaptive_mean(g, blo, bhi, tol, max_depth, depth + 1) for blo, bhi in subs]
        )
    )


def level_set_error(
    f, problem: OracleProblem, n_mc: int = 100_000, seed: int = 0,
):
    """mu-measure of {f > 0} symmetric-difference {h > rho}.

    Cell-constant f (array form) is exact; callables are estimated by Monte
    Carlo under mu, returning an MCEstimate.
    """
    dens = problem.density
    target = dens.values > problem.rho
    if isinstance(f, np.ndarray):
        vols = dens.cell_volumes()
        pred = _sign(f) > 0
        return float(np.sum(vols[pred != target]))
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    xm = sample_mu(dens.dim, n_mc, seed)
    pred = _sign(f(xm)) > 0
    truth = dens.values[dens.cell_index(xm)] > problem.rho
    diff = (pred != truth).astype(float)
    return MCEstimate(float(diff.mean()), float(np.sqrt(diff.var(ddof=1) / n_mc)))


@dataclass(frozen=True)
class NoiseProfile:
    t_grid: np.ndarray
    curve: np.ndarray
    q: float  # fitted exponent; inf for a hard margin, 0 for a plateau


def noise_profile(problem: OracleProblem, t_grid) -> NoiseProfile:
    """Exact curve t -> P_X(|eta - 1/2| <= t) under P_X = sQ + (1-s)mu.

    The exponent q is fitted by log-log least squares over the smallest decade
    of t where the curve is strictly between 0 and 1. A curve that vanishes
    below a positive margin reports q = inf; a full plateau reports q = 0.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0) or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be positive and ascending")
    dens = problem.density
    s = problem.s
    margins = np.abs(_eta_cells(problem) - 0.5).ravel()
    weights = ((s * dens.values + (1.0 - s)) * dens.cell_volumes()).ravel()
    curve = np.array([weights[margins <= t].sum() for t in t_grid])
    total = weights.sum()

    min_margin = margins.min()
    if min_margin > 0 and np.all(curve[t_grid < min_margin] == 0.0) and np.any(
        t_grid < min_margin
    ):
        q = np.inf
    elif np.allclose(curve, total):
        q = 0.0
    else:
        interior = (curve > 0) & (curve < total)
        if not np.any(interior):
            q = np.inf if curve[0] == 0.0 else 0.0
        else:
            t_sel = t_grid[interior]
            window = interior & (t_grid <= 10.0 * t_sel[0])
            tt, cc = np.log(t_grid[window]), np.log(curve[window])
            if len(tt) < 2 or np.ptp(tt) == 0:
                q = 0.0
            else:
                q = float(np.polyfit(tt, cc, 1)[0])
    return NoiseProfile(t_grid=t_grid, curve=curve, q=q)
