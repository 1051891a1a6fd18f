"""Heading-angle prior and the expected tangent factor g(theta).

``g(theta)`` converts a tolerated mean position offset into a per-point
aggregation duration. It is the expectation of ``|tan(theta + alpha)|`` over
the heading distribution of moving objects, with the tangent clamped so the
integrand stays bounded when ``theta + alpha`` approaches +-90 degrees, and
floored so the duration bound stays finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._atomic import atomic_write_text
from .errors import EmptyHistogram, InvalidResolution

TAN_CLAMP_DEG = 88.0
TAN_CLAMP = math.tan(math.radians(TAN_CLAMP_DEG))
G_FLOOR = 1e-3
SIMPSON_INTERVALS = 4096
B_MIN = 1e-4  # rad


@dataclass(frozen=True)
class HeadingDistribution:
    """Distribution of object headings relative to the radar's forward axis.

    ``kind == "laplace"`` uses a Laplace density truncated to [-pi/2, pi/2];
    ``kind == "empirical"`` uses point masses at ``angles`` with ``probs``.
    ``mu`` and ``b`` are radians. An empirical distribution may still carry a
    Laplace fit in ``mu``/``b`` (see :func:`fit_empirical`).
    """

    kind: str = "laplace"
    mu: float = 0.0
    b: float = math.radians(3.1)
    angles: np.ndarray | None = field(default=None, compare=False)
    probs: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("laplace", "empirical"):
            raise ValueError(f"unknown heading distribution kind {self.kind!r}")
        if not self.b > 0:
            raise ValueError("Laplace scale b must be positive")
        if self.kind == "empirical":
            if self.angles is None or self.probs is None or len(self.angles) == 0:
                raise EmptyHistogram("empirical distribution needs angles and probabilities")
            angles = np.asarray(self.angles, dtype=float)
            probs = np.asarray(self.probs, dtype=float)
            if angles.shape != probs.shape:
                raise ValueError("angles and probs must have the same shape")
            if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
                raise ValueError("probabilities must be non-negative and sum to 1")
            if np.any(np.abs(angles) > math.pi / 2 + 1e-12):
                raise ValueError("empirical support must lie within [-pi/2, pi/2]")
            object.__setattr__(self, "angles", angles)
            object.__setattr__(self, "probs", probs)

    @classmethod
    def laplace(cls, mu_deg: float = 0.0, b_deg: float = 3.1) -> "HeadingDistribution":
        return cls("laplace", math.radians(mu_deg), math.radians(b_deg))

    @classmethod
    def delta(cls, angle: float = 0.0) -> "HeadingDistribution":
        """All objects share one heading (radians)."""
        return cls("empirical", angles=np.array([angle]), probs=np.array([1.0]))

    @property
    def is_symmetric(self) -> bool:
        if self.kind == "laplace":
            return self.mu == 0.0
        order = np.argsort(self.angles)
        mirror = np.argsort(-self.angles)
        return bool(
            np.allclose(self.angles[order], -self.angles[mirror])
            and np.allclose(self.probs[order], self.probs[mirror])
        )

    def as_laplace(self) -> "HeadingDistribution":
        return HeadingDistribution("laplace", self.mu, self.b)

    def pdf(self, alpha) -> np.ndarray:
        """Truncated Laplace density on [-pi/2, pi/2] (zero outside)."""
        if self.kind != "laplace":
            raise TypeError("pdf is only defined for the Laplace kind")
        alpha = np.asarray(alpha, dtype=float)
        half = math.pi / 2
        mass = self.b * (2.0 - math.exp(-(half - self.mu) / self.b) - math.exp(-(half + self.mu) / self.b))
        dens = np.exp(-np.abs(alpha - self.mu) / self.b) / mass
        return np.where(np.abs(alpha) <= half, dens, 0.0)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw headings; Laplace draws are rejected outside [-pi/2, pi/2]."""
        if self.kind == "empirical":
            return rng.choice(self.angles, size=size, p=self.probs)
        out = np.empty(0)
        while out.size < size:
            draw = rng.laplace(self.mu, self.b, size=size)
            out = np.concatenate((out, draw[np.abs(draw) <= math.pi / 2]))
        return out[:size]


def _clamped_abs_tan(x):
    return np.minimum(np.abs(np.tan(x)), TAN_CLAMP)


def _simpson_weights(n: int, h: float) -> np.ndarray:
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def g_values(theta, dist: HeadingDistribution, *, intervals: int = SIMPSON_INTERVALS, g_floor: float = G_FLOOR) -> np.ndarray:
    """Vectorised :func:`g_theta` over an array of azimuths."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if dist.kind == "empirical":
        nodes, weights = dist.angles, dist.probs
    else:
        if intervals % 2:
            raise ValueError("Simpson's rule needs an even number of intervals")
        nodes = np.linspace(-math.pi / 2, math.pi / 2, intervals + 1)
        weights = _simpson_weights(intervals, math.pi / intervals) * dist.pdf(nodes)
    out = np.empty_like(theta)
    chunk = max(1, 2_000_000 // nodes.size)
    for start in range(0, theta.size, chunk):
        th = theta[start:start + chunk, None]
        # row-wise reduction (not a matmul) so each value is independent of batching
        out[start:start + chunk] = np.sum(_clamped_abs_tan(th + nodes[None, :]) * weights, axis=1)
    return np.maximum(out, g_floor)


def g_theta(theta: float, dist: HeadingDistribution, **kw) -> float:
    """Expected clamped ``|tan(theta + alpha)|`` under ``dist``, floored at ``g_floor``."""
    return float(g_values([theta], dist, **kw)[0])


@dataclass
class GThetaTable:
    theta_grid: np.ndarray
    values: np.ndarray
    metadata: dict

    @property
    def resolution(self) -> float:
        return float(self.theta_grid[1] - self.theta_grid[0])

    def lookup(self, theta) -> np.ndarray | float:
        """Linear interpolation of g at azimuth(s) ``theta`` (wrapped to [-pi, pi])."""
        th = np.asarray(theta, dtype=float)
        th = np.where(np.abs(th) > math.pi, np.mod(th + math.pi, 2 * math.pi) - math.pi, th)
        out = np.interp(th, self.theta_grid, self.values)
        return float(out) if out.ndim == 0 else out

    __call__ = lookup

    def save(self, path) -> None:
        """Write the portable text export atomically."""
        atomic_write_text(path, dumps_table(self))

    @classmethod
    def load(cls, path) -> "GThetaTable":
        with open(path) as f:
            return loads_table(f.read())


def build_table(
    dist: HeadingDistribution,
    resolution: float = math.radians(0.1),
    *,
    intervals: int = SIMPSON_INTERVALS,
    g_floor: float = G_FLOOR,
) -> GThetaTable:
    """Tabulate g over [-pi, pi] with spacing no coarser than ``resolution`` (rad)."""
    if not (1e-4 <= resolution <= 0.05):
        raise InvalidResolution(f"resolution must be within [1e-4, 0.05] rad, got {resolution}")
    n = int(math.ceil(2 * math.pi / resolution - 1e-6)) + 1
    grid = np.linspace(-math.pi, math.pi, n)
    values = g_values(grid, dist, intervals=intervals, g_floor=g_floor)
    meta = {
        "kind": dist.kind,
        "mu_deg": math.degrees(dist.mu),
        "b_deg": math.degrees(dist.b),
        "tan_clamp_deg": TAN_CLAMP_DEG,
        "g_floor": g_floor,
        "resolution_deg": math.degrees(2 * math.pi / (n - 1)),
        "n": n,
        "intervals": intervals if dist.kind == "laplace" else int(dist.angles.size),
    }
    return GThetaTable(grid, values, meta)


_INT_KEYS = ("n", "intervals")


def dumps_table(table: GThetaTable) -> str:
    meta = " ".join(
        f"{k}={v}" if isinstance(v, (str, int)) else f"{k}={format(v, '.17g')}"
        for k, v in table.metadata.items()
    )
    lines = [f"# g_theta {meta}", "theta_deg,value"]
    degrees = np.degrees(table.theta_grid)
    lines += [f"{format(t, '.17g')},{format(v, '.17g')}" for t, v in zip(degrees, table.values)]
    return "\n".join(lines) + "\n"


def loads_table(text: str) -> GThetaTable:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# g_theta"):
        raise ValueError("missing g_theta header line")
    meta: dict = {}
    for item in lines[0][len("# g_theta"):].split():
        key, _, raw = item.partition("=")
        if key == "kind":
            meta[key] = raw
        elif key in _INT_KEYS:
            meta[key] = int(raw)
        else:
            meta[key] = float(raw)
    if lines[1].strip() != "theta_deg,value":
        raise ValueError("expected 'theta_deg,value' column header")
    rows = [ln.split(",") for ln in lines[2:] if ln.strip()]
    degrees = np.array([float(r[0]) for r in rows])
    values = np.array([float(r[1]) for r in rows])
    n = meta.get("n", degrees.size)
    if n != degrees.size:
        raise ValueError(f"header declares {n} rows, found {degrees.size}")
    grid = np.linspace(-math.pi, math.pi, n)
    if not np.allclose(np.degrees(grid), degrees, rtol=0, atol=1e-9):
        raise ValueError("theta grid is not the uniform [-180, 180] degree grid")
    return GThetaTable(grid, values, meta)


def _fold(angles: np.ndarray) -> np.ndarray:
    # tan has period pi, so headings differing by 180 degrees are equivalent
    half = math.pi / 2
    out = np.asarray(angles, dtype=float).copy()
    outside = np.abs(out) > half
    out[outside] = np.mod(out[outside] + half, math.pi) - half
    return out


def _weighted_median(x: np.ndarray, w: np.ndarray) -> float:
    order = np.argsort(x, kind="stable")
    cw = np.cumsum(w[order])
    return float(x[order][np.searchsorted(cw, 0.5 * cw[-1])])


def fit_empirical(
    angles: Sequence[float],
    counts: Sequence[float] | None = None,
    *,
    bin_width: float = math.radians(1.0),
    core_window: float = math.radians(45.0),
    b_min: float = B_MIN,
) -> HeadingDistribution:
    """Build an empirical heading distribution and a Laplace fit to its main mode.

    ``angles`` are either raw heading samples (``counts is None``) or histogram
    bin centres with ``counts``. Headings are folded into [-pi/2, pi/2].
    Raw samples are binned at ``bin_width`` for the empirical table.

    The Laplace fit is the maximum-likelihood pair: the median for ``mu`` and
    the mean absolute deviation for ``b``. Only samples within ``core_window``
    of the median enter ``b``, so secondary modes (e.g. crossing traffic near
    +-90 degrees) do not inflate the scale.
    """
    a = _fold(np.atleast_1d(np.asarray(angles, dtype=float)))
    w = np.ones_like(a) if counts is None else np.asarray(counts, dtype=float)
    if a.size == 0 or w.sum() <= 0:
        raise EmptyHistogram("heading histogram is empty")
    if np.any(w < 0):
        raise ValueError("histogram counts must be non-negative")

    mu = _weighted_median(a, w)
    core = np.abs(a - mu) <= core_window
    b = float(np.sum(w[core] * np.abs(a[core] - mu)) / np.sum(w[core]))
    b = max(b, b_min)

    if counts is None:
        edges = np.arange(-math.pi / 2, math.pi / 2 + bin_width, bin_width)
        edges[-1] = max(edges[-1], math.pi / 2)
        hist, edges = np.histogram(a, bins=edges)
        centres = np.clip(0.5 * (edges[:-1] + edges[1:]), -math.pi / 2, math.pi / 2)
        keep = hist > 0
        centres, probs = centres[keep], hist[keep].astype(float)
    else:
        keep = w > 0
        centres, probs = a[keep], w[keep]
    probs = probs / probs.sum()
    return HeadingDistribution("empirical", mu, b, angles=centres, probs=probs)
