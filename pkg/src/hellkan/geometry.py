"""Finite ground spaces, transport costs and the metric cone over them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

HALF_PI = 0.5 * np.pi

# configurations this close to antipodal go through the vertex
ANTIPODAL_SLACK = 1e-12


class UnsupportedGeometryError(ValueError):
    """Geodesic requested in a space where segments are unknown."""


def _euclidean(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances; compensated sums beyond 16 coordinates."""
    k = p.shape[1]
    if k <= 16:
        diff = p[:, None, :] - q[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    total = np.zeros((p.shape[0], q.shape[0]))
    comp = np.zeros_like(total)
    for c in range(k):
        term = (p[:, None, c] - q[None, :, c]) ** 2 - comp
        t = total + term
        comp = (t - total) - term
        total = t
    return np.sqrt(total)


@dataclass(frozen=True, eq=False)
class GroundSpace:
    """A finite metric space given by coordinates or by a distance matrix.

    Use :meth:`from_points` or :meth:`from_dist`; ``dist`` is always filled.
    """

    dist: np.ndarray
    points: Optional[np.ndarray] = None
    metric_certified: bool = False

    @classmethod
    def from_points(cls, points) -> "GroundSpace":
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        d = _euclidean(pts, pts)
        np.fill_diagonal(d, 0.0)
        return cls(dist=d, points=pts, metric_certified=True)

    @classmethod
    def from_dist(cls, dist, certify: bool = True) -> "GroundSpace":
        d = np.array(dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("distance matrix must be square")
        if np.any(d < 0) or np.any(np.isnan(d)):
            raise ValueError("distances must be nonnegative")
        if not np.allclose(d, d.T, rtol=0, atol=0):
            raise ValueError("distance matrix must be symmetric")
        if np.any(np.diag(d) != 0):
            raise ValueError("distance matrix must have zero diagonal")
        ok = certify and len(d) <= 200 and triangle_violation(d) <= 0.0
        return cls(dist=d, metric_certified=bool(ok))

    def __len__(self):
        return self.dist.shape[0]

    @property
    def euclidean(self) -> bool:
        return self.points is not None

    def truncated(self, a: float) -> np.ndarray:
        """``d ∧ a``."""
        return np.minimum(self.dist, a)

    def scaled(self, lam: float) -> "GroundSpace":
        """The same points with distance ``lam * d``."""
        pts = None if self.points is None else lam * self.points
        return GroundSpace(self.dist * lam, pts, self.metric_certified)

    def union(self, other: "GroundSpace") -> "GroundSpace":
        """Disjoint union of two Euclidean spaces in the same ambient dimension."""
        if not (self.euclidean and other.euclidean):
            raise UnsupportedGeometryError("union needs coordinates")
        return GroundSpace.from_points(np.vstack([self.points, other.points]))

    def to_dict(self) -> dict:
        if self.points is not None:
            return {"points": self.points.tolist()}
        return {"dist": self.dist.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "GroundSpace":
        if "points" in d:
            return cls.from_points(d["points"])
        if "dist" in d:
            return cls.from_dist(d["dist"])
        raise ValueError("ground space needs 'points' or 'dist'")


def triangle_violation(d: np.ndarray) -> float:
    """Largest ``d(i,j) - d(i,l) - d(l,j)`` over all triples."""
    worst = -np.inf
    for l in range(d.shape[0]):
        worst = max(worst, float(np.max(d - d[:, l, None] - d[None, l, :])))
    return worst


# ----------------------------------------------------------------------
# costs

def log_cost(d):
    """``ℓ(d) = -log cos²(d)`` for ``d < π/2`` and ``+inf`` beyond."""
    d = np.asarray(d, dtype=float)
    dc = np.minimum(d, HALF_PI)
    with np.errstate(divide="ignore", invalid="ignore"):
        # log1p form near 0, direct cosine near π/2 to avoid cancellation
        out = np.where(dc < 0.25 * np.pi, -np.log1p(-np.sin(dc) ** 2), -2.0 * np.log(np.cos(dc)))
    out = np.where(d >= HALF_PI, np.inf, out)
    return float(out) if out.ndim == 0 else out


def ghk_ground(z):
    """``g(z) = arccos(exp(-z²/2))``, the ground metric turning ``ℓ`` into ``d²``."""
    z = np.asarray(z, dtype=float)
    out = np.arctan(np.sqrt(np.expm1(z * z)))
    return float(out) if out.ndim == 0 else out


LOG = "log"
SQDIST = "sqdist"
EXPLICIT = "explicit"


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Extended-real cost matrix; ``inf`` marks forbidden pairs."""

    values: np.ndarray
    kind: str = EXPLICIT

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("cost must be a matrix")
        if np.any(v < 0) or np.any(np.isnan(v)):
            raise ValueError("costs must be nonnegative")
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape

    @classmethod
    def log(cls, space: GroundSpace) -> "CostMatrix":
        return cls(log_cost(space.dist), LOG)

    @classmethod
    def sqdist(cls, space: GroundSpace) -> "CostMatrix":
        return cls(space.dist**2, SQDIST)

    @classmethod
    def explicit(cls, values) -> "CostMatrix":
        return cls(np.asarray(values, dtype=float), EXPLICIT)

    @classmethod
    def from_dict(cls, d: dict, space: Optional[GroundSpace] = None) -> "CostMatrix":
        kind = d.get("kind", EXPLICIT)
        if kind == EXPLICIT:
            m = np.array(d["matrix"], dtype=object)
            m = np.where(m == "inf", np.inf, m).astype(float)
            return cls.explicit(m)
        if space is None:
            raise ValueError(f"cost kind {kind!r} needs a ground space")
        if kind == LOG:
            return cls.log(space)
        if kind == SQDIST:
            return cls.sqdist(space)
        raise ValueError(f"unknown cost kind {kind!r}")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == EXPLICIT:
            out["matrix"] = [["inf" if np.isinf(v) else float(v) for v in row]
                             for row in self.values]
        return out


# ----------------------------------------------------------------------
# cone

Position = Union[int, tuple]


@dataclass(frozen=True)
class ConePoint:
    """Point ``[x, r]`` of the cone; every point with ``r = 0`` is the vertex.

    ``x`` is either an index into a :class:`GroundSpace` or a tuple of
    Euclidean coordinates.
    """

    x: Position
    r: float

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("cone radius must be nonnegative")
        if not isinstance(self.x, (int, np.integer)):
            object.__setattr__(self, "x", tuple(float(c) for c in np.ravel(self.x)))

    @property
    def is_vertex(self) -> bool:
        return self.r == 0

    def __eq__(self, other):
        if not isinstance(other, ConePoint):
            return NotImplemented
        if self.r == 0 or other.r == 0:
            return self.r == other.r
        return self.r == other.r and self.x == other.x

    def __hash__(self):
        return hash(("vertex",)) if self.r == 0 else hash((self.x, self.r))


VERTEX = ConePoint(0, 0.0)


def _coords(x: Position, space: Optional[GroundSpace]) -> Optional[np.ndarray]:
    if isinstance(x, tuple):
        return np.asarray(x, dtype=float)
    if space is not None and space.points is not None:
        return space.points[x]
    return None


def _base_distance(y1: ConePoint, y2: ConePoint, space: Optional[GroundSpace]) -> float:
    if isinstance(y1.x, tuple) or isinstance(y2.x, tuple):
        p, q = _coords(y1.x, space), _coords(y2.x, space)
        if p is None or q is None:
            raise UnsupportedGeometryError("cannot compare coordinates with indices")
        return float(np.linalg.norm(p - q))
    if space is None:
        if y1.x == y2.x:
            return 0.0
        raise ValueError("index cone points need a ground space")
    return float(space.dist[y1.x, y2.x])


def cone_distance_from(r1, r2, d, truncation: str = "pi"):
    """Vectorized cone distance from radii and base distance.

    Uses ``|r1 - r2|² + 4 r1 r2 sin²(d_a / 2)`` with ``a = π`` or ``π/2``.
    """
    a = np.pi if truncation == "pi" else HALF_PI
    if truncation not in ("pi", "half_pi"):
        raise ValueError("truncation must be 'pi' or 'half_pi'")
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    da = np.minimum(np.asarray(d, dtype=float), a)
    sq = (r1 - r2) ** 2 + 4.0 * r1 * r2 * np.sin(0.5 * da) ** 2
    out = np.sqrt(np.maximum(sq, 0.0))
    return float(out) if out.ndim == 0 else out


def cone_distance(y1: ConePoint, y2: ConePoint, space: Optional[GroundSpace] = None,
                  truncation: str = "pi") -> float:
    """Distance on the cone with the ``π`` or ``π/2`` truncation of ``d``."""
    if y1.is_vertex or y2.is_vertex:
        return abs(y1.r - y2.r)
    return cone_distance_from(y1.r, y2.r, _base_distance(y1, y2, space), truncation)


def geodesic_arrays(p1: np.ndarray, r1: np.ndarray, p2: np.ndarray, r2: np.ndarray,
                    t: float) -> tuple[np.ndarray, np.ndarray]:
    """Cone geodesics between Euclidean cone points, vectorized over rows.

    ``p1``, ``p2`` have shape ``(n, k)``.  Returns positions ``(n, k)`` and
    radii ``(n,)`` at time ``t``.  Pairs at distance ``>= π`` follow the
    broken path through the vertex at constant speed.
    """
    p1 = np.atleast_2d(np.asarray(p1, dtype=float))
    p2 = np.atleast_2d(np.asarray(p2, dtype=float))
    r1 = np.atleast_1d(np.asarray(r1, dtype=float))
    r2 = np.atleast_1d(np.asarray(r2, dtype=float))
    d = np.linalg.norm(p2 - p1, axis=1)
    # polar form of (1 - t) r1 + t r2 e^{i d}
    re = (1 - t) * r1 + t * r2 * np.cos(d)
    im = t * r2 * np.sin(d)
    radius = np.hypot(re, im)
    theta = np.arctan2(im, re)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(d > 0, theta / d, 0.0)
    pos = p1 + frac[:, None] * (p2 - p1)
    # vertex endpoints: stay on the ray of the other endpoint
    pos = np.where((r1 == 0)[:, None], p2, pos)
    pos = np.where(((r2 == 0) & (r1 > 0))[:, None], p1, pos)

    broken = (d >= np.pi - ANTIPODAL_SLACK) & (r1 > 0) & (r2 > 0)
    if np.any(broken):
        s = t * (r1 + r2)
        first = s <= r1
        radius = np.where(broken, np.where(first, r1 - s, s - r1), radius)
        pos = np.where((broken & first)[:, None], p1, pos)
        pos = np.where((broken & ~first)[:, None], p2, pos)
    return pos, radius


def cone_geodesic(y1: ConePoint, y2: ConePoint, t: float,
                  space: Optional[GroundSpace] = None) -> ConePoint:
    """Point at time ``t`` on the constant-speed cone geodesic from ``y1`` to ``y2``.

    Raises
    ------
    UnsupportedGeometryError
        When the base points differ, neither endpoint is the vertex and no
        coordinates are known (segments are only available in Euclidean space).
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if y1.is_vertex and y2.is_vertex:
        return VERTEX
    if y2.is_vertex:
        return ConePoint(y1.x, (1 - t) * y1.r)
    if y1.is_vertex:
        return ConePoint(y2.x, t * y2.r)
    p, q = _coords(y1.x, space), _coords(y2.x, space)
    if p is None or q is None:
        if y1.x == y2.x:
            return ConePoint(y1.x, (1 - t) * y1.r + t * y2.r)
        d = _base_distance(y1, y2, space)
        if d >= np.pi - ANTIPODAL_SLACK:
            s = t * (y1.r + y2.r)
            return ConePoint(y1.x, y1.r - s) if s <= y1.r else ConePoint(y2.x, s - y1.r)
        raise UnsupportedGeometryError("geodesics need Euclidean coordinates")
    pos, rad = geodesic_arrays(p[None], np.array([y1.r]), q[None], np.array([y2.r]), t)
    return ConePoint(tuple(pos[0]), float(rad[0]))
