"""Geometry of projective queries on a hypercube domain.

A query is a pair (projection vector, reference point). The projection
picks the coordinates that vary; the reference point supplies the frozen
ones and is zero on the projection's support. Model-side code works on
the unit cube throughout; a :class:`Domain` carries the affine map
between native units and the cube.

Under these conventions the set of scalars ``alpha`` keeping
``alpha * xi + x`` inside the cube is always exactly ``[0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Tolerance (in normalized units) for membership checks; values inside
#: the tolerance band are clamped onto the cube.
BOUNDS_TOL = 1e-9


class DomainError(ValueError):
    """Point outside the domain, or ill-formed bounds."""


class ProjectionError(ValueError):
    """Ill-formed projection vector (all-zero, negative, or non-normalized)."""


class QueryError(ValueError):
    """Query violating the reference/projection conventions."""


class IntervalError(ValueError):
    """Scalar projection outside the feasible interval."""


def _readonly(values, dtype=float) -> np.ndarray:
    out = np.array(values, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box in native units."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", _readonly(self.lower))
        object.__setattr__(self, "upper", _readonly(self.upper))
        if self.lower.ndim != 1 or self.lower.shape != self.upper.shape:
            raise DomainError("lower and upper must be 1-d arrays of equal length")
        if self.dim < 2:
            raise DomainError("domain must have at least 2 dimensions")
        if not np.all(np.isfinite(self.lower)) or not np.all(np.isfinite(self.upper)):
            raise DomainError("domain bounds must be finite")
        if not np.all(self.lower < self.upper):
            bad = int(np.argmin(self.upper - self.lower))
            raise DomainError(
                f"lower bound must be strictly below upper bound (coordinate {bad})"
            )

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @classmethod
    def from_config(cls, cfg: dict) -> "Domain":
        """Build from a ``{"lower": [...], "upper": [...]}`` mapping."""
        return cls(np.asarray(cfg["lower"], float), np.asarray(cfg["upper"], float))

    def to_config(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


def normalize_point(domain: Domain, p) -> np.ndarray:
    """Map a native-unit point onto the unit cube.

    Raises :class:`DomainError` if any coordinate lies outside the domain
    by more than ``BOUNDS_TOL`` in normalized units; smaller excursions
    are clamped.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (domain.dim,):
        raise DomainError(f"expected a point of dimension {domain.dim}, got shape {p.shape}")
    u = (p - domain.lower) / domain.span
    off = (u < -BOUNDS_TOL) | (u > 1.0 + BOUNDS_TOL)
    if np.any(off):
        d = int(np.flatnonzero(off)[0])
        raise DomainError(
            f"coordinate {d} = {p[d]} outside domain [{domain.lower[d]}, {domain.upper[d]}]"
        )
    return _readonly(np.clip(u, 0.0, 1.0))


def denormalize_point(domain: Domain, u) -> np.ndarray:
    """Map a unit-cube point back to native units."""
    u = np.asarray(u, dtype=float)
    if u.shape != (domain.dim,):
        raise DomainError(f"expected a point of dimension {domain.dim}, got shape {u.shape}")
    return _readonly(domain.lower + u * domain.span)


def as_unit_point(coords, tol: float = BOUNDS_TOL) -> np.ndarray:
    """Validate and clamp coordinates onto the unit cube."""
    u = np.asarray(coords, dtype=float)
    if u.ndim != 1:
        raise DomainError("a point must be a 1-d array")
    if np.any(u < -tol) or np.any(u > 1.0 + tol) or not np.all(np.isfinite(u)):
        bad = int(np.flatnonzero((u < -tol) | (u > 1.0 + tol) | ~np.isfinite(u))[0])
        raise DomainError(f"coordinate {bad} = {u[bad]} outside the unit cube")
    return _readonly(np.clip(u, 0.0, 1.0))


@dataclass(frozen=True)
class ProjectionVector:
    """Sparse nonnegative direction with sup-norm exactly 1.

    ``values`` is dense over all D coordinates; off-support entries are
    exactly zero. Build instances through :func:`make_projection`.
    """

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))
        v = self.values
        if v.ndim != 1 or v.size == 0:
            raise ProjectionError("projection values must form a nonempty 1-d array")
        if not np.all(np.isfinite(v)):
            raise ProjectionError("projection values must be finite")
        if np.any(v < 0.0):
            raise ProjectionError("projection values must be nonnegative")
        if v.max() != 1.0:
            raise ProjectionError("projection must be sup-norm normalized (max value 1)")

    @property
    def dim(self) -> int:
        return self.values.size

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.values)


def make_projection(raw) -> ProjectionVector:
    """Normalize a nonnegative direction to sup-norm 1.

    Raises :class:`ProjectionError` on an all-zero or negative input.
    Idempotent: the output normalizes to itself bitwise.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 1 or raw.size == 0:
        raise ProjectionError("projection input must be a nonempty 1-d array")
    if np.any(raw < 0.0) or not np.all(np.isfinite(raw)):
        bad = int(np.flatnonzero((raw < 0.0) | ~np.isfinite(raw))[0])
        raise ProjectionError(f"projection entry {bad} = {raw[bad]} is invalid (must be >= 0)")
    mx = float(raw.max())
    if mx <= 0.0:
        raise ProjectionError("projection must have at least one positive entry")
    return ProjectionVector(raw / mx)


def coordinate_projection(dim: int, d: int) -> ProjectionVector:
    """The d-th standard unit vector as a projection."""
    if not 0 <= d < dim:
        raise ProjectionError(f"coordinate {d} out of range for dimension {dim}")
    e = np.zeros(dim)
    e[d] = 1.0
    return ProjectionVector(e)


@dataclass(frozen=True)
class ProjectiveQuery:
    """A projection vector paired with a reference point.

    The reference is a unit-cube point whose coordinates on the
    projection's support are exactly zero, so the segment
    ``alpha * xi + x`` for ``alpha`` in [0, 1] stays inside the cube.
    """

    xi: ProjectionVector
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", as_unit_point(self.x))
        if self.x.size != self.xi.dim:
            raise QueryError(
                f"reference dimension {self.x.size} != projection dimension {self.xi.dim}"
            )
        if np.any(self.x[self.xi.support] != 0.0):
            d = int(self.xi.support[np.flatnonzero(self.x[self.xi.support])[0]])
            raise QueryError(f"reference must be zero on the support (coordinate {d})")

    @property
    def dim(self) -> int:
        return self.xi.dim


def query_with_reference(xi: ProjectionVector, point) -> ProjectiveQuery:
    """Build a query from an arbitrary cube point by zeroing it on the support."""
    x = np.array(as_unit_point(point))
    x[xi.support] = 0.0
    return ProjectiveQuery(xi, x)


@dataclass(frozen=True)
class FeasibleInterval:
    """Closed interval of feasible scalar projections."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise IntervalError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, alpha: float, tol: float = BOUNDS_TOL) -> bool:
        return self.lo - tol <= alpha <= self.hi + tol


def feasible_interval(q: ProjectiveQuery) -> FeasibleInterval:
    """Interval of scalars keeping ``alpha * xi + x`` inside the cube.

    Under the normalization conventions this is always [0, 1]; both
    endpoints are verified by membership.
    """
    if np.any(q.x[q.xi.support] != 0.0):
        raise QueryError("reference is nonzero on the projection support")
    for alpha in (0.0, 1.0):
        pt = alpha * q.xi.values + q.x
        if np.any(pt < -BOUNDS_TOL) or np.any(pt > 1.0 + BOUNDS_TOL):
            raise QueryError(f"endpoint alpha={alpha} leaves the cube")
    return FeasibleInterval(0.0, 1.0)


def embed(alpha: float, q: ProjectiveQuery) -> np.ndarray:
    """The cube point ``alpha * xi + x``.

    ``alpha`` must lie in the feasible interval; the result is clamped
    onto [0, 1] to absorb floating-point drift.
    """
    if not np.isfinite(alpha) or not -BOUNDS_TOL <= alpha <= 1.0 + BOUNDS_TOL:
        raise IntervalError(f"alpha = {alpha} outside the feasible interval [0, 1]")
    return _readonly(np.clip(alpha * q.xi.values + q.x, 0.0, 1.0))
