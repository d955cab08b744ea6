"""Simulated line-optimum oracles over standard test functions.

Given a query, the oracle minimizes the (optionally noisy) objective
along the query's segment and reports the minimizing scalar, imitating
a human who picks the best point on a slider.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import Domain, DomainError, ProjectiveQuery, denormalize_point, embed

_HARTMANN_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_HARTMANN_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
_HARTMANN_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)
_HARTMANN6_ARGMIN = np.array([0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573])


def camel2d(p: np.ndarray) -> float:
    x, y = p
    return (
        (4.0 - 2.1 * x * x + x**4 / 3.0) * x * x
        + x * y
        + (-4.0 + 4.0 * y * y) * y * y
    )


def hartmann6(p: np.ndarray) -> float:
    inner = np.sum(_HARTMANN_A * (p[None, :] - _HARTMANN_P) ** 2, axis=1)
    return -float(np.dot(_HARTMANN_ALPHA, np.exp(-inner)))


def levy(p: np.ndarray) -> float:
    w = 1.0 + (p - 1.0) / 4.0
    head = np.sin(np.pi * w[0]) ** 2
    mid = np.sum((w[:-1] - 1.0) ** 2 * (1.0 + 10.0 * np.sin(np.pi * w[:-1] + 1.0) ** 2))
    tail = (w[-1] - 1.0) ** 2 * (1.0 + np.sin(2.0 * np.pi * w[-1]) ** 2)
    return float(head + mid + tail)


def ackley(p: np.ndarray) -> float:
    d = p.size
    s1 = np.sqrt(np.sum(p * p) / d)
    s2 = np.sum(np.cos(2.0 * np.pi * p)) / d
    return float(-20.0 * np.exp(-0.2 * s1) - np.exp(s2) + 20.0 + np.e)


@dataclass(frozen=True)
class TestFunction:
    """Named objective with its native domain and a noise level."""

    name: str
    domain: Domain
    evaluator: Callable[[np.ndarray], float]
    noise_sd: float

    def __post_init__(self):
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")


@dataclass(frozen=True)
class OracleAnswer:
    """The minimizing scalar projection and its noiseless value."""

    alpha_star: float
    f_at_answer: float

    def __post_init__(self):
        if not 0.0 <= self.alpha_star <= 1.0:
            raise ValueError(f"alpha_star = {self.alpha_star} outside [0, 1]")


_REGISTRY: dict[str, tuple[Callable, list, list]] = {
    "camel2d": (camel2d, [-3.0, -2.0], [3.0, 2.0]),
    "hartmann6": (hartmann6, [0.0] * 6, [1.0] * 6),
    "levy10": (levy, [-10.0] * 10, [10.0] * 10),
    "ackley20": (ackley, [-32.768] * 20, [32.768] * 20),
}

_NOISE_CACHE: dict[str, float] = {}


def _quadratic_center(dim: int) -> np.ndarray:
    return np.arange(1, dim + 1) / (dim + 1.0)


def _parse_quadratic(name: str) -> int | None:
    if name.startswith("quadratic"):
        suffix = name[len("quadratic") :].lstrip("-")
        if suffix.isdigit() and int(suffix) >= 2:
            return int(suffix)
    return None


def _default_noise_sd(name: str, domain: Domain, evaluator) -> float:
    """1% of the function's value spread over 10^4 fixed pseudo-random points.

    Spread is the interquartile range, not max - min: functions with
    polynomial growth take extreme values in the corners, and a noise
    floor tied to those would drown the optimum basin entirely.
    """
    if name not in _NOISE_CACHE:
        rng = np.random.default_rng(0)
        pts = rng.uniform(domain.lower, domain.upper, size=(10_000, domain.dim))
        vals = np.array([evaluator(p) for p in pts])
        q25, q75 = np.percentile(vals, [25.0, 75.0])
        _NOISE_CACHE[name] = 0.01 * float(q75 - q25)
    return _NOISE_CACHE[name]


def make_test_function(
    name: str,
    noise_sd: float | None = None,
    center: np.ndarray | None = None,
) -> TestFunction:
    """Build a named test function.

    ``quadratic-<d>`` is the diagnostic ``|p - c|^2`` on the unit cube
    with a fixed interior center (overridable via ``center``). A
    ``noise_sd`` of None selects the default, 1% of the function's
    sampled range; pass 0 for a noiseless oracle.
    """
    qdim = _parse_quadratic(name)
    if qdim is not None:
        c = _quadratic_center(qdim) if center is None else np.asarray(center, float)
        domain = Domain(np.zeros(qdim), np.ones(qdim))

        def evaluator(p, _c=c):
            return float(np.sum((p - _c) ** 2))

    elif name in _REGISTRY:
        fn, lo, hi = _REGISTRY[name]
        domain = Domain(np.asarray(lo), np.asarray(hi))
        evaluator = fn
    else:
        raise KeyError(f"unknown test function {name!r}")
    if noise_sd is None:
        noise_sd = _default_noise_sd(name, domain, evaluator)
    return TestFunction(name=name, domain=domain, evaluator=evaluator, noise_sd=noise_sd)


def eval_test_function(tf: TestFunction, p, rng: np.random.Generator | None = None) -> float:
    """Evaluate at a native-unit point, adding noise when a generator is given."""
    p = np.asarray(p, dtype=float)
    if p.shape != (tf.domain.dim,):
        raise DomainError(f"expected dimension {tf.domain.dim}, got shape {p.shape}")
    tol = 1e-9 * np.maximum(1.0, np.abs(tf.domain.span))
    if np.any(p < tf.domain.lower - tol) or np.any(p > tf.domain.upper + tol):
        raise DomainError(f"point {p} outside the domain")
    value = float(tf.evaluator(p))
    if rng is not None and tf.noise_sd > 0:
        value += tf.noise_sd * rng.standard_normal()
    return value


def projective_feedback(
    tf: TestFunction,
    q: ProjectiveQuery,
    rng: np.random.Generator | None = None,
) -> OracleAnswer:
    """Minimize the objective along the query segment.

    A 201-point grid scan brackets the minimum, golden-section search
    refines it to 1e-5 in alpha, and a final parabolic step polishes
    smooth minima. Each evaluation draws fresh noise when a generator
    is supplied, modelling an imperfect oracle; without one the search
    is exact.
    """

    def value(alpha: float) -> float:
        p = denormalize_point(tf.domain, embed(alpha, q))
        return eval_test_function(tf, p, rng)

    grid = np.linspace(0.0, 1.0, 201)
    vals = np.array([value(a) for a in grid])
    j = int(np.argmin(vals))
    lo = grid[max(j - 1, 0)]
    hi = grid[min(j + 1, 200)]

    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = value(c), value(d)
    while b - a > 1e-5:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = value(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = value(d)

    # Parabolic polish of the final bracket; exact for quadratic slices.
    x0, x1, x2 = a, 0.5 * (a + b), b
    f0, f1, f2 = value(x0), value(x1), value(x2)
    best = float([x0, x1, x2][int(np.argmin([f0, f1, f2]))])
    d1, d2 = x1 - x0, x1 - x2
    den = d1 * (f1 - f2) - d2 * (f1 - f0)
    if abs(den) > 1e-300:
        cand = x1 - 0.5 * (d1 * d1 * (f1 - f2) - d2 * d2 * (f1 - f0)) / den
        if 0.0 <= cand <= 1.0 and value(cand) <= min(f0, f1, f2):
            best = float(cand)

    alpha_star = min(1.0, max(0.0, best))
    noiseless = eval_test_function(
        tf, denormalize_point(tf.domain, embed(alpha_star, q)), None
    )
    return OracleAnswer(alpha_star=alpha_star, f_at_answer=noiseless)


def global_minimum(name: str):
    """Reference optimum (native location, value) for convergence plots."""
    qdim = _parse_quadratic(name)
    if qdim is not None:
        return _quadratic_center(qdim), 0.0
    if name == "camel2d":
        return np.array([0.0898, -0.7126]), -1.0316
    if name == "hartmann6":
        return _HARTMANN6_ARGMIN.copy(), -3.32237
    if name == "levy10":
        return np.ones(10), 0.0
    if name == "ackley20":
        return np.zeros(20), 0.0
    raise KeyError(f"unknown test function {name!r}")
