"""Gaussian-process preference model fitted from line-optimum feedback.

One observation says: along the segment ``alpha -> alpha * xi + x`` the
oracle's pick beats every other point of the segment. That single answer
stands for infinitely many pairwise comparisons; the likelihood
approximates them with m Monte-Carlo "pseudo-observations"
``beta_1..beta_m`` drawn on the same segment, each contributing one
smoothed-probit comparison term against the winner.

The latent vector ``f`` stacks the utility values at every winner and
pseudo-observation location. Up to constants its log posterior is

    T(f) = -0.5 f' Sigma^-1 f
           - sum_i (1/m_i) sum_j g((f[loser_ij] - f[winner_i]) / sigma)

where ``g(z) = Phi(z / sqrt(2))`` is the convolution of the standard
normal cdf with the standard normal pdf and ``Sigma`` is the squared
exponential kernel matrix of all locations. T is maximized by a damped
Newton iteration run in the whitened parametrization ``f = L u`` (L the
Cholesky factor of Sigma), which avoids forming ``Sigma^-1`` and keeps
the iteration well scaled on ill-conditioned kernels. The posterior is
approximated by the Laplace Gaussian with precision ``Sigma^-1 + Lambda``
at the mode.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import erfc, ndtr

from . import _kernels
from .geometry import (
    FeasibleInterval,
    ProjectionVector,
    ProjectiveQuery,
    _readonly,
    as_unit_point,
)

#: Minimum distance between a pseudo-observation and the answered alpha.
MIN_BETA_GAP = 1e-6

_JITTER_LEVELS = tuple(1e-10 * 10.0**k for k in range(7))  # 1e-10 .. 1e-4

MODEL_SCHEMA = "ppbo.model"
MODEL_SCHEMA_VERSION = 1


class FitError(RuntimeError):
    """MAP search failed to reach the gradient tolerance."""

    def __init__(self, grad_norm: float, iterations: int):
        super().__init__(
            f"MAP search stalled after {iterations} iterations "
            f"(gradient inf-norm {grad_norm:.3e})"
        )
        self.grad_norm = grad_norm
        self.iterations = iterations


class NumericalError(RuntimeError):
    """A factorization failed even after jitter escalation."""


class SchemaError(ValueError):
    """Serialized model/session does not match the expected schema."""


@dataclass(frozen=True)
class Hyperparameters:
    """Kernel and preference-noise hyperparameters.

    ``l`` divides the squared distance in the kernel exponent,
    ``k(p, q) = sigma_f^2 exp(-|p - q|^2 / (2 l))``; it is not a squared
    lengthscale. ``sigma`` scales the comparison noise.
    """

    sigma_f: float = 1.0
    l: float = 0.1
    sigma: float = 0.1

    def __post_init__(self):
        for name in ("sigma_f", "l", "sigma"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be strictly positive, got {v}")

    @classmethod
    def default(cls, dim: int) -> "Hyperparameters":
        """Defaults on the unit cube: amplitude 1, l = 0.05 * dim, sigma 0.1."""
        return cls(sigma_f=1.0, l=0.05 * dim, sigma=0.1)

    def to_dict(self) -> dict:
        return {"sigma_f": self.sigma_f, "l": self.l, "sigma": self.sigma}

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparameters":
        return cls(**d)


@dataclass(frozen=True)
class TgnSchedule:
    """How pseudo-observations concentrate around the answered alpha.

    The first ``n_uniform`` queries use uniform draws over the feasible
    interval; later queries draw from a truncated generalized normal
    centered at the answer, with scale ``max(scale_min, scale0 *
    decay^query_index)`` and exponent ``shape`` (2 = truncated normal).
    """

    n_uniform: int
    scale0: float = 0.3
    scale_min: float = 0.05
    decay: float = 0.9
    shape: float = 2.0

    def __post_init__(self):
        if self.n_uniform < 0:
            raise ValueError("n_uniform must be nonnegative")
        if not 0 < self.scale_min <= self.scale0:
            raise ValueError("need scale0 >= scale_min > 0")
        if not 0 < self.decay < 1:
            raise ValueError("decay must lie in (0, 1)")
        if self.shape < 2:
            raise ValueError("shape must be >= 2")

    @classmethod
    def default(cls, dim: int) -> "TgnSchedule":
        return cls(n_uniform=dim)

    def scale_at(self, query_index: int) -> float:
        return max(self.scale_min, self.scale0 * self.decay**query_index)

    def to_dict(self) -> dict:
        return {
            "n_uniform": self.n_uniform,
            "scale0": self.scale0,
            "scale_min": self.scale_min,
            "decay": self.decay,
            "shape": self.shape,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TgnSchedule":
        return cls(**d)


@dataclass(frozen=True)
class Observation:
    """One answered query plus its frozen pseudo-observation scalars."""

    alpha: float
    query: ProjectiveQuery
    betas: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha = {self.alpha} outside [0, 1]")
        betas = _readonly(self.betas)
        object.__setattr__(self, "betas", betas)
        if betas.ndim != 1 or betas.size < 1:
            raise ValueError("need at least one pseudo-observation")
        if np.any(betas < 0.0) or np.any(betas > 1.0):
            raise ValueError("pseudo-observations must lie in [0, 1]")
        if np.min(np.abs(betas - self.alpha)) < MIN_BETA_GAP:
            raise ValueError(
                f"pseudo-observations must keep a gap of {MIN_BETA_GAP} from alpha"
            )

    @property
    def m(self) -> int:
        return self.betas.size


def kernel_eval(p, q, hyper: Hyperparameters) -> float:
    """Squared exponential kernel between two points."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError(f"kernel arguments must share a shape, got {p.shape} vs {q.shape}")
    d2 = float(np.sum((p - q) ** 2))
    return hyper.sigma_f**2 * float(np.exp(-d2 / (2.0 * hyper.l)))


def kernel_matrix(A, B, hyper: Hyperparameters) -> np.ndarray:
    """Kernel cross-matrix between two stacks of row points."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"point dimensions differ: {A.shape[1]} vs {B.shape[1]}")
    d2 = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.clip(d2, 0.0, None, out=d2)
    return hyper.sigma_f**2 * np.exp(-d2 / (2.0 * hyper.l))


def smoothed_probit(z):
    """The convolution (Phi * phi)(z), evaluated in closed form.

    The convolution of the standard normal cdf with the standard normal
    pdf equals ``Phi(z / sqrt(2))``, computed here through ``erfc`` for
    stability in both tails.
    """
    z = np.asarray(z, dtype=float)
    out = 0.5 * erfc(-0.5 * z)
    return float(out) if out.ndim == 0 else out


def smoothed_probit_quadrature(z, nodes: int = 64):
    """Gauss-Hermite evaluation of the convolution integral.

    Independent slow route used to validate :func:`smoothed_probit`:
    integrates ``Phi(z - t) phi(t) dt`` with ``nodes`` Hermite nodes.
    """
    t, w = np.polynomial.hermite.hermgauss(nodes)
    z = np.asarray(z, dtype=float)
    vals = ndtr(z[..., None] - np.sqrt(2.0) * t)
    out = vals @ w / np.sqrt(np.pi)
    return float(out) if out.ndim == 0 else out


def sample_pseudo_observations(
    alpha: float,
    interval: FeasibleInterval,
    m: int,
    schedule: TgnSchedule,
    query_index: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw m pseudo-observation scalars on the feasible interval.

    Uniform for the first ``schedule.n_uniform`` queries, then a
    truncated generalized normal centered at ``alpha`` (rejection
    sampling against a uniform proposal). Every draw keeps a gap of
    ``MIN_BETA_GAP`` from ``alpha``.
    """
    if m < 1:
        raise ValueError(f"need m >= 1 pseudo-observations, got {m}")
    if not interval.contains(alpha):
        raise ValueError(f"alpha = {alpha} outside {interval}")
    uniform_phase = query_index < schedule.n_uniform
    scale = schedule.scale_at(query_index)
    out = np.empty(m)
    filled = 0
    for _ in range(10_000):
        chunk = max(4 * (m - filled), 16)
        cand = rng.uniform(interval.lo, interval.hi, size=chunk)
        if not uniform_phase:
            density = np.exp(-((np.abs(cand - alpha) / scale) ** schedule.shape))
            cand = cand[rng.uniform(size=chunk) < density]
        cand = cand[np.abs(cand - alpha) >= MIN_BETA_GAP]
        take = min(cand.size, m - filled)
        out[filled : filled + take] = cand[:take]
        filled += take
        if filled == m:
            return _readonly(out)
    raise RuntimeError("pseudo-observation sampling did not terminate")


def make_observation(
    query: ProjectiveQuery,
    alpha: float,
    m: int,
    schedule: TgnSchedule,
    query_index: int,
    rng: np.random.Generator,
) -> Observation:
    """Attach freshly drawn pseudo-observations to an answered query."""
    betas = sample_pseudo_observations(
        alpha, FeasibleInterval(0.0, 1.0), m, schedule, query_index, rng
    )
    return Observation(alpha=float(alpha), query=query, betas=betas)


# ---------------------------------------------------------------------------
# workspace: locations, comparison-term indexing, kernel factorization
# ---------------------------------------------------------------------------


@dataclass
class _Workspace:
    locations: np.ndarray  # (n, D)
    winner_slots: np.ndarray  # (N,) slot of each observation's winner
    term_winner: np.ndarray  # (n_terms,) winner slot per comparison term
    term_loser: np.ndarray  # (n_terms,) loser slot per comparison term
    term_weight: np.ndarray  # (n_terms,) 1/m_i
    sigma: float
    Sigma: np.ndarray
    chol: np.ndarray  # lower factor of Sigma (jitter included in Sigma)
    jitter: float

    @property
    def n(self) -> int:
        return self.locations.shape[0]


def _chol_with_jitter(raw: np.ndarray, scale: float):
    """Cholesky with escalating diagonal jitter; returns (S, L, jitter)."""
    n = raw.shape[0]
    for level in _JITTER_LEVELS:
        S = raw + (level * scale) * np.eye(n)
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            continue
        return S, L, level * scale
    raise NumericalError(
        f"kernel matrix not factorizable even at jitter {_JITTER_LEVELS[-1] * scale:.1e}"
    )


def _build_workspace(dataset, hyper: Hyperparameters) -> _Workspace:
    locations = []
    winner_slots = []
    term_winner = []
    term_loser = []
    term_weight = []
    dim = dataset[0].query.dim
    slot = 0
    for obs in dataset:
        if obs.query.dim != dim:
            raise ValueError("all observations must share the domain dimension")
        xi = obs.query.xi.values
        x = obs.query.x
        locations.append(np.clip(obs.alpha * xi + x, 0.0, 1.0))
        w_slot = slot
        winner_slots.append(w_slot)
        slot += 1
        inv_m = 1.0 / obs.m
        for beta in obs.betas:
            locations.append(np.clip(beta * xi + x, 0.0, 1.0))
            term_winner.append(w_slot)
            term_loser.append(slot)
            term_weight.append(inv_m)
            slot += 1
    loc = np.asarray(locations)
    raw = kernel_matrix(loc, loc, hyper)
    Sigma, L, jitter = _chol_with_jitter(raw, hyper.sigma_f**2)
    return _Workspace(
        locations=loc,
        winner_slots=np.asarray(winner_slots, dtype=np.intp),
        term_winner=np.asarray(term_winner, dtype=np.intp),
        term_loser=np.asarray(term_loser, dtype=np.intp),
        term_weight=np.asarray(term_weight, dtype=float),
        sigma=hyper.sigma,
        Sigma=Sigma,
        chol=L,
        jitter=jitter,
    )


# ---------------------------------------------------------------------------
# the log-posterior functional and its MAP
# ---------------------------------------------------------------------------


def functional_T(dataset, hyper: Hyperparameters, f):
    """Value, gradient and Hessian of the log posterior at ``f``.

    The Hessian is ``-Sigma^-1 - Lambda(f)`` where Lambda is the
    curvature of the comparison penalty. Intended for direct inspection
    and testing; the MAP search uses a whitened formulation instead.
    """
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError("latent vector must be finite")
    ws = _build_workspace(dataset, hyper)
    if f.shape != (ws.n,):
        raise ValueError(f"latent vector must have length {ws.n}, got {f.shape}")
    Sigma_inv = cho_solve((ws.chol, True), np.eye(ws.n))
    Sigma_inv = 0.5 * (Sigma_inv + Sigma_inv.T)
    like_val, like_grad = _kernels.likelihood_terms(
        f, ws.term_winner, ws.term_loser, ws.term_weight, ws.sigma
    )
    lam = _kernels.likelihood_hessian(
        f, ws.term_winner, ws.term_loser, ws.term_weight, ws.sigma
    )
    sif = Sigma_inv @ f
    value = -0.5 * float(f @ sif) - like_val
    grad = -sif - like_grad
    hess = -Sigma_inv - lam
    return value, grad, hess


@dataclass(frozen=True)
class ModelState:
    """A fitted preference model, immutable and safe to share.

    Holds the training dataset, all latent locations with their
    comparison-term index maps, the (jittered) kernel matrix and its
    Cholesky factor, the MAP latent vector, and the likelihood curvature
    at the mode. Derived factorizations used by prediction are cached
    lazily; every cache entry is a pure function of the stored arrays.
    """

    dataset: tuple
    hyper: Hyperparameters
    locations: np.ndarray
    winner_slots: np.ndarray
    term_winner: np.ndarray
    term_loser: np.ndarray
    term_weight: np.ndarray
    Sigma: np.ndarray
    Sigma_chol: np.ndarray
    jitter: float
    f_map: np.ndarray
    Lambda: np.ndarray
    grad_norm: float
    fit_trace: tuple
    dim: int | None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.locations.shape[0]

    @property
    def is_empty(self) -> bool:
        return self.n == 0

    @classmethod
    def empty(cls, hyper: Hyperparameters, dim: int | None = None) -> "ModelState":
        """Prior-only model with zero locations."""
        width = 0 if dim is None else dim
        return cls(
            dataset=(),
            hyper=hyper,
            locations=np.zeros((0, width)),
            winner_slots=np.zeros(0, dtype=np.intp),
            term_winner=np.zeros(0, dtype=np.intp),
            term_loser=np.zeros(0, dtype=np.intp),
            term_weight=np.zeros(0),
            Sigma=np.zeros((0, 0)),
            Sigma_chol=np.zeros((0, 0)),
            jitter=0.0,
            f_map=np.zeros(0),
            Lambda=np.zeros((0, 0)),
            grad_norm=0.0,
            fit_trace=(),
            dim=dim,
        )

    def _weights(self) -> np.ndarray:
        """Representer weights Sigma^-1 f_map (cached)."""
        if "alpha_weights" not in self._cache:
            self._cache["alpha_weights"] = cho_solve((self.Sigma_chol, True), self.f_map)
        return self._cache["alpha_weights"]

    def _lambda_psd_sqrt(self) -> np.ndarray:
        """Symmetric PSD square root of the repaired curvature matrix."""
        if "lambda_sqrt" not in self._cache:
            evals, vecs = np.linalg.eigh(self.Lambda)
            clipped = np.clip(evals, 0.0, None)
            jit = 1e-8 * float(np.sum(clipped)) / max(self.n, 1)
            self._cache["lambda_jitter"] = jit
            self._cache["lambda_psd"] = (vecs * (clipped + jit)) @ vecs.T
            self._cache["lambda_sqrt"] = (vecs * np.sqrt(clipped + jit)) @ vecs.T
        return self._cache["lambda_sqrt"]

    def _lambda_psd(self) -> np.ndarray:
        self._lambda_psd_sqrt()
        return self._cache["lambda_psd"]

    def _posterior_chol(self):
        """Cholesky factor of B = W Sigma W + I with W = sqrt(Lambda_psd).

        ``(Sigma + Lambda_psd^-1)^-1 = W B^-1 W`` holds for any PSD
        Lambda, including singular ones, which is why the predictive
        covariance is evaluated through this form.
        """
        if "posterior_chol" not in self._cache:
            W = self._lambda_psd_sqrt()
            B = W @ self.Sigma @ W + np.eye(self.n)
            self._cache["posterior_chol"] = np.linalg.cholesky(B)
        return self._cache["posterior_chol"]


def fit_map(
    dataset,
    hyper: Hyperparameters,
    schedule: TgnSchedule | None = None,
    seed: int = 0,
    *,
    dim: int | None = None,
    tol: float = 1e-5,
    max_iter: int = 100,
    warm_start: np.ndarray | None = None,
) -> ModelState:
    """Maximize the log posterior and package the Laplace state.

    Damped Newton in the whitened parametrization ``f = L u`` with
    backtracking line search (at most 30 halvings per step) and a
    gradient-ascent fallback; the sequence of objective values is
    non-decreasing. Convergence requires the inf-norm of the gradient
    with respect to ``f`` to drop below ``tol``.

    ``schedule`` and ``seed`` are accepted for provenance; the
    pseudo-observations must already be attached to the dataset.

    Raises :class:`FitError` when the tolerance is not reached within
    ``max_iter`` iterations.
    """
    del schedule, seed  # betas are frozen inside the observations
    dataset = tuple(dataset)
    if not dataset:
        return ModelState.empty(hyper, dim=dim)
    ws = _build_workspace(dataset, hyper)
    L = ws.chol
    n = ws.n

    def penalty(f):
        return _kernels.likelihood_value(
            f, ws.term_winner, ws.term_loser, ws.term_weight, ws.sigma
        )

    def objective(u):
        return -0.5 * float(u @ u) - penalty(L @ u)

    u = np.zeros(n)
    if warm_start is not None and np.any(warm_start):
        if warm_start.shape[0] > n:
            raise ValueError("warm start longer than the latent vector")
        f0 = np.zeros(n)
        f0[: warm_start.shape[0]] = warm_start
        u_ws = solve_triangular(L, f0, lower=True)
        if np.all(np.isfinite(u_ws)) and objective(u_ws) >= objective(u):
            u = u_ws

    value = objective(u)
    trace = [value]
    grad_norm = np.inf
    converged = False

    for _ in range(max_iter):
        f = L @ u
        _, like_grad = _kernels.likelihood_terms(
            f, ws.term_winner, ws.term_loser, ws.term_weight, ws.sigma
        )
        grad_u = -u - L.T @ like_grad
        grad_f = solve_triangular(L, grad_u, lower=True, trans="T")
        grad_norm = float(np.max(np.abs(grad_f))) if n else 0.0
        if grad_norm < tol:
            converged = True
            break

        # Newton direction from (I + L' Lambda L) s = grad_u, with ridge
        # escalation because the comparison penalty is not convex.
        lam_L = _kernels.scaled_rank_products(
            L, ws.term_winner, ws.term_loser, ws.term_weight, f, ws.sigma
        )
        A = L.T @ lam_L
        A = 0.5 * (A + A.T)
        A[np.diag_indices_from(A)] += 1.0
        step = None
        ridge = 0.0
        ridge0 = 1e-8 * (1.0 + float(np.max(np.abs(np.diag(A)))))
        for _ in range(30):
            try:
                cA = np.linalg.cholesky(
                    A if ridge == 0.0 else A + ridge * np.eye(n)
                )
            except np.linalg.LinAlgError:
                ridge = ridge0 if ridge == 0.0 else ridge * 10.0
                continue
            step = cho_solve((cA, True), grad_u)
            break

        accepted = False
        for direction in ([step] if step is not None else []) + [grad_u]:
            t = 1.0
            for _ in range(30):
                u_new = u + t * direction
                val_new = objective(u_new)
                if np.isfinite(val_new) and val_new >= value:
                    accepted = True
                    break
                t *= 0.5
            if accepted:
                break
        if not accepted:
            raise FitError(grad_norm, len(trace))
        u = u_new
        value = val_new
        trace.append(value)

    if not converged:
        raise FitError(grad_norm, len(trace))

    f_map = L @ u
    lam = _kernels.likelihood_hessian(
        f_map, ws.term_winner, ws.term_loser, ws.term_weight, ws.sigma
    )
    return ModelState(
        dataset=dataset,
        hyper=hyper,
        locations=_readonly(ws.locations),
        winner_slots=ws.winner_slots,
        term_winner=ws.term_winner,
        term_loser=ws.term_loser,
        term_weight=ws.term_weight,
        Sigma=ws.Sigma,
        Sigma_chol=ws.chol,
        jitter=ws.jitter,
        f_map=_readonly(f_map),
        Lambda=lam,
        grad_norm=grad_norm,
        fit_trace=tuple(trace),
        dim=ws.locations.shape[1],
    )


def laplace_precision(model: ModelState) -> np.ndarray:
    """Precision matrix Sigma^-1 + Lambda_psd of the Laplace posterior.

    Lambda is repaired to PSD by clipping negative eigenvalues at zero
    (plus a trace-proportional jitter); the result is verified to admit
    a Cholesky factorization, escalating a diagonal jitter if needed.
    """
    if model.is_empty:
        return np.zeros((0, 0))
    Sigma_inv = cho_solve((model.Sigma_chol, True), np.eye(model.n))
    Sigma_inv = 0.5 * (Sigma_inv + Sigma_inv.T)
    H = Sigma_inv + model._lambda_psd()
    H = 0.5 * (H + H.T)
    scale = float(np.mean(np.diag(H)))
    bump = 0.0
    for _ in range(10):
        try:
            np.linalg.cholesky(H if bump == 0.0 else H + bump * np.eye(model.n))
        except np.linalg.LinAlgError:
            bump = 1e-12 * scale if bump == 0.0 else bump * 10.0
            continue
        return H if bump == 0.0 else H + bump * np.eye(model.n)
    raise NumericalError("Laplace precision could not be factorized")


def _as_test_matrix(model: ModelState, tests) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(tests, dtype=float))
    if pts.shape[0] < 1:
        raise ValueError("need at least one test location")
    if not model.is_empty and pts.shape[1] != model.locations.shape[1]:
        raise ValueError(
            f"test dimension {pts.shape[1]} != model dimension {model.locations.shape[1]}"
        )
    return pts


def predict_mean(model: ModelState, tests) -> np.ndarray:
    """Posterior predictive mean at the test locations."""
    pts = _as_test_matrix(model, tests)
    if model.is_empty:
        return np.zeros(pts.shape[0])
    K = kernel_matrix(model.locations, pts, model.hyper)
    return K.T @ model._weights()


def predict(model: ModelState, tests):
    """Posterior predictive mean and covariance at the test locations.

    The covariance is ``Sigma' - K' (Sigma + Lambda_psd^-1)^-1 K``
    evaluated through the square-root form that tolerates singular
    curvature; its diagonal is clamped at zero.
    """
    pts = _as_test_matrix(model, tests)
    prior = kernel_matrix(pts, pts, model.hyper)
    if model.is_empty:
        return np.zeros(pts.shape[0]), prior
    K = kernel_matrix(model.locations, pts, model.hyper)
    mu = K.T @ model._weights()
    W = model._lambda_psd_sqrt()
    Bc = model._posterior_chol()
    T1 = W @ K
    cov = prior - T1.T @ cho_solve((Bc, True), T1)
    cov = 0.5 * (cov + cov.T)
    d = np.diag(cov).copy()
    np.clip(d, 0.0, None, out=d)
    cov[np.diag_indices_from(cov)] = d
    return mu, cov


def posterior_mean_argmax(
    model: ModelState,
    restarts: int = 20,
    rng: np.random.Generator | None = None,
):
    """Maximize the predictive mean over the unit cube.

    Candidate starts are every training location plus ``restarts``
    uniform points; the best-scoring candidates are refined by a cyclic
    per-coordinate grid search. Deterministic for a given generator
    state. An empty model returns the cube center at mean zero.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if model.is_empty:
        if model.dim is None:
            raise ValueError("empty model has unknown dimension; pass dim at creation")
        return _readonly(np.full(model.dim, 0.5)), 0.0
    dim = model.locations.shape[1]
    starts = np.vstack([model.locations, rng.uniform(size=(restarts, dim))])
    mu = predict_mean(model, starts)
    order = np.argsort(mu)[::-1]
    best_x = starts[order[0]].copy()
    best_val = float(mu[order[0]])
    for idx in order[: min(10, order.size)]:
        y, v = _coordinate_refine(model, starts[idx].copy())
        if v > best_val:
            best_x, best_val = y, v
    mu_star = float(predict_mean(model, best_x[None, :])[0])
    return as_unit_point(best_x), mu_star


def _coordinate_refine(model: ModelState, y: np.ndarray, sweeps: int = 3):
    """Cyclic coordinate ascent of the predictive mean with nested grids."""
    dim = y.size
    val = float(predict_mean(model, y[None, :])[0])
    for _ in range(sweeps):
        improved = 0.0
        for d in range(dim):
            lo, hi = 0.0, 1.0
            for _ in range(3):
                grid = np.linspace(lo, hi, 33)
                pts = np.tile(y, (33, 1))
                pts[:, d] = grid
                vals = predict_mean(model, pts)
                j = int(np.argmax(vals))
                width = (hi - lo) / 32.0
                lo = max(0.0, grid[j] - width)
                hi = min(1.0, grid[j] + width)
                if vals[j] > val:
                    improved += vals[j] - val
                    val = float(vals[j])
                    y[d] = grid[j]
        if improved < 1e-10:
            break
    return y, val


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def model_to_dict(model: ModelState) -> dict:
    """Versioned JSON-ready document reproducing predictions exactly."""
    return {
        "schema": MODEL_SCHEMA,
        "version": MODEL_SCHEMA_VERSION,
        "hyper": model.hyper.to_dict(),
        "dim": model.dim,
        "observations": [
            {
                "alpha": obs.alpha,
                "xi": obs.query.xi.values.tolist(),
                "x": obs.query.x.tolist(),
                "betas": obs.betas.tolist(),
            }
            for obs in model.dataset
        ],
        "f_map": model.f_map.tolist(),
    }


def model_from_dict(doc: dict) -> ModelState:
    """Rebuild a model from :func:`model_to_dict` output.

    The kernel matrix and every derived factorization are recomputed
    from the stored floats, so predictions match the saved model bit
    for bit in the same environment. No re-optimization happens.
    """
    if doc.get("schema") != MODEL_SCHEMA:
        raise SchemaError(f"not a model document: schema {doc.get('schema')!r}")
    if doc.get("version") != MODEL_SCHEMA_VERSION:
        raise SchemaError(
            f"model schema version {doc.get('version')!r} is not supported "
            f"(expected {MODEL_SCHEMA_VERSION}); no migration is available"
        )
    hyper = Hyperparameters.from_dict(doc["hyper"])
    dataset = tuple(
        Observation(
            alpha=rec["alpha"],
            query=ProjectiveQuery(
                ProjectionVector(np.asarray(rec["xi"], float)),
                np.asarray(rec["x"], float),
            ),
            betas=np.asarray(rec["betas"], float),
        )
        for rec in doc["observations"]
    )
    if not dataset:
        return ModelState.empty(hyper, dim=doc.get("dim"))
    ws = _build_workspace(dataset, hyper)
    f_map = np.asarray(doc["f_map"], dtype=float)
    if f_map.shape != (ws.n,):
        raise SchemaError("stored latent vector does not match the observations")
    _, like_grad = _kernels.likelihood_terms(
        f_map, ws.term_winner, ws.term_loser, ws.term_weight, ws.sigma
    )
    grad_u = -solve_triangular(ws.chol, f_map, lower=True) - ws.chol.T @ like_grad
    grad_f = solve_triangular(ws.chol, grad_u, lower=True, trans="T")
    lam = _kernels.likelihood_hessian(
        f_map, ws.term_winner, ws.term_loser, ws.term_weight, ws.sigma
    )
    return ModelState(
        dataset=dataset,
        hyper=hyper,
        locations=_readonly(ws.locations),
        winner_slots=ws.winner_slots,
        term_winner=ws.term_winner,
        term_loser=ws.term_loser,
        term_weight=ws.term_weight,
        Sigma=ws.Sigma,
        Sigma_chol=ws.chol,
        jitter=ws.jitter,
        f_map=_readonly(f_map),
        Lambda=lam,
        grad_norm=float(np.max(np.abs(grad_f))),
        fit_trace=(),
        dim=ws.locations.shape[1],
    )


def save_model(model: ModelState, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path) -> ModelState:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"model file is not valid JSON: {exc}") from exc
    return model_from_dict(doc)
