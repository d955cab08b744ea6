"""Numpy implementation of the likelihood hot loops.

The comparison terms of the preference likelihood couple exactly two
latent entries each: one winner slot and one pseudo-observation slot.
These functions accumulate the weighted sum of smoothed-probit terms,
its gradient, and its (sparse-structured but densely stored) Hessian.
"""

import numpy as np
from scipy.special import erfc

_INV_2SQRTPI = 1.0 / (2.0 * np.sqrt(np.pi))


def likelihood_terms(f, winner, loser, weight, sigma):
    """Weighted smoothed-probit penalty and its gradient.

    value = sum_t weight[t] * g((f[loser[t]] - f[winner[t]]) / sigma)
    with g(z) = Phi(z / sqrt(2)).

    Returns ``(value, grad)`` where ``grad`` has the length of ``f``.
    """
    f = np.asarray(f, dtype=float)
    delta = (f[loser] - f[winner]) / sigma
    value = float(np.dot(weight, 0.5 * erfc(-0.5 * delta)))
    d1 = weight * (np.exp(-0.25 * delta * delta) * (_INV_2SQRTPI / sigma))
    n = f.size
    grad = np.bincount(loser, weights=d1, minlength=n)
    grad -= np.bincount(winner, weights=d1, minlength=n)
    return value, grad


def likelihood_value(f, winner, loser, weight, sigma):
    """Just the weighted smoothed-probit penalty (line-search fast path)."""
    f = np.asarray(f, dtype=float)
    delta = (f[loser] - f[winner]) / sigma
    return float(np.dot(weight, 0.5 * erfc(-0.5 * delta)))


def likelihood_hessian(f, winner, loser, weight, sigma):
    """Dense Hessian of the weighted smoothed-probit penalty.

    Each term contributes ``h = w * g''(delta) / sigma^2`` to the
    (loser, loser) and (winner, winner) entries and ``-h`` to the two
    cross entries. Loser slots are unique across terms; winner slots
    repeat within an observation.
    """
    f = np.asarray(f, dtype=float)
    n = f.size
    delta = (f[loser] - f[winner]) / sigma
    d1 = np.exp(-0.25 * delta * delta) * _INV_2SQRTPI
    h = weight * (-0.5 * delta * d1) / (sigma * sigma)
    lam = np.zeros((n, n))
    lam[winner, loser] = -h
    lam[loser, winner] = -h
    diag = np.bincount(loser, weights=h, minlength=n)
    diag += np.bincount(winner, weights=h, minlength=n)
    idx = np.arange(n)
    lam[idx, idx] = diag
    return lam


def scaled_rank_products(mat, winner, loser, weight, f, sigma):
    """Accumulate ``B = Lambda(f) @ mat`` without forming Lambda.

    Lambda is a sum of rank-one terms h_t (e_l - e_w)(e_l - e_w)^T, so
    each term adds ``+/- h_t * (mat[l] - mat[w])`` to rows l and w of
    the product.
    """
    f = np.asarray(f, dtype=float)
    delta = (f[loser] - f[winner]) / sigma
    d1 = np.exp(-0.25 * delta * delta) * _INV_2SQRTPI
    h = weight * (-0.5 * delta * d1) / (sigma * sigma)
    rows = mat[loser] - mat[winner]
    rows = rows * h[:, None]
    out = np.zeros_like(mat)
    np.add.at(out, loser, rows)
    np.subtract.at(out, winner, rows)
    return out
