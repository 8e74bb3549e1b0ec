"""Independent reference implementations used to check the package.

Everything here is written from first principles with scipy/numpy and
deliberately avoids the package's own enumeration, kernels, and linear
algebra, so agreement between the two is meaningful evidence rather than
a tautology.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm


def _cell_index(signs) -> int:
    """Bit pattern of the non-zero dimensions, first dimension most significant."""
    b = 0
    for s in signs:
        b = (b << 1) | (1 if s != 0 else 0)
    return b


def _is_alternative(signs, variant: str) -> bool:
    if variant == "replication":
        return all(s != 0 for s in signs) and len(set(signs)) == 1
    return all(s != 0 for s in signs)


def lfdr_by_enumeration(z, mu, pi, variant="base", rho=None):
    """lfdr via an explicit loop over every sign vector in {0,-1,1}^K.

    Parameters
    ----------
    z : (J, K) array of observed statistics.
    mu : list indexed by cell bit-pattern; entry b is an (M_b, K) array of
        non-negative magnitudes (zeros on dimensions outside the pattern).
    pi : list indexed by cell bit-pattern; entry b is an (M_b,) array of
        per-sign-configuration weights.
    variant : "base", "correlated", or "replication".
    rho : common off-diagonal correlation (correlated variant only).
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    k = z.shape[1]
    if rho is not None:
        cov = np.array([[1.0, rho], [rho, 1.0]])
        inv = np.linalg.inv(cov)
        logdet = math.log(np.linalg.det(cov))
    out = np.empty(z.shape[0])
    for j, row in enumerate(z):
        total = 0.0
        null = 0.0
        for signs in itertools.product((0, -1, 1), repeat=k):
            b = _cell_index(signs)
            for m in range(len(pi[b])):
                mean = np.array(signs, dtype=float) * np.asarray(mu[b][m])
                if rho is None:
                    dens = float(np.prod(norm.pdf(row, loc=mean)))
                else:
                    d = row - mean
                    quad = d @ inv @ d
                    dens = math.exp(-k / 2.0 * math.log(2 * math.pi)
                                    - 0.5 * logdet - 0.5 * quad)
                w = float(pi[b][m]) * dens
                total += w
                if not _is_alternative(signs, variant):
                    null += w
        out[j] = null / total
    return out


def responsibilities_by_enumeration(z, mu, pi, variant="base", rho=None):
    """Posterior component weights and log-likelihood by direct summation.

    Components are ordered configuration-major (sign vectors in the order
    produced by itertools.product over (0, -1, 1) per dimension) and
    class-minor, matching a plain nested loop.  Returns (resp, loglik).
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    k = z.shape[1]
    if rho is not None:
        cov = np.array([[1.0, rho], [rho, 1.0]])
        inv = np.linalg.inv(cov)
        logdet = math.log(np.linalg.det(cov))
    cols = []
    for signs in itertools.product((0, -1, 1), repeat=k):
        b = _cell_index(signs)
        for m in range(len(pi[b])):
            mean = np.array(signs, dtype=float) * np.asarray(mu[b][m])
            if rho is None:
                dens = np.prod(norm.pdf(z, loc=mean), axis=1)
            else:
                d = z - mean
                quad = np.einsum("ji,ik,jk->j", d, inv, d)
                dens = np.exp(-k / 2.0 * math.log(2 * math.pi)
                              - 0.5 * logdet - 0.5 * quad)
            cols.append(float(pi[b][m]) * dens)
    weighted = np.column_stack(cols)
    totals = weighted.sum(axis=1)
    resp = weighted / totals[:, None]
    return resp, float(np.sum(np.log(totals)))


def enumeration_sign_order(k):
    """The sign-vector order used by the oracles above."""
    return list(itertools.product((0, -1, 1), repeat=k))


def random_valid_params(rng, k, m_counts=None, separate=1.5):
    """Draw a random parameter set satisfying all model constraints.

    Magnitudes are positive with the all-nonzero cell projected to dominate
    every other cell per dimension and class; weights are positive and sum
    to one after per-configuration division.  Returns (mu, pi) as nested
    lists indexed by cell bit-pattern.
    """
    if m_counts is None:
        m_counts = [1] + [int(rng.integers(1, 3)) for _ in range(2 ** k - 1)]
    full = 2 ** k - 1
    mu = []
    for b in range(2 ** k):
        rows = np.zeros((m_counts[b], k))
        for dim in range(k):
            if (b >> (k - 1 - dim)) & 1:
                rows[:, dim] = separate + 4.0 * rng.random(m_counts[b])
        mu.append(rows)
    # force the all-nonzero cell to dominate every cell in every dimension
    ceiling = np.zeros(k)
    for b in range(2 ** k - 1):
        if m_counts[b]:
            ceiling = np.maximum(ceiling, mu[b].max(axis=0))
    mu[full] = np.maximum(mu[full], ceiling[None, :])
    # positive weights on the n_b-weighted simplex
    n_b = [2 ** bin(b).count("1") for b in range(2 ** k)]
    raw = [0.5 + rng.random(m_counts[b]) for b in range(2 ** k)]
    raw[0] = raw[0] * 20.0  # keep most mass on the all-zero cell
    total = sum(n * float(r.sum()) for n, r in zip(n_b, raw))
    pi = [r / total for r in raw]
    return mu, pi


def linear_wald_z(y, x):
    """Wald z for the slope of a one-covariate linear model (MLE variance)."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    n = y.size
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    beta = float(xc @ yc) / sxx
    resid = yc - beta * xc
    sigma2 = float(resid @ resid) / n
    return beta / math.sqrt(sigma2 / sxx)


def _logistic_nll(coef, design, y):
    eta = design @ coef
    # log(1 + exp(eta)) - y*eta, computed stably
    return float(np.sum(np.logaddexp(0.0, eta) - y * eta))


def logistic_lr_signed_z(y, x, covariates=None):
    """Signed root of the likelihood-ratio statistic for the coefficient on x.

    Fits the full and reduced logistic models by direct minimization of the
    negative log-likelihood, independent of any IRLS code under test.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    base = [np.ones(n)]
    if covariates is not None:
        cov = np.atleast_2d(np.asarray(covariates, dtype=float))
        if cov.shape[0] != n:
            cov = cov.T
        base.extend(cov[:, i] for i in range(cov.shape[1]))
    reduced = np.column_stack(base)
    full = np.column_stack(base + [np.asarray(x, dtype=float)])

    r0 = minimize(_logistic_nll, np.zeros(reduced.shape[1]),
                  args=(reduced, y), method="BFGS",
                  options={"gtol": 1e-10, "maxiter": 500})
    r1 = minimize(_logistic_nll, np.zeros(full.shape[1]),
                  args=(full, y), method="BFGS",
                  options={"gtol": 1e-10, "maxiter": 500})
    lr = max(0.0, 2.0 * (r0.fun - r1.fun))
    return math.copysign(math.sqrt(lr), r1.x[-1])
