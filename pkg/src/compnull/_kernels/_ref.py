"""NumPy reference implementations of the numerical kernels.

These are the fallback used when the compiled extension is unavailable.  Both
backends implement the same contract; see _kernels.__init__ for the public
wrappers and the expected argument layout.
"""

from __future__ import annotations

import math

import numpy as np

_LOG_2PI = math.log(2.0 * math.pi)

# rows per block when materialising (rows, components) intermediates
_BLOCK = 4096


def _log_weighted_densities(z_block, means, log_weights, rho):
    """(R, C) matrix of log(pi_c) + log density of row r under component c."""
    diff = z_block[:, None, :] - means[None, :, :]  # (R, C, K)
    k = z_block.shape[1]
    if math.isnan(rho):
        quad = np.einsum("rck,rck->rc", diff, diff)
        return log_weights[None, :] - 0.5 * quad - 0.5 * k * _LOG_2PI
    # bivariate unit-variance density with off-diagonal correlation rho
    d1 = diff[:, :, 0]
    d2 = diff[:, :, 1]
    om = 1.0 - rho * rho
    quad = (d1 * d1 - 2.0 * rho * d1 * d2 + d2 * d2) / om
    return log_weights[None, :] - 0.5 * quad - _LOG_2PI - 0.5 * math.log(om)


def _logsumexp_rows(t):
    """Row-wise log-sum-exp of a (R, C) matrix, -inf rows preserved."""
    m = np.max(t, axis=1)
    finite = np.isfinite(m)
    shifted = np.where(finite[:, None], t - np.where(finite, m, 0.0)[:, None], -np.inf)
    s = np.sum(np.exp(shifted, where=finite[:, None], out=np.zeros_like(t)), axis=1)
    out = np.where(finite, m + np.log(np.where(finite, s, 1.0)), -np.inf)
    return out


def posterior_stats(z, means, log_weights, null_mask, rho, with_resp):
    """Log-space mixture statistics for every row of z.

    Args:
        z: (J, K) float64, C-contiguous.
        means: (C, K) float64 signed component means.
        log_weights: (C,) float64 log mixing proportions (-inf allowed).
        null_mask: (C,) uint8, 1 for components belonging to the null.
        rho: correlation of the shared 2x2 unit-variance covariance, or NaN
            for the identity covariance.
        with_resp: also return the (J, C) posterior responsibility matrix.

    Returns:
        (log_total, log_null, resp) where log_total[j] is the log mixture
        density of row j, log_null[j] the log of the null-restricted sum, and
        resp is None unless with_resp.
    """
    j_total = z.shape[0]
    c_total = means.shape[0]
    null_cols = null_mask.astype(bool)
    log_total = np.empty(j_total)
    log_null = np.empty(j_total)
    resp = np.empty((j_total, c_total)) if with_resp else None
    for start in range(0, j_total, _BLOCK):
        stop = min(start + _BLOCK, j_total)
        t = _log_weighted_densities(z[start:stop], means, log_weights, rho)
        lt = _logsumexp_rows(t)
        log_total[start:stop] = lt
        if null_cols.any():
            log_null[start:stop] = _logsumexp_rows(t[:, null_cols])
        else:
            log_null[start:stop] = -np.inf
        if with_resp:
            resp[start:stop] = np.exp(t - lt[:, None])
    return log_total, log_null, resp


def audit_pairs(z, lfdrs, tol, witness_limit):
    """Count ordered pairs where dominance and lfdr ordering disagree.

    Row i is incongruous against row j when the two rows agree in sign in
    every dimension, |z_i| >= |z_j| everywhere with strict inequality
    somewhere, and lfdr_i > lfdr_j + tol.

    Returns (count, wit_i, wit_j) with at most witness_limit recorded pairs.
    """
    j_total = z.shape[0]
    signs = np.sign(z)
    mags = np.abs(z)
    count = 0
    wit_i: list[int] = []
    wit_j: list[int] = []
    block = max(1, int(2**22) // max(1, j_total))
    for start in range(0, j_total, block):
        stop = min(start + block, j_total)
        lf_gap = lfdrs[start:stop, None] > lfdrs[None, :] + tol
        same_sign = (signs[start:stop, None, :] == signs[None, :, :]).all(axis=2)
        ge = (mags[start:stop, None, :] >= mags[None, :, :]).all(axis=2)
        strict = (mags[start:stop, None, :] > mags[None, :, :]).any(axis=2)
        bad = lf_gap & same_sign & ge & strict
        count += int(bad.sum())
        if len(wit_i) < witness_limit and bad.any():
            ii, jj = np.nonzero(bad)
            room = witness_limit - len(wit_i)
            wit_i.extend((ii[:room] + start).tolist())
            wit_j.extend(jj[:room].tolist())
    return count, np.array(wit_i, dtype=np.int64), np.array(wit_j, dtype=np.int64)
