"""Numerical kernels with a compiled fast path and a NumPy reference path.

The compiled extension (Cython) is preferred when it imported cleanly; the
NumPy implementation in _ref is the fallback.  Selection happens once at
import time and can be forced through the COMPNULL_KERNELS environment
variable: "compiled" requires the extension (ImportError if missing) and
"numpy" forces the reference path.  BACKEND records the active choice.

Both backends are single-threaded and deterministic: repeated calls on the
same inputs return identical arrays.
"""

from __future__ import annotations

import math
import os

import numpy as np

from . import _ref

_requested = os.environ.get("COMPNULL_KERNELS", "auto").strip().lower()

if _requested in ("auto", ""):
    try:
        from . import _fast as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _ref
        BACKEND = "numpy"
elif _requested == "compiled":
    from . import _fast as _impl

    BACKEND = "compiled"
elif _requested == "numpy":
    _impl = _ref
    BACKEND = "numpy"
else:
    raise ImportError(
        f"COMPNULL_KERNELS must be 'auto', 'compiled', or 'numpy', got {_requested!r}"
    )


def _c_double(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def posterior_stats(z, means, log_weights, null_mask, rho=None, with_resp=False):
    """Row-wise log mixture density, log null-restricted density, responsibilities.

    See _ref.posterior_stats for the full contract.  rho=None selects the
    identity covariance; a float selects the shared 2x2 unit-variance
    covariance with that off-diagonal entry (K must be 2).
    """
    z = _c_double(z)
    means = _c_double(means)
    log_weights = _c_double(log_weights)
    null_u8 = np.ascontiguousarray(null_mask, dtype=np.uint8)
    if z.ndim != 2:
        raise ValueError("z must be a 2-d array")
    if means.ndim != 2 or means.shape[1] != z.shape[1]:
        raise ValueError("means must be (C, K) with K matching z")
    if log_weights.shape != (means.shape[0],) or null_u8.shape != (means.shape[0],):
        raise ValueError("log_weights and null_mask must have one entry per component")
    rho_f = float("nan") if rho is None else float(rho)
    if not math.isnan(rho_f):
        if z.shape[1] != 2:
            raise ValueError("a correlation is only supported for K = 2")
        if not -1.0 < rho_f < 1.0:
            raise ValueError(f"correlation must lie in (-1, 1), got {rho_f}")
    return _impl.posterior_stats(z, means, log_weights, null_u8, rho_f, bool(with_resp))


def audit_pairs(z, lfdrs, tol, witness_limit=100):
    """Count ordered (more extreme, less significant) pairs; see _ref.audit_pairs."""
    z = _c_double(z)
    lfdrs = _c_double(lfdrs)
    if z.ndim != 2 or lfdrs.shape != (z.shape[0],):
        raise ValueError("z must be (J, K) and lfdrs must be (J,)")
    return _impl.audit_pairs(z, lfdrs, float(tol), int(witness_limit))
