"""Decision rules and diagnostics built on local false discovery rates.

Rejection controls the false discovery rate by growing the rejection set
while the running mean of the smallest lfdrs stays at or below the target.
The audit searches for logically inconsistent output: a set more extreme
than another in every dimension (same signs, weakly larger magnitudes,
strictly larger somewhere) should never receive a larger lfdr.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import ZMatrix

# lfdr gap below which an ordering violation is attributed to rounding
AUDIT_TOL = 1e-12

# exact pairwise scan cap; larger inputs are subsampled to this many rows
AUDIT_MAX_ROWS = 20_000


@dataclass(frozen=True)
class RejectionResult:
    """Outcome of reject().

    threshold_rank is the largest r whose r smallest lfdrs average at or
    below q (0 when even the smallest lfdr is too large); threshold_value is
    the lfdr at that rank (NaN when the rank is 0).  rejected marks every row
    with lfdr <= threshold_value, so ties at the threshold are all rejected.
    """

    q: float
    threshold_rank: int
    threshold_value: float
    rejected: np.ndarray

    @property
    def n_rejected(self) -> int:
        return int(self.rejected.sum())


@dataclass(frozen=True)
class AuditReport:
    """Outcome of incongruence_audit().

    incongruous_count counts ordered pairs (i, j) among the scanned rows
    where row i dominates row j dimension-wise yet has the larger lfdr.
    witness_pairs holds up to witness_limit tuples
    (row_i, row_j, lfdr_i, lfdr_j) using indices into the original input.
    When the input exceeded the scan cap, subsampled is True and
    scanned_rows records how many rows the seeded subsample kept.
    """

    incongruous_count: int
    witness_pairs: tuple[tuple[int, int, float, float], ...]
    subsampled: bool
    scanned_rows: int
    seed: int


@dataclass(frozen=True)
class EvalMetrics:
    """False discovery proportion and power of one rejection set."""

    fdp: float
    power: float
    n_rejected: int
    n_true: int


def reject(lfdrs, q: float) -> RejectionResult:
    """Reject the largest prefix of sorted lfdrs whose mean stays at or below q.

    Raises ValueError unless 0 < q < 1, lfdrs is non-empty, and every lfdr
    lies in [0, 1].
    """
    lf = np.asarray(lfdrs, dtype=np.float64).reshape(-1)
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie strictly between 0 and 1, got {q}")
    if lf.size == 0:
        raise ValueError("cannot apply a rejection rule to an empty lfdr vector")
    if not np.isfinite(lf).all() or (lf < 0).any() or (lf > 1).any():
        raise ValueError("lfdrs must be finite values in [0, 1]")
    order = np.sort(lf)
    running_mean = np.cumsum(order) / np.arange(1, lf.size + 1)
    ok = np.flatnonzero(running_mean <= q)
    if ok.size == 0:
        return RejectionResult(
            q=float(q),
            threshold_rank=0,
            threshold_value=math.nan,
            rejected=np.zeros(lf.size, dtype=bool),
        )
    rank = int(ok[-1]) + 1
    threshold = float(order[rank - 1])
    return RejectionResult(
        q=float(q),
        threshold_rank=rank,
        threshold_value=threshold,
        rejected=lf <= threshold,
    )


def incongruence_audit(
    z,
    lfdrs,
    seed: int = 0,
    max_rows: int = AUDIT_MAX_ROWS,
    witness_limit: int = 100,
) -> AuditReport:
    """Scan for pairs where dominance and lfdr ordering disagree.

    Up to max_rows rows are scanned exactly (all ordered pairs); larger
    inputs are reduced to a seeded uniform subsample first, which the report
    flags.  An lfdr gap of AUDIT_TOL or less never counts as a violation.
    """
    zarr = z.z if isinstance(z, ZMatrix) else np.ascontiguousarray(z, dtype=np.float64)
    lf = np.asarray(lfdrs, dtype=np.float64).reshape(-1)
    if zarr.ndim != 2 or lf.shape != (zarr.shape[0],):
        raise ValueError("z must be (J, K) with one lfdr per row")
    j_total = zarr.shape[0]
    if max_rows < 2:
        raise ValueError("max_rows must be at least 2")
    if j_total > max_rows:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(j_total, size=max_rows, replace=False))
        sub_z = np.ascontiguousarray(zarr[keep])
        sub_lf = lf[keep]
        subsampled = True
    else:
        keep = np.arange(j_total)
        sub_z = zarr
        sub_lf = lf
        subsampled = False
    count, wit_i, wit_j = _kernels.audit_pairs(sub_z, sub_lf, AUDIT_TOL, witness_limit)
    witnesses = tuple(
        (int(keep[i]), int(keep[j]), float(lf[keep[i]]), float(lf[keep[j]]))
        for i, j in zip(wit_i, wit_j)
    )
    return AuditReport(
        incongruous_count=int(count),
        witness_pairs=witnesses,
        subsampled=subsampled,
        scanned_rows=int(len(keep)),
        seed=int(seed),
    )


def fdp_power(rejected, truth) -> EvalMetrics:
    """False discovery proportion and power against known labels.

    fdp = false rejections / max(rejections, 1); power = true rejections /
    max(true alternatives, 1).  Both arguments are boolean arrays of equal
    length.
    """
    rej = np.asarray(rejected, dtype=bool).reshape(-1)
    alt = np.asarray(truth, dtype=bool).reshape(-1)
    if rej.shape != alt.shape:
        raise ValueError("rejected and truth must have the same length")
    n_rej = int(rej.sum())
    n_true = int(alt.sum())
    fp = int((rej & ~alt).sum())
    tp = int((rej & alt).sum())
    return EvalMetrics(
        fdp=fp / max(n_rej, 1),
        power=tp / max(n_true, 1),
        n_rejected=n_rej,
        n_true=n_true,
    )
