"""Parameter estimation for the sign-symmetric mixture model.

Fitting maximises the composite likelihood that treats every set of
z-statistics as an independent draw from the mixture.  The E-step computes
per-set posterior responsibilities over (configuration, magnitude-class)
pairs in log space; the M-step has closed forms for both the identity and
the shared-correlation covariance.  Magnitudes are kept positive by a small
floor and the all-non-zero pattern is kept dimension-wise dominant by a
projection applied after each update.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .configs import ConfigSet
from .model import (
    MU_FLOOR,
    ComponentTable,
    ModelParams,
    ModelSpec,
    ZMatrix,
    component_table,
    validate_params,
)

# a (pattern, class) cell with less responsibility mass than this keeps its
# previous magnitudes; its proportion still comes from the update formula
EMPTY_MASS = 1e-12


@dataclass(frozen=True)
class FitOptions:
    """Knobs for em_fit.

    Attributes:
        max_iterations: hard cap on EM iterations.
        tolerance: stop when |loglik - previous| / (|previous| + 1) drops
            below this.
        seed: seed for the (deterministic) initialisation.
        init: explicit starting parameters; None selects the built-in scheme.
        enforce_ordering: project the all-non-zero magnitudes up to dominate
            every other pattern after each M-step.
    """

    max_iterations: int = 10000
    tolerance: float = 1e-8
    seed: int = 0
    init: ModelParams | None = None
    enforce_ordering: bool = True


@dataclass(frozen=True)
class FitResult:
    """Outcome of em_fit.

    loglik_trace[i] is the composite log-likelihood of the parameters at the
    start of iteration i; projection_trace[i] says whether the M-step of
    iteration i moved any magnitude to restore the ordering constraint.
    empty_components lists (pattern, class) cells that were ever starved of
    responsibility mass.
    """

    params: ModelParams
    spec: ModelSpec
    loglik_trace: np.ndarray
    converged: bool
    iterations: int
    projection_applied: bool
    projection_trace: np.ndarray
    empty_components: tuple[tuple[int, int], ...]


def _as_z_array(z) -> np.ndarray:
    if isinstance(z, ZMatrix):
        return z.z
    arr = np.ascontiguousarray(z, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("z must be a 2-d array or ZMatrix")
    return arr


def e_step(z, spec: ModelSpec, params: ModelParams, configs: ConfigSet | None = None):
    """Posterior responsibilities and the composite log-likelihood.

    Returns (resp, loglik): resp is (J, C) with rows summing to 1, columns
    ordered configuration-major and magnitude-class-minor (the order of
    model.component_table); loglik is the sum over rows of the log mixture
    density.  Raises ValueError if the log-likelihood is not finite.
    """
    zarr = _as_z_array(z)
    if configs is None:
        configs = spec.config_set
    table = component_table(spec, params, configs)
    log_total, _, resp = _kernels.posterior_stats(
        zarr, table.means, table.log_weights, table.null_mask, rho=table.rho, with_resp=True
    )
    loglik = float(np.sum(log_total))
    if not np.isfinite(loglik):
        raise ValueError("composite log-likelihood is not finite")
    return resp, loglik


def _apply_ordering(mu: list[np.ndarray], k: int) -> bool:
    """Raise the all-non-zero magnitudes to dominate every other pattern."""
    full = len(mu) - 1
    changed = False
    for dim in range(k):
        cap = 0.0
        for b in range(1, full):
            if (b >> (k - 1 - dim)) & 1:
                cap = max(cap, float(mu[b][:, dim].max()))
        if cap > 0.0 and (mu[full][:, dim] < cap).any():
            mu[full][:, dim] = np.maximum(mu[full][:, dim], cap)
            changed = True
    return changed


def _m_step_details(
    zarr: np.ndarray,
    resp: np.ndarray,
    spec: ModelSpec,
    configs: ConfigSet,
    enforce_ordering: bool,
    prev: ModelParams | None,
):
    """Closed-form M-step; returns (params, projection_applied, empty_cells)."""
    j_total = zarr.shape[0]
    k = spec.k
    table = component_table(spec, prev, configs) if prev is not None else None
    # component bookkeeping is cheap to rebuild; what matters is the layout
    if table is None:
        raise ValueError("the M-step needs the previous parameters for starved cells")
    mass = resp.sum(axis=0)  # (C,)
    moments = resp.T @ zarr  # (C, K) sums of r * z
    signs = configs.sign_matrix.astype(np.float64)
    n_per_rep = configs.n_per_rep
    rho = spec.rho

    new_mu = [m.copy() for m in prev.mu]
    new_pi = [p.copy() for p in prev.pi]
    empty: list[tuple[int, int]] = []
    for b in range(2**k):
        for m in range(spec.m_counts[b]):
            cols = np.flatnonzero((table.rep == b) & (table.m_index == m))
            cell_mass = float(mass[cols].sum())
            new_pi[b][m] = cell_mass / (j_total * n_per_rep[b])
            if b == 0:
                continue
            if cell_mass < EMPTY_MASS:
                empty.append((b, m))
                continue
            h = signs[table.config_index[cols]]  # (n_b, K)
            t = moments[cols]  # (n_b, K)
            r = mass[cols]  # (n_b,)
            if rho is None:
                for dim in range(k):
                    if (b >> (k - 1 - dim)) & 1:
                        num = float((h[:, dim] * t[:, dim]).sum())
                        new_mu[b][m, dim] = max(num / cell_mass, MU_FLOOR)
            else:
                # shared 2x2 covariance: fold the cross-dimension term into
                # the estimating equations (the common 1/(1-rho^2) cancels)
                g1 = float((h[:, 0] * (t[:, 0] - rho * t[:, 1])).sum())
                g2 = float((h[:, 1] * (t[:, 1] - rho * t[:, 0])).sum())
                if b == 1:
                    new_mu[b][m, 1] = max(g2 / cell_mass, MU_FLOOR)
                elif b == 2:
                    new_mu[b][m, 0] = max(g1 / cell_mass, MU_FLOOR)
                else:
                    a = cell_mass
                    c = -rho * float((r * h[:, 0] * h[:, 1]).sum())
                    det = a * a - c * c
                    new_mu[b][m, 0] = max((a * g1 - c * g2) / det, MU_FLOOR)
                    new_mu[b][m, 1] = max((a * g2 - c * g1) / det, MU_FLOOR)
    projected = _apply_ordering(new_mu, k) if enforce_ordering else False
    params = ModelParams(mu=tuple(new_mu), pi=tuple(new_pi))
    return params, projected, empty


def m_step(
    z,
    responsibilities: np.ndarray,
    spec: ModelSpec,
    configs: ConfigSet | None = None,
    enforce_ordering: bool = True,
    prev_params: ModelParams | None = None,
) -> ModelParams:
    """One closed-form M-step from posterior responsibilities.

    prev_params supplies magnitudes for starved cells (and the layout); when
    omitted, starved cells are impossible to fill and raise.
    """
    zarr = _as_z_array(z)
    if configs is None:
        configs = spec.config_set
    resp = np.asarray(responsibilities, dtype=np.float64)
    if resp.shape != (zarr.shape[0], spec.n_components):
        raise ValueError(
            f"responsibilities must be (J, {spec.n_components}), got {resp.shape}"
        )
    if prev_params is None:
        prev_params = _blank_params(spec)
    params, _, _ = _m_step_details(zarr, resp, spec, configs, enforce_ordering, prev_params)
    return params


def _blank_params(spec: ModelSpec) -> ModelParams:
    """Layout-only parameters: floor magnitudes on effect dimensions, zero weights."""
    k = spec.k
    mu = []
    pi = []
    for b in range(2**k):
        m_b = spec.m_counts[b]
        row = np.zeros((m_b, k))
        for dim in range(k):
            if (b >> (k - 1 - dim)) & 1:
                row[:, dim] = MU_FLOOR
        mu.append(row)
        pi.append(np.zeros(m_b))
    return ModelParams(mu=tuple(mu), pi=tuple(pi))


def initialize_params(z, spec: ModelSpec, seed: int = 0) -> ModelParams:
    """Deterministic starting point for em_fit.

    Proportions put 0.90 on the all-zero pattern and split the remaining
    0.10 equally across every other (pattern, class) cell, then divide each
    cell's share across its sign configurations.  Magnitudes come from
    empirical quantiles of |z| per dimension, one level per class placed at
    the upper ends of an even subdivision of [0.85, 0.999] (a single-class
    cell starts at the 0.999 quantile), floored at 1.0 and projected to
    satisfy the ordering constraint.  Starting rare cells high keeps them
    anchored on genuinely large |z| rows instead of collapsing onto the
    bulk, which matters when a cell's expected row count is tiny.  The seed
    is accepted for interface stability; the scheme is deterministic.
    """
    del seed
    zarr = _as_z_array(z)
    if zarr.shape[1] != spec.k:
        raise ValueError(f"z has {zarr.shape[1]} dimensions but the model expects {spec.k}")
    k = spec.k
    absz = np.abs(zarr)
    n_per_rep = spec.config_set.n_per_rep
    cells = sum(spec.m_counts[b] for b in range(1, 2**k))
    per_cell = 0.10 / cells
    mu = []
    pi = []
    for b in range(2**k):
        m_b = spec.m_counts[b]
        if b == 0:
            mu.append(np.zeros((1, k)))
            pi.append(np.array([0.90]))
            continue
        levels = np.linspace(0.85, 0.999, m_b + 1)[1:]
        rows = np.zeros((m_b, k))
        for dim in range(k):
            if (b >> (k - 1 - dim)) & 1:
                rows[:, dim] = np.maximum(np.quantile(absz[:, dim], levels), 1.0)
        mu.append(rows)
        pi.append(np.full(m_b, per_cell / n_per_rep[b]))
    _apply_ordering(mu, k)
    return ModelParams(mu=tuple(mu), pi=tuple(pi))


def em_fit(z, spec: ModelSpec, options: FitOptions | None = None) -> FitResult:
    """Fit the mixture by EM on the composite likelihood.

    Runs until the relative log-likelihood change drops below the tolerance
    or max_iterations is hit.  The returned parameters always satisfy
    validate_params; ascent can be broken only on iterations where the
    ordering projection moved a magnitude (projection_trace records those).

    Raises ValueError when z has fewer rows than the model has components,
    when the initial parameters are invalid, or when the log-likelihood
    becomes non-finite.
    """
    opts = options or FitOptions()
    zarr = _as_z_array(z)
    configs = spec.config_set
    if zarr.shape[1] != spec.k:
        raise ValueError(f"z has {zarr.shape[1]} dimensions but the model expects {spec.k}")
    if zarr.shape[0] < spec.n_components:
        raise ValueError(
            f"need at least {spec.n_components} rows to fit {spec.n_components} components, "
            f"got {zarr.shape[0]}"
        )
    if opts.max_iterations < 1:
        raise ValueError("max_iterations must be at least 1")
    params = opts.init if opts.init is not None else initialize_params(zarr, spec, opts.seed)
    problems = validate_params(spec, params)
    if problems:
        raise ValueError("invalid starting parameters: " + "; ".join(problems))

    trace: list[float] = []
    proj_trace: list[bool] = []
    empty_seen: set[tuple[int, int]] = set()
    prev_ll: float | None = None
    converged = False
    for _ in range(opts.max_iterations):
        resp, ll = e_step(zarr, spec, params, configs)
        trace.append(ll)
        if prev_ll is not None and abs(ll - prev_ll) / (abs(prev_ll) + 1.0) < opts.tolerance:
            converged = True
            break
        params, projected, empty = _m_step_details(
            zarr, resp, spec, configs, opts.enforce_ordering, params
        )
        proj_trace.append(projected)
        empty_seen.update(empty)
        prev_ll = ll

    problems = validate_params(spec, params)
    if problems:
        raise RuntimeError("EM produced invalid parameters: " + "; ".join(problems))
    return FitResult(
        params=params,
        spec=spec,
        loglik_trace=np.asarray(trace),
        converged=converged,
        iterations=len(trace),
        projection_applied=any(proj_trace),
        projection_trace=np.asarray(proj_trace, dtype=bool),
        empty_components=tuple(sorted(empty_seen)),
    )


def estimate_correlation(z, truncation: float | None = None) -> float:
    """Sample correlation of a two-dimensional z-matrix.

    With a truncation bound, rows where either |z| exceeds the bound are
    dropped first (the bulk of rows is null, so trimming extreme rows gives
    a cleaner estimate of the shared null correlation).  Requires K = 2 and
    at least 10 retained rows; raises ValueError otherwise or when a column
    is constant.
    """
    zarr = _as_z_array(z)
    if zarr.shape[1] != 2:
        raise ValueError("correlation estimation requires exactly 2 dimensions")
    if truncation is not None:
        zarr = zarr[(np.abs(zarr) <= truncation).all(axis=1)]
    if zarr.shape[0] < 10:
        raise ValueError("need at least 10 rows to estimate a correlation")
    if (zarr.std(axis=0) == 0).any():
        raise ValueError("cannot estimate a correlation from a constant column")
    return float(np.corrcoef(zarr[:, 0], zarr[:, 1])[0, 1])


def symmetrize(z, seed: int = 0):
    """Balance directional skew by flipping the signs of random rows.

    A column is skewed when, among its entries with |z| > 1, the fraction of
    positive values is off 0.5 by more than 0.05.  If no column is skewed the
    input is returned unchanged with all-False flags; otherwise every row is
    flipped (all dimensions at once) with probability one half.  Applying the
    returned flags a second time recovers the original matrix.

    Returns (ZMatrix, flags) where flags[j] says row j was flipped.
    """
    if not isinstance(z, ZMatrix):
        z = ZMatrix.from_z(np.asarray(z, dtype=np.float64))
    zarr = z.z
    j_total, _ = zarr.shape
    skewed = False
    for dim in range(zarr.shape[1]):
        big = np.abs(zarr[:, dim]) > 1.0
        if not big.any():
            continue
        frac = float((zarr[big, dim] > 0).mean())
        if abs(frac - 0.5) > 0.05:
            skewed = True
            break
    if not skewed:
        return z, np.zeros(j_total, dtype=bool)
    rng = np.random.default_rng(seed)
    flags = rng.random(j_total) < 0.5
    flipped = np.where(flags[:, None], -zarr, zarr)
    return ZMatrix(ids=z.ids, z=flipped), flags
