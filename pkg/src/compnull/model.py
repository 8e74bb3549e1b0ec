"""Sign-symmetric Gaussian mixture model over sets of z-statistics.

Each set of K z-statistics is modelled as a draw from a mixture with one
component per (configuration, magnitude-class) pair.  A configuration
contributes a unit-variance Gaussian centred at its signs times a positive
magnitude vector; configurations sharing the same pattern of non-zero
dimensions share both their magnitude vectors and their mixing proportions.
The local false discovery rate (lfdr) of a set is the posterior probability
that it was generated by a composite-null configuration.

Model variants:
    base:        identity covariance, alternative = all dimensions non-zero.
    correlated:  K = 2 with a shared unit-variance covariance whose
                 off-diagonal is rho; one magnitude class per pattern.
    replication: identity covariance, alternative restricted to
                 sign-concordant all-non-zero configurations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .configs import VARIANTS, ConfigSet, enumerate_configurations

# magnitudes below this are treated as violating positivity
MU_FLOOR = 1e-6

# tolerance on the total-probability constraint
SIMPLEX_TOL = 1e-12


def _as_int_tuple(values) -> tuple[int, ...]:
    return tuple(int(v) for v in values)


@dataclass(frozen=True)
class ModelSpec:
    """Structural description of a mixture model (no fitted numbers).

    Attributes:
        k: number of dimensions per set, >= 2.
        variant: "base", "correlated", or "replication".
        m_counts: number of magnitude classes per which-dimensions pattern,
            indexed by the binary encoding b in [0, 2^K); m_counts[0] must be
            1 (the null pattern has a single, zero, magnitude vector).
        rho: off-diagonal of the shared covariance (correlated variant only).
    """

    k: int
    variant: str = "base"
    m_counts: tuple[int, ...] = ()
    rho: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.k < 2:
            raise ValueError(f"k must be at least 2, got {self.k}")
        counts = _as_int_tuple(self.m_counts) if self.m_counts else (1,) * 2**self.k
        object.__setattr__(self, "m_counts", counts)
        if len(counts) != 2**self.k:
            raise ValueError(
                f"m_counts must have 2^k = {2**self.k} entries, got {len(counts)}"
            )
        if counts[0] != 1:
            raise ValueError("m_counts[0] must be 1: the null pattern has one class")
        if any(c < 1 for c in counts):
            raise ValueError("every m_counts entry must be at least 1")
        if self.variant == "correlated":
            if self.k != 2:
                raise ValueError("the correlated variant requires k = 2")
            if any(c != 1 for c in counts):
                raise ValueError("the correlated variant requires one magnitude class per pattern")
            if self.rho is None:
                raise ValueError("the correlated variant requires rho")
            if not -1.0 < float(self.rho) < 1.0:
                raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
            object.__setattr__(self, "rho", float(self.rho))
        else:
            if self.rho is not None:
                raise ValueError("rho is only meaningful for the correlated variant")
            if self.variant == "replication" and counts[-1] != 1:
                raise ValueError(
                    "the replication variant requires one magnitude class for the all-non-zero pattern"
                )

    @cached_property
    def config_set(self) -> ConfigSet:
        return enumerate_configurations(self.k, self.variant)

    @property
    def n_components(self) -> int:
        """Total mixture components: sum over configurations of their class count."""
        reps = self.config_set.binary_reps
        return int(sum(self.m_counts[b] for b in reps))


@dataclass(frozen=True)
class ModelParams:
    """Fitted numbers for a ModelSpec.

    Attributes:
        mu: per-pattern magnitude matrices; mu[b] has shape (m_counts[b], K)
            with zeros exactly in the dimensions b leaves out and positive
            entries elsewhere.  mu[0] is the single all-zero row.
        pi: per-pattern mixing proportions; pi[b] has shape (m_counts[b],)
            and holds the probability of each single configuration with
            pattern b (shared across the 2^popcount(b) sign choices), so
            sum_b n_b * sum_m pi[b][m] = 1.
    """

    mu: tuple[np.ndarray, ...]
    pi: tuple[np.ndarray, ...]

    def __post_init__(self):
        mu = tuple(np.asarray(m, dtype=np.float64) for m in self.mu)
        pi = tuple(np.asarray(p, dtype=np.float64) for p in self.pi)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "pi", pi)

    @property
    def k(self) -> int:
        return self.mu[0].shape[1]


def make_params(mu, pi) -> ModelParams:
    """Convenience constructor accepting nested lists."""
    return ModelParams(
        mu=tuple(np.atleast_2d(np.asarray(m, dtype=np.float64)) for m in mu),
        pi=tuple(np.atleast_1d(np.asarray(p, dtype=np.float64)) for p in pi),
    )


@dataclass(frozen=True)
class ZMatrix:
    """J sets of K z-statistics with row identifiers.

    z is (J, K) float64 with finite entries; ids is a (J,) array of strings.
    """

    ids: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        z = np.ascontiguousarray(self.z, dtype=np.float64)
        if z.ndim != 2:
            raise ValueError("z must be a 2-d array")
        if z.shape[1] < 2:
            raise ValueError("each set needs at least 2 dimensions")
        if not np.isfinite(z).all():
            bad = np.argwhere(~np.isfinite(z))[0]
            raise ValueError(
                f"z contains a non-finite entry at row {bad[0]}, dimension {bad[1] + 1}"
            )
        ids = np.asarray(self.ids, dtype=object)
        if ids.shape != (z.shape[0],):
            raise ValueError("ids must have one entry per row of z")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return self.z.shape[0]

    @property
    def k(self) -> int:
        return self.z.shape[1]

    @classmethod
    def from_z(cls, z) -> "ZMatrix":
        """Wrap a bare array, generating sequential string ids."""
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        ids = np.array([f"set{i + 1}" for i in range(z.shape[0])], dtype=object)
        return cls(ids=ids, z=z)


@dataclass(frozen=True)
class ComponentTable:
    """Flat per-component view of (spec, params): one row per (config, class).

    Component order is configuration index major, magnitude class minor.
    """

    means: np.ndarray  # (C, K) signed means
    log_weights: np.ndarray  # (C,)
    null_mask: np.ndarray  # (C,) uint8
    config_index: np.ndarray  # (C,) index into the ConfigSet
    rep: np.ndarray  # (C,) which-dimensions encoding
    m_index: np.ndarray  # (C,) magnitude class within the pattern
    rho: float | None


def component_table(spec: ModelSpec, params: ModelParams, configs: ConfigSet | None = None) -> ComponentTable:
    """Expand shared parameters into one signed mean and weight per component."""
    if configs is None:
        configs = spec.config_set
    rows_mean = []
    log_w = []
    null = []
    cfg_idx = []
    reps = []
    m_idx = []
    null_lookup = configs.null_mask
    with np.errstate(divide="ignore"):
        log_pi = tuple(np.log(p) for p in params.pi)
    for cfg in configs.configs:
        b = cfg.binary_rep
        signs = np.asarray(cfg.signs, dtype=np.float64)
        for m in range(spec.m_counts[b]):
            rows_mean.append(signs * params.mu[b][m])
            log_w.append(log_pi[b][m])
            null.append(1 if null_lookup[cfg.index] else 0)
            cfg_idx.append(cfg.index)
            reps.append(b)
            m_idx.append(m)
    return ComponentTable(
        means=np.ascontiguousarray(rows_mean, dtype=np.float64),
        log_weights=np.asarray(log_w, dtype=np.float64),
        null_mask=np.asarray(null, dtype=np.uint8),
        config_index=np.asarray(cfg_idx, dtype=np.int64),
        rep=np.asarray(reps, dtype=np.int64),
        m_index=np.asarray(m_idx, dtype=np.int64),
        rho=spec.rho,
    )


def validate_params(spec: ModelSpec, params: ModelParams) -> list[str]:
    """Check params against spec; returns one message per violated constraint.

    Checked constraints: array shapes, the total-probability simplex,
    proportion non-negativity, the zero/positive magnitude pattern, and the
    ordering requirement that every magnitude of the all-non-zero pattern
    weakly dominates every other pattern's magnitudes dimension-wise.
    """
    problems = []
    n_pat = 2**spec.k
    if len(params.mu) != n_pat or len(params.pi) != n_pat:
        return [
            f"shape: expected {n_pat} magnitude matrices and proportion vectors, "
            f"got {len(params.mu)} and {len(params.pi)}"
        ]
    for b in range(n_pat):
        m_b = spec.m_counts[b]
        if params.mu[b].shape != (m_b, spec.k):
            problems.append(
                f"shape: mu[{b}] must be ({m_b}, {spec.k}), got {params.mu[b].shape}"
            )
        if params.pi[b].shape != (m_b,):
            problems.append(f"shape: pi[{b}] must be ({m_b},), got {params.pi[b].shape}")
    if problems:
        return problems

    configs = spec.config_set
    n_per_rep = configs.n_per_rep
    total = sum(float(n_per_rep[b]) * float(params.pi[b].sum()) for b in range(n_pat))
    if abs(total - 1.0) > SIMPLEX_TOL:
        problems.append(f"simplex: configuration probabilities sum to {total!r}, not 1")
    for b in range(n_pat):
        if (params.pi[b] < 0).any():
            problems.append(f"positivity: pi[{b}] has a negative entry")
            break
    for b in range(n_pat):
        for k in range(spec.k):
            bit_set = (b >> (spec.k - 1 - k)) & 1
            col = params.mu[b][:, k]
            if bit_set and (col < MU_FLOOR).any():
                problems.append(
                    f"zero-pattern: mu[{b}][:, {k}] must be >= {MU_FLOOR} in an effect dimension"
                )
            if not bit_set and (col != 0).any():
                problems.append(
                    f"zero-pattern: mu[{b}][:, {k}] must be exactly 0 in a zero dimension"
                )
    full = n_pat - 1
    top = params.mu[full]
    for b in range(1, full):
        for k in range(spec.k):
            if (b >> (spec.k - 1 - k)) & 1:
                cap = params.mu[b][:, k].max()
                if (top[:, k] < cap).any():
                    problems.append(
                        f"ordering: mu[{full}][:, {k}] min {top[:, k].min()!r} is below "
                        f"mu[{b}][:, {k}] max {cap!r}"
                    )
    return problems


def component_log_density(z, config, mu_row, rho: float | None = None) -> float:
    """Log density of one set under one configuration's component.

    Args:
        z: length-K vector of z-statistics.
        config: a Config whose signs orient the magnitudes.
        mu_row: length-K non-negative magnitude vector for the configuration's
            pattern (zeros exactly where the pattern is zero).
        rho: optional shared-covariance off-diagonal (K = 2 only).
    """
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    mu_row = np.asarray(mu_row, dtype=np.float64).reshape(-1)
    k = z.shape[0]
    if len(config.signs) != k or mu_row.shape[0] != k:
        raise ValueError("z, config, and mu_row must share one dimension count")
    mean = np.asarray(config.signs, dtype=np.float64) * mu_row
    diff = z - mean
    if rho is None:
        return float(-0.5 * k * math.log(2 * math.pi) - 0.5 * (diff @ diff))
    if k != 2:
        raise ValueError("a correlation is only supported for K = 2")
    if not -1.0 < rho < 1.0:
        raise ValueError(f"correlation must lie in (-1, 1), got {rho}")
    om = 1.0 - rho * rho
    quad = (diff[0] ** 2 - 2.0 * rho * diff[0] * diff[1] + diff[1] ** 2) / om
    return float(-math.log(2 * math.pi) - 0.5 * math.log(om) - 0.5 * quad)


def _lfdr_from_logs(log_total: np.ndarray, log_null: np.ndarray) -> np.ndarray:
    # a null-restricted sum can never exceed the total, but guard the
    # exponential against rounding at the boundary
    out = np.exp(log_null - log_total)
    # defensive: a vanished total density (impossible in log space for finite
    # inputs) is treated as "no evidence against the null"
    out = np.where(np.isfinite(log_total), out, 1.0)
    return np.clip(out, 0.0, 1.0)


def lfdr_batch(z, spec: ModelSpec, params: ModelParams, configs: ConfigSet | None = None) -> np.ndarray:
    """Local false discovery rate for every row of z.

    lfdr(z) is the ratio of the null-restricted mixture density to the full
    mixture density, evaluated in log space so that extreme statistics
    (|z| ~ 40) stay inside [0, 1] instead of underflowing.

    Accepts a ZMatrix or a (J, K) array; returns a (J,) float64 array.
    """
    zarr = z.z if isinstance(z, ZMatrix) else np.atleast_2d(np.asarray(z, dtype=np.float64))
    if configs is None:
        configs = spec.config_set
    if zarr.shape[1] != spec.k:
        raise ValueError(f"z has {zarr.shape[1]} dimensions but the model expects {spec.k}")
    table = component_table(spec, params, configs)
    log_total, log_null, _ = _kernels.posterior_stats(
        zarr, table.means, table.log_weights, table.null_mask, rho=table.rho, with_resp=False
    )
    return _lfdr_from_logs(log_total, log_null)


def lfdr(z, spec: ModelSpec, params: ModelParams, configs: ConfigSet | None = None) -> float:
    """lfdr of a single set of K z-statistics."""
    z = np.asarray(z, dtype=np.float64).reshape(1, -1)
    return float(lfdr_batch(z, spec, params, configs)[0])
