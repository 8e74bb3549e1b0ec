"""Scenario simulation and score-statistic computation.

Four two-to-three dimensional genetic association scenarios are supported.
Each simulated row is one variant: a genotype drawn per subject as
Binomial(2, maf), one or more phenotypes generated from per-scenario
regression models, and one z-statistic per dimension computed as an
efficient score statistic under the per-dimension null.

    mediation2d:   dimension 1 tests the genotype effect on a continuous
                   mediator (linear model, unit-variance noise); dimension 2
                   tests the mediator effect on a binary outcome adjusted
                   for genotype (logistic model, intercept -1, no direct
                   genotype effect).
    pleiotropy3d:  three binary outcomes on three independent cohorts, each
                   tested marginally against its genotype (intercept -1).
    correlated2d:  two binary outcomes on one cohort sharing the genotype,
                   made dependent through a Gaussian-copula latent variable
                   calibrated so the null correlation of the outcomes (and
                   hence of the z-statistics) equals rho_outcomes.
    replication2d: one binary outcome measured in two independent cohorts;
                   jointly affected rows share the effect direction.

Two generation modes: "regression" simulates subject-level data and computes
the score statistics; "asymptotic" draws z directly from its limiting
Gaussian, with means obtained from the same effect sizes through exact
plug-in formulas (so the two modes agree for matched effects as the sample
size grows).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import optimize, stats
from scipy.special import expit, logit, ndtri

from .estimate import FitOptions, em_fit
from .estimate import estimate_correlation as _estimate_correlation
from .estimate import symmetrize as _symmetrize
from .inference import fdp_power, incongruence_audit, reject
from .model import ModelSpec, ZMatrix, lfdr_batch

KINDS = ("mediation2d", "pleiotropy3d", "correlated2d", "replication2d")
MODES = ("regression", "asymptotic")

_KIND_K = {"mediation2d": 2, "pleiotropy3d": 3, "correlated2d": 2, "replication2d": 2}

# fixed regression intercepts: the mediator model has intercept 0, binary
# outcomes have intercept -1, and the outcome model has no direct genotype term
_MEDIATOR_INTERCEPT = 0.0
_OUTCOME_INTERCEPT = -1.0
_OUTCOME_GENOTYPE_EFFECT = 0.0

_IRLS_TOL = 1e-10
_IRLS_MAX_ITER = 100

# target elements per generation chunk (keeps subject-level arrays ~tens of MB)
_CHUNK_ELEMENTS = 4_000_000

_MAX_ROW_ATTEMPTS = 50

_HERMITE_POINTS = 64


@dataclass(frozen=True)
class ScenarioSpec:
    """Description of one simulation scenario.

    Attributes:
        kind: one of KINDS.
        n_sets: number of rows (variants) J.
        sample_size: subjects per regression, n.
        maf: minor allele frequency for Binomial(2, maf) genotypes.
        tau1: proportion of rows per single-association case.
        tau2: proportion per double-association case.
        tau3: proportion for the triple-association case (pleiotropy3d only).
        effect_window_low: lower end of the |effect| sampling window.
        window_length: width of the |effect| sampling window.
        beta_offset: additive bump for second-dimension |effects|.
        rho_outcomes: outcome correlation (correlated2d only).
        sign_mix: probability that an effect is positive.
        mode: "regression" or "asymptotic".
        seed: RNG seed; the full output is a deterministic function of the spec.
        quota_assignment: deterministically round case counts (exact quotas)
            instead of drawing each row's case from a multinomial.
    """

    kind: str
    n_sets: int
    sample_size: int = 1000
    maf: float = 0.3
    tau1: float = 0.0
    tau2: float = 0.0
    tau3: float = 0.0
    effect_window_low: float = 0.0
    window_length: float = 0.1
    beta_offset: float = 0.04
    rho_outcomes: float = 0.0
    sign_mix: float = 0.5
    mode: str = "regression"
    seed: int = 0
    quota_assignment: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_sets < 1:
            raise ValueError("n_sets must be positive")
        if self.mode == "regression" and self.sample_size < 10:
            raise ValueError("sample_size must be at least 10 for regression mode")
        if not 0.0 < self.maf <= 0.5:
            raise ValueError(f"maf must lie in (0, 0.5], got {self.maf}")
        for name in ("tau1", "tau2", "tau3"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.kind != "pleiotropy3d" and self.tau3 != 0.0:
            raise ValueError("tau3 is only meaningful for pleiotropy3d")
        if self.case_mass() > 0.5:
            raise ValueError("association cases must cover at most half of the rows")
        if self.effect_window_low < 0 or self.window_length < 0 or self.beta_offset < 0:
            raise ValueError("effect window parameters must be non-negative")
        if self.kind != "correlated2d" and self.rho_outcomes != 0.0:
            raise ValueError("rho_outcomes is only meaningful for correlated2d")
        if not -0.9 <= self.rho_outcomes <= 0.9:
            raise ValueError("rho_outcomes must lie in [-0.9, 0.9]")
        if not 0.0 <= self.sign_mix <= 1.0:
            raise ValueError("sign_mix must lie in [0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @property
    def k(self) -> int:
        return _KIND_K[self.kind]

    def case_table(self) -> tuple[tuple[int, float], ...]:
        """(pattern, proportion) pairs for the association cases of this kind.

        Patterns use the which-dimensions encoding with dimension 1 as the
        most significant bit.
        """
        if self.kind == "pleiotropy3d":
            return (
                (4, self.tau1), (2, self.tau1), (1, self.tau1),
                (6, self.tau2), (5, self.tau2), (3, self.tau2),
                (7, self.tau3),
            )
        return ((2, self.tau1), (1, self.tau1), (3, self.tau2))

    def case_mass(self) -> float:
        return float(sum(p for _, p in self.case_table()))


@dataclass(frozen=True)
class TruthLabels:
    """Ground truth for simulated rows.

    configs holds the true sign configuration per row ((J, K) int8);
    alt flags rows belonging to the composite alternative of the scenario's
    natural model variant (sign-concordant only for replication2d).
    """

    configs: np.ndarray
    alt: np.ndarray


@dataclass(frozen=True)
class SimOutput:
    """simulate() result: statistics, truth, the spec, and regeneration count."""

    z: ZMatrix
    truth: TruthLabels
    scenario: ScenarioSpec
    n_regenerated: int


def draw_genotypes(n: int, maf: float, seed=0) -> np.ndarray:
    """n additive genotypes: Binomial(2, maf) counts as float64.

    seed may be an int or an existing numpy Generator.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 < maf <= 0.5:
        raise ValueError(f"maf must lie in (0, 0.5], got {maf}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.binomial(2, maf, size=n).astype(np.float64)


# ---------------------------------------------------------------------------
# score statistics


def linear_score_stat(y, x) -> float:
    """Score statistic for the slope in a linear model of y on (1, x).

    Uses the null (intercept-only) maximum-likelihood residual scale, so
    z = sum((x - xbar) (y - ybar)) / (sigma0 * sqrt(sum((x - xbar)^2)))
    with sigma0^2 = mean((y - ybar)^2).  Asymptotically N(0, 1) under the
    null.  Raises ValueError when x or y is constant.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if y.shape != x.shape or y.size < 3:
        raise ValueError("y and x must be equal-length vectors with at least 3 entries")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    sigma0 = math.sqrt(float(yc @ yc) / y.size)
    if sxx <= 0 or sigma0 <= 0:
        raise ValueError("x and y must both vary")
    return float((xc @ yc) / (sigma0 * math.sqrt(sxx)))


def logistic_score_stat(y, x, covariates=None) -> float:
    """Efficient score statistic for adding x to a logistic null model.

    The null model regresses the binary y on an intercept plus the optional
    covariate columns via IRLS (tolerance 1e-10, at most 100 iterations).
    With fitted probabilities p and weights w = p(1-p),
    z = U / sqrt(V) with U = sum(x (y - p)) and V the weighted residual
    variance of x after projecting out the null design.  Raises ValueError
    on non-binary y, a degenerate y, IRLS non-convergence (separation), or a
    vanishing V.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if y.shape != x.shape or y.size < 3:
        raise ValueError("y and x must be equal-length vectors with at least 3 entries")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("y must be binary (0/1)")
    ybar = y.mean()
    if ybar in (0.0, 1.0):
        raise ValueError("y must contain both classes")
    if covariates is None:
        design = np.ones((y.size, 1))
    else:
        cov = np.asarray(covariates, dtype=np.float64)
        if cov.ndim == 1:
            cov = cov[:, None]
        if cov.shape[0] != y.size:
            raise ValueError("covariates must have one row per observation")
        design = np.column_stack([np.ones(y.size), cov])
    beta = np.zeros(design.shape[1])
    beta[0] = logit(ybar)
    converged = False
    for _ in range(_IRLS_MAX_ITER):
        p = expit(design @ beta)
        w = p * (1.0 - p)
        xtwx = design.T @ (design * w[:, None])
        grad = design.T @ (y - p)
        try:
            step = np.linalg.solve(xtwx, grad)
        except np.linalg.LinAlgError as exc:
            raise ValueError("null logistic fit is degenerate") from exc
        beta = beta + step
        if not np.isfinite(beta).all():
            raise ValueError("null logistic fit diverged (separation?)")
        if np.max(np.abs(step)) < _IRLS_TOL:
            converged = True
            break
    if not converged:
        raise ValueError("null logistic fit did not converge")
    p = expit(design @ beta)
    w = p * (1.0 - p)
    u = float(x @ (y - p))
    xtwd = design.T @ (w * x)
    xtwx = design.T @ (design * w[:, None])
    v = float(w @ (x * x) - xtwd @ np.linalg.solve(xtwx, xtwd))
    if v <= 0:
        raise ValueError("tested covariate has no information under the null")
    return u / math.sqrt(v)


def _batch_linear_score(x, y):
    """Row-wise linear score statistics for (R, n) arrays; returns (z, valid)."""
    n = x.shape[1]
    xc = x - x.mean(axis=1, keepdims=True)
    yc = y - y.mean(axis=1, keepdims=True)
    sxx = np.einsum("rn,rn->r", xc, xc)
    sigma0 = np.sqrt(np.einsum("rn,rn->r", yc, yc) / n)
    valid = (sxx > 0) & (sigma0 > 0)
    denom = np.where(valid, sigma0 * np.sqrt(np.where(sxx > 0, sxx, 1.0)), 1.0)
    z = np.einsum("rn,rn->r", xc, yc) / denom
    return np.where(valid, z, 0.0), valid


def _batch_logistic_intercept_score(y, x):
    """Row-wise logistic scores with an intercept-only null; returns (z, valid)."""
    pbar = y.mean(axis=1)
    xc = x - x.mean(axis=1, keepdims=True)
    u = np.einsum("rn,rn->r", xc, y)
    v = pbar * (1.0 - pbar) * np.einsum("rn,rn->r", xc, xc)
    valid = (pbar > 0) & (pbar < 1) & (v > 0)
    z = u / np.sqrt(np.where(valid, v, 1.0))
    return np.where(valid, z, 0.0), valid


def _batch_logistic_adjusted_score(y, x, g):
    """Row-wise logistic scores for x with null design (1, g); returns (z, valid)."""
    r_total, n = y.shape
    ybar = y.mean(axis=1)
    usable = (ybar > 0) & (ybar < 1)
    b0 = np.where(usable, logit(np.clip(ybar, 1e-12, 1.0 - 1e-12)), 0.0)
    b1 = np.zeros(r_total)
    active = usable.copy()
    converged = np.zeros(r_total, dtype=bool)
    for _ in range(_IRLS_MAX_ITER):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        eta = b0[idx, None] + b1[idx, None] * g[idx]
        p = expit(eta)
        w = p * (1.0 - p)
        sw = w.sum(axis=1)
        swg = np.einsum("rn,rn->r", w, g[idx])
        swgg = np.einsum("rn,rn->r", w * g[idx], g[idx])
        resid = y[idx] - p
        s0 = resid.sum(axis=1)
        s1 = np.einsum("rn,rn->r", resid, g[idx])
        det = sw * swgg - swg * swg
        ok = det > 1e-12
        det_safe = np.where(ok, det, 1.0)
        d0 = (swgg * s0 - swg * s1) / det_safe
        d1 = (sw * s1 - swg * s0) / det_safe
        d0 = np.where(ok, d0, 0.0)
        d1 = np.where(ok, d1, 0.0)
        b0[idx] += d0
        b1[idx] += d1
        bad = ~ok | ~np.isfinite(b0[idx]) | ~np.isfinite(b1[idx])
        done = (np.maximum(np.abs(d0), np.abs(d1)) < _IRLS_TOL) & ~bad
        converged[idx[done]] = True
        active[idx[done | bad]] = False
        usable[idx[bad]] = False
    valid = usable & converged
    eta = b0[:, None] + b1[:, None] * g
    p = expit(eta)
    w = p * (1.0 - p)
    u = np.einsum("rn,rn->r", x, y - p)
    sw = w.sum(axis=1)
    swg = np.einsum("rn,rn->r", w, g)
    swgg = np.einsum("rn,rn->r", w * g, g)
    swx = np.einsum("rn,rn->r", w, x)
    swgx = np.einsum("rn,rn->r", w * g, x)
    swxx = np.einsum("rn,rn->r", w * x, x)
    det = sw * swgg - swg * swg
    ok = det > 1e-12
    det_safe = np.where(ok, det, 1.0)
    quad = (swgg * swx * swx - 2.0 * swg * swx * swgx + sw * swgx * swgx) / det_safe
    v = swxx - quad
    valid &= ok & (v > 0)
    z = u / np.sqrt(np.where(valid & (v > 0), v, 1.0))
    return np.where(valid, z, 0.0), valid


# ---------------------------------------------------------------------------
# effect-size to asymptotic-mean mappings

_genotype_grid = np.array([0.0, 1.0, 2.0])


def _genotype_pmf(maf: float) -> np.ndarray:
    return np.array([(1 - maf) ** 2, 2 * maf * (1 - maf), maf**2])


def _hermite_rule():
    nodes, weights = np.polynomial.hermite_e.hermegauss(_HERMITE_POINTS)
    return nodes, weights / math.sqrt(2.0 * math.pi)


_HERMITE_NODES, _HERMITE_WEIGHTS = _hermite_rule()


def _mean_linear(effect, n: int, maf: float):
    """Limiting z mean for the genotype slope in the linear mediator model."""
    effect = np.asarray(effect, dtype=np.float64)
    var_g = 2.0 * maf * (1.0 - maf)
    return effect * math.sqrt(n * var_g) / np.sqrt(1.0 + effect**2 * var_g)


def _mean_logistic_marginal(effect, n: int, maf: float, intercept: float = _OUTCOME_INTERCEPT):
    """Limiting z mean for a genotype score on a binary outcome (intercept-only null).

    Exact three-point computation over the genotype distribution: with
    p(g) = expit(intercept + effect * g) and pbar its genotype average,
    mean = sqrt(n) * E[(G - EG) p(G)] / sqrt(pbar (1 - pbar) Var(G)).
    """
    effect = np.asarray(effect, dtype=np.float64)
    pmf = _genotype_pmf(maf)
    g = _genotype_grid
    p = expit(intercept + effect[..., None] * g)
    pbar = p @ pmf
    num = ((g - 2.0 * maf) * p) @ pmf
    var_g = 2.0 * maf * (1.0 - maf)
    return math.sqrt(n) * num / np.sqrt(pbar * (1.0 - pbar) * var_g)


def _mean_logistic_mediator(
    a: float,
    b: float,
    n: int,
    maf: float,
    intercept: float = _OUTCOME_INTERCEPT,
    genotype_effect: float = _OUTCOME_GENOTYPE_EFFECT,
) -> float:
    """Limiting z mean for the mediator score adjusted for genotype.

    The mediator is M = a G + eps with standard normal eps and the outcome is
    Bernoulli(expit(intercept + genotype_effect G + b M)).  The null fit of
    y on (1, G) converges to the population weighted fit, computed here by
    Gauss-Hermite quadrature over eps plus, when a != 0, a two-parameter
    root solve.  mean = sqrt(n) E[M(y - phat(G))] / sqrt(E[what(G)]).
    """
    if b == 0.0:
        return 0.0
    pmf = _genotype_pmf(maf)
    g = _genotype_grid
    eps = _HERMITE_NODES
    wts = _HERMITE_WEIGHTS
    # (3, H) matrix of outcome probabilities by genotype and noise node
    p_full = expit(intercept + genotype_effect * g[:, None] + b * (a * g[:, None] + eps[None, :]))
    m_of_g = p_full @ wts  # E[y | G = g]
    if a == 0.0 and genotype_effect == 0.0:
        phat = np.full(3, float(m_of_g @ pmf))
    else:

        def moment_gap(c):
            fitted = expit(c[0] + c[1] * g)
            diff = fitted - m_of_g
            return np.array([diff @ pmf, (diff * g) @ pmf])

        start = np.array([logit(float(np.clip(m_of_g @ pmf, 1e-12, 1 - 1e-12))), 0.0])
        sol = optimize.root(moment_gap, start, tol=1e-12)
        if not sol.success:
            raise RuntimeError(f"null-fit limit solve failed: {sol.message}")
        phat = expit(sol.x[0] + sol.x[1] * g)
    mediator = a * g[:, None] + eps[None, :]
    e_my = ((mediator * p_full) @ wts) @ pmf
    e_m_phat = (a * g * phat) @ pmf
    what = phat * (1.0 - phat)
    v_per_subject = float(what @ pmf)
    return math.sqrt(n) * float(e_my - e_m_phat) / math.sqrt(v_per_subject)


# ---------------------------------------------------------------------------
# latent-correlation calibration for correlated2d


def _binary_correlation(latent_r: float, p1: float, p2: float) -> float:
    t1 = float(ndtri(p1))
    t2 = float(ndtri(p2))
    joint = float(
        stats.multivariate_normal(mean=[0.0, 0.0], cov=[[1.0, latent_r], [latent_r, 1.0]]).cdf(
            [t1, t2]
        )
    )
    denom = math.sqrt(p1 * (1 - p1) * p2 * (1 - p2))
    return (joint - p1 * p2) / denom


@lru_cache(maxsize=32)
def _latent_correlation(target: float, p_null: float) -> float:
    """Latent Gaussian correlation giving two threshold-binary outcomes
    (both with null success probability p_null) the target correlation."""
    if target == 0.0:
        return 0.0

    def gap(r):
        return _binary_correlation(r, p_null, p_null) - target

    return float(optimize.brentq(gap, -0.998, 0.998, xtol=1e-10))


# ---------------------------------------------------------------------------
# row generation


def _assign_cases(spec: ScenarioSpec, rng: np.random.Generator):
    """Case pattern, signs, and |effect| magnitudes for every row.

    Returns (patterns (J,) int, signs (J, K) int8, magnitudes (J, K) float).
    Quota assignment rounds each case's count and places the cases on a
    random permutation of the rows; otherwise each row draws its case from
    the corresponding multinomial.
    """
    j_total = spec.n_sets
    k = spec.k
    table = spec.case_table()
    patterns = np.zeros(j_total, dtype=np.int64)
    if spec.quota_assignment:
        counts = [int(round(j_total * prop)) for _, prop in table]
        if sum(counts) > j_total:
            raise ValueError("case proportions exceed the number of rows")
        perm = rng.permutation(j_total)
        start = 0
        for (pattern, _), count in zip(table, counts):
            patterns[perm[start : start + count]] = pattern
            start += count
    else:
        probs = [prop for _, prop in table]
        null_prob = 1.0 - sum(probs)
        draw = rng.choice(len(table) + 1, size=j_total, p=probs + [null_prob])
        for i, (pattern, _) in enumerate(table):
            patterns[draw == i] = pattern

    signs = np.zeros((j_total, k), dtype=np.int8)
    mags = np.zeros((j_total, k), dtype=np.float64)
    low = spec.effect_window_low
    high = low + spec.window_length
    for pattern, _ in table:
        rows = np.flatnonzero(patterns == pattern)
        if rows.size == 0:
            continue
        shared_sign = None
        if spec.kind == "replication2d" and pattern == 2**k - 1:
            # jointly affected rows replicate with a common direction
            shared_sign = np.where(rng.random(rows.size) < spec.sign_mix, 1, -1).astype(np.int8)
        for dim in range(k):
            if not (pattern >> (k - 1 - dim)) & 1:
                continue
            mag = rng.uniform(low, high, size=rows.size)
            if dim == 1:
                mag = mag + spec.beta_offset
            if shared_sign is not None:
                sign = shared_sign
            else:
                sign = np.where(rng.random(rows.size) < spec.sign_mix, 1, -1).astype(np.int8)
            signs[rows, dim] = sign
            mags[rows, dim] = mag
    return patterns, signs, mags


def _regression_chunk(spec: ScenarioSpec, effects: np.ndarray, rng: np.random.Generator):
    """Generate subject-level data for a chunk of rows; returns (z, valid)."""
    r_total = effects.shape[0]
    n = spec.sample_size
    maf = spec.maf
    kind = spec.kind
    if kind == "mediation2d":
        g = rng.binomial(2, maf, size=(r_total, n)).astype(np.float64)
        eps = rng.standard_normal((r_total, n))
        mediator = _MEDIATOR_INTERCEPT + effects[:, 0:1] * g + eps
        lin = (
            _OUTCOME_INTERCEPT
            + effects[:, 1:2] * mediator
            + _OUTCOME_GENOTYPE_EFFECT * g
        )
        y = (rng.random((r_total, n)) < expit(lin)).astype(np.float64)
        z1, ok1 = _batch_linear_score(g, mediator)
        z2, ok2 = _batch_logistic_adjusted_score(y, mediator, g)
        return np.column_stack([z1, z2]), ok1 & ok2
    if kind == "pleiotropy3d":
        zs = []
        valid = np.ones(r_total, dtype=bool)
        for dim in range(3):
            g = rng.binomial(2, maf, size=(r_total, n)).astype(np.float64)
            lin = _OUTCOME_INTERCEPT + effects[:, dim : dim + 1] * g
            y = (rng.random((r_total, n)) < expit(lin)).astype(np.float64)
            z, ok = _batch_logistic_intercept_score(y, g)
            zs.append(z)
            valid &= ok
        return np.column_stack(zs), valid
    if kind == "correlated2d":
        g = rng.binomial(2, maf, size=(r_total, n)).astype(np.float64)
        p1 = expit(_OUTCOME_INTERCEPT + effects[:, 0:1] * g)
        p2 = expit(_OUTCOME_INTERCEPT + effects[:, 1:2] * g)
        latent_r = _latent_correlation(spec.rho_outcomes, expit(_OUTCOME_INTERCEPT))
        u1 = rng.standard_normal((r_total, n))
        u2 = latent_r * u1 + math.sqrt(1.0 - latent_r**2) * rng.standard_normal((r_total, n))
        y1 = (u1 < ndtri(p1)).astype(np.float64)
        y2 = (u2 < ndtri(p2)).astype(np.float64)
        z1, ok1 = _batch_logistic_intercept_score(y1, g)
        z2, ok2 = _batch_logistic_intercept_score(y2, g)
        return np.column_stack([z1, z2]), ok1 & ok2
    # replication2d: independent cohorts
    g1 = rng.binomial(2, maf, size=(r_total, n)).astype(np.float64)
    y1 = (rng.random((r_total, n)) < expit(_OUTCOME_INTERCEPT + effects[:, 0:1] * g1)).astype(
        np.float64
    )
    g2 = rng.binomial(2, maf, size=(r_total, n)).astype(np.float64)
    y2 = (rng.random((r_total, n)) < expit(_OUTCOME_INTERCEPT + effects[:, 1:2] * g2)).astype(
        np.float64
    )
    z1, ok1 = _batch_logistic_intercept_score(y1, g1)
    z2, ok2 = _batch_logistic_intercept_score(y2, g2)
    return np.column_stack([z1, z2]), ok1 & ok2


def _regression_z(spec: ScenarioSpec, effects: np.ndarray, rng: np.random.Generator):
    """Chunked regression-mode generation with per-row regeneration on failure."""
    j_total = effects.shape[0]
    z = np.empty((j_total, spec.k))
    chunk = max(1, _CHUNK_ELEMENTS // max(1, spec.sample_size))
    n_regenerated = 0
    for start in range(0, j_total, chunk):
        stop = min(start + chunk, j_total)
        z_chunk, valid = _regression_chunk(spec, effects[start:stop], rng)
        z[start:stop] = z_chunk
        for local in np.flatnonzero(~valid):
            row = start + local
            for attempt in range(1, _MAX_ROW_ATTEMPTS + 1):
                n_regenerated += 1
                row_rng = np.random.default_rng(
                    np.random.SeedSequence([spec.seed, row, attempt])
                )
                z_row, ok = _regression_chunk(spec, effects[row : row + 1], row_rng)
                if ok[0]:
                    z[row] = z_row[0]
                    break
            else:
                raise RuntimeError(
                    f"row {row} failed to produce a valid statistic after "
                    f"{_MAX_ROW_ATTEMPTS} attempts"
                )
    return z, n_regenerated


def _asymptotic_z(spec: ScenarioSpec, effects: np.ndarray, rng: np.random.Generator):
    """Draw z directly from the limiting Gaussian implied by the effects."""
    j_total, k = effects.shape
    n = spec.sample_size
    maf = spec.maf
    means = np.zeros((j_total, k))
    if spec.kind == "mediation2d":
        means[:, 0] = _mean_linear(effects[:, 0], n, maf)
        nz = np.flatnonzero(effects[:, 1] != 0.0)
        for row in nz:
            means[row, 1] = _mean_logistic_mediator(
                float(effects[row, 0]), float(effects[row, 1]), n, maf
            )
    else:
        for dim in range(k):
            nz = effects[:, dim] != 0.0
            if nz.any():
                means[nz, dim] = _mean_logistic_marginal(effects[nz, dim], n, maf)
    noise = rng.standard_normal((j_total, k))
    if spec.kind == "correlated2d" and spec.rho_outcomes != 0.0:
        rho = spec.rho_outcomes
        second = rho * noise[:, 0] + math.sqrt(1.0 - rho**2) * noise[:, 1]
        noise = np.column_stack([noise[:, 0], second])
    return means + noise, 0


def simulate(spec: ScenarioSpec) -> SimOutput:
    """Generate one scenario: z-statistics plus ground-truth labels.

    The output is a deterministic function of the spec (including its seed).
    Rows whose regression data yielded no usable statistic (degenerate
    genotypes, one-class outcomes, separation) are regenerated from per-row
    seeds; n_regenerated counts those extra draws.
    """
    rng = np.random.default_rng(spec.seed)
    patterns, signs, mags = _assign_cases(spec, rng)
    effects = signs.astype(np.float64) * mags
    if spec.mode == "regression":
        z, n_regenerated = _regression_z(spec, effects, rng)
    else:
        z, n_regenerated = _asymptotic_z(spec, effects, rng)
    full = 2**spec.k - 1
    if spec.kind == "replication2d":
        alt = (patterns == full) & (np.abs(signs.sum(axis=1)) == spec.k)
    else:
        alt = patterns == full
    ids = np.array([f"set{i + 1}" for i in range(spec.n_sets)], dtype=object)
    return SimOutput(
        z=ZMatrix(ids=ids, z=z),
        truth=TruthLabels(configs=signs, alt=alt),
        scenario=spec,
        n_regenerated=n_regenerated,
    )


# ---------------------------------------------------------------------------
# replicate driver


@dataclass(frozen=True)
class ReplicateSummary:
    """run_replicates() result: one row dict per replicate plus means.

    rows columns: replicate, seed, failed, converged, iterations, n_rejected,
    fdp, power, incongruous, n_regenerated.  means averages the numeric
    columns over non-failed replicates and records n_failed.
    """

    rows: tuple[dict, ...]
    means: dict


def run_replicates(
    scenario: ScenarioSpec,
    model_spec: ModelSpec,
    fit_options: FitOptions | None = None,
    q: float = 0.1,
    n_replicates: int = 1,
    symmetrize: bool = False,
    estimate_rho: bool = False,
    audit: bool = True,
) -> ReplicateSummary:
    """Simulate, fit, and evaluate n_replicates copies of a scenario.

    Replicate r re-seeds the scenario with seed + r, simulates, optionally
    symmetrizes, fits the mixture by EM, rejects at level q, and evaluates
    fdp/power against the truth plus (optionally) the incongruence audit.
    estimate_rho refits the correlated variant's rho from each replicate's
    statistics.  A replicate whose EM fit fails is recorded with failed=True
    and NaN metrics rather than aborting the run.
    """
    if n_replicates < 1:
        raise ValueError("n_replicates must be positive")
    rows = []
    for rep in range(n_replicates):
        sspec = replace(scenario, seed=scenario.seed + rep)
        sim = simulate(sspec)
        zm = sim.z
        if symmetrize:
            zm, _ = _symmetrize(zm, seed=sspec.seed)
        mspec = model_spec
        if estimate_rho:
            if model_spec.variant != "correlated":
                raise ValueError("estimate_rho requires the correlated variant")
            mspec = ModelSpec(
                k=model_spec.k,
                variant="correlated",
                m_counts=model_spec.m_counts,
                rho=_estimate_correlation(zm),
            )
        row = {
            "replicate": rep,
            "seed": sspec.seed,
            "failed": False,
            "converged": False,
            "iterations": 0,
            "n_rejected": math.nan,
            "fdp": math.nan,
            "power": math.nan,
            "incongruous": math.nan,
            "n_regenerated": sim.n_regenerated,
        }
        try:
            fit = em_fit(zm, mspec, fit_options)
        except (ValueError, RuntimeError):
            row["failed"] = True
            rows.append(row)
            continue
        lf = lfdr_batch(zm, mspec, fit.params)
        decision = reject(lf, q)
        metrics = fdp_power(decision.rejected, sim.truth.alt)
        row.update(
            converged=fit.converged,
            iterations=fit.iterations,
            n_rejected=metrics.n_rejected,
            fdp=metrics.fdp,
            power=metrics.power,
        )
        if audit:
            report = incongruence_audit(zm, lf, seed=sspec.seed)
            row["incongruous"] = report.incongruous_count
        rows.append(row)
    good = [r for r in rows if not r["failed"]]
    means = {"n_replicates": n_replicates, "n_failed": len(rows) - len(good)}
    for key in ("fdp", "power", "n_rejected", "incongruous", "iterations", "n_regenerated"):
        values = [r[key] for r in good if not (isinstance(r[key], float) and math.isnan(r[key]))]
        means[key] = float(np.mean(values)) if values else math.nan
    return ReplicateSummary(rows=tuple(rows), means=means)
