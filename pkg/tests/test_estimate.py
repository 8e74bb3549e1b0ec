"""EM steps, full fits, initialization, correlation estimation, symmetrization."""

from __future__ import annotations

import numpy as np
import pytest

from compnull.estimate import (
    FitOptions,
    e_step,
    em_fit,
    estimate_correlation,
    initialize_params,
    m_step,
    symmetrize,
)
from compnull.model import ModelSpec, ZMatrix, make_params, validate_params

from _oracles import responsibilities_by_enumeration
from conftest import draw_spec_and_params


def hand_example():
    """Six rows with an unambiguous hard component assignment.

    Row -> sign configuration: rows 0,1 -> (0,0); row 2 -> (0,1);
    row 3 -> (1,0); row 4 -> (1,1); row 5 -> (-1,-1).
    """
    z = np.array([
        [0.2, -0.1],
        [-0.3, 0.4],
        [0.1, 2.8],
        [3.1, -0.2],
        [2.9, 3.3],
        [-3.2, -2.7],
    ])
    spec = ModelSpec(k=2)
    order = {cfg.signs: cfg.index for cfg in spec.config_set.configs}
    resp = np.zeros((6, 9))
    for row, signs in enumerate([(0, 0), (0, 0), (0, 1), (1, 0), (1, 1),
                                 (-1, -1)]):
        resp[row, order[signs]] = 1.0
    return z, spec, resp


class TestEStep:
    @pytest.mark.parametrize("k", [2, 3])
    def test_matches_direct_enumeration(self, k):
        rng = np.random.default_rng(600 + k)
        spec, params = draw_spec_and_params(rng, k=k)
        z = rng.normal(scale=2.5, size=(20, k))
        resp, loglik = e_step(z, spec, params)
        want_resp, want_ll = responsibilities_by_enumeration(
            z, params.mu, params.pi)
        np.testing.assert_allclose(resp, want_resp, rtol=0.0, atol=1e-12)
        assert loglik == pytest.approx(want_ll, rel=1e-12)

    def test_correlated_matches_direct_enumeration(self):
        rng = np.random.default_rng(604)
        spec, params = draw_spec_and_params(rng, k=2, variant="correlated",
                                            rho=0.25)
        z = rng.normal(scale=2.5, size=(20, 2))
        resp, loglik = e_step(z, spec, params)
        want_resp, want_ll = responsibilities_by_enumeration(
            z, params.mu, params.pi, rho=0.25)
        np.testing.assert_allclose(resp, want_resp, rtol=0.0, atol=1e-12)
        assert loglik == pytest.approx(want_ll, rel=1e-12)

    def test_degenerate_prior_concentrates_on_null(self):
        spec = ModelSpec(k=2)
        params = make_params(
            mu=[[[0.0, 0.0]], [[0.0, 3.0]], [[3.0, 0.0]], [[3.0, 3.0]]],
            pi=[[1.0], [0.0], [0.0], [0.0]],
        )
        resp, _ = e_step(np.array([[1.0, -2.0]]), spec, params)
        assert resp[0, 0] == pytest.approx(1.0, abs=1e-15)
        assert np.all(resp[0, 1:] == 0.0)

    def test_rows_sum_to_one(self, rng):
        spec, params = draw_spec_and_params(rng, k=2)
        z = rng.normal(scale=4.0, size=(50, 2))
        resp, _ = e_step(z, spec, params)
        np.testing.assert_allclose(resp.sum(axis=1), 1.0, atol=1e-12)

    def test_origin_symmetry_of_mirrored_configurations(self):
        spec = ModelSpec(k=2)
        params = make_params(
            mu=[[[0.0, 0.0]], [[0.0, 2.0]], [[2.0, 0.0]], [[2.0, 2.0]]],
            pi=[[0.6], [0.05], [0.05], [0.05]],
        )
        resp, _ = e_step(np.array([[0.0, 0.0]]), spec, params)
        order = {cfg.signs: cfg.index for cfg in spec.config_set.configs}
        for signs in [(0, 1), (1, 0), (1, 1), (1, -1)]:
            mirrored = tuple(-s for s in signs)
            assert resp[0, order[signs]] == pytest.approx(
                resp[0, order[mirrored]], rel=1e-12)


class TestMStep:
    def test_hand_computed_hard_assignment(self):
        z, spec, resp = hand_example()
        params = m_step(z, resp, spec, enforce_ordering=False)
        pi = [np.asarray(p) for p in params.pi]
        assert pi[0][0] == pytest.approx(2 / 6, abs=1e-15)
        assert pi[1][0] == pytest.approx(1 / 12, abs=1e-15)
        assert pi[2][0] == pytest.approx(1 / 12, abs=1e-15)
        assert pi[3][0] == pytest.approx(2 / 24, abs=1e-15)
        mu = [np.asarray(m) for m in params.mu]
        np.testing.assert_allclose(mu[1][0], [0.0, 2.8], atol=1e-15)
        np.testing.assert_allclose(mu[2][0], [3.1, 0.0], atol=1e-15)
        np.testing.assert_allclose(mu[3][0], [3.05, 3.0], atol=1e-15)

    def test_ordering_projection_lifts_dominant_cell(self):
        # raw magnitudes put the all-nonzero cell at (3.05, 3.0) while a
        # single-dimension cell sits at 3.1: the projection must lift dim 1
        z, spec, resp = hand_example()
        params = m_step(z, resp, spec, enforce_ordering=True)
        np.testing.assert_allclose(np.asarray(params.mu[3])[0], [3.1, 3.0],
                                   atol=1e-15)
        assert validate_params(spec, params) == []

    def test_degenerate_posterior_keeps_previous_magnitudes(self):
        z, spec, _ = hand_example()
        resp = np.zeros((6, 9))
        resp[:, 0] = 1.0  # everything assigned to the all-zero configuration
        prev = make_params(
            mu=[[[0.0, 0.0]], [[0.0, 2.5]], [[2.5, 0.0]], [[2.5, 2.5]]],
            pi=[[0.7], [0.05], [0.05], [0.025]],
        )
        params = m_step(z, resp, spec, prev_params=prev)
        assert np.asarray(params.pi[0])[0] == pytest.approx(1.0)
        for b in (1, 2, 3):
            np.testing.assert_array_equal(np.asarray(params.mu[b]),
                                          np.asarray(prev.mu[b]))

    def test_sign_folding_matches_single_orientation(self):
        z, spec, resp = hand_example()
        flipped = np.zeros_like(resp)
        order = {cfg.signs: cfg.index for cfg in spec.config_set.configs}
        mirror = {order[cfg.signs]: order[tuple(-s for s in cfg.signs)]
                  for cfg in spec.config_set.configs}
        for col in range(9):
            flipped[:, mirror[col]] = resp[:, col]
        z2 = np.vstack([z, -z])
        resp2 = np.vstack([resp, flipped])
        single = m_step(z, resp, spec, enforce_ordering=False)
        doubled = m_step(z2, resp2, spec, enforce_ordering=False)
        for b in range(4):
            np.testing.assert_allclose(np.asarray(doubled.mu[b]),
                                       np.asarray(single.mu[b]), atol=1e-12)


class TestEmFit:
    def test_recovers_generating_parameters(self):
        rng = np.random.default_rng(321)
        j = 20_000
        pis = np.array([0.9, 0.03, 0.03, 0.01]) / 0.97
        case = np.searchsorted(np.cumsum(pis), rng.random(j))
        s1 = rng.choice([-1.0, 1.0], j)
        s2 = rng.choice([-1.0, 1.0], j)
        mean = np.zeros((j, 2))
        mean[case == 1, 1] = (4 * s2)[case == 1]
        mean[case == 2, 0] = (4 * s1)[case == 2]
        mean[case == 3, 0] = (4 * s1)[case == 3]
        mean[case == 3, 1] = (4 * s2)[case == 3]
        z = mean + rng.standard_normal((j, 2))
        result = em_fit(z, ModelSpec(k=2))
        assert result.converged
        mu = [np.asarray(m)[0] for m in result.params.mu]
        assert abs(mu[1][1] - 4.0) < 0.2
        assert abs(mu[2][0] - 4.0) < 0.2
        assert abs(mu[3][0] - 4.0) < 0.2 and abs(mu[3][1] - 4.0) < 0.2
        masses = [float(np.asarray(p)[0]) * n
                  for p, n in zip(result.params.pi, (1, 2, 2, 4))]
        np.testing.assert_allclose(masses, pis, atol=0.02)
        assert validate_params(ModelSpec(k=2), result.params) == []

    def test_trace_is_non_decreasing_off_projection(self):
        rng = np.random.default_rng(17)
        z = rng.normal(scale=1.8, size=(3000, 2))
        z[:80] += np.array([3.0, 3.0])
        result = em_fit(z, ModelSpec(k=2))
        trace = result.loglik_trace
        projected = set(result.projection_trace)
        for i in range(1, len(trace)):
            if i not in projected:
                assert trace[i] - trace[i - 1] >= -1e-8 * (abs(trace[i - 1]) + 1.0)

    def test_pure_null_data_gets_little_alternative_mass(self):
        rng = np.random.default_rng(88)
        z = rng.standard_normal((10_000, 2))
        result = em_fit(z, ModelSpec(k=2))
        alt_mass = sum(float(np.asarray(p).sum()) * n
                       for p, n in list(zip(result.params.pi, (1, 2, 2, 4)))[1:])
        assert alt_mass < 0.05

    def test_explicit_initialisation_is_used(self):
        rng = np.random.default_rng(9)
        z = rng.standard_normal((500, 2))
        init = make_params(
            mu=[[[0.0, 0.0]], [[0.0, 2.0]], [[2.0, 0.0]], [[2.0, 2.0]]],
            pi=[[0.85], [0.03], [0.03], [0.0075]],
        )
        result = em_fit(z, ModelSpec(k=2),
                        FitOptions(init=init, max_iterations=1))
        assert result.iterations == 1
        assert not result.converged

    def test_too_few_rows_rejected(self):
        with pytest.raises(ValueError):
            em_fit(np.zeros((3, 2)), ModelSpec(k=2))

    def test_joint_sign_flip_equivariance(self):
        rng = np.random.default_rng(55)
        z = rng.normal(scale=1.5, size=(4000, 2))
        z[:100] += np.array([3.0, 2.5])
        a = em_fit(z, ModelSpec(k=2))
        b = em_fit(-z, ModelSpec(k=2))
        for mb_a, mb_b in zip(a.params.mu, b.params.mu):
            np.testing.assert_allclose(np.asarray(mb_a), np.asarray(mb_b),
                                       atol=1e-8)
        for pb_a, pb_b in zip(a.params.pi, b.params.pi):
            np.testing.assert_allclose(np.asarray(pb_a), np.asarray(pb_b),
                                       atol=1e-10)


class TestInitializeParams:
    def test_constant_zero_column_floored(self):
        rng = np.random.default_rng(2)
        z = np.column_stack([np.zeros(200), rng.standard_normal(200)])
        params = initialize_params(z, ModelSpec(k=2))
        for b in (2, 3):  # patterns with a non-zero first dimension
            assert np.all(np.asarray(params.mu[b])[:, 0] == 1.0)

    def test_cell_count_and_weights(self):
        rng = np.random.default_rng(3)
        z = rng.standard_normal((500, 2))
        params = initialize_params(z, ModelSpec(k=2))
        assert len(params.pi) == 4
        assert float(np.asarray(params.pi[0])[0]) == pytest.approx(0.90)
        per_cell = 0.10 / 3
        assert float(np.asarray(params.pi[1])[0]) == pytest.approx(per_cell / 2)
        assert float(np.asarray(params.pi[3])[0]) == pytest.approx(per_cell / 4)
        total = sum(float(np.asarray(p).sum()) * n
                    for p, n in zip(params.pi, (1, 2, 2, 4)))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_single_class_cells_anchor_high(self):
        rng = np.random.default_rng(4)
        z = rng.normal(scale=2.0, size=(5000, 2))
        params = initialize_params(z, ModelSpec(k=2))
        want = np.quantile(np.abs(z[:, 1]), 0.999)
        assert np.asarray(params.mu[1])[0, 1] == pytest.approx(max(want, 1.0))

    def test_deterministic_across_calls(self):
        rng = np.random.default_rng(5)
        z = rng.standard_normal((300, 2))
        a = initialize_params(z, ModelSpec(k=2), seed=0)
        b = initialize_params(z, ModelSpec(k=2), seed=99)
        for xa, xb in zip(a.mu, b.mu):
            np.testing.assert_array_equal(np.asarray(xa), np.asarray(xb))
        for xa, xb in zip(a.pi, b.pi):
            np.testing.assert_array_equal(np.asarray(xa), np.asarray(xb))

    def test_valid_for_model(self):
        rng = np.random.default_rng(6)
        z = rng.standard_normal((400, 3))
        spec = ModelSpec(k=3, m_counts=(1, 2, 1, 2, 1, 2, 1, 2))
        assert validate_params(spec, initialize_params(z, spec)) == []


class TestEstimateCorrelation:
    def test_identical_columns_give_one(self):
        rng = np.random.default_rng(7)
        col = rng.standard_normal(100)
        assert estimate_correlation(np.column_stack([col, col])) == pytest.approx(1.0)

    def test_independent_columns_near_zero(self):
        rng = np.random.default_rng(8)
        z = rng.standard_normal((100_000, 2))
        assert abs(estimate_correlation(z)) < 0.02

    def test_known_correlation_recovered(self):
        rng = np.random.default_rng(9)
        rho = 0.1
        chol = np.linalg.cholesky(np.array([[1.0, rho], [rho, 1.0]]))
        z = rng.standard_normal((100_000, 2)) @ chol.T
        assert 0.08 <= estimate_correlation(z) <= 0.12

    def test_truncation_drops_extreme_rows(self):
        rng = np.random.default_rng(10)
        z = rng.standard_normal((5000, 2))
        z[:50] = 9.0  # pathological corner that would drag the estimate up
        full = estimate_correlation(z)
        trimmed = estimate_correlation(z, truncation=5.0)
        assert abs(trimmed) < abs(full)

    def test_errors(self):
        rng = np.random.default_rng(11)
        with pytest.raises(ValueError):
            estimate_correlation(rng.standard_normal((100, 3)))
        with pytest.raises(ValueError):
            estimate_correlation(rng.standard_normal((5, 2)))
        with pytest.raises(ValueError):
            estimate_correlation(np.column_stack(
                [np.ones(100), rng.standard_normal(100)]))


class TestSymmetrize:
    def test_balanced_input_unchanged(self):
        rng = np.random.default_rng(12)
        z = rng.standard_normal((2000, 2))
        out, flags = symmetrize(z)
        np.testing.assert_array_equal(out.z, z)
        assert not flags.any()

    def test_one_sided_input_rebalanced(self):
        rng = np.random.default_rng(13)
        z = np.abs(rng.normal(scale=2.0, size=(10_000, 2)))
        out, flags = symmetrize(z)
        assert flags.any()
        for dim in range(2):
            big = np.abs(out.z[:, dim]) > 1.0
            frac = (out.z[big, dim] > 0).mean()
            assert 0.45 <= frac <= 0.55

    def test_flags_are_an_involution(self):
        rng = np.random.default_rng(14)
        z = np.abs(rng.normal(scale=2.0, size=(500, 2)))
        out, flags = symmetrize(z)
        restored = out.z.copy()
        restored[flags] *= -1.0
        np.testing.assert_array_equal(restored, z)

    def test_deterministic_in_seed(self):
        rng = np.random.default_rng(15)
        z = np.abs(rng.normal(scale=2.0, size=(1000, 2)))
        _, f1 = symmetrize(z, seed=5)
        _, f2 = symmetrize(z, seed=5)
        _, f3 = symmetrize(z, seed=6)
        np.testing.assert_array_equal(f1, f2)
        assert not np.array_equal(f1, f3)
