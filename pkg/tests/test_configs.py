"""Sign-configuration enumeration and binary pattern encoding."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from compnull.configs import (
    MAX_DIMENSION,
    binary_representation,
    enumerate_configurations,
)


class TestBinaryRepresentation:
    def test_second_dimension_only(self):
        assert binary_representation((0, 1)) == 1

    def test_all_zero(self):
        assert binary_representation((0, 0)) == 0

    def test_three_dims_outer_pair(self):
        assert binary_representation((1, 0, 1)) == 5

    def test_sign_does_not_matter(self):
        assert binary_representation((-1, 1)) == binary_representation((1, 1))

    @given(st.lists(st.sampled_from([-1, 0, 1]), min_size=2, max_size=6))
    def test_bit_set_exactly_for_nonzero_dims(self, signs):
        b = binary_representation(tuple(signs))
        k = len(signs)
        for dim, s in enumerate(signs):
            bit = (b >> (k - 1 - dim)) & 1
            assert bit == (1 if s != 0 else 0)


class TestEnumerationBase:
    def test_two_dim_counts(self):
        cs = enumerate_configurations(2, "base")
        assert len(cs.configs) == 9
        null_signs = {cs.configs[i].signs for i in cs.null_indices}
        assert null_signs == {(0, 0), (0, -1), (0, 1), (-1, 0), (1, 0)}
        alt_signs = {cs.configs[i].signs for i in cs.alt_indices}
        assert alt_signs == {(-1, -1), (-1, 1), (1, -1), (1, 1)}

    def test_two_dim_pattern_sizes(self):
        cs = enumerate_configurations(2, "base")
        assert cs.n_per_rep.tolist() == [1, 2, 2, 4]

    def test_three_dim_counts(self):
        cs = enumerate_configurations(3, "base")
        assert len(cs.configs) == 27
        assert len(cs.alt_indices) == 8
        for i in cs.alt_indices:
            assert cs.configs[i].binary_rep == 7
        by_signs = {c.signs: c for c in cs.configs}
        assert by_signs[(1, 1, 1)].binary_rep == 7

    def test_index_is_base_three_expansion(self):
        # digit order (0, -1, 1) with dimension 1 most significant
        digits = {0: 0, -1: 1, 1: 2}
        for k in (2, 3):
            cs = enumerate_configurations(k, "base")
            for cfg in cs.configs:
                expected = 0
                for s in cfg.signs:
                    expected = expected * 3 + digits[s]
                assert cfg.index == expected
                assert cs.configs[cfg.index] is cfg

    def test_sign_matrix_matches_configs(self):
        cs = enumerate_configurations(3, "base")
        assert cs.sign_matrix.shape == (27, 3)
        for cfg in cs.configs:
            assert tuple(cs.sign_matrix[cfg.index]) == cfg.signs

    def test_null_mask_partition(self):
        cs = enumerate_configurations(2, "base")
        assert cs.null_mask.sum() == 5
        assert sorted(list(cs.null_indices) + list(cs.alt_indices)) == list(range(9))


class TestEnumerationVariants:
    def test_replication_alternatives_are_sign_concordant(self):
        cs = enumerate_configurations(2, "replication")
        assert len(cs.configs) == 9
        alt_signs = {cs.configs[i].signs for i in cs.alt_indices}
        assert alt_signs == {(1, 1), (-1, -1)}
        assert len(cs.null_indices) == 7

    def test_replication_three_dims(self):
        cs = enumerate_configurations(3, "replication")
        alt_signs = {cs.configs[i].signs for i in cs.alt_indices}
        assert alt_signs == {(1, 1, 1), (-1, -1, -1)}

    def test_correlated_partitions_like_base(self):
        base = enumerate_configurations(2, "base")
        corr = enumerate_configurations(2, "correlated")
        assert [c.signs for c in corr.configs] == [c.signs for c in base.configs]
        assert list(corr.null_indices) == list(base.null_indices)

    def test_correlated_requires_two_dims(self):
        with pytest.raises(ValueError):
            enumerate_configurations(3, "correlated")


class TestValidation:
    def test_rejects_k_below_two(self):
        with pytest.raises(ValueError):
            enumerate_configurations(1, "base")

    def test_rejects_k_above_cap(self):
        with pytest.raises(ValueError):
            enumerate_configurations(MAX_DIMENSION + 1, "base")

    def test_rejects_unknown_variant(self):
        with pytest.raises(ValueError):
            enumerate_configurations(2, "bogus")

    def test_arrays_are_read_only(self):
        cs = enumerate_configurations(2, "base")
        with pytest.raises(ValueError):
            cs.sign_matrix[0, 0] = 9
        with pytest.raises(ValueError):
            cs.null_mask[0] = False
