"""Association configurations for composite null testing.

A set of K z-statistics is classified by a sign vector in {-1, 0, 1}^K that
records, per dimension, whether an effect is absent or present with a given
direction.  There are 3^K such configurations.  The composite null is the
subset where at least one dimension is zero; for the replication variant the
alternative is narrowed to configurations whose signs agree across all
dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

VARIANTS = ("base", "correlated", "replication")

# 3^12 = 531441 configurations; enumeration beyond this is refused.
MAX_DIMENSION = 12

# base-3 digit -> sign, chosen so the all-zero configuration comes first
_DIGIT_SIGNS = (0, -1, 1)


def binary_representation(signs) -> int:
    """Encode which dimensions of a sign vector carry an effect.

    Dimension 1 maps to the most significant bit: (1, 0, 1) -> 0b101 = 5.
    The magnitude parameters and mixing proportions of the mixture model are
    shared across all configurations with the same encoding.
    """
    rep = 0
    for s in signs:
        if s not in (-1, 0, 1):
            raise ValueError(f"sign entries must be -1, 0, or 1, got {s!r}")
        rep = (rep << 1) | (1 if s != 0 else 0)
    return rep


@dataclass(frozen=True)
class Config:
    """One association configuration.

    Attributes:
        signs: per-dimension effect directions, entries in {-1, 0, 1}.
        binary_rep: which-dimensions encoding from binary_representation().
        index: position of this configuration in its ConfigSet.
    """

    signs: tuple[int, ...]
    binary_rep: int
    index: int

    @property
    def k(self) -> int:
        return len(self.signs)


@dataclass(frozen=True)
class ConfigSet:
    """All 3^K configurations for one model variant, in a fixed order.

    The order is deterministic: configuration ``index`` reads its signs off
    the base-3 digits of ``index`` with digit values (0, -1, 1) and dimension
    1 as the most significant digit.  Index 0 is always the all-zero
    configuration, and the all-nonzero configurations come last within any
    fixed pattern of zero dimensions.
    """

    k: int
    variant: str
    configs: tuple[Config, ...]
    null_indices: tuple[int, ...]
    alt_indices: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.configs)

    @cached_property
    def sign_matrix(self) -> np.ndarray:
        """(L, K) int8 array of configuration signs, row l = configuration l."""
        out = np.array([c.signs for c in self.configs], dtype=np.int8)
        out.setflags(write=False)
        return out

    @cached_property
    def binary_reps(self) -> np.ndarray:
        """(L,) array of which-dimensions encodings."""
        out = np.array([c.binary_rep for c in self.configs], dtype=np.int64)
        out.setflags(write=False)
        return out

    @cached_property
    def null_mask(self) -> np.ndarray:
        """(L,) boolean array, True for configurations in the composite null."""
        out = np.zeros(len(self.configs), dtype=bool)
        out[list(self.null_indices)] = True
        out.setflags(write=False)
        return out

    @cached_property
    def n_per_rep(self) -> np.ndarray:
        """(2^K,) counts of configurations per which-dimensions encoding.

        Entry b equals 2**popcount(b): each effect dimension contributes a
        sign choice.
        """
        out = np.zeros(2**self.k, dtype=np.int64)
        for c in self.configs:
            out[c.binary_rep] += 1
        out.setflags(write=False)
        return out


def enumerate_configurations(k: int, variant: str = "base") -> ConfigSet:
    """Enumerate all 3^K sign configurations and split null from alternative.

    For the base and correlated variants the alternative is the single set of
    configurations with every dimension non-zero.  For the replication
    variant the alternative keeps only the two sign-concordant members of
    that set (all +1 or all -1); sign-discordant all-nonzero configurations
    fall back into the null.

    Raises ValueError for k < 2, k > MAX_DIMENSION, or an unknown variant.
    """
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise ValueError(f"k must be an integer, got {k!r}")
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if k > MAX_DIMENSION:
        raise ValueError(f"k must be at most {MAX_DIMENSION}, got {k}")
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if variant == "correlated" and k != 2:
        raise ValueError("the correlated variant is defined for k=2 only")

    configs = []
    for index in range(3**k):
        digits = []
        rem = index
        for _ in range(k):
            digits.append(rem % 3)
            rem //= 3
        # digits[] is least significant first; dimension 1 is most significant
        signs = tuple(_DIGIT_SIGNS[d] for d in reversed(digits))
        configs.append(Config(signs=signs, binary_rep=binary_representation(signs), index=index))

    full = 2**k - 1
    if variant == "replication":
        alt = tuple(
            c.index for c in configs if c.binary_rep == full and len(set(c.signs)) == 1
        )
    else:
        alt = tuple(c.index for c in configs if c.binary_rep == full)
    alt_set = set(alt)
    null = tuple(c.index for c in configs if c.index not in alt_set)
    return ConfigSet(
        k=k,
        variant=variant,
        configs=tuple(configs),
        null_indices=null,
        alt_indices=alt,
    )
