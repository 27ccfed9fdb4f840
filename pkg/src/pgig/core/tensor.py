# -*- coding: utf-8 -*-
"""
Dense tensor helpers and deterministic random sources for pgig.

Tensors are plain numpy float64 arrays of rank 1 or 2 (row-major). This
module provides:
- Construction with validation (rank, finiteness)
- Matrix-vector products with shape and overflow checks
- Reductions whose result does not depend on summation order
- A seeded random source with a documented Gaussian transform
"""

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np
import numpy.typing as npt

from pgig.utils.errors import ArgumentError, DimensionError, NumericError

Tensor = npt.NDArray[np.float64]
ArrayLike = Union[Tensor, Sequence[float], Sequence[Sequence[float]], float]

MAX_RANK = 2


def as_tensor(values: ArrayLike, name: str = "tensor") -> Tensor:
    """
    Build a validated float64 tensor (always a fresh copy).

    Args:
        values: Nested sequence or array
        name: Name used in error messages

    Returns:
        Tensor: C-contiguous float64 array of rank 1 or 2

    Raises:
        DimensionError: If the rank exceeds 2
        NumericError: If any value is NaN or infinite

    Example:
        >>> as_tensor([[1, -1]]).shape
        (1, 2)
    """
    array = np.array(values, dtype=np.float64, order="C", copy=True)
    if array.ndim == 0:
        array = array.reshape(1)
    if array.ndim > MAX_RANK:
        raise DimensionError(f"{name} has rank {array.ndim}, at most {MAX_RANK} supported",
                             array.shape)
    check_finite(array, name)
    return array


def check_finite(array: npt.NDArray[np.float64], step: str) -> None:
    """
    Raise NumericError if the array holds NaN or infinite values.

    Args:
        array: Values to check
        step: Name of the computation that produced them
    """
    if not np.all(np.isfinite(array)):
        bad = int(np.count_nonzero(~np.isfinite(array)))
        raise NumericError(f"{bad} non-finite value(s)", step=step)


def matvec(w: Tensor, x: Tensor) -> Tensor:
    """
    Matrix-vector product w @ x.

    Args:
        w: Rank-2 tensor (out x in)
        x: Rank-1 tensor (in)

    Returns:
        Tensor: Rank-1 tensor (out)

    Raises:
        DimensionError: If ranks or inner dimensions disagree
        NumericError: If the product overflows

    Example:
        >>> matvec(as_tensor([[2, 3], [4, 5]]), as_tensor([1, 1]))
        array([5., 9.])
    """
    if w.ndim != 2 or x.ndim != 1:
        raise DimensionError("matvec expects a matrix and a vector", w.shape, x.shape)
    if w.shape[1] != x.shape[0]:
        raise DimensionError("inner dimensions differ", w.shape, x.shape)

    try:
        with np.errstate(over="raise", invalid="raise"):
            result: Tensor = w @ x
    except FloatingPointError as e:
        raise NumericError(f"overflow in matvec: {e}", step="matvec") from e

    return result


# ---------------------------------------------------------------------------
# Reductions
#
# Summation order is fixed by using an exactly rounded sum (math.fsum): the
# result is the float nearest to the exact sum, so it is identical for any
# permutation of the inputs.
# ---------------------------------------------------------------------------


def fixed_sum(values: Iterable[float]) -> float:
    """Exactly rounded sum; independent of element order."""
    return math.fsum(np.asarray(values, dtype=np.float64).ravel().tolist())


def fixed_mean(values: Iterable[float]) -> float:
    """Mean built on fixed_sum."""
    flat = np.asarray(values, dtype=np.float64).ravel()
    if flat.size == 0:
        raise ArgumentError("mean of an empty tensor")
    return fixed_sum(flat) / flat.size


def fixed_variance(values: Iterable[float], ddof: int = 0) -> float:
    """
    Two-pass variance built on fixed_sum.

    Args:
        values: Samples
        ddof: Delta degrees of freedom (0: population, 1: sample)
    """
    flat = np.asarray(values, dtype=np.float64).ravel()
    if flat.size - ddof <= 0:
        raise ArgumentError(f"variance needs more than {ddof} value(s)")
    mu = fixed_mean(flat)
    return fixed_sum((flat - mu) ** 2) / (flat.size - ddof)


def _column_fsum(stack: Tensor) -> Tensor:
    return np.array([math.fsum(column) for column in stack.T.tolist()], dtype=np.float64)


def anchored_mean(stack: Tensor) -> Tensor:
    """
    Column means of a (samples x features) stack.

    Each column is summed as deviations from its minimum with an exactly
    rounded sum, so identical rows reproduce the row bit for bit and the
    result does not depend on row order.

    Args:
        stack: Rank-2 tensor, one sample per row

    Returns:
        Tensor: Rank-1 tensor of column means
    """
    if stack.ndim != 2 or stack.shape[0] == 0:
        raise DimensionError("anchored_mean expects a non-empty sample stack", stack.shape)
    anchor = stack.min(axis=0)
    return anchor + _column_fsum(stack - anchor) / stack.shape[0]


def anchored_variance(stack: Tensor, ddof: int = 1) -> Tensor:
    """
    Column variances of a (samples x features) stack.

    Identical rows give exactly zero.
    """
    n = stack.shape[0]
    if n - ddof <= 0:
        return np.zeros(stack.shape[1], dtype=np.float64)
    mu = anchored_mean(stack)
    return _column_fsum((stack - mu) ** 2) / (n - ddof)


# ---------------------------------------------------------------------------
# Random numbers
# ---------------------------------------------------------------------------

UINT64_MAX = 2**64 - 1


@dataclass
class RandomSource:
    """
    Seeded pseudorandom stream.

    Uniform reals come from numpy's PCG64 bit generator (``random()``,
    53-bit resolution on [0, 1)). Gaussian draws use the basic Box-Muller
    transform on pairs of those uniforms, so a stream is fully determined
    by (seed, algorithm). A RandomSource has a single owner; parallel
    consumers derive children with spawn().
    """

    seed: int
    algorithm: str = "PCG64+BoxMuller"
    _generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) <= UINT64_MAX:
            raise ArgumentError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.algorithm != "PCG64+BoxMuller":
            raise ArgumentError(f"unsupported random algorithm: {self.algorithm}")
        self.seed = int(self.seed)
        self._generator = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, n: int, low: float = 0.0, high: float = 1.0) -> Tensor:
        """n uniform draws on [low, high)."""
        if n < 0:
            raise ArgumentError(f"sample count must be >= 0, got {n}")
        u: Tensor = self._generator.random(n)
        if low == 0.0 and high == 1.0:
            return u
        return low + (high - low) * u

    def gaussian(self, mu: float, sigma: float, n: int) -> Tensor:
        """n Gaussian draws N(mu, sigma^2); see the module-level gaussian()."""
        return gaussian(self, mu, sigma, n)

    def integers(self, high: int, n: int) -> npt.NDArray[np.int64]:
        """n integers uniform on [0, high)."""
        if high < 1:
            raise ArgumentError(f"upper bound must be >= 1, got {high}")
        return self._generator.integers(0, high, size=n, dtype=np.int64)

    def permutation(self, n: int) -> npt.NDArray[np.int64]:
        """Random permutation of range(n)."""
        return self._generator.permutation(n).astype(np.int64)

    def spawn(self, key: int) -> "RandomSource":
        """
        Derive an independent child stream.

        The child seed depends only on (seed, key), not on how much of the
        parent stream has been consumed.
        """
        sequence = np.random.SeedSequence(self.seed, spawn_key=(int(key),))
        child_seed = int(sequence.generate_state(1, dtype=np.uint64)[0])
        return RandomSource(child_seed, self.algorithm)


def gaussian(source: RandomSource, mu: float, sigma: float, n: int) -> Tensor:
    """
    Draw n values from N(mu, sigma^2) with the Box-Muller transform.

    For each pair (u1, u2) of uniforms, r = sqrt(-2 ln(1 - u1)) and the
    pair (r cos 2 pi u2, r sin 2 pi u2) is emitted in that order; an odd
    trailing draw is discarded.

    Args:
        source: Random stream to consume
        mu: Mean
        sigma: Standard deviation (>= 0)
        n: Number of draws (>= 1)

    Returns:
        Tensor: Rank-1 tensor of n draws

    Raises:
        ArgumentError: If sigma < 0 or n < 1

    Example:
        >>> gaussian(RandomSource(1), 0.3, 0.0, 4)
        array([0.3, 0.3, 0.3, 0.3])
    """
    if sigma < 0:
        raise ArgumentError(f"sigma must be >= 0, got {sigma}")
    if n < 1:
        raise ArgumentError(f"n must be >= 1, got {n}")

    pairs = (n + 1) // 2
    u1 = 1.0 - source.uniform(pairs)  # (0, 1], keeps log finite
    u2 = source.uniform(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2

    z = np.empty(2 * pairs, dtype=np.float64)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)

    return mu + sigma * z[:n]
