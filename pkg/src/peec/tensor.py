"""Dense matrix helpers and a reproducible random source.

Matrices are plain ``numpy.ndarray`` objects of dtype float64.  The helpers
here add the two guarantees the rest of the package relies on: shape errors
that name both operands, and a refusal to hand back non-finite values.

The random source is SplitMix64 used in counter mode, so that a block of ``n``
draws can be produced in one vectorised step and any other language can
replay the exact same stream::

    state_i = seed + (i + 1) * 0x9E3779B97F4A7C15      (mod 2**64)
    z       = state_i
    z       = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z       = (z ^ (z >> 27)) * 0x94D049BB133111EB
    out_i   = z ^ (z >> 31)

Uniform doubles are ``(out >> 11) * 2**-53`` in ``[0, 1)``.  Normals use the
cosine branch of Box-Muller on two consecutive uniforms.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


class ShapeError(ValueError):
    """Raised when operand shapes do not conform."""


class NonFiniteError(ArithmeticError):
    """Raised when an operation would produce NaN or infinity."""


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def _quiet():
    # overflow surfaces as NonFiniteError from check_finite, not as a warning
    return np.errstate(over="ignore", invalid="ignore")


def check_finite(m: np.ndarray, what: str = "result") -> np.ndarray:
    if not np.all(np.isfinite(m)):
        raise NonFiniteError(f"{what} contains non-finite values")
    return m


def _same_shape(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shape mismatch {a.shape} vs {b.shape}")
    with _quiet():
        return check_finite(a @ b, "matmul")


def add(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    _same_shape(a, b, "add")
    with _quiet():
        return check_finite(a + b, "add")


def sub(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    _same_shape(a, b, "sub")
    with _quiet():
        return check_finite(a - b, "sub")


def hadamard(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    _same_shape(a, b, "hadamard")
    with _quiet():
        return check_finite(a * b, "hadamard")


def scale(a, s: float) -> np.ndarray:
    with _quiet():
        return check_finite(as_matrix(a) * float(s), "scale")


def transpose(a) -> np.ndarray:
    return as_matrix(a).T.copy()


def row_select(a, rows) -> np.ndarray:
    a = as_matrix(a)
    rows = np.asarray(rows, dtype=np.intp)
    if rows.size and (rows.min() < 0 or rows.max() >= a.shape[0]):
        raise IndexError(f"row_select: index out of range for {a.shape[0]} rows")
    return a[rows]


_REDUCERS = {"mean": np.mean, "sum": np.sum, "min": np.min, "max": np.max}


def col_reduce(a, how: str = "mean") -> np.ndarray:
    """Reduce each column to a scalar; returns a 1-D array of length cols."""
    try:
        fn = _REDUCERS[how]
    except KeyError:
        raise ValueError(f"unknown reduction {how!r}") from None
    return fn(as_matrix(a), axis=0)


def argmax_rows(a) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. ties go to the lowest index
    return np.argmax(as_matrix(a), axis=1)


def splitmix64(values) -> np.ndarray:
    """Apply the SplitMix64 output mix to an array of uint64 states."""
    z = np.asarray(values, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed: fold each key into the parent via SplitMix64."""
    s = seed & _MASK64
    for k in keys:
        mixed = int(splitmix64(np.uint64((k * 0x9E3779B97F4A7C15 + 1) & _MASK64)))
        s = int(splitmix64(np.uint64(s ^ mixed)))
    return s


class RandomSource:
    """Counter-mode SplitMix64 stream.  Single owner; derive children with
    :meth:`child` rather than sharing one instance between workers."""

    algorithm = "splitmix64-counter"

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.counter = 0

    def raw(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + 1 + n, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self.seed) + idx * _GOLDEN
        self.counter += n
        return splitmix64(states)

    def uniform(self, size) -> np.ndarray:
        n = int(np.prod(size))
        u = (self.raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return u.reshape(size)

    def normal(self, size) -> np.ndarray:
        n = int(np.prod(size))
        u = self.uniform(2 * n)
        u1 = 1.0 - u[0::2]  # (0, 1]
        u2 = u[1::2]
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return z.reshape(size)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uniform(n), kind="stable")

    def child(self, key: int) -> "RandomSource":
        return RandomSource(derive_seed(self.seed, key))


def rand_uniform(rs: RandomSource, rows: int, cols: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    if not lo < hi:
        raise ValueError(f"rand_uniform: need lo < hi, got lo={lo}, hi={hi}")
    return lo + (hi - lo) * rs.uniform((rows, cols))


def rand_normal(rs: RandomSource, rows: int, cols: int, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
    if not std > 0:
        raise ValueError(f"rand_normal: need std > 0, got {std}")
    return mean + std * rs.normal((rows, cols))
