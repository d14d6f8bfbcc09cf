"""Random ATSP instances under a distance-precision control knob.

Off-diagonal entries of the cost matrix are drawn independently and
uniformly from the integers ``{0, .., R-1}`` where ``R = round(10**digits)``.
The fraction of distinct entries among the ``n**2 - n`` off-diagonal cells
is the quantity all downstream transition measurements are organized
around; this module provides its exact expectation, its large-n limit, and
the empirical count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Reserved cost for forbidden arcs (the diagonal, plus any arc priced out by
# search constraints).  Strictly larger than any achievable tour cost; all
# cost arithmetic saturates here instead of overflowing int64.
FORBIDDEN: int = 1 << 62

# Identifies the sampling scheme. Bump if the key derivation, the rejection
# policy, or the bit generator ever changes: matrices are a pure function of
# (seed, n, digits, index) only within one scheme version.
GENERATOR_SCHEME = "philox4x64/splitmix64/masked-rejection/v1"

_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1ED4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def digits_to_range(digits: float) -> int:
    """Integer range R for a (possibly fractional) digit count, rounding half up."""
    if not math.isfinite(digits) or digits <= 0:
        raise ValueError(f"digits must be a positive finite number, got {digits}")
    return int(math.floor(10.0**digits + 0.5))


def effective_digits(digits: float, n: int) -> float:
    """Digits rescaled by problem size: digits / log10(n)."""
    return digits / math.log10(n)


def rescale(beta: float, n: int, beta_c: float) -> float:
    """Finite-size rescaling (beta - beta_c) * log10(n) of the effective digits."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    return (beta - beta_c) * math.log10(n)


@dataclass(frozen=True)
class InstanceSpec:
    """Identity of one random instance: (n, digits, seed, index) fixes the matrix.

    ``index`` selects an independent substream, so an ensemble over indexes
    can be generated in any order, or concurrently, with identical results.
    """

    n: int
    digits: float
    seed: int
    index: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        if not math.isfinite(self.digits) or self.digits <= 0:
            raise ValueError(f"digits must be positive and finite, got {self.digits!r}")
        if self.index < 0:
            raise ValueError(f"index must be nonnegative, got {self.index}")
        r = digits_to_range(self.digits)
        if self.n * (r - 1) >= FORBIDDEN:
            raise ValueError(
                f"range {r} too large: worst-case tour cost would reach the "
                f"forbidden-arc sentinel"
            )

    @property
    def range_size(self) -> int:
        return digits_to_range(self.digits)

    @property
    def beta(self) -> float:
        return effective_digits(self.digits, self.n)


@dataclass
class DistanceMatrix:
    """Integer cost matrix with a forbidden diagonal.

    ``entries`` is an ``n x n`` int64 array; every off-diagonal cell holds a
    cost in ``[0, range_size - 1]`` and the diagonal holds ``FORBIDDEN``.
    ``range_size``/``digits``/``seed``/``index`` are provenance and may be
    absent on hand-built matrices.
    """

    entries: np.ndarray
    range_size: int | None = None
    digits: float | None = None
    seed: int | None = None
    index: int | None = None

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def offdiag_count(self) -> int:
        return self.n * self.n - self.n

    def offdiag_values(self) -> np.ndarray:
        m = ~np.eye(self.n, dtype=bool)
        return self.entries[m]

    def validate(self) -> None:
        e = self.entries
        if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape[0] < 2:
            raise ValueError(f"entries must be a square matrix with n >= 2, got shape {e.shape}")
        if e.dtype != np.int64:
            raise ValueError(f"entries must be int64, got {e.dtype}")
        if not (np.diag(e) == FORBIDDEN).all():
            raise ValueError("diagonal must hold the forbidden-arc sentinel")
        off = self.offdiag_values()
        if off.min() < 0:
            raise ValueError("negative off-diagonal cost")
        if self.range_size is not None and off.max() > self.range_size - 1:
            raise ValueError(f"off-diagonal cost exceeds range {self.range_size}")

    @classmethod
    def from_offdiagonal(
        cls, costs, range_size: int | None = None, digits: float | None = None
    ) -> "DistanceMatrix":
        """Build from a square array-like; the diagonal is overwritten with FORBIDDEN."""
        e = np.array(costs, dtype=np.int64)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {e.shape}")
        np.fill_diagonal(e, FORBIDDEN)
        m = cls(entries=e, range_size=range_size, digits=digits)
        m.validate()
        return m


@dataclass
class PrecisionStats:
    """Distinct-value statistics of one matrix.

    ``rescaled`` is ``(beta - beta_c) * log10(n)`` for the beta_c supplied by
    the caller; ``beta`` and ``rescaled`` are NaN when the matrix carries no
    digit provenance.
    """

    offdiag_count: int
    distinct_fraction: float
    beta: float
    rescaled: float


def _stream_key(spec: InstanceSpec) -> np.ndarray:
    b_bits = int(np.float64(spec.digits).view(np.uint64))
    z = 0
    for word in (spec.seed & _MASK64, spec.n, b_bits, spec.index):
        z = _splitmix64(z ^ word)
    k0 = _splitmix64(z ^ 0xA5A5A5A5A5A5A5A5)
    k1 = _splitmix64(z ^ 0x5A5A5A5A5A5A5A5A)
    return np.array([k0, k1], dtype=np.uint64)


def _uniform_ints(bitgen: np.random.Philox, count: int, r: int) -> np.ndarray:
    """``count`` unbiased draws from [0, r-1] by masked rejection on raw 64-bit words."""
    mask = (1 << (r - 1).bit_length()) - 1
    out = np.empty(count, dtype=np.int64)
    filled = 0
    while filled < count:
        # expected demand plus slack; any fixed policy keeps the stream reproducible
        want = ((count - filled) * (mask + 1)) // r + 16
        raw = bitgen.random_raw(want)
        vals = (raw & np.uint64(mask)).astype(np.int64)
        good = vals[vals < r]
        take = min(good.size, count - filled)
        out[filled : filled + take] = good[:take]
        filled += take
    return out


def generate(spec: InstanceSpec) -> DistanceMatrix:
    """Draw the instance identified by ``spec``.

    Every off-diagonal entry is independent and exactly uniform on
    ``[0, range_size - 1]``; the diagonal is FORBIDDEN.  The same spec always
    reproduces the same matrix bit for bit, and specs differing only in
    ``index`` use independent substreams.
    """
    n, r = spec.n, spec.range_size
    entries = np.full((n, n), FORBIDDEN, dtype=np.int64)
    if r > 1:
        bitgen = np.random.Philox(key=_stream_key(spec))
        values = _uniform_ints(bitgen, n * n - n, r)
    else:
        values = np.zeros(n * n - n, dtype=np.int64)
    entries[~np.eye(n, dtype=bool)] = values  # row-major off-diagonal order
    return DistanceMatrix(
        entries=entries, range_size=r, digits=spec.digits, seed=spec.seed, index=spec.index
    )


def expected_distinct_fraction(n: int, r: int) -> float:
    """Expected fraction of distinct values among the n**2 - n off-diagonal cells.

    Exact bin-ball expectation R*(1 - (1 - 1/R)**M)/M with M = n**2 - n,
    evaluated through log1p/expm1 so it stays accurate for large M and R.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if r < 1:
        raise ValueError(f"range must be >= 1, got {r}")
    m = n * n - n
    if r == 1:
        return 1.0 / m  # one bin: a single distinct value
    # (1 - 1/R)**M = exp(M * log1p(-1/R))
    return -r * math.expm1(m * math.log1p(-1.0 / r)) / m


def asymptotic_distinct_fraction(x: float) -> float:
    """Large-n limit of the distinct fraction at rescaled coordinate x.

    Evaluates 10**x * (1 - exp(-10**-x)) as (1 - exp(-t))/t with t = 10**-x,
    which is monotone in x and tends to 0 and 1 at the two ends.
    """
    if math.isnan(x):
        raise ValueError("x must not be NaN")
    try:
        t = 10.0 ** (-x)
    except OverflowError:
        return 0.0
    if t == 0.0:
        return 1.0
    if math.isinf(t):
        return 0.0
    return -math.expm1(-t) / t


def empirical_distinct_fraction(d: DistanceMatrix, beta_c: float = 1.0) -> PrecisionStats:
    """Measured distinct fraction of ``d``, with the rescaled coordinate at ``beta_c``."""
    m = d.offdiag_count
    rho = np.unique(d.offdiag_values()).size / m
    if d.digits is not None:
        beta = effective_digits(d.digits, d.n)
        x = rescale(beta, d.n, beta_c)
    else:
        beta = math.nan
        x = math.nan
    return PrecisionStats(offdiag_count=m, distinct_fraction=rho, beta=beta, rescaled=x)


def write_instance(d: DistanceMatrix, path) -> None:
    """Write the text instance format: header line, then n rows with -1 on the diagonal."""
    if d.range_size is None or d.digits is None:
        raise ValueError("matrix lacks range/digits provenance required by the file header")
    seed = d.seed if d.seed is not None else 0
    lines = [f"ATSP {d.n} {d.range_size} {seed} {d.digits!r}"]
    for i in range(d.n):
        row = d.entries[i].tolist()
        row[i] = -1
        lines.append(" ".join(str(v) for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_instance(path) -> DistanceMatrix:
    """Read the text instance format back; exact inverse of write_instance."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[0] != "ATSP":
            raise ValueError(f"{path}: malformed header")
        try:
            n, r, seed = int(header[1]), int(header[2]), int(header[3])
            digits = float(header[4])
        except ValueError as exc:
            raise ValueError(f"{path}: malformed header field: {exc}") from None
        if n < 2:
            raise ValueError(f"{path}: n must be >= 2, got {n}")
        if r != digits_to_range(digits):
            raise ValueError(f"{path}: range {r} inconsistent with digits {digits}")
        entries = np.full((n, n), FORBIDDEN, dtype=np.int64)
        for i in range(n):
            parts = fh.readline().split()
            if len(parts) != n:
                raise ValueError(f"{path}: row {i} has {len(parts)} entries, expected {n}")
            row = np.array([int(p) for p in parts], dtype=np.int64)
            if row[i] != -1:
                raise ValueError(f"{path}: row {i} diagonal must be -1")
            if ((row < 0) & (np.arange(n) != i)).any() or (row >= r).any():
                raise ValueError(f"{path}: row {i} has costs outside [0, {r - 1}]")
            entries[i] = row
        entries[np.arange(n), np.arange(n)] = FORBIDDEN
    return DistanceMatrix(entries=entries, range_size=r, digits=digits, seed=seed)
