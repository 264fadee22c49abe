"""Low-discrepancy candidate generation.

Implements the classic binary-expansion recursion for digital nets: point
n is the XOR of direction numbers selected by the set bits of n, so the
first one-dimensional points are 0.5, 0.25, 0.75, 0.125, ...

The direction-number table is generated at import time from primitive
polynomials over GF(2) enumerated in lexicographic order (degrees 1..8,
giving 53 supported dimensions including the radical-inverse first
dimension). Initial direction values beyond the forced m_1 = 1 come from
a fixed internal stream, so the base sequence is canonical for this
package. Above the table size a seeded stratified-uniform (Latin
hypercube) fallback keeps generation functional at region scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ValidationError
from .seeding import rng_for

_BITS = 52  # direction numbers as 52-bit integer fractions (exact in float64)
_MAX_POLY_DEGREE = 8
_TABLE_SEED_TAG = "sobol-direction-init"


def _poly_degree(p: int) -> int:
    return p.bit_length() - 1


def _polymod_mul(a: int, b: int, p: int, deg: int) -> int:
    """Carry-less product of a and b reduced modulo polynomial p."""
    result = 0
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a >> deg & 1:
            a ^= p
    return result


def _is_primitive(p: int) -> bool:
    """True iff p is a primitive polynomial over GF(2).

    Checks that x has multiplicative order 2^deg - 1 in GF(2)[x]/(p):
    x^(2^deg - 1) = 1 and x^((2^deg - 1)/q) != 1 for each prime factor q.
    """
    deg = _poly_degree(p)
    if deg < 1 or not p & 1:
        return False
    order = (1 << deg) - 1

    def poly_pow(exponent: int) -> int:
        result, base = 1, 2  # x
        while exponent:
            if exponent & 1:
                result = _polymod_mul(result, base, p, deg)
            base = _polymod_mul(base, base, p, deg)
            exponent >>= 1
        return result

    if poly_pow(order) != 1:
        return False
    factors = set()
    m, q = order, 2
    while q * q <= m:
        while m % q == 0:
            factors.add(q)
            m //= q
        q += 1
    if m > 1:
        factors.add(m)
    return all(poly_pow(order // q) != 1 for q in factors)


@lru_cache(maxsize=1)
def primitive_polynomials(max_degree: int = _MAX_POLY_DEGREE) -> tuple[int, ...]:
    """All primitive polynomials up to max_degree, ordered by (degree, value)."""
    polys = []
    for deg in range(1, max_degree + 1):
        for p in range(1 << deg | 1, 1 << (deg + 1), 2):
            if _is_primitive(p):
                polys.append(p)
    return tuple(polys)


@lru_cache(maxsize=1)
def _direction_table() -> np.ndarray:
    """Direction numbers v[d, j] as _BITS-bit integers, one row per dimension."""
    polys = primitive_polynomials()
    dims = 1 + len(polys)
    table = np.zeros((dims, _BITS), dtype=np.uint64)
    # dimension 0: radical inverse in base 2 (m_j = 1 for all j)
    for j in range(_BITS):
        table[0, j] = np.uint64(1) << np.uint64(_BITS - 1 - j)
    for d, poly in enumerate(polys, start=1):
        s = _poly_degree(poly)
        rng = rng_for(_TABLE_SEED_TAG, d)
        m = [0] * (_BITS + 1)
        m[1] = 1
        for j in range(2, s + 1):
            m[j] = int(rng.integers(0, 1 << (j - 1))) * 2 + 1  # odd, < 2^j
        for j in range(s + 1, _BITS + 1):
            value = m[j - s] ^ (m[j - s] << s)
            for i in range(1, s):
                if (poly >> (s - i)) & 1:
                    value ^= m[j - i] << i
            m[j] = value
        for j in range(1, _BITS + 1):
            table[d, j - 1] = np.uint64(m[j]) << np.uint64(_BITS - j)
    return table


SOBOL_MAX_DIM = 1 + len(primitive_polynomials())


@dataclass
class CandidateGenerator:
    """Seeded stream of points in the unit hypercube.

    Uses the digital low-discrepancy sequence with a seeded digital-shift
    scramble while the dimension fits the direction-number table, and a
    stratified-uniform fallback above it. Recreating a generator with the
    same (dim, seed) reproduces the same stream.
    """

    dim: int
    seed: int = 0
    scramble: bool = True
    scheme: str = field(init=False)
    _index: int = field(init=False, default=1)
    _shift: np.ndarray = field(init=False, repr=False, default=None)
    _rng: np.random.Generator = field(init=False, repr=False, default=None)

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("dimension must be >= 1")
        self.scheme = "low-discrepancy" if self.dim <= SOBOL_MAX_DIM else "stratified-uniform"
        self._rng = rng_for(self.seed, "candidate-stream", self.dim)
        if self.scheme == "low-discrepancy":
            if self.scramble:
                self._shift = self._rng.integers(
                    0, 1 << _BITS, size=self.dim, dtype=np.uint64
                )
            else:
                self._shift = np.zeros(self.dim, dtype=np.uint64)

    def take(self, count: int) -> np.ndarray:
        """Next ``count`` points, shape (count, dim), all within [0, 1)."""
        if count < 1:
            raise ValidationError("count must be >= 1")
        if self.scheme == "stratified-uniform":
            strata = np.empty((count, self.dim))
            for d in range(self.dim):
                perm = self._rng.permutation(count)
                strata[:, d] = (perm + self._rng.random(count)) / count
            return strata
        table = _direction_table()[: self.dim]
        indices = np.arange(self._index, self._index + count, dtype=np.uint64)
        x = np.zeros((count, self.dim), dtype=np.uint64)
        for j in range(int(indices[-1]).bit_length()):
            rows = (indices >> np.uint64(j)) & np.uint64(1) == 1
            x[rows] ^= table[:, j]
        self._index += count
        return (x ^ self._shift) * (1.0 / (1 << _BITS))


def generate_candidates(gen: CandidateGenerator, count: int) -> np.ndarray:
    return gen.take(count)
