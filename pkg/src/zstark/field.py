"""Prime field arithmetic used by the commitment and proof layers.

The field is F_p with p = 2^64 - 2^32 + 1.  The multiplicative group has
order p - 1 = 2^32 * (2^32 - 1), so radix-2 NTTs are available for every
power-of-two size up to 2^32.  Scalar helpers work on plain ints in
canonical form [0, p); the v_* functions are the same operations on
numpy uint64 arrays (32-bit limb products, so nothing ever needs more
than 64 bits per lane) and back the prover's hot paths.

Signed quantities (distances, interpolation results) are stored as
fixed-point integers encoded into the field as p - |k| for negatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

P = 0xFFFFFFFF00000001  # 2^64 - 2^32 + 1
GENERATOR = 7  # generates the full multiplicative group
TWO_ADICITY = 32
_EPSILON = (1 << 32) - 1  # 2^64 mod p
_U64 = np.uint64

HALF_P = P // 2


# ---------------------------------------------------------------------------
# Scalar operations
# ---------------------------------------------------------------------------

def f_add(a: int, b: int) -> int:
    s = a + b
    return s - P if s >= P else s


def f_sub(a: int, b: int) -> int:
    d = a - b
    return d + P if d < 0 else d


def f_mul(a: int, b: int) -> int:
    return a * b % P


def f_neg(a: int) -> int:
    return P - a if a else 0


def f_pow(a: int, e: int) -> int:
    return pow(a, e, P)


def f_inv(a: int) -> int:
    """Multiplicative inverse via Fermat; raises on zero."""
    if a == 0:
        raise ZeroDivisionError("0 has no inverse")
    return pow(a, P - 2, P)


def inv_many(values: list[int]) -> list[int]:
    """Batch inversion (Montgomery trick): one field inversion total."""
    n = len(values)
    prefix = [1] * (n + 1)
    for k, v in enumerate(values):
        if v == 0:
            raise ZeroDivisionError("0 has no inverse")
        prefix[k + 1] = prefix[k] * v % P
    acc = f_inv(prefix[n])
    out = [0] * n
    for k in range(n - 1, -1, -1):
        out[k] = prefix[k] * acc % P
        acc = acc * values[k] % P
    return out


@lru_cache(maxsize=None)
def root_of_unity(n: int) -> int:
    """Canonical generator of the order-n subgroup; n a power of two <= 2^32."""
    if n < 1 or n & (n - 1):
        raise ValueError(f"order must be a power of two, got {n}")
    if n > 1 << TWO_ADICITY:
        raise ValueError(f"no roots of unity of order {n}")
    return pow(GENERATOR, (P - 1) // n, P)


# ---------------------------------------------------------------------------
# Vectorized operations on uint64 arrays (canonical form, values < p)
# ---------------------------------------------------------------------------

def v_add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    s = a + b  # wraps mod 2^64; sum < 2p < 2^65 so a single wrap at most
    over = (s < a) | (s >= _U64(P))
    return np.where(over, s - _U64(P), s)


def v_sub(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a - b
    return np.where(a < b, d + _U64(P), d)


def v_neg(a: np.ndarray) -> np.ndarray:
    return np.where(a == 0, a, _U64(P) - a)


def v_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Lane-wise product mod p using 32-bit limbs.

    The 128-bit product hi:lo reduces as lo - hi_hi + hi_lo * (2^32 - 1),
    since 2^64 = 2^32 - 1 and 2^96 = -1 (mod p).
    """
    mask = _U64(0xFFFFFFFF)
    a_lo = a & mask
    a_hi = a >> _U64(32)
    b_lo = b & mask
    b_hi = b >> _U64(32)

    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi

    mid = lh + hl
    mid_carry = (mid < lh).astype(_U64)  # mid wrapped past 2^64

    lo = ll + ((mid & mask) << _U64(32))
    lo_carry = (lo < ll).astype(_U64)
    hi = hh + (mid >> _U64(32)) + (mid_carry << _U64(32)) + lo_carry

    hi_lo = hi & mask
    hi_hi = hi >> _U64(32)

    t = lo - hi_hi
    t -= (lo < hi_hi).astype(_U64) * _U64(_EPSILON)
    t2 = t + hi_lo * _U64(_EPSILON)
    t2 += (t2 < t).astype(_U64) * _U64(_EPSILON)
    return np.where(t2 >= _U64(P), t2 - _U64(P), t2)


def v_pow(a: np.ndarray, e: int) -> np.ndarray:
    result = np.ones_like(a)
    base = a.copy()
    while e:
        if e & 1:
            result = v_mul(result, base)
        base = v_mul(base, base)
        e >>= 1
    return result


def v_inv(a: np.ndarray) -> np.ndarray:
    if np.any(a == 0):
        raise ZeroDivisionError("0 has no inverse")
    if a.size <= 4096:
        # Montgomery batch inversion: one exponentiation total beats the
        # ~96 vector multiplies of a Fermat ladder until arrays get big
        # enough to amortize the per-element Python round trip.
        flat = inv_many([int(x) for x in a.reshape(-1)])
        return np.array(flat, dtype=np.uint64).reshape(a.shape)
    return v_pow(a, P - 2)


def mod_sum_rows(mat: np.ndarray) -> np.ndarray:
    """Column sums of a (c, n) field matrix, reduced mod p.

    Splitting into 32-bit halves keeps the partial sums exact in uint64
    for any realistic row count (c < 2^31).
    """
    lo = np.sum(mat & _U64(0xFFFFFFFF), axis=0, dtype=np.uint64)
    hi = np.sum(mat >> _U64(32), axis=0, dtype=np.uint64)
    out = np.empty(mat.shape[1], dtype=_U64)
    for k in range(mat.shape[1]):
        out[k] = ((int(hi[k]) << 32) + int(lo[k])) % P
    return out


# ---------------------------------------------------------------------------
# Evaluation domains and NTT
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvaluationDomain:
    """Multiplicative coset shift * <generator> of power-of-two size."""

    size: int
    generator: int
    shift: int = 1

    def __post_init__(self):
        if self.size < 1 or self.size & (self.size - 1):
            raise ValueError("domain size must be a power of two")
        if pow(self.generator, self.size, P) != 1:
            raise ValueError("generator order does not divide domain size")
        if self.size > 1 and pow(self.generator, self.size // 2, P) == 1:
            raise ValueError("generator order below domain size")

    @classmethod
    def of_size(cls, n: int, shift: int = 1) -> "EvaluationDomain":
        return cls(n, root_of_unity(n), shift)

    def point(self, k: int) -> int:
        return self.shift * pow(self.generator, k, P) % P

    def points(self) -> list[int]:
        out = []
        acc = self.shift % P
        for _ in range(self.size):
            out.append(acc)
            acc = acc * self.generator % P
        return out


@lru_cache(maxsize=None)
def _bit_reverse_index(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n, dtype=np.uint32)
    rev = np.zeros(n, dtype=np.uint32)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev.astype(np.int64)


@lru_cache(maxsize=None)
def _twiddles(n: int, generator: int) -> np.ndarray:
    out = np.empty(n, dtype=_U64)
    acc = 1
    for k in range(n):
        out[k] = acc
        acc = acc * generator % P
    return out


def _ntt_matrix(mat: np.ndarray, generator: int) -> np.ndarray:
    """In-order radix-2 NTT along the last axis of a (c, n) uint64 matrix."""
    n = mat.shape[-1]
    if n == 1:
        return mat.copy()
    powers = _twiddles(n, generator)
    out = mat[..., _bit_reverse_index(n)].copy()
    size = 2
    while size <= n:
        half = size // 2
        tw = powers[:: n // size][:half]
        view = out.reshape(out.shape[:-1] + (n // size, size))
        a = view[..., :half].copy()  # copy: the write below would alias it
        b = v_mul(view[..., half:], tw)
        view[..., :half] = v_add(a, b)
        view[..., half:] = v_sub(a, b)
        size *= 2
    return out


def ntt_mat(mat: np.ndarray, domain: EvaluationDomain) -> np.ndarray:
    """Evaluate rows of coefficients on the domain (coset-aware)."""
    work = mat
    if domain.shift != 1:
        work = v_mul(work, _twiddles(mat.shape[-1], domain.shift % P))
    return _ntt_matrix(work, domain.generator)


def intt_mat(mat: np.ndarray, domain: EvaluationDomain) -> np.ndarray:
    """Interpolate rows of evaluations over the domain back to coefficients."""
    n = mat.shape[-1]
    coeffs = _ntt_matrix(mat, f_inv(domain.generator))
    coeffs = v_mul(coeffs, np.full(n, f_inv(n), dtype=_U64))
    if domain.shift != 1:
        coeffs = v_mul(coeffs, _twiddles(n, f_inv(domain.shift % P)))
    return coeffs


def ntt(values: list[int], domain: EvaluationDomain) -> list[int]:
    """Coefficients -> evaluations at shift * g^k, k = 0..n-1."""
    if len(values) != domain.size:
        raise ValueError("length must equal domain size")
    arr = np.asarray(values, dtype=_U64).reshape(1, -1)
    return [int(x) for x in ntt_mat(arr, domain)[0]]


def intt(values: list[int], domain: EvaluationDomain) -> list[int]:
    """Evaluations on the domain -> coefficients (inverse of ntt)."""
    if len(values) != domain.size:
        raise ValueError("length must equal domain size")
    arr = np.asarray(values, dtype=_U64).reshape(1, -1)
    return [int(x) for x in intt_mat(arr, domain)[0]]


def horner(coeffs: list[int], x: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % P
    return acc


# ---------------------------------------------------------------------------
# Fixed-point encoding of signed reals
# ---------------------------------------------------------------------------

def encode_signed(k: int) -> int:
    """Signed integer -> field element (negatives as p - |k|)."""
    if abs(k) > HALF_P:
        raise OverflowError(f"magnitude {k} too large for unambiguous sign")
    return k % P


def decode_signed(v: int) -> int:
    """Field element -> signed integer under the p/2 threshold convention."""
    return v - P if v > HALF_P else v


def encode_fixed(x: float, scale_bits: int) -> int:
    """Round x * 2^scale_bits half away from zero and embed in the field."""
    scaled = abs(x) * (1 << scale_bits)
    k = math.floor(scaled + 0.5)
    if k >= 1 << 62:
        raise OverflowError(f"{x} at scale 2^{scale_bits} exceeds 2^62")
    return P - k if (x < 0 and k) else k


def decode_fixed(v: int, scale_bits: int) -> float:
    return decode_signed(v) / (1 << scale_bits)


@dataclass(frozen=True)
class FixedPoint:
    """Signed fixed-point number raw / 2^scale_bits with |raw| < 2^62."""

    raw: int
    scale_bits: int

    def __post_init__(self):
        if abs(self.raw) >= 1 << 62:
            raise OverflowError("fixed-point raw value exceeds 2^62")

    @classmethod
    def from_float(cls, x: float, scale_bits: int) -> "FixedPoint":
        return cls(decode_signed(encode_fixed(x, scale_bits)), scale_bits)

    def to_float(self) -> float:
        return self.raw / (1 << self.scale_bits)

    def to_field(self) -> int:
        return encode_signed(self.raw)


def rescale_mul(a: FixedPoint, b: FixedPoint) -> tuple[FixedPoint, int]:
    """Multiply same-scale operands, shift back down, return the remainder.

    The quotient is floored (toward -inf), so the remainder is always in
    [0, 2^scale_bits); that matches the in-circuit division convention.
    """
    if a.scale_bits != b.scale_bits:
        raise ValueError("operands must share a scale")
    q, r = divmod(a.raw * b.raw, 1 << a.scale_bits)
    return FixedPoint(q, a.scale_bits), r
