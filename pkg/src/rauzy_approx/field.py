"""Exact arithmetic in the order Z[beta] and certified numeric embeddings.

``beta`` is the dominant root of ``x**3 - a*x**2 - b*x - 1``.  Elements of
Z[beta] are stored as integer triples in the basis (1, beta, beta**2); since
the constant coefficient is -1, beta is a unit and ``1/beta`` has integer
coordinates ``(-b, -a, 1)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, NamedTuple, TypeVar

from mpmath.ctx_mp import MPContext

from .errors import OutOfRange, PrecisionExhausted

DEFAULT_PRECISION = 128
MAX_PRECISION = 4096

T = TypeVar("T")


class NeighborAssumptionWarning(UserWarning):
    """K >= 2: the fractal has more than six neighbours."""


@dataclass(frozen=True)
class CubicParams:
    """Integer pair (a, b) with ``-a + 1 <= b <= -2``."""

    a: int
    b: int
    K: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "K", (self.a - 1) // (self.a + self.b + 1))

    @property
    def neighbor_warning(self) -> bool:
        return self.K >= 2

    @property
    def discriminant(self) -> int:
        # discriminant of x^3 + p x^2 + q x + r with (p, q, r) = (-a, -b, -1)
        p, q, r = -self.a, -self.b, -1
        return 18 * p * q * r - 4 * p**3 * r + p * p * q * q - 4 * q**3 - 27 * r * r

    def __str__(self):
        return f"(a={self.a}, b={self.b})"


def validate_params(a: int, b: int, *, warn: bool = True) -> CubicParams:
    """Check ``-a+1 <= b <= -2`` and build the parameter record.

    A :class:`NeighborAssumptionWarning` is issued when K >= 2; the
    approximation results are only expected for the six-neighbour case K = 1.
    """
    a, b = int(a), int(b)
    if b < -a + 1 or b > -2:
        raise OutOfRange(f"need -a+1 <= b <= -2, got a={a}, b={b}")
    params = CubicParams(a, b)
    if warn and params.neighbor_warning:
        warnings.warn(
            f"K={params.K} >= 2 for {params}: more than 6 neighbours",
            NeighborAssumptionWarning,
            stacklevel=2,
        )
    return params


@dataclass(frozen=True, slots=True)
class FieldElement:
    """``c0 + c1*beta + c2*beta**2`` with integer coordinates."""

    c0: int = 0
    c1: int = 0
    c2: int = 0

    def __add__(self, other: FieldElement | int) -> FieldElement:
        if isinstance(other, int):
            return FieldElement(self.c0 + other, self.c1, self.c2)
        return FieldElement(self.c0 + other.c0, self.c1 + other.c1, self.c2 + other.c2)

    __radd__ = __add__

    def __neg__(self) -> FieldElement:
        return FieldElement(-self.c0, -self.c1, -self.c2)

    def __sub__(self, other: FieldElement | int) -> FieldElement:
        return self + (-other)

    def __rsub__(self, other: int) -> FieldElement:
        return (-self) + other

    def scale(self, k: int) -> FieldElement:
        return FieldElement(k * self.c0, k * self.c1, k * self.c2)

    def __mul__(self, k: int) -> FieldElement:
        # integer scaling only; field products need the parameters (fe_mul)
        if not isinstance(k, int):
            return NotImplemented
        return self.scale(k)

    __rmul__ = __mul__

    def __iter__(self):
        yield self.c0
        yield self.c1
        yield self.c2

    def is_zero(self) -> bool:
        return self.c0 == 0 and self.c1 == 0 and self.c2 == 0

    def height(self) -> int:
        return max(abs(self.c0), abs(self.c1), abs(self.c2))


ZERO = FieldElement(0, 0, 0)
ONE = FieldElement(1, 0, 0)
BETA = FieldElement(0, 1, 0)
BETA_SQ = FieldElement(0, 0, 1)


def fe_mul(x: FieldElement, y: FieldElement, params: CubicParams) -> FieldElement:
    """Exact product, reduced with beta^3 = 1 + b*beta + a*beta^2."""
    a, b = params.a, params.b
    p0 = x.c0 * y.c0
    p1 = x.c0 * y.c1 + x.c1 * y.c0
    p2 = x.c0 * y.c2 + x.c1 * y.c1 + x.c2 * y.c0
    p3 = x.c1 * y.c2 + x.c2 * y.c1
    p4 = x.c2 * y.c2
    # beta^4 = a + (1 + a*b) beta + (a^2 + b) beta^2
    return FieldElement(
        p0 + p3 + a * p4,
        p1 + b * p3 + (1 + a * b) * p4,
        p2 + a * p3 + (a * a + b) * p4,
    )


def beta_inverse(params: CubicParams) -> FieldElement:
    return FieldElement(-params.b, -params.a, 1)


def beta_power(n: int, params: CubicParams) -> FieldElement:
    """beta**n for any integer n (negative powers use the unit inverse)."""
    base = BETA if n >= 0 else beta_inverse(params)
    result = ONE
    for _ in range(abs(n)):
        result = fe_mul(result, base, params)
    return result


class Bounded(NamedTuple):
    """A numeric value together with an absolute error bound."""

    value: object
    error: object


def _poly_sign(params: CubicParams, num: int, shift: int) -> int:
    """Exact sign of P(num / 2**shift)."""
    a, b = params.a, params.b
    s = 1 << shift
    v = num**3 - a * num * num * s - b * num * s * s - s * s * s
    return (v > 0) - (v < 0)


@dataclass(frozen=True)
class Embeddings:
    """High-precision images of beta (real) and alpha (complex, Im > 0)."""

    params: CubicParams
    precision_bits: int
    ctx: MPContext = field(repr=False, compare=False)
    beta: object
    alpha: object
    abs_alpha: object
    beta_interval: tuple[Fraction, Fraction] = field(repr=False)

    @property
    def lam(self):
        """Second complex conjugate, conj(alpha)."""
        return self.ctx.conj(self.alpha)

    @property
    def unit_error(self):
        return self.ctx.ldexp(1, -self.precision_bits + 6)

    def eval_error_bound(self, x: FieldElement, which: str = "beta"):
        """Bound on |computed - exact| for ``fe_embed(x, which)``.

        Covers the rounding of the root itself and of the Horner steps:
        2**(6 - precision) * (|c0| + |c1| R + |c2| R**2) with R = max(1, |root|).
        """
        r = self.beta if which == "beta" else self.ctx.mpf(1)
        size = abs(x.c0) + abs(x.c1) * r + abs(x.c2) * r * r
        return self.unit_error * (size + 1)

    def refined(self, factor: int = 2) -> Embeddings:
        return isolate_roots(self.params, self.precision_bits * factor)


def isolate_roots(params: CubicParams, precision_bits: int = DEFAULT_PRECISION) -> Embeddings:
    """Certify beta by exact dyadic bisection and recover alpha from the cofactor.

    The polynomial is negative at 1 (value -a-b) and positive at a (value
    -ab-1), so beta lies in (1, a).  Signs are evaluated with exact integer
    arithmetic throughout.
    """
    if precision_bits < 64:
        raise ValueError("precision_bits must be >= 64")
    if params.discriminant >= 0:
        raise OutOfRange(f"{params}: conjugates are real, only the complex case is supported")
    a, b = params.a, params.b
    lo, hi, shift = 1, a, 0
    if not (_poly_sign(params, lo, 0) < 0 < _poly_sign(params, hi, 0)):
        raise OutOfRange(f"{params}: no sign change on (1, a)")
    for _ in range(precision_bits + 16):
        lo, hi, shift = 2 * lo, 2 * hi, shift + 1
        mid = (lo + hi) // 2
        if _poly_sign(params, mid, shift) < 0:
            lo = mid
        else:
            hi = mid
    lo_q, hi_q = Fraction(lo, 1 << shift), Fraction(hi, 1 << shift)
    P = lambda t: t**3 - a * t * t - b * t - 1  # noqa: E731
    if not (P(lo_q) < 0 < P(hi_q)):
        raise PrecisionExhausted("root bracket lost its sign change")

    ctx = MPContext()
    ctx.prec = precision_bits
    beta = ctx.mpf(lo + hi) / (1 << (shift + 1))
    # x^3 - a x^2 - b x - 1 = (x - beta)(x^2 + p x + r), r = 1/beta
    p = beta - a
    r = 1 / beta
    disc = 4 * r - p * p
    if disc <= 0:
        raise PrecisionExhausted("cofactor discriminant not certified negative")
    alpha = ctx.mpc(-p / 2, ctx.sqrt(disc) / 2)
    abs_alpha = abs(alpha)

    tol = ctx.ldexp(1, -precision_bits + 8)
    if abs(beta**3 - a * beta**2 - b * beta - 1) >= tol * beta**3:
        raise PrecisionExhausted("|P(beta)| above tolerance")
    if not (beta > 1 and abs_alpha < 1) or abs(beta * abs_alpha**2 - 1) >= tol * beta:
        raise PrecisionExhausted("root invariants not met")
    return Embeddings(params, precision_bits, ctx, beta, alpha, abs_alpha, (lo_q, hi_q))


def fe_embed(x: FieldElement, which: str, emb: Embeddings) -> Bounded:
    """Evaluate x at beta (``"beta"``) or at alpha (``"alpha"``)."""
    if which not in ("beta", "alpha"):
        raise ValueError(f"which must be 'beta' or 'alpha', not {which!r}")
    r = emb.beta if which == "beta" else emb.alpha
    ctx = emb.ctx
    value = (ctx.mpf(x.c2) * r + x.c1) * r + x.c0
    return Bounded(value, emb.eval_error_bound(x, which))


class Ambiguous(Exception):
    """Internal signal: a comparison gap fell below its error bound."""


def with_precision_retry(
    params: CubicParams,
    fn: Callable[[Embeddings], T],
    precision_bits: int = DEFAULT_PRECISION,
    max_bits: int = MAX_PRECISION,
) -> T:
    """Run ``fn(emb)``, doubling the precision whenever it raises Ambiguous."""
    bits = precision_bits
    while True:
        try:
            return fn(isolate_roots(params, bits))
        except Ambiguous as exc:
            if bits * 2 > max_bits:
                raise PrecisionExhausted(f"ambiguous at {bits} bits: {exc}") from exc
            bits *= 2


def fe_norm(x: FieldElement, params: CubicParams) -> int:
    """Field norm: determinant of multiplication by x on the basis (1, beta, beta^2)."""
    cols = [fe_mul(x, e, params) for e in (ONE, BETA, BETA_SQ)]
    m = [[c.c0 for c in cols], [c.c1 for c in cols], [c.c2 for c in cols]]
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )
