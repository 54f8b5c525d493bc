"""The T-numeration: recurrent sequence, greedy digits, admissibility.

Digit strings are stored most-significant first: ``digits[0]`` multiplies
``T[len(digits) - 1]`` and ``digits[-1]`` multiplies ``T[0]``.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import IndexBelowMinusFour, InadmissibleDigits, PrecisionExhausted
from .field import (
    MAX_PRECISION,
    BETA,
    ONE,
    Ambiguous,
    CubicParams,
    Embeddings,
    fe_embed,
    fe_mul,
)


class TSequence:
    """T_0 = 1, T_1 = a, T_2 = a^2 + b, T_{n+3} = a T_{n+2} + b T_{n+1} + T_n.

    Extended backwards by the same recurrence: T_{-1} = T_{-2} = 0,
    T_{-3} = 1, T_{-4} = -b.
    """

    def __init__(self, params: CubicParams):
        self.params = params
        a, b = params.a, params.b
        self._values = [1, a, a * a + b]
        self._negative = {-1: 0, -2: 0, -3: 1, -4: -b}
        self._lock = threading.Lock()

    def _extend(self, n: int) -> None:
        a, b = self.params.a, self.params.b
        with self._lock:
            v = self._values
            while len(v) <= n:
                v.append(a * v[-1] + b * v[-2] + v[-3])

    def __getitem__(self, n: int) -> int:
        if n < -4:
            raise IndexBelowMinusFour(n)
        if n < 0:
            return self._negative[n]
        if n >= len(self._values):
            self._extend(n)
        return self._values[n]

    def index_above(self, N: int) -> int:
        """Smallest n >= 0 with T_n > N."""
        n = 0
        while self[n] <= N:
            n += 1
        return n

    def up_to(self, limit: int) -> list[int]:
        """All T_n (n >= 0) with T_n <= limit."""
        return [self[n] for n in range(self.index_above(limit))]

    def __repr__(self):
        return f"TSequence{self.params}"


def t_value(n: int, seq: TSequence) -> int:
    return seq[n]


@dataclass(frozen=True)
class DigitString:
    """Admissible T-digits, most significant first."""

    digits: tuple[int, ...]
    params: CubicParams

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))

    def __len__(self):
        return len(self.digits)

    def __str__(self):
        return ",".join(map(str, self.digits)) if self.digits else "0"

    @classmethod
    def parse(cls, text: str, params: CubicParams) -> DigitString:
        text = text.strip()
        digits = tuple(int(t) for t in text.split(",")) if text else ()
        return cls(digits, params)

    @property
    def lsb_first(self) -> tuple[int, ...]:
        """Digits indexed by the power of T they multiply."""
        return self.digits[::-1]

    def stripped(self) -> DigitString:
        i = 0
        while i < len(self.digits) and self.digits[i] == 0:
            i += 1
        return DigitString(self.digits[i:], self.params)


def admissibility_word(params: CubicParams) -> tuple[int, int, int]:
    """First three letters of (a-1)(a+b-1)(a+b)(a+b)...; the tail repeats."""
    a, b = params.a, params.b
    return (a - 1, a + b - 1, a + b)


def admissibility_step(state: int, digit: int, params: CubicParams) -> int | None:
    """One step of the left-to-right matcher; ``None`` means rejected.

    The state is the current match depth against the comparison word,
    capped at 2 because the word is periodic from its third letter on.
    """
    limit = admissibility_word(params)[state]
    if digit < 0 or digit > limit:
        return None
    if digit == limit:
        return min(state + 1, 2)
    return 0


def is_admissible(digits: Iterable[int] | DigitString, params: CubicParams) -> bool:
    if isinstance(digits, DigitString):
        digits = digits.digits
    state = 0
    for d in digits:
        state = admissibility_step(state, d, params)
        if state is None:
            return False
    return True


def transfer_matrix(params: CubicParams) -> np.ndarray:
    """3x3 counts of digits leading from one matcher state to another."""
    m = np.zeros((3, 3), dtype=object)
    for s in range(3):
        for d in range(params.a):
            t = admissibility_step(s, d, params)
            if t is not None:
                m[s, t] += 1
    return m


def count_admissible(length: int, params: CubicParams) -> int:
    """Number of admissible words of the given length (leading zeros allowed)."""
    vec = np.array([1, 0, 0], dtype=object)
    m = transfer_matrix(params)
    for _ in range(length):
        vec = vec.dot(m)
    return int(sum(vec))


def greedy_encode(N: int, seq: TSequence) -> DigitString:
    """Greedy T-representation of N >= 0 (empty digits for 0)."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    if N == 0:
        return DigitString((), seq.params)
    top = seq.index_above(N) - 1
    digits = []
    rest = N
    for n in range(top, -1, -1):
        d, rest = divmod(rest, seq[n])
        digits.append(d)
    return DigitString(tuple(digits), seq.params)


def decode(d: DigitString | Sequence[int], seq: TSequence) -> int:
    digits = d.digits if isinstance(d, DigitString) else tuple(d)
    if not is_admissible(digits, seq.params):
        raise InadmissibleDigits(",".join(map(str, digits)))
    n = len(digits)
    return sum(dig * seq[n - 1 - i] for i, dig in enumerate(digits))


def _renyi_digits(count: int, emb: Embeddings) -> list[int]:
    params = emb.params
    x = ONE
    digits = []
    for _ in range(count):
        y = fe_mul(BETA, x, params)
        value, err = fe_embed(y, "beta", emb)
        t = int(emb.ctx.floor(value))
        frac = value - t
        if frac <= err or 1 - frac <= err:
            raise Ambiguous(f"digit boundary at step {len(digits) + 1}")
        digits.append(t)
        x = y - t
    return digits


def renyi_expansion_of_one(
    count: int, emb: Embeddings, max_bits: int = MAX_PRECISION
) -> list[int]:
    """First ``count`` digits of the Renyi expansion d(1, beta).

    The orbit x_i = beta*x_{i-1} - t_i is kept exactly in Z[beta]; only the
    floor is taken numerically, and a floor whose distance to an integer is
    within the embedding error triggers a precision increase.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    while True:
        try:
            return _renyi_digits(count, emb)
        except Ambiguous as exc:
            if emb.precision_bits * 2 > max_bits:
                raise PrecisionExhausted(str(exc)) from exc
            emb = emb.refined()


class AkiyamaCase(NamedTuple):
    case: str
    has_property_f: bool | None


def akiyama_classify(a: int, b: int) -> AkiyamaCase:
    """Place (a, b) in the four families of cubic Pisot units."""
    if 1 <= b <= a:
        return AkiyamaCase("case-i", True)
    if b == -1 and a >= 2:
        return AkiyamaCase("case-ii", True)
    if b == a + 1:
        return AkiyamaCase("case-iii", True)
    if -a + 1 <= b <= -2:
        return AkiyamaCase("case-iv", False)
    return AkiyamaCase("none", None)


def digits_from_ints(N: np.ndarray, seq: TSequence) -> np.ndarray:
    """Vectorised greedy digits for an int64 array; column j multiplies T_j."""
    N = np.asarray(N, dtype=np.int64)
    top = seq.index_above(int(N.max()) if N.size else 0)
    out = np.zeros((N.size, max(top, 1)), dtype=np.int64)
    rest = N.copy()
    for n in range(top - 1, -1, -1):
        t = seq[n]
        d = rest // t
        out[:, n] = d
        rest -= d * t
    return out
