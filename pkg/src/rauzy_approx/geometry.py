"""Rauzy-fractal geometry: exact delta vectors, the B action, the Rauzy norm.

All vectors are held exactly as pairs of Z[beta] elements and embedded at
the very end; ``N/beta - P_N`` loses about as many digits as N has when
formed in floating point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import DegenerateMap, InadmissibleDigits
from .field import (
    ONE,
    ZERO,
    Bounded,
    CubicParams,
    Embeddings,
    FieldElement,
    beta_inverse,
    fe_embed,
    fe_mul,
)
from .numeration import (
    DigitString,
    TSequence,
    admissibility_step,
    admissibility_word,
    count_admissible,
    digits_from_ints,
    greedy_encode,
    is_admissible,
)


@dataclass(frozen=True)
class DeltaVector:
    """A vector of R^2 whose coordinates are exact elements of Z[beta]."""

    x1: FieldElement
    x2: FieldElement
    source_N: int | None = field(default=None, compare=False)

    def __add__(self, other: DeltaVector) -> DeltaVector:
        return DeltaVector(self.x1 + other.x1, self.x2 + other.x2)

    def __sub__(self, other: DeltaVector) -> DeltaVector:
        return DeltaVector(self.x1 - other.x1, self.x2 - other.x2)

    def scale(self, k: int) -> DeltaVector:
        return DeltaVector(self.x1.scale(k), self.x2.scale(k))

    def shift(self, g1: int, g2: int) -> DeltaVector:
        """Subtract the integer vector (g1, g2)."""
        return DeltaVector(self.x1 - g1, self.x2 - g2, self.source_N)

    def is_zero(self) -> bool:
        return self.x1.is_zero() and self.x2.is_zero()

    def embed(self, emb: Embeddings) -> tuple[Bounded, Bounded]:
        return fe_embed(self.x1, "beta", emb), fe_embed(self.x2, "beta", emb)

    def embed_float(self, emb: Embeddings) -> tuple[float, float]:
        e1, e2 = self.embed(emb)
        return float(e1.value), float(e2.value)


def inverse_beta_vector(params: CubicParams) -> DeltaVector:
    """(1/beta, 1/beta^2), which is also delta(1)."""
    ib = beta_inverse(params)
    return DeltaVector(ib, fe_mul(ib, ib, params), 1)


def delta_of(N: int, seq: TSequence) -> DeltaVector:
    """delta(N) = N (1/beta, 1/beta^2) - (P_N, Q_N), exactly."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    d = greedy_encode(N, seq).lsb_first
    P = sum(d[j] * seq[j - 1] for j in range(1, len(d)))
    Q = sum(d[j] * seq[j - 2] for j in range(2, len(d)))
    v = inverse_beta_vector(seq.params).scale(N)
    return DeltaVector(v.x1 - P, v.x2 - Q, N)


def greedy_offsets(N: int, seq: TSequence) -> tuple[int, int]:
    """The integer pair (P_N, Q_N) removed from N (1/beta, 1/beta^2)."""
    d = greedy_encode(N, seq).lsb_first
    P = sum(d[j] * seq[j - 1] for j in range(1, len(d)))
    Q = sum(d[j] * seq[j - 2] for j in range(2, len(d)))
    return P, Q


@dataclass(frozen=True)
class MatrixB:
    """[[-b/beta, -1/beta], [1 - b/beta^2, -1/beta^2]] over Z[beta]."""

    b11: FieldElement
    b12: FieldElement
    b21: FieldElement
    b22: FieldElement
    params: CubicParams

    def __call__(self, v: DeltaVector) -> DeltaVector:
        p = self.params
        return DeltaVector(
            fe_mul(self.b11, v.x1, p) + fe_mul(self.b12, v.x2, p),
            fe_mul(self.b21, v.x1, p) + fe_mul(self.b22, v.x2, p),
        )

    def embed(self, emb: Embeddings) -> np.ndarray:
        """Entries as a 2x2 object array of mp reals."""
        return np.array(
            [[fe_embed(e, "beta", emb).value for e in row]
             for row in ((self.b11, self.b12), (self.b21, self.b22))],
            dtype=object,
        )


def matrix_B(params: CubicParams) -> MatrixB:
    ib = beta_inverse(params)
    ib2 = fe_mul(ib, ib, params)
    b = params.b
    return MatrixB(ib.scale(-b), -ib, ONE - ib2.scale(b), -ib2, params)


def apply_B(v: DeltaVector, params: CubicParams) -> DeltaVector:
    return matrix_B(params)(v)


def delta_via_series(d: DigitString, params: CubicParams | None = None) -> DeltaVector:
    """sum_j d_j B^j delta(1), evaluated by Horner's rule in Z[beta]."""
    params = params or d.params
    digits = d.digits if isinstance(d, DigitString) else tuple(d)
    if not is_admissible(digits, params):
        raise InadmissibleDigits(",".join(map(str, digits)))
    B = matrix_B(params)
    one = inverse_beta_vector(params)
    acc = DeltaVector(ZERO, ZERO)
    for digit in digits:
        acc = B(acc) + one.scale(digit)
    return acc


def matrix_M(emb: Embeddings) -> np.ndarray:
    """[[lam + b/beta, 1/beta], [-alpha - b/beta, -1/beta]] (complex mp)."""
    b, beta = emb.params.b, emb.beta
    return np.array(
        [[emb.lam + b / beta, 1 / beta], [-emb.alpha - b / beta, -1 / beta]],
        dtype=object,
    )


def mb_residual(emb: Embeddings) -> Bounded:
    """max |(M B - diag(alpha, lam) M)_ij| with an error bound for comparison."""
    M = matrix_M(emb)
    B = matrix_B(emb.params).embed(emb)
    D = np.array([[emb.alpha, 0], [0, emb.lam]], dtype=object)
    R = M.dot(B) - D.dot(M)
    worst = max(abs(x) for x in R.flat)
    scale = emb.beta**2 * emb.params.a * (abs(emb.params.b) + 1)
    return Bounded(worst, emb.unit_error * 16 * scale)


@dataclass(frozen=True)
class RauzyNormCtx:
    """Constants of N(x) = |(alpha + b/beta) x1 + x2/beta|.

    ``rmat`` is the real 2x2 matrix whose rows are the real and imaginary
    parts of (c1, c2), so N(x) = ||rmat x||_2 and ``lambda_min`` is a lower
    bound for N(x)/||x||_2.  The printed matrix M uses lam in its first row;
    for real x the modulus is the same with alpha, which is what is used here.
    """

    emb: Embeddings
    c1: object
    c2: object
    rmat: np.ndarray
    kappa: object
    lambda_min: object

    @property
    def params(self) -> CubicParams:
        return self.emb.params

    @property
    def c1_float(self) -> complex:
        return complex(self.c1)

    @property
    def c2_float(self) -> float:
        return float(self.c2)

    def error_bound(self, x1, x2):
        """Absolute error of ``rauzy_norm`` for inputs of the given size."""
        return self.emb.unit_error * 8 * (abs(self.c1) * abs(x1) + abs(self.c2) * abs(x2) + 1)

    def refined(self) -> RauzyNormCtx:
        return rauzy_norm_ctx(self.emb.refined())


def rauzy_norm_ctx(emb: Embeddings) -> RauzyNormCtx:
    ctx = emb.ctx
    beta, b = emb.beta, emb.params.b
    c1 = emb.alpha + b / beta
    c2 = 1 / beta
    kappa = abs(c1 / beta + c2 / beta**2)
    r11, r12, r21, r22 = ctx.re(c1), c2, ctx.im(c1), ctx.mpf(0)
    # smallest singular value of a 2x2 matrix
    fro = r11**2 + r12**2 + r21**2 + r22**2
    det = abs(r11 * r22 - r12 * r21)
    smin = ctx.sqrt((fro - ctx.sqrt(fro**2 - 4 * det**2)) / 2)
    smin_alt = det / ctx.sqrt((fro + ctx.sqrt(fro**2 - 4 * det**2)) / 2)
    lambda_min = min(smin, smin_alt) * (1 - emb.unit_error * 64)
    if lambda_min <= 0:
        raise DegenerateMap("norm matrix is singular")
    rmat = np.array([[float(r11), float(r12)], [float(r21), float(r22)]])
    return RauzyNormCtx(emb, c1, c2, rmat, kappa, lambda_min)


def rauzy_norm(x: Sequence, ctx: RauzyNormCtx) -> Bounded:
    """N(x) for a real pair; an error bound for the constants is attached."""
    x1, x2 = ctx.emb.ctx.mpf(x[0]), ctx.emb.ctx.mpf(x[1])
    value = abs(ctx.c1 * x1 + ctx.c2 * x2)
    return Bounded(value, ctx.error_bound(x1, x2))


def rauzy_norm_delta(v: DeltaVector, ctx: RauzyNormCtx) -> Bounded:
    """N of an exact vector: embed both coordinates, then take the norm."""
    (x1, e1), (x2, e2) = v.embed(ctx.emb)
    value = abs(ctx.c1 * x1 + ctx.c2 * x2)
    err = abs(ctx.c1) * e1 + abs(ctx.c2) * e2 + ctx.error_bound(x1, x2)
    return Bounded(value, err)


def norm_of_digits(d: DigitString, ctx: RauzyNormCtx) -> Bounded:
    """kappa * |sum_n d_n alpha^n| (n counted from the least significant digit)."""
    emb = ctx.emb
    s = emb.ctx.mpc(0)
    for digit in d.digits:
        s = s * emb.alpha + digit
    total = sum(d.digits) + 1
    return Bounded(ctx.kappa * abs(s), emb.unit_error * 8 * total)


@dataclass(frozen=True)
class ConjugationMap:
    """g(z) = (c z + conj(c z), d z + conj(d z)) and its inverse f.

    g carries alpha^(n+2) to delta(T_n), so f maps the delta cloud onto the
    digit-sum fractal and Z^2 onto Z + Z alpha.
    """

    emb: Embeddings
    ell: object
    c: object
    d: object
    det: object

    def g(self, z) -> tuple:
        ctx = self.emb.ctx
        cz, dz = self.c * z, self.d * z
        return (2 * ctx.re(cz), 2 * ctx.re(dz))

    def f(self, x) -> object:
        # g(u + iv) = [[2Re c, -2Im c], [2Re d, -2Im d]] (u, v)
        ctx = self.emb.ctx
        m11, m12 = 2 * ctx.re(self.c), -2 * ctx.im(self.c)
        m21, m22 = 2 * ctx.re(self.d), -2 * ctx.im(self.d)
        x1, x2 = ctx.mpf(x[0]), ctx.mpf(x[1])
        det = m11 * m22 - m12 * m21
        u = (m22 * x1 - m12 * x2) / det
        v = (m11 * x2 - m21 * x1) / det
        return ctx.mpc(u, v)

    def matrix(self) -> np.ndarray:
        """Real 2x2 float matrix of g acting on (Re z, Im z)."""
        c, d = complex(self.c), complex(self.d)
        return np.array([[2 * c.real, -2 * c.imag], [2 * d.real, -2 * d.imag]])


def conjugation_map(emb: Embeddings) -> ConjugationMap:
    ctx = emb.ctx
    alpha, beta = emb.alpha, emb.beta
    abar = ctx.conj(alpha)
    ell = alpha**2 / ((alpha - abar) * (alpha - beta))
    c = ell / alpha**2 * (1 / beta - 1 / alpha)
    d = ell / alpha**2 * (1 / beta**2 - 1 / alpha**2)
    det = c * ctx.conj(d) - d * ctx.conj(c)
    if abs(det) <= emb.unit_error * 1024:
        raise DegenerateMap("c conj(d) - d conj(c) is not certified nonzero")
    return ConjugationMap(emb, ell, c, d, det)


def conjugation_map_g(z, emb: Embeddings) -> tuple:
    return conjugation_map(emb).g(z)


# -- fractal clouds ---------------------------------------------------------

@dataclass
class FractalCloud:
    """Points of E (real pairs) or of R (complex values).

    For kind "R" the cloud also remembers the digit depth, so consumers can
    search the digit tree instead of the materialised points.
    """

    kind: str
    params: CubicParams
    points: np.ndarray
    depth: int | None = None
    count: int | None = None
    alpha: complex | None = None

    def __len__(self):
        if len(self.points) == 0 and self.count is not None:
            return self.count
        return len(self.points)

    def xy(self) -> np.ndarray:
        if self.kind == "R":
            return np.column_stack([self.points.real, self.points.imag])
        return self.points


def delta_table(n_terms: int, emb: Embeddings, seq: TSequence) -> np.ndarray:
    """Float images of delta(T_j), j < n_terms, each embedded from its exact value."""
    rows = [delta_of(seq[j], seq).embed_float(emb) for j in range(n_terms)]
    return np.array(rows, dtype=np.float64).reshape(n_terms, 2)


def embedded_deltas(N: np.ndarray, emb: Embeddings, seq: TSequence) -> np.ndarray:
    """delta(N) for many N as sum_j d_j delta(T_j); no difference of large terms."""
    digits = digits_from_ints(N, seq)
    table = delta_table(digits.shape[1], emb, seq)
    return digits.astype(np.float64) @ table


def cloud_E(count: int, emb: Embeddings, seq: TSequence | None = None) -> FractalCloud:
    if count < 1:
        raise ValueError("count must be >= 1")
    seq = seq or TSequence(emb.params)
    pts = embedded_deltas(np.arange(count, dtype=np.int64), emb, seq)
    return FractalCloud("E", emb.params, pts, count=count)


def _alpha_powers(emb: Embeddings, upto: int) -> np.ndarray:
    return np.array([complex(emb.alpha**i) for i in range(upto + 1)])


def _expand_levels(values, states, powers, params):
    """Append one digit level (most significant first) to every node."""
    limits = np.array(admissibility_word(params))
    out_v, out_s = [], []
    for d in range(params.a):
        lim = limits[states]
        keep = d <= lim
        if not keep.any():
            continue
        s = states[keep]
        out_v.append(values[keep] + d * powers)
        out_s.append(np.where(d == lim[keep], np.minimum(s + 1, 2), 0))
    return np.concatenate(out_v), np.concatenate(out_s)


def iter_cloud_R(depth: int, emb: Embeddings, chunk: int = 1 << 18) -> Iterator[np.ndarray]:
    """Stream sum_{i=2}^{depth} d_i alpha^i over admissible digit words.

    Digits are fixed from i = depth down to 2; the top levels are expanded
    first and each prefix subtree is then materialised in one piece.
    """
    if depth < 2:
        raise ValueError("depth must be >= 2")
    params = emb.params
    powers = _alpha_powers(emb, depth)
    levels = list(range(depth, 1, -1))
    values = np.zeros(1, dtype=np.complex128)
    states = np.zeros(1, dtype=np.int64)
    beta = float(emb.beta)
    split = 0
    while split < len(levels) and beta ** (len(levels) - split) > chunk:
        values, states = _expand_levels(values, states, powers[levels[split]], params)
        split += 1
    remaining = len(levels) - split
    per_prefix = max(1, int(beta**remaining))
    batch = max(1, chunk // per_prefix)
    for start in range(0, len(values), batch):
        v, s = values[start:start + batch], states[start:start + batch]
        for i in levels[split:]:
            v, s = _expand_levels(v, s, powers[i], params)
        yield v


def cloud_R(depth: int, emb: Embeddings, materialize: bool = True) -> FractalCloud:
    """Digit-sum cloud to the given depth.

    With ``materialize=False`` only the depth and the point count are kept;
    that is all :func:`lattice_scan` needs, and the full cloud grows like
    beta**depth.
    """
    count = count_admissible(depth - 1, emb.params) if depth >= 2 else 0
    if not materialize:
        if depth < 2:
            raise ValueError("depth must be >= 2")
        pts = np.zeros(0, dtype=np.complex128)
    else:
        pts = np.concatenate(list(iter_cloud_R(depth, emb)))
    return FractalCloud("R", emb.params, pts, depth=depth, count=count, alpha=complex(emb.alpha))


def fractal_tail_radius(params: CubicParams, abs_alpha: float, start: int, stop: int | None) -> float:
    """(a-1) sum_{k=start}^{stop} |alpha|^k; stop=None sums to infinity."""
    if stop is not None and stop < start:
        return 0.0
    head = abs_alpha**start
    if stop is None:
        return (params.a - 1) * head / (1 - abs_alpha)
    return (params.a - 1) * head * (1 - abs_alpha ** (stop - start + 1)) / (1 - abs_alpha)


def _reversed_matcher(params: CubicParams):
    """Subset automaton for admissibility read least significant digit first.

    A state is the set of forward-matcher states from which the digits read
    so far (taken most significant first) are accepted.  The word padded
    with leading zeros is admissible iff forward state 0 is in the set.
    """
    start = frozenset({0, 1, 2})
    index = {start: 0}
    subsets = [start]
    trans = []
    i = 0
    while i < len(subsets):
        S = subsets[i]
        row = []
        for d in range(params.a):
            T = frozenset(
                s for s in (0, 1, 2)
                if (t := admissibility_step(s, d, params)) is not None and t in S
            )
            if not T:
                row.append(-1)
                continue
            if T not in index:
                index[T] = len(subsets)
                subsets.append(T)
            row.append(index[T])
        trans.append(row)
        i += 1
    accepts = np.array([0 in S for S in subsets])
    return np.array(trans, dtype=np.int64), accepts


def min_distance_to_R(z: complex, depth: int, params: CubicParams, alpha: complex) -> float:
    """Exact-intent min |p - z| over the depth-truncated digit-sum cloud.

    Branch and bound from the least significant digit (largest terms) up;
    any node can be completed with zeros, which gives the incumbent.
    """
    trans, accepts = _reversed_matcher(params)
    abs_alpha = abs(alpha)
    vals = np.zeros(1, dtype=np.complex128)
    st = np.zeros(1, dtype=np.int64)
    best = abs(z) if accepts[0] else math.inf
    for i in range(2, depth + 1):
        power = alpha**i
        nv, ns = [], []
        for d in range(params.a):
            t = trans[st, d]
            ok = t >= 0
            if ok.any():
                nv.append(vals[ok] + d * power)
                ns.append(t[ok])
        vals, st = np.concatenate(nv), np.concatenate(ns)
        dist = np.abs(vals - z)
        acc = accepts[st]
        if acc.any():
            best = min(best, float(dist[acc].min()))
        slack = fractal_tail_radius(params, abs_alpha, i + 1, depth)
        keep = dist - slack <= best * (1 + 1e-12) + 1e-15
        vals, st = vals[keep], st[keep]
    return best


@dataclass
class LatticeScan:
    params: CubicParams
    depth: int
    window: int
    eps: float
    distances: dict
    hits: list
    expected: frozenset
    hit_max: float
    outside_smallest: list
    separation: float
    truncation: float

    @property
    def conclusive(self) -> bool:
        return self.separation >= 10 and {h[:2] for h in self.hits} == set(self.expected)


def lattice_scan(cloud: FractalCloud, window: int = 4, eps: float | None = None) -> LatticeScan:
    """Distance from each p + q alpha (|p|, |q| <= window) to the R cloud.

    With ``eps=None`` the threshold is the geometric mean of the largest
    expected-hit distance and the smallest other distance.
    """
    if cloud.kind != "R" or cloud.depth is None or len(cloud) == 0:
        raise ValueError("lattice_scan needs a nonempty R cloud")
    params, alpha, depth = cloud.params, cloud.alpha, cloud.depth
    expected = frozenset({(0, 0), (-1, -(params.b + 1))})
    truncation = fractal_tail_radius(params, abs(alpha), depth + 1, None)
    distances = {}
    for p in range(-window, window + 1):
        for q in range(-window, window + 1):
            distances[(p, q)] = min_distance_to_R(p + q * alpha, depth, params, alpha)
    inside = [distances[k] for k in expected if k in distances]
    outside = sorted(v for k, v in distances.items() if k not in expected)
    hit_max = max(inside) if inside else 0.0
    separation = (outside[0] / max(hit_max, truncation)) if outside else math.inf
    if eps is None:
        eps = math.sqrt(max(hit_max, truncation) * outside[0]) if outside else 2 * truncation
    hits = sorted((p, q, dist) for (p, q), dist in distances.items() if dist < eps)
    return LatticeScan(
        params, depth, window, eps, distances, hits, expected, hit_max,
        outside[:2], separation, truncation,
    )
