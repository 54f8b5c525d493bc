"""Best simultaneous approximations of v = (1/beta, 1/beta^2) under the Rauzy norm.

N_0(qv) is the minimum of N(qv - g) over g in Z^2.  The minimiser is
certified by a disk argument: N(x) >= lambda_min ||x||_2, so a point better
than the rounded incumbent g_0 lies within N(qv - g_0)/lambda_min of qv.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import PrecisionExhausted, VerificationFailed
from .field import MAX_PRECISION, Ambiguous, FieldElement, beta_power, fe_embed, fe_norm
from .geometry import (
    RauzyNormCtx,
    embedded_deltas,
    greedy_offsets,
    inverse_beta_vector,
)
from .numeration import TSequence, greedy_encode

log = logging.getLogger(__name__)

DELTA = "delta"
DELTA_MINUS_ONE_ONE = "delta-minus-one-one"
OTHER = "other"

DECAY_TOLERANCE = 1e-9
_FLOAT_UNIT = 2.0**-49


@dataclass(frozen=True)
class ClosestLattice:
    g: tuple[int, int]
    value: object
    error: object
    certified: bool
    precision_bits: int


def _closest_at(q: int, ctx: RauzyNormCtx) -> ClosestLattice:
    emb = ctx.emb
    mp = emb.ctx
    (X1, e1), (X2, e2) = inverse_beta_vector(ctx.params).scale(q).embed(emb)
    base_err = abs(ctx.c1) * e1 + abs(ctx.c2) * e2

    def norm(g1, g2):
        x1, x2 = X1 - g1, X2 - g2
        return abs(ctx.c1 * x1 + ctx.c2 * x2), base_err + ctx.error_bound(x1, x2)

    g0 = (int(mp.nint(X1)), int(mp.nint(X2)))
    v0, err0 = norm(*g0)
    radius = (v0 + err0) / ctx.lambda_min
    cands = []
    for g1 in range(int(mp.ceil(X1 - radius)), int(mp.floor(X1 + radius)) + 1):
        dy2 = radius**2 - (g1 - X1) ** 2
        if dy2 < 0:
            continue
        dy = mp.sqrt(dy2)
        for g2 in range(int(mp.ceil(X2 - dy)), int(mp.floor(X2 + dy)) + 1):
            val, err = norm(g1, g2)
            cands.append((val, err, (g1, g2)))
    if not any(c[2] == g0 for c in cands):
        cands.append((v0, err0, g0))
    cands.sort(key=lambda c: (c[0], c[2]))
    best = cands[0]
    if len(cands) > 1 and cands[1][0] - best[0] <= cands[1][1] + best[1]:
        raise Ambiguous(f"q={q}: minimiser gap below error bound")
    return ClosestLattice(best[2], best[0], best[1], True, emb.precision_bits)


def closest_lattice(q: int, ctx: RauzyNormCtx, max_bits: int = MAX_PRECISION) -> ClosestLattice:
    """Certified minimiser of N(qv - g) over g in Z^2.

    Precision is doubled whenever the two best candidates are closer than
    their combined error bounds.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    while True:
        try:
            return _closest_at(q, ctx)
        except Ambiguous as exc:
            if ctx.emb.precision_bits * 2 > max_bits:
                raise PrecisionExhausted(str(exc)) from exc
            ctx = ctx.refined()


@dataclass
class BatchValues:
    q: np.ndarray
    value: np.ndarray
    error: np.ndarray
    g1: np.ndarray
    g2: np.ndarray


def _float_constants(ctx: RauzyNormCtx):
    v = inverse_beta_vector(ctx.params).embed_float(ctx.emb)
    return np.array(v), ctx.c1_float, ctx.c2_float, float(ctx.lambda_min)


def n0_batch(q_start: int, q_stop: int, ctx: RauzyNormCtx) -> BatchValues:
    """N_0(qv) for q in [q_start, q_stop) in double precision with error bounds.

    q whose two best candidates are not separated by the float bound are
    recomputed with :func:`closest_lattice`.
    """
    v, c1, c2, lam = _float_constants(ctx)
    q = np.arange(q_start, q_stop, dtype=np.int64)
    qf = q.astype(np.float64)
    X1, X2 = qf * v[0], qf * v[1]
    base = np.floor(X1), np.floor(X2)

    def err_of(radius):
        return _FLOAT_UNIT * (abs(c1) * (qf * v[0] + radius + 2) + abs(c2) * (qf * v[1] + radius + 2))

    r0 = np.rint(X1), np.rint(X2)
    v0 = np.abs(c1 * (X1 - r0[0]) + c2 * (X2 - r0[1]))
    radius = (v0 + err_of(2.0)) / lam
    k = int(math.ceil(float(radius.max()))) + 1
    err = err_of(float(k + 1))

    offs = np.arange(-k + 1, k + 1)
    o1, o2 = np.meshgrid(offs, offs, indexing="ij")
    o1, o2 = o1.ravel(), o2.ravel()
    G1 = base[0][:, None] + o1[None, :]
    G2 = base[1][:, None] + o2[None, :]
    vals = np.abs(c1 * (X1[:, None] - G1) + c2 * (X2[:, None] - G2))
    order = np.argpartition(vals, 1, axis=1)[:, :2]
    rows = np.arange(len(q))
    first = vals[rows, order[:, 0]]
    second = vals[rows, order[:, 1]]
    swap = second < first
    best_idx = np.where(swap, order[:, 1], order[:, 0])
    lo, hi = np.minimum(first, second), np.maximum(first, second)

    out = BatchValues(
        q,
        lo.copy(),
        err.copy(),
        G1[rows, best_idx].astype(np.int64),
        G2[rows, best_idx].astype(np.int64),
    )
    for i in np.nonzero(hi - lo <= 2 * err)[0]:
        res = closest_lattice(int(q[i]), ctx)
        out.value[i] = float(res.value)
        out.error[i] = float(res.error) + abs(float(res.value)) * 2.0**-52
        out.g1[i], out.g2[i] = res.g
    return out


def n0_values(q_max: int, ctx: RauzyNormCtx, threads: int = 1, chunk: int = 20000) -> BatchValues:
    """N_0 for q = 1..q_max; chunks may run on a thread pool, result order is fixed."""
    bounds = [(s, min(s + chunk, q_max + 1)) for s in range(1, q_max + 1, chunk)]
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: n0_batch(b[0], b[1], ctx), bounds))
    else:
        parts = [n0_batch(s, e, ctx) for s, e in bounds]
    return BatchValues(*(np.concatenate([getattr(p, f) for p in parts])
                         for f in ("q", "value", "error", "g1", "g2")))


@dataclass
class ApproxRecord:
    q: int
    n0_value: object
    error: object
    minimizer_g: tuple[int, int]
    dichotomy: str
    certified: bool
    greedy_offset: tuple[int, int]
    t_index: int | None = None

    @property
    def is_T_n(self) -> bool:
        return self.t_index is not None


def classify_dichotomy(q: int, g: tuple[int, int], seq: TSequence) -> tuple[str, tuple[int, int]]:
    """Compare qv - g with delta(q) and delta(q) - (1, 1) exactly.

    qv - g = delta(q) - h  iff  g = (P_q, Q_q) + h, so integer comparisons suffice.
    """
    P, Q = greedy_offsets(q, seq)
    off = (g[0] - P, g[1] - Q)
    if off == (0, 0):
        return DELTA, off
    if off == (1, 1):
        return DELTA_MINUS_ONE_ONE, off
    return OTHER, off


def _compare(qa: int, qb: int, ctx: RauzyNormCtx, cache: dict) -> int:
    """Certified sign of N_0(qa v) - N_0(qb v)."""
    while True:
        for q in (qa, qb):
            if q not in cache or cache[q].precision_bits < ctx.emb.precision_bits:
                cache[q] = closest_lattice(q, ctx)
        ra, rb = cache[qa], cache[qb]
        gap = ra.value - rb.value
        if abs(gap) > ra.error + rb.error:
            return 1 if gap > 0 else -1
        if ctx.emb.precision_bits * 2 > MAX_PRECISION:
            raise PrecisionExhausted(f"N_0 tie between q={qa} and q={qb}")
        ctx = ctx.refined()


def best_approx_scan(q_max: int, ctx: RauzyNormCtx, threads: int = 1,
                     seq: TSequence | None = None) -> list[ApproxRecord]:
    """All q <= q_max with N_0(qv) < N_0(q'v) for every 0 < q' < q."""
    if q_max < 1:
        raise ValueError("q_max must be >= 1")
    seq = seq or TSequence(ctx.params)
    vals = n0_values(q_max, ctx, threads)
    cache: dict[int, ClosestLattice] = {}
    record_qs = [1]
    cur = 0
    value, error = vals.value, vals.error
    for i in range(1, q_max):
        lo_gap = value[cur] - value[i]
        if lo_gap > error[cur] + error[i]:
            record_qs.append(i + 1)
            cur = i
        elif -lo_gap > error[cur] + error[i]:
            continue
        elif _compare(i + 1, cur + 1, ctx, cache) < 0:
            record_qs.append(i + 1)
            cur = i

    t_index = {seq[n]: n for n in range(seq.index_above(q_max))}
    records = []
    for q in record_qs:
        res = cache.get(q) or closest_lattice(q, ctx)
        tag, off = classify_dichotomy(q, res.g, seq)
        P, Q = res.g[0] - off[0], res.g[1] - off[1]
        records.append(ApproxRecord(q, res.value, res.error, res.g, tag, res.certified,
                                    (P, Q), t_index.get(q)))
    return records


@dataclass
class CEstimate:
    """Sampled min of N(delta(N) - g), g in the window minus {0, (1, 1)}.

    A finite sample of E can only over-estimate the true distance, so this
    is numerical evidence, not a certified constant.
    """

    value: float
    half_count_value: float
    margin: float
    count: int
    window: int
    argmin_N: int
    argmin_g: tuple[int, int]
    is_proof: bool = False


def _sampled_distance(z: np.ndarray, lattice: np.ndarray, chunk: int = 4096):
    best, arg_n, arg_g = math.inf, -1, -1
    for s in range(0, len(z), chunk):
        d = np.abs(z[s:s + chunk, None] - lattice[None, :])
        i = int(np.argmin(d))
        r, c = divmod(i, d.shape[1])
        if d[r, c] < best:
            best, arg_n, arg_g = float(d[r, c]), s + r, c
    return best, arg_n, arg_g


def estimate_c(cloud_count: int, window: int, ctx: RauzyNormCtx,
               seq: TSequence | None = None) -> CEstimate:
    if cloud_count < 1000:
        raise ValueError("cloud_count must be >= 1000")
    seq = seq or TSequence(ctx.params)
    pts = embedded_deltas(np.arange(cloud_count, dtype=np.int64), ctx.emb, seq)
    c1, c2 = ctx.c1_float, ctx.c2_float
    z = c1 * pts[:, 0] + c2 * pts[:, 1]
    gs = [(g1, g2) for g1 in range(-window, window + 1) for g2 in range(-window, window + 1)
          if (g1, g2) not in ((0, 0), (1, 1))]
    lattice = np.array([c1 * g1 + c2 * g2 for g1, g2 in gs])
    value, arg_n, arg_g = _sampled_distance(z, lattice)
    half, _, _ = _sampled_distance(z[: cloud_count // 2], lattice)
    return CEstimate(value, half, half - value, cloud_count, window, arg_n, gs[arg_g])


@dataclass
class TheoremReport:
    params: object
    q_max: int
    precision_bits: int
    records: list
    t_values: list
    n0_index: int | None
    n0_weak: int | None
    c_estimate: CEstimate
    anomalies: list
    case2: list = field(default_factory=list)
    case2_positive_from: int | None = None

    @property
    def ok(self) -> bool:
        return not self.anomalies

    def to_dict(self) -> dict:
        p = self.params
        return {
            "schema": 1,
            "a": p.a,
            "b": p.b,
            "K": p.K,
            "q_max": self.q_max,
            "precision_bits": self.precision_bits,
            "n0": self.n0_index,
            "n0_every_T_is_record": self.n0_weak,
            "t_values": self.t_values,
            "c_estimate": {
                "value": self.c_estimate.value,
                "half_count_value": self.c_estimate.half_count_value,
                "margin": self.c_estimate.margin,
                "count": self.c_estimate.count,
                "window": self.c_estimate.window,
                "argmin_N": self.c_estimate.argmin_N,
                "argmin_g": list(self.c_estimate.argmin_g),
                "is_proof": self.c_estimate.is_proof,
            },
            "records": [
                {
                    "q": r.q,
                    "value": float(r.n0_value),
                    "g": list(r.minimizer_g),
                    "dichotomy": r.dichotomy,
                    "offset": [r.minimizer_g[0] - r.greedy_offset[0],
                               r.minimizer_g[1] - r.greedy_offset[1]],
                    "is_T_n": r.is_T_n,
                    "n": r.t_index,
                    "certified": r.certified,
                }
                for r in self.records
            ],
            "case2": self.case2,
            "case2_positive_from": self.case2_positive_from,
            "anomalies": self.anomalies,
        }


def _exact_n0(records, seq: TSequence, q_max: int) -> int | None:
    """Least n with T_n <= q_max and {records >= T_n} == {T_m : m >= n, T_m <= q_max}."""
    rec = [r.q for r in records]
    top = seq.index_above(q_max)
    for n in range(top):
        tail = {q for q in rec if q >= seq[n]}
        if tail == {seq[m] for m in range(n, top)}:
            return n
    return None


def _weak_n0(records, seq: TSequence, q_max: int) -> int | None:
    """Least n such that every T_m (n <= m, T_m <= q_max) is a record."""
    rec = {r.q for r in records}
    top = seq.index_above(q_max)
    n0 = None
    for n in range(top - 1, -1, -1):
        if seq[n] not in rec:
            break
        n0 = n
    return n0


def _case2_entry(r: ApproxRecord, seq: TSequence, ctx: RauzyNormCtx) -> dict:
    """Numerical check of the second case of the main argument for one record.

    With digits d_j of q, z = 1 + (b+1) beta + sum_j d_j beta^(j+2) lies in
    Z[beta]; its alpha-image is f(qv - g) and its beta-image must be positive
    for the argument to apply.
    """
    params = ctx.params
    n = seq.index_above(r.q)
    z = FieldElement(1, params.b + 1, 0)
    for j, d in enumerate(greedy_encode(r.q, seq).lsb_first):
        if d:
            z = z + _beta_pow(j + 2, params).scale(d)
    at_beta = fe_embed(z, "beta", ctx.emb).value
    bound = ctx.kappa * ctx.emb.abs_alpha**n
    return {
        "q": r.q,
        "n": n,
        "value": float(r.n0_value),
        "kappa_abs_alpha_n": float(bound),
        "claim_holds": bool(r.n0_value >= bound),
        "beta_image_positive": bool(at_beta > 0),
        "field_norm": fe_norm(z, params),
    }


@lru_cache(maxsize=None)
def _beta_pow(k: int, params) -> FieldElement:
    return beta_power(k, params)


def theorem_verify(q_max: int, ctx: RauzyNormCtx, *, c_count: int = 10_000, c_window: int = 6,
                   min_tail: int = 3, threads: int = 1, raise_on_anomaly: bool = False
                   ) -> TheoremReport:
    """Scan records up to q_max and check them against T_n and the dichotomy."""
    seq = TSequence(ctx.params)
    if q_max < seq[2]:
        raise ValueError(f"q_max must be >= T_2 = {seq[2]}")
    records = best_approx_scan(q_max, ctx, threads, seq)
    t_values = seq.up_to(q_max)
    n0 = _exact_n0(records, seq, q_max)
    n0_weak = _weak_n0(records, seq, q_max)
    c_est = estimate_c(c_count, c_window, ctx, seq)
    anomalies = []

    if n0 is None:
        anomalies.append({"kind": "no-tail", "detail": "records never coincide with T_n up to q_max"})
    elif len(t_values) - n0 < min_tail:
        anomalies.append({"kind": "short-tail", "n0": n0,
                          "detail": f"only {len(t_values) - n0} T values in the coinciding tail"})
    if n0_weak is not None:
        for r in records:
            if r.q >= seq[n0_weak] and not r.is_T_n:
                anomalies.append({"kind": "extra-record", "q": r.q, "dichotomy": r.dichotomy})

    kappa, abs_alpha = ctx.kappa, ctx.emb.abs_alpha
    for r in records:
        off = (r.minimizer_g[0] - r.greedy_offset[0], r.minimizer_g[1] - r.greedy_offset[1])
        if off == (1, 0):
            anomalies.append({"kind": "offset-1-0", "q": r.q})
        if r.dichotomy == OTHER and r.n0_value < c_est.value:
            anomalies.append({"kind": "dichotomy", "q": r.q, "offset": list(off)})
        if r.is_T_n and n0_weak is not None and r.t_index >= n0_weak:
            ratio = r.n0_value / (kappa * abs_alpha**r.t_index)
            if abs(ratio - 1) >= DECAY_TOLERANCE:
                anomalies.append({"kind": "decay", "q": r.q, "ratio": float(ratio)})

    case2 = [_case2_entry(r, seq, ctx) for r in records if r.dichotomy == DELTA_MINUS_ONE_ONE]
    for entry in case2:
        if not entry["claim_holds"]:
            anomalies.append({"kind": "case2-claim", "q": entry["q"]})
    positive_from = None
    for entry in sorted(case2, key=lambda e: e["n"], reverse=True):
        if not entry["beta_image_positive"]:
            break
        positive_from = entry["n"]

    report = TheoremReport(ctx.params, q_max, ctx.emb.precision_bits, records, t_values,
                           n0, n0_weak, c_est, anomalies, case2, positive_from)
    if raise_on_anomaly and anomalies:
        raise VerificationFailed(report)
    return report
