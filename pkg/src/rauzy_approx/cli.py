"""Command-line entry point.

Exit codes: 0 success, 1 usage or parameter error, 2 verification found
anomalies, 3 precision exhausted.
"""
from __future__ import annotations

import argparse
import random
import sys
import warnings
from contextlib import contextmanager

import numpy as np

from . import approximation as approx
from . import formats
from .errors import InadmissibleDigits, OutOfRange, PrecisionExhausted, RauzyError
from .field import (
    DEFAULT_PRECISION,
    FieldElement,
    NeighborAssumptionWarning,
    fe_embed,
    fe_mul,
    isolate_roots,
    validate_params,
)
from .geometry import cloud_R, embedded_deltas, iter_cloud_R, lattice_scan, rauzy_norm_ctx
from .numeration import (
    DigitString,
    TSequence,
    akiyama_classify,
    decode,
    greedy_encode,
    renyi_expansion_of_one,
)

EXIT_OK, EXIT_USAGE, EXIT_ANOMALIES, EXIT_PRECISION = 0, 1, 2, 3


class UsageError(Exception):
    pass


@contextmanager
def _output(path: str | None, binary: bool = False):
    if path is None or path == "-":
        if binary:
            yield sys.stdout.buffer
        else:
            yield sys.stdout
        return
    # newline="" keeps "\n" on every platform
    with open(path, "wb" if binary else "w", **({} if binary else {"newline": ""})) as fh:
        yield fh


def _params(args):
    params = validate_params(args.a, args.b, warn=False)
    if params.neighbor_warning and args.warn_neighbors:
        print(f"note: K={params.K} >= 2; results assume the 6-neighbour case (K=1)", file=sys.stderr)
    return params


def _emb(args):
    return isolate_roots(_params(args), args.precision)


def cmd_roots(args) -> int:
    emb = _emb(args)
    mp = emb.ctx
    out = {
        "schema": 1,
        "a": emb.params.a,
        "b": emb.params.b,
        "K": emb.params.K,
        "precision_bits": emb.precision_bits,
        "beta": mp.nstr(emb.beta, 40),
        "alpha_re": mp.nstr(mp.re(emb.alpha), 40),
        "alpha_im": mp.nstr(mp.im(emb.alpha), 40),
        "abs_alpha": mp.nstr(emb.abs_alpha, 40),
    }
    if args.self_check:
        rng = random.Random(args.seed)
        worst = 0.0
        for _ in range(args.self_check):
            x = FieldElement(*(rng.randint(-1000, 1000) for _ in range(3)))
            y = FieldElement(*(rng.randint(-1000, 1000) for _ in range(3)))
            for which in ("beta", "alpha"):
                ex, ey = fe_embed(x, which, emb), fe_embed(y, which, emb)
                exy = fe_embed(fe_mul(x, y, emb.params), which, emb)
                bound = exy.error + abs(ex.value) * ey.error + abs(ey.value) * ex.error + ex.error * ey.error
                worst = max(worst, float(abs(exy.value - ex.value * ey.value) / bound))
        out["self_check"] = {"pairs": args.self_check, "seed": args.seed, "max_error_ratio": worst}
    with _output(args.out) as fh:
        fh.write(formats.dumps(out) + "\n")
    if out.get("self_check", {}).get("max_error_ratio", 0.0) > 1.0:
        print("verification-failed: embedding error above its bound", file=sys.stderr)
        return EXIT_ANOMALIES
    return EXIT_OK


def cmd_seq(args) -> int:
    seq = TSequence(_params(args))
    with _output(args.out) as fh:
        fh.write("n,T\n")
        for n in range(-4, args.n_max + 1):
            fh.write(f"{n},{seq[n]}\n")
    return EXIT_OK


def cmd_encode(args) -> int:
    if args.n < 0:
        raise UsageError("--n must be nonnegative")
    print(greedy_encode(args.n, TSequence(_params(args))))
    return EXIT_OK


def cmd_decode(args) -> int:
    params = _params(args)
    print(decode(DigitString.parse(args.digits, params), TSequence(params)))
    return EXIT_OK


def cmd_expand(args) -> int:
    print(",".join(map(str, renyi_expansion_of_one(args.count, _emb(args)))))
    return EXIT_OK


def cmd_classify(args) -> int:
    case = akiyama_classify(args.a, args.b)
    f = "unknown" if case.has_property_f is None else str(case.has_property_f).lower()
    print(f"{case.case},F={f}")
    return EXIT_OK


def _cloud_chunks(args, emb):
    """(n, 2) real arrays for E, complex vectors for R."""
    if args.kind == "R":
        if args.depth is None or args.depth < 2:
            raise UsageError("--depth >= 2 is required for --kind R")
        yield from iter_cloud_R(args.depth, emb)
    else:
        if args.count is None or args.count < 1:
            raise UsageError("--count >= 1 is required for --kind E")
        seq = TSequence(emb.params)
        step = 1 << 16
        for s in range(0, args.count, step):
            n = np.arange(s, min(s + step, args.count), dtype=np.int64)
            yield embedded_deltas(n, emb, seq)


def cmd_fractal(args) -> int:
    emb = _emb(args)
    fmt = args.format or "csv"
    if fmt == "ppm":
        box = formats.bounding_box(_cloud_chunks(args, emb))
        canvas = formats.rasterize(_cloud_chunks(args, emb), box)
        with _output(args.out, binary=True) as fh:
            fh.write(formats.ppm_bytes(canvas))
    elif fmt == "csv":
        with _output(args.out) as fh:
            formats.write_cloud_csv(args.kind, _cloud_chunks(args, emb), fh)
    else:
        raise UsageError("fractal supports --format csv or ppm")
    return EXIT_OK


def cmd_scan(args) -> int:
    emb = _emb(args)
    cloud = cloud_R(args.depth, emb, materialize=False)
    res = lattice_scan(cloud, args.window, args.eps)
    out = {
        "schema": 1,
        "a": emb.params.a,
        "b": emb.params.b,
        "depth": res.depth,
        "window": res.window,
        "eps": res.eps,
        "truncation": res.truncation,
        "cloud_points": len(cloud),
        "hits": [{"p": p, "q": q, "distance": d} for p, q, d in res.hits],
        "expected": [list(e) for e in sorted(res.expected)],
        "hit_max": res.hit_max,
        "outside_smallest": res.outside_smallest,
        "separation": res.separation,
        "conclusive": res.conclusive,
    }
    with _output(args.out) as fh:
        fh.write(formats.dumps(out) + "\n")
    return EXIT_OK


def cmd_approx(args) -> int:
    ctx = rauzy_norm_ctx(_emb(args))
    seq = TSequence(ctx.params)
    if args.q is not None:
        res = approx.closest_lattice(args.q, ctx)
        tag, off = approx.classify_dichotomy(args.q, res.g, seq)
        out = {"schema": 1, "q": args.q, "g": list(res.g), "value": res.value, "error": res.error,
               "certified": res.certified, "dichotomy": tag, "offset": list(off)}
        with _output(args.out) as fh:
            fh.write(formats.dumps(out) + "\n")
        return EXIT_OK
    if args.qmax is None:
        raise UsageError("approx needs --q or --qmax")
    records = approx.best_approx_scan(args.qmax, ctx, args.threads, seq)
    with _output(args.out) as fh:
        if (args.format or "csv") == "json":
            rep = [{"q": r.q, "value": r.n0_value, "g": list(r.minimizer_g), "dichotomy": r.dichotomy,
                    "is_T_n": r.is_T_n, "n": r.t_index} for r in records]
            fh.write(formats.dumps({"schema": 1, "records": rep}) + "\n")
        else:
            formats.write_records_csv(records, fh)
    return EXIT_OK


def cmd_verify(args) -> int:
    ctx = rauzy_norm_ctx(_emb(args))
    report = approx.theorem_verify(args.qmax, ctx, c_count=args.c_count, c_window=args.c_window,
                                   threads=args.threads)
    with _output(args.out) as fh:
        if (args.format or "json") == "csv":
            formats.write_records_csv(report.records, fh)
        else:
            fh.write(formats.dumps(report.to_dict()) + "\n")
    if report.anomalies:
        kinds = sorted({a["kind"] for a in report.anomalies})
        print(f"verification-failed: {len(report.anomalies)} anomalies ({','.join(kinds)})",
              file=sys.stderr)
        return EXIT_ANOMALIES
    return EXIT_OK


def cmd_estimate_c(args) -> int:
    ctx = rauzy_norm_ctx(_emb(args))
    est = approx.estimate_c(args.count, args.window, ctx)
    out = {"schema": 1, "a": ctx.params.a, "b": ctx.params.b, "value": est.value,
           "half_count_value": est.half_count_value, "margin": est.margin, "count": est.count,
           "window": est.window, "argmin_N": est.argmin_N, "argmin_g": list(est.argmin_g),
           "is_proof": est.is_proof}
    with _output(args.out) as fh:
        fh.write(formats.dumps(out) + "\n")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--a", type=int, required=True)
    common.add_argument("--b", type=int, required=True)
    common.add_argument("--precision-bits", "--precision", dest="precision", type=int,
                        default=DEFAULT_PRECISION, help="mantissa bits")
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "ppm", "json"), default=None)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--warn-neighbors", action=argparse.BooleanOptionalAction, default=True)

    parser = _Parser(prog="rauzy-approx", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("roots", parents=[common], help="certified beta and alpha")
    p.add_argument("--self-check", type=int, default=0, metavar="PAIRS",
                   help="random embedding homomorphism checks")
    p.set_defaults(func=cmd_roots)

    p = sub.add_parser("seq", parents=[common], help="T_n for -4 <= n <= n-max")
    p.add_argument("--n-max", type=int, default=20)
    p.set_defaults(func=cmd_seq)

    p = sub.add_parser("encode", parents=[common], help="greedy T-digits of N")
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", parents=[common], help="integer value of T-digits")
    p.add_argument("--digits", required=True, help="comma separated, most significant first")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("expand", parents=[common], help="Renyi expansion of 1")
    p.add_argument("--count", type=int, default=30)
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("classify", help="Akiyama case of (a, b)")
    p.add_argument("--a", type=int, required=True)
    p.add_argument("--b", type=int, required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("fractal", parents=[common], help="E or R point cloud as CSV or PPM")
    p.add_argument("--kind", choices=("E", "R"), required=True)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--count", type=int, default=None)
    p.set_defaults(func=cmd_fractal)

    p = sub.add_parser("scan", parents=[common], help="lattice points on the R fractal")
    p.add_argument("--depth", type=int, default=14)
    p.add_argument("--window", type=int, default=4)
    p.add_argument("--eps", type=float, default=None)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("approx", parents=[common], help="N_0 of one q, or all records up to q-max")
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--qmax", type=int, default=None)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("verify", parents=[common], help="check records against T_n")
    p.add_argument("--qmax", type=int, required=True)
    p.add_argument("--c-count", type=int, default=10_000)
    p.add_argument("--c-window", type=int, default=6)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("estimate-c", parents=[common], help="sampled distance constant")
    p.add_argument("--count", type=int, default=10_000)
    p.add_argument("--window", type=int, default=6)
    p.set_defaults(func=cmd_estimate_c)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NeighborAssumptionWarning)
            return args.func(args)
    except PrecisionExhausted as exc:
        print(f"error: PrecisionExhausted: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except (UsageError, OutOfRange, InadmissibleDigits, ValueError, RauzyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
