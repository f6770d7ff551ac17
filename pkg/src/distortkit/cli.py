"""``distortkit`` command line.

Exit codes: 0 ok, 2 parse error, 3 invalid input, 4 infeasible construction
(or a search that found nothing), 5 missing artifact.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import constructions as cons
from . import distortion as dist
from . import schlumprecht as sch
from .exceptions import InfeasibleConstructionError, InvalidInputError, NotFoundError
from .spaces import CalibrationTable, SpaceParams, calibrate
from .vectors import EXACT, SparseVector, vector_from_json, vector_to_json

EXIT_OK, EXIT_PARSE, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_MISSING = 0, 2, 3, 4, 5


class ParseFailure(Exception):
    pass


class MissingArtifact(Exception):
    pass


# -- config and I/O -------------------------------------------------------------

def _read_json(path: str):
    p = Path(path)
    if not p.exists():
        raise MissingArtifact(f"no such file: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ParseFailure(f"{path}: malformed JSON: {exc}") from exc


def read_vector(path: str) -> SparseVector:
    obj = _read_json(path)
    try:
        return vector_from_json(obj)
    except InvalidInputError as exc:
        raise ParseFailure(f"{path}: {exc}") from exc


def read_bundle(path: str) -> dict:
    obj = _read_json(path)
    if not isinstance(obj, dict) or "kind" not in obj or "record" not in obj:
        raise ParseFailure(f"{path}: not a construction bundle")
    return obj


def space_from(args) -> SpaceParams:
    """Parse ``--space`` and attach a calibration for the asymptotic-l_p kinds.

    The table lives in the workspace as ``calibration-<tag>.json``; it is
    measured and written on first use and read back afterwards.
    """
    space = SpaceParams.parse(args.space, trunc=args.trunc)
    if space.kind in ("Tp", "T"):
        ws = Path(args.workspace)
        path = ws / f"calibration-{space.tag.replace(':', '_')}.json"
        if path.exists():
            table = CalibrationTable.load(path)
        else:
            table = calibrate(space, seed=args.seed)
            ws.mkdir(parents=True, exist_ok=True)
            table.save(path)
        space = space.with_calibration(table)
    return space


def emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def fmt_number(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    return f"{float(v):.12g}"


# -- commands -------------------------------------------------------------------

def cmd_norm(args) -> int:
    x = read_vector(args.vector)
    space = SpaceParams.parse(args.space, trunc=args.trunc)
    space.check(x)
    if space.kind == "T" and x.mode == EXACT:
        from .tsirelson import t_norm
        value = t_norm(x)
    elif space.kind == "S":
        b = sch.s_norm_bounds(x)
        if not b.tight:
            print(f"[{fmt_number(b.lower)}, {fmt_number(b.upper)}]")
            return EXIT_OK
        value = b.upper
    else:
        value = space.norm(x)
    print(fmt_number(value))
    return EXIT_OK


def cmd_functional(args) -> int:
    x = read_vector(args.vector)
    space = SpaceParams.parse(args.space, trunc=args.trunc)
    space.check(x)
    if not x:
        raise InvalidInputError("the zero vector has no norming functional")
    if space.kind == "S":
        tree = sch.s_norming_functional(x)
        if not sch.validate_in_B(tree):  # pragma: no cover
            raise InvalidInputError("extracted functional failed validation")
        doc = {"kind": "tree", "tree": tree.to_json(),
               "pairing": sch.functional_eval(tree, x.to_float())}
    else:
        if space.kind == "T" and x.mode == EXACT:
            from .tsirelson import t_norming_functional
            f = t_norming_functional(x)
        else:
            f = space.norming_functional(x)
        doc = {"kind": "vector", "vector": vector_to_json(f)}
    emit(args, json.dumps(doc, sort_keys=True) + "\n")
    return EXIT_OK


def _schedule(args) -> cons.LacunaritySchedule:
    sizes = tuple(args.sizes) if args.sizes else None
    widths = tuple(args.widths) if args.widths else None
    return cons.LacunaritySchedule(args.scale, sizes, widths)


def cmd_build(args) -> int:
    kind = args.kind
    params = {"kind": kind, "seed": args.seed, "scale": args.scale, "budget": args.budget}
    if kind == "average":
        obj = cons.make_l1_average(args.n, args.start, args.r, args.tol)
        params.update(n=args.n, r=obj.r, start=args.start)
    elif kind == "ris":
        obj = cons.make_ris(args.k, _schedule(args), args.start, args.trunc)
        params.update(k=args.k, start=args.start)
    elif kind == "ak":
        obj = cons.make_ak(args.k, _schedule(args), args.start, trunc=args.trunc)
        params.update(k=args.k, start=args.start)
    elif kind == "dm":
        obj = cons.make_dm(args.m, args.start, args.r)
        params.update(m=args.m, r=args.r, start=args.start)
    elif kind == "delta":
        space = space_from(args)
        obj = cons.make_delta(space, args.N, args.m, args.start, args.budget)
        params.update(space=space.tag, N=args.N, m=args.m, start=args.start)
    else:
        space = space_from(args)
        sizes = args.sizes or [2] * args.k
        obj = cons.make_gamma(space, args.k, sizes, _schedule(args), args.budget, args.start)
        params.update(space=space.tag, k=args.k, sizes=list(sizes), start=args.start)
    bundle = cons.bundle(obj, kind, params)
    if not all(bundle["checks"].values()):
        failed = [k for k, v in bundle["checks"].items() if not v]
        raise InfeasibleConstructionError(f"checks failed: {', '.join(failed)}")
    if args.verify:
        ok, _ = cons.verify_bundle(json.loads(json.dumps(bundle)))
        if not ok:
            raise InvalidInputError("bundle did not re-verify after a JSON round trip")
    emit(args, json.dumps(bundle, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    bundle = read_bundle(args.bundle)
    try:
        ok, fresh = cons.verify_bundle(bundle)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseFailure(f"{args.bundle}: malformed bundle: {exc}") from exc
    for k in sorted(fresh):
        print(f"{k}\t{'pass' if fresh[k] else 'FAIL'}")
    good = ok and all(fresh.values())
    print("verified" if good else "NOT verified")
    return EXIT_OK if good else EXIT_INVALID


# -- probes ---------------------------------------------------------------------

def _records(paths, kinds=None):
    out = []
    for path in paths or []:
        b = read_bundle(path)
        if kinds and b["kind"] not in kinds:
            raise InvalidInputError(f"{path}: expected a {'/'.join(kinds)} bundle, got {b['kind']}")
        out.append(cons.load_record(b))
    return out


def _report(args, rows: list[dict], doc=None, plot: tuple | None = None) -> None:
    if args.format == "json":
        emit(args, dist.dumps_report(doc if doc is not None else {"rows": rows}))
    else:
        emit(args, dist.rows_to_csv(rows))
    if args.plot and plot and rows:
        name = Path(args.out).name if args.out else "report.csv"
        x, ys, title = plot
        Path(args.plot).write_text(dist.gnuplot_script(name, x, ys, list(rows[0]), title))


def probe_ortho(args) -> list[dict]:
    recs = _records(args.bundle, ("dm",))
    if len(recs) != 2:
        raise InvalidInputError("ortho needs exactly two dm bundles")
    pairing, d, ok = dist.orthogonality_probe(recs[0], recs[1])
    return [{"sqrt_pairing": pairing, "l1_distance": d, "bound_check": ok}]


def probe_fg(args, space) -> list[dict]:
    rows = []
    for n in range(1, args.n + 1):
        est = dist.estimate_FG(space, n, args.after, args.budget, args.seed)
        rows.append({"n": n, "F": est.F, "G": est.G, "space": est.space, "after_k": args.after})
    return rows


def probe_lemma1(args) -> tuple[list[dict], dict]:
    sched = cons.LacunaritySchedule(args.scale)
    row = [cons.make_ak(args.k, sched, args.start)]
    rows, mats = [], []
    for l in args.l:
        col = [cons.make_ak(l, sched, args.start)]
        m = dist.cross_action(row, col, args.k, l, args.scale, args.seed)
        mats.append(m.to_json())
        rows.append({"k": args.k, "l": l, "constructed": m.entries[0][0],
                     "sup_A_k": m.sup_entries[0] if m.sup_entries else None,
                     "matched": m.matched[0]})
    return rows, {"rows": rows, "matrices": mats}


def probe_lemma2(args, space) -> tuple[list[dict], dict]:
    couples = _records(args.bundle, ("delta", "gamma"))
    if not couples:
        couples = [cons.make_gamma(space, 2, (2, 3), cons.LacunaritySchedule(args.scale),
                                   args.budget, args.start)]
    prof = dist.modulus_profile(space, args.eps) if space.C is not None else None
    res = dist.lemma2_probe(couples, space, args.eps, args.seed, prof)
    rows = [{"eps": e, "max_Ey": y, "max_Eystar": s,
             "alpha": res.alpha[i] if res.alpha else None}
            for i, (e, y, s) in enumerate(zip(res.eps, res.observed_y, res.observed_ystar))]
    return rows, res.to_json()


def probe_seq(args, space) -> tuple[list[dict], dict]:
    sizes = args.sizes or list(range(1, args.count + 1))
    prof = dist.modulus_profile(space, (0.5, 0.25))
    rep = dist.seq_distortion_suite(space, sizes, args.count, args.budget, args.scale,
                                    args.seed, profile=prof)
    rows = [{"witness": k + 1, "norm": j + 1, "value": rep.table[k][j]}
            for k in range(len(rep.table)) for j in range(len(rep.table))]
    return rows, rep.to_json()


def probe_distort(args, space) -> tuple[list[dict], dict]:
    recs = _records(args.bundle, ("ak",))
    if len(recs) < 2:
        raise InvalidInputError("distort needs two ak bundles: the family source and the b witness")
    S = SpaceParams("S")
    fam, other = recs[0], recs[1]
    spec = dist.RenormSpec((fam.v,), "epsilon", args.eps[0], S)
    a = fam.u * (1.0 / S.norm(fam.u))
    b = other.u * (1.0 / S.norm(other.u))
    rep = dist.distortion_witness(a, b, spec, args.delta)
    return [rep.row()], rep.row()


def probe_asymp(args, space) -> tuple[list[dict], dict]:
    recs = _records(args.bundle, ("delta",))
    if not recs:
        raise InvalidInputError("asymp needs a delta bundle")
    rows = []
    for c in recs:
        sp = SpaceParams.parse(c.space, args.trunc)
        sub = dist.BlockSubspace.normalized(c.blocks, sp)
        d, _ = dist.asymptotic_distance([c.z], sub, args.budget)
        rows.append({"space": c.space, "N": c.N, "m": c.m, "distance": d})
    return rows, {"rows": rows}


def cmd_probe(args) -> int:
    kind = args.kind
    if kind == "ortho":
        rows = probe_ortho(args)
        _report(args, rows)
        return EXIT_OK
    if kind == "lemma1":
        rows, doc = probe_lemma1(args)
        _report(args, rows, doc, ("l", ["constructed", "sup_A_k"], f"actions of A*_{args.k}"))
        return EXIT_OK
    space = space_from(args)
    if kind == "fg":
        rows = probe_fg(args, space)
        _report(args, rows, None, ("n", ["F", "G"], space.tag))
        return EXIT_OK
    handler = {"lemma2": probe_lemma2, "seq": probe_seq, "distort": probe_distort,
               "asymp": probe_asymp}[kind]
    rows, doc = handler(args, space)
    plot = ("eps", ["max_Ey", "max_Eystar", "alpha"], "alpha") if kind == "lemma2" else None
    _report(args, rows, doc, plot)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def _positive(kind):
    def parse(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return parse


def _scale(text):
    v = float(text)
    if not (0 < v <= 1):
        raise argparse.ArgumentTypeError(f"scale must lie in (0, 1], got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--space", default="s", help="s | t | t2 | tp:<p> | lp:<p>")
    common.add_argument("--trunc", type=_positive(int), default=1_000_000)
    common.add_argument("--scale", type=_scale, default=1e-3, help="lacunarity scale sigma")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--budget", type=_positive(int), default=64)
    common.add_argument("--tol", type=_positive(float), default=1e-9)
    common.add_argument("--out", default=None)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--verify", action="store_true")
    common.add_argument("--workspace", default=".", help="directory for calibration tables")

    ap = argparse.ArgumentParser(prog="distortkit", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norm", parents=[common], help="print the norm of a vector file")
    p.add_argument("vector")
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("functional", parents=[common], help="write a norming functional")
    p.add_argument("vector")
    p.set_defaults(func=cmd_functional)

    p = sub.add_parser("build", parents=[common], help="build a construction bundle")
    p.add_argument("kind", choices=("average", "ris", "ak", "dm", "delta", "gamma"))
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--N", type=int, default=4)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--sizes", type=int, nargs="*")
    p.add_argument("--widths", type=int, nargs="*")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("probe", parents=[common], help="run a measurement and emit a report")
    p.add_argument("kind", choices=("distort", "asymp", "fg", "lemma1", "lemma2", "ortho", "seq"))
    p.add_argument("--bundle", action="append", default=[])
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--after", type=int, default=4)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--l", type=int, nargs="*", default=[3, 4, 5])
    p.add_argument("--count", type=int, default=2)
    p.add_argument("--sizes", type=int, nargs="*")
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--eps", type=float, nargs="*", default=[0.3, 0.1, 0.03])
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--plot", default=None, help="write a gnuplot script here")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("verify", parents=[common], help="re-run the checks of a bundle")
    p.add_argument("bundle")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ParseFailure as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except MissingArtifact as exc:
        print(f"missing: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (InfeasibleConstructionError, NotFoundError) as exc:
        ineq = getattr(exc, "inequality", None)
        print(f"infeasible: {exc}" + (f" [{ineq}]" if ineq else ""), file=sys.stderr)
        return EXIT_INFEASIBLE
    except InvalidInputError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
