"""Command-line front end.

Every command prints one JSON report on stdout (sorted keys, with a sha256
checksum of the result payload) and a one-line summary on stderr.  Exit codes:
0 on success, 1 on usage errors, 2 on domain errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from . import deform
from .centralizers import centralizer
from .errors import DomainError
from .explog import trunc_exp, trunc_log
from .orbits import OrbitRep, build_representative, is_pure, jordan_type, normalize_to_standard
from .partitions import (
    GSP4_RICHARDSON,
    GroupSpec,
    Partition,
    component_order,
    enumerate_admissible,
    formula_report,
    non_richardson,
)
from .rings import Matrix, RingSpec

DEFAULT_SEED = 20240


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _read_json(path: str):
    if path == "-":
        return json.load(sys.stdin)
    with open(path) as fh:
        return json.load(fh)


def _matrix(path: str, ring: RingSpec) -> Matrix:
    obj = _read_json(path)
    if isinstance(obj, dict):
        obj = obj.get("matrix", obj.get("N", obj.get("result")))
    return Matrix.from_json(ring, obj)


def _ring(text: str) -> RingSpec:
    try:
        return RingSpec.parse(text)
    except ValueError as exc:
        raise UsageError(f"--ring: {exc}") from exc


def _partition(text: str) -> Partition:
    try:
        return Partition.parse(text)
    except ValueError as exc:
        raise UsageError(f"--partition: {exc}") from exc


def _flag_dims(text: str) -> tuple[int, ...]:
    named = {"klingen": (1,), "siegel": (2,), "borel": (1, 2)}
    if text.lower() in named:
        return named[text.lower()]
    try:
        return tuple(int(x) for x in text.split(",") if x)
    except ValueError as exc:
        raise UsageError(f"--flag: cannot parse {text!r}") from exc


# ---------------------------------------------------------------------------
# Handlers
# ---------------------------------------------------------------------------


def cmd_partitions(args) -> tuple[dict, str]:
    if args.action == "enumerate":
        parts = enumerate_admissible(args.m, args.family)
        return {"partitions": [str(s) for s in parts]}, f"{len(parts)} admissible partitions"
    if args.action == "diagnostics":
        rep = formula_report(_partition(args.partition))
        rep["assumption"] = deform.PARABOLIC_ASSUMPTION
        return rep, f"{len(rep['discrepancies'])} closed-form discrepancies"
    if args.action == "non-richardson":
        rich = [Partition.parse(x) for x in args.richardson.split(";")] if args.richardson else list(GSP4_RICHARDSON)
        out = non_richardson(args.m, args.family, rich)
        return {"richardson": [str(r) for r in rich], "non_richardson": [str(s) for s in out]}, f"{len(out)} non-Richardson"
    t, order = component_order(_partition(args.partition), args.family)
    return {"t": t, "order": order}, f"component group of order {order}"


def cmd_orbits(args) -> tuple[dict, str]:
    if args.action == "build":
        rep = build_representative(_partition(args.partition), GroupSpec(args.family, args.m))
        return rep.to_json(), f"N_sigma for {rep.sigma} in {args.family}{args.m}"
    ring = _ring(args.ring)
    if args.action == "jordan":
        N = _matrix(args.input, ring)
        out = {"jordan_type": str(jordan_type(N))}
        if ring.rational and args.p:
            out["pure"] = is_pure(N, args.p)
        return out, f"Jordan type {out['jordan_type']}"
    rep = build_representative(_partition(args.partition), GroupSpec(args.family, args.m))
    C = normalize_to_standard(rep, ring)
    return {"C": C.to_json()}, "normalized to the standard form"


def cmd_centralizer(args) -> tuple[dict, str]:
    ring = _ring(args.ring)
    rep = build_representative(_partition(args.partition), GroupSpec(args.family, args.m))
    data = centralizer(rep, ring)
    return data.to_json(), f"dim z = {data.dim_z}, {data.order} components"


def cmd_explog(args) -> tuple[dict, str]:
    ring = _ring(args.ring)
    A = _matrix(args.input, ring)
    B = trunc_exp(A) if args.action == "exp" else trunc_log(A)
    return {"matrix": B.to_json()}, f"{args.action} of a {A.rows}x{A.cols} matrix"


def _condition(args, rep: deform.TqRep) -> deform.LiftCondition:
    kind = args.cond
    if kind == "minimally-ramified":
        if args.orbit:
            orbit = OrbitRep.from_json(_read_json(args.orbit))
        elif args.partition:
            orbit = build_representative(_partition(args.partition), rep.group.family)
        else:
            raise UsageError("--orbit or --partition is required for minimally-ramified")
        return deform.MinimallyRamified(orbit, args.nu)
    if kind == "parabolic":
        if not args.flag:
            raise UsageError("--flag is required for parabolic")
        return deform.ParabolicRamified(_flag_dims(args.flag), args.nu)
    if kind == "fixed-similitude":
        if args.nu is None:
            raise UsageError("--nu is required for fixed-similitude")
        return deform.FixedSimilitude(args.nu)
    return deform.Unrestricted()


def _targets(ring: RingSpec, steps: int, direction: str) -> list[RingSpec]:
    out = []
    cur = ring
    for _ in range(steps):
        if direction == "p":
            if cur.n != 1:
                raise UsageError("--direction p needs a ring with n=1")
            cur = RingSpec(cur.p, cur.a + 1, 1)
        else:
            cur = RingSpec(cur.p, cur.a, cur.n + 1)
        out.append(cur)
    return out


def cmd_deform(args) -> tuple[dict, str]:
    if args.action == "paper-example":
        rep = deform.worked_example(depth=args.depth)
        return rep, f"{rep['certificates_verified']} verified obstruction certificates"
    if not args.rep:
        raise UsageError("--rep is required")
    rep = deform.TqRep.from_json(_read_json(args.rep))
    cond = _condition(args, rep)
    if args.action == "validate":
        bad = deform.validate(rep)
        return {"ok": not bad, "violations": bad}, "ok" if not bad else f"{len(bad)} violations"
    if args.action == "check":
        ok = deform.check_condition(rep, cond)
        return {"condition": cond.to_json(), "satisfied": ok}, f"condition {'holds' if ok else 'fails'}"
    if args.action == "tangent":
        rbar = rep.residue()
        tr = deform.tangent_report(rbar, cond)
        return tr.to_json(), f"dim_lifting = {tr.dim_lifting}"
    if args.action == "search":
        out = deform.search_unliftable(rep.residue(), cond, depth=args.depth)
        return out.to_json(), type(out).__name__
    # lift
    rng = np.random.default_rng(args.seed) if args.random else None
    lifter = deform.Lifter(rep.residue(), cond)
    cur = lifter.with_witness(rep)
    chain = [cur.to_json()]
    for target in _targets(rep.ring, args.steps, args.direction):
        out = deform.lift_step(cur, cond, target, rng, lifter)
        if isinstance(out, deform.ObstructionCertificate):
            return {"chain": chain, "obstruction": out.to_json()}, f"obstructed at degree {out.degree}"
        cur = out
        chain.append(cur.to_json())
    return {"chain": chain, "lift": chain[-1]}, f"lifted to {cur.ring}"


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="tamelift", description="Nilpotent orbits and tame lifting computations.")
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for randomized choices")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    pp = sub.add_parser("partitions", help="partition combinatorics")
    pp.add_argument("action", choices=["enumerate", "diagnostics", "non-richardson", "component-order"])
    pp.add_argument("--family", default="sp")
    pp.add_argument("--m", type=int, default=4)
    pp.add_argument("--partition")
    pp.add_argument("--richardson", help="semicolon-separated partitions (default: the GSp4 set)")
    pp.set_defaults(func=cmd_partitions)

    po = sub.add_parser("orbits", help="orbit representatives")
    po.add_argument("action", choices=["build", "jordan", "normalize"])
    po.add_argument("--family", default="sp")
    po.add_argument("--m", type=int)
    po.add_argument("--partition")
    po.add_argument("--ring", default="q")
    po.add_argument("--in", dest="input")
    po.add_argument("--p", type=int, help="prime for the purity test of a rational matrix")
    po.set_defaults(func=cmd_orbits)

    pc = sub.add_parser("centralizer", help="centralizer of N_sigma")
    pc.add_argument("--family", required=True)
    pc.add_argument("--m", type=int)
    pc.add_argument("--partition", required=True)
    pc.add_argument("--ring", default="p=7")
    pc.set_defaults(func=cmd_centralizer)

    pe = sub.add_parser("explog", help="truncated exponential and logarithm")
    pe.add_argument("action", choices=["exp", "log"])
    pe.add_argument("--in", dest="input", required=True)
    pe.add_argument("--ring", required=True)
    pe.set_defaults(func=cmd_explog)

    pd = sub.add_parser("deform", help="tame representations and lifting")
    pd.add_argument("action", choices=["validate", "check", "lift", "tangent", "search", "paper-example"])
    pd.add_argument("--rep")
    pd.add_argument("--cond", default="unrestricted",
                    choices=["unrestricted", "fixed-similitude", "minimally-ramified", "parabolic"])
    pd.add_argument("--orbit")
    pd.add_argument("--partition")
    pd.add_argument("--flag", help="klingen, siegel, borel or comma-separated isotropic dimensions")
    pd.add_argument("--nu", type=int)
    pd.add_argument("--steps", type=int, default=1)
    pd.add_argument("--direction", choices=["eps", "p"], default="eps")
    pd.add_argument("--depth", type=int, default=3)
    pd.add_argument("--random", action="store_true", help="random lifts instead of echelon-order ones")
    pd.set_defaults(func=cmd_deform)
    return ap


def _fill_m(args) -> None:
    if getattr(args, "m", None) is None and getattr(args, "partition", None):
        args.m = _partition(args.partition).total


def checksum(payload) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = build_parser().parse_args(argv)
        _fill_m(args)
        if args.command in ("orbits", "centralizer") and args.m is None:
            raise UsageError("--m or --partition is required")
        result, summary = args.func(args)
    except (UsageError, ValueError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DomainError as exc:
        print(json.dumps({"command": argv, "error": exc.to_json()}, sort_keys=True))
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = {"command": argv, "result": result, "checksum": checksum(result)}
    print(json.dumps(report, sort_keys=True))
    print(summary, file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
