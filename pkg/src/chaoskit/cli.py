"""``chaoskit`` command line.

Exit codes: 0 success, 1 verification failure, 2 usage error.  Human-readable
output goes to stdout; data files are written only to ``--out``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import coverage, experiments, gaussian_mc, poisson_mc, stats, verify
from . import counterexample as cx
from .errors import ChaosKitError
from .space_kernel import KernelPair, load_kernel

DEFAULT_SEED = 42
SEED_ENV = "CHAOSKIT_SEED"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _sizes(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.replace(" ", "").split(",") if s)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from exc


def _common(p: argparse.ArgumentParser, samples: Optional[int] = None) -> None:
    p.add_argument("--seed", type=int, default=None, help=f"base seed (default ${SEED_ENV} or {DEFAULT_SEED})")
    p.add_argument("--out", type=Path, default=None, help="data output file")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=_positive_int, default=1, help="worker cap")
    p.add_argument("--config", type=Path, default=None, help="JSON file mirroring the flags; flags win")
    if samples is not None:
        p.add_argument("--samples", type=_positive_int, default=samples)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chaoskit", description="Two-chaos fourth-moment toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the randomized identity suite")
    _common(p)
    p.add_argument("--trials", type=_positive_int, default=verify.DEFAULT_TRIALS)
    p.add_argument("--only", action="append", default=None, help="restrict to a named identity (repeatable)")
    p.add_argument("--inject-bug", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("counterexample", help="single-atom Poisson counterexample")
    _common(p)
    p.add_argument("--mc-check", type=_positive_int, default=None, metavar="N",
                   help="append Monte Carlo moments from N draws")

    p = sub.add_parser("converge", help="convergence table for a kernel family")
    _common(p, experiments.DEFAULT_SAMPLES)
    p.add_argument("--family", choices=[f.replace("_", "-") for f in experiments.FAMILIES], default="diag-hermite")
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--sizes", type=_sizes, default=experiments.DEFAULT_SIZES)
    p.add_argument("--mix", type=float, default=experiments.DEFAULT_MIX, help="standard deviation share of the order-p part")
    p.add_argument("--timing", action="store_true", help="fill runtime_ms (makes output nondeterministic)")

    p = sub.add_parser("sample", help="dump a sample batch as CSV")
    _common(p, 10_000)
    p.add_argument("--family", choices=[f.replace("_", "-") for f in experiments.FAMILIES], default="diag-hermite")
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--n", type=_positive_int, default=4, help="number of atoms")
    p.add_argument("--mix", type=float, default=experiments.DEFAULT_MIX)
    p.add_argument("--kernel-f", type=Path, default=None, help="JSON kernel for X (overrides --family)")
    p.add_argument("--kernel-g", type=Path, default=None, help="JSON kernel for Y")
    p.add_argument("--sampler", choices=("gaussian", "poisson"), default=None)

    p = sub.add_parser("coverage", help="validate the coverage registry and render it")
    p.add_argument("--out", type=Path, default=Path("docs/coverage.md"))
    p.add_argument("--tests", type=Path, default=Path("tests"))
    p.add_argument("--check", action="store_true", help="fail if the rendered file is stale")
    p.add_argument("--config", type=Path, default=None)
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {args.config}: {exc}")
    if not isinstance(cfg, dict):
        parser.error("config must be a JSON object")
    # re-parse with config values as defaults so explicit flags still win
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("help", "config"):
            parser.error(f"unknown config key {key!r} for {args.command}")
        action = known[dest]
        if dest == "sizes" and isinstance(value, list):
            value = tuple(int(v) for v in value)
        elif action.type is not None and not isinstance(value, (bool, list, tuple)):
            value = action.type(str(value))
        defaults[dest] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def resolve_seed(args: argparse.Namespace) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    return DEFAULT_SEED


def _write(path: Optional[Path], text: str) -> None:
    if path is None:
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _records_csv(records: list[dict], fields: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in records:
        w.writerow([experiments._fmt(r.get(k)) for k in fields])
    return buf.getvalue()


def cmd_verify(args: argparse.Namespace) -> int:
    names = [c[0] for c in verify.CHECKS]
    for n in args.only or []:
        if n not in names:
            raise UsageError(f"unknown identity {n!r}; choose from {', '.join(names)}")
    results = verify.run_suite(resolve_seed(args), args.trials, args.inject_bug, args.only)
    for r in results:
        flag = "PASS" if r.passed else "FAIL"
        print(f"{flag} {r.name:26s} trials={r.trials:5d} max_residual={r.max_residual:.3e} tol={r.tolerance:.0e}")
    records = [r.to_dict() for r in results]
    if args.format == "json":
        _write(args.out, json.dumps(records, indent=2) + "\n")
    else:
        _write(args.out, _records_csv(records, ["name", "trials", "max_residual", "tolerance", "passed"]))
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("failing identities: " + ", ".join(failed))
        return EXIT_FAIL
    print(f"all {len(results)} identities pass")
    return EXIT_OK


def cmd_counterexample(args: argparse.Namespace) -> int:
    rep = cx.run_counterexample()
    exact = {ab: cx.uv_moment_exact(*ab) for ab in cx.PRINTED_TABLE}
    mc = cx.monte_carlo_table(args.mc_check, resolve_seed(args), args.threads) if args.mc_check else None
    mism = rep.table_mismatches()
    header = f"{'moment':10s} {'printed':>8s} {'series':>22s} {'exact':>6s}"
    if mc:
        header += f" {'mc':>12s} {'se':>10s}"
    print(header)
    rows = []
    for (a, b), val in rep.moment_table.items():
        name = f"U^{a}V^{b}"
        line = f"{name:10s} {cx.PRINTED_TABLE[(a, b)]:8d} {val:22.15f} {exact[(a, b)]:6d}"
        row = {"a": a, "b": b, "printed": cx.PRINTED_TABLE[(a, b)], "series": val, "exact": exact[(a, b)],
               "match": (a, b) not in mism}
        if mc:
            m, se = mc[(a, b)]
            line += f" {m:12.5f} {se:10.5f}"
            row.update(mc=m, mc_se=se)
        if (a, b) in mism:
            line += "  MISMATCH"
        print(line)
        rows.append(row)
    print(f"alpha* = {rep.alpha_star!r} (real roots {rep.quartic.real_roots})")
    print(f"E[S^2] = {rep.m2!r}  E[S^3] = {rep.m3!r}  E[S^4] = {rep.m4!r}")
    print(f"series tail bound <= {rep.tail_bound:.2e}")
    if args.format == "json":
        doc = rep.to_dict()
        doc["exact_table"] = {f"{a},{b}": v for (a, b), v in exact.items()}
        doc["printed_table"] = {f"{a},{b}": v for (a, b), v in cx.PRINTED_TABLE.items()}
        doc["mismatches"] = [f"{a},{b}" for a, b in mism]
        if mc:
            doc["monte_carlo"] = {f"{a},{b}": {"mean": m, "se": se} for (a, b), (m, se) in mc.items()}
        _write(args.out, json.dumps(doc, indent=2) + "\n")
    else:
        fields = ["a", "b", "printed", "series", "exact", "match"] + (["mc", "mc_se"] if mc else [])
        _write(args.out, _records_csv(rows, fields))
    if mism:
        names = ", ".join(f"E[U^{a}V^{b}]" for a, b in mism)
        print(f"printed values not reproduced: {names}")
        return EXIT_FAIL
    return EXIT_OK


def _check_orders(p: int, q: int) -> None:
    if p == q or min(p, q) < 1:
        raise UsageError(f"need distinct orders >= 1, got p={p}, q={q}")
    if p % 2 == 0 or q % 2 == 1:
        raise UsageError(f"parity mode requires p odd, q even; got p={p}, q={q}")


def cmd_converge(args: argparse.Namespace) -> int:
    _check_orders(args.p, args.q)
    try:
        spec = experiments.FamilySpec(args.family.replace("-", "_"), args.p, args.q, args.mix, args.sizes)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows = experiments.run_convergence(spec, args.samples, resolve_seed(args), args.threads, args.timing)
    print(f"{'n':>6s} {'kappa4':>12s} {'tv_bound':>10s} {'d_K':>10s} {'kappa4_hat':>12s} {'pass':>5s}")
    for r in rows:
        tv = f"{r.tv_bound:10.5f}" if r.tv_bound is not None else f"{'-':>10s}"
        ok = {True: "yes", False: "NO", None: "-"}[r.passed]
        print(f"{r.n:6d} {r.kappa4_z:12.6g} {tv} {r.d_kolmogorov:10.5f} {r.kappa4_hat:12.6g} {ok:>5s}")
    if len(rows) >= 2 and all(r.kappa4_z > 0 for r in rows):
        slope = experiments.loglog_slope([r.n for r in rows], [r.kappa4_z for r in rows])
        print(f"log-log slope of kappa4 vs n: {slope:.4f}")
    _write(args.out, experiments.rows_to_json(rows) if args.format == "json" else experiments.rows_to_csv(rows))
    if not experiments.all_pass(rows):
        print("bound violated for n = " + ", ".join(str(r.n) for r in rows if r.passed is False))
        return EXIT_FAIL
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    seed = resolve_seed(args)
    if args.kernel_f is not None or args.kernel_g is not None:
        if args.kernel_f is None or args.kernel_g is None:
            raise UsageError("--kernel-f and --kernel-g go together")
        pair = KernelPair(load_kernel(args.kernel_f), load_kernel(args.kernel_g))
        kind = args.sampler or "gaussian"
    else:
        family = args.family.replace("-", "_")
        try:
            spec = experiments.FamilySpec(family, args.p, args.q, args.mix, (args.n,))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        pair = experiments.family_kernels(spec, args.n)
        kind = args.sampler or ("gaussian" if spec.gaussian else "poisson")
    sampler = gaussian_mc.sample_pair if kind == "gaussian" else poisson_mc.sample_poisson_pair
    batch = sampler(pair, args.samples, seed, args.threads)
    summ = stats.summarize(batch, "z")
    print(f"{kind} batch: N={summ.count} mean={summ.mean:.5f} var={summ.m2:.5f} "
          f"kappa4_hat={summ.kappa4_hat:.5f} d_K={summ.d_kolmogorov:.5f}")
    if args.out is not None:
        if args.format == "json":
            doc = {"seed": seed, "sampler_kind": kind, "x": batch.x.tolist(), "y": batch.y.tolist(), "z": batch.z.tolist()}
            _write(args.out, json.dumps(doc) + "\n")
        else:
            args.out.parent.mkdir(parents=True, exist_ok=True)
            gaussian_mc.write_batch_csv(batch, args.out)
    return EXIT_OK


def cmd_coverage(args: argparse.Namespace) -> int:
    tests_root = args.tests if args.tests.is_dir() else None
    try:
        text = coverage.emit_coverage(None, tests_root)
    except ChaosKitError as exc:
        print(f"coverage gap: {exc}")
        return EXIT_FAIL
    if args.check:
        current = args.out.read_text() if args.out.is_file() else None
        if current != text:
            print(f"{args.out} is stale; rerun chaoskit coverage")
            return EXIT_FAIL
        print(f"{args.out} is up to date")
        return EXIT_OK
    _write(args.out, text)
    print(f"wrote {args.out}")
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "counterexample": cmd_counterexample,
    "converge": cmd_converge,
    "sample": cmd_sample,
    "coverage": cmd_coverage,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"chaoskit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ChaosKitError, OSError) as exc:
        print(f"chaoskit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
