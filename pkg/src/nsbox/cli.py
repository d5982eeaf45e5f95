"""Command-line interface.

Exit codes: 0 success, 1 usage or parse error, 2 box validation failure,
3 a checked property was violated.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .boxes import (
    NS_TOLERANCE,
    TSIRELSON_ETA,
    BoxValidationError,
    box_to_dict,
    chsh_value,
    dumps_record,
    load_box,
)
from .hc_ribbon import DEFAULT_RESTARTS, hc_membership_box
from .maxcorr import rho_box
from .mc_ribbon import PSD_TOLERANCE, mc_membership_box
from .prob import TableTooLarge
from .wiring import (
    WiringError,
    derived_box,
    execute,
    load_wiring,
    verify_chain_rule_lemma,
    verify_structure_lemmas,
)

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_VIOLATION = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def g12(x) -> str:
    return f"{float(x):.12g}"


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load(path, tolerance):
    try:
        return load_box(path, tolerance)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})") from exc
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from exc


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    box = _load(args.box, args.tolerance)
    print(f"valid: x_card={box.x_card} y_card={box.y_card} a_card={box.a_card} b_card={box.b_card}")
    return EXIT_OK


def cmd_measures(args) -> int:
    box = _load(args.box, args.tolerance)
    r = rho_box(box)
    chsh = chsh_value(box) if box.is_binary else None
    if args.format == "json":
        rec = {"rho": float(g12(r.rho)), "argmax_input": list(r.argmax_input_pair),
               "chsh": None if chsh is None else float(g12(chsh))}
        _emit(json.dumps(rec) + "\n", args.out)
    else:
        row = [g12(r.rho), str(r.argmax_input_pair[0]), str(r.argmax_input_pair[1]),
               "" if chsh is None else g12(chsh)]
        _emit("rho,argmax_x,argmax_y,chsh\n" + ",".join(row) + "\n", args.out)
    return EXIT_OK


def cmd_ribbon(args) -> int:
    box = _load(args.box, args.tolerance)
    if args.grid < 2:
        raise UsageError("--grid needs at least 2 points per axis")
    axis = np.linspace(0.0, 1.0, args.grid)
    lines = []
    if args.which == "mc":
        lines.append("lambda1,lambda2,inside,margin")
        for l1 in axis:
            for l2 in axis:
                v = mc_membership_box(box, (l1, l2), args.psd_tolerance)
                lines.append(f"{g12(l1)},{g12(l2)},{str(v.inside).lower()},{g12(v.min_eigenvalue)}")
    else:
        lines.append("lambda1,lambda2,inside,margin,certified")
        for l1 in axis:
            for l2 in axis:
                v = hc_membership_box(box, (l1, l2), args.restarts, args.u_card, args.seed)
                lines.append(f"{g12(l1)},{g12(l2)},{str(not v.outside).lower()},"
                             f"{g12(-v.violation + 0.0)},{v.certified}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_wire(args) -> int:
    try:
        inst = load_wiring(args.spec, args.tolerance)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.spec}: not valid JSON ({exc})") from exc
    except OSError as exc:
        raise UsageError(f"{args.spec}: {exc.strerror or exc}") from exc
    box = derived_box(inst)
    _emit(dumps_record(box_to_dict(box)), args.out)
    lines = ["x_prime,y_prime,structure_residual,chain_rule_residual"]
    worst = 0.0
    for xp in range(inst.alice.external_card):
        for yp in range(inst.bob.external_card):
            try:
                traj = execute(inst, xp, yp)
            except TableTooLarge as exc:
                print(f"residuals skipped: {exc}", file=sys.stderr)
                return EXIT_OK
            s = verify_structure_lemmas(inst, xp, yp, traj).max_residual
            c = verify_chain_rule_lemma(inst, xp, yp, traj).max_residual
            worst = max(worst, s, c)
            lines.append(f"{xp},{yp},{g12(s)},{g12(c)}")
    report = "\n".join(lines) + "\n"
    if args.report:
        Path(args.report).write_text(report)
    else:
        sys.stderr.write(report)
    return EXIT_VIOLATION if worst > harness.LEMMA_TOLERANCE else EXIT_OK


def _finish(report, stem) -> int:
    if stem:
        harness.write_report(report, stem)
    else:
        sys.stdout.write(harness.report_csv(report))
    s = report.summary()
    print(f"{report.name}: cases={s['cases_run']} checks={s['checks']} "
          f"worst_margin={g12(report.worst_margin)} failures={len(s['failures'])}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_VIOLATION


def cmd_fuzz(args) -> int:
    c, n, seed = args.campaign, args.boxes, args.seed
    if c in ("rho", "mc", "hc-ineq", "chain") and not 1 <= n <= 4:
        raise UsageError("--boxes must be between 1 and 4")
    if c == "rho":
        rep = harness.fuzz_rho_monotonicity(n, args.cases, seed)
    elif c == "mc":
        rep = harness.fuzz_mc_ribbon_monotonicity(n, args.cases, seed=seed)
    elif c == "hc-ineq":
        if n > 3:
            raise UsageError("the hc-ineq campaign enumerates trajectories; use at most 3 boxes")
        rep = harness.fuzz_hc_wiring_inequality(n, args.cases, args.channels, seed)
    elif c == "lemmas":
        rep = harness.fuzz_structure_lemmas(args.cases, seed, min(n, 3))
    elif c == "chain":
        rep = harness.fuzz_chain_rho(n, args.cases, seed)
    else:
        rep = harness.fuzz_input_bound(args.cases, seed)
    return _finish(rep, args.out)


def _parse_grid(text):
    try:
        if "," in text:
            return [float(v) for v in text.split(",") if v.strip()]
        k = int(text)
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}") from exc
    if k < 2:
        raise UsageError("grid needs at least 2 points")
    return list(np.linspace(0.0, 1.0, k))


def cmd_scan_isotropic(args) -> int:
    grid = _parse_grid(args.grid)
    if any(not 0 <= e <= 1 for e in grid):
        raise UsageError("eta values must lie in [0, 1]")
    rows = harness.isotropic_scan(grid, args.n_max)
    _emit(harness.isotropic_csv(rows), args.out)
    return EXIT_OK


def cmd_frontier(args) -> int:
    if not TSIRELSON_ETA - 1e-15 <= args.eta <= 1:
        raise UsageError("--eta must lie in [1/sqrt(2), 1]")
    return _finish(harness.chsh_rho_frontier(args.eta, args.n, args.seed), args.out)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nsbox", description="Correlation measures and wirings of no-signaling boxes.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, box=True):
        if box:
            sp.add_argument("box", help="box JSON file")
        sp.add_argument("--tolerance", type=float, default=NS_TOLERANCE, help="no-signaling tolerance")
        sp.add_argument("--out", help="output file (default: stdout)")

    sp = sub.add_parser("validate", help="check a box file")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("measures", help="rho and CHSH of a box")
    common(sp)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_measures)

    sp = sub.add_parser("ribbon", help="scan a ribbon on a grid")
    common(sp)
    sp.add_argument("--which", choices=("mc", "hc"), default="mc")
    sp.add_argument("--grid", type=int, default=11, help="points per axis")
    sp.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
    sp.add_argument("--u-card", type=int, default=None, help="auxiliary alphabet size (default |A||B|+2)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--psd-tolerance", type=float, default=PSD_TOLERANCE)
    sp.set_defaults(func=cmd_ribbon)

    sp = sub.add_parser("wire", help="run a wiring spec, write the derived box")
    sp.add_argument("spec", help="wiring-spec JSON file")
    sp.add_argument("--tolerance", type=float, default=NS_TOLERANCE)
    sp.add_argument("--out", help="derived box file (default: stdout)")
    sp.add_argument("--report", help="residual CSV (default: stderr)")
    sp.set_defaults(func=cmd_wire)

    sp = sub.add_parser("fuzz", help="run a verification campaign")
    sp.add_argument("campaign", choices=("rho", "mc", "hc-ineq", "lemmas", "chain", "inputs"))
    sp.add_argument("--boxes", type=int, default=2)
    sp.add_argument("--cases", type=int, default=100)
    sp.add_argument("--channels", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="report stem; writes <stem>.csv and <stem>.json")
    sp.set_defaults(func=cmd_fuzz)

    sp = sub.add_parser("scan-isotropic", help="measures along the isotropic family")
    sp.add_argument("--grid", default="11", help="point count or comma-separated eta values")
    sp.add_argument("--n-max", type=int, default=10_000)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_scan_isotropic)

    sp = sub.add_parser("frontier", help="sample boxes above a CHSH threshold, check rho")
    sp.add_argument("--eta", type=float, default=TSIRELSON_ETA)
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="report stem")
    sp.set_defaults(func=cmd_frontier)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BoxValidationError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    except WiringError as exc:
        print(f"WiringError: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
