"""Command-line interface: check, run, translate, dual, sub, simulate."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import ast as A
from .checker import CheckError, Checker, check_program, default_fuel
from .env import EMPTY
from .eval import load_program, outcome_data, outcome_text, run_config
from .parser import ParseError, parse_ldgv, parse_lsst, parse_type
from .printer import show, show_program


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from e


def _is_lsst(path: str) -> bool:
    return path.endswith(".lsst")


def _emit(args, text: str, data: dict) -> None:
    out = json.dumps(data, indent=2) if args.format == "structured" else text
    if getattr(args, "output", None):
        Path(args.output).write_text(out + "\n")
    else:
        print(out)


def _fuel(args) -> int:
    if args.fuel is not None:
        if args.fuel <= 0:
            raise UsageError("--fuel must be positive")
        return args.fuel
    return default_fuel()


def cmd_check(args) -> int:
    src = _read(args.file)
    if _is_lsst(args.file):
        from .lsst.typing import lsst_check_program

        report = lsst_check_program(parse_lsst(src), keep_going=not args.first_error).report
    else:
        report = check_program(parse_ldgv(src), keep_going=not args.first_error, fuel=_fuel(args))
    _emit(args, report.to_text(), report.to_data())
    return 0 if report.ok else 1


def _trace_printer(args):
    if not args.trace:
        return None

    def on_step(ev, _cfg):
        print(str(ev), file=sys.stderr if args.format == "structured" else sys.stdout)

    return on_step


def cmd_run(args) -> int:
    src = _read(args.file)
    on_step = _trace_printer(args)
    if _is_lsst(args.file):
        from .lsst.eval import lsst_load
        from .lsst.typing import lsst_check_program

        tp = lsst_check_program(parse_lsst(src))
        if not tp.report.ok and not args.unchecked:
            print(tp.report.to_text(), file=sys.stderr)
            return 1
        if args.typed_replay:
            raise UsageError("--typed-replay applies to LDGV programs")
        cfg, sem = lsst_load(tp.program, args.entry)
        res = run_config(cfg, args.max_steps, sem=sem, seed=args.seed, on_step=on_step)
    else:
        prog = parse_ldgv(src)
        report = None
        if not args.unchecked:
            report = check_program(prog, fuel=_fuel(args))
            if not report.ok:
                print(report.to_text(), file=sys.stderr)
                return 1
            prog = report.program
        if not any(d.name == args.entry for d in prog.term_defs):
            raise UsageError(f"no definition named {args.entry}")
        if args.typed_replay and report is None:
            raise UsageError("--typed-replay needs a checked program")
        ld = load_program(prog, args.entry, report)
        res = run_config(
            ld.config,
            args.max_steps,
            sem=ld.sem,
            seed=args.seed,
            typed_replay=args.typed_replay,
            on_step=on_step,
            replay_env=ld.env,
            main_type=ld.main_type,
        )
    _emit(args, outcome_text(res, args.entry), outcome_data(res, args.entry))
    return 0 if res.outcome.kind == "AllFinished" else 1


def cmd_translate(args) -> int:
    from .lsst.translate import translate
    from .lsst.typing import lsst_check_program

    tp = lsst_check_program(parse_lsst(_read(args.file)))
    if not tp.report.ok:
        print(tp.report.to_text(), file=sys.stderr)
        return 1
    text = show_program(translate(tp))
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _aliases(args) -> dict:
    if not args.file:
        return {}
    return dict(parse_ldgv(_read(args.file)).type_defs)


def cmd_dual(args) -> int:
    t = parse_type(args.type, _aliases(args))
    try:
        d = A.dual(t)
    except A.NotASessionType as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    _emit(args, show(d), {"type": show(t), "dual": show(d)})
    return 0


def cmd_sub(args) -> int:
    aliases = _aliases(args)
    left, right = parse_type(args.left, aliases), parse_type(args.right, aliases)
    try:
        k = Checker(_fuel(args)).sub_synth(EMPTY, left, right)
    except CheckError as e:
        _emit(args, f"not a subtype: {e.message}", {"subtype": False, "code": e.code, "message": e.message, "trace": e.trace})
        return 1
    _emit(args, f"subtype at {k.mult.value}", {"subtype": True, "kind": str(k), "multiplicity": k.mult.value})
    return 0


def cmd_simulate(args) -> int:
    from .lsst.simulate import simulate_check

    rep = simulate_check(parse_lsst(_read(args.file)), max_steps=args.max_steps, bound=args.bound, entry=args.entry)
    _emit(args, rep.to_text(), rep.to_data())
    return 0 if rep.ok else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "structured"), default="text")
    common.add_argument("--fuel", type=int, default=None, help="recursor unrolling bound (env LDST_FUEL)")
    common.add_argument("-o", "--output", default=None, help="write the result to a file")

    ap = argparse.ArgumentParser(prog="ldgv", description="Label-dependent session types toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="type check a .ldgv or .lsst file")
    p.add_argument("file")
    p.add_argument("--first-error", action="store_true", help="stop at the first failing definition")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("run", parents=[common], help="check and evaluate a program")
    p.add_argument("file")
    p.add_argument("--entry", default="main")
    p.add_argument("--trace", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--max-steps", type=int, default=100_000)
    p.add_argument("--typed-replay", action="store_true")
    p.add_argument("--unchecked", action="store_true", help="run without type checking")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("translate", parents=[common], help="translate LSST to LDGV source")
    p.add_argument("file")
    p.set_defaults(fn=cmd_translate)

    p = sub.add_parser("dual", parents=[common], help="print the dual of a session type")
    p.add_argument("file", nargs="?")
    p.add_argument("--type", required=True)
    p.set_defaults(fn=cmd_dual)

    p = sub.add_parser("sub", parents=[common], help="decide subtyping between two types")
    p.add_argument("file", nargs="?")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.set_defaults(fn=cmd_sub)

    p = sub.add_parser("simulate", parents=[common], help="co-run LSST and its translation")
    p.add_argument("file")
    p.add_argument("--entry", default="main")
    p.add_argument("--max-steps", type=int, default=100_000)
    p.add_argument("--bound", type=int, default=8)
    p.set_defaults(fn=cmd_simulate)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on usage errors and 0 after --help
        return int(e.code or 0)
    try:
        return args.fn(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return 1
    except CheckError as e:
        print(e.render(), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
