"""Command line entry point: ``nevlab run | catalog | verify``.

Exit codes: 0 when every enabled verdict passes, 2 when any fails, 1 on a
configuration or numerical error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .catalog import list_catalog
from .config import load_config
from .errors import ConfigError, NevlabError

log = logging.getLogger("nevlab")

VERIFY_CHECKS = {"fmt": "fmt", "smt": "smt", "defect": "defects"}


def _summary_lines(rep):
    for name, v in rep.verdicts.items():
        status = "PASS" if v.get("passed") else "FAIL"
        extra = ""
        if name == "fmt":
            extra = "  widths " + ", ".join(f"{t['target']}={t['width']:.3g}" for t in v["targets"])
        elif name in ("smt", "smt-curvature"):
            extra = (f"  c={v['fitted_error_constant']:.3g} c'={v['fitted_offset']:.3g} "
                     f"exceptional measure {v['gamma_measure_of_exceptional']:.3g}")
        elif name == "defects":
            extra = f"  sum of defects {v['sum']:.4f} (bound 2)"
        elif name == "chart":
            extra = f"  max difference {v['max_difference']:.2e}"
        yield f"{status}  {name}{extra}"


def cmd_run(args, only=None):
    from .report import run_experiment, write_outputs

    cfg = load_config(args.config, {"seed": getattr(args, "seed", None),
                                    "out": getattr(args, "out", None)})
    if only is not None:
        cfg.plots = False
    rep = run_experiment(cfg, only=only)
    out = args.out or cfg.out
    files = write_outputs(rep, cfg, out)
    print(f"surface {rep.surface['name']} ({rep.surface['classification']}), "
          f"function {rep.function}")
    for line in _summary_lines(rep):
        print(line)
    print(f"wrote {', '.join(files)} to {out}")
    return 0 if rep.passed else 2


def cmd_catalog(args):
    rows = list_catalog(args.filter)
    if rows:
        width = max(len(r[1]) for r in rows)
        for section, name, desc in rows:
            print(f"{section:<9} {name:<{width}}  {desc}")
    return 0


def cmd_verify(args):
    args.seed = None
    return cmd_run(args, only=[VERIFY_CHECKS[args.check]])


def build_parser():
    p = argparse.ArgumentParser(prog="nevlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"nevlab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run every check enabled in a config")
    r.add_argument("--config", required=True, help="YAML config (examples/<name>.cfg for bundled)")
    r.add_argument("--out", default=None, help="output directory (overrides config 'out')")
    r.add_argument("--seed", type=int, default=None, help="override the config seed")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("catalog", help="list catalog surfaces and functions")
    c.add_argument("filter", nargs="?", default=None, help="substring of the name")
    c.set_defaults(func=cmd_catalog)

    v = sub.add_parser("verify", help="run a single check on a config")
    v.add_argument("--check", required=True, choices=sorted(VERIFY_CHECKS))
    v.add_argument("--config", required=True)
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        field = f" [{exc.field}]" if exc.field else ""
        print(f"config error{field}: {exc}", file=sys.stderr)
        return 1
    except NevlabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
