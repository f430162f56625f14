"""Command line front end.

    capstab analyze --config run.yaml [--out-dir out] [--mesh-level 3]
    capstab verify --suite {euclidean,hyperbolic,spherical,appendix,all}
    capstab sweep --config sweep.yaml

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical failure. Logging level comes from CAPSTAB_LOG (error, info, debug).
"""

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import load_config
from .errors import CapstabError, ConfigError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _parser():
    p = argparse.ArgumentParser(prog="capstab", description="Stability of minimal surfaces with contact angle.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default="capstab_out", help="output directory")
    common.add_argument("--mesh-level", type=int, default=None, help="override the mesh refinement level")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweep and verify")
    sub = p.add_subparsers(dest="command", required=True)
    a = sub.add_parser("analyze", parents=[common], help="analyze one surface")
    a.add_argument("--config", required=True)
    v = sub.add_parser("verify", parents=[common], help="run an identity verification suite")
    v.add_argument("--suite", required=True, choices=["euclidean", "hyperbolic", "spherical", "appendix", "all"])
    s = sub.add_parser("sweep", parents=[common], help="analyze a parameter grid")
    s.add_argument("--config", required=True)
    return p


def _setup_logging():
    name = os.environ.get("CAPSTAB_LOG", "error").lower()
    if name not in LOG_LEVELS:
        raise ConfigError(f"CAPSTAB_LOG must be one of {sorted(LOG_LEVELS)}, got {name!r}")
    logging.basicConfig(level=LOG_LEVELS[name], format="%(levelname)s %(name)s: %(message)s")


def _load(args):
    cfg = load_config(args.config)
    if args.mesh_level is not None:
        cfg = cfg.with_updates(mesh_level=args.mesh_level)
    return cfg


def cmd_analyze(args):
    from .report import analyze, write_analysis

    cfg = _load(args)
    res = analyze(cfg)
    files = write_analysis(res, args.out_dir, cfg)
    rep = res.report
    sp = rep["spectrum"]
    print(f"{rep['surface']['label']}: verdict {rep['verdict']}, constrained index {sp['constrained_index']}, "
          f"k_neg {sp['k_neg']}, bracket {rep['index_bracket']['bracket']}")
    for f in files:
        print(f"  wrote {f}")
    return EXIT_OK


def cmd_verify(args):
    from .report import verify, write_json

    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    rep = verify(args.suite, threads=args.threads)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = write_json(rep, out / f"verify_{args.suite}.json")
    for c in rep["checks"]:
        if not c["pass"]:
            val = c.get("residual_max", c.get("discrepancy"))
            print(f"FAIL {c['job']} {c['id']}: {val:.3e} > {c['tolerance']:.1e}")
    for e in rep["errors"]:
        print(f"ERROR {e['job']}: {e['error']}")
    print(f"{args.suite}: {rep['n_checks'] - rep['n_failed']}/{rep['n_checks']} checks passed, "
          f"{len(rep['errors'])} job errors; wrote {path}")
    if rep["pass"]:
        return EXIT_OK
    if rep["errors"] and all(c["pass"] for c in rep["checks"]):
        return max(e["exit_code"] for e in rep["errors"])
    return EXIT_FAIL


def cmd_sweep(args):
    from .report import sweep, write_sweep

    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    cfg = _load(args)
    if "sweep" not in cfg.data:
        raise ConfigError("sweep command needs a 'sweep' section")
    res = sweep(cfg, threads=args.threads)
    files = write_sweep(res, args.out_dir, figures=cfg["output"]["figures"])
    for r in res["rows"]:
        status = r["error"] or f"{r['verdict']} (index {r['constrained_index']}, lambda_1 {r['lambda_1']:.6g})"
        print(f"{res['parameter']} = {r['value']}: {status}")
    for f in files:
        print(f"  wrote {f}")
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "verify": cmd_verify, "sweep": cmd_sweep}


def main(argv=None):
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        _setup_logging()
        return COMMANDS[args.command](args)
    except CapstabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: [cli] {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
