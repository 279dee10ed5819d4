"""Command-line entry point: ``holomera <stage> -c run.yaml``.

Stage subcommands run the pipeline up to and including that stage, reusing
anything already computed. ``report`` prints the summary of a finished run.

Exit codes: 0 success, 1 unexpected error, 2 configuration error, 3 numerical
failure (DMRG convergence, gate synthesis, linear algebra), 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from .circuit import SynthesisError
from .config import ConfigError, apply_overrides, from_dict
from .mps import DmrgConvergenceError
from .pipeline import STAGES, StageError, run_pipeline

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4
_NUMERIC = (DmrgConvergenceError, SynthesisError, np.linalg.LinAlgError, FloatingPointError)

log = logging.getLogger("holomera")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="holomera", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)
    for stage in (*STAGES, "pipeline"):
        s = sub.add_parser(stage, help="run all stages" if stage == "pipeline" else f"run up to {stage}")
        s.add_argument("-c", "--config", required=True, type=Path, help="YAML run configuration")
        s.add_argument("-o", "--output", type=Path, help="output directory (overrides output.directory)")
        s.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key, e.g. --set sampling.n_shots=500")
        s.add_argument("--shots", type=int, help="shorthand for --set sampling.n_shots=N")
        s.add_argument("--seed", type=int, help="shorthand for --set sampling.seed=N")
        s.add_argument("--force", action="store_true", help="recompute even when artifacts are current")
    r = sub.add_parser("report", help="print the summary of a finished run")
    r.add_argument("directory", type=Path)
    r.add_argument("--json", action="store_true", help="print summary.json verbatim")
    return p


def _load(args):
    try:
        raw = yaml.safe_load(args.config.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{args.config}: not valid YAML: {exc}") from None
    overrides = list(args.overrides)
    if args.shots is not None:
        overrides.append(f"sampling.n_shots={args.shots}")
    if args.seed is not None:
        overrides.append(f"sampling.seed={args.seed}")
    if args.output is not None:
        overrides.append(f"output.directory={args.output}")
    return from_dict(apply_overrides(raw, overrides))


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def report(directory: Path, as_json: bool = False, out=None) -> None:
    out = out or sys.stdout
    summary = json.loads((directory / "summary.json").read_text())
    if as_json:
        out.write(json.dumps(summary, indent=1) + "\n")
        return
    cols = ["network", "noise", "n_shots", "gates", "qubits", "reference_fidelity",
            "max_error_vs_exact", "max_error_vs_reference", "max_abs_z_vs_exact"]
    rows = [[_fmt(r[c]) for c in cols] for r in summary["rows"]]
    widths = [max(len(c), *(len(r[i]) for r in rows)) for i, c in enumerate(cols)]
    out.write(f"reference energy {summary['reference_energy']:.12f}, anchor i={summary['anchor']}\n")
    out.write("  ".join(c.ljust(w) for c, w in zip(cols, widths)) + "\n")
    for r in rows:
        out.write("  ".join(v.ljust(w) for v, w in zip(r, widths)) + "\n")


def _classify(exc: BaseException) -> int:
    cause = exc.cause if isinstance(exc, StageError) else exc
    if isinstance(cause, ConfigError):
        return EXIT_CONFIG
    if isinstance(cause, _NUMERIC):
        return EXIT_NUMERIC
    if isinstance(cause, OSError):
        return EXIT_IO
    return EXIT_ERROR


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            report(args.directory, args.json)
            return EXIT_OK
        cfg = _load(args)
        until = "analyze" if args.command == "pipeline" else args.command
        result = run_pipeline(cfg, until=until, force=args.force)
        done = len(result.computed())
        print(f"{args.command}: {done} artifact(s) computed, {len(result.events) - done} up to date in {result.root}")
        if result.summary:
            report(result.root)
        return EXIT_OK
    except Exception as exc:  # mapped to exit codes
        code = _classify(exc)
        print(f"holomera: error: {exc}", file=sys.stderr)
        if code == EXIT_ERROR or args.verbose:
            log.debug("traceback", exc_info=True)
        return code


if __name__ == "__main__":
    sys.exit(main())
