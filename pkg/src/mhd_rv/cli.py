"""Command-line benchmark harness.

Subcommands: ``run`` (one benchmark), ``sweep`` (mesh sequence with a
convergence table) and ``check-tables`` (recompute the published
convergence rates from the embedded table values).  A key=value config
file can seed any option; explicit flags win.
"""

from __future__ import annotations

import argparse
import sys

from . import divclean
from .bench import BenchmarkConfig, run, sweep
from .bench.tables import check_tables, format_check
from .errors import ConfigurationError, MhdError


def parse_cleaning(text: str) -> divclean.CleaningConfig:
    """none | projection | pseudo[:steps=S,dt=T] | glm[:cr=C]"""
    head, _, rest = text.partition(":")
    kwargs = {}
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            if key == "steps":
                kwargs["steps"] = int(val)
            elif key == "dt":
                kwargs["tau_tilde"] = float(val)
            elif key == "cr":
                kwargs["c_r"] = float(val)
            else:
                raise ConfigurationError(f"unknown cleaning option {key!r}")
    return divclean.CleaningConfig(method=head, **kwargs)


def load_config_file(path: str) -> dict:
    out = {}
    with open(path) as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, val = line.partition("=")
            if not _:
                raise ConfigurationError(
                    f"config line without '=': {line!r}")
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="mhd-rv",
        description="Continuous Galerkin ideal-MHD solver with "
                    "residual-based viscosity")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--problem")
        p.add_argument("--degree", type=int)
        p.add_argument("--cells", help="cells per axis, e.g. 40 or 40,40")
        p.add_argument("--tfinal", type=float)
        p.add_argument("--cfl", type=float)
        p.add_argument("--stab", choices=["rv", "first_order", "none"])
        p.add_argument("--clean",
                       help="none|projection|pseudo:steps=S,dt=T|glm:cr=C")
        p.add_argument("--mass", choices=["auto", "lumped", "consistent"])
        p.add_argument("--out", help="output directory")
        p.add_argument("--unsafe", action="store_true", default=None,
                       help="allow overriding problem-pinned parameters")

    p_run = sub.add_parser("run", help="run one benchmark")
    add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="run a mesh sequence")
    add_common(p_sweep)
    p_sweep.add_argument("--cells-list",
                         help="semicolon list, e.g. 30;60;120")

    p_check = sub.add_parser("check-tables",
                             help="recompute published convergence rates")
    p_check.add_argument("--tol", type=float, default=0.01)
    return parser


def _merge(args) -> dict:
    merged = {}
    if getattr(args, "config", None):
        merged.update(load_config_file(args.config))
    for key in ("problem", "degree", "cells", "tfinal", "cfl", "stab",
                "clean", "mass", "out", "unsafe", "cells_list"):
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _config_from(merged: dict) -> BenchmarkConfig:
    if "problem" not in merged:
        raise ConfigurationError("--problem is required")
    kwargs = {"problem": merged["problem"]}
    if "degree" in merged:
        kwargs["degree"] = int(merged["degree"])
    if "cells" in merged:
        kwargs["cells_per_axis"] = tuple(
            int(c) for c in str(merged["cells"]).split(","))
    if "tfinal" in merged:
        kwargs["final_time"] = float(merged["tfinal"])
    if "cfl" in merged:
        kwargs["cfl"] = float(merged["cfl"])
    if "stab" in merged:
        kwargs["stabilization"] = merged["stab"]
    if "clean" in merged:
        kwargs["cleaning"] = parse_cleaning(str(merged["clean"]))
    if "mass" in merged:
        kwargs["mass_lumping"] = merged["mass"]
    if "out" in merged:
        kwargs["output_dir"] = merged["out"]
    if merged.get("unsafe"):
        kwargs["unsafe"] = bool(merged["unsafe"])
    return BenchmarkConfig(**kwargs)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "check-tables":
            checks = check_tables()
            print(format_check(checks, args.tol))
            return 0 if all(c.ok(args.tol) for c in checks) else 1

        merged = _merge(args)
        config = _config_from(merged)
        if args.command == "run":
            result = run(config, progress=_print_progress)
            _print_summary(result)
            return 0 if result.completed else 1

        if "cells_list" not in merged:
            raise ConfigurationError("--cells-list is required for sweep")
        cells_list = [tuple(int(c) for c in chunk.split(","))
                      for chunk in str(merged["cells_list"]).split(";")]
        results = sweep(config, cells_list)
        for res in results:
            _print_summary(res)
        return 0 if all(r.completed for r in results) else 1
    except MhdError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def _print_progress(row):
    if row.step % 100 == 0:
        print(f"  step {row.step}: t={row.t:.5f} tau={row.tau:.3e} "
              f"min rho={row.min_rho:.4f} min p={row.min_p:.4f} "
              f"max mu={row.max_mu:.3e}")


def _print_summary(result):
    cfg = result.config
    status = "completed" if result.completed else "FAILED"
    print(f"{cfg.problem} P{cfg.degree} cells={cfg.cells_per_axis} "
          f"{status}: {result.steps} steps to t={result.final_time:.6g} "
          f"in {result.wall_time:.1f}s")
    if result.failure:
        print(f"  {result.failure}")
    if result.errors is not None:
        for name in ("rho", "u", "B"):
            l1, l2, linf = result.errors[name]
            print(f"  {name}: L1={l1:.6e} L2={l2:.6e} Linf={linf:.6e}")


if __name__ == "__main__":
    raise SystemExit(main())
