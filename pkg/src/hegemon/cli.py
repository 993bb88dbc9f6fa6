"""Command line entry point: ``hegemon <command> ...``.

Exit codes: 0 success, 1 bad input or domain error, 2 internal invariant
violation.  JSON outputs carry a ``meta`` block; CSV outputs get a sidecar
``<file>.meta.json``.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from . import INTERFACE_VERSION, __version__
from .analytics import DEFAULT_M_GRID, Case, g_grid, phase_sweep, phases_csv, thresholds
from .coalition import form_club, shift_clubs
from .equilibrium import check_outcome, solve_spne
from .errors import ConfigError, HegemonError
from .model import NoClub, World, format_site, parse_site
from .oracle import DEFAULT_INSTANCE_CONFIG, run_campaign
from .pipeline import SimConfig, simulate_files, summary_csv, validate_files

log = logging.getLogger("hegemon")


def _meta(args: argparse.Namespace, t0: float, warnings: Sequence[str] = (), **extra) -> dict:
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
              if k not in ("func",)}
    return {
        "command": args.command,
        "config": config,
        "engine_version": __version__,
        "interface_version": INTERFACE_VERSION,
        "python": platform.python_version(),
        "warnings": list(warnings),
        "wall_time_s": round(time.perf_counter() - t0, 3),
        **extra,
    }


def _emit_json(doc: dict, out: Optional[Path]) -> None:
    text = json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")


def _emit_csv(text: str, out: Optional[Path], meta: dict) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8", newline="")
    Path(str(out) + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def _load_world(path: str) -> World:
    if path.startswith("builtin:"):
        name = path.split(":", 1)[1]
        ref = resources.files("hegemon") / "data" / f"{name}.json"
        if not ref.is_file():
            raise ConfigError(f"no built-in world {name!r}")
        return World.from_json(json.loads(ref.read_text(encoding="utf-8")))
    return World.load(path)


# --------------------------------------------------------------------------
# commands


def cmd_spne(args) -> int:
    t0 = time.perf_counter()
    w = _load_world(args.world)
    out = solve_spne(w, follower=not args.no_follower, table=args.table)
    check_outcome(w, out)
    doc = out.to_json(table=args.table)
    if args.trace:
        s1 = form_club(w, out.ell_a)
        doc["traces"] = {"formation": s1.to_json(),
                         "shifting": shift_clubs(w, s1, out.ell_b).to_json()}
    doc["meta"] = _meta(args, t0, out.warnings)
    _emit_json(doc, args.out)
    return 0


def cmd_trace(args) -> int:
    t0 = time.perf_counter()
    w = _load_world(args.world)
    ell_a, ell_b = parse_site(args.ell_a), parse_site(args.ell_b)
    for loc in (ell_a, ell_b):
        if loc is not NoClub and loc not in w.grid:
            raise ConfigError(f"site {format_site(loc)} is not on the world's grid")
    s1 = form_club(w, ell_a)
    doc = {"formation": s1.to_json(), "shifting": shift_clubs(w, s1, ell_b).to_json()}
    doc["meta"] = _meta(args, t0)
    _emit_json(doc, args.out)
    return 0


def cmd_phases(args) -> int:
    t0 = time.perf_counter()
    case = Case(args.case)
    if case is Case.MEASURE:
        if args.g is None:
            raise ConfigError("--g is required for measure sweeps")
        heavy = [h if h == "A" else int(h) for h in args.heavy.split(",")] if args.heavy else ["A"]
        m_values = [float(x) for x in args.m_values.split(",")] if args.m_values else DEFAULT_M_GRID
        points = phase_sweep(args.n, case, m_values=m_values, g=args.g, heavy=heavy,
                             without_b=args.without_b, jobs=args.jobs)
    else:
        points = phase_sweep(args.n, case, g_grid(args.g_min, args.g_max, args.g_step),
                             without_b=args.without_b, jobs=args.jobs)
    errors = [f"g={p.g} m={p.m}: {p.error}" for p in points if p.error]
    _emit_csv(phases_csv(points), args.out, _meta(args, t0, errors, points=len(points)))
    return 0


def cmd_thresholds(args) -> int:
    t0 = time.perf_counter()
    t = thresholds(args.n)
    if args.json:
        _emit_json({**t.to_json(), "meta": _meta(args, t0)}, args.out)
        return 0
    lines = [f"{k:>12}  {v}" for k, v in t.to_json().items() if k != "notes"]
    lines += [f"note: {x}" for x in t.notes]
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")
    return 0


def cmd_oracle(args) -> int:
    t0 = time.perf_counter()
    config = dict(DEFAULT_INSTANCE_CONFIG)
    if args.config:
        config.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    config["n_small"] = [config["n_small"][0], args.n_small]
    if args.grid_points is not None:
        config["grid_points"] = [config["grid_points"][0], args.grid_points]
    report = run_campaign(args.trials, args.schedules, args.seed, config, jobs=args.jobs)
    report["meta"] = _meta(args, t0, seeds=[args.seed, args.seed + args.trials - 1])
    _emit_json(report, args.out)
    if not report["ok"]:
        log.error("engine and oracle disagree on %d instance(s)", len(report["failures"]))
        return 2
    return 0


def _years(text: Optional[str]):
    if not text:
        return None
    lo, _, hi = text.partition(":")
    try:
        return int(lo), int(hi or lo)
    except ValueError as exc:
        raise ConfigError(f"--years expects FROM:TO, got {text!r}") from exc


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    superpowers = tuple(c.strip() for c in args.superpowers.split(","))
    if len(superpowers) != 2:
        raise ConfigError("--superpowers expects two codes, e.g. USA,CHN")
    config = SimConfig(
        mode=args.mode, grid_steps=args.grid, ma_window=args.ma, year_range=_years(args.years),
        superpowers=superpowers, di_norm=args.di_norm, base_year=args.base_year,
    )
    countries, globals_ = args.countries, args.globals
    if args.fixture:
        ref = resources.files("hegemon") / "data" / "fixture"
        countries, globals_ = ref / "countries.csv", ref / "globals.csv"
    if countries is None:
        raise ConfigError("--countries is required (or --fixture)")
    if config.mode.value == "symmetric" and globals_ is None:
        raise ConfigError("symmetric mode needs --globals")
    meta = _meta(args, t0)
    results, doc = simulate_files(config, countries, globals_, args.out, args.projections,
                                  jobs=args.jobs, meta=meta)
    if args.out is None:
        sys.stdout.write(summary_csv(results))
    for w in doc["warnings"]:
        log.warning(w)
    return 0


def cmd_validate(args) -> int:
    if args.countries is None and args.globals is None:
        raise ConfigError("nothing to validate: pass --countries and/or --globals")
    problems = validate_files(args.countries, args.globals)
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return 1
    print("ok")
    return 0


def _render_steps(doc: dict, title: str) -> list[str]:
    lines = [title]
    steps = doc.get("steps")
    if steps is None:
        raise ConfigError(f"{title}: trace has no 'steps'")
    if not steps:
        lines.append("  no steps")
        return lines
    star = set(doc.get("i_star", []))
    for k, st in enumerate(steps, start=1):
        moved = set(st["moved"])
        lines.append(f"  step {k}: {'join' if doc.get('stage') == 1 else 'shift'} "
                     f"{{{', '.join(map(str, sorted(moved)))}}}")
        for i in st["changed"]:
            if doc.get("stage") == 1:
                why = "join"
            elif i in moved:
                why = "strict-shift" if i in star else "shift"
            else:
                why = "leak"
            b, a = st["before"][str(i)], st["after"][str(i)]
            lines.append(f"    country {i}: {b:.6g} -> {a:.6g}  ({why})")
    return lines


def explain_text(doc: dict) -> str:
    """Human-readable listing of a formation and/or shifting trace."""
    if "traces" in doc:
        doc = doc["traces"]
    parts = []
    if "formation" in doc or "shifting" in doc:
        if "formation" in doc:
            f = doc["formation"]
            parts += _render_steps(f, f"formation at {f.get('ell_a') or 'no club'}")
        if "shifting" in doc:
            s = doc["shifting"]
            parts += _render_steps(s, f"shifting with A at {s.get('ell_a') or 'no club'}, "
                                      f"B at {s.get('ell_b') or 'no club'}")
    elif "steps" in doc:
        parts += _render_steps(doc, f"stage {doc.get('stage', '?')}")
    else:
        raise ConfigError("not a trace document")
    return "\n".join(parts) + "\n"


def cmd_explain(args) -> int:
    try:
        doc = json.loads(Path(args.trace).read_text(encoding="utf-8"))
        text = explain_text(doc)
    except (json.JSONDecodeError, KeyError, TypeError, AttributeError) as exc:
        raise ConfigError(f"{args.trace}: malformed trace ({exc!r})") from exc
    sys.stdout.write(text)
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hegemon", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version",
                   version=f"hegemon {__version__} (interface {INTERFACE_VERSION})")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    jobs = argparse.ArgumentParser(add_help=False)
    jobs.add_argument("--jobs", type=int, default=os.cpu_count() or 1)

    s = sub.add_parser("spne", help="solve the two-stage game on a world file")
    s.add_argument("--world", required=True, help="world JSON, or builtin:three_country")
    s.add_argument("--no-follower", action="store_true", help="keep B out (counterfactual)")
    s.add_argument("--table", action="store_true", help="include B's reply to every site of A")
    s.add_argument("--trace", action="store_true", help="include formation/shifting traces")
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_spne)

    s = sub.add_parser("trace", help="formation and shifting traces for fixed sites")
    s.add_argument("--world", required=True)
    s.add_argument("--ell-a", required=True, help='site as "num/den" or "none"')
    s.add_argument("--ell-b", required=True)
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_trace)

    s = sub.add_parser("phases", parents=[jobs], help="parameter sweep on evenly spaced worlds")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--case", choices=[c.value for c in Case], default="symmetric")
    s.add_argument("--g-min", type=float, default=0.0)
    s.add_argument("--g-max", type=float, default=1.0)
    s.add_argument("--g-step", type=float, default=1e-3)
    s.add_argument("--g", type=float, help="fixed g for measure sweeps")
    s.add_argument("--m-values", help="comma-separated m grid for measure sweeps")
    s.add_argument("--heavy", help="comma-separated heavy set, e.g. A or 1,2,A")
    s.add_argument("--without-b", action="store_true", help="add the no-follower ell_a column")
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_phases)

    s = sub.add_parser("thresholds", help="closed-form thresholds for n")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--json", action="store_true")
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_thresholds)

    s = sub.add_parser("oracle", parents=[jobs], help="engine vs brute-force campaign")
    s.add_argument("--n-small", type=int, default=6, help="max small countries per instance")
    s.add_argument("--trials", type=int, default=1000, help="number of random instances")
    s.add_argument("--schedules", type=int, default=100, help="random schedules per instance")
    s.add_argument("--grid-points", type=int, help="max grid points per instance")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--config", help="JSON file overriding the instance generator settings")
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("simulate", parents=[jobs], help="yearly equilibria from panel CSVs")
    s.add_argument("--countries", type=Path)
    s.add_argument("--globals", type=Path)
    s.add_argument("--fixture", action="store_true", help="use the bundled synthetic panel")
    s.add_argument("--mode", choices=["symmetric", "asymmetric"], default="symmetric")
    s.add_argument("--grid", type=int, default=500)
    s.add_argument("--ma", type=int, default=5)
    s.add_argument("--years", help="FROM:TO")
    s.add_argument("--superpowers", default="USA,CHN", help="leader,follower codes")
    s.add_argument("--di-norm", choices=["year", "panel"], default="year")
    s.add_argument("--projections", type=Path, help="projected-GDP CSV (countries schema)")
    s.add_argument("--base-year", type=int)
    s.add_argument("--out", type=Path, help="output directory")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("validate", help="schema checks for panel CSVs")
    s.add_argument("--countries", type=Path)
    s.add_argument("--globals", type=Path)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("explain", help="print a trace file step by step")
    s.add_argument("trace")
    s.set_defaults(func=cmd_explain)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except HegemonError as exc:
        print(f"hegemon: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"hegemon: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
