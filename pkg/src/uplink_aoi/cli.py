"""Command-line front end: analyze, simulate, compare, sweep.

Every run writes its data files plus a ``manifest.json`` that records the
fully resolved parameters, so a run can be repeated from the manifest
alone.  Unbounded values are written as the token ``inf``.

Exit codes: 0 success, 1 comparison outside tolerance, 2 fixed point not
converged, 3 parameter error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .coupler import FixedPointConfig, solve, stability_point, sweep_point
from .errors import NumericError, ParameterError
from .macro import ACTIVITY_MODELS, MacroParams, db_to_linear, linear_to_db, meta_ccdf_curve
from .microq import SOJOURN_MODES, ArrivalSpec, format_value, is_unbounded
from .simnet import NetworkConfig, aggregate, simulate
from .simnet.config import FADING_MODES

log = logging.getLogger("uplink_aoi")

EXIT_OK, EXIT_DISAGREE, EXIT_NOT_CONVERGED, EXIT_PARAM = 0, 1, 2, 3

EQUILIBRIUM_COLUMNS = ["class", "d", "stable", "x0", "mean_sojourn", "peak_aoi"]
CCDF_COLUMNS = ["delta", "ccdf"]
SWEEP_COLUMNS = ["theta_db", "alpha", "peak_aoi", "mean_sojourn", "all_stable"]
FRONTIER_COLUMNS = ["theta_db", "stability_alpha"]
SIM_CLASS_COLUMNS = ["class", "n_devices", "success_probability", "idle_fraction",
                     "mean_sojourn", "peak_aoi"]
REALIZATION_COLUMNS = ["realization", "n_devices", "mean_success", "idle_fraction",
                       "mean_sojourn", "peak_aoi", "steady", "warmup_slots", "measured_slots"]
COMPARE_COLUMNS = ["delta", "analytic", "empirical", "gap"]

# parameters that must agree between an analysis and a simulation to compare them
SHARED_KEYS = ("alpha", "theta", "eta", "eps", "classes", "delta_points")

DEFAULTS = {
    "alpha": None,
    "theta": None,
    "theta_db": None,
    "eta": 4.0,
    "eps": 1.0,
    "classes": 10,
    "tol": 1e-6,
    "max_iters": 500,
    "chi_init": 1.0,
    "damping": 1.0,
    "activity": "per_slot",
    "sojourn_mode": "system",
    "delta_points": 101,
    "seed": 0,
    "jobs": 1,
    "bs_density": 1.0,
    "area_side": 10.0,
    "slots": 20_000,
    "realizations": 20,
    "warmup_window": 1000,
    "steady_tol": 1e-3,
    "min_attempts": 50,
    "fading": "explicit",
    "alpha_grid": "0.05:0.99:0.02",
    "theta_db_list": "5,0,-5",
    "starts": "0,0.5,1",
    "ccdf_tol": 0.05,
    "rel_tol": 0.05,
}


# ---------------------------------------------------------------- parsing

def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("common")
    g.add_argument("--config", type=Path, help="JSON file with flat keys named like the flags")
    g.add_argument("--out", type=Path, default=Path("."), help="output directory")
    g.add_argument("--seed", type=int)
    g.add_argument("--jobs", type=int, help="worker processes")
    g.add_argument("--tol", type=float, help="fixed-point tolerance on chi")
    g.add_argument("-v", "--verbose", action="store_true")


def _model(p: argparse.ArgumentParser, sim: bool = False):
    g = p.add_argument_group("model")
    g.add_argument("--alpha", type=float, help="per-slot packet arrival probability")
    th = g.add_mutually_exclusive_group()
    th.add_argument("--theta-db", type=float, help="SIR threshold in dB")
    th.add_argument("--theta", type=float, help="SIR threshold, linear")
    g.add_argument("--eta", type=float, help="path-loss exponent")
    g.add_argument("--eps", type=float, help="power-control compensation factor")
    g.add_argument("--classes", type=int, help="number of QoS classes")
    g.add_argument("--activity", choices=ACTIVITY_MODELS)
    g.add_argument("--sojourn-mode", choices=SOJOURN_MODES)
    g.add_argument("--max-iters", type=int)
    g.add_argument("--chi-init", type=float)
    g.add_argument("--damping", type=float)
    g.add_argument("--delta-points", type=int, help="size of the uniform delta grid on [0, 1]")
    if sim:
        s = p.add_argument_group("simulation")
        s.add_argument("--bs-density", type=float, help="stations per km^2")
        s.add_argument("--area-side", type=float, help="torus side in km")
        s.add_argument("--slots", type=int, help="measured slots (also the warm-up cap)")
        s.add_argument("--realizations", type=int)
        s.add_argument("--warmup-window", type=int)
        s.add_argument("--steady-tol", type=float)
        s.add_argument("--min-attempts", type=int)
        s.add_argument("--fading", choices=FADING_MODES)


class _Parser(argparse.ArgumentParser):
    # usage errors are parameter errors, not argparse's default exit status 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARAM, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uplink-aoi", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="solve the coupled model at one operating point")
    _common(p)
    _model(p)

    p = sub.add_parser("simulate", help="Monte Carlo estimate at one operating point")
    _common(p)
    _model(p, sim=True)

    p = sub.add_parser("compare", help="check a simulation against an analysis")
    p.add_argument("analysis", type=Path, help="output directory of analyze")
    p.add_argument("simulation", type=Path, help="output directory of simulate")
    _common(p)
    p.add_argument("--ccdf-tol", type=float, help="allowed sup-norm CCDF gap")
    p.add_argument("--rel-tol", type=float, help="allowed relative error of the means")

    p = sub.add_parser("sweep", help="peak AoI over an alpha grid for several thresholds")
    _common(p)
    _model(p)
    p.add_argument("--alpha-grid", help="start:stop:step or a comma list, increasing")
    p.add_argument("--theta-db-list", help="comma list of thresholds in dB")
    p.add_argument("--starts", help="comma list of initial chi; a point is stable only if "
                                    "every resulting fixed point is")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    params = dict(DEFAULTS)
    if getattr(args, "config", None) is not None:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParameterError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ParameterError("config must be a JSON object")
        unknown = sorted(set(data) - set(DEFAULTS))
        if unknown:
            raise ParameterError(f"unknown config keys: {unknown}")
        if data.get("theta") is not None and data.get("theta_db") is not None:
            raise ParameterError("give theta or theta_db, not both")
        params.update(data)
    flags = {k: v for k, v in vars(args).items() if k in DEFAULTS and v is not None}
    if "theta" in flags:
        params["theta_db"] = None
    if "theta_db" in flags:
        params["theta"] = None
    params.update(flags)
    if params["theta"] is None and params["theta_db"] is not None:
        params["theta"] = db_to_linear(float(params["theta_db"]))
    if params["theta"] is not None:
        params["theta_db"] = linear_to_db(float(params["theta"]))
    return params


def _require(params: dict, *keys):
    missing = [k for k in keys if params.get(k) is None]
    if missing:
        raise ParameterError(f"missing required parameter(s): {', '.join(missing)}")


def delta_grid(params: dict) -> np.ndarray:
    n = int(params["delta_points"])
    if n < 2:
        raise ParameterError("delta_points must be at least 2")
    return np.linspace(0.0, 1.0, n)


def parse_grid(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    elif ":" in str(text):
        parts = [float(v) for v in str(text).split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ParameterError(f"bad grid {text!r}; expected start:stop:step")
        start, stop, step = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        vals = [round(start + k * step, 10) for k in range(n)]
    else:
        vals = [float(v) for v in str(text).split(",") if v.strip()]
    if not vals:
        raise ParameterError("empty grid")
    return vals


# ---------------------------------------------------------------- output

class Run:
    """Collects output files and writes the manifest."""

    def __init__(self, command: str, params: dict, out: Path):
        self.command = command
        self.params = params
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []
        self.started = datetime.now(timezone.utc).isoformat()

    def csv(self, name: str, columns: list[str], rows):
        path = self.out / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([format_value(v) if not isinstance(v, str) else v for v in row])
        self.outputs.append(name)
        return path

    def json(self, name: str, data: dict):
        path = self.out / name
        path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
        self.outputs.append(name)
        return path

    def finish(self, status: str, extra: dict | None = None):
        manifest = {
            "command": self.command,
            "params": self.params,
            "seeds": {"master": self.params.get("seed")},
            "version": __version__,
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "outputs": sorted(self.outputs),
            "status": status,
        }
        if extra:
            manifest.update(extra)
        (self.out / "manifest.json").write_text(
            json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if is_unbounded(v) or (isinstance(v, float) and math.isinf(v)):
        return "inf"
    if isinstance(v, float) and math.isnan(v):
        return None
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return _jsonable(float(v))
    if isinstance(v, Path):
        return str(v)
    return v


def _read_csv(path: Path) -> list[dict]:
    with path.open() as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------- commands

def _macro(params) -> MacroParams:
    return MacroParams(float(params["theta"]), float(params["eta"]), float(params["eps"]),
                       1.0, params["activity"])


def _fp_config(params) -> FixedPointConfig:
    return FixedPointConfig(tol=float(params["tol"]), max_iters=int(params["max_iters"]),
                            chi_init=float(params["chi_init"]), damping=float(params["damping"]),
                            sojourn_mode=params["sojourn_mode"])


def cmd_analyze(params: dict, out: Path) -> int:
    _require(params, "alpha", "theta")
    arrival = ArrivalSpec(float(params["alpha"]))
    macro = _macro(params)
    cfg = _fp_config(params)
    grid = delta_grid(params)
    run = Run("analyze", params, out)
    sol = solve(arrival, macro, int(params["classes"]), cfg)

    rows = []
    for k, (c, aoi) in enumerate(zip(sol.per_class, sol.aoi.per_class), start=1):
        rows.append([k, c.d, c.stable, c.x0, c.mean_sojourn, aoi])
    run.csv("equilibrium.csv", EQUILIBRIUM_COLUMNS, rows)
    ccdf = meta_ccdf_curve(grid, sol.moments)
    run.csv("ccdf.csv", CCDF_COLUMNS, zip(grid, ccdf))
    run.json("summary.json", {
        "chi": sol.chi,
        "m1": sol.moments.m1,
        "m2": sol.moments.m2,
        "boundaries": sol.table.boundaries,
        "d": sol.table.d,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "all_stable": sol.all_stable,
        "network_peak_aoi": sol.aoi.network,
        "mean_sojourn": sol.mean_sojourn,
        "trajectory": sol.trajectory,
    })
    run.finish("converged" if sol.converged else "not_converged")
    print(f"chi={sol.chi:.6g} network_peak_aoi={format_value(sol.aoi.network)} "
          f"mean_sojourn={format_value(sol.mean_sojourn)} iterations={sol.iterations}")
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def _network_config(params) -> NetworkConfig:
    return NetworkConfig(
        alpha=float(params["alpha"]), theta=float(params["theta"]), eta=float(params["eta"]),
        eps=float(params["eps"]), bs_density=float(params["bs_density"]),
        area_side=float(params["area_side"]), n_slots_max=int(params["slots"]),
        warmup_window=int(params["warmup_window"]), steady_tol=float(params["steady_tol"]),
        seed=int(params["seed"]), n_realizations=int(params["realizations"]),
        min_attempts=int(params["min_attempts"]), fading=params["fading"])


def cmd_simulate(params: dict, out: Path) -> int:
    _require(params, "alpha", "theta")
    cfg = _network_config(params)
    grid = delta_grid(params)
    jobs = int(params["jobs"])
    if jobs < 1:
        raise ParameterError("jobs must be >= 1")
    run = Run("simulate", params, out)
    records = simulate(cfg, jobs=jobs)
    rep = aggregate(records, grid, int(params["classes"]), cfg.min_attempts)

    run.csv("ccdf.csv", CCDF_COLUMNS, zip(grid, rep.ccdf))
    run.csv("classes.csv", SIM_CLASS_COLUMNS,
            [[c.index, c.n_devices, c.success_probability, c.idle_fraction, c.mean_sojourn,
              c.peak_aoi] for c in rep.per_class])
    run.csv("realizations.csv", REALIZATION_COLUMNS,
            [[r.summary(cfg.min_attempts)[k] for k in REALIZATION_COLUMNS] for r in records])
    run.json("summary.json", {
        "n_devices": rep.n_devices,
        "n_used": rep.n_used,
        "n_zero_attempts": rep.n_zero_attempts,
        "n_low_attempts": rep.n_low_attempts,
        "idle_fraction": rep.idle_fraction,
        "mean_sojourn": rep.mean_sojourn,
        "network_peak_aoi": rep.network_peak_aoi,
        "all_steady": rep.all_steady,
    })
    run.finish("ok", {"seeds": {"master": cfg.seed,
                                "realizations": list(range(cfg.n_realizations))}})
    print(f"devices={rep.n_devices} idle_fraction={rep.idle_fraction:.6g} "
          f"network_peak_aoi={format_value(rep.network_peak_aoi)}")
    return EXIT_OK


def _load_report(path: Path, command: str) -> tuple[dict, dict, dict]:
    try:
        manifest = json.loads((path / "manifest.json").read_text())
        summary = json.loads((path / "summary.json").read_text())
        rows = _read_csv(path / "ccdf.csv")
    except (OSError, json.JSONDecodeError) as exc:
        raise ParameterError(f"cannot read report in {path}: {exc}") from exc
    if manifest.get("command") != command:
        raise ParameterError(f"{path} holds a {manifest.get('command')!r} report, "
                             f"expected {command!r}")
    ccdf = {"delta": np.array([float(r["delta"]) for r in rows]),
            "ccdf": np.array([float(r["ccdf"]) for r in rows])}
    return manifest, summary, ccdf


def _as_float(v):
    if v is None:
        return math.nan
    return math.inf if v == "inf" else float(v)


def _rel_err(emp, ana):
    if math.isinf(ana) or math.isinf(emp):
        return 0.0 if emp == ana else math.inf
    if math.isnan(emp) or math.isnan(ana):
        return math.nan
    return abs(emp - ana) / abs(ana) if ana else abs(emp - ana)


def manifest_diff(a: dict, b: dict, keys=SHARED_KEYS) -> dict:
    pa, pb = a.get("params", {}), b.get("params", {})
    diff = {}
    for k in keys:
        va, vb = pa.get(k), pb.get(k)
        same = (va == vb if not (isinstance(va, float) and isinstance(vb, float))
                else math.isclose(va, vb, rel_tol=1e-12, abs_tol=0.0))
        if not same:
            diff[k] = [va, vb]
    return diff


def cmd_compare(params: dict, analysis: Path, simulation: Path, out: Path) -> int:
    man_a, sum_a, cc_a = _load_report(analysis, "analyze")
    # a simulation report or a second analysis are both accepted as the empirical side
    try:
        man_s, sum_s, cc_s = _load_report(simulation, "simulate")
    except ParameterError:
        man_s, sum_s, cc_s = _load_report(simulation, "analyze")
    diff = manifest_diff(man_a, man_s)
    if diff:
        print("refusing to compare: parameters differ", file=sys.stderr)
        for k, (va, vb) in diff.items():
            print(f"  {k}: {va!r} != {vb!r}", file=sys.stderr)
        return EXIT_PARAM
    if not np.array_equal(cc_a["delta"], cc_s["delta"]):
        raise ParameterError("delta grids differ")

    gap = cc_s["ccdf"] - cc_a["ccdf"]
    ok_pts = np.isfinite(gap)
    sup = float(np.max(np.abs(gap[ok_pts]))) if ok_pts.any() else math.nan
    rel_soj = _rel_err(_as_float(sum_s["mean_sojourn"]), _as_float(sum_a["mean_sojourn"]))
    rel_peak = _rel_err(_as_float(sum_s["network_peak_aoi"]), _as_float(sum_a["network_peak_aoi"]))
    ccdf_tol, rel_tol = float(params["ccdf_tol"]), float(params["rel_tol"])
    checks = {
        "ccdf_sup_norm": sup <= ccdf_tol,
        "mean_sojourn": rel_soj <= rel_tol,
        "network_peak_aoi": rel_peak <= rel_tol,
    }
    passed = all(checks.values())

    run = Run("compare", params, out)
    run.csv("compare.csv", COMPARE_COLUMNS,
            zip(cc_a["delta"], cc_a["ccdf"], cc_s["ccdf"], gap))
    run.json("agreement.json", {
        "ccdf_sup_norm": sup,
        "mean_sojourn_rel_error": rel_soj,
        "network_peak_aoi_rel_error": rel_peak,
        "ccdf_tol": ccdf_tol,
        "rel_tol": rel_tol,
        "checks": checks,
        "pass": passed,
    })
    run.finish("pass" if passed else "fail",
               {"inputs": {"analysis": str(analysis), "simulation": str(simulation)}})
    for name, ok in checks.items():
        print(f"{name}: {'pass' if ok else 'FAIL'}")
    print(f"sup_norm={format_value(sup)} rel_sojourn={format_value(rel_soj)} "
          f"rel_peak={format_value(rel_peak)}")
    return EXIT_OK if passed else EXIT_DISAGREE


def _sweep_task(task):
    theta_db, alpha, params = task
    p = _macro({**params, "theta": db_to_linear(theta_db)})
    starts = tuple(parse_grid(params["starts"])) if params["starts"] not in ("", None) else ()
    return sweep_point(p.theta, alpha, p, int(params["classes"]), _fp_config(params),
                       starts=starts)


def cmd_sweep(params: dict, out: Path) -> int:
    alphas = parse_grid(params["alpha_grid"])
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ParameterError("alpha grid must be strictly increasing")
    for a in alphas:
        ArrivalSpec(a)
    thetas = parse_grid(params["theta_db_list"])
    _macro({**params, "theta": 1.0})
    _fp_config(params)
    tasks = [(t, a, params) for t in thetas for a in alphas]
    jobs = int(params["jobs"])
    if jobs <= 1:
        points = [_sweep_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            points = list(pool.map(_sweep_task, tasks))

    run = Run("sweep", params, out)
    run.csv("sweep.csv", SWEEP_COLUMNS,
            [[t[0], p.alpha, p.peak_aoi, p.mean_sojourn, p.all_stable]
             for t, p in zip(tasks, points)])
    frontier = []
    for i, t in enumerate(thetas):
        sp = stability_point(points[i * len(alphas):(i + 1) * len(alphas)])
        frontier.append([t, "none" if sp is None else sp])
    run.csv("frontier.csv", FRONTIER_COLUMNS, frontier)
    converged = all(p.converged for p in points)
    run.finish("converged" if converged else "not_converged")
    for t, sp in frontier:
        print(f"theta_db={format_value(t)} stability_alpha={sp if isinstance(sp, str) else format_value(sp)}")
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        params = resolve(args)
        if args.command == "analyze":
            return cmd_analyze(params, args.out)
        if args.command == "simulate":
            return cmd_simulate(params, args.out)
        if args.command == "compare":
            return cmd_compare(params, args.analysis, args.simulation, args.out)
        return cmd_sweep(params, args.out)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
