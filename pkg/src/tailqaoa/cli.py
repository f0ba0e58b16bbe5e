"""Command-line driver.

Each analysis command writes the data behind one kind of figure: CSV for
grids and sweeps (first line is a ``#`` comment echoing the configuration),
JSON for structured results (configuration under the ``"config"`` key).
Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from datetime import datetime, timezone

from . import analysis, instance, ising, optimizer, simulator
from .instance import InstanceError
from .simulator import NoiseConfig, VariationalParams


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _check(cond: bool, message: str):
    if not cond:
        raise UsageError(message)


def _config(args) -> dict:
    skip = {"func", "output", "histogram"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    cfg["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return cfg


def _write(path: str | None, text: str):
    """Write atomically; nothing is left behind if the write fails."""
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".partial-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _csv(args, header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(_config(args), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _load(args) -> instance.ExactCoverInstance:
    inst = instance.load_instance(args.instance)
    limit = simulator.max_qubits()
    if getattr(args, "needs_simulation", False):
        _check(inst.n <= limit, f"instance has {inst.n} routes; the qubit cap is {limit}")
    return inst


def _solutions(inst) -> list[int]:
    covers = inst.known_solutions
    if covers is None:
        covers = instance.solve_exact(inst)
    if not covers:
        raise RuntimeError("instance has no exact cover; success probability is undefined")
    return instance.solution_indices(covers)


def _load_trace(path: str) -> list[optimizer.LevelResult]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    levels = data["trace"] if isinstance(data, dict) else data
    return [optimizer.LevelResult.from_dict(d) for d in levels]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_generate(args):
    _check(args.routes >= 1, "n_routes must be at least 1")
    _check(args.planted >= 1, "planted_size must be at least 1")
    _check(args.planted <= args.routes, "planted_size exceeds n_routes")
    _check(args.flights >= args.planted, "n_flights must be at least planted_size")
    _check(args.routes <= instance.ORACLE_LIMIT, f"n_routes exceeds the oracle limit {instance.ORACLE_LIMIT}")
    decoy = None
    if args.decoy_min is not None or args.decoy_max is not None:
        _check(args.decoy_min is not None and args.decoy_max is not None,
               "--decoy-min and --decoy-max go together")
        _check(1 <= args.decoy_min <= args.decoy_max <= args.flights, "invalid decoy size range")
        decoy = (args.decoy_min, args.decoy_max)
    inst = instance.generate_planted(args.flights, args.routes, args.planted, args.seed, decoy)
    stats = instance.valency_stats(instance.to_graph(inst))
    print(f"planted solution {list(inst.known_solutions[0])}; {inst.n} routes, "
          f"{inst.n_flights} flights, mean valency {stats.mean:.2f}", file=sys.stderr)
    _write(args.output, instance.dump_instance(inst))


def cmd_info(args):
    inst = _load(args)
    stats = instance.valency_stats(instance.to_graph(inst))
    info = {"n": inst.n, "flights": inst.n_flights,
            "valency_mean": stats.mean, "valency_std": stats.std_dev}
    if inst.n <= instance.ORACLE_LIMIT:
        info["solutions"] = len(instance.solve_exact(inst))
    else:
        info["solutions"] = None
    _write(args.output, _json(info))


def cmd_ising_dump(args):
    inst = _load(args)
    _write(args.output, _json(ising.build_ising(inst).to_dict()))


def cmd_landscape(args):
    _check(args.resolution >= 2, "resolution must be at least 2")
    inst = _load(args)
    model = ising.build_ising(inst)
    grid = optimizer.landscape_scan(model, _solutions(inst), args.resolution, workers=args.threads)
    _write(args.output, _csv(args, ["gamma", "beta", "E", "F"], grid.rows()))


def cmd_optimize(args):
    _check(args.p_max >= 1, "p-max must be at least 1")
    _check(args.n_starts >= 1, "n-starts must be at least 1")
    inst = _load(args)
    model = ising.build_ising(inst)
    sols = _solutions(inst)
    base = optimizer.multistart_optimize(model, sols, 1, args.n_starts, args.seed, workers=args.threads)
    if args.strategy == "interp":
        trace = optimizer.interp_pipeline(model, sols, args.p_max, base)
    else:
        trace = [base] + [
            optimizer.multistart_optimize(model, sols, p, args.n_starts, args.seed + p - 1,
                                          workers=args.threads)
            for p in range(2, args.p_max + 1)]
    payload = {"config": _config(args), "trace": [lv.to_dict() for lv in trace]}
    _write(args.output, _json(payload))


def _params_from_args(args) -> VariationalParams | None:
    if args.trace:
        trace = _load_trace(args.trace)
        if args.p is None:
            return trace[-1].params
        if args.p == 0:
            return None
        match = [lv for lv in trace if lv.p == args.p]
        _check(bool(match), f"trace has no level p={args.p}")
        return match[0].params
    if args.gammas is not None or args.betas is not None:
        _check(args.gammas is not None and args.betas is not None, "--gammas and --betas go together")
        _check(len(args.gammas) == len(args.betas) >= 1, "--gammas and --betas need equal, nonzero length")
        return VariationalParams(tuple(args.gammas), tuple(args.betas))
    _check(args.p == 0, "give --trace, --gammas/--betas, or --p 0 for the initial state")
    return None


def cmd_sample(args):
    _check(args.shots >= 1, "shots must be at least 1")
    _check(0 < args.eps < 1, "eps must lie in (0, 1)")
    params = _params_from_args(args)
    inst = _load(args)
    model = ising.build_ising(inst)
    sols = _solutions(inst)
    state = simulator.run_qaoa(model, params) if params else simulator.prepare_plus(model.n)
    F = float(simulator.success_probability(state, sols))
    hist = simulator.cost_histogram(state, model)
    draws = simulator.sample(state, args.shots, args.seed)
    draw_costs = model.energies[draws]
    bits = [instance.to_bitstring(int(x), model.n) for x in draws]
    targets = set(sols)
    hits = sum(1 for x in draws if int(x) in targets)
    counts = {int(c): int((draw_costs == c).sum()) for c in hist}
    payload = {
        "config": _config(args),
        "p": params.p if params else 0,
        "F": F,
        "required_measurements": analysis.required_measurements(F, args.eps) if F > 0 else None,
        "solution_hits": hits,
        "shots": bits,
        "histogram": [{"cost": c, "probability": hist[c], "count": counts[c]} for c in sorted(hist)],
    }
    _write(args.output, _json(payload))
    if args.histogram:
        rows = [(c, hist[c], counts[c]) for c in sorted(hist)]
        _write(args.histogram, _csv(args, ["cost", "probability", "count"], rows))


def cmd_noise(args):
    _check(0.0 <= args.eta <= 1.0, "eta must lie in [0, 1]")
    _check(args.trajectories >= 1, "trajectories must be at least 1")
    inst = _load(args)
    trace = _load_trace(args.trace)
    model = ising.build_ising(inst)
    sols = _solutions(inst)
    rows = []
    for level in trace:
        cfg = NoiseConfig(args.eta, args.trajectories, args.seed ^ level.p, args.placement)
        res = simulator.run_noisy(model, level.params, sols, cfg)
        clean = float(simulator.success_probability(simulator.run_qaoa(model, level.params), sols))
        rows.append((level.p, clean, res.mean, res.stderr))
    _write(args.output, _csv(args, ["p", "F_noiseless", "F_noisy", "stderr"], rows))


def _check_grid(args):
    _check(len(args.t_grid) >= 1 and all(t > 0 for t in args.t_grid), "T grid must hold positive times")
    _check(args.dt > 0, "dt must be positive")
    _check(0 < args.p_d < 1, "p-d must lie in (0, 1)")


def cmd_anneal(args):
    _check_grid(args)
    inst = _load(args)
    model = ising.build_ising(inst)
    report = analysis.tts_qa(model, _solutions(inst), args.t_grid, args.p_d, args.dt, workers=args.threads)
    rows = [(T, F, t if math.isfinite(t) else "inf") for T, F, t in report.sweep]
    _write(args.output, _csv(args, ["T", "F_gs", "tts"], rows))


def cmd_tts(args):
    _check_grid(args)
    inst = _load(args)
    model = ising.build_ising(inst)
    trace = _load_trace(args.trace)
    qaoa = analysis.tts_qaoa(trace, args.p_d)
    qa = analysis.tts_qa(model, _solutions(inst), args.t_grid, args.p_d, args.dt, workers=args.threads)
    payload = {"config": _config(args), "qaoa": qaoa.to_dict(), "qa": qa.to_dict(),
               "qaoa_faster": (qaoa.tts < qa.tts) if qaoa.finite and qa.finite else None}
    _write(args.output, _json(payload))


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", help="output file (default: stdout)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    common.add_argument("--threads", type=int, default=1, help="worker cap for parallel sweeps")
    common.add_argument("--max-qubits", type=int, default=None,
                        help="override the qubit memory cap (also QAOA_MAX_QUBITS)")

    def with_instance(sub, sim=True):
        sub.add_argument("instance", help="instance JSON file")
        sub.set_defaults(needs_simulation=sim)

    parser = argparse.ArgumentParser(prog="tailqaoa", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("generate", parents=[common], help="planted unique-solution instance")
    p.add_argument("--flights", type=int, required=True)
    p.add_argument("--routes", type=int, required=True)
    p.add_argument("--planted", type=int, required=True, help="routes in the planted cover")
    p.add_argument("--decoy-min", type=int, help="smallest decoy route (default: planted range)")
    p.add_argument("--decoy-max", type=int, help="largest decoy route")
    p.set_defaults(func=cmd_generate)

    p = subs.add_parser("info", parents=[common], help="size, valency and solution count")
    with_instance(p, sim=False)
    p.set_defaults(func=cmd_info)

    p = subs.add_parser("ising-dump", parents=[common], help="J, h and offset as JSON")
    with_instance(p, sim=False)
    p.set_defaults(func=cmd_ising_dump)

    p = subs.add_parser("landscape", parents=[common], help="p=1 grid of E and F (CSV)")
    with_instance(p)
    p.add_argument("-r", "--resolution", type=int, default=64)
    p.set_defaults(func=cmd_landscape)

    p = subs.add_parser("optimize", parents=[common], help="optimal parameters per level (JSON)")
    with_instance(p)
    p.add_argument("--p-max", type=int, default=10)
    p.add_argument("--strategy", choices=["interp", "multistart"], default="interp")
    p.add_argument("--n-starts", type=int, default=4000, help="multistart points (default: 4000)")
    p.set_defaults(func=cmd_optimize)

    p = subs.add_parser("sample", parents=[common], help="measurements and cost histogram")
    with_instance(p)
    p.add_argument("--trace", help="optimize output to take parameters from")
    p.add_argument("--p", type=int, help="level to use from the trace; 0 is |+>^n")
    p.add_argument("--gammas", type=_float_list)
    p.add_argument("--betas", type=_float_list)
    p.add_argument("--shots", type=int, default=74)
    p.add_argument("--eps", type=float, default=1e-3, help="failure tolerance for the shot bound")
    p.add_argument("--histogram", help="also write the cost histogram as CSV")
    p.set_defaults(func=cmd_sample)

    p = subs.add_parser("noise", parents=[common], help="depolarizing-noise success probability per level")
    with_instance(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--eta", type=float, default=0.01)
    p.add_argument("--trajectories", type=int, default=2000)
    p.add_argument("--placement", choices=["both", "cost"], default="both",
                   help="error rounds after both half-layers or after cost layers only")
    p.set_defaults(func=cmd_noise)

    grid_help = "comma-separated annealing times (default: 16 log-spaced in [0.5, 200])"
    for name, func, helptext in (("anneal", cmd_anneal, "annealing sweep over T (CSV)"),
                                 ("tts", cmd_tts, "QAOA vs annealing time to solution")):
        p = subs.add_parser(name, parents=[common], help=helptext)
        with_instance(p)
        p.add_argument("--t-grid", type=_float_list, default=analysis.default_t_grid(), help=grid_help)
        p.add_argument("--dt", type=float, default=0.05)
        p.add_argument("--p-d", type=float, default=analysis.DEFAULT_TARGET)
        if name == "tts":
            p.add_argument("--trace", required=True)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    saved = os.environ.get("QAOA_MAX_QUBITS")
    if args.max_qubits is not None:
        os.environ["QAOA_MAX_QUBITS"] = str(args.max_qubits)
    try:
        _check(args.threads >= 1, "threads must be at least 1")
        args.func(args)
    except (UsageError, InstanceError) as exc:
        print(f"tailqaoa {args.command}: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"tailqaoa {args.command}: {exc}", file=sys.stderr)
        return 1
    finally:
        # in-process callers get their environment back
        if saved is None:
            os.environ.pop("QAOA_MAX_QUBITS", None)
        else:
            os.environ["QAOA_MAX_QUBITS"] = saved
    return 0


if __name__ == "__main__":
    sys.exit(main())
