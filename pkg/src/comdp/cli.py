"""Command-line front end: ``comdp {solve,filter-trace,probe,simulate,list-models}``.

Every run is deterministic given ``--seed`` (default 0). Output format is
picked from the ``--output`` extension (``.json`` or ``.csv``); without
``--output`` the JSON result goes to stdout. JSON results embed the resolved
run configuration. Failures print an error object to stderr and exit 1, or
2 for a malformed model.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import filtering, probe, solver
from .measures import Interval, PointSet, dyadic_intervals
from .model import DiscretePomdp, ModelError, _jsonable, as_belief, model_from_dict, validate
from .models import BUILDERS, build

CSV_HELP = """CSV columns:
  solve (grid):   vertex, z0..z{n-1}, value
  solve (alpha):  vector, action, a0..a{n-1}   (components of each alpha vector)
  --trace-csv:    iteration, delta
  filter-trace:   t, action, observation, z0..z{n-1}
  probe:          n, gap
  simulate:       episode, cost
Floats are written with 17 significant digits."""


class CliError(Exception):
    def __init__(self, message: str, code: int = 1, pointer: str | None = None):
        super().__init__(message)
        self.code = code
        self.pointer = pointer


def default_threads() -> int:
    env = os.environ.get("COMDP_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _fmt(v) -> str:
    return "%.17g" % v


def _read_json(text_or_path: str):
    """Inline JSON, or the contents of a file when the argument names one."""
    p = Path(text_or_path)
    if not text_or_path.lstrip().startswith(("{", "[")) and p.exists():
        text_or_path = p.read_text()
    try:
        return json.loads(text_or_path)
    except json.JSONDecodeError as exc:
        raise CliError(f"invalid JSON: {exc}") from None


def load_model_source(args) -> tuple[DiscretePomdp, dict]:
    if bool(args.model) == bool(args.builder):
        raise CliError("give exactly one of --model or --builder")
    if args.builder:
        params = _read_json(args.params) if args.params else {}
        source = {"builder": args.builder, "params": params}
    else:
        try:
            doc = json.loads(Path(args.model).read_text())
        except FileNotFoundError:
            raise CliError(f"model file not found: {args.model}") from None
        except json.JSONDecodeError as exc:
            raise CliError(f"model file is not valid JSON: {exc}", code=2, pointer="") from None
        if isinstance(doc, dict) and "builder" in doc:
            source = {"builder": doc["builder"], "params": doc.get("params", {})}
        else:
            source = {"path": str(args.model)}
            try:
                model = model_from_dict(doc)
            except ModelError as exc:
                raise CliError("; ".join(exc.failures), code=2, pointer=exc.pointer or "") from None
            report = validate(model)
            if not report.ok:
                raise CliError("; ".join(report.failures), code=2, pointer=_pointer_of(report.failures[0]))
            return model, source
    try:
        model = build(source["builder"], source["params"])
    except (KeyError, TypeError) as exc:
        raise CliError(str(exc).strip("'\""), code=2, pointer="/params") from None
    except ModelError as exc:
        raise CliError("; ".join(exc.failures), code=2, pointer="/params") from None
    return model, source


def _pointer_of(message: str) -> str:
    return "/" + message.split(" ", 1)[0]


def _beliefs(args, model: DiscretePomdp) -> np.ndarray:
    if args.beliefs:
        b = np.atleast_2d(np.asarray(_read_json(args.beliefs), dtype=float))
        if b.shape[1] != model.n_states:
            raise CliError(f"beliefs must have {model.n_states} components")
        return np.array([as_belief(z, model.n_states) for z in b])
    return np.vstack([model.prior, np.eye(model.n_states)])


def _config(args, source: dict) -> dict:
    skip = {"func", "model", "builder", "params"}
    cfg = {k: v for k, v in vars(args).items() if k not in skip}
    cfg["model_source"] = source
    return cfg


def _write_csv(path: str, header: list, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    Path(path).write_text(buf.getvalue())


def _emit(args, result: dict, csv_header: list | None = None, csv_rows=None) -> None:
    out = args.output
    if out and out.endswith(".csv"):
        if csv_header is None:
            raise CliError("this subcommand has no CSV output; use .json")
        _write_csv(out, csv_header, csv_rows)
        return
    if out and not out.endswith(".json"):
        raise CliError(f"cannot infer output format from {out!r}; use .json or .csv")
    text = json.dumps(_jsonable(result), indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _solve(args, model):
    """Returns (value function, extra result fields)."""
    if args.method == "alpha":
        if args.horizon is None or args.horizon < 0:
            raise CliError("--method alpha needs --horizon T >= 0")
        sets = solver.solve_finite_horizon(model, args.horizon, lp_prune=args.lp_prune, threads=args.threads)
        V = sets[-1]
        return V, {"vectors": V.vectors, "vector_actions": [model.actions[a] if a >= 0 else None
                                                             for a in V.actions],
                   "trace": [len(s) for s in sets]}
    sol = solver.value_iterate_grid(model, args.resolution, max_iters=args.max_iters,
                                    tolerance=args.epsilon, threads=args.threads)
    return sol.values, {"vertices": sol.values.vertices, "vertex_values": sol.values.values_,
                        "trace": sol.trace, "iterations": sol.iterations, "converged": sol.converged}


def cmd_solve(args) -> int:
    model, source = load_model_source(args)
    V, extra = _solve(args, model)
    beliefs = _beliefs(args, model)
    values = V.values(beliefs)
    finite = beliefs[np.isfinite(values)]
    # a finite-horizon value is not a fixed point, so only grid runs report a residual
    residual = None
    if args.method == "grid" and len(finite):
        residual = solver.optimality_residual(model, V, finite)
    result = {"config": _config(args, source), "beliefs": beliefs, "values": values,
              "residual": residual, **extra}
    if args.trace_csv:
        tr = extra["trace"]
        _write_csv(args.trace_csv, ["iteration", "delta" if args.method == "grid" else "vectors"],
                   ((i + 1 if args.method == "grid" else i, float(d) if args.method == "grid" else d)
                    for i, d in enumerate(tr)))
    if args.method == "grid":
        verts = extra["vertices"]
        header = ["vertex"] + [f"z{i}" for i in range(model.n_states)] + ["value"]
        rows = ([i, *map(float, verts[i]), float(extra["vertex_values"][i])] for i in range(len(verts)))
    else:
        header = ["vector", "action"] + [f"a{i}" for i in range(model.n_states)]
        rows = ([i, extra["vector_actions"][i] or "", *map(float, v)] for i, v in enumerate(extra["vectors"]))
    _emit(args, result, header, rows)
    return 0


def _history(args, model: DiscretePomdp, rng: np.random.Generator):
    if args.history:
        h = _read_json(args.history)
        return h["y0"], [tuple(s) for s in h.get("steps", [])]
    p = model.prior
    x = solver._draw(rng, p)
    y0 = solver._draw(rng, model.initial_observation[x])
    steps = []
    for _ in range(args.steps):
        a = int(rng.integers(model.n_actions))
        x = solver._draw(rng, model.transition[a, x])
        y = solver._draw(rng, model.observation[a, x])
        steps.append((a, y))
    return y0, steps


def cmd_filter_trace(args) -> int:
    model, source = load_model_source(args)
    rng = np.random.default_rng(args.seed)
    y0, steps = _history(args, model, rng)
    beliefs = filtering.filter_history(model, y0, steps)
    acts = [None] + [model.actions[model.action_index(a)] for a, _ in steps]
    obs = [model.observations[model.observation_index(y0)]] + \
          [model.observations[model.observation_index(y)] for _, y in steps]
    result = {"config": _config(args, source), "actions": acts, "observations": obs, "beliefs": beliefs}
    header = ["t", "action", "observation"] + [f"z{i}" for i in range(model.n_states)]
    rows = ([t, acts[t] or "", obs[t], *map(float, z)] for t, z in enumerate(beliefs))
    _emit(args, result, header, rows)
    return 0


def parse_test_sets(items) -> list:
    sets = []
    for item in items or []:
        if "interval" in item:
            lo, hi = item["interval"]
            sets.append(Interval(float(lo), float(hi), item.get("closed_lo", False), item.get("closed_hi", False)))
        elif "points" in item:
            sets.append(PointSet(item["points"]))
        elif "dyadic_intervals" in item:
            sets.extend(dyadic_intervals(int(item["dyadic_intervals"])))
        elif "component" in item:
            i = int(item["component"])
            lo, hi = item.get("min", -np.inf), item.get("max", np.inf)
            sets.append(lambda pt, i=i, lo=lo, hi=hi: lo <= np.atleast_1d(pt)[i] <= hi)
        else:
            raise CliError(f"unrecognized test set {item!r}")
    return sets


def _sequence(spec, model: DiscretePomdp) -> list:
    seq = spec.get("sequence")
    if isinstance(seq, dict):
        z = seq["belief"]
        return [(z, model.action_index(a)) for a in seq["actions"]]
    if isinstance(seq, list):
        return [(s["belief"], model.action_index(s["action"])) for s in seq]
    raise CliError("probe spec needs a 'sequence' list or {belief, actions} object")


def cmd_probe(args) -> int:
    model, source = load_model_source(args)
    spec = _read_json(args.spec)
    try:
        seq = _sequence(spec, model)
        tgt = spec["target"]
        report = probe.probe_kernel(model, spec.get("kernel", "obs_marginal"), seq,
                                    (tgt["belief"], model.action_index(tgt["action"])),
                                    spec.get("mode", "tv"), parse_test_sets(spec.get("sets")),
                                    float(spec.get("threshold", probe.DEFAULT_THRESHOLD)))
    except KeyError as exc:
        raise CliError(f"probe spec is missing {exc}") from None
    cfg = _config(args, source)
    cfg["probe_spec"] = spec
    result = {"config": cfg, **report.to_dict()}
    _emit(args, result, ["n", "gap"], ((i + 1, float(g)) for i, g in enumerate(report.gaps)))
    return 0


def cmd_simulate(args) -> int:
    model, source = load_model_source(args)
    V, _ = _solve(args, model)
    policy = solver.GreedyPolicy(model, V)
    sim = solver.simulate_policy(model, policy, horizon=args.sim_horizon, episodes=args.episodes, seed=args.seed)
    result = {"config": _config(args, source), "mean": sim.mean, "stderr": sim.stderr,
              "episodes": sim.episodes, "horizon": sim.horizon, "aborted": sim.aborted,
              "diagnostics": sim.diagnostics, "costs": sim.costs,
              "value_at_prior": solver.initial_value(model, V)}
    _emit(args, result, ["episode", "cost"], ((i, float(c)) for i, c in enumerate(sim.costs)))
    return 0


def cmd_list_models(args) -> int:
    result = {name: {"description": b.doc,
                     "params": {k: {"type": t, "default": d, "help": h} for k, (t, d, h) in b.params.items()}}
              for name, b in BUILDERS.items()}
    _emit(args, {"config": {"subcommand": "list-models"}, "builders": result})
    return 0


def _add_model_args(p):
    src = p.add_argument_group("model source (exactly one)")
    src.add_argument("--model", help="model JSON file (schema v1, or {\"builder\": ..., \"params\": ...})")
    src.add_argument("--builder", choices=sorted(BUILDERS), help="built-in model constructor")
    src.add_argument("--params", help="builder parameters as inline JSON or a JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="result file; format from extension (.json or .csv)")


def _add_solver_args(p):
    p.add_argument("--method", choices=("alpha", "grid"), default="grid")
    p.add_argument("--horizon", type=int, help="horizon T for --method alpha")
    p.add_argument("--resolution", type=int, default=20, help="grid denominator r")
    p.add_argument("--epsilon", type=float, default=solver.DEFAULT_EPSILON)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $COMDP_THREADS or the CPU count)")
    p.add_argument("--lp-prune", action="store_true", help="also prune alpha vectors by LP domination")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="comdp", description=__doc__, epilog=CSV_HELP,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("solve", help="value iteration on beliefs", epilog=CSV_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_model_args(p)
    _add_solver_args(p)
    p.add_argument("--beliefs", help="JSON list of beliefs to evaluate (default: prior and vertices)")
    p.add_argument("--trace-csv", help="write the iteration trace as CSV")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("filter-trace", help="belief trajectory along a history", epilog=CSV_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_model_args(p)
    p.add_argument("--history", help='JSON {"y0": obs, "steps": [[action, obs], ...]}; '
                                     "default: a random history drawn with --seed")
    p.add_argument("--steps", type=int, default=5, help="length of a random history")
    p.set_defaults(func=cmd_filter_trace)

    p = sub.add_parser("probe", help="kernel continuity probe", epilog=CSV_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_model_args(p)
    p.add_argument("--spec", required=True,
                   help="probe spec JSON: kernel, mode, sequence, target, sets, threshold")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("simulate", help="simulate the greedy policy", epilog=CSV_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_model_args(p)
    _add_solver_args(p)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--sim-horizon", type=int, default=20, help="simulated steps per episode")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("list-models", help="list built-in constructors and their parameters")
    p.add_argument("--output")
    p.set_defaults(func=cmd_list_models)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 0) is None:
        args.threads = default_threads()
    try:
        return args.func(args)
    except CliError as exc:
        err = {"error": str(exc), "exit_code": exc.code}
        if exc.pointer is not None:
            err["pointer"] = exc.pointer
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        return exc.code
    except (ValueError, ModelError) as exc:
        sys.stderr.write(json.dumps({"error": str(exc), "exit_code": 1}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
