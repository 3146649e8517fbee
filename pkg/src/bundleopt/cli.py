"""Command-line experiment runner.

Three verbs, each taking --config/--out/--seed/--jobs:

* bundle-eval: sweep a catalog test function over a grid, writing the
  Monte-Carlo bundled objective, the first/zero-order gradient bundles and
  the quadrature-oracle values per point.
* plan: run the trajectory optimizer on a catalog task for every
  (gradient mode, seed) pair, writing per-iteration costs and the final
  trajectories.
* contact-probe: sweep 2D contact commands on a grid, writing the next
  box position under the exact and relaxed models and their smoothed
  (quadrature-bundled) versions.

Configs are JSON, schema-validated with unknown keys rejected. Every run
writes result CSVs (schema version stamped in a leading comment row) and
a manifest echoing the effective configuration; outputs are byte-identical
for a fixed seed regardless of --jobs. Wall-clock timings go to the log
(BUNDLEOPT_LOG in {error, info, debug}), never into the result files.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import logging
import os
import sys
import time
from importlib.metadata import version as _pkg_version

import jsonschema
import numpy as np

from .contact import Contact2DParams, Contact2DState, step_2d_anitescu, step_2d_exact
from .errors import ConfigurationError, DivergedError, SingularRegressionError
from .functions import TEST_FUNCTION_IDS, get_test_function
from .irs_lqr import GRADIENT_MODES, GradientMode, irs_lqr_run, trajectory_cost
from .oracle import convolution_oracle, gauss_hermite_expectation
from .smoothing import (SmoothingDistribution, bundled_objective_estimate,
                        first_order_gradient_bundle, zero_order_gradient_bundle)
from .tasks import TASK_BUILDERS, build_task

log = logging.getLogger("bundleopt")

CSV_SCHEMA_VERSION = "bundleopt-csv-v1"

_GRID = {
    "type": "object",
    "properties": {
        "start": {"type": "number"},
        "stop": {"type": "number"},
        "count": {"type": "integer", "minimum": 2},
    },
    "required": ["start", "stop", "count"],
    "additionalProperties": False,
}

BUNDLE_EVAL_SCHEMA = {
    "type": "object",
    "properties": {
        "function": {"enum": list(TEST_FUNCTION_IDS)},
        "sigma": {"type": "number", "exclusiveMinimum": 0},
        "grid": _GRID,
        "samples": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "quadrature_points": {"type": "integer", "minimum": 11},
    },
    "required": ["function", "sigma", "grid"],
    "additionalProperties": False,
}

PLAN_SCHEMA = {
    "type": "object",
    "properties": {
        "task": {"enum": sorted(TASK_BUILDERS)},
        "params": {"type": "object"},
        "modes": {"type": "array", "items": {"enum": list(GRADIENT_MODES)},
                  "minItems": 1},
        "samples": {"type": "integer", "minimum": 1},
        "sigma0": {"type": "number", "minimum": 0},
        "schedule": {
            "type": "object",
            "properties": {
                "policy": {"enum": ["geometric", "constant"]},
                "gamma": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
            "required": ["policy"],
            "additionalProperties": False,
        },
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0},
                  "minItems": 1},
        "max_iters": {"type": "integer", "minimum": 1},
    },
    "required": ["task", "modes", "sigma0", "seeds"],
    "additionalProperties": False,
}

CONTACT_PROBE_SCHEMA = {
    "type": "object",
    "properties": {
        "system": {"type": "object"},
        "state": {"type": "array", "items": {"type": "number"},
                  "minItems": 3, "maxItems": 3},
        "grid": {
            "type": "object",
            "properties": {"x": _GRID, "y": _GRID},
            "required": ["x", "y"],
            "additionalProperties": False,
        },
        "sigma": {"type": "number", "exclusiveMinimum": 0},
        "quadrature_points": {"type": "integer", "minimum": 5},
        "seed": {"type": "integer", "minimum": 0},
    },
    "required": ["state", "grid", "sigma"],
    "additionalProperties": False,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bundleopt",
        description="Randomized-smoothing benchmark runner")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("bundle-eval", "plan", "contact-probe"):
        p = sub.add_parser(verb)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's seed(s)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
    args = parser.parse_args(argv)

    level = {"error": logging.ERROR, "info": logging.INFO,
             "debug": logging.DEBUG}.get(os.environ.get("BUNDLEOPT_LOG", "error"))
    if level is None:
        print("BUNDLEOPT_LOG must be one of error, info, debug", file=sys.stderr)
        return 2
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        config = _load_config(args.config, args.verb)
        os.makedirs(args.out, exist_ok=True)
        started = time.perf_counter()
        runner = {"bundle-eval": _run_bundle_eval, "plan": _run_plan,
                  "contact-probe": _run_contact_probe}[args.verb]
        outputs = runner(config, args.out, args.seed, max(1, args.jobs))
        _write_manifest(args.out, args.verb, config, outputs)
        log.info("%s finished in %.2fs -> %s", args.verb,
                 time.perf_counter() - started, ", ".join(outputs))
        return 0
    except (ConfigurationError, jsonschema.ValidationError, json.JSONDecodeError,
            FileNotFoundError, NotADirectoryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DivergedError, SingularRegressionError, np.linalg.LinAlgError,
            RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def _load_config(path: str, verb: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    schema = {"bundle-eval": BUNDLE_EVAL_SCHEMA, "plan": PLAN_SCHEMA,
              "contact-probe": CONTACT_PROBE_SCHEMA}[verb]
    jsonschema.validate(config, schema)
    return config


def _grid_points(grid: dict) -> np.ndarray:
    return np.linspace(grid["start"], grid["stop"], grid["count"])


def _derive_seed(base: int, index: int) -> int:
    return int(np.random.SeedSequence([int(base), int(index)])
               .generate_state(1, dtype=np.uint64)[0])


def _pmap(worker, items, jobs: int):
    """Parallel map with deterministic (submission-order) results."""
    if jobs <= 1 or len(items) <= 1:
        return [worker(item) for item in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, items))


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# schema={CSV_SCHEMA_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return int(value)
    return value


def _write_manifest(out_dir: str, verb: str, config: dict, outputs) -> None:
    manifest = {
        "schema": "bundleopt-manifest-v1",
        "command": verb,
        "config": config,
        "package_version": _pkg_version("bundleopt"),
        "outputs": sorted(outputs),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# bundle-eval


def _bundle_eval_point(item):
    config, x, index = item
    f = get_test_function(config["function"])
    sigma = config["sigma"]
    n = config.get("samples", 10000)
    points = config.get("quadrature_points", 201)
    dist = SmoothingDistribution.isotropic(1, sigma)
    seed = _derive_seed(config["seed"], index)
    value_mc = bundled_objective_estimate(f, [x], dist, n, seed)
    grad_first = first_order_gradient_bundle(f, f.gradient, [x], dist, n, seed)
    grad_zero = zero_order_gradient_bundle(f, [x], dist, n, seed)
    value_q, grad_q = convolution_oracle(f, [x], dist, points)
    return [x, float(value_mc.value), value_q, float(grad_first.value[0]),
            float(grad_zero.value[0]), float(grad_q[0])]


def _run_bundle_eval(config: dict, out_dir: str, seed_override, jobs: int):
    config = dict(config)
    config.setdefault("seed", 0)
    if seed_override is not None:
        config["seed"] = seed_override
    xs = _grid_points(config["grid"])
    rows = _pmap(_bundle_eval_point, [(config, float(x), i) for i, x in enumerate(xs)], jobs)
    path = os.path.join(out_dir, "bundle_eval.csv")
    _write_csv(path, ["x", "bundled_mc", "bundled_oracle", "grad_first_order",
                      "grad_zero_order", "grad_oracle"], rows)
    return ["bundle_eval.csv"]


# ---------------------------------------------------------------------------
# plan


def _plan_run(item):
    config, mode_kind, seed = item
    task = build_task(config["task"], config.get("params"))
    schedule_cfg = config.get("schedule", {"policy": "geometric", "gamma": 0.8})
    schedule = (schedule_cfg["policy"], schedule_cfg.get("gamma", 0.8))
    mode = GradientMode(kind=mode_kind, samples=config.get("samples", 100))
    started = time.perf_counter()
    history = irs_lqr_run(task.system, task.mpc, mode,
                          cov0=config["sigma0"], schedule=schedule,
                          max_iters=config.get("max_iters", 20),
                          seed=seed, u_init=task.u_init)
    elapsed = time.perf_counter() - started
    diverged = history[-1].cost > history[0].cost
    result_rows = [[task.name, mode_kind, seed, it.iteration, it.cost,
                    it.infeasible_steps, int(diverged)] for it in history]
    final = history[-1]
    traj_rows = []
    T = task.mpc.horizon
    for t in range(T + 1):
        u = final.us[t] if t < T else [""] * task.mpc.input_dim
        traj_rows.append([task.name, mode_kind, seed, t, *final.xs[t], *u])
    return result_rows, traj_rows, elapsed


def _run_plan(config: dict, out_dir: str, seed_override, jobs: int):
    config = dict(config)
    if seed_override is not None:
        config["seeds"] = [seed_override]
    items = [(config, kind, int(seed))
             for kind in config["modes"] for seed in config["seeds"]]
    results = _pmap(_plan_run, items, jobs)
    task = build_task(config["task"], config.get("params"))
    n, m = task.mpc.state_dim, task.mpc.input_dim
    result_rows = [row for res in results for row in res[0]]
    traj_rows = [row for res in results for row in res[1]]
    for (cfg, kind, seed), res in zip(items, results):
        log.info("plan %s mode=%s seed=%d: %.2fs", config["task"], kind, seed, res[2])
    _write_csv(os.path.join(out_dir, "results.csv"),
               ["task", "mode", "seed", "iteration", "cost",
                "infeasible_steps", "diverged"], result_rows)
    _write_csv(os.path.join(out_dir, "trajectory.csv"),
               ["task", "mode", "seed", "t",
                *[f"x{i}" for i in range(n)], *[f"u{i}" for i in range(m)]],
               traj_rows)
    return ["results.csv", "trajectory.csv"]


# ---------------------------------------------------------------------------
# contact-probe


def _probe_point(item):
    config, cx, cy = item
    params = Contact2DParams(**config.get("system", {}))
    state = Contact2DState(*config["state"])
    sigma = config["sigma"]
    points = config.get("quadrature_points", 41)
    exact_next, _ = step_2d_exact(state, (cx, cy), params)
    relaxed_next, _ = step_2d_anitescu(state, (cx, cy), params)
    dist = SmoothingDistribution.isotropic(2, sigma)

    def bundled(stepper):
        def box_next(cmd):
            nxt, _ = stepper(state, (float(cmd[0]), float(cmd[1])), params)
            return nxt.xu
        return gauss_hermite_expectation(box_next, np.array([cx, cy]), dist, points)

    return [cx, cy, exact_next.xu, relaxed_next.xu,
            bundled(step_2d_exact), bundled(step_2d_anitescu)]


def _run_contact_probe(config: dict, out_dir: str, seed_override, jobs: int):
    config = dict(config)
    config.setdefault("seed", 0)
    if seed_override is not None:
        config["seed"] = seed_override
    xs = _grid_points(config["grid"]["x"])
    ys = _grid_points(config["grid"]["y"])
    items = [(config, float(cx), float(cy)) for cx in xs for cy in ys]
    rows = _pmap(_probe_point, items, jobs)
    path = os.path.join(out_dir, "contact_probe.csv")
    _write_csv(path, ["x_command", "y_command", "exact", "anitescu",
                      "bundled_exact", "bundled_anitescu"], rows)
    return ["contact_probe.csv"]


if __name__ == "__main__":
    sys.exit(main())
