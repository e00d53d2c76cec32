"""Experiment runner: build instances, solve, trace, verify recovery.

Subcommands: ``run`` (solver + optional oracle, CSV trace + JSON summary +
optional convergence plot), ``verify-recovery`` (random-linear-coding rank
check of an allocation), ``bounds`` (degree bounds and round budgets).

Option precedence is flags > config file (``--config``, JSON keyed by option
name with dashes as underscores) > built-in defaults. Trace CSVs are written
atomically (temp file + rename) so failures never leave partial output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .coding import disseminate, try_recover
from .graph import EdgeListParseError, StorageGraph, geometric_random_graph, graph_power, read_edge_list
from .lp_oracle import MAX_ORACLE_NODES, OracleBudgetError, solve_exact
from .pcm_solver import SolverParams, iterations_for_epsilon, solve
from .problem import FdsInstance, optimum_bounds

EXIT_OK = 0
EXIT_GRAPH = 2
EXIT_ORACLE = 3
EXIT_OUTPUT = 4

CSV_HEADER = "round,objective,min_slack,msgs_per_node_cum,rel_error"


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class ExperimentConfig:
    graph_file: Optional[str] = None
    geometric: Optional[tuple] = None  # (n, radius)
    seed: int = 0
    epsilon: float = 0.1
    delta: Optional[float] = None
    alpha_mode: str = "dmax"
    ell: int = 1
    max_rounds: Optional[int] = None
    oracle: bool = False
    out_dir: Optional[str] = None
    plot: bool = False
    m: int = 64
    trials: int = 100
    allocation_file: Optional[str] = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.ell < 1:
            raise ValueError("ell must be >= 1")
        if (self.graph_file is None) == (self.geometric is None):
            raise ValueError("exactly one graph source (file or geometric) is required")


def _load_graph(cfg: ExperimentConfig) -> StorageGraph:
    try:
        if cfg.graph_file is not None:
            text = Path(cfg.graph_file).read_text(encoding="utf-8")
            g = read_edge_list(text)
        else:
            n, radius = cfg.geometric
            g = geometric_random_graph(int(n), float(radius), cfg.seed)
    except (OSError, EdgeListParseError, ValueError) as exc:
        raise CliError(EXIT_GRAPH, f"cannot load graph: {exc}") from exc
    if cfg.ell > 1:
        g = graph_power(g, cfg.ell)
    return g


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = cfg.out_dir or os.environ.get("FDS_OUT_DIR") or "."
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = tempfile.NamedTemporaryFile(dir=path, prefix=".probe", delete=True)
        probe.close()
    except OSError as exc:
        raise CliError(EXIT_OUTPUT, f"output directory not writable: {exc}") from exc
    return path


def _write_atomic(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise CliError(EXIT_OUTPUT, f"cannot write {path}: {exc}") from exc


def _fmt(v) -> str:
    return repr(float(v))


def trace_csv(traces) -> str:
    lines = [CSV_HEADER]
    for t in traces:
        rel = "" if t.rel_error is None else _fmt(t.rel_error)
        lines.append(f"{t.round},{_fmt(t.objective)},{_fmt(t.min_slack)},{t.msgs_cum},{rel}")
    return "\n".join(lines) + "\n"


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Solve one instance and write trace.csv / summary.json (+ plot.png)."""
    t0 = time.perf_counter()
    g = _load_graph(cfg)
    out = _out_dir(cfg)

    oracle_obj = None
    if cfg.oracle:
        if g.n > MAX_ORACLE_NODES:
            raise CliError(EXIT_ORACLE, f"oracle budget exceeded: n={g.n} > {MAX_ORACLE_NODES}")
        try:
            oracle_obj = solve_exact(g).objective
        except OracleBudgetError as exc:
            raise CliError(EXIT_ORACLE, str(exc)) from exc

    params = SolverParams(
        epsilon=cfg.epsilon,
        delta=cfg.delta,
        alpha_mode=cfg.alpha_mode,
        max_rounds=cfg.max_rounds,
    )
    resolved = params.resolve(g)
    inst = FdsInstance(graph=g, delta=resolved.delta)
    x, traces = solve(inst, params, oracle_objective=oracle_obj)

    lo, hi = optimum_bounds(g)
    final = traces[-1]
    summary = {
        "n": g.n,
        "d_min": g.d_min,
        "d_max": g.d_max,
        "optimum_lower_bound": lo,
        "optimum_upper_bound": hi,
        "oracle_objective": oracle_obj,
        "k_epsilon": resolved.k_epsilon,
        "rounds_executed": len(traces),
        "final_objective": final.objective,
        "final_rel_error": final.rel_error,
        "wall_time_s": time.perf_counter() - t0,
    }

    _write_atomic(out / "trace.csv", trace_csv(traces))
    _write_atomic(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    if cfg.plot:
        _write_plot(out / "plot.png", traces)
    return summary


def _write_plot(path: Path, traces):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [t.msgs_cum for t in traces]
    ys = [max(t.rel_error, 1e-16) for t in traces]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.semilogy(xs, ys)
    ax.set_xlabel("cumulative per-node scalar broadcasts")
    ax.set_ylabel("relative error vs. exact optimum")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    try:
        fig.savefig(path)
    except OSError as exc:
        raise CliError(EXIT_OUTPUT, f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)


def verify_recovery(cfg: ExperimentConfig) -> dict:
    """Monte-Carlo recovery rates for an allocation (given or solved inline)."""
    g = _load_graph(cfg)
    out = _out_dir(cfg)

    if cfg.allocation_file is not None:
        try:
            x = np.asarray(json.loads(Path(cfg.allocation_file).read_text()), dtype=float)
        except (OSError, ValueError) as exc:
            raise CliError(EXIT_GRAPH, f"cannot load allocation: {exc}") from exc
        if x.shape != (g.n,):
            raise CliError(EXIT_GRAPH, f"allocation length {x.shape} != n={g.n}")
    else:
        params = SolverParams(epsilon=cfg.epsilon, delta=cfg.delta, alpha_mode=cfg.alpha_mode,
                              max_rounds=cfg.max_rounds)
        resolved = params.resolve(g)
        x, _ = solve(FdsInstance(graph=g, delta=resolved.delta), params)

    node_success = np.zeros(g.n, dtype=int)
    all_nodes_ok = 0
    for trial in range(cfg.trials):
        store = disseminate(g, x, cfg.m, seed=cfg.seed + trial)
        ok = True
        for node in range(g.n):
            res = try_recover(store, g, node)
            node_success[node] += int(res.success)
            ok = ok and res.success
        all_nodes_ok += int(ok)

    report = {
        "n": g.n,
        "m": cfg.m,
        "trials": cfg.trials,
        "per_node_success_rate": (node_success / cfg.trials).tolist(),
        "overall_success_rate": float(node_success.sum() / (cfg.trials * g.n)),
        "all_nodes_success_rate": all_nodes_ok / cfg.trials,
    }
    _write_atomic(out / "recovery.json", json.dumps(report, indent=2) + "\n")
    print(f"overall success rate: {report['overall_success_rate']:.4f} "
          f"(all nodes per trial: {report['all_nodes_success_rate']:.4f})")
    return report


def show_bounds(cfg: ExperimentConfig) -> dict:
    g = _load_graph(cfg)
    lo, hi = optimum_bounds(g)
    rows = {eps: iterations_for_epsilon(g.d_max, eps) for eps in (1.0, 0.1, 0.01)}
    print(f"N = {g.n}, d_min = {g.d_min}, d_max = {g.d_max}")
    print(f"optimum bounds: [{lo:.6g}, {hi:.6g}]")
    for eps, k in rows.items():
        print(f"K_eps(epsilon={eps:g}) = {k}")
    return {"n": g.n, "d_min": g.d_min, "d_max": g.d_max,
            "optimum_bounds": [lo, hi], "k_epsilon": {str(e): k for e, k in rows.items()}}


# -- argument handling -------------------------------------------------------

_DEFAULTS = dict(
    seed=0, epsilon=0.1, delta=None, alpha_mode="dmax", ell=1, max_rounds=None,
    oracle=False, out_dir=None, plot=False, m=64, trials=100, allocation_file=None,
)


def _add_common(p: argparse.ArgumentParser, with_solver=True):
    src = p.add_argument_group("graph source (choose one)")
    src.add_argument("--graph", dest="graph_file", metavar="FILE",
                     help="edge-list file: first line N, then one 'i j' per line")
    src.add_argument("--geometric", nargs=2, metavar=("N", "RADIUS"),
                     help="random geometric graph on the unit square")
    p.add_argument("--seed", type=int, help="placement / trial base seed (default 0)")
    p.add_argument("--ell", type=int, help="hop count for data access (default 1)")
    p.add_argument("--config", metavar="FILE",
                   help="JSON config; flags override it, it overrides defaults")
    if with_solver:
        p.add_argument("--epsilon", type=float, help="target approximation slack (default 0.1)")
        p.add_argument("--delta", type=float, help="regularization override (default: epsilon)")
        p.add_argument("--alpha-mode", choices=["dmax", "n-substitute"],
                       help="step-size rule: known d_max, or N as its upper bound")
        p.add_argument("--max-rounds", type=int,
                       help="last round index to execute (default: epsilon budget)")
    p.add_argument("--out-dir", help="output directory (default: $FDS_OUT_DIR or .)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fdsalloc",
        description="Coverage storage allocation: distributed solver, exact oracle, recovery checks.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the distributed solver, emit trace + summary")
    _add_common(p_run)
    p_run.add_argument("--oracle", action=argparse.BooleanOptionalAction,
                       help="also solve exactly and report relative errors")
    p_run.add_argument("--plot", action=argparse.BooleanOptionalAction,
                       help="write a convergence plot (needs --oracle)")
    p_run.set_defaults(func=run_experiment)

    p_ver = sub.add_parser("verify-recovery", help="Monte-Carlo rank check of an allocation")
    _add_common(p_ver)
    p_ver.add_argument("--m", type=int, help="number of object parts (default 64)")
    p_ver.add_argument("--trials", type=int, help="number of seeded trials (default 100)")
    p_ver.add_argument("--allocation", dest="allocation_file", metavar="FILE",
                       help="JSON allocation vector; omitted: solve inline")
    p_ver.set_defaults(func=verify_recovery)

    p_b = sub.add_parser("bounds", help="print degree stats, optimum bounds, round budgets")
    _add_common(p_b, with_solver=False)
    p_b.set_defaults(func=show_bounds)

    return ap


def _merge_config(args: argparse.Namespace) -> ExperimentConfig:
    merged = dict(_DEFAULTS)
    if getattr(args, "config", None):
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise CliError(EXIT_GRAPH, f"cannot read config: {exc}") from exc
        unknown = set(file_cfg) - set(_DEFAULTS) - {"graph_file", "geometric", "epsilon"}
        if unknown:
            raise CliError(EXIT_GRAPH, f"unknown config keys: {sorted(unknown)}")
        merged.update(file_cfg)
    for key, value in vars(args).items():
        if key in ("func", "command", "config") or value is None:
            continue
        merged[key] = value
    if merged.get("geometric") is not None:
        n, radius = merged["geometric"]
        merged["geometric"] = (int(n), float(radius))
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    merged = {k: v for k, v in merged.items() if k in known}
    try:
        return ExperimentConfig(**merged)
    except ValueError as exc:
        raise CliError(EXIT_GRAPH, str(exc)) from exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _merge_config(args)
        if getattr(args, "plot", None) and not cfg.oracle:
            raise CliError(EXIT_GRAPH, "--plot requires --oracle (it plots relative error)")
        args.func(cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
