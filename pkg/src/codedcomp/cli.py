"""Command-line surface: evaluate sweeps, solve assignments, design
rateless codes, and estimate deadline-miss probabilities.

Every output table carries an audit header (config hash, seed, library
version) and a fixed column order, so a rerun with the same seed produces
a byte-identical file.  Exit codes: 0 success, 2 configuration error,
3 budget exceeded, 4 infeasible design.
"""

from __future__ import annotations

import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import (ExperimentConfig, build_params, build_scheme_spec,
                     load_config, sweep_points, validate_sweep)
from .errors import (BudgetExceeded, CodedCompError, ConfigError,
                     InfeasibleDesign)
from .lt import design_code
from .params import PartitionedParams
from .schemes import (SchemeSpec, evaluate, evaluate_alt_runtime,
                      gamma_tail_fit, sample_delays, scheme_profile,
                      wilson_interval)
from .solvers import solve as run_solver

EVAL_COLUMNS = ["scheme", "sweep_axis", "sweep_value", "L", "D_encode",
                "D_map", "D_reduce", "D", "g_mean", "L_over_uncoded",
                "D_over_uncoded"]
DEADLINE_COLUMNS = ["scheme", "t", "miss_probability", "ci_low", "ci_high",
                    "trials"]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _audit_lines(cfg: ExperimentConfig) -> list[str]:
    return [
        f"# generator: codedcomp {__version__}",
        f"# config-sha256: {cfg.sha256()}",
        f"# seed: {cfg.seed}",
    ]


def _write_table(rows: list[dict], columns: list[str], cfg: ExperimentConfig,
                 out: str | None, fmt: str) -> None:
    if fmt == "csv":
        lines = _audit_lines(cfg)
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(_fmt(row.get(c)) for c in columns))
        text = "\n".join(lines) + "\n"
        if out:
            Path(out).write_text(text, encoding="utf-8")
        else:
            click.echo(text, nl=False)
    else:
        payload = {
            "audit": {"generator": f"codedcomp {__version__}",
                      "config_sha256": cfg.sha256(), "seed": cfg.seed},
            "rows": [{c: row.get(c) for c in columns} for row in rows],
        }
        text = json.dumps(payload, indent=2, sort_keys=True, default=float) + "\n"
        if out:
            Path(out).write_text(text, encoding="utf-8")
        else:
            click.echo(text, nl=False)


def _point_rng(seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *path]))


def _evaluate_point(payload) -> list[dict]:
    """One sweep point: every configured scheme plus the uncoded baseline."""
    cfg, axis, value, index = payload
    params_over = {axis: value} if axis in ("K", "n") else {}
    p = build_params(cfg.params, **params_over)
    omega = value if axis == "omega" else cfg.omega

    def run(spec: SchemeSpec, rng):
        if omega is not None:
            return evaluate_alt_runtime(spec, p, float(omega), rng)
        return evaluate(spec, p, rng)

    baseline = run(SchemeSpec(kind="uncoded"), _point_rng(cfg.seed, index, 9999))
    rows = []
    for si, scheme in enumerate(cfg.schemes):
        over = {}
        if axis == "T" and scheme["kind"] == "bdc":
            over["T"] = value
        if axis == "epsilon_min" and scheme["kind"] in ("lt", "bdc_lt"):
            over["epsilon_min"] = value
        if axis == "pf_target" and scheme["kind"] in ("lt", "bdc_lt"):
            over["pf_target"] = value
        spec = build_scheme_spec(scheme, cfg, **over)
        metrics = run(spec, _point_rng(cfg.seed, index, si))
        rows.append({
            "scheme": spec.label(),
            "sweep_axis": axis,
            "sweep_value": value,
            "L": float(metrics.L),
            "D_encode": float(metrics.D_encode),
            "D_map": float(metrics.D_map),
            "D_reduce": float(metrics.D_reduce),
            "D": float(metrics.D),
            "g_mean": float(metrics.g_mean),
            "L_over_uncoded": float(metrics.L) / float(baseline.L),
            "D_over_uncoded": float(metrics.D) / float(baseline.D),
        })
    return rows


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Coded computing schemes: load/delay evaluation and design tools."""


def _common_options(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(exists=False), help="JSON experiment config")(fn)
    fn = click.option("--seed", type=int, default=None, help="override the config seed")(fn)
    fn = click.option("--out", "out_path", type=click.Path(), default=None,
                      help="output path (stdout when omitted)")(fn)
    fn = click.option("--format", "out_format", type=click.Choice(["csv", "json"]),
                      default=None, help="output format")(fn)
    fn = click.option("--threads", type=int, default=1, show_default=True,
                      help="worker processes for sweep points")(fn)
    fn = click.option("--sample-budget", type=int, default=None,
                      help="override the sampled-mode budget")(fn)
    fn = click.option("--set", "param_sets", multiple=True, metavar="KEY=VALUE",
                      help="override a params field, e.g. --set K=9 --set eta=1/3")(fn)
    fn = click.option("--plot/--no-plot", "do_plot", default=True, show_default=True,
                      help="render figures next to the output file")(fn)
    return fn


def _load(config_path, seed, out_path, out_format, sample_budget,
          param_sets=()) -> ExperimentConfig:
    cfg = load_config(config_path)
    if seed is not None:
        cfg.seed = seed
    if out_path is not None:
        cfg.out_path = out_path
    if out_format is not None:
        cfg.out_format = out_format
    if sample_budget is not None:
        cfg.budgets["sample_budget"] = sample_budget
    for assignment in param_sets:
        key, _, raw = assignment.partition("=")
        if not raw:
            raise ConfigError(f"--set expects KEY=VALUE (got {assignment!r})")
        if key == "eta":
            cfg.params[key] = raw
        elif key in ("K", "q", "m", "n", "N", "field_bits"):
            cfg.params[key] = int(raw)
        elif key in ("sigma_a", "sigma_m"):
            cfg.params[key] = float(raw)
        else:
            raise ConfigError(f"--set does not know the params field {key!r}")
    return cfg


def _guarded(fn):
    try:
        fn()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except BudgetExceeded as exc:
        click.echo(f"budget exceeded: {exc}", err=True)
        sys.exit(3)
    except InfeasibleDesign as exc:
        click.echo(f"infeasible design: {exc}", err=True)
        sys.exit(4)
    except CodedCompError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@main.command("evaluate")
@_common_options
def cmd_evaluate(config_path, seed, out_path, out_format, threads,
                 sample_budget, param_sets, do_plot) -> None:
    """Evaluate the configured schemes, optionally along a sweep axis."""

    def body():
        cfg = _load(config_path, seed, out_path, out_format, sample_budget, param_sets)
        if cfg.sweep_axis == "t":
            raise ConfigError("sweep axis 't' belongs to the deadline command")
        validate_sweep(cfg)
        points = sweep_points(cfg)
        payloads = [(cfg, axis, value, i) for i, (axis, value) in enumerate(points)]
        if threads > 1 and len(payloads) > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(_evaluate_point, payloads))
        else:
            results = [_evaluate_point(pl) for pl in payloads]
        rows = [row for chunk in results for row in chunk]
        _write_table(rows, EVAL_COLUMNS, cfg, cfg.out_path, cfg.out_format)
        if do_plot and cfg.out_path:
            from .plots import render_sweep
            render_sweep(rows, cfg.sweep_axis, Path(cfg.out_path).with_suffix(".png"))

    _guarded(body)


@main.command("solve")
@_common_options
@click.option("--t", "T", type=int, default=None, help="partition count")
@click.option("--solver", type=click.Choice(["theorem1", "heuristic", "bnb", "hybrid"]),
              default=None)
@click.option("--node-budget", type=int, default=None)
@click.option("--cell-budget", type=int, default=None)
@click.option("--unassign-count", type=int, default=None)
@click.option("--improvement-threshold", type=float, default=None)
@click.option("--max-iterations", type=int, default=None)
def cmd_solve(config_path, seed, out_path, out_format, threads, sample_budget,
              param_sets, do_plot, T, solver, node_budget, cell_budget,
              unassign_count, improvement_threshold, max_iterations) -> None:
    """Find an assignment matrix and write it as CSV plus a summary."""

    def body():
        cfg = _load(config_path, seed, out_path, out_format, sample_budget, param_sets)
        p = build_params(cfg.params)
        section = dict(cfg.solve)
        chosen_T = T if T is not None else section.get("T")
        if chosen_T is None:
            raise ConfigError("missing field 'solve.T' (or pass --t)")
        chosen_solver = solver or section.get("solver", "heuristic")
        try:
            pp = PartitionedParams(p, int(chosen_T))
        except CodedCompError as exc:
            raise ConfigError(f"invalid solve.T: {exc}") from exc
        kwargs = {}
        if chosen_solver == "bnb":
            if node_budget or section.get("node_budget"):
                kwargs["node_budget"] = node_budget or section.get("node_budget")
            if cell_budget or section.get("cell_budget"):
                kwargs["cell_budget"] = cell_budget or section.get("cell_budget")
        if chosen_solver == "hybrid":
            uc = unassign_count or section.get("unassign_count")
            if uc:
                kwargs["unassign_count"] = int(uc)
            thr = improvement_threshold if improvement_threshold is not None \
                else section.get("improvement_threshold")
            if thr is not None:
                kwargs["improvement_threshold"] = float(thr)
            mi = max_iterations or section.get("max_iterations")
            if mi:
                kwargs["max_iterations"] = int(mi)
        rng = _point_rng(cfg.seed, 0)
        start = time.perf_counter()
        result = run_solver(pp, chosen_solver, rng=rng, **kwargs)
        elapsed = time.perf_counter() - start
        out = cfg.out_path or "assignment.csv"
        result.assignment.to_csv(out)
        summary = {
            "solver": chosen_solver,
            "T": pp.T,
            "objective": float(result.objective),
            "objective_exact": str(result.objective),
            "nodes_explored": result.nodes,
            "wall_time_s": elapsed,
            "trace": [float(x) for x in result.trace],
            "config_sha256": cfg.sha256(),
            "seed": cfg.seed,
        }
        Path(str(out) + ".summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        click.echo(f"objective {float(result.objective):.6f} written to {out}")

    _guarded(body)


@main.command("design-lt")
@_common_options
@click.option("--m", "m_sym", type=int, default=None, help="input symbols")
@click.option("--epsilon-min", type=float, default=None)
@click.option("--pf-target", type=float, default=None)
@click.option("--simulate-g", "g_trials", type=int, default=None,
              help="also simulate the map-termination distribution on the "
                   "config's system parameters with this many trials")
def cmd_design_lt(config_path, seed, out_path, out_format, threads,
                  sample_budget, param_sets, do_plot, m_sym, epsilon_min,
                  pf_target, g_trials) -> None:
    """Search the (M, delta) pair meeting a target failure probability."""

    def body():
        cfg = _load(config_path, seed, out_path, out_format, sample_budget, param_sets)
        section = dict(cfg.design)
        m = m_sym if m_sym is not None else section.get("m")
        eps = epsilon_min if epsilon_min is not None else section.get("epsilon_min")
        pf = pf_target if pf_target is not None else section.get("pf_target")
        if m is None or eps is None or pf is None:
            raise ConfigError(
                "design needs 'design.m', 'design.epsilon_min', 'design.pf_target' "
                "(or the matching flags)"
            )
        design = design_code(int(m), float(eps), float(pf))
        artifact = {
            "audit": {"generator": f"codedcomp {__version__}",
                      "config_sha256": cfg.sha256(), "seed": cfg.seed},
            "m": design.m,
            "epsilon_min": design.epsilon_min,
            "pf_target": design.pf_target,
            "M": design.M,
            "delta": design.delta,
            "mean_degree": design.mean_degree,
            "bound_at_epsilon_min": design.bound_at_min,
        }
        if g_trials:
            from .lt import simulate_g_distribution
            p = build_params(cfg.params)
            if design.m != p.m:
                raise ConfigError(
                    f"--simulate-g needs design.m == params.m (got {design.m} vs {p.m})"
                )
            gd = simulate_g_distribution(p, design, _point_rng(cfg.seed, 1),
                                         trials=g_trials)
            artifact["g_distribution"] = {
                "values": gd.values.tolist(),
                "pmf": gd.pmf.tolist(),
                "mean_g": gd.mean_g,
                "mean_epsilon": gd.mean_epsilon,
                "trials": g_trials,
            }
        text = json.dumps(artifact, indent=2, sort_keys=True) + "\n"
        if cfg.out_path:
            Path(cfg.out_path).write_text(text, encoding="utf-8")
        else:
            click.echo(text, nl=False)

    _guarded(body)


@main.command("deadline")
@_common_options
@click.option("--trials", type=int, default=None, help="Monte Carlo trials per scheme")
@click.option("--extrapolate", is_flag=True, default=False,
              help="add a Gamma-fit tail extrapolation column (not a measurement)")
def cmd_deadline(config_path, seed, out_path, out_format, threads,
                 sample_budget, param_sets, do_plot, trials, extrapolate) -> None:
    """Tabulate P(delay > t) with 95% confidence intervals."""

    def body():
        cfg = _load(config_path, seed, out_path, out_format, sample_budget, param_sets)
        section = dict(cfg.deadline)
        if cfg.sweep_axis == "t":
            t_values = list(cfg.sweep_values)
        else:
            t_values = section.get("t_values")
        if not t_values:
            raise ConfigError("deadline needs 'deadline.t_values' or a sweep over 't'")
        n_trials = trials or int(section.get("trials", 100_000))
        if not cfg.schemes:
            raise ConfigError("field 'schemes' must list at least one scheme")
        p = build_params(cfg.params)
        rows = []
        columns = list(DEADLINE_COLUMNS)
        if extrapolate:
            columns.append("miss_probability_gamma_fit")
        for si, scheme in enumerate(cfg.schemes):
            spec = build_scheme_spec(scheme, cfg)
            rng = _point_rng(cfg.seed, si)
            profile = scheme_profile(spec, p, rng)
            delays = sample_delays(spec, p, rng, n_trials, omega=cfg.omega,
                                   profile=profile)
            fit = gamma_tail_fit(delays) if extrapolate else None
            for t in t_values:
                misses = int((delays > float(t)).sum())
                lo, hi = wilson_interval(misses, n_trials)
                row = {
                    "scheme": spec.label(), "t": float(t),
                    "miss_probability": misses / n_trials,
                    "ci_low": lo, "ci_high": hi, "trials": n_trials,
                }
                if fit is not None:
                    row["miss_probability_gamma_fit"] = float(fit(float(t)))
                rows.append(row)
        _write_table(rows, columns, cfg, cfg.out_path, cfg.out_format)
        if do_plot and cfg.out_path:
            from .plots import render_deadline
            render_deadline(rows, Path(cfg.out_path).with_suffix(".png"))

    _guarded(body)


if __name__ == "__main__":
    main()
