"""Experiment configuration: JSON schema, validation, and sweep expansion.

A configuration names a parameter block, the schemes to evaluate, an
optional sweep axis, sampling budgets, a seed, and an output target.
Every swept value is validated before any evaluation starts, so a bad
point fails the run immediately with the offending field named.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from fractions import Fraction
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .params import SystemParams, derive
from .schemes import SchemeSpec

SWEEP_AXES = ("T", "K", "n", "epsilon_min", "pf_target", "omega", "t")
SCHEME_KINDS = ("uncoded", "cmr", "sc", "unified", "bdc", "lt", "bdc_lt")


@dataclass
class ExperimentConfig:
    params: dict[str, Any]
    schemes: list[dict[str, Any]]
    sweep_axis: str | None = None
    sweep_values: list = field(default_factory=list)
    budgets: dict[str, int] = field(default_factory=dict)
    lt_defaults: dict[str, float] = field(default_factory=dict)
    solve: dict[str, Any] = field(default_factory=dict)
    design: dict[str, Any] = field(default_factory=dict)
    deadline: dict[str, Any] = field(default_factory=dict)
    omega: float | None = None
    seed: int = 0
    out_path: str | None = None
    out_format: str = "csv"

    def sha256(self) -> str:
        """Hash of the experiment identity: everything except where the
        results get written."""
        payload = asdict(self)
        payload.pop("out_path", None)
        payload.pop("out_format", None)
        blob = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


def _require(mapping: dict, key: str, section: str):
    if key not in mapping:
        raise ConfigError(f"missing required field '{section}.{key}'")
    return mapping[key]


def _int_field(mapping: dict, key: str, section: str, default=None) -> int:
    if key not in mapping:
        if default is None:
            raise ConfigError(f"missing required field '{section}.{key}'")
        return default
    v = mapping[key]
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"field '{section}.{key}' must be an integer (got {v!r})")
    return v


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config(raw)


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    params = _require(raw, "params", "config")
    if not isinstance(params, dict):
        raise ConfigError("field 'params' must be an object")

    schemes = raw.get("schemes", [])
    if not isinstance(schemes, list):
        raise ConfigError("field 'schemes' must be a list")
    for i, s in enumerate(schemes):
        if not isinstance(s, dict) or "kind" not in s:
            raise ConfigError(f"field 'schemes[{i}]' must be an object with a 'kind'")
        if s["kind"] not in SCHEME_KINDS:
            raise ConfigError(
                f"field 'schemes[{i}].kind' must be one of {SCHEME_KINDS} (got {s['kind']!r})"
            )

    sweep = raw.get("sweep")
    axis, values = None, []
    if sweep is not None:
        if not isinstance(sweep, dict):
            raise ConfigError("field 'sweep' must be an object")
        axis = _require(sweep, "axis", "sweep")
        if axis not in SWEEP_AXES:
            raise ConfigError(f"field 'sweep.axis' must be one of {SWEEP_AXES}")
        values = _require(sweep, "values", "sweep")
        if not isinstance(values, list) or not values:
            raise ConfigError("field 'sweep.values' must be a non-empty list")

    output = raw.get("output", {})
    fmt = output.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"field 'output.format' must be csv or json (got {fmt!r})")

    cfg = ExperimentConfig(
        params=params,
        schemes=schemes,
        sweep_axis=axis,
        sweep_values=values,
        budgets=raw.get("budgets", {}),
        lt_defaults=raw.get("lt", {}),
        solve=raw.get("solve", {}),
        design=raw.get("design", {}),
        deadline=raw.get("deadline", {}),
        omega=raw.get("omega"),
        seed=_int_field(raw, "seed", "config", default=0),
        out_path=output.get("path"),
        out_format=fmt,
    )
    return cfg


def build_params(cfg_params: dict, **overrides) -> SystemParams:
    """Derive validated SystemParams from the config's params block."""
    merged = dict(cfg_params)
    merged.update(overrides)
    try:
        eta = merged["eta"]
    except KeyError:
        raise ConfigError("missing required field 'params.eta'") from None
    if isinstance(eta, float):
        raise ConfigError(
            "field 'params.eta' must be exact: use a string like \"1/3\" or [num, den]"
        )
    if isinstance(eta, list):
        eta = tuple(eta)
    kwargs = {}
    for key in ("K", "q", "m", "n", "N"):
        kwargs[key] = _int_field(merged, key, "params")
    for key in ("sigma_a", "sigma_m"):
        if merged.get(key) is not None:
            kwargs[key] = float(merged[key])
    if merged.get("field_bits") is not None:
        kwargs["field_bits"] = _int_field(merged, "field_bits", "params")
    try:
        return derive(eta=Fraction(*eta) if isinstance(eta, tuple) else Fraction(eta),
                      **kwargs)
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise ConfigError(f"invalid params: {exc}") from exc


def build_scheme_spec(scheme: dict, cfg: ExperimentConfig, **overrides) -> SchemeSpec:
    merged = dict(scheme)
    merged.update(overrides)
    kind = merged["kind"]
    budgets = cfg.budgets
    return SchemeSpec(
        kind=kind,
        T=merged.get("T"),
        solver=merged.get("solver", "auto"),
        epsilon_min=float(merged.get("epsilon_min",
                                     cfg.lt_defaults.get("epsilon_min", 0.3))),
        pf_target=float(merged.get("pf_target",
                                   cfg.lt_defaults.get("pf_target", 0.1))),
        exhaustive_limit=int(budgets.get("exhaustive_limit", 200_000)),
        n_samples=int(budgets.get("sample_budget", 1000)),
        g_trials=int(budgets.get("g_trials", 10_000)),
        decode_trials=int(budgets.get("decode_trials", 10)),
    )


def sweep_points(cfg: ExperimentConfig) -> list[tuple]:
    """(axis, value) pairs, or a single (None, None) when there is no sweep."""
    if cfg.sweep_axis is None:
        return [(None, None)]
    return [(cfg.sweep_axis, v) for v in cfg.sweep_values]


def validate_sweep(cfg: ExperimentConfig) -> None:
    """Fail fast: every sweep point must produce valid parameters/specs."""
    if not cfg.schemes:
        raise ConfigError("field 'schemes' must list at least one scheme")
    for axis, value in sweep_points(cfg):
        params_over = {}
        if axis in ("K", "n"):
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"sweep value {value!r} for axis {axis} must be an integer")
            params_over[axis] = value
        p = build_params(cfg.params, **params_over)
        if axis == "T":
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"sweep value {value!r} for axis T must be a positive integer")
            if p.m % value or p.r % value:
                raise ConfigError(
                    f"sweep value T={value} must divide m={p.m} and r={p.r}"
                )
        if axis in ("epsilon_min", "pf_target", "omega", "t"):
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
                raise ConfigError(
                    f"sweep value {value!r} for axis {axis} must be a non-negative number"
                )
