"""Run configuration: JSON document validated against ``config.schema.json``."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .errors import ConfigError, DomainError, ModelInvalidError
from .kernels import DelayKernel, DeterministicDelay, PiecewiseErlangMixture, PiecewiseExponential
from .model import ClaimLaw, Deterministic, ErlangMixture, Exponential, RiskModel
from .quadrature import QuadratureSpec

__all__ = ["RunConfig", "load_config", "parse_config", "schema"]


def schema() -> dict:
    text = resources.files("parisian").joinpath("config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


@dataclass(frozen=True)
class RunConfig:
    model: RiskModel
    kernel: DelayKernel
    task: dict
    quadrature: QuadratureSpec
    sim: dict
    output: dict
    config_hash: str
    raw: dict


def _where(path) -> str:
    parts = [str(p) for p in path]
    return "/".join(parts) if parts else "<root>"


def _claims(spec: dict) -> ClaimLaw:
    kind = spec["type"]
    if kind == "exponential":
        return Exponential(spec["alpha"])
    if kind == "erlang_mixture":
        return ErlangMixture(tuple(spec["weights"]), tuple(spec["shapes"]), tuple(spec["rates"]))
    return Deterministic(spec["size"])


def _kernel(spec: dict) -> DelayKernel:
    kind = spec["type"]
    if kind == "piecewise_exponential":
        return PiecewiseExponential(tuple(spec.get("breakpoints", ())), tuple(spec["rates"]))
    if kind == "piecewise_erlang_mixture":
        cells = tuple(tuple((c["weight"], c["shape"], c["rate"]) for c in cell) for cell in spec["cells"])
        return PiecewiseErlangMixture(tuple(spec.get("breakpoints", ())), cells)
    return DeterministicDelay(spec["delay"])


def _as_list(value) -> list[float]:
    return [float(v) for v in (value if isinstance(value, list) else [value])]


def _task(task: dict) -> dict:
    out = dict(task)
    out["u"] = _as_list(task.get("u", 0.0))
    out["q"] = _as_list(task.get("q", 0.0))
    out.setdefault("b", None)
    out.setdefault("v", 0.0)
    out.setdefault("w", 0.0)
    out.setdefault("route", "auto")
    out.setdefault("target", "ruin-prob")
    out.setdefault("beta_offsets", [0.5, 1.0, 2.0])
    grid = task.get("x_grid", {"start": -1.0, "stop": 5.0, "num": 13})
    if isinstance(grid, dict):
        if grid["stop"] < grid["start"]:
            raise ConfigError("task/x_grid: stop must not be below start")
        out["x_grid"] = np.linspace(grid["start"], grid["stop"], grid["num"]).tolist()
    else:
        out["x_grid"] = [float(x) for x in grid]
    b = out["b"] = None if out["b"] is None else float(out["b"])
    if b is not None:
        for i, u in enumerate(out["u"]):
            if u > b:
                raise ConfigError(f"task/u/{i}: u={u} exceeds b={b}")
    return out


def parse_config(raw_bytes: bytes) -> RunConfig:
    """Validate and build a :class:`RunConfig` from the raw document bytes."""
    try:
        raw = json.loads(raw_bytes.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config is not UTF-8: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{_where(e.absolute_path)}: {e.message}" for e in errors]
        raise ConfigError("config failed validation:\n  " + "\n  ".join(lines))

    try:
        claims = _claims(raw["model"]["claims"])
        model = RiskModel(raw["model"]["c"], raw["model"]["lambda"], claims)
    except (ModelInvalidError, DomainError) as exc:
        raise ConfigError(f"model: {exc}") from exc
    try:
        kernel = _kernel(raw["kernel"])
    except DomainError as exc:
        raise ConfigError(f"kernel: {exc}") from exc
    try:
        quadrature = QuadratureSpec(**raw.get("numerics", {}))
    except ValueError as exc:
        raise ConfigError(f"numerics: {exc}") from exc
    task = _task(raw.get("task", {}))
    return RunConfig(
        model=model,
        kernel=kernel,
        task=task,
        quadrature=quadrature,
        sim=dict(raw.get("sim", {})),
        output=dict(raw.get("output", {})),
        config_hash=hashlib.sha256(raw_bytes).hexdigest()[:16],
        raw=raw,
    )


def load_config(path: str | Path) -> RunConfig:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(data)


def to_jsonable(value: Any):
    """Floats that JSON can carry (infinities as strings)."""
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value
