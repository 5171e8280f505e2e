"""Experiment configuration: schema, defaults and loading.

A config is a JSON object.  ``seed`` is mandatory; everything else has a
default.  The model is given inline (``{"model": {"p": ..., "q": ...}}``) or
by file (``{"model_path": "m.json"}``).  ``load_config`` also accepts any
artifact written by the CLI, reading the config embedded in it.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import SchemaError
from .model import HmmModel, model_from_dict, read_model

MAX_SEED = 2**64 - 1
METHODS = ("regression", "tail-max")
MODES = ("rigorous", "empirical")
KINDS = ("delta", "delta_tilde")


@dataclass
class ExperimentConfig:
    seed: int
    model: dict | None = None
    model_path: str | None = None
    n_max: int = 400
    N_lyap: int = 1_000_000
    T: int = 10_000
    n_windows: int = 20
    triples: list | None = None
    tol: float = 0.05
    method: str = "regression"
    kind: str = "delta"
    r: int | None = None
    p0: float = 0.9
    p1: float = 0.2
    eps_grid: list = (0.02, 0.05, 0.1)
    steps: int = 1_000_000
    depth: int = 40
    mode: str = "empirical"
    output: str | None = None

    def __post_init__(self):
        self.eps_grid = list(self.eps_grid)
        validate(self)

    def load_model(self) -> HmmModel:
        if self.model is not None:
            return model_from_dict(self.model)
        if self.model_path is not None:
            return read_model(self.model_path)
        raise SchemaError("model", "no model given (inline 'model' or 'model_path')")

    def effective(self, model: HmmModel | None = None) -> dict:
        """Everything that determines the output: the output path is left out and a
        file-based model is inlined, so the result replays on its own."""
        d = asdict(self)
        d.pop("output")
        if model is not None:
            d["model"] = model.to_dict()
            d["model_path"] = None
        return d


_INT_FIELDS = ("n_max", "N_lyap", "T", "n_windows", "steps", "depth")


def _positive(name, v, kind):
    if isinstance(v, bool) or not isinstance(v, kind):
        raise SchemaError(name, f"expected {kind.__name__}, got {type(v).__name__}")
    if not v > 0:
        raise SchemaError(name, "must be positive")


def validate(cfg: ExperimentConfig):
    if isinstance(cfg.seed, bool) or not isinstance(cfg.seed, int) or not 0 <= cfg.seed <= MAX_SEED:
        raise SchemaError("seed", "must be an integer in [0, 2**64)")
    for name in _INT_FIELDS:
        _positive(name, getattr(cfg, name), int)
    if isinstance(cfg.tol, bool) or not isinstance(cfg.tol, (int, float)) or not cfg.tol > 0:
        raise SchemaError("tol", "must be a positive number")
    if cfg.n_max < 2:
        raise SchemaError("n_max", "must be at least 2")
    if cfg.r is not None:
        _positive("r", cfg.r, int)
    if cfg.method not in METHODS:
        raise SchemaError("method", f"must be one of {METHODS}")
    if cfg.mode not in MODES:
        raise SchemaError("mode", f"must be one of {MODES}")
    if cfg.kind not in KINDS:
        raise SchemaError("kind", f"must be one of {KINDS}")
    for name in ("p0", "p1"):
        v = getattr(cfg, name)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0 < v < 1:
            raise SchemaError(name, "must lie in (0, 1)")
    for i, e in enumerate(cfg.eps_grid):
        if isinstance(e, bool) or not isinstance(e, (int, float)) or not 0 <= e < 1:
            raise SchemaError(f"eps_grid[{i}]", "must lie in [0, 1)")
    if cfg.triples is not None:
        for i, t in enumerate(cfg.triples):
            if not (isinstance(t, (list, tuple)) and len(t) == 3
                    and all(isinstance(x, int) and x >= 1 for x in t)):
                raise SchemaError(f"triples[{i}]", "must be three positive integers")
    if cfg.model is not None and not isinstance(cfg.model, dict):
        raise SchemaError("model", "must be an object with keys p and q")


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise SchemaError("<root>", "config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    for key in d:
        if key not in known:
            raise SchemaError(key, "unknown key")
    if "seed" not in d:
        raise SchemaError("seed", "required (no implicit seeding)")
    return ExperimentConfig(**d)


def _embedded(text: str):
    """Config dict from a config file, a JSON artifact or a CSV artifact."""
    first = text.lstrip().splitlines()[0] if text.strip() else ""
    if first.startswith("# config:"):
        return json.loads(first[len("# config:"):])
    d = json.loads(text)
    if isinstance(d, dict) and "config" in d and isinstance(d["config"], dict):
        return d["config"]
    return d


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        d = _embedded(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("<root>", f"not valid JSON: {exc}") from None
    if isinstance(d, dict) and "command" in d:
        d = {k: v for k, v in d.items() if k != "command"}
    cfg = config_from_dict(d)
    if cfg.model_path is not None and not Path(cfg.model_path).is_absolute():
        cfg.model_path = str(Path(path).resolve().parent / cfg.model_path)
    return cfg
