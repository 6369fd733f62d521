"""Flat ``key=value`` run configuration, default presets and trace output.

Example::

    method=marina
    dataset=synthetic:mushrooms
    dataset.rows=500
    l1_radius=20
    K=400
    compressor.kind=rand_k
    compressor.k=2
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, fields, replace

from .core import DISTRIBUTED_METHODS, METHODS, ValidationError
from .datasets import resolve
from .objective import Dataset, LogisticObjective
from .sets import L1Ball

# config key -> RunConfig attribute
KEYS = {
    "method": "method",
    "dataset": "dataset",
    "dataset.rows": "dataset_rows",
    "l1_radius": "l1_radius",
    "schedule": "schedule",
    "eta": "eta",
    "K": "K",
    "seed": "seed",
    "p": "p",
    "b": "b",
    "tau": "tau",
    "compressor.kind": "compressor_kind",
    "compressor.k": "compressor_k",
    "n_workers": "n_workers",
    "alpha": "alpha",
    "inner_batch": "inner_batch",
    "partition": "partition",
    "output": "output",
    "log_every": "log_every",
    "timing": "timing",
    "variant": "variant",
    "saga_sarah.table": "saga_sarah_table",
    "pplsvrg.anchor": "pplsvrg_anchor",
}

_COMMON = {"method", "dataset", "dataset.rows", "l1_radius", "schedule", "eta", "K", "seed",
           "output", "log_every", "timing"}
_DIST = {"n_workers", "partition", "compressor.kind", "compressor.k"}
METHOD_KEYS = {
    "deterministic": set(),
    "lsvrg": {"p", "b"},
    "sarah": {"p", "b"},
    "saga": {"b", "variant"},
    "saga_sarah": {"b", "saga_sarah.table"},
    "sega": {"variant"},
    "jaguar": set(),
    "zoja": {"tau"},
    "diana": _DIST | {"alpha"},
    "marina": _DIST | {"p"},
    "vr_marina": _DIST | {"p", "inner_batch"},
    "ef21": _DIST,
    "qlsvrg": _DIST | {"p"},
    "pplsvrg": {"n_workers", "partition", "p", "pplsvrg.anchor"},
}

_INT = {"dataset_rows", "K", "seed", "b", "compressor_k", "n_workers", "inner_batch", "log_every"}
_FLOAT = {"l1_radius", "eta", "p", "tau", "alpha"}
_BOOL = {"timing"}

DEFAULT_RADIUS = 2000.0
DEFAULT_TAU = 1e-6
DEFAULT_WORKERS = 4


@dataclass(frozen=True)
class RunConfig:
    method: str
    dataset: str
    dataset_rows: int | None = None
    l1_radius: float = DEFAULT_RADIUS
    schedule: str = "convex"
    eta: float | None = None
    K: int = 1000
    seed: int = 0
    p: float | None = None
    b: int | None = None
    tau: float | None = None
    compressor_kind: str | None = None
    compressor_k: int | None = None
    n_workers: int | None = None
    alpha: float | None = None
    inner_batch: int | None = None
    partition: str | None = None
    output: str = "trace.csv"
    log_every: int | None = None
    timing: bool = False
    variant: str | None = None
    saga_sarah_table: str | None = None
    pplsvrg_anchor: str | None = None
    data: Dataset | None = field(default=None, compare=False, repr=False)

    def estimator_params(self) -> dict:
        m = self.method
        prm = {}
        if m in ("lsvrg", "sarah", "marina", "vr_marina", "qlsvrg", "pplsvrg"):
            prm["p"] = self.p
        if m in ("lsvrg", "sarah", "saga", "saga_sarah"):
            prm["b"] = self.b
        if m in ("saga", "sega"):
            prm["variant"] = self.variant
        if m == "saga_sarah":
            prm["table"] = self.saga_sarah_table
        if m == "zoja":
            prm["tau"] = self.tau
        if m in DISTRIBUTED_METHODS:
            prm["n_workers"] = self.n_workers
            prm["partition"] = self.partition
            prm["partition_seed"] = self.seed
            if m != "pplsvrg":
                prm["compressor"] = self.compressor_kind
                prm["k"] = self.compressor_k
        if m == "diana":
            prm["alpha"] = self.alpha
        if m == "vr_marina":
            prm["inner_batch"] = self.inner_batch
        if m == "pplsvrg":
            prm["anchor"] = self.pplsvrg_anchor
        return prm


def _convert(attr: str, raw: str):
    try:
        if attr in _INT:
            v = float(raw)
            if not v.is_integer():
                raise ValueError
            return int(v)
        if attr in _FLOAT:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if attr in _BOOL:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return low in ("true", "1", "yes")
    except ValueError:
        raise ValidationError(f"{attr}: cannot parse {raw!r}") from None
    return raw


def parse_config_text(text: str) -> dict:
    """``{config key: raw string}``; rejects unknown and repeated keys."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ValidationError(f"line {lineno}: expected key=value")
        if key not in KEYS:
            raise ValidationError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ValidationError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(source, overrides: dict | None = None, dataset: Dataset | None = None) -> RunConfig:
    """Parse, apply presets and validate a config.

    ``source`` is a path or the config text itself (anything containing a
    newline or ``=``). ``overrides`` maps RunConfig attributes to values and
    wins over the file. ``dataset`` skips loading when the caller already
    holds the data.
    """
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    elif isinstance(source, str) and ("=" in source or "\n" in source or source == ""):
        text = source
    else:
        raise ValidationError(f"config file not found: {source}")
    raw = parse_config_text(text)
    for req in ("method", "dataset"):
        if req not in raw:
            raise ValidationError(f"missing required key {req!r}")
    method = raw["method"].lower().replace("-", "_")
    if method not in METHODS:
        raise ValidationError(f"unknown method {raw['method']!r}")
    extra = set(raw) - _COMMON - METHOD_KEYS[method]
    if extra:
        raise ValidationError(f"key(s) not used by {method}: {', '.join(sorted(extra))}")
    values = {KEYS[k]: _convert(KEYS[k], v) for k, v in raw.items()}
    values["method"] = method
    values.update(overrides or {})
    cfg = RunConfig(**values)
    return apply_defaults(cfg, dataset)


def apply_defaults(cfg: RunConfig, dataset: Dataset | None = None) -> RunConfig:
    """Fill unset parameters with the complexity-optimal presets and validate."""
    m = cfg.method
    if cfg.K < 0:
        raise ValidationError("K must be >= 0")
    if not (cfg.l1_radius > 0):
        raise ValidationError("l1_radius must be > 0")
    if cfg.schedule not in ("convex", "nonconvex", "fixed"):
        raise ValidationError(f"unknown schedule {cfg.schedule!r}")
    if cfg.schedule == "fixed" and (cfg.eta is None or not 0 < cfg.eta <= 1):
        raise ValidationError("schedule=fixed needs eta in (0, 1]")
    if cfg.schedule != "fixed" and cfg.eta is not None:
        raise ValidationError("eta is only used with schedule=fixed")
    if cfg.schedule == "nonconvex" and cfg.K < 1:
        raise ValidationError("schedule=nonconvex needs K >= 1")
    if cfg.log_every is not None and cfg.log_every < 1:
        raise ValidationError("log_every must be >= 1")

    data = dataset if dataset is not None else cfg.data
    if data is None:
        data = resolve(cfg.dataset, cfg.dataset_rows, seed=0)
    elif cfg.dataset_rows is not None and data.n_samples > cfg.dataset_rows:
        data = data.head(cfg.dataset_rows)
    n, dim = data.n_samples, data.dim
    upd: dict = {"data": data}
    if cfg.log_every is None:
        upd["log_every"] = max(1, cfg.K // 500)

    if m == "lsvrg":
        b = cfg.b if cfg.b is not None else min(n, math.ceil(n ** (2 / 3)))
        upd["b"] = b
        if cfg.p is None:
            upd["p"] = min(1.0, b ** 0.25 / math.sqrt(n))
    elif m == "sarah":
        b = cfg.b if cfg.b is not None else min(n, math.ceil(math.sqrt(n)))
        upd["b"] = b
        if cfg.p is None:
            upd["p"] = b / (n + b)
    elif m == "saga":
        if cfg.b is None:
            upd["b"] = min(n, math.ceil(n ** (2 / 3)))
    elif m == "saga_sarah":
        if cfg.b is None:
            upd["b"] = min(n, math.ceil(math.sqrt(n)))
    elif m == "zoja":
        if cfg.tau is None:
            upd["tau"] = DEFAULT_TAU
        elif cfg.tau <= 0:
            raise ValidationError("tau must be > 0")

    if m in DISTRIBUTED_METHODS:
        nw = cfg.n_workers if cfg.n_workers is not None else min(DEFAULT_WORKERS, n)
        if not 1 <= nw <= n:
            raise ValidationError(f"n_workers={nw} must be in [1, {n}]")
        upd["n_workers"] = nw
        upd["partition"] = cfg.partition or "contiguous"
        if upd["partition"] not in ("contiguous", "shuffled"):
            raise ValidationError(f"unknown partition {cfg.partition!r}")
        if m != "pplsvrg":
            kind = cfg.compressor_kind or ("top_k" if m == "ef21" else "rand_k")
            upd["compressor_kind"] = kind
            k = cfg.compressor_k
            if kind == "identity":
                k = dim
            elif k is None:
                k = max(1, dim // 10)
            if not 1 <= k <= dim:
                raise ValidationError(f"compressor.k={k} outside [1, {dim}]")
            upd["compressor_k"] = k
            if m == "marina" and cfg.p is None:
                upd["p"] = k / (dim + k)
            if m == "vr_marina":
                if cfg.p is None:
                    upd["p"] = k / (dim + k)
                if cfg.inner_batch is None:
                    m_min = n // nw
                    upd["inner_batch"] = max(1, math.ceil(math.sqrt(m_min)))
            if m == "qlsvrg" and cfg.p is None:
                upd["p"] = k / dim
        elif cfg.p is None:
            upd["p"] = 1.0 / (nw + 1)

    cfg = replace(cfg, **upd)
    # constructing the estimator performs the remaining range checks
    build(cfg)
    return cfg


def build(cfg: RunConfig):
    """``(objective, feasible set, estimator, schedule)`` for a resolved config."""
    from .driver import Schedule, make_estimator

    data = cfg.data if cfg.data is not None else resolve(cfg.dataset, cfg.dataset_rows)
    objective = LogisticObjective(data)
    fset = L1Ball(cfg.l1_radius, data.dim)
    est = make_estimator(cfg.method, objective, **cfg.estimator_params())
    schedule = Schedule.for_constants(cfg.schedule, cfg.K, est.constants(), cfg.eta)
    return objective, fset, est, schedule


def config_to_text(cfg: RunConfig) -> str:
    inv = {v: k for k, v in KEYS.items()}
    allowed = _COMMON | METHOD_KEYS[cfg.method]
    lines = []
    for f in fields(cfg):
        key = inv.get(f.name)
        val = getattr(cfg, f.name)
        if key is None or val is None or key not in allowed:
            continue
        if isinstance(val, bool):
            val = "true" if val else "false"
        elif isinstance(val, float):
            val = repr(val)
        lines.append(f"{key}={val}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------- CSV

def _fmt(v) -> str:
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    return format(float(v), ".17g")


def emit_csv(trace, path) -> None:
    """Write ``trace`` with 17 significant digits and LF line endings."""
    if len(trace) == 0:
        raise ValidationError("cannot write an empty trace")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(("iter", "f_value", "fw_gap", "grad_calls", "coord_calls", "bits_sent", "elapsed_ms")) + "\n")
        for r in trace.records:
            fh.write(",".join(_fmt(v) for v in (
                int(r.k), float(r.f_value), float(r.fw_gap), int(r.grad_calls),
                int(r.coord_calls), int(r.bits_sent), float(r.elapsed_ms),
            )) + "\n")


def read_csv(path) -> dict:
    """Columns of a trace CSV as lists (ints for counters, floats otherwise)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["iter", "f_value", "fw_gap", "grad_calls", "coord_calls", "bits_sent", "elapsed_ms"]
        if reader.fieldnames != expected:
            raise ValidationError(f"{path}: not a trace CSV (header {reader.fieldnames})")
        cols: dict = {k: [] for k in expected}
        for row in reader:
            for k in expected:
                v = row[k]
                cols[k].append(int(v) if k in ("iter", "grad_calls", "coord_calls", "bits_sent") else float(v))
    return cols
