"""The Frank-Wolfe loop, step-size schedules and convergence metrics."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import MethodConstants, RoundStreams, SFWError, ValidationError
from .distributed import DISTRIBUTED
from .estimators import ESTIMATORS, Estimator
from .objective import LogisticObjective
from .sets import L1Ball

SCHEDULE_MODES = ("convex", "nonconvex", "fixed")


def schedule_convex(k: int, K: int, rho1: float, rho2: float) -> float:
    """Constant ``1/d`` for the first half (or throughout when ``K <= d``), then ``2/(2d + k - k0)``."""
    if not (0 <= k < K):
        raise ValidationError(f"k={k} outside [0, {K})")
    d = 2.0 / min(rho1, rho2)
    k0 = math.ceil(K / 2)
    if K <= d or k < k0:
        return 1.0 / d
    return 2.0 / (2.0 * d + k - k0)


def schedule_nonconvex(K: int) -> float:
    if K < 1:
        raise ValidationError("K must be >= 1")
    return 1.0 / math.sqrt(K)


@dataclass(frozen=True)
class Schedule:
    mode: str
    K: int
    d: float = 2.0
    eta: float | None = None

    def __post_init__(self):
        if self.mode not in SCHEDULE_MODES:
            raise ValidationError(f"schedule must be one of {SCHEDULE_MODES}, got {self.mode!r}")
        if self.K < 0:
            raise ValidationError("K must be >= 0")
        if self.d < 2.0:
            raise ValidationError(f"schedule constant d={self.d} must be >= 2")
        if self.mode == "fixed":
            if self.eta is None or not (0.0 < self.eta <= 1.0):
                raise ValidationError(f"fixed schedule needs eta in (0, 1], got {self.eta}")

    @classmethod
    def for_constants(cls, mode: str, K: int, constants: MethodConstants, eta: float | None = None):
        return cls(mode, K, constants.d, eta)

    @property
    def k0(self) -> int:
        return math.ceil(self.K / 2)

    def __call__(self, k: int) -> float:
        if self.mode == "fixed":
            return float(self.eta)
        if self.mode == "nonconvex":
            return schedule_nonconvex(self.K)
        rho = 2.0 / self.d
        return schedule_convex(k, self.K, rho, rho)


def fw_step(x, g, eta: float, fset: L1Ball) -> np.ndarray:
    """``(1 - eta) x + eta * lmo(g)``."""
    if not (0.0 < eta <= 1.0):
        raise ValidationError(f"eta={eta} outside (0, 1]")
    s = fset.lmo(g)
    return (1.0 - eta) * np.asarray(x, dtype=np.float64) + eta * s


def fw_gap(x, objective: LogisticObjective, fset: L1Ball) -> float:
    """``max_{s in set} <grad f(x), x - s>`` with the exact gradient."""
    g = objective.full_gradient(x)
    return float(np.dot(g, x - fset.lmo(g)))


@dataclass(frozen=True)
class IterationRecord:
    k: int
    f_value: float
    fw_gap: float
    grad_calls: int
    coord_calls: int
    bits_sent: int
    elapsed_ms: float


CSV_FIELDS = ("iter", "f_value", "fw_gap", "grad_calls", "coord_calls", "bits_sent", "elapsed_ms")


@dataclass
class Trace:
    method: str = ""
    records: list = field(default_factory=list)
    f_star: float | None = None
    info: dict = field(default_factory=dict)

    def append(self, rec: IterationRecord):
        if self.records:
            prev = self.records[-1]
            if rec.k <= prev.k:
                raise SFWError("iteration index must increase")
            if (rec.grad_calls < prev.grad_calls or rec.coord_calls < prev.coord_calls
                    or rec.bits_sent < prev.bits_sent):
                raise SFWError("cost counters must not decrease")
        self.records.append(rec)

    def column(self, name: str) -> np.ndarray:
        attr = "k" if name == "iter" else name
        return np.array([getattr(r, attr) for r in self.records])

    @property
    def last(self) -> IterationRecord:
        return self.records[-1]

    def __len__(self):
        return len(self.records)

    def min_gap(self) -> float:
        return float(self.column("fw_gap").min())

    def suboptimality(self) -> np.ndarray:
        if self.f_star is None:
            raise SFWError("reference optimum not set")
        return self.column("f_value") - self.f_star


def run_fw(
    objective: LogisticObjective,
    estimator: Estimator,
    fset: L1Ball,
    schedule: Schedule,
    seed: int = 0,
    log_every: int = 1,
    x0=None,
    timing: bool = False,
    check_invariants: bool = False,
    callback: Callable | None = None,
) -> Trace:
    """Run ``schedule.K`` Frank-Wolfe steps driven by ``estimator``.

    Records are taken at ``k = 0``, every ``log_every`` steps and at ``K``.
    ``elapsed_ms`` is wall time when ``timing`` is set and 0 otherwise, so
    traces stay bitwise reproducible by default. ``callback(k, x, g)`` is
    invoked after every step.
    """
    if log_every < 1:
        raise ValidationError("log_every must be >= 1")
    K = schedule.K
    x = np.zeros(objective.dim) if x0 is None else np.array(x0, dtype=np.float64)
    if not fset.contains(x):
        raise ValidationError("starting point outside the feasible set")
    trace = Trace(method=estimator.method)
    t0 = time.perf_counter()

    def record(k):
        c = estimator.counters()
        ms = (time.perf_counter() - t0) * 1e3 if timing else 0.0
        trace.append(IterationRecord(
            k, objective.value(x), fw_gap(x, objective, fset),
            c["grad_calls"], c["coord_calls"], c["bits_sent"], ms,
        ))

    g = estimator.init(x)
    record(0)
    for k in range(K):
        x_next = fw_step(x, g, schedule(k), fset)
        if not fset.contains(x_next):
            raise SFWError(f"iterate left the feasible set at k={k + 1}")
        g = estimator.step(x_next, x, RoundStreams(seed, k))
        if not np.all(np.isfinite(g)):
            raise SFWError(f"non-finite gradient estimate at k={k + 1}")
        x = x_next
        if check_invariants:
            getattr(estimator, "check_invariants", lambda: None)()
        if callback is not None:
            callback(k + 1, x, g)
        if (k + 1) % log_every == 0 or k + 1 == K:
            record(k + 1)
    trace.info["x_final"] = x
    return trace


def make_estimator(method: str, objective: LogisticObjective, **params) -> Estimator:
    """Instantiate ``method`` with keyword parameters; ``None`` values are dropped."""
    params = {k: v for k, v in params.items() if v is not None}
    cls = ESTIMATORS.get(method) or DISTRIBUTED.get(method)
    if cls is None:
        raise ValidationError(f"unknown method {method!r}")
    try:
        return cls(objective, **params)
    except TypeError as exc:
        raise ValidationError(f"{method}: {exc}") from None


def reference_optimum(objective: LogisticObjective, fset: L1Ball, K: int) -> float:
    """Best value seen along a long deterministic run with the convex schedule."""
    x = np.zeros(objective.dim)
    sched = Schedule("convex", K, 2.0)
    best = objective.value(x)
    for k in range(K):
        x = fw_step(x, objective.full_gradient(x), sched(k), fset)
        best = min(best, objective.value(x))
    return best


def run(config) -> Trace:
    """Execute a validated :class:`sfwzoo.config.RunConfig`."""
    from .config import build

    objective, fset, estimator, schedule = build(config)
    trace = run_fw(
        objective, estimator, fset, schedule,
        seed=config.seed, log_every=config.log_every, timing=config.timing,
    )
    trace.info["config"] = config
    return trace
