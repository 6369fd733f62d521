"""Shared types, counter-based random streams and the variance-bound constants.

Every gradient estimator ``g^k`` used inside the Frank-Wolfe step is
characterised by a tuple ``(rho1, rho2, A, B, C, E)`` bounding

    E||g^k - grad f(x^k)||^2 <= (1 - rho1) ||g^{k-1} - grad f(x^{k-1})||^2
                                 + A sigma_{k-1}^2 + eta_{k-1}^2 B D^2 + C
    E[sigma_k^2] <= (1 - rho2) sigma_{k-1}^2 + eta_{k-1}^2 E D^2

``constants_for`` returns that tuple for each supported method. The
step-size schedule only needs ``d = 2 / min(rho1, rho2)``.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

Vector = NDArray[np.float64]


class SFWError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(SFWError, ValueError):
    """A parameter, config value or input failed validation."""


METHODS = (
    "deterministic",
    "lsvrg",
    "sarah",
    "saga",
    "saga_sarah",
    "sega",
    "jaguar",
    "zoja",
    "diana",
    "marina",
    "vr_marina",
    "ef21",
    "qlsvrg",
    "pplsvrg",
)

DISTRIBUTED_METHODS = ("diana", "marina", "vr_marina", "ef21", "qlsvrg", "pplsvrg")
COORDINATE_METHODS = ("sega", "jaguar", "zoja")


@dataclass(frozen=True)
class MethodConstants:
    rho1: float
    rho2: float
    A: float = 0.0
    B: float = 0.0
    C: float = 0.0
    E: float = 0.0
    sigma: str = "0"

    def __post_init__(self):
        for name in ("rho1", "rho2"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0) or not math.isfinite(v):
                raise ValidationError(f"{name}={v} outside (0, 1]")
        for name in ("A", "B", "C", "E"):
            v = getattr(self, name)
            if not (v >= 0.0) or not math.isfinite(v):
                raise ValidationError(f"{name}={v} must be finite and >= 0")

    @property
    def d(self) -> float:
        """Schedule constant ``2 / min(rho1, rho2)``; always >= 2."""
        return 2.0 / min(self.rho1, self.rho2)


@dataclass(frozen=True)
class IterationState:
    k: int
    x: Vector
    eta: float
    g: Vector

    def __post_init__(self):
        if self.k < 0:
            raise ValidationError("iteration index must be >= 0")
        if not (0.0 < self.eta <= 1.0):
            raise ValidationError(f"eta={self.eta} outside (0, 1]")


def _require(params, method, *names):
    missing = [n for n in names if params.get(n) is None]
    if missing:
        raise ValidationError(f"{method}: missing parameter(s) {', '.join(missing)}")
    return [params[n] for n in names]


def _check_p(p):
    if not (0.0 < p <= 1.0):
        raise ValidationError(f"p={p} outside (0, 1]")


def _check_b(b, n):
    if not (1 <= b <= n):
        raise ValidationError(f"batch size b={b} outside [1, {n}]")


def constants_for(method: str, params: Optional[dict] = None, **kwargs) -> MethodConstants:
    """Variance-bound constants of ``method``.

    ``params`` (or keyword arguments) may contain ``p``, ``b``,
    ``n_samples``, ``dim``, ``omega``, ``delta``, ``n_workers``, ``tau`` and
    ``inner_batch``. The smoothness values ``L``, ``L_tilde`` and
    ``L_avg`` (average smoothness of worker minibatch differences) scale
    ``B``, ``C`` and ``E`` and default to 1, i.e. the constants are then
    reported per unit of squared smoothness.

    For SAGA, JAGUAR, EF21 and Q-L-SVRG the more conservative of two
    known constant sets is returned.
    """
    prm = dict(params or {})
    prm.update(kwargs)
    L = float(prm.get("L") or 1.0)
    Lt = float(prm.get("L_tilde") or 1.0)
    method = str(method).lower().replace("-", "_")

    if method == "deterministic":
        return MethodConstants(1.0, 1.0)

    if method == "lsvrg":
        p, b = _require(prm, method, "p", "b")
        _check_p(p)
        if prm.get("n_samples") is not None:
            _check_b(b, prm["n_samples"])
        return MethodConstants(
            rho1=1.0, rho2=p / 2.0,
            A=Lt**2 / b * (1.0 - p / 2.0), B=8.0 * Lt**2 / (p * b), C=0.0, E=8.0 / p,
            sigma="||x^k - w^k||^2",
        )

    if method == "sarah":
        p, b = _require(prm, method, "p", "b")
        _check_p(p)
        if prm.get("n_samples") is not None:
            _check_b(b, prm["n_samples"])
        return MethodConstants(rho1=p, rho2=1.0, A=0.0, B=(1.0 - p) / b * Lt**2)

    if method == "saga":
        b, n = _require(prm, method, "b", "n_samples")
        _check_b(b, n)
        return MethodConstants(
            rho1=1.0, rho2=b / (2.0 * n),
            A=(1.0 / b) * (1.0 + b / (2.0 * n)),
            B=Lt**2 / b * (1.0 + 2.0 * n / b),
            E=2.0 * n / b * Lt**2,
            sigma="(1/n) sum_j ||grad f_j(x^k) - y_j^{k+1}||^2",
        )

    if method == "saga_sarah":
        b, n = _require(prm, method, "b", "n_samples")
        _check_b(b, n)
        lam = b / (2.0 * n)
        return MethodConstants(
            rho1=lam, rho2=lam, A=b / (2.0 * n**2), B=2.0 * Lt**2 / b,
            E=2.0 * n * Lt**2 / b,
            sigma="(1/n) sum_j ||grad f_j(x^k) - y_j^{k+1}||^2",
        )

    if method == "sega":
        (d,) = _require(prm, method, "dim")
        return MethodConstants(
            rho1=1.0, rho2=1.0 / (2.0 * d), A=float(d), B=d**2 * L**2, E=3.0 * L**2 * d,
            sigma="||h^{k+1} - grad f(x^k)||^2",
        )

    if method == "jaguar":
        (d,) = _require(prm, method, "dim")
        return MethodConstants(rho1=1.0 / (2.0 * d), rho2=1.0, B=3.0 * d * L**2)

    if method == "zoja":
        d, tau = _require(prm, method, "dim", "tau")
        if tau <= 0:
            raise ValidationError("tau must be > 0")
        return MethodConstants(
            rho1=1.0 / (4.0 * d), rho2=1.0, B=3.0 * d * L**2, C=5.0 * d * L**2 * tau**2 / 4.0
        )

    if method == "diana":
        omega, n = _require(prm, method, "omega", "n_workers")
        return MethodConstants(
            rho1=1.0, rho2=1.0 / (2.0 * (1.0 + omega)),
            A=omega / n**2, B=2.0 * omega * (omega + 1.0) * Lt**2 / n,
            E=2.0 * (omega + 1.0) * n * Lt**2,
            sigma="sum_i ||grad f_i(x^k) - h_i^k||^2",
        )

    if method == "marina":
        p, omega, n = _require(prm, method, "p", "omega", "n_workers")
        _check_p(p)
        return MethodConstants(rho1=p, rho2=1.0, B=(1.0 - p) * omega * L**2 / n)

    if method == "vr_marina":
        p, omega, n, bb = _require(prm, method, "p", "omega", "n_workers", "inner_batch")
        _check_p(p)
        Lavg = float(prm.get("L_avg") or 1.0)
        return MethodConstants(
            rho1=p, rho2=1.0,
            B=(1.0 - p) / n * (omega * L**2 + (1.0 + omega) * Lavg**2 / bb),
        )

    if method == "ef21":
        (delta,) = _require(prm, method, "delta")
        if delta < 1:
            raise ValidationError("delta must be >= 1")
        return MethodConstants(
            rho1=1.0, rho2=(delta + 1.0) / (2.0 * delta**2), A=1.0, E=2.0 * delta * Lt**2,
            sigma="(1/n) sum_i ||g_i^k - grad f_i(x^k)||^2",
        )

    if method == "qlsvrg":
        p, omega, n = _require(prm, method, "p", "omega", "n_workers")
        _check_p(p)
        return MethodConstants(
            rho1=1.0, rho2=p / 2.0,
            A=omega * Lt**2 / n * (1.0 - p / 2.0),
            B=omega * Lt**2 / n * (1.0 + 8.0 * (1.0 - p) / p),
            E=1.0 + 8.0 * (1.0 - p) / p,
            sigma="||x^k - w^k||^2",
        )

    if method == "pplsvrg":
        (p,) = _require(prm, method, "p")
        _check_p(p)
        return MethodConstants(
            rho1=1.0, rho2=p / 2.0, A=1.0 + p / 2.0, B=Lt**2 * (1.0 + 2.0 / p),
            E=Lt**2 * 2.0 / p,
            sigma="sum_i ||grad f_i(x^k) - grad f_i(w^{k+1})||^2",
        )

    raise ValidationError(f"unknown method {method!r}")


# Counter-based streams: the generator for (seed, worker, iteration, tag) is
# a pure function of those four integers, so the order in which streams are
# created never changes what they produce.

_MASK64 = (1 << 64) - 1


def _philox_key(seed: int) -> np.ndarray:
    digest = hashlib.blake2b(int(seed & _MASK64).to_bytes(8, "little"), digest_size=16).digest()
    return np.frombuffer(digest, dtype=np.uint64).copy()


@dataclass(frozen=True)
class RngStream:
    seed: int
    worker: int = 0
    iteration: int = 0
    tag: int = 0

    def generator(self) -> np.random.Generator:
        # Philox increments word 0 per block; the ids live in words 1-3.
        counter = np.array(
            [0, self.iteration & _MASK64, (self.worker + 1) & _MASK64, self.tag & _MASK64],
            dtype=np.uint64,
        )
        return np.random.Generator(np.random.Philox(key=_philox_key(self.seed), counter=counter))


class RoundStreams:
    """Per-iteration factory of generators keyed by (worker, tag)."""

    __slots__ = ("seed", "iteration")

    def __init__(self, seed: int, iteration: int):
        self.seed = int(seed)
        self.iteration = int(iteration)

    def get(self, worker: int = 0, tag: int = 0) -> np.random.Generator:
        return RngStream(self.seed, worker, self.iteration, tag).generator()

