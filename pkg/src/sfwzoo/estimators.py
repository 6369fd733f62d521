"""Single-machine gradient estimators for the stochastic Frank-Wolfe step.

Every estimator follows the same protocol:

* ``init(x0)`` sets and returns ``g0 = grad f(x0)``;
* ``draw(streams)`` samples this round's randomness from a ``RoundStreams``;
* ``apply(x_next, x_curr, draw)`` updates the state and returns ``g``;
* ``outcomes()`` lists every possible draw with its probability, which lets
  tests compute exact expectations by enumeration on tiny instances.

Counters: ``grad_calls`` counts per-sample gradient evaluations,
``coord_calls`` counts partial derivatives of ``f`` and ``func_calls``
counts evaluations of ``f`` itself.
"""
from __future__ import annotations

import copy
import itertools
import math

import numpy as np

from .core import MethodConstants, RoundStreams, ValidationError, constants_for
from .objective import LogisticObjective, ObjectiveMeta

# stream tags; one per kind of randomness so that changing one parameter
# never shifts the draws of another
TAG_COIN = 1
TAG_BATCH = 2
TAG_COORD = 3
TAG_COMPRESS = 4
TAG_PICK = 5
TAG_INNER = 6
SERVER = -1


def sample_subset(rng: np.random.Generator, n: int, b: int) -> np.ndarray:
    """Uniform ``b``-subset of ``range(n)`` without replacement, sorted."""
    if b == n:
        return np.arange(n, dtype=np.int64)
    return np.sort(rng.choice(n, size=b, replace=False)).astype(np.int64)


def all_subsets(n: int, b: int):
    return [np.array(c, dtype=np.int64) for c in itertools.combinations(range(n), b)]


def coin(rng: np.random.Generator, p: float) -> bool:
    return bool(rng.random() < p)


def _check_batch(b, n):
    if not (isinstance(b, (int, np.integer)) and 1 <= b <= n):
        raise ValidationError(f"batch size b={b} must be an integer in [1, {n}]")
    return int(b)


def _check_p(p):
    p = float(p)
    if not (0.0 < p <= 1.0):
        raise ValidationError(f"p={p} outside (0, 1]")
    return p


class Estimator:
    method = "base"

    def __init__(self, objective: LogisticObjective):
        self.objective = objective
        self.n = objective.n_samples
        self.dim = objective.dim
        self.g: np.ndarray | None = None
        self.grad_calls = 0
        self.coord_calls = 0
        self.func_calls = 0
        self.bits_sent = 0
        self.downlink_bits = 0

    def init(self, x0) -> np.ndarray:
        self.g = self.objective.full_gradient(x0)
        self.grad_calls += self.n
        return self.g

    def draw(self, streams: RoundStreams):
        return None

    def outcomes(self):
        return [(1.0, None)]

    def apply(self, x_next, x_curr, draw) -> np.ndarray:
        raise NotImplementedError

    def step(self, x_next, x_curr, streams: RoundStreams) -> np.ndarray:
        return self.apply(x_next, x_curr, self.draw(streams))

    def params(self) -> dict:
        return {}

    def constants(self, meta: ObjectiveMeta | None = None) -> MethodConstants:
        prm = dict(self.params(), n_samples=self.n, dim=self.dim)
        if meta is not None:
            prm.update(L=meta.L, L_tilde=meta.L_tilde)
        return constants_for(self.method, prm)

    def counters(self) -> dict:
        return {
            "grad_calls": self.grad_calls,
            "coord_calls": self.coord_calls,
            "func_calls": self.func_calls,
            "bits_sent": self.bits_sent,
        }

    def clone(self) -> "Estimator":
        """Independent copy of the mutable state; the objective is shared."""
        memo = {id(self.objective): self.objective}
        return copy.deepcopy(self, memo)


class Deterministic(Estimator):
    method = "deterministic"

    def apply(self, x_next, x_curr, draw=None):
        self.g = self.objective.full_gradient(x_next)
        self.grad_calls += self.n
        return self.g


class LSVRG(Estimator):
    """Loopless SVRG: with probability ``p`` the anchor ``w`` moves to ``x_curr``."""

    method = "lsvrg"

    def __init__(self, objective, p: float, b: int):
        super().__init__(objective)
        self.p = _check_p(p)
        self.b = _check_batch(b, self.n)

    def params(self):
        return {"p": self.p, "b": self.b}

    def init(self, x0):
        super().init(x0)
        self.w = np.array(x0, dtype=np.float64)
        self.grad_w = self.g.copy()
        return self.g

    def draw(self, streams):
        return (coin(streams.get(SERVER, TAG_COIN), self.p),
                sample_subset(streams.get(SERVER, TAG_BATCH), self.n, self.b))

    def outcomes(self):
        subsets = all_subsets(self.n, self.b)
        out = []
        for heads, prob in ((True, self.p), (False, 1.0 - self.p)):
            if prob > 0:
                out += [(prob / len(subsets), (heads, S)) for S in subsets]
        return out

    def apply(self, x_next, x_curr, draw):
        refresh, S = draw
        obj = self.objective
        if refresh:
            self.w = np.array(x_curr, dtype=np.float64)
            self.grad_w = obj.full_gradient(self.w)
            self.grad_calls += self.n
        self.g = obj.sample_gradient_batch(S, x_next) - obj.sample_gradient_batch(S, self.w) + self.grad_w
        self.grad_calls += 2 * self.b
        return self.g


class SARAH(Estimator):
    """Loopless SARAH: full gradient with probability ``p``, else a recursive batch correction."""

    method = "sarah"

    def __init__(self, objective, p: float, b: int):
        super().__init__(objective)
        self.p = _check_p(p)
        self.b = _check_batch(b, self.n)

    def params(self):
        return {"p": self.p, "b": self.b}

    def draw(self, streams):
        if coin(streams.get(SERVER, TAG_COIN), self.p):
            return (True, None)
        return (False, sample_subset(streams.get(SERVER, TAG_BATCH), self.n, self.b))

    def outcomes(self):
        out = [(self.p, (True, None))]
        if self.p < 1.0:
            subsets = all_subsets(self.n, self.b)
            out += [((1.0 - self.p) / len(subsets), (False, S)) for S in subsets]
        return out

    def apply(self, x_next, x_curr, draw):
        full, S = draw
        obj = self.objective
        if full:
            self.g = obj.full_gradient(x_next)
            self.grad_calls += self.n
        else:
            self.g = self.g + obj.sample_gradient_batch(S, x_next) - obj.sample_gradient_batch(S, x_curr)
            self.grad_calls += 2 * self.b
        return self.g


class _TableMixin:
    """Per-sample gradient table ``y`` with an incrementally maintained mean."""

    def _init_table(self, x0):
        obj = self.objective
        self.y = obj.sample_gradients(np.arange(self.n), x0)
        self.y_mean = self.y.mean(axis=0)
        self._since_resync = 0

    def _write_rows(self, S, G):
        self.y_mean += (G - self.y[S]).sum(axis=0) / self.n
        self.y[S] = G
        # bound floating drift of the running mean: exact recompute once per
        # expected table sweep
        self._since_resync += len(S)
        if self._since_resync >= self.n:
            self.y_mean = self.y.mean(axis=0)
            self._since_resync = 0


class SAGA(_TableMixin, Estimator):
    """SAGA with a table of per-sample gradients.

    ``variant="unbiased"`` (default) forms ``g`` from the table before
    writing ``grad f_i(x_next)`` into the sampled rows, which makes ``g`` an
    unbiased estimate of ``grad f(x_next)`` at ``b`` gradient calls per step.
    ``variant="listing"`` first writes ``grad f_i(x_curr)`` into the rows and
    then forms ``g`` from the updated table (``2b`` calls, biased for ``b < n``).
    """

    method = "saga"
    VARIANTS = ("unbiased", "listing")

    def __init__(self, objective, b: int, variant: str = "unbiased"):
        super().__init__(objective)
        self.b = _check_batch(b, self.n)
        if variant not in self.VARIANTS:
            raise ValidationError(f"saga variant must be one of {self.VARIANTS}")
        self.variant = variant

    def params(self):
        return {"b": self.b}

    def init(self, x0):
        self._init_table(x0)
        return super().init(x0)

    def draw(self, streams):
        return sample_subset(streams.get(SERVER, TAG_BATCH), self.n, self.b)

    def outcomes(self):
        subsets = all_subsets(self.n, self.b)
        return [(1.0 / len(subsets), S) for S in subsets]

    def apply(self, x_next, x_curr, S):
        obj = self.objective
        G_next = obj.sample_gradients(S, x_next)
        if self.variant == "unbiased":
            self.g = (G_next - self.y[S]).mean(axis=0) + self.y_mean
            self._write_rows(S, G_next)
            self.grad_calls += self.b
        else:
            self._write_rows(S, obj.sample_gradients(S, x_curr))
            self.g = (G_next - self.y[S]).mean(axis=0) + self.y_mean
            self.grad_calls += 2 * self.b
        return self.g


class SAGASARAH(_TableMixin, Estimator):
    """SARAH recursion mixed with a SAGA correction, momentum ``lam = b / (2n)``.

    ``table="post"`` (default) reads the table after the sampled rows are
    overwritten with ``grad f_i(x_curr)``, so the SAGA term collapses to the
    table mean. ``table="pre"`` reads the rows before the write.
    """

    method = "saga_sarah"
    TABLES = ("post", "pre")

    def __init__(self, objective, b: int, table: str = "post"):
        super().__init__(objective)
        self.b = _check_batch(b, self.n)
        if table not in self.TABLES:
            raise ValidationError(f"saga_sarah table must be one of {self.TABLES}")
        self.table = table
        self.lam = self.b / (2.0 * self.n)

    def params(self):
        return {"b": self.b}

    def init(self, x0):
        self._init_table(x0)
        return super().init(x0)

    def draw(self, streams):
        return sample_subset(streams.get(SERVER, TAG_BATCH), self.n, self.b)

    def outcomes(self):
        subsets = all_subsets(self.n, self.b)
        return [(1.0 / len(subsets), S) for S in subsets]

    def apply(self, x_next, x_curr, S):
        obj = self.objective
        G_next = obj.sample_gradients(S, x_next)
        G_curr = obj.sample_gradients(S, x_curr)
        sarah = (G_next - G_curr).mean(axis=0)
        if self.table == "pre":
            saga = (G_curr - self.y[S]).mean(axis=0) + self.y_mean
            self._write_rows(S, G_curr)
        else:
            self._write_rows(S, G_curr)
            saga = (G_curr - self.y[S]).mean(axis=0) + self.y_mean
        self.g = sarah + (1.0 - self.lam) * self.g + self.lam * saga
        self.grad_calls += 2 * self.b
        return self.g


class _CoordinateEstimator(Estimator):
    def init(self, x0):
        self.g = self.objective.full_gradient(x0)
        self.coord_calls += self.dim
        return self.g

    def draw(self, streams):
        return int(streams.get(SERVER, TAG_COORD).integers(self.dim))

    def outcomes(self):
        return [(1.0 / self.dim, i) for i in range(self.dim)]


class SEGA(_CoordinateEstimator):
    """Sketched gradient with coordinate memory ``h``.

    ``variant="unbiased"`` (default) uses one partial derivative at
    ``x_next`` per step; ``E[g] = grad f(x_next)`` for every ``h``.
    ``variant="listing"`` refreshes ``h_i`` at ``x_curr`` before forming
    ``g`` (two partial derivatives per step).
    """

    method = "sega"
    VARIANTS = ("unbiased", "listing")

    def __init__(self, objective, variant: str = "unbiased"):
        super().__init__(objective)
        if variant not in self.VARIANTS:
            raise ValidationError(f"sega variant must be one of {self.VARIANTS}")
        self.variant = variant

    def init(self, x0):
        super().init(x0)
        self.h = self.g.copy()
        return self.g

    def apply(self, x_next, x_curr, i):
        obj = self.objective
        d_next = obj.partial_derivative(i, x_next)
        if self.variant == "listing":
            self.h[i] = obj.partial_derivative(i, x_curr)
            self.coord_calls += 1
        g = self.h.copy()
        g[i] += self.dim * (d_next - self.h[i])
        if self.variant == "unbiased":
            self.h[i] = d_next
        self.coord_calls += 1
        self.g = g
        return g


class JAGUAR(_CoordinateEstimator):
    """Overwrite one random coordinate of ``g`` with the exact partial derivative."""

    method = "jaguar"

    def apply(self, x_next, x_curr, i):
        g = self.g.copy()
        g[i] = self.objective.partial_derivative(i, x_next)
        self.coord_calls += 1
        self.g = g
        return g


class ZOJA(_CoordinateEstimator):
    """JAGUAR with the partial derivative replaced by a forward difference of step ``tau``."""

    method = "zoja"

    def __init__(self, objective, tau: float):
        super().__init__(objective)
        tau = float(tau)
        if not (tau > 0 and math.isfinite(tau)):
            raise ValidationError(f"tau={tau} must be > 0")
        self.tau = tau

    def params(self):
        return {"tau": self.tau}

    def init(self, x0):
        obj = self.objective
        self.g = np.array([obj.forward_difference(j, x0, self.tau) for j in range(self.dim)])
        self.coord_calls += self.dim
        self.func_calls += self.dim + 1
        return self.g

    def apply(self, x_next, x_curr, i):
        g = self.g.copy()
        g[i] = self.objective.forward_difference(i, x_next, self.tau)
        self.coord_calls += 1
        self.func_calls += 2
        self.g = g
        return g


ESTIMATORS = {
    "deterministic": Deterministic,
    "lsvrg": LSVRG,
    "sarah": SARAH,
    "saga": SAGA,
    "saga_sarah": SAGASARAH,
    "sega": SEGA,
    "jaguar": JAGUAR,
    "zoja": ZOJA,
}


def expectation(estimator: Estimator, x_next, x_curr, fn=None):
    """Exact ``E[fn(g)]`` over one step, by enumerating ``outcomes()``.

    ``fn`` defaults to the identity, giving ``E[g]``. The estimator itself is
    left untouched; each outcome is applied to a clone.
    """
    total = None
    for prob, draw in estimator.outcomes():
        g = estimator.clone().apply(x_next, x_curr, draw)
        val = prob * np.asarray(g if fn is None else fn(g), dtype=np.float64)
        total = val if total is None else total + val
    return total
