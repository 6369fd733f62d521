"""In-process simulation of workers and a parameter server.

Each worker owns a shard objective ``f_i`` whose plain average over workers is
the global objective. Within a round workers run in id order, each with its
own ``(seed, round, worker, tag)`` random stream, so results do not depend
on execution order.

Uplink traffic (worker to server) is accumulated in ``bits_sent`` and
``coords_sent`` under the wire model of :mod:`sfwzoo.compression`. The
initial exchange of ``grad f_i(x0)`` is counted once in ``init_bits``.
Broadcasts from the server are tracked separately in ``downlink_bits``.
"""
from __future__ import annotations

import itertools

import numpy as np

from .compression import Compressor, Packet, dense_bits, make_compressor
from .core import ValidationError, constants_for
from .estimators import (
    SERVER,
    TAG_COIN,
    TAG_COMPRESS,
    TAG_INNER,
    TAG_PICK,
    Estimator,
    _check_p,
    all_subsets,
    coin,
    sample_subset,
)
from .objective import LogisticObjective, Partition

CONSISTENCY_TOL = 1e-9


class DistributedEstimator(Estimator):
    requires = "unbiased"  # or "contractive" or None

    def __init__(
        self,
        objective: LogisticObjective,
        n_workers: int = 4,
        compressor: str | Compressor = "identity",
        k: int | None = None,
        partition: Partition | str = "contiguous",
        partition_seed: int = 0,
    ):
        super().__init__(objective)
        if isinstance(partition, str):
            if partition == "contiguous":
                partition = Partition.contiguous(self.n, n_workers)
            elif partition == "shuffled":
                partition = Partition.shuffled(self.n, n_workers, partition_seed)
            else:
                raise ValidationError(f"unknown partition {partition!r}")
        self.partition = partition
        self.n_workers = partition.n_workers
        self.workers = objective.worker_objectives(partition)
        self.shard_sizes = [w.n_samples for w in self.workers]
        if isinstance(compressor, Compressor):
            self.compressor = compressor
        else:
            self.compressor = make_compressor(compressor, self.dim, k)
        if self.requires == "unbiased" and not self.compressor.unbiased:
            raise ValidationError(f"{self.method} needs an unbiased compressor, got {self.compressor.kind}")
        if self.requires == "contractive" and self.compressor.kind == "rand_k":
            raise ValidationError(f"{self.method} needs a contractive compressor, got rand_k")
        self.coords_sent = 0
        self.init_bits = 0
        self.rounds = 0

    # bookkeeping -----------------------------------------------------------
    def _grad(self, i, x):
        self.grad_calls += self.shard_sizes[i]
        return self.workers[i].full_gradient(x)

    def _send(self, packet: Packet):
        self.bits_sent += packet.bits
        self.coords_sent += packet.n_coords

    def _broadcast(self):
        # called once at the start of every round
        self.rounds += 1
        self.downlink_bits += self.n_workers * dense_bits(self.dim)

    def _compress_draws(self, streams):
        return tuple(self.compressor.draw(streams.get(i, TAG_COMPRESS)) for i in range(self.n_workers))

    def _compress_outcomes(self):
        per = self.compressor.outcomes()
        out = []
        for combo in itertools.product(per, repeat=self.n_workers):
            prob = float(np.prod([c[0] for c in combo]))
            out.append((prob, tuple(c[1] for c in combo)))
        return out

    def _init_worker_grads(self, x0) -> np.ndarray:
        grads = np.array([self._grad(i, x0) for i in range(self.n_workers)])
        self.init_bits = self.n_workers * dense_bits(self.dim)
        self.bits_sent += self.init_bits
        return grads

    def params(self):
        prm = {"n_workers": self.n_workers}
        if self.compressor.unbiased:
            prm["omega"] = self.compressor.omega
        else:
            prm["delta"] = self.compressor.delta
        return prm

    def check_invariants(self):
        """Raise ``AssertionError`` if server and worker memories disagree."""

    def bits_report(self) -> dict:
        if self.rounds < 1:
            raise ValidationError("no rounds executed")
        round_bits = self.bits_sent - self.init_bits
        return {
            "total_bits": self.bits_sent,
            "init_bits": self.init_bits,
            "per_round_mean": round_bits / self.rounds,
            "coords_per_worker_round": self.coords_sent / (self.rounds * self.n_workers),
            "downlink_bits": self.downlink_bits,
        }

    def counters(self):
        out = super().counters()
        out["coords_sent"] = self.coords_sent
        out["downlink_bits"] = self.downlink_bits
        return out


class DIANA(DistributedEstimator):
    """Compressed gradient differences against learned shifts ``h_i``."""

    method = "diana"

    def __init__(self, objective, alpha: float | None = None, **kw):
        super().__init__(objective, **kw)
        if alpha is None:
            alpha = 1.0 / (1.0 + self.compressor.omega)
        alpha = float(alpha)
        if not (0.0 < alpha <= 1.0):
            raise ValidationError(f"alpha={alpha} outside (0, 1]")
        self.alpha = alpha

    def init(self, x0):
        self.h_i = self._init_worker_grads(x0)
        self.h = self.h_i.mean(axis=0)
        self.g = self.h.copy()
        return self.g

    def draw(self, streams):
        return self._compress_draws(streams)

    def outcomes(self):
        return self._compress_outcomes()

    def apply(self, x_next, x_curr, draws):
        self._broadcast()
        deltas = np.empty((self.n_workers, self.dim))
        for i in range(self.n_workers):
            pkt = self.compressor.apply(self._grad(i, x_next) - self.h_i[i], draws[i])
            self._send(pkt)
            deltas[i] = pkt.values
        mean_delta = deltas.mean(axis=0)
        self.g = self.h + mean_delta
        self.h_i += self.alpha * deltas
        self.h = self.h + self.alpha * mean_delta
        return self.g

    def check_invariants(self):
        assert np.allclose(self.h, self.h_i.mean(axis=0), rtol=0, atol=CONSISTENCY_TOL), "h != mean h_i"


class MARINA(DistributedEstimator):
    """Shared coin: exact local refresh with probability ``p``, else compressed gradient differences."""

    method = "marina"

    def __init__(self, objective, p: float, **kw):
        super().__init__(objective, **kw)
        self.p = _check_p(p)

    def params(self):
        return dict(super().params(), p=self.p)

    def init(self, x0):
        self.g_i = self._init_worker_grads(x0)
        self.g = self.g_i.mean(axis=0)
        return self.g

    def draw(self, streams):
        if coin(streams.get(SERVER, TAG_COIN), self.p):
            return (True, None)
        return (False, self._tails_draws(streams))

    def _tails_draws(self, streams):
        return self._compress_draws(streams)

    def _tails_outcomes(self):
        return self._compress_outcomes()

    def outcomes(self):
        out = [(self.p, (True, None))]
        if self.p < 1.0:
            out += [((1.0 - self.p) * q, (False, d)) for q, d in self._tails_outcomes()]
        return out

    def _tails_packet(self, i, x_next, x_curr, draw) -> Packet:
        diff = self._grad(i, x_next) - self._grad(i, x_curr)
        return self.compressor.apply(diff, draw)

    def apply(self, x_next, x_curr, draw):
        heads, draws = draw
        self._broadcast()
        c = np.empty((self.n_workers, self.dim))
        for i in range(self.n_workers):
            if heads:
                pkt = Packet.full(self._grad(i, x_next) - self.g_i[i])
            else:
                pkt = self._tails_packet(i, x_next, x_curr, draws[i])
            self._send(pkt)
            c[i] = pkt.values
        self.g_i += c
        self.g = self.g + c.mean(axis=0)
        return self.g

    def check_invariants(self):
        assert np.allclose(self.g, self.g_i.mean(axis=0), rtol=0, atol=CONSISTENCY_TOL), "g != mean g_i"


class VRMARINA(MARINA):
    """MARINA whose compressed differences use an inner minibatch of size ``inner_batch`` per shard."""

    method = "vr_marina"

    def __init__(self, objective, p: float, inner_batch: int, **kw):
        super().__init__(objective, p, **kw)
        bb = int(inner_batch)
        if not (1 <= bb <= min(self.shard_sizes)):
            raise ValidationError(f"inner_batch={bb} outside [1, {min(self.shard_sizes)}]")
        self.inner_batch = bb

    def params(self):
        return dict(super().params(), inner_batch=self.inner_batch)

    def _tails_draws(self, streams):
        comp = self._compress_draws(streams)
        return tuple(
            (sample_subset(streams.get(i, TAG_INNER), self.shard_sizes[i], self.inner_batch), comp[i])
            for i in range(self.n_workers)
        )

    def _tails_outcomes(self):
        per_worker = []
        for i in range(self.n_workers):
            subsets = all_subsets(self.shard_sizes[i], self.inner_batch)
            comp = self.compressor.outcomes()
            per_worker.append(
                [(pc / len(subsets), (S, d)) for S in subsets for pc, d in comp]
            )
        out = []
        for combo in itertools.product(*per_worker):
            out.append((float(np.prod([c[0] for c in combo])), tuple(c[1] for c in combo)))
        return out

    def _tails_packet(self, i, x_next, x_curr, draw):
        S, comp_draw = draw
        w = self.workers[i]
        diff = w.sample_gradient_batch(S, x_next) - w.sample_gradient_batch(S, x_curr)
        self.grad_calls += 2 * len(S)
        return self.compressor.apply(diff, comp_draw)

    def constants(self, meta=None):
        prm = dict(self.params(), n_samples=self.n, dim=self.dim)
        if meta is not None:
            prm.update(L=meta.L, L_tilde=meta.L_tilde, L_avg=self.average_smoothness())
        return constants_for(self.method, prm)

    def average_smoothness(self) -> float:
        """RMS over workers of the shard-level RMS sample smoothness."""
        vals = [w.smoothness_constants().L_tilde for w in self.workers]
        return float(np.sqrt(np.mean(np.square(vals))))


class EF21(DistributedEstimator):
    """Error feedback: workers send ``C(grad f_i(x_next) - g_i)`` with a contractive ``C``."""

    method = "ef21"
    requires = "contractive"

    def init(self, x0):
        self.g_i = self._init_worker_grads(x0)
        self.g = self.g_i.mean(axis=0)
        return self.g

    def apply(self, x_next, x_curr, draw=None):
        self._broadcast()
        c = np.empty((self.n_workers, self.dim))
        for i in range(self.n_workers):
            pkt = self.compressor.apply(self._grad(i, x_next) - self.g_i[i])
            self._send(pkt)
            c[i] = pkt.values
        self.g_i += c
        self.g = self.g + c.mean(axis=0)
        return self.g

    def check_invariants(self):
        assert np.allclose(self.g, self.g_i.mean(axis=0), rtol=0, atol=CONSISTENCY_TOL), "g != mean g_i"


class QLSVRG(DistributedEstimator):
    """L-SVRG where the randomness comes from compression instead of sampling."""

    method = "qlsvrg"

    def __init__(self, objective, p: float, **kw):
        super().__init__(objective, **kw)
        self.p = _check_p(p)

    def params(self):
        return dict(super().params(), p=self.p)

    def init(self, x0):
        self.grad_w_i = self._init_worker_grads(x0)
        self.grad_w = self.grad_w_i.mean(axis=0)
        self.w = np.array(x0, dtype=np.float64)
        self.g = self.grad_w.copy()
        return self.g

    def draw(self, streams):
        return (coin(streams.get(SERVER, TAG_COIN), self.p), self._compress_draws(streams))

    def outcomes(self):
        out = []
        for heads, prob in ((True, self.p), (False, 1.0 - self.p)):
            if prob > 0:
                out += [(prob * q, (heads, d)) for q, d in self._compress_outcomes()]
        return out

    def apply(self, x_next, x_curr, draw):
        refresh, draws = draw
        self._broadcast()
        if refresh:
            self.w = np.array(x_curr, dtype=np.float64)
            for i in range(self.n_workers):
                self.grad_w_i[i] = self._grad(i, self.w)
                self._send(Packet.full(self.grad_w_i[i]))
            self.grad_w = self.grad_w_i.mean(axis=0)
        total = np.zeros(self.dim)
        for i in range(self.n_workers):
            pkt = self.compressor.apply(self._grad(i, x_next) - self.grad_w_i[i], draws[i])
            self._send(pkt)
            total += pkt.values
        self.g = total / self.n_workers + self.grad_w
        return self.g


class PPLSVRG(DistributedEstimator):
    """L-SVRG with partial participation: one uniformly chosen worker reports per round.

    ``anchor="post"`` (default) adds the full gradient at the refreshed anchor;
    ``anchor="pre"`` adds the one cached before this round's refresh.
    """

    method = "pplsvrg"
    requires = None
    ANCHORS = ("post", "pre")

    def __init__(self, objective, p: float, anchor: str = "post", **kw):
        kw.setdefault("compressor", "identity")
        super().__init__(objective, **kw)
        if self.compressor.kind != "identity":
            raise ValidationError("pplsvrg sends uncompressed packets; use compressor.kind=identity")
        self.p = _check_p(p)
        if anchor not in self.ANCHORS:
            raise ValidationError(f"pplsvrg anchor must be one of {self.ANCHORS}")
        self.anchor = anchor

    def params(self):
        return {"p": self.p, "n_workers": self.n_workers}

    def init(self, x0):
        self.grad_w_i = self._init_worker_grads(x0)
        self.grad_w = self.grad_w_i.mean(axis=0)
        self.w = np.array(x0, dtype=np.float64)
        self.g = self.grad_w.copy()
        return self.g

    def draw(self, streams):
        return (coin(streams.get(SERVER, TAG_COIN), self.p),
                int(streams.get(SERVER, TAG_PICK).integers(self.n_workers)))

    def outcomes(self):
        out = []
        for heads, prob in ((True, self.p), (False, 1.0 - self.p)):
            if prob > 0:
                out += [(prob / self.n_workers, (heads, i)) for i in range(self.n_workers)]
        return out

    def apply(self, x_next, x_curr, draw):
        refresh, i = draw
        self._broadcast()
        grad_w_before = self.grad_w
        if refresh:
            self.w = np.array(x_curr, dtype=np.float64)
            self.grad_w_i = self.grad_w_i.copy()
            for j in range(self.n_workers):
                self.grad_w_i[j] = self._grad(j, self.w)
                self._send(Packet.full(self.grad_w_i[j]))
            self.grad_w = self.grad_w_i.mean(axis=0)
        pkt = Packet.full(self._grad(i, x_next) - self.grad_w_i[i])
        self._send(pkt)
        base = self.grad_w if self.anchor == "post" else grad_w_before
        self.g = pkt.values + base
        return self.g


DISTRIBUTED = {
    "diana": DIANA,
    "marina": MARINA,
    "vr_marina": VRMARINA,
    "ef21": EF21,
    "qlsvrg": QLSVRG,
    "pplsvrg": PPLSVRG,
}
