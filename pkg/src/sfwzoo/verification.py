"""Executable acceptance checks.

Each ``check_*`` function runs one criterion and returns a :class:`CheckResult`
carrying the measured quantity, the threshold and the wall time. Both the
``verify`` subcommand and the acceptance tests call these functions.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .compression import RandK, TopK
from .core import RoundStreams, constants_for
from .datasets import resolve, w1a_like
from .distributed import DIANA, EF21, MARINA, PPLSVRG, QLSVRG, VRMARINA
from .driver import Schedule, fw_step, reference_optimum, run_fw
from .estimators import LSVRG, SAGA, SAGASARAH, SARAH, SEGA, Deterministic, JAGUAR, ZOJA, expectation
from .objective import Dataset, LogisticObjective, toy_datasets
from .sets import L1Ball


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    limit: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:>2} {self.name}: {self.detail} ({self.seconds:.2f}s / {self.limit:g}s)"


def _timed(number, name, limit, fn: Callable[[], tuple]) -> CheckResult:
    t0 = time.perf_counter()
    ok, detail = fn()
    dt = time.perf_counter() - t0
    if dt >= limit:
        ok = False
        detail += "; exceeded time limit"
    return CheckResult(number, name, bool(ok), detail, dt, limit)


# ------------------------------------------------------------------ helpers

# the real files take precedence when $SFWZOO_DATA_DIR provides them
def mushrooms_subset(rows: int = 500) -> Dataset:
    return resolve("synthetic:mushrooms", rows)


def w1a_subset(rows: int = 2000) -> Dataset:
    return resolve("synthetic:w1a", rows)


def tiny_dataset(n: int, dim: int, seed: int) -> Dataset:
    rng = np.random.default_rng([seed, n, dim])
    X = rng.standard_normal((n, dim))
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return Dataset.from_dense(X, y)


def dense_value(ds: Dataset, x) -> float:
    """Reference objective from the dense matrix, independent of the sparse kernels."""
    z = ds.labels * (ds.dense() @ x)
    return float(np.mean(np.logaddexp(0.0, -z)))


def central_difference(ds: Dataset, x, h: float = 1e-6) -> np.ndarray:
    out = np.empty(ds.dim)
    for j in range(ds.dim):
        e = np.zeros(ds.dim)
        e[j] = h
        out[j] = (dense_value(ds, x + e) - dense_value(ds, x - e)) / (2 * h)
    return out


def gradient_rel_error(g, fd, floor: float = 1e-6) -> float:
    """Coordinate-wise ``|g - fd| / max(|fd|, floor)``, maximised.

    The floor only matters for coordinates whose derivative is essentially
    zero (e.g. feature columns absent from the data subset).
    """
    return float(np.max(np.abs(g - fd) / np.maximum(np.abs(fd), floor)))


def advance(est, obj, fset, x, steps, seed, eta=0.3):
    """Run ``steps`` Frank-Wolfe steps so the estimator state is non-trivial."""
    g = est.g
    for k in range(steps):
        x_next = fw_step(x, g, eta, fset)
        g = est.step(x_next, x, RoundStreams(seed, k))
        x = x_next
    return x


# --------------------------------------------------------------- criteria

def check_gradients(n_points: int = 3, tol: float = 1e-5) -> CheckResult:
    def body():
        worst = 0.0
        sets = list(toy_datasets()) + [mushrooms_subset()]
        rng = np.random.default_rng(1)
        for ds in sets:
            obj = LogisticObjective(ds)
            for _ in range(n_points):
                x = rng.uniform(-1, 1, ds.dim)
                x *= rng.uniform(0.1, 2.0) / np.abs(x).sum()
                worst = max(worst, gradient_rel_error(obj.full_gradient(x), central_difference(ds, x)))
        return worst <= tol, f"max rel. error {worst:.2e} <= {tol:g} on {len(sets)} datasets"

    return _timed(1, "gradient vs central differences", 5.0, body)


def check_lmo(trials: int = 1000) -> CheckResult:
    def body():
        rng = np.random.default_rng(2)
        bad = 0
        for t in range(trials):
            dim = int(rng.integers(1, 9))
            ball = L1Ball(float(rng.uniform(0.1, 10.0)), dim)
            g = rng.standard_normal(dim)
            if t % 10 == 0:
                g = np.round(g)  # exercise ties and zeros
            val = float(np.dot(g, ball.lmo(g)))
            best = float(min(np.dot(g, v) for v in ball.vertices()))
            bad += val > best
        return bad == 0, f"{trials - bad}/{trials} gradients attain the vertex minimum exactly"

    return _timed(2, "LMO optimality", 1.0, body)


def _unbiased_cases():
    """(label, estimator factory, dataset) triples for the enumeration check."""
    return [
        ("L-SVRG", lambda o: LSVRG(o, p=0.4, b=1), tiny_dataset(3, 3, 11)),
        ("SAGA", lambda o: SAGA(o, b=1), tiny_dataset(3, 3, 12)),
        ("SEGA", lambda o: SEGA(o), tiny_dataset(3, 3, 13)),
        ("DIANA", lambda o: DIANA(o, n_workers=2, compressor="rand_k", k=1), tiny_dataset(2, 2, 14)),
        ("Q-L-SVRG", lambda o: QLSVRG(o, p=0.3, n_workers=2, compressor="rand_k", k=1), tiny_dataset(2, 2, 15)),
        ("PP-L-SVRG", lambda o: PPLSVRG(o, p=0.3, n_workers=2), tiny_dataset(2, 2, 16)),
    ]


def unbiasedness_errors(steps: int = 4) -> dict:
    out = {}
    for label, make, ds in _unbiased_cases():
        obj = LogisticObjective(ds)
        fset = L1Ball(2.0, ds.dim)
        est = make(obj)
        x = np.zeros(ds.dim)
        est.init(x)
        x = advance(est, obj, fset, x, steps, seed=7)
        x_next = fw_step(x, est.g, 0.25, fset)
        mean = expectation(est, x_next, x)
        out[label] = float(np.max(np.abs(mean - obj.full_gradient(x_next))))
    return out


def check_unbiasedness(tol: float = 1e-12) -> CheckResult:
    def body():
        errs = unbiasedness_errors()
        worst = max(errs.values())
        txt = ", ".join(f"{k} {v:.1e}" for k, v in errs.items())
        return worst <= tol, f"|E[g] - grad f|_inf: {txt}"

    return _timed(3, "exhaustive unbiasedness", 10.0, body)


def recursion_margins(p_values=(0.25, 0.5, 1.0), steps: int = 3) -> dict:
    """Slack ``rhs - lhs`` of the one-step variance recursion, by enumeration.

    ``lhs = E||g' - grad f(x')||^2`` and
    ``rhs = (1 - rho1)||g - grad f(x)||^2 + B ||x' - x||^2``.
    Using ``||x' - x||^2`` instead of ``eta^2 D^2`` gives the tighter form.
    """
    ds = tiny_dataset(2, 2, 21)
    obj = LogisticObjective(ds)
    meta = obj.smoothness_constants()
    fset = L1Ball(3.0, ds.dim)
    out = {}
    for p in p_values:
        cases = [("SARAH", SARAH(obj, p=p, b=1))]
        for nw in (1, 2):
            cases.append((f"MARINA(n={nw})", MARINA(obj, p=p, n_workers=nw, compressor="rand_k", k=1)))
        for label, est in cases:
            x = np.zeros(ds.dim)
            est.init(x)
            # warm up with a sub-unit probability so that g carries error
            est.p = min(p, 0.5)
            x = advance(est, obj, fset, x, steps, seed=3)
            est.p = p
            x_next = fw_step(x, est.g, 0.4, fset)
            err0 = float(np.sum((est.g - obj.full_gradient(x)) ** 2))
            lhs = float(expectation(est, x_next, x, lambda g: np.sum((g - obj.full_gradient(x_next)) ** 2)))
            if label == "SARAH":
                c = constants_for("sarah", p=p, b=1, n_samples=2, L_tilde=meta.L_tilde)
            else:
                L_loc = math.sqrt(np.mean([w.smoothness_constants().L ** 2 for w in est.workers]))
                c = constants_for("marina", p=p, omega=est.compressor.omega, n_workers=est.n_workers, L=L_loc)
            rhs = (1.0 - c.rho1) * err0 + c.B * float(np.sum((x_next - x) ** 2))
            out[(label, p)] = (lhs, rhs)
    return out


def check_recursions() -> CheckResult:
    def body():
        res = recursion_margins()
        ok = all(lhs <= rhs * (1 + 1e-12) + 1e-15 for lhs, rhs in res.values())
        tight = min((rhs - lhs) for lhs, rhs in res.values())
        return ok, f"{len(res)} (method, p) cases hold; min slack {tight:.2e}"

    return _timed(4, "variance recursions (SARAH, MARINA)", 10.0, body)


def compressor_certificates(topk_trials: int = 10_000) -> dict:
    rng = np.random.default_rng(5)
    worst_bias = worst_var = 0.0
    for dim in range(1, 7):
        for k in range(1, dim + 1):
            comp = RandK(dim, k)
            x = rng.standard_normal(dim)
            outs = comp.outcomes()
            mean = sum(p * comp.apply(x, d).values for p, d in outs)
            var = sum(p * np.sum((comp.apply(x, d).values - x) ** 2) for p, d in outs)
            worst_bias = max(worst_bias, float(np.max(np.abs(mean - x))))
            worst_var = max(worst_var, abs(var - comp.omega * np.sum(x**2)) / np.sum(x**2))
    worst_ratio = 0.0
    for _ in range(topk_trials):
        dim = int(rng.integers(2, 11))
        k = int(rng.integers(1, dim + 1))
        comp = TopK(dim, k)
        x = rng.standard_normal(dim)
        err = np.sum((comp.apply(x).values - x) ** 2)
        bound = (1 - 1 / comp.delta) * np.sum(x**2)
        worst_ratio = max(worst_ratio, err / bound if bound > 0 else err)
    tight = 0.0
    for dim in range(2, 11):
        for k in range(1, dim + 1):
            comp = TopK(dim, k)
            x = np.full(dim, 1.7) * np.where(np.arange(dim) % 2, -1, 1)
            err = np.sum((comp.apply(x).values - x) ** 2)
            tight = max(tight, abs(err - (1 - 1 / comp.delta) * np.sum(x**2)))
    return {"randk_bias": worst_bias, "randk_var_rel": worst_var, "topk_ratio": worst_ratio, "topk_tight": tight}


def check_compressors() -> CheckResult:
    def body():
        c = compressor_certificates()
        ok = (c["randk_bias"] <= 1e-12 and c["randk_var_rel"] <= 1e-12
              and c["topk_ratio"] <= 1.0 + 1e-12 and c["topk_tight"] <= 1e-12)
        return ok, (f"RandK bias {c['randk_bias']:.1e}, variance rel. err {c['randk_var_rel']:.1e}; "
                    f"TopK max err/bound {c['topk_ratio']:.6f}, all-equal gap {c['topk_tight']:.1e}")

    return _timed(5, "compressor certificates", 5.0, body)


def reduction_cases(n: int):
    full = {"n_workers": 4, "compressor": "identity"}
    return {
        "L-SVRG(b=n,p=1)": lambda o: LSVRG(o, p=1.0, b=n),
        "SARAH(p=1)": lambda o: SARAH(o, p=1.0, b=1),
        "SAGA(b=n)": lambda o: SAGA(o, b=n),
        "SAGA-SARAH(b=n)": lambda o: SAGASARAH(o, b=n),
        "DIANA": lambda o: DIANA(o, **full),
        "MARINA(p=1)": lambda o: MARINA(o, p=1.0, **full),
        "VR-MARINA(p=1)": lambda o: VRMARINA(o, p=1.0, inner_batch=5, **full),
        "EF21": lambda o: EF21(o, **full),
        "Q-L-SVRG": lambda o: QLSVRG(o, p=0.5, **full),
        "PP-L-SVRG(1 worker)": lambda o: PPLSVRG(o, p=0.5, n_workers=1),
    }


def reduction_deviations(K: int = 200, rows: int = 200) -> dict:
    ds = mushrooms_subset(rows)
    obj = LogisticObjective(ds)
    fset = L1Ball(20.0, ds.dim)
    sched = Schedule("convex", K, 2.0)
    ref = run_fw(obj, Deterministic(obj), fset, sched, seed=0).column("f_value")
    out = {}
    for label, make in reduction_cases(ds.n_samples).items():
        tr = run_fw(obj, make(obj), fset, sched, seed=0)
        out[label] = float(np.max(np.abs(tr.column("f_value") - ref)))
    return out


def check_reductions(tol: float = 1e-12) -> CheckResult:
    def body():
        dev = reduction_deviations()
        worst = max(dev.values())
        return worst <= tol, f"{len(dev)} degenerate configurations; max |f - f_det| = {worst:.1e}"

    return _timed(6, "reduction identities", 30.0, body)


def convex_rate(reference_iters: int = 100_000) -> dict:
    ds = mushrooms_subset()
    obj = LogisticObjective(ds)
    fset = L1Ball(20.0, ds.dim)
    f_star = reference_optimum(obj, fset, reference_iters)
    finals = {}
    for K in (200, 400):
        tr = run_fw(obj, Deterministic(obj), fset, Schedule("convex", K, 2.0), seed=0, log_every=K)
        finals[K] = tr.last.f_value
    f_star = min(f_star, *finals.values())
    return {"f_star": f_star, "gap200": finals[200] - f_star, "gap400": finals[400] - f_star}


def check_convex_rate() -> CheckResult:
    def body():
        r = convex_rate()
        ratio = r["gap200"] / r["gap400"] if r["gap400"] > 0 else math.inf
        return 1.5 <= ratio <= 3.0, (f"(f_200 - f*) / (f_400 - f*) = {ratio:.3f} "
                                     f"[{r['gap200']:.3e} / {r['gap400']:.3e}], band [1.5, 3.0]")

    return _timed(7, "convex O(1/K) rate shape", 60.0, body)


def nonconvex_gaps(seeds=range(5)) -> dict:
    ds = mushrooms_subset()
    obj = LogisticObjective(ds)
    fset = L1Ball(20.0, ds.dim)
    n = ds.n_samples
    b = math.ceil(math.sqrt(n))
    out = {100: [], 400: []}
    for seed in seeds:
        for K in (100, 400):
            tr = run_fw(obj, SARAH(obj, p=b / (n + b), b=b), fset, Schedule("nonconvex", K), seed=seed)
            out[K].append(tr.min_gap())
    return out


def check_nonconvex() -> CheckResult:
    def body():
        gaps = nonconvex_gaps()
        g100, g400 = float(np.median(gaps[100])), float(np.median(gaps[400]))
        ratio = g400 / g100
        return ratio <= 0.7, f"median min-gap K=400 / K=100 = {g400:.3e} / {g100:.3e} = {ratio:.3f} <= 0.7"

    return _timed(8, "non-convex gap decay (SARAH)", 60.0, body)


def marina_uplink(rounds: int = 10_000) -> dict:
    ds = w1a_like(n_rows=400)
    obj = LogisticObjective(ds)
    fset = L1Ball(20.0, ds.dim)
    est = MARINA(obj, p=0.1, n_workers=4, compressor="rand_k", k=30)
    sched = Schedule.for_constants("convex", rounds, est.constants())
    run_fw(obj, est, fset, sched, seed=0, log_every=rounds)
    rep = est.bits_report()
    return {"coords": rep["coords_per_worker_round"], "target": 0.1 * ds.dim + 0.9 * 30}


def check_bits() -> CheckResult:
    def body():
        r = marina_uplink()
        rel = abs(r["coords"] - r["target"]) / r["target"]
        return rel <= 0.05, f"mean uplink coords/worker/round {r['coords']:.3f} vs {r['target']:g} ({rel:.2%} off)"

    return _timed(9, "MARINA bits accounting", 30.0, body)


def budget_comparison(seeds=range(5), budget: int = 50, rows: int = 2000, radius: float = 20.0) -> dict:
    ds = w1a_subset(rows)
    n = ds.n_samples
    obj = LogisticObjective(ds)
    fset = L1Ball(radius, ds.dim)
    # deterministic: n for g0 plus n per step
    det = Deterministic(obj)
    K_det = budget - 1
    f_det = run_fw(obj, det, fset, Schedule.for_constants("convex", K_det, det.constants()),
                   seed=0, log_every=max(1, K_det)).last.f_value
    b = math.ceil(math.sqrt(n))
    K_ss = (budget - 1) * n // (2 * b)
    finals = []
    for seed in seeds:
        est = SAGASARAH(obj, b=b)
        tr = run_fw(obj, est, fset, Schedule.for_constants("convex", K_ss, est.constants()),
                    seed=seed, log_every=K_ss)
        assert tr.last.grad_calls <= budget * n
        finals.append(tr.last.f_value)
    return {"det": f_det, "saga_sarah": float(np.median(finals)), "K_saga_sarah": K_ss, "K_det": K_det}


def check_budget() -> CheckResult:
    def body():
        r = budget_comparison()
        diff = r["det"] - r["saga_sarah"]
        return diff >= 1e-4, (f"median f(SAGA-SARAH) {r['saga_sarah']:.6f} vs f(deterministic) {r['det']:.6f}; "
                              f"advantage {diff:.2e} >= 1e-4")

    return _timed(10, "SAGA-SARAH beats deterministic at equal budget", 120.0, body)


def zoja_jaguar_gap(steps: int = 100, tau: float = 1e-8) -> float:
    ds = mushrooms_subset()
    obj = LogisticObjective(ds)
    fset = L1Ball(20.0, ds.dim)
    jag, zo = JAGUAR(obj), ZOJA(obj, tau)
    x = np.zeros(ds.dim)
    g = jag.init(x)
    worst = float(np.max(np.abs(zo.init(x) - g)))
    sched = Schedule.for_constants("convex", steps, jag.constants())
    for k in range(steps):
        x_next = fw_step(x, g, sched(k), fset)
        streams = RoundStreams(42, k)
        g = jag.step(x_next, x, streams)
        gz = zo.step(x_next, x, streams)
        worst = max(worst, float(np.max(np.abs(gz - g))))
        x = x_next
    return worst


def check_zoja() -> CheckResult:
    def body():
        worst = zoja_jaguar_gap()
        return worst <= 1e-5, f"max |g_ZOJA - g_JAGUAR|_inf over 100 steps = {worst:.2e} <= 1e-5"

    return _timed(11, "ZOJA vs JAGUAR consistency", 10.0, body)


CHECKS = (
    check_gradients,
    check_lmo,
    check_unbiasedness,
    check_recursions,
    check_compressors,
    check_reductions,
    check_convex_rate,
    check_nonconvex,
    check_bits,
    check_budget,
    check_zoja,
)


def run_all(only=None):
    results = []
    for i, fn in enumerate(CHECKS, 1):
        if only and i not in only:
            continue
        results.append(fn())
    return results
