import numpy as np
import pytest

from sfwzoo.core import RoundStreams, ValidationError
from sfwzoo.distributed import DIANA, EF21, MARINA, PPLSVRG, QLSVRG, VRMARINA
from sfwzoo.estimators import expectation
from sfwzoo.objective import Dataset, LogisticObjective
from sfwzoo.sets import L1Ball


def tiny(n=4, dim=2, seed=0):
    rng = np.random.default_rng(seed)
    ds = Dataset.from_dense(rng.standard_normal((n, dim)), np.where(rng.random(n) < 0.5, -1, 1))
    return LogisticObjective(ds)


def drive(est, obj, rounds, seed=0, radius=1.0, check=True):
    fset = L1Ball(radius, obj.dim)
    x = np.zeros(obj.dim)
    g = est.init(x)
    for k in range(rounds):
        xn = 0.9 * x + 0.1 * fset.lmo(g)
        g = est.step(xn, x, RoundStreams(seed, k))
        x = xn
        if check:
            est.check_invariants()
    return x


XC = np.array([0.2, -0.1])
XN = np.array([0.05, 0.3])


def test_worker_shards_average_to_global():
    obj = tiny(n=7, dim=2)
    est = MARINA(obj, p=1.0, n_workers=3)
    x = np.array([0.3, -0.4])
    np.testing.assert_allclose(np.mean([w.full_gradient(x) for w in est.workers], axis=0), obj.full_gradient(x), atol=1e-15)


# ------------------------------------------------------------ exact branches

def test_diana_identity_alpha_one_is_exact():
    obj = tiny()
    est = DIANA(obj, alpha=1.0, n_workers=2)
    est.init(XC)
    np.testing.assert_allclose(est.step(XN, XC, RoundStreams(0, 0)), obj.full_gradient(XN), atol=1e-15)


def test_marina_p_one_and_identity_p_small():
    obj = tiny()
    est = MARINA(obj, p=1.0, n_workers=2, compressor="rand_k", k=1)
    est.init(XC)
    np.testing.assert_allclose(est.step(XN, XC, RoundStreams(0, 0)), obj.full_gradient(XN), atol=1e-15)
    est = MARINA(obj, p=1e-9, n_workers=2)
    x = drive(est, obj, 20)
    np.testing.assert_allclose(est.g, obj.full_gradient(x), atol=1e-14)


def test_ef21_identity_and_single_worker_full_budget():
    obj = tiny()
    est = EF21(obj, n_workers=2, compressor="identity")
    est.init(XC)
    np.testing.assert_allclose(est.step(XN, XC, None), obj.full_gradient(XN), atol=1e-15)
    est = EF21(obj, n_workers=1, compressor="top_k", k=2)
    est.init(XC)
    np.testing.assert_allclose(est.step(XN, XC, None), obj.full_gradient(XN), atol=1e-15)


def test_ef21_geometric_contraction_at_fixed_point():
    obj = tiny(n=6, dim=5)
    est = EF21(obj, n_workers=2, compressor="top_k", k=1)
    est.init(np.zeros(5))
    x = np.full(5, 0.1)
    target = np.array([w.full_gradient(x) for w in est.workers])
    errs = [np.sum((est.g_i - target) ** 2)]
    for _ in range(50):
        est.apply(x, x)
        errs.append(np.sum((est.g_i - target) ** 2))
    errs = np.array(errs)
    assert np.all(errs[1:] <= (1 - 1 / 5) * errs[:-1] + 1e-30)
    assert errs[-1] < 1e-4 * errs[0]


def test_qlsvrg_identity_is_exact_and_anchor_refresh():
    obj = tiny()
    est = QLSVRG(obj, p=0.5, n_workers=2)
    est.init(np.zeros(2))
    np.testing.assert_allclose(est.apply(XN, XC, (False, (None, None))), obj.full_gradient(XN), atol=1e-15)
    est.apply(XN, XC, (True, (None, None)))
    np.testing.assert_array_equal(est.w, XC)


def test_pplsvrg_single_worker_and_p_one():
    obj = tiny()
    est = PPLSVRG(obj, p=0.5, n_workers=1)
    est.init(np.zeros(2))
    np.testing.assert_allclose(est.step(XN, XC, RoundStreams(0, 0)), obj.full_gradient(XN), atol=1e-15)
    est = PPLSVRG(obj, p=1.0, n_workers=2)
    est.init(np.zeros(2))
    g = est.apply(XN, XC, (True, 1))
    w = est.workers[1]
    np.testing.assert_allclose(g, w.full_gradient(XN) - w.full_gradient(XC) + obj.full_gradient(XC), atol=1e-15)


def test_vr_marina_full_inner_batch_matches_marina():
    obj = tiny(n=8, dim=4)
    kw = dict(n_workers=2, compressor="rand_k", k=2)
    a = MARINA(obj, p=0.3, **kw)
    b = VRMARINA(obj, p=0.3, inner_batch=4, **kw)
    xa = drive(a, obj, 30, seed=3)
    xb = drive(b, obj, 30, seed=3)
    np.testing.assert_array_equal(xa, xb)
    np.testing.assert_array_equal(a.g, b.g)


def test_vr_marina_inner_batch_expectation():
    obj = tiny(n=4, dim=2)
    est = VRMARINA(obj, p=1e-300, inner_batch=1, n_workers=2)
    est.init(XC)
    tails = [(q, d) for q, d in est.outcomes() if not d[0]]
    assert len(tails) == 4
    total = sum(q for q, _ in tails)
    mean = sum(q * est.clone().apply(XN, XC, d) for q, d in tails) / total
    want = est.g + obj.full_gradient(XN) - obj.full_gradient(XC)
    np.testing.assert_allclose(mean, want, atol=1e-14)
    with pytest.raises(ValidationError):
        VRMARINA(obj, p=0.5, inner_batch=3, n_workers=2)


# ------------------------------------------------------------ unbiasedness

@pytest.mark.parametrize(
    "make",
    [
        lambda o: DIANA(o, n_workers=2, compressor="rand_k", k=1),
        lambda o: QLSVRG(o, p=0.3, n_workers=2, compressor="rand_k", k=1),
        lambda o: PPLSVRG(o, p=0.3, n_workers=2),
    ],
    ids=["diana", "qlsvrg", "pplsvrg"],
)
def test_unbiased_by_enumeration(make):
    obj = tiny()
    est = make(obj)
    x = drive(est, obj, 3, seed=2)
    np.testing.assert_allclose(expectation(est, XN, x), obj.full_gradient(XN), atol=1e-12)


def test_pplsvrg_pre_anchor_biased_on_refresh():
    obj = tiny()
    est = PPLSVRG(obj, p=1.0, n_workers=2, anchor="pre")
    x = drive(est, obj, 2)
    assert np.max(np.abs(expectation(est, XN, x) - obj.full_gradient(XN))) > 1e-8


# ------------------------------------------------------------ invariants and bits

@pytest.mark.parametrize(
    "make",
    [
        lambda o: DIANA(o, n_workers=3, compressor="rand_k", k=2),
        lambda o: MARINA(o, p=0.2, n_workers=3, compressor="rand_k", k=2),
        lambda o: EF21(o, n_workers=3, compressor="top_k", k=2),
    ],
)
def test_server_worker_consistency(make):
    obj = tiny(n=9, dim=5)
    drive(make(obj), obj, 200)


def test_ef21_bits_per_round():
    obj = tiny(n=10, dim=6)
    est = EF21(obj, n_workers=5, compressor="top_k", k=3)
    drive(est, obj, 7)
    rep = est.bits_report()
    assert rep["init_bits"] == 5 * 6 * 64
    assert rep["per_round_mean"] == 5 * 3 * 96
    assert rep["total_bits"] == rep["init_bits"] + 7 * 5 * 3 * 96


def test_identity_round_bits():
    obj = tiny(n=6, dim=3)
    est = DIANA(obj, n_workers=3)
    drive(est, obj, 4)
    assert est.bits_report()["per_round_mean"] == 3 * 3 * 64
    assert est.downlink_bits == 4 * 3 * 3 * 64


def test_marina_uplink_coordinates():
    obj = tiny(n=8, dim=10)
    est = MARINA(obj, p=0.2, n_workers=4, compressor="rand_k", k=2)
    drive(est, obj, 10_000, check=False)
    assert 3.42 <= est.bits_report()["coords_per_worker_round"] <= 3.78


def test_bits_report_needs_a_round():
    est = MARINA(tiny(), p=0.5, n_workers=2)
    est.init(np.zeros(2))
    with pytest.raises(ValidationError):
        est.bits_report()


def test_compressor_requirements():
    obj = tiny()
    with pytest.raises(ValidationError):
        EF21(obj, n_workers=2, compressor="rand_k", k=1)
    with pytest.raises(ValidationError):
        DIANA(obj, n_workers=2, compressor="top_k", k=1)
    with pytest.raises(ValidationError):
        PPLSVRG(obj, p=0.5, n_workers=2, compressor="rand_k", k=1)
    with pytest.raises(ValidationError):
        DIANA(obj, alpha=1.5, n_workers=2)
    with pytest.raises(ValidationError):
        MARINA(obj, p=0.5, n_workers=5)


def test_diana_default_alpha():
    est = DIANA(tiny(n=4, dim=4), n_workers=2, compressor="rand_k", k=1)
    assert est.alpha == pytest.approx(1 / 4)
