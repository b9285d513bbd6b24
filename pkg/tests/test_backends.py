"""The compiled extension and the numpy fallback must agree bit for bit."""

import math

import numpy as np
import pytest

from pdmc import kernels, rng
from pdmc.engine import run_mono
from pdmc.netgen import generate

from conftest import quick_config, random_dyadic_network, trains_equal

pytestmark = pytest.mark.skipif(
    "compiled" not in kernels.available_backends(),
    reason="compiled kernels not built")


def _backends():
    return kernels.get_backend("pure"), kernels.get_backend("compiled")


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_update_tick_bit_identical(dtype):
    pure, comp = _backends()
    n = 5000
    nprng = np.random.default_rng(7)
    u0 = (nprng.random(n) * 20 - 2).astype(dtype)
    i0 = (nprng.random(n) * 40).astype(dtype)
    r0 = (nprng.integers(0, 4, n)).astype(np.int32)
    delivered = (nprng.random(n) * 5).astype(np.float32)
    ext = (nprng.random(n) * 3).astype(dtype)
    args = (0.818730753, 0.990049834, 3.60894e-4, 15.0, 20)
    ua, ia, ra = u0.copy(), i0.copy(), r0.copy()
    ub, ib, rb = u0.copy(), i0.copy(), r0.copy()
    sa = pure.update_tick(ua, ia, ra, delivered, ext, *args)
    sb = comp.update_tick(ub, ib, rb, delivered, ext, *args)
    assert np.array_equal(sa, sb)
    assert np.array_equal(ua, ub)        # bitwise: no FMA, same order
    assert np.array_equal(ia, ib)
    assert np.array_equal(ra, rb)


def test_poisson_tick_bit_identical():
    pure, comp = _backends()
    lam = np.concatenate([np.full(3000, 1.28), np.full(3000, 2.32),
                          np.zeros(1000)])
    exp_neg = np.array([math.exp(-x) for x in lam])
    root = rng.stream_root(3, rng.STREAM_THALAMIC)
    a = np.zeros(lam.size, dtype=np.int32)
    b = np.zeros(lam.size, dtype=np.int32)
    for tick in (0, 1, 99, 12345):
        pure.poisson_tick(root, tick, lam, exp_neg, a)
        comp.poisson_tick(root, tick, lam, exp_neg, b)
        assert np.array_equal(a, b)
    assert a[-1000:].sum() == 0


def test_full_runs_identical_across_backends(default_tables):
    sp, pops, conn = default_tables
    net = generate(sp, pops, conn, scale=0.02, seed=7, n_classes=4)
    for precision in ("f32", "f64"):
        res_p = run_mono(net, quick_config(n_ticks=1200, seed=3, sc=4,
                                           precision=precision, backend="pure"))
        res_c = run_mono(net, quick_config(n_ticks=1200, seed=3, sc=4,
                                           precision=precision,
                                           backend="compiled"))
        assert res_p.spikes.n_events > 0
        assert trains_equal(res_p, res_c)
        assert res_p.synaptic_events == res_c.synaptic_events


@pytest.mark.parametrize("algorithm,kw", [
    ("gmem", {}), ("jit", {"lc": 8}), ("horiz", {"h": 16}), ("pull", {}),
])
def test_dyadic_runs_identical_across_backends(algorithm, kw):
    net, _ = random_dyadic_network(seed=61, n_neurons=80)
    a = run_mono(net, quick_config(algorithm, n_ticks=500, seed=5,
                                   backend="pure", **kw))
    b = run_mono(net, quick_config(algorithm, n_ticks=500, seed=5,
                                   backend="compiled", **kw))
    assert a.spikes.n_events > 0
    assert trains_equal(a, b)


def test_backend_selection_api():
    assert kernels.get_backend("auto").NAME in ("pure", "compiled")
    with pytest.raises(RuntimeError):
        kernels.get_backend("imaginary")
