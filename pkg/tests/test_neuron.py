import math

import numpy as np
import pytest

from pdmc import kernels
from pdmc.errors import ConfigError
from pdmc.neuron import (NeuronState, ThalamicSource, dc_approximation,
                         dc_current_vector, update_tick, update_tick_current)
from pdmc.params import default_params, derive_coefficients
from pdmc.netgen import generate

from conftest import DYADIC_COEFFS, toy_network


@pytest.fixture(scope="module")
def coeffs(default_tables):
    return derive_coefficients(default_tables[0])


def _zeros(n):
    return np.zeros(n, dtype=np.float32)


def test_free_decay_step(coeffs):
    state = NeuronState.init(np.array([10.0], dtype=np.float32), "f64")
    spiked = update_tick(state, coeffs, _zeros(1), np.zeros(1, dtype=np.int32))
    assert spiked.size == 0
    assert state.u[0] == pytest.approx(coeffs.p22 * 10.0, rel=1e-12)
    assert state.u[0] == pytest.approx(9.90, abs=5e-3)


def test_refractory_branch_ignores_input(coeffs):
    state = NeuronState.init(np.array([12.0], dtype=np.float32), "f64")
    state.r[0] = 5
    spiked = update_tick(state, coeffs, np.array([1e9], dtype=np.float32),
                         np.zeros(1, dtype=np.int32))
    assert spiked.size == 0
    assert state.u[0] == 0.0
    assert state.r[0] == 4
    # presynaptic current still integrates while refractory
    assert state.i_syn[0] > 0.0


def test_spike_resets_and_sets_refractory(coeffs):
    # p22*u + p21*i >= 15 triggers a spike, reset to 0, 20 refractory ticks
    state = NeuronState.init(np.array([20.0], dtype=np.float32), "f64")
    spiked = update_tick(state, coeffs, _zeros(1), np.zeros(1, dtype=np.int32))
    assert spiked.tolist() == [0]
    assert state.u[0] == 0.0
    assert state.r[0] == 20


def test_spiked_ids_ascending(coeffs):
    u = np.array([20.0, 1.0, 30.0, 25.0], dtype=np.float32)
    state = NeuronState.init(u, "f32")
    spiked = update_tick(state, coeffs, _zeros(4), np.zeros(4, dtype=np.int32))
    assert spiked.tolist() == [0, 2, 3]


def test_geometric_decay_property(coeffs):
    for precision, rel in (("f64", 1e-12), ("f32", 1e-5)):
        state = NeuronState.init(np.array([5.0], dtype=np.float32), precision)
        state.i_syn[:] = 3.0
        u0, i0 = 5.0, 3.0
        for t in range(1, 50):
            update_tick(state, coeffs, _zeros(1), np.zeros(1, dtype=np.int32))
            assert state.i_syn[0] == pytest.approx(i0 * coeffs.p11 ** t, rel=rel)
        # membrane decays geometrically once the current has died away
        state2 = NeuronState.init(np.array([5.0], dtype=np.float32), precision)
        for t in range(1, 50):
            update_tick(state2, coeffs, _zeros(1), np.zeros(1, dtype=np.int32))
            assert state2.u[0] == pytest.approx(u0 * coeffs.p22 ** t, rel=rel)


def test_no_spike_while_refractory_and_min_gap(coeffs):
    state = NeuronState.init(np.array([0.0], dtype=np.float32), "f64")
    drive = np.array([1e6], dtype=np.float32)
    spike_ticks = []
    for t in range(200):
        if update_tick(state, coeffs, drive, np.zeros(1, dtype=np.int32)).size:
            spike_ticks.append(t)
    gaps = np.diff(spike_ticks)
    assert len(spike_ticks) > 3
    assert gaps.min() >= coeffs.ref_ticks + 1


def test_update_deterministic(coeffs):
    u = np.linspace(-5, 20, 100).astype(np.float32)
    a = NeuronState.init(u, "f32")
    b = NeuronState.init(u, "f32")
    d = np.random.default_rng(0).random(100).astype(np.float32)
    ext = np.zeros(100, dtype=np.int32)
    sa = update_tick(a, coeffs, d, ext)
    sb = update_tick(b, coeffs, d, ext)
    assert np.array_equal(sa, sb)
    assert np.array_equal(a.u, b.u)


def test_length_mismatch_raises(coeffs):
    state = NeuronState.init(np.zeros(4, dtype=np.float32), "f32")
    with pytest.raises(ValueError):
        update_tick(state, coeffs, _zeros(3), np.zeros(4, dtype=np.int32))
    with pytest.raises(ValueError):
        update_tick(state, coeffs, _zeros(4), np.zeros(3, dtype=np.int32))


def test_f32_f64_agree_on_dyadic_dynamics():
    """With dyadic coefficients, weights, and states, both precisions spike
    identically (all arithmetic is exact in f32)."""
    co = DYADIC_COEFFS
    u0 = np.array([1.25, 0.5, 0.75, 1.5], dtype=np.float32)
    trains = {}
    for precision in ("f32", "f64"):
        state = NeuronState.init(u0, precision)
        delivered = np.array([0.25, 0.5, 0.125, 0.0], dtype=np.float32)
        ticks = []
        for t in range(100):
            s = update_tick_current(state, co, delivered,
                                    np.zeros(4, dtype=state.u.dtype))
            ticks.extend((t, int(n)) for n in s)
        trains[precision] = ticks
    assert trains["f32"] == trains["f64"]


def test_thalamic_rates_per_population(default_tables):
    sp, pops, conn = default_tables
    net = generate(sp, pops, conn, scale=0.01, seed=3)
    src = ThalamicSource.for_network(net, seed=0)
    s0, _ = net.pop_bounds[0]
    assert src.lam[s0] == pytest.approx(8 * 1600 * 0.0001)   # L23/exc: 1.28
    s2, _ = net.pop_bounds[2]
    assert src.lam[s2] == pytest.approx(8 * 2100 * 0.0001)   # L4/exc: 1.68
    assert src.lam[net.sink] == 0.0


def test_thalamic_empirical_mean(default_tables):
    """10^6 tick draws for one L23/exc-rate neuron stay within 1% of 1.28."""
    lam = np.array([1.28, 0.0], dtype=np.float64)
    src = ThalamicSource(lam, seed=11)
    total = np.zeros(2, dtype=np.int64)
    draws_per_tick = 100
    lam_many = np.full(draws_per_tick, 1.28)
    src_many = ThalamicSource(lam_many, seed=11)
    acc = 0
    n_ticks = 10_000
    for t in range(n_ticks):
        acc += int(src_many.draw(t).sum())
    mean = acc / (n_ticks * draws_per_tick)
    assert abs(mean - 1.28) < 1.28 * 0.01
    # zero-rate neuron never receives anything
    for t in range(100):
        assert src.draw(t)[1] == 0


def test_thalamic_deterministic_given_seed_and_tick():
    src_a = ThalamicSource(np.full(50, 1.3), seed=5)
    src_b = ThalamicSource(np.full(50, 1.3), seed=5)
    assert np.array_equal(src_a.draw(123).copy(), src_b.draw(123).copy())
    assert not np.array_equal(src_a.draw(123).copy(), src_a.draw(124).copy())


def test_dc_approximation_values(default_tables, coeffs):
    sp, pops, _ = default_tables
    assert dc_approximation(coeffs, sp, 0) == 0.0
    zero_rate = sp.__class__(**{**sp.__dict__, "v_th": 0.0})
    assert dc_approximation(coeffs, zero_rate, 1600) == 0.0
    expect = 8 * 1600 * (0.1 / 1000.0) * 0.15 * coeffs.w_f
    assert dc_approximation(coeffs, sp, 1600) == pytest.approx(expect)


def test_dc_matches_poisson_long_run_mean(default_tables, coeffs):
    """Monte-Carlo: mean per-tick injected current agrees within 1%."""
    sp, pops, _ = default_tables
    k = pops[0].k_thalamic
    lam = np.full(1000, sp.v_th * k * sp.dt / 1000.0)
    src = ThalamicSource(lam, seed=9)
    total_counts = 0
    n_ticks = 100
    for t in range(n_ticks):
        total_counts += int(src.draw(t).sum())
    poisson_mean = total_counts / (n_ticks * 1000) * coeffs.w_thalamic
    dc = dc_approximation(coeffs, sp, k)
    assert dc == pytest.approx(poisson_mean, rel=0.01)


def test_dc_current_vector_covers_sink(default_tables):
    sp, pops, conn = default_tables
    net = generate(sp, pops, conn, scale=0.01, seed=3)
    vec = dc_current_vector(net)
    assert vec[net.sink] == 0.0
    assert (vec[:net.sink] > 0).all()
