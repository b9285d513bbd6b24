import numpy as np
import pytest

from pdmc import rng
from pdmc.errors import ConfigError, QueueOverflowError
from pdmc.netgen import D_MAX
from pdmc.transfer import (CurrentBuffer, LaneSet, SpikeQueue, TransferConfig,
                           gmem_transfer, jit_transfer)

from conftest import (dense_delivery_oracle, drive_transfer,
                      random_dyadic_synapses, toy_network)


def test_gmem_single_synapse_example():
    """One spike at t=10 over (target 5, delay 3, weight 2.0)."""
    net, _ = toy_network([(0, 5, 3, 2.0)], n_neurons=8)
    buf = CurrentBuffer(net.n_neurons, D_MAX)
    gmem_transfer(net.store, np.array([0], dtype=np.uint32), 10, buf)
    assert buf.w[13, 5] == 2.0
    assert buf.w.sum() == 2.0


def test_gmem_multapse_contributions_sum():
    net, _ = toy_network([(0, 5, 3, 2.0), (0, 5, 3, 0.5)], n_neurons=8)
    buf = CurrentBuffer(net.n_neurons, D_MAX)
    gmem_transfer(net.store, np.array([0], dtype=np.uint32), 0, buf)
    assert buf.w[3, 5] == 2.5


@pytest.mark.parametrize("algorithm,kw", [
    ("gmem", {}),
    ("jit", {"lc": 4}),
    ("horiz", {"h": 8}),
    ("horiz", {"h": 16}),
    ("pull", {}),
])
def test_delivery_matches_dense_oracle(algorithm, kw):
    """Crafted 50-neuron net, 100 ticks of forced spikes: the delivered
    currents equal a brute-force replay of every (spike, synapse) pair."""
    stream = rng.Stream(5, rng.STREAM_TEST)
    syn = random_dyadic_synapses(stream, 50, 600)
    net, syn_list = toy_network(syn, n_neurons=50, n_classes=2)
    schedule = {t: [stream.next_below(50) for _ in range(stream.next_below(4))]
                for t in range(100)}
    schedule = {t: sorted(set(ids)) for t, ids in schedule.items() if ids}
    delivered = drive_transfer(net, schedule, 100, algorithm, **kw)
    ticks = [t for t in schedule for _ in schedule[t]]
    neurons = [n for t in schedule for n in schedule[t]]
    expect = dense_delivery_oracle(syn_list, ticks, neurons, 100, net.n_neurons)
    assert np.allclose(delivered.astype(np.float64), expect, atol=0)


def test_all_algorithms_deliver_identically():
    stream = rng.Stream(6, rng.STREAM_TEST)
    syn = random_dyadic_synapses(stream, 40, 500)
    net, _ = toy_network(syn, n_neurons=40, n_classes=4)
    schedule = {t: sorted({stream.next_below(40) for _ in range(3)})
                for t in range(0, 90, 2)}
    base = drive_transfer(net, schedule, 120, "gmem")
    for algorithm, kw in (("jit", {"lc": 4}), ("horiz", {"h": 8}),
                          ("horiz", {"h": 64}), ("pull", {})):
        got = drive_transfer(net, schedule, 120, algorithm, **kw)
        assert np.array_equal(got, base), algorithm


def test_jit_slot_arithmetic_worked_example():
    """A spike at t=76 with a delay-26 synapse is consumed at tick 102."""
    net, _ = toy_network([(0, 1, 26, 1.5)], n_neurons=4)
    delivered = drive_transfer(net, {76: [0]}, 110, "jit", lc=2)
    nz = np.argwhere(delivered != 0)
    assert nz.tolist() == [[102, 1]]
    assert delivered[102, 1] == 1.5


def test_gmem_and_horiz_agree_on_consumption_tick():
    net, _ = toy_network([(0, 1, 26, 1.5)], n_neurons=4)
    for algorithm, kw in (("gmem", {}), ("horiz", {"h": 16}), ("pull", {})):
        delivered = drive_transfer(net, {76: [0]}, 110, algorithm, **kw)
        assert np.argwhere(delivered != 0).tolist() == [[102, 1]], algorithm


def test_horiz_covers_every_delay_exactly_once():
    syn = [(0, 1, d, float(d)) for d in range(1, D_MAX)]
    net, _ = toy_network(syn, n_neurons=3)
    for h in (8, 16, 32, 64):
        delivered = drive_transfer(net, {0: [0]}, 70, "horiz", h=h)
        for d in range(1, D_MAX):
            assert delivered[d, 1] == float(d), (h, d)
        assert delivered.sum() == sum(range(1, D_MAX))


def test_horiz_equals_gmem_when_horizon_is_dmax():
    stream = rng.Stream(8, rng.STREAM_TEST)
    syn = random_dyadic_synapses(stream, 30, 300)
    net, _ = toy_network(syn, n_neurons=30)
    schedule = {t: [t % 30] for t in range(80)}
    a = drive_transfer(net, schedule, 100, "gmem")
    b = drive_transfer(net, schedule, 100, "horiz", h=64)
    assert np.array_equal(a, b)


def test_empty_queue_delivers_zero():
    net, _ = toy_network([(0, 1, 5, 1.0)], n_neurons=4)
    delivered = drive_transfer(net, {}, 80, "jit", lc=2)
    assert not delivered.any()


def test_conservation_exact_and_f32():
    """Every (spike, synapse) pair with arrival inside the run is delivered
    exactly once; dyadic weights make the f32 sums exact."""
    stream = rng.Stream(9, rng.STREAM_TEST)
    syn = random_dyadic_synapses(stream, 40, 500)
    net, syn_list = toy_network(syn, n_neurons=40, n_classes=2)
    schedule = {t: sorted({stream.next_below(40) for _ in range(2)})
                for t in range(0, 150, 3)}
    n_ticks = 160
    by_src = {}
    for s, tgt, d, w in syn_list:
        by_src.setdefault(s, []).append((d, w))
    injected = sum(w for t, ids in schedule.items() for n in ids
                   for d, w in by_src.get(n, ()) if t + d < n_ticks)
    for algorithm, kw in (("gmem", {}), ("jit", {"lc": 4}),
                          ("horiz", {"h": 16}), ("pull", {})):
        delivered = drive_transfer(net, schedule, n_ticks, algorithm, **kw)
        total = float(delivered.astype(np.float64).sum())
        assert total == pytest.approx(injected, abs=1e-9), algorithm
    # non-dyadic weights at f32: relative 1e-6 conservation
    syn_f = [(s, t, d, w * 0.1003) for s, t, d, w in syn_list]
    netf, _ = toy_network(syn_f, n_neurons=40, n_classes=2)
    injected_f = injected * 0.1003
    delivered = drive_transfer(netf, schedule, n_ticks, "gmem")
    total = float(delivered.astype(np.float64).sum())
    assert total == pytest.approx(injected_f, rel=1e-6)


def test_queue_overflow_is_structured_error():
    q = SpikeQueue(capacity=16)
    q.enqueue(0, np.arange(10, dtype=np.uint32))
    q.enqueue(1, np.arange(6, dtype=np.uint32))   # exactly at capacity
    with pytest.raises(QueueOverflowError) as exc_info:
        q.enqueue(2, np.arange(1, dtype=np.uint32))
    assert exc_info.value.tick == 2
    assert exc_info.value.capacity == 16


def test_queue_slot_reuse_after_window():
    q = SpikeQueue(capacity=64)
    q.enqueue(3, np.array([7, 8], dtype=np.uint32))
    assert q.slot_ids(3).tolist() == [7, 8]
    # the same slot is cleared and rewritten one full window later
    q.enqueue(3 + D_MAX, np.array([9], dtype=np.uint32))
    assert q.slot_ids(3).tolist() == [9]


def test_queue_wraps_storage():
    q = SpikeQueue(capacity=8)
    q.enqueue(0, np.array([1, 2, 3], dtype=np.uint32))
    q.enqueue(64, np.array([4, 5, 6], dtype=np.uint32))   # frees slot 0 first
    q.enqueue(65, np.array([7, 8], dtype=np.uint32))
    assert q.slot_ids(0).tolist() == [4, 5, 6]
    assert q.slot_ids(1).tolist() == [7, 8]


def test_wrap_safety_debug_mode_accepts_valid_runs():
    stream = rng.Stream(10, rng.STREAM_TEST)
    syn = random_dyadic_synapses(stream, 20, 200)
    net, _ = toy_network(syn, n_neurons=20)
    schedule = {t: [t % 20] for t in range(50)}
    drive_transfer(net, schedule, 60, "gmem", debug=True)
    drive_transfer(net, schedule, 60, "horiz", h=8, debug=True)


def test_lane_round_robin_is_deterministic():
    stream = rng.Stream(12, rng.STREAM_TEST)
    syn = random_dyadic_synapses(stream, 25, 250)
    net, _ = toy_network(syn, n_neurons=25)
    schedule = {t: sorted({stream.next_below(25) for _ in range(5)})
                for t in range(40)}
    a = drive_transfer(net, schedule, 60, "jit", lc=4)
    b = drive_transfer(net, schedule, 60, "jit", lc=4)
    assert np.array_equal(a, b)


def test_transfer_config_validation():
    net, _ = toy_network([(0, 1, 2, 1.0)], n_neurons=4, n_classes=2)
    TransferConfig(algorithm="gmem", sc=2).validate(net.store)
    with pytest.raises(ConfigError, match="sc="):
        TransferConfig(algorithm="gmem", sc=4).validate(net.store)
    with pytest.raises(ConfigError, match="power of two dividing"):
        TransferConfig(algorithm="horiz", sc=2, h=24).validate(net.store)
    with pytest.raises(ConfigError, match="unknown transfer algorithm"):
        TransferConfig(algorithm="warp", sc=2).validate(net.store)
    bucketed, _ = toy_network([(0, 1, 2, 1.0)], n_neurons=4, bucket=8)
    with pytest.raises(ConfigError, match="bucket 1"):
        TransferConfig(algorithm="jit", sc=1).validate(bucketed.store)
    with pytest.raises(ConfigError, match="bucket 1"):
        TransferConfig(algorithm="horiz", sc=1, h=8).validate(bucketed.store)
    TransferConfig(algorithm="gmem", sc=1).validate(bucketed.store)


def test_gmem_accepts_bucketed_store():
    stream = rng.Stream(13, rng.STREAM_TEST)
    syn = random_dyadic_synapses(stream, 20, 200)
    net1, _ = toy_network(syn, n_neurons=20, bucket=1)
    net8, _ = toy_network(syn, n_neurons=20, bucket=8)
    schedule = {t: [t % 20] for t in range(40)}
    a = drive_transfer(net1, schedule, 80, "gmem")
    b = drive_transfer(net8, schedule, 80, "gmem")
    assert np.array_equal(a, b)
