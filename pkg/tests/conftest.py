"""Shared test fixtures: toy network builders and brute-force oracles."""

from __future__ import annotations

import math

import numpy as np
import pytest

from pdmc import rng
from pdmc.engine import EngineConfig
from pdmc.netgen import D_MAX, Network, build_store
from pdmc.params import Coefficients, Gaussian, PopulationSpec, SimParams, default_params
from pdmc.transfer import (CurrentBuffer, LaneSet, PullState, SpikeQueue,
                           TransferConfig, gmem_transfer, horiz_transfer,
                           jit_transfer, pull_oracle)

# Exactly representable per-tick dynamics: every coefficient is dyadic, so
# f32 and f64 state evolve identically and accumulation order cannot matter.
DYADIC_COEFFS = Coefficients(p11=0.5, p22=0.5, p21=0.25, w_f=1.0,
                             u_thr_dev=1.0, ref_ticks=5, w_thalamic=0.25)


def toy_network(synapses, n_neurons, coeffs=None, u_init=None,
                n_classes=1, bucket=1, sim=None, k_thalamic=1500,
                seed=0) -> tuple[Network, list]:
    """Network from an explicit synapse list [(src, tgt, delay, weight)].

    Returns (net, synapse list) with one population spanning all non-sink
    neurons; the sink is appended automatically.
    """
    syn = list(synapses)
    src = np.array([s[0] for s in syn], dtype=np.int64)
    tgt = np.array([s[1] for s in syn], dtype=np.uint32)
    dly = np.array([s[2] for s in syn], dtype=np.uint8)
    w = np.array([s[3] for s in syn], dtype=np.float32)
    store = build_store(src, tgt, dly, w, n_neurons + 1, n_classes, bucket)
    if sim is None:
        sim, _, _ = default_params()
    if coeffs is None:
        coeffs = DYADIC_COEFFS
    if u_init is None:
        u_init = np.zeros(n_neurons + 1, dtype=np.float32)
    else:
        u_init = np.concatenate([np.asarray(u_init, dtype=np.float32), [0.0]])
    pop = PopulationSpec(index=1, name="T/exc", n=n_neurons,
                         k_thalamic=k_thalamic, u_init=Gaussian(0.0, 1.0),
                         w_amp=Gaussian(1.0, 0.0), delay=Gaussian(1.0, 0.0))
    net = Network(n_neurons=n_neurons + 1, pop_names=[pop.name],
                  pop_bounds=[(0, n_neurons)], store=store, coeffs=coeffs,
                  u_init=u_init, seed=seed, scale=1.0, sim=sim, pops=[pop])
    return net, syn


def random_dyadic_synapses(stream: rng.Stream, n_neurons, n_synapses,
                           max_delay=D_MAX - 1):
    """Synapses with weights that are exact multiples of 1/64 in [-2, 2]."""
    out = []
    for _ in range(n_synapses):
        src = stream.next_below(n_neurons)
        tgt = stream.next_below(n_neurons)
        d = 1 + stream.next_below(max_delay)
        mag = (1 + stream.next_below(128)) / 64.0
        sign = 1.0 if stream.next_below(4) else -1.0  # 25% inhibitory
        out.append((src, tgt, d, sign * mag))
    return out


def random_dyadic_network(seed, n_neurons=200, synapses_per_neuron=30,
                          n_classes=1, bucket=1):
    """Self-active test network with exactly representable arithmetic."""
    stream = rng.Stream(seed, rng.STREAM_TEST)
    syn = random_dyadic_synapses(stream, n_neurons,
                                 n_neurons * synapses_per_neuron)
    u_init = np.array([stream.next_below(256) / 64.0 for _ in range(n_neurons)],
                      dtype=np.float32)  # dyadic in [0, 4)
    return toy_network(syn, n_neurons, coeffs=DYADIC_COEFFS, u_init=u_init,
                       n_classes=n_classes, bucket=bucket, seed=seed)


def dense_delivery_oracle(synapses, spike_ticks, spike_neurons, n_ticks,
                          n_neurons):
    """Replay every (spike, synapse) pair into a dense schedule.

    Independent of the indexed store: delivery for tick t is the sum of the
    weights of all synapses (src, tgt, d, w) with a spike of src at t - d.
    """
    by_src = {}
    for s, t_, d, w in synapses:
        by_src.setdefault(s, []).append((t_, d, w))
    sched = np.zeros((n_ticks + D_MAX + 1, n_neurons), dtype=np.float64)
    for tick, neuron in zip(spike_ticks, spike_neurons):
        for tgt, d, w in by_src.get(int(neuron), ()):
            sched[tick + d, tgt] += w
    return sched[:n_ticks]


def drive_transfer(net, spike_schedule, n_ticks, algorithm, h=16, lc=4,
                   capacity=4096, backend=None, debug=False):
    """Run only the transfer machinery against a forced spike schedule.

    Returns the delivered-current matrix [n_ticks, n_neurons] (f32) exactly
    as the engine would consume it.
    """
    store = net.store
    n = net.n_neurons
    delivered = np.zeros((n_ticks, n), dtype=np.float32)
    out = np.zeros(n, dtype=np.float32)
    if algorithm == "gmem":
        buf = CurrentBuffer(n, D_MAX, debug=debug)
    elif algorithm == "horiz":
        buf = CurrentBuffer(n, h, debug=debug)
        queue = SpikeQueue(capacity)
    elif algorithm == "jit":
        queue = SpikeQueue(capacity)
        lanes = LaneSet(n, lc)
        pending = np.zeros(n, dtype=np.float32)
    elif algorithm == "pull":
        pull = PullState(store)
    for t in range(n_ticks):
        if algorithm in ("gmem", "horiz"):
            buf.take_row(t, out)
            delivered[t] = out
        elif algorithm == "jit":
            delivered[t] = pending
        else:
            pull_oracle(pull, t, out, backend)
            delivered[t] = out
        spiked = np.asarray(spike_schedule.get(t, []), dtype=np.uint32)
        if algorithm == "gmem":
            gmem_transfer(store, spiked, t, buf, backend)
        elif algorithm == "horiz":
            queue.enqueue(t, spiked)
            horiz_transfer(store, queue, t, buf, h, backend)
        elif algorithm == "jit":
            queue.enqueue(t, spiked)
            jit_transfer(store, queue, t, lanes, pending, backend)
        else:
            pull.record(t, spiked)
    return delivered


def trains_equal(a, b) -> bool:
    return (np.array_equal(a.spikes.ticks, b.spikes.ticks)
            and np.array_equal(a.spikes.neurons, b.spikes.neurons))


def quick_config(algorithm="gmem", n_ticks=1000, seed=3, sc=1, **kw) -> EngineConfig:
    tc_kw = {k: kw.pop(k) for k in ("h", "lc", "capacity") if k in kw}
    return EngineConfig(transfer=TransferConfig(algorithm=algorithm, sc=sc, **tc_kw),
                        n_ticks=n_ticks, warmup_ticks=0, seed=seed, **kw)


@pytest.fixture(scope="session")
def default_tables():
    return default_params()
