"""Spike-transfer algorithms over the indexed synapse store.

Three production strategies plus a receiver-driven reference oracle:

* gmem  - deliver every synapse of a spiking neuron immediately into a full
          d_max-row wrap-around buffer.
* jit   - keep spikers queued for d_max-1 ticks and deliver only the synapses
          whose current is consumed next tick, into per-spiker lanes.
* horiz - deliver a horizon of h future ticks per pass into an h-row buffer;
          a spiker is visited d_max/h times.
* pull  - every neuron scans its incoming synapses against the spike
          history; small-scale testing oracle.

All algorithms schedule a synapse (delay d) of a neuron spiking at tick s so
that its current is consumed by the neuron update of tick s + d.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, QueueOverflowError
from .netgen import D_MAX, SynapseStore, _is_pow2

ALGORITHMS = ("gmem", "jit", "horiz", "pull")
DEFAULT_QUEUE_CAPACITY = 4096


@dataclass
class TransferConfig:
    algorithm: str = "gmem"
    h: int = 16              # horizon length (horiz only)
    sc: int = 1              # synapse classes; must equal the store's
    lc: int = 16             # lane count (jit only)
    su: int = 1              # synapse unroll hint, recorded only
    uw: int = 1              # update width hint, recorded only
    capacity: int = DEFAULT_QUEUE_CAPACITY

    def validate(self, store: SynapseStore) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown transfer algorithm {self.algorithm!r}")
        if self.sc != store.n_classes:
            raise ConfigError(
                f"sc={self.sc} does not match the store's n_classes={store.n_classes}")
        if self.algorithm == "horiz":
            if not _is_pow2(self.h) or D_MAX % self.h != 0:
                raise ConfigError("h must be a power of two dividing d_max")
            if store.bucket != 1:
                raise ConfigError("horiz requires a store built with bucket 1")
        if self.algorithm == "jit":
            if not _is_pow2(self.lc):
                raise ConfigError("lc must be a power of two")
            if store.bucket != 1:
                raise ConfigError("jit requires a store built with bucket 1")
        if not _is_pow2(self.capacity):
            raise ConfigError("queue capacity must be a power of two")


class CurrentBuffer:
    """Wrap-around delivery matrix; row t & (rows-1) is consumed at tick t
    and zeroed on consumption."""

    def __init__(self, n_neurons: int, n_rows: int = D_MAX, debug: bool = False):
        if not _is_pow2(n_rows):
            raise ConfigError("buffer rows must be a power of two")
        self.w = np.zeros((n_rows, n_neurons), dtype=np.float32)
        self.mask = n_rows - 1
        self.debug = debug
        self._consumed_tick = -1

    def take_row(self, t: int, out: np.ndarray) -> None:
        row = self.w[t & self.mask]
        out[:] = row
        row.fill(0.0)
        self._consumed_tick = t

    def check_writes_live(self, t: int, arrival_ticks: np.ndarray) -> None:
        """Debug wrap-safety: arrivals must land strictly between the last
        consumed row and its reuse horizon."""
        if arrival_ticks.size == 0:
            return
        lo, hi = self._consumed_tick + 1, self._consumed_tick + self.w.shape[0]
        if arrival_ticks.min() < lo or arrival_ticks.max() > hi:
            raise AssertionError(
                f"delivery outside live window [{lo}, {hi}]: "
                f"[{arrival_ticks.min()}, {arrival_ticks.max()}]")

    @property
    def pending_total(self) -> float:
        return float(self.w.sum(dtype=np.float64))


class SpikeQueue:
    """Ring of d_max slots; slot t & 63 holds the ids that spiked at tick t.

    Storage is one circular array; the total enqueued across the live window
    is bounded by `capacity` and overflow is a structured error.
    """

    def __init__(self, capacity: int = DEFAULT_QUEUE_CAPACITY):
        if not _is_pow2(capacity):
            raise ConfigError("queue capacity must be a power of two")
        self.capacity = capacity
        self.ids = np.zeros(capacity, dtype=np.uint32)
        self.start = np.zeros(D_MAX, dtype=np.int64)
        self.count = np.zeros(D_MAX, dtype=np.int64)
        self.mask = capacity - 1
        self._write = 0
        self._live = 0

    def enqueue(self, t: int, spiked: np.ndarray) -> None:
        slot = t & (D_MAX - 1)
        self._live -= int(self.count[slot])
        self.count[slot] = 0
        m = int(spiked.shape[0])
        if self._live + m > self.capacity:
            raise QueueOverflowError(tick=t, capacity=self.capacity)
        self.start[slot] = self._write
        first = self._write & self.mask
        end = first + m
        if end <= self.capacity:
            self.ids[first:end] = spiked
        else:
            split = self.capacity - first
            self.ids[first:] = spiked[:split]
            self.ids[:end - self.capacity] = spiked[split:]
        self.count[slot] = m
        self._write = (self._write + m) & self.mask
        self._live += m

    def slot_ids(self, slot: int) -> np.ndarray:
        idx = (self.start[slot] + np.arange(self.count[slot])) & self.mask
        return self.ids[idx]


class LaneSet:
    """lc per-neuron accumulators; one spiking neuron writes one lane."""

    def __init__(self, n_neurons: int, lc: int):
        self.lanes = np.zeros((lc, n_neurons), dtype=np.float32)

    @property
    def pending_total(self) -> float:
        return float(self.lanes.sum(dtype=np.float64))


def gmem_transfer(store: SynapseStore, spiked: np.ndarray, t: int,
                  buf: CurrentBuffer, backend=None) -> None:
    """Deliver all synapses of the spikers of tick t into buf rows t+d."""
    k = backend or kernels.get_backend()
    if buf.debug and spiked.size:
        recs = np.concatenate([np.arange(store.index[n, 0], store.index[n, D_MAX],
                                         dtype=np.int64) for n in spiked])
        buf.check_writes_live(t, t + store.delays[recs].astype(np.int64))
    k.gmem_deliver(store.index, store.targets, store.delays, store.weights,
                   spiked, buf.w, t)


def jit_transfer(store: SynapseStore, queue: SpikeQueue, t: int,
                 lanes: LaneSet, out_next: np.ndarray, backend=None) -> None:
    """Deliver next-tick synapses of queued spikers; fills `out_next` with
    the lane-summed current consumed at tick t + 1 and clears the lanes."""
    k = backend or kernels.get_backend()
    k.jit_pass(store.index, store.targets, store.delays, store.weights,
               queue.ids, queue.start, queue.count, queue.mask,
               lanes.lanes, t)
    k.lane_collapse(lanes.lanes, out_next)


def horiz_transfer(store: SynapseStore, queue: SpikeQueue, t: int,
                   buf: CurrentBuffer, h: int, backend=None) -> None:
    """Deliver d_max/h delay windows of queued spikers into the h-row buffer."""
    k = backend or kernels.get_backend()
    if buf.debug:
        for i in range(D_MAX // h):
            rt = (t - h * i) & (D_MAX - 1)
            ids = queue.slot_ids(rt)
            d_from, d_to = h * i + 1, min(h * i + 1 + h, D_MAX)
            if ids.size:
                recs = np.concatenate([np.arange(store.index[n, d_from],
                                                 store.index[n, d_to],
                                                 dtype=np.int64) for n in ids])
                arrivals = (t - h * i) + store.delays[recs].astype(np.int64)
                buf.check_writes_live(t, arrivals)
    k.horiz_pass(store.index, store.targets, store.delays, store.weights,
                 queue.ids, queue.start, queue.count, queue.mask,
                 buf.w, t, h)


class PullState:
    """Target-sorted copy of the real synapses plus a spike-flag history."""

    def __init__(self, store: SynapseStore):
        sink = store.sink
        real = np.flatnonzero(store.targets != sink)
        perm = np.argsort(store.targets[real], kind="stable")
        order = real[perm]
        n = store.n_neurons
        # source of each record: position within the per-neuron row ranges
        src = np.searchsorted(store.index[:, 0].astype(np.int64), real,
                              side="right") - 1
        self.in_start = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(store.targets[real], minlength=n),
                  out=self.in_start[1:])
        self.in_src = src[perm].astype(np.uint32)
        self.in_dly = store.delays[order]
        self.in_w = store.weights[order]
        self.history = np.zeros((D_MAX, n), dtype=np.uint8)

    def record(self, t: int, spiked: np.ndarray) -> None:
        row = self.history[t & (D_MAX - 1)]
        row.fill(0)
        row[spiked] = 1


def pull_oracle(pull: PullState, t: int, out: np.ndarray, backend=None) -> None:
    """Receiver-driven current for tick t from the spike history."""
    k = backend or kernels.get_backend()
    k.pull_gather(pull.in_start, pull.in_src, pull.in_dly, pull.in_w,
                  pull.history, t, out)
