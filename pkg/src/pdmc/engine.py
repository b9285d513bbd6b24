"""Tick orchestration: deliver -> update -> enqueue/transfer.

`run_mono` drives everything from one thread. `run_multi` splits the work
into an update worker and a transfer worker connected by two bounded FIFO
channels (spiked-id batches terminated by a DONE sentinel one way; delivered
current or completion acks the other), with a hard per-tick barrier so both
modes produce identical spike trains.
"""

from __future__ import annotations

import queue
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, DeadlockError, NetworkFormatError, PdmcError
from .netgen import D_MAX, Network
from .neuron import NeuronState, ThalamicSource, dc_current_vector, update_tick_current
from .transfer import (CurrentBuffer, LaneSet, PullState, SpikeQueue,
                       TransferConfig, gmem_transfer, horiz_transfer,
                       jit_transfer, pull_oracle)

SPIKE_MAGIC = b"PDSPK1\x00"
_DONE = None
_STOP = "stop"


@dataclass
class EngineConfig:
    exec_mode: str = "mono"                  # mono | multi
    transfer: TransferConfig = field(default_factory=TransferConfig)
    precision: str = "f32"                   # f32 | f64
    n_ticks: int = 100_000
    warmup_ticks: int = 10_000
    record: bool = True
    seed: int = 0
    thalamic_mode: str = "poisson"           # poisson | dc
    backend: str = "auto"
    channel_depth: int = 512
    channel_timeout: float = 120.0

    def validate(self, net: Network) -> None:
        if self.exec_mode not in ("mono", "multi"):
            raise ConfigError(f"unknown exec mode {self.exec_mode!r}")
        if self.precision not in ("f32", "f64"):
            raise ConfigError(f"unknown precision {self.precision!r}")
        if self.thalamic_mode not in ("poisson", "dc"):
            raise ConfigError(f"unknown thalamic mode {self.thalamic_mode!r}")
        if not (self.n_ticks >= self.warmup_ticks >= 0):
            raise ConfigError("need n_ticks >= warmup_ticks >= 0")
        self.transfer.validate(net.store)


@dataclass
class SpikeTrain:
    ticks: np.ndarray          # uint32, ascending
    neurons: np.ndarray        # uint32
    n_ticks: int
    dt: float
    warmup_ticks: int
    pop_bounds: list
    pop_names: list

    @property
    def n_events(self) -> int:
        return int(self.ticks.shape[0])


@dataclass
class RunResult:
    spikes: SpikeTrain
    wall_seconds: float
    synaptic_events: int
    rtf: float
    backend: str
    mean_spiking_per_tick: float


class _TransferSession:
    """Algorithm-specific state plus the two per-tick hooks."""

    def __init__(self, net: Network, cfg: EngineConfig, backend):
        self.net = net
        self.cfg = cfg
        self.backend = backend
        store = net.store
        algo = cfg.transfer.algorithm
        self.algo = algo
        n = net.n_neurons
        self.delivered = np.zeros(n, dtype=np.float32)
        if algo == "gmem":
            self.buf = CurrentBuffer(n, D_MAX)
        elif algo == "horiz":
            self.buf = CurrentBuffer(n, cfg.transfer.h)
            self.queue = SpikeQueue(cfg.transfer.capacity)
        elif algo == "jit":
            self.queue = SpikeQueue(cfg.transfer.capacity)
            self.lanes = LaneSet(n, cfg.transfer.lc)
            self.pending = np.zeros(n, dtype=np.float32)
        elif algo == "pull":
            self.pull = PullState(store)

    def take_delivered(self, t: int) -> np.ndarray:
        if self.algo in ("gmem", "horiz"):
            self.buf.take_row(t, self.delivered)
        elif self.algo == "jit":
            self.delivered[:] = self.pending
        elif self.algo == "pull":
            pull_oracle(self.pull, t, self.delivered, self.backend)
        return self.delivered

    def transfer(self, t: int, spiked: np.ndarray) -> None:
        store = self.net.store
        if self.algo == "gmem":
            gmem_transfer(store, spiked, t, self.buf, self.backend)
        elif self.algo == "horiz":
            self.queue.enqueue(t, spiked)
            horiz_transfer(store, self.queue, t, self.buf, self.cfg.transfer.h,
                           self.backend)
        elif self.algo == "jit":
            self.queue.enqueue(t, spiked)
            jit_transfer(store, self.queue, t, self.lanes, self.pending,
                         self.backend)
        elif self.algo == "pull":
            self.pull.record(t, spiked)


class _Recorder:
    def __init__(self, enabled: bool, out_degree: np.ndarray):
        self.enabled = enabled
        self.t_parts, self.n_parts = [], []
        self.events = 0
        self.spike_count = 0
        self.out_degree = out_degree

    def add(self, t: int, spiked: np.ndarray) -> None:
        self.events += int(self.out_degree[spiked].sum())
        self.spike_count += spiked.shape[0]
        if self.enabled and spiked.shape[0]:
            self.t_parts.append(np.full(spiked.shape[0], t, dtype=np.uint32))
            self.n_parts.append(spiked.copy())

    def train(self, net: Network, cfg: EngineConfig) -> SpikeTrain:
        ticks = (np.concatenate(self.t_parts) if self.t_parts
                 else np.empty(0, dtype=np.uint32))
        neurons = (np.concatenate(self.n_parts) if self.n_parts
                   else np.empty(0, dtype=np.uint32))
        return SpikeTrain(ticks=ticks, neurons=neurons, n_ticks=cfg.n_ticks,
                          dt=net.sim.dt, warmup_ticks=cfg.warmup_ticks,
                          pop_bounds=list(net.pop_bounds),
                          pop_names=list(net.pop_names))


def _external_current(net: Network, cfg: EngineConfig):
    """Returns a callable tick -> state-precision external current vector."""
    dtype = np.float32 if cfg.precision == "f32" else np.float64
    if cfg.thalamic_mode == "dc":
        const = np.ascontiguousarray(dc_current_vector(net), dtype=dtype)
        return lambda t: const
    thal = ThalamicSource.for_network(net, cfg.seed)
    backend = kernels.get_backend(cfg.backend)
    w_th = dtype(net.coeffs.w_thalamic)

    def draw(t: int):
        counts = thal.draw(t, backend)
        return counts.astype(dtype) * w_th

    return draw


def run_mono(net: Network, cfg: EngineConfig) -> RunResult:
    cfg.validate(net)
    backend = kernels.get_backend(cfg.backend)
    state = NeuronState.init(net.u_init, cfg.precision)
    session = _TransferSession(net, cfg, backend)
    ext_of = _external_current(net, cfg)
    rec = _Recorder(cfg.record, net.store.out_degree)

    t0 = time.perf_counter()
    for t in range(cfg.n_ticks):
        delivered = session.take_delivered(t)
        ext = ext_of(t)
        spiked = update_tick_current(state, net.coeffs, delivered, ext, backend)
        rec.add(t, spiked)
        session.transfer(t, spiked)
    wall = time.perf_counter() - t0
    return _result(net, cfg, rec, wall, backend)


def _result(net, cfg, rec, wall, backend) -> RunResult:
    bio_seconds = cfg.n_ticks * net.sim.dt / 1000.0
    return RunResult(spikes=rec.train(net, cfg), wall_seconds=wall,
                     synaptic_events=rec.events,
                     rtf=wall / bio_seconds if bio_seconds else float("inf"),
                     backend=backend.NAME,
                     mean_spiking_per_tick=rec.spike_count / max(cfg.n_ticks, 1))


class _Channel:
    """Bounded FIFO with failure propagation and deadlock detection."""

    _POLL = 0.05

    def __init__(self, depth: int, timeout: float, failure: list):
        self.q = queue.Queue(maxsize=depth)
        self.timeout = timeout
        self.failure = failure

    def put(self, item) -> None:
        deadline = time.monotonic() + self.timeout
        while True:
            try:
                self.q.put(item, timeout=self._POLL)
                return
            except queue.Full:
                if self.failure:
                    raise self.failure[0]
                if time.monotonic() > deadline:
                    raise DeadlockError("channel put timed out")

    def get(self):
        deadline = time.monotonic() + self.timeout
        while True:
            try:
                return self.q.get(timeout=self._POLL)
            except queue.Empty:
                if self.failure:
                    raise self.failure[0]
                if time.monotonic() > deadline:
                    raise DeadlockError("channel get timed out")


def run_multi(net: Network, cfg: EngineConfig) -> RunResult:
    """Two-worker pipelined execution with per-tick barrier semantics.

    The transfer worker owns the delivery structures. For gmem the buffer is
    shared (the update worker consumes row t directly) and the reply channel
    carries completion acks; for jit/horiz/pull the reply channel carries the
    per-tick delivered-current batch, mirroring the two-kernel formulation.
    """
    cfg.validate(net)
    backend = kernels.get_backend(cfg.backend)
    state = NeuronState.init(net.u_init, cfg.precision)
    session = _TransferSession(net, cfg, backend)
    ext_of = _external_current(net, cfg)
    rec = _Recorder(cfg.record, net.store.out_degree)

    failure: list = []
    to_transfer = _Channel(cfg.channel_depth, cfg.channel_timeout, failure)
    to_update = _Channel(cfg.channel_depth, cfg.channel_timeout, failure)
    gmem_mode = session.algo == "gmem"

    def transfer_worker():
        try:
            t = 0
            while True:
                if not gmem_mode:
                    if t >= cfg.n_ticks:
                        break
                    to_update.put(session.take_delivered(t).copy())
                batch = []
                while True:
                    msg = to_transfer.get()
                    if isinstance(msg, str) and msg == _STOP:
                        return
                    if msg is _DONE:
                        break
                    batch.append(msg)
                spiked = (np.concatenate(batch) if batch
                          else np.empty(0, dtype=np.uint32))
                session.transfer(t, spiked)
                if gmem_mode:
                    to_update.put(True)
                t += 1
        except PdmcError as e:
            failure.append(e)
        except Exception as e:  # pragma: no cover - defensive
            failure.append(PdmcError(f"transfer worker died: {e}"))

    worker = threading.Thread(target=transfer_worker, name="pdmc-transfer",
                              daemon=True)
    worker.start()
    t0 = time.perf_counter()
    try:
        for t in range(cfg.n_ticks):
            if gmem_mode:
                delivered = session.take_delivered(t)
            else:
                delivered = to_update.get()
            ext = ext_of(t)
            spiked = update_tick_current(state, net.coeffs, delivered, ext,
                                         backend)
            rec.add(t, spiked)
            if spiked.shape[0]:
                to_transfer.put(spiked)
            to_transfer.put(_DONE)
            if gmem_mode:
                to_update.get()  # completion ack for tick t
        if failure:
            raise failure[0]
    finally:
        try:
            to_transfer.q.put(_STOP, timeout=1.0)
        except queue.Full:
            pass
        worker.join(timeout=5.0)
    wall = time.perf_counter() - t0
    if failure:
        raise failure[0]
    return _result(net, cfg, rec, wall, backend)


def run(net: Network, cfg: EngineConfig) -> RunResult:
    return run_multi(net, cfg) if cfg.exec_mode == "multi" else run_mono(net, cfg)


def count_events(net: Network, spikes) -> int:
    """Sum of real (non-padding) out-degrees over all spike events."""
    neurons = spikes.neurons if isinstance(spikes, SpikeTrain) else np.asarray(spikes)
    if neurons.size == 0:
        return 0
    return int(net.store.out_degree[neurons].sum())


# ---------------------------------------------------------------------------
# Spike files: PDSPK1 binary (u32 tick, u32 neuron records) or tab text.
# ---------------------------------------------------------------------------

def write_spikes(path, train: SpikeTrain, text: bool = False) -> None:
    if text:
        with open(path, "w", encoding="utf-8") as fh:
            for t, n in zip(train.ticks, train.neurons):
                fh.write(f"{t}\t{n}\n")
        return
    with open(path, "wb") as fh:
        fh.write(SPIKE_MAGIC)
        recs = np.empty((train.n_events, 2), dtype="<u4")
        recs[:, 0] = train.ticks
        recs[:, 1] = train.neurons
        recs.tofile(fh)


def read_spikes(path):
    """Returns (ticks, neurons) uint32 arrays; accepts PDSPK1 or tab text."""
    with open(path, "rb") as fh:
        head = fh.read(7)
        if head == SPIKE_MAGIC:
            raw = np.fromfile(fh, dtype="<u4")
            if raw.size % 2:
                raise NetworkFormatError("unexpected end of file in spike records")
            recs = raw.reshape(-1, 2)
            ticks, neurons = recs[:, 0].copy(), recs[:, 1].copy()
        else:
            fh.seek(0)
            try:
                text = fh.read().decode("utf-8")
            except UnicodeDecodeError:
                raise NetworkFormatError("not a spike file") from None
            ticks_l, neurons_l = [], []
            for lineno, line in enumerate(text.splitlines(), start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise NetworkFormatError(
                        f"spike text line {lineno}: expected 'tick<TAB>neuron'")
                ticks_l.append(int(parts[0]))
                neurons_l.append(int(parts[1]))
            ticks = np.asarray(ticks_l, dtype=np.uint32)
            neurons = np.asarray(neurons_l, dtype=np.uint32)
    if ticks.size and np.any(np.diff(ticks.astype(np.int64)) < 0):
        raise NetworkFormatError("spike records are not tick-ascending")
    return ticks, neurons
