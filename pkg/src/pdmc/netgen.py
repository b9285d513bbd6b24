"""Network sampling and compact, indexed, interleaved synapse storage.

Synapses are stored as one flat array sorted by (source neuron, delay
bucket). Within each (source, bucket) block the records are split by target
congruence class (target mod n_classes) and interleaved class-major: class c
occupies positions block_start + n_classes*i + c. Every class sequence is
padded to the block's longest class with zero-weight records aimed at a
dedicated sink neuron, so delivery kernels never branch on vacancies.

A per-(neuron, delay-boundary) offset index X gives contiguous record ranges
for any bucket-aligned delay window: X[n][d] is the position of the first
record of neuron n at or beyond boundary d, and X[n][d_max] == X[n+1][0].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import ConfigError
from .params import (AmplitudeException, Coefficients, ConnectivityMatrix,
                     PopulationSpec, SimParams, default_exception,
                     derive_coefficients)

D_MAX = 64                 # delay rows; power of two for mask-based wrap
MAX_TARGET = 1 << 17       # packed record stores the target in 17 bits
_GEN_CHUNK = 4_000_000     # draws regenerated per pass chunk


def round_half_up(x: float) -> int:
    """floor(x + 0.5); the rounding convention for counts and tick grids."""
    return int(math.floor(x + 0.5))


def _is_pow2(x: int) -> bool:
    return x >= 1 and (x & (x - 1)) == 0


@dataclass
class SynapseStore:
    targets: np.ndarray      # uint32[n_records]
    delays: np.ndarray       # uint8[n_records], ticks in [1, D_MAX-1]
    weights: np.ndarray      # float32[n_records], already w_f-scaled
    index: np.ndarray        # uint64[n_neurons, D_MAX+1]
    n_classes: int
    bucket: int
    n_real: int              # non-padding records
    out_degree: np.ndarray   # int64[n_neurons], real synapses per source

    @property
    def n_records(self) -> int:
        return int(self.targets.shape[0])

    @property
    def occupancy(self) -> float:
        return self.n_real / self.n_records if self.n_records else 1.0

    @property
    def n_neurons(self) -> int:
        return int(self.index.shape[0])

    @property
    def sink(self) -> int:
        return self.n_neurons - 1


@dataclass
class Network:
    n_neurons: int                    # includes the sink neuron
    pop_names: list
    pop_bounds: list                  # [(start, end)] aligned with pop_names
    store: SynapseStore
    coeffs: Coefficients
    u_init: np.ndarray                # float32 deviations from u_rest
    seed: int
    scale: float
    sim: SimParams = None
    pops: list = None                 # PopulationSpec list used to generate

    @property
    def sink(self) -> int:
        return self.n_neurons - 1

    def pop_of(self, neuron: int) -> int:
        """Population index of a neuron, or -1 for the sink."""
        for i, (s, e) in enumerate(self.pop_bounds):
            if s <= neuron < e:
                return i
        return -1


def scaled_sizes(pops, scale: float) -> list[int]:
    return [round_half_up(scale * p.n) for p in pops]


def sample_synapse_counts(pops, conn: ConnectivityMatrix, scale: float) -> np.ndarray:
    """Deterministic (rounded-expectation) synapse counts per population pair."""
    if scale <= 0:
        raise ConfigError("scale must be > 0")
    sizes = scaled_sizes(pops, scale)
    k = len(pops)
    counts = np.zeros((k, k), dtype=np.int64)
    for r in range(k):
        for c in range(k):
            counts[r, c] = round_half_up(sizes[r] * sizes[c] * conn.p[r][c])
    return counts


def syns_from(store: SynapseStore, n: int, d_from: int, d_to: int) -> tuple[int, int]:
    """Contiguous record range of neuron n with delays in [max(d_from,1), d_to).

    d_from and d_to must be bucket-aligned boundaries (d_max counts as
    aligned); everything inside the range that is not such a synapse is
    padding.
    """
    if not (0 <= n < store.n_neurons):
        raise IndexError(f"neuron id {n} out of range")
    if not (0 <= d_from < d_to <= D_MAX):
        raise ValueError("need 0 <= d_from < d_to <= d_max")
    for d in (d_from, d_to):
        if d != D_MAX and d % store.bucket != 0:
            raise ValueError(f"boundary {d} not aligned to bucket {store.bucket}")
    return int(store.index[n, d_from]), int(store.index[n, d_to])


class _StoreBuilder:
    """Two-pass (count, then place) builder shared by the in-memory and the
    streaming generation paths. Feeding the same records in the same order
    in both passes yields a fully deterministic layout."""

    def __init__(self, n_neurons: int, n_classes: int, bucket: int):
        if not _is_pow2(n_classes):
            raise ConfigError("n_classes must be a power of two")
        if not _is_pow2(bucket) or bucket > D_MAX:
            raise ConfigError("bucket must be a power of two <= d_max")
        self.n = n_neurons
        self.ncls = n_classes
        self.bucket = bucket
        self.nb = D_MAX // bucket
        self.counts = np.zeros(n_neurons * self.nb * n_classes, dtype=np.int64)
        self._planned = False

    def _keys(self, source, target, delay_ticks):
        block = delay_ticks.astype(np.int64) // self.bucket
        cls = target.astype(np.int64) & (self.ncls - 1)
        return (source.astype(np.int64) * self.nb + block) * self.ncls + cls

    def count(self, source, target, delay_ticks):
        key = self._keys(source, target, delay_ticks)
        self.counts += np.bincount(key, minlength=self.counts.shape[0])

    def plan(self):
        """Freeze block layout; afterwards place() scatters records."""
        per_block = self.counts.reshape(self.n, self.nb, self.ncls)
        longest = per_block.max(axis=2)
        block_len = (longest.astype(np.int64) * self.ncls).reshape(-1)
        self.block_start = np.zeros(self.n * self.nb + 1, dtype=np.int64)
        np.cumsum(block_len, out=self.block_start[1:])
        self.total_slots = int(self.block_start[-1])
        self.n_real = int(self.counts.sum())
        self._out_degree = self.counts.reshape(self.n, -1).sum(axis=1)
        # the per-key counts are no longer needed; reuse the buffer as the
        # placement cursor to halve peak memory at full scale
        self.cursor = self.counts
        self.cursor.fill(0)
        self.counts = None
        self._block_len = block_len
        self._planned = True

    @property
    def occupancy(self) -> float:
        return self.n_real / self.total_slots if self.total_slots else 1.0

    def build_index(self) -> np.ndarray:
        starts = self.block_start[:-1].reshape(self.n, self.nb)
        x = np.empty((self.n, D_MAX + 1), dtype=np.uint64)
        for d in range(D_MAX):
            x[:, d] = starts[:, d // self.bucket]
        row_end = np.empty(self.n, dtype=np.int64)
        row_end[:-1] = starts[1:, 0]
        row_end[-1] = self.total_slots
        x[:, D_MAX] = row_end
        return x

    def alloc_arrays(self):
        sink = self.n - 1
        self.targets = np.full(self.total_slots, sink, dtype=np.uint32)
        self.weights = np.zeros(self.total_slots, dtype=np.float32)
        # Padding records carry the first valid delay of their block so that
        # windowed kernels never compute an out-of-window delivery row.
        pad = np.maximum(np.arange(self.nb) * self.bucket, 1).astype(np.uint8)
        self.delays = np.repeat(np.tile(pad, self.n), self._block_len)

    def place(self, source, target, delay_ticks, weight):
        key = self._keys(source, target, delay_ticks)
        order = np.argsort(key, kind="stable")
        ks = key[order]
        m = ks.shape[0]
        if m == 0:
            return
        run_start = np.flatnonzero(np.r_[True, ks[1:] != ks[:-1]])
        run_len = np.diff(np.r_[run_start, m])
        within = np.arange(m, dtype=np.int64) - np.repeat(run_start, run_len)
        rank = self.cursor[ks] + within
        pos = (self.block_start[ks // self.ncls]
               + rank * self.ncls + (ks & (self.ncls - 1)))
        self.targets[pos] = target[order]
        self.delays[pos] = delay_ticks[order]
        self.weights[pos] = weight[order]
        ends = np.r_[run_start[1:], m] - 1
        self.cursor[ks[ends]] = rank[ends] + 1

    def finish(self) -> SynapseStore:
        return SynapseStore(targets=self.targets, delays=self.delays,
                            weights=self.weights, index=self.build_index(),
                            n_classes=self.ncls, bucket=self.bucket,
                            n_real=self.n_real, out_degree=self._out_degree)


def build_store(source, target, delay_ticks, weight, n_neurons: int,
                n_classes: int, bucket: int) -> SynapseStore:
    """Build the interleaved store from explicit synapse arrays.

    n_neurons must already include the sink (id n_neurons - 1); real
    synapses may not target it.
    """
    source = np.asarray(source, dtype=np.int64)
    target = np.asarray(target, dtype=np.uint32)
    delay_ticks = np.asarray(delay_ticks, dtype=np.uint8)
    weight = np.asarray(weight, dtype=np.float32)
    if delay_ticks.size and (delay_ticks.min() < 1 or delay_ticks.max() > D_MAX - 1):
        raise ConfigError("delays must lie in [1, d_max - 1]")
    if target.size and target.max() >= n_neurons - 1:
        raise ConfigError("real synapses may not target the sink neuron")
    builder = _StoreBuilder(n_neurons, n_classes, bucket)
    for a in range(0, max(source.size, 1), _GEN_CHUNK):
        b = min(a + _GEN_CHUNK, source.size)
        builder.count(source[a:b], target[a:b], delay_ticks[a:b])
    builder.plan()
    builder.alloc_arrays()
    for a in range(0, max(source.size, 1), _GEN_CHUNK):
        b = min(a + _GEN_CHUNK, source.size)
        builder.place(source[a:b], target[a:b], delay_ticks[a:b], weight[a:b])
    return builder.finish()


# ---------------------------------------------------------------------------
# Full network generation. Draws are pure functions of (seed, pair, k), so
# the two builder passes regenerate them instead of storing ~10^8 temporaries.
# Counter layout per synapse k: 8k source, 8k+1 target, 8k+2..3 amplitude,
# 8k+4..5 delay.
# ---------------------------------------------------------------------------

class _PairSpec:
    def __init__(self, seed, r, c, count, src_start, n_src, tgt_start, n_tgt,
                 amp: tuple, dly: tuple, dt, w_f):
        self.root = rng.stream_root(seed, rng.STREAM_SYNAPSES, r * 8 + c)
        self.count = count
        self.src_start, self.n_src = src_start, n_src
        self.tgt_start, self.n_tgt = tgt_start, n_tgt
        self.amp, self.dly = amp, dly
        self.dt, self.w_f = dt, w_f

    def draw(self, k0: int, k1: int, with_weight: bool):
        base = np.arange(k0, k1, dtype=np.uint64) * np.uint64(8)
        src = rng.bounded_array(self.root, base, self.n_src) + self.src_start
        tgt = (rng.bounded_array(self.root, base + np.uint64(1), self.n_tgt)
               + self.tgt_start).astype(np.uint32)
        dly = rng.gauss_array(self.root, base + np.uint64(4), *self.dly)
        ticks = np.clip(np.floor(dly / self.dt + 0.5), 1, D_MAX - 1).astype(np.uint8)
        w = None
        if with_weight:
            amp = rng.gauss_array(self.root, base + np.uint64(2), *self.amp)
            w = (amp * self.w_f).astype(np.float32)
        return src, tgt, ticks, w


def _pair_specs(sp, pops, conn, counts, sizes, starts, seed, exception, w_f):
    specs = []
    for r, pr in enumerate(pops):
        for c, pc in enumerate(pops):
            n_rc = int(counts[r, c])
            if n_rc == 0:
                continue
            amp = (pr.w_amp.mean, pr.w_amp.sd)
            if (exception is not None and pr.name == exception.source
                    and pc.name == exception.target):
                amp = (exception.dist.mean, exception.dist.sd)
            specs.append(_PairSpec(seed, r, c, n_rc, starts[r], sizes[r],
                                   starts[c], sizes[c],
                                   amp, (pr.delay.mean, pr.delay.sd),
                                   sp.dt, w_f))
    return specs


def plan_network(sp: SimParams, pops, conn: ConnectivityMatrix, scale: float,
                 seed: int, n_classes: int = 1, bucket: int = 1,
                 exception: AmplitudeException | None = None) -> _StoreBuilder:
    """Run the counting pass only; enough for occupancy and index layout."""
    if exception is None:
        exception = default_exception()
    counts = sample_synapse_counts(pops, conn, scale)
    sizes = scaled_sizes(pops, scale)
    for r in range(len(pops)):
        row_active = any(conn.p[r][c] > 0 for c in range(len(pops)))
        col_active = any(conn.p[c][r] > 0 for c in range(len(pops)))
        if sizes[r] == 0 and (row_active or col_active):
            raise ConfigError(
                f"population {pops[r].name} scales to zero neurons but has "
                f"nonzero connection probability")
    starts = np.concatenate([[0], np.cumsum(sizes)])[:-1].tolist()
    n_total = int(sum(sizes)) + 1  # plus sink
    if n_total > MAX_TARGET:
        raise ConfigError(
            f"{n_total} neurons exceed the 17-bit target limit ({MAX_TARGET})")
    coeffs = derive_coefficients(sp)
    builder = _StoreBuilder(n_total, n_classes, bucket)
    builder.pair_specs = _pair_specs(sp, pops, conn, counts, sizes, starts,
                                     seed, exception, coeffs.w_f)
    builder.sizes, builder.starts, builder.coeffs = sizes, starts, coeffs
    for spec in builder.pair_specs:
        for k0 in range(0, spec.count, _GEN_CHUNK):
            k1 = min(k0 + _GEN_CHUNK, spec.count)
            src, tgt, ticks, _ = spec.draw(k0, k1, with_weight=False)
            builder.count(src, tgt, ticks)
    builder.plan()
    return builder


def generate(sp: SimParams, pops, conn: ConnectivityMatrix, scale: float,
             seed: int, n_classes: int = 1, bucket: int = 1,
             exception: AmplitudeException | None = None) -> Network:
    """Sample the balanced random network and build its synapse store."""
    builder = plan_network(sp, pops, conn, scale, seed, n_classes, bucket,
                           exception)
    builder.alloc_arrays()
    for spec in builder.pair_specs:
        for k0 in range(0, spec.count, _GEN_CHUNK):
            k1 = min(k0 + _GEN_CHUNK, spec.count)
            src, tgt, ticks, w = spec.draw(k0, k1, with_weight=True)
            builder.place(src, tgt, ticks, w)
    store = builder.finish()

    sizes, starts = builder.sizes, builder.starts
    n_total = builder.n
    u_init = np.zeros(n_total, dtype=np.float32)
    for i, pop in enumerate(pops):
        root = rng.stream_root(seed, rng.STREAM_UINIT, i)
        ctrs = np.arange(sizes[i], dtype=np.uint64) * np.uint64(2)
        draws = rng.gauss_array(root, ctrs, pop.u_init.mean, pop.u_init.sd)
        u_init[starts[i]:starts[i] + sizes[i]] = (draws - sp.u_rest).astype(np.float32)

    bounds = [(starts[i], starts[i] + sizes[i]) for i in range(len(pops))]
    return Network(n_neurons=n_total, pop_names=[p.name for p in pops],
                   pop_bounds=bounds, store=store, coeffs=builder.coeffs,
                   u_init=u_init, seed=seed, scale=scale, sim=sp,
                   pops=list(pops))
