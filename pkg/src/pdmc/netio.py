"""PDNET1 network files: little-endian, packed 8-byte synapse records.

Layout:
  magic  "PDNET1\\0" (7 bytes), version u8
  header n_neurons u32, n_pops u8, n_classes u16, bucket u16, d_max u16,
         seed u64, scale f64
  per population: name_len u8, name bytes (utf-8), start u32, end u32
  u_init f32[n_neurons]                (deviations from u_rest)
  index  u64[n_neurons * (d_max + 1)]  (row-major)
  synapses u64[index[-1, -1]], each packed as
         bits 0..16 target, 17..22 delay, 23..31 zero, 32..63 weight f32 bits
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import NetworkFormatError
from .netgen import D_MAX, MAX_TARGET, Network, SynapseStore
from .params import default_params, derive_coefficients

MAGIC = b"PDNET1\x00"
VERSION = 1
_HEADER = struct.Struct("<IBHHHQd")
_CHUNK = 1 << 25


def write_network(net: Network, path) -> None:
    if net.n_neurons > MAX_TARGET:
        raise NetworkFormatError(
            f"{net.n_neurons} neurons exceed the 17-bit target field")
    store = net.store
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([VERSION]))
        fh.write(_HEADER.pack(net.n_neurons, len(net.pop_names),
                              store.n_classes, store.bucket, D_MAX,
                              net.seed, net.scale))
        for name, (start, end) in zip(net.pop_names, net.pop_bounds):
            raw = name.encode("utf-8")
            fh.write(bytes([len(raw)]))
            fh.write(raw)
            fh.write(struct.pack("<II", start, end))
        net.u_init.astype("<f4").tofile(fh)
        store.index.astype("<u8").tofile(fh)
        for a in range(0, store.n_records, _CHUNK):
            b = min(a + _CHUNK, store.n_records)
            packed = store.targets[a:b].astype(np.uint64)
            packed |= store.delays[a:b].astype(np.uint64) << np.uint64(17)
            packed |= (store.weights[a:b].view(np.uint32).astype(np.uint64)
                       << np.uint64(32))
            packed.astype("<u8").tofile(fh)


class _Reader:
    def __init__(self, fh):
        self.fh = fh

    def take(self, n: int, what: str) -> bytes:
        data = self.fh.read(n)
        if len(data) != n:
            raise NetworkFormatError(f"unexpected end of file reading {what}")
        return data

    def array(self, dtype, count: int, what: str) -> np.ndarray:
        arr = np.fromfile(self.fh, dtype=dtype, count=count)
        if arr.shape[0] != count:
            raise NetworkFormatError(f"unexpected end of file reading {what}")
        return arr


def read_network(path, sim=None, pops=None, validate: bool = True) -> Network:
    """Load a PDNET1 file.

    Coefficients are rebuilt from `sim` (default parameter set when omitted);
    a network generated under a custom config must be loaded with it.
    """
    if sim is None or pops is None:
        dsp, dpops, _ = default_params()
        sim = sim or dsp
        pops = pops or dpops
    with open(path, "rb") as fh:
        r = _Reader(fh)
        if r.take(7, "magic") != MAGIC:
            raise NetworkFormatError("not a network file (bad magic)")
        version = r.take(1, "version")[0]
        if version != VERSION:
            raise NetworkFormatError(f"unsupported network file version {version}")
        (n_neurons, n_pops, n_classes, bucket, d_max, seed,
         scale) = _HEADER.unpack(r.take(_HEADER.size, "header"))
        if d_max != D_MAX:
            raise NetworkFormatError(f"unsupported d_max {d_max}")
        names, bounds = [], []
        for _ in range(n_pops):
            ln = r.take(1, "population name")[0]
            names.append(r.take(ln, "population name").decode("utf-8"))
            start, end = struct.unpack("<II", r.take(8, "population range"))
            bounds.append((start, end))
        u_init = r.array("<f4", n_neurons, "u_init")
        index = r.array("<u8", n_neurons * (D_MAX + 1), "index")
        index = index.reshape(n_neurons, D_MAX + 1)
        n_records = int(index[-1, -1]) if n_neurons else 0
        packed = r.array("<u8", n_records, "synapse records")
        if fh.read(1):
            raise NetworkFormatError("trailing bytes after synapse records")

    targets = (packed & np.uint64(MAX_TARGET - 1)).astype(np.uint32)
    delays = ((packed >> np.uint64(17)) & np.uint64(0x3F)).astype(np.uint8)
    spare = (packed >> np.uint64(23)) & np.uint64(0x1FF)
    weights = (packed >> np.uint64(32)).astype(np.uint32).view(np.float32)
    del packed

    sink = n_neurons - 1
    real = targets != sink
    n_real = int(np.count_nonzero(real))
    out_degree = np.zeros(n_neurons, dtype=np.int64)
    row_starts = index[:, 0].astype(np.int64)
    for a in range(0, n_records, _CHUNK):
        b = min(a + _CHUNK, n_records)
        src = np.searchsorted(row_starts, np.arange(a, b), side="right") - 1
        out_degree += np.bincount(src[real[a:b]], minlength=n_neurons)

    store = SynapseStore(targets=targets, delays=delays, weights=weights,
                         index=index, n_classes=n_classes, bucket=bucket,
                         n_real=n_real, out_degree=out_degree)
    if validate:
        if np.any(spare != 0):
            raise NetworkFormatError("nonzero spare bits in synapse records")
        _validate_store(store, bounds)

    net = Network(n_neurons=n_neurons, pop_names=names, pop_bounds=bounds,
                  store=store, coeffs=derive_coefficients(sim),
                  u_init=u_init, seed=seed, scale=scale, sim=sim,
                  pops=list(pops))
    return net


def _validate_store(store: SynapseStore, bounds) -> None:
    index = store.index.astype(np.int64)
    n = store.n_neurons
    if n and index[0, 0] != 0:
        raise NetworkFormatError("index does not start at record 0")
    if np.any(np.diff(index, axis=1) < 0):
        raise NetworkFormatError("index rows are not monotonically non-decreasing")
    if np.any(index[:-1, D_MAX] != index[1:, 0]):
        raise NetworkFormatError("index rows are not contiguous across neurons")
    if store.n_records:
        if store.delays.min() < 1 or store.delays.max() > D_MAX - 1:
            raise NetworkFormatError("synapse delay outside [1, d_max - 1]")
    sink = store.sink
    ncls, bucket = store.n_classes, store.bucket
    nb = D_MAX // bucket
    block_starts = index[:, ::bucket][:, :nb].reshape(-1)
    block_bounds = np.append(block_starts, store.n_records)
    if np.any(np.diff(block_bounds) % ncls != 0):
        raise NetworkFormatError("block length not a multiple of n_classes")
    for a in range(0, store.n_records, _CHUNK):
        b = min(a + _CHUNK, store.n_records)
        pos = np.arange(a, b)
        blk = np.searchsorted(block_bounds, pos, side="right") - 1
        cls = (pos - block_bounds[blk]) % ncls
        real = store.targets[a:b] != sink
        if np.any((store.targets[a:b][real] & np.uint32(ncls - 1))
                  != cls[real].astype(np.uint32)):
            raise NetworkFormatError("interleaved class position violated")
        in_block_delay = store.delays[a:b].astype(np.int64) // bucket
        if np.any(in_block_delay != blk % nb):
            raise NetworkFormatError("synapse delay outside its block's range")
        pad = ~real
        if np.any(store.weights[a:b][pad] != 0.0):
            raise NetworkFormatError("padding record with nonzero weight")
    if n and store.index[-1, D_MAX] != store.index[-1, 0]:
        raise NetworkFormatError("sink neuron has outgoing records")
