"""Pure numpy implementations of the per-tick hot kernels.

The compiled backend (`_core.pyx`) mirrors these functions operation for
operation; both must produce bit-identical results for the inversion-path
Poisson draws and for all f32/f64 state arithmetic (no fused multiply-adds,
same evaluation order).
"""

from __future__ import annotations

import numpy as np

NAME = "pure"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_NEG53 = 2.0 ** -53
_POISSON_MAX_K = 150
_POISSON_CUTOVER = 10.0
D_MAX = 64


def update_tick(u, i_syn, r, delivered, ext, p11, p22, p21, thr, ref_ticks):
    """Advance one tick in place; returns spiking neuron ids ascending.

    `delivered` is the f32 transfer-buffer row consumed this tick; `ext` is
    the external (thalamic) current already in state precision.
    """
    dt = u.dtype.type
    c11, c22, c21, cthr = dt(p11), dt(p22), dt(p21), dt(thr)
    i_syn[:] = (c11 * i_syn + ext) + delivered.astype(u.dtype)
    u_next = c22 * u + c21 * i_syn
    refr = r > 0
    spike = (u_next >= cthr) & ~refr
    u_next[refr] = 0
    u_next[spike] = 0
    u[:] = u_next
    r[refr] -= 1
    r[spike] = ref_ticks
    return np.flatnonzero(spike).astype(np.uint32)


def gmem_deliver(index, targets, delays, weights, spiked, buf, t):
    """Deliver every synapse of every spiked neuron into the full buffer."""
    n_neurons = buf.shape[1]
    parts = [np.arange(index[n, 0], index[n, D_MAX], dtype=np.int64)
             for n in spiked]
    if not parts:
        return
    recs = np.concatenate(parts)
    rows = (t + delays[recs].astype(np.int64)) & (D_MAX - 1)
    flat = rows * n_neurons + targets[recs]
    np.add.at(buf.reshape(-1), flat, weights[recs])


def horiz_pass(index, targets, delays, weights, q_ids, q_start, q_count,
               q_mask, buf, t, h):
    """One tick of horizon transfer: d_max/h windows into an h-row buffer."""
    n_neurons = buf.shape[1]
    recs_all = []
    for i in range(D_MAX // h):
        rt = (t - h * i) & (D_MAX - 1)
        d_from = h * i + 1
        d_to = min(d_from + h, D_MAX)
        cnt = q_count[rt]
        if cnt == 0:
            continue
        slots = (q_start[rt] + np.arange(cnt, dtype=np.int64)) & q_mask
        for n in q_ids[slots]:
            recs_all.append(np.arange(index[n, d_from], index[n, d_to],
                                      dtype=np.int64))
    if not recs_all:
        return
    recs = np.concatenate(recs_all)
    # h*i is a multiple of h, so the target row is (t + d) mod h in every pass
    rows = (t + delays[recs].astype(np.int64)) & (h - 1)
    flat = rows * n_neurons + targets[recs]
    np.add.at(buf.reshape(-1), flat, weights[recs])


def jit_pass(index, targets, delays, weights, q_ids, q_start, q_count,
             q_mask, lanes, t):
    """Deliver next-tick synapses of all queued neurons into their lanes."""
    n_lanes, n_neurons = lanes.shape
    recs_all, lane_all = [], []
    lane_idx = 0
    for rt in range(D_MAX):
        delay = (t - rt) & (D_MAX - 1)
        if delay >= D_MAX - 1:
            continue
        d = delay + 1
        cnt = q_count[rt]
        if cnt == 0:
            continue
        slots = (q_start[rt] + np.arange(cnt, dtype=np.int64)) & q_mask
        for n in q_ids[slots]:
            part = np.arange(index[n, d], index[n, d + 1], dtype=np.int64)
            if part.size:
                recs_all.append(part)
                lane_all.append(np.full(part.size, lane_idx % n_lanes,
                                        dtype=np.int64))
            lane_idx += 1
    if not recs_all:
        return
    recs = np.concatenate(recs_all)
    lane = np.concatenate(lane_all)
    flat = lane * n_neurons + targets[recs]
    np.add.at(lanes.reshape(-1), flat, weights[recs])


def lane_collapse(lanes, out):
    """Sum lanes into `out` in fixed lane order, then clear them."""
    out[:] = lanes[0]
    for k in range(1, lanes.shape[0]):
        out += lanes[k]
    lanes.fill(0)


def pull_gather(in_start, in_src, in_dly, in_w, history, t, out):
    """Receiver-driven delivery: out[i] = sum of w over incoming synapses
    whose source spiked delay ticks ago."""
    n = out.shape[0]
    flags = history[(t - in_dly.astype(np.int64)) & (D_MAX - 1), in_src]
    vals = np.where(flags != 0, in_w, np.float32(0.0))
    seg = np.repeat(np.arange(n, dtype=np.int64), np.diff(in_start))
    out[:] = np.bincount(seg, weights=vals.astype(np.float64),
                         minlength=n).astype(np.float32)


def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def poisson_tick(root, tick, lam, exp_neg_lam, out):
    """Per-neuron Poisson draws for one tick; counters 2*(tick*n + i)."""
    n = lam.shape[0]
    ctr = (np.uint64(tick) * np.uint64(n)
           + np.arange(n, dtype=np.uint64)) * np.uint64(2)
    x = _mix64(np.uint64(root) + (ctr + np.uint64(1)) * _GOLDEN)
    u = (x >> np.uint64(11)).astype(np.float64) * _TWO_NEG53

    small = lam < _POISSON_CUTOVER
    p = exp_neg_lam.copy()
    cdf = p.copy()
    k = np.zeros(n, dtype=np.int32)
    active = small & (u > cdf)
    it = 0
    while active.any() and it < _POISSON_MAX_K:
        it += 1
        k[active] += 1
        p[active] *= lam[active] / k[active]
        cdf[active] += p[active]
        active &= u > cdf
    out[:] = k

    big = ~small
    if big.any():
        x1 = _mix64(np.uint64(root) + (ctr[big] + np.uint64(1)) * _GOLDEN)
        x2 = _mix64(np.uint64(root) + (ctr[big] + np.uint64(2)) * _GOLDEN)
        u1 = ((x1 >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_NEG53
        u2 = (x2 >> np.uint64(11)).astype(np.float64) * _TWO_NEG53
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        draw = np.floor(lam[big] + np.sqrt(lam[big]) * z + 0.5)
        out[big] = np.maximum(draw, 0.0).astype(np.int32)
