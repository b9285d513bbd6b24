# cython: language_level=3
"""Compiled per-tick kernels; operation-for-operation mirror of _pure.py.

Evaluation order matches the numpy fallback exactly and the build disables
FMA contraction, so both backends produce bit-identical simulations (the
normal-approximation Poisson branch, unused at default rates, is the one
documented exception since libm and numpy transcendentals may differ in the
last ulp).
"""

import numpy as np

cimport cython
from libc.math cimport cos, exp, floor, log, sqrt

NAME = "compiled"

cdef extern from *:
    """
    static const double PDMC_PI = 3.14159265358979323846;
    """
    double PDMC_PI

ctypedef unsigned long long u64
ctypedef fused real:
    float
    double

cdef u64 GOLDEN = 0x9E3779B97F4A7C15ULL
cdef u64 M1 = 0xBF58476D1CE4E5B9ULL
cdef u64 M2 = 0x94D049BB133111EBULL
cdef double TWO_NEG53 = 1.0 / 9007199254740992.0
cdef int D_MAX = 64
cdef int POISSON_MAX_K = 150
cdef double POISSON_CUTOVER = 10.0


cdef inline u64 mix64(u64 z) nogil:
    z = (z ^ (z >> 30)) * M1
    z = (z ^ (z >> 27)) * M2
    return z ^ (z >> 31)


cdef inline u64 raw(u64 root, u64 counter) nogil:
    return mix64(root + (counter + 1) * GOLDEN)


@cython.boundscheck(False)
@cython.wraparound(False)
def update_tick(real[::1] u, real[::1] i_syn, int[::1] r,
                const float[::1] delivered, const real[::1] ext,
                double p11, double p22, double p21,
                double thr, int ref_ticks):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t k, m = 0
    cdef real c11 = <real>p11, c22 = <real>p22, c21 = <real>p21
    cdef real cthr = <real>thr
    cdef real x
    spiked_arr = np.empty(n, dtype=np.uint32)
    cdef unsigned int[::1] spiked = spiked_arr
    for k in range(n):
        i_syn[k] = (c11 * i_syn[k] + ext[k]) + <real>delivered[k]
        if r[k] > 0:
            u[k] = 0
            r[k] -= 1
        else:
            x = c22 * u[k] + c21 * i_syn[k]
            if x >= cthr:
                u[k] = 0
                r[k] = ref_ticks
                spiked[m] = <unsigned int>k
                m += 1
            else:
                u[k] = x
    return spiked_arr[:m].copy()


@cython.boundscheck(False)
@cython.wraparound(False)
def gmem_deliver(const u64[:, ::1] index,
                 const unsigned int[::1] targets,
                 const unsigned char[::1] delays,
                 const float[::1] weights,
                 const unsigned int[::1] spiked,
                 float[:, ::1] buf, long long t):
    cdef Py_ssize_t s, o, o0, o1
    cdef unsigned int n
    cdef Py_ssize_t row
    for s in range(spiked.shape[0]):
        n = spiked[s]
        o0 = <Py_ssize_t>index[n, 0]
        o1 = <Py_ssize_t>index[n, D_MAX]
        for o in range(o0, o1):
            row = <Py_ssize_t>((t + delays[o]) & (D_MAX - 1))
            buf[row, targets[o]] += weights[o]


@cython.boundscheck(False)
@cython.wraparound(False)
def horiz_pass(const u64[:, ::1] index,
               const unsigned int[::1] targets,
               const unsigned char[::1] delays,
               const float[::1] weights,
               const unsigned int[::1] q_ids,
               const long long[::1] q_start,
               const long long[::1] q_count,
               long long q_mask,
               float[:, ::1] buf, long long t, int h):
    cdef int i, n_pass = D_MAX // h
    cdef int d_from, d_to
    cdef long long rt, j
    cdef unsigned int n
    cdef Py_ssize_t o, o0, o1, row
    for i in range(n_pass):
        rt = (t - h * i) & (D_MAX - 1)
        d_from = h * i + 1
        d_to = d_from + h
        if d_to > D_MAX:
            d_to = D_MAX
        for j in range(q_count[rt]):
            n = q_ids[(q_start[rt] + j) & q_mask]
            o0 = <Py_ssize_t>index[n, d_from]
            o1 = <Py_ssize_t>index[n, d_to]
            for o in range(o0, o1):
                row = <Py_ssize_t>((t + delays[o]) & (h - 1))
                buf[row, targets[o]] += weights[o]


@cython.boundscheck(False)
@cython.wraparound(False)
def jit_pass(const u64[:, ::1] index,
             const unsigned int[::1] targets,
             const unsigned char[::1] delays,
             const float[::1] weights,
             const unsigned int[::1] q_ids,
             const long long[::1] q_start,
             const long long[::1] q_count,
             long long q_mask,
             float[:, ::1] lanes, long long t):
    cdef Py_ssize_t n_lanes = lanes.shape[0]
    cdef long long rt, delay, j, lane_idx = 0
    cdef int d
    cdef unsigned int n
    cdef Py_ssize_t o, o0, o1, lane
    for rt in range(D_MAX):
        delay = (t - rt) & (D_MAX - 1)
        if delay >= D_MAX - 1:
            continue
        d = <int>delay + 1
        for j in range(q_count[rt]):
            n = q_ids[(q_start[rt] + j) & q_mask]
            lane = <Py_ssize_t>(lane_idx % n_lanes)
            o0 = <Py_ssize_t>index[n, d]
            o1 = <Py_ssize_t>index[n, d + 1]
            for o in range(o0, o1):
                lanes[lane, targets[o]] += weights[o]
            lane_idx += 1


@cython.boundscheck(False)
@cython.wraparound(False)
def lane_collapse(float[:, ::1] lanes, float[::1] out):
    cdef Py_ssize_t k, j
    cdef Py_ssize_t n = out.shape[0]
    for j in range(n):
        out[j] = lanes[0, j]
    for k in range(1, lanes.shape[0]):
        for j in range(n):
            out[j] += lanes[k, j]
    lanes[:, :] = 0.0


@cython.boundscheck(False)
@cython.wraparound(False)
def pull_gather(const long long[::1] in_start,
                const unsigned int[::1] in_src,
                const unsigned char[::1] in_dly,
                const float[::1] in_w,
                const unsigned char[:, ::1] history,
                long long t, float[::1] out):
    cdef Py_ssize_t i, o
    cdef double acc
    for i in range(out.shape[0]):
        acc = 0.0
        for o in range(<Py_ssize_t>in_start[i], <Py_ssize_t>in_start[i + 1]):
            if history[(t - in_dly[o]) & (D_MAX - 1), in_src[o]]:
                acc += in_w[o]
        out[i] = <float>acc


@cython.boundscheck(False)
@cython.wraparound(False)
def poisson_tick(u64 root, long long tick, const double[::1] lam,
                 const double[::1] exp_neg_lam, int[::1] out):
    cdef Py_ssize_t n = lam.shape[0]
    cdef Py_ssize_t i
    cdef u64 ctr0 = <u64>tick * <u64>n * 2ULL
    cdef u64 ctr, x
    cdef double u, p, cdf, u1, u2, z, draw
    cdef int k
    for i in range(n):
        ctr = ctr0 + 2ULL * <u64>i
        x = raw(root, ctr)
        u = <double>(x >> 11) * TWO_NEG53
        if lam[i] < POISSON_CUTOVER:
            p = exp_neg_lam[i]
            cdf = p
            k = 0
            while u > cdf and k < POISSON_MAX_K:
                k += 1
                p *= lam[i] / k
                cdf += p
            out[i] = k
        else:
            u1 = (<double>(x >> 11) + 1.0) * TWO_NEG53
            x = raw(root, ctr + 1)
            u2 = <double>(x >> 11) * TWO_NEG53
            z = sqrt(-2.0 * log(u1)) * cos(2.0 * PDMC_PI * u2)
            draw = floor(lam[i] + sqrt(lam[i]) * z + 0.5)
            if draw < 0.0:
                draw = 0.0
            out[i] = <int>draw
