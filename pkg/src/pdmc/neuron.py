"""Per-tick leaky integrate-and-fire state update and thalamic input.

Membrane potentials are kept as deviations from the resting potential, so
reset is exactly zero. The fixed delivery contract: current scheduled for
tick t is injected into the presynaptic current before the membrane update
of tick t, i.e. i_syn' = p11*i_syn + thalamic + delivered, then
u' = p22*u + p21*i_syn' (unless refractory), spike iff u' >= threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, rng
from .params import Coefficients, PopulationSpec, SimParams

_DTYPES = {"f32": np.float32, "f64": np.float64}


@dataclass
class NeuronState:
    u: np.ndarray       # membrane deviation from rest (mV)
    i_syn: np.ndarray   # presynaptic current (scaled units)
    r: np.ndarray       # refractory ticks remaining (int32)

    @classmethod
    def init(cls, u_init: np.ndarray, precision: str = "f32") -> "NeuronState":
        dt = _DTYPES[precision]
        n = u_init.shape[0]
        return cls(u=u_init.astype(dt), i_syn=np.zeros(n, dtype=dt),
                   r=np.zeros(n, dtype=np.int32))

    @property
    def n(self) -> int:
        return int(self.u.shape[0])


def update_tick_current(state: NeuronState, coeffs: Coefficients,
                        delivered: np.ndarray, ext_current: np.ndarray,
                        backend=None) -> np.ndarray:
    """Advance one tick with an arbitrary external current; returns spiker ids."""
    if delivered.shape[0] != state.n or ext_current.shape[0] != state.n:
        raise ValueError("delivered/external arrays must have one entry per neuron")
    k = backend or kernels.get_backend()
    return k.update_tick(state.u, state.i_syn, state.r,
                         np.ascontiguousarray(delivered, dtype=np.float32),
                         np.ascontiguousarray(ext_current, dtype=state.u.dtype),
                         coeffs.p11, coeffs.p22, coeffs.p21,
                         coeffs.u_thr_dev, coeffs.ref_ticks)


def update_tick(state: NeuronState, coeffs: Coefficients,
                delivered: np.ndarray, thalamic: np.ndarray,
                backend=None) -> np.ndarray:
    """Advance one tick; `thalamic` holds per-neuron spike counts."""
    if thalamic.shape[0] != state.n:
        raise ValueError("thalamic array must have one entry per neuron")
    w_th = state.u.dtype.type(coeffs.w_thalamic)
    ext = thalamic.astype(state.u.dtype) * w_th
    return update_tick_current(state, coeffs, delivered, ext, backend)


class ThalamicSource:
    """Poisson input with per-neuron mean v_th * K(pop) * dt/1000 per tick.

    Draws are a pure function of (seed, tick, neuron); exp(-lam) is
    precomputed per population so both kernel backends see identical doubles.
    """

    def __init__(self, lam: np.ndarray, seed: int):
        self.lam = np.ascontiguousarray(lam, dtype=np.float64)
        self.exp_neg_lam = np.ascontiguousarray(
            [math.exp(-x) for x in self.lam], dtype=np.float64)
        self.root = rng.stream_root(seed, rng.STREAM_THALAMIC)
        self._counts = np.zeros(self.lam.shape[0], dtype=np.int32)

    @classmethod
    def for_network(cls, net, seed: int) -> "ThalamicSource":
        lam = np.zeros(net.n_neurons, dtype=np.float64)
        for pop, (start, end) in zip(net.pops, net.pop_bounds):
            lam[start:end] = net.sim.v_th * pop.k_thalamic * (net.sim.dt / 1000.0)
        return cls(lam, seed)  # sink keeps lam = 0

    def draw(self, tick: int, backend=None) -> np.ndarray:
        k = backend or kernels.get_backend()
        k.poisson_tick(self.root, tick, self.lam, self.exp_neg_lam, self._counts)
        return self._counts


def dc_approximation(coeffs: Coefficients, sp: SimParams, k_thalamic: int) -> float:
    """Constant per-tick current whose long-run mean matches Poisson mode.

    Equals the v_th*K*w_ext*tau_syn per-second rate rescaled to one tick and
    to current units: v_th*K*(dt/1000)*w_ext*w_f.
    """
    return sp.v_th * k_thalamic * (sp.dt / 1000.0) * sp.w_ext * coeffs.w_f


def dc_current_vector(net) -> np.ndarray:
    out = np.zeros(net.n_neurons, dtype=np.float64)
    for pop, (start, end) in zip(net.pops, net.pop_bounds):
        out[start:end] = dc_approximation(net.coeffs, net.sim, pop.k_thalamic)
    return out
