"""Model constants and derived simulation coefficients.

All quantities use ms, mV, pF, and Hz. The canonical values live in
default_params(); a plain-text ``key = value`` config file can override any
of them for experiments at other scales or distributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConfigError


@dataclass(frozen=True)
class Gaussian:
    mean: float
    sd: float


@dataclass(frozen=True)
class SimParams:
    dt: float        # time step (ms)
    c_m: float       # membrane capacity (pF)
    tau_m: float     # membrane time constant (ms)
    tau_ref: float   # refractory period (ms)
    tau_syn: float   # postsynaptic current time constant (ms)
    u_rest: float    # resting/reset potential (mV)
    u_thr: float     # spiking threshold (mV)
    v_th: float      # thalamic mean rate (Hz)
    w_ext: float     # thalamic spike amplitude (mV)


@dataclass(frozen=True)
class PopulationSpec:
    index: int            # 1-based position in the canonical ordering
    name: str             # e.g. "L23/exc"
    n: int                # neuron count at scale 1
    k_thalamic: int       # thalamic fan-in
    u_init: Gaussian      # initial membrane potential (mV)
    w_amp: Gaussian       # synapse amplitude (mV), sign marks exc/inh
    delay: Gaussian       # synaptic delay (ms)

    @property
    def excitatory(self) -> bool:
        return self.name.endswith("/exc")

    @property
    def short(self) -> str:
        return self.name.replace("/exc", "e").replace("/inh", "i")


@dataclass(frozen=True)
class ConnectivityMatrix:
    """p[r][c] = probability that a neuron in population r (source) connects
    to a neuron in population c (target)."""

    p: tuple

    def __getitem__(self, rc):
        r, c = rc
        return self.p[r][c]

    @property
    def n_pops(self) -> int:
        return len(self.p)


@dataclass(frozen=True)
class AmplitudeException:
    """Doubled-amplitude rule for one (source, target) population pair."""

    source: str
    target: str
    dist: Gaussian


@dataclass(frozen=True)
class Coefficients:
    p11: float         # presynaptic current decay per tick
    p22: float         # membrane decay per tick
    p21: float         # current-injection scale
    w_f: float         # mV-to-current scale
    u_thr_dev: float   # threshold as deviation from rest (mV)
    ref_ticks: int     # refractory duration in ticks
    w_thalamic: float  # scaled current per thalamic spike (w_f * w_ext)


POP_NAMES = ("L23/exc", "L23/inh", "L4/exc", "L4/inh",
             "L5/exc", "L5/inh", "L6/exc", "L6/inh")
POP_SHORT = ("L23e", "L23i", "L4e", "L4i", "L5e", "L5i", "L6e", "L6i")

_POP_TABLE = (
    # n, k_thalamic, u_init, w_amp, delay
    (20683, 1600, (-68.28, 5.36), (0.15, 0.015), (1.5, 0.75)),
    (5834, 1500, (-63.16, 4.57), (-0.6, 0.06), (0.75, 0.325)),
    (21915, 2100, (-63.33, 4.74), (0.15, 0.015), (1.5, 0.75)),
    (5479, 1900, (-63.45, 4.94), (-0.6, 0.06), (0.75, 0.325)),
    (4850, 2000, (-63.11, 4.94), (0.15, 0.015), (1.5, 0.75)),
    (1065, 1900, (-61.66, 4.55), (-0.6, 0.06), (0.75, 0.325)),
    (14395, 2900, (-66.72, 5.46), (0.15, 0.015), (1.5, 0.75)),
    (2948, 2100, (-61.43, 4.48), (-0.6, 0.06), (0.75, 0.325)),
)

_CONN_TABLE = (
    (0.1009, 0.1689, 0.0437, 0.0818, 0.0323, 0.0000, 0.0076, 0.0000),
    (0.1346, 0.1371, 0.0316, 0.0515, 0.0755, 0.0000, 0.0042, 0.0000),
    (0.0077, 0.0059, 0.0497, 0.1350, 0.0067, 0.0003, 0.0453, 0.0000),
    (0.0691, 0.0029, 0.0794, 0.1597, 0.0033, 0.0000, 0.1057, 0.0000),
    (0.1004, 0.0622, 0.0505, 0.0057, 0.0831, 0.3726, 0.0204, 0.0000),
    (0.0548, 0.0269, 0.0257, 0.0022, 0.0600, 0.3158, 0.0086, 0.0000),
    (0.0156, 0.0066, 0.0211, 0.0166, 0.0572, 0.0197, 0.0396, 0.2252),
    (0.0364, 0.0010, 0.0034, 0.0005, 0.0277, 0.0080, 0.0658, 0.1443),
)


def default_params():
    """The canonical parameter set: (SimParams, [PopulationSpec x 8], ConnectivityMatrix)."""
    sp = SimParams(dt=0.1, c_m=250.0, tau_m=10.0, tau_ref=2.0, tau_syn=0.5,
                   u_rest=-65.0, u_thr=-50.0, v_th=8.0, w_ext=0.15)
    pops = []
    for i, (name, row) in enumerate(zip(POP_NAMES, _POP_TABLE)):
        n, k, ui, w, d = row
        pops.append(PopulationSpec(index=i + 1, name=name, n=n, k_thalamic=k,
                                   u_init=Gaussian(*ui), w_amp=Gaussian(*w),
                                   delay=Gaussian(*d)))
    return sp, pops, ConnectivityMatrix(p=_CONN_TABLE)


def default_exception() -> AmplitudeException:
    """Doubled synapse amplitude on L4/exc -> L23/exc connections."""
    return AmplitudeException(source="L4/exc", target="L23/exc",
                              dist=Gaussian(0.3, 0.03))


def derive_coefficients(sp: SimParams) -> Coefficients:
    """Per-tick decay/injection coefficients and the mV-to-current scale."""
    if sp.tau_m == sp.tau_syn:
        raise ConfigError("tau_m must differ from tau_syn (w_f divides by their difference)")
    if sp.dt <= 0 or sp.tau_m <= 0 or sp.tau_syn <= 0:
        raise ConfigError("dt, tau_m and tau_syn must be positive")
    d = sp.tau_syn - sp.tau_m
    p = sp.tau_syn * sp.tau_m
    q = sp.tau_m / sp.tau_syn
    w_f = sp.c_m * d / (p * (q ** (sp.tau_m / d) - q ** (sp.tau_syn / d)))
    p11 = math.exp(-sp.dt / sp.tau_syn)
    p22 = math.exp(-sp.dt / sp.tau_m)
    beta = sp.tau_syn * sp.tau_m / (sp.tau_m - sp.tau_syn)
    gamma = beta / sp.c_m
    p21 = p11 * gamma * (math.exp(sp.dt / beta) - 1.0)
    return Coefficients(
        p11=p11, p22=p22, p21=p21, w_f=w_f,
        u_thr_dev=sp.u_thr - sp.u_rest,
        ref_ticks=int(math.floor(sp.tau_ref / sp.dt + 0.5)),
        w_thalamic=w_f * sp.w_ext,
    )


def validate(sp: SimParams, pops, conn: ConnectivityMatrix) -> list[str]:
    """Collect every invariant violation; an empty list means the set is usable."""
    errors = []
    if not sp.dt > 0:
        errors.append("sim.dt must be > 0")
    if not sp.tau_m > 0:
        errors.append("sim.tau_m must be > 0")
    if not sp.tau_syn > 0:
        errors.append("sim.tau_syn must be > 0")
    if sp.tau_m == sp.tau_syn:
        errors.append("sim.tau_m must differ from sim.tau_syn")
    if not sp.u_thr > sp.u_rest:
        errors.append("sim.u_thr must exceed sim.u_rest")
    if sp.dt > 0:
        ratio = sp.tau_ref / sp.dt
        if abs(ratio - math.floor(ratio + 0.5)) > 1e-9:
            errors.append("sim.tau_ref must be an integer multiple of sim.dt")
    if sp.v_th < 0:
        errors.append("sim.v_th must be >= 0")
    for pop in pops:
        key = f"pop.{pop.short}"
        if pop.n < 0:
            errors.append(f"{key}.n must be >= 0")
        if pop.k_thalamic < 0:
            errors.append(f"{key}.k must be >= 0")
        for field in ("u_init", "w_amp", "delay"):
            if getattr(pop, field).sd < 0:
                errors.append(f"{key}.{field}.sd must be >= 0")
        if pop.excitatory and pop.w_amp.mean <= 0:
            errors.append(f"{key}.w_amp.mean must be > 0 for an excitatory population")
        if not pop.excitatory and pop.w_amp.mean >= 0:
            errors.append(f"{key}.w_amp.mean must be < 0 for an inhibitory population")
    for r, row in enumerate(conn.p):
        for c, v in enumerate(row):
            if not (0.0 <= v <= 1.0):
                errors.append(
                    f"conn.{POP_SHORT[r]}.{POP_SHORT[c]} = {v} outside [0, 1]")
    return errors


# ---------------------------------------------------------------------------
# Plain-text configuration files: `key = value`, `#` comments, keys mirror
# field names (sim.dt, pop.L23e.n, conn.L23e.L4e, exception.source, ...).
# ---------------------------------------------------------------------------

_SIM_KEYS = ("dt", "c_m", "tau_m", "tau_ref", "tau_syn",
             "u_rest", "u_thr", "v_th", "w_ext")
_GAUSS_FIELDS = {"u_init": "u_init", "w": "w_amp", "delay": "delay"}


def dump_config(sp: SimParams, pops, conn: ConnectivityMatrix,
                exc: AmplitudeException) -> str:
    lines = ["# pdmc parameter set"]
    for key in _SIM_KEYS:
        lines.append(f"sim.{key} = {getattr(sp, key)!r}")
    for pop in pops:
        s = pop.short
        lines.append(f"pop.{s}.n = {pop.n}")
        lines.append(f"pop.{s}.k = {pop.k_thalamic}")
        for ckey, field in _GAUSS_FIELDS.items():
            g = getattr(pop, field)
            lines.append(f"pop.{s}.{ckey}.mean = {g.mean!r}")
            lines.append(f"pop.{s}.{ckey}.sd = {g.sd!r}")
    for r in range(conn.n_pops):
        for c in range(conn.n_pops):
            lines.append(f"conn.{POP_SHORT[r]}.{POP_SHORT[c]} = {conn.p[r][c]!r}")
    lines.append(f"exception.source = {POP_SHORT[POP_NAMES.index(exc.source)]}")
    lines.append(f"exception.target = {POP_SHORT[POP_NAMES.index(exc.target)]}")
    lines.append(f"exception.mean = {exc.dist.mean!r}")
    lines.append(f"exception.sd = {exc.dist.sd!r}")
    return "\n".join(lines) + "\n"


def parse_config(text: str):
    """Parse overrides on top of the defaults.

    Returns (SimParams, pops, ConnectivityMatrix, AmplitudeException).
    Unknown keys are errors.
    """
    sp, pops, conn = default_params()
    exc = default_exception()
    p = [list(row) for row in conn.p]
    short_to_idx = {s: i for i, s in enumerate(POP_SHORT)}
    errors = []

    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            sp, pops, p, exc = _apply_key(key, value, sp, pops, p, exc, short_to_idx)
        except (ValueError, KeyError) as e:
            errors.append(f"line {lineno}: {key}: {e}")
    if errors:
        raise ConfigError("config errors: " + "; ".join(errors))
    return sp, pops, ConnectivityMatrix(p=tuple(tuple(row) for row in p)), exc


def _apply_key(key, value, sp, pops, p, exc, short_to_idx):
    parts = key.split(".")
    if parts[0] == "sim" and len(parts) == 2:
        if parts[1] not in _SIM_KEYS:
            raise KeyError(f"unknown sim field '{parts[1]}'")
        sp = replace(sp, **{parts[1]: float(value)})
    elif parts[0] == "pop" and len(parts) >= 3:
        idx = short_to_idx.get(parts[1])
        if idx is None:
            raise KeyError(f"unknown population '{parts[1]}'")
        pop = pops[idx]
        if len(parts) == 3 and parts[2] == "n":
            pop = replace(pop, n=int(value))
        elif len(parts) == 3 and parts[2] == "k":
            pop = replace(pop, k_thalamic=int(value))
        elif len(parts) == 4 and parts[2] in _GAUSS_FIELDS and parts[3] in ("mean", "sd"):
            field = _GAUSS_FIELDS[parts[2]]
            g = replace(getattr(pop, field), **{parts[3]: float(value)})
            pop = replace(pop, **{field: g})
        else:
            raise KeyError("unknown population field")
        pops = [pop if q.index == pop.index else q for q in pops]
    elif parts[0] == "conn" and len(parts) == 3:
        r = short_to_idx.get(parts[1])
        c = short_to_idx.get(parts[2])
        if r is None or c is None:
            raise KeyError("unknown population in connectivity key")
        p[r][c] = float(value)
    elif parts[0] == "exception" and len(parts) == 2:
        if parts[1] in ("source", "target"):
            idx = short_to_idx.get(value)
            if idx is None:
                raise KeyError(f"unknown population '{value}'")
            exc = replace(exc, **{parts[1]: POP_NAMES[idx]})
        elif parts[1] in ("mean", "sd"):
            exc = replace(exc, dist=replace(exc.dist, **{parts[1]: float(value)}))
        else:
            raise KeyError("unknown exception field")
    else:
        raise KeyError("unknown key")
    return sp, pops, p, exc


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
