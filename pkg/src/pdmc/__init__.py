"""CPU simulator for the Potjans-Diesmann cortical microcircuit.

Push-based spike transfer (eager full-buffer, just-in-time, and horizon
strategies plus a pull oracle) over compact indexed synapse storage with
congruence-class interleaving, a two-worker pipelined engine, statistical
verification, and a benchmark harness.
"""

from .engine import EngineConfig, RunResult, SpikeTrain, count_events, run, run_mono, run_multi
from .kernels import available_backends, default_backend_name
from .netgen import Network, SynapseStore, build_store, generate, sample_synapse_counts, syns_from
from .netio import read_network, write_network
from .params import Coefficients, SimParams, default_params, derive_coefficients
from .transfer import TransferConfig

__version__ = "0.1.0"
