"""Hot-kernel backend selection.

The compiled extension is preferred when it imports; set PDMC_BACKEND=pure
or PDMC_BACKEND=compiled to force one. Engine code resolves the backend
once per run via get_backend(), so benchmarks can compare both in-process.
"""

from __future__ import annotations

import os

from . import _pure

_BACKENDS = {"pure": _pure}
try:
    from . import _core
    _BACKENDS["compiled"] = _core
except ImportError:
    _core = None

_forced = os.environ.get("PDMC_BACKEND", "auto")
if _forced not in ("auto", "pure", "compiled"):
    raise RuntimeError(f"PDMC_BACKEND must be auto|pure|compiled, got {_forced!r}")
if _forced == "compiled" and "compiled" not in _BACKENDS:
    raise RuntimeError("PDMC_BACKEND=compiled but the extension is not built")

_default = _forced if _forced != "auto" else (
    "compiled" if "compiled" in _BACKENDS else "pure")


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def get_backend(name: str = "auto"):
    """Resolve a backend module by name ('auto' follows the import default)."""
    if name == "auto":
        name = _default
    try:
        return _BACKENDS[name]
    except KeyError:
        raise RuntimeError(
            f"kernel backend {name!r} unavailable (have {available_backends()})"
        ) from None


def default_backend_name() -> str:
    return _default
