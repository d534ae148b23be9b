"""Batch link-evaluation kernels.

The same computation exists twice: a compiled Cython core (`_core`) and a
vectorized NumPy fallback (`reference`).  Whichever is available is picked
at import; `UAVCOV_KERNEL=compiled|python` overrides, and `set_backend`
switches at runtime (used by the benchmark and the equivalence tests).

Per link, a kernel consumes the flattened per-path arrays (linear power
weights and direction cosines on each array plane) and produces the
beamformed received-power sum, the index of the strongest beamformed
path, and the dominant eigenpair diagnostics for both sides.
"""

from __future__ import annotations

import os
import warnings
from typing import NamedTuple

import numpy as np

from . import reference

try:
    from . import _core  # compiled extension, optional

    _HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on build environment
    _core = None
    _HAVE_COMPILED = False

__all__ = [
    "LinkEval",
    "evaluate_links",
    "active_backend",
    "available_backends",
    "set_backend",
]


class LinkEval(NamedTuple):
    """Per-link kernel outputs (arrays of length n_links)."""

    power_sum: np.ndarray  # sum_l w_l |w_rx^H a_rx,l|^2 |w_tx^H a_tx,l|^2
    strongest: np.ndarray  # argmax_l of the summand above
    tx_eigenvalue: np.ndarray
    rx_eigenvalue: np.ndarray
    tx_residual_rel: np.ndarray
    rx_residual_rel: np.ndarray
    converged: np.ndarray  # both power iterations met the residual bound


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _HAVE_COMPILED else ("python",)


_active = "compiled" if _HAVE_COMPILED else "python"
_env = os.environ.get("UAVCOV_KERNEL")
if _env:
    if _env in available_backends():
        _active = _env
    else:
        warnings.warn(
            f"UAVCOV_KERNEL={_env!r} unavailable; using {_active!r}", stacklevel=1
        )


def active_backend() -> str:
    return _active


def set_backend(name: str) -> None:
    global _active
    if name not in available_backends():
        raise ValueError(f"unknown backend {name!r}; have {available_backends()}")
    _active = name


def evaluate_links(
    weights,
    tx_u,
    tx_v,
    rx_u,
    rx_v,
    offsets,
    tx_rows: int,
    tx_cols: int,
    rx_rows: int,
    rx_cols: int,
    tx_spacing: float,
    rx_spacing: float,
    tol: float = 1e-9,
    max_iter: int = 1000,
) -> LinkEval:
    """Evaluate a batch of links with the active backend.

    `offsets` has length n_links+1; link i owns the flat-array slice
    offsets[i]:offsets[i+1].  Empty links yield power 0 and strongest -1.
    """
    args = (
        np.ascontiguousarray(weights, dtype=np.float64),
        np.ascontiguousarray(tx_u, dtype=np.float64),
        np.ascontiguousarray(tx_v, dtype=np.float64),
        np.ascontiguousarray(rx_u, dtype=np.float64),
        np.ascontiguousarray(rx_v, dtype=np.float64),
        np.ascontiguousarray(offsets, dtype=np.int64),
        int(tx_rows),
        int(tx_cols),
        int(rx_rows),
        int(rx_cols),
        float(tx_spacing),
        float(rx_spacing),
        float(tol),
        int(max_iter),
    )
    if _active == "compiled":
        raw = _core.evaluate_links(*args)
    else:
        raw = reference.evaluate_links(*args)
    return LinkEval(*raw)
