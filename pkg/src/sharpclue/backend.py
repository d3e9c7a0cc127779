"""Kernel backend selection: numba-jitted loops vs pure NumPy.

The hot kernels in :mod:`sharpclue.kernels` exist in two functionally
equivalent versions. Selection is controlled by the ``SELFHVD_NUMBA``
environment variable:

* ``SELFHVD_NUMBA=0``  -- force the pure-NumPy kernels everywhere
* ``SELFHVD_NUMBA=1``  -- force the numba kernels everywhere
* unset               -- per-kernel defaults: numba for gather-heavy
  resampling, BLAS-backed NumPy for the convolutions (measured faster,
  see benchmarks/bench_kernels.py)

``SELFHVD_THREADS`` caps the numba worker-thread count. The two backends
agree to float round-off (summation order differs); determinism claims
hold per backend.
"""

from __future__ import annotations

import os

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

# Per-kernel default when SELFHVD_NUMBA is unset.
_AUTO_DEFAULTS = {"warp": True, "conv": False}

_threads_applied = False


def _apply_thread_cap() -> None:
    global _threads_applied
    if _threads_applied or not HAS_NUMBA:
        return
    cap = os.environ.get("SELFHVD_THREADS")
    if cap:
        try:
            n = max(1, int(cap))
        except ValueError:
            n = 1
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    _threads_applied = True


def use_numba(kernel: str) -> bool:
    """Whether `kernel` ("warp" or "conv") should run its numba version."""
    mode = os.environ.get("SELFHVD_NUMBA", "").strip()
    if mode == "0":
        return False
    if mode == "1":
        if not HAS_NUMBA:
            raise RuntimeError("SELFHVD_NUMBA=1 but numba is not importable")
        _apply_thread_cap()
        return True
    enabled = HAS_NUMBA and _AUTO_DEFAULTS.get(kernel, False)
    if enabled:
        _apply_thread_cap()
    return enabled
