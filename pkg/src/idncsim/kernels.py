"""Kernel backend selection.

The compiled extension is used when it imports; setting ``IDNCSIM_PURE=1``
forces the numpy fallback.
"""
import os

from . import _kernels_py

if os.environ.get("IDNCSIM_PURE", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = _impl.BACKEND
gidnc_adjacency = _impl.gidnc_adjacency
greedy_clique = _impl.greedy_clique
bpso_scores = _impl.bpso_scores
