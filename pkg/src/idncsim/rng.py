"""Portable per-frame random streams.

Every stream is a numpy ``Philox`` (4x64, 10 rounds) counter-based generator
keyed by ``(stream_id << 64) | master_seed`` with
``stream_id = 16 * frame + purpose``. Philox output is fully specified by
its published constants, so draws are identical on every platform.
"""
import numpy as np

PURPOSES = {"params": 0, "forward": 1, "backward": 2, "solver": 3}
MASK64 = (1 << 64) - 1


def stream(master_seed: int, frame: int, purpose: str) -> np.random.Generator:
    if not 0 <= master_seed <= MASK64:
        raise ValueError("master seed must be an unsigned 64-bit integer")
    key = ((16 * frame + PURPOSES[purpose]) << 64) | master_seed
    return np.random.Generator(np.random.Philox(key=key))


class FrameStreams:
    """The four named streams of one frame."""

    def __init__(self, master_seed: int, frame: int):
        self.params = stream(master_seed, frame, "params")
        self.forward = stream(master_seed, frame, "forward")
        self.backward = stream(master_seed, frame, "backward")
        self.solver = stream(master_seed, frame, "solver")
