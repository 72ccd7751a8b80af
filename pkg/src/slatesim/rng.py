"""Label-addressed deterministic random streams.

Every component derives its own stream from (master_seed, label, index)
instead of sharing one sequential generator, so results do not depend on
execution order or on how work is split across processes. Streams are
Philox counter-based generators keyed by a SHA-256 hash of the triple.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_stream", "stream_key"]


def stream_key(master_seed: int, label: str, index: int = 0) -> int:
    """128-bit Philox key for the (master_seed, label, index) triple."""
    message = f"{master_seed}\x1f{label}\x1f{index}".encode()
    digest = hashlib.sha256(message).digest()
    return int.from_bytes(digest[:16], "little")


def derive_stream(master_seed: int, label: str, index: int = 0) -> np.random.Generator:
    """Return an independent Generator for the (master_seed, label, index) triple.

    Same triple -> identical stream; any difference in the triple -> a
    statistically independent stream. Callers own the returned generator
    exclusively; never share one instance across threads or processes.
    """
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, label, index)))
