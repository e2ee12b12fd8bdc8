"""Seeded, named random streams.

Every stochastic operation (init, dropout, noise, shuffling, synthetic
embeddings) draws from a stream keyed by (seed, purpose, epoch), so runs
are bit-reproducible and adding a consumer never shifts another stream.
Streams are backed by the counter-based Philox generator; keys are derived
with SHA-256 so they are stable across platforms and Python processes.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream(seed: int, purpose: str, epoch: int = 0) -> np.random.Generator:
    """Return an independent Generator for (seed, purpose, epoch)."""
    digest = hashlib.sha256(f"{seed}|{purpose}|{epoch}".encode("utf-8")).digest()
    key = int.from_bytes(digest[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))
