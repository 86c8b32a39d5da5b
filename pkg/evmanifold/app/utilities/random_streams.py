"""Named random substreams derived from one run seed."""

import zlib

import numpy as np


def stream_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8")) & 0xFFFFFFFF


def stream(seed: int, name: str) -> np.random.Generator:
    """Counter-based generator for stage ``name``; adding a stage never shifts another stage's draws"""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(stream_key(name),))
    return np.random.Generator(np.random.Philox(seq))
