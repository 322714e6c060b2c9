"""Small shared helpers: canonical JSON, hashing, atomic writes, seeding."""

from __future__ import annotations

import hashlib
import json
import os
from typing import Any

import numpy as np


def canonical_json(obj: Any) -> str:
    """JSON with sorted keys and no whitespace drift, for hashing and reports."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def hash_arrays(*arrays: np.ndarray) -> str:
    """Order-sensitive content hash over numpy arrays (dtype and shape included)."""
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.dtype).encode())
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def atomic_write_bytes(path: str, data: bytes) -> None:
    """Write via temp file + rename so readers never observe partial content."""
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def rng_from_seed(seed: int, stream: str = "") -> np.random.Generator:
    """Independent generator derived from one root seed and a stream label.

    All randomness in the package flows through these generators so a single
    seed reproduces every run byte for byte.
    """
    material = f"{seed}:{stream}".encode()
    digest = hashlib.sha256(material).digest()
    return np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "little")))
