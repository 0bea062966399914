"""Deterministic seed derivation.

Child seeds are split from a root seed by hashing the root together with a
path of stage/name components, so independent pipeline stages get
independent, reproducible streams.
"""

from __future__ import annotations

import hashlib


def derive_seed(root: int, *parts: str | int) -> int:
    """64-bit child seed from sha256(root, *parts)."""
    h = hashlib.sha256()
    h.update(str(int(root)).encode())
    for part in parts:
        h.update(b"/")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "big")
