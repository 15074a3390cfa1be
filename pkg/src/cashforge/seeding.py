"""Deterministic seed fan-out.

One global seed flows into every stage. Stage-local seeds are derived as the
first 8 bytes of ``sha256("<seed>:<label>")`` so that adding or reordering
stages never perturbs the streams of the others.
"""

from __future__ import annotations

import hashlib


def derive_seed(seed: int, label: str) -> int:
    """Derive a 63-bit child seed from a global seed and a stage label."""
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
