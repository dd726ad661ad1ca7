"""Deterministic seed derivation and counter-based random generators.

Every random draw in the package flows from an explicit integer seed.
Sub-seeds are derived by hashing a label path under a master seed, so
independent pipeline stages never share a stream and results do not depend
on the order in which stages run.
"""

import hashlib

import numpy as np

_MASK63 = (1 << 63) - 1


def derive_seed(master: int, *labels: str) -> int:
    """Derive a stable 63-bit sub-seed from a master seed and a label path."""
    text = str(int(master)) + "/" + "/".join(labels)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & _MASK63


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator keyed on a seed.

    Philox is counter-based, so records keyed on per-record seeds can be
    generated in any order with identical results.
    """
    return np.random.Generator(np.random.Philox(key=int(seed)))
