"""Small shared helpers for deterministic seed derivation."""

from __future__ import annotations

import numpy as np


def derived_seed(*parts: int) -> int:
    """Mix integer labels into one reproducible non-negative seed."""
    ss = np.random.SeedSequence([int(p) for p in parts])
    return int(ss.generate_state(1, np.uint64)[0] >> 1)
