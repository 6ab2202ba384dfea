"""Counter-based random streams.

Each stream is a Philox generator whose key is derived from the tuple
``(seed, purpose, index, arm, hypothesis)``, so any batch or replicate can
be regenerated independently of the order in which work is scheduled.
"""

import numpy as np

FORSS = 0
SIMULATE = 1
CALIBRATE = 2

CONTROL = 0
TREATMENT = 1

H0 = 0
HA = 1

_SCALE = 2.0**-53


def stream(seed, purpose, index, arm, hypothesis=HA):
    key = np.random.SeedSequence([seed, purpose, index, arm, hypothesis]).generate_state(2, np.uint64)
    return np.random.Philox(key=key)


def open_uniforms(bitgen, size):
    """Uniforms strictly inside (0, 1) built from the top 53 bits of each draw."""
    raw = bitgen.random_raw(size)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _SCALE
