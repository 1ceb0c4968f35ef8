"""Counter-addressable random streams.

Every draw is keyed by (master seed, stream id, counter), so frame t of the
channel sequence can be regenerated without replaying frames 1..t-1, and
channel sampling never shifts when training cadence changes.
"""

from __future__ import annotations

import numpy as np

CHANNEL = 0
NET_INIT = 1
REPLAY = 2
TOPOLOGY = 3
SCHEDULE = 4


def stream(seed: int, stream_id: int, counter: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(stream_id), int(counter)))
    return np.random.Generator(np.random.PCG64(ss))
