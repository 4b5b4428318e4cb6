"""Deterministic random-stream derivation.

A master seed plus an integer path (domain, repetition, ...) maps to an
independent counter-based generator.  Streams depend only on the pair
(seed, path), never on creation order, so repetitions may run in any
order or in parallel and still reproduce bit-identical results.
"""

from __future__ import annotations

import numpy as np

# Domain tags keep unrelated experiment stages on disjoint stream paths.
DOMAIN_PROTOCOL = 1
DOMAIN_ESTIMATE = 2
DOMAIN_SCALING = 3
DOMAIN_IMAGE = 4
DOMAIN_OPTICS = 5


def derive(seed: int, *path: int) -> np.random.Generator:
    """Return the generator for stream `path` under `seed`."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
