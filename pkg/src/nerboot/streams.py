"""Deterministic random-stream derivation.

Every stochastic routine in the library draws from a generator obtained via
``substream(master_seed, *key)``.  The derivation rule is fixed: the master
seed and the integer key components are fed, in order, as the entropy of a
fresh ``numpy.random.default_rng``.  Distinct keys therefore yield
independent streams, and results never depend on the order in which
replicates execute -- the contract that makes parallel runs bit-identical
to serial ones.

Key layout used across the package (first component after the seed):
"""

import numpy as np

# purpose codes; keep stable across releases, outputs depend on them
TRUTH = 1        # (TRUTH, replicate)            truth-simulation error draws
SINGLE = 2       # (SINGLE, b)                   level-one bootstrap world b
OUTER = 3        # (OUTER, b)                    double-bootstrap outer world b
INNER = 4        # (INNER, b, l)                 inner world l around outer b
DESIGN = 5       # (DESIGN,)                     covariate design of a study
STUDY = 6        # (STUDY, replicate)            per-replicate study error draws

MAX_SEED = 2**64 - 1


def substream(master_seed, *key):
    """Independent generator for the given (master_seed, *key) tuple."""
    if not 0 <= int(master_seed) <= MAX_SEED:
        raise ValueError(f"master seed must be in [0, 2**64), got {master_seed}")
    return np.random.default_rng([int(master_seed), *[int(k) for k in key]])


def draw_master_seed():
    """Fresh master seed from system entropy (printed by the CLI when used)."""
    return int(np.random.SeedSequence().entropy % (2**63))
