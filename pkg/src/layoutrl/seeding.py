"""Named random substreams derived from one master seed.

Every source of randomness in a run draws from its own generator, built
as `default_rng(SeedSequence([master_seed, stream_id, *keys]))`.  The
stream name picks the id; extra integer keys (surface index, episode
index, scene seed, start index) separate parallel uses of the same
stream.  Streams are therefore independent of each other and stable
under resume and reordering.
"""

import numpy as np

STREAM_IDS = {
    "gen": 1,      # scene generation
    "init": 2,     # network weight init (key: surface index)
    "explore": 3,  # epsilon-greedy draws (key: surface index)
    "sample": 4,   # replay minibatch draws (key: surface index)
    "eval": 5,     # evaluation rollouts (keys: scene seed, start index)
    "start": 6,    # per-episode start randomization (key: episode index)
    "order": 7,    # scene stream shuffling
}


def substream(master_seed: int, name: str, *keys: int) -> np.random.Generator:
    """Generator for the named stream; same arguments, same stream."""
    if name not in STREAM_IDS:
        raise KeyError(f"unknown stream {name!r}")
    ss = np.random.SeedSequence([int(master_seed), STREAM_IDS[name],
                                 *(int(k) for k in keys)])
    return np.random.default_rng(ss)


def substream_seed(master_seed: int, name: str, *keys: int) -> int:
    """A plain integer seed drawn from the named stream."""
    return int(substream(master_seed, name, *keys).integers(0, 2**31))
