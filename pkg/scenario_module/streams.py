# scenario_module/streams.py
# Named, independent random substreams derived from one 64-bit scenario seed.

from dataclasses import dataclass

import numpy as np

STREAM_NAMES = ("mobility", "mining", "trading", "measurement-noise")


def named_stream(rng_seed: int, name: str) -> np.random.Generator:
    """One substream. The spawn key is the name's index, so adding streams at the
    end of STREAM_NAMES never changes the existing ones."""
    index = STREAM_NAMES.index(name)
    return np.random.default_rng(np.random.SeedSequence(entropy=rng_seed, spawn_key=(index,)))


@dataclass
class StreamSet:
    mobility: np.random.Generator
    mining: np.random.Generator
    trading: np.random.Generator
    measurement_noise: np.random.Generator


def derive_streams(cfg) -> StreamSet:
    """Equal configs give identical streams; they share nothing but the seed."""
    return StreamSet(
        mobility=named_stream(cfg.rng_seed, "mobility"),
        mining=named_stream(cfg.rng_seed, "mining"),
        trading=named_stream(cfg.rng_seed, "trading"),
        measurement_noise=named_stream(cfg.rng_seed, "measurement-noise"),
    )
