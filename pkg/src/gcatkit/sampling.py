"""Negative-triple corruption and paired batch construction.

All randomness flows through numpy's PCG64. The generator is seeded
explicitly everywhere, and per-stage child generators are derived with
``SeedSequence(seed, spawn_key=(stage_key,))``, so a single root seed
replays the whole pipeline bit-exactly on any platform.
"""

from __future__ import annotations

from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import EmptyDatasetError, InvalidConfigError
from .graph import Triple

# spawn keys for per-stage child generators
STAGE_KEYS = {"transe": 0, "encoder": 1, "decoder": 2, "eval": 3, "toy": 4, "gradcheck": 5}

# bounded retries when filtered negative sampling keeps hitting true triples
_MAX_FILTER_RETRIES = 64


class TrainPair(NamedTuple):
    valid: Triple
    invalid: Triple


def new_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def stage_rng(seed: int, stage: str) -> np.random.Generator:
    """Child generator for one pipeline stage, derived from the root seed."""
    key = STAGE_KEYS[stage]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(key,))))


def corrupt(
    t: Triple,
    num_entities: int,
    rng: np.random.Generator,
    forbid: Optional[set[Triple]] = None,
) -> Triple:
    """Replace the head or the tail (fair coin) with a different entity.

    The relation never changes and the result always differs from ``t``.
    When ``forbid`` is given, resampling avoids those triples on a
    best-effort basis (bounded retries; the last draw is returned if every
    attempt collides).
    """
    if num_entities < 2:
        raise InvalidConfigError(f"corruption needs >= 2 entities, got {num_entities}")
    candidate = t
    for _ in range(_MAX_FILTER_RETRIES):
        replace_head = rng.integers(2) == 0
        original = t.head if replace_head else t.tail
        draw = int(rng.integers(num_entities - 1))
        replacement = draw + 1 if draw >= original else draw
        if replace_head:
            candidate = Triple(replacement, t.relation, t.tail)
        else:
            candidate = Triple(t.head, t.relation, replacement)
        if forbid is None or candidate not in forbid:
            return candidate
    return candidate


def make_batch(
    triples: Sequence[Triple],
    batch_size: int,
    rng: np.random.Generator,
    num_entities: int,
    neg_ratio: int = 1,
    forbid: Optional[set[Triple]] = None,
) -> list[TrainPair]:
    """Sample a minibatch and pair each positive with ``neg_ratio`` corruptions.

    Sampling is without replacement, falling back to with-replacement when
    the batch is larger than the triple list.
    """
    if not triples:
        raise EmptyDatasetError("cannot sample from an empty triple list")
    if batch_size < 1:
        raise InvalidConfigError(f"batch_size must be >= 1, got {batch_size}")
    if neg_ratio < 1:
        raise InvalidConfigError(f"neg_ratio must be >= 1, got {neg_ratio}")
    replace = batch_size > len(triples)
    picks = rng.choice(len(triples), size=batch_size, replace=replace)
    pairs = []
    for idx in picks:
        valid = triples[int(idx)]
        for _ in range(neg_ratio):
            pairs.append(TrainPair(valid, corrupt(valid, num_entities, rng, forbid)))
    return pairs
