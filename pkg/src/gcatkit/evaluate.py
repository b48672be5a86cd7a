"""Ranking evaluation: head and tail queries, raw and filtered ranks,
MR / MRR / Hits@K.

Scores follow the decoder's orientation, pinned here once: lower is
better. Ties are broken pessimistically (the true entity ranks after
every equal-scored candidate) so constant scorers cannot inflate the
metrics. MRR is the mean of reciprocal ranks, not the reciprocal of the
mean rank.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from . import _kernels as K
from .decoder import DecoderParams
from .errors import ContractError
from .graph import Triple

LOWER_IS_BETTER = True  # shared ranking orientation; the decoder trains toward it


@dataclass(frozen=True)
class Metrics:
    mr: float
    mrr: float
    hits: dict[int, float]
    query_count: int


def rank_entity(scores: np.ndarray, true_entity: int,
                filter_ids: Iterable[int]) -> tuple[int, int]:
    """Raw and filtered rank of the true entity under ascending scores.

    rank = 1 + #(others strictly better) + #(others tied). The filtered
    rank additionally skips ``filter_ids`` (known-true completions), which
    must not contain the true entity itself.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    if not 0 <= true_entity < n:
        raise IndexError(f"true entity {true_entity} out of range for {n} candidates")
    mask = np.zeros(n, dtype=bool)
    filter_list = list(filter_ids)
    if filter_list:
        mask[np.asarray(filter_list, dtype=np.int64)] = True
    if mask[true_entity]:
        raise ContractError("true entity must not be in the filter set")
    less_raw, eq_raw, less_f, eq_f = K.rank_counts(scores, true_entity, mask)
    return 1 + less_raw + eq_raw, 1 + less_f + eq_f


class TranslationScorer:
    """L1 translation distance on an (entities, relations) matrix pair."""

    def __init__(self, entities: np.ndarray, relations: np.ndarray):
        self.entities = np.ascontiguousarray(entities, dtype=np.float64)
        self.relations = np.ascontiguousarray(relations, dtype=np.float64)

    @property
    def num_entities(self) -> int:
        return self.entities.shape[0]

    def score(self, h: int, r: int, t: int) -> float:
        return float(np.abs(self.entities[h] + self.relations[r] - self.entities[t]).sum())

    def score_all_tails(self, h: int, r: int) -> np.ndarray:
        return K.l1_scores(self.entities, self.entities[h] + self.relations[r])

    def score_all_heads(self, r: int, t: int) -> np.ndarray:
        return K.l1_scores(self.entities, self.entities[t] - self.relations[r])


class ConvScorer:
    """Decoder scores over the encoder's output matrices."""

    def __init__(self, entities: np.ndarray, relations: np.ndarray, params: DecoderParams):
        self.entities = np.ascontiguousarray(entities, dtype=np.float64)
        self.relations = np.ascontiguousarray(relations, dtype=np.float64)
        self.params = params
        self._w = np.ascontiguousarray(params.w_out[:, 0])

    @property
    def num_entities(self) -> int:
        return self.entities.shape[0]

    def score(self, h: int, r: int, t: int) -> float:
        return float(
            K.convkb_scores(self.entities[h : h + 1], self.relations[r : r + 1],
                            self.entities[t : t + 1], self.params.filters, self._w)[0])

    def _tiled(self, row: np.ndarray) -> np.ndarray:
        return np.broadcast_to(row, self.entities.shape)

    def score_all_tails(self, h: int, r: int) -> np.ndarray:
        return K.convkb_scores(
            np.ascontiguousarray(self._tiled(self.entities[h])),
            np.ascontiguousarray(self._tiled(self.relations[r])),
            self.entities, self.params.filters, self._w)

    def score_all_heads(self, r: int, t: int) -> np.ndarray:
        return K.convkb_scores(
            self.entities,
            np.ascontiguousarray(self._tiled(self.relations[r])),
            np.ascontiguousarray(self._tiled(self.entities[t])),
            self.params.filters, self._w)


class RandomScorer:
    """Seeded uniform scores; the empirical floor for metric comparisons."""

    def __init__(self, num_entities: int, rng: np.random.Generator):
        self.num_entities = num_entities
        self._rng = rng

    def score_all_tails(self, h: int, r: int) -> np.ndarray:
        return self._rng.random(self.num_entities)

    def score_all_heads(self, r: int, t: int) -> np.ndarray:
        return self._rng.random(self.num_entities)


class FunctionScorer:
    """Adapter for a plain callable triple -> real (lower = better)."""

    def __init__(self, fn: Callable[[int, int, int], float], num_entities: int):
        self.fn = fn
        self.num_entities = num_entities

    def score(self, h: int, r: int, t: int) -> float:
        return self.fn(h, r, t)

    def score_all_tails(self, h: int, r: int) -> np.ndarray:
        return np.array([self.fn(h, r, t) for t in range(self.num_entities)])

    def score_all_heads(self, r: int, t: int) -> np.ndarray:
        return np.array([self.fn(h, r, t) for h in range(self.num_entities)])


def _metrics_from_ranks(ranks: Sequence[int], k_list: Sequence[int]) -> Metrics:
    arr = np.asarray(ranks, dtype=np.float64)
    hits = {k: float(np.mean(arr <= k)) for k in k_list}
    return Metrics(
        mr=float(arr.mean()),
        mrr=float((1.0 / arr).mean()),
        hits=hits,
        query_count=len(ranks),
    )


def evaluate(
    scorer,
    test: Sequence[Triple],
    known: Iterable[Triple],
    k_list: Sequence[int] = (1, 3, 10),
) -> tuple[Metrics, Metrics]:
    """One head and one tail query per test triple; returns (raw, filtered).

    ``known`` is every known-true triple (all splits); the filtered rank
    of a query ignores the other known completions of its (h, r, ?) or
    (?, r, t) pattern. A bare callable scorer is adapted candidate by
    candidate; scorer objects provide vectorized per-query scoring.
    """
    if not test:
        raise ContractError("evaluate needs a non-empty test list")
    known = set(known)
    if not hasattr(scorer, "score_all_tails"):
        num_entities = 1 + max(
            max((t.head for t in known), default=0),
            max((t.tail for t in known), default=0),
            max(t.head for t in test),
            max(t.tail for t in test),
        )
        scorer = FunctionScorer(scorer, num_entities)

    tails_of: dict[tuple[int, int], set[int]] = {}
    heads_of: dict[tuple[int, int], set[int]] = {}
    for h, r, t in known:
        tails_of.setdefault((h, r), set()).add(t)
        heads_of.setdefault((r, t), set()).add(h)

    raw_ranks: list[int] = []
    filt_ranks: list[int] = []
    for h, r, t in test:
        scores = scorer.score_all_tails(h, r)
        filt = tails_of.get((h, r), set()) - {t}
        rr, rf = rank_entity(scores, t, filt)
        raw_ranks.append(rr)
        filt_ranks.append(rf)

        scores = scorer.score_all_heads(r, t)
        filt = heads_of.get((r, t), set()) - {h}
        rr, rf = rank_entity(scores, h, filt)
        raw_ranks.append(rr)
        filt_ranks.append(rf)

    k_list = sorted(k_list)
    return _metrics_from_ranks(raw_ranks, k_list), _metrics_from_ranks(filt_ranks, k_list)


def report(metrics: Metrics, fmt: str = "markdown") -> str:
    """One-row table: H@K columns (percent, 2 dp), MR (integer), MRR (4 dp)."""
    headers = [f"H@{k}" for k in sorted(metrics.hits)] + ["MR", "MRR"]
    values = [f"{metrics.hits[k] * 100:.2f}" for k in sorted(metrics.hits)]
    values += [f"{round(metrics.mr)}", f"{metrics.mrr:.4f}"]
    if fmt == "markdown":
        lines = [
            "| " + " | ".join(headers) + " |",
            "| " + " | ".join("---" for _ in headers) + " |",
            "| " + " | ".join(values) + " |",
        ]
        return "\n".join(lines)
    if fmt == "csv":
        return ",".join(headers) + "\n" + ",".join(values)
    raise ContractError(f"unknown report format {fmt!r}")
