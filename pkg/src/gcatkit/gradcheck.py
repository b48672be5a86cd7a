"""Finite-difference fidelity checks for the three training losses.

Each check builds a small random instance (a handful of entities, tiny
widths), expresses the loss as a function of every trainable leaf, and
compares analytic gradients against central differences. Draws landing
within epsilon of a kink are resampled with a derived seed, per the
gradient checker's contract.
"""

from __future__ import annotations

import numpy as np

from . import diff
from .decoder import convkb_loss_graph
from .encoder import EncoderConfig, IndexTables, encoder_graph, init_encoder_params
from .errors import RetryableKinkError
from .graph import Triple, build_neighborhood_index, assemble_graph, Vocab
from .sampling import TrainPair, corrupt, new_rng
from .transe import translation_margin_loss

EPSILON = 1e-5
THRESHOLD = 1e-4
_MAX_RESAMPLES = 25


def _random_triples(rng: np.random.Generator, n_entities: int, n_relations: int,
                    count: int) -> list[Triple]:
    found: dict[Triple, None] = {}
    while len(found) < count:
        h = int(rng.integers(n_entities))
        t = int(rng.integers(n_entities))
        r = int(rng.integers(n_relations))
        if h != t:
            found.setdefault(Triple(h, r, t))
    return list(found)


def _random_pairs(rng, triples, n_entities, count) -> list[TrainPair]:
    picks = rng.choice(len(triples), size=count, replace=True)
    return [TrainPair(triples[int(i)], corrupt(triples[int(i)], n_entities, rng))
            for i in picks]


def check_transe_loss(seed: int) -> float:
    rng = new_rng(seed)
    n_e, n_r, dim = 5, 2, 3
    triples = _random_triples(rng, n_e, n_r, 6)
    pairs = _random_pairs(rng, triples, n_e, 3)
    inputs = {
        "entities": rng.normal(size=(n_e, dim)),
        "relations": rng.normal(size=(n_r, dim)),
    }

    def expr(leaves):
        return translation_margin_loss(leaves["entities"], leaves["relations"], pairs, 1.0)

    return diff.grad_check(expr, inputs, EPSILON)


def check_encoder_loss(seed: int) -> float:
    rng = new_rng(seed)
    n_e, n_r = 4, 2
    cfg = EncoderConfig(n_head=2, d_k=2, d_out=3, p_mid=3, p_out=3, n_hop=2, seed=seed)
    triples = _random_triples(rng, n_e, n_r, 5)
    graph = assemble_graph(Vocab(f"e{i}" for i in range(n_e)),
                           Vocab(f"r{i}" for i in range(n_r)), triples)
    index = build_neighborhood_index(graph, cfg.n_hop)
    tables = IndexTables(index, n_r)
    pairs = _random_pairs(rng, triples, n_e, 3)
    d_in, p_in = 3, 3
    params = init_encoder_params(d_in, p_in, cfg, rng)
    inputs = dict(params.param_dict())
    inputs["entities"] = rng.normal(size=(n_e, d_in))
    inputs["relations"] = rng.normal(size=(n_r, p_in))

    def expr(leaves):
        h, r = encoder_graph(leaves, tables, cfg.n_head)
        return translation_margin_loss(h, r, pairs, 1.0)

    return diff.grad_check(expr, inputs, EPSILON)


def check_convkb_loss(seed: int) -> float:
    rng = new_rng(seed)
    n_e, n_r, dim, num_filters = 5, 2, 4, 2
    triples = _random_triples(rng, n_e, n_r, 5)
    pairs = _random_pairs(rng, triples, n_e, 3)
    triple_list = [p.valid for p in pairs] + [p.invalid for p in pairs]
    labels = [1] * len(pairs) + [-1] * len(pairs)
    inputs = {
        "filters": rng.normal(size=(num_filters, 3)),
        "w_out": rng.normal(size=(num_filters * dim, 1)),
        "entities": rng.normal(size=(n_e, dim)),
        "relations": rng.normal(size=(n_r, dim)),
    }

    def expr(leaves):
        return convkb_loss_graph(leaves, triple_list, labels, reg_lambda=0.01)

    return diff.grad_check(expr, inputs, EPSILON)


def run_with_resample(check, seed: int) -> float:
    """Run one check, deriving fresh seeds while it reports kink landings."""
    for attempt in range(_MAX_RESAMPLES):
        try:
            return check(seed * 1000 + attempt)
        except RetryableKinkError:
            continue
    raise RetryableKinkError(f"{check.__name__}: no kink-free sample in {_MAX_RESAMPLES} tries")


def run_all(seed: int = 1) -> dict[str, float]:
    return {
        "transe_loss": run_with_resample(check_transe_loss, seed),
        "encoder_loss": run_with_resample(check_encoder_loss, seed),
        "convkb_loss": run_with_resample(check_convkb_loss, seed),
    }
