"""Stage 1: translational embedding initialization.

Entities and relations start uniform in +-6/sqrt(dim); relation rows are
L2-normalized once at init, entity rows at every epoch boundary. Each
update pushes valid triples at least ``gamma`` closer (in L1) than their
corruptions. The optimizer is Adam by default; ``plain_sgd`` restores the
bare gradient step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import diff
from .dataio import Checkpoint, DatasetBundle, LossLog
from .errors import DivergenceError, EmptyDatasetError, InvalidConfigError
from .graph import Triple
from .optim import make_optimizer
from .sampling import TrainPair, make_batch, stage_rng


@dataclass
class TranseConfig:
    dim: int = 200
    gamma: float = 1.0
    lr: float = 0.001
    epochs: int = 200
    batch_size: int = 128
    neg_ratio: int = 1
    seed: int = 0
    plain_sgd: bool = False
    filtered_negatives: bool = False

    def validate(self) -> None:
        if self.dim < 1:
            raise InvalidConfigError(f"dim must be >= 1, got {self.dim}")
        if self.gamma <= 0:
            raise InvalidConfigError(f"gamma must be > 0, got {self.gamma}")
        if self.lr < 0:
            raise InvalidConfigError(f"lr must be >= 0, got {self.lr}")
        if self.batch_size < 1:
            raise InvalidConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise InvalidConfigError(f"epochs must be >= 1, got {self.epochs}")


@dataclass
class EmbeddingTable:
    """Dense entity and relation matrices, float64, one row per id."""

    entities: np.ndarray
    relations: np.ndarray

    @property
    def dim(self) -> int:
        return self.entities.shape[1]


def normalize_rows(matrix: np.ndarray) -> None:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    np.divide(matrix, np.where(norms == 0.0, 1.0, norms), out=matrix)


def init_embeddings(n_entities: int, n_relations: int, cfg: TranseConfig,
                    rng: np.random.Generator) -> EmbeddingTable:
    """Uniform init in +-6/sqrt(dim); relations normalized, entities left raw.

    Relations are drawn before entities; entity rows get their first
    normalization at the first epoch boundary of training.
    """
    if cfg.dim < 1:
        raise InvalidConfigError(f"dim must be >= 1, got {cfg.dim}")
    if n_entities < 1 or n_relations < 1:
        raise InvalidConfigError("need at least one entity and one relation")
    bound = 6.0 / math.sqrt(cfg.dim)
    relations = rng.uniform(-bound, bound, size=(n_relations, cfg.dim))
    entities = rng.uniform(-bound, bound, size=(n_entities, cfg.dim))
    normalize_rows(relations)
    return EmbeddingTable(entities=entities, relations=relations)


def transe_score(table: EmbeddingTable, t: Triple) -> float:
    """L1 norm of h + r - t; lower means more plausible."""
    h = table.entities[t.head]
    r = table.relations[t.relation]
    tl = table.entities[t.tail]
    return float(np.abs(h + r - tl).sum())


def translation_margin_loss(entities: diff.Node, relations: diff.Node,
                            pairs: Sequence[TrainPair], gamma: float) -> diff.Node:
    """sum over pairs of max(0, d_valid - d_invalid + gamma) with L1 distances.

    Shared by the initializer (on the raw table) and the encoder (on its
    output matrices). |x| is realized as relu(x) + relu(-x), which carries
    the same sign(0)=0 subgradient as the scalar L1 primitive.
    """
    heads_v = [p.valid.head for p in pairs]
    tails_v = [p.valid.tail for p in pairs]
    heads_i = [p.invalid.head for p in pairs]
    tails_i = [p.invalid.tail for p in pairs]
    rels = [p.valid.relation for p in pairs]

    r = diff.take_rows(relations, rels)
    d_valid = diff.row_sums(diff.absval(
        diff.sub(diff.add(diff.take_rows(entities, heads_v), r),
                 diff.take_rows(entities, tails_v))))
    d_invalid = diff.row_sums(diff.absval(
        diff.sub(diff.add(diff.take_rows(entities, heads_i), r),
                 diff.take_rows(entities, tails_i))))
    margin = diff.constant(np.full((len(pairs), 1), gamma))
    return diff.sum_all(diff.relu(diff.add(diff.sub(d_valid, d_invalid), margin)))


def transe_loss(table: EmbeddingTable, pairs: Sequence[TrainPair], gamma: float) -> diff.Node:
    """Margin loss over the current table as a differentiable graph.

    Leaf names are "entities" and "relations"; ``diff.backward`` returns
    the gradients under those names.
    """
    return translation_margin_loss(
        diff.leaf("entities", table.entities),
        diff.leaf("relations", table.relations),
        pairs,
        gamma,
    )


def train_transe(
    bundle: DatasetBundle,
    cfg: TranseConfig,
    loss_log: Optional[LossLog] = None,
    progress: Optional[Callable[[int, float], None]] = None,
) -> EmbeddingTable:
    """Run the stage-1 training loop and return the final table.

    Epochs are ceil(|train|/batch_size) batches; entity rows are
    renormalized at every epoch boundary, including after the last epoch.
    """
    cfg.validate()
    if not bundle.train:
        raise EmptyDatasetError("no training triples")
    rng = stage_rng(cfg.seed, "transe")
    table = init_embeddings(bundle.num_entities, bundle.num_relations, cfg, rng)
    forbid = set(bundle.train) if cfg.filtered_negatives else None
    opt = make_optimizer({"entities": table.entities, "relations": table.relations},
                         cfg.lr, cfg.plain_sgd)
    batches = math.ceil(len(bundle.train) / cfg.batch_size)
    for epoch in range(1, cfg.epochs + 1):
        normalize_rows(table.entities)
        total = 0.0
        pair_count = 0
        for _ in range(batches):
            pairs = make_batch(bundle.train, cfg.batch_size, rng,
                               bundle.num_entities, cfg.neg_ratio, forbid)
            root = transe_loss(table, pairs, cfg.gamma)
            loss = float(root.value[0, 0])
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite loss {loss} at epoch {epoch}")
            grads = diff.backward(root)
            opt.step(grads)
            total += loss
            pair_count += len(pairs)
        mean_loss = total / pair_count
        if loss_log is not None:
            loss_log.append(epoch, mean_loss)
        if progress is not None:
            progress(epoch, mean_loss)
    normalize_rows(table.entities)
    return table


def table_checkpoint(table: EmbeddingTable) -> Checkpoint:
    return Checkpoint(stage="transe", blocks={
        "entities": table.entities,
        "relations": table.relations,
    })


def table_from_checkpoint(ckpt: Checkpoint) -> EmbeddingTable:
    return EmbeddingTable(
        entities=ckpt.block64("entities"),
        relations=ckpt.block64("relations"),
    )
