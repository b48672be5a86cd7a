"""Stage 3: convolutional triple scoring over the encoder's outputs.

Each triple is viewed as a (dim, 3) stack of its head, relation, and tail
vectors; width-3 filters slide down the stack, the ReLU feature maps are
concatenated, and a linear output vector turns them into one real score.
Training minimizes the soft-margin loss log(1 + exp(l * f)) with labels
+1 for real triples and -1 for corruptions, plus an L2 penalty on the
output vector. Minimization drives real triples toward negative scores,
so candidates are ranked by ascending score (see evaluate.LOWER_IS_BETTER).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from . import diff
from .dataio import Checkpoint, DatasetBundle, LossLog
from .encoder import EncoderOutput
from .errors import DivergenceError, EmptyDatasetError, InvalidConfigError, ShapeError
from .graph import Triple
from .optim import make_optimizer
from .sampling import make_batch, stage_rng


@dataclass
class DecoderConfig:
    num_filters: int = 8
    reg_lambda: float = 0.001
    lr: float = 0.001
    epochs: int = 200
    batch_size: int = 128
    neg_ratio: int = 1
    seed: int = 0
    plain_sgd: bool = False
    filtered_negatives: bool = False
    joint_finetune: bool = False  # also update the embedding matrices

    def validate(self) -> None:
        if self.num_filters < 1:
            raise InvalidConfigError(f"num_filters must be >= 1, got {self.num_filters}")
        if self.reg_lambda < 0:
            raise InvalidConfigError(f"reg_lambda must be >= 0, got {self.reg_lambda}")
        if self.lr < 0:
            raise InvalidConfigError(f"lr must be >= 0, got {self.lr}")
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidConfigError("epochs and batch_size must be >= 1")


@dataclass
class DecoderParams:
    filters: np.ndarray   # (num_filters, 3)
    w_out: np.ndarray     # (num_filters * dim, 1)
    reg_lambda: float

    @property
    def num_filters(self) -> int:
        return self.filters.shape[0]

    @property
    def dim(self) -> int:
        return self.w_out.shape[0] // self.num_filters


@dataclass
class DecoderTrainResult:
    params: DecoderParams
    entity_out: np.ndarray
    relation_out: np.ndarray


def init_decoder_params(dim: int, cfg: DecoderConfig, rng: np.random.Generator) -> DecoderParams:
    """Filters start near [0.1, 0.1, -0.1] so the initial score grows with
    the translational mismatch h + r - t; the output vector starts near a
    uniform positive average to preserve that correlation."""
    base = np.tile(np.array([0.1, 0.1, -0.1]), (cfg.num_filters, 1))
    filters = base + 0.01 * rng.normal(size=(cfg.num_filters, 3))
    w_out = np.full((cfg.num_filters * dim, 1), 1.0 / (cfg.num_filters * dim))
    w_out += 0.001 * rng.normal(size=w_out.shape)
    return DecoderParams(filters=filters, w_out=w_out, reg_lambda=cfg.reg_lambda)


def convkb_score(params: DecoderParams, h: np.ndarray, r: np.ndarray, t: np.ndarray) -> float:
    """Score one triple from its three embedding vectors (lower = more plausible)."""
    h = np.asarray(h, dtype=np.float64).reshape(1, -1)
    r = np.asarray(r, dtype=np.float64).reshape(1, -1)
    t = np.asarray(t, dtype=np.float64).reshape(1, -1)
    if not (h.shape == r.shape == t.shape):
        raise ShapeError(f"convkb_score: dims differ: {h.shape}, {r.shape}, {t.shape}")
    if h.shape[1] != params.dim:
        raise ShapeError(f"convkb_score: got dim {h.shape[1]}, params expect {params.dim}")
    return float(K.convkb_scores(h, r, t, params.filters, params.w_out[:, 0])[0])


def scores_graph(filters: diff.Node, w_out: diff.Node,
                 h: diff.Node, r: diff.Node, t: diff.Node) -> diff.Node:
    """Batched differentiable scores (b, 1) for rows of h/r/t.

    Filter coefficients are broadcast over the batch with one-hot selector
    products, keeping everything inside the primitive catalog while the
    feature maps stay vectorized over (batch, dim).
    """
    b, d = h.value.shape
    num_filters = filters.value.shape[0]
    if w_out.value.shape != (num_filters * d, 1):
        raise ShapeError(f"scores_graph: w_out {w_out.value.shape} vs "
                         f"({num_filters * d}, 1)")
    ones_col = diff.constant(np.ones((b, 1)))
    ones_row = diff.constant(np.ones((1, d)))
    total = None
    for m in range(num_filters):
        sel = np.zeros((1, num_filters))
        sel[0, m] = 1.0
        frow = diff.matmul(diff.constant(sel), filters)  # (1, 3)
        pre = None
        for k, emb in enumerate((h, r, t)):
            pick = np.zeros((3, 1))
            pick[k, 0] = 1.0
            coeff = diff.matmul(frow, diff.constant(pick))            # (1, 1)
            tiled = diff.matmul(diff.matmul(ones_col, coeff), ones_row)
            term = diff.mul(tiled, emb)
            pre = term if pre is None else diff.add(pre, term)
        fmap = diff.relu(pre)
        w_seg = diff.take_rows(w_out, range(m * d, (m + 1) * d))       # (d, 1)
        contrib = diff.matmul(fmap, w_seg)
        total = contrib if total is None else diff.add(total, contrib)
    return total


def convkb_loss_graph(leaves: dict[str, diff.Node], triples: Sequence[Triple],
                      labels: Sequence[int], reg_lambda: float) -> diff.Node:
    """Soft-margin loss over labeled triples, from an explicit leaf dict.

    ``leaves`` must contain filters, w_out, entities, and relations (the
    last two may be constants when embeddings are frozen).
    """
    entities = leaves["entities"]
    relations = leaves["relations"]
    h = diff.take_rows(entities, [t.head for t in triples])
    r = diff.take_rows(relations, [t.relation for t in triples])
    t = diff.take_rows(entities, [t.tail for t in triples])
    scores = scores_graph(leaves["filters"], leaves["w_out"], h, r, t)
    lbl = diff.constant(np.asarray(labels, dtype=np.float64).reshape(-1, 1))
    loss = diff.sum_all(diff.softplus(diff.mul(lbl, scores)))
    if reg_lambda != 0.0:
        w = leaves["w_out"]
        loss = diff.add(loss, diff.scale(diff.dot(w, w), reg_lambda / 2.0))
    return loss


def convkb_loss(params: DecoderParams, entity_embs: np.ndarray, relation_embs: np.ndarray,
                triples: Sequence[Triple], labels: Sequence[int],
                trainable_embeddings: bool = False) -> diff.Node:
    """Loss with leaves "filters"/"w_out" (embeddings frozen by default)."""
    make = diff.leaf if trainable_embeddings else (lambda name, v: diff.constant(v))
    leaves = {
        "filters": diff.leaf("filters", params.filters),
        "w_out": diff.leaf("w_out", params.w_out),
        "entities": make("entities", entity_embs),
        "relations": make("relations", relation_embs),
    }
    return convkb_loss_graph(leaves, triples, labels, params.reg_lambda)


def train_decoder(
    bundle: DatasetBundle,
    encoder_output: EncoderOutput,
    cfg: DecoderConfig,
    loss_log: Optional[LossLog] = None,
) -> DecoderTrainResult:
    """Train filters and the output vector on frozen encoder embeddings.

    With ``joint_finetune`` the embedding matrices are updated as well;
    the (possibly updated) matrices are returned alongside the parameters
    so evaluation always scores with what the decoder saw last.
    """
    cfg.validate()
    if not bundle.train:
        raise EmptyDatasetError("no training triples")
    entity_out = encoder_output.entity_out.copy()
    relation_out = encoder_output.relation_out.copy()
    if entity_out.shape[1] != relation_out.shape[1]:
        raise ShapeError("entity and relation output dims differ")
    dim = entity_out.shape[1]
    rng = stage_rng(cfg.seed, "decoder")
    params = init_decoder_params(dim, cfg, rng)

    trainable = {"filters": params.filters, "w_out": params.w_out}
    if cfg.joint_finetune:
        trainable["entities"] = entity_out
        trainable["relations"] = relation_out
    opt = make_optimizer(trainable, cfg.lr, cfg.plain_sgd)
    forbid = set(bundle.train) if cfg.filtered_negatives else None
    batches = math.ceil(len(bundle.train) / cfg.batch_size)

    for epoch in range(1, cfg.epochs + 1):
        total = 0.0
        count = 0
        for _ in range(batches):
            pairs = make_batch(bundle.train, cfg.batch_size, rng,
                               bundle.num_entities, cfg.neg_ratio, forbid)
            triples = [p.valid for p in pairs] + [p.invalid for p in pairs]
            labels = [1] * len(pairs) + [-1] * len(pairs)
            root = convkb_loss(params, entity_out, relation_out, triples, labels,
                               trainable_embeddings=cfg.joint_finetune)
            loss = float(root.value[0, 0])
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite loss {loss} at epoch {epoch}")
            grads = diff.backward(root)
            opt.step(grads)
            total += loss
            count += len(triples)
        if loss_log is not None:
            loss_log.append(epoch, total / count)

    return DecoderTrainResult(params=params, entity_out=entity_out, relation_out=relation_out)


def decoder_checkpoint(result: DecoderTrainResult) -> Checkpoint:
    return Checkpoint(stage="decoder", blocks={
        "filters": result.params.filters,
        "w_out": result.params.w_out,
        "entity_out": result.entity_out,
        "relation_out": result.relation_out,
        "reg_lambda": np.array([result.params.reg_lambda]),
    })


def result_from_checkpoint(ckpt: Checkpoint) -> DecoderTrainResult:
    params = DecoderParams(
        filters=ckpt.block64("filters"),
        w_out=ckpt.block64("w_out"),
        reg_lambda=float(ckpt.block64("reg_lambda")[0]),
    )
    return DecoderTrainResult(
        params=params,
        entity_out=ckpt.block64("entity_out"),
        relation_out=ckpt.block64("relation_out"),
    )
