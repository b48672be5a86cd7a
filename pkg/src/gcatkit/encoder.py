"""Stage 2: relation-aware multi-head attention encoder.

Every triple in an entity's n-hop neighborhood (self included, via a
dedicated learned self-relation) is projected to a representation vector;
a per-head scoring row turns these into logits, softmax-normalized within
each entity's neighborhood group. Layer 1 concatenates the heads, layer 2
averages them, relations pass through two linear transforms, and a
residual projection of the initial embeddings is added at the end.

Multi-hop paths are embedded as the sum of their relation embeddings,
which is the natural composition under the translational objective the
whole pipeline optimizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels as K
from . import diff
from .dataio import Checkpoint, DatasetBundle, LossLog
from .errors import DivergenceError, EmptyDatasetError, InvalidConfigError, ShapeError
from .graph import NeighborhoodIndex, build_neighborhood_index
from .optim import make_optimizer
from .sampling import TrainPair, make_batch, stage_rng
from .transe import EmbeddingTable, translation_margin_loss


@dataclass
class EncoderConfig:
    n_head: int = 2
    d_k: int = 100          # per-head width of layer 1; layer-1 output is n_head * d_k
    d_out: int = 200        # entity output width (layer 2, heads averaged)
    p_mid: int = 200        # relation width after the first transform
    p_out: int = 200        # relation output width; must equal d_out for the L1 loss
    n_hop: int = 2
    gamma: float = 1.0
    lr: float = 0.001
    epochs: int = 300
    batch_size: int = 128
    neg_ratio: int = 1
    seed: int = 0
    plain_sgd: bool = False
    filtered_negatives: bool = False

    def validate(self) -> None:
        for name in ("n_head", "d_k", "d_out", "p_mid", "p_out", "n_hop",
                     "epochs", "batch_size", "neg_ratio"):
            if getattr(self, name) < 1:
                raise InvalidConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.gamma <= 0:
            raise InvalidConfigError(f"gamma must be > 0, got {self.gamma}")
        if self.lr < 0:
            raise InvalidConfigError(f"lr must be >= 0, got {self.lr}")
        if self.p_out != self.d_out:
            raise InvalidConfigError(
                f"p_out ({self.p_out}) must equal d_out ({self.d_out}): the margin loss "
                "adds relation rows to entity rows")


@dataclass
class EncoderParams:
    """Learnable weights; ``w1``/``w2`` are indexed [layer][head].

    Projection matrices are stored row-major, i.e. (input_dim, output_dim),
    so a row of embeddings multiplies on the left.
    """

    w1: list[list[np.ndarray]]
    w2: list[list[np.ndarray]]
    w_rel1: np.ndarray
    w_rel2: np.ndarray
    w_res: np.ndarray
    self_relation: np.ndarray  # (1, P_in) row for the empty self path

    @property
    def n_head(self) -> int:
        return len(self.w1[0])

    def param_dict(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for layer in (0, 1):
            for head in range(self.n_head):
                out[f"w1_{layer + 1}_{head}"] = self.w1[layer][head]
                out[f"w2_{layer + 1}_{head}"] = self.w2[layer][head]
        out["w_rel1"] = self.w_rel1
        out["w_rel2"] = self.w_rel2
        out["w_res"] = self.w_res
        out["self_relation"] = self.self_relation
        return out


@dataclass
class EncoderOutput:
    entity_out: np.ndarray    # (N_e, d_out)
    relation_out: np.ndarray  # (N_r, p_out)


@dataclass
class EncoderTrainResult:
    output: EncoderOutput
    params: EncoderParams
    table: EmbeddingTable  # input embeddings as fine-tuned by this stage


def init_encoder_params(d_in: int, p_in: int, cfg: EncoderConfig,
                        rng: np.random.Generator) -> EncoderParams:
    """Normal init scaled by 1/sqrt(fan_in), drawn in a fixed documented order:
    layer 1 heads (w1 then w2 each), layer 2 heads, w_rel1, w_rel2, w_res,
    self_relation."""

    def draw(rows: int, cols: int) -> np.ndarray:
        return rng.normal(0.0, 1.0 / math.sqrt(rows), size=(rows, cols))

    in1 = 2 * d_in + p_in
    d_mid = cfg.n_head * cfg.d_k
    in2 = 2 * d_mid + cfg.p_mid
    w1 = [[], []]
    w2 = [[], []]
    for head in range(cfg.n_head):
        w1[0].append(draw(in1, cfg.d_k))
        w2[0].append(draw(cfg.d_k, 1))
    for head in range(cfg.n_head):
        w1[1].append(draw(in2, cfg.d_out))
        w2[1].append(draw(cfg.d_out, 1))
    return EncoderParams(
        w1=w1,
        w2=w2,
        w_rel1=draw(p_in, cfg.p_mid),
        w_rel2=draw(cfg.p_mid, cfg.p_out),
        w_res=draw(d_in, cfg.d_out),
        self_relation=draw(1, p_in),
    )


class IndexTables:
    """Constant matrices derived from a NeighborhoodIndex.

    Entries are flattened in (entity, neighbor, path) order; the selector
    matrices gather source/neighbor embeddings and (summed) path relation
    embeddings, and ``m_agg`` scatters weighted entries back per entity.
    Column ``n_relations`` of ``m_path`` is the virtual self-relation.
    """

    def __init__(self, index: NeighborhoodIndex, n_relations: int):
        entries = [(i, j, path)
                   for i, per_entity in enumerate(index.entries)
                   for (j, path) in per_entity]
        n = len(entries)
        n_e = len(index.entries)
        self.n_relations = n_relations
        self.entries = entries
        self.m_src = np.zeros((n, n_e))
        self.m_dst = np.zeros((n, n_e))
        self.m_path = np.zeros((n, n_relations + 1))
        self.m_agg = np.zeros((n_e, n))
        groups = []
        cursor = 0
        for i, per_entity in enumerate(index.entries):
            size = len(per_entity)
            groups.append(np.arange(cursor, cursor + size))
            cursor += size
        self.groups = groups
        for k, (i, j, path) in enumerate(entries):
            self.m_src[k, i] = 1.0
            self.m_dst[k, j] = 1.0
            if path:
                for rel in path:
                    self.m_path[k, rel] += 1.0
            else:
                self.m_path[k, n_relations] = 1.0
            self.m_agg[i, k] = 1.0


def _attention_block(entity_node: diff.Node, relation_aug_node: diff.Node,
                     w1s: Sequence[diff.Node], w2s: Sequence[diff.Node],
                     tables: IndexTables, combine: str) -> diff.Node:
    src = diff.matmul(diff.constant(tables.m_src), entity_node)
    dst = diff.matmul(diff.constant(tables.m_dst), entity_node)
    rel = diff.matmul(diff.constant(tables.m_path), relation_aug_node)
    triples = diff.concat_cols([src, dst, rel])
    agg_const = diff.constant(tables.m_agg)
    aggs = []
    for w1, w2 in zip(w1s, w2s):
        reps = diff.matmul(triples, w1)
        logits = diff.matmul(reps, w2)
        alpha = diff.grouped_softmax(diff.leaky_relu(logits), tables.groups)
        tiled = diff.matmul(alpha, diff.constant(np.ones((1, reps.value.shape[1]))))
        aggs.append(diff.matmul(agg_const, diff.mul(tiled, reps)))
    if combine == "concat":
        return diff.concat_cols([diff.leaky_relu(a) for a in aggs])
    total = aggs[0]
    for a in aggs[1:]:
        total = diff.add(total, a)
    return diff.leaky_relu(diff.scale(total, 1.0 / len(aggs)))


def encoder_graph(leaves: dict[str, diff.Node], tables: IndexTables,
                  n_head: int) -> tuple[diff.Node, diff.Node]:
    """Full differentiable forward pass; returns (entity_out, relation_out)."""
    e0 = leaves["entities"]
    r0_aug = diff.concat_rows([leaves["relations"], leaves["self_relation"]])
    w1_1 = [leaves[f"w1_1_{h}"] for h in range(n_head)]
    w2_1 = [leaves[f"w2_1_{h}"] for h in range(n_head)]
    w1_2 = [leaves[f"w1_2_{h}"] for h in range(n_head)]
    w2_2 = [leaves[f"w2_2_{h}"] for h in range(n_head)]

    e1 = _attention_block(e0, r0_aug, w1_1, w2_1, tables, "concat")
    r1_aug = diff.matmul(r0_aug, leaves["w_rel1"])
    e2 = _attention_block(e1, r1_aug, w1_2, w2_2, tables, "average")
    r2_aug = diff.matmul(r1_aug, leaves["w_rel2"])
    relation_out = diff.take_rows(r2_aug, range(tables.n_relations))
    entity_out = diff.add(diff.matmul(e0, leaves["w_res"]), e2)
    return entity_out, relation_out


def _leaves_from(params: EncoderParams, entities: np.ndarray, relations: np.ndarray,
                 trainable: bool) -> dict[str, diff.Node]:
    make = diff.leaf if trainable else (lambda name, v: diff.constant(v))
    leaves = {name: make(name, arr) for name, arr in params.param_dict().items()}
    leaves["entities"] = make("entities", entities)
    leaves["relations"] = make("relations", relations)
    return leaves


def encode(params: EncoderParams, entities: np.ndarray, relations: np.ndarray,
           index: Union[NeighborhoodIndex, IndexTables]) -> EncoderOutput:
    """Run the forward pass on plain arrays and return plain arrays."""
    tables = index if isinstance(index, IndexTables) else IndexTables(index, relations.shape[0])
    h, r = encoder_graph(_leaves_from(params, entities, relations, trainable=False),
                         tables, params.n_head)
    return EncoderOutput(entity_out=h.value, relation_out=r.value)


# ---------------------------------------------------------------------------
# Piecewise operations (plain numpy); used directly by tests and tooling
# ---------------------------------------------------------------------------


def path_embedding(relation_embs: np.ndarray, self_relation: np.ndarray,
                   path: Sequence[int]) -> np.ndarray:
    """Relation vector of a path: sum along the path, self row when empty."""
    if len(path) == 0:
        return np.asarray(self_relation).reshape(-1).copy()
    return np.asarray([relation_embs[r] for r in path]).sum(axis=0)


def triple_repr(params: EncoderParams, layer: int, head: int,
                e_i: np.ndarray, e_j: np.ndarray, rel_vec: np.ndarray) -> np.ndarray:
    """Projected representation of one neighborhood triple: W1 applied to
    [e_i || e_j || rel]."""
    w1 = params.w1[layer - 1][head]
    concat = np.concatenate([np.ravel(e_i), np.ravel(e_j), np.ravel(rel_vec)])
    if concat.shape[0] != w1.shape[0]:
        raise ShapeError(f"triple_repr: concat dim {concat.shape[0]} vs W1 rows {w1.shape[0]}")
    return concat @ w1


def attention_weights(params: EncoderParams, layer: int, head: int, source: int,
                      entity_embs: np.ndarray, relation_aug: np.ndarray,
                      entries: Sequence[tuple[int, tuple[int, ...]]]) -> np.ndarray:
    """Normalized attention over one entity's neighborhood entries.

    ``relation_aug`` must carry the (layer-appropriate) self-relation as
    its last row; ``entries`` are (neighbor, path) pairs as stored in the
    NeighborhoodIndex.
    """
    self_row = relation_aug[-1]
    logits = np.empty(len(entries))
    for k, (j, path) in enumerate(entries):
        rel_vec = path_embedding(relation_aug, self_row, path)
        rep = triple_repr(params, layer, head, entity_embs[source], entity_embs[j], rel_vec)
        logits[k] = rep @ params.w2[layer - 1][head][:, 0]
    act = K.leaky_relu(logits, diff.DEFAULT_LEAKY_SLOPE)
    return K.segment_softmax(act, np.array([0, len(entries)], dtype=np.int64))


def layer_forward(params: EncoderParams, layer: int, entity_embs: np.ndarray,
                  relation_embs: np.ndarray, index: NeighborhoodIndex,
                  self_row: Optional[np.ndarray] = None) -> np.ndarray:
    """One attention layer on plain arrays (layer 1 concatenates heads,
    layer 2 averages them).

    ``relation_embs`` has one row per relation; the self-relation row is
    appended internally (defaulting to the stored parameter for layer 1
    and its first transform for layer 2).
    """
    if self_row is None:
        self_row = params.self_relation
        if layer == 2:
            self_row = self_row @ params.w_rel1
    relation_aug = np.vstack([relation_embs, np.asarray(self_row).reshape(1, -1)])
    tables = IndexTables(index, relation_embs.shape[0])
    e_node = diff.constant(entity_embs)
    r_node = diff.constant(relation_aug)
    w1s = [diff.constant(w) for w in params.w1[layer - 1]]
    w2s = [diff.constant(w) for w in params.w2[layer - 1]]
    combine = "concat" if layer == 1 else "average"
    return _attention_block(e_node, r_node, w1s, w2s, tables, combine).value


def relation_transform(params: EncoderParams, relation_embs: np.ndarray,
                       stage: int = 1) -> np.ndarray:
    """Linear relation transform; stage 1 follows layer 1, stage 2 layer 2."""
    w = params.w_rel1 if stage == 1 else params.w_rel2
    if relation_embs.shape[1] != w.shape[0]:
        raise ShapeError(f"relation_transform: {relation_embs.shape} @ {w.shape}")
    return relation_embs @ w


def residual_merge(params: EncoderParams, e_initial: np.ndarray,
                   e_final: np.ndarray) -> np.ndarray:
    """Project the initial embeddings and add them to the layer-2 output."""
    if e_initial.shape[1] != params.w_res.shape[0]:
        raise ShapeError(f"residual_merge: {e_initial.shape} @ {params.w_res.shape}")
    projected = e_initial @ params.w_res
    if projected.shape != e_final.shape:
        raise ShapeError(f"residual_merge: {projected.shape} vs {e_final.shape}")
    return projected + e_final


def encoder_loss(output: EncoderOutput, pairs: Sequence[TrainPair], gamma: float) -> diff.Node:
    """Margin loss over fixed encoder outputs (leaves named entities/relations)."""
    return translation_margin_loss(
        diff.leaf("entities", output.entity_out),
        diff.leaf("relations", output.relation_out),
        pairs,
        gamma,
    )


def train_encoder(
    bundle: DatasetBundle,
    init_table: EmbeddingTable,
    cfg: EncoderConfig,
    loss_log: Optional[LossLog] = None,
) -> EncoderTrainResult:
    """Train attention weights and input embeddings jointly with Adam.

    The neighborhood index is built over the training graph (so auxiliary
    multi-hop paths come from training edges only); corruption pairs are
    scored on the output matrices with the shared margin loss.
    """
    cfg.validate()
    if not bundle.train:
        raise EmptyDatasetError("no training triples")
    rng = stage_rng(cfg.seed, "encoder")
    index = build_neighborhood_index(bundle.graph, cfg.n_hop)
    tables = IndexTables(index, bundle.num_relations)
    d_in = init_table.entities.shape[1]
    p_in = init_table.relations.shape[1]
    params = init_encoder_params(d_in, p_in, cfg, rng)

    trainable = dict(params.param_dict())
    trainable["entities"] = init_table.entities.copy()
    trainable["relations"] = init_table.relations.copy()
    opt = make_optimizer(trainable, cfg.lr, cfg.plain_sgd)
    forbid = set(bundle.train) if cfg.filtered_negatives else None
    batches = math.ceil(len(bundle.train) / cfg.batch_size)

    for epoch in range(1, cfg.epochs + 1):
        total = 0.0
        pair_count = 0
        for _ in range(batches):
            pairs = make_batch(bundle.train, cfg.batch_size, rng,
                               bundle.num_entities, cfg.neg_ratio, forbid)
            leaves = {name: diff.leaf(name, arr) for name, arr in trainable.items()}
            h, r = encoder_graph(leaves, tables, cfg.n_head)
            root = translation_margin_loss(h, r, pairs, cfg.gamma)
            loss = float(root.value[0, 0])
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite loss {loss} at epoch {epoch}")
            grads = diff.backward(root)
            opt.step(grads)
            total += loss
            pair_count += len(pairs)
        if loss_log is not None:
            loss_log.append(epoch, total / pair_count)

    table = EmbeddingTable(entities=trainable["entities"], relations=trainable["relations"])
    output = encode(params, table.entities, table.relations, tables)
    return EncoderTrainResult(output=output, params=params, table=table)


def encoder_checkpoint(result: EncoderTrainResult) -> Checkpoint:
    blocks = dict(result.params.param_dict())
    blocks["entities"] = result.table.entities
    blocks["relations"] = result.table.relations
    blocks["entity_out"] = result.output.entity_out
    blocks["relation_out"] = result.output.relation_out
    return Checkpoint(stage="encoder", blocks=blocks)


def result_from_checkpoint(ckpt: Checkpoint) -> EncoderTrainResult:
    names = ckpt.blocks.keys()
    n_head = sum(1 for n in names if n.startswith("w1_1_"))
    w1 = [[ckpt.block64(f"w1_{layer}_{h}") for h in range(n_head)] for layer in (1, 2)]
    w2 = [[ckpt.block64(f"w2_{layer}_{h}") for h in range(n_head)] for layer in (1, 2)]
    params = EncoderParams(
        w1=w1,
        w2=w2,
        w_rel1=ckpt.block64("w_rel1"),
        w_rel2=ckpt.block64("w_rel2"),
        w_res=ckpt.block64("w_res"),
        self_relation=ckpt.block64("self_relation"),
    )
    output = EncoderOutput(entity_out=ckpt.block64("entity_out"),
                           relation_out=ckpt.block64("relation_out"))
    table = EmbeddingTable(entities=ckpt.block64("entities"),
                           relations=ckpt.block64("relations"))
    return EncoderTrainResult(output=output, params=params, table=table)
