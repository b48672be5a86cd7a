"""gcatkit: knowledge-graph link prediction at desk scale.

Three-stage pipeline (translational initialization, relation-aware
multi-head graph attention, convolutional scoring) over a minimal
reverse-mode differentiation engine, with the standard raw/filtered
ranking evaluation protocol. Deterministic given a seed; numeric hot
loops run on a compiled kernel backend when available (see
``gcatkit._kernels``).
"""

from . import diff
from ._kernels import backend_name
from .dataio import (Checkpoint, DatasetBundle, DatasetStats, dataset_stats,
                     load_checkpoint, load_split, save_checkpoint)
from .decoder import (DecoderConfig, DecoderParams, convkb_loss, convkb_score,
                      init_decoder_params, train_decoder)
from .encoder import (EncoderConfig, EncoderOutput, EncoderParams, attention_weights,
                      encode, encoder_loss, init_encoder_params, layer_forward,
                      path_embedding, relation_transform, residual_merge,
                      train_encoder, triple_repr)
from .errors import (ChecksumError, ContractError, DivergenceError, EmptyDatasetError,
                     FormatError, GcatkitError, InvalidConfigError, IoError,
                     ParseError, RetryableKinkError, ShapeError)
from .evaluate import (ConvScorer, Metrics, RandomScorer, TranslationScorer,
                       evaluate, rank_entity, report)
from .graph import (KnowledgeGraph, NeighborhoodIndex, Triple, Vocab, WeightedGraph,
                    auxiliary_triples, build_graph, build_neighborhood_index,
                    demo_graph, first_order_vector, second_order_proximity)
from .sampling import TrainPair, corrupt, make_batch, new_rng, stage_rng
from .transe import (EmbeddingTable, TranseConfig, init_embeddings, train_transe,
                     transe_loss, transe_score, translation_margin_loss)

__version__ = "0.1.0"

__all__ = [
    "diff", "backend_name", "__version__",
    # graph
    "KnowledgeGraph", "NeighborhoodIndex", "Triple", "Vocab", "WeightedGraph",
    "auxiliary_triples", "build_graph", "build_neighborhood_index", "demo_graph",
    "first_order_vector", "second_order_proximity",
    # data
    "Checkpoint", "DatasetBundle", "DatasetStats", "dataset_stats",
    "load_checkpoint", "load_split", "save_checkpoint",
    # sampling
    "TrainPair", "corrupt", "make_batch", "new_rng", "stage_rng",
    # stages
    "EmbeddingTable", "TranseConfig", "init_embeddings", "train_transe",
    "transe_loss", "transe_score", "translation_margin_loss",
    "EncoderConfig", "EncoderOutput", "EncoderParams", "attention_weights",
    "encode", "encoder_loss", "init_encoder_params", "layer_forward",
    "path_embedding", "relation_transform", "residual_merge", "train_encoder",
    "triple_repr",
    "DecoderConfig", "DecoderParams", "convkb_loss", "convkb_score",
    "init_decoder_params", "train_decoder",
    # evaluation
    "ConvScorer", "Metrics", "RandomScorer", "TranslationScorer",
    "evaluate", "rank_entity", "report",
    # errors
    "GcatkitError", "EmptyDatasetError", "InvalidConfigError", "ParseError",
    "IoError", "FormatError", "ShapeError", "ChecksumError", "ContractError",
    "DivergenceError", "RetryableKinkError",
]
