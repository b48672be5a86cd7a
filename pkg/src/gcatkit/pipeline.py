"""Stage orchestration shared by the CLI and the test harness.

Each stage reads the previous stage's checkpoint from the work directory
and leaves behind its own checkpoint, a per-epoch loss CSV, and a refresh
of the run manifest (resolved config, seed, kernel backend, and SHA-256
of every checkpoint), which is enough to replay the run bit-exactly.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

from . import _kernels
from .config import RunConfig
from .dataio import (DatasetBundle, LossLog, dataset_stats, load_checkpoint,
                     load_split, save_checkpoint)
from .decoder import (DecoderTrainResult, decoder_checkpoint, train_decoder)
from .decoder import result_from_checkpoint as decoder_from_checkpoint
from .encoder import (EncoderTrainResult, encoder_checkpoint, train_encoder)
from .encoder import result_from_checkpoint as encoder_from_checkpoint
from .errors import InvalidConfigError
from .evaluate import ConvScorer, Metrics, TranslationScorer, evaluate, report
from .toy import write_toy_files
from .transe import (EmbeddingTable, table_checkpoint, table_from_checkpoint,
                     train_transe)

CHECKPOINTS = {"transe": "transe.ckpt", "encoder": "encoder.ckpt", "decoder": "decoder.ckpt"}


def checkpoint_path(workdir, stage: str) -> str:
    return os.path.join(workdir, CHECKPOINTS[stage])


def load_bundle(cfg: RunConfig) -> DatasetBundle:
    """Resolve the dataset: explicit TSV paths, or the generated toy files."""
    if cfg.toy:
        os.makedirs(cfg.workdir, exist_ok=True)
        train, valid, test = write_toy_files(os.path.join(cfg.workdir, "toy"), cfg.seed)
        cfg.train, cfg.valid, cfg.test = train, valid, test
    if not (cfg.train and cfg.valid and cfg.test):
        raise InvalidConfigError("train, valid, and test paths are required (or use toy = true)")
    return load_split(cfg.train, cfg.valid, cfg.test)


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(workdir, cfg: RunConfig, command: str) -> str:
    lines = [f"command = {command}", f"kernels = {_kernels.backend_name()}"]
    lines += cfg.as_lines()
    for stage, fname in CHECKPOINTS.items():
        path = os.path.join(workdir, fname)
        if os.path.exists(path):
            lines.append(f"checkpoint.{stage}.sha256 = {_sha256(path)}")
    path = os.path.join(workdir, "manifest.txt")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def run_transe(bundle: DatasetBundle, cfg: RunConfig) -> EmbeddingTable:
    os.makedirs(cfg.workdir, exist_ok=True)
    log = LossLog(os.path.join(cfg.workdir, "transe_loss.csv"))
    table = train_transe(bundle, cfg.transe_config(), loss_log=log)
    save_checkpoint(checkpoint_path(cfg.workdir, "transe"), table_checkpoint(table))
    return table


def run_encoder(bundle: DatasetBundle, cfg: RunConfig) -> EncoderTrainResult:
    init_table = table_from_checkpoint(load_checkpoint(checkpoint_path(cfg.workdir, "transe")))
    log = LossLog(os.path.join(cfg.workdir, "encoder_loss.csv"))
    result = train_encoder(bundle, init_table, cfg.encoder_config(), loss_log=log)
    save_checkpoint(checkpoint_path(cfg.workdir, "encoder"), encoder_checkpoint(result))
    return result


def run_decoder(bundle: DatasetBundle, cfg: RunConfig) -> DecoderTrainResult:
    enc = encoder_from_checkpoint(load_checkpoint(checkpoint_path(cfg.workdir, "encoder")))
    log = LossLog(os.path.join(cfg.workdir, "decoder_loss.csv"))
    result = train_decoder(bundle, enc.output, cfg.decoder_config(), loss_log=log)
    save_checkpoint(checkpoint_path(cfg.workdir, "decoder"), decoder_checkpoint(result))
    return result


def make_scorer(workdir, stage: str):
    """Scorer for a trained stage: translational for the first two stages,
    convolutional for the decoder."""
    if stage == "transe":
        table = table_from_checkpoint(load_checkpoint(checkpoint_path(workdir, "transe")))
        return TranslationScorer(table.entities, table.relations)
    if stage == "encoder":
        enc = encoder_from_checkpoint(load_checkpoint(checkpoint_path(workdir, "encoder")))
        return TranslationScorer(enc.output.entity_out, enc.output.relation_out)
    if stage == "decoder":
        dec = decoder_from_checkpoint(load_checkpoint(checkpoint_path(workdir, "decoder")))
        return ConvScorer(dec.entity_out, dec.relation_out, dec.params)
    raise InvalidConfigError(f"unknown evaluation stage {stage!r}")


@dataclass
class EvalResult:
    raw: Metrics
    filtered: Metrics
    raw_path: str
    filtered_path: str


def run_evaluate(bundle: DatasetBundle, cfg: RunConfig, stage: str = "decoder") -> EvalResult:
    scorer = make_scorer(cfg.workdir, stage)
    known = set(bundle.train) | set(bundle.valid) | set(bundle.test)
    raw, filtered = evaluate(scorer, bundle.test, known, cfg.ks())
    raw_path = os.path.join(cfg.workdir, "metrics_raw.csv")
    filtered_path = os.path.join(cfg.workdir, "metrics_filtered.csv")
    with open(raw_path, "w", encoding="utf-8") as fh:
        fh.write(report(raw, "csv") + "\n")
    with open(filtered_path, "w", encoding="utf-8") as fh:
        fh.write(report(filtered, "csv") + "\n")
    return EvalResult(raw=raw, filtered=filtered, raw_path=raw_path, filtered_path=filtered_path)


def run_pipeline(cfg: RunConfig) -> EvalResult:
    """All three stages in order, then evaluation with the decoder scorer."""
    bundle = load_bundle(cfg)
    run_transe(bundle, cfg)
    run_encoder(bundle, cfg)
    run_decoder(bundle, cfg)
    result = run_evaluate(bundle, cfg, stage="decoder")
    write_manifest(cfg.workdir, cfg, "pipeline")
    return result


def stats_lines(bundle: DatasetBundle) -> list[str]:
    s = dataset_stats(bundle)
    return [
        f"entities: {s.num_entities}",
        f"relations: {s.num_relations}",
        f"train: {s.num_train}",
        f"valid: {s.num_valid}",
        f"test: {s.num_test}",
    ]
