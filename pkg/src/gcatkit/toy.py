"""Built-in compositional toy dataset for end-to-end runs.

Thirty-two entities sit on a cycle; three deterministic relations step
+1, +2, and +3 positions (so step3 facts are implied by step1 + step2
paths, exactly the structure multi-hop attention can exploit), and one
one-to-many relation jumps +5, +6, or +7. That yields 192 triples with
strong translational regularity, split roughly 73/7/20 into
train/valid/test by a deterministic modular rule phased by the seed.
"""

from __future__ import annotations

from .dataio import DatasetBundle, bundle_from_raw

NUM_ENTITIES = 32
RELATION_OFFSETS = {
    "step1": (1,),
    "step2": (2,),
    "step3": (3,),
    "jump": (5, 6, 7),
}

RawTriple = tuple[str, str, str]


def _entity(i: int) -> str:
    return f"e{i % NUM_ENTITIES:02d}"


def make_toy_split(seed: int = 0) -> tuple[list[RawTriple], list[RawTriple], list[RawTriple]]:
    """Deterministic train/valid/test split of the 192 toy facts.

    A (head, relation) family lands in test when (h + 2*rel + seed) % 5 == 0
    (about 20%), in valid when that residue is 1 and h % 3 == 0, and in
    train otherwise. Every entity keeps several training edges on both
    sides, so the held-out facts stay inferable.
    """
    train: list[RawTriple] = []
    valid: list[RawTriple] = []
    test: list[RawTriple] = []
    for h in range(NUM_ENTITIES):
        for rel_idx, (name, offsets) in enumerate(RELATION_OFFSETS.items()):
            residue = (h + 2 * rel_idx + seed) % 5
            if residue == 0:
                dest = test
            elif residue == 1 and h % 3 == 0:
                dest = valid
            else:
                dest = train
            for off in offsets:
                dest.append((_entity(h), name, _entity(h + off)))
    return train, valid, test


def make_toy_bundle(seed: int = 0) -> DatasetBundle:
    train, valid, test = make_toy_split(seed)
    return bundle_from_raw(train, valid, test)


def write_toy_files(dirpath, seed: int = 0):
    """Write train.tsv / valid.tsv / test.tsv under ``dirpath``."""
    import os

    os.makedirs(dirpath, exist_ok=True)
    paths = []
    for name, triples in zip(("train", "valid", "test"), make_toy_split(seed)):
        path = os.path.join(dirpath, f"{name}.tsv")
        with open(path, "w", encoding="utf-8") as fh:
            for h, r, t in triples:
                fh.write(f"{h}\t{r}\t{t}\n")
        paths.append(path)
    return tuple(paths)
