"""Dataset files, synthetic benchmark generation, and on-disk artifacts.

Dataset format (JSON lines)::

    {"classes": ["open", "close"], "d": 2}
    {"id": "seq-1", "label": "open", "scores": [[0.9, 0.1], [0.6, 0.4]]}
    ...

Descriptor and model files are ``.npz`` archives with a ``.json`` sidecar
holding the metadata (kind, config hash, class names).
"""
from __future__ import annotations

import itertools
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .config import load_schema
from .errors import InvalidInputError, InvalidParameterError
from .pooling import ScoreSequence


@dataclass
class Dataset:
    classes: list
    d: int
    sequences: list = field(default_factory=list)

    def __len__(self):
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    def __getitem__(self, i):
        return self.sequences[i]

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.sequences], dtype=int)


def _atomic_write(path, write):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    _atomic_write(path, lambda fh: fh.write(text.encode()))


def dumps_dataset(ds: Dataset) -> str:
    lines = [json.dumps({"classes": list(ds.classes), "d": ds.d})]
    for s in ds.sequences:
        lines.append(json.dumps({"id": s.id, "label": ds.classes[s.label], "scores": s.scores.tolist()}))
    return "\n".join(lines) + "\n"


def save_dataset(ds: Dataset, path) -> None:
    atomic_write_text(path, dumps_dataset(ds))


def load_dataset(path) -> Dataset:
    """Parse and validate a JSON-lines dataset; errors name the offending line."""
    header_check = jsonschema.Draft202012Validator(load_schema("dataset_header.schema.json"))
    record_check = jsonschema.Draft202012Validator(load_schema("dataset_record.schema.json"))
    try:
        fh = open(path)
    except OSError as exc:
        raise InvalidInputError(f"cannot open dataset {path}: {exc.strerror}") from None
    with fh:
        ds = None
        seen = set()
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidInputError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            check = header_check if ds is None else record_check
            err = next(check.iter_errors(doc), None)
            if err is not None:
                raise InvalidInputError(f"{path}:{lineno}: {err.message}")
            if ds is None:
                ds = Dataset(list(doc["classes"]), int(doc["d"]))
                index = {name: i for i, name in enumerate(ds.classes)}
                continue
            if doc["label"] not in index:
                raise InvalidInputError(f"{path}:{lineno}: label {doc['label']!r} not among declared classes")
            if doc["id"] in seen:
                raise InvalidInputError(f"{path}:{lineno}: duplicate id {doc['id']!r}")
            bad = [len(row) for row in doc["scores"] if len(row) != ds.d]
            if bad:
                raise InvalidInputError(f"{path}:{lineno}: score row of length {bad[0]}, header says d={ds.d}")
            try:
                seq = ScoreSequence(doc["id"], index[doc["label"]], np.array(doc["scores"], dtype=float))
            except InvalidInputError as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
            seen.add(doc["id"])
            ds.sequences.append(seq)
    if ds is None:
        raise InvalidInputError(f"{path}: missing header line")
    return ds


def _mode_vector(peak_index, d, peak):
    v = np.full(d, (1.0 - peak) / (d - 1))
    v[peak_index] = peak
    return v


def synth_generate(
    n_classes: int = 6,
    per_class: int = 40,
    length_range: tuple = (30, 50),
    noise: float = 0.3,
    seed: int = 0,
    n_modes: int = 3,
    peak: float = 0.7,
) -> Dataset:
    """Synthetic score sequences in which only temporal order separates class pairs.

    Every class walks through an ordered list of peaked score vectors
    ("modes"), spending a Dirichlet-random share of its frames in each.
    Classes ``2m`` and ``2m + 1`` use the same modes in opposite orders, so
    their frame distributions, and hence their average-pooled scores, agree in
    expectation. Each frame is ``(1 - noise) * mode + noise * u`` with ``u``
    drawn from a flat Dirichlet over the ``d = n_classes`` scores.
    """
    if n_classes < 2:
        raise InvalidParameterError("need at least 2 classes")
    lo, hi = length_range
    if per_class < 1 or lo < 1 or hi < lo:
        raise InvalidParameterError(f"bad sizes: per_class={per_class}, length_range={length_range}")
    if not 0.0 <= noise <= 1.0:
        raise InvalidParameterError(f"noise must lie in [0, 1], got {noise}")
    if not 0.0 < peak <= 1.0:
        raise InvalidParameterError(f"peak must lie in (0, 1], got {peak}")
    d = n_classes
    n_modes = max(1, min(n_modes, d))
    rng = np.random.default_rng(seed)

    # distinct mode sets per pair while C(d, n_modes) allows it
    available = [list(c) for c in itertools.combinations(range(d), n_modes)]
    templates = []
    used = set()
    for _ in range((n_classes + 1) // 2):
        fresh = [c for c in available if tuple(c) not in used] or available
        chosen = list(fresh[rng.integers(len(fresh))])
        used.add(tuple(chosen))
        order = [int(i) for i in rng.permutation(chosen)]
        templates.append(order)
        templates.append(order[::-1])
    templates = templates[:n_classes]

    sequences = []
    for label, template in enumerate(templates):
        modes = np.array([_mode_vector(i, d, peak) for i in template])
        for j in range(per_class):
            n = int(rng.integers(lo, hi + 1))
            shares = rng.dirichlet(np.full(n_modes, 5.0))
            bounds = np.round(np.cumsum(shares) * n).astype(int)
            segment = np.searchsorted(bounds, np.arange(n), side="right")
            frames = modes[np.minimum(segment, n_modes - 1)]
            if noise > 0:
                frames = (1.0 - noise) * frames + noise * rng.dirichlet(np.ones(d), size=n)
            sequences.append(ScoreSequence(f"c{label}_{j:03d}", label, frames))
    return Dataset([f"class_{i}" for i in range(n_classes)], d, sequences)


def save_descriptors(path, values, ids, labels, meta: dict) -> None:
    """Write ``path`` (npz: values, ids, labels) and ``path + '.json'`` (meta)."""
    values = np.asarray(values, dtype=float)

    def write(fh):
        np.savez(fh, values=values, ids=np.array(ids, dtype=str), labels=np.asarray(labels, dtype=int))

    _atomic_write(path, write)
    meta = dict(meta, count=int(values.shape[0]), length=int(values.shape[1]))
    atomic_write_text(str(path) + ".json", json.dumps(meta, indent=1, sort_keys=True) + "\n")


def load_descriptors(path):
    """Returns ``(values, ids, labels, meta)``."""
    try:
        with np.load(path) as arch:
            values, ids, labels = arch["values"], arch["ids"].tolist(), arch["labels"]
        with open(str(path) + ".json") as fh:
            meta = json.load(fh)
    except (OSError, KeyError, ValueError) as exc:
        raise InvalidInputError(f"cannot read descriptor file {path}: {exc}") from None
    return values, ids, labels, meta


def save_model(path, model, meta: dict) -> None:
    def write(fh):
        np.savez(fh, weights=model.weights, biases=model.biases, objective=np.array(model.objective_trace))

    _atomic_write(path, write)
    meta = dict(meta, lam=model.lam, epochs=model.epochs, final_objective=model.final_objective)
    atomic_write_text(str(path) + ".json", json.dumps(meta, indent=1, sort_keys=True) + "\n")


def load_model(path):
    from .classify import LinearModel

    try:
        with np.load(path) as arch:
            weights, biases, objective = arch["weights"], arch["biases"], arch["objective"]
        with open(str(path) + ".json") as fh:
            meta = json.load(fh)
    except (OSError, KeyError, ValueError) as exc:
        raise InvalidInputError(f"cannot read model file {path}: {exc}") from None
    return LinearModel(weights, biases, meta["lam"], meta["epochs"], tuple(objective.tolist())), meta
