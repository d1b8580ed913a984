"""Per-source weighted fusion of stems from several separation models.

The fused stem for each source is a weighted average of that source's
stems across models; each source's weight column is constrained to the
probability simplex. An exhaustive grid search over the simplex finds
the column maximizing median SDR against reference stems.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Iterator, Optional, Sequence, Tuple

import numpy as np

from . import bsseval
from .errors import (
    ColumnSumViolation,
    ModelCountMismatch,
    NegativeWeight,
    SampleRateMismatch,
    ShapeMismatch,
)
from .core import SOURCE_NAMES, SourceWaveformSet, Waveform, source_labels

COLUMN_SUM_TOL = 1e-6

_DEFAULT_WEIGHTS_RESOURCE = "data/default_weights.json"


@dataclass
class BlendWeights:
    """Model-by-source mixing matrix; every source column sums to one."""

    weights: np.ndarray
    model_names: Tuple[str, ...]
    source_names: Tuple[str, ...] = SOURCE_NAMES

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.ndim != 2:
            raise ValueError(f"weights must be 2-D (models x sources), got shape {weights.shape}")
        if not np.all(np.isfinite(weights)):
            raise ValueError("weights contain non-finite entries")
        if weights.shape[0] != len(self.model_names):
            raise ValueError(
                f"{weights.shape[0]} weight rows but {len(self.model_names)} model names"
            )
        if weights.shape[1] != len(self.source_names):
            raise ValueError(
                f"{weights.shape[1]} weight columns but {len(self.source_names)} source names"
            )
        negative = np.argwhere(weights < 0)
        if negative.size:
            m, j = negative[0]
            raise NegativeWeight(
                f"weight for model {self.model_names[m]!r}, source "
                f"{self.source_names[j]!r} is negative ({weights[m, j]})"
            )
        sums = weights.sum(axis=0)
        for j, total in enumerate(sums):
            if abs(total - 1.0) > COLUMN_SUM_TOL:
                raise ColumnSumViolation(
                    f"source {self.source_names[j]!r} weights sum to {total}, expected 1"
                )
        self.weights = weights
        self.model_names = tuple(self.model_names)
        self.source_names = tuple(self.source_names)

    @property
    def num_models(self) -> int:
        return self.weights.shape[0]

    @property
    def num_sources(self) -> int:
        return self.weights.shape[1]


def validate_weights(
    raw,
    model_names: Optional[Sequence[str]] = None,
    source_names: Sequence[str] = SOURCE_NAMES,
) -> BlendWeights:
    """Check a raw model-by-source matrix; there is no renormalization."""
    weights = np.asarray(raw, dtype=np.float64)
    if weights.ndim != 2:
        raise ValueError(f"weights must be 2-D (models x sources), got shape {weights.shape}")
    if model_names is None:
        model_names = tuple(f"model_{i}" for i in range(weights.shape[0]))
    return BlendWeights(weights, tuple(model_names), tuple(source_names))


def _check_stem_sets(per_model_stems: Sequence[SourceWaveformSet]) -> None:
    first = per_model_stems[0]
    for stems in per_model_stems[1:]:
        if stems.num_sources != first.num_sources or stems.stacked().shape != first.stacked().shape:
            raise ShapeMismatch("per-model stem sets have different shapes")
        if stems.sample_rate != first.sample_rate:
            raise SampleRateMismatch(
                f"stem sets have different rates: {stems.sample_rate} vs {first.sample_rate}"
            )


def blend(per_model_stems: Sequence[SourceWaveformSet], w: BlendWeights) -> SourceWaveformSet:
    """fused_j = sum_m w[m, j] * stems_m[j], sample-wise."""
    if len(per_model_stems) != w.num_models:
        raise ModelCountMismatch(
            f"{len(per_model_stems)} stem sets but {w.num_models} weight rows"
        )
    _check_stem_sets(per_model_stems)
    first = per_model_stems[0]
    if first.num_sources != w.num_sources:
        raise ShapeMismatch(
            f"stem sets carry {first.num_sources} sources but weights have {w.num_sources}"
        )
    fused = []
    for j in range(w.num_sources):
        acc = np.zeros_like(first.sources[j].samples)
        for m, stems in enumerate(per_model_stems):
            acc += w.weights[m, j] * stems.sources[j].samples
        fused.append(Waveform(acc, first.sample_rate))
    return SourceWaveformSet(fused)


def _simplex_columns(num_models: int, steps: int) -> Iterator[Tuple[int, ...]]:
    """All nonnegative integer columns summing to `steps`, lexicographically."""
    if num_models == 1:
        yield (steps,)
        return
    for head in range(steps + 1):
        for rest in _simplex_columns(num_models - 1, steps - head):
            yield (head,) + rest


def search_weights(
    per_model_stems: Sequence[SourceWaveformSet],
    references: SourceWaveformSet,
    grid_step: float = 0.01,
    metric: Optional[Callable[[SourceWaveformSet, Waveform, int], float]] = None,
    eval_config: Optional[bsseval.EvalConfig] = None,
    model_names: Optional[Sequence[str]] = None,
) -> BlendWeights:
    """Exhaustive per-source grid search for blend weights.

    Each source column is chosen independently from the simplex grid
    with spacing grid_step to maximize the median SDR of the blended
    stem; ties go to the lexicographically smallest column.
    """
    if len(per_model_stems) < 1:
        raise ValueError("need at least one model")
    steps = round(1.0 / grid_step)
    if steps < 1 or abs(steps * grid_step - 1.0) > 1e-9:
        raise ValueError(f"grid_step {grid_step} does not divide 1 evenly")
    _check_stem_sets(list(per_model_stems) + [references])
    if metric is None:
        cfg = eval_config if eval_config is not None else bsseval.EvalConfig()

        def metric(refs, estimate, source_index, _cfg=cfg):
            return bsseval.median_sdr(refs, estimate, source_index, _cfg)

    num_models = len(per_model_stems)
    num_sources = references.num_sources
    rate = references.sample_rate
    weights = np.zeros((num_models, num_sources))
    for j in range(num_sources):
        stems_j = [stems.sources[j].samples for stems in per_model_stems]
        best_score = -np.inf
        best_column = None
        for column in _simplex_columns(num_models, steps):
            candidate = np.zeros_like(stems_j[0])
            for m in range(num_models):
                if column[m]:
                    candidate += (column[m] / steps) * stems_j[m]
            score = metric(references, Waveform(candidate, rate), j)
            if not np.isnan(score) and score > best_score:
                best_score = score
                best_column = column
        if best_column is None:  # every frame excluded: fall back to uniform-lex
            best_column = next(_simplex_columns(num_models, steps))
        weights[:, j] = np.asarray(best_column, dtype=np.float64) / steps
    if model_names is None:
        model_names = tuple(f"model_{i}" for i in range(num_models))
    return BlendWeights(weights, tuple(model_names), source_labels(num_sources))


# --- weights file I/O ---------------------------------------------------

def weights_to_json_dict(w: BlendWeights) -> dict:
    return {
        "models": list(w.model_names),
        "sources": list(w.source_names),
        "weights": [[float(v) for v in row] for row in w.weights],
    }


def save_weights(w: BlendWeights, path) -> None:
    text = json.dumps(weights_to_json_dict(w), indent=2) + "\n"
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp_name = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        os.unlink(tmp_name)
        raise


def weights_from_json_dict(payload: dict) -> BlendWeights:
    try:
        models = payload["models"]
        sources = payload["sources"]
        weights = payload["weights"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"weights JSON lacks required key: {exc}") from exc
    return validate_weights(weights, model_names=models, source_names=sources)


def load_weights(path) -> BlendWeights:
    with open(path) as fh:
        return weights_from_json_dict(json.load(fh))


def default_weights() -> BlendWeights:
    """The shipped per-source defaults for a spectrogram/spectrogram/
    waveform model trio (xumx, unet, demucs rows)."""
    text = resources.files("stemfuse").joinpath(_DEFAULT_WEIGHTS_RESOURCE).read_text()
    return weights_from_json_dict(json.loads(text))
