"""Mask-archive analysis: correlation series and the exploration ordering."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .io import InputError, read_indices, write_indices, write_json
from .trainer import UndefinedCorrelationError, mask_pearson

__all__ = [
    "MaskArchive",
    "write_mask_archive_entry",
    "load_mask_archive",
    "correlation_series",
    "window_median",
    "ordering_holds",
    "CORRELATION_COLUMNS",
]

MANIFEST = "manifest.json"
CORRELATION_COLUMNS = ("run", "epoch", "corr_final", "corr_prev")


@dataclass
class MaskArchive:
    d: int
    masks: list[np.ndarray]
    epochs: list[int]


def _epoch_file(epoch: int) -> str:
    return f"epoch_{epoch:04d}.txt"


def write_mask_archive_entry(directory: os.PathLike | str, epoch: int, support: Sequence[int], d: int) -> None:
    """Add one epoch's support to an archive, rewriting the manifest atomically."""
    directory = Path(directory)
    write_indices(directory / _epoch_file(epoch), support)
    manifest = directory / MANIFEST
    epochs = json.loads(manifest.read_text())["epochs"] if manifest.exists() else []
    if epoch not in epochs:
        epochs.append(int(epoch))
    write_json(manifest, {"d": int(d), "epochs": sorted(epochs)})


def load_mask_archive(directory: os.PathLike | str) -> MaskArchive:
    directory = Path(directory)
    try:
        meta = json.loads((directory / MANIFEST).read_text())
        d, epochs = int(meta["d"]), [int(e) for e in meta["epochs"]]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{directory}: missing or invalid {MANIFEST} ({exc})") from None
    masks = []
    for e in epochs:
        idx = read_indices(directory / _epoch_file(e))
        if idx.size and (idx.min() < 0 or idx.max() >= d):
            raise InputError(f"{directory}: epoch {e} has indices outside [0, {d})")
        masks.append(idx)
    return MaskArchive(d, masks, epochs)


def _corr(a, b, d: int) -> float:
    try:
        return mask_pearson(a, b, d)
    except UndefinedCorrelationError:
        return float("nan")


def correlation_series(archive: MaskArchive) -> tuple[list[float], list[float]]:
    """Per-epoch correlation with the final mask and with the previous epoch.

    The previous-epoch series has one entry fewer (it starts at the second
    epoch). Undefined correlations (all-zero or all-one masks) are NaN.
    """
    if not archive.masks:
        return [], []
    final = archive.masks[-1]
    corr_final = [_corr(m, final, archive.d) for m in archive.masks]
    corr_prev = [_corr(b, a, archive.d) for a, b in zip(archive.masks, archive.masks[1:])]
    return corr_final, corr_prev


def window_median(archive: MaskArchive, lo: int, hi: int) -> float:
    """Median of the previous-epoch correlation over epochs ``lo..hi`` inclusive."""
    _, prev = correlation_series(archive)
    vals = [c for e, c in zip(archive.epochs[1:], prev) if lo <= e <= hi and not np.isnan(c)]
    return float(np.median(vals)) if vals else float("nan")


def ordering_holds(medians: Mapping[str, float], order: Sequence[str]) -> bool:
    """True when ``medians[order[0]] <= medians[order[1]] <= ...``."""
    vals = [medians[name] for name in order]
    return all(a <= b for a, b in zip(vals, vals[1:]))
