"""Robustness and security benchmark pipelines, sweeps, confusion matrices.

Robustness classifies x + delta directly; security adds AWGN to the
perturbed signal first (default 20 dB relative to the perturbed power).
Both frameworks share one crafted perturbation per (signal, budget) so they
differ only in the post-attack noise.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .attacks import AttackConfig, craft_batch
from .classifiers import Checkpoint, MLModel, model_from_checkpoint
from .dataset import DatasetFile
from .errors import ArgumentError, ConfigError
from .sigsynth import noise_sigma


@dataclass(frozen=True)
class FrameworkKind:
    kind: str = "robustness"  # "robustness" | "security"
    post_noise_snr_db: float = 20.0
    noise_relative_to_clean: bool = False

    def __post_init__(self):
        if self.kind not in ("robustness", "security"):
            raise ConfigError(f"unknown framework kind {self.kind!r}")
        if self.kind == "security" and np.isnan(self.post_noise_snr_db):
            raise ConfigError("security framework needs a post-noise SNR")


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # CxC, row = true, col = predicted
    class_names: List[str]

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(self.counts < 0):
            raise ArgumentError("confusion counts must be non-negative")

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / float(self.counts.sum())

    def recalls(self) -> np.ndarray:
        rows = self.counts.sum(axis=1)
        return np.where(rows > 0, np.diag(self.counts) / np.maximum(rows, 1), 0.0)

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow([""] + self.class_names)
        for name, row in zip(self.class_names, self.counts):
            w.writerow([name] + [int(v) for v in row])
        return out.getvalue()


@dataclass
class AccuracyRow:
    framework: str
    attack: str  # "none", "fgsm", "pga"
    condition: str  # "natural" or a dB value as text
    accuracy: float
    n: int


@dataclass
class AccuracyTable:
    rows: List[AccuracyRow] = field(default_factory=list)

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["framework", "attack", "condition_db", "accuracy", "n"])
        for r in self.rows:
            w.writerow([r.framework, r.attack, r.condition, f"{r.accuracy:.6f}", r.n])
        return out.getvalue()


def _test_arrays(ds: DatasetFile, split: str = "test"):
    recs = ds.split_records(split)
    x = np.stack([r.samples for r in recs]).astype(np.float64)
    y = np.array([r.label for r in recs], dtype=np.int64)
    snr = np.array([r.snr_db for r in recs])
    return x, y, snr


def _stratified_head(x, y, snr, limit: int):
    """First `limit` records with classes interleaved, so a truncated
    evaluation subset stays class-balanced."""
    groups = [np.flatnonzero(y == c) for c in np.unique(y)]
    order = []
    for i in range(max(len(g) for g in groups)):
        for g in groups:
            if i < len(g):
                order.append(g[i])
    order = np.asarray(order[:limit], dtype=np.int64)
    return x[order], y[order], snr[order]


def _batched_logits(model, x: np.ndarray, snr: np.ndarray, batch: int = 256) -> np.ndarray:
    outs = []
    for i in range(0, len(x), batch):
        xb = x[i : i + batch]
        if isinstance(model, MLModel):
            outs.append(model.logits(xb, snr_db=float(snr[i])))
        else:
            outs.append(model.logits(xb))
    return np.concatenate(outs)


def _security_noise(x_pert: np.ndarray, x_clean: np.ndarray, framework: FrameworkKind,
                    seed: int) -> np.ndarray:
    if np.isinf(framework.post_noise_snr_db):
        return x_pert
    ref = x_clean if framework.noise_relative_to_clean else x_pert
    noisy = np.empty_like(x_pert)
    for i in range(len(x_pert)):
        p = float(np.mean(np.sum(ref[i] ** 2, axis=0)))
        sigma = noise_sigma(p, framework.post_noise_snr_db)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        noisy[i] = x_pert[i] + sigma * rng.standard_normal(x_pert[i].shape)
    return noisy


def _resolve(model_or_ckpt):
    return (
        model_from_checkpoint(model_or_ckpt)
        if isinstance(model_or_ckpt, Checkpoint)
        else model_or_ckpt
    )


def eval_framework(
    model_or_ckpt,
    ds: DatasetFile,
    attack: Optional[AttackConfig],
    framework: FrameworkKind,
    seed: int = 0,
    split: str = "test",
    surrogate=None,
    limit: Optional[int] = None,
    deltas: Optional[np.ndarray] = None,
) -> Tuple[AccuracyRow, ConfusionMatrix]:
    """One benchmark run: optional attack, optional post-noise, then classify.

    `surrogate` crafts the perturbation when the victim is not differentiable
    (HOC transfer case). Precomputed `deltas` short-circuit crafting so SPR
    sweeps can reuse one attack across both frameworks.
    """
    model = _resolve(model_or_ckpt)
    x, y, snr = _test_arrays(ds, split)
    if limit is not None:
        x, y, snr = _stratified_head(x, y, snr, limit)
    if attack is None:
        x_in = x
        attack_name = "none"
        condition = "natural"
    else:
        if deltas is None:
            attacker = _resolve(surrogate) if surrogate is not None else model
            deltas = craft_batch(attacker, x, y, attack)
        x_in = x + deltas
        attack_name = attack.kind
        condition = "inf" if np.isinf(attack.spr_db) else f"{attack.spr_db:g}"
    if framework.kind == "security" and attack is not None:
        x_in = _security_noise(x_in, x, framework, seed)
    logits = _batched_logits(model, x_in, snr)
    pred = logits.argmax(axis=1)
    c = len(ds.class_names)
    counts = np.zeros((c, c), dtype=np.int64)
    np.add.at(counts, (y, pred), 1)
    cm = ConfusionMatrix(counts, list(ds.class_names))
    row = AccuracyRow(framework.kind, attack_name, condition, float((pred == y).mean()), len(y))
    return row, cm


def sweep_snr(model_or_ckpt, ds: DatasetFile, split: str = "test") -> AccuracyTable:
    """Natural accuracy per SNR group; duplicate-SNR records merge."""
    model = _resolve(model_or_ckpt)
    x, y, snr = _test_arrays(ds, split)
    table = AccuracyTable()
    for snr_val in sorted(set(float(s) for s in snr)):
        mask = snr == snr_val
        if not np.any(mask):
            raise ArgumentError(f"empty SNR group {snr_val}")
        logits = _batched_logits(model, x[mask], snr[mask])
        acc = float((logits.argmax(axis=1) == y[mask]).mean())
        table.rows.append(AccuracyRow("robustness", "none", f"{snr_val:g}", acc, int(mask.sum())))
    return table


def sweep_spr(
    model_or_ckpt,
    ds: DatasetFile,
    attack_kind: str = "pga",
    spr_list: Sequence[float] = (25.0, 20.0, 15.0),
    frameworks: Sequence[FrameworkKind] = (FrameworkKind("robustness"),),
    seed: int = 0,
    steps: int = 20,
    step_frac: float = 0.125,
    surrogate=None,
    limit: Optional[int] = None,
    split: str = "test",
) -> Tuple[AccuracyTable, dict]:
    """Natural row plus one row per SPR per framework; perturbations are
    crafted once per SPR and shared across frameworks."""
    if len(spr_list) == 0:
        raise ArgumentError("SPR list must be non-empty")
    model = _resolve(model_or_ckpt)
    x, y, snr = _test_arrays(ds, split)
    if limit is not None:
        x, y, snr = _stratified_head(x, y, snr, limit)
    table = AccuracyTable()
    matrices = {}
    for fw in frameworks:
        row, cm = eval_framework(model, ds, None, fw, seed, split=split, limit=limit)
        table.rows.append(row)
        matrices[(fw.kind, "natural")] = cm
    attacker = _resolve(surrogate) if surrogate is not None else model
    for spr in spr_list:
        cfg = AttackConfig(attack_kind, spr, steps, step_frac)
        deltas = craft_batch(attacker, x, y, cfg)
        for fw in frameworks:
            row, cm = eval_framework(
                model, ds, cfg, fw, seed, split=split, limit=limit, deltas=deltas
            )
            table.rows.append(row)
            matrices[(fw.kind, f"{spr:g}")] = cm
    return table, matrices


def per_class_robustness(
    natural: ConfusionMatrix, attacked: ConfusionMatrix
) -> List[Tuple[str, float]]:
    """Per-class recall drops, sorted descending."""
    if natural.class_names != attacked.class_names:
        raise ArgumentError("confusion matrices cover different class sets")
    deltas = natural.recalls() - attacked.recalls()
    pairs = list(zip(natural.class_names, (float(d) for d in deltas)))
    return sorted(pairs, key=lambda p: -p[1])


def write_csv(path: str, content: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as f:
        f.write(content)
    os.replace(tmp, path)
