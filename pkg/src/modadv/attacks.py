"""SPR-budgeted L-infinity perturbation crafting: FGSM and PGA.

The budget is a signal-to-perturbation ratio in dB; the L-inf radius is
derived per signal so a full-magnitude sign perturbation on both rows has
exactly the budgeted power. PGA uses sign-of-gradient steps of size
beta * eps by default; the unsigned raw-gradient rule is available behind
`raw_grad=True` for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .classifiers import input_gradient_loss
from .errors import ArgumentError, ShapeError
from .sigsynth import IQSignal, measure_power


@dataclass(frozen=True)
class AttackConfig:
    kind: str = "pga"  # "fgsm" | "pga"
    spr_db: float = 20.0
    steps: int = 20
    step_frac: float = 0.125
    target: Optional[int] = None
    raw_grad: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("fgsm", "pga"):
            raise ArgumentError(f"unknown attack kind {self.kind!r}")
        if not np.isfinite(self.spr_db) and self.spr_db != np.inf:
            raise ArgumentError("spr_db must be finite or +inf")
        if self.steps < 1:
            raise ArgumentError("steps must be >= 1")
        if self.step_frac <= 0:
            raise ArgumentError("step_frac must be > 0")


@dataclass
class Perturbation:
    delta: np.ndarray  # 2xN
    eps: float
    measured_spr_db: float
    success: bool
    zero_grad_entries: int = 0


def spr_to_eps(p_x: float, spr_db: float) -> float:
    """L-inf radius such that a full sign perturbation has the budgeted power."""
    if p_x <= 0:
        raise ArgumentError("signal power must be positive")
    return float(np.sqrt(p_x * 10.0 ** (-spr_db / 10.0) / 2.0))


def measured_spr(x: np.ndarray, delta: np.ndarray) -> float:
    p_x = float(np.mean(np.sum(np.asarray(x, dtype=np.float64) ** 2, axis=0)))
    p_d = float(np.mean(np.sum(np.asarray(delta, dtype=np.float64) ** 2, axis=0)))
    if p_d == 0.0:
        return np.inf
    return 10.0 * np.log10(p_x / p_d)


def _craft_batch(
    model_or_ckpt,
    x: np.ndarray,
    labels: np.ndarray,
    config: AttackConfig,
) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized crafting; returns (deltas (B,2,N), eps (B,))."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    powers = np.mean(np.sum(x**2, axis=1), axis=1)
    if np.isinf(config.spr_db):
        return np.zeros_like(x), np.zeros(x.shape[0])
    eps = np.sqrt(powers * 10.0 ** (-config.spr_db / 10.0) / 2.0)
    targeted = config.target is not None
    eps3 = eps[:, None, None]
    if config.kind == "fgsm":
        _, grad = input_gradient_loss(model_or_ckpt, x, labels, targeted=targeted)
        delta = eps3 * np.sign(grad)
        return delta, eps
    delta = np.zeros_like(x)
    for _ in range(config.steps):
        _, grad = input_gradient_loss(model_or_ckpt, x + delta, labels, targeted=targeted)
        step = grad if config.raw_grad else np.sign(grad)
        delta = np.clip(delta + config.step_frac * eps3 * step, -eps3, eps3)
    return delta, eps


def _finish(model_or_ckpt, x: np.ndarray, signal: IQSignal, delta: np.ndarray, eps: float,
            config: AttackConfig, grad_zeros: int) -> Perturbation:
    from .classifiers import Checkpoint, model_from_checkpoint

    model = (
        model_from_checkpoint(model_or_ckpt)
        if isinstance(model_or_ckpt, Checkpoint)
        else model_or_ckpt
    )
    if model.preset == "max_likelihood":
        logits = model.logits((x + delta)[None], snr_db=signal.snr_db)
    else:
        logits = model.logits((x + delta)[None])
    pred = int(logits[0].argmax())
    if config.target is not None:
        success = pred == config.target
    else:
        success = signal.label is not None and pred != signal.label
    return Perturbation(
        delta=delta,
        eps=eps,
        measured_spr_db=measured_spr(x, delta),
        success=success,
        zero_grad_entries=grad_zeros,
    )


def fgsm(model_or_ckpt, signal: IQSignal, config: AttackConfig) -> Perturbation:
    """One-step sign attack: delta = eps * sign(input gradient)."""
    cfg = config if config.kind == "fgsm" else AttackConfig(
        "fgsm", config.spr_db, target=config.target, seed=config.seed
    )
    label = cfg.target if cfg.target is not None else signal.label
    if label is None:
        raise ArgumentError("signal needs a label (or the attack a target)")
    x = signal.samples
    if np.isinf(cfg.spr_db):
        return _finish(model_or_ckpt, x, signal, np.zeros_like(x), 0.0, cfg, 0)
    _, grad = input_gradient_loss(
        model_or_ckpt, x[None], np.array([label]), targeted=cfg.target is not None
    )
    zeros = int(np.sum(grad[0] == 0.0))
    eps = spr_to_eps(measure_power(signal), cfg.spr_db)
    delta = eps * np.sign(grad[0])
    return _finish(model_or_ckpt, x, signal, delta, eps, cfg, zeros)


def pga(model_or_ckpt, signal: IQSignal, config: AttackConfig) -> Perturbation:
    """Iterated sign steps projected back onto the L-inf ball, from delta = 0."""
    cfg = config if config.kind == "pga" else AttackConfig(
        "pga", config.spr_db, config.steps, config.step_frac, config.target,
        config.raw_grad, config.seed,
    )
    label = cfg.target if cfg.target is not None else signal.label
    if label is None:
        raise ArgumentError("signal needs a label (or the attack a target)")
    x = signal.samples
    deltas, eps = _craft_batch(model_or_ckpt, x[None], np.array([label]), cfg)
    return _finish(model_or_ckpt, x, signal, deltas[0], float(eps[0]), cfg, 0)


def craft(model_or_ckpt, signal: IQSignal, config: AttackConfig) -> Perturbation:
    return (fgsm if config.kind == "fgsm" else pga)(model_or_ckpt, signal, config)


def craft_batch(model_or_ckpt, x: np.ndarray, labels: np.ndarray, config: AttackConfig) -> np.ndarray:
    """Deltas for a batch; labels are true labels (untargeted) or ignored for
    targeted attacks, where the configured target class is used per sample."""
    labels = np.asarray(labels, dtype=np.int64)
    if config.target is not None:
        labels = np.full_like(labels, config.target)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    # crafting is per-sample independent; chunk to bound peak memory
    chunk = 256
    deltas = np.empty_like(x)
    for i in range(0, len(x), chunk):
        deltas[i : i + chunk], _ = _craft_batch(
            model_or_ckpt, x[i : i + chunk], labels[i : i + chunk], config
        )
    return deltas


def apply(signal: IQSignal, perturbation: Perturbation) -> IQSignal:
    """Elementwise sum; metadata preserved."""
    if perturbation.delta.shape != signal.samples.shape:
        raise ShapeError(
            f"delta shape {perturbation.delta.shape} != signal shape {signal.samples.shape}"
        )
    return signal.copy_with(signal.samples + perturbation.delta)
