"""Constellation-space analysis of perturbations.

Projects clean and perturbed signals to symbol rate, computes the
Bayes-optimal shift direction (toward the nearest target-constellation
state), and scores how well the observed symbol displacements align with it
(mean cosine similarity).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .attacks import AttackConfig, craft
from .classifiers import MLModel
from .errors import ArgumentError
from .features import matched_filter_symbols
from .sigsynth import IQSignal, ModScheme, PulseShape, constellation_points
from .svgplot import SvgCanvas, write_svg

DISPLACEMENT_FLOOR = 1e-9
COINCIDENCE_TOL = 1e-12


@dataclass
class SymbolShift:
    original: np.ndarray  # complex
    perturbed: np.ndarray

    def __post_init__(self):
        if self.original.shape != self.perturbed.shape:
            raise ArgumentError("symbol counts differ")

    @property
    def displacement(self) -> np.ndarray:
        return self.perturbed - self.original


@dataclass
class AlignmentReport:
    per_symbol: np.ndarray  # cosine per qualifying symbol
    mean: float
    n_symbols: int
    positive_fraction: float
    empty: bool = False


def bayes_shift_direction(symbol: complex, target_scheme: ModScheme) -> complex:
    """Unit vector toward the nearest target-constellation point.

    Zero if the symbol coincides with a point; equidistant ties go to the
    lowest point index.
    """
    pts = constellation_points(target_scheme)
    d = np.abs(pts - symbol)
    i = int(np.argmin(d))  # argmin takes the first (lowest-index) minimum
    if d[i] < COINCIDENCE_TOL:
        return 0j
    v = pts[i] - symbol
    return v / abs(v)


def alignment_score(
    clean: IQSignal,
    perturbed: IQSignal,
    target_scheme: ModScheme,
    pulse: PulseShape,
) -> AlignmentReport:
    """Mean cosine between symbol displacements and the Bayes direction."""
    if clean.samples.shape != perturbed.samples.shape:
        raise ArgumentError("clean/perturbed shapes differ")
    s0 = matched_filter_symbols(clean, pulse).symbols
    s1 = matched_filter_symbols(perturbed, pulse).symbols
    shift = SymbolShift(s0, s1)
    cosines = []
    for sym, disp in zip(s0, shift.displacement):
        if abs(disp) <= DISPLACEMENT_FLOOR:
            continue
        direction = bayes_shift_direction(sym, target_scheme)
        if direction == 0:
            continue
        # cosine of the angle between two complex vectors in the IQ plane
        cosines.append((disp.real * direction.real + disp.imag * direction.imag) / abs(disp))
    if not cosines:
        return AlignmentReport(np.array([]), float("nan"), 0, 0.0, empty=True)
    arr = np.array(cosines)
    return AlignmentReport(arr, float(arr.mean()), len(arr), float((arr > 0).mean()))


def batch_alignment(
    clean_signals: List[IQSignal],
    perturbed_signals: List[IQSignal],
    target_scheme: ModScheme,
    pulse: PulseShape,
) -> Tuple[np.ndarray, List[AlignmentReport]]:
    """Per-signal mean scores (NaN-free: empty reports are dropped)."""
    reports = [
        alignment_score(c, p, target_scheme, pulse)
        for c, p in zip(clean_signals, perturbed_signals)
    ]
    scores = np.array([r.mean for r in reports if not r.empty])
    return scores, reports


def oracle_targeted_shift(
    clean: IQSignal,
    target_scheme: ModScheme,
    spr_db: float,
    snr_db: float,
    pulse: PulseShape,
    schemes: Optional[List[ModScheme]] = None,
    kind: str = "fgsm",
    steps: int = 20,
    step_frac: float = 0.125,
) -> IQSignal:
    """Reference perturbation: targeted attack on the ML classifier.

    The gradient of the scheme likelihood points along the responsibility-
    weighted direction toward the target constellation, so this realizes the
    Bayes-optimal shift under the attack budget.
    """
    if schemes is None:
        schemes = [target_scheme, clean.scheme] if clean.scheme else [target_scheme]
        # dedupe while keeping the target first
        seen = []
        for s in schemes:
            if s is not None and s not in seen:
                seen.append(s)
        schemes = seen
    target_idx = schemes.index(target_scheme)
    model = MLModel(clean.n, schemes, pulse, snr_db)
    cfg = AttackConfig(kind, spr_db, steps, step_frac, target=target_idx)
    pert = craft(model, clean, cfg)
    return clean.copy_with(clean.samples + pert.delta)


def constellation_svg(
    clean_symbols: np.ndarray,
    perturbed_symbols: np.ndarray,
    target_points: np.ndarray,
    path: str,
    title: str = "",
) -> None:
    """Scatter of clean/perturbed symbols and target states on [-2, 2]^2."""
    canvas = SvgCanvas((-2.0, 2.0), (-2.0, 2.0), width=460, height=460,
                       title=title, xlabel="I", ylabel="Q")
    canvas.scatter(clean_symbols.real, clean_symbols.imag, "#e6a817", "clean")
    canvas.scatter(perturbed_symbols.real, perturbed_symbols.imag, "#2f6fb3", "perturbed")
    canvas.scatter(target_points.real, target_points.imag, "#c0392b", "target", radius=5.0)
    canvas.legend([("clean", "#e6a817"), ("perturbed", "#2f6fb3"), ("target", "#c0392b")])
    write_svg(path, canvas.render())
