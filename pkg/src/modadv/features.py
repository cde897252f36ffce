"""Classical signal statistics: matched filtering, mixed moments, cumulants.

Cumulants of any supported order come from the generic set-partition
(Moebius) formula, so the sixth-order values need no transcribed closed
form; the partition engine is oracle-tested against the order-4 identities.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import List, Tuple

import numpy as np

from .errors import ArgumentError
from .sigsynth import IQSignal, PulseShape


@dataclass
class SymbolSequence:
    """Complex symbol-rate samples recovered from an IQ signal."""

    symbols: np.ndarray
    source_length: int
    sps: int


# The five C21-normalized cumulant magnitudes used as the HOC feature vector.
FEATURE_ORDERS: Tuple[Tuple[int, int], ...] = ((2, 0), (4, 0), (4, 1), (4, 2), (6, 3))
FEATURE_NAMES = tuple(f"abs_C{p}{q}_norm" for p, q in FEATURE_ORDERS)


def matched_filter_symbols(signal: IQSignal, pulse: PulseShape) -> SymbolSequence:
    """Correlate with the pulse and sample at the known symbol instants.

    Normalized so that a noiseless signal from `modulate` returns the
    transmitted constellation points exactly (Rect) or to Nyquist accuracy
    at interior symbols (RRC). No timing recovery: synthesis timing assumed.
    """
    if signal.n % pulse.sps != 0:
        raise ArgumentError(f"N={signal.n} not divisible by sps={pulse.sps}")
    n_symbols = signal.n // pulse.sps
    taps = pulse.taps()
    gain = float(np.sum(taps**2))
    x = signal.as_complex()
    d = pulse.delay()
    # symbol k = sum_t x[k*sps + t - d] * taps[t] / gain; pad so edges are defined
    pad_left = d
    pad_right = len(taps) - 1 - d
    xp = np.concatenate([np.zeros(pad_left), x, np.zeros(pad_right)])
    windows = np.lib.stride_tricks.sliding_window_view(xp, len(taps))
    symbols = windows[:: pulse.sps][:n_symbols] @ taps / gain
    return SymbolSequence(symbols, signal.n, pulse.sps)


def mixed_moment(symbols: SymbolSequence, p: int, q: int) -> complex:
    """M_pq = mean of s^(p-q) * conj(s)^q."""
    if q > p:
        raise ArgumentError("q must not exceed p")
    s = np.asarray(symbols.symbols, dtype=np.complex128)
    if s.size < 1:
        raise ArgumentError("empty symbol sequence")
    return complex(np.mean(s ** (p - q) * np.conj(s) ** q))


@lru_cache(maxsize=None)
def _set_partitions(n: int) -> Tuple[Tuple[Tuple[int, ...], ...], ...]:
    """All partitions of {0..n-1} as tuples of blocks."""
    if n == 0:
        return ((),)
    out = []
    for part in _set_partitions(n - 1):
        last = n - 1
        # new singleton block
        out.append(part + ((last,),))
        # insert into each existing block
        for i, block in enumerate(part):
            out.append(part[:i] + (block + (last,),) + part[i + 1 :])
    return tuple(out)


def cumulant(symbols: SymbolSequence, p: int, q: int) -> complex:
    """Joint cumulant of (p-q) copies of s and q copies of conj(s).

    Symbols are mean-centered first. Uses the set-partition formula
    c = sum over partitions pi of (-1)^(|pi|-1) (|pi|-1)! prod_B M(B).
    """
    if p not in (2, 4, 6):
        raise ArgumentError(f"unsupported cumulant order p={p}")
    if q > p or q < 0:
        raise ArgumentError("q must satisfy 0 <= q <= p")
    s = np.asarray(symbols.symbols, dtype=np.complex128)
    if s.size < 1:
        raise ArgumentError("empty symbol sequence")
    s = s - np.mean(s)
    # variable i is conj(s) for i >= p - q
    conj_from = p - q
    sc = np.conj(s)

    def block_moment(block: Tuple[int, ...]) -> complex:
        prod = np.ones_like(s)
        for i in block:
            prod = prod * (sc if i >= conj_from else s)
        return complex(np.mean(prod))

    total = 0.0 + 0.0j
    for part in _set_partitions(p):
        k = len(part)
        term = (-1) ** (k - 1) * factorial(k - 1)
        val = 1.0 + 0.0j
        for block in part:
            val *= block_moment(block)
        total += term * val
    return total


@dataclass
class FeatureVector:
    """Ordered normalized-cumulant magnitudes; scale-invariant by construction."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ArgumentError("feature values must be finite")


def symbol_features(symbols: SymbolSequence) -> FeatureVector:
    """HOC features from already-recovered symbols: [|C20|,|C40|,|C41|,|C42|,|C63|]/C21^(p/2)."""
    c21 = cumulant(symbols, 2, 1).real
    if c21 <= 0:
        raise ArgumentError("degenerate symbol sequence (zero power after centering)")
    vals = []
    for p, q in FEATURE_ORDERS:
        c = cumulant(symbols, p, q)
        vals.append(abs(c) / c21 ** (p / 2))
    return FeatureVector(np.array(vals))


def hoc_features(signal: IQSignal, pulse: PulseShape) -> FeatureVector:
    """Matched-filter to symbol rate, then the five normalized HOC magnitudes."""
    return symbol_features(matched_filter_symbols(signal, pulse))
