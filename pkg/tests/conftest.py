"""Shared fixtures: small synthetic datasets and trained models kept cheap
enough for the per-module suites. The full-scale benchmark lives in
test_acceptance.py with its own session fixtures.
"""

import numpy as np
import pytest

from modadv.dataset import SynthesisConfig, gen_dataset, make_split
from modadv.sigsynth import ModScheme, PulseShape

RECT8 = PulseShape(kind="rect", sps=8)
RRC8 = PulseShape(kind="rrc", sps=8, rolloff=0.35, span=8)

FOUR_CLASSES = ("BPSK", "QPSK", "16QAM", "64QAM")


def _make_ds(classes, per_class, n, snr_db, pulse, seed):
    cfg = SynthesisConfig(
        classes=classes,
        signals_per_class=per_class,
        n=n,
        snr_db=snr_db,
        pulse=pulse,
        seed=seed,
    )
    ds = gen_dataset(cfg)
    ds.manifest["split"] = make_split(
        len(ds.records), [r.label for r in ds.records], seed=seed
    )
    return ds


@pytest.fixture(scope="session")
def small_rect_ds():
    """4 classes x 40 signals, Rect pulse — fast, analytically clean."""
    return _make_ds(FOUR_CLASSES, 40, 1024, 20.0, RECT8, seed=101)


@pytest.fixture(scope="session")
def small_rrc_ds():
    """4 classes x 30 signals, RRC pulse — exercises the default shaping."""
    return _make_ds(FOUR_CLASSES, 30, 1024, 20.0, RRC8, seed=102)


@pytest.fixture(scope="session")
def tiny_cnn(small_rect_ds):
    """A briefly trained cnn_small for attack/eval plumbing tests.

    Accuracy does not need to be high here; the attack and evaluation
    contracts are label- and budget-based, not accuracy-based.
    """
    from modadv.classifiers import TrainHyper, build, train

    model = build("cnn_small", 1024, 4, seed=3)
    train(model, small_rect_ds, TrainHyper(epochs=2, batch=64, lr=2e-3, seed=3))
    return model


@pytest.fixture(scope="session")
def ml_model_4c():
    from modadv.classifiers import build

    schemes = [ModScheme.from_name(c) for c in FOUR_CLASSES]
    return build(
        "max_likelihood", 1024, 4, pulse=RECT8, schemes=schemes, snr_db=20.0
    )
