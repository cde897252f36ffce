"""End-to-end benchmark at full scale: 4 classes, 2000 train + 600 test
signals per class, N=1024 at 20 dB SNR.

Everything expensive (dataset synthesis, model training) happens once in
module-scoped fixtures and is shared across the checks below.
"""

import itertools
import json
import os

import numpy as np
import pytest

from modadv.attacks import AttackConfig, craft_batch, measured_spr, spr_to_eps
from modadv.classifiers import (
    TrainHyper,
    build,
    input_gradient_loss,
    train,
)
from modadv.constellation import batch_alignment, oracle_targeted_shift
from modadv.dataset import SynthesisConfig, gen_dataset
from modadv.evaluation import FrameworkKind, eval_framework, sweep_spr
from modadv.sigsynth import ModScheme, PulseShape

CLASSES = ("BPSK", "QPSK", "16QAM", "64QAM")
PULSE = PulseShape("rrc", 4)  # 256 symbols per signal at N=1024
N = 1024
SNR_DB = 20.0
SEED = 7
TRAIN_PER_CLASS = 2000  # 100 of these are held out for validation
TEST_PER_CLASS = 600
SPR_LIST = (25.0, 20.0, 15.0)
ATTACK_LIMIT = 400  # attacked test-subset size (crafting dominates runtime)


@pytest.fixture(scope="module")
def acc_ds():
    cfg = SynthesisConfig(
        classes=CLASSES,
        signals_per_class=TRAIN_PER_CLASS + TEST_PER_CLASS,
        n=N,
        snr_db=SNR_DB,
        pulse=PULSE,
        seed=SEED,
    )
    ds = gen_dataset(cfg)
    # fix the split at exactly 2000 train (100 as validation) + 600 test per class
    rng = np.random.default_rng(SEED)
    labels = np.array([r.label for r in ds.records])
    train_idx, val_idx, test_idx = [], [], []
    for cls in range(len(CLASSES)):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        test_idx.extend(int(i) for i in idx[:TEST_PER_CLASS])
        val_idx.extend(int(i) for i in idx[TEST_PER_CLASS : TEST_PER_CLASS + 100])
        train_idx.extend(int(i) for i in idx[TEST_PER_CLASS + 100 :])
    ds.manifest["split"] = {
        "train": sorted(train_idx),
        "val": sorted(val_idx),
        "test": sorted(test_idx),
    }
    return ds


def _test_arrays(ds, limit=None):
    recs = ds.split_records("test")
    x = np.stack([r.samples for r in recs]).astype(np.float64)
    y = np.array([r.label for r in recs], dtype=np.int64)
    if limit is not None:
        # interleave classes so a truncated subset stays balanced
        by_class = [np.flatnonzero(y == c) for c in range(len(CLASSES))]
        order = np.array(
            [i for group in zip(*by_class) for i in group], dtype=np.int64
        )
        x, y = x[order][:limit], y[order][:limit]
    return x, y


def _batched_accuracy(model, x, y, batch=256):
    correct = 0
    for i in range(0, len(x), batch):
        correct += int((model.logits(x[i : i + batch]).argmax(axis=1) == y[i : i + batch]).sum())
    return correct / len(x)


@pytest.fixture(scope="module")
def cnn(acc_ds):
    model = build("cnn_small", N, len(CLASSES), seed=0)
    train(model, acc_ds, TrainHyper(epochs=32, batch=128, lr=2e-3, seed=0))
    return model


@pytest.fixture(scope="module")
def resnet(acc_ds):
    model = build("resnet_lite", N, len(CLASSES), seed=0)
    train(model, acc_ds, TrainHyper(epochs=32, batch=128, lr=2e-3, seed=0))
    return model


@pytest.fixture(scope="module")
def hoc(acc_ds):
    model = build("hoc_logreg", N, len(CLASSES), seed=0, pulse=PULSE)
    train(model, acc_ds, TrainHyper(epochs=30, batch=128, lr=2e-3, seed=0))
    return model


@pytest.fixture(scope="module")
def ml(acc_ds):
    schemes = [ModScheme.from_name(c) for c in CLASSES]
    return build("max_likelihood", N, len(CLASSES), pulse=PULSE, schemes=schemes,
                 snr_db=SNR_DB)


@pytest.fixture(scope="module")
def natural_accuracies(acc_ds, cnn, resnet, hoc):
    x, y = _test_arrays(acc_ds)
    return {
        "cnn_small": _batched_accuracy(cnn, x, y),
        "resnet_lite": _batched_accuracy(resnet, x, y),
        "hoc_logreg": _batched_accuracy(hoc, x, y),
    }


@pytest.fixture(scope="module")
def pga_sweep(acc_ds, cnn):
    """PGA (K=20, beta=0.125) over SPR {25, 20, 15} dB under both frameworks."""
    frameworks = (FrameworkKind("robustness"), FrameworkKind("security", 20.0))
    table, _ = sweep_spr(
        cnn, acc_ds, attack_kind="pga", spr_list=SPR_LIST,
        frameworks=frameworks, seed=0, steps=20, step_frac=0.125,
        limit=ATTACK_LIMIT,
    )
    out = {}
    for row in table.rows:
        out[(row.framework, row.condition)] = row.accuracy
    return out


class TestNaturalAccuracy:
    def test_cnn_small(self, natural_accuracies):
        assert natural_accuracies["cnn_small"] >= 0.95

    def test_hoc_logreg(self, natural_accuracies):
        assert natural_accuracies["hoc_logreg"] >= 0.90

    def test_resnet_tracks_cnn(self, natural_accuracies):
        assert natural_accuracies["resnet_lite"] >= natural_accuracies["cnn_small"] - 0.02


class TestAttackCollapse:
    def test_pga_20db_collapse(self, pga_sweep):
        assert pga_sweep[("robustness", "20")] <= 0.60

    def test_pga_15db_collapse(self, pga_sweep):
        assert pga_sweep[("robustness", "15")] <= 0.40

    def test_accuracy_non_increasing_in_budget(self, pga_sweep):
        accs = [pga_sweep[("robustness", f"{s:g}")] for s in SPR_LIST]
        for hi, lo in zip(accs, accs[1:]):
            assert lo <= hi + 0.03


class TestFrameworkGap:
    def test_robustness_security_close_at_each_spr(self, pga_sweep):
        for spr in SPR_LIST:
            gap = abs(
                pga_sweep[("robustness", f"{spr:g}")]
                - pga_sweep[("security", f"{spr:g}")]
            )
            assert gap <= 0.10, f"gap {gap:.3f} at {spr} dB SPR"


class TestAttackOrdering:
    def test_fgsm_weaker_than_pga_at_20db(self, acc_ds, cnn, pga_sweep):
        row, _ = eval_framework(
            cnn, acc_ds, AttackConfig("fgsm", 20.0), FrameworkKind("robustness"),
            limit=ATTACK_LIMIT,
        )
        assert row.accuracy >= pga_sweep[("robustness", "20")]


class TestLikelihoodReference:
    def test_noiseless_accuracy_is_one(self, ml):
        from modadv.sigsynth import modulate

        rng = np.random.default_rng(11)
        sigs, y = [], []
        for label, name in enumerate(CLASSES):
            scheme = ModScheme.from_name(name)
            for _ in range(50):
                idx = rng.integers(0, scheme.order, size=N // PULSE.sps)
                sigs.append(modulate(idx, scheme, PULSE).samples)
                y.append(label)
        x = np.stack(sigs).astype(np.float64)
        y = np.array(y)
        # noiseless signals classified under the finite channel assumption
        correct = 0
        for i in range(0, len(x), 256):
            correct += int(
                (ml.logits(x[i : i + 256], snr_db=SNR_DB).argmax(axis=1) == y[i : i + 256]).sum()
            )
        assert correct == len(x)

    def test_20db_accuracy_on_2400_signals(self, acc_ds, ml):
        x, y = _test_arrays(acc_ds)
        assert len(x) >= 2000
        correct = 0
        for i in range(0, len(x), 256):
            correct += int(
                (ml.logits(x[i : i + 256], snr_db=SNR_DB).argmax(axis=1) == y[i : i + 256]).sum()
            )
        assert correct / len(x) >= 0.99


class TestConstellationAlignment:
    def test_oracle_beats_cnn_by_wide_margin(self, acc_ds, cnn):
        target, source = "BPSK", "QPSK"
        target_scheme = ModScheme.from_name(target)
        schemes = [ModScheme.from_name(c) for c in CLASSES]
        src_idx = CLASSES.index(source)
        tgt_idx = CLASSES.index(target)
        recs = [r for r in acc_ds.split_records("test") if r.label == src_idx][:48]
        cfg = AttackConfig("fgsm", 15.0, target=tgt_idx)
        clean, model_pert, oracle_pert = [], [], []
        for rec in recs:
            sig = rec.to_signal(schemes[src_idx])
            delta = craft_batch(cnn, sig.samples[None], np.array([src_idx]), cfg)[0]
            clean.append(sig)
            model_pert.append(sig.copy_with(sig.samples + delta))
            oracle_pert.append(
                oracle_targeted_shift(sig, target_scheme, 15.0, rec.snr_db, PULSE,
                                      schemes=schemes)
            )
        cnn_scores, _ = batch_alignment(clean, model_pert, target_scheme, PULSE)
        oracle_scores, _ = batch_alignment(clean, oracle_pert, target_scheme, PULSE)
        oracle_mean = float(oracle_scores.mean())
        cnn_mean = float(cnn_scores.mean())
        assert oracle_mean >= 0.7
        assert cnn_mean <= oracle_mean - 0.2


class TestNumericalSuite:
    def test_composed_cnn_input_gradient_matches_finite_differences(self, acc_ds, cnn):
        x, y = _test_arrays(acc_ds, limit=2)
        x, y = x[:1], y[:1]
        _, grad = input_gradient_loss(cnn, x, y)

        def loss_at(xv):
            lv, _ = input_gradient_loss(cnn, xv, y)
            return float(lv[0])

        rng = np.random.default_rng(0)
        h = 1e-5
        for _ in range(10):
            i, j = rng.integers(0, 2), rng.integers(0, N)
            xp, xm = x.copy(), x.copy()
            xp[0, i, j] += h
            xm[0, i, j] -= h
            fd = (loss_at(xp) - loss_at(xm)) / (2 * h)
            denom = max(abs(fd), abs(grad[0, i, j]), 1e-6)
            assert abs(fd - grad[0, i, j]) / denom < 1e-4

    def test_order4_cumulant_identities(self):
        # partition formula vs the closed-form order-4 expansions on raw data
        from modadv.features import SymbolSequence, cumulant, mixed_moment

        rng = np.random.default_rng(3)
        z = rng.standard_normal(256) + 1j * rng.standard_normal(256)
        z = z - z.mean()  # the closed forms below assume zero-mean data
        s = SymbolSequence(z, 256 * 8, 8)
        m20, m21 = mixed_moment(s, 2, 0), mixed_moment(s, 2, 1)
        m40, m41, m42 = (mixed_moment(s, 4, q) for q in (0, 1, 2))
        m22 = mixed_moment(s, 2, 2)
        assert abs(cumulant(s, 4, 0) - (m40 - 3 * m20**2)) < 1e-9
        assert abs(cumulant(s, 4, 1) - (m41 - 3 * m20 * m21)) < 1e-9
        assert abs(
            cumulant(s, 4, 2) - (m42 - abs(m20) ** 2 - 2 * m21**2)
        ) < 1e-9

    def test_ideal_constellation_cumulants(self):
        from modadv.features import SymbolSequence, cumulant
        from modadv.sigsynth import constellation_points

        expected = {("BPSK", 4, 0): -2.0, ("QPSK", 4, 0): -1.0, ("16QAM", 4, 2): -0.68}
        for (name, p, q), value in expected.items():
            pts = np.asarray(constellation_points(ModScheme.from_name(name)))
            s = SymbolSequence(pts, len(pts) * 8, 8)
            assert abs(cumulant(s, p, q) - value) < 1e-9


class TestBudgetSuite:
    @pytest.fixture(scope="class")
    def crafted(self, acc_ds, cnn):
        x, y = _test_arrays(acc_ds, limit=64)
        out = []
        for kind, spr in itertools.product(("fgsm", "pga"), SPR_LIST):
            deltas = craft_batch(cnn, x, y, AttackConfig(kind, spr))
            out.append((kind, spr, x, deltas))
        return out

    def test_linf_bound_everywhere(self, crafted):
        for kind, spr, x, deltas in crafted:
            for xi, di in zip(x, deltas):
                eps = spr_to_eps(float(np.mean(np.sum(xi**2, axis=0))), spr)
                assert np.max(np.abs(di)) <= eps + 1e-7, (kind, spr)

    def test_spr_budget_respected(self, crafted):
        for kind, spr, x, deltas in crafted:
            for xi, di in zip(x, deltas):
                assert measured_spr(xi, di) >= spr - 0.05, (kind, spr)

    def test_fgsm_with_dense_gradient_hits_budget_exactly(self, acc_ds, cnn):
        x, y = _test_arrays(acc_ds, limit=32)
        deltas = craft_batch(cnn, x, y, AttackConfig("fgsm", 20.0))
        for xi, di in zip(x, deltas):
            _, grad = input_gradient_loss(cnn, xi[None], np.array([0]))
            if np.all(grad != 0):
                assert abs(measured_spr(xi, di) - 20.0) <= 0.01

    def test_linear_model_fgsm_is_brute_force_optimal(self):
        from tests.test_attacks import LinearToyModel

        rng = np.random.default_rng(12)
        n = 6  # 2 x 6 = 12 entries -> 2^12 sign vertices
        model = LinearToyModel(n, seed=12)
        x = rng.standard_normal((1, 2, n))
        cfg = AttackConfig("fgsm", 15.0)
        delta = craft_batch(model, x, np.array([0]), cfg)[0]
        eps = spr_to_eps(float(np.mean(np.sum(x[0] ** 2, axis=0))), 15.0)
        best = -np.inf
        for bits in itertools.product((-1.0, 1.0), repeat=2 * n):
            cand = eps * np.array(bits).reshape(2, n)
            loss, _ = model.input_gradient_loss((x[0] + cand)[None], np.array([0]))
            best = max(best, float(loss[0]))
        got, _ = model.input_gradient_loss((x[0] + delta)[None], np.array([0]))
        assert abs(float(got[0]) - best) <= 1e-9


class TestReproducibility:
    def test_cli_rerun_is_byte_identical(self, tmp_path):
        from modadv.cli import main

        ds_path = str(tmp_path / "ds.crml")
        cfg = {
            "dataset": {
                "classes": ["BPSK", "QPSK", "16QAM", "64QAM"],
                "signals_per_class": 30,
                "n": 256,
                "snr_db": 20.0,
                "seed": 3,
                "path": ds_path,
                "pulse": {"kind": "rect", "sps": 8},
            }
        }
        gen_cfg = tmp_path / "gen.json"
        gen_cfg.write_text(json.dumps(cfg))
        assert main(["gen", "--config", str(gen_cfg), "--out", str(tmp_path / "g")]) == 0
        ckpt = str(tmp_path / "m.ckpt")
        tcfg = tmp_path / "t.json"
        tcfg.write_text(json.dumps({
            "dataset": {"path": ds_path},
            "model": {"preset": "cnn_small", "epochs": 2, "batch": 8, "lr": 1e-3,
                      "seed": 1, "checkpoint": ckpt},
        }))
        assert main(["train", "--config", str(tcfg), "--out", str(tmp_path / "t")]) == 0
        scfg = tmp_path / "s.json"
        scfg.write_text(json.dumps({
            "dataset": {"path": ds_path},
            "model": {"checkpoint": ckpt},
            "attack": {"kind": "pga", "spr_list": [20.0, 15.0], "steps": 5},
            "sweep": {"mode": "spr"},
        }))
        outs = []
        for name in ("r1", "r2"):
            out = str(tmp_path / name)
            assert main(["sweep", "--config", str(scfg), "--out", out]) == 0
            outs.append(out)

        def by_prefix(d):
            res = {}
            for f in sorted(os.listdir(d)):
                key = f.split("_")[0] + os.path.splitext(f)[1]
                res[key] = open(os.path.join(d, f), "rb").read()
            return res

        a, b = by_prefix(outs[0]), by_prefix(outs[1])
        assert set(a) == set(b)
        assert any(k.endswith(".csv") for k in a) and any(k.endswith(".svg") for k in a)
        for key in a:
            if key == "resolved.json":
                continue  # embeds the differing output directory by design
            assert a[key] == b[key], key
