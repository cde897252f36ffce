"""End-to-end command-line runs: all subcommands, exit codes, reruns."""

import json
import os

import pytest

from modadv.cli import (
    EXIT_CONFIG,
    EXIT_INCOMPATIBLE,
    EXIT_IO,
    EXIT_OK,
    main,
    resolve_config,
)
from modadv.errors import ConfigError


def _write_cfg(path, cfg):
    with open(path, "w") as f:
        json.dump(cfg, f)
    return str(path)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """One tiny dataset + trained checkpoint shared by the command tests."""
    root = tmp_path_factory.mktemp("cli")
    ds_path = str(root / "ds.crml")
    gen_cfg = _write_cfg(
        root / "gen.json",
        {
            "dataset": {
                "classes": ["BPSK", "QPSK"],
                "signals_per_class": 30,
                "n": 256,
                "snr_db": 20.0,
                "seed": 5,
                "path": ds_path,
                "pulse": {"kind": "rect", "sps": 8},
            }
        },
    )
    assert main(["gen", "--config", gen_cfg, "--out", str(root / "gen_out")]) == EXIT_OK
    ckpt_path = str(root / "model.ckpt")
    train_cfg = _write_cfg(
        root / "train.json",
        {
            "dataset": {"path": ds_path},
            "model": {"preset": "cnn_small", "epochs": 2, "batch": 8,
                      "lr": 1e-3, "seed": 1, "checkpoint": ckpt_path},
        },
    )
    assert main(["train", "--config", train_cfg, "--out", str(root / "train_out")]) == EXIT_OK
    return {"root": root, "ds": ds_path, "ckpt": ckpt_path}


class TestGen:
    def test_outputs_exist(self, workdir):
        assert os.path.exists(workdir["ds"])
        resolved = workdir["root"] / "gen_out" / "resolved_config.json"
        data = json.loads(resolved.read_text())
        assert "toolkit_version" in data
        assert data["dataset"]["classes"] == ["BPSK", "QPSK"]

    def test_rerun_byte_identical(self, workdir, tmp_path):
        ds2 = str(tmp_path / "ds2.crml")
        cfg = _write_cfg(
            tmp_path / "gen.json",
            {
                "dataset": {
                    "classes": ["BPSK", "QPSK"],
                    "signals_per_class": 30,
                    "n": 256,
                    "snr_db": 20.0,
                    "seed": 5,
                    "path": ds2,
                    "pulse": {"kind": "rect", "sps": 8},
                }
            },
        )
        assert main(["gen", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
        assert open(workdir["ds"], "rb").read() == open(ds2, "rb").read()


class TestTrain:
    def test_checkpoint_written(self, workdir):
        assert os.path.exists(workdir["ckpt"])

    def test_rerun_byte_identical(self, workdir, tmp_path):
        c1, c2 = str(tmp_path / "a.ckpt"), str(tmp_path / "b.ckpt")
        for c in (c1, c2):
            cfg = _write_cfg(
                tmp_path / "t.json",
                {
                    "dataset": {"path": workdir["ds"]},
                    "model": {"preset": "hoc_logreg", "epochs": 2, "batch": 8,
                              "lr": 1e-2, "seed": 1, "checkpoint": c},
                },
            )
            assert main(["train", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
        assert open(c1, "rb").read() == open(c2, "rb").read()


class TestAttackEvalSweep:
    def test_attack_writes_perturbed_dataset(self, workdir, tmp_path):
        cfg = _write_cfg(
            tmp_path / "a.json",
            {
                "dataset": {"path": workdir["ds"]},
                "model": {"checkpoint": workdir["ckpt"]},
                "attack": {"kind": "fgsm", "spr_db": 15.0},
            },
        )
        out = str(tmp_path / "atk")
        assert main(["attack", "--config", cfg, "--out", out]) == EXIT_OK
        assert os.path.exists(os.path.join(out, "perturbed.crml"))

    def test_eval_natural_and_attacked(self, workdir, tmp_path):
        out = str(tmp_path / "ev")
        cfg = _write_cfg(
            tmp_path / "e.json",
            {
                "dataset": {"path": workdir["ds"]},
                "model": {"checkpoint": workdir["ckpt"]},
                "attack": {"kind": "fgsm", "spr_db": 20.0},
                "framework": {"kind": "security"},
            },
        )
        assert main(["eval", "--config", cfg, "--out", out]) == EXIT_OK
        files = os.listdir(out)
        assert any(f.startswith("accuracy_") for f in files)
        assert any(f.startswith("confusion_fgsm_20db") for f in files)

    def test_eval_without_attack_section_is_natural(self, workdir, tmp_path):
        out = str(tmp_path / "nat")
        cfg = _write_cfg(
            tmp_path / "n.json",
            {
                "dataset": {"path": workdir["ds"]},
                "model": {"checkpoint": workdir["ckpt"]},
            },
        )
        assert main(["eval", "--config", cfg, "--out", out]) == EXIT_OK
        assert any(f.startswith("confusion_natural") for f in os.listdir(out))

    def test_sweep_spr_outputs(self, workdir, tmp_path):
        out = str(tmp_path / "sw")
        cfg = _write_cfg(
            tmp_path / "s.json",
            {
                "dataset": {"path": workdir["ds"]},
                "model": {"checkpoint": workdir["ckpt"]},
                "attack": {"kind": "fgsm", "spr_list": [20.0, 15.0]},
                "sweep": {"mode": "spr"},
            },
        )
        assert main(["sweep", "--config", cfg, "--out", out]) == EXIT_OK
        files = os.listdir(out)
        assert any(f.startswith("sweep_spr_") and f.endswith(".csv") for f in files)
        assert any(f.endswith(".svg") for f in files)

    def test_sweep_snr_outputs(self, workdir, tmp_path):
        out = str(tmp_path / "swn")
        cfg = _write_cfg(
            tmp_path / "s.json",
            {
                "dataset": {"path": workdir["ds"]},
                "model": {"checkpoint": workdir["ckpt"]},
                "sweep": {"mode": "snr"},
            },
        )
        assert main(["sweep", "--config", cfg, "--out", out]) == EXIT_OK
        assert any(f.startswith("sweep_snr_") for f in os.listdir(out))

    def test_constellation_outputs(self, workdir, tmp_path):
        out = str(tmp_path / "co")
        cfg = _write_cfg(
            tmp_path / "c.json",
            {
                "dataset": {"path": workdir["ds"]},
                "model": {"checkpoint": workdir["ckpt"]},
                "constellation": {"target": "BPSK", "source_class": "QPSK",
                                  "num_signals": 3, "spr_db": 15.0},
            },
        )
        assert main(["constellation", "--config", cfg, "--out", out]) == EXIT_OK
        files = os.listdir(out)
        assert any(f.startswith("alignment_") for f in files)
        assert sum(f.endswith(".svg") for f in files) == 2

    def test_rerun_csv_byte_identical(self, workdir, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            out = str(tmp_path / name)
            cfg = _write_cfg(
                tmp_path / "e.json",
                {
                    "dataset": {"path": workdir["ds"]},
                    "model": {"checkpoint": workdir["ckpt"]},
                    "attack": {"kind": "pga", "spr_db": 20.0, "steps": 3},
                    "framework": {"kind": "security"},
                },
            )
            assert main(["eval", "--config", cfg, "--out", out]) == EXIT_OK
            outs.append(out)
        # the output-dir path feeds the config hash in filenames, so match
        # run outputs by prefix rather than by exact name
        def by_prefix(d):
            out = {}
            for f in sorted(os.listdir(d)):
                key = f.split("_")[0] + os.path.splitext(f)[1]
                out[key] = open(os.path.join(d, f), "rb").read()
            return out

        a, b = by_prefix(outs[0]), by_prefix(outs[1])
        assert set(a) == set(b)
        for key in a:
            if key == "resolved.json":
                continue  # embeds the differing output path by design
            assert a[key] == b[key], key


class TestExitCodes:
    def test_unknown_config_key_is_config_error(self, tmp_path):
        cfg = _write_cfg(tmp_path / "bad.json", {"dataset": {"bogus_key": 1}})
        out = str(tmp_path / "o")
        assert main(["gen", "--config", cfg, "--out", out]) == EXIT_CONFIG
        # nothing written before validation fails
        assert not os.path.exists(out)

    def test_unknown_section_is_config_error(self, tmp_path):
        cfg = _write_cfg(tmp_path / "bad.json", {"mystery": {}})
        assert main(["gen", "--config", cfg]) == EXIT_CONFIG

    def test_malformed_json_is_config_error(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert main(["gen", "--config", str(p)]) == EXIT_CONFIG

    def test_missing_config_file_is_io_error(self, tmp_path):
        assert main(["gen", "--config", str(tmp_path / "absent.json")]) == EXIT_IO

    def test_missing_dataset_is_io_error(self, workdir, tmp_path):
        cfg = _write_cfg(
            tmp_path / "e.json",
            {"dataset": {"path": str(tmp_path / "nope.crml")},
             "model": {"checkpoint": workdir["ckpt"]}},
        )
        assert main(["eval", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_IO

    def test_hoc_attack_without_surrogate_is_incompatibility(self, workdir, tmp_path):
        ckpt = str(tmp_path / "hoc.ckpt")
        tcfg = _write_cfg(
            tmp_path / "t.json",
            {"dataset": {"path": workdir["ds"]},
             "model": {"preset": "hoc_logreg", "epochs": 1, "batch": 8,
                       "lr": 1e-2, "seed": 0, "checkpoint": ckpt}},
        )
        assert main(["train", "--config", tcfg, "--out", str(tmp_path / "o1")]) == EXIT_OK
        acfg = _write_cfg(
            tmp_path / "a.json",
            {"dataset": {"path": workdir["ds"]},
             "model": {"checkpoint": ckpt},
             "attack": {"kind": "fgsm", "spr_db": 20.0}},
        )
        assert main(["attack", "--config", acfg, "--out", str(tmp_path / "o2")]) == EXIT_INCOMPATIBLE


class TestResolveConfig:
    def test_defaults_filled(self):
        cfg = resolve_config({})
        assert cfg["model"]["preset"] == "cnn_small"
        assert cfg["attack"]["kind"] == "pga"

    def test_override_merges_pulse(self):
        cfg = resolve_config({"dataset": {"pulse": {"kind": "rect"}}})
        assert cfg["dataset"]["pulse"]["kind"] == "rect"
        assert cfg["dataset"]["pulse"]["sps"] == 8

    def test_non_object_section_rejected(self):
        with pytest.raises(ConfigError):
            resolve_config({"dataset": 3})

    def test_unknown_pulse_key_rejected(self):
        with pytest.raises(ConfigError):
            resolve_config({"dataset": {"pulse": {"shape": "rect"}}})
