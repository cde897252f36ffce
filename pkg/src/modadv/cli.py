"""Command-line entry point: gen | train | attack | eval | sweep | constellation.

Each run reads one JSON config file (flags override config keys), validates
it strictly (unknown keys rejected), then writes its outputs plus the
resolved config and toolkit version into the output directory. All file
writes are atomic (temp + rename). Exit codes: 0 success, 2 config error,
3 I/O error, 4 numerical failure, 5 shape/architecture incompatibility.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from typing import Optional

import numpy as np

from . import __version__
from .attacks import AttackConfig, craft_batch
from .classifiers import (
    Checkpoint,
    TrainHyper,
    build,
    model_from_checkpoint,
    train,
)
from .constellation import (
    batch_alignment,
    constellation_svg,
    oracle_targeted_shift,
)
from .dataset import DatasetFile, DatasetRecord, SynthesisConfig, gen_dataset, read_dataset, write_dataset
from .errors import (
    ArgumentError,
    ConfigError,
    ModAdvError,
    NumericalError,
    ShapeError,
    UnsupportedAttackError,
)
from .evaluation import (
    FrameworkKind,
    eval_framework,
    sweep_snr,
    sweep_spr,
    write_csv,
)
from .features import matched_filter_symbols
from .sigsynth import IQSignal, ModScheme, PulseShape, constellation_points

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4
EXIT_INCOMPATIBLE = 5

_SCHEMA = {
    "dataset": {
        "classes", "signals_per_class", "n", "snr_db", "seed", "path",
        "pulse", "store_symbols", "split",
    },
    "pulse": {"kind", "sps", "rolloff", "span"},
    "model": {"preset", "epochs", "batch", "lr", "seed", "checkpoint", "surrogate"},
    "attack": {"kind", "spr_db", "spr_list", "steps", "step_frac", "target", "raw_grad"},
    "framework": {"kind", "post_noise_snr_db", "noise_relative_to_clean"},
    "sweep": {"mode"},
    "constellation": {"target", "source_class", "num_signals", "spr_db", "attack_kind"},
    "output": {"dir"},
}

_DEFAULTS = {
    "dataset": {
        "classes": ["BPSK", "QPSK", "16QAM", "64QAM"],
        "signals_per_class": 100,
        "n": 1024,
        "snr_db": 20.0,
        "seed": 0,
        "path": None,
        "store_symbols": True,
        "split": "test",
        "pulse": {"kind": "rrc", "sps": 8, "rolloff": 0.35, "span": 8},
    },
    "model": {
        "preset": "cnn_small",
        "epochs": 8,
        "batch": 64,
        "lr": 1e-3,
        "seed": 0,
        "checkpoint": None,
        "surrogate": None,
    },
    "attack": {
        "kind": "pga",
        "spr_db": 20.0,
        "spr_list": [25.0, 20.0, 15.0],
        "steps": 20,
        "step_frac": 0.125,
        "target": None,
        "raw_grad": False,
    },
    "framework": {
        "kind": "robustness",
        "post_noise_snr_db": 20.0,
        "noise_relative_to_clean": False,
    },
    "sweep": {"mode": "spr"},
    "constellation": {
        "target": "BPSK",
        "source_class": "QPSK",
        "num_signals": 8,
        "spr_db": 20.0,
        "attack_kind": "fgsm",
    },
    "output": {"dir": "out"},
}


def _validate_section(name: str, value: dict) -> None:
    allowed = _SCHEMA[name]
    for key in value:
        if key not in allowed:
            raise ConfigError(f"unknown config key {name}.{key!r}")
        if key == "pulse" and isinstance(value[key], dict):
            _validate_section("pulse", value[key])


def resolve_config(raw: dict) -> dict:
    """Validate against the schema and merge defaults into a full config."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    for section in raw:
        if section not in _DEFAULTS:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(raw[section], dict):
            raise ConfigError(f"config section {section!r} must be an object")
        _validate_section(section, raw[section])
    resolved = {}
    for section, defaults in _DEFAULTS.items():
        merged = json.loads(json.dumps(defaults))
        for k, v in raw.get(section, {}).items():
            if k == "pulse":
                merged["pulse"].update(v)
            else:
                merged[k] = v
        resolved[section] = merged
    return resolved


def _pulse_from(cfg: dict) -> PulseShape:
    p = cfg["pulse"]
    return PulseShape(p["kind"], p["sps"], p.get("rolloff", 0.35), p.get("span", 8))


def _config_hash(resolved: dict) -> str:
    return hashlib.sha256(
        json.dumps(resolved, sort_keys=True).encode("utf-8")
    ).hexdigest()[:8]


def _emit_resolved(resolved: dict, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    payload = dict(resolved)
    payload["toolkit_version"] = __version__
    data = json.dumps(payload, indent=2, sort_keys=True)
    tmp = os.path.join(out_dir, "resolved_config.json.tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(data)
    os.replace(tmp, os.path.join(out_dir, "resolved_config.json"))


def _load_dataset(cfg: dict) -> DatasetFile:
    path = cfg["dataset"]["path"]
    if not path:
        raise ConfigError("dataset.path is required")
    if not os.path.exists(path):
        raise FileNotFoundError(f"dataset file not found: {path}")
    return read_dataset(path)


def _load_checkpoint(cfg: dict, key: str = "checkpoint") -> Checkpoint:
    path = cfg["model"][key]
    if not path:
        raise ConfigError(f"model.{key} is required")
    if not os.path.exists(path):
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return Checkpoint.load(path)


def _attack_from(cfg: dict, spr_db: Optional[float] = None, target: Optional[int] = None) -> AttackConfig:
    a = cfg["attack"]
    return AttackConfig(
        a["kind"],
        a["spr_db"] if spr_db is None else spr_db,
        a["steps"],
        a["step_frac"],
        a["target"] if target is None else target,
        a["raw_grad"],
    )


def cmd_gen(cfg: dict, out_dir: str) -> None:
    d = cfg["dataset"]
    synth = SynthesisConfig(
        classes=tuple(d["classes"]),
        signals_per_class=d["signals_per_class"],
        n=d["n"],
        snr_db=d["snr_db"],
        pulse=_pulse_from(d),
        seed=d["seed"],
        store_symbols=d["store_symbols"],
    )
    ds = gen_dataset(synth)
    path = d["path"] or os.path.join(out_dir, "dataset.crml")
    write_dataset(ds, path)
    print(f"wrote {len(ds.records)} records to {path}")


def cmd_train(cfg: dict, out_dir: str) -> None:
    ds = _load_dataset(cfg)
    m = cfg["model"]
    pulse = ds.pulse
    schemes = [ModScheme.from_name(c) for c in ds.class_names]
    snr = ds.manifest.get("snr_db")
    model = build(
        m["preset"], ds.n, len(ds.class_names), seed=m["seed"],
        pulse=pulse, schemes=schemes, snr_db=snr,
    )
    if m["preset"] == "max_likelihood":
        from .classifiers import model_to_checkpoint

        ckpt = model_to_checkpoint(model, {"seed": m["seed"], "epochs": 0})
    else:
        ckpt = train(model, ds, TrainHyper(m["epochs"], m["batch"], m["lr"], m["seed"]))
    path = m["checkpoint"] or os.path.join(out_dir, "checkpoint.bin")
    ckpt.save(path)
    val = ckpt.meta.get("val_accuracy")
    print(f"saved checkpoint to {path}" + (f" (val acc {val:.4f})" if val is not None else ""))


def cmd_attack(cfg: dict, out_dir: str) -> None:
    ds = _load_dataset(cfg)
    ckpt = _load_checkpoint(cfg)
    model = model_from_checkpoint(ckpt)
    attack = _attack_from(cfg)
    split = cfg["dataset"]["split"]
    recs = ds.split_records(split)
    x = np.stack([r.samples for r in recs]).astype(np.float64)
    y = np.array([r.label for r in recs], dtype=np.int64)
    deltas = craft_batch(model, x, y, attack)
    new_records = []
    for rec, delta in zip(recs, deltas):
        new_records.append(
            DatasetRecord(
                rec.label,
                rec.snr_db,
                (rec.samples.astype(np.float64) + delta).astype(np.float32),
                rec.symbol_indices,
            )
        )
    out_ds = DatasetFile(
        list(ds.class_names), ds.n, ds.sps, ds.pulse, new_records,
        manifest={
            **{k: v for k, v in ds.manifest.items() if k != "split"},
            "split": {"train": [], "val": [], "test": list(range(len(new_records)))},
            "attack": {
                "kind": attack.kind,
                "spr_db": attack.spr_db,
                "steps": attack.steps,
                "step_frac": attack.step_frac,
                "target": attack.target,
            },
        },
    )
    path = os.path.join(out_dir, "perturbed.crml")
    write_dataset(out_ds, path)
    print(f"wrote perturbed {split} split ({len(new_records)} records) to {path}")


def cmd_eval(cfg: dict, out_dir: str, seed: int) -> None:
    ds = _load_dataset(cfg)
    ckpt = _load_checkpoint(cfg)
    model = model_from_checkpoint(ckpt)
    surrogate = None
    if cfg["model"]["surrogate"]:
        surrogate = model_from_checkpoint(_load_checkpoint(cfg, "surrogate"))
    fw = FrameworkKind(
        cfg["framework"]["kind"],
        cfg["framework"]["post_noise_snr_db"],
        cfg["framework"]["noise_relative_to_clean"],
    )
    attack = _attack_from(cfg) if "attack" in cfg.get("_present", ()) else None
    tag = _config_hash(cfg)
    from .evaluation import AccuracyTable

    table = AccuracyTable()
    row, cm = eval_framework(model, ds, attack, fw, seed, surrogate=surrogate,
                             split=cfg["dataset"]["split"])
    table.rows.append(row)
    write_csv(os.path.join(out_dir, f"accuracy_{tag}.csv"), table.to_csv())
    name = "natural" if attack is None else f"{attack.kind}_{attack.spr_db:g}db"
    write_csv(os.path.join(out_dir, f"confusion_{name}_{tag}.csv"), cm.to_csv())
    print(f"{fw.kind} {row.attack}@{row.condition}: accuracy {row.accuracy:.4f} (n={row.n})")


def cmd_sweep(cfg: dict, out_dir: str, seed: int) -> None:
    ds = _load_dataset(cfg)
    ckpt = _load_checkpoint(cfg)
    model = model_from_checkpoint(ckpt)
    surrogate = None
    if cfg["model"]["surrogate"]:
        surrogate = model_from_checkpoint(_load_checkpoint(cfg, "surrogate"))
    tag = _config_hash(cfg)
    from .svgplot import line_plot

    if cfg["sweep"]["mode"] == "snr":
        table = sweep_snr(model, ds, split=cfg["dataset"]["split"])
        xs = [float(r.condition) for r in table.rows]
        ys = [r.accuracy for r in table.rows]
        line_plot(
            os.path.join(out_dir, f"sweep_snr_{tag}.svg"),
            xs, [("accuracy", ys)], "Accuracy vs SNR", "SNR (dB)", "accuracy",
            ylim=(0.0, 1.0),
        )
    else:
        frameworks = (
            FrameworkKind("robustness"),
            FrameworkKind("security", cfg["framework"]["post_noise_snr_db"]),
        )
        table, _ = sweep_spr(
            model, ds,
            attack_kind=cfg["attack"]["kind"],
            spr_list=cfg["attack"]["spr_list"],
            frameworks=frameworks,
            seed=seed,
            steps=cfg["attack"]["steps"],
            step_frac=cfg["attack"]["step_frac"],
            surrogate=surrogate,
            split=cfg["dataset"]["split"],
        )
        xs = [float(s) for s in cfg["attack"]["spr_list"]]
        series = []
        for fw in ("robustness", "security"):
            ys = [r.accuracy for r in table.rows if r.framework == fw and r.attack != "none"]
            series.append((fw, ys))
        line_plot(
            os.path.join(out_dir, f"sweep_spr_{tag}.svg"),
            xs, series, "Accuracy vs SPR", "SPR (dB)", "accuracy", ylim=(0.0, 1.0),
        )
    write_csv(os.path.join(out_dir, f"sweep_{cfg['sweep']['mode']}_{tag}.csv"), table.to_csv())
    for r in table.rows:
        print(f"{r.framework} {r.attack}@{r.condition}: accuracy {r.accuracy:.4f} (n={r.n})")


def cmd_constellation(cfg: dict, out_dir: str, seed: int) -> None:
    ds = _load_dataset(cfg)
    ckpt = _load_checkpoint(cfg)
    model = model_from_checkpoint(ckpt)
    cc = cfg["constellation"]
    target_scheme = ModScheme.from_name(cc["target"])
    source_name = cc["source_class"]
    if source_name not in ds.class_names:
        raise ConfigError(f"source class {source_name!r} not in the dataset")
    if cc["target"] not in ds.class_names:
        raise ConfigError(f"target class {cc['target']!r} not in the dataset")
    target_idx = ds.class_names.index(cc["target"])
    source_idx = ds.class_names.index(source_name)
    schemes = [ModScheme.from_name(c) for c in ds.class_names]
    pulse = ds.pulse
    recs = [r for r in ds.split_records(cfg["dataset"]["split"]) if r.label == source_idx]
    recs = recs[: cc["num_signals"]]
    if not recs:
        raise ConfigError(f"no {source_name} records in the chosen split")
    attack = AttackConfig(cc["attack_kind"], cc["spr_db"], cfg["attack"]["steps"],
                          cfg["attack"]["step_frac"], target=target_idx)
    tag = _config_hash(cfg)
    rows = ["signal,model_alignment,oracle_alignment"]
    clean_signals, model_pert, oracle_pert = [], [], []
    for rec in recs:
        sig = rec.to_signal(schemes[source_idx])
        deltas = craft_batch(model, sig.samples[None], np.array([source_idx]), attack)
        perturbed = sig.copy_with(sig.samples + deltas[0])
        oracle = oracle_targeted_shift(
            sig, target_scheme, cc["spr_db"], rec.snr_db, pulse, schemes=schemes,
            kind=cc["attack_kind"], steps=cfg["attack"]["steps"],
            step_frac=cfg["attack"]["step_frac"],
        )
        clean_signals.append(sig)
        model_pert.append(perturbed)
        oracle_pert.append(oracle)
    model_scores, _ = batch_alignment(clean_signals, model_pert, target_scheme, pulse)
    oracle_scores, _ = batch_alignment(clean_signals, oracle_pert, target_scheme, pulse)
    for i, (ms, os_) in enumerate(zip(model_scores, oracle_scores)):
        rows.append(f"{i},{ms:.6f},{os_:.6f}")
    write_csv(os.path.join(out_dir, f"alignment_{tag}.csv"), "\n".join(rows) + "\n")
    s0 = matched_filter_symbols(clean_signals[0], pulse).symbols
    s1 = matched_filter_symbols(model_pert[0], pulse).symbols
    s2 = matched_filter_symbols(oracle_pert[0], pulse).symbols
    pts = constellation_points(target_scheme)
    constellation_svg(s0, s1, pts, os.path.join(out_dir, f"constellation_model_{tag}.svg"),
                      title=f"{source_name} perturbed toward {cc['target']} (model)")
    constellation_svg(s0, s2, pts, os.path.join(out_dir, f"constellation_oracle_{tag}.svg"),
                      title=f"{source_name} perturbed toward {cc['target']} (oracle)")
    print(
        f"alignment (mean over {len(model_scores)} signals): "
        f"model {model_scores.mean():.4f}, oracle {oracle_scores.mean():.4f}"
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="modadv",
        description="Adversarial robustness benchmark for modulation recognition",
    )
    parser.add_argument("command", choices=["gen", "train", "attack", "eval", "sweep", "constellation"])
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="run seed override")
    parser.add_argument(
        "--threads", type=int,
        default=int(os.environ.get("MODADV_THREADS", "0")) or None,
        help="BLAS thread count (defaults to MODADV_THREADS)",
    )
    args = parser.parse_args(argv)
    if args.threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        raw = {}
        if args.config:
            if not os.path.exists(args.config):
                raise FileNotFoundError(f"config file not found: {args.config}")
            with open(args.config, "r", encoding="utf-8") as f:
                raw = json.load(f)
        cfg = resolve_config(raw)
        cfg["_present"] = tuple(raw.keys())
        if args.out:
            cfg["output"]["dir"] = args.out
        out_dir = cfg["output"]["dir"]
        seed = args.seed if args.seed is not None else cfg["dataset"]["seed"]
        if args.seed is not None:
            cfg["dataset"]["seed"] = args.seed
            cfg["model"]["seed"] = args.seed
        present = cfg.pop("_present")
        _emit_resolved(cfg, out_dir)
        cfg["_present"] = present
        if args.command == "gen":
            cmd_gen(cfg, out_dir)
        elif args.command == "train":
            cmd_train(cfg, out_dir)
        elif args.command == "attack":
            cmd_attack(cfg, out_dir)
        elif args.command == "eval":
            cmd_eval(cfg, out_dir, seed)
        elif args.command == "sweep":
            cmd_sweep(cfg, out_dir, seed)
        elif args.command == "constellation":
            cmd_constellation(cfg, out_dir, seed)
        return EXIT_OK
    except (ConfigError, ArgumentError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, PermissionError, OSError) as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ShapeError, UnsupportedAttackError) as e:
        print(f"incompatibility: {e}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except ModAdvError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
