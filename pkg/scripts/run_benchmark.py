#!/usr/bin/env python3
"""Full benchmark: synthesize data, train all classifiers, attack, evaluate.

Reproduces the headline experiment end to end on CPU:

    python3 scripts/run_benchmark.py --out runs/benchmark

Stages (each skipped if its output already exists, so reruns are cheap):
  1. generate a 4-class dataset (BPSK/QPSK/16QAM/64QAM) at 20 dB SNR
  2. train cnn_small, resnet_lite, hoc_logreg; instantiate max_likelihood
  3. natural accuracy + confusion matrix per model
  4. FGSM and PGA sweeps over SPR {25, 20, 15} dB under both the
     robustness (no post-attack noise) and security (post-attack AWGN)
     frameworks, with accuracy curves rendered to SVG
  5. constellation-space alignment of model vs likelihood-oracle attacks

Use --quick for a smoke run (smaller dataset, fewer epochs, ~2 min).
"""

import argparse
import json
import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from modadv.attacks import AttackConfig, craft_batch
from modadv.classifiers import (
    Checkpoint,
    TrainHyper,
    build,
    model_from_checkpoint,
    model_to_checkpoint,
    train,
)
from modadv.constellation import batch_alignment, oracle_targeted_shift
from modadv.dataset import SynthesisConfig, gen_dataset, read_dataset, write_dataset
from modadv.evaluation import (
    FrameworkKind,
    eval_framework,
    per_class_robustness,
    sweep_spr,
    write_csv,
)
from modadv.sigsynth import ModScheme, PulseShape
from modadv.svgplot import line_plot

CLASSES = ("BPSK", "QPSK", "16QAM", "64QAM")
PULSE = PulseShape("rrc", 4)
SPR_LIST = (25.0, 20.0, 15.0)


def log(msg):
    print(f"[{time.strftime('%H:%M:%S')}] {msg}", flush=True)


def stage_dataset(out, quick, seed):
    path = os.path.join(out, "dataset.crml")
    if os.path.exists(path):
        log(f"dataset exists: {path}")
        return read_dataset(path)
    per_class = 400 if quick else 2600
    cfg = SynthesisConfig(
        classes=CLASSES,
        signals_per_class=per_class,
        n=1024,
        snr_db=20.0,
        pulse=PULSE,
        seed=seed,
    )
    t0 = time.time()
    ds = gen_dataset(cfg)
    write_dataset(ds, path)
    log(f"generated {len(ds.records)} signals in {time.time() - t0:.1f}s -> {path}")
    return ds


def stage_train(out, ds, quick, seed):
    epochs = {"cnn_small": 4 if quick else 32, "resnet_lite": 4 if quick else 32,
              "hoc_logreg": 10 if quick else 30}
    ckpts = {}
    for preset in ("cnn_small", "resnet_lite", "hoc_logreg"):
        path = os.path.join(out, f"{preset}.ckpt")
        if os.path.exists(path):
            log(f"checkpoint exists: {path}")
            ckpts[preset] = Checkpoint.load(path)
            continue
        model = build(preset, ds.n, len(CLASSES), seed=seed, pulse=ds.pulse)
        hyper = TrainHyper(epochs=epochs[preset], batch=128, lr=2e-3, seed=seed)
        t0 = time.time()
        ckpt = train(model, ds, hyper)
        ckpt.save(path)
        log(f"trained {preset} in {time.time() - t0:.1f}s "
            f"(val acc {ckpt.meta['val_accuracy']:.4f}) -> {path}")
        ckpts[preset] = ckpt
    schemes = [ModScheme.from_name(c) for c in CLASSES]
    ml = build("max_likelihood", ds.n, len(CLASSES), pulse=ds.pulse,
               schemes=schemes, snr_db=ds.manifest.get("snr_db", 20.0))
    ml_path = os.path.join(out, "max_likelihood.ckpt")
    if not os.path.exists(ml_path):
        model_to_checkpoint(ml, {"seed": seed, "epochs": 0}).save(ml_path)
    ckpts["max_likelihood"] = Checkpoint.load(ml_path)
    return ckpts


def stage_natural(out, ds, ckpts):
    rows = []
    for preset, ckpt in ckpts.items():
        model = model_from_checkpoint(ckpt)
        row, cm = eval_framework(model, ds, None, FrameworkKind("robustness"))
        write_csv(os.path.join(out, f"confusion_natural_{preset}.csv"), cm.to_csv())
        log(f"natural accuracy {preset}: {row.accuracy:.4f}")
        rows.append((preset, row.accuracy))
    write_csv(
        os.path.join(out, "natural_accuracy.csv"),
        "model,accuracy\n" + "".join(f"{p},{a:.6f}\n" for p, a in rows),
    )
    return dict(rows)


def stage_sweeps(out, ds, ckpts, seed, limit):
    frameworks = (FrameworkKind("robustness"), FrameworkKind("security", 20.0))
    summary = {}
    victim = model_from_checkpoint(ckpts["cnn_small"])
    for kind in ("fgsm", "pga"):
        table, matrices = sweep_spr(
            victim, ds, attack_kind=kind, spr_list=SPR_LIST,
            frameworks=frameworks, seed=seed, limit=limit,
        )
        write_csv(os.path.join(out, f"sweep_{kind}_cnn_small.csv"), table.to_csv())
        series = []
        for fw in ("robustness", "security"):
            ys = [r.accuracy for r in table.rows
                  if r.framework == fw and r.attack == kind]
            series.append((fw, ys))
            summary[(kind, fw)] = ys
        line_plot(
            os.path.join(out, f"sweep_{kind}_cnn_small.svg"),
            list(SPR_LIST), series,
            f"cnn_small accuracy vs {kind.upper()} budget",
            "SPR (dB)", "accuracy", ylim=(0.0, 1.0),
        )
        nat = matrices[("robustness", "natural")]
        attacked = matrices[("robustness", f"{SPR_LIST[-1]:g}")]
        drops = per_class_robustness(nat, attacked)
        write_csv(
            os.path.join(out, f"per_class_drop_{kind}.csv"),
            "class,recall_drop\n" + "".join(f"{c},{d:.6f}\n" for c, d in drops),
        )
        for fw in ("robustness", "security"):
            accs = ", ".join(f"{a:.3f}" for a in summary[(kind, fw)])
            log(f"{kind} {fw} accuracy over SPR {SPR_LIST}: {accs}")
    # HOC is not differentiable end to end: attack it through the CNN surrogate
    hoc = model_from_checkpoint(ckpts["hoc_logreg"])
    table, _ = sweep_spr(
        hoc, ds, attack_kind="pga", spr_list=SPR_LIST, frameworks=frameworks,
        seed=seed, surrogate=victim, limit=limit,
    )
    write_csv(os.path.join(out, "sweep_pga_hoc_transfer.csv"), table.to_csv())
    return summary


def stage_alignment(out, ds, ckpts, seed, n_signals):
    """Compare symbol-space alignment of CNN vs likelihood-oracle attacks."""
    target, source = "BPSK", "QPSK"
    target_scheme = ModScheme.from_name(target)
    schemes = [ModScheme.from_name(c) for c in CLASSES]
    src_idx, tgt_idx = CLASSES.index(source), CLASSES.index(target)
    recs = [r for r in ds.split_records("test") if r.label == src_idx][:n_signals]
    model = model_from_checkpoint(ckpts["cnn_small"])
    cfg = AttackConfig("fgsm", 15.0, target=tgt_idx)
    clean, model_pert, oracle_pert = [], [], []
    for rec in recs:
        sig = rec.to_signal(schemes[src_idx])
        delta = craft_batch(model, sig.samples[None], np.array([src_idx]), cfg)[0]
        clean.append(sig)
        model_pert.append(sig.copy_with(sig.samples + delta))
        oracle_pert.append(oracle_targeted_shift(
            sig, target_scheme, 15.0, rec.snr_db, ds.pulse, schemes=schemes))
    m_scores, _ = batch_alignment(clean, model_pert, target_scheme, ds.pulse)
    o_scores, _ = batch_alignment(clean, oracle_pert, target_scheme, ds.pulse)
    log(f"alignment {source}->{target}: model {m_scores.mean():.4f}, "
        f"oracle {o_scores.mean():.4f}")
    write_csv(
        os.path.join(out, "alignment.csv"),
        "attacker,mean_alignment,n\n"
        f"cnn_small,{m_scores.mean():.6f},{len(m_scores)}\n"
        f"oracle,{o_scores.mean():.6f},{len(o_scores)}\n",
    )
    return float(m_scores.mean()), float(o_scores.mean())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/benchmark")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--quick", action="store_true",
                    help="small dataset and short training for a smoke run")
    ap.add_argument("--attack-limit", type=int, default=None,
                    help="cap the number of attacked test signals per sweep")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    t0 = time.time()
    ds = stage_dataset(args.out, args.quick, args.seed)
    ckpts = stage_train(args.out, ds, args.quick, args.seed)
    natural = stage_natural(args.out, ds, ckpts)
    limit = args.attack_limit or (120 if args.quick else 600)
    sweeps = stage_sweeps(args.out, ds, ckpts, args.seed, limit)
    align = stage_alignment(args.out, ds, ckpts, args.seed,
                            16 if args.quick else 64)
    report = {
        "natural_accuracy": natural,
        "sweeps": {f"{k}/{fw}": v for (k, fw), v in sweeps.items()},
        "alignment": {"cnn_small": align[0], "oracle": align[1]},
        "spr_list_db": list(SPR_LIST),
        "wall_seconds": round(time.time() - t0, 1),
    }
    with open(os.path.join(args.out, "report.json"), "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
    log(f"done in {report['wall_seconds']}s; outputs in {args.out}/")


if __name__ == "__main__":
    main()
