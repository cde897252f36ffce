"""Binary dataset file ("CRML" magic) plus JSON manifest and generation.

Layout, little-endian throughout:

  header:  magic 4s "CRML" | version u16 | num_classes u16
           | per class: name length u16, utf-8 bytes
           | N u32 | sps u16 | pulse kind u8 (0 rect, 1 rrc)
           | rolloff f32 | span u16 | has_symbols u8 | record count u32
  record:  label u16 | snr_db*10 i16 | samples 2*N f32
           | if has_symbols: n_symbols u16, then u16 indices

The sidecar manifest (<path>.manifest.json) stores class names, the
train/val/test split indices, the master seed, and pulse parameters.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import ArgumentError, ConfigError
from .sigsynth import IQSignal, ModScheme, PulseShape, awgn, constellation_points, modulate

MAGIC = b"CRML"
VERSION = 1


@dataclass
class DatasetRecord:
    label: int
    snr_db: float
    samples: np.ndarray  # 2xN float32
    symbol_indices: Optional[np.ndarray] = None  # u16

    def to_signal(self, scheme: Optional[ModScheme] = None) -> IQSignal:
        return IQSignal(
            self.samples.astype(np.float64),
            label=self.label,
            snr_db=self.snr_db,
            n_symbols=None if self.symbol_indices is None else len(self.symbol_indices),
            scheme=scheme,
        )


@dataclass
class DatasetFile:
    class_names: List[str]
    n: int
    sps: int
    pulse: PulseShape
    records: List[DatasetRecord]
    manifest: dict = field(default_factory=dict)

    @property
    def has_symbols(self) -> bool:
        return all(r.symbol_indices is not None for r in self.records)

    def scheme_of(self, record: DatasetRecord) -> ModScheme:
        return ModScheme.from_name(self.class_names[record.label])

    def split_records(self, split: str) -> List[DatasetRecord]:
        idx = self.manifest.get("split", {}).get(split)
        if idx is None:
            raise ConfigError(f"manifest has no {split!r} split")
        return [self.records[i] for i in idx]


def write_dataset(ds: DatasetFile, path: str) -> None:
    """Write the binary file and its manifest atomically (temp + rename)."""
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<HH", VERSION, len(ds.class_names))
    for name in ds.class_names:
        raw = name.encode("utf-8")
        buf += struct.pack("<H", len(raw)) + raw
    pulse_kind = 0 if ds.pulse.kind == "rect" else 1
    rolloff = ds.pulse.rolloff if ds.pulse.kind == "rrc" else 0.0
    span = ds.pulse.span if ds.pulse.kind == "rrc" else 0
    buf += struct.pack(
        "<IHBfHBI",
        ds.n,
        ds.sps,
        pulse_kind,
        rolloff,
        span,
        1 if ds.has_symbols else 0,
        len(ds.records),
    )
    has_symbols = ds.has_symbols
    for rec in ds.records:
        if rec.label >= len(ds.class_names):
            raise ArgumentError(f"label {rec.label} exceeds the class table")
        buf += struct.pack("<Hh", rec.label, int(round(rec.snr_db * 10)))
        buf += np.ascontiguousarray(rec.samples, dtype="<f4").tobytes()
        if has_symbols:
            buf += struct.pack("<H", len(rec.symbol_indices))
            buf += np.ascontiguousarray(rec.symbol_indices, dtype="<u2").tobytes()
    _atomic_write(path, bytes(buf))
    _atomic_write(
        manifest_path(path),
        json.dumps(ds.manifest, indent=2, sort_keys=True).encode("utf-8"),
    )


def read_dataset(path: str) -> DatasetFile:
    with open(path, "rb") as f:
        blob = f.read()
    off = 0

    def take(fmt):
        nonlocal off
        vals = struct.unpack_from(fmt, blob, off)
        off += struct.calcsize(fmt)
        return vals

    if blob[:4] != MAGIC:
        raise ConfigError(f"{path}: not a dataset file (bad magic)")
    off = 4
    version, n_classes = take("<HH")
    if version != VERSION:
        raise ConfigError(f"{path}: unsupported dataset version {version}")
    names = []
    for _ in range(n_classes):
        (ln,) = take("<H")
        names.append(blob[off : off + ln].decode("utf-8"))
        off += ln
    n, sps, pulse_kind, rolloff, span, has_symbols, count = take("<IHBfHBI")
    if pulse_kind == 0:
        pulse = PulseShape("rect", sps)
    else:
        pulse = PulseShape("rrc", sps, float(rolloff), span)
    records = []
    for _ in range(count):
        label, snr10 = take("<Hh")
        if label >= n_classes:
            raise ConfigError(f"{path}: label {label} exceeds the class table")
        samples = np.frombuffer(blob, dtype="<f4", count=2 * n, offset=off).reshape(2, n)
        off += 2 * n * 4
        syms = None
        if has_symbols:
            (n_sym,) = take("<H")
            syms = np.frombuffer(blob, dtype="<u2", count=n_sym, offset=off).copy()
            off += 2 * n_sym
        records.append(DatasetRecord(label, snr10 / 10.0, samples.copy(), syms))
    ds = DatasetFile(names, n, sps, pulse, records)
    mpath = manifest_path(path)
    if os.path.exists(mpath):
        with open(mpath, "r", encoding="utf-8") as f:
            ds.manifest = json.load(f)
    return ds


def manifest_path(path: str) -> str:
    return path + ".manifest.json"


def _atomic_write(path: str, data: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(data)
    os.replace(tmp, path)


@dataclass(frozen=True)
class SynthesisConfig:
    classes: tuple  # modulation names
    signals_per_class: int
    n: int = 1024
    snr_db: float = 20.0
    pulse: PulseShape = PulseShape()
    seed: int = 0
    store_symbols: bool = True

    def __post_init__(self):
        if len(self.classes) == 0:
            raise ConfigError("class list must be non-empty")
        if self.signals_per_class < 1:
            raise ConfigError("signals_per_class must be >= 1")
        if self.n % self.pulse.sps != 0:
            raise ConfigError("N must be divisible by sps")


def record_seed(master_seed: int, record_index: int) -> np.random.SeedSequence:
    """Counter-based per-record stream: records are independently reproducible."""
    return np.random.SeedSequence(master_seed, spawn_key=(record_index,))


def gen_dataset(config: SynthesisConfig) -> DatasetFile:
    """Synthesize a labeled dataset: random symbols, pulse shaping, AWGN.

    Records are class-major. The 70/30 train/test split (5% of train as
    validation) is drawn from the master seed and stored in the manifest.
    """
    schemes = [ModScheme.from_name(c) for c in config.classes]
    n_symbols = config.n // config.pulse.sps
    records: List[DatasetRecord] = []
    for label, scheme in enumerate(schemes):
        m = len(constellation_points(scheme))
        for j in range(config.signals_per_class):
            rec_idx = label * config.signals_per_class + j
            ss = record_seed(config.seed, rec_idx)
            rng = np.random.default_rng(ss)
            idx = rng.integers(0, m, size=n_symbols)
            sig = modulate(idx, scheme, config.pulse)
            noisy = awgn(sig, config.snr_db, ss.spawn(1)[0])
            records.append(
                DatasetRecord(
                    label=label,
                    snr_db=config.snr_db,
                    samples=noisy.samples.astype(np.float32),
                    symbol_indices=idx.astype(np.uint16) if config.store_symbols else None,
                )
            )
    split = make_split(len(records), [r.label for r in records], config.seed)
    manifest = {
        "classes": [s.name for s in schemes],
        "n": config.n,
        "sps": config.pulse.sps,
        "pulse": {
            "kind": config.pulse.kind,
            "sps": config.pulse.sps,
            "rolloff": config.pulse.rolloff,
            "span": config.pulse.span,
        },
        "snr_db": config.snr_db,
        "master_seed": config.seed,
        "split": split,
    }
    return DatasetFile(
        [s.name for s in schemes], config.n, config.pulse.sps, config.pulse, records, manifest
    )


def make_split(n_records: int, labels, seed: int) -> dict:
    """Stratified 70/30 train/test split; 5% of train held out as validation."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xC0FFEE,)))
    labels = np.asarray(labels)
    train, val, test = [], [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        n_train = int(round(0.7 * len(idx)))
        tr = idx[:n_train]
        n_val = int(round(0.05 * len(tr)))
        val.extend(int(i) for i in tr[:n_val])
        train.extend(int(i) for i in tr[n_val:])
        test.extend(int(i) for i in idx[n_train:])
    return {"train": sorted(train), "val": sorted(val), "test": sorted(test)}
