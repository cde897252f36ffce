"""Model families: HOC + logistic regression, a compact CNN, a residual CNN,
and the maximum-likelihood reference classifier, with training/checkpointing.

Checkpoint file layout: u32 JSON header length | UTF-8 JSON header (arch,
layer shapes, metadata) | little-endian float32 parameter blob in the layer
order fixed by the architecture descriptor.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .dataset import DatasetFile
from .errors import (
    ArgumentError,
    ConfigError,
    ShapeError,
    TrainingError,
    UnsupportedAttackError,
)
from .features import FEATURE_ORDERS, hoc_features, matched_filter_symbols
from .sigsynth import IQSignal, ModScheme, PulseShape, constellation_points, measure_power

PRESETS = ("hoc_logreg", "cnn_small", "resnet_lite", "max_likelihood")


@dataclass
class Prediction:
    probs: np.ndarray
    logits: np.ndarray


@dataclass
class Checkpoint:
    arch: dict
    params: Dict[str, np.ndarray]  # float32
    meta: dict = field(default_factory=dict)

    def save(self, path: str) -> None:
        header = {
            "arch": self.arch,
            "meta": self.meta,
            "layers": [[k, list(v.shape)] for k, v in self.params.items()],
        }
        hj = json.dumps(header, sort_keys=True).encode("utf-8")
        tmp = path + ".tmp"
        with open(tmp, "wb") as f:
            f.write(struct.pack("<I", len(hj)))
            f.write(hj)
            for _, v in self.params.items():
                f.write(np.ascontiguousarray(v, dtype="<f4").tobytes())
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str) -> "Checkpoint":
        with open(path, "rb") as f:
            (hlen,) = struct.unpack("<I", f.read(4))
            header = json.loads(f.read(hlen).decode("utf-8"))
            params = {}
            for name, shape in header["layers"]:
                count = int(np.prod(shape)) if shape else 1
                arr = np.frombuffer(f.read(count * 4), dtype="<f4").reshape(shape)
                params[name] = arr.copy()
        return cls(header["arch"], params, header["meta"])


# --- neural architectures ----------------------------------------------------


def _cnn_small_layers(n: int, num_classes: int) -> List[tuple]:
    if n % 64 != 0:
        raise ConfigError("cnn_small requires N divisible by 64")
    return [
        ("conv", "conv1", 2, 64, 7),
        ("relu",),
        ("pool", 4),
        ("conv", "conv2", 64, 64, 5),
        ("relu",),
        ("pool", 4),
        ("conv", "conv3", 64, 64, 3),
        ("relu",),
        ("pool", 4),
        ("flatten",),
        ("dense", "fc1", 64 * (n // 64), 128),
        ("relu",),
        ("dense", "fc2", 128, num_classes),
    ]


def _resnet_lite_layers(n: int, num_classes: int) -> List[tuple]:
    if n % 64 != 0:
        raise ConfigError("resnet_lite requires N divisible by 64")
    width = 32
    layers: List[tuple] = [("conv", "entry", 2, width, 1)]
    for i in (1, 2, 3):
        layers.append(("resunit", f"stack{i}", width, 3))
        layers.append(("pool", 4))
    layers += [
        ("gap",),
        ("dense", "fc1", width, 128),
        ("relu",),
        ("dense", "fc2", 128, num_classes),
    ]
    return layers


def _param_order(layers: List[tuple]) -> List[Tuple[str, tuple]]:
    order: List[Tuple[str, tuple]] = []
    for layer in layers:
        if layer[0] == "conv":
            _, name, cin, cout, k = layer
            order.append((f"{name}.w", (cout, cin, k)))
            order.append((f"{name}.b", (cout,)))
        elif layer[0] == "dense":
            _, name, din, dout = layer
            order.append((f"{name}.w", (din, dout)))
            order.append((f"{name}.b", (dout,)))
        elif layer[0] == "resunit":
            _, name, width, k = layer
            for sub in ("conv1", "conv2"):
                order.append((f"{name}.{sub}.w", (width, width, k)))
                order.append((f"{name}.{sub}.b", (width,)))
    return order


def init_params(layers: List[tuple], seed: int) -> Dict[str, np.ndarray]:
    """Fan-in-scaled uniform weights, zero biases, float32, from one seed."""
    rng = np.random.default_rng(seed)
    params: Dict[str, np.ndarray] = {}
    for name, shape in _param_order(layers):
        if name.endswith(".b"):
            params[name] = np.zeros(shape, dtype=np.float32)
        else:
            fan_in = int(np.prod(shape[1:])) if len(shape) == 3 else shape[0]
            s = 1.0 / np.sqrt(fan_in)
            params[name] = rng.uniform(-s, s, size=shape).astype(np.float32)
    return params


class NeuralModel:
    """A preset layer stack with float32 parameters and float64 compute."""

    differentiable = True

    def __init__(
        self,
        preset: str,
        n: int,
        num_classes: int,
        params: Dict[str, np.ndarray],
        input_scale: float = 1.0,
    ):
        self.preset = preset
        self.n = n
        self.num_classes = num_classes
        # fixed (non-trained) normalization so unit-ish activations reach conv1
        self.input_scale = float(input_scale)
        builder = {"cnn_small": _cnn_small_layers, "resnet_lite": _resnet_lite_layers}[preset]
        self.layers = builder(n, num_classes)
        self.param_order = _param_order(self.layers)
        expected = {name for name, _ in self.param_order}
        if set(params) != expected:
            raise ShapeError("parameter set does not match the architecture")
        self.params = params

    def _forward(self, x: Tensor, params_t: Dict[str, Tensor]) -> Tensor:
        h = ad.scale(x, self.input_scale) if self.input_scale != 1.0 else x
        for layer in self.layers:
            kind = layer[0]
            if kind == "conv":
                _, name, *_ = layer
                h = ad.conv1d(h, params_t[f"{name}.w"], params_t[f"{name}.b"])
            elif kind == "dense":
                _, name, *_ = layer
                h = ad.dense(h, params_t[f"{name}.w"], params_t[f"{name}.b"])
            elif kind == "relu":
                h = ad.relu(h)
            elif kind == "pool":
                h = ad.avg_pool1d(h, layer[1])
            elif kind == "gap":
                h = ad.global_avg_pool(h)
            elif kind == "flatten":
                h = ad.flatten(h)
            elif kind == "resunit":
                _, name, *_ = layer
                branch = ad.conv1d(h, params_t[f"{name}.conv1.w"], params_t[f"{name}.conv1.b"])
                branch = ad.relu(branch)
                branch = ad.conv1d(branch, params_t[f"{name}.conv2.w"], params_t[f"{name}.conv2.b"])
                h = ad.add(h, branch)
        return h

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        if x.ndim != 3 or x.shape[1] != 2 or x.shape[2] != self.n:
            raise ShapeError(f"expected (B, 2, {self.n}) input, got {x.shape}")
        return x

    def logits(self, x: np.ndarray) -> np.ndarray:
        x = self._check_input(x)
        params_t = {k: Tensor(v) for k, v in self.params.items()}
        return self._forward(Tensor(x), params_t).data

    def loss_and_param_grads(
        self, x: np.ndarray, labels: np.ndarray
    ) -> Tuple[float, Dict[str, np.ndarray]]:
        """Mean cross-entropy over the batch and its parameter gradients."""
        x = self._check_input(x)
        params_t = {k: Tensor(v) for k, v in self.params.items()}
        logits = self._forward(Tensor(x), params_t)
        loss = ad.scale(ad.softmax_cross_entropy(logits, labels), 1.0 / x.shape[0])
        ad.backward(loss)
        grads = {k: t.grad for k, t in params_t.items()}
        return float(loss.data), grads

    def input_gradient_loss(
        self, x: np.ndarray, labels: np.ndarray, targeted: bool = False
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Per-sample CE losses (negated when targeted) and input gradients."""
        x = self._check_input(x)
        labels = np.asarray(labels, dtype=np.int64)
        params_t = {k: Tensor(v) for k, v in self.params.items()}
        xt = Tensor(x)
        logits = self._forward(xt, params_t)
        ce = ad.softmax_cross_entropy(logits, labels)
        loss = ad.scale(ce, -1.0) if targeted else ce
        ad.backward(loss)
        lsm = ad.log_softmax(logits.data)
        per_sample = -lsm[np.arange(len(labels)), labels]
        if targeted:
            per_sample = -per_sample
        grad = xt.grad if xt.grad is not None else np.zeros_like(x)
        return per_sample, grad


class HocLogregModel:
    """Standardized HOC features into L2-regularized multinomial regression."""

    differentiable = False
    L2 = 1e-3

    def __init__(self, n: int, num_classes: int, pulse: PulseShape, params: Dict[str, np.ndarray]):
        self.preset = "hoc_logreg"
        self.n = n
        self.num_classes = num_classes
        self.pulse = pulse
        d = len(FEATURE_ORDERS)
        for name, shape in (("w", (d, num_classes)), ("b", (num_classes,)), ("mu", (d,)), ("sd", (d,))):
            if params[name].shape != shape:
                raise ShapeError(f"bad shape for {name}: {params[name].shape}")
        self.params = params

    def features(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        out = np.empty((x.shape[0], len(FEATURE_ORDERS)))
        for i in range(x.shape[0]):
            out[i] = hoc_features(IQSignal(x[i]), self.pulse).values
        return out

    def logits(self, x: np.ndarray) -> np.ndarray:
        f = self.features(x)
        z = (f - self.params["mu"].astype(np.float64)) / self.params["sd"].astype(np.float64)
        return z @ self.params["w"].astype(np.float64) + self.params["b"].astype(np.float64)

    def input_gradient_loss(self, x, labels, targeted=False):
        raise UnsupportedAttackError(
            "hoc_logreg has no end-to-end input gradient; attack a surrogate model"
        )


class MLModel:
    """Bayes-optimal reference: exact Gaussian-mixture likelihood per scheme.

    Uses the dataset SNR metadata (known channel) rather than estimating
    the noise level. Differentiable in closed form for oracle attacks.
    """

    differentiable = True

    def __init__(
        self,
        n: int,
        schemes: Sequence[ModScheme],
        pulse: PulseShape,
        snr_db: Optional[float] = None,
    ):
        if not schemes:
            raise ConfigError("max_likelihood requires a scheme list")
        self.preset = "max_likelihood"
        self.n = n
        self.num_classes = len(schemes)
        self.schemes = list(schemes)
        self.pulse = pulse
        self.snr_db = snr_db
        self.points = [constellation_points(s) for s in self.schemes]
        self.params: Dict[str, np.ndarray] = {}

    def _amplitude_scale(self, x: np.ndarray, snr_db: float) -> np.ndarray:
        """Per-signal amplitude factor relative to a unit-power constellation.

        A clean unit-constellation signal has per-sample power gain/sps, so
        the received power plus the known SNR pin the transmit amplitude.
        Dividing the input by this factor makes the likelihood invariant to
        input scaling (signal and noise scale together).
        """
        taps = self.pulse.taps()
        p_unit = float(np.sum(taps**2)) / self.pulse.sps
        p_rx = np.mean(np.sum(x**2, axis=1), axis=-1)
        gamma = 10.0 ** (-snr_db / 10.0)
        c2 = p_rx / (p_unit * (1.0 + gamma))
        c = np.sqrt(np.maximum(c2, 0.0))
        c[c == 0.0] = 1.0
        return c

    def _sigma2_symbol(self, snr_db: float) -> float:
        """Per-component symbol-noise variance at unit constellation scale."""
        gamma = 10.0 ** (-snr_db / 10.0)
        return gamma / (2.0 * self.pulse.sps)

    def _symbols(self, x: np.ndarray) -> np.ndarray:
        """(B, 2, N) -> (B, K) complex symbol estimates."""
        out = []
        for i in range(x.shape[0]):
            out.append(matched_filter_symbols(IQSignal(x[i]), self.pulse).symbols)
        return np.stack(out)

    def _loglik(self, x: np.ndarray, snr_db: float):
        """Per-scheme log-likelihoods plus the pieces needed for the gradient."""
        scale = self._amplitude_scale(x, snr_db)  # (B,)
        s = self._symbols(x) / scale[:, None]  # (B, K) at unit constellation scale
        sigma2 = self._sigma2_symbol(snr_db)
        lls = np.empty((x.shape[0], self.num_classes))
        resp_dirs = []  # per scheme: (B, K) complex responsibility-weighted mean point
        for m, pts in enumerate(self.points):
            d2 = np.abs(s[:, :, None] - pts[None, None, :]) ** 2  # (B, K, M)
            loga = -d2 / (2.0 * sigma2) - np.log(len(pts))
            mx = loga.max(axis=2, keepdims=True)
            w = np.exp(loga - mx)
            z = w.sum(axis=2)
            lls[:, m] = (mx[:, :, 0] + np.log(z)).sum(axis=1)
            resp = w / z[:, :, None]
            resp_dirs.append((resp * pts[None, None, :]).sum(axis=2))
        return lls, s, sigma2, scale, resp_dirs

    def _resolve_snr(self, snr_db: Optional[float]) -> float:
        if snr_db is not None:
            return snr_db
        if self.snr_db is not None:
            return self.snr_db
        raise ConfigError("max_likelihood needs an SNR (dataset metadata or config)")

    def logits(self, x: np.ndarray, snr_db: Optional[float] = None) -> np.ndarray:
        x = _as_batch(x, self.n)
        lls, *_ = self._loglik(x, self._resolve_snr(snr_db))
        return lls

    def input_gradient_loss(
        self,
        x: np.ndarray,
        labels: np.ndarray,
        targeted: bool = False,
        snr_db: Optional[float] = None,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Closed-form gradient of the softmax cross-entropy over log-likelihoods."""
        x = _as_batch(x, self.n)
        labels = np.asarray(labels, dtype=np.int64)
        snr = self._resolve_snr(snr_db)
        lls, s, sigma2, scale, resp_dirs = self._loglik(x, snr)
        lsm = ad.log_softmax(lls)
        per_sample = -lsm[np.arange(len(labels)), labels]
        probs = np.exp(lsm)
        # dCE/dll_m = probs - onehot; chain through d ll_m / d s_k
        wts = probs.copy()
        wts[np.arange(len(labels)), labels] -= 1.0
        coef = np.zeros(s.shape, dtype=np.complex128)  # d loss / d s_k (complex form)
        for m in range(self.num_classes):
            dll_ds = (resp_dirs[m] - s) / sigma2
            coef += wts[:, m][:, None] * dll_ds
        # normalized symbols are raw symbols over the amplitude scale factor
        coef /= scale[:, None]
        if targeted:
            per_sample = -per_sample
            coef = -coef
        grad = np.empty_like(x)
        taps = self.pulse.taps() / float(np.sum(self.pulse.taps() ** 2))
        d = self.pulse.delay()
        sps = self.pulse.sps
        for i in range(x.shape[0]):
            train = np.zeros(self.n, dtype=np.complex128)
            train[::sps] = coef[i]
            full = np.convolve(train, taps.astype(np.complex128))
            g = full[d : d + self.n]
            grad[i, 0] = g.real
            grad[i, 1] = g.imag
        # the power-derived amplitude scale is treated as a channel constant;
        # its own dependence on x is a second-order effect for small deltas
        return per_sample, grad


def _as_batch(x: np.ndarray, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1] != 2 or x.shape[2] != n:
        raise ShapeError(f"expected (B, 2, {n}) input, got {x.shape}")
    return x


# --- build / train / predict -------------------------------------------------


def build(
    preset: str,
    n: int,
    num_classes: int,
    seed: int = 0,
    pulse: Optional[PulseShape] = None,
    schemes: Optional[Sequence[ModScheme]] = None,
    snr_db: Optional[float] = None,
):
    """Construct a model with reproducible initialization from the seed."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    if preset in ("cnn_small", "resnet_lite"):
        layers = {"cnn_small": _cnn_small_layers, "resnet_lite": _resnet_lite_layers}[preset](
            n, num_classes
        )
        return NeuralModel(preset, n, num_classes, init_params(layers, seed))
    if preset == "hoc_logreg":
        if pulse is None:
            raise ConfigError("hoc_logreg requires a pulse shape")
        d = len(FEATURE_ORDERS)
        params = {
            "w": np.zeros((d, num_classes), dtype=np.float32),
            "b": np.zeros(num_classes, dtype=np.float32),
            "mu": np.zeros(d, dtype=np.float32),
            "sd": np.ones(d, dtype=np.float32),
        }
        return HocLogregModel(n, num_classes, pulse, params)
    # max_likelihood
    if schemes is None or pulse is None:
        raise ConfigError("max_likelihood requires scheme and pulse context")
    if len(schemes) != num_classes:
        raise ConfigError("scheme list must have one entry per class")
    return MLModel(n, schemes, pulse, snr_db)


def model_to_checkpoint(model, meta: Optional[dict] = None) -> Checkpoint:
    arch = {"preset": model.preset, "n": model.n, "num_classes": model.num_classes}
    if isinstance(model, NeuralModel):
        arch["input_scale"] = model.input_scale
    if isinstance(model, (HocLogregModel, MLModel)):
        arch["pulse"] = {
            "kind": model.pulse.kind,
            "sps": model.pulse.sps,
            "rolloff": model.pulse.rolloff,
            "span": model.pulse.span,
        }
    if isinstance(model, MLModel):
        arch["schemes"] = [s.name for s in model.schemes]
        arch["snr_db"] = model.snr_db
    params = {k: model.params[k] for k in sorted(model.params)}
    return Checkpoint(arch, params, meta or {})


def model_from_checkpoint(ckpt: Checkpoint):
    arch = ckpt.arch
    preset = arch["preset"]
    pulse = None
    if "pulse" in arch:
        p = arch["pulse"]
        pulse = PulseShape(p["kind"], p["sps"], p["rolloff"], p["span"])
    if preset in ("cnn_small", "resnet_lite"):
        return NeuralModel(
            preset, arch["n"], arch["num_classes"], dict(ckpt.params),
            input_scale=arch.get("input_scale", 1.0),
        )
    if preset == "hoc_logreg":
        return HocLogregModel(arch["n"], arch["num_classes"], pulse, dict(ckpt.params))
    if preset == "max_likelihood":
        schemes = [ModScheme.from_name(s) for s in arch["schemes"]]
        return MLModel(arch["n"], schemes, pulse, arch.get("snr_db"))
    raise ConfigError(f"unknown preset in checkpoint: {preset!r}")


@dataclass(frozen=True)
class TrainHyper:
    epochs: int = 8
    batch: int = 64
    lr: float = 1e-3
    seed: int = 0


def _dataset_arrays(ds: DatasetFile, split: str) -> Tuple[np.ndarray, np.ndarray]:
    recs = ds.split_records(split)
    x = np.stack([r.samples for r in recs]).astype(np.float32)
    y = np.array([r.label for r in recs], dtype=np.int64)
    return x, y


def accuracy(model, x: np.ndarray, y: np.ndarray, batch: int = 256, snr_db=None) -> float:
    correct = 0
    for i in range(0, len(x), batch):
        xb = x[i : i + batch].astype(np.float64)
        if isinstance(model, MLModel):
            logits = model.logits(xb, snr_db=snr_db)
        else:
            logits = model.logits(xb)
        correct += int((logits.argmax(axis=1) == y[i : i + batch]).sum())
    return correct / len(x)


def train(model, ds: DatasetFile, hyper: TrainHyper = TrainHyper()) -> Checkpoint:
    """Minimize cross-entropy with Adam; keep the best-validation parameters."""
    if isinstance(model, MLModel):
        raise ConfigError("max_likelihood has no trainable parameters")
    x_train, y_train = _dataset_arrays(ds, "train")
    x_val, y_val = _dataset_arrays(ds, "val")
    if isinstance(model, HocLogregModel):
        return _train_hoc(model, x_train, y_train, x_val, y_val, hyper)
    if model.input_scale == 1.0:
        mean_power = float(np.mean(x_train.astype(np.float64) ** 2))
        model.input_scale = 1.0 / np.sqrt(mean_power)
    rng = np.random.default_rng(hyper.seed)
    state = ad.AdamState(model.params)
    best = {k: v.copy() for k, v in model.params.items()}
    best_val = -1.0
    curve = []
    initial_loss, _ = model.loss_and_param_grads(
        x_train[: hyper.batch].astype(np.float64), y_train[: hyper.batch]
    )
    for epoch in range(hyper.epochs):
        order = rng.permutation(len(x_train))
        epoch_loss = 0.0
        for i in range(0, len(order), hyper.batch):
            idx = order[i : i + hyper.batch]
            loss, grads = model.loss_and_param_grads(x_train[idx].astype(np.float64), y_train[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"loss diverged at epoch {epoch}", epoch)
            ad.adam_step(model.params, grads, state, lr=hyper.lr)
            epoch_loss += loss * len(idx)
        val_acc = accuracy(model, x_val, y_val)
        curve.append({"epoch": epoch, "loss": epoch_loss / len(x_train), "val_acc": val_acc})
        if val_acc > best_val:
            best_val = val_acc
            best = {k: v.copy() for k, v in model.params.items()}
    model.params = best
    meta = {
        "seed": hyper.seed,
        "epochs": hyper.epochs,
        "val_accuracy": best_val,
        "initial_loss": float(initial_loss),
        "curve": curve,
    }
    return model_to_checkpoint(model, meta)


def _train_hoc(model: HocLogregModel, x_train, y_train, x_val, y_val, hyper: TrainHyper) -> Checkpoint:
    f_train = model.features(x_train.astype(np.float64))
    mu = f_train.mean(axis=0)
    sd = f_train.std(axis=0)
    sd[sd < 1e-12] = 1.0
    z = (f_train - mu) / sd
    c = model.num_classes
    w = np.zeros((z.shape[1], c))
    b = np.zeros(c)
    state_w = [np.zeros_like(w), np.zeros_like(w)]
    state_b = [np.zeros_like(b), np.zeros_like(b)]
    onehot = np.eye(c)[y_train]
    steps = max(300, hyper.epochs * 50)
    for t in range(1, steps + 1):
        logits = z @ w + b
        lsm = ad.log_softmax(logits)
        probs = np.exp(lsm)
        g = (probs - onehot) / len(z)
        gw = z.T @ g + model.L2 * w
        gb = g.sum(axis=0)
        for g_, p_, st in ((gw, w, state_w), (gb, b, state_b)):
            st[0][:] = 0.9 * st[0] + 0.1 * g_
            st[1][:] = 0.999 * st[1] + 0.001 * g_ * g_
            mhat = st[0] / (1 - 0.9**t)
            vhat = st[1] / (1 - 0.999**t)
            p_ -= 0.05 * mhat / (np.sqrt(vhat) + 1e-8)
    model.params = {
        "w": w.astype(np.float32),
        "b": b.astype(np.float32),
        "mu": mu.astype(np.float32),
        "sd": sd.astype(np.float32),
    }
    val_acc = accuracy(model, x_val, y_val)
    meta = {"seed": hyper.seed, "epochs": steps, "val_accuracy": val_acc, "curve": []}
    return model_to_checkpoint(model, meta)


def predict(model_or_ckpt, signal: IQSignal) -> Prediction:
    """Deterministic forward pass on one signal."""
    model = (
        model_from_checkpoint(model_or_ckpt)
        if isinstance(model_or_ckpt, Checkpoint)
        else model_or_ckpt
    )
    if isinstance(model, MLModel):
        logits = model.logits(signal.samples[None], snr_db=signal.snr_db)
    else:
        logits = model.logits(signal.samples[None])
    lsm = ad.log_softmax(logits)
    return Prediction(np.exp(lsm)[0], logits[0])


def ml_classify(
    signal: IQSignal, schemes: Sequence[ModScheme], snr_db: float, pulse: PulseShape
) -> Prediction:
    """Maximum-likelihood classification with known channel SNR."""
    model = MLModel(signal.n, schemes, pulse, snr_db)
    logits = model.logits(signal.samples[None])
    lsm = ad.log_softmax(logits)
    return Prediction(np.exp(lsm)[0], logits[0])


def input_gradient_loss(model_or_ckpt, x, labels, targeted: bool = False):
    """Loss and input gradient for attack crafting; errors on HOC models."""
    model = (
        model_from_checkpoint(model_or_ckpt)
        if isinstance(model_or_ckpt, Checkpoint)
        else model_or_ckpt
    )
    if not model.differentiable:
        raise UnsupportedAttackError(f"{model.preset} exposes no input gradient")
    return model.input_gradient_loss(x, labels, targeted=targeted)


def count_params(model) -> int:
    return int(sum(int(np.prod(v.shape)) for v in model.params.values()))
