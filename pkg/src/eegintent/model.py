"""Soft multitask decoder: shared encoder, band-suppressed class branch,
domain branch, and RBF-MMD alignment, trained by plain mini-batch gradient
descent with hand-derived gradients.

The encoder is one trunk applied to two views of each trial: the class
branch sees the feature vector with delta/alpha/gamma bins attenuated by a
fixed gain, the domain branch sees it unmasked. The MMD penalty pulls the
domain-branch embeddings of correct and misarticulated trials together.
Total loss: l_class + lambda1 * l_domain + lambda2 * l_mmd.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateEmbeddings,
    EmptyGroup,
    IoFailure,
    MalformedManifest,
    MissingFile,
    NonFiniteLoss,
    ShapeMismatch,
)
from .spectral import BandTable

MODEL_FORMAT = "eegintent-model-v1"

SUPPRESSED_BANDS = ("delta", "alpha", "gamma")


class TrainMode(Enum):
    BASELINE = "baseline"
    MULTITASK = "multitask"


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and training hyperparameters.

    mmd_bandwidth None means the per-batch median heuristic; a float fixes
    the RBF bandwidth.
    """

    n_channels: int
    bin_freqs_hz: tuple[float, ...]
    encoder_dims: tuple[int, ...] = (256, 64)
    class_head_dims: tuple[int, ...] = (32, 4)
    domain_head_dims: tuple[int, ...] = (32, 2)
    gamma_sup: float = 0.2
    lambda1: float = 0.3
    lambda2: float = 0.3
    mmd_bandwidth: float | None = 1.0
    learning_rate: float = 0.05
    epochs: int = 300
    batch_size: int = 16
    weight_init_scale: float = 0.3
    seed: int = 0
    bands: BandTable = field(default_factory=BandTable)

    def __post_init__(self):
        object.__setattr__(self, "bin_freqs_hz", tuple(float(f) for f in self.bin_freqs_hz))
        object.__setattr__(self, "encoder_dims", tuple(self.encoder_dims))
        object.__setattr__(self, "class_head_dims", tuple(self.class_head_dims))
        object.__setattr__(self, "domain_head_dims", tuple(self.domain_head_dims))
        if self.n_channels < 1 or not self.bin_freqs_hz:
            raise ValueError("need at least one channel and one frequency bin")
        if not self.encoder_dims:
            raise ValueError("encoder needs at least one layer")
        if self.class_head_dims[-1] != 4:
            raise ValueError("class head must end with 4 outputs")
        if self.domain_head_dims[-1] != 2:
            raise ValueError("domain head must end with 2 outputs")
        if not 0.0 <= self.gamma_sup <= 1.0:
            raise ValueError("gamma_sup must be in [0, 1]")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("loss weights must be non-negative")
        if self.mmd_bandwidth is not None and self.mmd_bandwidth <= 0:
            raise ValueError("fixed mmd_bandwidth must be positive")

    @property
    def input_dim(self) -> int:
        return self.n_channels * len(self.bin_freqs_hz)

    def to_dict(self) -> dict:
        return {
            "n_channels": self.n_channels,
            "bin_freqs_hz": list(self.bin_freqs_hz),
            "encoder_dims": list(self.encoder_dims),
            "class_head_dims": list(self.class_head_dims),
            "domain_head_dims": list(self.domain_head_dims),
            "gamma_sup": self.gamma_sup,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "mmd_bandwidth": self.mmd_bandwidth,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "weight_init_scale": self.weight_init_scale,
            "seed": self.seed,
            "bands": self.bands.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        kwargs = dict(d)
        if "bands" in kwargs:
            kwargs["bands"] = BandTable.from_dict(kwargs["bands"])
        return cls(**kwargs)


@dataclass(frozen=True)
class FeatureScaler:
    """Per-bin standardization fitted on the training split.

    Log-PSD features share a large constant offset across trials; plain
    fixed-rate gradient descent stalls (or kills the ReLU trunk) on raw
    features, so the pipeline z-scores them before the decoder sees them.
    """

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x) -> "FeatureScaler":
        x = np.asarray(x, dtype=np.float64)
        return cls(x.mean(axis=0), np.maximum(x.std(axis=0), 1e-6))

    def transform(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureScaler":
        return cls(np.asarray(d["mean"], dtype=np.float64),
                   np.asarray(d["std"], dtype=np.float64))


def band_mask_bins(bin_freqs, bands: BandTable, gamma_sup: float) -> np.ndarray:
    """Length-F mask: gamma_sup on delta/alpha/gamma bins, 1.0 elsewhere."""
    freqs = np.asarray(bin_freqs, dtype=np.float64)
    mask = np.ones(len(freqs))
    for name in SUPPRESSED_BANDS:
        band = bands.get(name)
        mask[band.contains(freqs)] = gamma_sup
    return mask


def input_mask(config: ModelConfig) -> np.ndarray:
    """The bin mask broadcast over channels, length C*F."""
    return np.tile(
        band_mask_bins(config.bin_freqs_hz, config.bands, config.gamma_sup),
        config.n_channels,
    )


@dataclass
class Layer:
    w: np.ndarray
    b: np.ndarray


@dataclass
class ModelParams:
    """Weights of the shared encoder and both heads, plus the fixed mask."""

    encoder: list[Layer]
    class_head: list[Layer]
    domain_head: list[Layer]
    mask: np.ndarray

    def all_layers(self) -> list[Layer]:
        return [*self.encoder, *self.class_head, *self.domain_head]

    def copy(self) -> "ModelParams":
        return ModelParams(
            [Layer(l.w.copy(), l.b.copy()) for l in self.encoder],
            [Layer(l.w.copy(), l.b.copy()) for l in self.class_head],
            [Layer(l.w.copy(), l.b.copy()) for l in self.domain_head],
            self.mask.copy(),
        )


def _init_stack(rng, dims, scale) -> list[Layer]:
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = rng.normal(0.0, scale / np.sqrt(fan_in), size=(fan_in, fan_out))
        layers.append(Layer(w, np.zeros(fan_out)))
    return layers


def init_params(config: ModelConfig) -> ModelParams:
    """Fan-in-scaled Gaussian weights, zero biases, deterministic in seed."""
    rng = np.random.default_rng(config.seed)
    enc_dims = (config.input_dim, *config.encoder_dims)
    emb = config.encoder_dims[-1]
    scale = config.weight_init_scale
    return ModelParams(
        _init_stack(rng, enc_dims, scale),
        _init_stack(rng, (emb, *config.class_head_dims), scale),
        _init_stack(rng, (emb, *config.domain_head_dims), scale),
        input_mask(config),
    )


# --- forward / loss ------------------------------------------------------

def _stack_forward(layers: list[Layer], x: np.ndarray, relu_last: bool):
    acts = [x]
    pre = []
    h = x
    for i, layer in enumerate(layers):
        z = h @ layer.w + layer.b
        pre.append(z)
        h = np.maximum(z, 0.0) if (relu_last or i < len(layers) - 1) else z
        acts.append(h)
    return h, (acts, pre)


def _stack_backward(layers, cache, d_out, relu_last: bool):
    acts, pre = cache
    grads = [None] * len(layers)
    d = d_out
    for i in reversed(range(len(layers))):
        if relu_last or i < len(layers) - 1:
            d = d * (pre[i] > 0)
        grads[i] = Layer(acts[i].T @ d, d.sum(axis=0))
        d = d @ layers[i].w.T
    return grads, d


def _check_features(params: ModelParams, x: np.ndarray) -> None:
    expected = params.encoder[0].w.shape[0]
    if x.ndim != 2 or x.shape[1] != expected:
        raise ShapeMismatch(
            f"feature dim {x.shape[-1]} does not match model input dim {expected}"
        )


def forward(params: ModelParams, x):
    """(class_logits, domain_logits, embedding_class, embedding_domain).

    The class branch runs the shared encoder on the mask-scaled features,
    the domain branch on the raw features.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    xb = x[None, :] if squeeze else x
    _check_features(params, xb)
    emb_class, _ = _stack_forward(params.encoder, xb * params.mask, relu_last=True)
    emb_domain, _ = _stack_forward(params.encoder, xb, relu_last=True)
    class_logits, _ = _stack_forward(params.class_head, emb_class, relu_last=False)
    domain_logits, _ = _stack_forward(params.domain_head, emb_domain, relu_last=False)
    if squeeze:
        return class_logits[0], domain_logits[0], emb_class[0], emb_domain[0]
    return class_logits, domain_logits, emb_class, emb_domain


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood of integer labels under softmax logits."""
    logp = _log_softmax(np.asarray(logits, dtype=np.float64))
    return float(-logp[np.arange(len(labels)), np.asarray(labels)].mean())


def _rbf_kernel(a: np.ndarray, b: np.ndarray, sigma: float) -> np.ndarray:
    sq = (
        (a**2).sum(axis=1)[:, None]
        + (b**2).sum(axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.exp(-np.maximum(sq, 0.0) / (2.0 * sigma**2))


def mmd_rbf(x, y, bandwidth: float) -> float:
    """Biased (V-statistic) squared MMD with an RBF kernel."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if len(x) == 0 or len(y) == 0:
        raise EmptyGroup("MMD needs at least one vector per group")
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    kxx = _rbf_kernel(x, x, bandwidth)
    kyy = _rbf_kernel(y, y, bandwidth)
    kxy = _rbf_kernel(x, y, bandwidth)
    return float(kxx.mean() + kyy.mean() - 2.0 * kxy.mean())


def median_heuristic(embeddings) -> float:
    """sigma with sigma^2 = median pairwise squared distance / 2."""
    e = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    n = len(e)
    if n < 2:
        raise DegenerateEmbeddings(f"need at least 2 embeddings, got {n}")
    sq = (e**2).sum(axis=1)[:, None] + (e**2).sum(axis=1)[None, :] - 2.0 * (e @ e.T)
    iu = np.triu_indices(n, k=1)
    med = float(np.median(np.maximum(sq[iu], 0.0)))
    if med <= 0.0:
        raise DegenerateEmbeddings("median pairwise distance is zero")
    return float(np.sqrt(med / 2.0))


@dataclass(frozen=True)
class LossBreakdown:
    l_class: float
    l_domain: float
    l_mmd: float
    l_total: float
    single_domain: bool = False


def _mmd_embedding_grads(x, y, sigma):
    n, m = len(x), len(y)
    kxx = _rbf_kernel(x, x, sigma)
    kyy = _rbf_kernel(y, y, sigma)
    kxy = _rbf_kernel(x, y, sigma)
    inv = 1.0 / sigma**2
    dx = (2.0 * inv / n**2) * (kxx @ x - kxx.sum(axis=1)[:, None] * x) - (
        2.0 * inv / (n * m)
    ) * (kxy @ y - kxy.sum(axis=1)[:, None] * x)
    dy = (2.0 * inv / m**2) * (kyy @ y - kyy.sum(axis=1)[:, None] * y) - (
        2.0 * inv / (n * m)
    ) * (kxy.T @ x - kxy.sum(axis=0)[:, None] * y)
    return dx, dy


def _mmd_sigma(config: ModelConfig, embeddings: np.ndarray) -> float | None:
    """Bandwidth for this batch; None signals a degenerate embedding cloud
    (all points identical), where the MMD is exactly zero anyway."""
    if config.mmd_bandwidth is not None:
        return float(config.mmd_bandwidth)
    try:
        return median_heuristic(embeddings)
    except DegenerateEmbeddings:
        return None


def _loss_and_grads(params, x, y_class, y_domain, config, want_grads: bool):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatch(f"expected a [batch x features] matrix, got {x.shape}")
    _check_features(params, x)
    y_class = np.asarray(y_class, dtype=np.int64)
    y_domain = np.asarray(y_domain, dtype=np.int64)
    n = len(x)

    emb_class, cache_cls_view = _stack_forward(params.encoder, x * params.mask, True)
    emb_domain, cache_dom_view = _stack_forward(params.encoder, x, True)
    class_logits, cache_cls_head = _stack_forward(params.class_head, emb_class, False)
    domain_logits, cache_dom_head = _stack_forward(params.domain_head, emb_domain, False)

    l_class = softmax_cross_entropy(class_logits, y_class)
    l_domain = softmax_cross_entropy(domain_logits, y_domain)

    idx_correct = np.flatnonzero(y_domain == 0)
    idx_mis = np.flatnonzero(y_domain == 1)
    single_domain = len(idx_correct) == 0 or len(idx_mis) == 0
    sigma = None
    if not single_domain:
        sigma = _mmd_sigma(config, emb_domain)
    l_mmd = (
        mmd_rbf(emb_domain[idx_correct], emb_domain[idx_mis], sigma)
        if sigma is not None
        else 0.0
    )
    loss = LossBreakdown(
        l_class,
        l_domain,
        l_mmd,
        l_class + config.lambda1 * l_domain + config.lambda2 * l_mmd,
        single_domain,
    )
    if not want_grads:
        return None, loss

    # class path
    probs = np.exp(_log_softmax(class_logits))
    probs[np.arange(n), y_class] -= 1.0
    d_class_logits = probs / n
    cls_head_grads, d_emb_class = _stack_backward(
        params.class_head, cache_cls_head, d_class_logits, False
    )
    enc_grads_masked, _ = _stack_backward(
        params.encoder, cache_cls_view, d_emb_class, True
    )

    # domain path: weighted cross-entropy plus the MMD alignment term
    probs_d = np.exp(_log_softmax(domain_logits))
    probs_d[np.arange(n), y_domain] -= 1.0
    d_domain_logits = config.lambda1 * probs_d / n
    dom_head_grads, d_emb_domain = _stack_backward(
        params.domain_head, cache_dom_head, d_domain_logits, False
    )
    if config.lambda2 != 0.0 and sigma is not None and not single_domain:
        dx, dy = _mmd_embedding_grads(
            emb_domain[idx_correct], emb_domain[idx_mis], sigma
        )
        d_emb_domain = d_emb_domain.copy()
        d_emb_domain[idx_correct] += config.lambda2 * dx
        d_emb_domain[idx_mis] += config.lambda2 * dy
    enc_grads_raw, _ = _stack_backward(
        params.encoder, cache_dom_view, d_emb_domain, True
    )

    encoder_grads = [
        Layer(a.w + b.w, a.b + b.b) for a, b in zip(enc_grads_masked, enc_grads_raw)
    ]
    grads = ModelParams(encoder_grads, cls_head_grads, dom_head_grads, params.mask)
    return grads, loss


def compute_loss(params, x, y_class, y_domain, config: ModelConfig) -> LossBreakdown:
    """Eq.-style loss split; l_mmd is 0 (and flagged) for single-domain batches."""
    _, loss = _loss_and_grads(params, x, y_class, y_domain, config, want_grads=False)
    return loss


def backward(params, x, y_class, y_domain, config: ModelConfig) -> ModelParams:
    """Analytic gradient of the total loss for every weight and bias."""
    grads, _ = _loss_and_grads(params, x, y_class, y_domain, config, want_grads=True)
    return grads


def effective_config(config: ModelConfig, mode: TrainMode) -> ModelConfig:
    """Baseline mode disables the mask and both auxiliary losses."""
    if mode is TrainMode.BASELINE:
        return replace(config, gamma_sup=1.0, lambda1=0.0, lambda2=0.0)
    return config


def train(
    x,
    y_class,
    y_domain,
    config: ModelConfig,
    mode: TrainMode = TrainMode.MULTITASK,
) -> tuple[ModelParams, list[LossBreakdown]]:
    """Mini-batch gradient descent, deterministic in config.seed.

    Returns the trained parameters and one aggregated LossBreakdown per
    epoch. Raises NonFiniteLoss (with the epoch index) on divergence.
    """
    cfg = effective_config(config, mode)
    x = np.asarray(x, dtype=np.float64)
    y_class = np.asarray(y_class, dtype=np.int64)
    y_domain = np.asarray(y_domain, dtype=np.int64)
    n = len(x)
    if n == 0:
        raise ValueError("cannot train on an empty set")
    params = init_params(cfg)
    shuffle_rng = np.random.default_rng([cfg.seed, 0x5EED])
    history: list[LossBreakdown] = []
    # divergence surfaces as NonFiniteLoss, not as overflow warning spam
    with np.errstate(over="ignore", invalid="ignore"):
        _train_loop(params, x, y_class, y_domain, cfg, shuffle_rng, history)
    return params, history


def _train_loop(params, x, y_class, y_domain, cfg, shuffle_rng, history):
    n = len(x)
    for epoch in range(cfg.epochs):
        perm = shuffle_rng.permutation(n)
        sums = np.zeros(3)
        count = 0
        any_single = False
        for start in range(0, n, cfg.batch_size):
            batch = perm[start : start + cfg.batch_size]
            grads, loss = _loss_and_grads(
                params, x[batch], y_class[batch], y_domain[batch], cfg, True
            )
            if not np.isfinite(loss.l_total):
                raise NonFiniteLoss(epoch)
            lr = cfg.learning_rate
            for layer, grad in zip(params.all_layers(), grads.all_layers()):
                layer.w -= lr * grad.w
                layer.b -= lr * grad.b
            sums += np.array([loss.l_class, loss.l_domain, loss.l_mmd]) * len(batch)
            count += len(batch)
            any_single = any_single or loss.single_domain
        l_class, l_domain, l_mmd = sums / count
        history.append(
            LossBreakdown(
                float(l_class),
                float(l_domain),
                float(l_mmd),
                float(l_class + cfg.lambda1 * l_domain + cfg.lambda2 * l_mmd),
                any_single,
            )
        )


# --- model file ----------------------------------------------------------

def save_model(
    params: ModelParams,
    config: ModelConfig,
    path,
    mode: TrainMode = TrainMode.MULTITASK,
    config_hash: str | None = None,
    scaler: FeatureScaler | None = None,
) -> None:
    """One JSON header line (config + shapes + scaler), then float32 weights."""
    chunks = []
    shapes = []
    for layer in params.all_layers():
        shapes.append([list(layer.w.shape), list(layer.b.shape)])
        chunks.append(np.ascontiguousarray(layer.w, dtype="<f4").tobytes())
        chunks.append(np.ascontiguousarray(layer.b, dtype="<f4").tobytes())
    header = {
        "format": MODEL_FORMAT,
        "config_hash": config_hash,
        "mode": mode.value,
        "config": config.to_dict(),
        "feature_scaling": scaler.to_dict() if scaler is not None else None,
        "layer_shapes": shapes,
    }
    try:
        with open(path, "wb") as fh:
            fh.write(json.dumps(header, separators=(",", ":")).encode("utf-8"))
            fh.write(b"\n")
            for chunk in chunks:
                fh.write(chunk)
    except OSError as exc:
        raise IoFailure(f"cannot write model to {path}: {exc}") from exc


def load_model(path) -> tuple[ModelParams, ModelConfig, TrainMode, FeatureScaler | None]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no model file at {path}")
    raw = path.read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise MalformedManifest(f"{path}: missing header line")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedManifest(f"{path}: {exc}") from exc
    if header.get("format") != MODEL_FORMAT:
        raise MalformedManifest(
            f"{path}: expected format {MODEL_FORMAT!r}, got {header.get('format')!r}"
        )
    try:
        config = ModelConfig.from_dict(header["config"])
        mode = TrainMode(header["mode"])
        shapes = header["layer_shapes"]
        scaling = header.get("feature_scaling")
        scaler = FeatureScaler.from_dict(scaling) if scaling is not None else None
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedManifest(f"{path}: {exc}") from exc

    blob = raw[newline + 1 :]
    arrays = []
    offset = 0
    for w_shape, b_shape in shapes:
        for shape in (w_shape, b_shape):
            size = int(np.prod(shape)) if shape else 1
            nbytes = 4 * size
            if offset + nbytes > len(blob):
                raise MalformedManifest(f"{path}: weight blob truncated")
            arrays.append(
                np.frombuffer(blob, dtype="<f4", count=size, offset=offset)
                .astype(np.float64)
                .reshape(shape)
            )
            offset += nbytes
    if offset != len(blob):
        raise MalformedManifest(f"{path}: {len(blob) - offset} trailing bytes in blob")

    cfg = effective_config(config, mode)
    layers = [Layer(arrays[i], arrays[i + 1]) for i in range(0, len(arrays), 2)]
    n_enc = len(cfg.encoder_dims)
    n_cls = len(cfg.class_head_dims)
    params = ModelParams(
        layers[:n_enc],
        layers[n_enc : n_enc + n_cls],
        layers[n_enc + n_cls :],
        input_mask(cfg),
    )
    return params, config, mode, scaler
