"""Adversarial autoencoder that strips speaker, gender and language cues.

The encoder maps min-max normalised features to a latent code, the decoder
reconstructs the input from it, and three classifier heads try to recover
speaker, gender and language from the code.  Each head sits behind a
gradient-reversal layer, so a single optimizer step lowers the heads' own
cross-entropy while pushing the encoder the other way, scaled by ``alpha``:

    total = recon - alpha * (L_speaker + L_gender + L_language)

``alpha = 0`` leaves the encoder a plain autoencoder (the heads still train,
but only as observers).
"""

from __future__ import annotations

import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .corpus import GENDERS, Corpus, ScalerParams, apply_minmax, fit_minmax
from .tensor import RandomSource, derive_seed

HEADS = ("speaker", "gender", "language")

MAGIC = b"PEEC"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


class BadMagicError(ModelFormatError):
    pass


class VersionMismatchError(ModelFormatError):
    pass


class TruncatedFileError(ModelFormatError):
    def __init__(self, expected: int, actual: int, what: str = "model file"):
        self.expected, self.actual = expected, actual
        super().__init__(f"{what} truncated: expected at least {expected} bytes, got {actual}")


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    latent_dim: int = 512
    alpha: float = 1.0
    lr: float = 1e-5
    seed: int = 0
    optimizer: str = "adam"
    head_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    hidden: tuple[int, int] = (2000, 1000)
    head_hidden: int = 400
    dropout: float = 0.5
    dtype: str = "float64"  # arithmetic precision during training only

    def __post_init__(self):
        self.head_weights = tuple(float(w) for w in self.head_weights)
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.epochs < 0 or self.batch_size < 1 or self.latent_dim < 1:
            raise ValueError("TrainConfig: sizes must be positive")
        if not self.lr > 0:
            raise ValueError(f"TrainConfig: lr must be > 0, got {self.lr}")
        if self.alpha < 0:
            raise ValueError(f"TrainConfig: alpha must be >= 0, got {self.alpha}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"TrainConfig: unknown optimizer {self.optimizer!r}")
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"TrainConfig: dtype must be float64 or float32, got {self.dtype!r}")
        if len(self.head_weights) != 3 or len(self.hidden) != 2:
            raise ValueError("TrainConfig: need 3 head weights and 2 hidden sizes")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["head_weights"] = list(self.head_weights)
        d["hidden"] = list(self.hidden)
        return d


def desk_config(**overrides) -> TrainConfig:
    """Reduced architecture that trains on a laptop CPU in seconds.

    Keeps the layer structure, batch size and optimizer but narrows the
    hidden layers, lowers dropout, raises the learning rate and runs the
    arithmetic in float32.  Used by the synthetic experiments and demos.
    """
    base = dict(epochs=130, latent_dim=64, lr=5e-4, hidden=(256, 128), head_hidden=256,
                dropout=0.2, dtype="float32")
    base.update(overrides)
    return TrainConfig(**base)


@dataclass
class TrainHistory:
    epochs: list[dict] = field(default_factory=list)

    def __len__(self):
        return len(self.epochs)

    def column(self, key: str) -> list[float]:
        return [e[key] for e in self.epochs]


class PrivacyEncoderModel:
    def __init__(self, dim: int, latent_dim: int, n_speakers: int, n_languages: int,
                 alpha: float = 1.0, seed: int = 0, hidden=(2000, 1000), head_hidden: int = 400,
                 dropout: float = 0.5, vocab: dict | None = None, scaler: ScalerParams | None = None,
                 head_weights=(1.0, 1.0, 1.0)):
        if latent_dim < 1 or dim < latent_dim:
            raise ValueError(f"need dim >= latent_dim >= 1, got dim={dim}, latent_dim={latent_dim}")
        if n_speakers < 1 or n_languages < 1:
            raise ValueError("need at least one speaker and one language class")
        if alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {alpha}")
        self.dim, self.latent_dim = int(dim), int(latent_dim)
        self.hidden = tuple(int(h) for h in hidden)
        self.head_hidden = int(head_hidden)
        self.dropout = float(dropout)
        self.seed = int(seed)
        self.head_sizes = {"speaker": int(n_speakers), "gender": 2, "language": int(n_languages)}
        self.head_weights = dict(zip(HEADS, (float(w) for w in head_weights)))
        self.vocab = vocab or {
            "speaker": [f"spk{i}" for i in range(n_speakers)],
            "gender": list(GENDERS),
            "language": [f"lang{i}" for i in range(n_languages)],
        }
        self.scaler = scaler or ScalerParams.identity(dim)

        rs = RandomSource(seed)
        h1, h2 = self.hidden
        self.encoder = nn.mlp([dim, h1, h2, latent_dim], rs, dropout)
        self.decoder = nn.mlp([latent_dim, h2, h1, dim], rs, dropout)
        self.grl = {h: nn.GradReversal(alpha) for h in HEADS}
        self.heads = {
            h: nn.mlp([latent_dim, head_hidden, head_hidden, self.head_sizes[h]], rs, dropout, dropout_after=1)
            for h in HEADS
        }
        self.dropout_rs = RandomSource(derive_seed(seed, 1))
        self._set_dropout_source(self.dropout_rs)

    # -- structure ---------------------------------------------------------

    @property
    def alpha(self) -> float:
        return self.grl["speaker"].alpha

    @alpha.setter
    def alpha(self, value: float):
        if value < 0:
            raise ValueError(f"alpha must be >= 0, got {value}")
        for g in self.grl.values():
            g.alpha = float(value)

    def _set_dropout_source(self, rs: RandomSource):
        self.dropout_rs = rs
        for net in self.networks():
            for layer in net.layers:
                if isinstance(layer, nn.Dropout):
                    layer.rs = rs

    def astype(self, dtype) -> None:
        for net in self.networks():
            for layer in net.dense_layers():
                layer.astype(dtype)

    def networks(self) -> list[nn.Sequential]:
        return [self.encoder, self.decoder] + [self.heads[h] for h in HEADS]

    def parameters(self) -> list[np.ndarray]:
        return [p for net in self.networks() for p in net.params]

    def gradients(self) -> list[np.ndarray]:
        return [g for net in self.networks() for g in net.grads]

    def zero_grad(self):
        for net in self.networks():
            net.zero_grad()

    def param_groups(self) -> list[str]:
        """Owner name ('encoder', 'decoder', or a head) of each parameter."""
        names = ["encoder", "decoder"] + list(HEADS)
        return [n for n, net in zip(names, self.networks()) for _ in net.params]

    # -- forward / backward ------------------------------------------------

    def _check_width(self, X):
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"expected input width {self.dim}, got shape {X.shape}")

    def forward_backward(self, X: np.ndarray, labels: dict, train: bool = False,
                         backward: bool = True) -> tuple[float, dict]:
        """Composite objective on one batch; accumulates gradients when asked.

        Returns the scalar ``recon - alpha * sum(w_h * L_h)`` and a breakdown
        with each term plus per-head accuracy.
        """
        self._check_width(X)
        missing = [h for h in HEADS if labels.get(h) is None]
        if missing:
            raise ValueError(f"batch is missing labels for {missing}")
        if backward:
            self.zero_grad()
        z = self.encoder.forward(X, train)
        x_hat = self.decoder.forward(z, train)
        recon, g_rec = nn.mse_loss(X, x_hat)
        terms = {"recon": recon}
        dz = self.decoder.backward(g_rec) if backward else None
        adv = 0.0
        for h in HEADS:
            w = self.head_weights[h]
            logits = self.heads[h].forward(self.grl[h].forward(z, train), train)
            y = np.asarray(labels[h], dtype=np.intp)
            value, g = nn.softmax_xent(logits, y)
            terms[h] = value
            terms[f"{h}_acc"] = float(np.mean(np.argmax(logits, axis=1) == y))
            adv += w * value
            if backward:
                dz = dz + self.grl[h].backward(self.heads[h].backward(w * g))
        if backward:
            self.encoder.backward(dz)
        total = recon - self.alpha * adv
        terms["total"] = total
        return total, terms

    def encode(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        self._check_width(X)
        return self.encoder.forward(X, train=False)

    def reconstruct(self, X: np.ndarray) -> np.ndarray:
        return self.decoder.forward(self.encode(X), train=False)

    def encode_raw(self, features: np.ndarray) -> np.ndarray:
        """Scale raw features with the stored scaler, then encode."""
        return self.encode(apply_minmax(self.scaler, np.atleast_2d(features)))

    # -- grad_check interface ---------------------------------------------

    def loss(self, batch) -> float:
        X, labels = batch
        return self.forward_backward(X, labels, backward=False)[0]

    def loss_and_grads(self, batch):
        X, labels = batch
        value, _ = self.forward_backward(X, labels)
        return value, [g.copy() for g in self.gradients()]

    def check_objective(self, batch, index: int) -> float:
        """Heads follow their own weighted loss; shared layers follow the total."""
        X, labels = batch
        _, terms = self.forward_backward(X, labels, backward=False)
        owner = self.param_groups()[index]
        if owner in HEADS:
            return self.head_weights[owner] * terms[owner]
        return terms["total"]


def build(D: int, L: int, n_speakers: int, n_languages: int, alpha: float = 1.0, seed: int = 0,
          **arch) -> PrivacyEncoderModel:
    return PrivacyEncoderModel(D, L, n_speakers, n_languages, alpha=alpha, seed=seed, **arch)


def composite_loss(model: PrivacyEncoderModel, batch) -> tuple[float, dict]:
    X, labels = batch
    return model.forward_backward(X, labels, train=False)


def train(model: PrivacyEncoderModel, X: np.ndarray, labels: dict, config: TrainConfig):
    """Shuffled mini-batch training; one optimizer step per batch over all parameters.

    ``X`` must already be normalised with ``model.scaler``; ``labels`` maps each
    head name to class indices in the model's vocabulary.  With
    ``config.dtype == "float32"`` the arithmetic runs in single precision and
    the parameters are widened back to float64 afterwards.
    """
    X = np.asarray(X, dtype=np.float64)
    model._check_width(X)
    for h in HEADS:
        y = np.asarray(labels[h])
        if y.shape != (X.shape[0],):
            raise ValueError(f"{h} labels have shape {y.shape}, expected ({X.shape[0]},)")
    history = TrainHistory()
    if config.epochs == 0:
        return model, history

    if config.dtype == "float64":
        _run_epochs(model, X, _label_arrays(labels), config, history)
        return model, history
    model.astype(np.float32)
    try:
        _run_epochs(model, X.astype(np.float32), _label_arrays(labels), config, history)
    finally:
        model.astype(np.float64)
    return model, history


def _label_arrays(labels: dict) -> dict:
    return {h: np.asarray(labels[h], dtype=np.intp) for h in HEADS}


def _run_epochs(model, X, label_arrays, config, history):
    shuffle_rs = RandomSource(derive_seed(config.seed, 2))
    model._set_dropout_source(RandomSource(derive_seed(config.seed, 3)))
    params = model.parameters()
    adam = nn.Adam(params, lr=config.lr) if config.optimizer == "adam" else None
    n = X.shape[0]
    for epoch in range(config.epochs):
        order = shuffle_rs.permutation(n)
        sums = {}
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            _, terms = model.forward_backward(X[idx], {h: y[idx] for h, y in label_arrays.items()}, train=True)
            grads = model.gradients()
            if adam is not None:
                adam.step(params, grads)
            else:
                nn.step_sgd(params, grads, config.lr)
            for k, v in terms.items():
                sums[k] = sums.get(k, 0.0) + v * len(idx)
        entry = {k: v / n for k, v in sums.items()}
        if not np.isfinite(entry["total"]):
            raise FloatingPointError(f"non-finite loss at epoch {epoch + 1}")
        entry["epoch"] = epoch + 1
        history.epochs.append(entry)


def train_encoder(Xn: np.ndarray, sub: Corpus, config: TrainConfig, scaler: ScalerParams,
                  languages: list[str] | None = None):
    """Build and train a model on rows already normalised with ``scaler``.

    The speaker head covers only the speakers present in ``sub``.
    """
    vocab = {"speaker": sub.speakers, "gender": list(GENDERS), "language": languages or sub.languages}
    model = build(sub.dim, config.latent_dim, len(vocab["speaker"]), len(vocab["language"]),
                  alpha=config.alpha, seed=config.seed, hidden=config.hidden,
                  head_hidden=config.head_hidden, dropout=config.dropout, vocab=vocab,
                  head_weights=config.head_weights)
    model.scaler = scaler
    labels = {h: sub.label_indices(h, vocab[h]) for h in HEADS}
    return train(model, Xn, labels, config)


def fit_encoder(corpus: Corpus, rows, config: TrainConfig):
    """Fit the scaler on ``rows``, build a model for their vocabularies, train it."""
    sub = corpus.subset(rows)
    scaler = fit_minmax(sub)
    return train_encoder(apply_minmax(scaler, sub.X), sub, config, scaler, corpus.languages)


# -- persistence -----------------------------------------------------------
#
# Layout (all little-endian):
#   b"PEEC" | u8 version
#   u32 D, L, hidden1, hidden2, head_hidden, K_speaker, K_gender, K_language
#   u64 seed | f64 dropout | f64 alpha | 3 x f64 head weights
#   f64[D] scaler min | f64[D] scaler max
#   every parameter in model.parameters() order, row-major f64
#   vocabularies: for speaker, gender, language: u32 count, then per entry
#                 u16 byte length + UTF-8 bytes

_HEADER = struct.Struct("<4sB8IQd d3d".replace(" ", ""))


def _param_shapes(D, L, h1, h2, hh, ks, kg, kl):
    def dense(i, o):
        return [(o, i), (o,)]
    shapes = []
    for a, b in [(D, h1), (h1, h2), (h2, L)]:
        shapes += dense(a, b)
    for a, b in [(L, h2), (h2, h1), (h1, D)]:
        shapes += dense(a, b)
    for k in (ks, kg, kl):
        for a, b in [(L, hh), (hh, hh), (hh, k)]:
            shapes += dense(a, b)
    return shapes


def to_bytes(model: PrivacyEncoderModel) -> bytes:
    h1, h2 = model.hidden
    hs = model.head_sizes
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, model.dim, model.latent_dim, h1, h2, model.head_hidden,
                          hs["speaker"], hs["gender"], hs["language"], model.seed, model.dropout,
                          model.alpha, *(model.head_weights[h] for h in HEADS))]
    parts.append(model.scaler.min.astype("<f8").tobytes())
    parts.append(model.scaler.max.astype("<f8").tobytes())
    for p in model.parameters():
        parts.append(np.ascontiguousarray(p, dtype="<f8").tobytes())
    for h in HEADS:
        words = model.vocab[h]
        parts.append(struct.pack("<I", len(words)))
        for w in words:
            b = w.encode("utf-8")
            parts.append(struct.pack("<H", len(b)) + b)
    return b"".join(parts)


def from_bytes(data: bytes) -> PrivacyEncoderModel:
    if len(data) < 5:
        if data[:len(data)] != MAGIC[:len(data)]:
            raise BadMagicError("not a model file (bad magic)")
        raise TruncatedFileError(_HEADER.size, len(data))
    if data[:4] != MAGIC:
        raise BadMagicError(f"not a model file (bad magic {data[:4]!r})")
    if data[4] != FORMAT_VERSION:
        raise VersionMismatchError(f"model format version {data[4]}, expected {FORMAT_VERSION}")
    if len(data) < _HEADER.size:
        raise TruncatedFileError(_HEADER.size, len(data))
    (_, _, D, L, h1, h2, hh, ks, kg, kl, seed, dropout, alpha, *weights) = _HEADER.unpack_from(data)
    shapes = _param_shapes(D, L, h1, h2, hh, ks, kg, kl)
    body = 2 * D + sum(int(np.prod(s)) for s in shapes)
    expected = _HEADER.size + 8 * body
    if len(data) < expected:
        raise TruncatedFileError(expected, len(data))

    off = _HEADER.size
    arr = np.frombuffer(data, dtype="<f8", count=body, offset=off).astype(np.float64)
    off = expected
    vocab = {}
    for h in HEADS:
        if len(data) < off + 4:
            raise TruncatedFileError(off + 4, len(data))
        (count,) = struct.unpack_from("<I", data, off)
        off += 4
        words = []
        for _ in range(count):
            if len(data) < off + 2:
                raise TruncatedFileError(off + 2, len(data))
            (nb,) = struct.unpack_from("<H", data, off)
            if len(data) < off + 2 + nb:
                raise TruncatedFileError(off + 2 + nb, len(data))
            words.append(data[off + 2:off + 2 + nb].decode("utf-8"))
            off += 2 + nb
        vocab[h] = words
    if off != len(data):
        raise ModelFormatError(f"{len(data) - off} trailing bytes after model data")

    model = PrivacyEncoderModel(D, L, ks, kl, alpha=alpha, seed=seed, hidden=(h1, h2), head_hidden=hh,
                                dropout=dropout, vocab=vocab, head_weights=weights)
    if kg != 2:
        raise ModelFormatError(f"gender head must have 2 classes, file says {kg}")
    model.scaler = ScalerParams(arr[:D].copy(), arr[D:2 * D].copy())
    pos = 2 * D
    for p, shape in zip(model.parameters(), shapes):
        n = int(np.prod(shape))
        p[...] = arr[pos:pos + n].reshape(shape)
        pos += n
    return model


def save(model: PrivacyEncoderModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_bytes(model))


def load(path) -> PrivacyEncoderModel:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())


def latent_sweep(corpus: Corpus, dims_list, config: TrainConfig, eval_config=None,
                 emotion: bool = True) -> list[dict]:
    """Train and evaluate one model per latent size; rows are CSV-ready dicts."""
    from .evaluate import EvalConfig, privacy_eval

    dims_list = list(dims_list)
    if not dims_list:
        raise ValueError("latent_sweep: empty dims_list")
    eval_config = eval_config or EvalConfig()
    rows = []
    for L in dims_list:
        cfg = TrainConfig(**{**config.to_dict(), "latent_dim": int(L)})
        res = privacy_eval(corpus, "proposed", cfg, eval_config, emotion=emotion)
        rows.append({"latent_dim": int(L), **res})
    return rows


def gradcheck_suite(seed: int = 0, input_dim: int = 20, epsilon: float = 1e-5) -> list[tuple[str, float]]:
    """Finite-difference check of small random networks; returns (case, max relative error).

    Covers dense, leaky-ReLU and gradient-reversal layers under both losses,
    plus a tiny adversarial autoencoder with all three heads.
    """
    rs = RandomSource(derive_seed(seed, 17))
    n = 6
    x = rs.normal((n, input_dim))
    classes = (rs.uniform(n) * 3).astype(np.intp)
    cases = []

    mse_net = nn.SupervisedStack(nn.mlp([input_dim, 12, 8, input_dim], rs, dropout=0.0), "mse")
    cases.append(("dense+leaky/mse", mse_net, (x, x + 0.1 * rs.normal((n, input_dim)))))
    xent_net = nn.SupervisedStack(nn.mlp([input_dim, 10, 3], rs, dropout=0.0), "xent")
    cases.append(("dense+leaky/xent", xent_net, (x, classes)))
    grl = nn.Sequential([nn.Dense(input_dim, 9, rs), nn.LeakyReLU(), nn.GradReversal(0.7),
                         nn.Dense(9, 7, rs), nn.LeakyReLU(), nn.Dense(7, 3, rs)])
    cases.append(("dense+leaky+grl/xent", nn.SupervisedStack(grl, "xent"), (x, classes)))

    model = build(input_dim, 4, 3, 2, alpha=0.8, seed=derive_seed(seed, 18), hidden=(10, 8),
                  head_hidden=6, dropout=0.0)
    labels = {"speaker": classes, "gender": classes % 2, "language": (classes + 1) % 2}
    cases.append(("adversarial autoencoder", model, (rs.uniform((n, input_dim)), labels)))
    return [(name, float(nn.grad_check(net, batch, epsilon))) for name, net, batch in cases]

