"""Utility and privacy measurement.

Emotion utility is the unweighted average recall of an RBF SVM (trained by
SMO) on valence under leave-one-speaker-out cross-validation.  Privacy is
measured by attackers that see only the representation: small networks that
predict gender and language, and a membership attacker that tells apart
speakers the encoder was trained on from speakers it never saw.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .baselines import pca_fit, pca_transform
from .corpus import Corpus, ScalerParams, apply_minmax, fit_minmax, loso_splits
from .model import TrainConfig, train_encoder
from .tensor import RandomSource, derive_seed

log = logging.getLogger(__name__)

METHODS = ("raw", "ae", "pca", "proposed")
METHOD_LABELS = {"raw": "COMPARE", "ae": "Autoencoder", "pca": "PCA", "proposed": "Proposed"}
REPORT_COLUMNS = ("emotion_uar", "gender_acc", "member_acc", "language_acc")

# Published figures (percent) for the ComParE / AE / PCA / adversarial rows,
# kept for side-by-side display only.
TABLE_II_REFERENCE = {
    "raw": (71.5, 90.5, 68.2, 78.2),
    "ae": (69.5, 85.3, 65.2, 72.5),
    "pca": (66.5, 84.6, 64.5, 71.2),
    "proposed": (68.7, 71.2, 54.1, 60.1),
}


# -- SVM -------------------------------------------------------------------

def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True, eq=False)
class SvmModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    gamma: float
    C: float

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1]


def _dual_objective(a, y, K):
    ay = a * y
    return float(a.sum() - 0.5 * ay @ K @ ay)


def svm_train_smo(X, y, C: float = 1.0, gamma: float = 0.1, tol: float = 1e-3,
                  max_iter: int | None = None, return_alphas: bool = False):
    """Sequential minimal optimization on the RBF dual.

    Each step picks the maximal violating pair: ``i`` from the samples whose
    KKT conditions want the bias raised and ``j`` from those that want it
    lowered, then solves the two-variable subproblem analytically with box
    clipping.  Training stops once the largest violation is within ``tol``,
    so every sample satisfies KKT to that tolerance.  The bias is the mean
    over margin (unbounded) support vectors, or the midpoint of the feasible
    interval when there are none.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] < 2:
        raise ValueError(f"svm_train_smo: need >= 2 samples with matching labels, got {X.shape}, {y.shape}")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("svm_train_smo: labels must be -1 or +1")
    if len(np.unique(y)) < 2:
        raise ValueError("svm_train_smo: both classes must be present")
    if C <= 0 or gamma <= 0:
        raise ValueError(f"svm_train_smo: need C > 0 and gamma > 0, got C={C}, gamma={gamma}")

    n = len(y)
    K = rbf_kernel(X, X, gamma)
    a = np.zeros(n)
    F = -y.copy()  # decision value without bias, minus label
    pos = y > 0
    max_iter = max_iter or max(100_000, 50 * n)
    for _ in range(max_iter):
        up = (pos & (a < C)) | (~pos & (a > 0))
        low = (pos & (a > 0)) | (~pos & (a < C))
        score = -F
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        if score[i] - score[j] <= tol:
            break
        ai, aj, yi, yj = a[i], a[j], y[i], y[j]
        if yi != yj:
            lo, hi = max(0.0, aj - ai), min(C, C + aj - ai)
        else:
            lo, hi = max(0.0, ai + aj - C), min(C, ai + aj)
        eta = max(K[i, i] + K[j, j] - 2.0 * K[i, j], 1e-12)
        aj_new = min(max(aj + yj * (F[i] - F[j]) / eta, lo), hi)
        ai_new = min(max(ai + yi * yj * (aj - aj_new), 0.0), C)
        # snap round-off next to a bound, otherwise a stuck alpha of C - 1ulp
        # keeps being selected without being able to move
        eps = 1e-12 * C
        ai_new = 0.0 if ai_new < eps else (C if ai_new > C - eps else ai_new)
        aj_new = 0.0 if aj_new < eps else (C if aj_new > C - eps else aj_new)
        F += yi * (ai_new - ai) * K[i] + yj * (aj_new - aj) * K[j]
        a[i], a[j] = ai_new, aj_new
    else:
        log.warning("SMO hit max_iter=%d before reaching tol=%g", max_iter, tol)

    free = (a > 1e-12) & (a < C - 1e-12)
    if np.any(free):
        b = float(np.mean(-F[free]))
    else:
        up = (pos & (a < C)) | (~pos & (a > 0))
        low = (pos & (a > 0)) | (~pos & (a < C))
        hi_b = np.max(-F[up]) if np.any(up) else np.min(-F[low])
        lo_b = np.min(-F[low]) if np.any(low) else hi_b
        b = float(0.5 * (hi_b + lo_b))
    sv = a > 0
    model = SvmModel(X[sv].copy(), (a * y)[sv].copy(), b, float(gamma), float(C))
    return (model, a) if return_alphas else model


def decision_values(model: SvmModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.dim:
        raise ValueError(f"width {X.shape[1]} does not match SVM width {model.dim}")
    return rbf_kernel(X, model.support_vectors, model.gamma) @ model.dual_coef + model.bias


def svm_predict(model: SvmModel, X) -> np.ndarray:
    return np.where(decision_values(model, X) >= 0.0, 1, -1)


def save_svm(model: SvmModel, path) -> None:
    with open(path, "wb") as fh:
        np.savez(fh, support_vectors=model.support_vectors, dual_coef=model.dual_coef,
                 params=np.array([model.bias, model.gamma, model.C]))


def load_svm(path) -> SvmModel:
    with np.load(path, allow_pickle=False) as z:
        bias, gamma, C = z["params"]
        return SvmModel(z["support_vectors"], z["dual_coef"], float(bias), float(gamma), float(C))


# -- metrics ---------------------------------------------------------------

def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true, dtype=np.intp), np.asarray(y_pred, dtype=np.intp)), 1)
    return cm


def uar(confusion) -> float:
    cm = np.asarray(confusion)
    support = cm.sum(axis=1)
    if np.any(support == 0):
        raise ValueError("uar: a true class has no samples")
    return float(np.mean(np.diag(cm) / support))


def confusion_csv(cm: np.ndarray, labels=("NEG", "POS")) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["true\\pred", *labels])
    for lab, row in zip(labels, cm):
        w.writerow([lab, *map(int, row)])
    return out.getvalue()


# -- configuration ---------------------------------------------------------

@dataclass
class AttackerConfig:
    hidden: int = 256
    dropout: float = 0.5
    lr: float = 1e-3
    epochs: int = 50
    batch_size: int = 32
    dtype: str = "float64"


@dataclass
class EvalConfig:
    repeats: int = 5
    grid_C: tuple = (0.1, 1.0, 10.0, 100.0)
    grid_gamma: tuple = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    val_fraction: float = 0.2
    svm_tol: float = 1e-3
    member_fraction: float = 0.5
    attack_train_fraction: float = 0.5
    attack_repeats: int = 5
    seed: int = 0
    attacker: AttackerConfig = field(default_factory=AttackerConfig)

    def __post_init__(self):
        if isinstance(self.attacker, dict):
            self.attacker = AttackerConfig(**self.attacker)
        self.grid_C = tuple(float(c) for c in self.grid_C)
        self.grid_gamma = tuple(float(g) for g in self.grid_gamma)
        if self.repeats < 1 or self.attack_repeats < 1:
            raise ValueError("EvalConfig: repeats and attack_repeats must be >= 1")
        if not self.grid_C or not self.grid_gamma:
            raise ValueError("EvalConfig: grids must be non-empty")


def desk_eval_config(**overrides) -> EvalConfig:
    """Single LOSO repeat and float32 attackers, to pair with ``model.desk_config``."""
    base = dict(repeats=1, attacker=AttackerConfig(dtype="float32"))
    base.update(overrides)
    return EvalConfig(**base)


# -- splitting helpers -----------------------------------------------------

def stratified_split(labels, fraction: float, rs: RandomSource) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled split; returns (rest, held) index arrays, held ~ fraction."""
    labels = np.asarray(labels)
    rest, held = [], []
    for cls in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rs.permutation(len(idx))]
        k = int(round(fraction * len(idx)))
        held.append(idx[:k])
        rest.append(idx[k:])
    return np.sort(np.concatenate(rest)), np.sort(np.concatenate(held))


def grid_search(X, y, grid_C, grid_gamma, seed: int = 0, val_fraction: float = 0.2,
                tol: float = 1e-3) -> tuple[float, float]:
    """Pick (C, gamma) by validation UAR on a stratified held-out split.

    Ties go to the smaller C, then the smaller gamma.
    """
    if not grid_C or not grid_gamma:
        raise ValueError("grid_search: empty grid")
    y = np.asarray(y)
    tr, va = stratified_split(y, val_fraction, RandomSource(seed))
    for part, name in ((tr, "training"), (va, "validation")):
        if len(np.unique(y[part])) < 2:
            raise ValueError(f"grid_search: a class is absent from the {name} split")
    best, best_score = None, -1.0
    for C in sorted(grid_C):
        for gamma in sorted(grid_gamma):
            if len(grid_C) == 1 and len(grid_gamma) == 1:
                return float(C), float(gamma)
            svm = svm_train_smo(X[tr], y[tr], C, gamma, tol)
            pred = svm_predict(svm, X[va])
            score = uar(confusion_matrix((y[va] > 0).astype(int), (pred > 0).astype(int), 2))
            if score > best_score:
                best, best_score = (float(C), float(gamma)), score
    return best


# -- representations -------------------------------------------------------

def fit_representation(method: str, Xn: np.ndarray, sub: Corpus, train_config: TrainConfig,
                       seed: int, scaler: ScalerParams | None = None, languages=None):
    """Fit one comparison arm on normalised training rows; returns (transform, fitted)."""
    if method == "raw":
        return (lambda X: X), None
    if method == "pca":
        k = min(train_config.latent_dim, Xn.shape[0] - 1, Xn.shape[1])
        pm = pca_fit(Xn, k)
        return (lambda X: pca_transform(pm, X)), pm
    if method in ("ae", "proposed"):
        alpha = 0.0 if method == "ae" else train_config.alpha
        cfg = replace(train_config, alpha=alpha, seed=seed)
        model, _ = train_encoder(Xn, sub, cfg, scaler or ScalerParams.identity(Xn.shape[1]), languages)
        return model.encode, model
    raise ValueError(f"unknown method {method!r}")


class FitAudit:
    """Records which record ids each train-side fit consumed, per fold."""

    def __init__(self):
        self.entries: list[dict] = []

    def record(self, repeat: int, fold: int, stage: str, ids) -> None:
        self.entries.append({"repeat": repeat, "fold": fold, "stage": stage, "ids": frozenset(ids)})

    def violations(self, test_ids_by_fold: dict) -> list[dict]:
        return [e for e in self.entries if e["ids"] & test_ids_by_fold[(e["repeat"], e["fold"])]]


@dataclass
class LosoResult:
    uar: float
    per_repeat: list[float]
    confusions: list[np.ndarray]
    n_folds: int
    test_ids: dict = field(default_factory=dict)

    def __float__(self):
        return self.uar


def evaluate_loso(corpus: Corpus, representation, repeats: int = 5, config: EvalConfig | None = None,
                  train_config: TrainConfig | None = None, audit: FitAudit | None = None) -> LosoResult:
    """Leave-one-speaker-out valence UAR, averaged over ``repeats`` runs.

    ``representation`` is a method name from :data:`METHODS` or a callable
    ``fit(X_train_normalised, train_corpus, seed) -> transform``.  Within each
    fold the scaler, representation, SVM grid search and SVM are fit on the
    training speakers only; predictions are pooled into one confusion matrix
    per repeat.
    """
    config = config or EvalConfig()
    train_config = train_config or TrainConfig()
    if isinstance(representation, str):
        method = representation

        def fitter(Xn, sub, seed, scaler=None):
            return fit_representation(method, Xn, sub, train_config, seed, scaler, corpus.languages)[0]
    else:
        def fitter(Xn, sub, seed, scaler=None):
            return representation(Xn, sub, seed)

    folds = loso_splits(corpus)
    y = np.where(corpus.labels("valence") == "POS", 1, -1)
    ids = corpus.ids
    per_repeat, confusions, test_ids = [], [], {}
    for r in range(repeats):
        rseed = derive_seed(config.seed, r)
        cm = np.zeros((2, 2), dtype=np.int64)
        for f, (train, test) in enumerate(folds):
            fseed = derive_seed(rseed, f)
            test_ids[(r, f)] = frozenset(ids[test])
            sub = corpus.subset(train)
            scaler = fit_minmax(sub)
            Xtr = apply_minmax(scaler, sub.X)
            Xte = apply_minmax(scaler, corpus.X[test])
            transform = fitter(Xtr, sub, derive_seed(fseed, 1), scaler)
            Ztr, Zte = transform(Xtr), transform(Xte)
            zscale = fit_minmax(Ztr)
            Ztr, Zte = apply_minmax(zscale, Ztr), apply_minmax(zscale, Zte)
            C, gamma = grid_search(Ztr, y[train], config.grid_C, config.grid_gamma, derive_seed(fseed, 2),
                                   config.val_fraction, config.svm_tol)
            svm = svm_train_smo(Ztr, y[train], C, gamma, config.svm_tol)
            if audit is not None:
                for stage in ("scaler", "representation", "grid_search", "svm"):
                    audit.record(r, f, stage, sub.ids)
            pred = svm_predict(svm, Zte)
            cm += confusion_matrix((y[test] > 0).astype(int), (pred > 0).astype(int), 2)
        per_repeat.append(uar(cm))
        confusions.append(cm)
        log.info("repeat %d: UAR %.4f", r, per_repeat[-1])
    return LosoResult(float(np.mean(per_repeat)), per_repeat, confusions, len(folds), test_ids)


# -- attackers -------------------------------------------------------------

def train_attacker(Z: np.ndarray, y: np.ndarray, n_classes: int, seed: int,
                   config: AttackerConfig | None = None):
    """Fit a fresh two-hidden-layer classifier; returns a predict function."""
    config = config or AttackerConfig()
    if len(np.unique(y)) < 2:
        raise ValueError("attacker: training data has a single class")
    dtype = np.dtype(config.dtype)
    scaler = fit_minmax(Z)
    Zs = apply_minmax(scaler, Z).astype(dtype)
    rs = RandomSource(seed)
    net = nn.mlp([Z.shape[1], config.hidden, config.hidden, n_classes], rs, config.dropout)
    for layer in net.dense_layers():
        layer.astype(dtype)
    opt = nn.Adam(net.params, lr=config.lr)
    y = np.asarray(y, dtype=np.intp)
    for _ in range(config.epochs):
        order = rs.permutation(len(Zs))
        for s in range(0, len(Zs), config.batch_size):
            idx = order[s:s + config.batch_size]
            net.zero_grad()
            _, g = nn.softmax_xent(net.forward(Zs[idx], train=True), y[idx])
            net.backward(g)
            opt.step(net.params, net.grads)
    return lambda Q: np.argmax(net.forward(apply_minmax(scaler, Q).astype(dtype)), axis=1)


def attack_attribute(latents_train, labels_train, latents_test, labels_test, seed: int = 0,
                     config: AttackerConfig | None = None) -> float:
    """Accuracy of a freshly trained attacker on frozen representations."""
    labels_train, labels_test = np.asarray(labels_train), np.asarray(labels_test)
    vocab = sorted(set(labels_train.tolist()) | set(labels_test.tolist()))
    pos = {v: i for i, v in enumerate(vocab)}
    ytr = np.array([pos[v] for v in labels_train.tolist()])
    yte = np.array([pos[v] for v in labels_test.tolist()])
    predict = train_attacker(np.asarray(latents_train, dtype=np.float64), ytr, len(vocab), seed, config)
    return float(np.mean(predict(np.asarray(latents_test, dtype=np.float64)) == yte))


def _encoder_fn(model):
    if hasattr(model, "encode_raw"):
        return model.encode_raw
    return model


def attack_membership(model, member: Corpus, nonmember: Corpus, seed: int = 0,
                      config: AttackerConfig | None = None, held_in: float = 0.5) -> float:
    """Member-vs-non-member accuracy from representations alone.

    ``model`` is a :class:`PrivacyEncoderModel` (raw features go through its
    stored scaler) or any callable mapping raw features to representations.
    Both sets are encoded, a held-in share of each trains the attacker and the
    rest measures it.
    """
    if len(member) == 0 or len(nonmember) == 0:
        raise ValueError("attack_membership: member and non-member sets must be non-empty")
    overlap = set(member.speakers) & set(nonmember.speakers)
    if overlap:
        raise ValueError(f"attack_membership: speakers in both sets: {sorted(overlap)}")
    encode = _encoder_fn(model)
    Z = np.vstack([encode(member.X), encode(nonmember.X)])
    y = np.r_[np.ones(len(member), dtype=np.intp), np.zeros(len(nonmember), dtype=np.intp)]
    rs = RandomSource(seed)
    test, train = stratified_split(y, held_in, rs)
    predict = train_attacker(Z[train], y[train], 2, derive_seed(seed, 1), config)
    return float(np.mean(predict(Z[test]) == y[test]))


def split_members(corpus: Corpus, fraction: float = 0.5, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Split speakers into members and non-members, balanced across (gender, language).

    Returns (member_rows, nonmember_rows).  Each group gets at least one speaker.
    Cells holding a single speaker are assigned in a checkerboard over
    (gender, language).
    """
    spk_attr = {}
    for r in corpus.records:
        spk_attr.setdefault(r.speaker, (r.gender, r.language))
    cells: dict = {}
    for spk in sorted(spk_attr):
        cells.setdefault(spk_attr[spk], []).append(spk)
    genders = sorted({k[0] for k in cells})
    langs = sorted({k[1] for k in cells})
    rs = RandomSource(seed)
    members = set()
    for key in sorted(cells):
        group = cells[key]
        order = rs.permutation(len(group))
        k = int(round(fraction * len(group)))
        if len(group) > 1:
            k = min(max(k, 1), len(group) - 1)
        else:
            # lone speakers go to a checkerboard side, so tiny corpora still
            # have both genders and languages among members and non-members
            k = 1 - (genders.index(key[0]) + langs.index(key[1])) % 2
        members.update(group[i] for i in order[:k])
    speakers = corpus.labels("speaker")
    is_member = np.isin(speakers, sorted(members))
    if is_member.all() or not is_member.any():
        raise ValueError("split_members: need speakers on both sides of the split")
    return np.flatnonzero(is_member), np.flatnonzero(~is_member)


def privacy_attacks(corpus: Corpus, method: str, train_config: TrainConfig, config: EvalConfig) -> dict:
    """Gender, language and membership attacks against one comparison arm.

    The representation is fit on member speakers only.  Gender and language
    attackers train and test on disjoint halves of the non-member utterances.
    Each accuracy is the mean over ``config.attack_repeats`` fresh splits and
    attacker initialisations against the same frozen representation.
    """
    member_rows, non_rows = split_members(corpus, config.member_fraction, config.seed)
    sub = corpus.subset(member_rows)
    scaler = fit_minmax(sub)
    transform, _ = fit_representation(method, apply_minmax(scaler, sub.X), sub, train_config,
                                      derive_seed(config.seed, 101), scaler, corpus.languages)

    def encode(X):
        return transform(apply_minmax(scaler, X))

    non = corpus.subset(non_rows)
    Z_non = encode(non.X)
    scores: dict = {"gender_acc": [], "language_acc": [], "member_acc": []}
    for r in range(config.attack_repeats):
        rseed = derive_seed(config.seed, 200, r)
        for k, (attr, key) in enumerate((("gender", "gender_acc"), ("language", "language_acc"))):
            labels = non.labels(attr)
            tr, te = stratified_split(labels, 1.0 - config.attack_train_fraction,
                                      RandomSource(derive_seed(rseed, k, 0)))
            scores[key].append(attack_attribute(Z_non[tr], labels[tr], Z_non[te], labels[te],
                                                derive_seed(rseed, k, 1), config.attacker))
        scores["member_acc"].append(attack_membership(encode, sub, non, derive_seed(rseed, 2), config.attacker))
    return {key: float(np.mean(v)) for key, v in scores.items()}


def privacy_eval(corpus: Corpus, method: str, train_config: TrainConfig, config: EvalConfig | None = None,
                 emotion: bool = True) -> dict:
    """All four report metrics for one method."""
    config = config or EvalConfig()
    row = {}
    if emotion:
        row["emotion_uar"] = evaluate_loso(corpus, method, config.repeats, config, train_config).uar
    else:
        row["emotion_uar"] = float("nan")
    row.update(privacy_attacks(corpus, method, train_config, config))
    return {k: row[k] for k in REPORT_COLUMNS}


# -- report ----------------------------------------------------------------

@dataclass
class AttackReport:
    rows: list[dict]

    def row(self, method: str) -> dict:
        return next(r for r in self.rows if r["method"] == method)

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("method",) + REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([r["method"]] + [f"{r[c]:.6f}" for c in REPORT_COLUMNS])
        return out.getvalue()

    def to_text(self, reference: bool = True) -> str:
        head = f"{'Method':<12} {'emotion':>8} {'gender':>8} {'user':>8} {'language':>9}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            vals = [100 * r[c] for c in REPORT_COLUMNS]
            lines.append(f"{METHOD_LABELS.get(r['method'], r['method']):<12} "
                         f"{vals[0]:>8.1f} {vals[1]:>8.1f} {vals[2]:>8.1f} {vals[3]:>9.1f}")
        if reference:
            lines += ["", "published reference (four emotion corpora):"]
            for m, vals in TABLE_II_REFERENCE.items():
                lines.append(f"{METHOD_LABELS[m]:<12} {vals[0]:>8.1f} {vals[1]:>8.1f} {vals[2]:>8.1f} {vals[3]:>9.1f}")
        return "\n".join(lines)


def build_report(corpus: Corpus, train_config: TrainConfig, config: EvalConfig | None = None,
                 methods=METHODS) -> AttackReport:
    config = config or EvalConfig()
    rows = []
    for m in methods:
        log.info("evaluating %s", m)
        rows.append({"method": m, **privacy_eval(corpus, m, train_config, config)})
    return AttackReport(rows)


def average_reports(reports) -> AttackReport:
    """Per-method mean of several reports (one per corpus); a single report passes through."""
    reports = list(reports)
    if len(reports) == 1:
        return reports[0]
    rows = []
    for r in reports[0].rows:
        m = r["method"]
        rows.append({"method": m, **{c: float(np.mean([rep.row(m)[c] for rep in reports])) for c in REPORT_COLUMNS}})
    return AttackReport(rows)


def write_rows_csv(rows: list[dict], columns) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([r[c] if isinstance(r[c], (int, str)) else f"{r[c]:.6f}" for c in columns])
    return out.getvalue()
