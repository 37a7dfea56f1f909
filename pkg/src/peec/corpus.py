"""Utterance-level feature corpora.

A corpus is a list of utterances, each carrying one static acoustic feature
vector plus the four labels the rest of the package cares about: binary
valence, speaker, gender and language.  Corpora come from ARFF files (what
openSMILE writes), from CSV, or from :func:`synth_corpus` when the licensed
emotion databases are not at hand.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .tensor import RandomSource

VALENCES = ("NEG", "POS")
GENDERS = ("F", "M")

_VALENCE_ALIASES = {"neg": "NEG", "negative": "NEG", "pos": "POS", "positive": "POS"}
_GENDER_ALIASES = {"f": "F", "female": "F", "w": "F", "m": "M", "male": "M"}

# Binary valence for the categorical labels of the four emotion databases.
VALENCE_MAP: dict[str, dict[str, str]] = {
    "IEMOCAP": {
        "angry": "NEG", "sadness": "NEG",
        "neutral": "POS", "happy": "POS", "excited": "POS",
    },
    "EMODB": {
        "anger": "NEG", "sadness": "NEG", "fear": "NEG", "disgust": "NEG", "boredom": "NEG",
        "neutral": "POS", "happiness": "POS",
    },
    "BUEMODB": {
        "anger": "NEG", "sadness": "NEG",
        "neutral": "POS", "joy": "POS",
    },
    "EMOVO": {
        "anger": "NEG", "sadness": "NEG", "fear": "NEG", "disgust": "NEG",
        "neutral": "POS", "joy": "POS", "surprise": "POS",
    },
}

# Common spellings of the same categories across corpus distributions.
_EMOTION_SYNONYMS = {"sad": "sadness", "ang": "angry", "hap": "happy", "neu": "neutral",
                     "exc": "excited", "happiness": "happiness"}


class CorpusError(ValueError):
    """Malformed corpus content; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class SchemaError(CorpusError):
    """A required label column is missing."""


def map_valence(corpus_name: str, emotion_label: str) -> str:
    table = VALENCE_MAP.get(corpus_name.upper())
    if table is None:
        raise KeyError(f"unknown corpus {corpus_name!r}")
    key = emotion_label.strip().lower()
    if key not in table:
        key = _EMOTION_SYNONYMS.get(key, key)
    if key not in table:
        raise KeyError(f"unknown emotion {emotion_label!r} for corpus {corpus_name}")
    return table[key]


def _norm_valence(value: str, line=None, corpus_name=None) -> str:
    v = value.strip()
    if v.upper() in VALENCES:
        return v.upper()
    if v.lower() in _VALENCE_ALIASES:
        return _VALENCE_ALIASES[v.lower()]
    if corpus_name is not None:
        try:
            return map_valence(corpus_name, v)
        except KeyError as e:
            raise CorpusError(str(e.args[0]), line) from None
    raise CorpusError(f"invalid valence {value!r}", line)


def _norm_gender(value: str, line=None) -> str:
    g = _GENDER_ALIASES.get(value.strip().lower())
    if g is None:
        raise CorpusError(f"invalid gender {value!r}", line)
    return g


@dataclass(frozen=True, eq=False)
class UtteranceRecord:
    id: str
    features: np.ndarray
    valence: str
    speaker: str
    gender: str
    language: str

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        if feats.ndim != 1:
            raise CorpusError(f"record {self.id}: features must be 1-D")
        if not np.all(np.isfinite(feats)):
            raise CorpusError(f"record {self.id}: non-finite feature value")
        if self.valence not in VALENCES:
            raise CorpusError(f"record {self.id}: invalid valence {self.valence!r}")
        if self.gender not in GENDERS:
            raise CorpusError(f"record {self.id}: invalid gender {self.gender!r}")

    def __eq__(self, other):
        if not isinstance(other, UtteranceRecord):
            return NotImplemented
        return (self.id, self.valence, self.speaker, self.gender, self.language) == \
            (other.id, other.valence, other.speaker, other.gender, other.language) \
            and np.array_equal(self.features, other.features)


@dataclass(frozen=True, eq=False)
class Corpus:
    records: tuple[UtteranceRecord, ...]
    dim: int
    feature_names: tuple[str, ...] = field(default=())
    name: str = "corpus"

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if self.dim < 1:
            raise CorpusError(f"dim must be positive, got {self.dim}")
        seen = set()
        for r in self.records:
            if r.features.shape[0] != self.dim:
                raise CorpusError(f"record {r.id}: {r.features.shape[0]} features, expected {self.dim}")
            if r.id in seen:
                raise CorpusError(f"duplicate record id {r.id!r}")
            seen.add(r.id)
        if not self.feature_names:
            object.__setattr__(self, "feature_names", tuple(f"f{j}" for j in range(self.dim)))
        elif len(self.feature_names) != self.dim:
            raise CorpusError(f"{len(self.feature_names)} feature names for dim {self.dim}")

    def __len__(self):
        return len(self.records)

    def __eq__(self, other):
        if not isinstance(other, Corpus):
            return NotImplemented
        return self.dim == other.dim and self.records == other.records

    @cached_property
    def X(self) -> np.ndarray:
        if not self.records:
            return np.zeros((0, self.dim))
        X = np.stack([r.features for r in self.records])
        X.setflags(write=False)
        return X

    @cached_property
    def ids(self) -> np.ndarray:
        return np.array([r.id for r in self.records], dtype=object)

    def labels(self, attribute: str) -> np.ndarray:
        return np.array([getattr(r, attribute) for r in self.records], dtype=object)

    def vocabulary(self, attribute: str) -> list[str]:
        return sorted({getattr(r, attribute) for r in self.records})

    @property
    def speakers(self) -> list[str]:
        return self.vocabulary("speaker")

    @property
    def languages(self) -> list[str]:
        return self.vocabulary("language")

    def label_indices(self, attribute: str, vocab: list[str] | None = None) -> np.ndarray:
        vocab = self.vocabulary(attribute) if vocab is None else vocab
        pos = {v: i for i, v in enumerate(vocab)}
        return np.array([pos[getattr(r, attribute)] for r in self.records], dtype=np.intp)

    def subset(self, rows) -> "Corpus":
        rows = np.asarray(rows, dtype=np.intp)
        return Corpus(tuple(self.records[i] for i in rows), self.dim, self.feature_names, self.name)


@dataclass(frozen=True)
class LabelColumns:
    """Names of the label columns in a feature file."""
    valence: str = "valence"
    speaker: str = "speaker"
    gender: str = "gender"
    language: str = "language"
    id: str = "id"
    corpus_name: str | None = None  # maps categorical emotions through VALENCE_MAP

    def required(self):
        return {"valence": self.valence, "speaker": self.speaker,
                "gender": self.gender, "language": self.language}


def _make_record(rid, feats, labels, cols: LabelColumns, line):
    return UtteranceRecord(
        id=rid,
        features=feats,
        valence=_norm_valence(labels["valence"], line, cols.corpus_name),
        speaker=labels["speaker"].strip(),
        gender=_norm_gender(labels["gender"], line),
        language=labels["language"].strip(),
    )


def _split_arff_row(line: str) -> list[str]:
    return next(csv.reader([line], quotechar="'", skipinitialspace=True))


def _parse_attribute(rest: str, lineno: int):
    rest = rest.strip()
    if rest.startswith(("'", '"')):
        q = rest[0]
        end = rest.find(q, 1)
        if end < 0:
            raise CorpusError("unterminated attribute name", lineno)
        name, kind = rest[1:end], rest[end + 1:].strip()
    else:
        parts = rest.split(None, 1)
        if len(parts) != 2:
            raise CorpusError(f"malformed @attribute declaration {rest!r}", lineno)
        name, kind = parts
    low = kind.lower()
    if low in ("numeric", "real", "integer"):
        return name, "numeric", None
    if low == "string":
        return name, "string", None
    if kind.startswith("{") and kind.endswith("}"):
        values = [v.strip().strip("'\"") for v in kind[1:-1].split(",")]
        return name, "nominal", values
    raise CorpusError(f"unsupported attribute type {kind!r}", lineno)


def parse_arff(text: str, columns: LabelColumns = LabelColumns()) -> Corpus:
    """Parse the dense ARFF subset openSMILE emits.

    Numeric attributes other than the label columns become features, in file
    order.  A string/nominal ``id`` column (or openSMILE's ``name``) supplies
    record ids; otherwise ids are ``row<N>``.
    """
    attrs: list[tuple[str, str, list | None]] = []
    relation = None
    in_data = False
    records = []
    label_pos: dict[str, int] = {}
    feat_pos: list[int] = []
    id_pos = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if not in_data:
            low = line.lower()
            if low.startswith("@relation"):
                relation = line[len("@relation"):].strip().strip("'\"")
            elif low.startswith("@attribute"):
                attrs.append(_parse_attribute(line[len("@attribute"):], lineno))
            elif low.startswith("@data"):
                if relation is None:
                    raise CorpusError("@data before @relation", lineno)
                names = [a[0] for a in attrs]
                for key, col in columns.required().items():
                    if col not in names:
                        raise SchemaError(f"missing label attribute {col!r}", lineno)
                    label_pos[key] = names.index(col)
                label_idx = set(label_pos.values())
                for cand in (columns.id, "name"):
                    if cand in names and attrs[names.index(cand)][1] != "numeric":
                        id_pos = names.index(cand)
                        break
                feat_pos = [i for i, a in enumerate(attrs) if a[1] == "numeric" and i not in label_idx]
                if not feat_pos:
                    raise CorpusError("no numeric feature attributes", lineno)
                in_data = True
            else:
                raise CorpusError(f"unexpected header line {line!r}", lineno)
            continue

        if line.startswith("{"):
            raise CorpusError("sparse ARFF rows are not supported", lineno)
        values = _split_arff_row(line)
        if len(values) != len(attrs):
            raise CorpusError(f"row has {len(values)} values, expected {len(attrs)}", lineno)
        for i, (name, kind, nominal) in enumerate(attrs):
            if kind == "nominal" and values[i].strip() not in nominal:
                raise CorpusError(f"value {values[i]!r} not among nominal values of {name!r}", lineno)
        try:
            feats = np.array([float(values[i]) for i in feat_pos])
        except ValueError:
            bad = next(attrs[i][0] for i in feat_pos if not _is_float(values[i]))
            raise CorpusError(f"non-numeric value in numeric attribute {bad!r}", lineno) from None
        if not np.all(np.isfinite(feats)):
            raise CorpusError("non-finite feature value", lineno)
        labels = {k: values[p] for k, p in label_pos.items()}
        rid = values[id_pos].strip() if id_pos is not None else f"row{len(records)}"
        records.append(_make_record(rid, feats, labels, columns, lineno))

    if not in_data:
        raise CorpusError("missing @data section")
    return Corpus(tuple(records), len(feat_pos), tuple(attrs[i][0] for i in feat_pos),
                  relation or "corpus")


def _is_float(s: str) -> bool:
    try:
        return math.isfinite(float(s))
    except ValueError:
        return False


def parse_csv(text: str, columns: LabelColumns = LabelColumns()) -> Corpus:
    """Parse a header-first CSV; every non-label, non-id column is a feature."""
    rows = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(rows)]
    except StopIteration:
        raise CorpusError("empty CSV", 1) from None
    label_pos = {}
    for key, col in columns.required().items():
        if col not in header:
            raise SchemaError(f"missing label column {col!r}", 1)
        label_pos[key] = header.index(col)
    id_pos = header.index(columns.id) if columns.id in header else None
    skip = set(label_pos.values()) | ({id_pos} if id_pos is not None else set())
    feat_pos = [i for i in range(len(header)) if i not in skip]
    if not feat_pos:
        raise CorpusError("no feature columns", 1)

    records = []
    for lineno, values in enumerate(rows, start=2):
        if not values or all(not v.strip() for v in values):
            continue
        if len(values) != len(header):
            raise CorpusError(f"row has {len(values)} values, expected {len(header)}", lineno)
        try:
            feats = np.array([float(values[i]) for i in feat_pos])
        except ValueError:
            bad = next(header[i] for i in feat_pos if not _is_float(values[i]))
            raise CorpusError(f"non-numeric value in feature column {bad!r}", lineno) from None
        if not np.all(np.isfinite(feats)):
            raise CorpusError("non-finite feature value", lineno)
        labels = {k: values[p] for k, p in label_pos.items()}
        rid = values[id_pos].strip() if id_pos is not None else f"row{len(records)}"
        records.append(_make_record(rid, feats, labels, columns, lineno))
    return Corpus(tuple(records), len(feat_pos), tuple(header[i] for i in feat_pos))


def write_csv(corpus: Corpus) -> str:
    """Canonical CSV: feature columns, then valence/speaker/gender/language, then id."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(list(corpus.feature_names) + ["valence", "speaker", "gender", "language", "id"])
    for r in corpus.records:
        w.writerow([repr(float(v)) for v in r.features] + [r.valence, r.speaker, r.gender, r.language, r.id])
    return out.getvalue()


def _arff_quote(s: str) -> str:
    return "'" + s.replace("'", "\\'") + "'"


def write_arff(corpus: Corpus, relation: str | None = None) -> str:
    lines = [f"@relation {_arff_quote(relation or corpus.name)}", ""]
    lines.append("@attribute id string")
    lines += [f"@attribute {_arff_quote(n)} numeric" for n in corpus.feature_names]
    lines.append("@attribute valence {NEG,POS}")
    lines.append("@attribute speaker string")
    lines.append("@attribute gender {F,M}")
    lines.append("@attribute language string")
    lines += ["", "@data"]
    for r in corpus.records:
        vals = [_arff_quote(r.id)] + [repr(float(v)) for v in r.features]
        vals += [r.valence, _arff_quote(r.speaker), r.gender, _arff_quote(r.language)]
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def load_corpus(path, columns: LabelColumns = LabelColumns()) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if str(path).lower().endswith(".arff"):
        return parse_arff(text, columns)
    return parse_csv(text, columns)


def concat_corpora(corpora, names=None) -> Corpus:
    """Pool several corpora with the same feature width into one.

    Ids and speakers are prefixed with ``<name>/`` so that speaker ``01`` of
    one corpus never merges with speaker ``01`` of another.  ``names``
    defaults to each corpus's ``name``; they must be distinct.
    """
    corpora = list(corpora)
    if not corpora:
        raise ValueError("concat_corpora: nothing to pool")
    names = [c.name for c in corpora] if names is None else list(names)
    if len(set(names)) != len(names):
        raise ValueError(f"concat_corpora: corpus names must be distinct, got {names}")
    dims = {c.dim for c in corpora}
    if len(dims) != 1:
        raise CorpusError(f"cannot pool corpora of different feature widths {sorted(dims)}")
    records = [UtteranceRecord(f"{n}/{r.id}", r.features, r.valence, f"{n}/{r.speaker}", r.gender, r.language)
               for n, c in zip(names, corpora) for r in c.records]
    return Corpus(tuple(records), corpora[0].dim, corpora[0].feature_names, "+".join(names))


def save_corpus(corpus: Corpus, path) -> None:
    text = write_arff(corpus) if str(path).lower().endswith(".arff") else write_csv(corpus)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# -- normalisation ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScalerParams:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min, dtype=np.float64)
        hi = np.asarray(self.max, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError(f"scaler bounds shape mismatch {lo.shape} vs {hi.shape}")
        if np.any(lo > hi):
            raise ValueError("scaler min exceeds max")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    def __eq__(self, other):
        return isinstance(other, ScalerParams) and np.array_equal(self.min, other.min) \
            and np.array_equal(self.max, other.max)

    @property
    def dim(self) -> int:
        return self.min.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "ScalerParams":
        return cls(np.zeros(dim), np.ones(dim))


def fit_minmax(data, rows=None) -> ScalerParams:
    """Per-dimension bounds over ``rows`` of a Corpus or feature matrix."""
    X = data.X if isinstance(data, Corpus) else np.asarray(data, dtype=np.float64)
    if rows is not None:
        X = X[np.asarray(rows, dtype=np.intp)]
    if X.shape[0] == 0:
        raise ValueError("fit_minmax: empty row subset")
    return ScalerParams(X.min(axis=0), X.max(axis=0))


def apply_minmax(params: ScalerParams, features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.shape[-1] != params.dim:
        raise ValueError(f"apply_minmax: width {X.shape[-1]} vs scaler dim {params.dim}")
    span = params.max - params.min
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (X - params.min) / safe, 0.0)
    return np.clip(out, 0.0, 1.0)


# -- cross-validation ------------------------------------------------------

def loso_splits(corpus: Corpus) -> list[tuple[np.ndarray, np.ndarray]]:
    """Leave-one-speaker-out folds, one per speaker in sorted speaker order."""
    speakers = corpus.labels("speaker")
    vocab = corpus.speakers
    if len(vocab) < 2:
        raise ValueError("loso_splits: need at least two speakers")
    folds = []
    for spk in vocab:
        test = np.flatnonzero(speakers == spk)
        train = np.flatnonzero(speakers != spk)
        folds.append((train, test))
    return folds


# -- synthetic corpora -----------------------------------------------------

# Amplitudes are per attribute direction; noise is the per-dimension std.
# Nuisance attributes sit close to the point where dropping them costs the
# autoencoder about as much reconstruction as an adversary of weight 1 can
# gain, so the plain autoencoder keeps them and the adversarial one sheds them.
DEFAULT_SNR = {
    "valence": 1.0,
    "gender": 0.6,
    "speaker": 0.5,
    "language": 0.6,
    "noise": 0.1,
    "speaker_rank": 3,
}

_LANG_NAMES = ("en", "de", "it", "tr")


def synth_corpus(n_per_cell: int = 15, dim: int = 64, n_speakers: int = 8, n_languages: int = 2,
                 snr_config: dict | None = None, seed: int = 0) -> Corpus:
    """Additive-direction synthetic corpus.

    Every speaker contributes ``n_per_cell`` utterances of each valence.
    Speaker ``s`` has gender ``F`` for even ``s`` and language ``s // 2`` (mod
    ``n_languages``), so gender, language and valence are balanced against one
    another.  Each utterance is::

        x = a_v * dir[valence] + a_g * dir[gender] + a_l * dir[language]
            + a_s * dir[speaker] + noise * N(0, I)

    Valence, gender and language directions are mutually orthonormal and
    signed per value; speaker directions are random unit vectors inside a
    separate ``speaker_rank``-dimensional subspace orthogonal to the rest.
    Amplitudes ``a_*`` and the noise level come from ``snr_config``.
    """
    if dim < 16 or n_speakers < 4 or n_languages < 2 or n_per_cell < 1:
        raise ValueError(f"synth_corpus: invalid sizes (n_per_cell={n_per_cell}, dim={dim}, "
                         f"n_speakers={n_speakers}, n_languages={n_languages})")
    cfg = dict(DEFAULT_SNR)
    if snr_config:
        unknown = set(snr_config) - set(cfg)
        if unknown:
            raise ValueError(f"synth_corpus: unknown snr_config keys {sorted(unknown)}")
        cfg.update(snr_config)
    rank = int(cfg["speaker_rank"])
    n_dirs = 2 + n_languages + rank
    if n_dirs > dim:
        raise ValueError(f"synth_corpus: dim {dim} too small for {n_dirs} attribute directions")

    rs = RandomSource(seed)
    basis, _ = np.linalg.qr(rs.normal((dim, n_dirs)))
    basis = basis.T  # rows are orthonormal directions
    v_dir, g_dir = basis[0], basis[1]
    lang_dirs = basis[2:2 + n_languages]
    spk_basis = basis[2 + n_languages:]
    coef = rs.normal((n_speakers, rank))
    coef /= np.linalg.norm(coef, axis=1, keepdims=True)
    spk_dirs = coef @ spk_basis

    lang_names = [(_LANG_NAMES[i] if i < len(_LANG_NAMES) else f"l{i}") for i in range(n_languages)]
    width = len(str(n_speakers - 1))
    records = []
    noise = rs.normal((n_speakers * 2 * n_per_cell, dim)) * cfg["noise"]
    k = 0
    for s in range(n_speakers):
        gender = GENDERS[s % 2]
        lang = (s // 2) % n_languages
        base = (cfg["gender"] * (1.0 if gender == "M" else -1.0) * g_dir
                + cfg["language"] * lang_dirs[lang]
                + cfg["speaker"] * spk_dirs[s])
        for vi, valence in enumerate(VALENCES):
            mu = base + cfg["valence"] * (1.0 if valence == "POS" else -1.0) * v_dir
            for u in range(n_per_cell):
                records.append(UtteranceRecord(
                    id=f"s{s:0{width}d}_{valence.lower()}_{u:03d}",
                    features=mu + noise[k],
                    valence=valence,
                    speaker=f"spk{s:0{width}d}",
                    gender=gender,
                    language=lang_names[lang],
                ))
                k += 1
    return Corpus(tuple(records), dim, name="synthetic")
