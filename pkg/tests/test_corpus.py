import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from peec.corpus import (
    VALENCE_MAP, CorpusError, LabelColumns, SchemaError, ScalerParams, apply_minmax, concat_corpora,
    fit_minmax, load_corpus, loso_splits, map_valence, parse_arff, parse_csv, save_corpus, synth_corpus,
    write_arff, write_csv,
)
from peec.tensor import RandomSource

ARFF = """% exported features
@relation 'demo'

@attribute name string
@attribute f0 numeric
@attribute f1 numeric
@attribute f2 numeric
@attribute valence {NEG,POS}
@attribute speaker string
@attribute gender {F,M}
@attribute language string

@data
'u1',0.5,1.0,-2.0,NEG,'a',F,'en'
'u2',1.5,2.0,3.25,POS,'b',M,'en'
"""


def test_arff_structure():
    c = parse_arff(ARFF)
    assert c.dim == 3 and len(c) == 2
    assert c.ids.tolist() == ["u1", "u2"]
    assert c.feature_names == ("f0", "f1", "f2")
    assert np.array_equal(c.X, [[0.5, 1.0, -2.0], [1.5, 2.0, 3.25]])
    assert c.records[1].valence == "POS" and c.records[1].gender == "M"
    assert c.speakers == ["a", "b"] and c.languages == ["en"]


def test_arff_arity_error_names_line():
    bad = ARFF.replace("'u2',1.5,2.0,3.25,POS", "'u2',1.5,2.0,POS")
    with pytest.raises(CorpusError) as e:
        parse_arff(bad)
    assert e.value.line == 15


@pytest.mark.parametrize("old,new,line", [
    ("1.5,2.0,3.25", "1.5,x,3.25", 15),               # non-numeric value
    ("POS,'b',M", "MAYBE,'b',M", 15),                   # unknown nominal
    ("@attribute f1 numeric", "@attribute f1", 6),      # malformed header
    ("@attribute f1 numeric", "@attribute f1 date", 6),  # unsupported type
])
def test_arff_errors_carry_line(old, new, line):
    with pytest.raises(CorpusError) as e:
        parse_arff(ARFF.replace(old, new))
    assert e.value.line == line
    assert f"line {line}" in str(e.value)


def test_arff_missing_label_is_schema_error():
    with pytest.raises(SchemaError):
        parse_arff(ARFF, LabelColumns(valence="arousal"))


def test_csv_minimal():
    c = parse_csv("f0,f1,valence,speaker,gender,language\n0.1,0.2,NEG,s1,F,de\n")
    assert c.dim == 2 and len(c) == 1 and c.records[0].language == "de"


def test_csv_missing_valence_column():
    with pytest.raises(SchemaError):
        parse_csv("f0,f1,speaker,gender,language\n0.1,0.2,s1,F,de\n")


def test_csv_non_finite_and_arity():
    with pytest.raises(CorpusError) as e:
        parse_csv("f0,valence,speaker,gender,language\nnan,NEG,s1,F,de\n")
    assert e.value.line == 2
    with pytest.raises(CorpusError) as e:
        parse_csv("f0,valence,speaker,gender,language\n1,NEG,s1,F\n")
    assert e.value.line == 2


def test_duplicate_ids_rejected():
    text = "id,f0,valence,speaker,gender,language\nx,1,NEG,s,F,en\nx,2,POS,s,F,en\n"
    with pytest.raises(CorpusError):
        parse_csv(text)


def test_categorical_emotions_through_corpus_name():
    text = "f0,valence,speaker,gender,language\n1,boredom,s,F,de\n2,Happiness,s,M,de\n"
    c = parse_csv(text, LabelColumns(corpus_name="EMODB"))
    assert [r.valence for r in c.records] == ["NEG", "POS"]


@pytest.mark.parametrize("corpus,emotion,valence", [
    ("IEMOCAP", "angry", "NEG"), ("EMODB", "boredom", "NEG"), ("EMOVO", "surprise", "POS"),
])
def test_map_valence_examples(corpus, emotion, valence):
    assert map_valence(corpus, emotion) == valence


def test_valence_map_full_table():
    expected = {
        "IEMOCAP": ({"angry", "sadness"}, {"neutral", "happy", "excited"}),
        "EMODB": ({"anger", "sadness", "fear", "disgust", "boredom"}, {"neutral", "happiness"}),
        "BUEMODB": ({"anger", "sadness"}, {"neutral", "joy"}),
        "EMOVO": ({"anger", "sadness", "fear", "disgust"}, {"neutral", "joy", "surprise"}),
    }
    for name, (neg, pos) in expected.items():
        table = VALENCE_MAP[name]
        assert set(table) == neg | pos
        assert {e for e, v in table.items() if v == "NEG"} == neg


def test_map_valence_unknowns():
    with pytest.raises(KeyError):
        map_valence("RAVDESS", "angry")
    with pytest.raises(KeyError):
        map_valence("EMODB", "surprise")


def small_corpus(seed=0):
    return synth_corpus(n_per_cell=3, dim=16, n_speakers=4, n_languages=2, seed=seed)


@pytest.mark.parametrize("writer,parser", [(write_csv, parse_csv), (write_arff, parse_arff)])
def test_round_trip(writer, parser):
    c = small_corpus()
    assert parser(writer(c)) == c


def test_file_round_trip(tmp_path):
    c = small_corpus(1)
    for name in ("c.csv", "c.arff"):
        save_corpus(c, tmp_path / name)
        assert load_corpus(tmp_path / name) == c


def test_minmax_examples():
    s = ScalerParams(np.array([2.0, 5.0]), np.array([4.0, 5.0]))
    out = apply_minmax(s, np.array([[3.0, 123.0], [1.0, -7.0], [9.0, 5.0]]))
    assert np.array_equal(out, [[0.5, 0.0], [0.0, 0.0], [1.0, 0.0]])


def test_minmax_fit_on_rows_only():
    X = np.array([[0.0], [10.0], [100.0]])
    s = fit_minmax(X, rows=[0, 1])
    assert s.min[0] == 0.0 and s.max[0] == 10.0
    with pytest.raises(ValueError):
        fit_minmax(X, rows=[])


@settings(max_examples=50)
@given(arrays(np.float64, (6, 3), elements=st.floats(-1e6, 1e6)),
       arrays(np.float64, (4, 3), elements=st.floats(-1e7, 1e7)))
def test_minmax_output_in_unit_box(train, test):
    out = apply_minmax(fit_minmax(train), test)
    assert np.all((out >= 0.0) & (out <= 1.0))


def test_loso_partition():
    c = synth_corpus(n_per_cell=2, dim=16, n_speakers=10, n_languages=2)
    folds = loso_splits(c)
    assert len(folds) == 10
    spk = c.labels("speaker")
    seen = []
    for train, test in folds:
        assert set(spk[train]).isdisjoint(spk[test])
        assert len(set(spk[test])) == 1
        assert sorted(np.r_[train, test].tolist()) == list(range(len(c)))
        seen += test.tolist()
    assert sorted(seen) == list(range(len(c)))


def test_loso_single_speaker():
    c = parse_csv("f0,valence,speaker,gender,language\n1,NEG,s,F,en\n2,POS,s,F,en\n")
    with pytest.raises(ValueError):
        loso_splits(c)


def test_synth_deterministic(tmp_path):
    a, b = small_corpus(5), small_corpus(5)
    save_corpus(a, tmp_path / "a.csv")
    save_corpus(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert small_corpus(6) != a


def test_synth_labels_are_crossed():
    c = synth_corpus(n_per_cell=2, dim=32, n_speakers=8, n_languages=2)
    cells = {(r.valence, r.gender, r.language) for r in c.records}
    assert len(cells) == 8
    counts = {}
    for r in c.records:
        counts[(r.valence, r.gender, r.language)] = counts.get((r.valence, r.gender, r.language), 0) + 1
    assert len(set(counts.values())) == 1


def test_synth_invalid_sizes():
    for kwargs in ({"dim": 8}, {"n_speakers": 3}, {"n_languages": 1}):
        with pytest.raises(ValueError):
            synth_corpus(**kwargs)
    with pytest.raises(ValueError):
        synth_corpus(snr_config={"pitch": 1.0})


def lstsq_probe_accuracy(X, y, seed):
    """Least-squares linear classifier trained on one half, scored on the other."""
    order = RandomSource(seed).permutation(len(y))
    tr, te = order[: len(y) // 2], order[len(y) // 2:]
    A = np.c_[X, np.ones(len(X))]
    t = np.where(y, 1.0, -1.0)
    w, *_ = np.linalg.lstsq(A[tr], t[tr], rcond=None)
    return float(np.mean((A[te] @ w > 0) == y[te]))


def test_linear_probe_recovers_gender():
    c = synth_corpus()
    y = c.labels("gender") == "M"
    assert lstsq_probe_accuracy(c.X, y, 0) >= 0.9


def test_shuffled_label_probe_is_chance():
    c = synth_corpus()
    y = (c.labels("gender") == "M")[RandomSource(99).permutation(len(c))]
    assert abs(lstsq_probe_accuracy(c.X, y, 0) - 0.5) <= 0.1


def test_concat_keeps_speakers_apart():
    a, b = small_corpus(0), small_corpus(1)
    pooled = concat_corpora([a, b], ["x", "y"])
    assert len(pooled) == len(a) + len(b)
    assert len(pooled.speakers) == len(a.speakers) + len(b.speakers)
    assert pooled.ids[0] == f"x/{a.ids[0]}"
    assert np.array_equal(pooled.X, np.vstack([a.X, b.X]))
    assert len(loso_splits(pooled)) == 8


def test_concat_errors():
    a = small_corpus()
    with pytest.raises(ValueError):
        concat_corpora([a, a])  # same default name
    with pytest.raises(CorpusError):
        concat_corpora([a, synth_corpus(n_per_cell=2, dim=20, n_speakers=4, n_languages=2)], ["p", "q"])
    with pytest.raises(ValueError):
        concat_corpora([])
