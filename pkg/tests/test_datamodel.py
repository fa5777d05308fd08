import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdagg.categorical import (
    DawidSkene,
    Glad,
    Kos,
    Mace,
    MajorityVote,
    MMsr,
    Wawa,
)
from crowdagg.datamodel import (
    AnnotationTable,
    MaskSet,
    PairwiseTable,
    SequenceTable,
    rank_items,
)
from crowdagg.errors import (
    DuplicateResponse,
    EmptyTable,
    ShapeMismatch,
    ValidationError,
)
from crowdagg.synth import gen_categorical


def test_annotation_table_basic():
    table = AnnotationTable([("t1", "w1", "a"), ("t1", "w2", "b"), ("t2", "w1", "a")])
    assert table.label_set == ("a", "b")
    assert table.tasks == ("t1", "t2")
    assert table.n_tasks == 2 and table.n_workers == 2
    assert len(table) == 3


def test_annotation_table_duplicate_rejected():
    with pytest.raises(DuplicateResponse) as err:
        AnnotationTable([("t1", "w1", "a"), ("t1", "w1", "b")])
    assert err.value.task == "t1" and err.value.worker == "w1"


def test_annotation_table_empty_rejected():
    with pytest.raises(EmptyTable):
        AnnotationTable([])


def test_label_set_sorted_regardless_of_row_order():
    rows = [("t1", "w1", "z"), ("t2", "w1", "a"), ("t3", "w1", "m")]
    assert AnnotationTable(rows).label_set == ("a", "m", "z")
    assert AnnotationTable(reversed(rows)).label_set == ("a", "m", "z")


@st.composite
def annotation_rows(draw):
    entries = draw(
        st.dictionaries(
            st.tuples(
                st.sampled_from([f"t{i}" for i in range(6)]),
                st.sampled_from([f"w{i}" for i in range(5)]),
            ),
            st.sampled_from(["a", "b", "c"]),
            min_size=1,
            max_size=25,
        )
    )
    return [(t, w, l) for (t, w), l in entries.items()]


@settings(max_examples=40, deadline=None)
@given(annotation_rows())
def test_row_permutation_is_canonicalized(rows):
    table = AnnotationTable(rows)
    table_rev = AnnotationTable(list(reversed(rows)))
    assert table.rows == table_rev.rows
    assert np.array_equal(table.task_idx, table_rev.task_idx)
    assert np.array_equal(table.label_idx, table_rev.label_idx)


def _all_methods():
    return [
        MajorityVote(),
        Wawa(),
        DawidSkene(n_iter=20),
        Glad(n_iter=10),
        Mace(n_iter=20, restarts=3, seed=5),
        Kos(seed=5),
        MMsr(seed=5),
    ]


def test_permuting_rows_leaves_every_aggregator_unchanged():
    table, _, _ = gen_categorical(30, 10, 5, 2, ("beta", 4, 1), "one-coin", seed=3)
    rng = np.random.default_rng(0)
    shuffled = list(table.rows)
    rng.shuffle(shuffled)
    table2 = AnnotationTable(shuffled)
    for method in _all_methods():
        r1 = method.fit_predict(table)
        r2 = type(method)(**method.get_params()).fit_predict(table2)
        assert r1.labels == r2.labels, type(method).__name__
        if r1.posteriors is not None:
            for t in r1.posteriors:
                assert np.array_equal(r1.posteriors[t], r2.posteriors[t])
        if r1.skills is not None:
            assert r1.skills == r2.skills


def test_posterior_simplex_and_argmax_contract():
    table, _, _ = gen_categorical(25, 8, 4, 3, ("beta", 3, 2), "confusion", seed=11)
    for method in (MajorityVote(), Wawa(), DawidSkene(), Glad(n_iter=15), Mace(restarts=3)):
        result = method.fit_predict(table)
        for task, vec in result.posteriors.items():
            assert vec.min() >= 0
            assert abs(vec.sum() - 1.0) <= 1e-8
            winner = table.label_set[int(np.argmax(vec))]
            assert result.labels[task] == winner


def test_pairwise_table_validation():
    with pytest.raises(ValidationError):
        PairwiseTable([("w", "a", "a", "a")])
    with pytest.raises(ValidationError):
        PairwiseTable([("w", "a", "b", "c")])
    table = PairwiseTable([("w", "b", "a", "a")])
    assert table.items == ("a", "b")
    assert PairwiseTable([]).rows == ()


def test_sequence_table_validation():
    with pytest.raises(ValidationError):
        SequenceTable([("t", "w", [])])
    with pytest.raises(DuplicateResponse):
        SequenceTable([("t", "w", ["a"]), ("t", "w", ["b"])])
    table = SequenceTable([("t", "w", "the  quick\tfox")])
    assert table.rows[0][2] == ("the", "quick", "fox")


def test_maskset_validation():
    m = np.array([[1, 0], [0, 1]], dtype=np.uint8)
    ms = MaskSet("t", [("w1", m), ("w2", 1 - m)])
    assert len(ms) == 2 and ms.shape == (2, 2)
    with pytest.raises(ShapeMismatch):
        MaskSet("t", [("w1", m), ("w2", np.zeros((3, 3), dtype=np.uint8))])
    with pytest.raises(ValidationError):
        MaskSet("t", [("w1", np.array([[0, 2]]))])
    with pytest.raises(DuplicateResponse):
        MaskSet("t", [("w1", m), ("w1", m)])


def test_rank_items_tie_break():
    assert rank_items({"b": 1.0, "a": 1.0, "c": 2.0}) == ("c", "a", "b")


def test_get_set_params_roundtrip():
    ds = DawidSkene(n_iter=7, tol=1e-4, smoothing=0.5)
    assert ds.get_params() == {"n_iter": 7, "tol": 1e-4, "smoothing": 0.5}
    ds.set_params(n_iter=3)
    assert ds.n_iter == 3
    with pytest.raises(ValueError):
        ds.set_params(bogus=1)
