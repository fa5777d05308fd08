import numpy as np
import pytest

from crowdagg import io
from crowdagg.errors import (
    DuplicateResponse,
    EmptyFile,
    MissingColumn,
    ShapeMismatch,
    UnreadableMask,
)


def test_ingest_csv_basic(tmp_path):
    path = tmp_path / "ann.csv"
    path.write_text("task,worker,label\nt1,w1,a\nt1,w2,b\nt2,w1,a\n")
    table = io.ingest_categorical(path)
    assert table.label_set == ("a", "b")
    assert table.n_tasks == 2


def test_ingest_tsv_and_jsonl_agree(tmp_path):
    csv_path = tmp_path / "a.csv"
    csv_path.write_text("task,worker,label\nt1,w1,a\nt2,w2,b\n")
    tsv_path = tmp_path / "a.tsv"
    tsv_path.write_text("task\tworker\tlabel\nt1\tw1\ta\nt2\tw2\tb\n")
    jsonl_path = tmp_path / "a.jsonl"
    jsonl_path.write_text(
        '{"task": "t1", "worker": "w1", "label": "a"}\n'
        '{"task": "t2", "worker": "w2", "label": "b"}\n'
    )
    t1 = io.ingest_categorical(csv_path)
    assert io.ingest_categorical(tsv_path) == t1
    assert io.ingest_categorical(jsonl_path) == t1


def test_column_permutation_oracle(tmp_path):
    """The header order in the file must not matter: a (task,label,worker)
    layout parses to the same table as (task,worker,label)."""
    ours = tmp_path / "ours.csv"
    ours.write_text("task,worker,label\nt1,w1,a\nt1,w2,b\nt2,w1,a\n")
    paper_order = tmp_path / "paper.csv"
    paper_order.write_text("task,label,worker\nt1,a,w1\nt1,b,w2\nt2,a,w1\n")
    assert io.ingest_categorical(paper_order) == io.ingest_categorical(ours)


def test_ingest_errors(tmp_path):
    dup = tmp_path / "dup.csv"
    dup.write_text("task,worker,label\nt1,w1,a\nt1,w1,b\n")
    with pytest.raises(DuplicateResponse):
        io.ingest_categorical(dup)
    empty = tmp_path / "empty.csv"
    empty.write_text("task,worker,label\n")
    with pytest.raises(EmptyFile):
        io.ingest_categorical(empty)
    missing = tmp_path / "missing.csv"
    missing.write_text("task,worker\nt1,w1\n")
    with pytest.raises(MissingColumn) as err:
        io.ingest_categorical(missing)
    assert err.value.column == "label"
    with pytest.raises(FileNotFoundError):
        io.ingest_categorical(tmp_path / "nope.csv")


def test_ingestion_deterministic(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("task,worker,label\nt2,w1,b\nt1,w1,a\n")
    assert io.ingest_categorical(path) == io.ingest_categorical(path)


def test_pbm_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    for i in range(9):
        mask = (rng.random((16, 16)) < 0.5).astype(np.uint8)
        path = tmp_path / f"m{i}.pbm"
        io.write_pbm(path, mask)
        assert np.array_equal(io.read_pbm(path), mask)


def test_pbm_malformed(tmp_path):
    bad = tmp_path / "bad.pbm"
    bad.write_text("P4\n2 2\n0 1 1 0\n")
    with pytest.raises(UnreadableMask):
        io.read_pbm(bad)
    short = tmp_path / "short.pbm"
    short.write_text("P1\n2 2\n0 1 1\n")
    with pytest.raises(UnreadableMask):
        io.read_pbm(short)


def test_pbm_comments_and_whitespace(tmp_path):
    path = tmp_path / "c.pbm"
    path.write_text("P1\n# a comment\n2 2\n0 1\n1 0\n")
    assert np.array_equal(io.read_pbm(path), np.array([[0, 1], [1, 0]]))


def test_ingest_masks_grouping(tmp_path):
    m1 = np.array([[1, 0], [0, 1]], dtype=np.uint8)
    m2 = np.array([[1, 1], [0, 0]], dtype=np.uint8)
    io.write_pbm(tmp_path / "a.pbm", m1)
    io.write_pbm(tmp_path / "b.pbm", m2)
    index = tmp_path / "index.csv"
    index.write_text("task,worker,mask_file\nt1,w1,a.pbm\nt1,w2,b.pbm\n")
    sets = io.ingest_masks(index)
    assert len(sets) == 1 and len(sets[0]) == 2
    assert np.array_equal(sets[0].masks[0], m1)


def test_ingest_masks_shape_mismatch(tmp_path):
    io.write_pbm(tmp_path / "a.pbm", np.zeros((2, 2), dtype=np.uint8))
    io.write_pbm(tmp_path / "b.pbm", np.zeros((3, 3), dtype=np.uint8))
    index = tmp_path / "index.csv"
    index.write_text("task,worker,mask_file\nt1,w1,a.pbm\nt1,w2,b.pbm\n")
    with pytest.raises(ShapeMismatch):
        io.ingest_masks(index)


def test_mask_sets_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    by_task = {
        f"t{i}": [(f"w{j}", (rng.random((8, 8)) < 0.4).astype(np.uint8)) for j in range(3)]
        for i in range(4)
    }
    index = io.write_mask_sets(tmp_path, by_task)
    sets = io.ingest_masks(index)
    assert [ms.task_id for ms in sets] == sorted(by_task)
    for ms in sets:
        for worker, original in by_task[ms.task_id]:
            stored = ms.masks[ms.workers.index(worker)]
            assert np.array_equal(stored, original)


def test_label_and_score_writers(tmp_path):
    labels = {"t2": "b", "t1": "a"}
    io.write_labels_csv(tmp_path / "labels.csv", labels)
    assert io.read_labels_csv(tmp_path / "labels.csv") == labels
    io.write_truth_scores(tmp_path / "scores.csv", {"i1": 0.25, "i2": -1.5})
    assert io.read_scores_csv(tmp_path / "scores.csv") == {"i1": 0.25, "i2": -1.5}
    io.write_sequence_labels_csv(tmp_path / "seq.csv", {"t1": ("a", "b")})
    assert io.read_sequences_csv(tmp_path / "seq.csv") == {"t1": ("a", "b")}
