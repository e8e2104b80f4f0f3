import pytest
from hypothesis import given
from hypothesis import strategies as st

from slukit import corpus
from slukit.corpus import (ERROR_C, ERROR_N, NULL_LABEL, ConceptSegment,
                           Dataset, ParseError, SchemaError, TaggerOutput,
                           Token, Utterance, augment_error_labels,
                           labels_for_segments, read_dataset, repair_bio,
                           segments_of, strip_error_labels,
                           validate_label_sequence, write_dataset)

from helpers import utt


def test_read_empty_file(tmp_path):
    p = tmp_path / "empty.tsv"
    p.write_text("")
    ds = read_dataset(p)
    assert len(ds) == 0


def test_read_single_utterance(tmp_path):
    p = tmp_path / "one.tsv"
    p.write_text(
        "# id=u1\n"
        "0\ti\t_\t_\t_\t_\t_\t_\t_\t_\tnull\n"
        "1\tparis\t_\t_\t_\t_\tTOWN\t_\t_\t_\tB-TOWN\n"
        "2\tlyon\t_\t_\t_\t_\tTOWN\t_\t_\t_\tI-TOWN\n"
        "\n"
    )
    ds = read_dataset(p)
    assert len(ds) == 1
    segs = segments_of(ds.utterances[0])
    assert len(segs) == 1
    assert segs[0].label == "TOWN"


def test_read_bad_governor(tmp_path):
    p = tmp_path / "bad.tsv"
    p.write_text(
        "# id=u1\n"
        "0\ta\t_\t_\t99\t_\t_\t_\t_\t_\tnull\n"
        "1\tb\t_\t_\t_\t_\t_\t_\t_\t_\tnull\n"
        "2\tc\t_\t_\t_\t_\t_\t_\t_\t_\tnull\n"
        "\n"
    )
    with pytest.raises(SchemaError):
        read_dataset(p)


def test_read_malformed_row_reports_line(tmp_path):
    p = tmp_path / "bad.tsv"
    p.write_text("# id=u1\n0\ta\tonly-three-cells\n\n")
    with pytest.raises(ParseError) as exc:
        read_dataset(p)
    assert "line 2" in str(exc.value)


def test_read_invalid_continuation(tmp_path):
    p = tmp_path / "bad.tsv"
    p.write_text(
        "# id=u1\n"
        "0\ta\t_\t_\t_\t_\t_\t_\t_\t_\tnull\n"
        "1\tb\t_\t_\t_\t_\t_\t_\t_\t_\tI-TOWN\n"
        "\n"
    )
    with pytest.raises(SchemaError):
        read_dataset(p)


def test_roundtrip_byte_identical(tmp_path, small_corpus):
    p1, p2 = tmp_path / "a.tsv", tmp_path / "b.tsv"
    write_dataset(small_corpus, p1)
    write_dataset(read_dataset(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_confidence_absent_is_not_zero(tmp_path):
    p = tmp_path / "c.tsv"
    p.write_text("# id=u\n0\tword\t_\t_\t_\t_\t_\t_\t_\t_\t_\n\n")
    tok = read_dataset(p).utterances[0].tokens[0]
    assert tok.pap is None and tok.mlp_conf is None and tok.label is None


def test_duplicate_ids_rejected():
    u1 = utt("same", ["a"])
    u2 = utt("same", ["b"])
    with pytest.raises(SchemaError):
        Dataset((u1, u2))


def test_segments_all_null():
    u = utt("u", ["a", "b"], [NULL_LABEL, NULL_LABEL])
    assert segments_of(u) == []


def test_segments_single_token():
    u = utt("u", ["yes", "Paris"], [NULL_LABEL, "B-TOWN"])
    segs = segments_of(u)
    assert segs == [ConceptSegment("TOWN", "paris", 1, 2)]


def test_segments_value_normalization():
    # independently derived from the number table: thirty three -> 33
    u = utt("u", ["thirty", "three"], ["B-DATE", "I-DATE"])
    segs = segments_of(u, {"thirty three": "33"})
    assert segs == [ConceptSegment("DATE", "33", 0, 2)]


def test_segments_reject_error_labels():
    u = utt("u", ["a"], [ERROR_N])
    with pytest.raises(SchemaError):
        segments_of(u)


@st.composite
def segment_sets(draw):
    n = draw(st.integers(min_value=1, max_value=12))
    cuts = sorted(draw(st.sets(st.integers(min_value=0, max_value=n), min_size=2, max_size=6)))
    segs = []
    for a, b in zip(cuts, cuts[1:]):
        if draw(st.booleans()):
            label = draw(st.sampled_from(["TOWN", "DATE", "PRICE"]))
            segs.append((label, a, b))
    return n, segs


@given(segment_sets())
def test_segments_labels_roundtrip(case):
    n, triples = case
    words = [f"w{i}" for i in range(n)]
    segs = [ConceptSegment(lab, " ".join(words[a:b]), a, b) for lab, a, b in triples]
    labels = labels_for_segments(segs, n)
    u = utt("u", words, labels)
    assert segments_of(u) == segs


def test_validate_label_sequence_rejects_switch():
    with pytest.raises(SchemaError):
        validate_label_sequence(["B-TOWN", "I-DATE"])


def test_repair_bio_promotes_orphans():
    assert repair_bio([NULL_LABEL, "I-TOWN", "I-TOWN"]) == [NULL_LABEL, "B-TOWN", "I-TOWN"]
    assert repair_bio(["B-A", "I-B"]) == ["B-A", "B-B"]


def test_augment_all_correct_unchanged():
    u = utt("u", ["a", "b"], ["B-TOWN", NULL_LABEL], flags=["correct", "correct"])
    assert augment_error_labels(u).labels() == ["B-TOWN", NULL_LABEL]


def test_augment_error_on_concept():
    # erroneous word standing where the reference carried B-TOWN
    u = utt("u", ["a", "b"], ["B-TOWN", NULL_LABEL], flags=["error", "correct"])
    assert augment_error_labels(u).labels() == [ERROR_C, NULL_LABEL]


def test_augment_inserted_token():
    u = utt("u", ["a", "b"], [NULL_LABEL, NULL_LABEL], flags=["error", "correct"])
    assert augment_error_labels(u).labels() == [ERROR_N, NULL_LABEL]


def test_augment_requires_flags():
    u = utt("u", ["a"], [NULL_LABEL])
    with pytest.raises(SchemaError):
        augment_error_labels(u)


def test_augment_keeps_sequence_segmentable():
    u = utt("u", ["a", "b", "c"], ["B-TOWN", "I-TOWN", "I-TOWN"],
            flags=["correct", "error", "correct"])
    assert augment_error_labels(u).labels() == ["B-TOWN", ERROR_C, "B-TOWN"]


def test_strip_error_labels():
    out = TaggerOutput("u", ("B-TOWN", ERROR_N, NULL_LABEL))
    assert strip_error_labels(out).labels == ("B-TOWN", NULL_LABEL, NULL_LABEL)
    out = TaggerOutput("u", (ERROR_C, ERROR_C))
    assert strip_error_labels(out).labels == (NULL_LABEL, NULL_LABEL)


@given(st.lists(st.sampled_from(["B-TOWN", "I-TOWN", NULL_LABEL, ERROR_C, ERROR_N]),
                min_size=1, max_size=8))
def test_strip_is_idempotent_and_fixpoint(labels):
    out = TaggerOutput("u", tuple(labels))
    once = strip_error_labels(out)
    assert strip_error_labels(once) == once
    assert len(once.labels) == len(labels)
    if ERROR_C not in labels and ERROR_N not in labels:
        assert once == out


def test_outputs_file_roundtrip(tmp_path):
    outs = [TaggerOutput("u1", ("null", "B-TOWN")), TaggerOutput("u2", ("null",))]
    p = tmp_path / "o.lab"
    corpus.write_outputs(outs, p)
    assert corpus.read_outputs(p) == outs
