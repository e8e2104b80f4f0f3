import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from slukit import alignment
from slukit.alignment import (DEL, EPS, INS, MATCH, SUB, AlignmentError,
                              ConfusionNetwork, NoiseConfig, align, build_cn,
                              corrupt, decode_nbest, pap_of, project_labels,
                              read_nbest, sample_nbest, wer, write_cn,
                              write_nbest)
from slukit.corpus import NULL_LABEL, Token, Utterance

from helpers import brute_force_edit_cost, utt

words_st = st.lists(st.sampled_from("abcde"), min_size=0, max_size=6)


def test_align_identity():
    a = align(["x"], ["x"])
    assert a.cost == 0 and [op for op, _, _ in a.ops] == [MATCH]


def test_align_deletion():
    a = align(list("abc"), list("ac"))
    assert a.cost == 1
    assert [op for op, _, _ in a.ops] == [MATCH, DEL, MATCH]


@given(words_st, words_st)
def test_align_matches_brute_force(ref, hyp):
    a = align(ref, hyp)
    assert a.cost == brute_force_edit_cost(ref, hyp)
    # indices appear exactly once, in order
    ref_idx = [i for _, i, _ in a.ops if i is not None]
    hyp_idx = [j for _, _, j in a.ops if j is not None]
    assert ref_idx == list(range(len(ref)))
    assert hyp_idx == list(range(len(hyp)))
    for op, i, j in a.ops:
        if op == MATCH:
            assert ref[i] == hyp[j]
        elif op == SUB:
            assert ref[i] != hyp[j]


def test_wer_basics():
    assert wer(list("abcd"), list("abcd")) == 0.0
    assert wer(list("abcd"), list("abxd")) == 25.0
    with pytest.raises(AlignmentError):
        wer([], ["a"])


@given(words_st.filter(lambda w: len(w) >= 1), words_st)
def test_wer_relabel_invariance(ref, hyp):
    mapping = {c: f"tok-{c}" for c in "abcde"}
    assert wer(ref, hyp) == wer([mapping[w] for w in ref], [mapping[w] for w in hyp])


def test_noise_config_invariants():
    with pytest.raises(AlignmentError):
        NoiseConfig(sub_rate=0.0, del_rate=1.0, ins_rate=0.0)
    with pytest.raises(AlignmentError):
        NoiseConfig(sub_rate=0.6, del_rate=0.3, ins_rate=0.2)
    assert NoiseConfig().target_wer == pytest.approx(23.8)


def test_corrupt_zero_rates_is_identity(small_corpus, noise_config):
    cfg = dataclasses.replace(noise_config, sub_rate=0.0, del_rate=0.0, ins_rate=0.0)
    for u in small_corpus.utterances[:10]:
        hyp = corrupt(u, cfg)
        assert hyp.surfaces() == u.surfaces()
        assert all(t.error_flag == "correct" for t in hyp.tokens)


def test_corrupt_deterministic_and_flags_follow_alignment(small_corpus, noise_config):
    for u in small_corpus.utterances[:20]:
        h1, h2 = corrupt(u, noise_config), corrupt(u, noise_config)
        assert h1 == h2
        ali = align(u.surfaces(), h1.surfaces())
        matched = {j for op, _, j in ali.ops if op == MATCH}
        for j, t in enumerate(h1.tokens):
            assert (t.error_flag == "correct") == (j in matched)


def test_sample_nbest_contract(small_corpus, noise_config):
    u = small_corpus.utterances[0]
    single = sample_nbest(u, noise_config, 1)
    assert len(single) == 1
    assert sample_nbest(u, noise_config, 5) == sample_nbest(u, noise_config, 5)
    long_u = max(small_corpus, key=len)
    draws = sample_nbest(long_u, noise_config, 50)
    assert len({tuple(h) for _, h in draws}) >= 2
    weights = [w for w, _ in draws]
    assert weights == sorted(weights, reverse=True)  # most probable first


def test_decode_nbest_pivot_is_primary_draw(small_corpus, noise_config):
    for u in small_corpus.utterances[:10]:
        nbest = decode_nbest(u, noise_config, 6)
        assert nbest[0][1] == list(corrupt(u, noise_config).surfaces())


def test_build_cn_single_hypothesis():
    cn = build_cn([(1.0, ["a", "b"])])
    assert cn.bins == ((("a", 1.0),), (("b", 1.0),))


def test_build_cn_symmetric_pair():
    cn = build_cn([(0.5, ["a", "b"]), (0.5, ["a", "c"])])
    assert cn.bins[0] == (("a", 1.0),)
    assert dict(cn.bins[1]) == {"b": 0.5, "c": 0.5}


def test_build_cn_against_positional_count_oracle():
    # equal-length hypotheses differ per position, so alignment is
    # positional and posteriors must equal weighted counts
    hyps = [
        (0.4, ["a", "b", "c"]),
        (0.3, ["a", "x", "c"]),
        (0.2, ["a", "b", "y"]),
        (0.1, ["z", "b", "c"]),
    ]
    cn = build_cn(hyps)
    total = sum(w for w, _ in hyps)
    for pos in range(3):
        counts = {}
        for w, hyp in hyps:
            counts[hyp[pos]] = counts.get(hyp[pos], 0.0) + w
        assert dict(cn.bins[pos]) == pytest.approx(
            {word: c / total for word, c in counts.items()})
        assert sum(p for _, p in cn.bins[pos]) == pytest.approx(1.0, abs=1e-9)


def test_cn_epsilon_on_skipped_bin():
    cn = build_cn([(0.5, ["a", "b", "c"]), (0.5, ["a", "c"])])
    assert dict(cn.bins[1]) == {"b": 0.5, EPS: 0.5}


def test_pap_of():
    cn = build_cn([(0.5, ["a", "b"]), (0.5, ["a", "c"])])
    assert pap_of(cn, ["a", "b"]) == [1.0, 0.5]
    with pytest.raises(AlignmentError):
        pap_of(cn, ["a", "c"])


def test_project_zero_noise(small_corpus, noise_config):
    cfg = dataclasses.replace(noise_config, sub_rate=0.0, del_rate=0.0, ins_rate=0.0)
    for u in small_corpus.utterances[:10]:
        hyp = project_labels(corrupt(u, cfg))
        assert hyp.labels() == u.labels()


def test_project_insertion_gets_null():
    ref = utt("u", ["book", "paris"], [NULL_LABEL, "B-TOWN"])
    hyp_toks = tuple(Token(surface=w) for w in ["book", "euh", "paris"])
    hyp = Utterance("u", hyp_toks, reference_tokens=ref.tokens)
    assert project_labels(hyp).labels() == [NULL_LABEL, NULL_LABEL, "B-TOWN"]


def test_project_promotes_orphan_continuation():
    ref = utt("u", ["thirty", "three"], ["B-DATE", "I-DATE"])
    hyp_toks = (Token(surface="three"),)
    hyp = Utterance("u", hyp_toks, reference_tokens=ref.tokens)
    assert project_labels(hyp).labels() == ["B-DATE"]


def test_nbest_and_cn_files(tmp_path, small_corpus, noise_config):
    per_utt = [(u.id, decode_nbest(u, noise_config, 4))
               for u in small_corpus.utterances[:5]]
    p = tmp_path / "nbest.txt"
    write_nbest(p, per_utt)
    again = read_nbest(p)
    assert [uid for uid, _ in again] == [uid for uid, _ in per_utt]
    for (_, a), (_, b) in zip(again, per_utt):
        assert [h for _, h in a] == [h for _, h in b]
        assert [w for w, _ in a] == pytest.approx([w for w, _ in b])
    cns = [(uid, build_cn(nb)) for uid, nb in per_utt]
    write_cn(tmp_path / "cn.txt", cns)
    text = (tmp_path / "cn.txt").read_text()
    assert text.startswith(f"# id={per_utt[0][0]}")


def test_cn_validates_bin_sums():
    with pytest.raises(AlignmentError):
        ConfusionNetwork(bins=((("a", 0.5),),), pivot=("a",))
